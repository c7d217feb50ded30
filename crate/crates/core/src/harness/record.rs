//! Per-epoch CSV log.

use std::fmt::Write as _;

use crate::gan::EpochRecord;

pub const CSV_HEADER: &str = "epoch,loss_d,loss_g,beta_low,beta_high,fid_proxy,spec_high_dist,seconds";

/// One CSV line (no newline). Epochs are written 1-based.
pub fn csv_row(r: &EpochRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{:.3}",
        r.epoch + 1,
        r.loss_d,
        r.loss_g,
        r.beta_low,
        r.beta_high,
        r.fid_proxy,
        r.spec_high_dist,
        r.seconds
    )
}

pub fn csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", csv_row(r));
    }
    s
}

/// Parses a CSV produced by [`csv`].
pub fn parse_csv(text: &str) -> Option<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next()? != CSV_HEADER {
        return None;
    }
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
            if v.len() != 8 || v[0] < 1.0 {
                return None;
            }
            Some(EpochRecord {
                epoch: v[0] as usize - 1,
                loss_d: v[1],
                loss_g: v[2],
                beta_low: v[3],
                beta_high: v[4],
                fid_proxy: v[5],
                spec_high_dist: v[6],
                seconds: v[7],
            })
        })
        .collect()
}
