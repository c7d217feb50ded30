//! End-to-end acceptance criteria. Each test prints one `criterion N` line
//! with its verdict and the measured numbers, then asserts. Lines go straight
//! to the stdout handle so they show without `--nocapture`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use octogan::autograd::{BnMode, Graph};
use octogan::gan::{generate, ConvKind, Discriminator, GanConfig, Generator, TrainState};
use octogan::gradcheck::{run_gradcheck, TOLERANCE};
use octogan::harness::experiment::{eval_seed, to_unit};
use octogan::harness::{csv, parse_config, print_config, run_training, ExperimentConfig, ImageDataset};
use octogan::metrics::{fid, fit_stats, power_2d, power_spectrum_1d, spectrum_distance, Band, FidStats};
use octogan::nn::Conv2d;
use octogan::octave::{
    octave_conv_forward, soft_octave_conv_forward, BetaSchedule, OctaveConv2d, OctaveFeature, ScheduleKind,
    SoftOctaveConvParams,
};
use octogan::param::ParamStore;
use octogan::rng::Rng;
use octogan::tensor::Tensor;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    say(&format!("criterion {id} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" }));
    assert!(pass, "criterion {id} failed: {detail}");
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn rand64(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = Rng::new(seed);
    Tensor::from_fn(shape.to_vec(), |_| r.uniform_range(-1.0, 1.0))
}

const GRADCHECK_BUDGET_SECS: f64 = 300.0;

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let reports = run_gradcheck(20, 2024).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let failing: Vec<_> = reports.iter().filter(|r| !r.passed() || r.instances < 20).map(|r| r.op).collect();
    let pass = failing.is_empty() && secs < GRADCHECK_BUDGET_SECS && reports.len() == 18;
    let detail = format!("{} ops x 20, worst rel err {worst:.2e} < {TOLERANCE:e}, {secs:.1}s, failing {failing:?}", reports.len());
    report(1, "gradient suite", pass, &detail);
}

#[test]
fn criterion_2_degeneracy() {
    let mut ok = true;
    let mut worst_alpha0 = 0.0f64;
    for seed in 0..10u64 {
        let (cin, cout, stride) = (2 + seed as usize % 3, 1 + seed as usize % 4, 1 + seed as usize % 2);
        let mut store = ParamStore::<f64>::new();
        let layer = OctaveConv2d::new(&mut store, "oct", cin, cout, 3, 0.0, 0.0, stride, 1, false, &mut Rng::new(seed)).unwrap();
        let mut g = Graph::new();
        let x = g.constant(rand64(&[2, cin, 8, 8], 100 + seed));
        let p = layer.bind(&mut g, &store);
        let y = octave_conv_forward(&mut g, OctaveFeature::plain(x), &p).unwrap();
        let direct = g.conv2d(x, p.w_hh.unwrap(), None, stride, 1).unwrap();
        worst_alpha0 = worst_alpha0.max(g.value(y.high.unwrap()).max_abs_diff(g.value(direct)));
        ok &= y.low.is_none();
    }
    let mut soft_bit_equal = true;
    for seed in 0..10u64 {
        let mut store = ParamStore::<f64>::new();
        let transposed = seed % 2 == 1;
        let layer = OctaveConv2d::new(&mut store, "o", 4, 6, 4, 0.5, 0.5, 2, 1, transposed, &mut Rng::new(seed)).unwrap();
        let mut g = Graph::new();
        let high = g.constant(rand64(&[2, 2, 8, 8], 200 + seed));
        let low = g.constant(rand64(&[2, 2, 4, 4], 300 + seed));
        let f = OctaveFeature { high: Some(high), low: Some(low) };
        let base = layer.bind(&mut g, &store);
        let plain = octave_conv_forward(&mut g, f, &base).unwrap();
        let soft = soft_octave_conv_forward(&mut g, f, &SoftOctaveConvParams { base, beta_low: 1.0, beta_high: 1.0 }).unwrap();
        for (a, b) in [(plain.high, soft.high), (plain.low, soft.low)] {
            let (a, b) = (g.value(a.unwrap()), g.value(b.unwrap()));
            soft_bit_equal &= a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
        }
    }
    let mut parity = true;
    for (cin, cout) in [(4, 8), (8, 16), (2, 6), (16, 32)] {
        for alpha in [0.25, 0.5, 0.75] {
            let mut s1 = ParamStore::<f32>::new();
            Conv2d::new(&mut s1, "c", cin, cout, 3, 1, 1, false, false, &mut Rng::new(1)).unwrap();
            let mut s2 = ParamStore::<f32>::new();
            OctaveConv2d::new(&mut s2, "o", cin, cout, 3, alpha, alpha, 1, 1, false, &mut Rng::new(1)).unwrap();
            parity &= s1.numel() == s2.numel();
        }
    }
    for conv in [ConvKind::Octave { alpha: 0.5 }, ConvKind::SoftOctave { schedule: BetaSchedule::new(ScheduleKind::Combination) }] {
        let count = |conv: ConvKind| {
            let cfg = GanConfig { conv, ..GanConfig::default() };
            let g = Generator::<f32>::new(&cfg, &mut Rng::new(1)).unwrap().store.numel();
            let d = Discriminator::<f32>::new(&cfg, &mut Rng::new(1)).unwrap().store.numel();
            (g, d)
        };
        parity &= count(conv) == count(ConvKind::Standard);
    }
    let pass = ok && worst_alpha0 <= 1e-12 && soft_bit_equal && parity;
    let detail = format!(
        "alpha=0 max diff {worst_alpha0:.1e} <= 1e-12, soft beta=(1,1) bit-equal {soft_bit_equal}, parameter parity {parity}"
    );
    report(2, "degeneracy", pass, &detail);
}

fn gaussian_stats(n: usize, d: usize, seed: u64, shift: f64, stretch: f64) -> FidStats {
    let mut rng = Rng::new(seed);
    let mix = rand64(&[d, d], seed + 7);
    let mut rows = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut z = vec![0.0; d];
        rng.fill_normal(&mut z);
        rows.extend((0..d).map(|j| shift + stretch * (0..d).map(|k| z[k] * mix.data()[k * d + j]).sum::<f64>()));
    }
    fit_stats(&Tensor::new(vec![n, d], rows).unwrap()).unwrap()
}

fn fid_oracle(a: &FidStats, b: &FidStats) -> f64 {
    let d = a.dim();
    let sa = DMatrix::from_row_slice(d, d, &a.sigma);
    let sb = DMatrix::from_row_slice(d, d, &b.sigma);
    let cross: f64 = (&sa * &sb).complex_eigenvalues().iter().map(|z| z.sqrt().re).sum();
    let mean: f64 = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y) * (x - y)).sum();
    mean + sa.trace() + sb.trace() - 2.0 * cross
}

#[test]
fn criterion_3_fid_properties() {
    let (mut self_err, mut sym_err, mut oracle_err) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..6 {
        let d = 4 + 4 * seed as usize;
        let a = gaussian_stats(400, d, seed, 0.0, 1.0);
        let b = gaussian_stats(400, d, 50 + seed, 0.2, 1.3);
        self_err = self_err.max(fid(&a, &a).unwrap().abs());
        let ab = fid(&a, &b).unwrap();
        sym_err = sym_err.max((ab - fid(&b, &a).unwrap()).abs());
        oracle_err = oracle_err.max((ab - fid_oracle(&a, &b)).abs());
    }
    let mut analytic_err = 0.0f64;
    for d in [1, 8, 64] {
        let mut sigma = vec![0.0; d * d];
        (0..d).for_each(|i| sigma[i * d + i] = 1.0);
        let mut mu = vec![0.0; d];
        mu[d - 1] = 1.0;
        let a = FidStats { mu: vec![0.0; d], sigma: sigma.clone(), n: 2 };
        let b = FidStats { mu, sigma, n: 2 };
        analytic_err = analytic_err.max((fid(&a, &b).unwrap() - 1.0).abs());
    }
    let pass = self_err <= 1e-6 && sym_err <= 1e-8 && analytic_err <= 1e-8 && oracle_err <= 1e-6;
    let detail = format!(
        "fid(a,a) {self_err:.1e}, symmetry {sym_err:.1e}, analytic {analytic_err:.1e}, dense oracle {oracle_err:.1e}"
    );
    report(3, "FID properties", pass, &detail);
}

#[test]
fn criterion_4_spectrum_properties() {
    let mut parseval = 0.0f64;
    for (seed, s) in [(1, 8), (2, 32), (3, 64)] {
        let img = rand64(&[s * s], seed);
        let lhs: f64 = power_2d(img.data(), s).unwrap().iter().sum();
        let rhs = (s * s) as f64 * img.data().iter().map(|v| v * v).sum::<f64>();
        parseval = parseval.max((lhs - rhs).abs() / rhs);
    }
    let p = power_spectrum_1d(&Tensor::<f64>::full(vec![3, 3, 32, 32], 0.7)).unwrap();
    let dc_only = (p.power[0] - 0.49).abs() < 1e-10 && p.power[1..].iter().all(|v| v.abs() < 1e-10);
    let mut localized = true;
    for f in 1..=16 {
        let img = Tensor::from_fn(vec![1, 1, 32, 32], |i| {
            (2.0 * std::f64::consts::PI * f as f64 * (i % 32) as f64 / 32.0).cos()
        });
        let p = power_spectrum_1d(&img).unwrap();
        let total: f64 = p.power.iter().sum();
        localized &= p.power[f] > 0.999 * total;
    }
    let ds = ImageDataset::load(&parse_config("", &[]).unwrap().data, 32).unwrap();
    let half = ds.count / 2;
    let a = power_spectrum_1d(&to_unit(&ds.slice::<f32>(0, half).unwrap())).unwrap();
    let b = power_spectrum_1d(&to_unit(&ds.slice::<f32>(half, half).unwrap())).unwrap();
    let split = spectrum_distance(&a, &b, Band::Full).unwrap();
    let pass = parseval <= 1e-6 && dc_only && localized && split < 0.1;
    let detail = format!(
        "Parseval rel err {parseval:.1e}, DC-only {dc_only}, cosine localized {localized}, split-half distance {split:.4} < 0.1"
    );
    report(4, "spectrum properties", pass, &detail);
}

fn experiment(conv: &str, seed: u64, out: &Path) -> ExperimentConfig {
    let mut args = vec![
        "image_size=32".to_string(),
        "epochs=20".into(),
        "batch_size=64".into(),
        "loss=vanilla".into(),
        "synthetic=shapes:2048:1".into(),
        format!("seed={seed}"),
        format!("out_dir={}", out.display()),
    ];
    args.extend(conv.split_whitespace().map(String::from));
    parse_config("", &args).unwrap()
}

#[test]
fn criterion_5_scaled_stability() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut arms = Vec::new();
    for (arm, conv) in [("standard", "conv=standard"), ("soft_octave", "conv=soft_octave schedule=combination")] {
        let (mut fids, mut specs, mut diverged) = (Vec::new(), Vec::new(), 0);
        for seed in [1, 2, 3] {
            let cfg = experiment(conv, seed, &dir.path().join(format!("{arm}{seed}")));
            match run_training(&cfg, None, None, &mut |_| {}) {
                Ok(state) => {
                    let last = state.history.last().unwrap();
                    say(&format!("  {arm} seed {seed}: fid_proxy {:.4} spec_high_dist {:.4}", last.fid_proxy, last.spec_high_dist));
                    fids.push(last.fid_proxy);
                    specs.push(last.spec_high_dist);
                }
                Err(e) => {
                    say(&format!("  {arm} seed {seed}: {e}"));
                    diverged += 1;
                }
            }
        }
        arms.push((fids, specs, diverged));
    }
    let secs = start.elapsed().as_secs_f64();
    let (std_arm, soft_arm) = (&arms[0], &arms[1]);
    let no_divergence = soft_arm.2 == 0;
    let complete = no_divergence && std_arm.2 == 0;
    let (std_spec, soft_spec) = if complete { (median(std_arm.1.clone()), median(soft_arm.1.clone())) } else { (f64::NAN, f64::NAN) };
    let (std_fid, soft_fid) = if complete { (median(std_arm.0.clone()), median(soft_arm.0.clone())) } else { (f64::NAN, f64::NAN) };
    let spectrum_ok = soft_spec <= std_spec;
    let fid_ok = soft_fid <= 1.25 * std_fid;
    let detail = format!(
        "(a) soft divergences {}, (b) median high-band distance soft {soft_spec:.4} vs standard {std_spec:.4}, \
         (c) median FID-proxy soft {soft_fid:.4} vs 1.25 x standard {:.4}, {secs:.0}s",
        soft_arm.2,
        1.25 * std_fid
    );
    report(5, "scaled stability", no_divergence && spectrum_ok && fid_ok, &detail);
}

#[test]
fn criterion_6_zero_high_beta() {
    let dir = tempfile::tempdir().unwrap();
    let conv = "conv=soft_octave schedule=constant schedule_points=0:1:0,1:1:0";
    let real = ImageDataset::load(&experiment(conv, 1, dir.path()).data, 32).unwrap();
    let real_high = power_spectrum_1d(&to_unit(&real.all::<f32>().unwrap())).unwrap().high_band_power();
    let mut all_ok = true;
    let mut lines = Vec::new();
    for seed in [1, 2, 3] {
        let cfg = experiment(conv, seed, &dir.path().join(format!("b0_{seed}")));
        match run_training(&cfg, None, None, &mut |_| {}) {
            Ok(mut state) => {
                let completed = state.epoch == cfg.gan.epochs;
                let samples = generate(&mut state.generator, cfg.eval_samples, eval_seed(&cfg)).unwrap();
                let gen_high = power_spectrum_1d(&to_unit(&samples)).unwrap().high_band_power();
                all_ok &= completed && gen_high < real_high;
                lines.push(format!("seed {seed}: {gen_high:.3e}"));
            }
            Err(e) => {
                all_ok = false;
                lines.push(format!("seed {seed}: {e}"));
            }
        }
    }
    let detail = format!("generated high-band power [{}] vs real {real_high:.3e}", lines.join(", "));
    report(6, "beta_high=0 low-pass regime", all_ok, &detail);
}

fn rows_without_seconds(text: &str) -> Vec<String> {
    text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn criterion_7_engineering() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = |out: &str, extra: &[&str]| {
        let mut args: Vec<String> = [
            "image_size=16",
            "latent_dim=16",
            "base_channels=4",
            "batch_size=8",
            "eval_samples=32",
            "epochs=4",
            "synthetic=shapes:64:4",
            "conv=soft_octave",
            "schedule=ramp",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        args.push(format!("out_dir={}", dir.path().join(out).display()));
        args.extend(extra.iter().map(|s| s.to_string()));
        parse_config("", &args).unwrap()
    };
    let read = |cfg: &ExperimentConfig| std::fs::read_to_string(cfg.out_dir.join("metrics.csv")).unwrap();

    let full = tiny("full", &[]);
    run_training(&full, None, None, &mut |_| {}).unwrap();
    let part = tiny("part", &[]);
    run_training(&part, None, Some(2), &mut |_| {}).unwrap();
    let (state, saved_cfg) = octogan::harness::load_checkpoint::<f32>(&part.out_dir.join("checkpoint.sogc")).unwrap();
    let resumed = run_training(&saved_cfg, Some(state), None, &mut |_| {}).unwrap();
    let resume_equal = rows_without_seconds(&read(&full)) == rows_without_seconds(&read(&part))
        && rows_without_seconds(&csv(&resumed.history)).len() == 5;

    let again = tiny("again", &[]);
    run_training(&again, None, None, &mut |_| {}).unwrap();
    let deterministic = rows_without_seconds(&read(&full)) == rows_without_seconds(&read(&again));

    let mut fixpoint = true;
    for extra in [
        &["conv=standard", "loss=wgan", "clip=0.05"][..],
        &["conv=octave", "alpha=0.99", "loss=lsgan"],
        &["conv=soft_octave", "schedule=coupled", "lr=0.0001"],
        &["conv=soft_octave", "schedule=constant", "schedule_points=0:1:0,1:1:0"],
        &["data_dir=/data/celeba", "seed=123456789"],
    ] {
        let mut base: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        base.push("out_dir=x".into());
        let cfg = parse_config("", &base).unwrap();
        let text = print_config(&cfg);
        let again = parse_config(&text, &[]).unwrap();
        fixpoint &= again == cfg && print_config(&again) == text;
    }
    // Standalone state check: a fresh state with identical seed reproduces identical parameters.
    let a = TrainState::<f32>::new(&full.gan).unwrap();
    let b = TrainState::<f32>::new(&full.gan).unwrap();
    let same_init = a.generator.store.iter().zip(b.generator.store.iter()).all(|(x, y)| x.value == y.value);
    let mut g = Graph::<f32>::new();
    let mut gen = a.generator.clone();
    let z = g.constant(Tensor::zeros(vec![2, full.gan.latent_dim]));
    let shaped = gen.forward(&mut g, z, BnMode::Eval).is_ok();

    let pass = resume_equal && deterministic && fixpoint && same_init && shaped;
    let detail = format!("resume CSV equality {resume_equal}, end-to-end determinism {deterministic}, config fixpoint {fixpoint}");
    report(7, "engineering", pass, &detail);
}
