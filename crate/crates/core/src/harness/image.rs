//! Netpbm (PGM/PPM) reading and writing, ASCII and binary variants.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved pixels in `[0, 1]`, `channels` is 1 (gray) or 3 (RGB).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !(channels == 1 || channels == 3) || data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "{} values do not form a {width}×{height} image with {channels} channels",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        let c = if self.channels == 1 { 0 } else { c };
        self.data[(y * self.width + x) * self.channels + c]
    }
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    body: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let bad = |m: &str| Error::Image(m.to_string());
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'2' | b'3' | b'5' | b'6') {
        return Err(bad("not a PGM/PPM file"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?;
        *f = text.parse().map_err(|_| bad("malformed header number"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing whitespace after header"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("header values out of range"));
    }
    Ok(Header { magic: [bytes[0], bytes[1]], width, height, maxval, body: pos + 1 })
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let h = parse_header(bytes)?;
    let channels = if matches!(h.magic[1], b'2' | b'5') { 1 } else { 3 };
    let count = h.width * h.height * channels;
    let scale = h.maxval as f32;
    let raw: Vec<usize> = if matches!(h.magic[1], b'5' | b'6') {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let body = bytes.get(h.body..h.body + need).ok_or_else(|| Error::Image("truncated pixel data".into()))?;
        if wide {
            body.chunks(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as usize).collect()
        } else {
            body.iter().map(|&b| b as usize).collect()
        }
    } else {
        let text = std::str::from_utf8(&bytes[h.body..]).map_err(|_| Error::Image("non-ASCII pixel data".into()))?;
        let vals: std::result::Result<Vec<usize>, _> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_ascii_whitespace)
            .take(count)
            .map(str::parse)
            .collect();
        let vals = vals.map_err(|_| Error::Image("malformed pixel value".into()))?;
        if vals.len() < count {
            return Err(Error::Image("truncated pixel data".into()));
        }
        vals
    };
    if raw.iter().any(|&v| v > h.maxval) {
        return Err(Error::Image("pixel value exceeds maxval".into()));
    }
    Image::new(h.width, h.height, channels, raw.iter().map(|&v| v as f32 / scale).collect())
}

pub fn read_image(path: &Path) -> Result<Image> {
    decode(&fs::read(path)?).map_err(|e| match e {
        Error::Image(m) => Error::Image(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM (RGB) or PGM (gray) with maxval 255.
pub fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize(v)));
    out
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode(img))?;
    Ok(())
}

/// Square crop around the centre, then bilinear resampling to `size×size`
/// (pixel-centre aligned).
pub fn crop_resize(img: &Image, size: usize) -> Image {
    let side = img.width.min(img.height);
    let (x0, y0) = ((img.width - side) / 2, (img.height - side) / 2);
    let scale = side as f32 / size as f32;
    let mut data = Vec::with_capacity(size * size * img.channels);
    let coord = |o: usize| {
        let s = ((o as f32 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f32);
        let i = (s.floor() as usize).min(side - 1);
        (i, (i + 1).min(side - 1), s - i as f32)
    };
    for oy in 0..size {
        let (ya, yb, fy) = coord(oy);
        for ox in 0..size {
            let (xa, xb, fx) = coord(ox);
            for c in 0..img.channels {
                let p = |x: usize, y: usize| img.get(x0 + x, y0 + y, c);
                let top = p(xa, ya) * (1.0 - fx) + p(xb, ya) * fx;
                let bot = p(xa, yb) * (1.0 - fx) + p(xb, yb) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Image { width: size, height: size, channels: img.channels, data }
}

/// Tiles `[N, 3, S, S]` samples in `[-1, 1]` into a `cols`-wide grid.
pub fn sample_grid(samples: &[f32], n: usize, size: usize, cols: usize) -> Image {
    let rows = n.div_ceil(cols).max(1);
    let (w, h) = (cols * size, rows * size);
    let mut data = vec![0.0; w * h * 3];
    let plane = size * size;
    for i in 0..n {
        let (gx, gy) = ((i % cols) * size, (i / cols) * size);
        for c in 0..3 {
            for y in 0..size {
                for x in 0..size {
                    let v = samples[(i * 3 + c) * plane + y * size + x];
                    data[((gy + y) * w + gx + x) * 3 + c] = (v + 1.0) * 0.5;
                }
            }
        }
    }
    Image { width: w, height: h, channels: 3, data }
}
