//! Binary PPM (P6) and PGM (P5) codecs with maxval 255, and the mapping
//! between 8-bit samples and the model range `[-1, 1]`.

use std::path::Path;
#[cfg(test)]
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `v ↦ 2v/255 − 1`.
pub fn dequantize(v: u8) -> f64 {
    2.0 * v as f64 / 255.0 - 1.0
}

/// Inverse of [`dequantize`] with round-half-away-from-zero and clamping.
pub fn quantize(x: f64) -> u8 {
    let v = ((x + 1.0) * 127.5).round();
    if v.is_nan() {
        0
    } else {
        v.clamp(0.0, 255.0) as u8
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                path: self.path.to_path_buf(),
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Parses a P5/P6 file body; returns `(width, height, samples)`.
pub fn decode(bytes: &[u8], magic: &[u8; 2], channels: usize, path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut c = Cursor { bytes, pos: 0, path };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(c.err(format!("expected magic {}", String::from_utf8_lossy(magic))));
    }
    c.pos = 2;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.err("zero image extent"));
    }
    if maxval != 255 {
        return Err(c.err(format!("maxval {maxval} unsupported, expected 255")));
    }
    if !bytes.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(c.err("expected single whitespace before pixel data"));
    }
    c.pos += 1;
    let need = width * height * channels;
    let have = bytes.len() - c.pos;
    if have < need {
        c.pos = bytes.len();
        return Err(c.err(format!("truncated payload: {need} bytes expected, {have} present")));
    }
    if have > need {
        c.pos += need;
        return Err(c.err("trailing bytes after payload"));
    }
    Ok((width, height, bytes[c.pos..].to_vec()))
}

pub fn encode(magic: &str, width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    decode(&read(path)?, b"P5", 1, path)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, samples: &[u8]) -> Result<()> {
    write(path, &encode("P5", width, height, samples))
}

/// `[h, w, 3]` image in model range to P6 bytes.
pub fn encode_image(img: &Tensor) -> Result<Vec<u8>> {
    let s = img.shape();
    if s.len() != 3 || s[2] != 3 {
        return Err(Error::InvalidShape(s.to_vec()));
    }
    let samples: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    Ok(encode("P6", s[1], s[0], &samples))
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let (w, h, samples) = decode(bytes, b"P6", 3, path)?;
    Tensor::new(&[h, w, 3], samples.into_iter().map(dequantize).collect())
}

pub fn save_image(img: &Tensor, path: &Path) -> Result<()> {
    write(path, &encode_image(img)?)
}

pub fn load_image(path: &Path) -> Result<Tensor> {
    decode_image(&read(path)?, path)
}

/// Rounds every value onto the 8-bit grid, as a save/load cycle would.
pub fn quantize_image(img: &Tensor) -> Tensor {
    img.map(|v| dequantize(quantize(v)))
}

#[cfg(test)]
pub(crate) fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}
