//! Netpbm graymap (PGM) reading and writing, plain (`P2`) and raw (`P5`).

use crate::error::{Error, Result};
use crate::world::WorldImage;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    // Whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} does not fit in 32 bits"),
            })
    }
}

/// Parses a PGM file into an image with intensities `v / maxval`.
pub fn parse_pgm(bytes: &[u8]) -> Result<WorldImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let raw = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        Some(_) => return Err(cur.err("unsupported magic number, expected P2 or P5")),
        None => return Err(cur.err("file too short for a PGM header")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let scale = f64::from(maxval);

    let mut pixels = Vec::with_capacity(count);
    if raw {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected whitespace after maxval")),
        }
        let sample_len = if maxval > 255 { 2 } else { 1 };
        let needed = count * sample_len;
        let payload = bytes
            .get(cur.pos..cur.pos + needed)
            .ok_or_else(|| cur.err(format!("truncated raster: need {needed} bytes")))?;
        for chunk in payload.chunks_exact(sample_len) {
            let v = if sample_len == 2 {
                u32::from(u16::from_be_bytes([chunk[0], chunk[1]]))
            } else {
                u32::from(chunk[0])
            };
            if v > maxval {
                return Err(cur.err(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(f64::from(v) / scale);
        }
    } else {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number("pixel value").map_err(|_| Error::Parse {
                offset: at,
                message: format!("truncated raster: expected {count} samples"),
            })?;
            if v > maxval {
                return Err(Error::Parse {
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            pixels.push(f64::from(v) / scale);
        }
    }
    WorldImage::new(width, height, pixels)
}

/// Quantizes an intensity to a byte: clamp to `[0, 1]`, scale by 255, round
/// half up.
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

/// Plain-text `P2` encoding with maxval 255.
pub fn encode_p2(image: &WorldImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
    for row in image.pixels().chunks(image.width()) {
        let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

/// Raw `P5` encoding of intensities in row-major order.
pub fn encode_p5(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::dimension("raster", width * height, values.len()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| quantize(v)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_two_by_two() {
        let img = parse_pgm(b"P2 2 2 255 0 255 255 0").unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn raw_constant_128() {
        let mut bytes = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        bytes.extend([128u8; 6]);
        let img = parse_pgm(&bytes).unwrap();
        for &v in img.pixels() {
            assert!((v - 0.50196).abs() < 1e-5);
        }
    }

    #[test]
    fn raw_sixteen_bit() {
        let mut bytes = b"P5 1 2 1000\n".to_vec();
        bytes.extend(1000u16.to_be_bytes());
        bytes.extend(500u16.to_be_bytes());
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[1.0, 0.5]);
    }

    #[test]
    fn truncated_payloads() {
        let mut bytes = b"P5 4 4 255\n".to_vec();
        bytes.extend([0u8; 15]);
        assert!(matches!(parse_pgm(&bytes), Err(Error::Parse { .. })));
        assert!(parse_pgm(b"P2 2 2 255 0 1 2").is_err());
    }

    #[test]
    fn malformed_headers() {
        assert!(parse_pgm(b"P6 1 1 255 0").is_err());
        assert!(parse_pgm(b"P").is_err());
        assert!(parse_pgm(b"P2 1 1 0 0").is_err());
        assert!(parse_pgm(b"P2 0 1 255").is_err());
        assert!(parse_pgm(b"P2 x 1 255 0").is_err());
        assert!(parse_pgm(b"P2 1 1 10 11").is_err());
        match parse_pgm(b"P2 2 2 0 1 1 1 1") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.0), 255);
    }

    #[test]
    fn p5_encoding_layout() {
        let bytes = encode_p5(2, 1, &[0.0, 1.0]).unwrap();
        assert_eq!(bytes, b"P5\n2 1\n255\n\x00\xff");
        assert!(encode_p5(2, 2, &[0.0]).is_err());
    }
}
