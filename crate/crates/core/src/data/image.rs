//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::path::Path;

use super::Signal;
use crate::{Error, Result};

fn skip_ws_and_comments(buf: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < buf.len() && buf[pos] == b'#' {
            while pos < buf.len() && buf[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_int(buf: &[u8], pos: &mut usize, field: &str) -> Result<usize> {
    *pos = skip_ws_and_comments(buf, *pos);
    let start = *pos;
    while *pos < buf.len() && buf[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::ImageFormat(format!("missing {field} at byte {start}")));
    }
    std::str::from_utf8(&buf[start..*pos])
        .unwrap()
        .parse()
        .map_err(|_| Error::ImageFormat(format!("bad {field} at byte {start}")))
}

/// Decode a P5/P6 buffer; pixel `u` maps to `2u/255 - 1`.
pub fn parse_pnm(buf: &[u8], tag: &str) -> Result<Signal> {
    if buf.len() < 2 {
        return Err(Error::ImageFormat("file too short for magic".into()));
    }
    let channels = match &buf[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::ImageFormat(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut pos = 2;
    let width = header_int(buf, &mut pos, "width")?;
    let height = header_int(buf, &mut pos, "height")?;
    let maxval = header_int(buf, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::ImageFormat(format!("maxval {maxval} unsupported (need 255)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::ImageFormat("zero image dimension".into()));
    }
    if pos >= buf.len() || !buf[pos].is_ascii_whitespace() {
        return Err(Error::ImageFormat(format!("missing separator after header at byte {pos}")));
    }
    pos += 1;
    let need = width * height * channels;
    let payload = &buf[pos..];
    if payload.len() < need {
        return Err(Error::ImageFormat(format!(
            "truncated payload: expected {need} bytes after offset {pos}, found {}",
            payload.len()
        )));
    }
    let values = payload[..need].iter().map(|&u| 2.0 * u as f64 / 255.0 - 1.0).collect();
    Signal::new(vec![width, height], channels, values, tag)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&buf, &path.display().to_string())
}

/// Encode a 2-D signal as P5/P6, quantizing `v` to `round((v + 1) * 127.5)`.
pub fn write_pnm(signal: &Signal) -> Result<Vec<u8>> {
    if signal.dims().len() != 2 {
        return Err(Error::arg("signal", "only 2-D signals can be written as images"));
    }
    let magic = if signal.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", signal.dims()[0], signal.dims()[1]).into_bytes();
    out.extend(signal.values().iter().map(|v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn save_image(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_pnm(signal)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_extremes() {
        let s = parse_pnm(b"P5\n1 1\n255\n\xff", "t").unwrap();
        assert_eq!(s.values(), &[1.0]);
        let s = parse_pnm(b"P5 1 1 255 \x00", "t").unwrap();
        assert_eq!(s.values(), &[-1.0]);
    }

    #[test]
    fn header_comments() {
        let s = parse_pnm(b"P6\n# made by hand\n1 1\n255\n\x00\xff\x00", "t").unwrap();
        assert_eq!(s.channels(), 3);
        assert_eq!(s.values(), &[-1.0, 1.0, -1.0]);
    }

    #[test]
    fn errors() {
        assert!(parse_pnm(b"P3\n1 1\n255\n0", "t").unwrap_err().to_string().contains("magic"));
        assert!(parse_pnm(b"P5\n2 2\n255\n\x00\x00", "t").unwrap_err().to_string().contains("truncated"));
        assert!(parse_pnm(b"P5\n1 1\n65535\n\x00\x00", "t").unwrap_err().to_string().contains("maxval"));
    }

    #[test]
    fn p6_round_trip_within_quantization() {
        let vals = vec![-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0, 0.1, -0.9, 0.33, -0.33, 0.0];
        let s = Signal::new(vec![2, 2], 3, vals.clone(), "fixture").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.ppm");
        save_image(&s, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.dims(), &[2, 2]);
        for (a, b) in vals.iter().zip(back.values()) {
            assert!((a - b).abs() <= 2.0 / 255.0);
        }
    }
}
