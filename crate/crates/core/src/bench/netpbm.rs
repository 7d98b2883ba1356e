//! Binary NetPBM images (P5 gray, P6 RGB, maxval 255) for data in `[-1, 1]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `round((v + 1) * 127.5)`.
pub fn to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round() as u8
}

pub fn from_byte(b: u8) -> f64 {
    b as f64 / 127.5 - 1.0
}

/// Encodes `[H, W]`, `[1, H, W]` as P5 and `[3, H, W]` as P6.
pub fn encode_netpbm(x: &Grid) -> Result<Vec<u8>> {
    let (c, h, w) = x.image_dims()?;
    if c != 1 && c != 3 {
        return Err(Error::Invalid(format!("NetPBM needs 1 or 3 channels, got {c}")));
    }
    if let Some(v) = x.data().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::Domain { name: "pixel", value: *v, domain: "[-1, 1]" });
    }
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.reserve(c * h * w);
    let plane = h * w;
    for p in 0..plane {
        for ch in 0..c {
            out.push(to_byte(x.data()[ch * plane + p]));
        }
    }
    Ok(out)
}

/// Decodes P5 to `[H, W]` and P6 to `[3, H, W]`.
pub fn decode_netpbm(bytes: &[u8], origin: &str) -> Result<Grid> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(parse_error(origin, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(parse_error(origin, &format!("unsupported magic {other:?}"))),
    };
    let dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| parse_error(origin, &format!("bad {name} {s:?}")))
    };
    let w = dim(&fields[1], "width")?;
    let h = dim(&fields[2], "height")?;
    if fields[3] != "255" {
        return Err(parse_error(origin, &format!("unsupported maxval {}", fields[3])));
    }
    let need = channels * h * w;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < need {
        return Err(parse_error(origin, &format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    let plane = h * w;
    let mut data = vec![0.0; need];
    for p in 0..plane {
        for ch in 0..channels {
            data[ch * plane + p] = from_byte(payload[p * channels + ch]);
        }
    }
    let shape = if channels == 1 { vec![h, w] } else { vec![3, h, w] };
    Grid::new(data, shape)
}

fn parse_error(origin: &str, message: &str) -> Error {
    Error::Parse { origin: origin.to_string(), line: 0, message: message.to_string() }
}

pub fn write_netpbm(path: &Path, x: &Grid) -> Result<()> {
    fs::write(path, encode_netpbm(x)?).map_err(|e| Error::io(path, e))
}

pub fn read_netpbm(path: &Path) -> Result<Grid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_netpbm(&bytes, &path.display().to_string())
}
