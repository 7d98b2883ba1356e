//! Parameter file: magic, format version, architecture, then every weight
//! and bias as little-endian `f64`, layer by layer.
//!
//! ```text
//! b"PNPFLOW-MLP\n"          12 bytes
//! version                  u32
//! input_dim                u32
//! hidden layer count       u32
//! hidden widths            u32 each
//! parameter count          u64
//! parameters               f64 each (W row-major, then b, per layer)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mlp::{MlpParams, MlpSpec};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 12] = b"PNPFLOW-MLP\n";
pub const PARAMS_VERSION: u32 = 1;

pub fn write_params<W: Write>(mut w: W, params: &MlpParams) -> std::io::Result<()> {
    let spec = params.spec();
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(spec.input_dim as u32).to_le_bytes())?;
    w.write_all(&(spec.hidden.len() as u32).to_le_bytes())?;
    for &width in &spec.hidden {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    w.write_all(&(params.as_slice().len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse { origin: "parameter file".into(), line: 0, message: message.into() }
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| parse_err(format!("truncated while reading {what}: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array::<4, R>(r, what)?))
}

pub fn read_params<R: Read>(mut r: R) -> Result<MlpParams> {
    let magic = read_array::<12, R>(&mut r, "magic")?;
    if &magic != PARAMS_MAGIC {
        return Err(parse_err("bad magic, not a pnp-flow parameter file"));
    }
    let version = read_u32(&mut r, "version")?;
    if version != PARAMS_VERSION {
        return Err(parse_err(format!("unsupported format version {version}")));
    }
    let input_dim = read_u32(&mut r, "input dimension")? as usize;
    let n_hidden = read_u32(&mut r, "layer count")? as usize;
    if n_hidden > 1024 {
        return Err(parse_err(format!("implausible layer count {n_hidden}")));
    }
    let hidden =
        (0..n_hidden).map(|_| read_u32(&mut r, "hidden width").map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
    let spec = MlpSpec::new(input_dim, hidden).map_err(|e| parse_err(e.to_string()))?;
    let count = u64::from_le_bytes(read_array::<8, R>(&mut r, "parameter count")?) as usize;
    if count != spec.param_count() {
        return Err(parse_err(format!(
            "header declares {count} parameters, architecture needs {}",
            spec.param_count()
        )));
    }
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(f64::from_le_bytes(read_array::<8, R>(&mut r, "parameters")?));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| parse_err(e.to_string()))? != 0 {
        return Err(parse_err("trailing bytes after parameters"));
    }
    MlpParams::from_flat(&spec, flat).map_err(|e| parse_err(e.to_string()))
}

pub fn save_params(path: &Path, params: &MlpParams) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_params(BufWriter::new(file), params).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<MlpParams> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_params(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse { origin: path.display().to_string(), line, message },
        other => other,
    })
}

/// Two-column `step,loss` CSV.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let run = |w: &mut csv::Writer<File>| -> csv::Result<()> {
        w.write_record(["step", "loss"])?;
        for (i, l) in losses.iter().enumerate() {
            w.write_record([i.to_string(), format!("{l:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| Error::io(path, e.into()))
}
