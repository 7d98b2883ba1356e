//! CSV artifacts: point clouds, solver traces, blur kernels and score tables.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::SolveTrace;

fn csv_error(origin: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { origin: origin.to_string(), line, message: e.to_string() }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// One point per line, coordinates with 17 significant digits.
pub fn write_points<W: Write>(w: W, points: &[Grid], header: bool) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let dim = points.first().map_or(0, Grid::len);
    if header && dim > 0 {
        out.write_record((0..dim).map(|i| format!("x{i}"))).map_err(|e| csv_error("points", e))?;
    }
    for p in points {
        if !p.is_finite() {
            return Err(Error::Invalid("points must be finite".into()));
        }
        if p.len() != dim {
            return Err(Error::shape(&[dim], p.shape()));
        }
        out.write_record(p.data().iter().map(|v| format!("{v:.16e}"))).map_err(|e| csv_error("points", e))?;
    }
    out.flush().map_err(|e| Error::Invalid(e.to_string()))
}

/// Reads points written by [`write_points`]; a non-numeric first line is a header.
pub fn read_points<R: Read>(r: R, origin: &str) -> Result<Vec<Grid>> {
    let mut input = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut points = Vec::new();
    let mut dim = None;
    for (idx, record) in input.records().enumerate() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(Error::Parse { origin: origin.into(), line, message: e.to_string() }),
        };
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(Error::Parse {
                origin: origin.into(),
                line,
                message: format!("expected {} columns, found {}", dim.unwrap_or(0), values.len()),
            });
        }
        points.push(Grid::vector(values).map_err(|e| Error::Parse {
            origin: origin.into(),
            line,
            message: e.to_string(),
        })?);
    }
    Ok(points)
}

pub fn write_points_csv(path: &Path, points: &[Grid], header: bool) -> Result<()> {
    write_points(create(path)?, points, header)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Grid>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_points(BufReader::new(file), &path.display().to_string())
}

/// Columns `n,t,gamma,step_norm,psnr`; PSNR is empty when not tracked.
pub fn write_trace<W: Write>(w: W, trace: &SolveTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "t", "gamma", "step_norm", "psnr"]).map_err(|e| csv_error("trace", e))?;
    for s in &trace.steps {
        out.write_record([
            s.n.to_string(),
            format!("{:e}", s.t),
            format!("{:e}", s.gamma),
            format!("{:e}", s.step_norm),
            s.psnr.map(|p| format!("{p:e}")).unwrap_or_default(),
        ])
        .map_err(|e| csv_error("trace", e))?;
    }
    out.flush().map_err(|e| Error::Invalid(e.to_string()))
}

pub fn write_trace_csv(path: &Path, trace: &SolveTrace) -> Result<()> {
    write_trace(create(path)?, trace)
}

/// One kernel row per line.
pub fn write_kernel_csv(path: &Path, kernel: &Grid) -> Result<()> {
    let [_, kw] = kernel.shape() else {
        return Err(Error::Invalid(format!("kernel must be 2-D, got {:?}", kernel.shape())));
    };
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for row in kernel.data().chunks(*kw) {
        out.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(|e| csv_error("kernel", e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::solver::StepRecord;

    #[test]
    fn points_round_trip_bitwise() {
        let mut rng = RngState::new(11);
        let pts: Vec<Grid> = (0..1000)
            .map(|_| Grid::vector(vec![rng.normal() * 1e3, rng.uniform() * 1e-7, -rng.exp1()]).unwrap())
            .collect();
        for header in [false, true] {
            let mut buf = Vec::new();
            write_points(&mut buf, &pts, header).unwrap();
            let back = read_points(buf.as_slice(), "mem").unwrap();
            assert_eq!(back.len(), pts.len());
            for (a, b) in pts.iter().zip(&back) {
                for (x, y) in a.data().iter().zip(b.data()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn empty_round_trip() {
        let mut buf = Vec::new();
        write_points(&mut buf, &[], true).unwrap();
        assert!(buf.is_empty());
        assert!(read_points(buf.as_slice(), "mem").unwrap().is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = read_points("x,y\n1,2\n3,oops\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let ragged = read_points("1,2\n3\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(ragged, Error::Parse { line: 2, .. }), "{ragged:?}");
    }

    #[test]
    fn trace_columns() {
        let trace = SolveTrace { steps: vec![StepRecord { n: 0, t: 0.0, gamma: 1.0, step_norm: 0.5, psnr: None }] };
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,t,gamma,step_norm,psnr\n0,0e0,1e0,5e-1,\n");
    }
}
