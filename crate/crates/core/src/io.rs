//! Plain-text file formats.
//!
//! * observations: CSV with header `t,z`
//! * latent truth: CSV with header `x,y,t`
//! * bin weights: `K` lines of `J` comma-separated values, mark row `k` on
//!   line `k`, no header
//! * traces: one value per line
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! file reads back to the identical `f64` values regardless of locale.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::censor::Observation;
use crate::error::{Error, Result};
use crate::grid::{BinWeights, GridSpec};
use crate::sim::LatentRecord;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_field(path: &Path, line: usize, name: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("{name}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{name}: non-finite value {field:?}")));
    }
    Ok(v)
}

/// Reads a headed CSV whose header must equal `columns` exactly.
fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(columns.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", columns.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != columns.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", columns.len(), rec.len()),
            ));
        }
        let row = rec
            .iter()
            .zip(columns)
            .map(|(f, name)| parse_field(path, line, name, f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_table<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = writer(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    Ok(read_table(path, &["t", "z"])?
        .into_iter()
        .map(|r| Observation::new(r[0], r[1]))
        .collect())
}

pub fn write_observations(path: &Path, data: &[Observation]) -> Result<()> {
    write_table(path, "t,z", data.iter().map(|o| vec![o.t, o.z]))
}

pub fn read_truth(path: &Path) -> Result<Vec<LatentRecord>> {
    Ok(read_table(path, &["x", "y", "t"])?
        .into_iter()
        .map(|r| LatentRecord { x: r[0], y: r[1], t: r[2] })
        .collect())
}

pub fn write_truth(path: &Path, truth: &[LatentRecord]) -> Result<()> {
    write_table(path, "x,y,t", truth.iter().map(|r| vec![r.x, r.y, r.t]))
}

/// Raw weight table: `(J, K, row-major values)`, without normalisation checks.
pub fn read_weight_table(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut rdr = reader(path, false)?;
    let mut values = Vec::new();
    let mut j_bins = None;
    let mut k_bins = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match j_bins {
            None => j_bins = Some(rec.len()),
            Some(j) if j != rec.len() => {
                return Err(parse_err(path, line, format!("expected {j} columns, found {}", rec.len())));
            }
            Some(_) => {}
        }
        for f in rec.iter() {
            let v = parse_field(path, line, "weight", f)?;
            if v < 0.0 {
                return Err(parse_err(path, line, format!("negative weight {v}")));
            }
            values.push(v);
        }
        k_bins += 1;
    }
    let Some(j_bins) = j_bins else {
        return Err(parse_err(path, 1, "no weight rows"));
    };
    Ok((j_bins, k_bins, values))
}

/// Weights for `grid`; errors if the file's shape differs from the grid.
pub fn read_weights(path: &Path, grid: &GridSpec) -> Result<BinWeights> {
    let (j, k, values) = read_weight_table(path)?;
    if (j, k) != (grid.j_bins(), grid.k_bins()) {
        return Err(Error::GridMismatch(format!(
            "{} holds {j}x{k} bins, expected {}x{}",
            path.display(),
            grid.j_bins(),
            grid.k_bins()
        )));
    }
    BinWeights::new(values)
}

pub fn write_weights(path: &Path, grid: &GridSpec, w: &BinWeights) -> Result<()> {
    w.check_grid(grid)?;
    let mut out = writer(path)?;
    let io = |e| Error::io(path, e);
    for row in w.as_slice().chunks(grid.j_bins()) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_trace(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = writer(path)?;
    let io = |e| Error::io(path, e);
    for v in values {
        writeln!(out, "{v}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_trace(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_field(path, i + 1, "value", l.trim()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let data = vec![
            Observation::new(0.1, 0.0),
            Observation::new(1.0 / 3.0, 1.234_567_890_123_456_7),
            Observation::new(1e-17, 2.0),
        ];
        write_observations(&path, &data).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("t,z\n"));
        assert_eq!(read_observations(&path).unwrap(), data);

        write_observations(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "t,z\n");
        assert!(read_observations(&path).unwrap().is_empty());
    }

    #[test]
    fn weights_round_trip_in_grid_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let g = GridSpec::new(1.0, 2.0, 3, 2).unwrap();
        let w = BinWeights::normalised(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        write_weights(&path, &g, &w).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 3);
        assert_eq!(read_weights(&path, &g).unwrap(), w);
        let other = GridSpec::new(1.0, 2.0, 2, 3).unwrap();
        assert!(matches!(read_weights(&path, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn malformed_files_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,z\n0.1,0\n0.2,abc\n").unwrap();
        match read_observations(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "x,z\n0.1,0\n").unwrap();
        assert!(matches!(read_observations(&path), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&path, "0.5,0.5\n0.25\n").unwrap();
        match read_weight_table(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_observations(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn traces_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tau.csv");
        let v = vec![1.0, 0.1 + 0.2, 3e-300];
        write_trace(&path, &v).unwrap();
        assert_eq!(read_trace(&path).unwrap(), v);
    }
}
