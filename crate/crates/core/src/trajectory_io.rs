//! Trajectory files.
//!
//! Binary layout (all little-endian): `dim: u64`, `delta: f64`, `len: u64`, then
//! `len * dim` values of `f64` in column-major order (all of coordinate 0, then
//! coordinate 1, ...). The CSV alternative has a header row and one row per time
//! point, the first column being the time `n * delta`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGrid;

const HEADER_BYTES: usize = 24;

pub fn encode_binary(grid: &TrajectoryGrid) -> Vec<u8> {
    let (dim, len) = (grid.dim(), grid.len());
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * dim * len);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&grid.delta().to_le_bytes());
    out.extend_from_slice(&(len as u64).to_le_bytes());
    for c in 0..dim {
        for i in 0..len {
            out.extend_from_slice(&grid.sample(i)[c].to_le_bytes());
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<TrajectoryGrid> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format("truncated trajectory header".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let delta = f64::from_le_bytes(word(1));
    let len = u64::from_le_bytes(word(2)) as usize;
    let expected = dim
        .checked_mul(len)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_BYTES))
        .ok_or_else(|| Error::Format("trajectory header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for dim {dim} and length {len}, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_BYTES..];
    let mut data = vec![0.0; dim * len];
    for c in 0..dim {
        for i in 0..len {
            let at = 8 * (c * len + i);
            data[i * dim + c] = f64::from_le_bytes(body[at..at + 8].try_into().unwrap());
        }
    }
    TrajectoryGrid::new(dim, delta, data)
}

pub fn write_binary(path: &Path, grid: &TrajectoryGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_binary(grid))?;
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<TrajectoryGrid> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn write_csv<W: Write>(mut w: W, grid: &TrajectoryGrid) -> Result<()> {
    write!(w, "time")?;
    for c in 0..grid.dim() {
        write!(w, ",x{}", c + 1)?;
    }
    writeln!(w)?;
    for i in 0..grid.len() {
        write!(w, "{}", (i + 1) as f64 * grid.delta())?;
        for v in grid.sample(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a CSV trajectory. The step is recovered from the first time column.
pub fn read_csv<R: Read>(r: R) -> Result<TrajectoryGrid> {
    let mut dim = None;
    let mut delta = None;
    let mut data = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("time")) {
            continue;
        }
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if fields.len() < 2 {
            return Err(Error::Format(format!(
                "line {}: expected time and at least one coordinate",
                lineno + 1
            )));
        }
        let d = *dim.get_or_insert(fields.len() - 1);
        if fields.len() - 1 != d {
            return Err(Error::Format(format!(
                "line {}: expected {d} coordinates, found {}",
                lineno + 1,
                fields.len() - 1
            )));
        }
        delta.get_or_insert(fields[0]);
        data.extend_from_slice(&fields[1..]);
    }
    let dim = dim.ok_or_else(|| Error::Format("empty CSV trajectory".into()))?;
    TrajectoryGrid::new(dim, delta.unwrap_or(0.0), data)
}

pub fn write_csv_file(path: &Path, grid: &TrajectoryGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, grid)?;
    w.flush()?;
    Ok(())
}

/// Reads either format, choosing CSV for a `.csv` extension.
pub fn read_trajectory(path: &Path) -> Result<TrajectoryGrid> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let result = if is_csv {
        read_csv(File::open(path)?)
    } else {
        read_binary(path)
    };
    result.map_err(|e| e.with_context(format!("reading {}", path.display())))
}

pub fn write_trajectory(path: &Path, grid: &TrajectoryGrid) -> Result<()> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        write_csv_file(path, grid)
    } else {
        write_binary(path, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_layout_is_column_major() {
        let g = TrajectoryGrid::new(2, 0.5, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]).unwrap();
        let b = encode_binary(&g);
        assert_eq!(b.len(), 24 + 6 * 8);
        assert_eq!(u64::from_le_bytes(b[0..8].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[8..16].try_into().unwrap()), 0.5);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        let body: Vec<f64> = b[24..]
            .chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(body, vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]);
    }

    #[test]
    fn truncated_file_rejected() {
        let g = TrajectoryGrid::scalar(1.0, vec![1.0, 2.0]).unwrap();
        let b = encode_binary(&g);
        assert!(decode_binary(&b[..b.len() - 1]).is_err());
        assert!(decode_binary(&b[..10]).is_err());
    }

    #[test]
    fn csv_has_time_column() {
        let g = TrajectoryGrid::scalar(0.25, vec![4.0, 5.0]).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &g).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "time,x1\n0.25,4\n0.5,5\n");
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(
            dim in 1usize..4,
            rows in 1usize..20,
            delta in 1e-3f64..10.0,
            seed in any::<u64>(),
        ) {
            let data: Vec<f64> = (0..dim * rows)
                .map(|k| ((seed.wrapping_mul(k as u64 + 1) % 10_007) as f64 - 5000.0) / 7.0)
                .collect();
            let g = TrajectoryGrid::new(dim, delta, data).unwrap();
            prop_assert_eq!(&decode_binary(&encode_binary(&g)).unwrap(), &g);
            let mut out = Vec::new();
            write_csv(&mut out, &g).unwrap();
            let back = read_csv(out.as_slice()).unwrap();
            prop_assert_eq!(back.as_slice(), g.as_slice());
            prop_assert!((back.delta() - delta).abs() <= 1e-12 * delta);
        }
    }
}
