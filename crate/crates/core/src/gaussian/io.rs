//! Ensemble serialisation: columnar CSV `path_id,t,value[,dW]` and the binary
//! `FNE1` layout (all numbers little-endian):
//!
//! ```text
//! "FNE1" | flags u32 (bit 0: driver present) | n_paths u64 | n_points u64
//! | label_len u64 | label (UTF-8) | points f64 × n_points
//! | values f64 × n_paths·n_points | driver f64 × n_paths·(n_points-1)
//! ```

use std::io::{BufRead, Read, Write};
use std::path::Path;

use super::PathEnsemble;
use crate::error::{Error, Result};
use crate::grid::{sig17, TimeGrid};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"FNE1";

pub fn write_csv<T: Real, W: Write>(e: &PathEnsemble<T>, mut w: W) -> Result<()> {
    let with_dw = e.has_driver();
    w.write_all(if with_dw { b"path_id,t,value,dW\r\n" } else { b"path_id,t,value\r\n" })?;
    let pts = e.grid().points();
    for j in 0..e.n_paths() {
        let row = e.path(j);
        let drow = e.driver_row(j);
        for (k, (t, v)) in pts.iter().zip(row).enumerate() {
            write!(w, "{j},{},{}", sig17(t.as_f64()), sig17(v.as_f64()))?;
            if let Some(d) = drow {
                if k == 0 {
                    w.write_all(b",")?;
                } else {
                    write!(w, ",{}", sig17(d[k - 1].as_f64()))?;
                }
            }
            w.write_all(b"\r\n")?;
        }
    }
    Ok(())
}

pub fn read_csv<T: Real, R: BufRead>(r: R, label: impl Into<String>) -> Result<PathEnsemble<T>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let with_dw = match cols.as_slice() {
        ["path_id", "t", "value"] => false,
        ["path_id", "t", "value", "dW"] => true,
        _ => return Err(Error::Format(format!("unexpected CSV header `{}`", header.trim()))),
    };
    let mut points: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    let mut driver = Vec::new();
    let mut current: Option<usize> = None;
    let mut k = 0usize;
    let mut n_paths = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("CSV record {}: `{line}`", lineno + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != if with_dw { 4 } else { 3 } {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        let t: f64 = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        if current != Some(id) {
            if id != n_paths {
                return Err(Error::Format(format!("path ids must be consecutive from 0; got {id}")));
            }
            if n_paths > 0 && k != points.len() {
                return Err(Error::Format(format!("path {} has {k} points, expected {}", n_paths - 1, points.len())));
            }
            current = Some(id);
            n_paths += 1;
            k = 0;
        }
        if n_paths == 1 {
            points.push(t);
        } else if points.get(k) != Some(&t) {
            return Err(Error::Format(format!("path {id} is not on the shared grid at record {}", lineno + 2)));
        }
        values.push(T::lit(v));
        if with_dw && k > 0 {
            driver.push(T::lit(f[3].parse::<f64>().map_err(|_| bad())?));
        }
        k += 1;
    }
    if n_paths == 0 {
        return Err(Error::Format("CSV has no records".into()));
    }
    if k != points.len() {
        return Err(Error::Format(format!("last path has {k} points, expected {}", points.len())));
    }
    let grid = TimeGrid::from_points(points.into_iter().map(T::lit).collect())?;
    PathEnsemble::new(grid, n_paths, values, with_dw.then_some(driver), label)
}

pub fn write_binary<T: Real, W: Write>(e: &PathEnsemble<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&u32::from(e.has_driver()).to_le_bytes())?;
    w.write_all(&(e.n_paths() as u64).to_le_bytes())?;
    w.write_all(&(e.n_points() as u64).to_le_bytes())?;
    w.write_all(&(e.label().len() as u64).to_le_bytes())?;
    w.write_all(e.label().as_bytes())?;
    let mut put = |xs: &[T]| -> Result<()> {
        let mut buf = Vec::with_capacity(8 * xs.len());
        for x in xs {
            buf.extend_from_slice(&x.as_f64().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    };
    put(e.grid().points())?;
    put(e.values())?;
    if let Some(d) = e.driver() {
        put(d)?;
    }
    Ok(())
}

pub fn read_binary<T: Real, R: Read>(mut r: R) -> Result<PathEnsemble<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for the FNE1 magic header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "missing magic header \"FNE1\" (found {:?})",
            String::from_utf8_lossy(&magic)
        )));
    }
    let trunc = |_| Error::Format("truncated FNE1 file".into());
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(trunc)?;
    let flags = u32::from_le_bytes(b4);
    let mut u64s = [0u64; 3];
    for slot in &mut u64s {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(trunc)?;
        *slot = u64::from_le_bytes(b8);
    }
    let [n_paths, n_points, label_len] = u64s.map(|v| v as usize);
    if n_points < 2 || label_len > 1 << 20 {
        return Err(Error::Format("implausible FNE1 header".into()));
    }
    let mut label = vec![0u8; label_len];
    r.read_exact(&mut label).map_err(trunc)?;
    let label = String::from_utf8(label).map_err(|_| Error::Format("label is not UTF-8".into()))?;
    let mut take = |count: usize| -> Result<Vec<T>> {
        let mut buf = vec![0u8; 8 * count];
        r.read_exact(&mut buf).map_err(trunc)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    };
    let points = take(n_points)?;
    let values = take(n_paths * n_points)?;
    let driver = if flags & 1 == 1 {
        Some(take(n_paths * (n_points - 1))?)
    } else {
        None
    };
    PathEnsemble::new(TimeGrid::from_points(points)?, n_paths, values, driver, label)
}

/// Writes CSV for a `.csv` extension and `FNE1` otherwise.
pub fn save<T: Real>(e: &PathEnsemble<T>, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
        write_csv(e, f)
    } else {
        write_binary(e, f)
    }
}

pub fn load<T: Real>(path: &Path) -> Result<PathEnsemble<T>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
        read_csv(f, path.display().to_string())
    } else {
        read_binary(f)
    }
}
