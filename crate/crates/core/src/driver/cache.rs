//! Binary driver cache.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "DRPD1"
//! u64 d, n_points, delay_steps, subgrid_factor, flavor code, seed
//! f64 X            n_points·d            node-major
//! f64 cell_area    n_cells·d²            row-major per cell
//! f64 delayed      (n_cells-origin)·d²   cells of [0, T]
//! u64 origin, dt bits, hurst bits
//! for each of the two areas: u64 n_levels, then levels 1.. as u64 len + f64 data
//! ```
//!
//! Everything a reader needs for a bitwise round trip beyond the three arrays
//! sits in the trailer. Drivers always have their time origin at node
//! `delay_steps`, so the array lengths follow from the header.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{DelayedRoughDriver, Flavor, Pyramid};
use crate::error::{Error, Result};
use crate::scale::Grid;

pub const DRIVER_MAGIC: &[u8; 5] = b"DRPD1";

fn put_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_usize<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = get_u64(r)?;
    usize::try_from(v).ok().filter(|&v| v < (1 << 40)).ok_or_else(|| Error::Format(format!("implausible {what} {v}")))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(truncated)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

/// Serialises a driver.
pub fn write_driver<W: Write>(w: &mut W, driver: &DelayedRoughDriver) -> Result<()> {
    let g = driver.grid();
    let (area, delayed) = driver.pyramids();
    w.write_all(DRIVER_MAGIC)?;
    for v in [
        driver.dim() as u64,
        g.n_points() as u64,
        g.delay_steps() as u64,
        driver.subgrid_factor() as u64,
        driver.flavor().code(),
        driver.seed(),
    ] {
        put_u64(w, v)?;
    }
    put_f64s(w, driver.x_values())?;
    put_f64s(w, &area.levels[0])?;
    put_f64s(w, &delayed.levels[0])?;
    put_u64(w, g.origin() as u64)?;
    put_u64(w, g.dt().to_bits())?;
    put_u64(w, driver.hurst().to_bits())?;
    for pyr in [area, delayed] {
        put_u64(w, pyr.levels.len() as u64)?;
        for level in &pyr.levels[1..] {
            put_u64(w, level.len() as u64)?;
            put_f64s(w, level)?;
        }
    }
    Ok(())
}

/// Reads a driver written by [`write_driver`].
pub fn read_driver<R: Read>(r: &mut R) -> Result<DelayedRoughDriver> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != DRIVER_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let d = get_usize(r, "dimension")?;
    let n_points = get_usize(r, "node count")?;
    let delay_steps = get_usize(r, "delay")?;
    let subgrid_factor = get_usize(r, "subgrid factor")?;
    let flavor = Flavor::from_code(get_u64(r)?)?;
    let seed = get_u64(r)?;
    if d == 0 || n_points < 2 {
        return Err(Error::Format("empty driver".into()));
    }
    let d2 = d * d;
    let n_cells = n_points - 1;
    let x = get_f64s(r, n_points * d)?;
    let cells = get_f64s(r, n_cells * d2)?;
    if delay_steps >= n_points {
        return Err(Error::Format(format!("delay of {delay_steps} steps on {n_points} nodes")));
    }
    let origin = delay_steps;
    let delayed_cells = get_f64s(r, (n_cells - origin) * d2)?;
    if get_u64(r)? != origin as u64 {
        return Err(Error::Format("the time origin must coincide with the delay".into()));
    }
    let dt = f64::from_bits(get_u64(r)?);
    let hurst = f64::from_bits(get_u64(r)?);
    let grid = Grid::new(dt, n_points, origin, delay_steps).map_err(|e| Error::Format(e.to_string()))?;

    let mut pyramids = Vec::with_capacity(2);
    for (base, first) in [(0, cells), (origin, delayed_cells)] {
        let n_levels = get_usize(r, "level count")?;
        let mut levels = vec![first];
        for _ in 1..n_levels {
            let len = get_usize(r, "level length")?;
            levels.push(get_f64s(r, len)?);
        }
        pyramids.push(Pyramid { base, levels });
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    let delayed = pyramids.pop().unwrap();
    let area = pyramids.pop().unwrap();
    Ok(DelayedRoughDriver::from_parts(grid, d, flavor, seed, hurst, subgrid_factor, x, area, delayed))
}

/// Writes atomically: a temporary file in the same directory, then a rename.
pub fn save_driver(path: &Path, driver: &DelayedRoughDriver) -> Result<()> {
    let mut buf = Vec::new();
    write_driver(&mut buf, driver)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("driver");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_driver(path: &Path) -> Result<DelayedRoughDriver> {
    let bytes = fs::read(path)?;
    read_driver(&mut bytes.as_slice())
}
