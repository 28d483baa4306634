//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 5 or 9 | magic `NSVD1` (state) or `NSVD1-ADJ` (costate) |
//! | 8 | `n` as `u64` |
//! | 8 | `L` as `f64` |
//! | 8 | time stamp as `f64` |
//! | 8 | component count as `u64` (always 3) |
//! | 24 n^3 | `f64` values, component-major, each component x-fastest |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{PeriodicGrid, PhysicalField};
use crate::error::{Error, Result};

pub const STATE_MAGIC: &[u8] = b"NSVD1";
pub const COSTATE_MAGIC: &[u8] = b"NSVD1-ADJ";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    State,
    Costate,
}

impl SnapshotKind {
    pub fn magic(self) -> &'static [u8] {
        match self {
            SnapshotKind::State => STATE_MAGIC,
            SnapshotKind::Costate => COSTATE_MAGIC,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub time: f64,
    pub field: PhysicalField,
}

pub fn write_snapshot<W: Write>(
    mut w: W,
    kind: SnapshotKind,
    time: f64,
    field: &PhysicalField,
) -> std::io::Result<()> {
    let grid = field.grid();
    w.write_all(kind.magic())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&3u64.to_le_bytes())?;
    for c in 0..3 {
        for v in field.values() {
            w.write_all(&v[c].to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn format_error(reason: impl Into<String>) -> Error {
    Error::Snapshot {
        path: Default::default(),
        reason: reason.into(),
    }
}

/// Reads a snapshot onto a grid with the default dealiasing fraction.
pub fn read_snapshot<R: Read>(r: R) -> Result<Snapshot> {
    read_snapshot_with(r, None)
}

/// Reads a snapshot and checks it against `grid` (size and period).
pub fn read_snapshot_on<R: Read>(r: R, grid: &PeriodicGrid) -> Result<Snapshot> {
    read_snapshot_with(r, Some(grid))
}

fn read_snapshot_with<R: Read>(mut r: R, grid: Option<&PeriodicGrid>) -> Result<Snapshot> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    if head != *STATE_MAGIC {
        return Err(format_error("bad magic"));
    }
    // the costate suffix cannot collide with a plausible little-endian grid size
    let mut next = [0u8; 8];
    r.read_exact(&mut next)?;
    let (kind, n) = if &next[..4] == b"-ADJ" {
        let mut rest = [0u8; 4];
        r.read_exact(&mut rest)?;
        let mut nb = [0u8; 8];
        nb[..4].copy_from_slice(&next[4..]);
        nb[4..].copy_from_slice(&rest);
        (SnapshotKind::Costate, u64::from_le_bytes(nb))
    } else {
        (SnapshotKind::State, u64::from_le_bytes(next))
    };
    let length = read_f64(&mut r)?;
    let time = read_f64(&mut r)?;
    let comps = read_u64(&mut r)?;
    if comps != 3 {
        return Err(format_error(format!("expected 3 components, found {comps}")));
    }
    let n = usize::try_from(n).map_err(|_| format_error("grid size overflow"))?;
    if n > 4096 {
        return Err(format_error(format!("implausible grid size {n}")));
    }
    let grid = match grid {
        Some(g) => {
            if g.n() != n || g.length().to_bits() != length.to_bits() {
                return Err(Error::GridMismatch(format!(
                    "snapshot has n = {n}, L = {length}; expected {g:?}"
                )));
            }
            g.clone()
        }
        None => PeriodicGrid::new(n, length)?,
    };
    let mut values = vec![[0.0; 3]; grid.len()];
    for c in 0..3 {
        for v in values.iter_mut() {
            v[c] = read_f64(&mut r)?;
        }
    }
    let field = PhysicalField::from_values(&grid, values)?;
    Ok(Snapshot { kind, time, field })
}

pub fn save_snapshot(path: &Path, kind: SnapshotKind, time: f64, field: &PhysicalField) -> Result<()> {
    let f = File::create(path)?;
    write_snapshot(BufWriter::new(f), kind, time, field)?;
    Ok(())
}

pub fn load_snapshot(path: &Path, grid: Option<&PeriodicGrid>) -> Result<Snapshot> {
    let f = File::open(path)?;
    read_snapshot_with(BufReader::new(f), grid).map_err(|e| match e {
        Error::Snapshot { reason, .. } => Error::Snapshot {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = PeriodicGrid::new(4, 2.0).unwrap();
        let u = PhysicalField::from_fn(&g, |x| [x[0], x[1], x[2]]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, SnapshotKind::State, 0.25, &u).unwrap();
        assert_eq!(&buf[..5], b"NSVD1");
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[13..21].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(buf[21..29].try_into().unwrap()), 0.25);
        assert_eq!(u64::from_le_bytes(buf[29..37].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 37 + 3 * 64 * 8);
        // second value of the first component is x at i0 = 1
        assert_eq!(f64::from_le_bytes(buf[45..53].try_into().unwrap()), 0.5);
    }

    #[test]
    fn costate_round_trip() {
        let g = PeriodicGrid::new(4, 1.0).unwrap();
        let u = PhysicalField::from_fn(&g, |x| [x[2], -x[0], 1.0]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, SnapshotKind::Costate, 1.5, &u).unwrap();
        assert_eq!(&buf[..9], b"NSVD1-ADJ");
        let s = read_snapshot_on(buf.as_slice(), &g).unwrap();
        assert_eq!(s.kind, SnapshotKind::Costate);
        assert_eq!(s.time, 1.5);
        assert_eq!(s.field.values(), u.values());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot(&b"NSVX1...."[..]).is_err());
        let g = PeriodicGrid::new(4, 1.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, SnapshotKind::State, 0.0, &PhysicalField::zeros(&g)).unwrap();
        buf.truncate(100);
        assert!(read_snapshot(buf.as_slice()).is_err());
        let other = PeriodicGrid::new(8, 1.0).unwrap();
        let mut full = Vec::new();
        write_snapshot(&mut full, SnapshotKind::State, 0.0, &PhysicalField::zeros(&g)).unwrap();
        assert!(read_snapshot_on(full.as_slice(), &other).is_err());
    }
}
