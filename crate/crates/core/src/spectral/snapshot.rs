//! Binary snapshot format.
//!
//! A 32-byte little-endian header followed by the samples as `f64` in
//! row-major order (axis 0 slowest):
//!
//! | bytes  | content                              |
//! |--------|--------------------------------------|
//! | 0..4   | magic `DDL1`                         |
//! | 4..8   | dimension (`u32`)                    |
//! | 8..12  | points along axis 0 (`u32`)          |
//! | 12..16 | points along axis 1 (`u32`, 0 in 1D) |
//! | 16..24 | box length along axis 0 (`f64`)      |
//! | 24..32 | box length along axis 1 (`f64`, 0 in 1D) |

use std::io::{Read, Write};

use super::{Field, Grid};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"DDL1";
pub const SNAPSHOT_HEADER_LEN: usize = 32;

pub fn write_snapshot(w: &mut impl Write, field: &Field) -> Result<()> {
    let g = field.grid();
    let mut header = Vec::with_capacity(SNAPSHOT_HEADER_LEN);
    header.extend_from_slice(SNAPSHOT_MAGIC);
    header.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    header.extend_from_slice(&(g.points(0) as u32).to_le_bytes());
    let n1 = if g.dim() == 2 { g.points(1) as u32 } else { 0 };
    header.extend_from_slice(&n1.to_le_bytes());
    header.extend_from_slice(&g.box_length(0).to_le_bytes());
    let l1 = if g.dim() == 2 { g.box_length(1) } else { 0.0 };
    header.extend_from_slice(&l1.to_le_bytes());
    let io = |e: std::io::Error| Error::Snapshot(e.to_string());
    w.write_all(&header).map_err(io)?;
    let mut body = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&body).map_err(io)
}

pub fn read_snapshot(r: &mut impl Read) -> Result<Field> {
    let io = |e: std::io::Error| Error::Snapshot(e.to_string());
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    r.read_exact(&mut header).map_err(io)?;
    if &header[0..4] != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let dim = u32_at(4);
    let grid = match dim {
        1 => Grid::new(&[f64_at(16)], &[u32_at(8)], 1)?,
        2 => Grid::new(&[f64_at(16), f64_at(24)], &[u32_at(8), u32_at(12)], 2)?,
        d => return Err(Error::Snapshot(format!("unsupported dimension {d}"))),
    };
    let mut body = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut body).map_err(io)?;
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Field::new(grid, values)
}
