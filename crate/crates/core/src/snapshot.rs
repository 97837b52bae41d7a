//! Binary field snapshots.
//!
//! Layout (all little-endian): the 4-byte magic `BSQF`, `u32` version (1),
//! `u32` n, `u32` reserved (0), then `n·n` `f64` physical samples in row-major
//! order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField};

pub const MAGIC: [u8; 4] = *b"BSQF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

pub fn encode(field: &RealField) -> Vec<u8> {
    let n = field.grid().n();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * n);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in field.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<RealField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Snapshot(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Snapshot("missing BSQF magic".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = word(8) as usize;
    let grid = Grid::new(n)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Snapshot(format!(
            "payload is {} bytes, expected {} for n={n}",
            body.len(),
            8 * grid.len()
        )));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RealField::new(grid, samples)
}

pub fn write(path: &Path, field: &RealField) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(field))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<RealField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
