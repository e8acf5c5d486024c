//! Binary trajectory records.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VRRW"
//! 4       2     format version (1)
//! 6       8     master seed
//! 14      8     stream index
//! 22      4     byte length L of the weight spec string
//! 26      L     weight spec, UTF-8 (e.g. "power:0.3")
//! 26+L    ...   one byte per move until end of file: 0 = left, 1 = right
//! ```
//!
//! Per-step probability snapshots are not stored.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::StreamSeed;
use crate::walk::{Step, TrajectoryRecord};

pub const MAGIC: [u8; 4] = *b"VRRW";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 4 + 2 + 8 + 8 + 4;

pub fn encode(rec: &TrajectoryRecord) -> Vec<u8> {
    let spec = rec.weight.to_string();
    let mut out = Vec::with_capacity(FIXED_HEADER + spec.len() + rec.moves.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rec.seed.master.to_le_bytes());
    out.extend_from_slice(&rec.seed.index.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(spec.as_bytes());
    out.extend(rec.moves.iter().map(|&s| s as u8));
    out
}

pub fn decode(bytes: &[u8]) -> Result<TrajectoryRecord> {
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Record(format!(
            "truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Record("bad magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::Record(format!("unsupported version {version}")));
    }
    let seed = StreamSeed::new(u64_at(6), u64_at(14));
    let spec_len = u32_at(22) as usize;
    let body = FIXED_HEADER
        .checked_add(spec_len)
        .filter(|&b| b <= bytes.len())
        .ok_or_else(|| Error::Record("weight spec runs past end of file".into()))?;
    let spec = std::str::from_utf8(&bytes[FIXED_HEADER..body])
        .map_err(|_| Error::Record("weight spec is not UTF-8".into()))?;
    let weight = spec.parse()?;
    let moves = bytes[body..]
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            Step::from_byte(b)
                .ok_or_else(|| Error::Record(format!("move {i} has invalid byte {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryRecord {
        seed,
        weight,
        moves,
        prob_right: None,
    })
}

pub fn write(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(rec)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<TrajectoryRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
