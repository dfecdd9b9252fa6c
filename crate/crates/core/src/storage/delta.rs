//! Vector delta records and delta files.
//!
//! A delta file holds the records of one `(segment, attribute)` stream whose
//! TIDs fall in the half-open interval `(tid_lo, tid_hi]`.
//!
//! On-disk layout (little-endian):
//!
//! ```text
//! magic "GDLT" | u32 dimension | u64 tid_lo | u64 tid_hi | u64 count
//! count × { u8 action | u64 id | u64 tid | f32[dimension] }
//! ```
//!
//! DELETE records carry a zero vector so every record has the same width.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Tid = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaAction {
    Upsert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub action: DeltaAction,
    /// In-segment ordinal of the vertex.
    pub id: u64,
    pub tid: Tid,
    pub value: Vec<f32>,
}

impl DeltaRecord {
    pub fn upsert(id: u64, tid: Tid, value: Vec<f32>) -> Self {
        Self {
            action: DeltaAction::Upsert,
            id,
            tid,
            value,
        }
    }

    pub fn delete(id: u64, tid: Tid) -> Self {
        Self {
            action: DeltaAction::Delete,
            id,
            tid,
            value: Vec::new(),
        }
    }

    /// The vector this record leaves behind, `None` for a delete.
    pub fn outcome(&self) -> Option<&[f32]> {
        match self.action {
            DeltaAction::Upsert => Some(&self.value),
            DeltaAction::Delete => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFile {
    pub seq: u64,
    pub tid_lo: Tid,
    pub tid_hi: Tid,
    pub records: Vec<DeltaRecord>,
}

const DELTA_MAGIC: &[u8; 4] = b"GDLT";

impl DeltaFile {
    pub fn covers(&self, tid: Tid) -> bool {
        self.tid_lo < tid && tid <= self.tid_hi
    }

    pub fn write_to(&self, path: &Path, dimension: usize) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(DELTA_MAGIC)?;
        w.write_u32::<LittleEndian>(dimension as u32)?;
        w.write_u64::<LittleEndian>(self.tid_lo)?;
        w.write_u64::<LittleEndian>(self.tid_hi)?;
        w.write_u64::<LittleEndian>(self.records.len() as u64)?;
        for r in &self.records {
            w.write_u8(match r.action {
                DeltaAction::Upsert => 1,
                DeltaAction::Delete => 2,
            })?;
            w.write_u64::<LittleEndian>(r.id)?;
            w.write_u64::<LittleEndian>(r.tid)?;
            match r.action {
                DeltaAction::Upsert => {
                    for &x in &r.value {
                        w.write_f32::<LittleEndian>(x)?;
                    }
                }
                DeltaAction::Delete => {
                    for _ in 0..dimension {
                        w.write_f32::<LittleEndian>(0.0)?;
                    }
                }
            }
        }
        let file = w.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn read_from(path: &Path, seq: u64) -> Result<(Self, usize)> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DELTA_MAGIC {
            return Err(Error::Decode(format!(
                "{}: bad delta file magic",
                path.display()
            )));
        }
        let dimension = r.read_u32::<LittleEndian>()? as usize;
        let tid_lo = r.read_u64::<LittleEndian>()?;
        let tid_hi = r.read_u64::<LittleEndian>()?;
        let count = r.read_u64::<LittleEndian>()? as usize;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let action = match r.read_u8()? {
                1 => DeltaAction::Upsert,
                2 => DeltaAction::Delete,
                other => return Err(Error::Decode(format!("bad delta action {other}"))),
            };
            let id = r.read_u64::<LittleEndian>()?;
            let tid = r.read_u64::<LittleEndian>()?;
            let mut value = vec![0f32; dimension];
            r.read_f32_into::<LittleEndian>(&mut value)?;
            if action == DeltaAction::Delete {
                value.clear();
            }
            records.push(DeltaRecord {
                action,
                id,
                tid,
                value,
            });
        }
        Ok((
            Self {
                seq,
                tid_lo,
                tid_hi,
                records,
            },
            dimension,
        ))
    }
}
