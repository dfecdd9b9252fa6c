//! Append-only commit log, one file per partition.
//!
//! Each entry is `u32 length | JSON body`. A torn tail entry is ignored on
//! replay.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{Tid, WriteOp};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalEntry {
    pub tid: Tid,
    pub ops: Vec<WriteOp>,
}

pub struct Wal {
    files: Vec<File>,
    sync: bool,
}

impl Wal {
    pub fn path(dir: &Path, partition: usize) -> PathBuf {
        dir.join(format!("partition{partition}.log"))
    }

    pub fn open(dir: &Path, partitions: usize, sync: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let files = (0..partitions)
            .map(|p| {
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(Self::path(dir, p))
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self { files, sync })
    }

    pub fn append(&mut self, partition: usize, entry: &WalEntry) -> Result<()> {
        let body = serde_json::to_vec(entry)?;
        let mut buf = Vec::with_capacity(body.len() + 4);
        buf.write_u32::<LittleEndian>(body.len() as u32)?;
        buf.extend_from_slice(&body);
        let f = &mut self.files[partition];
        f.write_all(&buf)?;
        if self.sync {
            f.sync_data()?;
        }
        Ok(())
    }

    /// Reads every complete entry of every partition log under `dir`, sorted by TID.
    pub fn replay(dir: &Path) -> Result<Vec<WalEntry>> {
        let mut out = Vec::new();
        if !dir.exists() {
            return Ok(out);
        }
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "log") {
                let mut r = BufReader::new(File::open(&path)?);
                loop {
                    let Ok(len) = r.read_u32::<LittleEndian>() else {
                        break;
                    };
                    let mut body = vec![0u8; len as usize];
                    if r.read_exact(&mut body).is_err() {
                        break;
                    }
                    match serde_json::from_slice::<WalEntry>(&body) {
                        Ok(e) => out.push(e),
                        Err(_) => break,
                    }
                }
            }
        }
        out.sort_by_key(|e| e.tid);
        Ok(out)
    }
}
