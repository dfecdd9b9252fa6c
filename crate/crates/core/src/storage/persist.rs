//! On-disk layout, checkpoints and crash recovery.
//!
//! ```text
//! <dir>/catalog.json
//! <dir>/manifest.json                       {"checkpoint_tid": N}
//! <dir>/wal/partition<p>.log
//! <dir>/data/<Type>/seg<k>.vtx              vertex segment rows
//! <dir>/data/<Type>/<attr>/seg<k>.delta.<n> vector delta files
//! <dir>/data/<Type>/<attr>/seg<k>.snap<tid>.hnsw | .emb
//! ```
//!
//! `.emb` stores raw vectors for index kinds without a persisted structure:
//! `"GVEC" | u32 dim | u64 count | count × f32[dim]`, where slot `i` is the
//! vector of in-segment ordinal `i` and an all-NaN slot means "no vector".
//! The snapshot TID is part of the file name.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::delta::{DeltaFile, DeltaRecord, Tid};
use super::embedding::{EmbeddingSegment, IndexSnapshot};
use super::segment::SegmentData;
use super::wal::Wal;
use super::{Graph, SegmentId, VertexId, WriteOp};
use crate::error::{Error, Result};
use crate::index::{self, FlatIndex, VectorIndex};
use crate::schema::{Catalog, IndexKind, Metric};

const VTX_MAGIC: &[u8; 4] = b"GVTX";
const VEC_MAGIC: &[u8; 4] = b"GVEC";

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    checkpoint_tid: Tid,
}

pub(crate) fn embedding_dir(root: &Path, vtype: &str, attr: &str) -> PathBuf {
    root.join("data").join(vtype).join(attr)
}

fn vtx_path(root: &Path, vtype: &str, seg: u32) -> PathBuf {
    root.join("data").join(vtype).join(format!("seg{seg}.vtx"))
}

pub(crate) fn delta_path(dir: &Path, seg: u32, seq: u64) -> PathBuf {
    dir.join(format!("seg{seg}.delta.{seq}"))
}

pub(crate) fn snapshot_path(dir: &Path, seg: u32, tid: Tid, kind: IndexKind) -> PathBuf {
    let ext = match kind {
        IndexKind::Hnsw => "hnsw",
        IndexKind::Flat => "emb",
    };
    dir.join(format!("seg{seg}.snap{tid}.{ext}"))
}

fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn write_catalog(root: &Path, cat: &Catalog) -> Result<()> {
    fs::create_dir_all(root)?;
    write_atomic(&root.join("catalog.json"), |w| {
        w.write_all(cat.to_json().as_bytes())?;
        Ok(())
    })
}

/// Persists an index snapshot and returns the written path.
pub(crate) fn write_snapshot(dir: &Path, snap: &IndexSnapshot) -> Result<PathBuf> {
    let kind = snap.index.kind();
    let path = snapshot_path(dir, snap.segment.ordinal, snap.snapshot_tid, kind);
    write_atomic(&path, |w| {
        if !snap.index.save(w, snap.snapshot_tid)? {
            write_vectors(w, snap.index.as_ref())?;
        }
        Ok(())
    })?;
    Ok(path)
}

fn write_vectors(w: &mut dyn Write, index: &dyn VectorIndex) -> Result<()> {
    let dim = index.dimension();
    let ords = index.ordinals();
    let slots = ords.last().map_or(0, |o| *o as u64 + 1);
    w.write_all(VEC_MAGIC)?;
    w.write_u32::<LittleEndian>(dim as u32)?;
    w.write_u64::<LittleEndian>(slots)?;
    for o in 0..slots as u32 {
        match index.get_embedding(o) {
            Some(v) => v.iter().try_for_each(|x| w.write_f32::<LittleEndian>(*x))?,
            None => (0..dim).try_for_each(|_| w.write_f32::<LittleEndian>(f32::NAN))?,
        }
    }
    Ok(())
}

fn read_vectors(r: &mut dyn Read, metric: Metric) -> Result<FlatIndex> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VEC_MAGIC {
        return Err(Error::Decode("bad vector snapshot magic".into()));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let slots = r.read_u64::<LittleEndian>()?;
    let mut idx = FlatIndex::new(dim, metric);
    let mut v = vec![0f32; dim];
    for o in 0..slots as u32 {
        r.read_f32_into::<LittleEndian>(&mut v)?;
        if !v.iter().all(|x| x.is_nan()) || dim == 0 {
            idx.set(o, &v);
        }
    }
    Ok(idx)
}

pub(crate) fn checkpoint(g: &Graph) -> Result<()> {
    let root = g
        .data_dir()
        .ok_or_else(|| Error::Validation("checkpoint needs a data directory".into()))?;
    let tid = g.visible_tid();
    let cat = g.catalog();
    write_catalog(root, &cat)?;
    for vt in &cat.vertex_types {
        fs::create_dir_all(root.join("data").join(&vt.name))?;
        for seg in g.segments(vt.id) {
            let data = g.vertex_segment_data(seg).unwrap_or_default();
            write_atomic(&vtx_path(root, &vt.name, seg.ordinal), |w| {
                w.write_all(VTX_MAGIC)?;
                w.write_u64::<LittleEndian>(tid)?;
                serde_json::to_writer(&mut *w, &data)?;
                Ok(())
            })?;
        }
    }
    write_atomic(&root.join("manifest.json"), |w| {
        serde_json::to_writer(
            &mut *w,
            &Manifest {
                checkpoint_tid: tid,
            },
        )?;
        Ok(())
    })?;
    g.inner.checkpoint_tid.store(tid, Ordering::Release);
    Ok(())
}

fn read_vtx(path: &Path) -> Result<SegmentData> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VTX_MAGIC {
        return Err(Error::Decode(format!(
            "{}: bad vertex segment magic",
            path.display()
        )));
    }
    let _tid = r.read_u64::<LittleEndian>()?;
    Ok(serde_json::from_reader(r)?)
}

/// Parses `seg<k>.<rest>` file names.
fn split_seg_name(name: &str) -> Option<(u32, &str)> {
    let rest = name.strip_prefix("seg")?;
    let dot = rest.find('.')?;
    Some((rest[..dot].parse().ok()?, &rest[dot + 1..]))
}

pub(crate) fn recover(g: &Graph) -> Result<()> {
    let root = g
        .data_dir()
        .expect("recover needs a data directory")
        .to_path_buf();
    fs::create_dir_all(&root)?;
    let cat_path = root.join("catalog.json");
    if !cat_path.exists() {
        return Ok(());
    }
    let cat: Catalog = serde_json::from_slice(&fs::read(&cat_path)?)?;
    g.install_catalog(cat)?;
    let cat = g.catalog();

    let manifest: Manifest = match fs::read(root.join("manifest.json")) {
        Ok(b) => serde_json::from_slice(&b)?,
        Err(_) => Manifest::default(),
    };
    let floor = manifest.checkpoint_tid;
    g.inner.checkpoint_tid.store(floor, Ordering::Release);

    for vt in &cat.vertex_types {
        if floor > 0 {
            let mut k = 0u32;
            loop {
                let p = vtx_path(&root, &vt.name, k);
                if !p.exists() {
                    break;
                }
                g.install_vertex_segment(SegmentId::new(vt.id, k), read_vtx(&p)?);
                k += 1;
            }
        }
        for emb in &vt.embeddings {
            let dir = embedding_dir(&root, &vt.name, &emb.name);
            if dir.exists() {
                recover_embedding_dir(g, vt.id, &emb.name, &emb.meta, &dir)?;
            }
        }
    }
    g.set_recovered_tid(floor);

    for entry in Wal::replay(&root.join("wal"))? {
        if entry.tid > floor {
            g.replay(&entry)?;
        } else {
            replay_vectors(g, &cat, entry.tid, &entry.ops)?;
            g.set_recovered_tid(entry.tid);
        }
    }
    Ok(())
}

fn recover_embedding_dir(
    g: &Graph,
    vtype: u32,
    attr: &str,
    meta: &crate::schema::EmbeddingMeta,
    dir: &Path,
) -> Result<()> {
    use std::collections::BTreeMap;
    let mut snaps: BTreeMap<u32, Vec<(Tid, PathBuf)>> = BTreeMap::new();
    let mut deltas: BTreeMap<u32, Vec<(u64, PathBuf)>> = BTreeMap::new();
    for e in fs::read_dir(dir)? {
        let path = e?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((seg, rest)) = split_seg_name(name) else {
            continue;
        };
        if let Some(seq) = rest.strip_prefix("delta.") {
            if let Ok(seq) = seq.parse() {
                deltas.entry(seg).or_default().push((seq, path.clone()));
            }
        } else if let Some(t) = rest.strip_prefix("snap") {
            let tid = t.split('.').next().and_then(|s| s.parse().ok());
            if let (Some(tid), false) = (tid, rest.ends_with(".tmp")) {
                snaps.entry(seg).or_default().push((tid, path.clone()));
            }
        }
    }
    let segs: std::collections::BTreeSet<u32> =
        snaps.keys().chain(deltas.keys()).copied().collect();
    for seg in segs {
        let id = SegmentId::new(vtype, seg);
        let params = g.config().index_params(meta, id, attr);
        let (index, snapshot_tid): (Box<dyn VectorIndex>, Tid) = match snaps
            .get(&seg)
            .and_then(|v| v.iter().max_by_key(|(t, _)| *t))
        {
            Some((tid, path)) => {
                let mut r = BufReader::new(File::open(path)?);
                match meta.index_kind {
                    IndexKind::Hnsw => {
                        let (idx, tid) = index::load_hnsw(&mut r)?;
                        (Box::new(idx), tid)
                    }
                    IndexKind::Flat => (Box::new(read_vectors(&mut r, meta.metric)?), *tid),
                }
            }
            None => (index::new_index(meta.index_kind, meta.dimension, params), 0),
        };
        let mut files = Vec::new();
        let mut list = deltas.remove(&seg).unwrap_or_default();
        list.sort();
        let mut next_seq = 0;
        for (seq, path) in list {
            next_seq = seq + 1;
            let (f, _) = DeltaFile::read_from(&path, seq)?;
            if f.tid_hi > snapshot_tid {
                files.push(Arc::new(f));
            }
        }
        let es = EmbeddingSegment::with_snapshot(
            id,
            attr,
            meta.clone(),
            params,
            Some(dir.to_path_buf()),
            index,
            snapshot_tid,
            files,
        );
        {
            let mut st = es.state.write();
            st.next_seq = st.next_seq.max(next_seq);
        }
        g.install_embedding_segment(Arc::new(es));
    }
    Ok(())
}

/// Re-applies the vector side of a transaction whose scalar effects are
/// already in the checkpoint.
fn replay_vectors(g: &Graph, cat: &Catalog, tid: Tid, ops: &[WriteOp]) -> Result<()> {
    let push =
        |vtype: &str, key: i64, attr: &str, rec: &dyn Fn(u64) -> DeltaRecord| -> Result<()> {
            let vt = cat.vertex_type(vtype)?;
            let Some(ord) = g.lookup_key(vt.id, key) else {
                return Ok(());
            };
            let (seg, local) = g.segment_of(VertexId::new(vt.id, ord));
            let es = g.ensure_embedding_segment(seg, attr)?;
            if tid > es.state.read().merged_hi {
                es.append([rec(local as u64)]);
            }
            Ok(())
        };
    for op in ops {
        match op {
            WriteOp::SetEmbedding {
                vtype,
                key,
                attr,
                value,
            } => {
                let meta = &cat.embedding(vtype, attr)?.meta;
                let v = meta.metric.prepared(value);
                push(vtype, *key, attr, &|id| {
                    DeltaRecord::upsert(id, tid, v.clone())
                })?;
            }
            WriteOp::DeleteEmbedding { vtype, key, attr } => {
                push(vtype, *key, attr, &|id| DeltaRecord::delete(id, tid))?;
            }
            WriteOp::DeleteVertex { vtype, key } => {
                for e in &cat.vertex_type(vtype)?.embeddings {
                    push(vtype, *key, &e.name, &|id| DeltaRecord::delete(id, tid))?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}
