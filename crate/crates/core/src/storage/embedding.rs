//! Embedding segments: the decoupled vector store of one `(segment, attribute)`.
//!
//! State is an ordered list of immutable index snapshots, a list of delta
//! files and the in-memory delta store. A read at TID `t` uses the newest
//! snapshot with `snapshot_tid <= t` and overlays every delta in
//! `(snapshot_tid, t]`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;

use super::delta::{DeltaFile, DeltaRecord, Tid};
use super::SegmentId;
use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::index::{self, FilterFn, IndexParams, Neighbor, SearchParams, VectorIndex};
use crate::schema::EmbeddingMeta;

pub struct IndexSnapshot {
    pub segment: SegmentId,
    pub attr: String,
    pub snapshot_tid: Tid,
    pub index: Box<dyn VectorIndex>,
}

impl std::fmt::Debug for IndexSnapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexSnapshot")
            .field("segment", &self.segment)
            .field("attr", &self.attr)
            .field("snapshot_tid", &self.snapshot_tid)
            .field("len", &self.index.len())
            .finish()
    }
}

/// When a filtered segment search scans valid ordinals instead of walking the index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForcePolicy {
    pub k_factor: usize,
    pub fraction: f64,
}

impl Default for BruteForcePolicy {
    fn default() -> Self {
        Self {
            k_factor: 4,
            fraction: 0.01,
        }
    }
}

impl BruteForcePolicy {
    pub fn never() -> Self {
        Self {
            k_factor: 0,
            fraction: 0.0,
        }
    }

    pub fn threshold(&self, k: usize, segment_size: usize) -> usize {
        (self.k_factor * k).max((self.fraction * segment_size as f64).ceil() as usize)
    }
}

pub(crate) struct EmbState {
    pub snapshots: Vec<Arc<IndexSnapshot>>,
    pub files: Vec<Arc<DeltaFile>>,
    pub memory: Vec<DeltaRecord>,
    pub memory_since: Option<Instant>,
    /// Upper TID bound of the newest delta file, or of the snapshot when no file exists.
    pub merged_hi: Tid,
    pub next_seq: u64,
}

impl EmbState {
    pub fn current(&self) -> &Arc<IndexSnapshot> {
        self.snapshots
            .last()
            .expect("embedding segment always has a snapshot")
    }

    /// Delta files not yet folded into the current snapshot.
    pub fn pending_files(&self) -> Vec<Arc<DeltaFile>> {
        let s = self.current().snapshot_tid;
        self.files
            .iter()
            .filter(|f| f.tid_lo >= s)
            .cloned()
            .collect()
    }
}

pub struct EmbeddingSegment {
    pub id: SegmentId,
    pub attr: String,
    pub meta: EmbeddingMeta,
    pub params: IndexParams,
    pub(crate) dir: Option<PathBuf>,
    pub(crate) state: RwLock<EmbState>,
    /// Serializes maintenance work on this segment.
    pub(crate) maintenance: Mutex<()>,
}

impl EmbeddingSegment {
    pub fn new(
        id: SegmentId,
        attr: &str,
        meta: EmbeddingMeta,
        params: IndexParams,
        dir: Option<PathBuf>,
    ) -> Self {
        let index = index::new_index(meta.index_kind, meta.dimension, params);
        Self::with_snapshot(id, attr, meta, params, dir, index, 0, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn with_snapshot(
        id: SegmentId,
        attr: &str,
        meta: EmbeddingMeta,
        params: IndexParams,
        dir: Option<PathBuf>,
        index: Box<dyn VectorIndex>,
        snapshot_tid: Tid,
        files: Vec<Arc<DeltaFile>>,
    ) -> Self {
        let merged_hi = files.last().map_or(snapshot_tid, |f| f.tid_hi);
        let next_seq = files.last().map_or(0, |f| f.seq + 1);
        let snapshot = Arc::new(IndexSnapshot {
            segment: id,
            attr: attr.to_string(),
            snapshot_tid,
            index,
        });
        Self {
            id,
            attr: attr.to_string(),
            meta,
            params,
            dir,
            state: RwLock::new(EmbState {
                snapshots: vec![snapshot],
                files,
                memory: Vec::new(),
                memory_since: None,
                merged_hi,
                next_seq,
            }),
            maintenance: Mutex::new(()),
        }
    }

    /// Appends committed records to the in-memory delta store.
    pub(crate) fn append(&self, records: impl IntoIterator<Item = DeltaRecord>) {
        let mut st = self.state.write();
        let before = st.memory.len();
        st.memory.extend(records);
        if before == 0 && !st.memory.is_empty() {
            st.memory_since = Some(Instant::now());
        }
    }

    pub fn current_snapshot(&self) -> Arc<IndexSnapshot> {
        self.state.read().current().clone()
    }

    /// Pins the snapshot and delta overlay visible at `tid`.
    pub fn view_at(&self, tid: Tid) -> Result<SegmentView> {
        let st = self.state.read();
        let snapshot = st
            .snapshots
            .iter()
            .rev()
            .find(|s| s.snapshot_tid <= tid)
            .cloned()
            .ok_or(Error::SnapshotUnavailable(tid))?;
        let lo = snapshot.snapshot_tid;
        let mut overrides: BTreeMap<u32, Option<Vec<f32>>> = BTreeMap::new();
        let file_records = st
            .files
            .iter()
            .filter(|f| f.tid_hi > lo && f.tid_lo < tid)
            .flat_map(|f| f.records.iter());
        for r in file_records.chain(st.memory.iter()) {
            if r.tid > lo && r.tid <= tid {
                overrides.insert(r.id as u32, r.outcome().map(<[f32]>::to_vec));
            }
        }
        Ok(SegmentView {
            segment: self.id,
            tid,
            snapshot,
            overrides,
        })
    }

    pub fn status(&self) -> SegmentStatus {
        let st = self.state.read();
        let pending = st.pending_files();
        SegmentStatus {
            vtype: self.id.vtype,
            segment: self.id.ordinal,
            attr: self.attr.clone(),
            snapshot_tid: st.current().snapshot_tid,
            indexed_vectors: st.current().index.len(),
            memory_deltas: st.memory.len(),
            pending_delta_files: pending.len(),
            pending_file_records: pending.iter().map(|f| f.records.len()).sum(),
            retained_snapshots: st.snapshots.len(),
            retained_files: st.files.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentStatus {
    pub vtype: u32,
    pub segment: u32,
    pub attr: String,
    pub snapshot_tid: Tid,
    pub indexed_vectors: usize,
    pub memory_deltas: usize,
    pub pending_delta_files: usize,
    pub pending_file_records: usize,
    pub retained_snapshots: usize,
    pub retained_files: usize,
}

/// Result of a search on one segment.
#[derive(Debug, Clone, Default)]
pub struct SegmentSearch {
    pub neighbors: Vec<Neighbor>,
    pub bruteforce: bool,
    /// Eligible vectors in the snapshot index; the fallback compares this
    /// against the threshold.
    pub valid_count: usize,
    /// Eligible vectors held only in the delta overlay.
    pub delta_count: usize,
}

/// Snapshot plus delta overlay of one embedding segment at a pinned TID.
pub struct SegmentView {
    pub segment: SegmentId,
    pub tid: Tid,
    pub snapshot: Arc<IndexSnapshot>,
    overrides: BTreeMap<u32, Option<Vec<f32>>>,
}

impl SegmentView {
    pub fn get(&self, ordinal: u32) -> Option<&[f32]> {
        match self.overrides.get(&ordinal) {
            Some(v) => v.as_deref(),
            None => self.snapshot.index.get_embedding(ordinal),
        }
    }

    /// Ordinals holding a vector at the pinned TID.
    pub fn ordinals(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .snapshot
            .index
            .ordinals()
            .into_iter()
            .filter(|o| !self.overrides.contains_key(o))
            .collect();
        out.extend(
            self.overrides
                .iter()
                .filter(|(_, v)| v.is_some())
                .map(|(o, _)| *o),
        );
        out.sort_unstable();
        out
    }

    pub fn delta_count(&self) -> usize {
        self.overrides.len()
    }

    /// Filter handed to the snapshot index: the caller's filter minus every
    /// ordinal whose snapshot value is shadowed by a delta.
    fn index_filter(&self, filter: Option<&Bitmap>) -> Option<Bitmap> {
        if self.overrides.is_empty() {
            return filter.cloned();
        }
        let mut b = match filter {
            Some(f) => f.clone(),
            None => {
                let slots = self
                    .snapshot
                    .index
                    .ordinals()
                    .last()
                    .map_or(0, |o| *o as usize + 1);
                Bitmap::full(slots)
            }
        };
        for &o in self.overrides.keys() {
            b.remove(o as usize);
        }
        Some(b)
    }

    fn delta_candidates<'a>(
        &'a self,
        filter: Option<&'a Bitmap>,
    ) -> impl Iterator<Item = (u32, &'a [f32])> + 'a {
        self.overrides.iter().filter_map(move |(o, v)| {
            let v = v.as_deref()?;
            filter
                .is_none_or(|f| f.contains(*o as usize))
                .then_some((*o, v))
        })
    }

    /// Top-k over the snapshot index combined with brute force over deltas.
    pub fn search(
        &self,
        query: &[f32],
        params: SearchParams,
        filter: Option<&Bitmap>,
        policy: BruteForcePolicy,
    ) -> Result<SegmentSearch> {
        let index = &self.snapshot.index;
        index::check_dimension(index.dimension(), query)?;
        let metric = index.metric();
        let idx_filter = self.index_filter(filter);
        let fn_filter = match &idx_filter {
            Some(b) => FilterFn::bitmap(b),
            None => FilterFn::all(index.len()),
        };
        let valid_count = fn_filter.valid_count();
        let bruteforce = valid_count < policy.threshold(params.k, index.len());
        let mut out = if bruteforce {
            let mut v: Vec<Neighbor> = match &idx_filter {
                Some(b) => b
                    .iter()
                    .filter_map(|o| {
                        index
                            .get_embedding(o as u32)
                            .map(|e| Neighbor::new(o as u32, metric.distance(query, e)))
                    })
                    .collect(),
                None => index
                    .ordinals()
                    .into_iter()
                    .filter_map(|o| {
                        index
                            .get_embedding(o)
                            .map(|e| Neighbor::new(o, metric.distance(query, e)))
                    })
                    .collect(),
            };
            v.sort_by(Neighbor::cmp_rank);
            v.truncate(params.k);
            v
        } else {
            index.top_k_search(query, params, fn_filter)?
        };
        let before = out.len();
        out.extend(
            self.delta_candidates(filter)
                .map(|(o, v)| Neighbor::new(o, metric.distance(query, v))),
        );
        let delta_count = out.len() - before;
        out.sort_by(Neighbor::cmp_rank);
        out.truncate(params.k);
        Ok(SegmentSearch {
            neighbors: out,
            bruteforce,
            valid_count,
            delta_count,
        })
    }

    pub fn range(
        &self,
        query: &[f32],
        threshold: f32,
        filter: Option<&Bitmap>,
    ) -> Result<Vec<Neighbor>> {
        let index = &self.snapshot.index;
        let metric = index.metric();
        let idx_filter = self.index_filter(filter);
        let fn_filter = match &idx_filter {
            Some(b) => FilterFn::bitmap(b),
            None => FilterFn::all(index.len()),
        };
        let mut out = index.range_search(query, threshold, fn_filter)?;
        out.extend(self.delta_candidates(filter).filter_map(|(o, v)| {
            let d = metric.distance(query, v);
            (d < threshold).then_some(Neighbor::new(o, d))
        }));
        out.sort_by(Neighbor::cmp_rank);
        Ok(out)
    }
}
