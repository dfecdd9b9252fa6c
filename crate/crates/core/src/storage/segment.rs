//! Vertex segments: scalar rows and adjacency, versioned by TID.
//!
//! A vertex segment never holds vector payloads; those live in the embedding
//! segments that share its ordinal space.

use serde::{Deserialize, Serialize};

use super::{SegmentId, Tid, VertexId};
use crate::bitmap::Bitmap;
use crate::predicate::Predicate;
use crate::schema::{EdgeTypeId, Value, VertexType};

/// Last-writer-wins cell; `versions` is ascending by TID.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    versions: Vec<(Tid, T)>,
}

impl<T> Versioned<T> {
    pub fn set(&mut self, tid: Tid, value: T) {
        match self.versions.last_mut() {
            Some((t, v)) if *t == tid => *v = value,
            _ => self.versions.push((tid, value)),
        }
    }

    pub fn at(&self, tid: Tid) -> Option<&T> {
        let idx = self.versions.partition_point(|(t, _)| *t <= tid);
        idx.checked_sub(1).map(|i| &self.versions[i].1)
    }

    pub fn last_tid(&self) -> Tid {
        self.versions.last().map_or(0, |(t, _)| *t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub etype: EdgeTypeId,
    pub other: VertexId,
    pub added: Tid,
    pub removed: Option<Tid>,
}

impl EdgeRecord {
    pub fn live_at(&self, tid: Tid) -> bool {
        self.added <= tid && self.removed.is_none_or(|r| r > tid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRow {
    pub key: i64,
    pub exists: Versioned<bool>,
    pub attrs: Vec<Versioned<Option<Value>>>,
    pub out_edges: Vec<EdgeRecord>,
    /// Reverse adjacency, kept so `<-` hops do not scan every segment.
    pub in_edges: Vec<EdgeRecord>,
    pub last_write: Tid,
}

impl VertexRow {
    pub fn new(key: i64, attr_count: usize) -> Self {
        Self {
            key,
            exists: Versioned::default(),
            attrs: vec![Versioned::default(); attr_count],
            out_edges: Vec::new(),
            in_edges: Vec::new(),
            last_write: 0,
        }
    }

    pub fn live_at(&self, tid: Tid) -> bool {
        self.exists.at(tid).copied().unwrap_or(false)
    }

    pub fn attr_at(&self, idx: usize, tid: Tid) -> Option<&Value> {
        self.attrs.get(idx)?.at(tid)?.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentData {
    pub rows: Vec<VertexRow>,
}

impl SegmentData {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn live_bitmap(&self, capacity: usize, tid: Tid) -> Bitmap {
        let mut b = Bitmap::new(capacity);
        for (i, r) in self.rows.iter().enumerate() {
            if r.live_at(tid) {
                b.insert(i);
            }
        }
        b
    }

    /// Bit `i` is set iff row `i` is live at `tid` and satisfies `pred`.
    pub fn scan(&self, vtype: &VertexType, pred: &Predicate, capacity: usize, tid: Tid) -> Bitmap {
        let mut b = Bitmap::new(capacity);
        for (i, r) in self.rows.iter().enumerate() {
            if !r.live_at(tid) {
                continue;
            }
            let lookup = |name: &str| vtype.attr_index(name).and_then(|idx| r.attr_at(idx, tid));
            if pred.eval(&lookup) {
                b.insert(i);
            }
        }
        b
    }
}

impl Default for SegmentData {
    fn default() -> Self {
        Self::new()
    }
}

/// Round-robin placement of segments onto partitions, offset by `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionMap {
    pub partitions: usize,
    pub seed: usize,
}

impl PartitionMap {
    pub fn new(partitions: usize) -> Self {
        Self {
            partitions: partitions.max(1),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: usize) -> Self {
        self.seed = seed;
        self
    }

    /// An embedding segment always maps with its vertex segment: both are
    /// placed by the shared `SegmentId`.
    pub fn owner(&self, seg: SegmentId) -> usize {
        (seg.ordinal as usize + self.seed) % self.partitions
    }

    pub fn assign(&self, segments: &[SegmentId]) -> Vec<Vec<SegmentId>> {
        let mut out = vec![Vec::new(); self.partitions];
        for &s in segments {
            out[self.owner(s)].push(s);
        }
        out
    }
}
