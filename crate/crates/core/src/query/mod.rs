//! Hybrid graph + vector query execution.
//!
//! Every operation pins a [`ReadView`](crate::storage::ReadView), works
//! segment by segment on the rayon pool and reduces in a fixed order, so
//! answers do not depend on scheduling.

mod pattern;
mod plan;
mod search;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::Serialize;

use crate::bitmap::Bitmap;
use crate::schema::TypeId;
use crate::storage::{Graph, ReadView, SegmentId, VertexId};

pub use pattern::{
    pattern_filtered_topk, pattern_match, pattern_pairs, similarity_join, EdgeStep, NodePattern,
    NodeSource, PairHit, PathPattern, PatternMatch,
};
pub use plan::{EmbeddingMode, PlanStep, QueryPlan};
pub use search::{
    filtered_topk, range_query, segment_topk, vector_search, EmbeddingReader, SearchOptions,
    SegmentHits,
};

/// Beam width used when a query does not set `ef`.
pub const DEFAULT_EF: usize = 128;

/// A set of vertices, stored as one bitmap of in-segment ordinals per segment.
#[derive(Clone, Default)]
pub struct VertexSet {
    capacity: u32,
    segs: BTreeMap<SegmentId, Bitmap>,
}

impl VertexSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity as u32,
            segs: BTreeMap::new(),
        }
    }

    pub fn for_graph(g: &Graph) -> Self {
        Self::new(g.segment_capacity())
    }

    pub fn from_vertices(capacity: usize, vs: impl IntoIterator<Item = VertexId>) -> Self {
        let mut s = Self::new(capacity);
        for v in vs {
            s.insert(v);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.capacity as usize
    }

    fn locate(&self, v: VertexId) -> (SegmentId, usize) {
        (
            SegmentId::new(v.vtype, v.ordinal / self.capacity),
            (v.ordinal % self.capacity) as usize,
        )
    }

    pub fn insert(&mut self, v: VertexId) {
        let (seg, bit) = self.locate(v);
        let cap = self.capacity();
        self.segs
            .entry(seg)
            .or_insert_with(|| Bitmap::new(cap))
            .insert(bit);
    }

    pub fn contains(&self, v: VertexId) -> bool {
        let (seg, bit) = self.locate(v);
        self.segs.get(&seg).is_some_and(|b| b.contains(bit))
    }

    pub fn len(&self) -> usize {
        self.segs.values().map(Bitmap::count_ones).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.values().all(|b| b.count_ones() == 0)
    }

    /// Members in ascending vertex order.
    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        let cap = self.capacity;
        self.segs.iter().flat_map(move |(s, b)| {
            b.iter()
                .map(move |i| VertexId::new(s.vtype, s.ordinal * cap + i as u32))
        })
    }

    pub fn segment(&self, seg: SegmentId) -> Option<&Bitmap> {
        self.segs.get(&seg)
    }

    pub fn set_segment(&mut self, seg: SegmentId, bitmap: Bitmap) {
        if bitmap.count_ones() == 0 {
            self.segs.remove(&seg);
        } else {
            self.segs.insert(seg, bitmap);
        }
    }

    /// Non-empty segments with their bitmaps.
    pub fn segments(&self) -> impl Iterator<Item = (SegmentId, &Bitmap)> {
        self.segs
            .iter()
            .filter(|(_, b)| b.count_ones() > 0)
            .map(|(s, b)| (*s, b))
    }

    pub fn vertex_types(&self) -> BTreeSet<TypeId> {
        self.segments().map(|(s, _)| s.vtype).collect()
    }

    pub fn of_type(&self, vtype: TypeId) -> VertexSet {
        VertexSet {
            capacity: self.capacity,
            segs: self
                .segs
                .iter()
                .filter(|(s, _)| s.vtype == vtype)
                .map(|(s, b)| (*s, b.clone()))
                .collect(),
        }
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        for (s, b) in &other.segs {
            let cap = self.capacity();
            self.segs
                .entry(*s)
                .or_insert_with(|| Bitmap::new(cap))
                .union_with(b);
        }
    }

    pub fn intersect_with(&mut self, other: &VertexSet) {
        self.segs.retain(|s, b| match other.segs.get(s) {
            Some(o) => {
                b.intersect_with(o);
                b.count_ones() > 0
            }
            None => false,
        });
    }

    pub fn difference_with(&mut self, other: &VertexSet) {
        for (s, b) in self.segs.iter_mut() {
            if let Some(o) = other.segs.get(s) {
                b.difference_with(o);
            }
        }
    }
}

impl PartialEq for VertexSet {
    fn eq(&self, other: &Self) -> bool {
        self.iter().eq(other.iter())
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<VertexId> for VertexSet {
    /// Uses the default segment capacity (1024).
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet::from_vertices(1024, iter)
    }
}

/// One ranked vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hit {
    pub vertex: VertexId,
    pub distance: f32,
}

impl Hit {
    pub fn new(vertex: VertexId, distance: f32) -> Self {
        Self { vertex, distance }
    }

    /// Ascending distance, ties by ascending vertex id.
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.vertex.cmp(&other.vertex))
    }
}

/// Global top-k of per-segment lists: sort the concatenation by
/// `(distance, vertex id)` and keep the first `k`.
pub fn merge_local_topk(locals: Vec<Vec<Hit>>, k: usize) -> Vec<Hit> {
    let mut all: Vec<Hit> = locals.into_iter().flatten().collect();
    all.sort_by(Hit::cmp_rank);
    all.truncate(k);
    all
}

/// Vertex to distance, in ascending distance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceMap {
    entries: Vec<(VertexId, f32)>,
}

impl DistanceMap {
    pub fn from_hits(hits: &[Hit]) -> Self {
        Self {
            entries: hits.iter().map(|h| (h.vertex, h.distance)).collect(),
        }
    }

    pub fn get(&self, v: VertexId) -> Option<f32> {
        self.entries.iter().find(|(x, _)| *x == v).map(|(_, d)| *d)
    }

    /// Adds the entries of `other`, replacing distances of vertices already
    /// present, and keeps ascending `(distance, vertex)` order.
    pub fn absorb(&mut self, other: &DistanceMap) {
        for &(v, d) in &other.entries {
            match self.entries.iter_mut().find(|(x, _)| *x == v) {
                Some(e) => e.1 = d,
                None => self.entries.push((v, d)),
            }
        }
        self.entries
            .sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, f32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairEntry(PairHit);

impl Eq for PairEntry {}

impl Ord for PairEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_rank(&other.0)
    }
}

impl PartialOrd for PairEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `k` best `(source, target, distance)` triples.
#[derive(Debug, Clone)]
pub struct PairHeap {
    k: usize,
    heap: BinaryHeap<PairEntry>,
}

impl PairHeap {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn push(&mut self, hit: PairHit) {
        if self.k == 0 {
            return;
        }
        let e = PairEntry(hit);
        if self.heap.len() < self.k {
            self.heap.push(e);
        } else if self.heap.peek().is_some_and(|top| e < *top) {
            self.heap.pop();
            self.heap.push(e);
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn into_sorted(self) -> Vec<PairHit> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|e| e.0)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub segments_touched: usize,
    pub index_segments: usize,
    pub bruteforce_segments: usize,
    /// Vectors that passed the filter across touched segments.
    pub candidates: usize,
    pub vector_search_ms: f64,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.segments_touched += other.segments_touched;
        self.index_segments += other.index_segments;
        self.bruteforce_segments += other.bruteforce_segments;
        self.candidates += other.candidates;
        self.vector_search_ms += other.vector_search_ms;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOutput {
    pub hits: Vec<Hit>,
    pub stats: SearchStats,
}

impl SearchOutput {
    pub fn vertex_set(&self, capacity: usize) -> VertexSet {
        VertexSet::from_vertices(capacity, self.hits.iter().map(|h| h.vertex))
    }

    pub fn distance_map(&self) -> DistanceMap {
        DistanceMap::from_hits(&self.hits)
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        self.hits.iter().map(|h| h.vertex).collect()
    }

    /// `{vertices, distances, stats}` with vertices rendered as `{type, key}`.
    pub fn to_json(&self, view: &ReadView) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.hits.iter().map(|h| vertex_json(view, h.vertex)).collect::<Vec<_>>(),
            "distances": self.hits.iter().map(|h| h.distance).collect::<Vec<_>>(),
            "stats": self.stats,
        })
    }
}

pub fn vertex_json(view: &ReadView, v: VertexId) -> serde_json::Value {
    let ty = view.catalog().vertex_type_by_id(v.vtype).name.clone();
    serde_json::json!({ "type": ty, "key": view.key_of(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(o: u32) -> VertexId {
        VertexId::new(0, o)
    }

    #[test]
    fn merge_examples() {
        let a = VertexId::new(0, 1);
        let b = VertexId::new(0, 2);
        assert_eq!(
            merge_local_topk(vec![vec![Hit::new(a, 0.1)], vec![Hit::new(b, 0.05)]], 1),
            vec![Hit::new(b, 0.05)]
        );
        assert_eq!(
            merge_local_topk(vec![vec![Hit::new(b, 0.5)], vec![Hit::new(a, 0.5)]], 2),
            vec![Hit::new(a, 0.5), Hit::new(b, 0.5)]
        );
        assert!(merge_local_topk(vec![], 3).is_empty());
    }

    #[test]
    fn vertex_set_ops() {
        let mut s = VertexSet::from_vertices(4, [v(1), v(5), v(6)]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(v(5)) && !s.contains(v(4)));
        assert_eq!(s.segments().count(), 2);
        let t = VertexSet::from_vertices(4, [v(5), v(9)]);
        let mut u = s.clone();
        u.union_with(&t);
        assert_eq!(u.iter().collect::<Vec<_>>(), vec![v(1), v(5), v(6), v(9)]);
        s.intersect_with(&t);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![v(5)]);
        u.difference_with(&t);
        assert_eq!(u, VertexSet::from_vertices(4, [v(1), v(6)]));
    }

    #[test]
    fn pair_heap_keeps_best() {
        let mut h = PairHeap::new(2);
        for (s, t, d) in [(1, 2, 0.5), (3, 4, 0.1), (5, 6, 0.3), (0, 9, 0.3)] {
            h.push(PairHit {
                source: v(s),
                target: v(t),
                distance: d,
            });
        }
        let out: Vec<_> = h
            .into_sorted()
            .iter()
            .map(|p| (p.source.ordinal, p.distance))
            .collect();
        assert_eq!(out, vec![(3, 0.1), (0, 0.3)]);
    }
}
