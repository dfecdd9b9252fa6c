//! Segment-level vector indexes.
//!
//! Every index implements the same four operations: `get_embedding`,
//! `top_k_search`, `range_search` and `update_items`. Ordinals are in-segment
//! vertex ordinals, so an index never needs an id translation table.

mod flat;
mod hnsw;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::schema::{IndexKind, Metric};
use crate::storage::delta::{DeltaAction, DeltaRecord};

pub use flat::FlatIndex;
pub use hnsw::HnswIndex;

/// Initial `k` of the iterated range search.
pub const RANGE_INITIAL_K: usize = 16;
/// Lower bound on the beam width used by range search rounds.
pub const RANGE_EF_MIN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexParams {
    /// Neighbors per node on upper layers; layer 0 keeps `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    pub metric: Metric,
    /// Seed for level assignment.
    pub seed: u64,
}

impl IndexParams {
    pub fn new(metric: Metric) -> Self {
        Self {
            m: 16,
            ef_construction: 128,
            metric,
            seed: 0x5eed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.ef_construction < self.m {
            return Err(Error::Validation(format!(
                "invalid index params: M = {}, ef_construction = {}",
                self.m, self.ef_construction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub k: usize,
    pub ef: usize,
}

impl SearchParams {
    pub fn new(k: usize, ef: usize) -> Self {
        Self { k, ef: ef.max(k) }
    }
}

/// Validity test over in-segment ordinals.
#[derive(Debug, Clone, Copy)]
pub struct FilterFn<'a> {
    bitmap: Option<&'a Bitmap>,
    valid_count: usize,
}

impl<'a> FilterFn<'a> {
    pub fn all(len: usize) -> Self {
        Self {
            bitmap: None,
            valid_count: len,
        }
    }

    pub fn bitmap(bitmap: &'a Bitmap) -> Self {
        Self {
            bitmap: Some(bitmap),
            valid_count: bitmap.count_ones(),
        }
    }

    #[inline]
    pub fn is_valid(&self, ordinal: u32) -> bool {
        match self.bitmap {
            None => true,
            Some(b) => b.contains(ordinal as usize),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub ordinal: u32,
    pub distance: f32,
}

impl Neighbor {
    pub fn new(ordinal: u32, distance: f32) -> Self {
        Self { ordinal, distance }
    }

    /// Ascending distance, ties by ascending ordinal.
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.ordinal.cmp(&other.ordinal))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IndexStats {
    pub distance_computations: u64,
    pub hops: u64,
    pub tombstone_fraction: f64,
}

pub trait VectorIndex: Send + Sync {
    fn kind(&self) -> IndexKind;
    fn dimension(&self) -> usize;
    fn metric(&self) -> Metric;
    /// Number of live (present, not deleted) items.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Live ordinals in ascending order.
    fn ordinals(&self) -> Vec<u32>;
    fn get_embedding(&self, ordinal: u32) -> Option<&[f32]>;
    fn top_k_search(
        &self,
        query: &[f32],
        params: SearchParams,
        filter: FilterFn<'_>,
    ) -> Result<Vec<Neighbor>>;
    /// Every valid item with distance strictly below `threshold`.
    fn range_search(
        &self,
        query: &[f32],
        threshold: f32,
        filter: FilterFn<'_>,
    ) -> Result<Vec<Neighbor>> {
        iterated_range_search(self, query, threshold, filter, RANGE_EF_MIN)
    }
    /// Applies TID-ordered deltas; the last record per id wins.
    fn update_items(&mut self, deltas: &[DeltaRecord], threads: usize) -> Result<()>;
    fn stats(&self) -> IndexStats;
    fn reset_stats(&self);
    fn clone_box(&self) -> Box<dyn VectorIndex>;
    /// Serializes the index structure, if the kind persists anything beyond raw vectors.
    fn save(&self, _w: &mut dyn Write, _snapshot_tid: u64) -> Result<bool> {
        Ok(false)
    }
}

pub fn new_index(kind: IndexKind, dimension: usize, params: IndexParams) -> Box<dyn VectorIndex> {
    match kind {
        IndexKind::Flat => Box::new(FlatIndex::new(dimension, params.metric)),
        IndexKind::Hnsw => Box::new(HnswIndex::new(dimension, params)),
    }
}

/// Builds an index from `(ordinal, vector)` pairs.
pub fn build(
    kind: IndexKind,
    dimension: usize,
    params: IndexParams,
    vectors: &[(u32, Vec<f32>)],
) -> Result<Box<dyn VectorIndex>> {
    params.validate()?;
    for (_, v) in vectors {
        check_dimension(dimension, v)?;
    }
    match kind {
        IndexKind::Flat => {
            let mut idx = FlatIndex::new(dimension, params.metric);
            for (o, v) in vectors {
                idx.set(*o, v);
            }
            Ok(Box::new(idx))
        }
        IndexKind::Hnsw => {
            let mut idx = HnswIndex::new(dimension, params);
            idx.insert_batch(vectors, 1);
            Ok(Box::new(idx))
        }
    }
}

pub fn load_hnsw(r: &mut dyn Read) -> Result<(HnswIndex, u64)> {
    HnswIndex::load(r)
}

pub(crate) fn check_dimension(expected: usize, v: &[f32]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

/// Folds TID-ordered deltas into the final state per id.
///
/// Work is split by id across `threads` workers; each worker scans the full
/// record list but only keeps its own ids, so per-id record order is kept.
pub fn fold_deltas(deltas: &[DeltaRecord], threads: usize) -> BTreeMap<u32, Option<Vec<f32>>> {
    let threads = threads.max(1);
    let fold_part = |part: usize| {
        let mut out: BTreeMap<u32, Option<&[f32]>> = BTreeMap::new();
        for r in deltas {
            if r.id as usize % threads == part {
                let v = match r.action {
                    DeltaAction::Upsert => Some(r.value.as_slice()),
                    DeltaAction::Delete => None,
                };
                out.insert(r.id as u32, v);
            }
        }
        out
    };
    let parts: Vec<_> = if threads == 1 {
        vec![fold_part(0)]
    } else {
        (0..threads).into_par_iter().map(fold_part).collect()
    };
    parts
        .into_iter()
        .flatten()
        .map(|(id, v)| (id, v.map(<[f32]>::to_vec)))
        .collect()
}

/// Range search by repeated top-k calls: start at `k = 16`, double `k` while
/// the full result list has a median distance below the threshold, then cut at
/// the threshold.
pub fn iterated_range_search<I: VectorIndex + ?Sized>(
    index: &I,
    query: &[f32],
    threshold: f32,
    filter: FilterFn<'_>,
    ef_min: usize,
) -> Result<Vec<Neighbor>> {
    check_dimension(index.dimension(), query)?;
    if threshold.is_nan() || threshold <= 0.0 && index.metric() != Metric::InnerProduct {
        return Ok(Vec::new());
    }
    let limit = filter.valid_count().min(index.len());
    let mut k = RANGE_INITIAL_K;
    loop {
        let params = SearchParams::new(k, (2 * k).max(ef_min));
        let res = index.top_k_search(query, params, filter)?;
        let median = res.get(res.len() / 2).map(|n| n.distance);
        let keep_going = res.len() == k && k < limit && median.is_some_and(|m| m < threshold);
        if !keep_going {
            return Ok(res.into_iter().filter(|n| n.distance < threshold).collect());
        }
        k *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_last_writer_wins() {
        let deltas = vec![
            DeltaRecord::upsert(5, 1, vec![1.0]),
            DeltaRecord::upsert(5, 2, vec![2.0]),
            DeltaRecord::delete(6, 3),
            DeltaRecord::delete(7, 4),
            DeltaRecord::upsert(7, 5, vec![3.0]),
        ];
        for threads in [1, 3] {
            let f = fold_deltas(&deltas, threads);
            assert_eq!(f[&5], Some(vec![2.0]));
            assert_eq!(f[&6], None);
            assert_eq!(f[&7], Some(vec![3.0]));
        }
    }

    #[test]
    fn params_validation() {
        let mut p = IndexParams::new(Metric::L2);
        p.validate().unwrap();
        p.m = 1;
        assert!(p.validate().is_err());
        p.m = 16;
        p.ef_construction = 8;
        assert!(p.validate().is_err());
    }
}
