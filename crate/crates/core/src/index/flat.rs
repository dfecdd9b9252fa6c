use std::sync::atomic::{AtomicU64, Ordering};

use super::{
    check_dimension, fold_deltas, FilterFn, IndexStats, Neighbor, SearchParams, VectorIndex,
};
use crate::bitmap::Bitmap;
use crate::error::Result;
use crate::schema::{IndexKind, Metric};
use crate::storage::delta::DeltaRecord;

/// Exact index: a dense slot array scanned linearly.
#[derive(Debug)]
pub struct FlatIndex {
    dimension: usize,
    metric: Metric,
    data: Vec<f32>,
    present: Bitmap,
    distance_computations: AtomicU64,
}

impl Clone for FlatIndex {
    fn clone(&self) -> Self {
        Self {
            dimension: self.dimension,
            metric: self.metric,
            data: self.data.clone(),
            present: self.present.clone(),
            distance_computations: AtomicU64::new(0),
        }
    }
}

impl FlatIndex {
    pub fn new(dimension: usize, metric: Metric) -> Self {
        Self {
            dimension,
            metric,
            data: Vec::new(),
            present: Bitmap::new(0),
            distance_computations: AtomicU64::new(0),
        }
    }

    /// Number of ordinal slots (present or not).
    pub fn slots(&self) -> usize {
        self.data.len() / self.dimension
    }

    pub fn set(&mut self, ordinal: u32, v: &[f32]) {
        let o = ordinal as usize;
        if o >= self.slots() {
            self.data.resize((o + 1) * self.dimension, 0.0);
            self.present.grow(o + 1);
        }
        self.data[o * self.dimension..(o + 1) * self.dimension].copy_from_slice(v);
        self.present.insert(o);
    }

    pub fn remove(&mut self, ordinal: u32) {
        self.present.remove(ordinal as usize);
    }

    fn scan(&self, query: &[f32], filter: FilterFn<'_>, mut keep: impl FnMut(Neighbor)) {
        let mut count = 0u64;
        for o in self.present.iter() {
            let ord = o as u32;
            if !filter.is_valid(ord) {
                continue;
            }
            let d = self.metric.distance(
                query,
                &self.data[o * self.dimension..(o + 1) * self.dimension],
            );
            count += 1;
            keep(Neighbor::new(ord, d));
        }
        self.distance_computations
            .fetch_add(count, Ordering::Relaxed);
    }
}

impl VectorIndex for FlatIndex {
    fn kind(&self) -> IndexKind {
        IndexKind::Flat
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn len(&self) -> usize {
        self.present.count_ones()
    }

    fn ordinals(&self) -> Vec<u32> {
        self.present.iter().map(|o| o as u32).collect()
    }

    fn get_embedding(&self, ordinal: u32) -> Option<&[f32]> {
        let o = ordinal as usize;
        self.present
            .contains(o)
            .then(|| &self.data[o * self.dimension..(o + 1) * self.dimension])
    }

    fn top_k_search(
        &self,
        query: &[f32],
        params: SearchParams,
        filter: FilterFn<'_>,
    ) -> Result<Vec<Neighbor>> {
        check_dimension(self.dimension, query)?;
        let mut all = Vec::new();
        self.scan(query, filter, |n| all.push(n));
        all.sort_by(Neighbor::cmp_rank);
        all.truncate(params.k);
        Ok(all)
    }

    fn range_search(
        &self,
        query: &[f32],
        threshold: f32,
        filter: FilterFn<'_>,
    ) -> Result<Vec<Neighbor>> {
        check_dimension(self.dimension, query)?;
        let mut out = Vec::new();
        self.scan(query, filter, |n| {
            if n.distance < threshold {
                out.push(n)
            }
        });
        out.sort_by(Neighbor::cmp_rank);
        Ok(out)
    }

    fn update_items(&mut self, deltas: &[DeltaRecord], threads: usize) -> Result<()> {
        for r in deltas {
            if let Some(v) = r.outcome() {
                check_dimension(self.dimension, v)?;
            }
        }
        for (id, v) in fold_deltas(deltas, threads) {
            match v {
                Some(v) => self.set(id, &v),
                None => self.remove(id),
            }
        }
        Ok(())
    }

    fn stats(&self) -> IndexStats {
        IndexStats {
            distance_computations: self.distance_computations.load(Ordering::Relaxed),
            hops: 0,
            tombstone_fraction: 0.0,
        }
    }

    fn reset_stats(&self) {
        self.distance_computations.store(0, Ordering::Relaxed);
    }

    fn clone_box(&self) -> Box<dyn VectorIndex> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> FlatIndex {
        let mut f = FlatIndex::new(2, Metric::L2);
        f.set(0, &[1.0, 0.0]);
        f.set(1, &[0.0, 1.0]);
        f.set(2, &[-1.0, 0.0]);
        f
    }

    #[test]
    fn top_k_hand_checked() {
        let f = three();
        let r = f
            .top_k_search(&[1.0, 0.0], SearchParams::new(2, 2), FilterFn::all(3))
            .unwrap();
        assert_eq!(
            r,
            vec![Neighbor::new(0, 0.0), Neighbor::new(1, 2f32.sqrt())]
        );

        let bm = Bitmap::from_indices(3, [1, 2]);
        let r = f
            .top_k_search(&[1.0, 0.0], SearchParams::new(2, 2), FilterFn::bitmap(&bm))
            .unwrap();
        assert_eq!(
            r,
            vec![Neighbor::new(1, 2f32.sqrt()), Neighbor::new(2, 2.0)]
        );
    }

    #[test]
    fn k_beyond_valid_count() {
        let f = three();
        let bm = Bitmap::from_indices(3, [2]);
        let r = f
            .top_k_search(
                &[1.0, 0.0],
                SearchParams::new(10, 10),
                FilterFn::bitmap(&bm),
            )
            .unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn range_hand_checked() {
        let mut f = FlatIndex::new(2, Metric::L2);
        f.set(0, &[1.0, 0.0]);
        f.set(1, &[0.0, 1.0]);
        let r = f.range_search(&[1.0, 0.0], 1.0, FilterFn::all(2)).unwrap();
        assert_eq!(r, vec![Neighbor::new(0, 0.0)]);
        assert_eq!(
            f.range_search(&[1.0, 0.0], f32::INFINITY, FilterFn::all(2))
                .unwrap()
                .len(),
            2
        );
        assert!(f
            .range_search(&[5.0, 5.0], 0.5, FilterFn::all(2))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn stats_count_scans() {
        let f = three();
        assert_eq!(f.stats(), IndexStats::default());
        f.top_k_search(&[0.0, 0.0], SearchParams::new(1, 1), FilterFn::all(3))
            .unwrap();
        assert_eq!(f.stats().distance_computations, 3);
    }

    #[test]
    fn dimension_checked() {
        let f = three();
        assert!(f
            .top_k_search(&[1.0], SearchParams::new(1, 1), FilterFn::all(3))
            .is_err());
    }

    #[test]
    fn embeddings_and_deletes() {
        let mut f = three();
        assert_eq!(f.get_embedding(1), Some(&[0.0, 1.0][..]));
        f.update_items(&[DeltaRecord::delete(1, 9)], 1).unwrap();
        assert_eq!(f.get_embedding(1), None);
        assert_eq!(f.get_embedding(42), None);
    }
}
