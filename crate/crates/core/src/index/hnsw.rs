//! Hierarchical navigable small world graph index.
//!
//! Nodes are addressed by in-segment ordinal. Levels are drawn from a
//! per-ordinal stream of a seeded ChaCha generator, so a node's level does not
//! depend on insertion order. Deletes only set a tombstone; tombstoned nodes
//! stay in the graph for navigation and are excluded from results.
//!
//! Filtered search follows the usual pre-filter scheme: invalid nodes are
//! still expanded, but only valid nodes enter the result set, so one call
//! returns up to `k` valid neighbors.

use std::cmp::{Ordering as CmpOrdering, Reverse};
use std::collections::BinaryHeap;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    check_dimension, fold_deltas, FilterFn, IndexParams, IndexStats, Neighbor, SearchParams,
    VectorIndex,
};
use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::schema::{IndexKind, Metric};
use crate::storage::delta::DeltaRecord;

const MAX_LEVEL: usize = 16;
const HNSW_MAGIC: &[u8; 4] = b"GHNS";

#[derive(Clone, Copy)]
struct Scored(Neighbor);

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}
impl Eq for Scored {}
impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scored {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.0.cmp_rank(&other.0)
    }
}

#[derive(Default)]
struct Counters {
    distances: u64,
    hops: u64,
}

pub struct HnswIndex {
    dimension: usize,
    params: IndexParams,
    level_mult: f64,
    vectors: Vec<f32>,
    /// Level per slot, `-1` when the slot is empty.
    levels: Vec<i8>,
    links: Vec<RwLock<Vec<Vec<u32>>>>,
    tombstones: Bitmap,
    entry: Mutex<Option<(u32, usize)>>,
    distance_computations: AtomicU64,
    hops: AtomicU64,
}

impl Clone for HnswIndex {
    fn clone(&self) -> Self {
        Self {
            dimension: self.dimension,
            params: self.params,
            level_mult: self.level_mult,
            vectors: self.vectors.clone(),
            levels: self.levels.clone(),
            links: self
                .links
                .iter()
                .map(|l| RwLock::new(l.read().clone()))
                .collect(),
            tombstones: self.tombstones.clone(),
            entry: Mutex::new(*self.entry.lock()),
            distance_computations: AtomicU64::new(0),
            hops: AtomicU64::new(0),
        }
    }
}

impl HnswIndex {
    pub fn new(dimension: usize, params: IndexParams) -> Self {
        Self {
            dimension,
            params,
            level_mult: 1.0 / (params.m as f64).ln(),
            vectors: Vec::new(),
            levels: Vec::new(),
            links: Vec::new(),
            tombstones: Bitmap::new(0),
            entry: Mutex::new(None),
            distance_computations: AtomicU64::new(0),
            hops: AtomicU64::new(0),
        }
    }

    pub fn params(&self) -> IndexParams {
        self.params
    }

    fn slots(&self) -> usize {
        self.levels.len()
    }

    fn present(&self, o: u32) -> bool {
        self.levels.get(o as usize).is_some_and(|&l| l >= 0)
    }

    #[inline]
    fn vector(&self, o: u32) -> &[f32] {
        let o = o as usize;
        &self.vectors[o * self.dimension..(o + 1) * self.dimension]
    }

    #[inline]
    fn dist(&self, q: &[f32], o: u32, c: &mut Counters) -> f32 {
        c.distances += 1;
        self.params.metric.distance(q, self.vector(o))
    }

    fn level_for(&self, ordinal: u32) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(ordinal as u64);
        let u: f64 = 1.0 - rng.random::<f64>();
        ((-u.ln() * self.level_mult).floor() as usize).min(MAX_LEVEL)
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn flush(&self, c: &Counters) {
        self.distance_computations
            .fetch_add(c.distances, Ordering::Relaxed);
        self.hops.fetch_add(c.hops, Ordering::Relaxed);
    }

    /// Beam search on one layer. With a filter, only valid live nodes enter
    /// the result set; without one every reached node does.
    fn search_layer(
        &self,
        q: &[f32],
        entry_points: &[Neighbor],
        ef: usize,
        layer: usize,
        filter: Option<FilterFn<'_>>,
        c: &mut Counters,
    ) -> Vec<Neighbor> {
        let accept = |o: u32| match filter {
            None => true,
            Some(f) => f.is_valid(o) && !self.tombstones.contains(o as usize),
        };
        let mut visited = Bitmap::new(self.slots());
        let mut candidates: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut results: BinaryHeap<Scored> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.contains(ep.ordinal as usize) {
                continue;
            }
            visited.insert(ep.ordinal as usize);
            candidates.push(Reverse(Scored(ep)));
            if accept(ep.ordinal) {
                results.push(Scored(ep));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        while let Some(Reverse(Scored(cur))) = candidates.pop() {
            if results.len() >= ef && results.peek().is_some_and(|w| cur.distance > w.0.distance) {
                break;
            }
            c.hops += 1;
            let links = self.links[cur.ordinal as usize].read();
            let Some(neighbors) = links.get(layer) else {
                continue;
            };
            for &n in neighbors {
                if visited.contains(n as usize) {
                    continue;
                }
                visited.insert(n as usize);
                let d = self.dist(q, n, c);
                let worst = results.peek().map(|w| w.0.distance);
                if results.len() < ef || worst.is_some_and(|w| d < w) {
                    let nb = Neighbor::new(n, d);
                    candidates.push(Reverse(Scored(nb)));
                    if accept(n) {
                        results.push(Scored(nb));
                        if results.len() > ef {
                            results.pop();
                        }
                    }
                }
            }
        }
        let mut out: Vec<Neighbor> = results.into_iter().map(|s| s.0).collect();
        out.sort_by(Neighbor::cmp_rank);
        out
    }

    /// Keeps a candidate only if it is closer to the base than to every
    /// neighbor already kept. `candidates` must be sorted ascending. With
    /// `fill`, pruned candidates top the list up to `m` in distance order.
    fn select_neighbors(
        &self,
        candidates: &[Neighbor],
        m: usize,
        fill: bool,
        c: &mut Counters,
    ) -> Vec<u32> {
        let mut kept: Vec<u32> = Vec::with_capacity(m);
        let mut pruned = Vec::new();
        for cand in candidates {
            if kept.len() >= m {
                break;
            }
            let v = self.vector(cand.ordinal);
            let good = kept.iter().all(|&r| self.dist(v, r, c) >= cand.distance);
            if good {
                kept.push(cand.ordinal);
            } else {
                pruned.push(cand.ordinal);
            }
        }
        if fill {
            kept.extend(pruned.into_iter().take(m.saturating_sub(kept.len())));
        }
        kept
    }

    /// After `x` moved, each of its former neighbors rebuilds its list from
    /// its own links plus the rest of `x`'s old neighborhood, so nodes that
    /// were reached through `x` stay reachable.
    fn repair(&self, x: u32, old: &[Vec<u32>], c: &mut Counters) {
        for (layer, olds) in old.iter().enumerate() {
            for &y in olds {
                if y == x {
                    continue;
                }
                let mut cand: Vec<u32> = self.links[y as usize]
                    .read()
                    .get(layer)
                    .cloned()
                    .unwrap_or_default();
                cand.extend(olds.iter().copied().filter(|&z| z != y));
                cand.push(x);
                cand.sort_unstable();
                cand.dedup();
                let base = self.vector(y);
                let mut scored: Vec<Neighbor> = cand
                    .into_iter()
                    .map(|o| Neighbor::new(o, self.dist(base, o, c)))
                    .collect();
                scored.sort_by(Neighbor::cmp_rank);
                let list = self.select_neighbors(&scored, self.max_links(layer), true, c);
                if let Some(l) = self.links[y as usize].write().get_mut(layer) {
                    *l = list;
                }
            }
        }
    }

    fn add_link(&self, node: u32, new: u32, layer: usize, c: &mut Counters) {
        let mmax = self.max_links(layer);
        let mut links = self.links[node as usize].write();
        let Some(list) = links.get_mut(layer) else {
            return;
        };
        if list.contains(&new) {
            return;
        }
        if list.len() < mmax {
            list.push(new);
            return;
        }
        let base = self.vector(node);
        let mut cands: Vec<Neighbor> = list
            .iter()
            .chain(std::iter::once(&new))
            .map(|&o| Neighbor::new(o, self.dist(base, o, c)))
            .collect();
        cands.sort_by(Neighbor::cmp_rank);
        *list = self.select_neighbors(&cands, mmax, false, c);
    }

    /// Links (or re-links) a node whose vector and level are already in place.
    fn link(&self, x: u32, c: &mut Counters) {
        let level = self.levels[x as usize] as usize;
        let (ep, max_level) = {
            let mut entry = self.entry.lock();
            match *entry {
                None => {
                    *entry = Some((x, level));
                    return;
                }
                Some(e) => e,
            }
        };
        let q = self.vector(x);
        let mut cur = vec![Neighbor::new(ep, self.dist(q, ep, c))];
        for layer in (level + 1..=max_level).rev() {
            cur = self.search_layer(q, &cur, 1, layer, None, c);
        }
        for layer in (0..=level.min(max_level)).rev() {
            let w = self.search_layer(q, &cur, self.params.ef_construction, layer, None, c);
            let cands: Vec<Neighbor> = w.iter().copied().filter(|n| n.ordinal != x).collect();
            let selected = self.select_neighbors(&cands, self.params.m, true, c);
            self.links[x as usize].write()[layer] = selected.clone();
            for n in selected {
                self.add_link(n, x, layer, c);
            }
            if !w.is_empty() {
                cur = w;
            }
        }
        if level > max_level {
            let mut entry = self.entry.lock();
            if entry.is_none_or(|(_, l)| level > l) {
                *entry = Some((x, level));
            }
        }
    }

    /// Inserts or replaces vectors. Storage is prepared serially; linking runs
    /// on `threads` workers (deterministic when `threads == 1`).
    pub(crate) fn insert_batch(&mut self, items: &[(u32, Vec<f32>)], threads: usize) {
        if items.is_empty() {
            return;
        }
        let max_ord = items.iter().map(|(o, _)| *o as usize).max().unwrap_or(0);
        if max_ord >= self.slots() {
            self.vectors.resize((max_ord + 1) * self.dimension, 0.0);
            self.levels.resize(max_ord + 1, -1);
            self.links
                .resize_with(max_ord + 1, || RwLock::new(Vec::new()));
            self.tombstones.grow(max_ord + 1);
        }
        // Re-linked nodes carry their previous neighbor lists for repair.
        let mut order: Vec<(u32, Option<Vec<Vec<u32>>>)> = Vec::with_capacity(items.len());
        for (o, v) in items {
            let i = *o as usize;
            self.vectors[i * self.dimension..(i + 1) * self.dimension].copy_from_slice(v);
            self.tombstones.remove(i);
            let old = if self.levels[i] < 0 {
                let level = self.level_for(*o);
                self.levels[i] = level as i8;
                *self.links[i].get_mut() = vec![Vec::new(); level + 1];
                None
            } else {
                Some(self.links[i].get_mut().clone())
            };
            order.push((*o, old));
        }
        let this = &*self;
        let relink = |o: u32, old: &Option<Vec<Vec<u32>>>, c: &mut Counters| {
            this.link(o, c);
            if let Some(old) = old {
                this.repair(o, old, c);
            }
        };
        if threads <= 1 {
            let mut c = Counters::default();
            for (o, old) in &order {
                relink(*o, old, &mut c);
            }
        } else {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            let run = || {
                order.par_iter().for_each(|(o, old)| {
                    let mut c = Counters::default();
                    relink(*o, old, &mut c);
                })
            };
            match pool {
                Ok(p) => p.install(run),
                Err(_) => run(),
            }
        }
    }

    pub fn save_to(&self, w: &mut dyn Write, snapshot_tid: u64) -> Result<()> {
        w.write_all(HNSW_MAGIC)?;
        w.write_u32::<LittleEndian>(self.params.m as u32)?;
        w.write_u32::<LittleEndian>(self.params.ef_construction as u32)?;
        w.write_u8(metric_code(self.params.metric))?;
        w.write_u64::<LittleEndian>(self.params.seed)?;
        w.write_u32::<LittleEndian>(self.dimension as u32)?;
        w.write_u64::<LittleEndian>(self.slots() as u64)?;
        w.write_u64::<LittleEndian>(snapshot_tid)?;
        let entry = *self.entry.lock();
        w.write_i64::<LittleEndian>(entry.map_or(-1, |(o, _)| o as i64))?;
        w.write_u32::<LittleEndian>(entry.map_or(0, |(_, l)| l as u32))?;
        for (i, &l) in self.levels.iter().enumerate() {
            w.write_i8(l)?;
            w.write_u8(self.tombstones.contains(i) as u8)?;
        }
        for (i, &l) in self.levels.iter().enumerate() {
            if l < 0 {
                continue;
            }
            let links = self.links[i].read();
            for layer in links.iter() {
                w.write_u32::<LittleEndian>(layer.len() as u32)?;
                for &n in layer {
                    w.write_u32::<LittleEndian>(n)?;
                }
            }
        }
        for (i, &l) in self.levels.iter().enumerate() {
            if l >= 0 {
                for &x in self.vector(i as u32) {
                    w.write_f32::<LittleEndian>(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(r: &mut dyn Read) -> Result<(Self, u64)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != HNSW_MAGIC {
            return Err(Error::Decode("bad hnsw magic".into()));
        }
        let m = r.read_u32::<LittleEndian>()? as usize;
        let ef_construction = r.read_u32::<LittleEndian>()? as usize;
        let metric = metric_from_code(r.read_u8()?)?;
        let seed = r.read_u64::<LittleEndian>()?;
        let dimension = r.read_u32::<LittleEndian>()? as usize;
        let slots = r.read_u64::<LittleEndian>()? as usize;
        let snapshot_tid = r.read_u64::<LittleEndian>()?;
        let entry_ord = r.read_i64::<LittleEndian>()?;
        let entry_level = r.read_u32::<LittleEndian>()? as usize;
        let params = IndexParams {
            m,
            ef_construction,
            metric,
            seed,
        };
        let mut idx = HnswIndex::new(dimension, params);
        idx.levels = Vec::with_capacity(slots);
        idx.tombstones = Bitmap::new(slots);
        for i in 0..slots {
            idx.levels.push(r.read_i8()?);
            if r.read_u8()? != 0 {
                idx.tombstones.insert(i);
            }
        }
        idx.links = (0..slots).map(|_| RwLock::new(Vec::new())).collect();
        for i in 0..slots {
            let l = idx.levels[i];
            if l < 0 {
                continue;
            }
            let mut layers = Vec::with_capacity(l as usize + 1);
            for _ in 0..=l {
                let n = r.read_u32::<LittleEndian>()? as usize;
                let mut layer = vec![0u32; n];
                r.read_u32_into::<LittleEndian>(&mut layer)?;
                layers.push(layer);
            }
            *idx.links[i].get_mut() = layers;
        }
        idx.vectors = vec![0.0; slots * dimension];
        for i in 0..slots {
            if idx.levels[i] >= 0 {
                r.read_f32_into::<LittleEndian>(
                    &mut idx.vectors[i * dimension..(i + 1) * dimension],
                )?;
            }
        }
        *idx.entry.get_mut() = (entry_ord >= 0).then_some((entry_ord as u32, entry_level));
        Ok((idx, snapshot_tid))
    }
}

pub(crate) fn metric_code(m: Metric) -> u8 {
    match m {
        Metric::L2 => 0,
        Metric::Cosine => 1,
        Metric::InnerProduct => 2,
    }
}

pub(crate) fn metric_from_code(c: u8) -> Result<Metric> {
    Ok(match c {
        0 => Metric::L2,
        1 => Metric::Cosine,
        2 => Metric::InnerProduct,
        _ => return Err(Error::Decode(format!("bad metric code {c}"))),
    })
}

impl VectorIndex for HnswIndex {
    fn kind(&self) -> IndexKind {
        IndexKind::Hnsw
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn metric(&self) -> Metric {
        self.params.metric
    }

    fn len(&self) -> usize {
        self.levels.iter().filter(|&&l| l >= 0).count() - self.tombstones.count_ones()
    }

    fn ordinals(&self) -> Vec<u32> {
        (0..self.slots() as u32)
            .filter(|&o| self.present(o) && !self.tombstones.contains(o as usize))
            .collect()
    }

    fn get_embedding(&self, ordinal: u32) -> Option<&[f32]> {
        (self.present(ordinal) && !self.tombstones.contains(ordinal as usize))
            .then(|| self.vector(ordinal))
    }

    fn top_k_search(
        &self,
        query: &[f32],
        params: SearchParams,
        filter: FilterFn<'_>,
    ) -> Result<Vec<Neighbor>> {
        check_dimension(self.dimension, query)?;
        let Some((ep, max_level)) = *self.entry.lock() else {
            return Ok(Vec::new());
        };
        if params.k == 0 || filter.valid_count() == 0 {
            return Ok(Vec::new());
        }
        let mut c = Counters::default();
        let mut cur = vec![Neighbor::new(ep, self.dist(query, ep, &mut c))];
        for layer in (1..=max_level).rev() {
            cur = self.search_layer(query, &cur, 1, layer, None, &mut c);
        }
        let mut res = self.search_layer(
            query,
            &cur,
            params.ef.max(params.k),
            0,
            Some(filter),
            &mut c,
        );
        self.flush(&c);
        res.truncate(params.k);
        Ok(res)
    }

    fn update_items(&mut self, deltas: &[DeltaRecord], threads: usize) -> Result<()> {
        for r in deltas {
            if let Some(v) = r.outcome() {
                check_dimension(self.dimension, v)?;
            }
        }
        let mut upserts = Vec::new();
        for (id, v) in fold_deltas(deltas, threads) {
            match v {
                Some(v) => upserts.push((id, v)),
                None => {
                    if self.present(id) {
                        self.tombstones.insert(id as usize);
                    }
                }
            }
        }
        self.insert_batch(&upserts, threads);
        Ok(())
    }

    fn stats(&self) -> IndexStats {
        let present = self.levels.iter().filter(|&&l| l >= 0).count();
        IndexStats {
            distance_computations: self.distance_computations.load(Ordering::Relaxed),
            hops: self.hops.load(Ordering::Relaxed),
            tombstone_fraction: if present == 0 {
                0.0
            } else {
                self.tombstones.count_ones() as f64 / present as f64
            },
        }
    }

    fn reset_stats(&self) {
        self.distance_computations.store(0, Ordering::Relaxed);
        self.hops.store(0, Ordering::Relaxed);
    }

    fn clone_box(&self) -> Box<dyn VectorIndex> {
        Box::new(self.clone())
    }

    fn save(&self, w: &mut dyn Write, snapshot_tid: u64) -> Result<bool> {
        self.save_to(w, snapshot_tid)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build, FlatIndex};
    use rand::rngs::StdRng;

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<(u32, Vec<f32>)> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|i| (i as u32, (0..dim).map(|_| rng.random::<f32>()).collect()))
            .collect()
    }

    fn recall(
        hnsw: &dyn VectorIndex,
        flat: &dyn VectorIndex,
        queries: &[Vec<f32>],
        k: usize,
        ef: usize,
    ) -> f64 {
        let mut hit = 0;
        for q in queries {
            let truth: Vec<u32> = flat
                .top_k_search(q, SearchParams::new(k, k), FilterFn::all(flat.len()))
                .unwrap()
                .iter()
                .map(|n| n.ordinal)
                .collect();
            let got = hnsw
                .top_k_search(q, SearchParams::new(k, ef), FilterFn::all(hnsw.len()))
                .unwrap();
            hit += got.iter().filter(|n| truth.contains(&n.ordinal)).count();
        }
        hit as f64 / (k * queries.len()) as f64
    }

    #[test]
    fn empty_and_single() {
        let p = IndexParams::new(Metric::L2);
        let idx = build(IndexKind::Hnsw, 2, p, &[]).unwrap();
        assert!(idx
            .top_k_search(&[0.0, 0.0], SearchParams::new(3, 10), FilterFn::all(0))
            .unwrap()
            .is_empty());
        let idx = build(IndexKind::Hnsw, 2, p, &[(4, vec![3.0, 4.0])]).unwrap();
        let r = idx
            .top_k_search(&[0.0, 0.0], SearchParams::new(1, 10), FilterFn::all(1))
            .unwrap();
        assert_eq!(r, vec![Neighbor::new(4, 5.0)]);
        assert!(idx.stats().hops >= 1);
    }

    #[test]
    fn recall_on_1000_16d() {
        let data = random_vectors(1000, 16, 7);
        let p = IndexParams::new(Metric::L2);
        let hnsw = build(IndexKind::Hnsw, 16, p, &data).unwrap();
        let flat = build(IndexKind::Flat, 16, p, &data).unwrap();
        let queries: Vec<Vec<f32>> = random_vectors(100, 16, 99)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        let r = recall(&*hnsw, &*flat, &queries, 10, 200);
        assert!(r >= 0.99, "recall {r}");
    }

    #[test]
    fn deterministic_build() {
        let data = random_vectors(300, 8, 3);
        let p = IndexParams::new(Metric::L2);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut x = HnswIndex::new(8, p);
        x.insert_batch(&data, 1);
        x.save_to(&mut a, 0).unwrap();
        let mut y = HnswIndex::new(8, p);
        y.insert_batch(&data, 1);
        y.save_to(&mut b, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn persistence_round_trip() {
        let data = random_vectors(200, 8, 5);
        let mut x = HnswIndex::new(8, IndexParams::new(Metric::Cosine));
        x.insert_batch(&data, 1);
        x.update_items(&[DeltaRecord::delete(3, 1)], 1).unwrap();
        let mut buf = Vec::new();
        x.save_to(&mut buf, 42).unwrap();
        let (y, tid) = HnswIndex::load(&mut buf.as_slice()).unwrap();
        assert_eq!(tid, 42);
        let mut buf2 = Vec::new();
        y.save_to(&mut buf2, 42).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(y.get_embedding(3), None);
        let q = &data[10].1;
        let p = SearchParams::new(5, 50);
        assert_eq!(
            x.top_k_search(q, p, FilterFn::all(200)).unwrap(),
            y.top_k_search(q, p, FilterFn::all(200)).unwrap()
        );
    }

    #[test]
    fn filter_and_tombstones_respected() {
        let data = random_vectors(500, 8, 11);
        let mut idx = HnswIndex::new(8, IndexParams::new(Metric::L2));
        idx.insert_batch(&data, 1);
        idx.update_items(&[DeltaRecord::delete(0, 1), DeltaRecord::delete(1, 1)], 1)
            .unwrap();
        let bm = Bitmap::from_indices(500, (0..500).filter(|i| i % 7 == 0));
        for (_, q) in data.iter().take(20) {
            let r = idx
                .top_k_search(q, SearchParams::new(10, 64), FilterFn::bitmap(&bm))
                .unwrap();
            assert_eq!(r.len(), 10);
            for n in &r {
                assert!(bm.contains(n.ordinal as usize));
                assert_ne!(n.ordinal, 0);
            }
        }
    }

    #[test]
    fn self_query_after_update() {
        let data = random_vectors(100, 4, 2);
        let mut idx = HnswIndex::new(4, IndexParams::new(Metric::L2));
        idx.insert_batch(&data, 1);
        let v2 = vec![9.0, 9.0, 9.0, 9.0];
        idx.update_items(&[DeltaRecord::upsert(5, 1, v2.clone())], 1)
            .unwrap();
        assert_eq!(idx.get_embedding(5), Some(&v2[..]));
        let r = idx
            .top_k_search(&v2, SearchParams::new(1, 32), FilterFn::all(100))
            .unwrap();
        assert_eq!(r[0].ordinal, 5);
    }

    #[test]
    fn parallel_update_matches_serial_state() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut deltas = Vec::new();
        for tid in 1..=10_000u64 {
            let id = rng.random_range(0..800u64);
            if rng.random_bool(0.2) {
                deltas.push(DeltaRecord::delete(id, tid));
            } else {
                deltas.push(DeltaRecord::upsert(
                    id,
                    tid,
                    (0..4).map(|_| rng.random::<f32>()).collect(),
                ));
            }
        }
        let p = IndexParams::new(Metric::L2);
        let mut serial = FlatIndex::new(4, Metric::L2);
        for r in &deltas {
            match r.outcome() {
                Some(v) => serial.set(r.id as u32, v),
                None => serial.remove(r.id as u32),
            }
        }
        let mut par = HnswIndex::new(4, p);
        par.update_items(&deltas, 4).unwrap();
        assert_eq!(par.ordinals(), serial.ordinals());
        for o in serial.ordinals() {
            assert_eq!(par.get_embedding(o), serial.get_embedding(o));
        }
    }
}
