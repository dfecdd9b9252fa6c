//! Recall, throughput and latency measurement, plus the incremental update
//! versus rebuild sweep and a multi-hop hybrid query benchmark.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{Coordinator, DistOptions, LocalWorkers};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::index::{self, IndexParams};
use crate::loader::load_vectors;
use crate::predicate::{CmpOp, Predicate};
use crate::query::{
    pattern_filtered_topk, vector_search, NodePattern, PathPattern, SearchOptions, SearchStats,
};
use crate::schema::{
    AttrRef, EmbeddingMeta, EmbeddingSource, IndexKind, Metric, Value, VertexTypeDef,
};
use crate::storage::{DeltaRecord, Graph, GraphConfig};
use crate::vacuum::{self, VacuumPolicy};

pub const BENCH_TYPE: &str = "Vec";
pub const BENCH_ATTR: &str = "emb";

/// Exact top-k of every query, by linear scan. Ids are positions in `base`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub k: usize,
    pub ids: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f32>>,
}

/// Ties break on the smaller position.
pub fn ground_truth(
    base: &[Vec<f32>],
    queries: &[Vec<f32>],
    k: usize,
    metric: Metric,
) -> GroundTruth {
    let prepared: Vec<Vec<f32>> = base.iter().map(|v| metric.prepared(v)).collect();
    let rows: Vec<(Vec<usize>, Vec<f32>)> = queries
        .par_iter()
        .map(|q| {
            let q = metric.prepared(q);
            let mut all: Vec<(f32, usize)> = prepared
                .iter()
                .enumerate()
                .map(|(i, v)| (metric.distance(&q, v), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            (
                all.iter().map(|x| x.1).collect(),
                all.iter().map(|x| x.0).collect(),
            )
        })
        .collect();
    let (ids, distances) = rows.into_iter().unzip();
    GroundTruth { k, ids, distances }
}

/// `|returned ∩ truth| / k`, using the first `k` entries of each. When the
/// truth holds fewer than `k` ids the denominator is its length.
pub fn recall_at_k(returned: &[usize], truth: &[usize], k: usize) -> f64 {
    let t = &truth[..truth.len().min(k)];
    if t.is_empty() {
        return 1.0;
    }
    let r = &returned[..returned.len().min(k)];
    let hit = r.iter().filter(|x| t.contains(x)).count();
    hit as f64 / t.len() as f64
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub k: usize,
    pub efs: Vec<usize>,
    /// Closed-loop sender threads.
    pub threads: usize,
    pub index: IndexKind,
    pub metric: Metric,
    pub m: usize,
    pub ef_construction: usize,
    pub segment_capacity: usize,
    /// Virtual partitions; more than one routes queries through a
    /// coordinator.
    pub partitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 10,
            efs: vec![16, 32, 64, 128, 256, 512],
            threads: 16,
            index: IndexKind::Hnsw,
            metric: Metric::L2,
            m: 16,
            ef_construction: 128,
            segment_capacity: 1 << 20,
            partitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub ef: usize,
    pub recall: f64,
    pub qps: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Mean time spent inside segment searches per query.
    pub vector_search_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub vectors: usize,
    pub queries: usize,
    pub dimension: usize,
    pub k: usize,
    pub index: IndexKind,
    pub threads: usize,
    pub partitions: usize,
    pub load_seconds: f64,
    pub build_seconds: f64,
    pub points: Vec<BenchPoint>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ef,recall,qps,mean_ms,p50_ms,p99_ms,vector_search_ms\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.4},{:.1},{:.3},{:.3},{:.3},{:.3}\n",
                p.ef, p.recall, p.qps, p.mean_ms, p.p50_ms, p.p99_ms, p.vector_search_ms
            ));
        }
        out
    }
}

/// Creates the single-type bench schema on `graph`.
pub fn bench_schema(graph: &Graph, dim: usize, index: IndexKind, metric: Metric) -> Result<()> {
    graph.define_vertex_type(VertexTypeDef::new(BENCH_TYPE).key("id"))?;
    graph.add_embedding_attribute(
        BENCH_TYPE,
        BENCH_ATTR,
        EmbeddingSource::Meta(EmbeddingMeta::new(dim, "bench", index, metric)),
    )
}

/// Graph holding `base` under keys `0..n`, with every index built.
/// Returns the graph plus load and build seconds.
pub fn load_bench_graph(base: &[Vec<f32>], cfg: &BenchConfig) -> Result<(Graph, f64, f64)> {
    let dim = base.first().map_or(1, Vec::len);
    let mut gc = GraphConfig::in_memory()
        .with_segment_capacity(cfg.segment_capacity)
        .with_partitions(1);
    gc.hnsw_m = cfg.m;
    gc.hnsw_ef_construction = cfg.ef_construction;
    let graph = Graph::open(gc)?;
    bench_schema(&graph, dim, cfg.index, cfg.metric)?;
    let t = Instant::now();
    load_vectors(&graph, BENCH_TYPE, BENCH_ATTR, base, 0)?;
    let load = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let policy = VacuumPolicy {
        max_merge_threads: std::thread::available_parallelism().map_or(4, |n| n.get()),
        rebuild_tombstone_fraction: 1.0,
        ..VacuumPolicy::default()
    };
    vacuum::run_once(&graph, &policy, true)?;
    Ok((graph, load, t.elapsed().as_secs_f64()))
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// One pass over `queries` at a given `ef` with closed-loop senders.
/// Returns the point and the per-query result positions.
pub fn measure(
    graph: &Graph,
    coordinator: Option<&Coordinator>,
    queries: &[Vec<f32>],
    truth: &GroundTruth,
    k: usize,
    ef: usize,
    threads: usize,
) -> Result<(BenchPoint, Vec<Vec<usize>>)> {
    let attrs = [AttrRef::new(BENCH_TYPE, BENCH_ATTR)];
    let next = AtomicUsize::new(0);
    type Slot = parking_lot::Mutex<Option<(Vec<usize>, f64, SearchStats)>>;
    let slots: Vec<Slot> = (0..queries.len())
        .map(|_| parking_lot::Mutex::new(None))
        .collect();
    let err: parking_lot::Mutex<Option<Error>> = parking_lot::Mutex::new(None);
    let started = Instant::now();
    std::thread::scope(|s| {
        for _ in 0..threads.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= queries.len() {
                    break;
                }
                let t = Instant::now();
                let view = graph.read();
                let out = match coordinator {
                    Some(c) => c.search(
                        &view,
                        &attrs,
                        &queries[i],
                        k,
                        &DistOptions {
                            ef: Some(ef),
                            ..Default::default()
                        },
                    ),
                    None => vector_search(
                        &view,
                        &attrs,
                        &queries[i],
                        k,
                        &SearchOptions::default().with_ef(ef),
                    ),
                };
                match out {
                    Ok(out) => {
                        let ms = t.elapsed().as_secs_f64() * 1e3;
                        let ids = out
                            .hits
                            .iter()
                            .map(|h| view.key_of(h.vertex).unwrap_or(-1) as usize)
                            .collect();
                        *slots[i].lock() = Some((ids, ms, out.stats));
                    }
                    Err(e) => {
                        *err.lock() = Some(e);
                        break;
                    }
                }
            });
        }
    });
    let wall = started.elapsed().as_secs_f64();
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let mut lat = Vec::with_capacity(queries.len());
    let mut results = Vec::with_capacity(queries.len());
    let (mut recall, mut vs) = (0.0, 0.0);
    for (i, slot) in slots.into_iter().enumerate() {
        let (ids, ms, stats) = slot.into_inner().expect("every query ran");
        recall += recall_at_k(&ids, &truth.ids[i], k);
        vs += stats.vector_search_ms;
        lat.push(ms);
        results.push(ids);
    }
    let n = queries.len().max(1) as f64;
    let mean = lat.iter().sum::<f64>() / n;
    lat.sort_by(f64::total_cmp);
    Ok((
        BenchPoint {
            ef,
            recall: recall / n,
            qps: queries.len() as f64 / wall.max(1e-9),
            mean_ms: mean,
            p50_ms: percentile(&lat, 50.0),
            p99_ms: percentile(&lat, 99.0),
            vector_search_ms: vs / n,
        },
        results,
    ))
}

/// Loads `base`, builds indexes, computes exact ground truth and sweeps
/// `cfg.efs`.
pub fn run_bench(
    base: &[Vec<f32>],
    queries: &[Vec<f32>],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let dim = base.first().map_or(0, Vec::len);
    let (graph, load, build) = load_bench_graph(base, cfg)?;
    let truth = ground_truth(base, queries, cfg.k, cfg.metric);
    let workers;
    let coordinator = if cfg.partitions > 1 {
        workers = LocalWorkers::spawn(&graph, cfg.partitions, 2);
        Some(Coordinator::new(workers.endpoints()))
    } else {
        None
    };
    let mut points = Vec::new();
    for &ef in &cfg.efs {
        points.push(
            measure(
                &graph,
                coordinator.as_ref(),
                queries,
                &truth,
                cfg.k,
                ef,
                cfg.threads,
            )?
            .0,
        );
    }
    Ok(BenchReport {
        vectors: base.len(),
        queries: queries.len(),
        dimension: dim,
        k: cfg.k,
        index: cfg.index,
        threads: cfg.threads,
        partitions: cfg.partitions,
        load_seconds: load,
        build_seconds: build,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdatePoint {
    pub fraction: f64,
    pub updated: usize,
    /// Applying the updates to a copy of the built index.
    pub incremental_seconds: f64,
    /// Building a new index over the updated vectors.
    pub rebuild_seconds: f64,
}

pub fn update_csv(points: &[UpdatePoint]) -> String {
    let mut out = String::from("fraction,updated,incremental_seconds,rebuild_seconds\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            p.fraction, p.updated, p.incremental_seconds, p.rebuild_seconds
        ));
    }
    out
}

/// For each fraction, replaces that share of `base` with fresh vectors and
/// times the incremental index update against a full rebuild. Both run on
/// one thread. Each timing is the median of `repeats` runs.
pub fn update_bench(
    base: &[Vec<f32>],
    fractions: &[f64],
    params: IndexParams,
    repeats: usize,
    seed: u64,
) -> Result<Vec<UpdatePoint>> {
    let dim = base.first().map_or(1, Vec::len);
    let prepared: Vec<(u32, Vec<f32>)> = base
        .iter()
        .enumerate()
        .map(|(i, v)| (i as u32, params.metric.prepared(v)))
        .collect();
    let built = index::build(IndexKind::Hnsw, dim, params, &prepared)?;
    let fresh = fixtures::sift_like(base.len(), dim, 64, seed ^ 0x9e37);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let median = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    let mut out = Vec::new();
    for &f in fractions {
        let n = ((base.len() as f64) * f.clamp(0.0, 1.0)).round() as usize;
        let mut picked = sample(&mut rng, base.len(), n).into_vec();
        picked.sort_unstable();
        let records: Vec<DeltaRecord> = picked
            .iter()
            .map(|&i| DeltaRecord::upsert(i as u64, 1, params.metric.prepared(&fresh[i])))
            .collect();
        let mut after = prepared.clone();
        for &i in &picked {
            after[i].1 = params.metric.prepared(&fresh[i]);
        }
        let (mut inc, mut reb) = (Vec::new(), Vec::new());
        for _ in 0..repeats.max(1) {
            let mut idx = built.clone_box();
            let t = Instant::now();
            idx.update_items(&records, 1)?;
            inc.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let rebuilt = index::build(IndexKind::Hnsw, dim, params, &after)?;
            reb.push(t.elapsed().as_secs_f64());
            drop((idx, rebuilt));
        }
        out.push(UpdatePoint {
            fraction: f,
            updated: n,
            incremental_seconds: median(inc),
            rebuild_seconds: median(reb),
        });
    }
    Ok(out)
}

/// Per-hop statistics of a hybrid pattern + top-k query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridRow {
    pub hops: usize,
    pub queries: usize,
    /// Mean vertices passed to the vector search as eligible.
    pub candidates: f64,
    pub segments_touched: f64,
    pub vector_search_ms: f64,
    pub end_to_end_ms: f64,
}

/// `(p:Person {id = start}) -knows->^(hops-1) (:Person) <-hasCreator- (t:Post)`
/// ordered by distance to `query`.
pub fn hop_pattern(start: i64, hops: usize) -> PathPattern {
    let mut p = PathPattern::start(
        NodePattern::typed("Person")
            .alias("p")
            .filter(Predicate::cmp("id", CmpOp::Eq, Value::Int(start))),
    );
    for _ in 1..hops.max(1) {
        p = p.out("knows", NodePattern::typed("Person"));
    }
    p.inbound("hasCreator", NodePattern::typed("Post").alias("t"))
}

/// Runs hybrid queries of 2, 3 and 4 hops (or `hops`) from `starts`, each
/// paired with one query vector.
pub fn hybrid_bench(
    graph: &Graph,
    starts: &[i64],
    queries: &[Vec<f32>],
    hops: &[usize],
    k: usize,
) -> Result<Vec<HybridRow>> {
    let mut rows = Vec::new();
    for &h in hops {
        let mut row = HybridRow {
            hops: h,
            queries: starts.len(),
            candidates: 0.0,
            segments_touched: 0.0,
            vector_search_ms: 0.0,
            end_to_end_ms: 0.0,
        };
        for (i, &s) in starts.iter().enumerate() {
            let q = &queries[i % queries.len()];
            let t = Instant::now();
            let view = graph.read();
            let out =
                pattern_filtered_topk(&view, &hop_pattern(s, h), "t", "content_emb", q, k, None)?;
            row.end_to_end_ms += t.elapsed().as_secs_f64() * 1e3;
            row.candidates += out.stats.candidates as f64;
            row.segments_touched += out.stats.segments_touched as f64;
            row.vector_search_ms += out.stats.vector_search_ms;
        }
        let n = starts.len().max(1) as f64;
        row.candidates /= n;
        row.segments_touched /= n;
        row.vector_search_ms /= n;
        row.end_to_end_ms /= n;
        rows.push(row);
    }
    Ok(rows)
}

/// Shared handle so benches can hold a graph and its workers together.
pub struct Cluster {
    pub graph: Graph,
    pub coordinator: Arc<Coordinator>,
    _workers: LocalWorkers,
}

impl Cluster {
    pub fn local(graph: Graph, partitions: usize) -> Self {
        let workers = LocalWorkers::spawn(&graph, partitions, 2);
        let coordinator = Arc::new(Coordinator::new(workers.endpoints()));
        Self {
            graph,
            coordinator,
            _workers: workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_by_hand() {
        // Five points on a line; query at 0.1 → truth order 0, 1, 2.
        let base: Vec<Vec<f32>> = [0.0f32, 1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&x| vec![x])
            .collect();
        let t = ground_truth(&base, &[vec![0.1]], 3, Metric::L2);
        assert_eq!(t.ids, vec![vec![0, 1, 2]]);
        assert_eq!(recall_at_k(&[0, 1, 2], &t.ids[0], 3), 1.0);
        assert_eq!(recall_at_k(&[2, 4, 0], &t.ids[0], 3), 2.0 / 3.0);
        assert_eq!(recall_at_k(&[3, 4], &t.ids[0], 3), 0.0);
        assert_eq!(recall_at_k(&[0], &[0], 10), 1.0);
    }

    #[test]
    fn flat_bench_has_recall_one() {
        let (base, queries) = fixtures::sift_like_split(500, 20, 16, 3);
        let cfg = BenchConfig {
            index: IndexKind::Flat,
            efs: vec![10],
            threads: 4,
            segment_capacity: 128,
            ..Default::default()
        };
        let r = run_bench(&base, &queries, &cfg).unwrap();
        assert_eq!(r.points[0].recall, 1.0);
        assert!(r.points[0].qps > 0.0);
        assert!(r.points[0].p50_ms <= r.points[0].p99_ms);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn update_csv_rows_match_sweep() {
        let base = fixtures::sift_like(200, 8, 4, 1);
        let pts =
            update_bench(&base, &[0.0, 0.5, 1.0], IndexParams::new(Metric::L2), 1, 2).unwrap();
        assert_eq!(pts[0].updated, 0);
        assert_eq!(pts[2].updated, 200);
        assert_eq!(update_csv(&pts).lines().count(), 4);
    }

    #[test]
    fn percentile_nearest_rank() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&xs, 50.0), 2.0);
        assert_eq!(percentile(&xs, 99.0), 4.0);
    }
}
