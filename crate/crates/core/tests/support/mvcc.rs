//! Randomized commit / pin / vacuum interleavings checked against a
//! replay of the committed log.
#![allow(dead_code)]

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use graphvec::query::{vector_search, SearchOptions};
use graphvec::schema::{
    AttrRef, EmbeddingMeta, EmbeddingSource, IndexKind, Metric, ScalarType, Value, VertexTypeDef,
};
use graphvec::storage::{BruteForcePolicy, Graph, GraphConfig, ReadView, Tid, WriteOp};
use graphvec::vacuum::{run_once, VacuumPolicy, VacuumWorker};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hits, same_hits, RefGraph};

const DIM: usize = 4;

fn small_vacuum() -> VacuumPolicy {
    VacuumPolicy {
        delta_max_records: 6,
        delta_max_age: Duration::from_secs(3600),
        index_merge_records: 10,
        rebuild_tombstone_fraction: 0.5,
        max_merge_threads: 2,
        interval: Duration::from_millis(1),
    }
}

fn graph(index: IndexKind, cap: usize) -> (Graph, RefGraph) {
    let cfg = GraphConfig {
        vacuum: small_vacuum(),
        ..GraphConfig::in_memory().with_segment_capacity(cap)
    };
    let g = Graph::open(cfg).unwrap();
    g.define_vertex_type(
        VertexTypeDef::new("V")
            .key("id")
            .attr("ver", ScalarType::Int),
    )
    .unwrap();
    g.add_embedding_attribute(
        "V",
        "emb",
        EmbeddingSource::Meta(EmbeddingMeta::new(DIM, "m", index, Metric::L2)),
    )
    .unwrap();
    let mut m = RefGraph::default();
    m.vertex_type("V", "id");
    m.embedding("V", "emb", Metric::L2, DIM);
    (g, m)
}

fn vector(rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// Everything a pinned view must show: each key's vector and a top-k.
fn check_view(
    view: &ReadView,
    model: &RefGraph,
    keys: i64,
    rng: &mut ChaCha8Rng,
) -> Result<(), String> {
    for key in 0..keys {
        let got = view
            .get_embedding_by_key("V", key, "emb")
            .map_err(|e| e.to_string())?;
        let want = model.emb(&("V".into(), key), "emb");
        if got.as_ref() != want {
            return Err(format!(
                "tid {}: V({key}) is {got:?}, replay has {want:?}",
                view.tid()
            ));
        }
    }
    let q = vector(rng);
    let k = rng.random_range(1..=8);
    let opts = SearchOptions {
        ef: Some(64),
        bruteforce: Some(BruteForcePolicy::never()),
        ..SearchOptions::default()
    };
    let out = vector_search(view, &[AttrRef::new("V", "emb")], &q, k, &opts)
        .map_err(|e| e.to_string())?;
    same_hits(
        &format!("top-{k} at tid {}", view.tid()),
        &hits(view, &out),
        &model.topk(&[("V", "emb")], &q, k, None),
    )
}

/// One interleaving. Returns the number of pinned checks performed.
pub fn interleaving(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = if seed.is_multiple_of(2) {
        IndexKind::Hnsw
    } else {
        IndexKind::Flat
    };
    let keys = rng.random_range(8..40i64);
    let (g, mut model) = graph(index, 16);
    let policy = small_vacuum();

    let mut init = Vec::new();
    for key in 0..keys {
        init.push(WriteOp::UpsertVertex {
            vtype: "V".into(),
            key,
            attrs: vec![],
        });
        init.push(WriteOp::SetEmbedding {
            vtype: "V".into(),
            key,
            attr: "emb".into(),
            value: vector(&mut rng),
        });
    }
    assert!(model.apply(&init));
    g.write(init).map_err(|e| e.to_string())?;

    let mut pinned: Vec<(ReadView, RefGraph)> = Vec::new();
    let mut checks = 0;
    for _ in 0..rng.random_range(20..50) {
        match rng.random_range(0..100) {
            0..40 => {
                let mut tx = Vec::new();
                for _ in 0..rng.random_range(1..4) {
                    let key = rng.random_range(0..keys);
                    tx.push(match rng.random_range(0..10) {
                        0..6 => WriteOp::SetEmbedding {
                            vtype: "V".into(),
                            key,
                            attr: "emb".into(),
                            value: vector(&mut rng),
                        },
                        6 | 7 => WriteOp::DeleteEmbedding {
                            vtype: "V".into(),
                            key,
                            attr: "emb".into(),
                        },
                        8 => WriteOp::DeleteVertex {
                            vtype: "V".into(),
                            key,
                        },
                        _ => WriteOp::UpsertVertex {
                            vtype: "V".into(),
                            key,
                            attrs: vec![],
                        },
                    });
                }
                let ok = model.apply(&tx);
                let res = g.write(tx);
                if ok != res.is_ok() {
                    return Err(format!("commit disagreement: {res:?}"));
                }
            }
            40..55 => pinned.push((g.read(), model.clone())),
            55..80 if !pinned.is_empty() => {
                let i = rng.random_range(0..pinned.len());
                let (view, m) = &pinned[i];
                check_view(view, m, keys, &mut rng)?;
                checks += 1;
            }
            80..92 => {
                run_once(&g, &policy, rng.random_bool(0.3)).map_err(|e| e.to_string())?;
            }
            _ if !pinned.is_empty() => {
                let i = rng.random_range(0..pinned.len());
                pinned.swap_remove(i);
            }
            _ => {}
        }
    }
    run_once(&g, &policy, true).map_err(|e| e.to_string())?;
    pinned.push((g.read(), model.clone()));
    for (view, m) in &pinned {
        check_view(view, m, keys, &mut rng)?;
        checks += 1;
    }
    Ok(checks)
}

/// The invariant tying the scalar to the vector written in the same
/// transaction: `ver == emb[0]` for every live vertex.
fn consistent(view: &ReadView, key: i64) -> Result<Option<i64>, String> {
    let Some(v) = view.lookup("V", key) else {
        return Ok(None);
    };
    let ver = match view.attr(v, "ver") {
        Some(Value::Int(x)) => x,
        other => return Err(format!("V({key}).ver is {other:?}")),
    };
    let emb = view
        .get_embedding(v, "emb")
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("V({key}) has no vector"))?;
    if emb[0] != ver as f32 || emb[1] != key as f32 {
        return Err(format!(
            "tid {}: V({key}).ver = {ver} but vector = {emb:?}",
            view.tid()
        ));
    }
    Ok(Some(ver))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AtomicityReport {
    pub trials: usize,
    pub reader_checks: usize,
}

/// Commits `trials` scalar+vector transactions while a background reader
/// and the vacuum run. Each trial also checks a view pinned before and one
/// pinned after the commit.
pub fn atomicity(trials: usize, seed: u64) -> Result<AtomicityReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = 32i64;
    let (g, _) = graph(IndexKind::Hnsw, 16);
    let tx = |key: i64, ver: i64| {
        vec![
            WriteOp::UpsertVertex {
                vtype: "V".into(),
                key,
                attrs: vec![("ver".into(), Value::Int(ver))],
            },
            WriteOp::SetEmbedding {
                vtype: "V".into(),
                key,
                attr: "emb".into(),
                value: vec![ver as f32, key as f32, 0.0, 0.0],
            },
        ]
    };
    for key in 0..keys {
        g.write(tx(key, 0)).map_err(|e| e.to_string())?;
    }
    let vacuum = VacuumWorker::spawn(g.clone());
    let stop = Arc::new(AtomicBool::new(false));
    let reader_checks = Arc::new(AtomicUsize::new(0));
    let reader = {
        let (g, stop, count) = (g.clone(), stop.clone(), reader_checks.clone());
        std::thread::spawn(move || -> Result<(), String> {
            let mut i = 0i64;
            while !stop.load(Ordering::Relaxed) {
                let view = g.read();
                consistent(&view, i % keys)?;
                // A search result must carry the distance of the vector the
                // same view returns for that vertex.
                let q = [0.0f32, (i % keys) as f32, 0.0, 0.0];
                let out = vector_search(
                    &view,
                    &[AttrRef::new("V", "emb")],
                    &q,
                    3,
                    &SearchOptions::default(),
                )
                .map_err(|e| e.to_string())?;
                for h in &out.hits {
                    let e = view
                        .get_embedding(h.vertex, "emb")
                        .map_err(|e| e.to_string())?
                        .unwrap();
                    let d = super::distance(Metric::L2, &e, &q);
                    if d.to_bits() != h.distance.to_bits() {
                        return Err(format!(
                            "hit {:?} distance {} vs stored vector {d}",
                            h.vertex, h.distance
                        ));
                    }
                }
                count.fetch_add(1, Ordering::Relaxed);
                i += 1;
                std::thread::yield_now();
            }
            Ok(())
        })
    };
    let mut result = Ok(());
    let mut last: Vec<i64> = vec![0; keys as usize];
    for t in 1..=trials {
        let key = rng.random_range(0..keys);
        let before = g.read();
        let committed: Tid = match g.write(tx(key, t as i64)) {
            Ok(tid) => tid,
            Err(e) => {
                result = Err(e.to_string());
                break;
            }
        };
        let after = g.read_at(committed).map_err(|e| e.to_string())?;
        let check = consistent(&before, key).and_then(|b| {
            if b != Some(last[key as usize]) {
                return Err(format!("pinned view before trial {t} sees ver {b:?}"));
            }
            match consistent(&after, key)? {
                Some(a) if a == t as i64 => Ok(()),
                a => Err(format!(
                    "view at commit tid {committed} sees ver {a:?}, expected {t}"
                )),
            }
        });
        if let Err(e) = check {
            result = Err(e);
            break;
        }
        last[key as usize] = t as i64;
    }
    stop.store(true, Ordering::Relaxed);
    let reader_result = reader.join().map_err(|_| "reader panicked".to_string())?;
    vacuum.stop();
    result?;
    reader_result?;
    Ok(AtomicityReport {
        trials,
        reader_checks: reader_checks.load(Ordering::Relaxed),
    })
}
