//! Random small graphs checked operation by operation against the model.
#![allow(dead_code)]

use std::collections::BTreeSet;

use graphvec::predicate::{CmpOp, Predicate};
use graphvec::query::{
    filtered_topk, pattern_filtered_topk, pattern_match, range_query, similarity_join,
    vector_search, SearchOptions, VertexSet,
};
use graphvec::schema::{
    AttrRef, EmbeddingMeta, EmbeddingSource, IndexKind, Metric, ScalarType, Value, VertexTypeDef,
};
use graphvec::storage::{Direction, Graph, GraphConfig, ReadView, WriteOp};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hits, key_of, same_hits, Key, RefGraph, RefNode, RefPattern};

const TAGS: &[&str] = &["x", "y", "z"];

pub struct Instance {
    pub graph: Graph,
    pub model: RefGraph,
    pub metric: Metric,
    pub dim: usize,
    rng: ChaCha8Rng,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Checked {
    pub vertices: usize,
    pub queries: usize,
}

fn vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

fn a_attrs(rng: &mut ChaCha8Rng) -> Vec<(String, Value)> {
    let mut v = vec![
        ("grp".to_string(), Value::Int(rng.random_range(0..10))),
        (
            "tag".to_string(),
            Value::Str(TAGS.choose(rng).unwrap().to_string()),
        ),
    ];
    if rng.random_bool(0.8) {
        v.push((
            "score".to_string(),
            Value::Float(rng.random_range(0.0..1.0)),
        ));
    }
    v
}

pub fn random_predicate(rng: &mut ChaCha8Rng, vtype: &str, depth: usize) -> Predicate {
    if depth > 0 && rng.random_bool(0.4) {
        let a = random_predicate(rng, vtype, depth - 1);
        let b = random_predicate(rng, vtype, depth - 1);
        return match rng.random_range(0..3) {
            0 => a.and(b),
            1 => a.or(b),
            _ => a.negate(),
        };
    }
    let ops = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
    let op = *ops.choose(rng).unwrap();
    match (vtype, rng.random_range(0..3)) {
        ("A", 1) => Predicate::cmp("score", op, Value::Float(rng.random_range(0.0..1.0))),
        ("A", 2) => Predicate::cmp(
            "tag",
            if rng.random_bool(0.5) {
                CmpOp::Eq
            } else {
                CmpOp::Ne
            },
            Value::Str(TAGS.choose(rng).unwrap().to_string()),
        ),
        _ => Predicate::cmp("grp", op, Value::Int(rng.random_range(0..10))),
    }
}

impl Instance {
    /// Builds a graph of at most 1000 vertices and at most 16 dimensions
    /// with FLAT indexes, then applies a few rounds of random mutations.
    pub fn generate(seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(1..=16);
        let metric = *[Metric::L2, Metric::Cosine, Metric::InnerProduct]
            .choose(&mut rng)
            .unwrap();
        let cap = *[8usize, 32, 128, 1024].choose(&mut rng).unwrap();
        let n_a = rng.random_range(10..=600usize);
        let n_b = rng.random_range(5..=400usize);

        let graph = Graph::open(GraphConfig::in_memory().with_segment_capacity(cap)).unwrap();
        let mut model = RefGraph::default();
        graph
            .define_vertex_type(
                VertexTypeDef::new("A")
                    .key("id")
                    .attr("grp", ScalarType::Int)
                    .attr("score", ScalarType::Float)
                    .attr("tag", ScalarType::String),
            )
            .unwrap();
        graph
            .define_vertex_type(
                VertexTypeDef::new("B")
                    .key("id")
                    .attr("grp", ScalarType::Int),
            )
            .unwrap();
        model.vertex_type("A", "id");
        model.vertex_type("B", "id");
        for (e, from, to, directed) in [
            ("ab", "A", "B", true),
            ("ba", "B", "A", true),
            ("aa", "A", "A", true),
            ("friend", "A", "A", false),
        ] {
            graph.define_edge_type(e, &[(from, to)], directed).unwrap();
            model.edge_type(e, directed);
        }
        graph
            .create_embedding_space("sp", EmbeddingMeta::new(dim, "m", IndexKind::Flat, metric))
            .unwrap();
        for t in ["A", "B"] {
            graph
                .add_embedding_attribute(t, "emb", EmbeddingSource::Space("sp".into()))
                .unwrap();
            model.embedding(t, "emb", metric, dim);
        }

        let mut inst = Instance {
            graph,
            model,
            metric,
            dim,
            rng,
        };
        let mut ops = Vec::new();
        let mut vectors: Vec<Vec<f32>> = Vec::new();
        for (t, n) in [("A", n_a), ("B", n_b)] {
            for key in 0..n as i64 {
                let attrs = if t == "A" {
                    a_attrs(&mut inst.rng)
                } else {
                    vec![("grp".into(), Value::Int(inst.rng.random_range(0..10)))]
                };
                ops.push(WriteOp::UpsertVertex {
                    vtype: t.into(),
                    key,
                    attrs,
                });
                if inst.rng.random_bool(0.9) {
                    // Exact duplicates exercise tie-breaking.
                    let v = if !vectors.is_empty() && inst.rng.random_bool(0.05) {
                        vectors.choose(&mut inst.rng).unwrap().clone()
                    } else {
                        vector(&mut inst.rng, dim)
                    };
                    vectors.push(v.clone());
                    ops.push(WriteOp::SetEmbedding {
                        vtype: t.into(),
                        key,
                        attr: "emb".into(),
                        value: v,
                    });
                }
            }
        }
        for a in 0..n_a as i64 {
            for _ in 0..inst.rng.random_range(0..=3) {
                ops.push(edge(
                    "ab",
                    "A",
                    a,
                    "B",
                    inst.rng.random_range(0..n_b as i64),
                ));
            }
            for _ in 0..inst.rng.random_range(0..=2) {
                ops.push(edge(
                    "aa",
                    "A",
                    a,
                    "A",
                    inst.rng.random_range(0..n_a as i64),
                ));
            }
            if inst.rng.random_bool(0.5) {
                ops.push(edge(
                    "friend",
                    "A",
                    a,
                    "A",
                    inst.rng.random_range(0..n_a as i64),
                ));
            }
        }
        for b in 0..n_b as i64 {
            for _ in 0..inst.rng.random_range(0..=2) {
                ops.push(edge(
                    "ba",
                    "B",
                    b,
                    "A",
                    inst.rng.random_range(0..n_a as i64),
                ));
            }
        }
        for chunk in ops.chunks(256) {
            inst.commit(chunk.to_vec());
        }
        for _ in 0..3 {
            inst.mutate(n_a as i64, n_b as i64);
        }
        inst
    }

    /// Commits to both sides; the engine must accept exactly what the model accepts.
    pub fn commit(&mut self, ops: Vec<WriteOp>) {
        let ok = self.model.apply(&ops);
        let res = self.graph.write(ops.clone());
        assert_eq!(
            ok,
            res.is_ok(),
            "model and engine disagree on {ops:?}: {res:?}"
        );
    }

    fn mutate(&mut self, n_a: i64, n_b: i64) {
        let rounds = self.rng.random_range(5..40);
        for _ in 0..rounds {
            let t = if self.rng.random_bool(0.6) { "A" } else { "B" };
            let n = if t == "A" { n_a } else { n_b };
            let key = self.rng.random_range(0..n);
            let mut tx = Vec::new();
            for _ in 0..self.rng.random_range(1..4) {
                let op = match self.rng.random_range(0..6) {
                    0 => WriteOp::DeleteVertex {
                        vtype: t.into(),
                        key,
                    },
                    1 => WriteOp::DeleteEmbedding {
                        vtype: t.into(),
                        key,
                        attr: "emb".into(),
                    },
                    2 | 3 => WriteOp::SetEmbedding {
                        vtype: t.into(),
                        key,
                        attr: "emb".into(),
                        value: vector(&mut self.rng, self.dim),
                    },
                    4 => WriteOp::UpsertVertex {
                        vtype: t.into(),
                        key,
                        attrs: if t == "A" {
                            a_attrs(&mut self.rng)
                        } else {
                            vec![("grp".into(), Value::Int(self.rng.random_range(0..10)))]
                        },
                    },
                    _ => {
                        if t == "A" {
                            edge("ab", "A", key, "B", self.rng.random_range(0..n_b))
                        } else {
                            edge("ba", "B", key, "A", self.rng.random_range(0..n_a))
                        }
                    }
                };
                tx.push(op);
            }
            self.commit(tx);
        }
    }

    fn vset(&self, view: &ReadView, keys: &BTreeSet<Key>) -> VertexSet {
        VertexSet::from_vertices(
            self.graph.segment_capacity(),
            keys.iter()
                .map(|(t, k)| view.lookup(t, *k).expect("live key")),
        )
    }

    fn random_pattern(&mut self) -> RefPattern {
        let mut t = if self.rng.random_bool(0.6) { "A" } else { "B" };
        let mut nodes = vec![self.random_node(t, true)];
        let mut edges = Vec::new();
        for _ in 0..self.rng.random_range(1..=3) {
            let choices: &[(&str, Direction, &str)] = if t == "A" {
                &[
                    ("ab", Direction::Out, "B"),
                    ("ba", Direction::In, "B"),
                    ("aa", Direction::Out, "A"),
                    ("aa", Direction::In, "A"),
                    ("friend", Direction::Out, "A"),
                ]
            } else {
                &[("ba", Direction::Out, "A"), ("ab", Direction::In, "A")]
            };
            let &(e, d, next) = choices.choose(&mut self.rng).unwrap();
            edges.push((e.to_string(), d));
            nodes.push(self.random_node(next, false));
            t = next;
        }
        RefPattern { nodes, edges }
    }

    fn random_node(&mut self, t: &str, first: bool) -> RefNode {
        let typed = first || self.rng.random_bool(0.7);
        let pred = if typed && self.rng.random_bool(0.4) {
            random_predicate(&mut self.rng, t, 1)
        } else {
            Predicate::True
        };
        RefNode {
            vtype: typed.then(|| t.to_string()),
            pred,
        }
    }

    fn query(&mut self) -> Vec<f32> {
        vector(&mut self.rng, self.dim)
    }

    /// Runs every query operation a few times and compares with the model.
    pub fn check(&mut self) -> Result<Checked, String> {
        let view = self.graph.read();
        let mut c = Checked::default();

        for (t, n) in [("A", 600i64), ("B", 400)] {
            for key in 0..n {
                let got = view
                    .get_embedding_by_key(t, key, "emb")
                    .map_err(|e| e.to_string())?;
                let want = self.model.emb(&(t.to_string(), key), "emb").cloned();
                let same = match (&got, &want) {
                    (Some(g), Some(w)) => g.iter().zip(w).all(|(x, y)| x.to_bits() == y.to_bits()),
                    (None, None) => true,
                    _ => false,
                };
                if !same {
                    return Err(format!(
                        "get_embedding {t}({key}): {got:?} vs oracle {want:?}"
                    ));
                }
                c.vertices += 1;
            }
        }

        for _ in 0..3 {
            let t = if self.rng.random_bool(0.5) { "A" } else { "B" };
            let pred = random_predicate(&mut self.rng, t, 2);
            let got: BTreeSet<Key> = view
                .segment_scan(t, &pred)
                .map_err(|e| e.to_string())?
                .into_iter()
                .flat_map(|(seg, b)| b.iter().map(move |l| (seg, l as u32)).collect::<Vec<_>>())
                .map(|(seg, l)| key_of(&view, self.graph.vertex_of(seg, l)))
                .collect();
            if got != self.model.select(t, &pred) {
                return Err(format!("scan {t} {pred:?} differs"));
            }
            c.queries += 1;
        }

        for round in 0..4 {
            let q = self.query();
            let k = if round == 0 {
                2000
            } else {
                self.rng.random_range(1..=30)
            };
            let attrs: Vec<(&str, &str)> = if round % 2 == 0 {
                vec![("A", "emb")]
            } else {
                vec![("A", "emb"), ("B", "emb")]
            };
            let refs: Vec<AttrRef> = attrs.iter().map(|(t, a)| AttrRef::new(*t, *a)).collect();

            let out = vector_search(&view, &refs, &q, k, &SearchOptions::default())
                .map_err(|e| e.to_string())?;
            same_hits(
                "top-k",
                &hits(&view, &out),
                &self.model.topk(&attrs, &q, k, None),
            )?;

            let pred = random_predicate(&mut self.rng, "A", 2);
            let out =
                filtered_topk(&view, "A", &pred, "emb", &q, k, None).map_err(|e| e.to_string())?;
            let allowed = self.model.select("A", &pred);
            same_hits(
                "filtered top-k",
                &hits(&view, &out),
                &self.model.topk(&[("A", "emb")], &q, k, Some(&allowed)),
            )?;

            let subset: BTreeSet<Key> = self
                .model
                .vertices
                .keys()
                .filter(|_| self.rng.random_bool(0.3))
                .cloned()
                .collect();
            let opts = SearchOptions::default().with_filter(self.vset(&view, &subset));
            let out = vector_search(&view, &refs, &q, k, &opts).map_err(|e| e.to_string())?;
            same_hits(
                "set-filtered top-k",
                &hits(&view, &out),
                &self.model.topk(&attrs, &q, k, Some(&subset)),
            )?;

            if self.metric != Metric::InnerProduct {
                let all = self.model.scored(&attrs, &q, None);
                let threshold = if all.is_empty() {
                    1.0
                } else {
                    all[self.rng.random_range(0..all.len())].1
                };
                let out =
                    range_query(&view, &refs, &q, threshold, None).map_err(|e| e.to_string())?;
                same_hits(
                    "range",
                    &hits(&view, &out),
                    &self.model.range(&attrs, &q, threshold, None),
                )?;
                let out = range_query(
                    &view,
                    &refs,
                    &q,
                    threshold,
                    Some(&self.vset(&view, &subset)),
                )
                .map_err(|e| e.to_string())?;
                same_hits(
                    "filtered range",
                    &hits(&view, &out),
                    &self.model.range(&attrs, &q, threshold, Some(&subset)),
                )?;
            }
            c.queries += 5;
        }

        for _ in 0..4 {
            let p = self.random_pattern();
            let ep = p.to_engine();
            let m = pattern_match(&view, &ep).map_err(|e| e.to_string())?;
            let want = self.model.pattern_sets(&p);
            for (i, set) in m.sets.iter().enumerate() {
                let got: BTreeSet<Key> = set.iter().map(|v| key_of(&view, v)).collect();
                if got != want[i] {
                    return Err(format!(
                        "pattern {p:?} position {i}: {} vs oracle {}",
                        got.len(),
                        want[i].len()
                    ));
                }
            }

            let last = p.nodes.len() - 1;
            let q = self.query();
            let k = self.rng.random_range(1..=20);
            let out =
                pattern_filtered_topk(&view, &ep, &RefPattern::alias(last), "emb", &q, k, None)
                    .map_err(|e| e.to_string())?;
            let attrs: Vec<(&str, &str)> = match &p.nodes[last].vtype {
                Some(t) if t == "A" => vec![("A", "emb")],
                Some(_) => vec![("B", "emb")],
                None => vec![("A", "emb"), ("B", "emb")],
            };
            same_hits(
                "pattern top-k",
                &hits(&view, &out),
                &self.model.topk(&attrs, &q, k, Some(&want[last])),
            )?;

            let k = self.rng.random_range(1..=50);
            let got: Vec<(Key, Key, f32)> = similarity_join(
                &view,
                &ep,
                &RefPattern::alias(0),
                "emb",
                &RefPattern::alias(last),
                "emb",
                k,
            )
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|h| (key_of(&view, h.source), key_of(&view, h.target), h.distance))
            .collect();
            let want = self.model.join(&p, 0, "emb", last, "emb", k);
            let same = got.len() == want.len()
                && got
                    .iter()
                    .zip(&want)
                    .all(|(g, w)| g.0 == w.0 && g.1 == w.1 && g.2.to_bits() == w.2.to_bits());
            if !same {
                return Err(format!(
                    "similarity join on {p:?}: {got:?} vs oracle {want:?}"
                ));
            }
            c.queries += 3;
        }
        Ok(c)
    }
}

fn edge(etype: &str, ft: &str, from: i64, tt: &str, to: i64) -> WriteOp {
    WriteOp::AddEdge {
        etype: etype.into(),
        from,
        to,
        types: Some((ft.into(), tt.into())),
    }
}

/// Generates and checks one instance.
pub fn check_seed(seed: u64) -> Result<Checked, String> {
    Instance::generate(seed)
        .check()
        .map_err(|e| format!("seed {seed}: {e}"))
}
