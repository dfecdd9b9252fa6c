//! Seeded synthetic data: a small social network with message embeddings,
//! and clustered SIFT-like vectors for benchmarks.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::gvql::Engine;
use crate::loader::{commit_batched, DEFAULT_BATCH};
use crate::schema::{IndexKind, Metric, Value};
use crate::storage::{Graph, GraphConfig, WriteOp};

pub const FIRST_NAMES: &[&str] = &[
    "Bob", "Carol", "Dan", "Erin", "Frank", "Grace", "Heidi", "Ivan", "Judy", "Mallory", "Niaj",
    "Olivia", "Peggy", "Rupert", "Sybil", "Trent", "Victor", "Walter",
];
pub const LANGUAGES: &[&str] = &["English", "French", "German", "Spanish"];
pub const COUNTRIES: &[&str] = &[
    "United States",
    "Germany",
    "India",
    "Brazil",
    "Japan",
    "Kenya",
];

#[derive(Debug, Clone)]
pub struct SocialConfig {
    pub persons: usize,
    /// Mean posts per person; actual counts are uniform in `0..=2*mean`.
    pub posts_per_person: usize,
    pub comments_per_person: usize,
    pub knows_per_person: usize,
    pub countries: usize,
    pub dim: usize,
    pub index: IndexKind,
    pub metric: Metric,
    pub segment_capacity: usize,
    pub partitions: usize,
    pub seed: u64,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            persons: 60,
            posts_per_person: 3,
            comments_per_person: 3,
            knows_per_person: 3,
            countries: 4,
            dim: 8,
            index: IndexKind::Flat,
            metric: Metric::L2,
            segment_capacity: 32,
            partitions: 1,
            seed: 7,
        }
    }
}

/// Schema of the social fixture. Posts and comments share one embedding
/// space so they can be searched together.
pub fn social_ddl(dim: usize, index: IndexKind, metric: Metric) -> String {
    let index = match index {
        IndexKind::Hnsw => "HNSW",
        IndexKind::Flat => "FLAT",
    };
    format!(
        "CREATE VERTEX Person (id INT PRIMARY KEY, firstName STRING, cid INT);
CREATE VERTEX Post (id INT PRIMARY KEY, language STRING, length INT);
CREATE VERTEX Comment (id INT PRIMARY KEY, length INT);
CREATE VERTEX Country (id INT PRIMARY KEY, name STRING);
CREATE DIRECTED EDGE knows (FROM Person, TO Person);
CREATE DIRECTED EDGE hasCreator (FROM Post, TO Person | FROM Comment, TO Person);
CREATE DIRECTED EDGE LOCATED_IN (FROM Post, TO Country | FROM Comment, TO Country);
CREATE EMBEDDING SPACE content_space (
  DIMENSION = {dim}, MODEL = fixture, INDEX = {index}, DATATYPE = FLOAT, METRIC = {metric}
);
ALTER VERTEX Post ADD EMBEDDING ATTRIBUTE content_emb IN EMBEDDING SPACE content_space;
ALTER VERTEX Comment ADD EMBEDDING ATTRIBUTE content_emb IN EMBEDDING SPACE content_space;
"
    )
}

/// Vertex counts of a generated social graph. Keys of each type are dense
/// from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocialCounts {
    pub persons: usize,
    pub posts: usize,
    pub comments: usize,
    pub countries: usize,
    pub knows: usize,
}

/// Applies the schema and writes a random social graph. Person 0 is the only
/// person named Alice. Messages cluster around a per-author topic vector.
pub fn build_social(graph: &Graph, cfg: &SocialConfig) -> Result<SocialCounts> {
    let mut engine = Engine::new(graph.clone());
    engine.execute(
        &social_ddl(cfg.dim, cfg.index, cfg.metric),
        &Default::default(),
    )?;
    let (ops, counts) = social_ops(cfg);
    commit_batched(graph, ops, DEFAULT_BATCH)?;
    Ok(counts)
}

/// The write operations of the social fixture, in commit order.
pub fn social_ops(cfg: &SocialConfig) -> (Vec<WriteOp>, SocialCounts) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0f32, 0.35).unwrap();
    let mut ops = Vec::new();
    let mut counts = SocialCounts {
        persons: cfg.persons,
        posts: 0,
        comments: 0,
        countries: cfg.countries.min(COUNTRIES.len()),
        knows: 0,
    };
    for (i, name) in COUNTRIES.iter().take(counts.countries).enumerate() {
        ops.push(WriteOp::UpsertVertex {
            vtype: "Country".into(),
            key: i as i64,
            attrs: vec![("name".into(), Value::Str(name.to_string()))],
        });
    }
    let topics: Vec<Vec<f32>> = (0..cfg.persons)
        .map(|_| gaussian(&mut rng, cfg.dim, 1.0))
        .collect();
    for p in 0..cfg.persons {
        let name = if p == 0 {
            "Alice"
        } else {
            FIRST_NAMES.choose(&mut rng).unwrap()
        };
        ops.push(WriteOp::UpsertVertex {
            vtype: "Person".into(),
            key: p as i64,
            attrs: vec![
                ("firstName".into(), Value::Str(name.into())),
                ("cid".into(), Value::Int(0)),
            ],
        });
    }
    for p in 0..cfg.persons {
        let mut friends: Vec<usize> = (0..cfg.persons).filter(|&q| q != p).collect();
        let (chosen, _) = friends.partial_shuffle(
            &mut rng,
            cfg.knows_per_person.min(cfg.persons.saturating_sub(1)),
        );
        for &q in chosen.iter() {
            ops.push(WriteOp::AddEdge {
                etype: "knows".into(),
                from: p as i64,
                to: q as i64,
                types: Some(("Person".into(), "Person".into())),
            });
            counts.knows += 1;
        }
    }
    for (p, topic) in topics.iter().enumerate() {
        let n_posts = rng.random_range(0..=2 * cfg.posts_per_person);
        for _ in 0..n_posts {
            let key = counts.posts as i64;
            counts.posts += 1;
            let lang = if rng.random_bool(0.5) {
                "English"
            } else {
                LANGUAGES.choose(&mut rng).unwrap()
            };
            ops.push(WriteOp::UpsertVertex {
                vtype: "Post".into(),
                key,
                attrs: vec![
                    ("language".into(), Value::Str(lang.into())),
                    ("length".into(), Value::Int(rng.random_range(50..3000))),
                ],
            });
            ops.push(message_vector("Post", key, topic, &noise, &mut rng));
            ops.extend(message_edges(
                "Post",
                key,
                p,
                rng.random_range(0..counts.countries),
            ));
        }
        let n_comments = rng.random_range(0..=2 * cfg.comments_per_person);
        for _ in 0..n_comments {
            let key = counts.comments as i64;
            counts.comments += 1;
            ops.push(WriteOp::UpsertVertex {
                vtype: "Comment".into(),
                key,
                attrs: vec![("length".into(), Value::Int(rng.random_range(5..400)))],
            });
            ops.push(message_vector("Comment", key, topic, &noise, &mut rng));
            ops.extend(message_edges(
                "Comment",
                key,
                p,
                rng.random_range(0..counts.countries),
            ));
        }
    }
    (ops, counts)
}

/// A fresh in-memory graph holding the social fixture.
pub fn social(cfg: &SocialConfig) -> Result<(Graph, SocialCounts)> {
    let graph = Graph::open(
        GraphConfig::in_memory()
            .with_segment_capacity(cfg.segment_capacity)
            .with_partitions(cfg.partitions),
    )?;
    let counts = build_social(&graph, cfg)?;
    Ok((graph, counts))
}

fn message_vector(
    vtype: &str,
    key: i64,
    topic: &[f32],
    noise: &Normal<f32>,
    rng: &mut ChaCha8Rng,
) -> WriteOp {
    WriteOp::SetEmbedding {
        vtype: vtype.into(),
        key,
        attr: "content_emb".into(),
        value: topic.iter().map(|c| c + noise.sample(rng)).collect(),
    }
}

fn message_edges(vtype: &str, key: i64, person: usize, country: usize) -> [WriteOp; 2] {
    [
        WriteOp::AddEdge {
            etype: "hasCreator".into(),
            from: key,
            to: person as i64,
            types: Some((vtype.into(), "Person".into())),
        },
        WriteOp::AddEdge {
            etype: "LOCATED_IN".into(),
            from: key,
            to: country as i64,
            types: Some((vtype.into(), "Country".into())),
        },
    ]
}

pub fn gaussian(rng: &mut impl Rng, dim: usize, sigma: f32) -> Vec<f32> {
    let n = Normal::new(0.0f32, sigma).unwrap();
    (0..dim).map(|_| n.sample(rng)).collect()
}

/// Clustered non-negative vectors in `[0, 255]`, shaped like SIFT
/// descriptors: a mixture of `clusters` Gaussians.
pub fn sift_like(n: usize, dim: usize, clusters: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f32>> = (0..clusters.max(1))
        .map(|_| (0..dim).map(|_| rng.random_range(0.0f32..128.0)).collect())
        .collect();
    let noise = Normal::new(0.0f32, 24.0).unwrap();
    (0..n)
        .map(|_| {
            let c = centers.choose(&mut rng).unwrap();
            c.iter()
                .map(|x| (x + noise.sample(&mut rng)).clamp(0.0, 255.0))
                .collect()
        })
        .collect()
}

/// Base and query vectors drawn from the same mixture.
pub fn sift_like_split(
    base: usize,
    queries: usize,
    dim: usize,
    seed: u64,
) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let mut all = sift_like(base + queries, dim, 64, seed);
    let q = all.split_off(base);
    (all, q)
}

/// Deterministic label propagation over `knows` that writes a community id
/// into `Person.cid`. Returns the largest id assigned. Registered as a
/// stand-in for a community detection algorithm.
pub fn label_propagation(graph: &Graph) -> Result<i64> {
    let view = graph.read();
    let cat = view.catalog();
    let person = cat.vertex_type("Person")?.id;
    let knows = cat.edge_type("knows")?.id;
    let mut vertices = Vec::new();
    for seg in view.segments(person) {
        for i in view.live_bitmap(seg).iter() {
            vertices.push(graph.vertex_of(seg, i as u32));
        }
    }
    let mut label: BTreeMap<_, _> = vertices
        .iter()
        .map(|&v| (v, view.key_of(v).unwrap_or(0)))
        .collect();
    for _ in 0..20 {
        let mut changed = false;
        for &v in &vertices {
            let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
            for d in [
                crate::storage::Direction::Out,
                crate::storage::Direction::In,
            ] {
                for u in view.neighbors(v, knows, d) {
                    *votes.entry(label[&u]).or_default() += 1;
                }
            }
            // Most votes, ties to the smallest label.
            if let Some((&best, _)) = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
                if best != label[&v] {
                    label.insert(v, best);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut dense: BTreeMap<i64, i64> = BTreeMap::new();
    for l in label.values() {
        let next = dense.len() as i64;
        dense.entry(*l).or_insert(next);
    }
    let ops = vertices
        .iter()
        .map(|&v| WriteOp::UpsertVertex {
            vtype: "Person".into(),
            key: view.key_of(v).unwrap(),
            attrs: vec![("cid".into(), Value::Int(dense[&label[&v]]))],
        })
        .collect();
    drop(view);
    commit_batched(graph, ops, DEFAULT_BATCH)?;
    Ok(dense.len() as i64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn social_is_deterministic() {
        let cfg = SocialConfig::default();
        let (a, ca) = social(&cfg).unwrap();
        let (b, cb) = social(&cfg).unwrap();
        assert_eq!(ca, cb);
        let (va, vb) = (a.read(), b.read());
        for k in 0..ca.posts as i64 {
            assert_eq!(
                va.get_embedding_by_key("Post", k, "content_emb").unwrap(),
                vb.get_embedding_by_key("Post", k, "content_emb").unwrap()
            );
        }
        let alice = va.lookup("Person", 0).unwrap();
        assert_eq!(
            va.attr(alice, "firstName"),
            Some(Value::Str("Alice".into()))
        );
    }

    #[test]
    fn sift_like_shape() {
        let v = sift_like(50, 128, 4, 1);
        assert_eq!(v.len(), 50);
        assert!(v
            .iter()
            .all(|x| x.len() == 128 && x.iter().all(|c| (0.0..=255.0).contains(c))));
    }

    #[test]
    fn label_propagation_writes_cids() {
        let (g, c) = social(&SocialConfig::default()).unwrap();
        let max = label_propagation(&g).unwrap();
        assert!(max >= 0 && (max as usize) < c.persons);
        let view = g.read();
        let mut seen = std::collections::BTreeSet::new();
        for k in 0..c.persons as i64 {
            let v = view.lookup("Person", k).unwrap();
            let Some(Value::Int(cid)) = view.attr(v, "cid") else {
                panic!()
            };
            assert!(cid <= max);
            seen.insert(cid);
        }
        assert_eq!(seen.len() as i64, max + 1);
    }
}
