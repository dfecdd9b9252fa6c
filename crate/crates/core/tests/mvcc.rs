mod support;

use graphvec::schema::{EmbeddingMeta, EmbeddingSource, IndexKind, Metric, VertexTypeDef};
use graphvec::storage::{Graph, GraphConfig};
use graphvec::Error;
use proptest::prelude::*;

use support::mvcc::{atomicity, interleaving};

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn pinned_views_match_replay(seed in any::<u64>()) {
        interleaving(seed).map_err(|e| TestCaseError::fail(format!("seed {seed}: {e}")))?;
    }
}

#[test]
fn scalar_and_vector_commit_together() {
    let r = atomicity(500, 3).unwrap();
    assert_eq!(r.trials, 500);
}

#[test]
fn first_committer_wins() {
    let g = Graph::open(GraphConfig::in_memory()).unwrap();
    g.define_vertex_type(VertexTypeDef::new("V").key("id"))
        .unwrap();
    g.add_embedding_attribute(
        "V",
        "emb",
        EmbeddingSource::Meta(EmbeddingMeta::new(2, "m", IndexKind::Flat, Metric::L2)),
    )
    .unwrap();
    g.begin().upsert_vertex("V", 1, []).commit().unwrap();
    let mut a = g.begin();
    let mut b = g.begin();
    a.set_embedding("V", 1, "emb", vec![1.0, 0.0]);
    b.set_embedding("V", 1, "emb", vec![0.0, 1.0]);
    a.commit().unwrap();
    assert!(matches!(b.commit(), Err(Error::Conflict(_))));
    assert_eq!(
        g.read().get_embedding_by_key("V", 1, "emb").unwrap(),
        Some(vec![1.0, 0.0])
    );
}

#[test]
fn reading_past_the_visible_tid_fails() {
    let g = Graph::open(GraphConfig::in_memory()).unwrap();
    g.define_vertex_type(VertexTypeDef::new("V").key("id"))
        .unwrap();
    let tid = g.begin().upsert_vertex("V", 1, []).commit().unwrap();
    assert!(g.read_at(tid).is_ok());
    assert!(g.read_at(tid + 1).is_err());
}
