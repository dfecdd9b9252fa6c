mod support;

use std::time::Duration;

use graphvec::dist::{Coordinator, DistOptions, LocalWorkers};
use graphvec::schema::{AttrRef, IndexKind};
use support::dist::{cases, compare_local, compare_tcp, social};

#[test]
fn flat_partitions_equal_single_node() {
    let g = social(IndexKind::Flat, 120);
    let cs = cases(&g.read(), 30, 1);
    for p in [1, 2, 4] {
        assert_eq!(compare_local(&g, p, &cs), 0, "{p} partitions");
    }
}

#[test]
fn hnsw_partitions_equal_single_node() {
    let g = social(IndexKind::Hnsw, 120);
    let cs = cases(&g.read(), 30, 2);
    for p in [1, 3] {
        assert_eq!(compare_local(&g, p, &cs), 0, "{p} partitions");
    }
}

#[test]
fn tcp_equals_in_process() {
    let g = social(IndexKind::Hnsw, 80);
    let cs = cases(&g.read(), 12, 3);
    assert_eq!(compare_tcp(&g, 2, &cs), 0);
}

#[test]
fn seed_moves_segments_but_not_answers() {
    let g = social(IndexKind::Flat, 80);
    let workers = LocalWorkers::spawn(&g, 3, 1);
    let a = Coordinator::new(workers.endpoints());
    let b = Coordinator::new(workers.endpoints()).with_seed(2);
    let view = g.read();
    let seg = view.segments(view.catalog().vertex_type("Post").unwrap().id)[0];
    assert_ne!(a.partition_map().owner(seg), b.partition_map().owner(seg));
    let attrs = [AttrRef::new("Post", "content_emb")];
    let q = vec![0.5; 8];
    let x = a
        .search(&view, &attrs, &q, 9, &DistOptions::default())
        .unwrap();
    let y = b
        .with_timeout(Duration::from_secs(2))
        .search(&view, &attrs, &q, 9, &DistOptions::default())
        .unwrap();
    assert_eq!(x.hits, y.hits);
}

/// The byte dumps in docs/wire.md, in order.
fn documented_frames() -> Vec<Vec<u8>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/wire.md");
    let text = std::fs::read_to_string(path).unwrap();
    let examples = text.split("## Examples").nth(1).unwrap();
    examples
        .split("```")
        .skip(1)
        .step_by(2)
        .map(|block| {
            block
                .split_whitespace()
                .map(|b| u8::from_str_radix(b, 16).unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn encoder_matches_documented_bytes() {
    use graphvec::bitmap::Bitmap;
    use graphvec::dist::wire::{
        encode, ErrorCode, Message, SearchRequest, SearchResponse, SegmentResult,
    };
    use graphvec::predicate::{CmpOp, Predicate};
    use graphvec::query::Hit;
    use graphvec::schema::Value;
    use graphvec::storage::{SegmentId, VertexId};

    let request = Message::Request(SearchRequest {
        query_id: 1,
        tid: 9,
        partition: 0,
        partitions: 2,
        seed: 0,
        k: 2,
        ef: 16,
        attrs: vec![("Post".into(), "emb".into())],
        query: vec![1.0, 0.5],
        predicate: Some(Predicate::cmp("len", CmpOp::Gt, Value::Int(3))),
        filter: Some(vec![(
            SegmentId::new(1, 0),
            Bitmap::from_indices(3, [0usize, 2]),
        )]),
    });
    let response = Message::Response(SearchResponse {
        query_id: 1,
        partition: 0,
        segments: vec![SegmentResult {
            segment: SegmentId::new(1, 0),
            bruteforce: true,
            valid: 2,
            hits: vec![Hit::new(VertexId::new(1, 2), 0.25)],
        }],
    });
    let error = Message::Error {
        query_id: 1,
        partition: 0,
        code: ErrorCode::BadRequest,
        message: "no".into(),
    };
    let docs = documented_frames();
    assert_eq!(docs.len(), 3);
    for (m, bytes) in [request, response, error].iter().zip(&docs) {
        assert_eq!(&encode(m), bytes);
        assert_eq!(&graphvec::dist::wire::decode(bytes).unwrap().0, m);
    }
}
