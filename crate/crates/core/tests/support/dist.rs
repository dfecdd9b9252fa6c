//! Partitioned search compared against single-node search.
#![allow(dead_code)]

use std::net::TcpListener;

use graphvec::dist::{serve, wire, Coordinator, DistOptions, Endpoint, LocalWorkers, Worker};
use graphvec::fixtures::{self, SocialConfig};
use graphvec::predicate::{CmpOp, Predicate};
use graphvec::query::{
    pattern_match, vector_search, NodePattern, PathPattern, SearchOptions, SearchOutput, VertexSet,
};
use graphvec::schema::{AttrRef, IndexKind, Value};
use graphvec::storage::{Graph, ReadView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn social(index: IndexKind, persons: usize) -> Graph {
    fixtures::social(&SocialConfig {
        persons,
        index,
        segment_capacity: 16,
        ..SocialConfig::default()
    })
    .unwrap()
    .0
}

/// One query case: attributes, k, ef and an optional predicate or set.
pub struct Case {
    pub attrs: Vec<AttrRef>,
    pub query: Vec<f32>,
    pub k: usize,
    pub ef: usize,
    pub predicate: Option<Predicate>,
    pub filter: Option<VertexSet>,
}

pub fn cases(view: &ReadView, n: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let both = vec![
        AttrRef::new("Post", "content_emb"),
        AttrRef::new("Comment", "content_emb"),
    ];
    let posts = vec![AttrRef::new("Post", "content_emb")];
    let friends_posts = PathPattern::start(NodePattern::typed("Person").filter(Predicate::cmp(
        "id",
        CmpOp::Lt,
        Value::Int(40),
    )))
    .out("knows", NodePattern::typed("Person"))
    .inbound("hasCreator", NodePattern::typed("Post").alias("t"));
    let set = pattern_match(view, &friends_posts).unwrap().sets[2].clone();
    (0..n)
        .map(|i| {
            let query = fixtures::gaussian(&mut rng, 8, 1.0);
            let k = rng.random_range(1..=25);
            let ef = [16usize, 64, 128][rng.random_range(0..3)];
            match i % 3 {
                0 => Case {
                    attrs: both.clone(),
                    query,
                    k,
                    ef,
                    predicate: None,
                    filter: None,
                },
                1 => Case {
                    attrs: posts.clone(),
                    query,
                    k,
                    ef,
                    predicate: Some(Predicate::eq("language", Value::Str("English".into()))),
                    filter: None,
                },
                _ => Case {
                    attrs: posts.clone(),
                    query,
                    k,
                    ef,
                    predicate: None,
                    filter: Some(set.clone()),
                },
            }
        })
        .collect()
}

/// Single-node answer: predicates become a scanned vertex set.
pub fn single(view: &ReadView, c: &Case) -> SearchOutput {
    let mut opts = SearchOptions::default().with_ef(c.ef);
    if let Some(p) = &c.predicate {
        let mut set = VertexSet::for_graph(view.graph());
        for a in &c.attrs {
            for (seg, b) in view.segment_scan(&a.vtype, p).unwrap() {
                set.set_segment(seg, b);
            }
        }
        opts = opts.with_filter(set);
    }
    if let Some(f) = &c.filter {
        opts = opts.with_filter(f.clone());
    }
    vector_search(view, &c.attrs, &c.query, c.k, &opts).unwrap()
}

pub fn distributed(co: &Coordinator, view: &ReadView, c: &Case) -> SearchOutput {
    let opts = DistOptions {
        ef: Some(c.ef),
        predicate: c.predicate.clone(),
        filter: c.filter.clone(),
    };
    co.search(view, &c.attrs, &c.query, c.k, &opts).unwrap()
}

pub fn same(a: &SearchOutput, b: &SearchOutput) -> bool {
    wire::encode_hits(&a.hits) == wire::encode_hits(&b.hits)
}

/// Mismatches between single-node and `partitions`-way in-process search.
pub fn compare_local(g: &Graph, partitions: usize, cases: &[Case]) -> usize {
    let workers = LocalWorkers::spawn(g, partitions, 1);
    let co = Coordinator::new(workers.endpoints());
    let view = g.read();
    cases
        .iter()
        .filter(|c| !same(&single(&view, c), &distributed(&co, &view, c)))
        .count()
}

/// Mismatched serialized results between TCP workers and in-process
/// workers, `partitions` ways.
pub fn compare_tcp(g: &Graph, partitions: usize, cases: &[Case]) -> usize {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let server = serve(listener, Worker::new(g.clone()), 2).unwrap();
    let tcp = Coordinator::new(
        (0..partitions)
            .map(|_| Endpoint::tcp(server.addr()).unwrap())
            .collect(),
    );
    let workers = LocalWorkers::spawn(g, partitions, 1);
    let local = Coordinator::new(workers.endpoints());
    let view = g.read();
    let bad = cases
        .iter()
        .filter(|c| !same(&distributed(&tcp, &view, c), &distributed(&local, &view, c)))
        .count();
    server.shutdown();
    bad
}
