//! Pre-filtered top-k: a predicate becomes per-segment bitmaps before the
//! index is searched. Narrow filters fall back to a scan.

use graphvec::fixtures::{self, SocialConfig};
use graphvec::predicate::{CmpOp, Predicate};
use graphvec::query::filtered_topk;
use graphvec::schema::{IndexKind, Value};

fn main() -> anyhow::Result<()> {
    let (g, _) = fixtures::social(&SocialConfig {
        persons: 400,
        index: IndexKind::Hnsw,
        segment_capacity: 256,
        ..SocialConfig::default()
    })?;
    graphvec::vacuum::run_once(&g, &Default::default(), true)?;
    let view = g.read();
    let q = vec![0.3; 8];

    let cases = [
        (
            "english",
            Predicate::eq("language", Value::Str("English".into())),
        ),
        (
            "long",
            Predicate::cmp("length", CmpOp::Gt, Value::Int(2900)),
        ),
        (
            "long english",
            Predicate::eq("language", Value::Str("English".into())).and(Predicate::cmp(
                "length",
                CmpOp::Gt,
                Value::Int(2900),
            )),
        ),
    ];
    for (name, pred) in cases {
        let out = filtered_topk(&view, "Post", &pred, "content_emb", &q, 5, Some(64))?;
        let s = &out.stats;
        println!(
            "{name:<13} candidates={:<5} segments={} index={} scan={} top={:?}",
            s.candidates,
            s.segments_touched,
            s.index_segments,
            s.bruteforce_segments,
            out.hits
                .iter()
                .map(|h| view.key_of(h.vertex).unwrap())
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
