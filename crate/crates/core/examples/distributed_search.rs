//! Scatter-gather top-k over TCP workers, checked against the single-node
//! answer.
//!
//!     cargo run --example distributed_search -- 3

use std::net::TcpListener;

use graphvec::dist::{serve, Coordinator, DistOptions, Endpoint, Worker};
use graphvec::fixtures::{self, SocialConfig};
use graphvec::query::{vector_search, SearchOptions};
use graphvec::schema::{AttrRef, IndexKind};

fn main() -> anyhow::Result<()> {
    let partitions: usize = std::env::args().nth(1).map_or(Ok(2), |s| s.parse())?;
    let (g, _) = fixtures::social(&SocialConfig {
        persons: 300,
        index: IndexKind::Hnsw,
        segment_capacity: 64,
        ..SocialConfig::default()
    })?;

    // Every worker serves the same graph; the coordinator assigns each
    // segment to exactly one of them.
    let mut servers = Vec::new();
    let mut endpoints = Vec::new();
    for _ in 0..partitions {
        let s = serve(TcpListener::bind("127.0.0.1:0")?, Worker::new(g.clone()), 2)?;
        endpoints.push(Endpoint::tcp(s.addr())?);
        servers.push(s);
    }
    let co = Coordinator::new(endpoints);
    let view = g.read();
    let attrs = [
        AttrRef::new("Post", "content_emb"),
        AttrRef::new("Comment", "content_emb"),
    ];
    let q = vec![0.1; 8];
    let opts = DistOptions {
        ef: Some(64),
        ..Default::default()
    };
    let dist = co.search(&view, &attrs, &q, 8, &opts)?;
    let local = vector_search(&view, &attrs, &q, 8, &SearchOptions::default().with_ef(64))?;
    for h in &dist.hits {
        println!("{:?} {:.5}", h.vertex, h.distance);
    }
    println!(
        "{partitions} workers, {} segments, equal to single node: {}",
        dist.stats.segments_touched,
        dist.hits == local.hits
    );
    for s in servers {
        s.shutdown();
    }
    Ok(())
}
