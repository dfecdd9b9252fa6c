//! Snapshot reads across vector updates, and what the two vacuum stages do
//! to the delta store.

use graphvec::query::{vector_search, SearchOptions};
use graphvec::schema::{AttrRef, EmbeddingMeta, EmbeddingSource, IndexKind, Metric, VertexTypeDef};
use graphvec::storage::{Graph, GraphConfig, WriteOp};
use graphvec::vacuum::{run_once, VacuumPolicy};

fn set(key: i64, v: [f32; 2]) -> WriteOp {
    WriteOp::SetEmbedding {
        vtype: "Doc".into(),
        key,
        attr: "emb".into(),
        value: v.to_vec(),
    }
}

fn status(g: &Graph, label: &str) {
    for s in g.vacuum_status() {
        println!(
            "{label:<14} seg {} snapshot@{} indexed={} memory={} files={}",
            s.segment, s.snapshot_tid, s.indexed_vectors, s.memory_deltas, s.pending_delta_files
        );
    }
}

fn main() -> anyhow::Result<()> {
    let g = Graph::open(GraphConfig::in_memory().with_segment_capacity(8))?;
    g.define_vertex_type(VertexTypeDef::new("Doc").key("id"))?;
    g.add_embedding_attribute(
        "Doc",
        "emb",
        EmbeddingSource::Meta(EmbeddingMeta::new(2, "toy", IndexKind::Hnsw, Metric::L2)),
    )?;
    let mut ops = Vec::new();
    for key in 0..6 {
        ops.push(WriteOp::UpsertVertex {
            vtype: "Doc".into(),
            key,
            attrs: vec![],
        });
        ops.push(set(key, [key as f32, 0.0]));
    }
    g.write(ops)?;
    status(&g, "after load");

    let before = g.read();
    g.write(vec![set(0, [9.0, 9.0])])?;
    let after = g.read();
    println!(
        "pinned at {}: {:?}",
        before.tid(),
        before.get_embedding_by_key("Doc", 0, "emb")?
    );
    println!(
        "pinned at {}: {:?}",
        after.tid(),
        after.get_embedding_by_key("Doc", 0, "emb")?
    );

    let policy = VacuumPolicy::default();
    let r = run_once(&g, &policy, true)?;
    println!("vacuum: {r:?}");
    status(&g, "after vacuum");

    // The old view still answers from the state it pinned.
    let attrs = [AttrRef::new("Doc", "emb")];
    for (name, view) in [("before", &before), ("after", &after)] {
        let out = vector_search(view, &attrs, &[0.0, 0.0], 1, &SearchOptions::default())?;
        println!(
            "{name}: nearest to origin is Doc({})",
            view.key_of(out.hits[0].vertex).unwrap()
        );
    }
    drop(before);
    run_once(&g, &policy, true)?;
    status(&g, "after release");
    Ok(())
}
