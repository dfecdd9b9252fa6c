//! Declares a schema in the query language, loads a few rows and shows
//! what the catalog ended up with.
//!
//!     cargo run --example schema_ddl

use graphvec::gvql::{Engine, Outcome, Params};
use graphvec::schema::Value;
use graphvec::storage::{Graph, WriteOp};

const DDL: &str = r#"
CREATE VERTEX Post (id INT PRIMARY KEY, author STRING, content STRING);
CREATE VERTEX Comment (id INT PRIMARY KEY, content STRING);
CREATE DIRECTED EDGE replyOf (FROM Comment, TO Post);
CREATE EMBEDDING SPACE text_space (
  DIMENSION = 4, MODEL = toy, INDEX = HNSW, DATATYPE = FLOAT, METRIC = COSINE
);
ALTER VERTEX Post ADD EMBEDDING ATTRIBUTE content_emb IN EMBEDDING SPACE text_space;
ALTER VERTEX Comment ADD EMBEDDING ATTRIBUTE content_emb IN EMBEDDING SPACE text_space;
"#;

fn main() -> anyhow::Result<()> {
    let graph = Graph::in_memory();
    let mut engine = Engine::new(graph.clone());
    for outcome in engine.execute(DDL, &Params::new())? {
        if let Outcome::Applied(what) = outcome {
            println!("applied: {what}");
        }
    }

    graph.write(vec![
        WriteOp::UpsertVertex {
            vtype: "Post".into(),
            key: 1,
            attrs: vec![("author".into(), Value::Str("ana".into()))],
        },
        WriteOp::SetEmbedding {
            vtype: "Post".into(),
            key: 1,
            attr: "content_emb".into(),
            value: vec![3.0, 4.0, 0.0, 0.0],
        },
    ])?;

    // Cosine vectors are normalized on ingest.
    let view = graph.read();
    println!(
        "Post(1).content_emb = {:?}",
        view.get_embedding_by_key("Post", 1, "content_emb")?
    );

    // A vector of the wrong width is rejected before anything commits.
    let bad = graph.write(vec![WriteOp::SetEmbedding {
        vtype: "Post".into(),
        key: 1,
        attr: "content_emb".into(),
        value: vec![1.0; 3],
    }]);
    println!("3-dim write: {}", bad.unwrap_err());
    Ok(())
}
