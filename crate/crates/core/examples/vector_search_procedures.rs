//! Stored procedures that compose VectorSearch with pattern blocks,
//! accumulators and a community detection call.

use graphvec::fixtures::{self, SocialConfig};
use graphvec::gvql::{Engine, Params, Val};
use serde_json::json;

const AUTHORS: &str = r#"
CREATE QUERY authors(List<FLOAT> topic_emb, INT k) {
  TopKMessages = VectorSearch({Comment.content_emb, Post.content_emb}, topic_emb, k);
  Authors = SELECT p FROM (:TopKMessages)-[:hasCreator]->(p:Person);
  PRINT Authors;
}"#;

const LOCAL: &str = r#"
CREATE QUERY local(List<FLOAT> topic_emb, INT k) {
  Map<VERTEX, FLOAT> @@dist;
  Here = SELECT t FROM (c:Country)<-[:LOCATED_IN]-(t:Comment) WHERE c.name = "United States";
  Top = VectorSearch({Comment.content_emb}, topic_emb, k, {filter: Here, ef: 200, distanceMap: @@dist});
  PRINT Top;
  PRINT @@dist;
}"#;

const COMMUNITIES: &str = r#"
CREATE QUERY communities(List<FLOAT> topic_emb, INT k) {
  n = tg_louvain(["Person"], ["knows"]);
  FOREACH i IN RANGE[0, n] DO
    Posts = SELECT t FROM (s:Person)<-[e:hasCreator]-(t:Post) WHERE s.cid = i;
    Top = VectorSearch({Post.content_emb}, topic_emb, k, {filter: Posts});
    PRINT Top;
  END;
}"#;

fn main() -> anyhow::Result<()> {
    let (g, _) = fixtures::social(&SocialConfig {
        persons: 40,
        knows_per_person: 2,
        ..SocialConfig::default()
    })?;
    let mut e = Engine::new(g);
    e.algorithms_mut().register("tg_louvain", |g, _| {
        fixtures::label_propagation(g).map(Val::Int)
    });
    for q in [AUTHORS, LOCAL, COMMUNITIES] {
        e.execute(q, &Params::new())?;
    }
    let mut p = Params::new();
    p.insert(
        "topic_emb".into(),
        json!([0.5, -0.2, 0.1, 0.0, 0.3, 0.0, -0.4, 0.2]),
    );
    p.insert("k".into(), json!(2));
    for name in ["authors", "local", "communities"] {
        println!("-- {name}");
        for out in e.run_query(name, &p)? {
            println!("{out}");
        }
    }
    Ok(())
}
