//! Closest (comment, comment) pairs where the first author knows the
//! second, written as a query and through the API.

use graphvec::fixtures::{self, SocialConfig};
use graphvec::gvql::{Engine, Params};
use graphvec::query::{similarity_join, NodePattern, PathPattern};

const JOIN: &str = r#"
SELECT s, t
FROM (s:Comment) - [:hasCreator] -> (u:Person)
- [:knows] -> (v:Person) <- [:hasCreator] - (t:Comment)
ORDER BY VECTOR_DIST(s.content_emb, t.content_emb)
LIMIT 5;
"#;

fn main() -> anyhow::Result<()> {
    let (g, _) = fixtures::social(&SocialConfig::default())?;
    let mut engine = Engine::new(g.clone());
    print!("{}", engine.explain(JOIN)?);
    for out in engine.execute(JOIN, &Params::new())? {
        println!("{out:?}");
    }

    let p = PathPattern::start(NodePattern::typed("Comment").alias("s"))
        .out("hasCreator", NodePattern::typed("Person"))
        .out("knows", NodePattern::typed("Person"))
        .inbound("hasCreator", NodePattern::typed("Comment").alias("t"));
    let view = g.read();
    for pair in similarity_join(&view, &p, "s", "content_emb", "t", "content_emb", 5)? {
        println!(
            "Comment({}) ~ Comment({}) at {:.4}",
            view.key_of(pair.source).unwrap(),
            view.key_of(pair.target).unwrap(),
            pair.distance
        );
    }
    Ok(())
}
