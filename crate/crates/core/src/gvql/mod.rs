//! A small declarative language: DDL, loading jobs, SELECT blocks over
//! path patterns with vector ordering or range predicates, and query
//! procedures that compose blocks through vertex set variables.
//!
//! ```
//! use graphvec::gvql::{parse, Engine};
//! use graphvec::storage::Graph;
//!
//! let mut e = Engine::new(Graph::in_memory());
//! e.execute(
//!     "CREATE VERTEX Post (id INT PRIMARY KEY, language STRING);
//!      ALTER VERTEX Post ADD EMBEDDING ATTRIBUTE content_emb
//!        (DIMENSION = 2, MODEL = m, INDEX = FLAT, DATATYPE = FLOAT, METRIC = L2);",
//!     &Default::default(),
//! )
//! .unwrap();
//! let plan = e
//!     .explain("SELECT s FROM (s:Post) WHERE s.language = \"English\"
//!               ORDER BY VECTOR_DIST(s.content_emb, query_vector) LIMIT k;")
//!     .unwrap();
//! assert_eq!(
//!     plan,
//!     "EmbeddingAction[Top k, {s.content_emb}, query_vector]\nVertexAction[Post:s {s.language = \"English\"}]\n"
//! );
//! assert!(parse("SELECT s FROM (s:Post) ORDER BY VECTOR_DIST(s.e, q);").is_err());
//! ```

mod ast;
mod exec;
mod lexer;
mod parser;
mod plan;

pub use ast::*;
pub use exec::{Algorithm, AlgorithmRegistry, BlockResult, Engine, Outcome, Params, Val};
pub use parser::{parse, parse_statement, MAX_INLINE_VECTOR};
pub use plan::{
    plan_block, plan_vector_search, BlockKind, BlockPlan, Label, NameKind, NodePlan, Scope,
};
