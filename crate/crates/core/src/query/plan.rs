//! Physical plan steps and their textual form.
//!
//! Steps are stored in execution order. The rendered plan lists them
//! bottom-up: the last step executed is printed first.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMode {
    /// Top-k with the limit as written in the query.
    TopK(String),
    /// Distance strictly below the threshold as written.
    Range(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanStep {
    /// Seed a vertex set, optionally filtered.
    Vertex { node: String, pred: Option<String> },
    /// Expand one hop. `edge` is rendered with its direction, e.g.
    /// `knows>` or `<hasCreator`.
    Edge {
        from: String,
        edge: String,
        to: String,
        pred: Option<String>,
        accum: Option<String>,
    },
    Embedding {
        mode: EmbeddingMode,
        attrs: Vec<String>,
        query: String,
        /// Extra `key: value` arguments such as a filter set or ef.
        options: Vec<String>,
    },
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanStep::Vertex { node, pred } => {
                write!(f, "VertexAction[{node}")?;
                if let Some(p) = pred {
                    write!(f, " {{{p}}}")?;
                }
                write!(f, "]")
            }
            PlanStep::Edge {
                from,
                edge,
                to,
                pred,
                accum,
            } => {
                write!(f, "EdgeAction[{from}, {edge}, {to}")?;
                if let Some(p) = pred {
                    write!(f, " {{{p}}}")?;
                }
                if let Some(a) = accum {
                    write!(f, ", {a}")?;
                }
                write!(f, "]")
            }
            PlanStep::Embedding {
                mode,
                attrs,
                query,
                options,
            } => {
                let mode = match mode {
                    EmbeddingMode::TopK(k) => format!("Top {k}"),
                    EmbeddingMode::Range(t) => format!("Range < {t}"),
                };
                write!(
                    f,
                    "EmbeddingAction[{mode}, {{{}}}, {query}",
                    attrs.join(", ")
                )?;
                for o in options {
                    write!(f, ", {o}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryPlan {
    pub steps: Vec<PlanStep>,
}

impl QueryPlan {
    pub fn push(&mut self, step: PlanStep) {
        self.steps.push(step);
    }

    pub fn lines(&self) -> Vec<String> {
        self.steps.iter().rev().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_bottom_up() {
        let mut p = QueryPlan::default();
        p.push(PlanStep::Vertex {
            node: "Post:s".into(),
            pred: Some("s.language = \"English\"".into()),
        });
        p.push(PlanStep::Embedding {
            mode: EmbeddingMode::TopK("k".into()),
            attrs: vec!["s.content_emb".into()],
            query: "query_vector".into(),
            options: vec![],
        });
        assert_eq!(
            p.to_string(),
            "EmbeddingAction[Top k, {s.content_emb}, query_vector]\nVertexAction[Post:s {s.language = \"English\"}]\n"
        );
    }

    #[test]
    fn edge_with_accumulator() {
        let s = PlanStep::Edge {
            from: "Person:v".into(),
            edge: "<hasCreator".into(),
            to: "Comment:t".into(),
            pred: None,
            accum: Some("@@heapAcc += (s, t, dist(s.content_emb,t.content_emb))".into()),
        };
        assert_eq!(
            s.to_string(),
            "EdgeAction[Person:v, <hasCreator, Comment:t, @@heapAcc += (s, t, dist(s.content_emb,t.content_emb))]"
        );
    }
}
