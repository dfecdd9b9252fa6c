//! Semantic checks and plan construction for query blocks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::index::check_dimension;
use crate::predicate::CmpOp;
use crate::query::{EdgeStep, EmbeddingMode, PlanStep, QueryPlan};
use crate::schema::{AttrRef, Catalog};
use crate::storage::Direction;

use super::ast::*;

/// What a name in scope refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameKind {
    Set,
    Map,
    Int,
    Float,
    Str,
    Bool,
    Vector,
}

impl From<ParamType> for NameKind {
    fn from(t: ParamType) -> Self {
        match t {
            ParamType::Int => NameKind::Int,
            ParamType::Float => NameKind::Float,
            ParamType::String => NameKind::Str,
            ParamType::Bool => NameKind::Bool,
            ParamType::FloatList => NameKind::Vector,
        }
    }
}

/// Names visible to a block. An open scope accepts any bare name as a
/// parameter to be supplied at execution time.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub open: bool,
    pub names: BTreeMap<String, NameKind>,
}

impl Scope {
    pub fn open() -> Self {
        Self {
            open: true,
            names: BTreeMap::new(),
        }
    }

    pub fn define(&mut self, name: &str, kind: NameKind) {
        self.names.insert(name.to_string(), kind);
    }

    pub fn kind(&self, name: &str) -> Option<NameKind> {
        self.names.get(name).copied()
    }

    fn check_var(&self, name: &str, want: &[NameKind]) -> Result<()> {
        match self.kind(name) {
            Some(k) if want.contains(&k) => Ok(()),
            Some(k) => Err(Error::Semantic(format!(
                "`{name}` is a {k:?}, expected one of {want:?}"
            ))),
            None if self.open => Ok(()),
            None => Err(Error::Semantic(format!("`{name}` is not defined"))),
        }
    }

    fn check_operand(&self, o: &Operand, want: &[NameKind]) -> Result<()> {
        match o {
            Operand::Var(n) | Operand::Param(n) => self.check_var(n, want),
            _ => Ok(()),
        }
    }
}

const NUMERIC: &[NameKind] = &[NameKind::Int, NameKind::Float];
const SCALAR: &[NameKind] = &[
    NameKind::Int,
    NameKind::Float,
    NameKind::Str,
    NameKind::Bool,
];

#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Any,
    Type(String),
    Set(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePlan {
    pub alias: Option<String>,
    pub label: Label,
    /// Conjuncts of the WHERE clause that reference only this node.
    pub preds: Vec<Expr>,
}

impl NodePlan {
    fn text(&self) -> String {
        let label = match &self.label {
            Label::Any => None,
            Label::Type(t) | Label::Set(t) => Some(t.as_str()),
        };
        match (label, &self.alias) {
            (Some(l), Some(a)) => format!("{l}:{a}"),
            (Some(l), None) => l.to_string(),
            (None, Some(a)) => a.clone(),
            (None, None) => "_".into(),
        }
    }
}

fn pred_text(preds: &[Expr]) -> String {
    let parts: Vec<String> = preds
        .iter()
        .map(|p| match p {
            Expr::Or(..) if preds.len() > 1 => format!("({p})"),
            _ => p.to_string(),
        })
        .collect();
    parts.join(" AND ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    /// Pure pattern block; yields the set bound at `pos`.
    Select { pos: usize },
    TopK {
        pos: usize,
        attr: String,
        query: Operand,
        k: Operand,
    },
    Range {
        pos: usize,
        attr: String,
        query: Operand,
        threshold: Operand,
    },
    Join {
        s: usize,
        s_attr: String,
        t: usize,
        t_attr: String,
        k: Operand,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    pub nodes: Vec<NodePlan>,
    pub edges: Vec<EdgeStep>,
    pub kind: BlockKind,
    pub plan: QueryPlan,
}

fn semantic<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Semantic(msg.into()))
}

/// Compatibility failures are semantic errors at plan time.
fn compat(cat: &Catalog, attrs: &[AttrRef]) -> Result<crate::schema::CompatibleSet> {
    cat.check_compatibility(attrs).map_err(|e| match e {
        Error::DimensionMismatch { .. }
        | Error::ModelMismatch { .. }
        | Error::DatatypeMismatch { .. }
        | Error::MetricMismatch { .. } => {
            Error::Semantic(format!("incompatible embedding attributes: {e}"))
        }
        e => e,
    })
}

enum DistShape {
    Query {
        pos: usize,
        attr: String,
        query: Operand,
    },
    Pair {
        s: usize,
        s_attr: String,
        t: usize,
        t_attr: String,
    },
}

pub fn plan_block(block: &SelectBlock, cat: &Catalog, scope: &Scope) -> Result<BlockPlan> {
    let mut nodes = Vec::with_capacity(block.pattern.nodes.len());
    let mut aliases: BTreeMap<String, usize> = BTreeMap::new();
    for (i, n) in block.pattern.nodes.iter().enumerate() {
        let label = match &n.label {
            None => Label::Any,
            Some(l) if cat.vertex_type(l).is_ok() => Label::Type(l.clone()),
            Some(l) if scope.kind(l) == Some(NameKind::Set) => Label::Set(l.clone()),
            Some(l) => return Err(Error::UnknownType(l.clone())),
        };
        if let Some(a) = &n.alias {
            if aliases.insert(a.clone(), i).is_some() {
                return semantic(format!("alias `{a}` is bound twice"));
            }
        }
        nodes.push(NodePlan {
            alias: n.alias.clone(),
            label,
            preds: Vec::new(),
        });
    }
    let mut edges = Vec::with_capacity(block.pattern.edges.len());
    for e in &block.pattern.edges {
        cat.edge_type(&e.etype)?;
        if let Some(a) = &e.alias {
            if aliases.contains_key(a) {
                return semantic(format!("alias `{a}` is bound twice"));
            }
        }
        edges.push(EdgeStep {
            etype: e.etype.clone(),
            dir: e.dir,
        });
    }
    let lookup = |a: &str| -> Result<usize> {
        aliases
            .get(a)
            .copied()
            .ok_or_else(|| Error::Semantic(format!("unknown alias `{a}`")))
    };
    let positions: Vec<usize> = block
        .projection
        .iter()
        .map(|a| lookup(a))
        .collect::<Result<_>>()?;

    let labels: Vec<Label> = nodes.iter().map(|n| n.label.clone()).collect();
    let check_attr = |pos: usize, attr: &str| -> Result<()> {
        if let Label::Type(t) = &labels[pos] {
            if cat.vertex_type(t)?.attr(attr).is_none() {
                return Err(Error::UnknownAttribute {
                    vtype: t.clone(),
                    attr: attr.to_string(),
                });
            }
        }
        Ok(())
    };

    let mut range: Option<(DistCall, Operand)> = None;
    if let Some(w) = &block.filter {
        for c in w.conjuncts() {
            match c {
                Expr::Cmp {
                    left: Operand::Dist(d),
                    op: CmpOp::Lt,
                    right,
                }
                | Expr::Cmp {
                    left: right,
                    op: CmpOp::Gt,
                    right: Operand::Dist(d),
                } if !matches!(right, Operand::Dist(_)) => {
                    if range.is_some() {
                        return semantic("at most one VECTOR_DIST range predicate per block");
                    }
                    scope.check_operand(right, NUMERIC)?;
                    range = Some(((**d).clone(), right.clone()));
                }
                _ => {
                    check_no_dist(c)?;
                    let mut refs = Vec::new();
                    c.aliases(&mut refs);
                    let [alias] = refs.as_slice() else {
                        return semantic(format!(
                            "each WHERE conjunct must reference exactly one alias: `{c}`"
                        ));
                    };
                    let pos = lookup(alias)?;
                    check_pred(c, scope, &mut |attr| check_attr(pos, attr))?;
                    nodes[pos].preds.push(c.clone());
                }
            }
        }
    }

    let shape = |d: &DistCall| -> Result<DistShape> {
        match (&d.left, &d.right) {
            (Operand::Attr { alias: a, attr: x }, Operand::Attr { alias: b, attr: y }) => {
                Ok(DistShape::Pair {
                    s: lookup(a)?,
                    s_attr: x.clone(),
                    t: lookup(b)?,
                    t_attr: y.clone(),
                })
            }
            (Operand::Attr { alias, attr }, q) | (q, Operand::Attr { alias, attr }) => {
                scope.check_operand(q, &[NameKind::Vector])?;
                Ok(DistShape::Query {
                    pos: lookup(alias)?,
                    attr: attr.clone(),
                    query: q.clone(),
                })
            }
            _ => semantic("VECTOR_DIST needs at least one embedding attribute"),
        }
    };
    let single = |what: &str, pos: usize| -> Result<()> {
        if positions != [pos] {
            return semantic(format!("{what} must project exactly the searched alias"));
        }
        Ok(())
    };

    let kind = match (&block.order, range) {
        (Some(_), Some(_)) => {
            return semantic("a block cannot both ORDER BY VECTOR_DIST and filter on it")
        }
        (Some(order), None) => {
            let k = block
                .limit
                .clone()
                .expect("parser requires LIMIT with ORDER BY");
            scope.check_operand(&k, &[NameKind::Int])?;
            match shape(order)? {
                DistShape::Query { pos, attr, query } => {
                    single("a top-k block", pos)?;
                    BlockKind::TopK {
                        pos,
                        attr,
                        query,
                        k,
                    }
                }
                DistShape::Pair {
                    s,
                    s_attr,
                    t,
                    t_attr,
                } => {
                    if s == t {
                        return semantic("a similarity join needs two distinct aliases");
                    }
                    let mut proj = positions.clone();
                    proj.sort_unstable();
                    if proj != [s.min(t), s.max(t)] {
                        return semantic("a similarity join must project both joined aliases");
                    }
                    BlockKind::Join {
                        s,
                        s_attr,
                        t,
                        t_attr,
                        k,
                    }
                }
            }
        }
        (None, Some((d, threshold))) => match shape(&d)? {
            DistShape::Query { pos, attr, query } => {
                single("a range block", pos)?;
                BlockKind::Range {
                    pos,
                    attr,
                    query,
                    threshold,
                }
            }
            DistShape::Pair { .. } => {
                return semantic("range predicates compare an attribute with a query vector")
            }
        },
        (None, None) => {
            let [pos] = positions.as_slice() else {
                return semantic("a block without VECTOR_DIST ordering projects one alias");
            };
            BlockKind::Select { pos: *pos }
        }
    };

    check_embeddings(cat, &nodes, &kind)?;
    let plan = render(&nodes, &edges, &kind);
    Ok(BlockPlan {
        nodes,
        edges,
        kind,
        plan,
    })
}

fn check_no_dist(e: &Expr) -> Result<()> {
    match e {
        Expr::And(a, b) | Expr::Or(a, b) => {
            check_no_dist(a)?;
            check_no_dist(b)
        }
        Expr::Not(a) => check_no_dist(a),
        Expr::Cmp { left, right, .. } => {
            if matches!(left, Operand::Dist(_)) || matches!(right, Operand::Dist(_)) {
                semantic("VECTOR_DIST may only appear as a top-level `VECTOR_DIST(..) < threshold` conjunct")
            } else {
                Ok(())
            }
        }
    }
}

fn check_pred(e: &Expr, scope: &Scope, attr_ok: &mut dyn FnMut(&str) -> Result<()>) -> Result<()> {
    match e {
        Expr::And(a, b) | Expr::Or(a, b) => {
            check_pred(a, scope, attr_ok)?;
            check_pred(b, scope, attr_ok)
        }
        Expr::Not(a) => check_pred(a, scope, attr_ok),
        Expr::Cmp { left, right, .. } => {
            let attrs = [left, right]
                .iter()
                .filter(|o| matches!(o, Operand::Attr { .. }))
                .count();
            if attrs != 1 {
                return semantic(format!(
                    "comparisons need one attribute and one value: `{e}`"
                ));
            }
            for o in [left, right] {
                match o {
                    Operand::Attr { attr, .. } => attr_ok(attr)?,
                    Operand::Vector(_) | Operand::List(_) => {
                        return semantic(format!(
                            "lists cannot be compared with scalar attributes: `{e}`"
                        ))
                    }
                    other => scope.check_operand(other, SCALAR)?,
                }
            }
            Ok(())
        }
    }
}

fn attr_refs(cat: &Catalog, node: &NodePlan, attr: &str) -> Result<Vec<AttrRef>> {
    match &node.label {
        Label::Type(t) => {
            cat.embedding(t, attr)?;
            Ok(vec![AttrRef::new(t.as_str(), attr)])
        }
        _ => Ok(cat
            .vertex_types
            .iter()
            .filter(|t| t.embedding(attr).is_some())
            .map(|t| AttrRef::new(t.name.as_str(), attr))
            .collect()),
    }
}

fn check_query_operand(cat: &Catalog, attrs: &[AttrRef], q: &Operand) -> Result<()> {
    if attrs.is_empty() {
        return semantic("no vertex type carries the searched embedding attribute");
    }
    let set = compat(cat, attrs)?;
    if let Operand::Vector(v) = q {
        check_dimension(set.meta.dimension, v)?;
    }
    Ok(())
}

fn check_embeddings(cat: &Catalog, nodes: &[NodePlan], kind: &BlockKind) -> Result<()> {
    match kind {
        BlockKind::Select { .. } => Ok(()),
        BlockKind::TopK {
            pos, attr, query, ..
        } => check_query_operand(cat, &attr_refs(cat, &nodes[*pos], attr)?, query),
        BlockKind::Range {
            pos, attr, query, ..
        } => {
            let attrs = attr_refs(cat, &nodes[*pos], attr)?;
            check_query_operand(cat, &attrs, query)?;
            let metric = compat(cat, &attrs)?.meta.metric;
            if !metric.supports_range() {
                return semantic(format!(
                    "range predicates are not defined for metric {metric}"
                ));
            }
            Ok(())
        }
        BlockKind::Join {
            s,
            s_attr,
            t,
            t_attr,
            ..
        } => {
            let mut attrs = attr_refs(cat, &nodes[*s], s_attr)?;
            attrs.extend(attr_refs(cat, &nodes[*t], t_attr)?);
            if attrs.is_empty() {
                return semantic("no vertex type carries the joined embedding attributes");
            }
            compat(cat, &attrs).map(|_| ())
        }
    }
}

fn alias_text(nodes: &[NodePlan], pos: usize) -> String {
    nodes[pos]
        .alias
        .clone()
        .expect("searched positions are aliased")
}

fn render(nodes: &[NodePlan], edges: &[EdgeStep], kind: &BlockKind) -> QueryPlan {
    let mut plan = QueryPlan::default();
    if !edges.is_empty() || !nodes[0].preds.is_empty() {
        plan.push(PlanStep::Vertex {
            node: nodes[0].text(),
            pred: (!nodes[0].preds.is_empty()).then(|| pred_text(&nodes[0].preds)),
        });
    }
    for (i, e) in edges.iter().enumerate() {
        let accum = match kind {
            BlockKind::Join {
                s,
                s_attr,
                t,
                t_attr,
                ..
            } if i + 1 == edges.len() => {
                let (s, t) = (alias_text(nodes, *s), alias_text(nodes, *t));
                Some(format!(
                    "@@heapAcc += ({s}, {t}, dist({s}.{s_attr},{t}.{t_attr}))"
                ))
            }
            _ => None,
        };
        let edge = match e.dir {
            Direction::Out => format!("{}>", e.etype),
            Direction::In => format!("<{}", e.etype),
        };
        let to = &nodes[i + 1];
        plan.push(PlanStep::Edge {
            from: nodes[i].text(),
            edge,
            to: to.text(),
            pred: (!to.preds.is_empty()).then(|| pred_text(&to.preds)),
            accum,
        });
    }
    match kind {
        BlockKind::TopK {
            pos,
            attr,
            query,
            k,
        } => plan.push(PlanStep::Embedding {
            mode: EmbeddingMode::TopK(k.to_string()),
            attrs: vec![format!("{}.{attr}", alias_text(nodes, *pos))],
            query: query.to_string(),
            options: Vec::new(),
        }),
        BlockKind::Range {
            pos,
            attr,
            query,
            threshold,
        } => plan.push(PlanStep::Embedding {
            mode: EmbeddingMode::Range(threshold.to_string()),
            attrs: vec![format!("{}.{attr}", alias_text(nodes, *pos))],
            query: query.to_string(),
            options: Vec::new(),
        }),
        _ => {}
    }
    plan
}

/// Checks a `VectorSearch(...)` call and renders its single-step plan.
pub fn plan_vector_search(
    call: &VectorSearchCall,
    cat: &Catalog,
    scope: &Scope,
) -> Result<QueryPlan> {
    let attrs: Vec<AttrRef> = call
        .attrs
        .iter()
        .map(|(t, a)| AttrRef::new(t.as_str(), a.as_str()))
        .collect();
    for a in &attrs {
        cat.embedding(&a.vtype, &a.attr)?;
    }
    scope.check_operand(&call.query, &[NameKind::Vector])?;
    scope.check_operand(&call.k, &[NameKind::Int])?;
    check_query_operand(cat, &attrs, &call.query)?;
    let mut options = Vec::new();
    if let Some(f) = &call.filter {
        scope.check_var(f, &[NameKind::Set])?;
        options.push(format!("filter: {f}"));
    }
    if let Some(ef) = &call.ef {
        scope.check_operand(ef, &[NameKind::Int])?;
        options.push(format!("ef: {ef}"));
    }
    if let Some(m) = &call.distance_map {
        if scope.kind(m) != Some(NameKind::Map) {
            return semantic(format!("`@@{m}` is not a declared Map<VERTEX, FLOAT>"));
        }
        options.push(format!("distanceMap: @@{m}"));
    }
    let mut plan = QueryPlan::default();
    plan.push(PlanStep::Embedding {
        mode: EmbeddingMode::TopK(call.k.to_string()),
        attrs: attrs.iter().map(|a| a.to_string()).collect(),
        query: call.query.to_string(),
        options,
    });
    Ok(plan)
}
