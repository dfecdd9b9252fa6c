//! Statement execution against a [`Graph`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value as Json};

use crate::dist::{Coordinator, DistOptions};
use crate::error::{Error, Result};
use crate::loader::{self, LoadReport};
use crate::predicate::{CmpOp, Predicate};
use crate::query::{
    pattern_filtered_topk, pattern_match, range_query, similarity_join, vector_search, vertex_json,
    DistanceMap, NodePattern, NodeSource, PairHit, PathPattern, QueryPlan, SearchOptions,
    SearchOutput, VertexSet,
};
use crate::schema::{AttrRef, EmbeddingSource, Value, VertexTypeDef};
use crate::storage::{Graph, ReadView};

use super::ast::*;
use super::parser::parse;
use super::plan::{plan_block, plan_vector_search, BlockKind, BlockPlan, Label, NameKind, Scope};

/// A runtime value bound to a parameter or variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Vector(Vec<f32>),
}

impl Val {
    pub fn from_json(v: &Json) -> Option<Val> {
        match v {
            Json::Bool(b) => Some(Val::Bool(*b)),
            Json::Number(n) => match n.as_i64() {
                Some(i) => Some(Val::Int(i)),
                None => n.as_f64().map(Val::Float),
            },
            Json::String(s) => Some(Val::Str(s.clone())),
            Json::Array(xs) => xs
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32))
                .collect::<Option<Vec<f32>>>()
                .map(Val::Vector),
            _ => None,
        }
    }

    fn scalar(&self) -> Option<Value> {
        Some(match self {
            Val::Int(i) => Value::Int(*i),
            Val::Float(f) => Value::Float(*f),
            Val::Str(s) => Value::Str(s.clone()),
            Val::Bool(b) => Value::Bool(*b),
            Val::Vector(_) => return None,
        })
    }

    fn kind(&self) -> NameKind {
        match self {
            Val::Int(_) => NameKind::Int,
            Val::Float(_) => NameKind::Float,
            Val::Str(_) => NameKind::Str,
            Val::Bool(_) => NameKind::Bool,
            Val::Vector(_) => NameKind::Vector,
        }
    }
}

pub type Params = BTreeMap<String, Json>;

/// A graph algorithm callable from procedures, e.g. a community detector
/// that tags vertices and returns the number of groups.
pub type Algorithm = Arc<dyn Fn(&Graph, &[Val]) -> Result<Val> + Send + Sync>;

#[derive(Clone, Default)]
pub struct AlgorithmRegistry {
    map: BTreeMap<String, Algorithm>,
}

impl AlgorithmRegistry {
    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&Graph, &[Val]) -> Result<Val> + Send + Sync + 'static,
    ) {
        self.map.insert(name.to_string(), Arc::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&Algorithm> {
        self.map.get(name)
    }
}

impl fmt::Debug for AlgorithmRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.map.keys()).finish()
    }
}

/// Output of one query block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockResult {
    /// A vertex set, with ranking when it came from a vector search.
    Set {
        set: VertexSet,
        output: Option<SearchOutput>,
    },
    Pairs(Vec<PairHit>),
}

impl BlockResult {
    pub fn set(&self) -> Option<&VertexSet> {
        match self {
            BlockResult::Set { set, .. } => Some(set),
            BlockResult::Pairs(_) => None,
        }
    }

    pub fn output(&self) -> Option<&SearchOutput> {
        match self {
            BlockResult::Set { output, .. } => output.as_ref(),
            BlockResult::Pairs(_) => None,
        }
    }

    pub fn to_json(&self, view: &ReadView) -> Json {
        match self {
            BlockResult::Set {
                output: Some(o), ..
            } => o.to_json(view),
            BlockResult::Set { set, output: None } => {
                json!({ "vertices": set.iter().map(|v| vertex_json(view, v)).collect::<Vec<_>>() })
            }
            BlockResult::Pairs(pairs) => json!({
                "pairs": pairs
                    .iter()
                    .map(|p| json!({
                        "source": vertex_json(view, p.source),
                        "target": vertex_json(view, p.target),
                        "distance": p.distance,
                    }))
                    .collect::<Vec<_>>()
            }),
        }
    }
}

#[derive(Debug, Default)]
struct Env {
    scalars: HashMap<String, Val>,
    sets: HashMap<String, BlockResult>,
    maps: HashMap<String, DistanceMap>,
}

impl Env {
    fn from_params(params: &Params) -> Result<Env> {
        let mut env = Env::default();
        for (k, v) in params {
            let val = Val::from_json(v).ok_or_else(|| {
                Error::Validation(format!("parameter `{k}` has an unsupported JSON value"))
            })?;
            env.scalars.insert(k.clone(), val);
        }
        Ok(env)
    }

    fn val(&self, o: &Operand) -> Result<Val> {
        match o {
            Operand::Lit(Value::Int(i)) => Ok(Val::Int(*i)),
            Operand::Lit(Value::Float(f)) => Ok(Val::Float(*f)),
            Operand::Lit(Value::Str(s)) => Ok(Val::Str(s.clone())),
            Operand::Lit(Value::Bool(b)) => Ok(Val::Bool(*b)),
            Operand::Vector(v) => Ok(Val::Vector(v.clone())),
            Operand::Var(n) | Operand::Param(n) => self
                .scalars
                .get(n)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("missing parameter `{n}`"))),
            other => Err(Error::Semantic(format!("`{other}` is not a value"))),
        }
    }

    fn vector(&self, o: &Operand) -> Result<Vec<f32>> {
        match self.val(o)? {
            Val::Vector(v) => Ok(v),
            _ => Err(Error::Validation(format!("`{o}` is not a vector"))),
        }
    }

    fn int(&self, o: &Operand) -> Result<i64> {
        match self.val(o)? {
            Val::Int(i) => Ok(i),
            _ => Err(Error::Validation(format!("`{o}` is not an integer"))),
        }
    }

    fn count(&self, o: &Operand) -> Result<usize> {
        let i = self.int(o)?;
        usize::try_from(i)
            .map_err(|_| Error::Validation(format!("`{o}` must not be negative, got {i}")))
    }

    fn number(&self, o: &Operand) -> Result<f32> {
        match self.val(o)? {
            Val::Int(i) => Ok(i as f32),
            Val::Float(f) => Ok(f as f32),
            _ => Err(Error::Validation(format!("`{o}` is not a number"))),
        }
    }

    fn set(&self, name: &str) -> Result<&VertexSet> {
        self.sets
            .get(name)
            .and_then(BlockResult::set)
            .ok_or_else(|| Error::Semantic(format!("`{name}` is not a vertex set")))
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        o => o,
    }
}

fn to_predicate(e: &Expr, env: &Env) -> Result<Predicate> {
    Ok(match e {
        Expr::And(a, b) => Predicate::And(
            Box::new(to_predicate(a, env)?),
            Box::new(to_predicate(b, env)?),
        ),
        Expr::Or(a, b) => to_predicate(a, env)?.or(to_predicate(b, env)?),
        Expr::Not(a) => to_predicate(a, env)?.negate(),
        Expr::Cmp { left, op, right } => {
            let (attr, op, other) = match (left, right) {
                (Operand::Attr { attr, .. }, o) => (attr, *op, o),
                (o, Operand::Attr { attr, .. }) => (attr, flip(*op), o),
                _ => {
                    return Err(Error::Semantic(format!(
                        "comparison without an attribute: `{e}`"
                    )))
                }
            };
            let value = env.val(other)?.scalar().ok_or_else(|| {
                Error::Semantic(format!("cannot compare an attribute with a vector: `{e}`"))
            })?;
            Predicate::cmp(attr.as_str(), op, value)
        }
    })
}

fn conjoin(preds: &[Expr], env: &Env) -> Result<Predicate> {
    let mut p = Predicate::True;
    for e in preds {
        p = p.and(to_predicate(e, env)?);
    }
    Ok(p)
}

fn path_of(bp: &BlockPlan, env: &Env) -> Result<PathPattern> {
    let mut nodes = Vec::with_capacity(bp.nodes.len());
    for n in &bp.nodes {
        let source = match &n.label {
            Label::Any => NodeSource::Any,
            Label::Type(t) => NodeSource::Type(t.clone()),
            Label::Set(s) => NodeSource::Set(env.set(s)?.clone()),
        };
        nodes.push(NodePattern {
            alias: n.alias.clone(),
            source,
            pred: conjoin(&n.preds, env)?,
        });
    }
    Ok(PathPattern {
        nodes,
        edges: bp.edges.clone(),
    })
}

fn alias(bp: &BlockPlan, pos: usize) -> &str {
    bp.nodes[pos]
        .alias
        .as_deref()
        .expect("searched positions are aliased")
}

/// Embedding attributes named `attr` on the types a node may bind.
fn node_attrs(view: &ReadView, node: &NodePattern, attr: &str) -> Vec<AttrRef> {
    let cat = view.catalog();
    let types: Vec<&str> = match &node.source {
        NodeSource::Type(t) => vec![t.as_str()],
        NodeSource::Set(s) => s
            .vertex_types()
            .into_iter()
            .map(|t| cat.vertex_type_by_id(t).name.as_str())
            .collect(),
        NodeSource::Any => cat.vertex_types.iter().map(|t| t.name.as_str()).collect(),
    };
    types
        .into_iter()
        .filter(|t| {
            cat.vertex_type(t)
                .is_ok_and(|vt| vt.embedding(attr).is_some())
        })
        .map(|t| AttrRef::new(t, attr))
        .collect()
}

fn run_block(
    view: &ReadView,
    bp: &BlockPlan,
    env: &Env,
    dist: Option<&Coordinator>,
) -> Result<BlockResult> {
    let path = path_of(bp, env)?;
    let unfiltered = path.edges.is_empty() && path.nodes[0].pred.is_true();
    match &bp.kind {
        BlockKind::Select { pos } => {
            let m = pattern_match(view, &path)?;
            Ok(BlockResult::Set {
                set: m.sets[*pos].clone(),
                output: None,
            })
        }
        BlockKind::TopK {
            pos,
            attr,
            query,
            k,
        } => {
            let q = env.vector(query)?;
            let k = env.count(k)?;
            let out = match (&path.nodes[0].source, unfiltered, dist) {
                (NodeSource::Type(t), _, Some(c)) if path.edges.is_empty() => {
                    let opts = DistOptions {
                        predicate: Some(path.nodes[0].pred.clone()).filter(|p| !p.is_true()),
                        ..Default::default()
                    };
                    c.search(
                        view,
                        &[AttrRef::new(t.as_str(), attr.as_str())],
                        &q,
                        k,
                        &opts,
                    )?
                }
                (_, _, Some(c)) => {
                    let m = pattern_match(view, &path)?;
                    let attrs = node_attrs(view, &path.nodes[*pos], attr);
                    if attrs.is_empty() {
                        SearchOutput::default()
                    } else {
                        let opts = DistOptions {
                            filter: Some(m.sets[*pos].clone()),
                            ..Default::default()
                        };
                        c.search(view, &attrs, &q, k, &opts)?
                    }
                }
                (NodeSource::Type(t), true, None) => vector_search(
                    view,
                    &[AttrRef::new(t.as_str(), attr.as_str())],
                    &q,
                    k,
                    &SearchOptions::default(),
                )?,
                _ => pattern_filtered_topk(view, &path, alias(bp, *pos), attr, &q, k, None)?,
            };
            Ok(BlockResult::Set {
                set: out.vertex_set(view.graph().segment_capacity()),
                output: Some(out),
            })
        }
        BlockKind::Range {
            pos,
            attr,
            query,
            threshold,
        } => {
            let q = env.vector(query)?;
            let threshold = env.number(threshold)?;
            let attrs = node_attrs(view, &path.nodes[*pos], attr);
            if attrs.is_empty() {
                return Ok(BlockResult::Set {
                    set: VertexSet::for_graph(view.graph()),
                    output: Some(SearchOutput::default()),
                });
            }
            let out = if unfiltered && matches!(path.nodes[0].source, NodeSource::Type(_)) {
                range_query(view, &attrs, &q, threshold, None)?
            } else {
                let m = pattern_match(view, &path)?;
                range_query(view, &attrs, &q, threshold, Some(&m.sets[*pos]))?
            };
            Ok(BlockResult::Set {
                set: out.vertex_set(view.graph().segment_capacity()),
                output: Some(out),
            })
        }
        BlockKind::Join {
            s,
            s_attr,
            t,
            t_attr,
            k,
        } => {
            let k = env.count(k)?;
            Ok(BlockResult::Pairs(similarity_join(
                view,
                &path,
                alias(bp, *s),
                s_attr,
                alias(bp, *t),
                t_attr,
                k,
            )?))
        }
    }
}

fn run_vector_search(
    view: &ReadView,
    call: &VectorSearchCall,
    env: &mut Env,
    dist: Option<&Coordinator>,
) -> Result<BlockResult> {
    let attrs: Vec<AttrRef> = call
        .attrs
        .iter()
        .map(|(t, a)| AttrRef::new(t.as_str(), a.as_str()))
        .collect();
    let q = env.vector(&call.query)?;
    let k = env.count(&call.k)?;
    let mut opts = SearchOptions::default();
    if let Some(f) = &call.filter {
        opts.filter = Some(env.set(f)?.clone());
    }
    if let Some(ef) = &call.ef {
        opts.ef = Some(env.count(ef)?);
    }
    let out = match dist {
        Some(c) => c.search(
            view,
            &attrs,
            &q,
            k,
            &DistOptions {
                ef: opts.ef,
                predicate: None,
                filter: opts.filter,
            },
        )?,
        None => vector_search(view, &attrs, &q, k, &opts)?,
    };
    if let Some(m) = &call.distance_map {
        env.maps
            .entry(m.clone())
            .or_default()
            .absorb(&out.distance_map());
    }
    Ok(BlockResult::Set {
        set: out.vertex_set(view.graph().segment_capacity()),
        output: Some(out),
    })
}

/// First line of a statement's canonical text, for error messages.
fn headline(s: &ProcStmt) -> String {
    let text = s.to_string();
    let first = text.lines().next().unwrap_or_default().trim_end();
    first.to_string()
}

fn wrap(stmt: &Spanned<ProcStmt>, e: Error) -> Error {
    match e {
        Error::Runtime { .. } | Error::Semantic(_) => e,
        other => Error::Runtime {
            statement: format!("{} (line {})", headline(&stmt.node), stmt.pos.line),
            message: other.to_string(),
        },
    }
}

/// Parsed-statement outcomes of [`Engine::execute`].
#[derive(Debug, Clone)]
pub enum Outcome {
    /// A DDL statement was applied.
    Applied(String),
    /// A loading job or procedure was registered.
    Defined(String),
    Plan(QueryPlan),
    Result(Json),
}

/// Holds a graph plus the procedures, loading jobs and algorithms defined
/// against it.
#[derive(Debug)]
pub struct Engine {
    graph: Graph,
    procedures: BTreeMap<String, Procedure>,
    jobs: BTreeMap<String, LoadJob>,
    algorithms: AlgorithmRegistry,
    coordinator: Option<Arc<Coordinator>>,
}

impl Engine {
    pub fn new(graph: Graph) -> Self {
        Self {
            graph,
            procedures: BTreeMap::new(),
            jobs: BTreeMap::new(),
            algorithms: AlgorithmRegistry::default(),
            coordinator: None,
        }
    }

    /// Routes top-k searches through a distributed coordinator.
    pub fn with_coordinator(mut self, coordinator: Arc<Coordinator>) -> Self {
        self.coordinator = Some(coordinator);
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn algorithms_mut(&mut self) -> &mut AlgorithmRegistry {
        &mut self.algorithms
    }

    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.get(name)
    }

    pub fn load_job(&self, name: &str) -> Option<&LoadJob> {
        self.jobs.get(name)
    }

    /// Parses and runs every statement in `text`.
    pub fn execute(&mut self, text: &str, params: &Params) -> Result<Vec<Outcome>> {
        let script = parse(text)?;
        script
            .statements
            .iter()
            .map(|s| self.apply(&s.node, params))
            .collect()
    }

    pub fn apply(&mut self, stmt: &Statement, params: &Params) -> Result<Outcome> {
        let g = &self.graph;
        match stmt {
            Statement::CreateVertex { name, columns } => {
                let mut def = VertexTypeDef::new(name.as_str());
                for c in columns {
                    def = if c.primary_key {
                        def.key(c.name.as_str())
                    } else {
                        def.attr(c.name.as_str(), c.ty)
                    };
                }
                g.define_vertex_type(def)?;
                Ok(Outcome::Applied(format!("vertex type {name}")))
            }
            Statement::CreateEdge {
                name,
                directed,
                endpoints,
            } => {
                let eps: Vec<(&str, &str)> = endpoints
                    .iter()
                    .map(|(a, b)| (a.as_str(), b.as_str()))
                    .collect();
                g.define_edge_type(name, &eps, *directed)?;
                Ok(Outcome::Applied(format!("edge type {name}")))
            }
            Statement::CreateEmbeddingSpace { name, meta } => {
                g.create_embedding_space(name, meta.clone())?;
                Ok(Outcome::Applied(format!("embedding space {name}")))
            }
            Statement::AddEmbeddingAttr {
                vtype,
                attr,
                source,
            } => {
                let src = match source {
                    EmbeddingDecl::Meta(m) => EmbeddingSource::Meta(m.clone()),
                    EmbeddingDecl::Space(s) => EmbeddingSource::Space(s.clone()),
                };
                g.add_embedding_attribute(vtype, attr, src)?;
                Ok(Outcome::Applied(format!(
                    "embedding attribute {vtype}.{attr}"
                )))
            }
            Statement::LoadJob(job) => {
                for l in &job.loads {
                    loader::check_load(&g.catalog(), l)?;
                }
                self.jobs.insert(job.name.clone(), job.clone());
                Ok(Outcome::Defined(format!("loading job {}", job.name)))
            }
            Statement::Procedure(p) => {
                self.check_procedure(p)?;
                self.procedures.insert(p.name.clone(), p.clone());
                Ok(Outcome::Defined(format!("query {}", p.name)))
            }
            Statement::Explain(b) => Ok(Outcome::Plan(
                plan_block(b, &g.catalog(), &Scope::open())?.plan,
            )),
            Statement::Select(b) => {
                let view = g.read();
                let r = self.run_select(&view, b, params)?;
                Ok(Outcome::Result(r.to_json(&view)))
            }
        }
    }

    /// Plans and runs one block at the given read view.
    pub fn run_select(
        &self,
        view: &ReadView,
        block: &SelectBlock,
        params: &Params,
    ) -> Result<BlockResult> {
        let bp = plan_block(block, view.catalog(), &Scope::open())?;
        run_block(
            view,
            &bp,
            &Env::from_params(params)?,
            self.coordinator.as_deref(),
        )
    }

    /// Plan text for a SELECT, EXPLAIN or procedure statement.
    pub fn explain(&self, text: &str) -> Result<String> {
        let script = parse(text)?;
        let cat = self.graph.catalog();
        let mut out = String::new();
        for s in &script.statements {
            match &s.node {
                Statement::Select(b) | Statement::Explain(b) => {
                    out.push_str(&plan_block(b, &cat, &Scope::open())?.plan.to_string())
                }
                Statement::Procedure(p) => {
                    let mut scope = self.procedure_scope(p);
                    explain_body(&p.body, &cat, &mut scope, &mut out)?;
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn procedure_scope(&self, p: &Procedure) -> Scope {
        let mut scope = Scope::default();
        for d in &p.params {
            scope.define(&d.name, d.ty.into());
        }
        scope
    }

    fn check_procedure(&self, p: &Procedure) -> Result<()> {
        let cat = self.graph.catalog();
        let mut scope = self.procedure_scope(p);
        check_body(&p.body, &cat, &mut scope, &self.algorithms)
    }

    /// Runs a registered procedure and returns its PRINT output, one JSON
    /// object per PRINT executed.
    pub fn run_query(&self, name: &str, params: &Params) -> Result<Vec<Json>> {
        let p = self
            .procedures
            .get(name)
            .ok_or_else(|| Error::Semantic(format!("no query named `{name}`")))?;
        self.check_procedure(p)?;
        let mut env = Env::default();
        for d in &p.params {
            let raw = params
                .get(&d.name)
                .ok_or_else(|| Error::Validation(format!("missing parameter `{}`", d.name)))?;
            let v = Val::from_json(raw)
                .filter(|v| {
                    v.kind() == d.ty.into()
                        || (d.ty == ParamType::Float && v.kind() == NameKind::Int)
                })
                .ok_or_else(|| {
                    Error::Validation(format!("parameter `{}` must be {}", d.name, d.ty))
                })?;
            env.scalars.insert(d.name.clone(), v);
        }
        let mut view = self.graph.read();
        let mut printed = Vec::new();
        self.run_body(&p.body, &mut env, &mut view, &mut printed)?;
        Ok(printed)
    }

    fn run_body(
        &self,
        body: &[Spanned<ProcStmt>],
        env: &mut Env,
        view: &mut ReadView,
        out: &mut Vec<Json>,
    ) -> Result<()> {
        for stmt in body {
            self.run_stmt(stmt, env, view, out)
                .map_err(|e| wrap(stmt, e))?;
        }
        Ok(())
    }

    fn run_stmt(
        &self,
        stmt: &Spanned<ProcStmt>,
        env: &mut Env,
        view: &mut ReadView,
        out: &mut Vec<Json>,
    ) -> Result<()> {
        match &stmt.node {
            ProcStmt::DeclareMap(m) => {
                env.maps.insert(m.clone(), DistanceMap::default());
            }
            ProcStmt::Assign { var, rhs } => match rhs {
                Rhs::Select(b) => {
                    let mut scope = Scope::default();
                    for (name, r) in &env.sets {
                        if r.set().is_some() {
                            scope.define(name, NameKind::Set);
                        }
                    }
                    for (name, v) in &env.scalars {
                        scope.define(name, v.kind());
                    }
                    let bp = plan_block(b, view.catalog(), &scope)?;
                    let r = run_block(view, &bp, env, self.coordinator.as_deref())?;
                    env.sets.insert(var.clone(), r);
                }
                Rhs::VectorSearch(call) => {
                    let r = run_vector_search(view, call, env, self.coordinator.as_deref())?;
                    env.sets.insert(var.clone(), r);
                }
                Rhs::Call { name, args } => {
                    let f = self.algorithms.get(name).ok_or_else(|| {
                        Error::Semantic(format!("no algorithm named `{name}` is registered"))
                    })?;
                    let args: Vec<Val> = args
                        .iter()
                        .map(|a| match a {
                            Operand::List(xs) => Ok(Val::Str(
                                xs.iter()
                                    .map(|x| match x {
                                        Value::Str(s) => s.clone(),
                                        v => v.to_string(),
                                    })
                                    .collect::<Vec<_>>()
                                    .join(","),
                            )),
                            o => env.val(o),
                        })
                        .collect::<Result<_>>()?;
                    let v = f(&self.graph, &args)?;
                    env.scalars.insert(var.clone(), v);
                    // The algorithm may have written attributes.
                    *view = self.graph.read();
                }
            },
            ProcStmt::Print(PrintItem::Var(v)) => {
                let j = match (env.sets.get(v), env.scalars.get(v)) {
                    (Some(r), _) => r.to_json(view),
                    (None, Some(s)) => val_json(s),
                    (None, None) => return Err(Error::Semantic(format!("`{v}` is not assigned"))),
                };
                out.push(json!({ v: j }));
            }
            ProcStmt::Print(PrintItem::Global(m)) => {
                let map = env
                    .maps
                    .get(m)
                    .ok_or_else(|| Error::Semantic(format!("`@@{m}` is not declared")))?;
                let entries: Vec<Json> = map
                    .iter()
                    .map(|(v, d)| json!({ "vertex": vertex_json(view, v), "distance": d }))
                    .collect();
                out.push(json!({ format!("@@{m}"): entries }));
            }
            ProcStmt::Foreach { var, lo, hi, body } => {
                let (lo, hi) = (env.int(lo)?, env.int(hi)?);
                for i in lo..=hi {
                    env.scalars.insert(var.clone(), Val::Int(i));
                    self.run_body(body, env, view, out)?;
                }
            }
        }
        Ok(())
    }

    /// Runs a registered loading job with file variables bound to paths.
    pub fn run_load_job(
        &self,
        name: &str,
        files: &BTreeMap<String, PathBuf>,
    ) -> Result<LoadReport> {
        let job = self
            .jobs
            .get(name)
            .ok_or_else(|| Error::Semantic(format!("no loading job named `{name}`")))?;
        loader::run_job(&self.graph, job, files)
    }
}

fn val_json(v: &Val) -> Json {
    match v {
        Val::Int(i) => json!(i),
        Val::Float(f) => json!(f),
        Val::Str(s) => json!(s),
        Val::Bool(b) => json!(b),
        Val::Vector(x) => json!(x),
    }
}

fn check_body(
    body: &[Spanned<ProcStmt>],
    cat: &crate::schema::Catalog,
    scope: &mut Scope,
    algorithms: &AlgorithmRegistry,
) -> Result<()> {
    let at = |s: &Spanned<ProcStmt>, e: Error| match e {
        Error::Semantic(m) => Error::Semantic(format!("{m} (line {})", s.pos.line)),
        e => e,
    };
    for s in body {
        let r: Result<()> = (|| {
            match &s.node {
                ProcStmt::DeclareMap(m) => {
                    scope.define(m, NameKind::Map);
                    Ok(())
                }
                ProcStmt::Assign { var, rhs } => {
                    match rhs {
                        Rhs::Select(b) => {
                            let bp = plan_block(b, cat, scope)?;
                            if matches!(bp.kind, BlockKind::Join { .. }) {
                                return Err(Error::Semantic(
                                    "similarity join results cannot be assigned to a vertex set"
                                        .into(),
                                ));
                            }
                            scope.define(var, NameKind::Set);
                        }
                        Rhs::VectorSearch(c) => {
                            plan_vector_search(c, cat, scope)?;
                            scope.define(var, NameKind::Set);
                        }
                        Rhs::Call { name, .. } => {
                            if algorithms.get(name).is_none() {
                                return Err(Error::Semantic(format!(
                                    "no algorithm named `{name}` is registered"
                                )));
                            }
                            scope.define(var, NameKind::Int);
                        }
                    }
                    Ok(())
                }
                ProcStmt::Print(PrintItem::Var(v)) => match scope.kind(v) {
                    Some(_) => Ok(()),
                    None => Err(Error::Semantic(format!(
                        "`{v}` is printed before it is assigned"
                    ))),
                },
                ProcStmt::Print(PrintItem::Global(m)) => match scope.kind(m) {
                    Some(NameKind::Map) => Ok(()),
                    _ => Err(Error::Semantic(format!("`@@{m}` is not declared"))),
                },
                ProcStmt::Foreach { var, lo, hi, body } => {
                    for o in [lo, hi] {
                        match o {
                            Operand::Lit(Value::Int(_)) => {}
                            Operand::Var(n) | Operand::Param(n)
                                if scope.kind(n) == Some(NameKind::Int) => {}
                            other => {
                                return Err(Error::Semantic(format!(
                                    "RANGE bound `{other}` is not an integer"
                                )))
                            }
                        }
                    }
                    scope.define(var, NameKind::Int);
                    check_body(body, cat, scope, algorithms)
                }
            }?;
            Ok(())
        })();
        r.map_err(|e| at(s, e))?;
    }
    Ok(())
}

fn explain_body(
    body: &[Spanned<ProcStmt>],
    cat: &crate::schema::Catalog,
    scope: &mut Scope,
    out: &mut String,
) -> Result<()> {
    for s in body {
        match &s.node {
            ProcStmt::DeclareMap(m) => scope.define(m, NameKind::Map),
            ProcStmt::Assign { var, rhs } => {
                let plan = match rhs {
                    Rhs::Select(b) => Some(plan_block(b, cat, scope)?.plan),
                    Rhs::VectorSearch(c) => Some(plan_vector_search(c, cat, scope)?),
                    Rhs::Call { .. } => None,
                };
                scope.define(
                    var,
                    if matches!(rhs, Rhs::Call { .. }) {
                        NameKind::Int
                    } else {
                        NameKind::Set
                    },
                );
                if let Some(p) = plan {
                    out.push_str(&format!("{var} =\n"));
                    for l in p.lines() {
                        out.push_str(&format!("  {l}\n"));
                    }
                }
            }
            ProcStmt::Print(_) => {}
            ProcStmt::Foreach { var, body, .. } => {
                scope.define(var, NameKind::Int);
                explain_body(body, cat, scope, out)?;
            }
        }
    }
    Ok(())
}
