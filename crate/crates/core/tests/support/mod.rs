//! Naive reference model for integration tests. Everything here is a
//! linear scan or a full path enumeration over plain maps.
#![allow(dead_code)]

pub mod dist;
pub mod instance;
pub mod mvcc;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use graphvec::predicate::{CmpOp, Predicate};
use graphvec::query::{NodePattern, PathPattern, SearchOutput};
use graphvec::schema::{Metric, Value};
use graphvec::storage::{Direction, ReadView, VertexId, WriteOp};

pub type Key = (String, i64);

pub fn key_of(view: &ReadView, v: VertexId) -> Key {
    let name = view.catalog().vertex_type_by_id(v.vtype).name.clone();
    (
        name,
        view.key_of(v).expect("engine returned an unknown vertex"),
    )
}

pub fn hits(view: &ReadView, out: &SearchOutput) -> Vec<(Key, f32)> {
    out.hits
        .iter()
        .map(|h| (key_of(view, h.vertex), h.distance))
        .collect()
}

// ---- distances, written out independently of the engine ----

pub fn prepare(metric: Metric, v: &[f32]) -> Vec<f32> {
    let mut out = v.to_vec();
    if metric == Metric::Cosine {
        let mut s = 0.0f32;
        for x in &out {
            s += x * x;
        }
        let n = s.sqrt();
        if n > 0.0 {
            for x in out.iter_mut() {
                *x /= n;
            }
        }
    }
    out
}

pub fn distance(metric: Metric, a: &[f32], b: &[f32]) -> f32 {
    match metric {
        Metric::L2 => {
            let mut s = 0.0f32;
            for (x, y) in a.iter().zip(b) {
                s += (x - y) * (x - y);
            }
            s.sqrt()
        }
        Metric::Cosine | Metric::InnerProduct => {
            let mut s = 0.0f32;
            for (x, y) in a.iter().zip(b) {
                s += x * y;
            }
            if metric == Metric::Cosine {
                1.0 - s
            } else {
                -s
            }
        }
    }
}

fn cmp_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Float(y)) => (*x as f64).partial_cmp(y),
        (Value::Float(x), Value::Int(y)) => x.partial_cmp(&(*y as f64)),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        _ => None,
    }
}

/// Null or incomparable operands make a comparison false.
pub fn eval(pred: &Predicate, attrs: &BTreeMap<String, Value>) -> bool {
    match pred {
        Predicate::True => true,
        Predicate::Cmp { attr, op, value } => {
            let Some(v) = attrs.get(attr) else {
                return false;
            };
            let Some(o) = cmp_values(v, value) else {
                return false;
            };
            match op {
                CmpOp::Eq => o == Ordering::Equal,
                CmpOp::Ne => o != Ordering::Equal,
                CmpOp::Lt => o == Ordering::Less,
                CmpOp::Le => o != Ordering::Greater,
                CmpOp::Gt => o == Ordering::Greater,
                CmpOp::Ge => o != Ordering::Less,
            }
        }
        Predicate::And(a, b) => eval(a, attrs) && eval(b, attrs),
        Predicate::Or(a, b) => eval(a, attrs) || eval(b, attrs),
        Predicate::Not(a) => !eval(a, attrs),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RefVertex {
    pub attrs: BTreeMap<String, Value>,
    pub emb: BTreeMap<String, Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct RefNode {
    pub vtype: Option<String>,
    pub pred: Predicate,
}

#[derive(Debug, Clone)]
pub struct RefPattern {
    pub nodes: Vec<RefNode>,
    pub edges: Vec<(String, Direction)>,
}

impl RefPattern {
    pub fn alias(i: usize) -> String {
        format!("n{i}")
    }

    pub fn to_engine(&self) -> PathPattern {
        let node = |i: usize| {
            let n = &self.nodes[i];
            let base = match &n.vtype {
                Some(t) => NodePattern::typed(t),
                None => NodePattern::any(),
            };
            let base = base.alias(&Self::alias(i));
            if n.pred.is_true() {
                base
            } else {
                base.filter(n.pred.clone())
            }
        };
        let mut p = PathPattern::start(node(0));
        for (i, (etype, dir)) in self.edges.iter().enumerate() {
            p = match dir {
                Direction::Out => p.out(etype, node(i + 1)),
                Direction::In => p.inbound(etype, node(i + 1)),
            };
        }
        p
    }
}

/// The graph as a flat map of vertices plus an edge list, mutated by the
/// same write operations the engine accepts.
#[derive(Debug, Clone, Default)]
pub struct RefGraph {
    type_order: Vec<String>,
    key_attr: BTreeMap<String, String>,
    directed: BTreeMap<String, bool>,
    metrics: BTreeMap<(String, String), (Metric, usize)>,
    ordinals: BTreeMap<Key, u32>,
    next_ordinal: BTreeMap<String, u32>,
    pub vertices: BTreeMap<Key, RefVertex>,
    pub edges: Vec<(String, Key, Key)>,
}

impl RefGraph {
    pub fn vertex_type(&mut self, name: &str, key_attr: &str) {
        self.type_order.push(name.to_string());
        self.key_attr.insert(name.to_string(), key_attr.to_string());
    }

    pub fn edge_type(&mut self, name: &str, directed: bool) {
        self.directed.insert(name.to_string(), directed);
    }

    pub fn embedding(&mut self, vtype: &str, attr: &str, metric: Metric, dim: usize) {
        self.metrics
            .insert((vtype.to_string(), attr.to_string()), (metric, dim));
    }

    /// Engine order of vertex ids: type definition order, then creation order.
    pub fn rank(&self, k: &Key) -> (usize, u32) {
        let t = self
            .type_order
            .iter()
            .position(|t| *t == k.0)
            .expect("known type");
        (t, self.ordinals[k])
    }

    pub fn is_live(&self, k: &Key) -> bool {
        self.vertices.contains_key(k)
    }

    pub fn live_keys(&self, vtype: &str) -> Vec<i64> {
        self.vertices
            .keys()
            .filter(|k| k.0 == vtype)
            .map(|k| k.1)
            .collect()
    }

    pub fn emb(&self, k: &Key, attr: &str) -> Option<&Vec<f32>> {
        self.vertices.get(k).and_then(|v| v.emb.get(attr))
    }

    /// Applies one transaction. Returns false, leaving the model untouched,
    /// when the engine would reject it.
    pub fn apply(&mut self, ops: &[WriteOp]) -> bool {
        let mut next = self.clone();
        for op in ops {
            if !next.apply_one(op) {
                return false;
            }
        }
        *self = next;
        true
    }

    fn apply_one(&mut self, op: &WriteOp) -> bool {
        match op {
            WriteOp::UpsertVertex { vtype, key, attrs } => {
                let Some(key_attr) = self.key_attr.get(vtype).cloned() else {
                    return false;
                };
                let k = (vtype.clone(), *key);
                if !self.ordinals.contains_key(&k) {
                    let n = self.next_ordinal.entry(vtype.clone()).or_insert(0);
                    self.ordinals.insert(k.clone(), *n);
                    *n += 1;
                }
                let v = self.vertices.entry(k).or_default();
                v.attrs.insert(key_attr, Value::Int(*key));
                for (name, value) in attrs {
                    v.attrs.insert(name.clone(), value.clone());
                }
                true
            }
            WriteOp::DeleteVertex { vtype, key } => {
                let k = (vtype.clone(), *key);
                if self.vertices.remove(&k).is_none() {
                    return false;
                }
                self.edges.retain(|(_, a, b)| *a != k && *b != k);
                true
            }
            WriteOp::AddEdge {
                etype,
                from,
                to,
                types,
            } => {
                let Some((ft, tt)) = types else { return false };
                let (a, b) = ((ft.clone(), *from), (tt.clone(), *to));
                if !self.is_live(&a) || !self.is_live(&b) || !self.directed.contains_key(etype) {
                    return false;
                }
                self.edges.push((etype.clone(), a, b));
                true
            }
            WriteOp::SetEmbedding {
                vtype,
                key,
                attr,
                value,
            } => {
                let Some(&(metric, dim)) = self.metrics.get(&(vtype.clone(), attr.clone())) else {
                    return false;
                };
                if value.len() != dim {
                    return false;
                }
                match self.vertices.get_mut(&(vtype.clone(), *key)) {
                    Some(v) => {
                        v.emb.insert(attr.clone(), prepare(metric, value));
                        true
                    }
                    None => false,
                }
            }
            WriteOp::DeleteEmbedding { vtype, key, attr } => {
                match self.vertices.get_mut(&(vtype.clone(), *key)) {
                    Some(v) => {
                        v.emb.remove(attr);
                        true
                    }
                    None => false,
                }
            }
        }
    }

    fn metric_of(&self, attrs: &[(&str, &str)]) -> Metric {
        self.metrics[&(attrs[0].0.to_string(), attrs[0].1.to_string())].0
    }

    fn rank_hits(&self, hits: &mut [(Key, f32)]) {
        hits.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(self.rank(&a.0).cmp(&self.rank(&b.0)))
        });
    }

    /// Every `(key, distance)` of the listed attributes that passes `filter`.
    pub fn scored(
        &self,
        attrs: &[(&str, &str)],
        query: &[f32],
        filter: Option<&BTreeSet<Key>>,
    ) -> Vec<(Key, f32)> {
        let metric = self.metric_of(attrs);
        let q = prepare(metric, query);
        let mut out = Vec::new();
        for (k, v) in &self.vertices {
            if filter.is_some_and(|f| !f.contains(k)) {
                continue;
            }
            for (vt, attr) in attrs {
                if k.0 == *vt {
                    if let Some(x) = v.emb.get(*attr) {
                        out.push((k.clone(), distance(metric, &q, x)));
                    }
                }
            }
        }
        self.rank_hits(&mut out);
        out
    }

    pub fn topk(
        &self,
        attrs: &[(&str, &str)],
        query: &[f32],
        k: usize,
        filter: Option<&BTreeSet<Key>>,
    ) -> Vec<(Key, f32)> {
        let mut all = self.scored(attrs, query, filter);
        all.truncate(k);
        all
    }

    pub fn range(
        &self,
        attrs: &[(&str, &str)],
        query: &[f32],
        threshold: f32,
        filter: Option<&BTreeSet<Key>>,
    ) -> Vec<(Key, f32)> {
        self.scored(attrs, query, filter)
            .into_iter()
            .filter(|(_, d)| *d < threshold)
            .collect()
    }

    pub fn select(&self, vtype: &str, pred: &Predicate) -> BTreeSet<Key> {
        self.vertices
            .iter()
            .filter(|(k, v)| k.0 == vtype && eval(pred, &v.attrs))
            .map(|(k, _)| k.clone())
            .collect()
    }

    fn step(&self, from: &Key, etype: &str, dir: Direction) -> Vec<Key> {
        let undirected = !self.directed[etype];
        let mut out = Vec::new();
        for (e, a, b) in &self.edges {
            if e != etype {
                continue;
            }
            let fwd = match dir {
                Direction::Out => a == from,
                Direction::In => b == from,
            };
            let bwd = match dir {
                Direction::Out => b == from,
                Direction::In => a == from,
            };
            if fwd {
                out.push(if dir == Direction::Out {
                    b.clone()
                } else {
                    a.clone()
                });
            }
            if undirected && bwd {
                out.push(if dir == Direction::Out {
                    a.clone()
                } else {
                    b.clone()
                });
            }
        }
        out
    }

    fn node_ok(&self, n: &RefNode, k: &Key) -> bool {
        n.vtype.as_ref().is_none_or(|t| *t == k.0) && eval(&n.pred, &self.vertices[k].attrs)
    }

    /// Every walk matching the pattern, as one key per position.
    pub fn walks(&self, p: &RefPattern) -> Vec<Vec<Key>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        for k in self.vertices.keys() {
            if self.node_ok(&p.nodes[0], k) {
                path.push(k.clone());
                self.extend(p, &mut path, &mut out);
                path.pop();
            }
        }
        out
    }

    fn extend(&self, p: &RefPattern, path: &mut Vec<Key>, out: &mut Vec<Vec<Key>>) {
        let i = path.len() - 1;
        if i == p.edges.len() {
            out.push(path.clone());
            return;
        }
        let (etype, dir) = &p.edges[i];
        let mut next = self.step(&path[i], etype, *dir);
        next.sort();
        next.dedup();
        for n in next {
            if self.node_ok(&p.nodes[i + 1], &n) {
                path.push(n);
                self.extend(p, path, out);
                path.pop();
            }
        }
    }

    pub fn pattern_sets(&self, p: &RefPattern) -> Vec<BTreeSet<Key>> {
        let mut sets = vec![BTreeSet::new(); p.nodes.len()];
        for w in self.walks(p) {
            for (i, k) in w.into_iter().enumerate() {
                sets[i].insert(k);
            }
        }
        sets
    }

    /// All-pairs brute force over the distinct `(s, t)` pairs of every walk.
    pub fn join(
        &self,
        p: &RefPattern,
        si: usize,
        s_attr: &str,
        ti: usize,
        t_attr: &str,
        k: usize,
    ) -> Vec<(Key, Key, f32)> {
        let pairs: BTreeSet<(Key, Key)> = self
            .walks(p)
            .into_iter()
            .map(|w| (w[si].clone(), w[ti].clone()))
            .collect();
        let metric = self
            .metrics
            .iter()
            .find(|((_, a), _)| a == s_attr)
            .map(|(_, m)| m.0)
            .expect("join attribute");
        let mut out: Vec<(Key, Key, f32)> = pairs
            .into_iter()
            .filter_map(|(s, t)| {
                let a = self.emb(&s, s_attr)?;
                let b = self.emb(&t, t_attr)?;
                let d = distance(metric, a, b);
                Some((s, t, d))
            })
            .collect();
        out.sort_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(self.rank(&a.0).cmp(&self.rank(&b.0)))
                .then(self.rank(&a.1).cmp(&self.rank(&b.1)))
        });
        out.truncate(k);
        out
    }
}

/// Bit-level equality of ranked lists, with a readable first difference.
pub fn same_hits(what: &str, got: &[(Key, f32)], want: &[(Key, f32)]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!(
            "{what}: {} results, oracle has {}",
            got.len(),
            want.len()
        ));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.0 != w.0 || g.1.to_bits() != w.1.to_bits() {
            return Err(format!("{what}: rank {i} is {g:?}, oracle has {w:?}"));
        }
    }
    Ok(())
}
