//! Linear path patterns used as pre-filters and for similarity joins.
//!
//! Matching is homomorphic (a vertex may bind several positions). For a
//! linear path the set of vertices that can bind position `i` in some full
//! match is exactly the forward-reachable set at `i` pruned by backward
//! reachability from the end, so per-alias sets never need the bindings
//! themselves.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::search::{vector_search, EmbeddingReader, SearchOptions};
use super::{PairHeap, SearchOutput, VertexSet};
use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::schema::{AttrRef, Catalog, EdgeTypeId, TypeId};
use crate::storage::{Direction, ReadView, VertexId};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeSource {
    /// Any type the adjacent edges allow.
    Any,
    Type(String),
    /// Members of a vertex set variable.
    Set(VertexSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub alias: Option<String>,
    pub source: NodeSource,
    pub pred: Predicate,
}

impl NodePattern {
    pub fn any() -> Self {
        Self {
            alias: None,
            source: NodeSource::Any,
            pred: Predicate::True,
        }
    }

    pub fn typed(vtype: &str) -> Self {
        Self {
            source: NodeSource::Type(vtype.to_string()),
            ..Self::any()
        }
    }

    pub fn set(set: VertexSet) -> Self {
        Self {
            source: NodeSource::Set(set),
            ..Self::any()
        }
    }

    pub fn alias(mut self, alias: &str) -> Self {
        self.alias = Some(alias.to_string());
        self
    }

    pub fn filter(mut self, pred: Predicate) -> Self {
        self.pred = pred;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStep {
    pub etype: String,
    /// `Out` walks `a -[e]-> b`, `In` walks `a <-[e]- b`.
    pub dir: Direction,
}

/// `nodes[0] edges[0] nodes[1] ... edges[n-1] nodes[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub nodes: Vec<NodePattern>,
    pub edges: Vec<EdgeStep>,
}

impl PathPattern {
    pub fn start(node: NodePattern) -> Self {
        Self {
            nodes: vec![node],
            edges: Vec::new(),
        }
    }

    pub fn out(mut self, etype: &str, node: NodePattern) -> Self {
        self.edges.push(EdgeStep {
            etype: etype.to_string(),
            dir: Direction::Out,
        });
        self.nodes.push(node);
        self
    }

    pub fn inbound(mut self, etype: &str, node: NodePattern) -> Self {
        self.edges.push(EdgeStep {
            etype: etype.to_string(),
            dir: Direction::In,
        });
        self.nodes.push(node);
        self
    }

    pub fn position(&self, alias: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.alias.as_deref() == Some(alias))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatch {
    /// Vertices that bind each position in at least one full match.
    pub sets: Vec<VertexSet>,
    pub aliases: Vec<Option<String>>,
    /// Vertex types allowed at each position.
    pub types: Vec<BTreeSet<TypeId>>,
    pub(crate) etypes: Vec<EdgeTypeId>,
    pub(crate) dirs: Vec<Direction>,
}

impl PatternMatch {
    pub fn alias_set(&self, alias: &str) -> Option<&VertexSet> {
        let i = self
            .aliases
            .iter()
            .position(|a| a.as_deref() == Some(alias))?;
        Some(&self.sets[i])
    }

    pub fn last(&self) -> &VertexSet {
        self.sets.last().expect("pattern has a node")
    }

    /// Number of full matches (bindings), counted by dynamic programming.
    pub fn binding_count(&self, view: &ReadView) -> u64 {
        let mut counts: HashMap<VertexId, u64> = self.sets[0].iter().map(|v| (v, 1)).collect();
        for i in 0..self.etypes.len() {
            let mut next: HashMap<VertexId, u64> = HashMap::new();
            for (v, c) in counts {
                for w in view.neighbors(v, self.etypes[i], self.dirs[i]) {
                    if self.sets[i + 1].contains(w) {
                        *next.entry(w).or_default() += c;
                    }
                }
            }
            counts = next;
        }
        counts.values().sum()
    }
}

/// Resolves edge types and narrows the allowed vertex types per position.
fn resolve(cat: &Catalog, p: &PathPattern) -> Result<(Vec<BTreeSet<TypeId>>, Vec<EdgeTypeId>)> {
    if p.nodes.len() != p.edges.len() + 1 {
        return Err(Error::Semantic("malformed path pattern".into()));
    }
    let all: BTreeSet<TypeId> = cat.vertex_types.iter().map(|t| t.id).collect();
    let mut types: Vec<BTreeSet<TypeId>> = p
        .nodes
        .iter()
        .map(|n| match &n.source {
            NodeSource::Any => Ok(all.clone()),
            NodeSource::Type(t) => Ok(BTreeSet::from([cat.vertex_type(t)?.id])),
            NodeSource::Set(s) => Ok(s.vertex_types()),
        })
        .collect::<Result<_>>()?;
    let mut etypes = Vec::with_capacity(p.edges.len());
    for (i, e) in p.edges.iter().enumerate() {
        let et = cat.edge_type(&e.etype)?;
        etypes.push(et.id);
        let mut pairs: Vec<(TypeId, TypeId)> = Vec::new();
        for (f, t) in &et.endpoints {
            let (f, t) = (cat.vertex_type(f)?.id, cat.vertex_type(t)?.id);
            match e.dir {
                Direction::Out => pairs.push((f, t)),
                Direction::In => pairs.push((t, f)),
            }
            if !et.directed {
                match e.dir {
                    Direction::Out => pairs.push((t, f)),
                    Direction::In => pairs.push((f, t)),
                }
            }
        }
        let left: BTreeSet<TypeId> = pairs
            .iter()
            .filter(|(a, b)| types[i].contains(a) && types[i + 1].contains(b))
            .map(|(a, _)| *a)
            .collect();
        let right: BTreeSet<TypeId> = pairs
            .iter()
            .filter(|(a, b)| types[i].contains(a) && types[i + 1].contains(b))
            .map(|(_, b)| *b)
            .collect();
        let explicit = |n: &NodePattern| matches!(n.source, NodeSource::Type(_));
        if left.is_empty() && (explicit(&p.nodes[i]) || explicit(&p.nodes[i + 1])) {
            return Err(Error::Semantic(format!(
                "edge type {} does not connect the vertex types at positions {i} and {}",
                e.etype,
                i + 1
            )));
        }
        types[i] = left;
        types[i + 1] = right;
    }
    // Narrowing position i+1 may shrink what position i can reach.
    for i in (0..p.edges.len()).rev() {
        let et = cat.edge_type_by_id(etypes[i]);
        let mut keep = BTreeSet::new();
        for (f, t) in &et.endpoints {
            let (f, t) = (cat.vertex_type(f)?.id, cat.vertex_type(t)?.id);
            let mut ends = vec![match p.edges[i].dir {
                Direction::Out => (f, t),
                Direction::In => (t, f),
            }];
            if !et.directed {
                ends.push((ends[0].1, ends[0].0));
            }
            for (a, b) in ends {
                if types[i].contains(&a) && types[i + 1].contains(&b) {
                    keep.insert(a);
                }
            }
        }
        types[i] = keep;
    }
    for (n, ts) in p.nodes.iter().zip(&types) {
        if !n.pred.is_true() {
            for t in ts {
                n.pred.check(cat.vertex_type_by_id(*t))?;
            }
        }
    }
    Ok((types, etypes))
}

/// Vertices eligible at one position before any edge constraint.
fn candidates(view: &ReadView, node: &NodePattern, types: &BTreeSet<TypeId>) -> VertexSet {
    let cap = view.graph().segment_capacity();
    let mut out = VertexSet::new(cap);
    match &node.source {
        NodeSource::Set(s) => {
            for (seg, b) in s.segments() {
                if !types.contains(&seg.vtype) {
                    continue;
                }
                let mut bits = view.scan_segment(seg, &node.pred);
                bits.intersect_with(b);
                out.set_segment(seg, bits);
            }
        }
        _ => {
            for t in types {
                for (seg, bits) in view.scan_type(*t, &node.pred) {
                    out.set_segment(seg, bits);
                }
            }
        }
    }
    out
}

/// One expansion step, parallel over the frontier's segments.
fn expand(
    view: &ReadView,
    frontier: &VertexSet,
    etype: EdgeTypeId,
    dir: Direction,
    allowed: &VertexSet,
) -> VertexSet {
    let segs: Vec<_> = frontier.segments().map(|(s, b)| (s, b.clone())).collect();
    let cap = frontier.capacity() as u32;
    let parts: Vec<Vec<VertexId>> = segs
        .par_iter()
        .map(|(seg, bits)| {
            let mut out = Vec::new();
            for i in bits.iter() {
                let v = VertexId::new(seg.vtype, seg.ordinal * cap + i as u32);
                out.extend(
                    view.neighbors(v, etype, dir)
                        .into_iter()
                        .filter(|w| allowed.contains(*w)),
                );
            }
            out
        })
        .collect();
    VertexSet::from_vertices(frontier.capacity(), parts.into_iter().flatten())
}

fn reverse(d: Direction) -> Direction {
    match d {
        Direction::Out => Direction::In,
        Direction::In => Direction::Out,
    }
}

/// Per-position vertex sets of every full match of `pattern`.
pub fn pattern_match(view: &ReadView, pattern: &PathPattern) -> Result<PatternMatch> {
    let (types, etypes) = resolve(view.catalog(), pattern)?;
    let cands: Vec<VertexSet> = pattern
        .nodes
        .iter()
        .zip(&types)
        .map(|(n, t)| candidates(view, n, t))
        .collect();
    let dirs: Vec<Direction> = pattern.edges.iter().map(|e| e.dir).collect();
    let mut sets = vec![cands[0].clone()];
    for i in 0..etypes.len() {
        let next = expand(view, &sets[i], etypes[i], dirs[i], &cands[i + 1]);
        sets.push(next);
    }
    for i in (0..etypes.len()).rev() {
        let back = expand(view, &sets[i + 1], etypes[i], reverse(dirs[i]), &sets[i]);
        sets[i] = back;
    }
    Ok(PatternMatch {
        sets,
        aliases: pattern.nodes.iter().map(|n| n.alias.clone()).collect(),
        types,
        etypes,
        dirs,
    })
}

/// Distinct `(a, b)` pairs bound at positions `i` and `j` by some match,
/// sorted ascending.
pub fn pattern_pairs(
    view: &ReadView,
    m: &PatternMatch,
    i: usize,
    j: usize,
) -> Vec<(VertexId, VertexId)> {
    let (lo, hi) = (i.min(j), i.max(j));
    let cap = m.sets[lo].capacity();
    let starts: Vec<VertexId> = m.sets[lo].iter().collect();
    let mut pairs: Vec<(VertexId, VertexId)> = starts
        .par_iter()
        .flat_map_iter(|&s| {
            let mut frontier = VertexSet::from_vertices(cap, [s]);
            for step in lo..hi {
                frontier = expand(
                    view,
                    &frontier,
                    m.etypes[step],
                    m.dirs[step],
                    &m.sets[step + 1],
                );
            }
            frontier
                .iter()
                .map(move |t| if i <= j { (s, t) } else { (t, s) })
                .collect::<Vec<_>>()
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Top-k over the vertices bound to `target_alias` by the pattern.
pub fn pattern_filtered_topk(
    view: &ReadView,
    pattern: &PathPattern,
    target_alias: &str,
    attr: &str,
    query: &[f32],
    k: usize,
    ef: Option<usize>,
) -> Result<SearchOutput> {
    let m = pattern_match(view, pattern)?;
    let pos = pattern
        .position(target_alias)
        .ok_or_else(|| Error::Semantic(format!("unknown alias {target_alias}")))?;
    let cat = view.catalog();
    let attrs = attrs_at(cat, &m.types[pos], attr);
    if attrs.is_empty() {
        return Ok(SearchOutput::default());
    }
    let opts = SearchOptions {
        filter: Some(m.sets[pos].clone()),
        ef,
        bruteforce: None,
    };
    vector_search(view, &attrs, query, k, &opts)
}

/// Embedding attributes named `attr` on the allowed types that have one.
fn attrs_at(cat: &Catalog, types: &BTreeSet<TypeId>, attr: &str) -> Vec<AttrRef> {
    types
        .iter()
        .map(|t| cat.vertex_type_by_id(*t))
        .filter(|t| t.embedding(attr).is_some())
        .map(|t| AttrRef::new(t.name.as_str(), attr))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairHit {
    pub source: VertexId,
    pub target: VertexId,
    pub distance: f32,
}

impl PairHit {
    /// Ascending distance, ties by `(source, target)`.
    pub fn cmp_rank(&self, other: &Self) -> std::cmp::Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.source.cmp(&other.source))
            .then(self.target.cmp(&other.target))
    }
}

/// The `k` closest `(s, t)` pairs bound by the pattern, by brute force over
/// the distinct matched pairs.
pub fn similarity_join(
    view: &ReadView,
    pattern: &PathPattern,
    s_alias: &str,
    s_attr: &str,
    t_alias: &str,
    t_attr: &str,
    k: usize,
) -> Result<Vec<PairHit>> {
    let m = pattern_match(view, pattern)?;
    let unknown = |a: &str| Error::Semantic(format!("unknown alias {a}"));
    let si = pattern.position(s_alias).ok_or_else(|| unknown(s_alias))?;
    let ti = pattern.position(t_alias).ok_or_else(|| unknown(t_alias))?;
    let cat = view.catalog();
    let mut attrs: Vec<AttrRef> = Vec::new();
    for (pos, attr) in [(si, s_attr), (ti, t_attr)] {
        attrs.extend(attrs_at(cat, &m.types[pos], attr));
    }
    if attrs.is_empty() {
        return Ok(Vec::new());
    }
    let metric = cat.check_compatibility(&attrs)?.meta.metric;
    let pairs = pattern_pairs(view, &m, si, ti);
    let mut reader = EmbeddingReader::new(view);
    let mut cache: BTreeMap<(VertexId, bool), Option<Vec<f32>>> = BTreeMap::new();
    let mut fetch = |v: VertexId, is_source: bool| -> Result<Option<Vec<f32>>> {
        if let Some(x) = cache.get(&(v, is_source)) {
            return Ok(x.clone());
        }
        let attr = if is_source { s_attr } else { t_attr };
        let x = reader.get(v, attr)?.map(<[f32]>::to_vec);
        cache.insert((v, is_source), x.clone());
        Ok(x)
    };
    let mut heap = PairHeap::new(k);
    for (s, t) in pairs {
        let (Some(a), Some(b)) = (fetch(s, true)?, fetch(t, false)?) else {
            continue;
        };
        heap.push(PairHit {
            source: s,
            target: t,
            distance: metric.distance(&a, &b),
        });
    }
    Ok(heap.into_sorted())
}
