//! Top-k, filtered and range vector search over embedding segments.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{merge_local_topk, Hit, SearchOutput, SearchStats, VertexSet, DEFAULT_EF};
use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::index::{check_dimension, SearchParams};
use crate::predicate::Predicate;
use crate::schema::AttrRef;
use crate::storage::{BruteForcePolicy, ReadView, SegmentId, SegmentView, VertexId};
use crate::vacuum::QueryLoad;

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Only members of this set are eligible.
    pub filter: Option<VertexSet>,
    pub ef: Option<usize>,
    /// Overrides the graph's brute-force fallback policy.
    pub bruteforce: Option<BruteForcePolicy>,
}

impl SearchOptions {
    pub fn with_filter(mut self, filter: VertexSet) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn with_ef(mut self, ef: usize) -> Self {
        self.ef = Some(ef);
        self
    }
}

/// Local result of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentHits {
    pub segment: SegmentId,
    pub hits: Vec<Hit>,
    pub bruteforce: bool,
    /// Eligible vectors, indexed plus delta.
    pub valid: usize,
}

/// Top-k on one embedding segment. `query` must already be prepared for
/// the metric. Eligible ordinals are live vertices, further restricted by
/// `filter` when given. Returns `None` when the segment holds no vectors.
#[allow(clippy::too_many_arguments)]
pub fn segment_topk(
    view: &ReadView,
    attr: &str,
    seg: SegmentId,
    query: &[f32],
    k: usize,
    ef: usize,
    filter: Option<&Bitmap>,
    policy: BruteForcePolicy,
) -> Result<Option<SegmentHits>> {
    let Some(sv) = view.embedding_view(seg, attr)? else {
        return Ok(None);
    };
    let mut valid = view.live_bitmap(seg);
    if let Some(f) = filter {
        valid.intersect_with(f);
    }
    let res = sv.search(query, SearchParams::new(k, ef), Some(&valid), policy)?;
    let g = view.graph();
    Ok(Some(SegmentHits {
        segment: seg,
        hits: res
            .neighbors
            .iter()
            .map(|n| Hit::new(g.vertex_of(seg, n.ordinal), n.distance))
            .collect(),
        bruteforce: res.bruteforce,
        valid: res.valid_count + res.delta_count,
    }))
}

fn check_filter(view: &ReadView, filter: Option<&VertexSet>) -> Result<()> {
    match filter {
        Some(f) if f.capacity() != view.graph().segment_capacity() => {
            Err(Error::Validation(format!(
                "vertex set built for segment capacity {}, graph uses {}",
                f.capacity(),
                view.graph().segment_capacity()
            )))
        }
        _ => Ok(()),
    }
}

/// The `k` nearest vertices over every segment of every attribute in
/// `attrs`. The attributes must be pairwise compatible.
pub fn vector_search(
    view: &ReadView,
    attrs: &[AttrRef],
    query: &[f32],
    k: usize,
    opts: &SearchOptions,
) -> Result<SearchOutput> {
    let _load = QueryLoad::enter();
    let started = Instant::now();
    let set = view.catalog().check_compatibility(attrs)?;
    check_dimension(set.meta.dimension, query)?;
    check_filter(view, opts.filter.as_ref())?;
    if k == 0 {
        return Ok(SearchOutput::default());
    }
    let q = set.meta.metric.prepared(query);
    let ef = opts.ef.unwrap_or(DEFAULT_EF).max(k);
    let policy = opts.bruteforce.unwrap_or(view.graph().config().bruteforce);

    let mut tasks: Vec<(SegmentId, &str, Option<&Bitmap>)> = Vec::new();
    for (vtype, attr) in &set.attrs {
        for seg in view.segments(*vtype) {
            let filter = match &opts.filter {
                Some(f) => match f.segment(seg) {
                    Some(b) => Some(b),
                    None => continue,
                },
                None => None,
            };
            tasks.push((seg, attr.as_str(), filter));
        }
    }
    let locals: Vec<Option<SegmentHits>> = tasks
        .par_iter()
        .map(|(seg, attr, filter)| segment_topk(view, attr, *seg, &q, k, ef, *filter, policy))
        .collect::<Result<_>>()?;

    let mut stats = SearchStats::default();
    let mut lists = Vec::with_capacity(locals.len());
    for l in locals.into_iter().flatten() {
        stats.segments_touched += 1;
        if l.bruteforce {
            stats.bruteforce_segments += 1;
        } else {
            stats.index_segments += 1;
        }
        stats.candidates += l.valid;
        lists.push(l.hits);
    }
    let hits = merge_local_topk(lists, k);
    stats.vector_search_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SearchOutput { hits, stats })
}

/// Pre-filtered top-k: scan the predicate into per-segment bitmaps, then
/// search only the qualifying vertices.
pub fn filtered_topk(
    view: &ReadView,
    vtype: &str,
    pred: &Predicate,
    attr: &str,
    query: &[f32],
    k: usize,
    ef: Option<usize>,
) -> Result<SearchOutput> {
    let mut set = VertexSet::for_graph(view.graph());
    for (seg, bitmap) in view.segment_scan(vtype, pred)? {
        set.set_segment(seg, bitmap);
    }
    let opts = SearchOptions {
        filter: Some(set),
        ef,
        bruteforce: None,
    };
    vector_search(view, &[AttrRef::new(vtype, attr)], query, k, &opts)
}

/// Every eligible vertex with distance strictly below `threshold`, ascending.
pub fn range_query(
    view: &ReadView,
    attrs: &[AttrRef],
    query: &[f32],
    threshold: f32,
    filter: Option<&VertexSet>,
) -> Result<SearchOutput> {
    let _load = QueryLoad::enter();
    let started = Instant::now();
    let set = view.catalog().check_compatibility(attrs)?;
    if !set.meta.metric.supports_range() {
        return Err(Error::Semantic(format!(
            "range predicates are not defined for metric {}",
            set.meta.metric
        )));
    }
    check_dimension(set.meta.dimension, query)?;
    check_filter(view, filter)?;
    let q = set.meta.metric.prepared(query);
    let mut tasks: Vec<(SegmentId, &str, Option<&Bitmap>)> = Vec::new();
    for (vtype, attr) in &set.attrs {
        for seg in view.segments(*vtype) {
            let f = match filter {
                Some(f) => match f.segment(seg) {
                    Some(b) => Some(b),
                    None => continue,
                },
                None => None,
            };
            tasks.push((seg, attr.as_str(), f));
        }
    }
    let g = view.graph();
    let locals: Vec<Option<Vec<Hit>>> = tasks
        .par_iter()
        .map(|(seg, attr, f)| -> Result<Option<Vec<Hit>>> {
            let Some(sv) = view.embedding_view(*seg, attr)? else {
                return Ok(None);
            };
            let mut valid = view.live_bitmap(*seg);
            if let Some(f) = f {
                valid.intersect_with(f);
            }
            Ok(Some(
                sv.range(&q, threshold, Some(&valid))?
                    .into_iter()
                    .map(|n| Hit::new(g.vertex_of(*seg, n.ordinal), n.distance))
                    .collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut stats = SearchStats::default();
    let mut hits = Vec::new();
    for l in locals.into_iter().flatten() {
        stats.segments_touched += 1;
        stats.index_segments += 1;
        hits.extend(l);
    }
    hits.sort_by(Hit::cmp_rank);
    stats.vector_search_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SearchOutput { hits, stats })
}

/// Delta-aware vector lookups with one cached segment view per
/// `(segment, attribute)`.
pub struct EmbeddingReader<'a> {
    view: &'a ReadView,
    cache: HashMap<(SegmentId, String), Option<SegmentView>>,
}

impl<'a> EmbeddingReader<'a> {
    pub fn new(view: &'a ReadView) -> Self {
        Self {
            view,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, v: VertexId, attr: &str) -> Result<Option<&[f32]>> {
        let (seg, local) = self.view.graph().segment_of(v);
        let key = (seg, attr.to_string());
        if !self.cache.contains_key(&key) {
            let sv = self.view.embedding_view(seg, attr)?;
            self.cache.insert(key.clone(), sv);
        }
        Ok(self.cache[&key].as_ref().and_then(|sv| sv.get(local)))
    }
}
