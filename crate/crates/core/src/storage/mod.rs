//! Segmented vertex/edge storage with decoupled embedding segments.
//!
//! Vertices of one type get dense ordinals; ordinal `v` lives in segment
//! `v / segment_capacity`. Scalar attributes and adjacency are kept in
//! [`segment::SegmentData`]; vectors go to per-attribute
//! [`embedding::EmbeddingSegment`]s that share the segment's ordinal space.
//!
//! Commits are serialized and stamped with a TID from one counter. The
//! visible TID only advances after every write of a transaction has landed,
//! so a reader pinned at the visible TID never sees half a transaction.

pub mod delta;
pub mod embedding;
mod persist;
pub mod segment;
mod wal;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};
use crate::index::IndexParams;
use crate::predicate::Predicate;
use crate::schema::{
    Catalog, CatalogHandle, EdgeTypeId, EmbeddingMeta, EmbeddingSource, TypeId, Value,
    VertexTypeDef,
};
use crate::vacuum::VacuumPolicy;

pub use delta::{DeltaAction, DeltaFile, DeltaRecord, Tid};
pub use embedding::{
    BruteForcePolicy, EmbeddingSegment, IndexSnapshot, SegmentSearch, SegmentStatus, SegmentView,
};
pub use segment::PartitionMap;
pub use wal::WalEntry;

pub(crate) use persist::{
    delta_path as persist_delta_path, snapshot_path as persist_snapshot_path,
    write_snapshot as persist_snapshot,
};
use segment::{EdgeRecord, SegmentData, VertexRow};
use wal::Wal;

/// A vertex: its type and its dense ordinal within the type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub vtype: TypeId,
    pub ordinal: u32,
}

impl VertexId {
    pub fn new(vtype: TypeId, ordinal: u32) -> Self {
        Self { vtype, ordinal }
    }

    pub fn to_u64(self) -> u64 {
        ((self.vtype as u64) << 32) | self.ordinal as u64
    }

    pub fn from_u64(v: u64) -> Self {
        Self {
            vtype: (v >> 32) as TypeId,
            ordinal: v as u32,
        }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.vtype, self.ordinal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId {
    pub vtype: TypeId,
    pub ordinal: u32,
}

impl SegmentId {
    pub fn new(vtype: TypeId, ordinal: u32) -> Self {
        Self { vtype, ordinal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub segment_capacity: usize,
    pub partitions: usize,
    pub data_dir: Option<PathBuf>,
    /// fsync the commit log on every commit.
    pub sync_commits: bool,
    pub hnsw_m: usize,
    pub hnsw_ef_construction: usize,
    pub index_seed: u64,
    pub bruteforce: BruteForcePolicy,
    pub vacuum: VacuumPolicy,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            segment_capacity: 1024,
            partitions: 1,
            data_dir: None,
            sync_commits: false,
            hnsw_m: 16,
            hnsw_ef_construction: 128,
            index_seed: 0x5eed,
            bruteforce: BruteForcePolicy::default(),
            vacuum: VacuumPolicy::default(),
        }
    }
}

impl GraphConfig {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_segment_capacity(mut self, cap: usize) -> Self {
        self.segment_capacity = cap;
        self
    }

    pub fn with_partitions(mut self, partitions: usize) -> Self {
        self.partitions = partitions.max(1);
        self
    }

    pub fn with_data_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.data_dir = Some(dir.into());
        self
    }

    /// Index parameters for one embedding segment. The level seed mixes the
    /// segment ordinal and attribute name so rebuilds are reproducible.
    pub fn index_params(&self, meta: &EmbeddingMeta, seg: SegmentId, attr: &str) -> IndexParams {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in attr.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100000001b3);
        }
        IndexParams {
            m: self.hnsw_m,
            ef_construction: self.hnsw_ef_construction,
            metric: meta.metric,
            seed: self.index_seed ^ h ^ ((seg.vtype as u64) << 48) ^ seg.ordinal as u64,
        }
    }
}

/// One write inside a transaction. Vertices are addressed by external key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WriteOp {
    UpsertVertex {
        vtype: String,
        key: i64,
        attrs: Vec<(String, Value)>,
    },
    DeleteVertex {
        vtype: String,
        key: i64,
    },
    /// Endpoint types may be omitted when the edge type has a single pair.
    AddEdge {
        etype: String,
        from: i64,
        to: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        types: Option<(String, String)>,
    },
    SetEmbedding {
        vtype: String,
        key: i64,
        attr: String,
        value: Vec<f32>,
    },
    DeleteEmbedding {
        vtype: String,
        key: i64,
        attr: String,
    },
}

pub(crate) struct VertexSegment {
    pub id: SegmentId,
    pub data: RwLock<SegmentData>,
}

pub(crate) struct VertexTable {
    pub keys: RwLock<HashMap<i64, u32>>,
    pub segments: RwLock<Vec<Arc<VertexSegment>>>,
    pub embeddings: RwLock<BTreeMap<String, Vec<Option<Arc<EmbeddingSegment>>>>>,
}

impl VertexTable {
    fn new() -> Self {
        Self {
            keys: RwLock::new(HashMap::new()),
            segments: RwLock::new(Vec::new()),
            embeddings: RwLock::new(BTreeMap::new()),
        }
    }

    fn segment(&self, ordinal: u32) -> Option<Arc<VertexSegment>> {
        self.segments.read().get(ordinal as usize).cloned()
    }
}

struct CommitState {
    wal: Option<Wal>,
}

pub(crate) struct Inner {
    pub config: GraphConfig,
    pub catalog: CatalogHandle,
    pub tables: RwLock<Vec<Arc<VertexTable>>>,
    commit: Mutex<CommitState>,
    next_tid: AtomicU64,
    visible_tid: AtomicU64,
    pins: Mutex<BTreeMap<Tid, usize>>,
    pub checkpoint_tid: AtomicU64,
}

/// Shared handle to a graph. Cloning is cheap.
#[derive(Clone)]
pub struct Graph {
    pub(crate) inner: Arc<Inner>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("visible_tid", &self.visible_tid())
            .field("data_dir", &self.inner.config.data_dir)
            .finish()
    }
}

impl Graph {
    /// Creates an in-memory graph, or opens (and recovers) the graph stored in
    /// `config.data_dir`.
    pub fn open(config: GraphConfig) -> Result<Graph> {
        if config.segment_capacity == 0 {
            return Err(Error::Validation(
                "segment capacity must be positive".into(),
            ));
        }
        let wal = match &config.data_dir {
            Some(dir) => Some(Wal::open(
                &dir.join("wal"),
                config.partitions,
                config.sync_commits,
            )?),
            None => None,
        };
        let graph = Graph {
            inner: Arc::new(Inner {
                config,
                catalog: CatalogHandle::default(),
                tables: RwLock::new(Vec::new()),
                commit: Mutex::new(CommitState { wal }),
                next_tid: AtomicU64::new(1),
                visible_tid: AtomicU64::new(0),
                pins: Mutex::new(BTreeMap::new()),
                checkpoint_tid: AtomicU64::new(0),
            }),
        };
        if graph.inner.config.data_dir.is_some() {
            persist::recover(&graph)?;
        }
        Ok(graph)
    }

    pub fn in_memory() -> Graph {
        Self::open(GraphConfig::default()).expect("in-memory graph")
    }

    pub fn config(&self) -> &GraphConfig {
        &self.inner.config
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.inner.config.data_dir.as_deref()
    }

    pub fn catalog(&self) -> Arc<Catalog> {
        self.inner.catalog.snapshot()
    }

    pub fn visible_tid(&self) -> Tid {
        self.inner.visible_tid.load(Ordering::Acquire)
    }

    pub fn partition_map(&self) -> PartitionMap {
        PartitionMap::new(self.inner.config.partitions)
    }

    // ---- DDL ----

    fn after_ddl(&self) -> Result<()> {
        let cat = self.catalog();
        {
            let mut tables = self.inner.tables.write();
            while tables.len() < cat.vertex_types.len() {
                tables.push(Arc::new(VertexTable::new()));
            }
        }
        if let Some(dir) = self.data_dir() {
            persist::write_catalog(dir, &cat)?;
        }
        Ok(())
    }

    pub fn define_vertex_type(&self, def: VertexTypeDef) -> Result<TypeId> {
        let id = self.inner.catalog.update(|c| c.define_vertex_type(def))?;
        self.after_ddl()?;
        Ok(id)
    }

    pub fn define_edge_type(
        &self,
        name: &str,
        endpoints: &[(&str, &str)],
        directed: bool,
    ) -> Result<EdgeTypeId> {
        let id = self
            .inner
            .catalog
            .update(|c| c.define_edge_type(name, endpoints, directed))?;
        self.after_ddl()?;
        Ok(id)
    }

    pub fn create_embedding_space(&self, name: &str, meta: EmbeddingMeta) -> Result<()> {
        self.inner
            .catalog
            .update(|c| c.create_embedding_space(name, meta))?;
        self.after_ddl()
    }

    pub fn add_embedding_attribute(
        &self,
        vtype: &str,
        attr: &str,
        source: EmbeddingSource,
    ) -> Result<()> {
        self.inner
            .catalog
            .update(|c| c.add_embedding_attribute(vtype, attr, source))?;
        self.after_ddl()
    }

    /// Installs a whole catalog (used by recovery).
    pub(crate) fn install_catalog(&self, catalog: Catalog) -> Result<()> {
        self.inner.catalog.update(|c| {
            *c = catalog;
            Ok(())
        })?;
        self.after_ddl()
    }

    // ---- tables and segments ----

    pub(crate) fn table(&self, vtype: TypeId) -> Arc<VertexTable> {
        self.inner.tables.read()[vtype as usize].clone()
    }

    pub fn segment_capacity(&self) -> usize {
        self.inner.config.segment_capacity
    }

    pub fn segment_of(&self, v: VertexId) -> (SegmentId, u32) {
        let cap = self.segment_capacity() as u32;
        (SegmentId::new(v.vtype, v.ordinal / cap), v.ordinal % cap)
    }

    pub fn vertex_of(&self, seg: SegmentId, local: u32) -> VertexId {
        VertexId::new(
            seg.vtype,
            seg.ordinal * self.segment_capacity() as u32 + local,
        )
    }

    pub fn segments(&self, vtype: TypeId) -> Vec<SegmentId> {
        let n = self.table(vtype).segments.read().len();
        (0..n as u32).map(|o| SegmentId::new(vtype, o)).collect()
    }

    pub fn all_segments(&self) -> Vec<SegmentId> {
        let n = self.inner.tables.read().len();
        (0..n as TypeId).flat_map(|t| self.segments(t)).collect()
    }

    pub fn embedding_segment(&self, seg: SegmentId, attr: &str) -> Option<Arc<EmbeddingSegment>> {
        let table = self.table(seg.vtype);
        let emb = table.embeddings.read();
        emb.get(attr)?.get(seg.ordinal as usize)?.clone()
    }

    pub(crate) fn ensure_embedding_segment(
        &self,
        seg: SegmentId,
        attr: &str,
    ) -> Result<Arc<EmbeddingSegment>> {
        if let Some(s) = self.embedding_segment(seg, attr) {
            return Ok(s);
        }
        let cat = self.catalog();
        let vt = cat.vertex_type_by_id(seg.vtype);
        let meta = vt
            .embedding(attr)
            .ok_or_else(|| Error::UnknownAttribute {
                vtype: vt.name.clone(),
                attr: attr.to_string(),
            })?
            .meta
            .clone();
        let dir = self
            .data_dir()
            .map(|d| persist::embedding_dir(d, &vt.name, attr));
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        let params = self.inner.config.index_params(&meta, seg, attr);
        let table = self.table(seg.vtype);
        let mut emb = table.embeddings.write();
        let col = emb.entry(attr.to_string()).or_default();
        if col.len() <= seg.ordinal as usize {
            col.resize(seg.ordinal as usize + 1, None);
        }
        let slot = &mut col[seg.ordinal as usize];
        Ok(slot
            .get_or_insert_with(|| Arc::new(EmbeddingSegment::new(seg, attr, meta, params, dir)))
            .clone())
    }

    pub(crate) fn install_embedding_segment(&self, seg: Arc<EmbeddingSegment>) {
        let table = self.table(seg.id.vtype);
        let mut emb = table.embeddings.write();
        let col = emb.entry(seg.attr.clone()).or_default();
        if col.len() <= seg.id.ordinal as usize {
            col.resize(seg.id.ordinal as usize + 1, None);
        }
        let slot = seg.id.ordinal as usize;
        col[slot] = Some(seg);
    }

    /// Every materialized embedding segment, in `(type, attr, segment)` order.
    pub fn embedding_segments(&self) -> Vec<Arc<EmbeddingSegment>> {
        let tables = self.inner.tables.read().clone();
        let mut out = Vec::new();
        for t in tables {
            for col in t.embeddings.read().values() {
                out.extend(col.iter().flatten().cloned());
            }
        }
        out
    }

    pub fn attr_segments(&self, vtype: TypeId, attr: &str) -> Vec<Arc<EmbeddingSegment>> {
        let table = self.table(vtype);
        let emb = table.embeddings.read();
        emb.get(attr)
            .map(|c| c.iter().flatten().cloned().collect())
            .unwrap_or_default()
    }

    // ---- transactions ----

    pub fn begin(&self) -> Transaction {
        Transaction {
            graph: self.clone(),
            begin_tid: self.visible_tid(),
            ops: Vec::new(),
        }
    }

    /// Commits `ops` in one transaction.
    pub fn write(&self, ops: Vec<WriteOp>) -> Result<Tid> {
        let mut tx = self.begin();
        tx.ops = ops;
        tx.commit()
    }

    fn commit(&self, begin_tid: Tid, ops: Vec<WriteOp>) -> Result<Tid> {
        let mut state = self.inner.commit.lock();
        let cat = self.catalog();
        let plan = self.plan(&cat, &ops)?;
        for vid in plan.touched.iter() {
            if plan.new_vertices.contains(vid) {
                continue;
            }
            let table = self.table(vid.vtype);
            let (seg, local) = self.segment_of(*vid);
            let segment = table
                .segment(seg.ordinal)
                .expect("resolved vertex has a segment");
            let last = segment.data.read().rows[local as usize].last_write;
            if last > begin_tid {
                let key = segment.data.read().rows[local as usize].key;
                return Err(Error::Conflict(format!(
                    "{}({key})",
                    cat.vertex_type_by_id(vid.vtype).name
                )));
            }
        }
        let pmap = self.partition_map();
        let parts: BTreeSet<usize> = plan
            .touched
            .iter()
            .map(|v| pmap.owner(self.segment_of(*v).0))
            .collect();
        if parts.len() > 1 {
            return Err(Error::CrossPartition(parts.into_iter().collect()));
        }
        let tid = self.inner.next_tid.fetch_add(1, Ordering::SeqCst);
        if let Some(wal) = state.wal.as_mut() {
            let p = parts.first().copied().unwrap_or(0);
            wal.append(p, &WalEntry { tid, ops })?;
        }
        self.apply(&cat, plan, tid)?;
        self.inner.visible_tid.store(tid, Ordering::Release);
        Ok(tid)
    }

    /// Re-applies a logged transaction newer than the last checkpoint.
    /// Vector writes already present in persisted delta files are skipped.
    pub(crate) fn replay(&self, entry: &WalEntry) -> Result<()> {
        let cat = self.catalog();
        let plan = self.plan(&cat, &entry.ops)?;
        self.apply_filtered(&cat, plan, entry.tid, true)?;
        self.set_recovered_tid(entry.tid);
        Ok(())
    }

    pub(crate) fn set_recovered_tid(&self, tid: Tid) {
        self.inner.next_tid.fetch_max(tid + 1, Ordering::SeqCst);
        self.inner.visible_tid.fetch_max(tid, Ordering::SeqCst);
    }

    pub(crate) fn lookup_key(&self, vtype: TypeId, key: i64) -> Option<u32> {
        self.table(vtype).keys.read().get(&key).copied()
    }

    fn is_live_now(&self, v: VertexId) -> bool {
        let (seg, local) = self.segment_of(v);
        self.table(v.vtype).segment(seg.ordinal).is_some_and(|s| {
            s.data
                .read()
                .rows
                .get(local as usize)
                .is_some_and(|r| r.live_at(Tid::MAX))
        })
    }

    fn plan(&self, cat: &Catalog, ops: &[WriteOp]) -> Result<Plan> {
        let mut plan = Plan::default();
        let mut pending: HashMap<(TypeId, i64), u32> = HashMap::new();
        let mut next_ord: HashMap<TypeId, u32> = HashMap::new();
        let mut live: HashMap<VertexId, bool> = HashMap::new();

        for op in ops {
            match op {
                WriteOp::UpsertVertex { vtype, key, attrs } => {
                    let vt = cat.vertex_type(vtype)?;
                    let (vid, new) = match self
                        .lookup_key(vt.id, *key)
                        .or_else(|| pending.get(&(vt.id, *key)).copied())
                    {
                        Some(o) => (VertexId::new(vt.id, o), false),
                        None => {
                            let next = next_ord
                                .entry(vt.id)
                                .or_insert_with(|| self.table(vt.id).keys.read().len() as u32);
                            let o = *next;
                            *next += 1;
                            pending.insert((vt.id, *key), o);
                            plan.new_vertices.insert(VertexId::new(vt.id, o));
                            (VertexId::new(vt.id, o), true)
                        }
                    };
                    let mut resolved = Vec::with_capacity(attrs.len() + 1);
                    if let Some(k) = &vt.key {
                        resolved.push((vt.attr_index(k).unwrap(), Value::Int(*key)));
                    }
                    for (name, value) in attrs {
                        let idx = vt.attr_index(name).ok_or_else(|| Error::UnknownAttribute {
                            vtype: vtype.clone(),
                            attr: name.clone(),
                        })?;
                        let def = &vt.attributes[idx];
                        let value = value.clone().coerce(def.ty).ok_or_else(|| {
                            Error::Validation(format!(
                                "{vtype}.{name} expects {}, got {value}",
                                def.ty
                            ))
                        })?;
                        if vt.key.as_deref() == Some(name.as_str()) && value != Value::Int(*key) {
                            return Err(Error::Validation(format!(
                                "{vtype}.{name} is the primary key ({key})"
                            )));
                        }
                        resolved.push((idx, value));
                    }
                    let was_live = live
                        .get(&vid)
                        .copied()
                        .unwrap_or_else(|| !new && self.is_live_now(vid));
                    live.insert(vid, true);
                    plan.touched.insert(vid);
                    plan.ops.push(Resolved::Upsert {
                        vid,
                        key: *key,
                        new,
                        revive: !was_live,
                        attrs: resolved,
                    });
                }
                WriteOp::DeleteVertex { vtype, key } => {
                    let vid = self.resolve_live(cat, vtype, *key, &pending, &live)?;
                    live.insert(vid, false);
                    plan.touched.insert(vid);
                    plan.ops.push(Resolved::Delete { vid });
                }
                WriteOp::AddEdge {
                    etype,
                    from,
                    to,
                    types,
                } => {
                    let et = cat.edge_type(etype)?;
                    let (ft, tt) = match types {
                        Some((f, t)) => {
                            if !et.connects(f, t) {
                                return Err(Error::Validation(format!(
                                    "{etype} does not connect {f} to {t}"
                                )));
                            }
                            (f.as_str(), t.as_str())
                        }
                        None => et.single_pair().ok_or_else(|| {
                            Error::Validation(format!(
                                "{etype} has several endpoint pairs; name the vertex types"
                            ))
                        })?,
                    };
                    let src = self.resolve_live(cat, ft, *from, &pending, &live)?;
                    let dst = self.resolve_live(cat, tt, *to, &pending, &live)?;
                    plan.touched.insert(src);
                    plan.ops.push(Resolved::Edge {
                        etype: et.id,
                        from: src,
                        to: dst,
                    });
                }
                WriteOp::SetEmbedding {
                    vtype,
                    key,
                    attr,
                    value,
                } => {
                    let emb = cat.embedding(vtype, attr)?;
                    if value.len() != emb.meta.dimension {
                        return Err(Error::Validation(format!(
                            "{vtype}.{attr} has dimension {}, got a {}-dim vector",
                            emb.meta.dimension,
                            value.len()
                        )));
                    }
                    if value.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Validation(format!(
                            "{vtype}.{attr}: non-finite vector component"
                        )));
                    }
                    let vid = self.resolve_live(cat, vtype, *key, &pending, &live)?;
                    plan.touched.insert(vid);
                    plan.ops.push(Resolved::SetEmbedding {
                        vid,
                        attr: attr.clone(),
                        value: emb.meta.metric.prepared(value),
                    });
                }
                WriteOp::DeleteEmbedding { vtype, key, attr } => {
                    cat.embedding(vtype, attr)?;
                    let vid = self.resolve_live(cat, vtype, *key, &pending, &live)?;
                    plan.touched.insert(vid);
                    plan.ops.push(Resolved::DeleteEmbedding {
                        vid,
                        attr: attr.clone(),
                    });
                }
            }
        }
        Ok(plan)
    }

    fn resolve_live(
        &self,
        cat: &Catalog,
        vtype: &str,
        key: i64,
        pending: &HashMap<(TypeId, i64), u32>,
        live: &HashMap<VertexId, bool>,
    ) -> Result<VertexId> {
        let vt = cat.vertex_type(vtype)?;
        let ord = self
            .lookup_key(vt.id, key)
            .or_else(|| pending.get(&(vt.id, key)).copied())
            .ok_or_else(|| Error::UnknownVertex(format!("{vtype}({key})")))?;
        let vid = VertexId::new(vt.id, ord);
        let is_live = live
            .get(&vid)
            .copied()
            .unwrap_or_else(|| self.is_live_now(vid));
        if !is_live {
            return Err(Error::UnknownVertex(format!("{vtype}({key})")));
        }
        Ok(vid)
    }

    fn apply(&self, cat: &Catalog, plan: Plan, tid: Tid) -> Result<()> {
        self.apply_filtered(cat, plan, tid, false)
    }

    fn with_row<T>(&self, vid: VertexId, f: impl FnOnce(&mut VertexRow) -> T) -> T {
        let (seg, local) = self.segment_of(vid);
        let segment = self
            .table(vid.vtype)
            .segment(seg.ordinal)
            .expect("segment exists");
        let mut data = segment.data.write();
        f(&mut data.rows[local as usize])
    }

    fn apply_filtered(&self, cat: &Catalog, plan: Plan, tid: Tid, recovering: bool) -> Result<()> {
        let mut deltas: BTreeMap<(SegmentId, String), Vec<DeltaRecord>> = BTreeMap::new();
        for op in plan.ops {
            match op {
                Resolved::Upsert {
                    vid,
                    key,
                    new,
                    revive,
                    attrs,
                } => {
                    let vt = cat.vertex_type_by_id(vid.vtype);
                    if new {
                        self.push_row(vid, VertexRow::new(key, vt.attributes.len()));
                    }
                    self.with_row(vid, |row| {
                        row.exists.set(tid, true);
                        if revive && !new {
                            for a in row.attrs.iter_mut() {
                                a.set(tid, None);
                            }
                        }
                        for (idx, v) in attrs {
                            row.attrs[idx].set(tid, Some(v));
                        }
                        row.last_write = tid;
                    });
                }
                Resolved::Delete { vid } => {
                    let (outs, ins) = self.with_row(vid, |row| {
                        row.exists.set(tid, false);
                        for a in row.attrs.iter_mut() {
                            a.set(tid, None);
                        }
                        row.last_write = tid;
                        let mut outs = Vec::new();
                        for e in row.out_edges.iter_mut().filter(|e| e.removed.is_none()) {
                            e.removed = Some(tid);
                            outs.push((e.etype, e.other));
                        }
                        let mut ins = Vec::new();
                        for e in row.in_edges.iter_mut().filter(|e| e.removed.is_none()) {
                            e.removed = Some(tid);
                            ins.push((e.etype, e.other));
                        }
                        (outs, ins)
                    });
                    for (etype, other) in outs {
                        self.with_row(other, |r| close_edge(&mut r.in_edges, etype, vid, tid));
                    }
                    for (etype, other) in ins {
                        self.with_row(other, |r| close_edge(&mut r.out_edges, etype, vid, tid));
                    }
                    let (seg, local) = self.segment_of(vid);
                    for e in &cat.vertex_type_by_id(vid.vtype).embeddings {
                        if self.embedding_segment(seg, &e.name).is_some() {
                            deltas
                                .entry((seg, e.name.clone()))
                                .or_default()
                                .push(DeltaRecord::delete(local as u64, tid));
                        }
                    }
                }
                Resolved::Edge { etype, from, to } => {
                    self.with_row(from, |r| {
                        r.out_edges.push(EdgeRecord {
                            etype,
                            other: to,
                            added: tid,
                            removed: None,
                        });
                        r.last_write = tid;
                    });
                    self.with_row(to, |r| {
                        r.in_edges.push(EdgeRecord {
                            etype,
                            other: from,
                            added: tid,
                            removed: None,
                        })
                    });
                }
                Resolved::SetEmbedding { vid, attr, value } => {
                    let (seg, local) = self.segment_of(vid);
                    self.with_row(vid, |r| r.last_write = tid);
                    deltas
                        .entry((seg, attr))
                        .or_default()
                        .push(DeltaRecord::upsert(local as u64, tid, value));
                }
                Resolved::DeleteEmbedding { vid, attr } => {
                    let (seg, local) = self.segment_of(vid);
                    self.with_row(vid, |r| r.last_write = tid);
                    deltas
                        .entry((seg, attr))
                        .or_default()
                        .push(DeltaRecord::delete(local as u64, tid));
                }
            }
        }
        for ((seg, attr), records) in deltas {
            let es = self.ensure_embedding_segment(seg, &attr)?;
            if recovering && tid <= es.state.read().merged_hi {
                continue;
            }
            es.append(records);
        }
        Ok(())
    }

    fn push_row(&self, vid: VertexId, row: VertexRow) {
        let table = self.table(vid.vtype);
        let (seg, local) = self.segment_of(vid);
        let key = row.key;
        {
            let mut segs = table.segments.write();
            while segs.len() <= seg.ordinal as usize {
                let id = SegmentId::new(vid.vtype, segs.len() as u32);
                segs.push(Arc::new(VertexSegment {
                    id,
                    data: RwLock::new(SegmentData::new()),
                }));
            }
            let mut data = segs[seg.ordinal as usize].data.write();
            debug_assert_eq!(data.rows.len(), local as usize);
            data.rows.push(row);
        }
        table.keys.write().insert(key, vid.ordinal);
    }

    // ---- reads ----

    /// Pins the latest visible TID for the lifetime of the returned view.
    pub fn read(&self) -> ReadView {
        let mut pins = self.inner.pins.lock();
        let tid = self.visible_tid();
        *pins.entry(tid).or_default() += 1;
        drop(pins);
        ReadView {
            graph: self.clone(),
            tid,
            catalog: self.catalog(),
        }
    }

    /// Pins an earlier TID. Fails if that TID is not committed yet.
    pub fn read_at(&self, tid: Tid) -> Result<ReadView> {
        let mut pins = self.inner.pins.lock();
        if tid > self.visible_tid() {
            return Err(Error::Validation(format!("tid {tid} is not committed yet")));
        }
        *pins.entry(tid).or_default() += 1;
        drop(pins);
        Ok(ReadView {
            graph: self.clone(),
            tid,
            catalog: self.catalog(),
        })
    }

    /// Smallest TID pinned by a live read view.
    pub fn min_pinned(&self) -> Option<Tid> {
        self.inner.pins.lock().keys().next().copied()
    }

    /// Runs `f` while no read view can be created or dropped.
    pub(crate) fn with_pins_locked<T>(&self, f: impl FnOnce(Option<Tid>) -> T) -> T {
        let pins = self.inner.pins.lock();
        f(pins.keys().next().copied())
    }

    fn unpin(&self, tid: Tid) {
        let mut pins = self.inner.pins.lock();
        if let Some(n) = pins.get_mut(&tid) {
            *n -= 1;
            if *n == 0 {
                pins.remove(&tid);
            }
        }
    }

    /// Writes vertex segment files and the checkpoint manifest.
    pub fn checkpoint(&self) -> Result<()> {
        let _state = self.inner.commit.lock();
        persist::checkpoint(self)
    }

    pub(crate) fn vertex_segment_data(&self, seg: SegmentId) -> Option<SegmentData> {
        self.table(seg.vtype)
            .segment(seg.ordinal)
            .map(|s| s.data.read().clone())
    }

    pub(crate) fn install_vertex_segment(&self, seg: SegmentId, data: SegmentData) {
        let table = self.table(seg.vtype);
        {
            let mut keys = table.keys.write();
            let cap = self.segment_capacity() as u32;
            for (i, r) in data.rows.iter().enumerate() {
                keys.insert(r.key, seg.ordinal * cap + i as u32);
            }
        }
        let mut segs = table.segments.write();
        while segs.len() <= seg.ordinal as usize {
            let id = SegmentId::new(seg.vtype, segs.len() as u32);
            segs.push(Arc::new(VertexSegment {
                id,
                data: RwLock::new(SegmentData::new()),
            }));
        }
        *segs[seg.ordinal as usize].data.write() = data;
    }

    pub fn vacuum_status(&self) -> Vec<SegmentStatus> {
        self.embedding_segments()
            .iter()
            .map(|s| s.status())
            .collect()
    }
}

fn close_edge(list: &mut [EdgeRecord], etype: EdgeTypeId, other: VertexId, tid: Tid) {
    for e in list.iter_mut() {
        if e.etype == etype && e.other == other && e.removed.is_none() {
            e.removed = Some(tid);
        }
    }
}

#[derive(Default)]
struct Plan {
    ops: Vec<Resolved>,
    touched: BTreeSet<VertexId>,
    new_vertices: BTreeSet<VertexId>,
}

enum Resolved {
    Upsert {
        vid: VertexId,
        key: i64,
        new: bool,
        revive: bool,
        attrs: Vec<(usize, Value)>,
    },
    Delete {
        vid: VertexId,
    },
    Edge {
        etype: EdgeTypeId,
        from: VertexId,
        to: VertexId,
    },
    SetEmbedding {
        vid: VertexId,
        attr: String,
        value: Vec<f32>,
    },
    DeleteEmbedding {
        vid: VertexId,
        attr: String,
    },
}

/// A batch of writes committed atomically under one TID.
pub struct Transaction {
    graph: Graph,
    begin_tid: Tid,
    ops: Vec<WriteOp>,
}

impl Transaction {
    pub fn begin_tid(&self) -> Tid {
        self.begin_tid
    }

    pub fn upsert_vertex<'a>(
        &mut self,
        vtype: &str,
        key: i64,
        attrs: impl IntoIterator<Item = (&'a str, Value)>,
    ) -> &mut Self {
        self.ops.push(WriteOp::UpsertVertex {
            vtype: vtype.to_string(),
            key,
            attrs: attrs.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        });
        self
    }

    pub fn delete_vertex(&mut self, vtype: &str, key: i64) -> &mut Self {
        self.ops.push(WriteOp::DeleteVertex {
            vtype: vtype.to_string(),
            key,
        });
        self
    }

    pub fn add_edge(&mut self, etype: &str, from: i64, to: i64) -> &mut Self {
        self.ops.push(WriteOp::AddEdge {
            etype: etype.to_string(),
            from,
            to,
            types: None,
        });
        self
    }

    /// Adds an edge of a type with several endpoint pairs.
    pub fn add_edge_between(
        &mut self,
        etype: &str,
        from_type: &str,
        from: i64,
        to_type: &str,
        to: i64,
    ) -> &mut Self {
        self.ops.push(WriteOp::AddEdge {
            etype: etype.to_string(),
            from,
            to,
            types: Some((from_type.to_string(), to_type.to_string())),
        });
        self
    }

    pub fn set_embedding(
        &mut self,
        vtype: &str,
        key: i64,
        attr: &str,
        value: Vec<f32>,
    ) -> &mut Self {
        self.ops.push(WriteOp::SetEmbedding {
            vtype: vtype.to_string(),
            key,
            attr: attr.to_string(),
            value,
        });
        self
    }

    pub fn delete_embedding(&mut self, vtype: &str, key: i64, attr: &str) -> &mut Self {
        self.ops.push(WriteOp::DeleteEmbedding {
            vtype: vtype.to_string(),
            key,
            attr: attr.to_string(),
        });
        self
    }

    pub fn push(&mut self, op: WriteOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Commits the buffered writes. The transaction is empty afterwards.
    pub fn commit(&mut self) -> Result<Tid> {
        let ops = std::mem::take(&mut self.ops);
        self.graph.commit(self.begin_tid, ops)
    }
}

/// A consistent read of the graph at one pinned TID.
pub struct ReadView {
    graph: Graph,
    tid: Tid,
    catalog: Arc<Catalog>,
}

impl Drop for ReadView {
    fn drop(&mut self) {
        self.graph.unpin(self.tid);
    }
}

impl ReadView {
    pub fn tid(&self) -> Tid {
        self.tid
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn segments(&self, vtype: TypeId) -> Vec<SegmentId> {
        self.graph.segments(vtype)
    }

    pub fn lookup(&self, vtype: &str, key: i64) -> Option<VertexId> {
        let vt = self.catalog.vertex_type(vtype).ok()?;
        let ord = self.graph.lookup_key(vt.id, key)?;
        let vid = VertexId::new(vt.id, ord);
        self.is_live(vid).then_some(vid)
    }

    fn row<T>(&self, v: VertexId, f: impl FnOnce(&VertexRow) -> T) -> Option<T> {
        let (seg, local) = self.graph.segment_of(v);
        let segment = self.graph.table(v.vtype).segment(seg.ordinal)?;
        let data = segment.data.read();
        data.rows.get(local as usize).map(f)
    }

    pub fn is_live(&self, v: VertexId) -> bool {
        self.row(v, |r| r.live_at(self.tid)).unwrap_or(false)
    }

    pub fn key_of(&self, v: VertexId) -> Option<i64> {
        self.row(v, |r| r.key)
    }

    pub fn attr(&self, v: VertexId, name: &str) -> Option<Value> {
        let idx = self.catalog.vertex_type_by_id(v.vtype).attr_index(name)?;
        self.row(v, |r| r.attr_at(idx, self.tid).cloned()).flatten()
    }

    pub fn live_bitmap(&self, seg: SegmentId) -> Bitmap {
        let cap = self.graph.segment_capacity();
        match self.graph.table(seg.vtype).segment(seg.ordinal) {
            Some(s) => s.data.read().live_bitmap(cap, self.tid),
            None => Bitmap::new(cap),
        }
    }

    /// Per-segment bitmaps of live vertices satisfying `pred`.
    pub fn segment_scan(&self, vtype: &str, pred: &Predicate) -> Result<Vec<(SegmentId, Bitmap)>> {
        let vt = self.catalog.vertex_type(vtype)?;
        pred.check(vt)?;
        Ok(self.scan_type(vt.id, pred))
    }

    pub(crate) fn scan_type(&self, vtype: TypeId, pred: &Predicate) -> Vec<(SegmentId, Bitmap)> {
        let vt = self.catalog.vertex_type_by_id(vtype);
        let cap = self.graph.segment_capacity();
        let table = self.graph.table(vtype);
        let segs = table.segments.read().clone();
        segs.iter()
            .map(|s| (s.id, s.data.read().scan(vt, pred, cap, self.tid)))
            .collect()
    }

    pub fn scan_segment(&self, seg: SegmentId, pred: &Predicate) -> Bitmap {
        let vt = self.catalog.vertex_type_by_id(seg.vtype);
        let cap = self.graph.segment_capacity();
        match self.graph.table(seg.vtype).segment(seg.ordinal) {
            Some(s) => s.data.read().scan(vt, pred, cap, self.tid),
            None => Bitmap::new(cap),
        }
    }

    /// Live neighbors over one edge type. Undirected edge types match in both
    /// directions. Multi-edges yield repeated neighbors.
    pub fn neighbors(&self, v: VertexId, etype: EdgeTypeId, dir: Direction) -> Vec<VertexId> {
        let directed = self.catalog.edge_type_by_id(etype).directed;
        let tid = self.tid;
        let mut out = self
            .row(v, |r| {
                let pick = |list: &Vec<EdgeRecord>| -> Vec<VertexId> {
                    list.iter()
                        .filter(|e| e.etype == etype && e.live_at(tid))
                        .map(|e| e.other)
                        .collect()
                };
                let mut out = match dir {
                    Direction::Out => pick(&r.out_edges),
                    Direction::In => pick(&r.in_edges),
                };
                if !directed {
                    out.extend(match dir {
                        Direction::Out => pick(&r.in_edges),
                        Direction::In => pick(&r.out_edges),
                    });
                }
                out
            })
            .unwrap_or_default();
        out.retain(|n| self.is_live(*n));
        out
    }

    pub fn embedding_view(&self, seg: SegmentId, attr: &str) -> Result<Option<SegmentView>> {
        match self.graph.embedding_segment(seg, attr) {
            Some(s) => Ok(Some(s.view_at(self.tid)?)),
            None => Ok(None),
        }
    }

    /// Delta-aware read of one vector.
    pub fn get_embedding(&self, v: VertexId, attr: &str) -> Result<Option<Vec<f32>>> {
        let vt = self.catalog.vertex_type_by_id(v.vtype);
        if vt.embedding(attr).is_none() {
            return Err(Error::UnknownAttribute {
                vtype: vt.name.clone(),
                attr: attr.to_string(),
            });
        }
        let (seg, local) = self.graph.segment_of(v);
        Ok(self
            .embedding_view(seg, attr)?
            .and_then(|view| view.get(local).map(<[f32]>::to_vec)))
    }

    pub fn get_embedding_by_key(
        &self,
        vtype: &str,
        key: i64,
        attr: &str,
    ) -> Result<Option<Vec<f32>>> {
        let vt = self.catalog.vertex_type(vtype)?;
        match self.graph.lookup_key(vt.id, key) {
            Some(o) => self.get_embedding(VertexId::new(vt.id, o), attr),
            None => {
                self.catalog.embedding(vtype, attr)?;
                Ok(None)
            }
        }
    }

    /// Number of live vertices of a type.
    pub fn count(&self, vtype: TypeId) -> usize {
        self.segments(vtype)
            .iter()
            .map(|s| self.live_bitmap(*s).count_ones())
            .sum()
    }
}
