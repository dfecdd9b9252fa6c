//! Two-stage vacuum of vector deltas.
//!
//! Stage one (delta merge) flushes the in-memory delta store of an embedding
//! segment into an immutable delta file. Stage two (index merge) folds the
//! pending delta files into a clone of the current index and publishes it as
//! a new snapshot. Old snapshots and consumed files are dropped once no
//! pinned reader can still need them.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{self, VectorIndex};
use crate::storage::embedding::IndexSnapshot;
use crate::storage::{DeltaFile, EmbeddingSegment, Graph, Tid};

#[derive(Debug, Clone, PartialEq)]
pub struct VacuumPolicy {
    /// Flush the delta store once it holds this many records...
    pub delta_max_records: usize,
    /// ...or once its oldest record is this old.
    pub delta_max_age: Duration,
    /// Merge pending delta files into the index past this many records.
    pub index_merge_records: usize,
    /// Rebuild instead of patching when this fraction of index nodes is deleted.
    pub rebuild_tombstone_fraction: f64,
    pub max_merge_threads: usize,
    /// Sleep between background passes.
    pub interval: Duration,
}

impl Default for VacuumPolicy {
    fn default() -> Self {
        Self {
            delta_max_records: 4096,
            delta_max_age: Duration::from_secs(1),
            index_merge_records: 16384,
            rebuild_tombstone_fraction: 0.2,
            max_merge_threads: std::thread::available_parallelism().map_or(4, |n| n.get()),
            interval: Duration::from_millis(50),
        }
    }
}

/// Merge threads for a given CPU utilization in `[0, 1]`:
/// `clamp(floor(max * (1 - util)), 1, max)`.
pub fn tune_merge_threads(util: f64, max: usize) -> usize {
    let max = max.max(1);
    let free = (max as f64 * (1.0 - util.clamp(0.0, 1.0))).floor() as usize;
    free.clamp(1, max)
}

static ACTIVE_QUERIES: AtomicUsize = AtomicUsize::new(0);

/// Marks a query as running for the lifetime of the guard. The vacuum uses
/// the number of running queries as its utilization signal.
pub struct QueryLoad(());

impl QueryLoad {
    pub fn enter() -> Self {
        ACTIVE_QUERIES.fetch_add(1, Ordering::Relaxed);
        QueryLoad(())
    }
}

impl Drop for QueryLoad {
    fn drop(&mut self) {
        ACTIVE_QUERIES.fetch_sub(1, Ordering::Relaxed);
    }
}

pub fn current_utilization() -> f64 {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    (ACTIVE_QUERIES.load(Ordering::Relaxed) as f64 / cores as f64).min(1.0)
}

/// Stage one: moves in-memory records with `tid <= up_to` into a new delta
/// file. Returns `None` when there is nothing to flush.
pub fn delta_merge(seg: &EmbeddingSegment, up_to: Tid) -> Result<Option<Arc<DeltaFile>>> {
    let _m = seg.maintenance.lock();
    let (seq, lo, records) = {
        let st = seg.state.read();
        let records: Vec<_> = st
            .memory
            .iter()
            .filter(|r| r.tid <= up_to)
            .cloned()
            .collect();
        (st.next_seq, st.merged_hi, records)
    };
    if records.is_empty() {
        return Ok(None);
    }
    let hi = up_to.max(records.iter().map(|r| r.tid).max().unwrap_or(lo));
    let file = DeltaFile {
        seq,
        tid_lo: lo,
        tid_hi: hi,
        records,
    };
    if let Some(dir) = &seg.dir {
        file.write_to(
            &crate::storage::persist_delta_path(dir, seg.id.ordinal, seq),
            seg.meta.dimension,
        )?;
    }
    let file = Arc::new(file);
    let mut st = seg.state.write();
    st.memory.retain(|r| r.tid > hi);
    if st.memory.is_empty() {
        st.memory_since = None;
    }
    st.files.push(file.clone());
    st.merged_hi = hi;
    st.next_seq = seq + 1;
    Ok(Some(file))
}

/// Stage two: folds every pending delta file into a new index snapshot.
/// Returns the new snapshot TID, or `None` when no file is pending.
pub fn index_merge(
    seg: &EmbeddingSegment,
    threads: usize,
    rebuild_fraction: f64,
) -> Result<Option<Tid>> {
    let _m = seg.maintenance.lock();
    let (current, pending) = {
        let st = seg.state.read();
        (st.current().clone(), st.pending_files())
    };
    if pending.is_empty() {
        return Ok(None);
    }
    let mut expected = current.snapshot_tid;
    for f in &pending {
        if f.tid_lo != expected {
            return Err(Error::Gap {
                expected,
                got: f.tid_lo,
            });
        }
        expected = f.tid_hi;
    }
    let records: Vec<_> = pending
        .iter()
        .flat_map(|f| f.records.iter().cloned())
        .collect();
    let mut next: Box<dyn VectorIndex> = current.index.clone_box();
    next.update_items(&records, threads)?;
    if next.stats().tombstone_fraction > rebuild_fraction {
        let vectors: Vec<(u32, Vec<f32>)> = next
            .ordinals()
            .into_iter()
            .filter_map(|o| next.get_embedding(o).map(|v| (o, v.to_vec())))
            .collect();
        next = index::build(
            seg.meta.index_kind,
            seg.meta.dimension,
            seg.params,
            &vectors,
        )?;
    }
    let snap = IndexSnapshot {
        segment: seg.id,
        attr: seg.attr.clone(),
        snapshot_tid: expected,
        index: next,
    };
    if let Some(dir) = &seg.dir {
        crate::storage::persist_snapshot(dir, &snap)?;
    }
    seg.state.write().snapshots.push(Arc::new(snap));
    Ok(Some(expected))
}

/// Drops snapshots and delta files that no pinned reader can reach.
/// Idempotent; returns how many snapshots and files were released.
pub fn gc(g: &Graph, seg: &EmbeddingSegment) -> Result<(usize, usize)> {
    let removed = g.with_pins_locked(|min_pin| {
        let mut st = seg.state.write();
        let horizon = min_pin.unwrap_or(Tid::MAX);
        let keep = st
            .snapshots
            .iter()
            .rposition(|s| s.snapshot_tid <= horizon)
            .unwrap_or(0);
        let keep_tid = st.snapshots[keep].snapshot_tid;
        let old_snaps: Vec<_> = st.snapshots.drain(..keep).collect();
        let (old_files, files): (Vec<_>, Vec<_>) =
            st.files.drain(..).partition(|f| f.tid_hi <= keep_tid);
        st.files = files;
        (old_snaps, old_files)
    });
    if let Some(dir) = &seg.dir {
        for s in &removed.0 {
            let p = crate::storage::persist_snapshot_path(
                dir,
                seg.id.ordinal,
                s.snapshot_tid,
                s.index.kind(),
            );
            let _ = std::fs::remove_file(p);
        }
        for f in &removed.1 {
            let _ = std::fs::remove_file(crate::storage::persist_delta_path(
                dir,
                seg.id.ordinal,
                f.seq,
            ));
        }
    }
    Ok((removed.0.len(), removed.1.len()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VacuumReport {
    pub delta_merges: usize,
    pub flushed_records: usize,
    pub index_merges: usize,
    pub released_snapshots: usize,
    pub released_files: usize,
}

/// One vacuum pass over every embedding segment. With `force`, every
/// non-empty delta store is flushed and every pending file merged.
pub fn run_once(g: &Graph, policy: &VacuumPolicy, force: bool) -> Result<VacuumReport> {
    let mut report = VacuumReport::default();
    let up_to = g.visible_tid();
    for seg in g.embedding_segments() {
        let (mem, age) = {
            let st = seg.state.read();
            (st.memory.len(), st.memory_since.map(|t| t.elapsed()))
        };
        let due = mem >= policy.delta_max_records || age.is_some_and(|a| a >= policy.delta_max_age);
        if mem > 0 && (force || due) {
            if let Some(f) = delta_merge(&seg, up_to)? {
                report.delta_merges += 1;
                report.flushed_records += f.records.len();
            }
        }
        let pending: usize = seg
            .state
            .read()
            .pending_files()
            .iter()
            .map(|f| f.records.len())
            .sum();
        let has_pending = !seg.state.read().pending_files().is_empty();
        if has_pending && (force || pending >= policy.index_merge_records) {
            let threads = tune_merge_threads(current_utilization(), policy.max_merge_threads);
            if index_merge(&seg, threads, policy.rebuild_tombstone_fraction)?.is_some() {
                report.index_merges += 1;
            }
        }
        let (s, f) = gc(g, &seg)?;
        report.released_snapshots += s;
        report.released_files += f;
    }
    Ok(report)
}

/// Background vacuum thread; stopped and joined on drop.
pub struct VacuumWorker {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl VacuumWorker {
    pub fn spawn(g: Graph) -> Self {
        let policy = g.config().vacuum.clone();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::Builder::new()
            .name("vacuum".into())
            .spawn(move || {
                while !flag.load(Ordering::Relaxed) {
                    if let Err(e) = run_once(&g, &policy, false) {
                        log::warn!("vacuum pass failed: {e}");
                    }
                    std::thread::sleep(policy.interval);
                }
            })
            .expect("spawn vacuum thread");
        Self {
            stop,
            handle: Some(handle),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for VacuumWorker {
    fn drop(&mut self) {
        self.shutdown();
    }
}
