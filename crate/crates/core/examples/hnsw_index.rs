//! The index layer on its own: build HNSW and FLAT over the same vectors,
//! compare answers, then apply an in-place update batch.

use graphvec::fixtures::sift_like;
use graphvec::index::{self, FilterFn, IndexParams, SearchParams};
use graphvec::schema::{IndexKind, Metric};
use graphvec::storage::DeltaRecord;

fn main() -> anyhow::Result<()> {
    let dim = 32;
    let base = sift_like(3000, dim, 16, 1);
    let items: Vec<(u32, Vec<f32>)> = base
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, v)| (i as u32, v))
        .collect();
    let params = IndexParams::new(Metric::L2);
    let hnsw = index::build(IndexKind::Hnsw, dim, params, &items)?;
    let flat = index::build(IndexKind::Flat, dim, params, &items)?;

    let q = &base[7];
    for ef in [10, 40, 160] {
        let a = hnsw.top_k_search(q, SearchParams::new(10, ef), FilterFn::all(hnsw.len()))?;
        let b = flat.top_k_search(q, SearchParams::new(10, ef), FilterFn::all(flat.len()))?;
        let same = a
            .iter()
            .filter(|n| b.iter().any(|m| m.ordinal == n.ordinal))
            .count();
        println!("ef={ef:<4} overlap with exact top-10: {same}/10");
    }

    // Move ordinal 7 far away and drop ordinal 8.
    let mut hnsw = hnsw;
    hnsw.update_items(
        &[
            DeltaRecord::upsert(7, 2, vec![255.0; dim]),
            DeltaRecord::delete(8, 2),
        ],
        1,
    )?;
    let a = hnsw.top_k_search(q, SearchParams::new(3, 64), FilterFn::all(hnsw.len()))?;
    println!(
        "after update, nearest to the old vector 7: {:?}",
        a.iter().map(|n| n.ordinal).collect::<Vec<_>>()
    );
    println!("{} live items", hnsw.len());
    Ok(())
}
