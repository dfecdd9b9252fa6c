//! Incremental HNSW updates against a rebuild as the updated fraction
//! grows. Prints CSV.
//!
//!     cargo run --release --example update_crossover -- 20000

use graphvec::bench::{update_bench, update_csv};
use graphvec::fixtures::sift_like;
use graphvec::index::IndexParams;
use graphvec::schema::Metric;

fn main() -> anyhow::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(5000), |s| s.parse())?;
    let base = sift_like(n, 64, 32, 3);
    let fractions = [0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];
    let points = update_bench(&base, &fractions, IndexParams::new(Metric::L2), 3, 3)?;
    print!("{}", update_csv(&points));
    if let Some(p) = points
        .iter()
        .find(|p| p.incremental_seconds > p.rebuild_seconds)
    {
        eprintln!("rebuilding wins from {:.0}% updated", p.fraction * 100.0);
    }
    Ok(())
}
