//! Recall/QPS sweep over synthetic SIFT-like vectors, or over real
//! `.fvecs`/`.bvecs` files when paths are given.
//!
//!     cargo run --release --example sift_bench
//!     cargo run --release --example sift_bench -- base.fvecs query.fvecs

use std::path::Path;

use graphvec::bench::{run_bench, BenchConfig};
use graphvec::fixtures::sift_like_split;
use graphvec::loader::{read_vecs_file, VectorFormat};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (base, queries) = match args.as_slice() {
        [b, q] => {
            let read = |p: &str| {
                let fmt = VectorFormat::from_path(Path::new(p)).unwrap_or(VectorFormat::Fvecs);
                read_vecs_file(Path::new(p), fmt)
            };
            (read(b)?, read(q)?)
        }
        _ => sift_like_split(10_000, 100, 128, 42),
    };
    let cfg = BenchConfig {
        efs: vec![16, 32, 64, 128, 256, 512],
        threads: 16,
        ..Default::default()
    };
    let report = run_bench(&base, &queries, &cfg)?;
    eprintln!(
        "{} vectors, {} queries, load {:.2}s, build {:.2}s",
        report.vectors, report.queries, report.load_seconds, report.build_seconds
    );
    print!("{}", report.to_csv());
    Ok(())
}
