//! Vector search restricted to the end of a graph pattern: posts written by
//! friends of friends of one person, nearest to a query vector.

use graphvec::bench::hop_pattern;
use graphvec::fixtures::{self, SocialConfig};
use graphvec::query::{pattern_filtered_topk, pattern_match};

fn main() -> anyhow::Result<()> {
    let (g, counts) = fixtures::social(&SocialConfig {
        persons: 500,
        knows_per_person: 4,
        ..SocialConfig::default()
    })?;
    println!("{counts:?}");
    let view = g.read();
    let q = vec![0.0; 8];
    for hops in 1..=4 {
        let p = hop_pattern(0, hops);
        let m = pattern_match(&view, &p)?;
        let out = pattern_filtered_topk(&view, &p, "t", "content_emb", &q, 3, None)?;
        println!(
            "{hops} hop(s): {} posts reachable, {} segments searched, top-3 {:?}",
            m.sets.last().map_or(0, |s| s.len()),
            out.stats.segments_touched,
            out.hits
                .iter()
                .map(|h| (view.key_of(h.vertex).unwrap(), h.distance))
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
