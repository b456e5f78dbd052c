//! Builds per-author summary embeddings and compares approximate counts
//! with exhaustive ones.

use polylens::bench::brute_force_count;
use polylens::summary::build_index;
use polylens::synth::{generate, SynthConfig};
use polylens::{train, Featurizer, KPolicy, LensConfig};

fn main() -> polylens::Result<()> {
    let corpus = generate(&SynthConfig::default());
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot)?;
    let feed = &corpus.topic_feeds(2)[0];
    let model = train(&snapshot, feed, &featurizer, 2)?;
    let config = LensConfig::default();

    for policy in [KPolicy::SingleCluster, KPolicy::Sqrt(1.0), KPolicy::Exhaustive] {
        let (index, report) = build_index(&snapshot, featurizer.provider(), policy, 9, None);
        let mut sq = 0.0;
        let mut centroids = 0;
        let mut papers = 0;
        for author in snapshot.authors() {
            let approx = index.estimate_author(&model, &author.id, &config)?;
            let exact = brute_force_count(&model, &snapshot, &featurizer, &author.id, &config)?;
            sq += (approx.count as f64 - exact.count as f64).powi(2);
            centroids += approx.invocations;
            papers += exact.invocations;
        }
        println!(
            "{:<10} authors {:>3}  rmse {:.3}  scorer calls {centroids:>5} vs {papers} ({:.1}x fewer)",
            policy.to_string(),
            report.authors,
            (sq / report.authors as f64).sqrt(),
            papers as f64 / centroids as f64
        );
    }
    Ok(())
}
