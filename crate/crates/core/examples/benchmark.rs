//! Accuracy and speedup of summary embeddings across the K policy sweep.
//!
//! ```text
//! cargo run --release -p polylens --example benchmark [seed]
//! ```

use polylens::bench::run_benchmark;
use polylens::synth::{generate, SynthConfig};
use polylens::{train, Featurizer, KPolicy, LensConfig};

fn main() -> polylens::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let corpus = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    });
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot)?;
    let models = corpus
        .topic_feeds(seed)
        .iter()
        .map(|f| train(&snapshot, f, &featurizer, seed))
        .collect::<polylens::Result<Vec<_>>>()?;
    let refs: Vec<_> = models.iter().collect();

    let report = run_benchmark(&refs, &KPolicy::sweep(), &snapshot, &featurizer, &LensConfig::default(), seed)?;
    print!("{}", report.to_csv_string());
    eprintln!("{} author/feed pairs, mean n {:.1}", report.pairs, report.mean_n);
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}
