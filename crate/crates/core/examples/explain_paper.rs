//! Shows the stemmed terms that push a paper's score up or down.

use polylens::synth::{generate, SynthConfig};
use polylens::{explain, score_batch, train, Featurizer};

fn main() -> polylens::Result<()> {
    let corpus = generate(&SynthConfig {
        papers: 300,
        authors: 30,
        ..SynthConfig::default()
    });
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot)?;
    let feed = &corpus.topic_feeds(4)[1];
    let model = train(&snapshot, feed, &featurizer, 4)?;

    let ids: Vec<_> = snapshot.corpus_papers().map(|p| p.id.clone()).collect();
    let scores = score_batch(&model, &ids, &snapshot, &featurizer);
    let best = ids
        .iter()
        .max_by(|a, b| scores.get(a).unwrap_or(0.0).total_cmp(&scores.get(b).unwrap_or(0.0)))
        .expect("papers");
    let paper = snapshot.paper(&best.key).expect("paper");
    println!("{} ({:.3}): {}", best.key, scores.get(best).unwrap_or(0.0), paper.title);

    let explanation = explain(&model, paper, featurizer.vocab(), 5)?;
    for item in &explanation.items {
        println!("  {:+.4}  {:<24} (stem {})", item.contribution, item.display_term, item.stem);
    }
    Ok(())
}
