//! Trains a lens from five liked and five disliked papers and ranks the rest.

use polylens::lens::rank_with_snapshot;
use polylens::synth::{generate, SynthConfig};
use polylens::{score_batch, train, Featurizer};

fn main() -> polylens::Result<()> {
    let corpus = generate(&SynthConfig::separable(3));
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot)?;
    let feed = corpus.topic_feed("topic-0", 0, 5, 5, 3);
    let model = train(&snapshot, &feed, &featurizer, 42)?;
    println!(
        "tau {:.4}, cv accuracy {:?}, embedding scorer: {}",
        model.tau,
        model.cv_accuracy,
        model.embed_model.is_some()
    );

    let unrated: Vec<_> = snapshot
        .corpus_papers()
        .filter(|p| !feed.ratings.contains_key(&p.id.key))
        .map(|p| p.id.clone())
        .collect();
    let scores = score_batch(&model, &unrated, &snapshot, &featurizer);
    let ranked = rank_with_snapshot(&snapshot, unrated.iter().map(|id| (id.clone(), scores.get(id).unwrap_or(0.0))));
    println!("top 10 unrated papers:");
    for item in ranked.iter().take(10) {
        let topic = corpus.paper_topic[&item.id.key];
        println!("  {:.3}  {}  topic {topic}", item.score, item.id.key);
    }
    Ok(())
}
