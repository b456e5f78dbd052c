#![allow(dead_code)]

use polylens::synth::{generate, SynthConfig, SynthCorpus};
use polylens::{train, Featurizer, GraphSnapshot, TrainedLensModel};

pub struct Fixture {
    pub corpus: SynthCorpus,
    pub snapshot: GraphSnapshot,
    pub featurizer: Featurizer,
    pub models: Vec<TrainedLensModel>,
}

pub fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        papers: 50,
        authors: 12,
        seed,
        ..SynthConfig::default()
    }
}

/// Corpus plus one trained lens per topic.
pub fn fixture(config: &SynthConfig, seed: u64) -> Fixture {
    let corpus = generate(config);
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot).expect("featurizer");
    let models = corpus
        .topic_feeds(seed)
        .iter()
        .map(|feed| train(&snapshot, feed, &featurizer, seed).expect("train"))
        .collect();
    Fixture {
        corpus,
        snapshot,
        featurizer,
        models,
    }
}

pub fn medium(seed: u64) -> Fixture {
    fixture(
        &SynthConfig {
            papers: 300,
            authors: 30,
            seed,
            ..SynthConfig::default()
        },
        seed,
    )
}
