//! Polymorphic lenses over a scholarly knowledge graph.
//!
//! A *lens* is a per-user paper preference model (a feed of liked and
//! disliked papers trains it) lifted to authors, venues and institutions by
//! counting how many of their papers the model finds relevant.
//!
//! The pieces, bottom up:
//!
//! - [`kg`]: typed graph of papers, authors, venues and institutions, JSONL ingestion.
//! - [`featurizer`]: tf-idf vectors, dense embeddings, Porter stemming.
//! - [`preference`]: feeds, the SVM ensemble, threshold selection, batch scoring.
//! - [`lens`]: counts, ranking, recommendation dots, whole-page scoring.
//! - [`summary`]: per-author k-means summaries for approximate counts.
//! - [`explainer`]: top stemmed terms behind a paper's score.
//! - [`bench`]: accuracy and speedup of the summaries against exhaustive counts.
//! - [`synth`]: seeded synthetic corpora with topic structure.
//!
//! ```
//! use polylens::synth::{generate, SynthConfig};
//! use polylens::{train, Featurizer};
//!
//! let corpus = generate(&SynthConfig::separable(1));
//! let snapshot = corpus.snapshot();
//! let featurizer = Featurizer::for_snapshot(&snapshot).unwrap();
//! let feed = corpus.topic_feed("f1", 0, 5, 5, 1);
//! let model = train(&snapshot, &feed, &featurizer, 42).unwrap();
//! assert_eq!(model.feed_id, "f1");
//! ```

pub mod bench;
pub mod error;
pub mod explainer;
pub mod featurizer;
pub mod kg;
pub mod lens;
pub mod preference;
pub mod seed;
pub mod summary;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use explainer::{explain, Explanation};
pub use featurizer::{DenseEmbedding, EmbeddingProvider, Featurizer, HashingEmbedder, Vocabulary};
pub use kg::{EntityId, EntityKind, GraphSnapshot, Relation};
pub use lens::{lens_over_type, score_page, LensConfig, PageScoring};
pub use preference::{map_preference, score_batch, train, Feed, Rating, TrainedLensModel};
pub use summary::{KPolicy, SummaryIndex};
