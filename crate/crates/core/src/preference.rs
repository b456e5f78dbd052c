//! Per-feed preference model over papers.
//!
//! A [`TrainedLensModel`] averages the raw decision values of two linear SVMs
//! (tf-idf text features and dense embeddings) and maps the mean onto [0, 1]
//! with `clamp((s - tau) * gamma + 0.5, 0, 1)`. `tau` is picked by three-fold
//! cross-validation on the feed's own ratings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::{DenseEmbedding, Featurizer, PaperFeatures, SparseVector};
use crate::kg::{EntityId, EntityKind, GraphSnapshot};
use crate::svm::{self, SvmParams};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const MIN_PSEUDO_NEGATIVES: usize = 10;
pub const CV_FOLDS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rating {
    Liked,
    Disliked,
}

/// A named set of binary paper ratings; the training data of one lens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    pub feed_id: String,
    pub name: String,
    pub color: String,
    /// Paper key to rating.
    pub ratings: BTreeMap<String, Rating>,
    pub updated_at: u64,
}

impl Feed {
    pub fn new(feed_id: impl Into<String>, name: impl Into<String>, color: impl Into<String>) -> Self {
        Feed {
            feed_id: feed_id.into(),
            name: name.into(),
            color: color.into(),
            ratings: BTreeMap::new(),
            updated_at: 0,
        }
    }

    /// Upserts (`Some`) or removes (`None`) a rating. Returns whether the feed
    /// changed; `updated_at` is bumped only on change.
    pub fn rate(&mut self, paper_key: &str, rating: Option<Rating>) -> bool {
        let changed = match rating {
            Some(r) => self.ratings.insert(paper_key.to_owned(), r) != Some(r),
            None => self.ratings.remove(paper_key).is_some(),
        };
        if changed {
            self.updated_at += 1;
        }
        changed
    }

    pub fn liked(&self) -> impl Iterator<Item = &str> {
        self.with_rating(Rating::Liked)
    }

    pub fn disliked(&self) -> impl Iterator<Item = &str> {
        self.with_rating(Rating::Disliked)
    }

    fn with_rating(&self, rating: Rating) -> impl Iterator<Item = &str> {
        self.ratings
            .iter()
            .filter(move |(_, r)| **r == rating)
            .map(|(k, _)| k.as_str())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    TfIdf,
    Embedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_space: FeatureSpace,
}

impl LinearScorer {
    pub fn decide_sparse(&self, x: &SparseVector) -> f64 {
        debug_assert_eq!(self.feature_space, FeatureSpace::TfIdf);
        x.dot(&self.weights) + self.bias
    }

    pub fn decide_dense(&self, x: &DenseEmbedding) -> f64 {
        debug_assert_eq!(self.feature_space, FeatureSpace::Embedding);
        x.dot(&self.weights) + self.bias
    }
}

/// A preference value in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceScore(f64);

impl PreferenceScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `clamp((s - tau) * gamma + 0.5, 0, 1)`.
pub fn map_preference(s: f64, tau: f64, gamma: f64) -> PreferenceScore {
    debug_assert!(gamma > 0.0);
    PreferenceScore(((s - tau) * gamma + 0.5).min(1.0).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedLensModel {
    pub feed_id: String,
    pub text_model: LinearScorer,
    pub embed_model: Option<LinearScorer>,
    pub tau: f64,
    pub gamma: f64,
    /// `Feed::updated_at` of the ratings this model was trained on.
    pub trained_on_version: u64,
    /// Mean held-out accuracy at `tau`; absent when too few ratings for CV.
    pub cv_accuracy: Option<f64>,
}

impl TrainedLensModel {
    pub fn is_stale(&self, feed: &Feed) -> bool {
        self.feed_id != feed.feed_id || self.trained_on_version != feed.updated_at
    }

    pub fn map(&self, s: f64) -> PreferenceScore {
        map_preference(s, self.tau, self.gamma)
    }

    pub fn preference(&self, features: &PaperFeatures) -> PreferenceScore {
        self.map(decision_score(self, features))
    }

    /// Mapped preference from the embedding scorer alone.
    pub fn embedding_preference(&self, embedding: &DenseEmbedding) -> Option<PreferenceScore> {
        self.embed_model
            .as_ref()
            .map(|m| self.map(m.decide_dense(embedding)))
    }
}

/// Mean of the available scorers' raw decision values.
pub fn decision_score(model: &TrainedLensModel, features: &PaperFeatures) -> f64 {
    let text = model.text_model.decide_sparse(&features.tfidf);
    match (&model.embed_model, &features.embedding) {
        (Some(m), Some(e)) => (text + m.decide_dense(e)) / 2.0,
        _ => text,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainParams {
    pub svm: SvmParams,
    pub gamma: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            svm: SvmParams::default(),
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// `max(10, #rated)` unrated corpus papers, drawn uniformly with `seed`.
///
/// Shrinks (with a warning) when the corpus has fewer unrated papers.
pub fn sample_pseudo_negatives(snapshot: &GraphSnapshot, feed: &Feed, seed: u64) -> Vec<EntityId> {
    let wanted = MIN_PSEUDO_NEGATIVES.max(feed.ratings.len());
    let pool: Vec<&EntityId> = snapshot
        .corpus_papers()
        .filter(|p| !feed.ratings.contains_key(&p.id.key))
        .map(|p| &p.id)
        .collect();
    if pool.len() < wanted {
        log::warn!(
            "feed {}: only {} unrated papers for {} pseudo-negatives",
            feed.feed_id,
            pool.len(),
            wanted
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.choose_multiple(&mut rng, wanted.min(pool.len()))
        .map(|id| (*id).clone())
        .collect()
}

/// One held-out ensemble score from cross-validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoldoutScore {
    pub score: f64,
    pub label: bool,
    pub fold: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdChoice {
    pub tau: f64,
    /// Mean per-fold accuracy at `tau`; `None` for the fallback.
    pub accuracy: Option<f64>,
}

/// Mean per-fold accuracy when predicting positive iff `score >= tau`.
pub fn cv_accuracy(samples: &[HoldoutScore], tau: f64) -> f64 {
    let folds: BTreeSet<usize> = samples.iter().map(|s| s.fold).collect();
    let mut total = 0.0;
    for &f in &folds {
        let in_fold: Vec<&HoldoutScore> = samples.iter().filter(|s| s.fold == f).collect();
        let correct = in_fold
            .iter()
            .filter(|s| (s.score >= tau) == s.label)
            .count();
        total += correct as f64 / in_fold.len() as f64;
    }
    total / folds.len() as f64
}

/// Picks the midpoint between consecutive sorted scores that maximizes mean
/// held-out accuracy, preferring the smallest on ties. Fewer than three
/// samples fall back to `tau = 0`.
pub fn select_threshold(samples: &[HoldoutScore]) -> ThresholdChoice {
    if samples.len() < CV_FOLDS {
        log::warn!("{} labeled examples; threshold falls back to 0", samples.len());
        return ThresholdChoice {
            tau: 0.0,
            accuracy: None,
        };
    }
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.score).collect();
    sorted.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    candidates.sort_by(f64::total_cmp);
    let mut best = ThresholdChoice {
        tau: candidates[0],
        accuracy: Some(cv_accuracy(samples, candidates[0])),
    };
    for &tau in &candidates[1..] {
        let acc = cv_accuracy(samples, tau);
        if acc > best.accuracy.unwrap_or(f64::NEG_INFINITY) {
            best = ThresholdChoice {
                tau,
                accuracy: Some(acc),
            };
        }
    }
    best
}

struct Example {
    key: String,
    label: f64,
    features: PaperFeatures,
}

struct Scorers {
    text: LinearScorer,
    embed: Option<LinearScorer>,
}

fn fit_scorers(examples: &[&Example], dims: (usize, usize), params: &SvmParams, seed: u64) -> Scorers {
    let labels: Vec<f64> = examples.iter().map(|e| e.label).collect();
    let text_x: Vec<&SparseVector> = examples.iter().map(|e| &e.features.tfidf).collect();
    let (w, b) = svm::fit(&text_x, &labels, dims.0, params, seed);
    let text = LinearScorer {
        weights: w,
        bias: b,
        feature_space: FeatureSpace::TfIdf,
    };

    let with_embedding: Vec<(&DenseEmbedding, f64)> = examples
        .iter()
        .filter_map(|e| e.features.embedding.as_ref().map(|x| (x, e.label)))
        .collect();
    let has_both = with_embedding.iter().any(|(_, y)| *y > 0.0)
        && with_embedding.iter().any(|(_, y)| *y < 0.0);
    let embed = if has_both && dims.1 > 0 {
        let (xs, ys): (Vec<&DenseEmbedding>, Vec<f64>) = with_embedding.into_iter().unzip();
        let (w, b) = svm::fit(&xs, &ys, dims.1, params, seed ^ 0xe3b0);
        Some(LinearScorer {
            weights: w,
            bias: b,
            feature_space: FeatureSpace::Embedding,
        })
    } else {
        None
    };
    Scorers { text, embed }
}

fn ensemble(scorers: &Scorers, features: &PaperFeatures) -> f64 {
    let text = scorers.text.decide_sparse(&features.tfidf);
    match (&scorers.embed, &features.embedding) {
        (Some(m), Some(e)) => (text + m.decide_dense(e)) / 2.0,
        _ => text,
    }
}

/// Trains the lens model of `feed`.
///
/// Liked papers are positives; disliked papers and pseudo-negatives are
/// negatives. The threshold is chosen by cross-validation over rated papers
/// only (pseudo-negatives always stay in the training folds).
pub fn train(
    snapshot: &GraphSnapshot,
    feed: &Feed,
    featurizer: &Featurizer,
    seed: u64,
) -> Result<TrainedLensModel> {
    train_with(snapshot, feed, featurizer, seed, &TrainParams::default())
}

pub fn train_with(
    snapshot: &GraphSnapshot,
    feed: &Feed,
    featurizer: &Featurizer,
    seed: u64,
    params: &TrainParams,
) -> Result<TrainedLensModel> {
    let training_error = |reason: &str| Error::Training {
        feed_id: feed.feed_id.clone(),
        reason: reason.to_owned(),
    };
    if params.gamma <= 0.0 || !params.gamma.is_finite() {
        return Err(training_error("gamma must be positive"));
    }

    let mut rated = Vec::new();
    for (key, rating) in &feed.ratings {
        match snapshot.paper(key) {
            Some(paper) => rated.push(Example {
                key: key.clone(),
                label: if *rating == Rating::Liked { 1.0 } else { -1.0 },
                features: featurizer.featurize(paper),
            }),
            None => log::warn!("feed {}: rated paper {key} not in corpus", feed.feed_id),
        }
    }
    if !rated.iter().any(|e| e.label > 0.0) {
        return Err(training_error("at least one liked paper is required"));
    }
    let pseudo: Vec<Example> = sample_pseudo_negatives(snapshot, feed, seed)
        .into_iter()
        .map(|id| Example {
            features: featurizer.featurize(snapshot.paper(&id.key).expect("sampled from corpus")),
            key: id.key,
            label: -1.0,
        })
        .collect();
    if !rated.iter().any(|e| e.label < 0.0) && pseudo.is_empty() {
        return Err(training_error("training data has a single class"));
    }

    let dims = (featurizer.vocab().len(), featurizer.provider().dim());
    let all: Vec<&Example> = rated.iter().chain(pseudo.iter()).collect();
    let full = fit_scorers(&all, dims, &params.svm, seed);

    // Three-fold CV over rated papers.
    let mut order: Vec<usize> = (0..rated.len()).collect();
    order.sort_by(|&a, &b| rated[a].key.cmp(&rated[b].key));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xf01d));
    let mut fold_of = vec![0; rated.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % CV_FOLDS;
    }
    let mut holdout = Vec::with_capacity(rated.len());
    if rated.len() >= CV_FOLDS {
        for fold in 0..CV_FOLDS {
            let train_set: Vec<&Example> = rated
                .iter()
                .enumerate()
                .filter(|(i, _)| fold_of[*i] != fold)
                .map(|(_, e)| e)
                .chain(pseudo.iter())
                .collect();
            let scorers = fit_scorers(&train_set, dims, &params.svm, seed.wrapping_add(fold as u64 + 1));
            for (i, e) in rated.iter().enumerate().filter(|(i, _)| fold_of[*i] == fold) {
                holdout.push(HoldoutScore {
                    score: ensemble(&scorers, &e.features),
                    label: e.label > 0.0,
                    fold: fold_of[i],
                });
            }
        }
    }
    let choice = select_threshold(&holdout);

    Ok(TrainedLensModel {
        feed_id: feed.feed_id.clone(),
        text_model: full.text,
        embed_model: full.embed,
        tau: choice.tau,
        gamma: params.gamma,
        trained_on_version: feed.updated_at,
        cv_accuracy: choice.accuracy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ScoreEntry {
    Scored { score: PreferenceScore },
    Unknown,
}

impl ScoreEntry {
    pub fn score(&self) -> Option<f64> {
        match self {
            ScoreEntry::Scored { score } => Some(score.value()),
            ScoreEntry::Unknown => None,
        }
    }
}

/// Result of one batched scoring pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchScores {
    pub scores: BTreeMap<EntityId, ScoreEntry>,
    /// Number of papers featurized and scored (unique known ids).
    pub featurized: usize,
}

impl BatchScores {
    pub fn get(&self, id: &EntityId) -> Option<f64> {
        self.scores.get(id).and_then(ScoreEntry::score)
    }
}

/// Scores every requested paper once. Unknown ids are reported, not dropped.
pub fn score_batch(
    model: &TrainedLensModel,
    ids: &[EntityId],
    snapshot: &GraphSnapshot,
    featurizer: &Featurizer,
) -> BatchScores {
    let unique: Vec<&EntityId> = ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let scored: Vec<(EntityId, ScoreEntry)> = unique
        .par_iter()
        .map(|id| {
            let entry = match (id.kind, snapshot.paper(&id.key)) {
                (EntityKind::Paper, Some(paper)) => ScoreEntry::Scored {
                    score: model.preference(&featurizer.featurize(paper)),
                },
                _ => ScoreEntry::Unknown,
            };
            ((*id).clone(), entry)
        })
        .collect();
    let featurized = scored
        .iter()
        .filter(|(_, e)| matches!(e, ScoreEntry::Scored { .. }))
        .count();
    BatchScores {
        scores: scored.into_iter().collect(),
        featurized,
    }
}

/// Keeps one trained model per feed and retrains whenever the feed has moved
/// past the version a model was trained on. Training is serialized per feed.
#[derive(Default)]
pub struct LensCache {
    slots: Mutex<HashMap<String, Arc<Mutex<Option<Arc<TrainedLensModel>>>>>>,
    trainings: AtomicUsize,
}

impl LensCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// A model trained on the feed's current ratings.
    pub fn fresh(
        &self,
        snapshot: &GraphSnapshot,
        feed: &Feed,
        featurizer: &Featurizer,
        seed: u64,
    ) -> Result<Arc<TrainedLensModel>> {
        let slot = self
            .slots
            .lock()
            .expect("lens cache poisoned")
            .entry(feed.feed_id.clone())
            .or_default()
            .clone();
        let mut guard = slot.lock().expect("lens slot poisoned");
        if let Some(model) = guard.as_ref() {
            if !model.is_stale(feed) {
                return Ok(model.clone());
            }
        }
        let model = Arc::new(train(snapshot, feed, featurizer, seed)?);
        self.trainings.fetch_add(1, Ordering::Relaxed);
        *guard = Some(model.clone());
        Ok(model)
    }

    /// Drops every cached model (e.g. after the snapshot changes).
    pub fn clear(&self) {
        self.slots.lock().expect("lens cache poisoned").clear();
    }

    /// How many times a model has been trained.
    pub fn training_runs(&self) -> usize {
        self.trainings.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_examples() {
        assert_eq!(map_preference(1.7, 1.7, 0.5).value(), 0.5);
        assert_eq!(map_preference(3.0, 0.0, 0.5).value(), 1.0);
        assert!((map_preference(-0.4, 0.0, 0.5).value() - 0.3).abs() < 1e-12);
        assert_eq!(map_preference(-100.0, 0.0, 0.5).value(), 0.0);
    }

    #[test]
    fn decision_score_is_mean_of_available_scorers() {
        let model = TrainedLensModel {
            feed_id: "f".into(),
            text_model: LinearScorer {
                weights: vec![0.5, 0.0],
                bias: 0.3,
                feature_space: FeatureSpace::TfIdf,
            },
            embed_model: Some(LinearScorer {
                weights: vec![0.2],
                bias: 0.0,
                feature_space: FeatureSpace::Embedding,
            }),
            tau: 0.0,
            gamma: 0.5,
            trained_on_version: 0,
            cv_accuracy: None,
        };
        let f = PaperFeatures {
            tfidf: SparseVector::from_pairs(vec![(0, 1.0)]),
            embedding: Some(DenseEmbedding(vec![1.0])),
        };
        assert!((decision_score(&model, &f) - 0.5).abs() < 1e-12);
        let text_only = PaperFeatures {
            embedding: None,
            ..f.clone()
        };
        assert!((decision_score(&model, &text_only) - 0.8).abs() < 1e-12);
        let zeros = PaperFeatures {
            tfidf: SparseVector::default(),
            embedding: Some(DenseEmbedding(vec![0.0])),
        };
        let zero_model = TrainedLensModel {
            text_model: LinearScorer {
                bias: 0.0,
                ..model.text_model.clone()
            },
            ..model
        };
        assert_eq!(decision_score(&zero_model, &zeros), 0.0);
    }

    fn samples(scores: &[f64], labels: &[bool]) -> Vec<HoldoutScore> {
        scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&score, &label))| HoldoutScore {
                score,
                label,
                fold: i % CV_FOLDS,
            })
            .collect()
    }

    #[test]
    fn threshold_separated_picks_smallest_optimal_midpoint() {
        let s = samples(&[-1.0, -1.0, 1.0, 1.0], &[false, false, true, true]);
        let choice = select_threshold(&s);
        assert_eq!(choice.tau, 0.0);
        assert_eq!(choice.accuracy, Some(1.0));
    }

    #[test]
    fn threshold_identical_scores() {
        let s = samples(&[0.3; 6], &[true, false, true, false, true, false]);
        assert_eq!(select_threshold(&s).tau, 0.3);
    }

    #[test]
    fn threshold_fallback_below_three() {
        let s = samples(&[1.0, -1.0], &[true, false]);
        assert_eq!(
            select_threshold(&s),
            ThresholdChoice {
                tau: 0.0,
                accuracy: None
            }
        );
    }

    #[test]
    fn feed_rating_upsert_and_noop() {
        let mut feed = Feed::new("f1", "Interpretability", "blue");
        assert!(feed.rate("p1", Some(Rating::Liked)));
        assert!(feed.rate("p1", Some(Rating::Disliked)));
        assert_eq!(feed.ratings.len(), 1);
        assert_eq!(feed.ratings["p1"], Rating::Disliked);
        assert_eq!(feed.updated_at, 2);
        assert!(!feed.rate("p9", None));
        assert_eq!(feed.updated_at, 2);
        let json = serde_json::to_value(&feed).unwrap();
        assert_eq!(json["ratings"]["p1"], "disliked");
    }
}
