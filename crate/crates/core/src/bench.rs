//! Accuracy and cost of summary embeddings against exhaustive counting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::Featurizer;
use crate::kg::{EntityId, GraphSnapshot, Relation};
use crate::lens::{lens_over_type, rank_with_snapshot, EmbeddingScorer, LensConfig};
use crate::preference::{score_batch, TrainedLensModel};
use crate::seed::mix;
use crate::summary::{author_embeddings, build_cluster_set, estimate_count, Estimate, KPolicy};

pub const TOP_PAPERS: usize = 500;
pub const GROUP_SIZE: usize = 10;
pub const CSV_HEADER: [&str; 6] = [
    "method",
    "k_policy",
    "rmse",
    "pct_within_factor2",
    "speedup",
    "wallclock_ratio",
];

/// `1/2 <= (t+1)/(p+1) <= 2`.
pub fn within_factor2(t: usize, p: usize) -> bool {
    let (t, p) = (t as f64 + 1.0, p as f64 + 1.0);
    p <= 2.0 * t && t <= 2.0 * p
}

/// Exact relevant-paper count of an author under the embedding scorer.
/// `invocations` is the number of papers scored.
pub fn brute_force_count(
    model: &TrainedLensModel,
    snapshot: &GraphSnapshot,
    featurizer: &Featurizer,
    author: &EntityId,
    config: &LensConfig,
) -> Result<Estimate> {
    let scorer = EmbeddingScorer::new(model, snapshot, featurizer);
    let count = lens_over_type(&scorer, snapshot, author, Relation::WrittenBy, config)?;
    Ok(Estimate {
        count: count.relevant_count,
        invocations: scorer.invocations(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalAuthorSet {
    pub feed_id: String,
    pub positives: Vec<EntityId>,
    pub hard_negatives: Vec<EntityId>,
    pub easy_negatives: Vec<EntityId>,
    /// Author key to exact count, for every author in the three groups.
    pub true_counts: BTreeMap<String, usize>,
    /// Set when the groups had to shrink below the requested size.
    pub shrunk_to: Option<usize>,
}

impl EvalAuthorSet {
    pub fn authors(&self) -> impl Iterator<Item = &EntityId> {
        self.positives
            .iter()
            .chain(&self.hard_negatives)
            .chain(&self.easy_negatives)
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.hard_negatives.len() + self.easy_negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The feed's top papers by ensemble preference: `min(500, corpus)` of them.
pub fn top_papers(model: &TrainedLensModel, snapshot: &GraphSnapshot, featurizer: &Featurizer) -> Vec<EntityId> {
    let ids: Vec<EntityId> = snapshot.corpus_papers().map(|p| p.id.clone()).collect();
    let scores = score_batch(model, &ids, snapshot, featurizer);
    let ranked = rank_with_snapshot(
        snapshot,
        ids.iter().map(|id| (id.clone(), scores.get(id).unwrap_or(0.0))),
    );
    ranked.into_iter().take(TOP_PAPERS).map(|r| r.id).collect()
}

/// Samples up to ten positives, hard negatives and easy negatives.
///
/// Positives and hard negatives come from authors of the top papers (count
/// above zero and exactly zero respectively); easy negatives from the rest of
/// the corpus. When any group cannot be filled, all three shrink to the
/// largest size every group can reach.
pub fn build_eval_set(
    model: &TrainedLensModel,
    snapshot: &GraphSnapshot,
    featurizer: &Featurizer,
    config: &LensConfig,
    seed: u64,
) -> Result<EvalAuthorSet> {
    let top = top_papers(model, snapshot, featurizer);
    let on_top: BTreeSet<EntityId> = top
        .iter()
        .flat_map(|p| snapshot.related(p, Relation::WrittenBy).unwrap_or(&[]).iter().cloned())
        .collect();

    let all_authors: Vec<EntityId> = snapshot.authors().map(|a| a.id.clone()).collect();
    let counts: Vec<usize> = all_authors
        .par_iter()
        .map(|a| brute_force_count(model, snapshot, featurizer, a, config).map(|e| e.count))
        .collect::<Result<_>>()?;
    let count_of: HashMap<&EntityId, usize> = all_authors.iter().zip(counts.iter().copied()).collect();

    let pos_pool: Vec<EntityId> = on_top.iter().filter(|a| count_of[a] > 0).cloned().collect();
    let hard_pool: Vec<EntityId> = on_top.iter().filter(|a| count_of[a] == 0).cloned().collect();

    let mut size = GROUP_SIZE.min(pos_pool.len()).min(hard_pool.len());
    while size > 0 && all_authors.len() < 3 * size {
        size -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives: Vec<EntityId> = pos_pool.choose_multiple(&mut rng, size).cloned().collect();
    let hard_negatives: Vec<EntityId> = hard_pool.choose_multiple(&mut rng, size).cloned().collect();
    let taken: BTreeSet<&EntityId> = positives.iter().chain(&hard_negatives).collect();
    let easy_pool: Vec<&EntityId> = all_authors.iter().filter(|a| !taken.contains(a)).collect();
    let easy_negatives: Vec<EntityId> = easy_pool
        .choose_multiple(&mut rng, size)
        .map(|a| (*a).clone())
        .collect();

    let shrunk_to = (size < GROUP_SIZE).then_some(size);
    if let Some(size) = shrunk_to {
        log::warn!(
            "feed {}: evaluation groups shrunk to {size} ({} positive, {} hard-negative candidates)",
            model.feed_id,
            pos_pool.len(),
            hard_pool.len()
        );
    }
    let mut set = EvalAuthorSet {
        feed_id: model.feed_id.clone(),
        positives,
        hard_negatives,
        easy_negatives,
        true_counts: BTreeMap::new(),
        shrunk_to,
    };
    set.true_counts = set.authors().map(|a| (a.key.clone(), count_of[a])).collect();
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub k_policy: String,
    pub rmse: f64,
    pub pct_within_factor2: f64,
    pub speedup: Option<f64>,
    pub wallclock_ratio: Option<f64>,
    /// Mean number of centroids scored per author.
    pub mean_k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub eval_feeds: Vec<String>,
    pub baseline_feeds: Vec<String>,
    /// Number of (feed, author) pairs behind every row.
    pub pairs: usize,
    /// Mean papers per evaluated author.
    pub mean_n: f64,
    pub notes: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl BenchReport {
    pub fn row(&self, k_policy: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.k_policy == k_policy)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.k_policy.clone(),
                format!("{:?}", r.rmse),
                format!("{:?}", r.pct_within_factor2),
                fmt_opt(r.speedup),
                fmt_opt(r.wallclock_ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Same report without machine-dependent timing.
    pub fn without_wallclock(mut self) -> Self {
        for r in &mut self.rows {
            r.wallclock_ratio = None;
        }
        self
    }
}

/// Feeds used for evaluation and for the baseline mean: an 80/20 split when
/// there are at least five feeds, otherwise every feed for both.
pub fn split_feeds(feed_ids: &[String], seed: u64) -> (Vec<String>, Vec<String>) {
    let mut ids = feed_ids.to_vec();
    ids.sort();
    if ids.len() < 5 {
        return (ids.clone(), ids);
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = ((ids.len() as f64) * 0.2).round().max(1.0) as usize;
    let train = ids.split_off(test);
    let (mut test, mut train) = (ids, train);
    test.sort();
    train.sort();
    (test, train)
}

struct Pair<'a> {
    model: &'a TrainedLensModel,
    author: EntityId,
    truth: usize,
}

const TIMING_RUNS: usize = 5;

fn best_of<T>(mut f: impl FnMut() -> T) -> Duration {
    (0..TIMING_RUNS)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(f());
            start.elapsed()
        })
        .min()
        .unwrap_or_default()
}

fn rmse_and_pct(pairs: &[(usize, usize)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let sq: f64 = pairs
        .iter()
        .map(|&(t, p)| (t as f64 - p as f64).powi(2))
        .sum();
    let within = pairs.iter().filter(|&&(t, p)| within_factor2(t, p)).count() as f64;
    ((sq / n).sqrt(), 100.0 * within / n)
}

/// Runs every policy over the evaluation authors of the evaluation feeds.
///
/// Speedup is total papers scored exhaustively over total centroids scored.
/// Cluster sets use the same per-author seed as the summary index.
pub fn run_benchmark(
    models: &[&TrainedLensModel],
    policies: &[KPolicy],
    snapshot: &GraphSnapshot,
    featurizer: &Featurizer,
    config: &LensConfig,
    seed: u64,
) -> Result<BenchReport> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one trained feed".into()));
    }
    let by_id: BTreeMap<&str, &TrainedLensModel> = models.iter().map(|m| (m.feed_id.as_str(), *m)).collect();
    let ids: Vec<String> = by_id.keys().map(|s| s.to_string()).collect();
    let (eval_feeds, baseline_feeds) = split_feeds(&ids, seed);
    let mut notes = Vec::new();
    if ids.len() < 5 {
        notes.push(format!(
            "{} feeds: no train/test split, all feeds evaluated and used for the baseline mean",
            ids.len()
        ));
    }

    let needed: BTreeSet<&String> = eval_feeds.iter().chain(&baseline_feeds).collect();
    let mut sets: BTreeMap<String, EvalAuthorSet> = BTreeMap::new();
    for feed in needed {
        let set = build_eval_set(by_id[feed.as_str()], snapshot, featurizer, config, mix(seed, feed))?;
        if let Some(size) = set.shrunk_to {
            notes.push(format!("feed {feed}: groups shrunk to {size} authors each"));
        }
        sets.insert(feed.clone(), set);
    }

    let pairs: Vec<Pair> = eval_feeds
        .iter()
        .flat_map(|feed| {
            let set = &sets[feed];
            let model = by_id[feed.as_str()];
            set.authors().map(move |a| Pair {
                model,
                author: a.clone(),
                truth: set.true_counts[&a.key],
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no evaluation authors: the corpus has no author with relevant papers among the top recommendations".into(),
        ));
    }

    let authors: BTreeSet<&EntityId> = pairs.iter().map(|p| &p.author).collect();
    let embeddings: BTreeMap<&EntityId, _> = authors
        .iter()
        .map(|a| Ok((*a, author_embeddings(snapshot, featurizer.provider(), a)?)))
        .collect::<Result<_>>()?;

    let exhaustive: Vec<usize> = pairs
        .par_iter()
        .map(|p| {
            let e = brute_force_count(p.model, snapshot, featurizer, &p.author, config)?;
            debug_assert_eq!(e.count, p.truth);
            Ok(e.invocations)
        })
        .collect::<Result<_>>()?;
    let total_n: usize = exhaustive.iter().sum();
    // Wallclock compares serial passes over precomputed paper embeddings with
    // passes over centroids; best of a few runs.
    let exhaustive_time = best_of(|| {
        pairs
            .iter()
            .map(|p| {
                embeddings[&p.author]
                    .iter()
                    .filter(|(_, e)| p.model.embedding_preference(e).is_some_and(|s| config.is_relevant(s.value())))
                    .count()
            })
            .sum::<usize>()
    });

    let mut rows = Vec::new();
    for &policy in policies {
        let clusters: BTreeMap<&EntityId, _> = authors
            .par_iter()
            .map(|a| {
                let members = &embeddings[a];
                let set = if members.is_empty() {
                    None
                } else {
                    Some(build_cluster_set(a, members, policy, mix(seed, &a.key), snapshot.version())?)
                };
                Ok((*a, set))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        let estimates: Vec<Estimate> = pairs
            .iter()
            .map(|p| match &clusters[&p.author] {
                Some(set) => estimate_count(p.model, set, config),
                None => Ok(Estimate::default()),
            })
            .collect::<Result<_>>()?;
        let policy_time = best_of(|| {
            pairs
                .iter()
                .filter_map(|p| clusters[&p.author].as_ref().map(|set| estimate_count(p.model, set, config)))
                .filter_map(|e| e.ok())
                .map(|e| e.count)
                .sum::<usize>()
        });
        let compared: Vec<(usize, usize)> = pairs.iter().zip(&estimates).map(|(p, e)| (p.truth, e.count)).collect();
        let (rmse, pct) = rmse_and_pct(&compared);
        let total_k: usize = estimates.iter().map(|e| e.invocations).sum();
        rows.push(BenchRow {
            method: "summary-embeddings".into(),
            k_policy: policy.to_string(),
            rmse,
            pct_within_factor2: pct,
            speedup: (total_k > 0).then(|| total_n as f64 / total_k as f64),
            wallclock_ratio: (!policy_time.is_zero())
                .then(|| exhaustive_time.as_secs_f64() / policy_time.as_secs_f64()),
            mean_k: Some(total_k as f64 / pairs.len() as f64),
        });
    }

    let baseline_counts: Vec<usize> = baseline_feeds
        .iter()
        .flat_map(|f| sets[f].true_counts.values().copied())
        .collect();
    let mean = if baseline_counts.is_empty() {
        0.0
    } else {
        baseline_counts.iter().sum::<usize>() as f64 / baseline_counts.len() as f64
    };
    let predicted = mean.round() as usize;
    let compared: Vec<(usize, usize)> = pairs.iter().map(|p| (p.truth, predicted)).collect();
    let (rmse, pct) = rmse_and_pct(&compared);
    rows.push(BenchRow {
        method: "mean-relevant-count".into(),
        k_policy: "none".into(),
        rmse,
        pct_within_factor2: pct,
        speedup: None,
        wallclock_ratio: None,
        mean_k: None,
    });
    notes.push(format!(
        "baseline predicts {predicted} (mean true count {mean:.3} over the evaluation authors of {})",
        baseline_feeds.join(",")
    ));

    Ok(BenchReport {
        rows,
        eval_feeds,
        baseline_feeds,
        pairs: pairs.len(),
        mean_n: total_n as f64 / pairs.len() as f64,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_two_examples() {
        assert!(within_factor2(0, 0));
        assert!(within_factor2(10, 5));
        assert!(!within_factor2(20, 9));
        assert!(within_factor2(1, 0));
        assert!(!within_factor2(2, 0));
    }

    #[test]
    fn split_is_eighty_twenty() {
        let ids: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let (test, train) = split_feeds(&ids, 3);
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 8);
        assert!(test.iter().all(|t| !train.contains(t)));
        let few: Vec<String> = ids[..3].to_vec();
        let (test, train) = split_feeds(&few, 3);
        assert_eq!(test, few);
        assert_eq!(train, few);
    }

    #[test]
    fn rmse_of_exact_predictions_is_zero() {
        assert_eq!(rmse_and_pct(&[(3, 3), (0, 0)]), (0.0, 100.0));
        let (r, p) = rmse_and_pct(&[(4, 0), (0, 0)]);
        assert!((r - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(p, 50.0);
    }
}
