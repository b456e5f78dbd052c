//! Summary embeddings: per-author K-means centroids of paper embeddings.
//!
//! Estimating an author's relevant-paper count then costs K scorer calls (one
//! per centroid) instead of one per paper; the estimate is the summed size of
//! clusters whose centroid is relevant.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::{DenseEmbedding, EmbeddingProvider};
use crate::kg::{EntityId, GraphSnapshot, Relation};
use crate::lens::LensConfig;
use crate::preference::TrainedLensModel;

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE: f64 = 1e-6;

/// How many clusters to build for an author with `n` papers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KPolicy {
    SingleCluster,
    Sqrt(f64),
    Exhaustive,
}

impl KPolicy {
    pub const SQRT_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

    /// Single cluster, the five sqrt multipliers, then exhaustive.
    pub fn sweep() -> Vec<KPolicy> {
        let mut out = vec![KPolicy::SingleCluster];
        out.extend(Self::SQRT_MULTIPLIERS.iter().map(|&m| KPolicy::Sqrt(m)));
        out.push(KPolicy::Exhaustive);
        out
    }
}

impl fmt::Display for KPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KPolicy::SingleCluster => f.write_str("single"),
            KPolicy::Sqrt(m) => write!(f, "sqrt:{m}"),
            KPolicy::Exhaustive => f.write_str("exhaustive"),
        }
    }
}

impl FromStr for KPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(KPolicy::SingleCluster),
            "exhaustive" => Ok(KPolicy::Exhaustive),
            other => {
                let m = other
                    .strip_prefix("sqrt:")
                    .and_then(|m| m.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown K policy `{other}`")))?;
                if !Self::SQRT_MULTIPLIERS.contains(&m) {
                    return Err(Error::InvalidArgument(format!(
                        "sqrt multiplier must be one of 0.25, 0.5, 1, 2, 4 (got {m})"
                    )));
                }
                Ok(KPolicy::Sqrt(m))
            }
        }
    }
}

impl Serialize for KPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of clusters for `n >= 1` papers.
pub fn resolve_k(policy: KPolicy, n: usize) -> usize {
    assert!(n >= 1, "resolve_k needs at least one paper");
    match policy {
        KPolicy::SingleCluster => 1,
        KPolicy::Sqrt(m) => ((m * (n as f64).sqrt()).round() as usize).clamp(1, n),
        KPolicy::Exhaustive => n,
    }
}

/// Result of clustering: per-point cluster index and per-cluster centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            remaining[rng.gen_range(0..remaining.len())]
        };
        chosen[next] = true;
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points[next]));
        }
    }
    centroids
}

/// Lloyd's K-means with k-means++ seeding.
///
/// Stops after [`MAX_ITERATIONS`] or once no centroid moves more than
/// [`CONVERGENCE`]. An empty cluster is reseeded with the point farthest from
/// its centroid; clusters that stay empty are dropped, so the result may have
/// fewer than `k` clusters. `k == n` assigns every point its own cluster.
pub fn kmeans(points: &[&[f64]], k: usize, seed: u64) -> KMeansFit {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k must be in [1, n]");
    if k == n {
        return KMeansFit {
            assignment: (0..n).collect(),
            centroids: points.iter().map(|p| p.to_vec()).collect(),
        };
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut assignment = vec![0; n];

    for _ in 0..MAX_ITERATIONS {
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            assignment[i] = j;
            dist[i] = d;
        }
        let mut sizes = vec![0usize; k];
        for &j in &assignment {
            sizes[j] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| dist[i] > 0.0) {
                sizes[assignment[i]] -= 1;
                assignment[i] = j;
                sizes[j] = 1;
                dist[i] = 0.0;
                centroids[j] = points[i].to_vec();
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            for (s, x) in sums[assignment[i]].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        let mut moved: f64 = 0.0;
        for j in 0..k {
            if sizes[j] == 0 {
                continue;
            }
            let mean: Vec<f64> = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            moved = moved.max(sq_dist(&mean, &centroids[j]).sqrt());
            centroids[j] = mean;
        }
        if moved < CONVERGENCE {
            break;
        }
    }

    // Final assignment against the final centroids, then exact member means.
    for (i, p) in points.iter().enumerate() {
        assignment[i] = nearest(p, &centroids).0;
    }
    let mut remap = vec![usize::MAX; k];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, &j) in assignment.iter().enumerate() {
        if remap[j] == usize::MAX {
            remap[j] = members.len();
            members.push(Vec::new());
        }
        members[remap[j]].push(i);
    }
    let assignment = assignment.iter().map(|&j| remap[j]).collect();
    let centroids = members
        .iter()
        .map(|idx| {
            let mut mean = vec![0.0; dim];
            for &i in idx {
                for (m, x) in mean.iter_mut().zip(points[i].iter()) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
            mean
        })
        .collect();
    KMeansFit {
        assignment,
        centroids,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub centroid: DenseEmbedding,
    pub size: usize,
    /// Paper keys.
    pub member_ids: Vec<String>,
}

/// Clusters of one author's papers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub owner: EntityId,
    pub clusters: Vec<Cluster>,
    pub built_at_version: u64,
}

impl ClusterSet {
    pub fn paper_count(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }

    fn same_clusters(&self, other: &ClusterSet) -> bool {
        self.owner == other.owner && self.clusters == other.clusters
    }
}

/// Clusters `members` (paper id, embedding) under `policy`.
pub fn build_cluster_set(
    owner: &EntityId,
    members: &[(EntityId, DenseEmbedding)],
    policy: KPolicy,
    seed: u64,
    version: u64,
) -> Result<ClusterSet> {
    if members.is_empty() {
        return Err(Error::EmbeddingUnavailable {
            id: owner.key.clone(),
            reason: "no paper embeddings to cluster".into(),
        });
    }
    let points: Vec<&[f64]> = members.iter().map(|(_, e)| e.as_slice()).collect();
    let k = resolve_k(policy, members.len());
    let fit = kmeans(&points, k, seed);
    let mut clusters: Vec<Cluster> = fit
        .centroids
        .into_iter()
        .map(|c| Cluster {
            centroid: DenseEmbedding(c),
            size: 0,
            member_ids: Vec::new(),
        })
        .collect();
    for ((id, _), &j) in members.iter().zip(&fit.assignment) {
        clusters[j].size += 1;
        clusters[j].member_ids.push(id.key.clone());
    }
    Ok(ClusterSet {
        owner: owner.clone(),
        clusters,
        built_at_version: version,
    })
}

/// An approximate count and the number of scorer applications it took.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: usize,
    pub invocations: usize,
}

/// Summed size of the clusters whose centroid the embedding scorer deems relevant.
pub fn estimate_count(
    model: &TrainedLensModel,
    clusters: &ClusterSet,
    config: &LensConfig,
) -> Result<Estimate> {
    let mut estimate = Estimate::default();
    for cluster in &clusters.clusters {
        let pref = model
            .embedding_preference(&cluster.centroid)
            .ok_or_else(|| Error::EmbeddingUnavailable {
                id: clusters.owner.key.clone(),
                reason: format!("lens {} has no embedding scorer", model.feed_id),
            })?;
        estimate.invocations += 1;
        if config.is_relevant(pref.value()) {
            estimate.count += cluster.size;
        }
    }
    Ok(estimate)
}

/// Per-author cluster sets for a whole snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryIndex {
    pub version: u64,
    pub policy: KPolicy,
    pub seed: u64,
    pub authors: BTreeMap<String, ClusterSet>,
}

impl SummaryIndex {
    pub fn empty(policy: KPolicy, seed: u64) -> Self {
        SummaryIndex {
            version: 0,
            policy,
            seed,
            authors: BTreeMap::new(),
        }
    }

    pub fn get(&self, author: &EntityId) -> Option<&ClusterSet> {
        self.authors.get(&author.key)
    }

    pub fn estimate_author(
        &self,
        model: &TrainedLensModel,
        author: &EntityId,
        config: &LensConfig,
    ) -> Result<Estimate> {
        let set = self.get(author).ok_or_else(|| Error::NotFound(author.clone()))?;
        estimate_count(model, set, config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub version: u64,
    pub authors: usize,
    /// Authors whose clusters changed (or are new) relative to the previous index.
    pub rebuilt: usize,
    pub failed: Vec<String>,
}

/// Embeddings of an author's papers in content-list order.
pub fn author_embeddings(
    snapshot: &GraphSnapshot,
    provider: &dyn EmbeddingProvider,
    author: &EntityId,
) -> Result<Vec<(EntityId, DenseEmbedding)>> {
    snapshot
        .content_list(author, Relation::WrittenBy)?
        .into_iter()
        .map(|p| {
            let record = snapshot.paper(&p.key).ok_or_else(|| Error::NotFound(p.clone()))?;
            Ok((p, provider.embed(record)?))
        })
        .collect()
}

/// Builds cluster sets for every author.
///
/// Each author gets its own seed derived from `seed`, so an author's clusters
/// depend only on its own papers. Cluster sets identical to `previous` keep
/// their earlier `built_at_version`.
pub fn build_index(
    snapshot: &GraphSnapshot,
    provider: &dyn EmbeddingProvider,
    policy: KPolicy,
    seed: u64,
    previous: Option<&SummaryIndex>,
) -> (SummaryIndex, RefreshReport) {
    let version = snapshot.version();
    let authors: Vec<&EntityId> = snapshot.authors().map(|a| &a.id).collect();
    let built: Vec<(String, Result<ClusterSet>)> = authors
        .par_iter()
        .map(|author| {
            let result = author_embeddings(snapshot, provider, author).and_then(|members| {
                if members.is_empty() {
                    Ok(ClusterSet {
                        owner: (*author).clone(),
                        clusters: Vec::new(),
                        built_at_version: version,
                    })
                } else {
                    let author_seed = crate::seed::mix(seed, &author.key);
                    build_cluster_set(author, &members, policy, author_seed, version)
                }
            });
            (author.key.clone(), result)
        })
        .collect();

    let reusable = previous.filter(|p| p.policy == policy && p.seed == seed);
    let mut index = SummaryIndex {
        version,
        policy,
        seed,
        authors: BTreeMap::new(),
    };
    let mut report = RefreshReport {
        version,
        ..RefreshReport::default()
    };
    for (key, result) in built {
        match result {
            Ok(mut set) => {
                match reusable.and_then(|p| p.authors.get(&key)) {
                    Some(old) if old.same_clusters(&set) => set.built_at_version = old.built_at_version,
                    _ => report.rebuilt += 1,
                }
                index.authors.insert(key, set);
            }
            Err(e) => {
                log::warn!("summary index: author {key} failed: {e}");
                report.failed.push(key);
            }
        }
    }
    report.authors = index.authors.len();
    (index, report)
}

/// Shared handle to the current index. Readers always see a complete index;
/// a refresh swaps in the new one only if every author built.
#[derive(Debug)]
pub struct IndexHandle {
    current: RwLock<Arc<SummaryIndex>>,
}

impl IndexHandle {
    pub fn new(index: SummaryIndex) -> Self {
        IndexHandle {
            current: RwLock::new(Arc::new(index)),
        }
    }

    pub fn current(&self) -> Arc<SummaryIndex> {
        self.current.read().expect("index lock poisoned").clone()
    }

    pub fn refresh(
        &self,
        snapshot: &GraphSnapshot,
        provider: &dyn EmbeddingProvider,
        policy: KPolicy,
        seed: u64,
    ) -> RefreshReport {
        let previous = self.current();
        let (index, report) = build_index(snapshot, provider, policy, seed, Some(&previous));
        if report.failed.is_empty() {
            *self.current.write().expect("index lock poisoned") = Arc::new(index);
        }
        report
    }
}
