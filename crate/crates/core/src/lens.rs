//! Polymorphic lenses: lift paper-level preferences to authors, venues and
//! institutions by counting related papers over the relevance threshold, and
//! use those counts to rank, summarize and recommend.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::Featurizer;
use crate::kg::{EntityId, EntityKind, GraphSnapshot, Relation};
use crate::preference::{score_batch, BatchScores, TrainedLensModel};
use crate::summary::SummaryIndex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LensConfig {
    /// A paper is relevant when its preference is at least this (inclusive).
    pub relevance_threshold: f64,
    /// Relevant-paper count at which an author is always recommended.
    pub dot_threshold: usize,
    /// Share of authors with `1..dot_threshold` relevant papers that are
    /// recommended at random.
    pub dot_random_fraction: f64,
    /// Overview chart cap ("20+").
    pub overview_cap: usize,
}

impl Default for LensConfig {
    fn default() -> Self {
        LensConfig {
            relevance_threshold: 0.5,
            dot_threshold: 5,
            dot_random_fraction: 0.5,
            overview_cap: 20,
        }
    }
}

impl LensConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relevance_threshold > 0.0 && self.relevance_threshold < 1.0) {
            return Err(Error::InvalidArgument(
                "relevance_threshold must be in (0, 1)".into(),
            ));
        }
        if self.dot_threshold < 1 {
            return Err(Error::InvalidArgument("dot_threshold must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dot_random_fraction) {
            return Err(Error::InvalidArgument(
                "dot_random_fraction must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn is_relevant(&self, preference: f64) -> bool {
        preference >= self.relevance_threshold
    }
}

/// Anything that can report a paper's preference value under one lens.
pub trait PreferenceSource: Sync {
    fn preference(&self, paper: &EntityId) -> Result<f64>;
}

impl PreferenceSource for BatchScores {
    fn preference(&self, paper: &EntityId) -> Result<f64> {
        self.get(paper).ok_or_else(|| Error::NotFound(paper.clone()))
    }
}

impl<F: Fn(&EntityId) -> Result<f64> + Sync> PreferenceSource for F {
    fn preference(&self, paper: &EntityId) -> Result<f64> {
        self(paper)
    }
}

/// Full two-scorer ensemble, featurizing on demand.
pub struct EnsembleScorer<'a> {
    pub model: &'a TrainedLensModel,
    pub snapshot: &'a GraphSnapshot,
    pub featurizer: &'a Featurizer,
}

impl PreferenceSource for EnsembleScorer<'_> {
    fn preference(&self, paper: &EntityId) -> Result<f64> {
        let record = self
            .snapshot
            .paper(&paper.key)
            .ok_or_else(|| Error::NotFound(paper.clone()))?;
        Ok(self.model.preference(&self.featurizer.featurize(record)).value())
    }
}

/// The embedding scorer alone, with an invocation counter.
pub struct EmbeddingScorer<'a> {
    pub model: &'a TrainedLensModel,
    pub snapshot: &'a GraphSnapshot,
    pub featurizer: &'a Featurizer,
    invocations: AtomicUsize,
}

impl<'a> EmbeddingScorer<'a> {
    pub fn new(model: &'a TrainedLensModel, snapshot: &'a GraphSnapshot, featurizer: &'a Featurizer) -> Self {
        EmbeddingScorer {
            model,
            snapshot,
            featurizer,
            invocations: AtomicUsize::new(0),
        }
    }

    pub fn invocations(&self) -> usize {
        self.invocations.load(AtomicOrdering::Relaxed)
    }
}

impl PreferenceSource for EmbeddingScorer<'_> {
    fn preference(&self, paper: &EntityId) -> Result<f64> {
        let record = self
            .snapshot
            .paper(&paper.key)
            .ok_or_else(|| Error::NotFound(paper.clone()))?;
        let embedding = self.featurizer.provider().embed(record)?;
        self.invocations.fetch_add(1, AtomicOrdering::Relaxed);
        self.model
            .embedding_preference(&embedding)
            .map(|p| p.value())
            .ok_or_else(|| Error::EmbeddingUnavailable {
                id: paper.key.clone(),
                reason: format!("lens {} has no embedding scorer", self.model.feed_id),
            })
    }
}

/// Count-over-threshold value of one entity under one lens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LensCount {
    pub relevant_count: usize,
    pub total_base: usize,
}

/// One lens's entry of a [`RelevanceSummary`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LensSummaryEntry {
    pub feed_id: String,
    pub relevant_count: usize,
    pub total_base: usize,
    pub capped_count: usize,
}

impl LensSummaryEntry {
    pub fn new(feed_id: impl Into<String>, count: LensCount, config: &LensConfig) -> Self {
        LensSummaryEntry {
            feed_id: feed_id.into(),
            relevant_count: count.relevant_count,
            total_base: count.total_base,
            capped_count: count.relevant_count.min(config.overview_cap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceSummary {
    pub entity: EntityId,
    pub entries: Vec<LensSummaryEntry>,
}

/// Number of papers related to `t` via `relation` whose preference meets the
/// relevance threshold, and the size of that content list.
pub fn lens_over_type(
    source: &dyn PreferenceSource,
    snapshot: &GraphSnapshot,
    t: &EntityId,
    relation: Relation,
    config: &LensConfig,
) -> Result<LensCount> {
    let papers = snapshot.content_list(t, relation)?;
    let mut relevant_count = 0;
    for paper in &papers {
        if config.is_relevant(source.preference(paper)?) {
            relevant_count += 1;
        }
    }
    Ok(LensCount {
        relevant_count,
        total_base: papers.len(),
    })
}

/// Kind reached by following `chain` from `start`, checking every hop.
fn chain_end(start: EntityKind, chain: &[Relation]) -> Result<EntityKind> {
    let mut kind = start;
    for (hop, &relation) in chain.iter().enumerate() {
        let (source, target) = relation.endpoints();
        let next = if kind == source {
            target
        } else if kind == target {
            source
        } else {
            return Err(Error::InvalidRelation {
                kind: kind.to_string(),
                relation,
            });
        };
        let last = hop + 1 == chain.len();
        if (next == EntityKind::Paper) != last {
            return Err(Error::InvalidRelation {
                kind: kind.to_string(),
                relation,
            });
        }
        kind = next;
    }
    Ok(kind)
}

/// Lens applied through intermediate entity types.
///
/// `chain` lists relations from `t` down to papers, e.g.
/// `[AffiliatedWith, WrittenBy]` for an institution. With one relation this is
/// [`lens_over_type`]'s relevant count; with more, it counts the intermediate
/// entities whose own value reaches `dot_threshold`.
pub fn recursive_lens(
    source: &dyn PreferenceSource,
    snapshot: &GraphSnapshot,
    t: &EntityId,
    chain: &[Relation],
    config: &LensConfig,
) -> Result<usize> {
    if chain.is_empty() {
        return Err(Error::InvalidArgument("relation chain is empty".into()));
    }
    chain_end(t.kind, chain)?;
    recurse(source, snapshot, t, chain, config)
}

fn recurse(
    source: &dyn PreferenceSource,
    snapshot: &GraphSnapshot,
    t: &EntityId,
    chain: &[Relation],
    config: &LensConfig,
) -> Result<usize> {
    if chain.len() == 1 {
        return Ok(lens_over_type(source, snapshot, t, chain[0], config)?.relevant_count);
    }
    let mut count = 0;
    for child in snapshot.related(t, chain[0])? {
        if recurse(source, snapshot, child, &chain[1..], config)? >= config.dot_threshold {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankItem {
    pub id: EntityId,
    pub score: f64,
    pub citation_count: u64,
}

fn rank_cmp(a: &RankItem, b: &RankItem) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.citation_count.cmp(&a.citation_count))
        .then_with(|| a.id.key.cmp(&b.id.key))
        .then_with(|| a.id.kind.cmp(&b.id.kind))
}

/// Descending by score, then citation count descending, then key ascending.
pub fn rank_entities(mut items: Vec<RankItem>) -> Vec<RankItem> {
    items.sort_by(rank_cmp);
    items
}

/// Ranks `(entity, score)` pairs, taking tie-break citation counts from the graph.
pub fn rank_with_snapshot(
    snapshot: &GraphSnapshot,
    scored: impl IntoIterator<Item = (EntityId, f64)>,
) -> Vec<RankItem> {
    rank_entities(
        scored
            .into_iter()
            .map(|(id, score)| RankItem {
                citation_count: snapshot.citation_count(&id),
                id,
                score,
            })
            .collect(),
    )
}

/// Per-lens seed for the random half of the recommendation dots, stable for
/// a given page and feed.
pub fn lens_page_seed(page_seed: u64, feed_id: &str) -> u64 {
    crate::seed::mix(page_seed, feed_id)
}

/// Authors that get a recommendation dot.
///
/// Everyone at or above `dot_threshold`, plus `floor(fraction * m)` of the
/// `m` authors with `1..dot_threshold` relevant papers, chosen by a shuffle
/// seeded with `seed`. Authors with no relevant papers are never included.
pub fn recommend_authors(
    counts: &[(EntityId, usize)],
    config: &LensConfig,
    seed: u64,
) -> BTreeSet<EntityId> {
    let mut chosen: BTreeSet<EntityId> = counts
        .iter()
        .filter(|(_, c)| *c >= config.dot_threshold)
        .map(|(id, _)| id.clone())
        .collect();
    let mut middle: Vec<&EntityId> = counts
        .iter()
        .filter(|(_, c)| (1..config.dot_threshold).contains(c))
        .map(|(id, _)| id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let take = (middle.len() as f64 * config.dot_random_fraction).floor() as usize;
    middle.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    chosen.extend(middle.into_iter().take(take).cloned());
    chosen
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperLensScore {
    pub score: f64,
    pub relevant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PagePaper {
    pub paper_id: String,
    pub lenses: BTreeMap<String, PaperLensScore>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorLensSummary {
    pub relevant_count: usize,
    pub capped_count: usize,
    pub total_base: usize,
    pub recommended: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageAuthor {
    pub author_id: String,
    pub lenses: BTreeMap<String, AuthorLensSummary>,
}

/// Everything the UI needs to decorate one page.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageScoring {
    pub feeds: Vec<String>,
    /// Page papers in request order, deduplicated.
    pub papers: Vec<PagePaper>,
    /// Authors of the page papers in order of first appearance.
    pub authors: Vec<PageAuthor>,
    /// Paper ids ordered by the first lens's scores.
    pub sort_order: Vec<String>,
    /// Distinct papers scored per lens to build this page.
    pub unique_base_entities: usize,
    /// Author counts come from the summary index rather than exhaustive scoring.
    pub approx: bool,
}

/// Where author counts on a page come from.
#[derive(Clone, Copy)]
pub enum AuthorCounts<'a> {
    Exact,
    Approx(&'a SummaryIndex),
}

/// Scores a page under several lenses.
///
/// Per lens, all distinct papers needed (page papers plus every paper of every
/// author on the page, unless approximate counts are requested) are scored in
/// one batch. Lenses are computed independently.
pub fn score_page(
    models: &[&TrainedLensModel],
    snapshot: &GraphSnapshot,
    featurizer: &Featurizer,
    page: &[EntityId],
    config: &LensConfig,
    page_seed: u64,
    counts_from: AuthorCounts<'_>,
) -> Result<PageScoring> {
    config.validate()?;
    let mut seen = BTreeSet::new();
    let page: Vec<&EntityId> = page.iter().filter(|p| seen.insert(*p)).collect();
    for p in &page {
        if p.kind != EntityKind::Paper || snapshot.paper(&p.key).is_none() {
            return Err(Error::NotFound((*p).clone()));
        }
    }
    let mut author_seen = BTreeSet::new();
    let mut authors: Vec<EntityId> = Vec::new();
    for p in &page {
        for a in snapshot.forward(Relation::WrittenBy, p) {
            if author_seen.insert(a.clone()) {
                authors.push(a.clone());
            }
        }
    }

    let mut base: BTreeSet<EntityId> = page.iter().map(|p| (*p).clone()).collect();
    let author_papers: Vec<Vec<EntityId>> = authors
        .iter()
        .map(|a| snapshot.content_list(a, Relation::WrittenBy))
        .collect::<Result<_>>()?;
    let approx = matches!(counts_from, AuthorCounts::Approx(_));
    if !approx {
        for list in &author_papers {
            base.extend(list.iter().cloned());
        }
    }
    let base: Vec<EntityId> = base.into_iter().collect();

    let mut papers: Vec<PagePaper> = page
        .iter()
        .map(|p| PagePaper {
            paper_id: p.key.clone(),
            lenses: BTreeMap::new(),
        })
        .collect();
    let mut page_authors: Vec<PageAuthor> = authors
        .iter()
        .map(|a| PageAuthor {
            author_id: a.key.clone(),
            lenses: BTreeMap::new(),
        })
        .collect();
    let mut sort_order: Vec<String> = page.iter().map(|p| p.key.clone()).collect();

    for (lens_idx, model) in models.iter().enumerate() {
        let batch = score_batch(model, &base, snapshot, featurizer);
        for (row, p) in papers.iter_mut().zip(&page) {
            let score = batch.preference(p)?;
            row.lenses.insert(
                model.feed_id.clone(),
                PaperLensScore {
                    score,
                    relevant: config.is_relevant(score),
                },
            );
        }

        let mut counts: Vec<LensCount> = Vec::with_capacity(authors.len());
        for (author, list) in authors.iter().zip(&author_papers) {
            let count = match counts_from {
                AuthorCounts::Exact => {
                    let mut relevant_count = 0;
                    for p in list {
                        if config.is_relevant(batch.preference(p)?) {
                            relevant_count += 1;
                        }
                    }
                    LensCount {
                        relevant_count,
                        total_base: list.len(),
                    }
                }
                AuthorCounts::Approx(index) => LensCount {
                    relevant_count: index.estimate_author(model, author, config)?.count,
                    total_base: list.len(),
                },
            };
            counts.push(count);
        }
        let pairs: Vec<(EntityId, usize)> = authors
            .iter()
            .cloned()
            .zip(counts.iter().map(|c| c.relevant_count))
            .collect();
        let recommended = recommend_authors(&pairs, config, lens_page_seed(page_seed, &model.feed_id));
        for ((row, author), count) in page_authors.iter_mut().zip(&authors).zip(&counts) {
            row.lenses.insert(
                model.feed_id.clone(),
                AuthorLensSummary {
                    relevant_count: count.relevant_count,
                    capped_count: count.relevant_count.min(config.overview_cap),
                    total_base: count.total_base,
                    recommended: recommended.contains(author),
                },
            );
        }

        if lens_idx == 0 {
            let ranked = rank_with_snapshot(
                snapshot,
                page.iter()
                    .map(|p| ((*p).clone(), batch.get(p).unwrap_or(0.0))),
            );
            sort_order = ranked.into_iter().map(|r| r.id.key).collect();
        }
    }

    Ok(PageScoring {
        feeds: models.iter().map(|m| m.feed_id.clone()).collect(),
        papers,
        authors: page_authors,
        sort_order,
        unique_base_entities: base.len(),
        approx,
    })
}
