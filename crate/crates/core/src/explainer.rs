//! Term-level explanations from the linear tf-idf scorer.
//!
//! Each present feature contributes `weight * tfidf`; features whose terms
//! share a Porter stem (bigrams: the same pair of stems) are summed, and the
//! largest groups by magnitude are reported.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::{paper_terms, stem, vectorize, Vocabulary};
use crate::kg::{EntityId, PaperRecord};
use crate::preference::{LinearScorer, TrainedLensModel};

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureContribution {
    pub index: usize,
    pub term: String,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationItem {
    pub stem: String,
    pub display_term: String,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub paper: EntityId,
    pub feed_id: String,
    pub items: Vec<ExplanationItem>,
    pub k: usize,
}

/// Stem of a unigram, or space-joined stems of a bigram.
pub fn stem_key(term: &str) -> String {
    term.split(' ').map(stem).collect::<Vec<_>>().join(" ")
}

/// `weight * value` for every feature present in the paper, in index order.
/// Their sum is the scorer's decision value minus its bias.
pub fn feature_contributions(
    scorer: &LinearScorer,
    paper: &PaperRecord,
    vocab: &Vocabulary,
) -> Vec<FeatureContribution> {
    vectorize(paper, vocab)
        .entries()
        .iter()
        .map(|&(i, x)| FeatureContribution {
            index: i as usize,
            term: vocab.term(i as usize).to_owned(),
            contribution: scorer.weights.get(i as usize).copied().unwrap_or(0.0) * x,
        })
        .collect()
}

/// Sums contributions per stem key. `display_term` is the member term that
/// occurs most often in the paper (ties: shortest, then alphabetical).
pub fn group_by_stem(contributions: &[FeatureContribution], paper: &PaperRecord) -> Vec<ExplanationItem> {
    let mut frequency: HashMap<String, usize> = HashMap::new();
    for term in paper_terms(paper) {
        *frequency.entry(term).or_default() += 1;
    }
    let mut groups: BTreeMap<String, (f64, Vec<&str>)> = BTreeMap::new();
    for c in contributions {
        let entry = groups.entry(stem_key(&c.term)).or_default();
        entry.0 += c.contribution;
        entry.1.push(&c.term);
    }
    groups
        .into_iter()
        .map(|(stem, (contribution, terms))| {
            let display = terms
                .into_iter()
                .min_by(|a, b| {
                    let fa = frequency.get(*a).copied().unwrap_or(0);
                    let fb = frequency.get(*b).copied().unwrap_or(0);
                    fb.cmp(&fa)
                        .then_with(|| a.len().cmp(&b.len()))
                        .then_with(|| a.cmp(b))
                })
                .unwrap_or_default()
                .to_owned();
            ExplanationItem {
                stem,
                display_term: display,
                contribution,
            }
        })
        .collect()
}

/// Top-`k` stem groups of the text scorer by absolute contribution.
pub fn explain(
    model: &TrainedLensModel,
    paper: &PaperRecord,
    vocab: &Vocabulary,
    k: usize,
) -> Result<Explanation> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let contributions = feature_contributions(&model.text_model, paper, vocab);
    let mut items: Vec<ExplanationItem> = group_by_stem(&contributions, paper)
        .into_iter()
        .filter(|i| i.contribution != 0.0)
        .collect();
    items.sort_by(|a, b| {
        b.contribution
            .abs()
            .total_cmp(&a.contribution.abs())
            .then_with(|| a.stem.cmp(&b.stem))
    });
    items.truncate(k);
    Ok(Explanation {
        paper: paper.id.clone(),
        feed_id: model.feed_id.clone(),
        items,
        k,
    })
}
