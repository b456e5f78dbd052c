//! Paper text features: tokenization, a unigram+bigram tf-idf vocabulary,
//! dense embeddings, and Porter stemming for explanations.

mod embedding;
mod porter;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embedding::{DenseEmbedding, EmbeddingProvider, HashingEmbedder, PrecomputedEmbeddings};
pub use porter::stem;

use crate::error::{Error, Result};
use crate::kg::{GraphSnapshot, PaperRecord};

/// Lowercases, splits on non-alphanumeric characters and keeps tokens of at
/// least two characters, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Unigrams followed by adjacent bigrams of one text field.
fn field_terms(text: &str, out: &mut Vec<String>) {
    let tokens = tokenize(text);
    for pair in tokens.windows(2) {
        out.push(format!("{} {}", pair[0], pair[1]));
    }
    out.extend(tokens);
}

/// All unigram and bigram occurrences of a paper's title and abstract.
/// Bigrams never span the title/abstract boundary.
pub fn paper_terms(paper: &PaperRecord) -> Vec<String> {
    let mut terms = Vec::new();
    field_terms(&paper.title, &mut terms);
    field_terms(&paper.abstract_text, &mut terms);
    terms
}

pub const MIN_DF: usize = 2;
pub const MAX_DF_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    total_docs: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from already-tokenized documents.
    pub fn from_documents<I, D>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = String>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut total_docs = 0;
        for doc in docs {
            total_docs += 1;
            let mut terms: Vec<String> = doc.into_iter().collect();
            terms.sort_unstable();
            terms.dedup();
            for term in terms {
                *df.entry(term).or_default() += 1;
            }
        }
        if total_docs == 0 {
            return Err(Error::EmptyCorpus);
        }
        let (terms, df): (Vec<String>, Vec<usize>) = df
            .into_iter()
            .filter(|(_, d)| *d >= MIN_DF && (*d as f64) / (total_docs as f64) <= MAX_DF_FRACTION)
            .unzip();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            terms,
            df,
            total_docs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
    pub fn idf(&self, index: usize) -> f64 {
        let n = self.total_docs as f64;
        ((1.0 + n) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &str)> {
        self.terms.iter().enumerate().map(|(i, t)| (i, t.as_str()))
    }
}

/// Vocabulary over the title and abstract of every non-stub paper.
pub fn build_vocabulary(snapshot: &GraphSnapshot) -> Result<Vocabulary> {
    Vocabulary::from_documents(snapshot.corpus_papers().map(paper_terms))
}

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Sorts by index and sums duplicate indices.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|(i, _)| *i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| dense.get(i as usize).copied().unwrap_or(0.0) * v)
            .sum()
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|pos| self.entries[pos].1)
    }
}

/// tf-idf vector of a paper, L2-normalized. Out-of-vocabulary terms are dropped.
pub fn vectorize(paper: &PaperRecord, vocab: &Vocabulary) -> SparseVector {
    let mut tf: HashMap<usize, f64> = HashMap::new();
    for term in paper_terms(paper) {
        if let Some(i) = vocab.index_of(&term) {
            *tf.entry(i).or_default() += 1.0;
        }
    }
    let pairs: Vec<(u32, f64)> = tf
        .into_iter()
        .map(|(i, count)| (i as u32, count * vocab.idf(i)))
        .collect();
    let mut v = SparseVector::from_pairs(pairs);
    let norm = v.norm();
    if norm > 0.0 {
        for (_, w) in &mut v.entries {
            *w /= norm;
        }
    }
    v
}

/// Both feature views of one paper.
#[derive(Clone, Debug, PartialEq)]
pub struct PaperFeatures {
    pub tfidf: SparseVector,
    pub embedding: Option<DenseEmbedding>,
}

/// Vocabulary plus embedding provider: everything needed to featurize papers
/// of one snapshot.
#[derive(Clone)]
pub struct Featurizer {
    vocab: Arc<Vocabulary>,
    provider: Arc<dyn EmbeddingProvider>,
}

impl Featurizer {
    pub fn new(vocab: Arc<Vocabulary>, provider: Arc<dyn EmbeddingProvider>) -> Self {
        Featurizer { vocab, provider }
    }

    /// Builds the vocabulary from `snapshot` and uses the default hashing provider.
    pub fn for_snapshot(snapshot: &GraphSnapshot) -> Result<Self> {
        Ok(Self::new(
            Arc::new(build_vocabulary(snapshot)?),
            Arc::new(HashingEmbedder::default()),
        ))
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    /// Embedding failures are not fatal here; the embedding view is left empty.
    pub fn featurize(&self, paper: &PaperRecord) -> PaperFeatures {
        let embedding = match self.provider.embed(paper) {
            Ok(e) => Some(e),
            Err(e) => {
                log::debug!("no embedding for {}: {e}", paper.id);
                None
            }
        };
        PaperFeatures {
            tfidf: vectorize(paper, &self.vocab),
            embedding,
        }
    }
}

impl std::fmt::Debug for Featurizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Featurizer")
            .field("vocab_len", &self.vocab.len())
            .field("provider", &self.provider.name())
            .finish()
    }
}
