use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};
use crate::kg::PaperRecord;

/// Fixed-dimension dense vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseEmbedding(pub Vec<f64>);

impl DenseEmbedding {
    pub fn zeros(dim: usize) -> Self {
        DenseEmbedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn squared_distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Source of dense paper embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, paper: &PaperRecord) -> Result<DenseEmbedding>;
}

/// Deterministic feature-hashing projection of token counts.
///
/// Every token adds a signed unit to a few hashed coordinates (a sparse random
/// projection of the tf vector); the result is L2-normalized. Empty text maps
/// to the zero vector.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

const HASHES_PER_TOKEN: u64 = 4;

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim, seed }
    }

    pub fn embed_text(&self, text: &str) -> DenseEmbedding {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            for k in 0..HASHES_PER_TOKEN {
                let h = fnv1a(self.seed.wrapping_add(k), token.as_bytes());
                let idx = (h % self.dim as u64) as usize;
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[idx] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        DenseEmbedding(v)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(64, 0x5eed)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, paper: &PaperRecord) -> Result<DenseEmbedding> {
        Ok(self.embed_text(&format!("{}\n{}", paper.title, paper.abstract_text)))
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // final avalanche so the sign bit is well mixed
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

/// Embeddings read from a JSONL file keyed by paper id.
#[derive(Clone, Debug, Default)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    vectors: HashMap<String, DenseEmbedding>,
}

impl PrecomputedEmbeddings {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let row: EmbeddingLine = serde_json::from_str(&line)
                .map_err(|e| Error::malformed("embeddings.jsonl", lineno, "<line>", e.to_string()))?;
            if row.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::malformed(
                    "embeddings.jsonl",
                    lineno,
                    "vector",
                    "non-finite component",
                ));
            }
            match dim {
                None => dim = Some(row.vector.len()),
                Some(d) if d != row.vector.len() => {
                    return Err(Error::malformed(
                        "embeddings.jsonl",
                        lineno,
                        "vector",
                        format!("dimension {} differs from {d}", row.vector.len()),
                    ));
                }
                Some(_) => {}
            }
            if vectors.insert(row.id.clone(), DenseEmbedding(row.vector)).is_some() {
                return Err(Error::malformed(
                    "embeddings.jsonl",
                    lineno,
                    "id",
                    format!("duplicate id `{}`", row.id),
                ));
            }
        }
        Ok(PrecomputedEmbeddings {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn name(&self) -> &str {
        "precomputed"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, paper: &PaperRecord) -> Result<DenseEmbedding> {
        self.vectors
            .get(&paper.id.key)
            .cloned()
            .ok_or_else(|| Error::EmbeddingUnavailable {
                id: paper.id.key.clone(),
                reason: "not in precomputed file".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;

    fn paper(key: &str, title: &str, abs: &str) -> PaperRecord {
        PaperRecord {
            id: EntityId::paper(key),
            title: title.into(),
            abstract_text: abs.into(),
            year: 2020,
            venue: None,
            authors: vec![],
            cites: vec![],
            citation_count: 0,
            stub: false,
        }
    }

    #[test]
    fn hashing_is_deterministic_and_zero_on_empty() {
        let h = HashingEmbedder::default();
        let a = h.embed(&paper("a", "Polymorphic lenses", "ranking authors")).unwrap();
        let b = h.embed(&paper("b", "Polymorphic lenses", "ranking authors")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 64);
        assert!((a.dot(a.as_slice()) - 1.0).abs() < 1e-12);
        let z = h.embed(&paper("z", "", "")).unwrap();
        assert_eq!(z, DenseEmbedding::zeros(64));
    }

    #[test]
    fn precomputed_reads_vectors_verbatim() {
        let file = "{\"id\":\"p1\",\"vector\":[0.25,-1.5,3.0]}\n{\"id\":\"p2\",\"vector\":[1,2,3]}\n";
        let pre = PrecomputedEmbeddings::from_reader(file.as_bytes()).unwrap();
        assert_eq!(pre.dim(), 3);
        assert_eq!(
            pre.embed(&paper("p1", "", "")).unwrap(),
            DenseEmbedding(vec![0.25, -1.5, 3.0])
        );
        assert!(matches!(
            pre.embed(&paper("p9", "", "")),
            Err(Error::EmbeddingUnavailable { .. })
        ));
    }

    #[test]
    fn precomputed_rejects_ragged_dimensions() {
        let file = "{\"id\":\"p1\",\"vector\":[1,2]}\n{\"id\":\"p2\",\"vector\":[1,2,3]}\n";
        let err = PrecomputedEmbeddings::from_reader(file.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
