mod common;

use std::collections::{BTreeMap, BTreeSet};

use polylens::featurizer::{build_vocabulary, paper_terms, stem, tokenize, vectorize, PrecomputedEmbeddings};
use polylens::kg::PaperRecord;
use polylens::synth::generate;
use polylens::{EmbeddingProvider, EntityId, HashingEmbedder};
use proptest::prelude::*;

// Char-by-char reference tokenizer.
fn reference_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut len = 0;
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            cur.push(c);
            len += 1;
        } else {
            if len >= 2 {
                out.push(cur.to_lowercase());
            }
            cur.clear();
            len = 0;
        }
    }
    out
}

fn paper(key: &str, title: &str, abstract_text: &str) -> PaperRecord {
    PaperRecord {
        id: EntityId::paper(key),
        title: title.into(),
        abstract_text: abstract_text.into(),
        year: 2020,
        venue: None,
        authors: vec![],
        cites: vec![],
        citation_count: 0,
        stub: false,
    }
}

#[test]
fn tokenizer_examples() {
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("Human-Centered AI!"), vec!["human", "centered", "ai"]);
}

#[test]
fn tokenizer_matches_reference_on_corpus() {
    let corpus = generate(&common::small_config(1));
    for p in &corpus.papers {
        assert_eq!(tokenize(&p.abstract_text), reference_tokens(&p.abstract_text));
    }
}

#[test]
fn document_frequencies_match_brute_force() {
    let corpus = generate(&common::small_config(2));
    let snapshot = corpus.snapshot();
    let vocab = build_vocabulary(&snapshot).unwrap();
    let docs: Vec<BTreeSet<String>> = snapshot
        .corpus_papers()
        .map(|p| paper_terms(p).into_iter().collect())
        .collect();
    let n = docs.len();
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    for d in &docs {
        for t in d {
            *expected.entry(t.clone()).or_default() += 1;
        }
    }
    expected.retain(|_, df| *df >= 2 && (*df as f64) / (n as f64) <= 0.9);
    assert_eq!(vocab.len(), expected.len());
    for (term, df) in &expected {
        let i = vocab.index_of(term).unwrap_or_else(|| panic!("missing {term}"));
        assert_eq!(vocab.df(i), *df, "{term}");
    }
    assert_eq!(vocab.total_docs(), n);
}

#[test]
fn tfidf_weights_match_formula() {
    let corpus = generate(&common::small_config(3));
    let snapshot = corpus.snapshot();
    let vocab = build_vocabulary(&snapshot).unwrap();
    let n = vocab.total_docs() as f64;
    for p in snapshot.corpus_papers() {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in paper_terms(p) {
            if vocab.index_of(&t).is_some() {
                *tf.entry(t).or_default() += 1.0;
            }
        }
        let raw: BTreeMap<usize, f64> = tf
            .iter()
            .map(|(t, c)| {
                let i = vocab.index_of(t).unwrap();
                (i, c * (((1.0 + n) / (1.0 + vocab.df(i) as f64)).ln() + 1.0))
            })
            .collect();
        let norm = raw.values().map(|w| w * w).sum::<f64>().sqrt();
        let v = vectorize(p, &vocab);
        assert_eq!(v.entries().len(), raw.len());
        for (&(i, w), (&ei, &ew)) in v.entries().iter().zip(&raw) {
            assert_eq!(i as usize, ei);
            assert!((w - ew / norm).abs() < 1e-12);
        }
        if !v.is_empty() {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn no_bigram_across_title_and_abstract() {
    let terms = paper_terms(&paper("p", "deep learning", "models rock"));
    assert!(terms.contains(&"deep learning".to_string()));
    assert!(terms.contains(&"models rock".to_string()));
    assert!(!terms.contains(&"learning models".to_string()));
}

#[test]
fn stem_examples() {
    assert_eq!(stem("interpretability"), "interpret");
    assert_eq!(stem("ai"), "ai");
    assert_eq!(stem("embeddings"), "embed");
}

#[test]
fn hashing_provider_examples() {
    let h = HashingEmbedder::default();
    let a = h.embed(&paper("a", "same title", "same text")).unwrap();
    let b = h.embed(&paper("b", "same title", "same text")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dim(), 64);
    let empty = h.embed(&paper("c", "", "")).unwrap();
    assert!(empty.as_slice().iter().all(|x| *x == 0.0));
}

#[test]
fn precomputed_provider_returns_file_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"p1\",\"vector\":[0.25,-1.5,3.0]}\n{\"id\":\"p2\",\"vector\":[1.0,2.0,3.0]}\n",
    )
    .unwrap();
    let provider = PrecomputedEmbeddings::load(&path).unwrap();
    assert_eq!(provider.dim(), 3);
    assert_eq!(provider.embed(&paper("p1", "", "")).unwrap().as_slice(), &[0.25, -1.5, 3.0]);
    assert!(provider.embed(&paper("p3", "", "")).is_err());

    std::fs::write(&path, "{\"id\":\"p1\",\"vector\":[1.0]}\n{\"id\":\"p2\",\"vector\":[1.0,2.0]}\n").unwrap();
    let err = PrecomputedEmbeddings::load(&path).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

proptest! {
    #[test]
    fn indices_in_range_and_unit_norm(seed in 0u64..200) {
        let corpus = generate(&common::small_config(seed));
        let snapshot = corpus.snapshot();
        let vocab = build_vocabulary(&snapshot).unwrap();
        for p in snapshot.corpus_papers().take(10) {
            let v = vectorize(p, &vocab);
            for w in v.entries().windows(2) {
                prop_assert!(w[0].0 < w[1].0);
            }
            for &(i, _) in v.entries() {
                prop_assert!((i as usize) < vocab.len());
            }
            if !v.is_empty() {
                prop_assert!((v.norm() - 1.0).abs() < 1e-9);
            }
            prop_assert_eq!(vectorize(p, &vocab), v);
        }
    }

    #[test]
    fn tokenizer_agrees_with_reference(text in "\\PC{0,80}") {
        prop_assert_eq!(tokenize(&text), reference_tokens(&text));
    }

    #[test]
    fn stem_never_lengthens(word in "[a-z]{1,14}") {
        let s = stem(&word);
        prop_assert!(s.len() <= word.len());
        prop_assert_eq!(stem(&word), s);
    }
}
