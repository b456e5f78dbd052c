//! Seeded synthetic corpora with topic structure.
//!
//! Every topic owns a disjoint vocabulary of made-up words. A paper draws most
//! of its words from its primary topic, a share from one other topic and a few
//! from a shared pool, so papers form one blob per topic in embedding space
//! with a continuous spread toward the other blobs. Authors write in one or
//! two topics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::{ingest_corpus, write_jsonl, AuthorLine, GraphSnapshot, PaperLine, VenueLine};
use crate::preference::{Feed, Rating};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub papers: usize,
    pub authors: usize,
    pub topics: usize,
    pub venues: usize,
    pub institutions: usize,
    pub words_per_topic: usize,
    pub title_len: usize,
    pub abstract_len: usize,
    /// Range of the share of words drawn from a paper's primary topic.
    pub purity: (f64, f64),
    /// Share of words drawn from the shared pool.
    pub common_share: f64,
    /// Share of authors that write in a single topic.
    pub single_topic_authors: f64,
    pub max_coauthors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            papers: 1200,
            authors: 80,
            topics: 3,
            venues: 6,
            institutions: 8,
            words_per_topic: 40,
            title_len: 6,
            abstract_len: 40,
            purity: (0.6, 0.98),
            common_share: 0.1,
            single_topic_authors: 0.5,
            max_coauthors: 2,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Two topics with pure vocabularies: any linear text model can separate them.
    /// Abstracts are full length so the hashed embeddings carry the topic too.
    pub fn separable(seed: u64) -> Self {
        SynthConfig {
            papers: 120,
            authors: 20,
            topics: 2,
            abstract_len: 150,
            purity: (1.0, 1.0),
            common_share: 0.0,
            single_topic_authors: 1.0,
            seed,
            ..SynthConfig::default()
        }
    }
}

const COMMON: &[&str] = &[
    "method", "results", "study", "approach", "data", "analysis", "propose", "show", "evaluate",
    "framework", "novel", "performance", "task", "using", "based", "work", "present", "problem",
    "system", "experiments",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const NUCLEI: &[&str] = &["a", "o", "u", "i"];

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub papers: Vec<PaperLine>,
    pub authors: Vec<AuthorLine>,
    pub venues: Vec<VenueLine>,
    /// Primary topic per paper key.
    pub paper_topic: BTreeMap<String, usize>,
    /// Share of words from the primary topic per paper key.
    pub paper_purity: BTreeMap<String, f64>,
    pub topic_words: Vec<Vec<String>>,
}

fn make_words(rng: &mut ChaCha8Rng, topics: usize, per_topic: usize) -> Vec<Vec<String>> {
    let mut used: BTreeSet<String> = COMMON.iter().map(|s| s.to_string()).collect();
    let mut out = vec![Vec::with_capacity(per_topic); topics];
    for words in out.iter_mut() {
        while words.len() < per_topic {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).expect("onsets"));
                w.push_str(NUCLEI.choose(rng).expect("nuclei"));
            }
            w.push_str(ONSETS.choose(rng).expect("onsets"));
            if used.insert(w.clone()) {
                words.push(w);
            }
        }
    }
    out
}

/// Generates a corpus from `config`. Same config, same corpus.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topic_words = make_words(&mut rng, config.topics, config.words_per_topic);

    // Authors: topic mixture and productivity weight.
    struct AuthorPlan {
        topics: Vec<(usize, f64)>,
        weight: f64,
    }
    let plans: Vec<AuthorPlan> = (0..config.authors)
        .map(|i| {
            let first = i % config.topics;
            let topics = if config.topics > 1 && !rng.gen_bool(config.single_topic_authors) {
                let mut second = rng.gen_range(0..config.topics - 1);
                if second >= first {
                    second += 1;
                }
                let w = rng.gen_range(0.3..0.7);
                vec![(first, w), (second, 1.0 - w)]
            } else {
                vec![(first, 1.0)]
            };
            // heavy-tailed productivity
            let u: f64 = rng.gen_range(0.05..1.0);
            AuthorPlan {
                topics,
                weight: 1.0 / u,
            }
        })
        .collect();
    let total_weight: f64 = plans.iter().map(|p| p.weight).sum();

    let authors: Vec<AuthorLine> = (0..config.authors)
        .map(|i| AuthorLine {
            id: format!("a{i:04}"),
            name: format!("Author {i}"),
            affiliation: (config.institutions > 0).then(|| format!("inst{:02}", i % config.institutions)),
        })
        .collect();
    let venues: Vec<VenueLine> = (0..config.venues)
        .map(|i| VenueLine {
            id: format!("v{i:02}"),
            name: format!("Venue {i}"),
        })
        .collect();

    let pick_author = |rng: &mut ChaCha8Rng| -> usize {
        let mut r = rng.gen::<f64>() * total_weight;
        for (i, p) in plans.iter().enumerate() {
            if r < p.weight {
                return i;
            }
            r -= p.weight;
        }
        plans.len() - 1
    };

    let mut papers = Vec::with_capacity(config.papers);
    let mut paper_topic = BTreeMap::new();
    let mut paper_purity = BTreeMap::new();
    for i in 0..config.papers {
        let key = format!("p{i:05}");
        // Every author writes at least one paper before productivity sampling.
        let lead = if i < config.authors { i } else { pick_author(&mut rng) };
        let plan = &plans[lead];
        let mut r = rng.gen::<f64>();
        let mut topic = plan.topics[0].0;
        for &(t, w) in &plan.topics {
            if r < w {
                topic = t;
                break;
            }
            r -= w;
        }
        let other = if config.topics > 1 {
            let mut o = rng.gen_range(0..config.topics - 1);
            if o >= topic {
                o += 1;
            }
            o
        } else {
            topic
        };
        let purity = if config.purity.0 < config.purity.1 {
            rng.gen_range(config.purity.0..config.purity.1)
        } else {
            config.purity.0
        };
        let draw = |rng: &mut ChaCha8Rng, len: usize| -> String {
            (0..len)
                .map(|_| {
                    let u = rng.gen::<f64>();
                    let word: &str = if u < config.common_share {
                        COMMON.choose(rng).expect("common")
                    } else if u < config.common_share + (1.0 - config.common_share) * purity {
                        topic_words[topic].choose(rng).expect("topic")
                    } else {
                        topic_words[other].choose(rng).expect("topic")
                    };
                    word.to_owned()
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let title = draw(&mut rng, config.title_len);
        let abstract_text = draw(&mut rng, config.abstract_len);

        let mut author_ids = vec![lead];
        let n_co = rng.gen_range(0..=config.max_coauthors);
        for _ in 0..n_co {
            // co-authors share the paper's topic when possible
            for _ in 0..8 {
                let c = pick_author(&mut rng);
                if !author_ids.contains(&c) && plans[c].topics.iter().any(|(t, _)| *t == topic) {
                    author_ids.push(c);
                    break;
                }
            }
        }
        let cites: Vec<String> = if i > 0 {
            let n = rng.gen_range(0..=3.min(i));
            let mut picked: BTreeSet<usize> = BTreeSet::new();
            while picked.len() < n {
                picked.insert(rng.gen_range(0..i));
            }
            picked.into_iter().map(|j| format!("p{j:05}")).collect()
        } else {
            Vec::new()
        };
        let venue = if config.venues > 0 {
            Some(venues[(topic + config.topics * rng.gen_range(0..2)) % config.venues].id.clone())
        } else {
            None
        };
        paper_topic.insert(key.clone(), topic);
        paper_purity.insert(key.clone(), purity);
        papers.push(PaperLine {
            id: key,
            title,
            abstract_text,
            year: rng.gen_range(2000..=2023),
            venue,
            authors: author_ids.iter().map(|&a| authors[a].id.clone()).collect(),
            cites,
            citation_count: rng.gen_range(0..200),
        });
    }

    SynthCorpus {
        config: config.clone(),
        papers,
        authors,
        venues,
        paper_topic,
        paper_purity,
        topic_words,
    }
}

/// A page of `p` papers, each with `a` authors of its own, where every author
/// has `w` further papers. No author or paper is shared, so scoring the page
/// and all author content lists touches exactly `p + p * a * w` papers.
/// Paper keys are `page00`, `page01`, ...; the rest are `xNNNNN`.
pub fn disjoint_page_corpus(p: usize, a: usize, w: usize, seed: u64) -> SynthCorpus {
    let config = SynthConfig {
        papers: p + p * a * w,
        authors: p * a,
        topics: 2,
        venues: 0,
        institutions: 0,
        seed,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_words = make_words(&mut rng, 2, config.words_per_topic);
    let text = |rng: &mut ChaCha8Rng, topic: usize, len: usize| -> String {
        (0..len)
            .map(|_| topic_words[topic].choose(rng).expect("topic").clone())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let authors: Vec<AuthorLine> = (0..p * a)
        .map(|i| AuthorLine {
            id: format!("a{i:04}"),
            name: format!("Author {i}"),
            affiliation: None,
        })
        .collect();
    let mut papers = Vec::new();
    let mut paper_topic = BTreeMap::new();
    let mut paper_purity = BTreeMap::new();
    let mut push = |rng: &mut ChaCha8Rng, id: String, topic: usize, authors: Vec<String>| {
        paper_topic.insert(id.clone(), topic);
        paper_purity.insert(id.clone(), 1.0);
        papers.push(PaperLine {
            title: text(rng, topic, config.title_len),
            abstract_text: text(rng, topic, config.abstract_len),
            id,
            year: rng.gen_range(2000..=2023),
            venue: None,
            authors,
            cites: Vec::new(),
            citation_count: rng.gen_range(0..200),
        });
    };
    for i in 0..p {
        let names = (0..a).map(|j| authors[i * a + j].id.clone()).collect();
        push(&mut rng, format!("page{i:02}"), i % 2, names);
    }
    let mut n = 0;
    for author in &authors {
        for _ in 0..w {
            let topic = rng.gen_range(0..2);
            push(&mut rng, format!("x{n:05}"), topic, vec![author.id.clone()]);
            n += 1;
        }
    }
    SynthCorpus {
        config,
        papers,
        authors,
        venues: Vec::new(),
        paper_topic,
        paper_purity,
        topic_words,
    }
}

impl SynthCorpus {
    fn jsonl<T: serde::Serialize>(rows: &[T]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, rows).expect("in-memory write");
        buf
    }

    pub fn papers_jsonl(&self) -> Vec<u8> {
        Self::jsonl(&self.papers)
    }

    pub fn authors_jsonl(&self) -> Vec<u8> {
        Self::jsonl(&self.authors)
    }

    pub fn venues_jsonl(&self) -> Vec<u8> {
        Self::jsonl(&self.venues)
    }

    /// Ingests the corpus through the regular JSONL path.
    pub fn snapshot(&self) -> GraphSnapshot {
        let (snapshot, _) = ingest_corpus(
            self.papers_jsonl().as_slice(),
            self.authors_jsonl().as_slice(),
            self.venues_jsonl().as_slice(),
        )
        .expect("synthetic corpus is well-formed");
        snapshot
    }

    /// Writes `papers.jsonl`, `authors.jsonl` and `venues.jsonl` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("papers.jsonl"), self.papers_jsonl())?;
        std::fs::write(dir.join("authors.jsonl"), self.authors_jsonl())?;
        std::fs::write(dir.join("venues.jsonl"), self.venues_jsonl())?;
        Ok(())
    }

    /// Ground-truth `(paper, author)` pairs.
    pub fn written_by_edges(&self) -> Vec<(String, String)> {
        self.papers
            .iter()
            .flat_map(|p| p.authors.iter().map(move |a| (p.id.clone(), a.clone())))
            .collect()
    }

    /// Papers whose primary topic is `topic`, most topical first.
    pub fn papers_of_topic(&self, topic: usize) -> Vec<&str> {
        let mut keys: Vec<&str> = self
            .paper_topic
            .iter()
            .filter(|(_, t)| **t == topic)
            .map(|(k, _)| k.as_str())
            .collect();
        keys.sort_by(|a, b| {
            self.paper_purity[*b]
                .total_cmp(&self.paper_purity[*a])
                .then_with(|| a.cmp(b))
        });
        keys
    }

    /// A feed that likes `liked` papers of `topic` and dislikes `disliked`
    /// papers of other topics, sampled with `seed` among the more topical half.
    pub fn topic_feed(&self, feed_id: &str, topic: usize, liked: usize, disliked: usize, seed: u64) -> Feed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let on: Vec<&str> = self.papers_of_topic(topic);
        let on = &on[..on.len().div_ceil(2)];
        let mut off: Vec<&str> = (0..self.config.topics)
            .filter(|t| *t != topic)
            .flat_map(|t| {
                let v = self.papers_of_topic(t);
                let half = v.len().div_ceil(2);
                v.into_iter().take(half)
            })
            .collect();
        off.sort_unstable();
        let mut feed = Feed::new(feed_id, format!("Topic {topic}"), "blue");
        for key in on.choose_multiple(&mut rng, liked.min(on.len())) {
            feed.rate(key, Some(Rating::Liked));
        }
        for key in off.choose_multiple(&mut rng, disliked.min(off.len())) {
            feed.rate(key, Some(Rating::Disliked));
        }
        feed
    }

    /// One feed per topic (`topic0`, `topic1`, ...) with 6 likes and 24 dislikes.
    pub fn topic_feeds(&self, seed: u64) -> Vec<Feed> {
        (0..self.config.topics)
            .map(|t| self.topic_feed(&format!("topic{t}"), t, 6, 24, seed.wrapping_add(t as u64)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let c = SynthConfig {
            papers: 50,
            authors: 10,
            ..SynthConfig::default()
        };
        let a = generate(&c);
        let b = generate(&c);
        assert_eq!(a.papers, b.papers);
        assert_eq!(a.authors, b.authors);
    }

    #[test]
    fn every_author_writes() {
        let c = SynthConfig {
            papers: 50,
            authors: 10,
            ..SynthConfig::default()
        };
        let corpus = generate(&c);
        let writers: BTreeSet<&str> = corpus
            .papers
            .iter()
            .flat_map(|p| p.authors.iter().map(String::as_str))
            .collect();
        assert_eq!(writers.len(), 10);
    }

    #[test]
    fn topic_vocabularies_are_disjoint() {
        let corpus = generate(&SynthConfig::default());
        let mut all = BTreeSet::new();
        for words in &corpus.topic_words {
            for w in words {
                assert!(all.insert(w.clone()));
            }
        }
    }
}
