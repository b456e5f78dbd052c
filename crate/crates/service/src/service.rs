//! File-backed engine state shared by the HTTP handlers and the CLI.
//!
//! A data directory holds:
//!
//! ```text
//! snapshot.json      ingested graph
//! report.json        ingestion report
//! feeds/<id>.json    one file per feed
//! index.json         summary index (optional)
//! embeddings.jsonl   precomputed paper embeddings (optional)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use polylens::bench::{run_benchmark, BenchReport};
use polylens::explainer::{explain, Explanation, ExplanationItem, DEFAULT_TOP_K};
use polylens::featurizer::{build_vocabulary, PrecomputedEmbeddings};
use polylens::kg::{ingest_files, IngestReport};
use polylens::lens::{
    lens_over_type, rank_with_snapshot, score_page, AuthorCounts, EnsembleScorer, LensConfig, LensCount, PagePaper,
    PageScoring, PaperLensScore, PreferenceSource,
};
use polylens::preference::LensCache;
use polylens::summary::{IndexHandle, RefreshReport};
use polylens::{
    EmbeddingProvider, EntityId, Feed, Featurizer, GraphSnapshot, HashingEmbedder, KPolicy, Rating, Relation,
    SummaryIndex, TrainedLensModel,
};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

pub const MAX_PAGE_PAPERS: usize = 500;
pub const DEFAULT_SEED: u64 = 0;
const PALETTE: [&str; 6] = ["blue", "orange", "green", "purple", "red", "teal"];

/// Paths inside a data directory.
#[derive(Clone, Debug)]
pub struct DataDir(PathBuf);

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir(root.into())
    }

    pub fn root(&self) -> &Path {
        &self.0
    }

    pub fn snapshot(&self) -> PathBuf {
        self.0.join("snapshot.json")
    }

    pub fn report(&self) -> PathBuf {
        self.0.join("report.json")
    }

    pub fn feeds(&self) -> PathBuf {
        self.0.join("feeds")
    }

    pub fn feed(&self, id: &str) -> PathBuf {
        self.feeds().join(format!("{id}.json"))
    }

    pub fn index(&self) -> PathBuf {
        self.0.join("index.json")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.0.join("embeddings.jsonl")
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

/// Ingests three JSONL files into `out`. Re-ingesting into a directory that
/// already has a snapshot bumps the version.
pub fn ingest_into(papers: &Path, authors: &Path, venues: &Path, out: &Path) -> ApiResult<IngestReport> {
    let (snapshot, report) = ingest_files(papers, authors, venues)?;
    let dir = DataDir::new(out);
    std::fs::create_dir_all(dir.root())?;
    let version = match GraphSnapshot::load(dir.snapshot()) {
        Ok(previous) => previous.version() + 1,
        Err(_) => snapshot.version(),
    };
    let snapshot = snapshot.with_version(version);
    write_atomic(&dir.snapshot(), &snapshot.to_json_bytes()?)?;
    write_atomic(&dir.report(), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// Lowercase alphanumerics joined by dashes.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_owned();
    if out.is_empty() {
        "feed".into()
    } else {
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageScoreRequest {
    pub paper_ids: Vec<String>,
    pub feed_ids: Vec<String>,
    #[serde(default = "default_true")]
    pub include_author_summaries: bool,
    #[serde(default)]
    pub page_seed: u64,
    /// Author counts from the summary index instead of exhaustive scoring.
    #[serde(default)]
    pub approx: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverviewLens {
    pub feed_id: String,
    pub relevant_count: usize,
    pub total_base: usize,
    pub capped_count: usize,
    /// The author's highest-scoring paper under this lens.
    pub top_paper: Option<String>,
    pub explanation: Vec<ExplanationItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthorOverview {
    pub author_id: String,
    pub name: String,
    pub approx: bool,
    pub lenses: Vec<OverviewLens>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexStatus {
    pub built: bool,
    pub version: u64,
    pub snapshot_version: u64,
    pub stale: bool,
    pub policy: KPolicy,
    pub seed: u64,
    pub authors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexBuildResponse {
    pub report: RefreshReport,
    pub status: IndexStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRequest {
    /// Defaults to the full policy sweep.
    #[serde(default)]
    pub policies: Option<Vec<KPolicy>>,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to every feed that can be trained.
    #[serde(default)]
    pub feeds: Option<Vec<String>>,
}

pub struct Service {
    data: DataDir,
    snapshot: Arc<GraphSnapshot>,
    featurizer: Featurizer,
    feeds: RwLock<BTreeMap<String, Arc<Mutex<Feed>>>>,
    lenses: LensCache,
    index: IndexHandle,
    index_built: RwLock<bool>,
    index_builds: Mutex<()>,
    config: LensConfig,
    seed: u64,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("data", &self.data)
            .field("snapshot_version", &self.snapshot.version())
            .finish_non_exhaustive()
    }
}

impl Service {
    /// Loads the snapshot, feeds and (if present) the summary index of a data directory.
    pub fn open(root: impl Into<PathBuf>) -> ApiResult<Self> {
        let data = DataDir::new(root);
        let snapshot = GraphSnapshot::load(data.snapshot()).map_err(|e| {
            ApiError::invalid(format!(
                "no usable snapshot in {}: {e}; run `polylens ingest` first",
                data.root().display()
            ))
        })?;
        let provider: Arc<dyn EmbeddingProvider> = if data.embeddings().exists() {
            Arc::new(PrecomputedEmbeddings::load(data.embeddings())?)
        } else {
            Arc::new(HashingEmbedder::default())
        };
        let featurizer = Featurizer::new(Arc::new(build_vocabulary(&snapshot)?), provider);

        let mut feeds = BTreeMap::new();
        if data.feeds().is_dir() {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(data.feeds())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for path in paths {
                let feed = Feed::load(&path)?;
                feeds.insert(feed.feed_id.clone(), Arc::new(Mutex::new(feed)));
            }
        }

        let (index, built) = match SummaryIndex::load(data.index()) {
            Ok(index) => (index, true),
            Err(_) => (SummaryIndex::empty(KPolicy::Sqrt(1.0), DEFAULT_SEED), false),
        };

        Ok(Service {
            data,
            snapshot: Arc::new(snapshot),
            featurizer,
            feeds: RwLock::new(feeds),
            lenses: LensCache::new(),
            index: IndexHandle::new(index),
            index_built: RwLock::new(built),
            index_builds: Mutex::new(()),
            config: LensConfig::default(),
            seed: DEFAULT_SEED,
        })
    }

    pub fn data_dir(&self) -> &DataDir {
        &self.data
    }

    pub fn snapshot(&self) -> &GraphSnapshot {
        &self.snapshot
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn config(&self) -> &LensConfig {
        &self.config
    }

    /// Number of lens trainings so far.
    pub fn training_runs(&self) -> usize {
        self.lenses.training_runs()
    }

    pub fn create_feed(&self, name: &str, color: Option<&str>) -> ApiResult<Feed> {
        let name = name.trim();
        if name.is_empty() {
            return Err(ApiError::invalid("feed name must not be empty"));
        }
        let mut feeds = self.feeds.write().expect("feeds lock");
        for existing in feeds.values() {
            if existing.lock().expect("feed lock").name == name {
                return Err(ApiError::invalid(format!("a feed named `{name}` already exists")));
            }
        }
        let base = slug(name);
        let mut id = base.clone();
        let mut n = 2;
        while feeds.contains_key(&id) {
            id = format!("{base}-{n}");
            n += 1;
        }
        let color = color
            .map(str::to_owned)
            .unwrap_or_else(|| PALETTE[feeds.len() % PALETTE.len()].to_owned());
        let feed = Feed::new(id.clone(), name, color);
        std::fs::create_dir_all(self.data.feeds())?;
        write_atomic(&self.data.feed(&id), &serde_json::to_vec_pretty(&feed)?)?;
        feeds.insert(id, Arc::new(Mutex::new(feed.clone())));
        Ok(feed)
    }

    pub fn list_feeds(&self) -> Vec<Feed> {
        self.feeds
            .read()
            .expect("feeds lock")
            .values()
            .map(|f| f.lock().expect("feed lock").clone())
            .collect()
    }

    fn feed_slot(&self, id: &str) -> ApiResult<Arc<Mutex<Feed>>> {
        self.feeds
            .read()
            .expect("feeds lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("feed `{id}` not found")))
    }

    pub fn feed(&self, id: &str) -> ApiResult<Feed> {
        Ok(self.feed_slot(id)?.lock().expect("feed lock").clone())
    }

    /// Sets or clears (`None`) a rating. Clearing an unrated paper is a no-op.
    pub fn rate(&self, feed_id: &str, paper_id: &str, rating: Option<Rating>) -> ApiResult<Feed> {
        let slot = self.feed_slot(feed_id)?;
        if self.snapshot.paper(paper_id).is_none() {
            return Err(polylens::Error::NotFound(EntityId::paper(paper_id)).into());
        }
        let mut feed = slot.lock().expect("feed lock");
        if feed.rate(paper_id, rating) {
            write_atomic(&self.data.feed(feed_id), &serde_json::to_vec_pretty(&*feed)?)?;
        }
        Ok(feed.clone())
    }

    /// A model trained on the feed's current ratings; retrains when stale.
    pub fn model(&self, feed_id: &str) -> ApiResult<Arc<TrainedLensModel>> {
        let feed = self.feed(feed_id)?;
        Ok(self.lenses.fresh(&self.snapshot, &feed, &self.featurizer, self.seed)?)
    }

    fn models(&self, feed_ids: &[String]) -> ApiResult<Vec<Arc<TrainedLensModel>>> {
        let mut seen = BTreeSet::new();
        feed_ids
            .iter()
            .filter(|f| seen.insert(f.as_str()))
            .map(|f| self.model(f))
            .collect()
    }

    fn current_index(&self) -> ApiResult<Arc<SummaryIndex>> {
        if !*self.index_built.read().expect("index flag") {
            return Err(ApiError::stale("summary index has not been built; POST /api/v1/index/build"));
        }
        let index = self.index.current();
        if index.version != self.snapshot.version() {
            return Err(ApiError::stale(format!(
                "summary index was built for snapshot {} but the current snapshot is {}",
                index.version,
                self.snapshot.version()
            )));
        }
        Ok(index)
    }

    pub fn score_page(&self, req: &PageScoreRequest) -> ApiResult<PageScoring> {
        if req.paper_ids.len() > MAX_PAGE_PAPERS {
            return Err(ApiError::invalid(format!(
                "at most {MAX_PAGE_PAPERS} papers per request, got {}",
                req.paper_ids.len()
            )));
        }
        if req.feed_ids.is_empty() {
            return Err(ApiError::invalid("at least one feed id is required"));
        }
        let models = self.models(&req.feed_ids)?;
        let refs: Vec<&TrainedLensModel> = models.iter().map(Arc::as_ref).collect();
        let page: Vec<EntityId> = req.paper_ids.iter().map(EntityId::paper).collect();
        let index;
        let counts = if req.approx {
            index = self.current_index()?;
            AuthorCounts::Approx(&index)
        } else {
            AuthorCounts::Exact
        };
        let mut scoring = score_page(
            &refs,
            &self.snapshot,
            &self.featurizer,
            &page,
            &self.config,
            req.page_seed,
            counts,
        )?;
        if !req.include_author_summaries {
            scoring.authors.clear();
        }
        Ok(scoring)
    }

    /// Scores of one paper under each requested lens.
    pub fn paper_scores(&self, paper_id: &str, feed_ids: &[String]) -> ApiResult<PagePaper> {
        if feed_ids.is_empty() {
            return Err(ApiError::invalid("at least one feed id is required"));
        }
        let paper = self
            .snapshot
            .paper(paper_id)
            .ok_or_else(|| polylens::Error::NotFound(EntityId::paper(paper_id)))?;
        let features = self.featurizer.featurize(paper);
        let mut lenses = BTreeMap::new();
        for model in self.models(feed_ids)? {
            let score = model.preference(&features).value();
            lenses.insert(
                model.feed_id.clone(),
                PaperLensScore {
                    score,
                    relevant: self.config.is_relevant(score),
                },
            );
        }
        Ok(PagePaper {
            paper_id: paper_id.to_owned(),
            lenses,
        })
    }

    pub fn explain_paper(&self, paper_id: &str, feed_id: &str, k: Option<usize>) -> ApiResult<Explanation> {
        let paper = self
            .snapshot
            .paper(paper_id)
            .ok_or_else(|| polylens::Error::NotFound(EntityId::paper(paper_id)))?;
        let model = self.model(feed_id)?;
        Ok(explain(&model, paper, self.featurizer.vocab(), k.unwrap_or(DEFAULT_TOP_K))?)
    }

    pub fn author_overview(&self, author_id: &str, feed_ids: &[String], approx: bool) -> ApiResult<AuthorOverview> {
        let author = self
            .snapshot
            .author(author_id)
            .ok_or_else(|| polylens::Error::NotFound(EntityId::author(author_id)))?;
        if feed_ids.is_empty() {
            return Err(ApiError::invalid("at least one feed id is required"));
        }
        let index = if approx { Some(self.current_index()?) } else { None };
        let papers = self.snapshot.content_list(&author.id, Relation::WrittenBy)?;
        let mut lenses = Vec::new();
        for model in self.models(feed_ids)? {
            let scorer = EnsembleScorer {
                model: &model,
                snapshot: &self.snapshot,
                featurizer: &self.featurizer,
            };
            let count = match &index {
                Some(index) => LensCount {
                    relevant_count: index.estimate_author(&model, &author.id, &self.config)?.count,
                    total_base: papers.len(),
                },
                None => lens_over_type(&scorer, &self.snapshot, &author.id, Relation::WrittenBy, &self.config)?,
            };
            let scored = papers
                .iter()
                .map(|p| Ok((p.clone(), scorer.preference(p)?)))
                .collect::<ApiResult<Vec<_>>>()?;
            let top = rank_with_snapshot(&self.snapshot, scored).into_iter().next();
            let explanation = match &top {
                Some(top) => {
                    let paper = self.snapshot.paper(&top.id.key).expect("listed");
                    explain(&model, paper, self.featurizer.vocab(), DEFAULT_TOP_K)?.items
                }
                None => Vec::new(),
            };
            lenses.push(OverviewLens {
                feed_id: model.feed_id.clone(),
                relevant_count: count.relevant_count,
                total_base: count.total_base,
                capped_count: count.relevant_count.min(self.config.overview_cap),
                top_paper: top.map(|t| t.id.key),
                explanation,
            });
        }
        Ok(AuthorOverview {
            author_id: author_id.to_owned(),
            name: author.name.clone(),
            approx,
            lenses,
        })
    }

    pub fn index_status(&self) -> IndexStatus {
        let index = self.index.current();
        let built = *self.index_built.read().expect("index flag");
        IndexStatus {
            built,
            version: index.version,
            snapshot_version: self.snapshot.version(),
            stale: !built || index.version != self.snapshot.version(),
            policy: index.policy,
            seed: index.seed,
            authors: index.authors.len(),
        }
    }

    /// Rebuilds the summary index. Readers keep the previous index until the
    /// new one is complete; a build with failed authors is not installed.
    pub fn build_index(&self, policy: KPolicy, seed: u64) -> ApiResult<IndexBuildResponse> {
        let _one_at_a_time = self.index_builds.lock().expect("index build lock");
        let report = self
            .index
            .refresh(&self.snapshot, self.featurizer.provider(), policy, seed);
        if !report.failed.is_empty() {
            return Err(ApiError::internal(format!(
                "summary index build failed for {} authors; previous index kept",
                report.failed.len()
            ))
            .with_detail(serde_json::json!({ "failed": report.failed })));
        }
        let index = self.index.current();
        write_atomic(&self.data.index(), &serde_json::to_vec(index.as_ref())?)?;
        *self.index_built.write().expect("index flag") = true;
        Ok(IndexBuildResponse {
            report,
            status: self.index_status(),
        })
    }

    pub fn run_bench(&self, req: &BenchRequest) -> ApiResult<BenchReport> {
        let policies = req.policies.clone().unwrap_or_else(KPolicy::sweep);
        if policies.is_empty() {
            return Err(ApiError::invalid("at least one policy is required"));
        }
        let mut notes = Vec::new();
        let models: Vec<Arc<TrainedLensModel>> = match &req.feeds {
            Some(ids) => self.models(ids)?,
            None => {
                let mut models = Vec::new();
                for feed in self.list_feeds() {
                    match self.model(&feed.feed_id) {
                        Ok(m) => models.push(m),
                        Err(e) => notes.push(format!("feed {} skipped: {}", feed.feed_id, e.message)),
                    }
                }
                models
            }
        };
        if models.is_empty() {
            return Err(ApiError::invalid("no trainable feeds to benchmark"));
        }
        let refs: Vec<&TrainedLensModel> = models.iter().map(Arc::as_ref).collect();
        let mut report = run_benchmark(&refs, &policies, &self.snapshot, &self.featurizer, &self.config, req.seed)?;
        notes.append(&mut report.notes);
        report.notes = notes;
        Ok(report)
    }
}
