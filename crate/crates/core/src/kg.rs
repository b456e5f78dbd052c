//! Typed knowledge-graph store.
//!
//! A [`GraphSnapshot`] holds papers, authors, venues and institutions together
//! with forward and reverse adjacency for every [`Relation`]. Snapshots are
//! immutable once built and are shared between readers behind an `Arc`.
//!
//! Corpora arrive as three JSONL streams (papers, authors, venues). Institutions
//! have no stream of their own; they are materialized from author affiliations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Paper,
    Author,
    Venue,
    Institution,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Paper => "paper",
            EntityKind::Author => "author",
            EntityKind::Venue => "venue",
            EntityKind::Institution => "institution",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed entity reference. Keys are opaque and unique per kind.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId {
    pub kind: EntityKind,
    pub key: String,
}

impl EntityId {
    pub fn new(kind: EntityKind, key: impl Into<String>) -> Self {
        EntityId {
            kind,
            key: key.into(),
        }
    }

    pub fn paper(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Paper, key)
    }

    pub fn author(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Author, key)
    }

    pub fn venue(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Venue, key)
    }

    pub fn institution(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Institution, key)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.key)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.key)
    }
}

/// Directed relations of the graph. Each has a fixed (source, target) kind pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "writtenBy")]
    WrittenBy,
    #[serde(rename = "cites")]
    Cites,
    #[serde(rename = "publishedIn")]
    PublishedIn,
    #[serde(rename = "affiliatedWith")]
    AffiliatedWith,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::WrittenBy,
        Relation::Cites,
        Relation::PublishedIn,
        Relation::AffiliatedWith,
    ];

    /// `(source kind, target kind)` of forward edges.
    pub fn endpoints(self) -> (EntityKind, EntityKind) {
        match self {
            Relation::WrittenBy => (EntityKind::Paper, EntityKind::Author),
            Relation::Cites => (EntityKind::Paper, EntityKind::Paper),
            Relation::PublishedIn => (EntityKind::Paper, EntityKind::Venue),
            Relation::AffiliatedWith => (EntityKind::Author, EntityKind::Institution),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::WrittenBy => "writtenBy",
            Relation::Cites => "cites",
            Relation::PublishedIn => "publishedIn",
            Relation::AffiliatedWith => "affiliatedWith",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown relation `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: EntityId,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub venue: Option<EntityId>,
    pub authors: Vec<EntityId>,
    pub cites: Vec<EntityId>,
    pub citation_count: u64,
    #[serde(default)]
    pub stub: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub id: EntityId,
    pub name: String,
    pub affiliation: Option<EntityId>,
    #[serde(default)]
    pub stub: bool,
}

/// Venues and institutions carry only a display name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedRecord {
    pub id: EntityId,
    pub name: String,
    #[serde(default)]
    pub stub: bool,
}

/// Outcome of an ingestion run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub entities: usize,
    pub stubs: usize,
    /// Non-fatal problems that were repaired during ingestion.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Adjacency {
    forward: BTreeMap<EntityId, Vec<EntityId>>,
    reverse: BTreeMap<EntityId, Vec<EntityId>>,
}

impl Adjacency {
    fn add(&mut self, from: &EntityId, to: &EntityId) {
        self.forward.entry(from.clone()).or_default().push(to.clone());
        self.reverse.entry(to.clone()).or_default().push(from.clone());
    }

    fn finish(&mut self) {
        for list in self.reverse.values_mut() {
            list.sort();
            list.dedup();
        }
    }
}

/// Immutable typed graph with adjacency indices.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSnapshot {
    version: u64,
    papers: BTreeMap<String, PaperRecord>,
    authors: BTreeMap<String, AuthorRecord>,
    venues: BTreeMap<String, NamedRecord>,
    institutions: BTreeMap<String, NamedRecord>,
    adjacency: [Adjacency; 4],
}

/// Serialized form; adjacency is rebuilt on load.
#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    version: u64,
    papers: Vec<PaperRecord>,
    authors: Vec<AuthorRecord>,
    venues: Vec<NamedRecord>,
    institutions: Vec<NamedRecord>,
}

impl GraphSnapshot {
    fn from_records(
        version: u64,
        papers: BTreeMap<String, PaperRecord>,
        authors: BTreeMap<String, AuthorRecord>,
        venues: BTreeMap<String, NamedRecord>,
        institutions: BTreeMap<String, NamedRecord>,
    ) -> Self {
        let mut adjacency: [Adjacency; 4] = Default::default();
        for paper in papers.values() {
            for author in &paper.authors {
                adjacency[Relation::WrittenBy.slot()].add(&paper.id, author);
            }
            for cited in &paper.cites {
                adjacency[Relation::Cites.slot()].add(&paper.id, cited);
            }
            if let Some(venue) = &paper.venue {
                adjacency[Relation::PublishedIn.slot()].add(&paper.id, venue);
            }
        }
        for author in authors.values() {
            if let Some(inst) = &author.affiliation {
                adjacency[Relation::AffiliatedWith.slot()].add(&author.id, inst);
            }
        }
        for adj in &mut adjacency {
            adj.finish();
        }
        GraphSnapshot {
            version,
            papers,
            authors,
            venues,
            institutions,
            adjacency,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Same content under a new version number.
    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn entity_count(&self) -> usize {
        self.papers.len() + self.authors.len() + self.venues.len() + self.institutions.len()
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        match id.kind {
            EntityKind::Paper => self.papers.contains_key(&id.key),
            EntityKind::Author => self.authors.contains_key(&id.key),
            EntityKind::Venue => self.venues.contains_key(&id.key),
            EntityKind::Institution => self.institutions.contains_key(&id.key),
        }
    }

    pub fn paper(&self, key: &str) -> Option<&PaperRecord> {
        self.papers.get(key)
    }

    pub fn author(&self, key: &str) -> Option<&AuthorRecord> {
        self.authors.get(key)
    }

    pub fn venue(&self, key: &str) -> Option<&NamedRecord> {
        self.venues.get(key)
    }

    pub fn institution(&self, key: &str) -> Option<&NamedRecord> {
        self.institutions.get(key)
    }

    /// All papers in key order, stubs included.
    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values()
    }

    /// Papers that came from the corpus (not synthesized stubs).
    pub fn corpus_papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values().filter(|p| !p.stub)
    }

    pub fn authors(&self) -> impl Iterator<Item = &AuthorRecord> {
        self.authors.values()
    }

    pub fn venues(&self) -> impl Iterator<Item = &NamedRecord> {
        self.venues.values()
    }

    pub fn institutions(&self) -> impl Iterator<Item = &NamedRecord> {
        self.institutions.values()
    }

    pub fn stub_count(&self) -> usize {
        self.papers.values().filter(|p| p.stub).count()
            + self.authors.values().filter(|a| a.stub).count()
            + self.venues.values().filter(|v| v.stub).count()
            + self.institutions.values().filter(|i| i.stub).count()
    }

    /// Forward edges of `relation` as `(source, target)` pairs.
    pub fn edges(&self, relation: Relation) -> Vec<(EntityId, EntityId)> {
        self.adjacency[relation.slot()]
            .forward
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(move |to| (from.clone(), to.clone())))
            .collect()
    }

    pub fn forward(&self, relation: Relation, from: &EntityId) -> &[EntityId] {
        self.adjacency[relation.slot()]
            .forward
            .get(from)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn reverse(&self, relation: Relation, to: &EntityId) -> &[EntityId] {
        self.adjacency[relation.slot()]
            .reverse
            .get(to)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Entities on the other side of `relation` from `t`.
    ///
    /// Follows forward edges when `t` is the relation's source kind and reverse
    /// edges when it is the target kind. `cites` is paper-to-paper and resolves
    /// to the papers `t` cites.
    pub fn related(&self, t: &EntityId, relation: Relation) -> Result<&[EntityId]> {
        if !self.contains(t) {
            return Err(Error::NotFound(t.clone()));
        }
        let (source, target) = relation.endpoints();
        if t.kind == source {
            Ok(self.forward(relation, t))
        } else if t.kind == target {
            Ok(self.reverse(relation, t))
        } else {
            Err(Error::InvalidRelation {
                kind: t.kind.to_string(),
                relation,
            })
        }
    }

    /// The papers related to `t` via `relation`, ordered by year descending
    /// then key ascending.
    pub fn content_list(&self, t: &EntityId, relation: Relation) -> Result<Vec<EntityId>> {
        let related = self.related(t, relation)?;
        let (source, target) = relation.endpoints();
        let other = if t.kind == source { target } else { source };
        if other != EntityKind::Paper {
            return Err(Error::InvalidRelation {
                kind: t.kind.to_string(),
                relation,
            });
        }
        let mut out: Vec<EntityId> = related.to_vec();
        out.dedup();
        out.sort_by(|a, b| {
            let ya = self.papers.get(&a.key).map_or(i32::MIN, |p| p.year);
            let yb = self.papers.get(&b.key).map_or(i32::MIN, |p| p.year);
            yb.cmp(&ya).then_with(|| a.key.cmp(&b.key))
        });
        Ok(out)
    }

    /// The relation that links an entity kind to its papers by default.
    pub fn default_paper_relation(kind: EntityKind) -> Option<Relation> {
        match kind {
            EntityKind::Author => Some(Relation::WrittenBy),
            EntityKind::Venue => Some(Relation::PublishedIn),
            EntityKind::Paper => Some(Relation::Cites),
            EntityKind::Institution => None,
        }
    }

    /// Citation count used for tie-breaking: a paper's own count, or the sum
    /// over an entity's papers (institutions sum over affiliated authors).
    pub fn citation_count(&self, id: &EntityId) -> u64 {
        match id.kind {
            EntityKind::Paper => self.papers.get(&id.key).map_or(0, |p| p.citation_count),
            EntityKind::Author | EntityKind::Venue => {
                let relation = Self::default_paper_relation(id.kind).expect("paper relation");
                self.related(id, relation)
                    .map(|ps| ps.iter().map(|p| self.citation_count(p)).sum())
                    .unwrap_or(0)
            }
            EntityKind::Institution => self
                .related(id, Relation::AffiliatedWith)
                .map(|authors| authors.iter().map(|a| self.citation_count(a)).sum())
                .unwrap_or(0),
        }
    }

    /// Deterministic JSON encoding; identical content yields identical bytes.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let file = SnapshotFile {
            version: self.version,
            papers: self.papers.values().cloned().collect(),
            authors: self.authors.values().cloned().collect(),
            venues: self.venues.values().cloned().collect(),
            institutions: self.institutions.values().cloned().collect(),
        };
        Ok(serde_json::to_vec(&file)?)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let file: SnapshotFile = serde_json::from_slice(bytes)?;
        let papers = file.papers.into_iter().map(|p| (p.id.key.clone(), p)).collect();
        let authors = file.authors.into_iter().map(|a| (a.id.key.clone(), a)).collect();
        let venues = file.venues.into_iter().map(|v| (v.id.key.clone(), v)).collect();
        let institutions = file
            .institutions
            .into_iter()
            .map(|i| (i.id.key.clone(), i))
            .collect();
        Ok(Self::from_records(file.version, papers, authors, venues, institutions))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_slice(&std::fs::read(path)?)
    }
}

/// One line of `papers.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperLine {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i64,
    pub venue: Option<String>,
    pub authors: Vec<String>,
    pub cites: Vec<String>,
    pub citation_count: i64,
}

/// One line of `authors.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthorLine {
    pub id: String,
    pub name: String,
    pub affiliation: Option<String>,
}

/// One line of `venues.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VenueLine {
    pub id: String,
    pub name: String,
}

/// Writes records as JSONL, one object per line.
pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, rows: &[T]) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

struct LineCtx<'a> {
    source: &'a str,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::malformed(self.source, self.line, field, message)
    }

    fn field<'v>(&self, obj: &'v Map<String, Value>, field: &str) -> Result<&'v Value> {
        obj.get(field)
            .ok_or_else(|| self.err(field, "missing field"))
    }

    fn string(&self, obj: &Map<String, Value>, field: &str) -> Result<String> {
        self.field(obj, field)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| self.err(field, "expected a string"))
    }

    fn key(&self, obj: &Map<String, Value>, field: &str) -> Result<String> {
        let s = self.string(obj, field)?;
        if s.is_empty() {
            return Err(self.err(field, "must be non-empty"));
        }
        Ok(s)
    }

    fn opt_key(&self, obj: &Map<String, Value>, field: &str) -> Result<Option<String>> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(s.clone())),
            Some(Value::String(_)) => Err(self.err(field, "must be non-empty or null")),
            Some(_) => Err(self.err(field, "expected a string or null")),
        }
    }

    fn int(&self, obj: &Map<String, Value>, field: &str) -> Result<i64> {
        self.field(obj, field)?
            .as_i64()
            .ok_or_else(|| self.err(field, "expected an integer"))
    }

    fn key_list(&self, obj: &Map<String, Value>, field: &str) -> Result<Vec<String>> {
        let items = self
            .field(obj, field)?
            .as_array()
            .ok_or_else(|| self.err(field, "expected an array of strings"))?;
        items
            .iter()
            .map(|v| match v.as_str() {
                Some(s) if !s.is_empty() => Ok(s.to_owned()),
                _ => Err(self.err(field, "expected non-empty string elements")),
            })
            .collect()
    }
}

fn for_each_object<R: BufRead>(
    reader: R,
    source: &str,
    mut f: impl FnMut(&LineCtx<'_>, &Map<String, Value>) -> Result<()>,
) -> Result<()> {
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let ctx = LineCtx {
            source,
            line: idx + 1,
        };
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| ctx.err("<line>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ctx.err("<line>", "expected a JSON object"))?;
        f(&ctx, obj)?;
    }
    Ok(())
}

/// Builds a snapshot (version 1) from the three corpus streams.
///
/// Dangling references are repaired with stub records; problems that were
/// repaired rather than rejected are listed in the report.
pub fn ingest_corpus<P: BufRead, A: BufRead, V: BufRead>(
    papers_in: P,
    authors_in: A,
    venues_in: V,
) -> Result<(GraphSnapshot, IngestReport)> {
    let mut report = IngestReport::default();
    let mut papers: BTreeMap<String, PaperRecord> = BTreeMap::new();
    let mut authors: BTreeMap<String, AuthorRecord> = BTreeMap::new();
    let mut venues: BTreeMap<String, NamedRecord> = BTreeMap::new();
    let mut institutions: BTreeMap<String, NamedRecord> = BTreeMap::new();

    for_each_object(papers_in, "papers.jsonl", |ctx, obj| {
        let key = ctx.key(obj, "id")?;
        let title = ctx.string(obj, "title")?;
        let abstract_text = ctx.string(obj, "abstract")?;
        let year = ctx.int(obj, "year")?;
        let year = i32::try_from(year).map_err(|_| ctx.err("year", "out of range"))?;
        let venue = ctx.opt_key(obj, "venue")?;
        let author_keys = ctx.key_list(obj, "authors")?;
        let cite_keys = ctx.key_list(obj, "cites")?;
        let citation_count = ctx.int(obj, "citation_count")?;
        let citation_count =
            u64::try_from(citation_count).map_err(|_| ctx.err("citation_count", "must be >= 0"))?;

        let mut seen = BTreeSet::new();
        let mut author_ids = Vec::with_capacity(author_keys.len());
        for a in author_keys {
            if seen.insert(a.clone()) {
                author_ids.push(EntityId::author(a));
            } else {
                report
                    .errors
                    .push(format!("papers.jsonl line {}: duplicate author `{a}` dropped", ctx.line));
            }
        }
        let mut cites = Vec::with_capacity(cite_keys.len());
        let mut seen = BTreeSet::new();
        for c in cite_keys {
            if c == key {
                report
                    .errors
                    .push(format!("papers.jsonl line {}: self-citation dropped", ctx.line));
            } else if seen.insert(c.clone()) {
                cites.push(EntityId::paper(c));
            }
        }
        let id = EntityId::paper(key.clone());
        if papers.contains_key(&key) {
            return Err(Error::DuplicateEntity(id));
        }
        papers.insert(
            key,
            PaperRecord {
                id,
                title,
                abstract_text,
                year,
                venue: venue.map(EntityId::venue),
                authors: author_ids,
                cites,
                citation_count,
                stub: false,
            },
        );
        Ok(())
    })?;

    for_each_object(authors_in, "authors.jsonl", |ctx, obj| {
        let key = ctx.key(obj, "id")?;
        let name = ctx.key(obj, "name")?;
        let affiliation = ctx.opt_key(obj, "affiliation")?;
        let id = EntityId::author(key.clone());
        if authors.contains_key(&key) {
            return Err(Error::DuplicateEntity(id));
        }
        authors.insert(
            key,
            AuthorRecord {
                id,
                name,
                affiliation: affiliation.map(EntityId::institution),
                stub: false,
            },
        );
        Ok(())
    })?;

    for_each_object(venues_in, "venues.jsonl", |ctx, obj| {
        let key = ctx.key(obj, "id")?;
        let name = ctx.string(obj, "name")?;
        let id = EntityId::venue(key.clone());
        if venues.contains_key(&key) {
            return Err(Error::DuplicateEntity(id));
        }
        venues.insert(
            key,
            NamedRecord {
                id,
                name,
                stub: false,
            },
        );
        Ok(())
    })?;

    // Repair dangling references.
    let mut stub_papers = Vec::new();
    for paper in papers.values() {
        if let Some(v) = &paper.venue {
            venues.entry(v.key.clone()).or_insert_with(|| NamedRecord {
                id: v.clone(),
                name: v.key.clone(),
                stub: true,
            });
        }
        for a in &paper.authors {
            authors.entry(a.key.clone()).or_insert_with(|| AuthorRecord {
                id: a.clone(),
                name: a.key.clone(),
                affiliation: None,
                stub: true,
            });
        }
        for c in &paper.cites {
            if !papers.contains_key(&c.key) {
                stub_papers.push(c.clone());
            }
        }
    }
    for id in stub_papers {
        papers.entry(id.key.clone()).or_insert_with(|| PaperRecord {
            id,
            title: String::new(),
            abstract_text: String::new(),
            year: 0,
            venue: None,
            authors: Vec::new(),
            cites: Vec::new(),
            citation_count: 0,
            stub: true,
        });
    }
    for author in authors.values() {
        if let Some(inst) = &author.affiliation {
            institutions
                .entry(inst.key.clone())
                .or_insert_with(|| NamedRecord {
                    id: inst.clone(),
                    name: inst.key.clone(),
                    stub: false,
                });
        }
    }

    let snapshot = GraphSnapshot::from_records(1, papers, authors, venues, institutions);
    report.entities = snapshot.entity_count();
    report.stubs = snapshot.stub_count();
    Ok((snapshot, report))
}

/// Reads the three corpus files from disk and ingests them.
pub fn ingest_files(
    papers: impl AsRef<Path>,
    authors: impl AsRef<Path>,
    venues: impl AsRef<Path>,
) -> Result<(GraphSnapshot, IngestReport)> {
    let open = |p: &Path| -> Result<std::io::BufReader<std::fs::File>> {
        Ok(std::io::BufReader::new(std::fs::File::open(p)?))
    };
    ingest_corpus(
        open(papers.as_ref())?,
        open(authors.as_ref())?,
        open(venues.as_ref())?,
    )
}
