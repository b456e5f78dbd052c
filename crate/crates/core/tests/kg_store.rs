mod common;

use std::collections::BTreeSet;

use polylens::kg::ingest_corpus;
use polylens::synth::generate;
use polylens::{EntityId, Error, GraphSnapshot, Relation};
use proptest::prelude::*;

fn ingest(papers: &str, authors: &str, venues: &str) -> polylens::Result<GraphSnapshot> {
    ingest_corpus(papers.as_bytes(), authors.as_bytes(), venues.as_bytes()).map(|(s, _)| s)
}

#[test]
fn adjacency_matches_generator_edges() {
    let corpus = generate(&common::small_config(3));
    let snapshot = corpus.snapshot();

    let expected: BTreeSet<(EntityId, EntityId)> = corpus
        .written_by_edges()
        .into_iter()
        .map(|(p, a)| (EntityId::paper(p), EntityId::author(a)))
        .collect();
    let actual: BTreeSet<(EntityId, EntityId)> = snapshot.edges(Relation::WrittenBy).into_iter().collect();
    assert_eq!(actual, expected);

    let cites: BTreeSet<(EntityId, EntityId)> = corpus
        .papers
        .iter()
        .flat_map(|p| p.cites.iter().map(move |c| (EntityId::paper(&p.id), EntityId::paper(c))))
        .collect();
    assert_eq!(snapshot.edges(Relation::Cites).into_iter().collect::<BTreeSet<_>>(), cites);

    let published: BTreeSet<(EntityId, EntityId)> = corpus
        .papers
        .iter()
        .filter_map(|p| p.venue.as_ref().map(|v| (EntityId::paper(&p.id), EntityId::venue(v))))
        .collect();
    assert_eq!(
        snapshot.edges(Relation::PublishedIn).into_iter().collect::<BTreeSet<_>>(),
        published
    );
}

#[test]
fn reverse_is_inverse_of_forward() {
    let snapshot = generate(&common::small_config(4)).snapshot();
    for relation in Relation::ALL {
        for (from, to) in snapshot.edges(relation) {
            assert!(snapshot.forward(relation, &from).contains(&to));
            assert!(snapshot.reverse(relation, &to).contains(&from));
        }
        let forward_count: usize = snapshot.edges(relation).len();
        let (source, target) = relation.endpoints();
        let reverse_count: usize = all_ids(&snapshot, target)
            .iter()
            .map(|t| snapshot.reverse(relation, t).len())
            .sum();
        assert_eq!(forward_count, reverse_count, "{relation}");
        let _ = source;
    }
}

fn all_ids(snapshot: &GraphSnapshot, kind: polylens::EntityKind) -> Vec<EntityId> {
    use polylens::EntityKind::*;
    match kind {
        Paper => snapshot.papers().map(|p| p.id.clone()).collect(),
        Author => snapshot.authors().map(|a| a.id.clone()).collect(),
        Venue => snapshot.venues().map(|v| v.id.clone()).collect(),
        Institution => snapshot.institutions().map(|i| i.id.clone()).collect(),
    }
}

#[test]
fn venue_content_list_equals_brute_force_filter() {
    let corpus = generate(&common::small_config(5));
    let snapshot = corpus.snapshot();
    for venue in &corpus.venues {
        let listed = snapshot
            .content_list(&EntityId::venue(&venue.id), Relation::PublishedIn)
            .unwrap();
        let mut expected: Vec<&polylens::kg::PaperLine> = corpus
            .papers
            .iter()
            .filter(|p| p.venue.as_deref() == Some(venue.id.as_str()))
            .collect();
        expected.sort_by(|a, b| b.year.cmp(&a.year).then_with(|| a.id.cmp(&b.id)));
        let expected: Vec<EntityId> = expected.iter().map(|p| EntityId::paper(&p.id)).collect();
        assert_eq!(listed, expected, "venue {}", venue.id);
    }
}

#[test]
fn content_list_orders_by_year_then_key() {
    let papers = r#"{"id":"p1","title":"a","abstract":"b","year":2020,"venue":null,"authors":["a1"],"cites":[],"citation_count":0}
{"id":"p2","title":"a","abstract":"b","year":2022,"venue":null,"authors":["a1"],"cites":[],"citation_count":0}
{"id":"p0","title":"a","abstract":"b","year":2020,"venue":null,"authors":["a1"],"cites":[],"citation_count":0}
"#;
    let authors = r#"{"id":"a1","name":"A","affiliation":null}
{"id":"a2","name":"B","affiliation":null}
"#;
    let s = ingest(papers, authors, "").unwrap();
    let list = s.content_list(&EntityId::author("a1"), Relation::WrittenBy).unwrap();
    assert_eq!(list, vec![EntityId::paper("p2"), EntityId::paper("p0"), EntityId::paper("p1")]);
    assert!(s.content_list(&EntityId::author("a2"), Relation::WrittenBy).unwrap().is_empty());
    assert!(matches!(
        s.content_list(&EntityId::author("nobody"), Relation::WrittenBy),
        Err(Error::NotFound(_))
    ));
    assert!(matches!(
        s.content_list(&EntityId::author("a1"), Relation::Cites),
        Err(Error::InvalidRelation { .. })
    ));
}

#[test]
fn empty_streams_give_version_one() {
    let s = ingest("", "", "").unwrap();
    assert_eq!(s.entity_count(), 0);
    assert_eq!(s.version(), 1);
}

#[test]
fn malformed_line_is_named() {
    let papers = r#"{"id":"p1","title":"a","abstract":"b","year":2020,"venue":null,"authors":[],"cites":[],"citation_count":0}

{"id":"p2","title":"a","abstract":"b","year":"soon","venue":null,"authors":[],"cites":[],"citation_count":0}
"#;
    match ingest(papers, "", "") {
        Err(Error::Malformed { line, field, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(field, "year");
        }
        other => panic!("expected malformed error, got {other:?}"),
    }
}

#[test]
fn reingest_is_byte_stable() {
    let corpus = generate(&common::small_config(6));
    let a = corpus.snapshot().to_json_bytes().unwrap();
    let b = corpus.snapshot().to_json_bytes().unwrap();
    assert_eq!(a, b);
    let restored = GraphSnapshot::from_json_slice(&a).unwrap();
    assert_eq!(restored.to_json_bytes().unwrap(), a);
    assert_eq!(
        restored.edges(Relation::WrittenBy),
        corpus.snapshot().edges(Relation::WrittenBy)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn content_lists_have_no_duplicates_and_resolve(seed in 0u64..1000) {
        let snapshot = generate(&common::small_config(seed)).snapshot();
        for author in snapshot.authors() {
            let list = snapshot.content_list(&author.id, Relation::WrittenBy).unwrap();
            let unique: BTreeSet<&EntityId> = list.iter().collect();
            prop_assert_eq!(unique.len(), list.len());
            for p in &list {
                prop_assert!(snapshot.contains(p));
            }
        }
    }
}
