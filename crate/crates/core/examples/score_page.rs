//! Scores one page of papers under two lenses, with author counts and
//! recommendation dots.

use polylens::lens::AuthorCounts;
use polylens::synth::{generate, SynthConfig};
use polylens::{score_page, train, EntityId, Featurizer, LensConfig};

fn main() -> polylens::Result<()> {
    let corpus = generate(&SynthConfig {
        papers: 400,
        authors: 40,
        ..SynthConfig::default()
    });
    let snapshot = corpus.snapshot();
    let featurizer = Featurizer::for_snapshot(&snapshot)?;
    let models = corpus
        .topic_feeds(1)
        .iter()
        .take(2)
        .map(|f| train(&snapshot, f, &featurizer, 1))
        .collect::<polylens::Result<Vec<_>>>()?;
    let refs: Vec<_> = models.iter().collect();

    let page: Vec<EntityId> = corpus.papers.iter().take(12).map(|p| EntityId::paper(&p.id)).collect();
    let scoring = score_page(&refs, &snapshot, &featurizer, &page, &LensConfig::default(), 7, AuthorCounts::Exact)?;
    println!("{} unique papers scored for a page of {}", scoring.unique_base_entities, page.len());

    for paper in &scoring.papers {
        let cells: Vec<String> = scoring
            .feeds
            .iter()
            .map(|f| {
                let s = &paper.lenses[f];
                format!("{f}={:.2}{}", s.score, if s.relevant { "*" } else { "" })
            })
            .collect();
        println!("{}  {}", paper.paper_id, cells.join("  "));
    }
    println!("authors (relevant/total, dot):");
    for author in scoring.authors.iter().take(10) {
        let cells: Vec<String> = author
            .lenses
            .iter()
            .map(|(f, s)| format!("{f}={}/{}{}", s.capped_count, s.total_base, if s.recommended { " •" } else { "" }))
            .collect();
        println!("  {}  {}", author.author_id, cells.join("  "));
    }
    Ok(())
}
