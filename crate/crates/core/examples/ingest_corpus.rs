//! Generates a synthetic corpus, writes it as JSONL and ingests it back.
//!
//! ```text
//! cargo run -p polylens --example ingest_corpus [out_dir]
//! ```

use polylens::kg::{ingest_files, Relation};
use polylens::synth::{generate, SynthConfig};

fn main() -> polylens::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("polylens-corpus"));
    let corpus = generate(&SynthConfig::default());
    corpus.write_to_dir(&out)?;
    println!("wrote {} papers to {}", corpus.papers.len(), out.display());

    let (snapshot, report) = ingest_files(
        out.join("papers.jsonl"),
        out.join("authors.jsonl"),
        out.join("venues.jsonl"),
    )?;
    println!("{} entities, {} stubs, {} repaired problems", report.entities, report.stubs, report.errors.len());

    let author = snapshot.authors().next().expect("an author");
    let papers = snapshot.content_list(&author.id, Relation::WrittenBy)?;
    println!("{} ({}) wrote {} papers; newest first:", author.name, author.id.key, papers.len());
    for id in papers.iter().take(5) {
        let p = snapshot.paper(&id.key).expect("listed");
        println!("  {} {} {}", p.year, id.key, p.title);
    }
    Ok(())
}
