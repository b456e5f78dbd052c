use std::path::Path;
use std::process::{Command, Output};

use polylens::synth::{generate, SynthConfig};
use polylens::Rating;
use tempfile::TempDir;

fn polylens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polylens"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("POLYLENS_DATA")
        .output()
        .expect("run polylens")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingest(raw: &Path, out: &Path) -> Output {
    polylens(&[
        "ingest",
        "--papers",
        s(&raw.join("papers.jsonl")),
        "--authors",
        s(&raw.join("authors.jsonl")),
        "--venues",
        s(&raw.join("venues.jsonl")),
        "--out",
        s(out),
    ])
}

#[test]
fn malformed_line_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw");
    generate(&SynthConfig {
        papers: 20,
        authors: 5,
        ..SynthConfig::default()
    })
    .write_to_dir(&raw)
    .unwrap();
    let papers = std::fs::read_to_string(raw.join("papers.jsonl")).unwrap();
    let mut lines: Vec<String> = papers.lines().map(str::to_owned).collect();
    lines[2] = lines[2].replacen("\"year\":", "\"year\":\"soon\",\"x\":", 1);
    std::fs::write(raw.join("papers.jsonl"), lines.join("\n")).unwrap();

    let out = ingest(&raw, &dir.path().join("data"));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
    assert!(!dir.path().join("data").join("snapshot.json").exists());
}

#[test]
fn usage_errors_and_missing_data() {
    assert_eq!(polylens(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(polylens(&["--help"]).status.code(), Some(0));
    let dir = TempDir::new().unwrap();
    let out = polylens(&["feed", "list", "--data", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
    let out = polylens(&["index", "build", "--data", s(dir.path()), "--policy", "sqrt:3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn end_to_end_bench_csv() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw");
    let data = dir.path().join("data");
    let corpus = generate(&SynthConfig::default());
    corpus.write_to_dir(&raw).unwrap();
    let out = ingest(&raw, &data);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["entities"].as_u64().unwrap() > 1200);

    for t in 0..3 {
        let name = format!("Topic {t}");
        let out = polylens(&["feed", "create", "--data", s(&data), "--name", &name]);
        assert_eq!(out.status.code(), Some(0));
        let id = format!("topic-{t}");
        let template = corpus.topic_feed(&id, t, 6, 24, t as u64);
        for (paper, rating) in &template.ratings {
            let rating = if *rating == Rating::Liked { "liked" } else { "disliked" };
            let out = polylens(&["feed", "rate", "--data", s(&data), "--feed", &id, "--paper", paper, "--rating", rating]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let out = polylens(&["feed", "rate", "--data", s(&data), "--feed", "topic-0", "--paper", "nope", "--rating", "liked"]);
    assert_eq!(out.status.code(), Some(1));

    let out = polylens(&["index", "build", "--data", s(&data), "--policy", "sqrt:1", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("index.json").exists());

    let csv_path = dir.path().join("report.csv");
    let out = polylens(&["bench", "run", "--data", s(&data), "--policies", "single,sqrt:1,exhaustive", "--seed", "1", "--out", s(&csv_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(polylens::bench::CSV_HEADER.join(",").as_str()));
    let exhaustive = csv.lines().find(|l| l.contains(",exhaustive,")).expect("exhaustive row");
    let fields: Vec<&str> = exhaustive.split(',').collect();
    assert_eq!(fields[2], "0.0");
    assert_eq!(fields[3], "100.0");

    let bad = dir.path().join("missing").join("report.csv");
    let out = polylens(&["bench", "run", "--data", s(&data), "--policies", "single", "--out", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}
