mod common;

use std::collections::BTreeSet;

use polylens::bench::{brute_force_count, build_eval_set, run_benchmark, top_papers, within_factor2, CSV_HEADER};
use polylens::lens::LensConfig;
use polylens::preference::{FeatureSpace, LinearScorer};
use polylens::summary::KPolicy;
use polylens::synth::SynthConfig;
use polylens::{EntityId, Relation, TrainedLensModel};

fn saturated(model: &TrainedLensModel) -> TrainedLensModel {
    let mut m = model.clone();
    m.embed_model = Some(LinearScorer {
        weights: vec![0.0; 64],
        bias: 100.0,
        feature_space: FeatureSpace::Embedding,
    });
    m
}

#[test]
fn brute_force_matches_manual_embedding_scoring() {
    let fx = common::medium(1);
    let config = LensConfig::default();
    for model in &fx.models {
        let embed = model.embed_model.as_ref().unwrap();
        for author in fx.snapshot.authors() {
            let got = brute_force_count(model, &fx.snapshot, &fx.featurizer, &author.id, &config).unwrap();
            let mut n = 0;
            let mut count = 0;
            for p in fx.snapshot.papers().filter(|p| p.authors.contains(&author.id)) {
                n += 1;
                let e = fx.featurizer.provider().embed(p).unwrap();
                let s: f64 = e.as_slice().iter().zip(&embed.weights).map(|(x, w)| x * w).sum::<f64>() + embed.bias;
                if ((s - model.tau) * model.gamma + 0.5).clamp(0.0, 1.0) >= 0.5 {
                    count += 1;
                }
            }
            assert_eq!((got.count, got.invocations), (count, n));
        }
    }
}

#[test]
fn brute_force_edge_cases() {
    let fx = common::medium(2);
    let config = LensConfig::default();
    let all = saturated(&fx.models[0]);
    for author in fx.snapshot.authors().take(5) {
        let n = fx.snapshot.content_list(&author.id, Relation::WrittenBy).unwrap().len();
        assert_eq!(brute_force_count(&all, &fx.snapshot, &fx.featurizer, &author.id, &config).unwrap().count, n);
    }
    let (lonely, _) = polylens::kg::ingest_corpus(
        &b""[..],
        &br#"{"id":"solo","name":"Solo","affiliation":null}"#[..],
        &b""[..],
    )
    .unwrap();
    let est = brute_force_count(&all, &lonely, &fx.featurizer, &EntityId::author("solo"), &config).unwrap();
    assert_eq!((est.count, est.invocations), (0, 0));
}

#[test]
fn eval_set_membership_checks_out() {
    let fx = common::fixture(&SynthConfig::default(), 3);
    let config = LensConfig::default();
    for model in &fx.models {
        let set = build_eval_set(model, &fx.snapshot, &fx.featurizer, &config, 11).unwrap();
        assert_eq!(set, build_eval_set(model, &fx.snapshot, &fx.featurizer, &config, 11).unwrap());

        // independent recomputation of the filters
        let mut scored: Vec<(f64, u64, &str)> = fx
            .snapshot
            .corpus_papers()
            .map(|p| {
                let pref = model.preference(&fx.featurizer.featurize(p)).value();
                (pref, p.citation_count, p.id.key.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
        let top: Vec<&str> = scored.iter().take(500.min(scored.len())).map(|s| s.2).collect();
        assert_eq!(
            top,
            top_papers(model, &fx.snapshot, &fx.featurizer).iter().map(|p| p.key.as_str()).collect::<Vec<_>>()
        );
        let on_top: BTreeSet<String> = top
            .iter()
            .flat_map(|k| fx.snapshot.paper(k).unwrap().authors.iter().map(|a| a.key.clone()))
            .collect();
        let count = |a: &EntityId| brute_force_count(model, &fx.snapshot, &fx.featurizer, a, &config).unwrap().count;

        let groups = [&set.positives, &set.hard_negatives, &set.easy_negatives];
        let sizes: BTreeSet<usize> = groups.iter().map(|g| g.len()).collect();
        assert_eq!(sizes.len(), 1, "groups must have equal size");
        let mut all = BTreeSet::new();
        for g in groups {
            for a in g.iter() {
                assert!(all.insert(a.clone()), "groups overlap");
            }
        }
        for a in &set.positives {
            assert!(on_top.contains(&a.key) && count(a) > 0);
        }
        for a in &set.hard_negatives {
            assert!(on_top.contains(&a.key) && count(a) == 0);
        }
        for a in set.authors() {
            assert_eq!(set.true_counts[&a.key], count(a));
        }
    }
}

#[test]
fn all_positive_corpus_shrinks_to_nothing() {
    let fx = common::medium(4);
    let model = saturated(&fx.models[0]);
    let set = build_eval_set(&model, &fx.snapshot, &fx.featurizer, &LensConfig::default(), 1).unwrap();
    assert!(set.hard_negatives.is_empty());
    assert!(set.positives.is_empty());
    assert!(set.easy_negatives.is_empty());
    assert_eq!(set.shrunk_to, Some(0));
}

#[test]
fn benchmark_rows_obey_accounting() {
    let fx = common::fixture(&SynthConfig::default(), 5);
    let models: Vec<&TrainedLensModel> = fx.models.iter().collect();
    let config = LensConfig::default();
    let report = run_benchmark(&models, &KPolicy::sweep(), &fx.snapshot, &fx.featurizer, &config, 5).unwrap();
    assert_eq!(report.rows.len(), 8);

    let ex = report.row("exhaustive").unwrap();
    assert_eq!(ex.rmse, 0.0);
    assert_eq!(ex.pct_within_factor2, 100.0);
    assert_eq!(ex.speedup, Some(1.0));

    let single = report.row("single").unwrap();
    assert!((single.speedup.unwrap() - report.mean_n).abs() < 1e-9);

    for row in report.rows.iter().filter(|r| r.speedup.is_some()) {
        assert!((0.0..=100.0).contains(&row.pct_within_factor2));
        let product = row.speedup.unwrap() * row.mean_k.unwrap();
        assert!((product - report.mean_n).abs() < 1e-9, "{}", row.k_policy);
    }
    assert!(report.row("sqrt:1").unwrap().rmse < single.rmse);

    // baseline recomputed with the same predicate
    let baseline = report.rows.last().unwrap();
    assert_eq!(baseline.method, "mean-relevant-count");
    let mut truths = Vec::new();
    let mut pool = Vec::new();
    for m in &fx.models {
        let set = build_eval_set(m, &fx.snapshot, &fx.featurizer, &config, polylens::seed::mix(5, &m.feed_id)).unwrap();
        truths.extend(set.true_counts.values().copied());
        pool.extend(set.true_counts.values().copied());
    }
    let predicted = (pool.iter().sum::<usize>() as f64 / pool.len() as f64).round() as usize;
    let within = truths.iter().filter(|&&t| within_factor2(t, predicted)).count();
    assert!((baseline.pct_within_factor2 - 100.0 * within as f64 / truths.len() as f64).abs() < 1e-9);

    let again = run_benchmark(&models, &KPolicy::sweep(), &fx.snapshot, &fx.featurizer, &config, 5).unwrap();
    assert_eq!(again.without_wallclock(), report.clone().without_wallclock());

    let csv = report.to_csv_string();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(csv.lines().any(|l| l.starts_with("summary-embeddings,exhaustive,0.0,100.0,1.0,")));
    assert_eq!(csv.lines().count(), 9);
}
