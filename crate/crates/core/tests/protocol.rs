//! Protocol-level behaviour on small synthetic corpora.

use std::collections::HashMap;

use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use repoprint::features::{apply_metadata, description_corpus, fit_lda, FeatureExtractor, IdentityTranslator, LdaConfig};
use repoprint::ingest::{curate_archive, parse_archive, CurationConfig};
use repoprint::pipeline::{
    ablation_leave_one_out, case_study, evaluate_members, permuted_labels, quartile_clusters, resolve_units,
    CompanyRepo, Dataset, EvalConfig,
};
use repoprint::seqembed::{train, TrainConfig};
use repoprint::synth::{generate_corpus, interpolate_pair, reference_profiles};
use repoprint::{CountryLabel, RepoRecord};

/// Synthetic corpus pushed through the archive parser and curation, with
/// metadata and ground-truth labels attached.
fn labeled_corpus(n: usize, mix: f64, seed: u64) -> Vec<RepoRecord> {
    let (us, cn) = reference_profiles();
    let (us, cn) = interpolate_pair(&us, &cn, mix);
    let synth = generate_corpus(&[us, cn], n, seed).unwrap();
    let mut buf = Vec::new();
    synth.write_events(&mut buf).unwrap();
    let (mut repos, _) = curate_archive(&parse_archive(&buf[..]).unwrap(), &CurationConfig::default());
    let meta: Vec<_> = synth.repos.iter().map(|r| r.meta.clone()).collect();
    apply_metadata(&mut repos, &meta);
    let labels: HashMap<_, _> = synth.repos.iter().map(|r| (r.repo_id.clone(), r.label.clone())).collect();
    for r in &mut repos {
        r.country = Some(CountryLabel::new(&labels[&r.repo_id]).unwrap());
    }
    repos
}

fn dataset(repos: &[RepoRecord]) -> Dataset {
    let lda = fit_lda(
        &description_corpus(repos),
        &LdaConfig {
            iters: 100,
            seed: 3,
            ..LdaConfig::default()
        },
    )
    .unwrap();
    let ex = FeatureExtractor {
        lda: &lda.model,
        embedder: None,
        translator: &IdentityTranslator,
        latent_dim: 0,
    };
    Dataset::from_table(&ex.extract(repos).unwrap()).unwrap()
}

fn single_group_accuracy(data: &Dataset, cfg: &EvalConfig) -> (f64, f64) {
    let all: Vec<usize> = (0..data.len()).collect();
    let cols: Vec<usize> = (0..data.dim()).collect();
    let m = evaluate_members(data, &all, &cols, cfg, "Single").unwrap().metrics;
    (m.accuracy, m.majority_baseline)
}

#[test]
fn accuracy_falls_as_profiles_converge() {
    let cfg = EvalConfig {
        seeds: vec![1, 2, 3],
        ..EvalConfig::default()
    };
    let acc: Vec<f64> = [0.0, 0.8, 1.0]
        .iter()
        .map(|&mix| single_group_accuracy(&dataset(&labeled_corpus(150, mix, 11)), &cfg).0)
        .collect();
    assert!(acc[0] > acc[1] && acc[1] > acc[2], "not monotone: {acc:?}");
    assert!(acc[0] >= 0.9, "separated groups should be easy: {acc:?}");
    assert!((acc[2] - 0.5).abs() <= 0.1, "identical groups should sit near chance: {acc:?}");
}

#[test]
fn shuffled_labels_fall_to_baseline() {
    let data = dataset(&labeled_corpus(200, 0.0, 5));
    let cfg = EvalConfig::default();
    let (real, _) = single_group_accuracy(&data, &cfg);
    let shuffled = data.with_labels(permuted_labels(&data.labels, 99));
    let (acc, majority) = single_group_accuracy(&shuffled, &cfg);
    assert!(real > 0.9);
    assert!((acc - majority).abs() <= 0.1, "shuffled accuracy {acc} vs majority {majority}");
}

#[test]
fn withholding_a_constant_column_changes_nothing() {
    let mut data = dataset(&labeled_corpus(80, 0.7, 2));
    let col = data.schema.index_of("stars").unwrap();
    for row in &mut data.x {
        row[col] = 3.0;
    }
    let assignment = quartile_clusters(&data.activity_counts).unwrap();
    let units = resolve_units(&data.schema, &["stars".to_string(), "iat_days".to_string()]).unwrap();
    let report = ablation_leave_one_out(&data, &assignment, &units, &EvalConfig::default()).unwrap();
    let constant: Vec<_> = report.loo.iter().filter(|c| c.feature == "stars").collect();
    assert_eq!(constant.len(), 4);
    for cell in constant {
        assert_eq!(cell.delta, 0.0, "{cell:?}");
    }
}

#[test]
fn case_study_recovers_separated_companies() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let centers = [[0.0, 0.0, 0.0, 0.0], [4.0, 0.0, 1.0, 0.0], [0.0, 4.0, 0.0, 1.0]];
    let mut repos = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..20 {
            repos.push(CompanyRepo {
                company: format!("co{c}"),
                repo: format!("co{c}/r{i}"),
                values: center.iter().map(|m| m + noise.sample(&mut rng)).collect(),
            });
        }
    }
    let study = case_study(&repos, 5).unwrap();
    assert!(study.self_label_rate >= 0.95, "{}", study.self_label_rate);
    assert!(!study.pca.degenerate);
    for comp in &study.pca.components {
        assert_relative_eq!(comp.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-9);
    }
    let top2: f64 = study.pca.explained_variance.iter().sum();
    assert!(top2 / study.pca.total_variance > 0.8);
}

#[test]
fn training_stays_finite_for_a_hundred_steps() {
    let repos = labeled_corpus(50, 0.0, 8);
    let seqs: Vec<_> = repos.iter().map(|r| (r.repo_id.clone(), r.event_types())).collect();
    assert_eq!(seqs.len(), 100);
    let cfg = TrainConfig {
        hidden_size: 8,
        latent_dim: 4,
        batch_size: 1,
        epochs: 1,
        learning_rate: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &seqs).unwrap();
    assert!(out.model.params.is_finite());
    let last = out.curve.last().unwrap();
    assert!(last.mean_total.is_finite() && last.mean_kl >= 0.0);
}
