use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{NaiveDate, NaiveTime};
use log::{info, warn};
use serde::Serialize;

use repoprint::analytics::{event_type_distribution, kl_divergence, two_sample_z_test, write_stats_csv, StatRow};
use repoprint::features::{
    apply_metadata, description_corpus, fit_lda, leader_count, mean_commit_comment_length, median_interarrival_days,
    read_labels, read_metadata, watcher_contributor_jaccard, CommandTranslator, FeatureExtractor, FeatureTable,
    IdentityTranslator, LdaConfig, SequenceEmbedder, TextTranslator, PROFILE_SCALARS,
};
use repoprint::ingest::{
    curate_archive, label_repositories, parse_archive_files, read_user_profiles, CountryResolver, CurationConfig,
    Gazetteer, GeocodeCache, Geocoder, NominatimGeocoder, ResolveReport,
};
use repoprint::learn::{fit_logreg, LogRegConfig};
use repoprint::pipeline::{
    ablation_groups, ablation_leave_one_out, case_study as run_case_study, clusters_with_cuts, evaluate_clusters,
    loo_units, permuted_labels, quartile_clusters, resolve_units, write_case_study_csv, write_eval_csv,
    write_groups_csv, write_loo_csv, write_pca_csv, ClusterAssignment, CompanyRepo, Dataset, EvalConfig,
};
use repoprint::seqembed::{load_model, save_model, train, write_train_log, TrainConfig};
use repoprint::store::{load_repos, save_repos};
use repoprint::synth::{generate_corpus, interpolate_pair, reference_profiles, GroupProfile};
use repoprint::RepoRecord;

use crate::manifest::{beside, load_summary, save_summary, ManifestBuilder};
use crate::{AblateArgs, AblateMode, CaseStudyArgs, EmbedTrainArgs, EvalArgs, EvalCommon, FeaturesArgs, IngestArgs,
    StatsArgs, SynthArgs};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn dir_manifest(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}.manifest.json"))
}

// ---------------------------------------------------------------- ingest

fn parse_window(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("window must look like YYYY-MM-DD..YYYY-MM-DD, got `{s}`"))?;
    let day = |d: &str| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").with_context(|| format!("bad date `{d}`"));
    let start = day(a)?.and_time(NaiveTime::MIN).and_utc().timestamp();
    let end = day(b)?.and_hms_opt(23, 59, 59).expect("valid time").and_utc().timestamp();
    Ok((start, end))
}

fn expand_globs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in patterns {
        let mut matched: Vec<PathBuf> = glob::glob(p)
            .with_context(|| format!("bad glob `{p}`"))?
            .collect::<Result<_, _>>()?;
        if matched.is_empty() {
            bail!("archive pattern `{p}` matched no files");
        }
        matched.sort();
        out.extend(matched);
    }
    Ok(out)
}

fn label_with<G: Geocoder>(
    geocoder: G,
    cache_path: Option<&Path>,
    repos: &mut [RepoRecord],
    users: &[repoprint::ingest::UserProfile],
    cfg: &CurationConfig,
) -> Result<ResolveReport> {
    let cache = match cache_path {
        Some(p) => GeocodeCache::load(p)?,
        None => GeocodeCache::new(),
    };
    let resolver = CountryResolver::new(geocoder, cache);
    label_repositories(repos, users, &resolver, cfg);
    if let Some(p) = cache_path {
        resolver.cache().save(p)?;
    }
    Ok(resolver.report())
}

#[derive(Serialize)]
struct IngestReport {
    archives: usize,
    parse: repoprint::ingest::ParseReport,
    curation: repoprint::ingest::CurationReport,
    geocoding: Option<ResolveReport>,
    labels: BTreeMap<String, usize>,
    unlabeled: usize,
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("ingest", a)?;
    let (window_start, window_end) = parse_window(&a.window)?;
    let cfg = CurationConfig {
        min_events: a.min_events,
        require_create: a.require_create,
        window_start,
        window_end,
        ..CurationConfig::default()
    };
    cfg.validate()?;
    let paths = expand_globs(&a.archive)?;
    for p in &paths {
        m.input(p)?;
    }
    let archive = parse_archive_files(&paths)?;
    let (mut repos, curation) = curate_archive(&archive, &cfg);
    info!("kept {} of {} repositories", curation.repos_kept, curation.repos_seen);

    let geocoding = match (&a.users, &a.geocoder) {
        (Some(users_path), Some(spec)) => {
            m.input(users_path)?;
            let users = read_user_profiles(open(users_path)?)?;
            let cache = a.cache.as_deref();
            let report = if let Some(path) = spec.strip_prefix("file:") {
                m.input(Path::new(path))?;
                label_with(Gazetteer::from_path(Path::new(path))?, cache, &mut repos, &users, &cfg)?
            } else if let Some(rest) = spec.strip_prefix("http:") {
                // Accept both `http:<url>` and a bare `http://host` URL.
                let url = if rest.starts_with("//") { spec.as_str() } else { rest };
                label_with(NominatimGeocoder::new(url), cache, &mut repos, &users, &cfg)?
            } else if spec.starts_with("https:") {
                label_with(NominatimGeocoder::new(spec), cache, &mut repos, &users, &cfg)?
            } else {
                bail!("geocoder must be `file:<path>` or `http:<url>`, got `{spec}`");
            };
            Some(report)
        }
        (Some(_), None) => bail!("--users needs --geocoder to resolve locations"),
        (None, _) => {
            warn!("no --users file given; repositories are left unlabeled");
            None
        }
    };

    let mut labels = BTreeMap::new();
    let mut unlabeled = 0;
    for r in &repos {
        match &r.country {
            Some(c) => *labels.entry(c.code().to_string()).or_insert(0) += 1,
            None => unlabeled += 1,
        }
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_repos(&repos, &a.out)?;
    m.output(&a.out);
    m.report(&IngestReport {
        archives: paths.len(),
        parse: archive.report,
        curation,
        geocoding,
        labels,
        unlabeled,
    })?;
    m.write(&beside(&a.out))
}

// ---------------------------------------------------------------- features

pub fn features(a: &FeaturesArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("features", a)?;
    m.seeds(&[a.lda_seed]);
    m.input(&a.repos)?;
    let mut repos = load_repos(&a.repos)?;
    if let Some(meta) = &a.meta {
        m.input(meta)?;
        let missing = apply_metadata(&mut repos, &read_metadata(open(meta)?)?);
        if missing > 0 {
            warn!("{missing} repositories have no metadata row; stars, forks and issues stay 0");
        }
    }
    let lda_cfg = LdaConfig {
        k: a.lda_k,
        iters: a.lda_iters,
        seed: a.lda_seed,
        alpha: a.lda_alpha,
        beta: a.lda_beta,
        ..LdaConfig::default()
    };
    let lda = fit_lda(&description_corpus(&repos), &lda_cfg)?;

    let model = match a.embedder.as_str() {
        "none" => None,
        path => {
            m.input(Path::new(path))?;
            Some(load_model(Path::new(path)).with_context(|| format!("loading embedder {path}"))?)
        }
    };
    let translator: Box<dyn TextTranslator> = match &a.translator_cmd {
        Some(cmd) => Box::new(CommandTranslator::parse(cmd).ok_or_else(|| anyhow!("empty --translator-cmd"))?),
        None => Box::new(IdentityTranslator),
    };
    let extractor = FeatureExtractor {
        lda: &lda.model,
        embedder: model.as_ref().map(|e| e as &dyn SequenceEmbedder),
        translator: translator.as_ref(),
        latent_dim: model.as_ref().map_or(a.latent, |e| e.latent_dim()),
    };
    let mut table = extractor.extract(&repos)?;
    if let Some(labels) = &a.labels {
        m.input(labels)?;
        table.relabel(&read_labels(open(labels)?)?);
    }
    table.label_column = a.label_column.clone();
    table.write_csv(create(&a.out)?)?;
    m.output(&a.out);
    m.report(&serde_json::json!({
        "rows": table.rows.len(),
        "columns": table.schema.len(),
        "unlabeled": table.rows.iter().filter(|r| r.label.is_none()).count(),
        "lda_vocabulary": lda.model.vocab.len(),
    }))?;
    m.write(&beside(&a.out))
}

// ---------------------------------------------------------------- embed-train

pub fn embed_train(a: &EmbedTrainArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("embed-train", a)?;
    m.seeds(&[a.seed]);
    m.input(&a.repos)?;
    let repos = load_repos(&a.repos)?;
    let picked: Vec<&RepoRecord> = match a.limit {
        Some(limit) if limit == 0 => bail!("--limit must be positive"),
        Some(limit) if limit < repos.len() => {
            (0..limit).map(|i| &repos[i * repos.len() / limit]).collect()
        }
        _ => repos.iter().collect(),
    };
    let sequences: Vec<(String, Vec<repoprint::EventType>)> =
        picked.iter().map(|r| (r.repo_id.clone(), r.event_types())).collect();
    let cfg = TrainConfig {
        latent_dim: a.latent,
        hidden_size: a.hidden,
        max_seq_len: a.max_len,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        include_watch: a.include_watch,
        ..TrainConfig::default()
    };
    let outcome = train(&cfg, &sequences)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&outcome.model, &a.out)?;
    m.output(&a.out);
    if let Some(log) = &a.log {
        let mut w = create(log)?;
        write_train_log(&outcome.curve, &mut w)?;
        w.flush()?;
        m.output(log);
    }
    m.report(&serde_json::json!({
        "sequences": sequences.len(),
        "first_epoch": outcome.curve.first(),
        "last_epoch": outcome.curve.last(),
    }))?;
    m.write(&beside(&a.out))
}

// ---------------------------------------------------------------- evaluate / ablate

struct Loaded {
    data: Dataset,
    assignment: ClusterAssignment,
    cfg: EvalConfig,
}

fn parse_cuts(s: &str) -> Result<Option<[u64; 3]>> {
    if s == "auto" {
        return Ok(None);
    }
    let v: Vec<u64> = s
        .split(',')
        .map(|p| p.trim().parse::<u64>().with_context(|| format!("bad cut `{p}`")))
        .collect::<Result<_>>()?;
    let cuts: [u64; 3] = v
        .try_into()
        .map_err(|_| anyhow!("--cuts needs `auto` or exactly three counts, got `{s}`"))?;
    Ok(Some(cuts))
}

fn load_for_eval(c: &EvalCommon, m: &mut ManifestBuilder) -> Result<Loaded> {
    m.input(&c.features)?;
    let mut table = FeatureTable::read_csv(open(&c.features)?)?;
    if let Some(labels) = &c.labels {
        m.input(labels)?;
        table.relabel(&read_labels(open(labels)?)?);
    }
    let before = table.rows.len();
    table.rows.retain(|r| r.label.is_some());
    if table.rows.len() < before {
        warn!("dropped {} unlabeled rows", before - table.rows.len());
    }
    let counts = Dataset::require_counts(&table)?;
    let mut data = Dataset::from_table(&table)?;
    if let Some(s) = c.permute_labels {
        data = data.with_labels(permuted_labels(&data.labels, s));
    }
    let assignment = match parse_cuts(&c.cuts)? {
        Some(cuts) => clusters_with_cuts(&counts, cuts)?,
        None => quartile_clusters(&counts)?,
    };
    if c.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let seeds: Vec<u64> = (0..c.seeds as u64).map(|i| c.seed + i).collect();
    m.seeds(&seeds);
    let cfg = EvalConfig {
        seeds,
        logreg: LogRegConfig {
            learning_rate: c.lr,
            epochs: c.epochs,
            l2_lambda: c.l2,
            seed: c.seed,
        },
        positive_label: c.positive_label.clone(),
        ..EvalConfig::default()
    };
    cfg.validate()?;
    Ok(Loaded { data, assignment, cfg })
}

pub fn evaluate(a: &EvalArgs) -> Result<()> {
    let c = &a.common;
    let mut m = ManifestBuilder::new("evaluate", a)?;
    let Loaded { data, assignment, cfg } = load_for_eval(c, &mut m)?;
    let report = evaluate_clusters(&data, &assignment, &cfg)?;
    fs::create_dir_all(&c.out_dir)?;

    let csv_path = c.out_dir.join("eval_report.csv");
    write_eval_csv(&report, create(&csv_path)?)?;
    m.output(&csv_path);

    // One model on every row, kept for inspection of the weights.
    let y: Vec<bool> = data.labels.iter().map(|l| *l == report.labels[0]).collect();
    let model = fit_logreg(&data.x, &y, &cfg.logreg)?.with_feature_names(data.schema.names().to_vec());
    let model_path = c.out_dir.join("model.json");
    fs::write(&model_path, model.to_json()? + "\n")?;
    m.output(&model_path);

    let mut summary = load_summary(&c.out_dir);
    summary.eval = Some(report.clone());
    m.output(&save_summary(&c.out_dir, &summary)?);
    m.report(&serde_json::json!({
        "cuts": report.cuts,
        "explicit_cuts": report.explicit_cuts,
        "cluster_sizes": report.clusters.iter().map(|e| (e.name.clone(), e.size)).collect::<BTreeMap<_, _>>(),
        "comparison": report.comparison,
    }))?;
    m.write(&dir_manifest(&c.out_dir, "evaluate"))
}

pub fn ablate(a: &AblateArgs) -> Result<()> {
    let c = &a.common;
    let mut m = ManifestBuilder::new("ablate", a)?;
    let Loaded { data, assignment, cfg } = load_for_eval(c, &mut m)?;
    fs::create_dir_all(&c.out_dir)?;
    let mut summary = load_summary(&c.out_dir);
    let (path, cells) = match a.mode {
        AblateMode::Loo => {
            let units = if a.units.is_empty() {
                loo_units(&data.schema)
            } else {
                resolve_units(&data.schema, &a.units)?
            };
            let report = ablation_leave_one_out(&data, &assignment, &units, &cfg)?;
            let path = c.out_dir.join("ablation_loo.csv");
            write_loo_csv(&report, create(&path)?)?;
            let n = report.loo.len();
            summary.ablation_loo = Some(report);
            (path, n)
        }
        AblateMode::Groups => {
            if !a.units.is_empty() {
                bail!("--units only applies to --mode loo");
            }
            let report = ablation_groups(&data, &assignment, &cfg)?;
            let path = c.out_dir.join("ablation_groups.csv");
            write_groups_csv(&report, create(&path)?)?;
            let n = report.groups.len();
            summary.ablation_groups = Some(report);
            (path, n)
        }
    };
    m.output(&path);
    m.output(&save_summary(&c.out_dir, &summary)?);
    m.report(&serde_json::json!({ "cells": cells, "cuts": assignment.cuts }))?;
    let name = match a.mode {
        AblateMode::Loo => "ablate-loo",
        AblateMode::Groups => "ablate-groups",
    };
    m.write(&dir_manifest(&c.out_dir, name))
}

// ---------------------------------------------------------------- case-study

pub fn case_study(a: &CaseStudyArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("case-study", a)?;
    m.input(&a.features)?;
    let mut table = FeatureTable::read_csv(open(&a.features)?)?;
    if let Some(labels) = &a.labels {
        m.input(labels)?;
        table.relabel(&read_labels(open(labels)?)?);
    }
    let repos: Vec<CompanyRepo> = table
        .rows
        .iter()
        .filter_map(|r| {
            r.label.as_ref().map(|company| CompanyRepo {
                company: company.clone(),
                repo: r.repo_id.clone(),
                values: r.values.clone(),
            })
        })
        .collect();
    if repos.len() < table.rows.len() {
        warn!("dropped {} rows without a company", table.rows.len() - repos.len());
    }
    let study = run_case_study(&repos, a.k)?;
    fs::create_dir_all(&a.out_dir)?;
    let rows_path = a.out_dir.join("case_study.csv");
    write_case_study_csv(&study, create(&rows_path)?)?;
    let pca_path = a.out_dir.join("pca_coords.csv");
    write_pca_csv(&study, create(&pca_path)?)?;
    m.output(&rows_path);
    m.output(&pca_path);
    let mut summary = load_summary(&a.out_dir);
    summary.case_study = Some(study.clone());
    m.output(&save_summary(&a.out_dir, &summary)?);
    m.report(&serde_json::json!({
        "repos": study.rows.len(),
        "self_label_rate": study.self_label_rate,
        "pca_degenerate": study.pca.degenerate,
    }))?;
    m.write(&dir_manifest(&a.out_dir, "case-study"))
}

// ---------------------------------------------------------------- synth

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("synth", a)?;
    m.seeds(&[a.seed]);
    if !(0.0..=1.0).contains(&a.mix) {
        bail!("--mix must lie in [0, 1], got {}", a.mix);
    }
    let mut profiles: Vec<GroupProfile> = match a.profiles.as_str() {
        "reference" => {
            let (us, cn) = reference_profiles();
            vec![us, cn]
        }
        path => {
            m.input(Path::new(path))?;
            serde_json::from_reader(open(Path::new(path))?).with_context(|| format!("parsing profiles {path}"))?
        }
    };
    if a.mix > 0.0 {
        if profiles.len() != 2 {
            bail!("--mix needs exactly two profiles, got {}", profiles.len());
        }
        let (x, y) = interpolate_pair(&profiles[0], &profiles[1], a.mix);
        profiles = vec![x, y];
    }
    let corpus = generate_corpus(&profiles, a.n, a.seed)?;
    let files = corpus.write_to_dir(&a.out_dir)?;
    for p in [&files.events, &files.meta, &files.labels, &files.users, &files.gazetteer] {
        m.output(p);
    }
    m.report(&serde_json::json!({
        "groups": profiles.iter().map(|p| p.label.clone()).collect::<Vec<_>>(),
        "repos": corpus.repos.len(),
        "events": corpus.event_count(),
    }))?;
    m.write(&dir_manifest(&a.out_dir, "synth"))
}

// ---------------------------------------------------------------- stats

fn profile_scalar(r: &RepoRecord, idx: usize) -> Option<f64> {
    Some(match idx {
        0 => r.stars as f64,
        1 => r.forks as f64,
        2 => r.open_issues as f64,
        3 => mean_commit_comment_length(r, &IdentityTranslator),
        4 => median_interarrival_days(&r.events).ok()?,
        5 => leader_count(&r.events) as f64,
        6 => watcher_contributor_jaccard(r).ok()?,
        _ => unreachable!("seven profile scalars"),
    })
}

pub fn stats(a: &StatsArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("stats", a)?;
    m.input(&a.repos)?;
    let mut repos = load_repos(&a.repos)?;
    if let Some(meta) = &a.meta {
        m.input(meta)?;
        apply_metadata(&mut repos, &read_metadata(open(meta)?)?);
    }
    m.seeds(&[a.lda_seed]);
    let lda = fit_lda(
        &description_corpus(&repos),
        &LdaConfig {
            iters: a.lda_iters,
            seed: a.lda_seed,
            ..LdaConfig::default()
        },
    )?;
    // Topic 1 affinity travels with its repo through the grouping.
    let mut by_group: BTreeMap<String, Vec<(RepoRecord, f64)>> = BTreeMap::new();
    for (r, theta) in repos.into_iter().zip(&lda.doc_topics) {
        if let Some(c) = r.country.clone() {
            by_group.entry(c.code().to_string()).or_default().push((r, theta[0]));
        }
    }
    let (ga, gb) = match a.groups.as_slice() {
        [x, y] => (x.clone(), y.clone()),
        [] => {
            let mut sizes: Vec<(&String, usize)> = by_group.iter().map(|(k, v)| (k, v.len())).collect();
            // Largest first; ties by code.
            sizes.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
            match sizes.as_slice() {
                [x, y, ..] => (x.0.clone(), y.0.clone()),
                _ => bail!("need at least two labeled groups, found {}", sizes.len()),
            }
        }
        other => bail!("--groups needs exactly two labels, got {}", other.len()),
    };
    let group = |g: &str| by_group.get(g).ok_or_else(|| anyhow!("no repositories labeled `{g}`"));
    let (ta, tb) = (group(&ga)?, group(&gb)?);
    let ra: Vec<RepoRecord> = ta.iter().map(|(r, _)| r.clone()).collect();
    let rb: Vec<RepoRecord> = tb.iter().map(|(r, _)| r.clone()).collect();

    let mut rows = Vec::new();
    for (include_watch, tag) in [(false, "no_watch"), (true, "with_watch")] {
        let pa = event_type_distribution(&ra, include_watch)?;
        let pb = event_type_distribution(&rb, include_watch)?;
        for (x, y, px, py) in [(&ga, &gb, &pa, &pb), (&gb, &ga, &pb, &pa)] {
            rows.push(StatRow {
                metric: format!("kl_event_types_{tag}"),
                group_a: x.clone(),
                group_b: y.clone(),
                value: kl_divergence(px, py)?,
                p_value: None,
            });
        }
    }
    let mut samples: Vec<(String, Vec<f64>, Vec<f64>)> = PROFILE_SCALARS
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let va = ra.iter().filter_map(|r| profile_scalar(r, idx)).collect();
            let vb = rb.iter().filter_map(|r| profile_scalar(r, idx)).collect();
            (name.to_string(), va, vb)
        })
        .collect();
    samples.push((
        "topic_1".to_string(),
        ta.iter().map(|(_, t)| *t).collect(),
        tb.iter().map(|(_, t)| *t).collect(),
    ));
    for (name, va, vb) in &samples {
        match two_sample_z_test(va, vb) {
            Ok(z) => rows.push(StatRow {
                metric: format!("z_{name}"),
                group_a: ga.clone(),
                group_b: gb.clone(),
                value: z.z,
                p_value: Some(z.p_two_sided),
            }),
            Err(e) => warn!("skipping z-test for {name}: {e}"),
        }
    }
    let mut w = create(&a.out)?;
    write_stats_csv(&rows, &mut w)?;
    w.flush()?;
    m.output(&a.out);
    m.report(&serde_json::json!({
        "groups": [ga, gb],
        "sizes": [ra.len(), rb.len()],
        "rows": rows,
    }))?;
    m.write(&beside(&a.out))
}
