use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::DateTime;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal, Poisson};
use serde::Serialize;

use super::{GroupProfile, LogNormalParams, SynthError};
use crate::event::{EventType, Timestamp};
use crate::features::{write_metadata, RepoMetadata};
use crate::ingest::CurationConfig;
use crate::rng;

const COMMENT_WORDS: [&str; 12] = [
    "fix", "update", "typo", "refactor", "tests", "docs", "build", "merge", "cleanup", "bump", "release", "review",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub event_type: EventType,
    pub actor: String,
    pub timestamp: Timestamp,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRepo {
    pub repo_id: String,
    pub label: String,
    pub events: Vec<SynthEvent>,
    pub meta: RepoMetadata,
    /// `(actor, location)` for every actor in the repo.
    pub users: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub repos: Vec<SynthRepo>,
    /// `(location, country)` pairs that resolve every emitted location.
    pub gazetteer: Vec<(String, String)>,
}

/// Paths written by [`SynthCorpus::write_to_dir`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthFiles {
    pub events: PathBuf,
    pub meta: PathBuf,
    pub labels: PathBuf,
    pub users: PathBuf,
    pub gazetteer: PathBuf,
}

fn lognormal(p: LogNormalParams) -> LogNormal<f64> {
    LogNormal::new(p.mu, p.sigma).expect("validated sigma")
}

fn role_of(t: EventType) -> usize {
    use EventType::*;
    match t {
        Watch => 2,
        Push | PullRequest | Create | Delete | Release | Member | Public => 0,
        _ => 1,
    }
}

fn comment_body(target: usize, r: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    while s.len() < target {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(COMMENT_WORDS[r.gen_range(0..COMMENT_WORDS.len())]);
    }
    s.truncate(target);
    s.trim_end().to_string()
}

fn generate_repo(p: &GroupProfile, group: usize, idx: usize, seed: u64) -> SynthRepo {
    let mut r = rng::stream(seed, &[group as u64, idx as u64]);
    let slug = format!("{}-org{:05}", p.label.to_lowercase(), idx);
    let repo_id = format!("{slug}/project{idx:05}");

    let size = lognormal(p.repo_size).sample(&mut r).round() as usize;
    let n = size.clamp(p.min_events, p.max_events);

    // Event types: an opening Create, then a chain walk started from the
    // stationary mix so the opener does not bias the walk.
    let rows: Vec<WeightedIndex<f64>> = p
        .transition
        .iter()
        .map(|row| WeightedIndex::new(row).expect("validated transition row"))
        .collect();
    let mut types = Vec::with_capacity(n);
    types.push(EventType::Create);
    let mut state = WeightedIndex::new(&p.type_dist).expect("validated mix").sample(&mut r);
    types.push(EventType::ALL[state]);
    for _ in 2..n {
        state = rows[state].sample(&mut r);
        types.push(EventType::ALL[state]);
    }

    // Actor pools: leaders write, the community discusses, fans watch.
    let leaders = 1 + Poisson::new(p.leaders_mean).expect("positive mean").sample(&mut r) as usize;
    let community = 2 + Poisson::new(4.0).expect("positive mean").sample(&mut r) as usize;
    let n_watch = types.iter().filter(|t| **t == EventType::Watch).count();
    let fans = (n_watch / 2).max(1);
    let pools: [Vec<String>; 3] = [
        (0..leaders).map(|j| format!("{slug}-lead{j}")).collect(),
        (0..community).map(|j| format!("{slug}-dev{j}")).collect(),
        (0..fans).map(|j| format!("{slug}-fan{j}")).collect(),
    ];

    // Timestamps: lognormal gaps, squeezed into the collection window.
    let window = CurationConfig::default();
    let usable = ((window.window_end - window.window_start) as f64 * 0.98) as i64;
    let gap_dist = lognormal(p.iat_days);
    let mut gaps: Vec<f64> = (1..n).map(|_| gap_dist.sample(&mut r) * 86_400.0).collect();
    let span: f64 = gaps.iter().sum();
    if span > usable as f64 {
        let scale = usable as f64 / span;
        gaps.iter_mut().for_each(|g| *g *= scale);
    }
    let gaps: Vec<i64> = gaps.iter().map(|g| (g.floor() as i64).max(1)).collect();
    let span: i64 = gaps.iter().sum();
    let start = window.window_start + r.gen_range(0..=(usable - span).max(0));

    let comment_len = Normal::new(p.comment_len.0, p.comment_len.1).expect("validated std");
    let mut events = Vec::with_capacity(n);
    let mut t = start;
    for (i, ty) in types.into_iter().enumerate() {
        if i > 0 {
            t += gaps[i - 1];
        }
        let role = role_of(ty);
        let actor = if i == 0 {
            pools[0][0].clone()
        } else if role == 2 && r.gen_bool(0.25) {
            pools[1][r.gen_range(0..pools[1].len())].clone()
        } else {
            pools[role][r.gen_range(0..pools[role].len())].clone()
        };
        let comment = (ty == EventType::CommitComment).then(|| {
            let target = comment_len.sample(&mut r).round().max(1.0) as usize;
            comment_body(target, &mut r)
        });
        events.push(SynthEvent {
            event_type: ty,
            actor,
            timestamp: t,
            comment,
        });
    }

    let vocab = WeightedIndex::new(p.vocabulary.iter().map(|(_, w)| *w)).expect("validated vocabulary");
    let n_words = r.gen_range(4..=8);
    let description = (0..n_words)
        .map(|_| p.vocabulary[vocab.sample(&mut r)].0.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let meta = RepoMetadata {
        repo_id: repo_id.clone(),
        stars: lognormal(p.stars).sample(&mut r).round() as u64,
        forks: lognormal(p.forks).sample(&mut r).round() as u64,
        open_issues: lognormal(p.open_issues).sample(&mut r).round() as u64,
        description,
    };

    let users = pools
        .iter()
        .flatten()
        .map(|a| (a.clone(), p.locations[r.gen_range(0..p.locations.len())].clone()))
        .collect();

    SynthRepo {
        repo_id,
        label: p.label.clone(),
        events,
        meta,
        users,
    }
}

/// `n_per_group` repositories for each profile, each drawn from its own
/// `(seed, group, index)` stream.
pub fn generate_corpus(profiles: &[GroupProfile], n_per_group: usize, seed: u64) -> Result<SynthCorpus, SynthError> {
    if profiles.is_empty() || n_per_group == 0 {
        return Err(SynthError::InvalidConfig(
            "need at least one profile and one repo per group".into(),
        ));
    }
    let mut labels = BTreeSet::new();
    for p in profiles {
        p.validate()?;
        if !labels.insert(p.label.clone()) {
            return Err(SynthError::InvalidConfig(format!("duplicate profile label {}", p.label)));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..profiles.len())
        .flat_map(|g| (0..n_per_group).map(move |i| (g, i)))
        .collect();
    let repos = crate::par::map(&jobs, |&(g, i)| generate_repo(&profiles[g], g, i, seed));
    let mut gazetteer: Vec<(String, String)> = profiles
        .iter()
        .flat_map(|p| p.locations.iter().map(move |l| (l.clone(), p.label.clone())))
        .collect();
    gazetteer.sort();
    gazetteer.dedup();
    Ok(SynthCorpus { repos, gazetteer })
}

fn archive_line(repo: &str, e: &SynthEvent) -> String {
    let created = DateTime::from_timestamp(e.timestamp, 0)
        .expect("window timestamps are valid")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string();
    let mut v = serde_json::json!({
        "type": e.event_type.archive_name(),
        "actor": {"login": e.actor},
        "repo": {"name": repo},
        "created_at": created,
    });
    if let Some(body) = &e.comment {
        v["payload"] = serde_json::json!({"comment": {"body": body}});
    }
    v.to_string()
}

impl SynthCorpus {
    pub fn event_count(&self) -> usize {
        self.repos.iter().map(|r| r.events.len()).sum()
    }

    /// Archive-format NDJSON, one event per line, repo by repo.
    pub fn write_events<W: Write>(&self, mut w: W) -> Result<(), SynthError> {
        for repo in &self.repos {
            for e in &repo.events {
                writeln!(w, "{}", archive_line(&repo.repo_id, e))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_meta<W: Write>(&self, w: W) -> Result<(), SynthError> {
        let rows: Vec<RepoMetadata> = self.repos.iter().map(|r| r.meta.clone()).collect();
        write_metadata(&rows, w).map_err(|e| SynthError::Format(e.to_string()))
    }

    /// `repo_id,country`.
    pub fn write_labels<W: Write>(&self, w: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["repo_id", "country"])?;
        for r in &self.repos {
            w.write_record([&r.repo_id, &r.label])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `actor TAB location TAB company`, company left empty.
    pub fn write_users<W: Write>(&self, mut w: W) -> Result<(), SynthError> {
        for r in &self.repos {
            for (actor, loc) in &r.users {
                writeln!(w, "{actor}\t{loc}\t")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `location TAB country`.
    pub fn write_gazetteer<W: Write>(&self, mut w: W) -> Result<(), SynthError> {
        for (loc, cc) in &self.gazetteer {
            writeln!(w, "{loc}\t{cc}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<SynthFiles, SynthError> {
        fs::create_dir_all(dir)?;
        let files = SynthFiles {
            events: dir.join("events.ndjson"),
            meta: dir.join("meta.csv"),
            labels: dir.join("labels.csv"),
            users: dir.join("users.tsv"),
            gazetteer: dir.join("gazetteer.tsv"),
        };
        let open = |p: &Path| -> Result<BufWriter<fs::File>, SynthError> { Ok(BufWriter::new(fs::File::create(p)?)) };
        self.write_events(open(&files.events)?)?;
        self.write_meta(open(&files.meta)?)?;
        self.write_labels(open(&files.labels)?)?;
        self.write_users(open(&files.users)?)?;
        self.write_gazetteer(open(&files.gazetteer)?)?;
        Ok(files)
    }
}
