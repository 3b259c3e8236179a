use std::collections::{BTreeMap, HashMap};

use chrono::{TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::archive::ParsedArchive;
use super::IngestError;
use crate::event::{CountryLabel, Event, EventType, RepoRecord, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub min_events: usize,
    pub require_create: bool,
    /// A country must cover strictly more than this fraction of contributors.
    pub majority_threshold: f64,
    /// Inclusive bounds, UTC seconds.
    pub window_start: Timestamp,
    pub window_end: Timestamp,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            min_events: 50,
            require_create: true,
            majority_threshold: 0.5,
            window_start: Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap().timestamp(),
            window_end: Utc.with_ymd_and_hms(2020, 6, 30, 23, 59, 59).unwrap().timestamp(),
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.majority_threshold > 0.0 && self.majority_threshold < 1.0) {
            return Err(IngestError::Config(format!(
                "majority_threshold must lie in (0, 1), got {}",
                self.majority_threshold
            )));
        }
        if self.min_events < 1 {
            return Err(IngestError::Config("min_events must be at least 1".into()));
        }
        if self.window_start >= self.window_end {
            return Err(IngestError::Config("window start must precede window end".into()));
        }
        Ok(())
    }

    pub fn in_window(&self, t: Timestamp) -> bool {
        (self.window_start..=self.window_end).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationReport {
    pub events_in: u64,
    pub events_outside_window: u64,
    pub repos_seen: u64,
    pub repos_kept: u64,
    pub excluded_too_few_events: u64,
    pub excluded_no_create: u64,
    /// Stars and forks were counted from Watch/Fork events rather than read
    /// from a metadata sidecar.
    pub metadata_derived_from_events: bool,
}

/// Groups events by repository and keeps those passing the size and Create
/// predicates. Output is ordered by `repo_id`; stars and forks are
/// provisionally counted from Watch and Fork events.
pub fn curate(events: &[Event], cfg: &CurationConfig) -> Vec<RepoRecord> {
    curate_with_report(events, cfg).0
}

pub fn curate_with_report(events: &[Event], cfg: &CurationConfig) -> (Vec<RepoRecord>, CurationReport) {
    let mut report = CurationReport {
        events_in: events.len() as u64,
        metadata_derived_from_events: true,
        ..Default::default()
    };
    let mut by_repo: BTreeMap<&str, Vec<Event>> = BTreeMap::new();
    for e in events {
        if !cfg.in_window(e.timestamp) {
            report.events_outside_window += 1;
            continue;
        }
        by_repo.entry(e.repo.as_str()).or_default().push(e.clone());
    }
    report.repos_seen = by_repo.len() as u64;

    let mut out = Vec::new();
    for (repo, evs) in by_repo {
        if cfg.require_create && !evs.iter().any(|e| e.event_type == EventType::Create) {
            report.excluded_no_create += 1;
            continue;
        }
        if evs.len() < cfg.min_events {
            report.excluded_too_few_events += 1;
            continue;
        }
        let mut rec = RepoRecord::from_events(repo, evs);
        rec.stars = rec.count_of(EventType::Watch) as u64;
        rec.forks = rec.count_of(EventType::Fork) as u64;
        out.push(rec);
    }
    report.repos_kept = out.len() as u64;
    (out, report)
}

/// [`curate`] plus attachment of commit comment bodies (in time order).
pub fn curate_archive(archive: &ParsedArchive, cfg: &CurationConfig) -> (Vec<RepoRecord>, CurationReport) {
    let (mut repos, report) = curate_with_report(&archive.events, cfg);
    let mut comments: HashMap<&str, Vec<(Timestamp, &str)>> = HashMap::new();
    for c in &archive.comments {
        if cfg.in_window(c.timestamp) {
            comments.entry(c.repo.as_str()).or_default().push((c.timestamp, &c.body));
        }
    }
    for rec in &mut repos {
        if let Some(mut list) = comments.remove(rec.repo_id.as_str()) {
            list.sort_by_key(|(t, _)| *t);
            rec.commit_comments = list.into_iter().map(|(_, b)| b.to_string()).collect();
        }
    }
    (repos, report)
}

/// Majority country over all contributors. Contributors missing from
/// `user_countries` or mapped to `None` stay in the denominator.
pub fn assign_repo_country(
    record: &RepoRecord,
    user_countries: &HashMap<String, Option<CountryLabel>>,
    cfg: &CurationConfig,
) -> Result<Option<CountryLabel>, IngestError> {
    if record.contributors.is_empty() {
        return Err(IngestError::EmptyContributorSet(record.repo_id.clone()));
    }
    let mut counts: BTreeMap<&CountryLabel, usize> = BTreeMap::new();
    for actor in &record.contributors {
        if let Some(Some(c)) = user_countries.get(actor) {
            *counts.entry(c).or_default() += 1;
        }
    }
    let total = record.contributors.len() as f64;
    // Highest count wins; BTreeMap order makes ties resolve to the smaller code.
    let best = counts
        .into_iter()
        .fold(None::<(&CountryLabel, usize)>, |acc, (c, n)| match acc {
            Some((_, m)) if m >= n => acc,
            _ => Some((c, n)),
        });
    Ok(best
        .filter(|(_, n)| *n as f64 / total > cfg.majority_threshold)
        .map(|(c, _)| c.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T0: Timestamp = 1_514_764_800; // 2018-01-01

    fn repo_events(repo: &str, n: usize, with_create: bool) -> Vec<Event> {
        (0..n)
            .map(|i| {
                let t = if with_create && i == 0 {
                    EventType::Create
                } else {
                    EventType::Push
                };
                Event::new(format!("u{}", i % 3), t, repo, T0 + i as i64).unwrap()
            })
            .collect()
    }

    #[test]
    fn size_and_create_predicates() {
        let cfg = CurationConfig::default();
        let mut evs = repo_events("a49", 49, true);
        evs.extend(repo_events("b50", 50, true));
        evs.extend(repo_events("c500", 500, false));
        let (out, report) = curate_with_report(&evs, &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].repo_id, "b50");
        assert_eq!(report.excluded_too_few_events, 1);
        assert_eq!(report.excluded_no_create, 1);
    }

    #[test]
    fn events_outside_window_are_dropped() {
        let cfg = CurationConfig {
            min_events: 1,
            ..Default::default()
        };
        let evs = vec![
            Event::new("u", EventType::Create, "r", T0).unwrap(),
            Event::new("u", EventType::Push, "r", cfg.window_end + 1).unwrap(),
            Event::new("u", EventType::Push, "r", cfg.window_start - 1).unwrap(),
        ];
        let (out, report) = curate_with_report(&evs, &cfg);
        assert_eq!(out[0].len(), 1);
        assert_eq!(report.events_outside_window, 2);
    }

    #[test]
    fn config_validation() {
        assert!(CurationConfig::default().validate().is_ok());
        let bad = CurationConfig {
            majority_threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = CurationConfig {
            window_end: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn record_with(contributors: &[&str]) -> RepoRecord {
        let evs = contributors
            .iter()
            .enumerate()
            .map(|(i, a)| Event::new(*a, EventType::Push, "r", i as i64).unwrap())
            .collect();
        RepoRecord::from_events("r", evs)
    }

    fn countries(pairs: &[(&str, Option<&str>)]) -> HashMap<String, Option<CountryLabel>> {
        pairs
            .iter()
            .map(|(a, c)| (a.to_string(), c.map(|c| CountryLabel::new(c).unwrap())))
            .collect()
    }

    #[test]
    fn majority_assignment() {
        let cfg = CurationConfig::default();
        let rec = record_with(&["u1", "u2", "u3"]);
        let m = countries(&[("u1", Some("US")), ("u2", Some("US")), ("u3", Some("CN"))]);
        assert_eq!(assign_repo_country(&rec, &m, &cfg).unwrap().unwrap().code(), "US");

        let rec2 = record_with(&["u1", "u2"]);
        let m = countries(&[("u1", Some("US")), ("u2", Some("CN"))]);
        assert_eq!(assign_repo_country(&rec2, &m, &cfg).unwrap(), None);

        // Unresolved contributors count in the denominator: 1/3.
        let m = countries(&[("u1", Some("US")), ("u2", None), ("u3", None)]);
        assert_eq!(assign_repo_country(&rec, &m, &cfg).unwrap(), None);
    }

    #[test]
    fn watchers_do_not_vote() {
        let mut rec = record_with(&["u1"]);
        rec.watchers.insert("w1".into());
        rec.watchers.insert("w2".into());
        let m = countries(&[("u1", Some("CN")), ("w1", Some("US")), ("w2", Some("US"))]);
        let cfg = CurationConfig::default();
        assert_eq!(assign_repo_country(&rec, &m, &cfg).unwrap().unwrap().code(), "CN");
    }

    #[test]
    fn empty_contributors() {
        let rec = RepoRecord::from_events("r", vec![]);
        assert!(matches!(
            assign_repo_country(&rec, &HashMap::new(), &CurationConfig::default()),
            Err(IngestError::EmptyContributorSet(_))
        ));
    }

    proptest! {
        #[test]
        fn curate_is_idempotent(sizes in prop::collection::vec((40usize..70, any::<bool>()), 1..6)) {
            let cfg = CurationConfig::default();
            let mut evs = Vec::new();
            for (i, (n, create)) in sizes.iter().enumerate() {
                evs.extend(repo_events(&format!("r{i}"), *n, *create));
            }
            let first = curate(&evs, &cfg);
            for rec in &first {
                prop_assert!(rec.len() >= cfg.min_events);
                prop_assert!(rec.count_of(EventType::Create) > 0);
            }
            let flat: Vec<Event> = first.iter().flat_map(|r| r.events.clone()).collect();
            prop_assert_eq!(curate(&flat, &cfg), first);
        }

        #[test]
        fn assignment_is_permutation_invariant(codes in prop::collection::vec(prop::option::of(0usize..3), 1..12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let names = ["US", "CN", "DE"];
            let actors: Vec<String> = (0..codes.len()).map(|i| format!("u{i}")).collect();
            let refs: Vec<&str> = actors.iter().map(String::as_str).collect();
            let rec = record_with(&refs);
            let mut pairs: Vec<(String, Option<CountryLabel>)> = actors
                .iter()
                .zip(&codes)
                .map(|(a, c)| (a.clone(), c.map(|c| CountryLabel::new(names[c]).unwrap())))
                .collect();
            let cfg = CurationConfig::default();
            let a = assign_repo_country(&rec, &pairs.iter().cloned().collect(), &cfg).unwrap();
            pairs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = assign_repo_country(&rec, &pairs.into_iter().collect(), &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
