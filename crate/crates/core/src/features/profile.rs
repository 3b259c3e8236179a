//! Per-repository profile scalars and activity fingerprints.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::text::{normalize_whitespace, TextTranslator};
use super::FeatureError;
use crate::event::{Event, EventType, RepoRecord};

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFeatures {
    pub stars: u64,
    pub forks: u64,
    pub open_issues: u64,
    pub comment_len: f64,
    pub iat_days: f64,
    pub leaders: usize,
    pub jaccard: f64,
    pub topic: Vec<f64>,
}

/// Relative frequency of each development event type (Watch excluded), in
/// `EventType::development()` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityFingerprint {
    pub freqs: [f64; 13],
}

impl ActivityFingerprint {
    pub fn get(&self, t: EventType) -> Option<f64> {
        EventType::development()
            .position(|d| d == t)
            .map(|i| self.freqs[i])
    }
}

/// Median gap between consecutive events, in days.
pub fn median_interarrival_days(events: &[Event]) -> Result<f64, FeatureError> {
    if events.len() < 2 {
        return Err(FeatureError::TooFewEvents(events.len()));
    }
    let mut ts: Vec<i64> = events.iter().map(|e| e.timestamp).collect();
    ts.sort_unstable();
    let mut gaps: Vec<i64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    let n = gaps.len();
    let median = if n % 2 == 1 {
        gaps[n / 2] as f64
    } else {
        (gaps[n / 2 - 1] as f64 + gaps[n / 2] as f64) / 2.0
    };
    Ok(median / SECONDS_PER_DAY)
}

/// Distinct actors with at least one Push or PullRequest event.
pub fn leader_count(events: &[Event]) -> usize {
    events
        .iter()
        .filter(|e| matches!(e.event_type, EventType::Push | EventType::PullRequest))
        .map(|e| e.actor.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn watcher_contributor_jaccard(record: &RepoRecord) -> Result<f64, FeatureError> {
    let union = record.watchers.union(&record.contributors).count();
    if union == 0 {
        return Err(FeatureError::BothSetsEmpty);
    }
    let inter = record.watchers.intersection(&record.contributors).count();
    Ok(inter as f64 / union as f64)
}

/// Mean character count of translated, whitespace-normalized commit comments;
/// 0 when there are none.
pub fn mean_commit_comment_length(record: &RepoRecord, translator: &dyn TextTranslator) -> f64 {
    if record.commit_comments.is_empty() {
        return 0.0;
    }
    let total: usize = record
        .commit_comments
        .iter()
        .map(|c| normalize_whitespace(&translator.translate(c)).chars().count())
        .sum();
    total as f64 / record.commit_comments.len() as f64
}

pub fn activity_fingerprint(record: &RepoRecord) -> Result<ActivityFingerprint, FeatureError> {
    let mut counts = [0usize; EventType::COUNT];
    for e in &record.events {
        counts[e.event_type.index()] += 1;
    }
    let total: usize = EventType::development().map(|t| counts[t.index()]).sum();
    if total == 0 {
        return Err(FeatureError::OnlyWatchEvents(record.repo_id.clone()));
    }
    let mut freqs = [0.0; 13];
    for (slot, t) in freqs.iter_mut().zip(EventType::development()) {
        *slot = counts[t.index()] as f64 / total as f64;
    }
    Ok(ActivityFingerprint { freqs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::text::IdentityTranslator;
    use proptest::prelude::*;

    fn ev(actor: &str, t: EventType, ts: i64) -> Event {
        Event::new(actor, t, "r", ts).unwrap()
    }

    fn at_days(days: &[f64]) -> Vec<Event> {
        days.iter()
            .map(|d| ev("u", EventType::Push, (d * SECONDS_PER_DAY) as i64))
            .collect()
    }

    #[test]
    fn interarrival_examples() {
        assert_eq!(median_interarrival_days(&at_days(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(median_interarrival_days(&at_days(&[0.0, 1.0, 3.0])).unwrap(), 1.5);
        assert_eq!(
            median_interarrival_days(&at_days(&[0.0, 10.0, 11.0, 12.0, 13.0])).unwrap(),
            1.0
        );
        assert!(matches!(
            median_interarrival_days(&at_days(&[0.0])),
            Err(FeatureError::TooFewEvents(1))
        ));
    }

    #[test]
    fn leader_examples() {
        use EventType::*;
        assert_eq!(
            leader_count(&[ev("u1", Push, 0), ev("u1", Push, 1), ev("u2", PullRequest, 2)]),
            2
        );
        assert_eq!(leader_count(&[ev("u1", IssueComment, 0)]), 0);
        assert_eq!(leader_count(&[ev("u1", Push, 0), ev("u1", PullRequest, 1)]), 1);
    }

    fn with_sets(w: &[&str], c: &[&str]) -> RepoRecord {
        let mut r = RepoRecord::from_events("r", vec![]);
        r.watchers = w.iter().map(|s| s.to_string()).collect();
        r.contributors = c.iter().map(|s| s.to_string()).collect();
        r
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(watcher_contributor_jaccard(&with_sets(&["a", "b"], &["a", "b"])).unwrap(), 1.0);
        assert_eq!(watcher_contributor_jaccard(&with_sets(&["a"], &["b"])).unwrap(), 0.0);
        assert_eq!(
            watcher_contributor_jaccard(&with_sets(&["a", "b"], &["b", "c"])).unwrap(),
            1.0 / 3.0
        );
        assert!(matches!(
            watcher_contributor_jaccard(&with_sets(&[], &[])),
            Err(FeatureError::BothSetsEmpty)
        ));
    }

    #[test]
    fn comment_length_examples() {
        let mut r = RepoRecord::from_events("r", vec![]);
        assert_eq!(mean_commit_comment_length(&r, &IdentityTranslator), 0.0);
        r.commit_comments = vec!["abcd".into(), "ab".into()];
        assert_eq!(mean_commit_comment_length(&r, &IdentityTranslator), 3.0);
        r.commit_comments = vec!["  a  b ".into()];
        assert_eq!(mean_commit_comment_length(&r, &IdentityTranslator), 3.0);
    }

    #[test]
    fn fingerprint_examples() {
        use EventType::*;
        let r = RepoRecord::from_events(
            "r",
            vec![ev("a", Push, 0), ev("a", Push, 1), ev("b", Fork, 2), ev("c", Watch, 3)],
        );
        let fp = activity_fingerprint(&r).unwrap();
        assert_eq!(fp.get(Push), Some(2.0 / 3.0));
        assert_eq!(fp.get(Fork), Some(1.0 / 3.0));
        assert_eq!(fp.get(Watch), None);
        assert_eq!(fp.freqs.iter().filter(|x| **x > 0.0).count(), 2);

        let all_but_create: Vec<Event> = EventType::development()
            .filter(|t| *t != Create)
            .enumerate()
            .map(|(i, t)| ev("a", t, i as i64))
            .collect();
        let fp = activity_fingerprint(&RepoRecord::from_events("r", all_but_create)).unwrap();
        assert_eq!(fp.get(Create), Some(0.0));
        for t in EventType::development().filter(|t| *t != Create) {
            assert_eq!(fp.get(t), Some(1.0 / 12.0));
        }

        let pushes = RepoRecord::from_events("r", vec![ev("a", Push, 0), ev("a", Push, 1)]);
        let fp = activity_fingerprint(&pushes).unwrap();
        assert_eq!(fp.get(Push), Some(1.0));
        assert_eq!(fp.freqs.iter().sum::<f64>(), 1.0);

        let watch_only = RepoRecord::from_events("r", vec![ev("a", Watch, 0)]);
        assert!(matches!(
            activity_fingerprint(&watch_only),
            Err(FeatureError::OnlyWatchEvents(_))
        ));
    }

    proptest! {
        #[test]
        fn interarrival_is_shift_invariant(ts in prop::collection::vec(0i64..10_000_000, 2..40), shift in -1_000_000i64..1_000_000) {
            let a: Vec<Event> = ts.iter().map(|t| ev("u", EventType::Push, *t)).collect();
            let b: Vec<Event> = ts.iter().map(|t| ev("u", EventType::Push, t + shift)).collect();
            prop_assert_eq!(median_interarrival_days(&a).unwrap(), median_interarrival_days(&b).unwrap());
        }

        #[test]
        fn fingerprint_and_jaccard_bounds(types in prop::collection::vec(0usize..14, 1..80), actors in prop::collection::vec(0u8..6, 80)) {
            let evs: Vec<Event> = types.iter().zip(&actors).enumerate()
                .map(|(i, (t, a))| ev(&format!("u{a}"), EventType::ALL[*t], i as i64)).collect();
            let rec = RepoRecord::from_events("r", evs);
            if let Ok(fp) = activity_fingerprint(&rec) {
                prop_assert!((fp.freqs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(fp.freqs.iter().all(|x| *x >= 0.0));
            }
            let j = watcher_contributor_jaccard(&rec).unwrap();
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert!(leader_count(&rec.events) <= rec.contributors.len());
        }
    }
}
