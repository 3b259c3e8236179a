//! Event vocabulary and the per-repository domain types shared by every
//! other module.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// UTC seconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("unknown event type `{0}`")]
    UnknownEventType(String),
    #[error("invalid country code `{0}`: expected two uppercase ASCII letters")]
    InvalidCountryCode(String),
    #[error("event field `{0}` must be non-empty")]
    EmptyField(&'static str),
}

/// The fourteen development event types, in their stable index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Create,
    CommitComment,
    Push,
    Watch,
    Fork,
    IssueComment,
    Issues,
    PullRequest,
    ReviewComment,
    Delete,
    Gollum,
    Member,
    Release,
    Public,
}

impl EventType {
    pub const COUNT: usize = 14;

    pub const ALL: [EventType; Self::COUNT] = [
        EventType::Create,
        EventType::CommitComment,
        EventType::Push,
        EventType::Watch,
        EventType::Fork,
        EventType::IssueComment,
        EventType::Issues,
        EventType::PullRequest,
        EventType::ReviewComment,
        EventType::Delete,
        EventType::Gollum,
        EventType::Member,
        EventType::Release,
        EventType::Public,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<EventType> {
        Self::ALL.get(idx).copied()
    }

    /// Bare name, e.g. `"Push"`.
    pub fn name(self) -> &'static str {
        match self {
            EventType::Create => "Create",
            EventType::CommitComment => "CommitComment",
            EventType::Push => "Push",
            EventType::Watch => "Watch",
            EventType::Fork => "Fork",
            EventType::IssueComment => "IssueComment",
            EventType::Issues => "Issues",
            EventType::PullRequest => "PullRequest",
            EventType::ReviewComment => "ReviewComment",
            EventType::Delete => "Delete",
            EventType::Gollum => "Gollum",
            EventType::Member => "Member",
            EventType::Release => "Release",
            EventType::Public => "Public",
        }
    }

    /// Name as it appears in event archives, e.g. `"PushEvent"`.
    ///
    /// Review comments are archived as `PullRequestReviewCommentEvent`.
    pub fn archive_name(self) -> &'static str {
        match self {
            EventType::Create => "CreateEvent",
            EventType::CommitComment => "CommitCommentEvent",
            EventType::Push => "PushEvent",
            EventType::Watch => "WatchEvent",
            EventType::Fork => "ForkEvent",
            EventType::IssueComment => "IssueCommentEvent",
            EventType::Issues => "IssuesEvent",
            EventType::PullRequest => "PullRequestEvent",
            EventType::ReviewComment => "PullRequestReviewCommentEvent",
            EventType::Delete => "DeleteEvent",
            EventType::Gollum => "GollumEvent",
            EventType::Member => "MemberEvent",
            EventType::Release => "ReleaseEvent",
            EventType::Public => "PublicEvent",
        }
    }

    /// Event types that count as development activity (everything but Watch).
    pub fn development() -> impl Iterator<Item = EventType> {
        Self::ALL.into_iter().filter(|t| *t != EventType::Watch)
    }

    pub fn is_development(self) -> bool {
        self != EventType::Watch
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventType {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_event_type(s)
    }
}

/// Parses either a bare type name (`"Push"`) or an archive name (`"PushEvent"`).
pub fn parse_event_type(name: &str) -> Result<EventType, CoreError> {
    let bare = name.strip_suffix("Event").unwrap_or(name);
    let found = match bare {
        "PullRequestReviewComment" => Some(EventType::ReviewComment),
        _ => EventType::ALL.into_iter().find(|t| t.name() == bare),
    };
    match found {
        Some(t) if !name.is_empty() => Ok(t),
        _ => Err(CoreError::UnknownEventType(name.to_string())),
    }
}

/// ISO-3166 alpha-2 country code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CountryLabel(String);

impl CountryLabel {
    pub fn new(code: &str) -> Result<Self, CoreError> {
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(CountryLabel(code.to_string()))
        } else {
            Err(CoreError::InvalidCountryCode(code.to_string()))
        }
    }

    /// Accepts lowercase input such as geocoder `country_code` fields.
    pub fn parse_loose(code: &str) -> Result<Self, CoreError> {
        Self::new(&code.trim().to_ascii_uppercase())
    }

    pub fn code(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CountryLabel {
    type Error = CoreError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        CountryLabel::new(&value)
    }
}

impl From<CountryLabel> for String {
    fn from(value: CountryLabel) -> Self {
        value.0
    }
}

impl fmt::Display for CountryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One `(actor, event type, repository, time)` observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub actor: String,
    pub event_type: EventType,
    pub repo: String,
    pub timestamp: Timestamp,
}

impl Event {
    pub fn new(
        actor: impl Into<String>,
        event_type: EventType,
        repo: impl Into<String>,
        timestamp: Timestamp,
    ) -> Result<Self, CoreError> {
        let actor = actor.into();
        let repo = repo.into();
        if actor.is_empty() {
            return Err(CoreError::EmptyField("actor"));
        }
        if repo.is_empty() {
            return Err(CoreError::EmptyField("repo"));
        }
        Ok(Event {
            actor,
            event_type,
            repo,
            timestamp,
        })
    }
}

/// Stable sort by timestamp; equal timestamps keep input order.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by_key(|e| e.timestamp);
}

/// A curated repository and everything the feature extractors need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoRecord {
    pub repo_id: String,
    pub events: Vec<Event>,
    pub contributors: BTreeSet<String>,
    pub watchers: BTreeSet<String>,
    pub country: Option<CountryLabel>,
    pub stars: u64,
    pub forks: u64,
    pub open_issues: u64,
    pub description: String,
    pub commit_comments: Vec<String>,
}

impl RepoRecord {
    /// Builds a record from its events, sorting them and deriving the actor sets.
    /// Metadata counts start at zero.
    pub fn from_events(repo_id: impl Into<String>, mut events: Vec<Event>) -> Self {
        sort_events(&mut events);
        let mut contributors = BTreeSet::new();
        let mut watchers = BTreeSet::new();
        for e in &events {
            if e.event_type == EventType::Watch {
                watchers.insert(e.actor.clone());
            } else {
                contributors.insert(e.actor.clone());
            }
        }
        RepoRecord {
            repo_id: repo_id.into(),
            events,
            contributors,
            watchers,
            country: None,
            stars: 0,
            forks: 0,
            open_issues: 0,
            description: String::new(),
            commit_comments: Vec::new(),
        }
    }

    /// Number of events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Non-Watch event count, the activity measure used for size clustering.
    pub fn activity_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.event_type.is_development())
            .count()
    }

    pub fn event_types(&self) -> Vec<EventType> {
        self.events.iter().map(|e| e.event_type).collect()
    }

    pub fn count_of(&self, t: EventType) -> usize {
        self.events.iter().filter(|e| e.event_type == t).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_event_type_accepts_both_spellings() {
        assert_eq!(parse_event_type("PushEvent").unwrap(), EventType::Push);
        assert_eq!(parse_event_type("Watch").unwrap(), EventType::Watch);
        assert_eq!(
            parse_event_type("PullRequestReviewCommentEvent").unwrap(),
            EventType::ReviewComment
        );
        assert_eq!(
            parse_event_type("Star"),
            Err(CoreError::UnknownEventType("Star".into()))
        );
        assert!(parse_event_type("").is_err());
        assert!(parse_event_type("Event").is_err());
    }

    #[test]
    fn index_is_a_bijection() {
        assert_eq!(EventType::ALL.len(), 14);
        for (i, t) in EventType::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(EventType::from_index(i), Some(*t));
            assert_eq!(parse_event_type(t.name()).unwrap(), *t);
            assert_eq!(parse_event_type(t.archive_name()).unwrap(), *t);
        }
        assert_eq!(EventType::from_index(14), None);
        assert_eq!(EventType::development().count(), 13);
    }

    #[test]
    fn country_codes() {
        assert!(CountryLabel::new("US").is_ok());
        assert!(CountryLabel::new("us").is_err());
        assert!(CountryLabel::new("USA").is_err());
        assert_eq!(CountryLabel::parse_loose(" cn ").unwrap().code(), "CN");
        let json = serde_json::to_string(&CountryLabel::new("CN").unwrap()).unwrap();
        assert_eq!(json, "\"CN\"");
        assert!(serde_json::from_str::<CountryLabel>("\"cn\"").is_err());
    }

    #[test]
    fn empty_actor_rejected() {
        assert!(Event::new("", EventType::Push, "r", 0).is_err());
        assert!(Event::new("a", EventType::Push, "", 0).is_err());
    }

    #[test]
    fn record_derives_actor_sets() {
        let evs = vec![
            Event::new("b", EventType::Watch, "r", 5).unwrap(),
            Event::new("a", EventType::Push, "r", 1).unwrap(),
            Event::new("b", EventType::Fork, "r", 3).unwrap(),
        ];
        let rec = RepoRecord::from_events("r", evs);
        assert_eq!(rec.events[0].timestamp, 1);
        assert_eq!(rec.contributors.len(), 2);
        assert_eq!(rec.watchers.len(), 1);
        assert_eq!(rec.activity_count(), 2);
    }

    fn arb_event() -> impl Strategy<Value = Event> {
        (0usize..14, 0i64..50, 0u8..5).prop_map(|(t, ts, a)| Event {
            actor: format!("u{a}"),
            event_type: EventType::ALL[t],
            repo: "r".into(),
            timestamp: ts,
        })
    }

    proptest! {
        #[test]
        fn split_by_type_and_merge_reproduces_stream(mut evs in prop::collection::vec(arb_event(), 0..60)) {
            sort_events(&mut evs);
            // Tag each event with its position so the merge can restore input order on ties.
            let tagged: Vec<(usize, Event)> = evs.iter().cloned().enumerate().collect();
            let mut merged: Vec<(usize, Event)> = Vec::new();
            for t in EventType::ALL {
                merged.extend(tagged.iter().filter(|(_, e)| e.event_type == t).cloned());
            }
            merged.sort_by_key(|(i, e)| (e.timestamp, *i));
            let merged: Vec<Event> = merged.into_iter().map(|(_, e)| e).collect();
            prop_assert_eq!(merged, evs);
        }

        #[test]
        fn record_serde_round_trip(evs in prop::collection::vec(arb_event(), 0..30)) {
            let mut rec = RepoRecord::from_events("r", evs);
            rec.country = Some(CountryLabel::new("US").unwrap());
            rec.description = "a b".into();
            let bytes = bincode::serialize(&rec).unwrap();
            let back: RepoRecord = bincode::deserialize(&bytes).unwrap();
            prop_assert_eq!(&back, &rec);
            let json = serde_json::to_string(&rec).unwrap();
            let back: RepoRecord = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, rec);
        }
    }
}
