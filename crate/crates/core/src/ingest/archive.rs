//! Newline-delimited JSON event archives.
//!
//! Each line carries `actor`, `type`, `repo` and `created_at`. `actor` and
//! `repo` may be plain strings or the archive's nested objects
//! (`{"login": ..}` / `{"name": ..}`). Commit comment bodies are picked up
//! from `payload.comment.body` when present.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::DateTime;
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::event::{parse_event_type, Event, EventType, Timestamp};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines_read: u64,
    pub events_kept: u64,
    pub lines_skipped: u64,
}

impl ParseReport {
    pub fn merge(&mut self, other: &ParseReport) {
        self.lines_read += other.lines_read;
        self.events_kept += other.events_kept;
        self.lines_skipped += other.lines_skipped;
    }
}

/// Body of a `CommitComment` event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub repo: String,
    pub timestamp: Timestamp,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedArchive {
    pub events: Vec<Event>,
    pub comments: Vec<CommentRecord>,
    pub report: ParseReport,
}

impl ParsedArchive {
    /// Appends `other`, keeping `self`'s records first.
    pub fn extend(&mut self, other: ParsedArchive) {
        self.events.extend(other.events);
        self.comments.extend(other.comments);
        self.report.merge(&other.report);
    }
}

fn name_field<'a>(v: &'a Value, nested: &str) -> Option<&'a str> {
    match v {
        Value::String(s) => Some(s.as_str()),
        Value::Object(map) => map.get(nested).and_then(Value::as_str),
        _ => None,
    }
}

fn parse_line(line: &str) -> Option<(Event, Option<String>)> {
    let v: Value = serde_json::from_str(line).ok()?;
    let actor = name_field(v.get("actor")?, "login")?;
    let repo = name_field(v.get("repo")?, "name")?;
    let event_type = parse_event_type(v.get("type")?.as_str()?).ok()?;
    let created = v.get("created_at")?.as_str()?;
    let timestamp = DateTime::parse_from_rfc3339(created).ok()?.timestamp();
    let event = Event::new(actor, event_type, repo, timestamp).ok()?;
    let body = if event_type == EventType::CommitComment {
        v.pointer("/payload/comment/body")
            .and_then(Value::as_str)
            .map(str::to_string)
    } else {
        None
    };
    Some((event, body))
}

/// Parses an archive stream. Malformed lines and unknown event types are
/// skipped and counted; only I/O failures are errors. Blank lines are ignored.
pub fn parse_archive<R: BufRead>(reader: R) -> Result<ParsedArchive, IngestError> {
    let mut out = ParsedArchive::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.report.lines_read += 1;
        match parse_line(&line) {
            Some((event, body)) => {
                if let Some(body) = body {
                    out.comments.push(CommentRecord {
                        repo: event.repo.clone(),
                        timestamp: event.timestamp,
                        body,
                    });
                }
                out.events.push(event);
                out.report.events_kept += 1;
            }
            None => out.report.lines_skipped += 1,
        }
    }
    Ok(out)
}

/// Opens an archive file, decompressing `.gz` files transparently.
pub fn open_archive(path: &Path) -> Result<Box<dyn BufRead + Send>, IngestError> {
    let file = File::open(path)?;
    let reader: Box<dyn Read + Send> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

/// Parses several archive files concurrently and concatenates them in the
/// order given.
pub fn parse_archive_files<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<ParsedArchive, IngestError> {
    let parts = crate::par::try_map(paths, |p| parse_archive(open_archive(p.as_ref())?))?;
    let mut out = ParsedArchive::default();
    for part in parts {
        out.extend(part);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Cursor, Write};

    #[test]
    fn parses_a_push_line() {
        let line = r#"{"actor":"u1","type":"PushEvent","repo":"r1","created_at":"2018-01-01T00:00:00Z"}"#;
        let out = parse_archive(Cursor::new(line)).unwrap();
        assert_eq!(
            out.events,
            vec![Event::new("u1", EventType::Push, "r1", 1_514_764_800).unwrap()]
        );
        assert_eq!(
            out.report,
            ParseReport {
                lines_read: 1,
                events_kept: 1,
                lines_skipped: 0
            }
        );
    }

    #[test]
    fn unknown_type_and_garbage_are_skipped() {
        let text = concat!(
            r#"{"actor":"u1","type":"StarEvent","repo":"r1","created_at":"2018-01-01T00:00:00Z"}"#,
            "\n",
            "not json\n",
            r#"{"actor":"","type":"PushEvent","repo":"r1","created_at":"2018-01-01T00:00:00Z"}"#,
            "\n",
            r#"{"actor":"u1","type":"PushEvent","repo":"r1","created_at":"yesterday"}"#,
            "\n",
            r#"{"actor":{"login":"u2"},"type":"ForkEvent","repo":{"name":"o/r"},"created_at":"2018-01-01T08:00:00+08:00"}"#,
            "\n"
        );
        let out = parse_archive(Cursor::new(text)).unwrap();
        assert_eq!(out.report.lines_read, 5);
        assert_eq!(out.report.lines_skipped, 4);
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.events[0].repo, "o/r");
        assert_eq!(out.events[0].timestamp, 1_514_764_800);
    }

    #[test]
    fn empty_stream() {
        let out = parse_archive(Cursor::new("")).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.report, ParseReport::default());
    }

    #[test]
    fn commit_comment_bodies_are_kept() {
        let line = r#"{"actor":"u1","type":"CommitCommentEvent","repo":"r1","created_at":"2018-01-01T00:00:00Z","payload":{"comment":{"body":"fix build"}}}"#;
        let out = parse_archive(Cursor::new(line)).unwrap();
        assert_eq!(out.comments.len(), 1);
        assert_eq!(out.comments[0].body, "fix build");
    }

    #[test]
    fn gzip_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json.gz");
        let mut enc = flate2::write::GzEncoder::new(
            std::fs::File::create(&path).unwrap(),
            flate2::Compression::default(),
        );
        writeln!(
            enc,
            r#"{{"actor":"u1","type":"WatchEvent","repo":"r1","created_at":"2019-05-01T12:00:00Z"}}"#
        )
        .unwrap();
        enc.finish().unwrap();
        let plain = dir.path().join("b.json");
        std::fs::write(
            &plain,
            r#"{"actor":"u2","type":"PushEvent","repo":"r1","created_at":"2019-05-01T12:00:00Z"}"#,
        )
        .unwrap();
        let out = parse_archive_files(&[path, plain]).unwrap();
        assert_eq!(out.events.len(), 2);
        assert_eq!(out.events[0].event_type, EventType::Watch);
        assert_eq!(out.events[1].actor, "u2");
    }
}
