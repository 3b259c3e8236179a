//! Repository feature extraction: profile scalars, LDA topic affinities,
//! activity fingerprints and sequence embeddings, assembled into a named
//! feature matrix.

mod lda;
mod profile;
mod text;

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lda::{fit_lda, infer_topics, LdaConfig, LdaFit, LdaModel};
pub use profile::{
    activity_fingerprint, leader_count, mean_commit_comment_length, median_interarrival_days,
    watcher_contributor_jaccard, ActivityFingerprint, ProfileFeatures,
};
pub use text::{
    normalize_whitespace, tokenize, CommandTranslator, IdentityTranslator, TextTranslator,
    STOPWORDS,
};

use crate::event::{EventType, RepoRecord};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 2 events, got {0}")]
    TooFewEvents(usize),
    #[error("watcher and contributor sets are both empty")]
    BothSetsEmpty,
    #[error("repository `{0}` has only Watch events")]
    OnlyWatchEvents(String),
    #[error("no tokens in the description corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence embedding failed: {0}")]
    Embedding(String),
    #[error("malformed feature data: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Names of the scalar profile features, in column order.
pub const PROFILE_SCALARS: [&str; 7] = [
    "stars",
    "forks",
    "open_issues",
    "comment_len",
    "iat_days",
    "leaders",
    "jaccard",
];

/// The three feature families used by group ablations. Topic affinities
/// belong to the profile family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    Profile,
    Activity,
    Sequence,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [
        FeatureGroup::Profile,
        FeatureGroup::Activity,
        FeatureGroup::Sequence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Profile => "Profile",
            FeatureGroup::Activity => "Activity",
            FeatureGroup::Sequence => "Sequence",
        }
    }
}

pub fn fingerprint_name(t: EventType) -> String {
    format!("fp_{}", t.name())
}

/// Ordered, unique feature names with their family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    groups: Vec<FeatureGroup>,
}

impl FeatureSchema {
    /// 7 profile scalars, `topics` affinities, 13 fingerprint entries and
    /// `latent_dim` embedding entries.
    pub fn new(topics: usize, latent_dim: usize) -> Self {
        let mut names: Vec<String> = PROFILE_SCALARS.iter().map(|s| s.to_string()).collect();
        names.extend((1..=topics).map(|i| format!("topic_{i}")));
        names.extend(EventType::development().map(fingerprint_name));
        names.extend((0..latent_dim).map(|i| format!("seq_{i}")));
        Self::from_names(names).expect("generated names are valid")
    }

    /// Rebuilds a schema from column names, classifying each by prefix.
    pub fn from_names(names: Vec<String>) -> Result<Self, FeatureError> {
        let mut seen = std::collections::HashSet::new();
        let mut groups = Vec::with_capacity(names.len());
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(FeatureError::Format(format!("duplicate feature `{n}`")));
            }
            let g = if n.starts_with("fp_") {
                FeatureGroup::Activity
            } else if n.starts_with("seq_") {
                FeatureGroup::Sequence
            } else {
                FeatureGroup::Profile
            };
            groups.push(g);
        }
        Ok(FeatureSchema { names, groups })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn group_of(&self, idx: usize) -> FeatureGroup {
        self.groups[idx]
    }

    pub fn columns_in(&self, group: FeatureGroup) -> Vec<usize> {
        (0..self.len()).filter(|i| self.groups[*i] == group).collect()
    }

    pub fn latent_dim(&self) -> usize {
        self.columns_in(FeatureGroup::Sequence).len()
    }
}

/// Produces a fixed-size embedding for an event-type sequence.
pub trait SequenceEmbedder: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn embed_sequence(&self, seq: &[EventType]) -> Result<Vec<f64>, FeatureError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Everything needed to turn a curated record into a feature vector.
pub struct FeatureExtractor<'a> {
    pub lda: &'a LdaModel,
    pub embedder: Option<&'a dyn SequenceEmbedder>,
    pub translator: &'a dyn TextTranslator,
    /// Width of the embedding block; zero-filled when `embedder` is absent.
    pub latent_dim: usize,
}

impl FeatureExtractor<'_> {
    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(self.lda.k, self.latent_dim)
    }

    pub fn profile(&self, record: &RepoRecord) -> Result<ProfileFeatures, FeatureError> {
        Ok(ProfileFeatures {
            stars: record.stars,
            forks: record.forks,
            open_issues: record.open_issues,
            comment_len: mean_commit_comment_length(record, self.translator),
            iat_days: median_interarrival_days(&record.events)?,
            leaders: leader_count(&record.events),
            jaccard: watcher_contributor_jaccard(record)?,
            topic: infer_topics(self.lda, &tokenize(&record.description)),
        })
    }

    pub fn assemble(&self, record: &RepoRecord) -> Result<FeatureVector, FeatureError> {
        let p = self.profile(record)?;
        let fp = activity_fingerprint(record)?;
        let mut values = vec![
            p.stars as f64,
            p.forks as f64,
            p.open_issues as f64,
            p.comment_len,
            p.iat_days,
            p.leaders as f64,
            p.jaccard,
        ];
        values.extend(&p.topic);
        values.extend(fp.freqs);
        match self.embedder {
            Some(e) => {
                if e.latent_dim() != self.latent_dim {
                    return Err(FeatureError::InvalidConfig(format!(
                        "embedder produces {} dims, schema expects {}",
                        e.latent_dim(),
                        self.latent_dim
                    )));
                }
                values.extend(e.embed_sequence(&record.event_types())?);
            }
            None => values.extend(std::iter::repeat(0.0).take(self.latent_dim)),
        }
        Ok(FeatureVector { values })
    }

    /// Extracts every record in parallel; rows keep input order.
    pub fn extract(&self, records: &[RepoRecord]) -> Result<FeatureTable, FeatureError> {
        let rows = crate::par::try_map(records, |r| {
            self.assemble(r).map(|v| FeatureRow {
                repo_id: r.repo_id.clone(),
                label: r.country.as_ref().map(|c| c.code().to_string()),
                activity_count: Some(r.activity_count() as u64),
                values: v.values,
            })
        })?;
        Ok(FeatureTable {
            schema: self.schema(),
            label_column: "country".into(),
            rows,
        })
    }
}

/// Tokenized descriptions of a corpus, ready for [`fit_lda`].
pub fn description_corpus(records: &[RepoRecord]) -> Vec<Vec<String>> {
    records.iter().map(|r| tokenize(&r.description)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub repo_id: String,
    pub label: Option<String>,
    pub activity_count: Option<u64>,
    pub values: Vec<f64>,
}

/// A feature matrix with its schema. On disk this is a CSV with
/// `repo_id`, a label column, an optional `activity_count`, then one column
/// per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub label_column: String,
    pub rows: Vec<FeatureRow>,
}

const LABEL_COLUMNS: [&str; 3] = ["country", "company", "label"];

impl FeatureTable {
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let with_counts = self.rows.iter().all(|r| r.activity_count.is_some());
        let mut header = vec!["repo_id".to_string(), self.label_column.clone()];
        if with_counts {
            header.push("activity_count".into());
        }
        header.extend(self.schema.names().iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.repo_id.clone(), r.label.clone().unwrap_or_default()];
            if let (true, Some(c)) = (with_counts, r.activity_count) {
                rec.push(c.to_string());
            }
            rec.extend(r.values.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("repo_id") {
            return Err(FeatureError::Format("first column must be `repo_id`".into()));
        }
        let label_idx = header.iter().position(|h| LABEL_COLUMNS.contains(&h.as_str()));
        let count_idx = header.iter().position(|h| h == "activity_count");
        let feature_idx: Vec<usize> = (1..header.len())
            .filter(|i| Some(*i) != label_idx && Some(*i) != count_idx)
            .collect();
        let schema = FeatureSchema::from_names(feature_idx.iter().map(|i| header[*i].clone()).collect())?;
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| FeatureError::Format(format!("row {}: bad {what}", line + 2));
            let values = feature_idx
                .iter()
                .map(|i| rec[*i].trim().parse::<f64>().map_err(|_| bad(&header[*i])))
                .collect::<Result<Vec<_>, _>>()?;
            let activity_count = match count_idx {
                Some(i) => Some(rec[i].trim().parse().map_err(|_| bad("activity_count"))?),
                None => None,
            };
            rows.push(FeatureRow {
                repo_id: rec[0].to_string(),
                label: label_idx.map(|i| rec[i].to_string()).filter(|s| !s.is_empty()),
                activity_count,
                values,
            });
        }
        Ok(FeatureTable {
            schema,
            label_column: label_idx
                .map(|i| header[i].clone())
                .unwrap_or_else(|| "country".into()),
            rows,
        })
    }

    /// Replaces row labels from a `repo_id → label` map; rows absent from the
    /// map lose their label.
    pub fn relabel(&mut self, labels: &HashMap<String, String>) {
        for r in &mut self.rows {
            r.label = labels.get(&r.repo_id).cloned();
        }
    }
}

/// One row of the metadata sidecar CSV `repo_id,stars,forks,open_issues,description`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMetadata {
    pub repo_id: String,
    pub stars: u64,
    pub forks: u64,
    pub open_issues: u64,
    pub description: String,
}

pub fn read_metadata<R: Read>(input: R) -> Result<Vec<RepoMetadata>, FeatureError> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize()
        .map(|r| r.map_err(FeatureError::from))
        .collect()
}

pub fn write_metadata<W: Write>(rows: &[RepoMetadata], out: W) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Overwrites stars, forks, open issues and description from the sidecar.
/// Returns the number of records that had no sidecar row.
pub fn apply_metadata(records: &mut [RepoRecord], meta: &[RepoMetadata]) -> usize {
    let by_id: HashMap<&str, &RepoMetadata> = meta.iter().map(|m| (m.repo_id.as_str(), m)).collect();
    let mut missing = 0;
    for r in records {
        match by_id.get(r.repo_id.as_str()) {
            Some(m) => {
                r.stars = m.stars;
                r.forks = m.forks;
                r.open_issues = m.open_issues;
                r.description = m.description.clone();
            }
            None => missing += 1,
        }
    }
    missing
}

/// Reads a `repo_id,<label>` CSV (header required).
pub fn read_labels<R: Read>(input: R) -> Result<HashMap<String, String>, FeatureError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = HashMap::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(FeatureError::Format("labels need two columns".into()));
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    struct Fixed(Vec<f64>);
    impl SequenceEmbedder for Fixed {
        fn latent_dim(&self) -> usize {
            self.0.len()
        }
        fn embed_sequence(&self, _: &[EventType]) -> Result<Vec<f64>, FeatureError> {
            Ok(self.0.clone())
        }
    }

    fn record(types: &[EventType]) -> RepoRecord {
        let evs = types
            .iter()
            .enumerate()
            .map(|(i, t)| Event::new(format!("u{}", i % 4), *t, "r", i as i64 * 3600).unwrap())
            .collect();
        let mut r = RepoRecord::from_events("r", evs);
        r.description = "neural network toolkit".into();
        r.commit_comments = vec!["fix".into(), "add docs".into()];
        r
    }

    fn lda() -> LdaModel {
        fit_lda(
            &[tokenize("neural network toolkit"), tokenize("web server framework")],
            &LdaConfig { iters: 20, ..Default::default() },
        )
        .unwrap()
        .model
    }

    fn types() -> Vec<EventType> {
        use EventType::*;
        vec![Create, Push, Push, Watch, Fork, IssueComment, Issues, PullRequest, Push, Watch]
    }

    #[test]
    fn schema_layout() {
        let s = FeatureSchema::new(2, 8);
        assert_eq!(s.len(), 7 + 2 + 13 + 8);
        assert_eq!(s.columns_in(FeatureGroup::Profile).len(), 9);
        assert_eq!(s.columns_in(FeatureGroup::Activity).len(), 13);
        assert_eq!(s.latent_dim(), 8);
        assert_eq!(s.index_of("fp_Push"), Some(11));
        assert!(FeatureSchema::from_names(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn missing_embedder_zero_fills() {
        let lda = lda();
        let ex = FeatureExtractor {
            lda: &lda,
            embedder: None,
            translator: &IdentityTranslator,
            latent_dim: 8,
        };
        let v = ex.assemble(&record(&types())).unwrap();
        assert_eq!(v.values.len(), ex.schema().len());
        assert!(v.values[v.values.len() - 8..].iter().all(|x| *x == 0.0));
        let s = ex.schema();
        assert_eq!(v.values[s.index_of("comment_len").unwrap()], 5.5);
        assert_eq!(v.values[s.index_of("fp_Push").unwrap()], 3.0 / 8.0);
    }

    #[test]
    fn embedder_block_is_appended() {
        let lda = lda();
        let emb = Fixed(vec![1.0, -2.0]);
        let ex = FeatureExtractor {
            lda: &lda,
            embedder: Some(&emb),
            translator: &IdentityTranslator,
            latent_dim: 2,
        };
        let v = ex.assemble(&record(&types())).unwrap();
        assert_eq!(&v.values[v.values.len() - 2..], &[1.0, -2.0]);
        let bad = FeatureExtractor { latent_dim: 3, ..ex };
        assert!(matches!(bad.assemble(&record(&types())), Err(FeatureError::InvalidConfig(_))));
    }

    #[test]
    fn event_order_does_not_change_count_features() {
        let lda = lda();
        let ex = FeatureExtractor {
            lda: &lda,
            embedder: None,
            translator: &IdentityTranslator,
            latent_dim: 4,
        };
        let a = record(&types());
        let mut b = a.clone();
        b.events.reverse();
        let (va, vb) = (ex.assemble(&a).unwrap(), ex.assemble(&b).unwrap());
        assert_eq!(va, vb);
        let c = a.clone();
        assert_eq!(ex.assemble(&c).unwrap(), va);
    }

    #[test]
    fn feature_csv_round_trip() {
        let lda = lda();
        let ex = FeatureExtractor {
            lda: &lda,
            embedder: None,
            translator: &IdentityTranslator,
            latent_dim: 2,
        };
        let mut r = record(&types());
        r.country = Some(crate::event::CountryLabel::new("US").unwrap());
        let table = ex.extract(&[r]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("repo_id,country,activity_count,stars,forks,"));
        let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn metadata_sidecar() {
        let csv_text = "repo_id,stars,forks,open_issues,description\nr,10,2,3,\"deep learning, fast\"\n";
        let meta = read_metadata(csv_text.as_bytes()).unwrap();
        let mut recs = vec![record(&types()), RepoRecord::from_events("other", vec![])];
        assert_eq!(apply_metadata(&mut recs, &meta), 1);
        assert_eq!((recs[0].stars, recs[0].forks, recs[0].open_issues), (10, 2, 3));
        assert_eq!(recs[0].description, "deep learning, fast");
        let mut out = Vec::new();
        write_metadata(&meta, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv_text);
    }

    #[test]
    fn labels_file() {
        let m = read_labels("repo_id,country\na,US\nb,CN\n".as_bytes()).unwrap();
        assert_eq!(m["b"], "CN");
    }
}
