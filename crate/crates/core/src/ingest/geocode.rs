//! Location strings to countries: a pluggable [`Geocoder`], an offline
//! gazetteer, a Nominatim-compatible HTTP client and a file-backed cache.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::IngestError;
use crate::event::CountryLabel;

#[derive(Debug, Error)]
pub enum GeocodeError {
    #[error("geocoder transport failure: {0}")]
    Transport(String),
    #[error("malformed geocoder response: {0}")]
    Response(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub actor: String,
    pub location: String,
    pub company: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResult {
    pub latitude: f64,
    pub longitude: f64,
    pub country: CountryLabel,
}

impl GeocodeResult {
    pub fn new(latitude: f64, longitude: f64, country: CountryLabel) -> Option<Self> {
        if (-90.0..=90.0).contains(&latitude) && (-180.0..=180.0).contains(&longitude) {
            Some(GeocodeResult {
                latitude,
                longitude,
                country,
            })
        } else {
            None
        }
    }
}

/// Resolves a normalized location string. `Ok(None)` means "no match".
pub trait Geocoder: Send + Sync {
    fn geocode(&self, location: &str) -> Result<Option<GeocodeResult>, GeocodeError>;
}

/// Trim, collapse internal whitespace, lowercase.
pub fn normalize_location(location: &str) -> String {
    location
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Offline geocoder backed by a TSV of `normalized-location TAB country-code`,
/// with optional `TAB lat TAB lon` columns.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<String, GeocodeResult>,
}

impl Gazetteer {
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut entries = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || IngestError::Format(format!("gazetteer line {}: `{line}`", lineno + 1));
            if cols.len() < 2 {
                return Err(bad());
            }
            let country = CountryLabel::parse_loose(cols[1]).map_err(|_| bad())?;
            let (lat, lon) = match (cols.get(2), cols.get(3)) {
                (Some(a), Some(b)) => (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                ),
                _ => (0.0, 0.0),
            };
            let result = GeocodeResult::new(lat, lon, country).ok_or_else(bad)?;
            entries.insert(normalize_location(cols[0]), result);
        }
        Ok(Gazetteer { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        Self::from_tsv(BufReader::new(fs::File::open(path)?))
    }

    pub fn insert(&mut self, location: &str, result: GeocodeResult) {
        self.entries.insert(normalize_location(location), result);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Geocoder for Gazetteer {
    fn geocode(&self, location: &str) -> Result<Option<GeocodeResult>, GeocodeError> {
        Ok(self.entries.get(location).cloned())
    }
}

/// HTTP client for a Nominatim-compatible `/search` endpoint. Requests are
/// spaced at least `min_interval` apart (public servers allow one per second).
pub struct NominatimGeocoder {
    base_url: String,
    agent: ureq::Agent,
    pub min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl NominatimGeocoder {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("repoprint/", env!("CARGO_PKG_VERSION")))
            .build();
        NominatimGeocoder {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
            min_interval: Duration::from_secs(1),
            last: Mutex::new(None),
        }
    }

    pub fn search_url(&self, location: &str) -> String {
        let q: String = url::form_urlencoded::byte_serialize(location.as_bytes()).collect();
        format!("{}/search?q={q}&format=json&addressdetails=1&limit=1", self.base_url)
    }
}

/// Reads the first hit of a Nominatim JSON array.
pub fn parse_nominatim_response(body: &str) -> Result<Option<GeocodeResult>, GeocodeError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GeocodeError::Response(e.to_string()))?;
    let arr = v
        .as_array()
        .ok_or_else(|| GeocodeError::Response("expected a JSON array".into()))?;
    let Some(first) = arr.first() else {
        return Ok(None);
    };
    let coord = |key: &str| -> Result<f64, GeocodeError> {
        match first.get(key) {
            Some(Value::String(s)) => s
                .parse()
                .map_err(|_| GeocodeError::Response(format!("bad `{key}`"))),
            Some(Value::Number(n)) => n
                .as_f64()
                .ok_or_else(|| GeocodeError::Response(format!("bad `{key}`"))),
            _ => Err(GeocodeError::Response(format!("missing `{key}`"))),
        }
    };
    let (lat, lon) = (coord("lat")?, coord("lon")?);
    let code = first
        .pointer("/address/country_code")
        .and_then(Value::as_str)
        .ok_or_else(|| GeocodeError::Response("missing address.country_code".into()))?;
    let country =
        CountryLabel::parse_loose(code).map_err(|e| GeocodeError::Response(e.to_string()))?;
    GeocodeResult::new(lat, lon, country)
        .map(Some)
        .ok_or_else(|| GeocodeError::Response("coordinates out of range".into()))
}

impl Geocoder for NominatimGeocoder {
    fn geocode(&self, location: &str) -> Result<Option<GeocodeResult>, GeocodeError> {
        {
            let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
            if let Some(t) = *last {
                let wait = self.min_interval.saturating_sub(t.elapsed());
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            *last = Some(Instant::now());
        }
        let resp = self
            .agent
            .get(&self.search_url(location))
            .call()
            .map_err(|e| GeocodeError::Transport(e.to_string()))?;
        let body = resp
            .into_string()
            .map_err(|e| GeocodeError::Transport(e.to_string()))?;
        parse_nominatim_response(&body)
    }
}

/// Normalized location → resolved country (or a remembered miss).
#[derive(Debug, Default)]
pub struct GeocodeCache {
    entries: RwLock<HashMap<String, Option<CountryLabel>>>,
}

impl GeocodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `normalized_location TAB country_code_or_dash` lines.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let cache = GeocodeCache::new();
        if !path.exists() {
            return Ok(cache);
        }
        let reader = BufReader::new(fs::File::open(path)?);
        {
            let mut map = cache.entries.write().expect("cache lock poisoned");
            for line in reader.lines() {
                let line = line?;
                let Some((loc, code)) = line.split_once('\t') else {
                    continue;
                };
                let value = match code.trim() {
                    "-" => None,
                    c => Some(
                        CountryLabel::parse_loose(c)
                            .map_err(|e| IngestError::Format(format!("cache: {e}")))?,
                    ),
                };
                map.insert(loc.to_string(), value);
            }
        }
        Ok(cache)
    }

    /// Writes entries sorted by key so the file is reproducible.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let map = self.entries.read().expect("cache lock poisoned");
        let sorted: BTreeMap<_, _> = map.iter().collect();
        let mut out = Vec::new();
        for (loc, code) in sorted {
            let code = code.as_ref().map(CountryLabel::code).unwrap_or("-");
            writeln!(out, "{loc}\t{code}")?;
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn get(&self, location: &str) -> Option<Option<CountryLabel>> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .get(location)
            .cloned()
    }

    pub fn insert(&self, location: String, country: Option<CountryLabel>) {
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(location, country);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolveReport {
    pub lookups: u64,
    pub cache_hits: u64,
    pub external_queries: u64,
    pub geocoder_failures: u64,
    pub unresolved: u64,
}

/// Cache-first country resolution. External queries are serialized.
pub struct CountryResolver<G: Geocoder> {
    geocoder: G,
    cache: GeocodeCache,
    query_lock: Mutex<()>,
    lookups: AtomicU64,
    cache_hits: AtomicU64,
    queries: AtomicU64,
    failures: AtomicU64,
    unresolved: AtomicU64,
}

impl<G: Geocoder> CountryResolver<G> {
    pub fn new(geocoder: G, cache: GeocodeCache) -> Self {
        CountryResolver {
            geocoder,
            cache,
            query_lock: Mutex::new(()),
            lookups: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            queries: AtomicU64::new(0),
            failures: AtomicU64::new(0),
            unresolved: AtomicU64::new(0),
        }
    }

    pub fn cache(&self) -> &GeocodeCache {
        &self.cache
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn report(&self) -> ResolveReport {
        ResolveReport {
            lookups: self.lookups.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            external_queries: self.queries.load(Ordering::Relaxed),
            geocoder_failures: self.failures.load(Ordering::Relaxed),
            unresolved: self.unresolved.load(Ordering::Relaxed),
        }
    }

    /// Returns `None` for empty, unresolvable or failed lookups. Failures are
    /// counted and not cached, so a later run can retry them.
    pub fn resolve(&self, location: &str) -> Option<CountryLabel> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let key = normalize_location(location);
        if key.is_empty() {
            self.unresolved.fetch_add(1, Ordering::Relaxed);
            return None;
        }
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            if hit.is_none() {
                self.unresolved.fetch_add(1, Ordering::Relaxed);
            }
            return hit;
        }
        let _guard = self.query_lock.lock().expect("query lock poisoned");
        // Another thread may have filled the entry while we waited.
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            if hit.is_none() {
                self.unresolved.fetch_add(1, Ordering::Relaxed);
            }
            return hit;
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        match self.geocoder.geocode(&key) {
            Ok(found) => {
                let country = found.map(|r| r.country);
                self.cache.insert(key, country.clone());
                if country.is_none() {
                    self.unresolved.fetch_add(1, Ordering::Relaxed);
                }
                country
            }
            Err(e) => {
                log::warn!("geocoding `{key}` failed: {e}");
                self.failures.fetch_add(1, Ordering::Relaxed);
                self.unresolved.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }
}

/// Reads `actor TAB location TAB company` lines (company optional).
pub fn read_user_profiles<R: BufRead>(reader: R) -> Result<Vec<UserProfile>, IngestError> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let actor = cols.next().unwrap_or_default().trim();
        if actor.is_empty() {
            return Err(IngestError::Format(format!(
                "user profile line {}: empty actor",
                lineno + 1
            )));
        }
        out.push(UserProfile {
            actor: actor.to_string(),
            location: cols.next().unwrap_or_default().to_string(),
            company: cols.next().unwrap_or_default().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    struct Failing;
    impl Geocoder for Failing {
        fn geocode(&self, _: &str) -> Result<Option<GeocodeResult>, GeocodeError> {
            Err(GeocodeError::Transport("offline".into()))
        }
    }

    fn fixture() -> Gazetteer {
        Gazetteer::from_tsv(Cursor::new("beijing, china\tCN\t39.9\t116.4\nseattle, wa\tus\n")).unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_location("  Beijing,   CHINA \t"), "beijing, china");
        assert_eq!(normalize_location("   "), "");
    }

    #[test]
    fn resolve_examples() {
        let r = CountryResolver::new(fixture(), GeocodeCache::new());
        assert_eq!(r.resolve(""), None);
        assert_eq!(r.resolve("Beijing, China").unwrap().code(), "CN");
        assert_eq!(r.resolve("asdfqwerty-nowhere"), None);
        assert_eq!(r.resolve("Seattle,  WA").unwrap().code(), "US");
    }

    #[test]
    fn cache_avoids_repeat_queries() {
        let r = CountryResolver::new(fixture(), GeocodeCache::new());
        r.resolve("Beijing, China");
        assert_eq!(r.query_count(), 1);
        r.resolve("  beijing,  china");
        assert_eq!(r.query_count(), 1);
        r.resolve("nowhere");
        r.resolve("NOWHERE");
        assert_eq!(r.query_count(), 2);
        assert_eq!(r.report().cache_hits, 2);
    }

    #[test]
    fn failures_degrade_to_none() {
        let r = CountryResolver::new(Failing, GeocodeCache::new());
        assert_eq!(r.resolve("Paris"), None);
        assert_eq!(r.report().geocoder_failures, 1);
        assert!(r.cache().is_empty());
    }

    #[test]
    fn cache_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let r = CountryResolver::new(fixture(), GeocodeCache::load(&path).unwrap());
        r.resolve("Beijing, China");
        r.resolve("mars");
        r.cache().save(&path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "beijing, china\tCN\nmars\t-\n"
        );
        let r2 = CountryResolver::new(Failing, GeocodeCache::load(&path).unwrap());
        assert_eq!(r2.resolve("BEIJING, china").unwrap().code(), "CN");
        assert_eq!(r2.resolve("mars"), None);
        assert_eq!(r2.query_count(), 0);
    }

    #[test]
    fn nominatim_parsing_and_url() {
        let body = r#"[{"lat":"39.9","lon":"116.4","address":{"country_code":"cn"}}]"#;
        let hit = parse_nominatim_response(body).unwrap().unwrap();
        assert_eq!(hit.country.code(), "CN");
        assert!(parse_nominatim_response("[]").unwrap().is_none());
        assert!(parse_nominatim_response("{}").is_err());
        let g = NominatimGeocoder::new("http://localhost:8080/");
        assert_eq!(
            g.search_url("beijing, china"),
            "http://localhost:8080/search?q=beijing%2C+china&format=json&addressdetails=1&limit=1"
        );
    }

    #[test]
    fn user_profiles() {
        let users = read_user_profiles(Cursor::new("u1\tBeijing\tAcme\nu2\t\n")).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[0].company, "Acme");
        assert_eq!(users[1].location, "");
    }
}
