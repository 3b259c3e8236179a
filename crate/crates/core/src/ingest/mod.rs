//! Archive parsing, repository curation and contributor geolocation.

mod archive;
mod curate;
mod geocode;

use thiserror::Error;

pub use archive::{
    open_archive, parse_archive, parse_archive_files, CommentRecord, ParseReport, ParsedArchive,
};
pub use curate::{
    assign_repo_country, curate, curate_archive, curate_with_report, CurationConfig,
    CurationReport,
};
pub use geocode::{
    normalize_location, parse_nominatim_response, read_user_profiles, CountryResolver, Gazetteer,
    GeocodeCache, GeocodeError, GeocodeResult, Geocoder, NominatimGeocoder, ResolveReport,
    UserProfile,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("repository `{0}` has no contributors")]
    EmptyContributorSet(String),
    #[error("invalid curation config: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
}

use std::collections::HashMap;

use crate::event::{CountryLabel, RepoRecord};

/// Resolves every user's location and assigns each repository its majority
/// country. Repositories without contributors are left unlabeled.
pub fn label_repositories<G: Geocoder>(
    repos: &mut [RepoRecord],
    users: &[UserProfile],
    resolver: &CountryResolver<G>,
    cfg: &CurationConfig,
) -> HashMap<String, Option<CountryLabel>> {
    let resolved: Vec<Option<CountryLabel>> = crate::par::map(users, |u| resolver.resolve(&u.location));
    let user_countries: HashMap<String, Option<CountryLabel>> = users
        .iter()
        .map(|u| u.actor.clone())
        .zip(resolved)
        .collect();
    for rec in repos.iter_mut() {
        rec.country = assign_repo_country(rec, &user_countries, cfg).unwrap_or(None);
    }
    user_countries
}
