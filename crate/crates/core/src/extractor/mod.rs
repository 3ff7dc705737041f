//! The ten homepage features.
//!
//! | feature | source |
//! |---|---|
//! | `length_url` | registry URL without scheme and trailing `/` |
//! | `unique_links_in`, `unique_links_out` | anchors split by registrable domain |
//! | `best-practices` | ten static checks, see [`practices`] |
//! | `Facebook`, `Instagram`, `LinkedIn` | anchors to the platform domains |
//! | `years_old` | supplied by the caller (see `crate::wayback`) |
//! | `request_time` | total or time-to-first-byte seconds |
//! | `security_header_int` | penalty for absent protections, see [`security`] |

pub mod html;
pub mod links;
pub mod practices;
pub mod psl;
pub mod security;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::crawler::{is_valid, CrawlResult};
use crate::features::RawFeatures;

pub use html::{parse_page, EncodingError, Page};
pub use links::{detect_social, extract_links, LinkCounts, SocialFlags};
pub use practices::{audit as audit_best_practices, Check, PracticesAudit};
pub use psl::registrable_domain;
pub use security::score_security;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("firm {firm_id}: fetch is not valid content ({outcome})")]
    InvalidResult { firm_id: String, outcome: String },
    #[error("firm {firm_id}: {source}")]
    Encoding { firm_id: String, source: EncodingError },
    #[error("firm {firm_id}: unparsable final url {url:?}")]
    BadUrl { firm_id: String, url: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestTimeMode {
    #[default]
    Total,
    Ttfb,
}

/// Character count of `url` without its `http://`/`https://` prefix and
/// without one trailing `/`. A leading `www.` is kept.
pub fn url_length(url: &str) -> u32 {
    let trimmed = url.trim();
    let lower = trimmed.get(..8).unwrap_or(trimmed).to_ascii_lowercase();
    let rest = if lower.starts_with("https://") {
        &trimmed[8..]
    } else if lower.starts_with("http://") {
        &trimmed[7..]
    } else {
        trimmed
    };
    let rest = rest.strip_suffix('/').unwrap_or(rest);
    rest.chars().count() as u32
}

pub fn request_time(result: &CrawlResult, mode: RequestTimeMode) -> f64 {
    debug_assert!(is_valid(result), "request_time on an invalid fetch");
    match mode {
        RequestTimeMode::Total => result.total_seconds,
        RequestTimeMode::Ttfb => result.ttfb_seconds,
    }
}

/// Best-practices score for a parsed page of `result`.
pub fn score_best_practices(page: &Page, result: &CrawlResult) -> f64 {
    let header_charset = result
        .response_headers
        .get("content-type")
        .is_some_and(|ct| ct.to_ascii_lowercase().contains("charset="));
    practices::audit(page, header_charset, result.scheme).score()
}

/// Computes all ten features for one valid fetch.
pub fn extract_features(
    result: &CrawlResult,
    years_old: u32,
    mode: RequestTimeMode,
) -> Result<RawFeatures, ExtractError> {
    if !is_valid(result) {
        let outcome = if result.body.is_empty() && result.http_status() == Some(200) {
            "empty body".to_string()
        } else {
            result.outcome.to_string()
        };
        return Err(ExtractError::InvalidResult { firm_id: result.firm_id.clone(), outcome });
    }
    let page = parse_page(&result.body, &result.response_headers)
        .map_err(|source| ExtractError::Encoding { firm_id: result.firm_id.clone(), source })?;
    let base = Url::parse(&result.final_url)
        .map_err(|_| ExtractError::BadUrl { firm_id: result.firm_id.clone(), url: result.final_url.clone() })?;
    let links = extract_links(&page, &base);
    let social = detect_social(&page);
    Ok(RawFeatures {
        length_url: url_length(&result.requested_url),
        unique_links_in: links.unique_links_in,
        unique_links_out: links.unique_links_out,
        best_practices: score_best_practices(&page, result),
        facebook: social.facebook,
        instagram: social.instagram,
        linkedin: social.linkedin,
        years_old,
        request_time: request_time(result, mode),
        security_header_int: score_security(&result.response_headers, result.scheme),
    })
}
