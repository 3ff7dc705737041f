//! Homepage fetching.
//!
//! [`Crawler`] performs live fetches with timing capture and a per-host
//! politeness interval. [`ReplayCorpus`] reconstructs stored fetches so every
//! downstream stage can run offline and deterministically.

mod corpus;
mod fetch;
mod log;
mod robots;
mod throttle;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use corpus::{write_entry, CorpusError, ReplayCorpus, BODY_FILE, RESPONSE_FILE};
pub use fetch::{fetch_homepage, CrawlJob, Crawler, CrawlerError};
pub use log::{header_digest, CrawlLogEntry};
pub use robots::RobotsRules;
pub use throttle::HostThrottle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlPolicy {
    pub timeout_seconds: f64,
    pub per_host_min_interval_seconds: f64,
    pub max_redirects: u32,
    pub user_agent: String,
    pub respect_robots: bool,
    /// Number of fetches in flight across distinct hosts.
    pub concurrency: usize,
}

impl Default for CrawlPolicy {
    fn default() -> Self {
        CrawlPolicy {
            timeout_seconds: 30.0,
            per_host_min_interval_seconds: 1.0,
            max_redirects: 10,
            user_agent: concat!("codai-crawler/", env!("CARGO_PKG_VERSION")).to_string(),
            respect_robots: true,
            concurrency: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Http,
    Https,
}

impl Scheme {
    /// Scheme of an absolute URL string; anything not `https` counts as `http`.
    pub fn of(url: &str) -> Scheme {
        if url.len() >= 8 && url[..8].eq_ignore_ascii_case("https://") {
            Scheme::Https
        } else {
            Scheme::Http
        }
    }
}

/// How a fetch ended. Exactly one of a status code or a failure marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FetchOutcome {
    Status(u16),
    /// Any network-level failure: timeout, DNS, refused connection, broken
    /// transfer. The note says which.
    Timeout(String),
    RobotsExcluded,
}

impl FetchOutcome {
    pub fn status(&self) -> Option<u16> {
        match self {
            FetchOutcome::Status(s) => Some(*s),
            _ => None,
        }
    }
}

impl fmt::Display for FetchOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchOutcome::Status(s) => write!(f, "{s}"),
            FetchOutcome::Timeout(_) => f.write_str("timeout"),
            FetchOutcome::RobotsExcluded => f.write_str("robots-excluded"),
        }
    }
}

/// Response headers in arrival order. Lookups ignore ASCII case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderList(Vec<(String, String)>);

impl HeaderList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.push((name.into(), value.into()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a, 'n>(&'a self, name: &'n str) -> impl Iterator<Item = &'a str> + use<'a, 'n> {
        self.0.iter().filter(move |(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<N: Into<String>, V: Into<String>> FromIterator<(N, V)> for HeaderList {
    fn from_iter<I: IntoIterator<Item = (N, V)>>(iter: I) -> Self {
        HeaderList(iter.into_iter().map(|(n, v)| (n.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlResult {
    pub firm_id: String,
    pub requested_url: String,
    pub final_url: String,
    pub outcome: FetchOutcome,
    pub scheme: Scheme,
    pub ttfb_seconds: f64,
    pub total_seconds: f64,
    pub response_headers: HeaderList,
    pub body: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
    pub redirect_count: u32,
}

impl CrawlResult {
    /// A result carrying no response: network failure or robots exclusion.
    pub fn without_response(
        firm_id: &str,
        requested_url: &str,
        final_url: &str,
        outcome: FetchOutcome,
        elapsed_seconds: f64,
        fetched_at: DateTime<Utc>,
        redirect_count: u32,
    ) -> Self {
        debug_assert!(!matches!(outcome, FetchOutcome::Status(_)));
        CrawlResult {
            firm_id: firm_id.to_string(),
            requested_url: requested_url.to_string(),
            final_url: final_url.to_string(),
            outcome,
            scheme: Scheme::of(final_url),
            ttfb_seconds: elapsed_seconds,
            total_seconds: elapsed_seconds,
            response_headers: HeaderList::new(),
            body: Vec::new(),
            fetched_at,
            redirect_count,
        }
    }

    pub fn http_status(&self) -> Option<u16> {
        self.outcome.status()
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self.outcome, FetchOutcome::Timeout(_))
    }

    pub fn is_robots_excluded(&self) -> bool {
        matches!(self.outcome, FetchOutcome::RobotsExcluded)
    }
}

/// A fetch counts as valid content when it answered 200 with a nonempty body.
pub fn is_valid(result: &CrawlResult) -> bool {
    result.http_status() == Some(200) && !result.body.is_empty()
}
