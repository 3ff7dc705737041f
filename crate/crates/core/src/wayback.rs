//! Website age from the earliest archived snapshot.
//!
//! Live lookups use the Wayback Machine CDX index:
//!
//! ```text
//! GET https://web.archive.org/cdx/search/cdx?url=<host>&output=txt&fl=timestamp&limit=1
//! ```
//!
//! The response is plain text, one capture per line, oldest first; only the
//! first line is read and its leading 14-digit `YYYYMMDDhhmmss` timestamp
//! gives the year. An empty body means the host was never archived.
//!
//! Results are kept in an append-only cache file of `host,year` lines
//! (`host,` records a host known to have no capture). Later lines win.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use chrono::{Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::crawler::HostThrottle;

pub const DEFAULT_CDX_ENDPOINT: &str = "https://web.archive.org/cdx/search/cdx";
pub const DEFAULT_AGE_CAP: u32 = 25;

#[derive(Debug, Error)]
pub enum WaybackError {
    /// Network or server trouble; the lookup may succeed later.
    #[error("archive lookup for {host} failed (retryable): {reason}")]
    Retryable { host: String, reason: String },
    #[error("archive answered for {host} with an unusable timestamp {line:?}")]
    Malformed { host: String, line: String },
    #[error("url {0:?} has no host")]
    NoHost(String),
    #[error("snapshot cache {path}: {source}")]
    CacheIo { path: PathBuf, source: io::Error },
    #[error("snapshot cache {path} line {line}: {reason}")]
    CacheFormat { path: PathBuf, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotSource {
    Live,
    Cache,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotLookup {
    pub url: String,
    pub first_year: Option<i32>,
    pub source: SnapshotSource,
}

/// Source of earliest-capture timestamps.
pub trait ArchiveIndex: Send + Sync {
    /// Raw timestamp of the earliest capture of `host`, or `None` if never archived.
    fn earliest_timestamp(&self, host: &str) -> Result<Option<String>, WaybackError>;
}

/// Live CDX client, limited to one request per `min_interval` (default 1 s).
pub struct CdxClient {
    client: reqwest::blocking::Client,
    endpoint: String,
    throttle: HostThrottle,
}

impl CdxClient {
    pub fn new(endpoint: &str, min_interval: Duration, user_agent: &str) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent.to_string())
            .timeout(Duration::from_secs(60))
            .build()?;
        Ok(CdxClient { client, endpoint: endpoint.to_string(), throttle: HostThrottle::new(min_interval) })
    }

    pub fn public(user_agent: &str) -> Result<Self, reqwest::Error> {
        Self::new(DEFAULT_CDX_ENDPOINT, Duration::from_secs(1), user_agent)
    }
}

impl ArchiveIndex for CdxClient {
    fn earliest_timestamp(&self, host: &str) -> Result<Option<String>, WaybackError> {
        let retry = |reason: String| WaybackError::Retryable { host: host.to_string(), reason };
        self.throttle.wait("cdx");
        let mut url = Url::parse(&self.endpoint).map_err(|e| retry(e.to_string()))?;
        url.query_pairs_mut()
            .append_pair("url", host)
            .append_pair("output", "txt")
            .append_pair("fl", "timestamp")
            .append_pair("limit", "1");
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| retry(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(retry(format!("HTTP {}", resp.status())));
        }
        let text = resp.text().map_err(|e| retry(e.to_string()))?;
        Ok(text.lines().next().and_then(|l| l.split_whitespace().next()).map(str::to_string))
    }
}

/// Year of a CDX timestamp; must have at least four leading digits and not
/// lie in the future.
pub fn timestamp_year(host: &str, timestamp: &str) -> Result<i32, WaybackError> {
    let malformed = || WaybackError::Malformed { host: host.to_string(), line: timestamp.to_string() };
    if timestamp.len() < 4 || !timestamp.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let year: i32 = timestamp[..4].parse().map_err(|_| malformed())?;
    if year > Utc::now().year() {
        return Err(malformed());
    }
    Ok(year)
}

/// Host → first year (or known absence). Shared read-mostly; file appends are
/// serialised.
#[derive(Debug, Default)]
pub struct SnapshotCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Option<i32>>>,
    append: Mutex<()>,
}

impl SnapshotCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; new entries are appended to it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, WaybackError> {
        let path = path.into();
        let mut entries = HashMap::new();
        match fs::read_to_string(&path) {
            Ok(text) => {
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let (host, year) = parse_cache_line(line).map_err(|reason| WaybackError::CacheFormat {
                        path: path.clone(),
                        line: i + 1,
                        reason,
                    })?;
                    entries.insert(host, year);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => return Err(WaybackError::CacheIo { path, source }),
        }
        Ok(SnapshotCache { path: Some(path), entries: RwLock::new(entries), append: Mutex::new(()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// `None` when the host is not cached; `Some(None)` for a cached absence.
    pub fn get(&self, host: &str) -> Option<Option<i32>> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(host).copied()
    }

    pub fn insert(&self, host: &str, year: Option<i32>) -> Result<(), WaybackError> {
        let _guard = self.append.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(path) = &self.path {
            let io_err = |source| WaybackError::CacheIo { path: path.clone(), source };
            let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
            let line = format!("{host},{}\n", year.map(|y| y.to_string()).unwrap_or_default());
            file.write_all(line.as_bytes()).map_err(io_err)?;
        }
        self.entries.write().unwrap_or_else(|e| e.into_inner()).insert(host.to_string(), year);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_cache_line(line: &str) -> Result<(String, Option<i32>), String> {
    let (host, year) = line.rsplit_once(',').ok_or("expected host,year")?;
    let host = host.trim();
    if host.is_empty() {
        return Err("empty host".into());
    }
    let year = match year.trim() {
        "" => None,
        y => Some(y.parse::<i32>().map_err(|_| format!("bad year {y:?}"))?),
    };
    Ok((host.to_ascii_lowercase(), year))
}

/// Cache-first snapshot lookup with an optional live index behind it.
pub struct SnapshotResolver {
    cache: SnapshotCache,
    live: Option<Box<dyn ArchiveIndex>>,
}

impl SnapshotResolver {
    /// Cache only: uncached hosts resolve to absent without being cached.
    pub fn offline(cache: SnapshotCache) -> Self {
        SnapshotResolver { cache, live: None }
    }

    pub fn with_live(cache: SnapshotCache, live: Box<dyn ArchiveIndex>) -> Self {
        SnapshotResolver { cache, live: Some(live) }
    }

    pub fn cache(&self) -> &SnapshotCache {
        &self.cache
    }

    pub fn first_snapshot_year(&self, url: &str) -> Result<SnapshotLookup, WaybackError> {
        let host = Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(|h| h.trim_end_matches('.').to_ascii_lowercase()))
            .filter(|h| !h.is_empty())
            .ok_or_else(|| WaybackError::NoHost(url.to_string()))?;
        let lookup = |first_year: Option<i32>, hit: SnapshotSource| SnapshotLookup {
            url: url.to_string(),
            first_year,
            source: if first_year.is_some() { hit } else { SnapshotSource::Absent },
        };
        if let Some(cached) = self.cache.get(&host) {
            return Ok(lookup(cached, SnapshotSource::Cache));
        }
        let Some(live) = &self.live else {
            return Ok(lookup(None, SnapshotSource::Absent));
        };
        let year = match live.earliest_timestamp(&host)? {
            Some(ts) => Some(timestamp_year(&host, &ts)?),
            None => None,
        };
        self.cache.insert(&host, year)?;
        Ok(lookup(year, SnapshotSource::Live))
    }
}

/// Whole years between the first snapshot and `reference_year`, capped at
/// `cap`. A missing snapshot counts as 0; a snapshot after the reference year
/// also gives 0.
pub fn years_old(first_year: Option<i32>, reference_year: i32, cap: u32) -> u32 {
    match first_year {
        Some(first) => u32::try_from(reference_year.saturating_sub(first)).unwrap_or(0).min(cap),
        None => 0,
    }
}
