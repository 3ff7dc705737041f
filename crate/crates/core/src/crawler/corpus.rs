//! Offline replay corpus.
//!
//! Layout, one directory per firm:
//!
//! ```text
//! <corpus>/<encoded firm_id>/response.txt
//! <corpus>/<encoded firm_id>/body.bin
//! ```
//!
//! `encoded firm_id` keeps `[A-Za-z0-9_-]` and `.` (except in first position)
//! and writes every other byte as `%XX` with uppercase hex.
//!
//! `response.txt` is UTF-8 text with LF line endings: a block of
//! `key value` lines, one blank line, then the response headers as
//! `Name: value` lines in arrival order.
//!
//! ```text
//! requested_url https://acme.it
//! final_url https://www.acme.it/
//! outcome 200
//! redirect_count 1
//! ttfb_seconds 0.084
//! total_seconds 0.42
//! fetched_at 2021-03-04T10:00:00Z
//!
//! Content-Type: text/html; charset=utf-8
//! Strict-Transport-Security: max-age=63072000
//! ```
//!
//! `outcome` is a decimal status code, `timeout` or `robots-excluded`. A
//! `note` line may follow `outcome` for timeouts. Reals are written in the
//! shortest form that parses back to the same `f64`; timestamps are RFC 3339
//! in UTC. `body.bin` holds the raw body bytes and is empty for non-responses.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use super::{CrawlResult, FetchOutcome, HeaderList, Scheme};

pub const RESPONSE_FILE: &str = "response.txt";
pub const BODY_FILE: &str = "body.bin";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus has no entry for firm {0:?}")]
    NotFound(String),
    #[error("corpus I/O on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed corpus entry {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

pub fn encode_firm_id(firm_id: &str) -> String {
    let mut out = String::with_capacity(firm_id.len());
    for (i, b) in firm_id.bytes().enumerate() {
        let keep = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0);
        if keep {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out
}

/// Read-only handle on a corpus directory.
#[derive(Debug, Clone)]
pub struct ReplayCorpus {
    root: PathBuf,
}

impl ReplayCorpus {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(CorpusError::Io {
                path: root,
                source: io::Error::new(io::ErrorKind::NotFound, "corpus directory not found"),
            });
        }
        Ok(ReplayCorpus { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, firm_id: &str) -> PathBuf {
        self.root.join(encode_firm_id(firm_id))
    }

    pub fn contains(&self, firm_id: &str) -> bool {
        self.entry_dir(firm_id).join(RESPONSE_FILE).is_file()
    }

    /// Reconstructs the stored fetch for `firm_id`.
    pub fn replay_fetch(&self, firm_id: &str) -> Result<CrawlResult, CorpusError> {
        let dir = self.entry_dir(firm_id);
        let meta_path = dir.join(RESPONSE_FILE);
        if !meta_path.is_file() {
            return Err(CorpusError::NotFound(firm_id.to_string()));
        }
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let body_path = dir.join(BODY_FILE);
        let body = match fs::read(&body_path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&body_path)(e)),
        };
        parse_entry(firm_id, &text, body).map_err(|reason| CorpusError::Malformed { path: meta_path, reason })
    }
}

fn parse_entry(firm_id: &str, text: &str, body: Vec<u8>) -> Result<CrawlResult, String> {
    let (meta, headers) = match text.split_once("\n\n") {
        Some((m, h)) => (m, h),
        None => (text.trim_end_matches('\n'), ""),
    };
    let mut requested_url = None;
    let mut final_url = None;
    let mut outcome = None;
    let mut note = String::new();
    let mut redirect_count = 0u32;
    let mut ttfb = None;
    let mut total = None;
    let mut fetched_at = None;
    for line in meta.lines() {
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        let real = |v: &str| v.parse::<f64>().map_err(|_| format!("bad {key} {v:?}"));
        match key {
            "requested_url" => requested_url = Some(value.to_string()),
            "final_url" => final_url = Some(value.to_string()),
            "outcome" => outcome = Some(value.to_string()),
            "note" => note = value.to_string(),
            "redirect_count" => redirect_count = value.parse().map_err(|_| format!("bad redirect_count {value:?}"))?,
            "ttfb_seconds" => ttfb = Some(real(value)?),
            "total_seconds" => total = Some(real(value)?),
            "fetched_at" => {
                fetched_at = Some(
                    DateTime::parse_from_rfc3339(value)
                        .map_err(|e| format!("bad fetched_at {value:?}: {e}"))?
                        .with_timezone(&Utc),
                )
            }
            other => return Err(format!("unknown key {other:?}")),
        }
    }
    let outcome = match outcome.as_deref() {
        Some("timeout") => FetchOutcome::Timeout(note),
        Some("robots-excluded") => FetchOutcome::RobotsExcluded,
        Some(code) => FetchOutcome::Status(code.parse().map_err(|_| format!("bad outcome {code:?}"))?),
        None => return Err("missing outcome".into()),
    };
    let requested_url = requested_url.ok_or("missing requested_url")?;
    let final_url = final_url.unwrap_or_else(|| requested_url.clone());
    let ttfb_seconds = ttfb.ok_or("missing ttfb_seconds")?;
    let total_seconds = total.ok_or("missing total_seconds")?;
    if !(0.0 <= ttfb_seconds && ttfb_seconds <= total_seconds) {
        return Err(format!("need 0 <= ttfb ({ttfb_seconds}) <= total ({total_seconds})"));
    }
    if !matches!(outcome, FetchOutcome::Status(_)) && !body.is_empty() {
        return Err("non-response entry carries a body".into());
    }
    let mut response_headers = HeaderList::new();
    for line in headers.lines().filter(|l| !l.is_empty()) {
        let (name, value) = line.split_once(':').ok_or_else(|| format!("bad header line {line:?}"))?;
        response_headers.push(name.trim(), value.trim_start());
    }
    Ok(CrawlResult {
        firm_id: firm_id.to_string(),
        scheme: Scheme::of(&final_url),
        requested_url,
        final_url,
        outcome,
        ttfb_seconds,
        total_seconds,
        response_headers,
        body,
        fetched_at: fetched_at.ok_or("missing fetched_at")?,
        redirect_count,
    })
}

/// Renders the `response.txt` text for one result.
pub fn render_entry(result: &CrawlResult) -> String {
    let one_line = |s: &str| s.replace(['\r', '\n'], " ");
    let mut out = String::new();
    let _ = writeln!(out, "requested_url {}", one_line(&result.requested_url));
    let _ = writeln!(out, "final_url {}", one_line(&result.final_url));
    let _ = writeln!(out, "outcome {}", result.outcome);
    if let FetchOutcome::Timeout(note) = &result.outcome {
        if !note.is_empty() {
            let _ = writeln!(out, "note {}", one_line(note));
        }
    }
    let _ = writeln!(out, "redirect_count {}", result.redirect_count);
    let _ = writeln!(out, "ttfb_seconds {}", result.ttfb_seconds);
    let _ = writeln!(out, "total_seconds {}", result.total_seconds);
    let _ = writeln!(out, "fetched_at {}", result.fetched_at.to_rfc3339_opts(SecondsFormat::AutoSi, true));
    out.push('\n');
    for (name, value) in result.response_headers.iter() {
        let _ = writeln!(out, "{}: {}", one_line(name), one_line(value));
    }
    out
}

/// Stores `result` under `root`, replacing any previous entry for the firm.
/// Returns the entry directory.
pub fn write_entry(root: &Path, result: &CrawlResult) -> Result<PathBuf, CorpusError> {
    let dir = root.join(encode_firm_id(&result.firm_id));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let meta = dir.join(RESPONSE_FILE);
    fs::write(&meta, render_entry(result)).map_err(io_err(&meta))?;
    let body = dir.join(BODY_FILE);
    fs::write(&body, &result.body).map_err(io_err(&body))?;
    Ok(dir)
}
