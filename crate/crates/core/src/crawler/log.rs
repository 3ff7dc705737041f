use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::corpus::encode_firm_id;
use super::{CrawlResult, FetchOutcome, BODY_FILE};

/// One line of the crawl log (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlLogEntry {
    pub firm_id: String,
    pub requested_url: String,
    pub final_url: String,
    /// `ok`, `timeout` or `robots-excluded`.
    pub outcome: String,
    pub http_status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub redirect_count: u32,
    pub ttfb_seconds: f64,
    pub total_seconds: f64,
    pub fetched_at: String,
    pub header_digest: String,
    pub body_bytes: usize,
    /// Body path relative to the corpus root.
    pub body_file: String,
}

impl CrawlLogEntry {
    pub fn from_result(result: &CrawlResult) -> Self {
        let (outcome, note) = match &result.outcome {
            FetchOutcome::Status(_) => ("ok", None),
            FetchOutcome::Timeout(n) => ("timeout", Some(n.clone())),
            FetchOutcome::RobotsExcluded => ("robots-excluded", None),
        };
        CrawlLogEntry {
            firm_id: result.firm_id.clone(),
            requested_url: result.requested_url.clone(),
            final_url: result.final_url.clone(),
            outcome: outcome.to_string(),
            http_status: result.http_status(),
            note,
            redirect_count: result.redirect_count,
            ttfb_seconds: result.ttfb_seconds,
            total_seconds: result.total_seconds,
            fetched_at: result.fetched_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            header_digest: header_digest(result),
            body_bytes: result.body.len(),
            body_file: format!("{}/{}", encode_firm_id(&result.firm_id), BODY_FILE),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log entry serializes")
    }
}

/// SHA-256 over the headers rendered as lowercase `name: value\n` lines, in
/// arrival order, hex encoded.
pub fn header_digest(result: &CrawlResult) -> String {
    let mut hasher = Sha256::new();
    for (name, value) in result.response_headers.iter() {
        hasher.update(name.to_ascii_lowercase().as_bytes());
        hasher.update(b": ");
        hasher.update(value.as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
