use std::path::Path;

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use codai_core::crawler::CrawlPolicy;
use serde::{Deserialize, Serialize};

/// Row counts of one stage. For crawls `valid + invalid + robots_excluded`
/// always equals `attempted`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub input_firms: usize,
    /// Registry rows rejected while loading.
    pub rejected_rows: usize,
    pub attempted: usize,
    pub valid: usize,
    pub invalid: usize,
    pub robots_excluded: usize,
    /// Rows dropped by this stage, with reasons in its exclusion file.
    pub excluded_rows: usize,
    pub output_rows: usize,
}

impl Counts {
    pub fn reconciles(&self) -> bool {
        self.valid + self.invalid + self.robots_excluded == self.attempted
    }

    pub fn valid_share(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.valid as f64 / self.attempted as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub stage: String,
    pub started_at: String,
    pub finished_at: String,
    pub config_digest: String,
    pub seed: u64,
    pub reference_year: Option<i32>,
    pub crawl_policy: Option<CrawlPolicy>,
    pub replay_corpus: Option<String>,
    pub counts: Counts,
    pub valid_share: Option<f64>,
    /// Stage-specific facts such as the scheme or the suggested k.
    #[serde(default)]
    pub details: serde_json::Value,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(stage: &str, config_digest: &str, seed: u64) -> Self {
        let now = stamp(Utc::now());
        RunManifest {
            run_id: uuid::Uuid::new_v4().to_string(),
            stage: stage.to_string(),
            started_at: now.clone(),
            finished_at: now,
            config_digest: config_digest.to_string(),
            seed,
            reference_year: None,
            crawl_policy: None,
            replay_corpus: None,
            counts: Counts::default(),
            valid_share: None,
            details: serde_json::Value::Null,
        }
    }

    /// Stamps the finish time and writes `<dir>/<stage>.manifest.json`.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_at = stamp(Utc::now());
        self.valid_share = self.counts.valid_share();
        let path = dir.join(format!("{}.manifest.json", self.stage));
        let text = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
