//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! reference_year = 2021
//!
//! [registry]
//! delimiter = ";"
//! [registry.columns]
//! firm_id = "codice_fiscale"
//!
//! [crawl]
//! timeout_seconds = 30
//! per_host_min_interval_seconds = 1
//!
//! [extract]
//! request_time = "total"      # or "ttfb"
//! age_cap = 25
//! wayback_cache = "wayback.csv"
//! wayback_live = false
//!
//! [index]
//! scheme = "codai"
//! mean_divisors = false
//! invert = ["length_url", "facebook", "request_time", "security_header_int"]
//!
//! [cluster]
//! k = 3
//! k_max = 8
//!
//! [[regress.specs]]
//! name = "codai"
//! dependent = "codai"
//! model = "ols"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use codai_core::crawler::CrawlPolicy;
use codai_core::extractor::RequestTimeMode;
use codai_core::index::{default_invert_set, DimensionScheme, SchemeConfig};
use codai_core::registry::RegistrySchema;
use codai_core::stats::kmeans::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use codai_core::stats::RegressionSpec;
use codai_core::wayback::DEFAULT_AGE_CAP;
use codai_core::Feature;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Year against which website and firm ages are measured. Defaults to the
    /// latest fetch year in the crawl.
    pub reference_year: Option<i32>,
    pub registry: RegistrySchema,
    /// Optional municipality → wide-band share file joined at crawl time.
    pub wideband: Option<WidebandConfig>,
    pub crawl: CrawlPolicy,
    pub extract: ExtractConfig,
    pub index: IndexConfig,
    pub aggregate: AggregateConfig,
    pub cluster: ClusterConfig,
    pub regress: RegressConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidebandConfig {
    pub path: PathBuf,
    #[serde(default = "comma")]
    pub delimiter: char,
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub request_time: RequestTimeMode,
    pub age_cap: u32,
    /// `host,year` cache of earliest snapshots.
    pub wayback_cache: Option<PathBuf>,
    /// Query the live archive for hosts missing from the cache.
    pub wayback_live: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { request_time: RequestTimeMode::Total, age_cap: DEFAULT_AGE_CAP, wayback_cache: None, wayback_live: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub scheme: String,
    /// Divide each dimension by its member count instead of the scheme divisor.
    pub mean_divisors: bool,
    pub invert: Option<Vec<String>>,
    /// Extra schemes selectable by name.
    pub schemes: Vec<SchemeConfig>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig { scheme: "codai".into(), mean_divisors: false, invert: None, schemes: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { k: 3, k_min: 1, k_max: 8, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    /// Empty means one OLS per index dimension plus the total.
    pub specs: Vec<RegressionSpec>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(cache) = &mut config.extract.wayback_cache {
            if cache.is_relative() {
                *cache = base.join(&*cache);
            }
        }
        if let Some(wb) = &mut config.wideband {
            if wb.path.is_relative() {
                wb.path = base.join(&wb.path);
            }
        }
        Ok(config)
    }

    pub fn scheme(&self) -> Result<DimensionScheme> {
        let name = self.index.scheme.as_str();
        let scheme = match self.index.schemes.iter().find(|s| s.name == name) {
            Some(custom) => custom.build()?.0,
            None => DimensionScheme::builtin(name)?,
        };
        Ok(if self.index.mean_divisors { scheme.with_mean_divisors() } else { scheme })
    }

    /// The index's invert set: explicit list, else the selected custom
    /// scheme's list, else the default four features.
    pub fn invert_set(&self) -> Result<BTreeSet<Feature>> {
        if let Some(names) = &self.index.invert {
            return names.iter().map(|n| n.parse::<Feature>().map_err(Into::into)).collect();
        }
        if let Some(custom) = self.index.schemes.iter().find(|s| s.name == self.index.scheme) {
            if let Some(set) = custom.build()?.1 {
                return Ok(set);
            }
        }
        Ok(default_invert_set())
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme()?;
        self.invert_set()?;
        let c = &self.cluster;
        if c.k == 0 || c.k_min == 0 || c.k_min > c.k_max {
            bail!("cluster: need k >= 1 and 1 <= k_min <= k_max");
        }
        for spec in &self.regress.specs {
            spec.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, hex encoded.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
