//! Aggregation of firm rows to territorial units.
//!
//! Continuous features are averaged; the three social flags become the share
//! of firms with the flag set. Regions below `min_count` firms and rows
//! without a region code are never dropped silently: both are listed in the
//! [`ExclusionReport`].

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Feature, FeatureValues, RawFeatures, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("firm {firm_id}: social flag {feature} is {value}, expected 0 or 1")]
    NotAFlag { firm_id: String, feature: Feature, value: f64 },
    #[error("firm {firm_id}: {feature} is not finite")]
    NotFinite { firm_id: String, feature: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("region file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nuts3,
    Municipality,
}

impl Level {
    /// Municipalities need at least ten firms; every province is kept.
    pub fn default_min_count(self) -> usize {
        match self {
            Level::Nuts3 => 1,
            Level::Municipality => 10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Nuts3 => "nuts3",
            Level::Municipality => "municipality",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nuts3" | "nuts-3" | "province" => Ok(Level::Nuts3),
            "municipality" | "comune" => Ok(Level::Municipality),
            other => Err(format!("unknown level {other:?} (expected nuts3 or municipality)")),
        }
    }
}

/// One firm ready for aggregation. `values` holds normalised continuous
/// features and raw 0/1 social flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRow {
    pub firm_id: String,
    pub region_code: Option<String>,
    pub values: FeatureValues,
    pub index: f64,
}

impl SpatialRow {
    /// Takes continuous features from `normalized` and the social flags from
    /// `raw`, so a share is the fraction of firms linking the platform
    /// whatever the index's inversion rules.
    pub fn new(firm_id: &str, region_code: Option<String>, raw: &RawFeatures, normalized: &FeatureValues, index: f64) -> Self {
        let values = Feature::ALL.map(|f| if f.is_social() { raw.get(f) } else { normalized[f.position()] });
        SpatialRow { firm_id: firm_id.to_string(), region_code, values, index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionAggregate {
    pub region_code: String,
    pub level: Level,
    pub n_firms: usize,
    pub values: FeatureValues,
    pub mean_index: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub min_count: usize,
    /// Firms with no code at the requested level.
    pub missing_region: Vec<String>,
    /// Regions dropped for having fewer than `min_count` firms, with their size.
    pub below_threshold: Vec<(String, usize)>,
}

impl ExclusionReport {
    pub fn excluded_rows(&self) -> usize {
        self.missing_region.len() + self.below_threshold.iter().map(|(_, n)| n).sum::<usize>()
    }

    /// `reason,key,n_firms` lines.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SpatialError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["reason", "key", "n_firms"])?;
        for id in &self.missing_region {
            w.write_record(["missing_region", id, "1"])?;
        }
        for (code, n) in &self.below_threshold {
            w.write_record(["below_min_count", code, &n.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Mean of `xs`, kept inside the members' range despite rounding.
fn bounded_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        sum += x;
        n += 1;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (sum / n as f64).clamp(lo, hi)
}

pub fn aggregate(
    rows: &[SpatialRow],
    level: Level,
    min_count: usize,
) -> Result<(Vec<RegionAggregate>, ExclusionReport), SpatialError> {
    let mut report = ExclusionReport { min_count, ..Default::default() };
    let mut groups: BTreeMap<&str, Vec<&SpatialRow>> = BTreeMap::new();
    for row in rows {
        for f in Feature::ALL {
            let v = row.values[f.position()];
            if !v.is_finite() {
                return Err(SpatialError::NotFinite { firm_id: row.firm_id.clone(), feature: f.name().into() });
            }
            if f.is_social() && v != 0.0 && v != 1.0 {
                return Err(SpatialError::NotAFlag { firm_id: row.firm_id.clone(), feature: f, value: v });
            }
        }
        if !row.index.is_finite() {
            return Err(SpatialError::NotFinite { firm_id: row.firm_id.clone(), feature: "index".into() });
        }
        match row.region_code.as_deref().map(str::trim).filter(|c| !c.is_empty()) {
            Some(code) => groups.entry(code).or_default().push(row),
            None => report.missing_region.push(row.firm_id.clone()),
        }
    }
    let mut out = Vec::new();
    for (code, members) in groups {
        if members.len() < min_count {
            report.below_threshold.push((code.to_string(), members.len()));
            continue;
        }
        let mut values = [0.0; FEATURE_COUNT];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = bounded_mean(members.iter().map(|r| r.values[i]));
        }
        out.push(RegionAggregate {
            region_code: code.to_string(),
            level,
            n_firms: members.len(),
            values,
            mean_index: bounded_mean(members.iter().map(|r| r.index)),
        });
    }
    Ok((out, report))
}

pub fn region_file_header() -> Vec<String> {
    let mut h = vec!["region_code".to_string(), "level".into(), "n_firms".into()];
    h.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    h.push("mean_index".into());
    h
}

pub fn write_region_file<W: io::Write>(out: W, regions: &[RegionAggregate]) -> Result<(), SpatialError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(region_file_header())?;
    for r in regions {
        let mut rec = vec![r.region_code.clone(), r.level.to_string(), r.n_firms.to_string()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        rec.push(r.mean_index.to_string());
        w.write_record(rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_region_file<R: io::Read>(input: R) -> Result<Vec<RegionAggregate>, SpatialError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != region_file_header() {
        return Err(SpatialError::Format(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let bad = |what: &str| SpatialError::Format(format!("region {:?}: bad {what}", &record[0]));
        let level: Level = record[1].parse().map_err(|_| bad("level"))?;
        let n_firms: usize = record[2].parse().map_err(|_| bad("n_firms"))?;
        let mut values = [0.0; FEATURE_COUNT];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = record[3 + i].parse().map_err(|_| bad(Feature::ALL[i].name()))?;
        }
        let mean_index = record[3 + FEATURE_COUNT].parse().map_err(|_| bad("mean_index"))?;
        out.push(RegionAggregate { region_code: record[0].to_string(), level, n_firms, values, mean_index });
    }
    Ok(out)
}
