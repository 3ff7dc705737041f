use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The ten homepage features, in the column order of the feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    UniqueLinksIn,
    UniqueLinksOut,
    BestPractices,
    LengthUrl,
    Facebook,
    Instagram,
    Linkedin,
    YearsOld,
    RequestTime,
    SecurityHeaderInt,
}

pub const FEATURE_COUNT: usize = 10;

/// One value per feature, indexed by [`Feature::position`].
pub type FeatureValues = [f64; FEATURE_COUNT];

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::UniqueLinksIn,
        Feature::UniqueLinksOut,
        Feature::BestPractices,
        Feature::LengthUrl,
        Feature::Facebook,
        Feature::Instagram,
        Feature::Linkedin,
        Feature::YearsOld,
        Feature::RequestTime,
        Feature::SecurityHeaderInt,
    ];

    pub const SOCIAL: [Feature; 3] = [Feature::Facebook, Feature::Instagram, Feature::Linkedin];

    pub fn position(self) -> usize {
        self as usize
    }

    /// Identifier used in configuration files and index output columns.
    pub fn name(self) -> &'static str {
        match self {
            Feature::UniqueLinksIn => "unique_links_in",
            Feature::UniqueLinksOut => "unique_links_out",
            Feature::BestPractices => "best_practices",
            Feature::LengthUrl => "length_url",
            Feature::Facebook => "facebook",
            Feature::Instagram => "instagram",
            Feature::Linkedin => "linkedin",
            Feature::YearsOld => "years_old",
            Feature::RequestTime => "request_time",
            Feature::SecurityHeaderInt => "security_header_int",
        }
    }

    /// Column header in the feature file, matching the descriptive-statistics table.
    pub fn column(self) -> &'static str {
        match self {
            Feature::BestPractices => "best-practices",
            Feature::Facebook => "Facebook",
            Feature::Instagram => "Instagram",
            Feature::Linkedin => "LinkedIn",
            other => other.name(),
        }
    }

    pub fn is_social(self) -> bool {
        matches!(self, Feature::Facebook | Feature::Instagram | Feature::Linkedin)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature name {0:?}")]
pub struct UnknownFeature(pub String);

impl FromStr for Feature {
    type Err = UnknownFeature;

    /// Accepts the identifier, the file column header, and the short aliases
    /// `security` and `speed`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let found = match key.as_str() {
            "security" => Some(Feature::SecurityHeaderInt),
            "speed" => Some(Feature::RequestTime),
            _ => Feature::ALL.into_iter().find(|f| f.name() == key),
        };
        found.ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

/// The ten features for one firm, in native units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub length_url: u32,
    pub unique_links_in: u32,
    pub unique_links_out: u32,
    pub best_practices: f64,
    pub facebook: bool,
    pub instagram: bool,
    pub linkedin: bool,
    pub years_old: u32,
    pub request_time: f64,
    pub security_header_int: u8,
}

impl RawFeatures {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::UniqueLinksIn => self.unique_links_in as f64,
            Feature::UniqueLinksOut => self.unique_links_out as f64,
            Feature::BestPractices => self.best_practices,
            Feature::LengthUrl => self.length_url as f64,
            Feature::Facebook => flag(self.facebook),
            Feature::Instagram => flag(self.instagram),
            Feature::Linkedin => flag(self.linkedin),
            Feature::YearsOld => self.years_old as f64,
            Feature::RequestTime => self.request_time,
            Feature::SecurityHeaderInt => self.security_header_int as f64,
        }
    }

    pub fn values(&self) -> FeatureValues {
        Feature::ALL.map(|f| self.get(f))
    }

    /// Formats one feature the way the feature file stores it.
    pub fn format_value(&self, feature: Feature) -> String {
        match feature {
            Feature::BestPractices => format!("{}", self.best_practices),
            Feature::RequestTime => format!("{}", self.request_time),
            other => format!("{}", self.get(other) as u64),
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// One row of the feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub firm_id: String,
    pub features: RawFeatures,
}

#[derive(Debug, Error)]
pub enum FeatureFileError {
    #[error("feature file: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature file header must be {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("feature file line {line}: bad value {value:?} for column {column}")]
    Value { line: u64, column: &'static str, value: String },
}

pub fn feature_file_header() -> Vec<String> {
    std::iter::once("firm_id".to_string())
        .chain(Feature::ALL.iter().map(|f| f.column().to_string()))
        .collect()
}

pub fn write_feature_file<W: io::Write>(out: W, rows: &[FeatureRow]) -> Result<(), FeatureFileError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(feature_file_header())?;
    for row in rows {
        let mut rec = vec![row.firm_id.clone()];
        rec.extend(Feature::ALL.iter().map(|&f| row.features.format_value(f)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_feature_file<R: io::Read>(input: R) -> Result<Vec<FeatureRow>, FeatureFileError> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let expected = feature_file_header();
    if found != expected {
        return Err(FeatureFileError::Header { expected, found });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |f: Feature| -> &str { &rec[f.position() + 1] };
        let bad = |f: Feature| FeatureFileError::Value {
            line,
            column: f.column(),
            value: rec[f.position() + 1].to_string(),
        };
        let int = |f: Feature| field(f).parse::<u32>().map_err(|_| bad(f));
        let real = |f: Feature| field(f).parse::<f64>().map_err(|_| bad(f));
        let bit = |f: Feature| match field(f) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(f)),
        };
        let security = int(Feature::SecurityHeaderInt)?;
        let features = RawFeatures {
            length_url: int(Feature::LengthUrl)?,
            unique_links_in: int(Feature::UniqueLinksIn)?,
            unique_links_out: int(Feature::UniqueLinksOut)?,
            best_practices: real(Feature::BestPractices)?,
            facebook: bit(Feature::Facebook)?,
            instagram: bit(Feature::Instagram)?,
            linkedin: bit(Feature::Linkedin)?,
            years_old: int(Feature::YearsOld)?,
            request_time: real(Feature::RequestTime)?,
            security_header_int: u8::try_from(security)
                .ok()
                .filter(|s| *s <= 15)
                .ok_or_else(|| bad(Feature::SecurityHeaderInt))?,
        };
        rows.push(FeatureRow { firm_id: rec[0].to_string(), features });
    }
    Ok(rows)
}
