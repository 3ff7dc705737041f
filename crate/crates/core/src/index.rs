//! MinMax normalisation and the weighted composite index.
//!
//! Bounds are fitted once over the whole population. A feature whose
//! population minimum equals its maximum normalises to 0 for every firm, and
//! values outside the fitted bounds are clamped before inversion, so every
//! normalised value lies in `[0, 1]`.
//!
//! A [`DimensionScheme`] partitions the ten features into named groups; each
//! group contributes `sum(members) / divisor` to the total. Built-in schemes:
//!
//! | scheme | groups |
//! |---|---|
//! | `codai` | stakeholder engagement {links out, Facebook, Instagram, LinkedIn}/2, technical capabilities {best practices, security, request time}/3, internal organization {URL length, links in}/2, digital culture {years old}/1 |
//! | `wai2001` | accessibility {URL length, best practices, Facebook, Instagram, LinkedIn}/5, navigability {links in, links out}/3, speed {request time}/1, digital culture {years old, security}/2 |
//! | `sum10` | all ten features /1 |
//!
//! The navigability divisor of `wai2001` stays 3 although only two extracted
//! features feed it.

use std::collections::BTreeSet;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Feature, FeatureValues, RawFeatures, FEATURE_COUNT};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot fit bounds on an empty population")]
    EmptyPopulation,
    #[error("scheme {scheme:?}: {reason}")]
    Scheme { scheme: String, reason: String },
    #[error("unknown scheme {0:?} (built-in: codai, wai2001, sum10)")]
    UnknownScheme(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("index file: {0}")]
    Format(String),
}

/// The paper's inverted features: shorter URLs, fewer Facebook links, faster
/// responses and lower security penalties score higher.
pub fn default_invert_set() -> BTreeSet<Feature> {
    [Feature::LengthUrl, Feature::Facebook, Feature::RequestTime, Feature::SecurityHeaderInt].into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub feature: Feature,
    pub min: f64,
    pub max: f64,
    pub invert: bool,
}

impl FeatureBounds {
    pub fn normalize(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 || !span.is_finite() {
            return 0.0;
        }
        let scaled = ((v - self.min) / span).clamp(0.0, 1.0);
        if self.invert {
            1.0 - scaled
        } else {
            scaled
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub features: Vec<FeatureBounds>,
}

impl NormalizationBounds {
    pub fn get(&self, feature: Feature) -> &FeatureBounds {
        &self.features[feature.position()]
    }

    fn validate(&self) -> Result<(), String> {
        if self.features.len() != FEATURE_COUNT {
            return Err(format!("expected {FEATURE_COUNT} features, found {}", self.features.len()));
        }
        for (b, f) in self.features.iter().zip(Feature::ALL) {
            if b.feature != f {
                return Err(format!("feature {} out of order", b.feature));
            }
            if b.min.is_nan() || b.max.is_nan() || b.min > b.max {
                return Err(format!("{}: min {} > max {}", f, b.min, b.max));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IndexError> {
        let bounds: NormalizationBounds =
            serde_json::from_str(text).map_err(|e| IndexError::Format(format!("bounds: {e}")))?;
        bounds.validate().map_err(IndexError::Format)?;
        Ok(bounds)
    }
}

pub fn fit_bounds(population: &[RawFeatures], invert_set: &BTreeSet<Feature>) -> Result<NormalizationBounds, IndexError> {
    let first = population.first().ok_or(IndexError::EmptyPopulation)?.values();
    let (mut lo, mut hi) = (first, first);
    for row in &population[1..] {
        for (i, v) in row.values().into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    let features = Feature::ALL
        .into_iter()
        .map(|f| FeatureBounds { feature: f, min: lo[f.position()], max: hi[f.position()], invert: invert_set.contains(&f) })
        .collect();
    Ok(NormalizationBounds { features })
}

pub fn normalize(raw: &RawFeatures, bounds: &NormalizationBounds) -> FeatureValues {
    Feature::ALL.map(|f| bounds.get(f).normalize(raw.get(f)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionGroup {
    pub name: String,
    pub members: Vec<Feature>,
    pub divisor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionScheme {
    name: String,
    groups: Vec<DimensionGroup>,
}

impl DimensionScheme {
    /// Checks that the groups partition the ten features and divisors are positive.
    pub fn new(name: impl Into<String>, groups: Vec<DimensionGroup>) -> Result<Self, IndexError> {
        let name = name.into();
        let err = |reason: String| IndexError::Scheme { scheme: name.clone(), reason };
        if groups.is_empty() {
            return Err(err("no groups".into()));
        }
        let mut seen = BTreeSet::new();
        let mut names = BTreeSet::new();
        for g in &groups {
            if !names.insert(g.name.as_str()) {
                return Err(err(format!("group {:?} defined twice", g.name)));
            }
            if !(g.divisor > 0.0 && g.divisor.is_finite()) {
                return Err(err(format!("group {:?} has divisor {}", g.name, g.divisor)));
            }
            if g.members.is_empty() {
                return Err(err(format!("group {:?} is empty", g.name)));
            }
            for m in &g.members {
                if !seen.insert(*m) {
                    return Err(err(format!("feature {m} belongs to more than one group")));
                }
            }
        }
        let missing: Vec<&str> = Feature::ALL.iter().filter(|f| !seen.contains(f)).map(|f| f.name()).collect();
        if !missing.is_empty() {
            return Err(err(format!("features not in any group: {}", missing.join(", "))));
        }
        Ok(DimensionScheme { name, groups })
    }

    pub fn codai() -> Self {
        use Feature::*;
        Self::new(
            "codai",
            vec![
                group("stakeholder_engagement", &[UniqueLinksOut, Facebook, Instagram, Linkedin], 2.0),
                group("technical_capabilities", &[BestPractices, SecurityHeaderInt, RequestTime], 3.0),
                group("internal_organization", &[LengthUrl, UniqueLinksIn], 2.0),
                group("digital_culture", &[YearsOld], 1.0),
            ],
        )
        .expect("built-in scheme")
    }

    pub fn wai2001() -> Self {
        use Feature::*;
        Self::new(
            "wai2001",
            vec![
                group("accessibility", &[LengthUrl, BestPractices, Facebook, Instagram, Linkedin], 5.0),
                group("navigability", &[UniqueLinksIn, UniqueLinksOut], 3.0),
                group("speed", &[RequestTime], 1.0),
                group("digital_culture", &[YearsOld, SecurityHeaderInt], 2.0),
            ],
        )
        .expect("built-in scheme")
    }

    pub fn sum10() -> Self {
        Self::new("sum10", vec![group("total", &Feature::ALL, 1.0)]).expect("built-in scheme")
    }

    pub fn builtin(name: &str) -> Result<Self, IndexError> {
        match name {
            "codai" => Ok(Self::codai()),
            "wai2001" => Ok(Self::wai2001()),
            "sum10" => Ok(Self::sum10()),
            other => Err(IndexError::UnknownScheme(other.to_string())),
        }
    }

    /// Same groups with each divisor replaced by the group size, so every
    /// dimension becomes the mean of its members.
    pub fn with_mean_divisors(mut self) -> Self {
        for g in &mut self.groups {
            g.divisor = g.members.len() as f64;
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> &[DimensionGroup] {
        &self.groups
    }

    /// Total reached when every normalised value is 1.
    pub fn max_total(&self) -> f64 {
        self.groups.iter().map(|g| g.members.len() as f64 / g.divisor).sum()
    }
}

fn group(name: &str, members: &[Feature], divisor: f64) -> DimensionGroup {
    DimensionGroup { name: name.to_string(), members: members.to_vec(), divisor }
}

/// A scheme as written in a configuration file; member names accept every
/// spelling understood by [`Feature`]'s `FromStr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub name: String,
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub invert: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub name: String,
    pub members: Vec<String>,
    pub divisor: f64,
}

impl SchemeConfig {
    pub fn build(&self) -> Result<(DimensionScheme, Option<BTreeSet<Feature>>), IndexError> {
        let err = |reason: String| IndexError::Scheme { scheme: self.name.clone(), reason };
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let members = g
                .members
                .iter()
                .map(|m| m.parse::<Feature>().map_err(|e| err(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(DimensionGroup { name: g.name.clone(), members, divisor: g.divisor });
        }
        let invert = match &self.invert {
            Some(names) => Some(
                names.iter().map(|m| m.parse::<Feature>().map_err(|e| err(e.to_string()))).collect::<Result<_, _>>()?,
            ),
            None => None,
        };
        Ok((DimensionScheme::new(self.name.clone(), groups)?, invert))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexScores {
    pub firm_id: String,
    pub normalized: FeatureValues,
    pub dimension_raw: Vec<f64>,
    pub dimension_scored: Vec<f64>,
    pub total: f64,
}

pub fn dimension_scores(firm_id: &str, normalized: &FeatureValues, scheme: &DimensionScheme) -> IndexScores {
    let dimension_raw: Vec<f64> =
        scheme.groups.iter().map(|g| g.members.iter().map(|f| normalized[f.position()]).sum()).collect();
    let dimension_scored: Vec<f64> = dimension_raw.iter().zip(&scheme.groups).map(|(r, g)| r / g.divisor).collect();
    let total = dimension_scored.iter().sum();
    IndexScores { firm_id: firm_id.to_string(), normalized: *normalized, dimension_raw, dimension_scored, total }
}

/// Normalises and scores every firm against bounds fitted on the same rows.
pub fn score_population(
    rows: &[(String, RawFeatures)],
    invert_set: &BTreeSet<Feature>,
    scheme: &DimensionScheme,
) -> Result<(NormalizationBounds, Vec<IndexScores>), IndexError> {
    let raws: Vec<RawFeatures> = rows.iter().map(|(_, r)| *r).collect();
    let bounds = fit_bounds(&raws, invert_set)?;
    let scores = rows.iter().map(|(id, raw)| dimension_scores(id, &normalize(raw, &bounds), scheme)).collect();
    Ok((bounds, scores))
}

pub fn index_file_header(scheme: &DimensionScheme) -> Vec<String> {
    let mut header = vec!["firm_id".to_string()];
    header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    header.extend(scheme.groups.iter().map(|g| g.name.clone()));
    header.push("total".into());
    header
}

/// Writes the index file: firm id, ten normalised values, one scored column
/// per dimension, total.
pub fn write_index_file<W: io::Write>(out: W, scheme: &DimensionScheme, scores: &[IndexScores]) -> Result<(), IndexError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(index_file_header(scheme))?;
    for s in scores {
        let mut record = vec![s.firm_id.clone()];
        record.extend(s.normalized.iter().map(|v| v.to_string()));
        record.extend(s.dimension_scored.iter().map(|v| v.to_string()));
        record.push(s.total.to_string());
        w.write_record(record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One parsed row of an index file.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub firm_id: String,
    pub normalized: FeatureValues,
    pub dimensions: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexFile {
    pub dimension_names: Vec<String>,
    pub rows: Vec<IndexRow>,
}

pub fn read_index_file<R: io::Read>(input: R) -> Result<IndexFile, IndexError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let fixed = 1 + FEATURE_COUNT;
    let ok = header.len() > fixed + 1
        && header[0] == "firm_id"
        && header[1..fixed].iter().zip(Feature::ALL).all(|(h, f)| h == f.name())
        && header.last().is_some_and(|h| h == "total");
    if !ok {
        return Err(IndexError::Format(format!("unexpected header {header:?}")));
    }
    let dimension_names = header[fixed..header.len() - 1].to_vec();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64, IndexError> {
            record[i].parse::<f64>().map_err(|_| {
                IndexError::Format(format!("row {}: column {} is not a number", record.position().map_or(0, |p| p.line()), header[i]))
            })
        };
        let mut normalized = [0.0; FEATURE_COUNT];
        for (i, slot) in normalized.iter_mut().enumerate() {
            *slot = num(1 + i)?;
        }
        let dimensions = (fixed..header.len() - 1).map(num).collect::<Result<_, _>>()?;
        rows.push(IndexRow { firm_id: record[0].to_string(), normalized, dimensions, total: num(header.len() - 1)? });
    }
    Ok(IndexFile { dimension_names, rows })
}
