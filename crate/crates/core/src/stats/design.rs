//! Regression specifications and design matrices.
//!
//! Column order: `const`, size dummies (`micro`, `medium`, `large`; Small is
//! the baseline), sector dummies `nace_A` .. `nace_M` over the ten listed NACE
//! sections (every other section is the baseline), `firm_age`, `urban_pole`,
//! `north` and `south` (Centre is the baseline), `wideband`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::registry::{FirmRecord, MacroRegion, SizeClass};

/// NACE sections with their own dummy.
pub const NACE_SECTIONS: [char; 10] = ['A', 'C', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirmTerm {
    Size,
    Sector,
    FirmAge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerritoryTerm {
    UrbanPole,
    MacroRegion,
    Wideband,
}

impl FirmTerm {
    fn columns(self) -> Vec<String> {
        match self {
            FirmTerm::Size => vec!["micro".into(), "medium".into(), "large".into()],
            FirmTerm::Sector => NACE_SECTIONS.iter().map(|s| format!("nace_{s}")).collect(),
            FirmTerm::FirmAge => vec!["firm_age".into()],
        }
    }

    fn name(self) -> &'static str {
        match self {
            FirmTerm::Size => "size",
            FirmTerm::Sector => "sector",
            FirmTerm::FirmAge => "firm_age",
        }
    }
}

impl TerritoryTerm {
    fn columns(self) -> Vec<String> {
        match self {
            TerritoryTerm::UrbanPole => vec!["urban_pole".into()],
            TerritoryTerm::MacroRegion => vec!["north".into(), "south".into()],
            TerritoryTerm::Wideband => vec!["wideband".into()],
        }
    }

    fn name(self) -> &'static str {
        match self {
            TerritoryTerm::UrbanPole => "urban_pole",
            TerritoryTerm::MacroRegion => "macro_region",
            TerritoryTerm::Wideband => "wideband",
        }
    }
}

fn default_firm_terms() -> Vec<FirmTerm> {
    vec![FirmTerm::Size, FirmTerm::Sector, FirmTerm::FirmAge]
}

fn default_territory_terms() -> Vec<TerritoryTerm> {
    vec![TerritoryTerm::UrbanPole, TerritoryTerm::MacroRegion, TerritoryTerm::Wideband]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    /// Label for output files.
    pub name: String,
    /// A feature name or an index name such as `codai`.
    pub dependent: String,
    pub model: ModelKind,
    #[serde(default = "default_firm_terms")]
    pub firm_terms: Vec<FirmTerm>,
    #[serde(default = "default_territory_terms")]
    pub territory_terms: Vec<TerritoryTerm>,
    #[serde(default = "yes")]
    pub intercept: bool,
    /// HC1 standard errors for OLS.
    #[serde(default)]
    pub robust: bool,
}

impl RegressionSpec {
    pub fn ols(dependent: &str) -> Self {
        RegressionSpec {
            name: dependent.to_string(),
            dependent: dependent.to_string(),
            model: ModelKind::Ols,
            firm_terms: default_firm_terms(),
            territory_terms: default_territory_terms(),
            intercept: true,
            robust: false,
        }
    }

    pub fn logit(dependent: &str) -> Self {
        RegressionSpec { model: ModelKind::Logit, ..Self::ols(dependent) }
    }

    /// Design column names in order.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        if self.intercept {
            cols.push("const".to_string());
        }
        for t in [FirmTerm::Size, FirmTerm::Sector, FirmTerm::FirmAge] {
            if self.firm_terms.contains(&t) {
                cols.extend(t.columns());
            }
        }
        for t in [TerritoryTerm::UrbanPole, TerritoryTerm::MacroRegion, TerritoryTerm::Wideband] {
            if self.territory_terms.contains(&t) {
                cols.extend(t.columns());
            }
        }
        cols
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let firm: BTreeSet<_> = self.firm_terms.iter().collect();
        let territory: BTreeSet<_> = self.territory_terms.iter().collect();
        if firm.len() != self.firm_terms.len() || territory.len() != self.territory_terms.len() {
            return Err(StatsError::Config(format!("spec {:?} lists a term twice", self.name)));
        }
        let dep = self.dependent.trim().to_ascii_lowercase();
        let regressors = self
            .firm_terms
            .iter()
            .flat_map(|t| std::iter::once(t.name().to_string()).chain(t.columns()))
            .chain(self.territory_terms.iter().flat_map(|t| std::iter::once(t.name().to_string()).chain(t.columns())));
        for r in regressors {
            if r.to_ascii_lowercase() == dep {
                return Err(StatsError::Config(format!("dependent {:?} is also a regressor", self.dependent)));
            }
        }
        if self.columns().is_empty() {
            return Err(StatsError::Config(format!("spec {:?} has no regressors", self.name)));
        }
        Ok(())
    }
}

/// One firm with its response value, which may be missing.
#[derive(Debug, Clone)]
pub struct DesignInput<'a> {
    pub firm: &'a FirmRecord,
    pub response: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub keys: Vec<String>,
    /// Excluded firm ids with the first missing value found.
    pub excluded: Vec<(String, String)>,
}

fn dummy(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn encode_row(firm: &FirmRecord, spec: &RegressionSpec, reference_year: i32) -> Result<Vec<f64>, &'static str> {
    let mut row = Vec::new();
    if spec.intercept {
        row.push(1.0);
    }
    if spec.firm_terms.contains(&FirmTerm::Size) {
        let size = firm.size_class().ok_or("missing employees")?;
        row.extend([size == SizeClass::Micro, size == SizeClass::Medium, size == SizeClass::Large].map(dummy));
    }
    if spec.firm_terms.contains(&FirmTerm::Sector) {
        let section = firm.nace_section.to_ascii_uppercase();
        row.extend(NACE_SECTIONS.iter().map(|s| dummy(*s == section)));
    }
    if spec.firm_terms.contains(&FirmTerm::FirmAge) {
        let founded = firm.founding_year.ok_or("missing founding year")?;
        if founded > reference_year {
            return Err("founding year after reference year");
        }
        row.push((reference_year - founded) as f64);
    }
    if spec.territory_terms.contains(&TerritoryTerm::UrbanPole) {
        row.push(dummy(firm.urban_pole));
    }
    if spec.territory_terms.contains(&TerritoryTerm::MacroRegion) {
        row.push(dummy(firm.macro_region == MacroRegion::North));
        row.push(dummy(firm.macro_region == MacroRegion::South));
    }
    if spec.territory_terms.contains(&TerritoryTerm::Wideband) {
        row.push(firm.wideband_share.ok_or("missing wideband share")?);
    }
    Ok(row)
}

/// Builds `X` and `y`; firm age is `reference_year - founding_year`.
pub fn build_design(rows: &[DesignInput<'_>], spec: &RegressionSpec, reference_year: i32) -> Result<Design, StatsError> {
    spec.validate()?;
    let columns = spec.columns();
    let mut data = Vec::new();
    let mut ys = Vec::new();
    let mut keys = Vec::new();
    let mut excluded = Vec::new();
    for input in rows {
        let id = input.firm.firm_id.clone();
        let Some(y) = input.response.filter(|v| v.is_finite()) else {
            excluded.push((id, format!("missing {}", spec.dependent)));
            continue;
        };
        match encode_row(input.firm, spec, reference_year) {
            Ok(row) => {
                data.extend(row);
                ys.push(y);
                keys.push(id);
            }
            Err(reason) => excluded.push((id, reason.to_string())),
        }
    }
    let x = DMatrix::from_row_slice(keys.len(), columns.len(), &data);
    Ok(Design { columns, x, y: DVector::from_vec(ys), keys, excluded })
}
