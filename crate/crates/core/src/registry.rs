//! Firm registry ingestion.
//!
//! The registry is a delimiter-separated file with a header row. Each
//! well-formed row becomes a [`FirmRecord`]; malformed rows are collected in
//! [`LoadedRegistry::rejects`] with a reason. Wide-band coverage is a second
//! file keyed by municipality and joined with [`join_wideband`].

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("malformed delimited file: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Data { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MacroRegion {
    North,
    Centre,
    South,
}

impl FromStr for MacroRegion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "north" | "nord" => Ok(MacroRegion::North),
            "centre" | "center" | "centro" => Ok(MacroRegion::Centre),
            "south" | "sud" => Ok(MacroRegion::South),
            other => Err(format!("invalid macro_region {other:?}")),
        }
    }
}

impl fmt::Display for MacroRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MacroRegion::North => "North",
            MacroRegion::Centre => "Centre",
            MacroRegion::South => "South",
        })
    }
}

/// Employee-count size class. Ordered `Micro < Small < Medium < Large`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeClass {
    Micro,
    Small,
    Medium,
    Large,
}

/// Micro below 10 employees, Small below 50, Medium below 250, Large otherwise.
pub fn classify_size(employees: u32) -> SizeClass {
    match employees {
        0..=9 => SizeClass::Micro,
        10..=49 => SizeClass::Small,
        50..=249 => SizeClass::Medium,
        _ => SizeClass::Large,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub firm_id: String,
    pub homepage_url: String,
    pub nace_section: char,
    pub employees: Option<u32>,
    pub founding_year: Option<i32>,
    pub nuts3_code: String,
    pub municipality_code: String,
    pub macro_region: MacroRegion,
    pub urban_pole: bool,
    pub wideband_share: Option<f64>,
}

impl FirmRecord {
    pub fn size_class(&self) -> Option<SizeClass> {
        self.employees.map(classify_size)
    }
}

/// Column names of the registry file. Every field except `wideband` is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub firm_id: String,
    pub url: String,
    pub nace: String,
    pub employees: String,
    pub founding_year: String,
    pub nuts3: String,
    pub municipality: String,
    pub macro_region: String,
    pub urban_pole: String,
    pub wideband: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            firm_id: "firm_id".into(),
            url: "url".into(),
            nace: "nace".into(),
            employees: "employees".into(),
            founding_year: "founding_year".into(),
            nuts3: "nuts3".into(),
            municipality: "municipality".into(),
            macro_region: "macro_region".into(),
            urban_pole: "urban_pole".into(),
            wideband: "wideband".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrySchema {
    pub columns: ColumnMapping,
    pub delimiter: char,
}

impl Default for RegistrySchema {
    fn default() -> Self {
        RegistrySchema { columns: ColumnMapping::default(), delimiter: ',' }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizationNote {
    pub line: u64,
    pub firm_id: String,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedRegistry {
    pub firms: Vec<FirmRecord>,
    pub rejects: Vec<RejectedRow>,
    pub notes: Vec<NormalizationNote>,
}

pub fn load_firms(path: &Path, schema: &RegistrySchema) -> Result<LoadedRegistry, RegistryError> {
    let file = File::open(path).map_err(|source| RegistryError::Io { path: path.to_path_buf(), source })?;
    read_firms(file, schema)
}

struct Positions {
    firm_id: usize,
    url: usize,
    nace: usize,
    employees: usize,
    founding_year: usize,
    nuts3: usize,
    municipality: usize,
    macro_region: usize,
    urban_pole: usize,
    wideband: Option<usize>,
}

fn delimiter_byte(c: char) -> Result<u8, RegistryError> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| RegistryError::Data { line: 0, reason: format!("delimiter {c:?} is not a single ASCII byte") })
}

pub fn read_firms<R: io::Read>(input: R, schema: &RegistrySchema) -> Result<LoadedRegistry, RegistryError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema.delimiter)?)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| find(name).ok_or_else(|| RegistryError::MissingColumn(name.to_string()));
    let c = &schema.columns;
    let pos = Positions {
        firm_id: need(&c.firm_id)?,
        url: need(&c.url)?,
        nace: need(&c.nace)?,
        employees: need(&c.employees)?,
        founding_year: need(&c.founding_year)?,
        nuts3: need(&c.nuts3)?,
        municipality: need(&c.municipality)?,
        macro_region: need(&c.macro_region)?,
        urban_pole: need(&c.urban_pole)?,
        wideband: find(&c.wideband),
    };

    let mut out = LoadedRegistry::default();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            out.rejects.push(RejectedRow {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
            continue;
        }
        match parse_row(&rec, &pos) {
            Ok((firm, note)) => {
                if let Some(note) = note {
                    out.notes.push(NormalizationNote { line, firm_id: firm.firm_id.clone(), note });
                }
                out.firms.push(firm);
            }
            Err(reason) => out.rejects.push(RejectedRow { line, reason }),
        }
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, pos: &Positions) -> Result<(FirmRecord, Option<String>), String> {
    let get = |i: usize| rec[i].trim();

    let firm_id = get(pos.firm_id);
    if firm_id.is_empty() {
        return Err("missing firm_id".into());
    }
    let (homepage_url, note) = normalize_url(get(pos.url))?;

    let nace = get(pos.nace);
    let nace_section = match nace.chars().collect::<Vec<_>>().as_slice() {
        [c] if ('A'..='U').contains(&c.to_ascii_uppercase()) => c.to_ascii_uppercase(),
        _ => return Err(format!("invalid nace section {nace:?}")),
    };

    let employees = match get(pos.employees) {
        "" => None,
        s => match s.parse::<i64>() {
            Ok(n) if n < 0 => return Err("negative employees".into()),
            Ok(n) => Some(u32::try_from(n).map_err(|_| "employees out of range".to_string())?),
            Err(_) => return Err("non-numeric employees".into()),
        },
    };
    let founding_year = match get(pos.founding_year) {
        "" => None,
        s => Some(s.parse::<i32>().map_err(|_| "non-numeric founding_year".to_string())?),
    };
    let macro_region = get(pos.macro_region).parse::<MacroRegion>()?;
    let urban_pole = match get(pos.urban_pole) {
        "1" => true,
        "0" => false,
        other => return Err(format!("invalid urban_pole {other:?}")),
    };
    let wideband_share = match pos.wideband.map(get) {
        None | Some("") => None,
        Some(s) => Some(parse_share(s)?),
    };

    Ok((
        FirmRecord {
            firm_id: firm_id.to_string(),
            homepage_url,
            nace_section,
            employees,
            founding_year,
            nuts3_code: get(pos.nuts3).to_string(),
            municipality_code: get(pos.municipality).to_string(),
            macro_region,
            urban_pole,
            wideband_share,
        },
        note,
    ))
}

/// Defaults a missing scheme to `http://` and checks the result parses as an
/// absolute http(s) URL with a host.
pub fn normalize_url(raw: &str) -> Result<(String, Option<String>), String> {
    if raw.is_empty() {
        return Err("missing url".into());
    }
    let (candidate, note) = if raw.contains("://") {
        (raw.to_string(), None)
    } else {
        (format!("http://{raw}"), Some(format!("scheme defaulted to http:// for {raw:?}")))
    };
    let parsed = Url::parse(&candidate).map_err(|e| format!("invalid url {raw:?}: {e}"))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(format!("unsupported url scheme {:?}", parsed.scheme()));
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(format!("url without host {raw:?}"));
    }
    Ok((candidate, note))
}

fn parse_share(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("non-numeric share {s:?}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("share {v} outside [0,1]"))
    }
}

/// Writes firms in the default column layout.
pub fn write_firms<W: io::Write>(out: W, firms: &[FirmRecord]) -> Result<(), RegistryError> {
    let c = ColumnMapping::default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        &c.firm_id,
        &c.url,
        &c.nace,
        &c.employees,
        &c.founding_year,
        &c.nuts3,
        &c.municipality,
        &c.macro_region,
        &c.urban_pole,
        &c.wideband,
    ])?;
    for f in firms {
        w.write_record([
            f.firm_id.clone(),
            f.homepage_url.clone(),
            f.nace_section.to_string(),
            f.employees.map(|e| e.to_string()).unwrap_or_default(),
            f.founding_year.map(|y| y.to_string()).unwrap_or_default(),
            f.nuts3_code.clone(),
            f.municipality_code.clone(),
            f.macro_region.to_string(),
            if f.urban_pole { "1" } else { "0" }.to_string(),
            f.wideband_share.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Municipality → share of households reached by fast broadband. Every value
/// lies in `[0,1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WidebandTable {
    shares: HashMap<String, f64>,
}

impl WidebandTable {
    /// Builds the table from `(line, municipality, share)` triples, failing on
    /// the first share outside `[0,1]`.
    pub fn from_rows<I, S>(rows: I) -> Result<Self, RegistryError>
    where
        I: IntoIterator<Item = (u64, S, f64)>,
        S: Into<String>,
    {
        let mut shares = HashMap::new();
        for (line, municipality, share) in rows {
            let municipality = municipality.into();
            if !(0.0..=1.0).contains(&share) {
                return Err(RegistryError::Data {
                    line,
                    reason: format!("municipality {municipality:?}: share {share} outside [0,1]"),
                });
            }
            shares.insert(municipality, share);
        }
        Ok(WidebandTable { shares })
    }

    pub fn get(&self, municipality: &str) -> Option<f64> {
        self.shares.get(municipality).copied()
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

pub fn load_wideband(path: &Path, delimiter: char) -> Result<WidebandTable, RegistryError> {
    let file = File::open(path).map_err(|source| RegistryError::Io { path: path.to_path_buf(), source })?;
    read_wideband(file, delimiter)
}

pub fn read_wideband<R: io::Read>(input: R, delimiter: char) -> Result<WidebandTable, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter_byte(delimiter)?).from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| RegistryError::MissingColumn(name.to_string()))
    };
    let (mi, si) = (find("municipality")?, find("share")?);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let raw = rec[si].trim();
        let share = raw
            .parse::<f64>()
            .map_err(|_| RegistryError::Data { line, reason: format!("non-numeric share {raw:?}") })?;
        rows.push((line, rec[mi].trim().to_string(), share));
    }
    WidebandTable::from_rows(rows)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    pub matched: usize,
    pub unmatched: usize,
    pub unmatched_firms: Vec<String>,
}

/// Sets each firm's wide-band share from its municipality. Unmatched firms
/// keep an absent share and are listed in the report.
pub fn join_wideband(firms: &[FirmRecord], coverage: &WidebandTable) -> (Vec<FirmRecord>, JoinReport) {
    let mut report = JoinReport::default();
    let joined = firms
        .iter()
        .map(|firm| {
            let mut firm = firm.clone();
            firm.wideband_share = coverage.get(&firm.municipality_code);
            match firm.wideband_share {
                Some(_) => report.matched += 1,
                None => {
                    report.unmatched += 1;
                    report.unmatched_firms.push(firm.firm_id.clone());
                }
            }
            firm
        })
        .collect();
    (joined, report)
}
