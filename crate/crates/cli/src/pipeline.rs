//! Pipeline stages. Each reads the files written by earlier stages from the
//! work directory and writes its own outputs plus `<stage>.manifest.json`.
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | crawl | registry file | `firms.csv`, `registry_rejects.csv`, `corpus/`, `crawl.jsonl` |
//! | extract | `firms.csv`, `corpus/` | `features.csv`, `extract_rejects.csv` |
//! | index | `features.csv` | `index.csv`, `bounds.json` |
//! | aggregate | `firms.csv`, `features.csv`, `index.csv` | `regions_<level>.csv`, `exclusions_<level>.csv` |
//! | cluster | `regions_<level>.csv` | `clusters_<level>.csv`, `centroids_<level>.csv`, `elbow_<level>.csv` |
//! | regress | `firms.csv`, `features.csv`, `index.csv` | `regress/<name>.csv`, `regress/<name>.txt`, `regress/table.txt` |
//! | report | `features.csv` | `feature_description.csv`, `feature_description.txt`, `correlation_matrix.csv` |
//!
//! Apart from manifests, outputs depend only on the inputs, the config and
//! the seed, so reruns are byte-identical.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use chrono::{Datelike, Utc};
use codai_core::crawler::{
    is_valid, write_entry, CorpusError, CrawlJob, CrawlLogEntry, CrawlResult, Crawler, FetchOutcome, ReplayCorpus,
};
use codai_core::extractor::extract_features;
use codai_core::features::{read_feature_file, write_feature_file, FeatureRow};
use codai_core::index::{read_index_file, score_population, write_index_file, IndexFile};
use codai_core::registry::{join_wideband, load_firms, load_wideband, FirmRecord, RegistrySchema};
use codai_core::spatial::{aggregate, read_region_file, write_region_file, Level, SpatialRow};
use codai_core::stats::{
    build_design, elbow, kmeans_fit, logit_fit, ols_fit_with, Design, DesignInput, FitResult, ModelKind, OlsOptions,
    RegressionSpec,
};
use codai_core::wayback::{years_old, CdxClient, SnapshotCache, SnapshotResolver};
use codai_core::{Feature, RawFeatures};
use serde_json::json;

use crate::config::Config;
use crate::manifest::RunManifest;
use crate::report;

pub const FIRMS_FILE: &str = "firms.csv";
pub const REGISTRY_REJECTS_FILE: &str = "registry_rejects.csv";
pub const CORPUS_DIR: &str = "corpus";
pub const CRAWL_LOG_FILE: &str = "crawl.jsonl";
pub const FEATURES_FILE: &str = "features.csv";
pub const EXTRACT_REJECTS_FILE: &str = "extract_rejects.csv";
pub const INDEX_FILE: &str = "index.csv";
pub const BOUNDS_FILE: &str = "bounds.json";

/// Everything a stage needs besides its input files.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub level: Level,
    pub replay: Option<PathBuf>,
}

impl Context {
    pub fn new(config: Config, out: impl Into<PathBuf>) -> Self {
        let seed = config.seed.unwrap_or(0);
        Context { config, out: out.into(), seed, level: Level::Nuts3, replay: None }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Path of an upstream output, or an error naming the stage that makes it.
    fn require(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            bail!("{} not found; run `codai {stage}` first", p.display());
        }
        Ok(p)
    }

    fn manifest(&self, stage: &str) -> RunManifest {
        RunManifest::start(stage, &self.config.digest(), self.seed)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    fn read_firms(&self) -> Result<Vec<FirmRecord>> {
        let p = self.require(FIRMS_FILE, "crawl")?;
        let loaded = load_firms(&p, &RegistrySchema::default())?;
        if let Some(r) = loaded.rejects.first() {
            bail!("{} line {}: {}", p.display(), r.line, r.reason);
        }
        Ok(loaded.firms)
    }

    fn read_features(&self) -> Result<Vec<FeatureRow>> {
        let p = self.require(FEATURES_FILE, "extract")?;
        let file = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
        read_feature_file(file).with_context(|| format!("reading {}", p.display()))
    }

    fn read_index(&self) -> Result<IndexFile> {
        let p = self.require(INDEX_FILE, "index")?;
        let file = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
        read_index_file(file).with_context(|| format!("reading {}", p.display()))
    }
}

fn write_rejects(w: impl Write, rows: &[(String, String)], key: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([key, "reason"])?;
    for (k, reason) in rows {
        w.write_record([k, reason])?;
    }
    w.flush()?;
    Ok(())
}

/// Fetches (or replays) every registry homepage.
pub fn cmd_crawl(ctx: &Context, registry: &Path) -> Result<RunManifest> {
    let mut manifest = ctx.manifest("crawl");
    fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let loaded = load_firms(registry, &ctx.config.registry)?;
    let mut firms = loaded.firms;
    for note in &loaded.notes {
        log::info!("registry line {}: {}", note.line, note.note);
    }
    if let Some(wb) = &ctx.config.wideband {
        let table = load_wideband(&wb.path, wb.delimiter)?;
        let (joined, report) = join_wideband(&firms, &table);
        firms = joined;
        manifest.details = json!({ "wideband_matched": report.matched, "wideband_unmatched": report.unmatched });
    }
    codai_core::registry::write_firms(ctx.create(FIRMS_FILE)?, &firms)?;
    let rejects: Vec<(String, String)> = loaded.rejects.iter().map(|r| (r.line.to_string(), r.reason.clone())).collect();
    write_rejects(ctx.create(REGISTRY_REJECTS_FILE)?, &rejects, "line")?;

    let results: Vec<CrawlResult> = match &ctx.replay {
        Some(root) => {
            let corpus = ReplayCorpus::open(root)?;
            manifest.replay_corpus = Some(root.display().to_string());
            firms
                .iter()
                .map(|f| match corpus.replay_fetch(&f.firm_id) {
                    Ok(r) => Ok(r),
                    Err(CorpusError::NotFound(_)) => Ok(CrawlResult::without_response(
                        &f.firm_id,
                        &f.homepage_url,
                        &f.homepage_url,
                        FetchOutcome::Timeout("not in replay corpus".into()),
                        0.0,
                        chrono::DateTime::UNIX_EPOCH,
                        0,
                    )),
                    Err(e) => Err(e),
                })
                .collect::<Result<_, _>>()?
        }
        None => {
            let crawler = Crawler::new(ctx.config.crawl.clone())?;
            manifest.crawl_policy = Some(ctx.config.crawl.clone());
            let jobs: Vec<CrawlJob> =
                firms.iter().map(|f| CrawlJob { firm_id: f.firm_id.clone(), url: f.homepage_url.clone() }).collect();
            crawler.crawl_all(&jobs)
        }
    };

    let corpus_dir = ctx.path(CORPUS_DIR);
    if corpus_dir.exists() {
        fs::remove_dir_all(&corpus_dir).with_context(|| format!("clearing {}", corpus_dir.display()))?;
    }
    fs::create_dir_all(&corpus_dir)?;
    let mut log = ctx.create(CRAWL_LOG_FILE)?;
    let c = &mut manifest.counts;
    c.input_firms = firms.len();
    c.rejected_rows = loaded.rejects.len();
    for r in &results {
        write_entry(&corpus_dir, r)?;
        writeln!(log, "{}", CrawlLogEntry::from_result(r).to_json_line())?;
        c.attempted += 1;
        if is_valid(r) {
            c.valid += 1;
        } else if r.is_robots_excluded() {
            c.robots_excluded += 1;
        } else {
            c.invalid += 1;
        }
    }
    log.flush()?;
    c.output_rows = c.valid;
    manifest.reference_year = ctx.config.reference_year;
    debug_assert!(manifest.counts.reconciles());
    manifest.finish(&ctx.out)
}

fn resolver(ctx: &Context) -> Result<SnapshotResolver> {
    let cache = match &ctx.config.extract.wayback_cache {
        Some(p) => SnapshotCache::open(p)?,
        None => SnapshotCache::in_memory(),
    };
    Ok(if ctx.config.extract.wayback_live {
        SnapshotResolver::with_live(cache, Box::new(CdxClient::public(&ctx.config.crawl.user_agent)?))
    } else {
        SnapshotResolver::offline(cache)
    })
}

/// Computes the ten features for every valid crawl.
pub fn cmd_extract(ctx: &Context) -> Result<RunManifest> {
    let mut manifest = ctx.manifest("extract");
    let firms = ctx.read_firms()?;
    let corpus = ReplayCorpus::open(ctx.require(CORPUS_DIR, "crawl")?)?;
    let mut fetched = Vec::with_capacity(firms.len());
    let mut rejects: Vec<(String, String)> = Vec::new();
    for f in &firms {
        match corpus.replay_fetch(&f.firm_id) {
            Ok(r) => fetched.push(r),
            Err(CorpusError::NotFound(_)) => rejects.push((f.firm_id.clone(), "not crawled".into())),
            Err(e) => return Err(e.into()),
        }
    }
    let reference_year = ctx
        .config
        .reference_year
        .or_else(|| fetched.iter().filter(|r| is_valid(r)).map(|r| r.fetched_at.year()).max())
        .unwrap_or_else(|| Utc::now().year());
    let resolver = resolver(ctx)?;
    let cfg = &ctx.config.extract;
    let mut rows = Vec::new();
    for r in &fetched {
        if !is_valid(r) {
            let reason = match &r.outcome {
                FetchOutcome::Status(200) => "empty body".to_string(),
                FetchOutcome::Status(s) => format!("HTTP {s}"),
                FetchOutcome::Timeout(note) => format!("timeout: {note}"),
                FetchOutcome::RobotsExcluded => "robots-excluded".to_string(),
            };
            rejects.push((r.firm_id.clone(), reason));
            continue;
        }
        let age = match resolver.first_snapshot_year(&r.requested_url) {
            Ok(lookup) => years_old(lookup.first_year, reference_year, cfg.age_cap),
            Err(e) => {
                rejects.push((r.firm_id.clone(), e.to_string()));
                continue;
            }
        };
        match extract_features(r, age, cfg.request_time) {
            Ok(features) => rows.push(FeatureRow { firm_id: r.firm_id.clone(), features }),
            Err(e) => rejects.push((r.firm_id.clone(), e.to_string())),
        }
    }
    write_feature_file(ctx.create(FEATURES_FILE)?, &rows)?;
    write_rejects(ctx.create(EXTRACT_REJECTS_FILE)?, &rejects, "firm_id")?;
    manifest.reference_year = Some(reference_year);
    let c = &mut manifest.counts;
    c.input_firms = firms.len();
    c.attempted = fetched.len();
    c.valid = fetched.iter().filter(|r| is_valid(r)).count();
    c.robots_excluded = fetched.iter().filter(|r| r.is_robots_excluded()).count();
    c.invalid = c.attempted - c.valid - c.robots_excluded;
    c.excluded_rows = rejects.len();
    c.output_rows = rows.len();
    manifest.finish(&ctx.out)
}

/// Normalises features population-wide and scores the selected scheme.
pub fn cmd_index(ctx: &Context) -> Result<RunManifest> {
    let mut manifest = ctx.manifest("index");
    let rows = ctx.read_features()?;
    let scheme = ctx.config.scheme()?;
    let invert = ctx.config.invert_set()?;
    if rows.is_empty() {
        bail!("{} has no rows; nothing to index", ctx.path(FEATURES_FILE).display());
    }
    let pairs: Vec<(String, RawFeatures)> = rows.into_iter().map(|r| (r.firm_id, r.features)).collect();
    let (bounds, scores) = score_population(&pairs, &invert, &scheme)?;
    write_index_file(ctx.create(INDEX_FILE)?, &scheme, &scores)?;
    fs::write(ctx.path(BOUNDS_FILE), serde_json::to_string_pretty(&bounds)? + "\n")?;
    manifest.counts.input_firms = pairs.len();
    manifest.counts.output_rows = scores.len();
    manifest.details = json!({
        "scheme": scheme.name(),
        "groups": scheme.groups(),
        "invert": invert.iter().map(|f| f.name()).collect::<Vec<_>>(),
        "max_total": scheme.max_total(),
    });
    manifest.finish(&ctx.out)
}

fn region_code(firm: &FirmRecord, level: Level) -> Option<String> {
    let code = match level {
        Level::Nuts3 => &firm.nuts3_code,
        Level::Municipality => &firm.municipality_code,
    };
    (!code.trim().is_empty()).then(|| code.clone())
}

/// Groups firm rows by territorial unit.
pub fn cmd_aggregate(ctx: &Context) -> Result<RunManifest> {
    let level = ctx.level;
    let mut manifest = ctx.manifest(&format!("aggregate_{level}"));
    let firms: HashMap<String, FirmRecord> = ctx.read_firms()?.into_iter().map(|f| (f.firm_id.clone(), f)).collect();
    let features = ctx.read_features()?;
    let index = ctx.read_index()?;
    let by_id: HashMap<&str, &codai_core::index::IndexRow> = index.rows.iter().map(|r| (r.firm_id.as_str(), r)).collect();
    let mut rows = Vec::with_capacity(features.len());
    for fr in &features {
        let scored = by_id
            .get(fr.firm_id.as_str())
            .ok_or_else(|| anyhow!("firm {} has features but no index row; rerun `codai index`", fr.firm_id))?;
        let region = firms.get(&fr.firm_id).and_then(|f| region_code(f, level));
        rows.push(SpatialRow::new(&fr.firm_id, region, &fr.features, &scored.normalized, scored.total));
    }
    let min_count = ctx.config.aggregate.min_count.unwrap_or_else(|| level.default_min_count());
    let (regions, exclusions) = aggregate(&rows, level, min_count)?;
    write_region_file(ctx.create(&format!("regions_{level}.csv"))?, &regions)?;
    exclusions.write_csv(ctx.create(&format!("exclusions_{level}.csv"))?)?;
    manifest.counts.input_firms = rows.len();
    manifest.counts.excluded_rows = exclusions.excluded_rows();
    manifest.counts.output_rows = regions.len();
    manifest.details = json!({ "level": level, "min_count": min_count });
    manifest.finish(&ctx.out)
}

/// Relabels clusters in order of first appearance so labels do not depend on
/// seeding order.
fn canonical_labels(assignments: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &a in assignments {
        if map[a] == usize::MAX {
            map[a] = next;
            next += 1;
        }
    }
    for slot in map.iter_mut().filter(|m| **m == usize::MAX) {
        *slot = next;
        next += 1;
    }
    (assignments.iter().map(|a| map[*a]).collect(), map)
}

/// k-means on the regional aggregates, plus the elbow curve.
pub fn cmd_cluster(ctx: &Context) -> Result<RunManifest> {
    let level = ctx.level;
    let mut manifest = ctx.manifest(&format!("cluster_{level}"));
    let src = ctx.require(&format!("regions_{level}.csv"), &format!("aggregate --level {level}"))?;
    let regions = read_region_file(File::open(&src)?)?;
    let points: Vec<Vec<f64>> = regions.iter().map(|r| r.values.to_vec()).collect();
    let cfg = &ctx.config.cluster;
    if cfg.k > points.len() {
        bail!("k = {} but only {} regions in {}", cfg.k, points.len(), src.display());
    }
    let model = kmeans_fit(&points, cfg.k, ctx.seed, cfg.max_iter, cfg.tol)?;
    let (labels, map) = canonical_labels(&model.assignments, model.k);

    let mut w = csv::Writer::from_writer(ctx.create(&format!("clusters_{level}.csv"))?);
    w.write_record(["region_code", "cluster"])?;
    for (r, l) in regions.iter().zip(&labels) {
        w.write_record([r.region_code.clone(), l.to_string()])?;
    }
    w.flush()?;

    let mut centroids = vec![Vec::new(); model.k];
    for (old, new) in map.iter().enumerate() {
        centroids[*new] = model.centroids[old].clone();
    }
    let mut w = csv::Writer::from_writer(ctx.create(&format!("centroids_{level}.csv"))?);
    let mut header = vec!["cluster".to_string(), "n_regions".into()];
    header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    w.write_record(&header)?;
    for (j, c) in centroids.iter().enumerate() {
        let mut rec = vec![j.to_string(), labels.iter().filter(|l| **l == j).count().to_string()];
        rec.extend(c.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let k_max = cfg.k_max.min(points.len());
    let curve = elbow(&points, cfg.k_min.min(k_max), k_max, ctx.seed, cfg.max_iter, cfg.tol)?;
    let mut w = csv::Writer::from_writer(ctx.create(&format!("elbow_{level}.csv"))?);
    w.write_record(["k", "inertia"])?;
    for (k, inertia) in &curve.inertias {
        w.write_record([k.to_string(), inertia.to_string()])?;
    }
    w.flush()?;

    manifest.counts.input_firms = regions.iter().map(|r| r.n_firms).sum();
    manifest.counts.output_rows = regions.len();
    manifest.details = json!({
        "level": level,
        "k": model.k,
        "inertia": model.inertia,
        "iterations": model.iterations_run,
        "converged": model.converged,
        "suggested_k": curve.suggested_k,
    });
    manifest.finish(&ctx.out)
}

/// Response lookup for regression dependents: the index total (by scheme
/// name or `total`), an index dimension, or a raw feature.
type Lookup<'a> = Box<dyn Fn(&str) -> Option<f64> + 'a>;

struct Responses {
    scheme: String,
    index: IndexFile,
    features: HashMap<String, RawFeatures>,
}

impl Responses {
    fn getter(&self, dependent: &str) -> Result<Lookup<'_>> {
        let by_id: HashMap<&str, usize> = self.index.rows.iter().enumerate().map(|(i, r)| (r.firm_id.as_str(), i)).collect();
        if dependent == self.scheme || dependent == "total" {
            return Ok(Box::new(move |id| by_id.get(id).map(|i| self.index.rows[*i].total)));
        }
        if let Some(d) = self.index.dimension_names.iter().position(|n| n == dependent) {
            return Ok(Box::new(move |id| by_id.get(id).map(|i| self.index.rows[*i].dimensions[d])));
        }
        if let Ok(f) = dependent.parse::<Feature>() {
            return Ok(Box::new(move |id| self.features.get(id).map(|r| r.get(f))));
        }
        bail!(
            "unknown dependent {dependent:?}: expected {}, total, a dimension ({}) or a feature name",
            self.scheme,
            self.index.dimension_names.join(", ")
        )
    }
}

/// Removes dummy columns that are zero on every row: a level with no firms in
/// the sample (a sector, or a macro-region) has no estimable effect. Other
/// collinearity is left for the fit to report.
fn drop_absent_levels(design: &mut Design) -> Vec<String> {
    let is_dummy = |c: &str| c != "const" && c != "firm_age" && c != "wideband";
    let keep: Vec<usize> = (0..design.columns.len())
        .filter(|&j| !is_dummy(&design.columns[j]) || design.x.column(j).iter().any(|v| *v != 0.0))
        .collect();
    if keep.len() == design.columns.len() || design.x.nrows() == 0 {
        return Vec::new();
    }
    let dropped = (0..design.columns.len()).filter(|j| !keep.contains(j)).map(|j| design.columns[j].clone()).collect();
    design.x = design.x.select_columns(&keep);
    design.columns = keep.iter().map(|&j| design.columns[j].clone()).collect();
    dropped
}

/// Fits every configured regression.
pub fn cmd_regress(ctx: &Context) -> Result<RunManifest> {
    let mut manifest = ctx.manifest("regress");
    let firms = ctx.read_firms()?;
    let features = ctx.read_features()?;
    let index = ctx.read_index()?;
    let extract = RunManifest::read(&ctx.require("extract.manifest.json", "extract")?)?;
    let index_manifest = RunManifest::read(&ctx.require("index.manifest.json", "index")?)?;
    let reference_year = extract.reference_year.ok_or_else(|| anyhow!("extract manifest lacks reference_year"))?;
    let scheme = index_manifest.details["scheme"].as_str().unwrap_or("total").to_string();

    let specs: Vec<RegressionSpec> = if ctx.config.regress.specs.is_empty() {
        index.dimension_names.iter().chain(std::iter::once(&scheme)).map(|d| RegressionSpec::ols(d)).collect()
    } else {
        ctx.config.regress.specs.clone()
    };
    let with_features: HashMap<String, RawFeatures> = features.into_iter().map(|r| (r.firm_id, r.features)).collect();
    let responses = Responses { scheme, index, features: with_features };
    let mut fits: Vec<(String, FitResult)> = Vec::new();
    let mut excluded = serde_json::Map::new();
    let mut dropped = serde_json::Map::new();
    for spec in &specs {
        let get = responses.getter(&spec.dependent)?;
        let inputs: Vec<DesignInput> = firms
            .iter()
            .filter(|f| responses.features.contains_key(&f.firm_id))
            .map(|f| DesignInput { firm: f, response: get(&f.firm_id) })
            .collect();
        let mut design = build_design(&inputs, spec, reference_year)?;
        let absent = drop_absent_levels(&mut design);
        for c in &absent {
            log::info!("regression {:?}: no observations for {c}, column dropped", spec.name);
        }
        let fit = match spec.model {
            ModelKind::Ols => ols_fit_with(&design.x, &design.y, &design.columns, OlsOptions { robust: spec.robust }),
            ModelKind::Logit => logit_fit(&design.x, &design.y, &design.columns),
        }
        .with_context(|| format!("regression {:?}", spec.name))?;
        fit.write_coefficient_table(ctx.create(&format!("regress/{}.csv", spec.name))?)?;
        let single = report::render_regression_table(&[(spec.name.clone(), fit.clone())]);
        ctx.create(&format!("regress/{}.txt", spec.name))?.write_all(single.as_bytes())?;
        excluded.insert(spec.name.clone(), json!(design.excluded.len()));
        dropped.insert(spec.name.clone(), json!(absent));
        fits.push((spec.name.clone(), fit));
    }
    ctx.create("regress/table.txt")?.write_all(report::render_regression_table(&fits).as_bytes())?;
    manifest.reference_year = Some(reference_year);
    manifest.counts.input_firms = firms.len();
    manifest.counts.output_rows = fits.len();
    manifest.details = json!({ "specs": specs.iter().map(|s| &s.name).collect::<Vec<_>>(), "excluded_rows": excluded, "dropped_columns": dropped });
    manifest.finish(&ctx.out)
}

/// Descriptive statistics and the correlation matrix of the features.
pub fn cmd_report(ctx: &Context) -> Result<RunManifest> {
    let mut manifest = ctx.manifest("report");
    let rows = ctx.read_features()?;
    let (csv, table) = report::feature_description(&rows);
    fs::write(ctx.path("feature_description.csv"), csv)?;
    fs::write(ctx.path("feature_description.txt"), table)?;
    fs::write(ctx.path("correlation_matrix.csv"), report::correlation_matrix(&rows))?;
    manifest.counts.input_firms = rows.len();
    manifest.counts.output_rows = rows.len();
    manifest.finish(&ctx.out)
}
