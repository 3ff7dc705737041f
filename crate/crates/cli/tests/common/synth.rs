//! Synthetic registry plus replay corpus with planted regional gaps.
//!
//! Regions come in three tiers (leading, middling, lagging). Each firm's page,
//! headers, timings and archive age are drawn from its tier's profile, so the
//! tiers separate clearly once features are averaged by region.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use codai_core::crawler::{write_entry, CrawlResult, FetchOutcome, HeaderList, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Leading,
    Middling,
    Lagging,
}

struct Profile {
    /// Chance each optional best-practice check passes.
    practice: f64,
    /// Chance each security header is sent.
    header: f64,
    links_in: (u32, u32),
    links_out: (u32, u32),
    social: f64,
    years: (i32, i32),
    seconds: (f64, f64),
}

impl Tier {
    fn profile(self) -> Profile {
        match self {
            Tier::Leading => Profile {
                practice: 0.95,
                header: 0.9,
                links_in: (25, 40),
                links_out: (8, 14),
                social: 0.85,
                years: (16, 24),
                seconds: (0.15, 0.6),
            },
            Tier::Middling => Profile {
                practice: 0.6,
                header: 0.45,
                links_in: (10, 20),
                links_out: (3, 7),
                social: 0.45,
                years: (7, 13),
                seconds: (1.0, 2.0),
            },
            Tier::Lagging => Profile {
                practice: 0.15,
                header: 0.05,
                links_in: (0, 6),
                links_out: (0, 2),
                social: 0.08,
                years: (0, 4),
                seconds: (3.0, 6.0),
            },
        }
    }
}

pub struct Scenario {
    pub dir: PathBuf,
    pub registry: PathBuf,
    pub corpus: PathBuf,
    pub config: PathBuf,
    /// Region code and its planted tier.
    pub regions: Vec<(String, Tier)>,
}

const SECURITY_HEADERS: [&str; 6] = [
    "Strict-Transport-Security",
    "Content-Security-Policy",
    "X-Frame-Options",
    "X-Content-Type-Options",
    "Referrer-Policy",
    "Permissions-Policy",
];
const SECTORS: [char; 12] = ['A', 'C', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'S'];

fn page(rng: &mut ChaCha8Rng, p: &Profile, host: &str) -> String {
    let mut pass = || rng.random_bool(p.practice);
    let (doctype, charset, clean, lang, viewport, secure_media, alt, title, iframe) =
        (pass(), pass(), pass(), pass(), pass(), pass(), pass(), pass(), pass());
    let mut html = String::new();
    if doctype {
        html.push_str("<!DOCTYPE html>\n");
    }
    html.push_str(if lang { "<html lang=\"it\">" } else { "<html>" });
    html.push_str("<head>");
    if charset {
        html.push_str("<meta charset=\"utf-8\">");
    }
    if viewport {
        html.push_str("<meta name=\"viewport\" content=\"width=device-width\">");
    }
    if title {
        let _ = write!(html, "<title>{host}</title>");
    }
    html.push_str("</head><body>\n");
    if !clean {
        html.push_str("<center>Benvenuti</center>");
    }
    let scheme = if secure_media { "https" } else { "http" };
    let _ = write!(html, "<img src=\"{scheme}://cdn.{host}/logo.png\"{}>", if alt { " alt=\"logo\"" } else { "" });
    let _ = writeln!(html, "<iframe src=\"/mappa\"{}></iframe>", if iframe { " title=\"mappa\"" } else { "" });
    for i in 0..rng.random_range(p.links_in.0..=p.links_in.1) {
        let _ = writeln!(html, "<a href=\"/pagina-{i}\">p{i}</a>");
    }
    for i in 0..rng.random_range(p.links_out.0..=p.links_out.1) {
        let _ = writeln!(html, "<a href=\"https://partner{i}.example.com/\">x</a>");
    }
    for platform in ["facebook", "instagram", "linkedin"] {
        if rng.random_bool(p.social) {
            let _ = writeln!(html, "<a href=\"https://www.{platform}.com/{host}\">{platform}</a>");
        }
    }
    html.push_str("</body></html>\n");
    html
}

/// Writes `n_regions` NUTS-3 regions of `per_region` firms each into `dir`.
/// Tiers are assigned round-robin; leading and middling regions are North,
/// lagging ones Centre.
pub fn scenario(dir: &Path, n_regions: usize, per_region: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    let fetched_at = Utc.with_ymd_and_hms(2021, 6, 1, 8, 0, 0).unwrap();
    let mut registry = String::from("firm_id,url,nace,employees,founding_year,nuts3,municipality,macro_region,urban_pole,wideband\n");
    let mut wayback = String::new();
    let mut regions = Vec::new();
    for r in 0..n_regions {
        let tier = [Tier::Leading, Tier::Middling, Tier::Lagging][r % 3];
        let code = format!("IT{r:03}");
        let macro_region = if tier == Tier::Lagging { "Centre" } else { "North" };
        let p = tier.profile();
        for i in 0..per_region {
            let id = format!("{code}-{i:03}");
            let host = format!("www.firm{r}x{i}.it");
            let url = format!("https://{host}");
            let employees = [3, 20, 120, 600][rng.random_range(0..4)];
            let _ = writeln!(
                registry,
                "{id},{url},{},{employees},{},{code},{code}{:02},{macro_region},{},{:.3}",
                SECTORS[rng.random_range(0..SECTORS.len())],
                rng.random_range(1950..2019),
                i % 4,
                u8::from(rng.random_bool(0.4)),
                rng.random_range(0.1..0.9),
            );
            let age = rng.random_range(p.years.0..=p.years.1);
            let _ = writeln!(wayback, "{host},{}", 2021 - age);

            let mut headers = HeaderList::new();
            headers.push("Content-Type", "text/html; charset=utf-8");
            for h in SECURITY_HEADERS {
                if rng.random_bool(p.header) {
                    headers.push(h, "1");
                }
            }
            if !rng.random_bool(p.header) {
                headers.push("Set-Cookie", "sid=1; HttpOnly");
            }
            let total = rng.random_range(p.seconds.0..p.seconds.1);
            let body = page(&mut rng, &p, &host);
            let result = CrawlResult {
                firm_id: id,
                requested_url: url.clone(),
                final_url: format!("{url}/"),
                outcome: FetchOutcome::Status(200),
                scheme: Scheme::Https,
                ttfb_seconds: total * 0.3,
                total_seconds: total,
                response_headers: headers,
                body: body.into_bytes(),
                fetched_at,
                redirect_count: 0,
            };
            write_entry(&corpus, &result).unwrap();
        }
        regions.push((code, tier));
    }
    let registry_path = dir.join("registry.csv");
    fs::write(&registry_path, registry).unwrap();
    fs::write(dir.join("wayback.csv"), wayback).unwrap();
    let config = dir.join("codai.toml");
    fs::write(&config, format!("seed = {seed}\nreference_year = 2021\n\n[extract]\nwayback_cache = \"wayback.csv\"\n")).unwrap();
    Scenario { dir: dir.to_path_buf(), registry: registry_path, corpus, config, regions }
}
