//! Report tables: coefficient cells, regression tables, descriptive
//! statistics and the feature correlation matrix.

use std::fmt::Write as _;

use codai_core::features::FeatureRow;
use codai_core::stats::{FitResult, ModelKind};
use codai_core::Feature;

/// `*` p < 0.05, `**` p < 0.01, `***` p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Coefficient with stars, then the standard error in parentheses, both to
/// three decimals: `-0.075*** (0.002)`. Tables print the two parts on
/// separate lines.
pub fn render_coefficient(coef: f64, se: f64, p: f64) -> String {
    let (top, bottom) = coefficient_lines(coef, se, p);
    format!("{top} {bottom}")
}

pub fn coefficient_lines(coef: f64, se: f64, p: f64) -> (String, String) {
    (format!("{coef:.3}{}", stars(p)), format!("({se:.3})"))
}

/// Row label for a design column.
pub fn term_label(column: &str) -> String {
    match column {
        "const" => "Constant".into(),
        "micro" => "Micro firms".into(),
        "medium" => "Mid-sized firms".into(),
        "large" => "Large firms".into(),
        "urban_pole" => "Urban area".into(),
        "north" => "North".into(),
        "south" => "South".into(),
        "firm_age" => "Firm age".into(),
        "wideband" => "Wide_band".into(),
        other => match other.strip_prefix("nace_") {
            Some(s) => format!("NACE sector {s}"),
            None => other.to_string(),
        },
    }
}

/// Thousands separated with commas: `182705` → `182,705`.
pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Plain-text table with one column per fit. Terms appear in first-seen
/// order; each cell takes two lines, coefficient over standard error.
pub fn render_regression_table(fits: &[(String, FitResult)]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for (_, fit) in fits {
        for t in &fit.terms {
            if !terms.contains(&t.as_str()) {
                terms.push(t);
            }
        }
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(fits.iter().map(|(name, _)| name.clone()));
    rows.push(header);
    let mut rules = vec![0];
    for term in &terms {
        let mut top = vec![term_label(term)];
        let mut bottom = vec![String::new()];
        for (_, fit) in fits {
            match fit.terms.iter().position(|t| t == term) {
                Some(i) => {
                    let (a, b) = coefficient_lines(fit.coefficients[i], fit.standard_errors[i], fit.p_values[i]);
                    top.push(a);
                    bottom.push(b);
                }
                None => {
                    top.push(String::new());
                    bottom.push(String::new());
                }
            }
        }
        rows.push(top);
        rows.push(bottom);
    }
    rules.push(rows.len() - 1);
    let stat = |label: &str, f: &dyn Fn(&FitResult) -> String| {
        let mut row = vec![label.to_string()];
        row.extend(fits.iter().map(|(_, fit)| f(fit)));
        row
    };
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    if fits.iter().any(|(_, f)| f.model == ModelKind::Ols) {
        rows.push(stat("R-squared:", &|f| opt(f.r_squared)));
        rows.push(stat("Adj. R-squared:", &|f| opt(f.adj_r_squared)));
    }
    if fits.iter().any(|(_, f)| f.model == ModelKind::Logit) {
        rows.push(stat("Pseudo R-squared:", &|f| opt(f.pseudo_r_squared)));
    }
    rows.push(stat("AIC", &|f| format!("{:.3}", f.aic)));
    rows.push(stat("BIC", &|f| format!("{:.3}", f.bic)));
    rules.push(rows.len() - 1);
    rows.push(stat("N. of observations", &|f| group_thousands(f.n_observations)));
    layout(&rows, &rules)
}

/// Left-aligned first column, right-aligned others, a rule after each row
/// index listed in `rules_after`.
fn layout(rows: &[Vec<String>], rules_after: &[usize]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..ncols).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    let total = widths.iter().sum::<usize>() + 2 * ncols.saturating_sub(1);
    let mut out = String::new();
    out.push_str(&"=".repeat(total));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut line = String::new();
        for (j, w) in widths.iter().enumerate() {
            let cell = row.get(j).map(String::as_str).unwrap_or("");
            if j == 0 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "  {cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if rules_after.contains(&i) {
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out.push_str(&"=".repeat(total));
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Describe {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); NaN for one row.
    pub std: f64,
}

pub fn describe(values: &[f64]) -> Option<Describe> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some(Describe {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { f64::NAN },
    })
}

/// Pearson correlation; NaN when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

fn columns(rows: &[FeatureRow]) -> Vec<Vec<f64>> {
    Feature::ALL.iter().map(|f| rows.iter().map(|r| r.features.get(*f)).collect()).collect()
}

/// `feature,min,max,mean,std` rows plus the same as a text table.
pub fn feature_description(rows: &[FeatureRow]) -> (String, String) {
    let cols = columns(rows);
    let mut csv = String::from("feature,min,max,mean,std\n");
    let mut table = vec![vec![String::new(), "min".into(), "max".into(), "mean".into(), "std".into()]];
    for (f, values) in Feature::ALL.iter().zip(&cols) {
        let d = describe(values);
        let cells: Vec<String> = match d {
            Some(d) => [d.min, d.max, d.mean, d.std].iter().map(|v| format!("{v:.3}")).collect(),
            None => vec![String::new(); 4],
        };
        let _ = writeln!(csv, "{},{}", f.column(), cells.join(","));
        let mut row = vec![f.column().to_string()];
        row.extend(cells);
        table.push(row);
    }
    (csv, layout(&table, &[0]))
}

/// Correlation matrix as CSV, three decimals.
pub fn correlation_matrix(rows: &[FeatureRow]) -> String {
    let cols = columns(rows);
    let mut out = String::new();
    out.push_str(&std::iter::once("").chain(Feature::ALL.iter().map(|f| f.column())).collect::<Vec<_>>().join(","));
    out.push('\n');
    for (i, f) in Feature::ALL.iter().enumerate() {
        out.push_str(f.column());
        for j in 0..cols.len() {
            let _ = write!(out, ",{:.3}", pearson(&cols[i], &cols[j]));
        }
        out.push('\n');
    }
    out
}
