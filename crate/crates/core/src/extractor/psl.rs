//! Registrable-domain lookup against the bundled public suffix list
//! (`data/public_suffix_list.dat`).

use std::collections::HashSet;
use std::net::IpAddr;
use std::sync::OnceLock;

const LIST: &str = include_str!("../../data/public_suffix_list.dat");

struct SuffixRules {
    exact: HashSet<String>,
    /// Parents of `*.parent` rules.
    wildcard: HashSet<String>,
    /// Targets of `!exception` rules.
    exception: HashSet<String>,
}

fn rules() -> &'static SuffixRules {
    static RULES: OnceLock<SuffixRules> = OnceLock::new();
    RULES.get_or_init(|| {
        let mut r = SuffixRules { exact: HashSet::new(), wildcard: HashSet::new(), exception: HashSet::new() };
        for line in LIST.lines() {
            let line = line.split_whitespace().next().unwrap_or("");
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let (set, rule) = if let Some(rest) = line.strip_prefix('!') {
                (&mut r.exception, rest)
            } else if let Some(rest) = line.strip_prefix("*.") {
                (&mut r.wildcard, rest)
            } else {
                (&mut r.exact, line)
            };
            let ascii = idna::domain_to_ascii(rule).unwrap_or_else(|_| rule.to_ascii_lowercase());
            set.insert(ascii);
        }
        r
    })
}

/// Number of trailing labels forming the public suffix of `labels`.
fn suffix_len(labels: &[&str]) -> usize {
    let r = rules();
    let n = labels.len();
    for i in 0..n {
        let candidate = labels[i..].join(".");
        if r.exception.contains(&candidate) {
            return n - i - 1;
        }
        if r.exact.contains(&candidate) {
            return n - i;
        }
        if i > 0 && r.wildcard.contains(&candidate) {
            return n - i + 1;
        }
    }
    // Implicit "*" rule.
    1
}

/// Registrable domain (public suffix plus one label) of `host`. IP literals,
/// single-label hosts and hosts that are themselves public suffixes are
/// returned unchanged, lowercased.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    let bare = host.trim_start_matches('[').trim_end_matches(']');
    if bare.parse::<IpAddr>().is_ok() {
        return host;
    }
    let labels: Vec<&str> = host.split('.').collect();
    let suffix = suffix_len(&labels).min(labels.len());
    if suffix >= labels.len() {
        return host;
    }
    labels[labels.len() - suffix - 1..].join(".")
}
