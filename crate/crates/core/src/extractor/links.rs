use std::collections::BTreeSet;

use url::Url;

use super::html::Page;
use super::psl::registrable_domain;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkCounts {
    pub unique_links_in: u32,
    pub unique_links_out: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SocialFlags {
    pub facebook: bool,
    pub instagram: bool,
    pub linkedin: bool,
}

/// Distinct resolved http(s) anchor targets, as serialized URL strings.
pub fn resolved_targets(page: &Page, base: &Url) -> BTreeSet<String> {
    page.anchor_targets()
        .filter_map(|href| base.join(href.trim()).ok())
        .filter(|u| matches!(u.scheme(), "http" | "https") && u.host_str().is_some())
        .map(String::from)
        .collect()
}

/// Counts unique anchor targets on the site's registrable domain (internal)
/// and elsewhere (external). Targets are resolved against `base` and
/// deduplicated by exact resolved string; non-http(s) schemes are ignored.
pub fn extract_links(page: &Page, base: &Url) -> LinkCounts {
    let home = base.host_str().map(registrable_domain);
    let mut counts = LinkCounts::default();
    for target in resolved_targets(page, base) {
        let host = Url::parse(&target).ok().and_then(|u| u.host_str().map(registrable_domain));
        if host.is_some() && host == home {
            counts.unique_links_in += 1;
        } else {
            counts.unique_links_out += 1;
        }
    }
    counts
}

fn host_is(host: &str, domain: &str) -> bool {
    host == domain || host.strip_suffix(domain).is_some_and(|rest| rest.ends_with('.'))
}

/// Flags platforms linked from any absolute anchor whose host is the
/// platform domain or one of its subdomains.
pub fn detect_social(page: &Page) -> SocialFlags {
    let mut flags = SocialFlags::default();
    for href in page.anchor_targets() {
        let Ok(url) = Url::parse(href.trim()) else { continue };
        let Some(host) = url.host_str() else { continue };
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        flags.facebook |= host_is(&host, "facebook.com");
        flags.instagram |= host_is(&host, "instagram.com");
        flags.linkedin |= host_is(&host, "linkedin.com");
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::html::parse_html;
    use proptest::prelude::*;

    fn base() -> Url {
        Url::parse("https://acme.it").unwrap()
    }

    fn anchors(hrefs: &[&str]) -> Page {
        parse_html(&hrefs.iter().map(|h| format!("<a href=\"{h}\">x</a>")).collect::<String>())
    }

    #[test]
    fn dedup_and_split() {
        let page = anchors(&["/a", "/a", "/b", "https://other.com/x"]);
        assert_eq!(extract_links(&page, &base()), LinkCounts { unique_links_in: 2, unique_links_out: 1 });
    }

    #[test]
    fn no_anchors() {
        assert_eq!(extract_links(&parse_html("<p>hi</p>"), &base()), LinkCounts::default());
    }

    #[test]
    fn non_http_schemes_excluded() {
        let page = anchors(&["mailto:info@acme.it", "tel:+39061234", "javascript:void(0)"]);
        assert_eq!(extract_links(&page, &base()), LinkCounts::default());
    }

    #[test]
    fn subdomains_are_internal() {
        let page = anchors(&["https://shop.acme.it/", "http://www.acme.it/contatti", "https://acme.com/"]);
        assert_eq!(extract_links(&page, &base()), LinkCounts { unique_links_in: 2, unique_links_out: 1 });
    }

    #[test]
    fn query_and_fragment_distinguish_links() {
        let page = anchors(&["/a", "/a#top", "/a?x=1"]);
        assert_eq!(extract_links(&page, &base()).unique_links_in, 3);
    }

    #[test]
    fn social_host_matching() {
        assert_eq!(
            detect_social(&anchors(&["https://www.facebook.com/acme"])),
            SocialFlags { facebook: true, instagram: false, linkedin: false }
        );
        assert_eq!(
            detect_social(&anchors(&["https://it.linkedin.com/company/acme"])),
            SocialFlags { facebook: false, instagram: false, linkedin: true }
        );
        assert_eq!(detect_social(&anchors(&["/about", "https://example.com"])), SocialFlags::default());
        assert_eq!(detect_social(&anchors(&["https://notfacebook.com/x", "https://facebook.com.evil.it/"])), SocialFlags::default());
        assert!(detect_social(&anchors(&["HTTPS://WWW.INSTAGRAM.COM/acme"])).instagram);
    }

    fn arb_href() -> impl Strategy<Value = String> {
        prop_oneof![
            "/[a-c]{0,2}",
            "https://(acme\\.it|www\\.acme\\.it|other\\.com)/[a-c]{0,2}",
            Just("mailto:a@acme.it".to_string()),
            Just("#top".to_string()),
        ]
    }

    proptest! {
        #[test]
        fn duplicating_every_anchor_keeps_counts(hrefs in prop::collection::vec(arb_href(), 0..12)) {
            let refs: Vec<&str> = hrefs.iter().map(String::as_str).collect();
            let doubled: Vec<&str> = refs.iter().flat_map(|h| [*h, *h]).collect();
            prop_assert_eq!(extract_links(&anchors(&refs), &base()), extract_links(&anchors(&doubled), &base()));
        }

        #[test]
        fn counts_bounded_by_distinct_targets(hrefs in prop::collection::vec(arb_href(), 0..12)) {
            let refs: Vec<&str> = hrefs.iter().map(String::as_str).collect();
            let page = anchors(&refs);
            let c = extract_links(&page, &base());
            prop_assert!((c.unique_links_in + c.unique_links_out) as usize <= resolved_targets(&page, &base()).len());
        }
    }
}
