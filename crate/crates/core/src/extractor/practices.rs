//! Static best-practices audit: ten checks, score = passed / 10.

use crate::crawler::Scheme;

use super::html::Page;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Doctype,
    Charset,
    NoDeprecatedTags,
    HtmlLang,
    Viewport,
    Https,
    NoMixedContent,
    ImageAlt,
    Title,
    IframeTitle,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Doctype,
        Check::Charset,
        Check::NoDeprecatedTags,
        Check::HtmlLang,
        Check::Viewport,
        Check::Https,
        Check::NoMixedContent,
        Check::ImageAlt,
        Check::Title,
        Check::IframeTitle,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Check::Doctype => "doctype declared",
            Check::Charset => "charset declared",
            Check::NoDeprecatedTags => "no font, center or marquee elements",
            Check::HtmlLang => "html element has a lang attribute",
            Check::Viewport => "viewport meta tag present",
            Check::Https => "final URL uses https",
            Check::NoMixedContent => "https page without http:// subresources",
            Check::ImageAlt => "every img has an alt attribute",
            Check::Title => "nonempty document title",
            Check::IframeTitle => "every iframe has a nonempty title",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PracticesAudit {
    pub passed: [bool; 10],
}

impl PracticesAudit {
    pub fn passed_count(&self) -> usize {
        self.passed.iter().filter(|p| **p).count()
    }

    pub fn score(&self) -> f64 {
        self.passed_count() as f64 / 10.0
    }

    pub fn failed(&self) -> impl Iterator<Item = Check> + '_ {
        Check::ALL.into_iter().zip(self.passed).filter(|(_, p)| !p).map(|(c, _)| c)
    }
}

const DEPRECATED: [&str; 3] = ["font", "center", "marquee"];
const SUBRESOURCE_SRC: [&str; 8] = ["img", "script", "iframe", "audio", "video", "source", "embed", "track"];

fn nonempty(v: Option<&str>) -> bool {
    v.is_some_and(|s| !s.trim().is_empty())
}

fn is_plain_http(v: &str) -> bool {
    let v = v.trim();
    v.len() >= 7 && v[..7].eq_ignore_ascii_case("http://")
}

/// The mixed-content check only passes on an https page: an http page cannot
/// deliver its subresources securely.
pub fn audit(page: &Page, header_charset: bool, scheme: Scheme) -> PracticesAudit {
    let charset = header_charset
        || page.elements_named("meta").any(|m| {
            nonempty(m.attr("charset"))
                || (m.attr("http-equiv").is_some_and(|h| h.eq_ignore_ascii_case("content-type"))
                    && m.attr("content").is_some_and(|c| c.to_ascii_lowercase().contains("charset=")))
        });
    let viewport =
        page.elements_named("meta").any(|m| m.attr("name").is_some_and(|n| n.trim().eq_ignore_ascii_case("viewport")));
    let mixed = page.elements.iter().any(|e| {
        let src = SUBRESOURCE_SRC.contains(&e.name.as_str()) && e.attr("src").is_some_and(is_plain_http);
        let link = e.name == "link" && e.attr("href").is_some_and(is_plain_http);
        let object = e.name == "object" && e.attr("data").is_some_and(is_plain_http);
        src || link || object
    });
    let https = scheme == Scheme::Https;
    PracticesAudit {
        passed: [
            page.has_doctype,
            charset,
            !page.elements.iter().any(|e| DEPRECATED.contains(&e.name.as_str())),
            page.elements_named("html").next().is_some_and(|h| nonempty(h.attr("lang"))),
            viewport,
            https,
            https && !mixed,
            page.elements_named("img").all(|i| i.attr("alt").is_some()),
            nonempty(page.title.as_deref()),
            page.elements_named("iframe").all(|f| nonempty(f.attr("title"))),
        ],
    }
}
