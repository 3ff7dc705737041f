//! Tolerant HTML tokenizer.
//!
//! Only start tags (with attributes), the doctype and the document title are
//! kept; that is all the homepage features need. Malformed markup never
//! aborts: unterminated constructs run to end of input and stray `<` are text.

use std::fmt::Write as _;

use encoding_rs::{Encoding, UTF_8};
use thiserror::Error;

use crate::crawler::HeaderList;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("body is not valid {encoding}")]
pub struct EncodingError {
    pub encoding: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    /// Lowercase tag name.
    pub name: String,
    /// Lowercase attribute names with entity-decoded values, first occurrence wins.
    pub attrs: Vec<(String, String)>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub has_doctype: bool,
    pub elements: Vec<Element>,
    /// Text of the first `<title>`, entity-decoded, whitespace collapsed.
    pub title: Option<String>,
}

impl Page {
    pub fn elements_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.elements.iter().filter(move |e| e.name == name)
    }

    /// `href` values of every `<a>` element, in document order.
    pub fn anchor_targets(&self) -> impl Iterator<Item = &str> {
        self.elements_named("a").filter_map(|e| e.attr("href"))
    }

    /// Serializes the retained tokens back to markup. Parsing the output
    /// yields an equal `Page`.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        if self.has_doctype {
            out.push_str("<!DOCTYPE html>\n");
        }
        let mut title_written = false;
        for e in &self.elements {
            let _ = write!(out, "<{}", e.name);
            for (n, v) in &e.attrs {
                let _ = write!(out, " {}=\"{}\"", n, escape_attr(v));
            }
            out.push('>');
            if e.name == "title" && !title_written {
                out.push_str(&escape_text(self.title.as_deref().unwrap_or("")));
                title_written = true;
            }
            if RAW_TEXT.contains(&e.name.as_str()) {
                let _ = write!(out, "</{}>", e.name);
            }
            out.push('\n');
        }
        out
    }
}

fn escape_attr(v: &str) -> String {
    v.replace('&', "&amp;").replace('"', "&quot;")
}

fn escape_text(v: &str) -> String {
    v.replace('&', "&amp;").replace('<', "&lt;")
}

/// Elements whose content is not markup.
const RAW_TEXT: [&str; 6] = ["script", "style", "textarea", "title", "xmp", "plaintext"];

/// Decodes `body` using, in order: a byte-order mark, the `charset` of the
/// `Content-Type` header, a `charset=` declaration in the first 1024 bytes,
/// then UTF-8. Malformed byte sequences are an error.
pub fn decode_body(body: &[u8], headers: &HeaderList) -> Result<String, EncodingError> {
    let (encoding, skip) = match Encoding::for_bom(body) {
        Some((enc, len)) => (enc, len),
        None => {
            let label = headers
                .get("content-type")
                .and_then(|ct| charset_label(ct.as_bytes()))
                .or_else(|| charset_label(&body[..body.len().min(1024)]));
            (label.and_then(|l| Encoding::for_label(l.as_bytes())).unwrap_or(UTF_8), 0)
        }
    };
    encoding
        .decode_without_bom_handling_and_without_replacement(&body[skip..])
        .map(|s| s.into_owned())
        .ok_or(EncodingError { encoding: encoding.name() })
}

fn charset_label(bytes: &[u8]) -> Option<String> {
    let lower = bytes.to_ascii_lowercase();
    let at = lower.windows(8).position(|w| w == b"charset=")? + 8;
    let rest = &lower[at..];
    let rest = rest.strip_prefix(b"\"").or_else(|| rest.strip_prefix(b"'")).unwrap_or(rest);
    let label: String = rest
        .iter()
        .take_while(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b':' | b'.'))
        .map(|&b| b as char)
        .collect();
    (!label.is_empty()).then_some(label)
}

pub fn parse_page(body: &[u8], headers: &HeaderList) -> Result<Page, EncodingError> {
    decode_body(body, headers).map(|text| parse_html(&text))
}

pub fn parse_html(text: &str) -> Page {
    let mut page = Page::default();
    let bytes = text.as_bytes();
    let mut pos = 0;
    while let Some(off) = text[pos..].find('<') {
        let at = pos + off;
        let rest = &text[at..];
        if let Some(comment) = rest.strip_prefix("<!--") {
            pos = comment.find("-->").map_or(text.len(), |e| at + 4 + e + 3);
        } else if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest.find('>').map_or(text.len(), |e| at + e + 1);
            let decl = &text[at + 2..end];
            if decl.get(..7).is_some_and(|d| d.eq_ignore_ascii_case("doctype")) && page.elements.is_empty() {
                page.has_doctype = true;
            }
            pos = end;
        } else if rest.starts_with("</") {
            pos = rest.find('>').map_or(text.len(), |e| at + e + 1);
        } else if bytes.get(at + 1).is_some_and(u8::is_ascii_alphabetic) {
            let (element, end) = parse_start_tag(text, at + 1);
            pos = end;
            if RAW_TEXT.contains(&element.name.as_str()) {
                let (content, after) = raw_text(text, pos, &element.name);
                if element.name == "title" && page.title.is_none() {
                    page.title = Some(collapse_whitespace(&decode_entities(content)));
                }
                pos = after;
            }
            page.elements.push(element);
        } else {
            pos = at + 1;
        }
    }
    page
}

/// Parses a start tag whose name begins at `start`. Returns the element and
/// the byte offset just past the closing `>`.
fn parse_start_tag(text: &str, start: usize) -> (Element, usize) {
    let b = text.as_bytes();
    let mut i = start;
    while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' && b[i] != b'/' {
        i += 1;
    }
    let name = text[start..i].to_ascii_lowercase();
    let mut attrs: Vec<(String, String)> = Vec::new();
    loop {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        if i >= b.len() {
            break;
        }
        if b[i] == b'>' {
            i += 1;
            break;
        }
        let name_start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && !matches!(b[i], b'>' | b'/' | b'=') {
            i += 1;
        }
        // A lone '=' would otherwise never advance.
        if i == name_start {
            i += 1;
            continue;
        }
        let attr_name = text[name_start..i].to_ascii_lowercase();
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let quote = b[i];
                let vstart = i + 1;
                let vend = b[vstart..].iter().position(|&c| c == quote).map_or(b.len(), |p| vstart + p);
                value = decode_entities(&text[vstart..vend]);
                i = (vend + 1).min(b.len());
            } else {
                let vstart = i;
                while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' {
                    i += 1;
                }
                value = decode_entities(&text[vstart..i]);
            }
        }
        if !attrs.iter().any(|(n, _)| *n == attr_name) {
            attrs.push((attr_name, value));
        }
    }
    (Element { name, attrs }, i)
}

/// Content of a raw-text element up to its closing tag, and the offset after it.
fn raw_text<'a>(text: &'a str, from: usize, name: &str) -> (&'a str, usize) {
    let closing = format!("</{name}");
    let lower = text[from..].to_ascii_lowercase();
    match lower.find(&closing) {
        Some(off) => {
            let end = from + off;
            let after = text[end..].find('>').map_or(text.len(), |e| end + e + 1);
            (&text[from..end], after)
        }
        None => (&text[from..], text.len()),
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decodes numeric character references and the common named entities.
/// Unknown entities are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let end = rest[1..].find(|c: char| c == ';' || c == '&' || c.is_whitespace()).map(|e| e + 1);
        let decoded = end.filter(|&e| rest.as_bytes()[e] == b';').and_then(|e| {
            let entity = &rest[1..e];
            let ch = if let Some(num) = entity.strip_prefix("#x").or_else(|| entity.strip_prefix("#X")) {
                u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
            } else if let Some(num) = entity.strip_prefix('#') {
                num.parse::<u32>().ok().and_then(char::from_u32)
            } else {
                match entity {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some('\u{a0}'),
                    _ => None,
                }
            };
            ch.map(|c| (c, e + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
