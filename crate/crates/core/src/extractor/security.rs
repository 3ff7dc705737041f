//! Security-header penalty score: 0 is best, 15 is worst.

use crate::crawler::{HeaderList, Scheme};

/// Points added when the header is absent.
pub const HEADER_PENALTIES: [(&str, u8); 6] = [
    ("strict-transport-security", 3),
    ("content-security-policy", 3),
    ("x-frame-options", 2),
    ("x-content-type-options", 2),
    ("referrer-policy", 2),
    ("permissions-policy", 1),
];
pub const INSECURE_COOKIE_PENALTY: u8 = 1;
pub const PLAIN_HTTP_PENALTY: u8 = 1;
pub const MAX_SECURITY_PENALTY: u8 = 15;

fn cookie_is_secure(set_cookie: &str) -> bool {
    set_cookie.split(';').skip(1).any(|attr| attr.trim().eq_ignore_ascii_case("secure"))
}

pub fn score_security(headers: &HeaderList, scheme: Scheme) -> u8 {
    let missing: u8 =
        HEADER_PENALTIES.iter().filter(|(name, _)| !headers.contains(name)).map(|(_, points)| points).sum();
    let cookie = if headers.get_all("set-cookie").any(|c| !cookie_is_secure(c)) { INSECURE_COOKIE_PENALTY } else { 0 };
    let http = if scheme == Scheme::Http { PLAIN_HTTP_PENALTY } else { 0 };
    missing + cookie + http
}
