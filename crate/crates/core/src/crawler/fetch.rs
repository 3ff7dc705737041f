use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::Utc;
use reqwest::blocking::Client;
use reqwest::redirect;
use thiserror::Error;
use url::Url;

use super::robots::RobotsRules;
use super::throttle::HostThrottle;
use super::{CrawlPolicy, CrawlResult, FetchOutcome, HeaderList, Scheme};

#[derive(Debug, Error)]
pub enum CrawlerError {
    #[error("timeout_seconds must be positive, got {0}")]
    InvalidTimeout(f64),
    #[error("per_host_min_interval_seconds must be nonnegative, got {0}")]
    InvalidInterval(f64),
    #[error("cannot build HTTP client: {0}")]
    Client(#[from] reqwest::Error),
}

/// One homepage to fetch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlJob {
    pub firm_id: String,
    pub url: String,
}

/// Live homepage fetcher. Shareable across threads; per-host spacing and the
/// robots cache are held internally.
pub struct Crawler {
    client: Client,
    policy: CrawlPolicy,
    throttle: HostThrottle,
    robots: Mutex<HashMap<String, Arc<RobotsRules>>>,
}

/// Fetches one homepage with a fresh [`Crawler`].
pub fn fetch_homepage(firm_id: &str, url: &str, policy: &CrawlPolicy) -> Result<CrawlResult, CrawlerError> {
    Ok(Crawler::new(policy.clone())?.fetch_homepage(firm_id, url))
}

fn host_key(url: &Url) -> String {
    match url.port_or_known_default() {
        Some(port) => format!("{}:{port}", url.host_str().unwrap_or("")),
        None => url.host_str().unwrap_or("").to_string(),
    }
}

fn failure_note(err: &reqwest::Error) -> String {
    if err.is_timeout() {
        "timeout".to_string()
    } else if err.is_connect() {
        format!("connection failed: {err}")
    } else {
        format!("request failed: {err}")
    }
}

impl Crawler {
    pub fn new(policy: CrawlPolicy) -> Result<Self, CrawlerError> {
        if !(policy.timeout_seconds > 0.0 && policy.timeout_seconds.is_finite()) {
            return Err(CrawlerError::InvalidTimeout(policy.timeout_seconds));
        }
        if !(policy.per_host_min_interval_seconds >= 0.0 && policy.per_host_min_interval_seconds.is_finite()) {
            return Err(CrawlerError::InvalidInterval(policy.per_host_min_interval_seconds));
        }
        let client = Client::builder()
            .redirect(redirect::Policy::none())
            .user_agent(policy.user_agent.clone())
            .no_proxy()
            .build()?;
        let throttle = HostThrottle::new(Duration::from_secs_f64(policy.per_host_min_interval_seconds));
        Ok(Crawler { client, policy, throttle, robots: Mutex::new(HashMap::new()) })
    }

    pub fn policy(&self) -> &CrawlPolicy {
        &self.policy
    }

    /// Fetches `url`, following up to `max_redirects` redirects.
    ///
    /// Timings are measured from the start of the first request: `ttfb` when
    /// the final response's headers arrive, `total` when its body is fully read.
    /// Network failures are returned as a result with a timeout marker.
    pub fn fetch_homepage(&self, firm_id: &str, url: &str) -> CrawlResult {
        let fetched_at = Utc::now();
        let start = Instant::now();
        let deadline = start + Duration::from_secs_f64(self.policy.timeout_seconds);
        let fail = |final_url: &str, redirects: u32, outcome: FetchOutcome| {
            CrawlResult::without_response(
                firm_id,
                url,
                final_url,
                outcome,
                start.elapsed().as_secs_f64(),
                fetched_at,
                redirects,
            )
        };

        let mut current = match Url::parse(url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.host_str().is_some() => u,
            _ => return fail(url, 0, FetchOutcome::Timeout(format!("invalid url {url:?}"))),
        };
        let mut redirects = 0u32;
        loop {
            if self.policy.respect_robots && !self.robots_allow(&current, deadline) {
                return fail(current.as_str(), redirects, FetchOutcome::RobotsExcluded);
            }
            self.throttle.wait(&host_key(&current));
            let Some(remaining) = deadline.checked_duration_since(Instant::now()).filter(|d| !d.is_zero())
            else {
                return fail(current.as_str(), redirects, FetchOutcome::Timeout("timeout".into()));
            };
            let response = match self.client.get(current.clone()).timeout(remaining).send() {
                Ok(r) => r,
                Err(e) => return fail(current.as_str(), redirects, FetchOutcome::Timeout(failure_note(&e))),
            };
            let status = response.status();
            let location = response
                .headers()
                .get(reqwest::header::LOCATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|loc| current.join(loc).ok());
            if status.is_redirection() && redirects < self.policy.max_redirects {
                if let Some(next) = location {
                    redirects += 1;
                    current = next;
                    continue;
                }
            }

            let ttfb = start.elapsed().as_secs_f64();
            let headers: HeaderList = response
                .headers()
                .iter()
                .map(|(n, v)| (n.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
                .collect();
            let body = match response.bytes() {
                Ok(b) => b.to_vec(),
                Err(e) => return fail(current.as_str(), redirects, FetchOutcome::Timeout(failure_note(&e))),
            };
            let total = start.elapsed().as_secs_f64().max(ttfb);
            return CrawlResult {
                firm_id: firm_id.to_string(),
                requested_url: url.to_string(),
                final_url: current.to_string(),
                outcome: FetchOutcome::Status(status.as_u16()),
                scheme: Scheme::of(current.as_str()),
                ttfb_seconds: ttfb,
                total_seconds: total,
                response_headers: headers,
                body,
                fetched_at,
                redirect_count: redirects,
            };
        }
    }

    fn robots_allow(&self, url: &Url, deadline: Instant) -> bool {
        let key = format!("{}://{}", url.scheme(), host_key(url));
        let cached = self.robots.lock().unwrap_or_else(|e| e.into_inner()).get(&key).cloned();
        let rules = match cached {
            Some(r) => r,
            None => {
                let rules = Arc::new(self.fetch_robots(url, deadline));
                self.robots.lock().unwrap_or_else(|e| e.into_inner()).insert(key, rules.clone());
                rules
            }
        };
        let mut path = url.path().to_string();
        if let Some(q) = url.query() {
            path.push('?');
            path.push_str(q);
        }
        rules.allowed(&self.policy.user_agent, &path)
    }

    /// A missing, failing or non-200 robots.txt allows everything.
    fn fetch_robots(&self, url: &Url, deadline: Instant) -> RobotsRules {
        let Ok(robots_url) = url.join("/robots.txt") else { return RobotsRules::allow_all() };
        self.throttle.wait(&host_key(url));
        let Some(remaining) = deadline.checked_duration_since(Instant::now()).filter(|d| !d.is_zero()) else {
            return RobotsRules::allow_all();
        };
        match self.client.get(robots_url).timeout(remaining).send() {
            Ok(resp) if resp.status().as_u16() == 200 => match resp.text() {
                Ok(text) => RobotsRules::parse(&text),
                Err(_) => RobotsRules::allow_all(),
            },
            _ => RobotsRules::allow_all(),
        }
    }

    /// Fetches every job, running up to `policy.concurrency` fetches at once.
    /// Output order matches input order.
    pub fn crawl_all(&self, jobs: &[CrawlJob]) -> Vec<CrawlResult> {
        let workers = self.policy.concurrency.clamp(1, jobs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<CrawlResult>>> = Mutex::new(vec![None; jobs.len()]);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let result = self.fetch_homepage(&job.firm_id, &job.url);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|r| r.expect("every job produces a result"))
            .collect()
    }
}
