//! Multi-page ToS crawling: discover keyword links breadth-first from a
//! seed, drop login walls, non-English and duplicate pages, and merge what
//! remains into one Markdown document.

mod clean;
mod dedupe;
mod fetch;
mod gates;
mod links;
mod robots;

use std::collections::{HashMap, HashSet, VecDeque};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::{debug, info};
use url::Url;

use crate::document::{ContentHash, DocumentDraft};

pub use clean::{clean_content, MIN_CONTENT_CHARS};
pub use dedupe::dedupe_versions;
pub use fetch::{FetchError, FetchResponse, Fetcher, HttpFetcher, MAX_REDIRECTS};
pub use gates::{detect_language_english, detect_login_redirect, stopword_ratio};
pub use links::discover_tos_links;
pub use robots::RobotsRules;

pub const DEFAULT_KEYWORDS: &[&str] = &["terms", "privacy", "policy", "legal", "agreement", "eula", "conditions"];

pub fn default_keywords() -> Vec<String> {
    DEFAULT_KEYWORDS.iter().map(|k| (*k).to_owned()).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("input is not decodable text")]
    UnparseableHtml,
    #[error("page has no main content")]
    EmptyContent,
    #[error("seed unreachable: {0}")]
    SeedUnreachable(String),
    #[error("every crawled page was skipped")]
    NoContent { pages: Vec<CrawledPage> },
    #[error("invalid crawl config: {0}")]
    InvalidConfig(String),
}

/// Decodes fetched bytes as UTF-8.
pub fn decode_html(bytes: &[u8]) -> Result<&str, CrawlError> {
    std::str::from_utf8(bytes).map_err(|_| CrawlError::UnparseableHtml)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageFilter {
    #[default]
    EnglishOnly,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlConfig {
    pub seed_url: Url,
    pub max_depth: u32,
    pub max_pages: usize,
    pub keyword_set: Vec<String>,
    pub same_origin_only: bool,
    pub request_timeout_ms: u64,
    pub language_filter: LanguageFilter,
    pub honor_robots: bool,
    /// Minimum gap between two requests to the same host.
    pub politeness_delay_ms: u64,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        Self {
            seed_url: Url::parse("http://localhost/").expect("static url"),
            max_depth: 2,
            max_pages: 20,
            keyword_set: default_keywords(),
            same_origin_only: true,
            request_timeout_ms: 15_000,
            language_filter: LanguageFilter::EnglishOnly,
            honor_robots: true,
            politeness_delay_ms: 250,
        }
    }
}

impl CrawlConfig {
    pub fn new(seed_url: Url) -> Self {
        Self { seed_url, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CrawlError> {
        if !matches!(self.seed_url.scheme(), "http" | "https") {
            return Err(CrawlError::InvalidConfig(format!("seed must be http(s): {}", self.seed_url)));
        }
        if self.max_pages == 0 {
            return Err(CrawlError::InvalidConfig("max_pages must be at least 1".into()));
        }
        if self.request_timeout_ms == 0 {
            return Err(CrawlError::InvalidConfig("request_timeout_ms must be positive".into()));
        }
        if self.keyword_set.iter().all(|k| k.trim().is_empty()) {
            return Err(CrawlError::InvalidConfig("keyword_set must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    LoginRedirect,
    NonEnglish,
    Duplicate,
    FetchError,
    EmptyContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawledPage {
    pub url: Url,
    pub final_url: Url,
    pub depth: u32,
    #[serde(skip)]
    pub raw_html: String,
    pub cleaned_markdown: String,
    pub content_hash: ContentHash,
    pub fetched_at: DateTime<Utc>,
    pub skipped_reason: Option<SkipReason>,
}

impl CrawledPage {
    pub fn fetched(url: Url, final_url: Url, depth: u32, raw_html: String) -> Self {
        Self {
            url,
            final_url,
            depth,
            raw_html,
            cleaned_markdown: String::new(),
            content_hash: ContentHash::of(""),
            fetched_at: Utc::now(),
            skipped_reason: None,
        }
    }

    fn failed(url: Url, depth: u32) -> Self {
        let mut page = Self::fetched(url.clone(), url, depth, String::new());
        page.skipped_reason = Some(SkipReason::FetchError);
        page
    }

    /// Stores cleaned Markdown together with its hash.
    pub fn set_cleaned(&mut self, markdown: String) {
        self.content_hash = ContentHash::of(&markdown);
        self.cleaned_markdown = markdown;
    }

    pub fn is_kept(&self) -> bool {
        self.skipped_reason.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct CrawlOutcome {
    pub draft: DocumentDraft,
    /// Every fetched page in crawl order, kept or skipped.
    pub pages: Vec<CrawledPage>,
}

impl CrawlOutcome {
    pub fn kept(&self) -> usize {
        self.pages.iter().filter(|p| p.is_kept()).count()
    }

    pub fn skipped(&self) -> usize {
        self.pages.len() - self.kept()
    }
}

fn page_key(url: &Url) -> String {
    let mut u = url.clone();
    u.set_fragment(None);
    u.to_string()
}

/// Concatenates kept pages, each under a `# <final_url>` heading.
pub fn merge_pages(pages: &[CrawledPage]) -> String {
    pages
        .iter()
        .filter(|p| p.is_kept())
        .map(|p| format!("# {}\n\n{}", p.final_url, p.cleaned_markdown.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
        + "\n"
}

struct Politeness {
    delay: Duration,
    last: HashMap<String, Instant>,
}

impl Politeness {
    fn wait(&mut self, url: &Url) {
        let host = url.host_str().unwrap_or("").to_owned();
        if let Some(last) = self.last.get(&host) {
            let elapsed = last.elapsed();
            if elapsed < self.delay {
                thread::sleep(self.delay - elapsed);
            }
        }
        self.last.insert(host, Instant::now());
    }
}

fn load_robots(config: &CrawlConfig, fetcher: &dyn Fetcher, politeness: &mut Politeness) -> RobotsRules {
    if !config.honor_robots {
        return RobotsRules::allow_all();
    }
    let Ok(robots_url) = config.seed_url.join("/robots.txt") else { return RobotsRules::allow_all() };
    politeness.wait(&robots_url);
    match fetcher.fetch(&robots_url) {
        Ok(resp) if resp.is_success() => RobotsRules::parse(&resp.body, crate::USER_AGENT),
        _ => RobotsRules::allow_all(),
    }
}

/// Breadth-first crawl from `config.seed_url`.
pub fn crawl_platform(platform_id: &str, config: &CrawlConfig, fetcher: &dyn Fetcher) -> Result<CrawlOutcome, CrawlError> {
    config.validate()?;
    let seed = config.seed_url.clone();
    let seed_origin = seed.origin();
    let mut politeness = Politeness { delay: Duration::from_millis(config.politeness_delay_ms), last: HashMap::new() };
    let robots = load_robots(config, fetcher, &mut politeness);

    let mut queue = VecDeque::from([(seed.clone(), 0u32)]);
    let mut seen = HashSet::from([page_key(&seed)]);
    let mut pages = Vec::new();

    while let Some((url, depth)) = queue.pop_front() {
        if pages.len() >= config.max_pages {
            break;
        }
        if !robots.is_allowed(url.path()) {
            debug!(%url, "disallowed by robots.txt");
            continue;
        }
        politeness.wait(&url);
        let is_seed = pages.is_empty() && depth == 0;
        let response = match fetcher.fetch(&url) {
            Ok(r) if r.is_success() => r,
            Ok(r) if is_seed => return Err(CrawlError::SeedUnreachable(format!("{url}: HTTP {}", r.status))),
            Err(e) if is_seed => return Err(CrawlError::SeedUnreachable(e.to_string())),
            Ok(r) => {
                debug!(%url, status = r.status, "fetch failed");
                pages.push(CrawledPage::failed(url, depth));
                continue;
            }
            Err(e) => {
                debug!(%url, error = %e, "fetch failed");
                pages.push(CrawledPage::failed(url, depth));
                continue;
            }
        };
        seen.insert(page_key(&response.final_url));
        let mut page = CrawledPage::fetched(url, response.final_url, depth, response.body);

        if config.same_origin_only && page.final_url.origin() != seed_origin {
            page.skipped_reason = Some(SkipReason::FetchError);
            pages.push(page);
            continue;
        }
        if detect_login_redirect(&page) {
            page.skipped_reason = Some(SkipReason::LoginRedirect);
            pages.push(page);
            continue;
        }

        if depth < config.max_depth {
            for link in discover_tos_links(&page.raw_html, &page.final_url, &config.keyword_set) {
                if config.same_origin_only && link.origin() != seed_origin {
                    continue;
                }
                if seen.insert(page_key(&link)) {
                    queue.push_back((link, depth + 1));
                }
            }
        }

        match clean_content(&page.raw_html) {
            Ok(markdown) => {
                page.set_cleaned(markdown);
                if config.language_filter == LanguageFilter::EnglishOnly && !detect_language_english(&page.cleaned_markdown) {
                    page.skipped_reason = Some(SkipReason::NonEnglish);
                }
            }
            Err(_) => page.skipped_reason = Some(SkipReason::EmptyContent),
        }
        pages.push(page);
    }

    let pages = dedupe_versions(pages);
    if !pages.iter().any(CrawledPage::is_kept) {
        return Err(CrawlError::NoContent { pages });
    }
    let merged = merge_pages(&pages);
    let source_urls = pages.iter().filter(|p| p.is_kept()).map(|p| p.final_url.to_string()).collect();
    let draft = DocumentDraft::new(platform_id, merged, source_urls);
    info!(platform_id, fetched = pages.len(), kept = pages.iter().filter(|p| p.is_kept()).count(), "crawl finished");
    Ok(CrawlOutcome { draft, pages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    /// In-memory site: path -> (status, final path, body).
    struct MapFetcher {
        pages: HashMap<String, (u16, String, String)>,
        log: RefCell<Vec<String>>,
    }

    impl MapFetcher {
        fn new(entries: &[(&str, u16, &str, &str)]) -> Self {
            let pages = entries
                .iter()
                .map(|(p, s, f, b)| ((*p).to_owned(), (*s, (*f).to_owned(), (*b).to_owned())))
                .collect();
            Self { pages, log: RefCell::new(Vec::new()) }
        }
    }

    impl Fetcher for MapFetcher {
        fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError> {
            self.log.borrow_mut().push(url.path().to_owned());
            match self.pages.get(url.path()) {
                Some((status, final_path, body)) => Ok(FetchResponse {
                    final_url: url.join(final_path).unwrap(),
                    status: *status,
                    body: body.clone(),
                }),
                None => Ok(FetchResponse { final_url: url.clone(), status: 404, body: String::new() }),
            }
        }
    }

    fn para(topic: &str) -> String {
        format!(
            "<article><h1>{topic}</h1><p>This page explains the {topic} that apply to your use of the service and \
             what we do with the information that you provide to us when you sign up.</p></article>"
        )
    }

    fn config(max_pages: usize, max_depth: u32) -> CrawlConfig {
        CrawlConfig {
            max_pages,
            max_depth,
            politeness_delay_ms: 0,
            honor_robots: false,
            ..CrawlConfig::new(Url::parse("https://ex.com/").unwrap())
        }
    }

    #[test]
    fn budget_of_one_page_keeps_only_the_seed() {
        let seed = format!("{}<a href=\"/terms\">Terms</a>", para("home rules"));
        let site = MapFetcher::new(&[("/", 200, "/", &seed), ("/terms", 200, "/terms", &para("terms"))]);
        let out = crawl_platform("ex", &config(1, 2), &site).unwrap();
        assert_eq!(out.pages.len(), 1);
        assert_eq!(out.draft.source_urls, ["https://ex.com/"]);
        assert_eq!(*site.log.borrow(), ["/"]);
    }

    #[test]
    fn depth_bound_is_respected() {
        let seed = format!("{}<a href=\"/terms\">Terms</a>", para("home rules"));
        let terms = format!("{}<a href=\"/privacy\">Privacy</a>", para("terms"));
        let site = MapFetcher::new(&[("/", 200, "/", &seed), ("/terms", 200, "/terms", &terms), ("/privacy", 200, "/privacy", &para("privacy"))]);
        crawl_platform("ex", &config(20, 1), &site).unwrap();
        assert_eq!(*site.log.borrow(), ["/", "/terms"]);
    }

    #[test]
    fn seed_failure_is_unreachable() {
        let site = MapFetcher::new(&[]);
        assert!(matches!(crawl_platform("ex", &config(5, 2), &site), Err(CrawlError::SeedUnreachable(_))));
    }

    #[test]
    fn all_skipped_is_no_content() {
        let site = MapFetcher::new(&[("/", 200, "/login", "<form><input type=password></form>")]);
        match crawl_platform("ex", &config(5, 2), &site) {
            Err(CrawlError::NoContent { pages }) => assert_eq!(pages[0].skipped_reason, Some(SkipReason::LoginRedirect)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_english_pages_are_skipped_unless_filter_off() {
        let german = "<article><p>Diese Bedingungen regeln den Zugang zu unserem Dienst sowie dessen Nutzung durch \
            registrierte Kunden und werden jederzeit durch Hinweise auf der Webseite ge\u{e4}ndert oder erg\u{e4}nzt.</p></article>";
        let seed = format!("{}<a href=\"/agb-terms\">Terms</a>", para("home rules"));
        let site = MapFetcher::new(&[("/", 200, "/", &seed), ("/agb-terms", 200, "/agb-terms", german)]);
        let out = crawl_platform("ex", &config(5, 2), &site).unwrap();
        assert_eq!(out.pages[1].skipped_reason, Some(SkipReason::NonEnglish));
        let mut cfg = config(5, 2);
        cfg.language_filter = LanguageFilter::Off;
        let out = crawl_platform("ex", &cfg, &site).unwrap();
        assert!(out.pages[1].is_kept());
    }

    #[test]
    fn robots_disallow_is_honored() {
        let seed = format!("{}<a href=\"/terms\">Terms</a><a href=\"/privacy\">Privacy</a>", para("home rules"));
        let site = MapFetcher::new(&[
            ("/robots.txt", 200, "/robots.txt", "User-agent: *\nDisallow: /terms\n"),
            ("/", 200, "/", &seed),
            ("/terms", 200, "/terms", &para("terms")),
            ("/privacy", 200, "/privacy", &para("privacy")),
        ]);
        let mut cfg = config(5, 2);
        cfg.honor_robots = true;
        crawl_platform("ex", &cfg, &site).unwrap();
        assert_eq!(*site.log.borrow(), ["/robots.txt", "/", "/privacy"]);
    }

    #[test]
    fn config_validation() {
        let mut c = config(0, 1);
        assert!(c.validate().is_err());
        c.max_pages = 1;
        c.keyword_set = vec![];
        assert!(c.validate().is_err());
        c.keyword_set = default_keywords();
        c.request_timeout_ms = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn decode_rejects_invalid_utf8() {
        assert!(matches!(decode_html(&[0xff, 0xfe, 0x00]), Err(CrawlError::UnparseableHtml)));
        assert_eq!(decode_html(b"<p>ok</p>").unwrap(), "<p>ok</p>");
    }
}
