//! Per-page exclusion checks.

use scraper::{Html, Selector};

use super::CrawledPage;
use crate::text::{is_stopword, tokenize};

const LOGIN_PATH_MARKERS: &[&str] = &["login", "signin", "sign-in", "auth"];

pub const MIN_LANGUAGE_TOKENS: usize = 20;
pub const MIN_STOPWORD_RATIO: f64 = 0.05;

/// True when the page landed on a login path or asks for a password.
pub fn detect_login_redirect(page: &CrawledPage) -> bool {
    let path = page.final_url.path().to_lowercase();
    if LOGIN_PATH_MARKERS.iter().any(|m| path.contains(m)) {
        return true;
    }
    has_password_input(&page.raw_html)
}

fn has_password_input(html: &str) -> bool {
    if !html.to_ascii_lowercase().contains("password") {
        return false;
    }
    let document = Html::parse_document(html);
    let inputs = Selector::parse("input[type]").expect("static selector");
    document
        .select(&inputs)
        .any(|i| i.value().attr("type").is_some_and(|t| t.trim().eq_ignore_ascii_case("password")))
}

/// Stopword-ratio heuristic: at least 20 tokens, at least 5% of them
/// English stopwords.
pub fn detect_language_english(text: &str) -> bool {
    let ratio = stopword_ratio(text);
    ratio.is_some_and(|r| r >= MIN_STOPWORD_RATIO)
}

/// Fraction of tokens that are stopwords, or `None` below the token floor.
pub fn stopword_ratio(text: &str) -> Option<f64> {
    let tokens = tokenize(text);
    if tokens.len() < MIN_LANGUAGE_TOKENS {
        return None;
    }
    let hits = tokens.iter().filter(|t| is_stopword(t)).count();
    Some(hits as f64 / tokens.len() as f64)
}
