//! Markdown to statement segmentation.

use std::sync::LazyLock;

use regex::Regex;

use crate::text::word_count;

/// Segments with fewer word tokens than this are dropped.
pub const MIN_SEGMENT_TOKENS: usize = 4;

/// Words ending in a period that never terminate a sentence.
const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "etc.", "inc.", "ltd.", "no."];

static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s{0,3}#{1,6}\s+").unwrap());
static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*+]|\d{1,3}[.)])\s+").unwrap());
static QUOTE_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:>\s*)+").unwrap());
static IMAGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"!\[([^\]]*)\]\([^)]*\)").unwrap());
static LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\]]*)\]\([^)]*\)").unwrap());
static BARE_URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<?https?://[^\s>]+>?").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*{1,3}|`+|(?:^|\s)_{1,3}|_{1,3}(?:\s|$)").unwrap());
/// Block markers left at the front of a segment once inline markup is gone.
static LEADING_MARKERS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:(?:[-*+>]|#{1,6}|\d{1,3}[.)])\s+)+").unwrap());
static RULE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*_]\s*){3,}$").unwrap());

fn strip_inline(line: &str) -> String {
    let line = IMAGE.replace_all(line, "$1");
    let line = LINK.replace_all(&line, "$1");
    let line = BARE_URL.replace_all(&line, " ");
    let line = EMPHASIS.replace_all(&line, " ");
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Plain-text units: each heading and list item is its own unit; other
/// consecutive lines form a paragraph.
fn plain_units(markdown: &str) -> Vec<String> {
    let mut units = Vec::new();
    let mut paragraph: Vec<String> = Vec::new();
    let mut in_fence = false;

    let flush = |paragraph: &mut Vec<String>, units: &mut Vec<String>| {
        if !paragraph.is_empty() {
            units.push(paragraph.join(" "));
            paragraph.clear();
        }
    };

    for line in markdown.lines() {
        if line.trim_start().starts_with("```") {
            in_fence = !in_fence;
            flush(&mut paragraph, &mut units);
            continue;
        }
        if line.trim().is_empty() || RULE.is_match(line) {
            flush(&mut paragraph, &mut units);
            continue;
        }
        let unquoted = QUOTE_MARKER.replace(line, "");
        if !in_fence && (HEADING.is_match(&unquoted) || LIST_MARKER.is_match(&unquoted)) {
            flush(&mut paragraph, &mut units);
            let body = HEADING.replace(&unquoted, "");
            let body = LIST_MARKER.replace(&body, "");
            let text = strip_inline(&body);
            if !text.is_empty() {
                units.push(text);
            }
            continue;
        }
        let text = strip_inline(&unquoted);
        if !text.is_empty() {
            paragraph.push(text);
        }
    }
    flush(&mut paragraph, &mut units);
    units
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn ends_with_abbreviation(text: &str) -> bool {
    let word = text.rsplit(char::is_whitespace).next().unwrap_or("");
    let word = word.trim_start_matches(['(', '"', '\'', '[']);
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits one unit on `.`, `!`, `?` followed by whitespace or end of text.
fn split_unit(unit: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = unit.char_indices().collect();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1)) {
                j += 1;
            }
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            let end = if j == chars.len() { unit.len() } else { chars[j].0 };
            if at_boundary && !(c == '.' && ends_with_abbreviation(&unit[start..end])) {
                out.push(unit[start..end].trim().to_owned());
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let rest = unit[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_owned());
    }
}

/// Splits Markdown into plain-text statements in document order.
pub fn segment_sentences(markdown: &str) -> Vec<String> {
    let mut raw = Vec::new();
    for unit in plain_units(markdown) {
        split_unit(&unit, &mut raw);
    }
    raw.into_iter()
        .map(|s| match LEADING_MARKERS.find(&s) {
            Some(m) => s[m.end()..].to_owned(),
            None => s,
        })
        .filter(|s| word_count(s) >= MIN_SEGMENT_TOKENS)
        .collect()
}
