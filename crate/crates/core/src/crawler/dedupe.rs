//! Version deduplication.
//!
//! Two rules, applied to pages that are not already skipped:
//! 1. identical `content_hash` collapses onto the first-crawled page;
//! 2. pages whose URLs differ only by version/date segments (`v\d+`,
//!    `\d{4}` optionally followed by `-MM[-DD]`, or anything containing
//!    "archive" or "previous") keep the unmarked page, or, when every page
//!    is marked, the one with the greatest date-like segment.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{CrawledPage, SkipReason};

static VERSION_SEGMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?i)v\d+$").unwrap());
static DATE_SEGMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}(?:-\d{2}(?:-\d{2})?)?$").unwrap());

#[derive(Debug, Default, PartialEq, Eq)]
struct VersionMarkers {
    marked: bool,
    date: Option<String>,
    version: Option<u64>,
}

fn is_marker(segment: &str) -> bool {
    let lower = segment.to_lowercase();
    VERSION_SEGMENT.is_match(segment)
        || DATE_SEGMENT.is_match(segment)
        || lower.contains("archive")
        || lower.contains("previous")
}

/// Host plus path with marker segments removed, and the markers found.
fn version_key(page: &CrawledPage) -> (String, VersionMarkers) {
    let url = &page.final_url;
    let mut markers = VersionMarkers::default();
    let mut kept = Vec::new();
    for segment in url.path().split('/').filter(|s| !s.is_empty()) {
        if is_marker(segment) {
            markers.marked = true;
            if DATE_SEGMENT.is_match(segment) {
                markers.date = markers.date.max(Some(segment.to_owned()));
            } else if VERSION_SEGMENT.is_match(segment) {
                let n = segment[1..].parse().unwrap_or(0);
                markers.version = markers.version.max(Some(n));
            }
        } else {
            kept.push(segment.to_lowercase());
        }
    }
    let key = format!("{}/{}", url.origin().ascii_serialization(), kept.join("/"));
    (key, markers)
}

fn newer(a: &VersionMarkers, b: &VersionMarkers) -> Ordering {
    a.date.cmp(&b.date).then(a.version.cmp(&b.version))
}

pub fn dedupe_versions(mut pages: Vec<CrawledPage>) -> Vec<CrawledPage> {
    let mut first_by_hash = HashMap::new();
    for (i, page) in pages.iter_mut().enumerate() {
        if page.skipped_reason.is_some() {
            continue;
        }
        if *first_by_hash.entry(page.content_hash).or_insert(i) != i {
            page.skipped_reason = Some(SkipReason::Duplicate);
        }
    }

    let mut groups: HashMap<String, Vec<(usize, VersionMarkers)>> = HashMap::new();
    let mut order = Vec::new();
    for (i, page) in pages.iter().enumerate() {
        if page.skipped_reason.is_some() {
            continue;
        }
        let (key, markers) = version_key(page);
        let group = groups.entry(key.clone()).or_default();
        if group.is_empty() {
            order.push(key);
        }
        group.push((i, markers));
    }

    for key in order {
        let group = &groups[&key];
        if group.len() < 2 {
            continue;
        }
        let winner = group
            .iter()
            .find(|(_, m)| !m.marked)
            .or_else(|| {
                // Earliest crawled wins ties, so keep the first maximum.
                group.iter().fold(None, |best: Option<&(usize, VersionMarkers)>, cand| match best {
                    Some(b) if newer(&cand.1, &b.1) != Ordering::Greater => Some(b),
                    _ => Some(cand),
                })
            })
            .map(|(i, _)| *i);
        for (i, _) in group {
            if Some(*i) != winner {
                pages[*i].skipped_reason = Some(SkipReason::Duplicate);
            }
        }
    }
    pages
}
