use std::collections::HashSet;

use scraper::{Html, Selector};
use url::Url;

/// Anchors whose text or resolved path mentions any keyword, resolved to
/// absolute http(s) URLs without fragments, in first-occurrence order.
pub fn discover_tos_links(html: &str, base_url: &Url, keywords: &[String]) -> Vec<Url> {
    let document = Html::parse_document(html);
    let base = effective_base(&document, base_url);
    let anchors = Selector::parse("a[href]").expect("static selector");
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).filter(|k| !k.is_empty()).collect();

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for anchor in document.select(&anchors) {
        let Some(href) = anchor.value().attr("href").map(str::trim) else { continue };
        if href.is_empty() || href.starts_with('#') {
            continue;
        }
        let Ok(mut resolved) = base.join(href) else { continue };
        if !matches!(resolved.scheme(), "http" | "https") {
            continue;
        }
        resolved.set_fragment(None);

        let text = anchor.text().collect::<String>().to_lowercase();
        let path = resolved.path().to_lowercase();
        let matched = keywords.iter().any(|k| text.contains(k.as_str()) || path.contains(k.as_str()));
        if matched && seen.insert(resolved.as_str().to_owned()) {
            out.push(resolved);
        }
    }
    out
}

/// Honors a `<base href>` element when present.
fn effective_base(document: &Html, base_url: &Url) -> Url {
    let selector = Selector::parse("base[href]").expect("static selector");
    document
        .select(&selector)
        .next()
        .and_then(|b| b.value().attr("href"))
        .and_then(|href| base_url.join(href.trim()).ok())
        .unwrap_or_else(|| base_url.clone())
}
