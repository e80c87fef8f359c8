use url::Url;

/// Second-level labels under which registrations happen one level deeper
/// (`example.co.uk`).
const MULTI_PART_SUFFIXES: &[&str] = &[
    "co.uk", "org.uk", "ac.uk", "gov.uk", "com.au", "net.au", "org.au", "edu.au", "gov.au", "co.nz", "co.jp",
    "ne.jp", "or.jp", "com.br", "com.cn", "com.mx", "co.in", "co.kr", "com.sg", "com.tr", "co.za",
];

/// Registrable domain of `url`, approximated without a public suffix list.
pub fn registrable_domain(url: &Url) -> Option<String> {
    let host = url.host_str()?.trim_end_matches('.').to_lowercase();
    if url.host().is_some_and(|h| !matches!(h, url::Host::Domain(_))) {
        return Some(host);
    }
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    let take = match labels.len() {
        0 => return None,
        1 | 2 => labels.len(),
        n => {
            let last_two = format!("{}.{}", labels[n - 2], labels[n - 1]);
            if MULTI_PART_SUFFIXES.contains(&last_two.as_str()) {
                3
            } else {
                2
            }
        }
    };
    Some(labels[labels.len() - take..].join("."))
}

/// `https://www.example.com/legal` -> `example-com`.
pub fn platform_id_from_url(url: &Url) -> Option<String> {
    let domain = registrable_domain(url)?;
    let slug: String = domain
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let slug = slug.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-");
    (!slug.is_empty()).then_some(slug)
}

/// Lowercase ASCII letters, digits and single inner hyphens.
pub fn is_valid_platform_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        && !id.starts_with('-')
        && !id.ends_with('-')
}
