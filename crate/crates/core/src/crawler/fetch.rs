use std::time::Duration;

use url::Url;

pub const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone)]
pub struct FetchResponse {
    pub final_url: Url,
    pub status: u16,
    pub body: String,
}

impl FetchResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("fetching {url} failed: {reason}")]
pub struct FetchError {
    pub url: String,
    pub reason: String,
}

/// Source of page bytes for the crawler.
pub trait Fetcher {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError>;
}

/// Blocking HTTP client following at most five redirects. With
/// `same_origin_only`, a redirect leaving the starting origin is not
/// followed and the 3xx response is returned as-is.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration, same_origin_only: bool) -> Result<Self, FetchError> {
        let policy = reqwest::redirect::Policy::custom(move |attempt| {
            if attempt.previous().len() > MAX_REDIRECTS {
                return attempt.error("too many redirects");
            }
            if same_origin_only {
                let leaves_origin = attempt
                    .previous()
                    .first()
                    .is_some_and(|first| first.origin() != attempt.url().origin());
                if leaves_origin {
                    return attempt.stop();
                }
            }
            attempt.follow()
        });
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .redirect(policy)
            .user_agent(crate::USER_AGENT)
            .build()
            .map_err(|e| FetchError { url: String::new(), reason: e.to_string() })?;
        Ok(Self { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &Url) -> Result<FetchResponse, FetchError> {
        let err = |e: reqwest::Error| FetchError { url: url.to_string(), reason: e.to_string() };
        let response = self.client.get(url.as_str()).send().map_err(err)?;
        let final_url = response.url().clone();
        let status = response.status().as_u16();
        let bytes = response.bytes().map_err(err)?;
        Ok(FetchResponse { final_url, status, body: String::from_utf8_lossy(&bytes).into_owned() })
    }
}
