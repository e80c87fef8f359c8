//! Blocking JSON-over-HTTP client shared by the external inference backends.

use std::sync::OnceLock;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub(crate) const EXTERNAL_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error("endpoint {endpoint} unreachable: {reason}")]
    Unreachable { endpoint: String, reason: String },
    #[error("endpoint {endpoint} returned an invalid response: {reason}")]
    BadResponse { endpoint: String, reason: String },
}

/// A lazily-built blocking client. Building it on first use keeps
/// construction off async executor threads.
#[derive(Debug, Default)]
pub(crate) struct JsonClient {
    client: OnceLock<reqwest::blocking::Client>,
}

impl JsonClient {
    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(EXTERNAL_TIMEOUT)
                .user_agent(crate::USER_AGENT)
                .build()
                .expect("http client configuration is static")
        })
    }

    pub(crate) fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        body: &Req,
    ) -> Result<Resp, RemoteError> {
        let response = self
            .client()
            .post(endpoint)
            .json(body)
            .send()
            .map_err(|e| RemoteError::Unreachable { endpoint: endpoint.to_owned(), reason: e.to_string() })?;
        let status = response.status();
        if !status.is_success() {
            return Err(RemoteError::Unreachable {
                endpoint: endpoint.to_owned(),
                reason: format!("HTTP {status}"),
            });
        }
        response
            .json()
            .map_err(|e| RemoteError::BadResponse { endpoint: endpoint.to_owned(), reason: e.to_string() })
    }
}
