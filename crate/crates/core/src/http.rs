//! Thin blocking HTTP client shared by the remote backends.

use std::time::Duration;

use serde::Serialize;

/// Response bodies larger than this are rejected.
const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub(crate) struct HttpClient {
    agent: ureq::Agent,
}

#[derive(Debug)]
pub(crate) enum HttpFailure {
    /// Could not connect, timed out, or the exchange broke off.
    Transport(String),
    /// Non-2xx status with the (lossy) body text.
    Status(u16, String),
}

impl HttpClient {
    pub(crate) fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }

    pub(crate) fn post_json<B: Serialize>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
    ) -> Result<Vec<u8>, HttpFailure> {
        let mut req = self.agent.post(url);
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        if (200..300).contains(&status) {
            Ok(bytes)
        } else {
            Err(HttpFailure::Status(status, String::from_utf8_lossy(&bytes).into_owned()))
        }
    }
}
