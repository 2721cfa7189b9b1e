//! Remote HTTP backend. POSTs `{"prompt": ..., "max_tokens": ...}` and
//! expects `{"text": ...}` back. Exists for real deployments; every
//! verification suite runs on the simulated backends instead.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::doc::Document;

use super::{Oracle, OracleCallRecord, OracleError, OracleProfile, OracleResponse};

#[derive(Serialize)]
struct RemoteRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct RemoteReply {
    text: String,
}

pub struct RemoteOracle {
    profile: OracleProfile,
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteOracle {
    pub fn new(
        profile: OracleProfile,
        endpoint: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| OracleError::Http(e.to_string()))?;
        Ok(RemoteOracle {
            profile,
            endpoint: endpoint.into(),
            token: None,
            client,
        })
    }

    /// Bearer token attached to every request.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }
}

impl Oracle for RemoteOracle {
    fn profile(&self) -> &OracleProfile {
        &self.profile
    }

    fn backend_name(&self) -> &'static str {
        "remote"
    }

    fn call_extrapolated(
        &self,
        prompt: &Document,
        _call_index: u64,
    ) -> Result<OracleResponse, OracleError> {
        let body = RemoteRequest {
            prompt: &prompt.to_text(),
            max_tokens: self.profile.n_out_bar,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(classify_transport_error)?;
        if !response.status().is_success() {
            return Err(OracleError::Http(format!(
                "status {} from {}",
                response.status(),
                self.endpoint
            )));
        }
        let reply: RemoteReply = response
            .json()
            .map_err(|e| OracleError::MalformedResponse(e.to_string()))?;
        let answer = Document::from_text(&reply.text);
        // measured token counts, unlike the simulated backends
        let record = OracleCallRecord {
            input_tokens: prompt.len(),
            output_tokens: answer.len(),
            cost: self.profile.c_in * prompt.len() as f64
                + self.profile.c_out * answer.len() as f64,
            was_correct: None,
        };
        Ok(OracleResponse { answer, record })
    }
}

fn classify_transport_error(err: reqwest::Error) -> OracleError {
    if err.is_timeout() || err.is_connect() {
        OracleError::Timeout(err.to_string())
    } else {
        OracleError::Http(err.to_string())
    }
}
