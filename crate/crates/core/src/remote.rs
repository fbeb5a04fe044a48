//! HTTP implementations of the external client contracts.
//!
//! Each client posts JSON to `<base_url>/<route>`. When `key_env` names a set
//! environment variable its value is sent as a bearer token.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::client::{ClientError, RetryPolicy};
use crate::corpus::Fetcher;
use crate::sft::{ParaphraseProvider, ParaphraseRequest, ParaphraseResponse};
use crate::translate::{
    EmbedRequest, EmbedResponse, EmbeddingClient, EmbeddingSet, MtClient, MtRequest, MtResponse, QeClient, QeRequest,
    QeResponse, TargetLanguage,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct Endpoint {
    pub base_url: String,
    pub key_env: Option<String>,
    pub timeout: Duration,
}

impl Endpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), key_env: None, timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_key_env(mut self, var: impl Into<String>) -> Self {
        self.key_env = Some(var.into());
        self
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), route)
    }
}

#[derive(Clone)]
struct Http {
    agent: ureq::Agent,
    endpoint: Endpoint,
}

impl Http {
    fn new(endpoint: Endpoint) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(endpoint.timeout)).build().into();
        Self { agent, endpoint }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, route: &str, body: &Req) -> Result<Resp, ClientError> {
        let mut req = self.agent.post(&self.endpoint.url(route));
        if let Some(key) = self.endpoint.key_env.as_deref().and_then(|v| std::env::var(v).ok()) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(map_err)?;
        resp.body_mut().read_json::<Resp>().map_err(|e| ClientError::BadResponse(e.to_string()))
    }
}

fn map_err(e: ureq::Error) -> ClientError {
    match e {
        ureq::Error::StatusCode(code) if code < 500 => ClientError::BadResponse(format!("HTTP {code}")),
        ureq::Error::StatusCode(code) => ClientError::Unreachable(format!("HTTP {code}")),
        other => ClientError::Unreachable(other.to_string()),
    }
}

pub struct HttpParaphraser(Http);

impl HttpParaphraser {
    pub fn new(endpoint: Endpoint) -> Self {
        Self(Http::new(endpoint))
    }
}

impl ParaphraseProvider for HttpParaphraser {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<ParaphraseResponse, ClientError> {
        self.0.post("paraphrase", request)
    }
}

/// An MT system behind an HTTP endpoint. `languages` limits what it is asked
/// to translate; empty means all.
pub struct HttpMt {
    id: String,
    languages: Vec<TargetLanguage>,
    http: Http,
}

impl HttpMt {
    pub fn new(id: impl Into<String>, endpoint: Endpoint, languages: Vec<TargetLanguage>) -> Self {
        Self { id: id.into(), languages, http: Http::new(endpoint) }
    }
}

impl MtClient for HttpMt {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports(&self, language: TargetLanguage) -> bool {
        self.languages.is_empty() || self.languages.contains(&language)
    }

    fn translate(&self, request: &MtRequest) -> Result<MtResponse, ClientError> {
        self.http.post("translate", request)
    }
}

pub struct HttpQe(Http);

impl HttpQe {
    pub fn new(endpoint: Endpoint) -> Self {
        Self(Http::new(endpoint))
    }
}

impl QeClient for HttpQe {
    fn score(&self, request: &QeRequest) -> Result<QeResponse, ClientError> {
        self.0.post("qe", request)
    }
}

pub struct HttpEmbedding(Http);

impl HttpEmbedding {
    pub fn new(endpoint: Endpoint) -> Self {
        Self(Http::new(endpoint))
    }
}

impl EmbeddingClient for HttpEmbedding {
    fn embed(&self, text: &str) -> Result<EmbeddingSet, ClientError> {
        let resp: EmbedResponse = self.0.post("embed", &EmbedRequest { text: text.to_string() })?;
        EmbeddingSet::new(resp.vectors).map_err(|e| ClientError::BadResponse(e.to_string()))
    }
}

/// Plain GET of http(s) sources with retries.
pub struct HttpFetcher {
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpFetcher {
    pub fn new(timeout: Duration, retry: RetryPolicy) -> Self {
        Self { agent: ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into(), retry }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        self.retry
            .run(|_| {
                let mut resp = self.agent.get(url).call().map_err(map_err)?;
                resp.body_mut().read_to_string().map_err(|e| ClientError::BadResponse(e.to_string()))
            })
            .map_err(|e| e.to_string())
    }
}
