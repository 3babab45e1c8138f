//! HTTP client for an external generation service speaking the
//! `POST /generate` JSON protocol.

use std::time::Duration;

use domcf_core::reconstruct::vocabulary_violations;
use domcf_core::reconstruct::wire::{ErrorBody, GenerateRequest, GenerateResponse, Health};
use domcf_core::{
    tokenize, AllowedVocabulary, CorpusConfig, ExternalReconstructor, MaskedTemplate,
    OrientationDescriptor, Stemmer,
};
use thiserror::Error;

/// Environment variable consulted for the default service URL.
pub const SERVICE_URL_ENV: &str = "DOMCF_SERVICE_URL";

#[derive(Debug, Error)]
pub enum ClientError {
    /// Connection failure or timeout. Worth retrying.
    #[error("transport error talking to {url}: {message}")]
    Transport { url: String, message: String },
    /// The service answered with an error status.
    #[error("generation service returned {status}: {message}")]
    Service { status: u16, message: String },
    /// The reply did not follow the wire format.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("generated text uses words outside the allowed vocabulary: {}", words.join(", "))]
    Vocabulary { words: Vec<String> },
    #[error("service altered a template with no slots: expected {expected:?}, got {got:?}")]
    IdentityMismatch { expected: String, got: String },
}

impl ClientError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ClientError::Transport { .. })
    }
}

impl From<ClientError> for domcf_core::Error {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Vocabulary { words } => domcf_core::Error::VocabularyViolation(words),
            other => domcf_core::Error::Generation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub url: String,
    pub timeout_ms: u64,
    pub beam_size: u32,
    pub enforce_vocabulary: bool,
    pub max_length: u32,
    /// Extra attempts after a transport error.
    pub retries: u32,
}

impl ClientConfig {
    pub fn new(url: impl Into<String>) -> Self {
        ClientConfig {
            url: url.into(),
            timeout_ms: 30_000,
            beam_size: domcf_core::reconstruct::wire::DEFAULT_BEAM_SIZE,
            enforce_vocabulary: true,
            max_length: 128,
            retries: 2,
        }
    }
}

/// Text returned by the service, re-tokenized locally.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFill {
    pub text: String,
    pub tokens: Vec<String>,
    pub stems: Vec<String>,
    pub slot_fills: Vec<String>,
    pub model_version: String,
}

pub struct ServiceClient {
    agent: ureq::Agent,
    config: ClientConfig,
    corpus: CorpusConfig,
    stemmer: Box<dyn Stemmer>,
}

impl ServiceClient {
    pub fn new(config: ClientConfig, corpus: CorpusConfig, stemmer: Box<dyn Stemmer>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        ServiceClient {
            agent,
            config,
            corpus,
            stemmer,
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{path}", self.config.url.trim_end_matches('/'))
    }

    fn transport(&self, message: impl ToString) -> ClientError {
        ClientError::Transport {
            url: self.config.url.clone(),
            message: message.to_string(),
        }
    }

    fn read_reply<T: serde::de::DeserializeOwned>(
        &self,
        reply: Result<ureq::Response, ureq::Error>,
    ) -> Result<T, ClientError> {
        match reply {
            Ok(resp) => {
                let body = resp.into_string().map_err(|e| self.transport(e))?;
                serde_json::from_str(&body).map_err(|e| ClientError::Protocol(e.to_string()))
            }
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                let message = serde_json::from_str::<ErrorBody>(&body)
                    .map(|b| b.error)
                    .unwrap_or(body);
                Err(ClientError::Service { status, message })
            }
            Err(ureq::Error::Transport(t)) => Err(self.transport(t)),
        }
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        self.read_reply(self.agent.get(&self.endpoint("/health")).call())
    }

    pub fn request_for(
        &self,
        template: &MaskedTemplate,
        orientation: &OrientationDescriptor,
        vocab: &AllowedVocabulary,
        domain_name: &str,
    ) -> GenerateRequest {
        GenerateRequest {
            template: template.sentinel_text(),
            orientation_domain: domain_name.to_string(),
            orientation_word: orientation.word.clone(),
            allowed_words: self.config.enforce_vocabulary.then(|| vocab.all()),
            enforce_vocabulary: self.config.enforce_vocabulary,
            max_length: self.config.max_length,
            beam_size: self.config.beam_size,
        }
    }

    /// Send one request, retrying transport failures.
    pub fn send(&self, request: &GenerateRequest) -> Result<GenerateResponse, ClientError> {
        let mut attempt = 0;
        loop {
            let reply = self
                .agent
                .post(&self.endpoint("/generate"))
                .send_json(request);
            match self.read_reply(reply) {
                Err(e) if e.is_retriable() && attempt < self.config.retries => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                }
                other => return other,
            }
        }
    }

    /// Ask the service to fill `template` and check the reply.
    pub fn fill_external(
        &self,
        template: &MaskedTemplate,
        orientation: &OrientationDescriptor,
        vocab: &AllowedVocabulary,
        domain_name: &str,
    ) -> Result<ExternalFill, ClientError> {
        let request = self.request_for(template, orientation, vocab, domain_name);
        let reply = self.send(&request)?;
        let (tokens, stems) = tokenize(&reply.text, &self.corpus, self.stemmer.as_ref());

        if template.slot_count() == 0 {
            let (expected, _) = tokenize(&request.template, &self.corpus, self.stemmer.as_ref());
            if tokens != expected {
                return Err(ClientError::IdentityMismatch {
                    expected: request.template,
                    got: reply.text,
                });
            }
        }
        if self.config.enforce_vocabulary {
            let words = vocabulary_violations(&tokens, &stems, vocab);
            if !words.is_empty() {
                return Err(ClientError::Vocabulary { words });
            }
        }
        Ok(ExternalFill {
            text: reply.text,
            tokens,
            stems,
            slot_fills: reply.slot_fills,
            model_version: reply.model_version,
        })
    }
}

/// Pairs a client with the domain names it reports in requests.
pub struct RegisteredClient<'a> {
    pub client: &'a ServiceClient,
    pub domain_names: &'a [String],
}

impl ExternalReconstructor for RegisteredClient<'_> {
    fn reconstruct(
        &self,
        template: &MaskedTemplate,
        orientation: &OrientationDescriptor,
        vocab: &AllowedVocabulary,
    ) -> domcf_core::Result<(Vec<String>, Vec<String>)> {
        let name = self
            .domain_names
            .get(orientation.domain.index())
            .ok_or_else(|| domcf_core::Error::UnknownDomain(orientation.domain.to_string()))?;
        let fill = self
            .client
            .fill_external(template, orientation, vocab, name)?;
        Ok((fill.tokens, fill.stems))
    }
}
