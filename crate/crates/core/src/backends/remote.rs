use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    BackendError, DecodingParams, HypothesisPolarity, PolicyBackend, PolicyQuery, TransitionLogits,
};
use crate::catalog::{Item, SceneProfile};
use crate::dialogue::{serialize_state, DialogueState, Turn, TurnContext};

/// Overrides the configured endpoint when set.
pub const ENDPOINT_ENV: &str = "SREC_ENDPOINT";

pub const MAX_RETRIES: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    pub endpoint: String,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
    pub retries: u32,
    pub max_in_flight: usize,
    pub like_prompt: String,
    pub dislike_prompt: String,
}

impl Default for RemoteBackendConfig {
    fn default() -> Self {
        RemoteBackendConfig {
            endpoint: "http://127.0.0.1:8750".into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            max_in_flight: 8,
            like_prompt: "The user wants this item.".into(),
            dislike_prompt: "The user does not want this item.".into(),
        }
    }
}

impl RemoteBackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.retries > MAX_RETRIES {
            return Err(BackendError::Parameter(format!(
                "retries {} exceeds {MAX_RETRIES}",
                self.retries
            )));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Parameter(
                "max_in_flight must be positive".into(),
            ));
        }
        if self.endpoint.is_empty() {
            return Err(BackendError::Parameter("empty endpoint".into()));
        }
        Ok(())
    }

    /// Applies the endpoint environment override, if any.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.trim().is_empty() {
                self.endpoint = endpoint.trim().to_string();
            }
        }
        self
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

// Wire bodies. Requests borrow; the server side deserializes the owned forms.

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreStateRequest<C, I, S> {
    pub context: C,
    pub item: I,
    pub polarity: HypothesisPolarity,
    pub hypothesis: String,
    pub prior_states: Vec<S>,
    pub observed_state: S,
    /// Canonical text of `observed_state`, scored under teacher forcing.
    pub observed_text: String,
}

pub type OwnedScoreStateRequest = ScoreStateRequest<TurnContext, Item, DialogueState>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreStateResponse {
    #[serde(default)]
    pub loglik: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransitionRequest<H, P> {
    pub dialogue_id: String,
    pub turn: usize,
    pub history: H,
    pub current_profile: P,
}

pub type OwnedTransitionRequest = TransitionRequest<Vec<Turn>, SceneProfile>;

#[derive(Debug, Serialize, Deserialize)]
pub struct TransitionResponse {
    #[serde(default)]
    pub z_yes: Option<f64>,
    #[serde(default)]
    pub z_no: Option<f64>,
    #[serde(default)]
    pub target_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateRequest<P> {
    pub prompt: P,
    pub decoding: DecodingParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest<T> {
    pub text: T,
    pub dimension: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cond: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter poisoned");
        while *free == 0 {
            free = self.cond.wait(free).expect("limiter poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter poisoned") += 1;
        self.0.cond.notify_one();
    }
}

/// HTTP client for a model server speaking the JSON wire protocol.
pub struct RemoteBackend {
    config: RemoteBackendConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .finish()
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(config: RemoteBackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend {
            limiter: Limiter::new(config.max_in_flight),
            config,
            agent,
        })
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.config
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{route}", self.config.endpoint.trim_end_matches('/'))
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, Attempt> {
        let mut response = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(Attempt::Retry(format!("server returned {status}")));
        }
        if !status.is_success() {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::Protocol(format!(
                "{status}: {text}"
            ))));
        }
        response
            .body_mut()
            .read_json::<R>()
            .map_err(|e| Attempt::Fatal(BackendError::Protocol(format!("bad response body: {e}"))))
    }

    /// POSTs `body` to `route`, retrying transport failures.
    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        route: &str,
        body: &B,
    ) -> Result<R, BackendError> {
        let _permit = self.limiter.acquire();
        let url = self.url(route);
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.post_once(&url, body) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("{url}: attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }

    pub fn embed(&self, text: &str, dimension: usize) -> Result<Vec<f64>, BackendError> {
        let response: EmbedResponse = self.post("embed", &EmbedRequest { text, dimension })?;
        response
            .values
            .ok_or_else(|| BackendError::Capability("server returned no embedding".into()))
    }
}

impl PolicyBackend for RemoteBackend {
    fn state_loglik(&self, query: &PolicyQuery<'_>) -> Result<f64, BackendError> {
        let hypothesis = match query.polarity {
            HypothesisPolarity::Like => &self.config.like_prompt,
            HypothesisPolarity::Dislike => &self.config.dislike_prompt,
        };
        let body = ScoreStateRequest {
            context: query.context,
            item: query.item,
            polarity: query.polarity,
            hypothesis: hypothesis.clone(),
            prior_states: query.prior_states.iter().collect(),
            observed_state: query.observed_state,
            observed_text: serialize_state(query.observed_state),
        };
        let response: ScoreStateResponse = self.post("score_state", &body)?;
        match response.loglik {
            Some(l) if l.is_nan() || l > 0.0 => Err(BackendError::Protocol(format!(
                "invalid log-probability {l}"
            ))),
            Some(l) => Ok(l),
            None => Err(BackendError::Capability(
                "server returned no log-probabilities".into(),
            )),
        }
    }

    fn transition_inference(
        &self,
        context: &TurnContext,
        current_profile: &SceneProfile,
    ) -> Result<TransitionLogits, BackendError> {
        let body = TransitionRequest {
            dialogue_id: context.dialogue_id.clone(),
            turn: context.turn,
            history: &context.history,
            current_profile,
        };
        let response: TransitionResponse = self.post("transition", &body)?;
        match (response.z_yes, response.z_no) {
            (Some(z_yes), Some(z_no)) => Ok(TransitionLogits {
                z_yes,
                z_no,
                target_profile: response.target_profile.unwrap_or_default(),
                token: response.decision,
            }),
            _ => Err(BackendError::Capability(
                "server returned no decision logits".into(),
            )),
        }
    }

    fn generate_text(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        params.validate()?;
        let response: GenerateResponse = self.post(
            "generate",
            &GenerateRequest {
                prompt,
                decoding: *params,
            },
        )?;
        Ok(response.text)
    }
}
