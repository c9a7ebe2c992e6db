//! Policy (`π`) and generation (`F`) backends.
//!
//! [`MockBackend`] is a softmax-rational simulated user whose likelihoods can
//! be enumerated exactly; [`RemoteBackend`] talks to a model server over HTTP
//! and [`server`] exposes any backend with the same wire protocol.

mod mock;
mod remote;
pub mod server;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Item, Scene, SceneProfile, Summarizer};
use crate::dialogue::{DialogueState, TurnContext};

pub use mock::{
    compat, log_sum_exp, mock_state_loglik, template_response, MockBackend, MockUserConfig,
};
pub use remote::{RemoteBackend, RemoteBackendConfig, ENDPOINT_ENV};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend lacks capability: {0}")]
    Capability(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisPolarity {
    Like,
    Dislike,
}

impl HypothesisPolarity {
    pub const BOTH: [HypothesisPolarity; 2] =
        [HypothesisPolarity::Like, HypothesisPolarity::Dislike];

    /// +1 for like, -1 for dislike.
    pub fn sign(self) -> f64 {
        match self {
            HypothesisPolarity::Like => 1.0,
            HypothesisPolarity::Dislike => -1.0,
        }
    }
}

/// One likelihood query: how probable is `observed_state` if the user
/// likes (or dislikes) `item`, given the context and earlier states.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicyQuery<'a> {
    pub context: &'a TurnContext,
    pub item: &'a Item,
    pub polarity: HypothesisPolarity,
    pub prior_states: &'a [DialogueState],
    pub observed_state: &'a DialogueState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub top_p: f64,
    pub top_k: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            top_p: 0.75,
            top_k: 40,
            temperature: 0.7,
            max_tokens: 256,
        }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Parameter(format!(
                "top_p {} not in (0, 1]",
                self.top_p
            )));
        }
        if self.top_k == 0 {
            return Err(BackendError::Parameter("top_k must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::Parameter(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Parameter(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Raw decision logits and generated target profile for one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLogits {
    pub z_yes: f64,
    pub z_no: f64,
    pub target_profile: String,
    /// Literal decision token, when the backend emits one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

pub trait PolicyBackend: Send + Sync {
    /// `log π(observed_state | item, polarity, context, prior_states)`.
    fn state_loglik(&self, query: &PolicyQuery<'_>) -> Result<f64, BackendError>;

    fn transition_inference(
        &self,
        context: &TurnContext,
        current_profile: &SceneProfile,
    ) -> Result<TransitionLogits, BackendError>;

    fn generate_text(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError>;
}

impl<B: PolicyBackend + ?Sized> PolicyBackend for std::sync::Arc<B> {
    fn state_loglik(&self, query: &PolicyQuery<'_>) -> Result<f64, BackendError> {
        (**self).state_loglik(query)
    }

    fn transition_inference(
        &self,
        context: &TurnContext,
        current_profile: &SceneProfile,
    ) -> Result<TransitionLogits, BackendError> {
        (**self).transition_inference(context, current_profile)
    }

    fn generate_text(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        (**self).generate_text(prompt, params)
    }
}

pub fn summary_prompt(scene: &Scene) -> String {
    let descriptors: Vec<String> = scene.items.iter().map(Item::descriptor).collect();
    let mut prompt = String::from("TASK: SUMMARY\n");
    prompt.push_str("INSTRUCTION: Describe the scene layout and its items in one sentence.\n");
    prompt.push_str(&format!("SCENE: {}\n", scene.scene_id));
    prompt.push_str(&format!("ITEMS: {}\n", descriptors.join(", ")));
    if let Some(notes) = &scene.spatial_notes {
        prompt.push_str(&format!("NOTES: {notes}\n"));
    }
    prompt.push_str("SUMMARY:");
    prompt
}

/// Uses a text backend as a scene summarizer.
pub struct BackendSummarizer<'a> {
    pub backend: &'a dyn PolicyBackend,
    pub params: DecodingParams,
}

impl Summarizer for BackendSummarizer<'_> {
    fn summarize(&self, scene: &Scene) -> Result<String, String> {
        self.backend
            .generate_text(&summary_prompt(scene), &self.params)
            .map(|s| s.trim().to_string())
            .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding_defaults_are_valid() {
        let p = DecodingParams::default();
        assert_eq!(
            (p.top_p, p.top_k, p.temperature, p.max_tokens),
            (0.75, 40, 0.7, 256)
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn zero_max_tokens_is_rejected() {
        let p = DecodingParams {
            max_tokens: 0,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(BackendError::Parameter(_))));
        let p = DecodingParams {
            top_p: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
