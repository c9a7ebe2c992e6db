use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{BackendError, DecodingParams, PolicyBackend, PolicyQuery, TransitionLogits};
use crate::catalog::{Item, SceneProfile};
use crate::dialogue::{serialize_state, DialogueState, TurnContext};
use crate::retrieval::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockUserConfig {
    /// Rationality temperature; 0 makes the user uniformly random.
    pub beta: f64,
    pub action_space: Vec<DialogueState>,
    pub seed: u64,
}

impl Default for MockUserConfig {
    fn default() -> Self {
        MockUserConfig {
            beta: 1.0,
            action_space: vec![DialogueState::other()],
            seed: 0,
        }
    }
}

impl MockUserConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(BackendError::Parameter(format!(
                "beta {} must be >= 0",
                self.beta
            )));
        }
        if self.action_space.is_empty() {
            return Err(BackendError::Parameter("action space is empty".into()));
        }
        Ok(())
    }
}

/// Signed attribute agreement: +1 per matching slot, -1 per conflicting slot,
/// nothing for slots the item lacks. Comparison is case-insensitive.
pub fn compat(state: &DialogueState, item: &Item) -> i64 {
    state
        .slots
        .iter()
        .map(|(slot, value)| match item.attribute(slot) {
            Some(v) if v.eq_ignore_ascii_case(value) => 1,
            Some(_) => -1,
            None => 0,
        })
        .sum()
}

/// `log Σ exp(x)`, summed in ascending order so the result depends only on
/// the multiset of inputs.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let Some(&max) = sorted.last() else {
        return f64::NEG_INFINITY;
    };
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = sorted.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log-softmax over the action space of `±beta · compat(a, item)`.
pub fn mock_state_loglik(query: &PolicyQuery<'_>, config: &MockUserConfig) -> f64 {
    let sign = query.polarity.sign();
    let score = |a: &DialogueState| sign * config.beta * compat(a, query.item) as f64;
    let mut scores: Vec<f64> = config.action_space.iter().map(score).collect();
    if !config.action_space.contains(query.observed_state) {
        scores.push(score(query.observed_state));
    }
    score(query.observed_state) - log_sum_exp(&scores)
}

/// Deterministic simulated user and scripted generator.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub config: MockUserConfig,
    transition_scripts: HashMap<(String, usize), TransitionLogits>,
    text_scripts: HashMap<(String, usize), String>,
    lexicon: BTreeMap<String, BTreeSet<String>>,
}

impl MockBackend {
    pub fn new(config: MockUserConfig) -> Self {
        MockBackend {
            config,
            ..Default::default()
        }
    }

    pub fn with_transition_script(
        mut self,
        dialogue_id: impl Into<String>,
        turn: usize,
        logits: TransitionLogits,
    ) -> Self {
        self.add_transition_script(dialogue_id, turn, logits);
        self
    }

    pub fn add_transition_script(
        &mut self,
        dialogue_id: impl Into<String>,
        turn: usize,
        logits: TransitionLogits,
    ) {
        self.transition_scripts
            .insert((dialogue_id.into(), turn), logits);
    }

    /// Scripted reply to the state-tracking prompt of a given turn.
    pub fn with_text_script(
        mut self,
        dialogue_id: impl Into<String>,
        turn: usize,
        text: impl Into<String>,
    ) -> Self {
        self.text_scripts
            .insert((dialogue_id.into(), turn), text.into());
        self
    }

    /// Attribute vocabulary used for unscripted state extraction and the
    /// transition heuristic.
    pub fn with_lexicon<'a>(mut self, items: impl IntoIterator<Item = &'a Item>) -> Self {
        for item in items {
            for (slot, value) in &item.attributes {
                self.lexicon
                    .entry(slot.clone())
                    .or_default()
                    .insert(value.to_lowercase());
            }
        }
        self
    }

    fn known_values(&self) -> BTreeSet<&str> {
        self.lexicon
            .values()
            .flatten()
            .map(String::as_str)
            .collect()
    }

    /// Unscripted transition: user words that name attribute values missing
    /// from the current scene push toward moving; words present hold it.
    fn heuristic_transition(
        &self,
        context: &TurnContext,
        current: &SceneProfile,
    ) -> TransitionLogits {
        let text = context.last_user_text().unwrap_or("");
        let here: BTreeSet<String> = tokenize(&current.canonical_text).collect();
        let known = self.known_values();
        let mut present = 0.0;
        let mut absent = Vec::new();
        for token in tokenize(text) {
            if here.contains(&token) {
                present += 1.0;
            } else if known.contains(token.as_str()) {
                absent.push(token);
            }
        }
        TransitionLogits {
            z_yes: absent.len() as f64,
            z_no: present + 0.5,
            target_profile: if absent.is_empty() {
                text.to_string()
            } else {
                absent.join(" ")
            },
            token: None,
        }
    }

    fn extract_state(&self, utterance: &str) -> DialogueState {
        let lowered = format!(" {} ", tokenize(utterance).collect::<Vec<_>>().join(" "));
        let mut slots = Vec::new();
        for (slot, values) in &self.lexicon {
            for value in values {
                let needle = format!(" {} ", tokenize(value).collect::<Vec<_>>().join(" "));
                if needle.trim().is_empty() {
                    continue;
                }
                if lowered.contains(&needle) {
                    slots.push((slot.clone(), value.clone()));
                    break;
                }
            }
        }
        if slots.is_empty() {
            DialogueState::other()
        } else {
            DialogueState {
                intent: "REQUEST:GET".into(),
                slots,
            }
        }
    }

    fn respond_dst(&self, prompt: &str) -> String {
        let field = |name: &str| {
            prompt
                .lines()
                .find_map(|l| l.strip_prefix(name))
                .map(str::trim)
        };
        let dialogue = field("DIALOGUE:").unwrap_or("");
        let turn = field("TURN:").and_then(|t| t.parse().ok()).unwrap_or(0);
        if let Some(text) = self.text_scripts.get(&(dialogue.to_string(), turn)) {
            return text.clone();
        }
        let utterance = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("USER:"))
            .unwrap_or("");
        serialize_state(&self.extract_state(utterance))
    }
}

fn respond_summary(prompt: &str) -> String {
    let items = prompt
        .lines()
        .find_map(|l| l.strip_prefix("ITEMS:"))
        .map(str::trim)
        .unwrap_or("");
    format!("A display of {items}.")
}

struct Candidate<'a> {
    id: &'a str,
    values: Vec<&'a str>,
}

fn parse_candidate(line: &str) -> Option<Candidate<'_>> {
    let rest = line.strip_prefix("- ")?;
    let (id, tail) = rest.split_once(" {")?;
    let body = tail.split_once(" }").map(|(b, _)| b).unwrap_or(tail);
    let values = body
        .split(';')
        .filter_map(|pair| pair.split_once('=').map(|(_, v)| v.trim()))
        .filter(|v| !v.is_empty())
        .collect();
    Some(Candidate {
        id: id.trim(),
        values,
    })
}

/// Template response built from the prompt's candidate list.
pub fn template_response(prompt: &str) -> String {
    let mut candidates = Vec::new();
    let mut in_candidates = false;
    let mut transition_to = None;
    for line in prompt.lines() {
        if line == "CANDIDATES:" {
            in_candidates = true;
            continue;
        }
        if in_candidates {
            match parse_candidate(line) {
                Some(c) => {
                    candidates.push(c);
                    continue;
                }
                None => in_candidates = false,
            }
        }
        if let Some(rest) = line.strip_prefix("TRANSITION: yes ") {
            transition_to = Some(rest.trim());
        }
    }
    let mut out = String::new();
    if let Some(scene) = transition_to {
        if candidates.is_empty() {
            return format!("Let's head over to {scene}, it should have what you are looking for.");
        }
        out.push_str(&format!("Let's head over to {scene}. "));
    }
    match candidates.split_first() {
        Some((first, rest)) => {
            out.push_str(&format!("I recommend {}", first.id));
            if !first.values.is_empty() {
                out.push_str(&format!(", the {}", first.values.join(" ")));
            }
            out.push('.');
            if !rest.is_empty() {
                let ids: Vec<&str> = rest.iter().map(|c| c.id).collect();
                out.push_str(&format!(" You might also like {}.", ids.join(", ")));
            }
        }
        None => out.push_str("Could you tell me more about what you are looking for?"),
    }
    out
}

fn truncate_tokens(text: String, max_tokens: u32) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_tokens as usize {
        text
    } else {
        words[..max_tokens as usize].join(" ")
    }
}

impl PolicyBackend for MockBackend {
    fn state_loglik(&self, query: &PolicyQuery<'_>) -> Result<f64, BackendError> {
        self.config.validate()?;
        Ok(mock_state_loglik(query, &self.config))
    }

    fn transition_inference(
        &self,
        context: &TurnContext,
        current_profile: &SceneProfile,
    ) -> Result<TransitionLogits, BackendError> {
        let key = (context.dialogue_id.clone(), context.turn);
        Ok(match self.transition_scripts.get(&key) {
            Some(script) => script.clone(),
            None => self.heuristic_transition(context, current_profile),
        })
    }

    fn generate_text(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        params.validate()?;
        let text = if prompt.starts_with("TASK: DST") {
            self.respond_dst(prompt)
        } else if prompt.starts_with("TASK: SUMMARY") {
            respond_summary(prompt)
        } else {
            template_response(prompt)
        };
        Ok(truncate_tokens(text, params.max_tokens))
    }
}
