//! Conversations, the `<intent, slot, value>` dialogue-state schema and
//! per-turn situational context.
//!
//! States have a canonical wire form `INTENT | slot=value; slot=value`.
//! Values escape `;` and `\` with a backslash. Slot order is semantic and kept.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, PolicyBackend};
use crate::catalog::{Scene, SceneProfile};

pub const OTHER_INTENT: &str = "OTHER";
pub const OTHER_SLOT: &str = "other";

#[derive(Debug, Error, PartialEq)]
pub enum DialogueError {
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("malformed state at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("turn {t} out of range 1..={max}")]
    TurnOutOfRange { t: usize, max: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueState {
    pub intent: String,
    #[serde(default)]
    pub slots: Vec<(String, String)>,
}

impl DialogueState {
    pub fn new<I, K, V>(intent: impl Into<String>, slots: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        DialogueState {
            intent: intent.into(),
            slots: slots
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn other() -> Self {
        DialogueState {
            intent: OTHER_INTENT.to_string(),
            slots: Vec::new(),
        }
    }
}

impl std::fmt::Display for DialogueState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize_state(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based position in the conversation.
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<DialogueState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(dialogue_id: impl Into<String>) -> Self {
        Conversation {
            dialogue_id: dialogue_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        speaker: Speaker,
        text: impl Into<String>,
        state: Option<DialogueState>,
    ) {
        let index = self.turns.len() + 1;
        self.turns.push(Turn {
            index,
            speaker,
            text: text.into(),
            state,
        });
    }

    /// Number of user turns (T).
    pub fn user_turn_count(&self) -> usize {
        self.user_turns().count()
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }

    /// Position in `turns` of the `t`-th user turn (1-based `t`).
    pub fn user_turn_position(&self, t: usize) -> Option<usize> {
        if t == 0 {
            return None;
        }
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, turn)| turn.speaker == Speaker::User)
            .nth(t - 1)
            .map(|(pos, _)| pos)
    }

    /// Indices that break contiguity or strict user/system alternation.
    pub fn alternation_breaks(&self) -> Vec<usize> {
        self.turns
            .windows(2)
            .filter(|w| w[0].speaker == w[1].speaker || w[1].index != w[0].index + 1)
            .map(|w| w[1].index)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSchema {
    pub intents: Vec<String>,
    pub slots: Vec<String>,
}

impl Default for StateSchema {
    fn default() -> Self {
        let intents = [
            "INFORM:GET",
            "REQUEST:COMPARE",
            "REQUEST:ADD_TO_CART",
            "INFORM:REFINE",
            "REQUEST:DISAMBIGUATE",
            "ASK:GET",
            "INFORM:DISAMBIGUATE",
            "REQUEST:GET",
            OTHER_INTENT,
        ];
        let slots = [
            "asset type",
            "customer review",
            "available sizes",
            "color",
            "pattern",
            "brand",
            "sleeve length",
            "type",
            "price",
            "size",
            "customer rating",
            "materials",
            OTHER_SLOT,
        ];
        StateSchema {
            intents: intents.iter().map(|s| s.to_string()).collect(),
            slots: slots.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl StateSchema {
    pub fn new(intents: Vec<String>, slots: Vec<String>) -> Result<Self, DialogueError> {
        if intents.is_empty() || slots.is_empty() {
            return Err(DialogueError::InvalidSchema(
                "intents and slots must be non-empty".into(),
            ));
        }
        for list in [&intents, &slots] {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = list.iter().find(|s| !seen.insert(s.as_str())) {
                return Err(DialogueError::InvalidSchema(format!(
                    "duplicate entry `{dup}`"
                )));
            }
        }
        Ok(StateSchema { intents, slots })
    }

    pub fn has_intent(&self, intent: &str) -> bool {
        intent == OTHER_INTENT || self.intents.iter().any(|i| i == intent)
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.canonical_slot(slot).is_some()
    }

    /// Case-insensitive slot lookup returning the schema's spelling.
    pub fn canonical_slot(&self, slot: &str) -> Option<&str> {
        if slot.eq_ignore_ascii_case(OTHER_SLOT) {
            return Some(OTHER_SLOT);
        }
        self.slots
            .iter()
            .find(|s| s.eq_ignore_ascii_case(slot))
            .map(String::as_str)
    }

    pub fn validate(&self, state: &DialogueState) -> Result<(), DialogueError> {
        if !self.has_intent(&state.intent) {
            return Err(DialogueError::UnknownIntent(state.intent.clone()));
        }
        for (slot, _) in &state.slots {
            if self.canonical_slot(slot) != Some(slot.as_str()) {
                return Err(DialogueError::UnknownSlot(slot.clone()));
            }
        }
        Ok(())
    }
}

fn escape_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        if ch == '\\' || ch == ';' {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

pub fn serialize_state(state: &DialogueState) -> String {
    let pairs: Vec<String> = state
        .slots
        .iter()
        .map(|(slot, value)| format!("{slot}={}", escape_value(value)))
        .collect();
    if pairs.is_empty() {
        format!("{} |", state.intent)
    } else {
        format!("{} | {}", state.intent, pairs.join("; "))
    }
}

/// Splits the slot section on unescaped `;`, returning (start offset, raw
/// unescaped text) for each pair.
fn split_pairs(section: &str, base: usize) -> Result<Vec<(usize, String)>, DialogueError> {
    let mut pairs = Vec::new();
    let mut current = String::new();
    let mut start = base;
    let mut chars = section.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some((_, next)) => current.push(next),
                None => {
                    return Err(DialogueError::Malformed {
                        offset: base + i,
                        message: "dangling escape".into(),
                    })
                }
            },
            ';' => {
                pairs.push((start, std::mem::take(&mut current)));
                start = base + i + 1;
            }
            _ => current.push(ch),
        }
    }
    pairs.push((start, current));
    Ok(pairs)
}

/// Parses `INTENT | slot=value; ...` and validates it against `schema`.
pub fn parse_state(text: &str, schema: &StateSchema) -> Result<DialogueState, DialogueError> {
    let (intent_part, rest, rest_offset) = match text.find('|') {
        Some(bar) => (&text[..bar], &text[bar + 1..], bar + 1),
        None => (text, "", text.len()),
    };
    let intent = intent_part.trim();
    if intent.is_empty() {
        return Err(DialogueError::Malformed {
            offset: 0,
            message: "missing intent".into(),
        });
    }
    if !schema.has_intent(intent) {
        return Err(DialogueError::UnknownIntent(intent.to_string()));
    }
    let mut slots = Vec::new();
    if !rest.trim().is_empty() {
        for (offset, raw) in split_pairs(rest, rest_offset)? {
            let Some(eq) = raw.find('=') else {
                return Err(DialogueError::Malformed {
                    offset,
                    message: format!("expected slot=value, found `{}`", raw.trim()),
                });
            };
            let slot = raw[..eq].trim();
            if slot.is_empty() {
                return Err(DialogueError::Malformed {
                    offset,
                    message: "empty slot name".into(),
                });
            }
            let canonical = schema
                .canonical_slot(slot)
                .ok_or_else(|| DialogueError::UnknownSlot(slot.to_string()))?;
            slots.push((canonical.to_string(), raw[eq + 1..].trim().to_string()));
        }
    }
    Ok(DialogueState {
        intent: intent.to_string(),
        slots,
    })
}

/// Situational context for user turn `t`: history `H_t` plus scene and profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnContext {
    pub dialogue_id: String,
    pub turn: usize,
    pub history: Vec<Turn>,
    pub scene: Arc<Scene>,
    pub profile: Arc<SceneProfile>,
}

impl TurnContext {
    pub fn last_user_text(&self) -> Option<&str> {
        self.history
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::User)
            .map(|t| t.text.as_str())
    }

    /// Same history grounded in a different scene.
    pub fn with_scene(&self, scene: Arc<Scene>, profile: Arc<SceneProfile>) -> TurnContext {
        TurnContext {
            scene,
            profile,
            ..self.clone()
        }
    }
}

/// History holds every turn before the `t`-th user turn plus that user turn.
pub fn context_at(
    conv: &Conversation,
    t: usize,
    scene: Arc<Scene>,
    profile: Arc<SceneProfile>,
) -> Result<TurnContext, DialogueError> {
    let pos = conv
        .user_turn_position(t)
        .ok_or(DialogueError::TurnOutOfRange {
            t,
            max: conv.user_turn_count(),
        })?;
    Ok(TurnContext {
        dialogue_id: conv.dialogue_id.clone(),
        turn: t,
        history: conv.turns[..=pos].to_vec(),
        scene,
        profile,
    })
}

/// Prompt asking a text backend for the state of user turn `t`.
pub fn dst_prompt(
    conv: &Conversation,
    t: usize,
    schema: &StateSchema,
) -> Result<String, DialogueError> {
    let pos = conv
        .user_turn_position(t)
        .ok_or(DialogueError::TurnOutOfRange {
            t,
            max: conv.user_turn_count(),
        })?;
    let mut prompt = String::new();
    prompt.push_str("TASK: DST\n");
    prompt.push_str("INSTRUCTION: Extract the dialogue state of the last user utterance as `INTENT | slot=value; ...`.\n");
    prompt.push_str(&format!("INTENTS: {}\n", schema.intents.join(", ")));
    prompt.push_str(&format!("SLOTS: {}\n", schema.slots.join(", ")));
    prompt.push_str(&format!("DIALOGUE: {}\n", conv.dialogue_id));
    prompt.push_str(&format!("TURN: {t}\n"));
    prompt.push_str("HISTORY:\n");
    for turn in &conv.turns[..pos] {
        push_history_line(&mut prompt, turn);
    }
    prompt.push_str(&format!("USER: {}\n", conv.turns[pos].text));
    prompt.push_str("STATE:");
    Ok(prompt)
}

pub(crate) fn push_history_line(out: &mut String, turn: &Turn) {
    let who = match turn.speaker {
        Speaker::User => "USER",
        Speaker::System => "SYSTEM",
    };
    out.push_str(who);
    out.push_str(": ");
    out.push_str(&turn.text.replace('\n', " "));
    out.push('\n');
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedStates {
    pub states: Vec<DialogueState>,
    pub warnings: Vec<String>,
}

/// One state per user turn. Gold annotations win; otherwise the backend is
/// asked and unparseable output is repaired to `OTHER |`.
pub fn track_states(
    conv: &Conversation,
    backend: &dyn PolicyBackend,
    schema: &StateSchema,
) -> Result<TrackedStates, BackendError> {
    let mut states = Vec::new();
    let mut warnings = Vec::new();
    for t in 1..=conv.user_turn_count() {
        let (state, warning) = track_turn(conv, t, backend, schema)?;
        states.push(state);
        warnings.extend(warning);
    }
    Ok(TrackedStates { states, warnings })
}

pub(crate) fn track_turn(
    conv: &Conversation,
    t: usize,
    backend: &dyn PolicyBackend,
    schema: &StateSchema,
) -> Result<(DialogueState, Option<String>), BackendError> {
    let pos = conv.user_turn_position(t).expect("t within user turns");
    if let Some(gold) = &conv.turns[pos].state {
        return Ok((gold.clone(), None));
    }
    let prompt = dst_prompt(conv, t, schema).expect("t within user turns");
    let raw = backend.generate_text(&prompt, &crate::backends::DecodingParams::default())?;
    let line = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    match parse_state(line, schema) {
        Ok(state) => Ok((state, None)),
        Err(e) => {
            let msg = format!(
                "dialogue `{}` turn {t}: unusable state `{}` ({e}); using OTHER",
                conv.dialogue_id,
                line.trim()
            );
            log::warn!("{msg}");
            Ok((DialogueState::other(), Some(msg)))
        }
    }
}
