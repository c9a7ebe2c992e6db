//! Dialogue corpora: ingestion, statistics and transition-balanced splits.
//!
//! A corpus is an environment file plus one or more dialogue files:
//!
//! ```json
//! { "dialogues": [ {
//!     "dialogue_id": "d01",
//!     "initial_scene_id": "store-1",
//!     "turns": [
//!       { "speaker": "user", "text": "any red jackets?", "scene_id": "store-1",
//!         "state": "REQUEST:GET | color=red; type=jacket", "target_item_ids": ["i1"],
//!         "transition_logits": { "z_yes": -2.0, "z_no": 2.0, "target_profile": "" } },
//!       { "speaker": "system", "text": "Try i1, the red jacket." }
//!     ] } ] }
//! ```
//!
//! Every user turn names the scene the conversation is grounded in. A user
//! turn is a transition turn when its scene differs from the previous one
//! (the first is compared with `initial_scene_id`, which defaults to the
//! first turn's scene).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::backends::TransitionLogits;
use crate::catalog::{load_environment, Environment};
use crate::dialogue::{parse_state, Conversation, DialogueState, Speaker, StateSchema, Turn};

#[derive(Debug, Clone, Deserialize)]
struct RawCorpus {
    dialogues: Vec<RawDialogue>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDialogue {
    dialogue_id: String,
    #[serde(default)]
    initial_scene_id: Option<String>,
    turns: Vec<RawTurn>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    speaker: Speaker,
    text: String,
    #[serde(default)]
    scene_id: Option<String>,
    #[serde(default)]
    state: Option<String>,
    #[serde(default)]
    target_item_ids: Vec<String>,
    #[serde(default)]
    transition_logits: Option<TransitionLogits>,
}

/// Gold annotations of one user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTurnGold {
    pub scene_id: String,
    pub transition: bool,
    pub target_item_ids: Vec<String>,
    pub transition_logits: Option<TransitionLogits>,
    /// Text of the system turn that answers this user turn.
    pub response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDialogue {
    pub conversation: Conversation,
    pub initial_scene_id: String,
    /// One entry per user turn.
    pub gold: Vec<UserTurnGold>,
}

impl CorpusDialogue {
    pub fn has_transition(&self) -> bool {
        self.gold.iter().any(|g| g.transition)
    }

    pub fn id(&self) -> &str {
        &self.conversation.dialogue_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub environment: Environment,
    pub dialogues: Vec<CorpusDialogue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub utterances: usize,
    pub user_turns: usize,
    pub scenes: usize,
    pub referenced_scenes: usize,
    pub items: usize,
    pub transition_dialogues: usize,
    pub non_transition_dialogues: usize,
    pub transition_turns: usize,
    pub annotated_states: usize,
    pub target_turns: usize,
}

impl Corpus {
    pub fn stats(&self) -> CorpusStats {
        let referenced: BTreeSet<&str> = self
            .dialogues
            .iter()
            .flat_map(|d| {
                std::iter::once(d.initial_scene_id.as_str())
                    .chain(d.gold.iter().map(|g| g.scene_id.as_str()))
            })
            .collect();
        let transition_dialogues = self.dialogues.iter().filter(|d| d.has_transition()).count();
        let user_turns = self.dialogues.iter().map(|d| d.gold.len()).sum();
        CorpusStats {
            dialogues: self.dialogues.len(),
            utterances: self
                .dialogues
                .iter()
                .map(|d| d.conversation.turns.len())
                .sum(),
            user_turns,
            scenes: self.environment.scene_count(),
            referenced_scenes: referenced.len(),
            items: self.environment.item_count(),
            transition_dialogues,
            non_transition_dialogues: self.dialogues.len() - transition_dialogues,
            transition_turns: self
                .dialogues
                .iter()
                .flat_map(|d| &d.gold)
                .filter(|g| g.transition)
                .count(),
            annotated_states: self
                .dialogues
                .iter()
                .flat_map(|d| d.conversation.user_turns())
                .filter(|t| t.state.is_some())
                .count(),
            target_turns: self
                .dialogues
                .iter()
                .flat_map(|d| &d.gold)
                .filter(|g| !g.target_item_ids.is_empty())
                .count(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            environment: self.environment.clone(),
            dialogues: indices.iter().map(|&i| self.dialogues[i].clone()).collect(),
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn convert(
    raw: RawDialogue,
    env: &Environment,
    schema: &StateSchema,
) -> Result<CorpusDialogue, HarnessError> {
    let id = raw.dialogue_id.clone();
    let dangling = |turn: usize, scene: &str| HarnessError::DanglingScene {
        dialogue: id.clone(),
        turn,
        scene: scene.to_string(),
    };
    let mut conversation = Conversation::new(raw.dialogue_id.clone());
    let mut gold: Vec<UserTurnGold> = Vec::new();
    let first_scene = raw
        .turns
        .iter()
        .find(|t| t.speaker == Speaker::User)
        .and_then(|t| t.scene_id.clone());
    let initial = raw
        .initial_scene_id
        .clone()
        .or(first_scene)
        .ok_or_else(|| HarnessError::Corpus {
            dialogue: id.clone(),
            turn: 0,
            message: "no scene for the first user turn".into(),
        })?;
    if env.scene(&initial).is_none() {
        return Err(dangling(0, &initial));
    }
    let mut previous = initial.clone();
    for (pos, t) in raw.turns.into_iter().enumerate() {
        let index = pos + 1;
        if let Some(scene) = &t.scene_id {
            if env.scene(scene).is_none() {
                return Err(dangling(index, scene));
            }
        }
        match t.speaker {
            Speaker::User => {
                let scene_id = t.scene_id.clone().ok_or_else(|| HarnessError::Corpus {
                    dialogue: id.clone(),
                    turn: index,
                    message: "user turn lacks scene_id".into(),
                })?;
                let state = t
                    .state
                    .as_deref()
                    .map(|s| parse_state(s, schema))
                    .transpose()
                    .map_err(|e| HarnessError::Corpus {
                        dialogue: id.clone(),
                        turn: index,
                        message: e.to_string(),
                    })?;
                for item in &t.target_item_ids {
                    if env.item(&scene_id, item).is_none() {
                        return Err(HarnessError::DanglingItem {
                            dialogue: id.clone(),
                            turn: index,
                            item: item.clone(),
                        });
                    }
                }
                gold.push(UserTurnGold {
                    transition: scene_id != previous,
                    scene_id: scene_id.clone(),
                    target_item_ids: t.target_item_ids,
                    transition_logits: t.transition_logits,
                    response: None,
                });
                previous = scene_id;
                conversation.turns.push(Turn {
                    index,
                    speaker: Speaker::User,
                    text: t.text,
                    state,
                });
            }
            Speaker::System => {
                if t.state.is_some()
                    || !t.target_item_ids.is_empty()
                    || t.transition_logits.is_some()
                {
                    return Err(HarnessError::Corpus {
                        dialogue: id.clone(),
                        turn: index,
                        message: "system turns carry no user annotations".into(),
                    });
                }
                if let Some(last) = gold.last_mut() {
                    if last.response.is_none() {
                        last.response = Some(t.text.clone());
                    }
                }
                conversation.turns.push(Turn {
                    index,
                    speaker: Speaker::System,
                    text: t.text,
                    state: None,
                });
            }
        }
    }
    if gold.is_empty() {
        return Err(HarnessError::Corpus {
            dialogue: id,
            turn: 0,
            message: "dialogue has no user turns".into(),
        });
    }
    Ok(CorpusDialogue {
        conversation,
        initial_scene_id: initial,
        gold,
    })
}

pub fn parse_dialogues(
    text: &str,
    origin: &str,
    env: &Environment,
    schema: &StateSchema,
) -> Result<Vec<CorpusDialogue>, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawCorpus = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Parse {
        origin: origin.to_string(),
        message: format!("{}: {}", e.path(), e.inner()),
    })?;
    raw.dialogues
        .into_iter()
        .map(|d| convert(d, env, schema))
        .collect()
}

/// Files making up a corpus: a directory holding `environment.json` and
/// `dialogues.json`, or an environment file followed by dialogue files.
pub fn corpus_files(paths: &[PathBuf]) -> Result<(PathBuf, Vec<PathBuf>), HarnessError> {
    match paths {
        [dir] if dir.is_dir() => Ok((
            dir.join("environment.json"),
            vec![dir.join("dialogues.json")],
        )),
        [env, rest @ ..] if !rest.is_empty() => Ok((env.clone(), rest.to_vec())),
        _ => Err(HarnessError::Config(
            "expected a corpus directory or an environment file followed by dialogue files".into(),
        )),
    }
}

pub fn ingest_dataset(paths: &[PathBuf], schema: &StateSchema) -> Result<Corpus, HarnessError> {
    let (env_path, dialogue_paths) = corpus_files(paths)?;
    let environment = load_environment(&env_path)?;
    let mut dialogues = Vec::new();
    let mut seen = BTreeSet::new();
    for path in dialogue_paths {
        for d in parse_dialogues(
            &read(&path)?,
            &path.display().to_string(),
            &environment,
            schema,
        )? {
            if !seen.insert(d.id().to_string()) {
                return Err(HarnessError::Corpus {
                    dialogue: d.id().to_string(),
                    turn: 0,
                    message: "duplicate dialogue id".into(),
                });
            }
            dialogues.push(d);
        }
    }
    Ok(Corpus {
        environment,
        dialogues,
    })
}

/// `transition : non-transition` proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub transition: usize,
    pub non_transition: usize,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio {
            transition: 1,
            non_transition: 1,
        }
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("ratio `{s}` is not of the form a:b"))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| format!("ratio `{s}`: {e}"))
        };
        let ratio = SplitRatio {
            transition: parse(a)?,
            non_transition: parse(b)?,
        };
        if ratio.transition == 0 || ratio.non_transition == 0 {
            return Err(format!("ratio `{s}` has a zero part"));
        }
        Ok(ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// Selected corpus indices, ascending.
    pub transition: Vec<usize>,
    pub non_transition: Vec<usize>,
}

impl Split {
    pub fn indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .transition
            .iter()
            .chain(&self.non_transition)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }
}

/// Class sizes `(r_a·m, r_b·m)` for the largest `m` that fits both classes.
pub fn split_sizes(available: (usize, usize), ratio: SplitRatio) -> (usize, usize) {
    let m = (available.0 / ratio.transition).min(available.1 / ratio.non_transition);
    (ratio.transition * m, ratio.non_transition * m)
}

/// Seeded sampling without replacement from each class at the requested ratio.
pub fn balance_split(corpus: &Corpus, ratio: SplitRatio, seed: u64) -> Result<Split, HarnessError> {
    if ratio.transition == 0 || ratio.non_transition == 0 {
        return Err(HarnessError::Config(
            "split ratio parts must be positive".into(),
        ));
    }
    let (with, without): (Vec<usize>, Vec<usize>) =
        (0..corpus.dialogues.len()).partition(|&i| corpus.dialogues[i].has_transition());
    if with.is_empty() || without.is_empty() {
        return Err(HarnessError::EmptyClass {
            transition: with.len(),
            non_transition: without.len(),
        });
    }
    let (na, nb) = split_sizes((with.len(), without.len()), ratio);
    if na == 0 {
        return Err(HarnessError::EmptyClass {
            transition: with.len(),
            non_transition: without.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |pool: &[usize], n: usize| {
        let mut picked: Vec<usize> = sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        picked
    };
    let transition = draw(&with, na);
    let non_transition = draw(&without, nb);
    Ok(Split {
        transition,
        non_transition,
    })
}

/// Annotated state of each user turn, if any.
pub fn gold_states(d: &CorpusDialogue) -> Vec<Option<DialogueState>> {
    d.conversation
        .user_turns()
        .map(|t| t.state.clone())
        .collect()
}
