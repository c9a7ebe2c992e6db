//! Seeded synthetic worlds for the simulated benchmark.
//!
//! Every item carries a value for each of the `n_attributes` slots, drawn from
//! a shared per-slot domain of `values_per_attribute` values, and the user's
//! action space is every single-slot `REQUEST:GET` state. Each item then
//! agrees with exactly one action per slot and conflicts with the rest, so the
//! softmax normalizers of the simulated user are the same for every item.
//!
//! An episode picks a target scene and item. With probability
//! `transition_rate` it starts in a different scene, and its first turn
//! carries a scripted move toward the target scene. User states are sampled
//! from the simulated user's like-policy toward the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::backends::{compat, MockUserConfig, TransitionLogits};
use crate::catalog::{build_profile, Environment, Item, Scene};
use crate::dialogue::DialogueState;

#[rustfmt::skip]
pub const SLOTS: [&str; 7] = ["color", "type", "pattern", "materials", "brand", "size", "sleeve length"];

#[rustfmt::skip]
const VALUES: [[&str; 8]; 7] = [
    ["red", "blue", "green", "black", "white", "grey", "yellow", "brown"],
    ["jacket", "shirt", "dress", "hat", "pants", "skirt", "coat", "sweater"],
    ["plain", "striped", "checked", "floral", "dotted", "plaid", "spotted", "camouflage"],
    ["cotton", "wool", "denim", "leather", "linen", "silk", "polyester", "velvet"],
    ["acme", "nordic", "urbanite", "coastal", "summit", "vertex", "harbor", "meadow"],
    ["xs", "small", "medium", "large", "xl", "xxl", "petite", "tall"],
    ["short", "long", "half", "sleeveless", "cap", "elbow", "raglan", "bell"],
];

pub const REQUEST_INTENT: &str = "REQUEST:GET";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldConfig {
    pub n_scenes: usize,
    pub items_per_scene: usize,
    pub n_attributes: usize,
    pub values_per_attribute: usize,
    pub n_turns: usize,
    pub episodes: usize,
    pub beta: f64,
    /// Share of episodes that start outside the target scene.
    pub transition_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            n_scenes: 4,
            items_per_scene: 10,
            n_attributes: 4,
            values_per_attribute: 5,
            n_turns: 6,
            episodes: 200,
            beta: 5.0,
            transition_rate: 0.5,
            seed: 7,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_scenes == 0
            || self.items_per_scene == 0
            || self.n_turns == 0
            || self.episodes == 0
        {
            return bad("scenes, items, turns and episodes must be positive".into());
        }
        if !(1..=SLOTS.len()).contains(&self.n_attributes) {
            return bad(format!("n_attributes must be in 1..={}", SLOTS.len()));
        }
        if !(2..=VALUES[0].len()).contains(&self.values_per_attribute) {
            return bad(format!(
                "values_per_attribute must be in 2..={}",
                VALUES[0].len()
            ));
        }
        let distinct = (self.values_per_attribute as f64).powi(self.n_attributes as i32);
        if self.items_per_scene as f64 > distinct {
            return bad(format!(
                "{} items cannot have distinct attributes over {distinct} combinations",
                self.items_per_scene
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be >= 0", self.beta));
        }
        if !(0.0..=1.0).contains(&self.transition_rate) {
            return bad(format!(
                "transition_rate {} not in [0, 1]",
                self.transition_rate
            ));
        }
        Ok(())
    }

    /// Every single-slot request over the world's value domain.
    pub fn action_space(&self) -> Vec<DialogueState> {
        SLOTS[..self.n_attributes]
            .iter()
            .zip(&VALUES)
            .flat_map(|(slot, values)| {
                values[..self.values_per_attribute]
                    .iter()
                    .map(move |v| DialogueState::new(REQUEST_INTENT, [(*slot, *v)]))
            })
            .collect()
    }

    pub fn user(&self) -> MockUserConfig {
        MockUserConfig {
            beta: self.beta,
            action_space: self.action_space(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub start_scene_id: String,
    pub target_scene_id: String,
    pub target_item_id: String,
    pub utterances: Vec<String>,
    pub states: Vec<DialogueState>,
    /// Scripted decision logits, one per turn.
    pub transition_logits: Vec<TransitionLogits>,
}

impl Episode {
    pub fn starts_elsewhere(&self) -> bool {
        self.start_scene_id != self.target_scene_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: SyntheticWorldConfig,
    pub environment: Environment,
    pub episodes: Vec<Episode>,
}

impl SyntheticWorld {
    /// SHA-256 over the environment and episodes in canonical JSON.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.environment.to_json().as_bytes());
        hasher.update(serde_json::to_vec(&self.episodes).expect("episodes serialize"));
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn scene_id(n: usize) -> String {
    format!("scene-{n:02}")
}

fn generate_scene(config: &SyntheticWorldConfig, n: usize, rng: &mut ChaCha8Rng) -> Scene {
    let mut tuples: Vec<Vec<usize>> = Vec::with_capacity(config.items_per_scene);
    while tuples.len() < config.items_per_scene {
        let t: Vec<usize> = (0..config.n_attributes)
            .map(|_| rng.random_range(0..config.values_per_attribute))
            .collect();
        if !tuples.contains(&t) {
            tuples.push(t);
        }
    }
    let id = scene_id(n);
    let items = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Item::new(
                format!("{id}-i{:02}", i + 1),
                t.iter()
                    .enumerate()
                    .map(|(slot, &v)| (SLOTS[slot], VALUES[slot][v])),
            )
        })
        .collect();
    Scene::new(id, items)
}

/// Draws from `softmax(beta · compat(a, target))` over the action space.
fn sample_state(
    actions: &[DialogueState],
    target: &Item,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> DialogueState {
    let scores: Vec<f64> = actions
        .iter()
        .map(|a| beta * compat(a, target) as f64)
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (a, w) in actions.iter().zip(&weights) {
        if u < *w {
            return a.clone();
        }
        u -= w;
    }
    actions.last().expect("non-empty action space").clone()
}

fn utterance(state: &DialogueState) -> String {
    match state.slots.first() {
        Some((slot, value)) => format!("Do you have anything with {slot} {value}?"),
        None => "Show me something else.".to_string(),
    }
}

pub fn generate_world(config: &SyntheticWorldConfig) -> Result<SyntheticWorld, HarnessError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scenes: Vec<Scene> = (1..=config.n_scenes)
        .map(|n| generate_scene(config, n, &mut rng))
        .collect();
    let profiles: Vec<String> = scenes
        .iter()
        .map(|s| build_profile(s, None).profile.canonical_text)
        .collect();
    let actions = config.action_space();
    let stay = TransitionLogits {
        z_yes: -2.0,
        z_no: 2.0,
        target_profile: String::new(),
        token: None,
    };
    let mut episodes = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let target_scene = rng.random_range(0..scenes.len());
        let target = &scenes[target_scene].items[rng.random_range(0..config.items_per_scene)];
        let start_scene = if scenes.len() > 1 && rng.random::<f64>() < config.transition_rate {
            let other = rng.random_range(0..scenes.len() - 1);
            if other >= target_scene {
                other + 1
            } else {
                other
            }
        } else {
            target_scene
        };
        let states: Vec<DialogueState> = (0..config.n_turns)
            .map(|_| sample_state(&actions, target, config.beta, &mut rng))
            .collect();
        let mut logits = vec![stay.clone(); config.n_turns];
        if start_scene != target_scene {
            logits[0] = TransitionLogits {
                z_yes: 2.0,
                z_no: -2.0,
                target_profile: profiles[target_scene].clone(),
                token: None,
            };
        }
        episodes.push(Episode {
            episode_id: format!("ep{:04}", e + 1),
            start_scene_id: scenes[start_scene].scene_id.clone(),
            target_scene_id: scenes[target_scene].scene_id.clone(),
            target_item_id: target.item_id.clone(),
            utterances: states.iter().map(utterance).collect(),
            states,
            transition_logits: logits,
        });
    }
    Ok(SyntheticWorld {
        config: config.clone(),
        environment: Environment::new(scenes)?,
        episodes,
    })
}
