//! Bayesian inverse inference over the items of the grounded scene.
//!
//! Every item carries two competing hypotheses, that the user likes it and
//! that the user dislikes it. Each observed dialogue state contributes the
//! log-likelihood of that state under both hypotheses; the running difference
//! is the log preference ratio used to rank items. Accumulators use exact
//! summation so the result never depends on the order in which per-item
//! queries complete.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    mock_state_loglik, BackendError, HypothesisPolarity, MockUserConfig, PolicyBackend, PolicyQuery,
};
use crate::catalog::{Item, Scene};
use crate::dialogue::{serialize_state, DialogueState, TurnContext};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("item `{item}` is not in scene `{scene}`")]
    UnknownItem { scene: String, item: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl InferenceError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, InferenceError::Backend(e) if e.is_retryable())
    }
}

/// Correctly rounded floating-point sum (Shewchuk's partials with a final
/// half-even correction). The value depends only on the multiset of addends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecConfig {
    pub k: usize,
    /// Likelihood floor applied before the log.
    pub epsilon: f64,
    /// Per-turn weight γ in (0, 1].
    pub discount: f64,
}

impl Default for RecConfig {
    fn default() -> Self {
        RecConfig {
            k: 5,
            epsilon: 1e-9,
            discount: 1.0,
        }
    }
}

impl RecConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.k == 0 {
            return Err(InferenceError::Parameter("k must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(InferenceError::Parameter(format!(
                "epsilon {} not in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(InferenceError::Parameter(format!(
                "discount {} not in (0, 1]",
                self.discount
            )));
        }
        Ok(())
    }

    fn floor(&self, loglik: f64) -> f64 {
        let floor = self.epsilon.ln();
        if loglik.is_nan() {
            floor
        } else {
            loglik.max(floor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis<'a> {
    pub item: &'a Item,
    pub polarity: HypothesisPolarity,
}

pub fn make_hypotheses<'a>(
    scene: &'a Scene,
    item_id: &str,
) -> Result<[Hypothesis<'a>; 2], InferenceError> {
    let item = scene
        .item(item_id)
        .ok_or_else(|| InferenceError::UnknownItem {
            scene: scene.scene_id.clone(),
            item: item_id.to_string(),
        })?;
    Ok(HypothesisPolarity::BOTH.map(|polarity| Hypothesis { item, polarity }))
}

/// One turn's weighted, floored log-likelihoods for an item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnFactor {
    pub log_like: f64,
    pub log_dislike: f64,
}

impl TurnFactor {
    pub fn log_ratio(&self) -> f64 {
        self.log_like - self.log_dislike
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Evidence {
    like: ExactSum,
    dislike: ExactSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceSession {
    scene_id: String,
    item_ids: Vec<String>,
    observed_states: Vec<DialogueState>,
    per_item: BTreeMap<String, Evidence>,
    prior_log: BTreeMap<String, f64>,
    /// Factors applied since the last grounding, for replay.
    factors: Vec<BTreeMap<String, TurnFactor>>,
}

fn uniform_prior(scene: &Scene) -> BTreeMap<String, f64> {
    let log_p = -(scene.items.len() as f64).ln();
    scene.item_ids().map(|id| (id.to_string(), log_p)).collect()
}

impl InferenceSession {
    /// Fresh session with a uniform prior over the scene's items.
    pub fn new(scene: &Scene) -> Result<Self, InferenceError> {
        Self::with_prior(scene, uniform_prior(scene))
    }

    /// Fresh session with an explicit log-prior over the scene's items.
    pub fn with_prior(
        scene: &Scene,
        prior_log: BTreeMap<String, f64>,
    ) -> Result<Self, InferenceError> {
        let mut session = InferenceSession {
            scene_id: String::new(),
            item_ids: Vec::new(),
            observed_states: Vec::new(),
            per_item: BTreeMap::new(),
            prior_log: BTreeMap::new(),
            factors: Vec::new(),
        };
        session.reground_with_prior(scene, prior_log)?;
        Ok(session)
    }

    /// Moves to `scene` with a uniform prior. Item accumulators restart;
    /// the observation history is kept as belief context.
    pub fn reground(&mut self, scene: &Scene) -> Result<(), InferenceError> {
        self.reground_with_prior(scene, uniform_prior(scene))
    }

    pub fn reground_with_prior(
        &mut self,
        scene: &Scene,
        prior_log: BTreeMap<String, f64>,
    ) -> Result<(), InferenceError> {
        if scene.items.is_empty() {
            return Err(InferenceError::Contract(format!(
                "scene `{}` has no items",
                scene.scene_id
            )));
        }
        let ids: Vec<String> = scene.item_ids().map(str::to_string).collect();
        if prior_log.len() != ids.len() || ids.iter().any(|id| !prior_log.contains_key(id)) {
            return Err(InferenceError::Contract(
                "prior keys differ from scene items".into(),
            ));
        }
        if prior_log.values().any(|l| !l.is_finite()) {
            return Err(InferenceError::Contract(
                "prior must be strictly positive".into(),
            ));
        }
        let mass: f64 = prior_log.values().map(|l| l.exp()).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(InferenceError::Contract(format!(
                "prior sums to {mass}, not 1"
            )));
        }
        self.scene_id = scene.scene_id.clone();
        self.per_item = ids
            .iter()
            .map(|id| (id.clone(), Evidence::default()))
            .collect();
        self.item_ids = ids;
        self.prior_log = prior_log;
        self.factors.clear();
        Ok(())
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn observed_states(&self) -> &[DialogueState] {
        &self.observed_states
    }

    /// Prior states handed to the policy backend as conditioning.
    pub fn belief_context(&self) -> &[DialogueState] {
        &self.observed_states
    }

    pub fn prior_log(&self) -> &BTreeMap<String, f64> {
        &self.prior_log
    }

    pub fn cumulative(&self, item_id: &str) -> Option<(f64, f64)> {
        self.per_item
            .get(item_id)
            .map(|e| (e.like.value(), e.dislike.value()))
    }

    /// Turns of evidence since the last grounding.
    pub fn evidence_turns(&self) -> usize {
        self.factors.len()
    }

    /// Log-prior relative to uniform. Added to the like branch only, so it
    /// vanishes under the default uniform prior.
    fn prior_adjustment(&self, item_id: &str) -> f64 {
        self.prior_log[item_id] + (self.item_ids.len() as f64).ln()
    }
}

/// Weighted, floored log-likelihoods of `observed` under both hypotheses.
pub fn turn_factor(
    ctx: &TurnContext,
    item: &Item,
    observed: &DialogueState,
    session: &InferenceSession,
    backend: &dyn PolicyBackend,
    config: &RecConfig,
) -> Result<TurnFactor, InferenceError> {
    if !session.per_item.contains_key(&item.item_id) {
        return Err(InferenceError::UnknownItem {
            scene: session.scene_id.clone(),
            item: item.item_id.clone(),
        });
    }
    let mut out = [0.0; 2];
    for (slot, polarity) in out.iter_mut().zip(HypothesisPolarity::BOTH) {
        let query = PolicyQuery {
            context: ctx,
            item,
            polarity,
            prior_states: session.belief_context(),
            observed_state: observed,
        };
        *slot = config.discount * config.floor(backend.state_loglik(&query)?);
    }
    Ok(TurnFactor {
        log_like: out[0],
        log_dislike: out[1],
    })
}

/// `γ · (log π_like − log π_dislike)` for one item and turn.
pub fn turn_log_ratio(
    ctx: &TurnContext,
    item: &Item,
    observed: &DialogueState,
    session: &InferenceSession,
    backend: &dyn PolicyBackend,
    config: &RecConfig,
) -> Result<f64, InferenceError> {
    Ok(turn_factor(ctx, item, observed, session, backend, config)?.log_ratio())
}

/// Factors for every item of `scene`, queried in parallel.
pub fn scene_factors(
    ctx: &TurnContext,
    scene: &Scene,
    observed: &DialogueState,
    session: &InferenceSession,
    backend: &dyn PolicyBackend,
    config: &RecConfig,
) -> Result<BTreeMap<String, TurnFactor>, InferenceError> {
    if scene.scene_id != session.scene_id {
        return Err(InferenceError::Contract(format!(
            "session tracks `{}`, not `{}`",
            session.scene_id, scene.scene_id
        )));
    }
    scene
        .items
        .par_iter()
        .map(|item| {
            turn_factor(ctx, item, observed, session, backend, config)
                .map(|f| (item.item_id.clone(), f))
        })
        .collect()
}

/// Folds one turn of factors into the session and records the observation.
pub fn update_session(
    session: &mut InferenceSession,
    observed: DialogueState,
    factors: BTreeMap<String, TurnFactor>,
) -> Result<(), InferenceError> {
    if factors.len() != session.per_item.len()
        || session.per_item.keys().any(|id| !factors.contains_key(id))
    {
        return Err(InferenceError::Contract(format!(
            "factors cover {} item(s) but scene `{}` has {}",
            factors.len(),
            session.scene_id,
            session.per_item.len()
        )));
    }
    if factors
        .values()
        .any(|f| !f.log_like.is_finite() || !f.log_dislike.is_finite())
    {
        return Err(InferenceError::Contract("non-finite turn factor".into()));
    }
    for (id, f) in &factors {
        let e = session.per_item.get_mut(id).expect("keys checked");
        e.like.add(f.log_like);
        e.dislike.add(f.log_dislike);
    }
    session.observed_states.push(observed);
    session.factors.push(factors);
    Ok(())
}

/// Log preference ratios recomputed from the stored per-turn factors by
/// plain summation.
pub fn recompute(session: &InferenceSession) -> BTreeMap<String, f64> {
    session
        .item_ids
        .iter()
        .map(|id| {
            let mut like = 0.0;
            let mut dislike = 0.0;
            for turn in &session.factors {
                like += turn[id].log_like;
                dislike += turn[id].log_dislike;
            }
            (id.clone(), like - dislike + session.prior_adjustment(id))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScore {
    pub item_id: String,
    pub log_ratio: f64,
    /// `exp(log_ratio)` with the exponent clamped to ±700.
    pub r: f64,
}

pub fn preference_ratio(
    session: &InferenceSession,
    item_id: &str,
) -> Result<PreferenceScore, InferenceError> {
    let e = session
        .per_item
        .get(item_id)
        .ok_or_else(|| InferenceError::UnknownItem {
            scene: session.scene_id.clone(),
            item: item_id.to_string(),
        })?;
    let log_ratio = e.like.value() - e.dislike.value() + session.prior_adjustment(item_id);
    Ok(PreferenceScore {
        item_id: item_id.to_string(),
        log_ratio,
        r: log_ratio.clamp(-700.0, 700.0).exp(),
    })
}

/// Descending log-ratio, ties by ascending item id.
pub fn sort_scores(scores: &mut [PreferenceScore]) {
    scores.sort_by(|a, b| {
        b.log_ratio
            .total_cmp(&a.log_ratio)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
}

/// Every item, best first.
pub fn rank_all(session: &InferenceSession) -> Vec<PreferenceScore> {
    let mut scores: Vec<PreferenceScore> = session
        .item_ids
        .iter()
        .map(|id| preference_ratio(session, id).expect("tracked item"))
        .collect();
    sort_scores(&mut scores);
    scores
}

/// The top `k` items.
pub fn rank_items(session: &InferenceSession, config: &RecConfig) -> Vec<PreferenceScore> {
    let mut all = rank_all(session);
    all.truncate(config.k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSnapshot {
    pub item_id: String,
    pub cum_log_like: f64,
    pub cum_log_dislike: f64,
    pub prior_log: f64,
    pub log_ratio: f64,
}

/// Auditable record of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub scene_id: String,
    pub observed_states: Vec<String>,
    pub evidence_turns: usize,
    pub items: Vec<ItemSnapshot>,
}

impl InferenceSession {
    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            scene_id: self.scene_id.clone(),
            observed_states: self.observed_states.iter().map(serialize_state).collect(),
            evidence_turns: self.factors.len(),
            items: self
                .item_ids
                .iter()
                .map(|id| {
                    let (like, dislike) = self.cumulative(id).expect("tracked item");
                    ItemSnapshot {
                        item_id: id.clone(),
                        cum_log_like: like,
                        cum_log_dislike: dislike,
                        prior_log: self.prior_log[id],
                        log_ratio: preference_ratio(self, id).expect("tracked item").log_ratio,
                    }
                })
                .collect(),
        }
    }
}

/// A mock-policy world: simulated user, scene and target prior.
#[derive(Debug, Clone, PartialEq)]
pub struct MockWorld {
    pub user: MockUserConfig,
    pub scene: Scene,
    /// Prior probabilities by item id; uniform when absent.
    pub prior: Option<BTreeMap<String, f64>>,
}

impl MockWorld {
    fn prior_of(&self, item_id: &str) -> f64 {
        match &self.prior {
            Some(p) => p.get(item_id).copied().unwrap_or(0.0),
            None => 1.0 / self.scene.items.len() as f64,
        }
    }

    fn loglik(&self, item: &Item, polarity: HypothesisPolarity, observed: &DialogueState) -> f64 {
        // The mock user ignores context, so an empty one suffices.
        let ctx = empty_context(&self.scene);
        let query = PolicyQuery {
            context: &ctx,
            item,
            polarity,
            prior_states: &[],
            observed_state: observed,
        };
        mock_state_loglik(&query, &self.user)
    }

    /// Sum of per-turn log-likelihoods, added in ascending order.
    fn log_evidence(
        &self,
        item: &Item,
        polarity: HypothesisPolarity,
        observations: &[DialogueState],
    ) -> f64 {
        let mut terms: Vec<f64> = observations
            .iter()
            .map(|a| self.loglik(item, polarity, a))
            .collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }

    /// Unnormalized log posterior of each item.
    pub fn log_joint(&self, observations: &[DialogueState]) -> BTreeMap<String, f64> {
        self.scene
            .items
            .iter()
            .map(|item| {
                let lp = self.prior_of(&item.item_id).ln();
                (
                    item.item_id.clone(),
                    lp + self.log_evidence(item, HypothesisPolarity::Like, observations),
                )
            })
            .collect()
    }
}

fn empty_context(scene: &Scene) -> TurnContext {
    let profile = crate::catalog::SceneProfile::from_parts(scene.scene_id.clone(), "", Vec::new());
    TurnContext {
        dialogue_id: String::new(),
        turn: 0,
        history: Vec::new(),
        scene: std::sync::Arc::new(Scene::new(scene.scene_id.clone(), Vec::new())),
        profile: std::sync::Arc::new(profile),
    }
}

/// `P(m_i | a_1..a_t) ∝ P(m_i) ∏_τ π_like(a_τ | m_i)`, by direct enumeration.
pub fn brute_force_posterior(
    world: &MockWorld,
    observations: &[DialogueState],
) -> BTreeMap<String, f64> {
    let joint = world.log_joint(observations);
    let max = joint.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = joint.values().map(|l| (l - max).exp()).sum();
    joint
        .into_iter()
        .map(|(id, l)| (id, (l - max).exp() / total))
        .collect()
}

/// Item ids by descending posterior, ties by ascending id.
pub fn posterior_ranking(world: &MockWorld, observations: &[DialogueState]) -> Vec<String> {
    let mut joint: Vec<(String, f64)> = world.log_joint(observations).into_iter().collect();
    joint.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    joint.into_iter().map(|(id, _)| id).collect()
}

/// `log r_i` recomputed from scratch under both polarities, including the
/// like-branch prior adjustment.
pub fn brute_force_log_ratio(
    world: &MockWorld,
    observations: &[DialogueState],
    item_id: &str,
) -> Option<f64> {
    let item = world.scene.item(item_id)?;
    let like = world.log_evidence(item, HypothesisPolarity::Like, observations);
    let dislike = world.log_evidence(item, HypothesisPolarity::Dislike, observations);
    let adjustment = (world.prior_of(item_id) * world.scene.items.len() as f64).ln();
    Some(like - dislike + adjustment)
}

pub fn brute_force_ratio(
    world: &MockWorld,
    observations: &[DialogueState],
    item_id: &str,
) -> Option<f64> {
    brute_force_log_ratio(world, observations, item_id).map(f64::exp)
}
