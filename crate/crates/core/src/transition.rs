//! Scene transition estimation: turn the backend's decision logits into a
//! transition probability, and when a move is predicted, ground the generated
//! target profile in a real scene by coarse retrieval plus reranking.
//! A negative decision keeps the current scene without touching the index.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, PolicyBackend};
use crate::catalog::{Scene, SceneProfile};
use crate::dialogue::TurnContext;
use crate::retrieval::{
    coarse_retrieve, Embedder, EmbeddingVector, RerankerParams, RetrievalError, ScoredScene,
    VectorIndex,
};

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("non-finite decision logits ({z_yes}, {z_no})")]
    NonFinite { z_yes: f64, z_no: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl TransitionError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransitionError::Backend(e) if e.is_retryable())
    }
}

/// `exp(z_yes) / (exp(z_yes) + exp(z_no))` in the overflow-free logistic form.
pub fn decision_probability(z_yes: f64, z_no: f64) -> Result<f64, TransitionError> {
    if !(z_yes.is_finite() && z_no.is_finite()) {
        return Err(TransitionError::NonFinite { z_yes, z_no });
    }
    let d = z_yes - z_no;
    Ok(if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionDecision {
    pub y_dec: Decision,
    pub s_trans: f64,
    pub z_yes: f64,
    pub z_no: f64,
}

impl TransitionDecision {
    pub fn from_logits(z_yes: f64, z_no: f64, tau: f64) -> Result<Self, TransitionError> {
        let s_trans = decision_probability(z_yes, z_no)?;
        Ok(TransitionDecision {
            y_dec: if s_trans >= tau {
                Decision::Yes
            } else {
                Decision::No
            },
            s_trans,
            z_yes,
            z_no,
        })
    }

    pub fn is_yes(&self) -> bool {
        self.y_dec == Decision::Yes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionConfig {
    /// Decision threshold on `s_trans`.
    pub tau: f64,
    /// Coarse cut N.
    pub n: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { tau: 0.5, n: 10 }
    }
}

impl TransitionConfig {
    pub fn validate(&self) -> Result<(), TransitionError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(TransitionError::Config(format!(
                "tau {} not in (0, 1)",
                self.tau
            )));
        }
        if self.n == 0 {
            return Err(TransitionError::Config("N must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetProfileQuery {
    pub text: String,
    pub embedding: EmbeddingVector,
}

impl TargetProfileQuery {
    pub fn new(text: impl Into<String>, embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        let text = text.into();
        let embedding = embedder.embed(&text)?;
        Ok(TargetProfileQuery { text, embedding })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingTrace {
    pub coarse: Vec<ScoredScene>,
    pub rerank: Vec<ScoredScene>,
}

/// Coarse top-N by cosine, then the best rerank score among those N.
/// Rerank ties go to the better coarse rank.
pub fn ground_target(
    query: &TargetProfileQuery,
    index: &VectorIndex,
    reranker: &RerankerParams,
    n: usize,
) -> Result<(String, GroundingTrace), RetrievalError> {
    let coarse = coarse_retrieve(&query.embedding, index, n)?;
    let mut rerank = Vec::with_capacity(coarse.len());
    for hit in &coarse {
        let candidate = index
            .get(&hit.scene_id)
            .expect("coarse hit comes from the index");
        rerank.push(ScoredScene {
            scene_id: hit.scene_id.clone(),
            score: reranker.score_vectors(&query.embedding, candidate)?,
        });
    }
    let mut best = 0;
    for (i, r) in rerank.iter().enumerate().skip(1) {
        if r.score > rerank[best].score {
            best = i;
        }
    }
    Ok((
        rerank[best].scene_id.clone(),
        GroundingTrace { coarse, rerank },
    ))
}

/// Everything needed to ground a target profile: the profile index, its
/// embedder, the reranker and the scenes themselves.
pub struct Grounder {
    index: VectorIndex,
    embedder: Arc<dyn Embedder>,
    reranker: RerankerParams,
    scenes: BTreeMap<String, (Arc<Scene>, Arc<SceneProfile>)>,
    retrieval_calls: AtomicUsize,
}

impl std::fmt::Debug for Grounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grounder")
            .field("scenes", &self.scenes.len())
            .field("dimension", &self.index.dimension())
            .finish()
    }
}

impl Grounder {
    pub fn new(
        index: VectorIndex,
        embedder: Arc<dyn Embedder>,
        reranker: RerankerParams,
        scenes: impl IntoIterator<Item = (Scene, SceneProfile)>,
    ) -> Result<Self, TransitionError> {
        if index.is_empty() {
            return Err(TransitionError::Config("scene index is empty".into()));
        }
        if index.dimension() != embedder.dimension() || reranker.dimension != embedder.dimension() {
            return Err(TransitionError::Config(format!(
                "dimensions disagree: index {}, embedder {}, reranker {}",
                index.dimension(),
                embedder.dimension(),
                reranker.dimension
            )));
        }
        let scenes: BTreeMap<_, _> = scenes
            .into_iter()
            .map(|(s, p)| (s.scene_id.clone(), (Arc::new(s), Arc::new(p))))
            .collect();
        for (id, _) in index.entries() {
            if !scenes.contains_key(id) {
                return Err(TransitionError::Config(format!(
                    "indexed scene `{id}` has no profile"
                )));
            }
        }
        Ok(Grounder {
            index,
            embedder,
            reranker,
            scenes,
            retrieval_calls: AtomicUsize::new(0),
        })
    }

    /// Indexes every profile with `embedder`.
    pub fn build(
        embedder: Arc<dyn Embedder>,
        reranker: RerankerParams,
        scenes: impl IntoIterator<Item = (Scene, SceneProfile)>,
    ) -> Result<Self, TransitionError> {
        let scenes: Vec<(Scene, SceneProfile)> = scenes.into_iter().collect();
        let index = VectorIndex::build(
            embedder.as_ref(),
            scenes
                .iter()
                .map(|(s, p)| (s.scene_id.as_str(), p.canonical_text.as_str())),
        )?;
        Grounder::new(index, embedder, reranker, scenes)
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn scene(&self, scene_id: &str) -> Option<(&Arc<Scene>, &Arc<SceneProfile>)> {
        self.scenes.get(scene_id).map(|(s, p)| (s, p))
    }

    pub fn retrieval_calls(&self) -> usize {
        self.retrieval_calls.load(Ordering::SeqCst)
    }

    pub fn ground(&self, text: &str, n: usize) -> Result<(String, GroundingTrace), RetrievalError> {
        self.retrieval_calls.fetch_add(1, Ordering::SeqCst);
        let query = TargetProfileQuery::new(text, self.embedder.as_ref())?;
        ground_target(&query, &self.index, &self.reranker, n)
    }
}

/// Per-turn diagnostic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTrace {
    pub dialogue_id: String,
    pub turn: usize,
    pub decision: Decision,
    pub s_trans: f64,
    pub target_profile: String,
    pub retrieval_invoked: bool,
    pub coarse: Vec<ScoredScene>,
    pub rerank: Vec<ScoredScene>,
    pub grounded_scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub decision: TransitionDecision,
    pub grounded_scene_id: String,
    pub trace: TransitionTrace,
}

impl TransitionOutcome {
    /// True when the grounded scene differs from `current`.
    pub fn moved_from(&self, current: &str) -> bool {
        self.grounded_scene_id != current
    }
}

pub fn estimate_transition(
    ctx: &TurnContext,
    backend: &dyn PolicyBackend,
    grounder: &Grounder,
    config: &TransitionConfig,
) -> Result<TransitionOutcome, TransitionError> {
    config.validate()?;
    let current = ctx.scene.scene_id.clone();
    let logits = backend.transition_inference(ctx, &ctx.profile)?;
    let decision = TransitionDecision::from_logits(logits.z_yes, logits.z_no, config.tau)?;
    let mut note = None;
    if let Some(token) = &logits.token {
        let said_yes = token.trim().eq_ignore_ascii_case("yes");
        if said_yes != decision.is_yes() {
            let msg = format!(
                "decision token `{}` disagrees with logits (s_trans {:.6}); using logits",
                token.trim(),
                decision.s_trans
            );
            log::warn!("{}/{}: {msg}", ctx.dialogue_id, ctx.turn);
            note = Some(msg);
        }
    }
    let mut trace = TransitionTrace {
        dialogue_id: ctx.dialogue_id.clone(),
        turn: ctx.turn,
        decision: decision.y_dec,
        s_trans: decision.s_trans,
        target_profile: logits.target_profile.clone(),
        retrieval_invoked: false,
        coarse: Vec::new(),
        rerank: Vec::new(),
        grounded_scene_id: current.clone(),
        note,
    };
    if decision.is_yes() {
        trace.retrieval_invoked = true;
        match grounder.ground(&logits.target_profile, config.n) {
            Ok((scene_id, grounding)) => {
                trace.coarse = grounding.coarse;
                trace.rerank = grounding.rerank;
                trace.grounded_scene_id = scene_id;
            }
            Err(RetrievalError::ZeroTokens) => {
                let msg = "empty target profile; keeping current scene".to_string();
                log::warn!("{}/{}: {msg}", ctx.dialogue_id, ctx.turn);
                trace.note = Some(msg);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(TransitionOutcome {
        decision,
        grounded_scene_id: trace.grounded_scene_id.clone(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{MockBackend, MockUserConfig, TransitionLogits};
    use crate::catalog::{build_profile, Item};
    use crate::retrieval::HashingEmbedder;
    use proptest::prelude::*;

    #[test]
    fn logistic_closed_forms() {
        assert_eq!(decision_probability(0.0, 0.0).unwrap(), 0.5);
        // logistic(2) from a 40-digit evaluation
        assert!((decision_probability(1.0, -1.0).unwrap() - 0.880_797_077_977_882_4).abs() < 1e-15);
        assert!(decision_probability(800.0, -800.0).unwrap() == 1.0);
        assert!(decision_probability(-800.0, 800.0).unwrap() >= 0.0);
        assert!(matches!(
            decision_probability(f64::NAN, 0.0),
            Err(TransitionError::NonFinite { .. })
        ));
        assert!(decision_probability(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(
            TransitionDecision::from_logits(0.0, 0.0, 0.5)
                .unwrap()
                .y_dec,
            Decision::Yes
        );
        assert_eq!(
            TransitionDecision::from_logits(-1e-9, 0.0, 0.5)
                .unwrap()
                .y_dec,
            Decision::No
        );
    }

    fn scenes() -> Vec<(Scene, SceneProfile)> {
        let specs = [
            ("north", [("color", "red"), ("type", "jacket")]),
            ("south", [("color", "blue"), ("type", "hat")]),
            ("west", [("color", "green"), ("type", "scarf")]),
        ];
        specs
            .iter()
            .map(|(id, attrs)| {
                let scene = Scene::new(*id, vec![Item::new(format!("{id}-1"), *attrs)]);
                let profile = build_profile(&scene, None).profile;
                (scene, profile)
            })
            .collect()
    }

    fn grounder(reranker: RerankerParams) -> Grounder {
        Grounder::build(Arc::new(HashingEmbedder::new(32)), reranker, scenes()).unwrap()
    }

    fn context(g: &Grounder, scene: &str) -> TurnContext {
        let (s, p) = g.scene(scene).unwrap();
        TurnContext {
            dialogue_id: "d".into(),
            turn: 1,
            history: Vec::new(),
            scene: s.clone(),
            profile: p.clone(),
        }
    }

    fn scripted(z_yes: f64, z_no: f64, target: &str) -> MockBackend {
        MockBackend::new(MockUserConfig::default()).with_transition_script(
            "d",
            1,
            TransitionLogits {
                z_yes,
                z_no,
                target_profile: target.into(),
                token: None,
            },
        )
    }

    #[test]
    fn negative_decision_keeps_scene_without_retrieval() {
        let g = grounder(RerankerParams::identity(32));
        let out = estimate_transition(
            &context(&g, "north"),
            &scripted(-3.0, 3.0, "blue hat"),
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(out.decision.y_dec, Decision::No);
        assert_eq!(out.grounded_scene_id, "north");
        assert!(!out.trace.retrieval_invoked);
        assert_eq!(g.retrieval_calls(), 0);
    }

    #[test]
    fn exact_profile_grounds_to_its_scene() {
        let g = grounder(RerankerParams::identity(32));
        let target = g.scene("west").unwrap().1.canonical_text.clone();
        let out = estimate_transition(
            &context(&g, "north"),
            &scripted(3.0, -3.0, &target),
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(out.grounded_scene_id, "west");
        assert_eq!(out.trace.coarse[0].scene_id, "west");
        assert!((out.trace.coarse[0].score - 1.0).abs() < 1e-12);
        assert_eq!(g.retrieval_calls(), 1);
    }

    #[test]
    fn singleton_index_always_grounds_there() {
        let only = scenes().remove(1);
        let g = Grounder::build(
            Arc::new(HashingEmbedder::new(32)),
            RerankerParams::zeros(32),
            [only],
        )
        .unwrap();
        let ctx = context(&g, "south");
        let out = estimate_transition(
            &ctx,
            &scripted(5.0, 0.0, "red jacket"),
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(out.grounded_scene_id, "south");
    }

    #[test]
    fn disagreeing_token_is_overruled() {
        let g = grounder(RerankerParams::identity(32));
        let backend = MockBackend::new(MockUserConfig::default()).with_transition_script(
            "d",
            1,
            TransitionLogits {
                z_yes: -2.0,
                z_no: 2.0,
                target_profile: "blue hat".into(),
                token: Some("yes".into()),
            },
        );
        let out =
            estimate_transition(&context(&g, "north"), &backend, &g, &Default::default()).unwrap();
        assert_eq!(out.decision.y_dec, Decision::No);
        assert!(out.trace.note.is_some());
    }

    #[test]
    fn empty_target_profile_falls_back() {
        let g = grounder(RerankerParams::identity(32));
        let out = estimate_transition(
            &context(&g, "north"),
            &scripted(2.0, 0.0, "  "),
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(out.grounded_scene_id, "north");
        assert!(out.trace.note.is_some());
    }

    #[test]
    fn n_one_returns_coarse_winner() {
        let g = grounder(RerankerParams::init(32, 3));
        let query = TargetProfileQuery::new("blue hat", &HashingEmbedder::new(32)).unwrap();
        let coarse = coarse_retrieve(&query.embedding, g.index(), 1).unwrap();
        let (id, _) = ground_target(&query, g.index(), &RerankerParams::init(32, 3), 1).unwrap();
        assert_eq!(id, coarse[0].scene_id);
    }

    #[test]
    fn zero_reranker_keeps_coarse_winner() {
        let g = grounder(RerankerParams::zeros(32));
        let query = TargetProfileQuery::new("green scarf", &HashingEmbedder::new(32)).unwrap();
        let (id, trace) = ground_target(&query, g.index(), &RerankerParams::zeros(32), 3).unwrap();
        assert_eq!(id, trace.coarse[0].scene_id);
        assert_eq!(id, "west");
    }

    #[test]
    fn reranker_can_overturn_coarse_order() {
        // Two-dimensional fixture: coarse prefers `a` (cosine 1 vs 0.6), while
        // the reranker weights the second axis: a -> 1*1 = 1, b -> 0.8*5 = 4.
        let mut index = VectorIndex::new(2);
        index
            .insert(
                "a".into(),
                EmbeddingVector::new(vec![1.0, 0.0]).normalize().unwrap(),
            )
            .unwrap();
        index
            .insert(
                "b".into(),
                EmbeddingVector::new(vec![0.6, 0.8]).normalize().unwrap(),
            )
            .unwrap();
        let query = TargetProfileQuery {
            text: String::new(),
            embedding: EmbeddingVector::new(vec![1.0, 0.0]).normalize().unwrap(),
        };
        let reranker = RerankerParams {
            dimension: 2,
            w: vec![1.0, 5.0, 0.0, 0.0],
            bias: 0.0,
        };
        let (id, trace) = ground_target(&query, &index, &reranker, 2).unwrap();
        assert_eq!(trace.coarse[0].scene_id, "a");
        assert_eq!(id, "b");
    }

    #[test]
    fn empty_index_is_config_error() {
        let err = Grounder::new(
            VectorIndex::new(4),
            Arc::new(HashingEmbedder::new(4)),
            RerankerParams::zeros(4),
            Vec::new(),
        )
        .unwrap_err();
        assert!(matches!(err, TransitionError::Config(_)));
    }

    proptest! {
        #[test]
        fn probability_is_monotone_and_shift_invariant(
            a in -50.0f64..50.0,
            b in -50.0f64..50.0,
            delta in 0.001f64..5.0,
            shift in -100.0f64..100.0,
        ) {
            let p = decision_probability(a, b).unwrap();
            prop_assert!((p - decision_probability(a + shift, b + shift).unwrap()).abs() <= 1e-12);
            prop_assert!(decision_probability(a + delta, b).unwrap() >= p);
            prop_assert!(p > 0.0 || a - b < -700.0);
        }
    }
}
