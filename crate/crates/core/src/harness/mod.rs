//! Corpus ingestion, the per-turn pipeline, evaluation runs, the synthetic
//! benchmark and the interactive chat loop.

use std::path::PathBuf;

use thiserror::Error;

use crate::backends::BackendError;
use crate::catalog::CatalogError;
use crate::evaluation::MetricError;
use crate::inference::InferenceError;
use crate::retrieval::RetrievalError;
use crate::transition::TransitionError;

pub mod chat;
pub mod corpus;
pub mod pipeline;
pub mod world;

pub use chat::run_chat;
pub use corpus::{
    balance_split, ingest_dataset, Corpus, CorpusDialogue, CorpusStats, Split, SplitRatio,
};
pub use pipeline::{
    evaluate_corpus, simulate_benchmark, DialogueSession, Engine, GroundMode, PipelineConfig,
    TurnInput, TurnResult,
};
pub use world::{generate_world, SyntheticWorld, SyntheticWorldConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("dialogue `{dialogue}` turn {turn}: {message}")]
    Corpus {
        dialogue: String,
        turn: usize,
        message: String,
    },
    #[error("dialogue `{dialogue}` turn {turn}: unknown scene `{scene}`")]
    DanglingScene {
        dialogue: String,
        turn: usize,
        scene: String,
    },
    #[error("dialogue `{dialogue}` turn {turn}: unknown target item `{item}`")]
    DanglingItem {
        dialogue: String,
        turn: usize,
        item: String,
    },
    #[error("cannot balance split: {transition} transition and {non_transition} non-transition dialogue(s)")]
    EmptyClass {
        transition: usize,
        non_transition: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("STE stage: {0}")]
    Transition(#[from] TransitionError),
    #[error("BI-INF stage: {0}")]
    Inference(#[from] InferenceError),
    #[error("state tracking: {0}")]
    Tracking(BackendError),
    #[error("generation: {0}")]
    Generation(BackendError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("metrics: {0}")]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}
