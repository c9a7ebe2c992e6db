//! Situated conversational recommendation.
//!
//! Each user turn runs in three stages. Scene transition estimation decides
//! whether the conversation should move to another scene and grounds that
//! scene by retrieval ([`transition`], [`retrieval`]). Bayesian inverse
//! inference then scores every item in the grounded scene by the likelihood
//! ratio of like and dislike hypotheses ([`inference`]). Finally a response is
//! composed from the top-ranked items ([`harness`]).

pub mod backends;
pub mod catalog;
pub mod dialogue;
pub mod evaluation;
pub mod harness;
pub mod inference;
pub mod retrieval;
pub mod transition;
