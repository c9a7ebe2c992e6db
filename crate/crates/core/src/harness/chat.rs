//! Line-oriented interactive loop.
//!
//! Each input line is a user turn. Lines starting with `:` are commands:
//! `:scene` prints the grounded scene, `:trace` the last transition trace,
//! `:quit` ends the session.

use std::io::{BufRead, Write};

use super::pipeline::{DialogueSession, Engine, TurnInput};
use super::HarnessError;

fn io_err(e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: "<chat>".into(),
        source: e,
    }
}

/// Runs until `:quit` or end of input; returns the number of user turns.
pub fn run_chat(
    engine: &Engine<'_>,
    session: &mut DialogueSession,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<usize, HarnessError> {
    writeln!(output, "[scene {}]", session.scene.scene_id).map_err(io_err)?;
    for line in input.lines() {
        let line = line.map_err(io_err)?;
        let text = line.trim();
        match text {
            "" => continue,
            ":quit" => break,
            ":scene" => {
                writeln!(
                    output,
                    "scene {}: {}",
                    session.scene.scene_id, session.profile.summary
                )
                .map_err(io_err)?;
                continue;
            }
            ":trace" => {
                let trace = match &session.last_outcome {
                    Some(o) => serde_json::to_string_pretty(&o.trace).expect("trace serializes"),
                    None => "no turns yet".to_string(),
                };
                writeln!(output, "{trace}").map_err(io_err)?;
                continue;
            }
            cmd if cmd.starts_with(':') => {
                writeln!(output, "unknown command `{cmd}` (:scene, :trace, :quit)")
                    .map_err(io_err)?;
                continue;
            }
            _ => {}
        }
        let result = engine.run_turn(session, TurnInput::text(text))?;
        if result.regrounded {
            writeln!(output, "[moved to {}]", result.scene_id).map_err(io_err)?;
        }
        for w in &result.warnings {
            writeln!(output, "[warning] {w}").map_err(io_err)?;
        }
        writeln!(output, "{}", result.response).map_err(io_err)?;
        session.record_reply(result.response);
    }
    Ok(session.user_turns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{MockBackend, MockUserConfig};
    use crate::catalog::{Environment, Item, Scene};
    use crate::dialogue::StateSchema;
    use crate::harness::pipeline::{action_space_for, default_grounder, PipelineConfig};

    #[test]
    fn chat_answers_and_handles_commands() {
        let env = Environment::new(vec![
            Scene::new(
                "s1",
                vec![
                    Item::new("a", [("color", "red")]),
                    Item::new("b", [("color", "blue")]),
                ],
            ),
            Scene::new("s2", vec![Item::new("c", [("color", "green")])]),
        ])
        .unwrap();
        let backend = MockBackend::new(MockUserConfig {
            beta: 1.0,
            action_space: action_space_for(&env),
            seed: 0,
        })
        .with_lexicon(env.scenes.iter().flat_map(|s| &s.items));
        let grounder = default_grounder(&env, 64).unwrap();
        let config = PipelineConfig::default();
        let schema = StateSchema::default();
        let engine = Engine {
            backend: &backend,
            grounder: &grounder,
            config: &config,
            schema: &schema,
        };
        let mut session = DialogueSession::new("chat", "s1", &grounder).unwrap();
        let input = "something red\n:scene\n:trace\n:bogus\n:quit\nnever read\n";
        let mut out = Vec::new();
        let turns = run_chat(&engine, &mut session, input.as_bytes(), &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        assert_eq!(turns, 1);
        assert!(out.contains("scene s1"), "{out}");
        assert!(out.contains("\"decision\""), "{out}");
        assert!(out.contains("unknown command"), "{out}");
        assert_eq!(session.conversation.turns.len(), 2);
    }
}
