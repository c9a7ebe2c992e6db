//! The HTTP client against a served mock must agree with the mock itself.

use std::sync::Arc;
use std::time::Duration;

use situated_rec::backends::server;
use situated_rec::backends::{
    BackendError, DecodingParams, HypothesisPolarity, MockBackend, PolicyBackend, PolicyQuery,
    RemoteBackend, RemoteBackendConfig, TransitionLogits,
};
use situated_rec::catalog::build_profile;
use situated_rec::dialogue::{context_at, Conversation, Speaker};
use situated_rec::harness::world::{generate_world, SyntheticWorldConfig};
use situated_rec::retrieval::{Embedder, HashingEmbedder, RemoteEmbedder};

fn world() -> situated_rec::harness::SyntheticWorld {
    generate_world(&SyntheticWorldConfig {
        n_scenes: 2,
        items_per_scene: 4,
        episodes: 2,
        ..Default::default()
    })
    .unwrap()
}

fn client(endpoint: String) -> RemoteBackend {
    RemoteBackend::new(RemoteBackendConfig {
        endpoint,
        timeout: Duration::from_secs(5),
        retries: 0,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn served_mock_matches_local_mock() {
    let world = world();
    let ep = &world.episodes[0];
    let mock = MockBackend::new(world.config.user()).with_transition_script(
        &ep.episode_id,
        1,
        TransitionLogits {
            z_yes: 1.25,
            z_no: -0.5,
            target_profile: "red jacket".into(),
            token: Some("yes".into()),
        },
    );
    let handle = server::spawn(Arc::new(mock.clone()), "127.0.0.1:0".parse().unwrap()).unwrap();
    let remote = client(handle.endpoint());

    let scene = &world.environment.scenes[0];
    let profile = Arc::new(build_profile(scene, None).profile);
    let mut conv = Conversation::new(&ep.episode_id);
    conv.push(Speaker::User, &ep.utterances[0], Some(ep.states[0].clone()));
    let ctx = context_at(&conv, 1, Arc::new(scene.clone()), profile.clone()).unwrap();

    for item in &scene.items {
        for polarity in HypothesisPolarity::BOTH {
            let query = PolicyQuery {
                context: &ctx,
                item,
                polarity,
                prior_states: &[],
                observed_state: &ep.states[0],
            };
            let local = mock.state_loglik(&query).unwrap();
            let served = remote.state_loglik(&query).unwrap();
            assert_eq!(
                local.to_bits(),
                served.to_bits(),
                "{} {polarity:?}",
                item.item_id
            );
        }
    }

    assert_eq!(
        mock.transition_inference(&ctx, &profile).unwrap(),
        remote.transition_inference(&ctx, &profile).unwrap()
    );

    let prompt = "CANDIDATES:\n- a { color=red } (log-ratio 1.0)\nTRANSITION: no\nRESPONSE:";
    let params = DecodingParams::default();
    assert_eq!(
        mock.generate_text(prompt, &params).unwrap(),
        remote.generate_text(prompt, &params).unwrap()
    );

    let local = HashingEmbedder::new(16).embed("red wool jacket").unwrap();
    let served = RemoteEmbedder {
        backend: &remote,
        dimension: 16,
    }
    .embed("red wool jacket")
    .unwrap();
    assert_eq!(local, served);
}

#[test]
fn invalid_decoding_is_rejected_by_the_server() {
    let handle = server::spawn(
        Arc::new(MockBackend::default()),
        "127.0.0.1:0".parse().unwrap(),
    )
    .unwrap();
    let remote = client(handle.endpoint());
    let params = DecodingParams {
        top_p: 0.0,
        ..Default::default()
    };
    let err = remote.generate_text("RESPONSE:", &params).unwrap_err();
    assert!(matches!(err, BackendError::Parameter(_)), "{err:?}");
}

#[test]
fn dead_endpoint_is_a_transport_error() {
    let handle = server::spawn(
        Arc::new(MockBackend::default()),
        "127.0.0.1:0".parse().unwrap(),
    )
    .unwrap();
    let endpoint = handle.endpoint();
    drop(handle);
    let err = client(endpoint)
        .generate_text("RESPONSE:", &DecodingParams::default())
        .unwrap_err();
    assert!(err.is_retryable(), "{err:?}");
}
