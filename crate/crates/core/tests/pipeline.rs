use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use llm_dna::dna::ProjectionSpec;
use llm_dna::extraction::{extract_dna, extract_fleet, extract_representation, DnaStore, FleetOptions, ProjectionPlan};
use llm_dna::model_io::{HttpClient, ModelEndpoint, ModelIo, Prompt, PromptSet, RetryPolicy};
use llm_dna::synth::{mock_embedding, spawn_mock_endpoint, DimSwitch, MockScript, MockServer, ModelScript};
use llm_dna::Error;

fn fast_client(attempts: u32) -> HttpClient {
    let retry = RetryPolicy {
        max_attempts: attempts,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(5),
        jitter: false,
    };
    HttpClient::new(retry, Duration::from_secs(10))
}

fn prompts(n: usize) -> PromptSet {
    let ps = (0..n)
        .map(|i| Prompt {
            id: format!("set:{i}"),
            dataset: "set".into(),
            text: format!("question number {i}?"),
        })
        .collect();
    PromptSet::new(ps, Some(1)).unwrap()
}

/// Every model answers each prompt with a model-specific text.
fn fleet_script(models: &[&str], prompts: &PromptSet) -> MockScript {
    let mut script = MockScript::default();
    for m in models {
        let responses = prompts
            .prompts()
            .iter()
            .map(|p| (p.text.clone(), format!("{m} says: {}", p.text.len() * m.len())))
            .collect();
        script.models.insert(
            m.to_string(),
            ModelScript {
                responses,
                fail_status: None,
            },
        );
    }
    script
}

fn endpoint(server: &MockServer, id: &str) -> ModelEndpoint {
    ModelEndpoint::new(id, server.base_url()).unwrap()
}

fn io(dir: &std::path::Path, attempts: u32) -> ModelIo {
    ModelIo::new(dir, fast_client(attempts), 4).unwrap()
}

fn fixed_time() -> FleetOptions {
    FleetOptions {
        created_at: Some(Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap()),
        ..FleetOptions::default()
    }
}

#[test]
fn retries_server_errors_until_success() {
    let server = spawn_mock_endpoint(
        MockScript {
            faults: vec![500, 500, 500],
            ..MockScript::default()
        },
        0,
    )
    .unwrap();
    let text = fast_client(5).generate(&endpoint(&server, "m"), "hello").unwrap();
    assert_eq!(text, "hello");
    let statuses: Vec<u16> = server.request_log().iter().map(|r| r.status).collect();
    assert_eq!(statuses, vec![500, 500, 500, 200]);
}

#[test]
fn rate_limit_then_success_takes_two_requests() {
    let server = spawn_mock_endpoint(
        MockScript {
            faults: vec![429],
            ..MockScript::default()
        },
        0,
    )
    .unwrap();
    fast_client(5).generate(&endpoint(&server, "m"), "hi").unwrap();
    assert_eq!(server.request_count(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = spawn_mock_endpoint(
        MockScript {
            faults: vec![400],
            ..MockScript::default()
        },
        0,
    )
    .unwrap();
    let err = fast_client(5).generate(&endpoint(&server, "m"), "hi").unwrap_err();
    assert!(matches!(err, Error::Http { status: 400, .. }));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn retries_are_bounded() {
    let server = spawn_mock_endpoint(
        MockScript {
            faults: vec![503; 10],
            ..MockScript::default()
        },
        0,
    )
    .unwrap();
    let err = fast_client(3).generate(&endpoint(&server, "m"), "hi").unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 3, .. }));
    assert!(err.is_retriable());
    assert_eq!(server.request_count(), 3);
}

#[test]
fn unreachable_host_is_a_transport_error() {
    let port = {
        let s = spawn_mock_endpoint(MockScript::default(), 0).unwrap();
        s.port()
    };
    let ep = ModelEndpoint::new("m", format!("http://127.0.0.1:{port}/v1")).unwrap();
    let err = fast_client(2).generate(&ep, "hi").unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 2, .. }), "{err:?}");
}

#[test]
fn echo_representation_embeds_the_prompts() {
    let server = spawn_mock_endpoint(MockScript::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(3);
    let rep = extract_representation(&io(dir.path(), 3), &endpoint(&server, "m"), &ps, &endpoint(&server, "emb")).unwrap();
    assert_eq!((rep.p, rep.t), (8, 3));
    for (j, p) in ps.prompts().iter().enumerate() {
        assert_eq!(rep.block(j), mock_embedding(&p.text, 8).as_slice());
    }
    assert_eq!(rep.prompt_set_hash, ps.hash());
}

#[test]
fn completion_mode_uses_the_completions_route() {
    let server = spawn_mock_endpoint(MockScript::default(), 0).unwrap();
    let ep = endpoint(&server, "base").completion();
    assert_eq!(fast_client(1).generate(&ep, "raw text").unwrap(), "raw text");
    assert_eq!(server.request_log()[0].path, "/v1/completions");
}

#[test]
fn warm_cache_makes_no_requests() {
    let server = spawn_mock_endpoint(MockScript::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ps = prompts(4);
    let spec = ProjectionSpec::gaussian(7, 4, 32).unwrap();
    let (m, e) = (endpoint(&server, "m"), endpoint(&server, "emb"));
    let first = extract_dna(&io(dir.path(), 3), &m, &ps, &e, &spec, 1.0).unwrap();
    let cold = server.request_count();
    assert_eq!(cold, 8);
    let second = extract_dna(&io(dir.path(), 3), &m, &ps, &e, &spec, 1.0).unwrap();
    assert_eq!(server.request_count(), cold);
    assert_eq!(first.vector, second.vector);
}

#[test]
fn embedding_dimension_drift_is_rejected() {
    let server = spawn_mock_endpoint(
        MockScript {
            embedding_dim: 8,
            dim_switch: Some(DimSwitch { after: 2, dim: 16 }),
            ..MockScript::default()
        },
        0,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = extract_representation(&io(dir.path(), 1), &endpoint(&server, "m"), &prompts(4), &endpoint(&server, "emb"))
        .unwrap_err();
    assert!(
        matches!(err, Error::DimensionDrift { expected: 8, actual: 16, .. }),
        "{err:?}"
    );
}

#[test]
fn identical_mocks_give_identical_dna() {
    let ps = prompts(3);
    let spec = ProjectionSpec::gaussian(3, 4, 24).unwrap();
    let mut dnas = Vec::new();
    for _ in 0..2 {
        let server = spawn_mock_endpoint(fleet_script(&["m"], &ps), 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = extract_dna(&io(dir.path(), 1), &endpoint(&server, "m"), &ps, &endpoint(&server, "e"), &spec, 1.0).unwrap();
        dnas.push(r.vector);
    }
    assert_eq!(dnas[0], dnas[1]);
}

#[test]
fn fleet_reports_failed_models_and_keeps_the_rest() {
    let ps = prompts(3);
    let mut script = fleet_script(&["a", "b"], &ps);
    script.models.insert(
        "broken".into(),
        ModelScript {
            responses: BTreeMap::new(),
            fail_status: Some(404),
        },
    );
    let server = spawn_mock_endpoint(script, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let roster: Vec<ModelEndpoint> = ["a", "broken", "b"].iter().map(|m| endpoint(&server, m)).collect();
    let report = extract_fleet(
        &io(dir.path(), 2),
        &roster,
        &ps,
        &endpoint(&server, "e"),
        ProjectionPlan::Seeded { seed: 1, dna_dim: 4 },
        &fixed_time(),
        None,
        None,
    )
    .unwrap();
    assert_eq!(report.added, vec!["a", "b"]);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].model_id, "broken");
    assert!(!report.failures[0].retriable);
    assert_eq!(report.store.len(), 2);
    assert_eq!(report.store.manifest().projection.source_dim, 24);
}

#[test]
fn rerun_with_warm_cache_is_byte_identical() {
    let ps = prompts(4);
    let server = spawn_mock_endpoint(fleet_script(&["a", "b", "c"], &ps), 0).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let roster: Vec<ModelEndpoint> = ["a", "b", "c"].iter().map(|m| endpoint(&server, m)).collect();
    let run = |out: &std::path::Path| {
        extract_fleet(
            &io(cache.path(), 2),
            &roster,
            &ps,
            &endpoint(&server, "e"),
            ProjectionPlan::Seeded { seed: 9, dna_dim: 6 },
            &fixed_time(),
            None,
            Some(out),
        )
        .unwrap()
    };
    let (o1, o2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(o1.path());
    let after_first = server.request_count();
    run(o2.path());
    assert_eq!(server.request_count(), after_first);
    for f in ["manifest.json", "dna.jsonl"] {
        let a = std::fs::read(o1.path().join(f)).unwrap();
        let b = std::fs::read(o2.path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn adding_a_model_leaves_prior_records_untouched() {
    let ps = prompts(3);
    let server = spawn_mock_endpoint(fleet_script(&["a", "b", "new"], &ps), 0).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let e = endpoint(&server, "e");
    let plan = ProjectionPlan::Seeded { seed: 2, dna_dim: 5 };
    let first: Vec<ModelEndpoint> = ["a", "b"].iter().map(|m| endpoint(&server, m)).collect();
    extract_fleet(&io(cache.path(), 1), &first, &ps, &e, plan.clone(), &fixed_time(), None, Some(out.path())).unwrap();
    let before_bytes = std::fs::read(out.path().join("dna.jsonl")).unwrap();
    let before = DnaStore::load(out.path()).unwrap();

    let mut second = first.clone();
    second.push(endpoint(&server, "new"));
    let later = FleetOptions {
        created_at: Some(Utc.with_ymd_and_hms(2025, 6, 1, 0, 0, 0).unwrap()),
        ..FleetOptions::default()
    };
    let report = extract_fleet(
        &io(cache.path(), 1),
        &second,
        &ps,
        &e,
        plan,
        &later,
        Some(before.clone()),
        Some(out.path()),
    )
    .unwrap();
    assert_eq!(report.skipped, vec!["a", "b"]);
    assert_eq!(report.added, vec!["new"]);

    let after_bytes = std::fs::read(out.path().join("dna.jsonl")).unwrap();
    assert!(after_bytes.starts_with(&before_bytes));
    let after = DnaStore::load(out.path()).unwrap();
    for r in before.records() {
        let again = after.get(&r.model_id).unwrap();
        assert_eq!(again, r);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&again.vector), bits(&r.vector));
    }
    assert_eq!(after.len(), 3);
}

#[test]
fn existing_store_with_other_provenance_is_refused() {
    let ps = prompts(2);
    let server = spawn_mock_endpoint(fleet_script(&["a"], &ps), 0).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let roster = vec![endpoint(&server, "a")];
    let report = extract_fleet(
        &io(cache.path(), 1),
        &roster,
        &ps,
        &endpoint(&server, "e"),
        ProjectionPlan::Seeded { seed: 2, dna_dim: 4 },
        &fixed_time(),
        None,
        None,
    )
    .unwrap();
    let err = extract_fleet(
        &io(cache.path(), 1),
        &roster,
        &ps,
        &endpoint(&server, "other-embedder"),
        ProjectionPlan::Seeded { seed: 2, dna_dim: 4 },
        &fixed_time(),
        Some(report.store),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Provenance(_)));
}
