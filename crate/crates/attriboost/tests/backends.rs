mod common;

use std::fs;

use attriboost::commands::train_with;
use attriboost::config::RunConfig;
use attriboost::core::config::{BackendKind, MediaMode};
use attriboost::core::oracle::{BackendError, LabelRequest};
use attriboost::core::synth::{generate, SynthWorld};
use attriboost::core::{train, Error, MemoryCache, Oracle, OracleBackend, OracleConfig, TrainConfig};
use attriboost::http::HttpBackend;
use attriboost::parallel::Parallel;
use attriboost::replay::{Kind, RecordingBackend, ReplayBackend, ReplayRecord};
use common::MockServer;

fn http_config(url: &str) -> OracleConfig {
    OracleConfig {
        backend: BackendKind::Http,
        endpoint: Some(url.to_string()),
        model_name: "mock".into(),
        media_mode: MediaMode::Uri,
        timeout_ms: 10_000,
        ..OracleConfig::default()
    }
}

fn run_cfg(oracle: OracleConfig, seed: u64) -> RunConfig {
    RunConfig {
        train: TrainConfig {
            seed,
            ..TrainConfig::default()
        },
        oracle,
        ..RunConfig::default()
    }
}

#[test]
fn scripted_journal_counts_and_replay() {
    let world = SynthWorld::majority_of_three(0.1, 31).unwrap();
    let (ds, scripted) = generate(&world, 200).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("replay.jsonl");

    let rec = RecordingBackend::new(&scripted, &journal).unwrap();
    let (model, _, ledger) = train_with(&ds, rec, &run_cfg(OracleConfig::default(), 4), &dir.path().join("a")).unwrap();
    let records: Vec<ReplayRecord> = fs::read_to_string(&journal)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let defines = records.iter().filter(|r| r.kind == Kind::Define).count();
    let labels = records.iter().filter(|r| r.kind == Kind::Label).count();
    assert_eq!(defines, 10);
    assert!(labels <= 2000);
    assert_eq!(labels as u64, ledger.label_calls);

    let replay = ReplayBackend::open(&journal).unwrap();
    let (again, _, _) = train_with(&ds, &replay, &run_cfg(OracleConfig::default(), 4), &dir.path().join("b")).unwrap();
    assert_eq!(again, model);
    assert_eq!(
        fs::read(dir.path().join("a/model.json")).unwrap(),
        fs::read(dir.path().join("b/model.json")).unwrap()
    );

    // A different seed asks different questions: the journal cannot answer.
    let mut oracle = Oracle::new(&replay, OracleConfig::default());
    let cfg = TrainConfig {
        seed: 5,
        ..TrainConfig::default()
    };
    let err = train(&ds, &mut oracle, &cfg, &mut MemoryCache::new()).unwrap_err();
    assert!(matches!(err.root(), Error::Backend { source: BackendError::ReplayMiss(_), .. }), "{err}");
}

#[test]
fn perturbed_request_misses() {
    let world = SynthWorld::perfect(2);
    let (ds, scripted) = generate(&world, 20).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let rec = RecordingBackend::new(&scripted, &journal).unwrap();
    let req = LabelRequest {
        template: "label-v1".into(),
        prompt: "Is hidden property 0 present?".into(),
        media_ref: ds.get(0).media_ref.clone(),
        questions: vec!["Is hidden property 0 present?".into()],
        attempt: 0,
    };
    let resp = rec.label(&req).unwrap();
    let replay = ReplayBackend::open(&journal).unwrap();
    assert_eq!(replay.label(&req).unwrap(), resp);
    let mut other = req.clone();
    other.prompt.push(' ');
    assert!(matches!(replay.label(&other), Err(BackendError::ReplayMiss(_))));
}

#[test]
fn http_backend_against_mock_server() {
    let world = SynthWorld::majority_of_three(0.0, 41).unwrap();
    let (ds, scripted) = generate(&world, 60).unwrap();
    let server = MockServer::start(scripted.clone());
    let cfg = http_config(&server.url);
    let http = Parallel::new(HttpBackend::new(&cfg).unwrap(), 4);
    let mut oracle = Oracle::new(&http, cfg.clone());
    let (model, trace) = train(&ds, &mut oracle, &TrainConfig::default(), &mut MemoryCache::new()).unwrap();
    assert_eq!(model.rounds().len(), 10);
    assert!(trace.final_train_accuracy().unwrap() > 0.75);
    let ledger = oracle.ledger();
    assert_eq!(server.requests() as u64, ledger.define_calls + ledger.label_calls);
}

#[test]
fn http_transient_failures_are_retried() {
    let world = SynthWorld::perfect(3);
    let (ds, scripted) = generate(&world, 20).unwrap();
    let server = MockServer::start_failing(scripted, 2);
    let cfg = http_config(&server.url);
    let http = HttpBackend::new(&cfg).unwrap();
    let mut oracle = Oracle::new(&http, cfg.clone());
    let tc = TrainConfig {
        rounds: 1,
        ..TrainConfig::default()
    };
    train(&ds, &mut oracle, &tc, &mut MemoryCache::new()).unwrap();
    assert_eq!(oracle.ledger().retries, 2);

    let server = MockServer::start_failing(generate(&world, 20).unwrap().1, 100);
    let cfg = OracleConfig {
        max_retries: 1,
        ..http_config(&server.url)
    };
    let http = HttpBackend::new(&cfg).unwrap();
    let mut oracle = Oracle::new(&http, cfg.clone());
    let err = train(&ds, &mut oracle, &tc, &mut MemoryCache::new()).unwrap_err();
    assert!(err.is_oracle());
    assert_eq!(server.requests(), 2);
}

#[test]
fn unreachable_endpoint_is_an_oracle_error() {
    let (ds, _) = generate(&SynthWorld::perfect(1), 40).unwrap();
    let cfg = OracleConfig {
        max_retries: 0,
        ..http_config("http://127.0.0.1:9/v1/chat/completions")
    };
    let http = HttpBackend::new(&cfg).unwrap();
    let mut oracle = Oracle::new(&http, cfg.clone());
    let err = train(&ds, &mut oracle, &TrainConfig::default(), &mut MemoryCache::new()).unwrap_err();
    assert!(err.is_oracle(), "{err}");
    assert_eq!(attriboost::AppError::from(err).exit_code(), 3);
}
