use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use c2sim_cli::replay::{Replay, TickRecord};
use c2sim_cli::report::{AGGREGATE_ID, COLUMNS};
use c2sim_core::sim::OrderKind;

fn c2sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_c2sim")).args(args).env("C2SIM_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(name)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn validate_exit_codes() {
    for f in ["tigerclaw.json", "skirmish.json"] {
        let out = c2sim(&["validate", "--scenario", shipped(f).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", text(&out.stderr));
        assert!(text(&out.stdout).contains("ok"));
    }
    assert_eq!(code(&c2sim(&["validate", "--scenario", "tigerclaw"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_slice(&std::fs::read(shipped("skirmish.json")).unwrap()).unwrap();
    doc["max_ticks"] = serde_json::json!(0);
    doc["tick_seconds"] = serde_json::json!(-1.0);
    std::fs::write(&bad, doc.to_string()).unwrap();
    let out = c2sim(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = text(&out.stderr);
    assert!(err.contains("max_ticks") && err.contains("tick_seconds"), "every violation reported: {err}");

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&c2sim(&["validate", "--scenario", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&c2sim(&["validate", "--scenario", "/nonexistent/x.json"])), 2);
}

#[test]
fn usage_exit_codes() {
    assert_eq!(code(&c2sim(&["validate", "--scenario", "skirmish", "--frobnicate"])), 1);
    assert_eq!(code(&c2sim(&["launch"])), 1);
    assert_eq!(code(&c2sim(&[])), 1);
    assert_eq!(code(&c2sim(&["eval", "--policy", "genius", "--rollouts", "1"])), 1);
    assert_eq!(code(&c2sim(&["eval", "--policy", "random", "--checkpoint", "x"])), 1);
    let help = c2sim(&["--help"]);
    assert_eq!(code(&help), 0);
    for sub in ["validate", "train", "eval", "play", "replay", "bench"] {
        assert!(text(&help.stdout).contains(sub), "help lists {sub}");
    }
    assert_eq!(code(&c2sim(&["--version"])), 0);
}

#[test]
fn eval_report_rows_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("eval.csv");
    let replays = dir.path().join("replays");
    let out = c2sim(&[
        "eval",
        "--policy",
        "doctrine",
        "--scenario",
        "skirmish",
        "--rollouts",
        "100",
        "--seed",
        "5",
        "--out",
        csv_path.to_str().unwrap(),
        "--replays",
        replays.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("rollouts        100"));

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), COLUMNS);
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 101);
    let data = &records[..100];
    let agg = &records[100];
    assert_eq!(&agg[0], AGGREGATE_ID);
    for (i, r) in data.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
    }
    for col in 1..5 {
        let xs: Vec<f64> = data.iter().map(|r| r[col].parse().unwrap()).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let (m, s) = agg[col].split_once('±').unwrap();
        assert!((m.parse::<f64>().unwrap() - mean).abs() < 1e-9, "column {col} mean");
        assert!((s.parse::<f64>().unwrap() - std).abs() < 1e-9, "column {col} std");
    }
    let total: usize = agg[5].split(';').map(|kv| kv.split_once(':').unwrap().1.parse::<usize>().unwrap()).sum();
    assert_eq!(total, 100);

    let files: Vec<_> = std::fs::read_dir(&replays).unwrap().collect();
    assert_eq!(files.len(), 100);
    let r0 = replays.join("rollout-0-seed5.tcrp");
    let replay = Replay::load(&r0).unwrap();
    assert_eq!(replay.end.as_ref().unwrap().score, data[0][1].parse::<f64>().unwrap());

    let events = dir.path().join("events.jsonl");
    let out = c2sim(&[
        "replay",
        "--file",
        r0.to_str().unwrap(),
        "--scenario",
        "skirmish",
        "--events-out",
        events.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("verdict: exact"));
    let lines = std::fs::read_to_string(&events).unwrap().lines().count();
    assert_eq!(lines, replay.event_count());

    let out = c2sim(&["replay", "--file", r0.to_str().unwrap(), "--scenario", "tigerclaw"]);
    assert_eq!(code(&out), 2, "replay against another scenario is refused");

    let mut tampered = replay.clone();
    let t = first_effective_move(&tampered.ticks).expect("some unit moved");
    tamper_move(&mut tampered.ticks[t]);
    let bad = dir.path().join("tampered.tcrp");
    tampered.save(&bad).unwrap();
    let out = c2sim(&["replay", "--file", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stdout).contains("diverged"), "{}", text(&out.stdout));

    let mut bytes = std::fs::read(&r0).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x20;
    std::fs::write(&bad, bytes).unwrap();
    assert_eq!(code(&c2sim(&["replay", "--file", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&c2sim(&["replay", "--file", "/nonexistent.tcrp"])), 3);
}

fn first_effective_move(ticks: &[TickRecord]) -> Option<usize> {
    ticks.iter().position(|t| t.orders.iter().flatten().any(|o| matches!(o.kind, OrderKind::Move { .. })))
}

fn tamper_move(t: &mut TickRecord) {
    for o in t.orders.iter_mut().flatten() {
        if let OrderKind::Move { dx, dy } = &mut o.kind {
            *dx = -*dx - 1.0;
            *dy = -*dy - 1.0;
            return;
        }
    }
}

#[test]
fn bench_prints_throughput() {
    let out = c2sim(&["bench", "--ticks", "2000", "--json"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["workers"], 1);
    assert_eq!(v["ticks_per_worker"], 2000);
    assert!(v["ticks_per_sec_per_worker"].as_f64().unwrap() > 0.0);
    let out = c2sim(&["bench", "--ticks", "500", "--workers", "2", "--policy", "random", "--scenario", "skirmish"]);
    assert_eq!(code(&out), 0);
    assert!(text(&out.stdout).contains("steps/sec per worker"));
    assert_eq!(code(&c2sim(&["bench", "--workers", "0"])), 1);
}

#[test]
fn train_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = c2sim(&[
        "train",
        "--scenario",
        "skirmish",
        "--out",
        dir.path().to_str().unwrap(),
        "--workers",
        "2",
        "--steps",
        "2000",
        "--eval-period",
        "1000",
        "--eval-rollouts",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    for f in ["checkpoint_0.json", "best.json", "last.json", "train_log.csv"] {
        assert!(dir.path().join(f).exists(), "{f} written");
    }
    let last = dir.path().join("last.json");
    let out = c2sim(&["eval", "--checkpoint", last.to_str().unwrap(), "--scenario", "skirmish", "--rollouts", "3"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout).lines().count(), 5);

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"gamma": 1.5}"#).unwrap();
    let out = c2sim(&["train", "--out", dir.path().to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    std::fs::write(&cfg, r#"{"gamma_typo": 0.9}"#).unwrap();
    let out = c2sim(&["train", "--out", dir.path().to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = c2sim(&["eval", "--checkpoint", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let pair = dir.path().join("pair");
    let out = c2sim(&[
        "train",
        "--pair",
        "--scenario",
        "skirmish",
        "--out",
        pair.to_str().unwrap(),
        "--workers",
        "1",
        "--steps",
        "400",
        "--eval-period",
        "200",
        "--eval-rollouts",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("red trained 400 env steps"));
    let red = pair.join("red/last.json");
    let out = c2sim(&[
        "eval",
        "--checkpoint",
        red.to_str().unwrap(),
        "--scenario",
        "skirmish",
        "--rollouts",
        "2",
        "--opponent",
        "doctrine",
    ]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert_eq!(code(&c2sim(&["train", "--pair", "--side", "red", "--out", pair.to_str().unwrap()])), 1);
}
