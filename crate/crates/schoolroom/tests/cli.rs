mod common;

use std::fs;

use common::{files_with_ext, fixture, run};
use schoolroom::hash::tree_hash;
use schoolroom::manifest::{read_jsonl, ManifestEntry};
use serde_json::Value;

fn stdout_json(out: &std::process::Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad summary {text:?}: {e}"))
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), 3, 2);
    let cfg = fx.config.to_str().unwrap();
    let out = run(&["pipeline", "--config", cfg, "--dry-run", "--quiet"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["utterances"], fx.utterances);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn exit_codes_follow_categories() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), 2, 1);
    let cfg = fx.config.to_str().unwrap();

    // Bad config value.
    fs::write(tmp.path().join("bad.toml"), "seed = 1\n[splits]\ntrain = 2.0\n").unwrap();
    let out = run(&["rir-bank", "--config", "bad.toml", "--output", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    // Unknown key.
    fs::write(tmp.path().join("typo.toml"), "seed = 1\nsede = 2\n").unwrap();
    assert_eq!(
        run(&["rir-bank", "--config", "typo.toml"], tmp.path()).status.code(),
        Some(2)
    );

    // No seed anywhere.
    fs::write(tmp.path().join("noseed.toml"), "[paths]\noutput = \"o\"\n").unwrap();
    assert_eq!(
        run(&["rir-bank", "--config", "noseed.toml"], tmp.path()).status.code(),
        Some(2)
    );

    // Usage error.
    assert_eq!(run(&["no-such-command"], tmp.path()).status.code(), Some(2));

    // Missing config file and missing referenced input.
    assert_eq!(
        run(&["rir-bank", "--config", "absent.toml"], tmp.path()).status.code(),
        Some(3)
    );
    fs::remove_file(tmp.path().join("embeddings.jsonl")).unwrap();
    assert_eq!(
        run(&["pair", "--config", cfg, "--quiet"], tmp.path()).status.code(),
        Some(3)
    );

    // Stage failure: a table row whose audio is not a WAV file.
    fs::write(tmp.path().join("audio/child00_0.wav"), b"not a wav").unwrap();
    let out = run(&["partition", "--config", cfg, "--quiet"], tmp.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn log_lines_are_json_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), 2, 2);
    let out = run(&["partition", "--config", fx.config.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<Value> = stderr.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines
        .iter()
        .any(|l| l["stage"] == "partition" && l["items"] == fx.utterances));
    assert!(lines.iter().all(|l| l.get("stage").is_some()));
    assert_eq!(
        read_jsonl::<Value>(&tmp.path().join("out/splits.jsonl")).unwrap().len(),
        fx.utterances
    );
}

#[test]
fn staged_commands_match_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), 3, 2);
    let cfg = fx.config.to_str().unwrap();
    let all = [
        "--condition",
        "clean",
        "--condition",
        "rir",
        "--condition",
        "noise",
        "--condition",
        "rir+noise",
    ];

    let mut args = vec!["pipeline", "--config", cfg, "--quiet", "--output", "whole"];
    args.extend(all);
    let out = run(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for cmd in ["rir-bank", "babble", "assemble"] {
        let out = run(&[cmd, "--config", cfg, "--quiet", "--output", "staged"], tmp.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut args = vec!["mix", "--config", cfg, "--quiet", "--output", "staged"];
    args.extend(all);
    let out = run(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        tree_hash(&tmp.path().join("whole")).unwrap(),
        tree_hash(&tmp.path().join("staged")).unwrap()
    );
    let noisy: Vec<ManifestEntry> = ["train", "dev", "test"]
        .iter()
        .flat_map(|s| {
            read_jsonl::<ManifestEntry>(&tmp.path().join(format!("whole/manifests/rir+noise_{s}.jsonl"))).unwrap()
        })
        .collect();
    assert!(!noisy.is_empty());
    for e in &noisy {
        assert!(e.rir_id.is_some() && e.snr_db.is_some() && e.noise.is_some());
        assert!(tmp.path().join("whole").join(&e.audio_path).is_file());
    }
}

#[test]
fn rir_bank_default_spec_writes_160_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["rir-bank", "--seed", "3", "--output", "o", "--quiet"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["rirs"], 160);
    assert_eq!(files_with_ext(&tmp.path().join("o/rir_bank/rirs"), "wav").len(), 160);
    let index = read_jsonl::<Value>(&tmp.path().join("o/rir_bank/index.jsonl")).unwrap();
    assert_eq!(index.len(), 160);
}

#[test]
fn env_overrides_reach_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = common::bin()
        .args(["rir-bank", "--dry-run", "--output", "o", "--quiet"])
        .env("SCHOOLROOM_SEED", "5")
        .env("SCHOOLROOM_RIR_BANK__N_ROOMS", "3")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["rirs"], 60);
}

#[test]
fn sweep_gen_and_validate_embeddings() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), 1, 1);
    let out = run(&["sweep-gen", "--seed", "1", "--output", "s", "--quiet"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files_with_ext(&tmp.path().join("s"), "wav").len(), 2);

    let emb = fx.dir.join("embeddings.jsonl");
    let out = run(&["validate-embeddings", emb.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    let text = fs::read_to_string(&emb)
        .unwrap()
        .replacen("\"count\":2", "\"count\":3", 1);
    fs::write(&emb, text).unwrap();
    assert_eq!(
        run(&["validate-embeddings", emb.to_str().unwrap()], tmp.path())
            .status
            .code(),
        Some(4)
    );
}
