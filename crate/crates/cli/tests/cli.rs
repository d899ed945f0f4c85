use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lsm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsm"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn synth(dir: &Path, projects: usize, seed: u64) {
    let o = lsm(
        &["synth", "--projects", &projects.to_string(), "--seed", &seed.to_string(), "--out", "bundle"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_dictionary_aborts_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 3, 1);
    let cfg = tmp.path().join("bundle/run.toml");
    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(&cfg, format!("dictionary = \"absent.dic\"\n{text}")).unwrap();
    let o = lsm(&["run", "--config", "bundle/run.toml"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.dic"));
    assert!(!tmp.path().join("bundle/results").exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.toml"), "out_dir = \"o\"\nworkerz = 2\n").unwrap();
    assert_eq!(code(&lsm(&["validate", "--config", "run.toml"], tmp.path())), 2);
}

#[test]
fn full_run_is_reproducible_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 30, 4);
    let run = || {
        let o = lsm(&["run", "--config", "bundle/run.toml"], tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let out = tmp.path().join("bundle/results");
        (
            fs::read(out.join("projects.csv")).unwrap(),
            fs::read(out.join("models.json")).unwrap(),
            fs::read(out.join("manifest.json")).unwrap(),
        )
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let csv = String::from_utf8(first.0).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.starts_with("project,new_c,bct,new_b,bfr,lsm0,"));
    let manifest: serde_json::Value = serde_json::from_slice(&first.2).unwrap();
    let files = manifest["files"].as_object().unwrap();
    for name in ["projects.csv", "models.json", "models.md", "profiles.jsonl"] {
        assert!(files.contains_key(name), "{name} missing from manifest");
    }
}

#[test]
fn too_few_projects_for_the_suite_is_partial() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 5, 2);
    let o = lsm(&["run", "--config", "bundle/run.toml"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(tmp.path().join("bundle/results/models.md").is_file());
}

#[test]
fn stepwise_commands_agree_with_the_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, 4, 9);
    let ok = |args: &[&str]| {
        let o = lsm(args, d);
        assert!(matches!(code(&o), 0 | 3), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    ok(&["run", "--config", "bundle/run.toml"]);
    let p = "bundle/synth-001";
    ok(&["ingest", "--project", &format!("{p}/meta.toml"), "--archive", &format!("{p}/archive"), "--out", "s/events.jsonl"]);
    ok(&["elites", "--events", "s/events.jsonl", "--config", "bundle/run.toml", "--out", "s/intervals.json"]);
    ok(&[
        "conversations",
        "--events",
        "s/events.jsonl",
        "--intervals",
        "s/intervals.json",
        "--project",
        &format!("{p}/meta.toml"),
        "--out-dir",
        "s/corpora",
    ]);
    for f in ["cross_elite.txt", "cross_nonelite.txt", "within_elite.txt", "within_nonelite.txt"] {
        assert_eq!(
            fs::read(d.join("s/corpora").join(f)).unwrap(),
            fs::read(d.join("bundle/results/corpora/synth-001").join(f)).unwrap(),
            "{f}"
        );
    }
    ok(&["textprep", "--in", "s/corpora/cross_elite.txt", "--out", "s/tokens.jsonl"]);
    ok(&["score", "--tokens", "s/tokens.jsonl", "--summary", "approx", "--out", "s/profile.json"]);
    let profile: serde_json::Value = serde_json::from_slice(&fs::read(d.join("s/profile.json")).unwrap()).unwrap();
    let stored = fs::read_to_string(d.join("bundle/results/profiles.jsonl")).unwrap();
    let row: serde_json::Value = stored
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["project"] == "synth-001")
        .unwrap();
    assert_eq!(profile["total_words"], row["cross_elite"]["total_words"]);
    for k in 0..8 {
        let a = profile["function_pct"][k].as_f64().unwrap();
        let b = row["cross_elite"]["function_pct"][k].as_f64().unwrap();
        assert!((a - b).abs() < 1e-9, "category {k}: {a} vs {b}");
    }

    ok(&["metrics", "--config", "bundle/run.toml", "--out", "s/projects.csv"]);
    assert_eq!(
        fs::read(d.join("s/projects.csv")).unwrap(),
        fs::read(d.join("bundle/results/projects.csv")).unwrap()
    );
    ok(&["describe", "--records", "s/projects.csv", "--profiles", "s/profiles.jsonl", "--out", "s/description.json"]);
    let desc: serde_json::Value = serde_json::from_slice(&fs::read(d.join("s/description.json")).unwrap()).unwrap();
    assert_eq!(desc["variables"].as_array().unwrap().len(), 13);
    assert_eq!(desc["corpora"].as_array().unwrap().len(), 12);
}

#[test]
fn degenerate_synth_spec_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("spec.toml"), "elite_fraction = 0.0\n").unwrap();
    let o = lsm(&["synth", "--spec", "spec.toml", "--out", "b"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("b").exists());
}

#[test]
fn fetch_rejects_malformed_repository() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lsm(
        &["fetch", "--repo", "no-slash", "--token-env", "LSM_TEST_UNSET_TOKEN", "--out", "f"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lsm(&["elites", "--events", "none.jsonl", "--out", "iv.json"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("iv.json").exists());
}

#[test]
fn corrupt_project_leaves_other_rows_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, 30, 6);
    let rows = || {
        let o = lsm(&["run", "--config", "bundle/run.toml"], d);
        let csv = fs::read_to_string(d.join("bundle/results/projects.csv")).unwrap();
        (code(&o), csv.lines().map(str::to_string).collect::<Vec<_>>())
    };
    let (clean_code, clean) = rows();
    assert_eq!(clean_code, 0);
    // Not UTF-8, so the archive cannot be read at all.
    fs::write(d.join("bundle/synth-007/archive/events.jsonl"), [0xff, 0xfe, 0x00, 0x9f]).unwrap();
    let (broken_code, broken) = rows();
    assert_eq!(broken_code, 3);
    assert_eq!(clean.len(), broken.len());
    for (a, b) in clean.iter().zip(&broken) {
        if a.starts_with("synth-007,") {
            assert!(b.ends_with(",failed"), "{b}");
        } else {
            assert_eq!(a, b);
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("bundle/results/manifest.json")).unwrap()).unwrap();
    let failed: Vec<&str> = manifest["projects"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["state"] == "failed")
        .map(|p| p["project"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["synth-007"]);
}
