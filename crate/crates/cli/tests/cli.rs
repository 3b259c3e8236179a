use std::fs;
use std::process::{Command, Output};

fn repoprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repoprint"))
        .args(args)
        .env_remove("REPOPRINT_SEED")
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = repoprint(&["evaluate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(repoprint(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = repoprint(&["evaluate", "--features", missing.to_str().unwrap(), "--out-dir", "x"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("nope.csv"));

    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"definitely not a repos file").unwrap();
    let out = repoprint(&["stats", "--repos", junk.to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "store");
}

#[test]
fn manifests_echo_cuts_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    ok(repoprint(&["synth", "--n", "60", "--seed", "4", "--out-dir", &p("c")]));
    ok(repoprint(&[
        "ingest",
        "--archive",
        &p("c/events.ndjson"),
        "--users",
        &p("c/users.tsv"),
        "--geocoder",
        &format!("file:{}", p("c/gazetteer.tsv")),
        "--out",
        &p("repos.bin"),
    ]));
    // The seed comes from the environment when the flag is absent.
    ok(Command::new(env!("CARGO_BIN_EXE_repoprint"))
        .args(["features", "--repos", &p("repos.bin"), "--meta", &p("c/meta.csv"), "--lda-iters", "20", "--out", &p("f.csv")])
        .env("REPOPRINT_SEED", "42")
        .output()
        .unwrap());
    assert_eq!(json(&dir.path().join("f.csv.manifest.json"))["seeds"], serde_json::json!([42]));

    ok(repoprint(&["evaluate", "--features", &p("f.csv"), "--cuts", "60,80,130", "--seeds", "2", "--out-dir", &p("r")]));
    let m = json(&dir.path().join("r/evaluate.manifest.json"));
    assert_eq!(m["config"]["cuts"], "60,80,130");
    assert_eq!(m["report"]["cuts"], serde_json::json!([60, 80, 130]));
    assert_eq!(m["report"]["explicit_cuts"], true);
    assert_eq!(m["seeds"], serde_json::json!([1, 2]));
    assert_eq!(m["input_hashes"].as_object().unwrap().len(), 1);
    for f in ["eval_report.csv", "model.json", "summary.json"] {
        assert!(dir.path().join("r").join(f).exists(), "{f}");
    }
    let out = repoprint(&["evaluate", "--features", &p("f.csv"), "--cuts", "60,80", "--out-dir", &p("r2")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly three"));
    let header = fs::read_to_string(dir.path().join("r/eval_report.csv")).unwrap();
    assert!(header.starts_with("cluster,us_precision,"));

    ok(repoprint(&["stats", "--repos", &p("repos.bin"), "--meta", &p("c/meta.csv"), "--lda-iters", "20", "--out", &p("s.csv")]));
    let stats = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    for metric in ["kl_event_types_no_watch", "z_jaccard", "z_topic_1"] {
        assert!(stats.contains(metric), "{metric} missing:\n{stats}");
    }
}

#[test]
fn translator_flag_keeps_its_old_spelling() {
    let out = repoprint(&["features", "--translate-cmd", "cat", "--repos", "missing.bin", "--out", "f.csv"]);
    // Parsed fine; fails later on the missing input.
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_enum_values_are_usage_errors() {
    let out = repoprint(&["ablate", "--mode", "sideways", "--features", "f.csv", "--out-dir", "r"]);
    assert_eq!(out.status.code(), Some(2));
}
