use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bnforge::formats::NetworkFile;
use bnforge_core::dsl::parse_kb;
use bnforge_core::fragments::build_model;
use serde_json::Value;

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/dwell.bnkb")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn bnforge(args: &[&str], store: &Path) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_bnforge"))
        .args(args)
        .env("BNFORGE_STORE", store)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

/// Scratch directory holding a copy of the demo KB.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("dwell.bnkb");
    std::fs::copy(demo(), &kb).unwrap();
    (dir, kb)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v.as_object().expect("object").keys().map(String::as_str).collect();
    k.sort_unstable();
    k
}

#[test]
fn review_of_the_demo_kb_is_clean_and_lists_stubs() {
    let (dir, kb) = workspace();
    let r = bnforge(&["review", s(&kb)], dir.path());
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("R6 info: stub `AttritionStub` stands in for: Losses"), "{}", r.stdout);
    assert!(r.stdout.ends_with("0 errors, 0 warnings, 1 info\n"));
}

#[test]
fn perturbed_cpt_is_reported_as_regression() {
    let (dir, kb) = workspace();
    let store = dir.path().join("store");
    let rec = bnforge(&["cases", "record", s(&kb), "--scenario", "watch"], &store);
    assert_eq!(rec.code, 0, "{}", rec.stderr);
    assert!(dir.path().join("golden/watch.json").is_file());
    let same = bnforge(&["cases", "compare", s(&kb), "--scenario", "watch"], &store);
    assert_eq!(same.code, 0, "{}", same.stderr);
    assert!(same.stdout.contains("no regressions in 10 cases"));

    let text = std::fs::read_to_string(&kb).unwrap();
    let edited = text.replacen("    (0.6, 0.4)\n  }\n  var Report", "    (0.65, 0.35)\n  }\n  var Report", 1);
    assert_ne!(text, edited);
    std::fs::write(&kb, edited).unwrap();
    let r = bnforge(&["cases", "compare", s(&kb), "--scenario", "watch"], &store);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stdout.lines().any(|l| l.starts_with("REGRESSION case ")), "{}", r.stdout);
    assert!(r.stdout.contains("golden recorded against"));

    let loose = bnforge(&["cases", "compare", s(&kb), "--scenario", "watch", "--tol", "0.5"], &store);
    assert_eq!(loose.code, 0);
}

#[test]
fn misspelled_variable_is_a_usage_error() {
    let (dir, kb) = workspace();
    let r = bnforge(&["infer", s(&kb), "--target", "Dwell", "--evidence", "Sightng=t"], dir.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Sightng"), "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let r = bnforge(&["infer", s(&kb), "--target", "Dwel"], dir.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Dwel"));
    let r = bnforge(&["infer", s(&kb), "--target", "Dwell", "--evidence", "Sighting=maybe"], dir.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("maybe"));
}

#[test]
fn usage_errors_exit_2_with_usage_text() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &[], &["infer"], &["cases", "explode", "x.bnkb", "--scenario", "s"]] {
        let r = bnforge(args, dir.path());
        assert_eq!(r.code, 2, "{args:?}");
        assert!(r.stderr.contains("Usage"), "{args:?}: {}", r.stderr);
    }
    let help = bnforge(&["--help"], dir.path());
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("importance"));
}

#[test]
fn parse_errors_name_file_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("bad.bnkb");
    std::fs::write(&kb, "fragment F {\n  var A states {t, f} prior 0.5, 0.5)\n}\n").unwrap();
    let r = bnforge(&["validate", s(&kb)], dir.path());
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bad.bnkb:2:"), "{}", r.stderr);
    let missing = bnforge(&["validate", s(&dir.path().join("nope.bnkb"))], dir.path());
    assert_eq!(missing.code, 2);
}

#[test]
fn validate_reports_constraint_violations() {
    let (dir, kb) = workspace();
    let ok = bnforge(&["validate", s(&kb)], dir.path());
    assert_eq!(ok.code, 0, "{}{}", ok.stdout, ok.stderr);
    assert!(ok.stdout.contains("model main: 8 variables"));
    assert!(ok.stdout.contains("model full: 9 variables"));

    let text = std::fs::read_to_string(&kb).unwrap();
    std::fs::write(&kb, text.replace("(0.6, 0.4)\n  }\n  var Report", "(0.01, 0.99)\n  }\n  var Report")).unwrap();
    let bad = bnforge(&["validate", s(&kb)], dir.path());
    assert_eq!(bad.code, 1, "{}", bad.stdout);
    assert!(bad.stdout.contains("violation"));
    let unknown = bnforge(&["validate", s(&kb), "--model", "nope"], dir.path());
    assert_eq!(unknown.code, 2);
}

#[test]
fn compiled_network_file_round_trips() {
    let (dir, kb) = workspace();
    let out = dir.path().join("net/main.json");
    let r = bnforge(&["compile", s(&kb), "--out", s(&out), "--model", "full"], dir.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let file: NetworkFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let net = file.to_network().unwrap();
    let expected =
        build_model(&parse_kb(&std::fs::read_to_string(&kb).unwrap()).unwrap(), Some("full")).unwrap().network;
    assert_eq!(net, expected);
    assert_eq!(file.content_hash, expected.content_hash());
    assert!(file.variables.iter().any(|v| v.name == "Initial #TEL" && v.fragment == "attrition/TEL"));
}

#[test]
fn conflict_exit_code_follows_the_flag() {
    let (dir, kb) = workspace();
    let flagged = bnforge(&["conflict", s(&kb), "--evidence", "Sighting=t", "--evidence", "Activity=idle"], dir.path());
    assert_eq!(flagged.code, 1);
    assert!(flagged.stdout.contains("flagged"));
    let quiet = bnforge(&["conflict", s(&kb), "--evidence", "Sighting=t", "--evidence", "Activity=launch"], dir.path());
    assert_eq!(quiet.code, 0, "{}", quiet.stdout);
}

#[test]
fn impossible_evidence_is_a_finding() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("det.bnkb");
    std::fs::write(
        &kb,
        "fragment F {\n  var A states {t, f} prior (0.5, 0.5)\n  var B states {t, f} given A deterministic {t, f}\n}\n",
    )
    .unwrap();
    let r = bnforge(&["infer", s(&kb), "--target", "A", "--evidence", "A=t", "--evidence", "B=f"], dir.path());
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("zero probability"));
    let c = bnforge(&["conflict", s(&kb), "--evidence", "A=t", "--evidence", "B=f", "--json"], dir.path());
    assert_eq!(c.code, 1);
    let v: Value = serde_json::from_str(&c.stdout).unwrap();
    assert_eq!(v["impossible"], true);
    assert_eq!(v["value"], Value::Null);
}

#[test]
fn json_output_is_byte_identical_and_follows_the_schema() {
    let (dir, kb) = workspace();
    let k = s(&kb);
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["validate", k], vec!["failures", "fragments", "instances", "models", "ok", "scenarios"]),
        (
            vec!["infer", k, "--target", "Dwell", "--evidence", "Sighting=t"],
            vec!["evidence", "evidence_probability", "posteriors"],
        ),
        (
            vec!["importance", k, "--focus", "Dwell", "--evidence", "Sighting,Report", "--base", "Cue=f"],
            vec!["base", "entries", "focus"],
        ),
        (
            vec!["synergy", k, "--focus", "Dwell", "--k", "2", "--samples", "5", "--seed", "9"],
            vec!["base", "entries", "evidence", "focus", "k", "samples", "seed"],
        ),
        (
            vec!["conflict", k, "--evidence", "Sighting=t", "--evidence", "Report=t"],
            vec!["evidence", "flagged", "impossible", "threshold", "value"],
        ),
        (vec!["review", k], vec!["errors", "findings", "infos", "warnings"]),
        (vec!["cases", "gen", k, "--scenario", "sampled_watch"], vec!["cases", "coverage", "scenario"]),
        (vec!["cases", "run", k, "--scenario", "watch"], vec!["cases", "focus", "scenario", "schema_version"]),
        (vec!["log"], vec!["versions"]),
    ];
    for (args, expected) in commands {
        let mut full = args.clone();
        full.push("--json");
        let a = bnforge(&full, dir.path());
        let b = bnforge(&full, dir.path());
        assert!(a.code <= 1, "{args:?}: {}", a.stderr);
        assert_eq!(a.stdout, b.stdout, "{args:?} not deterministic");
        let v: Value = serde_json::from_str(&a.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", a.stdout));
        assert_eq!(keys(&v), expected, "{args:?}");
    }

    let imp: Value = serde_json::from_str(
        &bnforge(&["importance", k, "--focus", "Dwell", "--evidence", "Sighting,Report", "--json"], dir.path()).stdout,
    )
    .unwrap();
    assert_eq!(keys(&imp["entries"][0]), ["importance", "name", "score", "stars"]);
    assert_eq!(imp["entries"][0]["score"], 100.0);
}

#[test]
fn text_output_is_deterministic() {
    let (dir, kb) = workspace();
    let args = ["synergy", s(&kb), "--focus", "Dwell", "--k", "3", "--samples", "4", "--seed", "42"];
    let a = bnforge(&args, dir.path());
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, bnforge(&args, dir.path()).stdout);
    assert_eq!(a.stdout.lines().count(), 6);
}

#[test]
fn importance_prints_the_star_report() {
    let (dir, kb) = workspace();
    let r = bnforge(&["importance", s(&kb), "--focus", "Dwell", "--evidence", "Sighting,Report,Cue"], dir.path());
    assert_eq!(r.code, 0);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "Importance analysis for Dwell");
    assert_eq!(lines[3], "IMPORTANCE    ##  NAME");
    assert_eq!(lines[4], "*****        100  Sighting");
    assert!(lines[6].ends_with("0  Cue"));
}

#[test]
fn snapshot_log_and_diff_use_the_configured_store() {
    let (dir, kb) = workspace();
    let store = dir.path().join("custom-store");
    let first = bnforge(&["snapshot", s(&kb), "-m", "initial", "-r", "demo import", "--json"], &store);
    assert_eq!(first.code, 0, "{}", first.stderr);
    let v1: Value = serde_json::from_str(&first.stdout).unwrap();
    assert_eq!(v1["created"], true);
    assert_eq!(v1["timestamp"], 1_700_000_000u64);
    let id1 = v1["version_id"].as_str().unwrap().to_string();
    assert!(store.join("versions").join(format!("{id1}.bnkb")).is_file());

    let again = bnforge(&["snapshot", s(&kb), "-m", "again", "-r", "none"], &store);
    assert_eq!(again.stdout, format!("snapshot {id1} (unchanged)\n"));

    let text = std::fs::read_to_string(&kb).unwrap();
    std::fs::write(&kb, text.replace("prior (0.1, 0.9) description", "prior (0.2, 0.8) description")).unwrap();
    let second = bnforge(&["snapshot", s(&kb), "-m", "more cueing", "-r", "analyst estimate"], &store);
    let id2 = second.stdout.trim().strip_prefix("snapshot ").unwrap().to_string();
    assert_ne!(id1, id2);

    let log = bnforge(&["log", "--json"], &store);
    let versions: Value = serde_json::from_str(&log.stdout).unwrap();
    assert_eq!(versions["versions"].as_array().unwrap().len(), 2);
    assert_eq!(versions["versions"][1]["parent_id"], id1.as_str());

    let d = bnforge(&["diff", &id1[..10], &id2[..10]], &store);
    assert_eq!(d.code, 0, "{}", d.stderr);
    assert_eq!(d.stdout, "~ fragment Sensors / var Cue / row 0: (0.1, 0.9) => (0.2, 0.8)\n");
    assert_eq!(bnforge(&["diff", &id1, &id1], &store).stdout, "no differences\n");
    let unknown = bnforge(&["diff", &id1, "0000000000"], &store);
    assert_eq!(unknown.code, 2);
    assert!(unknown.stderr.contains("0000000000"));

    // the default store is untouched
    assert!(!dir.path().join(".bnforge").exists());
}
