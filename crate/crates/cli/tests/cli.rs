use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn library() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/library")
}

fn sable(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sable"))
        .args(args)
        .env_remove("SABLE_LIBRARY_DIR")
        .output()
        .expect("binary runs")
}

fn lib(rel: &str) -> String {
    library().join(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn running_example(extra: &[&str]) -> Output {
    let (src, def, ann) = (
        lib("running_example/source_code.py"),
        lib("running_example/static_aspect_definition.sable"),
        lib("running_example/source_annotation.json"),
    );
    let mut args = vec![
        "analyze",
        &src,
        "--procedure",
        "source_code.py:runningExample",
        "--sable",
        &def,
        "--annotation",
        &ann,
    ];
    args.extend_from_slice(extra);
    sable(&args)
}

#[test]
fn running_example_reports_three_alarms() {
    let o = running_example(&[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("<StaticAspectAnalysis (id "), "{out}");
    assert!(out.ends_with(
        "   - alarms:\n      - line 18\n         SensitiveBranching = True at step 8\n         SensitiveBranching = True at step 14\n      - line 29\n         ConfidentialityViolation = True at step 35\n>\n"
    ));
    assert_eq!(out, stdout(&running_example(&[])));
}

#[test]
fn machine_format_is_json() {
    let o = running_example(&["--format", "machine"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let alarms = v[0]["alarms"].as_array().unwrap();
    let steps: Vec<u64> = alarms.iter().map(|a| a["step"].as_u64().unwrap()).collect();
    assert_eq!(steps, [8, 14, 35]);
}

#[test]
fn fixed_fixture_exits_zero() {
    let o = sable(&[
        "analyze",
        &lib("contextual_value/cve_2015_3010/fixed.py"),
        "--procedure",
        "gatherkeys.py:gatherkeys",
        "--library-entry",
        "ContextualValue",
        "--annotation",
        &lib("contextual_value/cve_2015_3010/annotation.json"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("   - alarms:\n>\n"));
}

#[test]
fn several_procedures_report_in_request_order() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "m.py",
        "def a(s):\n    sink(s)\n\ndef b(s):\n    return 1\n",
    );
    let ann = write(
        dir.path(),
        "a.json",
        r#"{"m.py:a": {"source": ["s"], "sink": ["sink"]}, "m.py:b": {"source": ["s"], "sink": ["sink"]}}"#,
    );
    let o = sable(&[
        "analyze",
        &src,
        "--procedure",
        "m.py:b",
        "--procedure",
        "m.py:a",
        "--library-entry",
        "SourceTainting",
        "--annotation",
        &ann,
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "missing labels must fail: {}",
        stdout(&o)
    );
    assert!(
        stderr(&o).contains("label 'sanitize' is not in the source annotation"),
        "{}",
        stderr(&o)
    );
    let ann = write(
        dir.path(),
        "b.json",
        &r#"{"m.py:a": E, "m.py:b": E}"#.replace(
            'E',
            r#"{"source": ["s"], "sink": ["sink"], "sanitize": [], "updUse": [], "safe": [], "options": []}"#,
        ),
    );
    let o = sable(&[
        "analyze",
        &src,
        "--procedure",
        "m.py:b",
        "--procedure",
        "m.py:a",
        "--library-entry",
        "SourceTainting",
        "--annotation",
        &ann,
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    let b = out.find("procedure = m.py:b").unwrap();
    let a = out.find("procedure = m.py:a").unwrap();
    assert!(b < a);
    assert!(out.contains("      - line 2\n         Vulnerability = True at step 2\n"));
}

#[test]
fn missing_annotation_label_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let ann = write(
        dir.path(),
        "ann.json",
        r#"{"source_code.py:runningExample": {"source": ["genPrivate"]}}"#,
    );
    let o = sable(&[
        "analyze",
        &lib("running_example/source_code.py"),
        "--procedure",
        "source_code.py:runningExample",
        "--library-entry",
        "RunningExample",
        "--annotation",
        &ann,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("label 'sink' is not in the source annotation"),
        "{err}"
    );
    assert!(err.contains("travConfidentiality"), "{err}");
}

#[test]
fn loop_cap_is_configurable() {
    let o = running_example(&["--max-loop-iters", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("did not reach a fixpoint"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn dump_scfg_matches_golden() {
    let o = sable(&[
        "dump-scfg",
        &lib("running_example/source_code.py"),
        "--procedure",
        "source_code.py:runningExample",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/running_example.scfg"),
    )
    .unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn dump_scfg_small_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "m.py", "def f(): pass\n");
    let o = sable(&["dump-scfg", &src, "--procedure", "m.py:f"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains('|')).count(), 3);
    let o = sable(&["dump-scfg", &src, "--procedure", "m.py:g"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sable(&["dump-scfg", &src, "--procedure", "m.py:f", "--dot"]);
    assert!(stdout(&o).starts_with("digraph scfg {"));
}

#[test]
fn check_library_echoes_order() {
    let o = sable(&[
        "check",
        &lib("running_example/static_aspect_definition.sable"),
        &lib("source_tainting/definition.sable"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("order: travSensitive, travSourceTainting, travConfidentiality\n"));
}

#[test]
fn check_rejects_duplicate_pointcuts_and_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let dup = write(
        dir.path(),
        "dup.sable",
        "traversal A:\n\tpointcut(Assign, l, r): pass\n\tpointcut(Assign, l, r): pass\n",
    );
    let o = sable(&["check", &dup]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("pointcut `Assign` used more than once"),
        "{}",
        stderr(&o)
    );
    let cyc = write(
        dir.path(),
        "cyc.sable",
        "traversal A:\n\tfromTraversal B importAspect Y\n\taspect X aspectType bool\n\ntraversal B:\n\tfromTraversal A importAspect X\n\taspect Y aspectType bool\n",
    );
    let o = sable(&["check", &cyc]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains(r#"cyclic traversal dependencies among ["A", "B"]"#),
        "{}",
        stderr(&o)
    );
}

fn record(id: &str, tb: &[u32], db: &[u32], ta: &[u32], da: &[u32]) -> String {
    serde_json::json!({"id": id, "truth_before": tb, "detect_before": db, "truth_after": ta, "detect_after": da})
        .to_string()
}

#[test]
fn eval_perfect_record() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "v1.json", &record("v1", &[5], &[5], &[5], &[]));
    let o = sable(&["eval", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let total = stdout(&o)
        .lines()
        .find(|l| l.starts_with("total"))
        .unwrap()
        .to_string();
    assert_eq!(total.matches("100.00%").count(), 3, "{total}");
}

#[test]
fn eval_reproduces_worked_numbers() {
    let dir = tempfile::tempdir().unwrap();
    // 10 vulnerable lines, 9 found; 10 patched lines, 2 still flagged.
    let before: Vec<u32> = (1..=10).collect();
    write(
        dir.path(),
        "a.json",
        &record("a", &before, &before[..9], &before, &[3, 7]),
    );
    let o = sable(&["eval", dir.path().to_str().unwrap(), "--format", "machine"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m = &v["aggregate"];
    assert!((m["sensitivity"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!((m["specificity"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!((m["precision"].as_f64().unwrap() * 100.0 - 82.0).abs() <= 0.5);
    let mx = &v["aggregate"]["matrix"];
    assert_eq!(
        (
            mx["tp"].as_u64(),
            mx["fn"].as_u64(),
            mx["tn"].as_u64(),
            mx["fp"].as_u64()
        ),
        (Some(9), Some(1), Some(8), Some(2))
    );
}

#[test]
fn eval_relaxed_and_comparison() {
    let a = tempfile::tempdir().unwrap();
    write(
        a.path(),
        "r.json",
        &format!(
            "[{}, {}]",
            record("v1", &[1, 2], &[3, 4, 5], &[1, 2], &[8]),
            record("v2", &[4], &[4], &[4], &[])
        ),
    );
    let o = sable(&[
        "eval",
        a.path().to_str().unwrap(),
        "--mode",
        "relaxed",
        "--format",
        "machine",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        v["records"][0]["matrix"],
        serde_json::json!({"tp": 2, "fn": 0, "tn": 1, "fp": 2})
    );
    let o = sable(&[
        "eval",
        a.path().to_str().unwrap(),
        "--compare",
        a.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("E=0.5000"), "{}", stdout(&o));
}

#[test]
fn library_dir_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_sable"))
        .args(["library"])
        .env("SABLE_LIBRARY_DIR", "/nonexistent/sable-library")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_sable"))
        .args(["library"])
        .env("SABLE_LIBRARY_DIR", library())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ContextualValue: contextual_value/definition.sable"));
}

#[test]
fn eval_shows_undefined_rates_as_missing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.json", &record("a", &[4], &[4], &[], &[]));
    let o = sable(&["eval", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let total = stdout(&o).lines().last().unwrap().to_string();
    assert!(total.starts_with("total"), "{total}");
    assert!(total.contains(" - "), "{total}");
    let o = sable(&["eval", dir.path().to_str().unwrap(), "--format", "machine"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["aggregate"]["specificity"].is_null());
    assert_eq!(v["aggregate"]["sensitivity"].as_f64(), Some(1.0));
}
