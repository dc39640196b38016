use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn masca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masca"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MASCA_LOG")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn config() -> String {
    fixture("golden_config.toml").display().to_string()
}

/// Every file under `dir`, relative, sorted.
fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(masca(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(masca(&["--version"], tmp.path()).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = masca(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_on_missing_directory_exits_2_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no-such-run");
    let out = masca(&["eval", missing.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(
        text(&out.stderr).contains(missing.to_str().unwrap()),
        "{}",
        text(&out.stderr)
    );
}

#[test]
fn invalid_config_lists_every_problem_and_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = masca(
        &[
            "run",
            "--config",
            &config(),
            "--dataset",
            "missing.data",
            "--workers",
            "0",
            "--output",
            "o",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("missing.data") && err.contains("workers"), "{err}");
}

#[test]
fn run_twice_is_byte_identical_and_stays_in_its_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = masca(&["run", "--config", &config(), "--output", name], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let top: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(top.len(), 2, "{top:?}");
    let a = std::fs::read(tmp.path().join("a/transcripts.jsonl")).unwrap();
    let b = std::fs::read(tmp.path().join("b/transcripts.jsonl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
}

#[test]
fn cot_run_sends_step_by_step_prompts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = masca(
        &["run", "--config", &config(), "--topology", "cot", "--output", "cot"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let cache = tmp.path().join("cot/cache");
    let entries: Vec<PathBuf> = std::fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 10);
    for path in entries {
        let entry: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let prompt = entry["request"]["messages"].to_string();
        assert!(prompt.contains("Think step by step"), "{}", path.display());
    }
}

#[test]
fn ablate_three_topologies_writes_three_runs_and_one_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = masca(
        &[
            "ablate",
            "--config",
            &config(),
            "--topologies",
            "flat,two_level,hierarchical3",
            "--output",
            "sweep",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let sweep = tmp.path().join("sweep");
    for kind in ["flat", "two_level", "hierarchical3"] {
        assert!(sweep.join(kind).join("report.md").exists(), "{kind}");
    }
    let table = std::fs::read_to_string(sweep.join("comparison.md")).unwrap();
    assert_eq!(
        table.lines().filter(|l| l.starts_with("| ") && l.contains('%')).count(),
        3
    );
    assert!(table.contains("Single-level with multiple agents"));
    assert!(table.contains("Two-level with multiple agents"));
    assert_eq!(text(&out.stdout), table);
}

#[test]
fn eval_then_report_merges_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, kind) in [("h", "hierarchical3"), ("z", "zero_shot")] {
        let out = masca(
            &["run", "--config", &config(), "--topology", kind, "--output", dir],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        let out = masca(&["eval", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        assert!(tmp.path().join(dir).join("report.csv").exists());
    }
    let out = masca(
        &[
            "report",
            "h",
            "z",
            "--reference",
            "MultiAgent (gpt-4o)",
            "--out",
            "table.md",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("table.md")).unwrap();
    assert!(table.contains("| Zero Shot (gpt-4o) | 50.00% |"), "{table}");
    assert!(table.contains("-10.00"), "{table}");
}

#[test]
fn gender_probe_writes_bias_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = masca(
        &["bias", "gender", "--config", &config(), "--output", "bias"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for name in ["bias.md", "bias.json", "bias.csv"] {
        assert!(tmp.path().join("bias").join(name).exists(), "{name}");
    }
    assert!(text(&out.stdout).contains("female"));
}

#[test]
fn ingest_converts_statlog_to_jsonl() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture("german10.data");
    let out = masca(
        &["ingest", data.to_str().unwrap(), "--output", "data/records.jsonl"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let jsonl = std::fs::read_to_string(tmp.path().join("data/records.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 10);
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["values"]["X1"], "A11");
}
