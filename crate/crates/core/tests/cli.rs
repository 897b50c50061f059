use std::fs;
use std::process::Command;

fn mvtlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvtlab"))
}

#[test]
fn list_presets_names_all_six() {
    let out = mvtlab().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "setting1-linear",
        "setting2-linear",
        "setting3-linear",
        "mixed-linear",
        "mixed-nonlinear",
        "during-experiment",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn validate_array_accepts_and_rejects() {
    let ok = mvtlab().args(["validate-array", "l9"]).output().unwrap();
    assert!(ok.status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.oa");
    // second column is unbalanced
    fs::write(&bad, "2 2\n0 0\n0 0\n1 0\n1 1\n").unwrap();
    let out = mvtlab().arg("validate-array").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let missing = mvtlab()
        .args(["validate-array", "/nonexistent/x.oa"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = mvtlab()
            .args([
                "run",
                "setting1-linear",
                "--reps",
                "3",
                "--traffic",
                "1e3,5000",
                "--seed",
                "7",
            ])
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);

    let csv = fs::read_to_string(dir.path().join("a/setting1-linear.csv")).unwrap();
    assert_eq!(csv.as_bytes(), a.as_slice());
    assert!(csv.starts_with("traffic,method,mean,lo,hi\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let svg = fs::read_to_string(dir.path().join("a/setting1-linear.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("a/setting1-linear.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert!(dir
        .path()
        .join("a/setting1-linear.evaluators.json")
        .is_file());
}

#[test]
fn run_accepts_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        format!(
            "name = \"custom\"\nspace = [2, 2, 2]\ntraffic = [2000]\nrepetitions = 2\nout = {:?}\n",
            dir.path().join("out")
        ),
    )
    .unwrap();
    let out = mvtlab().arg("run").arg(&config).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/custom.csv").is_file());

    let bad = mvtlab().args(["run", "no-such-preset"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
