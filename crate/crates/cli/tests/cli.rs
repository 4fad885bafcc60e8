use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_percolab"));
    c.env_remove("PERCOLAB_SEED").env_remove("PERCOLAB_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SUBCOMMANDS: [&str; 6] = ["sample", "dist", "mu", "gap", "experiment", "inspect"];

/// Set `UPDATE_GOLDEN=1` to rewrite the files after an intended change.
#[test]
fn help_matches_golden_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut cases = vec![("help.txt".to_string(), vec!["--help"])];
    for sc in SUBCOMMANDS {
        cases.push((format!("help_{sc}.txt"), vec![sc, "--help"]));
    }
    for (file, args) in cases {
        let o = run(&args);
        assert!(o.status.success());
        let got = stdout(&o);
        let path = dir.join(&file);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &got).unwrap();
        }
        let want =
            std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {file}; run with UPDATE_GOLDEN=1"));
        assert_eq!(got, want, "{file} drifted");
    }
}

#[test]
fn sampling_is_deterministic() {
    let d = tmp();
    let (a, b) = (d.path().join("a.perc"), d.path().join("b.perc"));
    let first = run(&["sample", "--size", "21", "--p", "0.6", "--seed", "5", "--out", s(&a)]);
    let second = bin()
        .env("PERCOLAB_SEED", "5")
        .args(["sample", "--size", "21", "--p", "0.6", "--out", s(&b)])
        .output()
        .unwrap();
    assert!(first.status.success() && second.status.success());
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let third = run(&["sample", "--size", "21", "--p", "0.6", "--seed", "6", "--out", s(&b)]);
    assert_ne!(stdout(&first), stdout(&third));
}

#[test]
fn full_lattice_distances() {
    let d = tmp();
    let cfg = d.path().join("full.perc");
    assert!(run(&["sample", "--size", "11", "--p", "1", "--out", s(&cfg)]).status.success());
    for extra in [&[][..], &["--star"], &["--renorm", "2,17"]] {
        let mut args = vec!["dist", "--config", s(&cfg), "--from", "0,0", "--to", "3,-4"];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{extra:?}");
        assert_eq!(stdout(&o).trim(), "7", "{extra:?}");
    }
    let o = run(&["inspect", s(&cfg)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["open_edges"], 220);
    assert_eq!(v["giant_size"], 121);
}

#[test]
fn exit_codes() {
    let d = tmp();
    let cfg = d.path().join("c.perc");
    assert_eq!(run(&["sample", "--size", "11", "--p", "1.5", "--out", s(&cfg)]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["inspect", s(&d.path().join("missing.perc"))]).status.code(), Some(2));
    let junk = d.path().join("junk.perc");
    std::fs::write(&junk, b"not a configuration").unwrap();
    assert_eq!(run(&["inspect", s(&junk)]).status.code(), Some(2));

    // p = 0.3 is subcritical in d = 2: no crossing cluster, so D* is a data-quality failure.
    assert!(run(&["sample", "--size", "41", "--p", "0.3", "--seed", "1", "--out", s(&cfg)]).status.success());
    let star = run(&["dist", "--config", s(&cfg), "--from", "0,0", "--to", "10,0", "--star"]);
    assert_eq!(star.status.code(), Some(3));
    assert_eq!(run(&["dist", "--config", s(&cfg), "--from", "0,0", "--to", "99,0"]).status.code(), Some(2));

    let plan = workspace().join("plans/variance.json");
    let out = d.path().join("r.json");
    let wrong = run(&["experiment", "tail", "--plan", s(&plan), "--out", s(&out)]);
    assert_eq!(wrong.status.code(), Some(2));
    assert!(!out.exists());
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "variance", "p": 0.7, "replicates": 40, "ns": [8, 4]}"#).unwrap();
    assert_eq!(run(&["experiment", "variance", "--plan", s(&bad), "--out", s(&out)]).status.code(), Some(2));
}

/// Resolves cross-file `$ref`s against the local schemas directory.
struct LocalSchemas;

impl jsonschema::Retrieve for LocalSchemas {
    fn retrieve(
        &self,
        uri: &jsonschema::Uri<String>,
    ) -> Result<serde_json::Value, Box<dyn std::error::Error + Send + Sync>> {
        let file = uri.path().as_str().rsplit('/').next().unwrap_or_default().to_string();
        Ok(serde_json::from_str(&std::fs::read_to_string(workspace().join("schemas").join(file))?)?)
    }
}

fn validator(name: &str) -> jsonschema::Validator {
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(workspace().join("schemas").join(name)).unwrap()).unwrap();
    jsonschema::options().with_retriever(LocalSchemas).build(&doc).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &serde_json::Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn experiment_report_matches_schema() {
    let d = tmp();
    let plan = workspace().join("plans/variance.json");
    let out = d.path().join("report.json");
    let csv = d.path().join("tables");
    let o = run(&["experiment", "variance", "--plan", s(&plan), "--out", s(&out), "--csv", s(&csv), "--workers", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.starts_with("plan: {"), "resolved plan is printed first");
    assert!(stdout(&o).contains("variance-exponent-below-2"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let schema = validator("report.schema.json");
    assert_valid(&schema, &report);
    let mut broken = report.clone();
    broken["plan"]["p"] = 2.0.into();
    assert!(!schema.is_valid(&broken));
    let plan_doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_valid(&validator("plan.schema.json"), &plan_doc);
    assert!(csv.join("variance.csv").exists());

    // Same seed, same payload and digests.
    let again = d.path().join("again.json");
    assert!(run(&["experiment", "variance", "--plan", s(&plan), "--out", s(&again)]).status.success());
    let second: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(report["payload"], second["payload"]);
    assert_eq!(report["digests"], second["digests"]);
}

#[test]
fn norm_and_table_files_round_trip_through_gap() {
    let d = tmp();
    let norm = d.path().join("norm.json");
    let table = d.path().join("table.json");
    let o = run(&[
        "mu",
        "--dir",
        "1,0",
        "--dir",
        "1,1",
        "--ns",
        "4,8,12,16",
        "--p",
        "1",
        "--replicates",
        "30",
        "--out",
        s(&norm),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = run(&[
        "gap",
        "--norm",
        s(&norm),
        "--radius",
        "6",
        "--p",
        "1",
        "--replicates",
        "30",
        "--threshold",
        "3",
        "--table-out",
        s(&table),
    ]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(&["gap", "--norm", s(&norm), "--table", s(&table), "--threshold", "3"]);
    assert!(second.status.success());
    assert_eq!(stdout(&first), stdout(&second));
    let report: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(report["passes"], true);
    let load = |p: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    assert_valid(&validator("norm.schema.json"), &load(&norm));
    assert_valid(&validator("htable.schema.json"), &load(&table));
}
