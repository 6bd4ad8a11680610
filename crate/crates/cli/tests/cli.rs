use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gig"))
        .args(args)
        .env_remove("GIG_PATHWAY_CACHE")
        .env_remove("GIG_CACHE_DIR")
        .output()
        .unwrap()
}

fn cohort() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/cohort")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SUBCOMMANDS: [&str; 7] = [
    "preprocess",
    "build-graphs",
    "export",
    "nullmodel",
    "orbits",
    "compare-orbits",
    "metrics",
];

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = gig(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = gig(&["metrics", "--scores", "x.tsv", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for sub in SUBCOMMANDS {
        let o = gig(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage: gig"), "{sub}");
    }
}

const HAND_SCORES: &str = "sample_id\ttrue_class\tscore_0\tscore_1
a\t0\t0.9\t0.1
b\t0\t0.4\t0.6
c\t1\t0.2\t0.8
d\t1\t0.3\t0.7
";

const HAND_LABELS: &str = "sample_id\tclass\na\tnormal\nb\tnormal\nc\ttumor\nd\ttumor\n";

#[test]
fn metrics_on_hand_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.tsv");
    let labels = dir.path().join("labels.tsv");
    fs::write(&scores, HAND_SCORES).unwrap();
    fs::write(&labels, HAND_LABELS).unwrap();
    let out = dir.path().join("report");
    let o = gig(&[
        "metrics",
        "--scores",
        scores.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["accuracy"], 0.75);
    assert_eq!(report["classes"], serde_json::json!(["normal", "tumor"]));
    assert_eq!(report["confusion_matrix"], serde_json::json!([[1, 1], [0, 2]]));
    assert_eq!(fs::read(out.join("metrics.json")).unwrap(), o.stdout);
    let roc = fs::read_to_string(out.join("roc.tsv")).unwrap();
    assert!(roc.starts_with("fpr\tmacro_tpr\ttpr_normal\ttpr_tumor\n"));
    assert_eq!(roc.lines().count(), 1 + 1001);
    assert!(out.join("pr.tsv").is_file());
    let log = fs::read_to_string(out.join("run_log.jsonl")).unwrap();
    let entry: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert_eq!(entry["command"], "metrics");
    assert_eq!(entry["status"], "ok");
}

#[test]
fn malformed_scores_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.tsv");
    fs::write(&scores, "sample_id\ttrue_class\tscore_0\tscore_1\na\t0\t0.5\n").unwrap();
    let o = gig(&["metrics", "--scores", scores.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error\tdata\t"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = gig(&["preprocess", "--config", "/nonexistent/gig.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error\tusage\t"));
}

#[test]
fn missing_pathway_cache_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gig(&[
        "build-graphs",
        "--config",
        cohort().join("config.toml").to_str().unwrap(),
        "--cache-dir",
        dir.path().join("no-such-cache").to_str().unwrap(),
        "--output-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error\tenvironment\t"));
}

#[test]
fn pipeline_stages_write_their_outputs_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = cohort().join("config.toml");
    for stage in ["preprocess", "build-graphs", "export"] {
        let o = gig(&[
            "--log-level",
            "warn",
            stage,
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    for f in [
        "preprocess/matrix.tsv",
        "preprocess/zscores.tsv",
        "preprocess/pcc_feature.tsv",
        "preprocess/dysregulated.tsv",
        "graphs/summary.tsv",
        "dataset/manifest.json",
        "dataset/vocab.tsv",
        "dataset/split.json",
        "dataset/class_weights.tsv",
        "dataset/exclusions.tsv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(out.join("run_log.jsonl")).unwrap();
    let entries: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().all(|e| e["status"] == "ok"));
    let sums: Vec<&serde_json::Value> = entries.iter().map(|e| &e["config_checksum"]).collect();
    assert!(sums.iter().all(|s| *s == sums[0] && s.is_string()));
    let excl = fs::read_to_string(out.join("dataset/exclusions.tsv")).unwrap();
    assert!(excl.contains("S29\tno-pathways"));
    assert!(excl.contains("S30\ttoo-small"));
}

#[test]
fn graph_tools_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = dir.path().join("graphs");
    fs::create_dir(&graphs).unwrap();
    fs::write(graphs.join("tri.tsv"), "a\tb\nb\tc\nc\ta\nc\td\n").unwrap();
    fs::write(graphs.join("path.tsv"), "a\tb\nb\tc\nc\td\nd\te\n").unwrap();
    fs::write(graphs.join("k4.tsv"), "a\tb\na\tc\na\td\nb\tc\nb\td\nc\td\n").unwrap();
    fs::write(graphs.join("star.tsv"), "h\ta\nh\tb\nh\tc\nh\td\n").unwrap();

    let tri = graphs.join("tri.tsv");
    let orbits = dir.path().join("tri_orbits.tsv");
    let o = gig(&["orbits", "--in", tri.to_str().unwrap(), "--out", orbits.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(&orbits).unwrap();
    assert!(table.starts_with("gene\to0\to1"));
    assert_eq!(table.lines().count(), 5);

    let nulls = dir.path().join("er");
    let run_null = |out: &Path| {
        gig(&[
            "nullmodel", "--kind", "er", "--seed", "3", "--in", graphs.to_str().unwrap(), "--out",
            out.to_str().unwrap(),
        ])
    };
    assert_eq!(run_null(&nulls).status.code(), Some(0));
    let again = dir.path().join("er2");
    assert_eq!(run_null(&again).status.code(), Some(0));
    for name in ["tri.tsv", "path.tsv", "k4.tsv", "star.tsv"] {
        assert_eq!(fs::read(nulls.join(name)).unwrap(), fs::read(again.join(name)).unwrap());
    }

    let sigs = dir.path().join("sigs.tsv");
    let o = gig(&["orbits", "--in", graphs.to_str().unwrap(), "--out", sigs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let groups = dir.path().join("groups.tsv");
    fs::write(&groups, "graph_id\tgroup\ntri\tdense\nk4\tdense\npath\tsparse\nstar\tsparse\n").unwrap();
    let cmp = dir.path().join("compare.json");
    let o = gig(&[
        "compare-orbits",
        "--signatures",
        sigs.to_str().unwrap(),
        "--labels",
        groups.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&cmp).unwrap()).unwrap();
    assert_eq!(report["groups"]["groups"], serde_json::json!(["dense", "sparse"]));
    assert!(report["mann_whitney"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn nullmodel_on_too_small_graph_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("one.tsv");
    fs::write(&g, "a\tb\n").unwrap();
    let o = gig(&[
        "nullmodel",
        "--kind",
        "dp",
        "--in",
        g.to_str().unwrap(),
        "--out",
        dir.path().join("o.tsv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
