use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn senmo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_senmo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn err_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(1));
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &[&str] = &[
    "--set",
    "synth_n_samples=240",
    "--set",
    "synth_modalities=dna_methylation:30,protein_expression:20",
    "--set",
    "hidden_widths=16,8",
    "--set",
    "epochs=3",
    "--set",
    "folds=3",
];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = SMALL.to_vec();
    v.extend_from_slice(args);
    v
}

#[test]
fn no_arguments_is_usage_error() {
    let out = senmo(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    assert_eq!(senmo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(senmo(&["--bogus", "synth"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_structured_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = senmo(&["--out", s(dir.path()), "--set", "no_such_key=1", "synth"]);
    let e = err_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("no_such_key"));
}

#[test]
fn empty_data_dir_writes_nothing() {
    let data = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let out = senmo(&["--data", s(data.path()), "--out", s(out_dir.path()), "ingest"]);
    let e = err_json(&out);
    assert!(e["error"]["message"].as_str().unwrap().contains("no modalities"));
    assert_eq!(std::fs::read_dir(out_dir.path()).unwrap().count(), 0);
}

#[test]
fn malformed_tsv_reports_file_and_line() {
    let data = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let cohort = data.path().join("TCGA-ACC");
    std::fs::create_dir(&cohort).unwrap();
    std::fs::write(
        cohort.join("labels.tsv"),
        "sample_id\tos_days\tevent\tcancer_type\tage\tgender\trace\tstage\n\
         A\t10\t1\tTCGA-ACC\t50\tmale\tNA\tNA\n",
    )
    .unwrap();
    std::fs::write(cohort.join("protein_expression.tsv"), "sample_id\tp1\tp2\nA\t1.0\n").unwrap();
    let out = senmo(&["--data", s(data.path()), "--out", s(out_dir.path()), "ingest"]);
    let e = err_json(&out);
    assert_eq!(e["error"]["kind"], "malformed");
    let msg = e["error"]["message"].as_str().unwrap();
    assert!(msg.contains("protein_expression.tsv") && msg.contains('2'), "{msg}");
    assert!(!out_dir.path().join("design.bin").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "synth_n_samples = 100\nseed = 5\n").unwrap();
    let out_a = dir.path().join("a");
    let a = ok_json(&senmo(&["--config", s(&cfg), "--out", s(&out_a), "synth"]));
    assert_eq!(a["n_samples"], 100);
    let out_b = dir.path().join("b");
    let b = ok_json(&senmo(&[
        "--config",
        s(&cfg),
        "--out",
        s(&out_b),
        "--set",
        "synth_n_samples=120",
        "synth",
    ]));
    assert_eq!(b["n_samples"], 120);
    let spec: Value =
        serde_json::from_slice(&std::fs::read(out_b.join("synth_spec.json")).unwrap()).unwrap();
    assert_eq!(spec["seed"], 5);
}

#[test]
fn survival_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let p = |x: &str| root.path().join(x);
    ok_json(&senmo(&with_small(&["--out", s(&p("raw")), "synth"])));
    ok_json(&senmo(&with_small(&["--data", s(&p("raw")), "--out", s(&p("ds")), "ingest"])));
    let train = ok_json(&senmo(&with_small(&["--data", s(&p("ds")), "--out", s(&p("run")), "train"])));
    assert_eq!(train["folds"].as_array().unwrap().len(), 3);

    let ck = p("run").join("checkpoints");
    let ev = ok_json(&senmo(&with_small(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("ev")),
        "evaluate",
        "--checkpoint",
        s(&ck.join("fold_00.snmo")),
    ])));
    assert!(ev["c_index"].is_number());
    assert!(ev["logrank_p"].is_number() || ev["logrank_p"].is_null());
    assert!(ev.get("per_class").is_none() && ev.get("accuracy").is_none());
    assert!(!p("ev").join("confusion.csv").exists());

    let st = ok_json(&senmo(&with_small(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("st")),
        "--set",
        "eval_on=test",
        "stratify",
        "--checkpoint",
        s(&ck),
    ])));
    assert_eq!(st["n_models"], 3);
    let pairs = st["stratification"]["pairwise"].as_array().unwrap();
    let names: Vec<(String, String)> = pairs
        .iter()
        .map(|x| (x["a"].as_str().unwrap().into(), x["b"].as_str().unwrap().into()))
        .collect();
    assert_eq!(
        names,
        [("low", "intermediate"), ("low", "high"), ("intermediate", "high")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    let km = std::fs::read_to_string(p("st").join("km.csv")).unwrap();
    assert!(km.starts_with("# schema_version=1\n"));
    for g in ["low", "intermediate", "high"] {
        assert!(km.contains(&format!(",{g}\n")));
    }

    let ft = ok_json(&senmo(&with_small(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("ft")),
        "--set",
        "ft_epochs=2",
        "--set",
        "frozen_layers=1",
        "finetune",
        "--checkpoint",
        s(&ck.join("fold_01.snmo")),
    ])));
    assert_eq!(ft["diverged_folds"], 0);

    let hp = ok_json(&senmo(&with_small(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("hp")),
        "--set",
        "n_trials=2",
        "--set",
        "search_epochs=1",
        "--set",
        "search_hidden_neurons=8,16",
        "hpsearch",
    ])));
    assert_eq!(hp["n_trials"], 2);

    for f in [
        "ds/manifest.json",
        "run/train_report.json",
        "run/split.json",
        "ev/evaluate_report.json",
        "st/stratify_report.json",
        "ft/finetune_report.json",
        "hp/search_report.json",
        "run/checkpoints/fold_00.json",
    ] {
        let v: Value = serde_json::from_slice(&std::fs::read(root.path().join(f)).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1, "{f}");
    }
    let hist = std::fs::read_to_string(p("run").join("history.jsonl")).unwrap();
    assert_eq!(hist.lines().count(), 3 * 3);
}

#[test]
fn classification_report_has_every_class() {
    let root = tempfile::tempdir().unwrap();
    let p = |x: &str| root.path().join(x);
    let cls = [
        "--task",
        "classification",
        "--set",
        "synth_n_samples=330",
        "--set",
        "synth_modalities=gene_expression:40",
        "--set",
        "expression_floor=-100",
        "--set",
        "hidden_widths=32",
        "--set",
        "epochs=3",
        "--set",
        "folds=2",
    ];
    let run = |extra: &[&str]| {
        let mut v = cls.to_vec();
        v.extend_from_slice(extra);
        senmo(&v)
    };
    ok_json(&run(&["--out", s(&p("raw")), "synth"]));
    ok_json(&run(&["--data", s(&p("raw")), "--out", s(&p("ds")), "ingest"]));
    ok_json(&run(&["--data", s(&p("ds")), "--out", s(&p("run")), "train"]));
    let ens = ok_json(&run(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("ens")),
        "ensemble",
        "--checkpoint",
        s(&p("run").join("checkpoints")),
    ]));
    let rows = ens["per_class"].as_array().unwrap();
    assert_eq!(rows.len(), 33);
    assert_eq!(rows[0]["class"], "TCGA-ACC");
    assert!(ens["accuracy"].is_number() && ens.get("c_index").is_none());
    let confusion = std::fs::read_to_string(p("ens").join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 2 + 33);
    assert!(!p("ens").join("km.csv").exists());
    // Stratification is a survival-only command.
    let e = err_json(&run(&[
        "--data",
        s(&p("ds")),
        "--out",
        s(&p("st")),
        "stratify",
        "--checkpoint",
        s(&p("run").join("checkpoints")),
    ]));
    assert_eq!(e["error"]["kind"], "config");
}
