use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fast_app::corpus::Corpus;
use fast_app::repro::{sha256_file, RunRecord};
use fast_core::manifest::{bound_report_from_manifest, eval_report_from_manifest, filter_model_from_manifest};
use fast_core::UrfMethod;

fn fast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fast")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fast(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = fast(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn simulated(dir: &Path) {
    ok(dir, &["simulate", "--d", "8", "--n", "600", "--prevalence", "0.2", "--seed", "1"]);
}

#[test]
fn simulate_prevalence_within_binomial_band() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--d", "32", "--n", "2000", "--prevalence", "0.1", "--seed", "7"]);
    let corpus = Corpus::load(&dir.path().join("corpus.bin")).unwrap();
    assert_eq!((corpus.len(), corpus.dim(), corpus.data_dim()), (2000, 32, 32));
    let k = corpus.labels().unwrap().iter().filter(|l| **l).count() as f64;
    let sigma = (2000.0f64 * 0.1 * 0.9).sqrt();
    assert!((k - 200.0).abs() <= 3.0 * sigma, "{k} undesired rows");
    assert!(dir.path().join("corpus.spec.json").exists());
}

#[test]
fn fit_default_marks_gives_mean_difference() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--urf", "md", "--lpf", "implicit"]);
    let model = filter_model_from_manifest(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model.direction().method(), UrfMethod::MeanDifference);
    assert_eq!(model.lpf_id(), "implicit");
    assert!(!model.direction().augmented());
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    for urf in ["md", "svm"] {
        let a = ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--urf", urf, "--seed", "4", "--out", "a.json"]);
        let b = ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--urf", urf, "--seed", "4", "--out", "b.json"]);
        assert_eq!(a, b);
        assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
    }
}

#[test]
fn run_manifest_records_flags_seed_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--seed", "6", "--alpha", "1.5"]);
    let rec = RunRecord::from_manifest(&fs::read_to_string(dir.path().join("model.run.json")).unwrap()).unwrap();
    assert_eq!(rec.command, "fit");
    assert_eq!(rec.seed, Some(6));
    let flag = |k: &str| rec.flags.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
    assert_eq!(flag("alpha"), Some("1.5"));
    assert_eq!(flag("urf"), Some("md"));
    assert_eq!(flag("svm_max_iter"), Some("100000"));
    assert_eq!(rec.inputs[0].path, "corpus.bin");
    assert_eq!(rec.inputs[0].sha256, sha256_file(&dir.path().join("corpus.bin")).unwrap());
    assert_eq!(rec.outputs[0].sha256, sha256_file(&dir.path().join("model.json")).unwrap());

    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--run-manifest", "custom.json"]);
    assert!(dir.path().join("custom.json").exists());
}

#[test]
fn replay_reproduces_and_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--urf", "svm", "--seed", "2", "--marks-out", "m.txt"]);
    ok(dir.path(), &["filter", "--model", "model.json", "--corpus", "corpus.bin"]);
    for manifest in ["corpus.run.json", "model.run.json", "kept.run.json"] {
        let out = ok(dir.path(), &["replay", "--manifest", manifest]);
        assert!(out.contains("outputs reproduced"), "{out}");
    }
    fs::write(dir.path().join("model.json"), "{}").unwrap();
    let err = fails_with(dir.path(), &["replay", "--manifest", "kept.run.json"], 3);
    assert!(err.contains("model.json"));
}

#[test]
fn filter_partitions_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--s-pos", "10", "--s-neg", "10"]);
    ok(dir.path(), &["filter", "--model", "model.json", "--corpus", "corpus.bin"]);
    let model = filter_model_from_manifest(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    let kept = Corpus::load(&dir.path().join("kept.bin")).unwrap();
    let blocked = Corpus::load(&dir.path().join("blocked.bin")).unwrap();
    assert_eq!(kept.len() + blocked.len(), 600);
    for i in 0..kept.len() {
        assert!(!model.decide(&kept.latent(i)).unwrap().is_blocked());
    }
    for i in 0..blocked.len() {
        assert!(model.decide(&blocked.latent(i)).unwrap().is_blocked());
    }
}

#[test]
fn inverted_lpf_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin", "--lpf", "inverted", "--out", "inv.json"]);
    assert!(dir.path().join("inv.inverter.json").exists());
    fails_with(dir.path(), &["filter", "--model", "inv.json", "--corpus", "corpus.bin"], 2);
    ok(dir.path(), &["filter", "--model", "inv.json", "--inverter", "inv.inverter.json", "--corpus", "corpus.bin"]);
    ok(dir.path(), &["eval", "--model", "inv.json", "--inverter", "inv.inverter.json", "--corpus", "corpus.bin"]);
}

#[test]
fn eval_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(dir.path(), &["fit", "--corpus", "corpus.bin"]);
    for _ in 0..2 {
        ok(dir.path(), &["eval", "--model", "model.json", "--corpus", "corpus.bin", "--k", "3", "--table", "sweep.csv"]);
    }
    let report = eval_report_from_manifest(&fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(report.n_eval, 600);
    assert!(report.auc > 0.5);
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn mine_fits_from_negatives() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let out = ok(dir.path(), &["mine", "--corpus", "corpus.bin", "--alpha", "2", "--count", "15", "--seed", "3"]);
    assert!(out.starts_with("mined 15 of 15"), "{out}");
    fs::write(dir.path().join("neg.txt"), "3,negative\n").unwrap();
    // A single negative has no spread to set a mining cutoff from.
    fails_with(dir.path(), &["mine", "--corpus", "corpus.bin", "--marks", "neg.txt"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let d = dir.path();
    fails_with(d, &["fit", "--corpus", "corpus.bin", "--urf", "kernel"], 2);
    fails_with(d, &["fit", "--corpus", "corpus.bin", "--marks", "m.txt", "--s-neg", "3"], 2);
    fails_with(d, &["nonsense"], 2);
    fails_with(d, &["fit", "--corpus", "missing.bin"], 3);
    fs::write(d.join("bad.bin"), b"FAST-CORPUS\nformat_version=9\n").unwrap();
    fails_with(d, &["fit", "--corpus", "bad.bin"], 3);
    fs::write(d.join("pos.txt"), "1,positive\n").unwrap();
    fails_with(d, &["fit", "--corpus", "corpus.bin", "--marks", "pos.txt"], 3);
    let err = fails_with(d, &["fit", "--corpus", "corpus.bin", "--urf", "svm", "--svm-max-iter", "1"], 4);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("did not converge"));
}

fn write_dist(dir: &Path, name: &str, mass: &[f64]) {
    let text: String = mass.iter().enumerate().map(|(i, p)| format!("o{i},{p}\n")).collect();
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn theorem_check_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_dist(d, "pxr.txt", &[0.25, 0.25, 0.25, 0.25]);
    write_dist(d, "pr.txt", &[0.3, 0.2, 0.25, 0.25]);
    write_dist(d, "pb.txt", &[0.2, 0.3, 0.25, 0.25]);
    write_dist(d, "pu.txt", &[0.31, 0.19, 0.25, 0.25]);
    let args = ["theorem-check", "--pxr", "pxr.txt", "--pr", "pr.txt", "--pb", "pb.txt", "--pu", "pu.txt"];
    let mut ok_args = args.to_vec();
    ok_args.extend(["--eps", "0.1", "--eps-prime", "2"]);
    let out = ok(d, &ok_args);
    assert!(out.contains("bound holds") && out.contains("corollary holds"), "{out}");
    let report = bound_report_from_manifest(&fs::read_to_string(d.join("bound.json")).unwrap()).unwrap();
    assert!(report.holds);
    assert_eq!(report.events_checked, 15);

    // Pu far from Pr: the premise fails before any bound is checked.
    let mut premise = args.to_vec();
    premise.extend(["--eps", "0.001"]);
    let err = fails_with(d, &premise, 3);
    assert!(err.contains("premise"), "{err}");

    write_dist(d, "bad.txt", &[0.5, 0.6]);
    let mut bad = args.to_vec();
    bad[2] = "bad.txt";
    bad.extend(["--eps", "0.1"]);
    fails_with(d, &bad, 3);
}
