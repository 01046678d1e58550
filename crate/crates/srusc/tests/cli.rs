use std::fs;
use std::path::Path;

use srusc::cli::run;
use srusc::formats::{load_cube, load_labels, save_cube, save_labels};
use srusc_core::synth::gen_three_cubes_scaled;

fn srusc(args: &[&str]) -> i32 {
    let mut argv = vec!["srusc"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small three-cubes variant saved as `dir/cube` with `dir/gt.csv`.
fn small_dataset(dir: &Path) {
    let d = gen_three_cubes_scaled(5, 6, 16, 4).unwrap();
    save_cube(&dir.join("cube"), &d.cube).unwrap();
    save_labels(&dir.join("gt.csv"), &d.labels).unwrap();
}

#[test]
fn synth_writes_cube_labels_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert_eq!(srusc(&["synth", "three-cubes", "--seed", "7", "--out", s(&out)]), 0);
    let cube = load_cube(&out.join("cube")).unwrap();
    assert_eq!((cube.rows(), cube.cols(), cube.bands()), (60, 50, 200));
    assert_eq!(load_labels(&out.join("gt.csv")).unwrap().max_label(), 3);
    let prov: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 7);
    assert_eq!(prov["swaps"].as_array().unwrap().len(), 30);

    let out2 = dir.path().join("fs");
    assert_eq!(srusc(&["synth", "four-spheres", "--seed", "7", "--out", s(&out2)]), 0);
    assert_eq!(load_cube(&out2.join("cube")).unwrap().rows(), 40);
}

#[test]
fn argument_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(srusc(&["cluster", "--bogus"]), 2);
    assert_eq!(srusc(&["nonsense"]), 2);
    assert_eq!(srusc(&["synth", "five-spheres", "--out", s(&out)]), 2);
    assert_eq!(srusc(&["synth", "three-cubes", "--swap-count", "251", "--out", s(&out)]), 2);
    small_dataset(dir.path());
    let cube = dir.path().join("cube");
    // neither a cluster count nor --estimate-k
    assert_eq!(srusc(&["cluster", "--input", s(&cube), "--radius", "3", "--out", s(&out)]), 2);
    assert_eq!(
        srusc(&["cluster", "--input", s(&cube), "--radius", "3", "--k-clusters", "0", "--out", s(&out)]),
        2
    );
    assert_eq!(
        srusc(&["cluster", "--input", s(&cube), "--radius", "3", "--k-clusters", "2", "--sigma-grid", "2,1", "--out", s(&out)]),
        2
    );
    assert_eq!(srusc(&["--help"]), 0);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = dir.path().join("o");
    assert_eq!(
        srusc(&["cluster", "--input", s(&missing), "--radius", "3", "--k-clusters", "2", "--out", s(&out)]),
        1
    );
    assert_eq!(srusc(&["eval", "--pred", s(&missing), "--gt", s(&missing)]), 1);
}

#[test]
fn cluster_eval_and_eigengap_outputs() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let cube = dir.path().join("cube");
    let r = dir.path().join("r");
    assert_eq!(
        srusc(&["cluster", "--input", s(&cube), "--radius", "5", "--k-clusters", "3", "--seed", "1", "--out", s(&r)]),
        0
    );
    let labels = load_labels(&r.join("labels.csv")).unwrap();
    assert_eq!((labels.rows(), labels.cols()), (18, 16));
    assert!(labels.labels().iter().all(|&l| (1..=3).contains(&l)));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(r.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["k_used"], 3);
    assert_eq!(report["seed"], 1);
    assert_eq!(report["sigma_grid"].as_array().unwrap().len(), 20);

    let m = dir.path().join("m");
    let gt = dir.path().join("gt.csv");
    assert_eq!(
        srusc(&["eval", "--pred", s(&r.join("labels.csv")), "--gt", s(&gt), "--out", s(&m)]),
        0
    );
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(m.join("metrics.json")).unwrap()).unwrap();
    for key in ["oa", "aa", "kappa", "alignment", "confusion"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }

    let e = dir.path().join("e");
    assert_eq!(
        srusc(&["eigengap", "--input", s(&cube), "--radius", "5", "--kmax", "6", "--out", s(&e)]),
        0
    );
    let csv = fs::read_to_string(e.join("eigencurves.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("sigma,lambda_1,"));
    assert_eq!(lines.len(), 21);
    for line in &lines[1..] {
        let values: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(values.len() >= 7);
        assert!(values[1..].windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }
    let gap: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("eigengap.json")).unwrap()).unwrap();
    assert!((1..=6).contains(&gap["k_hat"].as_u64().unwrap()));
}

#[test]
fn baselines_and_thread_flag() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let cube = dir.path().join("cube");
    for method in ["km", "pca-km", "euclidean-sc"] {
        let out = dir.path().join(method);
        assert_eq!(
            srusc(&["baseline", "--input", s(&cube), "--method", method, "--k-clusters", "3", "--out", s(&out)]),
            0
        );
        assert!(out.join("labels.csv").exists());
    }
    let (a, b) = (dir.path().join("t1"), dir.path().join("t3"));
    for (threads, out) in [("1", &a), ("3", &b)] {
        assert_eq!(
            srusc(&["--threads", threads, "cluster", "--input", s(&cube), "--radius", "5", "--k-clusters", "3", "--out", s(out)]),
            0
        );
    }
    assert_eq!(
        fs::read(a.join("labels.csv")).unwrap(),
        fs::read(b.join("labels.csv")).unwrap()
    );
}

#[test]
fn bench_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    assert_eq!(
        srusc(&["bench", "--sizes", "240,480", "--cols", "16", "--radius", "5", "--reps", "1", "--out", s(&out)]),
        0
    );
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(srusc(&["bench", "--sizes", "241", "--cols", "16", "--out", s(&out)]), 2);
}
