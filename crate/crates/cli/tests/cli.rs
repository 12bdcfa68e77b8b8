use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oae(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oae")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest_hash(dir: &Path) -> String {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["config_hash"].as_str().unwrap().to_string()
}

#[test]
fn synth_writes_the_expected_files() {
    let t = tempfile::tempdir().unwrap();
    ok(&oae(&["synth", "segment", "--n", "100", "--out", "seg"], t.path()));
    assert_eq!(fs::read_to_string(t.path().join("seg/segment.xyz")).unwrap().lines().count(), 100);
    assert_eq!(manifest_hash(&t.path().join("seg")).len(), 64);

    ok(&oae(&["synth", "blobs", "--c", "3", "--n", "600", "--d", "20", "--out", "blobs"], t.path()));
    let csv = fs::read_to_string(t.path().join("blobs/blobs.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().ends_with(",label"));
    let mut counts = [0; 3];
    for l in lines {
        counts[l.rsplit(',').next().unwrap().parse::<usize>().unwrap()] += 1;
    }
    assert_eq!(counts, [200, 200, 200]);

    ok(&oae(&["synth", "sphere", "--level", "3", "--meshed", "--out", "sph"], t.path()));
    assert_eq!(fs::read_to_string(t.path().join("sph/sphere.xyz")).unwrap().lines().count(), 642);
    let off = fs::read_to_string(t.path().join("sph/sphere.off")).unwrap();
    assert_eq!(off.lines().nth(1).unwrap().trim(), "642 1280 0");
}

#[test]
fn synth_rejects_bad_parameters() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(oae(&["synth", "segment", "--meshed", "--out", "x"], t.path()).status.code(), Some(2));
    assert_eq!(oae(&["synth", "segment", "--level", "2", "--out", "x"], t.path()).status.code(), Some(2));
    assert_eq!(oae(&["synth", "segment", "--n", "2", "--out", "x"], t.path()).status.code(), Some(2));
    assert_eq!(oae(&["synth", "cube", "--out", "x"], t.path()).status.code(), Some(2));
}

#[test]
fn invalid_config_key_is_a_line_numbered_config_error() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("bad.toml"), "preset = \"seg1d\"\n[train]\nsteps = 3\nstpes = 4\n").unwrap();
    let out = oae(&["train", "--config", "bad.toml", "--out", "run"], t.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:4:"), "{err}");
}

const SHORT: &str = "preset = \"seg1d\"\nseed = 5\n[train]\nsteps = 20\ncheckpoint_every = 10\neval_every = 5\n[eval]\nm = 64\n";

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    fs::write(p.join("run.toml"), SHORT).unwrap();
    ok(&oae(&["train", "--config", "run.toml", "--out", "full"], p));
    let full_history = fs::read_to_string(p.join("full/history.csv")).unwrap();
    assert_eq!(full_history.lines().count(), 21);

    // An interrupted run: history up to step 10 and the step-10 checkpoint.
    fs::create_dir(p.join("split")).unwrap();
    let partial: Vec<&str> = full_history.lines().take(11).collect();
    fs::write(p.join("split/history.csv"), partial.join("\n") + "\n").unwrap();
    let resume = p.join("full/checkpoints/step_000010.oae");
    ok(&oae(&["train", "--config", "run.toml", "--out", "split", "--resume", resume.to_str().unwrap()], p));

    assert_eq!(fs::read_to_string(p.join("split/history.csv")).unwrap(), full_history);
    for f in ["basis/Q.csv", "basis/mass.csv", "basis/lambdas.csv", "checkpoint.oae"] {
        assert_eq!(fs::read(p.join("full").join(f)).unwrap(), fs::read(p.join("split").join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest_hash(&p.join("full")), manifest_hash(&p.join("split")));

    // A checkpoint from another configuration is refused.
    fs::write(p.join("other.toml"), SHORT.replace("seed = 5", "seed = 6")).unwrap();
    let out = oae(&["train", "--config", "other.toml", "--out", "x", "--resume", resume.to_str().unwrap()], p);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_config_and_seed_train_identically() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    fs::write(p.join("run.toml"), SHORT.replace("steps = 20", "steps = 8")).unwrap();
    ok(&oae(&["train", "--config", "run.toml", "--out", "a"], p));
    ok(&oae(&["train", "--config", "run.toml", "--out", "b"], p));
    assert_eq!(fs::read(p.join("a/history.csv")).unwrap(), fs::read(p.join("b/history.csv")).unwrap());
    assert_eq!(fs::read(p.join("a/basis/Q.csv")).unwrap(), fs::read(p.join("b/basis/Q.csv")).unwrap());
    ok(&oae(&["train", "--config", "run.toml", "--seed", "9", "--out", "c"], p));
    assert_ne!(manifest_hash(&p.join("a")), manifest_hash(&p.join("c")));
}

#[test]
fn eval_of_a_basis_against_itself_is_perfect() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    fs::write(p.join("run.toml"), SHORT.replace("steps = 20", "steps = 30")).unwrap();
    ok(&oae(&["train", "--config", "run.toml", "--out", "run"], p));
    ok(&oae(&["eval", "--config", "run.toml", "--basis", "run/basis", "--reference", "run/basis", "--out", "self"], p));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("self/summary.json")).unwrap()).unwrap();
    assert!((summary["mean_cos_sim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(summary["discrepancy_mean"].as_f64().unwrap(), 0.0);
    let report = fs::read_to_string(p.join("self/report.csv")).unwrap();
    for line in report.lines().skip(1) {
        let cos: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((cos - 1.0).abs() < 1e-12, "{line}");
    }

    // Against the analytic segment oracle: one row per basis column.
    ok(&oae(&["eval", "--config", "run.toml", "--basis", "run/basis", "--oracle", "segment", "--out", "seg"], p));
    assert_eq!(fs::read_to_string(p.join("seg/report.csv")).unwrap().lines().count(), 6);
}

#[test]
fn eval_on_a_sphere_reports_degenerate_clusters() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    fs::write(
        p.join("run.toml"),
        "preset = \"sphere3d\"\n[data]\nlevel = 2\n[model]\nhidden = [16]\n[probes]\nm = 16\n[train]\nsteps = 3\nk = 6\n[eval]\nm = 32\nknn_k = 8\n",
    )
    .unwrap();
    ok(&oae(&["train", "--config", "run.toml", "--out", "run"], p));
    let out = oae(&["eval", "--config", "run.toml", "--basis", "run/basis", "--out", "ev"], p);
    ok(&out);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("ev/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reference"], "cotangent");
    let dims: Vec<u64> =
        summary["clusters"].as_array().unwrap().iter().map(|c| c["reference_dim"].as_u64().unwrap()).collect();
    assert_eq!(&dims[..2], &[1, 3]);
}

#[test]
fn check_is_reproducible_and_honors_bounds() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    ok(&oae(&["check", "--seed", "4", "--out", "a"], p));
    ok(&oae(&["check", "--seed", "4", "--out", "b"], p));
    let reports = |d: &str| -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join(d).join("report.json")).unwrap()).unwrap();
        v["reports"].clone()
    };
    assert_eq!(reports("a"), reports("b"));

    ok(&oae(&["check", "--n", "12", "--k", "5", "--out", "c"], p));
    let c = reports("c");
    let minmax: Vec<&serde_json::Value> = c.as_array().unwrap().iter().filter(|r| r["theorem"] == "minmax").collect();
    assert_eq!(minmax.len(), 20);
    assert!(minmax.iter().all(|r| r["n"] == 12 && r["k"] == 5));
    assert_eq!(oae(&["check", "--n", "13", "--k", "5", "--out", "d"], p).status.code(), Some(2));
}

#[test]
fn pca_embedding_recovers_a_line() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    let mut xyz = String::new();
    for i in 0..30 {
        let s = i as f64 / 29.0;
        xyz += &format!("{} {} {}\n", 1.0 + 2.0 * s, -s, 0.5 * s);
    }
    fs::write(p.join("line.xyz"), xyz).unwrap();
    ok(&oae(&["embed", "--input", "line.xyz", "--method", "pca", "--k", "1", "--out", "emb"], p));
    let csv = fs::read_to_string(p.join("emb/run_000/pca.csv")).unwrap();
    let c: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    let step = c[1] - c[0];
    assert!(step.abs() > 1e-3);
    assert!(c.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-10));
    assert!(p.join("emb/pca.svg").exists());
    assert!(!p.join("emb/aggregate.csv").exists());
}

const TINY_BLOBS: &str = "preset = \"blobs\"\n[data]\nn = 60\ndim = 5\n[model]\nhidden = [8]\n[probes]\nm = 16\nknn_k = 10\n[train]\nsteps = 3\n[eval]\nm = 16\nknn_k = 10\n[embed]\nbaseline_knn = 10\n";

#[test]
fn embed_runs_merge_deterministically_across_thread_counts() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    fs::write(p.join("run.toml"), TINY_BLOBS).unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_oae"))
            .args(["embed", "--config", "run.toml", "--runs", "3", "--method", "all", "--out", out])
            .env("OAE_THREADS", threads)
            .current_dir(p)
            .output()
            .unwrap();
        ok(&o);
    };
    run("1", "one");
    run("3", "three");
    for f in ["runs.csv", "aggregate.csv", "table.txt", "run_002/oa_eigenmaps.csv"] {
        assert_eq!(fs::read(p.join("one").join(f)).unwrap(), fs::read(p.join("three").join(f)).unwrap(), "{f}");
    }
    let table = fs::read_to_string(p.join("one/table.txt")).unwrap();
    assert!(table.starts_with("method | nmi | ari"));
    assert!(table.contains("±"));
    assert_eq!(fs::read_to_string(p.join("one/runs.csv")).unwrap().lines().count(), 1 + 3 * 3);
    assert!(fs::read_to_string(p.join("one/pca.svg")).unwrap().contains("<circle"));
}

#[test]
fn error_classes_map_to_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path();
    let missing = oae(&["embed", "--input", "nope.csv", "--method", "pca", "--out", "x"], p);
    assert_eq!(missing.status.code(), Some(4));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_oae"))
        .args(["embed", "--preset", "blobs", "--method", "pca", "--out", "x"])
        .env("OAE_THREADS", "lots")
        .current_dir(p)
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    assert_eq!(oae(&["train", "--config", "absent.toml", "--out", "x"], p).status.code(), Some(4));
    assert_eq!(oae(&["frobnicate"], p).status.code(), Some(2));
}
