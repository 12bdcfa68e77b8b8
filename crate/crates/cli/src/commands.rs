use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use oae_core::embed::{
    aggregate_table, embed_cloud, protocol_run, write_aggregate_csv, merge_runs, ClusterReport, EmbedMethod, Embedding,
    ProtocolConfig, ProtocolData, RunOutput,
};
use oae_core::geometry::{
    build_knn, fps_sample, load_pointcloud, normalize_unit_sphere, synth_manifold, write_off_mesh, write_pointcloud,
    CloudFormat, SynthKind,
};
use oae_core::oracle::{
    aligned_cosine_similarity, calibration_scale, cluster_subspace_similarity, cotan_laplacian, eigenvalue_discrepancy,
    generalized_eigens, graph_laplacian, run_theorem_suite, segment_analytic_eigens, verify_minmax_theorem,
    verify_normalized_relation, verify_pca_equivalence, EdgeWeights, Normalization, TheoremReport,
};
use oae_core::spectral::{read_basis_bundle, unnormalized_basis, write_basis_bundle};
use oae_core::train::{write_history_csv, Checkpoint, Trainer};
use oae_core::{PointCloud, Tensor, TriangleMesh};

use crate::config::{default_kind, parse_methods, parse_oracle, DataSection, DataSpec, OracleKind, Resolved, RunConfig};
use crate::error::CliError;
use crate::svg::scatter;
use crate::{CheckArgs, ConfigArgs, EmbedArgs, EvalArgs, SynthArgs, TrainArgs};

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
    preset: Option<&'a str>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

fn write_manifest(out: &Path, m: &Manifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(m).map_err(|e| CliError::io(e.to_string()))?;
    fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
}

/// The configuration file, with `--preset` and `--seed` folded in so they
/// count toward the hash.
pub fn load_config(args: &ConfigArgs) -> Result<(RunConfig, Resolved), CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.preset {
        cfg.preset = Some(p.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    let resolved = cfg.resolve()?;
    Ok((cfg, resolved))
}

/// Points for `seed`, plus the mesh of a synthetic sphere or torus. A
/// farthest-point subsample drops the mesh.
pub fn load_data(r: &Resolved, seed: u64) -> Result<(PointCloud, Option<TriangleMesh>), CliError> {
    let (mut pc, mut mesh) = match &r.data {
        DataSpec::Synthetic(kind) => {
            let meshed = matches!(kind, SynthKind::Sphere { .. } | SynthKind::Torus { .. });
            let s = synth_manifold(kind, seed, meshed)?;
            (s.cloud, s.mesh)
        }
        DataSpec::File(path) => (load_file(path)?, None),
    };
    if r.normalize {
        pc = normalize_unit_sphere(&pc)?;
    }
    if let Some(n) = r.fps {
        pc = fps_sample(&pc, n, seed)?;
        mesh = None;
    }
    Ok((pc, mesh))
}

fn load_file(path: &Path) -> Result<PointCloud, CliError> {
    let format = CloudFormat::from_path(path).unwrap_or(CloudFormat::Csv);
    Ok(load_pointcloud(path, format)?)
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let section = DataSection {
        kind: Some(a.kind.clone()),
        n: a.n,
        jitter: a.jitter,
        radius: a.radius,
        level: a.level,
        noise: a.noise,
        clusters: a.c,
        dim: a.d,
        sigma: a.sigma,
        separation: a.separation,
        ..DataSection::default()
    };
    let kind = section.apply(default_kind(&a.kind)?)?;
    let meshable = matches!(kind, SynthKind::Sphere { .. } | SynthKind::Torus { .. });
    if a.meshed && !meshable {
        return Err(CliError::config(format!("--meshed needs sphere or torus, not {}", kind.name())));
    }
    let hash = RunConfig { seed: Some(a.seed), data: section, ..RunConfig::default() }.hash();
    let s = synth_manifold(&kind, a.seed, a.meshed)?;
    create_dir(&a.out)?;
    let labeled = s.cloud.labels().is_some();
    let (ext, format) = if labeled { ("csv", CloudFormat::Csv) } else { ("xyz", CloudFormat::Xyz) };
    let cloud_path = a.out.join(format!("{}.{ext}", kind.name()));
    write_pointcloud(&s.cloud, &cloud_path, format)?;
    let mut outputs = vec![rel(&a.out, &cloud_path)];
    if let Some(mesh) = s.mesh.as_ref().filter(|_| a.meshed) {
        let off = a.out.join(format!("{}.off", kind.name()));
        write_off_mesh(mesh, &off)?;
        outputs.push(rel(&a.out, &off));
    }
    write_manifest(
        &a.out,
        &Manifest {
            command: "synth",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &hash,
            seed: a.seed,
            preset: None,
            outputs: outputs.clone(),
            warnings: vec![],
        },
    )?;
    println!(
        "{}: {} points in R^{}{} -> {}",
        kind.name(),
        s.cloud.n(),
        s.cloud.dim(),
        if labeled { " with labels" } else { "" },
        outputs.join(", ")
    );
    Ok(())
}

fn hash_bytes(hex_hash: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    hex::decode_to_slice(hex_hash, &mut out).expect("sha256 hex");
    out
}

/// Body lines of an earlier history file for steps before `step`.
fn earlier_history(path: &Path, step: usize) -> Vec<String> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| l.split(',').next().and_then(|s| s.parse::<usize>().ok()).is_some_and(|s| s < step))
        .map(str::to_string)
        .collect()
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let (cfg, r) = load_config(&a.cfg)?;
    create_dir(&a.out)?;
    let (pc, _) = load_data(&r, r.seed)?;
    let hash = hash_bytes(&r.hash);
    let history_path = a.out.join("history.csv");
    let mut warnings = Vec::new();
    let (mut trainer, earlier) = match &a.resume {
        Some(p) => {
            let ckpt = Checkpoint::load(p)?;
            if ckpt.config_hash != hash {
                return Err(CliError::config(format!(
                    "{} was written under config {}, not {}",
                    p.display(),
                    hex::encode(ckpt.config_hash),
                    r.hash
                )));
            }
            let t = Trainer::resume(pc, &r.model, r.train.clone(), &ckpt)?;
            let earlier = earlier_history(&history_path, t.step());
            if earlier.len() < t.step() {
                warnings.push(format!("history before step {} is incomplete", t.step()));
            }
            (t, earlier)
        }
        None => (Trainer::with_hash(pc, &r.model, r.train.clone(), hash)?, Vec::new()),
    };
    let started = trainer.step();
    let clock = Instant::now();
    let mut outputs = Vec::new();
    let every = r.checkpoint_every;
    while !trainer.is_done() {
        let next = if every > 0 { (trainer.step() / every + 1) * every } else { r.train.steps };
        trainer.run_until(next)?;
        if every > 0 {
            let dir = a.out.join("checkpoints");
            create_dir(&dir)?;
            let p = dir.join(format!("step_{:06}.oae", trainer.step()));
            trainer.checkpoint().save(&p)?;
            outputs.push(rel(&a.out, &p));
        }
    }
    let ckpt = a.out.join("checkpoint.oae");
    trainer.checkpoint().save(&ckpt)?;
    let basis = trainer.finalize()?;
    write_basis_bundle(&a.out.join("basis"), &basis, &r.hash)?;
    write_history_csv(trainer.history(), r.train.k, &history_path)?;
    if !earlier.is_empty() {
        let text = fs::read_to_string(&history_path)?;
        let mut lines = text.lines();
        let mut merged = lines.next().unwrap_or_default().to_string() + "\n";
        for l in earlier.iter().map(String::as_str).chain(lines) {
            merged.push_str(l);
            merged.push('\n');
        }
        fs::write(&history_path, merged)?;
    }
    fs::write(a.out.join("config.toml"), cfg.canonical())?;
    outputs.extend(["checkpoint.oae", "basis", "history.csv", "config.toml"].map(String::from));
    write_manifest(
        &a.out,
        &Manifest {
            command: "train",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &r.hash,
            seed: r.seed,
            preset: Some(r.preset.name()),
            outputs,
            warnings,
        },
    )?;
    let last = trainer.history().last().map_or(f64::NAN, |h| h.loss);
    let lambdas: Vec<String> = basis.lambdas.iter().map(|l| format!("{l:.4}")).collect();
    println!(
        "trained steps {started}..{} in {:.1} s, last loss {last:.6e}, lambda [{}]",
        trainer.step(),
        clock.elapsed().as_secs_f64(),
        lambdas.join(", ")
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterRow {
    start: usize,
    end: usize,
    reference_dim: usize,
    mean_cos: f64,
}

#[derive(Serialize)]
struct EvalSummary {
    reference: String,
    upto: usize,
    mean_cos_sim: Option<f64>,
    calibration_scale: Option<f64>,
    discrepancy_mean: Option<f64>,
    discrepancy_std: Option<f64>,
    clusters: Vec<ClusterRow>,
}

fn oracle_reference(r: &Resolved, oracle: OracleKind, n: usize, count: usize) -> Result<Option<(Vec<f64>, Tensor)>, CliError> {
    let count = count.min(n);
    let pairs = match oracle {
        OracleKind::None => return Ok(None),
        OracleKind::Segment => {
            let e = segment_analytic_eigens(n, count)?;
            (e.values, e.vectors)
        }
        OracleKind::Cotangent => {
            let (_, mesh) = load_data(r, r.seed)?;
            let mesh = mesh.ok_or_else(|| CliError::config("the cotangent oracle needs a synthetic sphere or torus"))?;
            let g = generalized_eigens(&cotan_laplacian(&mesh)?, count)?;
            (g.unnormalized.values, g.unnormalized.vectors)
        }
        OracleKind::Graph => {
            let (pc, _) = load_data(r, r.seed)?;
            let p = &r.train.eval_probes;
            let graph = build_knn(&pc, p.knn_k, p.metric, false)?;
            let g = generalized_eigens(&graph_laplacian(&graph, EdgeWeights::Binary, Normalization::None)?, count)?;
            (g.unnormalized.values, g.unnormalized.vectors)
        }
    };
    if pairs.1.rows() != n {
        return Err(CliError::config(format!("oracle has {} points, basis has {n}", pairs.1.rows())));
    }
    Ok(Some(pairs))
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let (_, r) = load_config(&a.cfg)?;
    let (basis, _) = read_basis_bundle(&a.basis)?;
    let pred = unnormalized_basis(&basis)?;
    let mut upto = r.eval.upto.unwrap_or(basis.k()).min(basis.k());
    let (name, reference) = match &a.reference {
        Some(p) => {
            let (rb, _) = read_basis_bundle(p)?;
            if rb.n() != basis.n() {
                return Err(CliError::config(format!("reference has {} points, basis has {}", rb.n(), basis.n())));
            }
            let v = unnormalized_basis(&rb)?;
            (format!("basis:{}", p.display()), Some((rb.lambdas, v)))
        }
        None => {
            let oracle = match &a.oracle {
                Some(o) => parse_oracle(o)?,
                None => r.eval.oracle,
            };
            // Extra columns so a cluster straddling `upto` is seen whole.
            let pairs = oracle_reference(&r, oracle, basis.n(), upto + 8)?;
            (format!("{oracle:?}").to_lowercase(), pairs)
        }
    };
    if let Some((_, v)) = &reference {
        upto = upto.min(v.cols());
    }
    if upto == 0 {
        return Err(CliError::config("nothing to compare: upto = 0"));
    }
    create_dir(&a.out)?;
    let mut summary = EvalSummary {
        reference: name,
        upto,
        mean_cos_sim: None,
        calibration_scale: None,
        discrepancy_mean: None,
        discrepancy_std: None,
        clusters: vec![],
    };
    let mut csv = String::from("index,cos_sim,lambda_pred,lambda_pred_calibrated,lambda_ref,rel_discrepancy\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
    match &reference {
        None => {
            for i in 0..upto {
                let _ = writeln!(csv, "{},,{:.16e},,,", i + 1, basis.lambdas[i]);
            }
        }
        Some((ref_values, ref_vectors)) => {
            let sim = aligned_cosine_similarity(&pred, ref_vectors, upto)?;
            summary.mean_cos_sim = Some(sim.mean);
            let clusters = cluster_subspace_similarity(&pred, ref_vectors, ref_values, upto, r.eval.cluster_tol)?;
            summary.clusters = clusters
                .iter()
                .map(|c| ClusterRow {
                    start: c.indices.start + 1,
                    end: c.indices.end,
                    reference_dim: c.reference_dim,
                    mean_cos: c.mean,
                })
                .collect();
            let positive = |v: &[f64]| v.get(1..upto).is_some_and(|s| !s.is_empty() && s.iter().all(|x| *x > 0.0));
            let mut calibrated = None;
            let mut disc = None;
            if positive(&basis.lambdas) && positive(ref_values) {
                let s = calibration_scale(&basis.lambdas, ref_values, 1..upto)?;
                let cal: Vec<f64> = basis.lambdas.iter().map(|l| s * l).collect();
                let d = eigenvalue_discrepancy(&cal, ref_values, 1..upto)?;
                summary.calibration_scale = Some(s);
                summary.discrepancy_mean = Some(d.mean);
                summary.discrepancy_std = Some(d.std);
                calibrated = Some(cal);
                disc = Some(d.per_index);
            }
            for i in 0..upto {
                let _ = writeln!(
                    csv,
                    "{},{:.16e},{:.16e},{},{:.16e},{}",
                    i + 1,
                    sim.per_index[i],
                    basis.lambdas[i],
                    opt(calibrated.as_ref().map(|c| c[i])),
                    ref_values[i],
                    opt(disc.as_ref().and_then(|d| (i >= 1).then(|| d[i - 1]))),
                );
            }
        }
    }
    fs::write(a.out.join("report.csv"), csv)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::io(e.to_string()))?;
    fs::write(a.out.join("summary.json"), json + "\n")?;
    let basis_hash = read_basis_bundle(&a.basis).map(|(_, m)| m.config_hash).unwrap_or_default();
    write_manifest(
        &a.out,
        &Manifest {
            command: "eval",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &r.hash,
            seed: r.seed,
            preset: Some(r.preset.name()),
            outputs: vec!["report.csv".into(), "summary.json".into()],
            warnings: if basis_hash.is_empty() { vec![] } else { vec![format!("basis trained under {basis_hash}")] },
        },
    )?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "eval vs {}: k={upto} mean |cos| {} discrepancy {} ± {}",
        summary.reference,
        fmt(summary.mean_cos_sim),
        fmt(summary.discrepancy_mean),
        fmt(summary.discrepancy_std)
    );
    for c in &summary.clusters {
        println!("  cluster {}..={} (dim {}): mean cos {:.4}", c.start, c.end, c.reference_dim, c.mean_cos);
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckReport<'a> {
    seed: u64,
    runtime_s: f64,
    passed: bool,
    reports: &'a [TheoremReport],
}

pub fn check(a: &CheckArgs) -> Result<(), CliError> {
    let clock = Instant::now();
    let reports = match (a.n, a.k) {
        (None, None) => run_theorem_suite(a.seed)?,
        (n, k) => {
            let n = n.unwrap_or(12);
            let k = k.unwrap_or((n / 2).max(1));
            let mut out = (0..20u64)
                .map(|s| verify_minmax_theorem(n, k, a.seed.wrapping_add(s)))
                .collect::<oae_core::Result<Vec<_>>>()?;
            out.push(verify_pca_equivalence(6, 2, 100_000, a.seed)?);
            out.push(verify_normalized_relation(20, a.seed)?);
            out
        }
    };
    let runtime = clock.elapsed().as_secs_f64();
    let passed = reports.iter().all(|r| r.passed);
    create_dir(&a.out)?;
    let json = serde_json::to_string_pretty(&CheckReport { seed: a.seed, runtime_s: runtime, passed, reports: &reports })
        .map_err(|e| CliError::io(e.to_string()))?;
    fs::write(a.out.join("report.json"), json + "\n")?;
    let hash = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(format!("check seed={} n={:?} k={:?}", a.seed, a.n, a.k)))
    };
    write_manifest(
        &a.out,
        &Manifest {
            command: "check",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &hash,
            seed: a.seed,
            preset: None,
            outputs: vec!["report.json".into()],
            warnings: reports.iter().flat_map(|r| r.notes.iter().cloned()).collect(),
        },
    )?;
    let mut names: Vec<&str> = reports.iter().map(|r| r.theorem.as_str()).collect();
    names.dedup();
    for name in names {
        let group: Vec<&TheoremReport> = reports.iter().filter(|r| r.theorem == name).collect();
        let ok = group.iter().filter(|r| r.passed).count();
        println!("{name}: {ok}/{} passed", group.len());
    }
    println!("check: {} in {runtime:.2} s", if passed { "PASS" } else { "FAIL" });
    if passed {
        Ok(())
    } else {
        let failed: Vec<String> = reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{} (n={}, k={}, seed={})", r.theorem, r.n, r.k, r.seed))
            .collect();
        Err(CliError::numeric(format!("theorem checks failed: {}", failed.join("; "))))
    }
}

/// Worker count from `OAE_THREADS`; unset means one per core.
pub fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var("OAE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!("OAE_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

fn embed_run(r: &Resolved, proto: &ProtocolConfig, run: usize) -> Result<RunOutput, CliError> {
    let seed = proto.run_seed(run);
    // Synthetic data is redrawn per run, through the same normalization
    // and subsampling as training.
    let pc = match &proto.data {
        ProtocolData::Fixed(pc) => pc.clone(),
        ProtocolData::Synthetic(_) => load_data(r, seed)?.0,
    };
    if pc.labels().is_some() {
        let cfg = ProtocolConfig { data: ProtocolData::Fixed(pc), ..proto.clone() };
        return Ok(protocol_run(&cfg, run)?);
    }
    let embeddings =
        proto.methods.iter().map(|&m| embed_cloud(&pc, proto, m, seed)).collect::<oae_core::Result<Vec<_>>>()?;
    Ok(RunOutput { run, seed, truth: vec![], embeddings, reports: vec![] })
}

fn write_embedding(e: &Embedding, dir: &Path) -> Result<PathBuf, CliError> {
    let p = dir.join(format!("{}.csv", e.method.name()));
    e.write_csv(&p)?;
    Ok(p)
}

pub fn embed(a: &EmbedArgs) -> Result<(), CliError> {
    let (_, mut r) = load_config(&a.cfg)?;
    let methods = match &a.method {
        Some(m) => parse_methods(m)?,
        None => r.embed.methods.clone(),
    };
    let k = a.k.unwrap_or(r.embed.k);
    let runs = a.runs.unwrap_or(r.embed.runs);
    if runs == 0 {
        return Err(CliError::config("--runs must be at least 1"));
    }
    if let Some(p) = &a.input {
        r.data = DataSpec::File(p.clone());
    }
    let data = match &r.data {
        DataSpec::Synthetic(kind) => ProtocolData::Synthetic(kind.clone()),
        DataSpec::File(_) => ProtocolData::Fixed(load_data(&r, r.seed)?.0),
    };
    let proto = ProtocolConfig {
        data,
        methods,
        runs,
        k,
        clusters: r.embed.clusters,
        restarts: r.embed.restarts,
        model: r.model.clone(),
        train: r.train.clone(),
        baseline_knn: r.embed.baseline_knn,
        baseline_metric: r.embed.baseline_metric,
        seed: r.seed,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count()? {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::config(e.to_string()))?;
    let clock = Instant::now();
    let outputs: Vec<RunOutput> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run| embed_run(&r, &proto, run))
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    create_dir(&a.out)?;
    let mut files = Vec::new();
    let mut runs_csv = String::from("run,seed,method");
    for m in ClusterReport::METRICS {
        runs_csv.push(',');
        runs_csv.push_str(m);
    }
    runs_csv.push('\n');
    for o in &outputs {
        let dir = a.out.join(format!("run_{:03}", o.run));
        create_dir(&dir)?;
        for e in &o.embeddings {
            files.push(rel(&a.out, &write_embedding(e, &dir)?));
        }
        for (e, rep) in o.embeddings.iter().zip(&o.reports) {
            let _ = write!(runs_csv, "{},{},{}", o.run, o.seed, e.method.name());
            for v in rep.values() {
                let _ = write!(runs_csv, ",{v:.16e}");
            }
            runs_csv.push('\n');
        }
    }
    let first = &outputs[0];
    for e in &first.embeddings {
        let labels = (!first.truth.is_empty()).then_some(first.truth.as_slice());
        let title = format!("{} (run 0, k = {})", e.method.name(), e.k());
        let p = a.out.join(format!("{}.svg", e.method.name()));
        fs::write(&p, scatter(&e.coords, labels, &title))?;
        files.push(rel(&a.out, &p));
    }
    let scored = outputs.iter().all(|o| !o.reports.is_empty());
    let merged = merge_runs(&proto, outputs);
    let mut warnings = merged.warnings.clone();
    warnings.push("clusters come from k-means on each method's embedding".into());
    if scored {
        fs::write(a.out.join("runs.csv"), runs_csv)?;
        write_aggregate_csv(&merged, &a.out.join("aggregate.csv"))?;
        let table = aggregate_table(&merged);
        fs::write(a.out.join("table.txt"), format!("{table}\n{runs} runs; k-means on each embedding\n"))?;
        files.extend(["runs.csv", "aggregate.csv", "table.txt"].map(String::from));
        print!("{table}");
    } else {
        warnings.push("input has no labels; embeddings written without scores".into());
    }
    write_manifest(
        &a.out,
        &Manifest {
            command: "embed",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &r.hash,
            seed: r.seed,
            preset: Some(r.preset.name()),
            outputs: files,
            warnings,
        },
    )?;
    let names: Vec<&str> = proto.methods.iter().map(|m: &EmbedMethod| m.name()).collect();
    println!("embed: {runs} run(s) of {} in {:.1} s", names.join(", "), clock.elapsed().as_secs_f64());
    Ok(())
}
