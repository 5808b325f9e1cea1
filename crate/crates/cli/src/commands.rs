use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use lvsk::dist::run_distributed;
use lvsk::harness::{figure, run_bench, BenchScenario, FigureConfig};
use lvsk::leverage::{
    leverage_exact, leverage_exact_truncated, leverage_oracle, leverage_sketched,
    leverage_sketched_trunc, load_scores, save_scores, LeverageResult,
};
use lvsk::matrix::{gen_synthetic, load_matrix, save_matrix, CsvOptions, FileFormat, SyntheticSpec, GENERATOR};
use lvsk::order::{emit_batches, make_plan, scores_to_distribution, OrderingPolicy};
use lvsk::sketch::{SketchFamily, SketchSpec};

use crate::args::{BenchArgs, Cli, Command, FamilyArg, FigureArgs, GenArgs, LeverageArgs, MethodArg, OrderArgs};

#[derive(Debug)]
pub enum Failure {
    /// Bad flag values or combinations: exit 2.
    Usage(String),
    /// Anything that went wrong while running: exit 1.
    Runtime(String),
}

impl From<lvsk::Error> for Failure {
    fn from(e: lvsk::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// `<path>.json`
pub fn sidecar(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn write_json(path: &Path, value: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))
}

/// Metadata common to every command. Fields whose names end in `seconds`
/// are timings; everything else is fixed by the flags.
fn metadata(cli: &Cli, wall: f64, result: Value) -> Value {
    json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": lvsk::VERSION,
        "generator": GENERATOR,
        "seed": cli.seed,
        "flags": cli,
        "wall_seconds": wall,
        "result": result,
    })
}

pub fn run(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let (out, result) = match &cli.command {
        Command::Gen(a) => gen(cli, a)?,
        Command::Leverage(a) => leverage(cli, a)?,
        Command::Order(a) => order(cli, a)?,
        Command::Bench(a) => bench(cli, a)?,
        Command::Figure(a) => fig(cli, a)?,
    };
    write_json(&out, &metadata(cli, start.elapsed().as_secs_f64(), result))
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<(PathBuf, Value), Failure> {
    let spec = SyntheticSpec {
        n: a.n,
        d: a.d,
        rank: a.rank.unwrap_or(a.d),
        noise_sigma: a.noise,
        seed: cli.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let format = a.format.map(FileFormat::from).unwrap_or_else(|| FileFormat::from_path(&a.out));
    let m = gen_synthetic(&spec)?;
    save_matrix(&m, &a.out, format)?;
    Ok((sidecar(&a.out), json!({ "spec": spec, "format": format })))
}

fn leverage(cli: &Cli, a: &LeverageArgs) -> Result<(PathBuf, Value), Failure> {
    match (a.method, a.sv_tol) {
        (MethodArg::Sketch | MethodArg::Oracle, Some(_)) => {
            return Err(usage("--sv-tol applies only to --method sketch-trunc or exact"))
        }
        (MethodArg::SketchTrunc, None) => return Err(usage("--method sketch-trunc needs --sv-tol")),
        _ => {}
    }
    if let Some(t) = a.sv_tol {
        if !(0.0..1.0).contains(&t) {
            return Err(usage(format!("--sv-tol {t} must lie in [0, 1)")));
        }
    }
    if let Some(w) = a.workers {
        if a.method != MethodArg::SketchTrunc {
            return Err(usage("--workers needs --method sketch-trunc"));
        }
        if a.sketch == FamilyArg::Srht {
            return Err(usage("--workers supports countsketch and osnap only"));
        }
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
    }
    let format = a.format.map(FileFormat::from).unwrap_or_else(|| FileFormat::from_path(&a.input));
    let m = load_matrix(&a.input, format, CsvOptions { header: a.header })?;

    let mut spec = SketchSpec::new(SketchFamily::from(a.sketch), a.sketch_args.eps, m.cols(), cli.seed)
        .with_sizing_constant(a.sketch_args.sizing_constant);
    if let Some(s) = a.osnap_s {
        spec = spec.with_sparsity(s);
    }
    if let Some(k) = a.rows {
        spec = spec.with_rows(k);
    }
    if matches!(a.method, MethodArg::Sketch | MethodArg::SketchTrunc) {
        spec.validate().map_err(|e| usage(e.to_string()))?;
    }

    let start = Instant::now();
    let mut distributed = Value::Null;
    let res: LeverageResult = match (a.method, a.sv_tol, a.workers) {
        (MethodArg::Exact, None, _) => leverage_exact(&m)?,
        (MethodArg::Exact, Some(t), _) => leverage_exact_truncated(&m, t)?,
        (MethodArg::Oracle, ..) => leverage_oracle(&m)?,
        (MethodArg::Sketch, ..) => leverage_sketched(&m, &spec)?,
        (MethodArg::SketchTrunc, Some(t), None) => leverage_sketched_trunc(&m, &spec, t)?,
        (MethodArg::SketchTrunc, Some(t), Some(w)) => {
            let (res, report) = run_distributed(&m, &spec, w, t)?;
            distributed = report.summary_json();
            res
        }
        (MethodArg::SketchTrunc, None, _) => unreachable!("checked above"),
    };
    let compute = start.elapsed().as_secs_f64();
    save_scores(&res.scores, &a.out)?;
    Ok((
        sidecar(&a.out),
        json!({
            "n": m.rows(),
            "d": m.cols(),
            "method": res.method,
            "eps": res.eps,
            "sv_tol": res.sv_tol,
            "effective_rank": res.effective_rank,
            "score_sum": res.sum(),
            "sketch": res.spec.as_ref().map(|s| json!({ "spec": s, "k": s.rows(), "s": s.sparsity() })),
            "distributed": distributed,
            "compute_seconds": compute,
        }),
    ))
}

fn order(cli: &Cli, a: &OrderArgs) -> Result<(PathBuf, Value), Failure> {
    if a.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    if a.batch == Some(0) {
        return Err(usage("--batch must be at least 1"));
    }
    let scores = load_scores(&a.scores)?;
    let p = scores_to_distribution(&scores)?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let policy = OrderingPolicy {
        kind: a.policy.into(),
        seed: cli.seed,
    };
    let mut files = Vec::new();
    let mut batches = Value::Null;
    for epoch in 0..a.epochs {
        let plan = make_plan(&p, &policy, epoch)?;
        if let Some(b) = a.batch {
            batches = json!(emit_batches(&plan, b)?.len());
        }
        let name = format!("epoch_{epoch:04}.txt");
        let path = a.out_dir.join(&name);
        let mut w = create(&path)?;
        for i in &plan.indices {
            writeln!(w, "{i}").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        files.push(name);
    }
    Ok((
        a.out_dir.join("manifest.json"),
        json!({
            "n": p.len(),
            "policy": policy.kind,
            "epochs": a.epochs,
            "batch_size": a.batch,
            "batches_per_epoch": batches,
            "permutation": policy.kind.is_permutation(),
            "files": files,
        }),
    ))
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<(PathBuf, Value), Failure> {
    let mut scenario = if a.n.is_empty() {
        BenchScenario::preset(&a.scenario, cli.seed).map_err(|e| usage(e.to_string()))?
    } else {
        let d = a.d.ok_or_else(|| usage("--n needs --d"))?;
        let mut s = BenchScenario::preset("smoke", cli.seed).map_err(|e| usage(e.to_string()))?;
        s.name = "custom".into();
        s.cells = a.n.iter().map(|&n| SyntheticSpec::full_rank(n, d, cli.seed)).collect();
        s
    };
    if !a.methods.is_empty() {
        scenario.methods = a.methods.iter().map(|&m| m.into()).collect();
    }
    if !a.eps.is_empty() {
        scenario.eps = a.eps.clone();
    }
    if let Some(r) = a.repeats {
        scenario.repeats = r;
    }
    if let Some(c) = a.sizing_constant {
        scenario.sizing_constant = c;
    }
    scenario.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_bench(&scenario)?;

    let mut w = create(&a.out)?;
    report.write_records_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&a.out))?;
    let summary_path = summary_path(&a.out);
    let mut w = create(&summary_path)?;
    report.write_summary_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&summary_path))?;
    Ok((
        sidecar(&a.out),
        json!({
            "scenario": report.scenario,
            "summary_csv": summary_path,
            "summary": report.summary,
        }),
    ))
}

/// `runs.csv` -> `runs_summary.csv`
fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_summary.{ext}"))
}

fn fig(cli: &Cli, a: &FigureArgs) -> Result<(PathBuf, Value), Failure> {
    let cfg = FigureConfig {
        n: a.n,
        d: a.d,
        eps: a.sketch_args.eps,
        seed: cli.seed,
        sv_tols: a.sv_tol.clone(),
        noisy: (a.noisy_n, a.noisy_d, a.noisy_rank, a.noise),
        sizing_constant: a.sketch_args.sizing_constant,
    };
    if cfg.sv_tols.iter().any(|t| !(0.0..1.0).contains(t)) {
        return Err(usage("--sv-tol values must lie in [0, 1)"));
    }
    let data = figure(a.kind.into(), &cfg)?;
    let mut w = create(&a.out)?;
    data.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&a.out))?;
    let stats: Vec<Value> = data
        .stats()
        .into_iter()
        .map(|(name, s)| json!({ "series": name, "stats": s }))
        .collect();
    Ok((sidecar(&a.out), json!({ "kind": a.kind, "config": cfg, "series": stats })))
}
