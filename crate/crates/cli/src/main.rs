use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use emgm::em::EmMode;
use emgm::harness::{
    self, ExperimentGrid, MosDemoSpec, Preset, RecoverSpec, ResultTable, ScalingSpec, SolverConfig, PRESET_NAMES,
};
use emgm::mos::MosConfig;
use emgm::signals::{MatrixKind, SignalKind};
use emgm_cli::config::{config_path, merge_args, ConfigFile};
use emgm_cli::plot::emit_plots;

const SUBCOMMANDS: [&str; 6] = ["recover", "ptc", "sweep", "scaling", "mos-demo", "plot"];

/// Sparse recovery with EM-tuned Gaussian-mixture message passing.
#[derive(Debug, Parser)]
#[command(name = "emgm", version)]
struct Cli {
    /// Config file with `[global]` and per-subcommand sections; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for grid experiments.
    #[arg(long, global = true, env = "EMGM_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover one random signal and report its NMSE.
    Recover(RecoverArgs),
    /// Noiseless phase-transition grid.
    Ptc(GridArgs),
    /// NMSE against M/N.
    Sweep(GridArgs),
    /// Runtime against problem size.
    Scaling(ScalingArgs),
    /// Model-order selection against a fixed-order run.
    MosDemo(MosDemoArgs),
    /// Gnuplot script and data files for result CSVs.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SignalArg {
    Bg,
    Bernoulli,
    Br,
    Triangular,
    StudentT,
    LogNormal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatrixArg {
    Gaussian,
    Uniform,
    Cauchy,
    Bernoulli,
    Br,
    Dct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sparse,
    HeavyTailed,
}

impl From<ModeArg> for EmMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sparse => EmMode::Sparse,
            ModeArg::HeavyTailed => EmMode::HeavyTailed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Mixture order (default 3 sparse, 4 heavy-tailed).
    #[arg(long = "L")]
    order: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    max_em_iters: Option<usize>,
    #[arg(long)]
    em_tol: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    gamp_tol: Option<f64>,
    /// Select the order by BIC, starting from `--L`.
    #[arg(long)]
    mos: bool,
    #[arg(long, default_value_t = 5)]
    j_max: usize,
    #[arg(long, default_value_t = 8)]
    l_max: usize,
}

impl SolverArgs {
    fn apply(&self, base: SolverConfig) -> SolverConfig {
        let mut s = match self.mode {
            Some(m) if EmMode::from(m) != base.mode => SolverConfig {
                max_em_iters: base.max_em_iters,
                em_tol: base.em_tol,
                t_max: base.t_max,
                gamp_tol: base.gamp_tol,
                ..SolverConfig::new(m.into())
            },
            _ => base,
        };
        if let Some(l) = self.order {
            s.order = l;
        }
        if let Some(v) = self.max_em_iters {
            s.max_em_iters = v;
        }
        if let Some(v) = self.em_tol {
            s.em_tol = v;
        }
        if let Some(v) = self.t_max {
            s.t_max = v;
        }
        if let Some(v) = self.gamp_tol {
            s.gamp_tol = v;
        }
        if self.mos {
            s.mos = Some(MosConfig {
                initial_order: s.order,
                j_max: self.j_max,
                l_max: self.l_max,
            });
        }
        s
    }
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long, value_enum, default_value = "bg")]
    signal: SignalArg,
    /// Student's-t rate.
    #[arg(long, default_value_t = 1.67)]
    q: f64,
    /// Log-normal location.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Log-normal scale.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    matrix: MatrixArg,
    /// Nonzero fraction for Bernoulli matrices.
    #[arg(long, default_value_t = 0.15)]
    lambda_a: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// SNR in dB; `inf` or omitted for noiseless measurements.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Estimate file (index, x_true, x_hat).
    #[arg(long, default_value = "estimate.csv")]
    out: PathBuf,
    #[arg(long, default_value = "summary.json")]
    summary: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    preset: Option<String>,
    /// 30x30 grids with 100 realizations at N = 1000.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    realizations: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Drop the wall-clock column from CSV output.
    #[arg(long)]
    omit_runtime: bool,
    /// Contour CSV (ptc only).
    #[arg(long)]
    contour: Option<PathBuf>,
    /// Full result JSON with per-realization records.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    #[arg(long, default_value = "desk-scaling")]
    preset: String,
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MosDemoArgs {
    #[arg(long, default_value = "desk-mos")]
    preset: String,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Result CSVs; each sweep file becomes one curve.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "plots")]
    out_dir: PathBuf,
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn metadata(started: SystemTime, clock: Instant) -> Value {
    json!({
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_s": clock.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn json_text(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn signal_kind(a: &RecoverArgs) -> SignalKind {
    match a.signal {
        SignalArg::Bg => SignalKind::BernoulliGaussian,
        SignalArg::Bernoulli => SignalKind::Bernoulli,
        SignalArg::Br => SignalKind::BernoulliRademacher,
        SignalArg::Triangular => SignalKind::TriangularMixture,
        SignalArg::StudentT => SignalKind::StudentsT { q: a.q },
        SignalArg::LogNormal => SignalKind::LogNormal {
            mu: a.mu,
            sigma2: a.sigma2,
        },
    }
}

fn matrix_kind(a: &RecoverArgs) -> MatrixKind {
    match a.matrix {
        MatrixArg::Gaussian => MatrixKind::IidGaussian,
        MatrixArg::Uniform => MatrixKind::IidUniform,
        MatrixArg::Cauchy => MatrixKind::IidCauchy,
        MatrixArg::Bernoulli => MatrixKind::IidBernoulli { lambda_a: a.lambda_a },
        MatrixArg::Br => MatrixKind::IidBernoulliRademacher { lambda_a: a.lambda_a },
        MatrixArg::Dct => MatrixKind::RowSampledDct,
    }
}

fn recover(a: &RecoverArgs) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let spec = RecoverSpec {
        signal: signal_kind(a),
        matrix: matrix_kind(a),
        n: a.n,
        m: a.m,
        k: a.k,
        snr_db: a.snr.filter(|s| s.is_finite()),
        solver: a.solver.apply(SolverConfig::new(
            a.solver.mode.map(EmMode::from).unwrap_or(EmMode::Sparse),
        )),
        seed: a.seed,
    };
    spec.validate().context("invalid configuration")?;
    let out = harness::run_recover(&spec)?;

    let mut csv = String::from("index,x_true,x_hat\n");
    for (i, (t, h)) in out.x_true.iter().zip(&out.x_hat).enumerate() {
        let _ = writeln!(csv, "{i},{},{}", num(*t), num(*h));
    }
    write(&a.out, &csv)?;
    let mut meta = metadata(started, clock);
    meta["solver_runtime_s"] = json!(out.runtime_s);
    let summary = json!({
        "payload": {
            "spec": spec,
            "nmse_db": out.nmse_db,
            "psi_true": out.psi_true,
        },
        "metadata": meta,
    });
    write(&a.summary, &json_text(&summary)?)?;
    match out.nmse_db {
        Some(db) => println!("NMSE {db:.4} dB"),
        None => println!("NMSE undefined (zero signal)"),
    }
    Ok(())
}

fn grid_preset(name: &str, full_scale: bool, want_ptc: bool) -> Result<ExperimentGrid> {
    match harness::preset(name, full_scale)? {
        Preset::Ptc { grid } if want_ptc => Ok(grid),
        Preset::Sweep { grid } if !want_ptc => Ok(grid),
        _ => bail!(
            "preset '{name}' is not a {} experiment",
            if want_ptc { "phase-transition" } else { "sweep" }
        ),
    }
}

fn table_json(table: &ResultTable) -> Value {
    let payload: Vec<Value> = table
        .points
        .iter()
        .map(|p| {
            json!({
                "m": p.m,
                "k": p.k,
                "m_over_n": p.m_over_n,
                "k_over_m": p.k_over_m,
                "success_rate": p.success_rate,
                "mean_nmse_db": p.mean_nmse_db,
                "median_nmse_db": p.median_nmse_db,
                "runs": p.runs.iter().map(|r| json!({
                    "seed": r.seed,
                    "nmse_db": if r.nmse_db.is_finite() { json!(r.nmse_db) } else { json!(null) },
                    "success": r.success,
                    "error": r.error,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!(payload)
}

fn table_runtimes(table: &ResultTable) -> Value {
    json!(table
        .points
        .iter()
        .map(|p| p.runs.iter().map(|r| r.runtime_s).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn grid(a: &GridArgs, jobs: Option<usize>, ptc: bool) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let default = if ptc { "desk-bg" } else { "desk-br" };
    let name = a.preset.as_deref().unwrap_or(default);
    let mut g = grid_preset(name, a.full_scale, ptc)?;
    if let Some(r) = a.realizations {
        g.realizations = r;
    }
    if let Some(s) = a.seed {
        g.base_seed = s;
    }
    g.solver = a.solver.apply(g.solver);
    g.validate().context("invalid configuration")?;

    let (table, extra) = if ptc {
        let r = harness::run_ptc(&g, jobs)?;
        if let Some(path) = &a.contour {
            write(path, &r.contour_csv())?;
        }
        let contour = json!(r.contour);
        (r.table, json!({ "contour": contour }))
    } else {
        let r = harness::run_nmse_sweep(&g, jobs)?;
        (r.table, json!({ "breakpoint": r.breakpoint }))
    };

    let mut meta = metadata(started, clock);
    meta["runtimes_s"] = table_runtimes(&table);
    let doc = json!({
        "payload": { "preset": name, "grid": g, "points": table_json(&table), "summary": extra },
        "metadata": meta,
    });
    match a.format {
        Format::Csv => write(
            &a.out,
            &if a.omit_runtime {
                table.payload_csv()
            } else {
                table.to_csv()
            },
        )?,
        Format::Json => write(&a.out, &json_text(&doc)?)?,
    }
    if let Some(path) = &a.json {
        write(path, &json_text(&doc)?)?;
    }
    let cols = table
        .points
        .iter()
        .map(|p| p.m)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    println!(
        "{} grid points ({} M/N values) x {} realizations written to {}",
        table.points.len(),
        cols,
        g.realizations,
        a.out.display()
    );
    if let Some(bp) = extra.get("breakpoint") {
        println!("breakpoint M/N: {bp}");
    }
    Ok(())
}

fn scaling(a: &ScalingArgs) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let mut spec: ScalingSpec = match harness::preset(&a.preset, false)? {
        Preset::Scaling { spec } => spec,
        _ => bail!("preset '{}' is not a scaling experiment", a.preset),
    };
    if let Some(ns) = &a.ns {
        spec.ns = ns.clone();
    }
    if let Some(r) = a.realizations {
        spec.realizations = r;
    }
    if let Some(s) = a.seed {
        spec.base_seed = s;
    }
    let r = harness::run_scaling(&spec)?;
    write(&a.out, &r.to_csv())?;
    if let Some(path) = &a.json {
        let mut meta = metadata(started, clock);
        meta["records"] = json!(r.records);
        meta["slope"] = json!(r.slope);
        let doc = json!({ "payload": { "preset": a.preset, "spec": spec }, "metadata": meta });
        write(path, &json_text(&doc)?)?;
    }
    match r.slope {
        Some(s) => println!("{} sizes, log-log runtime slope {s:.3}", r.records.len()),
        None => println!("{} size, no slope", r.records.len()),
    }
    Ok(())
}

fn mos_demo(a: &MosDemoArgs, jobs: Option<usize>) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let mut spec: MosDemoSpec = match harness::preset(&a.preset, false)? {
        Preset::MosDemo { spec } => spec,
        _ => bail!("preset '{}' is not a model-order demo", a.preset),
    };
    if let Some(s) = a.seeds {
        spec.seeds = s;
    }
    if let Some(s) = a.seed {
        spec.base_seed = s;
    }
    let r = harness::run_mos_demo(&spec, jobs)?;
    write(&a.out, &r.to_csv())?;
    if let Some(path) = &a.json {
        let doc = json!({ "payload": { "spec": spec, "runs": r.runs }, "metadata": metadata(started, clock) });
        write(path, &json_text(&doc)?)?;
    }
    println!(
        "{} seeds, median NMSE gap to fixed L={}: {:.3} dB",
        r.runs.len(),
        spec.reference_order,
        r.median_gap_db()
    );
    Ok(())
}

fn run() -> Result<()> {
    let mut argv: Vec<std::ffi::OsString> = std::env::args_os().collect();
    if let Some(path) = config_path(&argv) {
        let file = ConfigFile::load(Path::new(&path))?;
        argv = merge_args(argv, &file, &SUBCOMMANDS);
    }
    let cli = Cli::parse_from(argv);
    let _ = &cli.config;
    match &cli.command {
        Command::Recover(a) => recover(a),
        Command::Ptc(a) => grid(a, cli.jobs, true),
        Command::Sweep(a) => grid(a, cli.jobs, false),
        Command::Scaling(a) => scaling(a),
        Command::MosDemo(a) => mos_demo(a, cli.jobs),
        Command::Plot(a) => {
            let files = emit_plots(&a.inputs, &a.out_dir)?;
            println!("wrote {} files to {}", files.len(), a.out_dir.display());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        if e.to_string().contains("unknown preset") {
            eprintln!("known presets: {}", PRESET_NAMES.join(", "));
        }
        std::process::exit(2);
    }
}
