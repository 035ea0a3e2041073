//! Experiment drivers: phase-transition grids, NMSE sweeps, runtime scaling and
//! the model-order-selection demo.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{rho_se, EmConfig, EmGmAmp, EmMode};
use crate::error::{Error, Result};
use crate::gamp::GampConfig;
use crate::mos::{MosConfig, MosSelector};
use crate::signals::{add_noise, gen_matrix, gen_signal, MatrixKind, MatrixSpec, SignalKind, SignalSpec, Support};

/// Reported NMSE for an exact recovery.
pub const NMSE_FLOOR_DB: f64 = -320.0;

/// `10 log10(‖x - x̂‖² / ‖x‖²)`, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            context: "nmse estimate",
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    let energy: f64 = truth.iter().map(|v| v * v).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy("reference signal"));
    }
    let err: f64 = truth.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((10.0 * (err / energy).log10()).max(NMSE_FLOOR_DB))
}

/// Mixes a base seed with grid and realization indices.
pub fn derive_seed(base: u64, grid_index: u64, realization: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ grid_index) ^ realization)
}

/// Solver settings for one experiment. Optional `mos` switches on order selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: EmMode,
    pub order: usize,
    pub max_em_iters: usize,
    pub em_tol: f64,
    pub t_max: usize,
    pub gamp_tol: f64,
    pub mos: Option<MosConfig>,
}

impl SolverConfig {
    pub fn new(mode: EmMode) -> Self {
        let em = EmConfig::<f64>::new(mode);
        let gamp = GampConfig::<f64>::default();
        Self {
            mode,
            order: em.order,
            max_em_iters: em.max_iters,
            em_tol: em.tol,
            t_max: gamp.t_max,
            gamp_tol: gamp.tol,
            mos: None,
        }
    }

    pub fn sparse() -> Self {
        Self::new(EmMode::Sparse)
    }

    pub fn heavy_tailed() -> Self {
        Self::new(EmMode::HeavyTailed)
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn em_config(&self) -> EmConfig<f64> {
        EmConfig {
            order: self.order,
            max_iters: self.max_em_iters,
            tol: self.em_tol,
            ..EmConfig::new(self.mode)
        }
    }

    pub fn gamp_config(&self) -> GampConfig<f64> {
        GampConfig {
            t_max: self.t_max,
            tol: self.gamp_tol,
            ..GampConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.em_config().validate()?;
        self.gamp_config().validate()?;
        if let Some(m) = &self.mos {
            m.validate()?;
        }
        Ok(())
    }

    /// Runs the configured solver; an all-zero `y` returns the zero estimate.
    pub fn solve(&self, op: &crate::operator::LinearOperator<f64>, y: &[f64]) -> Result<Vec<f64>> {
        if y.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; op.cols()]);
        }
        match self.mos {
            Some(mos) => Ok(MosSelector::new(self.em_config(), self.gamp_config(), mos)
                .run(op, y)?
                .fit
                .x_hat),
            None => Ok(EmGmAmp::new(self.em_config(), self.gamp_config()).run(op, y)?.x_hat),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub m: usize,
    /// Support size; ignored for dense signals.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    /// Exactly `k` nonzeros per realization.
    Exact,
    /// Every coefficient drawn from the amplitude law.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub n: usize,
    pub points: Vec<GridPoint>,
    pub realizations: usize,
    pub base_seed: u64,
    pub signal: SignalKind,
    pub support: SupportRule,
    pub matrix: MatrixKind,
    /// `None` for noiseless measurements.
    pub snr_db: Option<f64>,
    pub solver: SolverConfig,
    /// Linear NMSE below which a realization counts as a success.
    pub success_threshold: f64,
}

fn round_count(v: f64) -> usize {
    v.round().max(0.0) as usize
}

/// `count` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl ExperimentGrid {
    /// Noiseless phase-transition grid over `M/N ∈ deltas`, `K/M ∈ rhos`.
    pub fn ptc(n: usize, deltas: &[f64], rhos: &[f64], realizations: usize, signal: SignalKind) -> Self {
        let mut points = Vec::with_capacity(deltas.len() * rhos.len());
        for &d in deltas {
            let m = round_count(d * n as f64).max(1);
            for &r in rhos {
                points.push(GridPoint {
                    m,
                    k: round_count(r * m as f64),
                });
            }
        }
        Self {
            n,
            points,
            realizations,
            base_seed: 0,
            signal,
            support: SupportRule::Exact,
            matrix: MatrixKind::IidGaussian,
            snr_db: None,
            solver: SolverConfig::sparse(),
            success_threshold: 1e-6,
        }
    }

    /// Fixed support size `k`, varying `M/N`.
    pub fn sweep(n: usize, k: usize, deltas: &[f64], snr_db: f64, realizations: usize, signal: SignalKind) -> Self {
        let points = deltas
            .iter()
            .map(|&d| GridPoint {
                m: round_count(d * n as f64).max(1),
                k,
            })
            .collect();
        Self {
            n,
            points,
            realizations,
            base_seed: 0,
            signal,
            support: SupportRule::Exact,
            matrix: MatrixKind::IidGaussian,
            snr_db: Some(snr_db),
            solver: SolverConfig::sparse(),
            success_threshold: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidSpec(
                "at least one realization per grid point is required".into(),
            ));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidSpec("experiment grid has no points".into()));
        }
        for p in &self.points {
            if p.m == 0 || p.m > self.n {
                return Err(Error::InvalidSpec(format!(
                    "measurement count M = {} must lie in [1, N = {}]",
                    p.m, self.n
                )));
            }
            if self.support == SupportRule::Exact && p.k > p.m {
                return Err(Error::InvalidSpec(format!(
                    "support size K = {} exceeds measurement count M = {} (K <= M required)",
                    p.k, p.m
                )));
            }
        }
        if self.snr_db.is_some_and(|s| s.is_nan()) {
            return Err(Error::InvalidSpec("SNR is NaN".into()));
        }
        self.solver.validate()
    }

    fn signal_spec(&self, p: &GridPoint) -> SignalSpec {
        SignalSpec {
            kind: self.signal,
            n: self.n,
            support: match self.support {
                SupportRule::Exact => Support::Exact(p.k),
                SupportRule::Dense => Support::Dense,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub seed: u64,
    /// `+∞` for a failed solve.
    pub nmse_db: f64,
    pub success: bool,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub m: usize,
    pub k: usize,
    pub m_over_n: f64,
    pub k_over_m: f64,
    pub success_rate: f64,
    /// dB of the mean linear NMSE.
    pub mean_nmse_db: f64,
    pub median_nmse_db: f64,
    pub mean_runtime_s: f64,
    pub runs: Vec<RealizationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub n: usize,
    pub points: Vec<PointResult>,
}

/// CSV header of [`ResultTable::to_csv`].
pub const CSV_COLUMNS: [&str; 5] = [
    "m_over_n",
    "k_over_m",
    "success_rate",
    "median_nmse_db",
    "mean_runtime_s",
];

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultTable {
    /// Full table, one line per grid point.
    pub fn to_csv(&self) -> String {
        self.csv(true)
    }

    /// The table without the wall-clock column; identical inputs give identical bytes.
    pub fn payload_csv(&self) -> String {
        self.csv(false)
    }

    fn csv(&self, runtime: bool) -> String {
        let cols = if runtime { &CSV_COLUMNS[..] } else { &CSV_COLUMNS[..4] };
        let mut out = cols.join(",");
        out.push('\n');
        for p in &self.points {
            let mut fields = vec![
                fmt_num(p.m_over_n),
                fmt_num(p.k_over_m),
                fmt_num(p.success_rate),
                fmt_num(p.median_nmse_db),
            ];
            if runtime {
                fields.push(fmt_num(p.mean_runtime_s));
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn get(&self, m: usize, k: usize) -> Option<&PointResult> {
        self.points.iter().find(|p| p.m == m && p.k == k)
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn run_realization(grid: &ExperimentGrid, point: &GridPoint, grid_index: usize, r: usize) -> RealizationRecord {
    let seed = derive_seed(grid.base_seed, grid_index as u64, r as u64);
    let outcome = (|| -> Result<(f64, bool, f64)> {
        let x: Vec<f64> = gen_signal(&grid.signal_spec(point), derive_seed(seed, 1, 0))?;
        let op = gen_matrix::<f64>(&MatrixSpec::new(grid.matrix, point.m, grid.n), derive_seed(seed, 2, 0))?;
        let z = op.forward(&x)?;
        let y = match grid.snr_db {
            Some(s) if z.iter().any(|&v| v != 0.0) => add_noise(&z, s, derive_seed(seed, 3, 0))?.0,
            _ => z,
        };
        let start = Instant::now();
        let x_hat = grid.solver.solve(&op, &y)?;
        let runtime = start.elapsed().as_secs_f64();
        if x.iter().all(|&v| v == 0.0) {
            let exact = x_hat.iter().all(|&v| v == 0.0);
            let db = if exact { NMSE_FLOOR_DB } else { f64::INFINITY };
            return Ok((db, exact, runtime));
        }
        let db = nmse_db(&x, &x_hat)?;
        Ok((db, 10f64.powf(db / 10.0) < grid.success_threshold, runtime))
    })();
    match outcome {
        Ok((nmse_db, success, runtime_s)) => RealizationRecord {
            seed,
            nmse_db,
            success,
            runtime_s,
            error: None,
        },
        Err(e) => RealizationRecord {
            seed,
            nmse_db: f64::INFINITY,
            success: false,
            runtime_s: 0.0,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `f` on a pool with `jobs` workers, or on the global pool.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every realization of every grid point.
pub fn run_grid(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<ResultTable> {
    grid.validate()?;
    let tasks: Vec<(usize, usize)> = (0..grid.points.len())
        .flat_map(|g| (0..grid.realizations).map(move |r| (g, r)))
        .collect();
    let records: Vec<RealizationRecord> = with_jobs(jobs, || {
        tasks
            .par_iter()
            .map(|&(g, r)| run_realization(grid, &grid.points[g], g, r))
            .collect()
    })?;
    let points = grid
        .points
        .iter()
        .zip(records.chunks(grid.realizations))
        .map(|(p, runs)| {
            let succ = runs.iter().filter(|r| r.success).count();
            let dbs: Vec<f64> = runs.iter().map(|r| r.nmse_db).collect();
            let mean_lin = dbs.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / runs.len() as f64;
            PointResult {
                m: p.m,
                k: p.k,
                m_over_n: p.m as f64 / grid.n as f64,
                k_over_m: p.k as f64 / p.m as f64,
                success_rate: succ as f64 / runs.len() as f64,
                mean_nmse_db: (10.0 * mean_lin.log10()).max(NMSE_FLOOR_DB),
                median_nmse_db: median(&dbs),
                mean_runtime_s: runs.iter().map(|r| r.runtime_s).sum::<f64>() / runs.len() as f64,
                runs: runs.to_vec(),
            }
        })
        .collect();
    Ok(ResultTable { n: grid.n, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub m_over_n: f64,
    pub k_over_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtcResult {
    pub table: ResultTable,
    /// `S̄ = 1/2` crossing per `M/N` column.
    pub contour: Vec<ContourPoint>,
}

impl PtcResult {
    pub fn contour_csv(&self) -> String {
        let mut out = String::from("m_over_n,k_over_m\n");
        for c in &self.contour {
            let _ = writeln!(out, "{},{}", fmt_num(c.m_over_n), fmt_num(c.k_over_m));
        }
        out
    }

    /// `(M/N, contour K/M, LASSO K/M)` per column.
    pub fn against_lasso(&self) -> Vec<(f64, f64, f64)> {
        self.contour
            .iter()
            .map(|c| (c.m_over_n, c.k_over_m, rho_se(c.m_over_n)))
            .collect()
    }
}

/// Linear interpolation of the first downward crossing of `level` along each
/// `M/N` column. A column that never drops below `level` reports its largest
/// `K/M`; one that starts below reports 0.
pub fn extract_contour(table: &ResultTable, level: f64) -> Vec<ContourPoint> {
    let mut columns: Vec<(usize, Vec<&PointResult>)> = Vec::new();
    for p in &table.points {
        match columns.iter_mut().find(|(m, _)| *m == p.m) {
            Some((_, col)) => col.push(p),
            None => columns.push((p.m, vec![p])),
        }
    }
    columns
        .into_iter()
        .map(|(_, mut col)| {
            col.sort_by(|a, b| a.k_over_m.total_cmp(&b.k_over_m));
            let rho = match col.iter().position(|p| p.success_rate < level) {
                None => col.last().expect("non-empty").k_over_m,
                Some(0) => 0.0,
                Some(i) => {
                    let (a, b) = (col[i - 1], col[i]);
                    let t = (a.success_rate - level) / (a.success_rate - b.success_rate);
                    a.k_over_m + t * (b.k_over_m - a.k_over_m)
                }
            };
            ContourPoint {
                m_over_n: col[0].m_over_n,
                k_over_m: rho,
            }
        })
        .collect()
}

pub fn run_ptc(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<PtcResult> {
    let table = run_grid(grid, jobs)?;
    let contour = extract_contour(&table, 0.5);
    Ok(PtcResult { table, contour })
}

/// Median NMSE below which an `M/N` counts as past the breakpoint.
pub const BREAKPOINT_DB: f64 = -15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub table: ResultTable,
    /// Smallest `M/N` with median NMSE below [`BREAKPOINT_DB`].
    pub breakpoint: Option<f64>,
}

pub fn breakpoint(table: &ResultTable, threshold_db: f64) -> Option<f64> {
    table
        .points
        .iter()
        .filter(|p| p.median_nmse_db < threshold_db)
        .map(|p| p.m_over_n)
        .min_by(f64::total_cmp)
}

pub fn run_nmse_sweep(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<SweepResult> {
    let table = run_grid(grid, jobs)?;
    let breakpoint = breakpoint(&table, BREAKPOINT_DB);
    Ok(SweepResult { table, breakpoint })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub ns: Vec<usize>,
    pub m_over_n: f64,
    pub k_over_n: f64,
    pub realizations: usize,
    pub base_seed: u64,
    pub signal: SignalKind,
    pub matrix: MatrixKind,
    pub snr_db: Option<f64>,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub median_runtime_s: f64,
    pub runtimes_s: Vec<f64>,
    pub median_nmse_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub records: Vec<ScalingRecord>,
    /// Least-squares slope of `ln(runtime)` on `ln(n)`; `None` with fewer than
    /// two sizes.
    pub slope: Option<f64>,
}

impl ScalingResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,k,median_runtime_s,median_nmse_db\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                r.m,
                r.k,
                fmt_num(r.median_runtime_s),
                fmt_num(r.median_nmse_db)
            );
        }
        out
    }
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times the solver at each size. Runs are sequential so timings do not
/// compete for cores.
pub fn run_scaling(spec: &ScalingSpec) -> Result<ScalingResult> {
    if spec.ns.is_empty() || spec.realizations == 0 {
        return Err(Error::InvalidSpec(
            "scaling needs at least one size and one realization".into(),
        ));
    }
    spec.solver.validate()?;
    let mut records = Vec::with_capacity(spec.ns.len());
    for (i, &n) in spec.ns.iter().enumerate() {
        let m = round_count(spec.m_over_n * n as f64).clamp(1, n);
        let k = round_count(spec.k_over_n * n as f64).min(m);
        let grid = ExperimentGrid {
            n,
            points: vec![GridPoint { m, k }],
            realizations: spec.realizations,
            base_seed: derive_seed(spec.base_seed, i as u64, u64::MAX),
            signal: spec.signal,
            support: SupportRule::Exact,
            matrix: spec.matrix,
            snr_db: spec.snr_db,
            solver: spec.solver,
            success_threshold: 1e-6,
        };
        grid.validate()?;
        let runs: Vec<RealizationRecord> = (0..spec.realizations)
            .map(|r| run_realization(&grid, &grid.points[0], 0, r))
            .collect();
        if let Some(e) = runs.iter().find_map(|r| r.error.clone()) {
            return Err(Error::InvalidSpec(format!("scaling run at n = {n} failed: {e}")));
        }
        let runtimes: Vec<f64> = runs.iter().map(|r| r.runtime_s).collect();
        let dbs: Vec<f64> = runs.iter().map(|r| r.nmse_db).collect();
        records.push(ScalingRecord {
            n,
            m,
            k,
            median_runtime_s: median(&runtimes),
            runtimes_s: runtimes,
            median_nmse_db: median(&dbs),
        });
    }
    let xs: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.median_runtime_s).collect();
    let slope = loglog_slope(&xs, &ys);
    Ok(ScalingResult { records, slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosDemoSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub snr_db: f64,
    pub seeds: usize,
    pub base_seed: u64,
    pub signal: SignalKind,
    pub solver: SolverConfig,
    pub mos: MosConfig,
    /// Fixed order of the comparison run.
    pub reference_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosDemoRun {
    pub seed: u64,
    pub final_order: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub nmse_db: f64,
    pub reference_nmse_db: f64,
    /// NMSE of the order-`Lʲ` fit for each sweep, then of the final fit.
    pub trace_nmse_db: Vec<f64>,
    pub trace_orders: Vec<usize>,
}

impl MosDemoRun {
    pub fn trace_non_increasing(&self) -> bool {
        self.trace_nmse_db.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosDemoResult {
    pub runs: Vec<MosDemoRun>,
}

impl MosDemoResult {
    pub fn median_gap_db(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.nmse_db).collect::<Vec<_>>())
            - median(&self.runs.iter().map(|r| r.reference_nmse_db).collect::<Vec<_>>())
    }

    pub fn non_increasing_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.trace_non_increasing()).count() as f64 / self.runs.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,final_order,sweeps,nmse_db,reference_nmse_db\n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.seed,
                r.final_order,
                r.sweeps,
                fmt_num(r.nmse_db),
                fmt_num(r.reference_nmse_db)
            );
        }
        out
    }
}

pub fn run_mos_demo(spec: &MosDemoSpec, jobs: Option<usize>) -> Result<MosDemoResult> {
    if spec.k > spec.m || spec.m > spec.n || spec.seeds == 0 {
        return Err(Error::InvalidSpec(format!(
            "invalid demo sizes: need K <= M <= N and at least one seed (K = {}, M = {}, N = {})",
            spec.k, spec.m, spec.n
        )));
    }
    spec.mos.validate()?;
    spec.solver.validate()?;
    let runs: Vec<Result<MosDemoRun>> = with_jobs(jobs, || {
        (0..spec.seeds)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(spec.base_seed, 0, r as u64);
                let x: Vec<f64> = gen_signal(&SignalSpec::exact(spec.signal, spec.n, spec.k), derive_seed(seed, 1, 0))?;
                let op = gen_matrix::<f64>(
                    &MatrixSpec::new(MatrixKind::IidGaussian, spec.m, spec.n),
                    derive_seed(seed, 2, 0),
                )?;
                let (y, _) = add_noise(&op.forward(&x)?, spec.snr_db, derive_seed(seed, 3, 0))?;
                let em = spec.solver.em_config();
                let gamp = spec.solver.gamp_config();
                let out = MosSelector::new(em, gamp, spec.mos).with_truth(&x).run(&op, &y)?;
                let reference = EmGmAmp::new(
                    EmConfig {
                        order: spec.reference_order,
                        ..em
                    },
                    gamp,
                )
                .run(&op, &y)?;
                let mut trace_nmse_db: Vec<f64> = out.trace.iter().filter_map(|t| t.current_nmse_db).collect();
                let mut trace_orders: Vec<usize> = out.trace.iter().map(|t| t.current_order).collect();
                let nmse = nmse_db(&x, &out.fit.x_hat)?;
                if trace_orders.last() != Some(&out.order) {
                    trace_nmse_db.push(nmse);
                    trace_orders.push(out.order);
                }
                Ok(MosDemoRun {
                    seed,
                    final_order: out.order,
                    sweeps: out.trace.len(),
                    converged: out.converged,
                    nmse_db: nmse,
                    reference_nmse_db: nmse_db(&x, &reference.x_hat)?,
                    trace_nmse_db,
                    trace_orders,
                })
            })
            .collect()
    })?;
    Ok(MosDemoResult {
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}

/// A single recovery problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverSpec {
    pub signal: SignalKind,
    pub matrix: MatrixKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `None` for noiseless measurements.
    pub snr_db: Option<f64>,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl RecoverSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidSpec(format!(
                "measurement count M = {} must lie in [1, N = {}]",
                self.m, self.n
            )));
        }
        if self.k > self.m {
            return Err(Error::InvalidSpec(format!(
                "support size K = {} exceeds measurement count M = {} (K <= M required)",
                self.k, self.m
            )));
        }
        MatrixSpec::new(self.matrix, self.m, self.n).validate()?;
        SignalSpec::exact(self.signal, self.n, self.k).validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverOutcome {
    pub x_true: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// `None` when the true signal is zero.
    pub nmse_db: Option<f64>,
    pub psi_true: f64,
    pub runtime_s: f64,
}

/// Draws the signal, matrix and noise from `spec.seed` (streams 1, 2, 3 of
/// [`derive_seed`]) and solves.
pub fn run_recover(spec: &RecoverSpec) -> Result<RecoverOutcome> {
    spec.validate()?;
    let x: Vec<f64> = gen_signal(
        &SignalSpec::exact(spec.signal, spec.n, spec.k),
        derive_seed(spec.seed, 1, 0),
    )?;
    let op = gen_matrix::<f64>(
        &MatrixSpec::new(spec.matrix, spec.m, spec.n),
        derive_seed(spec.seed, 2, 0),
    )?;
    let z = op.forward(&x)?;
    let (y, psi_true) = match spec.snr_db {
        Some(s) if z.iter().any(|&v| v != 0.0) => add_noise(&z, s, derive_seed(spec.seed, 3, 0))?,
        _ => (z, 0.0),
    };
    let start = Instant::now();
    let x_hat = spec.solver.solve(&op, &y)?;
    let runtime_s = start.elapsed().as_secs_f64();
    let nmse = if x.iter().any(|&v| v != 0.0) {
        Some(nmse_db(&x, &x_hat)?)
    } else {
        None
    };
    Ok(RecoverOutcome {
        x_true: x,
        x_hat,
        nmse_db: nmse,
        psi_true,
        runtime_s,
    })
}

/// A named experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Preset {
    Ptc {
        grid: ExperimentGrid,
    },
    Sweep {
        grid: ExperimentGrid,
    },
    Scaling {
        spec: ScalingSpec,
    },
    MosDemo {
        spec: MosDemoSpec,
    },
    /// One grid per measurement ensemble, sharing all other settings.
    Ensembles {
        grids: Vec<(String, ExperimentGrid)>,
    },
}

pub const PRESET_NAMES: [&str; 8] = [
    "desk-bg",
    "desk-bernoulli",
    "desk-br",
    "desk-heavy",
    "desk-mos",
    "desk-scaling",
    "desk-scaling-dct",
    "desk-ensembles",
];

/// Stopping tolerance for experiments that need fully converged fits. With
/// `1e-5` the squared-change stopping rules halt near -50 dB in noiseless runs,
/// short of the `1e-6` success level, and stop mixture fits at high SNR before
/// the components have separated.
pub const STRICT_TOL: f64 = 1e-10;

/// EM iteration budget paired with [`STRICT_TOL`]. Near the phase transition
/// the noise-variance update contracts slowly and 20 iterations stop around
/// -50 dB.
pub const STRICT_MAX_EM_ITERS: usize = 100;

/// Sparse-mode solver with [`STRICT_TOL`] and [`STRICT_MAX_EM_ITERS`].
pub fn strict_solver() -> SolverConfig {
    SolverConfig {
        max_em_iters: STRICT_MAX_EM_ITERS,
        em_tol: STRICT_TOL,
        gamp_tol: STRICT_TOL,
        ..SolverConfig::sparse()
    }
}

fn desk_ptc(signal: SignalKind, full_scale: bool) -> ExperimentGrid {
    let (n, cells, r) = if full_scale { (1000, 30, 100) } else { (500, 8, 25) };
    let axis = linspace(0.05, 0.95, cells);
    ExperimentGrid {
        solver: strict_solver(),
        ..ExperimentGrid::ptc(n, &axis, &axis, r, signal)
    }
}

fn desk_scaling(matrix: MatrixKind) -> ScalingSpec {
    ScalingSpec {
        ns: vec![512, 1024, 2048, 4096],
        m_over_n: 0.5,
        k_over_n: 0.1,
        realizations: 3,
        base_seed: 0,
        signal: SignalKind::BernoulliGaussian,
        matrix,
        snr_db: Some(25.0),
        // a fixed iteration budget isolates per-iteration cost
        solver: SolverConfig {
            max_em_iters: 5,
            em_tol: 1e-300,
            gamp_tol: 1e-300,
            ..SolverConfig::sparse()
        },
    }
}

/// Looks up a named experiment. `full_scale` enlarges the phase-transition
/// grids to 30×30 with 100 realizations at N = 1000.
pub fn preset(name: &str, full_scale: bool) -> Result<Preset> {
    Ok(match name {
        "desk-bg" => Preset::Ptc {
            grid: desk_ptc(SignalKind::BernoulliGaussian, full_scale),
        },
        "desk-bernoulli" => Preset::Ptc {
            grid: desk_ptc(SignalKind::Bernoulli, full_scale),
        },
        "desk-br" => Preset::Sweep {
            grid: ExperimentGrid::sweep(
                1000,
                100,
                &[0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6],
                25.0,
                50,
                SignalKind::BernoulliRademacher,
            ),
        },
        "desk-heavy" => Preset::Sweep {
            grid: ExperimentGrid {
                support: SupportRule::Dense,
                solver: SolverConfig::heavy_tailed(),
                ..ExperimentGrid::sweep(1000, 0, &[0.5], 25.0, 50, SignalKind::StudentsT { q: 1.67 })
            },
        },
        "desk-mos" => Preset::MosDemo {
            spec: MosDemoSpec {
                n: 1000,
                m: 500,
                k: 100,
                snr_db: 20.0,
                seeds: 20,
                base_seed: 0,
                signal: SignalKind::TriangularMixture,
                solver: strict_solver(),
                mos: MosConfig {
                    initial_order: 1,
                    j_max: 5,
                    l_max: 8,
                },
                reference_order: 3,
            },
        },
        "desk-scaling" => Preset::Scaling {
            spec: desk_scaling(MatrixKind::IidGaussian),
        },
        "desk-scaling-dct" => Preset::Scaling {
            spec: desk_scaling(MatrixKind::RowSampledDct),
        },
        "desk-ensembles" => {
            let ensembles = [
                ("iid_gaussian", MatrixKind::IidGaussian),
                ("iid_uniform", MatrixKind::IidUniform),
                (
                    "iid_bernoulli_rademacher",
                    MatrixKind::IidBernoulliRademacher { lambda_a: 1.0 },
                ),
                ("row_sampled_dct", MatrixKind::RowSampledDct),
                ("iid_cauchy", MatrixKind::IidCauchy),
            ];
            let base = ExperimentGrid {
                solver: strict_solver(),
                ..ExperimentGrid::ptc(500, &[0.5], &[0.3], 50, SignalKind::BernoulliGaussian)
            };
            Preset::Ensembles {
                grids: ensembles
                    .iter()
                    .map(|&(name, matrix)| (name.to_string(), ExperimentGrid { matrix, ..base.clone() }))
                    .collect(),
            }
        }
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        let x = [3.0, 4.0];
        assert_eq!(nmse_db(&x, &x).unwrap(), NMSE_FLOOR_DB);
        assert_eq!(nmse_db(&x, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((nmse_db(&x, &[3.5, 4.0]).unwrap() + 20.0).abs() < 1e-12);
        assert!(nmse_db(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn seeds_differ_across_indices() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
    }

    fn point(m: usize, k: usize, n: usize, s: f64) -> PointResult {
        PointResult {
            m,
            k,
            m_over_n: m as f64 / n as f64,
            k_over_m: k as f64 / m as f64,
            success_rate: s,
            mean_nmse_db: 0.0,
            median_nmse_db: 0.0,
            mean_runtime_s: 0.0,
            runs: Vec::new(),
        }
    }

    #[test]
    fn contour_interpolation() {
        let table = ResultTable {
            n: 100,
            points: vec![
                point(50, 10, 100, 1.0),
                point(50, 20, 100, 0.8),
                point(50, 30, 100, 0.2),
                point(80, 10, 100, 1.0),
                point(80, 40, 100, 1.0),
                point(20, 2, 100, 0.4),
            ],
        };
        let c = extract_contour(&table, 0.5);
        assert_eq!(c.len(), 3);
        assert!((c[0].k_over_m - 0.5).abs() < 1e-12);
        assert_eq!(c[1].k_over_m, 0.5);
        assert_eq!(c[2].k_over_m, 0.0);
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            preset(name, false).unwrap();
        }
        assert!(preset("nope", false).is_err());
        match preset("desk-bg", false).unwrap() {
            Preset::Ptc { grid } => {
                assert_eq!(grid.points.len(), 64);
                grid.validate().unwrap();
            }
            _ => panic!("desk-bg is a phase-transition grid"),
        }
        match preset("desk-bg", true).unwrap() {
            Preset::Ptc { grid } => assert_eq!((grid.points.len(), grid.realizations, grid.n), (900, 100, 1000)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn csv_layout() {
        let table = ResultTable {
            n: 100,
            points: vec![point(50, 10, 100, 1.0)],
        };
        let csv = table.to_csv();
        assert!(csv.starts_with("m_over_n,k_over_m,success_rate,median_nmse_db,mean_runtime_s\n"));
        assert_eq!(csv.lines().count(), 2);
        assert!(!table.payload_csv().contains("runtime"));
    }
}
