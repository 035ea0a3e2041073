//! Expectation-maximization learning of the prior and noise parameters
//! `q = [λ, ω, θ, φ, ψ]` around GM-GAMP, updated one parameter at a time.

pub mod uniform_fit;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channels::{clamp_lambda, GmPrior, MixtureComponent, NoiseModel, PosteriorStats, PSI_FLOOR};
use crate::error::{check_len, Error, Result};
use crate::gamp::{gamp_init, gamp_run_from, GampConfig, GampHooks, GampState};
use crate::operator::LinearOperator;
use crate::scalar::{dist_sq, norm_sq, Scalar};

/// Components whose responsibility mass `Σ_n π_n β̄_{n,k}` falls below this are
/// frozen for the iteration.
pub const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmMode {
    /// Means are learned.
    Sparse,
    /// Means pinned at zero.
    HeavyTailed,
}

impl EmMode {
    pub fn default_order(self) -> usize {
        match self {
            EmMode::Sparse => 3,
            EmMode::HeavyTailed => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig<T> {
    pub mode: EmMode,
    /// Mixture order `L`.
    pub order: usize,
    pub max_iters: usize,
    pub tol: T,
    /// Assumed SNR used to split `‖y‖²` between signal and noise at start-up.
    pub snr0: T,
    pub variance_floor: T,
    /// Learn ψ; when false the initial noise variance is kept.
    pub learn_noise: bool,
    /// Start each GAMP pass from the previous pass's `x̂`, `μˣ`, `ŝ`.
    pub warm_start: bool,
}

impl<T: Scalar> EmConfig<T> {
    pub fn new(mode: EmMode) -> Self {
        Self {
            mode,
            order: mode.default_order(),
            max_iters: 20,
            tol: T::lit(1e-5),
            snr0: T::lit(100.0),
            variance_floor: T::lit(1e-12),
            learn_noise: true,
            warm_start: true,
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

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidSpec("mixture order must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidSpec("EM needs at least one iteration".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidSpec("EM tolerance must be positive".into()));
        }
        if !(self.snr0 > T::zero()) || !(self.variance_floor > T::zero()) {
            return Err(Error::InvalidSpec(
                "EM SNR guess and variance floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn lasso_ratio(delta: f64, c: f64) -> f64 {
    let g = (1.0 + c * c) * std_normal_cdf(-c) - c * std_normal_pdf(c);
    (1.0 - 2.0 / delta * g) / (1.0 + c * c - 2.0 * g)
}

/// Noiseless LASSO phase transition `ρ_SE(δ)`: the largest `K/M` LASSO supports
/// at undersampling ratio `δ = M/N`. Inputs are clamped into `[1e-4, 1 - 1e-4]`.
pub fn rho_se(delta: f64) -> f64 {
    let delta = delta.clamp(1e-4, 1.0 - 1e-4);
    // coarse scan, then golden-section refinement around the best grid cell
    let step = 0.01;
    let (mut best_c, mut best) = (step, f64::NEG_INFINITY);
    let mut c = step;
    while c <= 10.0 + 1e-12 {
        let v = lasso_ratio(delta, c);
        if v > best {
            best = v;
            best_c = c;
        }
        c += step;
    }
    let (mut lo, mut hi) = ((best_c - step).max(1e-9), best_c + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (lasso_ratio(delta, x1), lasso_ratio(delta, x2));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = lasso_ratio(delta, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = lasso_ratio(delta, x1);
        }
    }
    best.max(f1).max(f2).clamp(0.0, 1.0)
}

/// Initial prior and noise model from the measurement energy.
pub fn em_init<T: Scalar>(y: &[T], op: &LinearOperator<T>, cfg: &EmConfig<T>) -> Result<(GmPrior<T>, NoiseModel<T>)> {
    cfg.validate()?;
    let (m, n) = (op.rows(), op.cols());
    check_len("em_init measurements", m, y.len())?;
    let energy = norm_sq(y);
    if !(energy > T::zero()) {
        return Err(Error::ZeroEnergy("measurement vector"));
    }
    let delta = m as f64 / n as f64;
    let lambda = clamp_lambda(T::lit(delta * rho_se(delta)));
    let mf = T::lit(m as f64);
    let psi = energy / ((cfg.snr0 + T::one()) * mf);
    let signal_var = (energy - mf * psi) / (op.frobenius_norm_sq() * lambda);
    let order = cfg.order;
    let components = match cfg.mode {
        EmMode::Sparse => {
            let fit = uniform_fit::uniform_fit(order);
            let twelve_phi = T::lit(12.0) * signal_var;
            (0..order)
                .map(|l| {
                    MixtureComponent::new(
                        T::lit(fit.weights[l]),
                        T::lit(fit.means[l]) * twelve_phi.sqrt(),
                        T::lit(fit.variances[l]) * twelve_phi,
                    )
                })
                .collect()
        }
        EmMode::HeavyTailed => {
            let root_l = T::lit(order as f64).sqrt();
            (1..=order)
                .map(|k| {
                    MixtureComponent::new(
                        T::one() / T::lit(order as f64),
                        T::zero(),
                        T::lit(k as f64) / root_l * signal_var,
                    )
                })
                .collect()
        }
    };
    Ok((GmPrior::new(lambda, components)?, NoiseModel::new(psi)?))
}

/// `ψ = (1/M) Σ (|y_m - ẑ_m|² + μᶻ_m)`, floored at [`PSI_FLOOR`].
pub fn em_update_psi<T: Scalar>(y: &[T], z_hat: &[T], mu_z: &[T]) -> Result<T> {
    check_len("em_update_psi z_hat", y.len(), z_hat.len())?;
    check_len("em_update_psi mu_z", y.len(), mu_z.len())?;
    if y.is_empty() {
        return Err(Error::InvalidSpec("no measurements".into()));
    }
    let total: T = y
        .iter()
        .zip(z_hat)
        .zip(mu_z)
        .map(|((&ym, &z), &v)| {
            let d = ym - z;
            d * d + v
        })
        .sum();
    Ok((total / T::lit(y.len() as f64)).max(T::lit(PSI_FLOOR)))
}

/// `λ = mean(π)`, clamped.
pub fn em_update_lambda<T: Scalar>(stats: &PosteriorStats<T>) -> T {
    let pi = stats.pi();
    if pi.is_empty() {
        return clamp_lambda(T::zero());
    }
    clamp_lambda(pi.iter().copied().sum::<T>() / T::lit(pi.len() as f64))
}

fn responsibility_mass<T: Scalar>(stats: &PosteriorStats<T>, k: usize) -> T {
    (0..stats.len()).map(|n| stats.pi()[n] * stats.beta_bar(n)[k]).sum()
}

/// `θ_k = Σ π β̄_k γ_k / Σ π β̄_k`; `None` when component `k` has no
/// responsibility mass.
pub fn em_update_theta<T: Scalar>(stats: &PosteriorStats<T>, k: usize) -> Option<T> {
    assert!(k < stats.order(), "component index out of range");
    let mass = responsibility_mass(stats, k);
    if !(mass >= T::lit(DEGENERATE_MASS)) {
        return None;
    }
    let num: T = (0..stats.len())
        .map(|n| stats.pi()[n] * stats.beta_bar(n)[k] * stats.gamma(n)[k])
        .sum();
    Some(num / mass)
}

/// `φ_k = Σ π β̄_k (|θ_k - γ_k|² + ν_k) / Σ π β̄_k` using the mean currently in
/// `prior`, floored at `floor`; `None` for a degenerate component.
pub fn em_update_phi<T: Scalar>(stats: &PosteriorStats<T>, prior: &GmPrior<T>, k: usize, floor: T) -> Option<T> {
    assert!(k < stats.order() && k < prior.order(), "component index out of range");
    let mass = responsibility_mass(stats, k);
    if !(mass >= T::lit(DEGENERATE_MASS)) {
        return None;
    }
    let theta = prior.components()[k].mean;
    let num: T = (0..stats.len())
        .map(|n| {
            let d = theta - stats.gamma(n)[k];
            stats.pi()[n] * stats.beta_bar(n)[k] * (d * d + stats.nu(n)[k])
        })
        .sum();
    Some((num / mass).max(floor))
}

/// `ω_k = Σ π β̄_k / Σ π`; `None` when every `π_n` is zero.
pub fn em_update_omega<T: Scalar>(stats: &PosteriorStats<T>) -> Option<Vec<T>> {
    let total: T = stats.pi().iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let mut omega: Vec<T> = (0..stats.order())
        .map(|k| responsibility_mass(stats, k) / total)
        .collect();
    // β̄ rows sum to one only up to rounding
    let s: T = omega.iter().copied().sum();
    for w in &mut omega {
        *w = *w / s;
    }
    Some(omega)
}

/// One EM iteration's record.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTraceRecord<T> {
    pub iteration: usize,
    /// Parameters after this iteration's updates.
    pub prior: GmPrior<T>,
    pub psi: T,
    pub gamp_iterations: usize,
    pub gamp_converged: bool,
    /// `‖x̂ⁱ - x̂ⁱ⁻¹‖² / ‖x̂ⁱ⁻¹‖²`.
    pub residual: T,
    pub frozen_components: usize,
    pub nmse_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EmOutput<T> {
    pub x_hat: Vec<T>,
    pub mu_x: Vec<T>,
    /// Posterior of the final GAMP pass.
    pub stats: PosteriorStats<T>,
    pub prior: GmPrior<T>,
    pub noise: NoiseModel<T>,
    pub trace: Vec<EmTraceRecord<T>>,
    pub converged: bool,
}

impl<T: Scalar> EmOutput<T> {
    pub fn pi(&self) -> &[T] {
        self.stats.pi()
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// EM-GM-AMP runner.
#[derive(Debug, Clone)]
pub struct EmGmAmp<'a, T: Scalar> {
    cfg: EmConfig<T>,
    gamp: GampConfig<T>,
    truth: Option<&'a [T]>,
    initial: Option<(GmPrior<T>, NoiseModel<T>)>,
}

impl<'a, T: Scalar> EmGmAmp<'a, T> {
    pub fn new(cfg: EmConfig<T>, gamp: GampConfig<T>) -> Self {
        Self {
            cfg,
            gamp,
            truth: None,
            initial: None,
        }
    }

    /// Record NMSE against `truth` in the trace.
    pub fn with_truth(mut self, truth: &'a [T]) -> Self {
        self.truth = Some(truth);
        self
    }

    /// Start from the given parameters instead of the energy-based initialization.
    pub fn with_initial(mut self, prior: GmPrior<T>, noise: NoiseModel<T>) -> Self {
        self.initial = Some((prior, noise));
        self
    }

    pub fn run(&self, op: &LinearOperator<T>, y: &[T]) -> Result<EmOutput<T>> {
        let cfg = &self.cfg;
        cfg.validate()?;
        self.gamp.validate()?;
        let (m, n) = (op.rows(), op.cols());
        check_len("em measurements", m, y.len())?;
        if let Some(truth) = self.truth {
            check_len("em truth", n, truth.len())?;
        }
        let (mut prior, mut noise) = match &self.initial {
            Some((p, w)) => (p.clone(), *w),
            None => em_init(y, op, cfg)?,
        };
        if cfg.mode == EmMode::HeavyTailed {
            prior = with_zero_means(&prior)?;
        }

        let mut x_prev = vec![T::zero(); n];
        let mut warm: Option<GampState<T>> = None;
        let mut trace = Vec::new();
        let mut last = None;
        let mut converged = false;

        for i in 1..=cfg.max_iters {
            let start = match warm.take() {
                Some(prev) if cfg.warm_start => GampState { t: 0, ..prev },
                _ => gamp_init(&prior, n, m),
            };
            let out = gamp_run_from(op, y, &prior, &noise, &self.gamp, start, GampHooks::default())?;
            let change = dist_sq(&out.state.x_hat, &x_prev);
            let energy = norm_sq(&x_prev);
            let residual = if energy > T::zero() {
                change / energy
            } else {
                T::infinity()
            };
            let nmse_db = self.truth.and_then(|t| nmse_db_generic(t, &out.state.x_hat));
            let stop = change < cfg.tol * energy;

            let mut frozen = 0;
            if !stop {
                let (next_prior, f) = self.update_prior(&out.stats, &prior)?;
                frozen = f;
                prior = next_prior;
                if cfg.learn_noise {
                    noise = NoiseModel::new(em_update_psi(y, &out.state.z_hat, &out.state.mu_z)?)?;
                }
            }
            trace.push(EmTraceRecord {
                iteration: i,
                prior: prior.clone(),
                psi: noise.psi(),
                gamp_iterations: out.state.t,
                gamp_converged: out.converged,
                residual,
                frozen_components: frozen,
                nmse_db,
            });
            x_prev.clone_from(&out.state.x_hat);
            warm = Some(out.state.clone());
            last = Some(out);
            if stop {
                converged = true;
                break;
            }
        }

        let out = last.expect("max_iters >= 1");
        Ok(EmOutput {
            x_hat: out.state.x_hat,
            mu_x: out.state.mu_x,
            stats: out.stats,
            prior,
            noise,
            trace,
            converged,
        })
    }

    fn update_prior(&self, stats: &PosteriorStats<T>, prior: &GmPrior<T>) -> Result<(GmPrior<T>, usize)> {
        let lambda = em_update_lambda(stats);
        let mut frozen = 0;
        let mut comps = prior.components().to_vec();
        for (k, comp) in comps.iter_mut().enumerate() {
            let theta = match self.cfg.mode {
                EmMode::Sparse => em_update_theta(stats, k),
                EmMode::HeavyTailed => Some(T::zero()),
            };
            let phi = em_update_phi(stats, prior, k, self.cfg.variance_floor);
            match (theta, phi) {
                (Some(t), Some(p)) => {
                    comp.mean = t;
                    comp.variance = p;
                }
                _ => frozen += 1,
            }
        }
        if let Some(omega) = em_update_omega(stats) {
            for (c, w) in comps.iter_mut().zip(omega) {
                c.weight = w;
            }
        }
        Ok((GmPrior::new(lambda, comps)?, frozen))
    }
}

fn with_zero_means<T: Scalar>(prior: &GmPrior<T>) -> Result<GmPrior<T>> {
    let comps = prior
        .components()
        .iter()
        .map(|c| MixtureComponent { mean: T::zero(), ..*c })
        .collect();
    GmPrior::new(prior.lambda(), comps)
}

pub(crate) fn nmse_db_generic<T: Scalar>(truth: &[T], estimate: &[T]) -> Option<f64> {
    let e = norm_sq(truth).to_f64_lossy();
    if e > 0.0 {
        let r = dist_sq(truth, estimate).to_f64_lossy() / e;
        Some((10.0 * r.log10()).max(-320.0))
    } else {
        None
    }
}

/// Fixed-order EM-GM-AMP with the default initialization.
pub fn em_gm_amp<T: Scalar>(
    y: &[T],
    op: &LinearOperator<T>,
    cfg: &EmConfig<T>,
    gamp_cfg: &GampConfig<T>,
) -> Result<EmOutput<T>> {
    EmGmAmp::new(*cfg, *gamp_cfg).run(op, y)
}
