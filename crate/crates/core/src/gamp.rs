//! Generalized approximate message passing with a Gaussian-mixture input
//! channel and an AWGN output channel.

use serde::{Deserialize, Serialize};

use crate::channels::{input_moments, input_posterior, output_moments, GmPrior, NoiseModel, PosteriorStats};
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::scalar::{dist_sq, norm_sq, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GampConfig<T> {
    /// Maximum number of iterations.
    pub t_max: usize,
    /// Normalized stopping tolerance on successive estimates.
    pub tol: T,
    /// Lower bound applied to `μᵖ`, `μˢ` and the `μʳ` denominator.
    pub variance_floor: T,
    /// Weight on the new `x̂`/`ŝ` iterate; 1 disables damping.
    pub damping: T,
}

impl<T: Scalar> Default for GampConfig<T> {
    fn default() -> Self {
        Self {
            t_max: 20,
            tol: T::lit(1e-5),
            variance_floor: T::lit(1e-12),
            damping: T::one(),
        }
    }
}

impl<T: Scalar> GampConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::InvalidSpec("GAMP t_max must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidSpec("GAMP tolerance must be positive".into()));
        }
        if !(self.variance_floor > T::zero()) {
            return Err(Error::InvalidSpec("GAMP variance floor must be positive".into()));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidSpec("GAMP damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// All per-iteration GAMP vectors. `x_hat`/`mu_x` hold the latest estimate,
/// the remaining fields the quantities of the last completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState<T> {
    pub x_hat: Vec<T>,
    pub mu_x: Vec<T>,
    pub s_hat: Vec<T>,
    pub mu_s: Vec<T>,
    pub p_hat: Vec<T>,
    pub mu_p: Vec<T>,
    pub z_hat: Vec<T>,
    pub mu_z: Vec<T>,
    pub r_hat: Vec<T>,
    pub mu_r: Vec<T>,
    /// Completed iterations.
    pub t: usize,
}

/// Starting state: `x̂`, `μˣ` at the prior moments and `ŝ = 0`.
pub fn gamp_init<T: Scalar>(prior: &GmPrior<T>, n: usize, m: usize) -> GampState<T> {
    GampState {
        x_hat: vec![prior.mean(); n],
        mu_x: vec![prior.variance(); n],
        s_hat: vec![T::zero(); m],
        mu_s: vec![T::zero(); m],
        p_hat: vec![T::zero(); m],
        mu_p: vec![T::zero(); m],
        z_hat: vec![T::zero(); m],
        mu_z: vec![T::zero(); m],
        r_hat: vec![T::zero(); n],
        mu_r: vec![T::zero(); n],
        t: 0,
    }
}

/// Per-iteration progress report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampProgress<T> {
    pub t: usize,
    /// `‖x̂(t+1) - x̂(t)‖² / ‖x̂(t)‖²`.
    pub residual: T,
    /// NMSE against the true signal in dB, when one was supplied.
    pub nmse_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GampOutput<T> {
    pub state: GampState<T>,
    /// Input-channel posterior of the final iteration.
    pub stats: PosteriorStats<T>,
    pub converged: bool,
}

/// Per-iteration callback.
pub type IterationCallback<'a, T> = &'a mut dyn FnMut(&GampProgress<T>);

/// Optional observers for a run.
#[derive(Default)]
pub struct GampHooks<'a, T> {
    pub truth: Option<&'a [T]>,
    pub on_iteration: Option<IterationCallback<'a, T>>,
}

/// Runs GAMP from the prior-moment initialization.
pub fn gamp_run<T: Scalar>(
    op: &LinearOperator<T>,
    y: &[T],
    prior: &GmPrior<T>,
    noise: &NoiseModel<T>,
    cfg: &GampConfig<T>,
) -> Result<GampOutput<T>> {
    let start = gamp_init(prior, op.cols(), op.rows());
    gamp_run_from(op, y, prior, noise, cfg, start, GampHooks::default())
}

/// Runs GAMP from an explicit starting state (warm start).
pub fn gamp_run_from<T: Scalar>(
    op: &LinearOperator<T>,
    y: &[T],
    prior: &GmPrior<T>,
    noise: &NoiseModel<T>,
    cfg: &GampConfig<T>,
    start: GampState<T>,
    mut hooks: GampHooks<'_, T>,
) -> Result<GampOutput<T>> {
    cfg.validate()?;
    let (m, n) = (op.rows(), op.cols());
    check_len("gamp measurements", m, y.len())?;
    check_len("gamp start x_hat", n, start.x_hat.len())?;
    check_len("gamp start mu_x", n, start.mu_x.len())?;
    check_len("gamp start s_hat", m, start.s_hat.len())?;
    if let Some(truth) = hooks.truth {
        check_len("gamp truth", n, truth.len())?;
    }
    let floor = cfg.variance_floor;
    let damp = cfg.damping;
    let truth_energy = hooks.truth.map(norm_sq);

    let mut state = start;
    let t0 = state.t;
    let mut last_stats = None;
    let mut converged = false;

    for step in 1..=cfg.t_max {
        let t = t0 + step;
        // (R1)-(R2)
        let (ax, mu_p) = op.forward_pair(&state.x_hat, &state.mu_x)?;
        let mut mu_p: Vec<T> = mu_p.into_iter().map(|v| v.max(floor)).collect();
        if damp < T::one() && state.t > 0 {
            for (v, &old) in mu_p.iter_mut().zip(&state.mu_p) {
                *v = damp * *v + (T::one() - damp) * old;
            }
        }
        let p_hat: Vec<T> = ax
            .iter()
            .zip(&mu_p)
            .zip(&state.s_hat)
            .map(|((&a, &mp), &s)| a - mp * s)
            .collect();
        // (R3)-(R4)
        let (z_hat, mu_z) = output_moments(y, &p_hat, &mu_p, noise)?;
        // (R5)-(R6)
        let mut mu_s: Vec<T> = mu_z
            .iter()
            .zip(&mu_p)
            .map(|(&mz, &mp)| ((T::one() - mz / mp) / mp).max(floor))
            .collect();
        let mut s_hat: Vec<T> = z_hat
            .iter()
            .zip(&p_hat)
            .zip(&mu_p)
            .map(|((&z, &p), &mp)| (z - p) / mp)
            .collect();
        if damp < T::one() {
            for (s, &old) in s_hat.iter_mut().zip(&state.s_hat) {
                *s = damp * *s + (T::one() - damp) * old;
            }
            if state.t > 0 {
                for (v, &old) in mu_s.iter_mut().zip(&state.mu_s) {
                    *v = damp * *v + (T::one() - damp) * old;
                }
            }
        }
        // (R7)-(R8)
        let (back, mu_r) = op.adjoint_pair(&s_hat, &mu_s)?;
        let mu_r: Vec<T> = mu_r.into_iter().map(|v| T::one() / v.max(floor)).collect();
        let r_hat: Vec<T> = state
            .x_hat
            .iter()
            .zip(&mu_r)
            .zip(&back)
            .map(|((&x, &mr), &b)| x + mr * b)
            .collect();
        check_finite(t, "mu_p", &mu_p)?;
        check_finite(t, "p_hat", &p_hat)?;
        check_finite(t, "mu_r", &mu_r)?;
        check_finite(t, "r_hat", &r_hat)?;
        // (R9)-(R10)
        let stats = input_posterior(&r_hat, &mu_r, prior)?;
        let (mut x_new, mut mu_x_new) = input_moments(&stats);
        if damp < T::one() {
            for (x, &old) in x_new.iter_mut().zip(&state.x_hat) {
                *x = damp * *x + (T::one() - damp) * old;
            }
            for (v, &old) in mu_x_new.iter_mut().zip(&state.mu_x) {
                *v = damp * *v + (T::one() - damp) * old;
            }
        }
        check_finite(t, "x_hat", &x_new)?;
        check_finite(t, "mu_x", &mu_x_new)?;

        // (R11)
        let change = dist_sq(&x_new, &state.x_hat);
        let energy = norm_sq(&state.x_hat);
        let stop = change < cfg.tol * energy;

        if let Some(cb) = hooks.on_iteration.as_mut() {
            let nmse_db = match (hooks.truth, truth_energy) {
                (Some(truth), Some(e)) if e > T::zero() => {
                    Some(10.0 * (dist_sq(truth, &x_new) / e).to_f64_lossy().log10())
                }
                _ => None,
            };
            let residual = if energy > T::zero() {
                change / energy
            } else {
                T::infinity()
            };
            cb(&GampProgress { t, residual, nmse_db });
        }

        state = GampState {
            x_hat: x_new,
            mu_x: mu_x_new,
            s_hat,
            mu_s,
            p_hat,
            mu_p,
            z_hat,
            mu_z,
            r_hat,
            mu_r,
            t,
        };
        last_stats = Some(stats);
        if stop {
            converged = true;
            break;
        }
    }

    Ok(GampOutput {
        state,
        stats: last_stats.expect("t_max >= 1"),
        converged,
    })
}

fn check_finite<T: Scalar>(iteration: usize, quantity: &'static str, v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { iteration, quantity })
    }
}
