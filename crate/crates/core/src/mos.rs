//! BIC-penalized selection of the mixture order `L`.

use serde::{Deserialize, Serialize};

use crate::channels::{ln_mixture_density, GmPrior, MixtureComponent, NoiseModel, PosteriorStats};
use crate::em::{em_init, nmse_db_generic, EmConfig, EmGmAmp, EmMode, EmOutput};
use crate::error::{Error, Result};
use crate::gamp::GampConfig;
use crate::operator::LinearOperator;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosConfig {
    /// Starting order `L⁰`.
    pub initial_order: usize,
    pub j_max: usize,
    pub l_max: usize,
}

impl MosConfig {
    pub fn new(mode: EmMode) -> Self {
        Self {
            initial_order: mode.default_order(),
            j_max: 5,
            l_max: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_order == 0 || self.l_max == 0 || self.j_max == 0 {
            return Err(Error::InvalidSpec(
                "model-order search needs L0, L_max and j_max of at least 1".into(),
            ));
        }
        if self.initial_order > self.l_max {
            return Err(Error::InvalidSpec(format!(
                "initial order {} exceeds L_max {}",
                self.initial_order, self.l_max
            )));
        }
        Ok(())
    }
}

/// Number of free parameters `|q_L|` for a real-valued signal.
pub fn parameter_count(mode: EmMode, order: usize) -> usize {
    match mode {
        EmMode::Sparse => 3 * order - 1,
        EmMode::HeavyTailed => 2 * order - 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosScore {
    pub order: usize,
    /// Point-mass lower bound `ℒ` on the log-likelihood.
    pub log_likelihood: f64,
    pub penalty: f64,
    /// `ℒ - penalty`.
    pub score: f64,
    /// Effective sample size `U = Σ_n π_n`.
    pub support: f64,
}

/// Scores `candidate` against the posterior of the current fit.
pub fn mos_metric<T: Scalar>(stats: &PosteriorStats<T>, candidate: &GmPrior<T>, mode: EmMode) -> Result<MosScore> {
    let support: f64 = stats.pi().iter().map(|p| p.to_f64_lossy()).sum();
    if !(support >= 2.0) {
        return Err(Error::InsufficientSupport(support));
    }
    let comps = candidate.components();
    let mut ll = 0.0;
    for n in 0..stats.len() {
        let pi = stats.pi()[n].to_f64_lossy();
        if pi == 0.0 {
            continue;
        }
        let inner: f64 = stats
            .beta_bar(n)
            .iter()
            .zip(stats.gamma(n))
            .filter(|(b, _)| **b > T::zero())
            .map(|(&b, &g)| b.to_f64_lossy() * ln_mixture_density(comps, g).to_f64_lossy())
            .sum();
        ll += pi * inner;
    }
    let order = candidate.order();
    let penalty = parameter_count(mode, order) as f64 * support.ln();
    Ok(MosScore {
        order,
        log_likelihood: ll,
        penalty,
        score: ll - penalty,
        support,
    })
}

/// Order-`L+1` starting prior: the heaviest component is halved into two with
/// means `θ ± √φ/2`.
pub fn split_largest<T: Scalar>(prior: &GmPrior<T>, mode: EmMode) -> Result<GmPrior<T>> {
    let comps = prior.components();
    let (idx, big) = comps.iter().enumerate().fold(
        (0, comps[0]),
        |acc, (i, c)| if c.weight > acc.1.weight { (i, *c) } else { acc },
    );
    let half = big.weight / T::lit(2.0);
    let offset = match mode {
        EmMode::Sparse => big.variance.sqrt() / T::lit(2.0),
        EmMode::HeavyTailed => T::zero(),
    };
    let mut out: Vec<MixtureComponent<T>> = Vec::with_capacity(comps.len() + 1);
    for (i, c) in comps.iter().enumerate() {
        if i == idx {
            out.push(MixtureComponent::new(half, big.mean - offset, big.variance));
            // heavy-tailed mode cannot separate by mean; separate by scale instead
            let var = match mode {
                EmMode::Sparse => big.variance,
                EmMode::HeavyTailed => big.variance * T::lit(2.0),
            };
            out.push(MixtureComponent::new(half, big.mean + offset, var));
        } else {
            out.push(*c);
        }
    }
    GmPrior::new(prior.lambda(), out)
}

/// One candidate evaluated during sweep `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosCandidateRecord {
    pub order: usize,
    pub log_likelihood: f64,
    pub penalty: f64,
    pub score: f64,
    pub nmse_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosSweepRecord {
    pub j: usize,
    /// `Lʲ`, the order whose posterior scored this sweep.
    pub current_order: usize,
    /// NMSE of the order-`Lʲ` fit.
    pub current_nmse_db: Option<f64>,
    pub candidates: Vec<MosCandidateRecord>,
    pub selected_order: usize,
}

#[derive(Debug, Clone)]
pub struct MosOutput<T> {
    pub order: usize,
    pub fit: EmOutput<T>,
    pub trace: Vec<MosSweepRecord>,
    pub converged: bool,
}

/// Alternates BIC order sweeps with EM fits until the order stops changing.
pub struct MosSelector<'a, T: Scalar> {
    em: EmConfig<T>,
    gamp: GampConfig<T>,
    mos: MosConfig,
    truth: Option<&'a [T]>,
}

impl<'a, T: Scalar> MosSelector<'a, T> {
    pub fn new(em: EmConfig<T>, gamp: GampConfig<T>, mos: MosConfig) -> Self {
        Self {
            em,
            gamp,
            mos,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: &'a [T]) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn run(&self, op: &LinearOperator<T>, y: &[T]) -> Result<MosOutput<T>> {
        self.mos.validate()?;
        self.em.validate()?;
        let mode = self.em.mode;
        let base = EmConfig { order: 1, ..self.em };
        let (_, noise0) = em_init(y, op, &base)?;
        let mut fits: Vec<Option<EmOutput<T>>> = vec![None; self.mos.l_max + 1];

        let mut current = self.mos.initial_order;
        self.ensure_fit(&mut fits, current, op, y, noise0)?;
        let mut trace = Vec::new();
        let mut converged = false;

        for j in 0..self.mos.j_max {
            let stats = fits[current].as_ref().expect("fitted").stats.clone();
            let mut candidates: Vec<MosCandidateRecord> = Vec::new();
            let mut best: Option<(usize, f64)> = None;
            let mut prev_score = f64::NEG_INFINITY;
            for order in 1..=self.mos.l_max {
                self.ensure_fit(&mut fits, order, op, y, noise0)?;
                let fit = fits[order].as_ref().expect("fitted");
                let s = mos_metric(&stats, &fit.prior, mode)?;
                candidates.push(MosCandidateRecord {
                    order,
                    log_likelihood: s.log_likelihood,
                    penalty: s.penalty,
                    score: s.score,
                    nmse_db: self.nmse(&fit.x_hat),
                });
                if best.is_none_or(|(_, b)| s.score > b) {
                    best = Some((order, s.score));
                }
                if s.score < prev_score {
                    break;
                }
                prev_score = s.score;
            }
            let selected = best.expect("at least one candidate").0;
            trace.push(MosSweepRecord {
                j,
                current_order: current,
                current_nmse_db: self.nmse(&fits[current].as_ref().expect("fitted").x_hat),
                candidates,
                selected_order: selected,
            });
            let stop = selected == current;
            current = selected;
            if stop {
                converged = true;
                break;
            }
        }

        let fit = fits[current].take().expect("fitted");
        Ok(MosOutput {
            order: current,
            fit,
            trace,
            converged,
        })
    }

    fn nmse(&self, x_hat: &[T]) -> Option<f64> {
        self.truth.and_then(|t| nmse_db_generic(t, x_hat))
    }

    // candidates only depend on their order, so each is fitted once
    fn ensure_fit(
        &self,
        fits: &mut [Option<EmOutput<T>>],
        order: usize,
        op: &LinearOperator<T>,
        y: &[T],
        noise0: NoiseModel<T>,
    ) -> Result<()> {
        for l in 1..=order {
            if fits[l].is_some() {
                continue;
            }
            let cfg = EmConfig { order: l, ..self.em };
            let mut runner = EmGmAmp::new(cfg, self.gamp);
            if let Some(t) = self.truth {
                runner = runner.with_truth(t);
            }
            if l > 1 {
                let prev = fits[l - 1].as_ref().expect("fitted in order");
                let start = split_largest(&prev.prior, self.em.mode)?;
                runner = runner.with_initial(start, prev.noise);
            } else {
                let (prior, _) = em_init(y, op, &cfg)?;
                runner = runner.with_initial(prior, noise0);
            }
            fits[l] = Some(runner.run(op, y)?);
        }
        Ok(())
    }
}

/// Model-order selection with default GAMP settings.
pub fn mos_select<T: Scalar>(
    y: &[T],
    op: &LinearOperator<T>,
    cfg: &EmConfig<T>,
    mos_cfg: &MosConfig,
) -> Result<MosOutput<T>> {
    MosSelector::new(*cfg, GampConfig::default(), *mos_cfg).run(op, y)
}
