//! Input channel (Bernoulli/Gaussian-mixture prior) and output channel (AWGN)
//! posterior computations.
//!
//! Every mixture likelihood is formed in the log domain with max subtraction;
//! the linear-domain ratios underflow as soon as `|r̂|` is a few tens of
//! standard deviations away from a component.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Absolute lower bound on the noise variance.
pub const PSI_FLOOR: f64 = 1e-12;
/// Sparsity rates are clamped to `[LAMBDA_FLOOR, 1 - LAMBDA_FLOOR]` (or the
/// type's epsilon, if larger).
pub const LAMBDA_FLOOR: f64 = 1e-12;

fn lambda_margin<T: Scalar>() -> T {
    T::lit(LAMBDA_FLOOR).max(T::epsilon())
}

/// Clamps a sparsity rate into the open unit interval.
pub fn clamp_lambda<T: Scalar>(lambda: T) -> T {
    let eps = lambda_margin::<T>();
    lambda.max(eps).min(T::one() - eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> MixtureComponent<T> {
    pub fn new(weight: T, mean: T, variance: T) -> Self {
        Self { weight, mean, variance }
    }
}

/// `(1-λ) δ(x) + λ Σ_l ω_l N(x; θ_l, φ_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmPrior<T> {
    lambda: T,
    components: Vec<MixtureComponent<T>>,
}

impl<T: Scalar> GmPrior<T> {
    /// Validates the components, renormalizes the weights onto the simplex and
    /// clamps `lambda`.
    pub fn new(lambda: T, components: Vec<MixtureComponent<T>>) -> Result<Self> {
        if !(lambda >= T::zero() && lambda <= T::one()) {
            return Err(Error::InvalidPrior(format!("sparsity rate {lambda} outside [0, 1]")));
        }
        if components.is_empty() {
            return Err(Error::InvalidPrior("mixture needs at least one component".into()));
        }
        for (l, c) in components.iter().enumerate() {
            if !(c.weight >= T::zero()) || !c.weight.is_finite() {
                return Err(Error::InvalidPrior(format!("component {l}: weight {}", c.weight)));
            }
            if !c.mean.is_finite() {
                return Err(Error::InvalidPrior(format!("component {l}: mean {}", c.mean)));
            }
            if !(c.variance > T::zero()) || !c.variance.is_finite() {
                return Err(Error::InvalidPrior(format!("component {l}: variance {}", c.variance)));
            }
        }
        let total: T = components.iter().map(|c| c.weight).sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidPrior("mixture weights sum to zero".into()));
        }
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidPrior(format!("mixture weights sum to {total}")));
        }
        let components = components
            .into_iter()
            .map(|c| MixtureComponent {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self {
            lambda: clamp_lambda(lambda),
            components,
        })
    }

    /// Single-component (spike-and-slab) prior.
    pub fn bernoulli_gaussian(lambda: T, mean: T, variance: T) -> Result<Self> {
        Self::new(lambda, vec![MixtureComponent::new(T::one(), mean, variance)])
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn components(&self) -> &[MixtureComponent<T>] {
        &self.components
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<T> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn variances(&self) -> Vec<T> {
        self.components.iter().map(|c| c.variance).collect()
    }

    /// Prior mean `λ Σ ω_l θ_l`.
    pub fn mean(&self) -> T {
        self.lambda * self.components.iter().map(|c| c.weight * c.mean).sum::<T>()
    }

    /// Prior variance `λ Σ ω_l (φ_l + θ_l²) - mean²`.
    pub fn variance(&self) -> T {
        let second = self.lambda
            * self
                .components
                .iter()
                .map(|c| c.weight * (c.variance + c.mean * c.mean))
                .sum::<T>();
        let m = self.mean();
        (second - m * m).max(T::zero())
    }

    /// `ln p_X(x)` of the continuous part `λ Σ ω N(x; θ, φ)` (the Dirac mass is excluded).
    pub fn ln_active_density(&self, x: T) -> T {
        self.lambda.ln() + ln_mixture_density(&self.components, x)
    }
}

/// `ln Σ_k ω_k N(x; θ_k, φ_k)`.
pub fn ln_mixture_density<T: Scalar>(components: &[MixtureComponent<T>], x: T) -> T {
    let terms: Vec<T> = components
        .iter()
        .map(|c| c.weight.ln() + T::ln_normal_pdf(x, c.mean, c.variance))
        .collect();
    log_sum_exp(&terms)
}

/// AWGN output channel `y = z + w`, `w ~ N(0, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    psi: T,
}

impl<T: Scalar> NoiseModel<T> {
    /// Noise variance floored at [`PSI_FLOOR`].
    pub fn new(psi: T) -> Result<Self> {
        let model = Self::exact(psi)?;
        Ok(Self {
            psi: model.psi.max(T::lit(PSI_FLOOR)),
        })
    }

    /// No floor; `psi = 0` and `psi = ∞` are accepted.
    pub fn exact(psi: T) -> Result<Self> {
        if !(psi >= T::zero()) {
            return Err(Error::NonPositiveVariance {
                context: "noise variance",
                value: psi.to_f64_lossy(),
            });
        }
        Ok(Self { psi })
    }

    pub fn psi(&self) -> T {
        self.psi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProduct<T> {
    pub mean: T,
    pub var: T,
    /// `ln N(0; a - b, A + B)`.
    pub log_scale: T,
}

/// `N(x; a, A) N(x; b, B) = exp(log_scale) N(x; mean, var)`.
pub fn gaussian_product<T: Scalar>(a: T, var_a: T, b: T, var_b: T) -> Result<GaussianProduct<T>> {
    for (value, context) in [(var_a, "first variance"), (var_b, "second variance")] {
        if !(value > T::zero()) {
            return Err(Error::NonPositiveVariance {
                context,
                value: value.to_f64_lossy(),
            });
        }
    }
    Ok(gaussian_product_unchecked(a, var_a, b, var_b))
}

#[inline]
fn gaussian_product_unchecked<T: Scalar>(a: T, var_a: T, b: T, var_b: T) -> GaussianProduct<T> {
    // (a/A + b/B)/(1/A + 1/B) rearranged to avoid reciprocals of tiny variances
    let total = var_a + var_b;
    GaussianProduct {
        mean: (a * var_b + b * var_a) / total,
        var: var_a * var_b / total,
        log_scale: T::ln_normal_pdf(a - b, T::zero(), total),
    }
}

/// Per-coefficient posterior quantities of the Gaussian-mixture input channel:
/// `p(x_n | y) = (1-π_n) δ(x_n) + π_n Σ_l β̄_{n,l} N(x_n; γ_{n,l}, ν_{n,l})`.
///
/// Per-component arrays are stored coefficient-major (`n * order + l`).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats<T> {
    order: usize,
    pi: Vec<T>,
    beta_bar: Vec<T>,
    gamma: Vec<T>,
    nu: Vec<T>,
    log_zeta: Vec<T>,
}

impl<T: Scalar> PosteriorStats<T> {
    /// Assembles stats from raw parts, checking lengths and ranges.
    pub fn from_parts(
        order: usize,
        pi: Vec<T>,
        beta_bar: Vec<T>,
        gamma: Vec<T>,
        nu: Vec<T>,
        log_zeta: Vec<T>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidSpec("posterior stats need order >= 1".into()));
        }
        let n = pi.len();
        check_len("posterior beta_bar", n * order, beta_bar.len())?;
        check_len("posterior gamma", n * order, gamma.len())?;
        check_len("posterior nu", n * order, nu.len())?;
        check_len("posterior log_zeta", n, log_zeta.len())?;
        if pi.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::InvalidSpec("posterior pi outside [0, 1]".into()));
        }
        if beta_bar.iter().any(|&b| !(b >= T::zero() && b <= T::one())) {
            return Err(Error::InvalidSpec("posterior beta_bar outside [0, 1]".into()));
        }
        if nu.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidSpec("posterior nu negative".into()));
        }
        Ok(Self {
            order,
            pi,
            beta_bar,
            gamma,
            nu,
            log_zeta,
        })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Posterior support probabilities `π_n`.
    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    pub fn beta_bar(&self, n: usize) -> &[T] {
        &self.beta_bar[n * self.order..(n + 1) * self.order]
    }

    pub fn gamma(&self, n: usize) -> &[T] {
        &self.gamma[n * self.order..(n + 1) * self.order]
    }

    pub fn nu(&self, n: usize) -> &[T] {
        &self.nu[n * self.order..(n + 1) * self.order]
    }

    /// `ln ζ_n`; ζ itself underflows for outlying `r̂_n`.
    pub fn log_zeta(&self) -> &[T] {
        &self.log_zeta
    }

    pub fn zeta(&self, n: usize) -> T {
        self.log_zeta[n].exp()
    }
}

/// Posterior of `x_n` under the Gaussian-mixture prior given the scalar
/// pseudo-measurement `r̂_n = x_n + N(0, μʳ_n)`.
pub fn input_posterior<T: Scalar>(r_hat: &[T], mu_r: &[T], prior: &GmPrior<T>) -> Result<PosteriorStats<T>> {
    check_len("input_posterior mu_r", r_hat.len(), mu_r.len())?;
    if let Some(&bad) = mu_r.iter().find(|&&v| !(v > T::zero())) {
        return Err(Error::NonPositiveVariance {
            context: "input_posterior mu_r",
            value: bad.to_f64_lossy(),
        });
    }
    let n = r_hat.len();
    let order = prior.order();
    let ln_lambda = prior.lambda().ln();
    let ln_one_minus = (T::one() - prior.lambda()).ln();
    let ln_weights: Vec<T> = prior.components().iter().map(|c| c.weight.ln()).collect();

    let mut pi = Vec::with_capacity(n);
    let mut beta_bar = Vec::with_capacity(n * order);
    let mut gamma = Vec::with_capacity(n * order);
    let mut nu = Vec::with_capacity(n * order);
    let mut log_zeta = Vec::with_capacity(n);
    let mut ln_beta = vec![T::zero(); order];

    for (&r, &mr) in r_hat.iter().zip(mu_r) {
        for (l, c) in prior.components().iter().enumerate() {
            let prod = gaussian_product_unchecked(r, mr, c.mean, c.variance);
            ln_beta[l] = ln_lambda + ln_weights[l] + prod.log_scale;
            gamma.push(prod.mean);
            nu.push(prod.var);
        }
        let ln_active = log_sum_exp(&ln_beta);
        for &lb in &ln_beta {
            let b = if ln_active == T::neg_infinity() {
                T::one() / T::lit(order as f64)
            } else {
                (lb - ln_active).exp()
            };
            beta_bar.push(b);
        }
        let ln_zero = ln_one_minus + T::ln_normal_pdf(r, T::zero(), mr);
        // π = 1 / (1 + exp(ln_zero - ln_active))
        let odds = (ln_zero - ln_active).exp();
        pi.push(T::one() / (T::one() + odds));
        log_zeta.push(log_sum_exp(&[ln_zero, ln_active]));
    }

    Ok(PosteriorStats {
        order,
        pi,
        beta_bar,
        gamma,
        nu,
        log_zeta,
    })
}

/// Posterior mean and variance of each coefficient.
pub fn input_moments<T: Scalar>(stats: &PosteriorStats<T>) -> (Vec<T>, Vec<T>) {
    let n = stats.len();
    let mut x_hat = Vec::with_capacity(n);
    let mut mu_x = Vec::with_capacity(n);
    for i in 0..n {
        let pi = stats.pi[i];
        let bb = stats.beta_bar(i);
        let g = stats.gamma(i);
        let v = stats.nu(i);
        let active_mean: T = bb.iter().zip(g).map(|(&b, &gm)| b * gm).sum();
        let mean = pi * active_mean;
        // (1-π) mean² + π Σ β̄ (ν + (γ - mean)²), equal to π Σ β̄ (ν + γ²) - mean²
        let spread: T = bb
            .iter()
            .zip(g)
            .zip(v)
            .map(|((&b, &gm), &var)| {
                let d = gm - mean;
                b * (var + d * d)
            })
            .sum();
        let var = (T::one() - pi) * mean * mean + pi * spread;
        x_hat.push(mean);
        mu_x.push(var.max(T::zero()));
    }
    (x_hat, mu_x)
}

/// Posterior mean and variance of `z_m` under the AWGN output channel.
pub fn output_moments<T: Scalar>(y: &[T], p_hat: &[T], mu_p: &[T], noise: &NoiseModel<T>) -> Result<(Vec<T>, Vec<T>)> {
    check_len("output_moments p_hat", y.len(), p_hat.len())?;
    check_len("output_moments mu_p", y.len(), mu_p.len())?;
    if let Some(&bad) = mu_p.iter().find(|&&v| !(v > T::zero())) {
        return Err(Error::NonPositiveVariance {
            context: "output_moments mu_p",
            value: bad.to_f64_lossy(),
        });
    }
    let psi = noise.psi();
    let mut z_hat = Vec::with_capacity(y.len());
    let mut mu_z = Vec::with_capacity(y.len());
    for ((&ym, &p), &mp) in y.iter().zip(p_hat).zip(mu_p) {
        // gain μᵖ/(μᵖ+ψ) and μᵖψ/(μᵖ+ψ), written to stay finite at ψ = 0 and ψ = ∞
        let gain = T::one() / (T::one() + psi / mp);
        z_hat.push(p + gain * (ym - p));
        mu_z.push(mp / (T::one() + mp / psi));
    }
    Ok((z_hat, mu_z))
}
