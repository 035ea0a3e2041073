#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emgm::{GmPrior, MixtureComponent};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson over `[a, b]`, pre-split into `panels` pieces so narrow
/// peaks are not stepped over.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let f: &dyn Fn(f64) -> f64 = &f;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            adapt(
                f,
                lo,
                hi,
                fa,
                fm,
                fb,
                simpson(lo, hi, fa, fm, fb),
                tol / panels as f64,
                40,
            )
        })
        .sum()
}

/// Posterior `(π, mean, variance)` of `x` given `r = x + N(0, mu_r)` under a
/// Bernoulli-Gaussian-mixture prior, by direct quadrature of the unnormalized
/// posterior density.
pub fn posterior_by_quadrature(r: f64, mu_r: f64, lambda: f64, comps: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let active = |x: f64| {
        let prior: f64 = comps.iter().map(|&(w, m, v)| w * normal_pdf(x, m, v)).sum();
        lambda * prior * normal_pdf(r, x, mu_r)
    };
    let mut lo = r - 12.0 * mu_r.sqrt();
    let mut hi = r + 12.0 * mu_r.sqrt();
    for &(_, m, v) in comps {
        lo = lo.min(m - 12.0 * v.sqrt());
        hi = hi.max(m + 12.0 * v.sqrt());
    }
    let tol = 1e-13;
    let z1 = integrate(active, lo, hi, 400, tol);
    let m1 = integrate(|x| x * active(x), lo, hi, 400, tol);
    let m2 = integrate(|x| x * x * active(x), lo, hi, 400, tol);
    let z0 = (1.0 - lambda) * normal_pdf(r, 0.0, mu_r);
    let z = z0 + z1;
    let mean = m1 / z;
    (z1 / z, mean, m2 / z - mean * mean)
}

/// Random prior with `order` components: weights on the simplex, means in
/// `[-2, 2]`, variances in `[0.05, 2]`.
pub fn random_prior(rng: &mut impl Rng, order: usize) -> GmPrior<f64> {
    let raw: Vec<f64> = (0..order).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps = raw
        .iter()
        .map(|w| MixtureComponent::new(w / total, rng.random_range(-2.0..2.0), rng.random_range(0.05..2.0)))
        .collect();
    GmPrior::new(rng.random_range(0.05..0.95), comps).unwrap()
}

pub fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Exact posterior mean of a Bernoulli-Gaussian signal (`λ`, zero mean,
/// variance `phi`) observed through `y = A x + N(0, psi)`, by enumerating
/// every support pattern and conditioning the Gaussian on each.
pub fn exhaustive_mmse(a: &nalgebra::DMatrix<f64>, y: &[f64], lambda: f64, phi: f64, psi: f64) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let (m, n) = a.shape();
    assert!(n < 24, "enumeration over 2^{n} supports");
    let y = DVector::from_column_slice(y);
    let mut log_w = Vec::with_capacity(1 << n);
    let mut means = Vec::with_capacity(1 << n);
    for mask in 0u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
        let s = cols.len();
        let a_s = DMatrix::from_fn(m, s, |i, j| a[(i, cols[j])]);
        let cov = &a_s * a_s.transpose() * phi + DMatrix::identity(m, m) * psi;
        let chol = cov.cholesky().expect("covariance is positive definite");
        let alpha = chol.solve(&y);
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let prior = s as f64 * lambda.ln() + (n - s) as f64 * (1.0 - lambda).ln();
        log_w.push(prior - 0.5 * log_det - 0.5 * y.dot(&alpha));
        let x_s = a_s.transpose() * alpha * phi;
        let mut x = vec![0.0; n];
        for (j, &c) in cols.iter().enumerate() {
            x[c] = x_s[j];
        }
        means.push(x);
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut out = vec![0.0; n];
    for (wi, x) in w.iter().zip(&means) {
        for (o, v) in out.iter_mut().zip(x) {
            *o += wi / total * v;
        }
    }
    out
}

/// A seeded `N = 12`, `M = 6`, `K = 2` Bernoulli-Gaussian instance at 25 dB
/// SNR: `(A, x, y, psi)`.
pub fn tiny_instance(seed: u64) -> (emgm::LinearOperator<f64>, Vec<f64>, Vec<f64>, f64) {
    use emgm::{add_noise, gen_matrix, gen_signal, MatrixKind, MatrixSpec, SignalKind, SignalSpec};
    let x: Vec<f64> = gen_signal(&SignalSpec::exact(SignalKind::BernoulliGaussian, 12, 2), seed).unwrap();
    let op = gen_matrix(&MatrixSpec::new(MatrixKind::IidGaussian, 6, 12), seed + 1000).unwrap();
    let z = op.forward(&x).unwrap();
    let (y, psi) = add_noise(&z, 25.0, seed + 2000).unwrap();
    (op, x, y, psi)
}

pub fn dense_matrix(op: &emgm::LinearOperator<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(op.rows(), op.cols(), &op.densify())
}

/// Random posterior statistics with `n` coefficients and `order` components.
pub fn random_stats(rng: &mut impl Rng, n: usize, order: usize) -> emgm::PosteriorStats<f64> {
    let pi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut beta = Vec::with_capacity(n * order);
    for _ in 0..n {
        let raw: Vec<f64> = (0..order).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        beta.extend(raw.iter().map(|b| b / s));
    }
    let gamma: Vec<f64> = (0..n * order).map(|_| rng.random_range(-3.0..3.0)).collect();
    let nu: Vec<f64> = (0..n * order).map(|_| rng.random_range(0.01..1.0)).collect();
    emgm::PosteriorStats::from_parts(order, pi, beta, gamma, nu, vec![0.0; n]).unwrap()
}

/// `n` independent draws from a Bernoulli-Gaussian-mixture prior.
pub fn sample_prior(rng: &mut impl Rng, prior: &GmPrior<f64>, n: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            if rng.random::<f64>() >= prior.lambda() {
                return 0.0;
            }
            let mut u: f64 = rng.random();
            let comps = prior.components();
            let c = comps
                .iter()
                .find(|c| {
                    u -= c.weight;
                    u < 0.0
                })
                .unwrap_or(&comps[comps.len() - 1]);
            let z: f64 = StandardNormal.sample(rng);
            c.mean + c.variance.sqrt() * z
        })
        .collect()
}
