//! Seeded generators for test signals, measurement matrices and noise.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, LogNormal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::scalar::{norm_sq, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalKind {
    BernoulliGaussian,
    Bernoulli,
    BernoulliRademacher,
    /// Equal-weight triangles centred at ±1 with half-width 1/2.
    TriangularMixture,
    /// Density `∝ (1 + x²)^{-(q+1)/2}`.
    StudentsT {
        q: f64,
    },
    /// `exp(N(mu, sigma2))`.
    LogNormal {
        mu: f64,
        sigma2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Exactly `k` nonzeros at uniformly chosen positions.
    Exact(usize),
    /// Each coefficient active independently with probability `lambda`.
    Rate(f64),
    /// Every coefficient drawn from the amplitude law.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
    pub support: Support,
}

impl SignalSpec {
    pub fn exact(kind: SignalKind, n: usize, k: usize) -> Self {
        Self {
            kind,
            n,
            support: Support::Exact(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.support {
            Support::Exact(k) if k > self.n => {
                return Err(Error::InvalidSpec(format!(
                    "support size k = {k} exceeds signal length n = {}",
                    self.n
                )))
            }
            Support::Rate(l) if !(0.0..=1.0).contains(&l) => {
                return Err(Error::InvalidSpec(format!("activity rate {l} outside [0, 1]")))
            }
            _ => {}
        }
        match self.kind {
            SignalKind::StudentsT { q } if !(q > 0.0) => {
                Err(Error::InvalidSpec(format!("Student's-t rate {q} must be positive")))
            }
            SignalKind::LogNormal { mu, sigma2 } if !(mu.is_finite() && sigma2 >= 0.0) => Err(Error::InvalidSpec(
                format!("log-normal parameters ({mu}, {sigma2}) invalid"),
            )),
            _ => Ok(()),
        }
    }
}

fn amplitude(kind: SignalKind, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match kind {
        SignalKind::BernoulliGaussian => StandardNormal.sample(rng),
        SignalKind::Bernoulli => 1.0,
        SignalKind::BernoulliRademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        SignalKind::TriangularMixture => {
            let centre = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            centre + 0.5 * (u + v - 1.0)
        }
        SignalKind::StudentsT { q } => {
            let t: f64 = StudentT::new(q)
                .map_err(|e| Error::InvalidSpec(e.to_string()))?
                .sample(rng);
            t / q.sqrt()
        }
        SignalKind::LogNormal { mu, sigma2 } => LogNormal::new(mu, sigma2.sqrt())
            .map_err(|e| Error::InvalidSpec(e.to_string()))?
            .sample(rng),
    })
}

pub fn gen_signal<T: Scalar>(spec: &SignalSpec, seed: u64) -> Result<Vec<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![T::zero(); spec.n];
    match spec.support {
        Support::Exact(k) => {
            let idx = sample(&mut rng, spec.n, k);
            for i in idx.iter() {
                x[i] = T::lit(amplitude(spec.kind, &mut rng)?);
            }
        }
        Support::Rate(lambda) => {
            for v in &mut x {
                if rng.random::<f64>() < lambda {
                    *v = T::lit(amplitude(spec.kind, &mut rng)?);
                }
            }
        }
        Support::Dense => {
            for v in &mut x {
                *v = T::lit(amplitude(spec.kind, &mut rng)?);
            }
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MatrixKind {
    /// `N(0, 1/m)` entries.
    IidGaussian,
    /// Uniform on `[-1/2, 1/2]`.
    IidUniform,
    /// Centred Cauchy, scale 1.
    IidCauchy,
    /// Entries in `{0, 1}`, nonzero with probability `lambda_a`.
    IidBernoulli { lambda_a: f64 },
    /// Entries in `{0, ±1}`, nonzero with probability `lambda_a`.
    IidBernoulliRademacher { lambda_a: f64 },
    /// `m` distinct rows of the orthonormal DCT-II.
    RowSampledDct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
}

impl MatrixSpec {
    pub fn new(kind: MatrixKind, m: usize, n: usize) -> Self {
        Self { kind, m, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidSpec("matrix dimensions must be positive".into()));
        }
        match self.kind {
            MatrixKind::IidBernoulli { lambda_a } | MatrixKind::IidBernoulliRademacher { lambda_a }
                if !(lambda_a > 0.0 && lambda_a <= 1.0) =>
            {
                Err(Error::InvalidSpec(format!("matrix density {lambda_a} outside (0, 1]")))
            }
            MatrixKind::RowSampledDct if self.m > self.n => Err(Error::InvalidSpec(format!(
                "cannot select m = {} distinct rows from a size-{} transform",
                self.m, self.n
            ))),
            _ => Ok(()),
        }
    }
}

const MAX_COLUMN_REDRAWS: usize = 10_000;

// Draws columns until each is distinct from the ones before it. Only discrete
// ensembles can collide.
fn distinct_columns(
    m: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
    mut entry: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<Vec<Vec<f64>>> {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    for _ in 0..n {
        let mut tries = 0;
        loop {
            let col: Vec<f64> = (0..m).map(|_| entry(rng)).collect();
            if seen.insert(col.iter().map(|v| v.to_bits()).collect()) {
                cols.push(col);
                break;
            }
            tries += 1;
            if tries > MAX_COLUMN_REDRAWS {
                return Err(Error::InvalidSpec(format!(
                    "cannot draw {n} distinct sparse columns of length {m}"
                )));
            }
        }
    }
    Ok(cols)
}

pub fn gen_matrix<T: Scalar>(spec: &MatrixSpec, seed: u64) -> Result<LinearOperator<T>> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = |entries: Vec<f64>| LinearOperator::dense(m, n, entries.into_iter().map(T::lit).collect());
    match spec.kind {
        MatrixKind::IidGaussian => {
            let s = 1.0 / (m as f64).sqrt();
            dense(
                (0..m * n)
                    .map(|_| s * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect::<Vec<f64>>(),
            )
        }
        MatrixKind::IidUniform => dense((0..m * n).map(|_| rng.random_range(-0.5..0.5)).collect()),
        MatrixKind::IidCauchy => {
            let c = Cauchy::new(0.0, 1.0).expect("unit scale");
            dense((0..m * n).map(|_| c.sample(&mut rng)).collect())
        }
        MatrixKind::IidBernoulli { lambda_a } => {
            let cols = distinct_columns(m, n, &mut rng, |r| if r.random::<f64>() < lambda_a { 1.0 } else { 0.0 })?;
            dense(row_major(&cols, m, n))
        }
        MatrixKind::IidBernoulliRademacher { lambda_a } => {
            let cols = distinct_columns(m, n, &mut rng, |r| {
                if r.random::<f64>() < lambda_a {
                    if r.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                }
            })?;
            dense(row_major(&cols, m, n))
        }
        MatrixKind::RowSampledDct => {
            let mut rows = sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            LinearOperator::row_sampled_dct(n, rows)
        }
    }
}

fn row_major(cols: &[Vec<f64>], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out[i * n + j] = v;
        }
    }
    out
}

/// Adds white Gaussian noise at `snr_db = 10 log10(‖z‖² / (M ψ))`. An infinite
/// SNR returns `z` unchanged with `ψ = 0`.
pub fn add_noise<T: Scalar>(z: &[T], snr_db: f64, seed: u64) -> Result<(Vec<T>, T)> {
    let energy = norm_sq(z).to_f64_lossy();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy("noiseless measurements"));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidSpec("SNR is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok((z.to_vec(), T::zero()));
    }
    let psi = energy / (z.len() as f64 * 10f64.powf(snr_db / 10.0));
    let sd = psi.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = z
        .iter()
        .map(|&v| {
            let w: f64 = StandardNormal.sample(&mut rng);
            v + T::lit(sd * w)
        })
        .collect();
    Ok((y, T::lit(psi)))
}
