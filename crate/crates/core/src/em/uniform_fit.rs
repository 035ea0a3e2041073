//! Offline Gaussian-mixture fit to the uniform density on `[-1/2, 1/2]`, used
//! to shape the sparse-mode initial prior.
//!
//! The means are pinned to an even grid on `[-(L-1)/(2L), (L-1)/(2L)]`; only
//! weights and variances are learned. [`UNIFORM_FIT`] stores the result of
//! [`fit_uniform_mixture`] with [`REFERENCE_SAMPLES`] samples,
//! [`REFERENCE_ITERATIONS`] iterations and seed [`REFERENCE_SEED`]
//! (regenerate with `cargo run --release --example uniform_gm_fit`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REFERENCE_SAMPLES: usize = 1_000_000;
pub const REFERENCE_ITERATIONS: usize = 500;
pub const REFERENCE_SEED: u64 = 0x005e_ed0f_0001;

/// Variance of the uniform density on `[-1/2, 1/2]`.
pub const UNIFORM_VARIANCE: f64 = 1.0 / 12.0;

/// Fitted `(weights, means, variances)` for one mixture order.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformFit {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl UniformFit {
    pub fn order(&self) -> usize {
        self.weights.len()
    }

    /// `Σ ω (φ + θ²)`.
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * (v + m * m))
            .sum()
    }
}

/// Evenly spaced means on `[-(L-1)/(2L), (L-1)/(2L)]`.
pub fn grid_means(order: usize) -> Vec<f64> {
    if order == 1 {
        return vec![0.0];
    }
    let half = (order as f64 - 1.0) / (2.0 * order as f64);
    (0..order)
        .map(|l| -half + 2.0 * half * l as f64 / (order as f64 - 1.0))
        .collect()
}

/// EM fit of weights and variances (means fixed on the grid) to uniform samples,
/// followed by a common variance shift so the mixture's second moment is
/// exactly 1/12.
pub fn fit_uniform_mixture(order: usize, samples: usize, iterations: usize, seed: u64) -> UniformFit {
    assert!(order >= 1 && samples > 0);
    let means = grid_means(order);
    if order == 1 {
        return UniformFit {
            weights: vec![1.0],
            means,
            variances: vec![UNIFORM_VARIANCE],
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut weights = vec![1.0 / order as f64; order];
    let spacing = 1.0 / order as f64;
    let mut variances = vec![spacing * spacing / 4.0; order];
    let mut resp = vec![0.0; order];

    for _ in 0..iterations {
        let mut mass = vec![0.0; order];
        let mut sq = vec![0.0; order];
        for &x in &xs {
            let mut total = 0.0;
            for l in 0..order {
                let d = x - means[l];
                let r = weights[l] * (-d * d / (2.0 * variances[l])).exp() / variances[l].sqrt();
                resp[l] = r;
                total += r;
            }
            for l in 0..order {
                let r = resp[l] / total;
                let d = x - means[l];
                mass[l] += r;
                sq[l] += r * d * d;
            }
        }
        for l in 0..order {
            weights[l] = mass[l] / samples as f64;
            variances[l] = sq[l] / mass[l];
        }
    }

    let mut fit = UniformFit {
        weights,
        means,
        variances,
    };
    let shift = UNIFORM_VARIANCE - fit.second_moment();
    for v in &mut fit.variances {
        *v += shift;
    }
    fit
}

macro_rules! fit {
    ([$($w:expr),*], [$($v:expr),*]) => {
        (&[$($w),*], &[$($v),*])
    };
}

type StoredFit = (&'static [f64], &'static [f64]);

/// `(weights, variances)` for orders 1..=8; means come from [`grid_means`].
pub const UNIFORM_FIT: [StoredFit; 8] = [
    fit!([1.0], [0.08333333333333333]),
    fit!(
        [0.49967833350627555, 0.5003216664937251],
        [0.020814815765599216, 0.02085182709046113]
    ),
    fit!(
        [0.29883225887608433, 0.40197721997757313, 0.2991905211460489],
        [0.012533487661648943, 0.02335963429080881, 0.01253684936110911]
    ),
    fit!(
        [
            0.2301614125674832,
            0.2700978746736156,
            0.26865302767893556,
            0.2310876850798479
        ],
        [
            0.007197276823914688,
            0.0125585957351567,
            0.012442993291695221,
            0.007186721734045787
        ]
    ),
    fit!(
        [
            0.17608167600844754,
            0.24098565833155491,
            0.1653313816111412,
            0.24118340993285484,
            0.17641787411575133
        ],
        [
            0.004894719415863658,
            0.009751023901439247,
            0.007314590458914159,
            0.009797933373274904,
            0.004888875046381091
        ]
    ),
    fit!(
        [
            0.15031226085782468,
            0.18657210671051902,
            0.16285833483927623,
            0.16285497631973095,
            0.18696744661846249,
            0.1504348746538923
        ],
        [
            0.0034666153415243706,
            0.006403803383714886,
            0.006322686064960073,
            0.006337937936845893,
            0.006489856521565186,
            0.003463719833848694
        ]
    ),
    fit!(
        [
            0.12472895196876498,
            0.17275659120086853,
            0.11369799872056138,
            0.1776592302225661,
            0.1133199421071974,
            0.1723626679540118,
            0.12547461782584649
        ],
        [
            0.002623780085743124,
            0.00531491330402334,
            0.004303032450371711,
            0.006357320689037857,
            0.004180249410005748,
            0.005250488385776747,
            0.0026199030786197034
        ]
    ),
    fit!(
        [
            0.11153755335801777,
            0.14335349504476305,
            0.11465385311473668,
            0.1289057186979528,
            0.13332126964285881,
            0.11265805464051473,
            0.143677340962842,
            0.1118927145381229
        ],
        [
            0.002062395624723637,
            0.0038552411712518284,
            0.0035637979650194385,
            0.004278010813041565,
            0.004455200069822683,
            0.0035681935360244795,
            0.0038445537104939585,
            0.002057114255985498
        ]
    ),
];

/// Stored fit for `order <= 8`; larger orders are fitted on demand with a
/// reduced sample budget.
pub fn uniform_fit(order: usize) -> UniformFit {
    assert!(order >= 1);
    match UNIFORM_FIT.get(order - 1) {
        Some((w, v)) => UniformFit {
            weights: w.to_vec(),
            means: grid_means(order),
            variances: v.to_vec(),
        },
        None => fit_uniform_mixture(order, 100_000, 200, REFERENCE_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_means_are_symmetric_and_span_the_interval() {
        assert_eq!(grid_means(1), vec![0.0]);
        let g = grid_means(3);
        assert!((g[0] + 1.0 / 3.0).abs() < 1e-15 && g[1].abs() < 1e-15 && (g[2] - 1.0 / 3.0).abs() < 1e-15);
        let g = grid_means(4);
        assert!((g[0] + 0.375).abs() < 1e-15 && (g[3] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn stored_fits_match_the_uniform_second_moment() {
        for order in 1..=8 {
            let fit = uniform_fit(order);
            assert_eq!(fit.order(), order);
            assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(fit.variances.iter().all(|&v| v > 0.0));
            assert!((fit.second_moment() - UNIFORM_VARIANCE).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn stored_fits_agree_with_a_reduced_refit() {
        for order in [2, 3, 4] {
            let refit = fit_uniform_mixture(order, 40_000, 150, 7);
            let stored = uniform_fit(order);
            for l in 0..order {
                assert!(
                    (refit.weights[l] - stored.weights[l]).abs() < 0.03,
                    "order {order} weight {l}"
                );
                let rel = (refit.variances[l] - stored.variances[l]).abs() / stored.variances[l];
                assert!(rel < 0.15, "order {order} variance {l}: {rel}");
            }
        }
    }
}
