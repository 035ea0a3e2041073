mod common;

use common::{normal_pdf, posterior_by_quadrature, random_prior, rng};
use emgm::{gaussian_product, input_moments, input_posterior, output_moments, GmPrior, NoiseModel};
use rand::Rng;

#[test]
fn gaussian_product_matches_pointwise_pdfs() {
    let mut r = rng(11);
    for _ in 0..50 {
        let (a, va, b, vb) = (
            r.random_range(-3.0..3.0),
            r.random_range(0.1..3.0),
            r.random_range(-3.0..3.0),
            r.random_range(0.1..3.0),
        );
        let g = gaussian_product(a, va, b, vb).unwrap();
        for _ in 0..50 {
            let x: f64 = r.random_range(-4.0..4.0);
            let lhs = normal_pdf(x, a, va) * normal_pdf(x, b, vb);
            let rhs = g.log_scale.exp() * normal_pdf(x, g.mean, g.var);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn posterior_moments_match_quadrature() {
    let mut r = rng(12);
    for trial in 0..60 {
        let order = 1 + trial % 4;
        let prior = random_prior(&mut r, order);
        let r_hat: f64 = r.random_range(-3.0..3.0);
        let mu_r: f64 = r.random_range(0.05..2.0);
        let stats = input_posterior(&[r_hat], &[mu_r], &prior).unwrap();
        let (x, v) = input_moments(&stats);
        let comps: Vec<(f64, f64, f64)> = prior
            .components()
            .iter()
            .map(|c| (c.weight, c.mean, c.variance))
            .collect();
        let (pi, mean, var) = posterior_by_quadrature(r_hat, mu_r, prior.lambda(), &comps);
        assert!((stats.pi()[0] - pi).abs() < 1e-6, "pi {} vs {pi}", stats.pi()[0]);
        assert!((x[0] - mean).abs() < 1e-6, "mean {} vs {mean}", x[0]);
        assert!((v[0] - var).abs() < 1e-6, "var {} vs {var}", v[0]);
    }
}

#[test]
fn support_probability_of_a_three_component_prior() {
    let mut r = rng(13);
    let prior = random_prior(&mut r, 3);
    let comps: Vec<(f64, f64, f64)> = prior
        .components()
        .iter()
        .map(|c| (c.weight, c.mean, c.variance))
        .collect();
    let r_hat: Vec<f64> = (0..20).map(|_| r.random_range(-4.0..4.0)).collect();
    let mu_r = vec![0.3; 20];
    let stats = input_posterior(&r_hat, &mu_r, &prior).unwrap();
    for (n, &rh) in r_hat.iter().enumerate() {
        let (pi, _, _) = posterior_by_quadrature(rh, 0.3, prior.lambda(), &comps);
        assert!((stats.pi()[n] - pi).abs() < 1e-6);
    }
}

#[test]
fn single_component_reduces_to_bernoulli_gaussian() {
    // closed-form Bernoulli-Gaussian posterior
    let mut r = rng(14);
    for _ in 0..100 {
        let (lambda, theta, phi) = (
            r.random_range(0.05..0.95),
            r.random_range(-2.0..2.0),
            r.random_range(0.1..3.0),
        );
        let (rh, mr): (f64, f64) = (r.random_range(-3.0..3.0), r.random_range(0.1..2.0));
        let prior = GmPrior::bernoulli_gaussian(lambda, theta, phi).unwrap();
        let s = input_posterior(&[rh], &[mr], &prior).unwrap();
        let on = lambda * normal_pdf(rh, theta, phi + mr);
        let off = (1.0 - lambda) * normal_pdf(rh, 0.0, mr);
        let pi = on / (on + off);
        let gamma = (rh / mr + theta / phi) / (1.0 / mr + 1.0 / phi);
        let nu = 1.0 / (1.0 / mr + 1.0 / phi);
        assert!((s.pi()[0] - pi).abs() < 1e-13);
        assert!((s.gamma(0)[0] - gamma).abs() < 1e-13);
        assert!((s.nu(0)[0] - nu).abs() < 1e-13);
        assert_eq!(s.beta_bar(0), &[1.0]);
        assert!((s.zeta(0) - (on + off)).abs() < 1e-13 * (on + off));
    }
}

#[test]
fn output_moments_match_gaussian_conditioning() {
    let mut r = rng(15);
    let m = 40;
    let y: Vec<f64> = (0..m).map(|_| r.random_range(-3.0..3.0)).collect();
    let p: Vec<f64> = (0..m).map(|_| r.random_range(-3.0..3.0)).collect();
    let mp: Vec<f64> = (0..m).map(|_| r.random_range(0.01..2.0)).collect();
    let psi = 0.37;
    let (z, mz) = output_moments(&y, &p, &mp, &NoiseModel::new(psi).unwrap()).unwrap();
    for i in 0..m {
        // z ~ N(p, mp), y | z ~ N(z, psi)
        let comps = [(1.0, p[i], mp[i])];
        let (_, mean, var) = posterior_by_quadrature(y[i], psi, 1.0, &comps);
        assert!((z[i] - mean).abs() < 1e-6);
        assert!((mz[i] - var).abs() < 1e-6);
        assert!(mz[i] <= mp[i].min(psi));
    }
}
