//! Prints the stored uniform-fit table.

use emgm::em::uniform_fit::{fit_uniform_mixture, REFERENCE_ITERATIONS, REFERENCE_SAMPLES, REFERENCE_SEED};

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn main() {
    for order in 1..=8 {
        let fit = fit_uniform_mixture(order, REFERENCE_SAMPLES, REFERENCE_ITERATIONS, REFERENCE_SEED);
        println!("    fit!([{}], [{}]),", list(&fit.weights), list(&fit.variances));
    }
}
