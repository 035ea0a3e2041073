use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the estimators are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + rustfft::FftNum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln N(x; mean, var)`.
    fn ln_normal_pdf(x: Self, mean: Self, var: Self) -> Self {
        let d = x - mean;
        let two = Self::lit(2.0);
        -(d * d) / (two * var) - (two * Self::PI() * var).ln() / two
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln Σ exp(v_i)` with max subtraction. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum()
}

pub(crate) fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_offsets() {
        let v = [1000.0_f64, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn ln_normal_pdf_matches_closed_form() {
        let v = f64::ln_normal_pdf(1.0, 0.0, 2.0);
        let want = (-(1.0 / 4.0_f64)).exp() / (2.0 * std::f64::consts::PI * 2.0).sqrt();
        assert!((v.exp() - want).abs() < 1e-15);
        let v32 = f32::ln_normal_pdf(0.0, 0.0, 1.0);
        assert!((v32 - (-0.918_938_5)).abs() < 1e-6);
    }
}
