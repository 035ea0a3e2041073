//! Measurement operators: forward/adjoint products plus the elementwise-squared
//! products that GAMP's variance recursions need.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    RowSampledOrthoTransform,
}

/// Real `m x n` linear operator. Immutable once built.
#[derive(Clone)]
pub struct LinearOperator<T: Scalar> {
    rows: usize,
    cols: usize,
    repr: Repr<T>,
}

#[derive(Clone)]
enum Repr<T: Scalar> {
    // row-major
    Dense(Vec<T>),
    Dct(RowSampledDct<T>),
}

impl<T: Scalar> fmt::Debug for LinearOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("kind", &self.kind())
            .finish()
    }
}

impl<T: Scalar> LinearOperator<T> {
    /// Dense operator from row-major storage.
    pub fn dense(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSpec(format!(
                "operator dimensions must be positive, got {rows}x{cols}"
            )));
        }
        check_len("dense operator storage", rows * cols, entries.len())?;
        Ok(Self {
            rows,
            cols,
            repr: Repr::Dense(entries),
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(m * n);
        for row in rows {
            check_len("dense operator row", n, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::dense(m, n, entries)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::one();
        }
        Self::dense(n, n, entries)
    }

    /// Rows `selected` of the orthonormal DCT-II of size `n`, applied in O(n log n).
    pub fn row_sampled_dct(n: usize, selected: Vec<usize>) -> Result<Self> {
        let dct = RowSampledDct::new(n, selected)?;
        Ok(Self {
            rows: dct.selected.len(),
            cols: n,
            repr: Repr::Dct(dct),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense(_) => OperatorKind::Dense,
            Repr::Dct(_) => OperatorKind::RowSampledOrthoTransform,
        }
    }

    /// Selected transform rows, for the row-sampled kind.
    pub fn selected_rows(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Dense(_) => None,
            Repr::Dct(d) => Some(&d.selected),
        }
    }

    /// `A x`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("forward input", self.cols, x.len())?;
        Ok(match &self.repr {
            Repr::Dense(a) => dense_mul(a, self.cols, x),
            Repr::Dct(d) => d.forward(x),
        })
    }

    /// `Aᵀ s`.
    pub fn adjoint(&self, s: &[T]) -> Result<Vec<T>> {
        check_len("adjoint input", self.rows, s.len())?;
        Ok(match &self.repr {
            Repr::Dense(a) => dense_mul_transpose(a, self.cols, s),
            Repr::Dct(d) => d.adjoint(s),
        })
    }

    /// `|A|² μ` with `|A|²` the elementwise square. The row-sampled kind uses
    /// the uniform approximation `|A_mn|² ≈ 1/n`.
    pub fn squared_forward(&self, mu: &[T]) -> Result<Vec<T>> {
        check_len("squared_forward input", self.cols, mu.len())?;
        check_nonnegative("squared_forward input", mu)?;
        Ok(match &self.repr {
            Repr::Dense(a) => dense_mul_squared(a, self.cols, mu),
            Repr::Dct(_) => {
                let avg = mu.iter().copied().sum::<T>() / T::lit(self.cols as f64);
                vec![avg; self.rows]
            }
        })
    }

    /// `|A|²ᵀ μ`, same approximation as [`Self::squared_forward`] for the row-sampled kind.
    pub fn squared_adjoint(&self, mu: &[T]) -> Result<Vec<T>> {
        check_len("squared_adjoint input", self.rows, mu.len())?;
        check_nonnegative("squared_adjoint input", mu)?;
        Ok(match &self.repr {
            Repr::Dense(a) => dense_mul_squared_transpose(a, self.cols, mu),
            Repr::Dct(_) => {
                let avg = mu.iter().copied().sum::<T>() / T::lit(self.cols as f64);
                vec![avg; self.cols]
            }
        })
    }

    /// `(A x, |A|² μ)` in one pass over the entries.
    pub fn forward_pair(&self, x: &[T], mu: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_len("forward input", self.cols, x.len())?;
        check_len("squared_forward input", self.cols, mu.len())?;
        check_nonnegative("squared_forward input", mu)?;
        match &self.repr {
            Repr::Dense(a) => Ok(a
                .chunks_exact(self.cols)
                .map(|row| (dot_unrolled(row, x), dot_squared_unrolled(row, mu)))
                .unzip()),
            Repr::Dct(_) => Ok((self.forward(x)?, self.squared_forward(mu)?)),
        }
    }

    /// `(Aᵀ s, |A|²ᵀ μ)` in one pass over the entries.
    pub fn adjoint_pair(&self, s: &[T], mu: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_len("adjoint input", self.rows, s.len())?;
        check_len("squared_adjoint input", self.rows, mu.len())?;
        check_nonnegative("squared_adjoint input", mu)?;
        match &self.repr {
            Repr::Dense(a) => {
                let mut back = vec![T::zero(); self.cols];
                let mut back_sq = vec![T::zero(); self.cols];
                for ((row, &sm), &mm) in a.chunks_exact(self.cols).zip(s).zip(mu) {
                    for ((b, q), &v) in back.iter_mut().zip(back_sq.iter_mut()).zip(row) {
                        *b = *b + v * sm;
                        *q = *q + (v * v) * mm;
                    }
                }
                Ok((back, back_sq))
            }
            Repr::Dct(_) => Ok((self.adjoint(s)?, self.squared_adjoint(mu)?)),
        }
    }

    /// `‖A‖²_F`. Row-sampled orthonormal rows have unit norm, so this is `m`.
    pub fn frobenius_norm_sq(&self) -> T {
        match &self.repr {
            Repr::Dense(a) => a.iter().map(|&v| v * v).sum(),
            Repr::Dct(d) => T::lit(d.selected.len() as f64),
        }
    }

    /// Row-major dense copy of the operator.
    pub fn densify(&self) -> Vec<T> {
        match &self.repr {
            Repr::Dense(a) => a.clone(),
            Repr::Dct(d) => {
                let n = self.cols;
                let mut out = vec![T::zero(); self.rows * n];
                let mut e = vec![T::zero(); n];
                for j in 0..n {
                    e[j] = T::one();
                    let col = d.forward(&e);
                    e[j] = T::zero();
                    for (i, v) in col.into_iter().enumerate() {
                        out[i * n + j] = v;
                    }
                }
                out
            }
        }
    }
}

fn check_nonnegative<T: Scalar>(context: &'static str, v: &[T]) -> Result<()> {
    match v.iter().position(|&x| x < T::zero()) {
        Some(index) => Err(Error::NegativeEntry { context, index }),
        None => Ok(()),
    }
}

// Eight independent accumulators so the compiler can vectorize the reduction.
// Inputs shorter than eight are summed strictly left to right.
pub(crate) fn dot_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s = s + x * y;
    }
    s
}

// Same accumulation order as `dot_unrolled` applied to the squared row.
fn dot_squared_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + (x[i] * x[i]) * y[i];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s = s + (x * x) * y;
    }
    s
}

fn dense_mul_squared<T: Scalar>(entries: &[T], cols: usize, mu: &[T]) -> Vec<T> {
    entries
        .chunks_exact(cols)
        .map(|row| dot_squared_unrolled(row, mu))
        .collect()
}

fn dense_mul_squared_transpose<T: Scalar>(entries: &[T], cols: usize, mu: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for (row, &mm) in entries.chunks_exact(cols).zip(mu) {
        if mm == T::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o = *o + (a * a) * mm;
        }
    }
    out
}

fn dense_mul<T: Scalar>(entries: &[T], cols: usize, x: &[T]) -> Vec<T> {
    entries.chunks_exact(cols).map(|row| dot_unrolled(row, x)).collect()
}

fn dense_mul_transpose<T: Scalar>(entries: &[T], cols: usize, s: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for (row, &sm) in entries.chunks_exact(cols).zip(s) {
        if sm == T::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o = *o + a * sm;
        }
    }
    out
}

/// Orthonormal DCT-II restricted to a subset of its rows, via one complex FFT
/// of length `n` per product (Makhoul's reordering).
#[derive(Clone)]
struct RowSampledDct<T: Scalar> {
    n: usize,
    selected: Vec<usize>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    // e^{-iπk/(2n)}
    twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> RowSampledDct<T> {
    fn new(n: usize, selected: Vec<usize>) -> Result<Self> {
        if n == 0 || selected.is_empty() {
            return Err(Error::InvalidSpec(
                "row-sampled DCT needs n > 0 and at least one row".into(),
            ));
        }
        if let Some(&bad) = selected.iter().find(|&&r| r >= n) {
            return Err(Error::InvalidSpec(format!(
                "row index {bad} out of range for transform size {n}"
            )));
        }
        let mut sorted = selected.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("duplicate DCT row index".into()));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let nf = T::lit(n as f64);
        let twiddles = (0..n)
            .map(|k| {
                let angle = -T::PI() * T::lit(k as f64) / (T::lit(2.0) * nf);
                Complex::new(angle.cos(), angle.sin())
            })
            .collect();
        Ok(Self {
            n,
            selected,
            fft,
            ifft,
            twiddles,
        })
    }

    /// Full orthonormal DCT-II of `x`.
    fn transform(&self, x: &[T]) -> Vec<T> {
        let n = self.n;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let half = n.div_ceil(2);
        for j in 0..half {
            buf[j].re = x[2 * j];
        }
        for j in 0..n / 2 {
            buf[n - 1 - j].re = x[2 * j + 1];
        }
        self.fft.process(&mut buf);
        let nf = T::lit(n as f64);
        let s0 = (T::one() / nf).sqrt();
        let sk = (T::lit(2.0) / nf).sqrt();
        buf.iter()
            .zip(&self.twiddles)
            .enumerate()
            .map(|(k, (v, w))| {
                let re = (v * w).re;
                if k == 0 {
                    re * s0
                } else {
                    re * sk
                }
            })
            .collect()
    }

    /// Inverse (= transpose) of the orthonormal DCT-II.
    fn inverse(&self, y: &[T]) -> Vec<T> {
        let n = self.n;
        let nf = T::lit(n as f64);
        let s0 = nf.sqrt();
        let sk = (nf / T::lit(2.0)).sqrt();
        let unnormalized = |k: usize| -> T {
            if k == 0 {
                y[0] * s0
            } else if k < n {
                y[k] * sk
            } else {
                T::zero()
            }
        };
        let mut buf: Vec<Complex<T>> = (0..n)
            .map(|k| {
                let c = Complex::new(unnormalized(k), -unnormalized(n - k));
                c * self.twiddles[k].conj()
            })
            .collect();
        self.ifft.process(&mut buf);
        let mut x = vec![T::zero(); n];
        let half = n.div_ceil(2);
        for j in 0..half {
            x[2 * j] = buf[j].re / nf;
        }
        for j in 0..n / 2 {
            x[2 * j + 1] = buf[n - 1 - j].re / nf;
        }
        x
    }

    fn forward(&self, x: &[T]) -> Vec<T> {
        let full = self.transform(x);
        self.selected.iter().map(|&r| full[r]).collect()
    }

    fn adjoint(&self, s: &[T]) -> Vec<T> {
        let mut scattered = vec![T::zero(); self.n];
        for (&r, &v) in self.selected.iter().zip(s) {
            scattered[r] = v;
        }
        self.inverse(&scattered)
    }
}
