//! Truncated Neumann-series approximation of `(HH^H)^{-1}`.
//!
//! Writing `HH^H = Delta + Xi` with `Delta = E{HH^H}`,
//!
//! ```text
//! (HH^H)^{-1} ~ sum_{n=0}^{N} (-Delta^{-1} Xi)^n Delta^{-1}
//! ```
//!
//! which converges when the spectral radius of `Delta^{-1} Xi` is below one.
//! Divergence is not an error: it shows up in [`error_magnitude`] and
//! [`relative_frobenius_error`], which are reported whatever their size.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{gram, inverse, ComplexMatrix};

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeumannConfig {
    order: usize,
}

impl NeumannConfig {
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter("Neumann order must be <= 8"));
        }
        Ok(NeumannConfig { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// `-Delta^{-1} (G - Delta)` together with `Delta^{-1}`.
fn series_ratio(gram: &ComplexMatrix, delta: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !delta.is_square() || gram.rows() != delta.rows() || !gram.is_square() {
        return Err(Error::DimensionMismatch("Gram and mean matrices must be L x L"));
    }
    let delta_inv = inverse(delta)?;
    let xi = gram - delta;
    let ratio = delta_inv.matmul(&xi).scale_real(-1.0);
    Ok((ratio, delta_inv))
}

/// Series for a channel `H`.
pub fn neumann_inverse(h: &ComplexMatrix, delta: &ComplexMatrix, config: NeumannConfig) -> Result<ComplexMatrix> {
    neumann_inverse_from_gram(&gram(h), delta, config)
}

/// Power form: accumulates `X^n` explicitly and multiplies each by
/// `Delta^{-1}`.
pub fn neumann_inverse_from_gram(
    gram: &ComplexMatrix,
    delta: &ComplexMatrix,
    config: NeumannConfig,
) -> Result<ComplexMatrix> {
    let (ratio, delta_inv) = series_ratio(gram, delta)?;
    let mut power = ComplexMatrix::identity(gram.rows());
    let mut sum = delta_inv.clone();
    for _ in 1..=config.order {
        power = power.matmul(&ratio);
        sum = &sum + &power.matmul(&delta_inv);
    }
    Ok(sum)
}

/// Horner form: `S_0 = Delta^{-1}`, `S_n = Delta^{-1} + X S_{n-1}`.
pub fn neumann_inverse_horner(
    gram: &ComplexMatrix,
    delta: &ComplexMatrix,
    config: NeumannConfig,
) -> Result<ComplexMatrix> {
    let (ratio, delta_inv) = series_ratio(gram, delta)?;
    let mut acc = delta_inv.clone();
    for _ in 1..=config.order {
        acc = &delta_inv + &ratio.matmul(&acc);
    }
    Ok(acc)
}

/// Closed order-2 form
/// `3 Delta^{-1} - 3 Delta^{-1} G Delta^{-1} + Delta^{-1} G Delta^{-1} G Delta^{-1}`.
pub fn neumann_order2(h: &ComplexMatrix, delta: &ComplexMatrix) -> Result<ComplexMatrix> {
    neumann_order2_from_gram(&gram(h), delta)
}

pub fn neumann_order2_from_gram(gram: &ComplexMatrix, delta: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !delta.is_square() || gram.rows() != delta.rows() || !gram.is_square() {
        return Err(Error::DimensionMismatch("Gram and mean matrices must be L x L"));
    }
    let delta_inv = inverse(delta)?;
    let z = delta_inv.matmul(gram).matmul(&delta_inv);
    let zg = z.matmul(gram).matmul(&delta_inv);
    let three = delta_inv.scale_real(3.0);
    let out = &three - &z.scale_real(3.0);
    Ok(&out + &zg)
}

/// Order-2 expansion in terms of `Xi = G - Delta`:
/// `Delta^{-1} - Delta^{-1} Xi Delta^{-1} + Delta^{-1} Xi Delta^{-1} Xi Delta^{-1}`.
pub fn neumann_order2_expanded(gram: &ComplexMatrix, delta: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !delta.is_square() || gram.rows() != delta.rows() || !gram.is_square() {
        return Err(Error::DimensionMismatch("Gram and mean matrices must be L x L"));
    }
    let delta_inv = inverse(delta)?;
    let xi = gram - delta;
    let first = delta_inv.matmul(&xi).matmul(&delta_inv);
    let second = first.matmul(&xi).matmul(&delta_inv);
    let out = &delta_inv - &first;
    Ok(&out + &second)
}

/// How the exact inverse is compared with the approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMetric {
    /// `Tr[I - T A^{-1}]`.
    #[default]
    RightDivision,
    /// `sum_l (1 - T_ll / A_ll)`.
    DiagonalRatio,
}

impl ErrorMetric {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorMetric::RightDivision => "right_division",
            ErrorMetric::DiagonalRatio => "diagonal_ratio",
        }
    }

    pub fn definition(&self) -> &'static str {
        match self {
            ErrorMetric::RightDivision => "alpha = Tr[I - inv(HH^H) * inv(approx)]",
            ErrorMetric::DiagonalRatio => "alpha = sum_l (1 - inv(HH^H)_ll / approx_ll)",
        }
    }
}

/// Error magnitude `alpha` under the default right-division reading.
pub fn error_magnitude(true_inv: &ComplexMatrix, approx: &ComplexMatrix) -> Result<f64> {
    error_magnitude_with(ErrorMetric::RightDivision, true_inv, approx)
}

/// Returns [`Error::NotEvaluable`] when the approximation cannot be divided
/// by.
pub fn error_magnitude_with(metric: ErrorMetric, true_inv: &ComplexMatrix, approx: &ComplexMatrix) -> Result<f64> {
    if true_inv.rows() != approx.rows() || true_inv.cols() != approx.cols() || !approx.is_square() {
        return Err(Error::DimensionMismatch("alpha needs two L x L matrices"));
    }
    let l = approx.rows() as f64;
    match metric {
        ErrorMetric::RightDivision => {
            let approx_inv = inverse(approx).map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::NotEvaluable,
                other => other,
            })?;
            let tr = crate::linalg::trace_of_product(true_inv, &approx_inv);
            // Tr of a product of two Hermitian matrices is real
            debug_assert!(tr.im.abs() <= 1e-9 * tr.norm().max(1.0), "alpha has imaginary part {}", tr.im);
            Ok(l - tr.re)
        }
        ErrorMetric::DiagonalRatio => {
            let mut alpha = 0.0;
            for i in 0..approx.rows() {
                let a = approx[(i, i)];
                if a.norm() == 0.0 || !a.norm().is_finite() {
                    return Err(Error::NotEvaluable);
                }
                alpha += 1.0 - (true_inv[(i, i)] / a).re;
            }
            Ok(alpha)
        }
    }
}

/// `||approx - true||_F / ||true||_F`.
pub fn relative_frobenius_error(true_inv: &ComplexMatrix, approx: &ComplexMatrix) -> f64 {
    (approx - true_inv).frobenius_norm() / true_inv.frobenius_norm()
}

/// Series for every order `0..=max_order` at once (used to compare orders
/// on the same sample).
pub fn neumann_partial_sums(gram: &ComplexMatrix, delta: &ComplexMatrix, max_order: usize) -> Result<Vec<ComplexMatrix>> {
    let config = NeumannConfig::new(max_order)?;
    let (ratio, delta_inv) = series_ratio(gram, delta)?;
    let mut out = Vec::with_capacity(config.order + 1);
    let mut term = delta_inv.clone();
    let mut sum = delta_inv;
    out.push(sum.clone());
    for _ in 1..=config.order {
        term = ratio.matmul(&term);
        sum = &sum + &term;
        out.push(sum.clone());
    }
    Ok(out)
}
