//! Closed-form order-2 approximations of the expected ZF SNR and the
//! ergodic sum spectral efficiency, plus a Monte-Carlo oracle for the
//! moment identities they rest on.
//!
//! Taking expectations of the order-2 series, the first two trace terms
//! cancel because `E{HH^H} = Delta`, leaving
//!
//! ```text
//! E{HH^H Delta^{-1} HH^H} = M^2 Delta^{-1} + D,   D = diag(d_1, ..., d_L)
//! d_l = sum_r (Delta^{-1})_{rr} Tr[R_r R_l]
//! E{SNR_l} ~ P beta_l / (sigma^2 (1/L) Tr[(M^2 Delta^{-1} + D) Delta^{-2}])
//! ```
//!
//! where the expectation of the ratio is replaced by the ratio with the
//! expected denominator. The cross terms of `D` drop the off-diagonal
//! entries of `Delta^{-1}`, so every entry point here insists on a diagonal
//! `Delta`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{ArrayGeometry, ChannelSampler, Drop};
use crate::error::{Error, Result};
use crate::linalg::{gram, hermitian_inverse, inverse, trace_of_product, ComplexMatrix};
use crate::stats::{Estimate, MeanAccumulator};

/// Relative spread above which per-UE SNRs count as different.
pub const UNIFORM_SNR_TOLERANCE: f64 = 1e-9;

/// How the sum spectral efficiency was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumSeForm {
    /// `L log2(1 + E{SNR})` with the common per-UE value.
    Common,
    /// `sum_l log2(1 + E{SNR_l})`, used when link gains differ.
    PerUe,
}

impl SumSeForm {
    pub fn name(&self) -> &'static str {
        match self {
            SumSeForm::Common => "common",
            SumSeForm::PerUe => "per_ue",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub d_values: Vec<f64>,
    /// `D = diag(d_l)`.
    pub correction: ComplexMatrix,
    /// Linear.
    pub expected_snr: Vec<f64>,
    /// bits/s/Hz
    pub sum_se: f64,
    pub sum_se_form: SumSeForm,
}

fn check_diagonal(delta: &ComplexMatrix) -> Result<()> {
    if !delta.is_square() {
        return Err(Error::DimensionMismatch("Delta must be square"));
    }
    let off = delta.off_diagonal_max_abs();
    if off > 0.0 {
        return Err(Error::NonDiagonalMean(off));
    }
    if delta.diagonal_re().iter().any(|&d| !(d != 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter("Delta must have a nonzero finite diagonal"));
    }
    Ok(())
}

/// `d_l = sum_r (Delta^{-1})_{rr} Tr[R_r R_l]`, including `r = l`.
pub fn compute_d(delta: &ComplexMatrix, covariances: &[ComplexMatrix]) -> Result<Vec<f64>> {
    check_diagonal(delta)?;
    let l = delta.rows();
    if covariances.len() != l {
        return Err(Error::DimensionMismatch("one covariance per UE"));
    }
    let m = covariances[0].rows();
    if covariances.iter().any(|r| r.rows() != m || r.cols() != m) {
        return Err(Error::DimensionMismatch("covariances must all be M x M"));
    }
    let inv_diag: Vec<f64> = delta.diagonal_re().iter().map(|d| 1.0 / d).collect();

    let mut cross = ComplexMatrix::zeros(l, l);
    for a in 0..l {
        for b in a..l {
            let t = trace_of_product(&covariances[a], &covariances[b]).re;
            cross[(a, b)].re = t;
            cross[(b, a)].re = t;
        }
    }
    Ok((0..l).map(|ue| (0..l).map(|r| inv_diag[r] * cross[(r, ue)].re).sum()).collect())
}

/// `Tr[(M^2 Delta^{-1} + D) Delta^{-2}]` evaluated with matrix products.
pub fn denominator_trace(delta: &ComplexMatrix, d_values: &[f64], num_antennas: usize) -> Result<f64> {
    check_diagonal(delta)?;
    if d_values.len() != delta.rows() {
        return Err(Error::DimensionMismatch("one d value per UE"));
    }
    let m2 = (num_antennas * num_antennas) as f64;
    let delta_inv = inverse(delta)?;
    let inner = &delta_inv.scale_real(m2) + &ComplexMatrix::from_diagonal(d_values);
    Ok(inner.matmul(&delta_inv).matmul(&delta_inv).trace().re)
}

/// Same trace for a diagonal `Delta`: `sum_l (M^2 / delta_l + d_l) / delta_l^2`.
/// With `Delta = M I` this is `(L M + sum_l d_l) / M^2`.
pub fn denominator_trace_diagonal(delta_diag: &[f64], d_values: &[f64], num_antennas: usize) -> Result<f64> {
    if delta_diag.len() != d_values.len() {
        return Err(Error::DimensionMismatch("one d value per UE"));
    }
    let m2 = (num_antennas * num_antennas) as f64;
    Ok(delta_diag.iter().zip(d_values).map(|(&dl, &d)| (m2 / dl + d) / (dl * dl)).sum())
}

/// `(L M + sum_l d_l) / M^2`, valid only for `Delta = M I`.
pub fn denominator_trace_scaled_identity(d_values: &[f64], num_antennas: usize) -> f64 {
    let m = num_antennas as f64;
    (d_values.len() as f64 * m + d_values.iter().sum::<f64>()) / (m * m)
}

/// Closed-form expected SNR per UE (linear).
pub fn expected_snr_approx(
    delta: &ComplexMatrix,
    d_values: &[f64],
    betas: &[f64],
    p_eirp: f64,
    noise_power: f64,
    num_antennas: usize,
) -> Result<Vec<f64>> {
    if betas.len() != delta.rows() {
        return Err(Error::DimensionMismatch("one link gain per UE"));
    }
    if !(noise_power > 0.0) {
        return Err(Error::InvalidParameter("noise power must be positive"));
    }
    let trace = denominator_trace(delta, d_values, num_antennas)?;
    let per_ue_noise = trace / betas.len() as f64;
    Ok(betas.iter().map(|b| p_eirp * b / (noise_power * per_ue_noise)).collect())
}

/// `L log2(1 + E{SNR})`; refuses per-UE values that are not common.
pub fn sum_se_approx(expected_snr: &[f64]) -> Result<f64> {
    let (min, max) = expected_snr
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if expected_snr.is_empty() {
        return Err(Error::DimensionMismatch("no UEs"));
    }
    if max - min > UNIFORM_SNR_TOLERANCE * max.abs().max(1.0) {
        return Err(Error::NonUniformBeta { min, max });
    }
    Ok(expected_snr.len() as f64 * libm::log2(1.0 + expected_snr[0]))
}

/// `sum_l log2(1 + E{SNR_l})`.
pub fn sum_se_approx_per_ue(expected_snr: &[f64]) -> f64 {
    expected_snr.iter().map(|s| libm::log2(1.0 + s)).sum()
}

/// The common form when every UE has the same expected SNR, otherwise
/// the per-UE sum.
pub fn sum_se_auto(expected_snr: &[f64]) -> Result<(f64, SumSeForm)> {
    match sum_se_approx(expected_snr) {
        Ok(r) => Ok((r, SumSeForm::Common)),
        Err(Error::NonUniformBeta { .. }) => Ok((sum_se_approx_per_ue(expected_snr), SumSeForm::PerUe)),
        Err(e) => Err(e),
    }
}

/// Everything for one drop: `d_l`, `D`, expected SNRs and the sum SE in
/// whichever form the link gains allow.
pub fn summarize(
    delta: &ComplexMatrix,
    covariances: &[ComplexMatrix],
    betas: &[f64],
    p_eirp: f64,
    noise_power: f64,
) -> Result<MomentSummary> {
    let d_values = compute_d(delta, covariances)?;
    let m = covariances[0].rows();
    let expected_snr = expected_snr_approx(delta, &d_values, betas, p_eirp, noise_power, m)?;
    let (sum_se, sum_se_form) = sum_se_auto(&expected_snr)?;
    Ok(MomentSummary {
        correction: ComplexMatrix::from_diagonal(&d_values),
        d_values,
        expected_snr,
        sum_se,
        sum_se_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleQuantity {
    /// Sample mean of `HH^H` against `M I`.
    MeanGram,
    /// `E{HH^H Delta^{-1} HH^H}` against `M^2 Delta^{-1} + D`.
    FourthMoment,
    /// `E{|h_l h_l^H|^2}` against `M^2 + Tr[R_l^2]`.
    NormFourth,
    /// `3 Tr[Delta^{-1}] - 3 Tr[HH^H Delta^{-2}]` against 0.
    TraceCancellation,
    /// `E{Tr[(HH^H)^{-1}]}` against the closed-form denominator trace.
    /// Reported, not expected to match within noise.
    TraceInverse,
}

impl OracleQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            OracleQuantity::MeanGram => "mean_gram",
            OracleQuantity::FourthMoment => "fourth_moment",
            OracleQuantity::NormFourth => "norm_fourth",
            OracleQuantity::TraceCancellation => "trace_cancellation",
            OracleQuantity::TraceInverse => "trace_inverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    pub quantity: OracleQuantity,
    pub row: usize,
    pub col: usize,
    pub part: Part,
    pub estimate: Estimate,
    pub analytic: f64,
}

impl OracleCheck {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.analytic)
    }

    pub fn label(&self) -> String {
        let part = match self.part {
            Part::Re => "re",
            Part::Im => "im",
        };
        format!("{}[{},{}].{}", self.quantity.name(), self.row, self.col, part)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
    pub realizations: usize,
    /// Realizations whose Gram matrix could not be inverted; they only drop
    /// out of the trace-inverse estimate.
    pub singular: usize,
}

impl OracleReport {
    pub fn of(&self, quantity: OracleQuantity) -> impl Iterator<Item = &OracleCheck> + '_ {
        self.checks.iter().filter(move |c| c.quantity == quantity)
    }

    pub fn max_abs_z(&self, quantity: OracleQuantity) -> f64 {
        self.of(quantity).map(|c| c.z_score().abs()).fold(0.0, f64::max)
    }

    /// `|E{Tr[(HH^H)^{-1}]} - closed form| / E{Tr[(HH^H)^{-1}]}`.
    pub fn laplace_relative_gap(&self) -> f64 {
        self.of(OracleQuantity::TraceInverse)
            .map(|c| libm::fabs(c.estimate.mean - c.analytic) / c.estimate.mean)
            .next()
            .unwrap_or(f64::NAN)
    }
}

struct ComplexAcc {
    re: MeanAccumulator,
    im: MeanAccumulator,
}

impl ComplexAcc {
    fn new() -> Self {
        ComplexAcc {
            re: MeanAccumulator::new(),
            im: MeanAccumulator::new(),
        }
    }
}

/// Monte-Carlo estimates of every intermediate moment for one drop.
///
/// Meant for small instances; each realization costs a few `L x L`
/// products on top of the channel draw.
pub fn moment_oracle<R: Rng + ?Sized>(
    drop: &Drop,
    geom: &ArrayGeometry,
    n_realizations: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter("n_realizations must be >= 1"));
    }
    let sampler = ChannelSampler::new(drop, geom)?;
    let covs = sampler.covariances();
    let l = sampler.num_ues();
    let m = sampler.num_antennas();
    let delta = &covs.mean_gram;
    let delta_inv = inverse(delta)?;
    let delta_inv2 = delta_inv.matmul(&delta_inv);
    let t1 = 3.0 * delta_inv.trace().re;

    let mut gram_acc: Vec<ComplexAcc> = (0..l * l).map(|_| ComplexAcc::new()).collect();
    let mut fourth_acc: Vec<ComplexAcc> = (0..l * l).map(|_| ComplexAcc::new()).collect();
    let mut norm4_acc = alloc::vec![MeanAccumulator::new(); l];
    let mut cancel_acc = MeanAccumulator::new();
    let mut trinv_acc = MeanAccumulator::new();
    let mut singular = 0;

    for _ in 0..n_realizations {
        let g = gram(&sampler.draw(rng));
        let fourth = g.matmul(&delta_inv).matmul(&g);
        for i in 0..l {
            for j in 0..l {
                let k = i * l + j;
                gram_acc[k].re.push(g[(i, j)].re);
                gram_acc[k].im.push(g[(i, j)].im);
                fourth_acc[k].re.push(fourth[(i, j)].re);
                fourth_acc[k].im.push(fourth[(i, j)].im);
            }
            norm4_acc[i].push(g[(i, i)].re * g[(i, i)].re);
        }
        cancel_acc.push(t1 - 3.0 * trace_of_product(&g, &delta_inv2).re);
        match hermitian_inverse(&g) {
            Ok(inv) => trinv_acc.push(inv.trace().re),
            Err(Error::SingularMatrix { .. }) => singular += 1,
            Err(e) => return Err(e),
        }
    }

    let d_values = compute_d(delta, &covs.per_ue)?;
    let fourth_analytic = &delta_inv.scale_real((m * m) as f64) + &ComplexMatrix::from_diagonal(&d_values);

    let mut checks = Vec::new();
    let mut push_matrix = |quantity, accs: &[ComplexAcc], analytic: &ComplexMatrix| {
        for i in 0..l {
            for j in 0..l {
                let a = &accs[i * l + j];
                for (part, acc, value) in [
                    (Part::Re, &a.re, analytic[(i, j)].re),
                    (Part::Im, &a.im, analytic[(i, j)].im),
                ] {
                    checks.push(OracleCheck {
                        quantity,
                        row: i,
                        col: j,
                        part,
                        estimate: Estimate::from(acc),
                        analytic: value,
                    });
                }
            }
        }
    };
    push_matrix(OracleQuantity::MeanGram, &gram_acc, delta);
    push_matrix(OracleQuantity::FourthMoment, &fourth_acc, &fourth_analytic);

    for (ue, acc) in norm4_acc.iter().enumerate() {
        let r = &covs.per_ue[ue];
        checks.push(OracleCheck {
            quantity: OracleQuantity::NormFourth,
            row: ue,
            col: ue,
            part: Part::Re,
            estimate: Estimate::from(acc),
            analytic: (m * m) as f64 + trace_of_product(r, r).re,
        });
    }
    checks.push(OracleCheck {
        quantity: OracleQuantity::TraceCancellation,
        row: 0,
        col: 0,
        part: Part::Re,
        estimate: Estimate::from(&cancel_acc),
        analytic: 0.0,
    });
    checks.push(OracleCheck {
        quantity: OracleQuantity::TraceInverse,
        row: 0,
        col: 0,
        part: Part::Re,
        estimate: Estimate::from(&trinv_acc),
        analytic: denominator_trace(delta, &d_values, m)?,
    });

    Ok(OracleReport {
        checks,
        realizations: n_realizations,
        singular,
    })
}
