//! Exact ZF precoding and the simulated SNR / ergodic sum spectral
//! efficiency.
//!
//! With `G = H^H (HH^H)^{-1}` and uniform power, every UE sees the same
//! normalization `eta = ||G||_F^2 / L = Tr[(HH^H)^{-1}] / L`, so
//! `SNR_l = P beta_l / (sigma^2 eta)`.

use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{ArrayGeometry, ChannelSampler, Drop};
use crate::error::{Error, Result};
use crate::linalg::{gram, hermitian_inverse, ComplexMatrix};
use crate::stats::MeanAccumulator;

#[derive(Debug, Clone, PartialEq)]
pub struct ZfResult {
    /// `M x L`.
    pub precoder: ComplexMatrix,
    /// `eta = Tr[(HH^H)^{-1}] / L`.
    pub normalization: f64,
    pub trace_inverse: f64,
    pub gram_inverse: ComplexMatrix,
}

pub fn zf_precode(h: &ComplexMatrix) -> Result<ZfResult> {
    let l = h.rows();
    if l > h.cols() {
        return Err(Error::DimensionMismatch("ZF needs L <= M"));
    }
    let gram_inverse = hermitian_inverse(&gram(h))?;
    let precoder = h.adjoint().matmul(&gram_inverse);
    let trace_inverse = gram_inverse.trace().re;
    Ok(ZfResult {
        precoder,
        normalization: trace_inverse / l as f64,
        trace_inverse,
        gram_inverse,
    })
}

/// `Tr[(HH^H)^{-1}]` without forming the precoder.
pub fn gram_trace_inverse(h: &ComplexMatrix) -> Result<f64> {
    if h.rows() > h.cols() {
        return Err(Error::DimensionMismatch("ZF needs L <= M"));
    }
    Ok(hermitian_inverse(&gram(h))?.trace().re)
}

fn check_link(l: usize, betas: &[f64], p_eirp: f64, noise_power: f64) -> Result<()> {
    if betas.len() != l {
        return Err(Error::DimensionMismatch("one link gain per UE"));
    }
    if !(noise_power > 0.0) {
        return Err(Error::InvalidParameter("noise power must be positive"));
    }
    if !(p_eirp >= 0.0) {
        return Err(Error::InvalidParameter("transmit power must be >= 0"));
    }
    Ok(())
}

/// `SNR_l = P beta_l L / (sigma^2 Tr[(HH^H)^{-1}])`.
pub fn snr_from_trace(trace_inverse: f64, betas: &[f64], p_eirp: f64, noise_power: f64) -> Vec<f64> {
    let l = betas.len() as f64;
    betas.iter().map(|b| p_eirp * b * l / (noise_power * trace_inverse)).collect()
}

pub fn exact_snr(h: &ComplexMatrix, betas: &[f64], p_eirp: f64, noise_power: f64) -> Result<Vec<f64>> {
    check_link(h.rows(), betas, p_eirp, noise_power)?;
    let trace_inverse = gram_trace_inverse(h)?;
    Ok(snr_from_trace(trace_inverse, betas, p_eirp, noise_power))
}

pub fn sum_rate(snrs: &[f64]) -> f64 {
    snrs.iter().map(|s| libm::log2(1.0 + s)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumSeEstimate {
    /// bits/s/Hz
    pub mean: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub discarded: usize,
}

/// Accumulates `sum_l log2(1 + SNR_l)` over realizations, counting (never
/// imputing) singular ones.
#[derive(Debug, Clone)]
pub struct SumSeAccumulator<'a> {
    betas: &'a [f64],
    p_eirp: f64,
    noise_power: f64,
    acc: MeanAccumulator,
    discarded: usize,
}

impl<'a> SumSeAccumulator<'a> {
    pub fn new(betas: &'a [f64], p_eirp: f64, noise_power: f64) -> Result<Self> {
        check_link(betas.len(), betas, p_eirp, noise_power)?;
        Ok(SumSeAccumulator {
            betas,
            p_eirp,
            noise_power,
            acc: MeanAccumulator::new(),
            discarded: 0,
        })
    }

    pub fn push_channel(&mut self, h: &ComplexMatrix) -> Result<()> {
        if h.rows() != self.betas.len() {
            return Err(Error::DimensionMismatch("one link gain per UE"));
        }
        match gram_trace_inverse(h) {
            Ok(t) => {
                self.push_trace(t);
                Ok(())
            }
            Err(Error::SingularMatrix { .. }) => {
                self.discarded += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    pub fn push_trace(&mut self, trace_inverse: f64) {
        let snr = snr_from_trace(trace_inverse, self.betas, self.p_eirp, self.noise_power);
        self.acc.push(sum_rate(&snr));
    }

    pub fn push_discarded(&mut self) {
        self.discarded += 1;
    }

    pub fn finish(self) -> Result<SumSeEstimate> {
        let accepted = self.acc.count();
        let total = accepted + self.discarded;
        if self.discarded * 100 > total {
            return Err(Error::TooManySingular {
                discarded: self.discarded,
                total,
            });
        }
        Ok(SumSeEstimate {
            mean: self.acc.mean(),
            std_error: self.acc.std_error(),
            accepted,
            discarded: self.discarded,
        })
    }
}

/// Monte-Carlo average of `sum_l log2(1 + SNR_l)` over fresh fading for a
/// fixed drop, drawing every realization from `rng` in sequence.
#[allow(clippy::too_many_arguments)]
pub fn ergodic_sum_se<R: Rng + ?Sized>(
    drop: &Drop,
    geom: &ArrayGeometry,
    betas: &[f64],
    p_eirp: f64,
    noise_power: f64,
    n_realizations: usize,
    rng: &mut R,
) -> Result<SumSeEstimate> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter("n_realizations must be >= 1"));
    }
    let sampler = ChannelSampler::new(drop, geom)?;
    let mut acc = SumSeAccumulator::new(betas, p_eirp, noise_power)?;
    for _ in 0..n_realizations {
        acc.push_channel(&sampler.draw(rng))?;
    }
    acc.finish()
}
