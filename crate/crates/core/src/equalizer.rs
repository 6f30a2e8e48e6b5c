//! Frequency-domain MMSE equalization with interference cancellation and
//! the self-iterated receiver loop.
//!
//! One receiver pass equalizes the block, soft-demaps it, forms EP feedback,
//! and repeats for `S` self-iterations before emitting extrinsic LLRs. The
//! feedback statistics enter the filter as a scalar average variance:
//!
//! ```text
//! f_n  = v_d * conj(H_n) / (sigma^2 + v_d*|H_n|^2)
//! xi   = (1/K) * sum f_n * H_n
//! X_e  = X_d + (f/xi) .* (Y - H .* X_d)
//! v_e  = v_d * (1 - xi) / xi
//! ```
//!
//! On a flat channel with zero-information feedback this collapses to
//! `x_e = y`, `v_e = sigma^2`, which anchors the implementation.
//!
//! DFTs are unitary (`1/sqrt(K)` both directions) so variances carry
//! unchanged between domains.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::Fft;

use crate::constellation::{Constellation, ConstellationKind};
use crate::demap::{exact_extrinsic_llrs, AnalyticDemapper, LlrBlock};
use crate::fixed_point::{quantize, FxValue};
use crate::fx_kernels::{FxKernels, FxProfile};
use crate::softmap::{
    app_moments, bitwise_mean, ep_feedback_exact, posterior_in_place, soft_bits_into, CepTable,
    SoftBitMode,
};
use crate::{lit, Error, Real, Result};

/// Smallest accepted filter normalization; below this the channel/feedback
/// combination is degenerate.
pub const XI_MIN: f64 = 1e-9;

/// Floor applied to the feedback variance before re-equalization.
pub const V_MIN: f64 = 1e-6;

/// Transform direction for [`Dft::process`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DftDirection {
    Forward,
    Inverse,
}

/// Unitary DFT of a fixed power-of-two length.
pub struct Dft<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    norm: T,
}

impl<T: Real> Dft<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::BlockLengthNotPowerOfTwo(len));
        }
        let mut planner = rustfft::FftPlanner::new();
        Ok(Dft {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            norm: T::from_usize(len).unwrap().sqrt().recip(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unitary transform of a block; both directions scale by `1/sqrt(K)`.
    pub fn process(&self, block: &[Complex<T>], direction: DftDirection) -> Result<Vec<Complex<T>>> {
        if block.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: block.len(),
            });
        }
        let mut out = block.to_vec();
        match direction {
            DftDirection::Forward => self.forward.process(&mut out),
            DftDirection::Inverse => self.inverse.process(&mut out),
        }
        for v in &mut out {
            *v *= self.norm;
        }
        Ok(out)
    }

    pub fn forward(&self, block: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.process(block, DftDirection::Forward)
    }

    pub fn inverse(&self, block: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.process(block, DftDirection::Inverse)
    }
}

/// MMSE filter with interference cancellation over one block.
///
/// `y_freq` is the unitary DFT of the received block, `h` the channel
/// frequency response (unnormalized DFT of the taps), `x_d`/`v_d` the
/// time-domain feedback means and their scalar variance. Returns the
/// equalized time-domain symbols and the residual variance `v_e`.
pub fn fd_mmse_ic<T: Real>(
    dft: &Dft<T>,
    y_freq: &[Complex<T>],
    h: &[Complex<T>],
    noise_var: T,
    x_d: &[Complex<T>],
    v_d: T,
) -> Result<(Vec<Complex<T>>, T)> {
    let k = dft.len();
    for len in [y_freq.len(), h.len(), x_d.len()] {
        if len != k {
            return Err(Error::LengthMismatch { expected: k, got: len });
        }
    }
    if noise_var <= T::zero() || v_d <= T::zero() {
        return Err(Error::NonPositiveVariance);
    }
    let x_d_freq = dft.forward(x_d)?;
    let mut filter = Vec::with_capacity(k);
    let mut xi = T::zero();
    for &hn in h {
        let f = hn.conj() * v_d / (noise_var + v_d * hn.norm_sqr());
        xi += (f * hn).re;
        filter.push(f);
    }
    xi /= T::from_usize(k).unwrap();
    if xi <= lit::<T>(XI_MIN) {
        return Err(Error::DegenerateEqualizer);
    }
    let gain = xi.recip();
    let x_e_freq: Vec<Complex<T>> = (0..k)
        .map(|n| x_d_freq[n] + filter[n] * gain * (y_freq[n] - h[n] * x_d_freq[n]))
        .collect();
    let x_e = dft.inverse(&x_e_freq)?;
    let v_e = v_d * (T::one() - xi) / xi;
    Ok((x_e, v_e))
}

/// Receiver arithmetic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverMode {
    /// Full posterior over all points, Gaussian-division feedback.
    Exact,
    /// Closed-form demapper, bitwise mapper, tabulated EP coefficient.
    SimplifiedFloat,
    /// Same structure as `SimplifiedFloat` through the 8-bit kernels, with
    /// quantize/dequantize at the block boundaries.
    SimplifiedFixed,
}

impl ReceiverMode {
    /// CLI/CSV name: `exact`, `simplified`, or `fixed`.
    pub const fn name(self) -> &'static str {
        match self {
            ReceiverMode::Exact => "exact",
            ReceiverMode::SimplifiedFloat => "simplified",
            ReceiverMode::SimplifiedFixed => "fixed",
        }
    }
}

impl std::str::FromStr for ReceiverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ReceiverMode::Exact),
            "simplified" => Ok(ReceiverMode::SimplifiedFloat),
            "fixed" => Ok(ReceiverMode::SimplifiedFixed),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected exact, simplified, or fixed)"
            ))),
        }
    }
}

/// Static receiver parameters.
#[derive(Debug, Clone, Copy)]
pub struct ReceiverConfig {
    pub kind: ConstellationKind,
    pub self_iterations: usize,
    pub mode: ReceiverMode,
    pub block_len: usize,
}

/// The self-iterated receiver: equalize, demap, soft-map, feed back, and
/// after `S` self-iterations emit extrinsic LLRs.
pub struct SileReceiver<T: Real> {
    config: ReceiverConfig,
    constellation: Constellation<T>,
    demapper: AnalyticDemapper<T>,
    cep: CepTable<T>,
    fx: FxKernels,
    dft: Dft<T>,
}

impl<T: Real> SileReceiver<T> {
    pub fn new(config: ReceiverConfig, cep: CepTable<T>) -> Result<Self> {
        Self::with_fx_profile(config, cep, FxProfile::default())
    }

    pub fn with_fx_profile(config: ReceiverConfig, cep: CepTable<T>, profile: FxProfile) -> Result<Self> {
        let constellation = Constellation::new(config.kind);
        Ok(SileReceiver {
            demapper: AnalyticDemapper::new(&constellation),
            fx: FxKernels::new(config.kind, profile),
            dft: Dft::new(config.block_len)?,
            config,
            constellation,
            cep,
        })
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.config
    }

    pub fn constellation(&self) -> &Constellation<T> {
        &self.constellation
    }

    pub fn cep_table(&self) -> &CepTable<T> {
        &self.cep
    }

    /// Runs the full receive chain on one block. `h` is the channel
    /// frequency response and `noise_var` the total AWGN variance.
    pub fn receive(&self, y: &[Complex<T>], h: &[Complex<T>], noise_var: T) -> Result<LlrBlock<T>> {
        let k = self.config.block_len;
        let zero = Complex::new(T::zero(), T::zero());
        let y_freq = self.dft.forward(y)?;
        // Zero-information prior for a unit-energy constellation.
        let mut x_d = vec![zero; k];
        let mut v_d = T::one();
        let total = self.config.self_iterations;
        for s in 0..=total {
            let (x_e, v_e) = fd_mmse_ic(&self.dft, &y_freq, h, noise_var, &x_d, v_d)?;
            if s == total {
                return self.final_llrs(&x_e, v_e);
            }
            v_d = match self.config.mode {
                ReceiverMode::Exact => self.exact_feedback(&x_e, v_e, &mut x_d)?,
                ReceiverMode::SimplifiedFloat => self.simplified_feedback(&x_e, v_e, &mut x_d),
                ReceiverMode::SimplifiedFixed => self.fixed_feedback(&x_e, v_e, &mut x_d),
            };
            v_d = v_d.max(lit::<T>(V_MIN));
        }
        unreachable!("loop returns at the final self-iteration")
    }

    /// Posterior-moment feedback (full constellation sums). Returns `v_d`.
    fn exact_feedback(&self, x_e: &[Complex<T>], v_e: T, x_d: &mut [Complex<T>]) -> Result<T> {
        let m = self.constellation.size();
        let mut ell = vec![T::zero(); m];
        let mut mus = Vec::with_capacity(x_e.len());
        let mut gamma_sum = T::zero();
        for &x in x_e {
            for (e, &point) in ell.iter_mut().zip(self.constellation.points()) {
                *e = -(x - point).norm_sqr() / v_e;
            }
            posterior_in_place(&mut ell);
            let (mu, gamma) = app_moments(&ell, &self.constellation);
            mus.push(mu);
            gamma_sum += gamma;
        }
        let gamma = gamma_sum / T::from_usize(x_e.len()).unwrap();
        let mut v_d = T::zero();
        for (slot, (&mu, &x)) in x_d.iter_mut().zip(mus.iter().zip(x_e)) {
            let (fb, v) = ep_feedback_exact(mu, gamma, x, v_e);
            *slot = fb;
            v_d = v;
        }
        Ok(v_d)
    }

    /// Closed-form demap, piecewise soft bits, bitwise mean, tabulated EP
    /// coefficient. Returns `v_d = v_e * C`.
    fn simplified_feedback(&self, x_e: &[Complex<T>], v_e: T, x_d: &mut [Complex<T>]) -> T {
        let q = self.config.kind.bits_per_symbol();
        let inv_v = v_e.recip();
        let c = self.cep.lookup(v_e);
        let mut llrs = vec![T::zero(); q];
        let mut p = vec![T::zero(); q];
        for (slot, &x) in x_d.iter_mut().zip(x_e) {
            self.demapper.llrs_into(x, inv_v, &mut llrs);
            soft_bits_into(&llrs, SoftBitMode::Piecewise, &mut p);
            let mu = bitwise_mean(&p, self.config.kind);
            *slot = mu + (mu - x) * c;
        }
        v_e * c
    }

    /// The simplified path through the fixed-point kernels; symbols are
    /// quantized on entry and the feedback is dequantized on exit.
    fn fixed_feedback(&self, x_e: &[Complex<T>], v_e: T, x_d: &mut [Complex<T>]) -> T {
        let profile = self.fx.profile();
        let inv_v = quantize(v_e.to_f64().unwrap().recip(), profile.inv_var);
        let c_lookup = self.cep.lookup(v_e).to_f64().unwrap();
        let c_ep = quantize(c_lookup, profile.cep);
        for (slot, &x) in x_d.iter_mut().zip(x_e) {
            let xq = self.quantize_symbol(x);
            let llrs = self.fx.demap(xq, inv_v);
            let mu = self.fx.softmap(&llrs);
            let (fr, fi) = self.fx.ep_estimate(mu, xq, c_ep);
            *slot = Complex::new(lit::<T>(fr.to_real()), lit::<T>(fi.to_real()));
        }
        v_e * lit::<T>(c_ep.to_real())
    }

    fn quantize_symbol(&self, x: Complex<T>) -> (FxValue, FxValue) {
        let fmt = self.fx.profile().symbol;
        (
            quantize(x.re.to_f64().unwrap(), fmt),
            quantize(x.im.to_f64().unwrap(), fmt),
        )
    }

    fn final_llrs(&self, x_e: &[Complex<T>], v_e: T) -> Result<LlrBlock<T>> {
        let q = self.config.kind.bits_per_symbol();
        let mut values = Vec::with_capacity(x_e.len() * q);
        match self.config.mode {
            ReceiverMode::Exact => {
                for &x in x_e {
                    values.extend(exact_extrinsic_llrs(x, v_e, &self.constellation)?);
                }
            }
            ReceiverMode::SimplifiedFloat => {
                let inv_v = v_e.recip();
                let mut llrs = vec![T::zero(); q];
                for &x in x_e {
                    self.demapper.llrs_into(x, inv_v, &mut llrs);
                    values.extend_from_slice(&llrs);
                }
            }
            ReceiverMode::SimplifiedFixed => {
                let inv_v = quantize(v_e.to_f64().unwrap().recip(), self.fx.profile().inv_var);
                for &x in x_e {
                    let xq = self.quantize_symbol(x);
                    for l in self.fx.demap(xq, inv_v) {
                        values.push(lit::<T>(l.to_real()));
                    }
                }
            }
        }
        Ok(LlrBlock::new(values, q))
    }
}
