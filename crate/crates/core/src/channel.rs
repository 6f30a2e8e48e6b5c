//! Block transmission over a known frequency-selective channel.
//!
//! The frequency-domain equalizer presumes a circulant channel, so
//! transmission applies a circular convolution of the block with the tap
//! vector (perfect cyclic-prefix equivalence) and adds circular complex
//! AWGN of total variance `sigma^2` per sample.
//!
//! SNR convention throughout: `SNR(dB) = 10*log10(Es/sigma^2)` with
//! `Es = 1`, so `sigma^2 = 10^(-SNR/10)`.

use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{lit, Error, Real, Result};

/// Named channel presets accepted on the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelPreset {
    ProakisC,
    Flat,
}

impl ChannelPreset {
    pub const fn name(self) -> &'static str {
        match self {
            ChannelPreset::ProakisC => "proakis-c",
            ChannelPreset::Flat => "flat",
        }
    }
}

impl FromStr for ChannelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proakis-c" => Ok(ChannelPreset::ProakisC),
            "flat" => Ok(ChannelPreset::Flat),
            other => Err(Error::InvalidConfig(format!(
                "unknown channel '{other}' (expected proakis-c or flat)"
            ))),
        }
    }
}

/// A fixed impulse response used for a whole simulation.
#[derive(Debug, Clone)]
pub struct ChannelModel<T> {
    taps: Vec<Complex<T>>,
}

impl<T: Real> ChannelModel<T> {
    /// The severely frequency-selective five-tap reference channel
    /// (0.227, 0.460, 0.688, 0.460, 0.227). The textbook taps carry energy
    /// 0.9996, kept as published rather than renormalized.
    pub fn proakis_c() -> Self {
        Self::from_real_taps(&[0.227, 0.460, 0.688, 0.460, 0.227])
    }

    /// Single unit tap; the channel reduces to AWGN.
    pub fn flat() -> Self {
        Self::from_real_taps(&[1.0])
    }

    pub fn preset(preset: ChannelPreset) -> Self {
        match preset {
            ChannelPreset::ProakisC => Self::proakis_c(),
            ChannelPreset::Flat => Self::flat(),
        }
    }

    pub fn from_taps(taps: Vec<Complex<T>>) -> Self {
        assert!(!taps.is_empty(), "channel needs at least one tap");
        ChannelModel { taps }
    }

    fn from_real_taps(taps: &[f64]) -> Self {
        Self::from_taps(taps.iter().map(|&t| Complex::new(lit::<T>(t), T::zero())).collect())
    }

    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    /// Channel frequency response over `k` bins: the unnormalized DFT of
    /// the zero-padded taps, which is the per-bin gain seen by a unitary
    /// DFT of a circularly convolved block.
    pub fn freq_response(&self, k: usize) -> Vec<Complex<T>> {
        let two_pi = T::PI() + T::PI();
        (0..k)
            .map(|n| {
                let mut h = Complex::new(T::zero(), T::zero());
                for (l, &tap) in self.taps.iter().enumerate() {
                    let angle = -two_pi * T::from_usize(n * l % k).unwrap() / T::from_usize(k).unwrap();
                    h += tap * Complex::new(angle.cos(), angle.sin());
                }
                h
            })
            .collect()
    }
}

/// Circularly convolves a block with the channel taps and adds circular
/// complex Gaussian noise of total variance `noise_var` per sample.
pub fn transmit<T: Real, R: Rng + ?Sized>(
    x: &[Complex<T>],
    ch: &ChannelModel<T>,
    noise_var: T,
    rng: &mut R,
) -> Vec<Complex<T>> {
    let k = x.len();
    let mut y = Vec::with_capacity(k);
    for n in 0..k {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (l, &tap) in ch.taps().iter().enumerate() {
            acc += tap * x[(n + k - l % k) % k];
        }
        y.push(acc);
    }
    if noise_var > T::zero() {
        let sigma_axis = (noise_var * lit::<T>(0.5)).sqrt();
        for sample in &mut y {
            let nr: f64 = StandardNormal.sample(rng);
            let ni: f64 = StandardNormal.sample(rng);
            *sample += Complex::new(lit::<T>(nr) * sigma_axis, lit::<T>(ni) * sigma_axis);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    #[test]
    fn proakis_c_tap_energy() {
        let ch = ChannelModel::<f64>::proakis_c();
        let energy: f64 = ch.taps().iter().map(|t| t.norm_sqr()).sum();
        assert!((energy - 0.999602).abs() < 1e-12);
        assert!((energy - 1.0).abs() < 1e-3);
    }

    #[test]
    fn proakis_c_has_deep_spectral_nulls() {
        let ch = ChannelModel::<f64>::proakis_c();
        let h = ch.freq_response(256);
        let min = h.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        assert!(min < 0.1, "min |H| = {min}");
    }

    #[test]
    fn flat_channel_response_is_unity() {
        let ch = ChannelModel::<f64>::flat();
        for h in ch.freq_response(64) {
            assert!((h - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_flat_transmit_is_identity() {
        let ch = ChannelModel::<f64>::flat();
        let x: Vec<Complex<f64>> = (0..16).map(|i| Complex::new(i as f64, -(i as f64))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = transmit(&x, &ch, 0.0, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn impulse_reveals_circularly_placed_taps() {
        let ch = ChannelModel::<f64>::proakis_c();
        let mut x = vec![Complex::new(0.0, 0.0); 8];
        x[0] = Complex::new(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = transmit(&x, &ch, 0.0, &mut rng);
        let taps = ch.taps();
        for (l, &tap) in taps.iter().enumerate() {
            assert!((y[l] - tap).norm() < 1e-15);
        }
        for slot in &y[taps.len()..] {
            assert!(slot.norm() < 1e-15);
        }
    }

    #[test]
    fn circular_wraparound() {
        let ch = ChannelModel::<f64>::proakis_c();
        let mut x = vec![Complex::new(0.0, 0.0); 8];
        x[7] = Complex::new(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = transmit(&x, &ch, 0.0, &mut rng);
        // Tap l lands on sample (7 + l) mod 8.
        assert!((y[7] - ch.taps()[0]).norm() < 1e-15);
        assert!((y[0] - ch.taps()[1]).norm() < 1e-15);
        assert!((y[2] - ch.taps()[3]).norm() < 1e-15);
    }

    #[test]
    fn noise_variance_matches_request() {
        let ch = ChannelModel::<f64>::flat();
        let x = vec![Complex::new(0.0, 0.0); 100_000];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sigma2 = 0.25;
        let y = transmit(&x, &ch, sigma2, &mut rng);
        let measured: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        // 3-sigma band for the variance estimate of 1e5 samples.
        let tol = 3.0 * sigma2 / (y.len() as f64).sqrt();
        assert!((measured - sigma2).abs() < tol, "{measured} vs {sigma2}");
    }

    #[test]
    fn same_seed_same_noise() {
        let ch = ChannelModel::<f64>::proakis_c();
        let x: Vec<Complex<f64>> = (0..32).map(|i| Complex::new((i % 3) as f64, 0.5)).collect();
        let mut rng_a = ChaCha8Rng::seed_from_u64(7);
        let mut rng_b = ChaCha8Rng::seed_from_u64(7);
        let a = transmit(&x, &ch, 0.1, &mut rng_a);
        let b = transmit(&x, &ch, 0.1, &mut rng_b);
        assert_eq!(a, b);
    }

    #[test]
    fn preset_names_parse() {
        assert_eq!("proakis-c".parse::<ChannelPreset>().unwrap(), ChannelPreset::ProakisC);
        assert_eq!("flat".parse::<ChannelPreset>().unwrap(), ChannelPreset::Flat);
        assert!("rayleigh".parse::<ChannelPreset>().is_err());
    }
}
