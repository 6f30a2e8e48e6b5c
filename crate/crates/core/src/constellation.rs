//! Gray-mapped unit-energy constellations with bit labeling.
//!
//! Points are indexed by their decimal label `m`; bit `q` (1-based, `q = 1`
//! is the least significant label bit) of point `m` is `(m >> (q-1)) & 1`.
//! The labelings are the unique ones consistent with the closed-form
//! demapper and soft-mapper expressions in [`crate::demap`] and
//! [`crate::softmap`]:
//!
//! * QPSK — bit 1 keys the sign of the real part, bit 2 the sign of the
//!   imaginary part (bit value 0 means positive).
//! * 8-PSK — points at odd multiples of pi/8; the decimal label equals the
//!   hard-decision index `4*(I<0) + 2*(R<0) + (|R|<|I|)`.
//! * 16-QAM — per-axis Gray PAM with levels {±1, ±3}/sqrt(10); bits 1 and 2
//!   key the amplitude of the imaginary/real axis, bits 3 and 4 the sign.

use std::str::FromStr;

use num_complex::Complex;

use crate::{lit, Error, Real, Result};

/// Constellation selector. CLI/config names are `qpsk`, `psk8`, `qam16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Qpsk,
    Psk8,
    Qam16,
}

impl ConstellationKind {
    /// Number of points `M`.
    pub const fn size(self) -> usize {
        match self {
            ConstellationKind::Qpsk => 4,
            ConstellationKind::Psk8 => 8,
            ConstellationKind::Qam16 => 16,
        }
    }

    /// Bits per symbol `Q = log2 M`.
    pub const fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Psk8 => 3,
            ConstellationKind::Qam16 => 4,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ConstellationKind::Qpsk => "qpsk",
            ConstellationKind::Psk8 => "psk8",
            ConstellationKind::Qam16 => "qam16",
        }
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qpsk" => Ok(ConstellationKind::Qpsk),
            "psk8" => Ok(ConstellationKind::Psk8),
            "qam16" => Ok(ConstellationKind::Qam16),
            other => Err(Error::InvalidConfig(format!(
                "unknown constellation '{other}' (expected qpsk, psk8, or qam16)"
            ))),
        }
    }
}

/// Half-spacing `d = 1/sqrt(10)` of the 16-QAM grid.
pub fn qam16_half_spacing<T: Real>() -> T {
    lit::<T>(10.0).sqrt().recip()
}

/// 8-PSK soft-mapping constants `(a8, b8)` with
/// `a8 = sqrt((2 - sqrt 2)/8)` and `b8 = sqrt((2 + sqrt 2)/8)`.
pub fn psk8_mapping_constants<T: Real>() -> (T, T) {
    let two = lit::<T>(2.0);
    let eight = lit::<T>(8.0);
    let r = two.sqrt();
    (((two - r) / eight).sqrt(), ((two + r) / eight).sqrt())
}

/// A Gray-mapped constellation with unit average energy.
#[derive(Debug, Clone)]
pub struct Constellation<T> {
    kind: ConstellationKind,
    points: Vec<Complex<T>>,
}

impl<T: Real> Constellation<T> {
    /// Builds the constellation for `kind`. Deterministic; the point at
    /// index `m` carries decimal label `m`.
    pub fn new(kind: ConstellationKind) -> Self {
        let m = kind.size();
        let points = (0..m).map(|label| Self::point_for_label(kind, label)).collect();
        Constellation { kind, points }
    }

    fn point_for_label(kind: ConstellationKind, m: usize) -> Complex<T> {
        let sign = |b: usize| if b == 0 { T::one() } else { -T::one() };
        match kind {
            ConstellationKind::Qpsk => {
                let s = lit::<T>(2.0).sqrt().recip();
                Complex::new(sign(m & 1) * s, sign((m >> 1) & 1) * s)
            }
            ConstellationKind::Psk8 => {
                // Amplitude pair (cos, sin) of pi/8 swaps with bit 1; bits 2
                // and 3 carry the signs of the real and imaginary parts.
                let c = (T::PI() / lit::<T>(8.0)).cos();
                let s = (T::PI() / lit::<T>(8.0)).sin();
                let (re_amp, im_amp) = if m & 1 == 0 { (c, s) } else { (s, c) };
                Complex::new(sign((m >> 1) & 1) * re_amp, sign((m >> 2) & 1) * im_amp)
            }
            ConstellationKind::Qam16 => {
                let d = qam16_half_spacing::<T>();
                let amp = |b: usize| if b == 0 { d } else { lit::<T>(3.0) * d };
                Complex::new(
                    sign((m >> 3) & 1) * amp((m >> 1) & 1),
                    sign((m >> 2) & 1) * amp(m & 1),
                )
            }
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    /// All `M` points, indexed by decimal label.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.kind.bits_per_symbol()
    }

    /// Bit `q` (1-based) of the label of point `m`.
    #[inline]
    pub fn label_bit(&self, m: usize, q: usize) -> u8 {
        ((m >> (q - 1)) & 1) as u8
    }

    /// The subset of points whose bit `q` equals `b`.
    pub fn bit_subset(&self, q: usize, b: u8) -> Result<Vec<Complex<T>>> {
        if q == 0 || q > self.bits_per_symbol() {
            return Err(Error::BitIndexOutOfRange {
                q,
                max: self.bits_per_symbol(),
            });
        }
        Ok(self
            .points
            .iter()
            .enumerate()
            .filter(|(m, _)| self.label_bit(*m, q) == b)
            .map(|(_, p)| *p)
            .collect())
    }

    /// Maps a bit stream onto symbols; each consecutive group of `Q` bits is
    /// one label, first bit of the group being bit 1.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        let q = self.bits_per_symbol();
        if !bits.len().is_multiple_of(q) {
            return Err(Error::BitLengthMismatch {
                len: bits.len(),
                bits_per_symbol: q,
            });
        }
        Ok(bits
            .chunks_exact(q)
            .map(|group| {
                let mut m = 0usize;
                for (i, &b) in group.iter().enumerate() {
                    debug_assert!(b <= 1, "bits must be 0 or 1");
                    m |= ((b & 1) as usize) << i;
                }
                self.points[m]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> [ConstellationKind; 3] {
        [ConstellationKind::Qpsk, ConstellationKind::Psk8, ConstellationKind::Qam16]
    }

    #[test]
    fn unit_average_energy() {
        for kind in all_kinds() {
            let c = Constellation::<f64>::new(kind);
            let energy: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((energy - 1.0).abs() < 1e-12, "{kind:?}: {energy}");
        }
    }

    #[test]
    fn zero_mean() {
        for kind in all_kinds() {
            let c = Constellation::<f64>::new(kind);
            let mean = c.points().iter().sum::<num_complex::Complex<f64>>() / c.size() as f64;
            assert!(mean.norm() < 1e-12);
        }
    }

    #[test]
    fn gray_property_nearest_neighbors_differ_in_one_bit() {
        for kind in all_kinds() {
            let c = Constellation::<f64>::new(kind);
            for m in 0..c.size() {
                let dmin = (0..c.size())
                    .filter(|&n| n != m)
                    .map(|n| (c.points()[m] - c.points()[n]).norm())
                    .fold(f64::INFINITY, f64::min);
                for n in 0..c.size() {
                    if n != m && (c.points()[m] - c.points()[n]).norm() < dmin + 1e-9 {
                        assert_eq!((m ^ n).count_ones(), 1, "{kind:?}: {m} vs {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn bit_subsets_partition_evenly() {
        for kind in all_kinds() {
            let c = Constellation::<f64>::new(kind);
            for q in 1..=c.bits_per_symbol() {
                let zeros = c.bit_subset(q, 0).unwrap();
                let ones = c.bit_subset(q, 1).unwrap();
                assert_eq!(zeros.len(), c.size() / 2);
                assert_eq!(ones.len(), c.size() / 2);
            }
        }
    }

    #[test]
    fn bit_subset_rejects_bad_index() {
        let c = Constellation::<f64>::new(ConstellationKind::Qpsk);
        assert!(c.bit_subset(0, 0).is_err());
        assert!(c.bit_subset(3, 0).is_err());
    }

    #[test]
    fn qpsk_bit1_keys_real_sign() {
        let c = Constellation::<f64>::new(ConstellationKind::Qpsk);
        for p in c.bit_subset(1, 0).unwrap() {
            assert!(p.re > 0.0);
        }
        for p in c.bit_subset(2, 1).unwrap() {
            assert!(p.im < 0.0);
        }
    }

    #[test]
    fn psk8_bit3_keys_imag_sign() {
        let c = Constellation::<f64>::new(ConstellationKind::Psk8);
        let subset = c.bit_subset(3, 1).unwrap();
        assert_eq!(subset.len(), 4);
        for p in subset {
            assert!(p.im < 0.0);
        }
    }

    #[test]
    fn map_bits_examples() {
        let qpsk = Constellation::<f64>::new(ConstellationKind::Qpsk);
        let s = 0.5f64.sqrt();
        let out = qpsk.map_bits(&[0, 0]).unwrap();
        assert!((out[0] - num_complex::Complex::new(s, s)).norm() < 1e-15);

        let psk8 = Constellation::<f64>::new(ConstellationKind::Psk8);
        let out = psk8.map_bits(&[0, 0, 0]).unwrap();
        assert!((out[0].re - 0.9238795325112867).abs() < 1e-12);
        assert!((out[0].im - 0.3826834323650898).abs() < 1e-12);

        assert!(qpsk.map_bits(&[]).unwrap().is_empty());
        assert!(matches!(
            qpsk.map_bits(&[0, 1, 0]),
            Err(Error::BitLengthMismatch { .. })
        ));
    }

    #[test]
    fn qam16_levels_follow_amplitude_and_sign_bits() {
        let c = Constellation::<f64>::new(ConstellationKind::Qam16);
        let d = qam16_half_spacing::<f64>();
        for m in 0..16 {
            let p = c.points()[m];
            let expect_re = (1.0 + 2.0 * ((m >> 1) & 1) as f64) * (1.0 - 2.0 * ((m >> 3) & 1) as f64) * d;
            let expect_im = (1.0 + 2.0 * (m & 1) as f64) * (1.0 - 2.0 * ((m >> 2) & 1) as f64) * d;
            assert!((p.re - expect_re).abs() < 1e-15);
            assert!((p.im - expect_im).abs() < 1e-15);
        }
    }

    #[test]
    fn kind_names_parse() {
        for kind in all_kinds() {
            assert_eq!(kind.name().parse::<ConstellationKind>().unwrap(), kind);
        }
        assert!("qam64".parse::<ConstellationKind>().is_err());
    }
}
