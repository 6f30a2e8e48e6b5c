//! Q-format fixed-point arithmetic with saturation and round-to-nearest.
//!
//! A [`QFormat`] allocates a sign bit, `int_bits` integer bits, and
//! `frac_bits` fractional bits; a [`FxValue`] is a raw two's-complement
//! integer interpreted at that scale (`value = raw * 2^-frac_bits`).
//! All operations are total functions: overflow saturates silently to the
//! representable range, mirroring a hardware datapath. Rounding is
//! round-to-nearest with ties away from zero.
//!
//! Textual format notation is `s<I>.<F>` / `u<I>.<F>`, e.g. `s2.5` for a
//! signed value with 2 integer and 5 fractional bits (8 bits total).

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Widest supported format (sign + integer + fractional bits).
pub const MAX_TOTAL_BITS: u8 = 16;

/// Fixed-point format: sign flag plus integer/fractional bit allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    signed: bool,
    int_bits: u8,
    frac_bits: u8,
}

impl QFormat {
    /// Builds a format. Panics if the total width exceeds [`MAX_TOTAL_BITS`].
    pub const fn new(signed: bool, int_bits: u8, frac_bits: u8) -> Self {
        let total = signed as u8 + int_bits + frac_bits;
        assert!(total <= MAX_TOTAL_BITS, "format exceeds 16 bits");
        QFormat {
            signed,
            int_bits,
            frac_bits,
        }
    }

    pub const fn signed(&self) -> bool {
        self.signed
    }

    pub const fn int_bits(&self) -> u8 {
        self.int_bits
    }

    pub const fn frac_bits(&self) -> u8 {
        self.frac_bits
    }

    pub const fn total_bits(&self) -> u8 {
        self.signed as u8 + self.int_bits + self.frac_bits
    }

    /// Smallest representable raw integer.
    pub const fn min_raw(&self) -> i32 {
        if self.signed {
            -(1 << (self.int_bits + self.frac_bits))
        } else {
            0
        }
    }

    /// Largest representable raw integer.
    pub const fn max_raw(&self) -> i32 {
        (1 << (self.int_bits + self.frac_bits)) - 1
    }

    /// Weight of one raw step, `2^-frac_bits`.
    pub fn lsb(&self) -> f64 {
        (self.frac_bits as f64).exp2().recip()
    }

    pub fn min_value(&self) -> f64 {
        self.min_raw() as f64 * self.lsb()
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.lsb()
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}.{}",
            if self.signed { 's' } else { 'u' },
            self.int_bits,
            self.frac_bits
        )
    }
}

impl FromStr for QFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad fixed-point format '{s}', expected e.g. s2.5 or u4.4"));
        let (sign, rest) = match s.as_bytes().first() {
            Some(b's') => (true, &s[1..]),
            Some(b'u') => (false, &s[1..]),
            _ => return Err(bad()),
        };
        let (i, f) = rest.split_once('.').ok_or_else(bad)?;
        let int_bits: u8 = i.parse().map_err(|_| bad())?;
        let frac_bits: u8 = f.parse().map_err(|_| bad())?;
        if sign as u8 + int_bits + frac_bits > MAX_TOTAL_BITS {
            return Err(Error::InvalidConfig(format!("format '{s}' exceeds {MAX_TOTAL_BITS} bits")));
        }
        Ok(QFormat::new(sign, int_bits, frac_bits))
    }
}

/// A quantized sample: raw two's-complement integer plus its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxValue {
    raw: i32,
    format: QFormat,
}

impl FxValue {
    /// Wraps a raw integer, saturating it into the format's range.
    pub fn from_raw(raw: i32, format: QFormat) -> Self {
        FxValue {
            raw: raw.clamp(format.min_raw(), format.max_raw()),
            format,
        }
    }

    pub fn zero(format: QFormat) -> Self {
        FxValue { raw: 0, format }
    }

    pub fn raw(&self) -> i32 {
        self.raw
    }

    pub fn format(&self) -> QFormat {
        self.format
    }

    /// Exact real value represented, `raw * 2^-frac_bits`.
    pub fn to_real(&self) -> f64 {
        self.raw as f64 * self.format.lsb()
    }
}

/// Quantizes a real value: scale by `2^frac_bits`, round to nearest (ties
/// away from zero), then saturate. NaN maps to zero.
pub fn quantize(x: f64, fmt: QFormat) -> FxValue {
    if x.is_nan() {
        return FxValue::zero(fmt);
    }
    let scaled = x * (fmt.frac_bits as f64).exp2();
    let raw = if scaled >= fmt.max_raw() as f64 {
        fmt.max_raw()
    } else if scaled <= fmt.min_raw() as f64 {
        fmt.min_raw()
    } else {
        // f64::round is round-half-away-from-zero.
        scaled.round() as i32
    };
    FxValue { raw, format: fmt }
}

/// Adds two values (formats may differ), then resizes the exact sum.
pub fn fx_add(a: FxValue, b: FxValue, out_fmt: QFormat) -> FxValue {
    let frac = a.format.frac_bits.max(b.format.frac_bits);
    let ra = (a.raw as i64) << (frac - a.format.frac_bits);
    let rb = (b.raw as i64) << (frac - b.format.frac_bits);
    resize_raw(ra + rb, frac, out_fmt)
}

/// Multiplies two values exactly (fractional bits add), then resizes.
pub fn fx_mul(a: FxValue, b: FxValue, out_fmt: QFormat) -> FxValue {
    let prod = a.raw as i64 * b.raw as i64;
    resize_raw(prod, a.format.frac_bits + b.format.frac_bits, out_fmt)
}

/// Re-expresses a value in another format (round-to-nearest + saturation).
/// Identity when the format is unchanged.
pub fn fx_resize(v: FxValue, fmt: QFormat) -> FxValue {
    resize_raw(v.raw as i64, v.format.frac_bits, fmt)
}

/// Rounds a raw integer at `frac` fractional bits into `fmt`.
pub(crate) fn resize_raw(raw: i64, frac: u8, fmt: QFormat) -> FxValue {
    let shifted = if frac >= fmt.frac_bits {
        round_shift(raw, (frac - fmt.frac_bits) as u32)
    } else {
        raw << (fmt.frac_bits - frac)
    };
    FxValue {
        raw: shifted.clamp(fmt.min_raw() as i64, fmt.max_raw() as i64) as i32,
        format: fmt,
    }
}

/// Arithmetic right shift with round-to-nearest, ties away from zero.
#[inline]
pub(crate) fn round_shift(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        return v;
    }
    let half = 1i64 << (shift - 1);
    if v >= 0 {
        (v + half) >> shift
    } else {
        -((-v + half) >> shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S2_5: QFormat = QFormat::new(true, 2, 5);
    const S4_3: QFormat = QFormat::new(true, 4, 3);

    #[test]
    fn quantize_boundary_exact() {
        let v = quantize(-4.0, S2_5);
        assert_eq!(v.raw(), -128);
        assert_eq!(v.to_real(), -4.0);
    }

    #[test]
    fn quantize_rounds_to_nearest() {
        let v = quantize(1.30, S2_5);
        assert_eq!(v.raw(), 42);
        assert_eq!(v.to_real(), 1.3125);
    }

    #[test]
    fn quantize_saturates() {
        let v = quantize(5.0, S2_5);
        assert_eq!(v.raw(), 127);
        assert_eq!(v.to_real(), 3.96875);
        assert_eq!(quantize(f64::INFINITY, S2_5).raw(), 127);
        assert_eq!(quantize(f64::NEG_INFINITY, S2_5).raw(), -128);
        assert_eq!(quantize(f64::NAN, S2_5).raw(), 0);
    }

    #[test]
    fn to_real_examples() {
        assert_eq!(FxValue::zero(S2_5).to_real(), 0.0);
        assert_eq!(FxValue::from_raw(16, S2_5).to_real(), 0.5);
        assert_eq!(FxValue::from_raw(-1, S2_5).to_real(), -0.03125);
    }

    #[test]
    fn add_examples() {
        let one = quantize(1.0, S2_5);
        let neg_one = quantize(-1.0, S2_5);
        assert_eq!(fx_add(one, neg_one, S2_5).to_real(), 0.0);

        let a = quantize(3.5, S2_5);
        let b = quantize(1.0, S2_5);
        assert_eq!(fx_add(a, b, S2_5).to_real(), 3.96875);

        let lsb = FxValue::from_raw(1, S2_5);
        assert_eq!(fx_add(lsb, lsb, S2_5).to_real(), 0.0625);
    }

    #[test]
    fn add_aligns_mixed_formats() {
        let a = quantize(1.5, S2_5);
        let b = quantize(2.0, S4_3);
        assert_eq!(fx_add(a, b, S4_3).to_real(), 3.5);
    }

    #[test]
    fn mul_examples() {
        let x = quantize(2.3, S2_5);
        assert_eq!(fx_mul(x, FxValue::zero(S2_5), S2_5).raw(), 0);

        let half = quantize(0.5, S2_5);
        assert_eq!(fx_mul(half, half, S2_5).to_real(), 0.25);

        let v = quantize(1.5, S2_5);
        let sq = fx_mul(v, v, S2_5);
        assert_eq!(sq.raw(), 72);
        assert_eq!(sq.to_real(), 2.25);
    }

    #[test]
    fn resize_examples() {
        let half = quantize(0.5, S2_5);
        assert_eq!(fx_resize(half, S4_3).to_real(), 0.5);

        let lsb = FxValue::from_raw(1, S2_5);
        assert_eq!(fx_resize(lsb, QFormat::new(true, 2, 3)).to_real(), 0.0);

        let big = quantize(15.875, S4_3);
        assert_eq!(fx_resize(big, S2_5).to_real(), 3.96875);
    }

    #[test]
    fn format_parse_display_roundtrip() {
        for s in ["s2.5", "u4.4", "s4.3", "u2.6", "s1.6", "s8.7"] {
            let fmt: QFormat = s.parse().unwrap();
            assert_eq!(fmt.to_string(), s);
        }
        assert!("x2.5".parse::<QFormat>().is_err());
        assert!("s2".parse::<QFormat>().is_err());
        assert!("s9.8".parse::<QFormat>().is_err());
    }

    /// Exhaustive check that add/mul equal exact real arithmetic followed by
    /// a single quantize, over every pair of 8-bit raw operands.
    #[test]
    fn exhaustive_add_mul_match_exact_arithmetic() {
        let outs = [S2_5, S4_3];
        for out in outs {
            for ra in S2_5.min_raw()..=S2_5.max_raw() {
                let a = FxValue::from_raw(ra, S2_5);
                for rb in S4_3.min_raw()..=S4_3.max_raw() {
                    let b = FxValue::from_raw(rb, S4_3);
                    // Products/sums of these grids are exact in f64.
                    let sum = a.to_real() + b.to_real();
                    let prod = a.to_real() * b.to_real();
                    assert_eq!(fx_add(a, b, out), quantize(sum, out), "add {ra} {rb}");
                    assert_eq!(fx_mul(a, b, out), quantize(prod, out), "mul {ra} {rb}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_within_half_lsb(x in -64.0f64..64.0) {
            for fmt in [S2_5, S4_3, QFormat::new(false, 4, 4), QFormat::new(false, 2, 6)] {
                let q = quantize(x, fmt);
                let clamped = x.clamp(fmt.min_value(), fmt.max_value());
                prop_assert!((q.to_real() - clamped).abs() <= fmt.lsb() / 2.0 + 1e-15);
            }
        }

        #[test]
        fn quantize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize(lo, S2_5).raw() <= quantize(hi, S2_5).raw());
        }

        #[test]
        fn resize_is_idempotent(raw in -128i32..=127) {
            let v = FxValue::from_raw(raw, S2_5);
            prop_assert_eq!(fx_resize(v, S2_5), v);
        }
    }
}
