//! Floating-point soft demappers: exact log-MAP, max-log-MAP, and the
//! complexity-reduced closed-form / LUT demappers.
//!
//! LLR convention: positive means bit value 0 is more likely. The noise
//! variance `v` is the total variance of the circular complex observation
//! noise, so the QPSK closed form comes out as `2*sqrt(2)*R(x)/v`.
//!
//! The closed-form demappers take the reciprocal `1/v` as the multiplicative
//! parameter so callers can hoist one division per block out of the
//! per-symbol loop.

use num_complex::Complex;

use crate::constellation::{qam16_half_spacing, Constellation, ConstellationKind};
use crate::{lit, Error, Real, Result};

/// Per-symbol, per-bit extrinsic LLRs for a block of `K` symbols.
///
/// Row `k` holds `L(d_1..d_Q)` for symbol `k`; positive values favor bit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrBlock<T> {
    values: Vec<T>,
    bits_per_symbol: usize,
}

impl<T: Real> LlrBlock<T> {
    pub fn new(values: Vec<T>, bits_per_symbol: usize) -> Self {
        assert!(bits_per_symbol > 0 && values.len().is_multiple_of(bits_per_symbol));
        LlrBlock {
            values,
            bits_per_symbol,
        }
    }

    pub fn num_symbols(&self) -> usize {
        self.values.len() / self.bits_per_symbol
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// LLR row of symbol `k`.
    pub fn row(&self, k: usize) -> &[T] {
        let q = self.bits_per_symbol;
        &self.values[k * q..(k + 1) * q]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Hard decisions in transmit bit order: bit 1 where the LLR is negative.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&l| u8::from(l < T::zero())).collect()
    }
}

/// Unnormalized log-likelihoods `-|x_e - alpha|^2 / v_e` for every point.
pub fn exact_log_likelihoods<T: Real>(
    x_e: Complex<T>,
    v_e: T,
    c: &Constellation<T>,
) -> Result<Vec<T>> {
    if v_e <= T::zero() {
        return Err(Error::NonPositiveVariance);
    }
    Ok(c.points().iter().map(|&a| -(x_e - a).norm_sqr() / v_e).collect())
}

/// Bitwise extrinsic LLRs via numerically stable log-sum-exp over the two
/// label subsets of each bit.
pub fn exact_extrinsic_llrs<T: Real>(
    x_e: Complex<T>,
    v_e: T,
    c: &Constellation<T>,
) -> Result<Vec<T>> {
    let ell = exact_log_likelihoods(x_e, v_e, c)?;
    let q_bits = c.bits_per_symbol();
    let mut out = Vec::with_capacity(q_bits);
    for q in 1..=q_bits {
        let lse = |bit: u8| {
            let sel = ell
                .iter()
                .enumerate()
                .filter(|(m, _)| c.label_bit(*m, q) == bit)
                .map(|(_, &l)| l);
            log_sum_exp(sel)
        };
        out.push(lse(0) - lse(1));
    }
    Ok(out)
}

/// Max-log-MAP LLRs: per-subset maxima instead of log-sum-exp.
pub fn maxlog_llrs<T: Real>(x_e: Complex<T>, v_e: T, c: &Constellation<T>) -> Result<Vec<T>> {
    let ell = exact_log_likelihoods(x_e, v_e, c)?;
    let q_bits = c.bits_per_symbol();
    let mut out = Vec::with_capacity(q_bits);
    for q in 1..=q_bits {
        let best = |bit: u8| {
            ell.iter()
                .enumerate()
                .filter(|(m, _)| c.label_bit(*m, q) == bit)
                .map(|(_, &l)| l)
                .fold(T::neg_infinity(), T::max)
        };
        out.push(best(0) - best(1));
    }
    Ok(out)
}

fn log_sum_exp<T: Real>(vals: impl Iterator<Item = T> + Clone) -> T {
    let m = vals.clone().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    let sum: T = vals.map(|v| (v - m).exp()).sum();
    m + sum.ln()
}

/// Hard decision on an 8-PSK observation: the decimal label of the sector,
/// `4*(I<0) + 2*(R<0) + (|R|<|I|)`. Ties use the strict comparisons as
/// written, so boundary points go to the lower label.
pub fn psk8_hard_decision<T: Real>(x_e: Complex<T>) -> usize {
    let mut m = 0;
    if x_e.im < T::zero() {
        m += 4;
    }
    if x_e.re < T::zero() {
        m += 2;
    }
    if x_e.re.abs() < x_e.im.abs() {
        m += 1;
    }
    m
}

/// Precomputed 8-PSK demapping directions: row `m` holds
/// `Delta_{m,q} = 2*(1-2*b_q(m))*(alpha_m - alpha_opp)` for `q = 1..3`,
/// where `alpha_opp` is the nearest point with the opposite bit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psk8Lut<T> {
    rows: [[Complex<T>; 3]; 8],
}

impl<T: Real> Psk8Lut<T> {
    pub fn rows(&self) -> &[[Complex<T>; 3]; 8] {
        &self.rows
    }

    pub fn entry(&self, m: usize, q: usize) -> Complex<T> {
        self.rows[m][q - 1]
    }
}

/// Builds the 8-PSK LUT from the constellation geometry.
pub fn psk8_lut_build<T: Real>(c: &Constellation<T>) -> Psk8Lut<T> {
    assert_eq!(c.kind(), ConstellationKind::Psk8, "LUT is specific to 8-PSK");
    let zero = Complex::new(T::zero(), T::zero());
    let mut rows = [[zero; 3]; 8];
    for (m, row) in rows.iter_mut().enumerate() {
        for q in 1..=3 {
            let here = c.points()[m];
            let opposite = (0..8)
                .filter(|&n| c.label_bit(n, q) != c.label_bit(m, q))
                .min_by(|&a, &b| {
                    let da = (here - c.points()[a]).norm_sqr();
                    let db = (here - c.points()[b]).norm_sqr();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let sign = if c.label_bit(m, q) == 0 { T::one() } else { -T::one() };
            row[q - 1] = (here - c.points()[opposite]) * lit::<T>(2.0) * sign;
        }
    }
    Psk8Lut { rows }
}

/// Closed-form / LUT demapper taking `1/v` as the scale parameter.
///
/// QPSK and 16-QAM use the per-axis analytical forms; 8-PSK makes a hard
/// sector decision, fetches the matching [`Psk8Lut`] row, and evaluates one
/// inner product per bit.
#[derive(Debug, Clone)]
pub struct AnalyticDemapper<T> {
    kind: ConstellationKind,
    half_spacing: T,
    qpsk_coef: T,
    lut: Option<Psk8Lut<T>>,
}

impl<T: Real> AnalyticDemapper<T> {
    pub fn new(c: &Constellation<T>) -> Self {
        AnalyticDemapper {
            kind: c.kind(),
            half_spacing: qam16_half_spacing::<T>(),
            qpsk_coef: lit::<T>(2.0) * lit::<T>(2.0).sqrt(),
            lut: (c.kind() == ConstellationKind::Psk8).then(|| psk8_lut_build(c)),
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn lut(&self) -> Option<&Psk8Lut<T>> {
        self.lut.as_ref()
    }

    /// Writes `Q` LLRs for one observation into `out`.
    pub fn llrs_into(&self, x_e: Complex<T>, v_e_inv: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.kind.bits_per_symbol());
        match self.kind {
            ConstellationKind::Qpsk => {
                out[0] = self.qpsk_coef * x_e.re * v_e_inv;
                out[1] = self.qpsk_coef * x_e.im * v_e_inv;
            }
            ConstellationKind::Qam16 => {
                let d = self.half_spacing;
                let two_d = d + d;
                let four_d = two_d + two_d;
                let eight_d = four_d + four_d;
                out[0] = four_d * (two_d - x_e.im.abs()) * v_e_inv;
                out[1] = four_d * (two_d - x_e.re.abs()) * v_e_inv;
                out[2] = Self::qam16_sign_llr(x_e.im, d, two_d, four_d, eight_d) * v_e_inv;
                out[3] = Self::qam16_sign_llr(x_e.re, d, two_d, four_d, eight_d) * v_e_inv;
            }
            ConstellationKind::Psk8 => {
                let lut = self.lut.as_ref().expect("8-PSK demapper carries its LUT");
                let row = &lut.rows()[psk8_hard_decision(x_e)];
                for (o, delta) in out.iter_mut().zip(row.iter()) {
                    *o = (x_e.re * delta.re + x_e.im * delta.im) * v_e_inv;
                }
            }
        }
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn llrs(&self, x_e: Complex<T>, v_e_inv: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.kind.bits_per_symbol()];
        self.llrs_into(x_e, v_e_inv, &mut out);
        out
    }

    fn qam16_sign_llr(u: T, d: T, two_d: T, four_d: T, eight_d: T) -> T {
        if u.abs() < two_d {
            four_d * u
        } else if u > two_d {
            eight_d * (u - d)
        } else {
            eight_d * (u + d)
        }
    }
}
