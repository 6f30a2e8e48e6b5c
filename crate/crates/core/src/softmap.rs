//! A posteriori symbol moments, bitwise soft mapping, and EP feedback.
//!
//! Two feedback routes are provided. The exact route normalizes the
//! posterior over all points, takes its moments, and divides out the
//! equalizer's Gaussian (`ep_feedback_exact`). The simplified route maps
//! LLRs to soft bits, forms the mean through the per-constellation bitwise
//! expressions, and replaces the division by one multiply-add with a
//! tabulated coefficient `C_EP(v) = g(v) / (v - g(v))`, where `g(v)` is the
//! average posterior variance under a matched Gaussian observation at noise
//! level `v` ([`CepTable`]).

use std::io::Write;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constellation::{psk8_mapping_constants, Constellation, ConstellationKind};
use crate::{lit, Error, Real, Result};

/// Guard threshold for the Gaussian division denominator `v_e - gamma`.
pub const GUARD_EPS: f64 = 1e-6;

/// Feedback variance substituted when the division guard trips.
pub const V_MAX: f64 = 100.0;

/// Upper clamp for tabulated `C_EP` entries.
pub const C_MAX: f64 = 4.0;

/// Normalizes log-likelihoods into a linear-domain distribution that sums
/// to one. Stable under any common offset of the inputs.
pub fn posterior<T: Real>(ell: &[T]) -> Vec<T> {
    let mut out = ell.to_vec();
    posterior_in_place(&mut out);
    out
}

/// In-place variant of [`posterior`] for per-symbol loops.
pub fn posterior_in_place<T: Real>(ell: &mut [T]) {
    let max = ell.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in ell.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in ell.iter_mut() {
        *v /= sum;
    }
}

/// Mean and variance of a normalized distribution over the constellation:
/// `mu = sum a*D(a)`, `gamma = sum |a|^2*D(a) - |mu|^2`.
pub fn app_moments<T: Real>(d: &[T], c: &Constellation<T>) -> (Complex<T>, T) {
    debug_assert_eq!(d.len(), c.size());
    let mut mu = Complex::new(T::zero(), T::zero());
    let mut power = T::zero();
    for (&w, &a) in d.iter().zip(c.points()) {
        mu += a * w;
        power += a.norm_sqr() * w;
    }
    let gamma = (power - mu.norm_sqr()).max(T::zero());
    (mu, gamma)
}

/// Arithmetic mean of per-symbol variances over a block.
pub fn block_average_variance<T: Real>(per_symbol: &[T]) -> Result<T> {
    if per_symbol.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let sum: T = per_symbol.iter().copied().sum();
    Ok(sum / T::from_usize(per_symbol.len()).unwrap())
}

/// Extrinsic feedback by Gaussian PDF division:
/// `x_d = mu + c*(mu - x_e)` and `v_d = v_e*c` with `c = gamma/(v_e - gamma)`,
/// algebraically equal to `(mu*v_e - x_e*gamma)/(v_e - gamma)`.
///
/// When `v_e - gamma <= GUARD_EPS` the division would blow up or flip sign;
/// the guard path returns `(mu, V_MAX)` instead.
pub fn ep_feedback_exact<T: Real>(
    mu: Complex<T>,
    gamma: T,
    x_e: Complex<T>,
    v_e: T,
) -> (Complex<T>, T) {
    let denom = v_e - gamma;
    if denom <= lit::<T>(GUARD_EPS) {
        return (mu, lit::<T>(V_MAX));
    }
    let c = gamma / denom;
    (mu + (mu - x_e) * c, v_e * c)
}

/// Soft-bit transfer curve selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftBitMode {
    /// `p = tanh(L/2)`.
    Exact,
    /// Piecewise-linear tanh with power-of-two slopes and biases.
    Piecewise,
}

/// Piecewise-linear approximation of `tanh` whose slopes and biases are all
/// powers of two, exact under fixed-point shifts.
pub fn piecewise_tanh<T: Real>(x: T) -> T {
    let ax = x.abs();
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    if ax < half {
        x
    } else if ax < T::one() {
        half * x + quarter * x.signum()
    } else if ax < lit::<T>(2.0) {
        quarter * x + half * x.signum()
    } else {
        x.signum()
    }
}

/// Soft bits `p_q` from LLRs: `tanh(L/2)` exactly or via [`piecewise_tanh`].
pub fn soft_bits<T: Real>(llrs: &[T], mode: SoftBitMode) -> Vec<T> {
    let mut out = vec![T::zero(); llrs.len()];
    soft_bits_into(llrs, mode, &mut out);
    out
}

/// In-place variant of [`soft_bits`].
pub fn soft_bits_into<T: Real>(llrs: &[T], mode: SoftBitMode, out: &mut [T]) {
    let half = lit::<T>(0.5);
    for (o, &l) in out.iter_mut().zip(llrs) {
        *o = match mode {
            SoftBitMode::Exact => (l * half).tanh(),
            SoftBitMode::Piecewise => piecewise_tanh(l * half),
        };
    }
}

/// Mean symbol estimate from soft bits through the per-constellation
/// bitwise expressions (`p_q = +1` pins bit `q` to 0).
pub fn bitwise_mean<T: Real>(p: &[T], kind: ConstellationKind) -> Complex<T> {
    debug_assert_eq!(p.len(), kind.bits_per_symbol());
    match kind {
        ConstellationKind::Qpsk => {
            let s = lit::<T>(2.0).sqrt().recip();
            Complex::new(p[0] * s, p[1] * s)
        }
        ConstellationKind::Psk8 => {
            let (a8, b8) = psk8_mapping_constants::<T>();
            Complex::new((b8 + a8 * p[0]) * p[1], (b8 - a8 * p[0]) * p[2])
        }
        ConstellationKind::Qam16 => {
            let two = lit::<T>(2.0);
            let s = lit::<T>(10.0).sqrt().recip();
            Complex::new((two - p[1]) * p[3] * s, (two - p[0]) * p[2] * s)
        }
    }
}

/// Log-spaced grid specification for [`CepTable::build`].
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        GridSpec { min, max, points }
    }

    fn validate(&self) -> Result<()> {
        if self.points < 2 || self.min <= 0.0 || self.max <= self.min {
            return Err(Error::DegenerateGrid);
        }
        Ok(())
    }
}

/// Default grid covering the operating range of the receiver.
pub const DEFAULT_CEP_GRID: GridSpec = GridSpec {
    min: 1e-3,
    max: 10.0,
    points: 64,
};

/// Monte-Carlo estimate of the average posterior variance at noise level
/// `v`: symbols drawn uniformly, disturbed by circular Gaussian noise of
/// total variance `v`, posterior evaluated with the matched model.
pub fn average_posterior_variance<T: Real>(
    c: &Constellation<T>,
    v: T,
    samples: usize,
    rng: &mut impl Rng,
) -> T {
    let sigma_axis = (v * lit::<T>(0.5)).sqrt();
    let mut ell = vec![T::zero(); c.size()];
    let mut acc = T::zero();
    for _ in 0..samples {
        let a = c.points()[rng.gen_range(0..c.size())];
        let nr: f64 = StandardNormal.sample(rng);
        let ni: f64 = StandardNormal.sample(rng);
        let x = a + Complex::new(lit::<T>(nr) * sigma_axis, lit::<T>(ni) * sigma_axis);
        for (e, &point) in ell.iter_mut().zip(c.points()) {
            *e = -(x - point).norm_sqr() / v;
        }
        posterior_in_place(&mut ell);
        let (_, gamma) = app_moments(&ell, c);
        acc += gamma;
    }
    acc / T::from_usize(samples).unwrap()
}

/// Tabulated EP feedback coefficient over a log-spaced noise grid.
///
/// Lookup interpolates linearly in `log v` and extrapolates flat at both
/// ends; entries are clamped to `[0, C_MAX]`.
#[derive(Debug, Clone)]
pub struct CepTable<T> {
    log_min: T,
    log_step: T,
    vs: Vec<T>,
    gamma_tilde: Vec<T>,
    c_ep: Vec<T>,
}

impl<T: Real> CepTable<T> {
    /// Builds the table by seeded Monte-Carlo sampling at each grid point.
    pub fn build(c: &Constellation<T>, grid: GridSpec, samples: usize, seed: u64) -> Result<Self> {
        grid.validate()?;
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let log_min = lit::<T>(grid.min.ln());
        let log_max = lit::<T>(grid.max.ln());
        let log_step = (log_max - log_min) / T::from_usize(grid.points - 1).unwrap();
        let mut vs = Vec::with_capacity(grid.points);
        let mut gamma_tilde = Vec::with_capacity(grid.points);
        let mut c_ep = Vec::with_capacity(grid.points);
        for i in 0..grid.points {
            let v = (log_min + log_step * T::from_usize(i).unwrap()).exp();
            let g = average_posterior_variance(c, v, samples, &mut rng);
            let coef = if v - g <= T::zero() {
                lit::<T>(C_MAX)
            } else {
                (g / (v - g)).min(lit::<T>(C_MAX)).max(T::zero())
            };
            vs.push(v);
            gamma_tilde.push(g);
            c_ep.push(coef);
        }
        Ok(CepTable {
            log_min,
            log_step,
            vs,
            gamma_tilde,
            c_ep,
        })
    }

    /// Interpolated `C_EP` at noise level `v`.
    pub fn lookup(&self, v: T) -> T {
        let n = self.c_ep.len();
        let pos = (v.max(T::min_positive_value()).ln() - self.log_min) / self.log_step;
        if pos <= T::zero() {
            return self.c_ep[0];
        }
        let last = T::from_usize(n - 1).unwrap();
        if pos >= last {
            return self.c_ep[n - 1];
        }
        let i = pos.floor().to_usize().unwrap().min(n - 2);
        let frac = pos - T::from_usize(i).unwrap();
        self.c_ep[i] + (self.c_ep[i + 1] - self.c_ep[i]) * frac
    }

    /// Grid rows as `(v, gamma_tilde, c_ep)`.
    pub fn entries(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.vs
            .iter()
            .zip(&self.gamma_tilde)
            .zip(&self.c_ep)
            .map(|((&v, &g), &c)| (v, g, c))
    }

    pub fn len(&self) -> usize {
        self.c_ep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_ep.is_empty()
    }

    /// Emits the table as `v,gamma_tilde,c_ep` CSV rows.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "v,gamma_tilde,c_ep")?;
        for (v, g, c) in self.entries() {
            writeln!(w, "{v},{g},{c}")?;
        }
        Ok(())
    }
}

/// Simplified EP feedback: one table lookup plus a multiply-add per symbol,
/// `x_d = mu + C*(mu - x_e)`, `v_d = v_e*C`.
pub fn ep_feedback_simplified<T: Real>(
    mu: Complex<T>,
    x_e: Complex<T>,
    v_e: T,
    table: &CepTable<T>,
) -> (Complex<T>, T) {
    let c = table.lookup(v_e);
    (mu + (mu - x_e) * c, v_e * c)
}
