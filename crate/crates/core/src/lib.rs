//! Link-level simulation and bit-exact reference modeling for an
//! expectation-propagation based frequency-domain self-iterated linear
//! equalizer (FD-SILE).
//!
//! The crate covers the full receive chain for QPSK, 8-PSK, and 16-QAM over
//! frequency-selective block channels:
//!
//! * [`constellation`] — Gray-mapped unit-energy constellations and bit
//!   labeling.
//! * [`demap`] — exact log-MAP, max-log-MAP, and closed-form/LUT soft
//!   demappers.
//! * [`softmap`] — a posteriori moments, bitwise soft mapping, and EP
//!   feedback (exact Gaussian division and the tabulated simplified form).
//! * [`equalizer`] — frequency-domain MMSE interference cancellation and the
//!   self-iterated receiver loop.
//! * [`fixed_point`] — Q-format arithmetic with saturation and
//!   round-to-nearest.
//! * [`fx_kernels`] — bit-exact 8-bit kernels for the demap / soft-map / EP
//!   stages, plus golden-vector generation for hardware conformance.
//! * [`channel`] — block transmission with circular convolution and AWGN.
//! * [`harness`] — seeded Monte-Carlo BER sweeps with CSV output.
//!
//! Floating-point math is generic over the scalar type through [`Real`];
//! `f64` is the default precision used by the CLI (see [`Scalar`]).

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub mod channel;
pub mod constellation;
pub mod demap;
pub mod equalizer;
pub mod fixed_point;
pub mod fx_kernels;
pub mod harness;
pub mod softmap;

mod error;

pub use error::{Error, Result};

/// Floating-point scalar usable throughout the receive chain: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum<Self> + fmt::Debug + fmt::Display + rustfft::FftNum
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Default scalar precision used by the CLI and golden tooling.
pub type Scalar = f64;

/// Complex sample in the default precision.
pub type Cplx = num_complex::Complex<Scalar>;

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must convert to the scalar type")
}
