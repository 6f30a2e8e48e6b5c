//! Bit-exact fixed-point kernels for the three per-symbol receiver stages —
//! bitwise demapper, soft-bit + bitwise mapper, and EP soft estimate — plus
//! golden-vector generation for hardware conformance.
//!
//! Each kernel evaluates its expression as an exact integer multiply-
//! accumulate and applies a single round-to-nearest / saturate step into the
//! output format, so a kernel output is fully determined by the input raws
//! and the quantized constants. Constants are quantized once at the symbol
//! format and are part of the bit-exact contract; the 16-QAM grid constants
//! `2d / 4d / 8d` are derived from the quantized `d` by shifts.

use std::io::{BufRead, Write};
use std::str::FromStr;

use arrayvec::ArrayVec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::{
    psk8_mapping_constants, qam16_half_spacing, Constellation, ConstellationKind,
};
use crate::demap::{psk8_lut_build, Psk8Lut};
use crate::fixed_point::{quantize, resize_raw, FxValue, QFormat};
use crate::{Error, Result};

/// Q-format allocation for the named variables of the fixed-point chain.
///
/// The defaults give every named variable 8 bits total: symbols and means
/// `s2.5`, LLRs `s4.3`, soft bits `s1.6`, the EP coefficient `u2.6`, and the
/// reciprocal noise variance `u4.4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxProfile {
    pub symbol: QFormat,
    pub llr: QFormat,
    pub soft_bit: QFormat,
    pub cep: QFormat,
    pub inv_var: QFormat,
}

impl Default for FxProfile {
    fn default() -> Self {
        FxProfile {
            symbol: QFormat::new(true, 2, 5),
            llr: QFormat::new(true, 4, 3),
            soft_bit: QFormat::new(true, 1, 6),
            cep: QFormat::new(false, 2, 6),
            inv_var: QFormat::new(false, 4, 4),
        }
    }
}

impl FxProfile {
    /// Widest supported allocation, for precision studies.
    pub fn wide() -> Self {
        FxProfile {
            symbol: QFormat::new(true, 4, 11),
            llr: QFormat::new(true, 5, 10),
            soft_bit: QFormat::new(true, 1, 14),
            cep: QFormat::new(false, 2, 14),
            inv_var: QFormat::new(false, 5, 11),
        }
    }
}

/// Fixed-point kernels for one constellation under one format profile.
///
/// Holds the quantized demapper and mapper constants; all methods are pure
/// and re-entrant.
#[derive(Debug, Clone)]
pub struct FxKernels {
    kind: ConstellationKind,
    profile: FxProfile,
    // Demapper constants at the symbol format.
    qpsk_coef: i64,
    qam_d: i64,
    lut: [[(i64, i64); 3]; 8],
    // Mapper constants at the symbol format.
    inv_sqrt2: i64,
    inv_sqrt10: i64,
    a8: i64,
    b8: i64,
}

impl FxKernels {
    pub fn new(kind: ConstellationKind, profile: FxProfile) -> Self {
        let sym = profile.symbol;
        let q = |x: f64| quantize(x, sym).raw() as i64;
        let (a8, b8) = psk8_mapping_constants::<f64>();
        let mut lut = [[(0i64, 0i64); 3]; 8];
        if kind == ConstellationKind::Psk8 {
            let float_lut: Psk8Lut<f64> = psk8_lut_build(&Constellation::new(kind));
            for (m, row) in lut.iter_mut().enumerate() {
                for (i, cell) in row.iter_mut().enumerate() {
                    let delta = float_lut.entry(m, i + 1);
                    *cell = (q(delta.re), q(delta.im));
                }
            }
        }
        FxKernels {
            kind,
            profile,
            qpsk_coef: q(2.0 * 2.0f64.sqrt()),
            qam_d: q(qam16_half_spacing::<f64>()),
            lut,
            inv_sqrt2: q(0.5f64.sqrt()),
            inv_sqrt10: q(0.1f64.sqrt()),
            a8: q(a8),
            b8: q(b8),
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn profile(&self) -> &FxProfile {
        &self.profile
    }

    /// Quantized 8-PSK LUT raws at the symbol format, rows by decimal label.
    pub fn quantized_lut(&self) -> &[[(i64, i64); 3]; 8] {
        &self.lut
    }

    fn check(&self, v: FxValue, fmt: QFormat, what: &str) {
        assert_eq!(v.format(), fmt, "{what} must be in the profile's {fmt} format");
    }

    /// Bitwise demapper: `Q` LLRs from one equalized symbol and the
    /// reciprocal noise variance.
    pub fn demap(&self, x_e: (FxValue, FxValue), inv_v: FxValue) -> ArrayVec<FxValue, 4> {
        let sym = self.profile.symbol;
        self.check(x_e.0, sym, "x_e real part");
        self.check(x_e.1, sym, "x_e imaginary part");
        self.check(inv_v, self.profile.inv_var, "inv_v");
        let fs = sym.frac_bits();
        let frac = 2 * fs + self.profile.inv_var.frac_bits();
        let llr = self.profile.llr;
        let re = x_e.0.raw() as i64;
        let im = x_e.1.raw() as i64;
        let inv = inv_v.raw() as i64;
        let mut out = ArrayVec::new();
        match self.kind {
            ConstellationKind::Qpsk => {
                out.push(resize_raw(self.qpsk_coef * re * inv, frac, llr));
                out.push(resize_raw(self.qpsk_coef * im * inv, frac, llr));
            }
            ConstellationKind::Qam16 => {
                let two_d = self.qam_d << 1;
                let four_d = self.qam_d << 2;
                let eight_d = self.qam_d << 3;
                out.push(resize_raw(four_d * (two_d - im.abs()) * inv, frac, llr));
                out.push(resize_raw(four_d * (two_d - re.abs()) * inv, frac, llr));
                for u in [im, re] {
                    let acc = if u.abs() < two_d {
                        four_d * u
                    } else if u > two_d {
                        eight_d * (u - self.qam_d)
                    } else {
                        eight_d * (u + self.qam_d)
                    };
                    out.push(resize_raw(acc * inv, frac, llr));
                }
            }
            ConstellationKind::Psk8 => {
                let mut m = 0usize;
                if im < 0 {
                    m += 4;
                }
                if re < 0 {
                    m += 2;
                }
                if re.abs() < im.abs() {
                    m += 1;
                }
                for &(dr, di) in &self.lut[m] {
                    out.push(resize_raw((re * dr + im * di) * inv, frac, llr));
                }
            }
        }
        out
    }

    /// Piecewise-linear `tanh(L/2)` in fixed point. The slopes and biases
    /// are powers of two, so the result is exact before the final resize
    /// into the soft-bit format.
    pub fn soft_bit(&self, llr: FxValue) -> FxValue {
        self.check(llr, self.profile.llr, "llr");
        // Halving the LLR reinterprets its raw at one more fractional bit.
        let g = self.profile.llr.frac_bits() + 1;
        let x = llr.raw() as i64;
        let ax = x.abs();
        let sign = x.signum();
        let half = 1i64 << (g - 1);
        let one = 1i64 << g;
        let two = 1i64 << (g + 1);
        // p is formed at g+2 fractional bits; every segment is a shift.
        let p = if ax < half {
            x << 2
        } else if ax < one {
            (x << 1) + sign * (1 << g)
        } else if ax < two {
            x + sign * (1 << (g + 1))
        } else {
            sign << (g + 2)
        };
        resize_raw(p, g + 2, self.profile.soft_bit)
    }

    /// Bitwise soft mapper: soft bits from `Q` LLRs, then the
    /// per-constellation mean expressions. Returns `(re, im)` of the mean.
    pub fn softmap(&self, llrs: &[FxValue]) -> (FxValue, FxValue) {
        assert_eq!(llrs.len(), self.kind.bits_per_symbol(), "expected Q LLRs");
        let mut p = [0i64; 4];
        for (slot, &l) in p.iter_mut().zip(llrs) {
            *slot = self.soft_bit(l).raw() as i64;
        }
        let fp = self.profile.soft_bit.frac_bits();
        let fs = self.profile.symbol.frac_bits();
        let sym = self.profile.symbol;
        match self.kind {
            ConstellationKind::Qpsk => (
                resize_raw(p[0] * self.inv_sqrt2, fp + fs, sym),
                resize_raw(p[1] * self.inv_sqrt2, fp + fs, sym),
            ),
            ConstellationKind::Psk8 => {
                let base = self.b8 << fp;
                let re = (base + self.a8 * p[0]) * p[1];
                let im = (base - self.a8 * p[0]) * p[2];
                (
                    resize_raw(re, fs + 2 * fp, sym),
                    resize_raw(im, fs + 2 * fp, sym),
                )
            }
            ConstellationKind::Qam16 => {
                let two = 1i64 << (fp + 1);
                let re = (two - p[1]) * p[3] * self.inv_sqrt10;
                let im = (two - p[0]) * p[2] * self.inv_sqrt10;
                (
                    resize_raw(re, 2 * fp + fs, sym),
                    resize_raw(im, 2 * fp + fs, sym),
                )
            }
        }
    }

    /// EP soft estimate `x_d = mu + c_ep*(mu - x_e)` as one exact
    /// multiply-add per component with a single final rounding.
    pub fn ep_estimate(
        &self,
        mu: (FxValue, FxValue),
        x_e: (FxValue, FxValue),
        c_ep: FxValue,
    ) -> (FxValue, FxValue) {
        let sym = self.profile.symbol;
        self.check(mu.0, sym, "mu real part");
        self.check(mu.1, sym, "mu imaginary part");
        self.check(x_e.0, sym, "x_e real part");
        self.check(x_e.1, sym, "x_e imaginary part");
        self.check(c_ep, self.profile.cep, "c_ep");
        let fc = self.profile.cep.frac_bits();
        let fs = sym.frac_bits();
        let c = c_ep.raw() as i64;
        let component = |mu_c: FxValue, xe_c: FxValue| {
            let m = mu_c.raw() as i64;
            let delta = m - xe_c.raw() as i64;
            resize_raw((m << fc) + c * delta, fs + fc, sym)
        };
        (component(mu.0, x_e.0), component(mu.1, x_e.1))
    }
}

/// The three hardware kernel stages covered by golden vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelBlock {
    Demap,
    Map,
    Ep,
}

impl KernelBlock {
    pub const fn name(self) -> &'static str {
        match self {
            KernelBlock::Demap => "demap",
            KernelBlock::Map => "map",
            KernelBlock::Ep => "ep",
        }
    }
}

impl FromStr for KernelBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demap" => Ok(KernelBlock::Demap),
            "map" => Ok(KernelBlock::Map),
            "ep" => Ok(KernelBlock::Ep),
            other => Err(Error::InvalidConfig(format!(
                "unknown kernel block '{other}' (expected demap, map, or ep)"
            ))),
        }
    }
}

/// Input formats of a kernel block, in row field order.
pub fn block_input_formats(block: KernelBlock, kind: ConstellationKind, p: &FxProfile) -> Vec<QFormat> {
    match block {
        KernelBlock::Demap => vec![p.symbol, p.symbol, p.inv_var],
        KernelBlock::Map => vec![p.llr; kind.bits_per_symbol()],
        KernelBlock::Ep => vec![p.symbol, p.symbol, p.symbol, p.symbol, p.cep],
    }
}

/// Output formats of a kernel block, in row field order.
pub fn block_output_formats(block: KernelBlock, kind: ConstellationKind, p: &FxProfile) -> Vec<QFormat> {
    match block {
        KernelBlock::Demap => vec![p.llr; kind.bits_per_symbol()],
        KernelBlock::Map | KernelBlock::Ep => vec![p.symbol, p.symbol],
    }
}

/// A recorded set of kernel input/output raw pairs; replaying the inputs
/// through the kernel must reproduce the outputs bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenVectorSet {
    pub block: KernelBlock,
    pub constellation: ConstellationKind,
    pub fmt_in: Vec<QFormat>,
    pub fmt_out: Vec<QFormat>,
    pub seed: u64,
    pub rows: Vec<GoldenRow>,
}

/// One stimulus/response pair of raw values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenRow {
    pub inputs: Vec<i32>,
    pub outputs: Vec<i32>,
}

/// Generates `count` uniformly random in-range stimuli and the kernel's
/// bit-exact responses; reproducible from the seed.
pub fn gen_golden_vectors(
    block: KernelBlock,
    kernels: &FxKernels,
    count: usize,
    seed: u64,
) -> GoldenVectorSet {
    let kind = kernels.kind();
    let profile = kernels.profile();
    let fmt_in = block_input_formats(block, kind, profile);
    let fmt_out = block_output_formats(block, kind, profile);
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let inputs: Vec<i32> = fmt_in
            .iter()
            .map(|f| rng.gen_range(f.min_raw()..=f.max_raw()))
            .collect();
        let outputs = run_block(block, kernels, &fmt_in, &inputs);
        rows.push(GoldenRow { inputs, outputs });
    }
    GoldenVectorSet {
        block,
        constellation: kind,
        fmt_in,
        fmt_out,
        seed,
        rows,
    }
}

fn run_block(block: KernelBlock, kernels: &FxKernels, fmt_in: &[QFormat], inputs: &[i32]) -> Vec<i32> {
    let v = |i: usize| FxValue::from_raw(inputs[i], fmt_in[i]);
    match block {
        KernelBlock::Demap => kernels
            .demap((v(0), v(1)), v(2))
            .iter()
            .map(|l| l.raw())
            .collect(),
        KernelBlock::Map => {
            let llrs: Vec<FxValue> = (0..inputs.len()).map(v).collect();
            let (re, im) = kernels.softmap(&llrs);
            vec![re.raw(), im.raw()]
        }
        KernelBlock::Ep => {
            let (re, im) = kernels.ep_estimate((v(0), v(1)), (v(2), v(3)), v(4));
            vec![re.raw(), im.raw()]
        }
    }
}

impl GoldenVectorSet {
    /// Writes the set in the text exchange format:
    ///
    /// ```text
    /// # block=demap constellation=qpsk fmt_in=s2.5,s2.5,u4.4 fmt_out=s4.3,s4.3 seed=7
    /// IN 5c 80 f3 OUT 35 cb
    /// ```
    ///
    /// Raw values are two's-complement hex tokens sized to the format width.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let fmts = |fs: &[QFormat]| fs.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",");
        writeln!(
            w,
            "# block={} constellation={} fmt_in={} fmt_out={} seed={}",
            self.block.name(),
            self.constellation.name(),
            fmts(&self.fmt_in),
            fmts(&self.fmt_out),
            self.seed
        )?;
        for row in &self.rows {
            write!(w, "IN")?;
            for (raw, fmt) in row.inputs.iter().zip(&self.fmt_in) {
                write!(w, " {}", hex_token(*raw, *fmt))?;
            }
            write!(w, " OUT")?;
            for (raw, fmt) in row.outputs.iter().zip(&self.fmt_out) {
                write!(w, " {}", hex_token(*raw, *fmt))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parses a set previously written by [`GoldenVectorSet::write_to`].
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedVectorFile(msg.to_string());
        let mut lines = r.lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(bad("missing header")),
            }
        };
        let header = header.strip_prefix('#').ok_or_else(|| bad("header must start with '#'"))?;
        let mut block = None;
        let mut constellation = None;
        let mut fmt_in = None;
        let mut fmt_out = None;
        let mut seed = None;
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| bad("header tokens must be key=value"))?;
            match key {
                "block" => block = Some(value.parse::<KernelBlock>()?),
                "constellation" => constellation = Some(value.parse::<ConstellationKind>()?),
                "fmt_in" => fmt_in = Some(parse_formats(value)?),
                "fmt_out" => fmt_out = Some(parse_formats(value)?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|_| bad("seed must be an integer"))?)
                }
                _ => return Err(bad(&format!("unknown header key '{key}'"))),
            }
        }
        let fmt_in = fmt_in.ok_or_else(|| bad("header missing fmt_in"))?;
        let fmt_out = fmt_out.ok_or_else(|| bad("header missing fmt_out"))?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            if tokens.next() != Some("IN") {
                return Err(bad("row must start with IN"));
            }
            let mut inputs = Vec::with_capacity(fmt_in.len());
            for fmt in &fmt_in {
                let tok = tokens.next().ok_or_else(|| bad("row truncated in inputs"))?;
                inputs.push(parse_hex_token(tok, *fmt)?);
            }
            if tokens.next() != Some("OUT") {
                return Err(bad("row missing OUT marker"));
            }
            let mut outputs = Vec::with_capacity(fmt_out.len());
            for fmt in &fmt_out {
                let tok = tokens.next().ok_or_else(|| bad("row truncated in outputs"))?;
                outputs.push(parse_hex_token(tok, *fmt)?);
            }
            if tokens.next().is_some() {
                return Err(bad("trailing tokens in row"));
            }
            rows.push(GoldenRow { inputs, outputs });
        }
        Ok(GoldenVectorSet {
            block: block.ok_or_else(|| bad("header missing block"))?,
            constellation: constellation.ok_or_else(|| bad("header missing constellation"))?,
            fmt_in,
            fmt_out,
            seed: seed.ok_or_else(|| bad("header missing seed"))?,
            rows,
        })
    }

    /// Replays every row through the kernels, checking bit-exact equality.
    pub fn verify(&self, kernels: &FxKernels) -> Result<()> {
        let expect_in = block_input_formats(self.block, kernels.kind(), kernels.profile());
        let expect_out = block_output_formats(self.block, kernels.kind(), kernels.profile());
        if self.constellation != kernels.kind() || self.fmt_in != expect_in || self.fmt_out != expect_out {
            return Err(Error::MalformedVectorFile(
                "vector set formats do not match the kernel profile".into(),
            ));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let got = run_block(self.block, kernels, &self.fmt_in, &row.inputs);
            if got != row.outputs {
                return Err(Error::GoldenMismatch { row: i });
            }
        }
        Ok(())
    }
}

fn parse_formats(s: &str) -> Result<Vec<QFormat>> {
    s.split(',').map(|f| f.parse::<QFormat>()).collect()
}

fn hex_token(raw: i32, fmt: QFormat) -> String {
    let width = (fmt.total_bits() as usize).div_ceil(4);
    let mask = (1u32 << fmt.total_bits()) - 1;
    format!("{:0width$x}", (raw as u32) & mask)
}

fn parse_hex_token(tok: &str, fmt: QFormat) -> Result<i32> {
    let bits = fmt.total_bits();
    let val = u32::from_str_radix(tok, 16)
        .map_err(|_| Error::MalformedVectorFile(format!("bad hex token '{tok}'")))?;
    if val >= 1u32 << bits {
        return Err(Error::MalformedVectorFile(format!(
            "token '{tok}' exceeds {bits} bits"
        )));
    }
    let raw = if fmt.signed() && val & (1 << (bits - 1)) != 0 {
        val as i32 - (1i32 << bits)
    } else {
        val as i32
    };
    Ok(raw)
}
