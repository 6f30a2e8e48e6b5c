//! Monte-Carlo BER sweep engine with seeded, thread-count-independent
//! reproducibility, plus CSV emission.
//!
//! Each frame draws its own generator from `mix(master seed, SNR bits,
//! frame index)`, so frames can run in parallel and the aggregate counts do
//! not depend on scheduling. The stop rule is evaluated on fixed-size frame
//! chunks, which keeps the set of simulated frames — and therefore the CSV
//! bytes — identical for any worker-thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{transmit, ChannelModel, ChannelPreset};
use crate::constellation::{Constellation, ConstellationKind};
use crate::equalizer::{ReceiverConfig, ReceiverMode, SileReceiver};
use crate::softmap::{CepTable, DEFAULT_CEP_GRID};
use crate::{Error, Result, Scalar};

/// Frames simulated between stop-rule evaluations.
const FRAME_CHUNK: u64 = 64;

/// Samples per grid point when building the receiver's EP table.
pub const CEP_TABLE_SAMPLES: usize = 20_000;

/// Fixed seed for the receiver's EP table, independent of the sweep seed.
pub const CEP_TABLE_SEED: u64 = 0x0ce9;

/// SNR grid `start..=stop` in steps of `step` dB. Textual form is
/// `start:step:stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl SnrGrid {
    pub fn single(snr_db: f64) -> Self {
        SnrGrid {
            start: snr_db,
            step: 1.0,
            stop: snr_db,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let snr = self.start + self.step * f64::from(i);
            if snr > self.stop + 1e-9 {
                break;
            }
            out.push(snr);
            i += 1;
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || self.stop < self.start {
            return Err(Error::InvalidConfig(format!(
                "bad SNR grid {}:{}:{} (need step > 0 and stop >= start)",
                self.start, self.step, self.stop
            )));
        }
        Ok(())
    }
}

impl FromStr for SnrGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidConfig(format!("bad SNR range '{s}', expected start:step:stop"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = SnrGrid {
            start: parts[0].parse().map_err(|_| bad())?,
            step: parts[1].parse().map_err(|_| bad())?,
            stop: parts[2].parse().map_err(|_| bad())?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Full parameter set for one BER sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub constellation: ConstellationKind,
    pub channel: ChannelPreset,
    pub self_iterations: usize,
    pub mode: ReceiverMode,
    pub block_len: usize,
    pub snr: SnrGrid,
    pub min_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            constellation: ConstellationKind::Qpsk,
            channel: ChannelPreset::ProakisC,
            self_iterations: 1,
            mode: ReceiverMode::SimplifiedFloat,
            block_len: 256,
            snr: SnrGrid {
                start: 0.0,
                step: 1.0,
                stop: 20.0,
            },
            min_errors: 100,
            max_frames: 10_000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.snr.validate()?;
        if self.min_errors == 0 {
            return Err(Error::InvalidConfig("min-errors must be at least 1".into()));
        }
        if self.max_frames == 0 {
            return Err(Error::InvalidConfig("max-frames must be at least 1".into()));
        }
        if !self.block_len.is_power_of_two() {
            return Err(Error::BlockLengthNotPowerOfTwo(self.block_len));
        }
        Ok(())
    }
}

/// One measured `(SNR, BER)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mode: ReceiverMode,
    pub constellation: ConstellationKind,
    pub s: usize,
}

impl BerRecord {
    pub const CSV_HEADER: &'static str = "snr_db,frames,bits,bit_errors,ber,mode,constellation,s";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.snr_db,
            self.frames,
            self.bits,
            self.bit_errors,
            self.ber,
            self.mode.name(),
            self.constellation.name(),
            self.s
        )
    }
}

/// A configured sweep with the receiver and channel response built once.
pub struct BerHarness {
    config: SweepConfig,
    receiver: SileReceiver<Scalar>,
    channel: ChannelModel<Scalar>,
    h: Vec<crate::Cplx>,
}

impl BerHarness {
    pub fn new(config: SweepConfig) -> Result<Self> {
        config.validate()?;
        let constellation = Constellation::new(config.constellation);
        let cep = CepTable::build(&constellation, DEFAULT_CEP_GRID, CEP_TABLE_SAMPLES, CEP_TABLE_SEED)?;
        let receiver = SileReceiver::new(
            ReceiverConfig {
                kind: config.constellation,
                self_iterations: config.self_iterations,
                mode: config.mode,
                block_len: config.block_len,
            },
            cep,
        )?;
        let channel = ChannelModel::preset(config.channel);
        let h = channel.freq_response(config.block_len);
        Ok(BerHarness {
            config,
            receiver,
            channel,
            h,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.config
    }

    /// Simulates one SNR point until the stop rule fires: at least
    /// `min_errors` bit errors, or `max_frames` frames.
    pub fn run_point(&self, snr_db: f64) -> Result<BerRecord> {
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let bits_per_frame = (self.config.block_len * self.config.constellation.bits_per_symbol()) as u64;
        let mut frames = 0u64;
        let mut bit_errors = 0u64;
        let mut first_error: Option<Error> = None;
        while frames < self.config.max_frames && bit_errors < self.config.min_errors {
            let chunk = FRAME_CHUNK.min(self.config.max_frames - frames);
            let results: Vec<Result<u64>> = (frames..frames + chunk)
                .into_par_iter()
                .map(|f| self.run_frame(snr_db, sigma2, f))
                .collect();
            for r in results {
                match r {
                    Ok(e) => bit_errors += e,
                    Err(e) => {
                        first_error = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
            frames += chunk;
        }
        let bits = frames * bits_per_frame;
        Ok(BerRecord {
            snr_db,
            frames,
            bits,
            bit_errors,
            ber: bit_errors as f64 / bits as f64,
            mode: self.config.mode,
            constellation: self.config.constellation,
            s: self.config.self_iterations,
        })
    }

    fn run_frame(&self, snr_db: f64, sigma2: f64, frame: u64) -> Result<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(self.config.seed, snr_db, frame));
        let q = self.config.constellation.bits_per_symbol();
        let bits: Vec<u8> = (0..self.config.block_len * q)
            .map(|_| rng.gen_range(0..=1u8))
            .collect();
        let x = self.receiver.constellation().map_bits(&bits)?;
        let y = transmit(&x, &self.channel, sigma2, &mut rng);
        let llrs = self.receiver.receive(&y, &self.h, sigma2)?;
        let errors = llrs
            .hard_bits()
            .iter()
            .zip(&bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        Ok(errors)
    }

    /// Runs every grid point in ascending order, streaming CSV rows.
    pub fn run_sweep(&self, out: &mut impl Write) -> Result<Vec<BerRecord>> {
        writeln!(out, "{}", BerRecord::CSV_HEADER)?;
        let mut records = Vec::new();
        for snr in self.config.snr.points() {
            let record = self.run_point(snr)?;
            writeln!(out, "{}", record.csv_line())?;
            records.push(record);
        }
        Ok(records)
    }
}

/// Runs a single SNR point under `cfg` (the EP table and channel response
/// are rebuilt; use [`BerHarness`] directly for many points).
pub fn run_ber_point(cfg: &SweepConfig, snr_db: f64) -> Result<BerRecord> {
    BerHarness::new(cfg.clone())?.run_point(snr_db)
}

/// Runs the configured sweep and writes the CSV to `path`. The output file
/// is created before any simulation work starts.
pub fn run_sweep_to_path(cfg: &SweepConfig, path: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    let file = File::create(path)?;
    let harness = BerHarness::new(cfg.clone())?;
    let mut writer = BufWriter::new(file);
    let records = harness.run_sweep(&mut writer)?;
    writer.flush()?;
    Ok(records)
}

/// Derives the per-frame generator seed from the master seed, the SNR
/// point, and the frame index (splitmix64 finalizer).
fn frame_seed(master: u64, snr_db: f64, frame: u64) -> u64 {
    let mut z = master
        .wrapping_add(snr_db.to_bits().rotate_left(17))
        .wrapping_add(frame.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            constellation: ConstellationKind::Qpsk,
            channel: ChannelPreset::Flat,
            self_iterations: 0,
            mode: ReceiverMode::SimplifiedFloat,
            block_len: 64,
            snr: SnrGrid::single(4.0),
            min_errors: 50,
            max_frames: 200,
            seed: 1,
        }
    }

    #[test]
    fn snr_grid_parsing_and_points() {
        let grid: SnrGrid = "0:2:6".parse().unwrap();
        assert_eq!(grid.points(), vec![0.0, 2.0, 4.0, 6.0]);
        let single: SnrGrid = "5:1:5".parse().unwrap();
        assert_eq!(single.points(), vec![5.0]);
        assert!("5:0:6".parse::<SnrGrid>().is_err());
        assert!("6:1:5".parse::<SnrGrid>().is_err());
        assert!("1:2".parse::<SnrGrid>().is_err());
        assert!("a:b:c".parse::<SnrGrid>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.min_errors = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.block_len = 100;
        assert!(cfg.validate().is_err());
        assert!(small_cfg().validate().is_ok());
    }

    #[test]
    fn noiseless_point_has_zero_errors() {
        let mut cfg = small_cfg();
        cfg.snr = SnrGrid::single(100.0);
        cfg.max_frames = 20;
        let record = run_ber_point(&cfg, 100.0).unwrap();
        assert_eq!(record.bit_errors, 0);
        assert_eq!(record.frames, 20);
        assert_eq!(record.bits, 20 * 64 * 2);
        assert_eq!(record.ber, 0.0);
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = small_cfg();
        let harness = BerHarness::new(cfg).unwrap();
        let a = harness.run_point(4.0).unwrap();
        let b = harness.run_point(4.0).unwrap();
        assert_eq!(a, b);
        assert!(a.bit_errors >= 50 || a.frames == 200);
    }

    #[test]
    fn stop_rule_respects_min_errors() {
        let mut cfg = small_cfg();
        cfg.snr = SnrGrid::single(0.0);
        cfg.min_errors = 10;
        cfg.max_frames = 10_000;
        let record = run_ber_point(&cfg, 0.0).unwrap();
        assert!(record.bit_errors >= 10);
        // Low SNR: one chunk is plenty, so the frame count stays small.
        assert!(record.frames <= 2 * FRAME_CHUNK);
    }

    #[test]
    fn sweep_csv_shape() {
        let mut cfg = small_cfg();
        cfg.snr = "2:2:6".parse().unwrap();
        cfg.max_frames = 50;
        cfg.min_errors = 20;
        let harness = BerHarness::new(cfg).unwrap();
        let mut buf = Vec::new();
        let records = harness.run_sweep(&mut buf).unwrap();
        assert_eq!(records.len(), 3);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BerRecord::CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("2,"));
        assert!(lines[1].ends_with(",simplified,qpsk,0"));
        // Monotone SNR order.
        let snrs: Vec<f64> = records.iter().map(|r| r.snr_db).collect();
        assert_eq!(snrs, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn csv_bytes_independent_of_thread_count() {
        let mut cfg = small_cfg();
        cfg.max_frames = 100;
        let csv_with_threads = |n: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            let cfg = cfg.clone();
            pool.install(move || {
                let harness = BerHarness::new(cfg).unwrap();
                let mut buf = Vec::new();
                harness.run_sweep(&mut buf).unwrap();
                buf
            })
        };
        let single = csv_with_threads(1);
        let multi = csv_with_threads(4);
        assert_eq!(single, multi);
    }

    #[test]
    fn frame_seeds_decorrelate() {
        let a = frame_seed(1, 4.0, 0);
        let b = frame_seed(1, 4.0, 1);
        let c = frame_seed(1, 5.0, 0);
        let d = frame_seed(2, 4.0, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    /// AWGN QPSK sanity: measured BER is non-increasing in SNR up to
    /// Monte-Carlo noise.
    #[test]
    fn awgn_ber_is_monotone_in_snr() {
        let mut cfg = small_cfg();
        cfg.snr = "0:3:9".parse().unwrap();
        cfg.min_errors = 200;
        cfg.max_frames = 2000;
        let harness = BerHarness::new(cfg).unwrap();
        let mut buf = Vec::new();
        let records = harness.run_sweep(&mut buf).unwrap();
        for pair in records.windows(2) {
            let sigma = (pair[0].ber * (1.0 - pair[0].ber) / pair[0].bits as f64).sqrt();
            assert!(
                pair[1].ber <= pair[0].ber + 3.0 * sigma,
                "{} dB: {} then {} dB: {}",
                pair[0].snr_db,
                pair[0].ber,
                pair[1].snr_db,
                pair[1].ber
            );
        }
    }
}
