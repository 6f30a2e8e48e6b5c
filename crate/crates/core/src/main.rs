//! Command-line front end: BER sweeps, golden-vector generation, and EP
//! coefficient table export.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdsile::constellation::{Constellation, ConstellationKind};
use fdsile::fx_kernels::{gen_golden_vectors, FxKernels, FxProfile, KernelBlock};
use fdsile::harness::{run_sweep_to_path, SweepConfig};
use fdsile::softmap::{CepTable, GridSpec};
use fdsile::{Error, Result, Scalar};

#[derive(Parser)]
#[command(
    name = "fdsile",
    version,
    about = "Link-level simulator for an EP-based frequency-domain self-iterated linear equalizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER sweep and write one CSV row per SNR point.
    Ber(BerArgs),
    /// Generate golden vectors for one fixed-point kernel block.
    Vectors(VectorsArgs),
    /// Build the EP coefficient table and emit it as CSV.
    CepTable(CepTableArgs),
}

#[derive(Args)]
struct BerArgs {
    /// Flat key=value file with the same names as the long flags; flags
    /// given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// qpsk | psk8 | qam16
    #[arg(long)]
    constellation: Option<String>,
    /// proakis-c | flat
    #[arg(long)]
    channel: Option<String>,
    /// Self-iteration count S
    #[arg(long = "self-iters")]
    self_iters: Option<usize>,
    /// exact | simplified | fixed
    #[arg(long)]
    mode: Option<String>,
    /// Block length K (power of two)
    #[arg(long = "block-len")]
    block_len: Option<usize>,
    /// SNR grid in dB as start:step:stop
    #[arg(long)]
    snr: Option<String>,
    /// Stop a point after this many bit errors
    #[arg(long = "min-errors")]
    min_errors: Option<u64>,
    /// Hard frame cap per point
    #[arg(long = "max-frames")]
    max_frames: Option<u64>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VectorsArgs {
    /// demap | map | ep
    #[arg(long)]
    block: String,
    /// qpsk | psk8 | qam16
    #[arg(long)]
    constellation: String,
    /// Number of stimulus rows
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output vector file path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CepTableArgs {
    /// qpsk | psk8 | qam16
    #[arg(long)]
    constellation: String,
    /// Noise-variance grid as min:points:max (log-spaced)
    #[arg(long, default_value = "0.001:64:10")]
    grid: String,
    /// Monte-Carlo samples per grid point
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ber(args) => run_ber(args),
        Command::Vectors(args) => run_vectors(args),
        Command::CepTable(args) => run_cep_table(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_ber(args: BerArgs) -> Result<()> {
    let file_values = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let defaults = SweepConfig::default();

    // Command-line flags override file values, which override defaults.
    macro_rules! resolve {
        ($flag:expr, $key:literal, $default:expr) => {
            match (&$flag, file_values.get($key)) {
                (Some(v), _) => v.clone(),
                (None, Some(v)) => v
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for {} in config file", $key)))?,
                (None, None) => $default,
            }
        };
    }

    let constellation: String = resolve!(args.constellation, "constellation", defaults.constellation.name().into());
    let channel: String = resolve!(args.channel, "channel", defaults.channel.name().into());
    let mode: String = resolve!(args.mode, "mode", defaults.mode.name().into());
    let snr: String = resolve!(args.snr, "snr", "0:1:20".into());

    let parse_num = |field: Option<u64>, key: &str| -> Result<Option<u64>> {
        match (field, file_values.get(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for {key} in config file"))),
            (None, None) => Ok(None),
        }
    };

    let cfg = SweepConfig {
        constellation: constellation.parse()?,
        channel: channel.parse()?,
        self_iterations: parse_num(args.self_iters.map(|v| v as u64), "self-iters")?
            .map_or(defaults.self_iterations, |v| v as usize),
        mode: mode.parse()?,
        block_len: parse_num(args.block_len.map(|v| v as u64), "block-len")?
            .map_or(defaults.block_len, |v| v as usize),
        snr: snr.parse()?,
        min_errors: parse_num(args.min_errors, "min-errors")?.unwrap_or(defaults.min_errors),
        max_frames: parse_num(args.max_frames, "max-frames")?.unwrap_or(defaults.max_frames),
        seed: parse_num(args.seed, "seed")?.unwrap_or(defaults.seed),
    };
    let out: PathBuf = match (&args.out, file_values.get("out")) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(Error::InvalidConfig("--out is required".into())),
    };

    let records = run_sweep_to_path(&cfg, &out)?;
    for r in &records {
        println!(
            "snr {:>6.2} dB  frames {:>7}  errors {:>8}  ber {:.6e}",
            r.snr_db, r.frames, r.bit_errors, r.ber
        );
    }
    println!("wrote {} rows to {}", records.len(), out.display());
    Ok(())
}

fn run_vectors(args: VectorsArgs) -> Result<()> {
    let block: KernelBlock = args.block.parse()?;
    let kind: ConstellationKind = args.constellation.parse()?;
    let kernels = FxKernels::new(kind, FxProfile::default());
    let set = gen_golden_vectors(block, &kernels, args.count, args.seed);
    let mut out = BufWriter::new(File::create(&args.out)?);
    set.write_to(&mut out)?;
    out.flush()?;
    println!(
        "wrote {} {} vectors for {} to {}",
        set.rows.len(),
        block.name(),
        kind.name(),
        args.out.display()
    );
    Ok(())
}

fn run_cep_table(args: CepTableArgs) -> Result<()> {
    let kind: ConstellationKind = args.constellation.parse()?;
    let grid = parse_grid(&args.grid)?;
    let constellation = Constellation::<Scalar>::new(kind);
    let table = CepTable::build(&constellation, grid, args.samples, args.seed)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    table.write_csv(&mut out)?;
    out.flush()?;
    println!("wrote {} grid rows to {}", table.len(), args.out.display());
    Ok(())
}

/// Grid syntax `min:points:max`, e.g. `0.001:64:10`.
fn parse_grid(s: &str) -> Result<GridSpec> {
    let bad = || Error::InvalidConfig(format!("bad grid '{s}', expected min:points:max"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(GridSpec::new(
        parts[0].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
    ))
}

const CONFIG_KEYS: [&str; 10] = [
    "constellation",
    "channel",
    "self-iters",
    "mode",
    "block-len",
    "snr",
    "min-errors",
    "max-frames",
    "seed",
    "out",
];

/// Flat `key=value` config file; `#` starts a comment line. Keys mirror the
/// long flag names; unknown keys are rejected rather than ignored.
fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("{}:{}: expected key=value", path.display(), idx + 1))
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: unknown key '{key}'",
                path.display(),
                idx + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}
