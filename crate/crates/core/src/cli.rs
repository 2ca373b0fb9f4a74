//! Command-line driver: stability sweeps, code construction, BER
//! simulation and density evolution. Every command writes CSV with a header
//! row to stdout; identical arguments give byte-identical output.
//!
//! Exit codes: 0 success, 2 validation error (bad arguments, unparsable or
//! inconsistent input files), 3 runtime error (I/O, density evolution).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channel::BiAwgnChannel;
use crate::code_builder::{audit, build, HybridParityCheck};
use crate::codec::{simulate, CodewordMode, SimConfig, DEFAULT_MAX_ITERS, SIM_HEADER};
use crate::density_evolution::{evolve, initial_population, seeding_sigma2, threshold_search, DeConfig};
use crate::ensemble::{stability_sweep, EnsembleSpec, StabilityReport, SWEEP_HEADER};
use crate::fmt::sig12;
use crate::rng::stream_rng;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hybrid-ldpc", version, about = "Hybrid non-binary LDPC codes: stability, construction, simulation, density evolution")]
struct Cli {
    /// Worker threads (default: logical cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stability parameters Ω, Δ and the product ΩΔ on BI-AWGN.
    Stability(StabilityArgs),
    /// Build a parity-check matrix from an ensemble and write it as hybrid alist.
    Construct(ConstructArgs),
    /// BER/FER simulation over BI-AWGN.
    ///
    /// SNR is Eb/N0 in dB per information bit: the noise variance is
    /// σ² = 1/(2·R·10^(EbN0/10)) with R the bit rate of the code.
    Simulate(SimulateArgs),
    /// Monte-Carlo density evolution on BI-AWGN (trajectory CSV or threshold).
    De(DeArgs),
}

#[derive(Debug, Args)]
struct StabilityArgs {
    /// Ensemble file: one `i j p_k p_l weight` line per edge class.
    #[arg(long, required_unless_present = "sweep_q", conflicts_with = "sweep_q")]
    spec: Option<PathBuf>,
    /// BI-AWGN noise variance.
    #[arg(long)]
    sigma2: f64,
    /// Sweep the rate-1/2 GF(q) and G(2)-G(q) ensembles for q in `LO..HI`
    /// (powers of two, inclusive).
    #[arg(long, value_name = "LO..HI")]
    sweep_q: Option<String>,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Number of symbols (columns).
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Passes of 4-cycle removal.
    #[arg(long, default_value_t = 2)]
    girth_passes: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodewordArg {
    Zero,
    Random,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Hybrid alist file.
    #[arg(long)]
    code: PathBuf,
    /// Comma-separated Eb/N0 values in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    frames: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = CodewordArg::Zero)]
    codeword: CodewordArg,
}

#[derive(Debug, Args)]
struct DeArgs {
    #[arg(long)]
    spec: PathBuf,
    /// BI-AWGN noise variance (ignored with --threshold).
    #[arg(long, required_unless_present = "threshold")]
    sigma2: Option<f64>,
    /// Samples per variable group.
    #[arg(long, default_value_t = 10_000)]
    pop: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Error probability regarded as converged.
    #[arg(long, default_value_t = 1e-4)]
    target: f64,
    /// Start from a population with this error probability instead of the
    /// channel-only messages.
    #[arg(long, conflicts_with = "threshold")]
    seed_pe: Option<f64>,
    /// Bisect the noise standard deviation σ* between --lo and --hi.
    #[arg(long)]
    threshold: bool,
    #[arg(long, default_value_t = 0.5)]
    lo: f64,
    #[arg(long, default_value_t = 1.5)]
    hi: f64,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Write the final population as a binary record stream.
    #[arg(long, conflicts_with = "threshold")]
    dump_populations: Option<PathBuf>,
}

/// Exit code of a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::DensityEvolution(_) | Error::Unrealizable(_) => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err("--threads must be at least 1".to_string()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| e.to_string())
            .map(|pool| pool.install(|| dispatch(&cli.command))),
        None => Ok(dispatch(&cli.command)),
    };
    match result {
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_VALIDATION
        }
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Ok(Ok(text)) => match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_RUNTIME
            }
        },
    }
}

fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Stability(a) => stability(a),
        Command::Construct(a) => construct(a),
        Command::Simulate(a) => run_simulate(a),
        Command::De(a) => de(a),
    }
}

fn read_spec(path: &PathBuf) -> Result<EnsembleSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    EnsembleSpec::parse(&text)
}

/// Parses `LO..HI` into the widths `p` with `LO <= 2^p <= HI`.
fn parse_q_range(s: &str) -> Result<Vec<u8>> {
    let bad = || Error::Parse { line: 0, msg: format!("--sweep-q {s:?}: expected LO..HI with powers of two in 2..=256") };
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if !(lo.is_power_of_two() && hi.is_power_of_two() && 2 <= lo && lo <= hi && hi <= 256) {
        return Err(bad());
    }
    Ok((lo.trailing_zeros() as u8..=hi.trailing_zeros() as u8).collect())
}

fn stability(a: &StabilityArgs) -> Result<String> {
    if let Some(range) = &a.sweep_q {
        let widths = parse_q_range(range)?;
        let mut s = format!("{SWEEP_HEADER}\n");
        for row in stability_sweep(a.sigma2, widths)? {
            s.push_str(&row.csv_row());
            s.push('\n');
        }
        return Ok(s);
    }
    let spec = read_spec(a.spec.as_ref().expect("clap requires --spec without --sweep-q"))?;
    let report = spec.stability_report(a.sigma2)?;
    Ok(format!("{}\n{}\n", StabilityReport::CSV_HEADER, report.csv_row()))
}

fn construct(a: &ConstructArgs) -> Result<String> {
    let spec = read_spec(&a.spec)?;
    let mut rng = stream_rng(a.seed, 0);
    let h = build(&spec, a.n, &mut rng, a.girth_passes)?;
    h.save(&a.out)?;
    let rep = audit(&h);
    Ok(format!(
        "n_cols,n_rows,n_edges,bit_rate,girth,l1_distance\n{},{},{},{},{},{}\n",
        h.n_cols(),
        h.n_rows(),
        rep.n_edges(),
        sig12(rep.bit_rate),
        rep.girth.map_or_else(|| "inf".to_string(), |g| g.to_string()),
        sig12(rep.l1_distance(&spec))
    ))
}

fn run_simulate(a: &SimulateArgs) -> Result<String> {
    let h = HybridParityCheck::load(&a.code)?;
    let cfg = SimConfig {
        frames: a.frames,
        max_iters: a.max_iters,
        seed: a.seed,
        mode: match a.codeword {
            CodewordArg::Zero => CodewordMode::AllZero,
            CodewordArg::Random => CodewordMode::Random,
        },
    };
    let mut s = format!("{SIM_HEADER}\n");
    for p in simulate(&h, &a.snr_db, &cfg)? {
        s.push_str(&p.csv_row());
        s.push('\n');
    }
    Ok(s)
}

fn de(a: &DeArgs) -> Result<String> {
    let spec = read_spec(&a.spec)?;
    let cfg = DeConfig {
        pop_size: a.pop,
        max_iters: a.max_iters,
        target_pe: a.target,
        seed: a.seed,
    };
    if a.threshold {
        let sigma = threshold_search(&spec, a.lo, a.hi, a.tol, &cfg)?;
        return Ok(format!("sigma,sigma2\n{},{}\n", sig12(sigma), sig12(sigma * sigma)));
    }
    let sigma2 = a.sigma2.expect("clap requires --sigma2 without --threshold");
    let channel = BiAwgnChannel::new(sigma2)?;
    if cfg.pop_size < 1000 {
        return Err(Error::DensityEvolution(format!("population size {} below the minimum of 1000", cfg.pop_size)));
    }
    let pop = match a.seed_pe {
        Some(pe) => initial_population(&spec, &BiAwgnChannel::new(seeding_sigma2(&spec, pe)?)?, cfg.pop_size, cfg.seed)?,
        None => initial_population(&spec, &channel, cfg.pop_size, cfg.seed)?,
    };
    let (traj, last) = evolve(&spec, &channel, pop, &cfg)?;
    if let Some(path) = &a.dump_populations {
        let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        last.write_to(&mut w)?;
        w.flush()?;
    }
    Ok(traj.to_csv())
}
