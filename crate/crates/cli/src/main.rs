//! `specdep`: batch front end for spectral dependence analysis.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_range, InputFormat, RunConfig};
use specdep::calibration::{NoiseConvention, NullDesign};
use specdep::copula::ThetaMethod;
use specdep::dvine::Evaluation;
use specdep::marginals::MarginalFamily;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or inputs; exit code 2.
    Usage(String),
    /// Failure while computing or writing; exit code 1.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<specdep::Error> for CliError {
    fn from(e: specdep::Error) -> Self {
        use specdep::Error as E;
        match &e {
            E::InvalidArgument(_)
            | E::StreamTooShort { .. }
            | E::ChannelLengthMismatch { .. }
            | E::TrailingSamples { .. }
            | E::NonFinite(_)
            | E::EmptyBand(_)
            | E::DimensionMismatch(_)
            | E::Format(_) => CliError::Usage(e.to_string()),
            E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "specdep", version, about = "Copula-based changepoint detection and dependence comparison")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Points per axis of the KS evaluation grid.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Significance level of the thresholds.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Moving-block bootstrap: number of blocks per epoch.
    #[arg(long, global = true)]
    pub blocks: Option<usize>,
    /// Moving-block bootstrap: replicates per epoch.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// D-vine truncation level.
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
    /// Root modulus of the AR(2) signals.
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, value_parser = parse_marginal)]
    pub marginal: Option<MarginalFamily>,
    #[arg(long, global = true, value_parser = parse_theta_method)]
    pub theta_method: Option<ThetaMethod>,
    /// Compare bare copulas instead of full joint laws.
    #[arg(long, global = true)]
    pub bare_copula: bool,
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Recording: `.csv` or raw binary with a `.json` sidecar.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<InputFormat>,
    /// Samples per epoch (CSV input).
    #[arg(long)]
    pub epoch_len: Option<usize>,
    /// Sampling rate in Hz (CSV input).
    #[arg(long)]
    pub fs: Option<f64>,
    /// 1-based channel numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic recording.
    Simulate {
        /// Segments `<kind>:<epochs>` with kinds dgp1a, dgp1b, dgp2-1 ... dgp2-6.
        #[arg(long, value_delimiter = ',')]
        segments: Option<Vec<String>>,
        #[arg(long)]
        epoch_len: Option<usize>,
        #[arg(long)]
        fs: Option<f64>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        format: Option<InputFormat>,
        #[arg(long, value_parser = parse_noise)]
        noise: Option<NoiseConvention>,
        /// File stem inside the output directory.
        #[arg(long)]
        name: Option<String>,
    },
    /// Derive KS thresholds from a null design.
    Calibrate {
        #[arg(long, value_parser = parse_design)]
        design: Option<NullDesign>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        epoch_len: Option<usize>,
        #[arg(long)]
        fs: Option<f64>,
        /// Independent simulations of the design.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_parser = parse_noise)]
        noise: Option<NoiseConvention>,
    },
    /// Flag changepoint epochs on every channel and band.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        /// Threshold table; the built-in table is used when omitted.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Compare the dependence of two epoch ranges per channel.
    ComparePrepost {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        band: Option<String>,
        /// 1-based inclusive range, e.g. `1-300`.
        #[arg(long, value_parser = parse_range)]
        pre: Option<[usize; 2]>,
        #[arg(long, value_parser = parse_range)]
        post: Option<[usize; 2]>,
        #[arg(long, value_parser = parse_evaluation)]
        evaluation: Option<Evaluation>,
    },
    /// Compare the dependence of every pair of channels.
    CompareChannels {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        band: Option<String>,
        /// 1-based inclusive epoch range; all epochs when omitted.
        #[arg(long, value_parser = parse_range)]
        range: Option<[usize; 2]>,
        #[arg(long, value_parser = parse_evaluation)]
        evaluation: Option<Evaluation>,
    },
}

fn parse_design(s: &str) -> Result<NullDesign, String> {
    s.parse().map_err(|e: specdep::Error| e.to_string())
}

fn parse_noise(s: &str) -> Result<NoiseConvention, String> {
    match s {
        "variance" => Ok(NoiseConvention::Variance),
        "std-dev" | "sd" => Ok(NoiseConvention::StdDev),
        _ => Err(format!("unknown noise convention '{s}', expected variance or std-dev")),
    }
}

fn parse_marginal(s: &str) -> Result<MarginalFamily, String> {
    match s {
        "gamma" => Ok(MarginalFamily::Gamma),
        "weibull" => Ok(MarginalFamily::Weibull),
        "best-bic" => Ok(MarginalFamily::BestBic),
        _ => Err(format!("unknown marginal family '{s}'")),
    }
}

fn parse_theta_method(s: &str) -> Result<ThetaMethod, String> {
    match s {
        "tau" | "tau-inversion" => Ok(ThetaMethod::TauInversion),
        "mle" => Ok(ThetaMethod::Mle),
        _ => Err(format!("unknown estimation method '{s}', expected tau or mle")),
    }
}

fn parse_evaluation(s: &str) -> Result<Evaluation, String> {
    match s {
        "own-range" => Ok(Evaluation::OwnRange),
        "first-range" => Ok(Evaluation::FirstRange),
        _ => Err(format!("unknown evaluation '{s}', expected own-range or first-range")),
    }
}

fn apply_input(cfg: &mut RunConfig, a: InputArgs) {
    if let Some(p) = a.input {
        cfg.input.path = Some(p);
    }
    if let Some(f) = a.format {
        cfg.input.format = Some(f);
    }
    if let Some(t) = a.epoch_len {
        cfg.input.epoch_len = t;
    }
    if let Some(fs) = a.fs {
        cfg.input.sampling_rate_hz = fs;
    }
    if a.channels.is_some() {
        cfg.channels = a.channels;
    }
}

/// Layers flags over the file over the defaults.
pub fn resolve(cli: Cli) -> Result<(RunConfig, Command), CliError> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(g.seed => cfg.seed);
    if g.jobs.is_some() {
        cfg.jobs = g.jobs;
    }
    set!(g.out_dir => cfg.out_dir);
    set!(g.grid => cfg.grid);
    set!(g.alpha => cfg.alpha);
    set!(g.blocks => cfg.blocks);
    set!(g.reps => cfg.reps);
    set!(g.truncation => cfg.truncation);
    set!(g.rho => cfg.rho);
    set!(g.marginal => cfg.marginal_family);
    set!(g.theta_method => cfg.theta_method);
    if g.bare_copula {
        cfg.bare_copula = true;
    }

    let mut command = cli.command;
    match &mut command {
        Command::Simulate {
            segments,
            epoch_len,
            fs,
            channels,
            format,
            noise,
            name,
        } => {
            set!(segments.take() => cfg.simulate.segments);
            set!(*epoch_len => cfg.simulate.epoch_len);
            set!(*fs => cfg.simulate.sampling_rate_hz);
            set!(*channels => cfg.simulate.channels);
            set!(*format => cfg.simulate.format);
            set!(*noise => cfg.simulate.noise);
            set!(name.take() => cfg.simulate.name);
        }
        Command::Calibrate {
            design,
            epochs,
            epoch_len,
            fs,
            runs,
            noise,
        } => {
            set!(*design => cfg.calibrate.design);
            set!(*epochs => cfg.calibrate.epochs);
            set!(*epoch_len => cfg.calibrate.epoch_len);
            set!(*fs => cfg.calibrate.sampling_rate_hz);
            set!(*runs => cfg.calibrate.runs);
            set!(*noise => cfg.calibrate.noise);
        }
        Command::Detect { input, thresholds } => {
            apply_input(&mut cfg, std::mem::take(input));
            if thresholds.is_some() {
                cfg.thresholds = thresholds.take();
            }
        }
        Command::ComparePrepost {
            input,
            band,
            pre,
            post,
            evaluation,
        } => {
            apply_input(&mut cfg, std::mem::take(input));
            set!(band.take() => cfg.compare.band);
            if pre.is_some() {
                cfg.compare.pre = *pre;
            }
            if post.is_some() {
                cfg.compare.post = *post;
            }
            set!(*evaluation => cfg.compare.evaluation);
        }
        Command::CompareChannels {
            input,
            band,
            range,
            evaluation,
        } => {
            apply_input(&mut cfg, std::mem::take(input));
            set!(band.take() => cfg.compare.band);
            if range.is_some() {
                cfg.compare.range = *range;
            }
            set!(*evaluation => cfg.compare.evaluation);
        }
    }
    cfg.validate()?;
    Ok((cfg, command))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, command) = resolve(cli)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let out = match command {
        Command::Simulate { .. } => commands::simulate(&cfg)?,
        Command::Calibrate { .. } => commands::calibrate(&cfg)?,
        Command::Detect { .. } => commands::detect(&cfg)?,
        Command::ComparePrepost { .. } => commands::compare_prepost(&cfg)?,
        Command::CompareChannels { .. } => commands::compare_channels(&cfg)?,
    };
    for p in out.written() {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<(RunConfig, Command), CliError> {
        let mut v = vec!["specdep"];
        v.extend_from_slice(args);
        resolve(Cli::try_parse_from(v).map_err(|e| CliError::Usage(e.to_string()))?)
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "seed = 5\ngrid = 51\nreps = 50\n").unwrap();
        let f = file.to_str().unwrap();
        let (cfg, _) = parse(&["--config", f, "--grid", "61", "calibrate", "--runs", "2"]).unwrap();
        assert_eq!(cfg.grid, 61);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.reps, 50);
        assert_eq!(cfg.blocks, 20);
        assert_eq!(cfg.calibrate.runs, 2);
    }

    #[test]
    fn validation_errors_map_to_usage() {
        for args in [
            &["--reps", "0", "calibrate"][..],
            &["calibrate", "--runs", "0"],
            &["--alpha", "1.5", "detect"],
            &["--jobs", "0", "detect"],
        ] {
            assert!(matches!(parse(args), Err(CliError::Usage(_))), "{args:?}");
        }
    }

    #[test]
    fn prepost_ranges_parse() {
        let (cfg, _) = parse(&["compare-prepost", "--pre", "1-10", "--post", "11-20", "--band", "beta"]).unwrap();
        assert_eq!(cfg.compare.pre, Some([1, 10]));
        assert_eq!(cfg.compare.post, Some([11, 20]));
        assert_eq!(cfg.compare.band, "beta");
    }

    #[test]
    fn core_errors_split_by_kind() {
        let e: CliError = specdep::Error::InvalidArgument("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = specdep::Error::NoConvergence {
            what: "x",
            iterations: 1,
        }
        .into();
        assert_eq!(e.exit_code(), 1);
    }
}
