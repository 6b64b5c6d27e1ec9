use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crossreg::bench::{ablation_variants, run_ablation, run_benchmark, Suite};
use crossreg::config::{load_config, RegistrationReport};
use crossreg::descriptor::extract_density_robust_features;
use crossreg::geom::io::load_cloud;
use crossreg::{register, Error, RegistrationConfig};

#[derive(Parser)]
#[command(
    name = "crossreg",
    version,
    about = "Cross-source point cloud registration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a source cloud onto a target cloud (.xyz or .ply).
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Include wall-clock stage timings (makes the output run-dependent).
        #[arg(long)]
        timings: bool,
    },
    /// Register generated scenes and report recall and errors as JSON.
    Benchmark {
        #[arg(long, default_value_t = 10)]
        scenes: usize,
        #[arg(long, default_value_t = 4.0)]
        density_ratio: f64,
        /// Noise standard deviation in meters; defaults to 0.5% of the scene diameter.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        outliers: f64,
        #[arg(long, default_value_t = 0.7)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare pipeline variants over the scenes of a suite file; writes CSV.
    Ablate {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract and cache the sparse and dense features of one cloud.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(Error),
    Registration(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

fn config_or_default(path: Option<&Path>) -> Result<RegistrationConfig, Failure> {
    Ok(match path {
        Some(p) => load_config(p)?,
        None => RegistrationConfig::default(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn finish(mut w: BufWriter<File>) -> Result<(), Failure> {
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(Error::from)?;
    w.write_all(b"\n").map_err(Error::from)?;
    finish(w)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Register {
            source,
            target,
            config,
            out,
            timings,
        } => {
            let cfg = config_or_default(config.as_deref())?;
            let src = load_cloud(&source)?;
            let dst = load_cloud(&target)?;
            let result = register(&src, &dst, &cfg).map_err(Failure::Registration)?;
            let report = RegistrationReport::from_result(&result, timings);
            write_text(&out, &report.to_json()?)
        }
        Command::Benchmark {
            scenes,
            density_ratio,
            noise,
            outliers,
            overlap,
            seed,
            config,
            out,
        } => {
            let mut suite = Suite {
                scenes,
                seed,
                config: config_or_default(config.as_deref())?,
                ..Suite::default()
            };
            suite.params.density_ratio = density_ratio;
            suite.params.outlier_fraction = outliers;
            suite.params.overlap = overlap;
            if let Some(n) = noise {
                suite.params.noise = n;
            }
            let report = run_benchmark(&suite)?;
            write_text(
                &out,
                &serde_json::to_string_pretty(&report).map_err(Error::from)?,
            )
        }
        Command::Ablate { suite, out } => {
            let suite = Suite::load(&suite)?;
            let report = run_ablation(&suite, &ablation_variants())?;
            let mut w = create(&out)?;
            report.write_csv(&mut w)?;
            finish(w)
        }
        Command::Features { input, config, out } => {
            let cfg = config_or_default(config.as_deref())?;
            let cloud = load_cloud(&input)?;
            let set = extract_density_robust_features(&cloud, &cfg.descriptor)
                .map_err(Failure::Registration)?;
            let mut w = create(&out)?;
            set.write_cache(&mut w)?;
            finish(w)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Registration(e)) => {
            eprintln!("registration failed: {e}");
            ExitCode::from(2)
        }
    }
}
