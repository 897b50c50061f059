use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvtlab::harness::{self, preset, CurveKind, ExperimentConfig, PRESETS};
use mvtlab::taguchi::{bundled, OrthogonalArray};
use mvtlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mvtlab",
    version,
    about = "Taguchi vs. evolutionary multivariate testing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file and write CSV, SVG and a manifest.
    Run {
        /// Preset name (see `list-presets`) or path to a config file.
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated total-traffic values, e.g. `1000,1e4,1e5`.
        #[arg(long, value_parser = parse_traffic_list)]
        traffic: Option<TrafficList>,
        /// Use one evaluator for every repetition.
        #[arg(long)]
        fixed_evaluator: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an array file (or bundled array name) for range, balance and
    /// orthogonality.
    ValidateArray {
        file: String,
    },
    ListPresets,
}

#[derive(Clone)]
struct TrafficList(Vec<u64>);

fn parse_traffic_list(s: &str) -> std::result::Result<TrafficList, String> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| format!("`{tok}` is not a number"))?;
            if v < 1.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                return Err(format!("`{tok}` is not a positive integer"));
            }
            Ok(v as u64)
        })
        .collect::<std::result::Result<_, _>>()
        .map(TrafficList)
}

fn load_target(target: &str) -> Result<ExperimentConfig> {
    match preset(target) {
        Ok(c) => Ok(c),
        Err(Error::UnknownPreset(_)) if Path::new(target).is_file() => {
            ExperimentConfig::from_file(Path::new(target))
        }
        Err(e) => Err(e),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            target,
            seed,
            reps,
            traffic,
            fixed_evaluator,
            out,
        } => {
            let mut config = load_target(&target)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(r) = reps {
                config.repetitions = r;
            }
            if let Some(TrafficList(t)) = traffic {
                config.traffic = t;
            }
            config.fixed_evaluator |= fixed_evaluator;
            if let Some(o) = out {
                config.out_dir = o;
            }
            config.validate()?;

            let series = match config.curve {
                CurveKind::Comparison => harness::run_comparison(&config)?,
                CurveKind::During => harness::run_during_experiment_curve(&config)?,
            };
            print!("{}", harness::render_csv(&series));
            for path in harness::write_outputs(&config, &series)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::ValidateArray { file } => {
            let array = if bundled::NAMES.contains(&file.as_str()) {
                bundled::by_name(&file)?
            } else {
                let text = std::fs::read_to_string(&file).map_err(|e| Error::Io {
                    path: file.clone().into(),
                    source: e,
                })?;
                OrthogonalArray::parse(&text)?
            };
            println!("{} rows, levels {:?}", array.num_rows(), array.levels());
            let report = array.validate();
            println!("{report}");
            Ok(report.is_valid())
        }
        Command::ListPresets => {
            for (name, about) in PRESETS {
                println!("{name:<20} {about}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
