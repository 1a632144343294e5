//! Command-line surface: run configuration, subcommands and trace evaluation.

pub mod commands;
pub mod config;
pub mod eval;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, GridModes, LikelihoodArgs, MapArg, RunFlags, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "relmcl", version, about = "Reliability-aware Monte Carlo localization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Sectioned config file (`[section]` then `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set filter.n_particles=300`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct Modes {
    /// Likelihood field plus random injection, no global fusion.
    #[arg(long)]
    baseline: bool,
    /// Disable global-localization fusion.
    #[arg(long)]
    no_global: bool,
    /// Weight with the plain likelihood field instead of the class-conditional model.
    #[arg(long)]
    no_ccmm: bool,
}

#[derive(Debug, Args)]
struct MapOpt {
    /// Bundled map name (corridor_cross, rooms_off_corridor, cluttered_office, aliased_corridor).
    #[arg(long, conflicts_with = "map_file")]
    map: Option<String>,
    /// Bundled map cell size, m.
    #[arg(long, default_value_t = 0.05)]
    map_resolution: f64,
    /// Map metadata file referencing a PGM image.
    #[arg(long)]
    map_file: Option<PathBuf>,
}

impl MapOpt {
    fn get(&self) -> Option<MapArg> {
        match (&self.map, &self.map_file) {
            (_, Some(f)) => Some(MapArg::File(f.clone())),
            (Some(n), None) => Some(MapArg::Bundled {
                name: n.clone(),
                resolution: self.map_resolution,
            }),
            (None, None) => None,
        }
    }

    fn require(&self) -> Result<MapArg, CliError> {
        self.get().ok_or_else(|| CliError::usage("a map is required (--map or --map-file)"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Ccmm,
    Lfm,
    Both,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a simulated scenario and write trace.csv plus summary.txt.
    #[command(after_help = config::keys_help())]
    SimRun {
        /// Scenario file.
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modes: Modes,
    },
    /// Replay a CARMEN log against a map and write trajectory.csv.
    #[command(after_help = config::keys_help())]
    ReplayCarmen {
        /// CARMEN log file.
        log: PathBuf,
        #[command(flatten)]
        map: MapOpt,
        /// Initial pose `x,y,theta` (m, m, rad); defaults to the first logged laser pose.
        #[arg(long, allow_hyphen_values = true)]
        initial: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        modes: Modes,
    },
    /// Train the MAE decision model on a map and write it to a file.
    #[command(after_help = config::keys_help())]
    TrainDecision {
        #[command(flatten)]
        map: MapOpt,
        /// Training pairs (overrides decision.n_samples).
        #[arg(long)]
        n: Option<usize>,
        /// Success position threshold, m (overrides decision.pos_th).
        #[arg(long)]
        pos_th: Option<f64>,
        /// Success heading threshold, degrees (overrides decision.ang_th).
        #[arg(long)]
        ang_th_deg: Option<f64>,
        #[arg(long, default_value = "decision_model.txt")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write CCMM and/or LFM likelihood grids around a pose.
    #[command(after_help = config::keys_help())]
    LikelihoodMap {
        #[command(flatten)]
        map: MapOpt,
        /// Keep one-cell walls with unknown space behind them.
        #[arg(long)]
        hollow: bool,
        /// Grid center `x,y,theta`; a random clear pose when omitted.
        #[arg(long, allow_hyphen_values = true)]
        pose: Option<String>,
        /// Target fraction of beams blocked by unmapped discs.
        #[arg(long, default_value_t = 0.3)]
        contamination: f64,
        /// Take the scan from this CARMEN log instead of simulating one.
        #[arg(long)]
        log: Option<PathBuf>,
        /// FLASER record index within --log.
        #[arg(long, default_value_t = 0)]
        scan_index: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize trace CSVs: ATE, angular RMSE, correlation, recovery.
    Eval {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Position error counted as localized, m.
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
    },
    /// Print map geometry and cell statistics.
    #[command(after_help = config::keys_help())]
    MapInfo {
        #[command(flatten)]
        map: MapOpt,
        /// Also count global-localization keypoints.
        #[arg(long)]
        keypoints: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn flags(common: Common, modes: Option<Modes>) -> RunFlags {
    let m = modes.unwrap_or(Modes {
        baseline: false,
        no_global: false,
        no_ccmm: false,
    });
    RunFlags {
        config: common.config,
        overrides: common.overrides,
        seed: common.seed,
        baseline: m.baseline,
        no_global: m.no_global,
        no_ccmm: m.no_ccmm,
    }
}

fn dispatch(cmd: Cmd) -> Result<String, CliError> {
    match cmd {
        Cmd::SimRun { scenario, out, common, modes } => {
            commands::sim_run(&scenario, &flags(common, Some(modes)), &out)
        }
        Cmd::ReplayCarmen { log, map, initial, out, common, modes } => {
            commands::replay_carmen(&log, map.get().as_ref(), initial.as_deref(), &flags(common, Some(modes)), &out)
        }
        Cmd::TrainDecision { map, n, pos_th, ang_th_deg, out, common } => {
            let mut f = flags(common, None);
            // dedicated flags beat --set
            if let Some(n) = n {
                f.overrides.push(format!("decision.n_samples={n}"));
            }
            if let Some(p) = pos_th {
                f.overrides.push(format!("decision.pos_th={p}"));
            }
            if let Some(a) = ang_th_deg {
                f.overrides.push(format!("decision.ang_th={}", a.to_radians()));
            }
            commands::train_decision(&map.require()?, &f, &out)
        }
        Cmd::LikelihoodMap { map, hollow, pose, contamination, log, scan_index, mode, out, common } => {
            let map = map.require()?;
            let a = LikelihoodArgs {
                map: &map,
                hollow,
                pose: pose.as_deref(),
                contamination,
                log: log.as_deref().map(|p| (p, scan_index)),
                modes: match mode {
                    ModeArg::Ccmm => GridModes::Ccmm,
                    ModeArg::Lfm => GridModes::Lfm,
                    ModeArg::Both => GridModes::Both,
                },
            };
            commands::likelihood_map(&a, &flags(common, None), &out)
        }
        Cmd::Eval { traces, threshold } => commands::eval(&traces, threshold),
        Cmd::MapInfo { map, keypoints, common } => commands::map_info(&map.require()?, keypoints, &flags(common, None)),
    }
}

/// Parses `args` (program name first), runs the command, prints its
/// output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.cmd) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
