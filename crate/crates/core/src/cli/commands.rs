use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::cli::config::RunConfig;
use crate::cli::eval::{parse_trace, summarize, TraceRow};
use crate::data_io::{likelihood_grid, parse_carmen, CarmenError, VelocityDeriver, DT_MIN};
use crate::error::ConfigError;
use crate::geometry::Pose2D;
use crate::global_loc::GlobalLocalizer;
use crate::map::{load_map_from_meta, DistanceField, MapError, OccupancyGrid, CellState, DEFAULT_CLAMP};
use crate::mcl_core::{CycleReport, FilterMode, CSV_HEADER};
use crate::models::{train_decision_model, BeamSet, DecisionModel, MeasurementMode, ModelError, OdometryInput};
use crate::sim::{
    build_localizer, contaminated_scene, contaminated_scene_at, maps, run_scenario, RunSetup, Scenario, ScenarioError,
    SimScene,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, msg: msg.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<CarmenError> for CliError {
    fn from(e: CarmenError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Training(_) => Self::data(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

pub type CliResult = Result<String, CliError>;

/// Where the occupancy grid comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MapArg {
    Bundled { name: String, resolution: f64 },
    File(PathBuf),
}

impl MapArg {
    pub fn load(&self) -> Result<OccupancyGrid, CliError> {
        match self {
            MapArg::Bundled { name, resolution } => {
                if resolution.is_nan() || *resolution <= 0.0 {
                    return Err(CliError::usage(format!("map resolution must be > 0, got {resolution}")));
                }
                maps::by_name(name, *resolution, 0).ok_or_else(|| {
                    CliError::usage(format!("unknown bundled map `{name}` (known: {})", maps::BUNDLED.join(", ")))
                })
            }
            MapArg::File(p) => Ok(load_map_from_meta(p)?),
        }
    }
}

pub fn parse_pose(s: &str) -> Result<Pose2D, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("pose `{s}` must be x,y,theta")))?;
    match v.as_slice() {
        [x, y, t] if v.iter().all(|a| a.is_finite()) => Ok(Pose2D::new(*x, *y, *t)),
        _ => Err(CliError::usage(format!("pose `{s}` must be three finite numbers x,y,theta"))),
    }
}

/// Flags shared by the filter-running commands.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub baseline: bool,
    pub no_global: bool,
    pub no_ccmm: bool,
}

impl RunFlags {
    /// Defaults, file, `--set` overrides, then the mode flags.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if self.baseline {
            c.filter.mode = FilterMode::Baseline;
            c.global_enabled = false;
        }
        if self.no_global {
            c.global_enabled = false;
        }
        if self.no_ccmm {
            c.filter.use_ccmm = false;
        }
        Ok(c)
    }
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Loads the configured decision model or trains one on `grid`.
fn decision_model(cfg: &RunConfig, grid: &Arc<OccupancyGrid>, seed: u64, log: &mut String) -> Result<DecisionModel, CliError> {
    if let Some(p) = &cfg.decision_model {
        let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        return Ok(DecisionModel::parse(&text)?);
    }
    let scene = SimScene::new(grid.clone(), cfg.lidar, cfg.training_margin, cfg.training_clutter);
    if !scene.has_free_space() {
        return Err(CliError::data("map has no free space to train a decision model on"));
    }
    let (dm, s) = train_decision_model(&scene, &cfg.training, seed)?;
    let _ = writeln!(
        log,
        "decision_model=trained n={} d_th={:.4} holdout_accuracy={:.4}",
        cfg.training.n_samples, dm.d_th, s.holdout_accuracy
    );
    Ok(dm)
}

fn setup(cfg: &RunConfig, dm: DecisionModel) -> RunSetup {
    RunSetup {
        filter: cfg.filter.clone(),
        global: cfg.global_enabled.then_some(cfg.global),
        keypoints: None,
        dm,
        lidar: cfg.lidar,
    }
}

fn rows(reports: &[CycleReport]) -> Vec<TraceRow> {
    reports
        .iter()
        .map(|r| TraceRow {
            cycle: r.cycle,
            est: [r.estimate.x, r.estimate.y, r.estimate.theta],
            gt: r.ground_truth.map(|g| [g.x, g.y, g.theta]),
            reliability: r.reliability,
            mae: r.mae,
        })
        .collect()
}

fn trace_csv(reports: &[CycleReport]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn sim_run(scenario: &Path, flags: &RunFlags, out: &Path) -> CliResult {
    let cfg = flags.load()?;
    let sc = Scenario::load(scenario)?;
    let grid = Arc::new(sc.load_grid()?);
    sc.validate(&grid)?;
    let seed = flags.seed.or(sc.seed).unwrap_or(0);
    let mut log = String::new();
    let dm = decision_model(&cfg, &grid, seed, &mut log)?;
    let run = run_scenario(&sc, grid, &setup(&cfg, dm), seed)?;
    ensure_dir(out)?;
    write(&out.join("trace.csv"), run.to_csv())?;
    let s = summarize(&rows(&run.reports), cfg.eval_threshold);
    let last = run.reports.last();
    let _ = writeln!(log, "seed={seed}");
    let _ = writeln!(
        log,
        "final_position_error_m={}",
        last.and_then(|r| r.position_error()).map_or("nan".into(), |e| format!("{e:.6}"))
    );
    let _ = writeln!(
        log,
        "final_angular_error_rad={}",
        last.and_then(|r| r.angular_error()).map_or("nan".into(), |e| format!("{e:.6}"))
    );
    log.push_str(&s.render("trace.csv", cfg.eval_threshold));
    write(&out.join("summary.txt"), &log)?;
    Ok(log)
}

pub fn replay_carmen(log_path: &Path, map: Option<&MapArg>, initial: Option<&str>, flags: &RunFlags, out: &Path) -> CliResult {
    let map = map.ok_or_else(|| CliError::usage("replay-carmen needs a map (--map or --map-file)"))?;
    let cfg = flags.load()?;
    let grid = Arc::new(map.load()?);
    let log = parse_carmen(log_path, &cfg.carmen)?;
    let lasers: Vec<_> = log.lasers().collect();
    let first = lasers.first().ok_or_else(|| CliError::data("log has no FLASER records"))?;
    let initial = match initial {
        Some(s) => parse_pose(s)?,
        None => first.laser_pose,
    };
    let mut msg = String::new();
    if !grid.is_free_at(initial.position()) {
        let _ = writeln!(msg, "warning: initial pose ({}, {}) is not in free space of the map", initial.x, initial.y);
    }
    let off_map = lasers.iter().filter(|l| !grid.is_free_at(l.laser_pose.position())).count();
    if off_map * 2 > lasers.len() {
        let _ = writeln!(msg, "warning: {off_map} of {} logged laser poses fall outside free space; map and log may not match", lasers.len());
    }
    let seed = flags.seed.unwrap_or(0);
    let dm = decision_model(&cfg, &grid, seed, &mut msg)?;
    let mut loc = build_localizer(grid, &setup(&cfg, dm), initial, seed)?;
    let mut vel = VelocityDeriver::new(DT_MIN);
    let mut reports = Vec::with_capacity(lasers.len());
    let t0 = first.timestamp;
    for l in &lasers {
        let u = vel.push(l.odom_pose, l.timestamp).unwrap_or(OdometryInput::new(0.0, 0.0, 0.0));
        let mut r = loc.step(&u, &l.scan, &[]);
        r.time_s = l.timestamp - t0;
        reports.push(r);
    }
    ensure_dir(out)?;
    write(&out.join("trajectory.csv"), trace_csv(&reports))?;
    let _ = writeln!(msg, "records={} lasers={} skipped={}", log.records.len(), lasers.len(), log.skipped);
    if let Some(r) = reports.last() {
        let _ = writeln!(msg, "final_estimate={},{},{}", r.estimate.x, r.estimate.y, r.estimate.theta);
    }
    Ok(msg)
}

pub fn train_decision(map: &MapArg, flags: &RunFlags, out: &Path) -> CliResult {
    let cfg = flags.load()?;
    let grid = Arc::new(map.load()?);
    let seed = flags.seed.unwrap_or(0);
    let scene = SimScene::new(grid, cfg.lidar, cfg.training_margin, cfg.training_clutter);
    if !scene.has_free_space() {
        return Err(CliError::data("map has no free space to train on"));
    }
    let (dm, s) = train_decision_model(&scene, &cfg.training, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write(out, dm.to_text())?;
    Ok(format!(
        "d_th={}\nholdout_accuracy={:.6}\nn_success={}\nn_failure={}\nmean_success={:.6}\nmean_failure={:.6}\n",
        dm.d_th, s.holdout_accuracy, s.n_success, s.n_failure, s.mean_success, s.mean_failure
    ))
}

/// Which likelihood grids to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridModes {
    Ccmm,
    Lfm,
    Both,
}

pub struct LikelihoodArgs<'a> {
    pub map: &'a MapArg,
    /// One-cell walls with unknown space behind them.
    pub hollow: bool,
    pub pose: Option<&'a str>,
    pub contamination: f64,
    /// Replay scan source: log path and FLASER index.
    pub log: Option<(&'a Path, usize)>,
    pub modes: GridModes,
}

pub fn likelihood_map(a: &LikelihoodArgs, flags: &RunFlags, out: &Path) -> CliResult {
    let cfg = flags.load()?;
    let mut grid = a.map.load()?;
    if a.hollow {
        grid = grid.hollowed(grid.resolution());
    }
    let df = DistanceField::build(&grid, DEFAULT_CLAMP);
    let seed = flags.seed.unwrap_or(0);
    let pose = a.pose.map(parse_pose).transpose()?;
    let mut msg = String::new();
    let (center, scan) = if let Some((path, idx)) = a.log {
        let center = pose.ok_or_else(|| CliError::usage("a log scan needs --pose"))?;
        let log = parse_carmen(path, &cfg.carmen)?;
        let l = log
            .lasers()
            .nth(idx)
            .ok_or_else(|| CliError::data(format!("log has no FLASER record #{idx}")))?;
        (center, l.scan.clone())
    } else {
        if !(0.0..1.0).contains(&a.contamination) {
            return Err(CliError::usage(format!("contamination must lie in [0, 1), got {}", a.contamination)));
        }
        let scene = match pose {
            Some(p) => contaminated_scene_at(&grid, &cfg.lidar, p, a.contamination, 0.05, seed),
            None => contaminated_scene(&grid, &df, &cfg.lidar, a.contamination, 0.05, 0.5, seed),
        }
        .ok_or_else(|| CliError::data("could not build a scene with the requested contamination"))?;
        let _ = writeln!(
            msg,
            "truth={},{},{}\ncontaminated_fraction={:.4}\nobstacles={}",
            scene.pose.x,
            scene.pose.y,
            scene.pose.theta,
            scene.contaminated_fraction,
            scene.shapes.len()
        );
        (scene.pose, scene.scan)
    };
    let beams = BeamSet::new(&scan, cfg.filter.measurement.beam_stride);
    if beams.is_empty() {
        return Err(CliError::data("scan has no usable beam"));
    }
    ensure_dir(out)?;
    let modes: &[(MeasurementMode, &str)] = match a.modes {
        GridModes::Ccmm => &[(MeasurementMode::Ccmm, "ccmm")],
        GridModes::Lfm => &[(MeasurementMode::Lfm, "lfm")],
        GridModes::Both => &[(MeasurementMode::Ccmm, "ccmm"), (MeasurementMode::Lfm, "lfm")],
    };
    for (mode, name) in modes {
        let g = likelihood_grid(
            &beams,
            &center,
            &df,
            &cfg.filter.measurement,
            *mode,
            cfg.likelihood_extent,
            cfg.likelihood_resolution,
        )?;
        let pgm = out.join(format!("likelihood_{name}.pgm"));
        let csv = out.join(format!("likelihood_{name}.csv"));
        g.write(&pgm, &csv).map_err(|e| io_err(&pgm, e))?;
        let m = g.argmax();
        let _ = writeln!(
            msg,
            "{name}.argmax_offset={:.4},{:.4}\n{name}.argmax_distance_m={:.4}",
            m.x - center.x,
            m.y - center.y,
            m.position().dist(&center.position())
        );
    }
    write(&out.join("likelihood_summary.txt"), &msg)?;
    Ok(msg)
}

pub fn eval(traces: &[PathBuf], threshold: f64) -> CliResult {
    if traces.is_empty() {
        return Err(CliError::usage("eval needs at least one trace"));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(CliError::usage("threshold must be > 0"));
    }
    let mut out = String::new();
    for p in traces {
        let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let rows = parse_trace(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        out.push_str(&summarize(&rows, threshold).render(&p.display().to_string(), threshold));
    }
    Ok(out)
}

pub fn map_info(map: &MapArg, keypoints: bool, flags: &RunFlags) -> CliResult {
    let grid = map.load()?;
    let (lo, hi) = grid.world_bounds();
    let mut s = String::new();
    let _ = writeln!(s, "width={}\nheight={}\nresolution={}", grid.width(), grid.height(), grid.resolution());
    let o = grid.origin();
    let _ = writeln!(s, "origin={},{},{}", o.x, o.y, o.theta);
    let _ = writeln!(s, "bounds={},{},{},{}", lo.x, lo.y, hi.x, hi.y);
    for (name, st) in [("free", CellState::Free), ("occupied", CellState::Occupied), ("unknown", CellState::Unknown)] {
        let _ = writeln!(s, "{name}_cells={}", grid.count(st));
    }
    let _ = writeln!(s, "free_area_m2={:.4}", grid.free_area());
    let _ = writeln!(s, "checksum={:016x}", grid.checksum());
    if keypoints {
        let cfg = flags.load()?;
        let gl = GlobalLocalizer::new(&grid, cfg.global);
        let _ = writeln!(s, "keypoints={}", gl.keypoints.len());
    }
    Ok(s)
}
