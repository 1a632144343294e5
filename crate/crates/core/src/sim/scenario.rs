//! Scripted closed-loop runs: scenario files, a waypoint follower and the
//! world → scan → filter loop.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng as _;

use crate::geometry::{normalize_angle, Point2, Pose2D};
use crate::global_loc::{GlobalLocConfig, GlobalLocalizer, GlobalSample, Keypoint};
use crate::map::{load_map_from_meta, DistanceField, MapError, OccupancyGrid, DEFAULT_CLAMP};
use crate::mcl_core::{CycleReport, Filter, FilterConfig, Localizer, CSV_HEADER};
use crate::models::{DecisionModel, OdometryInput};
use crate::rng::{label, stream, Rng};
use crate::sim::{maps, LidarConfig, ObstacleScript, OdometryNoise, ShapeKind, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Config(#[from] crate::error::ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Bundled { name: String, resolution: f64 },
    /// Map metadata file referencing a PGM image.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: MapSource,
    pub waypoints: Vec<Point2>,
    /// Cruise speed, m/s.
    pub speed: f64,
    /// Turn-rate limit, rad/s.
    pub omega_max: f64,
    /// Restart the path at the first waypoint when done.
    pub loop_path: bool,
    pub obstacles: Vec<ObstacleScript>,
    /// Extra seeded moving discs.
    pub random_obstacles: usize,
    pub noise: OdometryNoise,
    pub duration: f64,
    pub dt: f64,
    pub seed: Option<u64>,
    /// Ground-truth start; defaults to the first waypoint facing the second.
    pub start: Option<Pose2D>,
    /// Filter initial pose minus ground-truth start.
    pub init_offset: Pose2D,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            map: MapSource::Bundled { name: "rooms".into(), resolution: 0.05 },
            waypoints: Vec::new(),
            speed: 0.5,
            omega_max: 1.0,
            loop_path: true,
            obstacles: Vec::new(),
            random_obstacles: 0,
            noise: OdometryNoise::default(),
            duration: 100.0,
            dt: 0.1,
            seed: None,
            start: None,
            init_offset: Pose2D::default(),
        }
    }
}

fn parse_nums(line: usize, s: &str, n: usize) -> Result<Vec<f64>, ScenarioError> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| match t {
            "inf" => Ok(f64::INFINITY),
            _ => t.parse::<f64>().map_err(|_| ScenarioError::Parse { line, msg: format!("bad number {t:?}") }),
        })
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(ScenarioError::Parse { line, msg: format!("expected {n} numbers, found {}", v.len()) });
    }
    Ok(v)
}

impl Scenario {
    /// Parses the sectioned `key = value` format; relative map paths resolve
    /// against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        let mut section = String::new();
        let (mut map_name, mut map_file, mut res) = (None::<String>, None::<PathBuf>, 0.05);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(s) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = s.trim().to_string();
                if !["map", "path", "obstacles", "noise", "run"].contains(&section.as_str()) {
                    return Err(ScenarioError::Parse { line, msg: format!("unknown section [{section}]") });
                }
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ScenarioError::Parse { line, msg: "expected key = value".into() })?;
            let one = |v: &str| parse_nums(line, v, 1).map(|x| x[0]);
            let bad_key = || ScenarioError::Parse { line, msg: format!("unknown key {k:?} in [{section}]") };
            match section.as_str() {
                "map" => match k {
                    "name" => map_name = Some(v.to_string()),
                    "file" => map_file = Some(base.join(v)),
                    "resolution" => res = one(v)?,
                    _ => return Err(bad_key()),
                },
                "path" => match k {
                    "waypoint" => {
                        let p = parse_nums(line, v, 2)?;
                        sc.waypoints.push(Point2::new(p[0], p[1]));
                    }
                    "speed" => sc.speed = one(v)?,
                    "omega_max" => sc.omega_max = one(v)?,
                    "loop" => {
                        sc.loop_path = match v {
                            "true" | "1" => true,
                            "false" | "0" => false,
                            _ => return Err(ScenarioError::Parse { line, msg: format!("bad bool {v:?}") }),
                        }
                    }
                    _ => return Err(bad_key()),
                },
                "obstacles" => match k {
                    // radius x y vx vy t0 t1
                    "disc" => {
                        let p = parse_nums(line, v, 7)?;
                        sc.obstacles.push(ObstacleScript {
                            kind: ShapeKind::Disc { radius: p[0] },
                            start: Pose2D::new(p[1], p[2], 0.0),
                            vx: p[3],
                            vy: p[4],
                            t_start: p[5],
                            t_end: p[6],
                        });
                    }
                    // length x y theta vx vy t0 t1
                    "segment" => {
                        let p = parse_nums(line, v, 8)?;
                        sc.obstacles.push(ObstacleScript {
                            kind: ShapeKind::Segment { length: p[0] },
                            start: Pose2D::new(p[1], p[2], p[3]),
                            vx: p[4],
                            vy: p[5],
                            t_start: p[6],
                            t_end: p[7],
                        });
                    }
                    "random" => sc.random_obstacles = one(v)? as usize,
                    _ => return Err(bad_key()),
                },
                "noise" => match k {
                    "sigma_v" => sc.noise.sigma_v = one(v)?,
                    "sigma_omega" => sc.noise.sigma_omega = one(v)?,
                    "schedule" => {
                        let p = parse_nums(line, v, 3)?;
                        sc.noise.schedule.push((p[0], p[1], p[2]));
                    }
                    _ => return Err(bad_key()),
                },
                "run" => match k {
                    "duration" => sc.duration = one(v)?,
                    "dt" => sc.dt = one(v)?,
                    "seed" => {
                        sc.seed = Some(v.parse().map_err(|_| ScenarioError::Parse { line, msg: format!("bad seed {v:?}") })?)
                    }
                    "start" => {
                        let p = parse_nums(line, v, 3)?;
                        sc.start = Some(Pose2D::new(p[0], p[1], p[2]));
                    }
                    "init_offset" => {
                        let p = parse_nums(line, v, 3)?;
                        sc.init_offset = Pose2D::new(p[0], p[1], p[2]);
                    }
                    _ => return Err(bad_key()),
                },
                _ => return Err(ScenarioError::Parse { line, msg: "key outside a section".into() }),
            }
        }
        sc.map = match (map_name, map_file) {
            (Some(_), Some(_)) => return Err(ScenarioError::Invalid("[map] takes either name or file".into())),
            (_, Some(f)) => MapSource::File(f),
            (n, None) => MapSource::Bundled { name: n.unwrap_or_else(|| "rooms".into()), resolution: res },
        };
        sc.noise.schedule.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn load_grid(&self) -> Result<OccupancyGrid, ScenarioError> {
        match &self.map {
            MapSource::Bundled { name, resolution } => maps::by_name(name, *resolution, 0)
                .ok_or_else(|| ScenarioError::Invalid(format!("unknown bundled map {name:?}"))),
            MapSource::File(p) => Ok(load_map_from_meta(p)?),
        }
    }

    pub fn n_cycles(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn start_pose(&self) -> Pose2D {
        self.start.unwrap_or_else(|| match self.waypoints.as_slice() {
            [a, b, ..] => Pose2D::new(a.x, a.y, (b.y - a.y).atan2(b.x - a.x)),
            [a] => Pose2D::new(a.x, a.y, 0.0),
            [] => Pose2D::default(),
        })
    }

    /// Checks timing, speeds, and that the start and waypoints are free.
    pub fn validate(&self, grid: &OccupancyGrid) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if self.speed < 0.0 || self.omega_max <= 0.0 {
            return bad("speed must be >= 0 and omega_max > 0".into());
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !grid.is_free_at(*w) {
                return bad(format!("waypoint {} at ({}, {}) is not in free space", i + 1, w.x, w.y));
            }
        }
        let s = self.start_pose();
        if !grid.is_free_at(s.position()) {
            return bad(format!("start ({}, {}) is not in free space", s.x, s.y));
        }
        Ok(())
    }
}

/// Turn-then-drive waypoint follower.
#[derive(Debug, Clone)]
pub struct WaypointController {
    waypoints: Vec<Point2>,
    next: usize,
    speed: f64,
    omega_max: f64,
    loop_path: bool,
    tolerance: f64,
}

impl WaypointController {
    pub fn new(sc: &Scenario) -> Self {
        // skip the first waypoint when starting on it
        let start = sc.start_pose().position();
        let next = usize::from(sc.waypoints.first().is_some_and(|w| w.dist(&start) < 0.3));
        Self {
            waypoints: sc.waypoints.clone(),
            next,
            speed: sc.speed,
            omega_max: sc.omega_max,
            loop_path: sc.loop_path,
            tolerance: 0.3,
        }
    }

    /// Commanded `(v, ω)` from the ground-truth pose.
    pub fn command(&mut self, pose: &Pose2D) -> (f64, f64) {
        if self.waypoints.is_empty() {
            return (0.0, 0.0);
        }
        if self.next >= self.waypoints.len() {
            if !self.loop_path {
                return (0.0, 0.0);
            }
            self.next = 0;
        }
        let mut w = self.waypoints[self.next];
        if w.dist(&pose.position()) < self.tolerance {
            self.next += 1;
            if self.next >= self.waypoints.len() {
                if !self.loop_path {
                    return (0.0, 0.0);
                }
                self.next = 0;
            }
            w = self.waypoints[self.next];
        }
        let err = normalize_angle((w.y - pose.y).atan2(w.x - pose.x) - pose.theta);
        let omega = (2.0 * err).clamp(-self.omega_max, self.omega_max);
        let v = if err.abs() > std::f64::consts::FRAC_PI_3 { 0.0 } else { self.speed * err.cos() };
        (v, omega)
    }
}

/// Everything the filter side of a run needs.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub filter: FilterConfig,
    /// `None` disables global localization.
    pub global: Option<GlobalLocConfig>,
    /// Precomputed global keypoints; computed from the map when absent.
    pub keypoints: Option<Vec<Keypoint>>,
    pub dm: DecisionModel,
    pub lidar: LidarConfig,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub reports: Vec<CycleReport>,
}

impl ScenarioRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(100 * (self.reports.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.reports {
            let _ = writeln!(s, "{}", r.csv_row());
        }
        s
    }
}

fn random_discs(grid: &OccupancyGrid, n: usize, duration: f64, rng: &mut Rng) -> Vec<ObstacleScript> {
    let free: Vec<_> = grid.free_cells().collect();
    if free.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let (cx, cy) = free[rng.random_range(0..free.len())];
            let c = grid.cell_center(cx, cy);
            let heading: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let speed: f64 = rng.random_range(0.0..0.4);
            ObstacleScript {
                kind: ShapeKind::Disc { radius: rng.random_range(0.15..0.3) },
                start: Pose2D::new(c.x, c.y, 0.0),
                vx: speed * heading.cos(),
                vy: speed * heading.sin(),
                t_start: 0.0,
                t_end: duration,
            }
        })
        .collect()
}

/// Builds the localizer for a run on `grid`.
pub fn build_localizer(
    grid: Arc<OccupancyGrid>,
    setup: &RunSetup,
    initial: Pose2D,
    seed: u64,
) -> Result<Localizer, ScenarioError> {
    let df = Arc::new(DistanceField::build(&grid, DEFAULT_CLAMP));
    let filter = Filter::new(setup.filter.clone(), grid.clone(), df, setup.dm.clone(), initial, seed)?;
    let global = match setup.global {
        Some(cfg) => {
            cfg.validate()?;
            Some(match &setup.keypoints {
                Some(k) => GlobalLocalizer::with_keypoints(k.clone(), cfg),
                None => GlobalLocalizer::new(&grid, cfg),
            })
        }
        None => None,
    };
    Ok(Localizer::new(filter, global))
}

/// Closed-loop run; `inject` may add global samples each cycle given the
/// cycle index and ground truth.
pub fn run_scenario_with(
    sc: &Scenario,
    grid: Arc<OccupancyGrid>,
    setup: &RunSetup,
    seed: u64,
    mut inject: impl FnMut(u64, &Pose2D, &mut Rng) -> Vec<GlobalSample>,
) -> Result<ScenarioRun, ScenarioError> {
    sc.validate(&grid)?;
    setup.lidar.validate()?;
    let start = sc.start_pose();
    let mut world = WorldState::new(grid.clone(), start);
    world.noise = sc.noise.clone();
    world.obstacles = sc.obstacles.clone();
    let mut scene_rng = stream(seed, &[label::SCENE]);
    world
        .obstacles
        .extend(random_discs(&grid, sc.random_obstacles, sc.duration, &mut scene_rng));
    let initial = Pose2D::new(
        start.x + sc.init_offset.x,
        start.y + sc.init_offset.y,
        normalize_angle(start.theta + sc.init_offset.theta),
    );
    let mut loc = build_localizer(grid, setup, initial, seed)?;
    let mut ctl = WaypointController::new(sc);
    let mut world_rng = stream(seed, &[label::WORLD]);
    let mut reports = Vec::with_capacity(sc.n_cycles());
    for cycle in 0..sc.n_cycles() as u64 {
        let (v, omega) = ctl.command(&world.gt_pose);
        let odom = world.step(&OdometryInput::new(v, omega, sc.dt), &mut world_rng);
        let mut scan_rng = stream(seed, &[label::SCAN, cycle]);
        let scan = world.cast_scan(&setup.lidar, &mut scan_rng);
        let extra = inject(cycle, &world.gt_pose, &mut scan_rng);
        let mut r = loc.step(&odom, &scan, &extra);
        r.time_s = world.time;
        r.ground_truth = Some(world.gt_pose);
        reports.push(r);
    }
    Ok(ScenarioRun { reports })
}

pub fn run_scenario(sc: &Scenario, grid: Arc<OccupancyGrid>, setup: &RunSetup, seed: u64) -> Result<ScenarioRun, ScenarioError> {
    run_scenario_with(sc, grid, setup, seed, |_, _, _| Vec::new())
}
