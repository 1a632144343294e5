use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data_io::{grid_offsets, FlaserConvention};
use crate::error::{ensure, ConfigError};
use crate::global_loc::GlobalLocConfig;
use crate::mcl_core::{FilterConfig, FilterMode, GlobalScale};
use crate::models::{Drive, TrainingConfig};
use crate::sim::LidarConfig;

/// Every tunable of a run, loaded from one sectioned file plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub global: GlobalLocConfig,
    pub global_enabled: bool,
    pub lidar: LidarConfig,
    pub training: TrainingConfig,
    /// Random unmapped discs per training sample.
    pub training_clutter: usize,
    /// Minimum wall clearance of training poses, m.
    pub training_margin: f64,
    /// Decision-model file; trained on the run's map when absent.
    pub decision_model: Option<PathBuf>,
    pub carmen: FlaserConvention,
    pub likelihood_extent: f64,
    pub likelihood_resolution: f64,
    /// Position error below which a run counts as localized, m.
    pub eval_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            global: GlobalLocConfig::default(),
            global_enabled: true,
            lidar: LidarConfig::default(),
            training: TrainingConfig::default(),
            training_clutter: 6,
            training_margin: 0.3,
            decision_model: None,
            carmen: FlaserConvention::default(),
            likelihood_extent: 0.5,
            likelihood_resolution: 0.025,
            eval_threshold: 0.3,
        }
    }
}

type Getter = fn(&RunConfig) -> String;
type Setter = fn(&mut RunConfig, &str) -> Result<(), String>;

/// One configurable key.
pub struct Key {
    pub name: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
    pub get: Getter,
    pub set: Setter,
}

fn f(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn u(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn b(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

macro_rules! key {
    ($name:literal, $unit:literal, $help:literal, |$c:ident| $field:expr, $parse:expr) => {
        Key {
            name: $name,
            unit: $unit,
            help: $help,
            get: |$c| format!("{}", $field),
            set: |$c, v| {
                $field = $parse(v)?;
                Ok(())
            },
        }
    };
}

pub static KEYS: &[Key] = &[
    key!("filter.n_particles", "count", "tracking particles", |c| c.filter.n_particles, u),
    key!("filter.init_sigma_x", "m", "initial cloud spread in x", |c| c.filter.init_spread[0], f),
    key!("filter.init_sigma_y", "m", "initial cloud spread in y", |c| c.filter.init_spread[1], f),
    key!("filter.init_sigma_theta", "rad", "initial cloud heading spread", |c| c.filter.init_spread[2], f),
    Key {
        name: "filter.mode",
        unit: "proposed|baseline",
        help: "weighting scheme of the tracking set",
        get: |c| match c.filter.mode {
            FilterMode::Proposed => "proposed".into(),
            FilterMode::Baseline => "baseline".into(),
        },
        set: |c, v| {
            c.filter.mode = match v {
                "proposed" => FilterMode::Proposed,
                "baseline" => FilterMode::Baseline,
                _ => return Err(format!("`{v}` is not proposed or baseline")),
            };
            Ok(())
        },
    },
    key!("filter.use_ccmm", "bool", "class-conditional weighting (false: plain likelihood field)", |c| c.filter.use_ccmm, b),
    Key {
        name: "motion.drive",
        unit: "differential|omni",
        help: "drive kinematics",
        get: |c| match c.filter.motion.drive {
            Drive::Differential => "differential".into(),
            Drive::Omni => "omni".into(),
        },
        set: |c, v| {
            c.filter.motion.drive = match v {
                "differential" => Drive::Differential,
                "omni" => Drive::Omni,
                _ => return Err(format!("`{v}` is not differential or omni")),
            };
            Ok(())
        },
    },
    key!("motion.a1", "-", "var(v) per v²", |c| c.filter.motion.a[0], f),
    key!("motion.a2", "m²/rad²", "var(v) per ω²", |c| c.filter.motion.a[1], f),
    key!("motion.a3", "rad²/m²", "var(ω) per v²", |c| c.filter.motion.a[2], f),
    key!("motion.a4", "-", "var(ω) per ω²", |c| c.filter.motion.a[3], f),
    key!("motion.a5", "-", "var(v_y) per v_y² (omni)", |c| c.filter.motion.a[4], f),
    key!("motion.a6", "m²/rad²", "var(v_y) per ω² (omni)", |c| c.filter.motion.a[5], f),
    key!("measurement.z_hit", "-", "hit mixture weight", |c| c.filter.measurement.z_hit, f),
    key!("measurement.z_max", "-", "max-range mixture weight", |c| c.filter.measurement.z_max, f),
    key!("measurement.z_rand", "-", "random mixture weight", |c| c.filter.measurement.z_rand, f),
    key!("measurement.sigma_hit", "m", "std-dev of the hit term", |c| c.filter.measurement.sigma_hit, f),
    key!("measurement.lambda", "1/m", "rate of the unknown-obstacle density", |c| c.filter.measurement.lambda, f),
    key!("measurement.class_prior_known", "probability", "prior of the mapped class", |c| c.filter.measurement.class_prior_known, f),
    key!("measurement.beam_stride", "beams", "use every n-th beam", |c| c.filter.measurement.beam_stride, u),
    key!("measurement.delta_max", "m", "width of the max-range spike", |c| c.filter.measurement.delta_max, f),
    key!("reliability.alpha_trans", "1/m²", "decay per squared translation", |c| c.filter.reliability.alpha_trans, f),
    key!("reliability.alpha_rot", "1/rad²", "decay per squared rotation", |c| c.filter.reliability.alpha_rot, f),
    key!("reliability.r_floor", "probability", "lower clamp", |c| c.filter.reliability.r_floor, f),
    key!("reliability.r_ceil", "probability", "upper clamp", |c| c.filter.reliability.r_ceil, f),
    key!("reliability.initial", "probability", "reliability at start", |c| c.filter.reliability.initial, f),
    key!("fusion.beta", "-", "mixture weight of the predictive density", |c| c.filter.fusion.beta, f),
    key!("fusion.pred_sigma_x", "m", "predictive kernel std-dev in x", |c| c.filter.fusion.pred_sigma[0], f),
    key!("fusion.pred_sigma_y", "m", "predictive kernel std-dev in y", |c| c.filter.fusion.pred_sigma[1], f),
    key!("fusion.pred_sigma_theta", "rad", "predictive kernel heading std-dev", |c| c.filter.fusion.pred_sigma[2], f),
    Key {
        name: "fusion.unif_value",
        unit: "1/(m²·rad)|auto",
        help: "uniform floor of the predictive density; auto = 1/(free area·2π)",
        get: |c| c.filter.fusion.unif_value.map_or("auto".into(), |v| format!("{v}")),
        set: |c, v| {
            c.filter.fusion.unif_value = if v == "auto" { None } else { Some(f(v)?) };
            Ok(())
        },
    },
    key!("fusion.chi", "-", "reliability split between the two sets", |c| c.filter.fusion.chi, f),
    key!("fusion.resample_ess_ratio", "-", "resample when ESS falls below this fraction", |c| c.filter.fusion.resample_ess_ratio, f),
    Key {
        name: "fusion.global_scale",
        unit: "unit|count",
        help: "proposal constant of global samples",
        get: |c| match c.filter.fusion.global_scale {
            GlobalScale::Unit => "unit".into(),
            GlobalScale::Count => "count".into(),
        },
        set: |c, v| {
            c.filter.fusion.global_scale = match v {
                "unit" => GlobalScale::Unit,
                "count" => GlobalScale::Count,
                _ => return Err(format!("`{v}` is not unit or count")),
            };
            Ok(())
        },
    },
    key!("fusion.ablate_predictive", "bool", "drop the predictive factor from global weights", |c| c.filter.fusion.ablate_predictive, b),
    key!("baseline.alpha_slow", "-", "slow likelihood average rate", |c| c.filter.baseline.alpha_slow, f),
    key!("baseline.alpha_fast", "-", "fast likelihood average rate", |c| c.filter.baseline.alpha_fast, f),
    key!("global.enabled", "bool", "fuse global-localization samples", |c| c.global_enabled, b),
    key!("global.feature_resolution", "m", "cell size of feature grids", |c| c.global.feature_resolution, f),
    key!("global.sigma_smooth", "m", "distance-field smoothing std-dev", |c| c.global.sigma_smooth, f),
    key!("global.window", "m", "descriptor window side", |c| c.global.window, f),
    key!("global.grad_eps", "-", "gradients below this are flat", |c| c.global.grad_eps, f),
    key!("global.hess_eps", "1/m", "minimum Hessian eigenvalue magnitude", |c| c.global.hess_eps, f),
    key!("global.avg_df_threshold", "m", "minimum mean distance in a keypoint window", |c| c.global.avg_df_threshold, f),
    key!("global.ratio_const", "-", "descriptor ratio test constant", |c| c.global.ratio_const, f),
    key!("global.sigma_xy", "m", "sample spread around a match", |c| c.global.sigma_xy, f),
    key!("global.sigma_theta", "rad", "sample heading spread", |c| c.global.sigma_theta, f),
    key!("global.n_per_match", "count", "samples per candidate pose", |c| c.global.n_per_match, u),
    key!("global.rate_min", "-", "minimum matching rate of a sample", |c| c.global.rate_min, f),
    key!("global.match_residual", "m", "beam residual counted as matched", |c| c.global.match_residual, f),
    key!("global.n_acc", "scans", "scans accumulated into the local map", |c| c.global.n_acc, u),
    key!("global.local_range", "m", "radius of the local map", |c| c.global.local_range, f),
    key!("global.interval", "cycles", "run global localization every n cycles", |c| c.global.interval, u),
    key!("lidar.fov", "rad", "simulated field of view", |c| c.lidar.fov, f),
    key!("lidar.angle_increment", "rad", "simulated beam spacing", |c| c.lidar.angle_increment, f),
    key!("lidar.range_min", "m", "simulated minimum range", |c| c.lidar.range_min, f),
    key!("lidar.range_max", "m", "simulated maximum range", |c| c.lidar.range_max, f),
    key!("lidar.sigma_r", "m", "simulated range noise std-dev", |c| c.lidar.sigma_r, f),
    key!("decision.n_samples", "count", "training pairs", |c| c.training.n_samples, u),
    key!("decision.pos_th", "m", "position threshold of a success", |c| c.training.pos_th, f),
    key!("decision.ang_th", "rad", "heading threshold of a success", |c| c.training.ang_th, f),
    key!("decision.noise_pos", "m", "largest position perturbation std-dev", |c| c.training.noise_pos, f),
    key!("decision.noise_ang", "rad", "largest heading perturbation std-dev", |c| c.training.noise_ang, f),
    key!("decision.noise_scale_min", "-", "lower end of the log-uniform noise scale", |c| c.training.noise_scale_min, f),
    key!("decision.bin_width", "m", "histogram bin width", |c| c.training.bin_width, f),
    key!("decision.e_hist_max", "m", "histogram upper edge", |c| c.training.e_hist_max, f),
    key!("decision.e_max", "m", "residual cutoff of the MAE", |c| c.training.e_max, f),
    key!("decision.beam_stride", "beams", "beam stride while training", |c| c.training.beam_stride, u),
    key!("decision.min_per_class", "count", "minimum samples per class", |c| c.training.min_per_class, u),
    key!("decision.floor_density", "1/m", "histogram floor", |c| c.training.floor_density, f),
    key!("decision.clutter", "count", "random unmapped discs per training scan", |c| c.training_clutter, u),
    key!("decision.margin", "m", "wall clearance of training poses", |c| c.training_margin, f),
    Key {
        name: "decision.model",
        unit: "path|none",
        help: "decision-model file; none trains one on the map",
        get: |c| c.decision_model.as_ref().map_or("none".into(), |p| p.display().to_string()),
        set: |c, v| {
            c.decision_model = (v != "none" && !v.is_empty()).then(|| PathBuf::from(v));
            Ok(())
        },
    },
    key!("carmen.fov", "rad", "FLASER field of view", |c| c.carmen.fov, f),
    key!("carmen.range_min", "m", "FLASER minimum range", |c| c.carmen.range_min, f),
    key!("carmen.range_max", "m", "FLASER no-return range", |c| c.carmen.range_max, f),
    key!("likelihood.extent", "m", "half side of the likelihood grid", |c| c.likelihood_extent, f),
    key!("likelihood.resolution", "m", "likelihood grid cell", |c| c.likelihood_resolution, f),
    key!("eval.threshold", "m", "position error that counts as localized", |c| c.eval_threshold, f),
];

pub fn find_key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

impl RunConfig {
    /// Applies `section.key = value`.
    pub fn set(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        let k = find_key(name).ok_or_else(|| ConfigError::new(name, "unknown key"))?;
        (k.set)(self, value.trim()).map_err(|r| ConfigError::new(name, r))
    }

    pub fn get(&self, name: &str) -> Option<String> {
        find_key(name).map(|k| (k.get)(self))
    }

    /// Applies a `[section]` / `key = value` file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(s) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = s.trim().to_string();
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}", i + 1), "expected key = value"))?;
            let name = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.set(&name, v)?;
        }
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::new(kv, "override must look like section.key=value"))?;
        self.set(k.trim(), v)
    }

    /// Defaults, then `file`, then `overrides` in order; validated.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        if let Some(p) = file {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", p.display())))?;
            c.apply_text(&text)?;
        }
        for o in overrides {
            c.apply_override(o)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.filter.validate()?;
        self.global.validate()?;
        self.lidar.validate()?;
        self.training.validate()?;
        ensure(self.training_margin >= 0.0, "decision.margin", || "must be >= 0".into())?;
        ensure(self.carmen.fov > 0.0, "carmen.fov", || "must be > 0".into())?;
        ensure(
            self.carmen.range_min >= 0.0 && self.carmen.range_max > self.carmen.range_min,
            "carmen.range_max",
            || "need 0 <= range_min < range_max".into(),
        )?;
        grid_offsets(self.likelihood_extent, self.likelihood_resolution).map_err(|e| {
            ConfigError::new(format!("likelihood.{}", e.field), e.reason)
        })?;
        ensure(self.eval_threshold > 0.0, "eval.threshold", || "must be > 0".into())
    }

    /// The full file, every key at its current value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for k in KEYS {
            let (s, name) = k.name.split_once('.').unwrap_or(("", k.name));
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let _ = writeln!(out, "{name} = {}", (k.get)(self));
        }
        out
    }
}

/// `key  default  [unit]  help` per line, for `--help`.
pub fn keys_help() -> String {
    let d = RunConfig::default();
    let mut s = String::from("Config keys (section.key = default [unit]):\n");
    for k in KEYS {
        let _ = writeln!(s, "  {} = {} [{}]  {}", k.name, (k.get)(&d), k.unit, k.help);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrips_every_key() {
        let mut c = RunConfig::default();
        c.set("filter.n_particles", "123").unwrap();
        c.set("fusion.unif_value", "0.002").unwrap();
        c.set("decision.model", "dm.txt").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn override_wins_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "[filter]\nn_particles = 200\n[global]\nratio_const = 1.1\n").unwrap();
        let c = RunConfig::load(Some(&p), &["filter.n_particles=50".into()]).unwrap();
        assert_eq!(c.filter.n_particles, 50);
        assert_eq!(c.global.ratio_const, 1.1);
        assert_eq!(c.filter.measurement.sigma_hit, 0.1);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = RunConfig::load(None, &["measurement.z_hit=0.5".into()]).unwrap_err();
        assert_eq!(e.field, "measurement.z_hit");
        let e = RunConfig::load(None, &["likelihood.extent=0".into()]).unwrap_err();
        assert_eq!(e.field, "likelihood.extent");
        let e = RunConfig::load(None, &["filter.bogus=1".into()]).unwrap_err();
        assert_eq!(e.field, "filter.bogus");
        let e = RunConfig::load(None, &["filter.n_particles=-3".into()]).unwrap_err();
        assert_eq!(e.field, "filter.n_particles");
    }

    #[test]
    fn help_lists_every_key() {
        let h = keys_help();
        for k in KEYS {
            assert!(h.contains(k.name), "{}", k.name);
        }
        assert!(h.contains("measurement.sigma_hit = 0.1 [m]"));
    }
}
