use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure, ConfigError};
use crate::geometry::{normalize_angle, Pose2D};
use crate::map::DistanceField;
use crate::models::{mae_of_beams, BeamSet, ModelError, Scan};
use crate::rng::{self, label, Rng};

pub const FLOOR_DENSITY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocState {
    Success,
    Failure,
}

/// Class-conditional MAE densities for localization success and failure.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionModel {
    pub bin_width: f64,
    pub e_hist_max: f64,
    pub hist_success: Vec<f64>,
    pub hist_failure: Vec<f64>,
    pub d_th: f64,
    pub e_max: f64,
}

impl DecisionModel {
    /// Equal flat histograms: evidence never moves the reliability.
    pub fn uninformative(bin_width: f64, e_hist_max: f64, e_max: f64) -> Self {
        let n = bins_for(bin_width, e_hist_max);
        let d = 1.0 / (n as f64 * bin_width);
        Self {
            bin_width,
            e_hist_max,
            hist_success: vec![d; n],
            hist_failure: vec![d; n],
            d_th: e_hist_max / 2.0,
            e_max,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.hist_success.len()
    }

    /// Bin holding `d`; undefined MAE and `d >= e_hist_max` land in the last bin.
    pub fn bin(&self, d: Option<f64>) -> usize {
        let last = self.n_bins() - 1;
        match d {
            Some(d) if d.is_finite() && d < self.e_hist_max => {
                ((d.max(0.0) / self.bin_width) as usize).min(last)
            }
            _ => last,
        }
    }

    pub fn likelihood(&self, d: Option<f64>, s: LocState) -> f64 {
        let b = self.bin(d);
        match s {
            LocState::Success => self.hist_success[b],
            LocState::Failure => self.hist_failure[b],
        }
    }

    /// `(p(d|success), p(d|failure))`.
    pub fn likelihoods(&self, d: Option<f64>) -> (f64, f64) {
        let b = self.bin(d);
        (self.hist_success[b], self.hist_failure[b])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.bin_width > 0.0, "decision.bin_width", || "must be > 0".into())?;
        ensure(self.e_hist_max > 0.0, "decision.e_hist_max", || "must be > 0".into())?;
        ensure(!self.hist_success.is_empty(), "decision.bins", || "no bins".into())?;
        ensure(self.hist_success.len() == self.hist_failure.len(), "decision.bins", || {
            "success and failure histograms differ in length".into()
        })?;
        for (name, h) in [("hist_success", &self.hist_success), ("hist_failure", &self.hist_failure)] {
            ensure(h.iter().all(|&v| v > 0.0 && v.is_finite()), &format!("decision.{name}"), || {
                "densities must be positive".into()
            })?;
            let mass: f64 = h.iter().sum::<f64>() * self.bin_width;
            ensure((mass - 1.0).abs() <= 1e-6, &format!("decision.{name}"), || {
                format!("must integrate to 1, got {mass}")
            })?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("decision_model v1\n");
        let _ = writeln!(s, "bin_width {}", self.bin_width);
        let _ = writeln!(s, "e_hist_max {}", self.e_hist_max);
        let _ = writeln!(s, "d_th {}", self.d_th);
        let _ = writeln!(s, "e_max {}", self.e_max);
        for (i, (a, b)) in self.hist_success.iter().zip(&self.hist_failure).enumerate() {
            let _ = writeln!(s, "{i} {a:e} {b:e}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let err = |line: usize, msg: String| ModelError::Parse { line, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "decision_model v1" => {}
            Some((i, l)) => return Err(err(i + 1, format!("bad header {l:?}"))),
            None => return Err(err(1, "empty file".into())),
        }
        let mut scalar = |key: &str| -> Result<f64, ModelError> {
            let (i, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}`")))?;
            let mut t = l.split_whitespace();
            if t.next() != Some(key) {
                return Err(err(i + 1, format!("expected `{key}`")));
            }
            t.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(i + 1, format!("bad value for `{key}`")))
        };
        let bin_width = scalar("bin_width")?;
        let e_hist_max = scalar("e_hist_max")?;
        let d_th = scalar("d_th")?;
        let e_max = scalar("e_max")?;
        let (mut hs, mut hf) = (Vec::new(), Vec::new());
        for (i, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            let parsed = (t.len() == 3)
                .then(|| Some((t[0].parse::<usize>().ok()?, t[1].parse::<f64>().ok()?, t[2].parse::<f64>().ok()?)))
                .flatten();
            let Some((idx, a, b)) = parsed else {
                return Err(err(i + 1, format!("bad bin line {l:?}")));
            };
            if idx != hs.len() {
                return Err(err(i + 1, format!("bin index {idx} out of order")));
            }
            hs.push(a);
            hf.push(b);
        }
        let m = Self {
            bin_width,
            e_hist_max,
            hist_success: hs,
            hist_failure: hf,
            d_th,
            e_max,
        };
        m.validate().map_err(|e| err(0, e.to_string()))?;
        Ok(m)
    }
}

fn bins_for(bin_width: f64, e_hist_max: f64) -> usize {
    ((e_hist_max / bin_width).round() as usize).max(1)
}

/// Normalized histogram density with a floor: `(1 − B·w·f)·empirical + f`.
fn floored_density(counts: &[usize], bin_width: f64, floor: f64) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let b = counts.len() as f64;
    let keep = 1.0 - b * bin_width * floor;
    counts
        .iter()
        .map(|&c| keep * c as f64 / (total as f64 * bin_width) + floor)
        .collect()
}

/// A world that can produce ground-truth scans for training.
pub trait TrainingScene: Sync {
    fn distance_field(&self) -> &DistanceField;
    fn sample_free_pose(&self, rng: &mut Rng) -> Pose2D;
    fn scan_at(&self, pose: &Pose2D, rng: &mut Rng) -> Scan;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub n_samples: usize,
    pub pos_th: f64,
    pub ang_th: f64,
    /// Largest per-axis position perturbation std-dev, m.
    pub noise_pos: f64,
    /// Largest heading perturbation std-dev, rad.
    pub noise_ang: f64,
    /// Lower end of the log-uniform noise scale.
    pub noise_scale_min: f64,
    pub bin_width: f64,
    pub e_hist_max: f64,
    pub e_max: f64,
    pub beam_stride: usize,
    pub min_per_class: usize,
    pub floor_density: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            pos_th: 0.02,
            ang_th: 2f64.to_radians(),
            noise_pos: 0.5,
            noise_ang: 15f64.to_radians(),
            noise_scale_min: 0.005,
            bin_width: 0.025,
            e_hist_max: 1.0,
            e_max: 1.0,
            beam_stride: 4,
            min_per_class: 20,
            floor_density: FLOOR_DENSITY,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.pos_th >= 0.0, "decision.pos_th", || "must be >= 0".into())?;
        ensure(self.ang_th >= 0.0, "decision.ang_th", || "must be >= 0".into())?;
        ensure(self.noise_pos >= 0.0, "decision.noise_pos", || "must be >= 0".into())?;
        ensure(self.noise_ang >= 0.0, "decision.noise_ang", || "must be >= 0".into())?;
        ensure(
            self.noise_scale_min > 0.0 && self.noise_scale_min <= 1.0,
            "decision.noise_scale_min",
            || "must lie in (0, 1]".into(),
        )?;
        ensure(self.bin_width > 0.0, "decision.bin_width", || "must be > 0".into())?;
        ensure(self.e_hist_max > self.bin_width, "decision.e_hist_max", || {
            "must exceed bin_width".into()
        })?;
        ensure(self.e_max > 0.0, "decision.e_max", || "must be > 0".into())?;
        ensure(self.beam_stride >= 1, "decision.beam_stride", || "must be >= 1".into())?;
        let n = bins_for(self.bin_width, self.e_hist_max) as f64;
        ensure(
            self.floor_density > 0.0 && n * self.bin_width * self.floor_density < 1.0,
            "decision.floor_density",
            || "must be > 0 and leave mass for the data".into(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub n_success: usize,
    pub n_failure: usize,
    pub holdout_accuracy: f64,
    pub mean_success: f64,
    pub mean_failure: f64,
}

struct Sample {
    success: bool,
    mae: Option<f64>,
}

fn draw_sample(scene: &dyn TrainingScene, cfg: &TrainingConfig, seed: u64, i: usize) -> Sample {
    let mut r = rng::stream(seed, &[label::TRAIN, i as u64]);
    let gt = scene.sample_free_pose(&mut r);
    let scan = scene.scan_at(&gt, &mut r);
    let k = cfg.noise_scale_min.powf(1.0 - r.random::<f64>());
    let nx: f64 = r.sample(StandardNormal);
    let ny: f64 = r.sample(StandardNormal);
    let nt: f64 = r.sample(StandardNormal);
    let est = Pose2D::new(
        gt.x + k * cfg.noise_pos * nx,
        gt.y + k * cfg.noise_pos * ny,
        normalize_angle(gt.theta + k * cfg.noise_ang * nt),
    );
    let success = gt.distance(&est) <= cfg.pos_th && gt.angular_distance(&est) <= cfg.ang_th;
    let beams = BeamSet::new(&scan, cfg.beam_stride);
    Sample {
        success,
        mae: mae_of_beams(&beams, &est, scene.distance_field(), cfg.e_max),
    }
}

/// Builds the decision model from simulated (pose, perturbed pose) pairs.
/// Every fifth sample is held out for threshold selection.
pub fn train_decision_model(
    scene: &dyn TrainingScene,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<(DecisionModel, TrainingSummary), ModelError> {
    cfg.validate().map_err(ModelError::Config)?;
    if cfg.n_samples == 0 {
        return Err(ModelError::Training("empty training set (n_samples = 0)".into()));
    }
    let samples: Vec<Sample> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| draw_sample(scene, cfg, seed, i))
        .collect();
    let nb = bins_for(cfg.bin_width, cfg.e_hist_max);
    let mut model = DecisionModel {
        bin_width: cfg.bin_width,
        e_hist_max: cfg.e_hist_max,
        hist_success: vec![0.0; nb],
        hist_failure: vec![0.0; nb],
        d_th: 0.0,
        e_max: cfg.e_max,
    };
    let (mut cs, mut cf) = (vec![0usize; nb], vec![0usize; nb]);
    let (mut sum_s, mut sum_f) = (0.0, 0.0);
    for (i, s) in samples.iter().enumerate() {
        if i % 5 == 4 {
            continue;
        }
        let b = model.bin(s.mae);
        let d = s.mae.unwrap_or(cfg.e_hist_max).min(cfg.e_hist_max);
        if s.success {
            cs[b] += 1;
            sum_s += d;
        } else {
            cf[b] += 1;
            sum_f += d;
        }
    }
    let (ns, nf) = (cs.iter().sum::<usize>(), cf.iter().sum::<usize>());
    for (name, n) in [("success", ns), ("failure", nf)] {
        if n < cfg.min_per_class.max(1) {
            return Err(ModelError::Training(format!(
                "class `{name}` has {n} training samples, need at least {}",
                cfg.min_per_class.max(1)
            )));
        }
    }
    model.hist_success = floored_density(&cs, cfg.bin_width, cfg.floor_density);
    model.hist_failure = floored_density(&cf, cfg.bin_width, cfg.floor_density);

    // threshold candidates at interior bin edges; ties keep the smallest
    let holdout: Vec<&Sample> = samples.iter().skip(4).step_by(5).collect();
    let accuracy = |th: f64| -> f64 {
        if holdout.is_empty() {
            return 0.0;
        }
        let ok = holdout
            .iter()
            .filter(|s| s.mae.is_some_and(|d| d <= th) == s.success)
            .count();
        ok as f64 / holdout.len() as f64
    };
    let (mut best_th, mut best_acc) = (cfg.bin_width, f64::NEG_INFINITY);
    for k in 1..nb {
        let th = k as f64 * cfg.bin_width;
        let acc = accuracy(th);
        if acc > best_acc {
            best_acc = acc;
            best_th = th;
        }
    }
    model.d_th = best_th;
    let summary = TrainingSummary {
        n_success: ns,
        n_failure: nf,
        holdout_accuracy: best_acc.max(0.0),
        mean_success: sum_s / ns as f64,
        mean_failure: sum_f / nf as f64,
    };
    Ok((model, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_bin_model() -> DecisionModel {
        DecisionModel {
            bin_width: 0.5,
            e_hist_max: 1.0,
            hist_success: vec![1.6, 0.4],
            hist_failure: vec![0.4, 1.6],
            d_th: 0.5,
            e_max: 1.0,
        }
    }

    #[test]
    fn bins_and_last_bin_rule() {
        let m = two_bin_model();
        assert_eq!(m.likelihood(Some(0.1), LocState::Success), 1.6);
        assert_eq!(m.likelihood(Some(0.1), LocState::Success), m.likelihood(Some(0.4), LocState::Success));
        assert_eq!(m.likelihood(Some(7.0), LocState::Failure), 1.6);
        assert_eq!(m.likelihood(None, LocState::Failure), 1.6);
        assert!(m.likelihood(Some(0.1), LocState::Success) > m.likelihood(Some(0.1), LocState::Failure));
    }

    #[test]
    fn floor_keeps_mass_one_and_positive() {
        let d = floored_density(&[10, 0, 0, 5], 0.25, 1e-3);
        assert_relative_eq!(d.iter().sum::<f64>() * 0.25, 1.0, epsilon = 1e-12);
        assert!(d.iter().all(|&v| v >= 1e-3));
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let mut m = two_bin_model();
        m.hist_success = floored_density(&[3, 1], 0.5, 1e-3);
        m.hist_failure = floored_density(&[1, 7], 0.5, 1e-3);
        m.d_th = 0.123456789;
        let back = DecisionModel::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_rejects_bad_header() {
        assert!(matches!(DecisionModel::parse("nope\n"), Err(ModelError::Parse { line: 1, .. })));
    }

    struct Flat;
    impl TrainingScene for Flat {
        fn distance_field(&self) -> &DistanceField {
            unreachable!()
        }
        fn sample_free_pose(&self, _: &mut Rng) -> Pose2D {
            unreachable!()
        }
        fn scan_at(&self, _: &Pose2D, _: &mut Rng) -> Scan {
            unreachable!()
        }
    }

    #[test]
    fn zero_samples_is_an_error() {
        let cfg = TrainingConfig { n_samples: 0, ..Default::default() };
        assert!(matches!(train_decision_model(&Flat, &cfg, 1), Err(ModelError::Training(_))));
    }
}
