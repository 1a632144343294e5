use std::f64::consts::PI;

use crate::error::{ensure, ConfigError};
use crate::geometry::{Point2, Pose2D};
use crate::map::DistanceField;
use crate::models::{BeamSet, Scan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub z_hit: f64,
    pub z_max: f64,
    pub z_rand: f64,
    /// Std-dev of the hit term, m.
    pub sigma_hit: f64,
    /// Rate of the unknown-obstacle exponential, 1/m.
    pub lambda: f64,
    pub class_prior_known: f64,
    pub beam_stride: usize,
    /// Width of the max-range spike, m.
    pub delta_max: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            z_hit: 0.9,
            z_max: 0.05,
            z_rand: 0.05,
            sigma_hit: 0.1,
            lambda: 0.1,
            class_prior_known: 0.5,
            beam_stride: 4,
            delta_max: 0.01,
        }
    }
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, z) in [("z_hit", self.z_hit), ("z_max", self.z_max), ("z_rand", self.z_rand)] {
            ensure(z.is_finite() && z >= 0.0, &format!("measurement.{name}"), || {
                format!("must be >= 0, got {z}")
            })?;
        }
        let sum = self.z_hit + self.z_max + self.z_rand;
        ensure((sum - 1.0).abs() <= 1e-9, "measurement.z_hit", || {
            format!("z_hit + z_max + z_rand must equal 1, got {sum}")
        })?;
        ensure(self.sigma_hit > 0.0 && self.sigma_hit.is_finite(), "measurement.sigma_hit", || {
            format!("must be > 0, got {}", self.sigma_hit)
        })?;
        ensure(self.lambda > 0.0 && self.lambda.is_finite(), "measurement.lambda", || {
            format!("must be > 0, got {}", self.lambda)
        })?;
        ensure(
            self.class_prior_known > 0.0 && self.class_prior_known < 1.0,
            "measurement.class_prior_known",
            || format!("must lie in (0, 1), got {}", self.class_prior_known),
        )?;
        ensure(self.beam_stride >= 1, "measurement.beam_stride", || "must be >= 1".into())?;
        ensure(self.delta_max > 0.0, "measurement.delta_max", || {
            format!("must be > 0, got {}", self.delta_max)
        })
    }
}

/// Which per-beam likelihood drives weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementMode {
    #[default]
    Ccmm,
    /// Plain likelihood field, no unknown class.
    Lfm,
}

/// Known-obstacle density given the endpoint residual `e`.
pub fn known_likelihood(range: f64, e: f64, range_max: f64, cfg: &MeasurementConfig) -> f64 {
    let s = cfg.sigma_hit;
    let hit = (-0.5 * (e / s).powi(2)).exp() / ((2.0 * PI).sqrt() * s);
    let max = if range >= range_max { 1.0 / cfg.delta_max } else { 0.0 };
    cfg.z_hit * hit + cfg.z_max * max + cfg.z_rand / range_max
}

/// Truncated exponential density on `(0, range_max]`.
pub fn unknown_likelihood(range: f64, range_max: f64, cfg: &MeasurementConfig) -> f64 {
    let l = cfg.lambda;
    l * (-l * range).exp() / (1.0 - (-l * range_max).exp())
}

/// Precomputed constants of both beam models for one `range_max`.
#[derive(Debug, Clone, Copy)]
struct BeamModel {
    hit_norm: f64,
    inv_two_var: f64,
    rand_term: f64,
    max_term: f64,
    lambda: f64,
    unk_norm: f64,
    prior_known: f64,
}

impl BeamModel {
    fn new(cfg: &MeasurementConfig, range_max: f64) -> Self {
        let s = cfg.sigma_hit;
        Self {
            hit_norm: cfg.z_hit / ((2.0 * PI).sqrt() * s),
            inv_two_var: 0.5 / (s * s),
            rand_term: cfg.z_rand / range_max,
            max_term: cfg.z_max / cfg.delta_max,
            lambda: cfg.lambda,
            unk_norm: cfg.lambda / (1.0 - (-cfg.lambda * range_max).exp()),
            prior_known: cfg.class_prior_known,
        }
    }

    #[inline]
    fn known(&self, e: f64, max_range: bool) -> f64 {
        let mut p = self.hit_norm * (-e * e * self.inv_two_var).exp() + self.rand_term;
        if max_range {
            p += self.max_term;
        }
        p
    }

    #[inline]
    fn unknown(&self, range: f64) -> f64 {
        self.unk_norm * (-self.lambda * range).exp()
    }
}

#[inline]
fn to_world(pose: &Pose2D, sc: (f64, f64), p: Point2) -> Point2 {
    let (s, c) = sc;
    Point2::new(pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y)
}

/// Result of scoring one pose against a prepared scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEval {
    pub log_likelihood: f64,
    /// `None` when no beam passes the residual cutoff.
    pub mae: Option<f64>,
}

/// Log-likelihood under `mode` and the residual MAE in a single pass.
/// Returns `None` for an empty beam set.
pub fn evaluate_pose(
    beams: &BeamSet,
    pose: &Pose2D,
    df: &DistanceField,
    cfg: &MeasurementConfig,
    e_max: f64,
    mode: MeasurementMode,
) -> Option<PoseEval> {
    if beams.is_empty() {
        return None;
    }
    let m = BeamModel::new(cfg, beams.range_max);
    let sc = pose.theta.sin_cos();
    let mut ll = 0.0;
    let (mut sum_e, mut n_e) = (0.0, 0usize);
    for b in &beams.beams {
        let e = df.lookup(to_world(pose, sc, b.end));
        let pk = m.known(e, b.max_range);
        ll += match mode {
            MeasurementMode::Ccmm => (m.prior_known * pk + (1.0 - m.prior_known) * m.unknown(b.range)).ln(),
            MeasurementMode::Lfm => pk.ln(),
        };
        if !b.max_range && e <= e_max {
            sum_e += e;
            n_e += 1;
        }
    }
    Some(PoseEval {
        log_likelihood: ll,
        mae: (n_e > 0).then(|| sum_e / n_e as f64),
    })
}

/// Per-beam CCMM evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CcmmEval {
    pub total: f64,
    /// Scan index of each evaluated beam.
    pub index: Vec<usize>,
    /// `(p(z|known)·p(known), p(z|unknown)·p(unknown))` per evaluated beam.
    pub per_beam: Vec<(f64, f64)>,
}

impl CcmmEval {
    /// Posterior probability that each beam hit an unmapped obstacle.
    pub fn unknown_posteriors(&self) -> Vec<f64> {
        self.per_beam.iter().map(|&(k, u)| u / (k + u)).collect()
    }
}

/// Class-conditional likelihood over the strided valid beams; `None` when
/// no beam is usable.
pub fn class_conditional_likelihood(
    scan: &Scan,
    pose: &Pose2D,
    df: &DistanceField,
    cfg: &MeasurementConfig,
) -> Option<CcmmEval> {
    class_conditional_beams(&BeamSet::new(scan, cfg.beam_stride), pose, df, cfg)
}

pub fn class_conditional_beams(
    beams: &BeamSet,
    pose: &Pose2D,
    df: &DistanceField,
    cfg: &MeasurementConfig,
) -> Option<CcmmEval> {
    if beams.is_empty() {
        return None;
    }
    let m = BeamModel::new(cfg, beams.range_max);
    let sc = pose.theta.sin_cos();
    let mut out = CcmmEval {
        total: 0.0,
        index: Vec::with_capacity(beams.len()),
        per_beam: Vec::with_capacity(beams.len()),
    };
    for b in &beams.beams {
        let e = df.lookup(to_world(pose, sc, b.end));
        let k = m.prior_known * m.known(e, b.max_range);
        let u = (1.0 - m.prior_known) * m.unknown(b.range);
        out.total += (k + u).ln();
        out.index.push(b.index);
        out.per_beam.push((k, u));
    }
    Some(out)
}

/// Mean residual over all valid, non-max-range beams with residual
/// `<= e_max`.
pub fn compute_mae(scan: &Scan, pose: &Pose2D, df: &DistanceField, e_max: f64) -> Option<f64> {
    let beams = BeamSet::new(scan, 1);
    mae_of_beams(&beams, pose, df, e_max)
}

pub fn mae_of_beams(beams: &BeamSet, pose: &Pose2D, df: &DistanceField, e_max: f64) -> Option<f64> {
    let sc = pose.theta.sin_cos();
    let (mut sum, mut n) = (0.0, 0usize);
    for b in beams.beams.iter().filter(|b| !b.max_range) {
        let e = df.lookup(to_world(pose, sc, b.end));
        if e <= e_max {
            sum += e;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean of the residuals `<= e_max`; the reference form of the MAE.
pub fn mae_of_residuals(residuals: &[f64], e_max: f64) -> Option<f64> {
    let (sum, n) = residuals
        .iter()
        .filter(|&&e| e <= e_max)
        .fold((0.0, 0usize), |(s, n), &e| (s + e, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{CellState, OccupancyGrid};
    use crate::rng;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn wall_df() -> DistanceField {
        // 10 m x 4 m room at 0.05 m, wall column at x in [5.0, 5.05)
        let mut g = OccupancyGrid::new(200, 80, 0.05, Pose2D::default(), CellState::Free).unwrap();
        for y in 0..80 {
            g.set(100, y, CellState::Occupied);
        }
        DistanceField::build(&g, 10.0)
    }

    fn one_beam(range: f64) -> Scan {
        Scan {
            ranges: vec![range],
            angle_min: 0.0,
            angle_increment: 0.01,
            range_min: 0.05,
            range_max: 30.0,
            sensor_offset: Pose2D::default(),
        }
    }

    #[test]
    fn rejects_unnormalised_mixture() {
        let cfg = MeasurementConfig { z_hit: 0.8, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(MeasurementConfig::default().validate().is_ok());
    }

    #[test]
    fn known_density_branches() {
        let cfg = MeasurementConfig::default();
        let peak = 0.9 / ((2.0 * PI).sqrt() * 0.1) + 0.05 / 30.0;
        assert_relative_eq!(known_likelihood(2.0, 0.0, 30.0, &cfg), peak, epsilon = 1e-12);
        let far = 0.9 * (-0.5f64 * 100.0f64.powi(2)).exp() / ((2.0 * PI).sqrt() * 0.1) + 0.05 / 30.0;
        assert_relative_eq!(known_likelihood(2.0, 10.0, 30.0, &cfg), far, epsilon = 1e-15);
        assert_relative_eq!(
            known_likelihood(30.0, 10.0, 30.0, &cfg) - known_likelihood(2.0, 10.0, 30.0, &cfg),
            0.05 / 0.01,
            epsilon = 1e-12
        );
    }

    #[test]
    fn unknown_density_values() {
        let cfg = MeasurementConfig::default();
        assert_relative_eq!(unknown_likelihood(1e-12, 30.0, &cfg), 0.10524, epsilon = 1e-5);
        assert!(unknown_likelihood(30.0, 30.0, &cfg) < unknown_likelihood(15.0, 30.0, &cfg));
    }

    #[test]
    fn exponential_integrates_to_one() {
        let mut r = rng::stream(5, &[]);
        for _ in 0..10 {
            let cfg = MeasurementConfig { lambda: r.random_range(0.01..3.0), ..Default::default() };
            let rmax: f64 = r.random_range(1.0..60.0);
            let n = 20_000;
            let h = rmax / n as f64;
            // composite Simpson
            let mut s = unknown_likelihood(0.0, rmax, &cfg) + unknown_likelihood(rmax, rmax, &cfg);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * unknown_likelihood(i as f64 * h, rmax, &cfg);
            }
            assert!((s * h / 3.0 - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn ccmm_matches_per_beam_reference() {
        let df = wall_df();
        let cfg = MeasurementConfig { beam_stride: 1, ..Default::default() };
        let mut r = rng::stream(9, &[]);
        for _ in 0..20 {
            let n = r.random_range(1..40);
            let scan = Scan {
                ranges: (0..n).map(|_| r.random_range(0.1..12.0)).collect(),
                angle_min: -1.5,
                angle_increment: 3.0 / n as f64,
                range_min: 0.05,
                range_max: 30.0,
                sensor_offset: Pose2D::new(0.1, 0.0, 0.0),
            };
            let pose = Pose2D::new(r.random_range(1.0..4.0), r.random_range(1.0..3.0), r.random_range(-3.0..3.0));
            let got = class_conditional_likelihood(&scan, &pose, &df, &cfg).unwrap();
            let mut want = 0.0;
            for k in 0..n {
                let end = pose.transform_point(scan.endpoint_robot(k));
                let e = df.lookup(end);
                let pk = known_likelihood(scan.ranges[k], e, 30.0, &cfg);
                let pu = unknown_likelihood(scan.ranges[k], 30.0, &cfg);
                want += (0.5 * pk + 0.5 * pu).ln();
            }
            assert_relative_eq!(got.total, want, epsilon = 1e-9, max_relative = 1e-12);
            let fast = evaluate_pose(&BeamSet::new(&scan, 1), &pose, &df, &cfg, 1.0, MeasurementMode::Ccmm).unwrap();
            assert_relative_eq!(fast.log_likelihood, want, epsilon = 1e-9, max_relative = 1e-12);
        }
    }

    #[test]
    fn two_beams_sum_of_singles() {
        let df = wall_df();
        let cfg = MeasurementConfig { beam_stride: 1, ..Default::default() };
        let pose = Pose2D::new(2.0, 2.0, 0.0);
        let a = class_conditional_likelihood(&one_beam(3.0), &pose, &df, &cfg).unwrap().total;
        let b = class_conditional_likelihood(&one_beam(1.0), &pose, &df, &cfg).unwrap().total;
        let both = Scan { ranges: vec![3.0, 1.0], angle_increment: 0.0, ..one_beam(0.0) };
        let ab = class_conditional_likelihood(&both, &pose, &df, &cfg).unwrap().total;
        assert_relative_eq!(ab, a + b, epsilon = 1e-12);
    }

    #[test]
    fn no_valid_beam_is_none() {
        let df = wall_df();
        let cfg = MeasurementConfig::default();
        assert!(class_conditional_likelihood(&one_beam(f64::NAN), &Pose2D::default(), &df, &cfg).is_none());
    }

    #[test]
    fn unknown_posterior_cases() {
        let df = wall_df();
        let cfg = MeasurementConfig { beam_stride: 1, ..Default::default() };
        // robot at x=2.025: wall cells start 3.0 m ahead
        let pose = Pose2D::new(2.0, 2.0, 0.0);
        let on_wall = class_conditional_likelihood(&one_beam(3.025), &pose, &df, &cfg).unwrap();
        assert!(on_wall.unknown_posteriors()[0] < 0.5);
        let pose = Pose2D::new(0.1, 2.0, 0.0);
        // hits something 3 m ahead while the wall is ~5 m away; residual ~2 m
        let short = class_conditional_likelihood(&one_beam(3.0), &pose, &df, &cfg).unwrap();
        assert!(short.unknown_posteriors()[0] > 0.9);
    }

    #[test]
    fn mae_hand_cases() {
        assert_eq!(mae_of_residuals(&[0.0, 0.0], 1.0), Some(0.0));
        assert_relative_eq!(mae_of_residuals(&[0.1, 0.3], 0.5).unwrap(), 0.2);
        assert_relative_eq!(mae_of_residuals(&[0.1, 0.9], 0.5).unwrap(), 0.1);
        assert_eq!(mae_of_residuals(&[0.9], 0.5), None);
    }

    #[test]
    fn mae_skips_max_range() {
        let df = wall_df();
        let pose = Pose2D::new(2.0, 2.0, 0.0);
        let scan = Scan { ranges: vec![30.0], ..one_beam(0.0) };
        assert_eq!(compute_mae(&scan, &pose, &df, 100.0), None);
    }
}
