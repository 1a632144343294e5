use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::ConfigError;
use crate::geometry::{normalize_angle, Pose2D};
use crate::global_loc::GlobalSample;
use crate::map::{DistanceField, OccupancyGrid};
use crate::mcl_core::{CycleReport, FilterConfig, FilterMode, FusionConfig, GlobalScale};
use crate::models::{
    class_conditional_beams, evaluate_pose, sample_motion, transit_reliability, update_reliability, BeamSet,
    DecisionModel, MeasurementMode, OdometryInput, Scan,
};
use crate::rng::{label, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
    pub last_mae: Option<f64>,
}

impl Particle {
    pub fn new(pose: Pose2D, weight: f64) -> Self {
        Self { pose, weight, last_mae: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub tracking: Vec<Particle>,
    /// Global samples fused in the current cycle; empty between cycles.
    pub global: Vec<Particle>,
    pub reliability: f64,
    /// Index of the highest-weight tracking particle.
    pub ml_index: usize,
    pub estimate: Pose2D,
    /// Completed cycles.
    pub cycle: u64,
    /// Motion accumulated since the last reliability update.
    pub delta_d: f64,
    pub delta_theta: f64,
    /// Reliability after transit, before the current evidence.
    pub r_hat: f64,
    pub w_slow: f64,
    pub w_fast: f64,
    pub fusion: FusionStats,
}

/// Diagnostics of the last weighting phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FusionStats {
    /// Normalized weight mass carried by global samples.
    pub global_mass: f64,
    /// Largest unnormalized log-weight in each set.
    pub best_tracking_log: f64,
    pub best_global_log: f64,
    pub best_global_pose: Option<Pose2D>,
}

impl FilterState {
    pub fn ml_particle(&self) -> &Particle {
        &self.tracking[self.ml_index]
    }

    /// Sum of tracking and global weights.
    pub fn total_weight(&self) -> f64 {
        self.tracking.iter().chain(&self.global).map(|p| p.weight).sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let s2: f64 = self.tracking.iter().chain(&self.global).map(|p| p.weight * p.weight).sum();
        if s2 > 0.0 {
            1.0 / s2
        } else {
            0.0
        }
    }
}

/// Particle-centred Gaussian mixture plus uniform floor evaluated at `q`.
pub fn predictive_density(tracking: &[Particle], q: &Pose2D, cfg: &FusionConfig, unif: f64) -> f64 {
    let [sx, sy, st] = cfg.pred_sigma;
    let norm = 1.0 / ((2.0 * PI).powf(1.5) * sx * sy * st);
    let total: f64 = tracking.iter().map(|p| p.weight).sum();
    let mut g = 0.0;
    if total > 0.0 {
        for p in tracking {
            let dx = (q.x - p.pose.x) / sx;
            let dy = (q.y - p.pose.y) / sy;
            let dt = normalize_angle(q.theta - p.pose.theta) / st;
            let m = dx * dx + dy * dy + dt * dt;
            if m < 80.0 {
                g += p.weight * (-0.5 * m).exp();
            }
        }
        g *= norm / total;
    }
    cfg.beta * g + (1.0 - cfg.beta) * unif
}

/// Cumulative-sum inversion: `n` independent draws from normalized `weights`.
pub fn resample_indices(weights: &[f64], n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    let last = weights.len().saturating_sub(1);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

fn normalize_log(logs: &mut [f64]) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let u = 1.0 / logs.len() as f64;
        logs.iter_mut().for_each(|l| *l = u);
        return;
    }
    let mut sum = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logs.iter_mut().for_each(|l| *l /= sum);
}

fn circular_mean<'a>(ps: impl Iterator<Item = &'a Particle>) -> Pose2D {
    let (mut x, mut y, mut s, mut c, mut w) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in ps {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.theta.sin();
        c += p.weight * p.pose.theta.cos();
        w += p.weight;
    }
    if w <= 0.0 {
        return Pose2D::default();
    }
    Pose2D::new(x / w, y / w, s.atan2(c))
}

/// Particle filter with a tracking set and per-cycle global samples.
#[derive(Debug, Clone)]
pub struct Filter {
    pub cfg: FilterConfig,
    pub grid: Arc<OccupancyGrid>,
    pub df: Arc<DistanceField>,
    pub dm: DecisionModel,
    pub state: FilterState,
    seed: u64,
    unif: f64,
    free_cells: Vec<(usize, usize)>,
}

impl Filter {
    /// A filter whose cloud is drawn around `initial`.
    pub fn new(
        cfg: FilterConfig,
        grid: Arc<OccupancyGrid>,
        df: Arc<DistanceField>,
        dm: DecisionModel,
        initial: Pose2D,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        cfg.validate()?;
        dm.validate()?;
        let free_cells: Vec<_> = grid.free_cells().collect();
        if free_cells.is_empty() {
            return Err(ConfigError::new("map", "has no free cells"));
        }
        let unif = cfg.fusion.unif_value.unwrap_or_else(|| 1.0 / (grid.free_area() * 2.0 * PI));
        let state = FilterState {
            tracking: Vec::new(),
            global: Vec::new(),
            reliability: cfg.reliability.initial,
            ml_index: 0,
            estimate: initial,
            cycle: 0,
            delta_d: 0.0,
            delta_theta: 0.0,
            r_hat: cfg.reliability.initial,
            w_slow: 0.0,
            w_fast: 0.0,
            fusion: FusionStats::default(),
        };
        let mut f = Self { cfg, grid, df, dm, state, seed, unif, free_cells };
        f.init(initial);
        Ok(f)
    }

    /// Redraws the cloud around `initial` and resets the reliability.
    pub fn init(&mut self, initial: Pose2D) {
        let mut rng = stream(self.seed, &[label::INIT]);
        let [sx, sy, st] = self.cfg.init_spread;
        let n = self.cfg.n_particles;
        let w = 1.0 / n as f64;
        self.state.tracking = (0..n)
            .map(|_| {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let nt: f64 = rng.sample(StandardNormal);
                let pose = Pose2D::new(initial.x + sx * nx, initial.y + sy * ny, normalize_angle(initial.theta + st * nt));
                Particle::new(pose, w)
            })
            .collect();
        self.state.global.clear();
        self.state.reliability = self.cfg.reliability.initial;
        self.state.r_hat = self.state.reliability;
        self.state.ml_index = 0;
        self.state.estimate = initial;
        self.state.delta_d = 0.0;
        self.state.delta_theta = 0.0;
        self.state.w_slow = 0.0;
        self.state.w_fast = 0.0;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform density used as the predictive floor.
    pub fn unif_value(&self) -> f64 {
        self.unif
    }

    pub fn predict(&mut self, u: &OdometryInput) {
        let cycle = self.state.cycle;
        let seed = self.seed;
        let motion = self.cfg.motion;
        self.state.tracking.par_iter_mut().enumerate().for_each(|(i, p)| {
            let mut rng = stream(seed, &[label::MOTION, cycle, i as u64]);
            p.pose = sample_motion(&p.pose, u, &motion, &mut rng);
        });
        self.state.delta_d += u.v.hypot(u.v_y) * u.dt.abs();
        self.state.delta_theta += (u.omega * u.dt).abs();
    }

    /// Applies the motion since the last update to the reliability.
    pub fn transit(&mut self) {
        let s = &mut self.state;
        s.r_hat = transit_reliability(s.reliability, s.delta_d, s.delta_theta, &self.cfg.reliability);
        s.delta_d = 0.0;
        s.delta_theta = 0.0;
    }

    fn mode(&self) -> MeasurementMode {
        if self.cfg.use_ccmm && self.cfg.mode == FilterMode::Proposed {
            MeasurementMode::Ccmm
        } else {
            MeasurementMode::Lfm
        }
    }

    /// Weights the tracking set; leaves weights unnormalized in log space
    /// inside `logs`. Returns `false` when the scan has no usable beam.
    fn tracking_logs(&mut self, beams: &BeamSet) -> Option<Vec<f64>> {
        if beams.is_empty() {
            return None;
        }
        let (df, meas, dm, mode) = (&*self.df, &self.cfg.measurement, &self.dm, self.mode());
        let r_hat = self.state.r_hat;
        let use_dm = self.cfg.mode == FilterMode::Proposed;
        let evals: Vec<_> = self
            .state
            .tracking
            .par_iter()
            .map(|p| evaluate_pose(beams, &p.pose, df, meas, dm.e_max, mode).expect("non-empty beams"))
            .collect();
        let mut logs = Vec::with_capacity(evals.len());
        for (p, e) in self.state.tracking.iter_mut().zip(&evals) {
            p.last_mae = e.mae;
            let mut l = p.weight.ln() + e.log_likelihood;
            if use_dm {
                let (ps, pf) = dm.likelihoods(e.mae);
                l += (ps * r_hat + pf * (1.0 - r_hat)).ln();
            }
            logs.push(l);
        }
        if self.cfg.mode == FilterMode::Baseline {
            // mean per-beam likelihood drives the injection rate
            let k = beams.len() as f64;
            let w_avg: f64 = self
                .state
                .tracking
                .iter()
                .zip(&evals)
                .map(|(p, e)| p.weight * (e.log_likelihood / k).exp())
                .sum();
            let b = self.cfg.baseline;
            self.state.w_slow += b.alpha_slow * (w_avg - self.state.w_slow);
            self.state.w_fast += b.alpha_fast * (w_avg - self.state.w_fast);
        }
        Some(logs)
    }

    fn global_logs(&self, beams: &BeamSet, samples: &[GlobalSample]) -> Vec<f64> {
        let (df, meas, dm, fusion, unif) = (&*self.df, &self.cfg.measurement, &self.dm, &self.cfg.fusion, self.unif);
        let tracking = &self.state.tracking;
        let scale = match fusion.global_scale {
            GlobalScale::Unit => 0.0,
            GlobalScale::Count => (samples.len() as f64).ln(),
        };
        samples
            .par_iter()
            .map(|g| {
                let e = evaluate_pose(beams, &g.pose, df, meas, dm.e_max, MeasurementMode::Ccmm).expect("non-empty beams");
                let (ps, pf) = dm.likelihoods(e.mae);
                let pred = if fusion.ablate_predictive {
                    1.0
                } else {
                    predictive_density(tracking, &g.pose, fusion, unif)
                };
                e.log_likelihood + (0.5 * ps + 0.5 * pf).ln() + pred.ln() + scale
            })
            .collect()
    }

    /// Weights tracking particles and global samples and normalizes them
    /// jointly. Returns `false` (weights untouched) without usable beams.
    pub fn weight(&mut self, beams: &BeamSet, samples: &[GlobalSample]) -> bool {
        let Some(mut logs) = self.tracking_logs(beams) else {
            return false;
        };
        let fuse = self.cfg.mode == FilterMode::Proposed && !samples.is_empty();
        let n_track = logs.len();
        let best = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut stats = FusionStats { best_tracking_log: best(&logs), ..Default::default() };
        if fuse {
            let gl = self.global_logs(beams, samples);
            stats.best_global_log = best(&gl);
            stats.best_global_pose = gl
                .iter()
                .zip(samples)
                .fold((f64::NEG_INFINITY, None), |b, (l, s)| if *l > b.0 { (*l, Some(s.pose)) } else { b })
                .1;
            logs.extend(gl);
        } else {
            stats.best_global_log = f64::NEG_INFINITY;
        }
        normalize_log(&mut logs);
        stats.global_mass = logs[n_track..].iter().sum();
        self.state.fusion = stats;
        for (p, w) in self.state.tracking.iter_mut().zip(&logs) {
            p.weight = *w;
        }
        self.state.global = if fuse {
            samples
                .iter()
                .zip(&logs[n_track..])
                .map(|(g, w)| Particle::new(g.pose, *w))
                .collect()
        } else {
            Vec::new()
        };
        self.state.ml_index = self
            .state
            .tracking
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.weight > best.1 { (i, p.weight) } else { best })
            .0;
        true
    }

    pub fn estimate_pose(&mut self) -> Pose2D {
        self.state.estimate = circular_mean(self.state.tracking.iter().chain(&self.state.global));
        self.state.estimate
    }

    /// Unknown-class posterior of each evaluated beam at the ML particle,
    /// paired with its scan index.
    pub fn estimate_classes(&self, beams: &BeamSet) -> Vec<(usize, f64)> {
        let pose = self.state.ml_particle().pose;
        let mut meas = self.cfg.measurement;
        meas.class_prior_known = 0.5;
        match class_conditional_beams(beams, &pose, &self.df, &meas) {
            Some(e) => e.index.iter().copied().zip(e.unknown_posteriors()).collect(),
            None => Vec::new(),
        }
    }

    pub fn estimate_reliability(&mut self) -> f64 {
        let d = self.state.ml_particle().last_mae;
        self.state.reliability = update_reliability(self.state.r_hat, d, &self.dm, &self.cfg.reliability);
        self.state.reliability
    }

    fn injection_probability(&self) -> f64 {
        if self.cfg.mode != FilterMode::Baseline || self.state.w_slow <= 0.0 {
            return 0.0;
        }
        (1.0 - self.state.w_fast / self.state.w_slow).max(0.0)
    }

    fn random_free_pose(&self, rng: &mut Rng) -> Pose2D {
        let (cx, cy) = self.free_cells[rng.random_range(0..self.free_cells.len())];
        let c = self.grid.cell_center(cx, cy);
        let h = 0.5 * self.grid.resolution();
        Pose2D::new(
            c.x + rng.random_range(-h..h),
            c.y + rng.random_range(-h..h),
            rng.random_range(-PI..PI),
        )
    }

    /// Resamples when the pool is degenerate or holds global samples.
    /// Returns whether it ran.
    pub fn resample(&mut self) -> bool {
        let n_total = self.state.tracking.len() + self.state.global.len();
        let p_inject = self.injection_probability();
        let ess = self.state.effective_sample_size();
        let forced = !self.state.global.is_empty() || p_inject > 0.0;
        if !forced && ess >= self.cfg.fusion.resample_ess_ratio * n_total as f64 {
            return false;
        }
        let mut rng = stream(self.seed, &[label::RESAMPLE, self.state.cycle]);
        let pool: Vec<Particle> = self.state.tracking.iter().chain(&self.state.global).copied().collect();
        let weights: Vec<f64> = pool.iter().map(|p| p.weight).collect();
        let n = self.cfg.n_particles;
        let idx = resample_indices(&weights, n, &mut rng);
        let mut inj = stream(self.seed, &[label::INJECT, self.state.cycle]);
        let w = 1.0 / n as f64;
        self.state.tracking = idx
            .into_iter()
            .map(|i| {
                if p_inject > 0.0 && inj.random::<f64>() < p_inject {
                    Particle::new(self.random_free_pose(&mut inj), w)
                } else {
                    Particle { weight: w, ..pool[i] }
                }
            })
            .collect();
        if p_inject > 0.0 {
            self.state.w_slow = 0.0;
            self.state.w_fast = 0.0;
        }
        self.state.global.clear();
        self.state.ml_index = self.state.ml_index.min(n - 1);
        true
    }

    /// One full cycle. `time_s` and ground truth are passed through to the
    /// report only.
    pub fn step(&mut self, u: &OdometryInput, scan: &Scan, samples: &[GlobalSample]) -> CycleReport {
        self.predict(u);
        self.transit();
        let beams = BeamSet::new(scan, self.cfg.measurement.beam_stride);
        let weighted = self.weight(&beams, samples);
        let n_global = self.state.global.len();
        self.estimate_pose();
        let (posteriors, mae) = if weighted {
            let post = self.estimate_classes(&beams);
            self.estimate_reliability();
            (post, self.state.ml_particle().last_mae)
        } else {
            self.state.reliability = self.state.r_hat;
            (Vec::new(), None)
        };
        let chi = self.cfg.fusion.chi;
        let unknown_beams: Vec<usize> = posteriors.iter().filter(|(_, p)| *p > chi).map(|(i, _)| *i).collect();
        let ml_pose = self.state.ml_particle().pose;
        let resampled = self.resample();
        let report = CycleReport {
            cycle: self.state.cycle,
            time_s: 0.0,
            estimate: self.state.estimate,
            ground_truth: None,
            reliability: self.state.reliability,
            mae,
            n_global_samples: n_global,
            unknown_beams,
            ml_pose,
            resampled,
            fusion: self.state.fusion,
        };
        self.state.cycle += 1;
        report
    }
}
