//! Particle filter over the swarm's image-plane position.
//!
//! Each frame the particles are displaced by the image motion induced by the
//! camera's egomotion, jittered with isotropic Gaussian noise, weighted by the
//! soft mask sampled at their positions and resampled with a roulette wheel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{induced_flow, motion_between_poses, CameraMotion, CameraPose, ImagePoint, Intrinsics};
use crate::mask::SoftMask;
use crate::{Error, Result};

/// One hypothesis of the swarm position, in image-corner coordinates.
pub type Particle = ImagePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub n_particles: usize,
    /// Standard deviation of the per-frame motion noise (px).
    pub motion_noise_sigma: f64,
    /// Resample every this many frames; 0 disables resampling.
    pub resample_every: usize,
    pub seed: u64,
    /// Likelihood is the mask value raised to this power.
    pub likelihood_exponent: f64,
    /// Consecutive lost frames before the particles are re-spread uniformly.
    pub reinit_after_lost: usize,
    /// Effective sample size, as a fraction of the particle count, below which
    /// a frame is flagged as weight-degenerate.
    pub collapse_ess_fraction: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            n_particles: 1000,
            motion_noise_sigma: 8.0,
            resample_every: 1,
            seed: 0,
            likelihood_exponent: 1.0,
            reinit_after_lost: 30,
            collapse_ess_fraction: 0.01,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::config("tracker.n_particles", "must be >= 2"));
        }
        if !(self.motion_noise_sigma >= 0.0 && self.motion_noise_sigma.is_finite()) {
            return Err(Error::config("tracker.motion_noise_sigma", "must be >= 0"));
        }
        if !(self.likelihood_exponent > 0.0 && self.likelihood_exponent.is_finite()) {
            return Err(Error::config("tracker.likelihood_exponent", "must be > 0"));
        }
        if self.reinit_after_lost == 0 {
            return Err(Error::config("tracker.reinit_after_lost", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.collapse_ess_fraction) {
            return Err(Error::config(
                "tracker.collapse_ess_fraction",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Weighted particles approximating the belief over the swarm position.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ParticleSet {
    /// `n` particles i.i.d. uniform over the image, equal weights.
    pub fn init_uniform(k: &Intrinsics, n: usize, seed: u64) -> Result<Self> {
        k.validate()?;
        if n < 2 {
            return Err(Error::config("tracker.n_particles", "must be >= 2"));
        }
        let mut set = ParticleSet {
            particles: Vec::with_capacity(n),
            weights: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        set.respread(k, n);
        Ok(set)
    }

    /// Build a set from explicit particles and weights.
    pub fn from_parts(particles: Vec<Particle>, weights: Vec<f64>, seed: u64) -> Result<Self> {
        if particles.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "particles and weights",
                left: particles.len(),
                right: weights.len(),
            });
        }
        if particles.len() < 2 {
            return Err(Error::TooFewPoints {
                need: 2,
                got: particles.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::NonFinite("particle weights"));
        }
        Ok(ParticleSet {
            particles,
            weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn respread(&mut self, k: &Intrinsics, n: usize) {
        let (w, h) = (k.width as f64, k.height as f64);
        let rng = &mut self.rng;
        self.particles.clear();
        self.particles
            .extend((0..n).map(|_| ImagePoint::new(rng.random::<f64>() * w, rng.random::<f64>() * h)));
        self.weights = vec![1.0 / n as f64; n];
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn set_uniform_weights(&mut self) {
        let w = 1.0 / self.len() as f64;
        self.weights.fill(w);
    }

    /// Effective sample size `1 / sum(w^2)` of the normalized weights.
    pub fn effective_sample_size(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        1.0 / self.weights.iter().map(|w| (w / total).powi(2)).sum::<f64>()
    }

    /// Move every particle by the flow induced at its own position, then add
    /// isotropic Gaussian noise of standard deviation `sigma`. Weights are
    /// unchanged.
    pub fn predict(&mut self, motion: &CameraMotion, k: &Intrinsics, z: f64, sigma: f64) -> Result<()> {
        if !(z > 0.0) {
            return Err(Error::InvalidHeight(z));
        }
        if !motion.is_finite() {
            return Err(Error::NonFinite("camera motion"));
        }
        for p in &mut self.particles {
            let flow = induced_flow(&k.to_centered(*p), motion, k, z)?;
            p.u += flow.x;
            p.v += flow.y;
            if sigma > 0.0 {
                let nx: f64 = self.rng.sample(StandardNormal);
                let ny: f64 = self.rng.sample(StandardNormal);
                p.u += sigma * nx;
                p.v += sigma * ny;
            }
        }
        Ok(())
    }

    /// Multiply each weight by the mask likelihood at the particle and
    /// normalize. Particles outside the mask get weight zero.
    ///
    /// When every weight would be zero the set is left untouched and
    /// [`Error::TrackLost`] is returned.
    pub fn update_weights(&mut self, mask: &SoftMask, exponent: f64) -> Result<()> {
        let updated: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let like = mask.sample(p.u, p.v).unwrap_or(0.0);
                let like = if exponent == 1.0 { like } else { like.powf(exponent) };
                w * like
            })
            .collect();
        let total: f64 = updated.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::TrackLost);
        }
        self.weights = updated.into_iter().map(|w| w / total).collect();
        Ok(())
    }

    /// Fitness-proportionate selection: draw `N` particles with replacement by
    /// inverting the cumulative weight array, then reset weights to `1/N`.
    pub fn resample_roulette(&mut self) -> Result<()> {
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::TrackLost);
        }
        let last = cumulative.len() - 1;
        let drawn: Vec<Particle> = (0..self.len())
            .map(|_| {
                let r = self.rng.random::<f64>() * acc;
                let idx = cumulative.partition_point(|&c| c <= r).min(last);
                self.particles[idx]
            })
            .collect();
        self.particles = drawn;
        self.set_uniform_weights();
        Ok(())
    }

    /// Weighted mean of the particle positions.
    pub fn estimate_centroid(&self) -> ImagePoint {
        let total: f64 = self.weights.iter().sum();
        let (su, sv) = self
            .particles
            .iter()
            .zip(&self.weights)
            .fold((0.0, 0.0), |(su, sv), (p, w)| (su + w * p.u, sv + w * p.v));
        ImagePoint::new(su / total, sv / total)
    }
}

/// Per-frame tracker output.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEstimate {
    pub frame: usize,
    /// Posterior weighted mean, image-corner coordinates.
    pub centroid: ImagePoint,
    /// Every mask likelihood was zero; weights were reset to uniform.
    pub lost: bool,
    /// Particles were re-spread uniformly after a long loss.
    pub reinitialized: bool,
    /// Effective sample size after the weight update.
    pub ess: f64,
    /// ESS fell below the configured collapse fraction.
    pub degenerate: bool,
    /// Posterior particles and normalized weights, before resampling.
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackResult {
    pub frames: Vec<FrameEstimate>,
}

impl TrackResult {
    pub fn centroids(&self) -> impl Iterator<Item = ImagePoint> + '_ {
        self.frames.iter().map(|f| f.centroid)
    }

    pub fn first_degenerate_frame(&self) -> Option<usize> {
        self.frames.iter().find(|f| f.degenerate).map(|f| f.frame)
    }
}

/// Recursive predict / update / resample loop, fed one frame at a time.
#[derive(Debug, Clone)]
pub struct Tracker {
    k: Intrinsics,
    config: TrackerConfig,
    set: ParticleSet,
    prev_pose: Option<CameraPose>,
    frame: usize,
    lost_streak: usize,
}

impl Tracker {
    pub fn new(k: Intrinsics, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let set = ParticleSet::init_uniform(&k, config.n_particles, config.seed)?;
        Ok(Tracker {
            k,
            config,
            set,
            prev_pose: None,
            frame: 0,
            lost_streak: 0,
        })
    }

    pub fn particle_set(&self) -> &ParticleSet {
        &self.set
    }

    pub fn step(&mut self, mask: &SoftMask, pose: &CameraPose) -> Result<FrameEstimate> {
        if mask.width() != self.k.width || mask.height() != self.k.height {
            return Err(Error::DimensionMismatch(format!(
                "frame {}: mask is {}x{}, image is {}x{}",
                self.frame,
                mask.width(),
                mask.height(),
                self.k.width,
                self.k.height
            )));
        }
        if !pose.is_finite() {
            return Err(Error::NonFinite("camera pose"));
        }
        if let Some(prev) = &self.prev_pose {
            let motion = motion_between_poses(prev, pose, 1.0)?;
            self.set
                .predict(&motion, &self.k, pose.height(), self.config.motion_noise_sigma)?;
        }
        self.prev_pose = Some(*pose);

        let mut lost = false;
        let mut reinitialized = false;
        match self.set.update_weights(mask, self.config.likelihood_exponent) {
            Ok(()) => self.lost_streak = 0,
            Err(Error::TrackLost) => {
                lost = true;
                self.lost_streak += 1;
                if self.lost_streak >= self.config.reinit_after_lost {
                    self.set.respread(&self.k, self.config.n_particles);
                    self.lost_streak = 0;
                    reinitialized = true;
                } else {
                    self.set.set_uniform_weights();
                }
            }
            Err(e) => return Err(e),
        }

        let ess = self.set.effective_sample_size();
        let centroid = self.set.estimate_centroid();
        let particles = self.set.particles.clone();
        let weights = self.set.weights.clone();
        let every = self.config.resample_every;
        if every > 0 && (self.frame + 1) % every == 0 {
            self.set.resample_roulette()?;
        }
        let estimate = FrameEstimate {
            frame: self.frame,
            centroid,
            lost,
            reinitialized,
            ess,
            degenerate: ess < self.config.collapse_ess_fraction * self.set.len() as f64,
            particles,
            weights,
        };
        self.frame += 1;
        Ok(estimate)
    }
}

/// Track a whole sequence of masks with their camera poses.
pub fn track_sequence(
    masks: &[SoftMask],
    poses: &[CameraPose],
    k: &Intrinsics,
    config: &TrackerConfig,
) -> Result<TrackResult> {
    if masks.len() != poses.len() {
        return Err(Error::LengthMismatch {
            what: "masks and poses",
            left: masks.len(),
            right: poses.len(),
        });
    }
    if masks.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    let mut tracker = Tracker::new(*k, *config)?;
    let frames = masks
        .iter()
        .zip(poses)
        .map(|(m, p)| tracker.step(m, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackResult { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k_small() -> Intrinsics {
        Intrinsics::centered(500.0, 200, 100).unwrap()
    }

    fn uniform_set(points: &[(f64, f64)], weights: &[f64]) -> ParticleSet {
        ParticleSet::from_parts(
            points.iter().map(|&(u, v)| ImagePoint::new(u, v)).collect(),
            weights.to_vec(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn uniform_init_is_deterministic_with_equal_weights() {
        let k = Intrinsics::centered(2000.0, 3840, 2160).unwrap();
        let a = ParticleSet::init_uniform(&k, 1000, 42).unwrap();
        let b = ParticleSet::init_uniform(&k, 1000, 42).unwrap();
        assert_eq!(a.particles(), b.particles());
        assert!(a.weights().iter().all(|&w| w == 1.0 / 1000.0));
        assert!(a.particles().iter().all(|p| k.contains(*p)));
    }

    #[test]
    fn uniform_init_mean_near_center() {
        let k = Intrinsics::centered(2000.0, 3840, 2160).unwrap();
        let n = 1000;
        let set = ParticleSet::init_uniform(&k, n, 3).unwrap();
        let mean_u = set.particles().iter().map(|p| p.u).sum::<f64>() / n as f64;
        let mean_v = set.particles().iter().map(|p| p.v).sum::<f64>() / n as f64;
        // CLT: std of the mean of U(0, L) is L / sqrt(12 n)
        let su = 3840.0 / (12.0 * n as f64).sqrt();
        let sv = 2160.0 / (12.0 * n as f64).sqrt();
        assert!((mean_u - 1920.0).abs() < 3.0 * su);
        assert!((mean_v - 1080.0).abs() < 3.0 * sv);
    }

    #[test]
    fn zero_motion_without_noise_is_identity() {
        let k = k_small();
        let mut set = ParticleSet::init_uniform(&k, 50, 1).unwrap();
        let before = set.particles().to_vec();
        set.predict(&CameraMotion::default(), &k, 50.0, 0.0).unwrap();
        assert_eq!(set.particles(), &before[..]);
    }

    #[test]
    fn noise_std_matches_sigma() {
        let k = k_small();
        let n = 100_000;
        let mut set = uniform_set(&vec![(100.0, 50.0); n], &vec![1.0 / n as f64; n]);
        set.predict(&CameraMotion::default(), &k, 50.0, 5.0).unwrap();
        for axis in 0..2 {
            let vals: Vec<f64> = set
                .particles()
                .iter()
                .map(|p| if axis == 0 { p.u - 100.0 } else { p.v - 50.0 })
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var.sqrt() - 5.0).abs() < 0.02 * 5.0, "std {}", var.sqrt());
        }
    }

    #[test]
    fn uniform_translation_shifts_all_particles_equally() {
        let k = k_small();
        let mut set = ParticleSet::init_uniform(&k, 200, 5).unwrap();
        let before = set.particles().to_vec();
        set.predict(&CameraMotion::translation(0.2, 0.0, 0.0), &k, 50.0, 0.0)
            .unwrap();
        for (a, b) in before.iter().zip(set.particles()) {
            assert_abs_diff_eq!(b.u - a.u, -500.0 * 0.2 / 50.0, epsilon = 1e-9);
            assert_abs_diff_eq!(b.v - a.v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_lit_pixel_takes_all_weight() {
        let mut mask = SoftMask::zeros(4, 4);
        mask.set(1, 2, 1.0);
        let mut set = uniform_set(&[(1.5, 2.5), (3.5, 0.5), (0.5, 0.5)], &[1.0 / 3.0; 3]);
        set.update_weights(&mask, 1.0).unwrap();
        assert_eq!(set.weights(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_half_weight_before_normalization() {
        let mut mask = SoftMask::zeros(2, 1);
        mask.set(1, 0, 1.0);
        // second particle sits on the lit pixel's center: weights 0.5 : 1
        let mut set = uniform_set(&[(1.0, 0.5), (1.5, 0.5)], &[0.5, 0.5]);
        set.update_weights(&mask, 1.0).unwrap();
        assert_abs_diff_eq!(set.weights()[0], 0.5 / 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(set.weights()[1], 1.0 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_mask_gives_equal_weights() {
        for c in [0.01f32, 0.3, 1.0] {
            let mask = SoftMask::filled(10, 10, c).unwrap();
            let mut set = uniform_set(&[(1.0, 1.0), (5.0, 2.0), (9.9, 9.9), (0.1, 7.0)], &[0.25; 4]);
            set.update_weights(&mask, 1.0).unwrap();
            for w in set.weights() {
                assert_abs_diff_eq!(*w, 0.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn outside_particles_get_zero_weight_and_all_zero_is_lost() {
        let mask = SoftMask::filled(10, 10, 1.0).unwrap();
        let mut set = uniform_set(&[(-1.0, 1.0), (5.0, 5.0)], &[0.5, 0.5]);
        set.update_weights(&mask, 1.0).unwrap();
        assert_eq!(set.weights(), &[0.0, 1.0]);

        let empty = SoftMask::zeros(10, 10);
        let mut set = uniform_set(&[(1.0, 1.0), (5.0, 5.0)], &[0.5, 0.5]);
        assert!(matches!(set.update_weights(&empty, 1.0), Err(Error::TrackLost)));
        assert_eq!(set.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn roulette_degenerate_weights_copy_one_particle() {
        let pts: Vec<_> = (0..20).map(|i| (i as f64, 0.0)).collect();
        let mut w = vec![0.0; 20];
        w[0] = 1.0;
        let mut set = uniform_set(&pts, &w);
        set.resample_roulette().unwrap();
        assert!(set.particles().iter().all(|p| p.u == 0.0));
        assert!(set.weights().iter().all(|&w| w == 1.0 / 20.0));
    }

    #[test]
    fn roulette_rejects_zero_weights() {
        let mut set = uniform_set(&[(0.0, 0.0), (1.0, 0.0)], &[0.0, 0.0]);
        assert!(set.resample_roulette().is_err());
    }

    #[test]
    fn roulette_binomial_counts() {
        let n = 10_000;
        let pts: Vec<_> = (0..n).map(|i| ((i % 2) as f64, 0.0)).collect();
        // half the particles carry 0.75 total, the other half 0.25
        let w: Vec<_> = (0..n)
            .map(|i| if i % 2 == 0 { 1.5 / n as f64 } else { 0.5 / n as f64 })
            .collect();
        let mut set = uniform_set(&pts, &w);
        set.resample_roulette().unwrap();
        let zeros = set.particles().iter().filter(|p| p.u == 0.0).count() as f64;
        let sd = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((zeros - 7500.0).abs() < 3.0 * sd, "{zeros}");
    }

    #[test]
    fn centroid_examples() {
        let set = uniform_set(&[(0.0, 0.0), (10.0, 0.0)], &[0.5, 0.5]);
        assert_eq!(set.estimate_centroid(), ImagePoint::new(5.0, 0.0));
        let set = uniform_set(&[(0.0, 0.0), (3.0, 0.0)], &[2.0 / 3.0, 1.0 / 3.0]);
        assert_abs_diff_eq!(set.estimate_centroid().u, 1.0, epsilon = 1e-12);
        let set = uniform_set(&[(4.0, 7.0), (3.0, 0.0)], &[1.0, 0.0]);
        assert_eq!(set.estimate_centroid(), ImagePoint::new(4.0, 7.0));
    }

    fn blob(k: &Intrinsics, cu: f64, cv: f64, r: f64) -> SoftMask {
        let mut m = SoftMask::zeros(k.width, k.height);
        for j in 0..k.height {
            for i in 0..k.width {
                let d = (i as f64 + 0.5 - cu).hypot(j as f64 + 0.5 - cv);
                if d <= r {
                    m.set(i, j, 1.0);
                }
            }
        }
        m
    }

    #[test]
    fn static_blob_converges() {
        let k = k_small();
        let mask = blob(&k, 60.0, 40.0, 12.0);
        let pose = CameraPose::nadir(0.0, 0.0, 50.0);
        let cfg = TrackerConfig {
            n_particles: 500,
            motion_noise_sigma: 2.0,
            ..Default::default()
        };
        let mut tracker = Tracker::new(k, cfg).unwrap();
        let mut last = None;
        for _ in 0..10 {
            last = Some(tracker.step(&mask, &pose).unwrap());
        }
        let c = last.unwrap().centroid;
        assert!(c.distance(&ImagePoint::new(60.0, 40.0)) < 3.0, "{c:?}");
    }

    #[test]
    fn uniform_masks_never_lose_track() {
        let k = k_small();
        let mask = SoftMask::filled(k.width, k.height, 0.5).unwrap();
        let poses = vec![CameraPose::nadir(0.0, 0.0, 50.0); 20];
        let masks = vec![mask; 20];
        let res = track_sequence(&masks, &poses, &k, &TrackerConfig::default()).unwrap();
        assert_eq!(res.frames.len(), 20);
        assert!(res.frames.iter().all(|f| !f.lost && f.centroid.is_finite()));
    }

    #[test]
    fn empty_masks_flag_lost_and_reinitialize() {
        let k = k_small();
        let masks = vec![SoftMask::zeros(k.width, k.height); 31];
        let poses = vec![CameraPose::nadir(0.0, 0.0, 50.0); 31];
        let res = track_sequence(&masks, &poses, &k, &TrackerConfig::default()).unwrap();
        assert!(res.frames.iter().all(|f| f.lost));
        let reinit: Vec<_> = res.frames.iter().filter(|f| f.reinitialized).map(|f| f.frame).collect();
        assert_eq!(reinit, vec![29]);
    }

    #[test]
    fn determinism_and_length_checks() {
        let k = k_small();
        let masks = vec![blob(&k, 100.0, 50.0, 10.0); 5];
        let poses: Vec<_> = (0..5).map(|i| CameraPose::nadir(0.1 * i as f64, 0.0, 50.0)).collect();
        let cfg = TrackerConfig::default();
        let a = track_sequence(&masks, &poses, &k, &cfg).unwrap();
        let b = track_sequence(&masks, &poses, &k, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames[0].particles.len(), cfg.n_particles);
        assert!(matches!(
            track_sequence(&masks, &poses[..4], &k, &cfg),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn gaussian_blob(k: &Intrinsics, cu: f64, cv: f64, s: f64) -> SoftMask {
        let mut m = SoftMask::zeros(k.width, k.height);
        for j in 0..k.height {
            for i in 0..k.width {
                let d2 = (i as f64 + 0.5 - cu).powi(2) + (j as f64 + 0.5 - cv).powi(2);
                m.set(i, j, (-d2 / (2.0 * s * s)).exp() as f32);
            }
        }
        m
    }

    #[test]
    fn no_resampling_flags_collapse() {
        let k = k_small();
        let masks = vec![gaussian_blob(&k, 100.0, 50.0, 10.0); 30];
        let poses = vec![CameraPose::nadir(0.0, 0.0, 50.0); 30];
        let cfg = TrackerConfig {
            resample_every: 0,
            motion_noise_sigma: 1.0,
            ..Default::default()
        };
        let res = track_sequence(&masks, &poses, &k, &cfg).unwrap();
        assert!(res.first_degenerate_frame().is_some());
        let resampled = track_sequence(&masks, &poses, &k, &TrackerConfig { motion_noise_sigma: 1.0, ..Default::default() }).unwrap();
        assert!(resampled.frames[5..].iter().all(|f| !f.degenerate));
    }
}
