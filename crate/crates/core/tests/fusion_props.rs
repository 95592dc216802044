use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmtrack::fusion::{dead_reckoning_poses, fuse_log, gps_only_poses, kalman_predict, kalman_update};
use swarmtrack::synth::{
    drone_state, generate, sensor_log, DroneConfig, Gimbal, Path, PathConfig, ScenarioConfig, SensorConfig, YawProfile,
};
use swarmtrack::{CameraPose, FusionState, NoiseConfig, SensorRecord};

fn record(t: f64, gps: (f64, f64, f64), vel: (f64, f64, f64)) -> SensorRecord {
    SensorRecord {
        frame_index: 0,
        t,
        gps: Vector3::new(gps.0, gps.1, gps.2),
        vel: Vector3::new(vel.0, vel.1, vel.2),
        pitch_deg: 0.0,
        yaw_deg: 0.0,
        roll_deg: 0.0,
    }
}

fn coord() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1e3..1e3, -1e3..1e3, 1.0..500.0)
}

fn vel() -> impl Strategy<Value = (f64, f64, f64)> {
    (-20.0..20.0, -20.0..20.0, -5.0..5.0)
}

prop_compose! {
    fn noise()(a in 0.01..10.0, g in 0.01..10.0, v in 0.01..5.0) -> NoiseConfig {
        NoiseConfig { process_accel_sigma: a, gps_sigma: g, imu_vel_sigma: v }
    }
}

proptest! {
    #[test]
    fn covariance_stays_spd_and_updates_shrink_it(
        noise in noise(),
        steps in prop::collection::vec((1e-3..5.0, coord(), vel()), 1..40),
        first in (coord(), vel()),
    ) {
        let mut state = FusionState::from_record(&record(0.0, first.0, first.1), &noise);
        let mut t = 0.0;
        for (dt, gps, v) in steps {
            t += dt;
            let prior = kalman_predict(&state, dt, &noise).unwrap();
            prop_assert!(prior.check().is_ok());
            let post = kalman_update(&prior, &record(t, gps, v), &noise).unwrap();
            prop_assert!(post.check().is_ok());
            prop_assert!(post.covariance.trace() <= prior.covariance.trace() * (1.0 + 1e-12));
            state = post;
        }
    }
}

fn rmse(poses: &[CameraPose], truth: &[CameraPose]) -> f64 {
    let n = poses.len().min(truth.len());
    let sq: f64 = (0..n).map(|i| (poses[i].position - truth[i].position).norm_squared()).sum();
    (sq / n as f64).sqrt()
}

#[test]
fn fused_beats_raw_gps_in_most_trials() {
    let mut wins = 0;
    for seed in 0..100 {
        let c = ScenarioConfig {
            frames: 300,
            seed,
            ..ScenarioConfig::default()
        };
        let s = generate(&c).unwrap();
        let fused = fuse_log(&s.sensor_log, &NoiseConfig::default(), c.fps).unwrap();
        let gps = gps_only_poses(&s.sensor_log, c.fps).unwrap();
        wins += (rmse(&fused, &s.gt_poses) <= rmse(&gps, &s.gt_poses)) as usize;
    }
    assert!(wins >= 95, "fused better in {wins}/100");
}

#[test]
fn dead_reckoning_drifts_while_fusion_stays_bounded() {
    // about eight minutes back and forth along a 200 m line at 10 Hz
    let drone = DroneConfig {
        path: PathConfig {
            waypoints: [0.0, 200.0, 0.0, 200.0, 0.0, 200.0, 0.0].iter().map(|&x| [x, 0.0, 50.0]).collect(),
            speed: 2.5,
            accel: 1.0,
            start_s: 0.0,
        },
        yaw: YawProfile::default(),
        gimbal: Gimbal::Nadir,
    };
    let path = Path::new(&drone.path);
    let rate = 10.0;
    let duration = path.end_time();
    let (mut dr_early, mut dr_late, mut fu_early, mut fu_late) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..20 {
        let log = sensor_log(&drone, &path, &SensorConfig::default(), rate, duration, &mut ChaCha8Rng::seed_from_u64(seed));
        let truth: Vec<CameraPose> = log.iter().map(|r| drone_state(&drone, &path, r.t).0).collect();
        let dr = dead_reckoning_poses(&log, rate).unwrap();
        let fu = fuse_log(&log, &NoiseConfig::default(), rate).unwrap();
        let n = dr.len().min(truth.len());
        let err = |p: &[CameraPose], range: std::ops::Range<usize>| {
            let len = range.len() as f64;
            range.map(|i| (p[i].position - truth[i].position).norm()).sum::<f64>() / len
        };
        dr_early += err(&dr, 0..n / 10);
        dr_late += err(&dr, n - n / 10..n);
        fu_early += err(&fu, 0..n / 10);
        fu_late += err(&fu, n - n / 10..n);
    }
    assert!(duration > 400.0, "{duration}");
    assert!(dr_late > 2.0 * dr_early, "dead reckoning {dr_early} -> {dr_late}");
    assert!(dr_late > 3.0 * fu_late, "dead reckoning {dr_late} vs fused {fu_late}");
    assert!(fu_late < 1.5 * fu_early, "fused {fu_early} -> {fu_late}");
}
