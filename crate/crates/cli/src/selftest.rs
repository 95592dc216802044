//! Fast checks run by `swarmtrack selftest`.

use std::path::Path;

use nalgebra::Vector3;
use swarmtrack::fusion::fuse_log;
use swarmtrack::geometry::{
    backproject_image_to_ground, induced_flow, motion_between_poses, project_world_to_image,
};
use swarmtrack::io::{decode_pgm, encode_mask};
use swarmtrack::metrics::sdr;
use swarmtrack::pipeline::track_frames;
use swarmtrack::shape::alpha_shape;
use swarmtrack::synth::{generate, ScenarioConfig};
use swarmtrack::{CameraPose, ImagePoint, Intrinsics, NoiseConfig, PixelPoint, SoftMask, TrackerConfig};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_all() -> Vec<Check> {
    vec![flow(), pgm(), alpha(), tracking()]
}

fn check(name: &'static str, result: swarmtrack::Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn flow() -> Check {
    let run = || {
        let k = Intrinsics::centered(1000.0, 1920, 1080)?;
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let prev = CameraPose::new(Vector3::new(0.0, 0.0, 50.0), 0.0, 10.0 * i as f64, 0.0);
                let cur = CameraPose::new(
                    Vector3::new(0.3 * i as f64, -0.2 * j as f64, 50.0 - 0.1 * j as f64),
                    0.05 * j as f64,
                    10.0 * i as f64 + 0.1,
                    0.0,
                );
                let p = PixelPoint::new(-600.0 + 300.0 * i as f64, -300.0 + 150.0 * j as f64);
                let ground = backproject_image_to_ground(&p, &prev, &k)?;
                let exact = project_world_to_image(&ground, &cur, &k)?.to_vector() - p.to_vector();
                let m = motion_between_poses(&prev, &cur, 1.0)?;
                let f = induced_flow(&p, &m, &k, cur.height())?;
                worst = worst.max((f - exact).norm() / exact.norm());
            }
        }
        Ok((worst < 0.02, format!("worst relative error {worst:.2e} over 25 cases")))
    };
    check("flow_vs_reprojection", run())
}

fn pgm() -> Check {
    let run = || {
        let mut m = SoftMask::zeros(7, 3);
        m.set(2, 1, 0.5);
        m.set(6, 2, 1.0);
        let (w, h, bytes) = decode_pgm(&encode_mask(&m), Path::new("<memory>"))?;
        let ok = (w, h) == (7, 3) && bytes[7 + 2] == 128 && bytes[2 * 7 + 6] == 255 && bytes[0] == 0;
        Ok((ok, "0.5 -> 128, 1.0 -> 255".to_string()))
    };
    check("pgm_round_trip", run())
}

fn alpha() -> Check {
    let run = || {
        let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(u, v)| ImagePoint::new(u, v));
        let area = alpha_shape(&square, 10.0)?.area();
        Ok(((area - 1.0).abs() < 1e-12, format!("unit square area {area}")))
    };
    check("alpha_shape_square", run())
}

fn tracking() -> Check {
    let run = || {
        let mut c = ScenarioConfig::default();
        c.frames = 60;
        let s = generate(&c)?;
        let poses = fuse_log(&s.sensor_log, &NoiseConfig::default(), c.fps)?;
        let sum = track_frames(s.masks(), &poses, &s.intrinsics, &TrackerConfig::default(), None, |_| Ok(()))?;
        let rate = sdr(&sum.trajectory(), &s.gt_track2d, 30.0)?;
        Ok((rate >= 95.0, format!("SDR@30 {rate:.1}% over {} frames", s.len())))
    };
    check("short_synthetic_track", run())
}
