use std::fs;

use nalgebra::Vector3;
use proptest::prelude::*;
use swarmtrack::fusion::SensorRecord;
use swarmtrack::io::{self, TrajectoryRow};
use swarmtrack::pipeline::RunConfig;
use swarmtrack::synth::ScenarioConfig;
use swarmtrack::{BinaryMask, CameraPose, Error, ImagePoint, SoftMask, WorldPoint};
use tempfile::TempDir;

prop_compose! {
    fn soft_mask()(w in 1u32..20, h in 1u32..20)
        (values in prop::collection::vec(0.0f32..=1.0, (w * h) as usize), w in Just(w), h in Just(h)) -> SoftMask {
        SoftMask::from_values(w, h, values).unwrap()
    }
}

prop_compose! {
    fn binary_mask()(w in 1u32..20, h in 1u32..20)
        (bits in prop::collection::vec(any::<bool>(), (w * h) as usize), w in Just(w), h in Just(h)) -> BinaryMask {
        BinaryMask::from_bits(w, h, bits).unwrap()
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL
}

prop_compose! {
    fn sensor_log()(rows in prop::collection::vec(
        (0.001f64..1.0, prop::array::uniform3(finite()), prop::array::uniform3(finite()), prop::array::uniform3(-180.0f64..180.0)),
        1..30,
    )) -> Vec<SensorRecord> {
        let mut t = 0.0;
        rows.into_iter().enumerate().map(|(i, (dt, g, v, a))| {
            t += dt;
            SensorRecord {
                frame_index: i as u64,
                t,
                gps: Vector3::from(g),
                vel: Vector3::from(v),
                pitch_deg: a[0],
                yaw_deg: a[1],
                roll_deg: a[2],
            }
        }).collect()
    }
}

proptest! {
    #[test]
    fn soft_masks_round_trip_up_to_quantization(m in soft_mask()) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("m.pgm");
        io::write_mask(&path, &m).unwrap();
        let back = io::read_mask(&path).unwrap();
        prop_assert_eq!((back.width(), back.height()), (m.width(), m.height()));
        for (a, b) in m.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6, "{} vs {}", a, b);
        }
        // a second pass is exact
        io::write_mask(&path, &back).unwrap();
        prop_assert_eq!(io::read_mask(&path).unwrap(), back);
    }

    #[test]
    fn binary_masks_round_trip(m in binary_mask()) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("m.pgm");
        io::write_binary_mask(&path, &m).unwrap();
        prop_assert_eq!(io::read_binary_mask(&path).unwrap(), m);
    }

    #[test]
    fn sensor_logs_round_trip(log in sensor_log()) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("s.csv");
        io::write_sensor_log(&path, &log).unwrap();
        prop_assert_eq!(io::read_sensor_log(&path).unwrap(), log);
    }

    #[test]
    fn poses_round_trip(ps in prop::collection::vec((prop::array::uniform3(finite()), prop::array::uniform3(-90.0f64..90.0)), 0..30)) {
        let poses: Vec<_> = ps.into_iter().map(|(p, a)| CameraPose::new(Vector3::from(p), a[0], a[1], a[2])).collect();
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("p.csv");
        io::write_poses(&path, &poses, 30.0).unwrap();
        let back = io::read_poses(&path).unwrap();
        prop_assert_eq!(back.len(), poses.len());
        for (a, b) in poses.iter().zip(&back) {
            prop_assert_eq!(a.position, b.position);
            prop_assert_eq!((a.pitch_deg, a.yaw_deg, a.roll_deg), (b.pitch_deg, b.yaw_deg, b.roll_deg));
        }
    }

    #[test]
    fn trajectories_round_trip(rows in prop::collection::vec((1u64..5, finite(), finite(), prop::option::of((finite(), finite())), any::<bool>()), 0..30)) {
        let mut frame = 0;
        let rows: Vec<_> = rows.into_iter().map(|(df, u, v, w, lost)| {
            frame += df;
            TrajectoryRow { frame, point: ImagePoint::new(u, v), world: w.map(|(x, y)| WorldPoint::new(x, y, 0.0)), lost }
        }).collect();
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("t.csv");
        io::write_trajectory(&path, &rows).unwrap();
        prop_assert_eq!(io::read_trajectory(&path).unwrap(), rows);
    }

    #[test]
    fn garbage_never_panics(data in prop::collection::vec(any::<u8>(), 0..200)) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("x");
        fs::write(&path, &data).unwrap();
        let _ = io::read_mask(&path);
        let _ = io::read_binary_mask(&path);
        let _ = io::read_sensor_log(&path);
        let _ = io::read_poses(&path);
        let _ = io::read_trajectory(&path);
        let _ = RunConfig::from_json_str(&String::from_utf8_lossy(&data));
    }

    #[test]
    fn truncated_files_are_rejected(m in soft_mask(), log in sensor_log(), cut in 0.0f64..1.0) {
        let tmp = TempDir::new().unwrap();
        let pgm = tmp.path().join("m.pgm");
        io::write_mask(&pgm, &m).unwrap();
        let bytes = fs::read(&pgm).unwrap();
        fs::write(&pgm, &bytes[..(cut * bytes.len() as f64) as usize]).unwrap();
        prop_assert!(io::read_mask(&pgm).is_err());

        // cut a CSV mid-row: either the row is malformed or it still parses as a prefix
        let csv = tmp.path().join("s.csv");
        io::write_sensor_log(&csv, &log).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        fs::write(&csv, &text[..(cut * text.len() as f64) as usize]).unwrap();
        if let Ok(back) = io::read_sensor_log(&csv) {
            prop_assert!(back.len() <= log.len());
        }
    }
}

#[test]
fn configs_round_trip_through_json() {
    let tmp = TempDir::new().unwrap();
    for c in [ScenarioConfig::default(), ScenarioConfig::splitting(), ScenarioConfig::degraded()] {
        let path = tmp.path().join("c.json");
        io::write_json(&path, &c).unwrap();
        let back: ScenarioConfig = io::read_json(&path).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&c).unwrap());
    }
    let run = RunConfig::for_scenario(&ScenarioConfig::default());
    let text = serde_json::to_string(&run).unwrap();
    let back = RunConfig::from_json_str(&text).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&run).unwrap());
}

#[test]
fn malformed_inputs_give_located_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("s.csv");
    let header = "frame,t_s,gps_x_m,gps_y_m,gps_z_m,vx_mps,vy_mps,vz_mps,pitch_deg,yaw_deg,roll_deg\n";

    fs::write(&path, header).unwrap();
    assert!(matches!(io::read_sensor_log(&path), Err(Error::EmptyLog)));

    fs::write(&path, format!("{header}0,0,0,0,40,0,0,0,0,0,0\n1,0.1,0,0,40,x,0,0,0,0,0\n")).unwrap();
    let e = io::read_sensor_log(&path).unwrap_err().to_string();
    assert!(e.contains("line 3") && e.contains("vx_mps"), "{e}");

    fs::write(&path, format!("{header}0,0,0,0,40,0,0,0,0,0,0\n1,0,0,0,40,0,0,0,0,0\n")).unwrap();
    let e = io::read_sensor_log(&path).unwrap_err().to_string();
    assert!(e.contains("line 3") && e.contains("expected 11 fields"), "{e}");

    fs::write(&path, "P5\n4 4\n255\n\x00\x00").unwrap();
    let e = io::read_mask(&path).unwrap_err();
    assert!(matches!(e, Error::Format { .. }), "{e}");
}

#[test]
fn bundled_configs_match_code_defaults() {
    use swarmtrack::synth::MarkerSurveyConfig;
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let value = |name: &str| -> serde_json::Value { io::read_json(dir.join(name)).unwrap() };
    assert_eq!(value("scenario.json"), json(&ScenarioConfig::default()));
    assert_eq!(value("scenario_split.json"), json(&ScenarioConfig::splitting()));
    assert_eq!(value("scenario_degraded.json"), json(&ScenarioConfig::degraded()));
    assert_eq!(value("markers.json"), json(&MarkerSurveyConfig::default()));
    let mut run = RunConfig::for_scenario(&ScenarioConfig::default());
    run.shape.alpha_factor = 8.0;
    assert_eq!(value("run.json"), json(&run));
    RunConfig::from_json_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap()
}
