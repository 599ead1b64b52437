use std::path::PathBuf;

use riskocc::eval::{avg_decel, detection_distance, load_braking_scenario, max_safe_speed, run_study, Scheme};
use riskocc::geometry::{Centerline, Point2};
use riskocc::planner::PathStatus;
use riskocc::scenario::{DynamicObject, ParticipantCategory};
use riskocc::AppConfig;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn bundled_scene_reproduces_scheme_ordering() {
    let cfg = AppConfig::default();
    let sc = load_braking_scenario(fixture("quant_leftturn.jsonl"), &cfg).unwrap();
    let report = run_study(&sc, &cfg).unwrap();
    println!("{}", report.summary());
    let [s1, s2, s3] = report.results;
    assert_eq!(report.planned.status, PathStatus::Reached);
    assert!(s1.detection_distance.is_finite());
    assert!(s3.max_safe_speed >= s2.max_safe_speed);
    assert!(s2.max_safe_speed > s1.max_safe_speed);
    assert!(s3.avg_decel < s2.avg_decel);
    // the planned corridor leaves the blocked ego lane
    assert!(report.planned.raw.last().unwrap().col > 0);
}

#[test]
fn csv_report_shape() {
    let cfg = AppConfig::default();
    let sc = load_braking_scenario(fixture("quant_leftturn.jsonl"), &cfg).unwrap();
    let csv = run_study(&sc, &cfg).unwrap().to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scheme,detection_distance,max_safe_speed,avg_decel");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("occupancy_plus_plan,"));
}

// Analytic crossing: a pedestrian walking straight at a straight lane. The
// baseline conflict happens when the walker is one half-width from the lane
// axis; the footprint reaches the corridor when the far end of the 3 s
// segment is half-width + radius away.
fn analytic(y0: f64, speed: f64, x_cross: f64, v0: f64, hw: f64, radius: f64, horizon: f64) -> (f64, f64) {
    let t_b = (y0 - hw) / speed;
    let t_o = ((y0 - speed * horizon - hw - radius) / speed).max(0.0);
    (x_cross - v0 * t_b, x_cross - v0 * t_o)
}

#[test]
fn crossing_matches_analytic_footprint() {
    let cfg = AppConfig::default();
    let lane = Centerline::new(vec![Point2::new(0.0, 0.0), Point2::new(300.0, 0.0)]).unwrap();
    for (y0, speed, x) in [(20.0, 1.5, 120.0), (14.0, 1.0, 110.0), (30.0, 2.5, 150.0)] {
        let h = DynamicObject {
            id: "p".into(),
            category: ParticipantCategory::Pedestrian,
            position: Point2::new(x, y0),
            speed,
            heading: -std::f64::consts::FRAC_PI_2,
        };
        let (b_exp, o_exp) = analytic(y0, speed, x, 8.0, 1.9, 2.0, 3.0);
        let b = detection_distance(&lane, 0.0, &h, Scheme::Baseline, &cfg.braking, &cfg);
        let o = detection_distance(&lane, 0.0, &h, Scheme::Occupancy, &cfg.braking, &cfg);
        // one simulation step of ICV travel
        let tol = 8.0 * 0.01 + 1e-9;
        assert!((b - b_exp).abs() <= tol, "baseline {b} vs {b_exp}");
        assert!((o - o_exp).abs() <= tol, "occupancy {o} vs {o_exp}");
        // footprint gain is the 3 s walk plus the radius, in ICV travel time
        assert!(((o - b) - 8.0 * (speed * 3.0 + 2.0) / speed).abs() <= 2.0 * tol);
    }
}

#[test]
fn kinematics_monotone_in_distance() {
    let mut prev = (max_safe_speed(0.0, 4.0), f64::INFINITY);
    for i in 1..200 {
        let d = i as f64 * 0.5;
        let v = max_safe_speed(d, 4.0);
        let a = avg_decel(8.0, d).unwrap();
        assert!(v > prev.0 && a < prev.1);
        prev = (v, a);
    }
}
