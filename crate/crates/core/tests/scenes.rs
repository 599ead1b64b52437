//! The bundled intersection scene, end to end through the library.

use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use riskocc::edge_service::{serve_lines, EdgeService, PlanRequest};
use riskocc::occupancy::{compute_map, samples_for_map, PgmScale};
use riskocc::planner::{collision_free, follows_rule, plan, PathStatus, PlannerConfig, Strategy};
use riskocc::scenario::{frames_to_jsonl, load_frames, load_map_prior, parse_frames, Maneuver};
use riskocc::{AppConfig, Point2};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn intersection_loads_with_expected_layout() {
    let map = load_map_prior(fixture("intersection_dair.json")).unwrap();
    let samples = samples_for_map(&map).unwrap();
    // 76 m / 1.9 m + 1 rows, 7.6 m / 1.9 m columns each side of the axis
    assert_eq!(samples.len(), 41 * 9);
    assert_eq!(map.maneuver_sets.len(), 3);
    assert_eq!(map.statics.len(), 4);
    let frames = load_frames(fixture("intersection_frames.jsonl")).unwrap();
    assert_eq!(frames.len(), 4);
    assert!(frames.iter().all(|f| map.frame_diagnostics(f).is_empty()));
    // round trip through the writer
    assert_eq!(parse_frames(&frames_to_jsonl(&frames), "rt").unwrap(), frames);
}

#[test]
fn every_maneuver_plans_a_safe_path_on_every_frame() {
    let map = load_map_prior(fixture("intersection_dair.json")).unwrap();
    let frames = load_frames(fixture("intersection_frames.jsonl")).unwrap();
    let samples = samples_for_map(&map).unwrap();
    let cfg = AppConfig::default();
    for frame in &frames {
        let icv = frame.dynamics.iter().find(|d| d.id == "icv").unwrap().position;
        let scene = frame.without("icv");
        let grid = compute_map(&samples, 1.9, &scene, &map.statics, &cfg.risk);
        assert!(grid.to_pgm(PgmScale::MinMax).is_ok());
        for m in Maneuver::ALL {
            let set = &map.maneuver_sets[&m];
            let free = collision_free(set, &grid, cfg.planner.risk_threshold).unwrap();
            for strategy in [Strategy::Local, Strategy::Global] {
                let pc = PlannerConfig { strategy, ..cfg.planner };
                let path = plan(&free, icv, map.destination(m).unwrap(), m, &pc).unwrap();
                assert!(path.raw.iter().all(|n| n.risk < 0.4));
                assert!(follows_rule(&path.raw, m));
                assert!(!path.smoothed.is_empty());
                // by t = 3 the crossing pedestrian covers every left-side lane
                let walled = m == Maneuver::Left && frame.timestamp == 3.0;
                if strategy == Strategy::Global {
                    assert_eq!(path.status == PathStatus::Reached, !walled, "t={} {m}", frame.timestamp);
                }
            }
        }
    }
}

#[test]
fn readers_see_whole_snapshots_while_frames_arrive() {
    let map = load_map_prior(fixture("intersection_dair.json")).unwrap();
    let frames = load_frames(fixture("intersection_frames.jsonl")).unwrap();
    let cfg = AppConfig::default();
    let svc = Arc::new(EdgeService::new(map.clone(), cfg).unwrap());
    svc.ingest_frame("rsu-1", frames[0].clone()).unwrap();

    // risk per timestamp, for checking that a response's window matches its grid_t
    let samples = samples_for_map(&map).unwrap();
    let expected: Vec<(f64, Vec<f64>)> = frames
        .iter()
        .map(|f| (f.timestamp, compute_map(&samples, 1.9, f, &map.statics, &cfg.risk).risks))
        .collect();

    let readers: Vec<_> = (0..4)
        .map(|k| {
            let svc = svc.clone();
            thread::spawn(move || {
                let mut seen = Vec::new();
                for _ in 0..40 {
                    let req = PlanRequest {
                        icv_id: format!("icv-{k}"),
                        position: Point2::new(1.0, 1.9),
                        maneuver: Maneuver::Straight,
                    };
                    let resp = svc.handle_plan_request(&req).unwrap();
                    seen.push((resp.grid_timestamp, resp.risk_window));
                }
                seen
            })
        })
        .collect();
    for f in &frames[1..] {
        svc.ingest_frame("rsu-1", f.clone()).unwrap();
    }
    for r in readers {
        for (t, window) in r.join().unwrap() {
            let (_, risks) = expected.iter().find(|(et, _)| *et == t).expect("known timestamp");
            for w in window {
                let i = samples.iter().position(|s| s.row == w.row && s.col == w.col).unwrap();
                assert_eq!(w.risk, risks[i]);
            }
        }
    }
    assert_eq!(svc.snapshot().unwrap().frame.timestamp, 3.0);
}

#[test]
fn pipe_session_is_reproducible() {
    let map = load_map_prior(fixture("intersection_dair.json")).unwrap();
    let frames = load_frames(fixture("intersection_frames.jsonl")).unwrap();
    let mut input = String::new();
    for f in &frames {
        let line = frames_to_jsonl(std::slice::from_ref(f));
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        input.push_str(&serde_json::json!({"type": "frame", "t": v["t"], "dynamics": v["dynamics"]}).to_string());
        input.push('\n');
        input.push_str(r#"{"type":"plan_request","icv_id":"icv","x":4.0,"y":1.9,"maneuver":"left"}"#);
        input.push('\n');
    }
    let run = || {
        let svc = EdgeService::new(map.clone(), AppConfig::default()).unwrap();
        let mut out = Vec::new();
        serve_lines(&svc, input.as_bytes(), &mut out, None).unwrap();
        out
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}
