//! Sampling layout and the spatial extent of a participant's risk.

use riskocc::geometry::{dist_point_point, Centerline, Point2};
use riskocc::occupancy::{compute_map, layout_samples, SamplePoint};
use riskocc::risk_model::RiskConfig;
use riskocc::scenario::{DynamicObject, Frame, ParticipantCategory};

const RES: f64 = 1.9;

fn road(len: f64) -> Centerline {
    Centerline::new(vec![Point2::new(0.0, 0.0), Point2::new(len, 0.0)]).unwrap()
}

fn at(samples: &[SamplePoint], row: i32, col: i32) -> Option<&SamplePoint> {
    samples.iter().find(|s| s.row == row && s.col == col)
}

#[test]
fn straight_19m_road_counts_and_spacing() {
    for w in [1.9, 3.0, 5.7, 7.6, 10.0] {
        let samples = layout_samples(&road(19.0), w, RES).unwrap();
        let n = (w / RES + 1e-9).floor() as usize;
        assert_eq!(samples.len(), 11 * (2 * n + 1), "half width {w}");
        for s in &samples {
            for (dr, dc) in [(1, 0), (0, 1)] {
                if let Some(o) = at(&samples, s.row + dr, s.col + dc) {
                    let gap = dist_point_point(s.position, o.position);
                    assert!((gap - RES).abs() < 1e-9, "gap {gap}");
                }
            }
        }
    }
}

#[test]
fn bent_road_keeps_row_spacing() {
    let cl = Centerline::new(vec![Point2::new(0.0, 0.0), Point2::new(19.0, 0.0), Point2::new(19.0 + 19.0 * 0.6, 19.0 * 0.8)])
        .unwrap();
    let samples = layout_samples(&cl, 3.8, RES).unwrap();
    for s in samples.iter().filter(|s| s.col == 0) {
        if let Some(o) = at(&samples, s.row + 1, 0) {
            // chords are shorter than arc length only across the bend
            let gap = dist_point_point(s.position, o.position);
            assert!(gap <= RES + 1e-9 && gap > RES * 0.9);
        }
    }
}

fn vehicle(speed: f64, heading: f64) -> Frame {
    Frame {
        timestamp: 0.0,
        dynamics: vec![DynamicObject {
            id: "v".into(),
            category: ParticipantCategory::SmallVehicle,
            position: Point2::new(20.0, 0.0),
            speed,
            heading,
        }],
    }
}

/// Extent of nonzero-risk samples along and across `heading`.
fn footprint(frame: &Frame, heading: f64) -> (f64, f64, usize) {
    let samples = layout_samples(&road(80.0), 20.0, RES).unwrap();
    let grid = compute_map(&samples, RES, frame, &[], &RiskConfig::default());
    let (u, n) = (Point2::new(heading.cos(), heading.sin()), Point2::new(-heading.sin(), heading.cos()));
    let origin = frame.dynamics[0].position;
    let hot: Vec<Point2> = grid
        .samples
        .iter()
        .zip(&grid.risks)
        .filter(|(_, &r)| r > 0.0)
        .map(|(s, _)| s.position - origin)
        .collect();
    let span = |axis: Point2| {
        let v: Vec<f64> = hot.iter().map(|p| p.dot(axis)).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    (span(u), span(n), hot.len())
}

#[test]
fn moving_vehicle_footprint_is_34m_long() {
    // 10 m/s * 3 s + 2 m radius at each end
    let (along, across, _) = footprint(&vehicle(10.0, 0.0), 0.0);
    assert!((along - 34.0).abs() <= RES, "{along}");
    assert!((across - 4.0).abs() <= RES, "{across}");
    // off the lattice axes the rounded capsule ends can miss a cell at each end
    for heading in [0.3, -0.5, -0.2] {
        let (along, across, _) = footprint(&vehicle(10.0, heading), heading);
        assert!((along - 34.0).abs() <= 2.0 * RES, "heading {heading}: {along}");
        assert!((across - 4.0).abs() <= 2.0 * RES, "heading {heading}: {across}");
    }
}

#[test]
fn stationary_vehicle_footprint_is_a_disc() {
    let frame = vehicle(0.0, 0.0);
    let samples = layout_samples(&road(80.0), 20.0, RES).unwrap();
    let grid = compute_map(&samples, RES, &frame, &[], &RiskConfig::default());
    let origin = frame.dynamics[0].position;
    let mut max_hot: f64 = 0.0;
    let mut min_cold = f64::MAX;
    for (s, &r) in grid.samples.iter().zip(&grid.risks) {
        let d = dist_point_point(s.position, origin);
        if r > 0.0 {
            max_hot = max_hot.max(d);
        } else {
            min_cold = min_cold.min(d);
        }
    }
    assert!(max_hot <= 2.0 + 1e-12);
    assert!(max_hot >= 2.0 - RES);
    assert!(min_cold > 2.0 && min_cold <= 2.0 + RES);
}
