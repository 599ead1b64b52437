#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use riskocc::geometry::{FrenetCoord, Point2};
use riskocc::occupancy::SamplePoint;
use riskocc::scenario::{
    default_weights, DynamicObject, Frame, ParticipantCategory, StaticFactor, StaticGeometry, StaticKind,
};

pub const CATEGORIES: [ParticipantCategory; 4] = [
    ParticipantCategory::Pedestrian,
    ParticipantCategory::NonMotorized,
    ParticipantCategory::LargeVehicle,
    ParticipantCategory::SmallVehicle,
];

pub fn random_point(rng: &mut ChaCha8Rng, extent: f64) -> Point2 {
    Point2::new(rng.gen_range(-extent..extent), rng.gen_range(-extent..extent))
}

pub fn random_dynamic(rng: &mut ChaCha8Rng, id: usize, extent: f64) -> DynamicObject {
    // a quarter of participants stand still
    let speed = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..15.0) };
    DynamicObject {
        id: format!("d{id}"),
        category: CATEGORIES[rng.gen_range(0..4)],
        position: random_point(rng, extent),
        speed,
        heading: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

pub fn random_static(rng: &mut ChaCha8Rng, extent: f64) -> StaticFactor {
    let kind = StaticKind::ALL[rng.gen_range(0..StaticKind::ALL.len())];
    let geometry = match rng.gen_range(0..3) {
        0 => StaticGeometry::Point(random_point(rng, extent)),
        1 => StaticGeometry::MultiPoint((0..rng.gen_range(1..5)).map(|_| random_point(rng, extent)).collect()),
        _ => {
            let pts: Vec<Point2> = (0..rng.gen_range(2..5)).map(|_| random_point(rng, extent)).collect();
            StaticGeometry::polyline(&pts)
        }
    };
    let d = default_weights().static_default(kind);
    StaticFactor {
        kind,
        geometry,
        risk_value: d.risk_value,
        weight: d.weight,
    }
}

pub fn random_frame(rng: &mut ChaCha8Rng, max_dynamics: usize, extent: f64) -> Frame {
    let n = rng.gen_range(0..=max_dynamics);
    Frame {
        timestamp: rng.gen_range(0.0..100.0),
        dynamics: (0..n).map(|i| random_dynamic(rng, i, extent)).collect(),
    }
}

pub fn random_samples(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<SamplePoint> {
    (0..n)
        .map(|i| {
            let p = random_point(rng, extent);
            SamplePoint {
                row: i as i32,
                col: 0,
                position: p,
                frenet: FrenetCoord { s: p.x, d: p.y },
            }
        })
        .collect()
}
