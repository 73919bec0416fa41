//! Small 3-vector type and the distance metrics used throughout the planner.

use serde::{Deserialize, Serialize};

/// A point or vector in meters. `z` points up; ground nodes sit at `z = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(&self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

/// Horizontal (x, y) distance, ignoring altitude. Routing tables use this;
/// climb and descent costs are accounted for by the energy model instead.
pub fn ground_distance(a: Vec3, b: Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_identity() {
        assert_eq!(distance(Vec3::ZERO, Vec3::ZERO), 0.0);
    }

    #[test]
    fn distance_3_4_5() {
        assert_eq!(distance(Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn distance_long_leg() {
        // Direct evaluation of the Euclidean norm: sqrt(300^2 + 400^2) = 500.
        let a = Vec3::new(100.0, 200.0, 0.0);
        let b = Vec3::new(400.0, 600.0, 0.0);
        let expected = (300.0f64 * 300.0 + 400.0 * 400.0).sqrt();
        assert_eq!(distance(a, b), expected);
        assert_eq!(distance(a, b), 500.0);
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_nonnegative(
            ax in -1e4..1e4f64, ay in -1e4..1e4f64, az in -1e4..1e4f64,
            bx in -1e4..1e4f64, by in -1e4..1e4f64, bz in -1e4..1e4f64,
        ) {
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, b) >= 0.0);
            prop_assert_eq!(distance(a, a), 0.0);
        }
    }
}
