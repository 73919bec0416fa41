//! Time-indexed cube grid of wind vectors.
//!
//! The field spans `dims` cubes of `cube_size` meters per axis from `origin`.
//! A query inside one cube at one time index returns a single constant
//! vector: the average of that cube's eight vertex vectors. Queries outside
//! the grid clamp to the nearest boundary cube and report the clamp.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error)]
pub enum WindError {
    #[error("wind field needs at least one frame")]
    NoFrames,
    #[error("frame {frame} holds {got} vertex vectors, expected {expected}")]
    BadFrame { frame: usize, got: usize, expected: usize },
    #[error("wind field dimensions and cube size must be positive")]
    BadGeometry,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindField {
    origin: Vec3,
    cube_size: f64,
    dims: (usize, usize, usize),
    time_step_s: f64,
    /// One entry per time index; each holds a vector per grid vertex in
    /// row-major order (x fastest, then y, then z).
    frames: Vec<Vec<Vec3>>,
}

impl WindField {
    pub fn new(
        origin: Vec3,
        cube_size: f64,
        dims: (usize, usize, usize),
        time_step_s: f64,
        frames: Vec<Vec<Vec3>>,
    ) -> Result<Self, WindError> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 || cube_size <= 0.0 || time_step_s <= 0.0 {
            return Err(WindError::BadGeometry);
        }
        if frames.is_empty() {
            return Err(WindError::NoFrames);
        }
        let expected = (dims.0 + 1) * (dims.1 + 1) * (dims.2 + 1);
        for (i, f) in frames.iter().enumerate() {
            if f.len() != expected {
                return Err(WindError::BadFrame { frame: i, got: f.len(), expected });
            }
        }
        Ok(WindField { origin, cube_size, dims, time_step_s, frames })
    }

    /// A single-cube field holding `v` everywhere, wide enough that any
    /// practical query lands inside it.
    pub fn uniform(v: Vec3) -> Self {
        let extent = 4.0e7;
        WindField {
            origin: Vec3::new(-extent / 2.0, -extent / 2.0, -extent / 2.0),
            cube_size: extent,
            dims: (1, 1, 1),
            time_step_s: 10.0,
            frames: vec![vec![v; 8]],
        }
    }

    /// Zero wind everywhere.
    pub fn still() -> Self {
        WindField::uniform(Vec3::ZERO)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn cube_size(&self) -> f64 {
        self.cube_size
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn time_step_s(&self) -> f64 {
        self.time_step_s
    }

    pub fn frames(&self) -> &[Vec<Vec3>] {
        &self.frames
    }

    pub fn vertex_count(&self) -> usize {
        (self.dims.0 + 1) * (self.dims.1 + 1) * (self.dims.2 + 1)
    }

    fn vertex(&self, frame: &[Vec3], ix: usize, iy: usize, iz: usize) -> Vec3 {
        let (nx, ny, _) = self.dims;
        frame[(iz * (ny + 1) + iy) * (nx + 1) + ix]
    }

    /// Wind vector at a position and time, plus whether the position fell
    /// outside the grid and was clamped to the nearest boundary cube. The
    /// time index is `floor(t / time_step)`, clamped to the last frame.
    pub fn sample(&self, position: Vec3, time_s: f64) -> (Vec3, bool) {
        let t_idx = if time_s <= 0.0 {
            0
        } else {
            ((time_s / self.time_step_s).floor() as usize).min(self.frames.len() - 1)
        };
        let frame = &self.frames[t_idx];

        let mut clamped = false;
        let mut cube = [0usize; 3];
        let rel = position - self.origin;
        for (axis, (r, n)) in [
            (rel.x, self.dims.0),
            (rel.y, self.dims.1),
            (rel.z, self.dims.2),
        ]
        .into_iter()
        .enumerate()
        {
            let c = (r / self.cube_size).floor();
            if c < 0.0 {
                clamped = true;
                cube[axis] = 0;
            } else if c as usize >= n {
                if r > n as f64 * self.cube_size {
                    clamped = true;
                }
                cube[axis] = n - 1;
            } else {
                cube[axis] = c as usize;
            }
        }

        let (cx, cy, cz) = (cube[0], cube[1], cube[2]);
        let mut sum = Vec3::ZERO;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    sum = sum + self.vertex(frame, cx + dx, cy + dy, cz + dz);
                }
            }
        }
        (sum.scale(1.0 / 8.0), clamped)
    }

    /// Wind vector only; see [`WindField::sample`] for the clamp flag.
    pub fn wind_at(&self, position: Vec3, time_s: f64) -> Vec3 {
        self.sample(position, time_s).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_field_everywhere() {
        let f = WindField::uniform(Vec3::new(5.0, 0.0, 0.0));
        for (p, t) in [
            (Vec3::ZERO, 0.0),
            (Vec3::new(4000.0, 4000.0, 30.0), 12345.0),
            (Vec3::new(-900.0, 2.0, 0.0), 1.0),
        ] {
            let (w, clamped) = f.sample(p, t);
            assert_eq!(w, Vec3::new(5.0, 0.0, 0.0));
            assert!(!clamped);
        }
    }

    #[test]
    fn cube_average_of_vertices() {
        // One cube: 4 vertices at (0,0,0) and 4 at (8,0,0) average to (4,0,0).
        let a = Vec3::ZERO;
        let b = Vec3::new(8.0, 0.0, 0.0);
        let vertices = vec![a, b, a, b, a, b, a, b];
        let f = WindField::new(Vec3::ZERO, 10.0, (1, 1, 1), 10.0, vec![vertices]).unwrap();
        assert_eq!(f.wind_at(Vec3::new(5.0, 5.0, 5.0), 0.0), Vec3::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn time_floor_indexing() {
        let f = WindField::new(
            Vec3::ZERO,
            10.0,
            (1, 1, 1),
            10.0,
            vec![vec![Vec3::new(1.0, 0.0, 0.0); 8], vec![Vec3::new(2.0, 0.0, 0.0); 8]],
        )
        .unwrap();
        let p = Vec3::new(5.0, 5.0, 5.0);
        // Just below one time step stays in frame 0.
        assert_eq!(f.wind_at(p, 9.999), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(f.wind_at(p, 10.0), Vec3::new(2.0, 0.0, 0.0));
        // Beyond the last frame clamps to it.
        assert_eq!(f.wind_at(p, 1e6), Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn piecewise_constant_within_cube_and_frame() {
        let mut vertices = Vec::new();
        for i in 0..27 {
            vertices.push(Vec3::new(i as f64, -(i as f64), 0.5 * i as f64));
        }
        let f = WindField::new(Vec3::ZERO, 25.0, (2, 2, 2), 10.0, vec![vertices]).unwrap();
        let w1 = f.wind_at(Vec3::new(26.0, 1.0, 1.0), 3.0);
        let w2 = f.wind_at(Vec3::new(49.0, 24.0, 24.0), 7.0);
        assert_eq!(w1, w2);
    }

    #[test]
    fn out_of_bounds_clamps_and_flags() {
        let f = WindField::new(Vec3::ZERO, 10.0, (1, 1, 1), 10.0, vec![vec![Vec3::new(3.0, 0.0, 0.0); 8]])
            .unwrap();
        let (w, clamped) = f.sample(Vec3::new(-5.0, 5.0, 5.0), 0.0);
        assert!(clamped);
        assert_eq!(w, Vec3::new(3.0, 0.0, 0.0));
        let (_, clamped_inside) = f.sample(Vec3::new(5.0, 5.0, 5.0), 0.0);
        assert!(!clamped_inside);
    }
}
