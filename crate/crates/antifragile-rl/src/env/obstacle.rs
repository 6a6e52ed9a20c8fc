//! Convex-polyhedron obstacles and their scripted motion.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Position = Vector3<f64>;

/// Motion script for one obstacle. Velocities are world units per second.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Stationary obstacle.
    Fixed,
    /// Planar orbit built from per-step increments `amplitude*(cos t, sin t)`,
    /// integrated with the environment time step. The resulting path is a
    /// bounded loop of radius `amplitude` around the starting center.
    CircularIncrement { amplitude: f64 },
    /// Piecewise-linear patrol through `points` at constant `speed`,
    /// cycling back to the first point after the last.
    Waypoints { points: Vec<[f64; 3]>, speed: f64 },
}

/// Static description of a convex-polyhedron obstacle:
/// `gamma(p) = sum_i ((p_i - c_i)/axis_i)^(2*exp_i)` is 1 on the surface,
/// below 1 inside and above 1 outside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: Position,
    pub semi_axes: Vector3<f64>,
    pub exponents: Vector3<f64>,
    pub trajectory: Trajectory,
}

impl ObstacleSpec {
    pub fn sphere(center: Position, radius: f64, trajectory: Trajectory) -> Self {
        ObstacleSpec {
            center,
            semi_axes: Vector3::new(radius, radius, radius),
            exponents: Vector3::new(1.0, 1.0, 1.0),
            trajectory,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.semi_axes.iter().all(|a| *a > 0.0) && self.exponents.iter().all(|e| *e > 0.0)) {
            return Err(Error::Config(format!(
                "obstacle semi-axes and exponents must be positive: axes {:?}, exponents {:?}",
                self.semi_axes, self.exponents
            )));
        }
        if let Trajectory::Waypoints { points, speed } = &self.trajectory {
            if points.is_empty() {
                return Err(Error::Config("waypoint trajectory needs at least one point".into()));
            }
            if *speed < 0.0 {
                return Err(Error::Config("waypoint speed must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Runtime state of one obstacle within an episode.
#[derive(Debug, Clone)]
pub struct ObstacleState {
    pub center: Position,
    time: f64,
    next_waypoint: usize,
}

impl ObstacleState {
    pub fn new(spec: &ObstacleSpec) -> Self {
        ObstacleState {
            center: spec.center,
            time: 0.0,
            next_waypoint: 0,
        }
    }

    /// Velocity the obstacle will hold over the upcoming interval `dt`.
    pub fn upcoming_velocity(&self, spec: &ObstacleSpec, dt: f64) -> Vector3<f64> {
        match &spec.trajectory {
            Trajectory::Fixed => Vector3::zeros(),
            Trajectory::CircularIncrement { amplitude } => {
                let t = self.time + dt;
                Vector3::new(amplitude * t.cos(), amplitude * t.sin(), 0.0)
            }
            Trajectory::Waypoints { points, speed } => {
                let target = Position::from(points[self.next_waypoint]);
                let to_target = target - self.center;
                let dist = to_target.norm();
                if dist <= *speed * dt || dist == 0.0 {
                    // Arrive this step; velocity covers exactly the remainder.
                    if dt > 0.0 {
                        to_target / dt
                    } else {
                        Vector3::zeros()
                    }
                } else {
                    to_target * (*speed / dist)
                }
            }
        }
    }

    /// Advance the obstacle by `dt` using the same velocity reported by
    /// [`upcoming_velocity`], so perception and motion agree within a step.
    pub fn advance(&mut self, spec: &ObstacleSpec, dt: f64) {
        let v = self.upcoming_velocity(spec, dt);
        self.center += v * dt;
        self.time += dt;
        if let Trajectory::Waypoints { points, .. } = &spec.trajectory {
            let target = Position::from(points[self.next_waypoint]);
            if (target - self.center).norm() < 1e-9 {
                self.center = target;
                self.next_waypoint = (self.next_waypoint + 1) % points.len();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_obstacle_does_not_move() {
        let spec = ObstacleSpec::sphere(Position::new(1.0, 2.0, 3.0), 0.5, Trajectory::Fixed);
        let mut state = ObstacleState::new(&spec);
        for _ in 0..10 {
            state.advance(&spec, 0.1);
        }
        assert_eq!(state.center, Position::new(1.0, 2.0, 3.0));
        assert_eq!(state.upcoming_velocity(&spec, 0.1), Vector3::zeros());
    }

    #[test]
    fn circular_increment_stays_bounded() {
        let spec = ObstacleSpec::sphere(
            Position::new(5.0, 5.0, 5.0),
            1.0,
            Trajectory::CircularIncrement { amplitude: 2.0 },
        );
        let mut state = ObstacleState::new(&spec);
        for _ in 0..2000 {
            state.advance(&spec, 0.1);
            let offset = state.center - spec.center;
            // Integral of amplitude*(cos t, sin t) stays within amplitude*2.
            assert!(offset.norm() <= 2.0 * 2.0 + 0.5, "wandered to {offset:?}");
            assert_eq!(offset.z, 0.0);
        }
    }

    #[test]
    fn waypoints_cycle_and_arrive_exactly() {
        let spec = ObstacleSpec::sphere(
            Position::new(0.0, 0.0, 0.0),
            0.5,
            Trajectory::Waypoints {
                points: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
                speed: 1.0,
            },
        );
        let mut state = ObstacleState::new(&spec);
        for _ in 0..10 {
            state.advance(&spec, 0.1);
        }
        // After exactly 1.0s at speed 1.0 the first waypoint is reached.
        assert!((state.center - Position::new(1.0, 0.0, 0.0)).norm() < 1e-9);
        state.advance(&spec, 0.1);
        assert!(state.center.x < 1.0, "should head back to the first point");
    }
}
