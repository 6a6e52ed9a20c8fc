//! Environment configuration and scenario files.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::obstacle::{ObstacleSpec, Position, Trajectory};
use crate::error::{Error, Result};

/// Full environment parameterization. Defaults give the single-obstacle
/// training scene: ~13 world units start to goal, 100-200 step episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub goal: Position,
    pub start_mean: Position,
    pub start_std: f64,
    /// Integration interval in seconds.
    pub dt: f64,
    /// Attractive-flow speed constant.
    pub attract_const: f64,
    /// Climb-angle limits in radians.
    pub max_ascent: f64,
    pub max_descent: f64,
    /// Protective radius around obstacles; entering it is a conflict.
    pub protect_radius: f64,
    /// Extra threat-zone width beyond the protective radius.
    pub conflict_buffer: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Bonus added to the path reward on reaching the goal threshold.
    pub goal_bonus: f64,
    /// Constant offset subtracted inside the threat zone.
    pub threat_offset: f64,
    /// Goal arrival threshold in world units.
    pub goal_threshold: f64,
    /// Base radial response coefficient (scaled by the action).
    pub radial_response: f64,
    /// Base tangential response coefficient (scaled by the action).
    pub tangential_response: f64,
    /// Decay constant of the perceived obstacle speed threat.
    pub speed_threat_decay: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            goal: Position::new(10.0, 10.0, 5.5),
            start_mean: Position::new(0.0, 2.0, 5.0),
            start_std: 1.0,
            dt: 0.1,
            attract_const: 2.0,
            max_ascent: 5.0 * std::f64::consts::PI / 9.0,
            max_descent: -15.0 * std::f64::consts::PI / 36.0,
            protect_radius: 1.5,
            conflict_buffer: 0.4,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            goal_bonus: 10.0,
            threat_offset: 1.0,
            goal_threshold: 0.5,
            radial_response: 1.0,
            tangential_response: 1.0,
            speed_threat_decay: 2.0,
            max_steps: 200,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("protect_radius", self.protect_radius),
            ("radial_response", self.radial_response),
            ("tangential_response", self.tangential_response),
            ("speed_threat_decay", self.speed_threat_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("env.{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("env.max_steps must be positive".into()));
        }
        if self.start_std < 0.0 || self.conflict_buffer < 0.0 {
            return Err(Error::Config("env.start_std and env.conflict_buffer must be >= 0".into()));
        }
        Ok(())
    }
}

/// A scenario file: environment constants plus the obstacle set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub env: EnvConfig,
    pub obstacles: Vec<ObstacleSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        for obs in &self.obstacles {
            obs.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Dependency(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("scenario {}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Training scene: one sphere orbiting between start and goal.
    pub fn training_single_obstacle() -> Self {
        Scenario {
            env: EnvConfig::default(),
            obstacles: vec![ObstacleSpec::sphere(
                Position::new(5.0, 6.0, 5.2),
                1.0,
                Trajectory::CircularIncrement { amplitude: 2.0 },
            )],
        }
    }

    /// Evaluation scene: eight obstacles on predetermined trajectories spread
    /// across the start-goal corridor.
    pub fn benchmark_eight_obstacles() -> Self {
        let orbit = |x, y, z| {
            ObstacleSpec::sphere(
                Position::new(x, y, z),
                0.9,
                Trajectory::CircularIncrement { amplitude: 2.0 },
            )
        };
        let patrol = |from: [f64; 3], to: [f64; 3], speed| ObstacleSpec {
            center: Position::from(from),
            semi_axes: Vector3::new(0.8, 0.8, 0.6),
            exponents: Vector3::new(1.0, 1.0, 2.0),
            trajectory: Trajectory::Waypoints {
                points: vec![to, from],
                speed,
            },
        };
        Scenario {
            env: EnvConfig::default(),
            obstacles: vec![
                orbit(3.0, 4.0, 5.0),
                orbit(5.0, 6.0, 5.3),
                orbit(7.0, 8.0, 5.5),
                orbit(4.5, 8.0, 4.8),
                patrol([2.0, 6.5, 5.2], [6.0, 3.5, 5.2], 0.8),
                patrol([8.0, 6.0, 5.6], [6.0, 9.5, 5.4], 0.6),
                ObstacleSpec::sphere(Position::new(6.5, 5.0, 5.0), 1.0, Trajectory::Fixed),
                ObstacleSpec {
                    center: Position::new(8.5, 9.0, 5.3),
                    semi_axes: Vector3::new(0.7, 1.0, 0.8),
                    exponents: Vector3::new(1.0, 1.0, 1.0),
                    trajectory: Trajectory::CircularIncrement { amplitude: 1.5 },
                },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        Scenario::training_single_obstacle().validate().unwrap();
        Scenario::benchmark_eight_obstacles().validate().unwrap();
        assert_eq!(Scenario::benchmark_eight_obstacles().obstacles.len(), 8);
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let scenario = Scenario::benchmark_eight_obstacles();
        scenario.save(&path).unwrap();
        let back = Scenario::load(&path).unwrap();
        assert_eq!(back.obstacles.len(), 8);
        assert_eq!(back.env.goal, scenario.env.goal);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = EnvConfig::default();
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = EnvConfig::default();
        cfg.lambda2 = -1.0;
        assert!(cfg.validate().is_err());
    }
}
