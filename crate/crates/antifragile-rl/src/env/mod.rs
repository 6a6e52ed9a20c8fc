//! UAV deconfliction environment: interfered-fluid velocity fields around
//! dynamic convex obstacles, kinematic limits, shaped rewards, and episode
//! stepping.

pub mod field;
pub mod normalize;
pub mod obstacle;
pub mod scenario;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use field::PhysicalAction;
pub use normalize::ObsStats;
pub use obstacle::{ObstacleSpec, ObstacleState, Position, Trajectory};
pub use scenario::{EnvConfig, Scenario};

use crate::error::{Error, Result};

/// Agent input state: relative goal position, relative position of the
/// nearest obstacle, and that obstacle's velocity. Zeroed obstacle channels
/// when the scene has no obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector(pub [f64; 9]);

impl ObservationVector {
    pub fn from_parts(goal_rel: Vector3<f64>, obs_rel: Vector3<f64>, obs_vel: Vector3<f64>) -> Self {
        ObservationVector([
            goal_rel.x, goal_rel.y, goal_rel.z, obs_rel.x, obs_rel.y, obs_rel.z, obs_vel.x,
            obs_vel.y, obs_vel.z,
        ])
    }

    pub fn goal_rel(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn obs_rel(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn obs_vel(&self) -> Vector3<f64> {
        Vector3::new(self.0[6], self.0[7], self.0[8])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Normalized control action; every component lives in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub rho: f64,
    pub sigma: f64,
    pub phi: f64,
}

impl ActionVector {
    pub fn new(rho: f64, sigma: f64, phi: f64) -> Self {
        ActionVector { rho, sigma, phi }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        ActionVector {
            rho: a[0],
            sigma: a[1],
            phi: a[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.rho, self.sigma, self.phi]
    }

    pub fn clipped(self) -> Self {
        ActionVector {
            rho: self.rho.clamp(-1.0, 1.0),
            sigma: self.sigma.clamp(-1.0, 1.0),
            phi: self.phi.clamp(-1.0, 1.0),
        }
    }

    /// Map to physical ranges: response gains in [0.5, 2.0], tangential
    /// direction over the full circle.
    pub fn to_physical(self) -> PhysicalAction {
        let a = self.clipped();
        PhysicalAction {
            radial_gain: 0.5 + 1.5 * (a.rho + 1.0) / 2.0,
            tangential_gain: 0.5 + 1.5 * (a.sigma + 1.0) / 2.0,
            tangential_angle: std::f64::consts::PI * a.phi,
        }
    }
}

/// Per-step reward components and episode flags.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub conflict: bool,
    pub goal_reached: bool,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_obs: ObservationVector,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One UAV deconfliction episode. Single-threaded state machine; run multiple
/// instances with independent seeds for parallel rollouts.
#[derive(Debug, Clone)]
pub struct IfdsEnv {
    cfg: EnvConfig,
    specs: Vec<ObstacleSpec>,
    obstacles: Vec<ObstacleState>,
    position: Position,
    steps: usize,
    done: bool,
}

impl IfdsEnv {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let obstacles = scenario.obstacles.iter().map(ObstacleState::new).collect();
        Ok(IfdsEnv {
            cfg: scenario.env,
            specs: scenario.obstacles,
            obstacles,
            position: Position::zeros(),
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Start a new episode: UAV start drawn per-axis from
    /// `Normal(start_mean, start_std^2)`, obstacles back to their trajectory
    /// origins. Returns the raw (unnormalized) observation.
    pub fn reset(&mut self, seed: u64) -> ObservationVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut start = self.cfg.start_mean;
        for i in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            start[i] += self.cfg.start_std * z;
        }
        self.position = start;
        self.obstacles = self.specs.iter().map(ObstacleState::new).collect();
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    /// Index of the obstacle nearest to `p` (ties: lowest index).
    fn nearest_obstacle(&self, p: Position) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, state) in self.obstacles.iter().enumerate() {
            let d = (p - state.center).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Raw observation of the current state.
    pub fn observe(&self) -> ObservationVector {
        self.observe_from(self.position)
    }

    /// Raw observation as perceived from `p` (used for spoofed positions).
    pub fn observe_from(&self, p: Position) -> ObservationVector {
        match self.nearest_obstacle(p) {
            Some(i) => ObservationVector::from_parts(
                self.cfg.goal - p,
                self.obstacles[i].center - p,
                self.obstacles[i].upcoming_velocity(&self.specs[i], self.cfg.dt),
            ),
            None => {
                ObservationVector::from_parts(self.cfg.goal - p, Vector3::zeros(), Vector3::zeros())
            }
        }
    }

    /// Advance one step: move the UAV along the modulated field, advance the
    /// obstacles, and score the new configuration.
    pub fn step(&mut self, action: ActionVector) -> Result<StepResult> {
        if self.done {
            return Err(Error::Lifecycle("step called on a finished episode"));
        }
        let cfg = self.cfg.clone();
        let physical = action.to_physical();

        let velocities: Vec<Vector3<f64>> = self
            .obstacles
            .iter()
            .zip(self.specs.iter())
            .map(|(state, spec)| state.upcoming_velocity(spec, cfg.dt))
            .collect();
        let v_bar = {
            let geometry: Vec<(Position, &ObstacleSpec)> = self
                .obstacles
                .iter()
                .zip(self.specs.iter())
                .map(|(state, spec)| (state.center, spec))
                .collect();
            field::modulated_velocity(self.position, &geometry, &velocities, physical, &cfg)?
        };
        if !v_bar.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("modulated velocity"));
        }
        self.position += v_bar * cfg.dt;
        for (state, spec) in self.obstacles.iter_mut().zip(self.specs.iter()) {
            state.advance(spec, cfg.dt);
        }
        self.steps += 1;

        let goal_dist = (self.position - cfg.goal).norm();
        let goal_reached = goal_dist <= cfg.goal_threshold;

        let (r1, r3, conflict, obs_goal_dist) = match self.nearest_obstacle(self.position) {
            Some(i) => {
                let obs_center = self.obstacles[i].center;
                let dist = (self.position - obs_center).norm();
                let conflict = dist <= cfg.protect_radius;
                let r1 = if conflict { dist / cfg.protect_radius } else { 0.0 };
                let in_threat_zone =
                    dist > cfg.protect_radius && dist < cfg.protect_radius + cfg.conflict_buffer;
                let r3 = if in_threat_zone {
                    (dist - (cfg.protect_radius + cfg.conflict_buffer)).abs() / cfg.protect_radius
                        - cfg.threat_offset
                } else {
                    0.0
                };
                (r1, r3, conflict, (obs_center - cfg.goal).norm())
            }
            None => (0.0, 0.0, false, 1.0),
        };
        let r2 =
            -goal_dist / obs_goal_dist.max(1e-9) + if goal_reached { cfg.goal_bonus } else { 0.0 };

        let reward = cfg.lambda1 * r1 + cfg.lambda2 * r2 + cfg.lambda3 * r3;
        self.done = goal_reached || conflict || self.steps >= cfg.max_steps;

        Ok(StepResult {
            next_obs: self.observe(),
            reward,
            done: self.done,
            info: StepInfo {
                r1,
                r2,
                r3,
                conflict,
                goal_reached,
            },
        })
    }
}

/// One row of a trajectory log.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRow {
    pub step: usize,
    pub position: Position,
    pub reward: f64,
    pub info: StepInfo,
    pub done: bool,
}

pub const TRAJECTORY_CSV_HEADER: &str = "step,x,y,z,reward,r1,r2,r3,conflict,done";

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.step,
            row.position.x,
            row.position.y,
            row.position.z,
            row.reward,
            row.info.r1,
            row.info.r2,
            row.info.r3,
            row.info.conflict as u8,
            row.done as u8,
        ));
    }
    out
}
