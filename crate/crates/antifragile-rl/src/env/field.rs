//! Interfered fluid dynamic field: attractive flow, per-obstacle disturbance
//! matrices, and the modulated UAV velocity.

use nalgebra::{Matrix3, Vector3};

use super::obstacle::{ObstacleSpec, Position};
use super::scenario::EnvConfig;
use crate::error::{Error, Result};

/// Physical control action after mapping from the normalized [-1,1] range:
/// multipliers on the radial/tangential response coefficients plus the
/// tangential flow direction.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalAction {
    pub radial_gain: f64,
    pub tangential_gain: f64,
    pub tangential_angle: f64,
}

/// Attractive velocity toward the goal; magnitude is the scaling constant.
pub fn attractive_velocity(p: Position, cfg: &EnvConfig) -> Result<Vector3<f64>> {
    let to_uav = p - cfg.goal;
    let d = to_uav.norm();
    if d == 0.0 {
        return Err(Error::Geometry("attractive field evaluated at the goal".into()));
    }
    Ok(-to_uav * (cfg.attract_const / d))
}

/// Obstacle implicit function: 1 on the surface, <1 inside, >1 outside.
pub fn gamma(p: Position, obs_center: Position, obs: &ObstacleSpec) -> f64 {
    let mut g = 0.0;
    for i in 0..3 {
        let u = (p[i] - obs_center[i]) / obs.semi_axes[i];
        g += (u * u).powf(obs.exponents[i]);
    }
    g
}

/// Gradient of [`gamma`] with respect to the UAV position (the radial normal).
pub fn gamma_gradient(p: Position, obs_center: Position, obs: &ObstacleSpec) -> Vector3<f64> {
    let mut grad = Vector3::zeros();
    for i in 0..3 {
        let u = (p[i] - obs_center[i]) / obs.semi_axes[i];
        grad[i] = if u == 0.0 {
            0.0
        } else {
            2.0 * obs.exponents[i] * u * (u * u).powf(obs.exponents[i] - 1.0) / obs.semi_axes[i]
        };
    }
    grad
}

/// Distance from `p` to the obstacle surface along the ray to the center.
/// Exact for unit exponents; bisection on the scaled implicit function
/// otherwise (gamma is strictly increasing along the ray).
pub fn surface_distance(p: Position, obs_center: Position, obs: &ObstacleSpec) -> f64 {
    let u = p - obs_center;
    let dist = u.norm();
    if dist == 0.0 {
        return 0.0;
    }
    let g_full = gamma(p, obs_center, obs);
    if g_full <= 1.0 {
        return 0.0;
    }
    if obs.exponents == Vector3::new(1.0, 1.0, 1.0) {
        return dist * (1.0 - 1.0 / g_full.sqrt());
    }
    let g_at = |k: f64| gamma(obs_center + u * k, obs_center, obs);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g_at(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dist * (1.0 - 0.5 * (lo + hi))
}

/// Disturbance weighting factors for a set of obstacles (1.0 for a single
/// obstacle). `gammas` must already be computed at `p`.
pub fn disturbance_weights(gammas: &[f64]) -> Vec<f64> {
    let n = gammas.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let gk = gammas[k] - 1.0;
            (0..n)
                .filter(|&i| i != k)
                .map(|i| {
                    let gi = gammas[i] - 1.0;
                    gi / (gi + gk)
                })
                .product()
        })
        .collect()
}

/// Unit tangential direction in the plane orthogonal to the radial normal,
/// selected by the action's tangential angle. Falls back to a fixed horizontal
/// basis when the normal is vertical.
fn tangential_direction(radial: Vector3<f64>, angle: f64) -> Vector3<f64> {
    let mut h1 = Vector3::new(radial.y, -radial.x, 0.0);
    if h1.norm() <= 1e-12 * radial.norm() {
        h1 = Vector3::new(1.0, 0.0, 0.0);
    }
    let h1 = h1.normalize();
    let h2 = radial.cross(&h1).normalize();
    h1 * angle.cos() + h2 * angle.sin()
}

struct ObstacleField {
    gamma: f64,
    radial: Vector3<f64>,
    surface_dist: f64,
}

fn obstacle_fields(
    p: Position,
    obstacles: &[(Position, &ObstacleSpec)],
) -> Result<Vec<ObstacleField>> {
    obstacles
        .iter()
        .map(|(center, spec)| {
            let g = gamma(p, *center, spec);
            if g <= 1.0 {
                return Err(Error::Geometry(format!(
                    "field evaluated inside an obstacle (gamma = {g})"
                )));
            }
            let radial = gamma_gradient(p, *center, spec);
            if radial.norm() == 0.0 {
                return Err(Error::Geometry(
                    "zero radial gradient: singular obstacle geometry".into(),
                ));
            }
            Ok(ObstacleField {
                gamma: g,
                radial,
                surface_dist: surface_distance(p, *center, spec),
            })
        })
        .collect()
}

/// Weighted disturbance matrix over all obstacles. Identity when the set is
/// empty; errors if `p` is inside any obstacle or on a singular normal.
pub fn disturbance_matrix(
    p: Position,
    obstacles: &[(Position, &ObstacleSpec)],
    action: PhysicalAction,
    cfg: &EnvConfig,
) -> Result<Matrix3<f64>> {
    if obstacles.is_empty() {
        return Ok(Matrix3::identity());
    }
    let fields = obstacle_fields(p, obstacles)?;
    let gammas: Vec<f64> = fields.iter().map(|f| f.gamma).collect();
    let weights = disturbance_weights(&gammas);
    let d_goal = (p - cfg.goal).norm();

    let mut total = Matrix3::zeros();
    for (field, &w) in fields.iter().zip(weights.iter()) {
        let response = (1.0 - 1.0 / (d_goal * field.surface_dist)).exp();
        let radial_coef = action.radial_gain * cfg.radial_response * response;
        let tangential_coef = action.tangential_gain * cfg.tangential_response * response;

        let t = field.radial;
        let t_norm_sq = t.norm_squared();
        let radial_term = (t * t.transpose()) / (field.gamma.powf(1.0 / radial_coef) * t_norm_sq);

        let h = tangential_direction(t, action.tangential_angle);
        let tangential_term =
            (h * t.transpose()) / (field.gamma.powf(1.0 / tangential_coef) * t.norm());

        total += (Matrix3::identity() - radial_term + tangential_term) * w;
    }
    Ok(total)
}

/// Perceived obstacle velocity at `p`: trajectory speeds damped exponentially
/// in gamma and combined with the disturbance weights.
pub fn obstacle_speed_threat(
    p: Position,
    obstacles: &[(Position, &ObstacleSpec)],
    velocities: &[Vector3<f64>],
    decay: f64,
) -> Vector3<f64> {
    if obstacles.is_empty() {
        return Vector3::zeros();
    }
    let gammas: Vec<f64> = obstacles
        .iter()
        .map(|(center, spec)| gamma(p, *center, spec))
        .collect();
    let weights = disturbance_weights(&gammas);
    let mut v = Vector3::zeros();
    for ((&w, &g), vel) in weights.iter().zip(gammas.iter()).zip(velocities.iter()) {
        v += vel * (w * (-g / decay).exp());
    }
    v
}

/// Clamp the climb angle to the configured ascent/descent limits while
/// preserving speed and horizontal heading.
pub fn clip_climb_angle(v: Vector3<f64>, cfg: &EnvConfig) -> Vector3<f64> {
    let horizontal = v.xy().norm();
    let angle = v.z.atan2(horizontal);
    if angle >= cfg.max_descent && angle <= cfg.max_ascent {
        return v;
    }
    let clamped = angle.clamp(cfg.max_descent, cfg.max_ascent);
    let speed = v.norm();
    let azimuth = v.y.atan2(v.x);
    Vector3::new(
        speed * clamped.cos() * azimuth.cos(),
        speed * clamped.cos() * azimuth.sin(),
        speed * clamped.sin(),
    )
}

/// Full modulated UAV velocity: attractive flow bent around the obstacles with
/// the dynamic speed threat folded in, then climb-angle limited.
pub fn modulated_velocity(
    p: Position,
    obstacles: &[(Position, &ObstacleSpec)],
    velocities: &[Vector3<f64>],
    action: PhysicalAction,
    cfg: &EnvConfig,
) -> Result<Vector3<f64>> {
    let v = attractive_velocity(p, cfg)?;
    let v_obs = obstacle_speed_threat(p, obstacles, velocities, cfg.speed_threat_decay);
    let m = disturbance_matrix(p, obstacles, action, cfg)?;
    Ok(clip_climb_angle(m * (v - v_obs) + v_obs, cfg))
}
