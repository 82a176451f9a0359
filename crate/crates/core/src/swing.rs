//! Swing-foot trajectories from three keyframes, and the foothold-tracking reward.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::FootholdPlan;

#[derive(Debug, Error, PartialEq)]
pub enum SwingError {
    #[error("sample time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("swing duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("clearance margin must be non-negative, got {0}")]
    BadClearance(f64),
}

/// Quadratic Bezier swing trajectory through lift-off, apex and landing.
///
/// The control point sits over the planar midpoint of lift and land, with its
/// height chosen so the curve's maximum equals max(lift.z, land.z) + clearance.
/// Planar motion is therefore a straight line from lift to land.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingTrajectory {
    pub p_lift: Vector3<f64>,
    /// Apex keyframe: planar midpoint at the achieved curve maximum height.
    pub p_apex: Vector3<f64>,
    pub p_land: Vector3<f64>,
    /// Bezier control point (above the apex keyframe).
    pub control: Vector3<f64>,
    pub duration: f64,
    pub clearance: f64,
}

/// Build the swing toward a planned foothold; landing is (u_T, h_z) in the map frame.
pub fn make_swing(
    p_lift: Vector3<f64>,
    plan: &FootholdPlan,
    duration: f64,
    clearance: f64,
) -> Result<SwingTrajectory, SwingError> {
    let land = Vector3::new(plan.world_u_t.x, plan.world_u_t.y, plan.h_z);
    make_swing_points(p_lift, land, duration, clearance)
}

pub fn make_swing_points(
    p_lift: Vector3<f64>,
    p_land: Vector3<f64>,
    duration: f64,
    clearance: f64,
) -> Result<SwingTrajectory, SwingError> {
    if duration <= 0.0 || !duration.is_finite() {
        return Err(SwingError::BadDuration(duration));
    }
    if clearance < 0.0 || !clearance.is_finite() {
        return Err(SwingError::BadClearance(clearance));
    }
    let (z0, z2) = (p_lift.z, p_land.z);
    let z_apex = z0.max(z2) + clearance;
    // control height making the curve peak exactly at z_apex:
    // z1 = z_apex + sqrt((z_apex - z0)(z_apex - z2))
    let z1 = z_apex + ((z_apex - z0) * (z_apex - z2)).max(0.0).sqrt();
    let mid = Vector2::new(0.5 * (p_lift.x + p_land.x), 0.5 * (p_lift.y + p_land.y));
    Ok(SwingTrajectory {
        p_lift,
        p_apex: Vector3::new(mid.x, mid.y, z_apex),
        p_land,
        control: Vector3::new(mid.x, mid.y, z1),
        duration,
        clearance,
    })
}

impl SwingTrajectory {
    /// Desired foot position at time t, Bezier-evaluated at u = t / duration.
    pub fn sample(&self, t: f64) -> Result<Vector3<f64>, SwingError> {
        if t < 0.0 || t > self.duration {
            return Err(SwingError::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        let u = t / self.duration;
        let w0 = (1.0 - u) * (1.0 - u);
        let w1 = 2.0 * u * (1.0 - u);
        let w2 = u * u;
        Ok(self.p_lift * w0 + self.control * w1 + self.p_land * w2)
    }
}

/// Foothold-tracking reward exp(-10 ||p_f - p_f_desired||), in (0, 1].
pub fn foothold_reward(p_f: Vector3<f64>, p_f_desired: Vector3<f64>) -> f64 {
    (-10.0 * (p_f - p_f_desired).norm()).exp()
}
