//! Variable-height inverted pendulum dynamics and the divergent component of motion.
//!
//! The CoM height above the support is z(t) = k*t + z0 during a step, giving a
//! time-varying natural frequency omega = sqrt(g/z). The DCM xi = x + xdot/omega
//! then grows as exp(sigma(T) - sigma(t)) with sigma the integrated frequency,
//! which has a closed form for linear z.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DcmError {
    #[error("pendulum height must stay positive, got z={z} at t={t}")]
    NonPositiveHeight { z: f64, t: f64 },
    #[error("time {t} outside the step interval [0, {limit}]")]
    TimeOutOfRange { t: f64, limit: f64 },
    #[error("degenerate step: sigma(T) must be positive")]
    DegenerateStep,
}

/// Pendulum parameters for a single step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VhipParams {
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
    /// Nominal standing height above the support, m.
    pub z0: f64,
    /// Vertical CoM slope during the step, m/s.
    pub k: f64,
    /// Step (swing) duration, s.
    pub step_duration: f64,
}

impl VhipParams {
    pub fn new(g: f64, z0: f64, k: f64, step_duration: f64) -> Self {
        Self {
            g,
            z0,
            k,
            step_duration,
        }
    }

    #[inline]
    pub fn height(&self, t: f64) -> f64 {
        self.k * t + self.z0
    }

    fn check_height(&self, t: f64) -> Result<f64, DcmError> {
        let z = self.height(t);
        if z <= 0.0 || self.z0 <= 0.0 {
            return Err(DcmError::NonPositiveHeight { z, t });
        }
        Ok(z)
    }
}

impl Default for VhipParams {
    fn default() -> Self {
        // T = 1/(2 f) at the default stepping frequency f = 1.25 Hz
        Self {
            g: 9.81,
            z0: 1.0,
            k: 0.0,
            step_duration: 0.4,
        }
    }
}

/// Stepping gait layout: lateral spacing and leg alternation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitConfig {
    /// Nominal lateral inter-foot distance, m.
    pub l: f64,
    /// Pelvis offset width entering the nominal DCM offset, m.
    pub l_p: f64,
    /// Stepping frequency, Hz; valid range [1.0, 1.5].
    pub f: f64,
    /// Leg parity for the upcoming step (0 = left support next, 1 = right);
    /// drives the (-1)^i alternation.
    pub leg_index: u8,
}

impl GaitConfig {
    /// One swing per half gait cycle.
    pub fn step_duration(&self) -> f64 {
        1.0 / (2.0 * self.f)
    }

    #[inline]
    pub fn parity_sign(&self) -> f64 {
        if self.leg_index % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn flipped(&self) -> Self {
        Self {
            leg_index: self.leg_index ^ 1,
            ..*self
        }
    }
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            l: 0.2,
            l_p: 0.2,
            f: 1.25,
            leg_index: 0,
        }
    }
}

/// Commanded planar velocity in the walker's heading frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandVelocity {
    pub vx: f64,
    pub vy: f64,
    pub wyaw: f64,
}

impl CommandVelocity {
    pub fn new(vx: f64, vy: f64, wyaw: f64) -> Self {
        Self { vx, vy, wyaw }
    }

    pub fn forward(vx: f64) -> Self {
        Self::new(vx, 0.0, 0.0)
    }
}

/// Pendulum state during a step, expressed relative to the current support foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmState {
    /// Divergent component of motion, m.
    pub xi: Vector2<f64>,
    /// CoM position, m.
    pub com_pos: Vector2<f64>,
    /// CoM velocity, m/s.
    pub com_vel: Vector2<f64>,
    /// Elapsed time in the current step, s.
    pub t: f64,
}

impl DcmState {
    /// State at the start of a step; xi is derived from position and velocity.
    pub fn at_step_start(
        com_pos: Vector2<f64>,
        com_vel: Vector2<f64>,
        params: &VhipParams,
    ) -> Result<Self, DcmError> {
        let w = omega(params, 0.0)?;
        Ok(Self {
            xi: com_pos + com_vel / w,
            com_pos,
            com_vel,
            t: 0.0,
        })
    }
}

/// Natural frequency sqrt(g / z(t)).
pub fn omega(params: &VhipParams, t: f64) -> Result<f64, DcmError> {
    let z = params.check_height(t)?;
    Ok((params.g / z).sqrt())
}

/// DCM damping coefficient a = 1 + k / (2 sqrt(g z(t))). Equals 1 on flat ground;
/// stays within [0.84, 1.16] for |k| <= 1 at z around 1 m, which justifies the
/// a ~ 1 simplification used by the planner.
pub fn a_coefficient(params: &VhipParams, t: f64) -> Result<f64, DcmError> {
    let z = params.check_height(t)?;
    Ok(1.0 + params.k / (2.0 * (params.g * z).sqrt()))
}

/// Integrated natural frequency sigma(t) = int_0^t omega dtau:
/// 2 sqrt(g) (sqrt(k t + z0) - sqrt(z0)) / k, with the analytic limit
/// sqrt(g/z0) t for |k| below 1e-8.
///
/// Evaluated as 2 sqrt(g) t / (sqrt(k t + z0) + sqrt(z0)), which is the same
/// closed form with the difference of square roots rationalized away. That
/// removes the catastrophic cancellation near k = 0 and already equals the
/// k -> 0 limit there, so no explicit branch is needed.
pub fn sigma(params: &VhipParams, t: f64) -> Result<f64, DcmError> {
    if t < 0.0 {
        return Err(DcmError::TimeOutOfRange {
            t,
            limit: params.step_duration,
        });
    }
    params.check_height(0.0)?;
    params.check_height(t)?;
    Ok(2.0 * params.g.sqrt() * t / ((params.k * t + params.z0).sqrt() + params.z0.sqrt()))
}

/// Propagate the DCM from time t to the end of the step:
/// xi(T) = xi_t * exp(sigma(T) - sigma(t)), componentwise.
pub fn dcm_propagate(
    xi_t: Vector2<f64>,
    params: &VhipParams,
    t: f64,
) -> Result<Vector2<f64>, DcmError> {
    if t < 0.0 || t > params.step_duration {
        return Err(DcmError::TimeOutOfRange {
            t,
            limit: params.step_duration,
        });
    }
    let scale = (sigma(params, params.step_duration)? - sigma(params, t)?).exp();
    Ok(xi_t * scale)
}

/// Nominal step targets (L_nom, W_nom) = (vx T, vy T + (-1)^i l).
pub fn nominal_step(cmd: &CommandVelocity, gait: &GaitConfig, params: &VhipParams) -> (f64, f64) {
    let t = params.step_duration;
    (cmd.vx * t, cmd.vy * t + gait.parity_sign() * gait.l)
}

/// Nominal end-of-step DCM offset for the step targets (L, W) = (L_nom, W_nom).
///
/// The x component is L / (e^sigma(T) - 1). The y component pairs the pelvis
/// term with the parity opposite to the W_nom alternation so that
/// (L_nom, W_nom, b_nom) is the exact fixed point of the step-to-step DCM
/// recursion; feeding it the paper-literal same-parity pairing makes the
/// lateral gait aperiodic.
pub fn nominal_offset(
    l_target: f64,
    w_target: f64,
    gait: &GaitConfig,
    params: &VhipParams,
) -> Result<Vector2<f64>, DcmError> {
    let s = sigma(params, params.step_duration)?;
    if s <= 0.0 {
        return Err(DcmError::DegenerateStep);
    }
    let es = s.exp();
    let sign = gait.parity_sign();
    let drift = w_target - sign * gait.l;
    Ok(Vector2::new(
        l_target / (es - 1.0),
        -sign * gait.l_p / (1.0 + es) + drift / (es - 1.0),
    ))
}

/// One fixed-step RK4 integration of xddot = omega(t)^2 x on both planar axes.
/// Advances com_pos, com_vel and t; xi is recomputed at the new time.
pub fn vhip_integrate(
    state: &DcmState,
    params: &VhipParams,
    dt: f64,
) -> Result<DcmState, DcmError> {
    if dt <= 0.0 {
        return Err(DcmError::TimeOutOfRange {
            t: dt,
            limit: params.step_duration,
        });
    }
    let t1 = state.t + dt;
    if t1 > params.step_duration + 1e-12 {
        return Err(DcmError::TimeOutOfRange {
            t: t1,
            limit: params.step_duration,
        });
    }
    // omega^2 at the three RK4 stage times; errors if z crosses zero
    let w2_0 = {
        let z = params.check_height(state.t)?;
        params.g / z
    };
    let w2_h = {
        let z = params.check_height(state.t + 0.5 * dt)?;
        params.g / z
    };
    let w2_1 = {
        let z = params.check_height(t1)?;
        params.g / z
    };

    let step_axis = |x: f64, v: f64| -> (f64, f64) {
        let k1x = v;
        let k1v = w2_0 * x;
        let k2x = v + 0.5 * dt * k1v;
        let k2v = w2_h * (x + 0.5 * dt * k1x);
        let k3x = v + 0.5 * dt * k2v;
        let k3v = w2_h * (x + 0.5 * dt * k2x);
        let k4x = v + dt * k3v;
        let k4v = w2_1 * (x + dt * k3x);
        (
            x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    };

    let (px, vx) = step_axis(state.com_pos.x, state.com_vel.x);
    let (py, vy) = step_axis(state.com_pos.y, state.com_vel.y);
    let com_pos = Vector2::new(px, py);
    let com_vel = Vector2::new(vx, vy);
    let w1 = omega(params, t1)?;
    Ok(DcmState {
        xi: com_pos + com_vel / w1,
        com_pos,
        com_vel,
        t: t1,
    })
}
