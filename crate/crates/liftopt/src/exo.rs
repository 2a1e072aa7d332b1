//! Passive back-support exoskeleton: a torsion spring acting between the
//! trunk and the thighs through a pelvis pivot.
//!
//! The device is described by three attachment points per side, all named
//! points of the model: `P` on the pelvis (the pivot), `T` on the upper
//! trunk, `U` on the thigh. With `a = T - P` and `b = U - P`, the opening
//! angle `alpha` is the unsigned angle between the two struts; the spring
//! deflection is
//!
//! ```text
//! theta = (pi - alpha) - theta0
//! ```
//!
//! so bending forward (closing the hip/trunk scissor) increases `theta`
//! and the spring resists with a moment `k * theta`. The generalized joint
//! torque follows from the potential `V = 1/2 * k * theta^2` per side,
//! which makes the device exactly conservative: the attachment forces form
//! a zero-sum, zero-moment internal system, so the floating-base rows of
//! the generalized torque vanish identically.

use crate::geom::{cross2, perp, Vec2};
use crate::multibody::{Frames, Model, MultibodyError};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExoError {
    #[error("spring stiffness must be finite and nonnegative, got {0}")]
    BadStiffness(f64),
    #[error("rest angle must be finite, got {0}")]
    BadRestAngle(f64),
    #[error("attachment points nearly collinear through the pivot (side {0})")]
    Degenerate(usize),
    #[error("attachment points coincide with the pivot (side {0})")]
    Coincident(usize),
    #[error("model has no exoskeleton attachment points")]
    NoAttachments,
    #[error(transparent)]
    Multibody(#[from] MultibodyError),
}

/// Sine of the opening angle below which the spring geometry is treated
/// as degenerate (collinear struts have no defined bending plane).
pub const DEGENERATE_SIN_ALPHA: f64 = 1e-9;

/// Spring parameters: total stiffness across all sides, and the rest
/// deflection offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    /// Total torsional stiffness in Nm/rad, split equally across sides.
    pub k: f64,
    /// Rest angle in rad: the deflection `pi - alpha` at which the spring
    /// is unloaded.
    pub theta0: f64,
}

/// One side's attachment point names.
#[derive(Debug, Clone)]
pub struct ExoSide {
    pub pelvis: String,
    pub trunk: String,
    pub thigh: String,
}

/// Instantaneous state of one side's spring.
#[derive(Debug, Clone, Copy)]
pub struct SpringState {
    /// Opening angle between the trunk and thigh struts, in `(0, pi)`.
    pub alpha: f64,
    /// Deflection `(pi - alpha) - theta0`.
    pub theta: f64,
    /// Spring moment `k_side * theta` carried by this side.
    pub torque: f64,
}

/// The passive exoskeleton: spring parameters plus per-side attachments.
#[derive(Debug, Clone)]
pub struct ExoDevice {
    pub params: SpringParams,
    pub sides: Vec<ExoSide>,
}

impl ExoDevice {
    pub fn new(params: SpringParams, sides: Vec<ExoSide>) -> Result<Self, ExoError> {
        if !(params.k.is_finite() && params.k >= 0.0) {
            return Err(ExoError::BadStiffness(params.k));
        }
        if !params.theta0.is_finite() {
            return Err(ExoError::BadRestAngle(params.theta0));
        }
        if sides.is_empty() {
            return Err(ExoError::NoAttachments);
        }
        Ok(ExoDevice { params, sides })
    }

    /// Builds the device for a model, detecting `exo_P_l`/`exo_P_r` style
    /// bilateral attachments or single `exo_P`/`exo_T`/`exo_U` points.
    pub fn for_model(model: &Model, params: SpringParams) -> Result<Self, ExoError> {
        let mut sides = Vec::new();
        if model.point("exo_P").is_ok() {
            sides.push(ExoSide {
                pelvis: "exo_P".to_string(),
                trunk: "exo_T".to_string(),
                thigh: "exo_U".to_string(),
            });
        }
        for suffix in ["_l", "_r"] {
            if model.point(&format!("exo_P{suffix}")).is_ok() {
                sides.push(ExoSide {
                    pelvis: format!("exo_P{suffix}"),
                    trunk: format!("exo_T{suffix}"),
                    thigh: format!("exo_U{suffix}"),
                });
            }
        }
        for side in &sides {
            model.point(&side.trunk)?;
            model.point(&side.thigh)?;
        }
        Self::new(params, sides)
    }

    /// Per-side stiffness (total split equally).
    pub fn k_side(&self) -> f64 {
        self.params.k / self.sides.len() as f64
    }

    fn side_geometry(
        &self,
        model: &Model,
        frames: &Frames,
        i: usize,
    ) -> Result<(Vec2, Vec2, Vec2, SpringState), ExoError> {
        let side = &self.sides[i];
        let p = model.point_world(frames, &side.pelvis)?;
        let t = model.point_world(frames, &side.trunk)?;
        let u = model.point_world(frames, &side.thigh)?;
        let a = t - p;
        let b = u - p;
        let (na2, nb2) = (a.norm_squared(), b.norm_squared());
        if na2 == 0.0 || nb2 == 0.0 {
            return Err(ExoError::Coincident(i));
        }
        let c = cross2(a, b);
        let d = a.dot(&b);
        let alpha = c.abs().atan2(d);
        if c.abs() <= DEGENERATE_SIN_ALPHA * (na2 * nb2).sqrt() {
            return Err(ExoError::Degenerate(i));
        }
        let theta = (std::f64::consts::PI - alpha) - self.params.theta0;
        let state = SpringState {
            alpha,
            theta,
            torque: self.k_side() * theta,
        };
        Ok((p, a, b, state))
    }

    /// Spring state of each side at configuration `q` (via its frames).
    pub fn spring_states(
        &self,
        model: &Model,
        frames: &Frames,
    ) -> Result<Vec<SpringState>, ExoError> {
        (0..self.sides.len())
            .map(|i| self.side_geometry(model, frames, i).map(|g| g.3))
            .collect()
    }

    /// Total elastic energy `sum_i 1/2 k_side theta_i^2`.
    pub fn energy(&self, model: &Model, frames: &Frames) -> Result<f64, ExoError> {
        let mut e = 0.0;
        for s in self.spring_states(model, frames)? {
            e += 0.5 * self.k_side() * s.theta * s.theta;
        }
        Ok(e)
    }

    /// Attachment forces of side `i` as `[(point, force); 3]` in the order
    /// trunk, thigh, pelvis. The set sums to zero force and zero moment.
    pub fn attachment_forces(
        &self,
        model: &Model,
        frames: &Frames,
        i: usize,
    ) -> Result<[(String, Vec2); 3], ExoError> {
        let (_, a, b, state) = self.side_geometry(model, frames, i)?;
        let s = cross2(a, b).signum();
        // d alpha / d T = -s * perp(a) / |a|^2, d alpha / d U = s * perp(b) / |b|^2;
        // the generalized force is tau * d alpha / d q, so the force applied
        // at each attachment is tau times the gradient of alpha there.
        let f_t = -state.torque * s / a.norm_squared() * perp(a);
        let f_u = state.torque * s / b.norm_squared() * perp(b);
        let f_p = -(f_t + f_u);
        let side = &self.sides[i];
        Ok([
            (side.trunk.clone(), f_t),
            (side.thigh.clone(), f_u),
            (side.pelvis.clone(), f_p),
        ])
    }

    /// Generalized joint torque of the whole device,
    /// `tau_E = sum_sides k_side * theta * d alpha / d q`, length `nq`.
    pub fn generalized_torque(
        &self,
        model: &Model,
        frames: &Frames,
    ) -> Result<DVector<f64>, ExoError> {
        let mut tau = DVector::zeros(model.nq());
        for i in 0..self.sides.len() {
            for (point, force) in self.attachment_forces(model, frames, i)? {
                let jac = model.point_jacobian(frames, &point)?;
                // tau += J^T f for this attachment.
                tau.gemv_tr(1.0, &jac, &DVector::from_column_slice(&[force.x, force.y]), 1.0);
            }
        }
        Ok(tau)
    }

    /// The rest angle `theta0` that makes the spring unloaded at `q`:
    /// the deflection `pi - alpha` evaluated there (averaged over sides).
    pub fn unloaded_rest_angle(&self, model: &Model, frames: &Frames) -> Result<f64, ExoError> {
        let states = self.spring_states(model, frames)?;
        let mean_alpha: f64 =
            states.iter().map(|s| s.alpha).sum::<f64>() / states.len() as f64;
        Ok(std::f64::consts::PI - mean_alpha)
    }

    /// A copy with different spring parameters (same attachments).
    pub fn with_params(&self, params: SpringParams) -> Result<Self, ExoError> {
        Self::new(params, self.sides.clone())
    }
}
