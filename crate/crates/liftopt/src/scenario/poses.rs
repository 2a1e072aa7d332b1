//! Pose synthesis: configurations satisfying contact and reach conditions.

use nalgebra::DVector;
use thiserror::Error;

use crate::multibody::{ConstraintSet, Model, MultibodyError};

#[derive(Debug, Error)]
pub enum PoseError {
    #[error(transparent)]
    Multibody(#[from] MultibodyError),
    #[error("pose solve stalled at residual {residual:.3e}")]
    NoConvergence { residual: f64 },
}

pub const POSE_TOL: f64 = 1e-10;
pub const POSE_MAX_ITER: usize = 100;

/// Largest Gauss-Newton step per iteration, to keep poor templates from
/// being thrown across configuration space.
const MAX_STEP: f64 = 1.0;

/// Shifts the base height of a pose so `ground_point` sits exactly on
/// z = 0. The base height enters every point height linearly, so this is
/// exact, not iterative.
pub fn drop_to_ground(
    model: &Model,
    mut q: DVector<f64>,
    ground_point: &str,
) -> Result<DVector<f64>, MultibodyError> {
    let frames = model.frames(&q);
    let p = model.point_world(&frames, ground_point)?;
    q[1] -= p.y;
    Ok(q)
}

/// The natural standing configuration: all joints at zero, base height
/// chosen so `ground_point` sits exactly on z = 0.
pub fn standing_pose(model: &Model, ground_point: &str) -> Result<DVector<f64>, MultibodyError> {
    drop_to_ground(model, DVector::zeros(model.nq()), ground_point)
}

/// Projects the template `q0` onto the target set by Gauss-Newton with
/// minimal-norm steps: `dq = -G^T (G G^T)^-1 r`. Underdetermined targets
/// leave the remaining degrees of freedom near the template.
pub fn solve_pose(
    model: &Model,
    q0: &DVector<f64>,
    targets: &ConstraintSet,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, PoseError> {
    let mut q = q0.clone();
    let m = targets.dim();
    if m == 0 {
        return Ok(q);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let r = targets.position_residual(model, &q)?;
        residual = r.amax();
        if residual <= tol {
            return Ok(q);
        }
        let g = targets.jacobian(model, &q)?;
        let mut ggt = &g * g.transpose();
        let damp = 1e-12 * (1.0 + ggt.trace() / m as f64);
        for i in 0..m {
            ggt[(i, i)] += damp;
        }
        let w = ggt
            .cholesky()
            .ok_or(PoseError::NoConvergence { residual })?
            .solve(&r);
        let mut dq = -(g.transpose() * w);
        let step = dq.amax();
        if step > MAX_STEP {
            dq *= MAX_STEP / step;
        }
        q += dq;
    }
    Err(PoseError::NoConvergence { residual })
}
