//! Holonomic point constraints: selected world axes of named points held at
//! fixed anchors, differentiated to acceleration level for the KKT dynamics.

use super::{Model, MultibodyError};
use crate::geom::Vec2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Step used to finite-difference the constraint Jacobian along the
/// trajectory direction when forming the `Gdot qd` term. An analytic
/// implementation may replace this; the KKT residual is evaluated with the
/// same scheme, so the pair stays consistent.
pub const GDOT_FD_STEP: f64 = 1e-7;

/// Which world axes of a point are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintAxes {
    X,
    Z,
    Xz,
}

impl ConstraintAxes {
    pub fn dim(self) -> usize {
        match self {
            ConstraintAxes::X | ConstraintAxes::Z => 1,
            ConstraintAxes::Xz => 2,
        }
    }
}

/// One constrained point: `axes` of the named point are pinned to `anchor`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointConstraint {
    pub point: String,
    pub axes: ConstraintAxes,
    /// World target; only the selected components are used.
    pub anchor: Vec2,
}

/// An ordered set of point constraints. Row order follows constraint order,
/// with `Xz` contributing its x row first.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<PointConstraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<PointConstraint>) -> Self {
        Self { constraints }
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Total number of scalar constraint rows.
    pub fn dim(&self) -> usize {
        self.constraints.iter().map(|c| c.axes.dim()).sum()
    }

    /// Position residual `g(q)` (point minus anchor on the selected axes).
    pub fn position_residual(
        &self,
        model: &Model,
        q: &DVector<f64>,
    ) -> Result<DVector<f64>, MultibodyError> {
        let frames = model.frames(q);
        let mut g = DVector::zeros(self.dim());
        let mut row = 0;
        for c in &self.constraints {
            let p = model.point_world(&frames, &c.point)?;
            let d = p - c.anchor;
            match c.axes {
                ConstraintAxes::X => {
                    g[row] = d.x;
                    row += 1;
                }
                ConstraintAxes::Z => {
                    g[row] = d.y;
                    row += 1;
                }
                ConstraintAxes::Xz => {
                    g[row] = d.x;
                    g[row + 1] = d.y;
                    row += 2;
                }
            }
        }
        Ok(g)
    }

    /// Constraint Jacobian `G(q)`, dim x nq.
    pub fn jacobian(&self, model: &Model, q: &DVector<f64>) -> Result<DMatrix<f64>, MultibodyError> {
        let frames = model.frames(q);
        let mut g = DMatrix::zeros(self.dim(), model.nq());
        let mut row = 0;
        for c in &self.constraints {
            let jac = model.point_jacobian(&frames, &c.point)?;
            match c.axes {
                ConstraintAxes::X => {
                    g.row_mut(row).copy_from(&jac.row(0));
                    row += 1;
                }
                ConstraintAxes::Z => {
                    g.row_mut(row).copy_from(&jac.row(1));
                    row += 1;
                }
                ConstraintAxes::Xz => {
                    g.row_mut(row).copy_from(&jac.row(0));
                    g.row_mut(row + 1).copy_from(&jac.row(1));
                    row += 2;
                }
            }
        }
        Ok(g)
    }

    /// Constraint-space velocity `G qd`.
    pub fn velocity(
        &self,
        model: &Model,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DVector<f64>, MultibodyError> {
        Ok(self.jacobian(model, q)? * qdot)
    }

    /// The `Gdot qd` acceleration bias, from central differencing of `G`
    /// along the trajectory direction with step [`GDOT_FD_STEP`].
    pub fn gdot_qdot(
        &self,
        model: &Model,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DVector<f64>, MultibodyError> {
        let h = GDOT_FD_STEP;
        let q_plus = q + qdot * h;
        let q_minus = q - qdot * h;
        let g_plus = self.jacobian(model, &q_plus)?;
        let g_minus = self.jacobian(model, &q_minus)?;
        Ok(((g_plus - g_minus) / (2.0 * h)) * qdot)
    }
}
