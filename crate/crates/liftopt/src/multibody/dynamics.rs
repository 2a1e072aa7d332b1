//! Mass matrix, nonlinear effects, and contact-constrained forward dynamics.

use super::{ConstraintSet, DynamicsState, Model, MultibodyError};
use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold for the Schur-complement factorization; below
/// this the active constraint set is reported as singular/redundant.
pub const SCHUR_PIVOT_THRESHOLD: f64 = 1e-10;

fn check_state(model: &Model, state: &DynamicsState) -> Result<(), MultibodyError> {
    let nq = model.nq();
    if state.q.len() != nq {
        return Err(MultibodyError::DimensionMismatch {
            what: "q",
            expected: nq,
            got: state.q.len(),
        });
    }
    if state.qdot.len() != nq {
        return Err(MultibodyError::DimensionMismatch {
            what: "qdot",
            expected: nq,
            got: state.qdot.len(),
        });
    }
    if state.q.iter().chain(state.qdot.iter()).any(|v| !v.is_finite()) {
        return Err(MultibodyError::NonFinite("state"));
    }
    Ok(())
}

/// Joint-space mass matrix `M(q)`, symmetric positive definite for any
/// validated model with positive total mass. Assembled as
/// `sum_i (m_i Jc_i^T Jc_i + I_i jw_i^T jw_i)` over segments.
pub fn mass_matrix(model: &Model, q: &DVector<f64>) -> Result<DMatrix<f64>, MultibodyError> {
    if q.len() != model.nq() {
        return Err(MultibodyError::DimensionMismatch {
            what: "q",
            expected: model.nq(),
            got: q.len(),
        });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(MultibodyError::NonFinite("q"));
    }
    let nq = model.nq();
    let frames = model.frames(q);
    let mut m = DMatrix::zeros(nq, nq);
    for (i, s) in model.segments().iter().enumerate() {
        if s.mass == 0.0 && s.inertia_zz == 0.0 {
            continue;
        }
        let jc = model.point_jacobian_raw(&frames, i, s.com_offset);
        let jw = model.angular_jacobian(&frames, i);
        m.gemm_tr(s.mass, &jc, &jc, 1.0);
        m.ger(s.inertia_zz, &jw, &jw, 1.0);
    }
    Ok(m)
}

/// Combined Coriolis/centrifugal and gravity bias `c(q, qd)`, with the sign
/// convention `M qdd + c = tau`. At `qd = 0` this equals `+dV/dq` for the
/// gravitational potential `V = sum_i m_i * (-gravity . com_i)`.
///
/// In a planar tree the angular bias acceleration is identically zero, so
/// only COM translational terms contribute.
pub fn nonlinear_effects(
    model: &Model,
    state: &DynamicsState,
) -> Result<DVector<f64>, MultibodyError> {
    check_state(model, state)?;
    let frames = model.frames(&state.q);
    let vel = model.velocities(&frames, &state.qdot);
    let bias = model.bias_accelerations(&frames, &vel);
    let g = model.gravity();
    let mut c = DVector::zeros(model.nq());
    for (i, s) in model.segments().iter().enumerate() {
        if s.mass == 0.0 {
            continue;
        }
        let jc = model.point_jacobian_raw(&frames, i, s.com_offset);
        let f = s.mass * (bias.a_com[i] - g);
        c.gemv_tr(1.0, &jc, &DVector::from_vec(vec![f.x, f.y]), 1.0);
    }
    Ok(c)
}

/// Unconstrained forward dynamics: `qdd = M^{-1}(tau - c)`.
pub fn forward_dynamics(
    model: &Model,
    state: &DynamicsState,
    tau: &DVector<f64>,
) -> Result<DVector<f64>, MultibodyError> {
    check_state(model, state)?;
    if tau.len() != model.nq() {
        return Err(MultibodyError::DimensionMismatch {
            what: "tau",
            expected: model.nq(),
            got: tau.len(),
        });
    }
    if tau.iter().any(|v| !v.is_finite()) {
        return Err(MultibodyError::NonFinite("tau"));
    }
    let m = mass_matrix(model, &state.q)?;
    let c = nonlinear_effects(model, state)?;
    let chol = m.cholesky().ok_or(MultibodyError::SingularMassMatrix)?;
    Ok(chol.solve(&(tau - c)))
}

/// Cholesky factorization with a conditioned pivot check: fails with the
/// offending row if any pivot drops below `SCHUR_PIVOT_THRESHOLD` times the
/// largest diagonal entry.
fn checked_cholesky(s: &DMatrix<f64>) -> Result<DMatrix<f64>, MultibodyError> {
    let n = s.nrows();
    let mut l = s.clone();
    let max_diag = (0..n).map(|i| s[(i, i)].abs()).fold(0.0_f64, f64::max);
    let threshold = SCHUR_PIVOT_THRESHOLD * max_diag.max(1e-300);
    for j in 0..n {
        let mut d = l[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= threshold {
            return Err(MultibodyError::SingularConstraint { pivot: d, row: j });
        }
        let d_sqrt = d.sqrt();
        l[(j, j)] = d_sqrt;
        for i in (j + 1)..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d_sqrt;
        }
    }
    // Zero the upper triangle so the factor is usable directly.
    for j in 1..n {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
    Ok(l)
}

/// Solves `S lambda = b` for the Schur complement `S = G M^-1 G^T`.
///
/// Well-conditioned sets go through Cholesky. When that fails the
/// constraint rows are (nearly) linearly dependent; physically the force
/// distribution is then statically indeterminate, like a four-legged
/// table. In that case the minimal-norm solution is returned instead,
/// dropping eigendirections below [`SCHUR_PIVOT_THRESHOLD`] relative to
/// the largest eigenvalue. For consistent redundancy (duplicated or
/// dependent rows of a reachable constraint set) the accelerations are
/// unaffected by this choice; the redundant force directions lie in the
/// null space of `G^T` and cancel out of the dynamics.
fn schur_solve(s: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, MultibodyError> {
    if let Ok(l) = checked_cholesky(s) {
        return Ok(cholesky_solve(&l, b));
    }
    let eig = s.clone().symmetric_eigen();
    let largest = eig.eigenvalues.amax();
    if !(largest > 0.0) {
        return Err(MultibodyError::SingularConstraint {
            pivot: largest,
            row: 0,
        });
    }
    let cutoff = SCHUR_PIVOT_THRESHOLD * largest;
    let mut coeffs = eig.eigenvectors.tr_mul(b);
    for (c, ev) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        if *ev > cutoff {
            *c /= *ev;
        } else {
            *c = 0.0;
        }
    }
    Ok(&eig.eigenvectors * coeffs)
}

fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[(i, k)] * v;
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[(k, i)] * v;
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Constrained forward dynamics via the KKT system
///
/// ```text
/// [ M  -G^T ] [ qdd    ]   [ tau - c   ]
/// [ G   0   ] [ lambda ] = [ -Gdot qd  ]
/// ```
///
/// solved by a blocked elimination: Cholesky of `M`, then the Schur
/// complement `S = G M^{-1} G^T` (see [`schur_solve`] for how redundant
/// constraint sets are handled). Returns the joint accelerations and the
/// constraint force vector `lambda` (N), ordered like the constraint rows;
/// for statically indeterminate sets `lambda` is the minimal-norm choice.
pub fn constrained_forward_dynamics(
    model: &Model,
    state: &DynamicsState,
    tau: &DVector<f64>,
    constraints: &ConstraintSet,
) -> Result<(DVector<f64>, DVector<f64>), MultibodyError> {
    check_state(model, state)?;
    if tau.len() != model.nq() {
        return Err(MultibodyError::DimensionMismatch {
            what: "tau",
            expected: model.nq(),
            got: tau.len(),
        });
    }
    if tau.iter().any(|v| !v.is_finite()) {
        return Err(MultibodyError::NonFinite("tau"));
    }
    if constraints.is_empty() {
        let qdd = forward_dynamics(model, state, tau)?;
        return Ok((qdd, DVector::zeros(0)));
    }

    let m = mass_matrix(model, &state.q)?;
    let c = nonlinear_effects(model, state)?;
    let g = constraints.jacobian(model, &state.q)?;
    let gamma = constraints.gdot_qdot(model, &state.q, &state.qdot)?;

    let chol_m = m.cholesky().ok_or(MultibodyError::SingularMassMatrix)?;
    let rhs = tau - c;
    let minv_rhs = chol_m.solve(&rhs);
    let mut minv_gt = g.transpose();
    chol_m.solve_mut(&mut minv_gt);
    let s = &g * &minv_gt;

    let lambda = schur_solve(&s, &(-(&gamma) - &g * &minv_rhs))?;
    let qdd = minv_rhs + &minv_gt * &lambda;
    Ok((qdd, lambda))
}

/// Max-norm residual of the KKT system at a proposed `(qdd, lambda)`:
/// the dynamics rows `M qdd + c - tau - G^T lambda` stacked with the
/// constraint rows `G qdd + Gdot qd`.
pub fn kkt_residual(
    model: &Model,
    state: &DynamicsState,
    tau: &DVector<f64>,
    constraints: &ConstraintSet,
    qdd: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64, MultibodyError> {
    check_state(model, state)?;
    let m = mass_matrix(model, &state.q)?;
    let c = nonlinear_effects(model, state)?;
    let mut top = &m * qdd + &c - tau;
    let mut bottom = DVector::zeros(0);
    if !constraints.is_empty() {
        let g = constraints.jacobian(model, &state.q)?;
        let gamma = constraints.gdot_qdot(model, &state.q, &state.qdot)?;
        top -= g.transpose() * lambda;
        bottom = &g * qdd + gamma;
    }
    let r_top = top.amax();
    let r_bottom = if bottom.is_empty() { 0.0 } else { bottom.amax() };
    Ok(r_top.max(r_bottom))
}

/// Total kinetic energy `sum_i (1/2 m v_com^2 + 1/2 I w^2)`.
pub fn kinetic_energy(model: &Model, state: &DynamicsState) -> Result<f64, MultibodyError> {
    check_state(model, state)?;
    let frames = model.frames(&state.q);
    let vel = model.velocities(&frames, &state.qdot);
    let mut t = 0.0;
    for (i, s) in model.segments().iter().enumerate() {
        t += 0.5 * s.mass * vel.v_com[i].norm_squared()
            + 0.5 * s.inertia_zz * vel.omega[i] * vel.omega[i];
    }
    Ok(t)
}

/// Gravitational potential energy `V = -sum_i m_i gravity . com_i`,
/// increasing with height for downward gravity.
pub fn potential_energy(model: &Model, q: &DVector<f64>) -> Result<f64, MultibodyError> {
    if q.len() != model.nq() {
        return Err(MultibodyError::DimensionMismatch {
            what: "q",
            expected: model.nq(),
            got: q.len(),
        });
    }
    let frames = model.frames(q);
    let g = model.gravity();
    let mut v = 0.0;
    for (i, s) in model.segments().iter().enumerate() {
        v -= s.mass * g.dot(&frames.com[i]);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibody::chains::n_link_chain;
    use crate::multibody::{ConstraintAxes, PointConstraint};
    use approx::assert_relative_eq;

    #[test]
    fn mass_matrix_is_symmetric_and_spd() {
        let m = n_link_chain(3);
        let q = DVector::from_vec(vec![0.3, -0.2, 0.5, -0.9, 1.2, 0.4]);
        let mm = mass_matrix(&m, &q).unwrap();
        assert_relative_eq!(mm.clone(), mm.transpose(), epsilon = 1e-12);
        assert!(mm.clone().cholesky().is_some());
        // Base translation block equals total mass times identity.
        assert_relative_eq!(mm[(0, 0)], m.total_mass(), epsilon = 1e-12);
        assert_relative_eq!(mm[(1, 1)], m.total_mass(), epsilon = 1e-12);
        assert_relative_eq!(mm[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mass_matrix_rejects_non_finite() {
        let m = n_link_chain(1);
        let mut q = DVector::zeros(m.nq());
        q[3] = f64::INFINITY;
        assert!(matches!(
            mass_matrix(&m, &q),
            Err(MultibodyError::NonFinite(_))
        ));
    }

    #[test]
    fn coriolis_vanishes_at_rest_leaving_gravity() {
        // At qd = 0, c must equal the gravity load +dV/dq (checked by FD).
        let m = n_link_chain(2);
        let q = DVector::from_vec(vec![0.1, 0.4, -0.3, 0.8, -1.1]);
        let state = DynamicsState::new(q.clone(), DVector::zeros(m.nq()));
        let c = nonlinear_effects(&m, &state).unwrap();
        let h = 1e-6;
        for k in 0..m.nq() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            let dv = (potential_energy(&m, &qp).unwrap() - potential_energy(&m, &qm).unwrap())
                / (2.0 * h);
            assert_relative_eq!(c[k], dv, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn constrained_dynamics_keeps_point_still() {
        let m = n_link_chain(2);
        let q = DVector::from_vec(vec![0.0, 0.0, 0.2, -0.4, 0.6]);
        let frames = m.frames(&q);
        let anchor = m.point_world(&frames, "tip").unwrap();
        let set = ConstraintSet::new(vec![PointConstraint {
            point: "tip".into(),
            axes: ConstraintAxes::Xz,
            anchor,
        }]);
        // Consistent velocity: project a random qd onto the constraint null space.
        let g = set.jacobian(&m, &q).unwrap();
        let qd_raw = DVector::from_vec(vec![0.5, -0.3, 0.7, 0.9, -0.2]);
        let gt = g.transpose();
        let ggt = &g * &gt;
        let corr = &gt * ggt.clone().lu().solve(&(&g * &qd_raw)).unwrap();
        let qd = &qd_raw - corr;
        let state = DynamicsState::new(q.clone(), qd.clone());
        assert!((&g * &qd).amax() < 1e-12);

        let tau = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.3, -0.5]);
        let (qdd, lambda) = constrained_forward_dynamics(&m, &state, &tau, &set).unwrap();
        assert_eq!(lambda.len(), 2);
        let r = kkt_residual(&m, &state, &tau, &set, &qdd, &lambda).unwrap();
        assert!(r < 1e-8, "KKT residual {r}");
        // Point velocity stays zero; its acceleration equals -Gdot qd which
        // the KKT row already encodes.
        let vel = m.velocities(&m.frames(&q), &qd);
        let p = m.point("tip").unwrap().clone();
        let v = m.point_velocity_raw(&m.frames(&q), &vel, p.segment, p.local);
        assert!(v.norm() < 1e-8);
    }

    #[test]
    fn redundant_constraints_split_the_force_minimally() {
        let m = n_link_chain(2);
        let q = DVector::from_vec(vec![0.0, 0.0, 0.2, -0.4, 0.6]);
        let frames = m.frames(&q);
        let anchor = m.point_world(&frames, "tip").unwrap();
        let dup = PointConstraint {
            point: "tip".into(),
            axes: ConstraintAxes::Xz,
            anchor,
        };
        let single = ConstraintSet::new(vec![dup.clone()]);
        let doubled = ConstraintSet::new(vec![dup.clone(), dup]);
        let state = DynamicsState::new(q, DVector::zeros(m.nq()));
        let tau = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.3, -0.5]);

        let (qdd1, lam1) = constrained_forward_dynamics(&m, &state, &tau, &single).unwrap();
        let (qdd2, lam2) = constrained_forward_dynamics(&m, &state, &tau, &doubled).unwrap();
        // Accelerations do not depend on how the indeterminate force is
        // distributed, and the minimal-norm split gives each copy half.
        assert!((qdd1 - &qdd2).amax() < 1e-9);
        for i in 0..2 {
            assert_relative_eq!(lam2[i], 0.5 * lam1[i], max_relative = 1e-8);
            assert_relative_eq!(lam2[i + 2], 0.5 * lam1[i], max_relative = 1e-8);
        }
        let r = kkt_residual(&m, &state, &tau, &doubled, &qdd2, &lam2).unwrap();
        assert!(r < 1e-8, "KKT residual {r}");
    }

    #[test]
    fn energy_functions_are_consistent_with_work_rate() {
        // d/dt (T + V) = qd . tau for unconstrained motion.
        let m = n_link_chain(2);
        let q = DVector::from_vec(vec![0.2, -0.1, 0.4, -0.7, 0.9]);
        let qd = DVector::from_vec(vec![0.3, 0.6, -0.5, 1.0, -0.8]);
        let tau = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.5, -0.4]);
        let state = DynamicsState::new(q.clone(), qd.clone());
        let qdd = forward_dynamics(&m, &state, &tau).unwrap();
        let h = 1e-6;
        let e = |dt: f64| {
            let qn = &q + &qd * dt + &qdd * (0.5 * dt * dt);
            let qdn = &qd + &qdd * dt;
            let s = DynamicsState::new(qn.clone(), qdn);
            kinetic_energy(&m, &s).unwrap() + potential_energy(&m, &qn).unwrap()
        };
        let de_dt = (e(h) - e(-h)) / (2.0 * h);
        assert_relative_eq!(de_dt, qd.dot(&tau), epsilon = 1e-5, max_relative = 1e-5);
    }
}
