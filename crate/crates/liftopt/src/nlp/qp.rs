//! Dense strictly convex quadratic programming by the dual active-set
//! method of Goldfarb and Idnani (Mathematical Programming 27, 1983).
//!
//! Solves
//!
//! ```text
//! minimize    1/2 x' B x + g' x
//! subject to  A_eq x  = b_eq
//!             A_in x >= b_in
//! ```
//!
//! with `B` symmetric positive definite. The method starts at the
//! unconstrained minimizer (always dual feasible, so no phase-1 problem is
//! needed) and adds violated constraints one at a time, maintaining a QR
//! factorization of the active normals in the metric of `B`. Equality rows
//! are processed before any inequality and are never dropped from the
//! active set. An equality row that is linearly dependent on the active
//! set is skipped when its residual is already consistent (within
//! [`DEPENDENT_EQ_TOL`]), and reported in [`QpSolution::skipped_eq`];
//! an inconsistent dependent row makes the problem infeasible.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("{kind} constraint {index} is infeasible with the active set")]
    Infeasible { kind: &'static str, index: usize },
    #[error("active-set iteration limit exceeded")]
    IterationLimit,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Residual below which a linearly dependent equality row counts as
/// satisfied and is skipped, relative to the row's scale and to the size
/// of the solution. The tolerance must sit above the noise floor of
/// finite-difference Jacobians: a structurally redundant row (say, a path
/// constraint at a node whose state is already pinned by a boundary row)
/// reproduces the active span only up to the differencing error, and its
/// residual is that noise direction dotted with the solution vector, not
/// a sign of infeasibility.
pub const DEPENDENT_EQ_TOL: f64 = 1e-4;

/// A constraint normal whose component outside the active span is below
/// this fraction of its length is treated as linearly dependent. Kept well
/// above machine precision: finite-difference rows carry relative noise
/// around 1e-7, and stepping along a direction made of that noise divides
/// by its squared length.
const DEPENDENT_DIR_TOL: f64 = 1e-6;

/// Below this fraction a normal is dependent at machine precision: no
/// reinstatement can save an inconsistent equality row whose independent
/// component is this small, so the problem is declared infeasible.
const HARD_DEP_TOL: f64 = 1e-13;

/// Constraint rows with a norm below this are practically zero and are
/// not blown up to unit size by the equilibration.
const ROW_FLOOR: f64 = 1e-8;

/// Violation threshold for adding a constraint, relative to row scale.
const ADD_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows (signed).
    pub lambda_eq: DVector<f64>,
    /// Multipliers of the inequality rows (nonnegative).
    pub mu_in: DVector<f64>,
    /// Number of constraint additions performed.
    pub iterations: usize,
    /// Equality rows skipped as consistent duplicates of the active set.
    pub skipped_eq: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Eq,
    Ineq,
}

struct Workspace {
    /// Orthogonal-in-B basis, `J = L^-T Q`.
    j: DMatrix<f64>,
    /// Upper triangular factor of the active normals, first `r` columns.
    r: DMatrix<f64>,
    active: Vec<(Kind, usize, f64)>,
    u: Vec<f64>,
    active_in: Vec<bool>,
}

pub fn solve_qp(
    b: &DMatrix<f64>,
    g: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    a_in: &DMatrix<f64>,
    b_in: &DVector<f64>,
) -> Result<QpSolution, QpError> {
    let n = g.len();
    let (m_eq, m_in) = (b_eq.len(), b_in.len());
    if b.nrows() != n || b.ncols() != n {
        return Err(QpError::Dimension(format!(
            "hessian is {}x{}, expected {n}x{n}",
            b.nrows(),
            b.ncols()
        )));
    }
    if a_eq.nrows() != m_eq || (m_eq > 0 && a_eq.ncols() != n) {
        return Err(QpError::Dimension("equality jacobian shape".to_string()));
    }
    if a_in.nrows() != m_in || (m_in > 0 && a_in.ncols() != n) {
        return Err(QpError::Dimension("inequality jacobian shape".to_string()));
    }

    let chol = b.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let l = chol.l();
    let mut x = -chol.solve(g);

    // Row equilibration. Constraint rows arriving here can differ in norm
    // by many orders of magnitude (a Jacobian row grows without bound when
    // the underlying model passes through a stiff region), and every test
    // below - dependence, slack, blocking multiplier - reads best on rows
    // of unit size. Multipliers are mapped back to the caller's row
    // scaling on exit. Rows below the floor are practically zero; their
    // direction is noise and is not amplified.
    let eq_factor: Vec<f64> = (0..m_eq)
        .map(|i| 1.0 / a_eq.row(i).norm().max(ROW_FLOOR))
        .collect();
    let in_factor: Vec<f64> = (0..m_in)
        .map(|i| 1.0 / a_in.row(i).norm().max(ROW_FLOOR))
        .collect();
    let mut a_eq_s = a_eq.clone_owned();
    let mut b_eq_s = b_eq.clone_owned();
    for i in 0..m_eq {
        a_eq_s.row_mut(i).scale_mut(eq_factor[i]);
        b_eq_s[i] *= eq_factor[i];
    }
    let mut a_in_s = a_in.clone_owned();
    let mut b_in_s = b_in.clone_owned();
    for i in 0..m_in {
        a_in_s.row_mut(i).scale_mut(in_factor[i]);
        b_in_s[i] *= in_factor[i];
    }
    let (a_eq, b_eq, a_in, b_in) = (&a_eq_s, &b_eq_s, &a_in_s, &b_in_s);

    let eq_scale: Vec<f64> = (0..m_eq).map(|i| a_eq.row(i).norm().max(1.0)).collect();
    let in_scale: Vec<f64> = (0..m_in).map(|i| a_in.row(i).norm().max(1.0)).collect();
    let mut skipped_eq: Vec<usize> = Vec::new();
    let mut iterations = 0usize;
    let limit = 50 * (n + m_eq + m_in) + 100;

    // Equality phase, done in one batch: a Householder factorization of all
    // equality normals in the metric of B. Entering the rows one at a time
    // through the rank-one update machinery accumulates enough rounding on
    // problems with hundreds of equality rows to corrupt the inequality
    // phase that follows.
    //
    // Rows whose transformed normal lies almost in the span of the others
    // are set aside first and checked against the solution afterwards. A
    // set-aside row that comes back inconsistent was not redundant after
    // all (its small independent component carries real information, it was
    // just compressed by the metric), so it is forced back in and the
    // factorization repeats. Only a row that is dependent at machine
    // precision can prove infeasibility.
    let x0 = x.clone();
    let nt_all = l
        .solve_lower_triangular(&a_eq.transpose())
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut forced = vec![false; m_eq];
    let mut ws = loop {
        let mut keep: Vec<usize> = (0..m_eq).collect();
        x = x0.clone();
        skipped_eq.clear();
        // Prune until the kept set is clean: eliminating a nearly dependent
        // column can leave the factors of the ones after it unreliable.
        let mut qr;
        loop {
            let mut nt = DMatrix::zeros(n, keep.len());
            for (c, &i) in keep.iter().enumerate() {
                nt.column_mut(c).copy_from(&nt_all.column(i));
            }
            qr = nt.clone().qr();
            let r_mat = qr.r();
            let mut dependent = Vec::new();
            for c in 0..keep.len() {
                let ratio = if c >= n {
                    0.0
                } else {
                    r_mat[(c, c)].abs() / nt.column(c).norm().max(f64::MIN_POSITIVE)
                };
                if ratio > DEPENDENT_DIR_TOL {
                    continue;
                }
                if forced[keep[c]] {
                    if ratio <= HARD_DEP_TOL {
                        // Inconsistent earlier, and indistinguishable from
                        // the span of the rows before it even at full
                        // precision: a genuine contradiction.
                        return Err(QpError::Infeasible {
                            kind: "equality",
                            index: keep[c],
                        });
                    }
                    // Keep it, accepting the tiny pivot it brings.
                    continue;
                }
                dependent.push(c);
            }
            if dependent.is_empty() {
                break;
            }
            for &c in dependent.iter().rev() {
                keep.remove(c);
            }
        }

        let r_act = keep.len();
        // Full orthogonal factor: Q^T = reflectors applied to the identity.
        let mut q_t = DMatrix::identity(n, n);
        qr.q_tr_mul(&mut q_t);
        let j = l
            .transpose()
            .solve_upper_triangular(&q_t.transpose())
            .ok_or(QpError::NotPositiveDefinite)?;
        let mut r = DMatrix::zeros(n, n);
        if r_act > 0 {
            r.view_mut((0, 0), (r_act, r_act))
                .copy_from(&qr.r().view((0, 0), (r_act, r_act)));
        }

        // Step onto the equality manifold and recover the multipliers:
        // with w solving R^T w = b - N^T x, the step is J1 w and the
        // multipliers solve R u = w.
        let mut u = Vec::with_capacity(r_act);
        if r_act > 0 {
            let resid = DVector::from_fn(r_act, |c, _| {
                b_eq[keep[c]] - a_eq.row(keep[c]).dot(&x.transpose())
            });
            let r_tri = r.view((0, 0), (r_act, r_act)).clone_owned();
            let w = r_tri
                .transpose()
                .solve_lower_triangular(&resid)
                .ok_or(QpError::NotPositiveDefinite)?;
            x += j.columns(0, r_act) * &w;
            let u_vec = r_tri
                .solve_upper_triangular(&w)
                .ok_or(QpError::NotPositiveDefinite)?;
            u.extend(u_vec.iter().copied());
        }
        iterations += r_act;

        let mut active_eq = vec![false; m_eq];
        for &i in &keep {
            active_eq[i] = true;
        }
        // Rows set aside must be consistent with the kept ones. The
        // residual of a redundant row is its noise component dotted with
        // the solution, so the tolerance grows with the solution size.
        let x_ref = 1.0 + x.norm();
        let mut reinstated = false;
        for i in 0..m_eq {
            if active_eq[i] {
                continue;
            }
            let resid = a_eq.row(i).dot(&x.transpose()) - b_eq[i];
            if resid.abs() <= DEPENDENT_EQ_TOL * eq_scale[i] * x_ref {
                skipped_eq.push(i);
            } else {
                log::debug!(
                    "qp reinstating equality {i}: resid={resid:.3e} scale={:.3e}",
                    eq_scale[i]
                );
                forced[i] = true;
                reinstated = true;
            }
        }
        if reinstated {
            continue;
        }

        break Workspace {
            j,
            r,
            active: keep.iter().map(|&i| (Kind::Eq, i, 1.0)).collect(),
            u,
            active_in: vec![false; m_in],
        };
    };

    loop {
        // Pick the most violated inactive inequality.
        let mut pick: Option<usize> = None;
        if m_in > 0 {
            let s_in = a_in * &x - b_in;
            let mut worst = ADD_TOL;
            for i in 0..m_in {
                if ws.active_in[i] {
                    continue;
                }
                let v = -s_in[i] / in_scale[i];
                if v > worst {
                    worst = v;
                    pick = Some(i);
                }
            }
        }
        let Some(idx) = pick else {
            break;
        };

        let normal: DVector<f64> = a_in.row(idx).transpose();
        let mut u_add = 0.0;

        // Inner loop: take primal/dual steps until the chosen constraint
        // is satisfied (full step) or infeasibility is proven.
        loop {
            iterations += 1;
            if iterations > limit {
                return Err(QpError::IterationLimit);
            }
            // Recompute the slack from scratch; tracking it incrementally
            // across partial steps drifts badly on long walks.
            let slack = normal.dot(&x) - b_in[idx];
            let r = ws.active.len();
            let d = ws.j.tr_mul(&normal);
            // Step direction in primal space: z = J2 d2.
            let z: DVector<f64> = if r < n {
                ws.j.columns(r, n - r) * d.rows(r, n - r)
            } else {
                DVector::zeros(n)
            };
            // Dual step direction: r_vec = R^-1 d1 (back substitution).
            let mut r_vec = vec![0.0; r];
            for i in (0..r).rev() {
                let mut acc = d[i];
                for k in i + 1..r {
                    acc -= ws.r[(i, k)] * r_vec[k];
                }
                r_vec[i] = acc / ws.r[(i, i)];
            }

            // Largest dual step before an inequality multiplier hits zero.
            let mut t1 = f64::INFINITY;
            let mut blocking = usize::MAX;
            for k in 0..r {
                if ws.active[k].0 == Kind::Ineq && r_vec[k] > 1e-14 {
                    let t = ws.u[k] / r_vec[k];
                    if t < t1 {
                        t1 = t;
                        blocking = k;
                    }
                }
            }
            // Step that brings the new constraint's slack to zero. In exact
            // arithmetic z . normal = |d2|^2, and z vanishes iff the tail of
            // the transformed normal does, so the dependence test compares
            // that tail against the whole of d. A relative test is essential:
            // the absolute size of d scales with the Hessian factor, and a
            // badly scaled B would otherwise make every normal look dependent.
            let d_norm2 = d.norm_squared();
            let d_tail2 = if r < n {
                d.rows(r, n - r).norm_squared()
            } else {
                0.0
            };
            let t2 = if d_tail2 <= DEPENDENT_DIR_TOL * DEPENDENT_DIR_TOL * d_norm2 {
                f64::INFINITY
            } else {
                (-slack / d_tail2).max(0.0)
            };

            if !t1.is_finite() && !t2.is_finite() {
                log::debug!(
                    "qp infeasible at ineq {idx}: slack={slack:.3e} scale={:.3e} \
                     rel={:.3e} d2/d={:.3e} active={r}/{n}",
                    in_scale[idx],
                    slack.abs() / in_scale[idx],
                    (d_tail2 / d_norm2).sqrt(),
                );
                return Err(QpError::Infeasible {
                    kind: "inequality",
                    index: idx,
                });
            }

            let step = t1.min(t2);
            if t2.is_finite() {
                x.axpy(step, &z, 1.0);
            }
            for k in 0..r {
                ws.u[k] -= step * r_vec[k];
            }
            u_add += step;

            if t2 <= t1 {
                // Full step: the constraint becomes active.
                ws.u.push(u_add);
                ws.active.push((Kind::Ineq, idx, 1.0));
                ws.active_in[idx] = true;
                qr_insert(&mut ws, &d);
                break;
            }
            // Partial step: drop the blocking inequality, then retry.
            ws.active_in[ws.active[blocking].1] = false;
            qr_delete(&mut ws, blocking);
            ws.u.remove(blocking);
            ws.active.remove(blocking);
        }
    }

    // Multipliers of the scaled rows, mapped back to the caller's scaling.
    let mut lambda_eq = DVector::zeros(m_eq);
    let mut mu_in = DVector::zeros(m_in);
    for (k, &(kind, idx, direc)) in ws.active.iter().enumerate() {
        match kind {
            Kind::Eq => lambda_eq[idx] = direc * ws.u[k] * eq_factor[idx],
            Kind::Ineq => mu_in[idx] = ws.u[k] * in_factor[idx],
        }
    }
    Ok(QpSolution {
        x,
        lambda_eq,
        mu_in,
        iterations,
        skipped_eq,
    })
}

/// Appends the constraint whose transformed normal is `d` as active column
/// `r`: Givens rotations zero `d[r+1..]`, the same rotations mix the
/// corresponding columns of `J`, and the surviving head of `d` becomes the
/// new column of `R`.
fn qr_insert(ws: &mut Workspace, d: &DVector<f64>) {
    let n = ws.j.nrows();
    let r = ws.active.len() - 1;
    let mut d = d.clone();
    for i in (r + 1..n).rev() {
        if d[i] == 0.0 {
            continue;
        }
        let (gc, gs, h) = givens(d[i - 1], d[i]);
        d[i - 1] = h;
        rotate_columns(&mut ws.j, i - 1, i, gc, gs);
    }
    for k in 0..=r.min(n - 1) {
        ws.r[(k, r)] = d[k];
    }
}

/// Removes active column `k`: shifts the later columns of `R` left, then
/// re-triangularizes with row rotations mirrored onto the columns of `J`.
fn qr_delete(ws: &mut Workspace, k: usize) {
    let r = ws.active.len();
    for col in k..r - 1 {
        for row in 0..r {
            ws.r[(row, col)] = ws.r[(row, col + 1)];
        }
    }
    for row in 0..r {
        ws.r[(row, r - 1)] = 0.0;
    }
    for i in k..r - 1 {
        let (a, b) = (ws.r[(i, i)], ws.r[(i + 1, i)]);
        if b == 0.0 {
            continue;
        }
        let (gc, gs, h) = givens(a, b);
        ws.r[(i, i)] = h;
        ws.r[(i + 1, i)] = 0.0;
        for col in i + 1..r - 1 {
            let (p, q) = (ws.r[(i, col)], ws.r[(i + 1, col)]);
            ws.r[(i, col)] = gc * p + gs * q;
            ws.r[(i + 1, col)] = -gs * p + gc * q;
        }
        rotate_columns(&mut ws.j, i, i + 1, gc, gs);
    }
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b).copysign(a);
    (a / h, b / h, h)
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, k: usize, gc: f64, gs: f64) {
    for row in 0..m.nrows() {
        let (p, q) = (m[(row, i)], m[(row, k)]);
        m[(row, i)] = gc * p + gs * q;
        m[(row, k)] = -gs * p + gc * q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn empty(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    }

    #[test]
    fn unconstrained_minimum() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let g = DVector::from_vec(vec![-2.0, -8.0]);
        let (ae, be) = empty(2);
        let (ai, bi) = empty(2);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[1], 2.0, epsilon = 1e-12);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn single_active_inequality() {
        // minimize 1/2 x'x + x0  subject to x0 + 2 x1 >= 1.
        let b = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let ai = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let bi = DVector::from_vec(vec![1.0]);
        let (ae, be) = empty(2);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_relative_eq!(sol.x[0], -0.6, epsilon = 1e-10);
        assert_relative_eq!(sol.x[1], 0.8, epsilon = 1e-10);
        assert!(sol.mu_in[0] > 0.0);
    }

    #[test]
    fn equality_and_bounds() {
        // minimize 1/2 |x|^2 - x2  s.t.  sum x = 1,  x >= 0, x <= 0.6.
        let n = 3;
        let b = DMatrix::identity(n, n);
        let g = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        let ae = DMatrix::from_row_slice(1, n, &[1.0, 1.0, 1.0]);
        let be = DVector::from_vec(vec![1.0]);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            let mut lo = vec![0.0; n];
            lo[i] = 1.0;
            rows.extend_from_slice(&lo);
            rhs.push(0.0);
            let mut hi = vec![0.0; n];
            hi[i] = -1.0;
            rows.extend_from_slice(&hi);
            rhs.push(-0.6);
        }
        let ai = DMatrix::from_row_slice(2 * n, n, &rows);
        let bi = DVector::from_vec(rhs);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_relative_eq!(sol.x.sum(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.x[2], 0.6, epsilon = 1e-10);
        assert_relative_eq!(sol.x[0], 0.2, epsilon = 1e-10);
        assert_relative_eq!(sol.x[1], 0.2, epsilon = 1e-10);
    }

    #[test]
    fn kkt_stationarity_holds() {
        let b = DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 1.0, 0.2, 1.0, 3.0, 0.5, 0.2, 0.5, 2.0],
        );
        let g = DVector::from_vec(vec![-1.0, 2.0, -3.0]);
        let ae = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.5]);
        let be = DVector::from_vec(vec![0.3]);
        let ai = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let bi = DVector::from_vec(vec![0.5, -0.1]);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        // B x + g - Aeq' lambda - Ain' mu = 0.
        let resid = &b * &sol.x + &g
            - ae.tr_mul(&sol.lambda_eq)
            - ai.tr_mul(&sol.mu_in);
        assert_relative_eq!(resid.norm(), 0.0, epsilon = 1e-9);
        // Primal feasibility and complementarity.
        assert_relative_eq!((ae * &sol.x - be).norm(), 0.0, epsilon = 1e-9);
        let s = ai * &sol.x - bi;
        for i in 0..2 {
            assert!(s[i] >= -1e-10);
            assert!(sol.mu_in[i] >= 0.0);
            assert!(sol.mu_in[i] * s[i] < 1e-8);
        }
    }

    #[test]
    fn consistent_dependent_equality_is_skipped() {
        let b = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, -1.0]);
        // Second row is exactly twice the first.
        let ae = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let be = DVector::from_vec(vec![1.0, 2.0]);
        let (ai, bi) = empty(2);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_eq!(sol.skipped_eq, vec![1]);
        assert_relative_eq!(sol.x[0] + sol.x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn inconsistent_dependent_equality_errors() {
        let b = DMatrix::identity(2, 2);
        let g = DVector::zeros(2);
        let ae = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let be = DVector::from_vec(vec![1.0, 3.0]);
        let (ai, bi) = empty(2);
        assert!(matches!(
            solve_qp(&b, &g, &ae, &be, &ai, &bi),
            Err(QpError::Infeasible { kind: "equality", .. })
        ));
    }

    #[test]
    fn contradictory_inequalities_error() {
        let b = DMatrix::identity(1, 1);
        let g = DVector::zeros(1);
        let ai = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let bi = DVector::from_vec(vec![1.0, 0.0]);
        let (ae, be) = empty(1);
        assert!(matches!(
            solve_qp(&b, &g, &ae, &be, &ai, &bi),
            Err(QpError::Infeasible { .. })
        ));
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = DVector::zeros(2);
        let (ae, be) = empty(2);
        let (ai, bi) = empty(2);
        assert!(matches!(
            solve_qp(&b, &g, &ae, &be, &ai, &bi),
            Err(QpError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn cycling_through_drops_recovers() {
        // A case where the first added inequality must be dropped again:
        // strongly coupled constraints competing over the same variables.
        let b = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-10.0, -10.0]);
        let ai = DMatrix::from_row_slice(
            3,
            2,
            &[-1.0, 0.0, 0.0, -1.0, -1.0, -1.0],
        );
        let bi = DVector::from_vec(vec![-4.0, -4.0, -6.0]);
        let (ae, be) = empty(2);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_relative_eq!(sol.x[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn matches_reference_solution_on_dense_problem() {
        // Reference values computed with an independent active-set solve
        // by hand: minimize 1/2 x'Bx + g'x with B = diag(2,2,2),
        // g = (10, 10, 30), s.t. x0 + x1 >= 4, x2 >= -1, x0 <= 3.
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 2.0]));
        let g = DVector::from_vec(vec![10.0, 10.0, 30.0]);
        let ai = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
        );
        let bi = DVector::from_vec(vec![4.0, -1.0, -3.0]);
        let (ae, be) = empty(3);
        let sol = solve_qp(&b, &g, &ae, &be, &ai, &bi).unwrap();
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], 2.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[2], -1.0, epsilon = 1e-9);
    }
}
