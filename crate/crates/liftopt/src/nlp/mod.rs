//! Sequential quadratic programming for smooth nonlinear programs.
//!
//! The solver targets problems of the form
//!
//! ```text
//! minimize    f(x)
//! subject to  c_eq(x)  = 0
//!             c_in(x) >= 0
//!             lo <= x <= hi
//! ```
//!
//! and works as follows. At each iterate a strictly convex quadratic
//! subproblem is built from a damped BFGS approximation of the Lagrangian
//! Hessian and the linearized constraints, and solved with the dual
//! active-set method in [`qp`]. The step is globalized by an l1 exact
//! penalty line search with a second-order correction on the first
//! rejection, and the penalty weight tracks the largest multiplier seen.
//! If the linearized constraints are inconsistent, the subproblem is
//! retried with the constraint right-hand sides relaxed toward zero, which
//! always ends at a feasible subproblem because the iterate itself remains
//! inside the bounds.
//!
//! Variables are scaled once by [`Problem::variable_scale`] and constraint
//! rows by their initial Jacobian norms. Feasibility is always checked on
//! the unscaled residuals; the stationarity test uses the scaled gradient,
//! which is what the scaling exists to make meaningful.

pub mod qp;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use qp::{solve_qp, QpError};

/// Central-difference step scale, `eps^(1/3)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F: FnMut(&DVector<f64>) -> f64>(mut f: F, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function with `m` outputs.
pub fn fd_jacobian<F: FnMut(&DVector<f64>) -> DVector<f64>>(
    mut f: F,
    m: usize,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = fd_step(x[j]);
        let xj = x[j];
        xp[j] = xj + h;
        let fp = f(&xp);
        xp[j] = xj - h;
        let fm = f(&xp);
        xp[j] = xj;
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// A smooth nonlinear program. Constraint conventions: equalities are
/// driven to zero, inequalities are kept nonnegative.
pub trait Problem {
    fn n(&self) -> usize;
    fn objective(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        fd_gradient(|y| self.objective(y), x)
    }

    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        0
    }

    fn eq_constraints(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn ineq_constraints(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn eq_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(|y| self.eq_constraints(y), self.n_eq(), x)
    }
    fn ineq_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(|y| self.ineq_constraints(y), self.n_ineq(), x)
    }

    /// Simple bounds `lo <= x <= hi`; entries may be infinite.
    fn bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }

    /// Exact diagonal of the objective Hessian, if cheap to provide.
    /// Used to seed the BFGS approximation.
    fn objective_hessian_diag(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Positive per-variable magnitudes; the solver iterates on `x / scale`.
    fn variable_scale(&self) -> Option<DVector<f64>> {
        None
    }
}

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("evaluation produced a non-finite value at the initial point")]
    NonFiniteStart,
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlpStatus {
    /// Feasible within tolerance with a small scaled KKT residual.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
    /// The merit line search could not make progress.
    LineSearchFailed,
    /// The quadratic subproblem failed even after relaxation.
    QpFailure,
    /// Steps became negligibly small before optimality was reached.
    Stalled,
}

impl std::fmt::Display for NlpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NlpStatus::Converged => "converged",
            NlpStatus::MaxIterations => "iteration limit",
            NlpStatus::LineSearchFailed => "line search failed",
            NlpStatus::QpFailure => "subproblem failure",
            NlpStatus::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NlpOptions {
    pub max_iter: usize,
    /// Scaled stationarity tolerance, relative to `1 + |grad|`.
    pub tol_kkt: f64,
    /// Unscaled equality residual tolerance.
    pub tol_eq: f64,
    /// Unscaled inequality violation tolerance.
    pub tol_ineq: f64,
    pub armijo_c: f64,
    pub max_halvings: usize,
}

impl Default for NlpOptions {
    fn default() -> Self {
        NlpOptions {
            max_iter: 500,
            tol_kkt: 1e-4,
            tol_eq: 1e-6,
            tol_ineq: 1e-6,
            armijo_c: 1e-4,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: NlpStatus,
    pub iterations: usize,
    /// Scaled stationarity residual at the final point.
    pub kkt_residual: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
}

impl NlpSolution {
    pub fn converged(&self) -> bool {
        self.status == NlpStatus::Converged
    }
}

/// Point evaluation in the scaled frame.
struct Eval {
    f: f64,
    g: DVector<f64>,
    c_eq: DVector<f64>,
    c_in: DVector<f64>,
    c_eq_raw: DVector<f64>,
    c_in_raw: DVector<f64>,
    j_eq: DMatrix<f64>,
    j_in: DMatrix<f64>,
}

/// Objective and constraints only, for line-search trials.
struct LightEval {
    f: f64,
    c_eq: DVector<f64>,
    c_in: DVector<f64>,
    c_eq_raw: DVector<f64>,
    c_in_raw: DVector<f64>,
}

struct Frame<'a, P: Problem + ?Sized> {
    problem: &'a P,
    scale: DVector<f64>,
    r_eq: DVector<f64>,
    r_in: DVector<f64>,
}

impl<'a, P: Problem + ?Sized> Frame<'a, P> {
    fn unscale(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.scale)
    }

    fn light(&self, y: &DVector<f64>) -> LightEval {
        let x = self.unscale(y);
        let c_eq_raw = self.problem.eq_constraints(&x);
        let c_in_raw = self.problem.ineq_constraints(&x);
        LightEval {
            f: self.problem.objective(&x),
            c_eq: c_eq_raw.component_mul(&self.r_eq),
            c_in: c_in_raw.component_mul(&self.r_in),
            c_eq_raw,
            c_in_raw,
        }
    }

    fn full(&self, y: &DVector<f64>) -> Eval {
        self.full_with(y, self.light(y))
    }

    /// Completes a point evaluation for which the objective and constraint
    /// values are already known (from a line-search trial).
    fn full_with(&self, y: &DVector<f64>, light: LightEval) -> Eval {
        let x = self.unscale(y);
        let g = self.problem.gradient(&x).component_mul(&self.scale);
        let mut j_eq = self.problem.eq_jacobian(&x);
        let mut j_in = self.problem.ineq_jacobian(&x);
        scale_rows_cols(&mut j_eq, &self.r_eq, &self.scale);
        scale_rows_cols(&mut j_in, &self.r_in, &self.scale);
        Eval {
            f: light.f,
            g,
            c_eq: light.c_eq,
            c_in: light.c_in,
            c_eq_raw: light.c_eq_raw,
            c_in_raw: light.c_in_raw,
            j_eq,
            j_in,
        }
    }
}

fn scale_rows_cols(jac: &mut DMatrix<f64>, rows: &DVector<f64>, cols: &DVector<f64>) {
    for i in 0..jac.nrows() {
        for j in 0..jac.ncols() {
            jac[(i, j)] *= rows[i] * cols[j];
        }
    }
}

fn l1_violation(c_eq: &DVector<f64>, c_in: &DVector<f64>) -> f64 {
    let eq: f64 = c_eq.iter().map(|v| v.abs()).sum();
    let ineq: f64 = c_in.iter().map(|v| (-v).max(0.0)).sum();
    eq + ineq
}

fn max_violations(c_eq_raw: &DVector<f64>, c_in_raw: &DVector<f64>) -> (f64, f64) {
    let eq = c_eq_raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ineq = c_in_raw.iter().fold(0.0f64, |m, v| m.max(-v));
    (eq, ineq.max(0.0))
}

/// Starting elastic penalty weight, and the cap past which the solver
/// accepts that the constraints cannot be met and stops escalating.
const MU0: f64 = 10.0;
const MU_MAX: f64 = 1e8;

/// Curvature of the elastic variables relative to the largest diagonal
/// entry of the Hessian approximation. Large enough to keep the augmented
/// factorization well conditioned, small enough that the elastics still
/// price constraint violation linearly.
const ELASTIC_CURVATURE: f64 = 1e-2;

/// Powell damping threshold for the BFGS update.
const BFGS_DAMPING: f64 = 0.2;

pub fn solve_nlp<P: Problem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    options: &NlpOptions,
) -> Result<NlpSolution, NlpError> {
    let n = problem.n();
    if x0.len() != n {
        return Err(NlpError::BadInput(format!(
            "initial point has {} entries, expected {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(NlpError::NonFiniteStart);
    }
    let (m_eq, m_in) = (problem.n_eq(), problem.n_ineq());

    let scale = match problem.variable_scale() {
        Some(s) => {
            if s.len() != n || s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(NlpError::BadInput(
                    "variable scale must be positive and finite".to_string(),
                ));
            }
            s
        }
        None => DVector::repeat(n, 1.0),
    };

    let (lo, hi) = match problem.bounds() {
        Some((lo, hi)) => {
            if lo.len() != n || hi.len() != n {
                return Err(NlpError::BadInput("bound length mismatch".to_string()));
            }
            if lo.iter().zip(hi.iter()).any(|(&l, &h)| l > h) {
                return Err(NlpError::BadInput("crossed bounds".to_string()));
            }
            (
                lo.component_div(&scale),
                hi.component_div(&scale),
            )
        }
        None => (
            DVector::repeat(n, f64::NEG_INFINITY),
            DVector::repeat(n, f64::INFINITY),
        ),
    };

    let mut y = x0.component_div(&scale);
    for i in 0..n {
        y[i] = y[i].clamp(lo[i], hi[i]);
    }

    // Constraint row scaling from the Jacobians at the start point.
    let frame = {
        let x_start = y.component_mul(&scale);
        let j_eq0 = problem.eq_jacobian(&x_start);
        let j_in0 = problem.ineq_jacobian(&x_start);
        let row_factor = |jac: &DMatrix<f64>, m: usize| -> DVector<f64> {
            DVector::from_fn(m, |i, _| {
                let norm_scaled: f64 = (0..n)
                    .map(|j| (jac[(i, j)] * scale[j]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                1.0 / norm_scaled.max(1.0)
            })
        };
        Frame {
            problem,
            r_eq: row_factor(&j_eq0, m_eq),
            r_in: row_factor(&j_in0, m_in),
            scale,
        }
    };

    let mut cur = frame.full(&y);
    if !cur.f.is_finite()
        || cur.g.iter().any(|v| !v.is_finite())
        || cur.c_eq.iter().any(|v| !v.is_finite())
        || cur.c_in.iter().any(|v| !v.is_finite())
    {
        return Err(NlpError::NonFiniteStart);
    }

    // Seed the Hessian approximation from the exact objective diagonal
    // when available, floored to keep it positive definite.
    let b0 = {
        let x_start = frame.unscale(&y);
        let diag = problem
            .objective_hessian_diag(&x_start)
            .map(|d| d.component_mul(&frame.scale).component_mul(&frame.scale))
            .unwrap_or_else(|| DVector::repeat(n, 1.0));
        // The floor is deliberately generous: directions without objective
        // curvature (for this problem class, the state variables) otherwise
        // leave the seed so ill conditioned that the QP factorizations lose
        // most of their accuracy.
        let top = diag.iter().fold(1.0f64, |m, v| m.max(*v));
        DMatrix::from_diagonal(&diag.map(|v| v.max(1e-4 * top).max(1e-8)))
    };
    let mut b = b0.clone();

    let mut lambda = DVector::zeros(m_eq);
    let mut mu = DVector::zeros(m_in);
    let mut bound_grad = DVector::zeros(n);
    let mut mu_pen = MU0;
    let mut kkt_residual = f64::INFINITY;
    let mut status = NlpStatus::MaxIterations;
    let mut iterations = 0usize;

    // Elastic subproblem layout: the step in the original variables is
    // followed by a slack pair per equality row and one slack per
    // inequality row, so every constraint row owns a private column. The
    // subproblem is then feasible and full rank by construction whatever
    // the Jacobians do. Bound rows stay hard: the iterate always satisfies
    // them, so they can never conflict. Row order in `a_in_full`: problem
    // inequalities, lower bounds, upper bounds, slack positivity.
    let n_el = 2 * m_eq + m_in;
    let n_v = n + n_el;
    let s_plus0 = n;
    let s_minus0 = n + m_eq;
    let t0 = n + 2 * m_eq;
    let lo_rows: Vec<usize> = (0..n).filter(|&i| lo[i].is_finite()).collect();
    let hi_rows: Vec<usize> = (0..n).filter(|&i| hi[i].is_finite()).collect();
    let n_bound = lo_rows.len() + hi_rows.len();
    let m_in_qp = m_in + n_bound + n_el;
    let mut a_eq_full = DMatrix::zeros(m_eq, n_v);
    for i in 0..m_eq {
        a_eq_full[(i, s_plus0 + i)] = -1.0;
        a_eq_full[(i, s_minus0 + i)] = 1.0;
    }
    let mut a_in_full = DMatrix::zeros(m_in_qp, n_v);
    for i in 0..m_in {
        a_in_full[(i, t0 + i)] = 1.0;
    }
    for (k, &i) in lo_rows.iter().enumerate() {
        a_in_full[(m_in + k, i)] = 1.0;
    }
    for (k, &i) in hi_rows.iter().enumerate() {
        a_in_full[(m_in + lo_rows.len() + k, i)] = -1.0;
    }
    for e in 0..n_el {
        a_in_full[(m_in + n_bound + e, n + e)] = 1.0;
    }

    for iter in 0..options.max_iter {
        iterations = iter;
        // Stationarity of the scaled Lagrangian with the latest multipliers.
        let grad_l = &cur.g - cur.j_eq.tr_mul(&lambda) - cur.j_in.tr_mul(&mu) - &bound_grad;
        kkt_residual = grad_l.amax() / (1.0 + cur.g.amax());
        let (eq_viol, in_viol) = max_violations(&cur.c_eq_raw, &cur.c_in_raw);
        log::debug!(
            "sqp iter {iter}: f={:.6e} eq={eq_viol:.3e} ineq={in_viol:.3e} kkt={kkt_residual:.3e} mu={mu_pen:.2e}",
            cur.f
        );
        if eq_viol <= options.tol_eq && in_viol <= options.tol_ineq && kkt_residual <= options.tol_kkt
        {
            status = NlpStatus::Converged;
            break;
        }

        // Assemble the elastic quadratic subproblem. Equality row i reads
        // J d - s+ + s- = -c_i and inequality row i reads J d + t >= -c_i
        // with s+, s-, t >= 0, each slack priced mu_pen per unit in the
        // objective, so the subproblem minimizes precisely the linearized
        // l1 merit function. The step d = 0 with the slacks set to the
        // current violations is always feasible, and the slack columns
        // give every row a private pivot, so the active-set solver never
        // has to adjudicate dependent constraint rows.
        a_eq_full.view_mut((0, 0), (m_eq, n)).copy_from(&cur.j_eq);
        for i in 0..m_in {
            a_in_full
                .view_mut((i, 0), (1, n))
                .copy_from(&cur.j_in.row(i));
        }
        let rhs_eq = cur.c_eq.map(|v| -v);
        let mut rhs_in = DVector::zeros(m_in_qp);
        for i in 0..m_in {
            rhs_in[i] = -cur.c_in[i];
        }
        for (k, &i) in lo_rows.iter().enumerate() {
            rhs_in[m_in + k] = lo[i] - y[i];
        }
        for (k, &i) in hi_rows.iter().enumerate() {
            rhs_in[m_in + lo_rows.len() + k] = y[i] - hi[i];
        }
        let viol0 = l1_violation(&cur.c_eq, &cur.c_in);

        let build_b_full = |b: &DMatrix<f64>| {
            let b_top = (0..n).fold(0.0f64, |m, i| m.max(b[(i, i)]));
            let eps_el = (ELASTIC_CURVATURE * b_top).max(1e-8);
            let mut b_full = DMatrix::zeros(n_v, n_v);
            b_full.view_mut((0, 0), (n, n)).copy_from(b);
            for e in 0..n_el {
                b_full[(n + e, n + e)] = eps_el;
            }
            b_full
        };
        let mut b_full = build_b_full(&b);
        let mut g_full = DVector::zeros(n_v);
        g_full.rows_mut(0, n).copy_from(&cur.g);

        // Solve, escalating the elastic weight while the subproblem keeps
        // paying for violation instead of removing it. The weight doubles
        // as the merit penalty, and it automatically dominates the
        // multipliers it has to dominate: elastic stationarity bounds
        // every dual of the subproblem by roughly mu_pen.
        let mut qp_sol = None;
        let mut b_was_reset = false;
        let mut attempt = 0;
        while attempt < 4 {
            for e in 0..n_el {
                g_full[n + e] = mu_pen;
            }
            match solve_qp(&b_full, &g_full, &a_eq_full, &rhs_eq, &a_in_full, &rhs_in) {
                Ok(sol) => {
                    // A step this size is numerical debris, not a usable
                    // direction; retry once with the seed Hessian.
                    let huge = !sol.x.amax().is_finite() || sol.x.amax() > 1e8;
                    if huge {
                        log::debug!("sqp iter {iter}: oversized step rejected");
                        if b_was_reset || b == b0 {
                            break;
                        }
                        b = b0.clone();
                        b_full = build_b_full(&b);
                        b_was_reset = true;
                        continue;
                    }
                    let elastic_sum: f64 =
                        sol.x.rows(n, n_el).iter().map(|v| v.max(0.0)).sum();
                    let lin_red = viol0 - elastic_sum;
                    let descent = cur.g.dot(&sol.x.rows(0, n)) - mu_pen * lin_red;
                    let stuck = viol0 > 1e-10 && elastic_sum > 0.9 * viol0;
                    let weak = descent > -1e-12 * (1.0 + cur.f.abs()) && lin_red > 1e-14;
                    if (stuck || weak) && mu_pen < MU_MAX && attempt < 3 {
                        mu_pen = (mu_pen * 10.0).min(MU_MAX);
                        log::debug!(
                            "sqp iter {iter}: elastics hold {elastic_sum:.3e} of {viol0:.3e}, mu -> {mu_pen:.1e}"
                        );
                        attempt += 1;
                        continue;
                    }
                    qp_sol = Some((sol, elastic_sum));
                    break;
                }
                Err(QpError::NotPositiveDefinite) if !b_was_reset && b != b0 => {
                    log::debug!(
                        "sqp iter {iter}: qp lost positive definiteness, resetting hessian"
                    );
                    b = b0.clone();
                    b_full = build_b_full(&b);
                    b_was_reset = true;
                }
                Err(e) => {
                    log::warn!("qp failed: {e}");
                    break;
                }
            }
        }
        let Some((qp_sol, elastic_sum)) = qp_sol else {
            status = NlpStatus::QpFailure;
            break;
        };

        let d = qp_sol.x.rows(0, n).clone_owned();
        lambda = qp_sol.lambda_eq;
        mu = qp_sol.mu_in.rows(0, m_in).clone_owned();
        bound_grad.fill(0.0);
        for (k, &i) in lo_rows.iter().enumerate() {
            bound_grad[i] += qp_sol.mu_in[m_in + k];
        }
        for (k, &i) in hi_rows.iter().enumerate() {
            bound_grad[i] -= qp_sol.mu_in[m_in + lo_rows.len() + k];
        }

        if d.amax() <= 1e-12 * (1.0 + y.amax()) {
            status = if eq_viol <= options.tol_eq && in_viol <= options.tol_ineq {
                NlpStatus::Stalled
            } else {
                NlpStatus::LineSearchFailed
            };
            break;
        }

        // Model decrease of the l1 merit along the step: the objective
        // term plus the violation the subproblem removed. Clamped at zero
        // so that a marginal step still faces a plain decrease test.
        let merit0 = cur.f + mu_pen * viol0;
        let descent = (cur.g.dot(&d) - mu_pen * (viol0 - elastic_sum)).min(0.0);

        // Backtracking line search on the l1 merit, with one second-order
        // correction attempt when the full step is rejected.
        // Rounding slack: near the optimum, merit differences fall below
        // f64 resolution and a strict test would reject every step.
        let merit_slack = 1e-14 * merit0.abs();
        let mut accepted: Option<(DVector<f64>, LightEval)> = None;
        let mut alpha = 1.0f64;
        let mut soc_tried = false;
        for _ in 0..=options.max_halvings {
            let y_trial = &y + &d * alpha;
            let trial = frame.light(&y_trial);
            let merit_t = if trial.f.is_finite() {
                trial.f + mu_pen * l1_violation(&trial.c_eq, &trial.c_in)
            } else {
                f64::INFINITY
            };
            if merit_t <= merit0 + options.armijo_c * alpha * descent + merit_slack {
                accepted = Some((y_trial, trial));
                break;
            }
            if !soc_tried && alpha == 1.0 && m_eq > 0 {
                soc_tried = true;
                // Second-order correction: retarget the equality rows at
                // the constraint values seen at the trial point.
                let rhs_eq = &cur.j_eq * &d - &trial.c_eq;
                let mut rhs_in = DVector::zeros(m_in + n_bound);
                for i in 0..m_in {
                    rhs_in[i] = -relax * cur.c_in[i];
                }
                for (k, &i) in lo_rows.iter().enumerate() {
                    rhs_in[m_in + k] = lo[i] - y[i];
                }
                for (k, &i) in hi_rows.iter().enumerate() {
                    rhs_in[m_in + lo_rows.len() + k] = y[i] - hi[i];
                }
                if let Ok(soc) = solve_qp(&b, &cur.g, &cur.j_eq, &rhs_eq, &a_in_full, &rhs_in) {
                    let y_soc = &y + &soc.x;
                    let t_soc = frame.light(&y_soc);
                    let merit_soc = if t_soc.f.is_finite() {
                        t_soc.f + mu_pen * l1_violation(&t_soc.c_eq, &t_soc.c_in)
                    } else {
                        f64::INFINITY
                    };
                    if merit_soc <= merit0 + options.armijo_c * descent + merit_slack {
                        accepted = Some((y_soc, t_soc));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((y_new, trial)) = accepted else {
            log::debug!(
                "sqp iter {iter}: line search failed, merit0={merit0:.6e} descent={descent:.3e} relax={relax}"
            );
            status = NlpStatus::LineSearchFailed;
            break;
        };
        if alpha < 1.0 {
            log::trace!("sqp iter {iter}: accepted alpha {alpha:.3e}");
        }

        // Damped BFGS update on the Lagrangian gradient difference.
        let new = frame.full_with(&y_new, trial);
        let grad_l_old =
            &cur.g - cur.j_eq.tr_mul(&lambda) - cur.j_in.tr_mul(&mu) - &bound_grad;
        let grad_l_new =
            &new.g - new.j_eq.tr_mul(&lambda) - new.j_in.tr_mul(&mu) - &bound_grad;
        let s_step = &y_new - &y;
        let y_diff = &grad_l_new - &grad_l_old;
        let bs = &b * &s_step;
        let s_bs = s_step.dot(&bs);
        let s_y = s_step.dot(&y_diff);
        if s_bs > 1e-14 && s_step.norm_squared() > 1e-30 {
            let y_tilde = if s_y < BFGS_DAMPING * s_bs {
                let theta = (1.0 - BFGS_DAMPING) * s_bs / (s_bs - s_y);
                &y_diff * theta + &bs * (1.0 - theta)
            } else {
                y_diff.clone()
            };
            let s_yt = s_step.dot(&y_tilde);
            if s_yt > 1e-14 {
                b += &y_tilde * y_tilde.transpose() / s_yt - &bs * bs.transpose() / s_bs;
            }
        }

        y = y_new;
        cur = new;
        iterations = iter + 1;
    }

    let (eq_viol, in_viol) = max_violations(&cur.c_eq_raw, &cur.c_in_raw);
    let x = frame.unscale(&y);
    log::info!(
        "sqp finished: {status}, {iterations} iterations, f={:.6e}, eq={eq_viol:.3e}, ineq={in_viol:.3e}, kkt={kkt_residual:.3e}",
        cur.f
    );
    Ok(NlpSolution {
        x,
        objective: cur.f,
        status,
        iterations,
        kkt_residual,
        max_eq_violation: eq_viol,
        max_ineq_violation: in_viol,
        eq_multipliers: lambda.component_mul(&frame.r_eq),
        ineq_multipliers: mu.component_mul(&frame.r_in),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Quadratic;

    impl Problem for Quadratic {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2)
        }
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let g = fd_gradient(|v| v[0] * v[1].sin() + v[2].powi(3), &x);
        assert_relative_eq!(g[0], x[1].sin(), epsilon = 1e-9);
        assert_relative_eq!(g[1], x[0] * x[1].cos(), epsilon = 1e-8);
        assert_relative_eq!(g[2], 3.0 * x[2] * x[2], epsilon = 1e-7);
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let jac = fd_jacobian(
            |v| DVector::from_vec(vec![v[0] * v[1], v[0].exp()]),
            2,
            &x,
        );
        assert_relative_eq!(jac[(0, 0)], x[1], epsilon = 1e-9);
        assert_relative_eq!(jac[(0, 1)], x[0], epsilon = 1e-9);
        assert_relative_eq!(jac[(1, 0)], x[0].exp(), epsilon = 1e-8);
        assert_relative_eq!(jac[(1, 1)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn unconstrained_quadratic_converges() {
        let sol = solve_nlp(
            &Quadratic,
            &DVector::from_vec(vec![0.0, 0.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert_relative_eq!(sol.x[0], 3.0, epsilon = 1e-5);
        assert_relative_eq!(sol.x[1], -1.0, epsilon = 1e-5);
    }

    struct EqualityQuadratic;

    impl Problem for EqualityQuadratic {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.norm_squared()
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            x.clone()
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn eq_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] + x[1] - 1.0])
        }
        fn eq_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
        }
    }

    #[test]
    fn equality_quadratic_recovers_kkt_point() {
        let sol = solve_nlp(
            &EqualityQuadratic,
            &DVector::from_vec(vec![5.0, -3.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(sol.x[1], 0.5, epsilon = 1e-6);
        // grad f = x = lambda * (1, 1) at the solution.
        assert_relative_eq!(sol.eq_multipliers[0], 0.5, epsilon = 1e-4);
    }

    struct ActiveInequality;

    impl Problem for ActiveInequality {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.norm_squared()
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            x.clone()
        }
        fn n_ineq(&self) -> usize {
            1
        }
        fn ineq_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] - 1.0])
        }
        fn ineq_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
        }
    }

    #[test]
    fn active_inequality_multiplier_is_recovered() {
        let sol = solve_nlp(
            &ActiveInequality,
            &DVector::from_vec(vec![4.0, 2.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.x[1], 0.0, epsilon = 1e-6);
        assert_relative_eq!(sol.ineq_multipliers[0], 1.0, epsilon = 1e-4);
    }

    struct Rosenbrock {
        upper: Option<f64>,
    }

    impl Problem for Rosenbrock {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        }
        fn bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
            self.upper.map(|u| {
                (
                    DVector::from_vec(vec![f64::NEG_INFINITY, f64::NEG_INFINITY]),
                    DVector::from_vec(vec![u, f64::INFINITY]),
                )
            })
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let sol = solve_nlp(
            &Rosenbrock { upper: None },
            &DVector::from_vec(vec![-1.2, 1.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert!((sol.x[0] - 1.0).abs() < 1e-3, "x = {}", sol.x);
        assert!((sol.x[1] - 1.0).abs() < 1e-3, "x = {}", sol.x);
    }

    #[test]
    fn rosenbrock_with_active_upper_bound() {
        // With x0 <= 0.5 the minimizer sits on the bound at (0.5, 0.25):
        // a grid sweep of the feasible set confirms no better point.
        let sol = solve_nlp(
            &Rosenbrock { upper: Some(0.5) },
            &DVector::from_vec(vec![-1.2, 1.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert!((sol.x[0] - 0.5).abs() < 1e-5, "x = {}", sol.x);
        assert!((sol.x[1] - 0.25).abs() < 1e-4, "x = {}", sol.x);
    }

    struct Unsatisfiable;

    impl Problem for Unsatisfiable {
        fn n(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            x[0] * x[0]
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn eq_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] * x[0] + 1.0])
        }
    }

    #[test]
    fn unsatisfiable_problem_reports_failure_honestly() {
        let sol = solve_nlp(
            &Unsatisfiable,
            &DVector::from_vec(vec![0.5]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(!sol.converged());
        assert!(sol.max_eq_violation > 0.5);
    }

    struct BadlyScaled;

    impl Problem for BadlyScaled {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (x[0] / 1e4 - 1.0).powi(2) + (x[1] * 1e3 - 2.0).powi(2)
        }
        fn variable_scale(&self) -> Option<DVector<f64>> {
            Some(DVector::from_vec(vec![1e4, 1e-3]))
        }
    }

    #[test]
    fn variable_scaling_handles_disparate_magnitudes() {
        let sol = solve_nlp(
            &BadlyScaled,
            &DVector::from_vec(vec![0.0, 0.0]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert_relative_eq!(sol.x[0] / 1e4, 1.0, epsilon = 1e-4);
        assert_relative_eq!(sol.x[1] * 1e3, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let run = || {
            solve_nlp(
                &Rosenbrock { upper: Some(0.5) },
                &DVector::from_vec(vec![-1.2, 1.0]),
                &NlpOptions::default(),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    /// Nonconvex problem with a nonlinear equality: minimize distance to
    /// the origin on the circle (x-2)^2 + y^2 = 1. Solution is (1, 0).
    struct Circle;

    impl Problem for Circle {
        fn n(&self) -> usize {
            2
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.norm_squared()
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            x.clone()
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn eq_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![(x[0] - 2.0).powi(2) + x[1] * x[1] - 1.0])
        }
        fn eq_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[2.0 * (x[0] - 2.0), 2.0 * x[1]])
        }
    }

    #[test]
    fn nonlinear_equality_projects_onto_circle() {
        let sol = solve_nlp(
            &Circle,
            &DVector::from_vec(vec![2.5, 1.5]),
            &NlpOptions::default(),
        )
        .unwrap();
        assert!(sol.converged(), "status {}", sol.status);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(sol.x[1], 0.0, epsilon = 1e-5);
    }
}
