//! Direct multiple shooting transcription of multi-phase optimal control
//! problems.
//!
//! A problem is a sequence of phases over one shared dynamical state. Each
//! phase has its own dynamics (for example, a different carried load), a
//! node grid, and a free duration. Adjacent phases share their junction
//! node, so state and control continuity across phases holds by
//! construction. The decision vector is laid out node-major:
//!
//! ```text
//! [ x_0 u_0 | x_1 u_1 | ... | x_G u_G | T_1 ... T_P | params ]
//! ```
//!
//! Controls are piecewise linear between nodes and the state is propagated
//! across each interval by fixed-substep RK4; the defect between the
//! propagated and stored state is an equality constraint. Path constraints
//! are enforced pointwise at the nodes, except at the first and last node
//! of the whole problem: those states are pinned to feasible boundary
//! states by full-state equality rows, which would make path rows there
//! linearly dependent.
//!
//! The running cost is the integral of `u . u`, evaluated per interval
//! with Simpson's rule, which is exact for piecewise linear controls; its
//! gradient and Hessian diagonal are analytic. Constraint Jacobians are
//! assembled from independent per-block central differences, evaluated in
//! parallel and written back in a fixed order so results are deterministic.

pub mod integrate;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::nlp::{fd_step, NlpOptions, NlpSolution, Problem};
use integrate::rk4;

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("bad problem: {0}")]
    BadProblem(String),
    #[error("bad guess: {0}")]
    BadGuess(String),
}

/// One phase of the motion: how the state evolves and what must hold
/// along the way. Implementations must be cheap to call; the transcription
/// evaluates the dynamics thousands of times per iteration.
pub trait PhaseSystem: Sync {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    /// Number of static parameters shared by all phases.
    fn np(&self) -> usize {
        0
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;

    fn n_path_eq(&self) -> usize {
        0
    }
    fn n_path_ineq(&self) -> usize {
        0
    }
    /// Pointwise conditions driven to zero at interior nodes.
    fn path_eq(&self, _x: &DVector<f64>, _u: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    /// Pointwise conditions kept nonnegative at interior nodes.
    fn path_ineq(&self, _x: &DVector<f64>, _u: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    /// Per-control bounds, tiled at every node.
    fn control_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::repeat(self.nu(), f64::NEG_INFINITY),
            DVector::repeat(self.nu(), f64::INFINITY),
        )
    }
}

pub struct Phase<'a> {
    pub system: &'a dyn PhaseSystem,
    pub n_nodes: usize,
    /// RK4 substeps per shooting interval.
    pub substeps: usize,
}

/// Extra equality conditions on the junction state after a phase, for
/// example "the hands are at the grasp point with zero velocity".
pub struct Event<'a> {
    pub after_phase: usize,
    pub dim: usize,
    #[allow(clippy::type_complexity)]
    pub f: Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Sync + 'a>,
}

/// Bounds and scaling for the static parameter block.
pub struct ParamSpec {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub scale: DVector<f64>,
}

impl ParamSpec {
    pub fn none() -> Self {
        ParamSpec {
            lower: DVector::zeros(0),
            upper: DVector::zeros(0),
            scale: DVector::zeros(0),
        }
    }
}

pub struct OcpSpec<'a> {
    pub phases: Vec<Phase<'a>>,
    pub start_state: DVector<f64>,
    pub end_state: DVector<f64>,
    pub events: Vec<Event<'a>>,
    pub duration_bounds: (f64, f64),
    pub params: ParamSpec,
}

/// The assembled nonlinear program. Implements [`Problem`] so it can be
/// handed straight to the SQP solver.
pub struct Transcription<'a> {
    spec: OcpSpec<'a>,
    nx: usize,
    nu: usize,
    np: usize,
    total_nodes: usize,
    /// Global index of each phase's first node.
    node_base: Vec<usize>,
    /// Interior nodes with the phase that evaluates their path rows;
    /// junction nodes belong to the earlier phase.
    owned: Vec<(usize, usize)>,
    n_eq: usize,
    n_ineq: usize,
    dur_off: usize,
    par_off: usize,
    defect_row0: usize,
    path_eq_rows: Vec<usize>,
    event_rows: Vec<usize>,
    path_in_rows: Vec<usize>,
}

impl<'a> Transcription<'a> {
    pub fn new(spec: OcpSpec<'a>) -> Result<Self, OcpError> {
        if spec.phases.is_empty() {
            return Err(OcpError::BadProblem("no phases".to_string()));
        }
        let nx = spec.phases[0].system.nx();
        let nu = spec.phases[0].system.nu();
        let np = spec.phases[0].system.np();
        for (i, ph) in spec.phases.iter().enumerate() {
            if ph.system.nx() != nx || ph.system.nu() != nu || ph.system.np() != np {
                return Err(OcpError::BadProblem(format!(
                    "phase {i} disagrees on state, control, or parameter size"
                )));
            }
            if ph.n_nodes < 2 {
                return Err(OcpError::BadProblem(format!(
                    "phase {i} needs at least 2 nodes"
                )));
            }
            if ph.substeps == 0 {
                return Err(OcpError::BadProblem(format!("phase {i} has zero substeps")));
            }
        }
        if spec.start_state.len() != nx || spec.end_state.len() != nx {
            return Err(OcpError::BadProblem(
                "boundary state length differs from the state size".to_string(),
            ));
        }
        let (dur_lo, dur_hi) = spec.duration_bounds;
        if !(dur_lo > 0.0 && dur_hi >= dur_lo) {
            return Err(OcpError::BadProblem("bad duration bounds".to_string()));
        }
        if spec.params.lower.len() != np
            || spec.params.upper.len() != np
            || spec.params.scale.len() != np
        {
            return Err(OcpError::BadProblem(
                "parameter spec length differs from the system parameter size".to_string(),
            ));
        }
        for e in &spec.events {
            if e.after_phase + 1 >= spec.phases.len() {
                return Err(OcpError::BadProblem(format!(
                    "event after phase {} has no junction",
                    e.after_phase
                )));
            }
        }

        let n_phases = spec.phases.len();
        let mut node_base = Vec::with_capacity(n_phases);
        let mut base = 0usize;
        for ph in &spec.phases {
            node_base.push(base);
            base += ph.n_nodes - 1;
        }
        let total_nodes = base + 1;

        // Interior node ownership: every node except the global endpoints,
        // assigned to the phase in which it is not the first node.
        let mut owned = Vec::new();
        for (p, ph) in spec.phases.iter().enumerate() {
            let last = if p + 1 == n_phases {
                ph.n_nodes - 1
            } else {
                ph.n_nodes
            };
            for k in 1..last {
                owned.push((node_base[p] + k, p));
            }
        }

        let per_node = nx + nu;
        let dur_off = total_nodes * per_node;
        let par_off = dur_off + n_phases;

        let mut n_eq = 2 * nx;
        let defect_row0 = n_eq;
        let n_intervals: usize = spec.phases.iter().map(|p| p.n_nodes - 1).sum();
        n_eq += n_intervals * nx;
        let mut path_eq_rows = Vec::with_capacity(owned.len());
        for &(_, p) in &owned {
            path_eq_rows.push(n_eq);
            n_eq += spec.phases[p].system.n_path_eq();
        }
        let mut event_rows = Vec::with_capacity(spec.events.len());
        for e in &spec.events {
            event_rows.push(n_eq);
            n_eq += e.dim;
        }
        let mut n_ineq = 0usize;
        let mut path_in_rows = Vec::with_capacity(owned.len());
        for &(_, p) in &owned {
            path_in_rows.push(n_ineq);
            n_ineq += spec.phases[p].system.n_path_ineq();
        }

        Ok(Transcription {
            spec,
            nx,
            nu,
            np,
            total_nodes,
            node_base,
            owned,
            n_eq,
            n_ineq,
            dur_off,
            par_off,
            defect_row0,
            path_eq_rows,
            event_rows,
            path_in_rows,
        })
    }

    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    pub fn n_phases(&self) -> usize {
        self.spec.phases.len()
    }

    fn per_node(&self) -> usize {
        self.nx + self.nu
    }

    /// Decision offset of node `g`'s state block.
    fn x_off(&self, g: usize) -> usize {
        g * self.per_node()
    }

    /// Decision offset of node `g`'s control block.
    fn u_off(&self, g: usize) -> usize {
        g * self.per_node() + self.nx
    }

    fn node_x(&self, z: &DVector<f64>, g: usize) -> DVector<f64> {
        z.rows(self.x_off(g), self.nx).clone_owned()
    }

    fn node_u(&self, z: &DVector<f64>, g: usize) -> DVector<f64> {
        z.rows(self.u_off(g), self.nu).clone_owned()
    }

    fn params_of(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(self.par_off, self.np).clone_owned()
    }

    /// Propagates node `k` of phase `p` across one interval.
    fn shoot(
        &self,
        phase: &Phase<'_>,
        x0: &DVector<f64>,
        u0: &DVector<f64>,
        u1: &DVector<f64>,
        h: f64,
        params: &DVector<f64>,
    ) -> DVector<f64> {
        let sys = phase.system;
        let f = |t: f64, x: &DVector<f64>| {
            let w = (t / h).clamp(0.0, 1.0);
            let u = u0 * (1.0 - w) + u1 * w;
            sys.dynamics(x, &u, params)
        };
        rk4(&f, x0, 0.0, h, phase.substeps)
    }

    /// Builds a decision vector from per-node states and controls.
    pub fn pack(
        &self,
        states: &[DVector<f64>],
        controls: &[DVector<f64>],
        durations: &[f64],
        params: &DVector<f64>,
    ) -> Result<DVector<f64>, OcpError> {
        if states.len() != self.total_nodes || controls.len() != self.total_nodes {
            return Err(OcpError::BadGuess(format!(
                "need {} node states and controls",
                self.total_nodes
            )));
        }
        if durations.len() != self.n_phases() || params.len() != self.np {
            return Err(OcpError::BadGuess(
                "duration or parameter count mismatch".to_string(),
            ));
        }
        let mut z = DVector::zeros(self.n());
        for g in 0..self.total_nodes {
            if states[g].len() != self.nx || controls[g].len() != self.nu {
                return Err(OcpError::BadGuess(format!("node {g} has wrong sizes")));
            }
            z.rows_mut(self.x_off(g), self.nx).copy_from(&states[g]);
            z.rows_mut(self.u_off(g), self.nu).copy_from(&controls[g]);
        }
        for (p, &t) in durations.iter().enumerate() {
            z[self.dur_off + p] = t;
        }
        z.rows_mut(self.par_off, self.np).copy_from(params);
        Ok(z)
    }

    /// A bland feasible-leaning start: states interpolate the pinned
    /// boundary states, controls sit at the middle of their bounds,
    /// durations and parameters at the middle of theirs.
    pub fn linear_guess(&self) -> DVector<f64> {
        let (ulo, uhi) = self.spec.phases[0].system.control_bounds();
        let umid = DVector::from_fn(self.nu, |i, _| {
            if ulo[i].is_finite() && uhi[i].is_finite() {
                0.5 * (ulo[i] + uhi[i])
            } else {
                0.0
            }
        });
        let mut states = Vec::with_capacity(self.total_nodes);
        let mut controls = Vec::with_capacity(self.total_nodes);
        for g in 0..self.total_nodes {
            let w = g as f64 / (self.total_nodes - 1).max(1) as f64;
            states.push(&self.spec.start_state * (1.0 - w) + &self.spec.end_state * w);
            controls.push(umid.clone());
        }
        let t = 1.0f64.clamp(self.spec.duration_bounds.0, self.spec.duration_bounds.1);
        let durations = vec![t; self.n_phases()];
        let params = DVector::from_fn(self.np, |i, _| {
            0.5 * (self.spec.params.lower[i] + self.spec.params.upper[i])
        });
        self.pack(&states, &controls, &durations, &params)
            .expect("guess dimensions are consistent by construction")
    }

    /// Per-phase objective sums and durations, used by both the value and
    /// the analytic gradient.
    fn phase_quadrature(&self, z: &DVector<f64>) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_phases());
        for (p, ph) in self.spec.phases.iter().enumerate() {
            let t = z[self.dur_off + p];
            let mut s = 0.0;
            for k in 0..ph.n_nodes - 1 {
                let g = self.node_base[p] + k;
                let u0 = z.rows(self.u_off(g), self.nu);
                let u1 = z.rows(self.u_off(g + 1), self.nu);
                s += u0.dot(&u0) + u0.dot(&u1) + u1.dot(&u1);
            }
            out.push((t, s));
        }
        out
    }

    pub fn solve(&self, guess: &DVector<f64>, options: &NlpOptions) -> Result<OcpSolution, crate::nlp::NlpError> {
        let nlp = crate::nlp::solve_nlp(self, guess, options)?;
        Ok(self.extract(nlp))
    }

    /// Unpacks a solver result into per-phase trajectories. The junction
    /// node appears at the end of one phase and the start of the next.
    pub fn extract(&self, nlp: NlpSolution) -> OcpSolution {
        let z = &nlp.x;
        let mut phases = Vec::with_capacity(self.n_phases());
        let mut t0 = 0.0;
        for (p, ph) in self.spec.phases.iter().enumerate() {
            let t = z[self.dur_off + p];
            let h = t / (ph.n_nodes - 1) as f64;
            let mut times = Vec::with_capacity(ph.n_nodes);
            let mut states = Vec::with_capacity(ph.n_nodes);
            let mut controls = Vec::with_capacity(ph.n_nodes);
            for k in 0..ph.n_nodes {
                let g = self.node_base[p] + k;
                times.push(t0 + h * k as f64);
                states.push(self.node_x(z, g));
                controls.push(self.node_u(z, g));
            }
            phases.push(PhaseTrajectory {
                times,
                states,
                controls,
            });
            t0 += t;
        }
        let durations = (0..self.n_phases()).map(|p| z[self.dur_off + p]).collect();
        let params = self.params_of(z);
        OcpSolution {
            objective: nlp.objective,
            durations,
            params,
            phases,
            nlp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

#[derive(Debug)]
pub struct OcpSolution {
    pub objective: f64,
    pub durations: Vec<f64>,
    pub params: DVector<f64>,
    pub phases: Vec<PhaseTrajectory>,
    pub nlp: NlpSolution,
}

/// A Jacobian block: rows starting at `row0`, one column per entry of
/// `cols`, to be scattered into the full matrix.
struct JacBlock {
    row0: usize,
    cols: Vec<usize>,
    values: DMatrix<f64>,
}

impl<'a> Transcription<'a> {
    /// Central-difference block of `f` (with `rows` outputs) over the
    /// decision columns `cols`.
    fn fd_block<F>(&self, z: &DVector<f64>, row0: usize, rows: usize, cols: Vec<usize>, f: F) -> JacBlock
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let mut values = DMatrix::zeros(rows, cols.len());
        let mut zp = z.clone();
        for (j, &c) in cols.iter().enumerate() {
            let h = fd_step(z[c]);
            let zc = z[c];
            zp[c] = zc + h;
            let fp = f(&zp);
            zp[c] = zc - h;
            let fm = f(&zp);
            zp[c] = zc;
            for i in 0..rows {
                values[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        JacBlock { row0, cols, values }
    }

    fn param_cols(&self) -> Vec<usize> {
        (self.par_off..self.par_off + self.np).collect()
    }

    fn scatter(&self, blocks: Vec<JacBlock>, jac: &mut DMatrix<f64>) {
        for b in blocks {
            for (j, &c) in b.cols.iter().enumerate() {
                for i in 0..b.values.nrows() {
                    jac[(b.row0 + i, c)] += b.values[(i, j)];
                }
            }
        }
    }
}

impl<'a> Problem for Transcription<'a> {
    fn n(&self) -> usize {
        self.par_off + self.np
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.phase_quadrature(z)
            .iter()
            .zip(&self.spec.phases)
            .map(|(&(t, s), ph)| t / (ph.n_nodes - 1) as f64 / 3.0 * s)
            .sum()
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n());
        for (p, ph) in self.spec.phases.iter().enumerate() {
            let t = z[self.dur_off + p];
            let h3 = t / (ph.n_nodes - 1) as f64 / 3.0;
            let mut s = 0.0;
            for k in 0..ph.n_nodes - 1 {
                let ga = self.node_base[p] + k;
                let u0 = z.rows(self.u_off(ga), self.nu).clone_owned();
                let u1 = z.rows(self.u_off(ga + 1), self.nu).clone_owned();
                s += u0.dot(&u0) + u0.dot(&u1) + u1.dot(&u1);
                {
                    let mut g0 = g.rows_mut(self.u_off(ga), self.nu);
                    g0 += (&u0 * 2.0 + &u1) * h3;
                }
                {
                    let mut g1 = g.rows_mut(self.u_off(ga + 1), self.nu);
                    g1 += (&u1 * 2.0 + &u0) * h3;
                }
            }
            // J_p = h/3 s with h = T/(N-1), so dJ_p/dT = J_p / T.
            g[self.dur_off + p] = s / (ph.n_nodes - 1) as f64 / 3.0;
        }
        g
    }

    fn objective_hessian_diag(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let mut d = DVector::zeros(self.n());
        for (p, ph) in self.spec.phases.iter().enumerate() {
            let t = z[self.dur_off + p];
            let h3 = t / (ph.n_nodes - 1) as f64 / 3.0;
            for k in 0..ph.n_nodes - 1 {
                let ga = self.node_base[p] + k;
                for i in 0..self.nu {
                    d[self.u_off(ga) + i] += 2.0 * h3;
                    d[self.u_off(ga + 1) + i] += 2.0 * h3;
                }
            }
        }
        Some(d)
    }

    fn n_eq(&self) -> usize {
        self.n_eq
    }

    fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    fn eq_constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut c = DVector::zeros(self.n_eq);
        let params = self.params_of(z);
        c.rows_mut(0, self.nx)
            .copy_from(&(self.node_x(z, 0) - &self.spec.start_state));
        c.rows_mut(self.nx, self.nx)
            .copy_from(&(self.node_x(z, self.total_nodes - 1) - &self.spec.end_state));
        let mut row = self.defect_row0;
        for (p, ph) in self.spec.phases.iter().enumerate() {
            let t = z[self.dur_off + p];
            let h = t / (ph.n_nodes - 1) as f64;
            for k in 0..ph.n_nodes - 1 {
                let g = self.node_base[p] + k;
                let shot = self.shoot(
                    ph,
                    &self.node_x(z, g),
                    &self.node_u(z, g),
                    &self.node_u(z, g + 1),
                    h,
                    &params,
                );
                c.rows_mut(row, self.nx)
                    .copy_from(&(self.node_x(z, g + 1) - shot));
                row += self.nx;
            }
        }
        for (i, &(g, p)) in self.owned.iter().enumerate() {
            let sys = self.spec.phases[p].system;
            let m = sys.n_path_eq();
            if m > 0 {
                let v = sys.path_eq(&self.node_x(z, g), &self.node_u(z, g), &params);
                c.rows_mut(self.path_eq_rows[i], m).copy_from(&v);
            }
        }
        for (i, e) in self.spec.events.iter().enumerate() {
            let g = self.node_base[e.after_phase + 1];
            let v = (e.f)(&self.node_x(z, g), &params);
            c.rows_mut(self.event_rows[i], e.dim).copy_from(&v);
        }
        c
    }

    fn ineq_constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut c = DVector::zeros(self.n_ineq);
        let params = self.params_of(z);
        for (i, &(g, p)) in self.owned.iter().enumerate() {
            let sys = self.spec.phases[p].system;
            let m = sys.n_path_ineq();
            if m > 0 {
                let v = sys.path_ineq(&self.node_x(z, g), &self.node_u(z, g), &params);
                c.rows_mut(self.path_in_rows[i], m).copy_from(&v);
            }
        }
        c
    }

    fn eq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n_eq, self.n());
        // Boundary pins are identity blocks.
        for i in 0..self.nx {
            jac[(i, self.x_off(0) + i)] = 1.0;
            jac[(self.nx + i, self.x_off(self.total_nodes - 1) + i)] = 1.0;
        }
        let params = self.params_of(z);

        enum Job {
            Defect { phase: usize, k: usize, row0: usize },
            Path { owned_idx: usize },
            Event { idx: usize },
        }
        let mut jobs = Vec::new();
        let mut row = self.defect_row0;
        for (p, ph) in self.spec.phases.iter().enumerate() {
            for k in 0..ph.n_nodes - 1 {
                jobs.push(Job::Defect { phase: p, k, row0: row });
                row += self.nx;
            }
        }
        for (i, &(_, p)) in self.owned.iter().enumerate() {
            if self.spec.phases[p].system.n_path_eq() > 0 {
                jobs.push(Job::Path { owned_idx: i });
            }
        }
        for i in 0..self.spec.events.len() {
            jobs.push(Job::Event { idx: i });
        }

        let blocks: Vec<JacBlock> = jobs
            .par_iter()
            .map(|job| match *job {
                Job::Defect { phase, k, row0 } => {
                    let ph = &self.spec.phases[phase];
                    let g = self.node_base[phase] + k;
                    // The +I on x_{k+1} is analytic; difference the rest.
                    let mut cols: Vec<usize> =
                        (self.x_off(g)..self.x_off(g) + self.nx + self.nu).collect();
                    cols.extend(self.u_off(g + 1)..self.u_off(g + 1) + self.nu);
                    cols.push(self.dur_off + phase);
                    cols.extend(self.param_cols());
                    self.fd_block(z, row0, self.nx, cols, |zz| {
                        let t = zz[self.dur_off + phase];
                        let h = t / (ph.n_nodes - 1) as f64;
                        -self.shoot(
                            ph,
                            &self.node_x(zz, g),
                            &self.node_u(zz, g),
                            &self.node_u(zz, g + 1),
                            h,
                            &self.params_of(zz),
                        )
                    })
                }
                Job::Path { owned_idx } => {
                    let (g, p) = self.owned[owned_idx];
                    let sys = self.spec.phases[p].system;
                    let mut cols: Vec<usize> =
                        (self.x_off(g)..self.x_off(g) + self.nx + self.nu).collect();
                    cols.extend(self.param_cols());
                    self.fd_block(z, self.path_eq_rows[owned_idx], sys.n_path_eq(), cols, |zz| {
                        sys.path_eq(&self.node_x(zz, g), &self.node_u(zz, g), &self.params_of(zz))
                    })
                }
                Job::Event { idx } => {
                    let e = &self.spec.events[idx];
                    let g = self.node_base[e.after_phase + 1];
                    let mut cols: Vec<usize> = (self.x_off(g)..self.x_off(g) + self.nx).collect();
                    cols.extend(self.param_cols());
                    self.fd_block(z, self.event_rows[idx], e.dim, cols, |zz| {
                        (e.f)(&self.node_x(zz, g), &self.params_of(zz))
                    })
                }
            })
            .collect();
        self.scatter(blocks, &mut jac);

        // Defect identity on the arrival state.
        let mut row = self.defect_row0;
        for (p, ph) in self.spec.phases.iter().enumerate() {
            for k in 0..ph.n_nodes - 1 {
                let g1 = self.node_base[p] + k + 1;
                for i in 0..self.nx {
                    jac[(row + i, self.x_off(g1) + i)] += 1.0;
                }
                row += self.nx;
            }
        }
        let _ = params;
        jac
    }

    fn ineq_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n_ineq, self.n());
        let jobs: Vec<usize> = (0..self.owned.len())
            .filter(|&i| self.spec.phases[self.owned[i].1].system.n_path_ineq() > 0)
            .collect();
        let blocks: Vec<JacBlock> = jobs
            .par_iter()
            .map(|&i| {
                let (g, p) = self.owned[i];
                let sys = self.spec.phases[p].system;
                let mut cols: Vec<usize> =
                    (self.x_off(g)..self.x_off(g) + self.nx + self.nu).collect();
                cols.extend(self.param_cols());
                self.fd_block(z, self.path_in_rows[i], sys.n_path_ineq(), cols, |zz| {
                    sys.path_ineq(&self.node_x(zz, g), &self.node_u(zz, g), &self.params_of(zz))
                })
            })
            .collect();
        self.scatter(blocks, &mut jac);
        jac
    }

    fn bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.n();
        let mut lo = DVector::repeat(n, f64::NEG_INFINITY);
        let mut hi = DVector::repeat(n, f64::INFINITY);
        let (ulo, uhi) = self.spec.phases[0].system.control_bounds();
        for g in 0..self.total_nodes {
            lo.rows_mut(self.u_off(g), self.nu).copy_from(&ulo);
            hi.rows_mut(self.u_off(g), self.nu).copy_from(&uhi);
        }
        for p in 0..self.n_phases() {
            lo[self.dur_off + p] = self.spec.duration_bounds.0;
            hi[self.dur_off + p] = self.spec.duration_bounds.1;
        }
        lo.rows_mut(self.par_off, self.np)
            .copy_from(&self.spec.params.lower);
        hi.rows_mut(self.par_off, self.np)
            .copy_from(&self.spec.params.upper);
        Some((lo, hi))
    }

    fn variable_scale(&self) -> Option<DVector<f64>> {
        let mut s = DVector::repeat(self.n(), 1.0);
        s.rows_mut(self.par_off, self.np)
            .copy_from(&self.spec.params.scale);
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Double integrator: state (position, velocity), control acceleration.
    struct DoubleIntegrator;

    impl PhaseSystem for DoubleIntegrator {
        fn nx(&self) -> usize {
            2
        }
        fn nu(&self) -> usize {
            1
        }
        fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[1], u[0]])
        }
        fn control_bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (
                DVector::from_vec(vec![-50.0]),
                DVector::from_vec(vec![50.0]),
            )
        }
    }

    fn rest_to_rest(sys: &DoubleIntegrator, bounds: (f64, f64)) -> OcpSpec<'_> {
        OcpSpec {
            phases: vec![Phase {
                system: sys,
                n_nodes: 11,
                substeps: 2,
            }],
            start_state: DVector::from_vec(vec![0.0, 0.0]),
            end_state: DVector::from_vec(vec![1.0, 0.0]),
            events: Vec::new(),
            duration_bounds: bounds,
            params: ParamSpec::none(),
        }
    }

    #[test]
    fn double_integrator_matches_analytic_energy_optimum() {
        // With T = 1 the minimum-effort rest-to-rest control is
        // u(t) = 6 - 12 t with cost 12; the transcription represents it
        // exactly (linear control, cubic state, quadratic running cost).
        let sys = DoubleIntegrator;
        let spec = rest_to_rest(&sys, (1.0, 1.0));
        let tr = Transcription::new(spec).unwrap();
        // Difference-based Jacobians floor the reachable KKT residual
        // near 1e-8; demand one order above that.
        let options = NlpOptions {
            tol_kkt: 1e-7,
            tol_eq: 1e-9,
            ..Default::default()
        };
        let sol = tr.solve(&tr.linear_guess(), &options).unwrap();
        assert!(sol.nlp.converged(), "status {}", sol.nlp.status);
        assert_relative_eq!(sol.objective, 12.0, epsilon = 1e-6);
        let ph = &sol.phases[0];
        for (k, t) in ph.times.iter().enumerate() {
            assert_relative_eq!(ph.controls[k][0], 6.0 - 12.0 * t, epsilon = 1e-4);
        }
        assert_relative_eq!(ph.states[5][0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn free_duration_runs_to_its_upper_bound() {
        // Longer horizons are always cheaper for pure effort, so the
        // optimal duration sits at the top of its range: J(T) = 12 / T^3.
        let sys = DoubleIntegrator;
        let spec = rest_to_rest(&sys, (0.2, 2.0));
        let tr = Transcription::new(spec).unwrap();
        let sol = tr
            .solve(&tr.linear_guess(), &NlpOptions::default())
            .unwrap();
        assert!(sol.nlp.converged(), "status {}", sol.nlp.status);
        assert_relative_eq!(sol.durations[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(sol.objective, 1.5, epsilon = 1e-4);
    }

    #[test]
    fn two_phases_with_junction_event() {
        // Out and back: reach position 1 at rest mid-motion, return to
        // the origin. Each phase is an independent rest-to-rest motion
        // costing 12, and the junction event pins the turnaround state.
        let sys = DoubleIntegrator;
        let spec = OcpSpec {
            phases: vec![
                Phase {
                    system: &sys,
                    n_nodes: 6,
                    substeps: 2,
                },
                Phase {
                    system: &sys,
                    n_nodes: 6,
                    substeps: 2,
                },
            ],
            start_state: DVector::from_vec(vec![0.0, 0.0]),
            end_state: DVector::from_vec(vec![0.0, 0.0]),
            events: vec![Event {
                after_phase: 0,
                dim: 2,
                f: Box::new(|x, _p| DVector::from_vec(vec![x[0] - 1.0, x[1]])),
            }],
            duration_bounds: (1.0, 1.0),
            params: ParamSpec::none(),
        };
        let tr = Transcription::new(spec).unwrap();
        assert_eq!(tr.total_nodes(), 11);
        let sol = tr
            .solve(&tr.linear_guess(), &NlpOptions::default())
            .unwrap();
        assert!(sol.nlp.converged(), "status {}", sol.nlp.status);
        assert_relative_eq!(sol.objective, 24.0, epsilon = 1e-4);
        // The junction node is shared: end of phase 1 equals start of
        // phase 2 bitwise.
        let a = &sol.phases[0].states[5];
        let b = &sol.phases[1].states[0];
        assert_eq!(a.as_slice(), b.as_slice());
        assert_relative_eq!(a[0], 1.0, epsilon = 1e-6);
    }

    /// A nonlinear system with path constraints and a parameter, to
    /// exercise every block of the structured Jacobian.
    struct DampedPendulum;

    impl PhaseSystem for DampedPendulum {
        fn nx(&self) -> usize {
            2
        }
        fn nu(&self) -> usize {
            1
        }
        fn np(&self) -> usize {
            1
        }
        fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[1], -x[0].sin() - p[0] * x[1] + u[0]])
        }
        fn n_path_eq(&self) -> usize {
            1
        }
        fn path_eq(&self, x: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![(x[0] * x[1] + 0.1 * u[0] + 0.01 * p[0]).sin() * 0.1])
        }
        fn n_path_ineq(&self) -> usize {
            1
        }
        fn path_ineq(&self, x: &DVector<f64>, _u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![2.0 - x[1] * x[1] - 0.1 * p[0]])
        }
    }

    #[test]
    fn structured_jacobians_match_dense_differences() {
        let sys = DampedPendulum;
        let spec = OcpSpec {
            phases: vec![
                Phase {
                    system: &sys,
                    n_nodes: 4,
                    substeps: 2,
                },
                Phase {
                    system: &sys,
                    n_nodes: 3,
                    substeps: 2,
                },
            ],
            start_state: DVector::from_vec(vec![0.1, 0.0]),
            end_state: DVector::from_vec(vec![0.5, 0.0]),
            events: vec![Event {
                after_phase: 0,
                dim: 1,
                f: Box::new(|x, p| DVector::from_vec(vec![x[0] - 0.3 + 0.05 * p[0]])),
            }],
            duration_bounds: (0.5, 3.0),
            params: ParamSpec {
                lower: DVector::from_vec(vec![0.0]),
                upper: DVector::from_vec(vec![2.0]),
                scale: DVector::from_vec(vec![1.0]),
            },
        };
        let tr = Transcription::new(spec).unwrap();
        // An arbitrary strictly interior point.
        let mut z = tr.linear_guess();
        for i in 0..z.len() {
            z[i] += 0.01 * ((i as f64 * 0.7).sin());
        }
        let jeq = tr.eq_jacobian(&z);
        let jeq_dense = crate::nlp::fd_jacobian(|w| tr.eq_constraints(w), tr.n_eq(), &z);
        assert_relative_eq!((&jeq - &jeq_dense).amax(), 0.0, epsilon = 1e-6);
        let jin = tr.ineq_jacobian(&z);
        let jin_dense = crate::nlp::fd_jacobian(|w| tr.ineq_constraints(w), tr.n_ineq(), &z);
        assert_relative_eq!((&jin - &jin_dense).amax(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn gradient_and_hessian_diagonal_match_differences() {
        let sys = DampedPendulum;
        let spec = OcpSpec {
            phases: vec![Phase {
                system: &sys,
                n_nodes: 5,
                substeps: 1,
            }],
            start_state: DVector::from_vec(vec![0.0, 0.0]),
            end_state: DVector::from_vec(vec![0.3, 0.0]),
            events: Vec::new(),
            duration_bounds: (0.5, 3.0),
            params: ParamSpec {
                lower: DVector::from_vec(vec![0.0]),
                upper: DVector::from_vec(vec![2.0]),
                scale: DVector::from_vec(vec![1.0]),
            },
        };
        let tr = Transcription::new(spec).unwrap();
        let mut z = tr.linear_guess();
        for i in 0..z.len() {
            z[i] += 0.05 * ((i as f64 * 1.3).cos());
        }
        let g = tr.gradient(&z);
        let g_fd = crate::nlp::fd_gradient(|w| tr.objective(w), &z);
        assert_relative_eq!((&g - &g_fd).amax(), 0.0, epsilon = 1e-6);
        let d = tr.objective_hessian_diag(&z).unwrap();
        // Differentiate the analytic gradient for the diagonal reference.
        for i in (0..z.len()).step_by(3) {
            let h = crate::nlp::fd_step(z[i]);
            let mut zp = z.clone();
            zp[i] += h;
            let gp = tr.gradient(&zp);
            zp[i] -= 2.0 * h;
            let gm = tr.gradient(&zp);
            assert_relative_eq!(d[i], (gp[i] - gm[i]) / (2.0 * h), epsilon = 1e-5);
        }
    }

    #[test]
    fn decision_vector_length_accounts_for_shared_nodes() {
        struct Sized16;
        impl PhaseSystem for Sized16 {
            fn nx(&self) -> usize {
                36
            }
            fn nu(&self) -> usize {
                30
            }
            fn np(&self) -> usize {
                2
            }
            fn dynamics(
                &self,
                x: &DVector<f64>,
                _u: &DVector<f64>,
                _p: &DVector<f64>,
            ) -> DVector<f64> {
                x.clone()
            }
        }
        let sys = Sized16;
        let spec = OcpSpec {
            phases: vec![
                Phase {
                    system: &sys,
                    n_nodes: 26,
                    substeps: 1,
                },
                Phase {
                    system: &sys,
                    n_nodes: 26,
                    substeps: 1,
                },
            ],
            start_state: DVector::zeros(36),
            end_state: DVector::zeros(36),
            events: Vec::new(),
            duration_bounds: (0.2, 5.0),
            params: ParamSpec {
                lower: DVector::zeros(2),
                upper: DVector::repeat(2, 1.0),
                scale: DVector::repeat(2, 1.0),
            },
        };
        let tr = Transcription::new(spec).unwrap();
        // 51 shared-node blocks of (36 + 30), two durations, two params.
        assert_eq!(tr.total_nodes(), 51);
        assert_eq!(tr.n(), 51 * 66 + 2 + 2);
        assert_eq!(tr.n(), 3370);
    }

    #[test]
    fn inactive_path_inequality_leaves_optimum_unchanged() {
        struct Limited;
        impl PhaseSystem for Limited {
            fn nx(&self) -> usize {
                2
            }
            fn nu(&self) -> usize {
                1
            }
            fn dynamics(
                &self,
                x: &DVector<f64>,
                u: &DVector<f64>,
                _p: &DVector<f64>,
            ) -> DVector<f64> {
                DVector::from_vec(vec![x[1], u[0]])
            }
            fn n_path_ineq(&self) -> usize {
                1
            }
            fn path_ineq(
                &self,
                x: &DVector<f64>,
                _u: &DVector<f64>,
                _p: &DVector<f64>,
            ) -> DVector<f64> {
                // Generous speed limit, inactive at the optimum.
                DVector::from_vec(vec![10.0 - x[1]])
            }
        }
        let sys = Limited;
        let spec = OcpSpec {
            phases: vec![Phase {
                system: &sys,
                n_nodes: 11,
                substeps: 2,
            }],
            start_state: DVector::from_vec(vec![0.0, 0.0]),
            end_state: DVector::from_vec(vec![1.0, 0.0]),
            events: Vec::new(),
            duration_bounds: (1.0, 1.0),
            params: ParamSpec::none(),
        };
        let tr = Transcription::new(spec).unwrap();
        let sol = tr
            .solve(&tr.linear_guess(), &NlpOptions::default())
            .unwrap();
        assert!(sol.nlp.converged());
        assert_relative_eq!(sol.objective, 12.0, epsilon = 1e-5);
        assert!(sol.nlp.ineq_multipliers.amax() < 1e-9);
    }

    #[test]
    fn repeated_transcribed_solves_are_bitwise_identical() {
        let sys = DoubleIntegrator;
        let run = || {
            let spec = rest_to_rest(&sys, (0.2, 2.0));
            let tr = Transcription::new(spec).unwrap();
            tr.solve(&tr.linear_guess(), &NlpOptions::default()).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.nlp.x.as_slice(), b.nlp.x.as_slice());
    }
}
