//! The lifting task: a two-phase reach-and-lift motion with ground
//! contact, muscle torque generators, and an optional hip exoskeleton.
//!
//! Phase 1 ("reach") moves the standing subject down until the hands are
//! at the grasp point with zero velocity; phase 2 ("lift") returns to
//! standing with the load attached to the hands. Both phase durations are
//! free, the objective is the time integral of squared muscle activations,
//! and when the device's spring is left free its stiffness and rest offset
//! join the decision vector as static parameters.

pub mod metrics;
pub mod poses;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::anthro::{
    attach_load, default_exo_distribution, default_human_model, default_smoke_model,
    default_subject, distribute_exo_mass, AnthroError, SubjectParams,
};
use crate::exo::{ExoDevice, ExoError, SpringParams};
use crate::geom::Vec2;
use crate::mtg::{MtgData, MtgError, MtgSet};
use crate::multibody::{
    constrained_forward_dynamics, mass_matrix, nonlinear_effects, ConstraintAxes, ConstraintSet,
    DynamicsState, Model, MultibodyError, PointConstraint,
};
use crate::nlp::{NlpError, NlpOptions};
use crate::ocp::{Event, OcpError, OcpSolution, OcpSpec, ParamSpec, Phase, PhaseSystem, Transcription};
use metrics::{compute_metrics, Metrics};
use poses::{drop_to_ground, solve_pose, PoseError, POSE_MAX_ITER, POSE_TOL};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Anthro(#[from] AnthroError),
    #[error(transparent)]
    Multibody(#[from] MultibodyError),
    #[error(transparent)]
    Mtg(#[from] MtgError),
    #[error(transparent)]
    Exo(#[from] ExoError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}

/// How the exoskeleton enters a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExoSetting {
    /// No device worn (and no device mass carried).
    None,
    /// Device worn with the given fixed spring.
    Fixed(SpringParams),
    /// Device worn; spring stiffness and rest offset are optimized.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// 16-segment model with separate left/right limbs.
    Full,
    /// 6-segment model with merged bilateral limbs, for fast runs.
    Smoke,
}

/// Everything that defines one lifting study.
#[derive(Debug, Clone)]
pub struct LiftScenario {
    pub subject: SubjectParams,
    pub kind: ModelKind,
    /// Box mass attached to the hands during the lift phase, kg.
    pub load_kg: f64,
    pub exo: ExoSetting,
    /// Worn device mass, distributed over pelvis, thighs, and trunk.
    pub exo_mass_kg: f64,
    /// Grasp point in world coordinates (x forward, z up), m.
    pub lift_point: Vec2,
    pub nodes_per_phase: usize,
    /// RK4 substeps per shooting interval.
    pub substeps: usize,
    /// Bounds on each phase duration, s.
    pub duration_bounds: (f64, f64),
    /// Search range for total spring stiffness, N m/rad.
    pub stiffness_bounds: (f64, f64),
    /// Search range for the spring rest offset, rad.
    pub rest_offset_bounds: (f64, f64),
}

impl LiftScenario {
    pub fn full(load_kg: f64, exo: ExoSetting) -> Self {
        LiftScenario {
            subject: default_subject(),
            kind: ModelKind::Full,
            load_kg,
            exo,
            exo_mass_kg: 6.6,
            lift_point: Vec2::new(0.45, 0.25),
            nodes_per_phase: 26,
            substeps: 4,
            duration_bounds: (0.2, 5.0),
            stiffness_bounds: (0.0, 200.0),
            rest_offset_bounds: (-0.6, 0.6),
        }
    }

    pub fn smoke(load_kg: f64, exo: ExoSetting) -> Self {
        LiftScenario {
            kind: ModelKind::Smoke,
            nodes_per_phase: 10,
            // Fewer nodes mean longer shooting intervals; extra substeps
            // keep the integrator stable through stiff passive-torque
            // regions that rough iterates may visit.
            substeps: 8,
            ..Self::full(load_kg, exo)
        }
    }

    /// (heel, toe) point names per foot.
    fn feet(&self) -> &'static [(&'static str, &'static str)] {
        match self.kind {
            ModelKind::Full => &[("heel_l", "toe_l"), ("heel_r", "toe_r")],
            ModelKind::Smoke => &[("heel", "toe")],
        }
    }

    fn hand_points(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::Full => &["hand_l", "hand_r"],
            ModelKind::Smoke => &["hand"],
        }
    }
}

/// One phase's dynamics: the muscle-actuated human (optionally wearing
/// the device) with both sole points welded to the ground.
pub struct LiftSystem {
    pub model: Model,
    pub contacts: ConstraintSet,
    pub mtg: MtgSet,
    exo: Option<ExoDevice>,
    free_spring: bool,
    /// Indices of the vertical rows within the constraint force vector.
    z_rows: Vec<usize>,
    nq: usize,
}

impl LiftSystem {
    fn assemble(
        model: Model,
        contacts: ConstraintSet,
        exo: Option<ExoDevice>,
        free_spring: bool,
    ) -> Result<Self, ScenarioError> {
        let mtg = MtgSet::for_model(&model, &MtgData::embedded())?;
        let mut z_rows = Vec::new();
        let mut row = 0;
        for c in &contacts.constraints {
            match c.axes {
                ConstraintAxes::X => row += 1,
                ConstraintAxes::Z => {
                    z_rows.push(row);
                    row += 1;
                }
                ConstraintAxes::Xz => {
                    z_rows.push(row + 1);
                    row += 2;
                }
            }
        }
        let nq = model.nq();
        Ok(LiftSystem {
            model,
            contacts,
            mtg,
            exo,
            free_spring,
            z_rows,
            nq,
        })
    }

    fn split_state(&self, x: &DVector<f64>) -> DynamicsState {
        DynamicsState::new(
            DVector::from_column_slice(&x.as_slice()[..self.nq]),
            DVector::from_column_slice(&x.as_slice()[self.nq..]),
        )
    }

    /// Joint torque from muscles plus, when worn, the device.
    pub fn applied_torque(
        &self,
        state: &DynamicsState,
        u: &DVector<f64>,
        p: &DVector<f64>,
    ) -> Result<DVector<f64>, ScenarioError> {
        let mut tau = self.mtg.joint_torques(u, state)?;
        if let Some(base) = &self.exo {
            let frames = self.model.frames(&state.q);
            let tuned;
            let device = if self.free_spring {
                // The stiffness bound is zero-inclusive; finite-difference
                // probes may dip a hair below it.
                tuned = base.with_params(SpringParams {
                    k: p[0].max(0.0),
                    theta0: p[1],
                })?;
                &tuned
            } else {
                base
            };
            tau += device.generalized_torque(&self.model, &frames)?;
        }
        Ok(tau)
    }

    /// Activations that approximately realize the acceleration `qdd` at
    /// state `x`: constrained inverse dynamics distributes the required
    /// generalized force over joint torques and contact forces in the
    /// least-squares sense, and each antagonistic pair absorbs its joint's
    /// torque up to the activation box. Torque the muscles cannot supply
    /// (saturation, zero active gain at extreme angles) is silently
    /// dropped; the result is a warm start, not a dynamics inverse.
    pub fn inverse_dynamics_activations(
        &self,
        x: &DVector<f64>,
        qdd: &DVector<f64>,
        p: &DVector<f64>,
    ) -> Result<DVector<f64>, ScenarioError> {
        let state = self.split_state(x);
        let nq = self.nq;
        let pairs = self.mtg.pairs();
        let m = self.contacts.dim();

        // Active torque still required: M qdd + c, minus everything already
        // supplied at zero activation (muscle passives and the device).
        let mut rhs = mass_matrix(&self.model, &state.q)? * qdd
            + nonlinear_effects(&self.model, &state)?;
        rhs -= self.applied_torque(&state, &DVector::zeros(self.nu()), p)?;

        // Columns: one unit joint torque per pair, then the contact wrench.
        let g = self.contacts.jacobian(&self.model, &state.q)?;
        let mut a = DMatrix::zeros(nq, pairs.len() + m);
        for (j, pair) in pairs.iter().enumerate() {
            a[(pair.q_index, j)] = 1.0;
        }
        a.view_mut((0, pairs.len()), (nq, m)).copy_from(&g.transpose());
        let w = a
            .svd(true, true)
            .solve(&rhs, 1e-10)
            .map_err(|_| MultibodyError::SingularMassMatrix)?;

        let mut u = DVector::zeros(self.nu());
        for (j, pair) in pairs.iter().enumerate() {
            let (q, qd) = (state.q[pair.q_index], state.qdot[pair.q_index]);
            let t = pair.torque(0.0, 0.0, q, qd)?;
            let need = w[j];
            let (gain_ext, gain_flex) = (t.dtau_da_ext, t.dtau_da_flex);
            let mut a_ext = 0.0;
            let mut a_flex = 0.0;
            if gain_ext.abs() > 1e-9 && need / gain_ext > 0.0 {
                a_ext = need / gain_ext;
            } else if gain_flex.abs() > 1e-9 && need / gain_flex > 0.0 {
                a_flex = need / gain_flex;
            }
            u[2 * j] = a_ext.clamp(0.0, 1.0);
            u[2 * j + 1] = a_flex.clamp(0.0, 1.0);
        }
        Ok(u)
    }

    /// Constrained accelerations and contact forces at one state.
    pub fn eval_dynamics(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        p: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), ScenarioError> {
        let state = self.split_state(x);
        let tau = self.applied_torque(&state, u, p)?;
        Ok(constrained_forward_dynamics(
            &self.model,
            &state,
            &tau,
            &self.contacts,
        )?)
    }

    /// Contact closure at position and velocity level, `[g(q); G(q) qdot]`.
    /// Not part of the transcription (see the note on [`PhaseSystem`] for
    /// this type); used to verify that boundary poses are consistent and
    /// that solved trajectories stay on the contact manifold.
    pub fn contact_closure(&self, x: &DVector<f64>) -> Result<DVector<f64>, ScenarioError> {
        let state = self.split_state(x);
        let m = self.contacts.dim();
        let g = self.contacts.position_residual(&self.model, &state.q)?;
        let gdot = self.contacts.velocity(&self.model, &state.q, &state.qdot)?;
        let mut out = DVector::zeros(2 * m);
        out.rows_mut(0, m).copy_from(&g);
        out.rows_mut(m, m).copy_from(&gdot);
        Ok(out)
    }
}

impl PhaseSystem for LiftSystem {
    fn nx(&self) -> usize {
        2 * self.nq
    }

    fn nu(&self) -> usize {
        self.mtg.n_activations()
    }

    fn np(&self) -> usize {
        if self.free_spring {
            2
        } else {
            0
        }
    }

    /// Returns NaN when the model cannot be evaluated (singular contact
    /// geometry, activation outside its domain); the line search treats
    /// such trial points as infinitely bad and backs off.
    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        match self.eval_dynamics(x, u, p) {
            Ok((qdd, _)) => {
                let mut dx = DVector::zeros(2 * self.nq);
                dx.rows_mut(0, self.nq)
                    .copy_from(&x.rows(self.nq, self.nq));
                dx.rows_mut(self.nq, self.nq).copy_from(&qdd);
                dx
            }
            Err(e) => {
                log::debug!("dynamics rejected trial point: {e}");
                DVector::repeat(2 * self.nq, f64::NAN)
            }
        }
    }

    // No contact-closure path equalities. The boundary states are pinned to
    // poses that satisfy them exactly, and the constrained accelerations
    // inside every shooting interval preserve them, so the defect chain
    // already carries the contact manifold across the trajectory to within
    // integration error. Enforcing the closure again at interior nodes
    // would fight the defects at exactly that error level and leave the
    // subproblems with a block of nearly dependent rows.

    fn n_path_ineq(&self) -> usize {
        self.z_rows.len()
    }

    /// Vertical contact forces must push, not pull: the ground is not
    /// glued to the feet.
    fn path_ineq(&self, x: &DVector<f64>, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        match self.eval_dynamics(x, u, p) {
            Ok((_, lambda)) => {
                DVector::from_iterator(self.z_rows.len(), self.z_rows.iter().map(|&i| lambda[i]))
            }
            Err(_) => DVector::repeat(self.z_rows.len(), f64::NAN),
        }
    }

    fn control_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let nu = self.nu();
        (DVector::zeros(nu), DVector::repeat(nu, 1.0))
    }
}

/// A fully assembled lifting problem: both phase systems, the boundary
/// pose, and the grasp conditions.
pub struct LiftProblem {
    pub scenario: LiftScenario,
    /// Phase 1: empty-handed descent to the grasp point.
    pub reach: LiftSystem,
    /// Phase 2: ascent with the load attached to the hands.
    pub lift: LiftSystem,
    /// Standing configuration used as the start and end state.
    pub q_stand: DVector<f64>,
    /// Crouched configuration satisfying contact and grasp, used to shape
    /// the initial guess.
    pub q_crouch: DVector<f64>,
    hand_points: Vec<String>,
    spring_guess: DVector<f64>,
}

impl LiftProblem {
    pub fn build(scenario: &LiftScenario) -> Result<Self, ScenarioError> {
        let mut model = match scenario.kind {
            ModelKind::Full => default_human_model(&scenario.subject)?,
            ModelKind::Smoke => default_smoke_model(&scenario.subject)?,
        };
        if !matches!(scenario.exo, ExoSetting::None) {
            let distribution = default_exo_distribution(&model);
            model = distribute_exo_mass(&model, scenario.exo_mass_kg, &distribution)?;
        }

        let q_stand = Self::rest_pose(scenario, &model)?;
        let frames = model.frames(&q_stand);
        // Each flat foot is welded with three rows: heel pinned in x and z,
        // toe held on the ground. Pinning the toe in x as well would
        // over-constrain the rigid foot.
        let mut rows = Vec::new();
        for (heel, toe) in scenario.feet() {
            rows.push(PointConstraint {
                point: heel.to_string(),
                axes: ConstraintAxes::Xz,
                anchor: model.point_world(&frames, heel)?,
            });
            rows.push(PointConstraint {
                point: toe.to_string(),
                axes: ConstraintAxes::Z,
                anchor: model.point_world(&frames, toe)?,
            });
        }
        let contacts = ConstraintSet::new(rows);

        let (exo, free_spring, spring_guess) = match scenario.exo {
            ExoSetting::None => (None, false, DVector::zeros(0)),
            ExoSetting::Fixed(params) => {
                (Some(ExoDevice::for_model(&model, params)?), false, DVector::zeros(0))
            }
            ExoSetting::Free => {
                let device = ExoDevice::for_model(
                    &model,
                    SpringParams {
                        k: 1.0,
                        theta0: 0.0,
                    },
                )?;
                // Start with a moderate spring that is unloaded while
                // standing, so the guess does not fight the device.
                let rest = device.unloaded_rest_angle(&model, &frames)?;
                let guess = DVector::from_column_slice(&[60.0, rest]);
                (Some(device), true, guess)
            }
        };

        let q_crouch = Self::crouch_pose(scenario, &model, &q_stand, &contacts)?;

        let loaded = attach_load(&model, scenario.load_kg, scenario.hand_points())?;
        let reach = LiftSystem::assemble(model, contacts.clone(), exo.clone(), free_spring)?;
        let lift = LiftSystem::assemble(loaded, contacts, exo, free_spring)?;

        Ok(LiftProblem {
            scenario: scenario.clone(),
            reach,
            lift,
            q_stand,
            q_crouch,
            hand_points: scenario.hand_points().iter().map(|s| s.to_string()).collect(),
            spring_guess,
        })
    }

    /// The boundary pose: standing with hands at the sides.
    ///
    /// The full model stands with a barely perceptible knee bend (hip,
    /// knee, and ankle angles summing to zero so the feet stay flat).
    /// With both legs perfectly straight the two closed chains formed by
    /// the welded feet become instantaneously redundant and the contact
    /// force split between the legs is indeterminate; a slight flex keeps
    /// the force distribution well defined all around the boundary states.
    fn rest_pose(scenario: &LiftScenario, model: &Model) -> Result<DVector<f64>, ScenarioError> {
        let mut q = DVector::zeros(model.nq());
        if scenario.kind == ModelKind::Full {
            for (joint, angle) in [
                ("hip_l", 0.045),
                ("hip_r", 0.045),
                ("knee_l", -0.06),
                ("knee_r", -0.06),
                ("ankle_l", 0.015),
                ("ankle_r", 0.015),
            ] {
                let seg = model
                    .segment_by_joint(joint)
                    .unwrap_or_else(|| panic!("model is missing joint {joint}"));
                q[model.joint_q_index(seg)] = angle;
            }
        }
        Ok(drop_to_ground(model, q, scenario.feet()[0].0)?)
    }

    /// Crouched template projected onto contact and grasp conditions.
    fn crouch_pose(
        scenario: &LiftScenario,
        model: &Model,
        q_stand: &DVector<f64>,
        contacts: &ConstraintSet,
    ) -> Result<DVector<f64>, ScenarioError> {
        let mut template = q_stand.clone();
        let nudges: &[(&str, f64)] = match scenario.kind {
            ModelKind::Full => &[
                ("lumbar", -0.45),
                ("thoracic", -0.3),
                ("hip_l", 1.5),
                ("hip_r", 1.5),
                ("knee_l", -1.7),
                ("knee_r", -1.7),
                ("ankle_l", 0.5),
                ("ankle_r", 0.5),
                ("shoulder_l", 1.2),
                ("shoulder_r", 1.2),
                ("elbow_l", 0.3),
                ("elbow_r", 0.3),
            ],
            ModelKind::Smoke => &[
                ("lumbar", -0.55),
                ("hip", 1.5),
                ("knee", -1.7),
                ("ankle", 0.5),
                ("shoulder", 1.3),
            ],
        };
        for (joint, angle) in nudges {
            let seg = model
                .segment_by_joint(joint)
                .unwrap_or_else(|| panic!("model is missing joint {joint}"));
            template[model.joint_q_index(seg)] = *angle;
        }

        let mut targets = contacts.clone();
        for hand in scenario.hand_points() {
            targets.constraints.push(PointConstraint {
                point: hand.to_string(),
                axes: ConstraintAxes::Xz,
                anchor: scenario.lift_point,
            });
        }
        Ok(solve_pose(model, &template, &targets, POSE_TOL, POSE_MAX_ITER)?)
    }

    /// The optimal-control formulation: two phases sharing the grasp node,
    /// standing rest states at both ends, and grasp events pinning each
    /// hand to the lift point with zero velocity.
    pub fn spec(&self) -> OcpSpec<'_> {
        let nq = self.reach.nq;
        let mut rest = DVector::zeros(2 * nq);
        rest.rows_mut(0, nq).copy_from(&self.q_stand);

        let events = self
            .hand_points
            .iter()
            .map(|hand| {
                let model = &self.reach.model;
                let target = self.scenario.lift_point;
                Event {
                    after_phase: 0,
                    dim: 4,
                    f: Box::new(move |x: &DVector<f64>, _p: &DVector<f64>| {
                        let q = DVector::from_column_slice(&x.as_slice()[..nq]);
                        let qd = DVector::from_column_slice(&x.as_slice()[nq..]);
                        match model.point_kinematics(&q, &qd, hand) {
                            Ok((pos, vel, _)) => DVector::from_column_slice(&[
                                pos.x - target.x,
                                pos.y - target.y,
                                vel.x,
                                vel.y,
                            ]),
                            Err(_) => DVector::repeat(4, f64::NAN),
                        }
                    }),
                }
            })
            .collect();

        let params = if self.reach.free_spring {
            ParamSpec {
                lower: DVector::from_column_slice(&[
                    self.scenario.stiffness_bounds.0,
                    self.scenario.rest_offset_bounds.0,
                ]),
                upper: DVector::from_column_slice(&[
                    self.scenario.stiffness_bounds.1,
                    self.scenario.rest_offset_bounds.1,
                ]),
                scale: DVector::from_column_slice(&[100.0, 1.0]),
            }
        } else {
            ParamSpec::none()
        };

        OcpSpec {
            phases: vec![
                Phase {
                    system: &self.reach,
                    n_nodes: self.scenario.nodes_per_phase,
                    substeps: self.scenario.substeps,
                },
                Phase {
                    system: &self.lift,
                    n_nodes: self.scenario.nodes_per_phase,
                    substeps: self.scenario.substeps,
                },
            ],
            start_state: rest.clone(),
            end_state: rest,
            events,
            duration_bounds: self.scenario.duration_bounds,
            params,
        }
    }

    /// Initial guess: cosine-ramp interpolation standing -> crouch ->
    /// standing with matching velocities (zero at the ends and at the
    /// grasp node), lightly active muscles, and the build-time spring.
    pub fn guess(&self, transcription: &Transcription<'_>) -> Result<DVector<f64>, OcpError> {
        let nq = self.reach.nq;
        let n = self.scenario.nodes_per_phase;
        let durations = [1.0_f64, 1.5];
        let mut states = Vec::with_capacity(2 * n - 1);
        let mut controls = Vec::with_capacity(2 * n - 1);
        for (phase, (&t_total, (a, b))) in durations
            .iter()
            .zip([
                (&self.q_stand, &self.q_crouch),
                (&self.q_crouch, &self.q_stand),
            ])
            .enumerate()
        {
            let dq = b - a;
            let system = if phase == 0 { &self.reach } else { &self.lift };
            let h = t_total / (n - 1) as f64;
            // Quintic blend between the poses: zero end velocity and
            // acceleration, so the boundary nodes are static equilibria.
            // Each node is projected back onto the contact manifold; the
            // blend moves the feet off their anchors, and dynamics along
            // an off-manifold path is dominated by constraint reactions.
            let positions: Vec<DVector<f64>> = (0..n)
                .map(|k| {
                    let s = k as f64 / (n - 1) as f64;
                    let w = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                    let template = a + &dq * w;
                    solve_pose(
                        &system.model,
                        &template,
                        &system.contacts,
                        POSE_TOL,
                        POSE_MAX_ITER,
                    )
                    .unwrap_or(template)
                })
                .collect();
            for k in 0..n {
                if phase == 1 && k == 0 {
                    continue; // the junction node is shared
                }
                // Velocities and accelerations by differencing the
                // projected path, so they stay consistent with the contact
                // constraints to discretization order.
                let (qdot, qdd) = if k == 0 || k == n - 1 {
                    (DVector::zeros(nq), DVector::zeros(nq))
                } else {
                    (
                        (&positions[k + 1] - &positions[k - 1]) / (2.0 * h),
                        (&positions[k + 1] - 2.0 * &positions[k] + &positions[k - 1])
                            / (h * h),
                    )
                };
                let mut x = DVector::zeros(2 * nq);
                x.rows_mut(0, nq).copy_from(&positions[k]);
                x.rows_mut(nq, nq).copy_from(&qdot);
                // Inverse-dynamics warm start: without it the early
                // subproblems ask the activation box for corrections it
                // cannot deliver and the solver crawls through the elastic
                // rungs.
                let u = system
                    .inverse_dynamics_activations(&x, &qdd, &self.spring_guess)
                    .unwrap_or_else(|_| DVector::repeat(system.nu(), 0.05));
                states.push(x);
                controls.push(u);
            }
        }
        transcription.pack(&states, &controls, &durations, &self.spring_guess)
    }

    /// Spring parameters in effect for a given solution, if a device is worn.
    pub fn spring_in_effect(&self, solution: &OcpSolution) -> Option<(f64, f64)> {
        match self.scenario.exo {
            ExoSetting::None => None,
            ExoSetting::Fixed(p) => Some((p.k, p.theta0)),
            ExoSetting::Free => Some((solution.params[0], solution.params[1])),
        }
    }
}

/// A solved scenario with its summary metrics.
pub struct LiftOutcome {
    pub problem: LiftProblem,
    pub solution: OcpSolution,
    pub metrics: Metrics,
}

/// Builds, transcribes, and solves one scenario end to end.
pub fn run_scenario(
    scenario: &LiftScenario,
    options: &NlpOptions,
) -> Result<LiftOutcome, ScenarioError> {
    let problem = LiftProblem::build(scenario)?;
    let solution = {
        let transcription = Transcription::new(problem.spec())?;
        let guess = problem.guess(&transcription)?;
        transcription.solve(&guess, options)?
    };
    let spring = problem.spring_in_effect(&solution);
    let metrics = compute_metrics(&problem.reach.model, &problem.reach.mtg, &solution, spring)?;
    Ok(LiftOutcome {
        problem,
        solution,
        metrics,
    })
}

/// Solver settings that work well for these transcriptions: contact rows
/// and defects should close tightly, while first-order stationarity is
/// limited by finite-difference noise.
pub fn default_lift_options() -> NlpOptions {
    NlpOptions {
        max_iter: 300,
        tol_kkt: 2e-3,
        tol_eq: 1e-6,
        tol_ineq: 1e-6,
        ..NlpOptions::default()
    }
}
