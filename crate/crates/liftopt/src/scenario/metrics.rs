//! Back-load and effort metrics extracted from a solved lifting motion.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::mtg::{MtgError, MtgSet};
use crate::multibody::{DynamicsState, Model};
use crate::ocp::OcpSolution;

/// Summary statistics of one lifting motion.
///
/// Torque quantities refer to the net muscle torque at the lumbar joint,
/// where positive means extension. The exoskeleton contribution is not
/// included: the point of the device is precisely to lower what the muscles
/// themselves must produce.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    /// Largest lumbar extension torque over the motion, N m.
    pub peak_lumbar_torque: f64,
    /// Time integral of positive (extension) lumbar torque, N m s.
    pub cumulative_lumbar_load: f64,
    /// The optimized objective: integral of squared activations, s.
    pub effort: f64,
    /// Phase durations, s.
    pub durations: Vec<f64>,
    /// Most flexed lumbar angle reached, degrees (negative = flexion).
    pub min_lumbar_angle_deg: f64,
    /// Most flexed hip angle reached, degrees (positive = flexion).
    pub max_hip_angle_deg: f64,
    /// Deepest knee bend, degrees (negative = flexion).
    pub min_knee_angle_deg: f64,
    /// Optimized spring stiffness, N m/rad, when the device was free.
    pub spring_stiffness: Option<f64>,
    /// Optimized spring rest offset, degrees, when the device was free.
    pub spring_rest_offset_deg: Option<f64>,
}

/// Mean of the q indices of all joints named `base` or `base_l`/`base_r`.
fn joint_angle(model: &Model, q: &DVector<f64>, base: &str) -> Option<f64> {
    let sided = [format!("{base}_l"), format!("{base}_r")];
    let mut sum = 0.0;
    let mut n = 0;
    for name in std::iter::once(base.to_string()).chain(sided) {
        if let Some(seg) = model.segment_by_joint(&name) {
            sum += q[model.joint_q_index(seg)];
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Net muscle torque at the lumbar joint for one node.
fn lumbar_torque(
    model: &Model,
    mtg: &MtgSet,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<f64, MtgError> {
    let nq = model.nq();
    let state = DynamicsState::new(
        DVector::from_column_slice(&x.as_slice()[..nq]),
        DVector::from_column_slice(&x.as_slice()[nq..]),
    );
    let tau = mtg.joint_torques(u, &state)?;
    let row = model.joint_q_index(model.segment_by_joint("lumbar").expect("lumbar joint"));
    Ok(tau[row])
}

/// Computes back-load metrics over every node of a solved motion.
///
/// The cumulative load integrates the positive part of the lumbar torque
/// with the trapezoid rule on each phase grid; the shared junction node
/// is the endpoint of one phase and the start of the next, so nothing is
/// double counted.
pub fn compute_metrics(
    model: &Model,
    mtg: &MtgSet,
    solution: &OcpSolution,
    spring: Option<(f64, f64)>,
) -> Result<Metrics, MtgError> {
    let mut peak: f64 = 0.0;
    let mut clbl = 0.0;
    let mut min_lumbar = f64::INFINITY;
    let mut max_hip = f64::NEG_INFINITY;
    let mut min_knee = f64::INFINITY;
    let nq = model.nq();

    for phase in &solution.phases {
        let mut prev: Option<(f64, f64)> = None;
        for (k, x) in phase.states.iter().enumerate() {
            let tau = lumbar_torque(model, mtg, x, &phase.controls[k])?;
            peak = peak.max(tau);
            let t = phase.times[k];
            if let Some((t0, tau0)) = prev {
                clbl += 0.5 * (t - t0) * (tau0.max(0.0) + tau.max(0.0));
            }
            prev = Some((t, tau));

            let q = DVector::from_column_slice(&x.as_slice()[..nq]);
            if let Some(a) = joint_angle(model, &q, "lumbar") {
                min_lumbar = min_lumbar.min(a);
            }
            if let Some(a) = joint_angle(model, &q, "hip") {
                max_hip = max_hip.max(a);
            }
            if let Some(a) = joint_angle(model, &q, "knee") {
                min_knee = min_knee.min(a);
            }
        }
    }

    Ok(Metrics {
        peak_lumbar_torque: peak,
        cumulative_lumbar_load: clbl,
        effort: solution.objective,
        durations: solution.durations.clone(),
        min_lumbar_angle_deg: min_lumbar.to_degrees(),
        max_hip_angle_deg: max_hip.to_degrees(),
        min_knee_angle_deg: min_knee.to_degrees(),
        spring_stiffness: spring.map(|s| s.0),
        spring_rest_offset_deg: spring.map(|s| s.1.to_degrees()),
    })
}
