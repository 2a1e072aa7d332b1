//! Muscle torque generators (MTGs): lumped joint actuators with
//! activation, torque-angle, torque-velocity and passive characteristics.
//!
//! Each revolute joint carries an antagonistic extensor/flexor pair. A
//! generator with direction `sign`, activation `a`, joint angle `q` and
//! joint velocity `qdot` produces
//!
//! ```text
//! tau = sign * tau0 * (a * fA(q) * fV(w) - beta * w / omega_max + fP(q))
//! w   = sign * qdot
//! ```
//!
//! so `w > 0` is shortening (motion in the generator's own direction) and
//! all three characteristic curves are C2 piecewise quintic Beziers. The
//! damping term resists shortening; together with the eccentric plateau of
//! `fV` it bounds the active torque by `tau0 * (max fV + beta)`.

pub mod curve;
pub mod defaults;

use crate::multibody::{DynamicsState, Model};
use curve::QuinticBezier;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtgError {
    #[error("activation {0} outside [0, 1]")]
    InvalidActivation(f64),
    #[error("non-finite input to torque evaluation")]
    NonFinite,
    #[error("curve data: {0}")]
    Curve(#[from] curve::CurveError),
    #[error("unsupported curve data version {0}")]
    Version(u32),
    #[error("no default characteristics for joint {0:?}")]
    UnknownJoint(String),
    #[error("model has no joint named {0:?}")]
    UnknownModelJoint(String),
    #[error("invalid parameters for {joint}: {what}")]
    BadParams { joint: String, what: String },
    #[error("curve data: {0}")]
    Serialization(String),
}

/// Slack accepted around the `[0, 1]` activation bounds. The torque is
/// affine in activation, so tiny excursions (finite-difference probes of
/// the transcription) extrapolate exactly; real misuse still errors.
pub const ACTIVATION_SLACK: f64 = 1e-3;

/// Parameters of one generator, as stored in the curve data file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtgParams {
    pub tau0: f64,
    pub omega_max: f64,
    pub beta: f64,
    pub sign: f64,
    pub f_active: QuinticBezier,
    pub f_velocity: QuinticBezier,
    pub f_passive: QuinticBezier,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtgPairData {
    pub extensor: MtgParams,
    pub flexor: MtgParams,
}

/// The on-disk curve dataset: characteristics per anatomical joint
/// (side-free names; left/right share data).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtgData {
    pub version: u32,
    pub joints: BTreeMap<String, MtgPairData>,
}

/// Shipped default curve dataset (generated from [`defaults::default_data`];
/// see the ignored `regenerate_curve_data` test).
pub const MTG_CURVES_JSON: &str = include_str!("../../data/mtg_curves.json");

impl MtgData {
    pub fn from_json_str(s: &str) -> Result<Self, MtgError> {
        let data: MtgData =
            serde_json::from_str(s).map_err(|e| MtgError::Serialization(e.to_string()))?;
        data.validate()?;
        Ok(data)
    }

    pub fn to_json_string(&self) -> Result<String, MtgError> {
        serde_json::to_string_pretty(self).map_err(|e| MtgError::Serialization(e.to_string()))
    }

    /// The embedded default dataset.
    pub fn embedded() -> Self {
        Self::from_json_str(MTG_CURVES_JSON).expect("embedded curve data is valid")
    }

    fn validate(&self) -> Result<(), MtgError> {
        if self.version != defaults::MTG_DATA_VERSION {
            return Err(MtgError::Version(self.version));
        }
        for (joint, pair) in &self.joints {
            for (side, p) in [("extensor", &pair.extensor), ("flexor", &pair.flexor)] {
                let bad = |what: &str| MtgError::BadParams {
                    joint: format!("{joint}/{side}"),
                    what: what.to_string(),
                };
                if !(p.tau0 > 0.0 && p.tau0.is_finite()) {
                    return Err(bad("tau0 must be positive"));
                }
                if !(p.omega_max > 0.0 && p.omega_max.is_finite()) {
                    return Err(bad("omega_max must be positive"));
                }
                if !(p.beta >= 0.0 && p.beta.is_finite()) {
                    return Err(bad("beta must be nonnegative"));
                }
                if p.sign != 1.0 && p.sign != -1.0 {
                    return Err(bad("sign must be +1 or -1"));
                }
                if p.f_active.hull_min() < -1e-12 || p.f_passive.hull_min() < -1e-12 {
                    return Err(bad("fA and fP must be nonnegative"));
                }
                let (lo, hi) = p.f_velocity.domain();
                if (lo + p.omega_max).abs() > 1e-9 || (hi - p.omega_max).abs() > 1e-9 {
                    return Err(bad("fV domain must be [-omega_max, omega_max]"));
                }
            }
        }
        Ok(())
    }
}

/// Value and partial derivatives of one generator's torque.
#[derive(Debug, Clone, Copy)]
pub struct MtgTorque {
    pub tau: f64,
    pub dtau_da: f64,
    pub dtau_dq: f64,
    pub dtau_dqdot: f64,
}

/// One instantiated generator bound to a joint coordinate.
#[derive(Debug, Clone)]
pub struct Mtg {
    pub name: String,
    pub params: MtgParams,
}

impl Mtg {
    /// Torque and partials for activation `a` at joint state `(q, qdot)`.
    ///
    /// Preconditions: `a` in `[0, 1]` (a slack of [`ACTIVATION_SLACK`] is
    /// tolerated and extrapolated exactly, the torque being affine in `a`).
    pub fn torque(&self, a: f64, q: f64, qdot: f64) -> Result<MtgTorque, MtgError> {
        if !(a.is_finite() && q.is_finite() && qdot.is_finite()) {
            return Err(MtgError::NonFinite);
        }
        if !(-ACTIVATION_SLACK..=1.0 + ACTIVATION_SLACK).contains(&a) {
            return Err(MtgError::InvalidActivation(a));
        }
        let p = &self.params;
        let s = p.sign;
        let w = s * qdot;
        let fa = p.f_active.eval(q);
        let fv = p.f_velocity.eval(w);
        let fp = p.f_passive.eval(q);
        let inner = a * fa.y * fv.y - p.beta * w / p.omega_max + fp.y;
        Ok(MtgTorque {
            tau: s * p.tau0 * inner,
            dtau_da: s * p.tau0 * fa.y * fv.y,
            dtau_dq: s * p.tau0 * (a * fa.dy * fv.y + fp.dy),
            // d w / d qdot = sign, and the leading sign multiplies through.
            dtau_dqdot: s * p.tau0 * (a * fa.y * fv.dy - p.beta / p.omega_max) * s,
        })
    }

    /// Upper bound on `|tau|` over valid activations and all states, from
    /// the convex hull of the curve control points.
    pub fn torque_bound(&self) -> f64 {
        let p = &self.params;
        let active = p.f_active.hull_max() * p.f_velocity.hull_max();
        p.tau0 * (active + p.beta + p.f_passive.hull_max())
    }
}

/// Antagonistic pair at one model joint.
#[derive(Debug, Clone)]
pub struct MtgPair {
    pub joint: String,
    /// Coordinate index of the joint in the model's `q`.
    pub q_index: usize,
    pub extensor: Mtg,
    pub flexor: Mtg,
}

/// Net pair torque and its partials; activations are `(a_ext, a_flex)`.
#[derive(Debug, Clone, Copy)]
pub struct PairTorque {
    pub tau: f64,
    pub dtau_da_ext: f64,
    pub dtau_da_flex: f64,
    pub dtau_dq: f64,
    pub dtau_dqdot: f64,
}

impl MtgPair {
    pub fn torque(&self, a_ext: f64, a_flex: f64, q: f64, qdot: f64) -> Result<PairTorque, MtgError> {
        let e = self.extensor.torque(a_ext, q, qdot)?;
        let f = self.flexor.torque(a_flex, q, qdot)?;
        Ok(PairTorque {
            tau: e.tau + f.tau,
            dtau_da_ext: e.dtau_da,
            dtau_da_flex: f.dtau_da,
            dtau_dq: e.dtau_dq + f.dtau_dq,
            dtau_dqdot: e.dtau_dqdot + f.dtau_dqdot,
        })
    }
}

/// How one model joint binds to a dataset entry. `tau0_scale` lumps
/// bilateral joints into one coordinate in reduced models.
#[derive(Debug, Clone)]
pub struct JointBinding {
    pub joint: String,
    pub data_key: String,
    pub tau0_scale: f64,
}

impl JointBinding {
    pub fn new(joint: &str, data_key: &str, tau0_scale: f64) -> Self {
        JointBinding {
            joint: joint.to_string(),
            data_key: data_key.to_string(),
            tau0_scale,
        }
    }
}

/// Strips a trailing `_l` / `_r` side suffix to get the dataset key.
pub fn side_free_joint_name(joint: &str) -> &str {
    joint
        .strip_suffix("_l")
        .or_else(|| joint.strip_suffix("_r"))
        .unwrap_or(joint)
}

/// The full actuation of a model: one pair per actuated joint.
///
/// Activation vectors are laid out `[ext_0, flex_0, ext_1, flex_1, ...]`
/// in pair order.
#[derive(Debug, Clone)]
pub struct MtgSet {
    pairs: Vec<MtgPair>,
    nq: usize,
}

impl MtgSet {
    /// Binds dataset entries to all revolute joints of `model`, stripping
    /// side suffixes to find data keys and scaling `tau0` by each
    /// binding's factor.
    pub fn assemble(
        model: &Model,
        data: &MtgData,
        bindings: &[JointBinding],
    ) -> Result<Self, MtgError> {
        let mut pairs = Vec::with_capacity(bindings.len());
        for b in bindings {
            let idx = model
                .segment_by_joint(&b.joint)
                .ok_or_else(|| MtgError::UnknownModelJoint(b.joint.clone()))?;
            let pair = data
                .joints
                .get(&b.data_key)
                .ok_or_else(|| MtgError::UnknownJoint(b.data_key.clone()))?;
            if !(b.tau0_scale > 0.0 && b.tau0_scale.is_finite()) {
                return Err(MtgError::BadParams {
                    joint: b.joint.clone(),
                    what: "tau0_scale must be positive".to_string(),
                });
            }
            let scale = |p: &MtgParams| {
                let mut p = p.clone();
                p.tau0 *= b.tau0_scale;
                p
            };
            pairs.push(MtgPair {
                joint: b.joint.clone(),
                q_index: model.joint_q_index(idx),
                extensor: Mtg {
                    name: format!("{}_extensor", b.joint),
                    params: scale(&pair.extensor),
                },
                flexor: Mtg {
                    name: format!("{}_flexor", b.joint),
                    params: scale(&pair.flexor),
                },
            });
        }
        Ok(MtgSet {
            pairs,
            nq: model.nq(),
        })
    }

    /// Default binding: every revolute joint of the model, data key by
    /// side-free name, unit scale.
    pub fn for_model(model: &Model, data: &MtgData) -> Result<Self, MtgError> {
        let bindings: Vec<JointBinding> = model
            .segments()
            .iter()
            .filter(|s| s.parent.is_some())
            .map(|s| JointBinding::new(&s.joint.name, side_free_joint_name(&s.joint.name), 1.0))
            .collect();
        Self::assemble(model, data, &bindings)
    }

    pub fn pairs(&self) -> &[MtgPair] {
        &self.pairs
    }

    pub fn pair_by_joint(&self, joint: &str) -> Option<&MtgPair> {
        self.pairs.iter().find(|p| p.joint == joint)
    }

    /// Number of activation inputs (two per pair).
    pub fn n_activations(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    /// Generalized torque vector from activations `u` at `state`. Base
    /// coordinates receive zero; each actuated joint row gets its pair's
    /// net torque.
    pub fn joint_torques(
        &self,
        u: &DVector<f64>,
        state: &DynamicsState,
    ) -> Result<DVector<f64>, MtgError> {
        if u.len() != self.n_activations() || state.q.len() != self.nq {
            return Err(MtgError::BadParams {
                joint: "(all)".to_string(),
                what: format!(
                    "expected {} activations and {} coordinates, got {} and {}",
                    self.n_activations(),
                    self.nq,
                    u.len(),
                    state.q.len()
                ),
            });
        }
        let mut tau = DVector::zeros(self.nq);
        for (i, pair) in self.pairs.iter().enumerate() {
            let k = pair.q_index;
            let t = pair.torque(u[2 * i], u[2 * i + 1], state.q[k], state.qdot[k])?;
            tau[k] += t.tau;
        }
        Ok(tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anthro;
    use approx::assert_relative_eq;

    fn lumbar_extensor() -> Mtg {
        let data = defaults::default_data();
        Mtg {
            name: "lumbar_extensor".to_string(),
            params: data.joints["lumbar"].extensor.clone(),
        }
    }

    #[test]
    fn torque_is_affine_in_activation() {
        let m = lumbar_extensor();
        let (q, qdot) = (-0.2, 0.7);
        let t0 = m.torque(0.0, q, qdot).unwrap();
        let t1 = m.torque(1.0, q, qdot).unwrap();
        let th = m.torque(0.5, q, qdot).unwrap();
        assert_relative_eq!(th.tau, 0.5 * (t0.tau + t1.tau), epsilon = 1e-10);
        assert_relative_eq!(t1.tau - t0.tau, t1.dtau_da, epsilon = 1e-10);
    }

    #[test]
    fn partials_match_finite_differences() {
        let m = lumbar_extensor();
        let (a, q, qdot) = (0.6, -0.25, 0.9);
        let t = m.torque(a, q, qdot).unwrap();
        let h = 1e-6;
        let fd_q = (m.torque(a, q + h, qdot).unwrap().tau - m.torque(a, q - h, qdot).unwrap().tau)
            / (2.0 * h);
        let fd_w = (m.torque(a, q, qdot + h).unwrap().tau - m.torque(a, q, qdot - h).unwrap().tau)
            / (2.0 * h);
        assert_relative_eq!(t.dtau_dq, fd_q, epsilon = 1e-5, max_relative = 1e-5);
        assert_relative_eq!(t.dtau_dqdot, fd_w, epsilon = 1e-5, max_relative = 1e-5);
    }

    #[test]
    fn activation_bounds_enforced_with_slack() {
        let m = lumbar_extensor();
        assert!(m.torque(1.2, 0.0, 0.0).is_err());
        assert!(m.torque(-0.1, 0.0, 0.0).is_err());
        assert!(m.torque(1.0 + 1e-6, 0.0, 0.0).is_ok());
        assert!(m.torque(-1e-6, 0.0, 0.0).is_ok());
        assert!(m.torque(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn damping_opposes_shortening() {
        let m = lumbar_extensor();
        // Zero activation, neutral angle (no passive): only damping acts.
        // Extensor sign +1, shortening qdot > 0 must brake (negative tau).
        let t = m.torque(0.0, -0.1, 2.0).unwrap();
        assert!(t.tau < 0.0, "damping must oppose motion, got {}", t.tau);
        let t = m.torque(0.0, -0.1, -2.0).unwrap();
        assert!(t.tau > 0.0);
    }

    #[test]
    fn embedded_data_matches_programmatic_defaults() {
        let embedded = MtgData::embedded();
        let built = defaults::default_data();
        let a = serde_json::to_value(&embedded).unwrap();
        let b = serde_json::to_value(&built).unwrap();
        assert_eq!(a, b, "shipped mtg_curves.json is stale; rerun the regenerate_curve_data test");
    }

    #[test]
    #[ignore = "writes data/mtg_curves.json; run manually after editing defaults"]
    fn regenerate_curve_data() {
        let data = defaults::default_data();
        let json = data.to_json_string().unwrap();
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mtg_curves.json");
        std::fs::write(path, json + "\n").unwrap();
    }

    #[test]
    fn set_assembles_for_both_models() {
        let data = defaults::default_data();
        let subject = anthro::default_subject();
        let full = anthro::default_human_model(&subject).unwrap();
        let set = MtgSet::for_model(&full, &data).unwrap();
        assert_eq!(set.pairs().len(), 15);
        assert_eq!(set.n_activations(), 30);
        let smoke = anthro::default_smoke_model(&subject).unwrap();
        let set = MtgSet::for_model(&smoke, &data).unwrap();
        assert_eq!(set.pairs().len(), 5);
        // Bilateral lumping via scale.
        let bindings = vec![
            JointBinding::new("lumbar", "lumbar", 1.0),
            JointBinding::new("hip", "hip", 2.0),
        ];
        let set2 = MtgSet::assemble(&smoke, &data, &bindings).unwrap();
        let hip = set2.pair_by_joint("hip").unwrap();
        assert_relative_eq!(hip.extensor.params.tau0, 2.0 * data.joints["hip"].extensor.tau0);
    }

    #[test]
    fn joint_torque_vector_routes_to_coordinates() {
        let data = defaults::default_data();
        let subject = anthro::default_subject();
        let model = anthro::default_smoke_model(&subject).unwrap();
        let set = MtgSet::for_model(&model, &data).unwrap();
        let mut state = DynamicsState::zero(model.nq());
        state.q[2] = 0.1;
        let mut u = DVector::zeros(set.n_activations());
        u[0] = 0.5;
        let tau = set.joint_torques(&u, &state).unwrap();
        assert_eq!(tau.len(), model.nq());
        assert_eq!(tau[0], 0.0);
        assert_eq!(tau[1], 0.0);
        assert_eq!(tau[2], 0.0);
        // Exactly the actuated rows can be nonzero; with only the first
        // pair's extensor active, exactly one row is.
        let nonzero = tau.iter().filter(|t| t.abs() > 0.0).count();
        assert_eq!(nonzero, 1);
        // Dimension mismatch is rejected.
        assert!(set.joint_torques(&DVector::zeros(3), &state).is_err());
    }

    #[test]
    fn active_torque_bounded_by_hull() {
        let m = lumbar_extensor();
        let bound = m.torque_bound();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            // xorshift, plenty for a coverage sweep
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let a = next();
            let q = -1.0 + 2.0 * next();
            let qdot = -8.0 + 16.0 * next();
            let t = m.torque(a, q, qdot).unwrap();
            assert!(
                t.tau.abs() <= bound + 1e-9,
                "torque {} exceeded hull bound {bound}",
                t.tau
            );
        }
    }
}
