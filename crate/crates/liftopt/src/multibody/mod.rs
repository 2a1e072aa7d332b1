//! Planar rigid multibody trees with a floating base and revolute joints.
//!
//! A model is a tree of segments in the sagittal (x, z) plane. Segment 0 is
//! the floating base with three coordinates (x, z, rotation); every other
//! segment attaches to its parent through a single revolute joint whose axis
//! is the plane normal. The generalized coordinate layout is fixed:
//!
//! ```text
//! q[0] = base x      q[1] = base z      q[2] = base rotation (ccw, rad)
//! q[2 + i] = joint angle of segment i   for i in 1..n_segments
//! ```
//!
//! so `nq = 3 + (n_segments - 1)`. Each segment's frame has its origin at
//! the joint connecting it to its parent, and all frames are axis-aligned
//! with the world at the zero configuration.
//!
//! The equations of motion are
//!
//! ```text
//! M(q) qdd + c(q, qd) = tau + G(q)^T lambda,    g(q) = 0
//! ```
//!
//! with `M` the mass matrix, `c` the combined Coriolis/centrifugal and
//! gravity bias, `tau` applied generalized forces, and `G` the Jacobian of
//! the active point constraints. `lambda` carries the constraint forces in
//! Newtons; for a vertical ground-contact row, `lambda > 0` means the ground
//! pushes up.

pub mod chains;
mod constraint;
mod dynamics;
mod kinematics;

pub use constraint::{ConstraintAxes, ConstraintSet, PointConstraint};
pub use dynamics::{
    constrained_forward_dynamics, forward_dynamics, kinetic_energy, kkt_residual, mass_matrix,
    nonlinear_effects, potential_energy,
};
pub use kinematics::{FrameVel, Frames};

use crate::geom::Vec2;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Errors produced by model construction and dynamics evaluation.
#[derive(Debug, Error)]
pub enum MultibodyError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown named point `{0}`")]
    UnknownPoint(String),
    #[error("constraint set is singular or redundant (pivot {pivot:.3e} at row {row})")]
    SingularConstraint { pivot: f64, row: usize },
    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// How a segment articulates relative to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    /// Three coordinates (x, z, rotation). Only valid for segment 0.
    FloatingBase,
    /// One angle about the plane normal.
    Revolute,
}

/// Joint model attaching a segment to its parent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    /// Joint name used by actuator and scenario lookups, e.g. `hip_l`.
    pub name: String,
    pub kind: JointKind,
    /// +1 or -1; the joint angle enters the segment orientation as
    /// `axis_sign * q`. Ignored for the floating base.
    pub axis_sign: f64,
    /// Lower/upper joint angle limits in rad. Ignored for the floating base.
    pub limits: (f64, f64),
    /// Position of the joint center in the parent segment's frame.
    /// Ignored for the floating base.
    pub anchor: Vec2,
}

/// A rigid segment of the tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    /// Mass in kg (>= 0; zero marks a virtual segment).
    pub mass: f64,
    /// COM position in the segment frame (origin at the proximal joint).
    pub com_offset: Vec2,
    /// Rotational inertia about the COM, kg m^2.
    pub inertia_zz: f64,
    /// Characteristic segment length in m (> 0 for non-virtual segments).
    pub length: f64,
    /// Index of the parent segment; `None` only for segment 0.
    pub parent: Option<usize>,
    /// The joint connecting this segment to its parent.
    pub joint: JointSpec,
}

/// A point of interest fixed to a segment (contact points, hand targets,
/// exoskeleton attachments).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedPoint {
    pub segment: usize,
    /// Position in the segment frame.
    pub local: Vec2,
}

/// Generalized position/velocity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl DynamicsState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn zero(nq: usize) -> Self {
        Self {
            q: DVector::zeros(nq),
            qdot: DVector::zeros(nq),
        }
    }
}

/// A validated planar multibody tree.
///
/// Serializes to a plain JSON document (segments with joints, named points,
/// gravity) so models can be stored and exchanged; deserialization re-runs
/// full validation.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "ModelDoc")]
pub struct Model {
    name: String,
    segments: Vec<Segment>,
    points: BTreeMap<String, NamedPoint>,
    gravity: Vec2,
}

/// Serialization mirror of [`Model`]; the public JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    name: String,
    gravity: [f64; 2],
    segments: Vec<Segment>,
    points: BTreeMap<String, NamedPoint>,
}

impl From<Model> for ModelDoc {
    fn from(m: Model) -> Self {
        ModelDoc {
            name: m.name,
            gravity: [m.gravity.x, m.gravity.y],
            segments: m.segments,
            points: m.points,
        }
    }
}

impl Model {
    /// Builds and validates a model. `gravity` is the acceleration vector in
    /// (x, z), normally `(0, -9.81)`.
    pub fn new(
        name: impl Into<String>,
        segments: Vec<Segment>,
        points: BTreeMap<String, NamedPoint>,
        gravity: Vec2,
    ) -> Result<Self, MultibodyError> {
        let model = Model {
            name: name.into(),
            segments,
            points,
            gravity,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), MultibodyError> {
        let err = |msg: String| Err(MultibodyError::InvalidModel(msg));
        if self.segments.is_empty() {
            return err("model has no segments".into());
        }
        if !(self.gravity.x.is_finite() && self.gravity.y.is_finite()) {
            return Err(MultibodyError::NonFinite("gravity"));
        }
        let mut seg_names = std::collections::BTreeSet::new();
        let mut joint_names = std::collections::BTreeSet::new();
        let mut total_mass = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.name.is_empty() {
                return err(format!("segment {i} has an empty name"));
            }
            if !seg_names.insert(s.name.clone()) {
                return err(format!("duplicate segment name `{}`", s.name));
            }
            for v in [
                s.mass,
                s.inertia_zz,
                s.length,
                s.com_offset.x,
                s.com_offset.y,
                s.joint.axis_sign,
                s.joint.limits.0,
                s.joint.limits.1,
                s.joint.anchor.x,
                s.joint.anchor.y,
            ] {
                if !v.is_finite() {
                    return Err(MultibodyError::NonFinite("segment parameter"));
                }
            }
            if s.mass < 0.0 {
                return err(format!("segment `{}` has negative mass", s.name));
            }
            if s.inertia_zz < 0.0 {
                return err(format!("segment `{}` has negative inertia", s.name));
            }
            let virtual_seg = s.mass == 0.0 && s.inertia_zz == 0.0;
            if s.length <= 0.0 && !virtual_seg {
                return err(format!(
                    "segment `{}` must have positive length (got {})",
                    s.name, s.length
                ));
            }
            if i == 0 {
                if s.parent.is_some() || s.joint.kind != JointKind::FloatingBase {
                    return err("segment 0 must be the floating base with no parent".into());
                }
            } else {
                match s.parent {
                    Some(p) if p < i => {}
                    Some(p) => {
                        return err(format!(
                            "segment `{}` has parent index {p} >= its own index {i} \
                             (segments must be in topological order)",
                            s.name
                        ))
                    }
                    None => return err(format!("segment `{}` has no parent", s.name)),
                }
                if s.joint.kind != JointKind::Revolute {
                    return err(format!("segment `{}`: only segment 0 may be the base", s.name));
                }
                if s.joint.axis_sign != 1.0 && s.joint.axis_sign != -1.0 {
                    return err(format!(
                        "segment `{}`: axis_sign must be +1 or -1, got {}",
                        s.name, s.joint.axis_sign
                    ));
                }
                if s.joint.limits.0 >= s.joint.limits.1 {
                    return err(format!(
                        "segment `{}`: joint limits must satisfy lo < hi",
                        s.name
                    ));
                }
                if s.joint.name.is_empty() {
                    return err(format!("segment `{}` has an empty joint name", s.name));
                }
                if !joint_names.insert(s.joint.name.clone()) {
                    return err(format!("duplicate joint name `{}`", s.joint.name));
                }
            }
            total_mass += s.mass;
        }
        if total_mass <= 0.0 {
            return err("model has zero total mass".into());
        }
        for (name, p) in &self.points {
            if name.is_empty() {
                return err("named point with empty name".into());
            }
            if p.segment >= self.segments.len() {
                return err(format!(
                    "point `{name}` references segment {} out of range",
                    p.segment
                ));
            }
            if !(p.local.x.is_finite() && p.local.y.is_finite()) {
                return Err(MultibodyError::NonFinite("point offset"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Number of generalized coordinates: 3 base + one per revolute joint.
    pub fn nq(&self) -> usize {
        2 + self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.segments[i]
    }

    pub fn gravity(&self) -> Vec2 {
        self.gravity
    }

    pub fn total_mass(&self) -> f64 {
        self.segments.iter().map(|s| s.mass).sum()
    }

    /// Index into `q` of the joint coordinate of segment `i` (i >= 1).
    pub fn joint_q_index(&self, segment: usize) -> usize {
        debug_assert!(segment >= 1 && segment < self.segments.len());
        2 + segment
    }

    /// Segment index whose joint carries the given name.
    pub fn segment_by_joint(&self, joint_name: &str) -> Option<usize> {
        self.segments
            .iter()
            .position(|s| s.parent.is_some() && s.joint.name == joint_name)
    }

    pub fn segment_by_name(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.name == name)
    }

    pub fn point(&self, name: &str) -> Result<&NamedPoint, MultibodyError> {
        self.points
            .get(name)
            .ok_or_else(|| MultibodyError::UnknownPoint(name.to_string()))
    }

    pub fn points(&self) -> &BTreeMap<String, NamedPoint> {
        &self.points
    }

    pub fn set_point(&mut self, name: impl Into<String>, point: NamedPoint) {
        self.points.insert(name.into(), point);
    }

    /// Lower/upper bounds per generalized coordinate. Base coordinates are
    /// unbounded.
    pub fn coordinate_limits(&self) -> Vec<(f64, f64)> {
        let mut lims = vec![(f64::NEG_INFINITY, f64::INFINITY); 3];
        for s in self.segments.iter().skip(1) {
            lims.push(s.joint.limits);
        }
        lims
    }

    /// Mutates a segment's inertial properties; used by mass composition
    /// helpers. Panics on out-of-range index.
    pub(crate) fn segment_mut(&mut self, i: usize) -> &mut Segment {
        &mut self.segments[i]
    }

    pub fn to_json_string(&self) -> Result<String, MultibodyError> {
        serde_json::to_string_pretty(self).map_err(|e| MultibodyError::Serialization(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self, MultibodyError> {
        let doc: ModelDoc =
            serde_json::from_str(s).map_err(|e| MultibodyError::Serialization(e.to_string()))?;
        Model::new(
            doc.name,
            doc.segments,
            doc.points,
            Vec2::new(doc.gravity[0], doc.gravity[1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GRAVITY;

    /// A two-segment model: base box plus one pendulum link.
    fn tiny_model() -> Model {
        let base = Segment {
            name: "base".into(),
            mass: 2.0,
            com_offset: Vec2::new(0.0, 0.0),
            inertia_zz: 0.1,
            length: 0.4,
            parent: None,
            joint: JointSpec {
                name: String::new(),
                kind: JointKind::FloatingBase,
                axis_sign: 1.0,
                limits: (0.0, 0.0),
                anchor: Vec2::zeros(),
            },
        };
        let link = Segment {
            name: "link".into(),
            mass: 1.0,
            com_offset: Vec2::new(0.0, -0.25),
            inertia_zz: 0.02,
            length: 0.5,
            parent: Some(0),
            joint: JointSpec {
                name: "pivot".into(),
                kind: JointKind::Revolute,
                axis_sign: 1.0,
                limits: (-3.0, 3.0),
                anchor: Vec2::new(0.1, 0.0),
            },
        };
        let mut points = BTreeMap::new();
        points.insert(
            "tip".to_string(),
            NamedPoint {
                segment: 1,
                local: Vec2::new(0.0, -0.5),
            },
        );
        Model::new("tiny", vec![base, link], points, Vec2::new(0.0, -GRAVITY)).unwrap()
    }

    #[test]
    fn layout_and_lookup() {
        let m = tiny_model();
        assert_eq!(m.nq(), 4);
        assert_eq!(m.joint_q_index(1), 3);
        assert_eq!(m.segment_by_joint("pivot"), Some(1));
        assert_eq!(m.total_mass(), 3.0);
        assert!(m.point("tip").is_ok());
        assert!(matches!(
            m.point("nope"),
            Err(MultibodyError::UnknownPoint(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_trees() {
        let mut segs = tiny_model().segments.to_vec();
        segs[1].parent = Some(1);
        assert!(Model::new("bad", segs, BTreeMap::new(), Vec2::new(0.0, -GRAVITY)).is_err());

        let mut segs = tiny_model().segments.to_vec();
        segs[1].mass = -1.0;
        assert!(Model::new("bad", segs, BTreeMap::new(), Vec2::new(0.0, -GRAVITY)).is_err());

        let mut segs = tiny_model().segments.to_vec();
        segs[1].joint.axis_sign = 0.5;
        assert!(Model::new("bad", segs, BTreeMap::new(), Vec2::new(0.0, -GRAVITY)).is_err());
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let m = tiny_model();
        let s = m.to_json_string().unwrap();
        let m2 = Model::from_json_str(&s).unwrap();
        assert_eq!(m2.n_segments(), m.n_segments());
        assert_eq!(m2.segment(1).name, "link");
        assert_eq!(m2.point("tip").unwrap().segment, 1);
        assert_eq!(m2.to_json_string().unwrap(), s);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let m = tiny_model();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json_string().unwrap()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("bogus".into(), serde_json::json!(1));
        assert!(Model::from_json_str(&v.to_string()).is_err());
    }
}
