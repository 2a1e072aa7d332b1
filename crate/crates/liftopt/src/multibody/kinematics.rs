//! Forward kinematics: world frames, velocities, bias accelerations, and
//! point Jacobians.

use super::{Model, MultibodyError};
use crate::geom::{perp, rotate, Vec2};
use nalgebra::{DMatrix, DVector};

/// World placement of every segment at a given configuration.
#[derive(Debug, Clone)]
pub struct Frames {
    /// World orientation angle per segment (ccw, rad).
    pub angle: Vec<f64>,
    /// World position of each segment's joint origin.
    pub origin: Vec<Vec2>,
    /// World position of each segment's COM.
    pub com: Vec<Vec2>,
}

/// World velocities of every segment.
#[derive(Debug, Clone)]
pub struct FrameVel {
    /// Angular velocity per segment (rad/s).
    pub omega: Vec<f64>,
    /// Velocity of each segment's joint origin.
    pub v_origin: Vec<Vec2>,
    /// Velocity of each segment's COM.
    pub v_com: Vec<Vec2>,
}

/// Bias (zero `qdd`) accelerations of every segment. In a planar tree the
/// angular bias vanishes identically: angular velocities add as scalars, so
/// with `qdd = 0` every angular acceleration is zero and only centripetal
/// terms remain.
#[derive(Debug, Clone)]
pub(crate) struct FrameBias {
    pub a_com: Vec<Vec2>,
}

impl Model {
    /// Evaluates world frames for configuration `q`.
    pub fn frames(&self, q: &DVector<f64>) -> Frames {
        let n = self.n_segments();
        debug_assert_eq!(q.len(), self.nq());
        let mut angle = vec![0.0; n];
        let mut origin = vec![Vec2::zeros(); n];
        let mut com = vec![Vec2::zeros(); n];
        angle[0] = q[2];
        origin[0] = Vec2::new(q[0], q[1]);
        com[0] = origin[0] + rotate(angle[0], self.segment(0).com_offset);
        for i in 1..n {
            let s = self.segment(i);
            let p = s.parent.expect("validated tree");
            angle[i] = angle[p] + s.joint.axis_sign * q[self.joint_q_index(i)];
            origin[i] = origin[p] + rotate(angle[p], s.joint.anchor);
            com[i] = origin[i] + rotate(angle[i], s.com_offset);
        }
        Frames { angle, origin, com }
    }

    /// Propagates velocities down the tree.
    pub fn velocities(&self, frames: &Frames, qdot: &DVector<f64>) -> FrameVel {
        let n = self.n_segments();
        debug_assert_eq!(qdot.len(), self.nq());
        let mut omega = vec![0.0; n];
        let mut v_origin = vec![Vec2::zeros(); n];
        let mut v_com = vec![Vec2::zeros(); n];
        omega[0] = qdot[2];
        v_origin[0] = Vec2::new(qdot[0], qdot[1]);
        v_com[0] = v_origin[0] + omega[0] * perp(frames.com[0] - frames.origin[0]);
        for i in 1..n {
            let s = self.segment(i);
            let p = s.parent.expect("validated tree");
            let r = frames.origin[i] - frames.origin[p];
            omega[i] = omega[p] + s.joint.axis_sign * qdot[self.joint_q_index(i)];
            v_origin[i] = v_origin[p] + omega[p] * perp(r);
            v_com[i] = v_origin[i] + omega[i] * perp(frames.com[i] - frames.origin[i]);
        }
        FrameVel {
            omega,
            v_origin,
            v_com,
        }
    }

    /// COM accelerations with `qdd = 0` (centripetal terms only).
    pub(crate) fn bias_accelerations(&self, frames: &Frames, vel: &FrameVel) -> FrameBias {
        let n = self.n_segments();
        let mut a_origin = vec![Vec2::zeros(); n];
        let mut a_com = vec![Vec2::zeros(); n];
        a_com[0] = -vel.omega[0] * vel.omega[0] * (frames.com[0] - frames.origin[0]);
        for i in 1..n {
            let p = self.segment(i).parent.expect("validated tree");
            let r = frames.origin[i] - frames.origin[p];
            a_origin[i] = a_origin[p] - vel.omega[p] * vel.omega[p] * r;
            a_com[i] = a_origin[i]
                - vel.omega[i] * vel.omega[i] * (frames.com[i] - frames.origin[i]);
        }
        FrameBias { a_com }
    }

    /// World position of a point given by segment index and local offset.
    pub fn point_world_raw(&self, frames: &Frames, segment: usize, local: Vec2) -> Vec2 {
        frames.origin[segment] + rotate(frames.angle[segment], local)
    }

    /// World position of a named point.
    pub fn point_world(&self, frames: &Frames, name: &str) -> Result<Vec2, MultibodyError> {
        let p = self.point(name)?;
        Ok(self.point_world_raw(frames, p.segment, p.local))
    }

    /// World velocity of a point fixed to `segment`.
    pub fn point_velocity_raw(
        &self,
        frames: &Frames,
        vel: &FrameVel,
        segment: usize,
        local: Vec2,
    ) -> Vec2 {
        let pw = self.point_world_raw(frames, segment, local);
        vel.v_origin[segment] + vel.omega[segment] * perp(pw - frames.origin[segment])
    }

    /// Chain of joint coordinates influencing `segment`, as
    /// `(q index, axis sign, world joint origin)` triples, root first.
    /// The base rotation appears with its origin at the base position.
    fn ancestor_joints(&self, frames: &Frames, segment: usize) -> Vec<(usize, f64, Vec2)> {
        let mut chain = Vec::new();
        let mut i = segment;
        while let Some(p) = self.segment(i).parent {
            chain.push((
                self.joint_q_index(i),
                self.segment(i).joint.axis_sign,
                frames.origin[i],
            ));
            i = p;
        }
        chain.push((2, 1.0, frames.origin[0]));
        chain.reverse();
        chain
    }

    /// 2 x nq Jacobian of the world position of a point fixed to `segment`.
    pub fn point_jacobian_raw(
        &self,
        frames: &Frames,
        segment: usize,
        local: Vec2,
    ) -> DMatrix<f64> {
        let nq = self.nq();
        let pw = self.point_world_raw(frames, segment, local);
        let mut jac = DMatrix::zeros(2, nq);
        jac[(0, 0)] = 1.0;
        jac[(1, 1)] = 1.0;
        for (qi, sign, origin) in self.ancestor_joints(frames, segment) {
            let col = sign * perp(pw - origin);
            jac[(0, qi)] = col.x;
            jac[(1, qi)] = col.y;
        }
        jac
    }

    /// Jacobian of a named point.
    pub fn point_jacobian(
        &self,
        frames: &Frames,
        name: &str,
    ) -> Result<DMatrix<f64>, MultibodyError> {
        let p = self.point(name)?;
        Ok(self.point_jacobian_raw(frames, p.segment, p.local))
    }

    /// Position, velocity, and Jacobian of a named point in one call.
    pub fn point_kinematics(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        name: &str,
    ) -> Result<(Vec2, Vec2, DMatrix<f64>), MultibodyError> {
        if q.len() != self.nq() {
            return Err(MultibodyError::DimensionMismatch {
                what: "q",
                expected: self.nq(),
                got: q.len(),
            });
        }
        if qdot.len() != self.nq() {
            return Err(MultibodyError::DimensionMismatch {
                what: "qdot",
                expected: self.nq(),
                got: qdot.len(),
            });
        }
        if q.iter().chain(qdot.iter()).any(|v| !v.is_finite()) {
            return Err(MultibodyError::NonFinite("state"));
        }
        let point = self.point(name)?;
        let frames = self.frames(q);
        let jac = self.point_jacobian_raw(&frames, point.segment, point.local);
        let pos = self.point_world_raw(&frames, point.segment, point.local);
        let vel = &jac * qdot;
        Ok((pos, Vec2::new(vel[0], vel[1]), jac))
    }

    /// Angular Jacobian row of a segment: d(world angle)/dq, 1 x nq.
    pub fn angular_jacobian(&self, frames: &Frames, segment: usize) -> DVector<f64> {
        let mut row = DVector::zeros(self.nq());
        for (qi, sign, _) in self.ancestor_joints(frames, segment) {
            row[qi] = sign;
        }
        row
    }

    /// World COM of the whole model.
    pub fn com_world(&self, frames: &Frames) -> Vec2 {
        let mut acc = Vec2::zeros();
        for (i, s) in self.segments().iter().enumerate() {
            acc += s.mass * frames.com[i];
        }
        acc / self.total_mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multibody::chains::n_link_chain;
    use approx::assert_relative_eq;

    #[test]
    fn reference_pose_matches_documented_coordinates() {
        let m = n_link_chain(2);
        let q = DVector::zeros(m.nq());
        let frames = m.frames(&q);
        // Links hang downward at q = 0; tip sits at -(l1 + l2) below base.
        let tip = m.point_world(&frames, "tip").unwrap();
        let expect = -(m.segment(1).length + m.segment(2).length);
        assert_relative_eq!(tip.x, 0.0, epsilon = 1e-14);
        assert_relative_eq!(tip.y, expect, epsilon = 1e-14);
    }

    #[test]
    fn point_velocity_matches_jacobian_product() {
        let m = n_link_chain(3);
        let q = DVector::from_vec(vec![0.2, -0.1, 0.3, 0.5, -0.8, 1.1]);
        let qd = DVector::from_vec(vec![-0.4, 0.2, 1.3, -0.7, 0.9, 0.25]);
        let frames = m.frames(&q);
        let vel = m.velocities(&frames, &qd);
        let p = m.point("tip").unwrap().clone();
        let v_rec = m.point_velocity_raw(&frames, &vel, p.segment, p.local);
        let (_, v_jac, _) = m.point_kinematics(&q, &qd, "tip").unwrap();
        assert_relative_eq!(v_rec, v_jac, epsilon = 1e-12);
    }

    #[test]
    fn point_kinematics_rejects_bad_input() {
        let m = n_link_chain(1);
        let q = DVector::zeros(m.nq());
        let qd = DVector::zeros(m.nq() + 1);
        assert!(matches!(
            m.point_kinematics(&q, &qd, "tip"),
            Err(MultibodyError::DimensionMismatch { .. })
        ));
        let mut q_bad = q.clone();
        q_bad[0] = f64::NAN;
        assert!(matches!(
            m.point_kinematics(&q_bad, &DVector::zeros(m.nq()), "tip"),
            Err(MultibodyError::NonFinite(_))
        ));
    }
}
