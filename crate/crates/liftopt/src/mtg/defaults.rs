//! Default muscle torque generator characteristics for the human joints.
//!
//! Strengths and velocity limits are representative values for a healthy
//! adult male, in the spirit of the lumped joint-torque actuators used in
//! predictive whole-body simulation. Each anatomical joint gets an
//! extensor/flexor pair; curves are built from the quintic Bezier
//! primitives in [`super::curve`].

use super::curve::{bell, ramp, smooth_step, QuinticBezier};
use super::{MtgData, MtgPairData, MtgParams};
use std::collections::BTreeMap;

/// Damping coefficient of the parallel element, as a fraction of `tau0`
/// per normalized velocity.
pub const BETA: f64 = 0.1;

/// Eccentric plateau of the force-velocity curve.
pub const FV_ECCENTRIC_PLATEAU: f64 = 1.4;

/// Data format version of the curve file.
pub const MTG_DATA_VERSION: u32 = 1;

/// Force-velocity characteristic over the muscle-frame velocity
/// `w = sign * qdot`, on the domain `[-omega_max, omega_max]`.
///
/// Monotone nonincreasing with value exactly 1 at `w = 0`. Concentric
/// (shortening, `w > 0`) drops to 0 at `omega_max` and clamps there;
/// eccentric (lengthening, `w < 0`) rises to a flat plateau of
/// [`FV_ECCENTRIC_PLATEAU`] reached at `-omega_max / 2`. All pieces join
/// C2; at `w = 0` the slope is `-1.5 / omega_max` from both sides (from
/// the Bezier endpoint formulas: slope `5 (y1 - y0) / span`, curvature
/// `20 (y2 - 2 y1 + y0) / span^2`), and every segment has nonincreasing
/// control points, which makes the whole curve nonincreasing.
pub fn fv_default(omega_max: f64) -> QuinticBezier {
    let w = omega_max;
    let p = FV_ECCENTRIC_PLATEAU;
    let plateau = smooth_step(-w, -0.5 * w, p, p);
    let eccentric = super::curve::BezierSegment {
        x: [-0.5 * w, -0.4 * w, -0.3 * w, -0.2 * w, -0.1 * w, 0.0],
        y: [p, p, p, 1.3, 1.15, 1.0],
    };
    let concentric = super::curve::BezierSegment {
        x: [0.0, 0.2 * w, 0.4 * w, 0.6 * w, 0.8 * w, w],
        y: [1.0, 0.7, 0.4, 0.0, 0.0, 0.0],
    };
    QuinticBezier::new(vec![plateau, eccentric, concentric]).expect("default fV is valid")
}

/// Active torque-angle characteristic: a bell peaking at 1.
pub fn fa_default(center: f64, halfwidth: f64) -> QuinticBezier {
    bell(center, halfwidth)
}

/// Passive torque-angle characteristic engaging as the generator is
/// stretched beyond `engage` toward `hard`, where it reaches `fp_max`.
/// `sign` is the torque direction of the generator; stretch is motion in
/// the `-sign` direction, so the ramp falls for extensors with `sign = +1`
/// and rises for `sign = -1`.
pub fn fp_default(sign: f64, engage: f64, hard: f64, fp_max: f64) -> QuinticBezier {
    if sign > 0.0 {
        // Stretched as q decreases: nonzero below `engage`.
        ramp(hard, engage, fp_max, 0.0)
    } else {
        ramp(engage, hard, 0.0, fp_max)
    }
}

/// A constant curve, used where a characteristic is disabled.
pub fn flat(domain: (f64, f64), value: f64) -> QuinticBezier {
    QuinticBezier::new(vec![smooth_step(domain.0, domain.1, value, value)])
        .expect("flat curve is valid")
}

struct JointDefaults {
    name: &'static str,
    tau0: (f64, f64),
    omega_max: f64,
    /// Torque sign of the extensor; the flexor gets the opposite.
    ext_sign: f64,
    fa_center: (f64, f64),
    fa_halfwidth: f64,
    /// (engage, hard, fp_max) per side.
    fp_ext: (f64, f64, f64),
    fp_flex: (f64, f64, f64),
}

/// Per-joint default table. Angles follow the model convention: positive
/// lumbar/thoracic/neck is extension (lean back), positive hip is flexion,
/// negative knee is flexion, positive ankle is dorsiflexion, positive
/// shoulder/elbow/wrist is forward flexion.
const JOINT_DEFAULTS: [JointDefaults; 9] = [
    JointDefaults {
        name: "lumbar",
        tau0: (450.0, 250.0),
        omega_max: 6.0,
        ext_sign: 1.0,
        fa_center: (-0.15, 0.0),
        fa_halfwidth: 1.2,
        fp_ext: (-0.20, -0.60, 0.8),
        fp_flex: (0.05, 0.14, 0.6),
    },
    JointDefaults {
        name: "thoracic",
        tau0: (400.0, 220.0),
        omega_max: 6.0,
        ext_sign: 1.0,
        fa_center: (-0.15, 0.0),
        fa_halfwidth: 1.2,
        fp_ext: (-0.20, -0.60, 0.8),
        fp_flex: (0.05, 0.14, 0.6),
    },
    JointDefaults {
        name: "neck",
        tau0: (60.0, 40.0),
        omega_max: 8.0,
        ext_sign: 1.0,
        fa_center: (0.0, 0.0),
        fa_halfwidth: 1.2,
        fp_ext: (-0.30, -0.80, 0.5),
        fp_flex: (0.20, 0.55, 0.5),
    },
    JointDefaults {
        name: "hip",
        tau0: (320.0, 200.0),
        omega_max: 12.0,
        ext_sign: -1.0,
        fa_center: (0.9, 0.4),
        fa_halfwidth: 2.2,
        fp_ext: (0.70, 1.90, 0.6),
        fp_flex: (-0.10, -0.28, 0.6),
    },
    JointDefaults {
        name: "knee",
        tau0: (300.0, 160.0),
        omega_max: 14.0,
        ext_sign: 1.0,
        fa_center: (-0.9, -0.6),
        fa_halfwidth: 2.2,
        fp_ext: (-1.20, -2.20, 0.5),
        fp_flex: (0.0, 0.05, 0.8),
    },
    JointDefaults {
        name: "ankle",
        tau0: (240.0, 70.0),
        omega_max: 12.0,
        ext_sign: -1.0,
        fa_center: (0.05, 0.0),
        fa_halfwidth: 1.8,
        fp_ext: (0.25, 0.62, 0.6),
        fp_flex: (-0.35, -0.75, 0.5),
    },
    JointDefaults {
        name: "shoulder",
        tau0: (130.0, 130.0),
        omega_max: 14.0,
        ext_sign: -1.0,
        fa_center: (0.5, 0.6),
        fa_halfwidth: 2.6,
        fp_ext: (1.80, 2.90, 0.4),
        fp_flex: (-0.50, -1.10, 0.4),
    },
    JointDefaults {
        name: "elbow",
        tau0: (80.0, 80.0),
        omega_max: 16.0,
        ext_sign: -1.0,
        fa_center: (1.0, 1.2),
        fa_halfwidth: 2.4,
        fp_ext: (1.90, 2.45, 0.5),
        fp_flex: (0.0, -0.06, 0.8),
    },
    JointDefaults {
        name: "wrist",
        tau0: (25.0, 25.0),
        omega_max: 18.0,
        ext_sign: -1.0,
        fa_center: (0.0, 0.0),
        fa_halfwidth: 1.8,
        fp_ext: (0.70, 1.15, 0.4),
        fp_flex: (-0.70, -1.15, 0.4),
    },
];

fn build_params(d: &JointDefaults, sign: f64, tau0: f64, fa_center: f64, fp: (f64, f64, f64)) -> MtgParams {
    MtgParams {
        tau0,
        omega_max: d.omega_max,
        beta: BETA,
        sign,
        f_active: fa_default(fa_center, d.fa_halfwidth),
        f_velocity: fv_default(d.omega_max),
        f_passive: fp_default(sign, fp.0, fp.1, fp.2),
    }
}

/// Builds the full default dataset, the canonical source from which the
/// shipped JSON curve file is generated.
pub fn default_data() -> MtgData {
    let mut joints = BTreeMap::new();
    for d in &JOINT_DEFAULTS {
        let ext = build_params(d, d.ext_sign, d.tau0.0, d.fa_center.0, d.fp_ext);
        let flex = build_params(d, -d.ext_sign, d.tau0.1, d.fa_center.1, d.fp_flex);
        joints.insert(
            d.name.to_string(),
            MtgPairData {
                extensor: ext,
                flexor: flex,
            },
        );
    }
    MtgData {
        version: MTG_DATA_VERSION,
        joints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fv_is_one_at_rest_and_clamps() {
        for &w in &[6.0, 12.0, 18.0] {
            let fv = fv_default(w);
            assert_relative_eq!(fv.eval(0.0).y, 1.0, epsilon = 1e-12);
            // Slope -1.5/w at the rest-velocity join, from both sides.
            let (l, r) = fv.knot_limits(2);
            assert_relative_eq!(l.dy, -1.5 / w, epsilon = 1e-9);
            assert_relative_eq!(r.dy, -1.5 / w, epsilon = 1e-9);
            // Concentric end reaches zero and clamps.
            assert_relative_eq!(fv.eval(w).y, 0.0, epsilon = 1e-12);
            assert_eq!(fv.eval(2.0 * w).y, 0.0);
            // Eccentric end is the plateau.
            assert_relative_eq!(fv.eval(-w).y, FV_ECCENTRIC_PLATEAU, epsilon = 1e-12);
            assert_eq!(fv.eval(-2.0 * w).y, FV_ECCENTRIC_PLATEAU);
        }
    }

    #[test]
    fn fv_is_nonincreasing_with_velocity() {
        let fv = fv_default(10.0);
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let w = -10.0 + 20.0 * i as f64 / 400.0;
            let y = fv.eval(w).y;
            assert!(y <= prev + 1e-9, "fV increased at w = {w}");
            prev = y;
        }
    }

    #[test]
    fn fp_engages_on_the_stretch_side_only() {
        // Extensor with positive sign: stretched by flexion (q < engage).
        let fp = fp_default(1.0, -0.2, -0.6, 0.8);
        assert_eq!(fp.eval(0.0).y, 0.0);
        assert_eq!(fp.eval(0.5).y, 0.0);
        assert!(fp.eval(-0.45).y > 0.0);
        assert_relative_eq!(fp.eval(-0.6).y, 0.8, epsilon = 1e-12);
        // Extensor with negative sign: stretched by positive motion.
        let fp = fp_default(-1.0, 0.7, 1.9, 0.6);
        assert_eq!(fp.eval(0.0).y, 0.0);
        assert!(fp.eval(1.4).y > 0.0);
        assert_relative_eq!(fp.eval(1.9).y, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn default_table_covers_all_joints() {
        let data = default_data();
        for name in [
            "lumbar", "thoracic", "neck", "hip", "knee", "ankle", "shoulder", "elbow", "wrist",
        ] {
            let pair = data.joints.get(name).expect("joint present");
            assert!(pair.extensor.tau0 > 0.0 && pair.flexor.tau0 > 0.0);
            assert_eq!(pair.extensor.sign, -pair.flexor.sign);
            // Active curves peak at 1 at their centers.
            assert!((pair.extensor.f_active.hull_max() - 1.0).abs() < 1e-12);
        }
        assert_eq!(data.joints.len(), 9);
    }
}
