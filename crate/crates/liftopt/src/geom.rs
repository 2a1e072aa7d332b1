//! Planar geometry helpers shared by the dynamics and exoskeleton modules.
//!
//! The sagittal plane is spanned by x (forward) and z (up). Rotations are
//! measured counterclockwise in the (x, z) parameterization, i.e. a positive
//! angle tilts the +z axis toward -x. The out-of-plane normal `e_y` completes
//! a right-handed frame, so for a planar vector `v` the cross product
//! `e_y x v` is the +90 degree rotation implemented by [`perp`].

use nalgebra::Vector2;

/// Planar vector in (x, z) coordinates.
pub type Vec2 = Vector2<f64>;

/// Rotates `v` by +90 degrees: `(x, z) -> (-z, x)`. Equals `e_y x v`.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Scalar cross product `a x b` (the out-of-plane component).
#[inline]
pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Rotates `v` counterclockwise by `angle` radians.
#[inline]
pub fn rotate(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perp_is_quarter_turn() {
        let v = Vec2::new(2.0, 0.5);
        assert_relative_eq!(perp(v), rotate(std::f64::consts::FRAC_PI_2, v), epsilon = 1e-14);
    }

    #[test]
    fn cross_of_parallel_vanishes() {
        let v = Vec2::new(1.3, -0.4);
        assert_eq!(cross2(v, 3.0 * v), 0.0);
        assert_relative_eq!(cross2(v, perp(v)), v.norm_squared(), epsilon = 1e-14);
    }

    #[test]
    fn rotate_composes() {
        let v = Vec2::new(0.7, -1.1);
        let w = rotate(0.3, rotate(0.5, v));
        assert_relative_eq!(w, rotate(0.8, v), epsilon = 1e-14);
    }
}
