//! Piecewise quintic Bezier curves, the C2 function representation used by
//! all muscle torque generator characteristics.
//!
//! Each segment is a parametric quintic Bezier `(x(t), y(t))`, `t` in
//! `[0, 1]`, with 6 control points per coordinate. Control x-values must be
//! non-decreasing (strictly increasing knots), which makes `x(t)` monotone
//! and `y` a function of `x`. Evaluation outside the overall domain clamps
//! to the boundary value with zero slope, so a curve that ends flat extends
//! flat.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve has no segments")]
    Empty,
    #[error("segment {0}: control x-values must be non-decreasing with positive span")]
    NonMonotone(usize),
    #[error("segment {0}: non-finite control point")]
    NonFinite(usize),
    #[error("knots must be strictly increasing and contiguous at segment {0}")]
    BadKnots(usize),
    #[error("curve is not C2 at knot {knot}: {what} jumps from {left} to {right}")]
    Discontinuous {
        knot: usize,
        what: &'static str,
        left: f64,
        right: f64,
    },
}

/// One quintic Bezier segment: parametric control points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BezierSegment {
    pub x: [f64; 6],
    pub y: [f64; 6],
}

/// Value and first two derivatives of a curve at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveEval {
    pub y: f64,
    pub dy: f64,
    pub d2y: f64,
}

/// A validated piecewise quintic Bezier function of one variable.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct QuinticBezier {
    segments: Vec<BezierSegment>,
}

#[derive(Deserialize)]
#[serde(transparent)]
struct RawCurve {
    segments: Vec<BezierSegment>,
}

impl<'de> Deserialize<'de> for QuinticBezier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawCurve::deserialize(d)?;
        QuinticBezier::new(raw.segments).map_err(serde::de::Error::custom)
    }
}

/// Relative tolerance for the numeric C2 continuity check at load time.
pub const C2_TOLERANCE: f64 = 1e-8;

fn bernstein<const N: usize>(t: f64) -> [f64; N] {
    // Binomial coefficients for n = N - 1 (N up to 6 here).
    const CHOOSE: [[f64; 6]; 6] = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
        [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
    ];
    let n = N - 1;
    let mut out = [0.0; N];
    let mut tp = 1.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = CHOOSE[n][i] * tp;
        tp *= t;
    }
    let s = 1.0 - t;
    let mut sp = 1.0;
    for i in (0..N).rev() {
        out[i] *= sp;
        sp *= s;
    }
    out
}

impl BezierSegment {
    fn coord(&self, ctrl: &[f64; 6], t: f64) -> (f64, f64, f64) {
        let b5 = bernstein::<6>(t);
        let b4 = bernstein::<5>(t);
        let b3 = bernstein::<4>(t);
        let mut v = 0.0;
        for i in 0..6 {
            v += ctrl[i] * b5[i];
        }
        let mut d1 = 0.0;
        for i in 0..5 {
            d1 += 5.0 * (ctrl[i + 1] - ctrl[i]) * b4[i];
        }
        let mut d2 = 0.0;
        for i in 0..4 {
            d2 += 20.0 * (ctrl[i + 2] - 2.0 * ctrl[i + 1] + ctrl[i]) * b3[i];
        }
        (v, d1, d2)
    }

    /// Evaluates `(y, dy/dx, d2y/dx2)` at parameter `t`.
    fn eval_at_t(&self, t: f64) -> CurveEval {
        let (_, xd1, xd2) = self.coord(&self.x, t);
        let (y, yd1, yd2) = self.coord(&self.y, t);
        let dy = yd1 / xd1;
        let d2y = (yd2 * xd1 - yd1 * xd2) / (xd1 * xd1 * xd1);
        CurveEval { y, dy, d2y }
    }

    /// Solves `x(t) = xq` for `t` in `[0, 1]`. Equally spaced control
    /// x-values make `x(t)` affine and invert directly; otherwise Newton
    /// with a bisection fallback (x is monotone by validation).
    fn invert_x(&self, xq: f64) -> f64 {
        let x0 = self.x[0];
        let x5 = self.x[5];
        let span = x5 - x0;
        let step = span / 5.0;
        let affine = (0..6).all(|i| (self.x[i] - (x0 + step * i as f64)).abs() <= 1e-12 * span.abs().max(1.0));
        let mut t = ((xq - x0) / span).clamp(0.0, 1.0);
        if affine {
            return t;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let tol = 1e-14 * span.abs().max(1.0);
        for _ in 0..100 {
            let (xv, xd, _) = self.coord(&self.x, t);
            let err = xv - xq;
            if err.abs() <= tol {
                return t;
            }
            if err > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let tn = t - err / xd;
            t = if xd > 0.0 && tn > lo && tn < hi {
                tn
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }
}

impl QuinticBezier {
    pub fn new(segments: Vec<BezierSegment>) -> Result<Self, CurveError> {
        if segments.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, s) in segments.iter().enumerate() {
            if s.x.iter().chain(s.y.iter()).any(|v| !v.is_finite()) {
                return Err(CurveError::NonFinite(i));
            }
            let span = s.x[5] - s.x[0];
            if span <= 0.0 || s.x.windows(2).any(|w| w[1] < w[0]) {
                return Err(CurveError::NonMonotone(i));
            }
        }
        for i in 1..segments.len() {
            if segments[i].x[0] != segments[i - 1].x[5] {
                return Err(CurveError::BadKnots(i));
            }
        }
        let curve = QuinticBezier { segments };
        curve.check_c2()?;
        Ok(curve)
    }

    fn check_c2(&self) -> Result<(), CurveError> {
        for i in 1..self.segments.len() {
            let (left, right) = self.knot_limits(i);
            for (what, l, r) in [
                ("value", left.y, right.y),
                ("slope", left.dy, right.dy),
                ("curvature", left.d2y, right.d2y),
            ] {
                let scale = l.abs().max(r.abs()).max(1.0);
                if (l - r).abs() > C2_TOLERANCE * scale {
                    return Err(CurveError::Discontinuous {
                        knot: i,
                        what,
                        left: l,
                        right: r,
                    });
                }
            }
        }
        Ok(())
    }

    /// Left/right limits of `(y, dy, d2y)` at interior knot `i`
    /// (between segments `i - 1` and `i`).
    pub fn knot_limits(&self, i: usize) -> (CurveEval, CurveEval) {
        (
            self.segments[i - 1].eval_at_t(1.0),
            self.segments[i].eval_at_t(0.0),
        )
    }

    pub fn segments(&self) -> &[BezierSegment] {
        &self.segments
    }

    /// Overall domain `[x_min, x_max]`.
    pub fn domain(&self) -> (f64, f64) {
        (
            self.segments[0].x[0],
            self.segments[self.segments.len() - 1].x[5],
        )
    }

    /// Evaluates the curve. Outside the domain the boundary value extends
    /// with zero slope and curvature.
    pub fn eval(&self, x: f64) -> CurveEval {
        let (lo, hi) = self.domain();
        if x <= lo {
            let y = self.segments[0].eval_at_t(0.0).y;
            return CurveEval {
                y,
                dy: 0.0,
                d2y: 0.0,
            };
        }
        if x >= hi {
            let y = self.segments[self.segments.len() - 1].eval_at_t(1.0).y;
            return CurveEval {
                y,
                dy: 0.0,
                d2y: 0.0,
            };
        }
        let idx = self
            .segments
            .partition_point(|s| s.x[5] < x)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let t = seg.invert_x(x);
        seg.eval_at_t(t)
    }

    /// Maximum control-point y-value: an upper bound on the curve value by
    /// the Bezier convex hull property.
    pub fn hull_max(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.y.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum control-point y-value: a lower bound on the curve value.
    pub fn hull_min(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.y.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A single segment ramping smoothly from `(x0, y0)` to `(x1, y1)` with zero
/// slope and curvature at both ends (control y `[y0 y0 y0 y1 y1 y1]`,
/// equally spaced x).
pub fn smooth_step(x0: f64, x1: f64, y0: f64, y1: f64) -> BezierSegment {
    let step = (x1 - x0) / 5.0;
    let mut x = [0.0; 6];
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = x0 + step * i as f64;
    }
    // Pin the endpoints so adjacent segments share knots bitwise.
    x[0] = x0;
    x[5] = x1;
    BezierSegment {
        x,
        y: [y0, y0, y0, y1, y1, y1],
    }
}

/// A two-segment bell: 0 at `center - halfwidth`, exactly 1 at `center`,
/// back to 0 at `center + halfwidth`, flat (zero slope/curvature) at all
/// three anchors, clamping to 0 outside.
pub fn bell(center: f64, halfwidth: f64) -> QuinticBezier {
    QuinticBezier::new(vec![
        smooth_step(center - halfwidth, center, 0.0, 1.0),
        smooth_step(center, center + halfwidth, 1.0, 0.0),
    ])
    .expect("bell construction is valid")
}

/// A single-segment ramp from `(x0, y0)` to `(x1, y1)` with flat ends,
/// clamping outside. `x0 < x1` required; pass `y0 > y1` for a falling ramp.
pub fn ramp(x0: f64, x1: f64, y0: f64, y1: f64) -> QuinticBezier {
    QuinticBezier::new(vec![smooth_step(x0, x1, y0, y1)]).expect("ramp construction is valid")
}
