//! Predictive simulation of sagittal-plane bending and lifting with a
//! passive back-support exoskeleton.
//!
//! The crate builds a planar, muscle-actuated multibody model of a human
//! subject, optionally augments it with a passive torsion-spring exoskeleton,
//! and solves a two-phase optimal control problem (bend down, lift back up)
//! by direct multiple shooting with an SQP solver implemented in this crate.
//! The optimizer may treat the spring parameters (stiffness `k` and rest
//! angle `theta0`) as free variables, which turns the motion synthesis into
//! a device sizing study.
//!
//! Module map:
//! - [`multibody`]: planar rigid-body trees, mass matrix, nonlinear effects,
//!   contact-constrained forward dynamics (KKT formulation).
//! - [`anthro`]: anthropometric scaling tables and human model construction.
//! - [`mtg`]: muscle torque generators built from quintic Bezier curves.
//! - [`exo`]: the passive exoskeleton torsion spring and its generalized
//!   joint torque.
//! - [`nlp`]: dense SQP solver (damped BFGS, dual active-set QP, l1 merit).
//! - [`ocp`]: multi-phase direct multiple shooting transcription.
//! - [`scenario`]: the box-lifting task, initial guesses, and ergonomic
//!   metrics (peak lumbar torque, cumulative lumbar load, effort).
//! - [`config`], [`report`], [`plot`]: run configuration, CSV/JSON output,
//!   and minimal SVG plotting used by the command-line front end.

pub mod anthro;
pub mod exo;
pub mod geom;
pub mod mtg;
pub mod multibody;
pub mod nlp;
pub mod ocp;
pub mod scenario;

/// Gravitational acceleration in m/s^2, applied along -z.
pub const GRAVITY: f64 = 9.81;
