//! Fixed-step explicit Runge-Kutta integration.

use nalgebra::DVector;

/// Integrates `xdot = f(t, x)` from `t0` to `t1` with the classical
/// fourth-order Runge-Kutta scheme over `substeps` equal steps.
pub fn rk4<F>(f: &F, x0: &DVector<f64>, t0: f64, t1: f64, substeps: usize) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let m = substeps.max(1);
    let dt = (t1 - t0) / m as f64;
    let mut x = x0.clone();
    for i in 0..m {
        let t = t0 + dt * i as f64;
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * dt, &(&x + &k1 * (0.5 * dt)));
        let k3 = f(t + 0.5 * dt, &(&x + &k2 * (0.5 * dt)));
        let k4 = f(t + dt, &(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}
