use liftopt::ocp::integrate::rk4;
use liftopt::ocp::PhaseSystem;
use liftopt::scenario::{
    default_lift_options, run_scenario, ExoSetting, LiftProblem, LiftScenario,
};
use nalgebra::DVector;

fn main() {
    env_logger::init();
    let mode = std::env::args().nth(1).unwrap_or_else(|| "none".into());
    let load: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.0);
    let exo = match mode.as_str() {
        "free" => ExoSetting::Free,
        _ => ExoSetting::None,
    };
    let scenario = LiftScenario::smoke(load, exo);
    if mode == "guess" {
        diagnose_guess(&scenario);
        return;
    }
    let options = default_lift_options();
    let t0 = std::time::Instant::now();
    match run_scenario(&scenario, &options) {
        Ok(out) => {
            println!("elapsed: {:.1} s", t0.elapsed().as_secs_f64());
            println!(
                "status: {} in {} iters",
                out.solution.nlp.status, out.solution.nlp.iterations
            );
            println!(
                "kkt {:.3e} eq {:.3e} ineq {:.3e}",
                out.solution.nlp.kkt_residual,
                out.solution.nlp.max_eq_violation,
                out.solution.nlp.max_ineq_violation
            );
            println!("objective: {:.6}", out.solution.objective);
            println!("params: {:?}", out.solution.params.as_slice());
            println!("metrics: {:#?}", out.metrics);
        }
        Err(e) => println!("FAILED: {e}"),
    }
}

fn diagnose_guess(scenario: &LiftScenario) {
    let problem = LiftProblem::build(scenario).unwrap();
    let p = DVector::zeros(problem.reach.np());
    let nq = problem.q_stand.len();
    let pi_c = std::f64::consts::PI;

    // Static check at the standing node.
    let mut x0 = DVector::zeros(2 * nq);
    x0.rows_mut(0, nq).copy_from(&problem.q_stand);
    let u_stat = problem
        .reach
        .inverse_dynamics_activations(&x0, &DVector::zeros(nq), &p)
        .unwrap();
    let (qdd0, lam0) = problem.reach.eval_dynamics(&x0, &u_stat, &p).unwrap();
    println!(
        "static node 0: |qdd| = {:.3e}  u = {:?}\n  lambda = {:?}",
        qdd0.amax(),
        u_stat.as_slice(),
        lam0.as_slice()
    );

    let durations = [1.0_f64, 1.5];
    let n = scenario.nodes_per_phase;
    for (phase, (&t_total, (a, b))) in durations
        .iter()
        .zip([
            (&problem.q_stand, &problem.q_crouch),
            (&problem.q_crouch, &problem.q_stand),
        ])
        .enumerate()
    {
        let dq = b - a;
        let system = if phase == 0 {
            &problem.reach
        } else {
            &problem.lift
        };
        let h = t_total / (n - 1) as f64;
        println!("phase {phase}: h = {h:.4}");
        let positions: Vec<DVector<f64>> = (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                let w = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                let template = a + &dq * w;
                liftopt::scenario::poses::solve_pose(&system.model, &template, &system.contacts, 1e-10, 100)
                    .unwrap_or(template)
            })
            .collect();
        let node = |k: usize| {
            let (qdot, qdd) = if k == 0 || k == n - 1 {
                (DVector::zeros(nq), DVector::zeros(nq))
            } else {
                (
                    (&positions[k + 1] - &positions[k - 1]) / (2.0 * h),
                    (&positions[k + 1] - 2.0 * &positions[k] + &positions[k - 1]) / (h * h),
                )
            };
            let mut x = DVector::zeros(2 * nq);
            x.rows_mut(0, nq).copy_from(&positions[k]);
            x.rows_mut(nq, nq).copy_from(&qdot);
            let u = system
                .inverse_dynamics_activations(&x, &qdd, &p)
                .unwrap_or_else(|_| DVector::repeat(system.nu(), 0.05));
            (x, u)
        };
        for k in 0..n - 1 {
            let (x_k, u_k) = node(k);
            let (x_next, _) = node(k + 1);
            let f = |_t: f64, x: &DVector<f64>| system.dynamics(x, &u_k, &p);
            let x = rk4(&f, &x_k, 0.0, h, scenario.substeps);
            let defect = (&x - &x_next).amax();
            println!(
                "  interval {k:2}: defect {defect:9.3e}  u in [{:.2}, {:.2}]",
                u_k.min(),
                u_k.max()
            );
        }
    }
}
