use std::f64::consts::PI;
use std::sync::Arc;

use nsf_core::domain::{build_mesh, AssembledForms};
use nsf_core::model::{ConductivityModel, Models, StressModel, Sym2};
use nsf_core::problem::ProblemData;
use nsf_core::stepper::{step, Simulation, StepConfig, StepState};

const NU: f64 = 0.5;
const KAPPA: f64 = 0.5;
const FD: f64 = 1e-4;

/// `curl ψ` for `ψ = sin²(πx) sin²(πy)`.
fn w(x: f64, y: f64) -> [f64; 2] {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
}

fn q(x: f64, y: f64) -> f64 {
    x * (1.0 - x) * y * (1.0 - y)
}

fn grad(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> [f64; 2] {
    [
        (f(x + FD, y) - f(x - FD, y)) / (2.0 * FD),
        (f(x, y + FD) - f(x, y - FD)) / (2.0 * FD),
    ]
}

fn laplacian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    let c = f(x, y);
    (f(x + FD, y) + f(x - FD, y) + f(x, y + FD) + f(x, y - FD) - 4.0 * c) / (FD * FD)
}

fn grad_w(x: f64, y: f64) -> [[f64; 2]; 2] {
    [grad(|a, b| w(a, b)[0], x, y), grad(|a, b| w(a, b)[1], x, y)]
}

/// Exact solution `u = t curl ψ`, `θ = 1 + t q`, pressure zero.
fn manufactured() -> ProblemData {
    ProblemData::at_rest(1.0)
        .with_force(|t, x, y| {
            let u = w(x, y);
            let g = grad_w(x, y);
            let mut f = [0.0; 2];
            for i in 0..2 {
                let conv = t * t * (u[0] * g[i][0] + u[1] * g[i][1]);
                let lap = laplacian(|a, b| w(a, b)[i], x, y);
                f[i] = u[i] + conv - 0.5 * NU * t * lap;
            }
            f
        })
        .with_heat_source(|t, x, y| {
            let u = w(x, y);
            let gq = grad(q, x, y);
            let d = Sym2::sym_grad(grad_w(x, y));
            q(x, y) + t * t * (u[0] * gq[0] + u[1] * gq[1])
                - KAPPA * t * laplacian(q, x, y)
                - NU * t * t * d.norm_sq()
        })
}

fn sim(n: usize, stress: StressModel, data: ProblemData) -> Simulation {
    let forms = AssembledForms::new(build_mesh(n).unwrap(), stress.p(), None).unwrap();
    let models = Models::new(stress, ConductivityModel::constant(KAPPA));
    Simulation::new(Arc::new(forms), models, data).unwrap()
}

fn errors(s: &Simulation, st: &StepState) -> (f64, f64) {
    let t = st.time;
    let vel = s.forms.velocity_space();
    let space = s.forms.scalar_space();
    let theta = st.temperature.nodal();
    let k = 60;
    let (mut eu, mut et) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let (x, y) = ((i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64);
            let uh = vel.eval_at(&st.velocity.coeffs, x, y);
            let u = w(x, y);
            eu += (uh[0] - t * u[0]).powi(2) + (uh[1] - t * u[1]).powi(2);
            et += (space.eval_at(&theta, x, y) - 1.0 - t * q(x, y)).powi(2);
        }
    }
    let a = 1.0 / (k * k) as f64;
    ((eu * a).sqrt(), (et * a).sqrt())
}

fn one_step(n: usize, dt: f64) -> (f64, f64) {
    let s = sim(n, StressModel::newtonian(NU), manufactured());
    let cfg = StepConfig {
        dt,
        t_end: dt,
        picard_tol: 1e-12,
        mass_lumping: false,
        ..StepConfig::default()
    };
    let s0 = s.initial_state(f64::INFINITY, false).unwrap();
    let s1 = step(&s, &s0, dt, &cfg).unwrap();
    errors(&s, &s1)
}

#[test]
fn manufactured_single_step_error_is_first_order_plus_second_order() {
    let coarse = one_step(8, 0.1);
    let fine = one_step(16, 0.05);
    let finer = one_step(32, 0.025);
    // the solution has size O(t): compare against dt + h²
    for ((eu, et), (n, dt)) in
        [coarse, fine, finer]
            .into_iter()
            .zip([(8.0, 0.1), (16.0, 0.05), (32.0, 0.025)])
    {
        let bound = dt * (dt + 1.0 / (n * n));
        assert!(eu < 5.0 * bound, "u: {eu} vs {bound}");
        assert!(et < 5.0 * bound, "theta: {et} vs {bound}");
    }
    assert!(fine.0 < coarse.0 && finer.0 < fine.0);
    assert!(fine.1 < coarse.1 && finer.1 < fine.1);
}

#[test]
fn power_law_picard_iterations_stay_bounded() {
    let data = ProblemData::at_rest(1.0)
        .with_u0(w)
        .with_force(|_, _, y| [5.0 * (2.0 * PI * y).sin(), 0.0]);
    let stress = StressModel::bounded_power_law(3.0, 0.5, 50.0, 0.5).unwrap();
    let s = sim(16, stress, data);
    let cfg = StepConfig::default();
    let mut st = s.initial_state(f64::INFINITY, true).unwrap();
    for _ in 0..3 {
        st = step(&s, &st, 0.02, &cfg).unwrap();
        assert!(st.meta.iterations <= 25, "{:?}", st.meta);
        assert_eq!(st.meta.halvings, 0);
    }
}
