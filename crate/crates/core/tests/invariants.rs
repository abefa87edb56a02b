use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use nsf_core::diagnostics::{cauchy_in_time, decay_fit, energy_budget, min_principle, tail_mass};
use nsf_core::domain::{build_mesh, norm2, AssembledForms};
use nsf_core::model::{
    verify_assumptions, ConductivityModel, Models, StressModel, Sym2, TruncationParams,
};
use nsf_core::problem::ProblemData;
use nsf_core::steady::steady_state;
use nsf_core::stepper::{run, step, Simulation, StepConfig, TemperatureState, Trajectory};

fn vortex(x: f64, y: f64) -> [f64; 2] {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
}

fn bump(x: f64, y: f64) -> f64 {
    (PI * x).sin().powi(2) * (PI * y).sin().powi(2)
}

fn sim(n: usize, stress: StressModel, kappa: ConductivityModel, data: ProblemData) -> Simulation {
    let forms = AssembledForms::new(build_mesh(n).unwrap(), stress.p(), None).unwrap();
    Simulation::new(Arc::new(forms), Models::new(stress, kappa), data).unwrap()
}

fn cfg(dt: f64, t_end: f64) -> StepConfig {
    StepConfig {
        dt,
        t_end,
        picard_tol: 1e-11,
        ..StepConfig::default()
    }
}

fn trajectory(s: &Simulation, c: &StepConfig) -> Trajectory {
    let t = run(
        s,
        s.initial_state(f64::INFINITY, c.mass_lumping).unwrap(),
        c,
    );
    assert!(t.is_complete(), "{:?}", t.failure);
    t
}

fn heated_vortex(n: usize, shift: f64) -> Simulation {
    let data = ProblemData::at_rest(1.0 + shift)
        .with_u0(vortex)
        .with_theta0(move |x, y| 1.0 + shift + 2.0 * bump(x, y));
    sim(
        n,
        StressModel::newtonian(0.1),
        ConductivityModel::constant(0.05),
        data,
    )
}

#[test]
fn accepted_states_are_discretely_divergence_free() {
    let s = heated_vortex(6, 0.0);
    let traj = trajectory(&s, &cfg(0.05, 0.3));
    for st in &traj.snapshots[1..] {
        let u = &st.velocity.coeffs;
        let bu = s.forms.divergence().mul_vec(u);
        assert!(
            norm2(&bu) <= 1e-10 * norm2(u),
            "{} vs {}",
            norm2(&bu),
            norm2(u)
        );
    }
}

#[test]
fn energy_identity_holds_up_to_the_backward_euler_correction() {
    let data = ProblemData::at_rest(1.0)
        .with_u0(vortex)
        .with_force(|t, _, y| [(2.0 * PI * y).sin() * (1.0 + t), 0.0]);
    let stress = StressModel::bounded_power_law(3.0, 0.1, 1.0, 0.1).unwrap();
    let s = sim(6, stress, ConductivityModel::constant(0.1), data);
    let traj = trajectory(&s, &cfg(0.05, 0.3));
    let eb = energy_budget(&s, &traj);
    assert!(eb.identity_defect < 1e-8, "{}", eb.identity_defect);
    for r in &eb.rows {
        assert!(r.correction >= 0.0);
        assert!(r.dissipation >= 0.0);
    }
}

#[test]
fn heating_is_nonnegative_at_every_step() {
    let stress = StressModel::bounded_power_law(3.0, 0.1, 1.0, 0.1).unwrap();
    let data = ProblemData::at_rest(1.0).with_u0(vortex);
    let s = sim(5, stress.clone(), ConductivityModel::constant(0.1), data);
    let traj = trajectory(&s, &cfg(0.05, 0.2));
    for st in &traj.snapshots {
        let load = s
            .forms
            .dissipation_load(&stress, &st.temperature.nodal(), &st.velocity.coeffs);
        assert!(load.iter().all(|&v| v >= -1e-12));
    }
}

#[test]
fn splitting_bound_holds_between_refinement_levels() {
    let c = heated_vortex(4, 0.0);
    let f = heated_vortex(8, 0.0);
    let tc = trajectory(&c, &cfg(0.1, 0.4));
    let tf = trajectory(&f, &cfg(0.05, 0.4));
    for (m, delta) in [(1.5, 0.5), (2.0, 0.25), (2.5, 1.0)] {
        let p = TruncationParams::new(m, delta).unwrap();
        let r = cauchy_in_time(&c, &tc, &f, &tf, p).unwrap();
        assert!(
            r.splitting_slack >= -1e-12,
            "m = {m}: {}",
            r.splitting_slack
        );
        assert_eq!(r.compared_times.len(), tc.snapshots.len());
    }
}

#[test]
fn entropy_production_is_bounded_by_the_gradient_energy() {
    let kappa = ConductivityModel::affine_clamped(0.05, 0.05, 0.05, 0.2).unwrap();
    let data = ProblemData::at_rest(1.0)
        .with_u0(vortex)
        .with_theta0(|x, y| 1.0 + 2.0 * bump(x, y));
    let s = sim(6, StressModel::newtonian(0.1), kappa.clone(), data);
    let traj = trajectory(&s, &cfg(0.05, 0.3));
    let mu = s.mu().unwrap();
    let mesh = s.forms.mesh();
    let space = s.forms.scalar_space();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for w in traj.snapshots.windows(2) {
        let dt = w[1].time - w[0].time;
        let theta = w[1].temperature.nodal();
        for c in 0..mesh.n_cells() {
            let g = space.gradient(&theta, c);
            let g2 = g[0] * g[0] + g[1] * g[1];
            let tc = mesh.cells()[c].iter().map(|&v| theta[v]).sum::<f64>() / 3.0;
            let a = dt * mesh.cell_area(c);
            lhs += a * kappa.kappa(tc) * g2 / (tc * tc);
            rhs += a * g2;
        }
    }
    assert!(rhs > 0.0);
    assert!(
        lhs <= kappa.kappa_high() / (mu * mu) * rhs,
        "{lhs} vs {rhs}"
    );
}

#[test]
fn min_principle_verdict_is_shift_invariant() {
    let tol = 1e-8;
    let mut verdicts = Vec::new();
    let mut gaps = Vec::new();
    for shift in [0.0, 0.5, 3.0] {
        let s = heated_vortex(5, shift);
        let traj = trajectory(&s, &cfg(0.05, 0.2));
        let mu = s.mu().unwrap();
        assert!((mu - (1.0 + shift)).abs() < 1e-12);
        let mp = min_principle(&s, &traj, mu, tol);
        verdicts.push(mp.min >= mp.mu - mp.tol);
        gaps.push(mp.min - mu);
    }
    assert!(verdicts.iter().all(|&v| v == verdicts[0]));
    assert!(gaps.iter().all(|g| (g - gaps[0]).abs() < 1e-8), "{gaps:?}");
}

#[test]
fn tail_mass_is_nonincreasing_in_the_level() {
    let data = ProblemData::at_rest(1.0)
        .with_u0(vortex)
        .with_theta0(|x, y| 1.0 + 12.0 * bump(x, y));
    let s = sim(
        5,
        StressModel::newtonian(0.1),
        ConductivityModel::constant(0.05),
        data,
    );
    let traj = trajectory(&s, &cfg(0.05, 0.2));
    let mut last = f64::INFINITY;
    let mut last_dom = f64::INFINITY;
    for m in [1.5, 2.0, 3.0, 4.0, 5.0, 6.5, 8.0] {
        let tm = tail_mass(&s, &traj, m).unwrap();
        assert!(tm.sup_tail <= last + 1e-14);
        assert!(tm.dominating <= last_dom + 1e-14);
        last = tm.sup_tail;
        last_dom = tm.dominating;
    }
    assert!(tail_mass(&s, &traj, 0.5).is_err());
}

#[test]
fn decay_rate_is_stable_under_a_window_shift() {
    let data = ProblemData::at_rest(1.0)
        .with_u0(vortex)
        .with_theta0(|x, y| 1.0 + bump(x, y));
    let s = sim(
        6,
        StressModel::newtonian(0.2),
        ConductivityModel::constant(0.5),
        data,
    );
    let traj = trajectory(&s, &cfg(0.02, 0.8));
    let target = steady_state(&s, 1e-10, 200).unwrap();
    let report = verify_assumptions(&s.models.stress, 200, 1, 1.0);
    let a = decay_fit(&s, &traj, &target, &report).unwrap();
    let mut shifted = traj.clone();
    shifted.snapshots.pop();
    let b = decay_fit(&s, &shifted, &target, &report).unwrap();
    let (ra, rb) = (a.rate.unwrap(), b.rate.unwrap());
    let width = 2.0 * (a.rate_std_error.unwrap() + b.rate_std_error.unwrap());
    assert!(a.certified && b.certified, "{:?} {:?}", a.reason, b.reason);
    assert!(
        (ra - rb).abs() <= width.max(0.02 * ra),
        "{ra} vs {rb}, width {width}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_force_steady_state_is_a_fixed_point(dt in 1e-3..1.0f64) {
        let data = ProblemData::at_rest(1.0).with_theta_b(|x, _| 1.0 + x);
        let s = sim(4, StressModel::newtonian(0.3), ConductivityModel::constant(0.2), data);
        let target = steady_state(&s, 1e-12, 200).unwrap();
        let mut st = s.initial_state(f64::INFINITY, true).unwrap();
        st.velocity.coeffs = target.velocity.clone();
        st.velocity.pressure = target.pressure.clone();
        st.temperature = TemperatureState::from_nodal(&target.theta, s.lift_values());
        let next = step(&s, &st, dt, &cfg(dt, dt)).unwrap();
        let du = norm2(&next.velocity.coeffs);
        let dtheta = next
            .temperature
            .nodal()
            .iter()
            .zip(&target.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(du < 1e-9, "velocity drifted: {}", du);
        prop_assert!(dtheta < 1e-9, "temperature drifted: {}", dtheta);
    }

    #[test]
    fn builtin_stresses_are_monotone(
        theta in 0.01..100.0f64,
        a in prop::array::uniform3(-10.0..10.0f64),
        b in prop::array::uniform3(-10.0..10.0f64),
        p in 2.0..4.0f64,
    ) {
        let models = [
            StressModel::newtonian(0.7),
            StressModel::bounded_power_law(p, 0.1, 5.0, 0.2).unwrap(),
            StressModel::pure_power_law(p, 0.1, 5.0, 0.2).unwrap(),
        ];
        let d1 = Sym2::new(a[0], a[1], a[2]);
        let d2 = Sym2::new(b[0], b[1], b[2]);
        let diff = Sym2::new(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        for m in &models {
            let s1 = m.eval(theta, d1);
            let s2 = m.eval(theta, d2);
            let ds = Sym2::new(s1.to_matrix()[0][0] - s2.to_matrix()[0][0],
                s1.to_matrix()[0][1] - s2.to_matrix()[0][1],
                s1.to_matrix()[1][1] - s2.to_matrix()[1][1]);
            let margin = ds.ddot(diff);
            let scale = (1.0 + d1.norm() + d2.norm()).powf(m.p());
            prop_assert!(margin >= -1e-10 * scale, "{} {}", m.id(), margin);
        }
    }
}
