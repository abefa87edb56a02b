use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{for_each_sample, linear_fit};
use crate::domain::{dot, AssembledForms};
use crate::model::{Assumption, AssumptionReport, StressModel};
use crate::steady::SteadyState;
use crate::stepper::{
    step, Simulation, SolverMeta, StepConfig, StepState, TemperatureState, Trajectory,
    VelocityState,
};
use crate::{Error, Result};

/// Signals below this level are treated as converged.
pub const SIGNAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesEigen {
    /// Smallest `λ` with `∫Du:Dw = λ∫u·w` on the discretely divergence-free space.
    pub lambda: f64,
    pub iterations: usize,
    /// Relative change of `λ` in the last iteration.
    pub change: f64,
}

/// Smallest eigenvalue of the discrete Stokes operator by inverse power
/// iteration with the Rayleigh quotient.
pub fn stokes_eigenvalue(forms: &AssembledForms) -> Result<StokesEigen> {
    let nu = forms.n_velocity();
    let ns = forms.n_saddle();
    let mut mat = forms.saddle_template();
    let theta = vec![1.0; forms.mesh().n_vertices()];
    forms.add_viscous(
        &mut mat,
        &StressModel::newtonian(1.0),
        &theta,
        &vec![0.0; nu],
    );
    let lu = mat.factorize()?;
    let mass = forms.velocity_mass();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut u: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = f64::NAN;
    let mut change = f64::INFINITY;
    let rayleigh = |u: &[f64]| {
        let mut x = u.to_vec();
        x.resize(ns, 0.0);
        let au = mat.mul_vec(&x);
        dot(&au[..nu], u) / mass.bilinear(u, u)
    };
    for it in 1..=2000 {
        let mut rhs = mass.mul_vec(&u);
        rhs.resize(ns, 0.0);
        let x = lu.solve(&rhs)?;
        let norm = mass.bilinear(&x[..nu], &x[..nu]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Assembly(
                "inverse iteration collapsed to zero".into(),
            ));
        }
        u = x[..nu].iter().map(|v| v / norm).collect();
        let l = rayleigh(&u);
        change = ((l - lambda) / l).abs();
        lambda = l;
        if change < 1e-13 {
            return Ok(StokesEigen {
                lambda,
                iterations: it,
                change,
            });
        }
    }
    Ok(StokesEigen {
        lambda,
        iterations: 2000,
        change,
    })
}

/// Takes one step from `target` and checks that it does not move.
pub fn certify_fixed_point(
    sim: &Simulation,
    target: &SteadyState,
    cfg: &StepConfig,
) -> Result<bool> {
    let state = StepState {
        time: 0.0,
        velocity: VelocityState {
            coeffs: target.velocity.clone(),
            pressure: target.pressure.clone(),
        },
        temperature: TemperatureState::from_nodal(&target.theta, sim.lift_values()),
        meta: SolverMeta::default(),
    };
    let next = step(sim, &state, cfg.dt, cfg)?;
    let (du, dtheta) = distance(sim, &next, target);
    let scale = sim.forms.velocity_l2_sq(&target.velocity).sqrt()
        + sim
            .forms
            .temperature_mass_lumped()
            .iter()
            .zip(&target.theta)
            .map(|(m, t)| m * t.abs())
            .sum::<f64>();
    Ok(du + dtheta <= 1e-8 * scale.max(1.0))
}

/// `(‖u − u∞‖₂, ‖θ − θ∞‖₁)`
fn distance(sim: &Simulation, s: &StepState, target: &SteadyState) -> (f64, f64) {
    let forms = &sim.forms;
    let du: Vec<f64> = s
        .velocity
        .coeffs
        .iter()
        .zip(&target.velocity)
        .map(|(a, b)| a - b)
        .collect();
    let dt: Vec<f64> = s
        .temperature
        .nodal()
        .iter()
        .zip(&target.theta)
        .map(|(a, b)| a - b)
        .collect();
    let mut l1 = 0.0;
    for_each_sample(forms, forms.rule(), &dt, None, |q| {
        l1 += q.w * q.theta.abs()
    });
    (forms.velocity_l2_sq(&du).sqrt(), l1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub time: f64,
    pub velocity: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `−2 × slope` of `log(‖u − u∞‖₂ + ‖θ − θ∞‖₁)` on the fitting window.
    pub rate: Option<f64>,
    pub rate_std_error: Option<f64>,
    pub r_squared: Option<f64>,
    /// The same fit for `‖u − u∞‖₂` alone.
    pub velocity_rate: Option<f64>,
    pub velocity_r_squared: Option<f64>,
    /// Exponential decay is certified: the stability condition holds, the
    /// target is a fixed point and the fit is good (`R² ≥ 0.99`).
    pub certified: bool,
    /// `R² < 0.99` on the window.
    pub sub_exponential: bool,
    /// Part of the tail half lies below the signal floor.
    pub at_floor: bool,
    pub window: (f64, f64),
    pub curves: Vec<DecayPoint>,
    pub reason: Option<String>,
}

/// Least-squares exponential fit over the tail half of the run.
pub fn decay_fit(
    sim: &Simulation,
    traj: &Trajectory,
    target: &SteadyState,
    assumptions: &AssumptionReport,
) -> Result<DecayFit> {
    let curves: Vec<DecayPoint> = traj
        .snapshots
        .iter()
        .map(|s| {
            let (v, t) = distance(sim, s, target);
            DecayPoint {
                time: s.time,
                velocity: v,
                temperature: t,
            }
        })
        .collect();
    let t_last = curves.last().map_or(0.0, |p| p.time);
    let tail: Vec<&DecayPoint> = curves.iter().filter(|p| p.time >= 0.5 * t_last).collect();
    let at_floor = tail
        .iter()
        .any(|p| p.velocity + p.temperature <= SIGNAL_FLOOR);
    let window: Vec<&DecayPoint> = tail
        .iter()
        .copied()
        .take_while(|p| p.velocity + p.temperature > SIGNAL_FLOOR)
        .collect();
    let ts: Vec<f64> = window.iter().map(|p| p.time).collect();
    let ls: Vec<f64> = window
        .iter()
        .map(|p| (p.velocity + p.temperature).ln())
        .collect();
    let fit = if window.len() >= 3 {
        linear_fit(&ts, &ls)
    } else {
        None
    };
    let vel: Vec<(f64, f64)> = window
        .iter()
        .filter(|p| p.velocity > SIGNAL_FLOOR)
        .map(|p| (p.time, p.velocity.ln()))
        .collect();
    let vfit = if vel.len() >= 3 {
        let (a, b): (Vec<f64>, Vec<f64>) = vel.into_iter().unzip();
        linear_fit(&a, &b)
    } else {
        None
    };

    let mut reasons = Vec::new();
    if !assumptions.passes(Assumption::Stability) {
        reasons.push("stress model fails the stability condition (iv)".to_string());
    }
    if !certify_fixed_point(sim, target, &traj.config)? {
        reasons.push("target is not a fixed point of the scheme".to_string());
    }
    let sub_exponential = fit.is_some_and(|f| f.r_squared < 0.99);
    match fit {
        None if at_floor => reasons.push("signal at floor; rate undefined".to_string()),
        None => reasons.push("fewer than three points in the fitting window".to_string()),
        Some(_) if sub_exponential => {
            reasons.push("decay is not exponential (R² < 0.99)".to_string())
        }
        Some(_) => {}
    }
    Ok(DecayFit {
        rate: fit.map(|f| -2.0 * f.slope),
        rate_std_error: fit.map(|f| 2.0 * f.slope_std_error),
        r_squared: fit.map(|f| f.r_squared),
        velocity_rate: vfit.map(|f| -2.0 * f.slope),
        velocity_r_squared: vfit.map(|f| f.r_squared),
        certified: reasons.is_empty(),
        sub_exponential,
        at_floor,
        window: (
            ts.first().copied().unwrap_or(f64::NAN),
            ts.last().copied().unwrap_or(f64::NAN),
        ),
        curves,
        reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_mesh;
    use crate::model::{verify_assumptions, ConductivityModel, Models};
    use crate::problem::ProblemData;
    use crate::steady::steady_state;
    use crate::stepper::run;
    use std::sync::Arc;

    #[test]
    fn stokes_eigenvalue_converges_under_refinement() {
        let l: Vec<f64> = [8, 16]
            .iter()
            .map(|&n| {
                let f = AssembledForms::new(build_mesh(n).unwrap(), 2.0, None).unwrap();
                let e = stokes_eigenvalue(&f).unwrap();
                assert!(e.change < 1e-12);
                e.lambda
            })
            .collect();
        // half the first Stokes eigenvalue of the unit square, 52.3447
        assert!((l[1] - 26.172).abs() < 0.05, "{l:?}");
        assert!(l[0] >= l[1] - 1e-9);
    }

    #[test]
    fn run_at_steady_state_has_undefined_rate() {
        let f = Arc::new(AssembledForms::new(build_mesh(4).unwrap(), 2.0, None).unwrap());
        let models = Models::new(
            StressModel::newtonian(0.1),
            ConductivityModel::constant(1.0),
        );
        let sim = Simulation::new(f, models, ProblemData::at_rest(1.0)).unwrap();
        let cfg = StepConfig {
            dt: 0.1,
            t_end: 1.0,
            ..StepConfig::default()
        };
        let traj = run(&sim, sim.initial_state(f64::INFINITY, true).unwrap(), &cfg);
        let target = steady_state(&sim, 1e-12, 50).unwrap();
        let report = verify_assumptions(&sim.models.stress, 100, 0, 1.0);
        let fit = decay_fit(&sim, &traj, &target, &report).unwrap();
        assert!(fit.at_floor);
        assert!(fit.rate.is_none());
        assert!(!fit.certified);
        assert!(fit.reason.unwrap().contains("floor"));
    }
}
