use serde::{Deserialize, Serialize};

use super::{for_each_sample, linear_fit, steps};
use crate::model::{h_alpha_unchecked, Sym2, TruncationParams};
use crate::stepper::{Simulation, Trajectory};
use crate::{Error, Result};

/// Default undershoot tolerance of [`min_principle`] for the lumped and
/// consistent temperature mass.
pub fn default_tol_min(lumped: bool) -> f64 {
    if lumped {
        1e-8
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinWitness {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPrinciple {
    pub min: f64,
    pub mu: f64,
    pub tol: f64,
    /// Location of the minimum in the first snapshot that violates the bound.
    pub witness: Option<MinWitness>,
    pub pass: bool,
}

/// Global temperature minimum over all snapshots.
///
/// A P1 field attains its minimum at a vertex, so the vertex minimum is also
/// the minimum over every quadrature point.
pub fn min_principle(sim: &Simulation, traj: &Trajectory, mu: f64, tol: f64) -> MinPrinciple {
    let verts = sim.forms.mesh().vertices();
    let mut min = f64::INFINITY;
    let mut witness = None;
    for s in &traj.snapshots {
        let theta = s.temperature.nodal();
        let (v, &m) = theta
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty mesh");
        min = min.min(m);
        if witness.is_none() && m < mu - tol {
            witness = Some(MinWitness {
                time: s.time,
                x: verts[v][0],
                y: verts[v][1],
                theta: m,
            });
        }
    }
    MinPrinciple {
        min,
        mu,
        tol,
        pass: witness.is_none(),
        witness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// `sup_t ‖θ − H^α(θ, θ̂)‖₁`
    pub sup_l1_gap: f64,
    /// `∫_Q |∇θ|² / θ^{α+1}`
    pub weighted_gradient: f64,
}

fn theta_positive(theta: f64, time: f64) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "temperature {theta} ≤ 0 at t = {time}; admissibility is broken"
        )));
    }
    Ok(())
}

/// The two quantities of the α-weighted temperature estimate with
/// `K = max θ̂`.
pub fn alpha_estimate(sim: &Simulation, traj: &Trajectory, alpha: f64) -> Result<AlphaEstimate> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Parameter(format!(
            "α must lie in (0, 1/2), got {alpha}"
        )));
    }
    let forms = &sim.forms;
    let lift = &sim.lift;
    let scalar = forms.scalar_space();
    let mesh = forms.mesh();
    let k = lift.k;
    let mut sup: f64 = 0.0;
    let mut grad = 0.0;
    for (i, s) in traj.snapshots.iter().enumerate() {
        let theta = s.temperature.nodal();
        let dt = if i == 0 {
            0.0
        } else {
            s.time - traj.snapshots[i - 1].time
        };
        let mut gap = 0.0;
        for c in 0..mesh.n_cells() {
            let area = mesh.cell_area(c);
            let g = scalar.gradient(&theta, c);
            let g2 = g[0] * g[0] + g[1] * g[1];
            for (l, w) in forms.rule().iter() {
                let th = scalar.eval(&theta, c, *l);
                theta_positive(th, s.time)?;
                let sigma = scalar.eval(&lift.values, c, *l).min(k);
                gap += w * area * (th - h_alpha_unchecked(th, sigma, alpha, k)).abs();
                if i > 0 {
                    grad += dt * w * area * g2 / th.powf(alpha + 1.0);
                }
            }
        }
        sup = sup.max(gap);
    }
    Ok(AlphaEstimate {
        alpha,
        sup_l1_gap: sup,
        weighted_gradient: grad,
    })
}

/// `∫_Q |∇θ|^t` for `t ∈ [1, 4/3)`.
pub fn gradient_integrability(sim: &Simulation, traj: &Trajectory, t_exp: f64) -> Result<f64> {
    if !(1.0..4.0 / 3.0).contains(&t_exp) {
        return Err(Error::Parameter(format!(
            "gradient exponent must lie in [1, 4/3), got {t_exp}"
        )));
    }
    let forms = &sim.forms;
    let mesh = forms.mesh();
    let mut total = 0.0;
    for (dt, _, next) in steps(traj) {
        let theta = next.temperature.nodal();
        for c in 0..mesh.n_cells() {
            let g = forms.scalar_space().gradient(&theta, c);
            total += dt * mesh.cell_area(c) * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * t_exp);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMass {
    pub m: f64,
    /// `sup_t ‖(θ − 2m)₊‖₁`
    pub sup_tail: f64,
    /// `‖θ₀ χ_{θ₀>m}‖₁ + ∫_Q (S:Du) χ_{θ>m}`
    pub dominating: f64,
}

fn check_above_lift(sim: &Simulation, m: f64) -> Result<()> {
    if !(m > sim.lift.k) {
        return Err(Error::Parameter(format!(
            "truncation level m = {m} must exceed max θ̂ = {}",
            sim.lift.k
        )));
    }
    Ok(())
}

pub fn tail_mass(sim: &Simulation, traj: &Trajectory, m: f64) -> Result<TailMass> {
    check_above_lift(sim, m)?;
    let forms = &sim.forms;
    let stress = &sim.models.stress;
    let mut sup: f64 = 0.0;
    for s in &traj.snapshots {
        let theta = s.temperature.nodal();
        let mut tail = 0.0;
        for_each_sample(forms, forms.rule(), &theta, None, |q| {
            tail += q.w * (q.theta - 2.0 * m).max(0.0);
        });
        sup = sup.max(tail);
    }
    let theta0 = &sim.data.theta0;
    let mut dom = 0.0;
    let zero = vec![0.0; forms.mesh().n_vertices()];
    for_each_sample(forms, forms.rule(), &zero, None, |q| {
        let t0 = theta0(0.0, q.x, q.y);
        if t0 > m {
            dom += q.w * t0.abs();
        }
    });
    for (dt, _, next) in steps(traj) {
        let theta = next.temperature.nodal();
        for_each_sample(
            forms,
            forms.stress_rule(),
            &theta,
            Some(&next.velocity.coeffs),
            |q| {
                if q.theta > m {
                    dom += dt * q.w * stress.dissipation(q.theta, Sym2::sym_grad(q.grad_u));
                }
            },
        );
    }
    Ok(TailMass {
        m,
        sup_tail: sup,
        dominating: dom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    /// `sup_t ‖T_{m,δ}(θ_c) − T_{m,δ}(θ_f)‖₂`
    pub truncated_sup: f64,
    /// `sup_t ‖θ_c − θ_f‖₁`
    pub l1_sup: f64,
    /// Smallest slack of the splitting bound
    /// `‖θ_c − θ_f‖₁ ≤ ‖(θ_c − m + δ)₊‖₁ + ‖(θ_f − m + δ)₊‖₁ + |Ω|^{1/2}‖T(θ_c) − T(θ_f)‖₂`
    /// over the compared snapshots; never negative up to rounding.
    pub splitting_slack: f64,
    pub compared_times: Vec<f64>,
}

/// Compares a coarse and a fine trajectory at the coarse snapshot times.
///
/// The coarse temperature is evaluated at the quadrature points of the fine
/// mesh. Every coarse snapshot time must also be a fine snapshot time.
pub fn cauchy_in_time(
    coarse_sim: &Simulation,
    coarse: &Trajectory,
    fine_sim: &Simulation,
    fine: &Trajectory,
    params: TruncationParams,
) -> Result<CauchyReport> {
    check_above_lift(coarse_sim, params.m())?;
    check_above_lift(fine_sim, params.m())?;
    let level = params.m() - params.delta();
    let forms = &fine_sim.forms;
    let cspace = coarse_sim.forms.scalar_space();
    let mut out = CauchyReport {
        truncated_sup: 0.0,
        l1_sup: 0.0,
        splitting_slack: f64::INFINITY,
        compared_times: Vec::new(),
    };
    let mut j = 0;
    for sc in &coarse.snapshots {
        let tol = 1e-9 * sc.time.abs().max(1.0);
        while j < fine.snapshots.len() && fine.snapshots[j].time < sc.time - tol {
            j += 1;
        }
        let Some(sf) = fine
            .snapshots
            .get(j)
            .filter(|s| (s.time - sc.time).abs() <= tol)
        else {
            return Err(Error::Parameter(format!(
                "time grids are incompatible: coarse time {} has no fine counterpart",
                sc.time
            )));
        };
        let tc = sc.temperature.nodal();
        let tf = sf.temperature.nodal();
        let (mut l1, mut l2, mut tails) = (0.0, 0.0, 0.0);
        for_each_sample(forms, forms.rule(), &tf, None, |q| {
            let c = cspace.eval_at(&tc, q.x, q.y);
            let f = q.theta;
            l1 += q.w * (c - f).abs();
            l2 += q.w * (params.value(c) - params.value(f)).powi(2);
            tails += q.w * ((c - level).max(0.0) + (f - level).max(0.0));
        });
        let l2 = l2.sqrt();
        out.truncated_sup = out.truncated_sup.max(l2);
        out.l1_sup = out.l1_sup.max(l1);
        out.splitting_slack = out.splitting_slack.min(tails + l2 - l1);
        out.compared_times.push(sc.time);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attainment {
    /// `(t_k, ‖θ(t_k) − θ₀‖₁)` for the earliest snapshots after `t = 0`.
    pub rows: Vec<(f64, f64)>,
    /// Intercept at `t = 0` of a least-squares line through the rows.
    pub fitted_limit: Option<f64>,
}

/// Distance of the first `count` computed temperatures from the data `θ₀`.
pub fn initial_attainment(sim: &Simulation, traj: &Trajectory, count: usize) -> Attainment {
    let forms = &sim.forms;
    let theta0 = &sim.data.theta0;
    let rows: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .skip(1)
        .take(count)
        .map(|s| {
            let theta = s.temperature.nodal();
            let mut d = 0.0;
            for_each_sample(forms, forms.rule(), &theta, None, |q| {
                d += q.w * (q.theta - theta0(0.0, q.x, q.y)).abs();
            });
            (s.time, d)
        })
        .collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let vs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Attainment {
        fitted_limit: linear_fit(&ts, &vs).map(|f| f.intercept),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_mesh, AssembledForms};
    use crate::model::{ConductivityModel, Models, StressModel};
    use crate::problem::ProblemData;
    use crate::stepper::{run, StepConfig};
    use std::sync::Arc;

    fn at_rest(n: usize, theta: f64) -> (Simulation, Trajectory) {
        let f = Arc::new(AssembledForms::new(build_mesh(n).unwrap(), 2.0, None).unwrap());
        let models = Models::new(
            StressModel::newtonian(1.0),
            ConductivityModel::constant(1.0),
        );
        let sim = Simulation::new(f, models, ProblemData::at_rest(theta)).unwrap();
        let cfg = StepConfig {
            dt: 0.1,
            t_end: 0.2,
            ..StepConfig::default()
        };
        let traj = run(&sim, sim.initial_state(f64::INFINITY, true).unwrap(), &cfg);
        (sim, traj)
    }

    #[test]
    fn constant_data_cases() {
        let (sim, traj) = at_rest(4, 2.0);
        let mp = min_principle(&sim, &traj, 2.0, 1e-8);
        assert!(mp.pass && (mp.min - 2.0).abs() < 1e-12);
        // θ ≡ c: ‖c − H^α(c, c)‖₁ = |c − H^α(c, c)| on the unit square
        let a = alpha_estimate(&sim, &traj, 0.3).unwrap();
        let h = crate::model::h_alpha(2.0, 2.0, 0.3, 2.0).unwrap();
        assert!((a.sup_l1_gap - (2.0 - h).abs()).abs() < 1e-12);
        assert!(a.weighted_gradient.abs() < 1e-20);
        assert!(gradient_integrability(&sim, &traj, 1.2).unwrap() < 1e-12);
        let tm = tail_mass(&sim, &traj, 2.5).unwrap();
        assert_eq!(tm.sup_tail, 0.0);
        assert_eq!(tm.dominating, 0.0);
        let at = initial_attainment(&sim, &traj, 2);
        assert_eq!(at.rows.len(), 2);
        assert!(at.rows.iter().all(|r| r.1 < 1e-12));
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        let (sim, traj) = at_rest(2, 2.0);
        assert!(matches!(
            alpha_estimate(&sim, &traj, 0.5),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            alpha_estimate(&sim, &traj, 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            gradient_integrability(&sim, &traj, 4.0 / 3.0),
            Err(Error::Parameter(_))
        ));
        assert!(gradient_integrability(&sim, &traj, 1.0).is_ok());
        assert!(matches!(
            tail_mass(&sim, &traj, 2.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn violation_reports_first_witness() {
        let (sim, traj) = at_rest(3, 2.0);
        let mp = min_principle(&sim, &traj, 2.5, 1e-8);
        assert!(!mp.pass);
        let w = mp.witness.unwrap();
        assert_eq!(w.time, 0.0);
        assert!((w.theta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_trajectories_have_zero_cauchy_distance() {
        let (sim, traj) = at_rest(4, 2.0);
        let p = TruncationParams::new(3.0, 0.5).unwrap();
        let r = cauchy_in_time(&sim, &traj, &sim, &traj, p).unwrap();
        assert!(r.truncated_sup < 1e-13 && r.l1_sup < 1e-13);
        assert_eq!(r.compared_times.len(), traj.snapshots.len());
    }

    #[test]
    fn incompatible_grids_are_rejected() {
        let (sim, traj) = at_rest(4, 2.0);
        let mut shifted = traj.clone();
        shifted.snapshots[1].time += 0.01;
        let p = TruncationParams::new(3.0, 0.5).unwrap();
        assert!(matches!(
            cauchy_in_time(&sim, &shifted, &sim, &traj, p),
            Err(Error::Parameter(_))
        ));
    }
}
