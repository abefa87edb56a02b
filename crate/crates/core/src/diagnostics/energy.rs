use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{for_each_sample, steps};
use crate::domain::{dot, AssembledForms};
use crate::model::Sym2;
use crate::stepper::{Coupling, Simulation, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub time: f64,
    /// `‖u(τ)‖₂²`
    pub kinetic: f64,
    /// `∫₀^τ ∫ S:Du`
    pub dissipation: f64,
    /// `∫₀^τ ⟨f, u⟩`
    pub work: f64,
    /// `Σ ‖u^{n+1} − uⁿ‖₂²` up to τ
    pub correction: f64,
    /// `‖u(τ)‖² + 2∫∫S:Du − ‖u₀‖² − 2∫⟨f,u⟩`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub rows: Vec<EnergyRow>,
    /// `‖u₀‖² + 2∫|⟨f,u⟩|`, the normalisation of the relative values.
    pub scale: f64,
    /// `max_τ |residual| / scale`
    pub relative_residual: f64,
    /// Total backward-Euler correction relative to `scale`.
    pub relative_correction: f64,
    /// `max_τ |residual + correction| / scale`: what remains after the
    /// numerical dissipation of the scheme is accounted for.
    pub identity_defect: f64,
}

/// Discrete kinetic energy balance of a trajectory.
///
/// The dissipation uses the temperature the momentum equation saw in each
/// step (current or lagged, following the trajectory's coupling) and the
/// solver's stress quadrature.
pub fn energy_budget(sim: &Simulation, traj: &Trajectory) -> EnergyBudget {
    let forms = &sim.forms;
    let stress = &sim.models.stress;
    let Some(first) = traj.snapshots.first() else {
        return EnergyBudget {
            rows: Vec::new(),
            scale: 0.0,
            relative_residual: 0.0,
            relative_correction: 0.0,
            identity_defect: 0.0,
        };
    };
    let e0 = forms.velocity_l2_sq(&first.velocity.coeffs);
    let mut rows = vec![EnergyRow {
        time: first.time,
        kinetic: e0,
        dissipation: 0.0,
        work: 0.0,
        correction: 0.0,
        residual: 0.0,
    }];
    let (mut diss, mut work, mut work_abs, mut corr) = (0.0, 0.0, 0.0, 0.0);
    for (dt, prev, next) in steps(traj) {
        let u = &next.velocity.coeffs;
        let theta = match traj.config.coupling {
            Coupling::FullyCoupled => next.temperature.nodal(),
            Coupling::LaggedTemperature => prev.temperature.nodal(),
        };
        diss += dt * forms.dissipation_integral(stress, &theta, u);
        let w = dot(&sim.force_vector(next.time), u);
        work += dt * w;
        work_abs += dt * w.abs();
        let du: Vec<f64> = u
            .iter()
            .zip(&prev.velocity.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        corr += forms.velocity_l2_sq(&du);
        let kinetic = forms.velocity_l2_sq(u);
        rows.push(EnergyRow {
            time: next.time,
            kinetic,
            dissipation: diss,
            work,
            correction: corr,
            residual: kinetic + 2.0 * diss - e0 - 2.0 * work,
        });
    }
    let scale = e0 + 2.0 * work_abs;
    let rel = |v: f64| if scale > 0.0 { v / scale } else { 0.0 };
    let max_res = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let max_defect = rows
        .iter()
        .map(|r| (r.residual + r.correction).abs())
        .fold(0.0, f64::max);
    EnergyBudget {
        relative_residual: rel(max_res),
        relative_correction: rel(corr),
        identity_defect: rel(max_defect),
        scale,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSuite {
    pub sup_u_l2: f64,
    /// `∫₀ᵀ ‖u‖_{1,p}^p`
    pub u_w1p_integral: f64,
    /// `‖u‖_{L^{2p}(Q)}`
    pub u_l2p: f64,
    pub sup_theta_l1: f64,
    /// `(r, ‖θ‖_{L^r(Q)})`
    pub theta_lr: Vec<(f64, f64)>,
}

/// Norms tracked by the uniform bounds; space–time norms integrate over
/// `(0, t_last)`.
pub fn norm_suite(sim: &Simulation, traj: &Trajectory, r_list: &[f64]) -> NormSuite {
    let forms = &sim.forms;
    let p = sim.models.stress.p();
    let mut sup_u: f64 = 0.0;
    let mut sup_theta: f64 = 0.0;
    for s in &traj.snapshots {
        sup_u = sup_u.max(forms.velocity_l2_sq(&s.velocity.coeffs).sqrt());
        let theta = s.temperature.nodal();
        let mut l1 = 0.0;
        for_each_sample(forms, forms.rule(), &theta, None, |q| {
            l1 += q.w * q.theta.abs()
        });
        sup_theta = sup_theta.max(l1);
    }
    let mut w1p = 0.0;
    let mut l2p = 0.0;
    let mut lr = vec![0.0; r_list.len()];
    for (dt, _, next) in steps(traj) {
        let theta = next.temperature.nodal();
        let u = &next.velocity.coeffs;
        for_each_sample(forms, forms.stress_rule(), &theta, Some(u), |q| {
            let u2 = q.u[0] * q.u[0] + q.u[1] * q.u[1];
            let g2: f64 = q.grad_u.iter().flatten().map(|v| v * v).sum();
            w1p += dt * q.w * (u2.powf(0.5 * p) + g2.powf(0.5 * p));
            l2p += dt * q.w * u2.powf(p);
        });
        for_each_sample(forms, forms.rule(), &theta, None, |q| {
            for (acc, r) in lr.iter_mut().zip(r_list) {
                *acc += dt * q.w * q.theta.abs().powf(*r);
            }
        });
    }
    NormSuite {
        sup_u_l2: sup_u,
        u_w1p_integral: w1p,
        u_l2p: l2p.powf(1.0 / (2.0 * p)),
        sup_theta_l1: sup_theta,
        theta_lr: r_list
            .iter()
            .zip(lr)
            .map(|(&r, v)| (r, v.powf(1.0 / r)))
            .collect(),
    }
}

/// `‖u‖_{1,q} / ‖Du‖_q` for a discrete velocity; `None` for the zero field.
pub fn korn_ratio(forms: &AssembledForms, u: &[f64], q: f64) -> Result<Option<f64>> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::Parameter(format!(
            "Korn ratio needs q ∈ (1, ∞), got {q}"
        )));
    }
    let theta = vec![0.0; forms.mesh().n_vertices()];
    let (mut full, mut sym) = (0.0, 0.0);
    for_each_sample(forms, forms.stress_rule(), &theta, Some(u), |s| {
        let u2 = s.u[0] * s.u[0] + s.u[1] * s.u[1];
        let g2: f64 = s.grad_u.iter().flatten().map(|v| v * v).sum();
        full += s.w * (u2.powf(0.5 * q) + g2.powf(0.5 * q));
        sym += s.w * Sym2::sym_grad(s.grad_u).norm().powf(q);
    });
    if sym == 0.0 {
        return Ok(None);
    }
    Ok(Some((full / sym).powf(1.0 / q)))
}

/// Largest Korn ratio over `samples` random discrete fields with
/// independent uniform coefficients in `[−1, 1]`.
pub fn korn_sample_max(forms: &AssembledForms, q: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..forms.n_velocity())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        if let Some(r) = korn_ratio(forms, &u, q)? {
            worst = worst.max(r);
        }
    }
    Ok(worst)
}
