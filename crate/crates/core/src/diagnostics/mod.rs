//! Structural checks over computed trajectories.
//!
//! Every function here is read-only over a [`Simulation`] and a
//! [`Trajectory`]; none of them performs I/O. Time integrals use the
//! piecewise-constant reconstruction `f(t) = f(t_{n+1})` on `(t_n, t_{n+1}]`
//! that matches backward Euler.

mod decay;
mod energy;
mod report;
mod temperature;
mod weak;

pub use decay::{
    certify_fixed_point, decay_fit, stokes_eigenvalue, DecayFit, DecayPoint, StokesEigen,
};
pub use energy::{
    energy_budget, korn_ratio, korn_sample_max, norm_suite, EnergyBudget, EnergyRow, NormSuite,
};
pub use report::{Bound, CheckResult, DiagnosticsReport, ReportMetadata, Verdict};
pub use temperature::{
    alpha_estimate, cauchy_in_time, default_tol_min, gradient_integrability, initial_attainment,
    min_principle, tail_mass, AlphaEstimate, Attainment, CauchyReport, MinPrinciple, MinWitness,
    TailMass,
};
pub use weak::{
    entropy_residual, internal_energy_residual, momentum_residual, SpatialMode, TestFunctionSet,
    TimeProfile, WeakResidual,
};

use crate::domain::{AssembledForms, TriangleRule};
use crate::stepper::{StepState, Trajectory};

/// Field values at one quadrature point; `w` already includes the cell area.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub grad_theta: [f64; 2],
    pub u: [f64; 2],
    /// `[[∂x u, ∂y u], [∂x v, ∂y v]]`
    pub grad_u: [[f64; 2]; 2],
}

/// Visits every quadrature point of `rule` with the P1 temperature `theta`
/// (full nodal vector) and, if given, the velocity coefficients `u`.
pub(crate) fn for_each_sample(
    forms: &AssembledForms,
    rule: &TriangleRule,
    theta: &[f64],
    u: Option<&[f64]>,
    mut f: impl FnMut(&Sample),
) {
    let mesh = forms.mesh();
    let scalar = forms.scalar_space();
    let vel = forms.velocity_space();
    for c in 0..mesh.n_cells() {
        let area = mesh.cell_area(c);
        let grad_theta = scalar.gradient(theta, c);
        for (l, w) in rule.iter() {
            let p = mesh.map_point(c, *l);
            let (uv, gu) = match u {
                Some(u) => vel.eval(u, c, *l),
                None => ([0.0; 2], [[0.0; 2]; 2]),
            };
            f(&Sample {
                w: w * area,
                x: p[0],
                y: p[1],
                theta: scalar.eval(theta, c, *l),
                grad_theta,
                u: uv,
                grad_u: gu,
            });
        }
    }
}

/// Consecutive snapshot pairs `(dt, previous, next)`.
pub(crate) fn steps(traj: &Trajectory) -> impl Iterator<Item = (f64, &StepState, &StepState)> {
    traj.snapshots
        .windows(2)
        .map(|w| (w[1].time - w[0].time, &w[0], &w[1]))
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_error: f64,
}

pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_std_error = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(f.slope_std_error < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }
}
