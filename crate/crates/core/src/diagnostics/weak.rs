use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::for_each_sample;
use crate::domain::TriangleRule;
use crate::model::Sym2;
use crate::stepper::{Simulation, StepState, Trajectory};
use crate::{Error, Result};

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Temporal factor `χ` of a test function, with its derivative.
#[derive(Clone)]
pub struct TimeProfile {
    name: String,
    chi: TimeFn,
    dchi: TimeFn,
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TimeProfile").field(&self.name).finish()
    }
}

impl TimeProfile {
    /// `χ(t) = exp(1 − 1/(1 − (t/end)²))` for `|t| < end`, zero otherwise.
    pub fn bump(end: f64) -> Result<Self> {
        if !(end > 0.0 && end.is_finite()) {
            return Err(Error::Parameter(format!(
                "bump support must be positive, got {end}"
            )));
        }
        let chi = move |t: f64| {
            let s = t / end;
            if s.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
        };
        let dchi = move |t: f64| {
            let s = t / end;
            if s.abs() >= 1.0 {
                0.0
            } else {
                let q = 1.0 - s * s;
                -chi(t) * 2.0 * s / (end * q * q)
            }
        };
        Ok(Self {
            name: format!("bump({end})"),
            chi: Arc::new(chi),
            dchi: Arc::new(dchi),
        })
    }

    pub fn custom(
        name: impl Into<String>,
        chi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dchi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            chi: Arc::new(chi),
            dchi: Arc::new(dchi),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.chi)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.dchi)(t)
    }
}

/// `ψ(x, y) = sin(kπx) sin(lπy)`, which vanishes on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialMode {
    pub k: u32,
    pub l: u32,
}

impl SpatialMode {
    pub fn new(k: u32, l: u32) -> Self {
        Self { k, l }
    }

    fn freqs(&self) -> (f64, f64) {
        (self.k as f64 * PI, self.l as f64 * PI)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (a, b) = self.freqs();
        (a * x).sin() * (b * y).sin()
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (a, b) = self.freqs();
        let (sx, cx) = (a * x).sin_cos();
        let (sy, cy) = (b * y).sin_cos();
        [a * cx * sy, b * sx * cy]
    }

    /// `sup |∇ψ| = π max(k, l)`.
    fn gradient_sup(&self) -> f64 {
        PI * self.k.max(self.l) as f64
    }

    /// Divergence-free field `w = curl(ψ²)` with zero trace, and its gradient.
    fn curl_square(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let (a, b) = self.freqs();
        let (sx, cx) = (a * x).sin_cos();
        let (sy, cy) = (b * y).sin_cos();
        let psi = sx * sy;
        let px = a * cx * sy;
        let py = b * sx * cy;
        let pxy = a * b * cx * cy;
        let pxx = -a * a * psi;
        let pyy = -b * b * psi;
        let w = [2.0 * psi * py, -2.0 * psi * px];
        let g = [
            [2.0 * (px * py + psi * pxy), 2.0 * (py * py + psi * pyy)],
            [-2.0 * (px * px + psi * pxx), -2.0 * (py * px + psi * pxy)],
        ];
        (w, g)
    }

    /// Grid estimates of `sup |w|` and `sup |∇w|` for [`Self::curl_square`].
    fn curl_square_sups(&self) -> (f64, f64) {
        let n = 200;
        let (mut sv, mut sg): (f64, f64) = (0.0, 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let (w, g) = self.curl_square(i as f64 / n as f64, j as f64 / n as f64);
                sv = sv.max(w[0].hypot(w[1]));
                sg = sg.max(g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        (sv, sg)
    }
}

#[derive(Debug, Clone)]
struct Profile {
    profile: TimeProfile,
    sup: f64,
    sup_derivative: f64,
}

/// Test functions `φ = χ(t)ψ(x)` over `[0, T]` with every `χ(T) = 0`.
#[derive(Debug, Clone)]
pub struct TestFunctionSet {
    t_end: f64,
    profiles: Vec<Profile>,
    modes: Vec<SpatialMode>,
}

impl TestFunctionSet {
    /// All products of `profiles` and `modes`. A profile that does not vanish
    /// at `t_end` is not a legal test function and is rejected.
    pub fn new(t_end: f64, profiles: Vec<TimeProfile>, modes: Vec<SpatialMode>) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::Parameter(format!(
                "final time must be positive, got {t_end}"
            )));
        }
        if profiles.is_empty() || modes.is_empty() {
            return Err(Error::Parameter("test function family is empty".into()));
        }
        if let Some(m) = modes.iter().find(|m| m.k == 0 || m.l == 0) {
            return Err(Error::Parameter(format!("mode {m:?} is identically zero")));
        }
        let samples = 4096;
        let profiles = profiles
            .into_iter()
            .map(|p| {
                let at_end = p.eval(t_end);
                if at_end.abs() > 1e-14 {
                    return Err(Error::Contract(format!(
                        "test profile {} has χ(T) = {at_end}; it must vanish at T = {t_end}",
                        p.name
                    )));
                }
                let (mut sup, mut sup_d): (f64, f64) = (0.0, 0.0);
                for i in 0..=samples {
                    let t = t_end * i as f64 / samples as f64;
                    sup = sup.max(p.eval(t).abs());
                    sup_d = sup_d.max(p.derivative(t).abs());
                }
                Ok(Profile {
                    profile: p,
                    sup,
                    sup_derivative: sup_d,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            t_end,
            profiles,
            modes,
        })
    }

    /// Bumps ending at `T` and `T/2` times the modes `(1,1), (1,2), (2,1), (2,2)`.
    pub fn standard(t_end: f64) -> Result<Self> {
        let profiles = vec![TimeProfile::bump(t_end)?, TimeProfile::bump(0.5 * t_end)?];
        let modes = vec![
            SpatialMode::new(1, 1),
            SpatialMode::new(1, 2),
            SpatialMode::new(2, 1),
            SpatialMode::new(2, 2),
        ];
        Self::new(t_end, profiles, modes)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.profiles.len() * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// Largest `|R(φ)| / ‖φ‖_{W^{1,∞}}` over the family.
    pub max_normalized: f64,
    /// `(profile name, mode, normalized residual)` for every test function.
    pub entries: Vec<(String, SpatialMode, f64)>,
}

/// Combines per-snapshot spatial functionals into the space–time residual
/// `−Σ a_{n+1}(χ_{n+1} − χ_n) − χ(0)a₀ + Σ dt_n χ(t_{n+½}) b_{n+1}`.
///
/// `a0` and `per_step` return one entry per mode; `mode_sups` holds
/// `(sup|ψ|, sup|∇ψ|)`.
fn combine(
    tests: &TestFunctionSet,
    traj: &Trajectory,
    a0: Vec<f64>,
    mode_sups: &[(f64, f64)],
    mut per_step: impl FnMut(&StepState) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<WeakResidual> {
    let last = traj.snapshots.last().map_or(0.0, |s| s.time);
    if last < tests.t_end * (1.0 - 1e-9) {
        return Err(Error::Contract(format!(
            "trajectory ends at {last}, before the test functions' final time {}",
            tests.t_end
        )));
    }
    let nm = tests.modes.len();
    let np = tests.profiles.len();
    let mut acc = vec![0.0; np * nm];
    for (p, pr) in tests.profiles.iter().enumerate() {
        let c0 = pr.profile.eval(traj.snapshots[0].time);
        for m in 0..nm {
            acc[p * nm + m] -= c0 * a0[m];
        }
    }
    for w in traj.snapshots.windows(2) {
        let (t0, t1) = (w[0].time, w[1].time);
        if t0 >= tests.t_end {
            break;
        }
        let (a, b) = per_step(&w[1])?;
        for (p, pr) in tests.profiles.iter().enumerate() {
            let chi = &pr.profile;
            let jump = chi.eval(t1) - chi.eval(t0);
            let weight = (t1 - t0) * chi.eval(0.5 * (t0 + t1));
            for m in 0..nm {
                acc[p * nm + m] += -jump * a[m] + weight * b[m];
            }
        }
    }
    let mut entries = Vec::with_capacity(np * nm);
    let mut max: f64 = 0.0;
    for (p, pr) in tests.profiles.iter().enumerate() {
        for (m, mode) in tests.modes.iter().enumerate() {
            let (sv, sg) = mode_sups[m];
            let norm = (pr.sup * sv).max(pr.sup_derivative * sv).max(pr.sup * sg);
            let r = acc[p * nm + m].abs() / norm;
            max = max.max(r);
            entries.push((pr.profile.name.clone(), *mode, r));
        }
    }
    Ok(WeakResidual {
        max_normalized: max,
        entries,
    })
}

fn scalar_mode_sups(tests: &TestFunctionSet) -> Vec<(f64, f64)> {
    tests
        .modes
        .iter()
        .map(|m| (1.0, m.gradient_sup()))
        .collect()
}

fn initial_scalar(
    sim: &Simulation,
    tests: &TestFunctionSet,
    rule: &TriangleRule,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let forms = &sim.forms;
    let theta0 = &sim.data.theta0;
    let zero = vec![0.0; forms.mesh().n_vertices()];
    let mut a0 = vec![0.0; tests.modes.len()];
    let mut err = None;
    for_each_sample(forms, rule, &zero, None, |q| {
        match f(theta0(0.0, q.x, q.y)) {
            Ok(v) => {
                for (acc, m) in a0.iter_mut().zip(&tests.modes) {
                    *acc += q.w * v * m.value(q.x, q.y);
                }
            }
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(a0),
    }
}

/// Defect of the weak internal-energy balance
/// `−∫∫θ∂tφ − ∫∫θu·∇φ + ∫∫κ(θ)∇θ·∇φ − ∫∫(S:Du + g)φ − ∫θ₀φ(0)`.
pub fn internal_energy_residual(
    sim: &Simulation,
    traj: &Trajectory,
    tests: &TestFunctionSet,
) -> Result<WeakResidual> {
    let forms = &sim.forms;
    let rule = forms.stress_rule();
    let stress = &sim.models.stress;
    let kappa = &sim.models.kappa;
    let nm = tests.modes.len();
    let a0 = initial_scalar(sim, tests, rule, Ok)?;
    combine(tests, traj, a0, &scalar_mode_sups(tests), |s| {
        let theta = s.temperature.nodal();
        let (mut a, mut b) = (vec![0.0; nm], vec![0.0; nm]);
        let g = sim.data.heat_source.as_ref();
        for_each_sample(forms, rule, &theta, Some(&s.velocity.coeffs), |q| {
            let th = q.theta;
            let k = kappa.kappa(th);
            let src = stress.dissipation(th, Sym2::sym_grad(q.grad_u))
                + g.map_or(0.0, |g| g(s.time, q.x, q.y));
            for (m, mode) in tests.modes.iter().enumerate() {
                let psi = mode.value(q.x, q.y);
                let gp = mode.gradient(q.x, q.y);
                a[m] += q.w * th * psi;
                b[m] += q.w
                    * (-th * (q.u[0] * gp[0] + q.u[1] * gp[1])
                        + k * (q.grad_theta[0] * gp[0] + q.grad_theta[1] * gp[1])
                        - src * psi);
            }
        });
        Ok((a, b))
    })
}

/// Defect of the weak entropy balance for `η = ln θ`:
/// `−∫∫η∂tφ − ∫∫ηu·∇φ + ∫∫κ∇η·∇φ − ∫∫(S:Du/θ + κ|∇θ|²/θ² + g/θ)φ − ∫η₀φ(0)`.
///
/// Any non-positive temperature at a quadrature point is a domain error.
pub fn entropy_residual(
    sim: &Simulation,
    traj: &Trajectory,
    tests: &TestFunctionSet,
) -> Result<WeakResidual> {
    let forms = &sim.forms;
    let rule = forms.stress_rule();
    let stress = &sim.models.stress;
    let kappa = &sim.models.kappa;
    let nm = tests.modes.len();
    let positive_log = |th: f64| {
        if th > 0.0 {
            Ok(th.ln())
        } else {
            Err(Error::Domain(format!("entropy needs θ > 0, got {th}")))
        }
    };
    let a0 = initial_scalar(sim, tests, rule, positive_log)?;
    combine(tests, traj, a0, &scalar_mode_sups(tests), |s| {
        let theta = s.temperature.nodal();
        let (mut a, mut b) = (vec![0.0; nm], vec![0.0; nm]);
        let g = sim.data.heat_source.as_ref();
        let mut bad = None;
        for_each_sample(forms, rule, &theta, Some(&s.velocity.coeffs), |q| {
            let th = q.theta;
            if !(th > 0.0) {
                bad.get_or_insert((th, q.x, q.y));
                return;
            }
            let eta = th.ln();
            let k = kappa.kappa(th);
            let gt = q.grad_theta;
            let gt2 = gt[0] * gt[0] + gt[1] * gt[1];
            let src = (stress.dissipation(th, Sym2::sym_grad(q.grad_u))
                + g.map_or(0.0, |g| g(s.time, q.x, q.y)))
                / th
                + k * gt2 / (th * th);
            for (m, mode) in tests.modes.iter().enumerate() {
                let psi = mode.value(q.x, q.y);
                let gp = mode.gradient(q.x, q.y);
                a[m] += q.w * eta * psi;
                b[m] += q.w
                    * (-eta * (q.u[0] * gp[0] + q.u[1] * gp[1])
                        + k * (gt[0] * gp[0] + gt[1] * gp[1]) / th
                        - src * psi);
            }
        });
        if let Some((th, x, y)) = bad {
            return Err(Error::Domain(format!(
                "entropy needs θ > 0, got {th} at t = {}, (x, y) = ({x}, {y})",
                s.time
            )));
        }
        Ok((a, b))
    })
}

/// Defect of the weak momentum balance tested with the divergence-free
/// fields `χ(t) curl(ψ²)`:
/// `−∫∫u·∂tφ − ∫∫(u⊗u):∇φ + ∫∫S:Dφ − ∫∫f·φ − ∫u₀·φ(0)`.
pub fn momentum_residual(
    sim: &Simulation,
    traj: &Trajectory,
    tests: &TestFunctionSet,
) -> Result<WeakResidual> {
    let forms = &sim.forms;
    let rule = forms.stress_rule();
    let stress = &sim.models.stress;
    let nm = tests.modes.len();
    let u0 = &sim.data.u0;
    let zero = vec![0.0; forms.mesh().n_vertices()];
    let mut a0 = vec![0.0; nm];
    for_each_sample(forms, rule, &zero, None, |q| {
        let u = u0(0.0, q.x, q.y);
        for (acc, mode) in a0.iter_mut().zip(&tests.modes) {
            let (w, _) = mode.curl_square(q.x, q.y);
            *acc += q.w * (u[0] * w[0] + u[1] * w[1]);
        }
    });
    let sups: Vec<(f64, f64)> = tests.modes.iter().map(|m| m.curl_square_sups()).collect();
    combine(tests, traj, a0, &sups, |s| {
        let theta = s.temperature.nodal();
        let (mut a, mut b) = (vec![0.0; nm], vec![0.0; nm]);
        let f = sim.data.force.as_ref();
        for_each_sample(forms, rule, &theta, Some(&s.velocity.coeffs), |q| {
            let d = Sym2::sym_grad(q.grad_u);
            let eta = stress.secant_viscosity(q.theta, d.norm());
            let force = f.map_or([0.0; 2], |f| f(s.time, q.x, q.y));
            for (m, mode) in tests.modes.iter().enumerate() {
                let (w, gw) = mode.curl_square(q.x, q.y);
                let conv: f64 = (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| q.u[i] * q.u[j] * gw[i][j])
                    .sum();
                let visc = eta * d.ddot(Sym2::sym_grad(gw));
                a[m] += q.w * (q.u[0] * w[0] + q.u[1] * w[1]);
                b[m] += q.w * (-conv + visc - force[0] * w[0] - force[1] * w[1]);
            }
        });
        Ok((a, b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_mesh, AssembledForms};
    use crate::model::{ConductivityModel, Models, StressModel};
    use crate::problem::ProblemData;
    use crate::stepper::{run, StepConfig};

    #[test]
    fn profile_not_vanishing_at_final_time_is_rejected() {
        let flat = TimeProfile::custom("flat", |_| 1.0, |_| 0.0);
        let err = TestFunctionSet::new(1.0, vec![flat], vec![SpatialMode::new(1, 1)]);
        assert!(matches!(err, Err(Error::Contract(_))));
        let early = TimeProfile::bump(0.5).unwrap();
        assert!(TestFunctionSet::new(1.0, vec![early], vec![SpatialMode::new(1, 1)]).is_ok());
        assert!(TestFunctionSet::new(1.0, vec![], vec![SpatialMode::new(1, 1)]).is_err());
    }

    #[test]
    fn bump_derivative_matches_finite_differences() {
        let b = TimeProfile::bump(1.3).unwrap();
        for t in [0.0, 0.2, 0.7, 1.1, 1.25] {
            let h = 1e-6;
            let fd = (b.eval(t + h) - b.eval(t - h)) / (2.0 * h);
            assert!((fd - b.derivative(t)).abs() < 1e-6, "t = {t}");
        }
        assert_eq!(b.eval(1.3), 0.0);
        assert_eq!(b.eval(0.0), 1.0);
    }

    #[test]
    fn curl_square_gradient_matches_finite_differences_and_is_divergence_free() {
        let m = SpatialMode::new(1, 2);
        let (x, y, h) = (0.31, 0.67, 1e-6);
        let (_, g) = m.curl_square(x, y);
        let (wxp, _) = m.curl_square(x + h, y);
        let (wxm, _) = m.curl_square(x - h, y);
        let (wyp, _) = m.curl_square(x, y + h);
        let (wym, _) = m.curl_square(x, y - h);
        for i in 0..2 {
            assert!(((wxp[i] - wxm[i]) / (2.0 * h) - g[i][0]).abs() < 1e-5);
            assert!(((wyp[i] - wym[i]) / (2.0 * h) - g[i][1]).abs() < 1e-5);
        }
        assert!((g[0][0] + g[1][1]).abs() < 1e-12);
    }

    #[test]
    fn constant_state_has_zero_residuals() {
        let f = Arc::new(AssembledForms::new(build_mesh(4).unwrap(), 2.0, None).unwrap());
        let models = Models::new(
            StressModel::newtonian(1.0),
            ConductivityModel::constant(1.0),
        );
        let sim = Simulation::new(f, models, ProblemData::at_rest(1.7)).unwrap();
        let cfg = StepConfig {
            dt: 0.1,
            t_end: 0.5,
            ..StepConfig::default()
        };
        let traj = run(&sim, sim.initial_state(f64::INFINITY, true).unwrap(), &cfg);
        let tests = TestFunctionSet::standard(0.5).unwrap();
        assert_eq!(tests.len(), 8);
        for r in [
            internal_energy_residual(&sim, &traj, &tests).unwrap(),
            entropy_residual(&sim, &traj, &tests).unwrap(),
            momentum_residual(&sim, &traj, &tests).unwrap(),
        ] {
            assert!(r.max_normalized < 1e-13, "{r:?}");
        }
        let long = TestFunctionSet::standard(1.0).unwrap();
        assert!(matches!(
            entropy_residual(&sim, &traj, &long),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn nonpositive_temperature_is_fatal_for_entropy() {
        let f = Arc::new(AssembledForms::new(build_mesh(3).unwrap(), 2.0, None).unwrap());
        let models = Models::new(
            StressModel::newtonian(1.0),
            ConductivityModel::constant(1.0),
        );
        let sim = Simulation::new(f, models, ProblemData::at_rest(1.0)).unwrap();
        let cfg = StepConfig {
            dt: 0.1,
            t_end: 0.2,
            ..StepConfig::default()
        };
        let mut traj = run(&sim, sim.initial_state(f64::INFINITY, true).unwrap(), &cfg);
        let v = sim.forms.scalar_space().interior_nodes()[0];
        traj.snapshots[1].temperature.fluctuation[v] = -5.0;
        let tests = TestFunctionSet::standard(0.2).unwrap();
        assert!(matches!(
            entropy_residual(&sim, &traj, &tests),
            Err(Error::Domain(_))
        ));
    }
}
