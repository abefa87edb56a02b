//! Backward-Euler time stepping with Picard linearisation.
//!
//! One step from `(uⁿ, θⁿ)` to `tⁿ⁺¹ = tⁿ + dt` solves
//!
//! ```text
//! (u − uⁿ)/dt + a_S(θ; u, ·) + b(u; u, ·) + Bᵀπ = f(tⁿ⁺¹),    B u = 0,
//! M_θ(θ − θⁿ)/dt + a_κ(θ; θ, ·) − c(u; θ, ·) = (S*(θ, Du):Du, ·) + g(tⁿ⁺¹),
//! ```
//!
//! with `θ = θ̂` on the boundary. Each Picard iteration freezes the viscosity
//! `η(θ_k, |Du_k|)`, the advecting field and `κ(θ_k)`, solves the saddle
//! system for `u_{k+1}` and then the temperature system for `θ_{k+1}`.

use std::collections::VecDeque;
use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::domain::{
    project_initial_temperature, project_initial_velocity, AssembledForms, CscMatrix,
    TemperatureSystem,
};
use crate::model::{compute_mu, Models};
use crate::problem::ProblemData;
use crate::steady::{solve_lift, BoundaryData, SteadyLift};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Viscosity sees the current temperature iterate.
    #[default]
    FullyCoupled,
    /// Viscosity uses the temperature of the previous time level.
    LaggedTemperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    #[default]
    Implicit,
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub coupling: Coupling,
    /// Where the heating `S*:Du` is evaluated.
    pub dissipation_treatment: Treatment,
    /// Advecting velocity of the momentum equation.
    pub convection_treatment: Treatment,
    pub mass_lumping: bool,
    /// Number of dt halvings tried before a run is aborted.
    pub max_halvings: usize,
    /// History length of the Anderson mixing applied to the velocity
    /// iterates; 0 gives plain Picard.
    pub anderson_depth: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            picard_tol: 1e-9,
            picard_max: 50,
            coupling: Coupling::FullyCoupled,
            dissipation_treatment: Treatment::Implicit,
            convection_treatment: Treatment::Implicit,
            mass_lumping: true,
            max_halvings: 5,
            anderson_depth: 5,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0) {
            bad.push(format!("dt > 0 required, got {}", self.dt));
        }
        if !(self.t_end > 0.0) {
            bad.push(format!("t_end > 0 required, got {}", self.t_end));
        }
        if self.dt > self.t_end {
            bad.push(format!(
                "dt ≤ t_end required, got dt = {} > {}",
                self.dt, self.t_end
            ));
        }
        if !(self.picard_tol > 0.0 && self.picard_tol < 1.0) {
            bad.push(format!(
                "picard_tol in (0, 1) required, got {}",
                self.picard_tol
            ));
        }
        if self.picard_max == 0 {
            bad.push("picard_max ≥ 1 required".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    pub coeffs: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// Temperature as fluctuation plus the shared lift `θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureState {
    pub fluctuation: Vec<f64>,
    pub lift: Arc<Vec<f64>>,
}

impl TemperatureState {
    pub fn from_nodal(nodal: &[f64], lift: Arc<Vec<f64>>) -> Self {
        let fluctuation = nodal.iter().zip(lift.iter()).map(|(a, b)| a - b).collect();
        Self { fluctuation, lift }
    }

    /// Nodal values of `θ = θ_h + θ̂`.
    pub fn nodal(&self) -> Vec<f64> {
        self.fluctuation
            .iter()
            .zip(self.lift.iter())
            .map(|(a, b)| a + b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SolverMeta {
    pub iterations: usize,
    pub residual: f64,
    /// Step size actually used (after any halving).
    pub dt: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub time: f64,
    pub velocity: VelocityState,
    pub temperature: TemperatureState,
    pub meta: SolverMeta,
}

/// Accepted states of a run, starting with the projected initial data.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<StepState>,
    pub config: StepConfig,
    /// Set when the run was aborted; the snapshots are then partial.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn total_iterations(&self) -> usize {
        self.snapshots.iter().map(|s| s.meta.iterations).sum()
    }
}

/// A fixed-point problem driven by [`picard_solve`].
pub trait FixedPoint {
    type State;
    /// Relative residual at `s` and, when it exceeds `tol`, the next iterate.
    fn evaluate(&self, s: &Self::State, tol: f64) -> Result<(f64, Option<Self::State>)>;
}

#[derive(Debug, Clone)]
pub struct PicardOutcome<S> {
    pub state: S,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates `sys` from `guess` until the residual is at most `tol`.
///
/// Fails after `max_iter` updates, or early when the residual grows over
/// three consecutive iterations.
pub fn picard_solve<P: FixedPoint>(
    sys: &P,
    guess: P::State,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome<P::State>> {
    let mut state = guess;
    let mut prev = f64::INFINITY;
    let mut growth = 0;
    for it in 0..=max_iter {
        let (res, next) = sys.evaluate(&state, tol)?;
        if !res.is_finite() {
            return Err(Error::Picard {
                iterations: it,
                residual: res,
                reason: "non-finite residual".into(),
            });
        }
        let Some(next) = next else {
            return Ok(PicardOutcome {
                state,
                iterations: it,
                residual: res,
            });
        };
        if res > prev {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Picard {
                    iterations: it,
                    residual: res,
                    reason: "residual grew over three consecutive iterations".into(),
                });
            }
        } else {
            growth = 0;
        }
        prev = res;
        if it == max_iter {
            return Err(Error::Picard {
                iterations: it,
                residual: res,
                reason: "iteration cap reached".into(),
            });
        }
        state = next;
    }
    unreachable!()
}

/// Relative residual `‖A x − b‖ / ‖|A||x| + |b|‖` (zero when both vanish).
pub(crate) fn relative_residual(a: &CscMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let abs = a.abs_mul_vec(x);
    let mut r2 = 0.0;
    let mut s2 = 0.0;
    for i in 0..b.len() {
        r2 += (ax[i] - b[i]).powi(2);
        s2 += (abs[i] + b[i].abs()).powi(2);
    }
    if s2 == 0.0 {
        0.0
    } else {
        (r2 / s2).sqrt()
    }
}

/// Forms, closures, data and the temperature lift of one simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub forms: Arc<AssembledForms>,
    pub models: Models,
    pub data: ProblemData,
    pub lift: Arc<SteadyLift>,
}

impl Simulation {
    /// Solves the lift for the boundary data of `data`.
    pub fn new(forms: Arc<AssembledForms>, models: Models, data: ProblemData) -> Result<Self> {
        let tb = data.theta_b.clone();
        let boundary = BoundaryData::new(Arc::new(move |x, y| tb(0.0, x, y)))?;
        let lift = solve_lift(&forms, &models.kappa, &boundary)?;
        Ok(Self {
            forms,
            models,
            data,
            lift: Arc::new(lift),
        })
    }

    /// Minimum of `θ₀` over vertices and quadrature points.
    pub fn theta0_min(&self) -> f64 {
        let mesh = self.forms.mesh();
        let f = &self.data.theta0;
        let mut m = mesh
            .vertices()
            .iter()
            .map(|p| f(0.0, p[0], p[1]))
            .fold(f64::INFINITY, f64::min);
        for c in 0..mesh.n_cells() {
            for (l, _) in self.forms.rule().iter() {
                let p = mesh.map_point(c, *l);
                m = m.min(f(0.0, p[0], p[1]));
            }
        }
        m
    }

    /// Temperature floor `μ = min(inf θ₀, min θ̂)`.
    pub fn mu(&self) -> Result<f64> {
        compute_mu(self.theta0_min(), self.lift.min)
    }

    /// Projected initial data; `cap` truncates `θ₀` from above.
    pub fn initial_state(&self, cap: f64, lumped: bool) -> Result<StepState> {
        let u0 = self.data.u0.clone();
        let (coeffs, pressure) = project_initial_velocity(&self.forms, &|x, y| u0(0.0, x, y))?;
        let t0 = self.data.theta0.clone();
        let fluctuation = project_initial_temperature(
            &self.forms,
            &|x, y| t0(0.0, x, y),
            cap,
            &self.lift.values,
            lumped,
        )?;
        Ok(StepState {
            time: 0.0,
            velocity: VelocityState { coeffs, pressure },
            temperature: TemperatureState {
                fluctuation,
                lift: self.lift_values(),
            },
            meta: SolverMeta::default(),
        })
    }

    pub fn lift_values(&self) -> Arc<Vec<f64>> {
        Arc::new(self.lift.values.clone())
    }

    /// `⟨f(t), φ_j⟩` for all velocity dofs (zeros without a force).
    pub fn force_vector(&self, t: f64) -> Vec<f64> {
        match &self.data.force {
            Some(f) => self.forms.load_vector(&|x, y| f(t, x, y)),
            None => vec![0.0; self.forms.n_velocity()],
        }
    }

    /// `∫ g(t) ψ_i` for all vertices (zeros without a heat source).
    pub fn heat_vector(&self, t: f64) -> Vec<f64> {
        match &self.data.heat_source {
            Some(g) => self.forms.scalar_load(&|x, y| g(t, x, y)),
            None => vec![0.0; self.forms.mesh().n_vertices()],
        }
    }

    /// Saddle matrix `mass_scale·M + a_S(θ; ·, ·) + b(a; ·, ·)` with frozen coefficients.
    pub fn momentum_matrix(
        &self,
        mass_scale: f64,
        theta: &[f64],
        u_visc: &[f64],
        advect: Option<&[f64]>,
    ) -> CscMatrix {
        let mut m = self.forms.saddle_template();
        if mass_scale != 0.0 {
            self.forms.add_velocity_mass(&mut m, mass_scale);
        }
        self.forms
            .add_viscous(&mut m, &self.models.stress, theta, u_visc);
        if let Some(a) = advect {
            if a.iter().any(|&v| v != 0.0) {
                self.forms.add_convection(&mut m, a);
            }
        }
        m
    }
}

/// Anderson mixing of fixed-point outputs `g_k` with residuals `f_k`.
///
/// The mixed iterate is an affine combination of past outputs, so linear
/// constraints they satisfy (here `B u = 0`) are preserved.
#[derive(Debug, Clone, Default)]
struct Anderson {
    depth: usize,
    f: VecDeque<Vec<f64>>,
    g: VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    fn mix(&mut self, g: Vec<f64>, f: Vec<f64>) -> Vec<f64> {
        if self.depth == 0 {
            return g;
        }
        self.f.push_back(f);
        self.g.push_back(g);
        if self.f.len() > self.depth + 1 {
            self.f.pop_front();
            self.g.pop_front();
        }
        let m = self.f.len() - 1;
        let last = self.g.back().unwrap().clone();
        if m == 0 {
            return last;
        }
        let fk = self.f.back().unwrap();
        let n = fk.len();
        let df = Mat::<f64>::from_fn(n, m, |i, j| self.f[j + 1][i] - self.f[j][i]);
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| fk[i]);
        let gamma = df.col_piv_qr().solve_lstsq(&rhs);
        if (0..m).any(|j| !gamma[(j, 0)].is_finite()) {
            return last;
        }
        let mut out = last;
        for j in 0..m {
            let c = gamma[(j, 0)];
            for (o, (a, b)) in out.iter_mut().zip(self.g[j + 1].iter().zip(&self.g[j])) {
                *o -= c * (a - b);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    x: Vec<f64>,
    theta: Vec<f64>,
    anderson: Anderson,
}

struct StepSystem<'a> {
    sim: &'a Simulation,
    cfg: &'a StepConfig,
    dt: f64,
    u_old: &'a [f64],
    theta_old: &'a [f64],
    momentum_rhs: Vec<f64>,
    /// `M θⁿ / dt` plus the external heat source, indexed by vertex.
    temperature_rhs: Vec<f64>,
}

impl StepSystem<'_> {
    fn nu(&self) -> usize {
        self.sim.forms.n_velocity()
    }

    fn momentum(&self, it: &Iterate) -> CscMatrix {
        let u = &it.x[..self.nu()];
        let theta_visc = match self.cfg.coupling {
            Coupling::FullyCoupled => &it.theta[..],
            Coupling::LaggedTemperature => self.theta_old,
        };
        let advect = match self.cfg.convection_treatment {
            Treatment::Implicit => u,
            Treatment::Lagged => self.u_old,
        };
        self.sim
            .momentum_matrix(1.0 / self.dt, theta_visc, u, Some(advect))
    }

    fn temperature(&self, theta_k: &[f64], u: &[f64]) -> (TemperatureSystem, Vec<f64>) {
        let sim = self.sim;
        let sys = TemperatureSystem::new(
            &sim.forms,
            &sim.models.kappa,
            theta_k,
            Some(u),
            1.0 / self.dt,
            self.cfg.mass_lumping,
            &sim.lift.values,
        );
        let heat = match self.cfg.dissipation_treatment {
            Treatment::Implicit => sim.forms.dissipation_load(&sim.models.stress, theta_k, u),
            Treatment::Lagged => {
                sim.forms
                    .dissipation_load(&sim.models.stress, self.theta_old, self.u_old)
            }
        };
        let rhs = self
            .temperature_rhs
            .iter()
            .zip(&heat)
            .map(|(a, b)| a + b)
            .collect();
        (sys, rhs)
    }
}

impl FixedPoint for StepSystem<'_> {
    type State = Iterate;

    fn evaluate(&self, it: &Iterate, tol: f64) -> Result<(f64, Option<Iterate>)> {
        let nu = self.nu();
        let a = self.momentum(it);
        let rm = relative_residual(&a, &it.x, &self.momentum_rhs);
        let (tsys, trhs) = self.temperature(&it.theta, &it.x[..nu]);
        let (r, s) = tsys.residual(&it.theta, &trhs);
        let rt = if s == 0.0 { 0.0 } else { r / s };
        let res = rm.max(rt);
        if res <= tol {
            return Ok((res, None));
        }
        // an exactly satisfied momentum system needs no new solve
        let x = if rm == 0.0 {
            it.x.clone()
        } else {
            a.factorize()?.solve(&self.momentum_rhs)?
        };
        let mut anderson = it.anderson.clone();
        let f: Vec<f64> = x[..nu]
            .iter()
            .zip(&it.x[..nu])
            .map(|(a, b)| a - b)
            .collect();
        let x = anderson.mix(x, f);
        let theta = if x[..nu] == it.x[..nu] {
            tsys.solve(&trhs)?
        } else {
            let (tsys, trhs) = self.temperature(&it.theta, &x[..nu]);
            tsys.solve(&trhs)?
        };
        Ok((res, Some(Iterate { x, theta, anderson })))
    }
}

/// One backward-Euler step of size `dt`.
pub fn step(sim: &Simulation, state: &StepState, dt: f64, cfg: &StepConfig) -> Result<StepState> {
    let forms = &sim.forms;
    let nu = forms.n_velocity();
    let np = forms.n_pressure();
    let t1 = state.time + dt;
    let u_old = &state.velocity.coeffs;
    let theta_old = state.temperature.nodal();

    let mass_u = forms.velocity_mass().mul_vec(u_old);
    let mut momentum_rhs: Vec<f64> = sim
        .force_vector(t1)
        .iter()
        .zip(&mass_u)
        .map(|(f, m)| f + m / dt)
        .collect();
    momentum_rhs.resize(forms.n_saddle(), 0.0);

    let mut masked = theta_old.clone();
    forms.scalar_space().mask_boundary(&mut masked);
    let mass_t = forms.apply_temperature_mass(&masked, cfg.mass_lumping);
    let temperature_rhs = sim
        .heat_vector(t1)
        .iter()
        .zip(&mass_t)
        .map(|(g, m)| g + m / dt)
        .collect();

    let sys = StepSystem {
        sim,
        cfg,
        dt,
        u_old,
        theta_old: &theta_old,
        momentum_rhs,
        temperature_rhs,
    };
    let mut x = u_old.clone();
    x.extend_from_slice(&state.velocity.pressure);
    x.push(0.0);
    let guess = Iterate {
        x,
        theta: theta_old.clone(),
        anderson: Anderson::new(cfg.anderson_depth),
    };
    let out = picard_solve(&sys, guess, cfg.picard_tol, cfg.picard_max)?;
    let Iterate { x, theta, .. } = out.state;
    Ok(StepState {
        time: t1,
        velocity: VelocityState {
            coeffs: x[..nu].to_vec(),
            pressure: x[nu..nu + np].to_vec(),
        },
        temperature: TemperatureState::from_nodal(&theta, state.temperature.lift.clone()),
        meta: SolverMeta {
            iterations: out.iterations,
            residual: out.residual,
            dt,
            halvings: 0,
        },
    })
}

/// Steps from `initial` to `cfg.t_end`, recording every accepted state.
///
/// A failed step is retried with half the step size, at most
/// `cfg.max_halvings` times; after that the run stops and the partial
/// trajectory carries the error.
pub fn run(sim: &Simulation, initial: StepState, cfg: &StepConfig) -> Trajectory {
    let mut snapshots = vec![initial];
    let t_end = cfg.t_end;
    let eps = 1e-10 * cfg.dt;
    let mut failure = None;
    'outer: loop {
        let cur = snapshots.last().unwrap();
        let remaining = t_end - cur.time;
        if remaining <= eps {
            break;
        }
        let mut dt = if remaining < cfg.dt + eps {
            remaining
        } else {
            cfg.dt
        };
        let mut halvings = 0;
        loop {
            match step(sim, cur, dt, cfg) {
                Ok(mut next) => {
                    if t_end - next.time <= eps {
                        next.time = t_end;
                    }
                    next.meta.halvings = halvings;
                    snapshots.push(next);
                    break;
                }
                Err(e) => {
                    let fatal = matches!(e, Error::Assembly(_));
                    if fatal || halvings >= cfg.max_halvings {
                        failure = Some(e);
                        break 'outer;
                    }
                    halvings += 1;
                    dt *= 0.5;
                }
            }
        }
    }
    Trajectory {
        snapshots,
        config: cfg.clone(),
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_mesh, norm2};
    use crate::model::{ConductivityModel, StressModel};

    fn sim(n: usize, stress: StressModel, data: ProblemData) -> Simulation {
        let forms = AssembledForms::new(build_mesh(n).unwrap(), stress.p(), None).unwrap();
        let models = Models::new(stress, ConductivityModel::constant(1.0));
        Simulation::new(Arc::new(forms), models, data).unwrap()
    }

    fn vortex(x: f64, y: f64) -> [f64; 2] {
        use std::f64::consts::PI;
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let s = sim(4, StressModel::newtonian(1.0), ProblemData::at_rest(2.0));
        let cfg = StepConfig::default();
        let s0 = s.initial_state(f64::INFINITY, true).unwrap();
        let s1 = step(&s, &s0, 0.1, &cfg).unwrap();
        assert_eq!(s1.meta.iterations, 0);
        assert_eq!(s1.velocity, s0.velocity);
        assert_eq!(s1.temperature.nodal(), s0.temperature.nodal());
        assert!((s1.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn newtonian_energy_strictly_decays() {
        let data = ProblemData::at_rest(1.0).with_u0(vortex);
        let s = sim(6, StressModel::newtonian(0.1), data);
        let s0 = s.initial_state(f64::INFINITY, true).unwrap();
        let cfg = StepConfig::default();
        let mut cur = s0;
        for _ in 0..3 {
            let next = step(&s, &cur, 0.05, &cfg).unwrap();
            let e0 = s.forms.velocity_l2_sq(&cur.velocity.coeffs);
            let e1 = s.forms.velocity_l2_sq(&next.velocity.coeffs);
            assert!(e1 < e0);
            let bu = s.forms.divergence().mul_vec(&next.velocity.coeffs);
            assert!(norm2(&bu) <= 1e-10 * norm2(&next.velocity.coeffs));
            cur = next;
        }
    }

    #[test]
    fn linear_problem_converges_in_two_iterations() {
        let data = ProblemData::at_rest(1.0)
            .with_u0(vortex)
            .with_force(|_, x, _| [x, 0.0]);
        let s = sim(5, StressModel::newtonian(1.0), data);
        let cfg = StepConfig {
            convection_treatment: Treatment::Lagged,
            dissipation_treatment: Treatment::Lagged,
            ..StepConfig::default()
        };
        let s0 = s.initial_state(f64::INFINITY, true).unwrap();
        let s1 = step(&s, &s0, 0.01, &cfg).unwrap();
        assert!(s1.meta.iterations <= 2, "{:?}", s1.meta);
    }

    #[test]
    fn zero_data_run_is_constant() {
        let s = sim(3, StressModel::newtonian(1.0), ProblemData::at_rest(1.5));
        let cfg = StepConfig {
            dt: 0.1,
            t_end: 0.5,
            ..StepConfig::default()
        };
        let s0 = s.initial_state(f64::INFINITY, true).unwrap();
        let traj = run(&s, s0.clone(), &cfg);
        assert!(traj.is_complete());
        assert_eq!(traj.snapshots.len(), 6);
        for w in traj.snapshots.windows(2) {
            assert!(w[1].time > w[0].time);
        }
        for snap in &traj.snapshots {
            assert_eq!(snap.velocity, s0.velocity);
            assert_eq!(snap.temperature.nodal(), s0.temperature.nodal());
        }
        assert_eq!(traj.snapshots.last().unwrap().time, 0.5);
    }

    #[test]
    fn picard_tolerance_self_consistency() {
        let data = ProblemData::at_rest(1.0)
            .with_u0(vortex)
            .with_force(|_, _, y| [5.0 * (2.0 * std::f64::consts::PI * y).sin(), 0.0]);
        let s = sim(
            6,
            StressModel::bounded_power_law(3.0, 0.5, 50.0, 0.5).unwrap(),
            data,
        );
        let s0 = s.initial_state(f64::INFINITY, true).unwrap();
        let loose = StepConfig::default();
        let tight = StepConfig {
            picard_tol: 1e-12,
            ..StepConfig::default()
        };
        let a = step(&s, &s0, 0.02, &loose).unwrap();
        let b = step(&s, &s0, 0.02, &tight).unwrap();
        let d: Vec<f64> = a
            .velocity
            .coeffs
            .iter()
            .zip(&b.velocity.coeffs)
            .map(|(x, y)| x - y)
            .collect();
        assert!(s.forms.velocity_l2_sq(&d).sqrt() < 1e-8);
        assert!(a.meta.iterations <= 25);
    }

    #[test]
    fn validate_collects_all_violations() {
        let cfg = StepConfig {
            dt: -1.0,
            picard_tol: 2.0,
            ..StepConfig::default()
        };
        let Err(Error::Parameter(msg)) = cfg.validate() else {
            panic!()
        };
        assert!(msg.contains("dt > 0") && msg.contains("picard_tol"));
    }

    struct Diverging;
    impl FixedPoint for Diverging {
        type State = f64;
        fn evaluate(&self, s: &f64, _tol: f64) -> Result<(f64, Option<f64>)> {
            Ok((*s, Some(2.0 * s)))
        }
    }

    #[test]
    fn picard_detects_growth() {
        let e = picard_solve(&Diverging, 1.0, 1e-9, 50).unwrap_err();
        assert!(matches!(e, Error::Picard { iterations: 3, .. }), "{e}");
    }
}
