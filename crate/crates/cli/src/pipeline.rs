//! Runs a configured simulation and evaluates its enabled diagnostics.

use serde::Serialize;

use nsf_core::diagnostics::{
    alpha_estimate, decay_fit, energy_budget, entropy_residual, gradient_integrability,
    initial_attainment, internal_energy_residual, korn_sample_max, min_principle,
    momentum_residual, norm_suite, tail_mass, AlphaEstimate, Attainment, CheckResult, DecayFit,
    DiagnosticsReport, NormSuite, ReportMetadata, TailMass, TestFunctionSet, WeakResidual,
};
use nsf_core::model::{verify_assumptions, AssumptionReport};
use nsf_core::steady::steady_state;
use nsf_core::stepper::{run, Trajectory};
use nsf_core::Result as CoreResult;

use crate::config::{Prepared, SimConfig};
use crate::error::CliError;

/// Tolerance and iteration budget of the steady solver.
pub const STEADY_TOL: f64 = 1e-10;
pub const STEADY_MAX_ITER: usize = 200;

pub struct Outcome {
    pub prepared: Prepared,
    pub trajectory: Trajectory,
    /// Temperature floor `min(inf θ₀, min θ̂)`.
    pub mu: f64,
}

impl Outcome {
    pub fn completed(&self) -> bool {
        self.trajectory.is_complete()
    }
}

/// Builds the discretization, projects the initial data and steps to `t_end`.
pub fn simulate(cfg: &SimConfig) -> Result<Outcome, CliError> {
    let prepared = cfg.prepare()?;
    let mu = prepared.sim.mu()?;
    let initial = prepared
        .sim
        .initial_state(prepared.cap, prepared.step.mass_lumping)?;
    let trajectory = run(&prepared.sim, initial, &prepared.step);
    Ok(Outcome {
        prepared,
        trajectory,
        mu,
    })
}

/// Secondary results that do not fit a single check value.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Details {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norms: Option<NormSuite>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alpha_estimates: Vec<AlphaEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gradient_integrability: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_mass: Option<TailMass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_attainment: Option<Attainment>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub weak_residuals: Vec<(String, WeakResidual)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayFit>,
}

pub struct Evaluation {
    pub report: DiagnosticsReport,
    pub details: Details,
    pub warnings: Vec<String>,
}

pub fn metadata(cfg: &SimConfig, outcome: &Outcome) -> ReportMetadata {
    let models = &outcome.prepared.sim.models;
    ReportMetadata {
        mesh_n: cfg.mesh.n,
        dt: cfg.time.dt,
        t_end: cfg.time.t_end,
        stress_model: models.stress.id(),
        conductivity_model: models.kappa.id(),
    }
}

fn push(report: &mut DiagnosticsReport, check: CheckResult) {
    report
        .push(check)
        .expect("check names are unique by construction");
}

fn or_failed(name: &str, r: CoreResult<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| CheckResult::failed(name, e.to_string()))
}

/// Evaluates every enabled diagnostic over the (possibly partial) trajectory.
pub fn evaluate(cfg: &SimConfig, outcome: &Outcome, seed: u64) -> Evaluation {
    let sim = &outcome.prepared.sim;
    let traj = &outcome.trajectory;
    let d = &cfg.diagnostics;
    let mut report = DiagnosticsReport::new(metadata(cfg, outcome));
    let mut details = Details::default();
    let mut warnings = Vec::new();

    if let Some(e) = &traj.failure {
        let t = traj.snapshots.last().map_or(0.0, |s| s.time);
        push(
            &mut report,
            CheckResult::failed("run", format!("aborted at t = {t}: {e}")),
        );
    }
    for s in &traj.snapshots {
        if s.meta.halvings > 0 {
            warnings.push(format!(
                "step ending at t = {:.6e} needed {} halving(s)",
                s.time, s.meta.halvings
            ));
        }
    }
    if outcome.prepared.cap.is_finite() {
        let max0 = sim.data.theta0.as_ref();
        let verts = sim.forms.mesh().vertices();
        if verts
            .iter()
            .any(|p| max0(0.0, p[0], p[1]) > outcome.prepared.cap)
        {
            warnings.push(format!(
                "initial temperature capped at {}",
                outcome.prepared.cap
            ));
        }
    }

    if d.energy {
        let eb = energy_budget(sim, traj);
        push(
            &mut report,
            CheckResult::at_most("energy", eb.relative_residual, d.energy_tol)
                .with_value("identity_defect", eb.identity_defect)
                .with_value("relative_correction", eb.relative_correction)
                .with_value("scale", eb.scale),
        );
    }

    if d.min_principle {
        let tol = d.tol_min.unwrap_or(1e-8);
        let mp = min_principle(sim, traj, outcome.mu, tol);
        let mut c = CheckResult::at_least("min_principle", mp.min, mp.mu - mp.tol)
            .with_value("mu", mp.mu)
            .with_value("tol", mp.tol);
        if let Some(w) = mp.witness {
            c = c.with_note(format!(
                "theta = {:.6e} at t = {:.6e}, (x, y) = ({:.4}, {:.4})",
                w.theta, w.time, w.x, w.y
            ));
        }
        push(&mut report, c);
    }

    if d.weak_residuals {
        match TestFunctionSet::standard(cfg.time.t_end) {
            Ok(tests) => {
                type Residual = fn(
                    &nsf_core::stepper::Simulation,
                    &Trajectory,
                    &TestFunctionSet,
                ) -> CoreResult<WeakResidual>;
                let kinds: [(&str, Residual); 3] = [
                    ("weak.internal_energy", internal_energy_residual),
                    ("weak.entropy", entropy_residual),
                    ("weak.momentum", momentum_residual),
                ];
                for (name, f) in kinds {
                    let c = or_failed(
                        name,
                        f(sim, traj, &tests).map(|r| {
                            let c = match d.weak_tol {
                                Some(tol) => CheckResult::at_most(name, r.max_normalized, tol),
                                None => CheckResult::info(name, r.max_normalized),
                            };
                            details.weak_residuals.push((name.to_string(), r));
                            c
                        }),
                    );
                    push(&mut report, c);
                }
            }
            Err(e) => push(&mut report, CheckResult::failed("weak", e.to_string())),
        }
    }

    let ns = norm_suite(sim, traj, &d.r);
    let mut c = CheckResult::info("norms.sup_u_l2", ns.sup_u_l2)
        .with_value("u_w1p_integral", ns.u_w1p_integral)
        .with_value("u_l2p", ns.u_l2p)
        .with_value("sup_theta_l1", ns.sup_theta_l1);
    for (r, v) in &ns.theta_lr {
        c = c.with_value(format!("theta_l{r}"), *v);
    }
    push(&mut report, c);
    details.norms = Some(ns);

    for &alpha in &d.alpha {
        let name = format!("alpha_estimate[{alpha}]");
        let c = or_failed(
            &name,
            alpha_estimate(sim, traj, alpha).map(|a| {
                details.alpha_estimates.push(a);
                CheckResult::info(&name, a.weighted_gradient).with_value("sup_l1_gap", a.sup_l1_gap)
            }),
        );
        push(&mut report, c);
    }
    for &t in &d.t_exp {
        let name = format!("gradient_integrability[{t}]");
        let c = or_failed(
            &name,
            gradient_integrability(sim, traj, t).map(|v| {
                details.gradient_integrability.push((t, v));
                CheckResult::info(&name, v)
            }),
        );
        push(&mut report, c);
    }

    if let Some(m) = d.m {
        let c = or_failed(
            "tail_mass",
            tail_mass(sim, traj, m).map(|tm| {
                details.tail_mass = Some(tm);
                CheckResult::info("tail_mass", tm.sup_tail)
                    .with_value("m", tm.m)
                    .with_value("dominating", tm.dominating)
            }),
        );
        push(&mut report, c);
    }

    if d.initial_attainment > 0 {
        let at = initial_attainment(sim, traj, d.initial_attainment);
        let first = at.rows.first().map_or(f64::NAN, |r| r.1);
        let mut c = CheckResult::info("initial_attainment", first);
        if let Some(l) = at.fitted_limit {
            c = c.with_value("fitted_limit", l);
        }
        push(&mut report, c);
        details.initial_attainment = Some(at);
    }

    for (k, &q) in d.korn_q.iter().enumerate() {
        let name = format!("korn[{q}]");
        let samples = d.korn_samples;
        let c = or_failed(
            &name,
            korn_sample_max(&sim.forms, q, samples, seed.wrapping_add(k as u64))
                .map(|v| CheckResult::info(&name, v).with_value("samples", samples as f64)),
        );
        push(&mut report, c);
    }

    if d.decay {
        let assumptions = verify_assumptions(&sim.models.stress, d.samples, seed, outcome.mu);
        let c = or_failed(
            "decay",
            steady_state(sim, STEADY_TOL, STEADY_MAX_ITER)
                .and_then(|target| decay_fit(sim, traj, &target, &assumptions))
                .map(|fit| {
                    let mut c = if fit.certified {
                        CheckResult::info("decay", fit.rate.unwrap_or(f64::NAN))
                    } else {
                        CheckResult::failed(
                            "decay",
                            fit.reason.clone().unwrap_or_else(|| "not certified".into()),
                        )
                    };
                    if let Some(r) = fit.velocity_rate {
                        c = c.with_value("velocity_rate", r);
                    }
                    if let Some(r) = fit.r_squared {
                        c = c.with_value("r_squared", r);
                    }
                    details.decay = Some(fit);
                    c
                }),
        );
        push(&mut report, c);
        details.assumptions = Some(assumptions);
    }

    Evaluation {
        report,
        details,
        warnings,
    }
}
