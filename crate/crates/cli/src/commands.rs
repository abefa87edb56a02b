//! Subcommand implementations. Each returns the process exit code.

use std::path::Path;

use serde::Serialize;

use nsf_core::diagnostics::{
    cauchy_in_time, Bound, CheckResult, DiagnosticsReport, ReportMetadata, Verdict,
};
use nsf_core::domain::AssembledForms;
use nsf_core::expr::Expr;
use nsf_core::model::{verify_assumptions, Assumption, AssumptionReport, TruncationParams};
use nsf_core::steady::{steady_state, BoundaryData};
use nsf_core::stepper::{Simulation, StepState, TemperatureState, VelocityState};

use crate::config::{Format, SimConfig};
use crate::error::{exit, CliError};
use crate::output;
use crate::pipeline::{evaluate, simulate, Details, Outcome, STEADY_MAX_ITER, STEADY_TOL};

/// Options shared by the subcommands.
#[derive(Debug, Clone)]
pub struct Options {
    pub out: Option<std::path::PathBuf>,
    pub seed: u64,
    pub parallel: usize,
    pub strict: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            out: None,
            seed: 0,
            parallel: 1,
            strict: false,
        }
    }
}

impl Options {
    fn out_dir(&self, cfg: &SimConfig) -> std::path::PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| cfg.output.directory.clone().into())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub time: f64,
    pub error: String,
}

/// The structured report document written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// `complete`, `aborted` or `failed`.
    pub status: String,
    pub exit_code: i32,
    pub failure: Option<FailureRecord>,
    pub warnings: Vec<String>,
    pub report: DiagnosticsReport,
    pub details: Details,
}

fn exit_code(
    completed: bool,
    report: &DiagnosticsReport,
    warnings: &[String],
    strict: bool,
) -> i32 {
    if !completed {
        exit::ABORT
    } else if !report.all_pass() || (strict && !warnings.is_empty()) {
        exit::VERDICT_FAIL
    } else {
        exit::SUCCESS
    }
}

fn print_report(report: &DiagnosticsReport, warnings: &[String]) {
    for c in &report.checks {
        let verdict = match c.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        };
        let bound = match (c.threshold, c.bound) {
            (Some(t), Some(Bound::AtMost)) => format!(" (<= {t:.3e})"),
            (Some(t), Some(Bound::AtLeast)) => format!(" (>= {t:.3e})"),
            _ => String::new(),
        };
        let note = c
            .note
            .as_deref()
            .map(|n| format!("  [{n}]"))
            .unwrap_or_default();
        println!("{verdict:4}  {:<32} {:.6e}{bound}{note}", c.name, c.value);
    }
    for w in warnings {
        println!("WARN  {w}");
    }
}

fn write_fields(
    dir: &Path,
    cfg: &SimConfig,
    sim: &Simulation,
    states: &[(usize, &StepState)],
    hash: &str,
) -> Result<(), CliError> {
    for (k, s) in states {
        if cfg.output.formats.contains(&Format::Vtk) {
            output::write(
                dir,
                &format!("fields_{k:05}.vtk"),
                &output::vtk(sim, s, hash),
            )?;
        }
        if cfg.output.formats.contains(&Format::Csv) {
            output::write(
                dir,
                &format!("fields_{k:05}.csv"),
                &output::nodal_csv(sim, s, hash),
            )?;
        }
    }
    Ok(())
}

fn write_config(dir: &Path, cfg: &SimConfig, hash: &str) -> Result<(), CliError> {
    output::write(
        dir,
        "config.toml",
        &format!("# config_hash={hash}\n{}", cfg.echo()),
    )
}

fn write_document(dir: &Path, cfg: &SimConfig, doc: &ReportDocument) -> Result<(), CliError> {
    if cfg.output.formats.contains(&Format::Json) {
        let text =
            serde_json::to_string_pretty(doc).map_err(|e| CliError::Output(e.to_string()))?;
        output::write(dir, "report.json", &text)?;
    }
    Ok(())
}

fn document(
    command: &str,
    cfg: &SimConfig,
    outcome: &Outcome,
    opts: &Options,
    dumps: bool,
) -> Result<i32, CliError> {
    let hash = cfg.hash();
    let dir = opts.out_dir(cfg);
    let sim = &outcome.prepared.sim;
    let traj = &outcome.trajectory;
    let eval = evaluate(cfg, outcome, opts.seed);
    let code = exit_code(
        outcome.completed(),
        &eval.report,
        &eval.warnings,
        opts.strict,
    );
    write_config(&dir, cfg, &hash)?;
    if cfg.output.formats.contains(&Format::Csv) {
        output::write(
            &dir,
            "timeseries.csv",
            &output::timeseries_csv(sim, traj, &hash),
        )?;
    }
    if dumps {
        let states: Vec<(usize, &StepState)> =
            output::dump_indices(traj.snapshots.len(), cfg.output.stride)
                .into_iter()
                .map(|k| (k, &traj.snapshots[k]))
                .collect();
        write_fields(&dir, cfg, sim, &states, &hash)?;
    }
    let failure = traj.failure.as_ref().map(|e| FailureRecord {
        time: traj.snapshots.last().map_or(0.0, |s| s.time),
        error: e.to_string(),
    });
    let status = match code {
        exit::ABORT => "aborted",
        exit::SUCCESS => "complete",
        _ => "failed",
    };
    print_report(&eval.report, &eval.warnings);
    write_document(
        &dir,
        cfg,
        &ReportDocument {
            command: command.into(),
            config_hash: hash,
            seed: opts.seed,
            status: status.into(),
            exit_code: code,
            failure,
            warnings: eval.warnings,
            report: eval.report,
            details: eval.details,
        },
    )?;
    println!("{status}: bundle written to {}", dir.display());
    Ok(code)
}

/// Full run: time series, field dumps and the diagnostics report.
pub fn cmd_run(cfg: &SimConfig, opts: &Options) -> Result<i32, CliError> {
    let outcome = simulate(cfg)?;
    document("run", cfg, &outcome, opts, true)
}

/// Like `run` with every diagnostic enabled and without field dumps.
pub fn cmd_diagnose(cfg: &SimConfig, opts: &Options) -> Result<i32, CliError> {
    let mut cfg = cfg.clone();
    let d = &mut cfg.diagnostics;
    d.energy = true;
    d.min_principle = true;
    d.weak_residuals = true;
    if d.initial_attainment == 0 {
        d.initial_attainment = 3;
    }
    let outcome = simulate(&cfg)?;
    document("diagnose", &cfg, &outcome, opts, false)
}

/// Stationary state for the data at `t = 0`, with the fixed-point residual.
pub fn cmd_steady(cfg: &SimConfig, opts: &Options) -> Result<i32, CliError> {
    let hash = cfg.hash();
    let dir = opts.out_dir(cfg);
    let prepared = cfg.prepare()?;
    let sim = &prepared.sim;
    let mut report = DiagnosticsReport::new(ReportMetadata {
        mesh_n: cfg.mesh.n,
        dt: cfg.time.dt,
        t_end: cfg.time.t_end,
        stress_model: sim.models.stress.id(),
        conductivity_model: sim.models.kappa.id(),
    });
    let (code, failure) = match steady_state(sim, STEADY_TOL, STEADY_MAX_ITER) {
        Ok(st) => {
            let state = StepState {
                time: 0.0,
                velocity: VelocityState {
                    coeffs: st.velocity.clone(),
                    pressure: st.pressure.clone(),
                },
                temperature: TemperatureState::from_nodal(&st.theta, sim.lift_values()),
                meta: Default::default(),
            };
            write_fields(&dir, cfg, sim, &[(0, &state)], &hash)?;
            let check = CheckResult::at_most("steady.residual", st.residual, STEADY_TOL)
                .with_value("iterations", st.iterations as f64)
                .with_value("u_l2", sim.forms.velocity_l2_sq(&st.velocity).sqrt())
                .with_value("lift_max", sim.lift.k)
                .with_value("lift_min", sim.lift.min);
            report.push(check)?;
            (
                if report.all_pass() {
                    exit::SUCCESS
                } else {
                    exit::VERDICT_FAIL
                },
                None,
            )
        }
        Err(e) => (
            exit::ABORT,
            Some(FailureRecord {
                time: 0.0,
                error: e.to_string(),
            }),
        ),
    };
    write_config(&dir, cfg, &hash)?;
    print_report(&report, &[]);
    if let Some(f) = &failure {
        println!("aborted: {}", f.error);
    }
    write_document(
        &dir,
        cfg,
        &ReportDocument {
            command: "steady".into(),
            config_hash: hash,
            seed: opts.seed,
            status: if code == exit::SUCCESS {
                "complete"
            } else if code == exit::ABORT {
                "aborted"
            } else {
                "failed"
            }
            .into(),
            exit_code: code,
            failure,
            warnings: Vec::new(),
            report,
            details: Details::default(),
        },
    )?;
    Ok(code)
}

/// Assumption report for the configured stress model, sampled above the
/// temperature floor of the data.
pub fn verify_model(cfg: &SimConfig, seed: u64) -> Result<(AssumptionReport, bool), CliError> {
    let prepared = cfg.prepare()?;
    let theta_min = prepared.sim.mu()?;
    let report = verify_assumptions(
        &prepared.sim.models.stress,
        cfg.diagnostics.samples,
        seed,
        theta_min,
    );
    let mut ok = report.existence_assumptions_pass();
    if cfg.diagnostics.decay {
        ok &= report.passes(Assumption::Stability);
    }
    Ok((report, ok))
}

pub fn cmd_verify_model(cfg: &SimConfig, opts: &Options) -> Result<i32, CliError> {
    let (report, ok) = verify_model(cfg, opts.seed)?;
    println!(
        "model {}  samples {}  seed {}",
        report.model, report.samples, report.seed
    );
    for c in &report.checks {
        let required = c.assumption != Assumption::Stability || cfg.diagnostics.decay;
        let verdict = match (c.pass, required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!(
            "{verdict:4}  {:<60} worst margin {:+.3e}",
            c.assumption.label(),
            c.worst_margin
        );
        if !c.pass {
            let w = &c.witness;
            println!(
                "      witness: theta = {:.6e}, |D| = {:.6e}",
                w.theta, w.d_norm
            );
        }
    }
    if let Some(dir) = &opts.out {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
        output::write(dir, "assumptions.json", &text)?;
    }
    Ok(if ok {
        exit::SUCCESS
    } else {
        exit::VERDICT_FAIL
    })
}

/// Parses `n:dt,n:dt,...`.
pub fn parse_levels(s: &str) -> Result<Vec<(usize, f64)>, CliError> {
    let levels: Vec<(usize, f64)> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (n, dt) = t
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("level {t:?} is not of the form n:dt")))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad mesh size in level {t:?}")))?;
            let dt: f64 = dt
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad time step in level {t:?}")))?;
            if n < 2 || !(dt > 0.0) {
                return Err(CliError::Usage(format!(
                    "level {t:?} needs n ≥ 2 and dt > 0"
                )));
            }
            Ok((n, dt))
        })
        .collect::<Result<_, _>>()?;
    if levels.len() < 2 {
        return Err(CliError::Usage("at least two levels required".into()));
    }
    Ok(levels)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub n: usize,
    pub dt: f64,
    pub completed: bool,
    pub failure: Option<String>,
    pub final_time: f64,
    /// Largest L² errors against the exact solution over all snapshots.
    pub velocity_error: Option<f64>,
    pub temperature_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelPair {
    pub coarse: usize,
    pub fine: usize,
    pub velocity_order: Option<f64>,
    pub temperature_order: Option<f64>,
    pub cauchy_truncated: Option<f64>,
    pub cauchy_l1: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub monotone_refinement: bool,
    pub levels: Vec<LevelResult>,
    pub pairs: Vec<LevelPair>,
    pub warnings: Vec<String>,
}

fn l2_errors(forms: &AssembledForms, s: &StepState, u: &[Expr; 2], theta: &Expr) -> (f64, f64) {
    let mesh = forms.mesh();
    let vel = forms.velocity_space();
    let sc = forms.scalar_space();
    let nodal = s.temperature.nodal();
    let (mut eu, mut et) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let area = mesh.cell_area(c);
        for (l, w) in forms.rule().iter() {
            let p = mesh.map_point(c, *l);
            let (uh, _) = vel.eval(&s.velocity.coeffs, c, *l);
            let th = sc.eval(&nodal, c, *l);
            let ux = u[0].eval_txy(s.time, p[0], p[1]);
            let uy = u[1].eval_txy(s.time, p[0], p[1]);
            eu += w * area * ((uh[0] - ux).powi(2) + (uh[1] - uy).powi(2));
            et += w * area * (th - theta.eval_txy(s.time, p[0], p[1])).powi(2);
        }
    }
    (eu.sqrt(), et.sqrt())
}

fn order(coarse: Option<f64>, fine: Option<f64>, dt_ratio: f64) -> Option<f64> {
    match (coarse, fine) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 && dt_ratio != 1.0 => {
            Some((a / b).ln() / dt_ratio.ln())
        }
        _ => None,
    }
}

/// Truncation level of the cross-level comparison: the configured `m` or
/// twice the largest boundary temperature.
fn truncation(
    cfg: &SimConfig,
    fields: &crate::config::Fields,
) -> Result<TruncationParams, CliError> {
    let m = match cfg.diagnostics.m {
        Some(m) => m,
        None => {
            let tb = fields.theta_b.clone();
            let b = BoundaryData::new(std::sync::Arc::new(move |x, y| tb.eval_txy(0.0, x, y)))?;
            2.0 * b.bounds().1
        }
    };
    Ok(TruncationParams::new(
        m,
        cfg.diagnostics.delta.unwrap_or(0.25 * m),
    )?)
}

pub fn convergence(
    cfg: &SimConfig,
    levels: &[(usize, f64)],
    parallel: usize,
) -> Result<(ConvergenceReport, Vec<Option<Outcome>>), CliError> {
    let configs: Vec<SimConfig> = levels
        .iter()
        .map(|&(n, dt)| {
            let mut c = cfg.clone();
            c.mesh.n = n;
            c.time.dt = dt;
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    let run_all = || -> Vec<Result<Outcome, CliError>> {
        use rayon::prelude::*;
        configs.par_iter().map(simulate).collect()
    };
    let results = if parallel > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run_all)
    } else {
        configs.iter().map(simulate).collect()
    };
    let mut warnings = Vec::new();
    let monotone = levels.windows(2).all(|w| w[1].0 >= w[0].0);
    if !monotone {
        warnings.push("mesh sizes are not non-decreasing across levels".into());
    }
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for (&(n, dt), r) in levels.iter().zip(results) {
        match r {
            Ok(o) => {
                let last = o
                    .trajectory
                    .snapshots
                    .last()
                    .expect("initial state present");
                let errs = o
                    .prepared
                    .fields
                    .exact
                    .as_ref()
                    .filter(|_| o.completed())
                    .map(|(u, th)| {
                        o.trajectory
                            .snapshots
                            .iter()
                            .fold((0.0f64, 0.0f64), |acc, s| {
                                let e = l2_errors(&o.prepared.sim.forms, s, u, th);
                                (acc.0.max(e.0), acc.1.max(e.1))
                            })
                    });
                let failure = o.trajectory.failure.as_ref().map(|e| e.to_string());
                if let Some(f) = &failure {
                    warnings.push(format!("level n={n}, dt={dt} aborted: {f}"));
                }
                rows.push(LevelResult {
                    n,
                    dt,
                    completed: o.completed(),
                    failure,
                    final_time: last.time,
                    velocity_error: errs.map(|e| e.0),
                    temperature_error: errs.map(|e| e.1),
                });
                outcomes.push(Some(o));
            }
            Err(e) => {
                warnings.push(format!("level n={n}, dt={dt} aborted: {e}"));
                rows.push(LevelResult {
                    n,
                    dt,
                    completed: false,
                    failure: Some(e.to_string()),
                    final_time: 0.0,
                    velocity_error: None,
                    temperature_error: None,
                });
                outcomes.push(None);
            }
        }
    }
    let mut pairs = Vec::new();
    for k in 1..rows.len() {
        let (a, b) = (&rows[k - 1], &rows[k]);
        let ratio = a.dt / b.dt;
        let mut pair = LevelPair {
            coarse: k - 1,
            fine: k,
            velocity_order: order(a.velocity_error, b.velocity_error, ratio),
            temperature_order: order(a.temperature_error, b.temperature_error, ratio),
            cauchy_truncated: None,
            cauchy_l1: None,
            note: None,
        };
        match (&outcomes[k - 1], &outcomes[k]) {
            (Some(c), Some(f)) if c.completed() && f.completed() => {
                let cauchy = truncation(cfg, &c.prepared.fields).and_then(|p| {
                    Ok(cauchy_in_time(
                        &c.prepared.sim,
                        &c.trajectory,
                        &f.prepared.sim,
                        &f.trajectory,
                        p,
                    )?)
                });
                match cauchy {
                    Ok(r) => {
                        pair.cauchy_truncated = Some(r.truncated_sup);
                        pair.cauchy_l1 = Some(r.l1_sup);
                    }
                    Err(e) => pair.note = Some(e.to_string()),
                }
            }
            _ => pair.note = Some("level aborted".into()),
        }
        pairs.push(pair);
    }
    Ok((
        ConvergenceReport {
            config_hash: cfg.hash(),
            monotone_refinement: monotone,
            levels: rows,
            pairs,
            warnings,
        },
        outcomes,
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

pub fn cmd_convergence(
    cfg: &SimConfig,
    levels: &[(usize, f64)],
    opts: &Options,
) -> Result<i32, CliError> {
    let (report, _) = convergence(cfg, levels, opts.parallel)?;
    let dir = opts.out_dir(cfg);
    write_config(&dir, cfg, &report.config_hash)?;
    let mut csv = format!(
        "# config_hash={}\nn,dt,completed,final_time,velocity_error,temperature_error\n",
        report.config_hash
    );
    println!(
        "{:>5} {:>12} {:>9} {:>14} {:>14}",
        "n", "dt", "status", "u L2 error", "theta L2 error"
    );
    for l in &report.levels {
        csv.push_str(&format!(
            "{},{:.12e},{},{:.12e},{},{}\n",
            l.n,
            l.dt,
            l.completed,
            l.final_time,
            fmt_opt(l.velocity_error),
            fmt_opt(l.temperature_error)
        ));
        println!(
            "{:>5} {:>12.4e} {:>9} {:>14} {:>14}",
            l.n,
            l.dt,
            if l.completed { "ok" } else { "ABORTED" },
            fmt_opt(l.velocity_error),
            fmt_opt(l.temperature_error)
        );
    }
    for p in &report.pairs {
        println!(
            "levels {}->{}: order u {} theta {}  cauchy truncated {} L1 {}{}",
            p.coarse,
            p.fine,
            p.velocity_order.map_or("-".into(), |v| format!("{v:.3}")),
            p.temperature_order
                .map_or("-".into(), |v| format!("{v:.3}")),
            fmt_opt(p.cauchy_truncated),
            fmt_opt(p.cauchy_l1),
            p.note
                .as_deref()
                .map(|n| format!("  [{n}]"))
                .unwrap_or_default()
        );
    }
    for w in &report.warnings {
        println!("WARN  {w}");
    }
    if cfg.output.formats.contains(&Format::Csv) {
        output::write(&dir, "convergence.csv", &csv)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
        output::write(&dir, "convergence.json", &text)?;
    }
    let code = if report.levels.iter().any(|l| !l.completed) {
        exit::ABORT
    } else if opts.strict && !report.warnings.is_empty() {
        exit::VERDICT_FAIL
    } else {
        exit::SUCCESS
    };
    Ok(code)
}
