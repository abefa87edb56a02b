//! Simulation configuration: TOML with dotted keys, defaults, validation
//! that collects every violation, and the content hash of the echo.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nsf_core::domain::{build_mesh, AssembledForms, TriangleRule, STANDARD_DEGREE};
use nsf_core::expr::{Expr, Var};
use nsf_core::model::{
    compute_mu, ConductivityModel, Models, StressKind, StressModel, ThetaCoupling, TruncationParams,
};
use nsf_core::problem::ProblemData;
use nsf_core::steady::BoundaryData;
use nsf_core::stepper::{Coupling, Simulation, StepConfig, Treatment};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Exact solution of a manufactured problem, used for error norms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub stress: StressConfig,
    pub kappa: KappaConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressKindName {
    Newtonian,
    BoundedPowerLaw,
    PurePowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressConfig {
    pub kind: StressKindName,
    #[serde(default = "two")]
    pub p: f64,
    pub nu_low: f64,
    /// Defaults to `nu_low` for the Newtonian model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_high: Option<f64>,
    /// Defaults to `nu_low`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_low: Option<f64>,
    /// Temperature factor `c(θ)` of the viscosity, an expression in `theta`.
    #[serde(default = "one_expr")]
    pub coupling: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaKindName {
    Constant,
    AffineClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    pub kind: KappaKindName,
    /// `κ` of the constant model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// `κ(θ) = clamp(a + bθ, bounds[0], bounds[1])`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "zero_pair")]
    pub u0: [String; 2],
    pub theta0: String,
    pub theta_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<[String; 2]>,
    /// External heat source; used by manufactured solutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub picard_tol: f64,
    pub picard_max: usize,
    pub coupling: Coupling,
    pub dissipation_treatment: Treatment,
    pub convection_treatment: Treatment,
    pub mass_lumping: bool,
    pub max_halvings: usize,
    pub anderson_depth: usize,
    /// Upper cap applied to `θ₀` before projection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_cap: Option<f64>,
    /// Quadrature degree of the stress terms; defaults to `⌈2p + 2⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress_quadrature_degree: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = StepConfig::default();
        Self {
            picard_tol: s.picard_tol,
            picard_max: s.picard_max,
            coupling: s.coupling,
            dissipation_treatment: s.dissipation_treatment,
            convection_treatment: s.convection_treatment,
            mass_lumping: s.mass_lumping,
            max_halvings: s.max_halvings,
            anderson_depth: s.anderson_depth,
            theta_cap: None,
            stress_quadrature_degree: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub energy: bool,
    /// Threshold on the relative energy residual.
    pub energy_tol: f64,
    pub min_principle: bool,
    /// Undershoot tolerance; defaults by mass variant (1e-8 lumped, 1e-3 consistent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_min: Option<f64>,
    pub weak_residuals: bool,
    /// Optional threshold on the normalized weak residuals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_tol: Option<f64>,
    pub alpha: Vec<f64>,
    pub t_exp: Vec<f64>,
    pub r: Vec<f64>,
    /// Truncation level of the tail diagnostics; must exceed `max θ_b`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Mollification width; defaults to `m/4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Number of early snapshots in the initial-attainment table.
    pub initial_attainment: usize,
    pub korn_q: Vec<f64>,
    /// Random discrete fields per Korn exponent.
    pub korn_samples: usize,
    pub decay: bool,
    /// Random samples for the constitutive checks.
    pub samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            energy: true,
            energy_tol: 1e-2,
            min_principle: true,
            tol_min: None,
            weak_residuals: true,
            weak_tol: None,
            alpha: vec![0.1, 0.3],
            t_exp: vec![1.2],
            r: vec![1.5, 1.9],
            m: None,
            delta: None,
            initial_attainment: 3,
            korn_q: vec![2.0],
            korn_samples: 100,
            decay: false,
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Vtk,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    /// Field dumps every `stride` snapshots (the last one is always written).
    pub stride: usize,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            stride: 10,
            formats: vec![Format::Csv, Format::Vtk, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub u: [String; 2],
    pub theta: String,
}

fn two() -> f64 {
    2.0
}

fn one_expr() -> String {
    "1".into()
}

fn zero_pair() -> [String; 2] {
    ["0".into(), "0".into()]
}

/// One failed invariant: the key, what is required, and the offending value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
    pub value: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (got {})", self.key, self.message, self.value)
    }
}

#[derive(Default)]
struct Violations(Vec<Violation>);

impl Violations {
    fn push(&mut self, key: &str, message: impl Into<String>, value: impl fmt::Display) {
        self.0.push(Violation {
            key: key.into(),
            message: message.into(),
            value: value.to_string(),
        });
    }

    fn check(&mut self, ok: bool, key: &str, message: &str, value: impl fmt::Display) {
        if !ok {
            self.push(key, message, value);
        }
    }
}

/// Parsed field expressions of a configuration.
#[derive(Debug, Clone)]
pub struct Fields {
    pub u0: [Expr; 2],
    pub theta0: Expr,
    pub theta_b: Expr,
    pub f: Option<[Expr; 2]>,
    pub g: Option<Expr>,
    pub coupling: Expr,
    pub exact: Option<([Expr; 2], Expr)>,
}

/// Everything needed to run: the simulation, stepping parameters and the
/// cap applied to the initial temperature.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub sim: Simulation,
    pub step: StepConfig,
    pub cap: f64,
    pub fields: Fields,
}

const TXY: &[Var] = &[Var::T, Var::X, Var::Y];

impl SimConfig {
    /// Reads, parses and validates a configuration file.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Parses and validates; defaults are made explicit.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut cfg: SimConfig =
            toml::from_str(text).map_err(|e| CliError::Syntax(e.message().to_string()))?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    fn fill_defaults(&mut self) {
        let s = &mut self.model.stress;
        if s.kind == StressKindName::Newtonian && s.nu_high.is_none() {
            s.nu_high = Some(s.nu_low);
        }
        if s.mu_low.is_none() {
            s.mu_low = Some(s.nu_low);
        }
        if self.diagnostics.tol_min.is_none() {
            self.diagnostics.tol_min = Some(nsf_core::diagnostics::default_tol_min(
                self.solver.mass_lumping,
            ));
        }
        if let (Some(m), None) = (self.diagnostics.m, self.diagnostics.delta) {
            self.diagnostics.delta = Some(0.25 * m);
        }
    }

    /// Canonical TOML echo; the input of [`Self::hash`].
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the echo, hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.echo().as_bytes()))
    }

    pub fn step_config(&self) -> StepConfig {
        let s = &self.solver;
        StepConfig {
            dt: self.time.dt,
            t_end: self.time.t_end,
            picard_tol: s.picard_tol,
            picard_max: s.picard_max,
            coupling: s.coupling,
            dissipation_treatment: s.dissipation_treatment,
            convection_treatment: s.convection_treatment,
            mass_lumping: s.mass_lumping,
            max_halvings: s.max_halvings,
            anderson_depth: s.anderson_depth,
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Violations::default();
        v.check(self.mesh.n >= 2, "mesh.n", "n ≥ 2 required", self.mesh.n);
        if let Err(e) = self.step_config().validate() {
            v.push("time/solver", e.to_string(), "see message");
        }
        v.check(
            self.output.stride >= 1,
            "output.stride",
            "stride ≥ 1 required",
            self.output.stride,
        );
        let stress = self.stress_model(&mut v);
        self.kappa_model(&mut v);
        let d = &self.diagnostics;
        for &a in &d.alpha {
            v.check(
                a > 0.0 && a < 0.5,
                "diagnostics.alpha",
                "α ∈ (0, 1/2) required",
                a,
            );
        }
        for &r in &d.r {
            v.check(
                (1.0..2.0).contains(&r),
                "diagnostics.r",
                "r ∈ [1, 2) required",
                r,
            );
        }
        for &t in &d.t_exp {
            v.check(
                (1.0..4.0 / 3.0).contains(&t),
                "diagnostics.t_exp",
                "t_exp ∈ [1, 4/3) required",
                t,
            );
        }
        for &q in &d.korn_q {
            v.check(
                q > 1.0 && q.is_finite(),
                "diagnostics.korn_q",
                "q ∈ (1, ∞) required",
                q,
            );
        }
        v.check(
            d.energy_tol > 0.0,
            "diagnostics.energy_tol",
            "positive threshold required",
            d.energy_tol,
        );
        let fields = self.parse_fields(&mut v);
        if let (Some(fields), Some(stress)) = (&fields, stress) {
            self.with_coupling(stress, &fields.coupling, &mut v);
        }
        if let Some(fields) = &fields {
            self.check_temperatures(fields, &mut v);
        }
        if v.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(v.0))
        }
    }

    fn stress_model(&self, v: &mut Violations) -> Option<StressModel> {
        let s = &self.model.stress;
        let kind = match s.kind {
            StressKindName::Newtonian => StressKind::Newtonian,
            StressKindName::BoundedPowerLaw => StressKind::BoundedPowerLaw,
            StressKindName::PurePowerLaw => StressKind::PurePowerLaw,
        };
        let Some(nu_high) = s.nu_high else {
            v.push(
                "model.stress.nu_high",
                "nu_high required for power-law models",
                "nothing",
            );
            return None;
        };
        let mu_low = s.mu_low.unwrap_or(s.nu_low);
        match StressModel::new(kind, s.p, s.nu_low, nu_high, mu_low, ThetaCoupling::unit()) {
            Ok(m) => Some(m),
            Err(e) => {
                let key = if s.p >= 2.0 {
                    "model.stress"
                } else {
                    "model.stress.p"
                };
                v.push(key, e.to_string(), s.p);
                None
            }
        }
    }

    fn with_coupling(
        &self,
        stress: StressModel,
        c: &Expr,
        v: &mut Violations,
    ) -> Option<StressModel> {
        if c.as_constant() == Some(1.0) {
            return Some(stress);
        }
        let c = c.clone();
        let coupling = ThetaCoupling::from_fn(move |theta| {
            c.eval(&nsf_core::expr::Bindings {
                theta,
                ..Default::default()
            })
        });
        match stress.with_coupling(coupling) {
            Ok(s) => Some(s),
            Err(e) => {
                v.push(
                    "model.stress.coupling",
                    e.to_string(),
                    &self.model.stress.coupling,
                );
                None
            }
        }
    }

    fn kappa_model(&self, v: &mut Violations) -> Option<ConductivityModel> {
        let k = &self.model.kappa;
        if let Some([lo, hi]) = k.bounds {
            v.check(
                lo > 0.0 && hi >= lo && hi.is_finite(),
                "model.kappa.bounds",
                "0 < κ_low ≤ κ_high < ∞ required",
                format!("[{lo}, {hi}]"),
            );
        }
        let built = match k.kind {
            KappaKindName::Constant => match k.value {
                Some(c) if c > 0.0 && c.is_finite() => {
                    let m = ConductivityModel::constant(c);
                    match k.bounds {
                        Some([lo, hi]) => ConductivityModel::new(m.kind().clone(), lo, hi),
                        None => Ok(m),
                    }
                }
                Some(c) => {
                    v.push("model.kappa.value", "κ > 0 required", c);
                    return None;
                }
                None => {
                    v.push(
                        "model.kappa.value",
                        "value required for constant κ",
                        "nothing",
                    );
                    return None;
                }
            },
            KappaKindName::AffineClamped => match (k.a, k.b, k.bounds) {
                (Some(a), Some(b), Some([lo, hi])) => {
                    ConductivityModel::affine_clamped(a, b, lo, hi)
                }
                _ => {
                    v.push(
                        "model.kappa",
                        "affine_clamped needs a, b and bounds",
                        format!("{k:?}"),
                    );
                    return None;
                }
            },
        };
        match built {
            Ok(m) => Some(m),
            Err(e) => {
                v.push("model.kappa", e.to_string(), format!("{k:?}"));
                None
            }
        }
    }

    fn parse_fields(&self, v: &mut Violations) -> Option<Fields> {
        let mut parse = |key: &str, src: &str, vars: &[Var]| match Expr::parse(src, vars) {
            Ok(e) => Some(e),
            Err(e) => {
                v.push(key, e.to_string(), format!("{src:?}"));
                None
            }
        };
        let d = &self.data;
        let u0 = [
            parse("data.u0[0]", &d.u0[0], TXY),
            parse("data.u0[1]", &d.u0[1], TXY),
        ];
        let theta0 = parse("data.theta0", &d.theta0, TXY);
        let theta_b = parse("data.theta_b", &d.theta_b, TXY);
        let f = d.f.as_ref().map(|f| {
            [
                parse("data.f[0]", &f[0], TXY),
                parse("data.f[1]", &f[1], TXY),
            ]
        });
        let g = d.g.as_ref().map(|g| parse("data.g", g, TXY));
        let coupling = parse(
            "model.stress.coupling",
            &self.model.stress.coupling,
            &[Var::Theta],
        );
        let exact = self.exact.as_ref().map(|e| {
            (
                [
                    parse("exact.u[0]", &e.u[0], TXY),
                    parse("exact.u[1]", &e.u[1], TXY),
                ],
                parse("exact.theta", &e.theta, TXY),
            )
        });
        let pair = |p: [Option<Expr>; 2]| match p {
            [Some(a), Some(b)] => Some([a, b]),
            _ => None,
        };
        let f = match f {
            None => None,
            Some(p) => Some(pair(p)?),
        };
        let g = match g {
            None => None,
            Some(g) => Some(g?),
        };
        let exact = match exact {
            None => None,
            Some((u, t)) => Some((pair(u)?, t?)),
        };
        Some(Fields {
            u0: pair(u0)?,
            theta0: theta0?,
            theta_b: theta_b?,
            f,
            g,
            coupling: coupling?,
            exact,
        })
    }

    /// `μ > 0` on the quadrature grid and `m > max θ_b`.
    fn check_temperatures(&self, fields: &Fields, v: &mut Violations) {
        let tb = fields.theta_b.clone();
        let (b_inf, b_sup) = match BoundaryData::new(Arc::new(move |x, y| tb.eval_txy(0.0, x, y))) {
            Ok(b) => b.bounds(),
            Err(e) => {
                v.push(
                    "data.theta_b",
                    format!("μ > 0 required: {e}"),
                    &self.data.theta_b,
                );
                return;
            }
        };
        if self.mesh.n >= 2 {
            let theta0_min = match build_mesh(self.mesh.n) {
                Ok(mesh) => {
                    let rule = TriangleRule::with_degree(STANDARD_DEGREE);
                    let mut m = f64::INFINITY;
                    for p in mesh.vertices() {
                        m = m.min(fields.theta0.eval_txy(0.0, p[0], p[1]));
                    }
                    for c in 0..mesh.n_cells() {
                        for (l, _) in rule.iter() {
                            let p = mesh.map_point(c, *l);
                            m = m.min(fields.theta0.eval_txy(0.0, p[0], p[1]));
                        }
                    }
                    m
                }
                Err(_) => f64::NAN,
            };
            if let Err(e) = compute_mu(theta0_min, b_inf) {
                v.push(
                    "data.theta0",
                    format!("μ > 0 required: {e}"),
                    theta0_min.min(b_inf),
                );
            }
        }
        if let Some(m) = self.diagnostics.m {
            v.check(
                m > b_sup,
                "diagnostics.m",
                &format!("m > max θ_b = {b_sup} required"),
                m,
            );
            let delta = self.diagnostics.delta.unwrap_or(0.25 * m);
            if let Err(e) = TruncationParams::new(m, delta) {
                v.push("diagnostics.delta", e.to_string(), delta);
            }
        }
        if let Some(cap) = self.solver.theta_cap {
            v.check(
                cap > b_sup,
                "solver.theta_cap",
                "cap above max θ_b required",
                cap,
            );
        }
    }

    /// Builds mesh, forms, closures and data; solves the lift.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let mut v = Violations::default();
        let fields = self.parse_fields(&mut v);
        let stress = self.stress_model(&mut v);
        let kappa = self.kappa_model(&mut v);
        let (Some(fields), Some(stress), Some(kappa)) = (fields, stress, kappa) else {
            return Err(CliError::Invalid(v.0));
        };
        let Some(stress) = self.with_coupling(stress, &fields.coupling, &mut v) else {
            return Err(CliError::Invalid(v.0));
        };
        let forms = AssembledForms::new(
            build_mesh(self.mesh.n)?,
            stress.p(),
            self.solver.stress_quadrature_degree,
        )?;
        let data = problem_data(&fields);
        let sim = Simulation::new(Arc::new(forms), Models::new(stress, kappa), data)?;
        Ok(Prepared {
            sim,
            step: self.step_config(),
            cap: self.solver.theta_cap.unwrap_or(f64::INFINITY),
            fields,
        })
    }
}

fn problem_data(f: &Fields) -> ProblemData {
    let [ux, uy] = f.u0.clone();
    let t0 = f.theta0.clone();
    let tb = f.theta_b.clone();
    let mut d = ProblemData::at_rest(1.0);
    d.u0 = Arc::new(move |t, x, y| [ux.eval_txy(t, x, y), uy.eval_txy(t, x, y)]);
    d.theta0 = Arc::new(move |t, x, y| t0.eval_txy(t, x, y));
    d.theta_b = Arc::new(move |t, x, y| tb.eval_txy(t, x, y));
    if let Some([fx, fy]) = f.f.clone() {
        d = d.with_force(move |t, x, y| [fx.eval_txy(t, x, y), fy.eval_txy(t, x, y)]);
    }
    if let Some(g) = f.g.clone() {
        d = d.with_heat_source(move |t, x, y| g.eval_txy(t, x, y));
    }
    d
}
