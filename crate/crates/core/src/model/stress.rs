use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tensor::Sym2;
use crate::{Error, Result};

/// Temperature modulation of the viscosity, `θ ↦ c(θ) ∈ [ν̲/ν̄, 1]`.
#[derive(Clone, Default)]
pub struct ThetaCoupling(Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>);

impl ThetaCoupling {
    /// The temperature-independent coupling `c ≡ 1`.
    pub fn unit() -> Self {
        Self(None)
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Some(Arc::new(f)))
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        match &self.0 {
            None => 1.0,
            Some(f) => f(theta),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_none()
    }

    /// Multiplies the coupling by a positive constant.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = self.clone();
        Self::from_fn(move |t| lambda * inner.eval(t))
    }
}

impl fmt::Debug for ThetaCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => write!(f, "ThetaCoupling(1)"),
            Some(_) => write!(f, "ThetaCoupling(fn)"),
        }
    }
}

/// Piecewise-linear stress magnitude `|S| = s(|D|)` through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressTable {
    points: Vec<(f64, f64)>,
}

impl StressTable {
    /// Points `(|D|, |S|)` with strictly increasing `|D|`, non-decreasing
    /// `|S|`, and a first point at the origin.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter(
                "stress table needs at least two points".into(),
            ));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::Parameter(
                "stress table must start at (0, 0) so that S(θ, 0) = 0".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::Parameter(format!(
                    "stress table must be increasing in |D| and non-decreasing in |S|, got {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn magnitude(&self, r: f64) -> f64 {
        let pts = &self.points;
        let i = match pts.iter().position(|&(x, _)| x > r) {
            Some(0) => 1,
            Some(i) => i,
            None => pts.len() - 1,
        };
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (r - x0) / (x1 - x0)
    }

    /// `s(r) / r`, with the limit `s'(0)` at the origin.
    fn secant_viscosity(&self, r: f64) -> f64 {
        if r <= 0.0 {
            let (x1, y1) = self.points[1];
            return y1 / x1;
        }
        self.magnitude(r) / r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StressKind {
    Newtonian,
    BoundedPowerLaw,
    PurePowerLaw,
    UserTabulated { table: StressTable },
}

impl StressKind {
    pub fn name(&self) -> &'static str {
        match self {
            StressKind::Newtonian => "newtonian",
            StressKind::BoundedPowerLaw => "bounded_power_law",
            StressKind::PurePowerLaw => "pure_power_law",
            StressKind::UserTabulated { .. } => "user_tabulated",
        }
    }
}

/// Constitutive closure `S*(θ, D)` together with its declared constants.
#[derive(Debug, Clone)]
pub struct StressModel {
    kind: StressKind,
    p: f64,
    nu_low: f64,
    nu_high: f64,
    mu_low: f64,
    coupling: ThetaCoupling,
}

impl StressModel {
    pub fn new(
        kind: StressKind,
        p: f64,
        nu_low: f64,
        nu_high: f64,
        mu_low: f64,
        coupling: ThetaCoupling,
    ) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("p ≥ 2 required, got {p}")));
        }
        if matches!(kind, StressKind::Newtonian) && p != 2.0 {
            return Err(Error::Parameter(format!(
                "the newtonian model has p = 2, got {p}"
            )));
        }
        if !(nu_low > 0.0) || !(nu_high >= nu_low) || !nu_high.is_finite() {
            return Err(Error::Parameter(format!(
                "0 < nu_low ≤ nu_high < ∞ required, got nu_low = {nu_low}, nu_high = {nu_high}"
            )));
        }
        if !(mu_low >= 0.0) || !mu_low.is_finite() {
            return Err(Error::Parameter(format!(
                "mu_low ≥ 0 required, got {mu_low}"
            )));
        }
        if !coupling.is_unit() {
            let lo = nu_low / nu_high;
            for k in 0..=120 {
                let theta = 10f64.powf(-3.0 + 6.0 * k as f64 / 120.0);
                let c = coupling.eval(theta);
                if !(c >= lo * (1.0 - 1e-12) && c <= 1.0 + 1e-12) {
                    return Err(Error::Parameter(format!(
                        "theta coupling leaves the envelope [{lo}, 1]: c({theta:.3e}) = {c}"
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            p,
            nu_low,
            nu_high,
            mu_low,
            coupling,
        })
    }

    /// `S = ν D` with `ν̲ = ν̄ = μ̲ = ν`.
    pub fn newtonian(nu: f64) -> Self {
        Self::new(
            StressKind::Newtonian,
            2.0,
            nu,
            nu,
            nu,
            ThetaCoupling::unit(),
        )
        .expect("positive viscosity")
    }

    pub fn bounded_power_law(p: f64, nu_low: f64, nu_high: f64, mu_low: f64) -> Result<Self> {
        Self::new(
            StressKind::BoundedPowerLaw,
            p,
            nu_low,
            nu_high,
            mu_low,
            ThetaCoupling::unit(),
        )
    }

    pub fn pure_power_law(p: f64, nu_low: f64, nu_high: f64, mu_low: f64) -> Result<Self> {
        Self::new(
            StressKind::PurePowerLaw,
            p,
            nu_low,
            nu_high,
            mu_low,
            ThetaCoupling::unit(),
        )
    }

    pub fn with_coupling(self, coupling: ThetaCoupling) -> Result<Self> {
        Self::new(
            self.kind,
            self.p,
            self.nu_low,
            self.nu_high,
            self.mu_low,
            coupling,
        )
    }

    pub fn kind(&self) -> &StressKind {
        &self.kind
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn nu_low(&self) -> f64 {
        self.nu_low
    }
    pub fn nu_high(&self) -> f64 {
        self.nu_high
    }
    pub fn mu_low(&self) -> f64 {
        self.mu_low
    }
    pub fn coupling(&self) -> &ThetaCoupling {
        &self.coupling
    }

    /// Scalar `η` with `S*(θ, D) = η(θ, |D|) D`.
    #[inline]
    pub fn secant_viscosity(&self, theta: f64, d_norm: f64) -> f64 {
        let c = self.coupling.eval(theta);
        let g = match &self.kind {
            StressKind::Newtonian => self.nu_low,
            StressKind::BoundedPowerLaw => self.nu_low * (1.0 + d_norm).powf(self.p - 2.0),
            StressKind::PurePowerLaw => {
                if self.p == 2.0 {
                    self.nu_low
                } else {
                    self.nu_low * d_norm.powf(self.p - 2.0)
                }
            }
            StressKind::UserTabulated { table } => table.secant_viscosity(d_norm),
        };
        c * g
    }

    /// Unchecked evaluation for hot loops; `theta > 0` is assumed.
    #[inline]
    pub fn eval(&self, theta: f64, d: Sym2) -> Sym2 {
        d.scale(self.secant_viscosity(theta, d.norm()))
    }

    /// Dissipation density `S*(θ, D):D`.
    #[inline]
    pub fn dissipation(&self, theta: f64, d: Sym2) -> f64 {
        let n2 = d.norm_sq();
        self.secant_viscosity(theta, n2.sqrt()) * n2
    }

    /// Checked evaluation of `S*(θ, D)`.
    pub fn stress(&self, theta: f64, d: Sym2) -> Result<Sym2> {
        if !(theta > 0.0) {
            return Err(Error::Domain(format!(
                "stress requires theta > 0, got {theta}"
            )));
        }
        Ok(self.eval(theta, d))
    }

    /// Checked evaluation on a full 2×2 matrix, which must be symmetric.
    pub fn stress_matrix(&self, theta: f64, d: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
        let d = Sym2::from_matrix(d)?;
        Ok(self.stress(theta, d)?.to_matrix())
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        format!(
            "{}(p={}, nu_low={}, nu_high={}, mu_low={})",
            self.kind.name(),
            self.p,
            self.nu_low,
            self.nu_high,
            self.mu_low
        )
    }
}
