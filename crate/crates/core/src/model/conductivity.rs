use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConductivityKind {
    /// `κ ≡ value`.
    Constant { value: f64 },
    /// `κ(θ) = clamp(a + b θ, κ̲, κ̄)`.
    AffineClamped { a: f64, b: f64 },
    /// Piecewise-linear `κ(θ)` through the given `(θ, κ)` points, held
    /// constant outside the table.
    UserTabulated { points: Vec<(f64, f64)> },
}

/// Heat conductivity `κ(θ)` with its envelope `κ̲ ≤ κ ≤ κ̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityModel {
    kind: ConductivityKind,
    kappa_low: f64,
    kappa_high: f64,
}

impl ConductivityModel {
    pub fn new(kind: ConductivityKind, kappa_low: f64, kappa_high: f64) -> Result<Self> {
        if !(kappa_low > 0.0) || !(kappa_high >= kappa_low) || !kappa_high.is_finite() {
            return Err(Error::Parameter(format!(
                "0 < kappa_low ≤ kappa_high < ∞ required, got [{kappa_low}, {kappa_high}]"
            )));
        }
        match &kind {
            ConductivityKind::Constant { value } => {
                if !(*value >= kappa_low && *value <= kappa_high) {
                    return Err(Error::Parameter(format!(
                        "constant conductivity {value} outside [{kappa_low}, {kappa_high}]"
                    )));
                }
            }
            ConductivityKind::AffineClamped { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Parameter(
                        "affine conductivity needs finite a, b".into(),
                    ));
                }
            }
            ConductivityKind::UserTabulated { points } => {
                if points.is_empty() {
                    return Err(Error::Parameter("conductivity table is empty".into()));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::Parameter(
                            "conductivity table must be strictly increasing in θ".into(),
                        ));
                    }
                }
                if let Some(&(t, k)) = points
                    .iter()
                    .find(|&&(_, k)| !(k >= kappa_low && k <= kappa_high))
                {
                    return Err(Error::Parameter(format!(
                        "tabulated conductivity κ({t}) = {k} outside [{kappa_low}, {kappa_high}]"
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            kappa_low,
            kappa_high,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(ConductivityKind::Constant { value }, value, value)
            .expect("positive conductivity")
    }

    pub fn affine_clamped(a: f64, b: f64, kappa_low: f64, kappa_high: f64) -> Result<Self> {
        Self::new(
            ConductivityKind::AffineClamped { a, b },
            kappa_low,
            kappa_high,
        )
    }

    pub fn kind(&self) -> &ConductivityKind {
        &self.kind
    }
    pub fn kappa_low(&self) -> f64 {
        self.kappa_low
    }
    pub fn kappa_high(&self) -> f64 {
        self.kappa_high
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ConductivityKind::Constant { .. }) || self.kappa_low == self.kappa_high
    }

    #[inline]
    pub fn kappa(&self, theta: f64) -> f64 {
        match &self.kind {
            ConductivityKind::Constant { value } => *value,
            ConductivityKind::AffineClamped { a, b } => {
                (a + b * theta).clamp(self.kappa_low, self.kappa_high)
            }
            ConductivityKind::UserTabulated { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if theta <= first.0 {
                    return first.1;
                }
                if theta >= last.0 {
                    return last.1;
                }
                let i = points
                    .iter()
                    .position(|&(t, _)| t > theta)
                    .unwrap_or(points.len() - 1);
                let (t0, k0) = points[i - 1];
                let (t1, k1) = points[i];
                k0 + (k1 - k0) * (theta - t0) / (t1 - t0)
            }
        }
    }

    /// Fourier flux `q = −κ(θ)∇θ`.
    pub fn heat_flux(&self, theta: f64, grad_theta: [f64; 2]) -> Result<[f64; 2]> {
        if !(theta > 0.0) {
            return Err(Error::Domain(format!(
                "heat flux requires theta > 0, got {theta}"
            )));
        }
        let k = self.kappa(theta);
        Ok([-k * grad_theta[0], -k * grad_theta[1]])
    }

    /// Copy with every conductivity value multiplied by `lambda > 0`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        let kind = match &self.kind {
            ConductivityKind::Constant { value } => ConductivityKind::Constant {
                value: lambda * value,
            },
            ConductivityKind::AffineClamped { a, b } => ConductivityKind::AffineClamped {
                a: lambda * a,
                b: lambda * b,
            },
            ConductivityKind::UserTabulated { points } => ConductivityKind::UserTabulated {
                points: points.iter().map(|&(t, k)| (t, lambda * k)).collect(),
            },
        };
        Self::new(kind, lambda * self.kappa_low, lambda * self.kappa_high)
    }

    pub fn id(&self) -> String {
        match &self.kind {
            ConductivityKind::Constant { value } => format!("constant({value})"),
            ConductivityKind::AffineClamped { a, b } => format!(
                "affine_clamped(a={a}, b={b}, [{}, {}])",
                self.kappa_low, self.kappa_high
            ),
            ConductivityKind::UserTabulated { points } => format!(
                "user_tabulated({} points, [{}, {}])",
                points.len(),
                self.kappa_low,
                self.kappa_high
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fourier_law_with_unit_conductivity() {
        let k = ConductivityModel::constant(1.0);
        assert_eq!(k.heat_flux(5.0, [2.0, 0.0]).unwrap(), [-2.0, 0.0]);
        assert_eq!(k.heat_flux(5.0, [0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn affine_clamped_hand_value() {
        let k = ConductivityModel::affine_clamped(1.0, 1.0, 1.0, 3.0).unwrap();
        // clamp(1 + 1, 1, 3) = 2
        assert_eq!(k.heat_flux(1.0, [0.0, 1.0]).unwrap(), [0.0, -2.0]);
        assert_eq!(k.kappa(10.0), 3.0);
        assert_eq!(k.kappa(1e-3), 1.001);
    }

    #[test]
    fn non_positive_theta_is_rejected() {
        let k = ConductivityModel::constant(1.0);
        assert!(matches!(
            k.heat_flux(0.0, [1.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tabulated_values_must_respect_envelope() {
        let bad = ConductivityModel::new(
            ConductivityKind::UserTabulated {
                points: vec![(0.0, 1.0), (1.0, 5.0)],
            },
            1.0,
            2.0,
        );
        assert!(bad.is_err());
        let ok = ConductivityModel::new(
            ConductivityKind::UserTabulated {
                points: vec![(1.0, 1.0), (2.0, 2.0)],
            },
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(ok.kappa(1.5), 1.5);
        assert_eq!(ok.kappa(0.1), 1.0);
        assert_eq!(ok.kappa(9.0), 2.0);
    }

    proptest! {
        #[test]
        fn flux_magnitude_inside_envelope(theta in 1e-3..1e3f64, gx in -10.0..10.0f64, gy in -10.0..10.0f64) {
            let k = ConductivityModel::affine_clamped(0.5, 0.25, 0.75, 2.0).unwrap();
            let q = k.heat_flux(theta, [gx, gy]).unwrap();
            let g = (gx * gx + gy * gy).sqrt();
            let qn = (q[0] * q[0] + q[1] * q[1]).sqrt();
            prop_assert!(qn >= 0.75 * g * (1.0 - 1e-14) && qn <= 2.0 * g * (1.0 + 1e-14));
            // antiparallel
            prop_assert!(q[0] * gx + q[1] * gy <= 0.0);
        }
    }
}
