//! Data of an initial-boundary value problem.

use std::fmt;
use std::sync::Arc;

/// Scalar field `(t, x, y) ↦ value`.
pub type ScalarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Vector field `(t, x, y) ↦ [u, v]`.
pub type VectorField = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Initial data, boundary temperature, body force and an optional external
/// heat source (used by manufactured solutions; zero in physical runs).
#[derive(Clone)]
pub struct ProblemData {
    pub u0: VectorField,
    pub theta0: ScalarField,
    /// Boundary temperature; only its values on the boundary matter and it
    /// is evaluated at `t = 0`.
    pub theta_b: ScalarField,
    pub force: Option<VectorField>,
    pub heat_source: Option<ScalarField>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("force", &self.force.is_some())
            .field("heat_source", &self.heat_source.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Fluid at rest at the constant temperature `theta`.
    pub fn at_rest(theta: f64) -> Self {
        Self {
            u0: Arc::new(|_, _, _| [0.0, 0.0]),
            theta0: Arc::new(move |_, _, _| theta),
            theta_b: Arc::new(move |_, _, _| theta),
            force: None,
            heat_source: None,
        }
    }

    pub fn with_u0(mut self, u0: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.u0 = Arc::new(move |_, x, y| u0(x, y));
        self
    }

    pub fn with_theta0(mut self, t0: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.theta0 = Arc::new(move |_, x, y| t0(x, y));
        self
    }

    pub fn with_theta_b(mut self, tb: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.theta_b = Arc::new(move |_, x, y| tb(x, y));
        self
    }

    pub fn with_force(
        mut self,
        f: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.force = Some(Arc::new(f));
        self
    }

    pub fn with_heat_source(
        mut self,
        g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.heat_source = Some(Arc::new(g));
        self
    }
}
