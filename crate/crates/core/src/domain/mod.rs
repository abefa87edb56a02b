//! Mesh, finite-element spaces, quadrature and assembly.

mod forms;
mod mesh;
mod quadrature;
mod space;
mod sparse;

use std::sync::Arc;

pub use forms::{required_stress_degree, AssembledForms, TemperatureSystem, STANDARD_DEGREE};
pub use mesh::{Mesh, EDGE_VERTICES};
pub use quadrature::{gauss_legendre, TriangleRule};
pub use space::{p2_gradients, p2_values, ScalarSpace, VelocitySpace};
pub use sparse::{dot, norm2, CscMatrix, LuFactors, SparsePattern};

use crate::Result;

pub fn build_mesh(n: usize) -> Result<Arc<Mesh>> {
    Mesh::new(n).map(Arc::new)
}

/// L² projection of `u0` onto the weakly divergence-free velocity subspace.
///
/// Returns the velocity coefficients and the pressure multiplier.
pub fn project_initial_velocity(
    forms: &AssembledForms,
    u0: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = forms.n_velocity();
    let np = forms.n_pressure();
    let load = forms.load_vector(u0);
    if load.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; nu], vec![0.0; np]));
    }
    let mut mat = forms.saddle_template();
    forms.add_velocity_mass(&mut mat, 1.0);
    let mut rhs = load;
    rhs.resize(forms.n_saddle(), 0.0);
    let x = mat.factorize()?.solve(&rhs)?;
    Ok((x[..nu].to_vec(), x[nu..nu + np].to_vec()))
}

/// Projects `min(θ₀, cap) − θ̂` onto the P1 fields vanishing on the boundary.
///
/// `lift` holds the nodal values of θ̂. The result is a full nodal vector
/// (zero at boundary vertices). With `lumped` the projection uses the
/// lumped mass matrix, which keeps `θ̂ + result` within the range of the
/// capped data at every interior vertex.
pub fn project_initial_temperature(
    forms: &AssembledForms,
    theta0: &dyn Fn(f64, f64) -> f64,
    cap: f64,
    lift: &[f64],
    lumped: bool,
) -> Result<Vec<f64>> {
    let space = forms.scalar_space();
    let capped = |x: f64, y: f64| theta0(x, y).min(cap);
    let load = forms.scalar_load(&capped);
    let mut out = vec![0.0; space.n_nodes()];
    if lumped {
        let m = forms.temperature_mass_lumped();
        for &v in space.interior_nodes() {
            out[v] = load[v] / m[v] - lift[v];
        }
        return Ok(out);
    }
    let ml = forms.temperature_mass().mul_vec(lift);
    let rhs: Vec<f64> = space
        .interior_nodes()
        .iter()
        .map(|&v| load[v] - ml[v])
        .collect();
    let zero = vec![0.0; space.n_nodes()];
    let empty = CscMatrix::zeros(forms.stiffness().pattern().clone());
    let (mat, _) = forms.restrict_to_interior(&empty, 1.0, false, &zero);
    let d = mat.factorize()?.solve(&rhs)?;
    for (k, &v) in space.interior_nodes().iter().enumerate() {
        out[v] = d[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn curl_vortex(x: f64, y: f64) -> [f64; 2] {
        // u = (∂yψ, −∂xψ) with ψ = sin²(πx) sin²(πy)
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
    }

    fn l2_error(forms: &AssembledForms, u: &[f64], exact: impl Fn(f64, f64) -> [f64; 2]) -> f64 {
        let rule = TriangleRule::with_degree(8);
        let mesh = forms.mesh();
        let mut s = 0.0;
        for c in 0..mesh.n_cells() {
            for (l, w) in rule.iter() {
                let p = mesh.map_point(c, *l);
                let (v, _) = forms.velocity_space().eval(u, c, *l);
                let e = exact(p[0], p[1]);
                s += w * mesh.cell_area(c) * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
            }
        }
        s.sqrt()
    }

    #[test]
    fn zero_velocity_projects_to_zero() {
        let f = AssembledForms::new(build_mesh(4).unwrap(), 2.0, None).unwrap();
        let (u, p) = project_initial_velocity(&f, &|_, _| [0.0, 0.0]).unwrap();
        assert!(u.iter().chain(&p).all(|&v| v == 0.0));
    }

    #[test]
    fn velocity_projection_is_idempotent_and_divergence_free() {
        let f = AssembledForms::new(build_mesh(6).unwrap(), 2.0, None).unwrap();
        let (u, _) = project_initial_velocity(&f, &curl_vortex).unwrap();
        let bu = f.divergence().mul_vec(&u);
        assert!(norm2(&bu) < 1e-12 * norm2(&u));
        let vs = f.velocity_space().clone();
        let (u2, _) = project_initial_velocity(&f, &|x, y| vs.eval_at(&u, x, y)).unwrap();
        let diff: Vec<f64> = u.iter().zip(&u2).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) < 1e-12 * norm2(&u).max(1.0));
    }

    #[test]
    fn velocity_projection_converges_at_least_second_order() {
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let f = AssembledForms::new(build_mesh(n).unwrap(), 2.0, None).unwrap();
                let (u, _) = project_initial_velocity(&f, &curl_vortex).unwrap();
                l2_error(&f, &u, curl_vortex)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "errors {errs:?}");
        }
    }

    #[test]
    fn temperature_projection_cases() {
        let f = AssembledForms::new(build_mesh(8).unwrap(), 2.0, None).unwrap();
        let nv = f.mesh().n_vertices();
        let lift = vec![1.0; nv];
        let d = project_initial_temperature(&f, &|_, _| 1.0, f64::INFINITY, &lift, false).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-13));
        let d = project_initial_temperature(&f, &|_, _| 10.0, 4.0, &lift, true).unwrap();
        for (v, &b) in d.iter().zip(f.mesh().boundary_markers()) {
            assert!((v - if b { 0.0 } else { 3.0 }).abs() < 1e-13);
        }
    }

    #[test]
    fn temperature_projection_converges_to_interpolant() {
        let bump = |x: f64, y: f64| x * (1.0 - x) * y * (1.0 - y);
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let f = AssembledForms::new(build_mesh(n).unwrap(), 2.0, None).unwrap();
            let lift = vec![1.0; f.mesh().n_vertices()];
            let d = project_initial_temperature(
                &f,
                &|x, y| 1.0 + bump(x, y),
                f64::INFINITY,
                &lift,
                false,
            )
            .unwrap();
            let interp = f.scalar_space().interpolate(bump);
            let e: Vec<f64> = d.iter().zip(&interp).map(|(a, b)| a - b).collect();
            errs.push(f.temperature_mass().bilinear(&e, &e).sqrt());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "errors {errs:?}");
        }
    }
}
