//! Plain-text artifacts: time series, field dumps and the report document.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nsf_core::diagnostics::energy_budget;
use nsf_core::stepper::{Simulation, StepState, Trajectory};

use crate::error::CliError;

pub const TIMESERIES_COLUMNS: &[&str] = &[
    "time",
    "dt",
    "picard_iterations",
    "picard_residual",
    "halvings",
    "kinetic_energy",
    "dissipation",
    "work",
    "energy_residual",
    "u_l2",
    "theta_min",
    "theta_max",
    "theta_l1",
];

/// One row per snapshot, times strictly increasing.
pub fn timeseries_csv(sim: &Simulation, traj: &Trajectory, hash: &str) -> String {
    let budget = energy_budget(sim, traj);
    let lumped = sim.forms.temperature_mass_lumped();
    let mut out = format!("# config_hash={hash}\n{}\n", TIMESERIES_COLUMNS.join(","));
    for (s, e) in traj.snapshots.iter().zip(&budget.rows) {
        let theta = s.temperature.nodal();
        let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
        let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l1: f64 = theta.iter().zip(lumped).map(|(t, m)| t.abs() * m).sum();
        let cells = [
            s.time,
            s.meta.dt,
            s.meta.iterations as f64,
            s.meta.residual,
            s.meta.halvings as f64,
            e.kinetic,
            e.dissipation,
            e.work,
            e.residual,
            e.kinetic.sqrt(),
            min,
            max,
            l1,
        ];
        let row: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(k, v)| match k {
                2 | 4 => format!("{}", *v as usize),
                _ => format!("{v:.12e}"),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Nodal fields at the mesh vertices: velocity, pressure, temperature.
fn vertex_fields(sim: &Simulation, state: &StepState) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
    let vel = sim.forms.velocity_space();
    let nv = sim.forms.mesh().n_vertices();
    let u = (0..nv)
        .map(|v| match vel.free_index(v) {
            Some(f) => [
                state.velocity.coeffs[2 * f],
                state.velocity.coeffs[2 * f + 1],
            ],
            None => [0.0, 0.0],
        })
        .collect();
    (
        u,
        state.velocity.pressure.clone(),
        state.temperature.nodal(),
    )
}

/// Legacy VTK structured-points dump; vertex `j(n+1)+i` is grid point `(i, j)`.
pub fn vtk(sim: &Simulation, state: &StepState, hash: &str) -> String {
    let mesh = sim.forms.mesh();
    let n = mesh.n();
    let (u, p, theta) = vertex_fields(sim, state);
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "nsf t={:.12e} config_hash={hash}", state.time);
    let _ = writeln!(s, "ASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", n + 1, n + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0\nSPACING {h:.12e} {h:.12e} 1", h = mesh.h());
    let _ = writeln!(s, "POINT_DATA {}", theta.len());
    for (name, values) in [("temperature", &theta), ("pressure", &p)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{v:.12e}");
        }
    }
    let _ = writeln!(s, "VECTORS velocity double");
    for [a, b] in u {
        let _ = writeln!(s, "{a:.12e} {b:.12e} 0");
    }
    s
}

pub fn nodal_csv(sim: &Simulation, state: &StepState, hash: &str) -> String {
    let (u, p, theta) = vertex_fields(sim, state);
    let mut s = format!(
        "# config_hash={hash}\n# time={:.12e}\nx,y,u,v,pressure,temperature\n",
        state.time
    );
    for (k, xy) in sim.forms.mesh().vertices().iter().enumerate() {
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            xy[0], xy[1], u[k][0], u[k][1], p[k], theta[k]
        );
    }
    s
}

pub fn write(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Snapshot indices that get a field dump.
pub fn dump_indices(len: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}
