//! Closed-form reference solutions and synthetic states used to check the
//! solver and the post-processing.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::solver::{newton_solve, NewtonOptions};
use super::{FemModel, FemState, MaterialAssignment};
use crate::error::{Error, Result};
use crate::geometry::{Rect, RegionTag};
use crate::material::{ConstitutiveLaw, HyperelasticModel, RegionMaterial};
use crate::mesh::{mesh_domain, Mesh, RectDomain};

/// Homogeneous plane-strain state of a block pulled by a dead nominal
/// traction along y with traction-free z faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniaxialState {
    /// Stretch along the load.
    pub axial_stretch: f64,
    /// Stretch across the load, in plane.
    pub lateral_stretch: f64,
    /// Cauchy stress along the load, kPa.
    pub axial_stress: f64,
    /// Out-of-plane Cauchy stress, kPa.
    pub out_of_plane_stress: f64,
}

impl UniaxialState {
    /// von Mises stress of the state (lateral Cauchy stress is zero).
    pub fn von_mises(&self) -> f64 {
        let (a, c) = (self.axial_stress, self.out_of_plane_stress);
        (a * a - a * c + c * c).sqrt()
    }
}

/// Solves `P11 = traction, P22 = 0` for `F = diag(l1, l2)` with Newton on a
/// finite-difference Jacobian of the material's nominal stress.
pub fn uniaxial_plane_strain(model: &HyperelasticModel, traction: f64) -> Result<UniaxialState> {
    let nominal = |l: Vector2<f64>| -> Result<Vector2<f64>> {
        let c = Matrix2::new(l[0] * l[0], 0.0, 0.0, l[1] * l[1]);
        let r = model.stress_response(&c)?;
        Ok(Vector2::new(l[0] * r.pk2[(0, 0)], l[1] * r.pk2[(1, 1)]))
    };
    let target = Vector2::new(traction, 0.0);
    let mut l = Vector2::new(1.0, 1.0);
    let scale = model.bulk_modulus().max(traction.abs());
    for _ in 0..100 {
        let g = nominal(l)? - target;
        if g.norm() < 1e-13 * scale {
            let c = Matrix2::new(l[0] * l[0], 0.0, 0.0, l[1] * l[1]);
            let r = model.stress_response(&c)?;
            let j = l[0] * l[1];
            return Ok(UniaxialState {
                axial_stretch: l[0],
                lateral_stretch: l[1],
                axial_stress: l[0] * l[0] * r.pk2[(0, 0)] / j,
                out_of_plane_stress: r.pk2_out_of_plane / j,
            });
        }
        let h = 1e-7;
        let mut jac = Matrix2::zeros();
        for k in 0..2 {
            let mut lp = l;
            let mut lm = l;
            lp[k] += h;
            lm[k] -= h;
            let col = (nominal(lp)? - nominal(lm)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let step = jac
            .lu()
            .solve(&(-g))
            .ok_or_else(|| Error::Domain("singular uniaxial Jacobian".into()))?;
        // keep both stretches positive
        let mut alpha = 1.0;
        while (l + step * alpha).iter().any(|v| *v <= 0.0) {
            alpha *= 0.5;
        }
        l += step * alpha;
    }
    Err(Error::Domain(format!("uniaxial solution did not converge for traction {traction}")))
}

/// Outcome of a homogeneous traction patch test.
#[derive(Debug, Clone)]
pub struct PatchOutcome {
    pub analytic: UniaxialState,
    /// Mean axial and lateral stretches recovered from the FEM solution.
    pub fem_stretch: [f64; 2],
    /// Largest relative stretch error over all nodes.
    pub max_relative_error: f64,
    /// von Mises stress at every element centroid.
    pub von_mises: Vec<f64>,
    pub newton_iterations: usize,
}

/// Pulls a `length x height` block by a dead traction on its `y = length`
/// face. The `y = 0` face is held in y and its lowest node in z, so the block
/// is free to contract laterally.
pub fn traction_patch_test(
    model: &HyperelasticModel,
    traction: f64,
    length: f64,
    height: f64,
    target_h: f64,
) -> Result<PatchOutcome> {
    let domain = RectDomain::rectangle(Rect::new(0.0, length, 0.0, height), RegionTag::Body);
    let mesh = Arc::new(mesh_domain(&domain, target_h)?);
    let eps = 1e-9 * length;
    let left = mesh.nodes_where(|x| x[0].abs() < eps);
    let anchor = *left
        .iter()
        .min_by(|a, b| mesh.nodes[**a][1].total_cmp(&mesh.nodes[**b][1]))
        .ok_or_else(|| Error::Geometry("patch has no left face".into()))?;
    let mut constraints: Vec<(usize, usize)> = left.iter().map(|&n| (n, 0)).collect();
    constraints.push((anchor, 1));

    let materials = MaterialAssignment::uniform(RegionMaterial::Hyperelastic(model.clone()));
    let model_fe = FemModel::new(mesh.clone(), materials, &constraints, Vec::new())?;
    let right = mesh.outline_edges_where(|x| (x[0] - length).abs() < eps);
    let loads = model_fe.edge_traction_loads(&right, [1.0, 0.0]);
    let model_fe = model_fe.with_nodal_loads(loads)?;

    let analytic = uniaxial_plane_strain(model, traction)?;
    let opts = NewtonOptions {
        max_iterations: 60,
        ..NewtonOptions::default()
    };
    // march the load so every Newton solve starts close to its solution
    let steps = 4;
    let mut state = FemState::zero(mesh.clone());
    let mut iterations = 0;
    for k in 1..=steps {
        let (next, report) = newton_solve(&model_fe, &state, traction * k as f64 / steps as f64, &opts)?;
        iterations += report.iterations;
        state = next;
    }

    let (l1, l2) = (analytic.axial_stretch, analytic.lateral_stretch);
    let mut worst = 0.0f64;
    let mut sums = [0.0; 2];
    let mut count = [0usize; 2];
    for n in 0..mesh.node_count() {
        let x0 = mesh.nodes[n];
        let x = state.position(n);
        if x0[0] > eps {
            let s = x[0] / x0[0];
            worst = worst.max((s - l1).abs() / l1);
            sums[0] += s;
            count[0] += 1;
        }
        let ya = mesh.nodes[anchor][1];
        if (x0[1] - ya).abs() > eps {
            let s = (x[1] - ya) / (x0[1] - ya);
            worst = worst.max((s - l2).abs() / l2);
            sums[1] += s;
            count[1] += 1;
        }
    }
    let von_mises = super::post::stress_field(&model_fe, &state)?;
    Ok(PatchOutcome {
        analytic,
        fem_stretch: [sums[0] / count[0] as f64, sums[1] / count[1] as f64],
        max_relative_error: worst,
        von_mises,
        newton_iterations: iterations,
    })
}

/// State whose deformed mesh is the reference mesh rotated clockwise (toward
/// the base) by `angle_deg` about the origin.
pub fn rigid_rotation_state(mesh: Arc<Mesh>, angle_deg: f64) -> FemState {
    let (s, c) = angle_deg.to_radians().sin_cos();
    map_state(mesh, |[y, z]| [c * y + s * z, -s * y + c * z])
}

/// State whose deformed mesh wraps the line `z = z_neutral` onto a circular
/// arc of the same length spanning `angle_deg`, curling toward the base.
pub fn arc_map_state(mesh: Arc<Mesh>, angle_deg: f64, z_neutral: f64) -> FemState {
    let length = mesh.nodes.iter().fold(0.0f64, |m, x| m.max(x[0]));
    let phi = angle_deg.to_radians();
    let radius = length / phi;
    map_state(mesh, move |[y, z]| {
        let psi = y / radius;
        let r = radius + (z - z_neutral);
        [r * psi.sin(), z_neutral - radius + r * psi.cos()]
    })
}

fn map_state(mesh: Arc<Mesh>, f: impl Fn([f64; 2]) -> [f64; 2]) -> FemState {
    let mut state = FemState::zero(mesh);
    for n in 0..state.mesh.node_count() {
        let x0 = state.mesh.nodes[n];
        let x = f(x0);
        state.displacement[2 * n] = x[0] - x0[0];
        state.displacement[2 * n + 1] = x[1] - x0[1];
    }
    state
}
