//! Static plane-strain total-Lagrangian finite elements with follower
//! pressure loading.
//!
//! Lengths are in mm, stresses in kPa and forces in N per metre of depth
//! (kPa * mm). Degrees of freedom are ordered `[u_y, u_z]` per node.

mod element;
mod post;
mod solver;
pub mod verify;

use std::sync::{Arc, OnceLock};

use nalgebra::{DVector, Matrix2};
use nalgebra_sparse::factorization::{CscCholesky, CscSymbolicCholesky};
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::CscMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RegionTag;
use crate::material::{ConstitutiveLaw, HyperelasticModel, LinearElasticModel, RegionMaterial};
use crate::mesh::{BoundaryEdge, Mesh};

pub use element::{edge_shape, shape, shape_derivatives, QuadPoint, EDGE_RULE, TRI_RULE};
pub use post::{
    bending_angle, hotspot, max_volume_change, read_static_curve_csv, stress_field, von_mises,
    write_deformed_svg, write_stress_field_csv,
};
pub use solver::{
    newton_solve, ramp_solve, CurveRow, CurveSample, NewtonOptions, NewtonReport, RampOptions, StaticCurve,
};

/// Material for each region tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialAssignment {
    pub body: RegionMaterial,
    pub sealing: RegionMaterial,
    pub interior_wall: RegionMaterial,
    pub limiting: RegionMaterial,
}

impl MaterialAssignment {
    pub fn uniform(m: RegionMaterial) -> Self {
        MaterialAssignment {
            body: m.clone(),
            sealing: m.clone(),
            interior_wall: m.clone(),
            limiting: m,
        }
    }

    /// Elastomer everywhere except the strain-limiting layer.
    pub fn pneu_net(elastomer: HyperelasticModel, limiting: LinearElasticModel) -> Self {
        let h = RegionMaterial::Hyperelastic(elastomer);
        MaterialAssignment {
            body: h.clone(),
            sealing: h.clone(),
            interior_wall: h,
            limiting: RegionMaterial::LinearElastic(limiting),
        }
    }

    pub fn for_region(&self, tag: RegionTag) -> &RegionMaterial {
        match tag {
            RegionTag::Body => &self.body,
            RegionTag::Sealing => &self.sealing,
            RegionTag::Limiting => &self.limiting,
            RegionTag::InteriorWall(_) => &self.interior_wall,
        }
    }

    /// Scales every hyperelastic region by `factor`; linear regions are kept.
    pub fn with_elastomer_scale(&self, factor: f64) -> Self {
        let s = |m: &RegionMaterial| match m {
            RegionMaterial::Hyperelastic(h) => RegionMaterial::Hyperelastic(h.scaled(factor)),
            other => other.clone(),
        };
        MaterialAssignment {
            body: s(&self.body),
            sealing: s(&self.sealing),
            interior_wall: s(&self.interior_wall),
            limiting: s(&self.limiting),
        }
    }
}

/// Displacements and load level of one solution.
#[derive(Debug, Clone)]
pub struct FemState {
    pub mesh: Arc<Mesh>,
    /// `2 * node_count` displacement components.
    pub displacement: Vec<f64>,
    /// Load level: cavity pressure in kPa (also scales any nodal loads).
    pub pressure: f64,
    pub converged: bool,
    pub residual_norm: f64,
}

impl FemState {
    pub fn zero(mesh: Arc<Mesh>) -> Self {
        let n = 2 * mesh.node_count();
        FemState {
            mesh,
            displacement: vec![0.0; n],
            pressure: 0.0,
            converged: true,
            residual_norm: 0.0,
        }
    }

    /// Deformed coordinates of node `n`.
    pub fn position(&self, n: usize) -> [f64; 2] {
        let x = self.mesh.nodes[n];
        [x[0] + self.displacement[2 * n], x[1] + self.displacement[2 * n + 1]]
    }
}

/// Residual and optional tangent over the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Internal minus external force.
    pub residual: DVector<f64>,
    pub tangent: Option<CscMatrix<f64>>,
    pub external_norm: f64,
    /// Root-sum-square of the element internal force vectors.
    pub internal_scale: f64,
}

/// Element residual and optional dense tangent, both over the 12 element dofs.
type ElementLocal = ([f64; 12], Option<Box<[f64; 144]>>);

/// Mesh, materials, constraints and loads of a static problem.
pub struct FemModel {
    mesh: Arc<Mesh>,
    materials: MaterialAssignment,
    pressure_edges: Vec<BoundaryEdge>,
    /// Nodal loads per unit load level.
    nodal_loads: Option<Vec<f64>>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
    quad: Vec<[QuadPoint; 6]>,
    pattern: SparsityPattern,
    /// CSC value slot of every local (row, col) pair, `u32::MAX` if constrained.
    slots: Vec<[u32; 144]>,
    /// Slots and unit-pressure values of the pressure load stiffness.
    load_stiffness: Vec<(u32, f64)>,
    symbolic: OnceLock<CscSymbolicCholesky>,
}

impl std::fmt::Debug for FemModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemModel")
            .field("nodes", &self.mesh.node_count())
            .field("elements", &self.mesh.element_count())
            .field("free_dofs", &self.n_free)
            .finish()
    }
}

impl FemModel {
    /// Generic model: `constraints` lists `(node, component)` pairs held at zero.
    pub fn new(
        mesh: Arc<Mesh>,
        materials: MaterialAssignment,
        constraints: &[(usize, usize)],
        pressure_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let ndof = 2 * mesh.node_count();
        let mut fixed = vec![false; ndof];
        for &(n, c) in constraints {
            if n >= mesh.node_count() || c > 1 {
                return Err(Error::Geometry(format!("invalid constraint ({n}, {c})")));
            }
            fixed[2 * n + c] = true;
        }
        let mut free_index = vec![None; ndof];
        let mut n_free = 0;
        for (d, f) in fixed.iter().enumerate() {
            if !f {
                free_index[d] = Some(n_free);
                n_free += 1;
            }
        }

        let mut quad = Vec::with_capacity(mesh.element_count());
        for (e, el) in mesh.elements.iter().enumerate() {
            let x = el.map(|n| mesh.nodes[n]);
            let mut qp = [QuadPoint { grad: [[0.0; 2]; 6], weight: 0.0 }; 6];
            for (q, (p, w)) in qp.iter_mut().zip(TRI_RULE) {
                let (grad, det) = element::physical_gradients(&x, p[0], p[1])
                    .ok_or(Error::ElementInversion { element: e, det: 0.0 })?;
                *q = QuadPoint { grad, weight: 0.5 * w * det };
            }
            quad.push(qp);
        }

        let (pattern, slots) = build_pattern(&mesh, &free_index, n_free)?;
        let load_stiffness = pressure_stiffness(&mesh, &pressure_edges, &slots);
        Ok(FemModel {
            mesh,
            materials,
            pressure_edges,
            nodal_loads: None,
            free_index,
            n_free,
            quad,
            pattern,
            slots,
            load_stiffness,
            symbolic: OnceLock::new(),
        })
    }

    /// Pneu-net problem: encastre at the fixed end and pressure on every cavity edge.
    pub fn clamped(mesh: Arc<Mesh>, materials: MaterialAssignment) -> Result<Self> {
        let sets = mesh.boundary_sets()?;
        let constraints: Vec<(usize, usize)> =
            sets.fixed_end.iter().flat_map(|&n| [(n, 0), (n, 1)]).collect();
        FemModel::new(mesh, materials, &constraints, sets.pressure_edges)
    }

    /// Adds dead nodal loads that scale with the load level.
    pub fn with_nodal_loads(mut self, loads: Vec<f64>) -> Result<Self> {
        if loads.len() != 2 * self.mesh.node_count() {
            return Err(Error::Geometry("nodal load vector has the wrong length".into()));
        }
        self.nodal_loads = Some(loads);
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn materials(&self) -> &MaterialAssignment {
        &self.materials
    }

    pub fn free_dof_count(&self) -> usize {
        self.n_free
    }

    pub fn material_of(&self, e: usize) -> &RegionMaterial {
        self.materials.for_region(self.mesh.regions[e])
    }

    pub fn quadrature(&self, e: usize) -> &[QuadPoint; 6] {
        &self.quad[e]
    }

    /// Consistent nodal forces of a uniform nominal traction on reference edges.
    pub fn edge_traction_loads(&self, edges: &[BoundaryEdge], traction: [f64; 2]) -> Vec<f64> {
        let mut f = vec![0.0; 2 * self.mesh.node_count()];
        for e in edges {
            let len = self.mesh.edge_length(e);
            for (n, share) in e.nodes.iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
                f[2 * n] += traction[0] * len * share;
                f[2 * n + 1] += traction[1] * len * share;
            }
        }
        f
    }

    /// Scatters free-dof values into a full displacement vector.
    pub fn expand(&self, free: &DVector<f64>) -> Vec<f64> {
        self.free_index
            .iter()
            .map(|i| i.map_or(0.0, |k| free[k]))
            .collect()
    }

    /// Deformation gradient of element `e` at a quadrature point's gradients.
    pub fn deformation_gradient(&self, e: usize, grad: &[[f64; 2]; 6], u: &[f64]) -> Matrix2<f64> {
        let el = &self.mesh.elements[e];
        let mut f = Matrix2::identity();
        for (n, g) in el.iter().zip(grad) {
            for a in 0..2 {
                let ua = u[2 * n + a];
                f[(a, 0)] += ua * g[0];
                f[(a, 1)] += ua * g[1];
            }
        }
        f
    }

    /// Element internal force and (optionally) stiffness in local dof order.
    fn element_response(
        &self,
        e: usize,
        u: &[f64],
        with_tangent: bool,
    ) -> Result<ElementLocal> {
        let mat = self.material_of(e);
        let hyper = match mat {
            RegionMaterial::Hyperelastic(m) => Some(m),
            RegionMaterial::LinearElastic(_) => None,
        };
        let mut fe = [0.0; 12];
        let mut ke = with_tangent.then(|| Box::new([0.0; 144]));
        // mean dilatation: reference area, current area and its derivatives
        let mut area0 = 0.0;
        let mut area = 0.0;
        let mut dv = [0.0; 12];
        for q in &self.quad[e] {
            let f = self.deformation_gradient(e, &q.grad, u);
            let det = f.determinant();
            if !(det > 0.0) {
                return Err(Error::ElementInversion { element: e, det });
            }
            let c = f.transpose() * f;
            let resp = match hyper {
                Some(m) => m.isochoric_response(&c),
                None => mat.stress_response(&c),
            }
            .map_err(|_| Error::ElementInversion { element: e, det })?;
            if hyper.is_some() {
                area0 += q.weight;
                area += q.weight * det;
                for (i, g) in q.grad.iter().enumerate() {
                    dv[2 * i] += q.weight * (f[(1, 1)] * g[0] - f[(1, 0)] * g[1]);
                    dv[2 * i + 1] += q.weight * (f[(0, 0)] * g[1] - f[(0, 1)] * g[0]);
                }
            }
            let s = resp.pk2;
            let sv = [s[(0, 0)], s[(1, 1)], s[(0, 1)]];
            let d = resp.tangent.as_voigt();

            let mut b = [[[0.0; 2]; 3]; 6];
            for (bi, g) in b.iter_mut().zip(&q.grad) {
                for a in 0..2 {
                    bi[0][a] = f[(a, 0)] * g[0];
                    bi[1][a] = f[(a, 1)] * g[1];
                    bi[2][a] = f[(a, 0)] * g[1] + f[(a, 1)] * g[0];
                }
            }
            for i in 0..6 {
                for a in 0..2 {
                    fe[2 * i + a] +=
                        q.weight * (b[i][0][a] * sv[0] + b[i][1][a] * sv[1] + b[i][2][a] * sv[2]);
                }
            }
            let Some(ke) = ke.as_mut() else { continue };
            for i in 0..6 {
                // D B_i
                let mut db = [[0.0; 2]; 3];
                for r in 0..3 {
                    for a in 0..2 {
                        db[r][a] = d[r][0] * b[i][0][a] + d[r][1] * b[i][1][a] + d[r][2] * b[i][2][a];
                    }
                }
                let gi = q.grad[i];
                for k in 0..6 {
                    let gk = q.grad[k];
                    let geo = gi[0] * (s[(0, 0)] * gk[0] + s[(0, 1)] * gk[1])
                        + gi[1] * (s[(1, 0)] * gk[0] + s[(1, 1)] * gk[1]);
                    for a in 0..2 {
                        for bb in 0..2 {
                            let mat_k = b[k][0][bb] * db[0][a]
                                + b[k][1][bb] * db[1][a]
                                + b[k][2][bb] * db[2][a];
                            let geo_k = if a == bb { geo } else { 0.0 };
                            ke[(2 * i + a) * 12 + 2 * k + bb] += q.weight * (mat_k + geo_k);
                        }
                    }
                }
            }
        }
        if let Some(m) = hyper {
            let [_, up, upp] = m.volumetric(area / area0);
            for (r, d) in fe.iter_mut().zip(&dv) {
                *r += up * d;
            }
            if let Some(ke) = ke.as_mut() {
                for r in 0..12 {
                    for c in 0..12 {
                        ke[r * 12 + c] += upp / area0 * dv[r] * dv[c];
                    }
                }
                // second derivative of the current area
                for q in &self.quad[e] {
                    let wq = up * q.weight;
                    for i in 0..6 {
                        let gi = q.grad[i];
                        for k in 0..6 {
                            let gk = q.grad[k];
                            let h = wq * (gi[0] * gk[1] - gi[1] * gk[0]);
                            ke[(2 * i) * 12 + 2 * k + 1] += h;
                            ke[(2 * i + 1) * 12 + 2 * k] -= h;
                        }
                    }
                }
            }
        }
        Ok((fe, ke))
    }

    /// Reference area and mean dilatation `J = a / A` of element `e`.
    pub fn mean_dilatation(&self, e: usize, u: &[f64]) -> (f64, f64) {
        let (mut a0, mut a) = (0.0, 0.0);
        for q in &self.quad[e] {
            a0 += q.weight;
            a += q.weight * self.deformation_gradient(e, &q.grad, u).determinant();
        }
        (a0, a / a0)
    }

    /// External force at load level `p` in the configuration `u`.
    pub fn external_force(&self, u: &[f64], p: f64) -> Vec<f64> {
        let mut f = match &self.nodal_loads {
            Some(l) => l.iter().map(|v| p * v).collect(),
            None => vec![0.0; u.len()],
        };
        if p == 0.0 {
            return f;
        }
        for edge in &self.pressure_edges {
            let x = edge.nodes.map(|n| {
                let x0 = self.mesh.nodes[n];
                [x0[0] + u[2 * n], x0[1] + u[2 * n + 1]]
            });
            for (s, w) in EDGE_RULE {
                let (nv, dn) = edge_shape(s);
                let mut t = [0.0; 2];
                for (xk, dk) in x.iter().zip(dn) {
                    t[0] += xk[0] * dk;
                    t[1] += xk[1] * dk;
                }
                // inward (into the solid) normal times the line element
                let load = [-t[1] * p * w, t[0] * p * w];
                for (n, nk) in edge.nodes.iter().zip(nv) {
                    f[2 * n] += nk * load[0];
                    f[2 * n + 1] += nk * load[1];
                }
            }
        }
        f
    }

    /// Total potential energy at load level `p`: strain energy plus `p` times
    /// the signed area enclosed by the pressure edges, minus the work of any
    /// nodal loads. Its gradient is the assembled residual.
    pub fn potential_energy(&self, u: &[f64], p: f64) -> Result<f64> {
        let strain: f64 = (0..self.mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let mat = self.material_of(e);
                let mut w = 0.0;
                for q in &self.quad[e] {
                    let f = self.deformation_gradient(e, &q.grad, u);
                    let det = f.determinant();
                    if !(det > 0.0) {
                        return Err(Error::ElementInversion { element: e, det });
                    }
                    let c = f.transpose() * f;
                    w += q.weight
                        * match mat {
                            RegionMaterial::Hyperelastic(m) => m.isochoric_energy(&c)?,
                            RegionMaterial::LinearElastic(m) => m.energy_from_cauchy_green(&c)?,
                        };
                }
                if let RegionMaterial::Hyperelastic(m) = mat {
                    let (a0, j) = self.mean_dilatation(e, u);
                    w += a0 * m.volumetric(j)[0];
                }
                Ok(w)
            })
            .collect::<Result<Vec<f64>>>()?
            // fixed summation order keeps solves reproducible
            .iter()
            .sum();
        let mut area = 0.0;
        for edge in &self.pressure_edges {
            let x = edge.nodes.map(|n| {
                let x0 = self.mesh.nodes[n];
                [x0[0] + u[2 * n], x0[1] + u[2 * n + 1]]
            });
            for (s, w) in EDGE_RULE {
                let (nv, dn) = edge_shape(s);
                let (mut pt, mut t) = ([0.0; 2], [0.0; 2]);
                for k in 0..3 {
                    for a in 0..2 {
                        pt[a] += nv[k] * x[k][a];
                        t[a] += dn[k] * x[k][a];
                    }
                }
                area += 0.5 * w * (pt[0] * t[1] - pt[1] * t[0]);
            }
        }
        let dead: f64 = self
            .nodal_loads
            .as_ref()
            .map_or(0.0, |l| l.iter().zip(u).map(|(f, v)| f * v).sum());
        Ok(strain + p * area - p * dead)
    }

    /// Residual `f_int - f_ext` and optional tangent at displacement `u`.
    pub fn assemble(&self, u: &[f64], p: f64, with_tangent: bool) -> Result<Assembly> {
        self.assemble_split(u, p, with_tangent, p)
    }

    /// As [`FemModel::assemble`], with the pressure load stiffness taken at
    /// `p_tangent` instead of `p`.
    pub fn assemble_split(
        &self,
        u: &[f64],
        p: f64,
        with_tangent: bool,
        p_tangent: f64,
    ) -> Result<Assembly> {
        let locals: Vec<ElementLocal> = (0..self.mesh.element_count())
            .into_par_iter()
            .map(|e| self.element_response(e, u, with_tangent))
            .collect::<Result<_>>()?;

        let fext = self.external_force(u, p);
        let mut residual = DVector::zeros(self.n_free);
        let mut ext_sq = 0.0;
        for (d, idx) in self.free_index.iter().enumerate() {
            if let Some(k) = idx {
                residual[*k] = -fext[d];
                ext_sq += fext[d] * fext[d];
            }
        }
        let mut values = with_tangent.then(|| vec![0.0; self.pattern.nnz()]);
        let mut int_sq = 0.0;
        for (e, (fe, ke)) in locals.iter().enumerate() {
            int_sq += fe.iter().map(|v| v * v).sum::<f64>();
            let el = &self.mesh.elements[e];
            for (i, n) in el.iter().enumerate() {
                for a in 0..2 {
                    if let Some(k) = self.free_index[2 * n + a] {
                        residual[k] += fe[2 * i + a];
                    }
                }
            }
            if let (Some(vals), Some(ke)) = (values.as_mut(), ke) {
                for (slot, v) in self.slots[e].iter().zip(ke.iter()) {
                    if *slot != u32::MAX {
                        vals[*slot as usize] += v;
                    }
                }
            }
        }
        if let Some(vals) = values.as_mut() {
            for (slot, v) in &self.load_stiffness {
                vals[*slot as usize] += p_tangent * v;
            }
        }
        let tangent = values
            .map(|v| CscMatrix::try_from_pattern_and_values(self.pattern.clone(), v))
            .transpose()
            .map_err(|e| Error::LinearSolve(e.to_string()))?;
        Ok(Assembly {
            residual,
            tangent,
            external_norm: ext_sq.sqrt(),
            internal_scale: int_sq.sqrt(),
        })
    }

    /// Solves `K x = rhs` with a sparse Cholesky factorization.
    pub fn solve(&self, tangent: &CscMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.solve_shifted(tangent, rhs, 0.0)
    }

    /// Solves `(K + shift * diag(K)) x = rhs`.
    pub fn solve_shifted(
        &self,
        tangent: &CscMatrix<f64>,
        rhs: &DVector<f64>,
        shift: f64,
    ) -> Result<DVector<f64>> {
        let symbolic = self
            .symbolic
            .get_or_init(|| CscSymbolicCholesky::factor(self.pattern.clone()));
        let mut values = tangent.values().to_vec();
        if shift > 0.0 {
            let (offsets, indices) = (self.pattern.major_offsets(), self.pattern.minor_indices());
            for col in 0..self.n_free {
                for k in offsets[col]..offsets[col + 1] {
                    if indices[k] == col {
                        values[k] *= 1.0 + shift;
                    }
                }
            }
        }
        let chol = CscCholesky::factor_numerical(symbolic.clone(), &values)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let x = chol.solve(rhs);
        let x = DVector::from_column_slice(x.as_slice());
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::LinearSolve("non-finite solution".into()))
        }
    }
}

/// Derivative of the follower pressure load with respect to the displacements,
/// per unit pressure. For closed cavity loops the load is conservative and the
/// edge contributions can be symmetrized without changing their sum:
/// `dR_{y_i}/dz_j = (1/2) int (N_i N_j' - N_j N_i') ds` and its mirror.
fn pressure_stiffness(
    mesh: &Mesh,
    edges: &[BoundaryEdge],
    slots: &[[u32; 144]],
) -> Vec<(u32, f64)> {
    let mut a = [[0.0; 3]; 3];
    for (s, w) in EDGE_RULE {
        let (n, dn) = edge_shape(s);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += 0.5 * w * (n[i] * dn[j] - n[j] * dn[i]);
            }
        }
    }
    let mut out = Vec::new();
    for edge in edges {
        let local = crate::mesh::EDGE_NODES[edge.local_edge];
        debug_assert_eq!(local.map(|k| mesh.elements[edge.element][k]), edge.nodes);
        let sl = &slots[edge.element];
        for i in 0..3 {
            for j in 0..3 {
                let (li, lj) = (local[i], local[j]);
                // (y_i, z_j) and (z_i, y_j) entries
                for (r, c, v) in [(2 * li, 2 * lj + 1, a[i][j]), (2 * li + 1, 2 * lj, -a[i][j])] {
                    let slot = sl[r * 12 + c];
                    if slot != u32::MAX && v != 0.0 {
                        out.push((slot, v));
                    }
                }
            }
        }
    }
    out
}

fn build_pattern(
    mesh: &Mesh,
    free_index: &[Option<usize>],
    n_free: usize,
) -> Result<(SparsityPattern, Vec<[u32; 144]>)> {
    let dofs = |el: &[usize; 6]| -> [Option<usize>; 12] {
        std::array::from_fn(|k| free_index[2 * el[k / 2] + k % 2])
    };
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n_free];
    for el in &mesh.elements {
        let d = dofs(el);
        for c in d.iter().flatten() {
            cols[*c].extend(d.iter().flatten());
        }
    }
    let mut offsets = Vec::with_capacity(n_free + 1);
    let mut indices = Vec::new();
    offsets.push(0);
    for col in &mut cols {
        col.sort_unstable();
        col.dedup();
        indices.extend_from_slice(col);
        offsets.push(indices.len());
    }
    let slots = mesh
        .elements
        .iter()
        .map(|el| {
            let d = dofs(el);
            let mut s = [u32::MAX; 144];
            for r in 0..12 {
                for c in 0..12 {
                    if let (Some(row), Some(col)) = (d[r], d[c]) {
                        let range = &indices[offsets[col]..offsets[col + 1]];
                        let pos = range.binary_search(&row).expect("pattern covers element");
                        s[r * 12 + c] = (offsets[col] + pos) as u32;
                    }
                }
            }
            s
        })
        .collect();
    let pattern = SparsityPattern::try_from_offsets_and_indices(n_free, n_free, offsets, indices)
        .map_err(|e| Error::LinearSolve(e.to_string()))?;
    Ok((pattern, slots))
}
