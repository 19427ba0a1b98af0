use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pneusim_core::fem::verify::{arc_map_state, rigid_rotation_state, traction_patch_test};
use pneusim_core::fem::*;
use pneusim_core::geometry::Rect;
use pneusim_core::material::{HyperelasticModel, LinearElasticModel, ModelKind, RegionMaterial};
use pneusim_core::mesh::{mesh_domain, RectDomain};
use pneusim_core::{generate_mesh, PneuNetGeometry, RegionTag};

fn default_model(scale: f64) -> FemModel {
    let mesh = Arc::new(generate_mesh(&PneuNetGeometry::default(), 2.5).unwrap());
    let mats = MaterialAssignment::pneu_net(
        HyperelasticModel::ecoflex50().scaled(scale),
        LinearElasticModel::new(6.5e6, 0.2).unwrap(),
    );
    FemModel::clamped(mesh, mats).unwrap()
}

fn yeoh1(c10: f64) -> HyperelasticModel {
    HyperelasticModel::with_penalty_ratio(ModelKind::Yeoh1, vec![c10], 2000.0).unwrap()
}

#[test]
fn zero_displacement_zero_pressure_has_zero_residual() {
    let model = default_model(1.0);
    let u = vec![0.0; 2 * model.mesh().node_count()];
    let a = model.assemble(&u, 0.0, false).unwrap();
    assert_eq!(a.residual.amax(), 0.0);
}

#[test]
fn zero_pressure_converges_immediately_to_zero_displacement() {
    let model = default_model(1.0);
    let start = FemState::zero(model.mesh().clone());
    let (state, report) = newton_solve(&model, &start, 0.0, &NewtonOptions::default()).unwrap();
    assert!(report.iterations <= 1);
    assert!(state.converged);
    assert!(state.displacement.iter().all(|v| v.abs() < 1e-12));
    let field = stress_field(&model, &state).unwrap();
    assert!(field.iter().all(|v| *v == 0.0));
}

#[test]
fn rigid_translation_produces_no_internal_force() {
    let domain = RectDomain::rectangle(Rect::new(0.0, 3.0, 0.0, 2.0), RegionTag::Body);
    let mesh = Arc::new(mesh_domain(&domain, 1.0).unwrap());
    for law in [
        RegionMaterial::Hyperelastic(HyperelasticModel::ecoflex50()),
        RegionMaterial::LinearElastic(LinearElasticModel::new(6.5e6, 0.2).unwrap()),
    ] {
        let model = FemModel::new(mesh.clone(), MaterialAssignment::uniform(law), &[], vec![]).unwrap();
        let u: Vec<f64> = (0..2 * mesh.node_count())
            .map(|d| if d % 2 == 0 { 0.7 } else { -1.3 })
            .collect();
        let a = model.assemble(&u, 0.0, true).unwrap();
        let k = a.tangent.unwrap();
        let scale = k.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(a.residual.amax() < 1e-9 * scale, "{}", a.residual.amax());
    }
}

#[test]
fn tangent_matches_finite_differences_with_pressure() {
    let domain = RectDomain::rectangle(Rect::new(0.0, 1.0, 0.0, 1.0), RegionTag::Body);
    let mesh = Arc::new(mesh_domain(&domain, 1.0).unwrap());
    assert_eq!(mesh.element_count(), 2);
    let loop_edges = mesh.outline_edges.clone();
    for law in [
        RegionMaterial::Hyperelastic(HyperelasticModel::ecoflex50()),
        RegionMaterial::LinearElastic(LinearElasticModel::new(1e3, 0.3).unwrap()),
    ] {
        let model =
            FemModel::new(mesh.clone(), MaterialAssignment::uniform(law), &[], loop_edges.clone()).unwrap();
        let n = 2 * mesh.node_count();
        let u: Vec<f64> = (0..n).map(|i| 0.08 * (1.7 * i as f64).sin()).collect();
        let p = 30.0;
        let k = DMatrix::from(model.assemble(&u, p, true).unwrap().tangent.as_ref().unwrap());
        let scale = k.amax();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for j in 0..n {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += h;
            um[j] -= h;
            let rp = model.assemble(&up, p, false).unwrap().residual;
            let rm = model.assemble(&um, p, false).unwrap().residual;
            for i in 0..n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                worst = worst.max((fd - k[(i, j)]).abs() / scale);
            }
        }
        assert!(worst < 1e-4, "relative tangent error {worst:e}");
    }
}

#[test]
fn residual_is_the_gradient_of_the_potential() {
    let model = default_model(0.5);
    let free = DVector::from_fn(model.free_dof_count(), |i, _| 0.01 * (0.37 * i as f64).cos());
    let u = model.expand(&free);
    let p = 12.0;
    let r = model.assemble(&u, p, false).unwrap().residual;
    let dir = DVector::from_fn(model.free_dof_count(), |i, _| (0.91 * i as f64).sin());
    let d = model.expand(&dir);
    let h = 1e-6;
    let shift = |s: f64| -> Vec<f64> { u.iter().zip(&d).map(|(a, b)| a + s * b).collect() };
    let fd = (model.potential_energy(&shift(h), p).unwrap() - model.potential_energy(&shift(-h), p).unwrap())
        / (2.0 * h);
    let exact = r.dot(&dir);
    assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "fd {fd} exact {exact}");
}

#[test]
fn small_pressure_matches_linearized_prediction() {
    let model = default_model(1.0);
    let p = 0.1;
    let start = FemState::zero(model.mesh().clone());
    let lin = model.assemble_split(&start.displacement, p, true, 0.0).unwrap();
    let du = model.solve(lin.tangent.as_ref().unwrap(), &(-&lin.residual)).unwrap();
    let predicted = model.expand(&du);
    let (state, _) = newton_solve(&model, &start, p, &NewtonOptions::default()).unwrap();
    let diff: f64 = state
        .displacement
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = state.displacement.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0);
    assert!(diff / norm < 0.01, "linear-regime mismatch {}", diff / norm);
}

#[test]
fn newton_tail_contracts_superlinearly() {
    let model = default_model(1.0);
    let start = FemState::zero(model.mesh().clone());
    let (state, report) = newton_solve(&model, &start, 5.0, &NewtonOptions::default()).unwrap();
    assert!(state.converged);
    let h = &report.residual_history;
    assert!(h.len() >= 4, "{h:?}");
    let n = h.len();
    let ratios = [h[n - 3] / h[n - 4], h[n - 2] / h[n - 3], h[n - 1] / h[n - 2]];
    assert!(ratios[2] < ratios[1] && ratios[1] < 1.0, "{h:?}");
    assert!(ratios[2] < 1e-2, "{h:?}");
}

#[test]
fn traction_patch_matches_homogeneous_solution() {
    let m = yeoh1(0.5);
    // compression stays well below the free-end buckling load of the block
    for (traction, h) in [(0.3, 1.0), (0.6, 0.5), (-0.1, 1.0)] {
        let out = traction_patch_test(&m, traction, 4.0, 2.0, h).unwrap();
        assert!(out.max_relative_error < 1e-6, "{traction}: {}", out.max_relative_error);
    }
}

#[test]
fn patch_von_mises_equals_hand_value() {
    let m = yeoh1(0.5);
    let out = traction_patch_test(&m, 0.4, 4.0, 2.0, 1.0).unwrap();
    let a = out.analytic;
    // plane strain, lateral stress zero: vm^2 = s11^2 - s11 s33 + s33^2
    let hand = (a.axial_stress.powi(2) - a.axial_stress * a.out_of_plane_stress
        + a.out_of_plane_stress.powi(2))
    .sqrt();
    assert!((a.von_mises() - hand).abs() < 1e-12 * hand);
    for v in &out.von_mises {
        assert!((v - hand).abs() < 1e-4 * hand, "{v} vs {hand}");
    }
}

#[test]
fn rigid_rotation_gives_exact_angle() {
    let mesh = Arc::new(generate_mesh(&PneuNetGeometry::default(), 2.5).unwrap());
    for angle in [0.0, 30.0, 90.0, 179.0, 250.0] {
        let state = rigid_rotation_state(mesh.clone(), angle);
        let got = bending_angle(&state).unwrap();
        assert!((got - angle).abs() < 1e-9, "{angle}: {got}");
    }
}

#[test]
fn arc_map_reproduces_large_angles() {
    let mesh = Arc::new(generate_mesh(&PneuNetGeometry::default(), 2.5).unwrap());
    for angle in [45.0, 167.0, 212.0, 300.0] {
        let state = arc_map_state(mesh.clone(), angle, 1.5);
        let got = bending_angle(&state).unwrap();
        assert!((got - angle).abs() < 0.5, "{angle}: {got}");
    }
}

#[test]
fn zero_ramp_is_a_single_sample() {
    let model = default_model(1.0);
    let curve = ramp_solve(&model, 0.0, &RampOptions::default()).unwrap();
    assert_eq!(curve.samples.len(), 1);
    assert_eq!(curve.samples[0].pressure, 0.0);
    assert_eq!(curve.samples[0].angle_deg, 0.0);
}

#[test]
fn softer_material_bends_more_at_every_pressure() {
    let stiff = ramp_solve(&default_model(1.0), 50.0, &RampOptions::default()).unwrap();
    let soft = ramp_solve(&default_model(0.8), 50.0, &RampOptions::default()).unwrap();
    assert_eq!(stiff.pressures(), (0..=10).map(|k| 5.0 * k as f64).collect::<Vec<_>>());
    assert_eq!(stiff.pressures(), soft.pressures());
    assert!(stiff.is_strictly_increasing());
    assert!(soft.is_strictly_increasing());
    for (a, b) in stiff.samples.iter().zip(&soft.samples).skip(1) {
        assert!(b.angle_deg > a.angle_deg, "p = {}: {} vs {}", a.pressure, a.angle_deg, b.angle_deg);
    }
}

#[test]
fn volume_is_preserved_at_45_kpa() {
    let model = default_model(1.0);
    let opts = RampOptions {
        keep_states: true,
        ..RampOptions::default()
    };
    let curve = ramp_solve(&model, 45.0, &opts).unwrap();
    let state = curve.sample_at(45.0).unwrap().state.as_ref().unwrap();
    assert!(state.converged);
    let dj = max_volume_change(&model, state);
    assert!(dj < 5e-3, "max |J - 1| = {dj}");
}

#[test]
fn static_curve_csv_round_trips() {
    let model = default_model(1.0);
    let curve = ramp_solve(&model, 10.0, &RampOptions::default()).unwrap();
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("pressure_kPa,angle_deg,max_vm_MPa,hotspot_region\n"));
    let back = read_static_curve_csv(&buf[..]).unwrap();
    assert_eq!(back.rows(), curve.rows());
}

#[test]
fn stress_field_csv_has_one_row_per_element() {
    let model = default_model(1.0);
    let start = FemState::zero(model.mesh().clone());
    let (state, _) = newton_solve(&model, &start, 2.0, &NewtonOptions::default()).unwrap();
    let field = stress_field(&model, &state).unwrap();
    let mut buf = Vec::new();
    write_stress_field_csv(model.mesh(), &field, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("elem_id,region,vm_MPa"));
    assert_eq!(lines.count(), model.mesh().element_count());
    let (tag, vm) = hotspot(model.mesh(), &field);
    assert_ne!(tag, RegionTag::Limiting);
    assert!(vm > 0.0);
}

#[test]
fn deformed_svg_is_emitted() {
    let mesh = Arc::new(generate_mesh(&PneuNetGeometry::default(), 2.5).unwrap());
    let state = arc_map_state(mesh.clone(), 90.0, 1.5);
    let field = vec![1.0; mesh.element_count()];
    let mut buf = Vec::new();
    write_deformed_svg(&state, &field, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polygon").count(), mesh.element_count());
}
