use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use pneusim_core::analysis::{extract_steps, nrmse, AnalysisOptions};
use pneusim_core::fem::{ramp_solve, MaterialAssignment, RampOptions};
use pneusim_core::material::{HyperelasticModel, LinearElasticModel};
use pneusim_core::rig::run_campaign;
use pneusim_core::{generate_mesh, AngleMap, FatigueParams, FemModel, NoiseParams, PneuNetGeometry, StaircaseProtocol};

/// Elastomer scale that puts the default actuator near 167 deg at 45 kPa.
const CALIBRATED_SCALE: f64 = 0.2877;

fn model(h: f64) -> FemModel {
    let mesh = Arc::new(generate_mesh(&PneuNetGeometry::default(), h).unwrap());
    let mats = MaterialAssignment::pneu_net(
        HyperelasticModel::ecoflex50().scaled(CALIBRATED_SCALE),
        LinearElasticModel::new(6.5e6, 0.2).unwrap(),
    );
    FemModel::clamped(mesh, mats).unwrap()
}

fn assembly(c: &mut Criterion) {
    let m = model(2.5);
    let u = vec![0.0; 2 * m.mesh().node_count()];
    c.bench_function("assemble residual and tangent, h 2.5", |b| {
        b.iter(|| m.assemble(black_box(&u), 20.0, true).unwrap())
    });
    c.bench_function("mesh default actuator, h 1.25", |b| {
        b.iter(|| generate_mesh(black_box(&PneuNetGeometry::default()), 1.25).unwrap())
    });
}

fn ramp(c: &mut Criterion) {
    let m = model(2.5);
    let mut g = c.benchmark_group("static ramp");
    g.sample_size(10);
    g.bench_function("0 to 20 kPa, h 2.5", |b| {
        b.iter(|| ramp_solve(&m, 20.0, &RampOptions::default()).unwrap())
    });
    g.finish();
}

fn campaign(c: &mut Criterion) {
    let curve = ramp_solve(&model(2.5), 50.0, &RampOptions::default()).unwrap();
    let map = AngleMap::new(&curve).unwrap();
    let params = FatigueParams {
        alpha: 3.8e-3,
        gamma: 1.25,
        k_c: 0.15,
        ..FatigueParams::with_reference(map.hotspot_stress(30.0))
    };
    let protocol = StaircaseProtocol::default();
    let noise = NoiseParams::default();
    let opts = AnalysisOptions::default();
    let mut g = c.benchmark_group("campaign");
    g.sample_size(10);
    g.bench_function("10 trials with analysis", |b| {
        b.iter(|| {
            let run = run_campaign(10, &map, &params, &protocol, &noise, 42).unwrap();
            run.logs
                .iter()
                .map(|l| nrmse(&extract_steps(l, &protocol, &map, &opts).unwrap()).unwrap())
                .sum::<f64>()
        })
    });
    g.finish();
}

criterion_group!(benches, assembly, ramp, campaign);
criterion_main!(benches);
