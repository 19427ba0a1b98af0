//! Acceptance suite: one pass/fail line per criterion.
//!
//! Failures are reported but do not fail the process unless
//! `ACCEPTANCE_STRICT=1` is set.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use pneusim_cli::config::{FatigueBlock, FatigueConfig, ToolkitConfig};
use pneusim_core::analysis::{extract_steps, nrmse, per_step_errors, AnalysisOptions};
use pneusim_core::fatigue::FatigueParams;
use pneusim_core::fem::verify::{arc_map_state, rigid_rotation_state, traction_patch_test};
use pneusim_core::fem::{bending_angle, newton_solve, ramp_solve, FemModel, FemState, NewtonOptions, RampOptions, StaticCurve};
use pneusim_core::material::{
    ConstitutiveLaw, HyperelasticModel, LinearElasticModel, ModelKind, RegionMaterial, ECOFLEX50_YEOH3,
};
use pneusim_core::matfit::{fit_yeoh, UniaxialDataset};
use pneusim_core::rig::{calibrate_fatigue, calibrate_static, run_campaign, AngleMap};
use pneusim_core::{generate_mesh, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

type Check = fn(&mut Shared) -> Result<Outcome>;

/// State shared between criteria that build on the calibrated model.
#[derive(Default)]
struct Shared {
    cfg: Option<ToolkitConfig>,
    curve: Option<StaticCurve>,
    fatigue: Option<FatigueParams>,
}

fn config() -> ToolkitConfig {
    ToolkitConfig::default()
}

fn ramp_options(cfg: &ToolkitConfig) -> RampOptions {
    RampOptions {
        initial_dp: cfg.static_ramp.initial_step.value(),
        ..RampOptions::default()
    }
}

fn model_at(cfg: &ToolkitConfig, h: f64) -> Result<FemModel> {
    let mesh = Arc::new(generate_mesh(&cfg.geometry.to_geometry()?, h)?);
    FemModel::clamped(mesh, cfg.materials.to_assignment()?)
}

// five-point central differences along a symmetric direction of C
fn stencil<T>(c: &Matrix2<f64>, i: usize, j: usize, h: f64, g: impl Fn(&Matrix2<f64>) -> T) -> [T; 4] {
    let mut dc = Matrix2::zeros();
    dc[(i, j)] = h;
    dc[(j, i)] = h;
    [g(&(c + dc * 2.0)), g(&(c + dc)), g(&(c - dc)), g(&(c - dc * 2.0))]
}

/// Largest relative PK2 and tangent errors against finite differences.
fn fd_errors(law: &dyn ConstitutiveLaw, f: &Matrix2<f64>) -> Result<(f64, f64)> {
    let c = f.transpose() * f;
    let r = law.stress_response(&c)?;
    let h = 1e-4 * c.abs().max();
    let s_scale = r.pk2.abs().max().max(1e-8);
    let t_scale = r.tangent.as_voigt().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut es, mut et) = (0.0f64, 0.0f64);
    for (k, l) in [(0, 0), (1, 1), (0, 1)] {
        let sym = if k == l { 2.0 } else { 1.0 };
        let [w2p, wp, wm, w2m] = stencil(&c, k, l, h, |m| law.energy_from_cauchy_green(m).expect("valid C"));
        let dw = sym * (8.0 * (wp - wm) - (w2p - w2m)) / (12.0 * h);
        es = es.max((r.pk2[(k, l)] - dw).abs() / s_scale);
        let [s2p, sp, sm, s2m] = stencil(&c, k, l, h, |m| law.stress_response(m).expect("valid C").pk2);
        let ds = ((sp - sm) * 8.0 - (s2p - s2m)) * (sym / (12.0 * h));
        for i in 0..2 {
            for j in 0..2 {
                et = et.max((r.tangent.component(i, j, k, l) - ds[(i, j)]).abs() / t_scale);
            }
        }
    }
    Ok((es, et))
}

fn criterion_1(_: &mut Shared) -> Result<Outcome> {
    let start = Instant::now();
    let laws = [
        RegionMaterial::Hyperelastic(HyperelasticModel::ecoflex50()),
        RegionMaterial::LinearElastic(LinearElasticModel::new(6.5e6, 0.2)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut es, mut et, mut n) = (0.0f64, 0.0f64, 0);
    while n < 100 {
        let (a, b, c): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let det: f64 = rng.random_range(0.9..1.1);
        // solve the last entry for the sampled determinant
        if a.abs() < 0.2 {
            continue;
        }
        let d = (det + b * c) / a;
        if d.abs() > 2.0 {
            continue;
        }
        let f = Matrix2::new(a, b, c, d);
        for law in &laws {
            let (s, t) = fd_errors(law, &f)?;
            es = es.max(s);
            et = et.max(t);
        }
        n += 1;
    }
    let t = secs(start.elapsed());
    outcome(
        es < 1e-6 && et < 1e-5 && t < 10.0,
        format!("max stress error {es:.2e}, max tangent error {et:.2e} over {n} gradients, {t:.2} s"),
    )
}

fn criterion_2(_: &mut Shared) -> Result<Outcome> {
    let start = Instant::now();
    let truth = HyperelasticModel::ecoflex50();
    let samples = (1..=80)
        .map(|k| {
            let l = 1.0 + 0.1 * k as f64;
            truth.uniaxial_nominal_stress(l).map(|p| (l, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fit, _) = fit_yeoh(&UniaxialDataset::new(samples, "synthetic")?, 3)?;
    let worst = fit
        .coefficients()
        .iter()
        .zip(ECOFLEX50_YEOH3)
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0f64, f64::max);
    let t = secs(start.elapsed());
    outcome(
        worst < 1e-8 && t < 1.0,
        format!("coefficients {:?}, worst relative error {worst:.2e}, {t:.3} s", fit.coefficients()),
    )
}

fn criterion_3(_: &mut Shared) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let yeoh1 = HyperelasticModel::with_penalty_ratio(ModelKind::Yeoh1, vec![0.5], 2000.0)?;
    let cases = [
        (HyperelasticModel::ecoflex50(), 100.0),
        (HyperelasticModel::ecoflex50(), -20.0),
        (yeoh1.clone(), 0.6),
        (yeoh1, -0.1),
    ];
    for (law, traction) in &cases {
        let out = traction_patch_test(law, *traction, 4.0, 2.0, 1.0)?;
        worst = worst.max(out.max_relative_error);
    }
    let cfg = config();
    let model = model_at(&cfg, cfg.mesh.target_h.value())?;
    let opts = NewtonOptions::default();
    let (state, _) = newton_solve(&model, &FemState::zero(model.mesh().clone()), 0.0, &opts)?;
    let u_max = state.displacement.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    outcome(
        worst < 5e-3 && u_max < 1e-9,
        format!("patch stretch error {worst:.2e} over {} cases, zero-load |u|max {u_max:.1e} mm", cases.len()),
    )
}

fn criterion_4(_: &mut Shared) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = config();
    let p = cfg.calibration.target_pressure.value();
    let angle = |h: f64| -> Result<f64> {
        let curve = ramp_solve(&model_at(&cfg, h)?, p, &ramp_options(&cfg))?;
        Ok(curve.angle_at(p))
    };
    let (coarse, fine) = (angle(2.5)?, angle(1.25)?);
    let change = 100.0 * (coarse - fine).abs() / fine;
    let t = secs(start.elapsed());
    outcome(
        change < 2.0 && t < 300.0,
        format!("theta({p} kPa) {coarse:.3} deg at h 2.5, {fine:.3} deg at h 1.25, change {change:.2}%, {t:.1} s"),
    )
}

fn criterion_5(shared: &mut Shared) -> Result<Outcome> {
    let cfg = config();
    let target = cfg.calibration.static_target();
    let cal = calibrate_static(
        &cfg.geometry.to_geometry()?,
        &cfg.materials.to_assignment()?,
        cfg.mesh.target_h.value(),
        &target,
        &ramp_options(&cfg),
    )?;
    let mut calibrated = cfg.clone();
    calibrated.materials = cfg.materials.rescaled(cal.scale);
    let start = Instant::now();
    let model = model_at(&calibrated, calibrated.mesh.target_h.value())?;
    let curve = ramp_solve(&model, calibrated.static_ramp.p_max.value(), &ramp_options(&calibrated))?;
    let t = secs(start.elapsed());
    let at_target = curve.angle_at(target.pressure);
    let monotone = curve.is_strictly_increasing();
    let pass = (at_target - target.angle).abs() <= target.tolerance && monotone && t < 120.0;
    let detail = format!(
        "scale {:.6}, theta({} kPa) {at_target:.3} deg, strictly increasing {monotone}, {} samples, ramp {t:.1} s",
        cal.scale,
        target.pressure,
        curve.samples.len()
    );
    shared.cfg = Some(calibrated);
    shared.curve = Some(curve);
    outcome(pass, detail)
}

fn criterion_6(shared: &mut Shared) -> Result<Outcome> {
    let Some(curve) = &shared.curve else {
        return outcome(false, "needs the calibrated curve of criterion 5".into());
    };
    let s = curve.samples.last().expect("non-empty curve");
    outcome(
        s.hotspot.is_interior_wall(),
        format!("at {} kPa the peak von Mises {:.1} kPa lies in region {}", s.pressure, s.max_vm_kpa, s.hotspot),
    )
}

fn criterion_7(_: &mut Shared) -> Result<Outcome> {
    let mesh = Arc::new(generate_mesh(&config().geometry.to_geometry()?, 2.5)?);
    let rigid = bending_angle(&rigid_rotation_state(mesh.clone(), 90.0))?;
    let arc = bending_angle(&arc_map_state(mesh, 212.0, 1.5))?;
    outcome(
        (rigid - 90.0).abs() < 1e-9 && (arc - 212.0).abs() <= 0.5,
        format!("rigid rotation {rigid:.12} deg, arc map {arc:.4} deg"),
    )
}

fn criterion_8(shared: &mut Shared) -> Result<Outcome> {
    let (Some(cfg), Some(curve)) = (&shared.cfg, &shared.curve) else {
        return outcome(false, "needs the calibrated curve of criterion 5".into());
    };
    let map = AngleMap::new(curve)?;
    let protocol = cfg.protocol.to_protocol()?;
    let noise = cfg.noise.to_noise()?;
    let opts: AnalysisOptions = cfg.analysis.to_options();
    let seed = cfg.seeds.master;
    let base = FatigueParams::with_reference(map.hotspot_stress(cfg.static_ramp.reference_pressure.value()));
    let fat = calibrate_fatigue(&map, &base, &protocol, &noise, seed, &cfg.calibration.fatigue_targets(10), &opts)?;
    shared.fatigue = Some(fat.params);

    let start = Instant::now();
    let campaign = run_campaign(10, &map, &fat.params, &protocol, &noise, seed)?;
    let steps = campaign
        .logs
        .iter()
        .map(|l| extract_steps(l, &protocol, &map, &opts))
        .collect::<Result<Vec<_>>>()?;
    let errs = steps.iter().map(|s| nrmse(s)).collect::<Result<Vec<_>>>()?;
    let t = secs(start.elapsed());

    let first_ok = errs[0] <= 5.0;
    let last_ok = (errs[9] - 20.0).abs() <= 2.0;
    let trend_ok = errs.windows(2).all(|w| w[1] >= w[0]);
    let low_steps_ok = steps.iter().flatten().filter(|s| s.pressure_kpa <= 25.0).all(|s| {
        (s.angle_at_mark - s.fem_angle).abs() < 5.0 && (s.angle_at_end - s.fem_angle).abs() < 5.0
    });
    let mut trial2 = per_step_errors(&steps[1]);
    trial2.sort_by(|a, b| b.mark_error_deg.abs().total_cmp(&a.mark_error_deg.abs()));
    let mut top2: Vec<f64> = trial2[..2].iter().map(|e| e.pressure_kpa).collect();
    top2.sort_by(f64::total_cmp);
    let top2_ok = top2 == [40.0, 45.0];
    let flags: Vec<f64> = steps[9].iter().filter(|s| !s.plateau).map(|s| s.pressure_kpa).collect();
    let flags_ok = flags == [35.0, 40.0, 45.0];
    let pass = first_ok && last_ok && trend_ok && low_steps_ok && top2_ok && flags_ok && t < 30.0;
    let fmt: Vec<String> = errs.iter().map(|e| format!("{e:.2}")).collect();
    outcome(
        pass,
        format!(
            "alpha {:.3e} gamma {:.3} k_c {:.4}; NRMSE % [{}]; steps <= 25 kPa under 5 deg {low_steps_ok}; \
             trial 2 largest errors at {top2:?} kPa; trial 10 non-plateau at {flags:?} kPa; campaign + analysis {t:.1} s",
            fat.params.alpha,
            fat.params.gamma,
            fat.params.k_c,
            fmt.join(", ")
        ),
    )
}

fn run_cli(config: &Path, out: &Path) -> Result<std::process::Output> {
    Ok(Command::new(env!("CARGO_BIN_EXE_pneusim"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("run-campaign")
        .output()?)
}

fn criterion_9(shared: &mut Shared) -> Result<Outcome> {
    let (Some(cfg), Some(params)) = (&shared.cfg, &shared.fatigue) else {
        return outcome(false, "needs the calibration of criteria 5 and 8".into());
    };
    let mut cfg = cfg.clone();
    cfg.fatigue = FatigueBlock::Params(FatigueConfig::from_params(params, true));
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("campaign.toml");
    std::fs::write(&path, cfg.to_toml()?)?;
    let start = Instant::now();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let res = run_cli(&path, &out)?;
        if !res.status.success() {
            return outcome(
                false,
                format!("run-campaign exited with {}: {}", res.status, String::from_utf8_lossy(&res.stderr)),
            );
        }
        reports.push(std::fs::read(out.join("report.json"))?);
    }
    let t = secs(start.elapsed());
    outcome(
        reports[0] == reports[1],
        format!("report.json {} and {} bytes, identical {}, two runs {t:.1} s", reports[0].len(), reports[1].len(), reports[0] == reports[1]),
    )
}

fn criterion_10(shared: &mut Shared) -> Result<Outcome> {
    let (Some(cfg), Some(curve)) = (&shared.cfg, &shared.curve) else {
        return outcome(false, "needs the calibrated curve of criterion 5".into());
    };
    let map = AngleMap::new(curve)?;
    let protocol = cfg.protocol.to_protocol()?;
    let noise = cfg.noise.to_noise()?.silent();
    let opts = cfg.analysis.to_options();
    let params = FatigueParams {
        alpha: 0.0,
        ..shared
            .fatigue
            .unwrap_or_else(|| FatigueParams::with_reference(map.hotspot_stress(30.0)))
    };
    let campaign = run_campaign(10, &map, &params, &protocol, &noise, cfg.seeds.master)?;
    let first = &campaign.logs[0];
    let identical = campaign
        .logs
        .iter()
        .all(|l| l.angle_deg == first.angle_deg && l.pressure_kpa == first.pressure_kpa);
    let errs = campaign
        .logs
        .iter()
        .map(|l| nrmse(&extract_steps(l, &protocol, &map, &opts)?))
        .collect::<Result<Vec<_>>>()?;
    let constant = errs.iter().all(|e| *e == errs[0]);
    outcome(
        identical && constant,
        format!("trials bit-identical {identical}, NRMSE constant {constant} at {:.4}%", errs[0]),
    )
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("material consistency", criterion_1),
        ("fit recovery", criterion_2),
        ("patch and zero-load tests", criterion_3),
        ("mesh convergence", criterion_4),
        ("static calibration", criterion_5),
        ("hotspot localization", criterion_6),
        ("angle extraction", criterion_7),
        ("campaign reproduction", criterion_8),
        ("determinism", criterion_9),
        ("identity-fatigue control", criterion_10),
    ];
    let mut shared = Shared::default();
    let mut passed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let out = run(&mut shared).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        passed += out.pass as usize;
        println!("criterion {:2} {:<26} {}  {}", k + 1, name, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < criteria.len() {
        std::process::exit(1);
    }
}
