//! Command-line driver: config, FEM, calibration, campaign and analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use pneusim_core::analysis::{build_report, write_report, AnalysisOptions};
use pneusim_core::fatigue::FatigueParams;
use pneusim_core::fem::{
    hotspot, ramp_solve, read_static_curve_csv, stress_field, write_deformed_svg, write_stress_field_csv,
    FemModel, RampOptions, StaticCurve,
};
use pneusim_core::matfit::{fit_yeoh, read_uniaxial_csv, validity_check};
use pneusim_core::rig::{
    calibrate_fatigue, calibrate_static, read_campaign, run_campaign, write_campaign, AngleMap,
    CampaignManifest,
};
use pneusim_core::{generate_mesh, Error, Result};
use serde::Serialize;

use config::{AnalysisConfig, FatigueBlock, FatigueConfig, ToolkitConfig};

#[derive(Debug, Parser)]
#[command(name = "pneusim", version, about = "Pneu-net soft actuator simulation and analysis")]
pub struct Cli {
    /// Configuration file (TOML with units on every dimensioned value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of staircase trials.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Run the campaign with the damage rate set to zero.
    #[arg(long, global = true)]
    pub no_fatigue: bool,
    /// Target element size in mm; overrides the config.
    #[arg(long, global = true)]
    pub mesh_h: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a Yeoh model to a `stretch,nominal_stress_<unit>` CSV.
    FitMaterial {
        csv: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Ramp the pressure and write the static curve, stress field and SVG.
    SimulateStatic,
    /// Calibrate the elastomer scale and the fatigue parameters.
    Calibrate,
    /// Run a staircase campaign and analyze it.
    RunCampaign,
    /// Re-run the analysis on existing campaign directories.
    Analyze {
        /// Campaign directories; defaults to the output directory.
        dirs: Vec<PathBuf>,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::FitFailure(_) | Error::Instability { .. } => 2,
        Error::NonConvergence { .. }
        | Error::RampFailure { .. }
        | Error::ElementInversion { .. }
        | Error::LinearSolve(_)
        | Error::InvalidDeformation(_) => 3,
        Error::Calibration(_) => 4,
        Error::LogIntegrity(_) | Error::Csv(_) => 5,
        _ => 1,
    }
}

const DEFAULT_TRIALS: usize = 10;

/// Effective settings after applying command-line overrides.
struct Settings {
    cfg: ToolkitConfig,
    out: PathBuf,
}

impl Settings {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => ToolkitConfig::load(p)?,
            None => ToolkitConfig::default(),
        };
        if let Some(s) = cli.seed {
            cfg.seeds.master = s;
        }
        if let Some(h) = cli.mesh_h {
            cfg.mesh.target_h = pneusim_core::units::Length(h);
        }
        if let Some(n) = cli.trials {
            cfg.trials = Some(n);
        }
        cfg.validate()?;
        let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok(Settings { cfg, out })
    }

    /// Config snapshot without the output location, so that identical runs
    /// into different directories produce identical reports.
    fn snapshot(&self) -> Result<serde_json::Value> {
        let mut v = self.cfg.snapshot()?;
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        Ok(v)
    }

    fn ramp_options(&self) -> RampOptions {
        RampOptions {
            initial_dp: self.cfg.static_ramp.initial_step.value(),
            ..RampOptions::default()
        }
    }

    fn static_curve(&self, keep_states: bool) -> Result<(FemModel, StaticCurve)> {
        let geometry = self.cfg.geometry.to_geometry()?;
        let mesh = Arc::new(generate_mesh(&geometry, self.cfg.mesh.target_h.value())?);
        let model = FemModel::clamped(mesh, self.cfg.materials.to_assignment()?)?;
        let opts = RampOptions {
            keep_states,
            ..self.ramp_options()
        };
        let curve = ramp_solve(&model, self.cfg.static_ramp.p_max.value(), &opts)?;
        Ok((model, curve))
    }

    fn reference_stress(&self, map: &AngleMap) -> f64 {
        map.hotspot_stress(self.cfg.static_ramp.reference_pressure.value())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_curve(path: &Path, curve: &StaticCurve) -> Result<()> {
    curve.write_csv(BufWriter::new(File::create(path)?))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FitMaterial { csv, order } => fit_material(cli, csv, *order),
        Command::SimulateStatic => simulate_static(&Settings::new(cli)?),
        Command::Calibrate => calibrate(&Settings::new(cli)?),
        Command::RunCampaign => run_campaign_cmd(&Settings::new(cli)?, cli.no_fatigue),
        Command::Analyze { dirs } => analyze(&Settings::new(cli)?, dirs),
    }
}

#[derive(Serialize)]
struct FitOutput {
    source: String,
    order: usize,
    stress_unit: &'static str,
    model: pneusim_core::material::HyperelasticModel,
    diagnostics: pneusim_core::matfit::FitDiagnostics,
    warnings: Vec<String>,
}

fn fit_material(cli: &Cli, csv: &Path, order: usize) -> Result<()> {
    let fit_error = |e: Error| match e {
        Error::FitFailure(_) | Error::Instability { .. } => e,
        other => Error::FitFailure(other.to_string()),
    };
    let (data, unit) = read_uniaxial_csv(csv).map_err(fit_error)?;
    let data = data.scaled_stress(unit.to_kpa());
    let (model, diagnostics) = fit_yeoh(&data, order)?;
    let range = data.stretch_range().unwrap_or([1.0, 1.0]);
    let warnings = validity_check(&model, range).iter().map(|w| format!("{w:?}")).collect();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let path = out.join("material.json");
    write_json(
        &path,
        &FitOutput {
            source: csv.display().to_string(),
            order,
            stress_unit: "kPa",
            model,
            diagnostics,
            warnings,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct StaticManifest {
    seed: u64,
    nodes: usize,
    elements: usize,
    angle_at_max_deg: f64,
    hotspot_region: String,
    hotspot_vm_kpa: f64,
    config: serde_json::Value,
}

fn simulate_static(s: &Settings) -> Result<()> {
    let (model, curve) = s.static_curve(true)?;
    std::fs::create_dir_all(&s.out)?;
    write_curve(&s.out.join("static_curve.csv"), &curve)?;
    let last = curve.samples.last().expect("ramp records its end");
    let state = last.state.as_ref().expect("states kept");
    let field = stress_field(&model, state)?;
    write_stress_field_csv(model.mesh(), &field, BufWriter::new(File::create(s.out.join("stress_field.csv"))?))?;
    write_deformed_svg(state, &field, BufWriter::new(File::create(s.out.join("deformed.svg"))?))?;
    let (tag, vm) = hotspot(model.mesh(), &field);
    write_json(
        &s.out.join("static_manifest.json"),
        &StaticManifest {
            seed: s.cfg.seeds.master,
            nodes: model.mesh().node_count(),
            elements: model.mesh().element_count(),
            angle_at_max_deg: last.angle_deg,
            hotspot_region: tag.to_string(),
            hotspot_vm_kpa: vm,
            config: s.snapshot()?,
        },
    )?;
    for row in curve.rows() {
        println!("{:6.1} kPa  {:8.3} deg  {:.4} MPa  {}", row.pressure_kpa, row.angle_deg, row.max_vm_mpa, row.hotspot_region);
    }
    Ok(())
}

/// Damage parameters of the config, or the defaults when calibration is
/// requested, with the reference stress filled in.
fn base_fatigue(cfg: &ToolkitConfig, sigma_ref: f64) -> Result<FatigueParams> {
    match &cfg.fatigue {
        FatigueBlock::Params(f) => f.to_params(sigma_ref),
        FatigueBlock::Calibrate(_) => Ok(FatigueParams::with_reference(sigma_ref)),
    }
}

#[derive(Serialize)]
struct CalibrationReport {
    seed: u64,
    scale: f64,
    angle_at_target_deg: f64,
    evaluations: Vec<(f64, f64)>,
    fatigue: FatigueParams,
    nrmse_pct: Vec<f64>,
}

fn calibrate(s: &Settings) -> Result<()> {
    let geometry = s.cfg.geometry.to_geometry()?;
    let materials = s.cfg.materials.to_assignment()?;
    let target = s.cfg.calibration.static_target();
    let cal = calibrate_static(&geometry, &materials, s.cfg.mesh.target_h.value(), &target, &s.ramp_options())?;
    println!("elastomer scale {:.6}: {:.3} deg at {} kPa", cal.scale, cal.angle, target.pressure);

    let mut cfg = s.cfg.clone();
    cfg.materials = s.cfg.materials.rescaled(cal.scale);
    let calibrated = Settings {
        cfg,
        out: s.out.clone(),
    };
    let (_, curve) = calibrated.static_curve(false)?;
    if !curve.is_strictly_increasing() {
        return Err(Error::Calibration("calibrated static curve is not strictly increasing".into()));
    }
    let map = AngleMap::new(&curve)?;
    let base = base_fatigue(&s.cfg, calibrated.reference_stress(&map))?;
    let protocol = s.cfg.protocol.to_protocol()?;
    let noise = s.cfg.noise.to_noise()?;
    let n = s.cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let fat = calibrate_fatigue(
        &map,
        &base,
        &protocol,
        &noise,
        s.cfg.seeds.master,
        &s.cfg.calibration.fatigue_targets(n),
        &s.cfg.analysis.to_options(),
    )?;
    println!(
        "fatigue alpha {:.6e} gamma {:.4} k_c {:.4} deg/s/kPa; NRMSE {:?}",
        fat.params.alpha, fat.params.gamma, fat.params.k_c, fat.nrmse
    );

    let mut out_cfg = calibrated.cfg.clone();
    out_cfg.fatigue = FatigueBlock::Params(FatigueConfig::from_params(&fat.params, true));
    std::fs::create_dir_all(&s.out)?;
    std::fs::write(s.out.join("calibrated.toml"), out_cfg.to_toml()?)?;
    write_curve(&s.out.join("static_curve.csv"), &curve)?;
    write_json(
        &s.out.join("calibration.json"),
        &CalibrationReport {
            seed: s.cfg.seeds.master,
            scale: cal.scale,
            angle_at_target_deg: cal.angle,
            evaluations: cal.evaluations,
            fatigue: fat.params,
            nrmse_pct: fat.nrmse,
        },
    )?;
    Ok(())
}

fn run_campaign_cmd(s: &Settings, no_fatigue: bool) -> Result<()> {
    let (_, curve) = s.static_curve(false)?;
    let map = AngleMap::new(&curve)?;
    let protocol = s.cfg.protocol.to_protocol()?;
    let noise = s.cfg.noise.to_noise()?;
    let n = s.cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let opts = s.cfg.analysis.to_options();
    let base = base_fatigue(&s.cfg, s.reference_stress(&map))?;
    let params = if no_fatigue {
        FatigueParams { alpha: 0.0, ..base }
    } else {
        match &s.cfg.fatigue {
            FatigueBlock::Params(_) => base,
            FatigueBlock::Calibrate(_) => {
                let targets = s.cfg.calibration.fatigue_targets(n);
                calibrate_fatigue(&map, &base, &protocol, &noise, s.cfg.seeds.master, &targets, &opts)?.params
            }
        }
    };
    let campaign = run_campaign(n, &map, &params, &protocol, &noise, s.cfg.seeds.master)?;

    let mut effective = s.cfg.clone();
    effective.fatigue = FatigueBlock::Params(FatigueConfig::from_params(&params, true));
    effective.trials = Some(n);
    let snapshot = Settings {
        cfg: effective,
        out: s.out.clone(),
    }
    .snapshot()?;
    let manifest = CampaignManifest::new(&campaign, &protocol, &noise, &params, snapshot);
    write_campaign(&s.out, &campaign, &manifest)?;
    write_curve(&s.out.join("static_curve.csv"), &curve)?;
    let mut damage_csv = Vec::new();
    campaign.damage.write_history_csv(&mut damage_csv)?;
    std::fs::write(s.out.join("damage_history.csv"), damage_csv)?;

    let report = build_report(&[(manifest, campaign.logs.clone())], &map, &opts)?;
    write_report(&s.out, &report, &campaign.logs, &map)?;
    for t in &report.trials {
        println!("trial {:2}  D {:.4}  NRMSE {:6.2} %", t.trial, t.damage_before, t.nrmse_pct);
    }
    Ok(())
}

fn analyze(s: &Settings, dirs: &[PathBuf]) -> Result<()> {
    let dirs: Vec<PathBuf> = if dirs.is_empty() { vec![s.out.clone()] } else { dirs.to_vec() };
    let mut campaigns = Vec::new();
    for d in &dirs {
        campaigns.push(read_campaign(d)?);
    }
    let curve_path = dirs[0].join("static_curve.csv");
    let file = File::open(&curve_path).map_err(|e| Error::LogIntegrity(format!("{}: {e}", curve_path.display())))?;
    let curve = read_static_curve_csv(file)?;
    let map = AngleMap::new(&curve)?;
    let opts: AnalysisOptions = campaigns[0]
        .0
        .config
        .get("analysis")
        .and_then(|v| serde_json::from_value::<AnalysisConfig>(v.clone()).ok())
        .map_or_else(|| s.cfg.analysis.to_options(), |a| a.to_options());
    let logs: Vec<_> = campaigns.iter().flat_map(|(_, l)| l.iter().cloned()).collect();
    let report = build_report(&campaigns, &map, &opts)?;
    write_report(&s.out, &report, &logs, &map)?;
    for t in &report.trials {
        println!("trial {:2}  NRMSE {:6.2} %", t.trial, t.nrmse_pct);
    }
    Ok(())
}
