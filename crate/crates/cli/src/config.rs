//! TOML configuration with explicit units on every dimensioned quantity.

use std::path::{Path, PathBuf};

use pneusim_core::analysis::AnalysisOptions;
use pneusim_core::fatigue::FatigueParams;
use pneusim_core::fem::MaterialAssignment;
use pneusim_core::material::{
    HyperelasticModel, LinearElasticModel, ModelKind, RegionMaterial, DEFAULT_BULK_PENALTY_RATIO, ECOFLEX50_YEOH3,
};
use pneusim_core::rig::{FatigueTargets, NoiseParams, StaircaseProtocol, StaticTarget};
use pneusim_core::units::{Angle, CreepGain, Frequency, Length, Pressure, Time};
use pneusim_core::{ChannelMode, Error, PneuNetGeometry, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_chambers: usize,
    pub chamber_width: Length,
    pub chamber_height: Length,
    pub wall_thickness: Length,
    pub top_thickness: Length,
    pub channel_height: Length,
    pub base_thickness: Length,
    pub limiting_layer_thickness: Length,
    pub end_cap_length: Length,
    #[serde(default)]
    pub channel_mode: ChannelMode,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = PneuNetGeometry::default();
        GeometryConfig {
            n_chambers: g.n_chambers,
            chamber_width: Length(g.chamber_width),
            chamber_height: Length(g.chamber_height),
            wall_thickness: Length(g.wall_thickness),
            top_thickness: Length(g.top_thickness),
            channel_height: Length(g.channel_height),
            base_thickness: Length(g.base_thickness),
            limiting_layer_thickness: Length(g.limiting_layer_thickness),
            end_cap_length: Length(g.end_cap_length),
            channel_mode: g.channel_mode,
        }
    }
}

impl GeometryConfig {
    pub fn to_geometry(&self) -> Result<PneuNetGeometry> {
        let g = PneuNetGeometry {
            n_chambers: self.n_chambers,
            chamber_width: self.chamber_width.value(),
            chamber_height: self.chamber_height.value(),
            wall_thickness: self.wall_thickness.value(),
            top_thickness: self.top_thickness.value(),
            channel_height: self.channel_height.value(),
            base_thickness: self.base_thickness.value(),
            limiting_layer_thickness: self.limiting_layer_thickness.value(),
            end_cap_length: self.end_cap_length.value(),
            channel_mode: self.channel_mode,
        };
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }
}

/// Material of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialConfig {
    /// Hyperelastic law; the bulk penalty is `bulk_ratio` times the initial
    /// shear modulus and all coefficients are multiplied by `scale`.
    Hyperelastic {
        kind: ModelKind,
        coefficients: Vec<Pressure>,
        #[serde(default = "default_bulk_ratio")]
        bulk_ratio: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    LinearElastic {
        youngs_modulus: Pressure,
        poisson_ratio: f64,
    },
}

fn default_bulk_ratio() -> f64 {
    DEFAULT_BULK_PENALTY_RATIO
}

fn one() -> f64 {
    1.0
}

impl MaterialConfig {
    pub fn to_material(&self) -> Result<RegionMaterial> {
        let m = match self {
            MaterialConfig::Hyperelastic {
                kind,
                coefficients,
                bulk_ratio,
                scale,
            } => {
                if !(*scale > 0.0) {
                    return Err(Error::Config(format!("material scale must be positive, got {scale}")));
                }
                let c: Vec<f64> = coefficients.iter().map(|p| p.value()).collect();
                RegionMaterial::Hyperelastic(HyperelasticModel::with_penalty_ratio(*kind, c, *bulk_ratio)?.scaled(*scale))
            }
            MaterialConfig::LinearElastic {
                youngs_modulus,
                poisson_ratio,
            } => RegionMaterial::LinearElastic(LinearElasticModel::new(youngs_modulus.value(), *poisson_ratio)?),
        };
        Ok(m)
    }

    /// Multiplies the hyperelastic scale by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        match self {
            MaterialConfig::Hyperelastic {
                kind,
                coefficients,
                bulk_ratio,
                scale,
            } => MaterialConfig::Hyperelastic {
                kind: *kind,
                coefficients: coefficients.clone(),
                bulk_ratio: *bulk_ratio,
                scale: scale * factor,
            },
            other => other.clone(),
        }
    }
}

/// Elastomer and limiting-layer materials, with optional per-region overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    pub elastomer: MaterialConfig,
    pub limiting: MaterialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<MaterialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sealing: Option<MaterialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_wall: Option<MaterialConfig>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        MaterialsConfig {
            elastomer: MaterialConfig::Hyperelastic {
                kind: ModelKind::Yeoh3,
                coefficients: ECOFLEX50_YEOH3.iter().map(|&c| Pressure(c)).collect(),
                bulk_ratio: DEFAULT_BULK_PENALTY_RATIO,
                scale: 1.0,
            },
            limiting: MaterialConfig::LinearElastic {
                youngs_modulus: Pressure(6.5e6),
                poisson_ratio: 0.2,
            },
            body: None,
            sealing: None,
            interior_wall: None,
        }
    }
}

impl MaterialsConfig {
    pub fn to_assignment(&self) -> Result<MaterialAssignment> {
        let elastomer = self.elastomer.to_material()?;
        let pick = |o: &Option<MaterialConfig>| o.as_ref().map_or(Ok(elastomer.clone()), |m| m.to_material());
        Ok(MaterialAssignment {
            body: pick(&self.body)?,
            sealing: pick(&self.sealing)?,
            interior_wall: pick(&self.interior_wall)?,
            limiting: self.limiting.to_material()?,
        })
    }

    /// Applies a calibrated scale to every hyperelastic entry.
    pub fn rescaled(&self, factor: f64) -> Self {
        let r = |o: &Option<MaterialConfig>| o.as_ref().map(|m| m.rescaled(factor));
        MaterialsConfig {
            elastomer: self.elastomer.rescaled(factor),
            limiting: self.limiting.rescaled(factor),
            body: r(&self.body),
            sealing: r(&self.sealing),
            interior_wall: r(&self.interior_wall),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub target_h: Length,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { target_h: Length(2.5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticConfig {
    /// End of the static ramp.
    pub p_max: Pressure,
    /// Load increment the ramp starts with.
    pub initial_step: Pressure,
    /// Pressure at which the reference stress for damage is read.
    pub reference_pressure: Pressure,
}

impl Default for StaticConfig {
    fn default() -> Self {
        StaticConfig {
            p_max: Pressure(50.0),
            initial_step: Pressure(5.0),
            reference_pressure: Pressure(30.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub step_increment: Pressure,
    pub n_steps: usize,
    pub hold_duration: Time,
    pub start_pressure: Pressure,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let p = StaircaseProtocol::default();
        ProtocolConfig {
            step_increment: Pressure(p.step_increment),
            n_steps: p.n_steps,
            hold_duration: Time(p.hold_duration),
            start_pressure: Pressure(p.start_pressure),
        }
    }
}

impl ProtocolConfig {
    pub fn to_protocol(&self) -> Result<StaircaseProtocol> {
        let p = StaircaseProtocol {
            step_increment: self.step_increment.value(),
            n_steps: self.n_steps,
            hold_duration: self.hold_duration.value(),
            start_pressure: self.start_pressure.value(),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub pressure_sigma: Pressure,
    pub angle_sigma: Angle,
    pub pressure_lag: Time,
    pub pressure_rate: Frequency,
    pub angle_rate: Frequency,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseParams::default();
        NoiseConfig {
            pressure_sigma: Pressure(n.pressure_sigma),
            angle_sigma: Angle(n.angle_sigma),
            pressure_lag: Time(n.pressure_lag),
            pressure_rate: Frequency(n.pressure_rate),
            angle_rate: Frequency(n.angle_rate),
        }
    }
}

impl NoiseConfig {
    pub fn to_noise(&self) -> Result<NoiseParams> {
        let n = NoiseParams {
            pressure_sigma: self.pressure_sigma.value(),
            angle_sigma: self.angle_sigma.value(),
            pressure_lag: self.pressure_lag.value(),
            pressure_rate: self.pressure_rate.value(),
            angle_rate: self.angle_rate.value(),
        };
        n.validate()?;
        Ok(n)
    }
}

/// Explicit damage parameters. `sigma_ref` defaults to the pristine hotspot
/// stress at the static reference pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FatigueConfig {
    pub alpha: f64,
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_ref: Option<Pressure>,
    pub d_max: f64,
    pub gamma: f64,
    pub p_c: Pressure,
    pub k_c: CreepGain,
    pub tau_r: Time,
    pub delta_r: Pressure,
}

impl FatigueConfig {
    pub fn from_params(p: &FatigueParams, keep_sigma_ref: bool) -> Self {
        FatigueConfig {
            alpha: p.alpha,
            m: p.m,
            sigma_ref: keep_sigma_ref.then_some(Pressure(p.sigma_ref)),
            d_max: p.d_max,
            gamma: p.gamma,
            p_c: Pressure(p.p_c),
            k_c: CreepGain(p.k_c),
            tau_r: Time(p.tau_r),
            delta_r: Pressure(p.delta_r),
        }
    }

    pub fn to_params(&self, derived_sigma_ref: f64) -> Result<FatigueParams> {
        let p = FatigueParams {
            alpha: self.alpha,
            m: self.m,
            sigma_ref: self.sigma_ref.map_or(derived_sigma_ref, |s| s.value()),
            d_max: self.d_max,
            gamma: self.gamma,
            p_c: self.p_c.value(),
            k_c: self.k_c.value(),
            tau_r: self.tau_r.value(),
            delta_r: self.delta_r.value(),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrateKeyword {
    Calibrate,
}

/// Either explicit parameters or `fatigue = "calibrate"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FatigueBlock {
    Calibrate(CalibrateKeyword),
    Params(FatigueConfig),
}

impl Default for FatigueBlock {
    fn default() -> Self {
        FatigueBlock::Calibrate(CalibrateKeyword::Calibrate)
    }
}

/// Calibration targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target_pressure: Pressure,
    pub target_angle: Angle,
    pub angle_tolerance: Angle,
    pub max_ramps: usize,
    pub first_trial_max_nrmse: f64,
    pub last_trial_nrmse: f64,
    pub last_trial_tolerance: f64,
    pub last_step_drift: Angle,
    pub final_damage_fraction: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let s = StaticTarget::default();
        let f = FatigueTargets::default();
        CalibrationConfig {
            target_pressure: Pressure(s.pressure),
            target_angle: Angle(s.angle),
            angle_tolerance: Angle(s.tolerance),
            max_ramps: s.max_ramps,
            first_trial_max_nrmse: f.first_trial_max,
            last_trial_nrmse: f.last_trial,
            last_trial_tolerance: f.last_trial_tolerance,
            last_step_drift: Angle(f.last_step_drift),
            final_damage_fraction: f.final_damage_fraction,
        }
    }
}

impl CalibrationConfig {
    pub fn static_target(&self) -> StaticTarget {
        StaticTarget {
            pressure: self.target_pressure.value(),
            angle: self.target_angle.value(),
            tolerance: self.angle_tolerance.value(),
            max_ramps: self.max_ramps,
            ..StaticTarget::default()
        }
    }

    pub fn fatigue_targets(&self, n_trials: usize) -> FatigueTargets {
        FatigueTargets {
            n_trials,
            first_trial_max: self.first_trial_max_nrmse,
            last_trial: self.last_trial_nrmse,
            last_trial_tolerance: self.last_trial_tolerance,
            last_step_drift: self.last_step_drift.value(),
            final_damage_fraction: self.final_damage_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub mark_time: Time,
    pub mark_halfwidth: Time,
    pub end_window: Time,
    pub plateau_threshold: Angle,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let a = AnalysisOptions::default();
        AnalysisConfig {
            mark_time: Time(a.mark_time),
            mark_halfwidth: Time(a.mark_halfwidth),
            end_window: Time(a.end_window),
            plateau_threshold: Angle(a.plateau_threshold),
        }
    }
}

impl AnalysisConfig {
    pub fn to_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            mark_time: self.mark_time.value(),
            mark_halfwidth: self.mark_halfwidth.value(),
            end_window: self.end_window.value(),
            plateau_threshold: self.plateau_threshold.value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    pub master: u64,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        SeedsConfig { master: 42 }
    }
}

/// Whole toolkit configuration. Every block has a default, so an empty file
/// is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub fatigue: FatigueBlock,
    #[serde(default)]
    pub seeds: SeedsConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default, rename = "static")]
    pub static_ramp: StaticConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl ToolkitConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ToolkitConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.to_geometry()?;
        self.materials.to_assignment().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.mesh.target_h.value() > 0.0) {
            return Err(Error::Config("mesh target_h must be positive".into()));
        }
        let s = &self.static_ramp;
        if !(s.p_max.value() > 0.0 && s.initial_step.value() > 0.0) {
            return Err(Error::Config("static p_max and initial_step must be positive".into()));
        }
        let protocol = self.protocol.to_protocol()?;
        if protocol.max_pressure() > s.p_max.value() + 1e-9 {
            return Err(Error::Config(format!(
                "protocol reaches {} kPa beyond the static ramp end {} kPa",
                protocol.max_pressure(),
                s.p_max.value()
            )));
        }
        self.noise.to_noise()?;
        if let FatigueBlock::Params(f) = &self.fatigue {
            f.to_params(1.0)?;
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// JSON snapshot embedded in manifests and reports.
    pub fn snapshot(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}
