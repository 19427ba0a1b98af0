//! Virtual test rig: staircase protocol, first-order actuator plant with
//! fatigue, sensor sampling, campaigns and calibration.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{extract_steps, nrmse, AnalysisOptions};
use crate::error::{Error, Result};
use crate::fatigue::{creep_rate, cycle_update, softened_angle, DamageState, FatigueParams};
use crate::fem::{ramp_solve, FemModel, MaterialAssignment, RampOptions, StaticCurve};
use crate::geometry::PneuNetGeometry;
use crate::mesh::generate_mesh;

/// Constant-pressure holds with a fixed increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseProtocol {
    /// kPa.
    pub step_increment: f64,
    pub n_steps: usize,
    /// s.
    pub hold_duration: f64,
    /// kPa.
    pub start_pressure: f64,
}

impl Default for StaircaseProtocol {
    fn default() -> Self {
        StaircaseProtocol {
            step_increment: 5.0,
            n_steps: 10,
            hold_duration: 16.0,
            start_pressure: 0.0,
        }
    }
}

impl StaircaseProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_increment > 0.0) || !(self.hold_duration > 0.0) || self.n_steps == 0 {
            return Err(Error::Config(
                "protocol needs a positive increment, a positive hold and at least one step".into(),
            ));
        }
        if !(self.start_pressure >= 0.0) {
            return Err(Error::Config("protocol start pressure must be >= 0".into()));
        }
        Ok(())
    }

    pub fn step_pressure(&self, k: usize) -> f64 {
        self.start_pressure + k as f64 * self.step_increment
    }

    pub fn max_pressure(&self) -> f64 {
        self.step_pressure(self.n_steps - 1)
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.hold_duration
    }

    pub fn pressures(&self) -> Vec<f64> {
        (0..self.n_steps).map(|k| self.step_pressure(k)).collect()
    }

    /// Step index active at time `t`; the last step includes the end time.
    pub fn step_at(&self, t: f64) -> usize {
        ((t / self.hold_duration).floor().max(0.0) as usize).min(self.n_steps - 1)
    }
}

/// Sensor and actuation imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Pressure sensor noise, kPa.
    pub pressure_sigma: f64,
    /// Angle measurement noise, deg.
    pub angle_sigma: f64,
    /// First-order lag of the supplied pressure, s.
    pub pressure_lag: f64,
    /// Pressure logging and integration rate, Hz.
    pub pressure_rate: f64,
    /// Angle logging rate, Hz.
    pub angle_rate: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            pressure_sigma: 0.2,
            angle_sigma: 0.5,
            pressure_lag: 0.1,
            pressure_rate: 400.0,
            angle_rate: 30.0,
        }
    }
}

impl NoiseParams {
    /// Same timing with the random terms removed.
    pub fn silent(&self) -> Self {
        NoiseParams {
            pressure_sigma: 0.0,
            angle_sigma: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_sigma >= 0.0 && self.angle_sigma >= 0.0 && self.pressure_lag >= 0.0) {
            return Err(Error::Config("noise magnitudes and lag must be >= 0".into()));
        }
        if !(self.pressure_rate > 0.0 && self.angle_rate > 0.0) {
            return Err(Error::Config("sample rates must be positive".into()));
        }
        Ok(())
    }
}

/// Logged series of one staircase trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    /// 1-based.
    pub trial_index: usize,
    pub pressure_t: Vec<f64>,
    pub pressure_kpa: Vec<f64>,
    pub angle_t: Vec<f64>,
    pub angle_deg: Vec<f64>,
    pub damage_before: f64,
    pub damage_after: f64,
    pub rng_seed: u64,
}

/// Piecewise-linear angle and hotspot stress over pressure, built from a
/// monotone static curve.
#[derive(Debug, Clone)]
pub struct AngleMap {
    pressures: Vec<f64>,
    angles: Vec<f64>,
    stresses: Vec<f64>,
}

impl AngleMap {
    pub fn new(curve: &StaticCurve) -> Result<Self> {
        if curve.samples.len() < 2 {
            return Err(Error::Range("static curve needs at least two samples".into()));
        }
        if curve.samples.windows(2).any(|w| w[1].angle_deg < w[0].angle_deg) {
            return Err(Error::Range("static curve angle must not decrease with pressure".into()));
        }
        Ok(AngleMap {
            pressures: curve.pressures(),
            angles: curve.angles(),
            stresses: curve.samples.iter().map(|s| s.max_vm_kpa).collect(),
        })
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let eps = 1e-9;
        lo >= self.pressures[0] - eps && hi <= self.pressures[self.pressures.len() - 1] + eps
    }

    fn interp(&self, values: &[f64], p: f64) -> f64 {
        let x = &self.pressures;
        if p <= x[0] {
            return values[0];
        }
        let i = x.partition_point(|v| *v < p);
        if i >= x.len() {
            return values[x.len() - 1];
        }
        let t = (p - x[i - 1]) / (x[i] - x[i - 1]);
        values[i - 1] + t * (values[i] - values[i - 1])
    }

    pub fn angle(&self, p: f64) -> f64 {
        self.interp(&self.angles, p)
    }

    pub fn hotspot_stress(&self, p: f64) -> f64 {
        self.interp(&self.stresses, p)
    }
}

/// Pressure supplied to the actuator: the commanded staircase through a
/// first-order lag, in closed form.
struct LaggedPressure {
    protocol: StaircaseProtocol,
    lag: f64,
    step_start: Vec<f64>,
}

impl LaggedPressure {
    fn new(protocol: StaircaseProtocol, lag: f64) -> Self {
        let decay = if lag > 0.0 { (-protocol.hold_duration / lag).exp() } else { 0.0 };
        let mut step_start = Vec::with_capacity(protocol.n_steps);
        let mut p = protocol.start_pressure;
        for k in 0..protocol.n_steps {
            step_start.push(p);
            let cmd = protocol.step_pressure(k);
            p = cmd + (p - cmd) * decay;
        }
        LaggedPressure {
            protocol,
            lag,
            step_start,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let k = self.protocol.step_at(t);
        let cmd = self.protocol.step_pressure(k);
        if self.lag == 0.0 {
            return cmd;
        }
        let tau = t - k as f64 * self.protocol.hold_duration;
        cmd + (self.step_start[k] - cmd) * (-tau / self.lag).exp()
    }
}

/// Simulates one staircase trial and applies the cycle's damage afterwards.
///
/// The angle relaxes toward the softened steady state plus an accumulated
/// creep offset: `dθ/dt = (θ_ss + θ_c - θ) / τ_r`, `dθ_c/dt = creep_rate`.
pub fn run_trial(
    map: &AngleMap,
    damage: &DamageState,
    params: &FatigueParams,
    protocol: &StaircaseProtocol,
    noise: &NoiseParams,
    trial_index: usize,
    seed: u64,
) -> Result<(TrialLog, DamageState)> {
    protocol.validate()?;
    noise.validate()?;
    params.validate()?;
    let (p_lo, p_hi) = (protocol.start_pressure, protocol.max_pressure());
    if !map.covers(p_lo, p_hi) {
        return Err(Error::Range(format!(
            "protocol spans {p_lo}..{p_hi} kPa beyond the static curve"
        )));
    }
    let d = damage.d;
    let pressure = LaggedPressure::new(*protocol, noise.pressure_lag);
    let theta_ss = |p: f64| softened_angle(map.angle(p), p, d, params);
    let rhs = |t: f64, y: [f64; 2]| -> [f64; 2] {
        let p = pressure.at(t);
        [(theta_ss(p) + y[1] - y[0]) / params.tau_r, creep_rate(p, d, params)]
    };

    let rate = noise.pressure_rate;
    let n = (protocol.duration() * rate).round() as usize;
    let dt = 1.0 / rate;
    let mut theta = Vec::with_capacity(n + 1);
    let mut y = [theta_ss(pressure.at(0.0)), 0.0];
    theta.push(y[0]);
    for i in 0..n {
        let t = i as f64 * dt;
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * dt, [y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs(t + 0.5 * dt, [y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        for a in 0..2 {
            y[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        if !(y[0].is_finite() && y[0].abs() < 360.0) {
            return Err(Error::Range(format!("angle left [0, 360) at t = {t:.3} s")));
        }
        theta.push(y[0]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |sigma: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };
    let pressure_t: Vec<f64> = (0..=n).map(|i| i as f64 / rate).collect();
    let pressure_kpa: Vec<f64> = pressure_t
        .iter()
        .map(|&t| pressure.at(t) + gauss(noise.pressure_sigma))
        .collect();

    let m = (protocol.duration() * noise.angle_rate + 1e-9).floor() as usize;
    let angle_t: Vec<f64> = (0..=m).map(|j| j as f64 / noise.angle_rate).collect();
    let angle_deg: Vec<f64> = angle_t
        .iter()
        .map(|&t| {
            let x = (t * rate).min(n as f64);
            let i0 = (x.floor() as usize).min(n.saturating_sub(1));
            let f = x - i0 as f64;
            let v = if n == 0 { theta[0] } else { theta[i0] + f * (theta[i0 + 1] - theta[i0]) };
            v + gauss(noise.angle_sigma)
        })
        .collect();

    let peak = map.hotspot_stress(p_hi) * (1.0 + params.gamma * d);
    let after = cycle_update(damage, peak, params);
    let log = TrialLog {
        trial_index,
        pressure_t,
        pressure_kpa,
        angle_t,
        angle_deg,
        damage_before: d,
        damage_after: after.d,
        rng_seed: seed,
    };
    Ok((log, after))
}

/// Per-trial seeds derived from a master seed.
pub fn trial_seeds(master_seed: u64, n_trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n_trials).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub master_seed: u64,
    pub logs: Vec<TrialLog>,
    pub damage: DamageState,
}

/// Runs `n_trials` staircases in succession, threading the damage state.
pub fn run_campaign(
    n_trials: usize,
    map: &AngleMap,
    params: &FatigueParams,
    protocol: &StaircaseProtocol,
    noise: &NoiseParams,
    master_seed: u64,
) -> Result<Campaign> {
    if n_trials == 0 {
        return Err(Error::Config("a campaign needs at least one trial".into()));
    }
    let mut damage = DamageState::pristine();
    let mut logs = Vec::with_capacity(n_trials);
    for (k, seed) in trial_seeds(master_seed, n_trials).into_iter().enumerate() {
        let (log, next) = run_trial(map, &damage, params, protocol, noise, k + 1, seed)?;
        logs.push(log);
        damage = next;
    }
    Ok(Campaign {
        master_seed,
        logs,
        damage,
    })
}

/// Per-trial entry of the campaign manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub trial: usize,
    pub seed: u64,
    pub damage_before: f64,
    pub damage_after: f64,
    pub pressure_csv: String,
    pub angle_csv: String,
}

/// Campaign manifest written next to the trial CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub master_seed: u64,
    pub protocol: StaircaseProtocol,
    pub noise: NoiseParams,
    pub fatigue: FatigueParams,
    pub trials: Vec<ManifestTrial>,
    /// Damage after each completed trial.
    pub damage_trajectory: Vec<f64>,
    /// Snapshot of the configuration that produced the campaign.
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

/// Modelling assumptions carried in every manifest and report.
pub fn campaign_notes() -> Vec<String> {
    vec![
        "peak stress per cycle is the pristine FEM hotspot at the trial's maximum pressure scaled by (1 + gamma*D)".into(),
        "trials follow each other with no rest or recovery in between".into(),
    ]
}

impl CampaignManifest {
    pub fn new(
        campaign: &Campaign,
        protocol: &StaircaseProtocol,
        noise: &NoiseParams,
        fatigue: &FatigueParams,
        config: serde_json::Value,
    ) -> Self {
        CampaignManifest {
            master_seed: campaign.master_seed,
            protocol: *protocol,
            noise: *noise,
            fatigue: *fatigue,
            trials: campaign
                .logs
                .iter()
                .map(|l| ManifestTrial {
                    trial: l.trial_index,
                    seed: l.rng_seed,
                    damage_before: l.damage_before,
                    damage_after: l.damage_after,
                    pressure_csv: format!("trial_{}_pressure.csv", l.trial_index),
                    angle_csv: format!("trial_{}_angle.csv", l.trial_index),
                })
                .collect(),
            damage_trajectory: campaign.logs.iter().map(|l| l.damage_after).collect(),
            config,
            notes: campaign_notes(),
        }
    }
}

fn write_series(path: &Path, header: [&str; 2], t: &[f64], v: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    wr.write_record(header)?;
    for (a, b) in t.iter().zip(v) {
        wr.write_record([format!("{a:?}"), format!("{b:?}")])?;
    }
    wr.flush()?;
    Ok(())
}

fn read_series(path: &Path, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let integrity = |msg: String| Error::LogIntegrity(format!("{}: {msg}", path.display()));
    let file = File::open(path).map_err(|e| integrity(e.to_string()))?;
    let mut rd = csv::Reader::from_reader(BufReader::new(file));
    let head = rd.headers()?.clone();
    if head.iter().collect::<Vec<_>>() != header {
        return Err(integrity(format!("expected header {}", header.join(","))));
    }
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| integrity(format!("row {} is malformed", i + 2)))
        };
        let ti = parse(0)?;
        if t.last().is_some_and(|&last| ti <= last) {
            return Err(integrity(format!("time is not increasing at row {}", i + 2)));
        }
        t.push(ti);
        v.push(parse(1)?);
    }
    Ok((t, v))
}

/// Writes `trial_k_pressure.csv`, `trial_k_angle.csv` and `manifest.json`.
pub fn write_campaign(dir: &Path, campaign: &Campaign, manifest: &CampaignManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (log, entry) in campaign.logs.iter().zip(&manifest.trials) {
        write_series(&dir.join(&entry.pressure_csv), ["t_s", "p_kPa"], &log.pressure_t, &log.pressure_kpa)?;
        write_series(&dir.join(&entry.angle_csv), ["t_s", "theta_deg"], &log.angle_t, &log.angle_deg)?;
    }
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Reads a campaign written by [`write_campaign`].
pub fn read_campaign(dir: &Path) -> Result<(CampaignManifest, Vec<TrialLog>)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::LogIntegrity(format!("{}: {e}", path.display())))?;
    let manifest: CampaignManifest = serde_json::from_str(&text)
        .map_err(|e| Error::LogIntegrity(format!("{}: {e}", path.display())))?;
    let mut logs = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let (pressure_t, pressure_kpa) = read_series(&dir.join(&entry.pressure_csv), ["t_s", "p_kPa"])?;
        let (angle_t, angle_deg) = read_series(&dir.join(&entry.angle_csv), ["t_s", "theta_deg"])?;
        logs.push(TrialLog {
            trial_index: entry.trial,
            pressure_t,
            pressure_kpa,
            angle_t,
            angle_deg,
            damage_before: entry.damage_before,
            damage_after: entry.damage_after,
            rng_seed: entry.seed,
        });
    }
    Ok((manifest, logs))
}

/// Target of the static calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticTarget {
    /// kPa.
    pub pressure: f64,
    /// deg.
    pub angle: f64,
    /// deg.
    pub tolerance: f64,
    pub max_ramps: usize,
    pub scale_bounds: [f64; 2],
}

impl Default for StaticTarget {
    fn default() -> Self {
        StaticTarget {
            pressure: 45.0,
            angle: 167.0,
            tolerance: 2.0,
            max_ramps: 12,
            scale_bounds: [1.0 / 50.0, 50.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticCalibration {
    /// Factor applied to the elastomer coefficients.
    pub scale: f64,
    /// Angle at the target pressure for `scale`, deg.
    pub angle: f64,
    /// Every evaluated `(scale, angle)`; a failed ramp is recorded as infinite.
    pub evaluations: Vec<(f64, f64)>,
    pub materials: MaterialAssignment,
}

/// Assumed response exponent `θ ∝ scale^-1.5` for the first guess only.
const FIRST_GUESS_EXPONENT: f64 = 1.5;

/// Finds the elastomer scale that puts the angle at the target pressure within
/// tolerance. Works on `ln θ` over `ln scale`: a secant step inside the current
/// bracket with bisection as the fallback.
pub fn calibrate_static(
    geometry: &PneuNetGeometry,
    materials: &MaterialAssignment,
    target_h: f64,
    target: &StaticTarget,
    ramp: &RampOptions,
) -> Result<StaticCalibration> {
    let mesh = Arc::new(generate_mesh(geometry, target_h)?);
    let goal = target.angle.ln();
    let [lo_bound, hi_bound] = target.scale_bounds.map(f64::ln);
    let mut evaluations = Vec::new();
    let mut eval = |x: f64| -> Result<f64> {
        let scale = x.exp();
        let model = FemModel::clamped(mesh.clone(), materials.with_elastomer_scale(scale))?;
        let angle = match ramp_solve(&model, target.pressure, ramp) {
            Ok(curve) => curve
                .sample_at(target.pressure)
                .map(|s| s.angle_deg)
                .ok_or_else(|| Error::Calibration("ramp did not record the target pressure".into()))?,
            // the elastomer is too compliant to carry the target pressure
            Err(Error::RampFailure { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        evaluations.push((scale, angle));
        Ok(angle)
    };
    let done = |angle: f64| (angle - target.angle).abs() <= target.tolerance;
    let residual = |angle: f64| if angle > 0.0 { angle.ln() - goal } else { f64::NEG_INFINITY };

    let x0 = 0.0;
    let a0 = eval(x0)?;
    if done(a0) {
        return Ok(StaticCalibration {
            scale: 1.0,
            angle: a0,
            evaluations,
            materials: materials.clone(),
        });
    }
    if !a0.is_finite() {
        return Err(Error::Calibration("the initial configuration does not reach the target pressure".into()));
    }
    let r0 = residual(a0);
    let x1 = (x0 + r0 / FIRST_GUESS_EXPONENT).clamp(lo_bound, hi_bound);
    let a1 = eval(x1)?;
    let r1 = residual(a1);
    if (x1 - x0) * (r1 - r0) >= 0.0 {
        return Err(Error::Calibration(format!(
            "angle at {} kPa does not decrease with stiffness: {a0:.3} deg at scale 1, {a1:.3} deg at scale {:.4}",
            target.pressure,
            x1.exp()
        )));
    }

    // points with residual > 0 are too compliant and sit at smaller scales
    let mut soft: Option<(f64, f64)> = None;
    let mut stiff: Option<(f64, f64)> = None;
    let mut last = [(x0, r0), (x1, r1)];
    for &(x, r) in &last {
        if r > 0.0 {
            soft = Some(soft.map_or((x, r), |s: (f64, f64)| if x > s.0 { (x, r) } else { s }));
        } else {
            stiff = Some(stiff.map_or((x, r), |s: (f64, f64)| if x < s.0 { (x, r) } else { s }));
        }
    }
    let (mut x, mut a) = (x1, a1);
    let mut ramps = 2;
    // +1 after replacing the soft end, -1 after replacing the stiff end
    let mut last_side = 0;
    while !done(a) {
        if ramps >= target.max_ramps {
            let bracket = [soft.map(|s| s.0.exp()), stiff.map(|s| s.0.exp())];
            return Err(Error::Calibration(format!(
                "no scale within {} ramps; bracket {bracket:?}, last angle {a:.3} deg",
                target.max_ramps
            )));
        }
        let next = match (soft, stiff) {
            (Some(s), Some(t)) => {
                let mid = 0.5 * (s.0 + t.0);
                let xs = s.0 - s.1 * (t.0 - s.0) / (t.1 - s.1);
                if s.1.is_finite() && xs > s.0 && xs < t.0 { xs } else { mid }
            }
            _ => {
                let [(xa, ra), (xb, rb)] = last;
                let slope = if ra.is_finite() && rb.is_finite() && xa != xb {
                    ((rb - ra) / (xb - xa)).min(-0.25)
                } else {
                    -FIRST_GUESS_EXPONENT
                };
                let (xc, rc) = if rb.is_finite() { (xb, rb) } else { (xa, ra) };
                let xn = (xc - rc / slope).clamp(lo_bound, hi_bound);
                if (xn - xc).abs() < 1e-12 {
                    let bracket = [soft.map(|s| s.0.exp()), stiff.map(|s| s.0.exp())];
                    return Err(Error::Calibration(format!(
                        "target unreachable within scale bounds {:?}; bracket {bracket:?}",
                        target.scale_bounds
                    )));
                }
                xn
            }
        };
        a = eval(next)?;
        ramps += 1;
        x = next;
        let r = residual(a);
        last = [last[1], (x, r)];
        // Illinois weighting stops one end of the bracket from sticking
        if r > 0.0 {
            soft = Some((x, r));
            if last_side == 1 {
                if let Some(t) = stiff.as_mut() {
                    t.1 *= 0.5;
                }
            }
            last_side = 1;
        } else {
            stiff = Some((x, r));
            if last_side == -1 {
                if let Some(s) = soft.as_mut() {
                    s.1 *= 0.5;
                }
            }
            last_side = -1;
        }
    }
    Ok(StaticCalibration {
        scale: x.exp(),
        angle: a,
        evaluations,
        materials: materials.with_elastomer_scale(x.exp()),
    })
}

/// Targets of the fatigue calibration. NRMSE values in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueTargets {
    pub n_trials: usize,
    pub first_trial_max: f64,
    pub last_trial: f64,
    pub last_trial_tolerance: f64,
    /// Drift between the angle mark and the end of the top step in the last
    /// trial, deg.
    pub last_step_drift: f64,
    /// Damage entering the last trial as a fraction of `d_max`.
    pub final_damage_fraction: f64,
}

impl Default for FatigueTargets {
    fn default() -> Self {
        FatigueTargets {
            n_trials: 10,
            first_trial_max: 5.0,
            last_trial: 20.0,
            last_trial_tolerance: 1.0,
            last_step_drift: 10.0,
            final_damage_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatigueCalibration {
    pub params: FatigueParams,
    /// NRMSE per trial of the calibration campaign, percent.
    pub nrmse: Vec<f64>,
}

/// Damage entering each trial when every cycle peaks at `peak` (pristine).
fn damage_entering(params: &FatigueParams, peak: f64, n_trials: usize) -> Vec<f64> {
    let mut d = DamageState::pristine();
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        out.push(d.d);
        d = cycle_update(&d, peak * (1.0 + params.gamma * d.d), params);
    }
    out
}

/// Tunes `alpha`, `gamma` and `k_c` so the last trial reaches the NRMSE target.
///
/// For a given `gamma`, `alpha` is bisected so the damage entering the last
/// trial equals `final_damage_fraction * d_max`, and `k_c` is set so creep
/// alone drifts the top step by `last_step_drift` between the angle mark and
/// the end of the hold. The outer bisection on `gamma` matches the last-trial
/// NRMSE. The first trial is undamaged and only checked.
pub fn calibrate_fatigue(
    map: &AngleMap,
    base: &FatigueParams,
    protocol: &StaircaseProtocol,
    noise: &NoiseParams,
    master_seed: u64,
    targets: &FatigueTargets,
    analysis: &AnalysisOptions,
) -> Result<FatigueCalibration> {
    let n = targets.n_trials;
    if n < 2 {
        return Err(Error::Calibration("fatigue calibration needs at least two trials".into()));
    }
    let score = |params: &FatigueParams| -> Result<Vec<f64>> {
        let campaign = run_campaign(n, map, params, protocol, noise, master_seed)?;
        campaign
            .logs
            .iter()
            .map(|log| nrmse(&extract_steps(log, protocol, map, analysis)?))
            .collect()
    };
    let identity = FatigueParams {
        alpha: 0.0,
        gamma: 0.0,
        k_c: 0.0,
        ..*base
    };
    let baseline = score(&identity)?;
    if baseline[0] > targets.first_trial_max {
        return Err(Error::Calibration(format!(
            "first-trial NRMSE {:.3}% exceeds {}% before any damage",
            baseline[0], targets.first_trial_max
        )));
    }
    if targets.last_trial <= baseline[n - 1] + targets.last_trial_tolerance {
        return Ok(FatigueCalibration {
            params: identity,
            nrmse: baseline,
        });
    }

    let p_top = protocol.max_pressure();
    let peak = map.hotspot_stress(p_top);
    if peak <= base.sigma_ref {
        return Err(Error::Calibration(format!(
            "hotspot stress {peak:.3} kPa at {p_top} kPa does not exceed sigma_ref {:.3} kPa",
            base.sigma_ref
        )));
    }
    if p_top <= base.p_c {
        return Err(Error::Calibration("protocol never exceeds the creep onset pressure".into()));
    }
    let d_goal = targets.final_damage_fraction * base.d_max;
    let hold_after_mark = protocol.hold_duration - analysis.mark_time;

    let shape = |gamma: f64| -> Result<FatigueParams> {
        let with_alpha = |alpha: f64| FatigueParams {
            alpha,
            gamma,
            ..identity
        };
        let entering_last = |alpha: f64| damage_entering(&with_alpha(alpha), peak, n)[n - 1];
        let mut hi = 1e-3;
        while entering_last(hi) < d_goal {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Calibration("damage target unreachable".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if entering_last(mid) < d_goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k_c = targets.last_step_drift / (hold_after_mark * d_goal * (p_top - base.p_c));
        Ok(FatigueParams { k_c, ..with_alpha(hi) })
    };
    // an angle leaving [0, 360) means the softening is far too strong
    let last_error = |gamma: f64| -> Result<(f64, FatigueParams, Vec<f64>)> {
        let params = shape(gamma)?;
        match score(&params) {
            Ok(e) => Ok((e[n - 1], params, e)),
            Err(Error::Range(_)) => Ok((f64::INFINITY, params, Vec::new())),
            Err(e) => Err(e),
        }
    };

    let mut lo = 0.0;
    let mut hi = 0.5;
    let mut best = last_error(hi)?;
    while best.0 < targets.last_trial {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Calibration(format!(
                "last-trial NRMSE stays at {:.3}% below the {}% target",
                best.0, targets.last_trial
            )));
        }
        best = last_error(hi)?;
    }
    for _ in 0..60 {
        if (best.0 - targets.last_trial).abs() <= 0.1 * targets.last_trial_tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let trial = last_error(mid)?;
        if trial.0 < targets.last_trial {
            lo = mid;
        } else {
            hi = mid;
        }
        if (trial.0 - targets.last_trial).abs() < (best.0 - targets.last_trial).abs() {
            best = trial;
        }
    }
    let (achieved, params, nrmse) = best;
    if (achieved - targets.last_trial).abs() > targets.last_trial_tolerance {
        return Err(Error::Calibration(format!(
            "best last-trial NRMSE {achieved:.3}% misses {}% +- {}",
            targets.last_trial, targets.last_trial_tolerance
        )));
    }
    Ok(FatigueCalibration { params, nrmse })
}
