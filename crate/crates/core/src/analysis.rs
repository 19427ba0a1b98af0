//! Step extraction, NRMSE, per-step errors and the campaign report.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fatigue::FatigueParams;
use crate::plot::{span, Chart, COLORS};
use crate::rig::{AngleMap, CampaignManifest, StaircaseProtocol, TrialLog};

/// Windows and thresholds used to summarize each hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Time into each step at which the angle is read, s.
    pub mark_time: f64,
    /// Half width of the median window around the mark, s.
    pub mark_halfwidth: f64,
    /// Length of the median window closing each step, s.
    pub end_window: f64,
    /// A step plateaus when its end-minus-mark rise stays below this, deg.
    pub plateau_threshold: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            mark_time: 2.5,
            mark_halfwidth: 0.1,
            end_window: 0.2,
            plateau_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub pressure_kpa: f64,
    pub angle_at_mark: f64,
    pub angle_at_end: f64,
    pub plateau: bool,
    pub fem_angle: f64,
}

const TIME_EPS: f64 = 1e-9;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn window(t: &[f64], v: &[f64], lo: f64, hi: f64, closed: bool) -> Vec<f64> {
    let start = t.partition_point(|x| *x < lo - TIME_EPS);
    t[start..]
        .iter()
        .zip(&v[start..])
        .take_while(|(x, _)| if closed { **x <= hi + TIME_EPS } else { **x < hi - TIME_EPS })
        .map(|(_, y)| *y)
        .collect()
}

/// Summarizes every step of `log` on the commanded schedule.
pub fn extract_steps(
    log: &TrialLog,
    protocol: &StaircaseProtocol,
    map: &AngleMap,
    opts: &AnalysisOptions,
) -> Result<Vec<StepSummary>> {
    let (t, v) = (&log.angle_t, &log.angle_deg);
    if t.len() != v.len() {
        return Err(Error::LogIntegrity(format!(
            "trial {}: {} angle times but {} values",
            log.trial_index,
            t.len(),
            v.len()
        )));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::LogIntegrity(format!("trial {}: angle times not increasing", log.trial_index)));
    }
    let hold = protocol.hold_duration;
    (0..protocol.n_steps)
        .map(|k| {
            let t0 = k as f64 * hold;
            let last = k + 1 == protocol.n_steps;
            let mark = window(t, v, t0 + opts.mark_time - opts.mark_halfwidth, t0 + opts.mark_time + opts.mark_halfwidth, true);
            let end = window(t, v, t0 + hold - opts.end_window, t0 + hold, last);
            if mark.is_empty() || end.is_empty() {
                return Err(Error::LogIntegrity(format!(
                    "trial {}: no angle samples in a window of step {} ({} kPa)",
                    log.trial_index,
                    k + 1,
                    protocol.step_pressure(k)
                )));
            }
            let (angle_at_mark, angle_at_end) = (median(mark), median(end));
            let p = protocol.step_pressure(k);
            Ok(StepSummary {
                pressure_kpa: p,
                angle_at_mark,
                angle_at_end,
                plateau: angle_at_end - angle_at_mark < opts.plateau_threshold,
                fem_angle: map.angle(p),
            })
        })
        .collect()
}

/// RMSE of mark angle against the FEM angle, normalized by the FEM angle
/// range over the same steps, in percent.
pub fn nrmse(summaries: &[StepSummary]) -> Result<f64> {
    if summaries.is_empty() {
        return Err(Error::Range("no steps to compare".into()));
    }
    let (lo, hi) = summaries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.fem_angle), b.max(s.fem_angle)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Range("FEM angle range is zero over the evaluated steps".into()));
    }
    let mse = summaries
        .iter()
        .map(|s| (s.angle_at_mark - s.fem_angle).powi(2))
        .sum::<f64>()
        / summaries.len() as f64;
    Ok(100.0 * mse.sqrt() / range)
}

/// Absolute deviation from the FEM angle at the mark and at the end of a hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub pressure_kpa: f64,
    pub fem_deg: f64,
    pub mark_deg: f64,
    pub end_deg: f64,
    pub mark_error_deg: f64,
    pub end_error_deg: f64,
}

pub fn per_step_errors(summaries: &[StepSummary]) -> Vec<StepError> {
    summaries
        .iter()
        .map(|s| StepError {
            pressure_kpa: s.pressure_kpa,
            fem_deg: s.fem_angle,
            mark_deg: s.angle_at_mark,
            end_deg: s.angle_at_end,
            mark_error_deg: (s.angle_at_mark - s.fem_angle).abs(),
            end_error_deg: (s.angle_at_end - s.fem_angle).abs(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub damage_before: f64,
    pub damage_after: f64,
    pub nrmse_pct: f64,
    pub steps: Vec<StepSummary>,
    pub errors: Vec<StepError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub master_seed: u64,
    pub protocol: StaircaseProtocol,
    pub fatigue: FatigueParams,
    pub options: AnalysisOptions,
    pub nrmse_pct: Vec<f64>,
    /// `plateau[trial][step]`.
    pub plateau: Vec<Vec<bool>>,
    pub trials: Vec<TrialReport>,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

/// Paths where two JSON values differ.
pub fn json_diff(a: &serde_json::Value, b: &serde_json::Value) -> Vec<String> {
    fn walk(a: &serde_json::Value, b: &serde_json::Value, path: String, out: &mut Vec<String>) {
        use serde_json::Value::{Array, Object};
        match (a, b) {
            (Object(x), Object(y)) => {
                let keys: BTreeSet<&String> = x.keys().chain(y.keys()).collect();
                for k in keys {
                    let null = serde_json::Value::Null;
                    walk(x.get(k).unwrap_or(&null), y.get(k).unwrap_or(&null), format!("{path}.{k}"), out);
                }
            }
            (Array(x), Array(y)) if x.len() == y.len() => {
                for (i, (p, q)) in x.iter().zip(y).enumerate() {
                    walk(p, q, format!("{path}[{i}]"), out);
                }
            }
            _ if a != b => out.push(format!("{path}: {a} != {b}")),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(a, b, String::from("$"), &mut out);
    out
}

/// Builds the report over one or more campaigns that share a configuration.
pub fn build_report(
    campaigns: &[(CampaignManifest, Vec<TrialLog>)],
    map: &AngleMap,
    opts: &AnalysisOptions,
) -> Result<CampaignReport> {
    let (first, _) = campaigns
        .first()
        .ok_or_else(|| Error::Range("empty campaign".into()))?;
    for (m, _) in &campaigns[1..] {
        let mut diff = json_diff(&first.config, &m.config);
        if m.protocol != first.protocol {
            diff.push("protocol differs".into());
        }
        if !diff.is_empty() {
            return Err(Error::Config(format!("logs come from different configs: {}", diff.join("; "))));
        }
    }
    let protocol = first.protocol;
    let mut trials = Vec::new();
    for (_, logs) in campaigns {
        for log in logs {
            let steps = extract_steps(log, &protocol, map, opts)?;
            trials.push(TrialReport {
                trial: log.trial_index,
                seed: log.rng_seed,
                damage_before: log.damage_before,
                damage_after: log.damage_after,
                nrmse_pct: nrmse(&steps)?,
                errors: per_step_errors(&steps),
                steps,
            });
        }
    }
    if trials.is_empty() {
        return Err(Error::Range("empty campaign".into()));
    }
    Ok(CampaignReport {
        master_seed: first.master_seed,
        protocol,
        fatigue: first.fatigue,
        options: *opts,
        nrmse_pct: trials.iter().map(|t| t.nrmse_pct).collect(),
        plateau: trials.iter().map(|t| t.steps.iter().map(|s| s.plateau).collect()).collect(),
        trials,
        config: first.config.clone(),
        notes: first.notes.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrmseRow {
    pub trial: usize,
    pub nrmse_pct: f64,
    #[serde(rename = "damage_before")]
    pub damage_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepErrorRow {
    pub trial: usize,
    #[serde(rename = "pressure_kPa")]
    pub pressure_kpa: f64,
    pub fem_deg: f64,
    pub mark_deg: f64,
    pub end_deg: f64,
    pub mark_error_deg: f64,
    pub end_error_deg: f64,
    pub plateau: bool,
}

impl CampaignReport {
    pub fn nrmse_rows(&self) -> Vec<NrmseRow> {
        self.trials
            .iter()
            .map(|t| NrmseRow {
                trial: t.trial,
                nrmse_pct: t.nrmse_pct,
                damage_before: t.damage_before,
            })
            .collect()
    }

    pub fn step_error_rows(&self) -> Vec<StepErrorRow> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.errors.iter().zip(&t.steps).map(move |(e, s)| StepErrorRow {
                    trial: t.trial,
                    pressure_kpa: e.pressure_kpa,
                    fem_deg: e.fem_deg,
                    mark_deg: e.mark_deg,
                    end_deg: e.end_deg,
                    mark_error_deg: e.mark_error_deg,
                    end_error_deg: e.end_error_deg,
                    plateau: s.plateau,
                })
            })
            .collect()
    }
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_nrmse_csv<W: Write>(report: &CampaignReport, w: W) -> Result<()> {
    write_rows(&report.nrmse_rows(), w)
}

pub fn read_nrmse_csv<R: Read>(r: R) -> Result<Vec<NrmseRow>> {
    read_rows(r)
}

pub fn write_step_errors_csv<W: Write>(report: &CampaignReport, w: W) -> Result<()> {
    write_rows(&report.step_error_rows(), w)
}

pub fn read_step_errors_csv<R: Read>(r: R) -> Result<Vec<StepErrorRow>> {
    read_rows(r)
}

/// Writes `report.json`, the CSV tables and the figures into `dir`.
pub fn write_report(dir: &Path, report: &CampaignReport, logs: &[TrialLog], map: &AngleMap) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    write_nrmse_csv(report, std::fs::File::create(dir.join("nrmse.csv"))?)?;
    write_step_errors_csv(report, std::fs::File::create(dir.join("step_errors.csv"))?)?;
    let figures = [
        ("fig8a.svg", fig_time_series(report, logs)),
        ("fig8b.svg", fig_distributions(report, map)),
        ("fig9.svg", fig_nrmse(report)),
        ("fig10.svg", fig_step_errors(report)),
        ("fig11.svg", fig_mark_end(report)),
    ];
    for (name, svg) in figures {
        std::fs::write(dir.join(name), svg)?;
    }
    Ok(())
}

/// Angle and pressure against time for the first and last trials.
fn fig_time_series(report: &CampaignReport, logs: &[TrialLog]) -> String {
    let picks: Vec<&TrialLog> = match (logs.first(), logs.last()) {
        (Some(a), Some(b)) if logs.len() > 1 => vec![a, b],
        (Some(a), _) => vec![a],
        _ => Vec::new(),
    };
    let t_end = report.protocol.duration();
    let y = span(picks.iter().flat_map(|l| l.angle_deg.iter().copied()).chain([report.protocol.max_pressure()]));
    let mut c = Chart::new("Angle and pressure over the staircase", "time (s)", "angle (deg) / pressure (kPa)", [0.0, t_end], y);
    let mut legend = Vec::new();
    let labels: Vec<String> = picks.iter().map(|l| format!("trial {} angle", l.trial_index)).collect();
    for (k, log) in picks.iter().enumerate() {
        let stride = (log.angle_t.len() / 1500).max(1);
        let pts: Vec<(f64, f64)> = log
            .angle_t
            .iter()
            .zip(&log.angle_deg)
            .step_by(stride)
            .map(|(a, b)| (*a, *b))
            .collect();
        c.polyline(&pts, COLORS[k], 1.0);
    }
    if let Some(log) = picks.first() {
        let stride = (log.pressure_t.len() / 1500).max(1);
        let pts: Vec<(f64, f64)> = log
            .pressure_t
            .iter()
            .zip(&log.pressure_kpa)
            .step_by(stride)
            .map(|(a, b)| (*a, *b))
            .collect();
        c.polyline(&pts, "#444444", 0.8);
    }
    for (k, l) in labels.iter().enumerate() {
        legend.push((l.as_str(), COLORS[k]));
    }
    legend.push(("pressure", "#444444"));
    c.legend(&legend);
    c.render()
}

/// Mark-to-end angle span per step and trial with the FEM curve overlaid.
fn fig_distributions(report: &CampaignReport, map: &AngleMap) -> String {
    let p = report.protocol.pressures();
    let x = [p[0] - 2.5, p[p.len() - 1] + 2.5];
    let y = span(report.trials.iter().flat_map(|t| t.steps.iter().flat_map(|s| [s.angle_at_mark, s.angle_at_end, s.fem_angle])));
    let mut c = Chart::new("Measured angle range per step against FEM", "pressure (kPa)", "angle (deg)", x, y);
    let n = report.trials.len().max(1) as f64;
    for (k, t) in report.trials.iter().enumerate() {
        let dx = (k as f64 - (n - 1.0) / 2.0) * 3.0 / n;
        for s in &t.steps {
            c.segment((s.pressure_kpa + dx, s.angle_at_mark), (s.pressure_kpa + dx, s.angle_at_end), COLORS[1], 2.0);
        }
    }
    let fem: Vec<(f64, f64)> = p.iter().map(|&q| (q, map.angle(q))).collect();
    c.polyline(&fem, COLORS[0], 1.5);
    for &pt in &fem {
        c.marker(pt, COLORS[0]);
    }
    c.legend(&[("FEM", COLORS[0]), ("mark to end of hold", COLORS[1])]);
    c.render()
}

fn fig_nrmse(report: &CampaignReport) -> String {
    let n = report.trials.len() as f64;
    let y = span(report.nrmse_pct.iter().copied());
    let mut c = Chart::new("NRMSE per trial", "trial", "NRMSE (%)", [0.5, n + 0.5], y);
    for (k, t) in report.trials.iter().enumerate() {
        let x = k as f64 + 1.0;
        c.bar(x - 0.35, x + 0.35, 0.0, t.nrmse_pct, COLORS[0]);
    }
    c.render()
}

/// Mark error per step, one bar per trial.
fn fig_step_errors(report: &CampaignReport) -> String {
    let p = report.protocol.pressures();
    let inc = report.protocol.step_increment;
    let x = [p[0] - inc / 2.0, p[p.len() - 1] + inc / 2.0];
    let y = span(report.trials.iter().flat_map(|t| t.errors.iter().map(|e| e.mark_error_deg)));
    let mut c = Chart::new("Absolute error at the angle mark", "pressure (kPa)", "|error| (deg)", x, y);
    let n = report.trials.len().max(1) as f64;
    let w = 0.8 * inc / n;
    for (k, t) in report.trials.iter().enumerate() {
        for e in &t.errors {
            let x0 = e.pressure_kpa - 0.4 * inc + k as f64 * w;
            c.bar(x0, x0 + w, 0.0, e.mark_error_deg, COLORS[k % COLORS.len()]);
        }
    }
    c.render()
}

/// Last trial: error at the mark (black) extended to the end of the hold.
fn fig_mark_end(report: &CampaignReport) -> String {
    let Some(t) = report.trials.last() else {
        return Chart::new("", "", "", [0.0, 1.0], [0.0, 1.0]).render();
    };
    let inc = report.protocol.step_increment;
    let p = report.protocol.pressures();
    let x = [p[0] - inc / 2.0, p[p.len() - 1] + inc / 2.0];
    let y = span(t.errors.iter().flat_map(|e| [e.mark_error_deg, e.end_error_deg]));
    let title = format!("Trial {} error at the mark and at the end of each hold", t.trial);
    let mut c = Chart::new(&title, "pressure (kPa)", "|error| (deg)", x, y);
    for e in &t.errors {
        let (a, b) = (e.pressure_kpa - 0.3 * inc, e.pressure_kpa + 0.3 * inc);
        c.bar(a, b, 0.0, e.mark_error_deg, "#000000");
        if e.end_error_deg > e.mark_error_deg {
            c.bar(a, b, e.mark_error_deg, e.end_error_deg, COLORS[1]);
        }
    }
    c.legend(&[("at the mark", "#000000"), ("to the end of hold", COLORS[1])]);
    c.render()
}
