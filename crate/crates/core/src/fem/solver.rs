use std::io::Write;

use serde::{Deserialize, Serialize};

use super::post::{bending_angle, hotspot, stress_field};
use super::{FemModel, FemState};
use crate::error::{Error, Result};
use crate::geometry::RegionTag;

/// Absolute floor for the reference load norm, used when the external load
/// vanishes.
const LOAD_NORM_FLOOR: f64 = 1e-12;

/// The reference load norm is never below this fraction of the internal force
/// scale, so round-off in stiff regions cannot stall convergence at tiny loads.
const INTERNAL_SCALE_FLOOR: f64 = 1e-3;

/// Sufficient-decrease constant of the energy test in the line search.
const ARMIJO: f64 = 1e-4;

/// Maximum number of diagonal shifts tried on an indefinite tangent.
const MAX_SHIFTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tolerance: 1e-8,
            max_iterations: 30,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norm before each iteration and at convergence.
    pub residual_history: Vec<f64>,
}

/// Newton-Raphson with backtracking from `start` to load level `p`.
///
/// A trial step is accepted when the residual norm drops or the potential
/// energy shows sufficient decrease; otherwise the step is halved.
pub fn newton_solve(
    model: &FemModel,
    start: &FemState,
    p: f64,
    opts: &NewtonOptions,
) -> Result<(FemState, NewtonReport)> {
    let mut u = start.displacement.clone();
    // the first step uses the tangent of the starting equilibrium
    let mut asm = model.assemble_split(&u, p, true, start.pressure)?;
    let mut energy = None;
    let mut history = Vec::new();
    for it in 0..=opts.max_iterations {
        let rn = asm.residual.norm();
        history.push(rn);
        if !rn.is_finite() {
            break;
        }
        let reference = asm
            .external_norm
            .max(INTERNAL_SCALE_FLOOR * asm.internal_scale)
            .max(LOAD_NORM_FLOOR);
        if rn <= opts.tolerance * reference {
            let state = FemState {
                mesh: start.mesh.clone(),
                displacement: u,
                pressure: p,
                converged: true,
                residual_norm: rn,
            };
            let report = NewtonReport {
                iterations: it,
                residual_history: history,
            };
            return Ok((state, report));
        }
        if it == opts.max_iterations {
            break;
        }
        let k = asm.tangent.as_ref().expect("tangent requested");
        let step = descent_step(model, k, &(-&asm.residual))?;
        let slope = asm.residual.dot(&step);
        let du = model.expand(&step);
        let e0 = match energy {
            Some(e) => e,
            None => model.potential_energy(&u, p)?,
        };

        let mut alpha = 1.0;
        let mut accepted = None;
        for h in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + alpha * b).collect();
            let outcome = model.assemble(&trial, p, true).and_then(|a| {
                if a.residual.norm() < rn || h == opts.max_halvings {
                    return Ok((true, a, None));
                }
                let e = model.potential_energy(&trial, p)?;
                Ok((slope < 0.0 && e <= e0 + ARMIJO * alpha * slope, a, Some(e)))
            });
            match outcome {
                Ok((true, a, e)) => {
                    accepted = Some((trial, a, e));
                    break;
                }
                Ok((false, ..)) | Err(Error::ElementInversion { .. }) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((trial, a, e)) => {
                u = trial;
                asm = a;
                energy = e;
            }
            None => break,
        }
    }
    Err(Error::NonConvergence {
        pressure: p,
        iterations: history.len().saturating_sub(1),
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Newton step, shifting the diagonal of an indefinite tangent until the
/// factorization succeeds so that the step is a descent direction.
fn descent_step(
    model: &FemModel,
    k: &nalgebra_sparse::CscMatrix<f64>,
    rhs: &nalgebra::DVector<f64>,
) -> Result<nalgebra::DVector<f64>> {
    let mut shift = 0.0;
    for _ in 0..MAX_SHIFTS {
        match model.solve_shifted(k, rhs, shift) {
            Ok(x) => return Ok(x),
            Err(Error::LinearSolve(_)) => shift = if shift == 0.0 { 1e-4 } else { 4.0 * shift },
            Err(e) => return Err(e),
        }
    }
    Err(Error::LinearSolve("tangent stays indefinite after diagonal shifts".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampOptions {
    pub initial_dp: f64,
    pub min_dp: f64,
    /// Samples are recorded at every multiple of this pressure.
    pub record_every: f64,
    pub keep_fields: bool,
    pub keep_states: bool,
    pub newton: NewtonOptions,
}

impl Default for RampOptions {
    fn default() -> Self {
        RampOptions {
            initial_dp: 5.0,
            min_dp: 0.01,
            record_every: 5.0,
            keep_fields: false,
            keep_states: false,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveSample {
    pub pressure: f64,
    pub angle_deg: f64,
    /// Peak von Mises stress outside the limiting layer, kPa.
    pub max_vm_kpa: f64,
    pub hotspot: RegionTag,
    pub stress_field: Option<Vec<f64>>,
    pub state: Option<FemState>,
}

#[derive(Debug, Clone, Default)]
pub struct StaticCurve {
    pub samples: Vec<CurveSample>,
}

/// Increases the cavity pressure from 0 to `p_max` with adaptive increments.
pub fn ramp_solve(model: &FemModel, p_max: f64, opts: &RampOptions) -> Result<StaticCurve> {
    if !(p_max >= 0.0 && p_max.is_finite()) {
        return Err(Error::Domain(format!("p_max must be non-negative, got {p_max}")));
    }
    let mut state = FemState::zero(model.mesh().clone());
    let mut curve = StaticCurve::default();
    curve.samples.push(record(model, &state, opts)?);

    let mut dp = opts.initial_dp;
    let mut successes = 0;
    let mut next_mark = opts.record_every.min(p_max);
    let eps = 1e-9 * p_max.max(1.0);
    while state.pressure < p_max - eps {
        let target = (state.pressure + dp).min(next_mark);
        let solved = newton_solve(model, &state, target, &opts.newton);
        match solved {
            Ok((next, _)) => {
                state = next;
                successes += 1;
                if successes >= 3 {
                    dp = (2.0 * dp).min(opts.initial_dp);
                    successes = 0;
                }
                if (state.pressure - next_mark).abs() <= eps {
                    state.pressure = next_mark;
                    curve.samples.push(record(model, &state, opts)?);
                    next_mark = (next_mark + opts.record_every).min(p_max);
                }
            }
            Err(Error::NonConvergence { .. } | Error::ElementInversion { .. } | Error::LinearSolve(_)) => {
                dp *= 0.5;
                successes = 0;
                if dp < opts.min_dp {
                    return Err(Error::RampFailure {
                        last_converged: state.pressure,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

fn record(model: &FemModel, state: &FemState, opts: &RampOptions) -> Result<CurveSample> {
    let field = stress_field(model, state)?;
    let (tag, vm) = hotspot(model.mesh(), &field);
    Ok(CurveSample {
        pressure: state.pressure,
        angle_deg: bending_angle(state)?,
        max_vm_kpa: vm,
        hotspot: tag,
        stress_field: opts.keep_fields.then_some(field),
        state: opts.keep_states.then(|| state.clone()),
    })
}

/// One row of the static-curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "pressure_kPa")]
    pub pressure_kpa: f64,
    pub angle_deg: f64,
    #[serde(rename = "max_vm_MPa")]
    pub max_vm_mpa: f64,
    pub hotspot_region: RegionTag,
}

impl StaticCurve {
    pub fn pressures(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.pressure).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.angle_deg).collect()
    }

    pub fn sample_at(&self, p: f64) -> Option<&CurveSample> {
        self.samples.iter().find(|s| (s.pressure - p).abs() < 1e-9)
    }

    /// Piecewise-linear angle at pressure `p`, clamped to the sampled range.
    pub fn angle_at(&self, p: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() {
            return 0.0;
        }
        if p <= s[0].pressure {
            return s[0].angle_deg;
        }
        for w in s.windows(2) {
            if p <= w[1].pressure {
                let t = (p - w[0].pressure) / (w[1].pressure - w[0].pressure);
                return w[0].angle_deg + t * (w[1].angle_deg - w[0].angle_deg);
            }
        }
        s[s.len() - 1].angle_deg
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].angle_deg > w[0].angle_deg)
    }

    pub fn rows(&self) -> Vec<CurveRow> {
        self.samples
            .iter()
            .map(|s| CurveRow {
                pressure_kpa: s.pressure,
                angle_deg: s.angle_deg,
                max_vm_mpa: s.max_vm_kpa / 1000.0,
                hotspot_region: s.hotspot,
            })
            .collect()
    }

    /// Writes `pressure_kPa,angle_deg,max_vm_MPa,hotspot_region`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in self.rows() {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}
