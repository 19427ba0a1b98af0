//! Least-squares fitting of Yeoh coefficients to uniaxial tension data.
//!
//! The incompressible uniaxial nominal stress is linear in the Yeoh
//! coefficients, so the fit is an ordinary linear least-squares problem.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{HyperelasticModel, ModelKind, DEFAULT_BULK_PENALTY_RATIO};
use crate::units::PressureUnit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniaxialDataset {
    samples: Vec<(f64, f64)>,
    label: String,
}

impl UniaxialDataset {
    /// `samples` are `(stretch, nominal stress)` pairs.
    pub fn new(samples: Vec<(f64, f64)>, label: impl Into<String>) -> Result<Self> {
        if samples.iter().any(|(l, p)| !(l.is_finite() && p.is_finite())) {
            return Err(Error::FitFailure("non-finite sample".into()));
        }
        if samples.iter().any(|(l, _)| *l <= 0.0) {
            return Err(Error::FitFailure("stretch must be positive".into()));
        }
        if samples.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::FitFailure("samples must be sorted by stretch".into()));
        }
        let tension = samples.iter().all(|(l, _)| *l >= 1.0);
        let compression = samples.iter().all(|(l, _)| *l <= 1.0);
        if !(tension || compression) {
            return Err(Error::FitFailure(
                "dataset mixes tension and compression samples".into(),
            ));
        }
        Ok(UniaxialDataset {
            samples,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn stretch_range(&self) -> Option<[f64; 2]> {
        Some([self.samples.first()?.0, self.samples.last()?.0])
    }

    /// Stresses of every sample multiplied by `factor` (unit conversion).
    pub fn scaled_stress(&self, factor: f64) -> Self {
        UniaxialDataset {
            samples: self.samples.iter().map(|&(l, p)| (l, p * factor)).collect(),
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rms_residual: f64,
    /// Ratio of extreme singular values of the column-scaled regressor.
    pub condition: f64,
}

/// Regressor row for a Yeoh fit of the given order at stretch `lambda`.
fn regressor_row(lambda: f64, order: usize) -> Vec<f64> {
    let i1 = lambda * lambda + 2.0 / lambda;
    let lead = 2.0 * (lambda - lambda.powi(-2));
    (1..=order)
        .map(|n| lead * n as f64 * (i1 - 3.0).powi(n as i32 - 1))
        .collect()
}

/// Fits a Yeoh model of order 1, 2 or 3.
pub fn fit_yeoh(data: &UniaxialDataset, order: usize) -> Result<(HyperelasticModel, FitDiagnostics)> {
    let kind = ModelKind::yeoh(order)
        .ok_or_else(|| Error::FitFailure(format!("Yeoh order must be 1, 2 or 3, got {order}")))?;
    let n = data.samples.len();
    let needed = (order + 1).max(4);
    if n < needed {
        return Err(Error::FitFailure(format!(
            "need at least {needed} samples for order {order}, got {n}"
        )));
    }

    let mut a = DMatrix::zeros(n, order);
    let mut y = DVector::zeros(n);
    for (r, &(lambda, p)) in data.samples.iter().enumerate() {
        for (c, v) in regressor_row(lambda, order).into_iter().enumerate() {
            a[(r, c)] = v;
        }
        y[r] = p;
    }

    // column scaling keeps the higher-order columns from dominating the spectrum
    let scales: Vec<f64> = (0..order).map(|c| a.column(c).norm()).collect();
    if scales.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::FitFailure("regressor has an empty column".into()));
    }
    let mut a_scaled = a.clone();
    for (c, s) in scales.iter().enumerate() {
        a_scaled.column_mut(c).scale_mut(1.0 / s);
    }

    let svd = a_scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(smin > 1e-12 * smax) {
        return Err(Error::FitFailure(format!(
            "regressor is rank deficient (condition {condition:.3e})"
        )));
    }
    let solve = |rhs: &DVector<f64>| -> Result<DVector<f64>> {
        svd.solve(rhs, 0.0)
            .map_err(|e| Error::FitFailure(format!("least-squares solve failed: {e}")))
    };
    let mut z = solve(&y)?;
    // one step of iterative refinement on the normal-equation residual
    let r = &y - &a_scaled * &z;
    z += solve(&r)?;

    let coeffs: Vec<f64> = z.iter().zip(&scales).map(|(zi, s)| zi / s).collect();
    let residual = &y - &a * DVector::from_vec(coeffs.clone());
    let rms_residual = (residual.norm_squared() / n as f64).sqrt();
    let diagnostics = FitDiagnostics {
        rms_residual,
        condition,
    };

    if coeffs[0] <= 0.0 {
        return Err(Error::Instability {
            reason: format!("C10 = {} gives a non-positive initial shear modulus", coeffs[0]),
            rms_residual,
            condition,
        });
    }
    let range = data.stretch_range().expect("non-empty dataset");
    let model = HyperelasticModel::with_penalty_ratio(kind, coeffs, DEFAULT_BULK_PENALTY_RATIO)?
        .with_fitted_stretch_range(range);
    check_monotone(&model, range, rms_residual, condition)?;
    Ok((model, diagnostics))
}

/// Sampled Drucker-type check: dP/dlambda > 0 across the fitted range.
fn check_monotone(model: &HyperelasticModel, range: [f64; 2], rms: f64, cond: f64) -> Result<()> {
    const SAMPLES: usize = 200;
    let [lo, hi] = range;
    let mut prev = model.uniaxial_nominal_stress(lo)?;
    for i in 1..=SAMPLES {
        let l = lo + (hi - lo) * i as f64 / SAMPLES as f64;
        let p = model.uniaxial_nominal_stress(l)?;
        if p <= prev && hi > lo {
            return Err(Error::Instability {
                reason: format!("nominal stress stops increasing near stretch {l:.4}"),
                rms_residual: rms,
                condition: cond,
            });
        }
        prev = p;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RangeSide {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidityWarning {
    NoRecordedRange,
    OutsideFittedRange {
        side: RangeSide,
        query: f64,
        fitted: [f64; 2],
    },
}

impl fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityWarning::NoRecordedRange => {
                write!(f, "model has no recorded fitted stretch range")
            }
            ValidityWarning::OutsideFittedRange {
                side,
                query,
                fitted,
            } => {
                let bound = match side {
                    RangeSide::Below => fitted[0],
                    RangeSide::Above => fitted[1],
                };
                write!(
                    f,
                    "stretch {query} is {} the fitted range [{}, {}] (bound {bound})",
                    match side {
                        RangeSide::Below => "below",
                        RangeSide::Above => "above",
                    },
                    fitted[0],
                    fitted[1]
                )
            }
        }
    }
}

/// Flags any part of `query` (a stretch interval) that lies outside the
/// range the model was fitted on.
pub fn validity_check(model: &HyperelasticModel, query: [f64; 2]) -> Vec<ValidityWarning> {
    let Some(fitted) = model.fitted_stretch_range() else {
        return vec![ValidityWarning::NoRecordedRange];
    };
    let (lo, hi) = (query[0].min(query[1]), query[0].max(query[1]));
    let mut out = Vec::new();
    if lo < fitted[0] {
        out.push(ValidityWarning::OutsideFittedRange {
            side: RangeSide::Below,
            query: lo,
            fitted,
        });
    }
    if hi > fitted[1] {
        out.push(ValidityWarning::OutsideFittedRange {
            side: RangeSide::Above,
            query: hi,
            fitted,
        });
    }
    out
}

/// Reads a `stretch,nominal_stress_<unit>` CSV; `#` starts a comment line.
pub fn read_uniaxial_csv(path: &Path) -> Result<(UniaxialDataset, PressureUnit)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "stretch" {
        return Err(Error::FitFailure(format!(
            "expected header 'stretch,nominal_stress_<unit>', got '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let unit: PressureUnit = headers[1]
        .strip_prefix("nominal_stress_")
        .ok_or_else(|| Error::FitFailure(format!("bad stress column '{}'", &headers[1])))?
        .parse()
        .map_err(|_| Error::FitFailure(format!("unknown stress unit in '{}'", &headers[1])))?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::FitFailure(format!("not a number: '{}'", &rec[i])))
        };
        samples.push((parse(0)?, parse(1)?));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((UniaxialDataset::new(samples, label)?, unit))
}
