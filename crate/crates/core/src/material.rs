//! Hyperelastic and linear-elastic constitutive laws in plane strain.
//!
//! All laws are written in terms of the in-plane right Cauchy-Green tensor
//! `C` (2x2); the out-of-plane stretch is fixed at one, so the 3D invariants
//! are `I1 = tr C + 1`, `I2 = det C + tr C` and `J = sqrt(det C)`.
//!
//! Hyperelastic models use the isochoric/volumetric split
//! `W = W_dev(I1_bar, I2_bar) + K/2 (J - 1)^2` with `I1_bar = J^(-2/3) I1` and
//! `I2_bar = J^(-4/3) I2`, which keeps the reference state exactly stress free.

use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Third-order Yeoh coefficients (C10, C20, C30) for Ecoflex-50.
///
/// Published without units; callers choose the unit through configuration.
pub const ECOFLEX50_YEOH3: [f64; 3] = [1.9e2, 9e-4, -4.75e-6];

/// Default ratio between the volumetric penalty and the initial shear modulus.
pub const DEFAULT_BULK_PENALTY_RATIO: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Yeoh1,
    Yeoh2,
    Yeoh3,
    MooneyRivlin,
}

impl ModelKind {
    pub fn coefficient_count(self) -> usize {
        match self {
            ModelKind::Yeoh1 => 1,
            ModelKind::Yeoh2 => 2,
            ModelKind::Yeoh3 => 3,
            ModelKind::MooneyRivlin => 2,
        }
    }

    pub fn yeoh(order: usize) -> Option<Self> {
        match order {
            1 => Some(ModelKind::Yeoh1),
            2 => Some(ModelKind::Yeoh2),
            3 => Some(ModelKind::Yeoh3),
            _ => None,
        }
    }

    pub fn is_yeoh(self) -> bool {
        !matches!(self, ModelKind::MooneyRivlin)
    }
}

/// Fourth-order material tangent in Voigt form, ordered `(11, 22, 12)`.
///
/// The tensor carries both minor symmetries, so the 3x3 matrix is a complete
/// representation; no factors of two are folded into the shear entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent(pub [[f64; 3]; 3]);

impl Tangent {
    fn from_full(t: &[[[[f64; 2]; 2]; 2]; 2]) -> Self {
        const PAIRS: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
        let mut m = [[0.0; 3]; 3];
        for (r, &(i, j)) in PAIRS.iter().enumerate() {
            for (c, &(k, l)) in PAIRS.iter().enumerate() {
                m[r][c] = t[i][j][k][l];
            }
        }
        Tangent(m)
    }

    /// Component `C_ijkl` of the full tensor.
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let v = |a: usize, b: usize| if a == b { a } else { 2 };
        self.0[v(i, j)][v(k, l)]
    }

    pub fn as_voigt(&self) -> &[[f64; 3]; 3] {
        &self.0
    }
}

/// Second Piola-Kirchhoff stress and the consistent tangent at one material point.
#[derive(Debug, Clone, Copy)]
pub struct StressResponse {
    pub pk2: Matrix2<f64>,
    pub tangent: Tangent,
    /// Out-of-plane PK2 component `S33` (needed for the 3D von Mises measure).
    pub pk2_out_of_plane: f64,
}

impl StressResponse {
    pub fn pk2_voigt(&self) -> Vector3<f64> {
        Vector3::new(self.pk2[(0, 0)], self.pk2[(1, 1)], self.pk2[(0, 1)])
    }
}

/// Common interface of the plane-strain constitutive laws.
pub trait ConstitutiveLaw {
    /// Strain energy per unit reference volume.
    fn energy_from_cauchy_green(&self, c: &Matrix2<f64>) -> Result<f64>;

    /// PK2 stress `S = 2 dW/dC` and tangent `4 d2W/dCdC`.
    fn stress_response(&self, c: &Matrix2<f64>) -> Result<StressResponse>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperelasticModel {
    kind: ModelKind,
    coefficients: Vec<f64>,
    bulk_modulus: f64,
    fitted_stretch_range: Option<[f64; 2]>,
}

struct DeviatoricDerivatives {
    w: f64,
    w1: f64,
    w2: f64,
    w11: f64,
    w12: f64,
    w22: f64,
}

impl HyperelasticModel {
    pub fn new(kind: ModelKind, coefficients: Vec<f64>, bulk_modulus: f64) -> Result<Self> {
        if coefficients.len() != kind.coefficient_count() {
            return Err(Error::InvalidModel(format!(
                "{kind:?} needs {} coefficients, got {}",
                kind.coefficient_count(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if coefficients[0] <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "C10 must be positive, got {}",
                coefficients[0]
            )));
        }
        let model = HyperelasticModel {
            kind,
            coefficients,
            bulk_modulus,
            fitted_stretch_range: None,
        };
        if model.shear_modulus() <= 0.0 {
            return Err(Error::InvalidModel("initial shear modulus must be positive".into()));
        }
        if !(bulk_modulus > 0.0 && bulk_modulus.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "bulk penalty must be positive, got {bulk_modulus}"
            )));
        }
        Ok(model)
    }

    /// Builds a model whose bulk penalty is `ratio` times the initial shear modulus.
    pub fn with_penalty_ratio(kind: ModelKind, coefficients: Vec<f64>, ratio: f64) -> Result<Self> {
        let mu = initial_shear_modulus(kind, &coefficients);
        Self::new(kind, coefficients, ratio * mu)
    }

    /// Third-order Yeoh model with the Ecoflex-50 coefficients taken as-is
    /// (interpreted in whatever stress unit the caller works in).
    pub fn ecoflex50() -> Self {
        Self::with_penalty_ratio(ModelKind::Yeoh3, ECOFLEX50_YEOH3.to_vec(), DEFAULT_BULK_PENALTY_RATIO)
            .expect("reference coefficients are valid")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.bulk_modulus
    }

    pub fn fitted_stretch_range(&self) -> Option<[f64; 2]> {
        self.fitted_stretch_range
    }

    pub fn with_fitted_stretch_range(mut self, range: [f64; 2]) -> Self {
        self.fitted_stretch_range = Some(range);
        self
    }

    /// Uniformly scales every coefficient and the bulk penalty.
    pub fn scaled(&self, factor: f64) -> Self {
        HyperelasticModel {
            kind: self.kind,
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            bulk_modulus: self.bulk_modulus * factor,
            fitted_stretch_range: self.fitted_stretch_range,
        }
    }

    pub fn shear_modulus(&self) -> f64 {
        initial_shear_modulus(self.kind, &self.coefficients)
    }

    /// Small-strain `(shear modulus, bulk modulus)`.
    pub fn small_strain_moduli(&self) -> (f64, f64) {
        (self.shear_modulus(), self.bulk_modulus)
    }

    fn deviatoric(&self, i1b: f64, i2b: f64) -> DeviatoricDerivatives {
        let c = &self.coefficients;
        match self.kind {
            ModelKind::MooneyRivlin => DeviatoricDerivatives {
                w: c[0] * (i1b - 3.0) + c[1] * (i2b - 3.0),
                w1: c[0],
                w2: c[1],
                w11: 0.0,
                w12: 0.0,
                w22: 0.0,
            },
            _ => {
                let x = i1b - 3.0;
                let mut w = 0.0;
                let mut w1 = 0.0;
                let mut w11 = 0.0;
                for (i, &ci) in c.iter().enumerate() {
                    let n = (i + 1) as i32;
                    w += ci * x.powi(n);
                    w1 += ci * n as f64 * x.powi(n - 1);
                    if n >= 2 {
                        w11 += ci * (n * (n - 1)) as f64 * x.powi(n - 2);
                    }
                }
                DeviatoricDerivatives {
                    w,
                    w1,
                    w2: 0.0,
                    w11,
                    w12: 0.0,
                    w22: 0.0,
                }
            }
        }
    }

    /// `dW/dI1` and `dW/dI2` for the incompressible model at raw invariants.
    fn incompressible_slopes(&self, i1: f64, i2: f64) -> (f64, f64) {
        let d = self.deviatoric(i1, i2);
        (d.w1, d.w2)
    }

    /// Strain energy for a plane-strain deformation gradient.
    pub fn strain_energy(&self, f: &Matrix2<f64>) -> Result<f64> {
        let det = f.determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidDeformation(format!("det F = {det}")));
        }
        self.energy_from_cauchy_green(&(f.transpose() * f))
    }

    /// Nominal (first Piola-Kirchhoff) stress in incompressible uniaxial tension
    /// or compression at stretch `lambda`.
    pub fn uniaxial_nominal_stress(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("stretch must be positive, got {lambda}")));
        }
        let i1 = lambda * lambda + 2.0 / lambda;
        let i2 = 2.0 * lambda + 1.0 / (lambda * lambda);
        let (w1, w2) = self.incompressible_slopes(i1, i2);
        Ok(2.0 * (lambda - lambda.powi(-2)) * (w1 + w2 / lambda))
    }

    /// PK2 stress and tangent for a plane-strain right Cauchy-Green tensor.
    pub fn pk2_stress_and_tangent(&self, c: &Matrix2<f64>) -> Result<(Matrix2<f64>, Tangent)> {
        let r = self.stress_response(c)?;
        Ok((r.pk2, r.tangent))
    }
}

fn initial_shear_modulus(kind: ModelKind, c: &[f64]) -> f64 {
    match kind {
        ModelKind::MooneyRivlin => 2.0 * (c[0] + c.get(1).copied().unwrap_or(0.0)),
        _ => 2.0 * c[0],
    }
}

fn check_spd(c: &Matrix2<f64>) -> Result<f64> {
    let det = c.determinant();
    let asym = (c[(0, 1)] - c[(1, 0)]).abs();
    if !(c[(0, 0)] > 0.0 && det > 0.0) || asym > 1e-12 * c.abs().max() {
        return Err(Error::InvalidDeformation(format!(
            "C is not symmetric positive definite (det C = {det})"
        )));
    }
    Ok(det)
}

type Full4 = [[[[f64; 2]; 2]; 2]; 2];

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl ConstitutiveLaw for HyperelasticModel {
    fn energy_from_cauchy_green(&self, c: &Matrix2<f64>) -> Result<f64> {
        let j = check_spd(c)?.sqrt();
        Ok(self.isochoric_energy(c)? + self.volumetric(j)[0])
    }

    fn stress_response(&self, c: &Matrix2<f64>) -> Result<StressResponse> {
        self.response_with_bulk(c, self.bulk_modulus)
    }
}

impl HyperelasticModel {
    /// Energy of the isochoric part alone.
    pub fn isochoric_energy(&self, c: &Matrix2<f64>) -> Result<f64> {
        let det = check_spd(c)?;
        let a = det.sqrt().powf(-2.0 / 3.0);
        let i1 = c.trace() + 1.0;
        let i2 = det + c.trace();
        Ok(self.deviatoric(a * i1, a * a * i2).w)
    }

    /// Stress and tangent of the isochoric part alone.
    pub fn isochoric_response(&self, c: &Matrix2<f64>) -> Result<StressResponse> {
        self.response_with_bulk(c, 0.0)
    }

    /// Volumetric penalty `U(J) = K/2 (J - 1)^2` and its first two derivatives.
    pub fn volumetric(&self, j: f64) -> [f64; 3] {
        let k = self.bulk_modulus;
        [0.5 * k * (j - 1.0).powi(2), k * (j - 1.0), k]
    }

    fn response_with_bulk(&self, c: &Matrix2<f64>, k: f64) -> Result<StressResponse> {
        let det = check_spd(c)?;
        let j = det.sqrt();
        let a = j.powf(-2.0 / 3.0);
        let b = a * a;
        let i1 = c.trace() + 1.0;
        let i2 = det + c.trace();
        let (i1b, i2b) = (a * i1, b * i2);
        let d = self.deviatoric(i1b, i2b);

        // partial derivatives of W(I1, I2, J)
        let p1 = a * d.w1;
        let p2 = b * d.w2;
        let pj = -(2.0 / 3.0) * i1b / j * d.w1 - (4.0 / 3.0) * i2b / j * d.w2 + k * (j - 1.0);
        let p11 = a * a * d.w11;
        let p12 = a * b * d.w12;
        let p22 = b * b * d.w22;
        let p1j = -(a / j)
            * ((2.0 / 3.0) * d.w1 + (2.0 / 3.0) * d.w11 * i1b + (4.0 / 3.0) * d.w12 * i2b);
        let p2j = -(b / j)
            * ((4.0 / 3.0) * d.w2 + (2.0 / 3.0) * d.w12 * i1b + (4.0 / 3.0) * d.w22 * i2b);
        let pjj = ((2.0 / 3.0)
            * ((5.0 / 3.0) * i1b * d.w1
                + (2.0 / 3.0) * i1b * i1b * d.w11
                + (4.0 / 3.0) * i1b * i2b * d.w12)
            + (4.0 / 3.0)
                * ((7.0 / 3.0) * i2b * d.w2
                    + (2.0 / 3.0) * i1b * i2b * d.w12
                    + (4.0 / 3.0) * i2b * i2b * d.w22))
            / (j * j)
            + k;

        let cinv = Matrix2::new(c[(1, 1)], -c[(0, 1)], -c[(1, 0)], c[(0, 0)]) / det;
        let id = Matrix2::identity();
        // dI1/dC, dI2/dC, dJ/dC
        let g1 = id;
        let g2 = id * i1 - c;
        let gj = cinv * (0.5 * j);

        let pk2 = (g1 * p1 + g2 * p2 + gj * pj) * 2.0;
        let pk2_out_of_plane = 2.0 * (p1 + p2 * (i1 - 1.0) + pj * 0.5 * j);

        let mut t: Full4 = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for jj in 0..2 {
                for kk in 0..2 {
                    for l in 0..2 {
                        let sym_id =
                            0.5 * (delta(i, kk) * delta(jj, l) + delta(i, l) * delta(jj, kk));
                        let sym_cinv =
                            0.5 * (cinv[(i, kk)] * cinv[(jj, l)] + cinv[(i, l)] * cinv[(jj, kk)]);
                        let mut v = p11 * g1[(i, jj)] * g1[(kk, l)]
                            + p12 * (g1[(i, jj)] * g2[(kk, l)] + g2[(i, jj)] * g1[(kk, l)])
                            + p22 * g2[(i, jj)] * g2[(kk, l)]
                            + p1j * (g1[(i, jj)] * gj[(kk, l)] + gj[(i, jj)] * g1[(kk, l)])
                            + p2j * (g2[(i, jj)] * gj[(kk, l)] + gj[(i, jj)] * g2[(kk, l)])
                            + pjj * gj[(i, jj)] * gj[(kk, l)];
                        // second derivatives of the invariants themselves
                        v += p2 * (delta(i, jj) * delta(kk, l) - sym_id);
                        v += pj
                            * (0.25 * j * cinv[(i, jj)] * cinv[(kk, l)] - 0.5 * j * sym_cinv);
                        t[i][jj][kk][l] = 4.0 * v;
                    }
                }
            }
        }

        Ok(StressResponse {
            pk2,
            tangent: Tangent::from_full(&t),
            pk2_out_of_plane,
        })
    }
}

/// Isotropic linear-elastic constants, used at large rotation as a
/// Saint Venant-Kirchhoff law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearElasticModel {
    youngs_modulus: f64,
    poisson_ratio: f64,
}

impl LinearElasticModel {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::InvalidModel(format!(
                "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(LinearElasticModel {
            youngs_modulus,
            poisson_ratio,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    /// Lamé constants `(lambda, mu)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }
}

impl ConstitutiveLaw for LinearElasticModel {
    fn energy_from_cauchy_green(&self, c: &Matrix2<f64>) -> Result<f64> {
        check_spd(c)?;
        let (lambda, mu) = self.lame();
        let e = (c - Matrix2::identity()) * 0.5;
        Ok(0.5 * lambda * e.trace().powi(2) + mu * e.component_mul(&e).sum())
    }

    fn stress_response(&self, c: &Matrix2<f64>) -> Result<StressResponse> {
        check_spd(c)?;
        let (lambda, mu) = self.lame();
        let e = (c - Matrix2::identity()) * 0.5;
        let tr = e.trace();
        let pk2 = Matrix2::identity() * (lambda * tr) + e * (2.0 * mu);
        let t = Tangent([
            [lambda + 2.0 * mu, lambda, 0.0],
            [lambda, lambda + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ]);
        Ok(StressResponse {
            pk2,
            tangent: t,
            pk2_out_of_plane: lambda * tr,
        })
    }
}

/// Material assigned to a mesh region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionMaterial {
    Hyperelastic(HyperelasticModel),
    LinearElastic(LinearElasticModel),
}

impl RegionMaterial {
    pub fn is_hyperelastic(&self) -> bool {
        matches!(self, RegionMaterial::Hyperelastic(_))
    }
}

impl ConstitutiveLaw for RegionMaterial {
    fn energy_from_cauchy_green(&self, c: &Matrix2<f64>) -> Result<f64> {
        match self {
            RegionMaterial::Hyperelastic(m) => m.energy_from_cauchy_green(c),
            RegionMaterial::LinearElastic(m) => m.energy_from_cauchy_green(c),
        }
    }

    fn stress_response(&self, c: &Matrix2<f64>) -> Result<StressResponse> {
        match self {
            RegionMaterial::Hyperelastic(m) => m.stress_response(c),
            RegionMaterial::LinearElastic(m) => m.stress_response(c),
        }
    }
}
