//! Finite-difference oracles for the plane-strain constitutive laws.

use nalgebra::Matrix2;
use pneusim_core::material::{
    ConstitutiveLaw, HyperelasticModel, LinearElasticModel, ModelKind, RegionMaterial,
};
use proptest::prelude::*;

/// Five-point central difference of `g` along the symmetric direction `(i, j)` of C.
fn stencil<T>(c: &Matrix2<f64>, i: usize, j: usize, h: f64, g: impl Fn(&Matrix2<f64>) -> T) -> [T; 4] {
    let mut dc = Matrix2::zeros();
    dc[(i, j)] = h;
    dc[(j, i)] = h;
    [g(&(c + dc * 2.0)), g(&(c + dc)), g(&(c - dc)), g(&(c - dc * 2.0))]
}

/// Central difference of W with respect to a symmetric perturbation of C.
/// Returns the PK2 estimate `S = 2 dW/dC`.
fn fd_pk2(law: &dyn ConstitutiveLaw, c: &Matrix2<f64>) -> Matrix2<f64> {
    let mut s = Matrix2::zeros();
    let h = 1e-4 * c.abs().max();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        let [w2p, wp, wm, w2m] = stencil(c, i, j, h, |m| law.energy_from_cauchy_green(m).unwrap());
        let d = (8.0 * (wp - wm) - (w2p - w2m)) / (12.0 * h);
        if i == j {
            s[(i, i)] = 2.0 * d;
        } else {
            s[(i, j)] = d;
            s[(j, i)] = d;
        }
    }
    s
}

/// Central difference of S giving the full tangent `2 dS/dC` component-wise.
fn fd_tangent(law: &dyn ConstitutiveLaw, c: &Matrix2<f64>) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut t = [[[[0.0; 2]; 2]; 2]; 2];
    let h = 1e-4 * c.abs().max();
    for (k, l) in [(0, 0), (1, 1), (0, 1)] {
        let [s2p, sp, sm, s2m] = stencil(c, k, l, h, |m| law.stress_response(m).unwrap().pk2);
        let ds = ((sp - sm) * 8.0 - (s2p - s2m)) / (12.0 * h);
        for i in 0..2 {
            for j in 0..2 {
                let v = if k == l { 2.0 * ds[(i, j)] } else { ds[(i, j)] };
                t[i][j][k][l] = v;
                t[i][j][l][k] = v;
            }
        }
    }
    t
}

fn models() -> Vec<RegionMaterial> {
    vec![
        RegionMaterial::Hyperelastic(HyperelasticModel::ecoflex50()),
        RegionMaterial::Hyperelastic(
            HyperelasticModel::with_penalty_ratio(ModelKind::Yeoh1, vec![0.5], 2000.0).unwrap(),
        ),
        RegionMaterial::Hyperelastic(
            HyperelasticModel::new(ModelKind::Yeoh3, vec![10.0, 2.0, 0.3], 400.0).unwrap(),
        ),
        RegionMaterial::Hyperelastic(
            HyperelasticModel::with_penalty_ratio(ModelKind::MooneyRivlin, vec![1.0, 0.4], 50.0)
                .unwrap(),
        ),
        RegionMaterial::LinearElastic(LinearElasticModel::new(6.5e6, 0.2).unwrap()),
    ]
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

#[allow(clippy::needless_range_loop)]
fn check_point(law: &RegionMaterial, f: &Matrix2<f64>) {
    let c = f.transpose() * f;
    let r = law.stress_response(&c).unwrap();
    let fd = fd_pk2(law, &c);
    let scale = r.pk2.abs().max().max(1e-8);
    for i in 0..2 {
        for j in 0..2 {
            let e = rel_err(r.pk2[(i, j)], fd[(i, j)], scale);
            assert!(e < 1e-6, "S{i}{j}: {} vs {} ({e:e}) for {law:?} at {f:?}", r.pk2[(i, j)], fd[(i, j)]);
        }
    }
    let t = fd_tangent(law, &c);
    let tscale = r.tangent.as_voigt().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let e = rel_err(r.tangent.component(i, j, k, l), t[i][j][k][l], tscale);
                    assert!(e < 1e-5, "C{i}{j}{k}{l}: {e:e}");
                }
            }
        }
    }
}

#[test]
fn fixed_deformations_match_finite_differences() {
    let gradients = [
        Matrix2::new(1.1, 0.0, 0.0, 1.1),
        Matrix2::new(1.3, 0.2, -0.1, 0.8),
        Matrix2::new(2.0, 0.5, 0.0, 0.5),
        Matrix2::new(0.7, -0.3, 0.4, 1.2),
    ];
    for law in models() {
        for f in &gradients {
            check_point(&law, f);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_gradients_match_finite_differences(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, target_det in 0.9f64..1.1
    ) {
        // choose the last entry so that det F hits the sampled value
        prop_assume!(a.abs() > 0.2);
        let d = (target_det + b * c) / a;
        prop_assume!(d.abs() <= 2.0);
        let f = Matrix2::new(a, b, c, d);
        for law in models() {
            check_point(&law, &f);
        }
    }
}
