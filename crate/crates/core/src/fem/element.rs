//! Six-node triangle shape functions and quadrature rules.

/// Degree-4 six-point rule on the reference triangle: barycentric
/// coordinates `(L2, L3)` and weights that sum to one.
pub const TRI_RULE: [([f64; 2], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const WA: f64 = 0.223_381_589_678_011;
    const B: f64 = 0.091_576_213_509_771;
    const WB: f64 = 0.109_951_743_655_322;
    [
        ([A, A], WA),
        ([1.0 - 2.0 * A, A], WA),
        ([A, 1.0 - 2.0 * A], WA),
        ([B, B], WB),
        ([1.0 - 2.0 * B, B], WB),
        ([B, 1.0 - 2.0 * B], WB),
    ]
};

/// Three-point Gauss-Legendre rule on `[0, 1]`.
pub const EDGE_RULE: [(f64, f64); 3] = {
    // sqrt(0.15)
    const D: f64 = 0.387_298_334_620_741_7;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

/// Shape function values at `(xi, eta)`.
pub fn shape(xi: f64, eta: f64) -> [f64; 6] {
    let l1 = 1.0 - xi - eta;
    [
        l1 * (2.0 * l1 - 1.0),
        xi * (2.0 * xi - 1.0),
        eta * (2.0 * eta - 1.0),
        4.0 * l1 * xi,
        4.0 * xi * eta,
        4.0 * eta * l1,
    ]
}

/// Shape function derivatives `[dN/dxi, dN/deta]` at `(xi, eta)`.
pub fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let l1 = 1.0 - xi - eta;
    [
        [1.0 - 4.0 * l1, 1.0 - 4.0 * l1],
        [4.0 * xi - 1.0, 0.0],
        [0.0, 4.0 * eta - 1.0],
        [4.0 * (l1 - xi), -4.0 * xi],
        [4.0 * eta, 4.0 * xi],
        [-4.0 * eta, 4.0 * (l1 - eta)],
    ]
}

/// Three-node edge shape functions and derivatives at `s` in `[0, 1]`,
/// ordered start corner, midside, end corner.
pub fn edge_shape(s: f64) -> ([f64; 3], [f64; 3]) {
    (
        [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)],
        [4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0],
    )
}

/// Reference-configuration gradients at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// `dN_i/dX` for each node.
    pub grad: [[f64; 2]; 6],
    /// Quadrature weight times the reference Jacobian determinant.
    pub weight: f64,
}

/// Maps reference derivatives to physical gradients. Returns `None` for a
/// non-positive Jacobian.
pub fn physical_gradients(x: &[[f64; 2]; 6], xi: f64, eta: f64) -> Option<([[f64; 2]; 6], f64)> {
    let dn = shape_derivatives(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for (p, d) in x.iter().zip(&dn) {
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] += p[a] * d[b];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return None;
    }
    // grad = J^{-T} dN
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let mut g = [[0.0; 2]; 6];
    for (gi, d) in g.iter_mut().zip(&dn) {
        gi[0] = inv[0][0] * d[0] + inv[1][0] * d[1];
        gi[1] = inv[0][1] * d[0] + inv[1][1] * d[1];
    }
    Some((g, det))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        for (p, _) in TRI_RULE {
            let n = shape(p[0], p[1]);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let d = shape_derivatives(p[0], p[1]);
            assert!(d.iter().map(|v| v[0]).sum::<f64>().abs() < 1e-13);
            assert!(d.iter().map(|v| v[1]).sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn rule_integrates_quartics_exactly() {
        // integral of xi^a eta^b over the unit triangle = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 = TRI_RULE
                    .iter()
                    .map(|(p, w)| 0.5 * w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn edge_rule_integrates_quintics() {
        let q: f64 = EDGE_RULE.iter().map(|(s, w)| w * s.powi(5)).sum();
        assert!((q - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn kronecker_property() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        for (i, p) in pts.iter().enumerate() {
            let n = shape(p[0], p[1]);
            for (j, v) in n.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
