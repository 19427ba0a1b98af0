//! Bending angle, stress recovery and exports.

use std::io::{Read, Write};

use nalgebra::{Matrix2, SymmetricEigen};

use super::element::physical_gradients;
use super::solver::{CurveRow, CurveSample, StaticCurve};
use super::{FemModel, FemState};
use crate::error::{Error, Result};
use crate::geometry::RegionTag;
use crate::material::{ConstitutiveLaw, RegionMaterial};
use crate::mesh::Mesh;

/// Angle in degrees between the fixed-end normal (+y) and the normal of the
/// best-fit line through the deformed moving end.
///
/// Bending toward the base (clockwise in the y-z plane) counts positive and
/// the result is unwrapped to `[0, 360)`.
pub fn bending_angle(state: &FemState) -> Result<f64> {
    let mesh = &state.mesh;
    let ids = &mesh.moving_end;
    if ids.is_empty() {
        return Err(Error::Geometry("moving_end is empty".into()));
    }
    let pts: Vec<[f64; 2]> = ids.iter().map(|&n| state.position(n)).collect();
    let k = pts.len() as f64;
    let mean = pts
        .iter()
        .fold([0.0; 2], |m, p| [m[0] + p[0] / k, m[1] + p[1] / k]);
    let mut cov = Matrix2::zeros();
    for p in &pts {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        for a in 0..2 {
            for b in 0..2 {
                cov[(a, b)] += d[a] * d[b];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let imax = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let spread = eig.eigenvalues[imax];
    let scale = mesh.nodes.iter().fold(0.0f64, |m, x| m.max(x[0].abs()).max(x[1].abs()));
    if !(spread > 1e-20 * scale * scale) {
        return Err(Error::Geometry("moving_end nodes are coincident".into()));
    }
    let mut t: [f64; 2] = [eig.eigenvectors[(0, imax)], eig.eigenvectors[(1, imax)]];

    // orient from the reference bottom node to the reference top node
    let by_z = |a: &&usize, b: &&usize| mesh.nodes[**a][1].total_cmp(&mesh.nodes[**b][1]);
    let bottom = *ids.iter().min_by(by_z).unwrap();
    let top = *ids.iter().max_by(by_z).unwrap();
    let (pb, pt) = (state.position(bottom), state.position(top));
    if t[0] * (pt[0] - pb[0]) + t[1] * (pt[1] - pb[1]) < 0.0 {
        t = [-t[0], -t[1]];
    }
    let normal = [t[1], -t[0]];
    let phi = normal[1].atan2(normal[0]).to_degrees();
    let theta = (-phi).rem_euclid(360.0);
    Ok(if theta >= 360.0 { 0.0 } else { theta })
}

/// von Mises stress of a plane-strain Cauchy state.
pub fn von_mises(s11: f64, s22: f64, s12: f64, s33: f64) -> f64 {
    (0.5 * ((s11 - s22).powi(2) + (s22 - s33).powi(2) + (s33 - s11).powi(2)) + 3.0 * s12 * s12)
        .max(0.0)
        .sqrt()
}

/// Cauchy stress pushed forward from the element centroid: `(sigma, sigma33)`.
fn centroid_cauchy(model: &FemModel, state: &FemState, e: usize) -> Result<(Matrix2<f64>, f64)> {
    let mesh = model.mesh();
    let x = mesh.elements[e].map(|n| mesh.nodes[n]);
    let (grad, _) = physical_gradients(&x, 1.0 / 3.0, 1.0 / 3.0)
        .ok_or(Error::ElementInversion { element: e, det: 0.0 })?;
    let f = model.deformation_gradient(e, &grad, &state.displacement);
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::ElementInversion { element: e, det: j });
    }
    let c = f.transpose() * f;
    match model.material_of(e) {
        RegionMaterial::Hyperelastic(m) => {
            let r = m.isochoric_response(&c)?;
            let pressure = m.volumetric(model.mean_dilatation(e, &state.displacement).1)[1];
            Ok((
                f * r.pk2 * f.transpose() / j + Matrix2::identity() * pressure,
                r.pk2_out_of_plane / j + pressure,
            ))
        }
        RegionMaterial::LinearElastic(m) => {
            let r = m.stress_response(&c)?;
            Ok((f * r.pk2 * f.transpose() / j, r.pk2_out_of_plane / j))
        }
    }
}

/// Centroidal von Mises stress per element, kPa.
pub fn stress_field(model: &FemModel, state: &FemState) -> Result<Vec<f64>> {
    (0..model.mesh().element_count())
        .map(|e| {
            let (s, s33) = centroid_cauchy(model, state, e)?;
            Ok(von_mises(s[(0, 0)], s[(1, 1)], s[(0, 1)], s33))
        })
        .collect()
}

/// Region and value of the peak stress, ignoring the limiting layer.
pub fn hotspot(mesh: &Mesh, field: &[f64]) -> (RegionTag, f64) {
    field
        .iter()
        .zip(&mesh.regions)
        .filter(|(_, t)| **t != RegionTag::Limiting)
        .fold((RegionTag::Body, 0.0), |best, (v, t)| if *v > best.1 { (*t, *v) } else { best })
}

/// Largest `|J - 1|` over hyperelastic elements, with `J` the element mean
/// dilatation that the volumetric penalty acts on.
pub fn max_volume_change(model: &FemModel, state: &FemState) -> f64 {
    (0..model.mesh().element_count())
        .filter(|&e| model.material_of(e).is_hyperelastic())
        .map(|e| (model.mean_dilatation(e, &state.displacement).1 - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Writes `elem_id,region,vm_MPa`.
pub fn write_stress_field_csv<W: Write>(mesh: &Mesh, field_kpa: &[f64], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["elem_id", "region", "vm_MPa"])?;
    for (e, (v, t)) in field_kpa.iter().zip(&mesh.regions).enumerate() {
        wr.write_record([e.to_string(), t.to_string(), format!("{:?}", v / 1000.0)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a static curve written by [`StaticCurve::write_csv`].
pub fn read_static_curve_csv<R: Read>(r: R) -> Result<StaticCurve> {
    let mut rd = csv::Reader::from_reader(r);
    let mut samples = Vec::new();
    for row in rd.deserialize() {
        let row: CurveRow = row?;
        samples.push(CurveSample {
            pressure: row.pressure_kpa,
            angle_deg: row.angle_deg,
            max_vm_kpa: row.max_vm_mpa * 1000.0,
            hotspot: row.hotspot_region,
            stress_field: None,
            state: None,
        });
    }
    if samples.windows(2).any(|w| w[1].pressure <= w[0].pressure) {
        return Err(Error::Range("static curve pressures must increase".into()));
    }
    Ok(StaticCurve { samples })
}

/// SVG of the deformed mesh with corner triangles colored by von Mises stress.
pub fn write_deformed_svg<W: Write>(state: &FemState, field_kpa: &[f64], mut w: W) -> Result<()> {
    let mesh = &state.mesh;
    let pos: Vec<[f64; 2]> = (0..mesh.node_count()).map(|n| state.position(n)).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pos {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let scale = 8.0;
    let pad = 10.0;
    let width = (hi[0] - lo[0]) * scale + 2.0 * pad;
    let height = (hi[1] - lo[1]) * scale + 2.0 * pad + 30.0;
    let vmax = mesh
        .regions
        .iter()
        .zip(field_kpa)
        .filter(|(t, _)| **t != RegionTag::Limiting)
        .fold(0.0f64, |m, (_, v)| m.max(*v))
        .max(1e-12);
    let tx = |p: [f64; 2]| ((p[0] - lo[0]) * scale + pad, (hi[1] - p[1]) * scale + pad);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.1} {height:.1}\">\n"
    ));
    for (e, el) in mesh.elements.iter().enumerate() {
        let color = if mesh.regions[e] == RegionTag::Limiting {
            "#888888".to_string()
        } else {
            colormap(field_kpa[e] / vmax)
        };
        // straight-sided outline through corners and midsides
        let order = [0, 3, 1, 4, 2, 5];
        let pts: Vec<String> = order
            .iter()
            .map(|&k| {
                let (x, y) = tx(pos[el[k]]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        s.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{color}\" stroke=\"{color}\" stroke-width=\"0.3\"/>\n",
            pts.join(" ")
        ));
    }
    s.push_str(&format!(
        "<text x=\"{pad}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">p = {} kPa, max von Mises = {:.4} MPa</text>\n</svg>\n",
        height - 10.0,
        state.pressure,
        vmax / 1000.0
    ));
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Blue-to-red ramp for `t` in `[0, 1]`.
fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t * 2.0;
        (0.0, u, 1.0 - u)
    } else {
        let u = (t - 0.5) * 2.0;
        (u, 1.0 - u, 0.0)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        (r * 255.0) as u8,
        (g * 255.0) as u8,
        (b * 255.0) as u8
    )
}
