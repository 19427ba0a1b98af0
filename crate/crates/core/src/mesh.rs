//! Structured quadratic-triangle meshing of rectilinear domains.
//!
//! Every rectangle edge of the domain becomes a grid line. Each grid interval
//! is split into `ceil(len / h)` equal cells, every solid cell into two
//! triangles with alternating diagonals, and every triangle is promoted to a
//! 6-node element by adding straight-edge midside nodes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{CrossSection, PneuNetGeometry, Rect, RegionTag};

/// Local node indices (corner, midside, corner) of each triangle edge.
pub const EDGE_NODES: [[usize; 3]; 3] = [[0, 3, 1], [1, 4, 2], [2, 5, 0]];

/// One element edge on the boundary, oriented counter-clockwise with respect
/// to its element (the solid lies on the left).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub local_edge: usize,
    /// Global node ids: start corner, midside, end corner.
    pub nodes: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 6]>,
    pub regions: Vec<RegionTag>,
    pub fixed_end: Vec<usize>,
    pub moving_end: Vec<usize>,
    /// Cavity boundaries, one closed loop per connected cavity.
    pub pressure_loops: Vec<Vec<BoundaryEdge>>,
    pub outline_edges: Vec<BoundaryEdge>,
}

/// Named boundary node and edge sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySets {
    pub fixed_end: Vec<usize>,
    pub moving_end: Vec<usize>,
    pub pressure_edges: Vec<BoundaryEdge>,
}

/// Rectilinear domain: solid rectangles with tags (first match wins) minus
/// cavity rectangles.
#[derive(Debug, Clone)]
pub struct RectDomain {
    pub solids: Vec<(Rect, RegionTag)>,
    pub cavities: Vec<Rect>,
}

impl From<&CrossSection> for RectDomain {
    fn from(cs: &CrossSection) -> Self {
        RectDomain {
            solids: cs.regions.clone(),
            cavities: cs.cavities().copied().collect(),
        }
    }
}

impl RectDomain {
    pub fn rectangle(r: Rect, tag: RegionTag) -> Self {
        RectDomain {
            solids: vec![(r, tag)],
            cavities: vec![],
        }
    }

    fn classify(&self, y: f64, z: f64) -> Cell {
        if self.cavities.iter().any(|c| c.contains(y, z)) {
            return Cell::Cavity;
        }
        match self.solids.iter().find(|(r, _)| r.contains(y, z)) {
            Some((_, t)) => Cell::Solid(*t),
            None => Cell::Outside,
        }
    }

    fn breakpoints(&self, pick: impl Fn(&Rect) -> [f64; 2]) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .solids
            .iter()
            .map(|(r, _)| r)
            .chain(self.cavities.iter())
            .flat_map(pick)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Solid(RegionTag),
    Cavity,
    Outside,
}

fn subdivide(breaks: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len < h / 10.0 {
            return Err(Error::Meshing(format!(
                "sliver of width {len:.4} mm between {:.4} and {:.4} is thinner than \
                 target_h/10 = {:.4} mm; reduce target_h",
                w[0],
                w[1],
                h / 10.0
            )));
        }
        let n = (len / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(if k == n { w[1] } else { w[0] + len * k as f64 / n as f64 });
        }
    }
    Ok(out)
}

/// Meshes the default pneu-net section (or any geometry) at seed size `target_h`.
pub fn generate_mesh(geom: &PneuNetGeometry, target_h: f64) -> Result<Mesh> {
    let cs = geom.build_cross_section()?;
    mesh_domain(&RectDomain::from(&cs), target_h)
}

pub fn mesh_domain(domain: &RectDomain, target_h: f64) -> Result<Mesh> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(Error::Meshing(format!("target_h must be positive, got {target_h}")));
    }
    if domain.solids.is_empty() {
        return Err(Error::Meshing("domain has no solid region".into()));
    }
    let ys = subdivide(&domain.breakpoints(|r| [r.y0, r.y1]), target_h)?;
    let zs = subdivide(&domain.breakpoints(|r| [r.z0, r.z1]), target_h)?;
    let (ny, nz) = (ys.len() - 1, zs.len() - 1);
    let cells: Vec<Cell> = (0..ny)
        .flat_map(|i| (0..nz).map(move |j| (i, j)))
        .map(|(i, j)| domain.classify(0.5 * (ys[i] + ys[i + 1]), 0.5 * (zs[j] + zs[j + 1])))
        .collect();
    let cell = |i: isize, j: isize| -> Cell {
        if i < 0 || j < 0 || i >= ny as isize || j >= nz as isize {
            Cell::Outside
        } else {
            cells[i as usize * nz + j as usize]
        }
    };

    // refined lattice: corners at even indices, midsides at odd ones
    let (ry, rz) = (2 * ny + 1, 2 * nz + 1);
    let coord = |a: usize, b: usize| -> [f64; 2] {
        let y = if a.is_multiple_of(2) { ys[a / 2] } else { 0.5 * (ys[a / 2] + ys[a / 2 + 1]) };
        let z = if b.is_multiple_of(2) { zs[b / 2] } else { 0.5 * (zs[b / 2] + zs[b / 2 + 1]) };
        [y, z]
    };

    // triangles as refined-lattice index triples in local node order
    type Lat = (usize, usize);
    let mut tris: Vec<([Lat; 6], RegionTag, usize, usize)> = Vec::new();
    for i in 0..ny {
        for j in 0..nz {
            let Cell::Solid(tag) = cell(i as isize, j as isize) else {
                continue;
            };
            let (a0, b0) = (2 * i, 2 * j);
            let a = (a0, b0);
            let b = (a0 + 2, b0);
            let c = (a0 + 2, b0 + 2);
            let d = (a0, b0 + 2);
            let m = (a0 + 1, b0 + 1);
            let (t1, t2) = if (i + j) % 2 == 0 {
                (
                    [a, b, c, (a0 + 1, b0), (a0 + 2, b0 + 1), m],
                    [a, c, d, m, (a0 + 1, b0 + 2), (a0, b0 + 1)],
                )
            } else {
                (
                    [a, b, d, (a0 + 1, b0), m, (a0, b0 + 1)],
                    [b, c, d, (a0 + 2, b0 + 1), (a0 + 1, b0 + 2), m],
                )
            };
            tris.push((t1, tag, i, j));
            tris.push((t2, tag, i, j));
        }
    }

    let mut used = vec![false; ry * rz];
    for (t, ..) in &tris {
        for &(a, b) in t {
            used[a * rz + b] = true;
        }
    }
    let mut id = vec![usize::MAX; ry * rz];
    let mut nodes = Vec::new();
    for a in 0..ry {
        for b in 0..rz {
            if used[a * rz + b] {
                id[a * rz + b] = nodes.len();
                nodes.push(coord(a, b));
            }
        }
    }
    let gid = |(a, b): Lat| id[a * rz + b];

    let mut elements = Vec::with_capacity(tris.len());
    let mut regions = Vec::with_capacity(tris.len());
    let mut pressure_edges = Vec::new();
    let mut outline_edges = Vec::new();
    for (e, (t, tag, i, j)) in tris.iter().enumerate() {
        elements.push(t.map(gid));
        regions.push(*tag);
        for (le, en) in EDGE_NODES.iter().enumerate() {
            let (p, q) = (t[en[0]], t[en[2]]);
            // an edge on the cell border is axis aligned; the diagonal is interior
            let neighbour = if p.1 == q.1 && p.1 == 2 * j {
                Some(cell(*i as isize, *j as isize - 1))
            } else if p.1 == q.1 && p.1 == 2 * j + 2 {
                Some(cell(*i as isize, *j as isize + 1))
            } else if p.0 == q.0 && p.0 == 2 * i {
                Some(cell(*i as isize - 1, *j as isize))
            } else if p.0 == q.0 && p.0 == 2 * i + 2 {
                Some(cell(*i as isize + 1, *j as isize))
            } else {
                None
            };
            let edge = BoundaryEdge {
                element: e,
                local_edge: le,
                nodes: [gid(t[en[0]]), gid(t[en[1]]), gid(t[en[2]])],
            };
            match neighbour {
                Some(Cell::Cavity) => pressure_edges.push(edge),
                Some(Cell::Outside) => outline_edges.push(edge),
                _ => {}
            }
        }
    }

    let y_min = ys[0];
    let y_max = ys[ny];
    let end_set = |y: f64| -> Vec<usize> {
        let mut v: Vec<usize> = outline_edges
            .iter()
            .filter(|e| e.nodes.iter().all(|&n| nodes[n][0] == y))
            .flat_map(|e| e.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let fixed_end = end_set(y_min);
    let moving_end = end_set(y_max);
    let pressure_loops = chain_loops(pressure_edges)?;

    let mesh = Mesh {
        nodes,
        elements,
        regions,
        fixed_end,
        moving_end,
        pressure_loops,
        outline_edges,
    };
    Ok(mesh)
}

/// Orders boundary edges into closed loops by following end corners.
fn chain_loops(edges: Vec<BoundaryEdge>) -> Result<Vec<Vec<BoundaryEdge>>> {
    let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(edges.len());
    for (k, e) in edges.iter().enumerate() {
        if by_start.insert(e.nodes[0], k).is_some() {
            return Err(Error::Meshing(format!(
                "cavity boundary branches at node {}",
                e.nodes[0]
            )));
        }
    }
    let mut visited = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if visited[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut k = start;
        loop {
            visited[k] = true;
            lp.push(edges[k]);
            let next = edges[k].nodes[2];
            match by_start.get(&next) {
                Some(&n) if n == start => break,
                Some(&n) if !visited[n] => k = n,
                _ => {
                    return Err(Error::Meshing(format!(
                        "cavity boundary is not closed at node {next}"
                    )))
                }
            }
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// Signed area of a straight-sided triangle from its corner nodes.
fn corner_area(p: &[[f64; 2]], e: &[usize; 6]) -> f64 {
    let [a, b, c] = [p[e[0]], p[e[1]], p[e[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_area(&self, e: usize) -> f64 {
        corner_area(&self.nodes, &self.elements[e])
    }

    pub fn area(&self) -> f64 {
        (0..self.element_count()).map(|e| self.element_area(e)).sum()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let el = &self.elements[e];
        let mut c = [0.0; 2];
        for &n in &el[..3] {
            c[0] += self.nodes[n][0] / 3.0;
            c[1] += self.nodes[n][1] / 3.0;
        }
        c
    }

    pub fn pressure_edges(&self) -> impl Iterator<Item = &BoundaryEdge> {
        self.pressure_loops.iter().flatten()
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, _, b] = edge.nodes;
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Outline edges whose three nodes all satisfy `pred`.
    pub fn outline_edges_where(&self, pred: impl Fn([f64; 2]) -> bool) -> Vec<BoundaryEdge> {
        self.outline_edges
            .iter()
            .filter(|e| e.nodes.iter().all(|&n| pred(self.nodes[n])))
            .copied()
            .collect()
    }

    /// Nodes whose coordinates satisfy `pred`.
    pub fn nodes_where(&self, pred: impl Fn([f64; 2]) -> bool) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| pred(self.nodes[n])).collect()
    }

    pub fn boundary_sets(&self) -> Result<BoundarySets> {
        if self.fixed_end.is_empty() {
            return Err(Error::Geometry("fixed_end node set is empty".into()));
        }
        if self.moving_end.is_empty() {
            return Err(Error::Geometry("moving_end node set is empty".into()));
        }
        Ok(BoundarySets {
            fixed_end: self.fixed_end.clone(),
            moving_end: self.moving_end.clone(),
            pressure_edges: self.pressure_edges().copied().collect(),
        })
    }

    /// Writes the `pneusim-mesh v1` text format.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "pneusim-mesh v1").unwrap();
        writeln!(s, "nodes {}", self.node_count()).unwrap();
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(s, "{i} {:?} {:?}", p[0], p[1]).unwrap();
        }
        writeln!(s, "elements {}", self.element_count()).unwrap();
        for (i, (e, t)) in self.elements.iter().zip(&self.regions).enumerate() {
            writeln!(s, "{i} {} {} {} {} {} {} {t}", e[0], e[1], e[2], e[3], e[4], e[5]).unwrap();
        }
        for (name, set) in [("fixed_end", &self.fixed_end), ("moving_end", &self.moving_end)] {
            writeln!(s, "{name} {}", set.len()).unwrap();
            let line: Vec<String> = set.iter().map(|n| n.to_string()).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        let n_pe: usize = self.pressure_loops.iter().map(Vec::len).sum();
        writeln!(s, "pressure_edges {n_pe}").unwrap();
        for (l, lp) in self.pressure_loops.iter().enumerate() {
            for e in lp {
                writeln!(s, "{l} {} {}", e.element, e.local_edge).unwrap();
            }
        }
        writeln!(s, "outline_edges {}", self.outline_edges.len()).unwrap();
        for e in &self.outline_edges {
            writeln!(s, "{} {}", e.element, e.local_edge).unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }

    /// Reads the `pneusim-mesh v1` text format.
    pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
        let bad = |msg: &str| Error::Meshing(format!("mesh file: {msg}"));
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        let mut it = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
        let mut next = || it.next().ok_or_else(|| bad("unexpected end of file"));
        if next()? != "pneusim-mesh v1" {
            return Err(bad("missing 'pneusim-mesh v1' header"));
        }
        fn count(line: &str, key: &str) -> Option<usize> {
            line.strip_prefix(key)?.trim().parse().ok()
        }
        fn fields<T: std::str::FromStr>(line: &str) -> Option<Vec<T>> {
            line.split_whitespace().map(|t| t.parse().ok()).collect()
        }

        let n = count(next()?, "nodes").ok_or_else(|| bad("expected 'nodes N'"))?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let v: Vec<f64> = fields(next()?).ok_or_else(|| bad("bad node line"))?;
            if v.len() != 3 {
                return Err(bad("node line needs 'id y z'"));
            }
            nodes.push([v[1], v[2]]);
        }
        let m = count(next()?, "elements").ok_or_else(|| bad("expected 'elements M'"))?;
        let mut elements = Vec::with_capacity(m);
        let mut regions = Vec::with_capacity(m);
        for _ in 0..m {
            let line = next()?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 8 {
                return Err(bad("element line needs 'id n1..n6 region'"));
            }
            let mut el = [0usize; 6];
            for k in 0..6 {
                el[k] = parts[k + 1].parse().map_err(|_| bad("bad node index"))?;
                if el[k] >= n {
                    return Err(bad("node index out of range"));
                }
            }
            elements.push(el);
            regions.push(parts[7].parse()?);
        }
        let mut read_set = |key: &str| -> Result<Vec<usize>> {
            let k = count(next()?, key).ok_or_else(|| bad(&format!("expected '{key} K'")))?;
            let v: Vec<usize> = if k == 0 {
                vec![]
            } else {
                fields(next()?).ok_or_else(|| bad("bad index list"))?
            };
            if v.len() != k {
                return Err(bad(&format!("{key} count mismatch")));
            }
            Ok(v)
        };
        let fixed_end = read_set("fixed_end")?;
        let moving_end = read_set("moving_end")?;
        let make_edge = |e: usize, le: usize| -> Result<BoundaryEdge> {
            if e >= m || le > 2 {
                return Err(bad("edge reference out of range"));
            }
            let en = EDGE_NODES[le];
            Ok(BoundaryEdge {
                element: e,
                local_edge: le,
                nodes: en.map(|k| elements[e][k]),
            })
        };
        let k = count(next()?, "pressure_edges").ok_or_else(|| bad("expected 'pressure_edges K'"))?;
        let mut pressure_loops: Vec<Vec<BoundaryEdge>> = Vec::new();
        for _ in 0..k {
            let v: Vec<usize> = fields(next()?).ok_or_else(|| bad("bad pressure edge"))?;
            if v.len() != 3 {
                return Err(bad("pressure edge needs 'loop element edge'"));
            }
            if v[0] == pressure_loops.len() {
                pressure_loops.push(Vec::new());
            }
            let lp = pressure_loops.get_mut(v[0]).ok_or_else(|| bad("loops out of order"))?;
            lp.push(make_edge(v[1], v[2])?);
        }
        let k = count(next()?, "outline_edges").ok_or_else(|| bad("expected 'outline_edges K'"))?;
        let mut outline_edges = Vec::with_capacity(k);
        for _ in 0..k {
            let v: Vec<usize> = fields(next()?).ok_or_else(|| bad("bad outline edge"))?;
            if v.len() != 2 {
                return Err(bad("outline edge needs 'element edge'"));
            }
            outline_edges.push(make_edge(v[0], v[1])?);
        }
        Ok(Mesh {
            nodes,
            elements,
            regions,
            fixed_end,
            moving_end,
            pressure_loops,
            outline_edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelMode;

    fn unit_square(h: f64) -> Mesh {
        mesh_domain(
            &RectDomain::rectangle(Rect::new(0.0, 1.0, 0.0, 1.0), RegionTag::Body),
            h,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_edges_and_orientation() {
        let m = unit_square(0.5);
        assert_eq!(m.element_count(), 8);
        assert_eq!(m.node_count(), 25);
        assert!(m.outline_edges.iter().all(|e| m.edge_length(e) <= 0.5 + 1e-12));
        assert!((0..m.element_count()).all(|e| m.element_area(e) > 0.0));
        assert!((m.area() - 1.0).abs() < 1e-14);
        assert_eq!(m.outline_edges.len(), 8);
        assert!(m.pressure_loops.is_empty());
    }

    #[test]
    fn default_mesh_sets() {
        let g = PneuNetGeometry::default();
        let m = generate_mesh(&g, 2.5).unwrap();
        let sets = m.boundary_sets().unwrap();
        assert!(sets.fixed_end.len() >= 3);
        assert!(sets.fixed_end.iter().all(|&n| m.nodes[n][0] == 0.0));
        let y = m.nodes[sets.moving_end[0]][0];
        assert_eq!(y, 76.0);
        assert!(sets.moving_end.iter().all(|&n| m.nodes[n][0] == y));
        assert_eq!(m.pressure_loops.len(), 11);
        let cs = g.build_cross_section().unwrap();
        assert!((m.area() - cs.area()).abs() < 1e-6 * cs.area());
        for k in 1..11 {
            assert!(m.regions.contains(&RegionTag::InteriorWall(k)));
        }
    }

    #[test]
    fn in_plane_channel_joins_cavities() {
        let g = PneuNetGeometry {
            channel_mode: ChannelMode::InPlane,
            ..PneuNetGeometry::default()
        };
        let m = generate_mesh(&g, 2.5).unwrap();
        assert_eq!(m.pressure_loops.len(), 1);
        let cs = g.build_cross_section().unwrap();
        assert!((m.area() - cs.area()).abs() < 1e-6 * cs.area());
    }

    #[test]
    fn single_chamber_loop_is_a_rectangle_with_channel() {
        let g = PneuNetGeometry {
            n_chambers: 1,
            chamber_width: 1.0,
            chamber_height: 1.0,
            wall_thickness: 1.0,
            top_thickness: 1.0,
            channel_height: 0.5,
            base_thickness: 1.0,
            limiting_layer_thickness: 0.2,
            end_cap_length: 1.0,
            channel_mode: ChannelMode::InPlane,
        };
        let m = generate_mesh(&g, 0.25).unwrap();
        assert_eq!(m.pressure_loops.len(), 1);
        let perimeter: f64 = m.pressure_edges().map(|e| m.edge_length(e)).sum();
        assert!((perimeter - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sliver_is_reported() {
        let g = PneuNetGeometry::default();
        let err = generate_mesh(&g, 5.0).unwrap_err();
        assert!(err.to_string().contains("reduce target_h"), "{err}");
    }

    #[test]
    fn refinement_growth_and_topology() {
        let g = PneuNetGeometry::default();
        let coarse = generate_mesh(&g, 2.5).unwrap();
        let fine = generate_mesh(&g, 1.25).unwrap();
        let ratio = fine.element_count() as f64 / coarse.element_count() as f64;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        assert_eq!(coarse.pressure_loops.len(), fine.pressure_loops.len());
        let y = |m: &Mesh, s: &[usize]| m.nodes[s[0]][0];
        assert_eq!(y(&coarse, &coarse.moving_end), y(&fine, &fine.moving_end));
    }

    #[test]
    fn text_round_trip() {
        let m = generate_mesh(&PneuNetGeometry::default(), 2.5).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
