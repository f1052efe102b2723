//! Structured triangle meshes for the benchmark geometries.
//!
//! Quads are split along alternating diagonals so that neither conjugate
//! shear-band orientation is favored by the mesh. All elements are
//! counterclockwise.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub node_tags: BTreeMap<String, Vec<usize>>,
    /// Boundary edges per tag, oriented as traversed by their owner element
    /// (counterclockwise, so the outward normal is the right-hand side).
    pub edge_tags: BTreeMap<String, Vec<[usize; 2]>>,
    pub region_tags: BTreeMap<String, Vec<usize>>,
}

/// Optional refinement band `y0 <= y <= y1` resolved with element size `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineBand {
    pub y0: f64,
    pub y1: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSpec {
    /// Total width of the domain (m).
    pub width: f64,
    /// Height of the slope (m).
    pub height: f64,
    /// x of the crest corner; equal to `height` for a 1:1 slope from the toe
    /// at the origin.
    pub crest_x: f64,
    /// Footing span on the crest, `[x0, x1]`.
    pub footing: [f64; 2],
    /// Rectangle `[x0, y0, x1, y1]` tagged `damage_suppressed`.
    pub suppressed: Option<[f64; 4]>,
}

impl SlopeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0
            && self.height > 0.0
            && self.crest_x > 0.0
            && self.crest_x < self.width)
        {
            return Err(Error::Mesh("inconsistent slope profile".into()));
        }
        if !(self.footing[0] >= self.crest_x
            && self.footing[1] > self.footing[0]
            && self.footing[1] <= self.width)
        {
            return Err(Error::Mesh("footing must lie on the crest".into()));
        }
        Ok(())
    }
}

impl Mesh {
    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e];
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[c][0]) / 3.0,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[c][1]) / 3.0,
        ]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// All boundary edges (edges owned by exactly one element), in the owner
    /// element's traversal order.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
        for el in &self.elements {
            for k in 0..3 {
                let a = el[k];
                let b = el[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = count.entry(key).or_insert((0, [a, b]));
                entry.0 += 1;
            }
        }
        count
            .into_values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, e)| e)
            .collect()
    }

    /// Structural invariants: positive areas, valid indices, every edge on at
    /// most two elements and tags referencing valid entities.
    pub fn check(&self) -> Result<()> {
        for (e, el) in self.elements.iter().enumerate() {
            for &n in el {
                if n >= self.nodes.len() {
                    return Err(Error::Mesh(format!("element {e} references node {n}")));
                }
            }
            let area = self.element_area(e);
            if area <= 0.0 {
                return Err(Error::Mesh(format!(
                    "element {e} has non-positive area {area:.3e}"
                )));
            }
        }
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for el in &self.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some(((a, b), n)) = edge_count.iter().find(|(_, &n)| n > 2) {
            return Err(Error::Mesh(format!("edge ({a},{b}) shared by {n} elements")));
        }
        for (tag, nodes) in &self.node_tags {
            if nodes.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::Mesh(format!("node tag `{tag}` out of range")));
            }
        }
        for (tag, elems) in &self.region_tags {
            if elems.iter().any(|&e| e >= self.elements.len()) {
                return Err(Error::Mesh(format!("region tag `{tag}` out of range")));
            }
        }
        Ok(())
    }
}

/// Splits the quad (bl, br, tr, tl) into two counterclockwise triangles.
/// Equal diagonals alternate by cell parity so neither band orientation is
/// favored; distorted quads use the shorter diagonal.
fn split_quad(
    nodes: &[[f64; 2]],
    q: [usize; 4],
    i: usize,
    j: usize,
    elements: &mut Vec<[usize; 3]>,
) {
    let [bl, br, tr, tl] = q;
    let d = |a: usize, b: usize| {
        let (p, r) = (nodes[a], nodes[b]);
        ((p[0] - r[0]).powi(2) + (p[1] - r[1]).powi(2)).sqrt()
    };
    let d1 = d(bl, tr);
    let d2 = d(br, tl);
    let first = if (d1 - d2).abs() <= 1e-9 * (d1 + d2) {
        (i + j) % 2 == 0
    } else {
        d1 < d2
    };
    if first {
        elements.push([bl, br, tr]);
        elements.push([bl, tr, tl]);
    } else {
        elements.push([bl, br, tl]);
        elements.push([br, tr, tl]);
    }
}

/// Row coordinates for a 1D interval graded from `h_fine` at the `fine_at`
/// end towards `h_coarse`, rescaled to fit exactly.
fn graded_ticks(length: f64, h_start: f64, h_coarse: f64, growth: f64) -> Vec<f64> {
    debug_assert!(length >= 0.0);
    if length <= h_start * 1e-9 {
        return vec![0.0];
    }
    let mut steps = Vec::new();
    let mut h = h_start;
    let mut total = 0.0;
    while total < length {
        steps.push(h.min(h_coarse));
        total += h.min(h_coarse);
        h *= growth;
    }
    let scale = length / total;
    let mut ticks = Vec::with_capacity(steps.len() + 1);
    let mut acc = 0.0;
    ticks.push(0.0);
    for s in &steps {
        acc += s * scale;
        ticks.push(acc);
    }
    *ticks.last_mut().unwrap() = length;
    ticks
}

/// Structured rectangle `[0, width] x [0, height]`, optionally refined inside
/// a horizontal band. Boundary tags: `left`, `right`, `top`, `bottom`, plus
/// the single-node tag `top_center`.
pub fn generate_rect(
    width: f64,
    height: f64,
    h: f64,
    refine_band: Option<RefineBand>,
) -> Result<Mesh> {
    if width <= 0.0 || height <= 0.0 || h <= 0.0 {
        return Err(Error::Mesh("rectangle dimensions and h must be positive".into()));
    }
    if let Some(b) = &refine_band {
        if !(b.h > 0.0 && b.y0 < b.y1 && b.y0 >= 0.0 && b.y1 <= height) {
            return Err(Error::Mesh("refinement band outside the domain".into()));
        }
    }

    // columns: uniform; the band propagates along x, so the fine size applies
    // to the whole length when a band is present
    let hx = refine_band.map(|b| b.h).unwrap_or(h);
    let nx = (width / hx).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();

    // rows: uniform band block plus graded blocks below and above
    let ys: Vec<f64> = match refine_band {
        None => {
            let ny = (height / h).ceil().max(1.0) as usize;
            (0..=ny).map(|j| height * j as f64 / ny as f64).collect()
        }
        Some(b) => {
            // ticks below the band, graded downward from y0 and reversed
            let mut ys: Vec<f64> = graded_ticks(b.y0, b.h, h, 1.5)
                .iter()
                .map(|t| b.y0 - t)
                .collect();
            ys.reverse();
            let nb = ((b.y1 - b.y0) / b.h).ceil().max(1.0) as usize;
            for j in 1..=nb {
                ys.push(b.y0 + (b.y1 - b.y0) * j as f64 / nb as f64);
            }
            for t in graded_ticks(height - b.y1, b.h, h, 1.5).iter().skip(1) {
                ys.push(b.y1 + t);
            }
            ys
        }
    };

    let ncols = xs.len();
    let nodes: Vec<[f64; 2]> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y]))
        .collect();

    let mut elements = Vec::with_capacity(2 * (ncols - 1) * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..ncols - 1 {
            let bl = j * ncols + i;
            let tl = bl + ncols;
            split_quad(&nodes, [bl, bl + 1, tl + 1, tl], i, j, &mut elements);
        }
    }

    let mut mesh = Mesh {
        nodes,
        elements,
        ..Default::default()
    };
    tag_rect_boundaries(&mut mesh, width, height);
    mesh.check()?;
    Ok(mesh)
}

/// (Re)build the `left/right/top/bottom` node and edge tags of a rectangle
/// mesh from coordinates. Also tags `top_center`.
pub fn tag_rect_boundaries(mesh: &mut Mesh, width: f64, height: f64) {
    let tol = 1e-9 * width.max(height);
    let on = |v: f64, target: f64| (v - target).abs() <= tol;
    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (n, p) in mesh.nodes.iter().enumerate() {
        if on(p[0], 0.0) {
            tags.entry("left".into()).or_default().push(n);
        }
        if on(p[0], width) {
            tags.entry("right".into()).or_default().push(n);
        }
        if on(p[1], 0.0) {
            tags.entry("bottom".into()).or_default().push(n);
        }
        if on(p[1], height) {
            tags.entry("top".into()).or_default().push(n);
        }
    }
    let center = mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| on(p[1], height))
        .min_by(|(_, a), (_, b)| {
            (a[0] - width / 2.0)
                .abs()
                .partial_cmp(&(b[0] - width / 2.0).abs())
                .unwrap()
        })
        .map(|(n, _)| n);
    if let Some(c) = center {
        tags.insert("top_center".into(), vec![c]);
    }
    mesh.node_tags = tags;

    let mut edge_tags: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
    for e in mesh.boundary_edges() {
        let (pa, pb) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        let tag = if on(pa[0], 0.0) && on(pb[0], 0.0) {
            Some("left")
        } else if on(pa[0], width) && on(pb[0], width) {
            Some("right")
        } else if on(pa[1], 0.0) && on(pb[1], 0.0) {
            Some("bottom")
        } else if on(pa[1], height) && on(pb[1], height) {
            Some("top")
        } else {
            None
        };
        if let Some(t) = tag {
            edge_tags.entry(t.into()).or_default().push(e);
        }
    }
    mesh.edge_tags = edge_tags;
}

/// Carves a zero-width horizontal slit at `y = y_line` for `x <= x_end`.
/// Nodes on the line left of `x_end` are duplicated; elements above the line
/// are rewired to the copies. The slit tip is the node at `x_end`, which is
/// kept shared. Node tags are extended to the copies; edge tags must be
/// rebuilt by the caller.
pub fn carve_slit(mesh: &mut Mesh, y_line: f64, x_end: f64) -> Result<()> {
    let tol = 1e-9
        * mesh
            .nodes
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(1.0, f64::max);
    let split: Vec<usize> = mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[1] - y_line).abs() <= tol && p[0] < x_end - tol)
        .map(|(n, _)| n)
        .collect();
    if split.is_empty() {
        return Err(Error::Mesh("slit does not intersect any mesh node".into()));
    }
    let mut copy_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &n in &split {
        let id = mesh.nodes.len();
        let p = mesh.nodes[n];
        mesh.nodes.push(p);
        copy_of.insert(n, id);
    }
    for e in 0..mesh.elements.len() {
        let cy = mesh.element_centroid(e)[1];
        if cy > y_line {
            for k in 0..3 {
                if let Some(&c) = copy_of.get(&mesh.elements[e][k]) {
                    mesh.elements[e][k] = c;
                }
            }
        }
    }
    for nodes in mesh.node_tags.values_mut() {
        let mut extra: Vec<usize> = nodes
            .iter()
            .filter_map(|n| copy_of.get(n).copied())
            .collect();
        nodes.append(&mut extra);
        nodes.sort_unstable();
        nodes.dedup();
    }
    mesh.check()
}

/// Trapezoidal slope domain: toe at the origin, incline up to
/// `(crest_x, height)`, flat crest to `(width, height)`. Mapped structured
/// grid with rows optionally graded from `h_fine` at the crest. Tags:
/// `bottom`, `right`, `crest`, `slope_face`, `footing`, `footing_center`,
/// and the `damage_suppressed` region when requested.
pub fn generate_slope(spec: &SlopeSpec, h_fine: f64, h_coarse: f64) -> Result<Mesh> {
    spec.validate()?;
    if h_fine <= 0.0 || h_coarse <= 0.0 || h_fine > h_coarse {
        return Err(Error::Mesh("slope mesh sizes must satisfy 0 < h_fine <= h_coarse".into()));
    }

    // rows graded from the crest downward
    let ys: Vec<f64> = {
        let ticks = graded_ticks(spec.height, h_fine, h_coarse, 1.4);
        let mut ys: Vec<f64> = ticks.iter().map(|t| spec.height - t).collect();
        ys.reverse();
        ys
    };
    let nx = (spec.width / h_coarse).ceil().max(2.0) as usize;

    let ncols = nx + 1;
    let mut nodes = Vec::with_capacity(ys.len() * ncols);
    for &y in &ys {
        // left boundary follows the incline: x_left = crest_x * y / height
        let x_left = spec.crest_x * y / spec.height;
        for i in 0..=nx {
            let x = x_left + (spec.width - x_left) * i as f64 / nx as f64;
            nodes.push([x, y]);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..nx {
            let bl = j * ncols + i;
            let tl = bl + ncols;
            split_quad(&nodes, [bl, bl + 1, tl + 1, tl], i, j, &mut elements);
        }
    }

    let mut mesh = Mesh {
        nodes,
        elements,
        ..Default::default()
    };

    let tol = 1e-9 * spec.width.max(spec.height);
    let mut tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (n, p) in mesh.nodes.iter().enumerate() {
        let x_left = spec.crest_x * p[1] / spec.height;
        if (p[1]).abs() <= tol {
            tags.entry("bottom".into()).or_default().push(n);
        }
        if (p[0] - spec.width).abs() <= tol {
            tags.entry("right".into()).or_default().push(n);
        }
        if (p[1] - spec.height).abs() <= tol {
            tags.entry("crest".into()).or_default().push(n);
            if p[0] >= spec.footing[0] - tol && p[0] <= spec.footing[1] + tol {
                tags.entry("footing".into()).or_default().push(n);
            }
        }
        if (p[0] - x_left).abs() <= tol && p[1] > tol && p[1] < spec.height - tol {
            tags.entry("slope_face".into()).or_default().push(n);
        }
    }
    let fc = (spec.footing[0] + spec.footing[1]) / 2.0;
    if let Some(center) = tags.get("footing").and_then(|f| {
        f.iter()
            .min_by(|&&a, &&b| {
                (mesh.nodes[a][0] - fc)
                    .abs()
                    .partial_cmp(&(mesh.nodes[b][0] - fc).abs())
                    .unwrap()
            })
            .copied()
    }) {
        tags.insert("footing_center".into(), vec![center]);
    }
    mesh.node_tags = tags;

    let mut edge_tags: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
    for e in mesh.boundary_edges() {
        let (pa, pb) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        if pa[1].abs() <= tol && pb[1].abs() <= tol {
            edge_tags.entry("bottom".into()).or_default().push(e);
        } else if (pa[0] - spec.width).abs() <= tol && (pb[0] - spec.width).abs() <= tol {
            edge_tags.entry("right".into()).or_default().push(e);
        }
    }
    mesh.edge_tags = edge_tags;

    if let Some(rect) = spec.suppressed {
        let ids: Vec<usize> = (0..mesh.elements.len())
            .filter(|&e| {
                let c = mesh.element_centroid(e);
                c[0] >= rect[0] && c[0] <= rect[2] && c[1] >= rect[1] && c[1] <= rect[3]
            })
            .collect();
        mesh.region_tags.insert("damage_suppressed".into(), ids);
    }

    mesh.check()?;
    Ok(mesh)
}

/// Minimal triangle quality: inradius over circumradius (equilateral = 0.5).
pub fn element_quality(mesh: &Mesh, e: usize) -> f64 {
    let [na, nb, nc] = mesh.elements[e];
    let (pa, pb, pc) = (mesh.nodes[na], mesh.nodes[nb], mesh.nodes[nc]);
    let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let (a, b, c) = (d(pb, pc), d(pa, pc), d(pa, pb));
    let s = 0.5 * (a + b + c);
    let area = mesh.element_area(e);
    let inradius = area / s;
    let circum = a * b * c / (4.0 * area);
    inradius / circum
}

/// Plain-text mesh serialization. Grammar documented in `docs/formats.md`.
pub fn write_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("mesh v1\n");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(s, "{} {} {}", e[0], e[1], e[2]);
    }
    for (tag, nodes) in &mesh.node_tags {
        let _ = writeln!(s, "nodetag {} {}", tag, nodes.len());
        for n in nodes {
            let _ = writeln!(s, "{n}");
        }
    }
    for (tag, edges) in &mesh.edge_tags {
        let _ = writeln!(s, "edgetag {} {}", tag, edges.len());
        for e in edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
    }
    for (tag, elems) in &mesh.region_tags {
        let _ = writeln!(s, "regiontag {} {}", tag, elems.len());
        for e in elems {
            let _ = writeln!(s, "{e}");
        }
    }
    s.push_str("end\n");
    s
}

pub fn read_text(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate();
    let mut mesh = Mesh::default();
    let bad = |line: usize, msg: &str| Error::Parse {
        line: line + 1,
        column: 1,
        message: msg.to_string(),
    };
    let (ln, header) = lines.next().ok_or_else(|| bad(0, "empty mesh file"))?;
    if header.trim() != "mesh v1" {
        return Err(bad(ln, "expected `mesh v1` header"));
    }
    while let Some((ln, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "end" {
            mesh.check()?;
            return Ok(mesh);
        }
        let mut parts = line.split_whitespace();
        let kw = parts.next().unwrap();
        let block = match kw {
            "nodes" | "elements" => {
                let n: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(ln, "expected a count"))?;
                (kw.to_string(), String::new(), n)
            }
            "nodetag" | "edgetag" | "regiontag" => {
                let name = parts.next().ok_or_else(|| bad(ln, "expected tag name"))?;
                let n: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(ln, "expected a count"))?;
                (kw.to_string(), name.to_string(), n)
            }
            _ => return Err(bad(ln, &format!("unknown keyword `{kw}`"))),
        };
        {
            let (kind, name, count) = block;
            for _ in 0..count {
                let (ln2, row) = lines
                    .next()
                    .ok_or_else(|| bad(ln, "unexpected end of file in block"))?;
                let vals: Vec<&str> = row.split_whitespace().collect();
                match kind.as_str() {
                    "nodes" => {
                        if vals.len() != 2 {
                            return Err(bad(ln2, "node line needs two coordinates"));
                        }
                        let x: f64 = vals[0].parse().map_err(|_| bad(ln2, "bad coordinate"))?;
                        let y: f64 = vals[1].parse().map_err(|_| bad(ln2, "bad coordinate"))?;
                        mesh.nodes.push([x, y]);
                    }
                    "elements" => {
                        if vals.len() != 3 {
                            return Err(bad(ln2, "element line needs three node ids"));
                        }
                        let mut el = [0usize; 3];
                        for (k, v) in vals.iter().enumerate() {
                            el[k] = v.parse().map_err(|_| bad(ln2, "bad node id"))?;
                        }
                        mesh.elements.push(el);
                    }
                    "nodetag" | "regiontag" => {
                        let id: usize = vals[0].parse().map_err(|_| bad(ln2, "bad id"))?;
                        let map = if kind == "nodetag" {
                            &mut mesh.node_tags
                        } else {
                            &mut mesh.region_tags
                        };
                        map.entry(name.clone()).or_default().push(id);
                    }
                    "edgetag" => {
                        if vals.len() != 2 {
                            return Err(bad(ln2, "edge line needs two node ids"));
                        }
                        let a: usize = vals[0].parse().map_err(|_| bad(ln2, "bad id"))?;
                        let b: usize = vals[1].parse().map_err(|_| bad(ln2, "bad id"))?;
                        mesh.edge_tags.entry(name.clone()).or_default().push([a, b]);
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    Err(bad(text.lines().count(), "missing `end`"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_counts() {
        let m = generate_rect(1.0, 1.0, 0.5, None).unwrap();
        assert_eq!(m.nodes.len(), 9);
        assert_eq!(m.elements.len(), 8);
        assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn node_count_formula() {
        let m = generate_rect(0.080, 0.170, 0.002, None).unwrap();
        assert_eq!(m.nodes.len(), 41 * 86);
        assert_relative_eq!(m.total_area(), 0.080 * 0.170, max_relative = 1e-10);
    }

    #[test]
    fn band_elements_are_fine() {
        let m = generate_rect(
            0.5,
            0.1,
            0.004,
            Some(RefineBand {
                y0: 0.045,
                y1: 0.055,
                h: 0.0005,
            }),
        )
        .unwrap();
        for e in 0..m.elements.len() {
            let c = m.element_centroid(e);
            if c[1] > 0.045 && c[1] < 0.055 {
                let el = m.elements[e];
                for k in 0..3 {
                    let (a, b) = (m.nodes[el[k]], m.nodes[el[(k + 1) % 3]]);
                    let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    assert!(len <= 0.00075, "band edge of length {len}");
                }
            }
        }
        assert_relative_eq!(m.total_area(), 0.05, max_relative = 1e-10);
    }

    #[test]
    fn conforming_interior_edges() {
        let m = generate_rect(
            0.1,
            0.1,
            0.02,
            Some(RefineBand {
                y0: 0.04,
                y1: 0.06,
                h: 0.005,
            }),
        )
        .unwrap();
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for el in &m.elements {
            for k in 0..3 {
                let (a, b) = (el[k], el[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let boundary = m.boundary_edges().len();
        let interior_bad = count.values().filter(|&&n| n != 1 && n != 2).count();
        assert_eq!(interior_bad, 0);
        assert!(boundary > 0);
    }

    #[test]
    fn slit_creates_free_faces() {
        let mut m = generate_rect(0.5, 0.1, 0.01, None).unwrap();
        let nb_before = m.boundary_edges().len();
        carve_slit(&mut m, 0.05, 0.0101).unwrap();
        tag_rect_boundaries(&mut m, 0.5, 0.1);
        let nb_after = m.boundary_edges().len();
        assert!(nb_after > nb_before);
        m.check().unwrap();
        // the domain area is unchanged
        assert_relative_eq!(m.total_area(), 0.05, max_relative = 1e-12);
    }

    #[test]
    fn slope_nodes_inside_profile() {
        let spec = SlopeSpec {
            width: 2.0,
            height: 1.0,
            crest_x: 1.0,
            footing: [1.0, 1.4],
            suppressed: None,
        };
        let m = generate_slope(&spec, 0.1, 0.1).unwrap();
        for p in &m.nodes {
            let x_left = p[1];
            assert!(p[0] >= x_left - 1e-12 && p[0] <= 2.0 + 1e-12);
        }
        // area of the trapezoid: width*height - crest_x*height/2
        assert_relative_eq!(m.total_area(), 2.0 - 0.5, max_relative = 1e-10);
    }

    #[test]
    fn slope_footing_tag_extent() {
        let spec = SlopeSpec {
            width: 20.0,
            height: 10.0,
            crest_x: 10.0,
            footing: [10.0, 14.0],
            suppressed: None,
        };
        let m = generate_slope(&spec, 0.2, 0.2).unwrap();
        let f = &m.node_tags["footing"];
        let xs: Vec<f64> = f.iter().map(|&n| m.nodes[n][0]).collect();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max - min, 4.0);
    }

    #[test]
    fn slope_graded_quality() {
        let spec = SlopeSpec {
            width: 20.0,
            height: 10.0,
            crest_x: 10.0,
            footing: [10.0, 14.0],
            suppressed: Some([8.0, 8.0, 11.0, 10.0]),
        };
        let m = generate_slope(&spec, 0.05, 0.2).unwrap();
        let min_q = (0..m.elements.len())
            .map(|e| element_quality(&m, e))
            .fold(f64::INFINITY, f64::min);
        assert!(min_q > 0.2, "min quality {min_q}");
        assert!(!m.region_tags["damage_suppressed"].is_empty());
    }

    #[test]
    fn text_round_trip() {
        let mut m = generate_rect(0.2, 0.1, 0.05, None).unwrap();
        m.region_tags.insert("blob".into(), vec![0, 3]);
        let text = write_text(&m);
        let m2 = read_text(&text).unwrap();
        assert_eq!(m.nodes.len(), m2.nodes.len());
        assert_eq!(m.elements, m2.elements);
        assert_eq!(m.node_tags, m2.node_tags);
        assert_eq!(m.edge_tags, m2.edge_tags);
        assert_eq!(m.region_tags, m2.region_tags);
    }
}
