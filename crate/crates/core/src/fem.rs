//! Spatial discretization: linear triangles with one-point quadrature for
//! both the displacement and the phase field, assembled into reduced sparse
//! systems with Dirichlet dofs eliminated symmetrically.

use crate::constitutive::{degradation_with_curvature, MaterialParams, PointState, PointUpdate};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::SymTensor;

pub const SCATTER_SKIP: u32 = u32::MAX;

/// Dof component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comp {
    X,
    Y,
}

impl Comp {
    pub fn index(self) -> usize {
        match self {
            Comp::X => 0,
            Comp::Y => 1,
        }
    }
}

/// Prescribed value of a constrained dof as a function of pseudo-time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcValue {
    Fixed(f64),
    /// `value(t) = t * target`
    Ramp { target: f64 },
    /// `value(t) = u_at_phase_start + t * target`
    RampRelative { target: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBc {
    pub tag: String,
    pub comp: Comp,
    pub value: BcValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TractionKind {
    /// Compression-positive pressure along the inward normal.
    NormalPressure(f64),
    /// Constant traction vector (Pa).
    Vector([f64; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TractionBc {
    pub tag: String,
    pub kind: TractionKind,
}

/// Precomputed element geometry: area and shape-function gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElemGeo {
    pub area: f64,
    /// `dndx[i] = [dN_i/dx, dN_i/dy]`
    pub dndx: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct FemModel {
    pub mesh: Mesh,
    pub geo: Vec<ElemGeo>,
}

impl FemModel {
    pub fn new(mesh: Mesh) -> Result<Self> {
        mesh.check()?;
        let geo = (0..mesh.elements.len())
            .map(|e| {
                let [a, b, c] = mesh.elements[e];
                let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
                let area = mesh.element_area(e);
                let inv2a = 1.0 / (2.0 * area);
                ElemGeo {
                    area,
                    dndx: [
                        [(pb[1] - pc[1]) * inv2a, (pc[0] - pb[0]) * inv2a],
                        [(pc[1] - pa[1]) * inv2a, (pa[0] - pc[0]) * inv2a],
                        [(pa[1] - pb[1]) * inv2a, (pb[0] - pa[0]) * inv2a],
                    ],
                }
            })
            .collect();
        Ok(Self { mesh, geo })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.elements.len()
    }

    /// Strain at the single quadrature point of element `e`.
    pub fn element_strain(&self, e: usize, u: &[f64]) -> SymTensor {
        let el = self.mesh.elements[e];
        let g = &self.geo[e];
        let mut exx = 0.0;
        let mut eyy = 0.0;
        let mut gxy = 0.0;
        for k in 0..3 {
            let ux = u[2 * el[k]];
            let uy = u[2 * el[k] + 1];
            exx += ux * g.dndx[k][0];
            eyy += uy * g.dndx[k][1];
            gxy += ux * g.dndx[k][1] + uy * g.dndx[k][0];
        }
        SymTensor::plane(exx, eyy, 0.5 * gxy)
    }
}

/// Sparsity pattern of a reduced (free-dof) system together with the
/// element-to-value scatter map.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    /// Per element, `blk*blk` CSC value indices (`SCATTER_SKIP` when the pair
    /// involves a constrained dof).
    pub scatter: Vec<u32>,
    pub blk: usize,
}

impl Pattern {
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }
}

/// Reduced linear system over the free dofs.
pub struct SparseSystem<'a> {
    pub pattern: &'a Pattern,
    pub values: &'a [f64],
    pub rhs: &'a [f64],
}

/// Dof bookkeeping for one constraint phase.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_nodes: usize,
    /// dof -> free index, or -1 when constrained. Length `2 * n_nodes`.
    pub u_free: Vec<i64>,
    pub n_u_free: usize,
    /// Constrained dofs with their value programs, sorted by dof.
    pub u_constrained: Vec<(usize, BcValue)>,
    /// node -> free index in the phase system, or -1 when masked to d = 0.
    pub d_free: Vec<i64>,
    pub n_d_free: usize,
}

impl DofMap {
    pub fn build(mesh: &Mesh, bcs: &[DirichletBc], phase_fixed_nodes: &[usize]) -> Result<Self> {
        let nn = mesh.nodes.len();
        // later constraints override earlier ones on the same dof
        let mut prescribed: Vec<Option<BcValue>> = vec![None; 2 * nn];
        for bc in bcs {
            let nodes = mesh
                .node_tags
                .get(&bc.tag)
                .ok_or_else(|| Error::Contract(format!("no node tag `{}`", bc.tag)))?;
            for &n in nodes {
                prescribed[2 * n + bc.comp.index()] = Some(bc.value);
            }
        }
        let mut u_free = vec![-1i64; 2 * nn];
        let mut u_constrained = Vec::new();
        let mut next = 0i64;
        for (dof, p) in prescribed.iter().enumerate() {
            match p {
                Some(v) => u_constrained.push((dof, *v)),
                None => {
                    u_free[dof] = next;
                    next += 1;
                }
            }
        }
        let n_u_free = next as usize;

        let mut d_free = vec![0i64; nn];
        for &n in phase_fixed_nodes {
            if n >= nn {
                return Err(Error::Contract(format!("masked node {n} out of range")));
            }
            d_free[n] = -1;
        }
        let mut next = 0i64;
        for f in d_free.iter_mut() {
            if *f == 0 {
                *f = next;
                next += 1;
            }
        }
        let n_d_free = next as usize;
        Ok(Self {
            n_nodes: nn,
            u_free,
            n_u_free,
            u_constrained,
            d_free,
            n_d_free,
        })
    }

    /// Prescribed displacement values at pseudo-time `t`. `base` holds the
    /// phase-start displacement for relative ramps.
    pub fn bc_values(&self, t: f64, base: &[f64]) -> Vec<(usize, f64)> {
        self.u_constrained
            .iter()
            .map(|&(dof, v)| {
                let val = match v {
                    BcValue::Fixed(x) => x,
                    BcValue::Ramp { target } => t * target,
                    BcValue::RampRelative { target } => base[dof] + t * target,
                };
                (dof, val)
            })
            .collect()
    }
}

fn node_adjacency(mesh: &Mesh) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::with_capacity(8); mesh.nodes.len()];
    for el in &mesh.elements {
        for &a in el {
            for &b in el {
                adj[a].push(b as u32);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Builds the reduced displacement pattern (2 dofs per node).
pub fn build_u_pattern(model: &FemModel, map: &DofMap) -> Pattern {
    let adj = node_adjacency(&model.mesh);
    let n = map.n_u_free;
    let mut col_ptr = vec![0usize; n + 1];
    for (node, list) in adj.iter().enumerate() {
        for comp in 0..2 {
            let col = map.u_free[2 * node + comp];
            if col < 0 {
                continue;
            }
            let rows = list
                .iter()
                .map(|&m| {
                    (map.u_free[2 * m as usize] >= 0) as usize
                        + (map.u_free[2 * m as usize + 1] >= 0) as usize
                })
                .sum();
            col_ptr[col as usize + 1] = rows;
        }
    }
    for i in 0..n {
        col_ptr[i + 1] += col_ptr[i];
    }
    let mut row_idx = vec![0usize; col_ptr[n]];
    for (node, list) in adj.iter().enumerate() {
        for comp in 0..2 {
            let col = map.u_free[2 * node + comp];
            if col < 0 {
                continue;
            }
            let mut k = col_ptr[col as usize];
            for &m in list {
                for r in 0..2 {
                    let row = map.u_free[2 * m as usize + r];
                    if row >= 0 {
                        row_idx[k] = row as usize;
                        k += 1;
                    }
                }
            }
            debug_assert_eq!(k, col_ptr[col as usize + 1]);
        }
    }

    let find = |col: usize, row: usize| -> u32 {
        let lo = col_ptr[col];
        let hi = col_ptr[col + 1];
        match row_idx[lo..hi].binary_search(&row) {
            Ok(p) => (lo + p) as u32,
            Err(_) => unreachable!("row {row} absent from column {col}"),
        }
    };
    let mut scatter = Vec::with_capacity(model.n_elements() * 36);
    for el in &model.mesh.elements {
        let dofs = [
            2 * el[0],
            2 * el[0] + 1,
            2 * el[1],
            2 * el[1] + 1,
            2 * el[2],
            2 * el[2] + 1,
        ];
        for &ga in &dofs {
            for &gb in &dofs {
                let (fa, fb) = (map.u_free[ga], map.u_free[gb]);
                if fa >= 0 && fb >= 0 {
                    scatter.push(find(fb as usize, fa as usize));
                } else {
                    scatter.push(SCATTER_SKIP);
                }
            }
        }
    }
    Pattern {
        n,
        col_ptr,
        row_idx,
        scatter,
        blk: 6,
    }
}

/// Builds the reduced phase-field pattern (1 dof per node).
pub fn build_d_pattern(model: &FemModel, map: &DofMap) -> Pattern {
    let adj = node_adjacency(&model.mesh);
    let n = map.n_d_free;
    let mut col_ptr = vec![0usize; n + 1];
    for (node, list) in adj.iter().enumerate() {
        let col = map.d_free[node];
        if col < 0 {
            continue;
        }
        col_ptr[col as usize + 1] = list
            .iter()
            .filter(|&&m| map.d_free[m as usize] >= 0)
            .count();
    }
    for i in 0..n {
        col_ptr[i + 1] += col_ptr[i];
    }
    let mut row_idx = vec![0usize; col_ptr[n]];
    for (node, list) in adj.iter().enumerate() {
        let col = map.d_free[node];
        if col < 0 {
            continue;
        }
        let mut k = col_ptr[col as usize];
        for &m in list {
            let row = map.d_free[m as usize];
            if row >= 0 {
                row_idx[k] = row as usize;
                k += 1;
            }
        }
    }
    let find = |col: usize, row: usize| -> u32 {
        let lo = col_ptr[col];
        let hi = col_ptr[col + 1];
        match row_idx[lo..hi].binary_search(&row) {
            Ok(p) => (lo + p) as u32,
            Err(_) => unreachable!(),
        }
    };
    let mut scatter = Vec::with_capacity(model.n_elements() * 9);
    for el in &model.mesh.elements {
        for &a in el {
            for &b in el {
                let (fa, fb) = (map.d_free[a], map.d_free[b]);
                if fa >= 0 && fb >= 0 {
                    scatter.push(find(fb as usize, fa as usize));
                } else {
                    scatter.push(SCATTER_SKIP);
                }
            }
        }
    }
    Pattern {
        n,
        col_ptr,
        row_idx,
        scatter,
        blk: 3,
    }
}

/// Constant external force vector (edge tractions plus body force), over all
/// displacement dofs.
pub fn assemble_external(
    model: &FemModel,
    tractions: &[TractionBc],
    body_force: [f64; 2],
) -> Result<Vec<f64>> {
    let mut f = vec![0.0; 2 * model.n_nodes()];
    for tr in tractions {
        let edges = model
            .mesh
            .edge_tags
            .get(&tr.tag)
            .ok_or_else(|| Error::Contract(format!("no edge tag `{}`", tr.tag)))?;
        for e in edges {
            let (pa, pb) = (model.mesh.nodes[e[0]], model.mesh.nodes[e[1]]);
            let dx = pb[0] - pa[0];
            let dy = pb[1] - pa[1];
            let len = (dx * dx + dy * dy).sqrt();
            let t = match tr.kind {
                // counterclockwise traversal: the outward normal is (dy, -dx)
                TractionKind::NormalPressure(p) => [-p * dy / len, p * dx / len],
                TractionKind::Vector(v) => v,
            };
            for &n in e {
                f[2 * n] += 0.5 * len * t[0];
                f[2 * n + 1] += 0.5 * len * t[1];
            }
        }
    }
    if body_force != [0.0; 2] {
        for (e, el) in model.mesh.elements.iter().enumerate() {
            let w = model.geo[e].area / 3.0;
            for &n in el {
                f[2 * n] += w * body_force[0];
                f[2 * n + 1] += w * body_force[1];
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyStats {
    /// Largest centroid damage seen.
    pub max_d: f64,
    /// Points whose strengths were clamped by tensile mean stress.
    pub tensile_clamped: usize,
}

/// Assembles the displacement Newton system at the current state: tangent
/// values (pattern order), right-hand side over free dofs, and the full
/// internal force vector. `delta_uc` carries the increment of prescribed
/// values, nonzero only at constrained dofs. The degradation threshold
/// psi_c is frozen from `points` (falling back to the current strain when a
/// point was never initialized).
#[allow(clippy::too_many_arguments)]
pub fn assemble_displacement(
    model: &FemModel,
    map: &DofMap,
    pattern: &Pattern,
    u: &[f64],
    d: &[f64],
    prev_slip: &[f64],
    points: &[PointState],
    params: &MaterialParams,
    f_ext: &[f64],
    delta_uc: &[f64],
    values: &mut [f64],
    rhs: &mut [f64],
    f_int: &mut [f64],
) -> Result<AssemblyStats> {
    values.fill(0.0);
    f_int.fill(0.0);
    let mut stats = AssemblyStats::default();
    let mut rhs_fix = vec![0.0; map.n_u_free];

    for (e, el) in model.mesh.elements.iter().enumerate() {
        let g = &model.geo[e];
        let eps = model.element_strain(e, u);
        let d_c = ((d[el[0]] + d[el[1]] + d[el[2]]) / 3.0).clamp(0.0, 1.0);
        stats.max_d = stats.max_d.max(d_c);
        let up: PointUpdate =
            crate::constitutive::update_point_frozen(eps, d_c, prev_slip[e], points[e].psi_c, params)?;
        if up.failure.tensile_clamped {
            stats.tensile_clamped += 1;
        }
        let area = g.area;
        let s = up.stress;
        let dm = up.tangent.0;
        let b: [f64; 3] = [g.dndx[0][0], g.dndx[1][0], g.dndx[2][0]];
        let c: [f64; 3] = [g.dndx[0][1], g.dndx[1][1], g.dndx[2][1]];

        let dofs = [
            2 * el[0],
            2 * el[0] + 1,
            2 * el[1],
            2 * el[1] + 1,
            2 * el[2],
            2 * el[2] + 1,
        ];
        let mut fe = [0.0f64; 6];
        for i in 0..3 {
            fe[2 * i] = area * (b[i] * s.xx + c[i] * s.xy);
            fe[2 * i + 1] = area * (c[i] * s.yy + b[i] * s.xy);
        }
        let mut ke = [[0.0f64; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                let (bi, ci, bj, cj) = (b[i], c[i], b[j], c[j]);
                ke[2 * i][2 * j] = area
                    * (bi * (dm[0][0] * bj + dm[0][2] * cj)
                        + ci * (dm[2][0] * bj + dm[2][2] * cj));
                ke[2 * i][2 * j + 1] = area
                    * (bi * (dm[0][1] * cj + dm[0][2] * bj)
                        + ci * (dm[2][1] * cj + dm[2][2] * bj));
                ke[2 * i + 1][2 * j] = area
                    * (ci * (dm[1][0] * bj + dm[1][2] * cj)
                        + bi * (dm[2][0] * bj + dm[2][2] * cj));
                ke[2 * i + 1][2 * j + 1] = area
                    * (ci * (dm[1][1] * cj + dm[1][2] * bj)
                        + bi * (dm[2][1] * cj + dm[2][2] * bj));
            }
        }
        let smap = &pattern.scatter[36 * e..36 * (e + 1)];
        for a in 0..6 {
            f_int[dofs[a]] += fe[a];
            let fa = map.u_free[dofs[a]];
            if fa < 0 {
                continue;
            }
            for bb in 0..6 {
                let vi = smap[6 * a + bb];
                if vi != SCATTER_SKIP {
                    values[vi as usize] += ke[a][bb];
                } else if map.u_free[dofs[bb]] < 0 {
                    rhs_fix[fa as usize] += ke[a][bb] * delta_uc[dofs[bb]];
                }
            }
        }
    }

    for dof in 0..2 * map.n_nodes {
        let fa = map.u_free[dof];
        if fa >= 0 {
            rhs[fa as usize] = f_ext[dof] - f_int[dof] - rhs_fix[fa as usize];
        }
    }
    Ok(stats)
}

/// Statistics from a history update pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoryStats {
    pub any_slip: bool,
    pub tensile_clamped: usize,
    pub max_h_slip: f64,
}

/// Recomputes all per-point states from the freshly solved displacement:
/// strain split, failure surface, driving force with the slip history taken
/// as `max(prev_slip, candidate)`, the critical threshold, and the damaged
/// stress at the current nodal phase field.
pub fn update_point_states(
    model: &FemModel,
    u: &[f64],
    d: &[f64],
    prev_slip: &[f64],
    params: &MaterialParams,
    points: &mut [PointState],
) -> Result<HistoryStats> {
    let mut stats = HistoryStats::default();
    for (e, el) in model.mesh.elements.iter().enumerate() {
        let eps = model.element_strain(e, u);
        let d_c = ((d[el[0]] + d[el[1]] + d[el[2]]) / 3.0).clamp(0.0, 1.0);
        let up = crate::constitutive::update_point(eps, d_c, prev_slip[e], params)?;
        if up.failure.tensile_clamped {
            stats.tensile_clamped += 1;
        }
        if up.force.h_slip > 0.0 {
            stats.any_slip = true;
        }
        stats.max_h_slip = stats.max_h_slip.max(up.force.h_slip);
        points[e] = PointState {
            history_slip: up.force.h_slip,
            h_t: up.force.h_t,
            h_plus: up.force.h_plus,
            d: d_c,
            stress: up.stress,
            psi_c: up.psi_c,
            q_hat: up.failure.q_hat,
            p: up.failure.p,
            tensile_clamped: up.failure.tensile_clamped,
        };
    }
    Ok(stats)
}

/// Assembles the phase-field Newton system at the current nodal damage with
/// the driving force frozen in `points`. With `spd_safeguard` the negative
/// part of the reaction term is dropped from the Jacobian (the residual is
/// untouched), keeping the matrix positive definite.
#[allow(clippy::too_many_arguments)]
pub fn assemble_phasefield(
    model: &FemModel,
    map: &DofMap,
    pattern: &Pattern,
    d: &[f64],
    points: &[PointState],
    params: &MaterialParams,
    spd_safeguard: bool,
    values: &mut [f64],
    rhs: &mut [f64],
) -> Result<()> {
    values.fill(0.0);
    rhs.fill(0.0);
    let m_mod = params.phase_modulus();
    let l = params.length_scale;
    let diffusion = 2.0 * m_mod * l * l;

    for (e, el) in model.mesh.elements.iter().enumerate() {
        let g = &model.geo[e];
        let area = g.area;
        let d_c = ((d[el[0]] + d[el[1]] + d[el[2]]) / 3.0).clamp(0.0, 1.0);
        let ps = &points[e];
        let (_, g1, g2) = degradation_with_curvature(d_c, m_mod, ps.psi_c, params.lorentz_p)?;
        let grad = [
            d[el[0]] * g.dndx[0][0] + d[el[1]] * g.dndx[1][0] + d[el[2]] * g.dndx[2][0],
            d[el[0]] * g.dndx[0][1] + d[el[1]] * g.dndx[1][1] + d[el[2]] * g.dndx[2][1],
        ];
        let source = area * (m_mod + g1 * ps.h_plus) / 3.0;
        let mut react = g2 * ps.h_plus * area / 9.0;
        if spd_safeguard && react < 0.0 {
            // keep the softening curvature magnitude but flip it positive;
            // the factorization stays definite and steps stay conservative
            react = -react;
        }
        let smap = &pattern.scatter[9 * e..9 * (e + 1)];
        for a in 0..3 {
            let fa = map.d_free[el[a]];
            if fa < 0 {
                continue;
            }
            let res_a =
                source + area * diffusion * (g.dndx[a][0] * grad[0] + g.dndx[a][1] * grad[1]);
            rhs[fa as usize] -= res_a;
            for bb in 0..3 {
                let vi = smap[3 * a + bb];
                if vi == SCATTER_SKIP {
                    continue;
                }
                let kab = area
                    * diffusion
                    * (g.dndx[a][0] * g.dndx[bb][0] + g.dndx[a][1] * g.dndx[bb][1])
                    + react;
                values[vi as usize] += kab;
            }
        }
    }
    Ok(())
}

/// Reaction force per unit thickness on a tagged boundary: the sum of
/// internal-force entries at the constrained dofs of the tag's nodes.
pub fn reaction_force(
    model: &FemModel,
    map: &DofMap,
    f_int: &[f64],
    tag: &str,
) -> Result<[f64; 2]> {
    let nodes = model
        .mesh
        .node_tags
        .get(tag)
        .ok_or_else(|| Error::Contract(format!("no node tag `{tag}`")))?;
    let mut r = [0.0; 2];
    for &n in nodes {
        for comp in 0..2 {
            let dof = 2 * n + comp;
            if map.u_free[dof] < 0 {
                r[comp] += f_int[dof];
            }
        }
    }
    Ok(r)
}

/// Global equilibrium gap: the worst component sum of `f_ext - f_int` over
/// free dofs, relative to the total force magnitude.
pub fn equilibrium_residual(map: &DofMap, f_int: &[f64], f_ext: &[f64]) -> f64 {
    let mut gap = [0.0f64; 2];
    let mut scale = 0.0f64;
    for dof in 0..f_int.len() {
        if map.u_free[dof] >= 0 {
            gap[dof % 2] += f_ext[dof] - f_int[dof];
        }
        scale += f_int[dof].abs().max(f_ext[dof].abs());
    }
    gap[0].abs().max(gap[1].abs()) / scale.max(1e-30)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn material() -> MaterialParams {
        MaterialParams::from_shear_poisson(10.0e6, 0.3).strength(
            40.0e3,
            15f64.to_radians(),
            0.0,
            15f64.to_radians(),
            30.0,
            2.0e-3,
        )
    }

    fn cohesionless() -> MaterialParams {
        // phi_r = c_r = 0 removes the residual partition, making the secant
        // tangent exact; the finite-difference check relies on that
        MaterialParams::from_shear_poisson(10.0e6, 0.3).strength(
            40.0e3,
            15f64.to_radians(),
            0.0,
            0.0,
            30.0,
            2.0e-3,
        )
    }

    fn dense_from_pattern(p: &Pattern, values: &[f64]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; p.n]; p.n];
        for col in 0..p.n {
            for k in p.col_ptr[col]..p.col_ptr[col + 1] {
                a[p.row_idx[k]][col] = values[k];
            }
        }
        a
    }

    #[test]
    fn element_gradients_partition_of_unity() {
        let mesh = generate_rect(1.0, 1.0, 0.5, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        for g in &model.geo {
            let sx: f64 = g.dndx.iter().map(|d| d[0]).sum();
            let sy: f64 = g.dndx.iter().map(|d| d[1]).sum();
            assert_abs_diff_eq!(sx, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sy, 0.0, epsilon = 1e-12);
            assert!(g.area > 0.0);
        }
    }

    #[test]
    fn linear_field_reproduces_exact_strain() {
        let mesh = generate_rect(
            0.3,
            0.2,
            0.05,
            Some(crate::mesh::RefineBand {
                y0: 0.08,
                y1: 0.12,
                h: 0.013,
            }),
        )
        .unwrap();
        let model = FemModel::new(mesh).unwrap();
        let (a, b, c, dd, e, f) = (1e-3, 2e-3, -0.5e-3, 0.7e-3, -1.1e-3, 0.4e-3);
        let u: Vec<f64> = model
            .mesh
            .nodes
            .iter()
            .flat_map(|p| [a + b * p[0] + c * p[1], dd + e * p[0] + f * p[1]])
            .collect();
        for el in 0..model.n_elements() {
            let eps = model.element_strain(el, &u);
            assert_relative_eq!(eps.xx, b, max_relative = 1e-10);
            assert_relative_eq!(eps.yy, f, max_relative = 1e-10);
            assert_relative_eq!(eps.xy, 0.5 * (c + e), max_relative = 1e-10);
        }
    }

    #[test]
    fn internal_force_matches_hooke() {
        let mesh = generate_rect(1.0, 1.0, 1.0, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let params = material();
        let exx = 1e-3;
        let u: Vec<f64> = model
            .mesh
            .nodes
            .iter()
            .flat_map(|p| [exx * p[0], 0.0])
            .collect();
        let map = DofMap::build(
            &model.mesh,
            &[DirichletBc {
                tag: "left".into(),
                comp: Comp::X,
                value: BcValue::Fixed(0.0),
            }],
            &[],
        )
        .unwrap();
        let pattern = build_u_pattern(&model, &map);
        let d = vec![0.0; model.n_nodes()];
        let slip = vec![0.0; model.n_elements()];
        let points = vec![crate::constitutive::PointState::default(); model.n_elements()];
        let f_ext = vec![0.0; 2 * model.n_nodes()];
        let delta = vec![0.0; 2 * model.n_nodes()];
        let mut values = vec![0.0; pattern.nnz()];
        let mut rhs = vec![0.0; map.n_u_free];
        let mut f_int = vec![0.0; 2 * model.n_nodes()];
        assemble_displacement(
            &model, &map, &pattern, &u, &d, &slip, &points, &params, &f_ext, &delta, &mut values,
            &mut rhs, &mut f_int,
        )
        .unwrap();
        // plane-strain sigma_xx = (kappa + 4mu/3) exx over a unit edge
        let sxx = (params.bulk_modulus + 4.0 * params.shear_modulus / 3.0) * exx;
        let total: f64 = model.mesh.node_tags["right"]
            .iter()
            .map(|&n| f_int[2 * n])
            .sum();
        assert_relative_eq!(total, sxx, max_relative = 1e-10);
    }

    #[test]
    fn rigid_translation_gives_zero_residual() {
        let mesh = generate_rect(0.4, 0.3, 0.1, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let params = material();
        let u: Vec<f64> = model
            .mesh
            .nodes
            .iter()
            .flat_map(|_| [1.0e-3, -2.0e-3])
            .collect();
        let map = DofMap::build(&model.mesh, &[], &[]).unwrap();
        let pattern = build_u_pattern(&model, &map);
        let d = vec![0.0; model.n_nodes()];
        let slip = vec![0.0; model.n_elements()];
        let points = vec![crate::constitutive::PointState::default(); model.n_elements()];
        let f_ext = vec![0.0; 2 * model.n_nodes()];
        let delta = f_ext.clone();
        let mut values = vec![0.0; pattern.nnz()];
        let mut rhs = vec![0.0; map.n_u_free];
        let mut f_int = vec![0.0; 2 * model.n_nodes()];
        assemble_displacement(
            &model, &map, &pattern, &u, &d, &slip, &points, &params, &f_ext, &delta, &mut values,
            &mut rhs, &mut f_int,
        )
        .unwrap();
        for r in &rhs {
            assert_abs_diff_eq!(*r, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn displacement_jacobian_matches_finite_differences() {
        let mesh = generate_rect(0.2, 0.1, 0.05, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let params = cohesionless();
        let nn = model.n_nodes();
        let map = DofMap::build(
            &model.mesh,
            &[DirichletBc {
                tag: "bottom".into(),
                comp: Comp::Y,
                value: BcValue::Fixed(0.0),
            }],
            &[],
        )
        .unwrap();
        let pattern = build_u_pattern(&model, &map);
        let mut u = vec![0.0; 2 * nn];
        let mut d = vec![0.0; nn];
        for (n, p) in model.mesh.nodes.iter().enumerate() {
            u[2 * n] = -2e-3 * p[0] + 1.3e-3 * p[1] + 5e-3 * p[0] * p[1];
            u[2 * n + 1] = -3e-3 * p[1] - 0.4e-3 * p[0];
            d[n] = 0.4 * (p[0] / 0.2) * (p[1] / 0.1);
        }
        let slip = vec![10.0; model.n_elements()];
        let mut points = vec![crate::constitutive::PointState::default(); model.n_elements()];
        update_point_states(&model, &u, &d, &slip, &params, &mut points).unwrap();
        let f_ext = vec![0.0; 2 * nn];
        let delta = vec![0.0; 2 * nn];
        let mut values = vec![0.0; pattern.nnz()];
        let mut rhs = vec![0.0; map.n_u_free];
        let mut f_int = vec![0.0; 2 * nn];
        assemble_displacement(
            &model, &map, &pattern, &u, &d, &slip, &points, &params, &f_ext, &delta, &mut values,
            &mut rhs, &mut f_int,
        )
        .unwrap();
        let k = dense_from_pattern(&pattern, &values);

        let probe = |u_mod: &[f64]| -> Vec<f64> {
            let mut v = vec![0.0; pattern.nnz()];
            let mut r = vec![0.0; map.n_u_free];
            let mut fi = vec![0.0; 2 * nn];
            assemble_displacement(
                &model, &map, &pattern, u_mod, &d, &slip, &points, &params, &f_ext, &delta,
                &mut v, &mut r, &mut fi,
            )
            .unwrap();
            r.iter().map(|x| -x).collect()
        };
        let h = 1e-8;
        let mut checked = 0;
        for dof in 0..2 * nn {
            let col = map.u_free[dof];
            if col < 0 || dof % 7 != 0 {
                continue;
            }
            let mut up = u.clone();
            up[dof] += h;
            let rp = probe(&up);
            let mut um = u.clone();
            um[dof] -= h;
            let rm = probe(&um);
            for row in 0..map.n_u_free {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                let an = k[row][col as usize];
                let scale = an.abs().max(params.shear_modulus * 1e-4);
                assert!(
                    (fd - an).abs() <= 1e-5 * scale,
                    "J[{row}][{col}] analytic {an:.6e} vs fd {fd:.6e}"
                );
            }
            checked += 1;
        }
        assert!(checked > 3);
    }

    #[test]
    fn phasefield_jacobian_matches_finite_differences() {
        let mesh = generate_rect(0.05, 0.05, 0.0125, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let params = material();
        let nn = model.n_nodes();
        let map = DofMap::build(&model.mesh, &[], &[]).unwrap();
        let d_pattern = build_d_pattern(&model, &map);
        let mut d = vec![0.0; nn];
        for (n, p) in model.mesh.nodes.iter().enumerate() {
            d[n] = 0.5 * (p[0] / 0.05) * (1.0 - p[1] / 0.05) + 0.1;
        }
        let mut points = vec![crate::constitutive::PointState::default(); model.n_elements()];
        for (e, ps) in points.iter_mut().enumerate() {
            ps.h_plus = 200.0 + e as f64;
            ps.psi_c = 60.0;
        }
        let mut values = vec![0.0; d_pattern.nnz()];
        let mut rhs = vec![0.0; map.n_d_free];
        assemble_phasefield(
            &model, &map, &d_pattern, &d, &points, &params, false, &mut values, &mut rhs,
        )
        .unwrap();
        let k = dense_from_pattern(&d_pattern, &values);
        let h = 1e-8;
        for dof in 0..nn {
            let col = map.d_free[dof];
            if col < 0 || dof % 3 != 0 {
                continue;
            }
            let probe = |dv: &[f64]| -> Vec<f64> {
                let mut v = vec![0.0; d_pattern.nnz()];
                let mut r = vec![0.0; map.n_d_free];
                assemble_phasefield(
                    &model, &map, &d_pattern, dv, &points, &params, false, &mut v, &mut r,
                )
                .unwrap();
                r.iter().map(|x| -x).collect()
            };
            let mut dp = d.clone();
            dp[dof] += h;
            let rp = probe(&dp);
            let mut dm = d.clone();
            dm[dof] -= h;
            let rm = probe(&dm);
            for row in 0..map.n_d_free {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                let an = k[row][col as usize];
                let scale = an.abs().max(1.0);
                assert!(
                    (fd - an).abs() <= 1e-5 * scale,
                    "Jd[{row}][{col}] analytic {an:.6e} vs fd {fd:.6e}"
                );
            }
        }
    }

    #[test]
    fn phasefield_residual_is_zero_before_peak() {
        // h_plus == psi_c (no slip anywhere): d = 0 must be an exact root
        let mesh = generate_rect(0.1, 0.1, 0.025, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let params = material();
        let map = DofMap::build(&model.mesh, &[], &[]).unwrap();
        let d_pattern = build_d_pattern(&model, &map);
        let d = vec![0.0; model.n_nodes()];
        let mut points = vec![crate::constitutive::PointState::default(); model.n_elements()];
        for ps in points.iter_mut() {
            ps.psi_c = 75.0;
            ps.h_plus = 75.0;
        }
        let mut values = vec![0.0; d_pattern.nnz()];
        let mut rhs = vec![0.0; map.n_d_free];
        assemble_phasefield(
            &model, &map, &d_pattern, &d, &points, &params, true, &mut values, &mut rhs,
        )
        .unwrap();
        for r in &rhs {
            assert_abs_diff_eq!(*r, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn traction_resultant_matches_pressure() {
        let mesh = generate_rect(1.0, 0.5, 0.125, None).unwrap();
        let model = FemModel::new(mesh).unwrap();
        let f = assemble_external(
            &model,
            &[TractionBc {
                tag: "right".into(),
                kind: TractionKind::NormalPressure(2.0e5),
            }],
            [0.0, 0.0],
        )
        .unwrap();
        let fx: f64 = (0..model.n_nodes()).map(|n| f[2 * n]).sum();
        let fy: f64 = (0..model.n_nodes()).map(|n| f[2 * n + 1]).sum();
        // pressure on the right edge pushes in -x over edge length 0.5
        assert_relative_eq!(fx, -2.0e5 * 0.5, max_relative = 1e-12);
        assert_abs_diff_eq!(fy, 0.0, epsilon = 1e-9);
        assert!(assemble_external(
            &model,
            &[TractionBc {
                tag: "nope".into(),
                kind: TractionKind::Vector([0.0, 0.0])
            }],
            [0.0, 0.0]
        )
        .is_err());
    }
}
