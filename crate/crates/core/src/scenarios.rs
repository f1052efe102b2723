//! Benchmark scenario builders, the wedge-equilibrium strength oracle, and
//! force-displacement curve post-processing.

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::fem::{BcValue, Comp, DirichletBc, FemModel, TractionBc, TractionKind};
use crate::mesh::{generate_rect, generate_slope, RefineBand, SlopeSpec};
use crate::solver::Problem;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

/// A fully built benchmark: the solver problem plus reporting metadata.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub problem: Problem,
    /// Primary prescribed displacement magnitude (m).
    pub u_target: f64,
}

/// Direct shear test: a long box sheared horizontally over a carved notch,
/// under an isotropic in-plane confining stress held by tractions. Damage is
/// restricted to a horizontal band around the notch line.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectShearConfig {
    pub length: f64,
    pub height: f64,
    pub notch_len: f64,
    pub normal_stress: f64,
    pub u_target: f64,
    pub shear_modulus: f64,
    pub poisson: f64,
    pub cohesion: f64,
    pub friction_deg: f64,
    pub cohesion_r: f64,
    pub friction_r_deg: f64,
    pub gc: f64,
    pub l: f64,
    pub h_band: f64,
    pub h_coarse: f64,
    /// Damage allowed only within `mask_halfwidth_factor * l` of the notch line.
    pub mask_halfwidth_factor: f64,
    /// Mesh refined within `refine_halfwidth_factor * l` of the notch line.
    pub refine_halfwidth_factor: f64,
    pub stop_after_peak_drop: Option<f64>,
}

impl Default for DirectShearConfig {
    fn default() -> Self {
        Self {
            length: 0.5,
            height: 0.1,
            notch_len: 0.010,
            normal_stress: 149.0e3,
            u_target: 3.0e-3,
            shear_modulus: 10.0e6,
            poisson: 0.3,
            cohesion: 40.0e3,
            friction_deg: 15.0,
            cohesion_r: 0.0,
            friction_r_deg: 15.0,
            gc: 30.0,
            l: 2.0e-3,
            h_band: 1.0e-3,
            h_coarse: 4.0e-3,
            mask_halfwidth_factor: 5.0,
            refine_halfwidth_factor: 3.0,
            stop_after_peak_drop: None,
        }
    }
}

pub fn build_direct_shear(cfg: &DirectShearConfig) -> Result<Scenario> {
    let y_mid = cfg.height / 2.0;
    let refine_hw = (cfg.refine_halfwidth_factor * cfg.l).min(y_mid - cfg.h_band);
    let mask_hw = (cfg.mask_halfwidth_factor * cfg.l).min(y_mid);
    let mesh = generate_rect(
        cfg.length,
        cfg.height,
        cfg.h_coarse,
        Some(RefineBand {
            y0: y_mid - refine_hw,
            y1: y_mid + refine_hw,
            h: cfg.h_band,
        }),
    )?;
    let phase_fixed: Vec<usize> = mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[1] - y_mid).abs() > mask_hw)
        .map(|(n, _)| n)
        .collect();
    let model = FemModel::new(mesh)?;
    let params = MaterialParams::from_shear_poisson(cfg.shear_modulus, cfg.poisson).strength(
        cfg.cohesion,
        cfg.friction_deg.to_radians(),
        cfg.cohesion_r,
        cfg.friction_r_deg.to_radians(),
        cfg.gc,
        cfg.l,
    );
    params.validate()?;
    // the initial fracture is a closed, fully-developed shear crack: seed the
    // slip history on elements whose edge lies on the notch segment, strong
    // enough to hold d near 1 there
    let seed_value = {
        let m = params.phase_modulus();
        let r_mc = 1.0 / (3.0f64.sqrt() * params.friction_angle.cos());
        let p0 = cfg.normal_stress;
        let q_peak = (p0 * params.friction_angle.tan() + params.cohesion) / r_mc;
        let q_res =
            (p0 * params.residual_friction_angle.tan() + params.residual_cohesion) / r_mc;
        let psi = ((q_peak - q_res).powi(2) / (6.0 * params.shear_modulus))
            .max(params.psi_c_floor());
        100.0 * m * m / psi
    };
    let tol = 1e-9 * cfg.length;
    let seed_slip: Vec<(usize, f64)> = model
        .mesh
        .elements
        .iter()
        .enumerate()
        .filter(|(e, el)| {
            let on_line = el
                .iter()
                .filter(|&&n| (model.mesh.nodes[n][1] - y_mid).abs() <= tol)
                .count();
            on_line >= 2 && model.mesh.element_centroid(*e)[0] <= cfg.notch_len + tol
        })
        .map(|(e, _)| (e, seed_value))
        .collect();
    let fixed = |tag: &str, comp: Comp| DirichletBc {
        tag: tag.into(),
        comp,
        value: BcValue::Fixed(0.0),
    };
    let main_bcs = vec![
        fixed("bottom", Comp::X),
        fixed("bottom", Comp::Y),
        fixed("left", Comp::Y),
        fixed("right", Comp::Y),
        DirichletBc {
            tag: "top".into(),
            comp: Comp::X,
            value: BcValue::Ramp {
                target: cfg.u_target,
            },
        },
    ];
    let tractions = vec![
        TractionBc {
            tag: "top".into(),
            kind: TractionKind::NormalPressure(cfg.normal_stress),
        },
        TractionBc {
            tag: "left".into(),
            kind: TractionKind::NormalPressure(cfg.normal_stress),
        },
        TractionBc {
            tag: "right".into(),
            kind: TractionKind::NormalPressure(cfg.normal_stress),
        },
    ];
    Ok(Scenario {
        name: "direct_shear".into(),
        u_target: cfg.u_target,
        problem: Problem {
            model,
            params,
            static_bcs: main_bcs.clone(),
            main_bcs,
            tractions,
            body_force: [0.0, 0.0],
            phase_fixed_nodes: phase_fixed,
            has_static_phase: true,
            reaction_tag: "top".into(),
            reaction_dir: [1.0, 0.0],
            primary_target: cfg.u_target,
            stop_after_peak_drop: cfg.stop_after_peak_drop,
            seed_slip,
        },
    })
}

/// Biaxial compression: rollers below, prescribed vertical displacement on
/// top (center pinned horizontally), constant confining pressure on both
/// lateral faces. No damage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BiaxialConfig {
    pub width: f64,
    pub height: f64,
    pub confining: f64,
    pub u_target: f64,
    pub shear_modulus: f64,
    pub poisson: f64,
    pub cohesion: f64,
    pub friction_deg: f64,
    pub cohesion_r: f64,
    pub friction_r_deg: f64,
    pub gc: f64,
    pub l: f64,
    pub h: f64,
    pub stop_after_peak_drop: Option<f64>,
}

impl Default for BiaxialConfig {
    fn default() -> Self {
        Self {
            width: 0.08,
            height: 0.17,
            confining: 200.0e3,
            u_target: 3.0e-3,
            shear_modulus: 10.0e6,
            poisson: 0.3,
            cohesion: 40.0e3,
            friction_deg: 20.0,
            cohesion_r: 0.0,
            friction_r_deg: 20.0,
            gc: 30.0,
            l: 2.0e-3,
            h: 0.4e-3,
            stop_after_peak_drop: None,
        }
    }
}

pub fn build_biaxial(cfg: &BiaxialConfig) -> Result<Scenario> {
    let mesh = generate_rect(cfg.width, cfg.height, cfg.h, None)?;
    let model = FemModel::new(mesh)?;
    let params = MaterialParams::from_shear_poisson(cfg.shear_modulus, cfg.poisson).strength(
        cfg.cohesion,
        cfg.friction_deg.to_radians(),
        cfg.cohesion_r,
        cfg.friction_r_deg.to_radians(),
        cfg.gc,
        cfg.l,
    );
    params.validate()?;
    let main_bcs = vec![
        DirichletBc {
            tag: "bottom".into(),
            comp: Comp::Y,
            value: BcValue::Fixed(0.0),
        },
        DirichletBc {
            tag: "top_center".into(),
            comp: Comp::X,
            value: BcValue::Fixed(0.0),
        },
        DirichletBc {
            tag: "top".into(),
            comp: Comp::Y,
            value: BcValue::Ramp {
                target: -cfg.u_target,
            },
        },
    ];
    let tractions = vec![
        TractionBc {
            tag: "left".into(),
            kind: TractionKind::NormalPressure(cfg.confining),
        },
        TractionBc {
            tag: "right".into(),
            kind: TractionKind::NormalPressure(cfg.confining),
        },
    ];
    Ok(Scenario {
        name: "biaxial".into(),
        u_target: cfg.u_target,
        problem: Problem {
            model,
            params,
            static_bcs: main_bcs.clone(),
            main_bcs,
            tractions,
            body_force: [0.0, 0.0],
            phase_fixed_nodes: vec![],
            has_static_phase: true,
            reaction_tag: "top".into(),
            reaction_dir: [0.0, -1.0],
            primary_target: cfg.u_target,
            stop_after_peak_drop: cfg.stop_after_peak_drop,
            seed_slip: vec![],
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeCase {
    /// Damage suppressed in the region next to the footing's left corner.
    SuppressedLeft,
    /// Free band formation from both corners.
    Free,
}

/// Slope loaded through a rigid footing on the crest after a gravity static
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeConfig {
    pub case: SlopeCase,
    pub width: f64,
    pub height: f64,
    pub crest_x: f64,
    pub footing: [f64; 2],
    /// Case-I rectangle where the phase field is pinned to zero.
    pub suppressed: [f64; 4],
    pub unit_weight: f64,
    pub u_target: f64,
    pub young_modulus: f64,
    pub poisson: f64,
    pub cohesion: f64,
    pub friction_deg: f64,
    pub cohesion_r: f64,
    pub friction_r_deg: f64,
    pub gc: f64,
    pub l: f64,
    pub h: f64,
    pub stop_after_peak_drop: Option<f64>,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        Self {
            case: SlopeCase::SuppressedLeft,
            width: 20.0,
            height: 10.0,
            crest_x: 10.0,
            footing: [10.0, 14.0],
            suppressed: [8.0, 8.0, 11.0, 10.0],
            unit_weight: 20.0e3,
            u_target: 0.3,
            young_modulus: 10.0e6,
            poisson: 0.4,
            cohesion: 40.0e3,
            friction_deg: 16.7,
            cohesion_r: 0.0,
            friction_r_deg: 10.0,
            gc: 5.0e3,
            l: 0.4,
            h: 0.2,
            stop_after_peak_drop: None,
        }
    }
}

pub fn build_slope(cfg: &SlopeConfig) -> Result<Scenario> {
    let spec = SlopeSpec {
        width: cfg.width,
        height: cfg.height,
        crest_x: cfg.crest_x,
        footing: cfg.footing,
        suppressed: match cfg.case {
            SlopeCase::SuppressedLeft => Some(cfg.suppressed),
            SlopeCase::Free => None,
        },
    };
    let mesh = generate_slope(&spec, cfg.h, cfg.h)?;
    let phase_fixed: Vec<usize> = match cfg.case {
        SlopeCase::SuppressedLeft => {
            let r = cfg.suppressed;
            mesh.nodes
                .iter()
                .enumerate()
                .filter(|(_, p)| p[0] >= r[0] && p[1] >= r[1] && p[0] <= r[2] && p[1] <= r[3])
                .map(|(n, _)| n)
                .collect()
        }
        SlopeCase::Free => vec![],
    };
    let model = FemModel::new(mesh)?;
    let params = MaterialParams::from_young_poisson(cfg.young_modulus, cfg.poisson).strength(
        cfg.cohesion,
        cfg.friction_deg.to_radians(),
        cfg.cohesion_r,
        cfg.friction_r_deg.to_radians(),
        cfg.gc,
        cfg.l,
    );
    params.validate()?;
    let fixed = |tag: &str, comp: Comp| DirichletBc {
        tag: tag.into(),
        comp,
        value: BcValue::Fixed(0.0),
    };
    let static_bcs = vec![
        fixed("bottom", Comp::X),
        fixed("bottom", Comp::Y),
        fixed("right", Comp::X),
    ];
    let mut main_bcs = static_bcs.clone();
    // rigid footing: uniform vertical push relative to the settled position,
    // the center node also held horizontally
    main_bcs.push(DirichletBc {
        tag: "footing".into(),
        comp: Comp::Y,
        value: BcValue::RampRelative {
            target: -cfg.u_target,
        },
    });
    main_bcs.push(DirichletBc {
        tag: "footing_center".into(),
        comp: Comp::X,
        value: BcValue::RampRelative { target: 0.0 },
    });
    Ok(Scenario {
        name: match cfg.case {
            SlopeCase::SuppressedLeft => "slope_case1".into(),
            SlopeCase::Free => "slope_case2".into(),
        },
        u_target: cfg.u_target,
        problem: Problem {
            model,
            params,
            static_bcs,
            main_bcs,
            tractions: vec![],
            body_force: [0.0, -cfg.unit_weight],
            phase_fixed_nodes: phase_fixed,
            has_static_phase: true,
            reaction_tag: "footing".into(),
            reaction_dir: [0.0, -1.0],
            primary_target: cfg.u_target,
            stop_after_peak_drop: cfg.stop_after_peak_drop,
            seed_slip: vec![],
        },
    })
}

/// Band inclination from the major principal stress direction,
/// `45 deg - phi_r/2`.
pub fn conjugate_angle(phi_r: f64) -> f64 {
    FRAC_PI_4 - phi_r / 2.0
}

/// Inputs of the wedge equilibrium strength oracle. `theta` is the band
/// angle from the loading axis; take `conjugate_angle(phi_r)` unless a
/// specific angle is wanted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOracleInput {
    /// Specimen width L (m).
    pub width: f64,
    /// Confining pressure (Pa).
    pub confining: f64,
    pub cohesion: f64,
    pub phi: f64,
    pub phi_r: f64,
    pub theta: f64,
}

/// Peak and residual vertical forces (N/m) from static equilibrium of the
/// wedge sliding on a straight band.
pub fn equilibrium_peak_residual(input: &EquilibriumOracleInput) -> Result<(f64, f64)> {
    if !(input.theta > 0.0 && input.theta < FRAC_PI_2) {
        return Err(Error::Contract(format!(
            "oracle: theta {} outside (0, pi/2)",
            input.theta
        )));
    }
    let (s, c) = input.theta.sin_cos();
    let t = input.theta.tan();
    let den_p = c - s * input.phi.tan();
    let den_r = c - s * input.phi_r.tan();
    if den_p <= 0.0 || den_r <= 0.0 {
        return Err(Error::InfeasibleWedge);
    }
    let l = input.width;
    let vp =
        (l * input.cohesion / s + input.confining * (l / t) * (c * input.phi.tan() + s)) / den_p;
    let vr = (input.confining * (l / t) * (c * input.phi_r.tan() + s)) / den_r;
    Ok((vp, vr))
}

/// One case of the nine-point biaxial strength grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiaxialCase {
    pub confining: f64,
    pub phi_deg: f64,
    pub phi_r_deg: f64,
    /// Band angle used by the reference strength table. The phi = phi_r = 15
    /// column is tabulated at 35 deg rather than its conjugate 37.5 deg; the
    /// other columns use the conjugate angle.
    pub theta_deg: f64,
}

/// The nine (confining, phi, phi_r) cases of the biaxial benchmark grid.
pub fn biaxial_case_grid() -> Vec<BiaxialCase> {
    let mut cases = Vec::new();
    for &(phi, phi_r, theta) in &[(15.0, 15.0, 35.0), (20.0, 20.0, 35.0), (15.0, 0.0, 45.0)] {
        for &pc in &[50.0e3, 100.0e3, 200.0e3] {
            cases.push(BiaxialCase {
                confining: pc,
                phi_deg: phi,
                phi_r_deg: phi_r,
                theta_deg: theta,
            });
        }
    }
    cases
}

impl BiaxialCase {
    pub fn oracle_input(&self, width: f64, cohesion: f64) -> EquilibriumOracleInput {
        EquilibriumOracleInput {
            width,
            confining: self.confining,
            cohesion,
            phi: self.phi_deg.to_radians(),
            phi_r: self.phi_r_deg.to_radians(),
            theta: self.theta_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CurveSummary {
    pub peak: f64,
    pub peak_u: f64,
    /// Mean of the final 10% of samples.
    pub residual: f64,
}

/// Peak and residual extraction from (displacement, force) samples.
pub fn curve_summary(samples: &[(f64, f64)]) -> Result<CurveSummary> {
    if samples.is_empty() {
        return Err(Error::Contract("empty force-displacement curve".into()));
    }
    let (mut peak, mut peak_u) = (f64::NEG_INFINITY, 0.0);
    for &(u, f) in samples {
        if f > peak {
            peak = f;
            peak_u = u;
        }
    }
    let tail = (samples.len() / 10).max(1);
    let residual = samples[samples.len() - tail..]
        .iter()
        .map(|s| s.1)
        .sum::<f64>()
        / tail as f64;
    Ok(CurveSummary {
        peak,
        peak_u,
        residual,
    })
}

/// Dissipated energy from the softening part of a force-displacement curve:
/// the trapezoidal integral of `(F - F_residual)+` between the first sample
/// exceeding the residual plateau and the return to within 1% of it.
pub fn fracture_energy_from_curve(samples: &[(f64, f64)], residual_level: f64) -> Result<f64> {
    if samples.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Contract(
            "curve must be monotone in displacement".into(),
        ));
    }
    let above = residual_level * 1.01;
    let start = samples
        .iter()
        .position(|&(_, f)| f > above)
        .ok_or_else(|| Error::Contract("curve never exceeds the residual plateau".into()))?;
    let end = samples[start..]
        .iter()
        .position(|&(_, f)| f <= above)
        .map(|k| start + k)
        .ok_or_else(|| Error::Contract("residual plateau not reached".into()))?;
    let lo = start.saturating_sub(1);
    let mut energy = 0.0;
    for w in samples[lo..=end].windows(2) {
        let g0 = (w[0].1 - residual_level).max(0.0);
        let g1 = (w[1].1 - residual_level).max(0.0);
        energy += 0.5 * (g0 + g1) * (w[1].0 - w[0].0);
    }
    Ok(energy)
}

/// Area-weighted band inclination from the vertical axis, measured as the
/// principal direction of the damaged-region covariance. `None` when fewer
/// than two elements pass the threshold.
pub fn damage_band_angle(model: &FemModel, d: &[f64], threshold: f64) -> Option<f64> {
    let mut w_sum = 0.0;
    let mut mean = [0.0f64; 2];
    let mut picked = 0usize;
    let centroid_d = |el: &[usize; 3]| (d[el[0]] + d[el[1]] + d[el[2]]) / 3.0;
    for (e, el) in model.mesh.elements.iter().enumerate() {
        let dc = centroid_d(el);
        if dc >= threshold {
            let c = model.mesh.element_centroid(e);
            let w = model.geo[e].area * dc;
            w_sum += w;
            mean[0] += w * c[0];
            mean[1] += w * c[1];
            picked += 1;
        }
    }
    if picked < 2 || w_sum <= 0.0 {
        return None;
    }
    mean[0] /= w_sum;
    mean[1] /= w_sum;
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for (e, el) in model.mesh.elements.iter().enumerate() {
        let dc = centroid_d(el);
        if dc >= threshold {
            let c = model.mesh.element_centroid(e);
            let w = model.geo[e].area * dc;
            let dx = c[0] - mean[0];
            let dy = c[1] - mean[1];
            cxx += w * dx * dx;
            cxy += w * dx * dy;
            cyy += w * dy * dy;
        }
    }
    // principal axis of the 2x2 covariance
    let half = 0.5 * (cxx - cyy);
    let r = (half * half + cxy * cxy).sqrt();
    let lam = 0.5 * (cxx + cyy) + r;
    let (vx, vy) = if cxy.abs() > 1e-300 {
        (lam - cyy, cxy)
    } else if cxx >= cyy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    Some(vx.abs().atan2(vy.abs()))
}

/// Histogram of local band directions over damaged elements. The direction
/// is the perpendicular of the phase-field gradient, expressed as a signed
/// angle from the vertical in `(-90, 90]` degrees and binned over `nbins`
/// equal bins spanning `[-90, 90)`. Weights are `area * d`.
pub fn damage_orientation_histogram(
    model: &FemModel,
    d: &[f64],
    d_threshold: f64,
    nbins: usize,
) -> Vec<f64> {
    let mut hist = vec![0.0; nbins];
    for (e, el) in model.mesh.elements.iter().enumerate() {
        let dc = (d[el[0]] + d[el[1]] + d[el[2]]) / 3.0;
        if dc < d_threshold {
            continue;
        }
        let g = &model.geo[e];
        let gx = d[el[0]] * g.dndx[0][0] + d[el[1]] * g.dndx[1][0] + d[el[2]] * g.dndx[2][0];
        let gy = d[el[0]] * g.dndx[0][1] + d[el[1]] * g.dndx[1][1] + d[el[2]] * g.dndx[2][1];
        let norm = (gx * gx + gy * gy).sqrt();
        // skip flat spots (band cores and uniform fields carry no direction)
        if norm * g.area.sqrt() < 1e-6 {
            continue;
        }
        // band tangent is perpendicular to grad d
        let (tx, ty) = (-gy / norm, gx / norm);
        let mut ang = tx.atan2(ty).to_degrees();
        if ang > 90.0 {
            ang -= 180.0;
        }
        if ang <= -90.0 {
            ang += 180.0;
        }
        let bin = (((ang + 90.0) / 180.0 * nbins as f64) as usize).min(nbins - 1);
        hist[bin] += g.area * dc;
    }
    hist
}

/// Fraction of the damage-orientation histogram mass in the bins containing
/// `+theta_deg` and `-theta_deg` (angles from the vertical).
pub fn conjugate_bin_fractions(hist: &[f64], theta_deg: f64) -> (f64, f64) {
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let nbins = hist.len();
    let bin_of =
        |ang: f64| -> usize { (((ang + 90.0) / 180.0 * nbins as f64) as usize).min(nbins - 1) };
    (
        hist[bin_of(theta_deg)] / total,
        hist[bin_of(-theta_deg)] / total,
    )
}

/// True when elements with centroid damage above the threshold form a
/// connected component touching both rectangles.
pub fn damage_connects_regions(
    model: &FemModel,
    d: &[f64],
    threshold: f64,
    rect_a: [f64; 4],
    rect_b: [f64; 4],
) -> bool {
    let ne = model.n_elements();
    let damaged: Vec<bool> = (0..ne)
        .map(|e| {
            let el = model.mesh.elements[e];
            (d[el[0]] + d[el[1]] + d[el[2]]) / 3.0 >= threshold
        })
        .collect();
    // union-find over damaged elements sharing an edge
    let mut parent: Vec<usize> = (0..ne).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    use std::collections::BTreeMap;
    let mut edge_owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (e, el) in model.mesh.elements.iter().enumerate() {
        if !damaged[e] {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if let Some(&other) = edge_owner.get(&key) {
                let ra = find(&mut parent, e);
                let rb = find(&mut parent, other);
                parent[ra] = rb;
            } else {
                edge_owner.insert(key, e);
            }
        }
    }
    let in_rect =
        |c: [f64; 2], r: [f64; 4]| c[0] >= r[0] && c[1] >= r[1] && c[0] <= r[2] && c[1] <= r[3];
    let mut roots_a = std::collections::BTreeSet::new();
    let mut roots_b = std::collections::BTreeSet::new();
    for e in 0..ne {
        if !damaged[e] {
            continue;
        }
        let c = model.mesh.element_centroid(e);
        if in_rect(c, rect_a) {
            roots_a.insert(find(&mut parent, e));
        }
        if in_rect(c, rect_b) {
            roots_b.insert(find(&mut parent, e));
        }
    }
    roots_a.intersection(&roots_b).next().is_some()
}

/// Largest centroid damage among elements whose centroid lies in the
/// rectangle.
pub fn max_damage_in_rect(model: &FemModel, d: &[f64], rect: [f64; 4]) -> f64 {
    let mut m = 0.0f64;
    for (e, el) in model.mesh.elements.iter().enumerate() {
        let c = model.mesh.element_centroid(e);
        if c[0] >= rect[0] && c[1] >= rect[1] && c[0] <= rect[2] && c[1] <= rect[3] {
            m = m.max((d[el[0]] + d[el[1]] + d[el[2]]) / 3.0);
        }
    }
    m
}
