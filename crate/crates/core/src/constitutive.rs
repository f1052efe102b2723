//! Point-level material model.
//!
//! Splits the strain into volumetric and deviatoric parts, damages only the
//! deviatoric stress, and limits it by a Lode-angle-dependent Mohr-Coulomb
//! surface. Sign conventions: strains and stresses are tension-positive,
//! the mean pressure `p = -kappa * eps_v` is compression-positive so that it
//! grows under compression as the failure criterion requires. The undamaged
//! stress is `sigma = kappa*eps_v*I + 2*mu*e`.

use crate::error::{Error, Result};
use crate::tensor::SymTensor;

/// `c0 = 4 * int_0^1 sqrt(w(s)) ds = 8/3` for the linear dissipation `w(d) = d`.
pub const C0: f64 = 8.0 / 3.0;

/// Below this equivalent deviatoric strain the unit deviator is undefined and
/// set to zero; pure volumetric states carry no shear driving force.
pub const EPS_Q_FLOOR: f64 = 1e-14;

/// Relative floor (times the shear modulus) for the critical driving force,
/// guarding the degenerate case `q_peak == q_res`.
pub const PSI_C_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Shear modulus mu (Pa).
    pub shear_modulus: f64,
    /// Bulk modulus kappa (Pa).
    pub bulk_modulus: f64,
    /// Cohesion c (Pa).
    pub cohesion: f64,
    /// Peak friction angle phi (rad).
    pub friction_angle: f64,
    /// Residual cohesion c_r (Pa).
    pub residual_cohesion: f64,
    /// Residual friction angle phi_r (rad).
    pub residual_friction_angle: f64,
    /// Fracture energy G_c (J/m^2).
    pub fracture_energy: f64,
    /// Regularization length l (m).
    pub length_scale: f64,
    /// Shape parameter of the Lorentz degradation function.
    pub lorentz_p: f64,
}

impl MaterialParams {
    /// Builds elastic moduli from shear modulus and Poisson ratio.
    pub fn from_shear_poisson(g: f64, nu: f64) -> MaterialParamsBuilder {
        let e = 2.0 * g * (1.0 + nu);
        let kappa = e / (3.0 * (1.0 - 2.0 * nu));
        MaterialParamsBuilder::new(g, kappa)
    }

    /// Builds elastic moduli from Young's modulus and Poisson ratio.
    pub fn from_young_poisson(e: f64, nu: f64) -> MaterialParamsBuilder {
        let g = e / (2.0 * (1.0 + nu));
        let kappa = e / (3.0 * (1.0 - 2.0 * nu));
        MaterialParamsBuilder::new(g, kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Contract(format!("material: {what}")))
            }
        };
        check(self.shear_modulus > 0.0, "shear modulus must be positive")?;
        check(self.bulk_modulus > 0.0, "bulk modulus must be positive")?;
        check(self.fracture_energy > 0.0, "fracture energy must be positive")?;
        check(self.length_scale > 0.0, "length scale must be positive")?;
        check(
            (0.0..std::f64::consts::FRAC_PI_2).contains(&self.friction_angle),
            "friction angle must lie in [0, pi/2)",
        )?;
        check(
            self.residual_friction_angle >= 0.0
                && self.residual_friction_angle <= self.friction_angle,
            "residual friction angle must lie in [0, phi]",
        )?;
        check(
            self.residual_cohesion >= 0.0 && self.residual_cohesion <= self.cohesion,
            "residual cohesion must lie in [0, c]",
        )?;
        check(self.lorentz_p >= 0.0, "lorentz_p must be non-negative")?;
        Ok(())
    }

    /// `M = G_c / (c0 * l) = 3 G_c / (8 l)`, the phase-field modulus.
    pub fn phase_modulus(&self) -> f64 {
        self.fracture_energy / (C0 * self.length_scale)
    }

    /// Floor applied to the critical driving force psi_c.
    pub fn psi_c_floor(&self) -> f64 {
        PSI_C_FLOOR_REL * self.shear_modulus
    }
}

pub struct MaterialParamsBuilder {
    mu: f64,
    kappa: f64,
}

impl MaterialParamsBuilder {
    fn new(mu: f64, kappa: f64) -> Self {
        Self { mu, kappa }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn strength(
        self,
        cohesion: f64,
        friction_angle: f64,
        residual_cohesion: f64,
        residual_friction_angle: f64,
        fracture_energy: f64,
        length_scale: f64,
    ) -> MaterialParams {
        MaterialParams {
            shear_modulus: self.mu,
            bulk_modulus: self.kappa,
            cohesion,
            friction_angle,
            residual_cohesion,
            residual_friction_angle,
            fracture_energy,
            length_scale,
            lorentz_p: 1.0,
        }
    }
}

/// Volumetric/deviatoric split of a strain tensor.
#[derive(Debug, Clone, Copy)]
pub struct StrainDecomposition {
    pub eps: SymTensor,
    /// Volumetric strain, full 3D trace.
    pub eps_v: f64,
    /// Deviatoric strain e.
    pub dev: SymTensor,
    /// Equivalent deviatoric strain `sqrt(2/3 e:e)`.
    pub eps_q: f64,
    /// Unit deviator `sqrt(2/3) e / eps_q`; zero when degenerate.
    pub alpha_q: SymTensor,
    /// Set when eps_q is below the floor and alpha_q is meaningless.
    pub degenerate: bool,
}

pub fn decompose_strain(eps: SymTensor) -> StrainDecomposition {
    let eps_v = eps.trace();
    let dev = eps.deviator();
    let eps_q = (2.0 / 3.0 * dev.double_dot(&dev)).sqrt();
    if eps_q <= EPS_Q_FLOOR {
        StrainDecomposition {
            eps,
            eps_v,
            dev,
            eps_q,
            alpha_q: SymTensor::ZERO,
            degenerate: true,
        }
    } else {
        let alpha_q = dev.scale((2.0f64 / 3.0).sqrt() / eps_q);
        StrainDecomposition {
            eps,
            eps_v,
            dev,
            eps_q,
            alpha_q,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DeviatoricInvariants {
    /// Mises invariant `sqrt(3/2 s:s)`.
    pub q: f64,
    /// Signed third invariant `(9/2 tr(s^3))^(1/3)`.
    pub r: f64,
    /// Lode angle in [0, pi/3].
    pub lode_angle: f64,
    pub degenerate: bool,
    /// `(r/q)^3` fell outside [-1, 1] and was clamped.
    pub clamped: bool,
}

/// Invariants of a trace-free stress tensor. `q = 0` states return the Lode
/// angle 0 by convention with the degeneracy flag set.
pub fn deviatoric_invariants(dev_stress: &SymTensor) -> Result<DeviatoricInvariants> {
    let norm = dev_stress.norm();
    let tr = dev_stress.trace();
    if tr.abs() > 1e-9 * (1.0 + norm) {
        return Err(Error::Contract(format!(
            "deviatoric_invariants: input has trace {tr:.3e} (norm {norm:.3e})"
        )));
    }
    let q = (1.5 * dev_stress.double_dot(dev_stress)).sqrt();
    if q <= 1e-280 {
        return Ok(DeviatoricInvariants {
            q: 0.0,
            r: 0.0,
            lode_angle: 0.0,
            degenerate: true,
            clamped: false,
        });
    }
    let t = 4.5 * dev_stress.trace_cubed();
    let r = t.cbrt();
    let raw = (r / q).powi(3);
    let clamped = !(-1.0..=1.0).contains(&raw);
    let cos3t = raw.clamp(-1.0, 1.0);
    let lode_angle = cos3t.acos() / 3.0;
    Ok(DeviatoricInvariants {
        q,
        r,
        lode_angle,
        degenerate: false,
        clamped,
    })
}

/// Shape factor of the Mohr-Coulomb surface on the deviatoric plane,
/// `R_MC = sin(T + pi/3)/(sqrt(3) cos(phi)) + cos(T + pi/3) tan(phi)/3`.
pub fn mc_shape_factor(lode_angle: f64, friction_angle: f64) -> Result<f64> {
    const TOL: f64 = 1e-9;
    if !(-TOL..=std::f64::consts::FRAC_PI_3 + TOL).contains(&lode_angle) {
        return Err(Error::Contract(format!(
            "mc_shape_factor: lode angle {lode_angle} outside [0, pi/3]"
        )));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&friction_angle) {
        return Err(Error::Contract(format!(
            "mc_shape_factor: friction angle {friction_angle} outside [0, pi/2)"
        )));
    }
    let a = lode_angle + std::f64::consts::FRAC_PI_3;
    Ok(a.sin() / (3.0f64.sqrt() * friction_angle.cos()) + a.cos() * friction_angle.tan() / 3.0)
}

#[derive(Debug, Clone, Copy)]
pub struct PeakResidual {
    pub q_peak: f64,
    pub q_res: f64,
    /// A tensile mean stress drove one of the raw strengths negative and it
    /// was clamped to zero.
    pub tensile_clamped: bool,
}

/// Peak and residual Mises strengths, `(p tan(phi) + c)/R_MC`, floored at 0.
pub fn peak_residual_q(p: f64, r_mc: f64, params: &MaterialParams) -> Result<PeakResidual> {
    if r_mc <= 0.0 {
        return Err(Error::Contract(format!(
            "peak_residual_q: shape factor must be positive, got {r_mc}"
        )));
    }
    let raw_peak = p * params.friction_angle.tan() + params.cohesion;
    let raw_res = p * params.residual_friction_angle.tan() + params.residual_cohesion;
    Ok(PeakResidual {
        q_peak: raw_peak.max(0.0) / r_mc,
        q_res: raw_res.max(0.0) / r_mc,
        tensile_clamped: raw_peak < 0.0 || raw_res < 0.0,
    })
}

/// Lorentz degradation `g = (1-d)^2 / ((1-d)^2 + (M/psi_c) d (1 + p d))`
/// and its derivative.
pub fn degradation(d: f64, m: f64, psi_c: f64, lorentz_p: f64) -> Result<(f64, f64)> {
    let (g, g1, _) = degradation_with_curvature(d, m, psi_c, lorentz_p)?;
    Ok((g, g1))
}

/// As `degradation` but also returns the second derivative, needed by the
/// phase-field tangent.
pub fn degradation_with_curvature(
    d: f64,
    m: f64,
    psi_c: f64,
    lorentz_p: f64,
) -> Result<(f64, f64, f64)> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Contract(format!(
            "degradation: d = {d} outside [0, 1]"
        )));
    }
    if psi_c <= 0.0 {
        return Err(Error::Contract(format!(
            "degradation: psi_c must be positive, got {psi_c}"
        )));
    }
    let k = m / psi_c;
    let one = 1.0 - d;
    let a = one * one;
    let a1 = -2.0 * one;
    let w = d * (1.0 + lorentz_p * d);
    let w1 = 1.0 + 2.0 * lorentz_p * d;
    let b = a + k * w;
    let b1 = a1 + k * w1;
    let g = a / b;
    // a1*b - a*b1 collapses to k*(a1*w - a*w1)
    let n = k * (a1 * w - a * w1);
    let g1 = n / (b * b);
    let n1 = k * (2.0 * w - 2.0 * lorentz_p * a);
    let g2 = (n1 * b - 2.0 * n * b1) / (b * b * b);
    Ok((g, g1, g2))
}

/// Regularized crack surface density `gamma = (d + l^2 |grad d|^2) / (c0 l)`.
pub fn crack_surface_density(d: f64, grad_d: [f64; 2], l: f64) -> f64 {
    let g2 = grad_d[0] * grad_d[0] + grad_d[1] * grad_d[1];
    (d + l * l * g2) / (C0 * l)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DrivingForce {
    /// Threshold part `(q_peak - q_res)^2 / (6 mu)`; recomputed every step.
    pub h_t: f64,
    /// Accumulated slip part, monotone across accepted steps.
    pub h_slip: f64,
    /// `h_t + h_slip`.
    pub h_plus: f64,
}

/// Crack driving force. Slip energy accrues only beyond the peak (the raw
/// candidate is negative before it) and never decreases.
pub fn driving_force(
    q_hat: f64,
    q_peak: f64,
    q_res: f64,
    mu: f64,
    prev_slip: f64,
) -> DrivingForce {
    let dpr = q_peak - q_res;
    let h_t = dpr * dpr / (6.0 * mu);
    let dhr = q_hat - q_res;
    let candidate = (dhr * dhr - dpr * dpr) / (6.0 * mu);
    let h_slip = prev_slip.max(candidate.max(0.0));
    DrivingForce {
        h_t,
        h_slip,
        h_plus: h_t + h_slip,
    }
}

/// Failure-surface evaluation at one material point.
#[derive(Debug, Clone, Copy)]
pub struct FailureState {
    /// Mean pressure, compression-positive.
    pub p: f64,
    /// Bulk (trial) Mises stress `3 mu eps_q`.
    pub q_hat: f64,
    pub q_peak: f64,
    pub q_res: f64,
    pub r_mc: f64,
    pub lode_angle: f64,
    pub tensile_clamped: bool,
    pub lode_degenerate: bool,
}

/// Evaluates pressure, trial Mises stress, Lode angle and the peak/residual
/// strengths for a decomposed strain. The Lode angle comes from the bulk
/// deviatoric stress `2 mu e`, which is the trial elastic state.
pub fn evaluate_failure(
    decomp: &StrainDecomposition,
    params: &MaterialParams,
) -> Result<FailureState> {
    let p = -params.bulk_modulus * decomp.eps_v;
    let q_hat = 3.0 * params.shear_modulus * decomp.eps_q;
    let s_hat = decomp.dev.scale(2.0 * params.shear_modulus);
    let inv = deviatoric_invariants(&s_hat)?;
    let r_mc = mc_shape_factor(inv.lode_angle, params.friction_angle)?;
    let pr = peak_residual_q(p, r_mc, params)?;
    Ok(FailureState {
        p,
        q_hat,
        q_peak: pr.q_peak,
        q_res: pr.q_res,
        r_mc,
        lode_angle: inv.lode_angle,
        tensile_clamped: pr.tensile_clamped,
        lode_degenerate: inv.degenerate,
    })
}

/// Critical driving force at the current pressure, `psi_c = h_t`, floored to
/// keep the degradation function defined when peak and residual coincide.
pub fn critical_driving_force(failure: &FailureState, params: &MaterialParams) -> f64 {
    let dpr = failure.q_peak - failure.q_res;
    (dpr * dpr / (6.0 * params.shear_modulus)).max(params.psi_c_floor())
}

/// Stress with the damaged deviatoric part,
/// `sigma = kappa eps_v I + sqrt(2/3) (g q_hat + (1-g) q_res) alpha_q`.
/// At `d = 0` this is exactly isotropic linear elasticity.
pub fn damaged_stress(
    decomp: &StrainDecomposition,
    d: f64,
    params: &MaterialParams,
    failure: &FailureState,
) -> Result<SymTensor> {
    let psi_c = critical_driving_force(failure, params);
    let (g, _) = degradation(d, params.phase_modulus(), psi_c, params.lorentz_p)?;
    let vol = SymTensor::spherical(params.bulk_modulus * decomp.eps_v);
    if decomp.degenerate {
        return Ok(vol);
    }
    let q_total = g * failure.q_hat + (1.0 - g) * failure.q_res;
    Ok(vol + decomp.alpha_q.scale((2.0f64 / 3.0).sqrt() * q_total))
}

/// Plane (Voigt) tangent, components ordered [xx, yy, xy] with engineering
/// shear on the third slot.
#[derive(Debug, Clone, Copy)]
pub struct Tangent(pub [[f64; 3]; 3]);

/// Full point update: strain split, failure surface, degradation, history,
/// damaged stress and the secant tangent used by the displacement Newton
/// solve (the g(d)/q_res partition is held fixed, the alpha_q direction
/// derivative is exact).
#[derive(Debug, Clone, Copy)]
pub struct PointUpdate {
    pub decomp: StrainDecomposition,
    pub failure: FailureState,
    pub force: DrivingForce,
    pub psi_c: f64,
    pub g: f64,
    pub stress: SymTensor,
    pub tangent: Tangent,
}

pub fn update_point(
    eps: SymTensor,
    d: f64,
    prev_slip: f64,
    params: &MaterialParams,
) -> Result<PointUpdate> {
    update_point_impl(eps, d, prev_slip, None, params)
}

/// As `update_point` but with the critical driving force frozen at the value
/// of the last history update, so that the degradation factor does not move
/// with the strain iterate inside a displacement Newton solve.
pub fn update_point_frozen(
    eps: SymTensor,
    d: f64,
    prev_slip: f64,
    psi_c: f64,
    params: &MaterialParams,
) -> Result<PointUpdate> {
    update_point_impl(eps, d, prev_slip, Some(psi_c), params)
}

fn update_point_impl(
    eps: SymTensor,
    d: f64,
    prev_slip: f64,
    frozen_psi_c: Option<f64>,
    params: &MaterialParams,
) -> Result<PointUpdate> {
    let decomp = decompose_strain(eps);
    let failure = evaluate_failure(&decomp, params)?;
    let force = driving_force(
        failure.q_hat,
        failure.q_peak,
        failure.q_res,
        params.shear_modulus,
        prev_slip,
    );
    let psi_c = match frozen_psi_c {
        Some(v) if v > 0.0 => v,
        _ => critical_driving_force(&failure, params),
    };
    let (g, _) = degradation(
        d.clamp(0.0, 1.0),
        params.phase_modulus(),
        psi_c,
        params.lorentz_p,
    )?;
    let kappa = params.bulk_modulus;
    let mu = params.shear_modulus;
    let vol = SymTensor::spherical(kappa * decomp.eps_v);

    let (stress, tangent) = if decomp.degenerate {
        let c_dev = 2.0 * mu * g;
        let t = [
            [
                kappa + 2.0 / 3.0 * c_dev,
                kappa - c_dev / 3.0,
                0.0,
            ],
            [
                kappa - c_dev / 3.0,
                kappa + 2.0 / 3.0 * c_dev,
                0.0,
            ],
            [0.0, 0.0, c_dev / 2.0],
        ];
        (vol, Tangent(t))
    } else {
        let q_total = g * failure.q_hat + (1.0 - g) * failure.q_res;
        let stress = vol + decomp.alpha_q.scale((2.0f64 / 3.0).sqrt() * q_total);
        // direction stiffness of the deviatoric stress
        let c_dir = 2.0 / 3.0 * q_total / decomp.eps_q;
        let c_aa = 2.0 * mu * g - c_dir;
        let a = decomp.alpha_q;
        let av = [a.xx, a.yy, a.xy];
        let mut t = [[0.0; 3]; 3];
        // volumetric block
        t[0][0] = kappa;
        t[0][1] = kappa;
        t[1][0] = kappa;
        t[1][1] = kappa;
        // deviatoric projector in Voigt plane components
        t[0][0] += c_dir * (2.0 / 3.0);
        t[0][1] += c_dir * (-1.0 / 3.0);
        t[1][0] += c_dir * (-1.0 / 3.0);
        t[1][1] += c_dir * (2.0 / 3.0);
        t[2][2] += c_dir * 0.5;
        // alpha (x) alpha
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] += c_aa * av[i] * av[j];
            }
        }
        (stress, Tangent(t))
    };

    Ok(PointUpdate {
        decomp,
        failure,
        force,
        psi_c,
        g,
        stress,
        tangent,
    })
}

/// Per-quadrature-point persistent state.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointState {
    /// Monotone slip history, committed once per accepted step.
    pub history_slip: f64,
    pub h_t: f64,
    pub h_plus: f64,
    /// Damage interpolated at the point.
    pub d: f64,
    pub stress: SymTensor,
    /// Critical driving force at the current pressure.
    pub psi_c: f64,
    /// Diagnostics kept for field output.
    pub q_hat: f64,
    pub p: f64,
    pub tensile_clamped: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn direct_shear_material() -> MaterialParams {
        MaterialParams::from_shear_poisson(10.0e6, 0.3).strength(
            40.0e3,
            15f64.to_radians(),
            0.0,
            15f64.to_radians(),
            30.0,
            2.0e-3,
        )
    }

    #[test]
    fn decompose_zero_strain_is_degenerate() {
        let d = decompose_strain(SymTensor::ZERO);
        assert_eq!(d.eps_v, 0.0);
        assert_eq!(d.eps_q, 0.0);
        assert!(d.degenerate);
        assert_eq!(d.alpha_q, SymTensor::ZERO);
    }

    #[test]
    fn decompose_pure_volumetric() {
        let d = decompose_strain(SymTensor::spherical(0.01));
        assert_relative_eq!(d.eps_v, 0.03, max_relative = 1e-15);
        assert_abs_diff_eq!(d.dev.norm(), 0.0, epsilon = 1e-18);
        assert!(d.degenerate);
    }

    #[test]
    fn decompose_plane_pure_shear() {
        let d = decompose_strain(SymTensor::plane(0.0, 0.0, 0.005));
        assert_abs_diff_eq!(d.eps_v, 0.0);
        // eps_q = sqrt(2/3 * 2 * 0.005^2) = 0.01/sqrt(3)
        assert_relative_eq!(d.eps_q, 0.01 / 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d.alpha_q.xy, 1.0 / 2f64.sqrt(), max_relative = 1e-14);
        assert_abs_diff_eq!(d.alpha_q.trace(), 0.0, epsilon = 1e-15);
        // unit norm
        assert_relative_eq!(d.alpha_q.norm(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn invariants_zero_is_degenerate() {
        let inv = deviatoric_invariants(&SymTensor::ZERO).unwrap();
        assert_eq!(inv.q, 0.0);
        assert_eq!(inv.lode_angle, 0.0);
        assert!(inv.degenerate);
    }

    #[test]
    fn invariants_triaxial_states() {
        // uniaxial-deviatoric diag(2a, -a, -a)
        let inv = deviatoric_invariants(&SymTensor::new(2.0, -1.0, -1.0, 0.0)).unwrap();
        assert_relative_eq!(inv.q, 3.0, max_relative = 1e-14);
        assert_abs_diff_eq!(inv.lode_angle, 0.0, epsilon = 1e-8);
        // diag(a, a, -2a)
        let inv = deviatoric_invariants(&SymTensor::new(1.0, 1.0, -2.0, 0.0)).unwrap();
        assert_relative_eq!(inv.q, 3.0, max_relative = 1e-14);
        assert_relative_eq!(
            inv.lode_angle,
            std::f64::consts::FRAC_PI_3,
            max_relative = 1e-8
        );
    }

    #[test]
    fn invariants_reject_non_trace_free() {
        assert!(deviatoric_invariants(&SymTensor::spherical(1.0)).is_err());
    }

    #[test]
    fn shape_factor_hand_values() {
        // T = pi/6 makes the sine term hit 1
        let r = mc_shape_factor(std::f64::consts::FRAC_PI_6, 0.0).unwrap();
        assert_relative_eq!(r, 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        let r = mc_shape_factor(0.0, 0.0).unwrap();
        assert_relative_eq!(r, 0.5, max_relative = 1e-14);
        let r = mc_shape_factor(0.0, 15f64.to_radians()).unwrap();
        let expect = (std::f64::consts::FRAC_PI_3).sin()
            / (3f64.sqrt() * 15f64.to_radians().cos())
            + (std::f64::consts::FRAC_PI_3).cos() * 15f64.to_radians().tan() / 3.0;
        assert_relative_eq!(r, expect, max_relative = 1e-14);
        assert_relative_eq!(r, 0.5622963, max_relative = 1e-6);
    }

    #[test]
    fn peak_residual_simple_values() {
        let params = direct_shear_material();
        let pr = peak_residual_q(0.0, 0.5, &params).unwrap();
        assert_relative_eq!(pr.q_peak, 80.0e3, max_relative = 1e-14);
        assert_eq!(pr.q_res, 0.0);
        assert!(!pr.tensile_clamped);
    }

    #[test]
    fn peak_equals_residual_for_identical_parameters() {
        let mut params = direct_shear_material();
        params.residual_cohesion = params.cohesion;
        params.residual_friction_angle = params.friction_angle;
        let pr = peak_residual_q(120.0e3, 0.55, &params).unwrap();
        assert_relative_eq!(pr.q_peak, pr.q_res, max_relative = 1e-15);
    }

    #[test]
    fn tensile_mean_stress_clamps_to_zero() {
        let params = direct_shear_material();
        // p*tan(phi) + c < 0 requires a strongly tensile p
        let p = -(params.cohesion / params.friction_angle.tan()) * 1.5;
        let pr = peak_residual_q(p, 0.5, &params).unwrap();
        assert_eq!(pr.q_peak, 0.0);
        assert!(pr.tensile_clamped);
    }

    /// Cross-check of the invariant-form criterion against the plane
    /// Mohr-Coulomb relation at the direct-shear calibration state. The
    /// stress state is built so that the horizontal plane carrying
    /// sigma_n = -149 kPa, tau = c + 149e3*tan(phi) (about 80 kPa) is exactly
    /// the critical plane; the invariant route must then sit exactly on the
    /// failure surface.
    #[test]
    fn peak_matches_plane_mohr_coulomb_at_critical_state() {
        let params = direct_shear_material();
        let phi = params.friction_angle;
        let c = params.cohesion;
        let sigma_n = -149.0e3f64;
        let tau = c + 149.0e3 * phi.tan(); // 79.924 kPa
        // Mohr circle tangent to the failure line at (sigma_n, tau)
        let radius = tau / phi.cos();
        let center = sigma_n - radius * phi.sin();
        let sigma_xx = 2.0 * center - sigma_n;
        let stress = SymTensor::new(sigma_xx, sigma_n, center, tau);
        let p = -stress.trace() / 3.0;
        let dev = stress.deviator();
        let inv = deviatoric_invariants(&dev).unwrap();
        let r_mc = mc_shape_factor(inv.lode_angle, phi).unwrap();
        let pr = peak_residual_q(p, r_mc, &params).unwrap();
        // the state is exactly at peak: q == q_peak
        assert_relative_eq!(inv.q, pr.q_peak, max_relative = 1e-12);
        // and the resolved shear on the horizontal plane is tau_p = c + sigma_n tan(phi)
        assert_relative_eq!(tau, c + (-sigma_n) * phi.tan(), max_relative = 1e-15);
    }

    #[test]
    fn degradation_endpoint_values() {
        let (g, g1) = degradation(0.0, 100.0, 25.0, 1.0).unwrap();
        assert_eq!(g, 1.0);
        assert_relative_eq!(g1, -4.0, max_relative = 1e-14); // -M/psi_c
        let (g, _) = degradation(1.0, 100.0, 25.0, 1.0).unwrap();
        assert_eq!(g, 0.0);
        // M/psi_c = 1, p = 1, d = 0.5: g = 0.25/(0.25 + 0.75)
        let (g, _) = degradation(0.5, 7.0, 7.0, 1.0).unwrap();
        assert_relative_eq!(g, 0.25, max_relative = 1e-14);
        assert!(degradation(1.2, 1.0, 1.0, 1.0).is_err());
        assert!(degradation(-0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn degradation_bounds_and_derivative() {
        let (m, psi, lp) = (5625.0, 74.0, 1.0);
        let mut x = 0.123456_f64;
        for _ in 0..100 {
            // xorshift-ish deterministic samples in (0, 1)
            x = (x * 16807.0).fract();
            let d = x.clamp(1e-6, 1.0 - 1e-6);
            let (g, g1) = degradation(d, m, psi, lp).unwrap();
            assert!((0.0..=1.0).contains(&g));
            assert!(g1 <= 0.0);
            let h = 1e-7;
            let (gp, _) = degradation((d + h).min(1.0), m, psi, lp).unwrap();
            let (gm, _) = degradation((d - h).max(0.0), m, psi, lp).unwrap();
            let fd = (gp - gm) / (2.0 * h);
            assert_relative_eq!(g1, fd, max_relative = 1e-6, epsilon = 1e-10);
        }
    }

    #[test]
    fn surface_density_values() {
        assert_eq!(crack_surface_density(0.0, [0.0, 0.0], 0.002), 0.0);
        assert_relative_eq!(
            crack_surface_density(1.0, [0.0, 0.0], 0.002),
            187.5,
            max_relative = 1e-14
        );
        let l = 0.01;
        assert_relative_eq!(
            crack_surface_density(0.5, [1.0 / l, 0.0], l),
            3.0 / (8.0 * l) * 1.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn driving_force_pre_peak_has_no_slip() {
        let f = driving_force(50.0e3, 80.0e3, 40.0e3, 10.0e6, 0.0);
        assert_eq!(f.h_slip, 0.0);
        assert_relative_eq!(f.h_plus, f.h_t, max_relative = 1e-15);
    }

    #[test]
    fn driving_force_brittle_limit() {
        let prev = 5.0;
        let f = driving_force(90.0e3, 40.0e3, 40.0e3, 10.0e6, prev);
        assert_eq!(f.h_t, 0.0);
        let expect = (50.0e3f64).powi(2) / (6.0 * 10.0e6);
        assert_relative_eq!(f.h_slip, prev.max(expect), max_relative = 1e-14);
    }

    #[test]
    fn driving_force_worked_example() {
        let f = driving_force(100.0e3, 80.0e3, 40.0e3, 10.0e6, 0.0);
        assert_relative_eq!(f.h_t, 1.6e9 / 6.0e7, max_relative = 1e-12);
        assert_relative_eq!(f.h_slip, 2.0e9 / 6.0e7, max_relative = 1e-12);
    }

    #[test]
    fn damaged_stress_reduces_to_hooke_at_zero_damage() {
        let params = direct_shear_material();
        let eps = SymTensor::plane(-0.004, -0.002, 0.0015);
        let decomp = decompose_strain(eps);
        let failure = evaluate_failure(&decomp, &params).unwrap();
        let sigma = damaged_stress(&decomp, 0.0, &params, &failure).unwrap();
        let hooke = SymTensor::spherical(params.bulk_modulus * decomp.eps_v)
            + decomp.dev.scale(2.0 * params.shear_modulus);
        assert_relative_eq!(sigma.xx, hooke.xx, max_relative = 1e-12);
        assert_relative_eq!(sigma.yy, hooke.yy, max_relative = 1e-12);
        assert_relative_eq!(sigma.zz, hooke.zz, max_relative = 1e-12);
        assert_relative_eq!(sigma.xy, hooke.xy, max_relative = 1e-12);
    }

    #[test]
    fn damaged_stress_fully_damaged_states() {
        let mut params = direct_shear_material();
        params.residual_friction_angle = 0.0;
        params.residual_cohesion = 0.0;
        // cohesionless, zero pressure, full damage -> zero stress
        let eps = SymTensor::plane(0.0, 0.0, 0.01);
        let decomp = decompose_strain(eps);
        let failure = evaluate_failure(&decomp, &params).unwrap();
        assert_eq!(failure.q_res, 0.0);
        let sigma = damaged_stress(&decomp, 1.0, &params, &failure).unwrap();
        assert_abs_diff_eq!(sigma.norm(), 0.0, epsilon = 1e-12);

        // with residual strength the deviatoric magnitude equals q_res
        let params = direct_shear_material();
        let eps = SymTensor::new(-0.004, -0.006, -0.004, 0.02);
        let decomp = decompose_strain(eps);
        let failure = evaluate_failure(&decomp, &params).unwrap();
        assert!(failure.q_res > 0.0);
        let sigma = damaged_stress(&decomp, 1.0, &params, &failure).unwrap();
        let inv = deviatoric_invariants(&sigma.deviator()).unwrap();
        assert_relative_eq!(inv.q, failure.q_res, max_relative = 1e-12);
    }

    #[test]
    fn lode_angle_range_over_random_deviators() {
        // simple deterministic LCG
        let mut s = 0x2545F4914F6CDD1Du64;
        let mut unit = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..10_000 {
            let t = SymTensor::new(unit(), unit(), unit(), unit());
            let dev = t.deviator();
            if dev.norm() < 1e-12 {
                continue;
            }
            let inv = deviatoric_invariants(&dev).unwrap();
            assert!(inv.lode_angle >= 0.0 && inv.lode_angle <= std::f64::consts::FRAC_PI_3);
            if inv.clamped {
                // clamping may only shave floating-point noise
                let raw = (inv.r / inv.q).powi(3);
                assert!(raw.abs() - 1.0 <= 1e-9, "clamped too far: {raw}");
            }
        }
    }

    #[test]
    fn slip_history_is_monotone() {
        let params = direct_shear_material();
        let mut prev = 0.0;
        let mut s = 99991u64;
        for _ in 0..1000 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let q_hat = ((s >> 33) as f64 / (1u64 << 31) as f64) * 200.0e3;
            let f = driving_force(q_hat, 80.0e3, 40.0e3, params.shear_modulus, prev);
            assert!(f.h_slip >= prev);
            prev = f.h_slip;
        }
    }

    #[test]
    fn scale_covariance_pre_peak() {
        let params = direct_shear_material();
        // trace-free strain keeps p = 0, so the strengths must not move
        let eps = SymTensor::new(0.001, -0.0007, -0.0003, 0.0004);
        assert!(eps.trace().abs() < 1e-18);
        let f1 = evaluate_failure(&decompose_strain(eps), &params).unwrap();
        let f2 = evaluate_failure(&decompose_strain(eps.scale(3.5)), &params).unwrap();
        assert_relative_eq!(f2.q_hat, 3.5 * f1.q_hat, max_relative = 1e-12);
        assert_relative_eq!(f2.q_peak, f1.q_peak, max_relative = 1e-12);
        assert_relative_eq!(f2.q_res, f1.q_res, max_relative = 1e-12);
    }

    #[test]
    fn update_point_tangent_reduces_to_elasticity_at_zero_damage() {
        let params = direct_shear_material();
        let eps = SymTensor::plane(-0.002, -0.001, 0.0008);
        let up = update_point(eps, 0.0, 0.0, &params).unwrap();
        let k = params.bulk_modulus;
        let mu = params.shear_modulus;
        let t = up.tangent.0;
        assert_relative_eq!(t[0][0], k + 4.0 * mu / 3.0, max_relative = 1e-12);
        assert_relative_eq!(t[0][1], k - 2.0 * mu / 3.0, max_relative = 1e-12);
        assert_relative_eq!(t[2][2], mu, max_relative = 1e-12);
        assert_relative_eq!(t[0][2], 0.0, epsilon = 1e-6);
    }

    proptest! {
        /// Recomposition: kappa eps_v I + sqrt(2/3) (3 mu eps_q) alpha_q
        /// equals kappa eps_v I + 2 mu e.
        #[test]
        fn prop_stress_round_trip(
            xx in -0.01f64..0.01, yy in -0.01f64..0.01,
            zz in -0.01f64..0.01, xy in -0.01f64..0.01,
        ) {
            let eps = SymTensor::new(xx, yy, zz, xy);
            let d = decompose_strain(eps);
            prop_assume!(!d.degenerate);
            let mu = 10.0e6;
            let kappa = 21.7e6;
            let via_alpha = SymTensor::spherical(kappa * d.eps_v)
                + d.alpha_q.scale((2.0f64/3.0).sqrt() * 3.0 * mu * d.eps_q);
            let via_dev = SymTensor::spherical(kappa * d.eps_v) + d.dev.scale(2.0 * mu);
            let scale = via_dev.norm().max(1e-30);
            prop_assert!((via_alpha - via_dev).norm() / scale <= 1e-12);
        }

        /// Mises consistency: q(2 mu e) == 3 mu eps_q.
        #[test]
        fn prop_mises_consistency(
            xx in -0.01f64..0.01, yy in -0.01f64..0.01,
            zz in -0.01f64..0.01, xy in -0.01f64..0.01,
        ) {
            let eps = SymTensor::new(xx, yy, zz, xy);
            let d = decompose_strain(eps);
            prop_assume!(!d.degenerate);
            let mu = 10.0e6;
            let inv = deviatoric_invariants(&d.dev.scale(2.0 * mu)).unwrap();
            let q_direct = 3.0 * mu * d.eps_q;
            prop_assert!((inv.q - q_direct).abs() <= 1e-12 * q_direct.max(1e-30));
        }

        /// g stays within bounds and decreases for any admissible parameters.
        #[test]
        fn prop_degradation_bounds(d in 0.0f64..=1.0, k in 0.1f64..1e4) {
            let (g, g1) = degradation(d, k, 1.0, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert!(g1 <= 1e-15);
        }
    }
}
