//! Symmetric second-order tensors under the plane-strain embedding.
//!
//! Every strain and stress in this crate lives in 3D with the out-of-plane
//! shear components identically zero (eps_xz = eps_yz = 0), so a tensor is
//! stored as the four components (xx, yy, zz, xy). Traces and invariants are
//! always the full 3D ones.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
}

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor {
        xx: 0.0,
        yy: 0.0,
        zz: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64) -> Self {
        Self { xx, yy, zz, xy }
    }

    /// Plane tensor with zero out-of-plane normal component.
    pub fn plane(xx: f64, yy: f64, xy: f64) -> Self {
        Self {
            xx,
            yy,
            zz: 0.0,
            xy,
        }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.0)
    }

    pub fn spherical(a: f64) -> Self {
        Self::new(a, a, a, 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// Deviatoric part, `self - tr/3 * I`.
    pub fn deviator(&self) -> SymTensor {
        let m = self.trace() / 3.0;
        SymTensor::new(self.xx - m, self.yy - m, self.zz - m, self.xy)
    }

    /// Full contraction `a : b` (the xy component counts twice).
    pub fn double_dot(&self, other: &SymTensor) -> f64 {
        self.xx * other.xx + self.yy * other.yy + self.zz * other.zz + 2.0 * self.xy * other.xy
    }

    pub fn norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    /// Trace of the matrix cube. For the (xx, yy, zz, xy) layout this is
    /// `xx^3 + yy^3 + zz^3 + 3*xy^2*(xx + yy)`.
    pub fn trace_cubed(&self) -> f64 {
        self.xx.powi(3)
            + self.yy.powi(3)
            + self.zz.powi(3)
            + 3.0 * self.xy * self.xy * (self.xx + self.yy)
    }

    pub fn scale(&self, s: f64) -> SymTensor {
        SymTensor::new(self.xx * s, self.yy * s, self.zz * s, self.xy * s)
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(self, o: SymTensor) -> SymTensor {
        SymTensor::new(self.xx + o.xx, self.yy + o.yy, self.zz + o.zz, self.xy + o.xy)
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(self, o: SymTensor) -> SymTensor {
        SymTensor::new(self.xx - o.xx, self.yy - o.yy, self.zz - o.zz, self.xy - o.xy)
    }
}

impl Mul<f64> for SymTensor {
    type Output = SymTensor;
    fn mul(self, s: f64) -> SymTensor {
        self.scale(s)
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self.scale(-1.0)
    }
}
