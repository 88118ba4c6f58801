use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::math::sqrt;

/// The five real mean-field variables: cavity quadratures `x1 + i x2 = α`
/// (amplitude per √N) and the collective spin `j = J / N`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanFieldState {
    pub x1: f64,
    pub x2: f64,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl MeanFieldState {
    pub const NORMAL: Self = Self::new(0.0, 0.0, 0.0, 0.0, -0.5);
    pub const INVERTED: Self = Self::new(0.0, 0.0, 0.0, 0.0, 0.5);

    pub const fn new(x1: f64, x2: f64, jx: f64, jy: f64, jz: f64) -> Self {
        Self { x1, x2, jx, jy, jz }
    }

    pub const fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub const fn as_array(&self) -> [f64; 5] {
        [self.x1, self.x2, self.jx, self.jy, self.jz]
    }

    /// Cavity amplitude `α = x1 + i x2`.
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.x1, self.x2)
    }

    /// `|α|²`, the photon number per atom.
    pub fn photon_number(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn spin_norm_sq(&self) -> f64 {
        self.jx * self.jx + self.jy * self.jy + self.jz * self.jz
    }

    /// Deviation from the Bloch-sphere constraint `|j|² = 1/4`.
    pub fn spin_norm_error(&self) -> f64 {
        (self.spin_norm_sq() - 0.25).abs()
    }

    /// Image under `a → -a`, `Jx → -Jx`, `Jy → -Jy` (a rotation by π about
    /// the z axis, which keeps the spin algebra intact).
    pub fn parity(&self) -> Self {
        Self::new(-self.x1, -self.x2, -self.jx, -self.jy, self.jz)
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.as_array().iter().map(|v| v * v).sum())
    }

    /// Euclidean distance on the 5-vector.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

impl Add for MeanFieldState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.x1 + o.x1,
            self.x2 + o.x2,
            self.jx + o.jx,
            self.jy + o.jy,
            self.jz + o.jz,
        )
    }
}

impl Sub for MeanFieldState {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.x1 - o.x1,
            self.x2 - o.x2,
            self.jx - o.jx,
            self.jy - o.jy,
            self.jz - o.jz,
        )
    }
}

impl Mul<f64> for MeanFieldState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s, self.jx * s, self.jy * s, self.jz * s)
    }
}
