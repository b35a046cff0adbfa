//! Small fixed-size complex matrices and a few dense helpers.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A 2×2 complex matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    /// diag(1, -1)
    pub const fn j() -> Self {
        Mat2::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    /// The exchange matrix [[0, 1], [1, 0]].
    pub const fn exchange() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    /// β*β for a row β.
    pub fn outer(row: &[C64; 2]) -> Self {
        Mat2::new(
            row[0].conj() * row[0],
            row[0].conj() * row[1],
            row[1].conj() * row[0],
            row[1].conj() * row[1],
        )
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn conj(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[0][1].conj(), m[1][0].conj(), m[1][1].conj())
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2::new(m[1][1], -m[0][1], -m[1][0], m[0][0]).scale(det.inv()))
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Spectral norm, from the largest eigenvalue of A*A.
    pub fn norm(&self) -> f64 {
        let g = self.adjoint() * *self;
        let a = g.0[0][0].re;
        let c = g.0[1][1].re;
        let b = g.0[0][1].norm();
        let half = 0.5 * (a - c);
        let top = 0.5 * (a + c) + (half * half + b * b).sqrt();
        top.max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|z| z.is_finite())
    }

    /// Smallest eigenvalue of the Hermitian part (A + A*)/2.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        let h = (*self + self.adjoint()).scale_re(0.5);
        let a = h.0[0][0].re;
        let c = h.0[1][1].re;
        let b = h.0[0][1].norm();
        let half = 0.5 * (a - c);
        0.5 * (a + c) - (half * half + b * b).sqrt()
    }

    /// Row-vector times matrix.
    pub fn left_mul(row: &[C64; 2], m: &Mat2) -> [C64; 2] {
        [
            row[0] * m.0[0][0] + row[1] * m.0[1][0],
            row[0] * m.0[0][1] + row[1] * m.0[1][1],
        ]
    }

    pub fn mul_vec(&self, v: &[C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Möbius action θ ↦ (a θ + b) / (c θ + d).
    pub fn mobius(&self, theta: C64) -> (C64, C64) {
        let num = self.0[0][0] * theta + self.0[0][1];
        let den = self.0[1][0] * theta + self.0[1][1];
        (num, den)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

pub fn row_norm_sqr(row: &[C64; 2]) -> f64 {
    row[0].norm_sqr() + row[1].norm_sqr()
}

/// Spectral norm of a dense matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
}

/// Entire functions φ₁(z) = (eᶻ − 1)/z and φ₂(z) = (eᶻ − 1 − z)/z², series near 0.
pub fn phi_functions(z: C64) -> (C64, C64) {
    if z.norm() < 0.125 {
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        let mut term = ONE; // z^n / (n+1)!
        let mut fact_shift = 2.0; // n + 2
        let mut zn_over_np2 = C64::new(0.5, 0.0); // z^n/(n+2)!
        for n in 0..16 {
            p1 += term;
            p2 += zn_over_np2;
            fact_shift += 1.0;
            term = term * z / (n as f64 + 2.0);
            zn_over_np2 = zn_over_np2 * z / fact_shift;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - ONE) / z, (e - ONE - z) / (z * z))
    }
}
