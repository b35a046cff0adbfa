//! Fixed inputs for the m = 2, d = ±1 desk problems.

use crate::error::Result;
use crate::linalg::{C64, ONE, ZERO};
use crate::model::{GridSpec, PoleSet, PotentialField, Row};
use crate::snode::PhiColumns;

/// d = (1, −1), b = (1, 1).
pub fn two_poles() -> PoleSet {
    PoleSet::sine_gordon_x()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Trigonometric Φ_k2 with closed-form first and second derivatives.
pub fn smooth_phi2(k: usize, x: f64) -> (C64, C64, C64) {
    match k {
        0 => (
            c(0.4 * (1.5 * x).cos(), 0.3 * (2.0 * x).sin()),
            c(-0.6 * (1.5 * x).sin(), 0.6 * (2.0 * x).cos()),
            c(-0.9 * (1.5 * x).cos(), -1.2 * (2.0 * x).sin()),
        ),
        _ => (
            c(-0.2 + 0.5 * x.sin(), -0.25 * (3.0 * x).cos()),
            c(0.5 * x.cos(), 0.75 * (3.0 * x).sin()),
            c(-0.5 * x.sin(), 2.25 * (3.0 * x).cos()),
        ),
    }
}

/// Standard columns [1, Φ_k2] of the smooth preset.
pub fn smooth_phi_columns(grid: GridSpec) -> PhiColumns {
    PhiColumns::from_fn(grid, 2, |k, x| {
        let (v, d1, d2) = smooth_phi2(k, x);
        ([ONE, v], [ZERO, d1], [ZERO, d2])
    })
}

/// Smooth ground-truth rows β_k(x) with β_k1(0) ≠ 0.
pub fn smooth_beta(k: usize, x: f64) -> Row {
    let (a, t) = if k == 0 {
        (0.3 + 0.25 * (1.3 * x).sin(), 0.5 * x)
    } else {
        (0.5 - 0.2 * x + 0.1 * x * x, -0.4 * x + 0.2)
    };
    [c(a.cos(), 0.0), C64::from_polar(a.sin(), t)]
}

pub fn smooth_potential(grid: GridSpec) -> Result<PotentialField> {
    PotentialField::from_fn(grid, 2, smooth_beta)
}

/// Ground truth with β_2(0) = [0, 1], violating β_k1(0) ≠ 0 at k = 2.
pub fn weyl_set_beta(k: usize, x: f64) -> Row {
    if k == 0 {
        smooth_beta(0, x)
    } else {
        let a = std::f64::consts::FRAC_PI_2 - 0.35 * x - 0.1 * x * x;
        [C64::from_polar(a.cos(), 0.3 * x), c(a.sin(), 0.0)]
    }
}

pub fn weyl_set_potential(grid: GridSpec) -> Result<PotentialField> {
    PotentialField::from_fn(grid, 2, weyl_set_beta)
}

/// Equals `smooth_beta` on [0, l0]; beyond it each row is rotated by its own fixed angle.
pub fn split_beta(l0: f64, k: usize, x: f64) -> Row {
    let [a, b] = smooth_beta(k, x);
    if x <= l0 {
        return [a, b];
    }
    let turn = C64::from_polar(1.0, 0.7);
    let tilt = if k == 0 { 0.5_f64 } else { -0.3 };
    let (ct, st) = (tilt.cos(), tilt.sin());
    // Rotate the row within the unit sphere, then twist its phase.
    [a * ct - b * st * turn.conj(), (a * st * turn + b * ct)]
}

/// The pair (smooth, split at l0) on a common grid.
pub fn split_pair(grid: GridSpec, l0: f64) -> Result<(PotentialField, PotentialField)> {
    Ok((
        smooth_potential(grid)?,
        PotentialField::from_fn(grid, 2, |k, x| split_beta(l0, k, x))?,
    ))
}
