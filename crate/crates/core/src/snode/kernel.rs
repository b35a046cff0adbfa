//! Kernel s(x, u) of the S operator: the diagonal blocks in closed form, the
//! off-diagonal blocks by a contour integral of resolvents.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{resolvent_derivative, resolvent_with_integral, PhiColumns};
use crate::error::{Error, Result};
use crate::linalg::{C64, I, ZERO};
use crate::model::PoleSet;

/// Circle around d_k used for the off-diagonal kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    /// Radius; `None` means |d_k − d_p|/2.
    pub radius: Option<f64>,
    pub points: usize,
}

impl Default for Contour {
    fn default() -> Self {
        Contour {
            radius: None,
            points: 64,
        }
    }
}

impl Contour {
    fn radius_for(&self, gap: f64) -> Result<f64> {
        let r = self.radius.unwrap_or(0.5 * gap);
        if !(r > 0.0 && r < gap) || self.points < 3 {
            return Err(Error::Contour { radius: r, gap });
        }
        Ok(r)
    }

    /// (λ_t, dλ_t/(2π)) for the anticlockwise trapezoid rule.
    fn nodes(&self, center: f64, gap: f64) -> Result<Vec<(C64, C64)>> {
        let r = self.radius_for(gap)?;
        let n = self.points;
        Ok((0..n)
            .map(|t| {
                let e = C64::from_polar(r, 2.0 * PI * t as f64 / n as f64);
                (C64::new(center, 0.0) + e, I * e / n as f64)
            })
            .collect())
    }
}

/// One column's contribution to s_kk(x_i, x_j) evaluated directly:
/// b[∫₀^{min} g(x−s) conj g(u−s) ds + boundary terms with Φ(0)].
pub fn kernel_diag(b: f64, dphi: &[C64], phi0: C64, h: f64, i: usize, j: usize) -> C64 {
    let mn = i.min(j);
    let mut acc = ZERO;
    for t in 0..=mn {
        let wt = if t == 0 || t == mn { 0.5 } else { 1.0 };
        acc += dphi[i - t] * dphi[j - t].conj() * wt;
    }
    if mn == 0 {
        acc = ZERO;
    }
    let boundary = if i > j {
        dphi[i - j] * phi0.conj()
    } else if i < j {
        phi0 * dphi[j - i].conj()
    } else {
        (dphi[0] * phi0.conj() + phi0 * dphi[0].conj()) * 0.5
    };
    (acc * h + boundary) * b
}

/// All s_kk(x_i, x_j), summed over both columns of Φ_k, in O(n²).
pub fn kernel_diag_block(b: f64, phi: &PhiColumns, k: usize) -> DMatrix<C64> {
    let nodes = phi.grid.node_count();
    let h = phi.grid.h();
    let mut out = DMatrix::<C64>::zeros(nodes, nodes);
    for c in 0..2 {
        let g = &phi.d1[k][c];
        if g.iter().all(|z| *z == ZERO) {
            continue;
        }
        let f0 = phi.value[k][c][0];
        // Running sums P(i, j) = Σ_{t ≤ min} g_{i−t} conj g_{j−t} along diagonals.
        let mut prev = DMatrix::<C64>::zeros(nodes, nodes);
        for i in 0..nodes {
            for j in 0..nodes {
                let gg = g[i] * g[j].conj();
                let p = if i > 0 && j > 0 { prev[(i - 1, j - 1)] } else { ZERO } + gg;
                prev[(i, j)] = p;
                let mn = i.min(j);
                let trap = if mn == 0 {
                    ZERO
                } else {
                    (p - gg * 0.5 - g[i - mn] * g[j - mn].conj() * 0.5) * h
                };
                let boundary = if i > j {
                    g[i - j] * f0.conj()
                } else if i < j {
                    f0 * g[j - i].conj()
                } else {
                    (g[0] * f0.conj() + f0 * g[0].conj()) * 0.5
                };
                out[(i, j)] += (trap + boundary) * b;
            }
        }
    }
    out
}

fn resolvent_columns(
    poles: &PoleSet,
    phi: &PhiColumns,
    k: usize,
    lambda: C64,
) -> Result<[(Vec<C64>, Vec<C64>); 2]> {
    let h = phi.grid.h();
    Ok([
        resolvent_with_integral(poles, k, lambda, &phi.value[k][0], h)?,
        resolvent_with_integral(poles, k, lambda, &phi.value[k][1], h)?,
    ])
}

/// s_kp(x_i, x_j) for k ≠ p by the contour rule, one entry.
pub fn kernel_offdiag(
    poles: &PoleSet,
    phi: &PhiColumns,
    k: usize,
    p: usize,
    i: usize,
    j: usize,
    contour: Contour,
) -> Result<C64> {
    if k == p {
        return Err(Error::Validation("off-diagonal kernel needs k != p".into()));
    }
    let gap = (poles.d(k) - poles.d(p)).abs();
    let mut acc = ZERO;
    for (lambda, dl) in contour.nodes(poles.d(k), gap)? {
        let gk = resolvent_columns(poles, phi, k, lambda)?;
        let gp = resolvent_columns(poles, phi, p, lambda.conj())?;
        for c in 0..2 {
            acc += dl * gk[c].0[i] * gp[c].0[j].conj();
        }
    }
    Ok(acc)
}

/// Whole s_kp block, nodes × nodes.
pub fn kernel_offdiag_block(
    poles: &PoleSet,
    phi: &PhiColumns,
    k: usize,
    p: usize,
    contour: Contour,
) -> Result<DMatrix<C64>> {
    if k == p {
        return Err(Error::Validation("off-diagonal kernel needs k != p".into()));
    }
    let nodes = phi.grid.node_count();
    let gap = (poles.d(k) - poles.d(p)).abs();
    let mut out = DMatrix::<C64>::zeros(nodes, nodes);
    for (lambda, dl) in contour.nodes(poles.d(k), gap)? {
        let gk = resolvent_columns(poles, phi, k, lambda)?;
        let gp = resolvent_columns(poles, phi, p, lambda.conj())?;
        let left = DMatrix::from_fn(nodes, 2, |i, c| gk[c].0[i] * dl);
        let right = DMatrix::from_fn(2, nodes, |c, j| gp[c].0[j].conj());
        out += left * right;
    }
    Ok(out)
}

/// ∂_u s_kp(x_j, u) at u = x_r for j ≤ r, as an (r+1)·m × m matrix (row j·m + k, column p).
pub(crate) fn kernel_du_column(
    poles: &PoleSet,
    phi: &PhiColumns,
    contour: Contour,
    r: usize,
) -> Result<DMatrix<C64>> {
    let m = poles.len();
    let h = phi.grid.h();
    let mut out = DMatrix::<C64>::zeros((r + 1) * m, m);
    for k in 0..m {
        let b = poles.b(k);
        for c in 0..2 {
            let g = &phi.d1[k][c];
            let gg = &phi.d2[k][c];
            let f0 = phi.value[k][c][0];
            for j in 0..=r {
                // x = x_j ≤ u = x_r: ∫₀^{x} g(x−s) conj g′(u−s) ds + Φ(0) conj g′(u−x).
                let mut acc = ZERO;
                if j > 0 {
                    for t in 0..=j {
                        let wt = if t == 0 || t == j { 0.5 } else { 1.0 };
                        acc += g[j - t] * gg[r - t].conj() * wt;
                    }
                }
                out[(j * m + k, k)] += (acc * h + f0 * gg[r - j].conj()) * b;
            }
        }
        for p in (0..m).filter(|&p| p != k) {
            let gap = (poles.d(k) - poles.d(p)).abs();
            for (lambda, dl) in contour.nodes(poles.d(k), gap)? {
                let gk = resolvent_columns(poles, phi, k, lambda)?;
                let lc = lambda.conj();
                let gp = resolvent_columns(poles, phi, p, lc)?;
                for c in 0..2 {
                    let dgp = resolvent_derivative(
                        poles,
                        p,
                        lc,
                        &phi.value[p][c],
                        &phi.d1[p][c],
                        &gp[c].1,
                    );
                    let tail = dgp[r].conj() * dl;
                    for j in 0..=r {
                        out[(j * m + k, p)] += gk[c].0[j] * tail;
                    }
                }
            }
        }
    }
    Ok(out)
}
