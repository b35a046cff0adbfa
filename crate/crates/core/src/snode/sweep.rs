//! Restricted inverses S(r)⁻¹ for every r, by bordering the Hermitian form of
//! S on global trapezoid weights and correcting the last node's weight.

use nalgebra::DMatrix;

use super::kernel::kernel_du_column;
use super::{Contour, SNode};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, C64, ZERO};
use crate::model::{normalize_row, PotentialField, Row};

/// Largest accepted condition estimate of a principal block.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Row-norm drift that turns a recovered potential into an error.
pub const ROW_DRIFT_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct InverseSweep {
    m: usize,
    /// Global trapezoid weights.
    weights: Vec<f64>,
    /// Ŷ_r: last block row of Ĝ_r⁻¹, m × (r+1)m.
    ldl_rows: Vec<DMatrix<C64>>,
    /// Σ_r, the Schur complement pivots (Ŷ_rr = Σ_r⁻¹).
    pivots: Vec<DMatrix<C64>>,
    /// Last block row of S(r)⁻¹ with the true weights of [0, x_r], m × (r+1)m.
    s_inv_rows: Vec<DMatrix<C64>>,
    /// T_r(x_r, x_j), j ≤ r, m × (r+1)m.
    t_rows: Vec<DMatrix<C64>>,
    /// S(r) = G̃_r − U Eᵀ: the node indices whose block columns E selects, and U.
    corrections: Vec<(Vec<usize>, DMatrix<C64>)>,
    pub max_condition: f64,
}

fn block(mat: &DMatrix<C64>, rows: usize, cols: usize, m: usize) -> DMatrix<C64> {
    mat.view((rows * m, cols * m), (m, m)).into_owned()
}

fn invert(mat: &DMatrix<C64>, r: usize) -> Result<DMatrix<C64>> {
    mat.clone().try_inverse().ok_or(Error::Conditioning {
        r,
        estimate: f64::INFINITY,
    })
}

fn inf_norm(mat: &DMatrix<C64>) -> f64 {
    mat.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Weights of [0, x_r] on nodes 0..=r.
fn restricted_weight(h: f64, r: usize, j: usize) -> f64 {
    if r == 0 {
        0.0
    } else if j == 0 || j == r {
        0.5 * h
    } else {
        h
    }
}

impl InverseSweep {
    pub fn len(&self) -> usize {
        self.t_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_rows.is_empty()
    }

    /// T_r(x_r, x_j) as an m × m block.
    pub fn t(&self, r: usize, j: usize) -> DMatrix<C64> {
        self.t_rows[r].columns(j * self.m, self.m).into_owned()
    }

    /// Last block row of S(r)⁻¹ (node-major columns).
    pub fn s_inv_row(&self, r: usize) -> &DMatrix<C64> {
        &self.s_inv_rows[r]
    }

    pub fn t_row(&self, r: usize) -> &DMatrix<C64> {
        &self.t_rows[r]
    }

    pub fn pivot(&self, r: usize) -> &DMatrix<C64> {
        &self.pivots[r]
    }

    pub fn ldl_row(&self, r: usize) -> &DMatrix<C64> {
        &self.ldl_rows[r]
    }

    /// Ĝ_r⁻¹ y, with Ĝ_r the Hermitian principal block on global weights.
    fn apply_g_hat(&self, r: usize, y: &DMatrix<C64>) -> DMatrix<C64> {
        let m = self.m;
        let mut out = DMatrix::<C64>::zeros(y.nrows(), y.ncols());
        for s in 0..=r {
            let rows = (s + 1) * m;
            let ys = &self.ldl_rows[s];
            let proj = ys * y.rows(0, rows);
            let update = ys.adjoint() * (&self.pivots[s] * proj);
            let mut target = out.rows_mut(0, rows);
            target += update;
        }
        out
    }

    /// G̃_r⁻¹ v for the unsymmetrized form on global weights.
    fn apply_g(&self, r: usize, v: &DMatrix<C64>) -> DMatrix<C64> {
        let m = self.m;
        let sq: Vec<f64> = (0..(r + 1) * m).map(|a| self.weights[a / m].sqrt()).collect();
        let y = DMatrix::from_fn(v.nrows(), v.ncols(), |a, c| v[(a, c)] * sq[a]);
        let x = self.apply_g_hat(r, &y);
        DMatrix::from_fn(x.nrows(), x.ncols(), |a, c| x[(a, c)] / sq[a])
    }

    /// S(r)⁻¹ v for node-major v on nodes 0..=r.
    pub fn apply_s_inv(&self, r: usize, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let m = self.m;
        if v.nrows() != (r + 1) * m {
            return Err(Error::Validation(format!(
                "vector has {} rows, S({r}) has {}",
                v.nrows(),
                (r + 1) * m
            )));
        }
        let gv = self.apply_g(r, v);
        let (blocks, u) = &self.corrections[r];
        if blocks.is_empty() {
            return Ok(gv);
        }
        let gu = self.apply_g(r, u);
        let z = gather(&gu, blocks, m);
        let inner = invert(&(DMatrix::<C64>::identity(z.nrows(), z.nrows()) - z), r)?;
        let tail = inner * gather(&gv, blocks, m);
        Ok(gv + gu * tail)
    }
}

/// Block rows `blocks` of a node-major matrix, stacked.
fn gather(mat: &DMatrix<C64>, blocks: &[usize], m: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(blocks.len() * m, mat.ncols());
    for (q, &j) in blocks.iter().enumerate() {
        out.rows_mut(q * m, m).copy_from(&mat.rows(j * m, m));
    }
    out
}

fn finish_row(
    node: &SNode,
    r: usize,
    x_hat: &DMatrix<C64>,
    blocks: &[usize],
    u: &DMatrix<C64>,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let m = node.m();
    let size = (r + 1) * m;
    let h = node.grid.h();
    let bd = node.bd();
    // G̃_r⁻¹ = W^{-1/2} Ĝ_r⁻¹ W^{1/2}
    let sq: Vec<f64> = (0..size).map(|a| node.weights[a / m].sqrt()).collect();
    let g_rows = |j: usize| {
        DMatrix::from_fn(m, size, |a, c| x_hat[(j * m + a, c)] * sq[c] / sq[j * m + a])
    };
    let row_g = g_rows(r);
    let s_row = if blocks.is_empty() {
        row_g
    } else {
        let y = DMatrix::from_fn(size, u.ncols(), |a, c| u[(a, c)] * sq[a]);
        let x = x_hat * y;
        let gu = DMatrix::from_fn(size, u.ncols(), |a, c| x[(a, c)] / sq[a]);
        let z = gather(&gu, blocks, m);
        let inner = invert(&(DMatrix::<C64>::identity(z.nrows(), z.nrows()) - z), r)?;
        let mut e2g = DMatrix::<C64>::zeros(blocks.len() * m, size);
        for (q, &j) in blocks.iter().enumerate() {
            e2g.rows_mut(q * m, m).copy_from(&g_rows(j));
        }
        row_g + gu.rows(r * m, m) * inner * e2g
    };
    let t_row = if r == 0 {
        // T₀(0,0) = −(BD̃)⁻¹ s(0,0⁺) (BD̃)⁻¹
        DMatrix::from_fn(m, m, |a, c| {
            let jump = if a == c { node.diagonal_jump(a) } else { ZERO };
            -(node.kernel[(a, c)] + jump) / (bd[a] * bd[c])
        })
    } else {
        DMatrix::from_fn(m, size, |a, c| {
            let j = c / m;
            let diag = if j == r && a == c % m { 1.0 / bd[a] } else { 0.0 };
            (s_row[(a, c)] - diag) / restricted_weight(h, r, j)
        })
    };
    Ok((s_row, t_row))
}

/// S(r) − G̃_r as −U Eᵀ. The last block column fixes the end weight and takes the
/// one-sided kernel limit at (x_r, x_r); block column 0 does the same at (0, 0).
fn correction(node: &SNode, r: usize) -> (Vec<usize>, DMatrix<C64>) {
    let m = node.m();
    let h = node.grid.h();
    let size = (r + 1) * m;
    if r == 0 {
        let col = node.kernel.view((0, 0), (m, m)) * C64::new(node.weights[0], 0.0);
        return (vec![0], col);
    }
    let dw = node.weights[r] - 0.5 * h;
    let mut last = node.kernel.view((0, r * m), (size, m)) * C64::new(dw, 0.0);
    let mut first = DMatrix::<C64>::zeros(size, m);
    let mut jumps = false;
    for k in 0..m {
        let jump = node.diagonal_jump(k) * (0.5 * h);
        jumps |= jump != ZERO;
        last[(r * m + k, k)] += jump;
        first[(k, k)] -= jump;
    }
    let mut blocks = Vec::new();
    let mut cols = Vec::new();
    if dw != 0.0 || jumps {
        blocks.push(r);
        cols.push(last);
    }
    if jumps {
        blocks.push(0);
        cols.push(first);
    }
    if blocks.is_empty() {
        return (blocks, DMatrix::zeros(size, 0));
    }
    let mut u = DMatrix::<C64>::zeros(size, cols.len() * m);
    for (q, c) in cols.iter().enumerate() {
        u.columns_mut(q * m, m).copy_from(c);
    }
    (blocks, u)
}

/// Bordering sweep over r = 0..n.
pub fn inverse_sweep(node: &SNode) -> Result<InverseSweep> {
    let m = node.m();
    let nodes = node.grid.node_count();
    let w = &node.weights;
    let g_hat = node.symmetric_smat();

    let mut x_hat = DMatrix::<C64>::zeros(0, 0);
    let mut g_norm_rows: Vec<f64> = Vec::new();
    let mut ldl_rows = Vec::with_capacity(nodes);
    let mut pivots = Vec::with_capacity(nodes);
    let mut s_inv_rows = Vec::with_capacity(nodes);
    let mut t_rows = Vec::with_capacity(nodes);
    let mut corrections = Vec::with_capacity(nodes);
    let mut max_condition = 0.0_f64;

    for r in 0..nodes {
        let prev = r * m;
        let delta = block(&g_hat, r, r, m);
        let c = g_hat.view((0, prev), (prev, m)).into_owned();
        let xc = &x_hat * &c;
        let mut sigma = if prev == 0 {
            delta
        } else {
            delta - c.adjoint() * &xc
        };
        sigma = (&sigma + sigma.adjoint()) * C64::new(0.5, 0.0);
        let sigma_inv = invert(&sigma, r)?;
        let mut next = DMatrix::<C64>::zeros(prev + m, prev + m);
        if prev > 0 {
            let xcs = &xc * &sigma_inv;
            let upper = &x_hat + &xcs * xc.adjoint();
            next.view_mut((0, 0), (prev, prev)).copy_from(&upper);
            next.view_mut((0, prev), (prev, m)).copy_from(&(-&xcs));
            next.view_mut((prev, 0), (m, prev)).copy_from(&(-xcs.adjoint()));
        }
        next.view_mut((prev, prev), (m, m)).copy_from(&sigma_inv);
        x_hat = next;

        // Condition estimate ‖Ĝ_r‖∞ ‖Ĝ_r⁻¹‖∞, with row sums of Ĝ_r grown incrementally.
        for (a, acc) in g_norm_rows.iter_mut().enumerate() {
            *acc += (0..m).map(|q| g_hat[(a, prev + q)].norm()).sum::<f64>();
        }
        for a in prev..prev + m {
            g_norm_rows.push((0..prev + m).map(|q| g_hat[(a, q)].norm()).sum());
        }
        let g_norm = g_norm_rows.iter().cloned().fold(0.0, f64::max);
        let estimate = g_norm * inf_norm(&x_hat);
        max_condition = max_condition.max(estimate);
        if !(estimate <= CONDITION_LIMIT) {
            return Err(Error::Conditioning { r, estimate });
        }

        let ldl_row = x_hat.rows(prev, m).into_owned();
        let (blocks, u) = correction(node, r);
        let (s_row, t_row) = finish_row(node, r, &x_hat, &blocks, &u)?;
        ldl_rows.push(ldl_row);
        pivots.push(sigma);
        s_inv_rows.push(s_row);
        t_rows.push(t_row);
        corrections.push((blocks, u));
    }
    Ok(InverseSweep {
        m,
        weights: w.clone(),
        ldl_rows,
        pivots,
        s_inv_rows,
        t_rows,
        corrections,
        max_condition,
    })
}

/// Independent per-r inversion of S(r) with its own trapezoid weights; the test oracle.
/// Returns the last block rows of S(r)⁻¹.
pub fn direct_sweep(node: &SNode) -> Result<Vec<DMatrix<C64>>> {
    let m = node.m();
    (0..node.grid.node_count())
        .map(|r| {
            let inv = node.restricted_smat(r).lu().try_inverse().ok_or(Error::Conditioning {
                r,
                estimate: f64::INFINITY,
            })?;
            Ok(inv.rows(r * m, m).into_owned())
        })
        .collect()
}

/// Recovered potential: raw rows as produced by the sweep, plus their normalization.
#[derive(Debug, Clone)]
pub struct RecoveredBeta {
    /// `raw[k][i]`, without any renormalization.
    pub raw: Vec<Vec<Row>>,
    pub field: PotentialField,
    /// max |‖β_k(x_i)‖² − 1|.
    pub max_drift: f64,
}

/// β(x_r) = B D̃^{1/2} (S(r)⁻¹Φ)(x_r) for every node.
pub fn recover_beta(node: &SNode, sweep: &InverseSweep) -> Result<RecoveredBeta> {
    let m = node.m();
    let nodes = node.grid.node_count();
    let mut raw = vec![Vec::with_capacity(nodes); m];
    let mut max_drift = 0.0_f64;
    for r in 0..nodes {
        let row = sweep.s_inv_row(r);
        for k in 0..m {
            let mut acc = [ZERO, ZERO];
            for j in 0..=r {
                for p in 0..m {
                    let coef = row[(k, j * m + p)];
                    let phi = node.phi.row(p, j);
                    acc[0] += coef * phi[0];
                    acc[1] += coef * phi[1];
                }
            }
            let scale = node.poles.b(k) * node.dtilde[k].sqrt();
            let beta = [acc[0] * scale, acc[1] * scale];
            let drift = (beta[0].norm_sqr() + beta[1].norm_sqr() - 1.0).abs();
            max_drift = max_drift.max(drift);
            raw[k].push(beta);
        }
    }
    if !(max_drift <= ROW_DRIFT_LIMIT) {
        return Err(Error::ReconstructionQuality(format!(
            "recovered rows drift from unit norm by {max_drift:e}"
        )));
    }
    let rows = raw
        .iter()
        .map(|series| {
            series
                .iter()
                .map(|b| {
                    let n = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
                    normalize_row([b[0] / n, b[1] / n])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let field = PotentialField::new(node.grid, rows)?;
    Ok(RecoveredBeta {
        raw,
        field,
        max_drift,
    })
}

/// Node-major Φ restricted to nodes ≤ r: (r+1)m × 2.
fn phi_block(node: &SNode, r: usize) -> DMatrix<C64> {
    let m = node.m();
    DMatrix::from_fn((r + 1) * m, 2, |a, c| node.phi.value[a % m][c][a / m])
}

/// β′(x_r) as m rows. With F = S(r)⁻¹Φ,
/// β′ = B D̃^{1/2} [(B D̃)⁻¹(Φ′ − ∫₀^{x_r} ∂ₓs(x_r, t) F(t) dt − [s]F)(x_r) + T_r(x_r⁻, x_r) B D̃ F(x_r)],
/// where [s] = s(x, x⁻) − s(x, x⁺) is the diagonal jump swept along by x, and the
/// last term is the derivative of S(r)⁻¹ in r.
pub fn beta_derivative(
    node: &SNode,
    sweep: &InverseSweep,
    r: usize,
    contour: Contour,
) -> Result<Vec<Row>> {
    let m = node.m();
    let h = node.grid.h();
    let bd = node.bd();
    let f = sweep.apply_s_inv(r, &phi_block(node, r))?;
    // ∂ₓs_kp(x_r, x_j) = conj ∂_u s_pk(x_j, x_r)
    let du = kernel_du_column(&node.poles, &node.phi, contour, r)?;
    let mut integral = DMatrix::<C64>::zeros(m, 2);
    for j in 0..=r {
        let wj = restricted_weight(h, r, j);
        if wj == 0.0 {
            continue;
        }
        for k in 0..m {
            for p in 0..m {
                let ds = du[(j * m + p, k)].conj() * wj;
                for c in 0..2 {
                    integral[(k, c)] += ds * f[(j * m + p, c)];
                }
            }
        }
    }
    // T_r(x_r⁻, x_r) from S(r)⁻¹ s(·, x_r) = −T_r(·, x_r) B D̃, with the column
    // taking the x < u limit of s_kk at its last node.
    let mut col = node.kernel.view((0, r * m), ((r + 1) * m, m)).into_owned();
    for k in 0..m {
        col[(r * m + k, k)] += node.diagonal_jump(k);
    }
    let x = sweep.apply_s_inv(r, &col)?;
    let t_rr = DMatrix::from_fn(m, m, |a, c| -x[(r * m + a, c)] / bd[c]);
    let jumps: Vec<C64> = (0..m).map(|k| node.diagonal_jump(k)).collect();
    let bdf = DMatrix::from_fn(m, 2, |p, c| f[(r * m + p, c)] * bd[p]);
    let shift = t_rr * bdf;
    Ok((0..m)
        .map(|k| {
            let scale = node.poles.b(k) * node.dtilde[k].sqrt();
            let mut row = [ZERO; 2];
            for (c, v) in row.iter_mut().enumerate() {
                let moving = jumps[k] * 2.0 * f[(r * m + k, c)];
                let fx = (node.phi.d1[k][c][r] - integral[(k, c)] + moving) / bd[k];
                *v = (fx + shift[(k, c)]) * scale;
            }
            row
        })
        .collect())
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    for _ in 0..100 {
        let yi = invert(&y, 0)?;
        let zi = invert(&z, 0)?;
        let y_next = (&y + zi) * C64::new(0.5, 0.0);
        let z_next = (&z + yi) * C64::new(0.5, 0.0);
        let change = (&y_next - &y).norm() / y_next.norm();
        y = y_next;
        z = z_next;
        if change < 1e-15 {
            break;
        }
    }
    Ok(y)
}

/// Block lower-triangular factor V̂ with V̂* B V̂ = Ĝ⁻¹ (Hermitian form, node-major).
pub fn triangular_factor(node: &SNode, sweep: &InverseSweep) -> Result<DMatrix<C64>> {
    let m = node.m();
    let size = node.size();
    let b = DMatrix::from_fn(m, m, |a, c| {
        if a == c {
            C64::new(node.poles.b(a), 0.0)
        } else {
            ZERO
        }
    });
    let mut v = DMatrix::<C64>::zeros(size, size);
    for r in 0..node.grid.node_count() {
        let c_r = sqrtm(&(&b * sweep.pivot(r)))?;
        let row = &b * c_r * sweep.ldl_row(r);
        v.view_mut((r * m, 0), (m, (r + 1) * m)).copy_from(&row);
    }
    Ok(v)
}

/// ‖V̂* B V̂ Ĝ − I‖ / ‖Ĝ‖ for the triangular factor of the sweep.
pub fn factorization_residual(node: &SNode, sweep: &InverseSweep) -> Result<f64> {
    let m = node.m();
    let size = node.size();
    let v = triangular_factor(node, sweep)?;
    let bv = DMatrix::from_fn(size, size, |a, c| v[(a, c)] * node.poles.b(a % m));
    let g = node.symmetric_smat();
    let prod = v.adjoint() * bv * &g - DMatrix::<C64>::identity(size, size);
    Ok(spectral_norm(&prod) / spectral_norm(&g))
}
