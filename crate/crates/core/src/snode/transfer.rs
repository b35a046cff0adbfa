//! Transfer matrix w_A(r, λ) = I − iΠ(r)* S(r)⁻¹ (A(r) − λ)⁻¹ Π(r).

use nalgebra::DMatrix;

use super::sweep::InverseSweep;
use super::{resolvent_apply, SNode};
use crate::error::Result;
use crate::linalg::{Mat2, C64, I};
use crate::model::PotentialField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSample {
    pub r: usize,
    pub lambda: C64,
    pub w: Mat2,
}

/// (A − λ)⁻¹Φ on the full grid, node-major N × 2.
fn shifted_resolvent(node: &SNode, lambda: C64) -> Result<DMatrix<C64>> {
    let m = node.m();
    let nodes = node.grid.node_count();
    let h = node.grid.h();
    let mut out = DMatrix::<C64>::zeros(nodes * m, 2);
    for k in 0..m {
        for c in 0..2 {
            let g = resolvent_apply(&node.poles, k, lambda, &node.phi.value[k][c], h)?;
            for (i, gi) in g.into_iter().enumerate() {
                out[(i * m + k, c)] = -gi;
            }
        }
    }
    Ok(out)
}

/// Σ_j w_j^{(r)} X_jᴴ Y_j over nodes ≤ r, both node-major with two columns.
fn pairing(node: &SNode, r: usize, x: &DMatrix<C64>, y: &DMatrix<C64>) -> Mat2 {
    let m = node.m();
    let h = node.grid.h();
    let mut acc = Mat2::zero();
    for j in 0..=r {
        let wj = if r == 0 {
            0.0
        } else if j == 0 || j == r {
            0.5 * h
        } else {
            h
        };
        if wj == 0.0 {
            continue;
        }
        for k in 0..m {
            let a = j * m + k;
            for c in 0..2 {
                for d in 0..2 {
                    acc.0[c][d] += x[(a, c)].conj() * y[(a, d)] * wj;
                }
            }
        }
    }
    acc
}

fn phi_prefix(node: &SNode, r: usize) -> DMatrix<C64> {
    let m = node.m();
    DMatrix::from_fn((r + 1) * m, 2, |a, c| node.phi.value[a % m][c][a / m])
}

fn transfer_at(
    node: &SNode,
    sweep: &InverseSweep,
    r: usize,
    lambda: C64,
    resolvent: &DMatrix<C64>,
) -> Result<(Mat2, Mat2)> {
    let m = node.m();
    let f = resolvent.rows(0, (r + 1) * m).into_owned();
    let x = sweep.apply_s_inv(r, &f)?;
    let w = Mat2::identity() - pairing(node, r, &phi_prefix(node, r), &x).scale(I);
    // Gram right-hand side: I − i(λ − λ̄) ((A−λ)⁻¹Π)* S⁻¹ (A−λ)⁻¹Π
    let gram = Mat2::identity() - pairing(node, r, &f, &x).scale(I * (lambda - lambda.conj()));
    Ok((w, gram))
}

pub fn transfer_matrix(
    node: &SNode,
    sweep: &InverseSweep,
    r: usize,
    lambda: C64,
) -> Result<TransferSample> {
    let res = shifted_resolvent(node, lambda)?;
    let (w, _) = transfer_at(node, sweep, r, lambda, &res)?;
    Ok(TransferSample { r, lambda, w })
}

/// w_A(x_r, λ) for every node.
pub fn transfer_profile(node: &SNode, sweep: &InverseSweep, lambda: C64) -> Result<Vec<Mat2>> {
    let res = shifted_resolvent(node, lambda)?;
    (0..node.grid.node_count())
        .map(|r| transfer_at(node, sweep, r, lambda, &res).map(|p| p.0))
        .collect()
}

/// ‖w_A* w_A − (I − i(λ−λ̄)Π*(A*−λ̄)⁻¹S⁻¹(A−λ)⁻¹Π)‖ at node r.
pub fn gram_defect(node: &SNode, sweep: &InverseSweep, r: usize, lambda: C64) -> Result<f64> {
    let res = shifted_resolvent(node, lambda)?;
    let (w, gram) = transfer_at(node, sweep, r, lambda, &res)?;
    Ok((w.adjoint() * w - gram).max_abs())
}

/// max over interior r of ‖central difference of w_A − iβ*B(λ−D)⁻¹β w_A‖ / ‖w_A‖.
pub fn transfer_ode_residual(
    node: &SNode,
    sweep: &InverseSweep,
    beta: &PotentialField,
    lambda: C64,
) -> Result<f64> {
    let w = transfer_profile(node, sweep, lambda)?;
    let h = node.grid.h();
    let mut worst = 0.0_f64;
    for r in 1..w.len() - 1 {
        let mut coef = Mat2::zero();
        for k in 0..node.m() {
            let z = lambda - node.poles.d(k);
            coef += beta.projector(k, r).scale(I * node.poles.b(k) / z);
        }
        let fd = (w[r + 1] - w[r - 1]).scale_re(0.5 / h);
        let resid = fd - coef * w[r];
        worst = worst.max(resid.norm() / w[r].norm());
    }
    Ok(worst)
}
