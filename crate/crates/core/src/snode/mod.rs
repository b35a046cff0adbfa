//! The structured operator triple (A, S, Π) built from a Weyl function, its
//! Nyström discretization, and the restricted-inverse sweep that recovers β.

mod kernel;
mod sweep;
mod transfer;

pub use kernel::{
    kernel_diag, kernel_diag_block, kernel_offdiag, kernel_offdiag_block, Contour,
};
pub use sweep::{
    beta_derivative, direct_sweep, factorization_residual, inverse_sweep, recover_beta,
    triangular_factor, InverseSweep, RecoveredBeta, CONDITION_LIMIT, ROW_DRIFT_LIMIT,
};
pub use transfer::{
    gram_defect, transfer_matrix, transfer_ode_residual, transfer_profile, TransferSample,
};

use nalgebra::{DMatrix, DVector};

use crate::direct::WeylData;
use crate::error::{Error, Result};
use crate::linalg::{phi_functions, spectral_norm, C64, I, ZERO};
use crate::model::{GridSpec, PoleSet};

/// Sampled Φ_k = [Φ_k1, Φ_k2] for every pole, with first and second derivatives.
///
/// In the standard setting Φ_k1 ≡ 1; in the Weyl-set setting one column of
/// each pole is ≡ 1 and the other varies.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiColumns {
    pub grid: GridSpec,
    /// `value[k][c][i]`
    pub value: Vec<[Vec<C64>; 2]>,
    pub d1: Vec<[Vec<C64>; 2]>,
    pub d2: Vec<[Vec<C64>; 2]>,
}

impl PhiColumns {
    /// Columns from closed forms returning (Φ_k(x), Φ_k′(x), Φ_k″(x)).
    pub fn from_fn(
        grid: GridSpec,
        m: usize,
        f: impl Fn(usize, f64) -> ([C64; 2], [C64; 2], [C64; 2]),
    ) -> Self {
        let mut value = Vec::with_capacity(m);
        let mut d1 = Vec::with_capacity(m);
        let mut d2 = Vec::with_capacity(m);
        for k in 0..m {
            let samples: Vec<_> = grid.nodes().map(|x| f(k, x)).collect();
            let col = |sel: &dyn Fn(&([C64; 2], [C64; 2], [C64; 2])) -> [C64; 2], c: usize| {
                samples.iter().map(|s| sel(s)[c]).collect::<Vec<_>>()
            };
            value.push([col(&|s| s.0, 0), col(&|s| s.0, 1)]);
            d1.push([col(&|s| s.1, 0), col(&|s| s.1, 1)]);
            d2.push([col(&|s| s.2, 0), col(&|s| s.2, 1)]);
        }
        PhiColumns {
            grid,
            value,
            d1,
            d2,
        }
    }

    /// Standard columns [1, Φ_k2] from samples of Φ_k2 and Φ_k2′; Φ_k2″ by differencing.
    pub fn standard(grid: GridSpec, phi2: Vec<Vec<C64>>, dphi2: Vec<Vec<C64>>) -> Result<Self> {
        let flags = vec![false; phi2.len()];
        PhiColumns::with_varying(grid, &flags, phi2, dphi2)
    }

    /// `swapped[k]` puts the varying samples into column 1 and makes column 2 ≡ 1.
    pub fn with_varying(
        grid: GridSpec,
        swapped: &[bool],
        varying: Vec<Vec<C64>>,
        dvarying: Vec<Vec<C64>>,
    ) -> Result<Self> {
        let nodes = grid.node_count();
        if varying.len() != swapped.len() || dvarying.len() != swapped.len() {
            return Err(Error::Validation("Φ column count mismatch".into()));
        }
        if varying.iter().chain(&dvarying).any(|v| v.len() != nodes) {
            return Err(Error::Validation(format!("Φ samples must have {nodes} entries")));
        }
        let ones = vec![C64::new(1.0, 0.0); nodes];
        let zeros = vec![ZERO; nodes];
        let mut value = Vec::new();
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for (k, (v, dv)) in varying.into_iter().zip(dvarying).enumerate() {
            let ddv = differentiate(&dv, grid.h());
            if swapped[k] {
                value.push([v, ones.clone()]);
                d1.push([dv, zeros.clone()]);
                d2.push([ddv, zeros.clone()]);
            } else {
                value.push([ones.clone(), v]);
                d1.push([zeros.clone(), dv]);
                d2.push([zeros.clone(), ddv]);
            }
        }
        Ok(PhiColumns {
            grid,
            value,
            d1,
            d2,
        })
    }

    pub fn m(&self) -> usize {
        self.value.len()
    }

    /// Φ_k(x_i) as a row [Φ_k1, Φ_k2].
    pub fn row(&self, k: usize, i: usize) -> [C64; 2] {
        [self.value[k][0][i], self.value[k][1][i]]
    }

    /// D̃_k = |Φ_k1(0)|² + |Φ_k2(0)|².
    pub fn dtilde(&self) -> Vec<f64> {
        (0..self.m())
            .map(|k| self.value[k][0][0].norm_sqr() + self.value[k][1][0].norm_sqr())
            .collect()
    }

    /// Columns truncated to the first r subintervals.
    pub fn prefix(&self, r: usize) -> Result<Self> {
        let grid = self.grid.prefix(r)?;
        let cut = |v: &Vec<[Vec<C64>; 2]>| {
            v.iter()
                .map(|[a, b]| [a[..=r].to_vec(), b[..=r].to_vec()])
                .collect()
        };
        Ok(PhiColumns {
            grid,
            value: cut(&self.value),
            d1: cut(&self.d1),
            d2: cut(&self.d2),
        })
    }
}

/// Second-order finite-difference derivative on a uniform grid.
pub fn differentiate(f: &[C64], h: f64) -> Vec<C64> {
    let n = f.len();
    if n < 3 {
        return vec![ZERO; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (f[0] * -3.0 + f[1] * 4.0 - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Result of the Fourier synthesis for one pole.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub value: Vec<C64>,
    pub derivative: Vec<C64>,
    /// Fitted φ ≈ c + α/μ + γ/μ² on the outer decile (μ the sampled variable).
    pub c: C64,
    pub alpha: C64,
    pub gamma: C64,
    /// Estimated contribution of the truncated ζ tail to Φ on [0, l].
    pub truncation_estimate: f64,
}

/// Φ(x) = (i/2π)∫ μ⁻¹ e^{iμx} f(μ/2) dζ along Im μ = 2η, for samples f(ζ_j + iη).
///
/// The asymptotic part c + α/μ is inverted in closed form (−c − 2iαx); only the
/// O(μ⁻²) remainder is summed numerically.
pub fn synthesize(f: &[C64], zeta: &[f64], eta: f64, grid: &GridSpec) -> Result<Synthesis> {
    let count = zeta.len();
    if count < 16 || f.len() != count {
        return Err(Error::Validation(format!(
            "synthesis needs at least 16 matching samples, got {} and {}",
            count,
            f.len()
        )));
    }
    let dz = zeta[1] - zeta[0];
    let uniform = zeta
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dz).abs() <= 1e-9 * dz.abs());
    let symmetric = (zeta[0] + zeta[count - 1]).abs() <= 1e-9 * dz.abs();
    if !(dz > 0.0 && uniform && symmetric) {
        return Err(Error::Validation("ζ grid must be uniform, increasing and symmetric".into()));
    }
    // Outer decile of |ζ|.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| zeta[b].abs().total_cmp(&zeta[a].abs()));
    let tail = &order[..(count / 10).max(3)];
    let mut design = DMatrix::<C64>::zeros(tail.len(), 3);
    let mut rhs = DVector::<C64>::zeros(tail.len());
    for (row, &j) in tail.iter().enumerate() {
        let inv = C64::new(zeta[j], eta).inv();
        design[(row, 0)] = C64::new(1.0, 0.0);
        design[(row, 1)] = inv;
        design[(row, 2)] = inv * inv;
        rhs[row] = f[j];
    }
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Validation(format!("asymptotic fit failed: {e}")))?;
    let (c, alpha, gamma) = (coef[0], coef[1], coef[2]);

    // Transform variable μ_F = 2μ.
    let eta_f = 2.0 * eta;
    let dzf = 2.0 * dz;
    let remainder: Vec<(f64, C64, C64)> = (0..count)
        .map(|j| {
            let mu = C64::new(zeta[j], eta);
            let g = f[j] - c - alpha / mu;
            let muf = mu * 2.0;
            (2.0 * zeta[j], g, g / muf)
        })
        .collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut value = Vec::with_capacity(grid.node_count());
    let mut derivative = Vec::with_capacity(grid.node_count());
    for x in grid.nodes() {
        let mut s0 = ZERO;
        let mut s1 = ZERO;
        for &(zf, g, g_over) in &remainder {
            let e = C64::from_polar(dzf, zf * x);
            s0 += e * g_over;
            s1 += e * g;
        }
        let damp = (-eta_f * x).exp();
        value.push(-c - I * 2.0 * alpha * x + I / two_pi * damp * s0);
        derivative.push(-I * 2.0 * alpha - damp / two_pi * s1);
    }
    let a = zeta[count - 1] * 2.0 + 0.5 * dzf;
    let truncation_estimate =
        (-eta_f * grid.l()).exp() / two_pi * 4.0 * gamma.norm() / (a * a);
    Ok(Synthesis {
        value,
        derivative,
        c,
        alpha,
        gamma,
        truncation_estimate,
    })
}

/// Φ₂ evaluated at a single point, 0 for x < 0.
pub fn synth_value_at(f: &[C64], zeta: &[f64], eta: f64, x: f64) -> Result<C64> {
    if x < 0.0 {
        return Ok(ZERO);
    }
    let grid = GridSpec::new(x.max(1e-300), 2)?;
    let s = synthesize(f, zeta, eta, &grid)?;
    Ok(*s.value.last().expect("grid has nodes"))
}

/// Standard Φ columns [1, Φ_k2] from a Weyl function.
pub fn synth_phi2(weyl: &WeylData, grid: &GridSpec) -> Result<(PhiColumns, Vec<Synthesis>)> {
    let parts = weyl
        .phi
        .iter()
        .map(|f| synthesize(f, &weyl.zeta, weyl.eta, grid))
        .collect::<Result<Vec<_>>>()?;
    let cols = PhiColumns::standard(
        *grid,
        parts.iter().map(|p| p.value.clone()).collect(),
        parts.iter().map(|p| p.derivative.clone()).collect(),
    )?;
    Ok((cols, parts))
}

/// Resolvent (λ − A_k)⁻¹ applied to samples of f, where (A_k f)(x) = d_k f(x) + i b_k ∫₀ˣ f.
///
/// Returns g and the inner integral J(x) = ∫₀ˣ e^{ib(x−u)/(λ−d)} f(u) du,
/// computed by an exponential product rule that is exact for piecewise-linear f.
pub fn resolvent_with_integral(
    poles: &PoleSet,
    k: usize,
    lambda: C64,
    f: &[C64],
    h: f64,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let z = lambda - poles.d(k);
    if z == ZERO {
        return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{k}")));
    }
    let b = poles.b(k);
    let a = I * b / z;
    let (p1, p2) = phi_functions(a * h);
    let e = (a * h).exp();
    // Weights of f_i and f_{i−1} for a linear segment.
    let c0 = p2 * h;
    let c1 = (p1 - p2) * h;
    let mut j = vec![ZERO; f.len()];
    for i in 1..f.len() {
        j[i] = e * j[i - 1] + c0 * f[i] + c1 * f[i - 1];
    }
    let coef = I * b / (z * z);
    let g = f.iter().zip(&j).map(|(fi, ji)| fi / z + coef * ji).collect();
    Ok((g, j))
}

pub fn resolvent_apply(
    poles: &PoleSet,
    k: usize,
    lambda: C64,
    f: &[C64],
    h: f64,
) -> Result<Vec<C64>> {
    Ok(resolvent_with_integral(poles, k, lambda, f, h)?.0)
}

/// x-derivative of the resolvent output: f′/z + (ib/z²)(f + (ib/z)J).
pub(crate) fn resolvent_derivative(
    poles: &PoleSet,
    k: usize,
    lambda: C64,
    f: &[C64],
    df: &[C64],
    j: &[C64],
) -> Vec<C64> {
    let z = lambda - poles.d(k);
    let a = I * poles.b(k) / z;
    f.iter()
        .zip(df)
        .zip(j)
        .map(|((fi, dfi), ji)| dfi / z + a / z * (fi + a * ji))
        .collect()
}

/// Discretized S-node: D̃, the kernel blocks s(x_i, x_j), and quadrature weights.
#[derive(Debug, Clone)]
pub struct SNode {
    pub poles: PoleSet,
    pub grid: GridSpec,
    pub phi: PhiColumns,
    pub dtilde: Vec<f64>,
    /// `kernel[(i·m + k, j·m + p)] = s_kp(x_i, x_j)`.
    pub kernel: DMatrix<C64>,
    /// Trapezoid weights on [0, l].
    pub weights: Vec<f64>,
}

impl SNode {
    pub fn m(&self) -> usize {
        self.poles.len()
    }

    pub fn size(&self) -> usize {
        self.grid.node_count() * self.m()
    }

    /// b_k D̃_k for each pole.
    pub fn bd(&self) -> Vec<f64> {
        (0..self.m()).map(|k| self.poles.b(k) * self.dtilde[k]).collect()
    }

    fn weight_of(&self, idx: usize) -> f64 {
        self.weights[idx / self.m()]
    }

    /// Nyström matrix S = B D̃ + K·W (acts on node-major samples).
    pub fn smat(&self) -> DMatrix<C64> {
        let m = self.m();
        let bd = self.bd();
        let n = self.size();
        DMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { C64::new(bd[a % m], 0.0) } else { ZERO };
            diag + self.kernel[(a, b)] * self.weight_of(b)
        })
    }

    /// Hermitian form W^{1/2} S W^{-1/2} = B D̃ + W^{1/2} K W^{1/2}.
    pub fn symmetric_smat(&self) -> DMatrix<C64> {
        let m = self.m();
        let bd = self.bd();
        let n = self.size();
        DMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { C64::new(bd[a % m], 0.0) } else { ZERO };
            diag + self.kernel[(a, b)] * (self.weight_of(a) * self.weight_of(b)).sqrt()
        })
    }

    /// ‖Ŝ − Ŝ*‖ / ‖Ŝ‖ for the Hermitian form.
    pub fn hermiticity_defect(&self) -> f64 {
        let s = self.symmetric_smat();
        spectral_norm(&(&s - s.adjoint())) / spectral_norm(&s)
    }

    /// Half the jump of s_kk across the diagonal: s_kk(x, x⁺) − s_kk(x, x) = i b_k Im Σ_c Φ_kc(0) conj Φ_kc′(0).
    pub fn diagonal_jump(&self, k: usize) -> C64 {
        let mut acc = ZERO;
        for c in 0..2 {
            acc += self.phi.value[k][c][0] * self.phi.d1[k][c][0].conj();
        }
        I * self.poles.b(k) * acc.im
    }

    /// Nyström matrix of S(r) on [0, x_r] with its own trapezoid weights. Row 0 and
    /// row r take the one-sided limit of s_kk on the diagonal (the integration range
    /// lies entirely on one side of x there); other rows use the stored average.
    pub fn restricted_smat(&self, r: usize) -> DMatrix<C64> {
        let m = self.m();
        let bd = self.bd();
        let w = self.grid.trapezoid_weights(r);
        let size = (r + 1) * m;
        let mut s = DMatrix::from_fn(size, size, |a, b| {
            let diag = if a == b { C64::new(bd[a % m], 0.0) } else { ZERO };
            diag + self.kernel[(a, b)] * w[b / m]
        });
        if r > 0 {
            for k in 0..m {
                let jump = self.diagonal_jump(k);
                s[(k, k)] += jump * w[0];
                s[(r * m + k, r * m + k)] -= jump * w[r];
            }
        }
        s
    }

    /// Node-major samples of Φ: an N × 2 matrix.
    pub fn pi_matrix(&self) -> DMatrix<C64> {
        let m = self.m();
        DMatrix::from_fn(self.size(), 2, |a, c| self.phi.value[a % m][c][a / m])
    }
}

/// Assemble the S-node from Φ columns.
pub fn assemble_s(phi: PhiColumns, poles: &PoleSet, contour: Contour) -> Result<SNode> {
    let m = poles.len();
    if phi.m() != m {
        return Err(Error::Validation(format!(
            "{} Φ columns for {m} poles",
            phi.m()
        )));
    }
    let grid = phi.grid;
    let nodes = grid.node_count();
    let size = nodes * m;
    let mut kernel = DMatrix::<C64>::zeros(size, size);
    for k in 0..m {
        let block = kernel_diag_block(poles.b(k), &phi, k);
        for i in 0..nodes {
            for j in 0..nodes {
                kernel[(i * m + k, j * m + k)] = block[(i, j)];
            }
        }
        for p in (k + 1)..m {
            let block = kernel_offdiag_block(poles, &phi, k, p, contour)?;
            for i in 0..nodes {
                for j in 0..nodes {
                    kernel[(i * m + k, j * m + p)] = block[(i, j)];
                    kernel[(j * m + p, i * m + k)] = block[(i, j)].conj();
                }
            }
        }
    }
    Ok(SNode {
        poles: poles.clone(),
        grid,
        dtilde: phi.dtilde(),
        phi,
        kernel,
        weights: grid.trapezoid_weights(grid.n()),
    })
}

/// Raw residual A S − S A* − iΠΠ*, with S and the trapezoid weights per unknown.
///
/// A = D + iB·A₀ with A₀ the cumulative trapezoid rule for ∫₀ˣ, and A* = D − iB·A₀′
/// with A₀′ the trapezoid rule for ∫ₓˡ, so that A₀ + A₀′ is exactly the rank-one 1wᵀ.
fn identity_residual_matrix(node: &SNode) -> (DMatrix<C64>, DMatrix<C64>, Vec<f64>) {
    let m = node.m();
    let nodes = node.grid.node_count();
    let n = node.grid.n();
    let h = node.grid.h();
    let size = node.size();
    let w = &node.weights;
    let mut a = DMatrix::<C64>::zeros(size, size);
    let mut a_star = DMatrix::<C64>::zeros(size, size);
    for i in 0..nodes {
        for k in 0..m {
            let row = i * m + k;
            let b = node.poles.b(k);
            let d = C64::new(node.poles.d(k), 0.0);
            a[(row, row)] = d;
            a_star[(row, row)] = d;
            for j in 0..=i {
                let wt = if i == 0 { 0.0 } else if j == 0 || j == i { 0.5 * h } else { h };
                a[(row, j * m + k)] += I * b * wt;
            }
            for j in i..nodes {
                let wt = if i == n { 0.0 } else if j == i || j == n { 0.5 * h } else { h };
                a_star[(row, j * m + k)] -= I * b * wt;
            }
        }
    }
    let s = node.smat();
    let wv: Vec<f64> = (0..size).map(|idx| w[idx / m]).collect();
    let pi = node.pi_matrix();
    let pipi = DMatrix::from_fn(size, size, |r, c| {
        (pi[(r, 0)] * pi[(c, 0)].conj() + pi[(r, 1)] * pi[(c, 1)].conj()) * wv[c]
    });
    let mut resid = &a * &s - &s * &a_star - pipi * I;
    // s_kk jumps across the diagonal. Integrals that start at the corner x = u = 0
    // need the one-sided limit there, not the stored average: x > u along column 0
    // of A·S, u > x along row 0 of S·A*. On the rest of the diagonal both products
    // see the same end-point error and it cancels.
    for k in 0..m {
        let fix = I * node.poles.b(k) * 0.5 * h * node.diagonal_jump(k) * w[0];
        for i in 1..nodes {
            resid[(i * m + k, k)] -= fix;
            resid[(k, i * m + k)] += if i == n { fix } else { fix * 2.0 };
        }
    }
    (resid, s, wv)
}

fn max_row_sum(mtx: &DMatrix<C64>) -> f64 {
    mtx.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// ‖AS − SA* − iΠΠ*‖ / ‖S‖ in the sup-norm on node samples (max row sum).
pub fn identity_residual(node: &SNode) -> f64 {
    let (resid, s, _) = identity_residual_matrix(node);
    max_row_sum(&resid) / max_row_sum(&s)
}

/// Same ratio in the trapezoid-weighted L² operator norm. End columns carry an
/// O(h²) composite-weight error there, so this one only falls like h^1.5.
pub fn identity_residual_l2(node: &SNode) -> f64 {
    let (resid, s, wv) = identity_residual_matrix(node);
    let size = wv.len();
    let scale = |mtx: &DMatrix<C64>| {
        DMatrix::from_fn(size, size, |r, c| mtx[(r, c)] * (wv[r] / wv[c]).sqrt())
    };
    spectral_norm(&scale(&resid)) / spectral_norm(&scale(&s))
}
