//! Direct problem: fundamental solution, gauge transform, Weyl disks and the
//! WT-functions sampled along a horizontal line.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{row_norm_sqr, Mat2, C64, I, ONE, ZERO};
use crate::model::{gauge_q_unchecked, GridSpec, PoleSet, PotentialField, Row};

/// Lower bound for the Möbius denominator in the WT-function.
pub const MOBIUS_EPS: f64 = 1e-8;

/// Target value of h·Σ|b_k/(λ−d_k)| per substep.
const STEP_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepper {
    /// Fourth-order Magnus with two Gauss points.
    #[default]
    Magnus4,
    /// Classical Runge–Kutta.
    Rk4,
}

#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub lambda: C64,
    pub grid: GridSpec,
    /// w(x_i, λ) at every node.
    pub samples: Vec<Mat2>,
    pub substeps: usize,
}

impl FundamentalSolution {
    pub fn at_end(&self) -> Mat2 {
        *self.samples.last().expect("grid has nodes")
    }
}

/// i Σ_k b_k (λ−d_k)^{-1} β_k*β_k at x.
pub fn coefficient(potential: &PotentialField, poles: &PoleSet, lambda: C64, x: f64) -> Mat2 {
    let mut acc = Mat2::zero();
    for k in 0..poles.len() {
        let s = I * poles.b(k) / (lambda - poles.d(k));
        acc += Mat2::outer(&potential.value_at(k, x)).scale(s);
    }
    acc
}

/// exp of a 2×2 matrix through the Cayley–Hamilton closed form.
pub fn expm2(m: Mat2) -> Mat2 {
    let half_tr = m.trace() * 0.5;
    let n = m - Mat2::identity().scale(half_tr);
    // n² = δ·I
    let delta = -n.det();
    let s = delta.sqrt();
    let (ch, sh_over_s) = if s.norm() < 1e-4 {
        let d = delta;
        (
            ONE + d / 2.0 + d * d / 24.0 + d * d * d / 720.0,
            ONE + d / 6.0 + d * d / 120.0 + d * d * d / 5040.0,
        )
    } else {
        (s.cosh(), s.sinh() / s)
    };
    (Mat2::identity().scale(ch) + n.scale(sh_over_s)).scale(half_tr.exp())
}

fn check_lambda(poles: &PoleSet, lambda: C64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda = {lambda} is not finite")));
    }
    for k in 0..poles.len() {
        if lambda == C64::new(poles.d(k), 0.0) {
            return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{k}")));
        }
    }
    Ok(())
}

fn substeps_for(poles: &PoleSet, lambda: C64, h: f64, target: f64) -> usize {
    let scale: f64 = (0..poles.len())
        .map(|k| poles.b(k).abs() / (lambda - poles.d(k)).norm())
        .sum();
    ((h * scale / target).ceil() as usize).max(1)
}

/// Fundamental solution w′ = i Σ b_k(λ−d_k)^{-1}β_k*β_k w, w(0) = I, at every grid node.
pub fn integrate_fundamental(
    potential: &PotentialField,
    poles: &PoleSet,
    lambda: C64,
) -> Result<FundamentalSolution> {
    integrate_with(potential, poles, lambda, Stepper::default(), 1)
}

/// Same, with an explicit stepper and a multiplier on the automatic substep count.
pub fn integrate_with(
    potential: &PotentialField,
    poles: &PoleSet,
    lambda: C64,
    stepper: Stepper,
    refine: usize,
) -> Result<FundamentalSolution> {
    check_lambda(poles, lambda)?;
    if potential.m() != poles.len() {
        return Err(Error::Validation(format!(
            "potential has {} rows but the pole set has {}",
            potential.m(),
            poles.len()
        )));
    }
    let grid = *potential.grid();
    let h = grid.h();
    let base = match stepper {
        Stepper::Magnus4 => substeps_for(poles, lambda, h, STEP_SCALE),
        // RK4 has no exact exponential part, so it needs finer steps for the same accuracy.
        Stepper::Rk4 => substeps_for(poles, lambda, h, 0.01),
    };
    let sub = base * refine.max(1);
    let dt = h / sub as f64;
    let coef = |x: f64| coefficient(potential, poles, lambda, x);
    let g = 3f64.sqrt() / 6.0;

    let mut w = Mat2::identity();
    let mut samples = Vec::with_capacity(grid.node_count());
    samples.push(w);
    for i in 0..grid.n() {
        let x0 = grid.node(i);
        for s in 0..sub {
            let x = x0 + s as f64 * dt;
            w = match stepper {
                Stepper::Magnus4 => {
                    let a1 = coef(x + (0.5 - g) * dt);
                    let a2 = coef(x + (0.5 + g) * dt);
                    let comm = a2 * a1 - a1 * a2;
                    let omega = (a1 + a2).scale_re(0.5 * dt) + comm.scale_re(0.5 * g * dt * dt);
                    expm2(omega) * w
                }
                Stepper::Rk4 => {
                    let c0 = coef(x);
                    let c1 = coef(x + 0.5 * dt);
                    let c2 = coef(x + dt);
                    let k1 = c0 * w;
                    let k2 = c1 * (w + k1.scale_re(0.5 * dt));
                    let k3 = c1 * (w + k2.scale_re(0.5 * dt));
                    let k4 = c2 * (w + k3.scale_re(dt));
                    w + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(dt / 6.0)
                }
            };
        }
        if !w.is_finite() {
            return Err(Error::IntegrationQuality(format!(
                "fundamental solution overflowed at x = {} for lambda = {lambda}",
                grid.node(i + 1)
            )));
        }
        samples.push(w);
    }
    Ok(FundamentalSolution {
        lambda,
        grid,
        samples,
        substeps: sub,
    })
}

/// Integrate, then repeat with doubled substeps and require relative agreement `tol` at x = l.
pub fn integrate_checked(
    potential: &PotentialField,
    poles: &PoleSet,
    lambda: C64,
    tol: f64,
) -> Result<FundamentalSolution> {
    let coarse = integrate_with(potential, poles, lambda, Stepper::default(), 1)?;
    let fine = integrate_with(potential, poles, lambda, Stepper::default(), 2)?;
    let a = coarse.at_end();
    let b = fine.at_end();
    let change = (a - b).norm() / b.norm().max(1.0);
    if change > tol {
        return Err(Error::IntegrationQuality(format!(
            "doubling substeps moved w(l, {lambda}) by {change:e} > {tol:e}"
        )));
    }
    Ok(fine)
}

/// ξ_k(x_i, μ) = Q′Q* + i Q (Σ_{p≠k} b_p β_p*β_p/(λ−d_p)) Q*.
pub fn xi_matrix(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    i: usize,
    mu: C64,
) -> Result<Mat2> {
    let lambda = poles.mu_to_lambda(k, mu)?;
    let q = gauge_q_unchecked(&potential.row(k, i));
    let dq = gauge_q_unchecked(&potential.derivative(k, i));
    let mut cross = Mat2::zero();
    for p in (0..poles.len()).filter(|&p| p != k) {
        let z = lambda - poles.d(p);
        if z == ZERO {
            return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{p}")));
        }
        cross += potential.projector(p, i).scale(I * poles.b(p) / z);
    }
    Ok(dq * q.adjoint() + q * cross * q.adjoint())
}

/// Cutoff M with sup ‖ξ‖ < M/4 on Im μ < −M/4, inflated by (1 + margin).
pub fn bound_m(potential: &PotentialField, poles: &PoleSet, margin: f64) -> Result<f64> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::Validation(format!("margin must be positive, got {margin}")));
    }
    let deriv = potential.max_derivative_norm();
    if !deriv.is_finite() {
        return Err(Error::UnboundedCoefficient {
            iterations: 0,
            last: f64::INFINITY,
        });
    }
    let m = poles.len();
    // Once Im μ < −M/4, |λ − d_k| < 2/M, so |λ − d_p| > |d_k − d_p| − 2/M.
    let bound = |cut: f64| -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..m {
            let mut s = 0.0;
            for p in (0..m).filter(|&p| p != k) {
                let gap = (poles.d(k) - poles.d(p)).abs() - 2.0 / cut;
                if gap <= 0.0 {
                    return f64::INFINITY;
                }
                s += 1.0 / gap;
            }
            worst = worst.max(s);
        }
        deriv + worst
    };
    // f(M) = M − 4·bound(M) is increasing; bracket its root, then bisect.
    let f = |cut: f64| cut - 4.0 * bound(cut);
    let min_gap = (0..m).map(|k| poles.gap(k)).fold(f64::INFINITY, f64::min);
    let mut lo = if min_gap.is_finite() { 2.0 / min_gap } else { 0.0 };
    if f(lo.max(f64::MIN_POSITIVE)) >= 0.0 {
        let star = 4.0 * bound(lo.max(f64::MIN_POSITIVE));
        return Ok((star * (1.0 + margin)).max(4.0 * margin));
    }
    let mut hi = lo.max(1.0) * 2.0;
    let mut iterations = 0;
    while f(hi) < 0.0 {
        iterations += 1;
        if iterations >= 100 || !hi.is_finite() {
            return Err(Error::UnboundedCoefficient {
                iterations,
                last: hi,
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in iterations..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok((hi * (1.0 + margin)).max(4.0 * margin))
}

fn check_chart(poles: &PoleSet, k: usize, mu: C64, lambda: C64) -> Result<()> {
    let expected = poles.mu_to_lambda(k, mu)?;
    if (expected - lambda).norm() > 1e-12 * (1.0 + lambda.norm()) {
        return Err(Error::Validation(format!(
            "mu = {mu} maps to lambda = {expected}, but the solution is at {lambda}"
        )));
    }
    Ok(())
}

/// W_k(x_i, μ) = e^{−i x_i μ} Q_k(x_i) w(x_i, λ(μ)).
pub fn gauge_transform_w(
    w: &FundamentalSolution,
    k: usize,
    mu: C64,
    potential: &PotentialField,
    poles: &PoleSet,
) -> Result<Vec<Mat2>> {
    check_chart(poles, k, mu, w.lambda)?;
    Ok(w.samples
        .iter()
        .enumerate()
        .map(|(i, wi)| {
            let x = w.grid.node(i);
            let q = gauge_q_unchecked(&potential.row(k, i));
            (q * *wi).scale((-I * x * mu).exp())
        })
        .collect())
}

/// 𝔄(x, μ) = Q(0) W(x, μ)^{-1}, formed as Q(0) W(x, conj μ)* from the samples at conj μ.
pub fn matrix_frak_a(w_at_conj_mu: &[Mat2]) -> Vec<Mat2> {
    let q0 = w_at_conj_mu[0];
    w_at_conj_mu.iter().map(|w| q0 * w.adjoint()).collect()
}

/// 𝔄 by explicit 2×2 inversion of W(x, μ); the cross-check for [`matrix_frak_a`].
pub fn matrix_frak_a_by_inversion(w_at_mu: &[Mat2]) -> Result<Vec<Mat2>> {
    let q0 = w_at_mu[0];
    w_at_mu
        .iter()
        .map(|w| {
            w.inverse()
                .map(|inv| q0 * inv)
                .ok_or_else(|| Error::IntegrationQuality("W(x, mu) is singular".into()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylDisk {
    pub l: f64,
    pub mu: C64,
    pub rho0: C64,
    pub rho1: f64,
    pub rho2: f64,
    pub r: Mat2,
}

impl WeylDisk {
    pub fn center(&self) -> C64 {
        self.rho0
    }

    pub fn radius(&self) -> f64 {
        1.0 / (self.rho1 * self.rho2).sqrt()
    }

    pub fn point(&self, theta: C64) -> C64 {
        self.rho0 + theta * self.radius()
    }

    pub fn contains(&self, psi: C64, slack: f64) -> bool {
        (psi - self.rho0).norm() <= self.radius() + slack
    }

    /// Whether `inner` lies inside this disk, up to `slack`.
    pub fn contains_disk(&self, inner: &WeylDisk, slack: f64) -> bool {
        (inner.rho0 - self.rho0).norm() + inner.radius() <= self.radius() + slack
    }
}

/// Disk parameters from R = Q(0) W(l,μ)* j W(l,μ) Q(0)*.
pub fn weyl_disk(q0: Mat2, w_at_l: Mat2, mu: C64, l: f64) -> Result<WeylDisk> {
    let r = q0 * w_at_l.adjoint() * Mat2::j() * w_at_l * q0.adjoint();
    let r11 = r.get(0, 0).re;
    if !(r11 > 0.0) {
        return Err(Error::DegenerateDisk {
            mu,
            reason: format!("R11 = {r11} is not positive; mu is outside the admissible half-plane"),
        });
    }
    let rho0 = -r.get(0, 1) / r11;
    let inv = (r.get(1, 0) * r.get(0, 1) / r11 - r.get(1, 1)).re;
    if !(inv > 0.0) {
        return Err(Error::DegenerateDisk {
            mu,
            reason: format!("R21 R11^-1 R12 - R22 = {inv} is not positive"),
        });
    }
    Ok(WeylDisk {
        l,
        mu,
        rho0,
        rho1: r11,
        rho2: 1.0 / inv,
        r,
    })
}

/// ψ = (𝔄₁₁θ + 𝔄₁₂)/(𝔄₂₁θ + 𝔄₂₂).
pub fn approx_weyl_point(frak_a_at_l: &Mat2, theta: C64, mu: C64) -> Result<C64> {
    if theta.norm() > 1.0 + 1e-12 {
        return Err(Error::Validation(format!("|theta| = {} exceeds 1", theta.norm())));
    }
    let (num, den) = frak_a_at_l.mobius(theta);
    if den.norm() <= f64::MIN_POSITIVE || !den.is_finite() {
        return Err(Error::DegenerateDisk {
            mu,
            reason: "Möbius denominator vanished".into(),
        });
    }
    Ok(num / den)
}

/// W_k(x_i, μ) on the whole grid, from one solve at λ(μ).
pub fn gauge_samples(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    mu: C64,
) -> Result<Vec<Mat2>> {
    let w = integrate_fundamental(potential, poles, poles.mu_to_lambda(k, mu)?)?;
    gauge_transform_w(&w, k, mu, potential, poles)
}

/// 𝔄_k(x_i, μ) on the whole grid, from one solve at λ(conj μ).
pub fn frak_a_samples(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    mu: C64,
) -> Result<Vec<Mat2>> {
    Ok(matrix_frak_a(&gauge_samples(potential, poles, k, mu.conj())?))
}

/// Weyl disks of pole k at the grid nodes nearest to each requested length.
pub fn weyl_disks(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    mu: C64,
    lengths: &[f64],
) -> Result<Vec<WeylDisk>> {
    let big = gauge_samples(potential, poles, k, mu)?;
    let grid = potential.grid();
    lengths
        .iter()
        .map(|&l| {
            let i = grid.nearest(l);
            weyl_disk(big[0], big[i], mu, grid.node(i))
        })
        .collect()
}

/// 2·exp((2 Im μ + M/2)·l), the width of the Weyl disk family at length l.
pub fn truncation_bound(eta: f64, m_cut: f64, l: f64) -> f64 {
    2.0 * ((2.0 * eta + 0.5 * m_cut) * l).exp()
}

/// φ = (conj β₁ ψ − β₂)/(conj β₂ ψ + β₁) with β = β_k(0).
pub fn wt_function(psi: C64, beta0: &Row, mu: C64) -> Result<C64> {
    let den = beta0[1].conj() * psi + beta0[0];
    if den.norm() <= MOBIUS_EPS {
        return Err(Error::NearSingularMobius {
            mu,
            denominator: den.norm(),
        });
    }
    Ok((beta0[0].conj() * psi - beta0[1]) / den)
}

/// Asymptotic constant c_k = −β_k2(0)/β_k1(0), if β_k1(0) ≠ 0.
pub fn asymptotic_constant(beta0: &Row) -> Option<C64> {
    (beta0[0].norm() > MOBIUS_EPS).then(|| -beta0[1] / beta0[0])
}

/// ψ̂_k(μ) at θ = 0 on the whole potential interval; the per-μ kernel.
pub fn weyl_point(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    mu: C64,
) -> Result<C64> {
    let lam_c = poles.mu_to_lambda(k, mu.conj())?;
    let w = integrate_fundamental(potential, poles, lam_c)?;
    let l = potential.grid().l();
    let n = potential.grid().n();
    let q0 = gauge_q_unchecked(&potential.row(k, 0));
    let ql = gauge_q_unchecked(&potential.row(k, n));
    // The scalar e^{−il conj μ} cancels in the Möbius ratio but keeps magnitudes sane.
    let w_conj = (ql * w.at_end()).scale((-I * l * mu.conj()).exp());
    let a = q0 * w_conj.adjoint();
    approx_weyl_point(&a, ZERO, mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylData {
    /// Im μ of the sampled line.
    pub eta: f64,
    pub zeta: Vec<f64>,
    /// φ_k(ζ_j + iη), indexed `[k][j]`.
    pub phi: Vec<Vec<C64>>,
    /// β_k(0) of the system the samples came from, when known.
    pub beta0: Option<Vec<Row>>,
    pub m_cut: f64,
    pub l: f64,
    pub truncation_bound: f64,
}

impl WeylData {
    pub fn m(&self) -> usize {
        self.phi.len()
    }

    pub fn mu(&self, j: usize) -> C64 {
        C64::new(self.zeta[j], self.eta)
    }

    /// c_k from the boundary rows, if available.
    pub fn constants(&self) -> Option<Vec<Option<C64>>> {
        self.beta0
            .as_ref()
            .map(|rows| rows.iter().map(asymptotic_constant).collect())
    }

    /// sup_j ‖φ(μ_j)‖.
    pub fn sup_norm(&self) -> f64 {
        (0..self.zeta.len())
            .map(|j| self.phi.iter().map(|col| col[j].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest |φ_k(μ_j) − other_k(μ_j)| over all samples.
    pub fn max_difference(&self, other: &WeylData) -> f64 {
        self.phi
            .iter()
            .zip(&other.phi)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}

/// Midpoint grid of `count` points on [−a, a].
pub fn symmetric_grid(a: f64, count: usize) -> Vec<f64> {
    let dz = 2.0 * a / count as f64;
    (0..count).map(|j| -a + (j as f64 + 0.5) * dz).collect()
}

/// φ_k on the line μ = ζ_j + iη for every k, using the whole interval of `potential`.
pub fn sample_weyl_function(
    potential: &PotentialField,
    poles: &PoleSet,
    eta: f64,
    zeta: &[f64],
    m_cut: f64,
) -> Result<WeylData> {
    if !(eta < -m_cut / 4.0) {
        return Err(Error::Validation(format!(
            "sampling line Im mu = {eta} must lie below -M/4 = {}",
            -m_cut / 4.0
        )));
    }
    let m = poles.len();
    let beta0: Vec<Row> = (0..m).map(|k| potential.row(k, 0)).collect();
    let jobs: Vec<(usize, usize)> = (0..m)
        .flat_map(|k| (0..zeta.len()).map(move |j| (k, j)))
        .collect();
    let values = jobs
        .par_iter()
        .map(|&(k, j)| {
            let mu = C64::new(zeta[j], eta);
            let psi = weyl_point(potential, poles, k, mu)?;
            wt_function(psi, &beta0[k], mu)
        })
        .collect::<Result<Vec<C64>>>()?;
    let phi = values.chunks(zeta.len()).map(|c| c.to_vec()).collect();
    let l = potential.grid().l();
    Ok(WeylData {
        eta,
        zeta: zeta.to_vec(),
        phi,
        beta0: Some(beta0),
        m_cut,
        l,
        truncation_bound: truncation_bound(eta, m_cut, l),
    })
}

/// ‖W_k(x_i, μ)[φ; 1]‖² at every node.
pub fn l2_profile(
    potential: &PotentialField,
    poles: &PoleSet,
    k: usize,
    mu: C64,
    phi: C64,
) -> Result<Vec<f64>> {
    let lambda = poles.mu_to_lambda(k, mu)?;
    let w = integrate_fundamental(potential, poles, lambda)?;
    let big_w = gauge_transform_w(&w, k, mu, potential, poles)?;
    Ok(big_w
        .iter()
        .map(|wi| row_norm_sqr(&wi.mul_vec(&[phi, ONE])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn constant_field(l: f64, n: usize, rows: &[Row]) -> PotentialField {
        let grid = GridSpec::new(l, n).unwrap();
        PotentialField::from_fn(grid, rows.len(), |k, _| rows[k]).unwrap()
    }

    fn smooth_field(l: f64, n: usize) -> PotentialField {
        let grid = GridSpec::new(l, n).unwrap();
        PotentialField::from_fn(grid, 2, |k, x| {
            let (a, t) = if k == 0 {
                (0.3 + 0.25 * (1.3 * x).sin(), 0.5 * x)
            } else {
                (0.5 - 0.2 * x + 0.1 * x * x, -0.4 * x + 0.2)
            };
            [c(a.cos(), 0.0), C64::from_polar(a.sin(), t)]
        })
        .unwrap()
    }

    #[test]
    fn expm2_matches_series() {
        let m = Mat2::new(c(0.1, 0.3), c(-0.2, 0.05), c(0.4, 0.0), c(-0.3, 0.2));
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for n in 1..30 {
            term = (term * m).scale_re(1.0 / n as f64);
            sum += term;
        }
        assert!((expm2(m) - sum).max_abs() < 1e-14);
        let tiny = m.scale_re(1e-6);
        assert!((expm2(tiny) - (Mat2::identity() + tiny)).max_abs() < 1e-11);
    }

    #[test]
    fn constant_single_pole_matches_exponential() {
        let poles = PoleSet::new(vec![0.5], vec![1]).unwrap();
        let field = constant_field(2.0, 64, &[[ONE, ZERO]]);
        let lambda = c(0.9, 0.4);
        for stepper in [Stepper::Magnus4, Stepper::Rk4] {
            let w = integrate_with(&field, &poles, lambda, stepper, 1).unwrap();
            assert_eq!(w.samples[0], Mat2::identity());
            for (i, wi) in w.samples.iter().enumerate() {
                let x = field.grid().node(i);
                let exact = Mat2::diag((I * x / (lambda - 0.5)).exp(), ONE);
                let e = (*wi - exact).max_abs(); assert!(e < 1e-8, "{stepper:?} at x={x}: {e:e}");
            }
        }
    }

    #[test]
    fn pole_lambda_is_rejected() {
        let poles = PoleSet::new(vec![0.5], vec![1]).unwrap();
        let field = constant_field(1.0, 8, &[[ONE, ZERO]]);
        assert!(matches!(
            integrate_fundamental(&field, &poles, c(0.5, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn symmetry_and_determinant() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(1.0, 128);
        for &lambda in &[c(0.3, 0.7), c(1.2, -0.1), c(-0.8, 2.0)] {
            let w = integrate_fundamental(&field, &poles, lambda).unwrap();
            let wc = integrate_fundamental(&field, &poles, lambda.conj()).unwrap();
            for (a, b) in w.samples.iter().zip(&wc.samples) {
                assert!((b.adjoint() * *a - Mat2::identity()).max_abs() < 1e-8);
            }
            let tr = poles.trace_density(lambda).unwrap();
            let det = (I * tr).exp();
            assert!((w.at_end().det() - det).norm() < 1e-8);
        }
    }

    #[test]
    fn magnus_agrees_with_rk4_at_large_mu() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(1.0, 256);
        let mu = c(60.0, -4.0);
        let lam = poles.mu_to_lambda(0, mu).unwrap();
        let a = integrate_with(&field, &poles, lam, Stepper::Magnus4, 1).unwrap();
        let b = integrate_with(&field, &poles, lam, Stepper::Rk4, 8).unwrap();
        let scale = b.at_end().norm();
        let e = (a.at_end() - b.at_end()).norm() / scale; assert!(e < 1e-6, "{e:e}");
        assert!(integrate_checked(&field, &poles, lam, 1e-6).is_ok());
    }

    #[test]
    fn gauge_w_constant_case() {
        let poles = PoleSet::new(vec![1.0], vec![1]).unwrap();
        let field = constant_field(1.0, 32, &[[ONE, ZERO]]);
        let mu = c(0.7, -2.0);
        let w = integrate_fundamental(&field, &poles, poles.mu_to_lambda(0, mu).unwrap()).unwrap();
        let big = gauge_transform_w(&w, 0, mu, &field, &poles).unwrap();
        for (i, wi) in big.iter().enumerate() {
            let x = field.grid().node(i);
            let exact = Mat2::diag((I * mu * x).exp(), (-I * mu * x).exp());
            assert!((*wi - exact).max_abs() < 1e-8);
        }
        assert!(gauge_transform_w(&w, 0, mu * 2.0, &field, &poles).is_err());
    }

    #[test]
    fn frak_a_matches_inversion() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(1.0, 64);
        let mu = c(1.5, -3.0);
        let w = integrate_fundamental(&field, &poles, poles.mu_to_lambda(0, mu).unwrap()).unwrap();
        let wc = integrate_fundamental(&field, &poles, poles.mu_to_lambda(0, mu.conj()).unwrap()).unwrap();
        let big = gauge_transform_w(&w, 0, mu, &field, &poles).unwrap();
        let big_c = gauge_transform_w(&wc, 0, mu.conj(), &field, &poles).unwrap();
        assert!((big[0] - gauge_q_unchecked(&field.row(0, 0))).max_abs() < 1e-15);
        let a = matrix_frak_a(&big_c);
        let b = matrix_frak_a_by_inversion(&big).unwrap();
        assert!((a[0] - Mat2::identity()).max_abs() < 1e-14);
        for (x, y) in a.iter().zip(&b) {
            assert!((*x - *y).max_abs() < 1e-10);
        }
    }

    #[test]
    fn unit_disk_at_zero_length() {
        let q0 = gauge_q_unchecked(&[c(0.6, 0.0), c(0.0, 0.8)]);
        let d = weyl_disk(q0, q0, c(0.0, -3.0), 0.0).unwrap();
        assert!(d.rho0.norm() < 1e-15);
        assert!((d.rho1 - 1.0).abs() < 1e-15 && (d.rho2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wt_function_cases() {
        let psi = c(0.2, -0.1);
        assert_eq!(wt_function(psi, &[ONE, ZERO], ZERO).unwrap(), psi);
        assert!(matches!(
            wt_function(ZERO, &[ZERO, ONE], c(0.0, -5.0)),
            Err(Error::NearSingularMobius { .. })
        ));
        let beta0 = [c(0.6, 0.0), c(0.0, 0.8)];
        let far = wt_function(ZERO, &beta0, ZERO).unwrap();
        assert!((far - asymptotic_constant(&beta0).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn bound_m_cases() {
        let single = PoleSet::new(vec![0.0], vec![1]).unwrap();
        let f1 = constant_field(1.0, 16, &[[ONE, ZERO]]);
        assert_eq!(bound_m(&f1, &single, 0.1).unwrap(), 4.0 * 0.1);

        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let f2 = constant_field(1.0, 16, &[[ONE, ZERO], [c(0.6, 0.0), c(0.8, 0.0)]]);
        let m0 = bound_m(&f2, &poles, 1e-9).unwrap();
        // M = 4/(2 − 2/M) has root M = 3.
        assert!((m0 - 3.0).abs() < 1e-6);
        let mut last = 0.0;
        for margin in [0.01, 0.1, 0.5, 1.0] {
            let m = bound_m(&f2, &poles, margin).unwrap();
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn bound_m_recheck_on_probe_grid() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(1.0, 64);
        let m = bound_m(&field, &poles, 0.05).unwrap();
        for k in 0..2 {
            for a in 0..12 {
                for b in 0..8 {
                    let mu = c(-30.0 + 5.0 * a as f64, -m / 4.0 - 0.01 - 2.0f64.powi(b) * 0.05);
                    for i in (0..=64).step_by(8) {
                        let xi = xi_matrix(&field, &poles, k, i, mu).unwrap();
                        assert!(xi.norm() < m / 4.0);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_single_pole_weyl_function_vanishes() {
        let poles = PoleSet::new(vec![1.0], vec![1]).unwrap();
        let field = constant_field(1.0, 32, &[[ONE, ZERO]]);
        let zeta = symmetric_grid(10.0, 8);
        let data = sample_weyl_function(&field, &poles, -2.0, &zeta, 0.4).unwrap();
        assert!(data.phi[0].iter().all(|p| p.norm() < 1e-14));
    }

    #[test]
    fn l2_profile_decays() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(2.0, 128);
        let mu = c(0.5, -3.0);
        let psi = weyl_point(&field, &poles, 0, mu).unwrap();
        let phi = wt_function(psi, &field.row(0, 0), mu).unwrap();
        let prof = l2_profile(&field, &poles, 0, mu, phi).unwrap();
        let half = prof.len() / 2;
        let head: f64 = prof[..=half].iter().sum();
        let tail: f64 = prof[half..].iter().sum();
        assert!(tail < head);
    }

    #[test]
    fn disk_structure_on_smooth_field() {
        let poles = PoleSet::new(vec![1.0, -1.0], vec![1, 1]).unwrap();
        let field = smooth_field(1.0, 128);
        let m = bound_m(&field, &poles, 0.05).unwrap();
        let lengths = [0.25, 0.5, 1.0];
        for k in 0..2 {
            for &mu in &[c(0.0, -m / 4.0 - 0.1), c(3.0, -m / 2.0), c(-20.0, -m)] {
                let disks = weyl_disks(&field, &poles, k, mu, &lengths).unwrap();
                for d in &disks {
                    assert!(d.rho1 >= 1.0 - 2.0 * d.l * (m / 4.0 + mu.im) - 1e-10);
                }
                assert!(disks[0].contains_disk(&disks[1], 1e-10));
                assert!(disks[1].contains_disk(&disks[2], 1e-10));
                let a = frak_a_samples(&field, &poles, k, mu).unwrap();
                let al = *a.last().unwrap();
                let psi0 = approx_weyl_point(&al, ZERO, mu).unwrap();
                assert!(psi0.norm() < 1.0);
                assert!(disks[2].contains(psi0, 1e-10));
                let bound = truncation_bound(mu.im, m, 1.0);
                for theta in [ONE, -ONE, I, -I] {
                    let p = approx_weyl_point(&al, theta, mu).unwrap();
                    assert!((p - psi0).norm() <= bound);
                    assert!(disks[2].contains(p, 1e-10));
                }
            }
        }
    }
}
