//! Sine-Gordon ω_xx − ω_tt = sin ω in laboratory coordinates: the zero-curvature
//! pair, boundary evolution of the gauge q, the U-families along x = 0, and
//! recovery of cos ω(·, t) through the Weyl-set inverse problem.

use rayon::prelude::*;

use crate::direct::{bound_m, expm2, integrate_fundamental, MOBIUS_EPS};
use crate::error::{Error, Result, StageExt};
use crate::inverse::{default_partition, recover_from_weyl_set, ReconstructionReport, WeylSetData};
use crate::linalg::{Mat2, C64, I};
use crate::model::{gauge_q_unchecked, GridSpec, PoleSet, PotentialField, Row};

/// Allowed ‖q*q − I‖ before q is rejected.
pub const UNITARITY_LIMIT: f64 = 1e-6;

/// Tolerance on cos ω leaving [−1, 1].
pub const COS_RANGE_SLACK: f64 = 1e-2;

/// A (candidate) solution with its first derivatives.
pub trait SgSolution: Sync {
    fn omega(&self, x: f64, t: f64) -> f64;
    fn omega_x(&self, x: f64, t: f64) -> f64;
    fn omega_t(&self, x: f64, t: f64) -> f64;
}

/// ω(x, t) = 4 arctan exp(γ(x − vt)), γ = (1 − v²)^{−1/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub v: f64,
}

impl Kink {
    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.v * self.v).sqrt()
    }

    fn xi(&self, x: f64, t: f64) -> f64 {
        self.gamma() * (x - self.v * t)
    }
}

impl SgSolution for Kink {
    fn omega(&self, x: f64, t: f64) -> f64 {
        4.0 * self.xi(x, t).exp().atan()
    }

    fn omega_x(&self, x: f64, t: f64) -> f64 {
        // d/dξ 4 arctan e^ξ = 2 sech ξ
        2.0 * self.gamma() / self.xi(x, t).cosh()
    }

    fn omega_t(&self, x: f64, t: f64) -> f64 {
        -self.v * self.omega_x(x, t)
    }
}

/// ω ≡ c; a solution when sin c = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl SgSolution for Constant {
    fn omega(&self, _: f64, _: f64) -> f64 {
        self.0
    }

    fn omega_x(&self, _: f64, _: f64) -> f64 {
        0.0
    }

    fn omega_t(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Pole structure of the x-equation (d = ±1, b = (1, 1)).
pub fn x_poles() -> PoleSet {
    PoleSet::sine_gordon_x()
}

/// Pole structure of the t-equation (d = ±1, b = (1, −1)).
pub fn t_poles() -> PoleSet {
    PoleSet::sine_gordon_t()
}

/// The t-equation run backwards in time, s = −t: b = (−1, 1).
fn t_poles_reversed() -> PoleSet {
    PoleSet::new(vec![1.0, -1.0], vec![-1, 1]).expect("static pole set")
}

/// β₁ = [1, i e^{iω/2}] q/√2, β₂ = [1, i e^{−iω/2}] q/√2.
pub fn beta_from_omega(omega: f64, q: &Mat2) -> [Row; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r1 = [C64::new(s, 0.0), I * C64::from_polar(s, 0.5 * omega)];
    let r2 = [C64::new(s, 0.0), I * C64::from_polar(s, -0.5 * omega)];
    [Mat2::left_mul(&r1, q), Mat2::left_mul(&r2, q)]
}

/// 2|β₁β₂*|² − 1, which is cos ω for rows built by [`beta_from_omega`].
pub fn cos_from_rows(b1: &Row, b2: &Row) -> f64 {
    let p = b1[0] * b2[0].conj() + b1[1] * b2[1].conj();
    2.0 * p.norm_sqr() - 1.0
}

/// Ğ = −i(ω_t j/4 + sin(ω/2) J/2).
pub fn g_breve(omega: f64, omega_t: f64) -> Mat2 {
    let a = C64::new(0.25 * omega_t, 0.0);
    let b = C64::new(0.5 * (0.5 * omega).sin(), 0.0);
    Mat2::new(a, b, b, -a).scale(-I)
}

/// F̆ = −i ω_x j/4 + cos(ω/2) Jj/2.
pub fn f_breve(omega: f64, omega_x: f64) -> Mat2 {
    let a = -I * (0.25 * omega_x);
    let c = C64::new(0.5 * (0.5 * omega).cos(), 0.0);
    Mat2::new(a, -c, c, -a)
}

/// i Σ_k b_k(λ − d_k)^{−1} β_k*β_k for the two rows.
pub fn pair_matrix(rows: &[Row; 2], poles: &PoleSet, lambda: C64) -> Result<Mat2> {
    let mut acc = Mat2::zero();
    for (k, row) in rows.iter().enumerate() {
        let gap = lambda - poles.d(k);
        if gap.norm() == 0.0 {
            return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{}", k + 1)));
        }
        acc += Mat2::outer(row).scale(I * poles.b(k) / gap);
    }
    Ok(acc)
}

/// One fourth-order Magnus step of y′ = A(s)y over [s, s + ds].
fn magnus_step(coef: &impl Fn(f64) -> Mat2, s: f64, ds: f64) -> Mat2 {
    let g = 3f64.sqrt() / 6.0;
    let a1 = coef(s + (0.5 - g) * ds);
    let a2 = coef(s + (0.5 + g) * ds);
    let comm = a2 * a1 - a1 * a2;
    expm2((a1 + a2).scale_re(0.5 * ds) + comm.scale_re(0.5 * g * ds * ds))
}

/// y′ = A(s)y from y(a) = y0 to s = b in `steps` Magnus steps; all step endpoints.
pub fn evolve_linear(
    coef: impl Fn(f64) -> Mat2,
    y0: Mat2,
    a: f64,
    b: f64,
    steps: usize,
) -> Vec<Mat2> {
    let ds = (b - a) / steps.max(1) as f64;
    let mut y = y0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    for i in 0..steps {
        y = magnus_step(&coef, a + i as f64 * ds, ds) * y;
        out.push(y);
    }
    out
}

/// max ‖q*q − I‖ over samples.
pub fn unitarity_drift(q: &[Mat2]) -> f64 {
    q.iter()
        .map(|m| (m.adjoint() * *m - Mat2::identity()).norm())
        .fold(0.0, f64::max)
}

/// ω and q = q(x_i, t_j) of a known solution on a rectangle [0, X] × [0, T].
#[derive(Debug, Clone)]
pub struct SgField {
    pub x: GridSpec,
    pub t: GridSpec,
    /// Indexed `[j][i]` (time, space).
    pub omega: Vec<Vec<f64>>,
    pub q: Vec<Vec<Mat2>>,
}

impl SgField {
    pub fn rows(&self, i: usize, j: usize) -> [Row; 2] {
        beta_from_omega(self.omega[j][i], &self.q[j][i])
    }

    pub fn cos_omega(&self, i: usize, j: usize) -> f64 {
        let [b1, b2] = self.rows(i, j);
        cos_from_rows(&b1, &b2)
    }

    /// Worst unitarity drift over the rectangle.
    pub fn drift(&self) -> f64 {
        self.q.iter().map(|r| unitarity_drift(r)).fold(0.0, f64::max)
    }
}

/// q from q(0, 0) = I: along x = 0 in t with F̆, then along each time line in x with Ğ.
pub fn evolve_q(sol: &dyn SgSolution, x: GridSpec, t: GridSpec) -> Result<SgField> {
    let fb = |s: f64| f_breve(sol.omega(0.0, s), sol.omega_x(0.0, s));
    let edge = evolve_linear(fb, Mat2::identity(), 0.0, t.l(), t.n());
    let q: Vec<Vec<Mat2>> = t
        .nodes()
        .zip(&edge)
        .map(|(tj, &q0)| {
            let gb = |s: f64| g_breve(sol.omega(s, tj), sol.omega_t(s, tj));
            evolve_linear(gb, q0, 0.0, x.l(), x.n())
        })
        .collect();
    let omega = t
        .nodes()
        .map(|tj| x.nodes().map(|xi| sol.omega(xi, tj)).collect())
        .collect();
    let field = SgField { x, t, omega, q };
    let drift = field.drift();
    if drift > UNITARITY_LIMIT {
        return Err(Error::IntegrationQuality(format!("q drifted from unitary by {drift:e}")));
    }
    Ok(field)
}

/// ‖q_xt − q_tx‖ at (X, T): x-then-t against t-then-x, `n` steps per leg.
pub fn path_discrepancy(sol: &dyn SgSolution, x_len: f64, t_len: f64, n: usize) -> f64 {
    let gb = |tj: f64| move |s: f64| g_breve(sol.omega(s, tj), sol.omega_t(s, tj));
    let fb = |xi: f64| move |s: f64| f_breve(sol.omega(xi, s), sol.omega_x(xi, s));
    let id = Mat2::identity();
    let along_x = *evolve_linear(gb(0.0), id, 0.0, x_len, n).last().expect("steps");
    let xt = *evolve_linear(fb(x_len), along_x, 0.0, t_len, n).last().expect("steps");
    let along_t = *evolve_linear(fb(0.0), id, 0.0, t_len, n).last().expect("steps");
    let tx = *evolve_linear(gb(t_len), along_t, 0.0, x_len, n).last().expect("steps");
    (xt - tx).norm()
}

/// max over interior nodes of ‖G_t − F_x + GF − FG‖ with central differences.
pub fn zero_curvature_residual(field: &SgField, lambda: C64) -> Result<f64> {
    for d in [1.0, -1.0] {
        if lambda == C64::new(d, 0.0) {
            return Err(Error::Domain(format!("lambda = {lambda} is a pole of the pair")));
        }
    }
    let (nx, nt) = (field.x.n(), field.t.n());
    if nx < 2 || nt < 2 {
        return Err(Error::Validation("residual needs interior nodes".into()));
    }
    let (px, pt) = (x_poles(), t_poles());
    let g = |i: usize, j: usize| pair_matrix(&field.rows(i, j), &px, lambda);
    let f = |i: usize, j: usize| pair_matrix(&field.rows(i, j), &pt, lambda);
    let (hx, ht) = (field.x.h(), field.t.h());
    let mut worst = 0.0_f64;
    for j in 1..nt {
        for i in 1..nx {
            let gt = (g(i, j + 1)? - g(i, j - 1)?).scale_re(0.5 / ht);
            let fx = (f(i + 1, j)? - f(i - 1, j)?).scale_re(0.5 / hx);
            let (gc, fc) = (g(i, j)?, f(i, j)?);
            worst = worst.max((gt - fx + gc * fc - fc * gc).norm());
        }
    }
    Ok(worst)
}

/// Same residual for the gauge pair: Ğ_t − F̆_x + ĞF̆ − F̆Ğ on the known solution.
pub fn compatibility_residual(sol: &dyn SgSolution, x: GridSpec, t: GridSpec) -> f64 {
    let gb = |xi: f64, tj: f64| g_breve(sol.omega(xi, tj), sol.omega_t(xi, tj));
    let fb = |xi: f64, tj: f64| f_breve(sol.omega(xi, tj), sol.omega_x(xi, tj));
    let (hx, ht) = (x.h(), t.h());
    let mut worst = 0.0_f64;
    for j in 1..t.n() {
        let tj = t.node(j);
        for i in 1..x.n() {
            let xi = x.node(i);
            let gt = (gb(xi, tj + ht) - gb(xi, tj - ht)).scale_re(0.5 / ht);
            let fx = (fb(xi + hx, tj) - fb(xi - hx, tj)).scale_re(0.5 / hx);
            let (g, f) = (gb(xi, tj), fb(xi, tj));
            worst = worst.max((gt - fx + g * f - f * g).norm());
        }
    }
    worst
}

/// ω₀(t) = ω(0, t) and ω₁(t) = ω_x(0, t) on the symmetric grid t_j = −T + j·T/n, j = 0..2n.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub horizon: f64,
    /// Steps per side.
    pub n: usize,
    pub omega0: Vec<f64>,
    pub omega1: Vec<f64>,
}

impl BoundaryData {
    pub fn new(horizon: f64, omega0: Vec<f64>, omega1: Vec<f64>) -> Result<Self> {
        let len = omega0.len();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Validation(format!("horizon must be positive, got {horizon}")));
        }
        if len != omega1.len() || len < 9 || len % 2 == 0 {
            return Err(Error::Validation(format!(
                "boundary samples need a common odd length ≥ 9, got {} and {}",
                len,
                omega1.len()
            )));
        }
        if omega0.iter().chain(&omega1).any(|v| !v.is_finite()) {
            return Err(Error::Validation("boundary samples are not finite".into()));
        }
        Ok(BoundaryData {
            horizon,
            n: len / 2,
            omega0,
            omega1,
        })
    }

    /// Samples a known solution along x = 0.
    pub fn from_solution(sol: &dyn SgSolution, horizon: f64, n: usize) -> Result<Self> {
        let dt = horizon / n as f64;
        let ts: Vec<f64> = (0..=2 * n).map(|j| -horizon + j as f64 * dt).collect();
        BoundaryData::new(
            horizon,
            ts.iter().map(|&t| sol.omega(0.0, t)).collect(),
            ts.iter().map(|&t| sol.omega_x(0.0, t)).collect(),
        )
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        -self.horizon + j as f64 * self.dt()
    }

    /// Four-point Lagrange interpolation of samples at time t.
    fn interpolate(&self, v: &[f64], t: f64) -> f64 {
        let s = ((t + self.horizon) / self.dt()).clamp(0.0, (2 * self.n) as f64);
        let i = (s.floor() as usize).clamp(1, 2 * self.n - 2) - 1;
        let u = s - i as f64;
        let w = [
            -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
            u * (u - 2.0) * (u - 3.0) / 2.0,
            -u * (u - 1.0) * (u - 3.0) / 2.0,
            u * (u - 1.0) * (u - 2.0) / 6.0,
        ];
        (0..4).map(|p| w[p] * v[i + p]).sum()
    }

    pub fn omega0_at(&self, t: f64) -> f64 {
        self.interpolate(&self.omega0, t)
    }

    pub fn omega1_at(&self, t: f64) -> f64 {
        self.interpolate(&self.omega1, t)
    }

    /// ω₀′ by fourth-order differences (one-sided near the ends).
    pub fn omega0_derivative(&self) -> Vec<f64> {
        let v = &self.omega0;
        let h = self.dt();
        let last = v.len() - 1;
        (0..=last)
            .map(|j| {
                if j >= 2 && j + 2 <= last {
                    (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h)
                } else if j < 2 {
                    (-25.0 * v[j] + 48.0 * v[j + 1] - 36.0 * v[j + 2] + 16.0 * v[j + 3]
                        - 3.0 * v[j + 4])
                        / (12.0 * h)
                } else {
                    (25.0 * v[j] - 48.0 * v[j - 1] + 36.0 * v[j - 2] - 16.0 * v[j - 3]
                        + 3.0 * v[j - 4])
                        / (12.0 * h)
                }
            })
            .collect()
    }

    /// sup(|ω₀′| + |ω₁|) on the samples.
    pub fn derivative_bound(&self) -> f64 {
        self.omega0_derivative()
            .iter()
            .zip(&self.omega1)
            .map(|(a, b)| a.abs() + b.abs())
            .fold(0.0, f64::max)
    }
}

/// q(0, t_j) at every boundary node, integrated outwards from q(0, 0) = I.
pub fn boundary_q(bd: &BoundaryData) -> Result<Vec<Mat2>> {
    let fb = |s: f64| f_breve(bd.omega0_at(s), bd.omega1_at(s));
    let mut back = evolve_linear(fb, Mat2::identity(), 0.0, -bd.horizon, bd.n);
    let fwd = evolve_linear(fb, Mat2::identity(), 0.0, bd.horizon, bd.n);
    back.reverse();
    back.extend_from_slice(&fwd[1..]);
    let drift = unitarity_drift(&back);
    if drift > UNITARITY_LIMIT {
        return Err(Error::IntegrationQuality(format!("q(0, t) drifted by {drift:e}")));
    }
    Ok(back)
}

/// β_k(0, t_j) at every boundary node.
pub fn boundary_rows(bd: &BoundaryData) -> Result<Vec<[Row; 2]>> {
    Ok(boundary_q(bd)?
        .iter()
        .enumerate()
        .map(|(j, q)| beta_from_omega(bd.omega0[j], q))
        .collect())
}

/// The boundary rows as potentials of the t-equation: forward on [0, T] and
/// time-reversed (s = −t) on [0, T], with their pole sets.
pub struct TimePotentials {
    pub forward: PotentialField,
    pub backward: PotentialField,
    pub forward_poles: PoleSet,
    pub backward_poles: PoleSet,
}

impl TimePotentials {
    pub fn new(bd: &BoundaryData) -> Result<Self> {
        let rows = boundary_rows(bd)?;
        let n = bd.n;
        let grid = GridSpec::new(bd.horizon, n)?;
        let side = |idx: &dyn Fn(usize) -> usize| -> Result<PotentialField> {
            PotentialField::new(
                grid,
                (0..2)
                    .map(|k| (0..=n).map(|s| rows[idx(s)][k]).collect())
                    .collect(),
            )
        };
        Ok(TimePotentials {
            forward: side(&|s| n + s)?,
            backward: side(&|s| n - s)?,
            forward_poles: t_poles(),
            backward_poles: t_poles_reversed(),
        })
    }

    /// M̂: the direct-module cutoff of both half-line problems.
    pub fn cutoff(&self) -> Result<f64> {
        Ok(bound_m(&self.forward, &self.forward_poles, 0.05)?
            .max(bound_m(&self.backward, &self.backward_poles, 0.05)?))
    }
}

/// U_k(±s_i, μ) for s_i = 0..T on one side of t = 0 (k 0-based, so pole 0 carries e^{−itμ}).
pub fn build_u_half(tp: &TimePotentials, k: usize, mu: C64, forward: bool) -> Result<Vec<Mat2>> {
    let lambda = x_poles().mu_to_lambda(k, mu)?;
    let sign = if k == 0 { -1.0 } else { 1.0 };
    let (pot, poles, dir) = if forward {
        (&tp.forward, &tp.forward_poles, 1.0)
    } else {
        (&tp.backward, &tp.backward_poles, -1.0)
    };
    let q00 = gauge_q_unchecked(&pot.row(k, 0)).adjoint();
    let z = integrate_fundamental(pot, poles, lambda)?;
    Ok(z.samples
        .iter()
        .enumerate()
        .map(|(s, zs)| {
            let t = dir * pot.grid().node(s);
            let qk = gauge_q_unchecked(&pot.row(k, s));
            (qk * *zs * q00).scale((I * sign * t * mu).exp())
        })
        .collect())
}

/// U_k(t_j, μ) = e^{(−1)^k i t μ} Q_k(0, t) Z(t, λ) Q_k(0, 0)* at every boundary node.
pub fn build_u(tp: &TimePotentials, k: usize, mu: C64) -> Result<Vec<Mat2>> {
    let mut back = build_u_half(tp, k, mu, false)?;
    let fwd = build_u_half(tp, k, mu, true)?;
    back.reverse();
    back.extend_from_slice(&fwd[1..]);
    Ok(back)
}

/// −u₁₂/u₁₁ at index `j` of a U-family.
fn ratio(u: &[Mat2], j: usize, mu: C64) -> Result<C64> {
    let u11 = u[j].get(0, 0);
    if u11.norm() <= MOBIUS_EPS || !u11.is_finite() {
        return Err(Error::NearSingularMobius {
            mu,
            denominator: u11.norm(),
        });
    }
    Ok(-u[j].get(0, 1) / u11)
}

/// Weyl points at t = 0 with the change between horizons T and T/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginPsi {
    pub psi: [C64; 2],
    pub change: f64,
}

/// ψ̃₁(0, μ) = −u₁₂/u₁₁ at t = T (pole 0) and ψ̃₂(0, μ) at t = −T (pole 1),
/// stabilized against T/2.
pub fn psi_at_origin(u1: &[Mat2], u2: &[Mat2], mu: C64, tol: f64) -> Result<OriginPsi> {
    let len = u1.len();
    if len != u2.len() || len < 5 || len % 2 == 0 {
        return Err(Error::Validation("U-families need a common odd length ≥ 5".into()));
    }
    let n = len / 2;
    let mut back = u2[..=n].to_vec();
    back.reverse();
    origin_from_halves(&u1[n..], &back, mu, tol)
}

/// [`psi_at_origin`] from U₁ on t ≥ 0 and U₂ on t ≤ 0, both ordered outwards from t = 0.
pub fn origin_from_halves(u1: &[Mat2], u2: &[Mat2], mu: C64, tol: f64) -> Result<OriginPsi> {
    let n = u1.len() - 1;
    if u2.len() != n + 1 || n < 2 {
        return Err(Error::Validation("half-line U-families need a common length ≥ 3".into()));
    }
    let p1 = ratio(u1, n, mu)?;
    let p2 = ratio(u2, n, mu)?;
    let change = (p1 - ratio(u1, n / 2, mu)?)
        .norm()
        .max((p2 - ratio(u2, n / 2, mu)?).norm());
    if change > tol {
        return Err(Error::HorizonTooShort { change });
    }
    Ok(OriginPsi {
        psi: [p1, p2],
        change,
    })
}

/// (u₁₁ψ₀ + u₁₂)/(u₂₁ψ₀ + u₂₂).
pub fn evolve_psi(psi0: C64, u: &Mat2, mu: C64) -> Result<C64> {
    if psi0.norm() > 1.0 + 1e-12 {
        return Err(Error::Validation(format!("|psi0| = {} exceeds 1", psi0.norm())));
    }
    let (num, den) = u.mobius(psi0);
    if den.norm() <= MOBIUS_EPS || !den.is_finite() {
        return Err(Error::NearSingularMobius {
            mu,
            denominator: den.norm(),
        });
    }
    Ok(num / den)
}

/// Sampling line and horizon tolerance for the boundary-data pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SgSpectral {
    pub eta: f64,
    pub zeta: Vec<f64>,
    pub horizon_tol: f64,
}

/// Weyl set of the x-equation at time t (a boundary node), from boundary data.
pub fn weyl_set_at(bd: &BoundaryData, t: f64, spectral: &SgSpectral) -> Result<(WeylSetData, f64)> {
    let j = ((t + bd.horizon) / bd.dt()).round();
    if !(0.0..=(2 * bd.n) as f64).contains(&j) || (bd.time(j as usize) - t).abs() > 1e-9 * bd.dt().max(1.0) {
        return Err(Error::Validation(format!("t = {t} is not a boundary node")));
    }
    let j = j as usize;
    let tp = TimePotentials::new(bd)?;
    let m_hat = tp.cutoff()?;
    if !(spectral.eta < -m_hat / 4.0) {
        return Err(Error::Validation(format!(
            "sampling line Im mu = {} must lie below -M/4 = {}",
            spectral.eta,
            -m_hat / 4.0
        )));
    }
    let samples = spectral
        .zeta
        .par_iter()
        .map(|&z| {
            let mu = C64::new(z, spectral.eta);
            let u1 = build_u_half(&tp, 0, mu, true)?;
            let u2 = build_u_half(&tp, 1, mu, false)?;
            let origin = origin_from_halves(&u1, &u2, mu, spectral.horizon_tol)?;
            // U_k at t_j, reusing the half already integrated when it covers t_j.
            let at = |k: usize, half: &[Mat2], covers: bool| -> Result<Mat2> {
                let s = j.abs_diff(bd.n);
                if covers || s == 0 {
                    Ok(half[s])
                } else {
                    Ok(build_u_half(&tp, k, mu, j > bd.n)?[s])
                }
            };
            let psi = [
                evolve_psi(origin.psi[0], &at(0, &u1, j >= bd.n)?, mu)?,
                evolve_psi(origin.psi[1], &at(1, &u2, j <= bd.n)?, mu)?,
            ];
            Ok((psi, origin.change))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = boundary_rows(bd)?;
    let beta0 = vec![rows[j][0], rows[j][1]];
    let (n1, n2) = default_partition(&beta0);
    let change = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let ws = WeylSetData {
        eta: spectral.eta,
        zeta: spectral.zeta.clone(),
        beta0,
        psi: (0..2).map(|k| samples.iter().map(|s| s.0[k]).collect()).collect(),
        n1,
        n2,
        m_cut: m_hat,
        l: f64::INFINITY,
        truncation_bound: change,
    };
    Ok((ws, change))
}

#[derive(Debug, Clone)]
pub struct CosOmega {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub report: ReconstructionReport,
    /// Largest change of ψ̃(0, μ) between horizons T/2 and T.
    pub horizon_change: f64,
}

/// cos ω(x_i, t) on `grid` from boundary data alone.
pub fn recover_cos_omega(
    bd: &BoundaryData,
    t: f64,
    grid: &GridSpec,
    spectral: &SgSpectral,
) -> Result<CosOmega> {
    let (ws, horizon_change) = weyl_set_at(bd, t, spectral).stage("weyl set")?;
    let report = recover_from_weyl_set(&ws, &x_poles(), grid)?;
    let field = &report.field;
    let value: Vec<f64> = (0..grid.node_count())
        .map(|i| cos_from_rows(&field.row(0, i), &field.row(1, i)))
        .collect();
    if let Some(v) = value
        .iter()
        .find(|v| !v.is_finite() || v.abs() > 1.0 + COS_RANGE_SLACK)
    {
        return Err(Error::ReconstructionQuality(format!("cos omega = {v} out of range")));
    }
    Ok(CosOmega {
        x: grid.nodes().collect(),
        value,
        report,
        horizon_change,
    })
}

/// The x-potential β_k(·, t) of a known solution on `grid`, for oracle comparisons.
pub fn x_potential(sol: &dyn SgSolution, t: f64, grid: GridSpec) -> Result<PotentialField> {
    let fb = |s: f64| f_breve(sol.omega(0.0, s), sol.omega_x(0.0, s));
    let steps = ((t.abs() / grid.h()).ceil() as usize).max(1);
    let q0 = *evolve_linear(fb, Mat2::identity(), 0.0, t, steps).last().expect("steps");
    let gb = |s: f64| g_breve(sol.omega(s, t), sol.omega_t(s, t));
    let q = evolve_linear(gb, q0, 0.0, grid.l(), grid.n());
    let rows: Vec<[Row; 2]> = grid
        .nodes()
        .zip(&q)
        .map(|(x, qi)| beta_from_omega(sol.omega(x, t), qi))
        .collect();
    PotentialField::new(grid, (0..2).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}

#[cfg(test)]
mod tests;
