//! Domain types shared by every pipeline: pole structure, spectral charts,
//! grids, sampled potentials and the unitary gauge built from a row.

use crate::error::{Error, Result};
use crate::linalg::{row_norm_sqr, Mat2, C64, ZERO};

/// Rows within this distance of unit norm are accepted untouched.
pub const ROW_ACCEPT_TOL: f64 = 1e-8;
/// Rows within this distance are renormalized, anything further is rejected.
pub const ROW_RENORMALIZE_TOL: f64 = 1e-4;

pub type Row = [C64; 2];

/// Real poles `d_k` with sign weights `b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    d: Vec<f64>,
    b: Vec<f64>,
}

impl PoleSet {
    pub fn new(d: Vec<f64>, b: Vec<i8>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Validation("pole set is empty".into()));
        }
        if d.len() != b.len() {
            return Err(Error::Validation(format!(
                "{} pole locations but {} weights",
                d.len(),
                b.len()
            )));
        }
        if let Some(x) = d.iter().find(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("pole location {x} is not finite")));
        }
        for (k, &bk) in b.iter().enumerate() {
            if bk != 1 && bk != -1 {
                return Err(Error::Validation(format!("weight b_{k} = {bk} is not ±1")));
            }
        }
        for i in 0..d.len() {
            for j in 0..i {
                if d[i] == d[j] {
                    return Err(Error::Validation(format!(
                        "poles {j} and {i} coincide at {}",
                        d[i]
                    )));
                }
            }
        }
        Ok(PoleSet {
            d,
            b: b.into_iter().map(f64::from).collect(),
        })
    }

    /// The two-pole structure of the sine-Gordon x-equation: d = (1, -1), b = (1, 1).
    pub fn sine_gordon_x() -> Self {
        PoleSet::new(vec![1.0, -1.0], vec![1, 1]).expect("static pole set")
    }

    /// The sine-Gordon t-equation: d = (1, -1), b = (1, -1).
    pub fn sine_gordon_t() -> Self {
        PoleSet::new(vec![1.0, -1.0], vec![1, -1]).expect("static pole set")
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn d(&self, k: usize) -> f64 {
        self.d[k]
    }

    pub fn b(&self, k: usize) -> f64 {
        self.b[k]
    }

    pub fn locations(&self) -> &[f64] {
        &self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    /// Smallest distance from pole `k` to any other pole; infinite for m = 1.
    pub fn gap(&self, k: usize) -> f64 {
        (0..self.len())
            .filter(|&p| p != k)
            .map(|p| (self.d[p] - self.d[k]).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::Validation(format!(
                "pole index {k} out of range for m = {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// λ = d_k + b_k / (2μ).
    pub fn mu_to_lambda(&self, k: usize, mu: C64) -> Result<C64> {
        self.check_index(k)?;
        if mu == ZERO {
            return Err(Error::Domain("mu = 0 is the point at infinity of the pole chart".into()));
        }
        Ok(C64::new(self.d[k], 0.0) + self.b[k] / (2.0 * mu))
    }

    /// μ = b_k / (2(λ − d_k)).
    pub fn lambda_to_mu(&self, k: usize, lambda: C64) -> Result<C64> {
        self.check_index(k)?;
        let z = lambda - self.d[k];
        if z == ZERO {
            return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{k}")));
        }
        Ok(self.b[k] / (2.0 * z))
    }

    /// Σ_k b_k / (λ − d_k), the trace density of the system coefficient.
    pub fn trace_density(&self, lambda: C64) -> Result<C64> {
        let mut acc = ZERO;
        for k in 0..self.len() {
            let z = lambda - self.d[k];
            if z == ZERO {
                return Err(Error::Domain(format!("lambda = {lambda} is the pole d_{k}")));
            }
            acc += self.b[k] / z;
        }
        Ok(acc)
    }
}

/// A spectral point in the chart of pole `k`, with both coordinates kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub k: usize,
    pub mu: C64,
    pub lambda: C64,
}

impl SpectralPoint {
    pub fn from_mu(poles: &PoleSet, k: usize, mu: C64) -> Result<Self> {
        Ok(SpectralPoint {
            k,
            mu,
            lambda: poles.mu_to_lambda(k, mu)?,
        })
    }

    pub fn from_lambda(poles: &PoleSet, k: usize, lambda: C64) -> Result<Self> {
        Ok(SpectralPoint {
            k,
            mu: poles.lambda_to_mu(k, lambda)?,
            lambda,
        })
    }

    /// The point at conj(μ), which is conj(λ) because d_k is real.
    pub fn conj(&self) -> Self {
        SpectralPoint {
            k: self.k,
            mu: self.mu.conj(),
            lambda: self.lambda.conj(),
        }
    }
}

/// Uniform grid on [0, l] with n subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    l: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("grid needs n >= 2, got {n}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Validation(format!("grid length must be positive, got {l}")));
        }
        Ok(GridSpec { l, n })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.l
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }

    /// Trapezoid weights of [0, x_r] on the first r + 1 nodes.
    pub fn trapezoid_weights(&self, r: usize) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; r + 1];
        if r == 0 {
            w[0] = 0.0;
        } else {
            w[0] = 0.5 * h;
            w[r] = 0.5 * h;
        }
        w
    }

    /// Same grid step, restricted to the first r subintervals.
    pub fn prefix(&self, r: usize) -> Result<Self> {
        GridSpec::new(self.node(r), r)
    }

    /// Index of the node closest to x.
    pub fn nearest(&self, x: f64) -> usize {
        ((x / self.h()).round().max(0.0) as usize).min(self.n)
    }
}

/// Normalize a row per the ingestion tolerances.
pub fn normalize_row(row: Row) -> Result<Row> {
    let norm = row_norm_sqr(&row).sqrt();
    let drift = (norm - 1.0).abs();
    if !norm.is_finite() || drift > ROW_RENORMALIZE_TOL {
        return Err(Error::Validation(format!(
            "row [{}, {}] has norm {norm}, outside the renormalization tolerance",
            row[0], row[1]
        )));
    }
    if drift <= ROW_ACCEPT_TOL {
        Ok(row)
    } else {
        Ok([row[0] / norm, row[1] / norm])
    }
}

/// Unit rows β_k(x_i) for every pole on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: GridSpec,
    rows: Vec<Vec<Row>>,
}

impl PotentialField {
    /// Rows indexed `[k][i]`; each is validated and renormalized on ingestion.
    pub fn new(grid: GridSpec, rows: Vec<Vec<Row>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("potential has no rows".into()));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (k, series) in rows.into_iter().enumerate() {
            if series.len() != grid.node_count() {
                return Err(Error::Validation(format!(
                    "row {k} has {} samples, grid has {} nodes",
                    series.len(),
                    grid.node_count()
                )));
            }
            let series = series
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    normalize_row(r).map_err(|e| {
                        Error::Validation(format!("beta_{k} at node {i}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            clean.push(series);
        }
        Ok(PotentialField { grid, rows: clean })
    }

    /// Sample `f(k, x)` on the grid. Rows are normalized exactly.
    pub fn from_fn(grid: GridSpec, m: usize, f: impl Fn(usize, f64) -> Row) -> Result<Self> {
        let rows = (0..m)
            .map(|k| {
                grid.nodes()
                    .map(|x| {
                        let r = f(k, x);
                        let n = row_norm_sqr(&r).sqrt();
                        [r[0] / n, r[1] / n]
                    })
                    .collect()
            })
            .collect();
        PotentialField::new(grid, rows)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self, k: usize) -> &[Row] {
        &self.rows[k]
    }

    pub fn row(&self, k: usize, i: usize) -> Row {
        self.rows[k][i]
    }

    /// β_k(x) by linear interpolation between nodes, renormalized to unit length.
    pub fn value_at(&self, k: usize, x: f64) -> Row {
        let h = self.grid.h();
        let n = self.grid.n();
        let s = (x / h).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        let a = self.rows[k][i];
        let b = self.rows[k][i + 1];
        let r = [a[0] * (1.0 - t) + b[0] * t, a[1] * (1.0 - t) + b[1] * t];
        let norm = row_norm_sqr(&r).sqrt();
        if norm > 0.0 {
            [r[0] / norm, r[1] / norm]
        } else {
            a
        }
    }

    /// Second-order finite-difference derivative of β_k at node i.
    pub fn derivative(&self, k: usize, i: usize) -> Row {
        let h = self.grid.h();
        let n = self.grid.n();
        let r = &self.rows[k];
        let fd = |a: C64, b: C64, c: C64, s: f64| (a * s + b + c) / h;
        if i == 0 {
            [
                fd(r[0][0], r[1][0] * 4.0, -r[2][0], -3.0) * 0.5,
                fd(r[0][1], r[1][1] * 4.0, -r[2][1], -3.0) * 0.5,
            ]
        } else if i == n {
            [
                fd(r[n][0], -r[n - 1][0] * 4.0, r[n - 2][0], 3.0) * 0.5,
                fd(r[n][1], -r[n - 1][1] * 4.0, r[n - 2][1], 3.0) * 0.5,
            ]
        } else {
            [
                (r[i + 1][0] - r[i - 1][0]) / (2.0 * h),
                (r[i + 1][1] - r[i - 1][1]) / (2.0 * h),
            ]
        }
    }

    /// Largest sampled ‖β_k′‖ over all k and nodes.
    pub fn max_derivative_norm(&self) -> f64 {
        let mut best = 0.0_f64;
        for k in 0..self.m() {
            for i in 0..self.grid.node_count() {
                best = best.max(row_norm_sqr(&self.derivative(k, i)).sqrt());
            }
        }
        best
    }

    /// Same potential resampled on another grid (by `value_at`).
    pub fn resample(&self, grid: GridSpec) -> Result<Self> {
        let rows = (0..self.m())
            .map(|k| grid.nodes().map(|x| self.value_at(k, x)).collect())
            .collect();
        PotentialField::new(grid, rows)
    }

    /// The projector β_k*β_k at node i.
    pub fn projector(&self, k: usize, i: usize) -> Mat2 {
        Mat2::outer(&self.rows[k][i])
    }

    /// Multiply every row of pole k by a unimodular constant.
    pub fn rephase(&self, k: usize, c: C64) -> Self {
        let mut out = self.clone();
        for r in out.rows[k].iter_mut() {
            r[0] *= c;
            r[1] *= c;
        }
        out
    }
}

/// Q = [[β₁, β₂], [−conj β₂, conj β₁]] for a unit row β.
pub fn gauge_q(row: &Row) -> Result<Mat2> {
    let norm = row_norm_sqr(row).sqrt();
    if (norm - 1.0).abs() > ROW_RENORMALIZE_TOL || !norm.is_finite() {
        return Err(Error::Validation(format!(
            "gauge needs a unit row, got norm {norm}"
        )));
    }
    Ok(gauge_q_unchecked(row))
}

pub(crate) fn gauge_q_unchecked(row: &Row) -> Mat2 {
    Mat2::new(row[0], row[1], -row[1].conj(), row[0].conj())
}
