//! Reconstruction pipelines: Weyl function → Φ → S-node → β, the Weyl-set
//! variant, and an empirical Borg–Marchenko rate harness.

use rayon::prelude::*;

use crate::direct::{asymptotic_constant, truncation_bound, weyl_point, wt_function, WeylData, MOBIUS_EPS};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{row_norm_sqr, Mat2, C64};
use crate::model::{GridSpec, PoleSet, PotentialField, Row};
use crate::snode::{
    assemble_s, identity_residual, inverse_sweep, recover_beta, synth_phi2, synthesize, Contour,
    PhiColumns, SNode,
};

/// Outcome of a reconstruction with its diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub field: PotentialField,
    /// max_{k,x} ‖β̂_k*β̂_k − β_k*β_k‖ against a supplied ground truth.
    pub projector_error: Option<f64>,
    pub identity_residual: f64,
    pub row_drift: f64,
    /// Asymptotic constants c_k fitted from the data.
    pub constants: Vec<C64>,
    /// Truncation estimates of the Fourier synthesis, per pole.
    pub synthesis_truncation: Vec<f64>,
    /// Truncation bound of the Weyl data itself.
    pub data_truncation: f64,
}

/// Spectral norm of a Hermitian 2×2 matrix.
fn hermitian_norm(a: &Mat2) -> f64 {
    let p = a.get(0, 0).re;
    let q = a.get(1, 1).re;
    let off = a.get(0, 1).norm();
    0.5 * (p + q).abs() + (0.25 * (p - q) * (p - q) + off * off).sqrt()
}

/// max_{k,i} ‖β̂_k*β̂_k − β_k*β_k‖ over the nodes of `recovered`, with the truth
/// interpolated onto them.
pub fn projector_error(recovered: &PotentialField, truth: &PotentialField) -> Result<f64> {
    if recovered.m() != truth.m() {
        return Err(Error::Validation(format!(
            "{} recovered rows against {} true rows",
            recovered.m(),
            truth.m()
        )));
    }
    let grid = recovered.grid();
    let mut worst = 0.0_f64;
    for k in 0..recovered.m() {
        for i in 0..grid.node_count() {
            let x = grid.node(i);
            let p = Mat2::outer(&truth.value_at(k, x));
            worst = worst.max(hermitian_norm(&(recovered.projector(k, i) - p)));
        }
    }
    Ok(worst)
}

fn finish(
    node: &SNode,
    constants: Vec<C64>,
    synthesis_truncation: Vec<f64>,
    data_truncation: f64,
) -> Result<ReconstructionReport> {
    let sweep = inverse_sweep(node).stage("sweep")?;
    let beta = recover_beta(node, &sweep).stage("recovery")?;
    let report = ReconstructionReport {
        field: beta.field,
        projector_error: None,
        identity_residual: identity_residual(node),
        row_drift: beta.max_drift,
        constants,
        synthesis_truncation,
        data_truncation,
    };
    let finite = report.identity_residual.is_finite()
        && report.row_drift.is_finite()
        && report.synthesis_truncation.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::ReconstructionQuality("non-finite diagnostics".into()));
    }
    Ok(report)
}

fn check_weyl(weyl: &WeylData, poles: &PoleSet) -> Result<()> {
    if weyl.m() != poles.len() {
        return Err(Error::Validation(format!(
            "Weyl data has {} columns for {} poles",
            weyl.m(),
            poles.len()
        )));
    }
    // Boundedness on the sampled line.
    if !weyl.sup_norm().is_finite() {
        return Err(Error::Validation("Weyl samples are not finite".into()));
    }
    Ok(())
}

/// φ → Φ₂ → S → β on `grid`.
pub fn recover_from_weyl_function(
    weyl: &WeylData,
    poles: &PoleSet,
    grid: &GridSpec,
) -> Result<ReconstructionReport> {
    check_weyl(weyl, poles).stage("input")?;
    let (phi, parts) = synth_phi2(weyl, grid).stage("synthesis")?;
    let node = assemble_s(phi, poles, Contour::default()).stage("assembly")?;
    finish(
        &node,
        parts.iter().map(|p| p.c).collect(),
        parts.iter().map(|p| p.truncation_estimate).collect(),
        weyl.truncation_bound,
    )
}

/// c_k = −β_k2(0)/β_k1(0) of a potential, where defined.
pub fn boundary_constants(field: &PotentialField) -> Vec<Option<C64>> {
    (0..field.m())
        .map(|k| asymptotic_constant(&field.row(k, 0)))
        .collect()
}

/// Boundary rows β_k(0) with the raw Weyl points ψ̃_k on a horizontal line,
/// split into N₁ (β_k1(0) ≠ 0) and N₂ (β_k2(0) ≠ 0).
#[derive(Debug, Clone, PartialEq)]
pub struct WeylSetData {
    pub eta: f64,
    pub zeta: Vec<f64>,
    pub beta0: Vec<Row>,
    /// ψ̃_k(ζ_j + iη), indexed `[k][j]`.
    pub psi: Vec<Vec<C64>>,
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    pub m_cut: f64,
    pub l: f64,
    pub truncation_bound: f64,
}

impl WeylSetData {
    pub fn m(&self) -> usize {
        self.beta0.len()
    }

    /// Checks the partition and the boundary rows.
    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.psi.len() != m || self.psi.iter().any(|p| p.len() != self.zeta.len()) {
            return Err(Error::Validation("ψ samples do not match β(0) and ζ".into()));
        }
        for (k, row) in self.beta0.iter().enumerate() {
            if (row_norm_sqr(row) - 1.0).abs() > 1e-8 {
                return Err(Error::Validation(format!("β_{}(0) is not a unit row", k + 1)));
            }
        }
        let mut seen = vec![0usize; m];
        for &k in self.n1.iter().chain(&self.n2) {
            if k >= m {
                return Err(Error::Partition(format!("index {} exceeds m = {m}", k + 1)));
            }
            seen[k] += 1;
        }
        if let Some(k) = seen.iter().position(|&s| s != 1) {
            return Err(Error::Partition(format!(
                "pole {} appears {} times in N1 ∪ N2",
                k + 1,
                seen[k]
            )));
        }
        for (set, c) in [(&self.n1, 0), (&self.n2, 1)] {
            if let Some(&k) = set.iter().find(|&&k| self.beta0[k][c].norm() <= MOBIUS_EPS) {
                return Err(Error::Partition(format!(
                    "β_{}{}(0) vanishes but pole {} is in N{}",
                    k + 1,
                    c + 1,
                    k + 1,
                    c + 1
                )));
            }
        }
        Ok(())
    }

    /// φ_k for k ∈ N₁, the reciprocal φ̂_k = 1/φ_k for k ∈ N₂.
    fn transformed(&self, k: usize) -> Result<Vec<C64>> {
        let b = self.beta0[k];
        let n2 = self.n2.contains(&k);
        self.psi[k]
            .iter()
            .enumerate()
            .map(|(j, &psi)| {
                let p = b[0].conj() * psi - b[1];
                let q = b[1].conj() * psi + b[0];
                let (num, den) = if n2 { (q, p) } else { (p, q) };
                if den.norm() <= MOBIUS_EPS {
                    return Err(Error::NearSingularMobius {
                        mu: C64::new(self.zeta[j], self.eta),
                        denominator: den.norm(),
                    });
                }
                Ok(num / den)
            })
            .collect()
    }
}

/// N₁ = {k : |β_k1(0)| ≥ |β_k2(0)|}, N₂ the rest.
pub fn default_partition(beta0: &[Row]) -> (Vec<usize>, Vec<usize>) {
    (0..beta0.len()).partition(|&k| beta0[k][0].norm() >= beta0[k][1].norm())
}

/// Samples the Weyl set of `potential` on μ = ζ_j + iη.
pub fn sample_weyl_set(
    potential: &PotentialField,
    poles: &PoleSet,
    eta: f64,
    zeta: &[f64],
    m_cut: f64,
) -> Result<WeylSetData> {
    if !(eta < -m_cut / 4.0) {
        return Err(Error::Validation(format!(
            "sampling line Im mu = {eta} must lie below -M/4 = {}",
            -m_cut / 4.0
        )));
    }
    let m = poles.len();
    let beta0: Vec<Row> = (0..m).map(|k| potential.row(k, 0)).collect();
    let psi = (0..m)
        .map(|k| {
            zeta.par_iter()
                .map(|&z| weyl_point(potential, poles, k, C64::new(z, eta)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (n1, n2) = default_partition(&beta0);
    let l = potential.grid().l();
    Ok(WeylSetData {
        eta,
        zeta: zeta.to_vec(),
        beta0,
        psi,
        n1,
        n2,
        m_cut,
        l,
        truncation_bound: truncation_bound(eta, m_cut, l),
    })
}

/// Weyl set → Φ (column ≡ 1 chosen by the partition) → S → β on `grid`.
pub fn recover_from_weyl_set(
    ws: &WeylSetData,
    poles: &PoleSet,
    grid: &GridSpec,
) -> Result<ReconstructionReport> {
    ws.validate().stage("input")?;
    if ws.m() != poles.len() {
        return Err(Error::Validation(format!(
            "Weyl set has {} rows for {} poles",
            ws.m(),
            poles.len()
        ))
        .at_stage("input"));
    }
    let parts = (0..ws.m())
        .map(|k| synthesize(&ws.transformed(k)?, &ws.zeta, ws.eta, grid))
        .collect::<Result<Vec<_>>>()
        .stage("synthesis")?;
    let swapped: Vec<bool> = (0..ws.m()).map(|k| ws.n2.contains(&k)).collect();
    let phi = PhiColumns::with_varying(
        *grid,
        &swapped,
        parts.iter().map(|p| p.value.clone()).collect(),
        parts.iter().map(|p| p.derivative.clone()).collect(),
    )
    .stage("synthesis")?;
    let node = assemble_s(phi, poles, Contour::default()).stage("assembly")?;
    finish(
        &node,
        parts.iter().map(|p| p.c).collect(),
        parts.iter().map(|p| p.truncation_estimate).collect(),
        ws.truncation_bound,
    )
}

/// max |φ̂_k(μ_j) − φ_k(μ_j)| at every `stride`-th sample, where φ̂ is the Weyl
/// function of `recovered` and φ the data it came from.
pub fn resampled_mismatch(
    recovered: &PotentialField,
    poles: &PoleSet,
    weyl: &WeylData,
    stride: usize,
) -> Result<f64> {
    check_weyl(weyl, poles)?;
    let probes: Vec<(usize, usize)> = (0..weyl.m())
        .flat_map(|k| (0..weyl.zeta.len()).step_by(stride.max(1)).map(move |j| (k, j)))
        .collect();
    let worst = probes
        .par_iter()
        .map(|&(k, j)| {
            let mu = weyl.mu(j);
            let psi = weyl_point(recovered, poles, k, mu)?;
            let phi = wt_function(psi, &recovered.row(k, 0), mu)?;
            Ok((phi - weyl.phi[k][j]).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Noise floor below which Weyl-function differences are treated as zero.
pub const DIFFERENCE_FLOOR: f64 = 1e-12;

/// Fitted exponential separation of two Weyl functions along a ray.
#[derive(Debug, Clone, PartialEq)]
pub struct GapFit {
    /// −slope of log‖Δφ‖ against −2 Im μ; ≈ l0 when the potentials agree on [0, l0].
    pub rate: f64,
    pub intercept: f64,
    /// (−2 Im μ, log‖Δφ‖) of the points used.
    pub points: Vec<(f64, f64)>,
    pub max_difference: f64,
}

/// Depths t along the ray μ = t(ray_slope − i), t ∈ [t_min, t_max].
pub fn ray_depths(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| t_min + (t_max - t_min) * j as f64 / (count.max(2) - 1) as f64)
        .collect()
}

/// Weyl functions of two potentials on the ray Re μ = −ray_slope·Im μ, and the
/// least-squares rate of their separation.
pub fn borg_marchenko_gap(
    pot_a: &PotentialField,
    pot_b: &PotentialField,
    poles: &PoleSet,
    l0: f64,
    ray_slope: f64,
) -> Result<GapFit> {
    if pot_a.m() != poles.len() || pot_b.m() != poles.len() {
        return Err(Error::Validation("potentials and poles disagree on m".into()));
    }
    if !(l0 > 0.0 && l0 < pot_a.grid().l().min(pot_b.grid().l())) {
        return Err(Error::Validation(format!("split point {l0} outside both intervals")));
    }
    // e^{−2 t l0} runs over roughly nine decades, well above the floor.
    let t_min = 2.0;
    let t_max = t_min + 10.0 / l0;
    let depths = ray_depths(t_min, t_max, 24);
    let sample = |pot: &PotentialField, mu: C64| -> Result<Vec<C64>> {
        (0..poles.len())
            .map(|k| {
                let psi = weyl_point(pot, poles, k, mu)?;
                wt_function(psi, &pot.row(k, 0), mu)
            })
            .collect()
    };
    let diffs = depths
        .par_iter()
        .map(|&t| {
            let mu = C64::new(ray_slope * t, -t);
            let a = sample(pot_a, mu)?;
            let b = sample(pot_b, mu)?;
            let d = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            Ok((2.0 * t, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_difference = diffs.iter().map(|p| p.1).fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = diffs
        .iter()
        .filter(|p| p.1 > DIFFERENCE_FLOOR)
        .map(|&(s, d)| (s, d.ln()))
        .collect();
    if points.len() < 4 {
        return Err(Error::DegenerateFit { max_difference });
    }
    let n = points.len() as f64;
    let sx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy = points.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum::<f64>();
    let sxx = points.iter().map(|p| (p.0 - sx) * (p.0 - sx)).sum::<f64>();
    let slope = sxy / sxx;
    Ok(GapFit {
        rate: -slope,
        intercept: sy - slope * sx,
        points,
        max_difference,
    })
}

#[cfg(test)]
mod tests;
