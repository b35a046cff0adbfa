//! Three pipelines for the browser page in `www/`: sample the Weyl function of
//! the smooth two-pole potential, reconstruct it back, and recover cos ω of a
//! sine-Gordon kink from boundary data. Outputs are flat `Float64Array`s.

use wasm_bindgen::prelude::*;
use weylrat::direct::{bound_m, sample_weyl_function, symmetric_grid};
use weylrat::inverse::{projector_error, recover_from_weyl_function};
use weylrat::presets::{smooth_potential, two_poles};
use weylrat::sgordon::{recover_cos_omega, BoundaryData, Kink, SgSolution, SgSpectral};
use weylrat::GridSpec;

const ETA: f64 = -4.0;

fn js(e: impl ToString) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Rows [ζ, Re φ₁, Im φ₁, Re φ₂, Im φ₂] on μ = ζ + iη.
pub fn weyl_rows(n: usize, eta: f64, zeta_max: f64, count: usize) -> Result<Vec<f64>, String> {
    let poles = two_poles();
    let field = smooth_potential(GridSpec::new(1.0, n).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let m = bound_m(&field, &poles, 0.05).map_err(|e| e.to_string())?;
    let weyl = sample_weyl_function(&field, &poles, eta, &symmetric_grid(zeta_max, count), m)
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(5 * count);
    for (j, z) in weyl.zeta.iter().enumerate() {
        out.push(*z);
        for col in &weyl.phi {
            out.extend([col[j].re, col[j].im]);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn weyl_samples(n: usize, eta: f64, zeta_max: f64, count: usize) -> Result<Vec<f64>, JsValue> {
    weyl_rows(n, eta, zeta_max, count).map_err(js)
}

/// Reconstruction of the smooth potential from its own Weyl samples.
#[wasm_bindgen]
pub struct Roundtrip {
    projector_error: f64,
    identity_residual: f64,
    x: Vec<f64>,
    recovered: Vec<f64>,
    truth: Vec<f64>,
}

#[wasm_bindgen]
impl Roundtrip {
    pub fn projector_error(&self) -> f64 {
        self.projector_error
    }

    pub fn identity_residual(&self) -> f64 {
        self.identity_residual
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// |β_k1|² for k = 1, 2, node-major.
    pub fn recovered(&self) -> Vec<f64> {
        self.recovered.clone()
    }

    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
}

pub fn run_roundtrip(n: usize, count: usize) -> Result<Roundtrip, String> {
    let poles = two_poles();
    let grid = GridSpec::new(1.0, n).map_err(|e| e.to_string())?;
    let truth = smooth_potential(grid).map_err(|e| e.to_string())?;
    let m = bound_m(&truth, &poles, 0.05).map_err(|e| e.to_string())?;
    // Keep the sample spacing fixed as the count changes.
    let zeta = symmetric_grid(0.625 * count as f64, count);
    let weyl = sample_weyl_function(&truth, &poles, ETA, &zeta, m).map_err(|e| e.to_string())?;
    let rep = recover_from_weyl_function(&weyl, &poles, &grid).map_err(|e| e.to_string())?;
    let err = projector_error(&rep.field, &truth).map_err(|e| e.to_string())?;
    let weights = |f: &weylrat::PotentialField| -> Vec<f64> {
        (0..=n)
            .flat_map(|i| (0..2).map(move |k| (i, k)))
            .map(|(i, k)| f.row(k, i)[0].norm_sqr())
            .collect()
    };
    Ok(Roundtrip {
        projector_error: err,
        identity_residual: rep.identity_residual,
        x: grid.nodes().collect(),
        recovered: weights(&rep.field),
        truth: weights(&truth),
    })
}

#[wasm_bindgen]
pub fn roundtrip(n: usize, count: usize) -> Result<Roundtrip, JsValue> {
    run_roundtrip(n, count).map_err(js)
}

/// Rows [x, recovered cos ω, exact cos ω] at time `t` for the kink of speed `v`.
pub fn kink_rows(v: f64, t: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(v.abs() < 1.0) {
        return Err(format!("kink speed {v} must satisfy |v| < 1"));
    }
    let kink = Kink { v };
    let horizon = 3.0;
    let steps = (horizon * n as f64) as usize;
    let bd = BoundaryData::from_solution(&kink, horizon, steps).map_err(|e| e.to_string())?;
    let t = (t * n as f64).round() / n as f64;
    let spectral = SgSpectral {
        eta: ETA,
        zeta: symmetric_grid(5.0 * n as f64, 8 * n),
        horizon_tol: 1e-6,
    };
    let grid = GridSpec::new(1.0, n).map_err(|e| e.to_string())?;
    let out = recover_cos_omega(&bd, t, &grid, &spectral).map_err(|e| e.to_string())?;
    Ok(out
        .x
        .iter()
        .zip(&out.value)
        .flat_map(|(&x, &c)| [x, c, kink.omega(x, t).cos()])
        .collect())
}

#[wasm_bindgen]
pub fn kink_cos_omega(v: f64, t: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    kink_rows(v, t, n).map_err(js)
}
