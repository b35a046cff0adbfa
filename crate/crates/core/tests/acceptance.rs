//! Acceptance suite: one line per criterion, non-zero exit if any is red.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use weylrat::direct::{
    approx_weyl_point, bound_m, frak_a_samples, integrate_fundamental, sample_weyl_function,
    symmetric_grid, truncation_bound, weyl_disks,
};
use weylrat::inverse::{
    borg_marchenko_gap, projector_error, recover_from_weyl_function, recover_from_weyl_set,
    resampled_mismatch, sample_weyl_set,
};
use weylrat::linalg::{Mat2, C64, I, ONE, ZERO};
use weylrat::model::{GridSpec, PotentialField};
use weylrat::presets::{
    smooth_phi_columns, smooth_potential, split_pair, two_poles, weyl_set_potential,
};
use weylrat::sgordon::{
    evolve_q, recover_cos_omega, zero_curvature_residual, BoundaryData, Constant, Kink,
    SgSolution, SgSpectral,
};
use weylrat::snode::{
    assemble_s, factorization_residual, identity_residual, identity_residual_l2, inverse_sweep,
    recover_beta, resolvent_apply, transfer_ode_residual, Contour, SNode,
};

type Outcome = Result<(bool, String), String>;

fn smooth_node(n: usize) -> Result<SNode, String> {
    let grid = GridSpec::new(1.0, n).map_err(|e| e.to_string())?;
    assemble_s(smooth_phi_columns(grid), &two_poles(), Contour::default()).map_err(|e| e.to_string())
}

macro_rules! t {
    ($e:expr) => {
        $e.map_err(|e| e.to_string())?
    };
}

fn c1_resolvent() -> Outcome {
    let poles = two_poles();
    let grid = t!(GridSpec::new(1.0, 512));
    let lambda = C64::new(0.3, 0.7);
    let ones = vec![ONE; grid.node_count()];
    let mut worst = 0.0_f64;
    for k in 0..2 {
        let z = lambda - poles.d(k);
        let g = t!(resolvent_apply(&poles, k, lambda, &ones, grid.h()));
        for (x, gi) in grid.nodes().zip(&g) {
            let exact = (I * poles.b(k) * x / z).exp() / z;
            worst = worst.max((gi - exact).norm());
        }
    }
    Ok((worst < 1e-10, format!("max error {worst:.3e} (< 1e-10)")))
}

fn c2_identity() -> Outcome {
    let (a, b) = (smooth_node(128)?, smooth_node(256)?);
    let (r1, r2) = (identity_residual(&a), identity_residual(&b));
    let (l1, l2) = (identity_residual_l2(&a), identity_residual_l2(&b));
    let ratio = r1 / r2;
    Ok((
        r2 < 1e-3 && ratio >= 3.0,
        format!(
            "sup-norm residual {r2:.3e} at n=256 (< 1e-3), ratio {ratio:.2} (>= 3); \
             weighted-L2 for reference {l2:.3e}, ratio {:.2}",
            l1 / l2
        ),
    ))
}

fn c3_factorization() -> Outcome {
    let node = smooth_node(256)?;
    let sweep = t!(inverse_sweep(&node));
    let r = t!(factorization_residual(&node, &sweep));
    Ok((r < 1e-6, format!("|V*BV S - I|/|S| = {r:.3e} (< 1e-6)")))
}

fn c4_rows() -> Outcome {
    let node = smooth_node(256)?;
    let sweep = t!(inverse_sweep(&node));
    let beta = t!(recover_beta(&node, &sweep));
    Ok((
        beta.max_drift < 1e-3,
        format!("max | |beta|^2 - 1 | = {:.3e} (< 1e-3)", beta.max_drift),
    ))
}

fn c5_transfer() -> Outcome {
    let lambda = C64::new(0.3, 0.8);
    let mut r = Vec::new();
    for n in [128, 256] {
        let node = smooth_node(n)?;
        let sweep = t!(inverse_sweep(&node));
        let beta = t!(recover_beta(&node, &sweep));
        r.push(t!(transfer_ode_residual(&node, &sweep, &beta.field, lambda)));
    }
    let ratio = r[0] / r[1];
    Ok((
        r[1] < 1e-2 && ratio >= 3.0,
        format!("relative residual {:.3e} at n=256 (< 1e-2), ratio {ratio:.2} (>= 3)", r[1]),
    ))
}

fn c6_direct() -> Outcome {
    let poles = two_poles();
    let field = t!(smooth_potential(t!(GridSpec::new(1.0, 128))));
    let (mut sym, mut det) = (0.0_f64, 0.0_f64);
    for re in [-1.5, -0.5, 0.5, 1.5] {
        for im in [-1.0, -0.3, 0.3, 1.0] {
            let lambda = C64::new(re, im);
            let w = t!(integrate_fundamental(&field, &poles, lambda));
            let wc = t!(integrate_fundamental(&field, &poles, lambda.conj()));
            for (a, b) in w.samples.iter().zip(&wc.samples) {
                sym = sym.max((b.adjoint() * *a - Mat2::identity()).max_abs());
            }
            let want = (I * t!(poles.trace_density(lambda))).exp();
            det = det.max((w.at_end().det() - want).norm() / want.norm().max(1.0));
        }
    }
    Ok((
        sym < 1e-8 && det < 1e-8,
        format!("16 probes: |w(conj l)*w(l) - I| {sym:.3e}, det error {det:.3e} (< 1e-8)"),
    ))
}

fn c7_disks() -> Outcome {
    let poles = two_poles();
    let field = t!(smooth_potential(t!(GridSpec::new(1.0, 128))));
    let m = t!(bound_m(&field, &poles, 0.05));
    let lengths = [0.25, 0.5, 1.0];
    let mut failures = Vec::new();
    let mut probes = 0;
    let mut worst_theta = 0.0_f64;
    for k in 0..2 {
        for a in 0..4 {
            for z in 0..8 {
                let mu = C64::new(-20.0 + 40.0 * z as f64 / 7.0, -m / 4.0 - 0.1 - 1.5 * a as f64);
                probes += 1;
                let disks = t!(weyl_disks(&field, &poles, k, mu, &lengths));
                let rho_ok = disks
                    .iter()
                    .all(|d| d.rho1 >= 1.0 - 2.0 * d.l * (m / 4.0 + mu.im) - 1e-10);
                let nest = disks[0].contains_disk(&disks[1], 1e-10)
                    && disks[1].contains_disk(&disks[2], 1e-10);
                let frak = t!(frak_a_samples(&field, &poles, k, mu));
                let last = *frak.last().expect("nodes");
                let psi0 = t!(approx_weyl_point(&last, ZERO, mu));
                let bound = truncation_bound(mu.im, m, 1.0);
                let mut theta_ok = true;
                for theta in [ONE, -ONE, I, -I] {
                    let p = t!(approx_weyl_point(&last, theta, mu));
                    worst_theta = worst_theta.max((p - psi0).norm() / bound);
                    theta_ok &= (p - psi0).norm() <= bound;
                }
                if !(rho_ok && nest && psi0.norm() < 1.0 && theta_ok) {
                    failures.push(format!("pole {k} mu {mu}"));
                }
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "{probes} probes, {} failing; worst theta spread / bound = {worst_theta:.3}",
            failures.len()
        ),
    ))
}

struct Roundtrip {
    truth: PotentialField,
    field: PotentialField,
}

fn c8_roundtrip(keep: &mut Option<Roundtrip>) -> Outcome {
    let poles = two_poles();
    let grid = t!(GridSpec::new(1.0, 256));
    let truth = t!(smooth_potential(grid));
    let m = t!(bound_m(&truth, &poles, 0.05));
    // Sampling line Im mu = -4 is Im(2 mu) = -8 in the transform variable.
    let weyl = t!(sample_weyl_function(&truth, &poles, -4.0, &symmetric_grid(640.0, 1024), m));
    let rep = t!(recover_from_weyl_function(&weyl, &poles, &grid));
    let err = t!(projector_error(&rep.field, &truth));
    let mismatch = t!(resampled_mismatch(&rep.field, &poles, &weyl, 16));
    *keep = Some(Roundtrip {
        truth,
        field: rep.field,
    });
    Ok((
        err < 5e-2 && mismatch < 5e-2,
        format!("projector error {err:.3e}, re-sampled Weyl mismatch {mismatch:.3e} (< 5e-2)"),
    ))
}

fn c9_borg_marchenko() -> Outcome {
    let grid = t!(GridSpec::new(1.5, 384));
    let mut rates = Vec::new();
    let mut within = true;
    for l0 in [0.25, 0.5, 0.75] {
        let (a, b) = t!(split_pair(grid, l0));
        let fit = t!(borg_marchenko_gap(&a, &b, &two_poles(), l0, 0.5));
        within &= (fit.rate - l0).abs() <= 0.15 * l0;
        rates.push(fit.rate);
    }
    let monotone = rates.windows(2).all(|w| w[1] > w[0]);
    Ok((
        within && monotone,
        format!(
            "fitted rates {:.4}/{:.4}/{:.4} for l0 = 0.25/0.5/0.75 (within 15%, monotone)",
            rates[0], rates[1], rates[2]
        ),
    ))
}

fn c10_weyl_set(previous: &Option<Roundtrip>) -> Outcome {
    let poles = two_poles();
    let grid = t!(GridSpec::new(1.0, 256));
    let zeta = symmetric_grid(640.0, 1024);
    let truth = t!(weyl_set_potential(grid));
    let m = t!(bound_m(&truth, &poles, 0.05));
    let ws = t!(sample_weyl_set(&truth, &poles, -4.0, &zeta, m));
    let rep = t!(recover_from_weyl_set(&ws, &poles, &grid));
    let err = t!(projector_error(&rep.field, &truth));
    let prev = previous.as_ref().ok_or("criterion 8 did not produce a field")?;
    let m1 = t!(bound_m(&prev.truth, &poles, 0.05));
    let ws1 = t!(sample_weyl_set(&prev.truth, &poles, -4.0, &zeta, m1));
    let rep1 = t!(recover_from_weyl_set(&ws1, &poles, &grid));
    let agree = t!(projector_error(&rep1.field, &prev.field));
    Ok((
        !ws.n2.is_empty() && err < 5e-2 && ws1.n2.is_empty() && agree < 1e-8,
        format!(
            "N2 = {:?}: projector error {err:.3e} (< 5e-2); N1-only vs criterion 8 {agree:.3e} (< 1e-8)",
            ws.n2.iter().map(|k| k + 1).collect::<Vec<_>>()
        ),
    ))
}

fn c11_sine_gordon() -> Outcome {
    let kink = Kink { v: 0.5 };
    let unit = t!(GridSpec::new(1.0, 64));
    let drift = t!(evolve_q(&kink, unit, unit)).drift();
    let lambda = C64::new(0.3, 0.7);
    let mut zc = Vec::new();
    for n in [32, 64] {
        let g = t!(GridSpec::new(1.0, n));
        zc.push(t!(zero_curvature_residual(&t!(evolve_q(&kink, g, g)), lambda)));
    }
    let spectral = SgSpectral {
        eta: -4.0,
        zeta: symmetric_grid(640.0, 1024),
        horizon_tol: 1e-6,
    };
    let grid = t!(GridSpec::new(1.0, 256));
    let mut errs = Vec::new();
    for sol in [&Constant(PI) as &dyn SgSolution, &kink] {
        let bd = t!(BoundaryData::from_solution(sol, 3.0, 3 * 256));
        let out = t!(recover_cos_omega(&bd, 0.0, &grid, &spectral));
        errs.push(
            out.x
                .iter()
                .zip(&out.value)
                .map(|(&x, v)| (v - sol.omega(x, 0.0).cos()).abs())
                .fold(0.0, f64::max),
        );
    }
    let ratio = zc[0] / zc[1];
    Ok((
        drift < 1e-8 && ratio >= 3.0 && errs.iter().all(|e| *e < 5e-2),
        format!(
            "q drift {drift:.3e} (< 1e-8); zero-curvature ratio {ratio:.2} (>= 3); \
             cos omega error {:.3e} (omega = pi), {:.3e} (kink) (< 5e-2)",
            errs[0], errs[1]
        ),
    ))
}

fn report(id: usize, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = run();
    let took = start.elapsed();
    let in_time = took <= budget;
    let (ok, detail) = match outcome {
        Ok((ok, d)) => (ok && in_time, d),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id:>2}: {} - {detail}; {:.2}s (budget {}s)",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn main() {
    let secs = Duration::from_secs;
    let mut keep = None;
    let results = [
        report(1, secs(1), c1_resolvent),
        report(2, secs(30), c2_identity),
        report(3, secs(60), c3_factorization),
        report(4, secs(600), c4_rows),
        report(5, secs(600), c5_transfer),
        report(6, secs(600), c6_direct),
        report(7, secs(600), c7_disks),
        report(8, secs(300), || c8_roundtrip(&mut keep)),
        report(9, secs(600), c9_borg_marchenko),
        report(10, secs(600), || c10_weyl_set(&keep)),
        report(11, secs(600), c11_sine_gordon),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
