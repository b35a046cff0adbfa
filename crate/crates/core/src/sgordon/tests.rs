use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::direct::{symmetric_grid, weyl_point};
use crate::linalg::ZERO;

const KINK: Kink = Kink { v: 0.5 };

fn spectral() -> SgSpectral {
    SgSpectral {
        eta: -4.0,
        zeta: symmetric_grid(640.0, 1024),
        horizon_tol: 1e-6,
    }
}

fn kink_boundary() -> &'static BoundaryData {
    static CELL: OnceLock<BoundaryData> = OnceLock::new();
    CELL.get_or_init(|| BoundaryData::from_solution(&KINK, 3.0, 3 * 256).unwrap())
}

fn kink_time_potentials() -> &'static TimePotentials {
    static CELL: OnceLock<TimePotentials> = OnceLock::new();
    CELL.get_or_init(|| TimePotentials::new(kink_boundary()).unwrap())
}

fn unit_square(n: usize) -> (GridSpec, GridSpec) {
    (GridSpec::new(1.0, n).unwrap(), GridSpec::new(1.0, n).unwrap())
}

/// Not a solution: ω = sin x + xt.
struct Wrong;

impl SgSolution for Wrong {
    fn omega(&self, x: f64, t: f64) -> f64 {
        x.sin() + x * t
    }
    fn omega_x(&self, x: f64, t: f64) -> f64 {
        x.cos() + t
    }
    fn omega_t(&self, x: f64, _: f64) -> f64 {
        x
    }
}

#[test]
fn kink_solves_the_equation() {
    let h = 1e-3;
    for &(x, t) in &[(0.3, 0.1), (-0.7, 0.4), (1.2, -0.5)] {
        let w = |x, t| KINK.omega(x, t);
        let wxx = (w(x + h, t) - 2.0 * w(x, t) + w(x - h, t)) / (h * h);
        let wtt = (w(x, t + h) - 2.0 * w(x, t) + w(x, t - h)) / (h * h);
        assert!((wxx - wtt - w(x, t).sin()).abs() < 1e-5);
        let wx = (w(x + h, t) - w(x - h, t)) / (2.0 * h);
        let wt = (w(x, t + h) - w(x, t - h)) / (2.0 * h);
        assert!((wx - KINK.omega_x(x, t)).abs() < 1e-6);
        assert!((wt - KINK.omega_t(x, t)).abs() < 1e-6);
    }
}

#[test]
fn q_starts_at_identity_and_stays_unitary() {
    let (x, t) = unit_square(64);
    let field = evolve_q(&KINK, x, t).unwrap();
    assert!((field.q[0][0] - Mat2::identity()).norm() < 1e-15);
    assert!(field.drift() < 1e-8, "drift {:e}", field.drift());
    for j in [0, 17, 64] {
        for i in [0, 40, 64] {
            for row in field.rows(i, j) {
                assert!((crate::linalg::row_norm_sqr(&row) - 1.0).abs() < 1e-8);
            }
            assert!((field.cos_omega(i, j) - field.omega[j][i].cos()).abs() < 1e-10);
        }
    }
}

#[test]
fn path_ordering_discrepancy_vanishes_under_refinement() {
    let d: Vec<f64> = [8, 16, 32].iter().map(|&n| path_discrepancy(&KINK, 1.0, 1.0, n)).collect();
    assert!(d[0] / d[1] >= 3.0 && d[1] / d[2] >= 3.0, "{d:?}");
    // A non-solution leaves an O(1) mismatch.
    assert!(path_discrepancy(&Wrong, 1.0, 1.0, 32) > 1e-2);
}

#[test]
fn rows_at_omega_pi_are_orthogonal() {
    let q = expm2(Mat2::new(ZERO, C64::new(0.3, 0.1), C64::new(-0.3, 0.1), I * 0.2));
    let [b1, b2] = beta_from_omega(PI, &q);
    let p = b1[0] * b2[0].conj() + b1[1] * b2[1].conj();
    assert!(p.norm() < 1e-15);
    assert!((cos_from_rows(&b1, &b2) + 1.0).abs() < 1e-14);
}

proptest! {
    #[test]
    fn cos_identity_holds_for_any_unitary_gauge(
        omega in -10.0f64..10.0, a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
    ) {
        // exp of an anti-Hermitian matrix is unitary.
        let q = expm2(Mat2::new(I * a, C64::new(b, c), C64::new(-b, c), I * (-a)));
        let [b1, b2] = beta_from_omega(omega, &q);
        prop_assert!((crate::linalg::row_norm_sqr(&b1) - 1.0).abs() < 1e-12);
        prop_assert!((crate::linalg::row_norm_sqr(&b2) - 1.0).abs() < 1e-12);
        prop_assert!((cos_from_rows(&b1, &b2) - omega.cos()).abs() < 1e-10);
    }
}

#[test]
fn zero_curvature_residual_on_the_kink_is_second_order() {
    let lambda = C64::new(0.3, 0.7);
    let r: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let (x, t) = unit_square(n);
            zero_curvature_residual(&evolve_q(&KINK, x, t).unwrap(), lambda).unwrap()
        })
        .collect();
    assert!(r[0] / r[1] >= 3.0 && r[1] / r[2] >= 3.0, "{r:?}");
}

#[test]
fn zero_curvature_residual_of_the_static_solution() {
    let (x, t) = unit_square(256);
    let field = evolve_q(&Constant(PI), x, t).unwrap();
    let r = zero_curvature_residual(&field, C64::new(0.3, 0.7)).unwrap();
    assert!(r < 1e-6, "{r:e}");
}

#[test]
fn zero_curvature_residual_flags_a_non_solution() {
    let (x, t) = unit_square(32);
    let field = evolve_q(&Wrong, x, t).unwrap();
    assert!(zero_curvature_residual(&field, C64::new(0.3, 0.7)).unwrap() > 1e-2);
    for pole in [1.0, -1.0] {
        assert!(matches!(
            zero_curvature_residual(&field, C64::new(pole, 0.0)),
            Err(Error::Domain(_))
        ));
    }
}

#[test]
fn gauge_pair_compatibility_is_second_order() {
    let r: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let (x, t) = unit_square(n);
            compatibility_residual(&KINK, x, t)
        })
        .collect();
    assert!(r[0] / r[1] >= 3.0 && r[1] / r[2] >= 3.0, "{r:?}");
    let (x, t) = unit_square(32);
    assert!(compatibility_residual(&Wrong, x, t) > 1e-2);
}

#[test]
fn boundary_data_is_validated() {
    assert!(BoundaryData::new(1.0, vec![0.0; 8], vec![0.0; 8]).is_err());
    assert!(BoundaryData::new(1.0, vec![0.0; 9], vec![0.0; 11]).is_err());
    assert!(BoundaryData::new(0.0, vec![0.0; 9], vec![0.0; 9]).is_err());
    let mut bad = vec![0.0; 9];
    bad[3] = f64::NAN;
    assert!(BoundaryData::new(1.0, bad, vec![0.0; 9]).is_err());
}

#[test]
fn boundary_derivative_is_fourth_order() {
    let err = |n: usize| {
        let bd = BoundaryData::from_solution(&KINK, 2.0, n).unwrap();
        bd.omega0_derivative()
            .iter()
            .enumerate()
            .map(|(j, d)| (d - KINK.omega_t(0.0, bd.time(j))).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(32), err(64));
    assert!(a / b > 12.0, "{a:e} {b:e}");
    let bd = BoundaryData::from_solution(&KINK, 2.0, 64).unwrap();
    assert!((bd.omega0_at(0.123) - KINK.omega(0.0, 0.123)).abs() < 1e-7);
    assert!((bd.omega1_at(-1.9) - KINK.omega_x(0.0, -1.9)).abs() < 1e-7);
}

#[test]
fn boundary_q_matches_the_field_evolution() {
    let bd = kink_boundary();
    let q = boundary_q(bd).unwrap();
    assert!(unitarity_drift(&q) < 1e-8);
    assert!((q[bd.n] - Mat2::identity()).norm() < 1e-15);
    let (x, t) = (GridSpec::new(1.0, 2).unwrap(), GridSpec::new(3.0, 3 * 256).unwrap());
    let field = evolve_q(&KINK, x, t).unwrap();
    assert!((q[2 * bd.n] - field.q[3 * 256][0]).norm() < 1e-8);
}

#[test]
fn u_family_starts_at_identity() {
    let mu = C64::new(1.5, -4.0);
    for k in 0..2 {
        let u = build_u(kink_time_potentials(), k, mu).unwrap();
        assert_eq!(u.len(), 2 * kink_boundary().n + 1);
        assert!((u[kink_boundary().n] - Mat2::identity()).norm() < 1e-14);
    }
}

/// U_k over [t_a, t_b] started from I at t_a (forward in time), by an independent solve.
fn window_u(k: usize, mu: C64, a: usize, b: usize) -> Mat2 {
    let bd = kink_boundary();
    let rows = boundary_rows(bd).unwrap();
    let piece: Vec<Vec<Row>> = (0..2).map(|p| (a..=b).map(|j| rows[j][p]).collect()).collect();
    let span = (b - a) as f64 * bd.dt();
    let pot = PotentialField::new(GridSpec::new(span, b - a).unwrap(), piece).unwrap();
    let z = integrate_fundamental(&pot, &t_poles(), x_poles().mu_to_lambda(k, mu).unwrap())
        .unwrap()
        .at_end();
    let sign = if k == 0 { -1.0 } else { 1.0 };
    (gauge_q_unchecked(&pot.row(k, b - a)) * z * gauge_q_unchecked(&pot.row(k, 0)).adjoint())
        .scale((I * sign * span * mu).exp())
}

#[test]
fn u_family_is_j_monotone() {
    // Im μ = −4 lies below −M̂/2 for the kink boundary data.
    assert!(kink_time_potentials().cutoff().unwrap() < 8.0);
    let bd = kink_boundary();
    let mu = C64::new(-2.0, -4.0);
    let width = 64;
    for a in (0..2 * bd.n - width).step_by(97) {
        for k in 0..2 {
            let u = window_u(k, mu, a, a + width);
            let gain = u.adjoint() * Mat2::j() * u - Mat2::j();
            let sign = if k == 0 { 1.0 } else { -1.0 };
            let ev = gain.scale_re(sign).min_hermitian_eigenvalue();
            assert!(ev > 0.0, "pole {k}, window at t = {}: {ev:e}", bd.time(a));
        }
    }
}

#[test]
fn u_entries_grow_away_from_the_origin() {
    let tp = kink_time_potentials();
    let bd = kink_boundary();
    let mu = C64::new(-2.0, -4.0);
    let u1 = build_u(tp, 0, mu).unwrap();
    let u2 = build_u(tp, 1, mu).unwrap();
    for s in (1..=bd.n).step_by(50) {
        let t = s as f64 * bd.dt();
        assert!(u1[bd.n + s].get(0, 0).norm_sqr() > 1.0 + t);
        assert!(u2[bd.n - s].get(0, 0).norm_sqr() > 1.0 + t);
    }
}

#[test]
fn origin_weyl_points_match_the_x_problem() {
    let tp = kink_time_potentials();
    let xpot = x_potential(&KINK, 0.0, GridSpec::new(8.0, 8 * 256).unwrap()).unwrap();
    for z in [0.0, 3.0, -10.0, 50.0] {
        let mu = C64::new(z, -4.0);
        let u = [build_u(tp, 0, mu).unwrap(), build_u(tp, 1, mu).unwrap()];
        let o = psi_at_origin(&u[0], &u[1], mu, 1e-6).unwrap();
        for k in 0..2 {
            let direct = weyl_point(&xpot, &x_poles(), k, mu).unwrap();
            assert!(o.psi[k].norm() < 1.0);
            assert!((o.psi[k] - direct).norm() < 1e-5, "ζ = {z}, pole {k}");
        }
        assert!(o.change < 1e-6);
    }
}

#[test]
fn short_horizon_is_reported() {
    let bd = BoundaryData::from_solution(&KINK, 0.05, 8).unwrap();
    let tp = TimePotentials::new(&bd).unwrap();
    let mu = C64::new(0.0, -4.0);
    let u = [build_u(&tp, 0, mu).unwrap(), build_u(&tp, 1, mu).unwrap()];
    assert!(matches!(
        psi_at_origin(&u[0], &u[1], mu, 1e-6),
        Err(Error::HorizonTooShort { .. })
    ));
}

#[test]
fn psi_evolution_is_a_cocycle() {
    let tp = kink_time_potentials();
    let bd = kink_boundary();
    let mu = C64::new(0.7, -4.0);
    let k = 0;
    let u = build_u_half(tp, k, mu, true).unwrap();
    let u2 = build_u_half(tp, 1, mu, false).unwrap();
    let psi0 = origin_from_halves(&u, &u2, mu, 1e-6).unwrap().psi[k];
    assert_eq!(evolve_psi(psi0, &Mat2::identity(), mu).unwrap(), psi0);
    let (s1, s2) = (200, 500);
    // Independent solve on [t1, t2] alone.
    let rows: Vec<Vec<Row>> = (0..2).map(|p| tp.forward.rows(p)[s1..=s2].to_vec()).collect();
    let piece = PotentialField::new(GridSpec::new((s2 - s1) as f64 * bd.dt(), s2 - s1).unwrap(), rows)
        .unwrap();
    let z = integrate_fundamental(&piece, &tp.forward_poles, x_poles().mu_to_lambda(k, mu).unwrap())
        .unwrap();
    let span = piece.grid().l();
    let step = (gauge_q_unchecked(&piece.row(k, s2 - s1)) * z.at_end()
        * gauge_q_unchecked(&piece.row(k, 0)).adjoint())
    .scale((-I * span * mu).exp());
    let two = evolve_psi(evolve_psi(psi0, &u[s1], mu).unwrap(), &step, mu).unwrap();
    let one = evolve_psi(psi0, &u[s2], mu).unwrap();
    assert!((two - one).norm() < 1e-8, "{:e}", (two - one).norm());
    for s in (0..=bd.n).step_by(25) {
        assert!(evolve_psi(psi0, &u[s], mu).unwrap().norm() < 1.0);
    }
}

#[test]
fn evolve_psi_rejects_bad_input() {
    let mu = C64::new(0.0, -4.0);
    assert!(evolve_psi(C64::new(1.5, 0.0), &Mat2::identity(), mu).is_err());
    let singular = Mat2::new(C64::new(1.0, 0.0), ZERO, C64::new(1.0, 0.0), C64::new(-1.0, 0.0));
    assert!(matches!(
        evolve_psi(C64::new(1.0, 0.0), &singular, mu),
        Err(Error::NearSingularMobius { .. })
    ));
}

#[test]
fn weyl_set_time_must_be_a_node() {
    let bd = BoundaryData::from_solution(&KINK, 1.0, 8).unwrap();
    assert!(weyl_set_at(&bd, 0.01, &spectral()).is_err());
}

fn check_cos(sol: &dyn SgSolution, bd: &BoundaryData, t: f64) {
    let grid = GridSpec::new(1.0, 256).unwrap();
    let out = recover_cos_omega(bd, t, &grid, &spectral()).unwrap();
    let err = out
        .x
        .iter()
        .zip(&out.value)
        .map(|(&x, v)| (v - sol.omega(x, t).cos()).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-2, "t = {t}: cos ω error {err:e}");
    assert!(out.value.iter().all(|v| v.abs() <= 1.0 + 1e-2));
    assert!(out.horizon_change < 1e-6);
}

#[test]
fn cos_omega_of_the_static_solution() {
    let bd = BoundaryData::from_solution(&Constant(PI), 3.0, 3 * 256).unwrap();
    check_cos(&Constant(PI), &bd, 0.0);
}

#[test]
fn cos_omega_of_the_kink() {
    check_cos(&KINK, kink_boundary(), 0.0);
    check_cos(&KINK, kink_boundary(), 0.5);
}
