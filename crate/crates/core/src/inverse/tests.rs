use std::sync::OnceLock;

use super::*;
use crate::direct::{bound_m, sample_weyl_function, symmetric_grid};
use crate::linalg::{ONE, ZERO};
use crate::presets::{smooth_potential, split_pair, two_poles, weyl_set_potential};

struct Fixture {
    truth: PotentialField,
    weyl: WeylData,
    report: ReconstructionReport,
}

fn zeta() -> Vec<f64> {
    symmetric_grid(640.0, 1024)
}

fn grid() -> GridSpec {
    GridSpec::new(1.0, 256).unwrap()
}

fn roundtrip() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let poles = two_poles();
        let truth = smooth_potential(grid()).unwrap();
        let m_cut = bound_m(&truth, &poles, 0.05).unwrap();
        let weyl = sample_weyl_function(&truth, &poles, -4.0, &zeta(), m_cut).unwrap();
        let report = recover_from_weyl_function(&weyl, &poles, &grid()).unwrap();
        Fixture {
            truth,
            weyl,
            report,
        }
    })
}

fn weyl_set_of(truth: &PotentialField) -> WeylSetData {
    let poles = two_poles();
    let m_cut = bound_m(truth, &poles, 0.05).unwrap();
    sample_weyl_set(truth, &poles, -4.0, &zeta(), m_cut).unwrap()
}

#[test]
fn zero_data_single_pole_gives_constant_row() {
    let poles = PoleSet::new(vec![0.0], vec![1]).unwrap();
    let zeta = symmetric_grid(64.0, 64);
    let weyl = WeylData {
        eta: -4.0,
        phi: vec![vec![ZERO; zeta.len()]],
        zeta,
        beta0: None,
        m_cut: 0.0,
        l: 1.0,
        truncation_bound: 0.0,
    };
    let rep = recover_from_weyl_function(&weyl, &poles, &GridSpec::new(1.0, 64).unwrap()).unwrap();
    for row in rep.field.rows(0) {
        assert!((row[0] - ONE).norm() < 1e-12 && row[1].norm() < 1e-12, "{row:?}");
    }
    assert!(rep.constants[0].norm() < 1e-12);
}

#[test]
fn weyl_function_roundtrip() {
    let fx = roundtrip();
    let err = projector_error(&fx.report.field, &fx.truth).unwrap();
    assert!(err < 5e-2, "projector error {err:e}");
    assert!(fx.report.row_drift < 1e-3);
    assert!(fx.report.identity_residual.is_finite() && fx.report.identity_residual >= 0.0);
}

#[test]
fn fitted_constants_match_recovered_boundary() {
    let fx = roundtrip();
    let from_field = boundary_constants(&fx.report.field);
    for (c, f) in fx.report.constants.iter().zip(from_field) {
        let f = f.expect("β_k1(0) ≠ 0");
        assert!((c - f).norm() < 1e-2, "{c} vs {f}");
    }
}

#[test]
fn recovered_system_reproduces_its_data() {
    let fx = roundtrip();
    let mismatch = resampled_mismatch(&fx.report.field, &two_poles(), &fx.weyl, 16).unwrap();
    assert!(mismatch < 5e-2, "mismatch {mismatch:e}");
}

#[test]
fn reconstructions_at_two_resolutions_agree() {
    let fx = roundtrip();
    let coarse =
        recover_from_weyl_function(&fx.weyl, &two_poles(), &GridSpec::new(1.0, 128).unwrap())
            .unwrap();
    let gap = projector_error(&coarse.field, &fx.report.field).unwrap();
    assert!(gap < 5e-3, "n vs 2n gap {gap:e}");
}

#[test]
fn weyl_set_without_n2_matches_weyl_function_path() {
    let fx = roundtrip();
    let ws = weyl_set_of(&fx.truth);
    assert!(ws.n2.is_empty());
    let rep = recover_from_weyl_set(&ws, &two_poles(), &grid()).unwrap();
    let gap = projector_error(&rep.field, &fx.report.field).unwrap();
    assert!(gap < 1e-8, "{gap:e}");
}

#[test]
fn weyl_set_roundtrip_with_vanishing_first_entry() {
    let truth = weyl_set_potential(grid()).unwrap();
    let ws = weyl_set_of(&truth);
    assert_eq!((ws.n1.clone(), ws.n2.clone()), (vec![0], vec![1]));
    let rep = recover_from_weyl_set(&ws, &two_poles(), &grid()).unwrap();
    let err = projector_error(&rep.field, &truth).unwrap();
    assert!(err < 5e-2, "projector error {err:e}");
}

#[test]
fn rephasing_the_system_leaves_projectors_unchanged() {
    let c = C64::from_polar(1.0, 1.1);
    let truth = weyl_set_potential(grid()).unwrap();
    let base = recover_from_weyl_set(&weyl_set_of(&truth), &two_poles(), &grid()).unwrap();
    for k in 0..2 {
        let turned = truth.rephase(k, c);
        let ws = weyl_set_of(&turned);
        assert!((ws.beta0[k][0] - c * truth.row(k, 0)[0]).norm() < 1e-15);
        let rep = recover_from_weyl_set(&ws, &two_poles(), &grid()).unwrap();
        let gap = projector_error(&rep.field, &base.field).unwrap();
        assert!(gap < 1e-8, "pole {k}: {gap:e}");
    }
}

#[test]
fn bad_partitions_are_rejected() {
    let zeta = symmetric_grid(64.0, 32);
    let base = WeylSetData {
        eta: -4.0,
        psi: vec![vec![ZERO; zeta.len()]; 2],
        zeta,
        beta0: vec![[ONE, ZERO], [ZERO, ONE]],
        n1: vec![0],
        n2: vec![1],
        m_cut: 0.0,
        l: 1.0,
        truncation_bound: 0.0,
    };
    assert!(base.validate().is_ok());
    let grid = GridSpec::new(1.0, 16).unwrap();
    for (n1, n2) in [(vec![0, 1], vec![1]), (vec![0], vec![]), (vec![0, 1], vec![]), (vec![1], vec![0])] {
        let ws = WeylSetData {
            n1,
            n2,
            ..base.clone()
        };
        assert!(matches!(ws.validate(), Err(Error::Partition(_))));
        let err = recover_from_weyl_set(&ws, &two_poles(), &grid).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "input", .. }));
    }
}

#[test]
fn default_partition_prefers_the_larger_entry() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rows = [[ONE, ZERO], [ZERO, ONE], [C64::new(s, 0.0), C64::new(0.0, s)]];
    assert_eq!(default_partition(&rows), (vec![0, 2], vec![1]));
}

#[test]
fn projector_error_rejects_mismatched_sizes() {
    let g = GridSpec::new(1.0, 8).unwrap();
    let one = PotentialField::from_fn(g, 1, |_, _| [ONE, ZERO]).unwrap();
    let two = PotentialField::from_fn(g, 2, |_, _| [ONE, ZERO]).unwrap();
    assert!(projector_error(&one, &two).is_err());
    assert_eq!(projector_error(&two, &two).unwrap(), 0.0);
}

#[test]
fn identical_potentials_give_a_degenerate_fit() {
    let g = GridSpec::new(1.5, 384).unwrap();
    let a = smooth_potential(g).unwrap();
    match borg_marchenko_gap(&a, &a, &two_poles(), 0.5, 0.5) {
        Err(Error::DegenerateFit { max_difference }) => assert!(max_difference < 1e-6),
        other => panic!("expected a degenerate fit, got {other:?}"),
    }
}

#[test]
fn gap_rate_tracks_the_split_point() {
    let g = GridSpec::new(1.5, 384).unwrap();
    let rates: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&l0| {
            let (a, b) = split_pair(g, l0).unwrap();
            let rate = borg_marchenko_gap(&a, &b, &two_poles(), l0, 0.5).unwrap().rate;
            assert!((rate - l0).abs() < 0.15 * l0, "l0 = {l0}: rate {rate}");
            rate
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
}
