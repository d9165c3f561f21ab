mod common;

use std::f64::consts::TAU;

use krom::kmd::{compute_dmd, KoopmanDecomposition};
use krom::linalg::CMatrix;
use krom::metrics::{eigenvalue_discrepancy, geodesic_error, residence_time, residence_time_linear, true_geodesic};
use krom::modeselect::{select_min_modes, ModalSet};
use krom::noise::{compute_residual, NoiseDecomposition};
use krom::rom::{fit_coefficients, ReducedOrderModel};
use krom::snapshots::{
    complexify_angles, decomplexify_angles, hankel_embed, unembed, SnapshotMatrix, SnapshotMeta,
};
use krom::systems::{
    draw_coupling, simulate_anharmonic, simulate_kuramoto, AnharmonicConfig, KuramotoConfig,
};
use num_complex::Complex64;
use proptest::prelude::*;

use common::SplitMix64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_signal(n: usize, n_t: usize, seed: u64) -> SnapshotMatrix {
    let mut rng = SplitMix64::new(seed);
    let v = CMatrix::from_fn(n, n_t, |_, _| c(rng.normal(), 0.0));
    SnapshotMatrix::new(v, SnapshotMeta::raw(n, 1.0)).unwrap()
}

fn unit_modes(n: usize, k: usize, rng: &mut SplitMix64) -> CMatrix {
    let m = CMatrix::from_fn(n, k, |_, _| c(rng.normal(), rng.normal()));
    CMatrix::from_columns(&m.column_iter().map(|v| v.normalize()).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hankel_columns_shift(n in 1usize..4, n_t in 3usize..20, d_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let d = 1 + ((n_t - 1) as f64 * d_frac) as usize;
        let x = random_signal(n, n_t, seed);
        let h = hankel_embed(&x, d).unwrap();
        prop_assert_eq!(h.n_obs(), n * d);
        prop_assert_eq!(h.n_t(), n_t - d + 1);
        for k in 0..h.n_t().saturating_sub(1) {
            for r in 0..n * (d - 1) {
                prop_assert_eq!(h.values()[(r + n, k)], h.values()[(r, k + 1)]);
            }
        }
        let back = unembed(h.values(), d, n).unwrap();
        prop_assert_eq!(&back, x.values());
    }

    #[test]
    fn complexify_is_on_circle_and_invertible(
        angles in prop::collection::vec(0.0f64..1.0, 2..30),
        period in 0.1f64..10.0,
    ) {
        let rows: Vec<Vec<f64>> = vec![angles.iter().map(|a| a * period).collect()];
        let x = SnapshotMatrix::from_real_rows(&rows, 0.1).unwrap();
        let z = complexify_angles(&x, period).unwrap();
        for v in z.values().iter() {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let back = decomplexify_angles(&z).unwrap();
        for (a, b) in back.real_row(0).iter().zip(&rows[0]) {
            prop_assert!(true_geodesic(*a, *b, period) < 1e-12);
            prop_assert!(*a >= 0.0 && *a < period);
        }
    }

    #[test]
    fn fitted_coefficients_are_least_squares_optimal(seed in any::<u64>(), j in 1usize..5) {
        let x = random_signal(6, 25, seed);
        let d = compute_dmd(&x, None).unwrap().truncate(j).unwrap();
        let rom = fit_coefficients(&d, &x, 0..25).unwrap();
        let err = |r: &ReducedOrderModel| compute_residual(r, &x, 0..25).unwrap().norm_squared();
        let best = err(&rom);
        let mut rng = SplitMix64::new(seed ^ 0x9e37);
        for _ in 0..20 {
            let delta: Vec<Complex64> = (0..j).map(|_| c(rng.normal(), rng.normal())).collect();
            let norm = delta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let coeffs: Vec<Complex64> = rom.coefficients().iter().zip(&delta).map(|(a, b)| a + b * (1e-3 / norm)).collect();
            let moved = ReducedOrderModel::new(d.clone(), coeffs, 0..25, 1.0).unwrap();
            prop_assert!(err(&moved) >= best * (1.0 - 1e-12));
        }
    }

    #[test]
    fn unit_circle_reconstruction_is_bounded(seed in any::<u64>(), k in 1usize..6, t in 0usize..500) {
        let mut rng = SplitMix64::new(seed);
        let modes = unit_modes(5, k, &mut rng);
        let lambda: Vec<Complex64> = (0..k).map(|_| Complex64::from_polar(1.0, TAU * rng.uniform())).collect();
        let coeffs: Vec<Complex64> = (0..k).map(|_| c(rng.normal(), rng.normal())).collect();
        let bound: f64 = coeffs.iter().map(|z| z.norm()).sum();
        let d = KoopmanDecomposition::new(lambda, modes, vec![1.0; k], k, SnapshotMeta::raw(5, 1.0)).unwrap();
        let rom = ReducedOrderModel::new(d, coeffs, 0..1, 1.0).unwrap();
        prop_assert!(rom.evaluate(t).unwrap().norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn noise_split_identities(seed in any::<u64>(), j in 1usize..6) {
        let x = random_signal(8, 30, seed);
        let d = compute_dmd(&x, None).unwrap().truncate(j).unwrap();
        let rom = fit_coefficients(&d, &x, 0..20).unwrap();
        let noise = NoiseDecomposition::compute(&rom, &x, 0..30).unwrap();
        let sum = noise.modal() + noise.innovation();
        prop_assert!((sum - noise.residual()).norm() < 1e-10);
        let overlap = d.modes().adjoint() * noise.innovation();
        prop_assert!(overlap.norm() < 1e-10);
        for t in 0..30 {
            let r = noise.residual().column(t).norm_squared();
            let p = noise.modal().column(t).norm_squared() + noise.innovation().column(t).norm_squared();
            prop_assert!((r - p).abs() <= 1e-8 * r.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn selection_is_monotone_in_threshold(seed in any::<u64>(), lo in 0.0f64..0.5, step in 0.0f64..0.5) {
        let mut rng = SplitMix64::new(seed);
        let sets: Vec<ModalSet> = (1..=5)
            .map(|j| ModalSet {
                modes: 10 * j,
                coordinates: (0..3)
                    .map(|_| (0..40).map(|_| if rng.uniform() < 0.2 * j as f64 { rng.normal() } else { rng.uniform() }).collect())
                    .collect(),
            })
            .collect();
        let a = select_min_modes(&sets, lo).unwrap();
        let b = select_min_modes(&sets, lo + step).unwrap();
        prop_assert_eq!(&a, &select_min_modes(&sets, lo).unwrap());
        match (a.selected_j, b.selected_j) {
            (Some(x), Some(y)) => prop_assert!(y >= x),
            (None, Some(_)) => prop_assert!(false, "raising the threshold found a model"),
            _ => {}
        }
    }

    #[test]
    fn geodesic_error_properties(
        pairs in prop::collection::vec((0.0f64..TAU, 0.0f64..TAU), 1..40),
        shift in -3i32..3,
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let e = geodesic_error(&a, &b, TAU).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - geodesic_error(&b, &a, TAU).unwrap()).abs() < 1e-15);
        let wrapped: Vec<f64> = a.iter().map(|x| x + shift as f64 * TAU).collect();
        prop_assert!(geodesic_error(&a, &wrapped, TAU).unwrap() < 1e-12);
    }

    #[test]
    fn circle_distance_properties(x in -20.0f64..20.0, y in -20.0f64..20.0, z in -20.0f64..20.0, period in 0.5f64..10.0) {
        let d = |a, b| true_geodesic(a, b, period);
        prop_assert!(d(x, y) <= period / 2.0 + 1e-12);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-12);
    }

    #[test]
    fn residence_is_a_monotone_fraction(
        pairs in prop::collection::vec((0.0f64..TAU, 0.0f64..TAU), 1..40),
        s1 in 0.0f64..2.0,
        ds in 0.0f64..2.0,
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let r1 = residence_time(&a, &b, s1, TAU).unwrap();
        let r2 = residence_time(&a, &b, s1 + ds, TAU).unwrap();
        prop_assert!((0.0..=1.0).contains(&r1) && r1 <= r2);
        let l1 = residence_time_linear(&a, &b, s1).unwrap();
        prop_assert!((0.0..=1.0).contains(&l1) && l1 <= residence_time_linear(&a, &b, s1 + ds).unwrap());
    }

    #[test]
    fn discrepancy_of_a_set_with_itself_is_zero(zs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..20)) {
        let s: Vec<Complex64> = zs.iter().map(|&(a, b)| c(a, b)).collect();
        prop_assert_eq!(eigenvalue_discrepancy(&s, &s).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn anharmonic_without_noise_conserves_total_action(seed in any::<u64>(), coupling in 0.05f64..0.95) {
        let cfg = AnharmonicConfig { noise_std: 0.0, coupling_c: coupling, t_final: 10.0, ..AnharmonicConfig::reference(seed) };
        let x = simulate_anharmonic(&cfg).unwrap();
        let n = cfg.n_osc;
        let total = |t: usize| (0..n).map(|i| x.values()[(i, t)].re).sum::<f64>();
        let first = total(0);
        for t in 0..x.n_t() {
            prop_assert!((total(t) - first).abs() < 1e-12);
            for i in 0..n {
                prop_assert!(x.values()[(i, t)].re > 0.0);
            }
        }
    }

    #[test]
    fn simulators_are_pure_and_angles_wrapped(seed in any::<u64>()) {
        let a = AnharmonicConfig { t_final: 5.0, ..AnharmonicConfig::reference(seed) };
        let xa = simulate_anharmonic(&a).unwrap();
        prop_assert_eq!(&xa, &simulate_anharmonic(&a).unwrap());
        for t in 0..xa.n_t() {
            for i in a.n_osc..2 * a.n_osc {
                let th = xa.values()[(i, t)].re;
                prop_assert!((0.0..1.0).contains(&th));
            }
        }
        let k = KuramotoConfig { t_final: 5.0, ..KuramotoConfig::reference(seed) };
        let xk = simulate_kuramoto(&k).unwrap();
        prop_assert_eq!(&xk, &simulate_kuramoto(&k).unwrap());
        prop_assert!(xk.values().iter().all(|z| z.re >= 0.0 && z.re < TAU && z.im == 0.0));
        let zeta = draw_coupling(&k).unwrap();
        for i in 0..k.n_osc {
            prop_assert_eq!(zeta[i][i], 0.0);
            for j in 0..k.n_osc {
                prop_assert_eq!(zeta[i][j], zeta[j][i]);
            }
        }
    }
}
