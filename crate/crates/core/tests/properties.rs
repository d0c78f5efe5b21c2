use levent_core::floquet::solve_floquet;
use levent_core::gaussian::{symplectic_form, PHYSICALITY_TOL};
use levent_core::lyapunov::{residual, solve_lyapunov};
use levent_core::measures::phonon_difference_variance;
use levent_core::oracle::sample_gaussian;
use levent_core::system::spectral_abscissa;
use levent_core::{
    bogoliubov, build_counterrotating_drift, build_rwa_full_drift, epr_variance, log_negativity, mean_phonons, nrf,
    CovarianceMatrix, DiffusionMatrix, DriftModel, Harmonic, ModelVariant, QuadratureBasis, Rates, SystemParams,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn symmetric(entries: &[f64], d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(d, d, &entries[..d * d]);
    (&m + m.transpose()) * 0.5
}

/// `S D Sᵀ` with `S = exp(ΩH)` symplectic and `D` a diagonal of symplectic
/// eigenvalues `≥ 1`.
fn physical(h: &[f64], nus: &[f64]) -> DMatrix<f64> {
    let modes = nus.len();
    let d = 2 * modes;
    let s = (symplectic_form(modes) * symmetric(h, d)).exp();
    let mut diag = DMatrix::<f64>::zeros(d, d);
    for (k, nu) in nus.iter().enumerate() {
        diag[(2 * k, 2 * k)] = *nu;
        diag[(2 * k + 1, 2 * k + 1)] = *nu;
    }
    let v = &s * diag * s.transpose();
    (&v + v.transpose()) * 0.5
}

fn state(modes: usize) -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    let d = 2 * modes;
    (
        prop::collection::vec(-0.4..0.4f64, d * d),
        prop::collection::vec(1.0..5.0f64, modes),
    )
        .prop_map(|(h, nus)| (physical(&h, &nus), nus))
}

fn cov(v: DMatrix<f64>) -> CovarianceMatrix {
    CovarianceMatrix::from_matrix(v).unwrap()
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

fn direct_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn stable_drift(entries: &[f64], d: usize, margin: f64) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(d, d, &entries[..d * d]);
    let shift = spectral_abscissa(&m) + margin;
    m - DMatrix::identity(d, d) * shift
}

fn noise(diag: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag))
}

fn rates() -> impl Strategy<Value = Rates> {
    (
        (1.0..100.0f64, 0.01..0.99f64, 0.1..30.0f64, 0.1..30.0f64),
        (1.0..200.0f64, 1.0..200.0f64, 100.0..500.0f64),
        (1e3..1e9f64, 1e3..1e9f64, 0.0..1e3f64, 0.0..1e3f64),
    )
        .prop_map(|((l1, ratio, g1, g2), (k1, k2, om), (q1, q2, n1, n2))| Rates {
            lambda1: l1,
            lambda2: ratio * l1,
            g1,
            g2,
            kappa1: k1,
            kappa2: k2,
            omega1: om,
            omega2: om,
            q1,
            q2,
            n1,
            n2,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn physical_states_have_symplectic_eigenvalues_at_least_one((v, nus) in state(3)) {
        let v = cov(v);
        let got = v.symplectic_eigenvalues().unwrap();
        prop_assert!(got.iter().all(|&nu| nu >= 1.0 - PHYSICALITY_TOL));
        let mut want = nus.clone();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8 * w, "{got:?} vs {want:?}");
        }
        prop_assert!(v.is_physical());
    }

    #[test]
    fn partial_transpose_is_a_symmetric_involution((v, _) in state(2), mode in 0usize..2) {
        let v = cov(v);
        let once = v.partial_transpose(mode).unwrap();
        prop_assert_eq!(once.matrix(), &once.matrix().transpose());
        let twice = once.partial_transpose(mode).unwrap();
        prop_assert_eq!(twice.matrix(), v.matrix());
    }

    #[test]
    fn purity_factorizes_over_product_states((a, _) in state(1), (b, _) in state(2)) {
        let joint = cov(direct_sum(&a, &b));
        let pa = joint.marginal(&[0]).unwrap().purity().unwrap();
        let pb = joint.marginal(&[1, 2]).unwrap().purity().unwrap();
        let p = joint.purity().unwrap();
        prop_assert!((pa * pb - p).abs() < 1e-10, "{pa} * {pb} vs {p}");
        prop_assert!(p <= 1.0 + 1e-12);
    }

    #[test]
    fn fourth_moment_has_the_pair_symmetries(
        (v, _) in state(2),
        i in 0usize..4, j in 0usize..4, k in 0usize..4, l in 0usize..4,
    ) {
        let v = cov(v);
        let base = v.gaussian_fourth_moment(i, j, k, l).unwrap();
        for [a, b, c, d] in [[j, i, k, l], [i, j, l, k], [k, l, i, j], [l, k, j, i]] {
            let other = v.gaussian_fourth_moment(a, b, c, d).unwrap();
            prop_assert!((base - other).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }

    #[test]
    fn log_negativity_is_invariant_under_local_rotations(
        (v, _) in state(2), t1 in -3.2..3.2f64, t2 in -3.2..3.2f64,
    ) {
        let r = direct_sum(&rotation(t1), &rotation(t2));
        let v0 = cov(v);
        let v1 = cov(&r * v0.matrix() * r.transpose());
        let e0 = log_negativity(&v0).unwrap();
        let e1 = log_negativity(&v1).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-9, "{e0} vs {e1}");
    }

    #[test]
    fn duan_violation_implies_entanglement((v, _) in state(2)) {
        let v = cov(v);
        if epr_variance(&v).unwrap() < 1.0 {
            prop_assert!(log_negativity(&v).unwrap() > 0.0);
        }
    }

    #[test]
    fn phonon_statistics_are_nonnegative((v, _) in state(2)) {
        let v = cov(v);
        let (n1, n2) = mean_phonons(&v).unwrap();
        prop_assert!(n1 >= -1e-12 && n2 >= -1e-12);
        prop_assert!(phonon_difference_variance(&v).unwrap() >= -1e-9);
        if let Some(x) = nrf(&v).unwrap() {
            prop_assert!(x >= -1e-9);
        }
    }

    #[test]
    fn thermal_products_are_not_sub_poissonian(n1 in 0.0..50.0f64, n2 in 0.0..50.0f64) {
        let v = CovarianceMatrix::thermal(&[n1, n2]).unwrap();
        if let Some(x) = nrf(&v).unwrap() {
            prop_assert!(x >= 1.0 - 1e-9, "{x}");
        }
    }

    #[test]
    fn lyapunov_is_linear_in_the_noise(
        a in prop::collection::vec(-1.0..1.0f64, 64),
        n1 in prop::collection::vec(0.0..2.0f64, 8),
        n2 in prop::collection::vec(0.0..2.0f64, 8),
        margin in 0.05..1.0f64,
    ) {
        let a = stable_drift(&a, 8, margin);
        let (n1, n2) = (noise(&n1), noise(&n2));
        let v1 = solve_lyapunov(&a, &n1).unwrap();
        let v2 = solve_lyapunov(&a, &n2).unwrap();
        let v12 = solve_lyapunov(&a, &(&n1 + &n2)).unwrap();
        prop_assert!(relative(&v12, &(v1 + v2)) < 1e-9);
    }

    #[test]
    fn lyapunov_is_invariant_under_joint_scaling(
        a in prop::collection::vec(-1.0..1.0f64, 36),
        n in prop::collection::vec(0.1..2.0f64, 6),
        margin in 0.05..1.0f64,
        c in 1e-3..1e3f64,
    ) {
        let a = stable_drift(&a, 6, margin);
        let n = noise(&n);
        let v = solve_lyapunov(&a, &n).unwrap();
        let vc = solve_lyapunov(&(&a * c), &(&n * c)).unwrap();
        prop_assert!(relative(&v, &vc) < 1e-9);
        prop_assert!(residual(&a, &v, &n).unwrap().relative < 1e-10);
    }

    #[test]
    fn sampled_epr_variance_matches_the_closed_form((v, _) in state(2), seed in any::<u64>()) {
        let v = cov(v);
        let x = sample_gaussian(&v, 20_000, seed).unwrap();
        let vals: Vec<f64> = x
            .row_iter()
            .map(|r| 0.5 * ((r[0] + r[2]).powi(2) + (r[1] - r[3]).powi(2)))
            .collect();
        let count = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / count;
        let sd = (vals.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt();
        let want = epr_variance(&v).unwrap();
        // 4.5σ keeps the false-alarm rate negligible over all cases
        prop_assert!((mean - want).abs() < 4.5 * sd / count.sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn drift_diagonals_carry_the_decay_rates(r in rates(), variant in 0usize..3) {
        let p = SystemParams::new(r).unwrap();
        let variant = [ModelVariant::CsOnlyRwa, ModelVariant::FullRwa, ModelVariant::Counterrotating][variant];
        let m = variant.build_drift(&p).unwrap();
        let mut want = vec![p.kappa1() / 2.0; 2];
        if variant.cavity_count() == 2 {
            want.extend([p.kappa2() / 2.0; 2]);
        }
        want.extend([p.gamma1() / 2.0, p.gamma1() / 2.0, p.gamma2() / 2.0, p.gamma2() / 2.0]);
        for (i, w) in want.iter().enumerate() {
            prop_assert_eq!(m.constant()[(i, i)], -w);
        }
    }

    #[test]
    fn counterrotating_without_harmonics_is_the_rwa_model(r in rates()) {
        let p = SystemParams::new(r).unwrap();
        let cr = build_counterrotating_drift(&p).unwrap();
        prop_assert!(!cr.is_constant());
        prop_assert_eq!(cr.without_harmonics(), build_rwa_full_drift(&p));
    }

    #[test]
    fn bogoliubov_weights_are_normalized(r in rates()) {
        let b = bogoliubov(&SystemParams::new(r).unwrap()).unwrap();
        prop_assert!(b.lambda_eff > 0.0);
        let (u, v) = (r.lambda1 / b.lambda_eff, r.lambda2 / b.lambda_eff);
        prop_assert!((u * u - v * v - 1.0).abs() < 1e-12 * u * u);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn floquet_dc_of_a_constant_model_is_the_lyapunov_solution(
        a in prop::collection::vec(-1.0..1.0f64, 36),
        n in prop::collection::vec(0.1..2.0f64, 6),
        k in 1usize..5,
    ) {
        let a = stable_drift(&a, 6, 0.2);
        let zero = DMatrix::<f64>::zeros(6, 6);
        let m = DriftModel::new(
            QuadratureBasis::anonymous(3),
            a.clone(),
            vec![Harmonic { order: 1, cos: zero.clone(), sin: zero }],
            5.0,
        )
        .unwrap();
        let dc = solve_floquet(&m, &DiffusionMatrix::from_diagonal(&n).unwrap(), k).unwrap().dc_block();
        let v = solve_lyapunov(&a, &noise(&n)).unwrap();
        prop_assert!(relative(&v, &dc) < 1e-9);
    }

    #[test]
    fn dc_extraction_commutes_with_marginalization(
        a in prop::collection::vec(-1.0..1.0f64, 36),
        c in prop::collection::vec(-0.3..0.3f64, 36),
        n in prop::collection::vec(0.1..2.0f64, 6),
    ) {
        let a = stable_drift(&a, 6, 1.0);
        let cos = DMatrix::from_row_slice(6, 6, &c);
        let m = DriftModel::new(
            QuadratureBasis::new(["a", "b", "c"]),
            a,
            vec![Harmonic { order: 1, sin: cos.transpose(), cos }],
            7.0,
        )
        .unwrap();
        let sol = solve_floquet(&m, &DiffusionMatrix::from_diagonal(&n).unwrap(), 3).unwrap();
        let keep = [2usize, 3, 4, 5];
        let via_dc = cov(sol.dc_block()).marginal(&[1, 2]).unwrap();
        let blocks = sol.system.a_f.nrows() / 6;
        let idx: Vec<usize> = (0..blocks).flat_map(|b| keep.iter().map(move |&i| 6 * b + i)).collect();
        let reduced = sol.v_f.select_rows(&idx).select_columns(&idx);
        let dc = reduced.view((0, 0), (4, 4)).into_owned();
        let via_blocks = (&dc + dc.transpose()) * 0.5;
        prop_assert!(relative(via_dc.matrix(), &via_blocks) < 1e-14);
    }
}
