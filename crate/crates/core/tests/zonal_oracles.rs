use ellshape::special_fn::{enumerate_partitions, gen_pochhammer, ln_factorial};
use ellshape::zonal::{
    hypergeom_0f1, lemma1_exp_trace_series, lemma1_power_series, stiefel_mc_integral, zonal_poly,
    SeriesControl, ZonalEvaluator,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn sym_eigs(entries: &[f64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        entries[a * n + b]
    });
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

fn sym_matrix(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |e| sym_eigs(&e, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degree_sum_is_trace_power(eigs in prop_oneof![sym_matrix(2), sym_matrix(3)]) {
        let trace: f64 = eigs.iter().sum();
        let scale: f64 = eigs.iter().map(|e| e.abs()).sum::<f64>().max(1e-300);
        for f in 1..=8u32 {
            let sum: f64 = enumerate_partitions(f, eigs.len())
                .iter()
                .map(|k| zonal_poly(k, &eigs))
                .sum();
            // Cancellation makes the error relative to (Σ|λ|)^f, not to (tr X)^f.
            prop_assert!((sum - trace.powi(f as i32)).abs() <= 1e-9 * scale.powi(f as i32));
        }
    }

    #[test]
    fn homogeneous_of_degree_weight(eigs in sym_matrix(3), c in -3.0f64..3.0) {
        for f in 1..=6u32 {
            for k in enumerate_partitions(f, 3) {
                let lhs = zonal_poly(&k, &eigs.iter().map(|e| c * e).collect::<Vec<_>>());
                let rhs = c.powi(f as i32) * zonal_poly(&k, &eigs);
                let scale = (c.abs() * eigs.iter().map(|e| e.abs()).fold(0.0, f64::max)).powi(f as i32);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300) * 10.0);
            }
        }
    }

    #[test]
    fn symmetric_in_eigenvalues(eigs in sym_matrix(3), perm in 0usize..6) {
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let permuted: Vec<f64> = orders[perm].iter().map(|&i| eigs[i]).collect();
        for f in 1..=6u32 {
            for k in enumerate_partitions(f, 3) {
                let a = zonal_poly(&k, &eigs);
                let b = zonal_poly(&k, &permuted);
                let scale = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max).powi(f as i32);
                prop_assert!((a - b).abs() <= 1e-12 * scale.max(1e-300) * 10.0);
            }
        }
    }

    #[test]
    fn appending_zero_eigenvalues_changes_nothing(eigs in sym_matrix(2)) {
        let mut padded = eigs.clone();
        padded.push(0.0);
        for k in enumerate_partitions(5, 2) {
            prop_assert_eq!(zonal_poly(&k, &eigs), zonal_poly(&k, &padded));
        }
    }

    #[test]
    fn rank_one_argument_only_has_the_row_partition(x in -3.0f64..3.0, f in 1u32..8) {
        // C_(f)(x) = x^f and C_κ vanishes when κ has more parts than the rank.
        for k in enumerate_partitions(f, 3) {
            let v = zonal_poly(&k, &[x, 0.0, 0.0]);
            if k.len() == 1 {
                prop_assert!((v - x.powi(f as i32)).abs() <= 1e-12 * x.abs().powi(f as i32).max(1e-300));
            } else {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn evaluator_blocks_match_direct_evaluation() {
    let eigs = [2.5, -0.7, 0.4];
    let mut ev = ZonalEvaluator::new(&eigs);
    for f in 0..=7u32 {
        let block = ev.next_block();
        for (kappa, value) in block.iter() {
            assert_eq!(kappa.weight(), f);
            let direct = zonal_poly(kappa, &eigs);
            assert!((value.to_f64() - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}

/// At rank one the matrix function is the scalar series `Σ x^k / ((b)_k k!)`.
#[test]
fn hypergeometric_rank_one_is_scalar_series() {
    let ctrl = SeriesControl::default();
    for (b, x) in [(1.0, 0.7), (1.5, 3.2), (2.5, -1.4)] {
        let mut scalar = 0.0;
        for k in 0..80u32 {
            let kappa = ellshape::Partition::new(vec![k]).unwrap();
            let p = gen_pochhammer(b, &kappa);
            scalar += (f64::from(k) * f64::ln(f64::abs(x)) - ln_factorial(k)).exp()
                * if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 }
                / p;
        }
        let v = hypergeom_0f1(b, &[x, 0.0], &ctrl).unwrap();
        assert!((v - scalar).abs() < 1e-12 * scalar.abs(), "b={b} x={x}: {v} vs {scalar}");
    }
}

/// `∫_{O(2)} etr(XH) dH = ₀F₁(1; XX'/4)` for the normalized Haar measure.
#[test]
fn bessel_function_of_matrix_argument_matches_haar_average() {
    let ctrl = SeriesControl::default();
    let x = DMatrix::from_row_slice(2, 2, &[0.9, -0.4, 0.3, 1.2]);
    let gram = SymmetricEigen::new(&x * x.transpose()).eigenvalues;
    let quarter: Vec<f64> = gram.iter().map(|e| e / 4.0).collect();
    let series = hypergeom_0f1(1.0, &quarter, &ctrl).unwrap();
    let (est, se) = stiefel_mc_integral(|h| (&x * h).trace().exp(), 2, 2, 200_000, 3).unwrap();
    let vol = 4.0 * std::f64::consts::PI;
    assert!((est / vol - series).abs() < 4.0 * se / vol, "{} vs {series}", est / vol);
}

fn instance(seed: u64) -> (f64, DMatrix<f64>) {
    // Small deterministic generator so the instances are fixed.
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let y_trace = 1.5 + next();
    let x = DMatrix::from_fn(2, 2, |_, _| 0.8 * next());
    (y_trace, x)
}

fn gram_eigs(x: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(x * x.transpose()).eigenvalues.iter().copied().collect()
}

#[test]
fn lemma1_power_series_matches_monte_carlo() {
    let ctrl = SeriesControl::default();
    for seed in 0..3 {
        let (y_trace, x) = instance(seed);
        for p in [1.0, 2.0, 3.0] {
            let series = lemma1_power_series(p, y_trace, &gram_eigs(&x), 2, 2, &ctrl).unwrap();
            let (est, se) =
                stiefel_mc_integral(|h| (y_trace + (&x * h).trace()).powf(p), 2, 2, 100_000, 10 + seed)
                    .unwrap();
            assert!((series - est).abs() < 4.0 * se.max(1e-12), "p={p}: {series} vs {est} ± {se}");
        }
    }
}

#[test]
fn lemma1_exp_trace_matches_monte_carlo() {
    let ctrl = SeriesControl::default();
    for seed in 0..3 {
        let (y_trace, x) = instance(seed + 100);
        let r = 0.6;
        let series = lemma1_exp_trace_series(r, y_trace, &gram_eigs(&x), 2, 2, &ctrl).unwrap();
        let (est, se) = stiefel_mc_integral(
            |h| {
                let t = y_trace + (&x * h).trace();
                t * (r * t).exp()
            },
            2,
            2,
            100_000,
            20 + seed,
        )
        .unwrap();
        assert!((series - est).abs() < 4.0 * se, "{series} vs {est} ± {se}");
    }
}
