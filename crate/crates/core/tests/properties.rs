use nalgebra::DVector;
use proptest::prelude::*;

use sparselab::bounds::{
    exact_recovery_probability, experiment_params, sparsity_limit, theorem1_bounds, theorem3_bounds,
};
use sparselab::certificate::ConditionSubset;
use sparselab::certificate::{certify_exact, check_c2, d_vector, erc_value, fuchs_value};
use sparselab::ensemble::{
    best_k_term, derive_seed, gaussian_matrix, sparse_signal, sphere_noise, ProblemInstance, SignalSpec,
};
use sparselab::experiment::{
    estimate_counts, merge_counts, ExperimentConfig, Mode, ProbEstimate, Sweep, SweepVariable,
};
use sparselab::lasso::{check_kkt, homotopy_path, residual_ratio, solve_homotopy, solve_proximal};
use sparselab::stats::{wilson_interval, Z95};

fn instance(n: usize, p: usize, k: usize, seed: u64) -> ProblemInstance {
    ProblemInstance::generate(n, p, k.min(p), 1.0, 0.3, seed).unwrap()
}

fn gamma_max(inst: &ProblemInstance) -> f64 {
    inst.a.correlate(&inst.y).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homotopy_solutions_satisfy_kkt(n in 4usize..24, p in 4usize..40, k in 0usize..5, frac in 0.02f64..0.98, seed in any::<u64>()) {
        let inst = instance(n, p, k, seed);
        let gamma = frac * gamma_max(&inst);
        prop_assume!(gamma > 0.0);
        let sol = solve_homotopy(&inst.a, &inst.y, gamma).unwrap();
        prop_assert!(check_kkt(&inst.a, &inst.y, &sol.x, gamma, 1e-8).optimal, "violation {}", sol.kkt_violation);
    }

    #[test]
    fn proximal_meets_its_tolerance(n in 4usize..20, p in 4usize..30, k in 0usize..4, frac in 0.1f64..0.9, seed in any::<u64>()) {
        let inst = instance(n, p, k, seed);
        let gamma = frac * gamma_max(&inst);
        prop_assume!(gamma > 0.0);
        let tol = 1e-8;
        let sol = solve_proximal(&inst.a, &inst.y, gamma, tol, 200_000).unwrap();
        if sol.converged {
            prop_assert!(check_kkt(&inst.a, &inst.y, &sol.x, gamma, tol).optimal);
        }
    }

    #[test]
    fn residual_ratio_is_non_increasing(n in 4usize..24, p in 4usize..40, k in 0usize..5, seed in any::<u64>()) {
        let inst = instance(n, p, k, seed);
        let top = gamma_max(&inst);
        prop_assume!(top > 0.0);
        let path = homotopy_path(&inst.a, &inst.y, 1e-3 * top).unwrap().path.unwrap();
        let lo = path.gamma_min().max(1e-3 * top);
        let gammas: Vec<f64> = (0..60).map(|i| lo + (top - lo) * i as f64 / 59.0).collect();
        let f = residual_ratio(&path, &gammas).unwrap();
        for w in f.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn path_endpoint(n in 4usize..20, p in 4usize..30, seed in any::<u64>()) {
        let inst = instance(n, p, 2, seed);
        let top = gamma_max(&inst);
        prop_assume!(top > 0.0);
        let at_top = solve_homotopy(&inst.a, &inst.y, top).unwrap();
        prop_assert!(at_top.x.iter().all(|&v| v == 0.0));
        let below = solve_homotopy(&inst.a, &inst.y, top * (1.0 - 1e-9)).unwrap();
        prop_assert!(below.x.iter().filter(|&&v| v != 0.0).count() <= 1);
    }

    #[test]
    fn best_k_term_is_optimal(x in prop::collection::vec(-5.0f64..5.0, 1..8), k in 0usize..8) {
        let p = x.len();
        let k = k.min(p);
        let x = DVector::from_vec(x);
        let err = (&x - best_k_term(&x, k).dense()).norm();
        for mask in 0u32..(1 << p) {
            if mask.count_ones() as usize <= k {
                // the best z on a support keeps x there
                let z = DVector::from_fn(p, |i, _| if mask >> i & 1 == 1 { x[i] } else { 0.0 });
                prop_assert!(err <= (&x - z).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn sphere_noise_has_the_requested_norm(n in 1usize..300, eps in 0.0f64..1e3, seed in any::<u64>()) {
        let w = sphere_noise(n, eps, seed).unwrap();
        prop_assert!((w.norm() - eps).abs() <= 1e-10 * eps.max(1.0));
    }

    #[test]
    fn sparse_signals_are_well_formed(p in 1usize..200, k in 0usize..200, t in 0.01f64..10.0, seed in any::<u64>()) {
        let k = k.min(p);
        let s = sparse_signal(p, k, t, seed).unwrap();
        prop_assert_eq!(s.k(), k);
        prop_assert!(s.support().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.values().iter().all(|v| v.abs() == t));
        prop_assert_eq!(s.dense().iter().filter(|&&v| v != 0.0).count(), k);
        prop_assert_eq!(s, sparse_signal(p, k, t, seed).unwrap());
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
        let successes = (frac * trials as f64).round() as u64;
        let (lo, hi) = wilson_interval(successes, trials, Z95);
        let p = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn d_vector_reproduces_the_signs(n in 8usize..30, p in 8usize..40, k in 1usize..6, seed in any::<u64>()) {
        let a = gaussian_matrix(n, p, seed).unwrap();
        let x0 = sparse_signal(p, k, 1.0, derive_seed(seed, 0, 1)).unwrap();
        let d = d_vector(&a, x0.support(), &x0.signs()).unwrap();
        let back = a.select_columns(x0.support()).tr_mul(&d);
        for (b, s) in back.iter().zip(x0.signs()) {
            prop_assert!((b - s).abs() <= 1e-10);
        }
    }

    #[test]
    fn fuchs_value_ignores_magnitudes(n in 8usize..30, p in 8usize..40, k in 1usize..6, scale in 0.01f64..100.0, seed in any::<u64>()) {
        let a = gaussian_matrix(n, p, seed).unwrap();
        let x0 = sparse_signal(p, k, 1.0, derive_seed(seed, 0, 1)).unwrap();
        let values: Vec<f64> = x0.values().iter().enumerate().map(|(i, v)| v * scale * (1.0 + i as f64)).collect();
        let rescaled = SignalSpec::new(p, x0.support().to_vec(), values).unwrap();
        prop_assert_eq!(fuchs_value(&a, &x0).unwrap(), fuchs_value(&a, &rescaled).unwrap());
    }

    #[test]
    fn noiseless_dual_condition_is_the_fuchs_test(n in 8usize..30, p in 8usize..40, k in 1usize..6, frac in 0.01f64..2.0, seed in any::<u64>()) {
        let a = gaussian_matrix(n, p, seed).unwrap();
        let x0 = sparse_signal(p, k, 1.0, derive_seed(seed, 0, 1)).unwrap();
        let f = fuchs_value(&a, &x0).unwrap();
        prop_assume!((f - 1.0).abs() > 1e-9);
        let c2 = check_c2(&a, &x0, &DVector::zeros(n), frac).unwrap();
        prop_assert_eq!(c2.holds, f <= 1.0);
    }

    #[test]
    fn worst_sign_fuchs_equals_one_minus_erc(n in 6usize..16, p in 4usize..9, k in 1usize..4, seed in any::<u64>()) {
        let k = k.min(p - 1);
        let a = gaussian_matrix(n, p, seed).unwrap();
        let x0 = sparse_signal(p, k, 1.0, derive_seed(seed, 0, 1)).unwrap();
        let mut worst = 0.0f64;
        for mask in 0u32..(1 << k) {
            let values = (0..k).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let s = SignalSpec::new(p, x0.support().to_vec(), values).unwrap();
            worst = worst.max(fuchs_value(&a, &s).unwrap());
        }
        let erc = erc_value(&a, x0.support()).unwrap();
        prop_assert!((worst - (1.0 - erc)).abs() <= 1e-10);
    }

    #[test]
    fn certified_candidate_is_the_homotopy_solution(n in 10usize..40, p in 10usize..60, k in 1usize..4, seed in any::<u64>()) {
        let inst = ProblemInstance::generate(n, p, k, 3.0, 0.1, seed).unwrap();
        let gamma = 0.3;
        let r = certify_exact(&inst.a, &inst.x0, &inst.w, gamma).unwrap();
        if r.exact {
            prop_assert!(check_kkt(&inst.a, &inst.y, &r.candidate, gamma, 1e-10).optimal);
            let sol = solve_homotopy(&inst.a, &inst.y, gamma).unwrap();
            prop_assert!((&sol.x - &r.candidate).amax() <= 1e-8);
        }
    }

    #[test]
    fn merged_partitions_equal_the_full_run(split in 0u64..=16, seed in any::<u64>()) {
        let config = ExperimentConfig {
            n: 30, p: 150, alpha: 0.8, beta: 0.8, eps: 1.0, trials: 16,
            sweep: Sweep { variable: SweepVariable::K, grid: vec![0.0, 2.0, 5.0] },
            mode: Mode::Certificate, condition_subset: ConditionSubset::Both, master_seed: seed,
            k: None, t_ratio: 5.5, gamma_ratio: 1.0, gamma_divisor: None, shared_matrix: false,
        };
        let full = estimate_counts(&config, 0..16).unwrap();
        let merged = merge_counts(&estimate_counts(&config, 0..split).unwrap(), &estimate_counts(&config, split..16).unwrap()).unwrap();
        prop_assert_eq!(&merged, &full);
        for c in &full {
            let e = ProbEstimate::from_counts(SweepVariable::K, c);
            prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.p_hat && e.p_hat <= e.ci_high && e.ci_high <= 1.0);
        }
    }

    #[test]
    fn protocol_gamma_equals_the_theorem_gamma(n in 100usize..100_000, p in 200usize..100_000, alpha in 0.0f64..0.99, beta in 0.0f64..0.8, eps in 0.0f64..10.0) {
        prop_assume!((p as f64).ln() > 1.0 / (2.0 * (1.0 - beta.sqrt())));
        let t1 = theorem1_bounds(n, p, alpha, beta, eps).unwrap();
        let pp = experiment_params(n, p, alpha, beta, eps).unwrap();
        prop_assert_eq!(pp.gamma0, t1.gamma);
        prop_assert!(t1.prob_lb <= 1.0);
        prop_assert!(exact_recovery_probability(n, p, alpha, beta, t1.k_max_int) <= 1.0);
        let t3 = theorem3_bounds(n, p, alpha, beta, eps, t1.k_max_int).unwrap();
        prop_assert!(t3.prob_lb <= 1.0);
    }

    #[test]
    fn sparsity_limit_monotone(n in 10usize..10_000, p in 10usize..10_000, alpha in 0.01f64..0.99, beta in 0.01f64..0.99) {
        let base = sparsity_limit(n, p, alpha, beta);
        prop_assert!(sparsity_limit(n + 1, p, alpha, beta) > base);
        prop_assert!(sparsity_limit(n, p + 1, alpha, beta) < base);
        prop_assert!(sparsity_limit(n, p, alpha * 1.001, beta) > base);
        prop_assert!(sparsity_limit(n, p, alpha, beta * 1.001) > base);
    }
}
