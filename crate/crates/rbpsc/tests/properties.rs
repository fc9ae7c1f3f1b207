//! Randomized invariant checks.

use proptest::prelude::*;
use rbpsc::harness::fmt_sig;
use rbpsc::instance::{generate_random_instance_with_discount, validate_instance};
use rbpsc::perm::{factorial, Permutation};
use rbpsc::simulate::truncation_horizon;

proptest! {
    #[test]
    fn permutation_rank_round_trips(n in 1usize..=7, seed in any::<usize>()) {
        let rank = seed % factorial(n);
        let p = Permutation::unrank(n, rank);
        prop_assert_eq!(p.rank(), rank);
        prop_assert_eq!(Permutation::unrank(n, p.rank()), p);
    }

    #[test]
    fn permutation_mapping_is_bijective(n in 1usize..=7, seed in any::<usize>()) {
        let p = Permutation::unrank(n, seed % factorial(n));
        let mut seen = vec![false; n];
        for i in 0..n {
            seen[p.site_of(i)] = true;
        }
        prop_assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn generated_instances_validate(
        seed in any::<u64>(),
        n in 1usize..=5,
        k in 1usize..=4,
        cost_scale in 0.0f64..3.0,
        alpha in 0.05f64..0.95,
    ) {
        let m = 1 + seed as usize % n;
        let inst = generate_random_instance_with_discount(
            seed, n, m, k, cost_scale, 1.0, alpha,
        ).unwrap();
        prop_assert!(validate_instance(&inst).ok());
        // Serialization round trip preserves the content hash.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        rbpsc::instance::save_instance(&inst, &path).unwrap();
        let back = rbpsc::instance::load_instance(&path).unwrap();
        prop_assert_eq!(back.content_hash(), inst.content_hash());
    }

    #[test]
    fn truncation_horizon_is_minimal(
        alpha in 0.05f64..0.99,
        r_max in 0.1f64..100.0,
        tol in 1e-9f64..1e-2,
    ) {
        let t = truncation_horizon(alpha, r_max, tol);
        prop_assert!(alpha.powi(t as i32) * r_max < tol);
        if t > 0 {
            prop_assert!(alpha.powi(t as i32 - 1) * r_max >= tol);
        }
    }

    #[test]
    fn fmt_sig_parses_back_within_precision(v in -1e8f64..1e8) {
        let s = fmt_sig(v, 6);
        let back: f64 = s.parse().unwrap();
        let tol = 1e-5 * v.abs().max(1e-4);
        prop_assert!((back - v).abs() <= tol, "{v} -> {s} -> {back}");
    }
}
