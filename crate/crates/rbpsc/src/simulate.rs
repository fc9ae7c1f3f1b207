//! Seeded Monte-Carlo evaluation of policies.
//!
//! Trajectories are truncated at the smallest horizon `T` with
//! `alpha^T * R_max < tol`, so the truncation bias of the discounted sum is
//! at most `alpha^T * R_max / (1 - alpha)`. Each trajectory draws from its
//! own counter-derived random stream, which makes the estimate identical
//! whether trajectories run serially or in parallel.
//!
//! ```
//! use rbpsc::instance::generate_random_instance;
//! use rbpsc::policies::GreedyPolicy;
//! use rbpsc::simulate::{evaluate_policy, SimConfig};
//!
//! let inst = generate_random_instance(4, 3, 1, 2, 1.0, 1.0).unwrap();
//! let cfg = SimConfig::for_instance(&inst, 200, 7);
//! let a = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
//! let b = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
//! // Same seed, same estimate, bit for bit.
//! assert_eq!(a.mean, b.mean);
//! ```

use crate::instance::{immediate_reward, sample_categorical, sample_transition, ProblemInstance};
use crate::policies::Policy;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Monte-Carlo evaluation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_trajectories: usize,
    /// Truncate once `alpha^t * r_max` drops below this.
    pub truncation_tol: f64,
    pub master_seed: u64,
    /// Maximal absolute one-step reward of the instance.
    pub r_max: f64,
}

impl SimConfig {
    pub fn for_instance(inst: &ProblemInstance, n_trajectories: usize, master_seed: u64) -> Self {
        SimConfig {
            n_trajectories,
            truncation_tol: 1e-6,
            master_seed,
            r_max: inst.reward_bound(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter(
                "n_trajectories must be at least 1".into(),
            ));
        }
        if !(self.truncation_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "truncation_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a Monte-Carlo policy evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mean: f64,
    pub std_error: f64,
    pub n_trajectories: usize,
    pub horizon: usize,
    pub confidence_interval_95: (f64, f64),
}

/// Smallest `T` with `alpha^T * r_max < tol`; zero when `r_max <= tol`
/// already holds at `T = 0`.
pub fn truncation_horizon(alpha: f64, r_max: f64, tol: f64) -> usize {
    if !(r_max > tol) {
        return 0;
    }
    // Start from the analytic estimate and fix up against rounding.
    let mut t = ((tol / r_max).ln() / alpha.ln()).floor().max(0.0) as usize;
    while alpha.powi(t as i32) * r_max >= tol {
        t += 1;
    }
    while t > 0 && alpha.powi(t as i32 - 1) * r_max < tol {
        t -= 1;
    }
    t
}

fn sample_initial_state(inst: &ProblemInstance, rng: &mut ChaCha8Rng) -> Vec<usize> {
    inst.sites
        .iter()
        .map(|site| sample_categorical(&site.initial_dist, rng))
        .collect()
}

/// One truncated trajectory: discounted reward of `policy` from the
/// instance's initial distribution, placements following the actions.
pub fn rollout<P: Policy + ?Sized>(
    inst: &ProblemInstance,
    policy: &P,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let alpha = inst.discount;
    let mut x = sample_initial_state(inst, rng);
    let mut s = inst.initial_placement.clone();
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        let a = policy.act(inst, &x, &s, rng)?;
        total += weight * immediate_reward(inst, &x, &s, &a)?;
        x = sample_transition(inst, &x, &a, rng)?;
        s = a;
        weight *= alpha;
    }
    Ok(total)
}

/// SplitMix64 step; derives statistically independent per-trajectory seeds
/// from `(master_seed, counter)`.
fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(counter.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn trajectory_rng(master_seed: u64, trajectory: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, trajectory))
}

/// Monte-Carlo estimate of the policy's expected discounted reward.
/// Deterministic in `cfg.master_seed` regardless of thread count.
pub fn evaluate_policy<P: Policy + ?Sized>(
    inst: &ProblemInstance,
    policy: &P,
    cfg: &SimConfig,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let horizon = truncation_horizon(inst.discount, cfg.r_max, cfg.truncation_tol);
    let rewards: Vec<f64> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(cfg.master_seed, k);
            rollout(inst, policy, horizon, &mut rng)
        })
        .collect::<Result<_>>()?;
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std_error = if rewards.len() > 1 {
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(EvaluationReport {
        mean,
        std_error,
        n_trajectories: rewards.len(),
        horizon,
        confidence_interval_95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use crate::exact::{
        policy_evaluation_exact, weighted_value, JointIndexer, TablePolicy as ExactTable,
    };
    use crate::instance::{generate_random_instance_with_discount, SiteModel};
    use crate::policies::{GreedyPolicy, OslPolicy, Policy};
    use crate::relaxation::solve_relaxation;
    use approx::assert_abs_diff_eq;
    use rand::RngCore;

    fn single_site() -> ProblemInstance {
        ProblemInstance {
            n_servers: 1,
            sites: vec![SiteModel::single_state(1.0, 0.0)],
            switch_cost: vec![vec![0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(1),
        }
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(truncation_horizon(0.5, 100.0, 1e-6), 27);
        assert_eq!(truncation_horizon(0.9, 10.0, 1e-6), 153);
        assert_eq!(truncation_horizon(0.5, 1e-7, 1e-6), 0);
        assert_eq!(truncation_horizon(0.5, 0.0, 1e-6), 0);
    }

    #[test]
    fn horizon_is_minimal() {
        for &(alpha, r_max) in &[(0.3, 7.0), (0.5, 100.0), (0.9, 10.0), (0.95, 2.5)] {
            let t = truncation_horizon(alpha, r_max, 1e-6);
            assert!(alpha.powi(t as i32) * r_max < 1e-6);
            if t > 0 {
                assert!(alpha.powi(t as i32 - 1) * r_max >= 1e-6);
            }
        }
    }

    #[test]
    fn three_step_geometric_rollout() {
        let inst = single_site();
        let mut rng = trajectory_rng(0, 0);
        let v = rollout(&inst, &GreedyPolicy, 3, &mut rng).unwrap();
        assert_abs_diff_eq!(v, 1.75, epsilon = 1e-12);
    }

    #[test]
    fn identical_seed_identical_reward() {
        let inst = generate_random_instance_with_discount(7, 3, 2, 3, 1.0, 1.0, 0.8).unwrap();
        let mut r1 = trajectory_rng(42, 3);
        let mut r2 = trajectory_rng(42, 3);
        let v1 = rollout(&inst, &GreedyPolicy, 50, &mut r1).unwrap();
        let v2 = rollout(&inst, &GreedyPolicy, 50, &mut r2).unwrap();
        assert_eq!(v1, v2);
    }

    /// Deterministic instance: identity chains everywhere, so a single
    /// trajectory is the exact truncated value and the spread is zero.
    fn deterministic_instance() -> ProblemInstance {
        ProblemInstance {
            n_servers: 1,
            sites: vec![
                SiteModel::single_state(2.0, 0.1),
                SiteModel::single_state(5.0, 0.2),
            ],
            switch_cost: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            discount: 0.6,
            initial_placement: Permutation::identity(2),
        }
    }

    #[test]
    fn deterministic_instance_has_zero_spread() {
        let inst = deterministic_instance();
        let cfg = SimConfig::for_instance(&inst, 64, 9);
        let report = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
        // Identical trajectories; only accumulation rounding remains.
        assert!(report.std_error <= 1e-12);
        let mut rng = trajectory_rng(9, 0);
        let single = rollout(&inst, &GreedyPolicy, report.horizon, &mut rng).unwrap();
        assert_abs_diff_eq!(report.mean, single, epsilon = 1e-12);
        assert!(report.confidence_interval_95.0 <= report.mean);
        assert!(report.confidence_interval_95.1 >= report.mean);
    }

    #[test]
    fn deterministic_rollout_matches_exact_evaluation() {
        let inst = deterministic_instance();
        let idx = JointIndexer::new(&inst).unwrap();
        // Table mirror of the greedy policy over the enumerated space.
        let mut actions = vec![0usize; idx.n_joint_states()];
        let mut dummy = trajectory_rng(0, 0);
        for state in 0..idx.n_joint_states() {
            let (x, s) = idx.state_unrank(state);
            let s = s.clone();
            let a = GreedyPolicy.act(&inst, &x, &s, &mut dummy).unwrap();
            actions[state] = a.rank();
        }
        let j_u = policy_evaluation_exact(&inst, &ExactTable { actions }).unwrap();
        let exact_value = weighted_value(&inst, &idx, &j_u);
        let cfg = SimConfig::for_instance(&inst, 4, 1);
        let report = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
        let bias = inst.discount.powi(report.horizon as i32) * cfg.r_max
            / (1.0 - inst.discount);
        assert!((report.mean - exact_value).abs() <= bias + 1e-12);
    }

    #[test]
    fn stochastic_estimate_within_three_sigma_of_exact() {
        let inst = generate_random_instance_with_discount(11, 3, 1, 2, 1.0, 1.0, 0.75).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let policy = OslPolicy { rel: &rel };
        let idx = JointIndexer::new(&inst).unwrap();
        let mut actions = vec![0usize; idx.n_joint_states()];
        let mut dummy = trajectory_rng(0, 0);
        for state in 0..idx.n_joint_states() {
            let (x, s) = idx.state_unrank(state);
            let s = s.clone();
            actions[state] = policy.act(&inst, &x, &s, &mut dummy).unwrap().rank();
        }
        let j_u = policy_evaluation_exact(&inst, &ExactTable { actions }).unwrap();
        let exact_value = weighted_value(&inst, &idx, &j_u);
        let cfg = SimConfig::for_instance(&inst, 10_000, 123);
        let report = evaluate_policy(&inst, &policy, &cfg).unwrap();
        let bias = inst.discount.powi(report.horizon as i32) * cfg.r_max
            / (1.0 - inst.discount);
        assert!(
            (report.mean - exact_value).abs() <= 3.0 * report.std_error + bias,
            "mean {} exact {} se {}",
            report.mean,
            exact_value,
            report.std_error
        );
    }

    #[test]
    fn std_error_shrinks_with_sample_size() {
        let inst = generate_random_instance_with_discount(5, 2, 1, 3, 1.0, 1.0, 0.7).unwrap();
        let small = SimConfig::for_instance(&inst, 2000, 77);
        let large = SimConfig::for_instance(&inst, 4000, 77);
        let se_small = evaluate_policy(&inst, &GreedyPolicy, &small).unwrap().std_error;
        let se_large = evaluate_policy(&inst, &GreedyPolicy, &large).unwrap().std_error;
        let ratio = se_large / se_small;
        let expected = 1.0 / 2.0f64.sqrt();
        assert!(
            (ratio - expected).abs() <= 0.2 * expected,
            "ratio {ratio} expected about {expected}"
        );
    }

    #[test]
    fn evaluation_deterministic_across_runs() {
        let inst = generate_random_instance_with_discount(3, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let cfg = SimConfig::for_instance(&inst, 500, 2024);
        let a = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
        let b = evaluate_policy(&inst, &GreedyPolicy, &cfg).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn rejects_bad_config() {
        let inst = single_site();
        let mut cfg = SimConfig::for_instance(&inst, 0, 0);
        assert!(evaluate_policy(&inst, &GreedyPolicy, &cfg).is_err());
        cfg.n_trajectories = 1;
        cfg.truncation_tol = 0.0;
        assert!(evaluate_policy(&inst, &GreedyPolicy, &cfg).is_err());
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = trajectory_rng(1, 0);
        let mut b = trajectory_rng(1, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
