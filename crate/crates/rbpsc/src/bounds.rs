//! Approximate-dynamic-programming auditing on guarded instances: the
//! separable value approximation built from the relaxation duals, its
//! feasibility in the exact dual LP, discounted occupation measures, and
//! the resulting gap bound
//! `nu'(J* - J_u~) <= (1/(1-alpha)) F'(J~ - J*)`
//! for the one-step lookahead policy `u~`.
//!
//! ```
//! use rbpsc::bounds::adp_gap_bound;
//! use rbpsc::instance::generate_random_instance;
//! use rbpsc::relaxation::solve_relaxation;
//!
//! let inst = generate_random_instance(5, 2, 1, 2, 1.0, 1.0).unwrap();
//! let rel = solve_relaxation(&inst).unwrap();
//! let report = adp_gap_bound(&inst, &rel).unwrap();
//! // The separable approximation is dual feasible and the gap bound holds.
//! assert!(report.min_dual_slack >= -1e-7);
//! assert!(report.slack >= -1e-6);
//! ```

use crate::exact::{
    initial_distribution, policy_evaluation_exact_guarded, solve_exact_guarded,
    state_frequencies, JointIndexer, TablePolicy, DEFAULT_EXACT_GUARD,
};
use crate::instance::{immediate_reward, ProblemInstance};
use crate::perm::Permutation;
use crate::relaxation::RelaxationSolution;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Separable approximation of the reward-to-go:
/// `J~(x; s) = sum_i lambda[i][s_i][x_{s_i}]`.
pub fn approx_value(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    x: &[usize],
    s: &Permutation,
) -> Result<f64> {
    rel.check_instance(inst)?;
    let n = inst.n_sites();
    if x.len() != n || s.len() != n {
        return Err(Error::Dimension(format!(
            "state has {} site states and a placement of {}, instance has {n} sites",
            x.len(),
            s.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            let s_i = s.site_of(i);
            rel.lambda[i][s_i][x[s_i]]
        })
        .sum())
}

/// `J~` tabulated over the enumerated joint space.
pub fn approx_value_table(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    idx: &JointIndexer,
) -> Result<Vec<f64>> {
    (0..idx.n_joint_states())
        .map(|state| {
            let (x, s) = idx.state_unrank(state);
            let s = s.clone();
            approx_value(inst, rel, &x, &s)
        })
        .collect()
}

/// Slacks of a value table in the exact dual constraints:
/// `slack(x,s,a) = J(x;s) - alpha sum_{x'} P J(x'; a) - R((x;s),a)`.
/// Nonnegative slack everywhere means `J` is feasible for the exact dual,
/// hence an upper bound on `J*` pointwise.
pub struct DualSlacks {
    /// Indexed by [`JointIndexer::state_action_rank`].
    pub slacks: Vec<f64>,
    pub min_slack: f64,
}

pub fn dual_feasibility_slacks(
    inst: &ProblemInstance,
    values: &[f64],
) -> Result<DualSlacks> {
    dual_feasibility_slacks_guarded(inst, values, DEFAULT_EXACT_GUARD)
}

pub fn dual_feasibility_slacks_guarded(
    inst: &ProblemInstance,
    values: &[f64],
    max_size: usize,
) -> Result<DualSlacks> {
    let idx = guarded_indexer(inst, max_size)?;
    if values.len() != idx.n_joint_states() {
        return Err(Error::Dimension(format!(
            "value table has {} entries, joint space has {}",
            values.len(),
            idx.n_joint_states()
        )));
    }
    let alpha = inst.discount;
    let n_a = idx.n_actions();
    let mut slacks = Vec::with_capacity(idx.n_joint_states() * n_a);
    let mut min_slack = f64::INFINITY;
    for state in 0..idx.n_joint_states() {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        for (ar, a) in idx.permutations().iter().enumerate() {
            let mut expect = 0.0;
            for (xn, p) in successor_states(inst, &idx, &x, a) {
                expect += p * values[xn * n_a + ar];
            }
            let slack = values[state] - alpha * expect - immediate_reward(inst, &x, &s, a)?;
            min_slack = min_slack.min(slack);
            slacks.push(slack);
        }
    }
    Ok(DualSlacks { slacks, min_slack })
}

fn guarded_indexer(inst: &ProblemInstance, max_size: usize) -> Result<JointIndexer> {
    let idx = JointIndexer::new(inst)?;
    let size = idx.n_site_state_vectors() * idx.n_actions() * idx.n_actions();
    if size > max_size {
        return Err(Error::GuardExceeded(format!(
            "|S|*(N!)^2 = {size} exceeds the exact guard {max_size}"
        )));
    }
    Ok(idx)
}

// Per-site product of transition rows; mirrors the exact module's internal
// successor enumeration.
fn successor_states(
    inst: &ProblemInstance,
    idx: &JointIndexer,
    x: &[usize],
    a: &Permutation,
) -> Vec<(usize, f64)> {
    let n = inst.n_sites();
    let mut out: Vec<(usize, f64)> = vec![(0, 1.0)];
    for site in 0..n {
        let agent = a.agent_at(site);
        let sm = &inst.sites[site];
        let row = if agent < inst.n_servers {
            &sm.active_transition[x[site]]
        } else {
            &sm.passive_transition[x[site]]
        };
        let mut next = Vec::with_capacity(out.len() * row.len());
        for &(rank, prob) in &out {
            for (y, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    next.push((rank * sm.state_count() + y, prob * p));
                }
            }
        }
        out = next;
    }
    let _ = idx;
    out
}

/// Discounted state frequencies `F = (1-alpha) nu' sum_t alpha^t P_u^t`
/// of a stationary deterministic policy over the enumerated joint space.
pub fn occupation_measure(inst: &ProblemInstance, policy: &TablePolicy) -> Result<Vec<f64>> {
    occupation_measure_guarded(inst, policy, DEFAULT_EXACT_GUARD)
}

pub fn occupation_measure_guarded(
    inst: &ProblemInstance,
    policy: &TablePolicy,
    max_size: usize,
) -> Result<Vec<f64>> {
    let idx = guarded_indexer(inst, max_size)?;
    state_frequencies(inst, &idx, policy)
}

/// The Theorem-3 audit record for one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// `nu'(J* - J_u~)`: suboptimality of the lookahead policy.
    pub lhs: f64,
    /// `(1/(1-alpha)) F'(J~ - J*)`: the computable bound.
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative up to solver accuracy.
    pub slack: f64,
    /// Worst slack of `J~` in the exact dual constraints (Lemma 1 check).
    pub min_dual_slack: f64,
}

/// Audits the gap bound exactly: solves the instance, tabulates the
/// one-step lookahead policy from `rel`, evaluates it, and compares its
/// suboptimality against the weighted distance from `J~` to `J*`.
pub fn adp_gap_bound(inst: &ProblemInstance, rel: &RelaxationSolution) -> Result<BoundReport> {
    adp_gap_bound_guarded(inst, rel, DEFAULT_EXACT_GUARD)
}

pub fn adp_gap_bound_guarded(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    max_size: usize,
) -> Result<BoundReport> {
    let exact = solve_exact_guarded(inst, max_size)?;
    adp_gap_bound_from(inst, rel, &exact, max_size)
}

/// As [`adp_gap_bound_guarded`], reusing an already computed exact solution.
pub fn adp_gap_bound_from(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    exact: &crate::exact::ExactSolution,
    max_size: usize,
) -> Result<BoundReport> {
    rel.check_instance(inst)?;
    let idx = guarded_indexer(inst, max_size)?;
    let j_star = &exact.value_vector;

    let mut actions = vec![0usize; idx.n_joint_states()];
    for (state, slot) in actions.iter_mut().enumerate() {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        *slot = crate::policies::osl_action(inst, rel, &x, &s)?.rank();
    }
    let policy = TablePolicy { actions };
    let j_u = policy_evaluation_exact_guarded(inst, &policy, max_size)?;
    let freq = state_frequencies(inst, &idx, &policy)?;
    let j_tilde = approx_value_table(inst, rel, &idx)?;

    let nu = initial_distribution(inst, &idx);
    let lhs: f64 = nu
        .iter()
        .zip(j_star.iter().zip(&j_u))
        .map(|(&p, (&js, &ju))| p * (js - ju))
        .sum();
    let rhs: f64 = freq
        .iter()
        .zip(j_tilde.iter().zip(j_star))
        .map(|(&f, (&jt, &js))| f * (jt - js))
        .sum::<f64>()
        / (1.0 - inst.discount);
    let slacks = dual_feasibility_slacks_guarded(inst, &j_tilde, max_size)?;
    Ok(BoundReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        min_dual_slack: slacks.min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_exact;
    use crate::instance::{generate_random_instance_with_discount, SiteModel};
    use crate::relaxation::solve_relaxation;
    use approx::assert_abs_diff_eq;

    fn single_state_instance() -> ProblemInstance {
        ProblemInstance {
            n_servers: 1,
            sites: vec![SiteModel::single_state(1.0, 0.0)],
            switch_cost: vec![vec![0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(1),
        }
    }

    #[test]
    fn single_site_approx_value_is_geometric_sum() {
        let inst = single_state_instance();
        let rel = solve_relaxation(&inst).unwrap();
        let v = approx_value(&inst, &rel, &[0], &Permutation::identity(1)).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn approx_value_sums_per_agent_duals() {
        let inst = generate_random_instance_with_discount(2, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let s = Permutation::new(vec![2, 0, 1]).unwrap();
        let x = vec![1, 0, 1];
        let v = approx_value(&inst, &rel, &x, &s).unwrap();
        let want = rel.lambda[0][2][x[2]] + rel.lambda[1][0][x[0]] + rel.lambda[2][1][x[1]];
        assert_eq!(v, want);
    }

    #[test]
    fn optimal_values_have_nonnegative_slack() {
        let inst = generate_random_instance_with_discount(6, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let exact = solve_exact(&inst).unwrap();
        let slacks = dual_feasibility_slacks(&inst, &exact.value_vector).unwrap();
        // Bellman optimality: every slack nonnegative, zero at the optimal
        // action of each state.
        assert!(slacks.min_slack >= -1e-7, "min slack {}", slacks.min_slack);
        let idx = JointIndexer::new(&inst).unwrap();
        let n_a = idx.n_actions();
        for state in 0..idx.n_joint_states() {
            let best = slacks.slacks[state * n_a..(state + 1) * n_a]
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            assert_abs_diff_eq!(best, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn relaxation_duals_are_dual_feasible() {
        for seed in 0..10 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
            let rel = solve_relaxation(&inst).unwrap();
            let idx = JointIndexer::new(&inst).unwrap();
            let table = approx_value_table(&inst, &rel, &idx).unwrap();
            let slacks = dual_feasibility_slacks(&inst, &table).unwrap();
            assert!(
                slacks.min_slack >= -1e-7,
                "seed {seed}: min slack {}",
                slacks.min_slack
            );
        }
    }

    #[test]
    fn zero_values_report_negative_slack() {
        let inst = generate_random_instance_with_discount(1, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        let zeros = vec![0.0; idx.n_joint_states()];
        let slacks = dual_feasibility_slacks(&inst, &zeros).unwrap();
        assert!(slacks.min_slack < 0.0);
    }

    #[test]
    fn single_joint_state_occupation() {
        let inst = single_state_instance();
        let f = occupation_measure(&inst, &TablePolicy { actions: vec![0] }).unwrap();
        assert_eq!(f.len(), 1);
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_state_cycle_occupation() {
        // One site, two states, deterministic cycle A -> B -> A, start at A:
        // F = (1-a)(1, a, a^2, ...) split by parity = (1/(1+a), a/(1+a)).
        let inst = ProblemInstance {
            n_servers: 1,
            sites: vec![SiteModel {
                active_transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                passive_transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                active_reward: vec![1.0, 0.0],
                passive_reward: vec![0.0, 0.0],
                initial_dist: vec![1.0, 0.0],
            }],
            switch_cost: vec![vec![0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(1),
        };
        let f = occupation_measure(&inst, &TablePolicy { actions: vec![0, 0] }).unwrap();
        assert_abs_diff_eq!(f[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn occupation_is_probability_vector() {
        let inst = generate_random_instance_with_discount(4, 3, 2, 2, 1.0, 1.0, 0.75).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        let policy = TablePolicy {
            actions: vec![0; idx.n_joint_states()],
        };
        let f = occupation_measure(&inst, &policy).unwrap();
        assert!(f.iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(f.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gap_bound_tight_on_single_site() {
        let inst = single_state_instance();
        let rel = solve_relaxation(&inst).unwrap();
        let report = adp_gap_bound(&inst, &rel).unwrap();
        assert_abs_diff_eq!(report.lhs, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(report.rhs, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn gap_bound_holds_on_random_instances() {
        for seed in 0..10 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
            let rel = solve_relaxation(&inst).unwrap();
            let report = adp_gap_bound(&inst, &rel).unwrap();
            assert!(
                report.slack >= -1e-6,
                "seed {seed}: slack {} (lhs {}, rhs {})",
                report.slack,
                report.lhs,
                report.rhs
            );
            assert!(report.lhs >= -1e-6, "seed {seed}: lhs {}", report.lhs);
            assert!(
                report.min_dual_slack >= -1e-7,
                "seed {seed}: dual slack {}",
                report.min_dual_slack
            );
        }
    }

    #[test]
    fn guard_and_hash_checks() {
        let inst = generate_random_instance_with_discount(0, 3, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let other = generate_random_instance_with_discount(1, 3, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        assert!(adp_gap_bound_guarded(&inst, &rel, 10).is_err());
        assert!(adp_gap_bound(&other, &rel).is_err());
    }

    #[test]
    fn passive_relabeling_preserves_approx_value() {
        // Swapping two passive agents in the placement changes which lambda
        // tables are read; with symmetric generation the value can differ,
        // so assert only the documented N=1 and per-agent decompositions
        // elsewhere. Here: swapping agents with identical lambda tables is
        // a no-op.
        let inst = generate_random_instance_with_discount(3, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
        let mut rel = solve_relaxation(&inst).unwrap();
        rel.lambda[2] = rel.lambda[1].clone();
        let x = vec![0, 1, 1];
        let s_a = Permutation::new(vec![0, 1, 2]).unwrap();
        let s_b = Permutation::new(vec![0, 2, 1]).unwrap();
        let va = approx_value(&inst, &rel, &x, &s_a).unwrap();
        let vb = approx_value(&inst, &rel, &x, &s_b).unwrap();
        assert_abs_diff_eq!(va, vb, epsilon = 1e-12);
    }
}
