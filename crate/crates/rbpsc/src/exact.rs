//! Exact treatment of small instances: enumeration of the joint state space,
//! the full state-action-frequency LP, a value-iteration oracle, exact policy
//! evaluation, and projection of the occupation measure onto the first-order
//! marginals.
//!
//! Everything here is guarded: the joint space has `|S| * N!` states and
//! `N!` actions per state, so this path exists only as an oracle for small
//! instances.
//!
//! The LP and value iteration agree on the weighted optimal value:
//!
//! ```
//! use rbpsc::exact::{solve_exact, value_iteration, weighted_value, JointIndexer};
//! use rbpsc::instance::generate_random_instance;
//!
//! let inst = generate_random_instance(1, 2, 1, 2, 1.0, 1.0).unwrap();
//! let sol = solve_exact(&inst).unwrap();
//! let idx = JointIndexer::new(&inst).unwrap();
//! let vi = value_iteration(&inst, 1e-9).unwrap();
//! assert!((sol.optimal_value - weighted_value(&inst, &idx, &vi)).abs() < 1e-5);
//! ```

pub use crate::perm::enumerate_permutations;

use crate::instance::{immediate_reward, ProblemInstance};
use crate::lp::{ConstraintSense, LpModel, LpSolution, LpStatus, Objective, SolveOptions};
use crate::perm::Permutation;
use crate::relaxation::MarginalIndex;
use crate::{Error, Result};

/// Default ceiling on `|S| * (N!)^2`, the variable count of the exact LP.
pub const DEFAULT_EXACT_GUARD: usize = 2_000_000;

/// Bijection between joint states `(x; s)` (and actions) and dense ranks.
///
/// A joint state ranks as `x_rank * N! + s_rank`, with `x` in mixed-radix
/// order (site 0 most significant) and permutations in lexicographic order.
#[derive(Debug, Clone)]
pub struct JointIndexer {
    site_sizes: Vec<usize>,
    n_fact: usize,
    n_site_states: usize,
    perms: Vec<Permutation>,
}

impl JointIndexer {
    pub fn new(inst: &ProblemInstance) -> Result<Self> {
        let site_sizes: Vec<usize> = inst.sites.iter().map(|s| s.state_count()).collect();
        let perms = enumerate_permutations(inst.n_sites())?;
        let n_site_states = site_sizes.iter().product();
        Ok(JointIndexer {
            site_sizes,
            n_fact: perms.len(),
            n_site_states,
            perms,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.site_sizes.len()
    }

    /// `|S| * N!`.
    pub fn n_joint_states(&self) -> usize {
        self.n_site_states * self.n_fact
    }

    /// `N!`.
    pub fn n_actions(&self) -> usize {
        self.n_fact
    }

    pub fn n_site_state_vectors(&self) -> usize {
        self.n_site_states
    }

    pub fn permutations(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn x_rank(&self, x: &[usize]) -> usize {
        let mut rank = 0;
        for (&xi, &size) in x.iter().zip(&self.site_sizes) {
            rank = rank * size + xi;
        }
        rank
    }

    pub fn x_unrank(&self, mut rank: usize) -> Vec<usize> {
        let mut x = vec![0usize; self.site_sizes.len()];
        for i in (0..self.site_sizes.len()).rev() {
            x[i] = rank % self.site_sizes[i];
            rank /= self.site_sizes[i];
        }
        x
    }

    pub fn state_rank(&self, x: &[usize], s: &Permutation) -> usize {
        self.x_rank(x) * self.n_fact + s.rank()
    }

    pub fn state_unrank(&self, rank: usize) -> (Vec<usize>, &Permutation) {
        let x = self.x_unrank(rank / self.n_fact);
        (x, &self.perms[rank % self.n_fact])
    }

    /// Column index of `((x;s), a)` in the exact LP.
    pub fn state_action_rank(&self, state: usize, action: usize) -> usize {
        state * self.n_fact + action
    }
}

/// A stationary deterministic policy over the enumerated joint space:
/// `actions[state_rank]` is the action rank to take.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    pub actions: Vec<usize>,
}

/// Exact solution of the occupation-measure LP.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// Occupation measure per `(state, action)` pair, indexed by
    /// [`JointIndexer::state_action_rank`].
    pub occupation: Vec<f64>,
    /// Reward-to-go per joint state, from the duals of the balance rows.
    pub value_vector: Vec<f64>,
    /// `nu`-weighted optimal expected discounted reward `J*(nu)`.
    pub optimal_value: f64,
    /// Raw LP objective, `(1 - alpha) * optimal_value`.
    pub lp_objective: f64,
}

fn guard_check(inst: &ProblemInstance, max_size: usize) -> Result<JointIndexer> {
    let idx = JointIndexer::new(inst)?;
    let size = idx.n_site_state_vectors() * idx.n_actions() * idx.n_actions();
    if size > max_size {
        return Err(Error::GuardExceeded(format!(
            "|S|*(N!)^2 = {size} exceeds the exact guard {max_size}"
        )));
    }
    Ok(idx)
}

/// Initial distribution `nu(x;s)` over joint states (product form, placement
/// concentrated on `d`).
pub fn initial_distribution(inst: &ProblemInstance, idx: &JointIndexer) -> Vec<f64> {
    let mut nu = vec![0.0; idx.n_joint_states()];
    let d_rank = inst.initial_placement.rank();
    for xr in 0..idx.n_site_state_vectors() {
        let x = idx.x_unrank(xr);
        let p: f64 = x
            .iter()
            .zip(&inst.sites)
            .map(|(&xi, site)| site.initial_dist[xi])
            .product();
        if p != 0.0 {
            nu[xr * idx.n_actions() + d_rank] = p;
        }
    }
    nu
}

/// Successor site-state vectors of `(x, a)` with their probabilities.
/// Only sites that can be reached with positive probability appear.
fn successors(
    inst: &ProblemInstance,
    idx: &JointIndexer,
    x: &[usize],
    a: &Permutation,
) -> Vec<(usize, f64)> {
    let n = inst.n_sites();
    // per-site row under the chosen activity
    let rows: Vec<&[f64]> = (0..n)
        .map(|site| {
            let agent = a.agent_at(site);
            let sm = &inst.sites[site];
            if agent < inst.n_servers {
                sm.active_transition[x[site]].as_slice()
            } else {
                sm.passive_transition[x[site]].as_slice()
            }
        })
        .collect();
    let mut out: Vec<(usize, f64)> = vec![(0, 1.0)];
    for site in 0..n {
        let mut next = Vec::with_capacity(out.len() * rows[site].len());
        for &(rank, prob) in &out {
            for (y, &p) in rows[site].iter().enumerate() {
                if p > 0.0 {
                    next.push((rank * idx.site_sizes[site] + y, prob * p));
                }
            }
        }
        out = next;
    }
    out
}

/// The full state-action-frequency LP: one variable per `((x;s), a)`, one
/// balance equality per `(x;s)` with coefficient structure `delta - alpha P`,
/// right-hand side `(1 - alpha) nu(x;s)`.
pub fn build_exact_primal(inst: &ProblemInstance) -> Result<LpModel> {
    build_exact_primal_guarded(inst, DEFAULT_EXACT_GUARD).map(|(m, _)| m)
}

pub fn build_exact_primal_guarded(
    inst: &ProblemInstance,
    max_size: usize,
) -> Result<(LpModel, JointIndexer)> {
    let idx = guard_check(inst, max_size)?;
    let nu = initial_distribution(inst, &idx);
    let lp = build_exact_primal_with(inst, &idx, &nu)?;
    Ok((lp, idx))
}

/// Same LP with an arbitrary initial distribution on the right-hand side.
fn build_exact_primal_with(
    inst: &ProblemInstance,
    idx: &JointIndexer,
    nu: &[f64],
) -> Result<LpModel> {
    let idx = idx.clone();
    let alpha = inst.discount;
    let n_states = idx.n_joint_states();
    let n_actions = idx.n_actions();
    let mut lp = LpModel::new(Objective::Maximize);

    for state in 0..n_states {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        for (ar, a) in idx.permutations().iter().enumerate() {
            let r = immediate_reward(inst, &x, &s, a)?;
            lp.add_var(
                format!("rho_{state}_{ar}"),
                0.0,
                f64::INFINITY,
                r,
            );
        }
    }

    // Balance rows: sum_{(x';s'),a} rho [delta - alpha P] = (1-alpha) nu.
    // Assembled column-wise: variable ((x';s'),a) contributes +1 to its own
    // state row and -alpha P_{x' a x} to every row (x; a).
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_states];
    for state in 0..n_states {
        let (x, _s) = idx.state_unrank(state);
        for (ar, a) in idx.permutations().iter().enumerate() {
            let col = idx.state_action_rank(state, ar);
            rows[state].push((col, 1.0));
            for (x_next_rank, p) in successors(inst, &idx, &x, a) {
                let row = x_next_rank * n_actions + ar;
                rows[row].push((col, -alpha * p));
            }
        }
    }
    for (state, terms) in rows.into_iter().enumerate() {
        lp.add_constraint(
            format!("bal_{state}"),
            terms,
            ConstraintSense::Eq,
            (1.0 - alpha) * nu[state],
        )?;
    }
    Ok(lp)
}

fn lp_failure(sol: &LpSolution) -> Error {
    Error::Lp(format!(
        "solve failed: status {:?}, residuals {:?}",
        sol.status, sol.residuals
    ))
}

/// Solves the exact LP and polishes the occupation measure.
///
/// The interior-point solve yields the optimal value and duals; the reported
/// occupation measure is then rebuilt as the exact discounted state-action
/// frequency of the recovered optimal policy, which satisfies the balance
/// equalities to machine precision.
pub fn solve_exact(inst: &ProblemInstance) -> Result<ExactSolution> {
    solve_exact_guarded(inst, DEFAULT_EXACT_GUARD)
}

pub fn solve_exact_guarded(inst: &ProblemInstance, max_size: usize) -> Result<ExactSolution> {
    let (lp, idx) = build_exact_primal_guarded(inst, max_size)?;
    let sol = lp.solve_with(&SolveOptions::default())?;
    if sol.status != LpStatus::Optimal {
        return Err(lp_failure(&sol));
    }
    let alpha = inst.discount;
    // The duals of the balance rows equal the optimal values only at states
    // carrying occupation mass; with a concentrated initial distribution the
    // remaining duals are merely feasible (pointwise >= J*). A second solve
    // with a uniform right-hand side puts mass on every state and pins the
    // duals to J* everywhere.
    let value_vector = {
        let uniform = vec![1.0 / idx.n_joint_states() as f64; idx.n_joint_states()];
        let lp_u = build_exact_primal_with(inst, &idx, &uniform)?;
        let sol_u = lp_u.solve_with(&SolveOptions::default())?;
        if sol_u.status != LpStatus::Optimal {
            return Err(lp_failure(&sol_u));
        }
        sol_u.dual
    };
    let mut exact = ExactSolution {
        occupation: sol.primal.clone(),
        value_vector,
        optimal_value: sol.objective / (1.0 - alpha),
        lp_objective: sol.objective,
    };
    // Polish: rebuild the measure from the recovered policy.
    let policy = extract_policy(inst, &exact)?;
    let freq = state_frequencies(inst, &idx, &policy)?;
    let mut polished = vec![0.0; exact.occupation.len()];
    let mut polished_obj = 0.0;
    for state in 0..idx.n_joint_states() {
        let col = idx.state_action_rank(state, policy.actions[state]);
        polished[col] = freq[state];
        let (x, s) = idx.state_unrank(state);
        polished_obj += freq[state]
            * immediate_reward(inst, &x, s, &idx.permutations()[policy.actions[state]])?;
    }
    // Accept the polished measure only if it preserves optimality.
    if (polished_obj - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()) {
        exact.occupation = polished;
        exact.lp_objective = polished_obj;
        exact.optimal_value = polished_obj / (1.0 - alpha);
    }
    Ok(exact)
}

/// Value iteration to sup-norm Bellman residual `tol`.
pub fn value_iteration(inst: &ProblemInstance, tol: f64) -> Result<Vec<f64>> {
    value_iteration_guarded(inst, tol, DEFAULT_EXACT_GUARD)
}

pub fn value_iteration_guarded(
    inst: &ProblemInstance,
    tol: f64,
    max_size: usize,
) -> Result<Vec<f64>> {
    let idx = guard_check(inst, max_size)?;
    let alpha = inst.discount;
    let n_x = idx.n_site_state_vectors();
    let n_a = idx.n_actions();
    // Precompute rewards and successor lists.
    let mut rewards = vec![0.0; idx.n_joint_states() * n_a];
    for state in 0..idx.n_joint_states() {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        for (ar, a) in idx.permutations().iter().enumerate() {
            rewards[state * n_a + ar] = immediate_reward(inst, &x, &s, a)?;
        }
    }
    let mut succ: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_x * n_a);
    for xr in 0..n_x {
        let x = idx.x_unrank(xr);
        for a in idx.permutations() {
            succ.push(successors(inst, &idx, &x, a));
        }
    }
    let mut j = vec![0.0; idx.n_joint_states()];
    let max_iters = 100_000;
    for _ in 0..max_iters {
        // w[xr][ar] = sum_{x'} P_{x a x'} J(x'; a)
        let mut w = vec![0.0; n_x * n_a];
        for xr in 0..n_x {
            for ar in 0..n_a {
                let mut acc = 0.0;
                for &(xn, p) in &succ[xr * n_a + ar] {
                    acc += p * j[xn * n_a + ar];
                }
                w[xr * n_a + ar] = acc;
            }
        }
        let mut j_next = vec![0.0; idx.n_joint_states()];
        let mut residual = 0.0f64;
        for state in 0..idx.n_joint_states() {
            let xr = state / n_a;
            let mut best = f64::NEG_INFINITY;
            for ar in 0..n_a {
                let q = rewards[state * n_a + ar] + alpha * w[xr * n_a + ar];
                if q > best {
                    best = q;
                }
            }
            residual = residual.max((best - j[state]).abs());
            j_next[state] = best;
        }
        j = j_next;
        if residual <= tol {
            return Ok(j);
        }
    }
    Err(Error::Lp(format!(
        "value iteration did not reach tol {tol} in {max_iters} sweeps"
    )))
}

/// Exact policy evaluation: solves `(I - alpha P_u) J_u = R_u` by fixed-point
/// iteration to sup-norm residual `1e-9`.
pub fn policy_evaluation_exact(inst: &ProblemInstance, policy: &TablePolicy) -> Result<Vec<f64>> {
    policy_evaluation_exact_guarded(inst, policy, DEFAULT_EXACT_GUARD)
}

pub fn policy_evaluation_exact_guarded(
    inst: &ProblemInstance,
    policy: &TablePolicy,
    max_size: usize,
) -> Result<Vec<f64>> {
    let idx = guard_check(inst, max_size)?;
    if policy.actions.len() != idx.n_joint_states() {
        return Err(Error::Dimension(format!(
            "policy table covers {} states, joint space has {}",
            policy.actions.len(),
            idx.n_joint_states()
        )));
    }
    let alpha = inst.discount;
    let n_a = idx.n_actions();
    let n_states = idx.n_joint_states();
    let mut r_u = vec![0.0; n_states];
    let mut succ: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_states);
    for state in 0..n_states {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        let ar = policy.actions[state];
        let a = &idx.permutations()[ar];
        r_u[state] = immediate_reward(inst, &x, &s, a)?;
        succ.push(
            successors(inst, &idx, &x, a)
                .into_iter()
                .map(|(xn, p)| (xn * n_a + ar, p))
                .collect(),
        );
    }
    let mut j = r_u.clone();
    let tol = 1e-9;
    for _ in 0..1_000_000 {
        let mut residual = 0.0f64;
        let mut j_next = vec![0.0; n_states];
        for state in 0..n_states {
            let mut acc = 0.0;
            for &(next, p) in &succ[state] {
                acc += p * j[next];
            }
            let v = r_u[state] + alpha * acc;
            residual = residual.max((v - j[state]).abs());
            j_next[state] = v;
        }
        j = j_next;
        if residual <= tol {
            return Ok(j);
        }
    }
    Err(Error::Lp("policy evaluation did not converge".into()))
}

/// Discounted state frequencies `F = (1-alpha) nu' sum_t alpha^t P_u^t`
/// under a table policy, solved to machine precision by fixed point.
pub fn state_frequencies(
    inst: &ProblemInstance,
    idx: &JointIndexer,
    policy: &TablePolicy,
) -> Result<Vec<f64>> {
    let alpha = inst.discount;
    let n_a = idx.n_actions();
    let n_states = idx.n_joint_states();
    let nu = initial_distribution(inst, idx);
    let mut succ: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_states);
    for state in 0..n_states {
        let (x, _s) = idx.state_unrank(state);
        let ar = policy.actions[state];
        let a = &idx.permutations()[ar];
        succ.push(
            successors(inst, idx, &x, a)
                .into_iter()
                .map(|(xn, p)| (xn * n_a + ar, p))
                .collect(),
        );
    }
    let mut f: Vec<f64> = nu.iter().map(|&v| (1.0 - alpha) * v).collect();
    for _ in 0..1_000_000 {
        let mut f_next = vec![0.0; n_states];
        for state in 0..n_states {
            let mass = f[state];
            if mass == 0.0 {
                continue;
            }
            for &(next, p) in &succ[state] {
                f_next[next] += alpha * mass * p;
            }
        }
        let mut residual = 0.0f64;
        for state in 0..n_states {
            f_next[state] += (1.0 - alpha) * nu[state];
            residual = residual.max((f_next[state] - f[state]).abs());
        }
        f = f_next;
        if residual <= 1e-13 {
            return Ok(f);
        }
    }
    Err(Error::Lp("state frequency iteration did not converge".into()))
}

/// Recovers a deterministic optimal policy: in every state, the
/// lexicographically smallest action whose one-step lookahead under the
/// value vector is within `1e-7` of the Bellman maximum.
pub fn extract_policy(inst: &ProblemInstance, sol: &ExactSolution) -> Result<TablePolicy> {
    let idx = JointIndexer::new(inst)?;
    let n_a = idx.n_actions();
    let alpha = inst.discount;
    let mut actions = vec![0usize; idx.n_joint_states()];
    let mut q = vec![0.0; n_a];
    for state in 0..idx.n_joint_states() {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        let mut best = f64::NEG_INFINITY;
        for (ar, a) in idx.permutations().iter().enumerate() {
            let mut v = immediate_reward(inst, &x, &s, a)?;
            for (xn, p) in successors(inst, &idx, &x, a) {
                v += alpha * p * sol.value_vector[xn * n_a + ar];
            }
            q[ar] = v;
            if v > best {
                best = v;
            }
        }
        let tol = 1e-7 * (1.0 + best.abs());
        actions[state] = q.iter().position(|&v| v >= best - tol).unwrap();
    }
    Ok(TablePolicy { actions })
}

/// Projects a full occupation measure onto the first-order marginals,
/// aligned with the relaxation's variable layout.
pub fn marginalize(inst: &ProblemInstance, sol: &ExactSolution) -> Result<Vec<f64>> {
    let idx = JointIndexer::new(inst)?;
    let mindex = MarginalIndex::new(inst);
    let n = inst.n_sites();
    let n_a = idx.n_actions();
    let mut out = vec![0.0; mindex.n_vars()];
    for state in 0..idx.n_joint_states() {
        let (x, s) = idx.state_unrank(state);
        let s = s.clone();
        for (ar, a) in idx.permutations().iter().enumerate() {
            let mass = sol.occupation[state * n_a + ar];
            if mass == 0.0 {
                continue;
            }
            for i in 0..n {
                let from = s.site_of(i);
                let to = a.site_of(i);
                if from == to {
                    out[mindex.canonical(i, from, x[from])] += mass;
                } else {
                    out[mindex.origin(i, from, to, x[from])] += mass;
                    out[mindex.destination(i, from, to, x[to])] += mass;
                }
            }
        }
    }
    Ok(out)
}

/// `nu`-weighted scalar value of a value vector.
pub fn weighted_value(inst: &ProblemInstance, idx: &JointIndexer, values: &[f64]) -> f64 {
    initial_distribution(inst, idx)
        .iter()
        .zip(values)
        .map(|(&p, &v)| p * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_random_instance_with_discount, SiteModel};
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

    /// Two single-state sites, one server: r1 = (1, 3), moving 1->2 costs c12.
    fn move_once_instance(c12: f64) -> ProblemInstance {
        ProblemInstance {
            n_servers: 1,
            sites: vec![
                SiteModel::single_state(1.0, 0.0),
                SiteModel::single_state(3.0, 0.0),
            ],
            switch_cost: vec![vec![0.0, c12], vec![1.0, 0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(2),
        }
    }

    #[test]
    fn exact_lp_shape_two_sites() {
        let inst = generate_random_instance_with_discount(0, 2, 1, 2, 1.0, 1.0, 0.5).unwrap();
        let lp = build_exact_primal(&inst).unwrap();
        assert_eq!(lp.n_vars(), 16); // 8 joint states x 2 actions
        assert_eq!(lp.n_constraints(), 8);
    }

    #[test]
    fn exact_lp_shape_single_site() {
        let inst = single_state_instance();
        let lp = build_exact_primal(&inst).unwrap();
        assert_eq!(lp.n_vars(), 1);
        assert_eq!(lp.n_constraints(), 1);
    }

    #[test]
    fn rhs_sums_to_one_minus_alpha() {
        let inst = generate_random_instance_with_discount(5, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let lp = build_exact_primal(&inst).unwrap();
        let total: f64 = (0..lp.n_constraints())
            .map(|c| lp.constraint_row(c).2)
            .sum();
        assert_abs_diff_eq!(total, 1.0 - 0.8, epsilon = 1e-12);
    }

    #[test]
    fn geometric_series_value() {
        let sol = solve_exact(&single_state_instance()).unwrap();
        assert_abs_diff_eq!(sol.optimal_value, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.lp_objective, 1.0, epsilon = 1e-6);
    }

    // Oracle for the two-site instances: enumerate the four stationary
    // deterministic policies over placements (1,2)/(2,1) and evaluate the
    // induced deterministic reward streams in closed form.
    fn move_once_oracle(c12: f64, alpha: f64) -> f64 {
        // Policies: stay at 1 forever; move to 2 at t=0 then stay;
        // (moving back and forth is dominated for these costs).
        let stay = 1.0 / (1.0 - alpha);
        let move_once = (3.0 - c12) + alpha * 3.0 / (1.0 - alpha);
        stay.max(move_once)
    }

    #[test]
    fn move_once_when_cheap() {
        let inst = move_once_instance(1.0);
        let sol = solve_exact(&inst).unwrap();
        assert_abs_diff_eq!(sol.optimal_value, 5.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.optimal_value, move_once_oracle(1.0, 0.5), epsilon = 1e-5);
    }

    #[test]
    fn never_move_when_expensive() {
        let inst = move_once_instance(10.0);
        let sol = solve_exact(&inst).unwrap();
        assert_abs_diff_eq!(sol.optimal_value, 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.optimal_value, move_once_oracle(10.0, 0.5), epsilon = 1e-5);
    }

    #[test]
    fn occupation_is_probability_measure() {
        let inst = generate_random_instance_with_discount(2, 3, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let sol = solve_exact(&inst).unwrap();
        assert!(sol.occupation.iter().all(|&v| v >= 0.0));
        let total: f64 = sol.occupation.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            sol.lp_objective,
            (1.0 - 0.7) * sol.optimal_value,
            epsilon = 1e-7
        );
    }

    #[test]
    fn value_iteration_single_state() {
        let inst = single_state_instance();
        let j = value_iteration(&inst, 1e-9).unwrap();
        assert_abs_diff_eq!(j[0], 2.0, epsilon = 1e-7);
    }

    #[test]
    fn value_iteration_matches_lp_duals() {
        for seed in 0..5 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
            let sol = solve_exact(&inst).unwrap();
            let j = value_iteration(&inst, 1e-9).unwrap();
            for (a, b) in sol.value_vector.iter().zip(&j) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn myopic_limit_at_zero_discount() {
        // alpha = 0 is allowed only in this oracle: J = max_a R.
        let mut inst = move_once_instance(1.0);
        inst.discount = 0.0;
        let idx = JointIndexer::new(&inst).unwrap();
        let j = value_iteration(&inst, 1e-12).unwrap();
        for state in 0..idx.n_joint_states() {
            let (x, s) = idx.state_unrank(state);
            let s = s.clone();
            let best = idx
                .permutations()
                .iter()
                .map(|a| immediate_reward(&inst, &x, &s, a).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(j[state], best, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_policy_evaluates_to_optimal_value() {
        let inst = generate_random_instance_with_discount(9, 3, 1, 2, 1.0, 1.0, 0.85).unwrap();
        let sol = solve_exact(&inst).unwrap();
        let policy = extract_policy(&inst, &sol).unwrap();
        let j_u = policy_evaluation_exact(&inst, &policy).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        let v = weighted_value(&inst, &idx, &j_u);
        assert_abs_diff_eq!(v, sol.optimal_value, epsilon = 1e-6);
    }

    #[test]
    fn stay_policy_value() {
        // "Always stay" on the move-once instance earns 1 forever: value 2.
        let inst = move_once_instance(1.0);
        let idx = JointIndexer::new(&inst).unwrap();
        let mut actions = vec![0usize; idx.n_joint_states()];
        for state in 0..idx.n_joint_states() {
            let (_x, s) = idx.state_unrank(state);
            actions[state] = s.rank(); // a = s, nobody moves
        }
        let policy = TablePolicy { actions };
        let j_u = policy_evaluation_exact(&inst, &policy).unwrap();
        let v = weighted_value(&inst, &idx, &j_u);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn no_policy_beats_optimal() {
        let inst = generate_random_instance_with_discount(4, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let sol = solve_exact(&inst).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        // A handful of arbitrary stationary policies.
        for shift in 0..idx.n_actions() {
            let actions = vec![shift; idx.n_joint_states()];
            let j_u = policy_evaluation_exact(&inst, &TablePolicy { actions }).unwrap();
            let v = weighted_value(&inst, &idx, &j_u);
            assert!(v <= sol.optimal_value + 1e-6, "policy beat the optimum");
        }
    }

    #[test]
    fn extracted_policy_moves_once() {
        let inst = move_once_instance(1.0);
        let sol = solve_exact(&inst).unwrap();
        let policy = extract_policy(&inst, &sol).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        let swap = Permutation::new(vec![1, 0]).unwrap();
        // From s = (1,2): move to (2,1). From s = (2,1): stay at (2,1).
        let from_id = idx.state_rank(&[0, 0], &Permutation::identity(2));
        let from_swap = idx.state_rank(&[0, 0], &swap);
        assert_eq!(idx.permutations()[policy.actions[from_id]], swap);
        assert_eq!(idx.permutations()[policy.actions[from_swap]], swap);
    }

    #[test]
    fn marginal_totals_per_agent() {
        let inst = generate_random_instance_with_discount(8, 3, 2, 2, 1.0, 1.0, 0.75).unwrap();
        let sol = solve_exact(&inst).unwrap();
        let marg = marginalize(&inst, &sol).unwrap();
        let mindex = MarginalIndex::new(&inst);
        let n = inst.n_sites();
        for i in 0..n {
            // Sum of the origin-anchored family (canonical keys included)
            // must be the total probability 1.
            let mut total = 0.0;
            for s in 0..n {
                for a in 0..n {
                    for x in 0..inst.sites[s].state_count() {
                        total += if s == a {
                            marg[mindex.canonical(i, s, x)]
                        } else {
                            marg[mindex.origin(i, s, a, x)]
                        };
                    }
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn guard_rejects_large_instances() {
        let inst = generate_random_instance_with_discount(0, 3, 1, 2, 1.0, 1.0, 0.5).unwrap();
        assert!(solve_exact_guarded(&inst, 10).is_err());
    }

    #[test]
    fn indexer_roundtrip() {
        let inst = generate_random_instance_with_discount(0, 3, 1, 3, 1.0, 1.0, 0.5).unwrap();
        let idx = JointIndexer::new(&inst).unwrap();
        for state in 0..idx.n_joint_states() {
            let (x, s) = idx.state_unrank(state);
            let s = s.clone();
            assert_eq!(idx.state_rank(&x, &s), state);
        }
    }
}

