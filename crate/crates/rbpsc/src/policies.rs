//! Assignment-based heuristic policies: one-step lookahead driven by the
//! relaxation duals, the equivalent primal-dual rule driven by the reduced
//! costs, and the greedy baseline that approximates the reward-to-go by zero.
//!
//! Each policy reduces the action choice in state `(x; s)` to an N x N
//! linear assignment problem over agents and destination sites, solved by
//! the Hungarian method with a lexicographic tie-break so that degenerate
//! optima still yield one well-defined action.
//!
//! The lookahead and primal-dual rules pick the same action in every state:
//!
//! ```
//! use rbpsc::instance::generate_random_instance;
//! use rbpsc::perm::Permutation;
//! use rbpsc::policies::{osl_action, pd_action};
//! use rbpsc::relaxation::solve_relaxation;
//!
//! let inst = generate_random_instance(3, 3, 1, 2, 1.0, 1.0).unwrap();
//! let rel = solve_relaxation(&inst).unwrap();
//! let x = vec![0, 1, 0];
//! let s = Permutation::identity(3);
//! assert_eq!(
//!     osl_action(&inst, &rel, &x, &s).unwrap(),
//!     pd_action(&inst, &rel, &x, &s).unwrap(),
//! );
//! ```

use crate::instance::ProblemInstance;
use crate::perm::Permutation;
use crate::relaxation::RelaxationSolution;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Direction of an assignment problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// `entries[i][a]` scores assigning agent `i` to site `a`.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub entries: Vec<Vec<f64>>,
    pub sense: Sense,
}

impl ScoreMatrix {
    pub fn new(entries: Vec<Vec<f64>>, sense: Sense) -> Result<Self> {
        let n = entries.len();
        for row in &entries {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "score matrix row has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "score matrix entries must be finite".into(),
                ));
            }
        }
        Ok(ScoreMatrix { entries, sense })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }
}

/// Shortest-augmenting-path assignment (minimization): returns the matching
/// `row -> column` and its total cost. O(n^3).
fn jv_min(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    let total = assign
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum::<f64>();
    (assign, total)
}

/// True when every off-matching entry has strictly positive reduced cost
/// under some optimal potentials, which certifies a unique optimum.
fn jv_min_unique(cost: &[Vec<f64>], assign: &[usize], eps: f64) -> bool {
    // Recover feasible potentials from the matching: iterate u[i] =
    // cost[i][assign[i]] - v[assign[i]] and v[j] = min_i (cost[i][j] - u[i]).
    let n = cost.len();
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    for _ in 0..n {
        for i in 0..n {
            u[i] = cost[i][assign[i]] - v[assign[i]];
        }
        for j in 0..n {
            v[j] = (0..n).map(|i| cost[i][j] - u[i]).fold(f64::INFINITY, f64::min);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if j != assign[i] && cost[i][j] - u[i] - v[j] <= eps {
                return false;
            }
        }
    }
    true
}

/// Solves the assignment problem with ties broken to the lexicographically
/// smallest permutation `(a_0, ..., a_{N-1})`.
pub fn hungarian(scores: &ScoreMatrix) -> Result<Permutation> {
    let n = scores.n();
    if n == 0 {
        return Err(Error::Dimension("empty score matrix".into()));
    }
    let cost: Vec<Vec<f64>> = match scores.sense {
        Sense::Minimize => scores.entries.clone(),
        Sense::Maximize => scores
            .entries
            .iter()
            .map(|row| row.iter().map(|&v| -v).collect())
            .collect(),
    };
    let scale = cost
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    // Tie tolerance above the dual noise of the LP backend, so that the
    // one-step lookahead and primal-dual matrices (which differ by a
    // separable constant plus that noise) resolve ties identically.
    let eps = 1e-7 * (1.0 + scale);
    let (assign, best) = jv_min(&cost);
    if jv_min_unique(&cost, &assign, eps) {
        return Permutation::new(assign);
    }
    // Degenerate optimum: fix agents one by one to the smallest column that
    // keeps the total optimal. `BIG` blocks forbidden cells without
    // overflowing the potentials.
    let big = 1e6 * (1.0 + scale);
    let mut work = cost.clone();
    let mut fixed = vec![usize::MAX; n];
    for i in 0..n {
        let mut taken = vec![false; n];
        for &j in fixed.iter().take(i) {
            taken[j] = true;
        }
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let saved = work[i].clone();
            for (k, cell) in work[i].iter_mut().enumerate() {
                if k != j {
                    *cell = big;
                }
            }
            let (_, total) = jv_min(&work);
            if total <= best + eps {
                fixed[i] = j;
                break;
            }
            work[i] = saved;
        }
        if fixed[i] == usize::MAX {
            // All candidates failed within tolerance; fall back to the
            // unrefined optimum for the remaining agents.
            return Permutation::new(assign);
        }
    }
    Permutation::new(fixed)
}

fn check_state(inst: &ProblemInstance, x: &[usize], s: &Permutation) -> Result<()> {
    let n = inst.n_sites();
    if x.len() != n || s.len() != n {
        return Err(Error::Dimension(format!(
            "state has {} site states and a placement of {}, instance has {n} sites",
            x.len(),
            s.len()
        )));
    }
    for (j, (&xj, site)) in x.iter().zip(&inst.sites).enumerate() {
        if xj >= site.state_count() {
            return Err(Error::Dimension(format!(
                "site {j} state {xj} out of range (size {})",
                site.state_count()
            )));
        }
    }
    Ok(())
}

fn active(inst: &ProblemInstance, agent: usize) -> bool {
    agent < inst.n_servers
}

fn immediate_term(inst: &ProblemInstance, i: usize, s_i: usize, a: usize, x_a: usize) -> f64 {
    if active(inst, i) {
        inst.sites[a].active_reward[x_a] - inst.switch_cost[s_i][a]
    } else {
        inst.sites[a].passive_reward[x_a]
    }
}

/// One-step lookahead scores: `m[i][a]` is the immediate term plus the
/// discounted expected `lambda` of site `a`'s next state under agent `i`'s
/// activity.
pub fn osl_scores(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    x: &[usize],
    s: &Permutation,
) -> Result<ScoreMatrix> {
    rel.check_instance(inst)?;
    check_state(inst, x, s)?;
    let n = inst.n_sites();
    let alpha = inst.discount;
    let mut entries = vec![vec![0.0; n]; n];
    for (i, row) in entries.iter_mut().enumerate() {
        let s_i = s.site_of(i);
        for (a, cell) in row.iter_mut().enumerate() {
            let p = if active(inst, i) {
                &inst.sites[a].active_transition
            } else {
                &inst.sites[a].passive_transition
            };
            let lookahead: f64 = rel.lambda[i][a]
                .iter()
                .zip(&p[x[a]])
                .map(|(&lam, &pr)| lam * pr)
                .sum();
            *cell = immediate_term(inst, i, s_i, a, x[a]) + alpha * lookahead;
        }
    }
    ScoreMatrix::new(entries, Sense::Maximize)
}

/// The one-step lookahead action in state `(x; s)`.
pub fn osl_action(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    x: &[usize],
    s: &Permutation,
) -> Result<Permutation> {
    hungarian(&osl_scores(inst, rel, x, s)?)
}

fn pd_term(rel: &RelaxationSolution, x: &[usize], i: usize, s_i: usize, a: usize) -> f64 {
    if s_i == a {
        rel.gamma[rel.index.canonical(i, s_i, x[s_i])]
    } else {
        rel.gamma[rel.index.origin(i, s_i, a, x[s_i])]
            + rel.gamma[rel.index.destination(i, s_i, a, x[a])]
    }
}

/// Undesirability index `I((x;s),a)`: the sum over agents of the stored
/// reduced costs of the marginal variables the action `a` would increase.
pub fn pd_index(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    x: &[usize],
    s: &Permutation,
    a: &Permutation,
) -> Result<f64> {
    rel.check_instance(inst)?;
    check_state(inst, x, s)?;
    if a.len() != inst.n_sites() {
        return Err(Error::Dimension(format!(
            "action has {} components, instance has {} sites",
            a.len(),
            inst.n_sites()
        )));
    }
    Ok((0..inst.n_sites())
        .map(|i| pd_term(rel, x, i, s.site_of(i), a.site_of(i)))
        .sum())
}

/// The primal-dual action: minimizes the undesirability index, computed as
/// an assignment over per-agent reduced-cost sums.
pub fn pd_action(
    inst: &ProblemInstance,
    rel: &RelaxationSolution,
    x: &[usize],
    s: &Permutation,
) -> Result<Permutation> {
    rel.check_instance(inst)?;
    check_state(inst, x, s)?;
    let n = inst.n_sites();
    let mut entries = vec![vec![0.0; n]; n];
    for (i, row) in entries.iter_mut().enumerate() {
        let s_i = s.site_of(i);
        for (a, cell) in row.iter_mut().enumerate() {
            *cell = pd_term(rel, x, i, s_i, a);
        }
    }
    hungarian(&ScoreMatrix::new(entries, Sense::Minimize)?)
}

/// The greedy action: maximizes the immediate reward net of switching
/// costs, i.e. the one-step lookahead with the reward-to-go set to zero.
pub fn greedy_action(inst: &ProblemInstance, x: &[usize], s: &Permutation) -> Result<Permutation> {
    check_state(inst, x, s)?;
    let n = inst.n_sites();
    let mut entries = vec![vec![0.0; n]; n];
    for (i, row) in entries.iter_mut().enumerate() {
        let s_i = s.site_of(i);
        for (a, cell) in row.iter_mut().enumerate() {
            *cell = immediate_term(inst, i, s_i, a, x[a]);
        }
    }
    hungarian(&ScoreMatrix::new(entries, Sense::Maximize)?)
}

/// A stationary decision rule mapping states to actions. Implementations
/// are pure in `(inst, x, s)` except for [`RandomPolicy`], which draws from
/// the provided stream.
pub trait Policy: Sync {
    fn act(
        &self,
        inst: &ProblemInstance,
        x: &[usize],
        s: &Permutation,
        rng: &mut dyn RngCore,
    ) -> Result<Permutation>;

    fn name(&self) -> &'static str;
}

pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn act(
        &self,
        inst: &ProblemInstance,
        x: &[usize],
        s: &Permutation,
        _rng: &mut dyn RngCore,
    ) -> Result<Permutation> {
        greedy_action(inst, x, s)
    }

    fn name(&self) -> &'static str {
        "greedy"
    }
}

/// One-step lookahead policy pinned to one relaxation solution.
pub struct OslPolicy<'a> {
    pub rel: &'a RelaxationSolution,
}

impl Policy for OslPolicy<'_> {
    fn act(
        &self,
        inst: &ProblemInstance,
        x: &[usize],
        s: &Permutation,
        _rng: &mut dyn RngCore,
    ) -> Result<Permutation> {
        osl_action(inst, self.rel, x, s)
    }

    fn name(&self) -> &'static str {
        "osl"
    }
}

/// Primal-dual policy pinned to one relaxation solution.
pub struct PdPolicy<'a> {
    pub rel: &'a RelaxationSolution,
}

impl Policy for PdPolicy<'_> {
    fn act(
        &self,
        inst: &ProblemInstance,
        x: &[usize],
        s: &Permutation,
        _rng: &mut dyn RngCore,
    ) -> Result<Permutation> {
        pd_action(inst, self.rel, x, s)
    }

    fn name(&self) -> &'static str {
        "pd"
    }
}

/// Picks a uniformly random permutation each step.
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(
        &self,
        inst: &ProblemInstance,
        _x: &[usize],
        _s: &Permutation,
        rng: &mut dyn RngCore,
    ) -> Result<Permutation> {
        let mut sites: Vec<usize> = (0..inst.n_sites()).collect();
        sites.shuffle(rng);
        Permutation::new(sites)
    }

    fn name(&self) -> &'static str {
        "random"
    }
}

/// Policy selector used by the benchmark harness and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    OneStepLookahead,
    PrimalDual,
    Greedy,
    Random,
}

impl PolicySpec {
    pub fn needs_relaxation(&self) -> bool {
        matches!(self, PolicySpec::OneStepLookahead | PolicySpec::PrimalDual)
    }
}

impl std::str::FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "osl" | "one_step_lookahead" => Ok(PolicySpec::OneStepLookahead),
            "pd" | "primal_dual" => Ok(PolicySpec::PrimalDual),
            "greedy" => Ok(PolicySpec::Greedy),
            "random" => Ok(PolicySpec::Random),
            other => Err(Error::InvalidParameter(format!(
                "unknown policy '{other}' (expected osl, pd, greedy or random)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_random_instance_with_discount, SiteModel};
    use crate::perm::enumerate_permutations;
    use crate::relaxation::solve_relaxation;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(scores: &ScoreMatrix) -> (Permutation, f64) {
        let n = scores.n();
        let perms = enumerate_permutations(n).unwrap();
        let mut best_perm = perms[0].clone();
        let mut best = f64::NEG_INFINITY;
        for p in &perms {
            let total: f64 = (0..n).map(|i| scores.entries[i][p.site_of(i)]).sum();
            let total = match scores.sense {
                Sense::Maximize => total,
                Sense::Minimize => -total,
            };
            // Strict inequality keeps the lexicographically first optimum.
            if total > best + 1e-12 {
                best = total;
                best_perm = p.clone();
            }
        }
        (best_perm, best)
    }

    #[test]
    fn two_by_two_maximize() {
        let m = ScoreMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]], Sense::Maximize).unwrap();
        let a = hungarian(&m).unwrap();
        assert_eq!(a, Permutation::identity(2));
    }

    #[test]
    fn identity_dominant_matrix() {
        let n = 5;
        let mut entries = vec![vec![1.0; n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = 100.0;
        }
        let a = hungarian(&ScoreMatrix::new(entries, Sense::Maximize).unwrap()).unwrap();
        assert_eq!(a, Permutation::identity(n));
    }

    #[test]
    fn matches_brute_force_both_senses() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..100 {
            let n = 6;
            let entries: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            for sense in [Sense::Maximize, Sense::Minimize] {
                let m = ScoreMatrix::new(entries.clone(), sense).unwrap();
                let got = hungarian(&m).unwrap();
                let (want, _) = brute_force(&m);
                assert_eq!(got, want, "trial {trial} sense {sense:?}");
            }
        }
    }

    #[test]
    fn total_tie_gives_identity() {
        let m = ScoreMatrix::new(vec![vec![3.0; 4]; 4], Sense::Minimize).unwrap();
        assert_eq!(hungarian(&m).unwrap(), Permutation::identity(4));
    }

    #[test]
    fn integer_ties_break_lexicographically() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let n = 5;
            // Small integer entries produce frequent exact ties.
            let entries: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
                .collect();
            for sense in [Sense::Maximize, Sense::Minimize] {
                let m = ScoreMatrix::new(entries.clone(), sense).unwrap();
                let got = hungarian(&m).unwrap();
                let (want, _) = brute_force(&m);
                assert_eq!(got, want, "trial {trial} sense {sense:?}");
            }
        }
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(ScoreMatrix::new(vec![vec![1.0, 2.0]], Sense::Maximize).is_err());
        assert!(ScoreMatrix::new(vec![vec![f64::NAN]], Sense::Maximize).is_err());
    }

    #[test]
    fn zero_lambda_reduces_osl_to_greedy() {
        let inst = generate_random_instance_with_discount(3, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let mut rel = solve_relaxation(&inst).unwrap();
        for lam_i in rel.lambda.iter_mut() {
            for lam_s in lam_i.iter_mut() {
                for v in lam_s.iter_mut() {
                    *v = 0.0;
                }
            }
        }
        let perms = enumerate_permutations(3).unwrap();
        for s in &perms {
            for x0 in 0..2 {
                for x1 in 0..2 {
                    for x2 in 0..2 {
                        let x = vec![x0, x1, x2];
                        let m = osl_scores(&inst, &rel, &x, s).unwrap();
                        assert_eq!(
                            hungarian(&m).unwrap(),
                            greedy_action(&inst, &x, s).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn passive_rows_ignore_placement() {
        let inst = generate_random_instance_with_discount(9, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let x = vec![0, 1, 0];
        let perms = enumerate_permutations(3).unwrap();
        let base = osl_scores(&inst, &rel, &x, &perms[0]).unwrap();
        for s in &perms[1..] {
            let m = osl_scores(&inst, &rel, &x, s).unwrap();
            for i in inst.n_servers..3 {
                // Passive agents pay no switching cost, so their score rows
                // cannot depend on where they currently sit.
                assert_eq!(m.entries[i], base.entries[i], "agent {i}");
            }
        }
    }

    #[test]
    fn pd_index_zero_when_gammas_zero() {
        let inst = generate_random_instance_with_discount(4, 2, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let mut rel = solve_relaxation(&inst).unwrap();
        rel.gamma.iter_mut().for_each(|g| *g = 0.0);
        let perms = enumerate_permutations(2).unwrap();
        for s in &perms {
            for a in &perms {
                let v = pd_index(&inst, &rel, &[0, 1], s, a).unwrap();
                assert_eq!(v, 0.0);
            }
        }
        // Total tie: the primal-dual action is the identity.
        assert_eq!(
            pd_action(&inst, &rel, &[0, 1], &perms[0]).unwrap(),
            Permutation::identity(2)
        );
    }

    #[test]
    fn equivalence_of_lookahead_and_primal_dual() {
        for seed in 0..15 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
            let rel = solve_relaxation(&inst).unwrap();
            let perms = enumerate_permutations(3).unwrap();
            for s in &perms {
                for x0 in 0..2 {
                    for x1 in 0..2 {
                        for x2 in 0..2 {
                            let x = vec![x0, x1, x2];
                            let osl = osl_action(&inst, &rel, &x, s).unwrap();
                            let pd = pd_action(&inst, &rel, &x, s).unwrap();
                            assert_eq!(osl, pd, "seed {seed} state {x:?} placement {s:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn index_plus_score_sum_is_constant_in_action() {
        for seed in 0..10 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 1, 2, 1.0, 1.0, 0.75).unwrap();
            let rel = solve_relaxation(&inst).unwrap();
            let perms = enumerate_permutations(3).unwrap();
            for s in &perms {
                let x = vec![1, 0, 1];
                let m = osl_scores(&inst, &rel, &x, s).unwrap();
                let mut reference = None;
                for a in &perms {
                    let idx = pd_index(&inst, &rel, &x, s, a).unwrap();
                    let score: f64 = (0..3).map(|i| m.entries[i][a.site_of(i)]).sum();
                    let total = idx + score;
                    match reference {
                        None => reference = Some(total),
                        Some(r) => assert_abs_diff_eq!(total, r, epsilon = 1e-6),
                    }
                }
            }
        }
    }

    #[test]
    fn hash_mismatch_rejected() {
        let inst = generate_random_instance_with_discount(1, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let other = generate_random_instance_with_discount(2, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let s = Permutation::identity(2);
        assert!(osl_scores(&other, &rel, &[0, 0], &s).is_err());
        assert!(pd_action(&other, &rel, &[0, 0], &s).is_err());
    }

    #[test]
    fn greedy_moves_to_best_site() {
        let inst = ProblemInstance {
            n_servers: 1,
            sites: vec![
                SiteModel::single_state(1.0, 0.0),
                SiteModel::single_state(3.0, 0.0),
            ],
            switch_cost: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(2),
        };
        let a = greedy_action(&inst, &[0, 0], &Permutation::identity(2)).unwrap();
        // Active agent 0 takes site 1.
        assert_eq!(a.site_of(0), 1);
    }

    #[test]
    fn random_policy_is_seed_deterministic() {
        let inst = generate_random_instance_with_discount(0, 4, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let s = Permutation::identity(4);
        let x = vec![0, 0, 0, 0];
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let a1 = RandomPolicy.act(&inst, &x, &s, &mut r1).unwrap();
        let a2 = RandomPolicy.act(&inst, &x, &s, &mut r2).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn policy_spec_parsing() {
        use std::str::FromStr;
        assert_eq!(
            PolicySpec::from_str("osl").unwrap(),
            PolicySpec::OneStepLookahead
        );
        assert_eq!(PolicySpec::from_str("pd").unwrap(), PolicySpec::PrimalDual);
        assert!(PolicySpec::from_str("optimal").is_err());
        assert!(PolicySpec::Greedy.needs_relaxation() == false);
        assert!(PolicySpec::PrimalDual.needs_relaxation());
    }
}
