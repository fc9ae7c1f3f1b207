//! RBPSC problem instances: data model, validation, generation, persistence,
//! and the one-step reward/transition model.
//!
//! Conventions: sites and agents are 0-based internally and 1-based in the
//! instance file format. Agents `0..M` are active (they earn active rewards
//! and pay switching costs), agents `M..N` are passive placeholders.
//!
//! ```
//! use rbpsc::instance::{generate_random_instance, switch_ratio, validate_instance};
//!
//! let inst = generate_random_instance(0, 3, 1, 2, 1.0, 1.0).unwrap();
//! assert!(validate_instance(&inst).ok());
//! // Mean switching cost relative to the mean active reward.
//! assert!(switch_ratio(&inst).unwrap() >= 0.0);
//! ```

use crate::perm::Permutation;
use crate::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Tolerance for row-stochasticity and distribution normalization.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// One site: its chain under service and under idleness, rewards, and the
/// initial state distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteModel {
    /// Row-stochastic transition matrix while the site is served.
    pub active_transition: Vec<Vec<f64>>,
    /// Row-stochastic transition matrix while the site is idle.
    pub passive_transition: Vec<Vec<f64>>,
    /// Reward per state when served.
    pub active_reward: Vec<f64>,
    /// Reward per state when idle.
    pub passive_reward: Vec<f64>,
    /// Distribution of the initial state.
    pub initial_dist: Vec<f64>,
}

impl SiteModel {
    pub fn state_count(&self) -> usize {
        self.active_reward.len()
    }

    /// Chain with a single absorbing state and the given rewards.
    pub fn single_state(active_reward: f64, passive_reward: f64) -> Self {
        SiteModel {
            active_transition: vec![vec![1.0]],
            passive_transition: vec![vec![1.0]],
            active_reward: vec![active_reward],
            passive_reward: vec![passive_reward],
            initial_dist: vec![1.0],
        }
    }
}

/// A complete RBPSC description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    /// Number of servers `M`.
    pub n_servers: usize,
    /// The `N` sites.
    pub sites: Vec<SiteModel>,
    /// `switch_cost[k][l]`: cost of moving an active agent from site `k` to
    /// site `l`. May be negative; the diagonal may be nonzero.
    pub switch_cost: Vec<Vec<f64>>,
    /// Discount factor in `(0, 1)`.
    pub discount: f64,
    /// Initial agent placement `d`: agent `i` starts at site `d_i`.
    pub initial_placement: Permutation,
}

impl ProblemInstance {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Same instance with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Self {
        let mut inst = self.clone();
        inst.discount = discount;
        inst
    }

    /// Number of joint site-state vectors `|S| = prod |S_n|`.
    pub fn joint_site_state_count(&self) -> usize {
        self.sites.iter().map(|s| s.state_count()).product()
    }

    /// Upper bound on the absolute one-step reward `|R|`, used for horizon
    /// truncation.
    pub fn reward_bound(&self) -> f64 {
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_r1 = self
            .sites
            .iter()
            .map(|s| max_abs(&s.active_reward))
            .fold(0.0f64, f64::max);
        let max_r0 = self
            .sites
            .iter()
            .map(|s| max_abs(&s.passive_reward))
            .fold(0.0f64, f64::max);
        let max_c = self
            .switch_cost
            .iter()
            .map(|row| max_abs(row))
            .fold(0.0f64, f64::max);
        let n = self.n_sites() as f64;
        let m = self.n_servers as f64;
        m * (max_r1 + max_c) + (n - m) * max_r0
    }

    /// SHA-256 over the canonical JSON encoding; used to pin relaxation
    /// solutions to the instance they were solved on.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("instance serializes");
        let digest = Sha256::digest(&json);
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Outcome of [`validate_instance`]; violations are data, not errors.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_stochastic_rows(report: &mut ValidationReport, what: &str, m: &[Vec<f64>], dim: usize) {
    if m.len() != dim {
        report
            .violations
            .push(format!("{what}: expected {dim} rows, got {}", m.len()));
        return;
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != dim {
            report
                .violations
                .push(format!("{what} row {i}: expected {dim} entries, got {}", row.len()));
            continue;
        }
        if let Some(neg) = row.iter().find(|&&v| v < 0.0) {
            report
                .violations
                .push(format!("{what} row {i}: negative entry {neg}"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            report.violations.push(format!(
                "{what} row {i}: row-stochastic residual {:.3e}",
                (sum - 1.0).abs()
            ));
        }
    }
}

/// Checks every structural invariant of an instance and reports each
/// violation with the offending field and residual.
pub fn validate_instance(inst: &ProblemInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = inst.n_sites();
    if n == 0 {
        report.violations.push("no sites".into());
        return report;
    }
    if inst.n_servers == 0 || inst.n_servers > n {
        report.violations.push(format!(
            "n_servers: need 1 <= M <= N, got M={} N={n}",
            inst.n_servers
        ));
    }
    if !(inst.discount > 0.0 && inst.discount < 1.0) {
        report
            .violations
            .push(format!("discount: need 0 < alpha < 1, got {}", inst.discount));
    }
    for (k, site) in inst.sites.iter().enumerate() {
        let dim = site.state_count();
        if dim == 0 {
            report.violations.push(format!("site {k}: empty state space"));
            continue;
        }
        check_stochastic_rows(&mut report, &format!("site {k} active_transition"), &site.active_transition, dim);
        check_stochastic_rows(&mut report, &format!("site {k} passive_transition"), &site.passive_transition, dim);
        for (name, v) in [
            ("passive_reward", &site.passive_reward),
            ("initial_dist", &site.initial_dist),
        ] {
            if v.len() != dim {
                report
                    .violations
                    .push(format!("site {k} {name}: expected {dim} entries, got {}", v.len()));
            }
        }
        if site.initial_dist.len() == dim {
            if let Some(neg) = site.initial_dist.iter().find(|&&v| v < 0.0) {
                report
                    .violations
                    .push(format!("site {k} initial_dist: negative entry {neg}"));
            }
            let sum: f64 = site.initial_dist.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                report.violations.push(format!(
                    "site {k} initial_dist: normalization residual {:.3e}",
                    (sum - 1.0).abs()
                ));
            }
        }
    }
    if inst.switch_cost.len() != n || inst.switch_cost.iter().any(|r| r.len() != n) {
        report
            .violations
            .push(format!("switch_cost: expected {n}x{n} matrix"));
    } else if inst
        .switch_cost
        .iter()
        .flatten()
        .any(|v| !v.is_finite())
    {
        report.violations.push("switch_cost: non-finite entry".into());
    }
    if inst.initial_placement.len() != n {
        report.violations.push(format!(
            "initial_placement: not a permutation of {n} sites (length {})",
            inst.initial_placement.len()
        ));
    }
    report
}

fn check_state(inst: &ProblemInstance, x: &[usize]) -> Result<()> {
    if x.len() != inst.n_sites() {
        return Err(Error::Dimension(format!(
            "state has {} components, instance has {} sites",
            x.len(),
            inst.n_sites()
        )));
    }
    for (n, (&xn, site)) in x.iter().zip(&inst.sites).enumerate() {
        if xn >= site.state_count() {
            return Err(Error::Dimension(format!(
                "state component {n} = {xn} out of range (|S_{n}| = {})",
                site.state_count()
            )));
        }
    }
    Ok(())
}

fn check_perm(inst: &ProblemInstance, p: &Permutation, what: &str) -> Result<()> {
    if p.len() != inst.n_sites() {
        return Err(Error::Dimension(format!(
            "{what} has {} components, instance has {} sites",
            p.len(),
            inst.n_sites()
        )));
    }
    Ok(())
}

/// One-step reward
/// `R((x;s),a) = sum_{i<=M} (r1_{a_i}(x_{a_i}) - c_{s_i a_i}) + sum_{i>M} r0_{a_i}(x_{a_i})`.
pub fn immediate_reward(
    inst: &ProblemInstance,
    x: &[usize],
    s: &Permutation,
    a: &Permutation,
) -> Result<f64> {
    check_state(inst, x)?;
    check_perm(inst, s, "placement")?;
    check_perm(inst, a, "action")?;
    let mut total = 0.0;
    for i in 0..inst.n_sites() {
        let dest = a.site_of(i);
        let site = &inst.sites[dest];
        if i < inst.n_servers {
            total += site.active_reward[x[dest]] - inst.switch_cost[s.site_of(i)][dest];
        } else {
            total += site.passive_reward[x[dest]];
        }
    }
    Ok(total)
}

/// Joint transition probability
/// `P_{x a x'} = prod_{i<=M} p1_{x_{a_i} x'_{a_i}} * prod_{i>M} p0_{x_{a_i} x'_{a_i}}`.
pub fn joint_transition_prob(
    inst: &ProblemInstance,
    x: &[usize],
    a: &Permutation,
    x_next: &[usize],
) -> Result<f64> {
    check_state(inst, x)?;
    check_state(inst, x_next)?;
    check_perm(inst, a, "action")?;
    let mut prob = 1.0;
    for i in 0..inst.n_sites() {
        let site_idx = a.site_of(i);
        let site = &inst.sites[site_idx];
        let row = if i < inst.n_servers {
            &site.active_transition[x[site_idx]]
        } else {
            &site.passive_transition[x[site_idx]]
        };
        prob *= row[x_next[site_idx]];
    }
    Ok(prob)
}

/// Draws the next joint site state; each site advances independently under
/// its active or passive chain according to the action.
pub fn sample_transition(
    inst: &ProblemInstance,
    x: &[usize],
    a: &Permutation,
    rng: &mut dyn RngCore,
) -> Result<Vec<usize>> {
    check_state(inst, x)?;
    check_perm(inst, a, "action")?;
    let mut next = vec![0usize; inst.n_sites()];
    // Sites sampled in agent order so the draw sequence is deterministic.
    for i in 0..inst.n_sites() {
        let site_idx = a.site_of(i);
        let site = &inst.sites[site_idx];
        let row = if i < inst.n_servers {
            &site.active_transition[x[site_idx]]
        } else {
            &site.passive_transition[x[site_idx]]
        };
        next[site_idx] = sample_categorical(row, rng);
    }
    Ok(next)
}

pub(crate) fn sample_categorical(weights: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (idx, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return idx;
        }
    }
    weights.len() - 1
}

fn random_stochastic_row(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    // Normalized uniform draws; strictly positive so every row is valid.
    let between = Uniform::new(1e-3, 1.0);
    let mut row: Vec<f64> = (0..dim).map(|_| between.sample(rng)).collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

fn random_permutation(rng: &mut impl Rng, n: usize) -> Permutation {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
    Permutation::new(v).expect("shuffled identity is a permutation")
}

/// Seeded random instance: stochastic rows from normalized uniform draws,
/// rewards uniform in `[0, reward_scale]`, costs uniform in `[0, cost_scale]`,
/// deterministic initial site states, random initial placement.
pub fn generate_random_instance(
    seed: u64,
    n_sites: usize,
    n_servers: usize,
    states_per_site: usize,
    cost_scale: f64,
    reward_scale: f64,
) -> Result<ProblemInstance> {
    generate_random_instance_with_discount(
        seed,
        n_sites,
        n_servers,
        states_per_site,
        cost_scale,
        reward_scale,
        0.9,
    )
}

pub fn generate_random_instance_with_discount(
    seed: u64,
    n_sites: usize,
    n_servers: usize,
    states_per_site: usize,
    cost_scale: f64,
    reward_scale: f64,
    discount: f64,
) -> Result<ProblemInstance> {
    if n_sites == 0 || n_servers == 0 || n_servers > n_sites {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= M <= N, got M={n_servers} N={n_sites}"
        )));
    }
    if states_per_site == 0 {
        return Err(Error::InvalidParameter("states_per_site must be positive".into()));
    }
    if cost_scale < 0.0 || reward_scale < 0.0 {
        return Err(Error::InvalidParameter("scales must be nonnegative".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::InvalidParameter(format!("discount must be in (0,1), got {discount}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = states_per_site;
    let sites = (0..n_sites)
        .map(|_| {
            let active_transition = (0..k).map(|_| random_stochastic_row(&mut rng, k)).collect();
            let passive_transition = (0..k).map(|_| random_stochastic_row(&mut rng, k)).collect();
            let active_reward = (0..k).map(|_| rng.gen::<f64>() * reward_scale).collect();
            let passive_reward = (0..k).map(|_| rng.gen::<f64>() * reward_scale * 0.1).collect();
            // Deterministic initial state, as in the benchmark protocol.
            let start = rng.gen_range(0..k);
            let mut initial_dist = vec![0.0; k];
            initial_dist[start] = 1.0;
            SiteModel {
                active_transition,
                passive_transition,
                active_reward,
                passive_reward,
                initial_dist,
            }
        })
        .collect();
    let switch_cost = (0..n_sites)
        .map(|_| (0..n_sites).map(|_| rng.gen::<f64>() * cost_scale).collect())
        .collect();
    let initial_placement = random_permutation(&mut rng, n_sites);
    let inst = ProblemInstance {
        n_servers,
        sites,
        switch_cost,
        discount,
        initial_placement,
    };
    debug_assert!(validate_instance(&inst).ok());
    Ok(inst)
}

/// Mean switching cost divided by mean active reward (the `c/r` column of
/// experiment tables).
pub fn switch_ratio(inst: &ProblemInstance) -> Result<f64> {
    let costs: Vec<f64> = inst.switch_cost.iter().flatten().copied().collect();
    let rewards: Vec<f64> = inst.sites.iter().flat_map(|s| s.active_reward.iter().copied()).collect();
    let mean_c = costs.iter().sum::<f64>() / costs.len() as f64;
    let mean_r = rewards.iter().sum::<f64>() / rewards.len() as f64;
    if mean_r == 0.0 {
        return Err(Error::InvalidParameter("mean active reward is zero".into()));
    }
    Ok(mean_c / mean_r)
}

// ---------------------------------------------------------------------------
// File format: "rbpsc-v1", JSON, 1-based site indices in initial_placement,
// switch_cost in row-major order.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    n_sites: usize,
    n_servers: usize,
    discount: f64,
    /// 1-based: agent `i` starts at site `initial_placement[i]`.
    initial_placement: Vec<usize>,
    /// Row-major `N*N` entries.
    switch_cost: Vec<f64>,
    sites: Vec<SiteModel>,
}

/// Serializes an instance to the `rbpsc-v1` document format.
pub fn instance_to_json(inst: &ProblemInstance) -> Result<String> {
    let n = inst.n_sites();
    let file = InstanceFile {
        format: "rbpsc-v1".into(),
        n_sites: n,
        n_servers: inst.n_servers,
        discount: inst.discount,
        initial_placement: inst.initial_placement.as_slice().iter().map(|&v| v + 1).collect(),
        switch_cost: inst.switch_cost.iter().flatten().copied().collect(),
        sites: inst.sites.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses the `rbpsc-v1` document format.
pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.format != "rbpsc-v1" {
        return Err(Error::InvalidInstance(format!(
            "unsupported format tag {:?}, expected \"rbpsc-v1\"",
            file.format
        )));
    }
    let n = file.n_sites;
    if file.sites.len() != n {
        return Err(Error::InvalidInstance(format!(
            "n_sites={} but {} site blocks present",
            n,
            file.sites.len()
        )));
    }
    if file.switch_cost.len() != n * n {
        return Err(Error::InvalidInstance(format!(
            "switch_cost has {} entries, expected {}",
            file.switch_cost.len(),
            n * n
        )));
    }
    let mapping: Vec<usize> = file
        .initial_placement
        .iter()
        .map(|&v| v.checked_sub(1).ok_or_else(|| {
            Error::InvalidInstance("initial_placement entries are 1-based".into())
        }))
        .collect::<Result<_>>()?;
    let inst = ProblemInstance {
        n_servers: file.n_servers,
        sites: file.sites,
        switch_cost: file.switch_cost.chunks(n).map(|c| c.to_vec()).collect(),
        discount: file.discount,
        initial_placement: Permutation::new(mapping)
            .map_err(|e| Error::InvalidInstance(e.to_string()))?,
    };
    let report = validate_instance(&inst);
    if !report.ok() {
        return Err(Error::InvalidInstance(report.violations.join("; ")));
    }
    Ok(inst)
}

pub fn save_instance(inst: &ProblemInstance, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, instance_to_json(inst)?)?;
    Ok(())
}

pub fn load_instance(path: &std::path::Path) -> Result<ProblemInstance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::enumerate_permutations;
    use approx::assert_abs_diff_eq;

    fn identity_instance() -> ProblemInstance {
        ProblemInstance {
            n_servers: 1,
            sites: vec![SiteModel::single_state(2.0, 0.0)],
            switch_cost: vec![vec![0.5]],
            discount: 0.5,
            initial_placement: Permutation::identity(1),
        }
    }

    /// Two sites, one server, generic 2-state chains.
    fn two_site_instance() -> ProblemInstance {
        let chain = |p: [[f64; 2]; 2]| vec![p[0].to_vec(), p[1].to_vec()];
        ProblemInstance {
            n_servers: 1,
            sites: vec![
                SiteModel {
                    active_transition: chain([[0.7, 0.3], [0.2, 0.8]]),
                    passive_transition: chain([[0.9, 0.1], [0.5, 0.5]]),
                    active_reward: vec![1.0, 2.0],
                    passive_reward: vec![0.0, 0.1],
                    initial_dist: vec![1.0, 0.0],
                },
                SiteModel {
                    active_transition: chain([[0.6, 0.4], [0.1, 0.9]]),
                    passive_transition: chain([[0.4, 0.6], [0.3, 0.7]]),
                    active_reward: vec![3.0, 0.5],
                    passive_reward: vec![0.0, 0.2],
                    initial_dist: vec![0.0, 1.0],
                },
            ],
            switch_cost: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            discount: 0.9,
            initial_placement: Permutation::identity(2),
        }
    }

    #[test]
    fn validates_identity_instance() {
        assert!(validate_instance(&identity_instance()).ok());
    }

    #[test]
    fn reports_row_stochastic_residual() {
        let mut inst = identity_instance();
        inst.sites[0].active_transition = vec![vec![0.9]];
        let report = validate_instance(&inst);
        assert!(!report.ok());
        assert!(report.violations[0].contains("row-stochastic residual"));
        assert!(report.violations[0].contains("1.000e-1"));
    }

    #[test]
    fn reports_bad_placement() {
        // d = (1,1) cannot even be constructed as a Permutation; a mismatched
        // length is the reachable invalid configuration.
        let mut inst = two_site_instance();
        inst.initial_placement = Permutation::identity(1);
        let report = validate_instance(&inst);
        assert!(report.violations.iter().any(|v| v.contains("not a permutation")));
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn immediate_reward_single_site() {
        let inst = identity_instance();
        let p = Permutation::identity(1);
        let r = immediate_reward(&inst, &[0], &p, &p).unwrap();
        assert_abs_diff_eq!(r, 1.5);
    }

    #[test]
    fn immediate_reward_two_sites() {
        // s = (1,2), a = (2,1): active agent moves to site 2 (cost 1), earns 3;
        // site 1 is passive in state 0 with r0 = 0.
        let inst = two_site_instance();
        let s = Permutation::identity(2);
        let a = Permutation::new(vec![1, 0]).unwrap();
        let r = immediate_reward(&inst, &[0, 0], &s, &a).unwrap();
        assert_abs_diff_eq!(r, 2.0);
    }

    #[test]
    fn immediate_reward_all_active_has_no_passive_terms() {
        let mut inst = two_site_instance();
        inst.n_servers = 2;
        // Make passive rewards conspicuous; they must not appear.
        for site in &mut inst.sites {
            site.passive_reward = vec![100.0; site.state_count()];
        }
        let s = Permutation::identity(2);
        for a in enumerate_permutations(2).unwrap() {
            for x in [[0, 0], [0, 1], [1, 0], [1, 1]] {
                let r = immediate_reward(&inst, &x, &s, &a).unwrap();
                assert!(r < 10.0, "passive reward leaked into all-active sum: {r}");
            }
        }
    }

    #[test]
    fn transition_prob_identity_chains() {
        let inst = identity_instance();
        let a = Permutation::identity(1);
        assert_abs_diff_eq!(joint_transition_prob(&inst, &[0], &a, &[0]).unwrap(), 1.0);
    }

    #[test]
    fn transition_prob_product_of_entries() {
        let mut inst = two_site_instance();
        inst.sites[0].active_transition = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
        inst.sites[1].passive_transition = vec![vec![0.4, 0.6], vec![0.3, 0.7]];
        let a = Permutation::identity(2); // agent 1 active at site 1, site 2 passive
        let p = joint_transition_prob(&inst, &[0, 0], &a, &[1, 1]).unwrap();
        assert_abs_diff_eq!(p, 0.3 * 0.6, epsilon = 1e-12);
    }

    #[test]
    fn transition_prob_sums_to_one() {
        let inst = generate_random_instance(3, 3, 2, 3, 1.0, 1.0).unwrap();
        let x = vec![0, 1, 2];
        for a in enumerate_permutations(3).unwrap() {
            let mut total = 0.0;
            for x0 in 0..3 {
                for x1 in 0..3 {
                    for x2 in 0..3 {
                        total += joint_transition_prob(&inst, &x, &a, &[x0, x1, x2]).unwrap();
                    }
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sampling_matches_probabilities() {
        let inst = two_site_instance();
        let a = Permutation::identity(2);
        let x = vec![0, 0];
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let nx = sample_transition(&inst, &x, &a, &mut rng).unwrap();
            *counts.entry(nx).or_insert(0usize) += 1;
        }
        for x0 in 0..2 {
            for x1 in 0..2 {
                let nx = vec![x0, x1];
                let p = joint_transition_prob(&inst, &x, &a, &nx).unwrap();
                let freq = *counts.get(&nx).unwrap_or(&0) as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 3.0 * se + 1e-12,
                    "freq {freq} vs p {p} (3se = {})",
                    3.0 * se
                );
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let inst = two_site_instance();
        let a = Permutation::identity(2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_transition(&inst, &[0, 0], &a, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn identity_chains_sample_to_same_state() {
        let inst = identity_instance();
        let a = Permutation::identity(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(sample_transition(&inst, &[0], &a, &mut rng).unwrap(), vec![0]);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_instance(7, 3, 2, 2, 1.5, 2.0).unwrap();
        let b = generate_random_instance(7, 3, 2, 2, 1.5, 2.0).unwrap();
        assert_eq!(instance_to_json(&a).unwrap(), instance_to_json(&b).unwrap());
    }

    #[test]
    fn generator_zero_cost_scale() {
        let inst = generate_random_instance(1, 3, 1, 2, 0.0, 1.0).unwrap();
        assert!(inst.switch_cost.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn generator_output_validates() {
        for seed in 0..20 {
            let inst = generate_random_instance(seed, 4, 2, 3, 1.0, 1.0).unwrap();
            let report = validate_instance(&inst);
            assert!(report.ok(), "seed {seed}: {:?}", report.violations);
        }
    }

    #[test]
    fn switch_ratio_examples() {
        let mut inst = two_site_instance();
        inst.switch_cost = vec![vec![2.0, 2.0], vec![2.0, 2.0]];
        for site in &mut inst.sites {
            site.active_reward = vec![4.0; 2];
        }
        assert_abs_diff_eq!(switch_ratio(&inst).unwrap(), 0.5);

        inst.switch_cost = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_abs_diff_eq!(switch_ratio(&inst).unwrap(), 0.0);

        let mut single = identity_instance();
        single.switch_cost = vec![vec![3.0]];
        single.sites[0].active_reward = vec![2.0];
        assert_abs_diff_eq!(switch_ratio(&single).unwrap(), 1.5);
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let inst = generate_random_instance(11, 3, 2, 3, 0.7, 1.3).unwrap();
        let json1 = instance_to_json(&inst).unwrap();
        let back = instance_from_json(&json1).unwrap();
        let json2 = instance_to_json(&back).unwrap();
        assert_eq!(json1, json2);
    }

    #[test]
    fn rejects_wrong_format_tag() {
        let inst = identity_instance();
        let json = instance_to_json(&inst).unwrap().replace("rbpsc-v1", "rbpsc-v0");
        assert!(instance_from_json(&json).is_err());
    }

    #[test]
    fn reward_independent_of_passive_ordering() {
        // Permuting which passive agent covers which passive site leaves the
        // reward unchanged.
        let inst = generate_random_instance(5, 4, 2, 2, 1.0, 1.0).unwrap();
        let x = vec![0, 1, 0, 1];
        let s = Permutation::new(vec![2, 0, 1, 3]).unwrap();
        let a1 = Permutation::new(vec![0, 1, 2, 3]).unwrap();
        let a2 = Permutation::new(vec![0, 1, 3, 2]).unwrap();
        let r1 = immediate_reward(&inst, &x, &s, &a1).unwrap();
        let r2 = immediate_reward(&inst, &x, &s, &a2).unwrap();
        assert_abs_diff_eq!(r1, r2, epsilon = 1e-12);
    }
}
