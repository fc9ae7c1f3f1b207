//! Benchmark runner: evaluates the relaxation bound and the heuristic
//! policies over instance suites and writes experiment tables as CSV.
//!
//! Eight built-in suites cover the interesting shape regimes
//! `(N, M, |S_i|, c/r)`: small instances where the exact columns can be
//! filled, a deterministic lure family separating the lookahead from the
//! greedy baseline, a zero-switching-cost bandit family, and two large
//! relaxation-only stress shapes.
//!
//! ```
//! use rbpsc::harness::{lure_instance, results_to_csv, run_benchmark, ExperimentConfig};
//!
//! let cfg = ExperimentConfig {
//!     instances: vec![("lure".into(), lure_instance())],
//!     alphas: vec![0.9],
//!     n_trajectories: 16,
//!     master_seed: 0,
//!     truncation_tol: 1e-4,
//!     max_exact_states: 0, // skip the exact columns
//! };
//! let rows = run_benchmark(&cfg).unwrap();
//! let csv = results_to_csv(&rows);
//! assert!(csv.starts_with("problem,N,M,states,c_over_r,alpha,"));
//! ```

use crate::bounds::adp_gap_bound_from;
use crate::exact::solve_exact_guarded;
use crate::instance::{
    generate_random_instance_with_discount, switch_ratio, ProblemInstance, SiteModel,
};
use crate::perm::Permutation;
use crate::policies::{GreedyPolicy, OslPolicy};
use crate::relaxation::solve_relaxation;
use crate::simulate::{evaluate_policy, SimConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One experiment: named instances crossed with discount factors.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// `(problem id, instance)` pairs; each instance's own discount is
    /// overridden by every entry of `alphas`.
    pub instances: Vec<(String, ProblemInstance)>,
    pub alphas: Vec<f64>,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub truncation_tol: f64,
    /// Ceiling on `|S| * (N!)^2` below which the exact columns are filled.
    pub max_exact_states: usize,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::InvalidParameter("no instances configured".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidParameter("no discount factors configured".into()));
        }
        Ok(())
    }
}

/// One line of the results table. `None` fields render as blanks: the
/// exact columns when the guard is exceeded, everything but the identity
/// columns when the row failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub states: usize,
    pub c_over_r: f64,
    pub alpha: f64,
    pub z_star: Option<f64>,
    pub z_r: Option<f64>,
    pub z_g: Option<f64>,
    pub z_g_se: Option<f64>,
    pub z_osl: Option<f64>,
    pub z_osl_se: Option<f64>,
    pub bound_slack: Option<f64>,
    pub t_relax_s: f64,
    pub t_sim_s: f64,
    /// Failure description; not part of the CSV schema.
    pub error: Option<String>,
}

pub const RESULTS_HEADER: &str =
    "problem,N,M,states,c_over_r,alpha,Z_star,Z_r,Z_g,Z_g_se,Z_osl,Z_osl_se,bound_slack,t_relax_s,t_sim_s";

/// Renders `v` with `sig` significant digits, plain notation for moderate
/// magnitudes and scientific otherwise.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 + 3 {
        format!("{:.*e}", sig.saturating_sub(1), v)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, v)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| fmt_sig(x, 6)).unwrap_or_default()
}

fn exact_admissible(inst: &ProblemInstance, max_size: usize) -> bool {
    let n_fact: usize = (1..=inst.n_sites()).product();
    inst.joint_site_state_count()
        .checked_mul(n_fact)
        .and_then(|v| v.checked_mul(n_fact))
        .map(|v| v <= max_size)
        .unwrap_or(false)
}

fn run_row(
    problem: &str,
    base: &ProblemInstance,
    alpha: f64,
    cfg: &ExperimentConfig,
) -> ResultRow {
    let inst = base.with_discount(alpha);
    let mut row = ResultRow {
        problem: problem.to_string(),
        n: inst.n_sites(),
        m: inst.n_servers,
        states: inst.sites.iter().map(|s| s.state_count()).max().unwrap_or(0),
        c_over_r: switch_ratio(&inst).unwrap_or(f64::NAN),
        alpha,
        z_star: None,
        z_r: None,
        z_g: None,
        z_g_se: None,
        z_osl: None,
        z_osl_se: None,
        bound_slack: None,
        t_relax_s: 0.0,
        t_sim_s: 0.0,
        error: None,
    };
    let t0 = Instant::now();
    let rel = match solve_relaxation(&inst) {
        Ok(rel) => rel,
        Err(e) => {
            row.error = Some(format!("relaxation: {e}"));
            return row;
        }
    };
    row.t_relax_s = t0.elapsed().as_secs_f64();
    row.z_r = Some(rel.objective);

    let sim = SimConfig {
        n_trajectories: cfg.n_trajectories,
        truncation_tol: cfg.truncation_tol,
        master_seed: cfg.master_seed,
        r_max: inst.reward_bound(),
    };
    let t1 = Instant::now();
    match evaluate_policy(&inst, &GreedyPolicy, &sim) {
        Ok(rep) => {
            row.z_g = Some(rep.mean);
            row.z_g_se = Some(rep.std_error);
        }
        Err(e) => row.error = Some(format!("greedy simulation: {e}")),
    }
    match evaluate_policy(&inst, &OslPolicy { rel: &rel }, &sim) {
        Ok(rep) => {
            row.z_osl = Some(rep.mean);
            row.z_osl_se = Some(rep.std_error);
        }
        Err(e) => row.error = Some(format!("osl simulation: {e}")),
    }
    row.t_sim_s = t1.elapsed().as_secs_f64();

    if exact_admissible(&inst, cfg.max_exact_states) {
        match solve_exact_guarded(&inst, cfg.max_exact_states) {
            Ok(exact) => {
                row.z_star = Some(exact.optimal_value);
                match adp_gap_bound_from(&inst, &rel, &exact, cfg.max_exact_states) {
                    Ok(report) => row.bound_slack = Some(report.slack),
                    Err(e) => row.error = Some(format!("bound: {e}")),
                }
            }
            Err(e) => row.error = Some(format!("exact solve: {e}")),
        }
    }
    row
}

/// Runs every `(instance, alpha)` cell in configuration order. Failures
/// are recorded in the affected row; the run continues.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.instances.len() * cfg.alphas.len());
    for (problem, inst) in &cfg.instances {
        for &alpha in &cfg.alphas {
            rows.push(run_row(problem, inst, alpha, cfg));
        }
    }
    Ok(rows)
}

pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.problem,
            r.n,
            r.m,
            r.states,
            fmt_sig(r.c_over_r, 6),
            fmt_sig(r.alpha, 6),
            opt(r.z_star),
            opt(r.z_r),
            opt(r.z_g),
            opt(r.z_g_se),
            opt(r.z_osl),
            opt(r.z_osl_se),
            opt(r.bound_slack),
            fmt_sig(r.t_relax_s, 6),
            fmt_sig(r.t_sim_s, 6),
        ));
    }
    out
}

pub fn write_results(rows: &[ResultRow], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, results_to_csv(rows))?;
    Ok(())
}

/// A deterministic site that pays `reward` whenever served, forever.
fn steady_site(n_states: usize, reward: f64) -> SiteModel {
    let identity: Vec<Vec<f64>> = (0..n_states)
        .map(|i| (0..n_states).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    SiteModel {
        active_transition: identity.clone(),
        passive_transition: identity,
        active_reward: vec![reward; n_states],
        passive_reward: vec![0.0; n_states],
        initial_dist: std::iter::once(1.0)
            .chain(std::iter::repeat(0.0))
            .take(n_states)
            .collect(),
    }
}

/// A trap site: a large first-service reward that collapses along the
/// deterministic chain `0 -> 1 -> ... -> K-1` while served, frozen while
/// unserved.
fn lure_site(n_states: usize, rewards: Vec<f64>) -> SiteModel {
    assert_eq!(rewards.len(), n_states);
    let mut advance = vec![vec![0.0; n_states]; n_states];
    for (i, row) in advance.iter_mut().enumerate() {
        row[(i + 1).min(n_states - 1)] = 1.0;
    }
    let identity: Vec<Vec<f64>> = (0..n_states)
        .map(|i| (0..n_states).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    SiteModel {
        active_transition: advance,
        passive_transition: identity,
        active_reward: rewards,
        passive_reward: vec![0.0; n_states],
        initial_dist: std::iter::once(1.0)
            .chain(std::iter::repeat(0.0))
            .take(n_states)
            .collect(),
    }
}

/// Fully deterministic trap construction: two steady sites paying 5 per
/// service, two lure sites opening at 6.2 but collapsing to 0 and costing 8
/// to leave. The greedy rule takes the bait; lookahead should not.
pub fn lure_instance() -> ProblemInstance {
    let k = 5;
    let steep = vec![6.2, 1.0, 0.0, 0.0, 0.0];
    let sites = vec![
        steady_site(k, 5.0),
        steady_site(k, 5.0),
        lure_site(k, steep.clone()),
        lure_site(k, steep),
    ];
    let n = sites.len();
    let mut switch_cost = vec![vec![0.0; n]; n];
    for lure in [2usize, 3] {
        for (a, cell) in switch_cost[lure].iter_mut().enumerate() {
            if a != lure {
                *cell = 8.0;
            }
        }
    }
    ProblemInstance {
        n_servers: 2,
        sites,
        switch_cost,
        discount: 0.9,
        initial_placement: Permutation::identity(n),
    }
}

/// A multi-armed bandit shape: zero switching costs, passive sites frozen.
/// The greedy rule is optimal here when active rewards deteriorate; random
/// chains keep the relaxation non-trivial.
pub fn mabp_instance(seed: u64, n: usize, m: usize, k: usize, alpha: f64) -> Result<ProblemInstance> {
    let mut inst = generate_random_instance_with_discount(seed, n, m, k, 0.0, 1.0, alpha)?;
    // MABP: unserved arms do not change state.
    for site in inst.sites.iter_mut() {
        let ks = site.state_count();
        site.passive_transition = (0..ks)
            .map(|i| (0..ks).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        site.passive_reward = vec![0.0; ks];
    }
    Ok(inst)
}

/// The eight built-in suites, spanning the `(N, M, |S_i|, c/r)` regimes of
/// interest. Suite 4 is the constructed lure family.
pub fn builtin_suites(seed: u64) -> Result<Vec<(String, ProblemInstance)>> {
    let mut suites = Vec::new();
    suites.push(("problem1".to_string(), mabp_instance(seed, 4, 1, 3, 0.9)?));
    suites.push((
        "problem2".to_string(),
        mabp_instance(seed.wrapping_add(1), 4, 1, 3, 0.9)?,
    ));
    suites.push((
        "problem3".to_string(),
        generate_random_instance_with_discount(seed.wrapping_add(2), 4, 1, 3, 0.6, 1.0, 0.9)?,
    ));
    suites.push(("problem4".to_string(), lure_instance()));
    suites.push((
        "problem5".to_string(),
        generate_random_instance_with_discount(seed.wrapping_add(4), 6, 2, 4, 0.0, 1.0, 0.9)?,
    ));
    suites.push((
        "problem6".to_string(),
        generate_random_instance_with_discount(seed.wrapping_add(5), 6, 2, 4, 1.5, 1.0, 0.9)?,
    ));
    suites.push((
        "problem7".to_string(),
        generate_random_instance_with_discount(seed.wrapping_add(6), 20, 15, 3, 1.2, 1.0, 0.9)?,
    ));
    suites.push((
        "problem8".to_string(),
        generate_random_instance_with_discount(seed.wrapping_add(7), 30, 15, 2, 2.2, 1.0, 0.9)?,
    ));
    Ok(suites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_site_config() -> ExperimentConfig {
        let inst = ProblemInstance {
            n_servers: 1,
            sites: vec![SiteModel::single_state(1.0, 0.0)],
            switch_cost: vec![vec![0.0]],
            discount: 0.5,
            initial_placement: Permutation::identity(1),
        };
        ExperimentConfig {
            instances: vec![("single".into(), inst)],
            alphas: vec![0.5],
            n_trajectories: 16,
            master_seed: 7,
            truncation_tol: 1e-6,
            max_exact_states: 1000,
        }
    }

    #[test]
    fn fmt_sig_examples() {
        assert_eq!(fmt_sig(85.2103456, 6), "85.2103");
        assert_eq!(fmt_sig(2614.151, 6), "2614.15");
        assert_eq!(fmt_sig(0.5, 6), "0.500000");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(-3.14159265, 6), "-3.14159");
        assert_eq!(fmt_sig(1.23456789e-7, 6), "1.23457e-7");
        assert_eq!(fmt_sig(1234567890.0, 6), "1.23457e9");
    }

    #[test]
    fn header_has_fifteen_fields() {
        assert_eq!(RESULTS_HEADER.split(',').count(), 15);
    }

    #[test]
    fn empty_rows_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_results(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{RESULTS_HEADER}\n"));
    }

    #[test]
    fn complete_row_has_fifteen_fields_and_blanks() {
        let row = ResultRow {
            problem: "p".into(),
            n: 2,
            m: 1,
            states: 2,
            c_over_r: 0.5,
            alpha: 0.9,
            z_star: None,
            z_r: Some(12.345678),
            z_g: Some(11.0),
            z_g_se: Some(0.1),
            z_osl: Some(12.0),
            z_osl_se: Some(0.1),
            bound_slack: None,
            t_relax_s: 0.01,
            t_sim_s: 0.02,
            error: None,
        };
        let csv = results_to_csv(&[row]);
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 15);
        assert_eq!(fields[6], ""); // Z_star blank
        assert_eq!(fields[12], ""); // bound_slack blank
        assert_eq!(fields[7], "12.3457");
    }

    #[test]
    fn csv_round_trips_through_reader() {
        let cfg = single_site_config();
        let rows = run_benchmark(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_results(&rows, &path).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let records: Vec<csv::StringRecord> =
            reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), rows.len());
        assert_eq!(&records[0][0], "single");
        let z_r: f64 = records[0][7].parse().unwrap();
        assert_abs_diff_eq!(z_r, rows[0].z_r.unwrap(), epsilon = 1e-4);
    }

    #[test]
    fn single_site_suite_all_values_agree() {
        let rows = run_benchmark(&single_site_config()).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.error.is_none(), "{:?}", r.error);
        let z_star = r.z_star.unwrap();
        assert_abs_diff_eq!(z_star, 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.z_r.unwrap(), z_star, epsilon = 1e-5);
        // Deterministic single-action instance: simulation is exact up to
        // truncation.
        assert_abs_diff_eq!(r.z_g.unwrap(), z_star, epsilon = 1e-4);
        assert_abs_diff_eq!(r.z_osl.unwrap(), z_star, epsilon = 1e-4);
        assert!(r.bound_slack.unwrap() >= -1e-6);
    }

    #[test]
    fn rows_deterministic_up_to_wall_time() {
        let cfg = ExperimentConfig {
            instances: vec![(
                "rand".into(),
                generate_random_instance_with_discount(3, 3, 1, 2, 1.0, 1.0, 0.8).unwrap(),
            )],
            alphas: vec![0.6, 0.8],
            n_trajectories: 200,
            master_seed: 99,
            truncation_tol: 1e-6,
            max_exact_states: 100_000,
        };
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.z_star, rb.z_star);
            assert_eq!(ra.z_r, rb.z_r);
            assert_eq!(ra.z_g, rb.z_g);
            assert_eq!(ra.z_g_se, rb.z_g_se);
            assert_eq!(ra.z_osl, rb.z_osl);
            assert_eq!(ra.z_osl_se, rb.z_osl_se);
            assert_eq!(ra.bound_slack, rb.bound_slack);
        }
    }

    #[test]
    fn table_ordering_invariants() {
        let cfg = ExperimentConfig {
            instances: vec![(
                "rand".into(),
                generate_random_instance_with_discount(8, 3, 2, 2, 1.0, 1.0, 0.8).unwrap(),
            )],
            alphas: vec![0.8],
            n_trajectories: 2000,
            master_seed: 5,
            truncation_tol: 1e-6,
            max_exact_states: 100_000,
        };
        let rows = run_benchmark(&cfg).unwrap();
        let r = &rows[0];
        let z_star = r.z_star.unwrap();
        assert!(z_star <= r.z_r.unwrap() + 1e-6);
        assert!(r.z_g.unwrap() <= z_star + 3.0 * r.z_g_se.unwrap() + 1e-6);
        assert!(r.z_osl.unwrap() <= z_star + 3.0 * r.z_osl_se.unwrap() + 1e-6);
    }

    #[test]
    fn lure_suite_separates_lookahead_from_greedy() {
        let inst = lure_instance();
        let cfg = ExperimentConfig {
            instances: vec![("lure".into(), inst)],
            alphas: vec![0.9],
            n_trajectories: 8,
            master_seed: 1,
            truncation_tol: 1e-6,
            max_exact_states: 0, // skip the exact columns here
        };
        let rows = run_benchmark(&cfg).unwrap();
        let r = &rows[0];
        assert!(r.error.is_none(), "{:?}", r.error);
        let gap = r.z_osl.unwrap() - r.z_g.unwrap();
        let combined_se = r.z_g_se.unwrap() + r.z_osl_se.unwrap();
        assert!(
            gap > 3.0 * combined_se && gap > 1.0,
            "osl {} greedy {} se {}",
            r.z_osl.unwrap(),
            r.z_g.unwrap(),
            combined_se
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = single_site_config();
        cfg.instances.clear();
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = single_site_config();
        cfg.alphas.clear();
        assert!(run_benchmark(&cfg).is_err());
    }

    #[test]
    fn builtin_suites_have_expected_shapes() {
        let suites = builtin_suites(0).unwrap();
        assert_eq!(suites.len(), 8);
        let shapes: Vec<(usize, usize, usize)> = suites
            .iter()
            .map(|(_, i)| (i.n_sites(), i.n_servers, i.sites[0].state_count()))
            .collect();
        assert_eq!(
            shapes,
            vec![
                (4, 1, 3),
                (4, 1, 3),
                (4, 1, 3),
                (4, 2, 5),
                (6, 2, 4),
                (6, 2, 4),
                (20, 15, 3),
                (30, 15, 2),
            ]
        );
        for (name, inst) in &suites {
            assert!(
                crate::instance::validate_instance(inst).ok(),
                "suite {name} invalid"
            );
        }
    }
}
