//! LP relaxation over first-order marginals of the occupation measure.
//!
//! Instead of the full measure `rho_{(x;s),a}` over joint states and actions,
//! the relaxation keeps, per agent `i`, the frequencies with which `i` moves
//! from site `s` to site `a` while the origin (resp. destination) site is in
//! a given state. Five families of linear constraints tie the marginals
//! together:
//!
//! * `st0` — per-agent flow balance in each (site, site-state);
//! * `compat` — origin- and destination-anchored variables of the same
//!   `(i, s, a)` triple describe the same event;
//! * `st1` — agents leave site `j` in state `x_j` exactly as often as agents
//!   arrive at site `j` in state `x_j`;
//! * `st2` / `st3` — agent `i` avoids destination `a` (resp. origin `s`)
//!   exactly as often as some other agent takes it.
//!
//! The optimal value upper-bounds the optimal reward of the full problem,
//! and the optimal duals and reduced costs drive the heuristic policies.
//!
//! Dual sign conventions follow the constraint rows exactly as written in
//! the family builders below, with the LP layer's `reduced_cost = A'y - c`
//! convention for maximization; each family's dual is documented next to
//! the loop that emits its rows.
//!
//! ```
//! use rbpsc::instance::generate_random_instance;
//! use rbpsc::relaxation::solve_relaxation;
//!
//! let inst = generate_random_instance(2, 3, 2, 2, 1.0, 1.0).unwrap();
//! let rel = solve_relaxation(&inst).unwrap();
//! // One reduced cost per marginal variable: 2 N^3 K - N^2 K of them.
//! assert_eq!(rel.gamma.len(), rel.index.n_vars());
//! assert!(rel.objective.is_finite());
//! ```

use crate::instance::ProblemInstance;
use crate::lp::{ConstraintSense, LpModel, LpStatus, Objective, SolveOptions};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which site-state a marginal variable is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// State of the origin site `s`.
    Origin,
    /// State of the destination site `a`.
    Destination,
}

/// Identifies one marginal variable. Keys with `from_site == to_site` are
/// canonicalized: both anchors name the same variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarginalKey {
    pub agent: usize,
    pub anchor: Anchor,
    /// State of the anchored site.
    pub site_state: usize,
    pub from_site: usize,
    pub to_site: usize,
}

/// Dense column layout for the marginal variables: origin-anchored blocks
/// (`s != a`), then destination-anchored blocks (`s != a`), then the
/// canonical `s == a` blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalIndex {
    n: usize,
    sizes: Vec<usize>,
    origin_off: Vec<usize>,
    dest_off: Vec<usize>,
    canon_off: Vec<usize>,
    n_vars: usize,
}

impl MarginalIndex {
    pub fn new(inst: &ProblemInstance) -> Self {
        Self::from_sizes(inst.sites.iter().map(|s| s.state_count()).collect())
    }

    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let n = sizes.len();
        let unset = usize::MAX;
        let mut origin_off = vec![unset; n * n * n];
        let mut dest_off = vec![unset; n * n * n];
        let mut canon_off = vec![unset; n * n];
        let mut next = 0usize;
        for i in 0..n {
            for s in 0..n {
                for a in 0..n {
                    if s == a {
                        continue;
                    }
                    origin_off[(i * n + s) * n + a] = next;
                    next += sizes[s];
                }
            }
        }
        for i in 0..n {
            for s in 0..n {
                for a in 0..n {
                    if s == a {
                        continue;
                    }
                    dest_off[(i * n + s) * n + a] = next;
                    next += sizes[a];
                }
            }
        }
        for i in 0..n {
            for s in 0..n {
                canon_off[i * n + s] = next;
                next += sizes[s];
            }
        }
        MarginalIndex {
            n,
            sizes,
            origin_off,
            dest_off,
            canon_off,
            n_vars: next,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn site_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Column of the origin-anchored variable; canonical if `s == a`.
    pub fn origin(&self, i: usize, s: usize, a: usize, x_s: usize) -> usize {
        if s == a {
            self.canonical(i, s, x_s)
        } else {
            self.origin_off[(i * self.n + s) * self.n + a] + x_s
        }
    }

    /// Column of the destination-anchored variable; canonical if `s == a`.
    pub fn destination(&self, i: usize, s: usize, a: usize, x_a: usize) -> usize {
        if s == a {
            self.canonical(i, s, x_a)
        } else {
            self.dest_off[(i * self.n + s) * self.n + a] + x_a
        }
    }

    /// Column of the canonical stay variable for `(i, s, x_s)`.
    pub fn canonical(&self, i: usize, s: usize, x_s: usize) -> usize {
        self.canon_off[i * self.n + s] + x_s
    }

    pub fn column(&self, key: &MarginalKey) -> usize {
        match key.anchor {
            Anchor::Origin => self.origin(key.agent, key.from_site, key.to_site, key.site_state),
            Anchor::Destination => {
                self.destination(key.agent, key.from_site, key.to_site, key.site_state)
            }
        }
    }

    /// All keys in column order (canonical columns reported once, with the
    /// origin anchor).
    pub fn keys(&self) -> Vec<MarginalKey> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.n_vars);
        for i in 0..n {
            for s in 0..n {
                for a in 0..n {
                    if s == a {
                        continue;
                    }
                    for x in 0..self.sizes[s] {
                        out.push(MarginalKey {
                            agent: i,
                            anchor: Anchor::Origin,
                            site_state: x,
                            from_site: s,
                            to_site: a,
                        });
                    }
                }
            }
        }
        for i in 0..n {
            for s in 0..n {
                for a in 0..n {
                    if s == a {
                        continue;
                    }
                    for x in 0..self.sizes[a] {
                        out.push(MarginalKey {
                            agent: i,
                            anchor: Anchor::Destination,
                            site_state: x,
                            from_site: s,
                            to_site: a,
                        });
                    }
                }
            }
        }
        for i in 0..n {
            for s in 0..n {
                for x in 0..self.sizes[s] {
                    out.push(MarginalKey {
                        agent: i,
                        anchor: Anchor::Origin,
                        site_state: x,
                        from_site: s,
                        to_site: s,
                    });
                }
            }
        }
        out
    }
}

/// Row ranges of the five constraint families in the relaxation LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRanges {
    pub st0: std::ops::Range<usize>,
    pub compat: std::ops::Range<usize>,
    pub st1: std::ops::Range<usize>,
    pub st2: std::ops::Range<usize>,
    pub st3: std::ops::Range<usize>,
}

/// The relaxation LP together with its variable layout and row ranges.
pub struct RelaxationModel {
    pub lp: LpModel,
    pub index: MarginalIndex,
    pub families: FamilyRanges,
}

fn chain<'a>(inst: &'a ProblemInstance, agent: usize, site: usize) -> &'a [Vec<f64>] {
    if agent < inst.n_servers {
        &inst.sites[site].active_transition
    } else {
        &inst.sites[site].passive_transition
    }
}

fn reward(inst: &ProblemInstance, agent: usize, site: usize, x: usize) -> f64 {
    if agent < inst.n_servers {
        inst.sites[site].active_reward[x]
    } else {
        inst.sites[site].passive_reward[x]
    }
}

fn cost(inst: &ProblemInstance, agent: usize, s: usize, a: usize) -> f64 {
    if agent < inst.n_servers {
        inst.switch_cost[s][a]
    } else {
        0.0
    }
}

/// Builds the relaxation LP. Polynomial size: with equal site sizes `K`
/// there are `2 N^3 K - N^2 K` variables.
pub fn build_relaxation(inst: &ProblemInstance) -> Result<RelaxationModel> {
    let index = MarginalIndex::new(inst);
    let n = inst.n_sites();
    let alpha = inst.discount;
    let sizes = index.site_sizes().to_vec();
    let mut lp = LpModel::new(Objective::Maximize);
    for _ in 0..index.n_vars() {
        lp.add_var("", 0.0, f64::INFINITY, 0.0);
    }
    // Objective: destination-anchored and canonical variables carry the
    // reward/cost of arriving at site a in state x_a.
    for i in 0..n {
        for s in 0..n {
            for a in 0..n {
                for x in 0..sizes[a] {
                    let coeff = reward(inst, i, a, x) - cost(inst, i, s, a);
                    lp.add_obj(index.destination(i, s, a, x), coeff);
                }
            }
        }
    }

    let d = &inst.initial_placement;
    let mut row = 0usize;

    // st0 (duals: lambda^i_{s,x_s}) — per-agent balance at (s, x_s):
    //   sum_a rho^i_{(x_s;s),a}
    //   - alpha sum_{x~, s'} rho^i_{(x~;s'),s} p^{act(i)}_{x~ x_s}
    //   = (1-alpha) nu_s(x_s) [d_i = s]
    let st0_start = row;
    for i in 0..n {
        for s in 0..n {
            let p = chain(inst, i, s);
            for x in 0..sizes[s] {
                let mut terms = Vec::new();
                for a in 0..n {
                    terms.push((index.origin(i, s, a, x), 1.0));
                }
                for s_prev in 0..n {
                    for x_prev in 0..sizes[s] {
                        let coeff = -alpha * p[x_prev][x];
                        if coeff != 0.0 {
                            terms.push((index.destination(i, s_prev, s, x_prev), coeff));
                        }
                    }
                }
                let rhs = if d.site_of(i) == s {
                    (1.0 - alpha) * inst.sites[s].initial_dist[x]
                } else {
                    0.0
                };
                lp.add_constraint(format!("st0_{i}_{s}_{x}"), terms, ConstraintSense::Eq, rhs)?;
                row += 1;
            }
        }
    }
    let st0 = st0_start..row;

    // compat (duals: mu^i_{s,a}, s != a) — both anchors total the same mass:
    //   sum_{x_s} rho^i_{(x_s;s),a} - sum_{x_a} rho^i_{(x_a;s),a} = 0
    let compat_start = row;
    for i in 0..n {
        for s in 0..n {
            for a in 0..n {
                if s == a {
                    continue;
                }
                let mut terms = Vec::new();
                for x in 0..sizes[s] {
                    terms.push((index.origin(i, s, a, x), 1.0));
                }
                for x in 0..sizes[a] {
                    terms.push((index.destination(i, s, a, x), -1.0));
                }
                lp.add_constraint(format!("compat_{i}_{s}_{a}"), terms, ConstraintSense::Eq, 0.0)?;
                row += 1;
            }
        }
    }
    let compat = compat_start..row;

    // st1 (duals: kappa_{j,x_j}) — departures from (j, x_j) equal arrivals:
    //   sum_{i,a} rho^i_{(x_j;j),a} - sum_{i,s} rho^i_{(x_j;s),j} = 0
    // The canonical s = a = j variable appears on both sides and cancels.
    let st1_start = row;
    for j in 0..n {
        for x in 0..sizes[j] {
            let mut terms = Vec::new();
            for i in 0..n {
                for a in 0..n {
                    terms.push((index.origin(i, j, a, x), 1.0));
                }
                for s in 0..n {
                    terms.push((index.destination(i, s, j, x), -1.0));
                }
            }
            lp.add_constraint(format!("st1_{j}_{x}"), terms, ConstraintSense::Eq, 0.0)?;
            row += 1;
        }
    }
    let st1 = st1_start..row;

    // st2 (duals: zeta^i_a) — agent i avoids destination a~ exactly as often
    // as some other agent takes it:
    //   sum_{s, x_s, a != a~} rho^i_{(x_s;s),a}
    //   - sum_{k != i} sum_{s, x_s} rho^k_{(x_s;s),a~} = 0
    let st2_start = row;
    for i in 0..n {
        for a_t in 0..n {
            let mut terms = Vec::new();
            for s in 0..n {
                for x in 0..sizes[s] {
                    for a in 0..n {
                        if a != a_t {
                            terms.push((index.origin(i, s, a, x), 1.0));
                        }
                    }
                    for k in 0..n {
                        if k != i {
                            terms.push((index.origin(k, s, a_t, x), -1.0));
                        }
                    }
                }
            }
            lp.add_constraint(format!("st2_{i}_{a_t}"), terms, ConstraintSense::Eq, 0.0)?;
            row += 1;
        }
    }
    let st2 = st2_start..row;

    // st3 (duals: xi^i_s) — agent i stays away from origin s~ exactly as
    // often as some other agent leaves it:
    //   sum_{a, x_a, s != s~} rho^i_{(x_a;s),a}
    //   - sum_{k != i} sum_{a, x_a} rho^k_{(x_a;s~),a} = 0
    let st3_start = row;
    for i in 0..n {
        for s_t in 0..n {
            let mut terms = Vec::new();
            for a in 0..n {
                for x in 0..sizes[a] {
                    for s in 0..n {
                        if s != s_t {
                            terms.push((index.destination(i, s, a, x), 1.0));
                        }
                    }
                    for k in 0..n {
                        if k != i {
                            terms.push((index.destination(k, s_t, a, x), -1.0));
                        }
                    }
                }
            }
            lp.add_constraint(format!("st3_{i}_{s_t}"), terms, ConstraintSense::Eq, 0.0)?;
            row += 1;
        }
    }
    let st3 = st3_start..row;

    Ok(RelaxationModel {
        lp,
        index,
        families: FamilyRanges {
            st0,
            compat,
            st1,
            st2,
            st3,
        },
    })
}

/// Optimal marginals, duals, reduced costs and objective of the relaxation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationSolution {
    /// `Z_r` on the value scale (LP objective divided by `1 - alpha`).
    pub objective: f64,
    pub lp_objective: f64,
    /// Optimal marginals per column of [`MarginalIndex`].
    pub rho: Vec<f64>,
    /// Reduced cost per column.
    pub gamma: Vec<f64>,
    /// `lambda[i][s][x_s]`: duals of st0; the separable reward-to-go terms.
    pub lambda: Vec<Vec<Vec<f64>>>,
    /// `mu[i][s][a]`: duals of compat (zero on the diagonal).
    pub mu: Vec<Vec<Vec<f64>>>,
    /// `kappa[j][x_j]`: duals of st1.
    pub kappa: Vec<Vec<f64>>,
    /// `zeta[i][a]`: duals of st2.
    pub zeta: Vec<Vec<f64>>,
    /// `xi[i][s]`: duals of st3.
    pub xi: Vec<Vec<f64>>,
    /// Hash of the instance the relaxation was solved on.
    pub instance_hash: String,
    pub index: MarginalIndex,
    pub discount: f64,
}

impl RelaxationSolution {
    pub fn check_instance(&self, inst: &ProblemInstance) -> Result<()> {
        if self.instance_hash != inst.content_hash() {
            return Err(Error::HashMismatch);
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Solves the relaxation and maps duals to their families.
pub fn solve_relaxation(inst: &ProblemInstance) -> Result<RelaxationSolution> {
    let model = build_relaxation(inst)?;
    let sol = model.lp.solve_with(&SolveOptions::default())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!(
            "relaxation solve failed: status {:?}, residuals {:?}",
            sol.status, sol.residuals
        )));
    }
    let n = inst.n_sites();
    let sizes = model.index.site_sizes().to_vec();
    let fam = &model.families;
    let mut lambda = vec![Vec::new(); n];
    let mut row = fam.st0.start;
    for (i, lam_i) in lambda.iter_mut().enumerate() {
        let _ = i;
        for s in 0..n {
            let mut per_site = Vec::with_capacity(sizes[s]);
            for _x in 0..sizes[s] {
                per_site.push(sol.dual[row]);
                row += 1;
            }
            lam_i.push(per_site);
        }
    }
    let mut mu = vec![vec![vec![0.0; n]; n]; n];
    let mut row = fam.compat.start;
    for (i, mu_i) in mu.iter_mut().enumerate() {
        let _ = i;
        for s in 0..n {
            for a in 0..n {
                if s == a {
                    continue;
                }
                mu_i[s][a] = sol.dual[row];
                row += 1;
            }
        }
    }
    let mut kappa = Vec::with_capacity(n);
    let mut row = fam.st1.start;
    for j in 0..n {
        let mut per_site = Vec::with_capacity(sizes[j]);
        for _x in 0..sizes[j] {
            per_site.push(sol.dual[row]);
            row += 1;
        }
        kappa.push(per_site);
    }
    let mut zeta = vec![vec![0.0; n]; n];
    let mut row = fam.st2.start;
    for zeta_i in zeta.iter_mut() {
        for za in zeta_i.iter_mut() {
            *za = sol.dual[row];
            row += 1;
        }
    }
    let mut xi = vec![vec![0.0; n]; n];
    let mut row = fam.st3.start;
    for xi_i in xi.iter_mut() {
        for xs in xi_i.iter_mut() {
            *xs = sol.dual[row];
            row += 1;
        }
    }
    Ok(RelaxationSolution {
        objective: sol.objective / (1.0 - inst.discount),
        lp_objective: sol.objective,
        rho: sol.primal,
        gamma: sol.reduced_cost,
        lambda,
        mu,
        kappa,
        zeta,
        xi,
        instance_hash: inst.content_hash(),
        index: model.index,
        discount: inst.discount,
    })
}

/// Recomputes the reduced cost of one marginal variable from the stored
/// duals via the closed-form dual constraints; matches the solver-reported
/// reduced cost within the dual residual.
pub fn reduced_cost_recompute(
    inst: &ProblemInstance,
    sol: &RelaxationSolution,
    key: &MarginalKey,
) -> Result<f64> {
    sol.check_instance(inst)?;
    let n = inst.n_sites();
    let i = key.agent;
    let s = key.from_site;
    let a = key.to_site;
    let x = key.site_state;
    if i >= n || s >= n || a >= n {
        return Err(Error::Dimension(format!("key out of range: {key:?}")));
    }
    let alpha = inst.discount;
    if s == a {
        // Combined stay constraint:
        //   lambda^i_{s,x} - alpha sum_x~ p_{x x~} lambda^i_{s,x~}
        //   - sum_{i' != i} (zeta^{i'}_s + xi^{i'}_s)
        //   + sum_{s' != s} (zeta^i_{s'} + xi^i_{s'})
        //   >= r^{act(i)}_s(x) - c_{ss} [i active]
        if x >= inst.sites[s].state_count() {
            return Err(Error::Dimension(format!("key out of range: {key:?}")));
        }
        let p = chain(inst, i, s);
        let mut lhs = sol.lambda[i][s][x];
        for (x_next, lam) in sol.lambda[i][s].iter().enumerate() {
            lhs -= alpha * p[x][x_next] * lam;
        }
        for k in 0..n {
            if k != i {
                lhs -= sol.zeta[k][s] + sol.xi[k][s];
            }
        }
        for site in 0..n {
            if site != s {
                lhs += sol.zeta[i][site] + sol.xi[i][site];
            }
        }
        return Ok(lhs - (reward(inst, i, s, x) - cost(inst, i, s, s)));
    }
    match key.anchor {
        Anchor::Origin => {
            // lambda^i_{s,x} + mu^i_{s,a} + kappa_{s,x}
            //   - sum_{i' != i} zeta^{i'}_a + sum_{a' != a} zeta^i_{a'} >= 0
            if x >= inst.sites[s].state_count() {
                return Err(Error::Dimension(format!("key out of range: {key:?}")));
            }
            let mut lhs = sol.lambda[i][s][x] + sol.mu[i][s][a] + sol.kappa[s][x];
            for k in 0..n {
                if k != i {
                    lhs -= sol.zeta[k][a];
                }
            }
            for a_other in 0..n {
                if a_other != a {
                    lhs += sol.zeta[i][a_other];
                }
            }
            Ok(lhs)
        }
        Anchor::Destination => {
            // -alpha sum_x~ p_{x x~} lambda^i_{a,x~} - mu^i_{s,a} - kappa_{a,x}
            //   - sum_{i' != i} xi^{i'}_s + sum_{s' != s} xi^i_{s'}
            //   >= r^{act(i)}_a(x) - c_{sa} [i active]
            if x >= inst.sites[a].state_count() {
                return Err(Error::Dimension(format!("key out of range: {key:?}")));
            }
            let p = chain(inst, i, a);
            let mut lhs = -sol.mu[i][s][a] - sol.kappa[a][x];
            for (x_next, lam) in sol.lambda[i][a].iter().enumerate() {
                lhs -= alpha * p[x][x_next] * lam;
            }
            for k in 0..n {
                if k != i {
                    lhs -= sol.xi[k][s];
                }
            }
            for s_other in 0..n {
                if s_other != s {
                    lhs += sol.xi[i][s_other];
                }
            }
            Ok(lhs - (reward(inst, i, a, x) - cost(inst, i, s, a)))
        }
    }
}

/// Max absolute residual per constraint family for a marginal vector.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub st0: f64,
    pub compat: f64,
    pub st1: f64,
    pub st2: f64,
    pub st3: f64,
    pub nonnegativity: f64,
}

impl FeasibilityReport {
    pub fn max_residual(&self) -> f64 {
        self.st0
            .max(self.compat)
            .max(self.st1)
            .max(self.st2)
            .max(self.st3)
            .max(self.nonnegativity)
    }
}

/// Evaluates every relaxation constraint at the given marginal vector and
/// reports the worst residual per family.
pub fn verify_marginal_feasibility(
    inst: &ProblemInstance,
    marginals: &[f64],
) -> Result<FeasibilityReport> {
    let model = build_relaxation(inst)?;
    if marginals.len() != model.index.n_vars() {
        return Err(Error::Dimension(format!(
            "marginal vector has {} entries, layout expects {}",
            marginals.len(),
            model.index.n_vars()
        )));
    }
    let mut report = FeasibilityReport {
        nonnegativity: marginals.iter().fold(0.0f64, |m, &v| m.max(-v)),
        ..Default::default()
    };
    let fam = &model.families;
    for row in 0..model.lp.n_constraints() {
        let (terms, _sense, rhs) = model.lp.constraint_row(row);
        let lhs: f64 = terms.iter().map(|&(v, c)| c * marginals[v]).sum();
        let res = (lhs - rhs).abs();
        let slot = if fam.st0.contains(&row) {
            &mut report.st0
        } else if fam.compat.contains(&row) {
            &mut report.compat
        } else if fam.st1.contains(&row) {
            &mut report.st1
        } else if fam.st2.contains(&row) {
            &mut report.st2
        } else {
            &mut report.st3
        };
        *slot = slot.max(res);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{marginalize, solve_exact};
    use crate::instance::{generate_random_instance_with_discount, SiteModel};
    use crate::perm::Permutation;
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

    // Counting oracle: enumerate distinct marginal keys directly.
    fn count_keys(n: usize, k: usize) -> usize {
        let mut count = 0;
        for _i in 0..n {
            for s in 0..n {
                for a in 0..n {
                    if s == a {
                        count += k; // canonical block, one per state
                    } else {
                        count += 2 * k; // origin + destination
                    }
                }
            }
        }
        count
    }

    #[test]
    fn variable_count_n4_k3() {
        let inst = generate_random_instance_with_discount(0, 4, 2, 3, 1.0, 1.0, 0.9).unwrap();
        let model = build_relaxation(&inst).unwrap();
        assert_eq!(model.lp.n_vars(), 336);
        assert_eq!(model.lp.n_vars(), count_keys(4, 3));
        assert_eq!(model.index.keys().len(), 336);
    }

    #[test]
    fn st1_count_n3_k2() {
        let inst = generate_random_instance_with_discount(0, 3, 1, 2, 1.0, 1.0, 0.9).unwrap();
        let model = build_relaxation(&inst).unwrap();
        assert_eq!(model.families.st1.len(), 6);
    }

    #[test]
    fn n1_relaxation_matches_exact_model() {
        let inst = single_state_instance();
        let model = build_relaxation(&inst).unwrap();
        // After canonicalization there is a single variable, as in the
        // exact LP for N = 1.
        assert_eq!(model.lp.n_vars(), 1);
        let rel = solve_relaxation(&inst).unwrap();
        assert_abs_diff_eq!(rel.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn upper_bounds_exact_value() {
        for seed in 0..20 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
            let exact = solve_exact(&inst).unwrap();
            let rel = solve_relaxation(&inst).unwrap();
            assert!(
                rel.objective >= exact.optimal_value - 1e-6,
                "seed {seed}: Z_r = {} < Z* = {}",
                rel.objective,
                exact.optimal_value
            );
        }
    }

    #[test]
    fn exact_marginals_are_feasible() {
        for seed in 0..10 {
            let inst =
                generate_random_instance_with_discount(seed, 3, 2, 2, 1.0, 1.0, 0.75).unwrap();
            let exact = solve_exact(&inst).unwrap();
            let marg = marginalize(&inst, &exact).unwrap();
            let report = verify_marginal_feasibility(&inst, &marg).unwrap();
            assert!(
                report.max_residual() <= 1e-8,
                "seed {seed}: residual {:?}",
                report
            );
        }
    }

    #[test]
    fn relaxation_solution_is_feasible() {
        let inst = generate_random_instance_with_discount(3, 3, 2, 3, 1.0, 1.0, 0.85).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let report = verify_marginal_feasibility(&inst, &rel.rho).unwrap();
        assert!(report.max_residual() <= 1e-7, "residual {report:?}");
    }

    #[test]
    fn all_zero_marginals_leave_st0_residual() {
        let inst = generate_random_instance_with_discount(1, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let zeros = vec![0.0; MarginalIndex::new(&inst).n_vars()];
        let report = verify_marginal_feasibility(&inst, &zeros).unwrap();
        // st0 right-hand sides are (1-alpha) nu; everything else is 0 = 0.
        assert_abs_diff_eq!(report.st0, (1.0 - 0.6) * 1.0, epsilon = 1e-12);
        assert_eq!(report.compat, 0.0);
        assert_eq!(report.st1, 0.0);
        assert_eq!(report.st2, 0.0);
        assert_eq!(report.st3, 0.0);
    }

    #[test]
    fn complementary_slackness_holds() {
        let inst = generate_random_instance_with_discount(6, 3, 1, 2, 1.0, 1.0, 0.8).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        for (col, (&r, &g)) in rel.rho.iter().zip(&rel.gamma).enumerate() {
            assert!(
                (r * g).abs() <= 1e-7,
                "column {col}: rho {r} gamma {g} product {}",
                r * g
            );
            assert!(r >= -1e-9);
            assert!(g >= -1e-7);
        }
    }

    #[test]
    fn recomputed_reduced_costs_match_solver() {
        let inst = generate_random_instance_with_discount(12, 3, 2, 2, 1.0, 1.0, 0.8).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let mut worst = 0.0f64;
        for key in rel.index.keys() {
            let col = rel.index.column(&key);
            let recomputed = reduced_cost_recompute(&inst, &rel, &key).unwrap();
            worst = worst.max((recomputed - rel.gamma[col]).abs());
        }
        assert!(worst <= 1e-6, "max |recomputed - reported| = {worst}");
    }

    #[test]
    fn reduced_cost_near_zero_on_support() {
        let inst = generate_random_instance_with_discount(2, 3, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        for key in rel.index.keys() {
            let col = rel.index.column(&key);
            if rel.rho[col] > 1e-6 {
                let g = reduced_cost_recompute(&inst, &rel, &key).unwrap();
                assert!(g.abs() <= 1e-5, "gamma {g} on supported column {col}");
            }
        }
    }

    #[test]
    fn single_state_all_reduced_costs_zero() {
        let inst = single_state_instance();
        let rel = solve_relaxation(&inst).unwrap();
        for key in rel.index.keys() {
            let g = reduced_cost_recompute(&inst, &rel, &key).unwrap();
            assert_abs_diff_eq!(g, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn hash_mismatch_detected() {
        let inst = generate_random_instance_with_discount(1, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let other = generate_random_instance_with_discount(2, 2, 1, 2, 1.0, 1.0, 0.6).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        assert!(rel.check_instance(&other).is_err());
        assert!(rel.check_instance(&inst).is_ok());
    }

    #[test]
    fn persistence_roundtrip() {
        let inst = generate_random_instance_with_discount(4, 2, 1, 2, 1.0, 1.0, 0.7).unwrap();
        let rel = solve_relaxation(&inst).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.json");
        rel.save(&path).unwrap();
        let back = RelaxationSolution::load(&path).unwrap();
        assert_eq!(back.instance_hash, rel.instance_hash);
        assert_eq!(back.rho, rel.rho);
        assert_eq!(back.lambda, rel.lambda);
        back.check_instance(&inst).unwrap();
    }
}
