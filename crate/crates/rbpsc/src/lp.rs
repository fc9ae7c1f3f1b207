//! Minimal generic linear-programming layer.
//!
//! Builds sparse LPs and solves them, returning primal values, constraint
//! duals, and per-variable reduced costs together with residual certificates.
//! The backend is the Clarabel interior-point solver; it is deterministic for
//! a fixed model, so duals and reduced costs are reproducible run to run.
//!
//! Dual sign convention, fixed crate-wide:
//!
//! * maximize: `reduced_cost = A' y - c`, nonnegative at optimum for
//!   variables resting on their lower bound;
//! * minimize: `reduced_cost = c - A' y`, likewise nonnegative.
//!
//! With that convention the dual of an equality row is the classic shadow
//! price (`objective = b' y` for problems with zero lower bounds), and
//! complementary slackness reads `primal * reduced_cost = 0` per variable.

use crate::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
struct VarDef {
    name: String,
    lb: f64,
    ub: f64,
    obj: f64,
}

#[derive(Debug, Clone)]
struct ConDef {
    name: String,
    terms: Vec<(usize, f64)>,
    sense: ConstraintSense,
    rhs: f64,
}

/// A sparse LP under construction.
#[derive(Debug, Clone)]
pub struct LpModel {
    sense: Objective,
    vars: Vec<VarDef>,
    cons: Vec<ConDef>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The solver stopped without a clean certificate; residuals are attached
    /// to the solution for inspection.
    Numerical,
}

/// Residual certificates for a solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    /// Max violation of structural rows and bounds by the primal point.
    pub primal_infeasibility: f64,
    /// Max violation of reduced-cost sign conditions.
    pub dual_infeasibility: f64,
    /// `|primal objective - dual objective|`.
    pub duality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One dual per constraint, in declaration order.
    pub dual: Vec<f64>,
    /// One reduced cost per variable, in declaration order.
    pub reduced_cost: Vec<f64>,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Feasibility and gap tolerance passed to the backend.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl LpModel {
    pub fn new(sense: Objective) -> Self {
        LpModel {
            sense,
            vars: Vec::new(),
            cons: Vec::new(),
        }
    }

    pub fn sense(&self) -> Objective {
        self.sense
    }

    /// Adds a variable with bounds (`f64::INFINITY` / `NEG_INFINITY` allowed)
    /// and objective coefficient; returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> usize {
        self.vars.push(VarDef {
            name: name.into(),
            lb,
            ub,
            obj,
        });
        self.vars.len() - 1
    }

    pub fn add_obj(&mut self, var: usize, coeff: f64) {
        self.vars[var].obj += coeff;
    }

    pub fn objective_coeff(&self, var: usize) -> f64 {
        self.vars[var].obj
    }

    /// Adds a constraint row; coefficients for the same variable accumulate.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: ConstraintSense,
        rhs: f64,
    ) -> Result<usize> {
        let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for (var, coeff) in terms {
            if var >= self.vars.len() {
                return Err(Error::Lp(format!(
                    "constraint references undeclared variable {var}"
                )));
            }
            *merged.entry(var).or_insert(0.0) += coeff;
        }
        self.cons.push(ConDef {
            name: name.into(),
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            sense,
            rhs,
        });
        Ok(self.cons.len() - 1)
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn constraint_row(&self, idx: usize) -> (&[(usize, f64)], ConstraintSense, f64) {
        let c = &self.cons[idx];
        (&c.terms, c.sense, c.rhs)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(&SolveOptions::default())
    }

    pub fn solve_with(&self, opts: &SolveOptions) -> Result<LpSolution> {
        // Internally always maximize; minimization is solved on the negated
        // objective and mapped back.
        let flip = match self.sense {
            Objective::Maximize => 1.0,
            Objective::Minimize => -1.0,
        };
        let n = self.vars.len();
        if n == 0 {
            return Err(Error::Lp("model has no variables".into()));
        }

        // Rows for Clarabel: equalities first (zero cone), then all
        // inequalities rewritten as `a x <= b` (nonnegative cone), then
        // finite bounds as inequality rows.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut row = 0usize;
        // (constraint index, sign applied when mapping the dual back)
        let mut con_rows: Vec<(usize, usize, f64)> = Vec::new();

        for (ci, con) in self.cons.iter().enumerate() {
            if con.sense == ConstraintSense::Eq {
                for &(v, c) in &con.terms {
                    triplets.push((row, v, c));
                }
                b.push(con.rhs);
                con_rows.push((ci, row, 1.0));
                row += 1;
            }
        }
        let n_eq = row;
        for (ci, con) in self.cons.iter().enumerate() {
            let sign = match con.sense {
                ConstraintSense::Eq => continue,
                ConstraintSense::Le => 1.0,
                ConstraintSense::Ge => -1.0,
            };
            for &(v, c) in &con.terms {
                triplets.push((row, v, sign * c));
            }
            b.push(sign * con.rhs);
            con_rows.push((ci, row, sign));
            row += 1;
        }
        let mut lb_rows: Vec<(usize, usize)> = Vec::new();
        let mut ub_rows: Vec<(usize, usize)> = Vec::new();
        for (v, var) in self.vars.iter().enumerate() {
            if var.lb.is_finite() {
                triplets.push((row, v, -1.0));
                b.push(-var.lb);
                lb_rows.push((v, row));
                row += 1;
            }
            if var.ub.is_finite() {
                triplets.push((row, v, 1.0));
                b.push(var.ub);
                ub_rows.push((v, row));
                row += 1;
            }
        }
        let m = row;
        let a = csc_from_triplets(m, n, &mut triplets);
        let q: Vec<f64> = self.vars.iter().map(|v| -flip * v.obj).collect();
        let p = CscMatrix::<f64>::zeros((n, n));
        let cones = [
            SupportedConeT::ZeroConeT(n_eq),
            SupportedConeT::NonnegativeConeT(m - n_eq),
        ];
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(opts.tol)
            .tol_gap_rel(opts.tol)
            .tol_feas(opts.tol)
            .max_iter(opts.max_iter)
            .build()
            .map_err(|e| Error::Lp(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
        solver.solve();
        let sol = &solver.solution;

        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => LpStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                LpStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                LpStatus::Unbounded
            }
            _ => LpStatus::Numerical,
        };
        if status != LpStatus::Optimal {
            return Ok(LpSolution {
                status,
                objective: 0.0,
                primal: vec![0.0; n],
                dual: vec![0.0; self.cons.len()],
                reduced_cost: vec![0.0; n],
                residuals: Residuals::default(),
            });
        }

        let x = sol.x.clone();
        // Internal-max duals: y = z on eq rows, sign-adjusted on converted
        // inequality rows.
        let mut dual_max = vec![0.0; self.cons.len()];
        for &(ci, r, sign) in &con_rows {
            dual_max[ci] = sign * sol.z[r];
        }
        // Reduced costs (max sense) are the bound-row duals.
        let mut rc_max = vec![0.0; n];
        for &(v, r) in &lb_rows {
            rc_max[v] += sol.z[r];
        }
        for &(v, r) in &ub_rows {
            rc_max[v] -= sol.z[r];
        }

        let objective = self.vars.iter().zip(&x).map(|(v, xi)| v.obj * xi).sum::<f64>();
        let dual: Vec<f64> = dual_max.iter().map(|&y| flip * y).collect();
        let reduced_cost = rc_max; // same value in both sense conventions

        let residuals = self.residuals(&x, &dual, &reduced_cost, -flip * sol.obj_val_dual);
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective,
            primal: x,
            dual,
            reduced_cost,
            residuals,
        })
    }

    fn residuals(&self, x: &[f64], dual: &[f64], rc: &[f64], dual_obj: f64) -> Residuals {
        let mut primal = 0.0f64;
        for con in &self.cons {
            let lhs: f64 = con.terms.iter().map(|&(v, c)| c * x[v]).sum();
            let viol = match con.sense {
                ConstraintSense::Eq => (lhs - con.rhs).abs(),
                ConstraintSense::Le => (lhs - con.rhs).max(0.0),
                ConstraintSense::Ge => (con.rhs - lhs).max(0.0),
            };
            primal = primal.max(viol);
        }
        let mut dual_infeas = 0.0f64;
        for (v, var) in self.vars.iter().enumerate() {
            primal = primal.max(var.lb - x[v]).max(x[v] - var.ub);
            // Sign conditions: rc >= 0 when only a lower bound exists,
            // rc <= 0 when only an upper bound exists, free otherwise.
            if var.lb.is_finite() && !var.ub.is_finite() {
                dual_infeas = dual_infeas.max(-rc[v]);
            } else if var.ub.is_finite() && !var.lb.is_finite() {
                dual_infeas = dual_infeas.max(rc[v]);
            } else if !var.lb.is_finite() && !var.ub.is_finite() {
                dual_infeas = dual_infeas.max(rc[v].abs());
            }
            let _ = dual;
        }
        let objective: f64 = self.vars.iter().zip(x).map(|(v, xi)| v.obj * xi).sum();
        Residuals {
            primal_infeasibility: primal,
            dual_infeasibility: dual_infeas,
            duality_gap: (objective - dual_obj).abs(),
        }
    }

    /// Free-format MPS export for cross-checking with external tools.
    pub fn to_mps(&self) -> String {
        let mut out = String::new();
        out.push_str("NAME          RBPSC_LP\n");
        out.push_str("OBJSENSE\n");
        out.push_str(match self.sense {
            Objective::Maximize => "    MAX\n",
            Objective::Minimize => "    MIN\n",
        });
        out.push_str("ROWS\n N  COST\n");
        for con in &self.cons {
            let tag = match con.sense {
                ConstraintSense::Eq => 'E',
                ConstraintSense::Le => 'L',
                ConstraintSense::Ge => 'G',
            };
            out.push_str(&format!(" {tag}  {}\n", con.name));
        }
        out.push_str("COLUMNS\n");
        for (v, var) in self.vars.iter().enumerate() {
            if var.obj != 0.0 {
                out.push_str(&format!("    {}  COST  {:.17e}\n", var.name, var.obj));
            }
            for con in &self.cons {
                for &(cv, coeff) in &con.terms {
                    if cv == v {
                        out.push_str(&format!("    {}  {}  {:.17e}\n", var.name, con.name, coeff));
                    }
                }
            }
        }
        out.push_str("RHS\n");
        for con in &self.cons {
            if con.rhs != 0.0 {
                out.push_str(&format!("    RHS  {}  {:.17e}\n", con.name, con.rhs));
            }
        }
        out.push_str("BOUNDS\n");
        for var in &self.vars {
            if var.lb == 0.0 && var.ub == f64::INFINITY {
                continue; // MPS default
            }
            if var.lb.is_finite() {
                out.push_str(&format!(" LO BND  {}  {:.17e}\n", var.name, var.lb));
            } else {
                out.push_str(&format!(" MI BND  {}\n", var.name));
            }
            if var.ub.is_finite() {
                out.push_str(&format!(" UP BND  {}  {:.17e}\n", var.name, var.ub));
            }
        }
        out.push_str("ENDATA\n");
        out
    }
}

fn csc_from_triplets(m: usize, n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    for &(r, c, v) in triplets.iter() {
        match merged.last_mut() {
            Some(last) if last.0 == c && last.1 == r => last.2 += v,
            _ => merged.push((c, r, v)),
        }
    }
    let mut colptr = vec![0usize; n + 1];
    for &(c, _, _) in &merged {
        colptr[c + 1] += 1;
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    let rowval = merged.iter().map(|&(_, r, _)| r).collect();
    let nzval = merged.iter().map(|&(_, _, v)| v).collect();
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bounded_single_var() {
        // maximize x, x <= 1, x >= 0
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("cap", vec![(x, 1.0)], ConstraintSense::Le, 1.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.reduced_cost[x], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("floor", vec![(x, 1.0)], ConstraintSense::Ge, 0.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("lo", vec![(x, 1.0)], ConstraintSense::Ge, 2.0)
            .unwrap();
        lp.add_constraint("hi", vec![(x, 1.0)], ConstraintSense::Le, 1.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn two_var_polytope() {
        // maximize 2x + 3y; x + y <= 4; x <= 2; x, y >= 0.
        // Vertex enumeration of the polytope: (0,0)->0, (2,0)->4, (2,2)->10,
        // (0,4)->12. Optimum 12 at (0,4).
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 2.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 3.0);
        lp.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Le, 4.0)
            .unwrap();
        lp.add_constraint("capx", vec![(x, 1.0)], ConstraintSense::Le, 2.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_abs_diff_eq!(sol.objective, 12.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.primal[x], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.primal[y], 4.0, epsilon = 1e-6);
        // reduced cost of x: A'y - c = 3 - 2 = 1 > 0
        assert_abs_diff_eq!(sol.reduced_cost[x], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn minimize_sense() {
        // minimize x + y s.t. x + y >= 3, y <= 1
        let mut lp = LpModel::new(Objective::Minimize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("lo", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Ge, 3.0)
            .unwrap();
        lp.add_constraint("capy", vec![(y, 1.0)], ConstraintSense::Le, 1.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-6);
        // min-sense shadow price of the >= row is 1
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn equality_duals_and_strong_duality() {
        // maximize 5a + 4b s.t. a + b = 10, a - b = 2
        let mut lp = LpModel::new(Objective::Maximize);
        let a = lp.add_var("a", 0.0, f64::INFINITY, 5.0);
        let b = lp.add_var("b", 0.0, f64::INFINITY, 4.0);
        lp.add_constraint("sum", vec![(a, 1.0), (b, 1.0)], ConstraintSense::Eq, 10.0)
            .unwrap();
        lp.add_constraint("diff", vec![(a, 1.0), (b, -1.0)], ConstraintSense::Eq, 2.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        assert_abs_diff_eq!(sol.objective, 46.0, epsilon = 1e-6);
        // b' y must reproduce the objective
        let by = 10.0 * sol.dual[0] + 2.0 * sol.dual[1];
        assert_abs_diff_eq!(by, 46.0, epsilon = 1e-5);
        assert!(sol.residuals.duality_gap <= 1e-6 * (1.0 + sol.objective.abs()));
        assert!(sol.residuals.primal_infeasibility <= 1e-7);
        assert!(sol.residuals.dual_infeasibility <= 1e-7);
    }

    #[test]
    fn complementary_slackness() {
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 2.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 3.0);
        lp.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Le, 4.0)
            .unwrap();
        let sol = lp.solve().unwrap();
        for v in [x, y] {
            assert!(
                (sol.primal[v] * sol.reduced_cost[v]).abs() <= 1e-7,
                "complementary slackness violated for var {v}"
            );
        }
    }

    #[test]
    fn resolve_is_deterministic() {
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 2.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 3.0);
        lp.add_constraint("sum", vec![(x, 1.0), (y, 2.0)], ConstraintSense::Le, 7.0)
            .unwrap();
        let s1 = lp.solve().unwrap();
        let s2 = lp.solve().unwrap();
        assert_eq!(s1.objective, s2.objective);
        assert_eq!(s1.primal, s2.primal);
        assert_eq!(s1.dual, s2.dual);
    }

    #[test]
    fn rejects_undeclared_variable() {
        let mut lp = LpModel::new(Objective::Maximize);
        lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        assert!(lp
            .add_constraint("bad", vec![(3, 1.0)], ConstraintSense::Le, 1.0)
            .is_err());
    }

    #[test]
    fn mps_export_contains_sections() {
        let mut lp = LpModel::new(Objective::Maximize);
        let x = lp.add_var("x", 0.0, 5.0, 1.0);
        lp.add_constraint("row", vec![(x, 2.0)], ConstraintSense::Le, 3.0)
            .unwrap();
        let mps = lp.to_mps();
        for section in ["NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(mps.contains(section), "missing section {section}");
        }
        assert!(mps.contains(" L  row"));
    }
}
