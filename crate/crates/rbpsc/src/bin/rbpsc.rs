//! Command-line driver: instance generation, exact solves, the LP
//! relaxation, Monte-Carlo policy evaluation, and the benchmark table.

use clap::{Args, Parser, Subcommand};
use rbpsc::exact::solve_exact_guarded;
use rbpsc::harness::{
    builtin_suites, fmt_sig, run_benchmark, write_results, ExperimentConfig,
};
use rbpsc::instance::{
    generate_random_instance_with_discount, load_instance, save_instance, validate_instance,
    ProblemInstance,
};
use rbpsc::policies::{GreedyPolicy, OslPolicy, PdPolicy, PolicySpec, RandomPolicy};
use rbpsc::relaxation::{solve_relaxation, RelaxationSolution};
use rbpsc::simulate::{evaluate_policy, SimConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rbpsc", about = "Restless bandits with switching costs: solvers, policies, benchmarks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (rbpsc-v1 JSON).
    #[arg(long)]
    instance: PathBuf,
    /// Override the instance's discount factor.
    #[arg(long)]
    alpha: Option<f64>,
}

impl InstanceArgs {
    fn load(&self) -> rbpsc::Result<ProblemInstance> {
        let inst = load_instance(&self.instance)?;
        Ok(match self.alpha {
            Some(a) => inst.with_discount(a),
            None => inst,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance, or one of the built-in benchmark suites.
    Gen {
        /// Built-in suite name (problem1..problem8); overrides the size flags.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// States per site.
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 1.0)]
        cost_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        reward_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        /// Output instance file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the full occupation-measure LP of a guarded instance.
    SolveExact {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Ceiling on |S|*(N!)^2 for the exact path.
        #[arg(long, default_value_t = rbpsc::exact::DEFAULT_EXACT_GUARD)]
        max_exact_states: usize,
    },
    /// Solve the marginal LP relaxation; optionally persist the solution.
    Relax {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Write the relaxation solution (duals, reduced costs) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo evaluation of a policy.
    Simulate {
        #[command(flatten)]
        instance: InstanceArgs,
        /// osl, pd, greedy or random.
        #[arg(long, default_value = "osl")]
        policy: PolicySpec,
        #[arg(long, default_value_t = 10_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncation tolerance for the simulation horizon.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Reuse a persisted relaxation solution instead of re-solving.
        #[arg(long)]
        relaxation: Option<PathBuf>,
    },
    /// Run the benchmark table over built-in suites and/or instance files.
    Bench {
        /// Built-in suites to include (problem1..problem8, or "all");
        /// default: the six desk-scale suites.
        #[arg(long)]
        suite: Vec<String>,
        /// Additional instance files.
        #[arg(long)]
        instance: Vec<PathBuf>,
        /// Discount factors to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.9])]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = rbpsc::exact::DEFAULT_EXACT_GUARD)]
        max_exact_states: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_relaxation(
    inst: &ProblemInstance,
    path: &Option<PathBuf>,
) -> rbpsc::Result<RelaxationSolution> {
    match path {
        Some(p) => {
            let rel = RelaxationSolution::load(p)?;
            rel.check_instance(inst)?;
            Ok(rel)
        }
        None => solve_relaxation(inst),
    }
}

fn run() -> rbpsc::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            suite,
            n,
            m,
            states,
            cost_scale,
            reward_scale,
            seed,
            alpha,
            out,
        } => {
            let inst = match suite {
                Some(name) => builtin_suites(seed)?
                    .into_iter()
                    .find(|(id, _)| *id == name)
                    .map(|(_, inst)| inst.with_discount(alpha))
                    .ok_or_else(|| {
                        rbpsc::Error::InvalidParameter(format!("unknown suite '{name}'"))
                    })?,
                None => generate_random_instance_with_discount(
                    seed,
                    n,
                    m,
                    states,
                    cost_scale,
                    reward_scale,
                    alpha,
                )?,
            };
            let report = validate_instance(&inst);
            if !report.ok() {
                return Err(rbpsc::Error::InvalidInstance(format!("{:?}", report)));
            }
            save_instance(&inst, &out)?;
            println!(
                "wrote {} (N={}, M={}, alpha={})",
                out.display(),
                inst.n_sites(),
                inst.n_servers,
                inst.discount
            );
        }
        Command::SolveExact {
            instance,
            max_exact_states,
        } => {
            let inst = instance.load()?;
            let sol = solve_exact_guarded(&inst, max_exact_states)?;
            println!("optimal_value {}", fmt_sig(sol.optimal_value, 6));
            println!("lp_objective {}", fmt_sig(sol.lp_objective, 6));
        }
        Command::Relax { instance, out } => {
            let inst = instance.load()?;
            let rel = solve_relaxation(&inst)?;
            println!("Z_r {}", fmt_sig(rel.objective, 6));
            if let Some(path) = out {
                rel.save(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Simulate {
            instance,
            policy,
            trajectories,
            seed,
            tol,
            relaxation,
        } => {
            let inst = instance.load()?;
            let mut cfg = SimConfig::for_instance(&inst, trajectories, seed);
            cfg.truncation_tol = tol;
            let rel = if policy.needs_relaxation() {
                Some(load_relaxation(&inst, &relaxation)?)
            } else {
                None
            };
            let report = match policy {
                PolicySpec::OneStepLookahead => {
                    let p = OslPolicy {
                        rel: rel.as_ref().unwrap(),
                    };
                    evaluate_policy(&inst, &p, &cfg)?
                }
                PolicySpec::PrimalDual => {
                    let p = PdPolicy {
                        rel: rel.as_ref().unwrap(),
                    };
                    evaluate_policy(&inst, &p, &cfg)?
                }
                PolicySpec::Greedy => evaluate_policy(&inst, &GreedyPolicy, &cfg)?,
                PolicySpec::Random => evaluate_policy(&inst, &RandomPolicy, &cfg)?,
            };
            let name = match policy {
                PolicySpec::OneStepLookahead => "osl",
                PolicySpec::PrimalDual => "pd",
                PolicySpec::Greedy => "greedy",
                PolicySpec::Random => "random",
            };
            println!("policy {name}");
            println!("mean {}", fmt_sig(report.mean, 6));
            println!("std_error {}", fmt_sig(report.std_error, 6));
            println!("horizon {}", report.horizon);
            println!(
                "ci95 [{}, {}]",
                fmt_sig(report.confidence_interval_95.0, 6),
                fmt_sig(report.confidence_interval_95.1, 6)
            );
        }
        Command::Bench {
            suite,
            instance,
            alpha,
            trajectories,
            seed,
            tol,
            max_exact_states,
            out,
        } => {
            let mut instances = Vec::new();
            let all = builtin_suites(seed)?;
            let wanted: Vec<String> = if suite.is_empty() && instance.is_empty() {
                (1..=6).map(|i| format!("problem{i}")).collect()
            } else if suite.iter().any(|s| s == "all") {
                all.iter().map(|(id, _)| id.clone()).collect()
            } else {
                suite.clone()
            };
            for name in &wanted {
                let found = all
                    .iter()
                    .find(|(id, _)| id == name)
                    .ok_or_else(|| {
                        rbpsc::Error::InvalidParameter(format!("unknown suite '{name}'"))
                    })?;
                instances.push((found.0.clone(), found.1.clone()));
            }
            for path in &instance {
                let inst = load_instance(path)?;
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                instances.push((id, inst));
            }
            let cfg = ExperimentConfig {
                instances,
                alphas: alpha,
                n_trajectories: trajectories,
                master_seed: seed,
                truncation_tol: tol,
                max_exact_states,
            };
            let rows = run_benchmark(&cfg)?;
            write_results(&rows, &out)?;
            let failures: Vec<&str> = rows
                .iter()
                .filter_map(|r| r.error.as_deref())
                .collect();
            println!("wrote {} ({} rows)", out.display(), rows.len());
            for f in &failures {
                eprintln!("row failure: {f}");
            }
            return Ok(failures.is_empty());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
