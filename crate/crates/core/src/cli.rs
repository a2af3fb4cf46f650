//! Command-line surface: generate, solve, verify, and benchmark.
//!
//! Exit codes are a stable contract: 0 success, 2 invalid input, 3
//! infeasible instance, 4 failed check (internal or requested). Stdout
//! carries machine-parseable JSON or CSV only; diagnostics go to stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, Zero};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::compress::{compress_function, CostOracle};
use crate::gen::{generate, GenSpec};
use crate::lp_round::{round_2apx, LpError};
use crate::model::{
    decimal6, format_rat, is_feasible, parse_rat, solution_cost, validate, Cost, Instance,
    IntegralSolution, KcInstance, KcItem, Rat, SolutionFile, UfpInstance, UfpItem, ValidationIssue,
    ValidationReport,
};
use crate::oracles::{brute_force_kc, brute_force_ufp, exact_kc, OracleError};
use crate::pd_kc::{check_certificate_kc, solve_pd_kc, PdError, PdKcResult};
use crate::pd_ufp::{check_certificate_ufp, solve_pd_ufp, PdUfpResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

const BRUTE_BUDGET: u64 = crate::oracles::DEFAULT_ENUMERATION_BUDGET;

#[derive(Parser)]
#[command(
    name = "nlcover",
    about = "Exact solvers for covering problems with non-linear item costs",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance from a spec file.
    Gen {
        /// Generator spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's cost family (uniform-marginals, facility,
        /// convex-quadratic, steps, adversarial).
        #[arg(long)]
        family: Option<String>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and report costs and bounds.
    Solve {
        #[arg(long, value_enum)]
        algo: Algo,
        /// Instance file (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Record full per-raise rates in the certificate.
        #[arg(long)]
        audit: bool,
        /// Compress every cost curve to this accuracy before solving.
        #[arg(long)]
        epsilon: Option<String>,
        /// Write the solution here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the dual certificate here (primal-dual algorithms only).
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Write the generated cut list here (round only).
        #[arg(long)]
        cuts: Option<PathBuf>,
    },
    /// Check a solution, and optionally its certificate, against an instance.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Run seeded trials and print one CSV row each.
    Bench {
        /// Generator spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Also compute the exact optimum and the approximation ratio.
        #[arg(long)]
        oracle: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Primal-dual water filling for demand cover (2-approximate).
    PdKc,
    /// Primal-dual growing plus pruning for flow cover (4-approximate).
    PdUfp,
    /// Exact dynamic program (demand cover only).
    Dp,
    /// Exhaustive enumeration (ground truth on small instances).
    Brute,
    /// LP cutting planes plus rounding (demand cover only, 2-approximate).
    Round,
}

impl Algo {
    fn name(&self) -> &'static str {
        match self {
            Algo::PdKc => "pd-kc",
            Algo::PdUfp => "pd-ufp",
            Algo::Dp => "dp",
            Algo::Brute => "brute",
            Algo::Round => "round",
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with a zero exit
            let code = if e.exit_code() == 0 {
                EXIT_OK
            } else {
                EXIT_INVALID
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Command::Gen {
            spec,
            seed,
            family,
            out,
        } => cmd_gen(&spec, seed, family.as_deref(), out.as_deref()),
        Command::Solve {
            algo,
            input,
            audit,
            epsilon,
            out,
            cert,
            cuts,
        } => cmd_solve(
            algo,
            &input,
            audit,
            epsilon.as_deref(),
            out.as_deref(),
            cert.as_deref(),
            cuts.as_deref(),
        ),
        Command::Verify {
            input,
            solution,
            cert,
        } => cmd_verify(&input, &solution, cert.as_deref()),
        Command::Bench {
            spec,
            trials,
            seed,
            oracle,
        } => cmd_bench(&spec, trials, seed, oracle),
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), String> {
    let mut body = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    body.push('\n');
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, (i32, String)> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let instance: Instance = serde_json::from_str(&body)
        .map_err(|e| (EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let report = validate(&instance);
    if !report.ok() {
        return Err((validation_exit_code(&report), report_to_string(&report)));
    }
    Ok(instance)
}

fn validation_exit_code(report: &ValidationReport) -> i32 {
    let feasibility_only = report.issues.iter().all(|i| {
        matches!(
            i,
            ValidationIssue::InfeasibleDemand { .. } | ValidationIssue::UncoverablePoint { .. }
        )
    });
    if feasibility_only {
        EXIT_INFEASIBLE
    } else {
        EXIT_INVALID
    }
}

fn report_to_string(report: &ValidationReport) -> String {
    report
        .issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Content digest of the canonical (compact) instance JSON.
pub fn instance_digest(instance: &Instance) -> String {
    let canonical = serde_json::to_string(instance).expect("instances serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Serialize)]
struct RatioReport {
    exact: String,
    decimal: String,
}

#[derive(Serialize)]
struct RunReport {
    algorithm: &'static str,
    digest: String,
    primal_cost: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lp_cost: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cuts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    opt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<RatioReport>,
    wall_ms: u64,
}

fn ratio_report(primal: &Rat, opt: &Rat) -> RatioReport {
    let ratio = if opt.is_zero() {
        Rat::one() // a zero optimum forces a zero primal
    } else {
        primal.clone() / opt.clone()
    };
    RatioReport {
        exact: format_rat(&ratio),
        decimal: decimal6(&ratio),
    }
}

fn cmd_gen(spec_path: &Path, seed: Option<u64>, family: Option<&str>, out: Option<&Path>) -> i32 {
    let body = match std::fs::read_to_string(spec_path) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", spec_path.display())),
    };
    let mut spec: GenSpec = match serde_json::from_str(&body) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", spec_path.display())),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(name) = family {
        spec.family = match serde_json::from_value(serde_json::Value::String(name.into())) {
            Ok(f) => f,
            Err(_) => return fail(EXIT_INVALID, format!("unknown cost family {name:?}")),
        };
    }
    let instance = match generate(&spec) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    match write_json(out, &instance) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_INVALID, e),
    }
}

struct SolveOutput {
    levels: Vec<u64>,
    dual_objective: Option<Rat>,
    lp_cost: Option<Rat>,
    cuts: Option<Vec<crate::lp_round::Cut>>,
    certificate: Option<crate::engine::Certificate>,
    check_failed: Option<String>,
}

fn pd_error_code(e: &PdError) -> i32 {
    match e {
        PdError::Infeasible(_) => EXIT_INFEASIBLE,
        PdError::Engine(_) => EXIT_CHECK_FAILED,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    algo: Algo,
    input: &Path,
    audit_flag: bool,
    epsilon: Option<&str>,
    out: Option<&Path>,
    cert: Option<&Path>,
    cuts_out: Option<&Path>,
) -> i32 {
    let audit = audit_flag || std::env::var("COVER_AUDIT").is_ok_and(|v| v == "1");
    let original = match read_instance(input) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, msg),
    };
    let digest = instance_digest(&original);

    let solve_on = match epsilon {
        None => original.clone(),
        Some(raw) => {
            let eps = match parse_rat(raw) {
                Ok(r) if r > Rat::zero() => r,
                Ok(_) => return fail(EXIT_INVALID, "epsilon must be positive"),
                Err(e) => return fail(EXIT_INVALID, format!("bad epsilon: {e}")),
            };
            match compress_instance(&original, &eps) {
                Ok(i) => i,
                Err(e) => return fail(EXIT_INVALID, e),
            }
        }
    };

    if cert.is_some() && !matches!(algo, Algo::PdKc | Algo::PdUfp) {
        return fail(EXIT_INVALID, "--cert requires a primal-dual algorithm");
    }
    if cuts_out.is_some() && algo != Algo::Round {
        return fail(EXIT_INVALID, "--cuts requires --algo round");
    }

    let started = Instant::now();
    let solved = match (&solve_on, algo) {
        (Instance::Kc(kc), Algo::PdKc) => match solve_pd_kc(kc, audit) {
            Ok(res) => {
                let check_failed = if audit {
                    let report = check_certificate_kc(kc, &res);
                    (!report.passed()).then(|| {
                        report
                            .failures
                            .iter()
                            .map(|f| f.to_string())
                            .collect::<Vec<_>>()
                            .join("; ")
                    })
                } else {
                    (!res.ratio_bound_ok).then(|| "primal exceeds twice the dual".into())
                };
                SolveOutput {
                    levels: res.solution.levels,
                    dual_objective: Some(res.certificate.dual_objective.clone()),
                    lp_cost: None,
                    cuts: None,
                    certificate: Some(res.certificate),
                    check_failed,
                }
            }
            Err(e) => return fail(pd_error_code(&e), e),
        },
        (Instance::Ufp(ufp), Algo::PdUfp) => match solve_pd_ufp(ufp, audit) {
            Ok(res) => {
                let check_failed = if audit {
                    let report = check_certificate_ufp(ufp, &res);
                    (!report.passed()).then(|| {
                        report
                            .failures
                            .iter()
                            .map(|f| f.to_string())
                            .collect::<Vec<_>>()
                            .join("; ")
                    })
                } else {
                    (!res.ratio_bound_ok).then(|| "primal exceeds four times the dual".into())
                };
                SolveOutput {
                    levels: res.solution.levels,
                    dual_objective: Some(res.certificate.dual_objective.clone()),
                    lp_cost: None,
                    cuts: None,
                    certificate: Some(res.certificate),
                    check_failed,
                }
            }
            Err(e) => return fail(pd_error_code(&e), e),
        },
        (Instance::Kc(kc), Algo::Dp) => match exact_kc(kc) {
            Ok((_, sol)) => SolveOutput {
                levels: sol.levels,
                dual_objective: None,
                lp_cost: None,
                cuts: None,
                certificate: None,
                check_failed: None,
            },
            Err(e) => return fail(oracle_error_code(&e), e),
        },
        (Instance::Kc(kc), Algo::Brute) => match brute_force_kc(kc, kc.demand, BRUTE_BUDGET) {
            Ok((_, sol)) => SolveOutput {
                levels: sol.levels,
                dual_objective: None,
                lp_cost: None,
                cuts: None,
                certificate: None,
                check_failed: None,
            },
            Err(e) => return fail(oracle_error_code(&e), e),
        },
        (Instance::Ufp(ufp), Algo::Brute) => {
            match brute_force_ufp(ufp, ufp.max_demand(), BRUTE_BUDGET) {
                Ok((_, sol)) => SolveOutput {
                    levels: sol.levels,
                    dual_objective: None,
                    lp_cost: None,
                    cuts: None,
                    certificate: None,
                    check_failed: None,
                },
                Err(e) => return fail(oracle_error_code(&e), e),
            }
        }
        (Instance::Kc(kc), Algo::Round) => match round_2apx(kc) {
            Ok(res) => {
                let check_failed = (res.rounded_cost
                    > Rat::from_integer(2.into()) * res.lp_cost.clone())
                .then(|| "rounded cost exceeds twice the relaxation".into());
                SolveOutput {
                    levels: res.solution.levels,
                    dual_objective: None,
                    lp_cost: Some(res.lp_cost),
                    cuts: Some(res.cuts),
                    certificate: None,
                    check_failed,
                }
            }
            Err(e) => return fail(lp_error_code(&e), e),
        },
        (Instance::Ufp(_), Algo::PdKc | Algo::Dp | Algo::Round) => {
            return fail(EXIT_INVALID, format!("{} needs a kc instance", algo.name()))
        }
        (Instance::Kc(_), Algo::PdUfp) => return fail(EXIT_INVALID, "pd-ufp needs a ufp instance"),
    };
    let wall_ms = started.elapsed().as_millis() as u64;

    // cost under the input instance, even when the solve ran on a
    // compressed one
    let solution = IntegralSolution {
        levels: solved.levels.clone(),
    };
    let primal_cost = match solution_cost(&original, &solution) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CHECK_FAILED, e),
    };

    let report = RunReport {
        algorithm: algo.name(),
        digest,
        primal_cost: primal_cost.to_string(),
        dual_objective: solved.dual_objective.as_ref().map(format_rat),
        lp_cost: solved.lp_cost.as_ref().map(format_rat),
        cuts: solved.cuts.as_ref().map(|c| c.len()),
        opt: None,
        ratio: None,
        wall_ms,
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );

    if let Some(path) = out {
        let file = SolutionFile {
            levels: solved.levels,
            cost: primal_cost,
        };
        if let Err(e) = write_json(Some(path), &file) {
            return fail(EXIT_INVALID, e);
        }
    }
    if let (Some(path), Some(certificate)) = (cert, &solved.certificate) {
        if let Err(e) = write_json(Some(path), certificate) {
            return fail(EXIT_INVALID, e);
        }
    }
    if let (Some(path), Some(cuts)) = (cuts_out, &solved.cuts) {
        if let Err(e) = write_json(Some(path), cuts) {
            return fail(EXIT_INVALID, e);
        }
    }
    if let Some(witness) = solved.check_failed {
        return fail(EXIT_CHECK_FAILED, witness);
    }
    EXIT_OK
}

fn oracle_error_code(e: &OracleError) -> i32 {
    match e {
        OracleError::Infeasible => EXIT_INFEASIBLE,
        OracleError::BudgetExceeded { .. } | OracleError::ChainViolated { .. } => EXIT_INVALID,
    }
}

fn lp_error_code(e: &LpError) -> i32 {
    match e {
        LpError::Infeasible(_) => EXIT_INFEASIBLE,
        LpError::Model(_) => EXIT_INVALID,
        _ => EXIT_CHECK_FAILED,
    }
}

fn compress_instance(instance: &Instance, eps: &Rat) -> Result<Instance, String> {
    let compress_curve = |cf: &crate::model::CostFunction| {
        let oracle = CostOracle::from_cost_function(cf).map_err(|e| e.to_string())?;
        compress_function(&oracle, eps).map_err(|e| e.to_string())
    };
    Ok(match instance {
        Instance::Kc(kc) => Instance::Kc(KcInstance {
            demand: kc.demand,
            items: kc
                .items
                .iter()
                .map(|it| {
                    Ok(KcItem {
                        costs: compress_curve(&it.costs)?,
                    })
                })
                .collect::<Result<_, String>>()?,
        }),
        Instance::Ufp(ufp) => Instance::Ufp(UfpInstance {
            demands: ufp.demands.clone(),
            items: ufp
                .items
                .iter()
                .map(|it| {
                    Ok(UfpItem {
                        interval: it.interval,
                        costs: compress_curve(&it.costs)?,
                    })
                })
                .collect::<Result<_, String>>()?,
        }),
    })
}

fn cmd_verify(input: &Path, solution_path: &Path, cert: Option<&Path>) -> i32 {
    let instance = match read_instance(input) {
        Ok(i) => i,
        Err((code, msg)) => return fail(code, msg),
    };
    let body = match std::fs::read_to_string(solution_path) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", solution_path.display())),
    };
    let file: SolutionFile = match serde_json::from_str(&body) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", solution_path.display())),
    };
    let solution = IntegralSolution {
        levels: file.levels.clone(),
    };

    if !is_feasible(&instance, &solution) {
        return fail(EXIT_CHECK_FAILED, "solution does not cover the demand");
    }
    match solution_cost(&instance, &solution) {
        Ok(actual) if actual == file.cost => {}
        Ok(actual) => {
            return fail(
                EXIT_CHECK_FAILED,
                format!("declared cost {} but the levels cost {actual}", file.cost),
            )
        }
        Err(e) => return fail(EXIT_CHECK_FAILED, e),
    }

    if let Some(cert_path) = cert {
        let body = match std::fs::read_to_string(cert_path) {
            Ok(b) => b,
            Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", cert_path.display())),
        };
        let certificate: crate::engine::Certificate = match serde_json::from_str(&body) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", cert_path.display())),
        };
        let Some(primal) = file.cost.finite().cloned() else {
            return fail(EXIT_CHECK_FAILED, "certificates require a finite cost");
        };
        let failures = match &instance {
            Instance::Kc(kc) => {
                let result = PdKcResult {
                    solution,
                    primal_cost: primal.clone(),
                    ratio_bound_ok: primal
                        <= Rat::from_integer(2.into()) * certificate.dual_objective.clone(),
                    certificate,
                };
                check_certificate_kc(kc, &result).failures
            }
            Instance::Ufp(ufp) => {
                let result = PdUfpResult {
                    solution,
                    primal_cost: primal.clone(),
                    ratio_bound_ok: primal
                        <= Rat::from_integer(4.into()) * certificate.dual_objective.clone(),
                    certificate,
                    prune_log: Vec::new(),
                };
                check_certificate_ufp(ufp, &result).failures
            }
        };
        if !failures.is_empty() {
            let witness = failures
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return fail(EXIT_CHECK_FAILED, witness);
        }
    }
    EXIT_OK
}

fn cmd_bench(spec_path: &Path, trials: u64, seed: u64, oracle: bool) -> i32 {
    let body = match std::fs::read_to_string(spec_path) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", spec_path.display())),
    };
    let base_spec: GenSpec = match serde_json::from_str(&body) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", spec_path.display())),
    };

    println!("trial,algorithm,digest,primal,dual,opt,ratio,ratio_decimal,wall_ms");
    let mut ratios: Vec<Rat> = Vec::new();
    for trial in 0..trials {
        let spec = GenSpec {
            seed: seed.wrapping_add(trial),
            ..base_spec.clone()
        };
        let instance = match generate(&spec) {
            Ok(i) => i,
            Err(e) => return fail(EXIT_INVALID, e),
        };
        let digest = instance_digest(&instance);
        let started = Instant::now();
        let (algo_name, levels, dual): (&str, Vec<u64>, Rat) = match &instance {
            Instance::Kc(kc) => match solve_pd_kc(kc, false) {
                Ok(res) => ("pd-kc", res.solution.levels, res.certificate.dual_objective),
                Err(e) => return fail(pd_error_code(&e), e),
            },
            Instance::Ufp(ufp) => match solve_pd_ufp(ufp, false) {
                Ok(res) => (
                    "pd-ufp",
                    res.solution.levels,
                    res.certificate.dual_objective,
                ),
                Err(e) => return fail(pd_error_code(&e), e),
            },
        };
        let wall_ms = started.elapsed().as_millis() as u64;
        let solution = IntegralSolution { levels };
        let primal = match solution_cost(&instance, &solution) {
            Ok(Cost::Finite(r)) => r,
            Ok(Cost::Infinite) => return fail(EXIT_CHECK_FAILED, "infinite primal cost"),
            Err(e) => return fail(EXIT_CHECK_FAILED, e),
        };

        let mut opt_col = String::new();
        let mut ratio_col = String::new();
        let mut ratio_dec = String::new();
        if oracle {
            let opt = match &instance {
                Instance::Kc(kc) => exact_kc(kc).map(|(c, _)| c),
                Instance::Ufp(ufp) => {
                    brute_force_ufp(ufp, ufp.max_demand(), BRUTE_BUDGET).map(|(c, _)| c)
                }
            };
            match opt {
                Ok(Cost::Finite(opt)) => {
                    let rr = ratio_report(&primal, &opt);
                    opt_col = format_rat(&opt);
                    ratio_col = rr.exact;
                    ratio_dec = rr.decimal;
                    ratios.push(if opt.is_zero() {
                        Rat::one()
                    } else {
                        primal.clone() / opt
                    });
                }
                Ok(Cost::Infinite) => return fail(EXIT_CHECK_FAILED, "infinite optimum"),
                Err(e) => return fail(oracle_error_code(&e), e),
            }
        }

        let mut row = String::new();
        let _ = write!(
            row,
            "{trial},{algo_name},{digest},{},{},{},{},{},{}",
            format_rat(&primal),
            format_rat(&dual),
            opt_col,
            ratio_col,
            ratio_dec,
            wall_ms
        );
        println!("{row}");
    }

    if oracle && !ratios.is_empty() {
        let max = ratios.iter().max().expect("non-empty").clone();
        let mean: Rat =
            ratios.iter().cloned().sum::<Rat>() / Rat::from_integer(ratios.len().into());
        println!(
            "# summary max_ratio={} ({}) mean_ratio={} ({})",
            format_rat(&max),
            decimal6(&max),
            format_rat(&mean),
            decimal6(&mean)
        );
    }
    EXIT_OK
}
