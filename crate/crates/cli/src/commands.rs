use std::path::Path;

use qqc_core::adversary::{make_dual_witness, search_gamma, spectral_bound, AdversaryReport, WeightMatrix};
use qqc_core::problem::QueryProblem;
use qqc_core::reconstruct::{reconstruct, QuantumQueryAlgorithm};
use qqc_core::sdp::{
    build_dual, build_dual_relaxed, build_primal, build_primal_relaxed, check_eps, LabeledBlocks,
};
use qqc_core::simulate::{primal_point_from_trace, run, success_report};
use qqc_core::solver::{export_sdpa, solve, verify_point, FeasibilityStatus, ResidualReport, SolverConfig};
use qqc_core::QqcError;
use serde_json::{json, Value};

use crate::files::{AlgorithmFile, GammaFile, ProblemFile};
use crate::{CliError, Command, CommandOutput, ExitCode};

/// Witnesses are checked for at most this many query counts.
pub const WITNESS_CAP: usize = 8;
pub const WITNESS_TOL: f64 = 1e-8;
pub const SIMULATION_TOL: f64 = 1e-6;
pub const ESTIMATE_SEARCH_BUDGET: usize = 40;

pub fn parameters(cmd: &Command) -> Value {
    match cmd {
        Command::Validate(p) => json!({ "problem": p.problem }),
        Command::Feasible { problem, q, eps, relaxed, dual, export_sdpa } => json!({
            "problem": problem.problem, "q": q, "eps": eps, "relaxed": relaxed, "dual": dual,
            "export_sdpa": export_sdpa,
        }),
        Command::Adversary { problem, eps, gamma, budget } => {
            json!({ "problem": problem.problem, "eps": eps, "gamma": gamma, "budget": budget })
        }
        Command::Estimate { problem, eps, qmax } => json!({ "problem": problem.problem, "eps": eps, "qmax": qmax }),
        Command::Reconstruct { problem, q, eps, out } => {
            json!({ "problem": problem.problem, "q": q, "eps": eps, "out": out })
        }
        Command::Simulate { problem, alg, eps } => json!({ "problem": problem.problem, "alg": alg, "eps": eps }),
    }
}

pub fn dispatch(cmd: &Command, seed: u64) -> Result<CommandOutput, CliError> {
    let cfg = SolverConfig::with_seed(seed);
    match cmd {
        Command::Validate(p) => validate(&p.problem),
        Command::Feasible { problem, q, eps, relaxed, dual, export_sdpa } => {
            feasible(&problem.problem, *q, *eps, *relaxed, *dual, export_sdpa.as_deref(), &cfg)
        }
        Command::Adversary { problem, eps, gamma, budget } => adversary(&problem.problem, *eps, gamma, *budget),
        Command::Estimate { problem, eps, qmax } => estimate(&problem.problem, *eps, *qmax, &cfg),
        Command::Reconstruct { problem, q, eps, out } => reconstruct_cmd(&problem.problem, *q, *eps, out, &cfg),
        Command::Simulate { problem, alg, eps } => simulate(&problem.problem, alg, *eps),
    }
}

fn violations_json(p: &QueryProblem) -> Vec<Value> {
    p.validate()
        .violations
        .iter()
        .map(|v| json!({ "kind": format!("{:?}", v.kind), "subject": v.subject, "residual": v.residual }))
        .collect()
}

fn load_valid(path: &Path) -> Result<QueryProblem, CliError> {
    let p = ProblemFile::load(path)?.to_problem()?;
    let report = p.validate();
    if !report.is_valid() {
        let list: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::semantic(format!("invalid problem: {}", list.join("; "))));
    }
    Ok(p)
}

fn eps_flag(eps: f64) -> Result<(), CliError> {
    check_eps(eps).map_err(|_| CliError::input(format!("--eps {eps} must lie in [0, 1)")))
}

fn status_name(s: FeasibilityStatus) -> &'static str {
    match s {
        FeasibilityStatus::Feasible => "FEASIBLE",
        FeasibilityStatus::InfeasibleWithCertificate => "INFEASIBLE",
        FeasibilityStatus::Undecided => "UNDECIDED",
    }
}

fn residual_json(r: &ResidualReport) -> Value {
    json!({ "max_residual": r.max_residual, "min_psd_eig": r.min_psd_eig, "strict_slack": r.strict_slack })
}

fn blocks_summary(blocks: &LabeledBlocks) -> Vec<Value> {
    blocks
        .entries
        .iter()
        .map(|(label, m)| {
            json!({
                "label": label.to_string(), "dim": m.dim(), "trace": m.trace(),
                "min_eig": m.min_eigenvalue().ok(),
            })
        })
        .collect()
}

pub fn validate(path: &Path) -> Result<CommandOutput, CliError> {
    let p = ProblemFile::load(path)?.to_problem()?;
    let violations = violations_json(&p);
    let worst = p.validate().violations.iter().filter_map(|v| v.residual).fold(0.0, f64::max);
    if violations.is_empty() {
        let results = json!({ "n": p.n(), "inputs": p.size(), "outputs": p.outputs().len() });
        Ok(CommandOutput::new("VALID", results, json!({ "max_residual": 0.0 }), ExitCode::Success))
    } else {
        let results = json!({ "violations": violations });
        Ok(CommandOutput::new("INVALID", results, json!({ "max_residual": worst }), ExitCode::SemanticError))
    }
}

pub fn feasible(
    path: &Path,
    q: usize,
    eps: f64,
    relaxed: bool,
    dual: bool,
    export: Option<&Path>,
    cfg: &SolverConfig,
) -> Result<CommandOutput, CliError> {
    let p = load_valid(path)?;
    eps_flag(eps)?;
    if dual && export.is_some() {
        return Err(CliError::input("SDPA export is available for primal programs only"));
    }
    let (kind, prog) = match (dual, relaxed) {
        (false, false) => ("primal", build_primal(&p, q, eps)),
        (false, true) => ("primal-relaxed", build_primal_relaxed(&p, q, eps)),
        (true, false) => ("dual", build_dual(&p, q, eps)),
        (true, true) => ("dual-relaxed", build_dual_relaxed(&p, q, eps)),
    };
    let prog = prog.map_err(CliError::from_core)?;
    if let Some(out) = export {
        export_sdpa(&prog, out).map_err(CliError::from_core)?;
    }
    let outcome = solve(&prog, cfg).map_err(CliError::from_core)?;
    let mut results = json!({
        "program": kind, "q": q, "eps": eps, "status": status_name(outcome.status),
        "iterations": outcome.iterations, "rows": prog.rows.len(), "blocks": prog.variable_cone.blocks.len(),
        "sdpa_file": export,
    });
    let residuals = match (&outcome.point, &outcome.certificate) {
        (Some(point), _) => {
            results["point"] = json!(blocks_summary(point));
            residual_json(&verify_point(&prog, point).map_err(CliError::from_core)?)
        }
        (None, Some(cert)) => {
            results["certificate"] = json!({
                "value": cert.value, "min_cone_eig": cert.min_cone_eig, "free_residual": cert.free_residual,
                "dual_point": cert.dual_point.as_ref().map(blocks_summary),
            });
            json!({ "certificate_value": cert.value, "min_cone_eig": cert.min_cone_eig, "free_residual": cert.free_residual })
        }
        (None, None) => json!({ "max_row_residual": outcome.residuals.iter().copied().fold(0.0, f64::max) }),
    };
    let code = if outcome.status == FeasibilityStatus::Undecided { ExitCode::Undecided } else { ExitCode::Success };
    Ok(CommandOutput::new(status_name(outcome.status), results, residuals, code))
}

fn report_json(r: &AdversaryReport) -> Value {
    json!({
        "lambda_gamma": r.lambda_gamma, "alpha": r.alpha,
        "bound": if r.is_unbounded() { Value::Null } else { json!(r.bound) },
        "unbounded": r.is_unbounded(), "ceil_bound": r.ceil_bound, "perron_v": r.perron_v,
    })
}

/// Verifies the explicit dual witness for every `q` below the bound, up to [`WITNESS_CAP`].
pub fn witness_checks(p: &QueryProblem, w: &WeightMatrix, r: &AdversaryReport, eps: f64) -> Result<Vec<Value>, CliError> {
    let top = r.ceil_bound.map_or(WITNESS_CAP, |c| (c as usize).min(WITNESS_CAP));
    let mut checks = Vec::new();
    for q in 0..top {
        let wit = make_dual_witness(p, w, q, eps).map_err(CliError::from_core)?;
        let prog = build_dual_relaxed(p, q, eps).map_err(CliError::from_core)?;
        let rep = verify_point(&prog, &wit).map_err(CliError::from_core)?;
        let valid = rep.max_residual <= WITNESS_TOL && rep.min_psd_eig >= -WITNESS_TOL && rep.strictly_feasible();
        checks.push(json!({
            "q": q, "max_residual": rep.max_residual, "min_psd_eig": rep.min_psd_eig,
            "strict_slack": rep.strict_slack, "valid": valid,
        }));
    }
    Ok(checks)
}

pub fn adversary(path: &Path, eps: f64, gamma: &str, budget: usize) -> Result<CommandOutput, CliError> {
    let p = load_valid(path)?;
    eps_flag(eps)?;
    let (w, r) = if gamma == "auto" {
        search_gamma(&p, eps, budget).map_err(CliError::from_core)?
    } else {
        let w = GammaFile::load(Path::new(gamma))?.to_weights()?;
        w.check_against(&p).map_err(CliError::from_core)?;
        let r = spectral_bound(&p, &w, eps).map_err(CliError::from_core)?;
        (w, r)
    };
    let checks = witness_checks(&p, &w, &r, eps)?;
    let all_valid = checks.iter().all(|c| c["valid"] == json!(true));
    let worst = checks.iter().filter_map(|c| c["max_residual"].as_f64()).fold(0.0, f64::max);
    let gamma_rows: Vec<Vec<f64>> = w.matrix().row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut results = report_json(&r);
    results["gamma_source"] = json!(if gamma == "auto" { "search" } else { "file" });
    results["gamma"] = json!(gamma_rows);
    results["witnesses"] = json!(checks);
    let (status, code) = if all_valid { ("OK", ExitCode::Success) } else { ("WITNESS_FAILED", ExitCode::SemanticError) };
    Ok(CommandOutput::new(status, results, json!({ "max_witness_residual": worst }), code))
}

/// Adversary bounds reported by `estimate`: the all-ones seed and the searched weights.
fn estimate_bounds(p: &QueryProblem, eps: f64) -> Result<Vec<(String, f64)>, CliError> {
    let seed = match WeightMatrix::seed(p) {
        Ok(w) => w,
        Err(QqcError::EmptyRelation) => return Ok(Vec::new()),
        Err(e) => return Err(CliError::from_core(e)),
    };
    let a = spectral_bound(p, &seed, eps).map_err(CliError::from_core)?;
    let (_, b) = search_gamma(p, eps, ESTIMATE_SEARCH_BUDGET).map_err(CliError::from_core)?;
    Ok(vec![("seed".to_string(), a.bound), ("search".to_string(), b.bound)])
}

pub fn estimate(path: &Path, eps: f64, qmax: usize, cfg: &SolverConfig) -> Result<CommandOutput, CliError> {
    let p = load_valid(path)?;
    eps_flag(eps)?;
    let mut scan = Vec::new();
    let mut qqc = None;
    let mut undecided_below = false;
    for q in 0..=qmax {
        let out = solve(&build_primal(&p, q, eps).map_err(CliError::from_core)?, cfg).map_err(CliError::from_core)?;
        scan.push(json!({ "q": q, "status": status_name(out.status), "iterations": out.iterations }));
        match out.status {
            FeasibilityStatus::Feasible => {
                qqc = Some(q);
                break;
            }
            FeasibilityStatus::Undecided => undecided_below = true,
            FeasibilityStatus::InfeasibleWithCertificate => {}
        }
    }
    let bounds = estimate_bounds(&p, eps)?;
    let best = bounds.iter().map(|(_, b)| *b).fold(0.0, f64::max);
    let floor = qqc.unwrap_or(qmax + 1) as f64;
    let consistent = bounds.iter().all(|(_, b)| *b <= floor + 1e-9);
    let results = json!({
        "qqc": qqc,
        "qqc_display": qqc.map_or(format!(">= {}", qmax + 1), |q| q.to_string()),
        "scan": scan,
        "adversary_bounds": bounds.iter().map(|(s, b)| json!({ "source": s, "bound": b })).collect::<Vec<_>>(),
        "best_adversary_bound": if bounds.is_empty() { Value::Null } else { json!(best) },
        "consistent": consistent,
    });
    let (status, code) = if undecided_below {
        ("INCONCLUSIVE", ExitCode::Undecided)
    } else if !consistent {
        ("INCONSISTENT", ExitCode::SemanticError)
    } else {
        ("OK", ExitCode::Success)
    };
    Ok(CommandOutput::new(status, results, json!({ "bound_gap": floor - best }), code))
}

pub fn reconstruct_cmd(path: &Path, q: usize, eps: f64, out: &Path, cfg: &SolverConfig) -> Result<CommandOutput, CliError> {
    let p = load_valid(path)?;
    eps_flag(eps)?;
    let r = reconstruct(&p, q, eps, cfg).map_err(|e| match e {
        QqcError::Infeasible => CliError {
            code: ExitCode::PreconditionFailed,
            message: format!("the primal program is infeasible at q = {q}, eps = {eps}; no algorithm exists"),
        },
        other => CliError::from_core(other),
    })?;
    AlgorithmFile::from_algorithm(&r.algorithm).save(out)?;
    let trace = run(&r.algorithm, &p).map_err(CliError::from_core)?;
    let success = success_report(&trace, &p, eps).map_err(CliError::from_core)?;
    let results = json!({
        "out": out, "queries": r.algorithm.queries(), "w_dim": r.algorithm.w_dim, "final_dim": r.final_dim,
        "min_success": success.min_success, "worst_input": p.label(success.worst_input),
    });
    let residuals = json!({ "structure_residual": r.algorithm.structure_residual() });
    Ok(CommandOutput::new("RECONSTRUCTED", results, residuals, ExitCode::Success))
}

/// Reorders the projectors of `alg` to follow the output order of `p`.
fn align_outputs(p: &QueryProblem, mut alg: QuantumQueryAlgorithm) -> Result<QuantumQueryAlgorithm, CliError> {
    let mut projectors = Vec::new();
    for z in p.outputs() {
        let k = alg
            .outputs
            .iter()
            .position(|o| o == z)
            .ok_or_else(|| CliError::semantic(format!("algorithm has no projector for output {z:?}")))?;
        projectors.push(alg.projectors[k].clone());
    }
    if alg.outputs.len() != projectors.len() {
        return Err(CliError::semantic("algorithm has projectors for unknown outputs"));
    }
    alg.projectors = projectors;
    alg.outputs = p.outputs().to_vec();
    Ok(alg)
}

pub fn simulate(path: &Path, alg_path: &Path, eps: f64) -> Result<CommandOutput, CliError> {
    let p = load_valid(path)?;
    eps_flag(eps)?;
    let alg = AlgorithmFile::load(alg_path)?.to_algorithm()?;
    if alg.n != p.n() {
        return Err(CliError::semantic(format!("algorithm acts on n = {}, problem has n = {}", alg.n, p.n())));
    }
    let alg = align_outputs(&p, alg)?;
    alg.validate(SIMULATION_TOL).map_err(CliError::from_core)?;
    let trace = run(&alg, &p).map_err(CliError::from_core)?;
    let success = success_report(&trace, &p, eps).map_err(CliError::from_core)?;
    let point = primal_point_from_trace(&p, &alg, &trace, eps).map_err(CliError::from_core)?;
    let prog = build_primal(&p, alg.queries(), eps).map_err(CliError::from_core)?;
    let rep = verify_point(&prog, &point).map_err(CliError::from_core)?;
    let pass = success.pass && rep.satisfies(SIMULATION_TOL);
    let assignment = p.assignment().map_err(CliError::from_core)?;
    let per_input: Vec<Value> = success
        .per_input
        .iter()
        .enumerate()
        .map(|(x, s)| json!({ "input": p.label(x), "output": p.outputs()[assignment[x]], "success": s }))
        .collect();
    let results = json!({
        "queries": alg.queries(), "w_dim": alg.w_dim, "per_input": per_input,
        "min_success": success.min_success, "worst_input": p.label(success.worst_input), "pass": pass,
    });
    let mut residuals = residual_json(&rep);
    residuals["structure_residual"] = json!(alg.structure_residual());
    let (status, code) = if pass { ("PASS", ExitCode::Success) } else { ("FAIL", ExitCode::SemanticError) };
    Ok(CommandOutput::new(status, results, residuals, code))
}
