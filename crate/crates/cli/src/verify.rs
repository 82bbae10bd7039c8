//! The `verify` battery. Each check reports `ok: true|false`, or `null`
//! when it does not apply or is over the enumeration cap.

use persuade_core::agent::{best_response_index, brute_force_response_with, evaluate_with, DEFAULT_PROFILE_CAP};
use persuade_core::lp::{
    credible_ic_lp, enses_lp, es_bruteforce_with, es_sigma_lp, linearization_feasible, policy_value,
    satisfies_deviation_maps, solve_credible_ic_with, solve_enses_with, solve_es_sigma, solve_noncredible_with,
    LinearProgram, PolicyLayout,
};
use persuade_core::{
    check_multistage_ic, validate_mechanism, AgentError, Backend, EnsesSolution, Instance, LpError, MechanismTree,
    Policies, SigmaMapping,
};
use serde_json::{json, Value};

use crate::commands::{sigma_cap, tolerances};
use crate::input::Gathered;
use crate::output::Output;
use crate::{CliConfig, CliError, EXIT_VALIDATION};

/// Largest action set for which deviation maps are enumerated directly.
const MAP_ENUMERATION_LIMIT: usize = 4;

#[derive(Default)]
struct Checks(Vec<Value>);

impl Checks {
    fn push(&mut self, name: &str, ok: Option<bool>, detail: impl Into<String>) {
        self.0.push(json!({ "name": name, "ok": ok, "detail": detail.into() }));
    }

    fn pass_fail(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.push(name, Some(ok), detail);
    }

    fn failures(&self) -> usize {
        self.0.iter().filter(|c| c["ok"] == json!(false)).count()
    }
}

fn solver(e: LpError) -> CliError {
    CliError::Solver(e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub(crate) fn run(g: &Gathered, cfg: &CliConfig, backend: Backend) -> Result<Output, CliError> {
    let inst = &g.instance;
    let tol = cfg.tolerance;
    let mut checks = Checks::default();
    checks.pass_fail("instance_valid", true, "probabilities and payoff shapes are consistent");

    let mut claimed = None;
    if let Some(sol) = &g.solution {
        claimed = solution_checks(inst, sol, cfg, backend, &mut checks)?;
    }
    let mut principal_value = None;
    if let Some(mv) = &g.mechanism {
        principal_value = mechanism_checks(inst, mv, claimed, cfg, &mut checks);
    }
    dominance_chain(inst, cfg, backend, &mut checks)?;

    let failed = checks.failures();
    let report = json!({
        "ok": failed == 0,
        "failed": failed,
        "principal_value": principal_value,
        "checks": checks.0,
        "tolerance": tol,
    });
    let mut out = Output::json(report);
    if failed > 0 {
        out.code = EXIT_VALIDATION;
        out.diagnostic = Some(format!("{failed} check(s) failed"));
    }
    Ok(out)
}

fn parse_policies(inst: &Instance, v: &Value) -> Result<Policies, CliError> {
    let p: Policies = serde_json::from_value(v.clone())
        .map_err(|e| CliError::Validation(format!("malformed policies: {e}")))?;
    let shaped = p.len() == inst.n_types()
        && p.iter().all(|branch| {
            branch.len() == inst.n_states() && branch.iter().all(|row| row.len() == inst.n_actions())
        });
    if !shaped {
        return Err(CliError::Validation("policies do not match the instance shape".into()));
    }
    Ok(p)
}

fn flatten(layout: &PolicyLayout, p: &Policies, n_vars: usize) -> Vec<f64> {
    let mut x = vec![0.0; n_vars];
    for (t, branch) in p.iter().enumerate() {
        for (s, row) in branch.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                x[layout.var(t, s, a).0] = v;
            }
        }
    }
    x
}

fn residual_check(checks: &mut Checks, lp: &LinearProgram, x: &[f64], tol: f64) {
    let viol = lp.max_violation(x);
    checks.pass_fail("lp_feasibility", viol <= tol, format!("max relative violation {viol:e}"));
}

fn marginals_check(checks: &mut Checks, inst: &Instance, p: &Policies, tol: f64) {
    let mut worst: f64 = 0.0;
    for branch in p {
        for (s, row) in branch.iter().enumerate() {
            worst = worst.max((row.iter().sum::<f64>() - inst.prior()[s]).abs());
            worst = row.iter().fold(worst, |w, &v| w.max(-v));
        }
    }
    checks.pass_fail("policy_marginals", worst <= tol, format!("max deviation {worst:e}"));
}

/// Checks a solver output; returns the value a synthesized mechanism must reach.
fn solution_checks(
    inst: &Instance,
    sol: &Value,
    cfg: &CliConfig,
    backend: Backend,
    checks: &mut Checks,
) -> Result<Option<f64>, CliError> {
    let tol = cfg.tolerance;
    let kind = sol["kind"].as_str().unwrap_or_default();
    let value = sol["value"]
        .as_f64()
        .ok_or_else(|| CliError::Validation("solver output has no numeric 'value'".into()))?;
    let (resolved, realized) = match kind {
        "noncredible" => {
            let p = parse_policies(inst, &sol["policies"])?;
            marginals_check(checks, inst, &p, tol);
            let identity = SigmaMapping::identity(inst.n_types());
            let pv = policy_value(inst, &p, &identity);
            checks.pass_fail("policy_value", close(pv, value, tol), format!("policies yield {pv}, claimed {value}"));
            let lin = linearization_feasible(inst, &p, tol, backend).map_err(solver)?;
            checks.pass_fail("linearized_constraints", lin, "auxiliary variables admit a feasible assignment");
            if inst.n_actions() <= MAP_ENUMERATION_LIMIT {
                let maps = satisfies_deviation_maps(inst, &p, tol);
                checks.pass_fail("deviation_maps", maps, "every report and action remapping enumerated");
                checks.pass_fail("linearization_agreement", maps == lin, "enumeration and linearization agree");
            } else {
                checks.push("deviation_maps", None, "too many actions to enumerate remappings");
            }
            (solve_noncredible_with(inst, backend).map_err(solver)?.0, false)
        }
        "ic" => {
            let p = parse_policies(inst, &sol["policies"])?;
            marginals_check(checks, inst, &p, tol);
            let (lp, layout) = credible_ic_lp(inst);
            residual_check(checks, &lp, &flatten(&layout, &p, lp.n_vars()), tol);
            let pv = policy_value(inst, &p, &SigmaMapping::identity(inst.n_types()));
            checks.pass_fail("policy_value", close(pv, value, tol), format!("policies yield {pv}, claimed {value}"));
            (solve_credible_ic_with(inst, backend).map_err(solver)?.0, true)
        }
        "es_bruteforce" => {
            let p = parse_policies(inst, &sol["policies"])?;
            let labels: Vec<String> = serde_json::from_value(sol["sigma"].clone())
                .map_err(|e| CliError::Validation(format!("malformed sigma: {e}")))?;
            let sigma = SigmaMapping(
                labels
                    .iter()
                    .map(|l| inst.type_index(l).map_err(|e| CliError::Validation(e.to_string())))
                    .collect::<Result<_, _>>()?,
            );
            if sigma.0.len() != inst.n_types() {
                return Err(CliError::Validation("sigma must map every type".into()));
            }
            marginals_check(checks, inst, &p, tol);
            let (lp, layout) = es_sigma_lp(inst, &sigma);
            residual_check(checks, &lp, &flatten(&layout, &p, lp.n_vars()), tol);
            let pv = policy_value(inst, &p, &sigma);
            checks.pass_fail("policy_value", close(pv, value, tol), format!("policies yield {pv}, claimed {value}"));
            let per_sigma = solve_es_sigma(inst, &sigma, backend).map_err(solver)?;
            let best = per_sigma.map_or(f64::NEG_INFINITY, |(v, _)| v);
            checks.pass_fail(
                "mapping_optimality",
                close(best, value, tol),
                format!("re-solved mapping gives {best}"),
            );
            (value, false)
        }
        "enses" => {
            let s: EnsesSolution = serde_json::from_value(sol["solution"].clone())
                .map_err(|e| CliError::Validation(format!("malformed EnSES solution: {e}")))?;
            if s.n_types() != inst.n_types() {
                return Err(CliError::Validation("EnSES solution does not match the instance".into()));
            }
            let bad = s.invariant_violations(inst, tol);
            let detail = bad.first().cloned().unwrap_or_else(|| "all invariants hold".into());
            checks.pass_fail("enses_invariants", bad.is_empty(), detail);
            let (lp, layout) = enses_lp(inst);
            let x = s.to_assignment(&layout);
            residual_check(checks, &lp, &x, tol);
            let obj = lp.objective_at(&x);
            checks.pass_fail("objective", close(obj, value, tol), format!("assignment yields {obj}, claimed {value}"));
            (solve_enses_with(inst, backend).map_err(solver)?.0, true)
        }
        other => return Err(CliError::Usage(format!("unknown solution kind '{other}'"))),
    };
    checks.pass_fail("optimality", close(resolved, value, tol), format!("re-solved value {resolved}"));
    Ok(realized.then_some(value))
}

/// Returns the evaluated principal value when the mechanism is usable.
fn mechanism_checks(
    inst: &Instance,
    mv: &Value,
    claimed: Option<f64>,
    cfg: &CliConfig,
    checks: &mut Checks,
) -> Option<f64> {
    let tol = cfg.tolerance;
    let mech = match MechanismTree::from_json(inst, mv) {
        Ok(m) => m,
        Err(e) => {
            checks.pass_fail("mechanism_valid", false, e.to_string());
            return None;
        }
    };
    let report = validate_mechanism(inst, &mech);
    checks.pass_fail("mechanism_valid", report.is_ok(), report.to_string());
    if !report.is_ok() {
        return None;
    }
    let t = tolerances(cfg);
    let eval = evaluate_with(inst, &mech, t);
    if let Some(v) = claimed {
        checks.pass_fail(
            "mechanism_realizes_value",
            close(eval.principal_value, v, tol),
            format!("evaluates to {}, solver claimed {v}", eval.principal_value),
        );
    }

    let cap = cfg.cap.unwrap_or(DEFAULT_PROFILE_CAP);
    let mut worst: f64 = 0.0;
    let mut skipped = None;
    for ty in 0..inst.n_types() {
        match brute_force_response_with(inst, &mech, ty, cap, t) {
            Ok(bf) => worst = worst.max((bf - best_response_index(inst, &mech, ty, t).agent_value).abs()),
            Err(e) => {
                skipped = Some(e.to_string());
                break;
            }
        }
    }
    match skipped {
        Some(why) => checks.push("oracle_equivalence", None, why),
        None => checks.pass_fail(
            "oracle_equivalence",
            worst <= tol,
            format!("max gap between backward induction and enumeration {worst:e}"),
        ),
    }

    match check_multistage_ic(inst, &mech, tol) {
        Ok(r) => {
            let detail = r.violations.first().cloned().unwrap_or_else(|| "menu IC, DIC at every stage".into());
            checks.pass_fail("multistage_ic", r.all_ok(), detail);
        }
        Err(AgentError::ShapeMismatch(why)) => checks.push("multistage_ic", None, format!("not in the four-stage shape: {why}")),
        Err(e) => checks.pass_fail("multistage_ic", false, e.to_string()),
    }
    Some(eval.principal_value)
}

fn dominance_chain(inst: &Instance, cfg: &CliConfig, backend: Backend, checks: &mut Checks) -> Result<(), CliError> {
    let tol = cfg.tolerance;
    let enses = solve_enses_with(inst, backend).map_err(solver)?.0;
    let ic = solve_credible_ic_with(inst, backend).map_err(solver)?.0;
    match es_bruteforce_with(inst, sigma_cap(cfg), backend) {
        Ok(es) => checks.pass_fail(
            "dominance_chain",
            enses >= es.value - tol && es.value >= ic - tol,
            format!("enses {enses} >= es {} >= ic {ic}", es.value),
        ),
        Err(LpError::ExplosionCap { .. }) => checks.pass_fail(
            "dominance_chain",
            enses >= ic - tol,
            format!("enses {enses} >= ic {ic} (too many mappings for es)"),
        ),
        Err(e) => return Err(solver(e)),
    }
    Ok(())
}
