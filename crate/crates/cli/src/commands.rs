use persuade_core::agent::{best_response_index, evaluate_with};
use persuade_core::lp::{
    credible_ic_lp, enses_lp, es_bruteforce_with, es_sigma_lp, noncredible_lp, solve_credible_ic_with,
    solve_enses_with, solve_noncredible_with, to_cplex_lp, DEFAULT_SIGMA_CAP,
};
use persuade_core::model::ZERO_MASS;
use persuade_core::{
    enses_tree, example_instance, example_mechanism, ic_two_stage_tree, reduce_mis, Backend, ExampleId, Instance,
    LinearProgram, LpError, MechanismId, MechanismTree, Policies, SynthesisOptions, Tolerances,
};
use serde_json::{json, Value};

use crate::input::{gather, load_graph, params, random_bundle, Stdin};
use crate::output::Output;
use crate::{verify, Cli, CliConfig, CliError, Command, ExampleKind, SolveKind};

pub(crate) fn dispatch(cli: &Cli, stdin: &mut Stdin) -> Result<Output, CliError> {
    let cfg = &cli.config;
    match &cli.command {
        Command::Solve {
            kind,
            instance,
            lp_dump,
        } => {
            let inputs: Vec<String> = instance.iter().cloned().collect();
            let inst = gather(&inputs, cfg, stdin, false)?.instance;
            solve(*kind, inst, lp_dump.as_deref(), cfg)
        }
        Command::Eval { inputs } => {
            let g = gather(inputs, cfg, stdin, true)?;
            let mech = g.tree()?;
            let report = evaluate_with(&g.instance, &mech, tolerances(cfg));
            let mut v = report.to_json(&g.instance);
            v["mechanism"] = json!(mech.name);
            v["depth"] = json!(mech.depth());
            Ok(Output::json(v))
        }
        Command::BestResponse { inputs } => {
            let label = cfg
                .type_label
                .as_deref()
                .ok_or_else(|| CliError::Usage("best-response needs --type <label>".into()))?;
            let g = gather(inputs, cfg, stdin, true)?;
            let t = g
                .instance
                .type_index(label)
                .map_err(|_| CliError::Usage(format!("unknown type '{label}'")))?;
            let mech = g.tree()?;
            let profile = best_response_index(&g.instance, &mech, t, tolerances(cfg));
            Ok(Output::json(profile.to_json(&g.instance)))
        }
        Command::ReduceMis { graph } => {
            let g = load_graph(graph.as_deref(), stdin)?;
            Ok(Output::json(reduce_mis(&g).to_json()))
        }
        Command::Example { kind, id } => example(*kind, id, cfg),
        Command::Verify { inputs } => {
            let g = gather(inputs, cfg, stdin, true)?;
            verify::run(&g, cfg, backend()?)
        }
        Command::Export { inputs } => {
            let g = gather(inputs, cfg, stdin, true)?;
            let mech = g.tree()?;
            Ok(Output::json(bundle(&mech, &g.instance)).with_tree(mech, g.instance))
        }
    }
}

pub(crate) fn tolerances(cfg: &CliConfig) -> Tolerances {
    Tolerances {
        probability: cfg.tie_tolerance,
        tie: cfg.tie_tolerance,
        zero_mass: ZERO_MASS,
    }
}

pub(crate) fn backend() -> Result<Backend, CliError> {
    Backend::from_env().map_err(|e| CliError::Usage(format!("CP_SOLVER: {e}")))
}

pub(crate) fn sigma_cap(cfg: &CliConfig) -> u64 {
    cfg.cap.unwrap_or(DEFAULT_SIGMA_CAP)
}

fn solver_err(e: LpError) -> CliError {
    CliError::Solver(e.to_string())
}

/// A mechanism with its instance embedded, readable without `--instance`.
pub(crate) fn bundle(mech: &MechanismTree, inst: &Instance) -> Value {
    let mut v = mech.to_json(inst);
    v["instance"] = inst.to_json();
    v
}

fn dump(path: Option<&str>, lp: impl FnOnce() -> LinearProgram) -> Result<(), CliError> {
    if let Some(path) = path {
        std::fs::write(path, to_cplex_lp(&lp()))
            .map_err(|e| CliError::Usage(format!("cannot write LP dump '{path}': {e}")))?;
    }
    Ok(())
}

fn policies_json(p: &Policies) -> Value {
    json!(p)
}

fn solve(kind: SolveKind, inst: Instance, lp_dump: Option<&str>, cfg: &CliConfig) -> Result<Output, CliError> {
    let backend = backend()?;
    let mut out = json!({ "solver": backend.id() });
    let mut tree = None;
    let mut diagnostic = None;
    match kind {
        SolveKind::Noncredible => {
            dump(lp_dump, || noncredible_lp(&inst).0)?;
            let (value, p) = solve_noncredible_with(&inst, backend).map_err(solver_err)?;
            out["kind"] = json!("noncredible");
            out["value"] = json!(value);
            out["policies"] = policies_json(&p);
        }
        SolveKind::Ic => {
            dump(lp_dump, || credible_ic_lp(&inst).0)?;
            let (value, p) = solve_credible_ic_with(&inst, backend).map_err(solver_err)?;
            out["kind"] = json!("ic");
            out["value"] = json!(value);
            out["policies"] = policies_json(&p);
            match ic_two_stage_tree(&inst, &p) {
                Ok(t) => tree = Some(t),
                Err(e) => diagnostic = Some(format!("no mechanism synthesized: {e}")),
            }
        }
        SolveKind::Enses => {
            dump(lp_dump, || enses_lp(&inst).0)?;
            let (value, sol) = solve_enses_with(&inst, backend).map_err(solver_err)?;
            out["kind"] = json!("enses");
            out["value"] = json!(value);
            out["solution"] = serde_json::to_value(&sol).unwrap_or(Value::Null);
            match enses_tree(&inst, &sol, &SynthesisOptions::default()) {
                Ok(t) => tree = Some(t),
                Err(e) => diagnostic = Some(format!("no mechanism synthesized: {e}")),
            }
        }
        SolveKind::EsBruteforce => {
            let r = es_bruteforce_with(&inst, sigma_cap(cfg), backend).map_err(solver_err)?;
            dump(lp_dump, || es_sigma_lp(&inst, &r.sigma).0)?;
            out["kind"] = json!("es_bruteforce");
            out["value"] = json!(r.value);
            out["sigma"] = json!(r.sigma.0.iter().map(|&t| inst.types()[t].clone()).collect::<Vec<_>>());
            out["policies"] = policies_json(&r.policies);
            out["mappings"] = json!(r.mappings);
            out["solved"] = json!(r.solved);
            out["infeasible"] = json!(r.infeasible);
            out["pruned"] = json!(r.pruned);
        }
    }
    if let Some(t) = &tree {
        out["mechanism"] = t.to_json(&inst);
    } else if let Some(d) = &diagnostic {
        out["synthesis_error"] = json!(d);
    }
    out["instance"] = inst.to_json();
    let mut o = Output::json(out);
    o.diagnostic = diagnostic;
    if let Some(t) = tree {
        o = o.with_tree(t, inst);
    }
    Ok(o)
}

fn example(kind: ExampleKind, id: &str, cfg: &CliConfig) -> Result<Output, CliError> {
    let p = params(cfg);
    let bad = |e: persuade_core::InstanceError| CliError::Usage(e.to_string());
    match kind {
        ExampleKind::Instance => {
            let inst = if id == "random" {
                random_bundle(cfg).0
            } else {
                let eid: ExampleId = id.parse().map_err(|_| unknown(id, ExampleId::ALL.iter().map(|e| e.id())))?;
                example_instance(eid, &p).map_err(bad)?
            };
            Ok(Output::json(inst.to_json()))
        }
        ExampleKind::Mechanism => {
            let (inst, mech) = if id == "random" {
                random_bundle(cfg)
            } else {
                let mid: MechanismId =
                    id.parse().map_err(|_| unknown(id, MechanismId::ALL.iter().map(|m| m.id())))?;
                (example_instance(mid.instance(), &p).map_err(bad)?, example_mechanism(mid, &p).map_err(bad)?)
            };
            Ok(Output::json(bundle(&mech, &inst)).with_tree(mech, inst))
        }
    }
}

fn unknown<'a>(id: &str, known: impl Iterator<Item = &'a str>) -> CliError {
    let mut list: Vec<&str> = known.collect();
    list.push("random");
    CliError::Usage(format!("unknown example '{id}' (known: {})", list.join(", ")))
}
