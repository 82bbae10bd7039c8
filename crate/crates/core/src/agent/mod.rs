//! Credible-agent best responses and principal evaluation.
//!
//! Values are carried on the joint scale: at a node reached with state
//! measure `w(θ) = μ(θ)·Π π(g|θ)` an action is worth `Σ_θ w(θ)·u(θ,a)`.
//! Summing children then needs no renormalization, and tie tolerances apply
//! to contributions to the overall expectation rather than to conditional
//! values, so tiny branches cannot have their LP round-off amplified.

mod ic;
mod oracle;

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::mechanism::{path_string, validate_mechanism, MechanismTree, Node, NodeKind, TypeSet};
use crate::model::{argmax_actions_weighted, validate_instance, Belief, Instance, Tolerances};

pub use ic::{check_multistage_ic, MultistageIcReport};
pub use oracle::{brute_force_response, brute_force_response_with, DEFAULT_PROFILE_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("profile enumeration needs {needed} profiles, over the cap of {cap}")]
    ExplosionCap { needed: f64, cap: u64 },
    #[error("mechanism is not in the menu/signal/elicit/signal/leaf shape: {0}")]
    ShapeMismatch(String),
}

/// What the agent does at one reachable decision point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Child index taken at an elicitation or menu node.
    Branch(usize),
    /// Type imitated at a leaf and the action it leads to.
    Leaf { imitated: usize, action: usize },
}

/// One type's deterministic plan on every reachable path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResponseProfile {
    pub true_type: usize,
    pub choices: BTreeMap<String, Choice>,
    pub agent_value: f64,
    /// Principal's expected payoff conditional on this type.
    pub principal_value: f64,
    pub beliefs: BTreeMap<String, Belief>,
}

impl ResponseProfile {
    pub fn to_json(&self, inst: &Instance) -> Value {
        let choices: serde_json::Map<String, Value> = self
            .choices
            .iter()
            .map(|(path, c)| {
                let v = match c {
                    Choice::Branch(i) => json!({ "branch": i }),
                    Choice::Leaf { imitated, action } => json!({
                        "imitated": inst.types()[*imitated],
                        "action": inst.actions()[*action],
                    }),
                };
                (path.clone(), v)
            })
            .collect();
        let beliefs: serde_json::Map<String, Value> = self
            .beliefs
            .iter()
            .map(|(p, b)| (p.clone(), json!(b.0)))
            .collect();
        json!({
            "true_type": inst.types()[self.true_type],
            "agent_value": self.agent_value,
            "principal_value": self.principal_value,
            "choices": choices,
            "beliefs": beliefs,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub principal_value: f64,
    /// Indexed by type.
    pub per_type: Vec<ResponseProfile>,
    /// Support of the posterior at every positive-probability node.
    pub trace: BTreeMap<String, Vec<usize>>,
}

impl EvaluationReport {
    pub fn to_json(&self, inst: &Instance) -> Value {
        let mut per_type = serde_json::Map::new();
        let mut profiles = serde_json::Map::new();
        for p in &self.per_type {
            let name = inst.types()[p.true_type].clone();
            per_type.insert(
                name.clone(),
                json!({
                    "agent_value": p.agent_value,
                    "principal_value": p.principal_value,
                    "probability": inst.type_dist()[p.true_type],
                }),
            );
            profiles.insert(name, p.to_json(inst));
        }
        let trace: serde_json::Map<String, Value> = self
            .trace
            .iter()
            .map(|(path, s)| {
                let labels: Vec<&str> = s.iter().map(|&i| inst.states()[i].as_str()).collect();
                (path.clone(), json!(labels))
            })
            .collect();
        json!({
            "principal_value": self.principal_value,
            "per_type": per_type,
            "profiles": profiles,
            "trace": trace,
        })
    }
}

fn check_inputs(inst: &Instance, mech: &MechanismTree) -> Result<(), AgentError> {
    let report = validate_instance(inst);
    if !report.is_ok() {
        return Err(AgentError::InvalidInstance(report.to_string()));
    }
    let report = validate_mechanism(inst, mech);
    if !report.is_ok() {
        return Err(AgentError::InvalidMechanism(report.to_string()));
    }
    Ok(())
}

/// Picks among `(agent, principal)` value pairs listed in index order: agent
/// optimal within `tol`, then principal optimal within `tol`, then first.
pub(crate) fn select(options: &[(f64, f64)], tol: f64) -> usize {
    let best_u = options
        .iter()
        .map(|o| o.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_p = options
        .iter()
        .filter(|o| o.0 >= best_u - tol)
        .map(|o| o.1)
        .fold(f64::NEG_INFINITY, f64::max);
    options
        .iter()
        .position(|o| o.0 >= best_u - tol && o.1 >= best_p - tol)
        .expect("nonempty option list")
}

/// Action a credible agent plays when acting as `imitated` under state
/// measure `w`: the recommendation if it is optimal for `imitated`, otherwise
/// the principal's favorite among `imitated`'s optimal actions.
pub(crate) fn leaf_action(
    inst: &Instance,
    w: &[f64],
    imitated: usize,
    recommend: Option<usize>,
    tol: f64,
) -> usize {
    let best = argmax_actions_weighted(inst, w, imitated, tol);
    if let Some(r) = recommend {
        if best.contains(&r) {
            return r;
        }
    }
    let values: Vec<(f64, f64)> = best
        .iter()
        .map(|&a| (0.0, inst.principal_utility(w, a)))
        .collect();
    best[select(&values, tol)]
}

/// Joint-scale (agent, principal) value of imitating each candidate at a leaf.
pub(crate) fn leaf_options(
    inst: &Instance,
    w: &[f64],
    t: usize,
    cand: &TypeSet,
    recommend: Option<usize>,
    tol: f64,
) -> Vec<(usize, usize, f64, f64)> {
    cand.iter()
        .map(|&tp| {
            let a = leaf_action(inst, w, tp, recommend, tol);
            (tp, a, inst.agent_utility(w, t, a), inst.principal_utility(w, a))
        })
        .collect()
}

/// Candidate set after choosing option `k` at an elicitation node.
pub(crate) fn narrow(cand: &TypeSet, option: &[usize]) -> TypeSet {
    option.iter().copied().filter(|t| cand.contains(t)).collect()
}

struct Solver<'a> {
    inst: &'a Instance,
    t: usize,
    tol: Tolerances,
    choices: BTreeMap<String, Choice>,
    beliefs: BTreeMap<String, Belief>,
}

impl Solver<'_> {
    /// Returns joint-scale (agent, principal) values of the subtree and
    /// records the chosen plan. Choices in subtrees that end up unchosen are
    /// removed again by the caller, so only plan-reachable paths remain.
    fn solve(&mut self, node: &Node, w: &[f64], cand: &TypeSet, path: &mut Vec<usize>) -> (f64, f64) {
        let key = path_string(path);
        if let Some(b) = Belief::from_weights(w) {
            self.beliefs.insert(key.clone(), b);
        }
        match &node.kind {
            NodeKind::Leaf { recommend } => {
                let opts = leaf_options(self.inst, w, self.t, cand, *recommend, self.tol.tie);
                let pairs: Vec<(f64, f64)> = opts.iter().map(|o| (o.2, o.3)).collect();
                let k = select(&pairs, self.tol.tie);
                self.choices.insert(
                    key,
                    Choice::Leaf {
                        imitated: opts[k].0,
                        action: opts[k].1,
                    },
                );
                (opts[k].2, opts[k].3)
            }
            NodeKind::Signal { strategy, children } => {
                let mut total = (0.0, 0.0);
                for (g, child) in children.iter().enumerate() {
                    let cw = strategy.child_weights(w, g);
                    if cw.iter().sum::<f64>() <= self.tol.zero_mass {
                        continue;
                    }
                    path.push(g);
                    let (u, p) = self.solve(child, &cw, cand, path);
                    path.pop();
                    total.0 += u;
                    total.1 += p;
                }
                total
            }
            NodeKind::Elicit { options, children } => {
                let branches: Vec<(usize, TypeSet)> = options
                    .iter()
                    .enumerate()
                    .map(|(k, o)| (k, narrow(cand, o)))
                    .filter(|(_, c)| !c.is_empty())
                    .collect();
                self.branch(&key, children, w, path, branches)
            }
            NodeKind::Menu { children } => {
                let branches = (0..children.len()).map(|k| (k, cand.clone())).collect();
                self.branch(&key, children, w, path, branches)
            }
        }
    }

    fn branch(
        &mut self,
        key: &str,
        children: &[Node],
        w: &[f64],
        path: &mut Vec<usize>,
        branches: Vec<(usize, TypeSet)>,
    ) -> (f64, f64) {
        let mut values = Vec::with_capacity(branches.len());
        for (k, c) in &branches {
            path.push(*k);
            values.push(self.solve(&children[*k], w, c, path));
            path.pop();
        }
        let pick = select(&values, self.tol.tie);
        let chosen = branches[pick].0;
        for (k, _) in &branches {
            if *k != chosen {
                let prefix = format!("{key}/{k}");
                let under = |p: &String| p == &prefix || p.starts_with(&format!("{prefix}/"));
                self.choices.retain(|p, _| !under(p));
                self.beliefs.retain(|p, _| !under(p));
            }
        }
        self.choices.insert(key.to_string(), Choice::Branch(chosen));
        values[pick]
    }
}

/// Best response of type `t` by backward induction.
pub fn best_response(inst: &Instance, mech: &MechanismTree, t: &str) -> Result<ResponseProfile, AgentError> {
    let ti = inst
        .type_index(t)
        .map_err(|_| AgentError::UnknownType(t.to_string()))?;
    check_inputs(inst, mech)?;
    Ok(best_response_index(inst, mech, ti, Tolerances::default()))
}

/// [`best_response`] by type index, skipping validation.
pub fn best_response_index(inst: &Instance, mech: &MechanismTree, t: usize, tol: Tolerances) -> ResponseProfile {
    let mut solver = Solver {
        inst,
        t,
        tol,
        choices: BTreeMap::new(),
        beliefs: BTreeMap::new(),
    };
    let all: TypeSet = (0..inst.n_types()).collect();
    let (u, p) = solver.solve(&mech.root, inst.prior(), &all, &mut Vec::new());
    ResponseProfile {
        true_type: t,
        choices: solver.choices,
        agent_value: u,
        principal_value: p,
        beliefs: solver.beliefs,
    }
}

/// Principal's expected payoff when every type best-responds.
pub fn evaluate(inst: &Instance, mech: &MechanismTree) -> Result<EvaluationReport, AgentError> {
    check_inputs(inst, mech)?;
    Ok(evaluate_with(inst, mech, Tolerances::default()))
}

pub fn evaluate_with(inst: &Instance, mech: &MechanismTree, tol: Tolerances) -> EvaluationReport {
    let per_type: Vec<ResponseProfile> = (0..inst.n_types())
        .map(|t| best_response_index(inst, mech, t, tol))
        .collect();
    let principal_value = per_type
        .iter()
        .map(|p| inst.type_dist()[p.true_type] * p.principal_value)
        .sum();
    let mut trace = BTreeMap::new();
    collect_trace(&mech.root, inst.prior(), tol.zero_mass, &mut Vec::new(), &mut trace);
    EvaluationReport {
        principal_value,
        per_type,
        trace,
    }
}

fn collect_trace(
    node: &Node,
    w: &[f64],
    zero: f64,
    path: &mut Vec<usize>,
    out: &mut BTreeMap<String, Vec<usize>>,
) {
    let support: Vec<usize> = (0..w.len()).filter(|&s| w[s] > 0.0).collect();
    out.insert(path_string(path), support);
    for (i, child) in node.children().iter().enumerate() {
        let cw = match &node.kind {
            NodeKind::Signal { strategy, .. } => strategy.child_weights(w, i),
            _ => w.to_vec(),
        };
        if cw.iter().sum::<f64>() <= zero {
            continue;
        }
        path.push(i);
        collect_trace(child, &cw, zero, path, out);
        path.pop();
    }
}

/// Replaces every signaling node with a single uninformative signal.
pub fn strip_information(node: &Node) -> Node {
    let mut out = node.clone();
    strip_in_place(&mut out);
    out
}

fn strip_in_place(node: &mut Node) {
    if let NodeKind::Signal { strategy, children } = &node.kind {
        let mut child = children[0].clone();
        strip_in_place(&mut child);
        let n = strategy.probs.len();
        *node = Node::signal(crate::model::SignalStrategy::constant("g", n), vec![child]);
        return;
    }
    match &mut node.kind {
        NodeKind::Elicit { children, .. } | NodeKind::Menu { children } => {
            children.iter_mut().for_each(strip_in_place)
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_instance, example_mechanism, ExampleId, ExampleParams, MechanismId};

    fn pair(e: ExampleId, m: MechanismId, p: &ExampleParams) -> (Instance, MechanismTree) {
        (example_instance(e, p).unwrap(), example_mechanism(m, p).unwrap())
    }

    #[test]
    fn ex1_trade_t1_imitates_t2() {
        let (inst, mech) = pair(ExampleId::Ex1, MechanismId::Ex1Trade, &ExampleParams::default());
        let prof = best_response(&inst, &mech, "t1").unwrap();
        assert!((prof.agent_value - 3.0).abs() < 1e-12);
        assert_eq!(prof.choices["root"], Choice::Branch(1));
        let c = inst.action_index("c").unwrap();
        let d = inst.action_index("d").unwrap();
        let t2 = inst.type_index("t2").unwrap();
        assert_eq!(prof.choices["root/1/0"], Choice::Leaf { imitated: t2, action: c });
        assert_eq!(prof.choices["root/1/1"], Choice::Leaf { imitated: t2, action: d });
        assert!(!prof.choices.contains_key("root/0"));
        assert!((evaluate(&inst, &mech).unwrap().principal_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ex1_without_revelation_drops_to_five_halves() {
        let (inst, mech) = pair(ExampleId::Ex1, MechanismId::Ex1Trade, &ExampleParams::default());
        let stripped = MechanismTree::new("stripped", strip_information(&mech.root));
        let prof = best_response(&inst, &stripped, "t1").unwrap();
        assert!((prof.agent_value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ex4_t0_denies_then_imitates() {
        let (inst, mech) = pair(ExampleId::Ex4, MechanismId::Ex4Pie, &ExampleParams::default());
        let prof = best_response(&inst, &mech, "t0").unwrap();
        assert!(prof.agent_value.abs() < 1e-12);
        assert_eq!(prof.choices["root"], Choice::Branch(1));
        let t1 = inst.type_index("t1").unwrap();
        let t2 = inst.type_index("t2").unwrap();
        let ap = inst.action_index("a'").unwrap();
        let bp = inst.action_index("b'").unwrap();
        assert_eq!(prof.choices["root/1/0/0"], Choice::Leaf { imitated: t1, action: ap });
        assert_eq!(prof.choices["root/1/1/1"], Choice::Leaf { imitated: t2, action: bp });
        assert!((evaluate(&inst, &mech).unwrap().principal_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_leaf_plays_prior_optimum() {
        let inst = crate::instances::random_instance(7, 3, 2, 3, (-1.0, 1.0));
        let mech = MechanismTree::new("leaf", Node::leaf());
        for t in 0..inst.n_types() {
            let prof = best_response_index(&inst, &mech, t, Tolerances::default());
            let best = (0..inst.n_actions())
                .map(|a| inst.agent_utility(inst.prior(), t, a))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((prof.agent_value - best).abs() < 1e-12);
        }
    }

    #[test]
    fn ex2_both_types_report_t0() {
        let (inst, mech) = pair(ExampleId::Ex2, MechanismId::Ex2Ses, &ExampleParams::default());
        let report = evaluate(&inst, &mech).unwrap();
        assert!((report.principal_value - 5.0 / 6.0).abs() < 1e-12);
        for prof in &report.per_type {
            assert_eq!(prof.choices["root/1"], Choice::Branch(0));
        }
        let t1 = &report.per_type[1];
        assert!((t1.agent_value - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ex3_non_binding_tree_value() {
        let p = ExampleParams::default();
        let (inst, mech) = pair(ExampleId::Ex3, MechanismId::Ex3Fig2, &p);
        let report = evaluate(&inst, &mech).unwrap();
        let delta = p.ex3_delta();
        assert!((report.principal_value - (1.0 - delta / 3.0)).abs() < 1e-9);
        assert_eq!(report.per_type[0].choices["root"], Choice::Branch(0));
        assert_eq!(report.per_type[1].choices["root"], Choice::Branch(1));
    }

    #[test]
    fn ex5_value_one() {
        for n in 3..=5 {
            let p = ExampleParams { n, ..ExampleParams::default() };
            let (inst, mech) = pair(ExampleId::Ex5, MechanismId::Ex5Pie, &p);
            let v = evaluate(&inst, &mech).unwrap().principal_value;
            assert!((v - 1.0).abs() < 1e-9, "n={n}: {v}");
        }
    }

    #[test]
    fn leaf_choices_are_credible() {
        let (inst, mech) = pair(ExampleId::Ex3, MechanismId::Ex3Fig2, &ExampleParams::default());
        let report = evaluate(&inst, &mech).unwrap();
        for prof in &report.per_type {
            for (path, c) in &prof.choices {
                if let Choice::Leaf { imitated, action } = c {
                    let b = &prof.beliefs[path];
                    assert!(crate::model::argmax_actions(&inst, b, *imitated).contains(action));
                }
            }
        }
    }

    #[test]
    fn trace_support_reflects_signals() {
        let (inst, mech) = pair(ExampleId::Ex1, MechanismId::Ex1Trade, &ExampleParams::default());
        let report = evaluate(&inst, &mech).unwrap();
        assert_eq!(report.trace["root"], vec![0, 1]);
        assert_eq!(report.trace["root/1/0"], vec![0]);
        assert_eq!(report.trace["root/1/1"], vec![1]);
    }

    #[test]
    fn unknown_type_and_invalid_tree() {
        let (inst, mech) = pair(ExampleId::Ex1, MechanismId::Ex1Trade, &ExampleParams::default());
        assert!(matches!(best_response(&inst, &mech, "zz"), Err(AgentError::UnknownType(_))));
        let bad = MechanismTree::new("bad", Node::elicit(vec![vec![0]], vec![Node::leaf()]));
        assert!(matches!(evaluate(&inst, &bad), Err(AgentError::InvalidMechanism(_))));
    }

    #[test]
    fn select_breaks_ties_toward_principal_then_index() {
        assert_eq!(select(&[(1.0, 0.0), (1.0, 1.0), (1.0, 1.0)], 1e-9), 1);
        assert_eq!(select(&[(0.5, 9.0), (1.0, 0.0)], 1e-9), 1);
        assert_eq!(select(&[(1.0, 0.0), (1.0 - 1e-12, 0.0)], 1e-9), 0);
    }
}
