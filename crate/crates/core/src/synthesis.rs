//! Executable trees from LP solutions, and the independent-set policy.

use thiserror::Error;

use crate::instances::Graph;
use crate::lp::{EnsesSolution, Policies};
use crate::mechanism::{MechanismTree, Node};
use crate::model::{Instance, SignalStrategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("zero recommendation mass but nonzero action mass at {0}")]
    DivisionDegeneracy(String),
    #[error("policies violate the IC constraints: {0}")]
    InfeasiblePolicies(String),
    #[error("vertices {0} and {1} are adjacent")]
    NotIndependent(usize, usize),
    #[error("solution does not match the instance: {0}")]
    Shape(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZeroBranchPolicy {
    #[default]
    Prune,
    Keep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub zero_branch_policy: ZeroBranchPolicy,
    pub tolerance: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            zero_branch_policy: ZeroBranchPolicy::Prune,
            tolerance: 1e-9,
        }
    }
}

/// Normalizes `row` over the columns in `keep`; an all-zero row becomes a
/// point mass on the first kept column.
fn conditional_row(row: &[f64], keep: &[usize]) -> Vec<f64> {
    let kept: Vec<f64> = keep.iter().map(|&c| row[c].max(0.0)).collect();
    let total: f64 = kept.iter().sum();
    if total > 0.0 {
        kept.iter().map(|x| x / total).collect()
    } else {
        let mut out = vec![0.0; keep.len()];
        out[0] = 1.0;
        out
    }
}

/// Builds the menu / type-recommendation / direct-report /
/// action-recommendation tree that realizes an EnSES solution.
pub fn enses_tree(inst: &Instance, sol: &EnsesSolution, opts: &SynthesisOptions) -> Result<MechanismTree, SynthesisError> {
    let (n, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    if sol.pi.len() != n || sol.pi.iter().any(|p| p.len() != ns) || sol.phi.len() != n {
        return Err(SynthesisError::Shape(format!(
            "expected {n} types and {ns} states"
        )));
    }
    let tol = opts.tolerance;
    let t = inst.types();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..ns {
                    if sol.pi[i][s][j] < tol && sol.phi[i][j][k][s].iter().any(|x| *x > tol.max(1e-7)) {
                        return Err(SynthesisError::DivisionDegeneracy(format!(
                            "({},{},{}) in state {}",
                            t[i],
                            t[j],
                            t[k],
                            inst.states()[s]
                        )));
                    }
                }
            }
        }
    }
    let keep_all = opts.zero_branch_policy == ZeroBranchPolicy::Keep;
    let mut menu = Vec::with_capacity(n);
    for i in 0..n {
        let live: Vec<usize> = (0..n)
            .filter(|&j| keep_all || (0..ns).any(|s| sol.pi[i][s][j] >= tol))
            .collect();
        let live = if live.is_empty() { vec![i] } else { live };
        let rows: Vec<Vec<f64>> = (0..ns).map(|s| conditional_row(&sol.pi[i][s], &live)).collect();
        let type_signals = SignalStrategy::new(live.iter().map(|&j| t[j].clone()).collect(), rows);
        let mut elicits = Vec::with_capacity(live.len());
        for &j in &live {
            let mut reports = Vec::with_capacity(n);
            for k in 0..n {
                let phi = &sol.phi[i][j][k];
                let reachable = |s: usize| sol.pi[i][s][j] >= tol;
                let acts: Vec<usize> = (0..na)
                    .filter(|&a| keep_all || (0..ns).any(|s| reachable(s) && phi[s][a] >= tol))
                    .collect();
                let acts = if acts.is_empty() { vec![0] } else { acts };
                let rows: Vec<Vec<f64>> = (0..ns)
                    .map(|s| {
                        if reachable(s) {
                            conditional_row(&phi[s], &acts)
                        } else if keep_all {
                            vec![1.0 / acts.len() as f64; acts.len()]
                        } else {
                            conditional_row(&vec![0.0; na], &acts)
                        }
                    })
                    .collect();
                let strat = SignalStrategy::new(acts.iter().map(|&a| inst.actions()[a].clone()).collect(), rows);
                let leaves = acts.iter().map(|&a| Node::recommend(a)).collect();
                reports.push(Node::signal(strat, leaves).named(format!("S[{},{},{}]", t[i], t[j], t[k])));
            }
            let options = (0..n).map(|k| vec![k]).collect();
            elicits.push(Node::elicit(options, reports).named(format!("E[{},{}]", t[i], t[j])));
        }
        menu.push(Node::signal(type_signals, elicits).named(format!("S[{}]", t[i])));
    }
    Ok(MechanismTree::new("enses", Node::menu(menu).named("menu")))
}

/// Tolerance used by [`ic_two_stage_tree`] when checking the policies,
/// relative to the scale of each constraint.
const POLICY_TOLERANCE: f64 = 1e-6;

/// Direct elicitation followed by one action-recommendation signal per
/// reported type.
pub fn ic_two_stage_tree(inst: &Instance, policies: &Policies) -> Result<MechanismTree, SynthesisError> {
    let (n, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    if policies.len() != n || policies.iter().any(|p| p.len() != ns || p.iter().any(|r| r.len() != na)) {
        return Err(SynthesisError::Shape("policy tensor has the wrong shape".into()));
    }
    check_ic_policies(inst, policies)?;
    let mut branches = Vec::with_capacity(n);
    for (t, pol) in policies.iter().enumerate() {
        let acts: Vec<usize> = (0..na).filter(|&a| (0..ns).any(|s| pol[s][a] > 1e-12)).collect();
        let acts = if acts.is_empty() { vec![0] } else { acts };
        let rows = (0..ns).map(|s| conditional_row(&pol[s], &acts)).collect();
        let strat = SignalStrategy::new(acts.iter().map(|&a| inst.actions()[a].clone()).collect(), rows);
        let leaves = acts.iter().map(|&a| Node::recommend(a)).collect();
        branches.push(Node::signal(strat, leaves).named(format!("S[{}]", inst.types()[t])));
    }
    let options = (0..n).map(|t| vec![t]).collect();
    Ok(MechanismTree::new("ic_two_stage", Node::elicit(options, branches)))
}

fn check_ic_policies(inst: &Instance, policies: &Policies) -> Result<(), SynthesisError> {
    let (n, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    let infeasible = |m: String| Err(SynthesisError::InfeasiblePolicies(m));
    let scale = (0..n)
        .flat_map(|t| (0..ns).flat_map(move |s| (0..na).map(move |a| (t, s, a))))
        .map(|(t, s, a)| inst.u(t, s, a).abs())
        .fold(1.0, f64::max);
    for (t, pol) in policies.iter().enumerate() {
        for (s, row) in pol.iter().enumerate() {
            if let Some(x) = row.iter().find(|x| **x < -POLICY_TOLERANCE) {
                return infeasible(format!("negative mass {x} for {} in {}", inst.types()[t], inst.states()[s]));
            }
            let sum: f64 = row.iter().sum();
            if (sum - inst.prior()[s]).abs() > POLICY_TOLERANCE {
                return infeasible(format!(
                    "branch {} puts mass {sum} on state {}",
                    inst.types()[t],
                    inst.states()[s]
                ));
            }
        }
        for a in 0..na {
            let w: Vec<f64> = (0..ns).map(|s| pol[s][a]).collect();
            let got = inst.agent_utility(&w, t, a);
            for b in 0..na {
                if inst.agent_utility(&w, t, b) > got + POLICY_TOLERANCE * scale {
                    return infeasible(format!(
                        "{} prefers {} over the recommended {}",
                        inst.types()[t],
                        inst.actions()[b],
                        inst.actions()[a]
                    ));
                }
            }
        }
    }
    let value = |t: usize, branch: usize| -> f64 {
        let mut v = 0.0;
        for s in 0..ns {
            for a in 0..na {
                v += policies[branch][s][a] * inst.u(t, s, a);
            }
        }
        v
    };
    for t in 0..n {
        let own = value(t, t);
        for other in 0..n {
            if value(t, other) > own + POLICY_TOLERANCE * scale {
                return infeasible(format!(
                    "{} gains by reporting {}",
                    inst.types()[t],
                    inst.types()[other]
                ));
            }
        }
    }
    Ok(())
}

/// The policy for the independent-set gadget: reporting a vertex type reveals
/// nothing; reporting `t_star` recommends `a_v` (first state) or `b_v`
/// (second state) for `v` uniform over `set`.
pub fn mis_policy_tree(graph: &Graph, set: &[usize]) -> Result<MechanismTree, SynthesisError> {
    let n = graph.n();
    let mut vs: Vec<usize> = set.to_vec();
    vs.sort_unstable();
    vs.dedup();
    if let Some(&v) = vs.iter().find(|&&v| v >= n) {
        return Err(SynthesisError::Shape(format!("vertex {v} out of range")));
    }
    for (i, &u) in vs.iter().enumerate() {
        if let Some(&v) = vs[i + 1..].iter().find(|&&v| graph.adjacent(u, v)) {
            return Err(SynthesisError::NotIndependent(u, v));
        }
    }
    let mut branches: Vec<Node> = (0..n).map(|_| Node::leaf()).collect();
    let star = if vs.is_empty() {
        Node::leaf()
    } else {
        let k = vs.len();
        let signals: Vec<String> = vs
            .iter()
            .map(|v| format!("a_v{}", v + 1))
            .chain(vs.iter().map(|v| format!("b_v{}", v + 1)))
            .collect();
        let mut first = vec![1.0 / k as f64; k];
        first.extend(vec![0.0; k]);
        let mut second = vec![0.0; k];
        second.extend(vec![1.0 / k as f64; k]);
        let leaves = vs
            .iter()
            .map(|v| Node::recommend(2 + v))
            .chain(vs.iter().map(|v| Node::recommend(2 + n + v)))
            .collect();
        Node::signal(SignalStrategy::new(signals, vec![first, second]), leaves)
    };
    branches.push(star);
    let options = (0..=n).map(|t| vec![t]).collect();
    Ok(MechanismTree::new("mis_policy", Node::elicit(options, branches)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{check_multistage_ic, evaluate};
    use crate::instances::{example_instance, max_independent_set, random_instance, reduce_mis, ExampleId, ExampleParams};
    use crate::lp::{solve_credible_ic_with, solve_enses_with, uninformative_enses_solution, uninformative_value, Backend};
    use crate::mechanism::validate_mechanism;

    fn round_trip(inst: &Instance) {
        let (v, sol) = solve_enses_with(inst, Backend::MicroLp).unwrap();
        let tree = enses_tree(inst, &sol, &SynthesisOptions::default()).unwrap();
        assert!(validate_mechanism(inst, &tree).is_ok());
        let got = evaluate(inst, &tree).unwrap().principal_value;
        assert!((got - v).abs() < 1e-6, "tree {got} vs LP {v}");
        assert!(check_multistage_ic(inst, &tree, 1e-6).unwrap().all_ok());
    }

    #[test]
    fn enses_round_trip_examples() {
        let p = ExampleParams::default();
        for id in [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex4] {
            round_trip(&example_instance(id, &p).unwrap());
        }
    }

    #[test]
    fn enses_round_trip_random() {
        for seed in 0..4 {
            round_trip(&random_instance(100 + seed, 2, 3, 3, (-1.0, 1.0)));
        }
    }

    #[test]
    fn trivial_solution_gives_baseline() {
        for seed in 0..5 {
            let inst = random_instance(seed, 3, 2, 3, (-1.0, 1.0));
            let sol = uninformative_enses_solution(&inst);
            for policy in [ZeroBranchPolicy::Prune, ZeroBranchPolicy::Keep] {
                let opts = SynthesisOptions {
                    zero_branch_policy: policy,
                    ..SynthesisOptions::default()
                };
                let tree = enses_tree(&inst, &sol, &opts).unwrap();
                let got = evaluate(&inst, &tree).unwrap().principal_value;
                assert!((got - uninformative_value(&inst)).abs() < 1e-9, "{policy:?}");
            }
        }
    }

    #[test]
    fn corrupted_flow_is_degenerate() {
        let inst = example_instance(ExampleId::Ex1, &ExampleParams::default()).unwrap();
        let mut sol = uninformative_enses_solution(&inst);
        sol.phi[0][1][0][0][0] = 0.5;
        let err = enses_tree(&inst, &sol, &SynthesisOptions::default()).unwrap_err();
        assert!(matches!(err, SynthesisError::DivisionDegeneracy(_)));
    }

    #[test]
    fn swapped_recommendation_breaks_action_dic() {
        let inst = example_instance(ExampleId::Ex1, &ExampleParams::default()).unwrap();
        let sol = uninformative_enses_solution(&inst);
        let opts = SynthesisOptions {
            zero_branch_policy: ZeroBranchPolicy::Keep,
            ..SynthesisOptions::default()
        };
        let mut tree = enses_tree(&inst, &sol, &opts).unwrap();
        assert!(check_multistage_ic(&inst, &tree, 1e-6).unwrap().all_ok());
        // In t2's own branch, recommend the dominated `a` instead of `c`.
        let node = tree.root.at_mut(&[1, 1, 1]).expect("S[t2,t2,t2]");
        assert_eq!(node.name.as_deref(), Some("S[t2,t2,t2]"));
        if let crate::mechanism::NodeKind::Signal { strategy, .. } = &mut node.kind {
            for row in &mut strategy.probs {
                row.swap(0, 2);
                row.swap(1, 3);
            }
        }
        let report = check_multistage_ic(&inst, &tree, 1e-6).unwrap();
        assert!(!report.dic_at_sijk.values().all(|b| *b));
    }

    #[test]
    fn ic_tree_matches_lp() {
        let p = ExampleParams::default();
        for id in [ExampleId::Ex1, ExampleId::Ex2] {
            let inst = example_instance(id, &p).unwrap();
            let (v, pol) = solve_credible_ic_with(&inst, Backend::Dense).unwrap();
            let tree = ic_two_stage_tree(&inst, &pol).unwrap();
            let got = evaluate(&inst, &tree).unwrap().principal_value;
            assert!((got - 0.5).abs() < 1e-6 && (v - 0.5).abs() < 1e-6, "{id:?}: {got} {v}");
        }
    }

    #[test]
    fn ic_tree_rejects_bad_policies() {
        let inst = example_instance(ExampleId::Ex1, &ExampleParams::default()).unwrap();
        // t1 told to play `d` in state 1: not obedient.
        let mut pol = vec![vec![vec![0.0; 4]; 2]; 2];
        pol[0][0][3] = 0.5;
        pol[0][1][3] = 0.5;
        pol[1][0][2] = 0.5;
        pol[1][1][3] = 0.5;
        assert!(matches!(
            ic_two_stage_tree(&inst, &pol),
            Err(SynthesisError::InfeasiblePolicies(_))
        ));
    }

    #[test]
    fn mis_policy_values() {
        let k3 = Graph::complete(3);
        let v = evaluate(&reduce_mis(&k3), &mis_policy_tree(&k3, &[0]).unwrap())
            .unwrap()
            .principal_value;
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
        let c5 = Graph::cycle(5);
        let (_, w) = max_independent_set(&c5).unwrap();
        let v = evaluate(&reduce_mis(&c5), &mis_policy_tree(&c5, &w).unwrap())
            .unwrap()
            .principal_value;
        assert!((v - 0.4).abs() < 1e-9);
        assert_eq!(mis_policy_tree(&k3, &[0, 1]).unwrap_err(), SynthesisError::NotIndependent(0, 1));
    }
}
