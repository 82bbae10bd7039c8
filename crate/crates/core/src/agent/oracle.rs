//! Exhaustive enumeration of pure agent profiles, used to cross-check the
//! backward-induction solver.

use std::collections::HashMap;

use crate::mechanism::{MechanismTree, Node, NodeKind, TypeSet};
use crate::model::{Instance, Tolerances};

use super::{check_inputs, leaf_action, narrow, AgentError};

pub const DEFAULT_PROFILE_CAP: u64 = 10_000_000;

enum Alternatives {
    Branches(Vec<(usize, TypeSet)>),
    Imitations(Vec<usize>),
}

struct DecisionPoint {
    alternatives: Alternatives,
}

impl DecisionPoint {
    fn len(&self) -> usize {
        match &self.alternatives {
            Alternatives::Branches(b) => b.len(),
            Alternatives::Imitations(t) => t.len(),
        }
    }
}

fn collect(
    node: &Node,
    w: &[f64],
    cand: &TypeSet,
    zero: f64,
    path: &mut Vec<usize>,
    points: &mut Vec<DecisionPoint>,
    index: &mut HashMap<Vec<usize>, usize>,
) {
    match &node.kind {
        NodeKind::Leaf { .. } => {
            index.insert(path.clone(), points.len());
            points.push(DecisionPoint {
                alternatives: Alternatives::Imitations(cand.iter().copied().collect()),
            });
        }
        NodeKind::Signal { strategy, children } => {
            for (g, child) in children.iter().enumerate() {
                let cw = strategy.child_weights(w, g);
                if cw.iter().sum::<f64>() <= zero {
                    continue;
                }
                path.push(g);
                collect(child, &cw, cand, zero, path, points, index);
                path.pop();
            }
        }
        NodeKind::Elicit { options, children } => {
            let branches: Vec<(usize, TypeSet)> = options
                .iter()
                .enumerate()
                .map(|(k, o)| (k, narrow(cand, o)))
                .filter(|(_, c)| !c.is_empty())
                .collect();
            index.insert(path.clone(), points.len());
            points.push(DecisionPoint {
                alternatives: Alternatives::Branches(branches.clone()),
            });
            for (k, c) in branches {
                path.push(k);
                collect(&children[k], w, &c, zero, path, points, index);
                path.pop();
            }
        }
        NodeKind::Menu { children } => {
            let branches: Vec<(usize, TypeSet)> =
                (0..children.len()).map(|k| (k, cand.clone())).collect();
            index.insert(path.clone(), points.len());
            points.push(DecisionPoint {
                alternatives: Alternatives::Branches(branches.clone()),
            });
            for (k, c) in branches {
                path.push(k);
                collect(&children[k], w, &c, zero, path, points, index);
                path.pop();
            }
        }
    }
}

struct Walker<'a> {
    inst: &'a Instance,
    t: usize,
    tol: Tolerances,
    points: &'a [DecisionPoint],
    index: &'a HashMap<Vec<usize>, usize>,
    profile: &'a [usize],
}

impl Walker<'_> {
    fn value(&self, node: &Node, w: &[f64], path: &mut Vec<usize>) -> f64 {
        match &node.kind {
            NodeKind::Leaf { recommend } => {
                let dp = self.index[path.as_slice()];
                let Alternatives::Imitations(types) = &self.points[dp].alternatives else {
                    unreachable!("leaf decision point")
                };
                let imitated = types[self.profile[dp]];
                let a = leaf_action(self.inst, w, imitated, *recommend, self.tol.tie);
                self.inst.agent_utility(w, self.t, a)
            }
            NodeKind::Signal { strategy, children } => {
                let mut total = 0.0;
                for (g, child) in children.iter().enumerate() {
                    let cw = strategy.child_weights(w, g);
                    if cw.iter().sum::<f64>() <= self.tol.zero_mass {
                        continue;
                    }
                    path.push(g);
                    total += self.value(child, &cw, path);
                    path.pop();
                }
                total
            }
            NodeKind::Elicit { children, .. } | NodeKind::Menu { children } => {
                let dp = self.index[path.as_slice()];
                let Alternatives::Branches(branches) = &self.points[dp].alternatives else {
                    unreachable!("branch decision point")
                };
                let k = branches[self.profile[dp]].0;
                path.push(k);
                let v = self.value(&children[k], w, path);
                path.pop();
                v
            }
        }
    }
}

/// Maximum expected utility of type `t` over all pure profiles.
pub fn brute_force_response(inst: &Instance, mech: &MechanismTree, t: &str) -> Result<f64, AgentError> {
    let ti = inst
        .type_index(t)
        .map_err(|_| AgentError::UnknownType(t.to_string()))?;
    check_inputs(inst, mech)?;
    brute_force_response_with(inst, mech, ti, DEFAULT_PROFILE_CAP, Tolerances::default())
}

/// Index-based variant with an explicit cap; skips validation.
pub fn brute_force_response_with(
    inst: &Instance,
    mech: &MechanismTree,
    t: usize,
    cap: u64,
    tol: Tolerances,
) -> Result<f64, AgentError> {
    let mut points = Vec::new();
    let mut index = HashMap::new();
    let all: TypeSet = (0..inst.n_types()).collect();
    collect(&mech.root, inst.prior(), &all, tol.zero_mass, &mut Vec::new(), &mut points, &mut index);
    let needed: f64 = points.iter().map(|p| p.len() as f64).product();
    if needed > cap as f64 {
        return Err(AgentError::ExplosionCap { needed, cap });
    }
    let mut profile = vec![0usize; points.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let walker = Walker {
            inst,
            t,
            tol,
            points: &points,
            index: &index,
            profile: &profile,
        };
        best = best.max(walker.value(&mech.root, inst.prior(), &mut Vec::new()));
        // odometer step
        let mut i = 0;
        loop {
            if i == profile.len() {
                return Ok(best);
            }
            profile[i] += 1;
            if profile[i] < points[i].len() {
                break;
            }
            profile[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::best_response_index;
    use crate::instances::{example_instance, example_mechanism, ExampleId, ExampleParams, MechanismId};

    #[test]
    fn single_leaf_matches_best_response() {
        let inst = crate::instances::random_instance(3, 2, 3, 2, (-1.0, 1.0));
        let mech = MechanismTree::new("leaf", Node::leaf());
        for t in 0..3 {
            let bf = brute_force_response_with(&inst, &mech, t, 100, Tolerances::default()).unwrap();
            let br = best_response_index(&inst, &mech, t, Tolerances::default()).agent_value;
            assert!((bf - br).abs() < 1e-12);
        }
    }

    #[test]
    fn ex2_t1_oracle_value() {
        let p = ExampleParams::default();
        let inst = example_instance(ExampleId::Ex2, &p).unwrap();
        let mech = example_mechanism(MechanismId::Ex2Ses, &p).unwrap();
        let v = brute_force_response(&inst, &mech, "t1").unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ex1_t1_oracle_value() {
        let p = ExampleParams::default();
        let inst = example_instance(ExampleId::Ex1, &p).unwrap();
        let mech = example_mechanism(MechanismId::Ex1Trade, &p).unwrap();
        assert!((brute_force_response(&inst, &mech, "t1").unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let p = ExampleParams::default();
        let inst = example_instance(ExampleId::Ex3, &p).unwrap();
        let mech = example_mechanism(MechanismId::Ex3Fig2, &p).unwrap();
        let err = brute_force_response_with(&inst, &mech, 0, 2, Tolerances::default()).unwrap_err();
        assert!(matches!(err, AgentError::ExplosionCap { .. }));
    }
}
