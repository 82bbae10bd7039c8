//! Incentive checks for trees in the menu / type-recommendation / direct
//! elicitation / action-recommendation shape.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::mechanism::{MechanismTree, Node, NodeKind};
use crate::model::Instance;

use super::AgentError;

#[derive(Clone, Debug, PartialEq)]
pub struct MultistageIcReport {
    /// Per true type `i`: branch `i` of the menu is optimal.
    pub ic_at_menu: Vec<bool>,
    /// Per `(i, j)`: at `E_ij` type `i` prefers reporting the recommended `j`.
    pub dic_at_si: BTreeMap<(usize, usize), bool>,
    /// Per `(i, j, k)`: every recommended action at `S_ijk` is optimal for `k`.
    pub dic_at_sijk: BTreeMap<(usize, usize, usize), bool>,
    pub violations: Vec<String>,
}

impl MultistageIcReport {
    pub fn all_ok(&self) -> bool {
        self.ic_at_menu.iter().all(|b| *b)
            && self.dic_at_si.values().all(|b| *b)
            && self.dic_at_sijk.values().all(|b| *b)
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let t = |i: usize| inst.types()[i].clone();
        let menu: serde_json::Map<String, Value> = self
            .ic_at_menu
            .iter()
            .enumerate()
            .map(|(i, ok)| (t(i), json!(ok)))
            .collect();
        let si: serde_json::Map<String, Value> = self
            .dic_at_si
            .iter()
            .map(|((i, j), ok)| (format!("{},{}", t(*i), t(*j)), json!(ok)))
            .collect();
        let sijk: serde_json::Map<String, Value> = self
            .dic_at_sijk
            .iter()
            .map(|((i, j, k), ok)| (format!("{},{},{}", t(*i), t(*j), t(*k)), json!(ok)))
            .collect();
        json!({
            "ok": self.all_ok(),
            "ic_at_menu": menu,
            "dic_at_si": si,
            "dic_at_sijk": sijk,
            "violations": self.violations,
        })
    }
}

/// Recommendation leaves below one `S_ijk`: (action, joint state measure).
type Recs = Vec<(usize, Vec<f64>)>;

struct Parsed {
    /// `branches[i][j]` = `Some(recs per k)` when `S_i` can recommend `t_j`.
    branches: Vec<Vec<Option<Vec<Recs>>>>,
}

fn mismatch(msg: impl Into<String>) -> AgentError {
    AgentError::ShapeMismatch(msg.into())
}

/// Signal labels, per-state probabilities and children of a signal node.
type SignalParts = (Vec<String>, Vec<Vec<f64>>, Vec<Node>);

fn signal_parts(node: &Node, what: &str) -> Result<SignalParts, AgentError> {
    match &node.kind {
        NodeKind::Signal { strategy, children } => Ok((
            strategy.signals.clone(),
            strategy.probs.clone(),
            children.clone(),
        )),
        _ => Err(mismatch(format!("{what} must be a signaling node"))),
    }
}

fn parse(inst: &Instance, mech: &MechanismTree) -> Result<Parsed, AgentError> {
    let n = inst.n_types();
    let NodeKind::Menu { children } = &mech.root.kind else {
        return Err(mismatch("root must be a menu"));
    };
    if children.len() != n {
        return Err(mismatch(format!("menu has {} branches for {n} types", children.len())));
    }
    let prior = inst.prior();
    let mut branches = Vec::with_capacity(n);
    for (i, s_i) in children.iter().enumerate() {
        let (signals, probs, elicits) = signal_parts(s_i, &format!("menu branch {i}"))?;
        let mut row: Vec<Option<Vec<Recs>>> = vec![None; n];
        for (g, label) in signals.iter().enumerate() {
            let j = inst
                .type_index(label)
                .map_err(|_| mismatch(format!("S_{i} signal '{label}' is not a type label")))?;
            let w_ij: Vec<f64> = (0..inst.n_states()).map(|s| prior[s] * probs[s][g]).collect();
            let e = &elicits[g];
            let NodeKind::Elicit { options, children: sub } = &e.kind else {
                return Err(mismatch(format!("child {g} of S_{i} must be an elicitation node")));
            };
            let direct = options.len() == n && options.iter().enumerate().all(|(k, o)| o == &vec![k]);
            if !direct {
                return Err(mismatch(format!("E_{i}{j} must elicit each type directly, in order")));
            }
            let mut per_k = Vec::with_capacity(n);
            for (k, s_ijk) in sub.iter().enumerate() {
                let (acts, aprobs, leaves) = signal_parts(s_ijk, &format!("S_{i}{j}{k}"))?;
                let mut recs = Vec::with_capacity(acts.len());
                for (h, alabel) in acts.iter().enumerate() {
                    let a = inst.action_index(alabel).map_err(|_| {
                        mismatch(format!("S_{i}{j}{k} signal '{alabel}' is not an action label"))
                    })?;
                    if !leaves[h].is_leaf() {
                        return Err(mismatch(format!("S_{i}{j}{k} children must be leaves")));
                    }
                    let w: Vec<f64> = (0..inst.n_states()).map(|s| w_ij[s] * aprobs[s][h]).collect();
                    recs.push((a, w));
                }
                per_k.push(recs);
            }
            if row[j].is_some() {
                return Err(mismatch(format!("S_{i} recommends type {j} twice")));
            }
            row[j] = Some(per_k);
        }
        branches.push(row);
    }
    Ok(Parsed { branches })
}

fn node_value(inst: &Instance, recs: &Recs, t: usize) -> f64 {
    recs.iter().map(|(a, w)| inst.agent_utility(w, t, *a)).sum()
}

/// Checks IC at the menu, DIC at each type-recommendation node and DIC at each
/// action-recommendation node, all on the joint scale within `tol`.
pub fn check_multistage_ic(inst: &Instance, mech: &MechanismTree, tol: f64) -> Result<MultistageIcReport, AgentError> {
    let parsed = parse(inst, mech)?;
    let n = inst.n_types();
    let t = |i: usize| inst.types()[i].as_str();
    let mut report = MultistageIcReport {
        ic_at_menu: vec![true; n],
        dic_at_si: BTreeMap::new(),
        dic_at_sijk: BTreeMap::new(),
        violations: Vec::new(),
    };
    for (i, row) in parsed.branches.iter().enumerate() {
        for (j, per_k) in row.iter().enumerate() {
            let Some(per_k) = per_k else { continue };
            for (k, recs) in per_k.iter().enumerate() {
                let mut ok = true;
                for (a, w) in recs {
                    let got = inst.agent_utility(w, k, *a);
                    let best = (0..inst.n_actions())
                        .map(|b| inst.agent_utility(w, k, b))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if got < best - tol {
                        ok = false;
                        report.violations.push(format!(
                            "S_({},{},{}): recommended '{}' is {} below the best action for {}",
                            t(i),
                            t(j),
                            t(k),
                            inst.actions()[*a],
                            best - got,
                            t(k)
                        ));
                    }
                }
                report.dic_at_sijk.insert((i, j, k), ok);
            }
            let follow = node_value(inst, &per_k[j], i);
            let mut ok = true;
            for (k, recs) in per_k.iter().enumerate() {
                let dev = node_value(inst, recs, i);
                if dev > follow + tol {
                    ok = false;
                    report.violations.push(format!(
                        "E_({},{}): {} gains {} by reporting {}",
                        t(i),
                        t(j),
                        t(i),
                        dev - follow,
                        t(k)
                    ));
                }
            }
            report.dic_at_si.insert((i, j), ok);
        }
    }
    for i in 0..n {
        let own: f64 = parsed.branches[i]
            .iter()
            .enumerate()
            .filter_map(|(j, pk)| pk.as_ref().map(|pk| node_value(inst, &pk[j], i)))
            .sum();
        for (l, row) in parsed.branches.iter().enumerate() {
            let dev: f64 = row
                .iter()
                .flatten()
                .map(|pk| {
                    pk.iter()
                        .map(|recs| node_value(inst, recs, i))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            if dev > own + tol {
                report.ic_at_menu[i] = false;
                report.violations.push(format!(
                    "menu: {} gains {} by choosing branch {}",
                    t(i),
                    dev - own,
                    l + 1
                ));
            }
        }
    }
    Ok(report)
}
