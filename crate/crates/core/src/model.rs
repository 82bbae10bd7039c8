//! Persuasion instances, beliefs, signaling strategies and Bayesian updating.
//!
//! States, types and actions are addressed by index everywhere inside the
//! crate; labels only matter when reading or writing JSON.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for "is this a probability distribution".
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;
/// Default tolerance for optimality ties.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Signals whose marginal probability is at or below this are treated as unreachable.
pub const ZERO_MASS: f64 = 1e-12;

/// Numerical tolerances shared by validation, evaluation and tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub probability: f64,
    pub tie: f64,
    pub zero_mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            probability: PROBABILITY_TOLERANCE,
            tie: TIE_TOLERANCE,
            zero_mass: ZERO_MASS,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown {kind} label '{label}'")]
    UnknownLabel { kind: &'static str, label: String },
    #[error("signal '{0}' has zero marginal probability")]
    ZeroProbabilitySignal(String),
}

/// One violated invariant, located by a path such as `prior[1]` or `root/0/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Result of a structural validation pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    /// True if some violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A persuasion game: prior over states, distribution over agent types,
/// agent payoffs `u_t(state, action)` and principal payoffs `v(state, action)`.
///
/// Construction only checks that the tables have consistent shapes; the
/// probabilistic invariants are checked by [`validate_instance`] so that
/// malformed inputs can be reported rather than rejected outright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    states: Vec<String>,
    types: Vec<String>,
    actions: Vec<String>,
    prior: Vec<f64>,
    type_dist: Vec<f64>,
    // type-major, then state, then action
    agent_payoff: Vec<f64>,
    // state-major, then action
    principal_payoff: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    states: Vec<String>,
    types: Vec<String>,
    actions: Vec<String>,
    prior: Vec<f64>,
    type_dist: Vec<f64>,
    agent_payoff: Vec<Vec<Vec<f64>>>,
    principal_payoff: Vec<Vec<f64>>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = ModelError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        Instance::new(
            raw.states,
            raw.types,
            raw.actions,
            raw.prior,
            raw.type_dist,
            raw.agent_payoff,
            raw.principal_payoff,
        )
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        let agent_payoff = (0..inst.n_types())
            .map(|t| {
                (0..inst.n_states())
                    .map(|s| (0..inst.n_actions()).map(|a| inst.u(t, s, a)).collect())
                    .collect()
            })
            .collect();
        let principal_payoff = (0..inst.n_states())
            .map(|s| (0..inst.n_actions()).map(|a| inst.v(s, a)).collect())
            .collect();
        RawInstance {
            states: inst.states,
            types: inst.types,
            actions: inst.actions,
            prior: inst.prior,
            type_dist: inst.type_dist,
            agent_payoff,
            principal_payoff,
        }
    }
}

impl Instance {
    pub fn new(
        states: Vec<String>,
        types: Vec<String>,
        actions: Vec<String>,
        prior: Vec<f64>,
        type_dist: Vec<f64>,
        agent_payoff: Vec<Vec<Vec<f64>>>,
        principal_payoff: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let (ns, nt, na) = (states.len(), types.len(), actions.len());
        if prior.len() != ns {
            return Err(ModelError::Shape(format!(
                "prior has {} entries for {ns} states",
                prior.len()
            )));
        }
        if type_dist.len() != nt {
            return Err(ModelError::Shape(format!(
                "type_dist has {} entries for {nt} types",
                type_dist.len()
            )));
        }
        if agent_payoff.len() != nt {
            return Err(ModelError::Shape(format!(
                "agent_payoff has {} type blocks for {nt} types",
                agent_payoff.len()
            )));
        }
        let mut flat_u = Vec::with_capacity(nt * ns * na);
        for (t, block) in agent_payoff.iter().enumerate() {
            if block.len() != ns {
                return Err(ModelError::Shape(format!(
                    "agent_payoff[{t}] has {} rows for {ns} states",
                    block.len()
                )));
            }
            for (s, row) in block.iter().enumerate() {
                if row.len() != na {
                    return Err(ModelError::Shape(format!(
                        "agent_payoff[{t}][{s}] has {} entries for {na} actions",
                        row.len()
                    )));
                }
                flat_u.extend_from_slice(row);
            }
        }
        if principal_payoff.len() != ns {
            return Err(ModelError::Shape(format!(
                "principal_payoff has {} rows for {ns} states",
                principal_payoff.len()
            )));
        }
        let mut flat_v = Vec::with_capacity(ns * na);
        for (s, row) in principal_payoff.iter().enumerate() {
            if row.len() != na {
                return Err(ModelError::Shape(format!(
                    "principal_payoff[{s}] has {} entries for {na} actions",
                    row.len()
                )));
            }
            flat_v.extend_from_slice(row);
        }
        Ok(Self {
            states,
            types,
            actions,
            prior,
            type_dist,
            agent_payoff: flat_u,
            principal_payoff: flat_v,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn type_dist(&self) -> &[f64] {
        &self.type_dist
    }

    /// Agent payoff `u_t(state, action)`.
    #[inline]
    pub fn u(&self, t: usize, s: usize, a: usize) -> f64 {
        self.agent_payoff[(t * self.states.len() + s) * self.actions.len() + a]
    }

    /// Principal payoff `v(state, action)`.
    #[inline]
    pub fn v(&self, s: usize, a: usize) -> f64 {
        self.principal_payoff[s * self.actions.len() + a]
    }

    pub fn with_type_dist(mut self, type_dist: Vec<f64>) -> Result<Self, ModelError> {
        if type_dist.len() != self.types.len() {
            return Err(ModelError::Shape(format!(
                "type_dist has {} entries for {} types",
                type_dist.len(),
                self.types.len()
            )));
        }
        self.type_dist = type_dist;
        Ok(self)
    }

    pub fn state_index(&self, label: &str) -> Result<usize, ModelError> {
        index_of(&self.states, label, "state")
    }

    pub fn type_index(&self, label: &str) -> Result<usize, ModelError> {
        index_of(&self.types, label, "type")
    }

    pub fn action_index(&self, label: &str) -> Result<usize, ModelError> {
        index_of(&self.actions, label, "action")
    }

    /// `Σ_s weights[s] · u_t(s, a)`; weights may be an unnormalized state measure.
    pub fn agent_utility(&self, weights: &[f64], t: usize, a: usize) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(s, w)| w * self.u(t, s, a))
            .sum()
    }

    /// `Σ_s weights[s] · v(s, a)`.
    pub fn principal_utility(&self, weights: &[f64], a: usize) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(s, w)| w * self.v(s, a))
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("instance serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn index_of(labels: &[String], label: &str, kind: &'static str) -> Result<usize, ModelError> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| ModelError::UnknownLabel {
            kind,
            label: label.to_string(),
        })
}

fn check_distribution(
    report: &mut ValidationReport,
    name: &str,
    probs: &[f64],
    tol: f64,
) {
    for (i, p) in probs.iter().enumerate() {
        if !p.is_finite() {
            report.push(format!("{name}[{i}]"), "non-finite probability");
        } else if *p < -tol {
            report.push(format!("{name}[{i}]"), format!("negative probability {p}"));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tol {
        report.push(name, format!("{name} sums to {sum}"));
    }
}

fn check_labels(report: &mut ValidationReport, name: &str, labels: &[String]) {
    if labels.is_empty() {
        report.push(name, format!("{name} must be nonempty"));
    }
    let mut seen = HashSet::new();
    for (i, l) in labels.iter().enumerate() {
        if !seen.insert(l.as_str()) {
            report.push(format!("{name}[{i}]"), format!("duplicate label '{l}'"));
        }
    }
}

/// Checks every invariant of an [`Instance`] and lists the violations.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    validate_instance_tol(inst, PROBABILITY_TOLERANCE)
}

pub fn validate_instance_tol(inst: &Instance, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_labels(&mut report, "states", &inst.states);
    check_labels(&mut report, "types", &inst.types);
    check_labels(&mut report, "actions", &inst.actions);
    check_distribution(&mut report, "prior", &inst.prior, tol);
    check_distribution(&mut report, "type_dist", &inst.type_dist, tol);
    for t in 0..inst.n_types() {
        for s in 0..inst.n_states() {
            for a in 0..inst.n_actions() {
                if !inst.u(t, s, a).is_finite() {
                    report.push(
                        format!("agent_payoff[{t}][{s}][{a}]"),
                        "non-finite payoff",
                    );
                }
            }
        }
    }
    for s in 0..inst.n_states() {
        for a in 0..inst.n_actions() {
            if !inst.v(s, a).is_finite() {
                report.push(format!("principal_payoff[{s}][{a}]"), "non-finite payoff");
            }
        }
    }
    report
}

/// A distribution over states, in the instance's state order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(pub Vec<f64>);

impl Belief {
    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, s: usize) -> Self {
        let mut p = vec![0.0; n];
        p[s] = 1.0;
        Belief(p)
    }

    /// Normalizes a nonnegative state measure. Returns `None` for a null measure.
    pub fn from_weights(weights: &[f64]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Belief(weights.iter().map(|w| w / total).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.0.iter().all(|p| p.is_finite() && *p >= -tol)
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// States with positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(s, _)| s)
            .collect()
    }
}

/// A signaling scheme `π(g | state)`: one row per state, one column per signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalStrategy {
    pub signals: Vec<String>,
    pub probs: Vec<Vec<f64>>,
}

impl SignalStrategy {
    pub fn new(signals: Vec<String>, probs: Vec<Vec<f64>>) -> Self {
        Self { signals, probs }
    }

    /// Sends one signal regardless of the state.
    pub fn constant(label: impl Into<String>, n_states: usize) -> Self {
        Self {
            signals: vec![label.into()],
            probs: vec![vec![1.0]; n_states],
        }
    }

    /// One signal per state, named after the state labels.
    pub fn revealing(state_labels: &[String]) -> Self {
        let n = state_labels.len();
        let signals = state_labels.iter().map(|s| format!("g_{s}")).collect();
        let probs = (0..n)
            .map(|s| (0..n).map(|g| if g == s { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { signals, probs }
    }

    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    #[inline]
    pub fn prob(&self, s: usize, g: usize) -> f64 {
        self.probs[s][g]
    }

    pub fn signal_index(&self, label: &str) -> Option<usize> {
        self.signals.iter().position(|l| l == label)
    }

    /// Joint measure `weights[s] · π(g | s)` over states.
    pub fn child_weights(&self, weights: &[f64], g: usize) -> Vec<f64> {
        weights
            .iter()
            .enumerate()
            .map(|(s, w)| w * self.probs[s][g])
            .collect()
    }

    /// Marginal probability of signal `g` under `prior`.
    pub fn marginal(&self, prior: &Belief, g: usize) -> f64 {
        self.child_weights(&prior.0, g).iter().sum()
    }

    /// Row-level problems: wrong length, negative entries, rows not summing to one.
    pub fn row_problems(&self, n_states: usize, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.probs.len() != n_states {
            out.push(format!(
                "signal strategy has {} rows for {n_states} states",
                self.probs.len()
            ));
        }
        for (s, row) in self.probs.iter().enumerate() {
            if row.len() != self.signals.len() {
                out.push(format!(
                    "row {s} has {} entries for {} signals",
                    row.len(),
                    self.signals.len()
                ));
                continue;
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < -tol) || (sum - 1.0).abs() > tol {
                out.push(format!("signal row {s} not a distribution (sums to {sum})"));
            }
        }
        out
    }
}

/// Posterior after observing `signal`.
pub fn bayes_update(
    prior: &Belief,
    strat: &SignalStrategy,
    signal: &str,
) -> Result<Belief, ModelError> {
    let g = strat
        .signal_index(signal)
        .ok_or_else(|| ModelError::UnknownLabel {
            kind: "signal",
            label: signal.to_string(),
        })?;
    bayes_update_index(prior, strat, g)
}

pub fn bayes_update_index(
    prior: &Belief,
    strat: &SignalStrategy,
    g: usize,
) -> Result<Belief, ModelError> {
    let joint = strat.child_weights(&prior.0, g);
    let marginal: f64 = joint.iter().sum();
    if marginal <= ZERO_MASS {
        return Err(ModelError::ZeroProbabilitySignal(strat.signals[g].clone()));
    }
    Ok(Belief(joint.into_iter().map(|w| w / marginal).collect()))
}

/// Actions maximizing type `t`'s expected utility under `belief`, in index order.
pub fn argmax_actions(inst: &Instance, belief: &Belief, t: usize) -> Vec<usize> {
    argmax_actions_weighted(inst, &belief.0, t, TIE_TOLERANCE)
}

/// Like [`argmax_actions`] over an unnormalized state measure; `tol` applies
/// on the scale of `weights`.
pub fn argmax_actions_weighted(inst: &Instance, weights: &[f64], t: usize, tol: f64) -> Vec<usize> {
    let utils: Vec<f64> = (0..inst.n_actions())
        .map(|a| inst.agent_utility(weights, t, a))
        .collect();
    let best = utils.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    utils
        .iter()
        .enumerate()
        .filter(|(_, u)| **u >= best - tol)
        .map(|(a, _)| a)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_instance, ExampleId, ExampleParams};

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn two_state(prior: Vec<f64>) -> Instance {
        Instance::new(
            labels(&["x", "y"]),
            labels(&["t"]),
            labels(&["a", "b"]),
            prior,
            vec![1.0],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn example_one_is_valid() {
        let inst = example_instance(ExampleId::Ex1, &ExampleParams::default()).unwrap();
        assert!(validate_instance(&inst).is_ok());
    }

    #[test]
    fn prior_sum_violation() {
        let report = validate_instance(&two_state(vec![0.6, 0.6]));
        assert!(report.mentions("prior sums to 1.2"), "{report}");
    }

    #[test]
    fn negative_prior_violation() {
        let report = validate_instance(&two_state(vec![-0.1, 1.1]));
        assert!(report.mentions("negative probability"), "{report}");
    }

    #[test]
    fn duplicate_labels_and_shapes() {
        let inst = Instance::new(
            labels(&["x", "x"]),
            labels(&["t"]),
            labels(&["a"]),
            vec![0.5, 0.5],
            vec![1.0],
            vec![vec![vec![0.0], vec![0.0]]],
            vec![vec![0.0], vec![f64::NAN]],
        )
        .unwrap();
        let report = validate_instance(&inst);
        assert!(report.mentions("duplicate label"));
        assert!(report.mentions("non-finite payoff"));

        let err = Instance::new(
            labels(&["x"]),
            labels(&["t"]),
            labels(&["a"]),
            vec![1.0],
            vec![1.0],
            vec![vec![vec![0.0, 1.0]]],
            vec![vec![0.0]],
        );
        assert!(matches!(err, Err(ModelError::Shape(_))));
    }

    #[test]
    fn example_three_posteriors() {
        let big_m = 10001.0;
        let delta = 10.0 / big_m;
        let strat = SignalStrategy::new(
            labels(&["g_ag", "g_bg"]),
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0 - delta, delta]],
        );
        let prior = Belief::uniform(3);
        let post = bayes_update(&prior, &strat, "g_ag").unwrap();
        let expected = [1.0 / (2.0 - delta), 0.0, (1.0 - delta) / (2.0 - delta)];
        for (p, e) in post.0.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        let post = bayes_update(&prior, &strat, "g_bg").unwrap();
        let expected = [0.0, 1.0 / (1.0 + delta), delta / (1.0 + delta)];
        for (p, e) in post.0.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!((strat.marginal(&prior, 0) - (2.0 - delta) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn revealing_and_constant_updates() {
        let states = labels(&["s1", "s2", "s3"]);
        let prior = Belief(vec![0.2, 0.3, 0.5]);
        let post = bayes_update(&prior, &SignalStrategy::revealing(&states), "g_s1").unwrap();
        assert_eq!(post, Belief(vec![1.0, 0.0, 0.0]));
        let post = bayes_update(&prior, &SignalStrategy::constant("g", 3), "g").unwrap();
        for (p, q) in post.0.iter().zip(&prior.0) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_probability_signal() {
        let strat = SignalStrategy::new(labels(&["g", "h"]), vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let err = bayes_update(&Belief::uniform(2), &strat, "h").unwrap_err();
        assert_eq!(err, ModelError::ZeroProbabilitySignal("h".into()));
    }

    #[test]
    fn example_one_t2_uniform_argmax() {
        let inst = example_instance(ExampleId::Ex1, &ExampleParams::default()).unwrap();
        let t2 = inst.type_index("t2").unwrap();
        let got = argmax_actions(&inst, &Belief::uniform(2), t2);
        let c = inst.action_index("c").unwrap();
        let d = inst.action_index("d").unwrap();
        assert_eq!(got, vec![c, d]);
    }

    #[test]
    fn example_three_t1_plays_a_prime() {
        let params = ExampleParams::default();
        let inst = example_instance(ExampleId::Ex3, &params).unwrap();
        let delta = 10.0 / 10001.0;
        let belief = Belief(vec![1.0 / (2.0 - delta), 0.0, (1.0 - delta) / (2.0 - delta)]);
        let t1 = inst.type_index("t1").unwrap();
        assert_eq!(
            argmax_actions(&inst, &belief, t1),
            vec![inst.action_index("a'").unwrap()]
        );
    }

    #[test]
    fn json_round_trip_preserves_tables() {
        let inst = example_instance(ExampleId::Ex2, &ExampleParams::default()).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        let back = Instance::from_json_str(&text).unwrap();
        assert_eq!(inst, back);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["agent_payoff"].as_array().unwrap().len(), 2);
    }
}
