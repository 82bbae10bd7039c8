//! Multi-stage mechanism trees.
//!
//! A tree alternates signaling nodes, binding elicitation (possibly over
//! subsets of types), non-binding menus and leaves. Binding answers narrow
//! the candidate set `T_x` of types the agent may still imitate.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{Instance, SignalStrategy, ValidationReport, PROBABILITY_TOLERANCE};

/// A set of type indices.
pub type TypeSet = BTreeSet<usize>;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("malformed mechanism JSON at {path}: {message}")]
    Json { path: String, message: String },
}

fn json_err(path: &str, message: impl Into<String>) -> MechanismError {
    MechanismError::Json {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Signal {
        strategy: SignalStrategy,
        children: Vec<Node>,
    },
    /// Binding elicitation: the agent names the option containing the type it
    /// will act as from then on. Singleton options give direct elicitation.
    Elicit {
        options: Vec<Vec<usize>>,
        children: Vec<Node>,
    },
    /// Non-binding elicitation: a free menu choice with no credibility effect.
    Menu { children: Vec<Node> },
    /// Terminal node. `recommend` is the action the mechanism suggests; a
    /// credible agent plays it whenever it is optimal for the imitated type.
    Leaf { recommend: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    /// Optional display name such as `S_1`.
    pub name: Option<String>,
    pub kind: NodeKind,
    /// Candidate set, filled in by [`annotate`].
    pub candidates: Option<TypeSet>,
}

impl Node {
    fn new(kind: NodeKind) -> Self {
        Self {
            name: None,
            kind,
            candidates: None,
        }
    }

    pub fn leaf() -> Self {
        Self::new(NodeKind::Leaf { recommend: None })
    }

    pub fn recommend(action: usize) -> Self {
        Self::new(NodeKind::Leaf {
            recommend: Some(action),
        })
    }

    pub fn signal(strategy: SignalStrategy, children: Vec<Node>) -> Self {
        Self::new(NodeKind::Signal { strategy, children })
    }

    pub fn elicit(options: Vec<Vec<usize>>, children: Vec<Node>) -> Self {
        Self::new(NodeKind::Elicit { options, children })
    }

    pub fn menu(children: Vec<Node>) -> Self {
        Self::new(NodeKind::Menu { children })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn children(&self) -> &[Node] {
        match &self.kind {
            NodeKind::Signal { children, .. }
            | NodeKind::Elicit { children, .. }
            | NodeKind::Menu { children } => children,
            NodeKind::Leaf { .. } => &[],
        }
    }

    fn children_mut(&mut self) -> &mut [Node] {
        match &mut self.kind {
            NodeKind::Signal { children, .. }
            | NodeKind::Elicit { children, .. }
            | NodeKind::Menu { children } => children,
            NodeKind::Leaf { .. } => &mut [],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NodeKind::Signal { .. } => "signal",
            NodeKind::Elicit { .. } => "elicit",
            NodeKind::Menu { .. } => "menu",
            NodeKind::Leaf { .. } => "leaf",
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Node::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Follows child indices from this node.
    pub fn at(&self, path: &[usize]) -> Option<&Node> {
        let mut node = self;
        for &i in path {
            node = node.children().get(i)?;
        }
        Some(node)
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        let mut node = self;
        for &i in path {
            node = node.children_mut().get_mut(i)?;
        }
        Some(node)
    }
}

/// A committed mechanism.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismTree {
    pub name: String,
    pub root: Node,
}

/// Renders a child-index path as `root/0/1`.
pub fn path_string(path: &[usize]) -> String {
    let mut s = String::from("root");
    for i in path {
        let _ = write!(s, "/{i}");
    }
    s
}

impl MechanismTree {
    pub fn new(name: impl Into<String>, root: Node) -> Self {
        Self {
            name: name.into(),
            root,
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Parses the JSON form, resolving type and action labels against `inst`.
    /// Accepts either `{"name": .., "root": node}` or a bare node object.
    pub fn from_json(inst: &Instance, value: &Value) -> Result<Self, MechanismError> {
        let (name, root) = match value.get("root") {
            Some(root) => (
                value
                    .get("name")
                    .and_then(Value::as_str)
                    .unwrap_or("mechanism")
                    .to_string(),
                root,
            ),
            None => ("mechanism".to_string(), value),
        };
        let root = node_from_json(inst, root, "root")?;
        Ok(Self { name, root })
    }

    pub fn from_json_str(inst: &Instance, text: &str) -> Result<Self, MechanismError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| json_err("root", e.to_string()))?;
        Self::from_json(inst, &value)
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        json!({ "name": self.name, "root": node_to_json(inst, &self.root) })
    }
}

fn node_from_json(inst: &Instance, v: &Value, path: &str) -> Result<Node, MechanismError> {
    let obj = v
        .as_object()
        .ok_or_else(|| json_err(path, "node must be an object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| json_err(path, "missing string field 'kind'"))?;
    let children = |obj: &Map<String, Value>| -> Result<Vec<Node>, MechanismError> {
        let arr = obj
            .get("children")
            .and_then(Value::as_array)
            .ok_or_else(|| json_err(path, "missing array field 'children'"))?;
        arr.iter()
            .enumerate()
            .map(|(i, c)| node_from_json(inst, c, &format!("{path}/{i}")))
            .collect()
    };
    let kind = match kind {
        "signal" => {
            let signals: Vec<String> = serde_json::from_value(
                obj.get("signals").cloned().unwrap_or(Value::Null),
            )
            .map_err(|e| json_err(path, format!("bad 'signals': {e}")))?;
            let probs: Vec<Vec<f64>> =
                serde_json::from_value(obj.get("probs").cloned().unwrap_or(Value::Null))
                    .map_err(|e| json_err(path, format!("bad 'probs': {e}")))?;
            NodeKind::Signal {
                strategy: SignalStrategy::new(signals, probs),
                children: children(obj)?,
            }
        }
        "elicit" => {
            let raw: Vec<Vec<String>> =
                serde_json::from_value(obj.get("options").cloned().unwrap_or(Value::Null))
                    .map_err(|e| json_err(path, format!("bad 'options': {e}")))?;
            let mut options = Vec::with_capacity(raw.len());
            for opt in raw {
                let idx = opt
                    .iter()
                    .map(|l| inst.type_index(l).map_err(|e| json_err(path, e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                options.push(idx);
            }
            NodeKind::Elicit {
                options,
                children: children(obj)?,
            }
        }
        "menu" => NodeKind::Menu {
            children: children(obj)?,
        },
        "leaf" => {
            let recommend = match obj.get("recommend") {
                None | Some(Value::Null) => None,
                Some(Value::String(label)) => Some(
                    inst.action_index(label)
                        .map_err(|e| json_err(path, e.to_string()))?,
                ),
                Some(_) => return Err(json_err(path, "'recommend' must be an action label")),
            };
            NodeKind::Leaf { recommend }
        }
        other => return Err(json_err(path, format!("unknown node kind '{other}'"))),
    };
    Ok(Node {
        name: obj.get("name").and_then(Value::as_str).map(str::to_string),
        kind,
        candidates: None,
    })
}

fn label(labels: &[String], i: usize, prefix: &str) -> String {
    labels
        .get(i)
        .cloned()
        .unwrap_or_else(|| format!("{prefix}{i}"))
}

fn node_to_json(inst: &Instance, node: &Node) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), json!(node.kind_name()));
    if let Some(name) = &node.name {
        obj.insert("name".into(), json!(name));
    }
    let kids = |children: &[Node]| -> Value {
        Value::Array(children.iter().map(|c| node_to_json(inst, c)).collect())
    };
    match &node.kind {
        NodeKind::Signal { strategy, children } => {
            obj.insert("signals".into(), json!(strategy.signals));
            obj.insert("probs".into(), json!(strategy.probs));
            obj.insert("children".into(), kids(children));
        }
        NodeKind::Elicit { options, children } => {
            let opts: Vec<Vec<String>> = options
                .iter()
                .map(|o| o.iter().map(|&t| label(inst.types(), t, "t")).collect())
                .collect();
            obj.insert("options".into(), json!(opts));
            obj.insert("children".into(), kids(children));
        }
        NodeKind::Menu { children } => {
            obj.insert("children".into(), kids(children));
        }
        NodeKind::Leaf { recommend } => {
            if let Some(a) = recommend {
                obj.insert("recommend".into(), json!(label(inst.actions(), *a, "a")));
            }
        }
    }
    Value::Object(obj)
}

/// Checks the structural invariants of `mech` against `inst`.
pub fn validate_mechanism(inst: &Instance, mech: &MechanismTree) -> ValidationReport {
    let mut report = ValidationReport::default();
    let all: TypeSet = (0..inst.n_types()).collect();
    let mut path = Vec::new();
    validate_node(inst, &mech.root, &all, &mut path, &mut report);
    report
}

fn validate_node(
    inst: &Instance,
    node: &Node,
    cand: &TypeSet,
    path: &mut Vec<usize>,
    report: &mut ValidationReport,
) {
    let here = path_string(path);
    match &node.kind {
        NodeKind::Signal { strategy, children } => {
            if strategy.signals.is_empty() {
                report.push(&here, "signal node has no signals");
            }
            let mut seen = BTreeSet::new();
            for s in &strategy.signals {
                if !seen.insert(s) {
                    report.push(&here, format!("duplicate signal label '{s}'"));
                }
            }
            if children.len() != strategy.signals.len() {
                report.push(
                    &here,
                    format!(
                        "signal node has {} children for {} signals",
                        children.len(),
                        strategy.signals.len()
                    ),
                );
            }
            for problem in strategy.row_problems(inst.n_states(), PROBABILITY_TOLERANCE) {
                report.push(&here, problem);
            }
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                validate_node(inst, c, cand, path, report);
                path.pop();
            }
        }
        NodeKind::Elicit { options, children } => {
            if options.is_empty() {
                report.push(&here, "elicitation node has no options");
            }
            if children.len() != options.len() {
                report.push(
                    &here,
                    format!(
                        "elicitation node has {} children for {} options",
                        children.len(),
                        options.len()
                    ),
                );
            }
            let mut union = TypeSet::new();
            let mut overlap = false;
            let mut sets = Vec::with_capacity(options.len());
            for (k, opt) in options.iter().enumerate() {
                if opt.is_empty() {
                    report.push(&here, format!("option {k} is empty"));
                }
                let set: TypeSet = opt.iter().copied().collect();
                if set.len() != opt.len() {
                    report.push(&here, format!("option {k} repeats a type"));
                }
                for &t in &set {
                    if t >= inst.n_types() {
                        report.push(&here, format!("option {k} names unknown type index {t}"));
                    } else if !cand.contains(&t) {
                        report.push(
                            &here,
                            format!(
                                "option {k} contains excluded type '{}'",
                                label(inst.types(), t, "t")
                            ),
                        );
                    }
                    if !union.insert(t) {
                        overlap = true;
                    }
                }
                sets.push(set);
            }
            if overlap {
                report.push(&here, "options not disjoint");
            }
            if cand.iter().any(|t| !union.contains(t)) {
                report.push(&here, "options do not cover the candidate set");
            }
            for (i, c) in children.iter().enumerate() {
                let child_cand: TypeSet = match sets.get(i) {
                    Some(s) => s.intersection(cand).copied().collect(),
                    None => cand.clone(),
                };
                if child_cand.is_empty() {
                    continue;
                }
                path.push(i);
                validate_node(inst, c, &child_cand, path, report);
                path.pop();
            }
        }
        NodeKind::Menu { children } => {
            if children.is_empty() {
                report.push(&here, "menu node has no children");
            }
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                validate_node(inst, c, cand, path, report);
                path.pop();
            }
        }
        NodeKind::Leaf { recommend } => {
            if let Some(a) = recommend {
                if *a >= inst.n_actions() {
                    report.push(&here, format!("recommended action index {a} out of range"));
                }
            }
        }
    }
}

/// Fills in the candidate set `T_x` at every node. Idempotent.
pub fn annotate(mech: &MechanismTree, n_types: usize) -> MechanismTree {
    let mut out = mech.clone();
    annotate_node(&mut out.root, (0..n_types).collect());
    out
}

fn annotate_node(node: &mut Node, cand: TypeSet) {
    if let NodeKind::Elicit { options, children } = &mut node.kind {
        for (opt, child) in options.iter().zip(children.iter_mut()) {
            let next: TypeSet = opt.iter().copied().filter(|t| cand.contains(t)).collect();
            annotate_node(child, next);
        }
    } else {
        for child in node.children_mut() {
            annotate_node(child, cand.clone());
        }
    }
    node.candidates = Some(cand);
}

/// Longest root-to-leaf path, in edges.
pub fn depth(mech: &MechanismTree) -> usize {
    mech.depth()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Nodes are numbered in preorder; circles are signaling
/// nodes, boxes binding elicitation, rounded dashed boxes menus, points leaves.
/// Labels come from `inst` when given, otherwise indices are shown.
pub fn to_dot(mech: &MechanismTree, inst: Option<&Instance>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(&mech.name));
    let _ = writeln!(out, "  node [fontname=\"Helvetica\"];");
    let mut counter = 0usize;
    dot_node(&mech.root, inst, &mut counter, &mut out);
    out.push_str("}\n");
    out
}

fn dot_node(node: &Node, inst: Option<&Instance>, counter: &mut usize, out: &mut String) -> usize {
    let id = *counter;
    *counter += 1;
    let type_label = |t: usize| match inst {
        Some(i) => label(i.types(), t, "t"),
        None => format!("t{t}"),
    };
    let (shape, default_label) = match &node.kind {
        NodeKind::Signal { .. } => ("shape=circle", "S".to_string()),
        NodeKind::Elicit { .. } => ("shape=box", "E".to_string()),
        NodeKind::Menu { .. } => ("shape=box, style=\"rounded,dashed\"", "M".to_string()),
        NodeKind::Leaf { recommend } => (
            "shape=point",
            match (recommend, inst) {
                (Some(a), Some(i)) => label(i.actions(), *a, "a"),
                (Some(a), None) => format!("a{a}"),
                _ => String::new(),
            },
        ),
    };
    let text = node.name.clone().unwrap_or(default_label);
    let _ = writeln!(out, "  n{id} [{shape}, label=\"{}\"];", dot_escape(&text));
    let edge_labels: Vec<String> = match &node.kind {
        NodeKind::Signal { strategy, .. } => strategy.signals.clone(),
        NodeKind::Elicit { options, .. } => options
            .iter()
            .map(|o| {
                let names: Vec<String> = o.iter().map(|&t| type_label(t)).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect(),
        NodeKind::Menu { children } => (1..=children.len()).map(|i| i.to_string()).collect(),
        NodeKind::Leaf { .. } => Vec::new(),
    };
    for (i, child) in node.children().iter().enumerate() {
        let cid = dot_node(child, inst, counter, out);
        let lbl = edge_labels.get(i).cloned().unwrap_or_default();
        let _ = writeln!(out, "  n{id} -> n{cid} [label=\"{}\"];", dot_escape(&lbl));
    }
    id
}
