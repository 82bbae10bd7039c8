//! Resolving command-line inputs into instances, mechanisms and solver
//! outputs. An input is `-` (stdin), a path, or a built-in id.

use std::io::Read;
use std::path::Path;

use persuade_core::instances::{random_instance, random_mechanism};
use persuade_core::model::validate_instance_tol;
use persuade_core::{
    example_instance, example_mechanism, validate_mechanism, ExampleId, ExampleParams, Graph, Instance,
    MechanismId, MechanismTree,
};
use serde_json::Value;

use crate::{CliConfig, CliError};

/// Solver-output kinds, as written in the `kind` field.
pub(crate) const SOLUTION_KINDS: [&str; 4] = ["noncredible", "ic", "enses", "es_bruteforce"];
const NODE_KINDS: [&str; 4] = ["signal", "elicit", "menu", "leaf"];

/// Size of the random instance behind the `random` id.
const RANDOM_SHAPE: (usize, usize, usize) = (3, 3, 3);

/// Lazily read, cached standard input.
pub(crate) struct Stdin<'a> {
    reader: &'a mut dyn Read,
    cache: Option<String>,
}

impl<'a> Stdin<'a> {
    pub fn new(reader: &'a mut dyn Read) -> Self {
        Self { reader, cache: None }
    }

    pub fn text(&mut self) -> Result<String, CliError> {
        if self.cache.is_none() {
            let mut s = String::new();
            self.reader
                .read_to_string(&mut s)
                .map_err(|e| CliError::Usage(format!("cannot read stdin: {e}")))?;
            if s.trim().is_empty() {
                return Err(CliError::Usage("expected JSON on stdin, got nothing".into()));
            }
            self.cache = Some(s);
        }
        Ok(self.cache.clone().unwrap_or_default())
    }
}

pub(crate) fn params(cfg: &CliConfig) -> ExampleParams {
    let mut p = ExampleParams {
        delta: cfg.delta,
        big_m: cfg.big_m,
        ..ExampleParams::default()
    };
    if let Some(n) = cfg.n {
        p.n = n;
    }
    p
}

fn read_text(source: &str, stdin: &mut Stdin) -> Result<Option<String>, CliError> {
    if source == "-" {
        return stdin.text().map(Some);
    }
    let path = Path::new(source);
    if path.is_file() {
        return std::fs::read_to_string(path)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("cannot read '{source}': {e}")));
    }
    Ok(None)
}

fn parse_json(source: &str, text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("'{source}' is not valid JSON: {e}")))
}

/// Everything one input document may carry.
#[derive(Default)]
pub(crate) struct Document {
    pub instance: Option<Instance>,
    pub mechanism: Option<Value>,
    pub solution: Option<Value>,
}

pub(crate) fn instance_from_value(v: &Value) -> Result<Instance, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Validation(format!("malformed instance: {e}")))
}

fn node_like(v: &Value) -> bool {
    v.get("root").is_some() || v.get("kind").and_then(Value::as_str).is_some_and(|k| NODE_KINDS.contains(&k))
}

fn classify(source: &str, v: Value) -> Result<Document, CliError> {
    let embedded = |v: &Value| v.get("instance").filter(|i| i.is_object()).map(instance_from_value).transpose();
    let kind = v.get("kind").and_then(Value::as_str);
    if kind.is_some_and(|k| SOLUTION_KINDS.contains(&k)) {
        return Ok(Document {
            instance: embedded(&v)?,
            mechanism: v.get("mechanism").filter(|m| m.is_object()).cloned(),
            solution: Some(v),
        });
    }
    if node_like(&v) {
        return Ok(Document {
            instance: embedded(&v)?,
            mechanism: Some(v),
            solution: None,
        });
    }
    if let Some(m) = v.get("mechanism").filter(|m| node_like(m)) {
        return Ok(Document {
            instance: embedded(&v)?,
            mechanism: Some(m.clone()),
            solution: None,
        });
    }
    if v.get("states").is_some() {
        return Ok(Document {
            instance: Some(instance_from_value(&v)?),
            ..Document::default()
        });
    }
    if v.get("instance").is_some() {
        return Ok(Document {
            instance: embedded(&v)?,
            ..Document::default()
        });
    }
    Err(CliError::Usage(format!(
        "'{source}' is neither an instance, a mechanism nor a solver output"
    )))
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Loads one input.
pub(crate) fn load(source: &str, cfg: &CliConfig, stdin: &mut Stdin) -> Result<Document, CliError> {
    if let Some(text) = read_text(source, stdin)? {
        return classify(source, parse_json(source, &text)?);
    }
    let p = params(cfg);
    if source == "random" {
        let (inst, mech) = random_bundle(cfg);
        return Ok(Document {
            mechanism: Some(mech.to_json(&inst)),
            instance: Some(inst),
            solution: None,
        });
    }
    if let Ok(id) = source.parse::<MechanismId>() {
        let inst = example_instance(id.instance(), &p).map_err(usage_err)?;
        let mech = example_mechanism(id, &p).map_err(usage_err)?;
        return Ok(Document {
            mechanism: Some(mech.to_json(&inst)),
            instance: Some(inst),
            solution: None,
        });
    }
    if let Ok(id) = source.parse::<ExampleId>() {
        return Ok(Document {
            instance: Some(example_instance(id, &p).map_err(usage_err)?),
            ..Document::default()
        });
    }
    Err(CliError::Usage(format!(
        "cannot open '{source}': no such file and not a built-in id"
    )))
}

/// The `random` mechanism for the `random` instance with the same seed.
pub(crate) fn random_bundle(cfg: &CliConfig) -> (Instance, MechanismTree) {
    let (ns, nt, na) = RANDOM_SHAPE;
    let inst = random_instance(cfg.seed, ns, nt, na, (-1.0, 1.0));
    let mech = random_mechanism(cfg.seed, &inst, 3, 4);
    (inst, mech)
}

/// Inputs merged across `--instance`, positionals and stdin.
pub(crate) struct Gathered {
    pub instance: Instance,
    pub mechanism: Option<Value>,
    pub solution: Option<Value>,
}

impl Gathered {
    pub fn tree(&self) -> Result<MechanismTree, CliError> {
        let v = self
            .mechanism
            .as_ref()
            .ok_or_else(|| CliError::Usage("no mechanism given".into()))?;
        let mech = MechanismTree::from_json(&self.instance, v).map_err(|e| CliError::Validation(e.to_string()))?;
        let report = validate_mechanism(&self.instance, &mech);
        if !report.is_ok() {
            return Err(CliError::Validation(format!("invalid mechanism: {report}")));
        }
        Ok(mech)
    }
}

/// Reads the inputs of a command. When `wants_mechanism` is set and no
/// input supplied one, stdin is read as well.
pub(crate) fn gather(
    inputs: &[String],
    cfg: &CliConfig,
    stdin: &mut Stdin,
    wants_mechanism: bool,
) -> Result<Gathered, CliError> {
    let mut docs = Vec::new();
    if let Some(source) = &cfg.instance {
        let doc = load(source, cfg, stdin)?;
        if doc.instance.is_none() {
            return Err(CliError::Usage(format!("--instance '{source}' holds no instance")));
        }
        docs.push(Document {
            instance: doc.instance,
            ..Document::default()
        });
    }
    for source in inputs {
        docs.push(load(source, cfg, stdin)?);
    }
    let has_payload = docs.iter().any(|d| d.mechanism.is_some() || d.solution.is_some());
    let has_instance = docs.iter().any(|d| d.instance.is_some());
    if (wants_mechanism && !has_payload) || !has_instance {
        docs.push(load("-", cfg, stdin)?);
    }
    let instance = docs
        .iter_mut()
        .find_map(|d| d.instance.take())
        .ok_or_else(|| CliError::Usage("no instance given".into()))?;
    let report = validate_instance_tol(&instance, cfg.tie_tolerance);
    if !report.is_ok() {
        return Err(CliError::Validation(format!("invalid instance: {report}")));
    }
    let mechanism = docs.iter_mut().rev().find_map(|d| d.mechanism.take());
    let solution = docs.iter_mut().rev().find_map(|d| d.solution.take());
    Ok(Gathered {
        instance,
        mechanism,
        solution,
    })
}

pub(crate) fn load_graph(source: Option<&str>, stdin: &mut Stdin) -> Result<Graph, CliError> {
    let source = source.unwrap_or("-");
    if let Some(text) = read_text(source, stdin)? {
        return Graph::parse(&text).map_err(|e| CliError::Validation(e.to_string()));
    }
    Graph::named(source).ok_or_else(|| {
        CliError::Usage(format!(
            "cannot open '{source}': no such file and not a graph name like K3, C5, P4, S4 or edgeless-3"
        ))
    })
}
