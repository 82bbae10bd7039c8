use std::str::FromStr;

use super::InstanceError;
use crate::mechanism::{MechanismTree, Node};
use crate::model::{Instance, SignalStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MechanismId {
    /// Elicit; no information for `t1`, full revelation for `t2`.
    Ex1Trade,
    /// Pre-signal whether the state is `γ`, then elicit.
    Ex2Ses,
    /// Non-binding menu followed by binding elicitation.
    Ex3Fig2,
    /// Asks whether the type is `t0`, then reveals and elicits.
    Ex4Pie,
    /// The alternating yes/no chain of depth `2n`.
    Ex5Pie,
}

impl ExampleId {
    pub const ALL: [ExampleId; 5] = [Self::Ex1, Self::Ex2, Self::Ex3, Self::Ex4, Self::Ex5];

    pub fn id(self) -> &'static str {
        match self {
            Self::Ex1 => "ex1",
            Self::Ex2 => "ex2",
            Self::Ex3 => "ex3",
            Self::Ex4 => "ex4",
            Self::Ex5 => "ex5",
        }
    }
}

impl MechanismId {
    pub const ALL: [MechanismId; 5] = [Self::Ex1Trade, Self::Ex2Ses, Self::Ex3Fig2, Self::Ex4Pie, Self::Ex5Pie];

    pub fn id(self) -> &'static str {
        match self {
            Self::Ex1Trade => "ex1_trade",
            Self::Ex2Ses => "ex2_ses",
            Self::Ex3Fig2 => "ex3_fig2",
            Self::Ex4Pie => "ex4_pie",
            Self::Ex5Pie => "ex5_pie",
        }
    }

    /// The example instance this mechanism is built for.
    pub fn instance(self) -> ExampleId {
        match self {
            Self::Ex1Trade => ExampleId::Ex1,
            Self::Ex2Ses => ExampleId::Ex2,
            Self::Ex3Fig2 => ExampleId::Ex3,
            Self::Ex4Pie => ExampleId::Ex4,
            Self::Ex5Pie => ExampleId::Ex5,
        }
    }
}

fn normalize_id(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('-', "_")
}

impl FromStr for ExampleId {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = normalize_id(s);
        Self::ALL
            .into_iter()
            .find(|e| e.id() == id)
            .ok_or_else(|| InstanceError::UnknownExample(s.to_string()))
    }
}

impl FromStr for MechanismId {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = normalize_id(s);
        Self::ALL
            .into_iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| InstanceError::UnknownExample(s.to_string()))
    }
}

/// Knobs for the parameterized examples.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleParams {
    /// The ex3 `δ`; defaults to `10 / M`.
    pub delta: Option<f64>,
    /// The penalty `M`; defaults to 10001 for ex3 and 10^6 for ex5.
    pub big_m: Option<f64>,
    /// The ex5 size.
    pub n: usize,
    /// Type distribution override.
    pub rho: Option<Vec<f64>>,
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            delta: None,
            big_m: None,
            n: 4,
            rho: None,
        }
    }
}

impl ExampleParams {
    pub fn ex3_big_m(&self) -> f64 {
        self.big_m.unwrap_or(10001.0)
    }

    pub fn ex3_delta(&self) -> f64 {
        self.delta.unwrap_or(10.0 / self.ex3_big_m())
    }

    pub fn ex5_big_m(&self) -> f64 {
        self.big_m.unwrap_or(1e6)
    }

    fn check_ex3(&self) -> Result<(f64, f64), InstanceError> {
        let m = self.ex3_big_m();
        if !m.is_finite() || m <= 10000.0 {
            return Err(InstanceError::BadParams(format!("ex3 needs M > 10000, got {m}")));
        }
        let delta = self.ex3_delta();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(InstanceError::BadParams(format!("ex3 needs 0 < delta < 1, got {delta}")));
        }
        Ok((m, delta))
    }

    fn check_ex5(&self) -> Result<f64, InstanceError> {
        if self.n == 0 {
            return Err(InstanceError::BadParams("ex5 needs n >= 1".into()));
        }
        let m = self.ex5_big_m();
        if !m.is_finite() || m <= 1.0 {
            return Err(InstanceError::BadParams(format!("ex5 needs a finite M > 1, got {m}")));
        }
        Ok(m)
    }
}

fn labels<S: AsRef<str>>(xs: &[S]) -> Vec<String> {
    xs.iter().map(|s| s.as_ref().to_string()).collect()
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn example_instance(id: ExampleId, params: &ExampleParams) -> Result<Instance, InstanceError> {
    let inst = match id {
        ExampleId::Ex1 => ex1(),
        ExampleId::Ex2 => ex2(),
        ExampleId::Ex3 => {
            let (m, _) = params.check_ex3()?;
            ex3(m)
        }
        ExampleId::Ex4 => ex4(),
        ExampleId::Ex5 => ex5(params.n, params.check_ex5()?),
    };
    match &params.rho {
        None => Ok(inst),
        Some(rho) => inst
            .with_type_dist(rho.clone())
            .map_err(|e| InstanceError::BadParams(e.to_string())),
    }
}

fn build(
    states: &[&str],
    types: &[&str],
    actions: &[&str],
    type_dist: Vec<f64>,
    u: Vec<Vec<Vec<f64>>>,
    v: Vec<Vec<f64>>,
) -> Instance {
    Instance::new(labels(states), labels(types), labels(actions), uniform(states.len()), type_dist, u, v)
        .expect("example tables are well-shaped")
}

fn ex1() -> Instance {
    build(
        &["theta1", "theta2"],
        &["t1", "t2"],
        &["a", "b", "c", "d"],
        uniform(2),
        vec![
            vec![vec![4.0, 1.0, 3.0, 0.0], vec![1.0, 4.0, 0.0, 3.0]],
            vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
        ],
        vec![vec![0.0, 0.0, 1.0, 1.0]; 2],
    )
}

fn ex2() -> Instance {
    build(
        &["alpha", "beta", "gamma"],
        &["t0", "t1"],
        &["a", "a'", "b", "b'"],
        uniform(2),
        vec![
            vec![vec![0.0, 1.0, 0.0, 1.0]; 3],
            vec![
                vec![3.0, 2.0, -2.0, -3.0],
                vec![-2.0, -3.0, 3.0, 2.0],
                vec![0.0, -10.0, 0.0, -10.0],
            ],
        ],
        vec![vec![0.0, 1.0, 0.0, 1.0]; 3],
    )
}

fn ex3(m: f64) -> Instance {
    let x = -m;
    // actions: a, a', b, b', d
    build(
        &["alpha", "beta", "gamma"],
        &["t1", "t2"],
        &["a", "a'", "b", "b'", "d"],
        uniform(2),
        vec![
            vec![
                vec![x, 1.0, x, x, 0.0],
                vec![x, x, 3.0, 2.0, 0.0],
                vec![x, -1.0, x, x, 0.0],
            ],
            vec![
                vec![3.0, 2.0, x, x, 0.0],
                vec![x, x, x, 1.0, 0.0],
                vec![x, x, x, -1.0, 0.0],
            ],
        ],
        vec![vec![0.0, 1.0, 0.0, 1.0, 0.0]; 3],
    )
}

fn ex4() -> Instance {
    build(
        &["alpha", "beta"],
        &["t0", "t1", "t2"],
        &["a", "a'", "b", "b'"],
        vec![1.0, 0.0, 0.0],
        vec![
            vec![vec![1.0, 0.0, -2.0, -3.0], vec![-2.0, -3.0, 1.0, 0.0]],
            vec![vec![-1.0, 1.0, -1.0, -1.0]; 2],
            vec![vec![-1.0, -1.0, -1.0, 1.0]; 2],
        ],
        vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
    )
}

/// States `θ_1..θ_n`, types `t_0..t_n`, actions `a_1..a_n` then `a'_1..a'_n`.
fn ex5(n: usize, m: f64) -> Instance {
    let states: Vec<String> = (1..=n).map(|i| format!("theta{i}")).collect();
    let types: Vec<String> = (0..=n).map(|i| format!("t{i}")).collect();
    let actions: Vec<String> = (1..=n)
        .map(|i| format!("a{i}"))
        .chain((1..=n).map(|i| format!("a'{i}")))
        .collect();
    let base: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let mut row = vec![0.0; 2 * n];
            row[s] = 1.0;
            for l in 0..n {
                row[n + l] = if l == s { 0.0 } else { -m };
            }
            if s == n - 1 {
                row[n + s] = 1.0;
            }
            row
        })
        .collect();
    let u: Vec<Vec<Vec<f64>>> = (0..=n)
        .map(|t| {
            let mut table = base.clone();
            for (s, row) in table.iter_mut().enumerate().take(t) {
                row[s] = 0.0;
            }
            if t >= 1 {
                table[t - 1][n + t - 1] = 1.0 / m;
            }
            table
        })
        .collect();
    let v: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let mut row = vec![0.0; 2 * n];
            row[n + s] = 1.0;
            row
        })
        .collect();
    let mut rho = vec![0.0; n + 1];
    rho[0] = 1.0;
    Instance::new(states, types, actions, uniform(n), rho, u, v).expect("ex5 tables are well-shaped")
}

pub fn example_mechanism(id: MechanismId, params: &ExampleParams) -> Result<MechanismTree, InstanceError> {
    Ok(match id {
        MechanismId::Ex1Trade => {
            let reveal = SignalStrategy::revealing(&labels(&["theta1", "theta2"]));
            MechanismTree::new(
                id.id(),
                Node::elicit(
                    vec![vec![0], vec![1]],
                    vec![Node::leaf(), Node::signal(reveal, vec![Node::leaf(), Node::leaf()])],
                ),
            )
        }
        MechanismId::Ex2Ses => ex2_ses(),
        MechanismId::Ex3Fig2 => {
            let (_, delta) = params.check_ex3()?;
            ex3_fig2(delta)
        }
        MechanismId::Ex4Pie => {
            let reveal = SignalStrategy::revealing(&labels(&["alpha", "beta"]));
            let direct = || Node::elicit(vec![vec![1], vec![2]], vec![Node::leaf(), Node::leaf()]);
            MechanismTree::new(
                id.id(),
                Node::elicit(
                    vec![vec![0], vec![1, 2]],
                    vec![Node::leaf(), Node::signal(reveal, vec![direct(), direct()])],
                ),
            )
        }
        MechanismId::Ex5Pie => {
            params.check_ex5()?;
            ex5_pie(params.n)
        }
    })
}

// Actions of ex2, by index.
const A: usize = 0;
const A_PRIME: usize = 1;
const B_PRIME: usize = 3;

fn ex2_ses() -> MechanismTree {
    let pre = SignalStrategy::new(
        labels(&["g_gamma", "g_not_gamma"]),
        vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
    );
    let for_t0 = SignalStrategy::new(
        labels(&["a'", "b'"]),
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
    );
    let for_t1 = SignalStrategy::constant("a", 3);
    let elicit = Node::elicit(
        vec![vec![0], vec![1]],
        vec![
            Node::signal(for_t0, vec![Node::recommend(A_PRIME), Node::recommend(B_PRIME)]),
            Node::signal(for_t1, vec![Node::recommend(A)]),
        ],
    );
    MechanismTree::new("ex2_ses", Node::signal(pre, vec![Node::leaf(), elicit]))
}

/// One menu branch of the ex3 mechanism, written for the branch that
/// serves `t1`; the `t2` branch is the image under swapping `α` and `β`.
fn ex3_branch(delta: f64, mirrored: bool) -> Node {
    // state order: alpha, beta, gamma
    let mut rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0 - delta, delta]];
    if mirrored {
        rows.swap(0, 1);
    }
    let (own, other) = if mirrored { ("beta", "alpha") } else { ("alpha", "beta") };
    let first = SignalStrategy::new(vec![format!("g_{own}_gamma"), format!("g_{other}_gamma")], rows);
    // Reveals whether the state is gamma; the unreachable own-state row goes
    // to the non-gamma signal.
    let reveal = SignalStrategy::new(
        vec![format!("g_{other}"), "g_gamma".to_string()],
        vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
    );
    let reveal = Node::signal(reveal, vec![Node::leaf(), Node::leaf()]).named(format!("S_{other}"));
    let (i, opposite) = if mirrored { (2, 0) } else { (1, 1) };
    let mut options = vec![Node::leaf(), Node::leaf()];
    options[opposite] = reveal;
    let elicit = Node::elicit(vec![vec![0], vec![1]], options).named(format!("E_{i}"));
    Node::signal(first, vec![Node::leaf(), elicit]).named(format!("S_{i}"))
}

fn ex3_fig2(delta: f64) -> MechanismTree {
    MechanismTree::new(
        "ex3_fig2",
        Node::menu(vec![ex3_branch(delta, false), ex3_branch(delta, true)]),
    )
}

/// `E_0, S_1, E_1, ..., E_{n-1}, S_n`. `E_i` asks whether the type is `t_i`;
/// `S_i` signals `g_i` on `θ_1..θ_i` and `g_{>i}` otherwise.
fn ex5_pie(n: usize) -> MechanismTree {
    let mut node = None;
    for i in (1..=n).rev() {
        let rows = (1..=n)
            .map(|s| if s <= i { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let strat = SignalStrategy::new(vec![format!("g_{i}"), format!("g_>{i}")], rows);
        let rest = node.take().unwrap_or_else(Node::leaf);
        let s_i = Node::signal(strat, vec![Node::leaf(), rest]).named(format!("S_{i}"));
        let e = Node::elicit(vec![vec![i - 1], (i..=n).collect()], vec![Node::leaf(), s_i])
            .named(format!("E_{}", i - 1));
        node = Some(e);
    }
    MechanismTree::new("ex5_pie", node.expect("n >= 1"))
}
