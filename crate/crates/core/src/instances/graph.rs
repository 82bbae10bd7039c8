use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::InstanceError;
use crate::model::Instance;

/// Largest graph accepted by [`max_independent_set`].
pub const MIS_SIZE_CAP: usize = 20;

/// A simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = InstanceError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, InstanceError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(InstanceError::Graph(format!("self-loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(InstanceError::Graph(format!("edge ({u},{v}) out of range for n = {n}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).expect("valid")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = if n < 3 {
            (1..n).map(|v| (v - 1, v)).collect()
        } else {
            (0..n).map(|u| (u, (u + 1) % n)).collect()
        };
        Self::new(n, edges).expect("valid")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v))).expect("valid")
    }

    /// The star with `n` vertices: a hub joined to `n - 1` leaves.
    pub fn star(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (0, v))).expect("valid")
    }

    pub fn edgeless(n: usize) -> Self {
        Self { n, edges: BTreeSet::new() }
    }

    /// Named families: `K<n>`, `C<n>`, `P<n>`, `S<n>` (star on `n` vertices)
    /// and `edgeless-<n>`, case-insensitive.
    pub fn named(name: &str) -> Option<Self> {
        let lower = name.trim().to_ascii_lowercase();
        if let Some(k) = lower.strip_prefix("edgeless-").or_else(|| lower.strip_prefix("e")) {
            return k.parse().ok().map(Self::edgeless);
        }
        let (family, k) = lower.split_at(lower.chars().next()?.len_utf8());
        let k: usize = k.parse().ok()?;
        if k == 0 {
            return None;
        }
        match family {
            "k" => Some(Self::complete(k)),
            "c" => Some(Self::cycle(k)),
            "p" => Some(Self::path(k)),
            "s" => Some(Self::star(k)),
            _ => None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        serde_json::from_str(text).map_err(|e| InstanceError::Graph(e.to_string()))
    }

    /// DIMACS edge format: `c` comments, one `p edge <n> <m>` line and
    /// `e <u> <v>` lines with 1-based vertices.
    pub fn from_dimacs(text: &str) -> Result<Self, InstanceError> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || InstanceError::Graph(format!("DIMACS line {}: '{}'", lineno + 1, line.trim()));
            match fields.first() {
                None | Some(&"c") => {}
                Some(&"p") => {
                    if fields.len() < 3 || n.is_some() {
                        return Err(bad());
                    }
                    n = Some(fields[2].parse::<usize>().map_err(|_| bad())?);
                }
                Some(&"e") => {
                    if fields.len() != 3 {
                        return Err(bad());
                    }
                    let u: usize = fields[1].parse().map_err(|_| bad())?;
                    let v: usize = fields[2].parse().map_err(|_| bad())?;
                    if u == 0 || v == 0 {
                        return Err(bad());
                    }
                    edges.push((u - 1, v - 1));
                }
                Some(_) => return Err(bad()),
            }
        }
        let n = n.ok_or_else(|| InstanceError::Graph("DIMACS input has no 'p edge' line".into()))?;
        Self::new(n, edges)
    }

    /// JSON when the text starts with `{`, DIMACS otherwise.
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        if text.trim_start().starts_with('{') {
            Self::from_json_str(text)
        } else {
            Self::from_dimacs(text)
        }
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().all(|&v| v < self.n)
            && set
                .iter()
                .enumerate()
                .all(|(i, &u)| set[i + 1..].iter().all(|&v| u != v && !self.adjacent(u, v)))
    }
}

/// Maximum independent set by branch and bound; returns the size and a
/// lexicographically smallest witness among the maximum sets found first.
pub fn max_independent_set(g: &Graph) -> Result<(usize, Vec<usize>), InstanceError> {
    if g.n > MIS_SIZE_CAP {
        return Err(InstanceError::SizeCap {
            n: g.n,
            cap: MIS_SIZE_CAP,
        });
    }
    let adj: Vec<u32> = (0..g.n)
        .map(|u| (0..g.n).filter(|&v| g.adjacent(u, v)).fold(0u32, |m, v| m | (1 << v)))
        .collect();
    let mut best = 0u32;
    search(&adj, 0, 0, mask(g.n), &mut best);
    let witness: Vec<usize> = (0..g.n).filter(|&v| best & (1 << v) != 0).collect();
    Ok((witness.len(), witness))
}

fn mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn search(adj: &[u32], v: usize, chosen: u32, allowed: u32, best: &mut u32) {
    let remaining = (allowed >> v).count_ones();
    if chosen.count_ones() + remaining <= best.count_ones() {
        return;
    }
    if v == adj.len() {
        *best = chosen;
        return;
    }
    if allowed & (1 << v) != 0 {
        search(adj, v + 1, chosen | (1 << v), allowed & !adj[v] & !(1 << v), best);
    }
    search(adj, v + 1, chosen, allowed & !(1 << v), best);
}

/// The independent-set gadget: a type `t_v` per vertex plus a special type
/// `t_star` of zero mass, two equally likely states, and actions `a0`, `b0`,
/// `a_v`, `b_v`.
pub fn reduce_mis(g: &Graph) -> Instance {
    let n = g.n;
    let nf = n as f64;
    let states = vec!["theta1".to_string(), "theta2".to_string()];
    let mut types: Vec<String> = (1..=n).map(|v| format!("t_v{v}")).collect();
    types.push("t_star".into());
    let mut actions = vec!["a0".to_string(), "b0".to_string()];
    actions.extend((1..=n).map(|v| format!("a_v{v}")));
    actions.extend((1..=n).map(|v| format!("b_v{v}")));
    let (a_of, b_of) = (|w: usize| 2 + w, |w: usize| 2 + n + w);

    let mut u = Vec::with_capacity(n + 1);
    for v in 0..n {
        let mut th1 = vec![0.0; 2 * n + 2];
        let mut th2 = vec![0.0; 2 * n + 2];
        th1[0] = 1.0 + 1.0 / nf;
        th1[1] = -1.0 + 1.0 / nf;
        th2[0] = -1.0 + 1.0 / nf;
        th2[1] = 1.0 + 1.0 / nf;
        for w in 0..n {
            let (x1, y1) = if w == v {
                (1.0, -1.0)
            } else if g.adjacent(v, w) {
                (-nf, -nf)
            } else {
                (0.0, 0.0)
            };
            th1[a_of(w)] = x1;
            th1[b_of(w)] = y1;
            // mirrored in the second state
            th2[a_of(w)] = y1;
            th2[b_of(w)] = x1;
        }
        u.push(vec![th1, th2]);
    }
    let mut star = vec![1.0; 2 * n + 2];
    star[0] = -1.0;
    star[1] = -1.0;
    u.push(vec![star.clone(), star]);
    let mut principal = vec![1.0; 2 * n + 2];
    principal[0] = 0.0;
    principal[1] = 0.0;
    let mut rho = vec![1.0 / nf; n];
    rho.push(0.0);
    Instance::new(states, types, actions, vec![0.5, 0.5], rho, u, vec![principal.clone(), principal])
        .expect("gadget tables are well-shaped")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mis_sizes() {
        assert_eq!(max_independent_set(&Graph::complete(3)).unwrap().0, 1);
        assert_eq!(max_independent_set(&Graph::cycle(5)).unwrap().0, 2);
        assert_eq!(max_independent_set(&Graph::edgeless(4)).unwrap().0, 4);
        assert_eq!(max_independent_set(&Graph::path(4)).unwrap().0, 2);
        assert_eq!(max_independent_set(&Graph::star(4)).unwrap().0, 3);
        let (k, w) = max_independent_set(&Graph::cycle(7)).unwrap();
        assert_eq!(k, 3);
        assert!(Graph::cycle(7).is_independent(&w));
        assert!(matches!(
            max_independent_set(&Graph::edgeless(21)),
            Err(InstanceError::SizeCap { .. })
        ));
    }

    #[test]
    fn named_graphs() {
        assert_eq!(Graph::named("K3"), Some(Graph::complete(3)));
        assert_eq!(Graph::named("c5").unwrap().edges().count(), 5);
        assert_eq!(Graph::named("S4").unwrap().edges().count(), 3);
        assert_eq!(Graph::named("edgeless-3"), Some(Graph::edgeless(3)));
        assert_eq!(Graph::named("Q2"), None);
    }

    #[test]
    fn parse_formats() {
        let j = Graph::parse(r#"{"n": 3, "edges": [[0, 1], [2, 1]]}"#).unwrap();
        let d = Graph::parse("c path\np edge 3 2\ne 1 2\ne 2 3\n").unwrap();
        assert_eq!(j, d);
        assert!(Graph::parse(r#"{"n": 2, "edges": [[0, 0]]}"#).is_err());
        assert!(Graph::parse("e 1 2\n").is_err());
        let back: Graph = serde_json::from_value(serde_json::to_value(&j).unwrap()).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn gadget_entries() {
        let inst = reduce_mis(&Graph::complete(3));
        assert_eq!((inst.n_types(), inst.n_actions()), (4, 8));
        let a_v2 = inst.action_index("a_v2").unwrap();
        assert_eq!(inst.u(0, 0, a_v2), -3.0);
        assert_eq!(inst.u(0, 0, inst.action_index("a_v1").unwrap()), 1.0);
        assert_eq!(inst.u(0, 1, inst.action_index("b_v1").unwrap()), 1.0);
        assert_eq!(inst.type_dist()[3], 0.0);

        let sparse = reduce_mis(&Graph::edgeless(2));
        assert_eq!(sparse.u(0, 0, sparse.action_index("a_v2").unwrap()), 0.0);
        assert_eq!(reduce_mis(&Graph::edgeless(1)).n_types(), 2);
    }
}
