//! The LP whose optimum is the best indefinite-stage mechanism. It is
//! organized around the four-level shape: a menu, a type recommendation
//! `S_i`, a direct report `E_ij` and an action recommendation `S_ijk`.

use serde::{Deserialize, Serialize};

use super::{solve_lp_with, Backend, LinearProgram, LpError, LpStatus, Relation, Sense, VarId, FEASIBILITY_TOLERANCE};
use crate::model::{argmax_actions_weighted, Instance, TIE_TOLERANCE};

/// Variable offsets of the EnSES LP.
#[derive(Clone, Copy, Debug)]
pub struct EnsesLayout {
    pub n_types: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pi0: usize,
    phi0: usize,
    u0: usize,
    ubar0: usize,
    total: usize,
}

impl EnsesLayout {
    pub fn new(inst: &Instance) -> Self {
        let (n, s, a) = (inst.n_types(), inst.n_states(), inst.n_actions());
        let pi0 = 0;
        let phi0 = pi0 + n * s * n;
        let u0 = phi0 + n * n * n * s * a;
        let ubar0 = u0 + n * n * n * n;
        let total = ubar0 + n * n * n;
        Self {
            n_types: n,
            n_states: s,
            n_actions: a,
            pi0,
            phi0,
            u0,
            ubar0,
            total,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.total
    }

    /// `π_i(t_j | θ)`.
    pub fn pi(&self, i: usize, s: usize, j: usize) -> VarId {
        VarId(self.pi0 + (i * self.n_states + s) * self.n_types + j)
    }

    /// `φ_ijk(a | θ)`.
    pub fn phi(&self, i: usize, j: usize, k: usize, s: usize, a: usize) -> VarId {
        let n = self.n_types;
        VarId(self.phi0 + ((((i * n + j) * n + k) * self.n_states + s) * self.n_actions) + a)
    }

    /// `u_{t_i}(S_ℓjk)`.
    pub fn u(&self, i: usize, l: usize, j: usize, k: usize) -> VarId {
        let n = self.n_types;
        VarId(self.u0 + ((i * n + l) * n + j) * n + k)
    }

    /// `ū_{t_i}(E_ℓj)`.
    pub fn ubar(&self, i: usize, l: usize, j: usize) -> VarId {
        let n = self.n_types;
        VarId(self.ubar0 + (i * n + l) * n + j)
    }

    pub fn extract(&self, x: &[f64], objective_value: f64) -> EnsesSolution {
        let (n, ns, na) = (self.n_types, self.n_states, self.n_actions);
        let clamp = |v: f64| v.max(0.0);
        EnsesSolution {
            pi: (0..n)
                .map(|i| (0..ns).map(|s| (0..n).map(|j| clamp(x[self.pi(i, s, j).0])).collect()).collect())
                .collect(),
            phi: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| {
                                    (0..ns)
                                        .map(|s| (0..na).map(|a| clamp(x[self.phi(i, j, k, s, a).0])).collect())
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            node_values: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|l| (0..n).map(|j| (0..n).map(|k| x[self.u(i, l, j, k).0]).collect()).collect())
                        .collect()
                })
                .collect(),
            aux_upper: (0..n)
                .map(|i| (0..n).map(|l| (0..n).map(|j| x[self.ubar(i, l, j).0]).collect()).collect())
                .collect(),
            objective_value,
        }
    }
}

/// A solution of the EnSES LP in structured form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsesSolution {
    /// `pi[i][θ][j]` = `π_i(t_j | θ)`.
    pub pi: Vec<Vec<Vec<f64>>>,
    /// `phi[i][j][k][θ][a]` = `φ_ijk(a | θ)`.
    pub phi: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `node_values[i][ℓ][j][k]` = `u_{t_i}(S_ℓjk)`.
    pub node_values: Vec<Vec<Vec<Vec<f64>>>>,
    /// `aux_upper[i][ℓ][j]` = `ū_{t_i}(E_ℓj)`.
    pub aux_upper: Vec<Vec<Vec<f64>>>,
    pub objective_value: f64,
}

impl EnsesSolution {
    pub fn n_types(&self) -> usize {
        self.pi.len()
    }

    /// Flattens back into an assignment for `enses_lp(inst)`.
    pub fn to_assignment(&self, layout: &EnsesLayout) -> Vec<f64> {
        let mut x = vec![0.0; layout.n_vars()];
        let (n, ns, na) = (layout.n_types, layout.n_states, layout.n_actions);
        for i in 0..n {
            for s in 0..ns {
                for j in 0..n {
                    x[layout.pi(i, s, j).0] = self.pi[i][s][j];
                }
            }
            for j in 0..n {
                for k in 0..n {
                    for s in 0..ns {
                        for a in 0..na {
                            x[layout.phi(i, j, k, s, a).0] = self.phi[i][j][k][s][a];
                        }
                    }
                }
            }
            for l in 0..n {
                for j in 0..n {
                    x[layout.ubar(i, l, j).0] = self.aux_upper[i][l][j];
                    for k in 0..n {
                        x[layout.u(i, l, j, k).0] = self.node_values[i][l][j][k];
                    }
                }
            }
        }
        x
    }

    /// Flow, distribution and value-definition invariants, each within `tol`.
    pub fn invariant_violations(&self, inst: &Instance, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let (n, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
        let t = inst.types();
        for i in 0..n {
            for s in 0..ns {
                let sum: f64 = self.pi[i][s].iter().sum();
                if (sum - 1.0).abs() > tol || self.pi[i][s].iter().any(|p| *p < -tol) {
                    out.push(format!("pi[{}] at {} is not a distribution (sums to {sum})", t[i], inst.states()[s]));
                }
                for j in 0..n {
                    for k in 0..n {
                        let flow: f64 = self.phi[i][j][k][s].iter().sum();
                        if (flow - self.pi[i][s][j]).abs() > tol {
                            out.push(format!(
                                "flow at ({},{},{}) in {}: {flow} vs {}",
                                t[i],
                                t[j],
                                t[k],
                                inst.states()[s],
                                self.pi[i][s][j]
                            ));
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut def = 0.0;
                        for s in 0..ns {
                            for a in 0..na {
                                def += inst.prior()[s] * self.phi[l][j][k][s][a] * inst.u(i, s, a);
                            }
                        }
                        let got = self.node_values[i][l][j][k];
                        if (got - def).abs() > tol * def.abs().max(1.0) {
                            out.push(format!(
                                "value of {} at S({},{},{}) is {got}, defined as {def}",
                                t[i], t[l], t[j], t[k]
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn enses_lp(inst: &Instance) -> (LinearProgram, EnsesLayout) {
    let layout = EnsesLayout::new(inst);
    let (n, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    let (tl, sl, al) = (inst.types(), inst.states(), inst.actions());
    let mu = inst.prior();
    let mut lp = LinearProgram::new("enses", Sense::Maximize);
    for i in 0..n {
        for s in 0..ns {
            for j in 0..n {
                lp.add_var(format!("pi[{},{},{}]", tl[i], sl[s], tl[j]), 0.0, f64::INFINITY);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..ns {
                    for a in 0..na {
                        lp.add_var(
                            format!("phi[{},{},{},{},{}]", tl[i], tl[j], tl[k], sl[s], al[a]),
                            0.0,
                            f64::INFINITY,
                        );
                    }
                }
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    lp.add_var(
                        format!("u[{},{},{},{}]", tl[i], tl[l], tl[j], tl[k]),
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                    );
                }
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                lp.add_var(format!("ubar[{},{},{}]", tl[i], tl[l], tl[j]), f64::NEG_INFINITY, f64::INFINITY);
            }
        }
    }
    debug_assert_eq!(lp.n_vars(), layout.n_vars());

    for i in 0..n {
        for s in 0..ns {
            let terms = (0..n).map(|j| (layout.pi(i, s, j), 1.0)).collect();
            lp.add_constraint(format!("dist[{},{}]", tl[i], sl[s]), terms, Relation::Eq, 1.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..ns {
                    let mut terms: Vec<(VarId, f64)> = (0..na).map(|a| (layout.phi(i, j, k, s, a), 1.0)).collect();
                    terms.push((layout.pi(i, s, j), -1.0));
                    lp.add_constraint(
                        format!("flow[{},{},{},{}]", tl[i], tl[j], tl[k], sl[s]),
                        terms,
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for a in 0..na {
                    for b in 0..na {
                        if a == b {
                            continue;
                        }
                        let terms: Vec<(VarId, f64)> = (0..ns)
                            .map(|s| (layout.phi(i, j, k, s, a), mu[s] * (inst.u(k, s, a) - inst.u(k, s, b))))
                            .filter(|(_, c)| *c != 0.0)
                            .collect();
                        if terms.is_empty() {
                            continue;
                        }
                        lp.add_constraint(
                            format!("obey[{},{},{},{}>{}]", tl[i], tl[j], tl[k], al[a], al[b]),
                            terms,
                            Relation::Ge,
                            0.0,
                        );
                    }
                }
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut terms = vec![(layout.u(i, l, j, k), 1.0)];
                    for s in 0..ns {
                        for a in 0..na {
                            let c = mu[s] * inst.u(i, s, a);
                            if c != 0.0 {
                                terms.push((layout.phi(l, j, k, s, a), -c));
                            }
                        }
                    }
                    lp.add_constraint(
                        format!("value[{},{},{},{}]", tl[i], tl[l], tl[j], tl[k]),
                        terms,
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if k == j {
                    continue;
                }
                lp.add_constraint(
                    format!("report[{},{}->{}]", tl[i], tl[j], tl[k]),
                    vec![(layout.u(i, i, j, j), 1.0), (layout.u(i, i, j, k), -1.0)],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    lp.add_constraint(
                        format!("upper[{},{},{},{}]", tl[i], tl[l], tl[j], tl[k]),
                        vec![(layout.ubar(i, l, j), 1.0), (layout.u(i, l, j, k), -1.0)],
                        Relation::Ge,
                        0.0,
                    );
                }
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            if l == i {
                continue;
            }
            let mut terms: Vec<(VarId, f64)> = (0..n).map(|j| (layout.u(i, i, j, j), 1.0)).collect();
            terms.extend((0..n).map(|j| (layout.ubar(i, l, j), -1.0)));
            lp.add_constraint(format!("menu[{}->{}]", tl[i], tl[l]), terms, Relation::Ge, 0.0);
        }
    }
    let mut objective = Vec::new();
    for i in 0..n {
        let rho = inst.type_dist()[i];
        if rho == 0.0 {
            continue;
        }
        for j in 0..n {
            for s in 0..ns {
                for a in 0..na {
                    let c = rho * mu[s] * inst.v(s, a);
                    if c != 0.0 {
                        objective.push((layout.phi(i, j, j, s, a), c));
                    }
                }
            }
        }
    }
    lp.set_objective(objective);
    (lp, layout)
}

/// The truthful, uninformative solution: every type picks its own menu
/// branch, is told to report itself, and is recommended a prior-optimal
/// action of whichever type it reports (the principal's favorite among ties).
pub fn uninformative_enses_solution(inst: &Instance) -> EnsesSolution {
    let layout = EnsesLayout::new(inst);
    let (n, ns) = (inst.n_types(), inst.n_states());
    let prior_best: Vec<usize> = (0..n)
        .map(|k| {
            let ties = argmax_actions_weighted(inst, inst.prior(), k, TIE_TOLERANCE);
            let v = |a: usize| inst.principal_utility(inst.prior(), a);
            ties.into_iter().fold(usize::MAX, |best, a| {
                if best == usize::MAX || v(a) > v(best) + TIE_TOLERANCE { a } else { best }
            })
        })
        .collect();
    let mut x = vec![0.0; layout.n_vars()];
    for i in 0..n {
        for s in 0..ns {
            x[layout.pi(i, s, i).0] = 1.0;
            for k in 0..n {
                x[layout.phi(i, i, k, s, prior_best[k]).0] = 1.0;
            }
        }
    }
    let value_of = |i: usize, a: usize| inst.agent_utility(inst.prior(), i, a);
    for i in 0..n {
        for l in 0..n {
            for k in 0..n {
                x[layout.u(i, l, l, k).0] = value_of(i, prior_best[k]);
            }
            for j in 0..n {
                let best = (0..n).map(|k| x[layout.u(i, l, j, k).0]).fold(f64::NEG_INFINITY, f64::max);
                x[layout.ubar(i, l, j).0] = best;
            }
        }
    }
    let (lp, _) = enses_lp(inst);
    let value = lp.objective_at(&x);
    layout.extract(&x, value)
}

pub fn solve_enses(inst: &Instance) -> Result<(f64, EnsesSolution), LpError> {
    solve_enses_with(inst, Backend::from_env()?)
}

pub fn solve_enses_with(inst: &Instance, backend: Backend) -> Result<(f64, EnsesSolution), LpError> {
    let (lp, layout) = enses_lp(inst);
    let start = uninformative_enses_solution(inst).to_assignment(&layout);
    let residual = lp.max_violation(&start);
    if residual > FEASIBILITY_TOLERANCE {
        return Err(LpError::Solve(format!(
            "uninformative truthful point violates the LP by {residual:e}"
        )));
    }
    let report = solve_lp_with(&lp, backend);
    match report.status {
        LpStatus::Optimal => {
            let sol = layout.extract(&report.assignment, report.objective_value);
            Ok((report.objective_value, sol))
        }
        status => Err(LpError::Solve(format!(
            "{status:?}: {}",
            report.message.unwrap_or_default()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_instance, random_instance, ExampleId, ExampleParams};

    fn ex(id: ExampleId) -> Instance {
        example_instance(id, &ExampleParams::default()).unwrap()
    }

    #[test]
    fn ex1_reaches_one() {
        let inst = ex(ExampleId::Ex1);
        let (v, sol) = solve_enses_with(&inst, Backend::MicroLp).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
        assert!(sol.invariant_violations(&inst, 1e-7).is_empty());
    }

    #[test]
    fn ex4_is_zero() {
        let (v, _) = solve_enses_with(&ex(ExampleId::Ex4), Backend::Dense).unwrap();
        assert!(v.abs() < 1e-6, "{v}");
    }

    #[test]
    fn ex3_beats_the_non_binding_tree() {
        let p = ExampleParams::default();
        let inst = example_instance(ExampleId::Ex3, &p).unwrap();
        let (v, _) = solve_enses_with(&inst, Backend::MicroLp).unwrap();
        assert!(v >= 1.0 - p.ex3_delta() / 3.0 - 1e-6, "{v}");
    }

    #[test]
    fn uninformative_point_is_feasible() {
        for seed in 0..5 {
            let inst = random_instance(seed, 3, 3, 3, (-1.0, 1.0));
            let (lp, layout) = enses_lp(&inst);
            let sol = uninformative_enses_solution(&inst);
            assert!(lp.max_violation(&sol.to_assignment(&layout)) <= 1e-9);
            assert!(sol.invariant_violations(&inst, 1e-9).is_empty());
            let base = crate::lp::uninformative_value(&inst);
            assert!((sol.objective_value - base).abs() <= 1e-9);
        }
    }

    #[test]
    fn layout_round_trip() {
        let inst = random_instance(4, 2, 2, 3, (0.0, 1.0));
        let (lp, layout) = enses_lp(&inst);
        let x: Vec<f64> = (0..lp.n_vars()).map(|k| k as f64 * 0.5).collect();
        let sol = layout.extract(&x, 0.0);
        assert_eq!(sol.to_assignment(&layout), x);
    }
}
