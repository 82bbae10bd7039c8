//! Two-stage formulations over per-branch joint policies `π_t(θ, a)`: the
//! non-credible LP, the credible IC LP, and the per-imitation-mapping LPs
//! behind the exact brute-force oracle.

use rayon::prelude::*;
use serde::Serialize;

use super::{solve_lp_with, Backend, LinearProgram, LpError, LpStatus, Relation, Sense, SolveReport, VarId};
use crate::model::{argmax_actions_weighted, Instance, TIE_TOLERANCE};

/// Joint policies indexed `[branch type][state][action]`; each branch's
/// state marginals equal the prior.
pub type Policies = Vec<Vec<Vec<f64>>>;

pub const DEFAULT_SIGMA_CAP: u64 = 1_000_000;

/// Variable layout of one block of branch policies.
#[derive(Clone, Copy, Debug)]
pub struct PolicyLayout {
    pub offset: usize,
    pub n_types: usize,
    pub n_states: usize,
    pub n_actions: usize,
}

impl PolicyLayout {
    pub fn var(&self, t: usize, s: usize, a: usize) -> VarId {
        VarId(self.offset + (t * self.n_states + s) * self.n_actions + a)
    }

    pub fn extract(&self, x: &[f64]) -> Policies {
        (0..self.n_types)
            .map(|t| {
                (0..self.n_states)
                    .map(|s| (0..self.n_actions).map(|a| x[self.var(t, s, a).0].max(0.0)).collect())
                    .collect()
            })
            .collect()
    }
}

fn add_policies(lp: &mut LinearProgram, inst: &Instance) -> PolicyLayout {
    let layout = PolicyLayout {
        offset: lp.n_vars(),
        n_types: inst.n_types(),
        n_states: inst.n_states(),
        n_actions: inst.n_actions(),
    };
    for t in inst.types() {
        for s in inst.states() {
            for a in inst.actions() {
                lp.add_var(format!("pi[{t},{s},{a}]"), 0.0, f64::INFINITY);
            }
        }
    }
    layout
}

fn add_marginals(lp: &mut LinearProgram, inst: &Instance, p: &PolicyLayout) {
    for t in 0..inst.n_types() {
        for s in 0..inst.n_states() {
            let terms = (0..inst.n_actions()).map(|a| (p.var(t, s, a), 1.0)).collect();
            lp.add_constraint(
                format!("marginal[{},{}]", inst.types()[t], inst.states()[s]),
                terms,
                Relation::Eq,
                inst.prior()[s],
            );
        }
    }
}

/// Recommended actions in branch `t` must be optimal for type `t`.
fn add_obedience(lp: &mut LinearProgram, inst: &Instance, p: &PolicyLayout, t: usize) {
    for a in 0..inst.n_actions() {
        for b in 0..inst.n_actions() {
            if a == b {
                continue;
            }
            let terms = (0..inst.n_states())
                .map(|s| (p.var(t, s, a), inst.u(t, s, a) - inst.u(t, s, b)))
                .collect();
            lp.add_constraint(
                format!(
                    "obey[{},{}>{}]",
                    inst.types()[t],
                    inst.actions()[a],
                    inst.actions()[b]
                ),
                terms,
                Relation::Ge,
                0.0,
            );
        }
    }
}

/// `Σ_{θ,a} π_t(θ,a)·u_who(θ,a)` as LP terms with an optional sign.
fn branch_utility(inst: &Instance, p: &PolicyLayout, branch: usize, who: usize, sign: f64) -> Vec<(VarId, f64)> {
    let mut terms = Vec::with_capacity(inst.n_states() * inst.n_actions());
    for s in 0..inst.n_states() {
        for a in 0..inst.n_actions() {
            terms.push((p.var(branch, s, a), sign * inst.u(who, s, a)));
        }
    }
    terms
}

fn principal_objective(inst: &Instance, p: &PolicyLayout, branch_of: impl Fn(usize) -> usize) -> Vec<(VarId, f64)> {
    let mut terms = Vec::new();
    for t in 0..inst.n_types() {
        let rho = inst.type_dist()[t];
        if rho == 0.0 {
            continue;
        }
        for s in 0..inst.n_states() {
            for a in 0..inst.n_actions() {
                terms.push((p.var(branch_of(t), s, a), rho * inst.v(s, a)));
            }
        }
    }
    terms
}

/// Constraint-family sizes of the non-credible LP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NoncredibleShape {
    pub variables: usize,
    pub report_rows: usize,
    pub deviation_rows: usize,
    pub marginal_rows: usize,
}

pub fn noncredible_shape(inst: &Instance) -> NoncredibleShape {
    let (t, s, a) = (inst.n_types(), inst.n_states(), inst.n_actions());
    NoncredibleShape {
        variables: t * s * a + t * t * a,
        report_rows: t * t,
        deviation_rows: t * t * a * a,
        marginal_rows: t * s,
    }
}

/// Optimal mechanism against a non-credible agent, who may misreport and
/// then remap recommended actions freely. The inner maximization over
/// remappings is replaced by free variables `z(t,t',a)` bounding the best
/// response to each recommendation.
pub fn noncredible_lp(inst: &Instance) -> (LinearProgram, PolicyLayout) {
    let mut lp = LinearProgram::new("noncredible", Sense::Maximize);
    let p = add_policies(&mut lp, inst);
    let (nt, na) = (inst.n_types(), inst.n_actions());
    let z0 = lp.n_vars();
    let z = |t: usize, tp: usize, a: usize| VarId(z0 + (t * nt + tp) * na + a);
    for t in inst.types() {
        for tp in inst.types() {
            for a in inst.actions() {
                lp.add_var(format!("z[{t},{tp},{a}]"), f64::NEG_INFINITY, f64::INFINITY);
            }
        }
    }
    for t in 0..nt {
        for tp in 0..nt {
            let mut terms = branch_utility(inst, &p, t, t, 1.0);
            terms.extend((0..na).map(|a| (z(t, tp, a), -1.0)));
            lp.add_constraint(
                format!("report[{}->{}]", inst.types()[t], inst.types()[tp]),
                terms,
                Relation::Ge,
                0.0,
            );
        }
    }
    for t in 0..nt {
        for tp in 0..nt {
            for a in 0..na {
                for b in 0..na {
                    let mut terms = vec![(z(t, tp, a), 1.0)];
                    terms.extend((0..inst.n_states()).map(|s| (p.var(tp, s, a), -inst.u(t, s, b))));
                    lp.add_constraint(
                        format!(
                            "deviate[{}->{},{}>{}]",
                            inst.types()[t],
                            inst.types()[tp],
                            inst.actions()[a],
                            inst.actions()[b]
                        ),
                        terms,
                        Relation::Ge,
                        0.0,
                    );
                }
            }
        }
    }
    add_marginals(&mut lp, inst, &p);
    lp.set_objective(principal_objective(inst, &p, |t| t));
    (lp, p)
}

fn finish(report: SolveReport, layout: &PolicyLayout) -> Result<(f64, Policies), LpError> {
    match report.status {
        LpStatus::Optimal => Ok((report.objective_value, layout.extract(&report.assignment))),
        status => Err(LpError::Solve(format!(
            "{status:?}: {}",
            report.message.unwrap_or_default()
        ))),
    }
}

pub fn solve_noncredible(inst: &Instance) -> Result<(f64, Policies), LpError> {
    solve_noncredible_with(inst, Backend::from_env()?)
}

pub fn solve_noncredible_with(inst: &Instance, backend: Backend) -> Result<(f64, Policies), LpError> {
    let (lp, p) = noncredible_lp(inst);
    finish(solve_lp_with(&lp, backend), &p)
}

fn own_utility(inst: &Instance, policies: &Policies, t: usize) -> f64 {
    (0..inst.n_states())
        .flat_map(|s| (0..inst.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| policies[t][s][a] * inst.u(t, s, a))
        .sum()
}

/// Checks the non-credible constraints on fixed policies by brute force:
/// for every `t`, `t'` and every remapping `f: A -> A`, reporting `t'` and
/// playing `f(a)` must not beat truth-telling by more than `tol`.
/// Enumerates `|A|^|A|` maps, so only meant for small action sets.
pub fn satisfies_deviation_maps(inst: &Instance, policies: &Policies, tol: f64) -> bool {
    let (nt, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    let total = (na as u64).pow(na as u32);
    for t in 0..nt {
        let truth = own_utility(inst, policies, t);
        for tp in 0..nt {
            let mut f = vec![0usize; na];
            for code in 0..total {
                let mut c = code;
                for slot in f.iter_mut() {
                    *slot = (c % na as u64) as usize;
                    c /= na as u64;
                }
                let dev: f64 = (0..ns)
                    .flat_map(|s| (0..na).map(move |a| (s, a)))
                    .map(|(s, a)| policies[tp][s][a] * inst.u(t, s, f[a]))
                    .sum();
                if dev > truth + tol {
                    return false;
                }
            }
        }
    }
    true
}

/// The linearized form of the same constraints for fixed policies: an LP
/// in `z(t,t',a)` alone, with `Σ_a z(t,t',a) <= U_t + tol` and
/// `z(t,t',a) >= Σ_θ π_t'(θ,a)·u_t(θ,b)` for every `b`.
pub fn linearization_lp(inst: &Instance, policies: &Policies, tol: f64) -> LinearProgram {
    let (nt, ns, na) = (inst.n_types(), inst.n_states(), inst.n_actions());
    let mut lp = LinearProgram::new("linearization", Sense::Maximize);
    let z = |t: usize, tp: usize, a: usize| VarId((t * nt + tp) * na + a);
    for t in inst.types() {
        for tp in inst.types() {
            for a in inst.actions() {
                lp.add_var(format!("z[{t},{tp},{a}]"), f64::NEG_INFINITY, f64::INFINITY);
            }
        }
    }
    for t in 0..nt {
        let truth = own_utility(inst, policies, t);
        for tp in 0..nt {
            let terms = (0..na).map(|a| (z(t, tp, a), 1.0)).collect();
            lp.add_constraint(format!("report[{t}->{tp}]"), terms, Relation::Le, truth + tol);
            for a in 0..na {
                for b in 0..na {
                    let rhs = (0..ns).map(|s| policies[tp][s][a] * inst.u(t, s, b)).sum();
                    lp.add_constraint(format!("deviate[{t}->{tp},{a}>{b}]"), vec![(z(t, tp, a), 1.0)], Relation::Ge, rhs);
                }
            }
        }
    }
    lp
}

/// Whether [`linearization_lp`] admits a feasible `z`.
pub fn linearization_feasible(inst: &Instance, policies: &Policies, tol: f64, backend: Backend) -> Result<bool, LpError> {
    let report = solve_lp_with(&linearization_lp(inst, policies, tol), backend);
    match report.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        status => Err(LpError::Solve(format!("{status:?}: {}", report.message.unwrap_or_default()))),
    }
}

/// The per-mapping LP: type `t` reports `sigma[t]` and follows that branch's
/// recommendations, which must be optimal for the reported type; no type
/// gains by reporting anything else.
pub fn es_sigma_lp(inst: &Instance, sigma: &SigmaMapping) -> (LinearProgram, PolicyLayout) {
    let mut lp = LinearProgram::new("es_sigma", Sense::Maximize);
    let p = add_policies(&mut lp, inst);
    let nt = inst.n_types();
    for t in 0..nt {
        add_obedience(&mut lp, inst, &p, t);
    }
    for t in 0..nt {
        let own = sigma.0[t];
        for alt in 0..nt {
            if alt == own {
                continue;
            }
            let mut terms = branch_utility(inst, &p, own, t, 1.0);
            terms.extend(branch_utility(inst, &p, alt, t, -1.0));
            lp.add_constraint(
                format!(
                    "report[{} as {} over {}]",
                    inst.types()[t],
                    inst.types()[own],
                    inst.types()[alt]
                ),
                terms,
                Relation::Ge,
                0.0,
            );
        }
    }
    add_marginals(&mut lp, inst, &p);
    lp.set_objective(principal_objective(inst, &p, |t| sigma.0[t]));
    (lp, p)
}

/// Credible IC mechanism: truthful reports, obedient actions.
pub fn credible_ic_lp(inst: &Instance) -> (LinearProgram, PolicyLayout) {
    let (mut lp, p) = es_sigma_lp(inst, &SigmaMapping::identity(inst.n_types()));
    lp.name = "credible_ic".into();
    (lp, p)
}

pub fn solve_credible_ic(inst: &Instance) -> Result<(f64, Policies), LpError> {
    solve_credible_ic_with(inst, Backend::from_env()?)
}

/// Solves the IC LP, then re-solves over its optimal face maximizing the
/// slack of the truthful-report constraints, so that a tree built from the
/// policies does not rely on ties at the reporting stage.
pub fn solve_credible_ic_with(inst: &Instance, backend: Backend) -> Result<(f64, Policies), LpError> {
    let (lp, p) = credible_ic_lp(inst);
    let (value, first) = finish(solve_lp_with(&lp, backend), &p)?;

    let report_rows: Vec<usize> = (0..lp.constraints.len())
        .filter(|&r| lp.constraints[r].name.starts_with("report["))
        .collect();
    if report_rows.is_empty() {
        return Ok((value, first));
    }
    let mut strict = lp.clone();
    strict.name = "credible_ic_strict".into();
    let objective = std::mem::take(&mut strict.objective);
    let scale = value.abs().max(1.0);
    strict.add_constraint("objective floor", objective, Relation::Ge, value - 1e-9 * scale);
    let mut slack_terms = Vec::with_capacity(report_rows.len());
    for row in report_rows {
        let s = strict.add_var(format!("slack[{}]", lp.constraints[row].name), 0.0, 1.0);
        strict.constraints[row].terms.push((s, -1.0));
        slack_terms.push((s, 1.0));
    }
    strict.set_objective(slack_terms);
    let report = solve_lp_with(&strict, backend);
    if report.is_optimal() {
        let policies = p.extract(&report.assignment);
        if policy_value(inst, &policies, &SigmaMapping::identity(inst.n_types())) >= value - 2e-9 * scale {
            return Ok((value, policies));
        }
    }
    Ok((value, first))
}

/// Principal value of `policies` when type `t` follows branch `sigma[t]`.
pub fn policy_value(inst: &Instance, policies: &Policies, sigma: &SigmaMapping) -> f64 {
    (0..inst.n_types())
        .map(|t| {
            let branch = &policies[sigma.0[t]];
            let mut v = 0.0;
            for (s, row) in branch.iter().enumerate() {
                for (a, x) in row.iter().enumerate() {
                    v += x * inst.v(s, a);
                }
            }
            inst.type_dist()[t] * v
        })
        .sum()
}

/// Value of revealing nothing and eliciting nothing: each type plays a
/// prior-optimal action, the principal's favorite among ties.
pub fn uninformative_value(inst: &Instance) -> f64 {
    (0..inst.n_types())
        .map(|t| {
            let best = argmax_actions_weighted(inst, inst.prior(), t, TIE_TOLERANCE);
            let v = best
                .iter()
                .map(|&a| inst.principal_utility(inst.prior(), a))
                .fold(f64::NEG_INFINITY, f64::max);
            inst.type_dist()[t] * v
        })
        .sum()
}

/// Which type each true type reports.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SigmaMapping(pub Vec<usize>);

impl SigmaMapping {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// The `k`-th mapping in lexicographic order (first type most significant).
    pub fn nth(n: usize, mut k: u64) -> Self {
        let mut digits = vec![0usize; n];
        for d in digits.iter_mut().rev() {
            *d = (k % n as u64) as usize;
            k /= n as u64;
        }
        Self(digits)
    }
}

/// Solves the LP for one mapping; `None` when the mapping is infeasible.
pub fn solve_es_sigma(inst: &Instance, sigma: &SigmaMapping, backend: Backend) -> Result<Option<(f64, Policies)>, LpError> {
    let (lp, p) = es_sigma_lp(inst, sigma);
    let report = solve_lp_with(&lp, backend);
    match report.status {
        LpStatus::Optimal => Ok(Some((report.objective_value, p.extract(&report.assignment)))),
        LpStatus::Infeasible => Ok(None),
        status => Err(LpError::Solve(format!(
            "mapping {:?}: {status:?}: {}",
            sigma.0,
            report.message.unwrap_or_default()
        ))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EsResult {
    pub value: f64,
    pub sigma: SigmaMapping,
    /// Optimal policies for the winning mapping.
    pub policies: Policies,
    pub mappings: u64,
    pub solved: u64,
    pub infeasible: u64,
    /// Mappings skipped because their bound could not beat the incumbent.
    pub pruned: u64,
}

pub fn es_bruteforce(inst: &Instance) -> Result<EsResult, LpError> {
    es_bruteforce_with(inst, DEFAULT_SIGMA_CAP, Backend::from_env()?)
}

/// Exact optimum over two-stage mechanisms, by maximizing over every
/// imitation mapping. Mappings are visited in lexicographic order; a mapping
/// is skipped when `Σ_t ρ(t)·B(σ(t))` cannot beat the incumbent, where
/// `B(t')` is the best principal value of any branch obedient for `t'`.
/// Ties keep the lexicographically smallest mapping.
pub fn es_bruteforce_with(inst: &Instance, cap: u64, backend: Backend) -> Result<EsResult, LpError> {
    const CHUNK: u64 = 64;
    const EPS: f64 = 1e-9;
    let n = inst.n_types();
    let needed = (n as f64).powi(n as i32);
    if needed > cap as f64 {
        return Err(LpError::ExplosionCap { needed, cap });
    }
    let total = (n as u64).pow(n as u32);
    let bounds = branch_bounds(inst, backend)?;

    let mut best: Option<(f64, SigmaMapping, Policies)> = None;
    let (mut solved, mut infeasible, mut pruned) = (0u64, 0u64, 0u64);
    let mut start = 0u64;
    while start < total {
        let end = (start + CHUNK).min(total);
        let incumbent = best.as_ref().map(|b| b.0);
        let todo: Vec<SigmaMapping> = (start..end)
            .map(|k| SigmaMapping::nth(n, k))
            .filter(|sigma| {
                let bound: f64 = (0..n).map(|t| inst.type_dist()[t] * bounds[sigma.0[t]]).sum();
                let keep = incumbent.is_none_or(|v| bound > v + EPS);
                if !keep {
                    pruned += 1;
                }
                keep
            })
            .collect();
        let results: Vec<Result<Option<(f64, Policies)>, LpError>> = todo
            .par_iter()
            .map(|sigma| solve_es_sigma(inst, sigma, backend))
            .collect();
        for (sigma, res) in todo.into_iter().zip(results) {
            solved += 1;
            match res? {
                None => infeasible += 1,
                Some((value, policies)) => {
                    if best.as_ref().is_none_or(|b| value > b.0 + EPS) {
                        best = Some((value, sigma, policies));
                    }
                }
            }
        }
        start = end;
    }
    let (value, sigma, policies) =
        best.ok_or_else(|| LpError::Solve("no imitation mapping is feasible".into()))?;
    Ok(EsResult {
        value,
        sigma,
        policies,
        mappings: total,
        solved,
        infeasible,
        pruned,
    })
}

/// `B(t')`: best principal value of a single branch obedient for `t'`.
fn branch_bounds(inst: &Instance, backend: Backend) -> Result<Vec<f64>, LpError> {
    (0..inst.n_types())
        .map(|t| {
            let mut lp = LinearProgram::new("branch_bound", Sense::Maximize);
            let p = add_policies(&mut lp, inst);
            add_obedience(&mut lp, inst, &p, t);
            add_marginals(&mut lp, inst, &p);
            let mut obj = Vec::new();
            for s in 0..inst.n_states() {
                for a in 0..inst.n_actions() {
                    obj.push((p.var(t, s, a), inst.v(s, a)));
                }
            }
            lp.set_objective(obj);
            let r = solve_lp_with(&lp, backend);
            if r.is_optimal() {
                // Loosen slightly so round-off never prunes a true optimum.
                Ok(r.objective_value + 1e-7 * r.objective_value.abs().max(1.0))
            } else {
                Err(LpError::Solve(format!("branch bound for type {t}: {:?}", r.status)))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_instance, ExampleId, ExampleParams};

    fn ex(id: ExampleId) -> Instance {
        example_instance(id, &ExampleParams::default()).unwrap()
    }

    #[test]
    fn noncredible_shape_ex1() {
        let inst = ex(ExampleId::Ex1);
        let (lp, _) = noncredible_lp(&inst);
        let shape = noncredible_shape(&inst);
        assert_eq!(shape.variables, 32);
        assert_eq!(lp.n_vars(), 32);
        let count = |prefix: &str| lp.constraints.iter().filter(|c| c.name.starts_with(prefix)).count();
        assert_eq!(count("report["), 4);
        assert_eq!(count("deviate["), 64);
        assert_eq!(count("marginal["), 4);
    }

    #[test]
    fn noncredible_ex1_half() {
        for b in [Backend::Dense, Backend::MicroLp] {
            let (v, _) = solve_noncredible_with(&ex(ExampleId::Ex1), b).unwrap();
            assert!((v - 0.5).abs() < 1e-6, "{b:?}: {v}");
        }
    }

    #[test]
    fn linearization_agrees_on_ex1() {
        let inst = ex(ExampleId::Ex1);
        let (_, opt) = solve_noncredible_with(&inst, Backend::Dense).unwrap();
        assert!(satisfies_deviation_maps(&inst, &opt, 1e-7));
        assert!(linearization_feasible(&inst, &opt, 1e-7, Backend::Dense).unwrap());
        // Branch 0 plays type 0's worst action, branch 1 its best.
        let pick = |s: usize, best: bool| {
            let key = |a: &usize| inst.u(0, s, *a);
            let acts = 0..inst.n_actions();
            if best {
                acts.max_by(|a, b| key(a).total_cmp(&key(b))).unwrap()
            } else {
                acts.min_by(|a, b| key(a).total_cmp(&key(b))).unwrap()
            }
        };
        let bad: Policies = (0..inst.n_types())
            .map(|t| {
                (0..inst.n_states())
                    .map(|s| {
                        let mut row = vec![0.0; inst.n_actions()];
                        row[pick(s, t == 1)] = inst.prior()[s];
                        row
                    })
                    .collect()
            })
            .collect();
        assert!(!satisfies_deviation_maps(&inst, &bad, 1e-7));
        assert!(!linearization_feasible(&inst, &bad, 1e-7, Backend::Dense).unwrap());
    }

    #[test]
    fn ic_ex1_sweep() {
        for p in [0.25, 0.5, 0.9] {
            let params = ExampleParams {
                rho: Some(vec![p, 1.0 - p]),
                ..ExampleParams::default()
            };
            let inst = example_instance(ExampleId::Ex1, &params).unwrap();
            for b in [Backend::Dense, Backend::MicroLp] {
                let (v, _) = solve_credible_ic_with(&inst, b).unwrap();
                assert!((v - (1.0 - p)).abs() < 1e-6, "{b:?} p={p}: {v}");
            }
        }
    }

    #[test]
    fn ic_ex2_half() {
        let (v, _) = solve_credible_ic_with(&ex(ExampleId::Ex2), Backend::Dense).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_aligned_type() {
        let inst = Instance::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec!["t".into()],
            vec!["a".into(), "b".into()],
            vec![0.2, 0.3, 0.5],
            vec![1.0],
            vec![vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.25]]],
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.25]],
        )
        .unwrap();
        let full = 0.2 * 1.0 + 0.3 * 2.0 + 0.5 * 0.5;
        let (nc, _) = solve_noncredible_with(&inst, Backend::Dense).unwrap();
        let (ic, _) = solve_credible_ic_with(&inst, Backend::Dense).unwrap();
        assert!((nc - full).abs() < 1e-9);
        assert!((ic - full).abs() < 1e-9);
    }

    #[test]
    fn es_ex1_all_report_t2() {
        let r = es_bruteforce_with(&ex(ExampleId::Ex1), DEFAULT_SIGMA_CAP, Backend::Dense).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        assert_eq!(r.sigma, SigmaMapping(vec![1, 1]));
    }

    #[test]
    fn es_ex2_half() {
        let r = es_bruteforce_with(&ex(ExampleId::Ex2), DEFAULT_SIGMA_CAP, Backend::MicroLp).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6);
    }

    #[test]
    fn es_identity_matches_ic() {
        let inst = crate::instances::random_instance(11, 2, 3, 3, (-1.0, 1.0));
        let id = solve_es_sigma(&inst, &SigmaMapping::identity(3), Backend::Dense)
            .unwrap()
            .unwrap();
        let (ic, _) = solve_credible_ic_with(&inst, Backend::Dense).unwrap();
        assert!((id.0 - ic).abs() < 1e-6);
    }

    #[test]
    fn sigma_cap() {
        let err = es_bruteforce_with(&ex(ExampleId::Ex1), 3, Backend::Dense).unwrap_err();
        assert!(matches!(err, LpError::ExplosionCap { .. }));
    }

    #[test]
    fn nth_mapping_order() {
        assert_eq!(SigmaMapping::nth(3, 0).0, vec![0, 0, 0]);
        assert_eq!(SigmaMapping::nth(3, 5).0, vec![0, 1, 2]);
        assert_eq!(SigmaMapping::nth(3, 26).0, vec![2, 2, 2]);
    }

    #[test]
    fn uninformative_baseline_ex1() {
        // t1 plays a or b (principal 0); t2 is indifferent between c and d.
        assert!((uninformative_value(&ex(ExampleId::Ex1)) - 0.5).abs() < 1e-12);
    }
}
