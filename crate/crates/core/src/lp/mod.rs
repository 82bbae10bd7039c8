//! Linear programs: an abstract description, pluggable solver backends and
//! the optimal-mechanism formulations built on top of them.

mod cplex;
mod enses;
mod formulations;
mod microlp_backend;
mod presolve;
mod simplex;

use serde::Serialize;
use thiserror::Error;

pub use cplex::to_cplex_lp;
pub use enses::{
    enses_lp, solve_enses, solve_enses_with, uninformative_enses_solution, EnsesLayout, EnsesSolution,
};
pub use formulations::{
    credible_ic_lp, es_bruteforce, es_bruteforce_with, es_sigma_lp, linearization_feasible, linearization_lp,
    noncredible_lp, noncredible_shape, satisfies_deviation_maps,
    policy_value, solve_credible_ic, solve_credible_ic_with, solve_es_sigma, solve_noncredible,
    solve_noncredible_with, uninformative_value, EsResult, NoncredibleShape, Policies, PolicyLayout,
    SigmaMapping, DEFAULT_SIGMA_CAP,
};

/// Feasibility tolerance applied to every optimal assignment.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program over named, bounded variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearProgram {
    pub name: String,
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub objective: Vec<(VarId, f64)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint '{constraint}' references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: usize },
    #[error("variable '{0}' has an empty or NaN domain")]
    BadBounds(String),
    #[error("non-finite coefficient in '{0}'")]
    NonFinite(String),
    #[error("unknown LP backend '{0}' (expected 'dense' or 'microlp')")]
    UnknownBackend(String),
    #[error("LP solve failed: {0}")]
    Solve(String),
    #[error("enumeration needs {needed} mappings, over the cap of {cap}")]
    ExplosionCap { needed: f64, cap: u64 },
}

impl LinearProgram {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            variables: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = terms;
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Structural checks: declared variables, sane bounds, finite numbers.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || v.lower == f64::INFINITY
                || v.upper == f64::NEG_INFINITY
            {
                return Err(LpError::BadBounds(v.name.clone()));
            }
        }
        for (var, c) in &self.objective {
            if var.0 >= n {
                return Err(LpError::UnknownVariable {
                    constraint: "objective".into(),
                    var: var.0,
                });
            }
            if !c.is_finite() {
                return Err(LpError::NonFinite("objective".into()));
            }
        }
        for con in &self.constraints {
            if !con.rhs.is_finite() {
                return Err(LpError::NonFinite(con.name.clone()));
            }
            for (var, c) in &con.terms {
                if var.0 >= n {
                    return Err(LpError::UnknownVariable {
                        constraint: con.name.clone(),
                        var: var.0,
                    });
                }
                if !c.is_finite() {
                    return Err(LpError::NonFinite(con.name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Largest violation of a bound or constraint, with each row measured
    /// relative to `max(1, |rhs|, max |coefficient|)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for con in &self.constraints {
            let lhs: f64 = con.terms.iter().map(|(v, c)| c * x[v.0]).sum();
            let scale = con
                .terms
                .iter()
                .map(|(_, c)| c.abs())
                .fold(con.rhs.abs().max(1.0), f64::max);
            let viol = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Ge => con.rhs - lhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: LpStatus,
    pub objective_value: f64,
    pub assignment: Vec<f64>,
    pub solver_id: String,
    pub tolerance: f64,
    pub message: Option<String>,
}

impl SolveReport {
    pub fn failure(status: LpStatus, solver_id: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            objective_value: f64::NAN,
            assignment: Vec::new(),
            solver_id: solver_id.to_string(),
            tolerance: FEASIBILITY_TOLERANCE,
            message: Some(message.into()),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.assignment[v.0]
    }
}

/// Available solver backends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    /// Sparse revised simplex from the `microlp` crate.
    #[default]
    MicroLp,
    /// The built-in dense two-phase tableau simplex.
    Dense,
}

impl Backend {
    pub fn id(self) -> &'static str {
        match self {
            Backend::MicroLp => "microlp",
            Backend::Dense => "dense",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, LpError> {
        match id.trim().to_ascii_lowercase().as_str() {
            "microlp" => Ok(Backend::MicroLp),
            "dense" | "simplex" | "dense-simplex" => Ok(Backend::Dense),
            other => Err(LpError::UnknownBackend(other.to_string())),
        }
    }

    /// Reads `CP_SOLVER`; unset or empty means the default backend.
    pub fn from_env() -> Result<Self, LpError> {
        match std::env::var("CP_SOLVER") {
            Ok(s) if !s.trim().is_empty() => Self::from_id(&s),
            _ => Ok(Self::default()),
        }
    }
}

/// Solves with the backend named by `CP_SOLVER`, falling back to the default
/// when the variable is unset or names an unknown backend.
pub fn solve_lp(lp: &LinearProgram) -> SolveReport {
    solve_lp_with(lp, Backend::from_env().unwrap_or_default())
}

/// Solves with `backend` after merging empty and parallel rows. When `microlp` fails numerically (as opposed to
/// proving infeasibility or unboundedness) the dense simplex is tried next.
pub fn solve_lp_with(lp: &LinearProgram, backend: Backend) -> SolveReport {
    if let Err(e) = lp.check() {
        return SolveReport::failure(LpStatus::Error, backend.id(), e.to_string());
    }
    let reduced = match presolve::presolve(lp) {
        presolve::Presolved::Reduced(r) => r,
        presolve::Presolved::Infeasible(why) => {
            return SolveReport::failure(LpStatus::Infeasible, backend.id(), why);
        }
    };
    let report = match backend {
        Backend::MicroLp => microlp_backend::solve(&reduced),
        Backend::Dense => simplex::solve(&reduced),
    };
    let report = post_check(lp, report);
    if backend == Backend::MicroLp && report.status == LpStatus::Error {
        let mut retry = post_check(lp, simplex::solve(&reduced));
        let why = report.message.unwrap_or_default();
        retry.message = Some(match retry.message {
            Some(m) => format!("microlp failed ({why}); dense: {m}"),
            None => format!("microlp failed ({why}); solved by dense"),
        });
        return retry;
    }
    report
}

fn post_check(lp: &LinearProgram, mut report: SolveReport) -> SolveReport {
    if report.status == LpStatus::Optimal {
        let viol = lp.max_violation(&report.assignment);
        if viol.is_nan() || viol > FEASIBILITY_TOLERANCE {
            report.status = LpStatus::Error;
            report.message = Some(format!("optimal assignment violates constraints by {viol:e}"));
        } else {
            report.objective_value = lp.objective_at(&report.assignment);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(rel: Relation, rhs: f64, upper: f64) -> LinearProgram {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, upper);
        lp.set_objective(vec![(x, 1.0)]);
        if rel != Relation::Eq {
            lp.add_constraint("cap", vec![(x, 1.0)], rel, rhs);
        }
        lp
    }

    #[test]
    fn trivial_programs_on_both_backends() {
        for b in [Backend::Dense, Backend::MicroLp] {
            let r = solve_lp_with(&one_var(Relation::Le, 3.0, f64::INFINITY), b);
            assert_eq!(r.status, LpStatus::Optimal, "{b:?}");
            assert!((r.objective_value - 3.0).abs() < 1e-9);
            let r = solve_lp_with(&one_var(Relation::Le, -1.0, f64::INFINITY), b);
            assert_eq!(r.status, LpStatus::Infeasible, "{b:?}");
            let r = solve_lp_with(&one_var(Relation::Eq, 0.0, f64::INFINITY), b);
            assert_eq!(r.status, LpStatus::Unbounded, "{b:?}");
            assert_eq!(r.solver_id, b.id());
        }
    }

    #[test]
    fn backend_ids() {
        assert_eq!(Backend::from_id("dense").unwrap(), Backend::Dense);
        assert_eq!(Backend::from_id("MICROLP").unwrap(), Backend::MicroLp);
        assert!(Backend::from_id("gurobi").is_err());
    }

    #[test]
    fn check_catches_bad_references() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        lp.add_constraint("c", vec![(VarId(3), 1.0)], Relation::Le, 1.0);
        assert!(matches!(lp.check(), Err(LpError::UnknownVariable { .. })));
        let r = solve_lp_with(&lp, Backend::Dense);
        assert_eq!(r.status, LpStatus::Error);
    }

    #[test]
    fn violation_is_relative() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        lp.add_constraint("c", vec![(x, 1000.0)], Relation::Le, 1000.0);
        assert!((lp.max_violation(&[1.001]) - 1e-3).abs() < 1e-12);
        assert_eq!(lp.max_violation(&[0.5]), 0.0);
    }
}
