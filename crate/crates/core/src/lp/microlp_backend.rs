use microlp::{ComparisonOp, Error, OptimizationDirection, Problem};

use super::{LinearProgram, LpStatus, Relation, Sense, SolveReport, FEASIBILITY_TOLERANCE};

const ID: &str = "microlp";

pub(super) fn solve(lp: &LinearProgram) -> SolveReport {
    let dir = match lp.sense {
        Sense::Maximize => OptimizationDirection::Maximize,
        Sense::Minimize => OptimizationDirection::Minimize,
    };
    let mut cost = vec![0.0; lp.variables.len()];
    for (v, c) in &lp.objective {
        cost[v.0] += c;
    }
    let mut problem = Problem::new(dir);
    let vars: Vec<_> = lp
        .variables
        .iter()
        .zip(&cost)
        .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
        .collect();
    for con in &lp.constraints {
        // Row scaling keeps penalty-sized coefficients from dominating tolerances.
        let scale = con.terms.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let op = match con.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        let terms: Vec<_> = con.terms.iter().map(|(v, c)| (vars[v.0], c / scale)).collect();
        problem.add_constraint(terms, op, con.rhs / scale);
    }
    match problem.solve() {
        Ok(outcome) => match outcome.solution() {
            Some(sol) => {
                let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                SolveReport {
                    status: LpStatus::Optimal,
                    objective_value: lp.objective_at(&x),
                    assignment: x,
                    solver_id: ID.to_string(),
                    tolerance: FEASIBILITY_TOLERANCE,
                    message: None,
                }
            }
            None => SolveReport::failure(LpStatus::Error, ID, "solve interrupted"),
        },
        Err(Error::Infeasible) => SolveReport::failure(LpStatus::Infeasible, ID, "infeasible"),
        Err(Error::Unbounded) => SolveReport::failure(LpStatus::Unbounded, ID, "unbounded"),
        Err(e) => SolveReport::failure(LpStatus::Error, ID, e.to_string()),
    }
}
