//! Row reduction run before every backend.
//!
//! The mechanism formulations produce many empty rows (branches whose payoff
//! columns coincide) and many parallel copies of the same inequality. Both
//! backends cope badly with that much degeneracy, so rows are merged here.
//! Variables are never touched, so assignments carry over unchanged.

use std::collections::HashMap;

use super::{Constraint, LinearProgram, Relation, VarId};

const ZERO: f64 = 1e-12;

pub(crate) enum Presolved {
    Reduced(LinearProgram),
    /// An empty row that cannot hold, e.g. `0 <= -1`.
    Infeasible(String),
}

/// Key of a row scaled to unit max coefficient, in `<=` or `=` orientation.
type RowKey = (bool, Vec<(usize, i64)>);

pub(crate) fn presolve(lp: &LinearProgram) -> Presolved {
    let mut out = LinearProgram {
        name: lp.name.clone(),
        sense: lp.sense,
        variables: lp.variables.clone(),
        objective: lp.objective.clone(),
        constraints: Vec::with_capacity(lp.constraints.len()),
    };
    // For each key: index into out.constraints and the scaled rhs kept there.
    let mut seen: HashMap<RowKey, (usize, f64)> = HashMap::new();
    for con in &lp.constraints {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(con.terms.len());
        let mut terms = con.terms.iter().map(|(v, c)| (v.0, *c)).collect::<Vec<_>>();
        terms.sort_by_key(|t| t.0);
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        let scale = merged.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
        merged.retain(|t| t.1.abs() > ZERO * scale.max(1.0));
        if merged.is_empty() {
            let tol = super::FEASIBILITY_TOLERANCE * con.rhs.abs().max(1.0);
            let holds = match con.relation {
                Relation::Le => 0.0 <= con.rhs + tol,
                Relation::Ge => 0.0 >= con.rhs - tol,
                Relation::Eq => con.rhs.abs() <= tol,
            };
            if !holds {
                return Presolved::Infeasible(format!("row '{}' reads 0 {:?} {}", con.name, con.relation, con.rhs));
            }
            continue;
        }
        let scale = merged.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
        let (flip, eq) = match con.relation {
            Relation::Le => (1.0, false),
            Relation::Ge => (-1.0, false),
            Relation::Eq => (1.0, true),
        };
        let key: RowKey = (
            eq,
            merged
                .iter()
                .map(|&(v, c)| (v, (flip * c / scale * 1e10).round() as i64))
                .collect(),
        );
        let rhs = flip * con.rhs / scale;
        let row = Constraint {
            name: con.name.clone(),
            terms: merged.iter().map(|&(v, c)| (VarId(v), c)).collect(),
            relation: con.relation,
            rhs: con.rhs,
        };
        match seen.get_mut(&key) {
            // Equalities only collapse when the right-hand sides agree.
            Some((_, kept)) if eq && (*kept - rhs).abs() <= ZERO * rhs.abs().max(1.0) => {}
            Some((idx, kept)) if !eq => {
                if rhs < *kept {
                    *kept = rhs;
                    out.constraints[*idx] = row;
                }
            }
            Some(_) => out.constraints.push(row),
            None => {
                seen.insert(key, (out.constraints.len(), rhs));
                out.constraints.push(row);
            }
        }
    }
    Presolved::Reduced(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;

    #[test]
    fn merges_parallel_and_drops_empty() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        let y = lp.add_var("y", 0.0, f64::INFINITY);
        lp.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        lp.add_constraint("b", vec![(x, 2.0), (y, 2.0)], Relation::Le, 6.0);
        lp.add_constraint("c", vec![(x, -1.0), (y, -1.0)], Relation::Ge, -5.0);
        lp.add_constraint("d", vec![(x, 1.0), (x, -1.0)], Relation::Le, 0.0);
        lp.add_constraint("e", vec![], Relation::Ge, -1.0);
        let Presolved::Reduced(r) = presolve(&lp) else { panic!() };
        assert_eq!(r.constraints.len(), 1);
        assert_eq!(r.constraints[0].name, "b");
    }

    #[test]
    fn empty_infeasible_row() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, 1.0);
        lp.add_constraint("bad", vec![(x, 0.0)], Relation::Ge, 1.0);
        assert!(matches!(presolve(&lp), Presolved::Infeasible(_)));
    }

    #[test]
    fn conflicting_equalities_are_kept() {
        let mut lp = LinearProgram::new("t", Sense::Maximize);
        let x = lp.add_var("x", 0.0, 5.0);
        lp.add_constraint("a", vec![(x, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint("b", vec![(x, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint("c", vec![(x, 1.0)], Relation::Eq, 2.0);
        let Presolved::Reduced(r) = presolve(&lp) else { panic!() };
        assert_eq!(r.constraints.len(), 2);
    }
}
