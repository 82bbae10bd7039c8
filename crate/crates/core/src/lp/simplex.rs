//! Dense two-phase tableau simplex.
//!
//! Every variable is mapped onto a nonnegative one (shifted, mirrored or split
//! when free), rows are scaled to unit max-abs coefficient, and the problem is
//! solved as a maximization. Dantzig pricing is used until the method stalls
//! on degenerate pivots, after which Bland's rule guarantees termination.

use super::{LinearProgram, LpStatus, Relation, Sense, SolveReport, FEASIBILITY_TOLERANCE};

const ID: &str = "dense";
const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const DROP_EPS: f64 = 1e-13;
const MAX_ITER: usize = 50_000;
const STALL_LIMIT: usize = 50;
const PERTURB: f64 = 1e-9;

/// How an original variable is expressed through standard-form columns.
#[derive(Clone, Copy)]
enum Map {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Mirror { col: usize, offset: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

struct Row {
    coefs: Vec<(usize, f64)>,
    rel: Relation,
    /// Right-hand side the pivoting sees, relaxed by [`relax`].
    rhs: f64,
    /// Unperturbed right-hand side, used to recompute the final vertex.
    exact: f64,
}

/// Loosens inequality `i` by a tiny row-specific amount. Mechanism LPs are
/// massively degenerate and pivoting on exact ties can stall for tens of
/// thousands of steps; distinct slacks break the ties.
fn relax(rel: Relation, rhs: f64, i: usize) -> f64 {
    let jitter = PERTURB * (1.0 + (i as f64 * 0.618_033_988_749_895).fract());
    match rel {
        Relation::Le => rhs + jitter,
        Relation::Ge => rhs - jitter,
        Relation::Eq => rhs,
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row (last is the rhs)
    a: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    allowed: Vec<bool>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    #[inline]
    fn w(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.w() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w();
        let p = self.a[r * w + c];
        {
            let row = &mut self.a[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_mut(w) {
            eliminate(row);
        }
        for row in after.chunks_mut(w) {
            eliminate(row);
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    /// Maximizes the objective encoded in `obj` (stored as reduced costs
    /// `z_j - c_j`; optimal when none is negative).
    fn run(&mut self) -> PhaseEnd {
        let mut stall = 0usize;
        for _ in 0..MAX_ITER {
            let bland = stall >= STALL_LIMIT;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..self.cols {
                if !self.allowed[j] {
                    continue;
                }
                let d = self.obj[j];
                if d < -COST_EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else {
                return PhaseEnd::Optimal;
            };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.rows {
                let v = self.at(i, c);
                if v > PIVOT_EPS {
                    let q = self.rhs(i).max(0.0) / v;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if q < ratio - 1e-12 {
                                true
                            } else if q <= ratio + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    v > self.at(l, c)
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        ratio = q;
                    }
                }
            }
            let Some(r) = leave else {
                return PhaseEnd::Unbounded;
            };
            if ratio <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(r, c);
        }
        PhaseEnd::IterationLimit
    }

    fn set_objective(&mut self, c: &[f64]) {
        // z_j - c_j with the current basis
        self.obj = vec![0.0; self.w()];
        for (j, &cj) in c.iter().enumerate() {
            self.obj[j] = -cj;
        }
        for i in 0..self.rows {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let w = self.w();
                for j in 0..w {
                    self.obj[j] += cb * self.a[i * w + j];
                }
            }
        }
    }
}

pub(super) fn solve(lp: &LinearProgram) -> SolveReport {
    let (maps, ncols) = map_variables(lp);
    let sign = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };

    let mut cost = vec![0.0; ncols];
    for (v, c) in &lp.objective {
        match maps[v.0] {
            Map::Shift { col, .. } => cost[col] += sign * c,
            Map::Mirror { col, .. } => cost[col] -= sign * c,
            Map::Split { pos, neg } => {
                cost[pos] += sign * c;
                cost[neg] -= sign * c;
            }
        }
    }

    let mut rows = Vec::with_capacity(lp.constraints.len() + lp.variables.len());
    for con in &lp.constraints {
        let mut dense: Vec<f64> = vec![0.0; ncols];
        let mut rhs = con.rhs;
        for (v, c) in &con.terms {
            match maps[v.0] {
                Map::Shift { col, offset } => {
                    dense[col] += c;
                    rhs -= c * offset;
                }
                Map::Mirror { col, offset } => {
                    dense[col] -= c;
                    rhs -= c * offset;
                }
                Map::Split { pos, neg } => {
                    dense[pos] += c;
                    dense[neg] -= c;
                }
            }
        }
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            if !zero_row_holds(con.relation, rhs) {
                return SolveReport::failure(
                    LpStatus::Infeasible,
                    ID,
                    format!("constraint '{}' has no terms and cannot hold", con.name),
                );
            }
            continue;
        }
        let coefs = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > DROP_EPS * scale)
            .map(|(j, v)| (j, v / scale))
            .collect();
        let i = rows.len();
        rows.push(Row {
            coefs,
            rel: con.relation,
            rhs: relax(con.relation, rhs / scale, i),
            exact: rhs / scale,
        });
    }
    for (v, m) in lp.variables.iter().zip(&maps) {
        if let Map::Shift { col, offset } = *m {
            if v.upper.is_finite() {
                let i = rows.len();
                rows.push(Row {
                    coefs: vec![(col, 1.0)],
                    rel: Relation::Le,
                    rhs: relax(Relation::Le, v.upper - offset, i),
                    exact: v.upper - offset,
                });
            }
        }
    }

    // Orient rows so the rhs is nonnegative.
    for row in &mut rows {
        if row.rhs < 0.0 {
            row.rhs = -row.rhs;
            row.exact = -row.exact;
            for c in &mut row.coefs {
                c.1 = -c.1;
            }
            row.rel = match row.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.rel != Relation::Le).count();
    let cols = ncols + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        a: vec![0.0; m * w],
        obj: Vec::new(),
        basis: vec![0; m],
        allowed: vec![true; cols],
    };
    let mut next_slack = ncols;
    let mut next_art = ncols + n_slack;
    let mut art_cols = Vec::with_capacity(n_art);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in &row.coefs {
            t.a[i * w + j] = v;
        }
        t.a[i * w + cols] = row.rhs;
        match row.rel {
            Relation::Le => {
                t.a[i * w + next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t.a[i * w + next_slack] = -1.0;
                next_slack += 1;
                t.a[i * w + next_art] = 1.0;
                t.basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                t.a[i * w + next_art] = 1.0;
                t.basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
        }
    }

    if !art_cols.is_empty() {
        let mut phase1 = vec![0.0; cols];
        for &j in &art_cols {
            phase1[j] = -1.0;
        }
        t.set_objective(&phase1);
        match t.run() {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return SolveReport::failure(LpStatus::Error, ID, "phase one reported unbounded");
            }
            PhaseEnd::IterationLimit => {
                return SolveReport::failure(LpStatus::Error, ID, "iteration limit in phase one");
            }
        }
        let infeas: f64 = (0..m)
            .filter(|&i| t.basis[i] >= ncols + n_slack)
            .map(|i| t.rhs(i))
            .sum();
        if infeas > FEASIBILITY_TOLERANCE * 0.1 {
            return SolveReport::failure(
                LpStatus::Infeasible,
                ID,
                format!("phase one ended with infeasibility {infeas:e}"),
            );
        }
        for &j in &art_cols {
            t.allowed[j] = false;
        }
        // Drive remaining artificials out of the basis; rows where that is
        // impossible are redundant and are zeroed.
        for i in 0..m {
            if t.basis[i] < ncols + n_slack {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..ncols + n_slack {
                let v = t.at(i, j).abs();
                if v > PIVOT_EPS && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => t.pivot(i, j),
                None => {
                    for j in 0..w {
                        t.a[i * w + j] = 0.0;
                    }
                }
            }
        }
    }

    let mut phase2 = cost.clone();
    phase2.resize(cols, 0.0);
    t.set_objective(&phase2);
    match t.run() {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return SolveReport::failure(LpStatus::Unbounded, ID, "objective is unbounded");
        }
        PhaseEnd::IterationLimit => {
            return SolveReport::failure(LpStatus::Error, ID, "iteration limit in phase two");
        }
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[t.basis[i]] = t.rhs(i);
    }
    refine(&rows, ncols, &t.basis, &mut y);
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            Map::Shift { col, offset } => offset + y[col],
            Map::Mirror { col, offset } => offset - y[col],
            Map::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    SolveReport {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        assignment: x,
        solver_id: ID.to_string(),
        tolerance: FEASIBILITY_TOLERANCE,
        message: None,
    }
}

fn map_variables(lp: &LinearProgram) -> (Vec<Map>, usize) {
    let mut ncols = 0usize;
    let maps = lp
        .variables
        .iter()
        .map(|v| {
            if v.lower.is_finite() {
                ncols += 1;
                Map::Shift {
                    col: ncols - 1,
                    offset: v.lower,
                }
            } else if v.upper.is_finite() {
                ncols += 1;
                Map::Mirror {
                    col: ncols - 1,
                    offset: v.upper,
                }
            } else {
                ncols += 2;
                Map::Split {
                    pos: ncols - 2,
                    neg: ncols - 1,
                }
            }
        })
        .collect();
    (maps, ncols)
}

/// For a constraint whose terms all vanish: does `0 rel rhs` hold?
fn zero_row_holds(rel: Relation, rhs: f64) -> bool {
    let tol = FEASIBILITY_TOLERANCE;
    match rel {
        Relation::Le => 0.0 <= rhs + tol,
        Relation::Ge => 0.0 >= rhs - tol,
        Relation::Eq => rhs.abs() <= tol,
    }
}

/// Recomputes basic values by solving `B y_B = b` directly, which removes the
/// round-off accumulated over many pivots. Skipped for large bases.
fn refine(rows: &[Row], ncols: usize, basis: &[usize], y: &mut [f64]) {
    let m = rows.len();
    if m == 0 || m > 400 {
        return;
    }
    // Column j of the standard-form matrix restricted to row i.
    let mut slack_of_row = vec![usize::MAX; m];
    let mut art_of_row = vec![usize::MAX; m];
    let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();
    let (mut s, mut a) = (ncols, ncols + n_slack);
    for (i, r) in rows.iter().enumerate() {
        if r.rel != Relation::Eq {
            slack_of_row[i] = s;
            s += 1;
        }
        if r.rel != Relation::Le {
            art_of_row[i] = a;
            a += 1;
        }
    }
    let mut b = vec![0.0; m * (m + 1)];
    let w = m + 1;
    for (i, r) in rows.iter().enumerate() {
        for (k, &col) in basis.iter().enumerate() {
            let v = if col < ncols {
                r.coefs.iter().find(|c| c.0 == col).map_or(0.0, |c| c.1)
            } else if col == slack_of_row[i] {
                if r.rel == Relation::Le {
                    1.0
                } else {
                    -1.0
                }
            } else if col == art_of_row[i] {
                1.0
            } else {
                0.0
            };
            b[i * w + k] = v;
        }
        b[i * w + m] = r.exact;
    }
    // Gaussian elimination with partial pivoting.
    for k in 0..m {
        let (mut piv, mut best) = (k, b[k * w + k].abs());
        for i in k + 1..m {
            let v = b[i * w + k].abs();
            if v > best {
                piv = i;
                best = v;
            }
        }
        if best < 1e-12 {
            return; // singular (redundant rows); keep tableau values
        }
        if piv != k {
            for j in 0..w {
                b.swap(k * w + j, piv * w + j);
            }
        }
        for i in k + 1..m {
            let f = b[i * w + k] / b[k * w + k];
            if f != 0.0 {
                for j in k..w {
                    b[i * w + j] -= f * b[k * w + j];
                }
            }
        }
    }
    let mut sol = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = b[k * w + m];
        for j in k + 1..m {
            acc -= b[k * w + j] * sol[j];
        }
        sol[k] = acc / b[k * w + k];
    }
    // Only accept the refinement if it stays primal feasible.
    if sol.iter().any(|v| *v < -1e-9 || !v.is_finite()) {
        return;
    }
    for (k, &col) in basis.iter().enumerate() {
        y[col] = sol[k].max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::super::{LinearProgram, LpStatus, Relation, Sense};
    use super::solve;

    #[test]
    fn textbook_example() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new("wyndor", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        let y = lp.add_var("y", 0.0, f64::INFINITY);
        lp.set_objective(vec![(x, 3.0), (y, 5.0)]);
        lp.add_constraint("a", vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint("b", vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint("c", vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let r = solve(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective_value - 36.0).abs() < 1e-9);
        assert!((r.assignment[0] - 2.0).abs() < 1e-9);
        assert!((r.assignment[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x + y with x free, -2 <= y <= 5, x - y >= -3, x + y >= 1
        let mut lp = LinearProgram::new("mixed", Sense::Minimize);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var("y", -2.0, 5.0);
        lp.set_objective(vec![(x, 1.0), (y, 2.0)]);
        lp.add_constraint("a", vec![(x, 1.0), (y, -1.0)], Relation::Ge, -3.0);
        lp.add_constraint("b", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let r = solve(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        // optimum at y = -2, x = 3: 3 - 4 = -1
        assert!((r.objective_value + 1.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn upper_bounded_only_variable() {
        let mut lp = LinearProgram::new("mirror", Sense::Maximize);
        let x = lp.add_var("x", f64::NEG_INFINITY, 2.5);
        lp.set_objective(vec![(x, 1.0)]);
        let r = solve(&lp);
        assert!((r.objective_value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn equality_system_with_redundancy() {
        let mut lp = LinearProgram::new("eq", Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        let y = lp.add_var("y", 0.0, f64::INFINITY);
        lp.set_objective(vec![(x, 1.0)]);
        lp.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint("b", vec![(x, 2.0), (y, 2.0)], Relation::Eq, 2.0);
        let r = solve(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_row_infeasible() {
        let mut lp = LinearProgram::new("empty", Sense::Maximize);
        let x = lp.add_var("x", 0.0, 1.0);
        lp.add_constraint("bad", vec![(x, 0.0)], Relation::Ge, 1.0);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under naive Dantzig pricing.
        let mut lp = LinearProgram::new("beale", Sense::Minimize);
        let v: Vec<_> = (0..4).map(|i| lp.add_var(format!("x{i}"), 0.0, f64::INFINITY)).collect();
        lp.set_objective(vec![(v[0], -0.75), (v[1], 150.0), (v[2], -0.02), (v[3], 6.0)]);
        lp.add_constraint(
            "r1",
            vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(
            "r2",
            vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint("r3", vec![(v[2], 1.0)], Relation::Le, 1.0);
        let r = solve(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective_value + 0.05).abs() < 1e-9, "{}", r.objective_value);
    }
}
