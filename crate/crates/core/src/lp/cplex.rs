//! CPLEX-LP text export for cross-checking with external solvers.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{LinearProgram, Relation, Sense};

fn sanitize(name: &str, used: &mut HashSet<String>, fallback: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    s = s.trim_end_matches('_').to_string();
    if s.is_empty() {
        s = fallback.to_string();
    }
    let first = s.chars().next().unwrap();
    if first.is_ascii_digit() || first == '.' || first == 'e' || first == 'E' {
        s.insert(0, '_');
    }
    let mut out = s.clone();
    let mut k = 1;
    while !used.insert(out.clone()) {
        out = format!("{s}_{k}");
        k += 1;
    }
    out
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn form(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        // An empty expression is not legal; use a zero multiple of the first variable.
        let _ = write!(out, " 0 {}", names.first().map(String::as_str).unwrap_or("x"));
        return;
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        let sign = match (i, *c < 0.0) {
            (0, false) => " ",
            (0, true) => " -",
            (_, false) => " + ",
            (_, true) => " - ",
        };
        let _ = write!(out, "{sign}{} {}", num(c.abs()), names[*v]);
    }
}

/// Renders `lp` in CPLEX LP format with sanitized, unique names.
pub fn to_cplex_lp(lp: &LinearProgram) -> String {
    let mut used = HashSet::new();
    let names: Vec<String> = lp
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, &mut used, &format!("x{i}")))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", lp.name);
    out.push_str(match lp.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    let terms: Vec<(usize, f64)> = lp.objective.iter().map(|(v, c)| (v.0, *c)).collect();
    out.push_str(" obj:");
    form(&mut out, &terms, &names);
    out.push_str("\nSubject To\n");
    let mut row_names = HashSet::new();
    row_names.insert("obj".to_string());
    for (i, con) in lp.constraints.iter().enumerate() {
        let name = sanitize(&con.name, &mut row_names, &format!("c{i}"));
        let _ = write!(out, " {name}:");
        let terms: Vec<(usize, f64)> = con.terms.iter().map(|(v, c)| (v.0, *c)).collect();
        form(&mut out, &terms, &names);
        let rel = match con.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", num(con.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in lp.variables.iter().zip(&names) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
            (true, false) => {
                if v.lower != 0.0 {
                    let _ = writeln!(out, " {name} >= {}", num(v.lower));
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", num(v.upper));
            }
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::{LinearProgram, Relation, Sense};
    use super::to_cplex_lp;

    #[test]
    fn renders_sections_and_sanitizes() {
        let mut lp = LinearProgram::new("demo", Sense::Maximize);
        let x = lp.add_var("pi[t1,a']", 0.0, f64::INFINITY);
        let y = lp.add_var("z[t1,t2,a]", f64::NEG_INFINITY, f64::INFINITY);
        let w = lp.add_var("pi[t1,a']", 0.0, 1.0);
        lp.set_objective(vec![(x, 1.0), (y, -2.5)]);
        lp.add_constraint("cap row", vec![(x, 1.0), (w, 1.0)], Relation::Le, 3.0);
        lp.add_constraint("", vec![(y, 1.0)], Relation::Ge, -1.0);
        let text = to_cplex_lp(&lp);
        assert!(text.starts_with("\\ demo\nMaximize\n obj: 1 pi_t1_a - 2.5 z_t1_t2_a\n"));
        assert!(text.contains(" cap_row: 1 pi_t1_a + 1 pi_t1_a_1 <= 3\n"));
        assert!(text.contains(" c1: 1 z_t1_t2_a >= -1\n"));
        assert!(text.contains(" z_t1_t2_a free\n"));
        assert!(text.contains(" 0 <= pi_t1_a_1 <= 1\n"));
        assert!(text.ends_with("End\n"));
    }
}
