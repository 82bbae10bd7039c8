use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mechanism::{MechanismTree, Node, TypeSet};
use crate::model::{Instance, SignalStrategy};

/// A point drawn uniformly from the probability simplex.
fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    // Push the rounding residue into the largest entry.
    let residue = 1.0 - w.iter().sum::<f64>();
    if let Some(max) = w.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    w
}

/// A seeded random instance with payoffs uniform in `range`.
pub fn random_instance(seed: u64, n_states: usize, n_types: usize, n_actions: usize, range: (f64, f64)) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = range;
    let draw = |rng: &mut ChaCha8Rng| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let prior = simplex(&mut rng, n_states);
    let type_dist = simplex(&mut rng, n_types);
    let u = (0..n_types)
        .map(|_| {
            (0..n_states)
                .map(|_| (0..n_actions).map(|_| draw(&mut rng)).collect())
                .collect()
        })
        .collect();
    let v = (0..n_states)
        .map(|_| (0..n_actions).map(|_| draw(&mut rng)).collect())
        .collect();
    Instance::new(
        (1..=n_states).map(|i| format!("s{i}")).collect(),
        (1..=n_types).map(|i| format!("t{i}")).collect(),
        (1..=n_actions).map(|i| format!("a{i}")).collect(),
        prior,
        type_dist,
        u,
        v,
    )
    .expect("random tables are well-shaped")
}

/// A seeded random tree for `inst` with at most `max_elicit` elicitation
/// nodes (binding or not) and depth at most `max_depth`.
pub fn random_mechanism(seed: u64, inst: &Instance, max_elicit: usize, max_depth: usize) -> MechanismTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = max_elicit;
    let all: TypeSet = (0..inst.n_types()).collect();
    let root = grow(&mut rng, inst, &all, max_depth, &mut budget);
    MechanismTree::new(format!("random_{seed}"), root)
}

fn grow(rng: &mut ChaCha8Rng, inst: &Instance, cand: &TypeSet, depth: usize, budget: &mut usize) -> Node {
    let roll = if depth == 0 { 0 } else { rng.gen_range(0..10) };
    match roll {
        0..=2 => {
            if rng.gen_bool(0.5) {
                Node::recommend(rng.gen_range(0..inst.n_actions()))
            } else {
                Node::leaf()
            }
        }
        3..=5 => {
            let k = rng.gen_range(1..=3);
            let rows = (0..inst.n_states()).map(|_| simplex(rng, k)).collect();
            let strat = SignalStrategy::new((0..k).map(|g| format!("g{g}")).collect(), rows);
            let children = (0..k).map(|_| grow(rng, inst, cand, depth - 1, budget)).collect();
            Node::signal(strat, children)
        }
        _ if *budget == 0 => grow(rng, inst, cand, depth, budget),
        6..=7 => {
            *budget -= 1;
            let mut members: Vec<usize> = cand.iter().copied().collect();
            members.shuffle(rng);
            let parts = rng.gen_range(1..=members.len().min(3));
            let mut options: Vec<Vec<usize>> = vec![Vec::new(); parts];
            for (idx, t) in members.into_iter().enumerate() {
                let slot = if idx < parts { idx } else { rng.gen_range(0..parts) };
                options[slot].push(t);
            }
            for o in &mut options {
                o.sort_unstable();
            }
            let children = options
                .iter()
                .map(|o| grow(rng, inst, &o.iter().copied().collect(), depth - 1, budget))
                .collect();
            Node::elicit(options, children)
        }
        _ => {
            *budget -= 1;
            let k = rng.gen_range(1..=2);
            let children = (0..k).map(|_| grow(rng, inst, cand, depth - 1, budget)).collect();
            Node::menu(children)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::validate_mechanism;
    use crate::model::validate_instance;

    #[test]
    fn deterministic_and_valid() {
        let a = random_instance(1, 2, 2, 2, (-1.0, 1.0));
        assert_eq!(a, random_instance(1, 2, 2, 2, (-1.0, 1.0)));
        assert!(validate_instance(&a).is_ok());
        let b = random_instance(2, 3, 3, 3, (0.0, 1.0));
        assert!(validate_instance(&b).is_ok());
        let c = random_instance(2, 2, 2, 2, (-1.0, 1.0));
        assert_ne!(a, c);
    }

    #[test]
    fn trees_validate_and_respect_budget() {
        fn elicits(n: &Node) -> usize {
            let own = usize::from(matches!(
                n.kind,
                crate::mechanism::NodeKind::Elicit { .. } | crate::mechanism::NodeKind::Menu { .. }
            ));
            own + n.children().iter().map(elicits).sum::<usize>()
        }
        for seed in 0..50 {
            let inst = random_instance(seed, 3, 3, 3, (-1.0, 1.0));
            let mech = random_mechanism(seed, &inst, 3, 4);
            let report = validate_mechanism(&inst, &mech);
            assert!(report.is_ok(), "seed {seed}: {report}");
            assert!(elicits(&mech.root) <= 3);
        }
    }
}
