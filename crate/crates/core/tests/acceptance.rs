//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false`; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use persuade_core::agent::{best_response_index, brute_force_response_with, evaluate_with, DEFAULT_PROFILE_CAP};
use persuade_core::lp::{
    es_bruteforce_with, linearization_feasible, satisfies_deviation_maps, solve_credible_ic_with,
    solve_enses_with, solve_noncredible_with, DEFAULT_SIGMA_CAP,
};
use persuade_core::{
    check_multistage_ic, depth, enses_tree, example_instance, example_mechanism, max_independent_set,
    mis_policy_tree, random_instance, random_mechanism, reduce_mis, Backend, ExampleId, ExampleParams, Graph,
    Instance, MechanismId, MechanismTree, Policies, SynthesisOptions, Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const B: Backend = Backend::MicroLp;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn params() -> ExampleParams {
    ExampleParams::default()
}

fn inst(id: ExampleId, p: &ExampleParams) -> Instance {
    example_instance(id, p).expect("example builds")
}

fn mech(id: MechanismId, p: &ExampleParams) -> MechanismTree {
    example_mechanism(id, p).expect("example builds")
}

fn value(inst: &Instance, m: &MechanismTree) -> f64 {
    evaluate_with(inst, m, Tolerances::default()).principal_value
}

fn with_rho(p_t2: f64) -> ExampleParams {
    ExampleParams {
        rho: Some(vec![1.0 - p_t2, p_t2]),
        ..params()
    }
}

fn lp<T>(r: Result<T, persuade_core::LpError>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const SWEEP: [f64; 3] = [0.1, 0.5, 0.75];

fn criterion_1() -> Outcome {
    let mut got = Vec::new();
    for p in SWEEP {
        let (v, _) = lp(solve_credible_ic_with(&inst(ExampleId::Ex1, &with_rho(p)), B))?;
        ensure(near(v, p, 1e-6), || format!("rho(t2)={p}: IC value {v}"))?;
        got.push(format!("{v:.6}"));
    }
    Ok(format!("IC values {}", got.join(", ")))
}

fn criterion_2() -> Outcome {
    let mut ratios = Vec::new();
    for p in SWEEP {
        let params = with_rho(p);
        let ex1 = inst(ExampleId::Ex1, &params);
        let trade = value(&ex1, &mech(MechanismId::Ex1Trade, &params));
        ensure(near(trade, 1.0, 1e-9), || format!("rho(t2)={p}: trade mechanism {trade}"))?;
        let (enses, _) = lp(solve_enses_with(&ex1, B))?;
        ensure(near(enses, 1.0, 1e-6), || format!("rho(t2)={p}: EnSES {enses}"))?;
        let (ic, _) = lp(solve_credible_ic_with(&ex1, B))?;
        let ratio = enses / ic;
        ensure(near(ratio, 1.0 / p, 1e-6 / p), || format!("rho(t2)={p}: ratio {ratio}"))?;
        ratios.push(format!("{ratio:.4}"));
    }
    Ok(format!("ratios {}", ratios.join(", ")))
}

fn criterion_3() -> Outcome {
    let p = params();
    let ex2 = inst(ExampleId::Ex2, &p);
    let es = lp(es_bruteforce_with(&ex2, DEFAULT_SIGMA_CAP, B))?.value;
    ensure(near(es, 0.5, 1e-6), || format!("ES {es}"))?;
    let ses = value(&ex2, &mech(MechanismId::Ex2Ses, &p));
    ensure(near(ses, 5.0 / 6.0, 1e-9) && ses >= 2.0 / 3.0, || format!("SES {ses}"))?;
    Ok(format!("ES {es:.9}, SES {ses:.9}"))
}

fn criterion_4() -> Outcome {
    let p = ExampleParams {
        big_m: Some(10001.0),
        delta: Some(10.0 / 10001.0),
        ..params()
    };
    let delta = p.ex3_delta();
    let ex3 = inst(ExampleId::Ex3, &p);
    let fig = value(&ex3, &mech(MechanismId::Ex3Fig2, &p));
    ensure(near(fig, 1.0 - delta / 3.0, 1e-9) && fig > 1.0 - delta, || format!("non-binding tree {fig}"))?;
    let es = lp(es_bruteforce_with(&ex3, DEFAULT_SIGMA_CAP, B))?.value;
    ensure(es <= 1.0 - delta + 1e-6, || format!("ES {es} above 1 - delta"))?;
    let (enses, _) = lp(solve_enses_with(&ex3, B))?;
    ensure(enses >= 1.0 - delta / 3.0 - 1e-6, || format!("EnSES {enses}"))?;
    Ok(format!("tree {fig:.9}, ES {es:.9}, EnSES {enses:.9}, delta {delta:.3e}"))
}

fn criterion_5() -> Outcome {
    let p = params();
    let ex4 = inst(ExampleId::Ex4, &p);
    let pie = value(&ex4, &mech(MechanismId::Ex4Pie, &p));
    ensure(near(pie, 1.0, 1e-9), || format!("PIE tree {pie}"))?;
    let (enses, _) = lp(solve_enses_with(&ex4, B))?;
    ensure(near(enses, 0.0, 1e-6), || format!("EnSES {enses}"))?;
    let es = lp(es_bruteforce_with(&ex4, DEFAULT_SIGMA_CAP, B))?.value;
    ensure(near(es, 0.0, 1e-6), || format!("ES {es}"))?;
    Ok(format!("PIE {pie}, EnSES {enses:.2e}, ES {es:.2e}"))
}

fn criterion_6() -> Outcome {
    for n in 3..=8 {
        let p = ExampleParams {
            n,
            big_m: Some(1e6),
            ..params()
        };
        let ex5 = inst(ExampleId::Ex5, &p);
        let m = mech(MechanismId::Ex5Pie, &p);
        let v = value(&ex5, &m);
        ensure(near(v, 1.0, 1e-9), || format!("n={n}: value {v}"))?;
        let d = depth(&m);
        ensure(d == 2 * n, || format!("n={n}: depth {d}"))?;
    }
    Ok("n = 3..8 all reach 1 at depth 2n".into())
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    for name in ["K3", "C5", "P4", "S4", "edgeless-3"] {
        let g = Graph::named(name).ok_or("unknown graph")?;
        let (alpha, witness) = max_independent_set(&g).map_err(|e| e.to_string())?;
        let target = alpha as f64 / g.n() as f64;
        let gadget = reduce_mis(&g);
        let es = lp(es_bruteforce_with(&gadget, DEFAULT_SIGMA_CAP, B))?;
        ensure(near(es.value, target, 1e-6), || format!("{name}: ES {} vs {target}", es.value))?;
        let tree = mis_policy_tree(&g, &witness).map_err(|e| e.to_string())?;
        let v = value(&gadget, &tree);
        ensure(near(v, target, 1e-9), || format!("{name}: witness tree {v} vs {target}"))?;
        parts.push(format!("{name} {alpha}/{}", g.n()));
    }
    Ok(parts.join(", "))
}

fn criterion_8() -> Outcome {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ns, nt, na) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
        let inst = random_instance(seed, ns, nt, na, (-1.0, 1.0));
        let m = random_mechanism(seed, &inst, 3, 4);
        for t in 0..nt {
            let fast = best_response_index(&inst, &m, t, tol).agent_value;
            let slow = brute_force_response_with(&inst, &m, t, DEFAULT_PROFILE_CAP, tol)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let gap = (fast - slow).abs();
            ensure(gap <= 1e-9, || format!("seed {seed}, type {t}: {fast} vs {slow}"))?;
            worst = worst.max(gap);
            checked += 1;
        }
    }
    Ok(format!("{checked} type checks, max gap {worst:.1e}"))
}

fn random_small(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    random_instance(seed, rng.gen_range(2..=3), rng.gen_range(2..=3), rng.gen_range(2..=3), (-1.0, 1.0))
}

fn criterion_9() -> Outcome {
    let p = params();
    let mut cases: Vec<(String, Instance)> = [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex3, ExampleId::Ex4]
        .iter()
        .map(|&id| (id.id().to_string(), inst(id, &p)))
        .collect();
    cases.extend((0..20).map(|s| (format!("random {s}"), random_small(1000 + s))));
    for (name, inst) in &cases {
        let (enses, sol) = lp(solve_enses_with(inst, B))?;
        let tree = enses_tree(inst, &sol, &SynthesisOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let v = value(inst, &tree);
        ensure(near(v, enses, 1e-6), || format!("{name}: tree {v} vs LP {enses}"))?;
        let ic = check_multistage_ic(inst, &tree, 1e-6).map_err(|e| format!("{name}: {e}"))?;
        ensure(ic.all_ok(), || format!("{name}: {:?}", ic.violations.first()))?;
        let es = lp(es_bruteforce_with(inst, DEFAULT_SIGMA_CAP, B))?.value;
        let (cic, _) = lp(solve_credible_ic_with(inst, B))?;
        ensure(enses >= es - 1e-6 && es >= cic - 1e-6, || {
            format!("{name}: chain {enses} >= {es} >= {cic} broken")
        })?;
    }
    Ok(format!("{} instances round-trip", cases.len()))
}

fn random_policies(rng: &mut ChaCha8Rng, inst: &Instance) -> Policies {
    (0..inst.n_types())
        .map(|_| {
            (0..inst.n_states())
                .map(|s| {
                    let w: Vec<f64> = (0..inst.n_actions()).map(|_| rng.gen::<f64>().powi(3)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| x / total * inst.prior()[s]).collect()
                })
                .collect()
        })
        .collect()
}

fn mix(a: &Policies, b: &Policies, lambda: f64) -> Policies {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(r, q)| r.iter().zip(q).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect())
                .collect()
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let tol = 1e-9;
    let (mut feasible, mut infeasible) = (0, 0);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11);
        let (ns, nt, na) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(2..=4));
        let inst = random_instance(5000 + seed, ns, nt, na, (-1.0, 1.0));
        let (_, opt) = lp(solve_noncredible_with(&inst, B))?;
        let mut samples = vec![opt.clone()];
        for _ in 0..3 {
            let r = random_policies(&mut rng, &inst);
            samples.push(mix(&opt, &r, 0.9));
            samples.push(mix(&opt, &r, 0.5));
            samples.push(r);
        }
        for (k, pol) in samples.iter().enumerate() {
            let maps = satisfies_deviation_maps(&inst, pol, tol);
            let linear = lp(linearization_feasible(&inst, pol, tol, Backend::Dense))?;
            ensure(maps == linear, || format!("seed {seed}, sample {k}: enumeration {maps}, LP {linear}"))?;
            if maps {
                feasible += 1;
            } else {
                infeasible += 1;
            }
        }
    }
    ensure(feasible > 0 && infeasible > 0, || {
        format!("degenerate sample: {feasible} feasible, {infeasible} infeasible")
    })?;
    Ok(format!("{feasible} feasible and {infeasible} infeasible samples agree"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("credible IC value on ex1", Duration::from_secs(1), criterion_1),
        ("IC suboptimality gap on ex1", Duration::from_secs(5), criterion_2),
        ("pre-signaling separation on ex2", Duration::from_secs(10), criterion_3),
        ("non-binding elicitation separation on ex3", Duration::from_secs(60), criterion_4),
        ("partial elicitation separation on ex4", Duration::from_secs(10), criterion_5),
        ("linear-depth elicitation family on ex5", Duration::from_secs(30), criterion_6),
        ("independent set correspondence", Duration::from_secs(300), criterion_7),
        ("oracle equivalence on random trees", Duration::from_secs(120), criterion_8),
        ("EnSES round trip and dominance chain", Duration::from_secs(180), criterion_9),
        ("linearization equivalence", Duration::from_secs(60), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.2?}, over the {limit:?} budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{took:.2?}]",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
