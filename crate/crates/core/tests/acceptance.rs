//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use pta::encode::encode;
use pta::expr::Expr;
use pta::gens::alp::{desk_instance, gen_alp, validate_schedule};
use pta::gens::two_counter::{clock_key, compile, enc, gen_two_counter, parse_program, simulate, Counter};
use pta::lipschitz::sandwich;
use pta::model::{Comparator, Network, Query};
use pta::oracle::{opt_cost_exhaustive, random_instance, random_pwl_network, random_run, SizeParams};
use pta::pwl2lpta::{lift_run, project_run, transform};
use pta::rational::{int, ratio, Rational};
use pta::semantics::replay;
use pta::solve::{self, minimize, Decision, DecisionVerdict, OptResult, OptStatus, SolveError, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static INTEGRITY_ERRORS: AtomicUsize = AtomicUsize::new(0);
static SOLVER_CALLS: AtomicUsize = AtomicUsize::new(0);

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn tally<T>(r: Result<T, SolveError>) -> Result<T, String> {
    SOLVER_CALLS.fetch_add(1, Ordering::Relaxed);
    r.map_err(|e| {
        if e.is_integrity() {
            INTEGRITY_ERRORS.fetch_add(1, Ordering::Relaxed);
        }
        e.to_string()
    })
}

fn decide(net: &Network, q: &Query, cfg: &SolverConfig) -> Result<Decision, String> {
    tally(solve::decide(net, q, cfg))
}

fn optimize(net: &Network, q: &Query, cfg: &SolverConfig, gamma: &Rational) -> Result<OptResult, String> {
    tally(minimize(
        net,
        &q.source,
        &q.target,
        q.steps,
        cfg,
        &int(0),
        &q.budget,
        gamma,
    ))
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let spent = started.elapsed();
    if spent > limit {
        return Err(format!(
            "{what} took {:.1}s, limit {}s",
            spent.as_secs_f64(),
            limit.as_secs()
        ));
    }
    Ok(())
}

fn bisimulation() -> Verdict {
    let started = Instant::now();
    let (mut runs, mut lifted_steps) = (0usize, 0usize);
    for seed in 0..200u64 {
        let net = random_pwl_network(seed);
        let (image, map) = transform(&net).map_err(|e| format!("network {seed}: {e}"))?;
        for r in 0..50u64 {
            let run = random_run(&net, seed * 1000 + r, 8);
            let (_, cost) = replay(&net, &run).map_err(|e| format!("network {seed} run {r}: {e}"))?;
            let lifted = lift_run(&net, &image, &run, &map).map_err(|e| format!("network {seed} run {r}: {e}"))?;
            let (_, image_cost) = replay(&image, &lifted).map_err(|e| format!("network {seed} run {r} lifted: {e}"))?;
            if image_cost != cost {
                return Err(format!("network {seed} run {r}: cost {cost} lifted to {image_cost}"));
            }
            let back = project_run(&net, &image, &lifted, &map).map_err(|e| format!("network {seed} run {r}: {e}"))?;
            let (_, back_cost) = replay(&net, &back).map_err(|e| format!("network {seed} run {r} projected: {e}"))?;
            if back_cost != cost || back != run {
                return Err(format!("network {seed} run {r}: projection does not return the run"));
            }
            runs += 1;
            lifted_steps += lifted.steps.len();
        }
    }
    within(started, Duration::from_secs(60), "bisimulation")?;
    Ok(format!("200 networks, {runs} runs, {lifted_steps} image steps, exact"))
}

/// Random polynomial with non-negative values on `[0, T]` and its
/// derivative bound `sum i |a_i| T^(i-1)`.
fn random_polynomial(rng: &mut ChaCha8Rng, horizon: &Rational) -> (Expr, Rational) {
    let degree = rng.gen_range(1..=4u32);
    let coeffs: Vec<Rational> = (0..=degree)
        .map(|_| ratio(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
        .collect();
    let mut lipschitz = Rational::from_integer(0.into());
    let mut floor = Rational::from_integer(0.into());
    for (i, a) in coeffs.iter().enumerate().skip(1) {
        let magnitude = if *a < int(0) { -a } else { a.clone() };
        lipschitz += &magnitude * int(i as i64) * pow(horizon, i as u32 - 1);
        floor += &magnitude * pow(horizon, i as u32);
    }
    if lipschitz == int(0) {
        lipschitz = int(1);
    }
    let constant = if coeffs[0] < int(0) { floor } else { &coeffs[0] + floor };
    let mut terms = vec![Expr::constant(constant)];
    for (i, a) in coeffs.into_iter().enumerate().skip(1) {
        terms.push(Expr::Mul(vec![Expr::constant(a), Expr::dwell().pow(i as u32)]));
    }
    (Expr::Add(terms), lipschitz)
}

fn pow(q: &Rational, n: u32) -> Rational {
    (0..n).fold(int(1), |acc, _| acc * q)
}

fn sandwich_bounds() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a9d);
    let mut worst_gap = ratio(0, 1);
    for i in 0..20 {
        let horizon = int(rng.gen_range(1..=5));
        let (f, lipschitz) = random_polynomial(&mut rng, &horizon);
        let delta = &horizon / int(rng.gen_range(4..=40));
        let (lo, hi) = sandwich(&f, &lipschitz, &horizon, &delta).map_err(|e| format!("polynomial {i}: {e}"))?;
        let eval = |t: &Rational| f.eval(&|_| Some(t.clone())).expect("dwell-only polynomial");
        let bound = &lipschitz * &delta;
        for s in 0..1000 {
            let t = &horizon * ratio(s, 999);
            let (fl, fv, fu) = (lo.eval(&t), eval(&t), hi.eval(&t));
            if !(fl <= fv && fv <= fu) {
                return Err(format!("polynomial {i} at {t}: {fl} <= {fv} <= {fu} fails"));
            }
            let gap = &fu - &fl;
            if gap > bound {
                return Err(format!("polynomial {i} at {t}: gap {gap} exceeds K*delta = {bound}"));
            }
            let relative = gap / &bound;
            if relative > worst_gap {
                worst_gap = relative;
            }
        }
        for p in lo.points.iter().filter(|p| **p <= horizon) {
            let fv = eval(p);
            if lo.eval(p) != fv || hi.eval(p) != fv {
                return Err(format!("polynomial {i}: bounds differ from f at grid point {p}"));
            }
        }
    }
    within(started, Duration::from_secs(10), "sandwich")?;
    Ok(format!(
        "20 polynomials x 1000 samples, widest gap {worst_gap} of K*delta"
    ))
}

fn solver_vs_oracle() -> Verdict {
    let started = Instant::now();
    let p = SizeParams::default();
    let cfg = SolverConfig::default();
    let gamma = ratio(1, 1000);
    let (mut reachable, mut optimal) = (0, 0);
    for seed in 0..100u64 {
        let (net, q) = random_instance(seed, &p);
        let truth = opt_cost_exhaustive(&net, &q.source, &q.target, q.steps, p.max_const)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let r = optimize(&net, &q, &cfg, &gamma).map_err(|e| format!("seed {seed}: {e}"))?;
        let Some(o) = truth else {
            if r.status != OptStatus::Infeasible {
                return Err(format!(
                    "seed {seed}: oracle finds no run, optimize says {}",
                    r.status.name()
                ));
            }
            continue;
        };
        reachable += 1;
        let upper = r.upper.clone().ok_or_else(|| format!("seed {seed}: no upper bound"))?;
        if upper < o.cost || &upper - &o.cost > gamma {
            return Err(format!("seed {seed}: upper {upper}, optimum {}", o.cost));
        }
        if r.lower.as_ref().is_some_and(|l| l > &o.cost) {
            return Err(format!(
                "seed {seed}: lower {} above optimum {}",
                r.lower.unwrap(),
                o.cost
            ));
        }
        if r.status == OptStatus::Optimal {
            optimal += 1;
        }
        for (budget, want) in [
            (o.cost.clone(), DecisionVerdict::Yes),
            (&o.cost - &gamma, DecisionVerdict::No),
        ] {
            let probe = Query {
                budget: budget.clone(),
                cmp: Comparator::Le,
                ..q.clone()
            };
            let got = decide(&net, &probe, &cfg)
                .map_err(|e| format!("seed {seed}: {e}"))?
                .verdict;
            if got != want {
                return Err(format!(
                    "seed {seed}: check at {budget} gave {got:?}, expected {want:?}"
                ));
            }
        }
    }
    within(started, Duration::from_secs(300), "solver-vs-oracle")?;
    Ok(format!(
        "100 instances ({reachable} reachable, {optimal} proved optimal) in {:.1}s",
        started.elapsed().as_secs_f64()
    ))
}

fn two_counter() -> Verdict {
    let started = Instant::now();
    let program = parse_program("inc c 1\ninc c 2\ndec c 3\nhalt\n").map_err(|e| e.to_string())?;
    let model = compile(&program).map_err(|e| e.to_string())?;
    let sim = simulate(&model, None, 100).map_err(|e| e.to_string())?;
    let (end, cost) = replay(&model.network, &sim.run).map_err(|e| e.to_string())?;
    if cost != int(0) {
        return Err(format!("correct run costs {cost}"));
    }
    if end.locs[0] != "halt" {
        return Err(format!("correct run ends in {}", end.locs[0]));
    }
    let c = end.clocks.get(&clock_key(sim.roles.clock(Counter::C)));
    if c != Some(&enc(1)) {
        return Err(format!("c encoded as {c:?}, expected {}", enc(1)));
    }
    let mut cheapest: Option<Rational> = None;
    for op in 0..sim.operations {
        for shift in [ratio(1, 8), ratio(-1, 8)] {
            let off = simulate(&model, Some((op, shift.clone())), 100).map_err(|e| e.to_string())?;
            let (_, off_cost) = replay(&model.network, &off.run).map_err(|e| e.to_string())?;
            if off_cost <= int(0) {
                return Err(format!("operation {op} shifted by {shift} still costs {off_cost}"));
            }
            if cheapest.as_ref().is_none_or(|m| &off_cost < m) {
                cheapest = Some(off_cost);
            }
        }
    }
    within(started, Duration::from_secs(1), "exact two-counter check")?;

    let doc = gen_two_counter(&program).map_err(|e| e.to_string())?;
    // Budget 0 is stronger than 10^-6: a zero-cost witness answers both.
    let q = doc.queries[0].clone();
    let cfg = SolverConfig::default().with_timeout(Duration::from_secs(300));
    let smt = match decide(&doc.network, &q, &cfg) {
        Ok(d) if d.verdict == DecisionVerdict::No => return Err("solver refutes the zero-cost run".into()),
        Ok(d) => format!("{:?} in {:.1}s", d.verdict, d.seconds),
        Err(e) => format!("error ({e})"),
    };
    Ok(format!(
        "cost 0 at halt with c = {}, {} perturbations all positive (cheapest {}), solver {smt}",
        enc(1),
        2 * sim.operations,
        cheapest.unwrap_or_else(|| int(0))
    ))
}

fn alp() -> Verdict {
    let cfg = SolverConfig::default().with_timeout(Duration::from_secs(60));
    let mut report = Vec::new();
    for (planes, runways) in [(2, 1), (3, 2)] {
        let inst = desk_instance(planes, runways);
        let doc = gen_alp(&inst, int(800)).map_err(|e| e.to_string())?;
        let d = decide(&doc.network, &doc.queries[0], &cfg).map_err(|e| format!("{planes}x{runways}: {e}"))?;
        if d.verdict != DecisionVerdict::Yes {
            return Err(format!("{planes} planes / {runways} runways: {:?}", d.verdict));
        }
        let w = d.witness.ok_or("sat without witness")?;
        validate_schedule(&inst, &w.run).map_err(|e| format!("{planes}x{runways}: {e}"))?;
        report.push(format!("{planes}x{runways} sat in {:.2}s cost {}", d.seconds, w.cost));
    }
    // Plane window [2, 14] with target 6: landing on target is free.
    let single = desk_instance(1, 1);
    let q = single.query(int(800));
    let net = single.network().map_err(|e| e.to_string())?;
    let r = optimize(&net, &q, &SolverConfig::default(), &ratio(1, 1000))?;
    if r.status != OptStatus::Optimal || r.upper != Some(int(0)) || r.lower != Some(int(0)) {
        return Err(format!(
            "single plane: {} [{:?}, {:?}], expected exactly 0",
            r.status.name(),
            r.lower,
            r.upper
        ));
    }
    report.push("1 plane optimum exactly 0".into());
    Ok(report.join(", "))
}

fn determinism() -> Verdict {
    let mut scripts = 0;
    let mut check = |net: &Network, q: &Query, what: String| -> Result<(), String> {
        let a = encode(net, q).map_err(|e| format!("{what}: {e}"))?;
        let b = encode(&net.clone(), &q.clone()).map_err(|e| format!("{what}: {e}"))?;
        if a.text != b.text {
            return Err(format!("{what}: scripts differ"));
        }
        scripts += 1;
        Ok(())
    };
    for seed in 0..100u64 {
        let (net, q) = random_instance(seed, &SizeParams::default());
        check(&net, &q, format!("random instance {seed}"))?;
    }
    for (planes, runways) in [(2, 1), (3, 2)] {
        let doc = gen_alp(&desk_instance(planes, runways), int(800)).map_err(|e| e.to_string())?;
        check(&doc.network, &doc.queries[0], format!("alp {planes}x{runways}"))?;
    }
    let program = parse_program("inc c 1\ninc c 2\ndec c 3\nhalt\n").map_err(|e| e.to_string())?;
    let doc = gen_two_counter(&program).map_err(|e| e.to_string())?;
    check(&doc.network, &doc.queries[0], "two-counter".into())?;
    let errors = INTEGRITY_ERRORS.load(Ordering::Relaxed);
    if errors > 0 {
        return Err(format!("{errors} decode-integrity errors"));
    }
    Ok(format!(
        "{scripts} scripts byte-identical, 0 integrity errors over {} solver calls",
        SOLVER_CALLS.load(Ordering::Relaxed)
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("bisimulation cost preservation", bisimulation),
        ("sandwich bounds", sandwich_bounds),
        ("solver vs exhaustive oracle", solver_vs_oracle),
        ("two-counter zero-cost run", two_counter),
        ("airport landing at desk scale", alp),
        ("encoder determinism and integrity", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
