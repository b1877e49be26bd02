//! Exhaustive ground truth for closed-guard, integer-constant, linearly
//! priced networks: enumerate canonical runs whose delays are integers in
//! `[1, max_const + 1]`.

use crate::model::{
    Automaton, CmpOp, Comparator, Edge, Guard, LinearPiece, Location, LocationSelection, Network, PriceFunction,
    PwlStructure, Query, SyncDir,
};
use crate::rational::{int, Rational};
use crate::semantics::{self, Configuration, Run, Step};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("unsupported instance: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub cost: Rational,
    pub run: Run,
}

fn check_supported(net: &Network, max_const: u64) -> Result<(), OracleError> {
    let guard_ok = |g: &Guard, what: &str| -> Result<(), OracleError> {
        for a in g.atoms() {
            if !a.op.is_closed() {
                return Err(OracleError::Unsupported(format!(
                    "{what} uses strict `{}`",
                    a.op.symbol()
                )));
            }
            if a.bound > max_const {
                return Err(OracleError::Unsupported(format!(
                    "{what} constant {} exceeds {max_const}",
                    a.bound
                )));
            }
        }
        Ok(())
    };
    for a in &net.automata {
        for l in &a.locations {
            if !matches!(l.price, PriceFunction::ConstantRate(_)) {
                return Err(OracleError::Unsupported(format!(
                    "`{}.{}` has a {} price",
                    a.name,
                    l.id,
                    l.price.kind()
                )));
            }
            guard_ok(&l.invariant, &format!("invariant of `{}.{}`", a.name, l.id))?;
        }
        for (i, e) in a.edges.iter().enumerate() {
            guard_ok(&e.guard, &format!("guard of `{}#{i}`", a.name))?;
        }
    }
    Ok(())
}

type StateKey = (Vec<String>, Vec<Rational>, bool);

struct Search<'a> {
    net: &'a Network,
    target: Vec<(usize, &'a str)>,
    menu: Vec<Rational>,
    best: Option<Optimum>,
    path: Vec<Step>,
    start: Configuration,
    /// Cheapest cost seen per state, with the steps that were left.
    seen: HashMap<StateKey, Vec<(u32, Rational)>>,
}

impl Search<'_> {
    fn at_target(&self, c: &Configuration) -> bool {
        self.target.iter().all(|(ai, l)| c.locs[*ai] == *l)
    }

    fn dominated(&mut self, c: &Configuration, after_delay: bool, left: u32) -> bool {
        let key = (
            c.locs.clone(),
            c.clocks.iter().map(|(_, v)| v.clone()).collect(),
            after_delay,
        );
        let entries = self.seen.entry(key).or_default();
        if entries.iter().any(|(l, cost)| *l >= left && cost <= &c.cost) {
            return true;
        }
        entries.retain(|(l, cost)| !(*l <= left && cost >= &c.cost));
        entries.push((left, c.cost.clone()));
        false
    }

    fn dfs(&mut self, c: &Configuration, after_delay: bool, left: u32) {
        if self.best.as_ref().is_some_and(|b| c.cost >= b.cost) {
            return;
        }
        if self.at_target(c) {
            self.best = Some(Optimum {
                cost: c.cost.clone(),
                run: Run {
                    start: self.start.clone(),
                    steps: self.path.clone(),
                },
            });
            // Prices are non-negative: extending cannot be cheaper.
            return;
        }
        if left == 0 || self.dominated(c, after_delay, left) {
            return;
        }
        for (s, next) in semantics::successors(self.net, c, &self.menu) {
            let is_delay = s.is_delay();
            if (is_delay && after_delay) || s == Step::Null {
                continue;
            }
            self.path.push(s);
            self.dfs(&next, is_delay, left - 1);
            self.path.pop();
        }
    }
}

/// Minimum replay cost over canonical runs of at most `steps` steps from
/// `from` to `to`, or `None` when the target is not reached.
pub fn opt_cost_exhaustive(
    net: &Network,
    from: &LocationSelection,
    to: &LocationSelection,
    steps: u32,
    max_const: u64,
) -> Result<Option<Optimum>, OracleError> {
    check_supported(net, max_const)?;
    let q = Query {
        source: from.clone(),
        target: to.clone(),
        steps,
        budget: Rational::zero(),
        cmp: Comparator::Le,
    };
    let locs = q
        .source_locations(net)
        .ok_or_else(|| OracleError::Unsupported("source location missing".into()))?;
    let start = Configuration::initial(net, locs).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let mut target = Vec::new();
    for (aut, l) in to {
        let ai = net
            .automaton_index(aut)
            .ok_or_else(|| OracleError::Unsupported(format!("unknown automaton `{aut}`")))?;
        target.push((ai, l.as_str()));
    }
    let mut search = Search {
        net,
        target,
        menu: (1..=max_const + 1).map(|d| Rational::from_integer(d.into())).collect(),
        best: None,
        path: Vec::new(),
        start: start.clone(),
        seen: HashMap::new(),
    };
    search.dfs(&start, false, steps);
    Ok(search.best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeParams {
    pub max_automata: usize,
    pub max_locations: usize,
    pub max_clocks: usize,
    pub max_const: u64,
    pub max_rate: u64,
    pub max_steps: u32,
}

impl Default for SizeParams {
    fn default() -> Self {
        SizeParams {
            max_automata: 2,
            max_locations: 4,
            max_clocks: 2,
            max_const: 3,
            max_rate: 4,
            max_steps: 6,
        }
    }
}

fn random_guard(rng: &mut ChaCha8Rng, clocks: &[String], p: &SizeParams, ops: &[CmpOp]) -> Guard {
    let mut g = Guard::truth();
    for c in clocks {
        if rng.gen_bool(0.4) {
            let op = ops[rng.gen_range(0..ops.len())];
            g = g.and(c, op, rng.gen_range(0..=p.max_const));
        }
    }
    g
}

fn random_automaton(rng: &mut ChaCha8Rng, name: &str, p: &SizeParams) -> Automaton {
    let mut a = Automaton::new(name);
    let n_clocks = rng.gen_range(1..=p.max_clocks);
    a.clocks = ["x", "y", "w", "v"]
        .iter()
        .take(n_clocks)
        .map(|c| c.to_string())
        .collect();
    let n_locs = rng.gen_range(2..=p.max_locations.max(2));
    for i in 0..n_locs {
        let mut l =
            Location::new(&format!("l{i}")).with_price(PriceFunction::ConstantRate(rng.gen_range(0..=p.max_rate)));
        if i > 0 && rng.gen_bool(0.25) {
            let c = &a.clocks[rng.gen_range(0..a.clocks.len())];
            l = l.with_invariant(Guard::atom(c, CmpOp::Le, rng.gen_range(1..=p.max_const)));
        }
        a.locations.push(l);
    }
    let n_edges = rng.gen_range(n_locs - 1..=n_locs + 2);
    for i in 0..n_edges {
        // The first edges form a chain so every location is reachable in the graph.
        let (from, to) = if i + 1 < n_locs {
            (i, i + 1)
        } else {
            (rng.gen_range(0..n_locs), rng.gen_range(0..n_locs))
        };
        let mut e = Edge::new(&format!("l{from}"), &format!("l{to}"))
            .with_guard(random_guard(
                rng,
                &a.clocks,
                p,
                &[CmpOp::Le, CmpOp::Ge, CmpOp::Ge, CmpOp::Eq],
            ))
            .with_price(rng.gen_range(0..=3));
        for c in a.clocks.clone() {
            if rng.gen_bool(0.35) {
                e = e.reset(&c);
            }
        }
        a.edges.push(e);
    }
    a.initial = Some("l0".into());
    a
}

/// Deterministic closed-guard integer instance for `seed`.
pub fn random_instance(seed: u64, p: &SizeParams) -> (Network, Query) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_auts = rng.gen_range(1..=p.max_automata.max(1));
    let mut net = Network {
        automata: (0..n_auts)
            .map(|i| random_automaton(&mut rng, &format!("P{i}"), p))
            .collect(),
        ..Network::default()
    };
    if n_auts > 1 && rng.gen_bool(0.6) {
        net.channels.insert("c".into());
        let (sender, receiver) = (0, 1 + rng.gen_range(0..n_auts - 1));
        for (ai, dir) in [(sender, SyncDir::Send), (receiver, SyncDir::Receive)] {
            let a = &mut net.automata[ai];
            let k = rng.gen_range(0..a.edges.len());
            a.edges[k].sync = Some(crate::model::Sync {
                channel: "c".into(),
                dir,
            });
        }
    }
    let mut target = LocationSelection::new();
    for (i, a) in net.automata.iter().enumerate() {
        if i == 0 || rng.gen_bool(0.5) {
            let l = &a.locations[rng.gen_range(1..a.locations.len())];
            target.insert(a.name.clone(), l.id.clone());
        }
    }
    let q = Query {
        source: LocationSelection::new(),
        target,
        steps: rng.gen_range(1..=p.max_steps),
        budget: Rational::from_integer(100.into()),
        cmp: Comparator::Le,
    };
    (net, q)
}

fn random_structure(rng: &mut ChaCha8Rng) -> PwlStructure {
    let n = rng.gen_range(1..=3);
    let mut points: Vec<i64> = vec![0];
    while points.len() < n {
        let p = rng.gen_range(1..=5);
        if !points.contains(&p) {
            points.push(p);
        }
    }
    points.sort_unstable();
    let pieces = (0..n)
        .map(|_| LinearPiece::new(int(rng.gen_range(0..=4)), int(rng.gen_range(0..=6))))
        .collect();
    PwlStructure {
        points: points.into_iter().map(int).collect(),
        point_values: (0..n).map(|_| int(rng.gen_range(0..=6))).collect(),
        pieces,
        integral: true,
    }
}

/// Deterministic single-automaton network mixing piecewise and constant
/// rates, with strict and non-strict guards. Draws are repeated until the
/// initial location can be left.
pub fn random_pwl_network(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = SizeParams {
        max_const: 5,
        ..SizeParams::default()
    };
    let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq];
    let mut draw = 0;
    loop {
        let mut a = random_automaton(&mut rng, "A", &p);
        for l in &mut a.locations {
            if rng.gen_bool(0.7) {
                l.price = PriceFunction::Piecewise(random_structure(&mut rng));
            }
        }
        for e in &mut a.edges {
            if rng.gen_bool(0.5) {
                e.guard = random_guard(&mut rng, &a.clocks, &p, &ops);
            }
        }
        let net = Network::single(a);
        draw += 1;
        if draw == 32 || (0..4).any(|r| !random_run(&net, seed ^ r, 2).steps.is_empty()) {
            return net;
        }
    }
}

/// Random canonical run of at most `len` steps from the initial locations,
/// ending on a discrete step.
/// Delays are drawn from the dwell breakpoints of the current locations,
/// their midpoints and random fractions, so they often land on breakpoints.
pub fn random_run(net: &Network, seed: u64, len: usize) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<String> = net
        .automata
        .iter()
        .map(|a| a.initial.clone().expect("initial location"))
        .collect();
    let start = Configuration::initial(net, initial).expect("initial configuration");
    let mut c = start.clone();
    let mut steps = Vec::new();
    while steps.len() < len {
        let mut menu: Vec<Rational> = Vec::new();
        for (ai, a) in net.automata.iter().enumerate() {
            if let Some(PriceFunction::Piecewise(s)) = a.location(&c.locs[ai]).map(|l| &l.price) {
                for (i, q) in s.points.iter().enumerate().skip(1) {
                    menu.push(q.clone());
                    menu.push((q + &s.points[i - 1]) / int(2));
                }
            }
        }
        for _ in 0..3 {
            menu.push(Rational::new(rng.gen_range(1..=18).into(), rng.gen_range(1..=3).into()));
        }
        let after_delay = matches!(steps.last(), Some(Step::Delay(_)));
        let options: Vec<(Step, Configuration)> = semantics::successors(net, &c, &menu)
            .into_iter()
            .filter(|(s, _)| !matches!(s, Step::Null) && !(after_delay && s.is_delay()))
            // A delay must be followed by some discrete step.
            .filter(|(s, next)| {
                !s.is_delay()
                    || semantics::successors(net, next, &[])
                        .iter()
                        .any(|(t, _)| !matches!(t, Step::Null))
            })
            .collect();
        if options.is_empty() {
            break;
        }
        let (s, next) = options[rng.gen_range(0..options.len())].clone();
        steps.push(s);
        c = next;
    }
    if matches!(steps.last(), Some(Step::Delay(_))) {
        steps.pop();
    }
    Run { start, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, validate};
    use crate::rational::int;

    fn rate_two() -> Network {
        let mut a = Automaton::new("A");
        a.clocks.push("x".into());
        a.locations
            .push(Location::new("l0").with_price(PriceFunction::ConstantRate(2)));
        a.locations.push(Location::new("goal"));
        a.edges.push(
            Edge::new("l0", "goal")
                .with_guard(Guard::atom("x", CmpOp::Ge, 3))
                .with_price(1),
        );
        a.initial = Some("l0".into());
        Network::single(a)
    }

    fn sel(l: &str) -> LocationSelection {
        [("A".to_string(), l.to_string())].into()
    }

    #[test]
    fn rate_two_optimum() {
        let net = rate_two();
        let best = opt_cost_exhaustive(&net, &sel("l0"), &sel("goal"), 2, 3)
            .unwrap()
            .unwrap();
        assert_eq!(best.cost, int(7));
        assert_eq!(semantics::replay(&net, &best.run).unwrap().1, int(7));
        assert_eq!(opt_cost_exhaustive(&net, &sel("l0"), &sel("goal"), 1, 3).unwrap(), None);
        assert_eq!(
            opt_cost_exhaustive(&net, &sel("l0"), &sel("l0"), 0, 3)
                .unwrap()
                .unwrap()
                .cost,
            int(0)
        );
        assert_eq!(opt_cost_exhaustive(&net, &sel("goal"), &sel("l0"), 4, 3).unwrap(), None);
    }

    #[test]
    fn rejects_open_guards_and_nonlinear_prices() {
        let mut net = rate_two();
        net.automata[0].edges[0].guard = Guard::atom("x", CmpOp::Gt, 3);
        assert!(opt_cost_exhaustive(&net, &sel("l0"), &sel("goal"), 2, 3).is_err());
        let mut net = rate_two();
        net.automata[0].locations[0].price = PriceFunction::Piecewise(model::PwlStructure::linear(2));
        assert!(opt_cost_exhaustive(&net, &sel("l0"), &sel("goal"), 2, 3).is_err());
    }

    #[test]
    fn instances_are_deterministic_valid_and_varied() {
        let p = SizeParams::default();
        assert_eq!(random_instance(42, &p), random_instance(42, &p));
        let (mut resets, mut handshakes, mut invariants) = (0, 0, 0);
        for seed in 0..100 {
            let (net, q) = random_instance(seed, &p);
            assert!(validate(&net).is_empty(), "seed {seed}: {:?}", validate(&net));
            assert!(model::validate_query(&net, &q, "query").is_empty());
            resets += net
                .automata
                .iter()
                .any(|a| a.edges.iter().any(|e| !e.resets.is_empty())) as u32;
            handshakes += !net.channels.is_empty() as u32;
            invariants += net
                .automata
                .iter()
                .any(|a| a.locations.iter().any(|l| !l.invariant.is_true())) as u32;
            let best = opt_cost_exhaustive(&net, &q.source, &q.target, q.steps, p.max_const).unwrap();
            if let Some(b) = best {
                assert_eq!(semantics::replay(&net, &b.run).unwrap().1, b.cost);
            }
        }
        assert!(
            resets > 10 && handshakes > 10 && invariants > 10,
            "{resets} {handshakes} {invariants}"
        );
    }

    #[test]
    fn piecewise_networks_and_runs_are_well_formed() {
        assert_eq!(random_pwl_network(7), random_pwl_network(7));
        let mut piecewise = 0;
        for seed in 0..40 {
            let net = random_pwl_network(seed);
            assert!(validate(&net).is_empty(), "seed {seed}: {:?}", validate(&net));
            piecewise += net.automata[0]
                .locations
                .iter()
                .filter(|l| matches!(l.price, PriceFunction::Piecewise(_)))
                .count();
            for r in 0..10 {
                let run = random_run(&net, r, 6);
                assert!(run.steps.len() <= 6);
                assert_eq!(semantics::first_non_canonical(&run.steps), None);
                assert!(!matches!(run.steps.last(), Some(Step::Delay(_)) | Some(Step::Null)));
                semantics::replay(&net, &run).unwrap();
            }
        }
        assert!(piecewise > 40);
    }
}
