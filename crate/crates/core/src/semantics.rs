//! Priced transition semantics: configurations, steps and exact run costs.
//!
//! Delays are global. Discrete steps move one automaton, or two automata
//! joined by a channel handshake. Invariants are checked at both ends of
//! every delay and after every discrete step; since each atom constrains a
//! single clock, the endpoint check covers the whole delay.

use crate::model::{ClockValuation, Edge, ModelError, Network, SyncDir};
use crate::rational::{self, Rational};
use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    /// One location id per automaton, in network order.
    pub locs: Vec<String>,
    pub clocks: ClockValuation,
    pub cost: Rational,
}

impl Configuration {
    /// All clocks zero, cost zero. Fails if a location is unknown or an
    /// invariant does not hold at zero.
    pub fn initial(net: &Network, locs: Vec<String>) -> Result<Self, StepError> {
        let c = Configuration {
            locs,
            clocks: net.zero_valuation(),
            cost: Rational::zero(),
        };
        check_locations(net, &c)?;
        check_invariants(net, &c)?;
        Ok(c)
    }

    pub fn location_of(&self, net: &Network, automaton: &str) -> Option<&str> {
        net.automaton_index(automaton).map(|i| self.locs[i].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub automaton: String,
    pub edge: usize,
}

impl EdgeRef {
    pub fn new(automaton: &str, edge: usize) -> Self {
        EdgeRef {
            automaton: automaton.to_string(),
            edge,
        }
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.automaton, self.edge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    /// Strictly positive dwell.
    Delay(Rational),
    Switch(EdgeRef),
    Handshake {
        sender: EdgeRef,
        receiver: EdgeRef,
    },
    Null,
}

impl Step {
    pub fn is_delay(&self) -> bool {
        matches!(self, Step::Delay(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub start: Configuration,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("delay must be positive (got {0})")]
    NonPositiveDelay(String),
    #[error("invariant of `{automaton}.{location}` violated")]
    Invariant { automaton: String, location: String },
    #[error("guard of {0} not satisfied")]
    Guard(EdgeRef),
    #[error("edge {0} does not leave the current location")]
    WrongSource(EdgeRef),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeRef),
    #[error("unknown location `{location}` for automaton `{automaton}`")]
    UnknownLocation { automaton: String, location: String },
    #[error("edge {0} synchronizes and cannot fire alone")]
    UnpairedSync(EdgeRef),
    #[error("handshake mismatch: {0}")]
    Channel(String),
    #[error("configuration has {found} locations for {expected} automata")]
    Arity { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("consecutive delay steps at index {0}")]
    NonCanonical(usize),
    #[error("step {index} inadmissible: {source}")]
    Inadmissible { index: usize, source: StepError },
    #[error("invalid start configuration: {0}")]
    Start(StepError),
}

fn check_locations(net: &Network, c: &Configuration) -> Result<(), StepError> {
    if c.locs.len() != net.automata.len() {
        return Err(StepError::Arity {
            expected: net.automata.len(),
            found: c.locs.len(),
        });
    }
    for (a, l) in net.automata.iter().zip(&c.locs) {
        if a.location(l).is_none() {
            return Err(StepError::UnknownLocation {
                automaton: a.name.clone(),
                location: l.clone(),
            });
        }
    }
    Ok(())
}

fn check_invariants_at(net: &Network, locs: &[String], nu: &ClockValuation) -> Result<(), StepError> {
    for (i, (a, l)) in net.automata.iter().zip(locs).enumerate() {
        let loc = a.location(l).ok_or_else(|| StepError::UnknownLocation {
            automaton: a.name.clone(),
            location: l.clone(),
        })?;
        if !net.guard_sat(i, nu, &loc.invariant)? {
            return Err(StepError::Invariant {
                automaton: a.name.clone(),
                location: l.clone(),
            });
        }
    }
    Ok(())
}

fn check_invariants(net: &Network, c: &Configuration) -> Result<(), StepError> {
    check_invariants_at(net, &c.locs, &c.clocks)
}

pub fn delay_step(net: &Network, c: &Configuration, t: &Rational) -> Result<Configuration, StepError> {
    if !t.is_positive() {
        return Err(StepError::NonPositiveDelay(rational::format(t)));
    }
    check_invariants(net, c)?;
    let after = c.clocks.delayed(t);
    check_invariants_at(net, &c.locs, &after)?;
    let mut cost = c.cost.clone();
    for (i, (a, l)) in net.automata.iter().zip(&c.locs).enumerate() {
        let loc = a.location(l).expect("checked above");
        cost += net.price_eval(i, &loc.price, &c.clocks, t)?;
    }
    Ok(Configuration {
        locs: c.locs.clone(),
        clocks: after,
        cost,
    })
}

fn resolve<'a>(net: &'a Network, r: &EdgeRef) -> Result<(usize, &'a Edge), StepError> {
    let ai = net
        .automaton_index(&r.automaton)
        .ok_or_else(|| StepError::UnknownEdge(r.clone()))?;
    let e = net.automata[ai]
        .edges
        .get(r.edge)
        .ok_or_else(|| StepError::UnknownEdge(r.clone()))?;
    Ok((ai, e))
}

fn fire(net: &Network, c: &Configuration, next: &mut Configuration, r: &EdgeRef) -> Result<(), StepError> {
    let (ai, e) = resolve(net, r)?;
    if c.locs[ai] != e.from {
        return Err(StepError::WrongSource(r.clone()));
    }
    if !net.guard_sat(ai, &c.clocks, &e.guard)? {
        return Err(StepError::Guard(r.clone()));
    }
    for clock in &e.resets {
        let key = net
            .clock_key(ai, clock)
            .ok_or_else(|| ModelError::UnknownClock(clock.clone()))?;
        next.clocks.set(&key, Rational::zero());
    }
    next.locs[ai] = e.to.clone();
    next.cost += Rational::from_integer(e.price.into());
    Ok(())
}

/// Applies a discrete step (`Switch`, `Handshake` or `Null`).
pub fn switch_step(net: &Network, c: &Configuration, s: &Step) -> Result<Configuration, StepError> {
    check_invariants(net, c)?;
    let mut next = c.clone();
    match s {
        Step::Delay(t) => return delay_step(net, c, t),
        Step::Null => {}
        Step::Switch(r) => {
            if resolve(net, r)?.1.sync.is_some() {
                return Err(StepError::UnpairedSync(r.clone()));
            }
            fire(net, c, &mut next, r)?;
        }
        Step::Handshake { sender, receiver } => {
            let (sa, se) = resolve(net, sender)?;
            let (ra, re) = resolve(net, receiver)?;
            if sa == ra {
                return Err(StepError::Channel("sender and receiver in the same automaton".into()));
            }
            match (&se.sync, &re.sync) {
                (Some(s), Some(r)) if s.dir == SyncDir::Send && r.dir == SyncDir::Receive && s.channel == r.channel => {
                }
                _ => {
                    return Err(StepError::Channel(format!(
                        "{sender} and {receiver} are not a send/receive pair on one channel"
                    )))
                }
            }
            fire(net, c, &mut next, sender)?;
            fire(net, c, &mut next, receiver)?;
        }
    }
    check_invariants(net, &next)?;
    Ok(next)
}

pub fn step(net: &Network, c: &Configuration, s: &Step) -> Result<Configuration, StepError> {
    match s {
        Step::Delay(t) => delay_step(net, c, t),
        other => switch_step(net, c, other),
    }
}

/// Index of the first delay that directly follows another delay.
pub fn first_non_canonical(steps: &[Step]) -> Option<usize> {
    steps
        .windows(2)
        .position(|w| w[0].is_delay() && w[1].is_delay())
        .map(|i| i + 1)
}

/// Every configuration visited, starting with `run.start`.
pub fn replay_trace(net: &Network, run: &Run) -> Result<Vec<Configuration>, ReplayError> {
    if let Some(i) = first_non_canonical(&run.steps) {
        return Err(ReplayError::NonCanonical(i));
    }
    check_locations(net, &run.start)
        .and_then(|_| check_invariants(net, &run.start))
        .map_err(ReplayError::Start)?;
    let mut trace = Vec::with_capacity(run.steps.len() + 1);
    trace.push(run.start.clone());
    for (index, s) in run.steps.iter().enumerate() {
        let next = step(net, trace.last().expect("non-empty"), s)
            .map_err(|source| ReplayError::Inadmissible { index, source })?;
        trace.push(next);
    }
    Ok(trace)
}

/// Final configuration and the run's cost.
pub fn replay(net: &Network, run: &Run) -> Result<(Configuration, Rational), ReplayError> {
    let mut trace = replay_trace(net, run)?;
    let last = trace.pop().expect("non-empty");
    let cost = &last.cost - &run.start.cost;
    Ok((last, cost))
}

/// Admissible discrete steps, `Null`, and a delay for each admissible menu entry.
pub fn successors(net: &Network, c: &Configuration, delay_menu: &[Rational]) -> Vec<(Step, Configuration)> {
    let mut out = Vec::new();
    let mut push = |s: Step| {
        if let Ok(next) = step(net, c, &s) {
            out.push((s, next));
        }
    };
    push(Step::Null);
    for (ai, a) in net.automata.iter().enumerate() {
        for (ei, e) in a.outgoing(&c.locs[ai]) {
            match &e.sync {
                None => push(Step::Switch(EdgeRef::new(&a.name, ei))),
                Some(s) if s.dir == SyncDir::Send => {
                    for (bi, b) in net.automata.iter().enumerate() {
                        if bi == ai {
                            continue;
                        }
                        for (fi, f) in b.outgoing(&c.locs[bi]) {
                            if matches!(&f.sync, Some(r) if r.dir == SyncDir::Receive && r.channel == s.channel) {
                                push(Step::Handshake {
                                    sender: EdgeRef::new(&a.name, ei),
                                    receiver: EdgeRef::new(&b.name, fi),
                                });
                            }
                        }
                    }
                }
                Some(_) => {}
            }
        }
    }
    for t in delay_menu {
        push(Step::Delay(t.clone()));
    }
    out
}

pub fn step_to_json(s: &Step) -> Value {
    let edge = |r: &EdgeRef| json!({"automaton": r.automaton, "edge": r.edge});
    match s {
        Step::Delay(t) => json!({"delay": rational::to_json(t)}),
        Step::Switch(r) => json!({"switch": edge(r)}),
        Step::Handshake { sender, receiver } => {
            json!({"handshake": {"sender": edge(sender), "receiver": edge(receiver)}})
        }
        Step::Null => json!("null"),
    }
}

pub fn configuration_to_json(net: &Network, c: &Configuration) -> Value {
    let locs: Map<String, Value> = net
        .automata
        .iter()
        .zip(&c.locs)
        .map(|(a, l)| (a.name.clone(), json!(l)))
        .collect();
    let clocks: Map<String, Value> = c
        .clocks
        .iter()
        .map(|(k, v)| (k.clone(), rational::to_json(v)))
        .collect();
    json!({"locations": locs, "clocks": clocks, "cost": rational::to_json(&c.cost)})
}

pub fn run_to_json(net: &Network, r: &Run) -> Value {
    json!({
        "start": configuration_to_json(net, &r.start),
        "steps": r.steps.iter().map(step_to_json).collect::<Vec<_>>(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct RunFormatError {
    pub path: String,
    pub message: String,
}

fn run_err(path: &str, message: impl Into<String>) -> RunFormatError {
    RunFormatError {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn step_from_json(v: &Value, path: &str) -> Result<Step, RunFormatError> {
    let edge = |v: &Value, p: &str| -> Result<EdgeRef, RunFormatError> {
        let automaton = v
            .get("automaton")
            .and_then(Value::as_str)
            .ok_or_else(|| run_err(p, "missing automaton name"))?;
        let edge = v
            .get("edge")
            .and_then(Value::as_u64)
            .ok_or_else(|| run_err(p, "missing edge index"))?;
        Ok(EdgeRef::new(automaton, edge as usize))
    };
    if v.as_str() == Some("null") {
        return Ok(Step::Null);
    }
    let obj = v.as_object().ok_or_else(|| run_err(path, "expected a step object"))?;
    if let Some(t) = obj.get("delay") {
        let t = rational::from_json(t).ok_or_else(|| run_err(path, "delay must be an exact numeral"))?;
        return Ok(Step::Delay(t));
    }
    if let Some(e) = obj.get("switch") {
        return Ok(Step::Switch(edge(e, &format!("{path}.switch"))?));
    }
    if let Some(h) = obj.get("handshake") {
        let p = format!("{path}.handshake");
        let sender = edge(h.get("sender").ok_or_else(|| run_err(&p, "missing sender"))?, &p)?;
        let receiver = edge(h.get("receiver").ok_or_else(|| run_err(&p, "missing receiver"))?, &p)?;
        return Ok(Step::Handshake { sender, receiver });
    }
    Err(run_err(path, "unknown step kind"))
}

/// Reads `{"start"?: {...}, "steps": [...]}`; a missing start falls back to
/// `default_start`. Missing start clocks are zero, missing cost is zero.
pub fn run_from_json(
    net: &Network,
    v: &Value,
    default_start: impl FnOnce() -> Option<Configuration>,
) -> Result<Run, RunFormatError> {
    let steps = v
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| run_err("$.steps", "missing step list"))?
        .iter()
        .enumerate()
        .map(|(i, s)| step_from_json(s, &format!("$.steps[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let start = match v.get("start") {
        None => default_start().ok_or_else(|| run_err("$.start", "no start configuration"))?,
        Some(s) => {
            let locmap = s
                .get("locations")
                .and_then(Value::as_object)
                .ok_or_else(|| run_err("$.start.locations", "expected an object"))?;
            let locs = net
                .automata
                .iter()
                .map(|a| {
                    locmap
                        .get(&a.name)
                        .and_then(Value::as_str)
                        .map(str::to_string)
                        .or_else(|| a.initial.clone())
                        .ok_or_else(|| run_err("$.start.locations", format!("no location for `{}`", a.name)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut clocks = net.zero_valuation();
            if let Some(cm) = s.get("clocks").and_then(Value::as_object) {
                for (k, val) in cm {
                    let p = format!("$.start.clocks.{k}");
                    if clocks.get(k).is_none() {
                        return Err(run_err(&p, "unknown clock"));
                    }
                    let q = rational::from_json(val)
                        .filter(|q| !q.is_negative())
                        .ok_or_else(|| run_err(&p, "expected a non-negative exact numeral"))?;
                    clocks.set(k, q);
                }
            }
            let cost = match s.get("cost") {
                None => Rational::zero(),
                Some(c) => {
                    rational::from_json(c).ok_or_else(|| run_err("$.start.cost", "expected an exact numeral"))?
                }
            };
            Configuration { locs, clocks, cost }
        }
    };
    Ok(Run { start, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::model::{Automaton, CmpOp, Guard, Location, PriceFunction};
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    /// Rate-2 location `l0` with an edge `x >= 3`, price 1, to `goal`.
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
        a.edges.push(
            Edge::new("l0", "l0")
                .with_guard(Guard::atom("x", CmpOp::Eq, 1))
                .reset("x")
                .with_price(3),
        );
        a.initial = Some("l0".into());
        Network::single(a)
    }

    fn start(net: &Network) -> Configuration {
        Configuration::initial(net, vec!["l0".into()]).unwrap()
    }

    #[test]
    fn delay_accrues_rate() {
        let net = rate_two();
        let c = delay_step(&net, &start(&net), &int(3)).unwrap();
        assert_eq!(c.clocks.get("A.x"), Some(&int(3)));
        assert_eq!(c.cost, int(6));
    }

    #[test]
    fn switch_resets_and_pays() {
        let net = rate_two();
        let c = delay_step(&net, &start(&net), &int(1)).unwrap();
        let d = switch_step(&net, &c, &Step::Switch(EdgeRef::new("A", 1))).unwrap();
        assert_eq!(d.clocks.get("A.x"), Some(&int(0)));
        assert_eq!(&d.cost - &c.cost, int(3));
        let bad = switch_step(&net, &start(&net), &Step::Switch(EdgeRef::new("A", 0)));
        assert_eq!(bad, Err(StepError::Guard(EdgeRef::new("A", 0))));
    }

    #[test]
    fn replay_examples() {
        let net = rate_two();
        let empty = Run {
            start: start(&net),
            steps: vec![],
        };
        assert_eq!(replay(&net, &empty).unwrap().1, int(0));
        let run = Run {
            start: start(&net),
            steps: vec![Step::Delay(int(3)), Step::Switch(EdgeRef::new("A", 0))],
        };
        let (fin, cost) = replay(&net, &run).unwrap();
        assert_eq!(cost, int(7));
        assert_eq!(fin.locs, vec!["goal".to_string()]);
        let bad = Run {
            start: start(&net),
            steps: vec![Step::Delay(int(1)), Step::Delay(int(2))],
        };
        let err = replay(&net, &bad).unwrap_err();
        assert_eq!(err, ReplayError::NonCanonical(1));
        assert!(err.to_string().contains("consecutive delay steps"));
        let late = Run {
            start: start(&net),
            steps: vec![Step::Delay(int(1)), Step::Switch(EdgeRef::new("A", 0))],
        };
        assert!(matches!(
            replay(&net, &late),
            Err(ReplayError::Inadmissible { index: 1, .. })
        ));
    }

    #[test]
    fn invariant_endpoints() {
        let mut net = rate_two();
        net.automata[0].locations[0].invariant = Guard::atom("x", CmpOp::Le, 2);
        assert!(delay_step(&net, &start(&net), &int(2)).is_ok());
        assert!(matches!(
            delay_step(&net, &start(&net), &ratio(5, 2)),
            Err(StepError::Invariant { .. })
        ));
        assert!(matches!(
            delay_step(&net, &start(&net), &int(0)),
            Err(StepError::NonPositiveDelay(_))
        ));
    }

    fn handshake_net() -> Network {
        let mut a = Automaton::new("P");
        a.locations.push(Location::new("p0"));
        a.locations.push(Location::new("p1"));
        a.edges
            .push(Edge::new("p0", "p1").with_sync("c", SyncDir::Send).with_price(2));
        let mut b = Automaton::new("Q");
        b.locations.push(Location::new("q0"));
        b.locations.push(Location::new("q1"));
        b.edges
            .push(Edge::new("q0", "q1").with_sync("c", SyncDir::Receive).with_price(5));
        b.edges.push(Edge::new("q0", "q0").with_sync("c", SyncDir::Receive));
        Network {
            automata: vec![a, b],
            channels: ["c".to_string()].into(),
            global_clocks: vec![],
        }
    }

    #[test]
    fn handshake_moves_both_and_pays_both() {
        let net = handshake_net();
        let c = Configuration::initial(&net, vec!["p0".into(), "q0".into()]).unwrap();
        let h = Step::Handshake {
            sender: EdgeRef::new("P", 0),
            receiver: EdgeRef::new("Q", 0),
        };
        let d = switch_step(&net, &c, &h).unwrap();
        assert_eq!(d.locs, vec!["p1".to_string(), "q1".to_string()]);
        assert_eq!(d.cost, int(7));
        assert!(matches!(
            switch_step(&net, &c, &Step::Switch(EdgeRef::new("P", 0))),
            Err(StepError::UnpairedSync(_))
        ));
        let swapped = Step::Handshake {
            sender: EdgeRef::new("Q", 0),
            receiver: EdgeRef::new("P", 0),
        };
        assert!(matches!(switch_step(&net, &c, &swapped), Err(StepError::Channel(_))));
    }

    #[test]
    fn successor_examples() {
        let net = handshake_net();
        let c = Configuration::initial(&net, vec!["p0".into(), "q0".into()]).unwrap();
        let succ = successors(&net, &c, &[int(1)]);
        let handshakes = succ.iter().filter(|(s, _)| matches!(s, Step::Handshake { .. })).count();
        assert_eq!(handshakes, 2);

        let mut a = Automaton::new("A");
        a.clocks.push("x".into());
        a.locations
            .push(Location::new("l").with_invariant(Guard::atom("x", CmpOp::Le, 0)));
        let stuck = Network::single(a);
        let c = Configuration::initial(&stuck, vec!["l".into()]).unwrap();
        let succ = successors(&stuck, &c, &[int(1)]);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, Step::Null);

        let net = rate_two();
        let at_two = delay_step(&net, &start(&net), &int(3)).unwrap();
        assert!(successors(&net, &at_two, &[])
            .iter()
            .any(|(s, _)| s == &Step::Switch(EdgeRef::new("A", 0))));
    }

    #[test]
    fn nonlinear_delays_do_not_merge() {
        let mut a = Automaton::new("A");
        a.locations
            .push(Location::new("l").with_price(PriceFunction::Polynomial(Expr::dwell().pow(2))));
        let net = Network::single(a);
        let c = Configuration::initial(&net, vec!["l".into()]).unwrap();
        let split = Run {
            start: c.clone(),
            steps: vec![Step::Delay(int(1)), Step::Null, Step::Delay(int(1))],
        };
        let merged = Run {
            start: c,
            steps: vec![Step::Delay(int(2))],
        };
        assert_eq!(replay(&net, &split).unwrap().1, int(2));
        assert_eq!(replay(&net, &merged).unwrap().1, int(4));
    }

    #[test]
    fn run_json_round_trip() {
        let net = handshake_net();
        let c = Configuration::initial(&net, vec!["p0".into(), "q0".into()]).unwrap();
        let run = Run {
            start: c,
            steps: vec![
                Step::Delay(ratio(3, 2)),
                Step::Handshake {
                    sender: EdgeRef::new("P", 0),
                    receiver: EdgeRef::new("Q", 1),
                },
                Step::Null,
            ],
        };
        let back = run_from_json(&net, &run_to_json(&net, &run), || None).unwrap();
        assert_eq!(back, run);
    }

    proptest! {
        #[test]
        fn linear_delays_merge_across_null(a in 1i64..20, b in 1i64..20, d in 1i64..5) {
            let net = rate_two();
            let c = start(&net);
            let (t1, t2) = (ratio(a, d), ratio(b, d));
            let split = Run { start: c.clone(), steps: vec![Step::Delay(t1.clone()), Step::Null, Step::Delay(t2.clone())] };
            let merged = Run { start: c, steps: vec![Step::Delay(t1 + t2)] };
            prop_assert_eq!(replay(&net, &split).unwrap().1, replay(&net, &merged).unwrap().1);
        }

        #[test]
        fn cost_is_additive(delays in prop::collection::vec(1i64..8, 1..6), cut in 0usize..12) {
            let net = rate_two();
            let mut steps = Vec::new();
            for d in delays {
                steps.push(Step::Delay(ratio(d, 4)));
                steps.push(Step::Null);
            }
            let cut = cut.min(steps.len());
            let whole = replay(&net, &Run { start: start(&net), steps: steps.clone() }).unwrap();
            let (mid, c1) = replay(&net, &Run { start: start(&net), steps: steps[..cut].to_vec() }).unwrap();
            let (_, c2) = replay(&net, &Run { start: mid, steps: steps[cut..].to_vec() }).unwrap();
            prop_assert_eq!(whole.1, c1 + c2);
        }

        #[test]
        fn endpoint_rule_is_sound(
            ops in prop::collection::vec((0usize..5, 0u64..6), 1..4),
            x in 0i64..24, t in 1i64..24, frac in 0i64..=10,
        ) {
            let g = Guard(ops.into_iter().map(|(o, b)| crate::model::GuardAtom::new("x", CmpOp::ALL[o], b)).collect());
            let nu: ClockValuation = [("x".to_string(), ratio(x, 4))].into_iter().collect();
            let t = ratio(t, 4);
            let mid = &t * ratio(frac, 10);
            let sat = |v: &ClockValuation| crate::model::guard_sat(v, &g).unwrap();
            if sat(&nu) && sat(&nu.delayed(&t)) {
                prop_assert!(sat(&nu.delayed(&mid)));
            }
        }
    }
}
