//! Two-counter machine compiler into a single polynomially priced automaton.
//!
//! Counter `c` lives in clock `x` or `w`, counter `d` in `y` or `v`, as
//! `enc(n) = 1 - 2^-n`. Each increment or decrement takes exactly one time
//! unit (measured by `z`) and moves the counter into its scratch clock, so
//! the compiled automaton has one copy of each instruction per role
//! assignment. Only a correct simulation costs zero.
//!
//! Per operation on a counter with current clock `a`, scratch `s` and
//! other-counter clock `o`:
//! - `l0` charges `(1 - a - 2t)^2` (increment) or `(1 - a - t/2)^2`
//!   (decrement), zero exactly at the dwell that leaves `s = enc(n±1)`.
//! - `o` must be wrapped to 0 when it reaches 1. If that falls inside the
//!   priced dwell, the run goes through `l0a` (free, exits at `o = 1`) and
//!   `l0b`, whose price reads the elapsed `z` so that the split dwell is
//!   charged as one.
//! - `l1` waits until `z = 1`; the exit resets `a` and `z`.

use crate::expr::Expr;
use crate::model::{
    Automaton, CmpOp, Comparator, Edge, Guard, Location, LocationSelection, Network, PriceFunction, Query,
};
use crate::parser::ModelDocument;
use crate::rational::{int, ratio, Rational};
use crate::semantics::{self, Configuration, EdgeRef, Run, Step};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

pub const AUTOMATON: &str = "M";
pub const HALT: &str = "halt";
const TIMER: &str = "z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counter {
    C,
    D,
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Counter::C => "c",
            Counter::D => "d",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    Inc(Counter, usize),
    Dec(Counter, usize),
    IfZero(Counter, usize, usize),
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoCounterProgram(pub Vec<Instruction>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("instruction {0} jumps to missing label {1}")]
    Label(usize, usize),
    #[error("the last instruction must be `halt`")]
    LastNotHalt,
}

impl TwoCounterProgram {
    pub fn check(&self) -> Result<(), ProgramError> {
        if self.0.last() != Some(&Instruction::Halt) {
            return Err(ProgramError::LastNotHalt);
        }
        for (i, ins) in self.0.iter().enumerate() {
            let targets = match *ins {
                Instruction::Inc(_, n) | Instruction::Dec(_, n) => vec![n],
                Instruction::IfZero(_, a, b) => vec![a, b],
                Instruction::Halt => vec![],
            };
            if let Some(&bad) = targets.iter().find(|&&n| n >= self.0.len()) {
                return Err(ProgramError::Label(i, bad));
            }
        }
        Ok(())
    }
}

/// One instruction per line: `inc c 2`, `dec d 4`, `ifz c 3 5`, `halt`.
/// Blank lines and `#` comments are skipped.
pub fn parse_program(text: &str) -> Result<TwoCounterProgram, ProgramError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| ProgramError::Syntax {
            line: i + 1,
            message: message.to_string(),
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        let counter = |w: &str| match w {
            "c" => Ok(Counter::C),
            "d" => Ok(Counter::D),
            _ => Err(err(&format!("unknown counter `{w}`"))),
        };
        let label = |w: &str| w.parse::<usize>().map_err(|_| err(&format!("bad label `{w}`")));
        out.push(match words.as_slice() {
            ["inc", k, n] => Instruction::Inc(counter(k)?, label(n)?),
            ["dec", k, n] => Instruction::Dec(counter(k)?, label(n)?),
            ["ifz", k, a, b] => Instruction::IfZero(counter(k)?, label(a)?, label(b)?),
            ["halt"] => Instruction::Halt,
            _ => return Err(err("expected `inc K L`, `dec K L`, `ifz K L L` or `halt`")),
        });
    }
    let p = TwoCounterProgram(out);
    p.check()?;
    Ok(p)
}

/// Which clock of each pair currently holds the counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Roles {
    pub c_swapped: bool,
    pub d_swapped: bool,
}

impl Roles {
    pub fn clock(self, k: Counter) -> &'static str {
        match (k, self.c_swapped, self.d_swapped) {
            (Counter::C, false, _) => "x",
            (Counter::C, true, _) => "w",
            (Counter::D, _, false) => "y",
            (Counter::D, _, true) => "v",
        }
    }

    pub fn scratch(self, k: Counter) -> &'static str {
        self.flipped(k).clock(k)
    }

    fn flipped(mut self, k: Counter) -> Self {
        match k {
            Counter::C => self.c_swapped = !self.c_swapped,
            Counter::D => self.d_swapped = !self.d_swapped,
        }
        self
    }

    fn tag(self) -> String {
        format!("{}{}", self.c_swapped as u8, self.d_swapped as u8)
    }
}

/// Configuration key of a clock of the compiled automaton.
pub fn clock_key(clock: &str) -> String {
    format!("{AUTOMATON}.{clock}")
}

fn other(k: Counter) -> Counter {
    match k {
        Counter::C => Counter::D,
        Counter::D => Counter::C,
    }
}

/// `1 - 2^-n`.
pub fn enc(n: u32) -> Rational {
    Rational::one() - Rational::new(1.into(), num_bigint::BigInt::from(2).pow(n))
}

fn junction(p: &TwoCounterProgram, label: usize, roles: Roles) -> String {
    match p.0[label] {
        Instruction::Halt => HALT.into(),
        _ => format!("j{label}_{}", roles.tag()),
    }
}

fn module(label: usize, roles: Roles, part: &str) -> String {
    format!("m{label}_{}_{part}", roles.tag())
}

fn v(name: &str) -> Expr {
    Expr::var(name)
}

fn c(n: i64, d: i64) -> Expr {
    Expr::constant(ratio(n, d))
}

/// Price at `l0` (`elapsed = false`) or `l0b` (`elapsed = true`).
fn price(increment: bool, a: &str, elapsed: bool) -> PriceFunction {
    let t = Expr::dwell();
    let base = match (increment, elapsed) {
        (true, false) => Expr::Sub(vec![c(1, 1), v(a), Expr::Mul(vec![c(2, 1), t])]),
        (true, true) => Expr::Sub(vec![c(1, 1), v(a), v(TIMER), Expr::Mul(vec![c(2, 1), t])]),
        (false, false) => Expr::Sub(vec![c(1, 1), v(a), Expr::Div(Box::new(t), Box::new(c(2, 1)))]),
        (false, true) => Expr::Sub(vec![
            Expr::Add(vec![c(1, 1), Expr::Div(Box::new(v(TIMER)), Box::new(c(2, 1)))]),
            v(a),
            Expr::Div(Box::new(t), Box::new(c(2, 1))),
        ]),
    };
    PriceFunction::Polynomial(base.pow(2))
}

/// Compiled program plus what the run builder needs.
#[derive(Debug, Clone)]
pub struct TwoCounterModel {
    pub program: TwoCounterProgram,
    pub network: Network,
    /// Reachable (label, roles) pairs in discovery order.
    pub states: Vec<(usize, Roles)>,
}

pub fn compile(p: &TwoCounterProgram) -> Result<TwoCounterModel, ProgramError> {
    p.check()?;
    let mut a = Automaton::new(AUTOMATON);
    a.clocks = ["x", "w", "y", "v", TIMER].iter().map(|s| s.to_string()).collect();
    let at_zero = Guard::atom(TIMER, CmpOp::Le, 0);
    let mut states = Vec::new();
    let mut seen = BTreeMap::new();
    let mut queue = VecDeque::from([(0usize, Roles::default())]);
    seen.insert((0usize, Roles::default()), ());
    let mut halt_added = false;
    while let Some((label, roles)) = queue.pop_front() {
        states.push((label, roles));
        let here = junction(p, label, roles);
        let mut visit = |label: usize, roles: Roles, queue: &mut VecDeque<(usize, Roles)>| {
            if seen.insert((label, roles), ()).is_none() {
                queue.push_back((label, roles));
            }
        };
        match p.0[label] {
            Instruction::Halt => {
                if !halt_added {
                    a.locations.push(Location::new(HALT));
                    halt_added = true;
                }
            }
            Instruction::IfZero(k, then, otherwise) => {
                a.locations.push(Location::new(&here).with_invariant(at_zero.clone()));
                let clock = roles.clock(k);
                a.edges
                    .push(Edge::new(&here, &junction(p, then, roles)).with_guard(Guard::atom(clock, CmpOp::Eq, 0)));
                a.edges
                    .push(Edge::new(&here, &junction(p, otherwise, roles)).with_guard(Guard::atom(
                        clock,
                        CmpOp::Gt,
                        0,
                    )));
                visit(then, roles, &mut queue);
                visit(otherwise, roles, &mut queue);
            }
            Instruction::Inc(k, next) | Instruction::Dec(k, next) => {
                let increment = matches!(p.0[label], Instruction::Inc(..));
                let (cur, scratch, o) = (roles.clock(k), roles.scratch(k), roles.clock(other(k)));
                let bounded = Guard::atom(o, CmpOp::Le, 1);
                let [l0, l0a, l0b, l1] = ["l0", "l0a", "l0b", "l1"].map(|s| module(label, roles, s));
                a.locations.push(Location::new(&here).with_invariant(at_zero.clone()));
                a.locations.push(
                    Location::new(&l0)
                        .with_invariant(bounded.clone())
                        .with_price(price(increment, cur, false)),
                );
                a.locations.push(Location::new(&l0a).with_invariant(bounded.clone()));
                a.locations.push(
                    Location::new(&l0b)
                        .with_invariant(bounded.clone())
                        .with_price(price(increment, cur, true)),
                );
                a.locations
                    .push(Location::new(&l1).with_invariant(bounded.and(TIMER, CmpOp::Le, 1)));
                a.edges.push(Edge::new(&here, &l0));
                a.edges.push(Edge::new(&here, &l0a));
                let leave_l0 = |e: Edge| {
                    let e = e.reset(scratch);
                    if increment {
                        e
                    } else {
                        e.reset(cur)
                    }
                };
                a.edges.push(leave_l0(Edge::new(&l0, &l1).with_guard(Guard::atom(
                    TIMER,
                    CmpOp::Gt,
                    0,
                ))));
                a.edges
                    .push(Edge::new(&l0a, &l0b).with_guard(Guard::atom(o, CmpOp::Eq, 1)).reset(o));
                a.edges.push(leave_l0(
                    Edge::new(&l0b, &l1).with_guard(Guard::atom(TIMER, CmpOp::Gt, 0).and(o, CmpOp::Gt, 0)),
                ));
                a.edges
                    .push(Edge::new(&l1, &l1).with_guard(Guard::atom(o, CmpOp::Eq, 1)).reset(o));
                if increment {
                    a.edges.push(
                        Edge::new(&l1, &l1)
                            .with_guard(Guard::atom(cur, CmpOp::Eq, 1))
                            .reset(cur),
                    );
                }
                let after = roles.flipped(k);
                a.edges.push(
                    Edge::new(&l1, &junction(p, next, after))
                        .with_guard(Guard::atom(TIMER, CmpOp::Eq, 1))
                        .reset(cur)
                        .reset(TIMER),
                );
                visit(next, after, &mut queue);
            }
        }
    }
    a.initial = Some(junction(p, 0, Roles::default()));
    Ok(TwoCounterModel {
        program: p.clone(),
        network: Network::single(a),
        states,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimulationError {
    #[error("no halt within {0} instructions")]
    NoHalt(usize),
    #[error("operation {index}: dwell {dwell} leaves the module's unit of time")]
    Dwell { index: usize, dwell: Rational },
    #[error("step rejected: {0}")]
    Step(String),
    #[error("missing edge {0}")]
    Edge(String),
}

/// A run of the compiled automaton and the machine state it simulates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedRun {
    pub run: Run,
    pub roles: Roles,
    /// Counter values of the simulated machine, not read from clocks.
    pub counters: (u32, u32),
    /// Number of increment/decrement operations executed.
    pub operations: usize,
}

struct Builder<'a> {
    net: &'a Network,
    conf: Configuration,
    steps: Vec<Step>,
}

impl Builder<'_> {
    fn clock(&self, name: &str) -> Rational {
        self.conf.clocks.get(&clock_key(name)).cloned().expect("declared clock")
    }

    fn push(&mut self, s: Step) -> Result<(), SimulationError> {
        self.conf = semantics::step(self.net, &self.conf, &s).map_err(|e| SimulationError::Step(e.to_string()))?;
        self.steps.push(s);
        Ok(())
    }

    fn delay(&mut self, t: Rational) -> Result<(), SimulationError> {
        if t.is_zero() {
            return Ok(());
        }
        self.push(Step::Delay(t))
    }

    /// Fires the edge from the current location to `to`, choosing by guard clock if needed.
    fn switch(&mut self, to: &str, guard_clock: Option<&str>) -> Result<(), SimulationError> {
        self.switch_where(to, |e| {
            guard_clock.is_none_or(|c| e.guard.atoms().iter().any(|g| g.clock == c))
        })
    }

    fn switch_where(&mut self, to: &str, pick: impl Fn(&Edge) -> bool) -> Result<(), SimulationError> {
        let a = &self.net.automata[0];
        let from = &self.conf.locs[0];
        let found = a.outgoing(from).find(|(_, e)| e.to == to && pick(e));
        let (i, _) = found.ok_or_else(|| SimulationError::Edge(format!("{from} -> {to}")))?;
        self.push(Step::Switch(EdgeRef::new(AUTOMATON, i)))
    }
}

/// Builds the run that simulates `model`'s program from counters zero.
/// With `perturb = Some((i, δ))` the priced dwell of the `i`-th
/// operation is moved by `δ`; all later dwells stay correct for the
/// clock values actually reached.
pub fn simulate(
    model: &TwoCounterModel,
    perturb: Option<(usize, Rational)>,
    max_instructions: usize,
) -> Result<SimulatedRun, SimulationError> {
    let net = &model.network;
    let p = &model.program;
    let start = Configuration::initial(net, vec![junction(p, 0, Roles::default())])
        .map_err(|e| SimulationError::Step(e.to_string()))?;
    let mut b = Builder {
        net,
        conf: start.clone(),
        steps: Vec::new(),
    };
    let (mut label, mut roles, mut counters, mut ops) = (0usize, Roles::default(), (0u32, 0u32), 0usize);
    for _ in 0..max_instructions {
        match p.0[label] {
            Instruction::Halt => {
                return Ok(SimulatedRun {
                    run: Run { start, steps: b.steps },
                    roles,
                    counters,
                    operations: ops,
                })
            }
            Instruction::IfZero(k, then, otherwise) => {
                let zero = b.clock(roles.clock(k)).is_zero();
                let (next, op) = if zero {
                    (then, CmpOp::Eq)
                } else {
                    (otherwise, CmpOp::Gt)
                };
                b.switch_where(&junction(p, next, roles), |e| {
                    e.guard.atoms().iter().any(|g| g.op == op)
                })?;
                label = next;
            }
            Instruction::Inc(k, next) | Instruction::Dec(k, next) => {
                let increment = matches!(p.0[label], Instruction::Inc(..));
                let a = b.clock(roles.clock(k));
                let o_clock = roles.clock(other(k));
                let mut dwell = if increment {
                    (Rational::one() - &a) / int(2)
                } else {
                    (Rational::one() - &a) * int(2)
                };
                if let Some((i, delta)) = &perturb {
                    if *i == ops {
                        dwell += delta;
                    }
                }
                if !dwell.is_positive_and_at_most_one() {
                    return Err(SimulationError::Dwell { index: ops, dwell });
                }
                let wrap_at = Rational::one() - b.clock(o_clock);
                let l1 = module(label, roles, "l1");
                if wrap_at < dwell {
                    b.switch(&module(label, roles, "l0a"), None)?;
                    b.delay(wrap_at.clone())?;
                    b.switch(&module(label, roles, "l0b"), None)?;
                    b.delay(&dwell - &wrap_at)?;
                    b.switch(&l1, None)?;
                    b.delay(Rational::one() - &dwell)?;
                } else {
                    b.switch(&module(label, roles, "l0"), None)?;
                    b.delay(dwell.clone())?;
                    b.switch(&l1, None)?;
                    b.delay(&wrap_at - &dwell)?;
                    b.switch(&l1, Some(o_clock))?;
                    b.delay(Rational::one() - &wrap_at)?;
                }
                let after = roles.flipped(k);
                b.switch(&junction(p, next, after), Some(TIMER))?;
                let n = match k {
                    Counter::C => &mut counters.0,
                    Counter::D => &mut counters.1,
                };
                *n = if increment { *n + 1 } else { n.saturating_sub(1) };
                roles = after;
                label = next;
                ops += 1;
            }
        }
    }
    Err(SimulationError::NoHalt(max_instructions))
}

trait UnitRange {
    fn is_positive_and_at_most_one(&self) -> bool;
}

impl UnitRange for Rational {
    fn is_positive_and_at_most_one(&self) -> bool {
        *self > Rational::zero() && *self <= Rational::one()
    }
}

pub const MAX_INSTRUCTIONS: usize = 10_000;
/// Step bound per executed instruction when the program does not halt quickly.
const STEPS_PER_INSTRUCTION: u32 = 8;

/// Model with a `cost <= 0` query from the initial junction to `halt`.
pub fn gen_two_counter(p: &TwoCounterProgram) -> Result<ModelDocument, ProgramError> {
    let model = compile(p)?;
    let steps = match simulate(&model, None, MAX_INSTRUCTIONS) {
        Ok(sim) => sim.run.steps.len() as u32,
        Err(_) => STEPS_PER_INSTRUCTION * p.0.len() as u32,
    };
    let mut doc = ModelDocument::new(model.network.clone());
    doc.queries.push(Query {
        source: LocationSelection::from([(AUTOMATON.to_string(), junction(p, 0, Roles::default()))]),
        target: LocationSelection::from([(AUTOMATON.to_string(), HALT.to_string())]),
        steps,
        budget: Rational::zero(),
        cmp: Comparator::Le,
    });
    doc.metadata.insert("generator".into(), "two-counter".into());
    doc.metadata.insert("instructions".into(), p.0.len().to_string());
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    fn program(text: &str) -> TwoCounterProgram {
        parse_program(text).unwrap()
    }

    fn cost(model: &TwoCounterModel, run: &Run) -> Rational {
        semantics::replay(&model.network, run).unwrap().1
    }

    #[test]
    fn parses_and_checks_programs() {
        let p = program("inc c 1\n# comment\nifz d 2 2\nhalt\n");
        assert_eq!(p.0[1], Instruction::IfZero(Counter::D, 2, 2));
        assert_eq!(parse_program("inc c 5\nhalt"), Err(ProgramError::Label(0, 5)));
        assert_eq!(parse_program("inc c 0"), Err(ProgramError::LastNotHalt));
        assert!(matches!(
            parse_program("mul c 1\nhalt"),
            Err(ProgramError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn single_increment() {
        let m = compile(&program("inc c 1\nhalt")).unwrap();
        assert!(validate(&m.network).is_empty(), "{:?}", validate(&m.network));
        let sim = simulate(&m, None, 10).unwrap();
        assert_eq!(sim.run.steps[1], Step::Delay(ratio(1, 2)));
        let (end, total) = semantics::replay(&m.network, &sim.run).unwrap();
        assert_eq!(total, int(0));
        assert_eq!(end.locs[0], HALT);
        assert_eq!(end.clocks.get(&clock_key(sim.roles.clock(Counter::C))), Some(&enc(1)));
        // Dwelling 1/4 instead of 1/2: (1 - 0 - 2·1/4)^2.
        let off = simulate(&m, Some((0, ratio(-1, 4))), 10).unwrap();
        assert_eq!(cost(&m, &off.run), ratio(1, 4));
    }

    #[test]
    fn inc_inc_dec_is_free_and_fragile() {
        let m = compile(&program("inc c 1\ninc c 2\ndec c 3\nhalt")).unwrap();
        assert!(validate(&m.network).is_empty());
        let sim = simulate(&m, None, 10).unwrap();
        let (end, total) = semantics::replay(&m.network, &sim.run).unwrap();
        assert_eq!(total, int(0));
        assert_eq!(end.locs[0], HALT);
        assert_eq!(sim.counters, (1, 0));
        assert_eq!(
            end.clocks.get(&clock_key(sim.roles.clock(Counter::C))),
            Some(&ratio(1, 2))
        );
        for i in 0..sim.operations {
            for delta in [ratio(1, 8), ratio(-1, 8)] {
                let off = simulate(&m, Some((i, delta.clone())), 10).unwrap();
                assert!(cost(&m, &off.run) > int(0), "operation {i} shifted by {delta}");
            }
        }
    }

    #[test]
    fn wraps_inside_the_priced_dwell() {
        // d = 2 puts y's wrap at 1/4, before the decrement's dwell 1/2 on c = 2.
        let m = compile(&program(
            "inc d 1\ninc d 2\ninc c 3\ninc c 4\ndec c 5\nifz c 6 7\nhalt\nhalt",
        ))
        .unwrap();
        let sim = simulate(&m, None, 20).unwrap();
        assert!(sim.run.steps.iter().any(|s| matches!(s, Step::Switch(e)
            if m.network.automata[0].edges[e.edge].to.ends_with("l0b"))));
        let (end, total) = semantics::replay(&m.network, &sim.run).unwrap();
        assert_eq!(total, int(0));
        assert_eq!(end.locs[0], HALT);
        assert_eq!(end.clocks.get(&clock_key(sim.roles.clock(Counter::D))), Some(&enc(2)));
        assert_eq!(end.clocks.get(&clock_key(sim.roles.clock(Counter::C))), Some(&enc(1)));
        for i in 0..sim.operations {
            let off = simulate(&m, Some((i, ratio(1, 8))), 20).unwrap();
            assert!(cost(&m, &off.run) > int(0));
        }
    }

    #[test]
    fn zero_test_branches() {
        let m = compile(&program("ifz c 1 2\ninc c 0\nhalt")).unwrap();
        let sim = simulate(&m, None, 10).unwrap();
        assert_eq!(sim.counters, (1, 0));
        assert_eq!(cost(&m, &sim.run), int(0));
        assert_eq!(m.states.len(), 6);
    }
}
