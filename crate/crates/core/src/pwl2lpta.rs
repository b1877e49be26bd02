//! Compile a piecewise-linearly priced automaton into a linearly priced one.
//!
//! Each location is split into one sub-location per breakpoint and one per
//! open interval of its price structure. A fresh dwell clock is reset on
//! every edge; the exit guard of a sub-location pins the dwell to its
//! breakpoint or interval. Interval sub-locations accrue the piece's slope,
//! and the piece's intercept (or the breakpoint value) is paid on the exit
//! edge. A zero dwell leaves from the breakpoint-0 sub-location and pays no
//! offset, matching the source semantics where only positive delays are
//! priced.
//!
//! Cost equality holds for runs made of `[Delay] Switch` blocks followed by
//! trailing `Null` steps; a trailing delay or a delay split by `Null` has no
//! exit edge to carry its offset and is rejected.

use crate::model::{Automaton, CmpOp, Guard, GuardAtom, LinearPiece, Location, Network, PriceFunction, PwlStructure};
use crate::rational::{self, Rational};
use crate::semantics::{self, Configuration, EdgeRef, ReplayError, Run, Step};
use num_traits::{Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

/// Sub-location selector within a structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    /// Dwell exactly `points[i]`.
    Point(usize),
    /// Dwell inside the open interval after `points[j]`.
    Interval(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeImage {
    pub original: usize,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformMap {
    pub automaton: String,
    pub dwell_clock: String,
    /// (original location, part) to sub-location id.
    pub alpha: BTreeMap<(String, Part), String>,
    /// (original location, interval index) to its linear piece.
    pub beta: BTreeMap<(String, usize), LinearPiece>,
    /// Original location to its sub-locations, breakpoints and intervals interleaved.
    pub theta: BTreeMap<String, Vec<String>>,
    /// One entry per edge of the image automaton, in order.
    pub edges: Vec<EdgeImage>,
    structures: BTreeMap<String, PwlStructure>,
    origin: BTreeMap<String, (String, Part)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("the transform applies to single-automaton networks ({0} automata given)")]
    NotSingleAutomaton(usize),
    #[error("location `{0}` has a non piecewise-linear price")]
    NotPiecewise(String),
    #[error("location `{0}` has a non-integral price structure")]
    NotIntegral(String),
    #[error("location `{0}` has a negative slope, intercept or breakpoint value")]
    NegativeOffset(String),
    #[error("location `{0}` has a constant too large for an edge price")]
    Overflow(String),
    #[error("sub-location name `{0}` is ambiguous")]
    NameClash(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("run shape not supported: {0}")]
    RunShape(String),
    #[error("input run inadmissible: {0}")]
    Replay(#[from] ReplayError),
}

fn part_name(loc: &str, s: &PwlStructure, part: Part) -> String {
    let f = rational::format;
    match part {
        Part::Point(i) => format!("{loc}[{}]", f(&s.points[i])),
        Part::Interval(j) => match s.interval_end(j) {
            Some(end) => format!("{loc}({},{})", f(&s.points[j]), f(end)),
            None => format!("{loc}({},inf)", f(&s.points[j])),
        },
    }
}

fn parts(s: &PwlStructure) -> impl Iterator<Item = Part> {
    (0..s.len()).flat_map(|i| [Part::Point(i), Part::Interval(i)])
}

fn to_u64(q: &Rational, loc: &str) -> Result<u64, TransformError> {
    if q.is_negative() {
        return Err(TransformError::NegativeOffset(loc.to_string()));
    }
    q.to_integer()
        .to_u64()
        .ok_or_else(|| TransformError::Overflow(loc.to_string()))
}

fn structure_of(l: &Location) -> Result<PwlStructure, TransformError> {
    let s = match &l.price {
        PriceFunction::ConstantRate(k) => PwlStructure::linear(*k),
        PriceFunction::Piecewise(s) => s.clone(),
        _ => return Err(TransformError::NotPiecewise(l.id.clone())),
    };
    let integral = s
        .points
        .iter()
        .chain(&s.point_values)
        .chain(s.pieces.iter().flat_map(|p| [&p.slope, &p.intercept]))
        .all(|q| q.is_integer());
    if !s.integral || !integral {
        return Err(TransformError::NotIntegral(l.id.clone()));
    }
    Ok(s)
}

fn fresh_clock(net: &Network) -> String {
    let taken: BTreeSet<&str> = net.automata[0]
        .clocks
        .iter()
        .chain(&net.global_clocks)
        .map(String::as_str)
        .collect();
    std::iter::once("x".to_string())
        .chain((1..).map(|i| format!("x_{i}")))
        .find(|c| !taken.contains(c.as_str()))
        .expect("unbounded supply")
}

impl TransformMap {
    pub fn sub_location(&self, loc: &str, part: Part) -> Option<&str> {
        self.alpha.get(&(loc.to_string(), part)).map(String::as_str)
    }

    /// Original location and part of a sub-location.
    pub fn origin(&self, sub: &str) -> Option<&(String, Part)> {
        self.origin.get(sub)
    }

    /// All pairs of sub-locations standing for `(from, to)`.
    pub fn query_map(&self, from: &str, to: &str) -> Result<Vec<(String, String)>, TransformError> {
        let subs = |l: &str| {
            self.theta
                .get(l)
                .ok_or_else(|| TransformError::UnknownLocation(l.to_string()))
        };
        let (a, b) = (subs(from)?, subs(to)?);
        Ok(a.iter()
            .flat_map(|m| b.iter().map(move |n| (m.clone(), n.clone())))
            .collect())
    }

    /// The relation pairing each original location with its sub-locations.
    pub fn upsilon(&self) -> BTreeSet<(String, String)> {
        self.theta
            .iter()
            .flat_map(|(l, subs)| subs.iter().map(move |m| (l.clone(), m.clone())))
            .collect()
    }

    /// Sub-location whose exit guard admits a dwell of `dwell` (`None` for
    /// an immediate switch).
    fn entry_for(&self, loc: &str, dwell: Option<&Rational>) -> Result<&str, TransformError> {
        let s = self
            .structures
            .get(loc)
            .ok_or_else(|| TransformError::UnknownLocation(loc.to_string()))?;
        let part = match dwell {
            None => Part::Point(0),
            Some(t) => match s.locate(t) {
                Ok(i) => Part::Point(i),
                Err(j) => Part::Interval(j),
            },
        };
        Ok(self.sub_location(loc, part).expect("every part is mapped"))
    }

    fn image_edge(&self, original: usize, source: &str, target: &str) -> usize {
        self.edges
            .iter()
            .position(|e| e.original == original && e.source == source && e.target == target)
            .expect("every edge/sub-location combination has an image")
    }

    pub fn to_json(&self) -> Value {
        let alpha: Vec<Value> = self
            .alpha
            .iter()
            .map(|((l, p), m)| {
                let (kind, idx) = match p {
                    Part::Point(i) => ("point", i),
                    Part::Interval(j) => ("interval", j),
                };
                json!({"location": l, "kind": kind, "index": idx, "subLocation": m})
            })
            .collect();
        let beta: Vec<Value> = self
            .beta
            .iter()
            .map(|((l, j), pc)| {
                json!({"location": l, "interval": j,
                       "slope": rational::to_json(&pc.slope), "intercept": rational::to_json(&pc.intercept)})
            })
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| json!({"original": e.original, "from": e.source, "to": e.target}))
            .collect();
        let upsilon: Vec<Value> = self.upsilon().into_iter().map(|(l, m)| json!([l, m])).collect();
        json!({
            "automaton": self.automaton,
            "dwellClock": self.dwell_clock,
            "alpha": alpha,
            "beta": beta,
            "theta": self.theta,
            "upsilon": upsilon,
            "edges": edges,
        })
    }
}

/// Builds the linearly priced image of a single-automaton network.
pub fn transform(net: &Network) -> Result<(Network, TransformMap), TransformError> {
    if net.automata.len() != 1 {
        return Err(TransformError::NotSingleAutomaton(net.automata.len()));
    }
    let a = &net.automata[0];
    let dwell = fresh_clock(net);
    let mut map = TransformMap {
        automaton: a.name.clone(),
        dwell_clock: dwell.clone(),
        alpha: BTreeMap::new(),
        beta: BTreeMap::new(),
        theta: BTreeMap::new(),
        edges: Vec::new(),
        structures: BTreeMap::new(),
        origin: BTreeMap::new(),
    };
    let mut out = Automaton::new(&a.name);
    out.clocks = a.clocks.clone();
    out.clocks.push(dwell.clone());
    // Exit guard atoms and offset paid on exit, per sub-location.
    let mut exits: BTreeMap<String, (Vec<GuardAtom>, u64)> = BTreeMap::new();

    for l in &a.locations {
        let s = structure_of(l)?;
        let mut subs = Vec::new();
        for part in parts(&s) {
            let name = part_name(&l.id, &s, part);
            if map.origin.contains_key(&name) {
                return Err(TransformError::NameClash(name));
            }
            let bound = |q: &Rational| to_u64(q, &l.id);
            let (rate, atoms, offset) = match part {
                Part::Point(i) => {
                    let p = bound(&s.points[i])?;
                    let offset = if i == 0 { 0 } else { bound(&s.point_values[i])? };
                    (0, vec![GuardAtom::new(&dwell, CmpOp::Eq, p)], offset)
                }
                Part::Interval(j) => {
                    let piece = &s.pieces[j];
                    map.beta.insert((l.id.clone(), j), piece.clone());
                    let mut atoms = vec![GuardAtom::new(&dwell, CmpOp::Gt, bound(&s.points[j])?)];
                    if let Some(end) = s.interval_end(j) {
                        atoms.push(GuardAtom::new(&dwell, CmpOp::Lt, bound(end)?));
                    }
                    (bound(&piece.slope)?, atoms, bound(&piece.intercept)?)
                }
            };
            // Validate breakpoint values even where the zero-dwell rule skips them.
            if let Part::Point(i) = part {
                bound(&s.point_values[i])?;
            }
            out.locations.push(Location {
                id: name.clone(),
                invariant: l.invariant.clone(),
                price: PriceFunction::ConstantRate(rate),
            });
            map.alpha.insert((l.id.clone(), part), name.clone());
            map.origin.insert(name.clone(), (l.id.clone(), part));
            exits.insert(name.clone(), (atoms, offset));
            subs.push(name);
        }
        map.theta.insert(l.id.clone(), subs);
        map.structures.insert(l.id.clone(), s);
    }

    for (ei, e) in a.edges.iter().enumerate() {
        for src in &map.theta[&e.from] {
            let (atoms, offset) = &exits[src];
            for dst in &map.theta[&e.to] {
                let mut guard = e.guard.0.clone();
                guard.extend(atoms.iter().cloned());
                let mut resets = e.resets.clone();
                resets.insert(dwell.clone());
                out.edges.push(crate::model::Edge {
                    from: src.clone(),
                    to: dst.clone(),
                    guard: Guard(guard),
                    resets,
                    sync: e.sync.clone(),
                    price: e.price + offset,
                });
                map.edges.push(EdgeImage {
                    original: ei,
                    source: src.clone(),
                    target: dst.clone(),
                });
            }
        }
    }

    let image = Network {
        automata: vec![out],
        channels: net.channels.clone(),
        global_clocks: net.global_clocks.clone(),
    };
    Ok((image, map))
}

/// `(dwell, edge)` blocks and the count of trailing `Null` steps.
type Blocks<'a> = (Vec<(Option<&'a Rational>, &'a EdgeRef)>, usize);

fn blocks(steps: &[Step]) -> Result<Blocks<'_>, TransformError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < steps.len() {
        match &steps[i] {
            Step::Null => break,
            Step::Delay(t) => match steps.get(i + 1) {
                Some(Step::Switch(r)) => {
                    out.push((Some(t), r));
                    i += 2;
                }
                _ => {
                    return Err(TransformError::RunShape(format!(
                        "delay at step {i} is not followed by a switch"
                    )))
                }
            },
            Step::Switch(r) => {
                out.push((None, r));
                i += 1;
            }
            Step::Handshake { .. } => {
                return Err(TransformError::RunShape("handshakes need a second automaton".into()))
            }
        }
    }
    let nulls = steps.len() - i;
    if steps[i..].iter().any(|s| *s != Step::Null) {
        return Err(TransformError::RunShape("null steps must be trailing".into()));
    }
    Ok((out, nulls))
}

/// Translates a run of the original automaton into a cost-equal run of the image.
pub fn lift_run(orig: &Network, image: &Network, run: &Run, map: &TransformMap) -> Result<Run, TransformError> {
    semantics::replay(orig, run)?;
    let (blocks, nulls) = blocks(&run.steps)?;
    let a = &orig.automata[0];
    let mut loc = run.start.locs[0].clone();
    let mut sub = map.entry_for(&loc, blocks.first().and_then(|b| b.0))?.to_string();
    let mut steps = Vec::new();
    for (k, (dwell, r)) in blocks.iter().enumerate() {
        let target = &a.edges[r.edge].to;
        let next_dwell = blocks.get(k + 1).and_then(|b| b.0);
        let next_sub = map.entry_for(target, next_dwell)?.to_string();
        if let Some(t) = dwell {
            steps.push(Step::Delay((*t).clone()));
        }
        let idx = map.image_edge(r.edge, &sub, &next_sub);
        steps.push(Step::Switch(EdgeRef::new(&map.automaton, idx)));
        loc = target.clone();
        sub = next_sub;
    }
    debug_assert!(map.theta[&loc].contains(&sub));
    steps.extend(std::iter::repeat_n(Step::Null, nulls));
    let mut clocks = image.zero_valuation();
    for (k, v) in run.start.clocks.iter() {
        clocks.set(k, v.clone());
    }
    Ok(Run {
        start: Configuration {
            locs: vec![map
                .entry_for(&run.start.locs[0], blocks.first().and_then(|b| b.0))?
                .to_string()],
            clocks,
            cost: run.start.cost.clone(),
        },
        steps,
    })
}

/// Translates a run of the image back to the original automaton.
pub fn project_run(orig: &Network, image: &Network, run: &Run, map: &TransformMap) -> Result<Run, TransformError> {
    semantics::replay(image, run)?;
    let (blocks, nulls) = blocks(&run.steps)?;
    let dwell_key = format!("{}.{}", map.automaton, map.dwell_clock);
    if run.start.clocks.get(&dwell_key).is_some_and(|v| !v.is_zero()) {
        return Err(TransformError::RunShape("dwell clock must start at 0".into()));
    }
    let mut steps = Vec::new();
    for (dwell, r) in blocks {
        if let Some(t) = dwell {
            steps.push(Step::Delay(t.clone()));
        }
        let original = map.edges[r.edge].original;
        steps.push(Step::Switch(EdgeRef::new(&map.automaton, original)));
    }
    steps.extend(std::iter::repeat_n(Step::Null, nulls));
    let (loc, _) = map
        .origin(&run.start.locs[0])
        .ok_or_else(|| TransformError::UnknownLocation(run.start.locs[0].clone()))?;
    let mut clocks = orig.zero_valuation();
    for (k, v) in run.start.clocks.iter() {
        if *k != dwell_key {
            clocks.set(k, v.clone());
        }
    }
    Ok(Run {
        start: Configuration {
            locs: vec![loc.clone()],
            clocks,
            cost: run.start.cost.clone(),
        },
        steps,
    })
}
