//! Static model: clocks, guards, prices, automata, networks and queries.
//!
//! Clock names inside guards, resets and price expressions are local to the
//! owning automaton. A valuation keys local clocks as `automaton.clock` and
//! global clocks verbatim; [`Network::clock_key`] performs that resolution.

use crate::expr::{self, Expr};
use crate::rational::{self, int, Rational};
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown clock `{0}`")]
    UnknownClock(String),
    #[error("price is negative ({0})")]
    NegativePrice(String),
    #[error("`{var}` = {value} lies outside the declared range [0, {bound}]")]
    OutOfRange { var: String, value: String, bound: String },
    #[error("negative dwell {0}")]
    NegativeDwell(String),
    #[error("price expression: {0}")]
    Eval(#[from] expr::EvalError),
}

/// Clock values keyed by qualified clock name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClockValuation(BTreeMap<String, Rational>);

impl ClockValuation {
    pub fn zero<I, S>(clocks: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ClockValuation(clocks.into_iter().map(|c| (c.into(), Rational::zero())).collect())
    }

    pub fn get(&self, clock: &str) -> Option<&Rational> {
        self.0.get(clock)
    }

    /// Panics on negative values; a valuation never holds one.
    pub fn set(&mut self, clock: &str, value: Rational) {
        assert!(!value.is_negative(), "clock values are non-negative");
        self.0.insert(clock.to_string(), value);
    }

    pub fn delayed(&self, t: &Rational) -> Self {
        ClockValuation(self.0.iter().map(|(k, v)| (k.clone(), v + t)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, Rational)> for ClockValuation {
    fn from_iter<T: IntoIterator<Item = (String, Rational)>>(iter: T) -> Self {
        ClockValuation(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub const ALL: [CmpOp; 5] = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" | "≤" => CmpOp::Le,
            "=" | "==" => CmpOp::Eq,
            ">=" | "≥" => CmpOp::Ge,
            ">" => CmpOp::Gt,
            _ => return None,
        })
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    /// Closed comparisons admit exact corner-point optima.
    pub fn is_closed(self) -> bool {
        matches!(self, CmpOp::Le | CmpOp::Eq | CmpOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuardAtom {
    pub clock: String,
    pub op: CmpOp,
    pub bound: u64,
}

impl GuardAtom {
    pub fn new(clock: &str, op: CmpOp, bound: u64) -> Self {
        GuardAtom {
            clock: clock.to_string(),
            op,
            bound,
        }
    }
}

impl fmt::Display for GuardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.clock, self.op.symbol(), self.bound)
    }
}

/// Conjunction of atoms; empty means `true`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct Guard(pub Vec<GuardAtom>);

impl Guard {
    pub fn truth() -> Self {
        Guard(Vec::new())
    }

    pub fn atom(clock: &str, op: CmpOp, bound: u64) -> Self {
        Guard(vec![GuardAtom::new(clock, op, bound)])
    }

    pub fn and(mut self, clock: &str, op: CmpOp, bound: u64) -> Self {
        self.0.push(GuardAtom::new(clock, op, bound));
        self
    }

    pub fn atoms(&self) -> &[GuardAtom] {
        &self.0
    }

    pub fn is_true(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" && "))
    }
}

/// Evaluates a guard whose clock names are valuation keys.
pub fn guard_sat(nu: &ClockValuation, g: &Guard) -> Result<bool, ModelError> {
    guard_sat_with(nu, g, &|c| Some(c.to_string()))
}

fn guard_sat_with(nu: &ClockValuation, g: &Guard, key: &dyn Fn(&str) -> Option<String>) -> Result<bool, ModelError> {
    let mut all = true;
    for atom in &g.0 {
        let value = key(&atom.clock)
            .and_then(|k| nu.get(&k))
            .ok_or_else(|| ModelError::UnknownClock(atom.clock.clone()))?;
        all &= atom.op.holds(value, &int(atom.bound as i64));
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearPiece {
    pub slope: Rational,
    pub intercept: Rational,
}

impl LinearPiece {
    pub fn new(slope: Rational, intercept: Rational) -> Self {
        LinearPiece { slope, intercept }
    }

    pub fn at(&self, t: &Rational) -> Rational {
        &self.slope * t + &self.intercept
    }
}

/// Piecewise-linear dwell price: value `point_values[i]` exactly at
/// `points[i]`, `pieces[j]` on the open interval after `points[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PwlStructure {
    pub points: Vec<Rational>,
    pub point_values: Vec<Rational>,
    pub pieces: Vec<LinearPiece>,
    pub integral: bool,
}

impl PwlStructure {
    /// Single linear piece `k·t`, the rate-`k` price as a structure.
    pub fn linear(k: u64) -> Self {
        PwlStructure {
            points: vec![Rational::zero()],
            point_values: vec![Rational::zero()],
            pieces: vec![LinearPiece::new(int(k as i64), Rational::zero())],
            integral: true,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Upper end of interval `j`; `None` for the unbounded last interval.
    pub fn interval_end(&self, j: usize) -> Option<&Rational> {
        self.points.get(j + 1)
    }

    /// Index of the breakpoint equal to `t`, or `Err(j)` with the interval
    /// containing `t`. Requires `t >= 0`.
    pub fn locate(&self, t: &Rational) -> Result<usize, usize> {
        match self.points.binary_search(t) {
            Ok(i) => Ok(i),
            Err(pos) => Err(pos - 1),
        }
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        match self.locate(t) {
            Ok(i) => self.point_values[i].clone(),
            Err(j) => self.pieces[j].at(t),
        }
    }

    fn check(&self, path: &str, out: &mut Vec<Diagnostic>) {
        let n = self.points.len();
        if n == 0 {
            out.push(Diagnostic::new(path, "structure needs at least one breakpoint"));
            return;
        }
        if self.point_values.len() != n || self.pieces.len() != n {
            out.push(Diagnostic::new(
                path,
                "points, values and pieces must have equal length",
            ));
            return;
        }
        if !self.points[0].is_zero() {
            out.push(Diagnostic::new(
                format!("{path}.points[0]"),
                "first breakpoint must be 0",
            ));
        }
        if self.points.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Diagnostic::new(
                format!("{path}.points"),
                "breakpoints not strictly increasing",
            ));
            return;
        }
        for (i, y) in self.point_values.iter().enumerate() {
            if y.is_negative() {
                out.push(Diagnostic::new(
                    format!("{path}.values[{i}]"),
                    "negative breakpoint value",
                ));
            }
        }
        for (j, piece) in self.pieces.iter().enumerate() {
            let lo_ok = !piece.at(&self.points[j]).is_negative();
            let hi_ok = match self.interval_end(j) {
                Some(end) => !piece.at(end).is_negative(),
                None => !piece.slope.is_negative(),
            };
            if !(lo_ok && hi_ok) {
                out.push(Diagnostic::new(
                    format!("{path}.pieces[{j}]"),
                    "piece is negative on its interval",
                ));
            }
        }
        if self.integral {
            let all_int = self
                .points
                .iter()
                .chain(&self.point_values)
                .chain(self.pieces.iter().flat_map(|p| [&p.slope, &p.intercept]))
                .all(|q| q.is_integer());
            if !all_int {
                out.push(Diagnostic::new(
                    path,
                    "structure is flagged integral but has a non-integer constant",
                ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriceFunction {
    ConstantRate(u64),
    Piecewise(PwlStructure),
    Polynomial(Expr),
    Lipschitz {
        expr: Expr,
        lipschitz: Rational,
        clock_bound: Rational,
    },
}

impl PriceFunction {
    pub fn zero() -> Self {
        PriceFunction::ConstantRate(0)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PriceFunction::ConstantRate(_) | PriceFunction::Piecewise(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PriceFunction::ConstantRate(_) => "rate",
            PriceFunction::Piecewise(_) => "piecewise",
            PriceFunction::Polynomial(_) => "polynomial",
            PriceFunction::Lipschitz { .. } => "lipschitz",
        }
    }
}

/// Price of dwelling `t` with clocks read through `clock` (local names).
pub fn price_eval(
    p: &PriceFunction,
    clock: &dyn Fn(&str) -> Option<Rational>,
    t: &Rational,
) -> Result<Rational, ModelError> {
    if t.is_negative() {
        return Err(ModelError::NegativeDwell(rational::format(t)));
    }
    let value = match p {
        PriceFunction::ConstantRate(k) => int(*k as i64) * t,
        PriceFunction::Piecewise(s) => s.eval(t),
        PriceFunction::Polynomial(e) => e.eval(&|v| env_lookup(v, clock, t))?,
        PriceFunction::Lipschitz { expr, clock_bound, .. } => {
            for v in expr.variables() {
                let value = env_lookup(&v, clock, t).ok_or_else(|| ModelError::UnknownClock(v.clone()))?;
                if &value > clock_bound {
                    return Err(ModelError::OutOfRange {
                        var: v,
                        value: rational::format(&value),
                        bound: rational::format(clock_bound),
                    });
                }
            }
            expr.eval(&|v| env_lookup(v, clock, t))?
        }
    };
    if value.is_negative() {
        return Err(ModelError::NegativePrice(rational::format(&value)));
    }
    Ok(value)
}

fn env_lookup(v: &str, clock: &dyn Fn(&str) -> Option<Rational>, t: &Rational) -> Option<Rational> {
    if v == expr::DWELL {
        Some(t.clone())
    } else {
        clock(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub id: String,
    pub invariant: Guard,
    pub price: PriceFunction,
}

impl Location {
    pub fn new(id: &str) -> Self {
        Location {
            id: id.to_string(),
            invariant: Guard::truth(),
            price: PriceFunction::zero(),
        }
    }

    pub fn with_invariant(mut self, g: Guard) -> Self {
        self.invariant = g;
        self
    }

    pub fn with_price(mut self, p: PriceFunction) -> Self {
        self.price = p;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SyncDir {
    Send,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sync {
    pub channel: String,
    pub dir: SyncDir,
}

impl Sync {
    /// `"c!"` or `"c?"`.
    pub fn parse(s: &str) -> Option<Self> {
        let (channel, dir) = if let Some(c) = s.strip_suffix('!') {
            (c, SyncDir::Send)
        } else {
            (s.strip_suffix('?')?, SyncDir::Receive)
        };
        expr::is_identifier(channel).then(|| Sync {
            channel: channel.to_string(),
            dir,
        })
    }
}

impl fmt::Display for Sync {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.dir {
            SyncDir::Send => '!',
            SyncDir::Receive => '?',
        };
        write!(f, "{}{}", self.channel, mark)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub guard: Guard,
    pub resets: BTreeSet<String>,
    pub sync: Option<Sync>,
    pub price: u64,
}

impl Edge {
    pub fn new(from: &str, to: &str) -> Self {
        Edge {
            from: from.to_string(),
            to: to.to_string(),
            guard: Guard::truth(),
            resets: BTreeSet::new(),
            sync: None,
            price: 0,
        }
    }

    pub fn with_guard(mut self, g: Guard) -> Self {
        self.guard = g;
        self
    }

    pub fn reset(mut self, clock: &str) -> Self {
        self.resets.insert(clock.to_string());
        self
    }

    pub fn with_sync(mut self, channel: &str, dir: SyncDir) -> Self {
        self.sync = Some(Sync {
            channel: channel.to_string(),
            dir,
        });
        self
    }

    pub fn with_price(mut self, price: u64) -> Self {
        self.price = price;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    pub name: String,
    pub clocks: Vec<String>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub initial: Option<String>,
}

impl Automaton {
    pub fn new(name: &str) -> Self {
        Automaton {
            name: name.to_string(),
            clocks: Vec::new(),
            locations: Vec::new(),
            edges: Vec::new(),
            initial: None,
        }
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    pub fn outgoing<'a>(&'a self, from: &'a str) -> impl Iterator<Item = (usize, &'a Edge)> + 'a {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == from)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Network {
    pub automata: Vec<Automaton>,
    pub channels: BTreeSet<String>,
    pub global_clocks: Vec<String>,
}

impl Network {
    pub fn single(a: Automaton) -> Self {
        Network {
            automata: vec![a],
            channels: BTreeSet::new(),
            global_clocks: Vec::new(),
        }
    }

    pub fn automaton_index(&self, name: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.name == name)
    }

    pub fn automaton(&self, name: &str) -> Option<&Automaton> {
        self.automata.iter().find(|a| a.name == name)
    }

    /// Valuation key of `clock` as seen from automaton `aut`.
    pub fn clock_key(&self, aut: usize, clock: &str) -> Option<String> {
        let a = self.automata.get(aut)?;
        if a.clocks.iter().any(|c| c == clock) {
            Some(format!("{}.{}", a.name, clock))
        } else if self.global_clocks.iter().any(|c| c == clock) {
            Some(clock.to_string())
        } else {
            None
        }
    }

    /// All valuation keys: global clocks, then each automaton's locals.
    pub fn clock_keys(&self) -> Vec<String> {
        let mut keys = self.global_clocks.clone();
        for a in &self.automata {
            keys.extend(a.clocks.iter().map(|c| format!("{}.{}", a.name, c)));
        }
        keys
    }

    pub fn zero_valuation(&self) -> ClockValuation {
        ClockValuation::zero(self.clock_keys())
    }

    pub fn guard_sat(&self, aut: usize, nu: &ClockValuation, g: &Guard) -> Result<bool, ModelError> {
        guard_sat_with(nu, g, &|c| self.clock_key(aut, c))
    }

    pub fn price_eval(
        &self,
        aut: usize,
        p: &PriceFunction,
        nu: &ClockValuation,
        t: &Rational,
    ) -> Result<Rational, ModelError> {
        price_eval(p, &|c| self.clock_key(aut, c).and_then(|k| nu.get(&k).cloned()), t)
    }

    pub fn max_constant(&self) -> u64 {
        let guards = self.automata.iter().flat_map(|a| {
            a.locations
                .iter()
                .map(|l| &l.invariant)
                .chain(a.edges.iter().map(|e| &e.guard))
        });
        guards.flat_map(|g| g.0.iter().map(|at| at.bound)).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.automata
            .iter()
            .all(|a| a.locations.iter().all(|l| l.price.is_linear()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            "=" | "==" => Comparator::Eq,
            "!=" | "≠" => Comparator::Ne,
            _ => return None,
        })
    }

    pub fn holds(self, cost: &Rational, budget: &Rational) -> bool {
        match self {
            Comparator::Lt => cost < budget,
            Comparator::Le => cost <= budget,
            Comparator::Gt => cost > budget,
            Comparator::Ge => cost >= budget,
            Comparator::Eq => cost == budget,
            Comparator::Ne => cost != budget,
        }
    }
}

/// Location per automaton name.
pub type LocationSelection = BTreeMap<String, String>;

/// Reach `target` from `source` within `steps` canonical steps at a cost
/// satisfying `cost cmp budget`. Automata absent from `source` start in
/// their declared initial location; automata absent from `target` are
/// unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub source: LocationSelection,
    pub target: LocationSelection,
    pub steps: u32,
    pub budget: Rational,
    pub cmp: Comparator,
}

impl Query {
    /// Full source selection, filling gaps from declared initial locations.
    pub fn source_locations(&self, net: &Network) -> Option<Vec<String>> {
        net.automata
            .iter()
            .map(|a| self.source.get(&a.name).or(a.initial.as_ref()).cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Samples taken per expression price when checking non-negativity.
pub const NONNEG_SAMPLES: usize = 1000;

/// Structural validation; an empty result means the network is well formed.
pub fn validate(n: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if n.automata.is_empty() {
        out.push(Diagnostic::new("automata", "network has no automata"));
    }
    let mut globals = BTreeSet::new();
    for (i, c) in n.global_clocks.iter().enumerate() {
        check_clock_name(c, &format!("globalClocks[{i}]"), &mut out);
        if !globals.insert(c.as_str()) {
            out.push(Diagnostic::new(
                format!("globalClocks[{i}]"),
                format!("duplicate clock `{c}`"),
            ));
        }
    }
    for c in &n.channels {
        if !expr::is_identifier(c) {
            out.push(Diagnostic::new("channels", format!("invalid channel name `{c}`")));
        }
    }
    let mut names = BTreeSet::new();
    let max_const = n.max_constant();
    for (ai, a) in n.automata.iter().enumerate() {
        let ap = format!("automata[{ai}]");
        if !expr::is_identifier(&a.name) || a.name.contains('.') {
            out.push(Diagnostic::new(
                format!("{ap}.name"),
                format!("invalid automaton name `{}`", a.name),
            ));
        }
        if !names.insert(a.name.as_str()) {
            out.push(Diagnostic::new(
                format!("{ap}.name"),
                format!("duplicate automaton `{}`", a.name),
            ));
        }
        let mut locals = BTreeSet::new();
        for (ci, c) in a.clocks.iter().enumerate() {
            let cp = format!("{ap}.clocks[{ci}]");
            check_clock_name(c, &cp, &mut out);
            if !locals.insert(c.as_str()) {
                out.push(Diagnostic::new(&cp, format!("duplicate clock `{c}`")));
            }
            if globals.contains(c.as_str()) {
                out.push(Diagnostic::new(&cp, format!("clock `{c}` shadows a global clock")));
            }
            if globals.contains(format!("{}.{}", a.name, c).as_str()) {
                out.push(Diagnostic::new(
                    &cp,
                    "qualified clock name collides with a global clock",
                ));
            }
        }
        let known_clock = |c: &str| n.clock_key(ai, c).is_some();
        let mut ids = BTreeSet::new();
        for (li, l) in a.locations.iter().enumerate() {
            let lp = format!("{ap}.locations[{li}]");
            if l.id.is_empty() {
                out.push(Diagnostic::new(format!("{lp}.id"), "empty location id"));
            }
            if !ids.insert(l.id.as_str()) {
                out.push(Diagnostic::new(
                    format!("{lp}.id"),
                    format!("duplicate location `{}`", l.id),
                ));
            }
            check_guard(&l.invariant, &format!("{lp}.invariant"), &known_clock, &mut out);
            check_price(&l.price, &format!("{lp}.price"), &known_clock, max_const, &mut out);
        }
        if let Some(init) = &a.initial {
            if !ids.contains(init.as_str()) {
                out.push(Diagnostic::new(
                    format!("{ap}.initial"),
                    format!("unknown location `{init}`"),
                ));
            }
        }
        for (ei, e) in a.edges.iter().enumerate() {
            let ep = format!("{ap}.edges[{ei}]");
            for (field, id) in [("from", &e.from), ("to", &e.to)] {
                if !ids.contains(id.as_str()) {
                    out.push(Diagnostic::new(
                        format!("{ep}.{field}"),
                        format!("unknown location `{id}`"),
                    ));
                }
            }
            check_guard(&e.guard, &format!("{ep}.guard"), &known_clock, &mut out);
            for r in &e.resets {
                if !known_clock(r) {
                    out.push(Diagnostic::new(format!("{ep}.resets"), format!("unknown clock `{r}`")));
                }
            }
            if let Some(s) = &e.sync {
                if !n.channels.contains(&s.channel) {
                    out.push(Diagnostic::new(
                        format!("{ep}.sync"),
                        format!("unknown channel `{}`", s.channel),
                    ));
                }
            }
        }
    }
    out
}

pub fn validate_query(n: &Network, q: &Query, path: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (field, sel) in [("from", &q.source), ("to", &q.target)] {
        for (aut, loc) in sel {
            match n.automaton(aut) {
                None => out.push(Diagnostic::new(
                    format!("{path}.{field}"),
                    format!("unknown automaton `{aut}`"),
                )),
                Some(a) if a.location(loc).is_none() => out.push(Diagnostic::new(
                    format!("{path}.{field}.{aut}"),
                    format!("unknown location `{loc}`"),
                )),
                Some(_) => {}
            }
        }
    }
    for a in &n.automata {
        if !q.source.contains_key(&a.name) && a.initial.is_none() {
            out.push(Diagnostic::new(
                format!("{path}.from"),
                format!("no source location for `{}` and no declared initial location", a.name),
            ));
        }
    }
    if q.target.is_empty() {
        out.push(Diagnostic::new(format!("{path}.to"), "empty target selection"));
    }
    out
}

fn check_clock_name(c: &str, path: &str, out: &mut Vec<Diagnostic>) {
    if !expr::is_identifier(c) {
        out.push(Diagnostic::new(path, format!("invalid clock name `{c}`")));
    } else if c == expr::DWELL {
        out.push(Diagnostic::new(
            path,
            "clock name `t` is reserved for the dwell variable",
        ));
    }
}

fn check_guard(g: &Guard, path: &str, known: &dyn Fn(&str) -> bool, out: &mut Vec<Diagnostic>) {
    for (i, atom) in g.0.iter().enumerate() {
        if !known(&atom.clock) {
            out.push(Diagnostic::new(
                format!("{path}[{i}]"),
                format!("unknown clock `{}`", atom.clock),
            ));
        }
    }
}

fn check_price(p: &PriceFunction, path: &str, known: &dyn Fn(&str) -> bool, max_const: u64, out: &mut Vec<Diagnostic>) {
    let (e, bound) = match p {
        PriceFunction::ConstantRate(_) => return,
        PriceFunction::Piecewise(s) => return s.check(path, out),
        PriceFunction::Polynomial(e) => (e, int(max_const as i64 + 1)),
        PriceFunction::Lipschitz {
            expr,
            lipschitz,
            clock_bound,
        } => {
            if !lipschitz.is_positive() {
                out.push(Diagnostic::new(
                    format!("{path}.K"),
                    "Lipschitz constant must be positive",
                ));
            }
            if !clock_bound.is_positive() {
                out.push(Diagnostic::new(format!("{path}.T"), "clock bound must be positive"));
                return;
            }
            (expr, clock_bound.clone())
        }
    };
    let vars: Vec<String> = e.variables().into_iter().collect();
    let unknown: Vec<&String> = vars.iter().filter(|v| *v != expr::DWELL && !known(v)).collect();
    if !unknown.is_empty() {
        for v in unknown {
            out.push(Diagnostic::new(
                format!("{path}.expr"),
                format!("unknown variable `{v}`"),
            ));
        }
        return;
    }
    if let Some(msg) = non_constant_divisor(e) {
        out.push(Diagnostic::new(format!("{path}.expr"), msg));
        return;
    }
    if let Some(at) = negative_sample(e, &vars, &bound) {
        out.push(Diagnostic::new(
            format!("{path}.expr"),
            format!("price is negative at {at}"),
        ));
    }
}

fn non_constant_divisor(e: &Expr) -> Option<String> {
    match e {
        Expr::Const(_) | Expr::Var(_) => None,
        Expr::Add(xs) | Expr::Sub(xs) | Expr::Mul(xs) => xs.iter().find_map(non_constant_divisor),
        Expr::Div(a, b) => {
            if !b.variables().is_empty() {
                return Some("divisors must be constant".into());
            }
            match b.eval(&|_| None) {
                Ok(d) if !d.is_zero() => non_constant_divisor(a),
                _ => Some("division by zero".into()),
            }
        }
        Expr::Pow(b, _) => non_constant_divisor(b),
    }
}

/// Uniform grid over `[0, bound]^vars` with at most [`NONNEG_SAMPLES`] points.
fn negative_sample(e: &Expr, vars: &[String], bound: &Rational) -> Option<String> {
    let dims = vars.len() as u32;
    if dims == 0 {
        return match e.eval(&|_| None) {
            Ok(v) if v.is_negative() => Some("every point".into()),
            _ => None,
        };
    }
    let mut per_dim = 2usize;
    while (per_dim + 1).pow(dims) <= NONNEG_SAMPLES {
        per_dim += 1;
    }
    let step = bound / int(per_dim as i64 - 1);
    let mut idx = vec![0usize; vars.len()];
    loop {
        let point: BTreeMap<&str, Rational> = vars
            .iter()
            .zip(&idx)
            .map(|(v, i)| (v.as_str(), &step * int(*i as i64)))
            .collect();
        if let Ok(v) = e.eval(&|name| point.get(name).cloned()) {
            if v.is_negative() {
                let at: Vec<String> = point
                    .iter()
                    .map(|(k, q)| format!("{k}={}", rational::format(q)))
                    .collect();
                return Some(at.join(", "));
            }
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                return None;
            }
            idx[d] += 1;
            if idx[d] < per_dim {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn nu(pairs: &[(&str, Rational)]) -> ClockValuation {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn example_structure() -> PwlStructure {
        PwlStructure {
            points: vec![int(0), int(2)],
            point_values: vec![int(0), int(5)],
            pieces: vec![LinearPiece::new(int(2), int(0)), LinearPiece::new(int(1), int(3))],
            integral: true,
        }
    }

    #[test]
    fn guard_examples() {
        assert!(guard_sat(&nu(&[("x", int(0))]), &Guard::truth()).unwrap());
        assert!(!guard_sat(&nu(&[("x", ratio(3, 2))]), &Guard::atom("x", CmpOp::Le, 1)).unwrap());
        let g = Guard::atom("x", CmpOp::Ge, 2).and("y", CmpOp::Lt, 1);
        assert!(!guard_sat(&nu(&[("x", int(2)), ("y", int(1))]), &g).unwrap());
        assert_eq!(
            guard_sat(&nu(&[]), &Guard::atom("q", CmpOp::Eq, 0)),
            Err(ModelError::UnknownClock("q".into()))
        );
    }

    #[test]
    fn price_examples() {
        let none = |_: &str| None;
        assert_eq!(
            price_eval(&PriceFunction::ConstantRate(2), &none, &int(3)).unwrap(),
            int(6)
        );
        let pw = PriceFunction::Piecewise(example_structure());
        assert_eq!(price_eval(&pw, &none, &int(1)).unwrap(), int(2));
        assert_eq!(price_eval(&pw, &none, &int(2)).unwrap(), int(5));
        assert_eq!(price_eval(&pw, &none, &int(3)).unwrap(), int(6));
        let poly = Expr::Sub(vec![
            Expr::Const(int(1)),
            Expr::var("x"),
            Expr::Div(Box::new(Expr::dwell()), Box::new(Expr::Const(int(2)))),
        ])
        .pow(2);
        let x_half = |c: &str| (c == "x").then(|| ratio(1, 2));
        assert_eq!(
            price_eval(&PriceFunction::Polynomial(poly), &x_half, &int(1)).unwrap(),
            int(0)
        );
    }

    #[test]
    fn price_errors() {
        let none = |_: &str| None;
        let neg = PriceFunction::Polynomial(Expr::Sub(vec![Expr::dwell()]));
        assert!(matches!(
            price_eval(&neg, &none, &int(1)),
            Err(ModelError::NegativePrice(_))
        ));
        let lip = PriceFunction::Lipschitz {
            expr: Expr::dwell(),
            lipschitz: int(1),
            clock_bound: int(2),
        };
        assert!(matches!(
            price_eval(&lip, &none, &int(3)),
            Err(ModelError::OutOfRange { .. })
        ));
        assert_eq!(price_eval(&lip, &none, &int(2)).unwrap(), int(2));
    }

    fn one_location(price: PriceFunction) -> Network {
        let mut a = Automaton::new("A");
        a.clocks.push("x".into());
        a.locations.push(Location::new("l0").with_price(price));
        a.initial = Some("l0".into());
        Network::single(a)
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&one_location(PriceFunction::ConstantRate(1))).is_empty());

        let mut bad = example_structure();
        bad.points = vec![int(0), int(2), int(2)];
        bad.point_values.push(int(0));
        bad.pieces.push(LinearPiece::new(int(0), int(0)));
        let d = validate(&one_location(PriceFunction::Piecewise(bad)));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "breakpoints not strictly increasing");
        assert_eq!(d[0].path, "automata[0].locations[0].price.points");

        let mut n = one_location(PriceFunction::ConstantRate(1));
        n.automata[0]
            .edges
            .push(Edge::new("l0", "l0").with_sync("go", SyncDir::Send));
        let d = validate(&n);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.starts_with("unknown channel"));
    }

    #[test]
    fn validate_flags_negative_expression_and_pieces() {
        let e = Expr::Sub(vec![Expr::var("x"), Expr::Const(int(1))]);
        let d = validate(&one_location(PriceFunction::Polynomial(e)));
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.starts_with("price is negative"));

        let mut s = example_structure();
        s.pieces[1] = LinearPiece::new(int(-1), int(10));
        let d = validate(&one_location(PriceFunction::Piecewise(s)));
        assert_eq!(d[0].path, "automata[0].locations[0].price.pieces[1]");

        let mut s = example_structure();
        s.points[1] = ratio(5, 2);
        let d = validate(&one_location(PriceFunction::Piecewise(s)));
        assert!(d[0].message.contains("integral"));
    }

    #[test]
    fn breakpoints_take_point_values() {
        let s = example_structure();
        for (p, y) in s.points.iter().zip(&s.point_values) {
            assert_eq!(&s.eval(p), y);
        }
    }

    fn arb_atom(op_filter: &'static [CmpOp]) -> impl Strategy<Value = GuardAtom> {
        (0usize..op_filter.len(), 0u64..6).prop_map(move |(i, b)| GuardAtom::new("x", op_filter[i], b))
    }

    proptest! {
        #[test]
        fn upper_guards_are_downward_closed(
            atoms in prop::collection::vec(arb_atom(&[CmpOp::Lt, CmpOp::Le]), 0..4),
            x in 0i64..40, t in 0i64..40, s_frac in 0i64..=100,
        ) {
            let g = Guard(atoms);
            let base = nu(&[("x", ratio(x, 4))]);
            let t = ratio(t, 4);
            let s = &t * ratio(s_frac, 100);
            if guard_sat(&base.delayed(&t), &g).unwrap() {
                prop_assert!(guard_sat(&base.delayed(&s), &g).unwrap());
            }
        }

        #[test]
        fn lower_guards_are_upward_closed(
            atoms in prop::collection::vec(arb_atom(&[CmpOp::Gt, CmpOp::Ge]), 0..4),
            x in 0i64..40, t in 0i64..40, s_frac in 0i64..=100,
        ) {
            let g = Guard(atoms);
            let base = nu(&[("x", ratio(x, 4))]);
            let t = ratio(t, 4);
            let s = &t * ratio(s_frac, 100);
            if guard_sat(&base.delayed(&s), &g).unwrap() {
                prop_assert!(guard_sat(&base.delayed(&t), &g).unwrap());
            }
        }
    }
}
