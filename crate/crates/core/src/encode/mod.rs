//! Bounded-step SMT-LIB2 encoding of cost-bounded reachability.
//!
//! Step `k` carries one-hot location booleans `s_A_l_k`, one real per clock
//! holding the global time of its last reset (`x_A_c_k`, so the clock value
//! is `z_k - x_A_c_k`), global time `z_k` and accumulated price `price_k`.
//! Transition `k -> k+1` is exactly one of `delay_k`, `null_k` or `sw_k`;
//! `e_A_i_k` marks edge `i` of automaton `A` firing and `dp_A_k` is the delay
//! price of `A`. Delays are strictly positive, never follow a delay, and
//! `null` is absorbing. A switch step fires one internal edge, or one sender
//! and one receiver on the same channel.

pub mod sexp;

use crate::expr::{self, Expr};
use crate::model::{
    self, CmpOp, Comparator, Diagnostic, Guard, LocationSelection, Network, PriceFunction, PwlStructure, Query, SyncDir,
};
use crate::rational::{self, Rational};
use crate::semantics::{self, Configuration, EdgeRef, Run, Step};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic {
    QfLra,
    QfNra,
}

impl Logic {
    pub fn name(self) -> &'static str {
        match self {
            Logic::QfLra => "QF_LRA",
            Logic::QfNra => "QF_NRA",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// Variable layout of one encoded query. Names are stored unquoted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmcInstance {
    pub steps: u32,
    pub logic: Logic,
    pub source: Vec<String>,
    pub target: LocationSelection,
    pub clock_keys: Vec<String>,
    /// `[k][automaton][location]`
    pub loc: Vec<Vec<Vec<String>>>,
    /// `[k][clock]`, clocks in `clock_keys` order.
    pub clock: Vec<Vec<String>>,
    pub time: Vec<String>,
    pub price: Vec<String>,
    pub delay: Vec<String>,
    pub null: Vec<String>,
    pub switch: Vec<String>,
    /// `[k][automaton][edge]`
    pub edge: Vec<Vec<Vec<String>>>,
    /// `[k][automaton]`
    pub delay_price: Vec<Vec<String>>,
    /// `[k]`: (automaton, channel, direction) to variable.
    pub channel: Vec<BTreeMap<(usize, String, SyncDir), String>>,
}

#[derive(Debug, Clone)]
pub struct SmtScript {
    pub instance: BmcInstance,
    pub text: String,
}

#[derive(Default)]
struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn fresh(&mut self, raw: String) -> String {
        let base: String = raw
            .chars()
            .map(|c| if c == '|' || c == '\\' { '_' } else { c })
            .collect();
        let mut name = base.clone();
        let mut i = 1;
        while !self.used.insert(name.clone()) {
            name = format!("{base}_{i}");
            i += 1;
        }
        name
    }
}

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if !c.is_ascii_digit() => {}
        _ => return false,
    }
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// A symbol as written in the script.
pub fn sym(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

/// SMT-LIB2 real literal: `3`, `(- 3)`, `(/ 1 3)`.
pub fn lit(q: &Rational) -> String {
    let mag = if q.is_integer() {
        q.numer().abs().to_string()
    } else {
        format!("(/ {} {})", q.numer().abs(), q.denom())
    };
    if q.is_negative() {
        format!("(- {mag})")
    } else {
        mag
    }
}

fn and(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().expect("one"),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn or(parts: &[String]) -> String {
    match parts.len() {
        0 => "false".into(),
        1 => parts[0].clone(),
        _ => format!("(or {})", parts.join(" ")),
    }
}

fn sum(parts: Vec<String>) -> String {
    match parts.len() {
        0 => "0".into(),
        1 => parts.into_iter().next().expect("one"),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

/// `m·dwell + c` as a term.
fn linear(m: &Rational, c: &Rational, dwell: &str) -> String {
    let slope = if m.is_zero() {
        None
    } else if m.is_one() {
        Some(dwell.to_string())
    } else {
        Some(format!("(* {} {dwell})", lit(m)))
    };
    match (slope, c.is_zero()) {
        (None, _) => lit(c),
        (Some(s), true) => s,
        (Some(s), false) => format!("(+ {s} {})", lit(c)),
    }
}

/// Asserts `delta` equals the piecewise price of a strictly positive `dwell`.
/// The breakpoint at 0 is unreachable under positive dwells and omitted.
pub fn piecewise_price_assert(s: &PwlStructure, dwell: &str, delta: &str) -> String {
    let n = s.len();
    if n == 1 {
        return format!(
            "(= {delta} {})",
            linear(&s.pieces[0].slope, &s.pieces[0].intercept, dwell)
        );
    }
    let mut branches = Vec::new();
    for j in 0..n {
        if j > 0 {
            branches.push(format!(
                "(and (= {dwell} {}) (= {delta} {}))",
                lit(&s.points[j]),
                lit(&s.point_values[j])
            ));
        }
        let mut range = Vec::new();
        if j > 0 {
            range.push(format!("(< {} {dwell})", lit(&s.points[j])));
        }
        if let Some(end) = s.interval_end(j) {
            range.push(format!("(< {dwell} {})", lit(end)));
        }
        range.push(format!(
            "(= {delta} {})",
            linear(&s.pieces[j].slope, &s.pieces[j].intercept, dwell)
        ));
        branches.push(and(range));
    }
    or(&branches)
}

fn expr_term(e: &Expr, var: &dyn Fn(&str) -> String) -> String {
    let many = |op: &str, xs: &[Expr]| {
        let parts: Vec<String> = xs.iter().map(|x| expr_term(x, var)).collect();
        if parts.len() == 1 && op != "-" {
            parts.into_iter().next().expect("one")
        } else {
            format!("({op} {})", parts.join(" "))
        }
    };
    match e {
        Expr::Const(q) => lit(q),
        Expr::Var(v) => var(v),
        Expr::Add(xs) => many("+", xs),
        Expr::Sub(xs) => many("-", xs),
        Expr::Mul(xs) => many("*", xs),
        Expr::Div(a, b) => format!("(/ {} {})", expr_term(a, var), expr_term(b, var)),
        Expr::Pow(b, n) => match n {
            0 => "1".into(),
            1 => expr_term(b, var),
            _ => {
                let base = expr_term(b, var);
                format!("(* {})", vec![base; *n as usize].join(" "))
            }
        },
    }
}

fn cmp_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Eq => "=",
        CmpOp::Ge => ">=",
        CmpOp::Gt => ">",
    }
}

struct Emitter<'a> {
    net: &'a Network,
    inst: BmcInstance,
    key_index: BTreeMap<String, usize>,
    out: String,
}

impl Emitter<'_> {
    fn clock_value(&self, aut: usize, clock: &str, k: usize) -> String {
        let key = self.net.clock_key(aut, clock).expect("validated clock");
        let idx = self.key_index[&key];
        format!("(- {} {})", sym(&self.inst.time[k]), sym(&self.inst.clock[k][idx]))
    }

    fn guard(&self, aut: usize, g: &Guard, k: usize) -> String {
        and(g
            .atoms()
            .iter()
            .map(|a| format!("({} {} {})", cmp_op(a.op), self.clock_value(aut, &a.clock, k), a.bound))
            .collect())
    }

    fn assert(&mut self, term: String) {
        if term != "true" {
            writeln!(self.out, "(assert {term})").expect("string write");
        }
    }

    fn at_most_one(&mut self, vars: &[String]) {
        for i in 0..vars.len() {
            for j in i + 1..vars.len() {
                self.assert(format!("(not (and {} {}))", vars[i], vars[j]));
            }
        }
    }

    fn loc_sym(&self, k: usize, aut: usize, id: &str) -> String {
        let li = self.net.automata[aut].location_index(id).expect("validated location");
        sym(&self.inst.loc[k][aut][li])
    }
}

/// Compiles `q` over `net` into a deterministic SMT-LIB2 script.
pub fn encode(net: &Network, q: &Query) -> Result<SmtScript, EncodeError> {
    let mut diags = model::validate(net);
    if diags.is_empty() {
        diags = model::validate_query(net, q, "query");
    }
    if !diags.is_empty() {
        return Err(EncodeError::Invalid(diags));
    }
    let source = q.source_locations(net).expect("validated source");
    let n = q.steps as usize;
    let logic = if net.is_linear() { Logic::QfLra } else { Logic::QfNra };
    let clock_keys = net.clock_keys();
    let mut namer = Namer::default();

    let mut inst = BmcInstance {
        steps: q.steps,
        logic,
        source: source.clone(),
        target: q.target.clone(),
        clock_keys: clock_keys.clone(),
        loc: Vec::new(),
        clock: Vec::new(),
        time: Vec::new(),
        price: Vec::new(),
        delay: Vec::new(),
        null: Vec::new(),
        switch: Vec::new(),
        edge: Vec::new(),
        delay_price: Vec::new(),
        channel: Vec::new(),
    };
    let mut decls = String::new();
    let mut declare = |namer: &mut Namer, raw: String, sort: &str| {
        let name = namer.fresh(raw);
        writeln!(decls, "(declare-fun {} () {sort})", sym(&name)).expect("string write");
        name
    };
    for k in 0..=n {
        inst.loc.push(
            net.automata
                .iter()
                .map(|a| {
                    a.locations
                        .iter()
                        .map(|l| declare(&mut namer, format!("s_{}_{}_{k}", a.name, l.id), "Bool"))
                        .collect()
                })
                .collect(),
        );
        inst.clock.push(
            clock_keys
                .iter()
                .map(|c| declare(&mut namer, format!("x_{}_{k}", c.replace('.', "_")), "Real"))
                .collect(),
        );
        inst.time.push(declare(&mut namer, format!("z_{k}"), "Real"));
        inst.price.push(declare(&mut namer, format!("price_{k}"), "Real"));
    }
    for k in 0..n {
        inst.delay.push(declare(&mut namer, format!("delay_{k}"), "Bool"));
        inst.null.push(declare(&mut namer, format!("null_{k}"), "Bool"));
        inst.switch.push(declare(&mut namer, format!("sw_{k}"), "Bool"));
        inst.edge.push(
            net.automata
                .iter()
                .map(|a| {
                    (0..a.edges.len())
                        .map(|i| declare(&mut namer, format!("e_{}_{i}_{k}", a.name), "Bool"))
                        .collect()
                })
                .collect(),
        );
        let mut chans = BTreeMap::new();
        for (ai, a) in net.automata.iter().enumerate() {
            for e in &a.edges {
                if let Some(s) = &e.sync {
                    chans.entry((ai, s.channel.clone(), s.dir)).or_insert_with(|| {
                        let mark = if s.dir == SyncDir::Send { '!' } else { '?' };
                        declare(&mut namer, format!("{}.{}{mark}_{k}", a.name, s.channel), "Bool")
                    });
                }
            }
        }
        inst.channel.push(chans);
        inst.delay_price.push(
            net.automata
                .iter()
                .map(|a| declare(&mut namer, format!("dp_{}_{k}", a.name), "Real"))
                .collect(),
        );
    }

    let key_index = clock_keys.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let mut em = Emitter {
        net,
        inst,
        key_index,
        out: String::new(),
    };
    writeln!(em.out, "(set-option :produce-models true)").expect("string write");
    writeln!(em.out, "(set-logic {})", logic.name()).expect("string write");
    em.out.push_str(&decls);

    // Initial configuration.
    for (ai, l) in source.iter().enumerate() {
        let s = em.loc_sym(0, ai, l);
        em.assert(s);
    }
    em.assert(format!("(= {} 0)", sym(&em.inst.time[0])));
    em.assert(format!("(= {} 0)", sym(&em.inst.price[0])));
    for c in em.inst.clock[0].clone() {
        em.assert(format!("(= {} 0)", sym(&c)));
    }

    // Per-step state constraints.
    for k in 0..=n {
        for (ai, a) in net.automata.iter().enumerate() {
            let vars: Vec<String> = em.inst.loc[k][ai].iter().map(|v| sym(v)).collect();
            em.assert(or(&vars));
            em.at_most_one(&vars);
            for (li, l) in a.locations.iter().enumerate() {
                if !l.invariant.is_true() {
                    let inv = em.guard(ai, &l.invariant, k);
                    em.assert(format!("(=> {} {inv})", vars[li]));
                }
            }
        }
    }

    for k in 0..n {
        let (delay, null, sw) = (sym(&em.inst.delay[k]), sym(&em.inst.null[k]), sym(&em.inst.switch[k]));
        let (z, z1) = (sym(&em.inst.time[k]), sym(&em.inst.time[k + 1]));
        let (p, p1) = (sym(&em.inst.price[k]), sym(&em.inst.price[k + 1]));
        em.assert(format!("(or {delay} {null} {sw})"));
        em.at_most_one(&[delay.clone(), null.clone(), sw.clone()]);

        let edges: Vec<Vec<String>> = em.inst.edge[k]
            .iter()
            .map(|es| es.iter().map(|e| sym(e)).collect())
            .collect();
        let all_edges: Vec<String> = edges.iter().flatten().cloned().collect();
        em.assert(format!("(= {sw} {})", or(&all_edges)));

        for (ai, a) in net.automata.iter().enumerate() {
            for (ei, e) in a.edges.iter().enumerate() {
                let fire = &edges[ai][ei];
                let from = em.loc_sym(k, ai, &e.from);
                let to = em.loc_sym(k + 1, ai, &e.to);
                let guard = em.guard(ai, &e.guard, k);
                em.assert(format!("(=> {fire} {})", and(vec![from, to, guard])));
                if e.sync.is_none() {
                    let others: Vec<String> = edges
                        .iter()
                        .enumerate()
                        .filter(|(bi, _)| *bi != ai)
                        .flat_map(|(_, es)| es.iter().cloned())
                        .collect();
                    if !others.is_empty() {
                        em.assert(format!("(=> {fire} (not {}))", or(&others)));
                    }
                }
            }
            em.at_most_one(&edges[ai]);
            let frame: Vec<String> = (0..a.locations.len())
                .map(|li| {
                    format!(
                        "(= {} {})",
                        sym(&em.inst.loc[k + 1][ai][li]),
                        sym(&em.inst.loc[k][ai][li])
                    )
                })
                .collect();
            if edges[ai].is_empty() {
                em.assert(and(frame));
            } else {
                em.assert(format!("(=> (not {}) {})", or(&edges[ai]), and(frame)));
            }
        }

        // Channels: each flag mirrors its edges; per channel, one sender
        // exactly when one receiver; one channel per step.
        let mut active: BTreeMap<String, (Vec<String>, Vec<String>)> = BTreeMap::new();
        for ((ai, chan, dir), var) in em.inst.channel[k].clone() {
            let a = &net.automata[ai];
            let members: Vec<String> = a
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| matches!(&e.sync, Some(s) if s.channel == chan && s.dir == dir))
                .map(|(ei, _)| edges[ai][ei].clone())
                .collect();
            em.assert(format!("(= {} {})", sym(&var), or(&members)));
            let slot = active.entry(chan).or_default();
            match dir {
                SyncDir::Send => slot.0.push(sym(&var)),
                SyncDir::Receive => slot.1.push(sym(&var)),
            }
        }
        let mut any_chan = Vec::new();
        for (senders, receivers) in active.values() {
            em.at_most_one(senders);
            em.at_most_one(receivers);
            em.assert(format!("(= {} {})", or(senders), or(receivers)));
            any_chan.push(or(senders));
        }
        em.at_most_one(&any_chan);

        // Clock timestamps: reset to the current time or unchanged.
        for (ci, key) in clock_keys.iter().enumerate() {
            let resetters: Vec<String> = net
                .automata
                .iter()
                .enumerate()
                .flat_map(|(ai, a)| {
                    a.edges
                        .iter()
                        .enumerate()
                        .filter(move |(_, e)| e.resets.iter().any(|r| net.clock_key(ai, r).as_deref() == Some(key)))
                        .map(move |(ei, _)| (ai, ei))
                })
                .map(|(ai, ei)| edges[ai][ei].clone())
                .collect();
            let (x, x1) = (sym(&em.inst.clock[k][ci]), sym(&em.inst.clock[k + 1][ci]));
            if resetters.is_empty() {
                em.assert(format!("(= {x1} {x})"));
            } else {
                em.assert(format!("(ite {} (= {x1} {z1}) (= {x1} {x}))", or(&resetters)));
            }
        }

        // Time and price per step kind.
        em.assert(format!("(=> {delay} (> {z1} {z}))"));
        em.assert(format!("(=> {null} (and (= {z1} {z}) (= {p1} {p})))"));
        let paid: Vec<String> = net
            .automata
            .iter()
            .enumerate()
            .flat_map(|(ai, a)| a.edges.iter().enumerate().map(move |(ei, e)| (ai, ei, e.price)))
            .filter(|(_, _, price)| *price > 0)
            .map(|(ai, ei, price)| format!("(ite {} {price} 0)", edges[ai][ei]))
            .collect();
        em.assert(format!(
            "(=> {sw} (and (= {z1} {z}) (= {p1} {})))",
            sum([vec![p.clone()], paid].concat())
        ));
        let dps: Vec<String> = em.inst.delay_price[k].iter().map(|d| sym(d)).collect();
        em.assert(format!(
            "(=> {delay} (= {p1} {}))",
            sum([vec![p.clone()], dps.clone()].concat())
        ));
        let dwell = format!("(- {z1} {z})");
        for (ai, a) in net.automata.iter().enumerate() {
            for (li, l) in a.locations.iter().enumerate() {
                let at = sym(&em.inst.loc[k][ai][li]);
                let dp = &dps[ai];
                let body = match &l.price {
                    PriceFunction::ConstantRate(r) => format!(
                        "(= {dp} {})",
                        linear(&Rational::from_integer((*r).into()), &Rational::zero(), &dwell)
                    ),
                    PriceFunction::Piecewise(s) => piecewise_price_assert(s, &dwell, dp),
                    PriceFunction::Polynomial(e) => {
                        let term = expr_term(e, &|v| {
                            if v == expr::DWELL {
                                dwell.clone()
                            } else {
                                em.clock_value(ai, v, k)
                            }
                        });
                        format!("(= {dp} {term})")
                    }
                    PriceFunction::Lipschitz {
                        expr: e, clock_bound, ..
                    } => {
                        let var = |v: &str| {
                            if v == expr::DWELL {
                                dwell.clone()
                            } else {
                                em.clock_value(ai, v, k)
                            }
                        };
                        let mut parts: Vec<String> = e
                            .variables()
                            .iter()
                            .map(|v| format!("(<= {} {})", var(v), lit(clock_bound)))
                            .collect();
                        parts.push(format!("(= {dp} {})", expr_term(e, &var)));
                        and(parts)
                    }
                };
                em.assert(format!("(=> (and {delay} {at}) {body})"));
            }
        }

        // Canonical alternation; null pads the tail.
        if k + 1 < n {
            em.assert(format!("(=> {delay} (not {}))", sym(&em.inst.delay[k + 1])));
            em.assert(format!("(=> {null} {})", sym(&em.inst.null[k + 1])));
        }
    }

    // Target and budget.
    let mut goal = Vec::new();
    for (aut, l) in &q.target {
        let ai = net.automaton_index(aut).expect("validated target");
        goal.push(em.loc_sym(n, ai, l));
    }
    em.assert(and(goal));
    let price_n = sym(&em.inst.price[n]);
    let budget = lit(&q.budget);
    em.assert(match q.cmp {
        Comparator::Ne => format!("(not (= {price_n} {budget}))"),
        c => format!("({} {price_n} {budget})", c.symbol()),
    });
    em.out.push_str("(check-sat)\n(get-model)\n");
    Ok(SmtScript {
        instance: em.inst,
        text: em.out,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed solver model: {0}")]
    Malformed(String),
    #[error("decoded run disagrees with the model at step {step}: {detail}")]
    Integrity { step: usize, detail: String },
}

/// A replay-checked run extracted from a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub run: Run,
    /// Cost from exact replay.
    pub cost: Rational,
    /// `price_N` as reported by the solver.
    pub model_cost: Rational,
}

struct Values(BTreeMap<String, sexp::Sexp>);

impl Values {
    fn parse(text: &str) -> Result<Self, DecodeError> {
        let forms = sexp::parse_all(text).map_err(|e| DecodeError::Malformed(e.to_string()))?;
        let mut map = BTreeMap::new();
        let mut pending: Vec<&sexp::Sexp> = forms.iter().collect();
        while let Some(f) = pending.pop() {
            let Some(items) = f.list() else { continue };
            match items {
                [head, name, args, _sort, value] if head.atom() == Some("define-fun") => {
                    if args.list().is_some_and(|a| a.is_empty()) {
                        if let Some(n) = name.atom() {
                            map.insert(n.to_string(), value.clone());
                        }
                    }
                }
                _ => pending.extend(items.iter()),
            }
        }
        if map.is_empty() {
            return Err(DecodeError::Malformed("no definitions in model".into()));
        }
        Ok(Values(map))
    }

    fn boolean(&self, name: &str) -> Result<bool, DecodeError> {
        match self.0.get(name) {
            None => Ok(false),
            Some(v) => v
                .boolean()
                .ok_or_else(|| DecodeError::Malformed(format!("`{name}` is not a boolean"))),
        }
    }

    fn real(&self, name: &str) -> Result<Rational, DecodeError> {
        self.0
            .get(name)
            .ok_or_else(|| DecodeError::Malformed(format!("no value for `{name}`")))?
            .real()
            .ok_or_else(|| DecodeError::Malformed(format!("`{name}` is not a real value")))
    }
}

fn close(a: &Rational, b: &Rational, tol: Option<&Rational>) -> bool {
    match tol {
        None => a == b,
        Some(t) => (a - b).abs() <= *t,
    }
}

/// Extracts the run of a `sat` model and replays it. `tolerance` is `None`
/// for exact (linear) models; otherwise times are snapped to the simplest
/// rational within `tolerance` and model values are compared within it.
pub fn decode_model(
    net: &Network,
    inst: &BmcInstance,
    model_text: &str,
    tolerance: Option<&Rational>,
) -> Result<Witness, DecodeError> {
    let vals = Values::parse(model_text)?;
    let n = inst.steps as usize;
    let time = |k: usize| -> Result<Rational, DecodeError> {
        let z = vals.real(&inst.time[k])?;
        Ok(match tolerance {
            None => z,
            Some(t) => rational::snap(&z, t),
        })
    };
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        let kinds = [
            vals.boolean(&inst.delay[k])?,
            vals.boolean(&inst.null[k])?,
            vals.boolean(&inst.switch[k])?,
        ];
        let integrity = |detail: String| DecodeError::Integrity { step: k, detail };
        let step = match kinds {
            [true, false, false] => Step::Delay(time(k + 1)? - time(k)?),
            [false, true, false] => Step::Null,
            [false, false, true] => {
                let mut fired = Vec::new();
                for (ai, a) in net.automata.iter().enumerate() {
                    for (ei, var) in inst.edge[k][ai].iter().enumerate() {
                        if vals.boolean(var)? {
                            fired.push((ai, ei, a.edges[ei].sync.as_ref().map(|s| s.dir)));
                        }
                    }
                }
                let r = |ai: usize, ei: usize| EdgeRef::new(&net.automata[ai].name, ei);
                match fired.as_slice() {
                    [(ai, ei, None)] => Step::Switch(r(*ai, *ei)),
                    [(a1, e1, Some(d1)), (a2, e2, Some(_))] => {
                        let (s, rcv) = if *d1 == SyncDir::Send {
                            ((a1, e1), (a2, e2))
                        } else {
                            ((a2, e2), (a1, e1))
                        };
                        Step::Handshake {
                            sender: r(*s.0, *s.1),
                            receiver: r(*rcv.0, *rcv.1),
                        }
                    }
                    other => return Err(integrity(format!("switch fires {} edges", other.len()))),
                }
            }
            _ => return Err(integrity("step kind is not exactly one of delay/null/switch".into())),
        };
        steps.push(step);
    }
    let start = Configuration::initial(net, inst.source.clone()).map_err(|e| DecodeError::Integrity {
        step: 0,
        detail: e.to_string(),
    })?;
    let run = Run { start, steps };
    let trace = semantics::replay_trace(net, &run).map_err(|e| DecodeError::Integrity {
        step: match &e {
            semantics::ReplayError::Inadmissible { index, .. } => *index,
            semantics::ReplayError::NonCanonical(i) => *i,
            semantics::ReplayError::Start(_) => 0,
        },
        detail: e.to_string(),
    })?;
    for (k, conf) in trace.iter().enumerate() {
        let integrity = |detail: String| DecodeError::Integrity { step: k, detail };
        for (ai, a) in net.automata.iter().enumerate() {
            let li = a.location_index(&conf.locs[ai]).expect("replayed location");
            if !vals.boolean(&inst.loc[k][ai][li])? {
                return Err(integrity(format!(
                    "`{}` not at `{}` in the model",
                    a.name, conf.locs[ai]
                )));
            }
        }
        let z = vals.real(&inst.time[k])?;
        for (ci, key) in inst.clock_keys.iter().enumerate() {
            let model_value = &z - vals.real(&inst.clock[k][ci])?;
            let replayed = conf.clocks.get(key).expect("replayed clock");
            if !close(&model_value, replayed, tolerance) {
                return Err(integrity(format!(
                    "clock `{key}` is {} in the model but {} on replay",
                    rational::format(&model_value),
                    rational::format(replayed)
                )));
            }
        }
        let price = vals.real(&inst.price[k])?;
        if !close(&price, &conf.cost, tolerance) {
            return Err(integrity(format!(
                "price is {} in the model but {} on replay",
                rational::format(&price),
                rational::format(&conf.cost)
            )));
        }
    }
    let last = trace.last().expect("non-empty");
    for (aut, l) in &inst.target {
        if last.location_of(net, aut) != Some(l.as_str()) {
            return Err(DecodeError::Integrity {
                step: n,
                detail: format!("target `{aut}.{l}` not reached"),
            });
        }
    }
    let cost = last.cost.clone();
    let model_cost = vals.real(&inst.price[n])?;
    let mut run = run;
    while run.steps.last() == Some(&Step::Null) {
        run.steps.pop();
    }
    Ok(Witness { run, cost, model_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Automaton, Edge, LinearPiece, Location};
    use crate::rational::{int, ratio};

    /// Rate-2 `l0`, edge `x >= 3` with price 1 to `goal`.
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

    fn query(steps: u32, budget: Rational, cmp: Comparator) -> Query {
        Query {
            source: [("A".to_string(), "l0".to_string())].into(),
            target: [("A".to_string(), "goal".to_string())].into(),
            steps,
            budget,
            cmp,
        }
    }

    #[test]
    fn guards_use_clock_values() {
        let s = encode(&rate_two(), &query(2, int(7), Comparator::Le)).unwrap();
        assert!(s.text.contains("(>= (- z_0 x_A_x_0) 3)"));
        assert!(s
            .text
            .starts_with("(set-option :produce-models true)\n(set-logic QF_LRA)\n"));
        assert!(s.text.ends_with("(check-sat)\n(get-model)\n"));
        assert!(s.text.contains("(assert (<= price_2 7))"));
        assert!(sexp::parse_all(&s.text).is_ok());
    }

    #[test]
    fn deterministic() {
        let a = encode(&rate_two(), &query(3, int(7), Comparator::Le)).unwrap().text;
        let b = encode(&rate_two(), &query(3, int(7), Comparator::Le)).unwrap().text;
        assert_eq!(a, b);
    }

    #[test]
    fn piecewise_assertions() {
        let single = PwlStructure::linear(3);
        assert_eq!(piecewise_price_assert(&single, "d", "p"), "(= p (* 3 d))");
        let two = PwlStructure {
            points: vec![int(0), int(2)],
            point_values: vec![int(0), int(5)],
            pieces: vec![LinearPiece::new(int(2), int(0)), LinearPiece::new(int(1), int(3))],
            integral: true,
        };
        let text = piecewise_price_assert(&two, "d", "p");
        assert_eq!(
            text,
            "(or (and (< d 2) (= p (* 2 d))) (and (= d 2) (= p 5)) (and (< 2 d) (= p (+ d 3))))"
        );
        let parsed = sexp::parse_all(&text).unwrap();
        assert_eq!(parsed[0].list().unwrap().len(), 4);
    }

    #[test]
    fn literals_and_names() {
        assert_eq!(lit(&ratio(-1, 3)), "(- (/ 1 3))");
        assert_eq!(lit(&int(-4)), "(- 4)");
        assert_eq!(sym("s_A_l(0,2)_0"), "|s_A_l(0,2)_0|");
        assert_eq!(sym("A.c!_0"), "A.c!_0");
        let mut namer = Namer::default();
        assert_eq!(namer.fresh("a".into()), "a");
        assert_eq!(namer.fresh("a".into()), "a_1");
    }

    #[test]
    fn decodes_hand_written_model() {
        let net = rate_two();
        let s = encode(&net, &query(2, int(7), Comparator::Le)).unwrap();
        let model = "(model
          (define-fun s_A_l0_0 () Bool true) (define-fun s_A_goal_0 () Bool false)
          (define-fun s_A_l0_1 () Bool true) (define-fun s_A_goal_1 () Bool false)
          (define-fun s_A_l0_2 () Bool false) (define-fun s_A_goal_2 () Bool true)
          (define-fun x_A_x_0 () Real 0.0) (define-fun x_A_x_1 () Real 0.0) (define-fun x_A_x_2 () Real 0.0)
          (define-fun z_0 () Real 0.0) (define-fun z_1 () Real 3.0) (define-fun z_2 () Real 3.0)
          (define-fun price_0 () Real 0.0) (define-fun price_1 () Real 6.0) (define-fun price_2 () Real 7.0)
          (define-fun delay_0 () Bool true) (define-fun sw_1 () Bool true) (define-fun e_A_0_1 () Bool true))";
        let w = decode_model(&net, &s.instance, model, None).unwrap();
        assert_eq!(
            w.run.steps,
            vec![Step::Delay(int(3)), Step::Switch(EdgeRef::new("A", 0))]
        );
        assert_eq!(w.cost, int(7));

        let tampered = model.replace("(define-fun price_2 () Real 7.0)", "(define-fun price_2 () Real 6.0)");
        assert!(matches!(
            decode_model(&net, &s.instance, &tampered, None),
            Err(DecodeError::Integrity { step: 2, .. })
        ));
    }
}
