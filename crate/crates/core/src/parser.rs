//! The `pta-1` JSON model format.
//!
//! Numerals are JSON integers or `"num/den"` strings; JSON floats are
//! rejected. Guards are arrays of `[clock, op, bound]`, sync labels are
//! `"c!"` / `"c?"`, and expression prices are prefix s-expressions.

use crate::expr::Expr;
use crate::model::{
    self, Automaton, CmpOp, Comparator, Diagnostic, Edge, Guard, GuardAtom, LinearPiece, Location, LocationSelection,
    Network, PriceFunction, PwlStructure, Query, Sync,
};
use crate::rational::{self, Rational};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};

pub const FORMAT_VERSION: &str = "pta-1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDocument {
    pub network: Network,
    pub queries: Vec<Query>,
    pub metadata: BTreeMap<String, String>,
}

impl ModelDocument {
    pub fn new(network: Network) -> Self {
        ModelDocument {
            network,
            queries: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut d = model::validate(&self.network);
        if d.is_empty() {
            for (i, q) in self.queries.iter().enumerate() {
                d.extend(model::validate_query(&self.network, q, &format!("queries[{i}]")));
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
    #[error("unsupported format version `{0}` (expected `pta-1`)")]
    Version(String),
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

fn semantic(path: &str, message: impl Into<String>) -> ParseError {
    ParseError::Semantic {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<ModelDocument, ParseError> {
    let doc = parse_model_unchecked(text)?;
    let diags = doc.diagnostics();
    if diags.is_empty() {
        Ok(doc)
    } else {
        Err(ParseError::Invalid(diags))
    }
}

/// Parses without structural validation, so callers can report diagnostics.
pub fn parse_model_unchecked(text: &str) -> Result<ModelDocument, ParseError> {
    let root = parse_json(text)?;
    let obj = as_object(&root, "$")?;
    match obj.get("version").and_then(Value::as_str) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(ParseError::Version(v.to_string())),
        None => return Err(semantic("$.version", "missing format version")),
    }
    let automata = req_array(obj, "automata", "$")?
        .iter()
        .enumerate()
        .map(|(i, a)| parse_automaton(a, &format!("$.automata[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let global_clocks = opt_strings(obj, "globalClocks", "$")?;
    let channels: BTreeSet<String> = opt_strings(obj, "channels", "$")?.into_iter().collect();
    let network = Network {
        automata,
        channels,
        global_clocks,
    };
    let queries = match obj.get("queries") {
        None => Vec::new(),
        Some(v) => as_array(v, "$.queries")?
            .iter()
            .enumerate()
            .map(|(i, q)| parse_query(q, &format!("$.queries[{i}]")))
            .collect::<Result<_, _>>()?,
    };
    let metadata = match obj.get("metadata") {
        None => BTreeMap::new(),
        Some(v) => as_object(v, "$.metadata")?
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|s| (k.clone(), s.to_string()))
                    .ok_or_else(|| semantic(&format!("$.metadata.{k}"), "metadata values are strings"))
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(ModelDocument {
        network,
        queries,
        metadata,
    })
}

pub(crate) fn parse_json(text: &str) -> Result<Value, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn parse_automaton(v: &Value, path: &str) -> Result<Automaton, ParseError> {
    let obj = as_object(v, path)?;
    let name = req_str(obj, "name", path)?;
    let clocks = opt_strings(obj, "clocks", path)?;
    let locations = req_array(obj, "locations", path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_location(l, &format!("{path}.locations[{i}]")))
        .collect::<Result<_, _>>()?;
    let edges = match obj.get("edges") {
        None => Vec::new(),
        Some(v) => as_array(v, &format!("{path}.edges"))?
            .iter()
            .enumerate()
            .map(|(i, e)| parse_edge(e, &format!("{path}.edges[{i}]")))
            .collect::<Result<_, _>>()?,
    };
    let initial = match obj.get("initial") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_str(v, &format!("{path}.initial"))?.to_string()),
    };
    Ok(Automaton {
        name,
        clocks,
        locations,
        edges,
        initial,
    })
}

fn parse_location(v: &Value, path: &str) -> Result<Location, ParseError> {
    let obj = as_object(v, path)?;
    Ok(Location {
        id: req_str(obj, "id", path)?,
        invariant: opt_guard(obj, "invariant", path)?,
        price: match obj.get("price") {
            None => PriceFunction::zero(),
            Some(p) => parse_price(p, &format!("{path}.price"))?,
        },
    })
}

fn parse_edge(v: &Value, path: &str) -> Result<Edge, ParseError> {
    let obj = as_object(v, path)?;
    let sync = match obj.get("sync") {
        None | Some(Value::Null) => None,
        Some(s) => {
            let p = format!("{path}.sync");
            let text = as_str(s, &p)?;
            Some(Sync::parse(text).ok_or_else(|| semantic(&p, format!("bad sync label `{text}`")))?)
        }
    };
    Ok(Edge {
        from: req_str(obj, "from", path)?,
        to: req_str(obj, "to", path)?,
        guard: opt_guard(obj, "guard", path)?,
        resets: opt_strings(obj, "resets", path)?.into_iter().collect(),
        sync,
        price: match obj.get("price") {
            None => 0,
            Some(p) => as_natural(p, &format!("{path}.price"))?,
        },
    })
}

fn opt_guard(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Guard, ParseError> {
    let Some(v) = obj.get(key) else {
        return Ok(Guard::truth());
    };
    let path = format!("{path}.{key}");
    let atoms = as_array(v, &path)?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let p = format!("{path}[{i}]");
            match a.as_array().map(Vec::as_slice) {
                Some([c, op, b]) => {
                    let clock = as_str(c, &p)?.to_string();
                    let op_text = as_str(op, &p)?;
                    let op = CmpOp::from_symbol(op_text)
                        .ok_or_else(|| semantic(&p, format!("unknown comparison `{op_text}`")))?;
                    Ok(GuardAtom {
                        clock,
                        op,
                        bound: as_natural(b, &p)?,
                    })
                }
                _ => Err(semantic(&p, "guard atoms are [clock, op, bound]")),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Guard(atoms))
}

fn parse_price(v: &Value, path: &str) -> Result<PriceFunction, ParseError> {
    let obj = as_object(v, path)?;
    let kind = req_str(obj, "kind", path)?;
    let expr = || -> Result<Expr, ParseError> {
        let p = format!("{path}.expr");
        let e = obj.get("expr").ok_or_else(|| semantic(&p, "missing expression"))?;
        Expr::from_json(e).map_err(|m| semantic(&p, m))
    };
    match kind.as_str() {
        "rate" => Ok(PriceFunction::ConstantRate(match obj.get("rate") {
            None => return Err(semantic(path, "missing `rate`")),
            Some(r) => as_natural(r, &format!("{path}.rate"))?,
        })),
        "piecewise" => {
            let nums = |key: &str| -> Result<Vec<Rational>, ParseError> {
                let p = format!("{path}.{key}");
                as_array(obj.get(key).ok_or_else(|| semantic(&p, "missing"))?, &p)?
                    .iter()
                    .enumerate()
                    .map(|(i, x)| as_rational(x, &format!("{p}[{i}]")))
                    .collect()
            };
            let points = nums("points")?;
            let point_values = nums("values")?;
            let pp = format!("{path}.pieces");
            let pieces = as_array(obj.get("pieces").ok_or_else(|| semantic(&pp, "missing"))?, &pp)?
                .iter()
                .enumerate()
                .map(|(i, pc)| {
                    let p = format!("{pp}[{i}]");
                    match pc.as_array().map(Vec::as_slice) {
                        Some([m, c]) => Ok(LinearPiece::new(as_rational(m, &p)?, as_rational(c, &p)?)),
                        _ => Err(semantic(&p, "pieces are [slope, intercept]")),
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let integral = match obj.get("integral") {
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(semantic(&format!("{path}.integral"), "expected a boolean")),
                None => points
                    .iter()
                    .chain(&point_values)
                    .chain(pieces.iter().flat_map(|p| [&p.slope, &p.intercept]))
                    .all(|q| q.is_integer()),
            };
            Ok(PriceFunction::Piecewise(PwlStructure {
                points,
                point_values,
                pieces,
                integral,
            }))
        }
        "polynomial" => Ok(PriceFunction::Polynomial(expr()?)),
        "lipschitz" => {
            let num = |key: &str| {
                let p = format!("{path}.{key}");
                as_rational(obj.get(key).ok_or_else(|| semantic(&p, "missing"))?, &p)
            };
            Ok(PriceFunction::Lipschitz {
                expr: expr()?,
                lipschitz: num("K")?,
                clock_bound: num("T")?,
            })
        }
        other => Err(semantic(
            &format!("{path}.kind"),
            format!("unknown price kind `{other}`"),
        )),
    }
}

fn parse_query(v: &Value, path: &str) -> Result<Query, ParseError> {
    let obj = as_object(v, path)?;
    let selection = |key: &str| -> Result<LocationSelection, ParseError> {
        let p = format!("{path}.{key}");
        as_object(obj.get(key).ok_or_else(|| semantic(&p, "missing"))?, &p)?
            .iter()
            .map(|(a, l)| Ok((a.clone(), as_str(l, &format!("{p}.{a}"))?.to_string())))
            .collect()
    };
    let cmp = match obj.get("cmp") {
        None => Comparator::Le,
        Some(c) => {
            let p = format!("{path}.cmp");
            let s = as_str(c, &p)?;
            Comparator::from_symbol(s).ok_or_else(|| semantic(&p, format!("unknown comparator `{s}`")))?
        }
    };
    let steps = as_natural(
        obj.get("steps")
            .ok_or_else(|| semantic(&format!("{path}.steps"), "missing"))?,
        &format!("{path}.steps"),
    )?;
    Ok(Query {
        source: selection("from")?,
        target: selection("to")?,
        steps: u32::try_from(steps).map_err(|_| semantic(&format!("{path}.steps"), "too large"))?,
        budget: as_rational(
            obj.get("budget")
                .ok_or_else(|| semantic(&format!("{path}.budget"), "missing"))?,
            &format!("{path}.budget"),
        )?,
        cmp,
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| semantic(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ParseError> {
    v.as_array().ok_or_else(|| semantic(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ParseError> {
    v.as_str().ok_or_else(|| semantic(path, "expected a string"))
}

pub(crate) fn as_rational(v: &Value, path: &str) -> Result<Rational, ParseError> {
    rational::from_json(v).ok_or_else(|| semantic(path, format!("expected an exact numeral, found {v}")))
}

fn as_natural(v: &Value, path: &str) -> Result<u64, ParseError> {
    v.as_u64()
        .ok_or_else(|| semantic(path, format!("expected a non-negative integer, found {v}")))
}

fn req_str(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, ParseError> {
    let p = format!("{path}.{key}");
    Ok(as_str(obj.get(key).ok_or_else(|| semantic(&p, "missing"))?, &p)?.to_string())
}

fn req_array<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Vec<Value>, ParseError> {
    let p = format!("{path}.{key}");
    as_array(obj.get(key).ok_or_else(|| semantic(&p, "missing"))?, &p)
}

fn opt_strings(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Vec<String>, ParseError> {
    let Some(v) = obj.get(key) else {
        return Ok(Vec::new());
    };
    let p = format!("{path}.{key}");
    as_array(v, &p)?
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(as_str(s, &format!("{p}[{i}]"))?.to_string()))
        .collect()
}

/// Pretty-printed JSON; defaults (empty guards, zero prices, empty lists)
/// are omitted.
pub fn serialize_model(doc: &ModelDocument) -> String {
    let mut text = serde_json::to_string_pretty(&model_to_json(doc)).expect("JSON values serialize");
    text.push('\n');
    text
}

pub fn model_to_json(doc: &ModelDocument) -> Value {
    let n = &doc.network;
    let mut root = Map::new();
    root.insert("version".into(), json!(FORMAT_VERSION));
    root.insert(
        "automata".into(),
        Value::Array(n.automata.iter().map(automaton_to_json).collect()),
    );
    if !n.global_clocks.is_empty() {
        root.insert("globalClocks".into(), json!(n.global_clocks));
    }
    if !n.channels.is_empty() {
        root.insert("channels".into(), json!(n.channels));
    }
    if !doc.queries.is_empty() {
        root.insert(
            "queries".into(),
            Value::Array(doc.queries.iter().map(query_to_json).collect()),
        );
    }
    if !doc.metadata.is_empty() {
        root.insert("metadata".into(), json!(doc.metadata));
    }
    Value::Object(root)
}

fn automaton_to_json(a: &Automaton) -> Value {
    let mut o = Map::new();
    o.insert("name".into(), json!(a.name));
    if !a.clocks.is_empty() {
        o.insert("clocks".into(), json!(a.clocks));
    }
    let locations = a
        .locations
        .iter()
        .map(|l| {
            let mut lo = Map::new();
            lo.insert("id".into(), json!(l.id));
            if !l.invariant.is_true() {
                lo.insert("invariant".into(), guard_to_json(&l.invariant));
            }
            if l.price != PriceFunction::zero() {
                lo.insert("price".into(), price_to_json(&l.price));
            }
            Value::Object(lo)
        })
        .collect();
    o.insert("locations".into(), Value::Array(locations));
    if !a.edges.is_empty() {
        o.insert("edges".into(), Value::Array(a.edges.iter().map(edge_to_json).collect()));
    }
    if let Some(init) = &a.initial {
        o.insert("initial".into(), json!(init));
    }
    Value::Object(o)
}

fn edge_to_json(e: &Edge) -> Value {
    let mut o = Map::new();
    o.insert("from".into(), json!(e.from));
    o.insert("to".into(), json!(e.to));
    if !e.guard.is_true() {
        o.insert("guard".into(), guard_to_json(&e.guard));
    }
    if !e.resets.is_empty() {
        o.insert("resets".into(), json!(e.resets));
    }
    if let Some(s) = &e.sync {
        o.insert("sync".into(), json!(s.to_string()));
    }
    if e.price != 0 {
        o.insert("price".into(), json!(e.price));
    }
    Value::Object(o)
}

pub fn guard_to_json(g: &Guard) -> Value {
    Value::Array(g.0.iter().map(|a| json!([a.clock, a.op.symbol(), a.bound])).collect())
}

pub fn price_to_json(p: &PriceFunction) -> Value {
    match p {
        PriceFunction::ConstantRate(k) => json!({"kind": "rate", "rate": k}),
        PriceFunction::Piecewise(s) => json!({
            "kind": "piecewise",
            "points": s.points.iter().map(rational::to_json).collect::<Vec<_>>(),
            "values": s.point_values.iter().map(rational::to_json).collect::<Vec<_>>(),
            "pieces": s.pieces.iter()
                .map(|pc| json!([rational::to_json(&pc.slope), rational::to_json(&pc.intercept)]))
                .collect::<Vec<_>>(),
            "integral": s.integral,
        }),
        PriceFunction::Polynomial(e) => json!({"kind": "polynomial", "expr": e.to_json()}),
        PriceFunction::Lipschitz {
            expr,
            lipschitz,
            clock_bound,
        } => json!({
            "kind": "lipschitz",
            "expr": expr.to_json(),
            "K": rational::to_json(lipschitz),
            "T": rational::to_json(clock_bound),
        }),
    }
}

pub fn query_to_json(q: &Query) -> Value {
    json!({
        "from": q.source,
        "to": q.target,
        "steps": q.steps,
        "budget": rational::to_json(&q.budget),
        "cmp": q.cmp.symbol(),
    })
}
