//! Piecewise-constant sandwiches of Lipschitz prices and the ε-decision.
//!
//! On each grid interval `(a, b)` of width δ a K-Lipschitz `f` satisfies
//! `(f(a)+f(b)-Kδ)/2 <= f <= (f(a)+f(b)+Kδ)/2`. The sandwich structures take
//! these constants on the open intervals and `f` itself on the grid points.
//! Expressions are evaluated exactly, so grid values carry no rounding.
//!
//! Past the last grid point (outside the declared range) the lower bound is
//! 0 and the upper bound grows with slope K, which bounds any K-Lipschitz
//! extension of `f`.

use crate::expr::{self, Expr};
use crate::model::{LinearPiece, LocationSelection, Network, PriceFunction, PwlStructure};
use crate::rational::{self, int, Rational};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApproxConfig {
    pub epsilon: Rational,
    pub lipschitz: Rational,
    pub clock_bound: Rational,
    /// Bound on the number of delay steps of an optimal run.
    pub delay_steps: u32,
    pub delta: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApproxError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("price of `{0}` depends on clocks; only dwell-dependent prices can be sandwiched")]
    ClockDependent(String),
    #[error("location `{0}` has a polynomial price without a Lipschitz constant")]
    NoLipschitzConstant(String),
    #[error("Lipschitz prices disagree on the clock bound ({0} vs {1})")]
    MixedBounds(String, String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] expr::EvalError),
    #[error("network has no Lipschitz price")]
    NothingToApproximate,
}

/// Sampling period making `D` delays of per-delay gap `Kδ` sum to `ε`.
pub fn choose_delta(epsilon: &Rational, lipschitz: &Rational, delay_steps: u32) -> Rational {
    epsilon / (lipschitz * int(delay_steps as i64))
}

impl ApproxConfig {
    /// δ from [`choose_delta`], capped at `T`.
    pub fn new(
        epsilon: Rational,
        lipschitz: Rational,
        clock_bound: Rational,
        delay_steps: u32,
    ) -> Result<Self, ApproxError> {
        if !epsilon.is_positive() {
            return Err(ApproxError::NonPositive("epsilon"));
        }
        if !lipschitz.is_positive() {
            return Err(ApproxError::NonPositive("K"));
        }
        if !clock_bound.is_positive() {
            return Err(ApproxError::NonPositive("T"));
        }
        if delay_steps == 0 {
            return Err(ApproxError::NonPositive("D"));
        }
        let delta = choose_delta(&epsilon, &lipschitz, delay_steps).min(clock_bound.clone());
        Ok(ApproxConfig {
            epsilon,
            lipschitz,
            clock_bound,
            delay_steps,
            delta,
        })
    }

    /// Configuration for every Lipschitz price of `net`: the largest K and
    /// the shared clock bound.
    pub fn for_network(net: &Network, epsilon: Rational, delay_steps: u32) -> Result<Self, ApproxError> {
        let mut k_max: Option<Rational> = None;
        let mut bound: Option<Rational> = None;
        for l in net.automata.iter().flat_map(|a| &a.locations) {
            if let PriceFunction::Lipschitz {
                lipschitz, clock_bound, ..
            } = &l.price
            {
                match &bound {
                    Some(b) if b != clock_bound => {
                        return Err(ApproxError::MixedBounds(
                            rational::format(b),
                            rational::format(clock_bound),
                        ))
                    }
                    _ => bound = Some(clock_bound.clone()),
                }
                if k_max.as_ref().is_none_or(|k| lipschitz > k) {
                    k_max = Some(lipschitz.clone());
                }
            }
        }
        match (k_max, bound) {
            (Some(k), Some(t)) => ApproxConfig::new(epsilon, k, t, delay_steps),
            _ => Err(ApproxError::NothingToApproximate),
        }
    }
}

/// Lower and upper sandwich structures of a dwell-only expression.
pub fn sandwich(
    f: &Expr,
    lipschitz: &Rational,
    clock_bound: &Rational,
    delta: &Rational,
) -> Result<(PwlStructure, PwlStructure), ApproxError> {
    if !lipschitz.is_positive() {
        return Err(ApproxError::NonPositive("K"));
    }
    if !delta.is_positive() {
        return Err(ApproxError::NonPositive("delta"));
    }
    if f.variables().iter().any(|v| v != expr::DWELL) {
        return Err(ApproxError::ClockDependent(format!("{:?}", f.to_json())));
    }
    let ratio = clock_bound / delta;
    let cells = ratio.numer().div_ceil(ratio.denom());
    let cells: usize = cells.try_into().unwrap_or(usize::MAX).max(1);
    let points: Vec<Rational> = (0..=cells).map(|i| delta * int(i as i64)).collect();
    let values = points
        .iter()
        .map(|p| f.eval(&|_| Some(p.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let gap = lipschitz * delta;
    let half = int(2);
    let mut lo_pieces = Vec::with_capacity(points.len());
    let mut hi_pieces = Vec::with_capacity(points.len());
    for w in values.windows(2) {
        let sum = &w[0] + &w[1];
        let lower = ((&sum - &gap) / &half).max(Rational::zero());
        let upper = (&sum + &gap) / &half;
        lo_pieces.push(LinearPiece::new(Rational::zero(), lower));
        hi_pieces.push(LinearPiece::new(Rational::zero(), upper));
    }
    let last_point = points.last().expect("at least one point");
    let last_value = values.last().expect("at least one value");
    lo_pieces.push(LinearPiece::new(Rational::zero(), Rational::zero()));
    hi_pieces.push(LinearPiece::new(lipschitz.clone(), last_value - lipschitz * last_point));
    let integral = |s: &PwlStructure| {
        s.points
            .iter()
            .chain(&s.point_values)
            .chain(s.pieces.iter().flat_map(|p| [&p.slope, &p.intercept]))
            .all(|q| q.is_integer())
    };
    let mut lo = PwlStructure {
        points: points.clone(),
        point_values: values.clone(),
        pieces: lo_pieces,
        integral: false,
    };
    let mut hi = PwlStructure {
        points,
        point_values: values,
        pieces: hi_pieces,
        integral: false,
    };
    lo.integral = integral(&lo);
    hi.integral = integral(&hi);
    Ok((lo, hi))
}

/// Copies of `net` with every Lipschitz price replaced by its lower
/// (first) or upper (second) sandwich.
pub fn build_bounding_automata(net: &Network, cfg: &ApproxConfig) -> Result<(Network, Network), ApproxError> {
    let mut lower = net.clone();
    let mut upper = net.clone();
    for (ai, a) in net.automata.iter().enumerate() {
        for (li, l) in a.locations.iter().enumerate() {
            match &l.price {
                PriceFunction::Lipschitz {
                    expr,
                    lipschitz,
                    clock_bound,
                } => {
                    if clock_bound != &cfg.clock_bound {
                        return Err(ApproxError::MixedBounds(
                            rational::format(&cfg.clock_bound),
                            rational::format(clock_bound),
                        ));
                    }
                    let (lo, hi) = sandwich(expr, lipschitz, clock_bound, &cfg.delta).map_err(|e| match e {
                        ApproxError::ClockDependent(_) => ApproxError::ClockDependent(l.id.clone()),
                        other => other,
                    })?;
                    lower.automata[ai].locations[li].price = PriceFunction::Piecewise(lo);
                    upper.automata[ai].locations[li].price = PriceFunction::Piecewise(hi);
                }
                PriceFunction::Polynomial(_) => return Err(ApproxError::NoLipschitzConstant(l.id.clone())),
                PriceFunction::ConstantRate(_) | PriceFunction::Piecewise(_) => {}
            }
        }
    }
    Ok((lower, upper))
}

/// What a cost engine certifies about the step-bounded optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CostBounds {
    /// No run reaches the target within the step bound.
    Infeasible,
    /// `lower <= OptCost`; `upper`, when present, is attained by a witness.
    Bounds { lower: Rational, upper: Option<Rational> },
}

pub trait CostBoundEngine: Sync {
    fn bounds(
        &self,
        net: &Network,
        from: &LocationSelection,
        to: &LocationSelection,
        steps: u32,
    ) -> Result<CostBounds, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Optimum is at most `B + ε`.
    Yes,
    /// Optimum exceeds `B + ε`.
    No,
    /// The certified interval straddles `B + ε`.
    Boundary,
    /// An engine failed; bounds are partial.
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Boundary => "boundary",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsDecision {
    pub verdict: Verdict,
    /// Certified lower bound, from the lower automaton. `None` when unknown;
    /// an infeasible lower automaton yields `No` with no bound.
    pub lower: Option<Rational>,
    /// Certified upper bound, from the upper automaton.
    pub upper: Option<Rational>,
    pub errors: Vec<String>,
}

/// Decides `OptCost_N(from, to) <= B + ε` through the two sandwich automata,
/// querying both concurrently.
#[allow(clippy::too_many_arguments)]
pub fn eps_decide(
    net: &Network,
    from: &LocationSelection,
    to: &LocationSelection,
    steps: u32,
    budget: &Rational,
    cfg: &ApproxConfig,
    engine: &dyn CostBoundEngine,
) -> Result<EpsDecision, ApproxError> {
    let (lower_net, upper_net) = build_bounding_automata(net, cfg)?;
    let (lo_answer, hi_answer) = std::thread::scope(|s| {
        let lo = s.spawn(|| engine.bounds(&lower_net, from, to, steps));
        let hi = s.spawn(|| engine.bounds(&upper_net, from, to, steps));
        (
            lo.join().unwrap_or_else(|_| Err("engine panicked".into())),
            hi.join().unwrap_or_else(|_| Err("engine panicked".into())),
        )
    });
    let threshold = budget + &cfg.epsilon;
    let mut errors = Vec::new();
    let (lower, lower_infeasible) = match lo_answer {
        Ok(CostBounds::Infeasible) => (None, true),
        Ok(CostBounds::Bounds { lower, .. }) => (Some(lower), false),
        Err(e) => {
            errors.push(e);
            (None, false)
        }
    };
    let upper = match hi_answer {
        Ok(CostBounds::Bounds { upper, .. }) => upper,
        Ok(CostBounds::Infeasible) => None,
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let verdict = if lower_infeasible || lower.as_ref().is_some_and(|l| l > &threshold) {
        Verdict::No
    } else if upper.as_ref().is_some_and(|u| u <= &threshold) {
        Verdict::Yes
    } else if errors.is_empty() {
        Verdict::Boundary
    } else {
        Verdict::Unknown
    };
    Ok(EpsDecision {
        verdict,
        lower,
        upper,
        errors,
    })
}
