//! External SMT-LIB2 solver driver, decision and minimization queries.
//!
//! One call to [`check`] owns one child process. Witnesses are always
//! decoded and replayed before they are reported.

use crate::encode::{self, DecodeError, EncodeError, Logic, Witness};
use crate::lipschitz::{CostBoundEngine, CostBounds};
use crate::model::{Comparator, LocationSelection, Network, Query};
use crate::rational::{self, Rational};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

pub const SOLVER_ENV: &str = "PTA_SOLVER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub extra_args: Vec<String>,
    /// Wall-clock limit per solver process; must be positive.
    pub timeout: Duration,
    /// Decimal digits requested for nonlinear model values.
    pub model_precision: u32,
}

impl Default for SolverConfig {
    /// `$PTA_SOLVER` or `z3`, reading the script from stdin.
    fn default() -> Self {
        let executable = std::env::var_os(SOLVER_ENV).map_or_else(|| PathBuf::from("z3"), PathBuf::from);
        SolverConfig {
            executable,
            extra_args: vec!["-in".into()],
            timeout: Duration::from_secs(60),
            model_precision: 20,
        }
    }
}

impl SolverConfig {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Replay tolerance for nonlinear models: `10^(2 - precision)`.
    pub fn tolerance(&self) -> Rational {
        let digits = self.model_precision.saturating_sub(2);
        Rational::new(BigInt::from(1), BigInt::from(10).pow(digits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    Sat(String),
    Unsat,
    Unknown,
    Timeout,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("cannot start solver `{path}`: {source}")]
    Spawn { path: String, source: std::io::Error },
    #[error("solver transport failure: {message}\n--- stdout ---\n{stdout}\n--- stderr ---\n{stderr}")]
    Transport {
        message: String,
        stdout: String,
        stderr: String,
    },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("invalid search interval: {0}")]
    Interval(String),
}

impl SolveError {
    pub fn is_integrity(&self) -> bool {
        matches!(self, SolveError::Decode(DecodeError::Integrity { .. }))
    }
}

/// Runs `script` through the configured solver and returns its first verdict.
pub fn check(script: &str, cfg: &SolverConfig) -> Result<CheckOutcome, SolveError> {
    let mut child = Command::new(&cfg.executable)
        .args(&cfg.extra_args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolveError::Spawn {
            path: cfg.executable.display().to_string(),
            source,
        })?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let script = script.to_string();
    // A solver that exits early closes the pipe; its output says why.
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let deadline = Instant::now() + cfg.timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => {
                return Err(SolveError::Transport {
                    message: format!("waiting for solver: {e}"),
                    stdout: String::new(),
                    stderr: String::new(),
                })
            }
        }
    };
    let _ = writer.join();
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    let Some(status) = status else {
        return Ok(CheckOutcome::Timeout);
    };
    let transport = |message: String| SolveError::Transport {
        message,
        stdout: out.clone(),
        stderr: err.clone(),
    };
    let trimmed = out.trim_start();
    let (verdict, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    match verdict.trim() {
        "sat" => {
            if rest.contains("(error") {
                return Err(transport("solver reported an error while printing the model".into()));
            }
            Ok(CheckOutcome::Sat(rest.to_string()))
        }
        "unsat" => Ok(CheckOutcome::Unsat),
        "unknown" | "timeout" => Ok(CheckOutcome::Unknown),
        other => Err(transport(format!(
            "unexpected solver reply `{other}` (exit status {status})"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionVerdict {
    /// A replay-checked witness satisfies the query.
    Yes,
    /// No run within the step bound satisfies the query.
    No,
    Unknown,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub verdict: DecisionVerdict,
    pub witness: Option<Witness>,
    pub logic: Logic,
    pub seconds: f64,
}

fn within(cmp: Comparator, cost: &Rational, budget: &Rational, tol: &Rational) -> bool {
    match cmp {
        Comparator::Lt | Comparator::Le => cost <= &(budget + tol),
        Comparator::Gt | Comparator::Ge => cost >= &(budget - tol),
        Comparator::Eq => (cost - budget).abs() <= *tol,
        Comparator::Ne => true,
    }
}

/// Script text as sent to the solver: nonlinear queries ask for decimal
/// model values at the configured precision.
pub fn solver_script(script: &encode::SmtScript, cfg: &SolverConfig) -> String {
    match script.instance.logic {
        Logic::QfLra => script.text.clone(),
        Logic::QfNra => script.text.replacen(
            "(check-sat)",
            &format!(
                "(set-option :pp.decimal true)\n(set-option :pp.decimal_precision {})\n(check-sat)",
                cfg.model_precision
            ),
            1,
        ),
    }
}

/// Decides `q` with the solver. A `Yes` always carries a replayed witness
/// whose cost satisfies the comparison (exactly for linear prices, within
/// the model tolerance otherwise).
pub fn decide(net: &Network, q: &Query, cfg: &SolverConfig) -> Result<Decision, SolveError> {
    let script = encode::encode(net, q)?;
    let logic = script.instance.logic;
    let started = Instant::now();
    let outcome = check(&solver_script(&script, cfg), cfg)?;
    let seconds = started.elapsed().as_secs_f64();
    let done = |verdict, witness| Decision {
        verdict,
        witness,
        logic,
        seconds,
    };
    match outcome {
        CheckOutcome::Sat(model) => {
            let tol = (logic == Logic::QfNra).then(|| cfg.tolerance());
            let witness = encode::decode_model(net, &script.instance, &model, tol.as_ref())?;
            let ok = match &tol {
                None => q.cmp.holds(&witness.cost, &q.budget),
                Some(t) => within(q.cmp, &witness.cost, &q.budget, t),
            };
            if !ok {
                return Err(DecodeError::Integrity {
                    step: q.steps as usize,
                    detail: format!(
                        "replayed cost {} violates {} {}",
                        rational::format(&witness.cost),
                        q.cmp.symbol(),
                        rational::format(&q.budget)
                    ),
                }
                .into());
            }
            Ok(done(DecisionVerdict::Yes, Some(witness)))
        }
        CheckOutcome::Unsat => Ok(done(DecisionVerdict::No, None)),
        CheckOutcome::Unknown => Ok(done(DecisionVerdict::Unknown, None)),
        CheckOutcome::Timeout => Ok(done(DecisionVerdict::Timeout, None)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    /// `lower == upper`, attained by the witness, all answers exact.
    Optimal,
    BoundsOnly,
    Infeasible,
    Unknown,
}

impl OptStatus {
    pub fn name(self) -> &'static str {
        match self {
            OptStatus::Optimal => "optimal",
            OptStatus::BoundsOnly => "bounds-only",
            OptStatus::Infeasible => "infeasible",
            OptStatus::Unknown => "unknown",
        }
    }
}

/// One decision query issued by [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub cmp: Comparator,
    pub budget: Rational,
    pub verdict: DecisionVerdict,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub status: OptStatus,
    /// Certified: no run within the step bound costs less than this.
    pub lower: Option<Rational>,
    /// Cost of `witness`.
    pub upper: Option<Rational>,
    pub witness: Option<Witness>,
    pub solver_seconds: f64,
    pub probes: Vec<Probe>,
}

/// Step-bounded optimal cost from `from` to `to` by binary search over
/// budgets in `[lo, hi]`, stopping once the bracket is at most `gamma` wide.
///
/// Every admitted probe tightens `upper` to the witness's replayed cost,
/// and a final strict probe below `upper` certifies optimality when refuted.
#[allow(clippy::too_many_arguments)]
pub fn minimize(
    net: &Network,
    from: &LocationSelection,
    to: &LocationSelection,
    steps: u32,
    cfg: &SolverConfig,
    lo: &Rational,
    hi: &Rational,
    gamma: &Rational,
) -> Result<OptResult, SolveError> {
    if lo > hi {
        return Err(SolveError::Interval(format!(
            "lo {} > hi {}",
            rational::format(lo),
            rational::format(hi)
        )));
    }
    if !gamma.is_positive() {
        return Err(SolveError::Interval("gamma must be positive".into()));
    }
    let mut res = OptResult {
        status: OptStatus::BoundsOnly,
        lower: None,
        upper: None,
        witness: None,
        solver_seconds: 0.0,
        probes: Vec::new(),
    };
    let mut exact = true;
    let mut probe = |res: &mut OptResult, cmp: Comparator, budget: &Rational| -> Result<DecisionVerdict, SolveError> {
        let q = Query {
            source: from.clone(),
            target: to.clone(),
            steps,
            budget: budget.clone(),
            cmp,
        };
        let d = decide(net, &q, cfg)?;
        exact &= d.logic == Logic::QfLra;
        res.solver_seconds += d.seconds;
        res.probes.push(Probe {
            cmp,
            budget: budget.clone(),
            verdict: d.verdict,
            seconds: d.seconds,
        });
        if let Some(w) = d.witness {
            if res.upper.as_ref().is_none_or(|u| &w.cost < u) {
                res.upper = Some(w.cost.clone());
                res.witness = Some(w);
            }
        }
        Ok(d.verdict)
    };

    match probe(&mut res, Comparator::Le, hi)? {
        DecisionVerdict::Yes => {}
        DecisionVerdict::No => {
            res.status = OptStatus::Infeasible;
            res.lower = Some(hi.clone());
            return Ok(res);
        }
        DecisionVerdict::Unknown | DecisionVerdict::Timeout => {
            res.status = OptStatus::Unknown;
            return Ok(res);
        }
    }
    let mut floor = lo.clone();
    loop {
        let upper = res.upper.clone().expect("admitted");
        if &upper - &floor <= *gamma {
            break;
        }
        let mid = (&floor + &upper) / Rational::from_integer(2.into());
        match probe(&mut res, Comparator::Le, &mid)? {
            DecisionVerdict::Yes => {}
            DecisionVerdict::No => {
                res.lower = Some(mid.clone());
                floor = mid;
            }
            DecisionVerdict::Unknown | DecisionVerdict::Timeout => {
                res.status = OptStatus::Unknown;
                return Ok(res);
            }
        }
    }
    // Optima of small-constant instances tend to be simple rationals; a
    // probe at the simplest budget in the bracket often lands on one.
    let upper = res.upper.clone().expect("admitted");
    let simple = rational::simplest_between(&floor, &upper);
    // An unrefuted floor is the caller's `lo` and may itself be the optimum.
    if simple < upper && (simple > floor || res.lower.is_none()) {
        match probe(&mut res, Comparator::Le, &simple)? {
            DecisionVerdict::Yes => {}
            DecisionVerdict::No => res.lower = Some(simple),
            DecisionVerdict::Unknown | DecisionVerdict::Timeout => {
                res.status = OptStatus::Unknown;
                return Ok(res);
            }
        }
    }
    let upper = res.upper.clone().expect("admitted");
    match probe(&mut res, Comparator::Lt, &upper)? {
        DecisionVerdict::No => {
            res.lower = Some(upper);
            if exact {
                res.status = OptStatus::Optimal;
            }
        }
        DecisionVerdict::Yes => {}
        DecisionVerdict::Unknown | DecisionVerdict::Timeout => res.status = OptStatus::Unknown,
    }
    Ok(res)
}

/// Solver-backed cost bounds for the sandwich decision procedure.
#[derive(Debug, Clone)]
pub struct SmtEngine {
    pub cfg: SolverConfig,
    /// Largest budget probed.
    pub hi: Rational,
    pub gamma: Rational,
}

impl CostBoundEngine for SmtEngine {
    fn bounds(
        &self,
        net: &Network,
        from: &LocationSelection,
        to: &LocationSelection,
        steps: u32,
    ) -> Result<CostBounds, String> {
        let r = minimize(
            net,
            from,
            to,
            steps,
            &self.cfg,
            &Rational::zero(),
            &self.hi,
            &self.gamma,
        )
        .map_err(|e| e.to_string())?;
        match r.status {
            OptStatus::Infeasible => Ok(CostBounds::Infeasible),
            OptStatus::Unknown => Err("solver returned unknown".into()),
            OptStatus::Optimal | OptStatus::BoundsOnly => Ok(CostBounds::Bounds {
                lower: r.lower.unwrap_or_else(Rational::zero),
                upper: r.upper,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Automaton, CmpOp, Edge, Guard, Location, PriceFunction};
    use crate::rational::{int, ratio};
    use crate::semantics::{EdgeRef, Step};

    fn solver_available() -> bool {
        check("(check-sat)\n", &SolverConfig::default()).is_ok()
    }

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

    fn query(budget: Rational) -> Query {
        Query {
            source: sel("l0"),
            target: sel("goal"),
            steps: 2,
            budget,
            cmp: Comparator::Le,
        }
    }

    #[test]
    fn tolerance_from_precision() {
        assert_eq!(SolverConfig::default().tolerance(), ratio(1, 1_000_000_000_000_000_000));
    }

    #[test]
    fn verdicts() {
        if !solver_available() {
            eprintln!("skipping: no solver");
            return;
        }
        let cfg = SolverConfig::default();
        assert_eq!(
            check("(assert false)\n(check-sat)\n", &cfg).unwrap(),
            CheckOutcome::Unsat
        );
        assert!(matches!(
            check("(check-sat)\n(get-model)\n", &cfg).unwrap(),
            CheckOutcome::Sat(_)
        ));
        assert!(matches!(check("(bogus)\n", &cfg), Err(SolveError::Transport { .. })));
        let missing = SolverConfig {
            executable: "/nonexistent/solver".into(),
            ..cfg
        };
        assert!(matches!(
            check("(check-sat)\n", &missing),
            Err(SolveError::Spawn { .. })
        ));
    }

    #[test]
    fn decide_rate_two() {
        if !solver_available() {
            return;
        }
        let cfg = SolverConfig::default();
        let net = rate_two();
        let yes = decide(&net, &query(int(7)), &cfg).unwrap();
        assert_eq!(yes.verdict, DecisionVerdict::Yes);
        let w = yes.witness.unwrap();
        assert_eq!(w.cost, int(7));
        assert_eq!(
            w.run.steps,
            vec![Step::Delay(int(3)), Step::Switch(EdgeRef::new("A", 0))]
        );
        assert_eq!(
            decide(&net, &query(ratio(6999, 1000)), &cfg).unwrap().verdict,
            DecisionVerdict::No
        );
        let mut unreachable = query(int(1000));
        unreachable.source = sel("goal");
        unreachable.target = sel("l0");
        assert_eq!(decide(&net, &unreachable, &cfg).unwrap().verdict, DecisionVerdict::No);
    }

    #[test]
    fn minimize_rate_two() {
        if !solver_available() {
            return;
        }
        let cfg = SolverConfig::default();
        let net = rate_two();
        let r = minimize(
            &net,
            &sel("l0"),
            &sel("goal"),
            2,
            &cfg,
            &int(0),
            &int(100),
            &ratio(1, 100),
        )
        .unwrap();
        assert_eq!(r.status, OptStatus::Optimal);
        assert_eq!(r.upper, Some(int(7)));
        assert_eq!(r.lower, Some(int(7)));
        assert_eq!(r.witness.unwrap().cost, int(7));
        let lowers: Vec<_> = r
            .probes
            .iter()
            .filter(|p| p.verdict == DecisionVerdict::No)
            .map(|p| p.budget.clone())
            .collect();
        assert!(lowers.windows(2).all(|w| w[0] <= w[1]));

        // Witnesses of this instance shrink geometrically towards an optimum of 0.
        let (net0, q0) = crate::oracle::random_instance(11, &crate::oracle::SizeParams::default());
        let zero = minimize(
            &net0,
            &q0.source,
            &q0.target,
            q0.steps,
            &cfg,
            &int(0),
            &q0.budget,
            &ratio(1, 1000),
        )
        .unwrap();
        assert_eq!((zero.status, zero.upper), (OptStatus::Optimal, Some(int(0))));

        let same = minimize(&net, &sel("l0"), &sel("l0"), 0, &cfg, &int(0), &int(10), &ratio(1, 100)).unwrap();
        assert_eq!(same.status, OptStatus::Optimal);
        assert_eq!(same.upper, Some(int(0)));

        let none = minimize(
            &net,
            &sel("goal"),
            &sel("l0"),
            3,
            &cfg,
            &int(0),
            &int(10),
            &ratio(1, 100),
        )
        .unwrap();
        assert_eq!(none.status, OptStatus::Infeasible);
    }

    #[test]
    fn timeout_kills_the_process() {
        if !solver_available() {
            return;
        }
        // Nonlinear integer search z3 cannot finish quickly.
        let script = "(declare-fun a () Int)(declare-fun b () Int)(declare-fun c () Int)\n\
            (assert (> a 0))(assert (> b 0))(assert (> c 0))\n\
            (assert (= (+ (* a a a) (* b b b)) (* c c c)))\n(check-sat)\n";
        let cfg = SolverConfig::default().with_timeout(Duration::from_secs(1));
        let started = Instant::now();
        assert_eq!(check(script, &cfg).unwrap(), CheckOutcome::Timeout);
        assert!(started.elapsed() < Duration::from_secs(5));
    }
}
