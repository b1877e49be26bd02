//! Bracket a Lipschitz price between piecewise-linear bounds and decide a
//! budget up to ε through the two bounding automata.

use pta::expr::Expr;
use pta::lipschitz::{eps_decide, sandwich, ApproxConfig};
use pta::model::{Automaton, CmpOp, Edge, Guard, Location, Network, PriceFunction};
use pta::rational::{int, ratio};
use pta::solve::{SmtEngine, SolverConfig};

fn main() {
    // t^2 + 1 on [0, 3]: Lipschitz constant 6.
    let price = Expr::Add(vec![Expr::dwell().pow(2), Expr::constant(int(1))]);
    let (lo, hi) = sandwich(&price, &int(6), &int(3), &int(1)).expect("sandwich");
    for t in [ratio(1, 2), int(1), ratio(5, 2)] {
        let f = price.eval(&|v| (v == "t").then(|| t.clone())).expect("eval");
        println!("t = {t}: {} <= {f} <= {}", lo.eval(&t), hi.eval(&t));
    }

    let mut a = Automaton::new("A");
    a.clocks.push("x".into());
    a.locations
        .push(Location::new("burn").with_price(PriceFunction::Lipschitz {
            expr: price,
            lipschitz: int(6),
            clock_bound: int(3),
        }));
    a.locations.push(Location::new("done"));
    a.edges
        .push(Edge::new("burn", "done").with_guard(Guard::atom("x", CmpOp::Ge, 1).and("x", CmpOp::Le, 3)));
    a.initial = Some("burn".into());
    let net = Network::single(a);

    let cfg = ApproxConfig::for_network(&net, ratio(1, 2), 1).expect("config");
    println!("delta = {}", cfg.delta);
    let engine = SmtEngine {
        cfg: SolverConfig::default(),
        hi: int(100),
        gamma: ratio(1, 1000),
    };
    let from = [("A".to_string(), "burn".to_string())].into();
    let to = [("A".to_string(), "done".to_string())].into();
    for budget in [int(1), int(2), int(3)] {
        let d = eps_decide(&net, &from, &to, 2, &budget, &cfg, &engine).expect("decide");
        println!(
            "budget {budget}: {} (lower {:?}, upper {:?})",
            d.verdict,
            d.lower.map(|q| q.to_string()),
            d.upper.map(|q| q.to_string())
        );
    }
}
