//! Build a one-clock automaton in code and replay a canonical run.

use pta::model::{Automaton, CmpOp, Edge, Guard, Location, Network, PriceFunction};
use pta::rational::int;
use pta::semantics::{first_non_canonical, replay, Configuration, EdgeRef, Run, Step};

fn main() {
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
    let net = Network::single(a);

    let start = Configuration::initial(&net, vec!["l0".into()]).expect("start");
    let run = Run {
        start: start.clone(),
        steps: vec![Step::Delay(int(3)), Step::Switch(EdgeRef::new("A", 0))],
    };
    let (end, cost) = replay(&net, &run).expect("admissible");
    println!("reached {} at cost {cost}", end.locs[0]);

    // Two delays in a row are not canonical: nonlinear prices make them non-mergeable.
    let split = [Step::Delay(int(1)), Step::Delay(int(2))];
    println!("first non-canonical step: {:?}", first_non_canonical(&split));

    let early = Run {
        start,
        steps: vec![Step::Delay(int(2)), Step::Switch(EdgeRef::new("A", 0))],
    };
    println!("switching at x = 2: {}", replay(&net, &early).unwrap_err());
}
