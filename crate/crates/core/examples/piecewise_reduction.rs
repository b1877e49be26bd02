//! Rewrite a piecewise-priced automaton into a linearly priced one and move
//! a run across the reduction without changing its cost.

use pta::model::{Automaton, CmpOp, Edge, Guard, LinearPiece, Location, Network, PriceFunction, PwlStructure};
use pta::pwl2lpta::{lift_run, project_run, transform};
use pta::rational::{int, ratio};
use pta::semantics::{replay, Configuration, EdgeRef, Run, Step};

fn main() {
    let warmup = PwlStructure {
        points: vec![int(0), int(2)],
        point_values: vec![int(0), int(5)],
        pieces: vec![LinearPiece::new(int(2), int(0)), LinearPiece::new(int(1), int(3))],
        integral: true,
    };
    let mut a = Automaton::new("A");
    a.clocks.push("x".into());
    a.locations
        .push(Location::new("warmup").with_price(PriceFunction::Piecewise(warmup)));
    a.locations.push(Location::new("done"));
    a.edges.push(
        Edge::new("warmup", "done")
            .with_guard(Guard::atom("x", CmpOp::Ge, 1))
            .with_price(2),
    );
    a.initial = Some("warmup".into());
    let net = Network::single(a);

    let (image, map) = transform(&net).expect("transformable");
    for l in &image.automata[0].locations {
        println!("{:<16} {:?}", l.id, l.price);
    }

    for dwell in [ratio(3, 2), int(2), int(3)] {
        let run = Run {
            start: Configuration::initial(&net, vec!["warmup".into()]).expect("start"),
            steps: vec![Step::Delay(dwell.clone()), Step::Switch(EdgeRef::new("A", 0))],
        };
        let lifted = lift_run(&net, &image, &run, &map).expect("lift");
        let back = project_run(&net, &image, &lifted, &map).expect("project");
        println!(
            "dwell {dwell}: cost {} original, {} image, starts at {}, round trip {}",
            replay(&net, &run).expect("replay").1,
            replay(&image, &lifted).expect("replay").1,
            lifted.start.locs[0],
            if back == run { "exact" } else { "differs" },
        );
    }
}
