//! Generate an airport landing instance, solve it under the fixed budget and
//! check the decoded schedule independently of the automaton semantics.

use pta::gens::alp::{desk_instance, gen_alp, validate_schedule, DEFAULT_BUDGET};
use pta::rational::Rational;
use pta::solve::{decide, DecisionVerdict, SolverConfig};

fn main() {
    let inst = desk_instance(3, 2);
    let doc = gen_alp(&inst, Rational::from_integer(DEFAULT_BUDGET.into())).expect("instance");
    let d = decide(&doc.network, &doc.queries[0], &SolverConfig::default()).expect("solver");
    println!("{:?} in {:.2}s", d.verdict, d.seconds);
    if d.verdict == DecisionVerdict::Yes {
        let w = d.witness.expect("witness");
        for l in validate_schedule(&inst, &w.run).expect("valid schedule") {
            println!("plane {} on runway {} at {}", l.plane, l.runway, l.time);
        }
        println!("cost {}", w.cost);
    }
}
