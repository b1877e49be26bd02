//! Decide budgets and bracket the optimum with an external SMT solver.

use pta::model::Comparator;
use pta::parser::parse_model;
use pta::rational::{int, ratio};
use pta::solve::{decide, minimize, SolverConfig};

fn main() {
    let doc = parse_model(include_str!("../../../models/handshake.json")).expect("model");
    let cfg = SolverConfig::default();
    let mut q = doc.queries[0].clone();
    for (cmp, budget) in [(Comparator::Le, int(9)), (Comparator::Lt, int(9))] {
        q.cmp = cmp;
        q.budget = budget.clone();
        let d = decide(&doc.network, &q, &cfg).expect("solver");
        println!("cost {} {budget}: {:?}", cmp.symbol(), d.verdict);
    }
    let r = minimize(
        &doc.network,
        &q.source,
        &q.target,
        q.steps,
        &cfg,
        &int(0),
        &int(100),
        &ratio(1, 1000),
    )
    .expect("minimize");
    println!(
        "{} in [{:?}, {:?}] after {} probes",
        r.status.name(),
        r.lower.map(|q| q.to_string()),
        r.upper.map(|q| q.to_string()),
        r.probes.len()
    );
    if let Some(w) = r.witness {
        for s in &w.run.steps {
            println!("  {s:?}");
        }
    }
}
