use pta::gens::two_counter::{compile, gen_two_counter, parse_program, simulate};
use pta::semantics::replay;
use pta::solve::{decide, SolverConfig};
use std::time::Duration;

fn main() {
    let program = parse_program("inc c 1\ninc c 2\ndec c 3\nhalt\n").expect("program");
    let model = compile(&program).expect("compile");
    let sim = simulate(&model, None, 100).expect("correct simulation");
    let (_, cost) = replay(&model.network, &sim.run).expect("replay");
    println!("correct run: {} steps, cost {cost}", sim.run.steps.len());

    let doc = gen_two_counter(&program).expect("generate");
    let cfg = SolverConfig::default().with_timeout(Duration::from_secs(30));
    match decide(&doc.network, &doc.queries[0], &cfg) {
        Ok(d) => println!("solver: {:?} in {:.2}s", d.verdict, d.seconds),
        Err(e) => println!("solver error: {e}"),
    }
}
