//! Exact optima of random closed-guard instances by integer-delay enumeration.

use pta::oracle::{opt_cost_exhaustive, random_instance, SizeParams};

fn main() {
    let params = SizeParams::default();
    for seed in 0..8 {
        let (net, q) = random_instance(seed, &params);
        let best = opt_cost_exhaustive(&net, &q.source, &q.target, q.steps, params.max_const).expect("supported");
        let automata: Vec<_> = net.automata.iter().map(|a| a.name.as_str()).collect();
        match best {
            Some(b) => println!(
                "seed {seed} {automata:?} N={}: optimum {} in {} steps",
                q.steps,
                b.cost,
                b.run.steps.len()
            ),
            None => println!("seed {seed} {automata:?} N={}: unreachable", q.steps),
        }
    }
}
