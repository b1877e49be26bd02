//! Parse the JSON model format and report diagnostics with JSON paths.

use pta::parser::{parse_model, parse_model_unchecked, price_to_json};

const GOOD: &str = r#"{
  "version": "pta-1",
  "automata": [{
    "name": "A", "clocks": ["x"],
    "locations": [
      {"id": "l0", "price": {"kind": "piecewise", "points": [0, 2], "values": [0, 5], "pieces": [[2, 0], [1, 3]]}},
      {"id": "goal"}
    ],
    "edges": [{"from": "l0", "to": "goal", "guard": [["x", ">=", 1]]}],
    "initial": "l0"
  }]
}"#;

fn main() {
    let doc = parse_model(GOOD).expect("valid model");
    for l in &doc.network.automata[0].locations {
        println!("{}: {}", l.id, price_to_json(&l.price));
    }

    let broken = GOOD
        .replace("[0, 2]", "[0, 0]")
        .replace(r#""to": "goal""#, r#""to": "goal", "sync": "c!""#);
    let doc = parse_model_unchecked(&broken).expect("well-formed JSON");
    for d in doc.diagnostics() {
        println!("{}: {}", d.path, d.message);
    }
}
