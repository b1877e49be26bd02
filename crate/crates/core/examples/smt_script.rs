//! Print the SMT-LIB2 encoding of a bounded cost query.

use pta::encode::encode;
use pta::parser::parse_model;

fn main() {
    let doc = parse_model(include_str!("../../../models/rate2.json")).expect("model");
    let script = encode(&doc.network, &doc.queries[0]).expect("encode");
    println!("; logic {}", script.instance.logic.name());
    print!("{}", script.text);
}
