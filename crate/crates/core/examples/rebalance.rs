//! Random rebalancing of one round's cluster assignment.

use rrcluster::cluster_engine::{decode_identifiers, privatize_identifier, rebalance, OneHotIdentifier};
use rrcluster::vecmath::derive_stream;

fn main() -> rrcluster::Result<()> {
    let k = 3;
    let round = derive_stream(7, &[("round", 0)]);
    // most clients pick cluster 0, one picks cluster 1, nobody picks cluster 2
    let choices = [0, 0, 0, 0, 0, 1, 0, 0];
    let mut idents = Vec::new();
    for (id, &j) in choices.iter().enumerate() {
        let s = privatize_identifier(&OneHotIdentifier::one_hot(k, j), 0.1, 0.3, &round.child("client", id as u64))?;
        idents.push((id as u64, s));
    }
    let decoded = decode_identifiers(k, &idents);
    println!("decoded groups:    {:?}", decoded.groups);
    for b in [0, 1, 2] {
        let a = rebalance(&decoded, b, &round.child("rebalance", 0))?;
        println!("B = {b}: groups {:?}", a.groups);
        for m in &a.donors {
            println!("        client {} moved {} -> {}", m.client_id, m.from, m.to);
        }
    }
    match rebalance(&decoded, 3, &round.child("rebalance", 0)) {
        Err(e) => println!("B = 3: {e}"),
        Ok(_) => unreachable!("8 clients cannot give 3 clusters 3 each"),
    }
    Ok(())
}
