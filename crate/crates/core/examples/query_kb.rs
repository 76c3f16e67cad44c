//! Generates a knowledge base and runs a few constraint queries against it.

use std::collections::BTreeMap;

use dialoforge::ontology::{generate_kb, kb_query};
use dialoforge::DomainOntology;

fn main() -> anyhow::Result<()> {
    let ontology = DomainOntology::bundled();
    let kb = generate_kb(&ontology, 7, 50)?;
    println!("{} records, {} foods", kb.len(), ontology.values("food").len());
    for query in [
        vec![("area", "north")],
        vec![("area", "centre"), ("pricerange", "cheap")],
        vec![("food", "indian"), ("pricerange", "expensive")],
    ] {
        let c: BTreeMap<String, String> = query.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let hits = kb_query(&kb, &c)?;
        let names: Vec<&str> = hits.iter().map(|r| r.name.as_str()).collect();
        println!("{c:?}: {} -> {}", hits.len(), names.join(", "));
    }
    Ok(())
}
