//! Benchmark workloads.

use std::sync::Arc;

use semrob_core::engine::{QueryRuntime, StreamElement};
use semrob_core::model::{Graph, Iri, Literal, Triple};
use semrob_core::query::{parse, PrefixMap};
use semrob_core::reasoner::Closure;
use semrob_core::vocab;

pub const TOPIC: &str = "http://ex.org/s";

/// One stream, one pattern, a one-second window.
pub const ONE_PATTERN: &str = "SELECT ?s ?t WHERE {
  STREAM <http://ex.org/s> [RANGE 1s ON <http://ex.org/time>] {
    ?s <http://ex.org/time> ?t .
  }
}";

pub fn runtime(query: &str) -> QueryRuntime {
    let q = parse(query, &PrefixMap::new()).expect("benchmark query parses");
    QueryRuntime::new(q, Arc::new(Closure::empty()))
}

/// `n` single-triple elements, 10 ms apart in application time.
pub fn elements(n: usize) -> Vec<StreamElement> {
    let topic = Iri::new(TOPIC).unwrap();
    let time = Iri::new("http://ex.org/time").unwrap();
    (0..n)
        .map(|i| {
            let s = Iri::new(format!("http://ex.org/e{i}")).unwrap();
            let t = Literal::new((i as u64 * 10).to_string(), vocab::xsd::integer());
            let g: Graph = [Triple::new(s, time.clone(), t).unwrap()].into_iter().collect();
            StreamElement::new(topic.clone(), g, i as u64)
        })
        .collect()
}

/// Ingests everything and returns the number of result bindings emitted.
pub fn drive(runtime: &mut QueryRuntime, elements: Vec<StreamElement>) -> usize {
    elements
        .into_iter()
        .map(|e| runtime.ingest(e).expect("well-formed element").bindings.len())
        .sum()
}
