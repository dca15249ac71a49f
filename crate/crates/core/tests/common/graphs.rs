//! Arbitrary RDF-star graphs for codec and reasoner properties.

use proptest::prelude::*;
use semrob_core::model::{BlankNode, Graph, Iri, Literal, Term, Triple};
use semrob_core::vocab;

pub fn iri_strategy() -> impl Strategy<Value = Iri> {
    prop_oneof![
        3 => "[a-z]{1,6}".prop_map(|s| Iri::new(format!("http://ex.org/{s}")).unwrap()),
        1 => "[a-zA-Z0-9_#/:.~%&=?;,+!$'()*@é中-]{1,12}".prop_map(|s| Iri::new(format!("urn:x:{s}")).unwrap()),
    ]
}

pub fn blank_strategy() -> impl Strategy<Value = BlankNode> {
    "[a-zA-Z0-9_-]{1,8}".prop_map(|s| BlankNode::new(s).unwrap())
}

pub fn literal_strategy() -> impl Strategy<Value = Literal> {
    let datatype = prop_oneof![
        Just(vocab::xsd::string()),
        Just(vocab::xsd::integer()),
        Just(vocab::xsd::date_time()),
        iri_strategy(),
    ];
    let lexical = prop_oneof![
        2 => any::<String>(),
        1 => "[a-z \"\\\\\n\r\t]{0,10}",
        1 => any::<i64>().prop_map(|n| n.to_string()),
    ];
    (lexical, datatype).prop_map(|(l, d)| Literal::new(l, d))
}

fn subject_leaf() -> impl Strategy<Value = Term> {
    prop_oneof![3 => iri_strategy().prop_map(Term::Iri), 1 => blank_strategy().prop_map(Term::BlankNode)]
}

fn object_leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        2 => iri_strategy().prop_map(Term::Iri),
        1 => blank_strategy().prop_map(Term::BlankNode),
        2 => literal_strategy().prop_map(Term::Literal),
    ]
}

/// A triple whose subject and object may quote triples up to `depth` levels.
pub fn rdf_star_triple(depth: u32) -> BoxedStrategy<Triple> {
    let flat = (subject_leaf(), iri_strategy(), object_leaf())
        .prop_map(|(s, p, o)| Triple::new(s, p, o).unwrap())
        .boxed();
    if depth == 0 {
        return flat;
    }
    let inner = rdf_star_triple(depth - 1);
    let subject = prop_oneof![2 => subject_leaf(), 1 => inner.clone().prop_map(Term::from)];
    let object = prop_oneof![2 => object_leaf(), 1 => inner.prop_map(Term::from)];
    (subject, iri_strategy(), object)
        .prop_map(|(s, p, o)| Triple::new(s, p, o).unwrap())
        .boxed()
}

pub fn rdf_star_graph(max_triples: usize, depth: u32) -> impl Strategy<Value = Graph> {
    proptest::collection::vec(rdf_star_triple(depth), 0..=max_triples).prop_map(|ts| ts.into_iter().collect())
}
