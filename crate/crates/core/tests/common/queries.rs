//! Arbitrary valid query syntax trees.

use proptest::prelude::*;
use semrob_core::model::{Iri, Literal, PatternTerm, Term, TriplePattern, Variable};
use semrob_core::query::{Query, RangeWindow, ResultForm, Selector, StreamPattern};
use semrob_core::vocab;

fn iri() -> impl Strategy<Value = Iri> {
    prop_oneof![
        4 => "[a-z]{1,5}".prop_map(|s| Iri::new(format!("http://ex.org/{s}")).unwrap()),
        1 => "[a-zA-Z0-9_#/:.~%-]{1,10}".prop_map(|s| Iri::new(format!("urn:q:{s}")).unwrap()),
        1 => Just(vocab::rdf::type_()),
    ]
}

fn var() -> impl Strategy<Value = Variable> {
    prop_oneof![
        3 => "[a-e]".prop_map(|s| Variable::new(s).unwrap()),
        1 => "[a-zA-Z_][a-zA-Z0-9_]{0,6}".prop_map(|s| Variable::new(s).unwrap()),
    ]
}

fn literal() -> impl Strategy<Value = Literal> {
    let lexical = prop_oneof![
        "[^\n]{0,8}",
        "[a-z \"\\\\\r\t]{0,8}",
        any::<u32>().prop_map(|n| n.to_string()),
    ];
    let datatype = prop_oneof![
        Just(vocab::xsd::string()),
        Just(vocab::xsd::integer()),
        Just(vocab::xsd::date_time()),
        iri(),
    ];
    (lexical, datatype).prop_map(|(l, d)| Literal::new(l, d))
}

fn pattern(depth: u32) -> BoxedStrategy<TriplePattern> {
    let subject_leaf = prop_oneof![
        2 => var().prop_map(PatternTerm::Var),
        2 => iri().prop_map(|i| PatternTerm::Term(Term::Iri(i))),
    ];
    let object_leaf = prop_oneof![
        3 => var().prop_map(PatternTerm::Var),
        2 => iri().prop_map(|i| PatternTerm::Term(Term::Iri(i))),
        2 => literal().prop_map(|l| PatternTerm::Term(Term::Literal(l))),
    ];
    let predicate = prop_oneof![
        1 => var().prop_map(PatternTerm::Var),
        3 => iri().prop_map(|i| PatternTerm::Term(Term::Iri(i))),
    ];
    if depth == 0 {
        return (subject_leaf, predicate, object_leaf)
            .prop_map(|(subject, predicate, object)| TriplePattern { subject, predicate, object })
            .boxed();
    }
    let inner = pattern(depth - 1);
    let subject = prop_oneof![
        3 => subject_leaf,
        1 => inner.clone().prop_map(|p| PatternTerm::Quoted(Box::new(p))),
    ];
    let object = prop_oneof![
        3 => object_leaf,
        1 => inner.prop_map(|p| PatternTerm::Quoted(Box::new(p))),
    ];
    (subject, predicate, object)
        .prop_map(|(subject, predicate, object)| TriplePattern { subject, predicate, object })
        .boxed()
}

fn stream() -> impl Strategy<Value = StreamPattern> {
    let selector = prop_oneof![3 => iri().prop_map(Selector::Iri), 1 => var().prop_map(Selector::Var)];
    (selector, 1u64..=86_400_000, iri(), proptest::collection::vec(pattern(2), 1..4)).prop_map(
        |(selector, range_ms, on, patterns)| StreamPattern { selector, window: RangeWindow { range_ms, on }, patterns },
    )
}

/// Queries that pass [`Query::validate`].
pub fn query_strategy() -> impl Strategy<Value = Query> {
    let body = (
        proptest::collection::vec(stream(), 1..3),
        proptest::collection::vec(pattern(1), 0..3),
    );
    (body, any::<bool>(), proptest::option::of(iri()), proptest::collection::vec(pattern(1), 0..3), any::<prop::sample::Index>(), 1usize..4)
        .prop_map(|((streams, statics), select, register, template, pick, count)| {
            let mut q = Query { register: None, form: ResultForm::Construct(template), streams, statics };
            if select && !q.where_variables().is_empty() {
                let vars: Vec<Variable> = q.where_variables().into_iter().collect();
                let start = pick.index(vars.len());
                let chosen = vars.iter().cycle().skip(start).take(count.min(vars.len())).cloned().collect();
                q.form = ResultForm::Select(chosen);
            } else {
                q.register = register;
            }
            q
        })
        .prop_filter("select needs a WHERE variable", |q| q.validate().is_ok())
}
