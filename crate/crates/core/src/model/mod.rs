//! RDF-star values: terms, triples, graphs, triple patterns and bindings,
//! plus basic graph pattern matching and template substitution.

mod binding;
mod graph;
mod pattern;
mod term;

use std::collections::BTreeSet;

use thiserror::Error;

pub use binding::{join, Binding};
pub use graph::Graph;
pub use pattern::{PatternTerm, TriplePattern, Variable};
pub use term::{BlankNode, Iri, Literal, Term, Triple};

pub(crate) use pattern::unify_triple;


#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),
    #[error("invalid blank node label {0:?}")]
    InvalidBlankNode(String),
    #[error("invalid variable name {0:?}")]
    InvalidVariable(String),
    #[error("literal {0} cannot be a subject")]
    LiteralSubject(String),
    #[error("{0} cannot be a predicate")]
    NonIriPredicate(String),
    #[error("unbound variable ?{0}")]
    UnboundVariable(String),
}

/// Anything triple patterns can be matched against.
pub trait PatternSource {
    /// Pushes every extension of `seed` that maps `pattern` onto the source.
    /// May push duplicates.
    fn extend_matches(&self, pattern: &TriplePattern, seed: &Binding, out: &mut Vec<Binding>);
}

impl PatternSource for Graph {
    fn extend_matches(&self, pattern: &TriplePattern, seed: &Binding, out: &mut Vec<Binding>) {
        let fixed_predicate = match &pattern.predicate {
            PatternTerm::Term(Term::Iri(p)) => Some(p.clone()),
            PatternTerm::Var(v) => seed.get(v).and_then(Term::as_iri).cloned(),
            _ => None,
        };
        match fixed_predicate {
            Some(p) => {
                for t in self.with_predicate(&p) {
                    let mut b = seed.clone();
                    if unify_triple(pattern, t, &mut b) {
                        out.push(b);
                    }
                }
            }
            None => {
                for t in self.iter() {
                    let mut b = seed.clone();
                    if unify_triple(pattern, t, &mut b) {
                        out.push(b);
                    }
                }
            }
        }
    }
}

impl<S: PatternSource + ?Sized> PatternSource for &S {
    fn extend_matches(&self, pattern: &TriplePattern, seed: &Binding, out: &mut Vec<Binding>) {
        (**self).extend_matches(pattern, seed, out)
    }
}

/// Every extension of `seed` that maps `pattern` onto some triple of `graph`.
pub fn match_pattern(pattern: &TriplePattern, graph: &Graph, seed: &Binding) -> BTreeSet<Binding> {
    let mut out = Vec::new();
    graph.extend_matches(pattern, seed, &mut out);
    out.into_iter().collect()
}

/// Natural join of the per-pattern matches. The result does not depend on
/// pattern order; patterns are reordered greedily by how many positions are
/// already fixed.
pub fn match_bgp<S: PatternSource + ?Sized>(
    patterns: &[TriplePattern],
    source: &S,
    seed: &Binding,
) -> BTreeSet<Binding> {
    let mut current: BTreeSet<Binding> = BTreeSet::from([seed.clone()]);
    let mut bound: BTreeSet<Variable> = seed.variables().cloned().collect();
    let mut remaining: Vec<&TriplePattern> = patterns.iter().collect();
    let mut scratch = Vec::new();
    while !remaining.is_empty() && !current.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .max_by_key(|(i, p)| (p.bound_positions(&bound), std::cmp::Reverse(*i)))
            .expect("remaining is non-empty");
        let pattern = remaining.remove(idx);
        let mut next = BTreeSet::new();
        for b in &current {
            scratch.clear();
            source.extend_matches(pattern, b, &mut scratch);
            next.extend(scratch.drain(..));
        }
        pattern.collect_variables(&mut bound);
        current = next;
    }
    current
}

/// Instantiates every template row. Fails on the first unbound variable.
pub fn substitute(template: &[TriplePattern], binding: &Binding) -> Result<Graph, ModelError> {
    template.iter().map(|row| row.instantiate(binding)).collect()
}

/// Union of `substitute` over `bindings`, skipping (and logging) rows that
/// cannot be instantiated instead of failing.
pub fn construct<'a>(
    template: &[TriplePattern],
    bindings: impl IntoIterator<Item = &'a Binding>,
) -> Graph {
    let mut out = Graph::new();
    for binding in bindings {
        for row in template {
            match row.instantiate(binding) {
                Ok(t) => {
                    out.insert(t);
                }
                Err(e) => log::warn!("skipping CONSTRUCT row {row}: {e}"),
            }
        }
    }
    out
}
