//! RDFS sub-property and sub-class entailment.
//!
//! A [`Closure`] is computed once from an [`Ontology`] and consulted at match
//! time. The entailed variants of a stored triple are generated on the fly,
//! including inside quoted triples, so no graph is ever materialized.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{unify_triple, Binding, Graph, PatternSource, PatternTerm, Term, Triple, TriplePattern};
use crate::model::Iri;
use crate::vocab;

/// Asserted `rdfs:subPropertyOf` and `rdfs:subClassOf` axioms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    pub sub_properties: BTreeSet<(Iri, Iri)>,
    pub sub_classes: BTreeSet<(Iri, Iri)>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects the axioms of `graph`. Triples with other predicates, or with
    /// non-IRI ends, are ignored.
    pub fn from_graph(graph: &Graph) -> Self {
        let mut ontology = Self::new();
        ontology.add_graph(graph);
        ontology
    }

    pub fn add_graph(&mut self, graph: &Graph) {
        let sub_property = vocab::rdfs::sub_property_of();
        let sub_class = vocab::rdfs::sub_class_of();
        for t in graph.iter() {
            let target = if *t.predicate() == sub_property {
                &mut self.sub_properties
            } else if *t.predicate() == sub_class {
                &mut self.sub_classes
            } else {
                continue;
            };
            match (t.subject().as_iri(), t.object().as_iri()) {
                (Some(s), Some(o)) => {
                    target.insert((s.clone(), o.clone()));
                }
                _ => log::warn!("ignoring non-IRI axiom {t}"),
            }
        }
    }

    pub fn add_sub_property(&mut self, sub: Iri, sup: Iri) {
        self.sub_properties.insert((sub, sup));
    }

    pub fn add_sub_class(&mut self, sub: Iri, sup: Iri) {
        self.sub_classes.insert((sub, sup));
    }

    pub fn is_empty(&self) -> bool {
        self.sub_properties.is_empty() && self.sub_classes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sub_properties.len() + self.sub_classes.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Hierarchy {
    up: BTreeMap<Iri, BTreeSet<Iri>>,
    down: BTreeMap<Iri, BTreeSet<Iri>>,
}

impl Hierarchy {
    fn new(axioms: &BTreeSet<(Iri, Iri)>) -> Self {
        let mut edges: BTreeMap<&Iri, Vec<&Iri>> = BTreeMap::new();
        let mut reverse: BTreeMap<&Iri, Vec<&Iri>> = BTreeMap::new();
        for (sub, sup) in axioms {
            edges.entry(sub).or_default().push(sup);
            reverse.entry(sup).or_default().push(sub);
        }
        let nodes: BTreeSet<&Iri> = axioms.iter().flat_map(|(a, b)| [a, b]).collect();
        let mut up = BTreeMap::new();
        let mut down = BTreeMap::new();
        for n in nodes {
            up.insert(n.clone(), reach(n, &edges));
            down.insert(n.clone(), reach(n, &reverse));
        }
        Self { up, down }
    }

    fn above(&self, x: &Iri) -> BTreeSet<Iri> {
        self.up.get(x).cloned().unwrap_or_else(|| BTreeSet::from([x.clone()]))
    }

    fn below(&self, x: &Iri) -> BTreeSet<Iri> {
        self.down.get(x).cloned().unwrap_or_else(|| BTreeSet::from([x.clone()]))
    }

    fn leq(&self, a: &Iri, b: &Iri) -> bool {
        a == b || self.up.get(a).is_some_and(|s| s.contains(b))
    }
}

fn reach(start: &Iri, edges: &BTreeMap<&Iri, Vec<&Iri>>) -> BTreeSet<Iri> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for next in edges.get(n).into_iter().flatten() {
            if seen.insert((*next).clone()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Reflexive-transitive closure of an ontology.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Closure {
    properties: Hierarchy,
    classes: Hierarchy,
}

impl Closure {
    pub fn new(ontology: &Ontology) -> Self {
        Self {
            properties: Hierarchy::new(&ontology.sub_properties),
            classes: Hierarchy::new(&ontology.sub_classes),
        }
    }

    /// The closure of the empty ontology.
    pub fn empty() -> Self {
        Self::default()
    }

    /// `{q | q ⊑* p}`
    pub fn sub_properties_of(&self, p: &Iri) -> BTreeSet<Iri> {
        self.properties.below(p)
    }

    /// `{q | p ⊑* q}`
    pub fn super_properties_of(&self, p: &Iri) -> BTreeSet<Iri> {
        self.properties.above(p)
    }

    pub fn sub_classes_of(&self, c: &Iri) -> BTreeSet<Iri> {
        self.classes.below(c)
    }

    pub fn super_classes_of(&self, c: &Iri) -> BTreeSet<Iri> {
        self.classes.above(c)
    }

    pub fn is_sub_property(&self, sub: &Iri, sup: &Iri) -> bool {
        self.properties.leq(sub, sup)
    }

    pub fn is_sub_class(&self, sub: &Iri, sup: &Iri) -> bool {
        self.classes.leq(sub, sup)
    }

    pub fn is_trivial(&self) -> bool {
        self.properties.up.is_empty() && self.classes.up.is_empty()
    }

    /// Every triple entailed by `triple` alone, itself included.
    pub fn entailed_triples(&self, triple: &Triple) -> BTreeSet<Triple> {
        if self.is_trivial() {
            return BTreeSet::from([triple.clone()]);
        }
        let rdf_type = vocab::rdf::type_();
        let subjects = self.term_variants(triple.subject());
        let objects = self.term_variants(triple.object());
        let predicates = self.super_properties_of(triple.predicate());
        let typed = predicates.contains(&rdf_type);
        let type_supers = if typed { self.super_properties_of(&rdf_type) } else { BTreeSet::new() };
        let mut out = BTreeSet::new();
        for s in &subjects {
            for o in &objects {
                for p in &predicates {
                    out.insert(Triple::from_parts_unchecked(s.clone(), p.clone(), o.clone()));
                }
                if let (true, Term::Iri(class)) = (typed, o) {
                    for c in self.super_classes_of(class) {
                        for p in &type_supers {
                            out.insert(Triple::from_parts_unchecked(s.clone(), p.clone(), Term::Iri(c.clone())));
                        }
                    }
                }
            }
        }
        out
    }

    fn term_variants(&self, term: &Term) -> Vec<Term> {
        match term {
            Term::Triple(t) => self
                .entailed_triples(t)
                .into_iter()
                .map(|v| Term::Triple(v.into()))
                .collect(),
            other => vec![other.clone()],
        }
    }
}

/// A graph viewed through a closure: patterns match entailed triples too.
#[derive(Debug, Clone, Copy)]
pub struct EntailedGraph<'a> {
    pub graph: &'a Graph,
    pub closure: &'a Closure,
}

impl<'a> EntailedGraph<'a> {
    pub fn new(graph: &'a Graph, closure: &'a Closure) -> Self {
        Self { graph, closure }
    }
}

impl PatternSource for EntailedGraph<'_> {
    fn extend_matches(&self, pattern: &TriplePattern, seed: &Binding, out: &mut Vec<Binding>) {
        if self.closure.is_trivial() {
            return self.graph.extend_matches(pattern, seed, out);
        }
        let fixed = match &pattern.predicate {
            PatternTerm::Term(Term::Iri(p)) => Some(p.clone()),
            PatternTerm::Var(v) => seed.get(v).and_then(Term::as_iri).cloned(),
            _ => None,
        };
        let mut visit = |t: &Triple| {
            for variant in self.closure.entailed_triples(t) {
                let mut b = seed.clone();
                if unify_triple(pattern, &variant, &mut b) {
                    out.push(b);
                }
            }
        };
        match fixed {
            Some(p) => {
                for q in self.closure.sub_properties_of(&p) {
                    self.graph.with_predicate(&q).for_each(&mut visit);
                }
            }
            None => self.graph.iter().for_each(&mut visit),
        }
    }
}

/// Matches `pattern` against `graph` under `closure`.
pub fn entailed_match(
    pattern: &TriplePattern,
    graph: &Graph,
    closure: &Closure,
    seed: &Binding,
) -> BTreeSet<Binding> {
    let mut out = Vec::new();
    EntailedGraph::new(graph, closure).extend_matches(pattern, seed, &mut out);
    out.into_iter().collect()
}

/// Adds every entailed triple to a copy of `graph`.
pub fn materialize(graph: &Graph, closure: &Closure) -> Graph {
    graph.iter().flat_map(|t| closure.entailed_triples(t)).collect()
}
