use std::cmp::Ordering;
use std::collections::btree_set;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use super::{BlankNode, Iri, Term, Triple};

/// A set of triples, indexed by predicate.
#[derive(Clone, Default)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    by_predicate: BTreeMap<Iri, BTreeSet<Triple>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for Graph {}

impl Hash for Graph {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.triples.hash(state)
    }
}

impl PartialOrd for Graph {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Graph {
    fn cmp(&self, other: &Self) -> Ordering {
        self.triples.cmp(&other.triples)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if !self.triples.insert(triple.clone()) {
            return false;
        }
        self.by_predicate.entry(triple.predicate().clone()).or_default().insert(triple)
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        if !self.triples.remove(triple) {
            return false;
        }
        if let Some(set) = self.by_predicate.get_mut(triple.predicate()) {
            set.remove(triple);
            if set.is_empty() {
                self.by_predicate.remove(triple.predicate());
            }
        }
        true
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> btree_set::Iter<'_, Triple> {
        self.triples.iter()
    }

    pub fn extend_from(&mut self, other: &Graph) {
        self.extend(other.triples.iter().cloned());
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.triples.is_subset(&other.triples)
    }

    /// Triples with the given predicate.
    pub fn with_predicate<'a>(&'a self, predicate: &'a Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_predicate.get(predicate).into_iter().flatten()
    }

    /// Rewrites every blank node label with `f`, including inside quoted triples.
    pub fn map_blank_nodes(&self, f: &impl Fn(&BlankNode) -> BlankNode) -> Graph {
        fn map_term(term: &Term, f: &impl Fn(&BlankNode) -> BlankNode) -> Term {
            match term {
                Term::BlankNode(b) => Term::BlankNode(f(b)),
                Term::Triple(t) => Term::from(map_triple(t, f)),
                other => other.clone(),
            }
        }
        fn map_triple(t: &Triple, f: &impl Fn(&BlankNode) -> BlankNode) -> Triple {
            Triple::from_parts_unchecked(
                map_term(t.subject(), f),
                t.predicate().clone(),
                map_term(t.object(), f),
            )
        }
        self.triples.iter().map(|t| map_triple(t, f)).collect()
    }

    pub fn has_blank_nodes(&self) -> bool {
        fn term_has(term: &Term) -> bool {
            match term {
                Term::BlankNode(_) => true,
                Term::Triple(t) => term_has(t.subject()) || term_has(t.object()),
                _ => false,
            }
        }
        self.triples
            .iter()
            .any(|t| term_has(t.subject()) || term_has(t.object()))
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = Graph::new();
        g.extend(iter);
        g
    }
}

impl Extend<Triple> for Graph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        for t in iter {
            self.insert(t);
        }
    }
}

impl IntoIterator for Graph {
    type Item = Triple;
    type IntoIter = btree_set::IntoIter<Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.into_iter()
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.triples.iter()).finish()
    }
}
