use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::{Binding, Iri, ModelError, Term, Triple};

/// A query variable, stored without the leading `?`.
#[derive(Clone, Eq, Hash)]
pub struct Variable(Arc<str>);

impl PartialEq for Variable {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl PartialOrd for Variable {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Variable {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return std::cmp::Ordering::Equal;
        }
        self.0.cmp(&other.0)
    }
}

impl Variable {
    pub fn new(name: impl AsRef<str>) -> Result<Self, ModelError> {
        let name = name.as_ref();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(ModelError::InvalidVariable(name.to_string()));
        }
        Ok(Self(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// One position of a triple pattern.
///
/// `Term` never holds a quoted triple: quoted triples in pattern position are
/// always represented as `Quoted`, which [`PatternTerm::from`] takes care of.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Var(Variable),
    Term(Term),
    Quoted(Box<TriplePattern>),
}

impl PatternTerm {
    pub fn var(name: &str) -> Result<Self, ModelError> {
        Ok(PatternTerm::Var(Variable::new(name)?))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            PatternTerm::Term(Term::Iri(i)) => Some(i),
            _ => None,
        }
    }

    fn collect_variables(&self, out: &mut BTreeSet<Variable>) {
        match self {
            PatternTerm::Var(v) => {
                out.insert(v.clone());
            }
            PatternTerm::Term(_) => {}
            PatternTerm::Quoted(tp) => tp.collect_variables(out),
        }
    }

    fn is_ground_under(&self, bound: &BTreeSet<Variable>) -> usize {
        match self {
            PatternTerm::Var(v) => usize::from(bound.contains(v)),
            PatternTerm::Term(_) => 1,
            PatternTerm::Quoted(tp) => {
                let n = tp.bound_positions(bound);
                usize::from(n == 3)
            }
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(term: Term) -> Self {
        match term {
            Term::Triple(t) => PatternTerm::Quoted(Box::new(TriplePattern::from(t.as_ref().clone()))),
            other => PatternTerm::Term(other),
        }
    }
}

impl From<Iri> for PatternTerm {
    fn from(iri: Iri) -> Self {
        PatternTerm::Term(Term::Iri(iri))
    }
}

impl From<Variable> for PatternTerm {
    fn from(v: Variable) -> Self {
        PatternTerm::Var(v)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => v.fmt(f),
            PatternTerm::Term(t) => t.fmt(f),
            PatternTerm::Quoted(tp) => write!(f, "<< {} >>", tp),
        }
    }
}

impl fmt::Debug for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<PatternTerm>,
        predicate: impl Into<PatternTerm>,
        object: impl Into<PatternTerm>,
    ) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    pub(crate) fn collect_variables(&self, out: &mut BTreeSet<Variable>) {
        self.subject.collect_variables(out);
        self.predicate.collect_variables(out);
        self.object.collect_variables(out);
    }

    /// Number of positions fixed once `bound` variables are known.
    pub(crate) fn bound_positions(&self, bound: &BTreeSet<Variable>) -> usize {
        self.subject.is_ground_under(bound)
            + self.predicate.is_ground_under(bound)
            + self.object.is_ground_under(bound)
    }

    /// Tries to extend `binding` so that this pattern maps onto `triple`.
    pub fn unify(&self, triple: &Triple, binding: &Binding) -> Option<Binding> {
        let mut b = binding.clone();
        unify_triple(self, triple, &mut b).then_some(b)
    }

    /// Replaces variables by their bound terms.
    pub fn instantiate(&self, binding: &Binding) -> Result<Triple, ModelError> {
        let subject = instantiate_term(&self.subject, binding)?;
        let predicate = match instantiate_term(&self.predicate, binding)? {
            Term::Iri(i) => i,
            other => return Err(ModelError::NonIriPredicate(other.to_string())),
        };
        let object = instantiate_term(&self.object, binding)?;
        Triple::new(subject, predicate, object)
    }
}

impl From<Triple> for TriplePattern {
    fn from(t: Triple) -> Self {
        TriplePattern::new(
            PatternTerm::from(t.subject().clone()),
            PatternTerm::from(t.predicate().clone()),
            PatternTerm::from(t.object().clone()),
        )
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

impl fmt::Debug for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

fn unify_term(pattern: &PatternTerm, term: &Term, b: &mut Binding) -> bool {
    match pattern {
        PatternTerm::Var(v) => b.bind(v, term),
        PatternTerm::Term(t) => t == term,
        PatternTerm::Quoted(tp) => match term {
            Term::Triple(t) => unify_triple(tp, t, b),
            _ => false,
        },
    }
}

pub(crate) fn unify_triple(pattern: &TriplePattern, triple: &Triple, b: &mut Binding) -> bool {
    if let Some(p) = pattern.predicate.as_iri() {
        if p != triple.predicate() {
            return false;
        }
    }
    unify_term(&pattern.predicate, &Term::Iri(triple.predicate().clone()), b)
        && unify_term(&pattern.subject, triple.subject(), b)
        && unify_term(&pattern.object, triple.object(), b)
}

fn instantiate_term(pattern: &PatternTerm, binding: &Binding) -> Result<Term, ModelError> {
    match pattern {
        PatternTerm::Var(v) => binding
            .get(v)
            .cloned()
            .ok_or_else(|| ModelError::UnboundVariable(v.name().to_string())),
        PatternTerm::Term(t) => Ok(t.clone()),
        PatternTerm::Quoted(tp) => Ok(Term::from(tp.instantiate(binding)?)),
    }
}
