use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Term, Variable};

/// A partial mapping from variables to terms, kept sorted by variable.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding(Vec<(Variable, Term)>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    fn position(&self, var: &Variable) -> Result<usize, usize> {
        self.0.binary_search_by(|(v, _)| v.cmp(var))
    }

    pub fn get(&self, var: &Variable) -> Option<&Term> {
        self.position(var).ok().map(|i| &self.0[i].1)
    }

    pub fn contains(&self, var: &Variable) -> bool {
        self.position(var).is_ok()
    }

    /// Binds `var` to `term`. Returns `false` (and leaves the binding
    /// unchanged) if `var` is already bound to a different term.
    pub fn bind(&mut self, var: &Variable, term: &Term) -> bool {
        match self.position(var) {
            Ok(i) => self.0[i].1 == *term,
            Err(i) => {
                self.0.insert(i, (var.clone(), term.clone()));
                true
            }
        }
    }

    pub fn with(mut self, var: &Variable, term: impl Into<Term>) -> Self {
        let term = term.into();
        match self.position(var) {
            Ok(i) => self.0[i].1 = term,
            Err(i) => self.0.insert(i, (var.clone(), term)),
        }
        self
    }

    pub fn is_compatible(&self, other: &Binding) -> bool {
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        while let (Some((ka, ta)), Some((kb, tb))) = (a.peek(), b.peek()) {
            match ka.cmp(kb) {
                Ordering::Less => {
                    a.next();
                }
                Ordering::Greater => {
                    b.next();
                }
                Ordering::Equal if ta != tb => return false,
                Ordering::Equal => {
                    a.next();
                    b.next();
                }
            }
        }
        true
    }

    /// Union of two compatible bindings; `None` when they disagree.
    pub fn merge(&self, other: &Binding) -> Option<Binding> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            let next = match (a.peek(), b.peek()) {
                (Some((ka, ta)), Some((kb, tb))) => match ka.cmp(kb) {
                    Ordering::Less => a.next(),
                    Ordering::Greater => b.next(),
                    Ordering::Equal if ta != tb => return None,
                    Ordering::Equal => {
                        b.next();
                        a.next()
                    }
                },
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (None, None) => break,
            };
            out.push(next.expect("peeked").clone());
        }
        Some(Binding(out))
    }

    pub fn project(&self, vars: &BTreeSet<Variable>) -> Binding {
        Binding(self.0.iter().filter(|(v, _)| vars.contains(v)).cloned().collect())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.0.iter().map(|(v, _)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter().map(|(v, t)| (v, t))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Variable, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        let map: BTreeMap<Variable, Term> = iter.into_iter().collect();
        Binding(map.into_iter().collect())
    }
}

/// `?a=<..> ?b=".."^^<..>` in variable order.
impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, t) in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{}={}", v, t)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self)
    }
}

/// Natural join of two binding sets. Bindings are grouped by the variables
/// every binding on both sides binds, so only matching groups are merged.
pub fn join(left: &BTreeSet<Binding>, right: &BTreeSet<Binding>) -> BTreeSet<Binding> {
    let mut out = BTreeSet::new();
    let (Some(l0), Some(r0)) = (left.first(), right.first()) else {
        return out;
    };
    let always = |set: &BTreeSet<Binding>, first: &Binding| -> BTreeSet<Variable> {
        first.variables().filter(|v| set.iter().all(|b| b.contains(v))).cloned().collect()
    };
    let key: Vec<Variable> = always(left, l0).intersection(&always(right, r0)).cloned().collect();
    let key_of = |b: &'_ Binding| -> Vec<Term> { key.iter().map(|v| b.get(v).expect("key variables are always bound").clone()).collect() };
    let mut groups: BTreeMap<Vec<Term>, Vec<&Binding>> = BTreeMap::new();
    for r in right {
        groups.entry(key_of(r)).or_default().push(r);
    }
    for l in left {
        for r in groups.get(&key_of(l)).into_iter().flatten() {
            if let Some(m) = l.merge(r) {
                out.insert(m);
            }
        }
    }
    out
}
