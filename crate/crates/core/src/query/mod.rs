//! The continuous-query language fragment: `REGISTER .. AS`, `SELECT` and
//! `CONSTRUCT` result forms, `STREAM <selector> [RANGE d ON p] { .. }` blocks
//! and plain triple patterns evaluated against background knowledge.

mod lexer;
mod parser;
mod prefixes;
mod printer;

pub use printer::pretty_print;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Iri, TriplePattern, Variable};

pub use parser::parse;
pub use prefixes::PrefixMap;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("unknown prefix '{prefix}:' at {line}:{column}")]
    UnknownPrefix {
        line: usize,
        column: usize,
        prefix: String,
    },
    #[error("invalid query: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    /// Output stream for registered (continuously published) queries.
    pub register: Option<Iri>,
    pub form: ResultForm,
    pub streams: Vec<StreamPattern>,
    /// Patterns outside any STREAM block, matched against background knowledge.
    pub statics: Vec<TriplePattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ResultForm {
    Select(Vec<Variable>),
    Construct(Vec<TriplePattern>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamPattern {
    pub selector: Selector,
    pub window: RangeWindow,
    pub patterns: Vec<TriplePattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Selector {
    Iri(Iri),
    Var(Variable),
}

/// Sliding window over application time: keeps elements whose timestamp,
/// read from the `on` predicate, lies in `(watermark - range_ms, watermark]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RangeWindow {
    pub range_ms: u64,
    pub on: Iri,
}

impl StreamPattern {
    /// Variables bound by this stream block, including a variable selector.
    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut vars = BTreeSet::new();
        for p in &self.patterns {
            p.collect_variables(&mut vars);
        }
        if let Selector::Var(v) = &self.selector {
            vars.insert(v.clone());
        }
        vars
    }
}

impl Query {
    pub fn template(&self) -> Option<&[TriplePattern]> {
        match &self.form {
            ResultForm::Construct(t) => Some(t),
            ResultForm::Select(_) => None,
        }
    }

    pub fn static_variables(&self) -> BTreeSet<Variable> {
        let mut vars = BTreeSet::new();
        for p in &self.statics {
            p.collect_variables(&mut vars);
        }
        vars
    }

    /// Every variable mentioned in the WHERE clause.
    pub fn where_variables(&self) -> BTreeSet<Variable> {
        let mut vars = self.static_variables();
        for s in &self.streams {
            vars.extend(s.variables());
        }
        vars
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.streams.is_empty() {
            return Err(QueryError::Validation("at least one STREAM block is required".into()));
        }
        for s in &self.streams {
            if s.patterns.is_empty() {
                return Err(QueryError::Validation("STREAM block without triple patterns".into()));
            }
            if s.window.range_ms == 0 {
                return Err(QueryError::Validation("window range must be positive".into()));
            }
        }
        match &self.form {
            ResultForm::Select(vars) => {
                if self.register.is_some() {
                    return Err(QueryError::Validation(
                        "REGISTER requires a CONSTRUCT result form".into(),
                    ));
                }
                if vars.is_empty() {
                    return Err(QueryError::Validation("SELECT needs at least one variable".into()));
                }
                let bound = self.where_variables();
                if let Some(v) = vars.iter().find(|v| !bound.contains(v)) {
                    return Err(QueryError::Validation(format!(
                        "SELECT variable {v} does not occur in WHERE"
                    )));
                }
            }
            ResultForm::Construct(_) => {}
        }
        for p in self.all_patterns() {
            if !matches!(p.predicate, crate::model::PatternTerm::Var(_))
                && p.predicate.as_iri().is_none()
            {
                return Err(QueryError::Validation(format!("predicate of {p} must be an IRI or variable")));
            }
        }
        Ok(())
    }

    fn all_patterns(&self) -> impl Iterator<Item = &TriplePattern> {
        self.streams
            .iter()
            .flat_map(|s| s.patterns.iter())
            .chain(self.statics.iter())
            .chain(self.template().unwrap_or(&[]).iter())
    }
}
