use crate::model::{Iri, Literal, PatternTerm, Term, TriplePattern, Variable};
use crate::vocab;

use super::lexer::{tokenize, Pos, Tok};
use super::{PrefixMap, Query, QueryError, RangeWindow, ResultForm, Selector, StreamPattern};

/// Parses and validates query text. `PREFIX` declarations in the text extend
/// (and override) `prefixes`.
pub fn parse(text: &str, prefixes: &PrefixMap) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        idx: 0,
        prefixes: prefixes.clone(),
    };
    let query = parser.query()?;
    query.validate()?;
    Ok(query)
}

struct Parser {
    tokens: Vec<(Tok, Pos)>,
    idx: usize,
    prefixes: PrefixMap,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].0
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let item = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        item
    }

    fn error(&self, expected: &str) -> QueryError {
        let pos = self.pos();
        QueryError::Syntax {
            line: pos.line,
            column: pos.column,
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.is_keyword(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error(kw))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(&tok.describe()))
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        while self.is_keyword("PREFIX") {
            self.next();
            let (tok, _) = self.next();
            let prefix = match tok {
                Tok::PName { prefix, local } if local.is_empty() => prefix,
                _ => {
                    self.idx -= 1;
                    return Err(self.error("a prefix declaration like 'ex:'"));
                }
            };
            let ns = match self.next() {
                (Tok::IriRef(ns), _) => ns,
                _ => {
                    self.idx -= 1;
                    return Err(self.error("a namespace IRI"));
                }
            };
            self.prefixes.insert(prefix, ns);
        }

        let register = if self.is_keyword("REGISTER") {
            self.next();
            let iri = self.iri("an output stream IRI")?;
            self.expect_keyword("AS")?;
            Some(iri)
        } else {
            None
        };

        let form = if self.is_keyword("SELECT") {
            self.next();
            let mut vars = Vec::new();
            while let Tok::Var(name) = self.peek().clone() {
                self.next();
                vars.push(Variable::new(&name).map_err(|e| QueryError::Validation(e.to_string()))?);
            }
            if vars.is_empty() {
                return Err(self.error("a variable"));
            }
            ResultForm::Select(vars)
        } else if self.is_keyword("CONSTRUCT") {
            self.next();
            self.expect(Tok::LBrace)?;
            let template = self.triples_until_rbrace()?;
            self.expect(Tok::RBrace)?;
            ResultForm::Construct(template)
        } else {
            return Err(self.error("SELECT or CONSTRUCT"));
        };

        if self.is_keyword("WHERE") {
            self.next();
        }
        self.expect(Tok::LBrace)?;
        let mut streams = Vec::new();
        let mut statics = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => break,
                Tok::Dot => {
                    self.next();
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("STREAM") => {
                    streams.push(self.stream_block()?);
                }
                _ => {
                    statics.push(self.triple()?);
                    if *self.peek() != Tok::RBrace && !self.is_keyword("STREAM") {
                        self.expect(Tok::Dot)?;
                    }
                }
            }
        }
        self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return Err(self.error("end of query"));
        }
        Ok(Query {
            register,
            form,
            streams,
            statics,
        })
    }

    fn stream_block(&mut self) -> Result<StreamPattern, QueryError> {
        self.expect_keyword("STREAM")?;
        let braced = *self.peek() == Tok::LBrace;
        if braced {
            self.next();
        }
        let selector = match self.peek().clone() {
            Tok::Var(name) => {
                self.next();
                Selector::Var(Variable::new(&name).map_err(|e| QueryError::Validation(e.to_string()))?)
            }
            _ => Selector::Iri(self.iri("a stream IRI or variable")?),
        };
        if braced {
            self.expect(Tok::RBrace)?;
        }
        self.expect(Tok::LBracket)?;
        self.expect_keyword("RANGE")?;
        let range_ms = self.duration()?;
        self.expect_keyword("ON")?;
        let on = self.iri("a timestamp predicate")?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::LBrace)?;
        let patterns = self.triples_until_rbrace()?;
        self.expect(Tok::RBrace)?;
        Ok(StreamPattern {
            selector,
            window: RangeWindow { range_ms, on },
            patterns,
        })
    }

    fn duration(&mut self) -> Result<u64, QueryError> {
        let Tok::Number { digits, suffix } = self.peek().clone() else {
            return Err(self.error("a duration such as 5s"));
        };
        let factor: u64 = match suffix.to_ascii_lowercase().as_str() {
            "ms" => 1,
            "s" => 1_000,
            "m" => 60_000,
            _ => return Err(self.error("a duration unit (ms, s or m)")),
        };
        let value: u64 = digits.parse().map_err(|_| self.error("a duration that fits in 64 bits"))?;
        let ms = value
            .checked_mul(factor)
            .ok_or_else(|| self.error("a duration that fits in 64 bits"))?;
        self.next();
        Ok(ms)
    }

    fn triples_until_rbrace(&mut self) -> Result<Vec<TriplePattern>, QueryError> {
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            out.push(self.triple()?);
            match self.peek() {
                Tok::Dot => {
                    self.next();
                }
                Tok::RBrace => {}
                _ => return Err(self.error("'.' or '}'")),
            }
        }
        Ok(out)
    }

    fn triple(&mut self) -> Result<TriplePattern, QueryError> {
        let subject = self.node(false)?;
        let predicate = self.verb()?;
        let object = self.node(true)?;
        Ok(TriplePattern::new(subject, predicate, object))
    }

    fn verb(&mut self) -> Result<PatternTerm, QueryError> {
        match self.peek().clone() {
            Tok::Word(w) if w == "a" => {
                self.next();
                Ok(PatternTerm::from(vocab::rdf::type_()))
            }
            Tok::Var(name) => {
                self.next();
                Ok(PatternTerm::Var(
                    Variable::new(&name).map_err(|e| QueryError::Validation(e.to_string()))?,
                ))
            }
            _ => Ok(PatternTerm::from(self.iri("a predicate")?)),
        }
    }

    fn node(&mut self, allow_literal: bool) -> Result<PatternTerm, QueryError> {
        match self.peek().clone() {
            Tok::Var(name) => {
                self.next();
                Ok(PatternTerm::Var(
                    Variable::new(&name).map_err(|e| QueryError::Validation(e.to_string()))?,
                ))
            }
            Tok::QuoteOpen => {
                self.next();
                let inner = self.triple()?;
                self.expect(Tok::QuoteClose)?;
                Ok(PatternTerm::Quoted(Box::new(inner)))
            }
            Tok::Str(_) | Tok::Number { .. } if allow_literal => Ok(PatternTerm::Term(Term::Literal(self.literal()?))),
            Tok::IriRef(_) | Tok::PName { .. } => Ok(PatternTerm::from(self.iri("a term")?)),
            _ if allow_literal => Err(self.error("a variable, IRI, literal or '<<'")),
            _ => Err(self.error("a variable, IRI or '<<'")),
        }
    }

    fn literal(&mut self) -> Result<Literal, QueryError> {
        match self.next() {
            (Tok::Str(lexical), _) => {
                if *self.peek() == Tok::Caret2 {
                    self.next();
                    let dt = self.iri("a datatype IRI")?;
                    Ok(Literal::new(lexical, dt))
                } else {
                    Ok(Literal::string(lexical))
                }
            }
            (Tok::Number { digits, suffix }, _) if suffix.is_empty() => {
                Ok(Literal::new(digits, vocab::xsd::integer()))
            }
            _ => {
                self.idx -= 1;
                Err(self.error("a literal"))
            }
        }
    }

    fn iri(&mut self, expected: &str) -> Result<Iri, QueryError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::IriRef(value) => {
                self.next();
                Iri::new(&value).map_err(|_| QueryError::Syntax {
                    line: pos.line,
                    column: pos.column,
                    expected: "a valid IRI".into(),
                    found: format!("<{value}>"),
                })
            }
            Tok::PName { prefix, local } => {
                self.next();
                match self.prefixes.expand(&prefix, &local) {
                    Some(iri) => Ok(iri),
                    None if self.prefixes.namespace(&prefix).is_none() => Err(QueryError::UnknownPrefix {
                        line: pos.line,
                        column: pos.column,
                        prefix,
                    }),
                    None => Err(QueryError::Syntax {
                        line: pos.line,
                        column: pos.column,
                        expected: "a valid prefixed name".into(),
                        found: format!("{prefix}:{local}"),
                    }),
                }
            }
            _ => Err(self.error(expected)),
        }
    }
}
