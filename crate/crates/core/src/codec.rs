//! Line-oriented RDF-star text format (N-Triples with `<< s p o >>` quoted
//! triples) used for every message exchanged between nodes.
//!
//! `encode` is canonical: one triple per line, every literal carries an explicit
//! datatype, lines are sorted bytewise and each ends with `\n`. `decode` also
//! accepts untyped literals, comment lines, blank lines and flexible spacing.

use std::fmt::Write;

use thiserror::Error;

use crate::model::{BlankNode, Graph, Iri, Literal, Term, Triple};
use crate::vocab;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct CodecError {
    pub line: usize,
    pub reason: String,
}

/// Canonical serialization of a single triple, including the trailing ` .`.
pub fn encode_triple(triple: &Triple) -> String {
    let mut line = String::new();
    write!(line, "{} .", triple).expect("writing to a String cannot fail");
    line
}

pub fn encode(graph: &Graph) -> String {
    let mut lines: Vec<String> = graph.iter().map(encode_triple).collect();
    lines.sort_unstable();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn decode(text: &str) -> Result<Graph, CodecError> {
    let mut graph = Graph::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let mut cursor = Cursor::new(line, idx + 1);
        if let Some(triple) = cursor.line()? {
            graph.insert(triple);
        }
    }
    Ok(graph)
}

/// Parses a single term in canonical syntax (`<iri>`, `_:b`, `"lit"^^<dt>`, `<< .. >>`).
pub fn decode_term(text: &str) -> Result<Term, CodecError> {
    let mut cursor = Cursor::new(text, 1);
    cursor.skip_ws();
    let term = cursor.object()?;
    cursor.skip_ws();
    if !cursor.at_end() {
        return Err(cursor.error("trailing characters after term"));
    }
    Ok(term)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self { text, pos: 0, line }
    }

    fn error(&self, reason: impl Into<String>) -> CodecError {
        CodecError {
            line: self.line,
            reason: format!("{} (column {})", reason.into(), self.pos + 1),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn line(&mut self) -> Result<Option<Triple>, CodecError> {
        self.skip_ws();
        if self.at_end() || self.peek() == Some('#') {
            return Ok(None);
        }
        let triple = self.triple()?;
        self.skip_ws();
        if !self.eat(".") {
            return Err(self.error("expected '.' at end of triple"));
        }
        self.skip_ws();
        if !(self.at_end() || self.peek() == Some('#')) {
            return Err(self.error("unexpected characters after '.'"));
        }
        Ok(Some(triple))
    }

    fn triple(&mut self) -> Result<Triple, CodecError> {
        let subject = self.subject()?;
        self.skip_ws();
        let predicate = self.iri()?;
        self.skip_ws();
        let object = self.object()?;
        Triple::new(subject, predicate, object).map_err(|e| self.error(e.to_string()))
    }

    fn subject(&mut self) -> Result<Term, CodecError> {
        match self.peek() {
            Some('"') => Err(self.error("a literal cannot be a subject")),
            _ => self.object(),
        }
    }

    fn object(&mut self) -> Result<Term, CodecError> {
        if self.eat("<<") {
            self.skip_ws();
            let inner = self.triple()?;
            self.skip_ws();
            if !self.eat(">>") {
                return Err(self.error("unbalanced '<<': expected '>>'"));
            }
            return Ok(Term::from(inner));
        }
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri()?)),
            Some('_') => Ok(Term::BlankNode(self.blank_node()?)),
            Some('"') => Ok(Term::Literal(self.literal()?)),
            Some('>') if self.rest().starts_with(">>") => Err(self.error("unbalanced '>>'")),
            Some(c) => Err(self.error(format!("unexpected character {c:?}"))),
            None => Err(self.error("unexpected end of line")),
        }
    }

    fn iri(&mut self) -> Result<Iri, CodecError> {
        if self.rest().starts_with("<<") || !self.eat("<") {
            return Err(self.error("expected IRI"));
        }
        let start = self.pos;
        loop {
            match self.bump() {
                Some('>') => break,
                Some('\\') => return Err(self.error("escapes are not allowed in IRIs")),
                Some(_) => {}
                None => return Err(self.error("unterminated IRI")),
            }
        }
        let value = &self.text[start..self.pos - 1];
        Iri::new(value).map_err(|e| self.error(e.to_string()))
    }

    fn blank_node(&mut self) -> Result<BlankNode, CodecError> {
        if !self.eat("_:") {
            return Err(self.error("expected blank node"));
        }
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            self.pos += 1;
        }
        BlankNode::new(&self.text[start..self.pos]).map_err(|e| self.error(e.to_string()))
    }

    fn literal(&mut self) -> Result<Literal, CodecError> {
        if !self.eat("\"") {
            return Err(self.error("expected literal"));
        }
        let mut lexical = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => lexical.push(self.escape()?),
                Some(c) => lexical.push(c),
                None => return Err(self.error("unterminated literal")),
            }
        }
        if self.eat("^^") {
            let datatype = self.iri()?;
            Ok(Literal::new(lexical, datatype))
        } else if self.peek() == Some('@') {
            Err(self.error("language-tagged literals are not supported"))
        } else {
            Ok(Literal::new(lexical, vocab::xsd::string()))
        }
    }

    fn escape(&mut self) -> Result<char, CodecError> {
        let c = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
        Ok(match c {
            't' => '\t',
            'b' => '\u{8}',
            'n' => '\n',
            'r' => '\r',
            'f' => '\u{c}',
            '"' => '"',
            '\'' => '\'',
            '\\' => '\\',
            'u' => self.hex_escape(4)?,
            'U' => self.hex_escape(8)?,
            other => return Err(self.error(format!("unknown escape '\\{other}'"))),
        })
    }

    fn hex_escape(&mut self, digits: usize) -> Result<char, CodecError> {
        let rest = self.rest();
        let hex = rest
            .get(..digits)
            .filter(|h| h.chars().all(|c| c.is_ascii_hexdigit()))
            .ok_or_else(|| self.error("malformed unicode escape"))?;
        let value = u32::from_str_radix(hex, 16).map_err(|_| self.error("malformed unicode escape"))?;
        self.pos += digits;
        char::from_u32(value).ok_or_else(|| self.error("unicode escape is not a scalar value"))
    }
}
