use super::QueryError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    IriRef(String),
    PName { prefix: String, local: String },
    Var(String),
    Str(String),
    Number { digits: String, suffix: String },
    Word(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Dot,
    QuoteOpen,
    QuoteClose,
    Caret2,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::IriRef(s) => format!("<{s}>"),
            Tok::PName { prefix, local } => format!("{prefix}:{local}"),
            Tok::Var(v) => format!("?{v}"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Number { digits, suffix } => format!("{digits}{suffix}"),
            Tok::Word(w) => w.clone(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Dot => "'.'".into(),
            Tok::QuoteOpen => "'<<'".into(),
            Tok::QuoteClose => "'>>'".into(),
            Tok::Caret2 => "'^^'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<(Tok, Pos)>, QueryError> {
    let mut lx = Lexer {
        chars: text.chars().collect(),
        idx: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let pos = lx.pos();
        let Some(c) = lx.peek(0) else {
            out.push((Tok::Eof, pos));
            return Ok(out);
        };
        let tok = match c {
            '{' => lx.single(Tok::LBrace),
            '}' => lx.single(Tok::RBrace),
            '[' => lx.single(Tok::LBracket),
            ']' => lx.single(Tok::RBracket),
            '.' => lx.single(Tok::Dot),
            '<' if lx.peek(1) == Some('<') => {
                lx.advance(2);
                Tok::QuoteOpen
            }
            '>' if lx.peek(1) == Some('>') => {
                lx.advance(2);
                Tok::QuoteClose
            }
            '^' if lx.peek(1) == Some('^') => {
                lx.advance(2);
                Tok::Caret2
            }
            '<' => lx.iri_ref()?,
            '?' | '$' => lx.variable()?,
            '"' => lx.string()?,
            c if c.is_ascii_digit() => lx.number(),
            '_' if lx.peek(1) == Some(':') => {
                return Err(lx.error(pos, "a variable or IRI (blank nodes are not supported)", "'_:'"));
            }
            c if c.is_alphabetic() || c == '_' || c == ':' => lx.name(),
            other => return Err(lx.error(pos, "a query token", &format!("{other:?}"))),
        };
        out.push((tok, pos));
    }
}

struct Lexer {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')
}

impl Lexer {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.idx + ahead).copied()
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if let Some(c) = self.peek(0) {
                self.idx += 1;
                if c == '\n' {
                    self.line += 1;
                    self.column = 1;
                } else {
                    self.column += 1;
                }
            }
        }
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.advance(1);
        tok
    }

    fn error(&self, pos: Pos, expected: &str, found: &str) -> QueryError {
        QueryError::Syntax {
            line: pos.line,
            column: pos.column,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                Some(c) if c.is_whitespace() => self.advance(1),
                Some('#') => {
                    while !matches!(self.peek(0), None | Some('\n')) {
                        self.advance(1);
                    }
                }
                _ => return,
            }
        }
    }

    fn iri_ref(&mut self) -> Result<Tok, QueryError> {
        let start = self.pos();
        self.advance(1);
        let mut value = String::new();
        loop {
            match self.peek(0) {
                Some('>') => {
                    self.advance(1);
                    return Ok(Tok::IriRef(value));
                }
                Some(c) if c.is_whitespace() || c == '<' => {
                    return Err(self.error(start, "'>' closing the IRI", &format!("{c:?}")));
                }
                Some(c) => {
                    value.push(c);
                    self.advance(1);
                }
                None => return Err(self.error(start, "'>' closing the IRI", "end of input")),
            }
        }
    }

    fn variable(&mut self) -> Result<Tok, QueryError> {
        let start = self.pos();
        self.advance(1);
        let mut name = String::new();
        while let Some(c) = self.peek(0).filter(|c| c.is_alphanumeric() || *c == '_') {
            name.push(c);
            self.advance(1);
        }
        if name.is_empty() {
            let found = self.peek(0).map_or("end of input".to_string(), |c| format!("{c:?}"));
            return Err(self.error(start, "a variable name after '?'", &found));
        }
        Ok(Tok::Var(name))
    }

    fn string(&mut self) -> Result<Tok, QueryError> {
        let start = self.pos();
        self.advance(1);
        let mut value = String::new();
        loop {
            match self.peek(0) {
                Some('"') => {
                    self.advance(1);
                    return Ok(Tok::Str(value));
                }
                Some('\\') => {
                    let esc_pos = self.pos();
                    self.advance(1);
                    let c = self.peek(0).unwrap_or('\0');
                    self.advance(1);
                    let decoded = match c {
                        't' => '\t',
                        'b' => '\u{8}',
                        'n' => '\n',
                        'r' => '\r',
                        'f' => '\u{c}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        'u' | 'U' => {
                            let digits = if c == 'u' { 4 } else { 8 };
                            let hex: String = (0..digits).filter_map(|i| self.peek(i)).collect();
                            let value = (hex.len() == digits)
                                .then(|| u32::from_str_radix(&hex, 16).ok())
                                .flatten()
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error(esc_pos, "a valid unicode escape", &hex))?;
                            self.advance(digits);
                            value
                        }
                        other => {
                            return Err(self.error(esc_pos, "a string escape", &format!("'\\{other}'")));
                        }
                    };
                    value.push(decoded);
                }
                Some('\n') | None => return Err(self.error(start, "closing '\"'", "end of line")),
                Some(c) => {
                    value.push(c);
                    self.advance(1);
                }
            }
        }
    }

    fn number(&mut self) -> Tok {
        let mut digits = String::new();
        while let Some(c) = self.peek(0).filter(char::is_ascii_digit) {
            digits.push(c);
            self.advance(1);
        }
        let mut suffix = String::new();
        while let Some(c) = self.peek(0).filter(|c| c.is_ascii_alphabetic()) {
            suffix.push(c);
            self.advance(1);
        }
        Tok::Number { digits, suffix }
    }

    fn name(&mut self) -> Tok {
        let mut end = self.idx;
        while self.chars.get(end).copied().is_some_and(is_name_char) {
            end += 1;
        }
        // A trailing '.' terminates the triple rather than belonging to the name.
        while end > self.idx && self.chars[end - 1] == '.' {
            end -= 1;
        }
        let text: String = self.chars[self.idx..end].iter().collect();
        self.advance(end - self.idx);
        match text.split_once(':') {
            Some((prefix, local)) => Tok::PName {
                prefix: prefix.to_string(),
                local: local.to_string(),
            },
            None => Tok::Word(text),
        }
    }
}
