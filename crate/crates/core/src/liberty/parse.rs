// SPDX-License-Identifier: Apache-2.0

//! Generic Liberty group syntax: `name (args) { ... }` groups, `key : value;`
//! simple attributes and `key (args);` complex attributes.

use super::LibertyError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    Semi,
    Comma,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, LibertyError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() || c == '\\' {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, '/');
            advance(&mut i, &mut line, &mut col, '*');
            loop {
                if i >= chars.len() {
                    return Err(LibertyError::Syntax {
                        line: tl,
                        column: tc,
                        message: "unterminated comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col, '*');
                    advance(&mut i, &mut line, &mut col, '/');
                    break;
                }
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        let punct = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = punct {
            advance(&mut i, &mut line, &mut col, c);
            out.push(Token { tok, line: tl, column: tc });
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(LibertyError::Syntax {
                            line: tl,
                            column: tc,
                            message: "unterminated string".into(),
                        })
                    }
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, '"');
                        break;
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'\n') => {
                        advance(&mut i, &mut line, &mut col, '\\');
                        advance(&mut i, &mut line, &mut col, '\n');
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
            continue;
        }
        let mut s = String::new();
        while i < chars.len() {
            let ch = chars[i];
            if ch.is_whitespace() || "(){}:;,\"\\".contains(ch) {
                break;
            }
            s.push(ch);
            advance(&mut i, &mut line, &mut col, ch);
        }
        out.push(Token { tok: Tok::Word(s), line: tl, column: tc });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum AttrValue {
    Simple(String),
    Complex(Vec<String>),
}

#[derive(Clone, Debug)]
pub(crate) struct Attr {
    pub name: String,
    pub value: AttrValue,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Group {
    pub kind: String,
    pub args: Vec<String>,
    pub attrs: Vec<Attr>,
    pub groups: Vec<Group>,
    pub line: usize,
}

impl Group {
    pub fn simple(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find_map(|a| match &a.value {
            AttrValue::Simple(v) if a.name == name => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn complex(&self, name: &str) -> Option<&[String]> {
        self.attrs.iter().find_map(|a| match &a.value {
            AttrValue::Complex(v) if a.name == name => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn attr_line(&self, name: &str) -> usize {
        self.attrs
            .iter()
            .find(|a| a.name == name)
            .map_or(self.line, |a| a.line)
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn last_pos(&self) -> (usize, usize) {
        self.toks
            .last()
            .map_or((1, 1), |t| (t.line, t.column))
    }

    fn err_at(&self, tok: Option<&Token>, message: &str) -> LibertyError {
        let (line, column) = tok.map_or_else(|| self.last_pos(), |t| (t.line, t.column));
        LibertyError::Syntax {
            line,
            column,
            message: message.to_string(),
        }
    }

    fn word(&mut self) -> Result<(String, usize), LibertyError> {
        match self.next() {
            Some(Token { tok: Tok::Word(w), line, .. }) => Ok((w, line)),
            other => Err(self.err_at(other.as_ref(), "expected identifier")),
        }
    }

    fn args(&mut self) -> Result<Vec<String>, LibertyError> {
        let mut args = Vec::new();
        loop {
            match self.next() {
                Some(Token { tok: Tok::RParen, .. }) => return Ok(args),
                Some(Token { tok: Tok::Word(w) | Tok::Str(w), .. }) => args.push(w),
                Some(Token { tok: Tok::Comma, .. }) => {}
                other => return Err(self.err_at(other.as_ref(), "malformed argument list")),
            }
        }
    }

    fn skip_semi(&mut self) {
        if matches!(self.peek(), Some(Token { tok: Tok::Semi, .. })) {
            self.pos += 1;
        }
    }

    /// Parse statements until the closing brace of the enclosing group.
    fn body(&mut self, open_line: usize) -> Result<(Vec<Attr>, Vec<Group>), LibertyError> {
        let mut attrs = Vec::new();
        let mut groups = Vec::new();
        loop {
            match self.peek() {
                None => return Err(LibertyError::UnbalancedBraces { line: open_line }),
                Some(Token { tok: Tok::RBrace, .. }) => {
                    self.pos += 1;
                    return Ok((attrs, groups));
                }
                Some(Token { tok: Tok::Semi, .. }) => {
                    self.pos += 1;
                }
                _ => match self.statement()? {
                    Statement::Attr(a) => attrs.push(a),
                    Statement::Group(g) => groups.push(g),
                },
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, LibertyError> {
        let (name, line) = self.word()?;
        match self.next() {
            Some(Token { tok: Tok::Colon, .. }) => {
                let value = match self.next() {
                    Some(Token { tok: Tok::Word(w) | Tok::Str(w), .. }) => w,
                    other => return Err(self.err_at(other.as_ref(), "expected attribute value")),
                };
                // expressions like `a + b` in simple attributes are folded into one string
                let mut value = value;
                while let Some(Token { tok: Tok::Word(w), .. }) = self.peek() {
                    value.push(' ');
                    value.push_str(w);
                    self.pos += 1;
                }
                self.skip_semi();
                Ok(Statement::Attr(Attr {
                    name,
                    value: AttrValue::Simple(value),
                    line,
                }))
            }
            Some(Token { tok: Tok::LParen, .. }) => {
                let args = self.args()?;
                if let Some(Token { tok: Tok::LBrace, .. }) = self.peek() {
                    self.pos += 1;
                    let (attrs, groups) = self.body(line)?;
                    Ok(Statement::Group(Group {
                        kind: name,
                        args,
                        attrs,
                        groups,
                        line,
                    }))
                } else {
                    self.skip_semi();
                    Ok(Statement::Attr(Attr {
                        name,
                        value: AttrValue::Complex(args),
                        line,
                    }))
                }
            }
            other => Err(self.err_at(other.as_ref(), "expected `:` or `(`")),
        }
    }
}

enum Statement {
    Attr(Attr),
    Group(Group),
}

/// Parse the single top-level group of a Liberty file.
pub(crate) fn parse_groups(text: &str) -> Result<Group, LibertyError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let top = match p.statement()? {
        Statement::Group(g) => g,
        Statement::Attr(a) => {
            return Err(LibertyError::Syntax {
                line: a.line,
                column: 1,
                message: "expected a top-level group".into(),
            })
        }
    };
    p.skip_semi();
    if let Some(t) = p.peek() {
        if t.tok == Tok::RBrace {
            return Err(LibertyError::UnbalancedBraces { line: t.line });
        }
        return Err(p.err_at(Some(t), "trailing content after top-level group"));
    }
    Ok(top)
}
