use super::lexer::{Tok, Token};
use super::{ParseDiagnostic, Span, KEYWORDS};

#[derive(Debug, Clone, PartialEq)]
pub enum ElemKind {
    Word(String),
    Str(String),
    /// `family:id`, or `S : Type` in a source declaration.
    Typed(String, String),
    List(Vec<Elem>),
    Tuple(Vec<Elem>),
    /// Items separated by `;` or line breaks.
    Block(Vec<Vec<Elem>>),
    Pair(String, Box<Elem>),
    Op(Tok),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elem {
    pub kind: ElemKind,
    pub span: Span,
}

impl Elem {
    pub fn describe(&self) -> String {
        match &self.kind {
            ElemKind::Word(w) => format!("`{w}`"),
            ElemKind::Str(_) => "a string".into(),
            ElemKind::Typed(f, id) => format!("`{f}:{id}`"),
            ElemKind::List(_) => "a list".into(),
            ElemKind::Tuple(_) => "a tuple".into(),
            ElemKind::Block(_) => "a block".into(),
            ElemKind::Pair(k, _) => format!("`{k}=`"),
            ElemKind::Op(t) => t.describe(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Statement {
    pub keyword: String,
    pub span: Span,
    pub elems: Vec<Elem>,
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    lines: &'a [&'a str],
    diagnostics: &'a mut Vec<ParseDiagnostic>,
}

fn is_keyword(w: &str) -> bool {
    KEYWORDS.contains(&w)
}

pub fn parse_statements(tokens: &[Token], lines: &[&str], diagnostics: &mut Vec<ParseDiagnostic>) -> Vec<Statement> {
    let mut p = Parser { tokens, pos: 0, lines, diagnostics };
    let mut out = Vec::new();
    while p.pos < tokens.len() {
        let t = &tokens[p.pos];
        match &t.tok {
            Tok::Word(w) if is_keyword(w) => {
                let keyword = w.clone();
                let start = t.span;
                p.pos += 1;
                let elems = p.elems_top();
                let end = elems.last().map_or(start, |e| e.span);
                if p.pos < tokens.len() && tokens[p.pos].tok == Tok::Semi {
                    p.pos += 1;
                }
                out.push(Statement { keyword, span: start.to(end), elems });
            }
            Tok::Semi => p.pos += 1,
            other => {
                let msg = format!("expected a declaration or script keyword, found {}", other.describe());
                p.error(t.span, "SYNTAX", msg);
                p.pos += 1;
                while p.pos < tokens.len() && !p.at_line_start_keyword() {
                    p.pos += 1;
                }
            }
        }
    }
    out
}

impl Parser<'_> {
    fn error(&mut self, span: Span, code: &str, msg: impl Into<String>) {
        self.diagnostics.push(ParseDiagnostic::new(span, code, msg, self.lines));
    }

    fn peek(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    /// A keyword that opens a new statement rather than serving as a key,
    /// a typed reference, the object of `from`, or a query name.
    fn starts_statement(&self) -> bool {
        let Some(Tok::Word(w)) = self.peek(0) else { return false };
        if !is_keyword(w) {
            return false;
        }
        if matches!(self.peek(1), Some(Tok::Eq | Tok::Colon)) {
            return false;
        }
        !matches!(self.pos.checked_sub(1).map(|i| &self.tokens[i].tok), Some(Tok::Word(prev)) if prev == "from" || prev == "assert")
    }

    fn at_line_start_keyword(&self) -> bool {
        self.tokens[self.pos].line_start && self.starts_statement()
    }

    fn elems_top(&mut self) -> Vec<Elem> {
        let mut elems = Vec::new();
        while self.pos < self.tokens.len() {
            if self.starts_statement() {
                break;
            }
            let t = &self.tokens[self.pos];
            match &t.tok {
                Tok::Semi => break,
                Tok::Comma => self.pos += 1,
                Tok::RBrace | Tok::RBracket | Tok::RParen => {
                    let (span, what) = (t.span, t.tok.describe());
                    self.error(span, "SYNTAX", format!("unbalanced {what}"));
                    self.pos += 1;
                }
                _ => {
                    let e = self.elem();
                    elems.push(e);
                }
            }
        }
        elems
    }

    fn elem(&mut self) -> Elem {
        let t = self.tokens[self.pos].clone();
        match t.tok {
            Tok::Word(w) => {
                self.pos += 1;
                if self.peek(0) == Some(&Tok::Eq) {
                    let eq = self.tokens[self.pos].span;
                    self.pos += 1;
                    match self.value() {
                        Some(v) => {
                            let span = t.span.to(v.span);
                            Elem { kind: ElemKind::Pair(w, Box::new(v)), span }
                        }
                        None => {
                            self.error(eq, "SYNTAX", format!("expected a value after `{w}=`"));
                            Elem { kind: ElemKind::Word(w), span: t.span }
                        }
                    }
                } else {
                    self.typed_or_word(w, t.span)
                }
            }
            _ => self.value().unwrap_or_else(|| {
                self.pos += 1;
                Elem { kind: ElemKind::Op(t.tok.clone()), span: t.span }
            }),
        }
    }

    fn typed_or_word(&mut self, w: String, span: Span) -> Elem {
        if self.peek(0) == Some(&Tok::Colon) {
            if let Some(Tok::Word(id)) = self.peek(1) {
                let id = id.clone();
                let end = self.tokens[self.pos + 1].span;
                self.pos += 2;
                return Elem { kind: ElemKind::Typed(w, id), span: span.to(end) };
            }
        }
        Elem { kind: ElemKind::Word(w), span }
    }

    /// A value: word, typed reference, string, list, tuple, or block.
    fn value(&mut self) -> Option<Elem> {
        let t = self.tokens.get(self.pos)?.clone();
        match t.tok {
            Tok::Word(w) => {
                self.pos += 1;
                Some(self.typed_or_word(w, t.span))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Some(Elem { kind: ElemKind::Str(s), span: t.span })
            }
            Tok::LBracket => {
                self.pos += 1;
                let (items, end) = self.seq(Tok::RBracket, t.span);
                Some(Elem { kind: ElemKind::List(items), span: t.span.to(end) })
            }
            Tok::LParen => {
                self.pos += 1;
                let (items, end) = self.seq(Tok::RParen, t.span);
                Some(Elem { kind: ElemKind::Tuple(items), span: t.span.to(end) })
            }
            Tok::LBrace => {
                self.pos += 1;
                let (items, end) = self.block(t.span);
                Some(Elem { kind: ElemKind::Block(items), span: t.span.to(end) })
            }
            _ => None,
        }
    }

    fn closer_check(&mut self, close: &Tok, open: Span) -> Option<Span> {
        if self.pos >= self.tokens.len() || self.at_line_start_keyword() {
            self.error(open, "UNCLOSED", format!("{} is never closed", opener_of(close)));
            let end = self.tokens.get(self.pos.saturating_sub(1)).map_or(open, |t| t.span);
            return Some(end);
        }
        let t = &self.tokens[self.pos];
        if &t.tok == close {
            self.pos += 1;
            return Some(t.span);
        }
        None
    }

    fn seq(&mut self, close: Tok, open: Span) -> (Vec<Elem>, Span) {
        let mut items = Vec::new();
        loop {
            if let Some(end) = self.closer_check(&close, open) {
                return (items, end);
            }
            let t = self.tokens[self.pos].clone();
            match t.tok {
                Tok::Comma | Tok::Semi => self.pos += 1,
                Tok::RBrace | Tok::RBracket | Tok::RParen => {
                    self.error(t.span, "SYNTAX", format!("expected {}, found {}", close.describe(), t.tok.describe()));
                    self.pos += 1;
                }
                _ => {
                    let e = self.elem();
                    items.push(e);
                }
            }
        }
    }

    fn block(&mut self, open: Span) -> (Vec<Vec<Elem>>, Span) {
        let mut items = Vec::new();
        let mut current: Vec<Elem> = Vec::new();
        loop {
            if let Some(end) = self.closer_check(&Tok::RBrace, open) {
                if !current.is_empty() {
                    items.push(current);
                }
                return (items, end);
            }
            let t = self.tokens[self.pos].clone();
            if t.line_start && !current.is_empty() {
                items.push(std::mem::take(&mut current));
            }
            match t.tok {
                Tok::Semi => {
                    self.pos += 1;
                    if !current.is_empty() {
                        items.push(std::mem::take(&mut current));
                    }
                }
                Tok::Comma => self.pos += 1,
                Tok::RBracket | Tok::RParen => {
                    self.error(t.span, "SYNTAX", format!("expected `}}`, found {}", t.tok.describe()));
                    self.pos += 1;
                }
                _ => {
                    let e = self.elem();
                    current.push(e);
                }
            }
        }
    }
}

fn opener_of(close: &Tok) -> &'static str {
    match close {
        Tok::RBracket => "`[`",
        Tok::RParen => "`(`",
        _ => "`{`",
    }
}
