use super::{ParseDiagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Eq,
    EqEq,
    NotEq,
    Ge,
    Le,
    Gt,
    Lt,
    Comma,
    Colon,
    Semi,
    Arrow,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "a string".to_owned(),
            Tok::LBrace => "`{`".to_owned(),
            Tok::RBrace => "`}`".to_owned(),
            Tok::LBracket => "`[`".to_owned(),
            Tok::RBracket => "`]`".to_owned(),
            Tok::LParen => "`(`".to_owned(),
            Tok::RParen => "`)`".to_owned(),
            Tok::Eq => "`=`".to_owned(),
            Tok::EqEq => "`==`".to_owned(),
            Tok::NotEq => "`!=`".to_owned(),
            Tok::Ge => "`>=`".to_owned(),
            Tok::Le => "`<=`".to_owned(),
            Tok::Gt => "`>`".to_owned(),
            Tok::Lt => "`<`".to_owned(),
            Tok::Comma => "`,`".to_owned(),
            Tok::Colon => "`:`".to_owned(),
            Tok::Semi => "`;`".to_owned(),
            Tok::Arrow => "`->`".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// First token on its line.
    pub line_start: bool,
}

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '@' | '/' | '-' | '+')
}

pub fn lex(text: &str, diagnostics: &mut Vec<ParseDiagnostic>, lines: &[&str]) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut line_start = true;
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                line_start = true;
                continue;
            }
            '\r' | ' ' | '\t' => {
                advance(1, &mut i, &mut col);
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(1, &mut i, &mut col);
                }
                continue;
            }
            _ => {}
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('{', _) => (Some(Tok::LBrace), 1),
            ('}', _) => (Some(Tok::RBrace), 1),
            ('[', _) => (Some(Tok::LBracket), 1),
            (']', _) => (Some(Tok::RBracket), 1),
            ('(', _) => (Some(Tok::LParen), 1),
            (')', _) => (Some(Tok::RParen), 1),
            (',', _) => (Some(Tok::Comma), 1),
            (':', _) => (Some(Tok::Colon), 1),
            (';', _) => (Some(Tok::Semi), 1),
            ('=', Some('=')) => (Some(Tok::EqEq), 2),
            ('=', _) => (Some(Tok::Eq), 1),
            ('!', Some('=')) => (Some(Tok::NotEq), 2),
            ('>', Some('=')) => (Some(Tok::Ge), 2),
            ('<', Some('=')) => (Some(Tok::Le), 2),
            ('>', _) => (Some(Tok::Gt), 1),
            ('<', _) => (Some(Tok::Lt), 1),
            ('-', Some('>')) => (Some(Tok::Arrow), 2),
            _ => (None, 0),
        };
        if let Some(tok) = tok {
            advance(width, &mut i, &mut col);
            tokens.push(Token { tok, span: Span::new(start, (line, col)), line_start });
            line_start = false;
            continue;
        }
        if c == '"' {
            advance(1, &mut i, &mut col);
            let mut value = String::new();
            let mut closed = false;
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(1, &mut i, &mut col);
                match ch {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' if i < chars.len() && chars[i] != '\n' => {
                        let escaped = chars[i];
                        advance(1, &mut i, &mut col);
                        match escaped {
                            'n' => value.push('\n'),
                            't' => value.push('\t'),
                            '"' => value.push('"'),
                            '\\' => value.push('\\'),
                            other => {
                                diagnostics.push(ParseDiagnostic::new(
                                    Span::new((line, col - 2), (line, col)),
                                    "BAD_ESCAPE",
                                    format!("unknown escape `\\{other}`"),
                                    lines,
                                ));
                                value.push(other);
                            }
                        }
                    }
                    other => value.push(other),
                }
            }
            if !closed {
                diagnostics.push(ParseDiagnostic::new(
                    Span::new(start, (line, col)),
                    "UNTERMINATED_STRING",
                    "string is not closed before the end of the line",
                    lines,
                ));
            }
            tokens.push(Token { tok: Tok::Str(value), span: Span::new(start, (line, col)), line_start });
            line_start = false;
            continue;
        }
        if is_word_char(c) {
            let mut word = String::new();
            while i < chars.len() && is_word_char(chars[i]) {
                if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                    break;
                }
                word.push(chars[i]);
                advance(1, &mut i, &mut col);
            }
            tokens.push(Token { tok: Tok::Word(word), span: Span::new(start, (line, col)), line_start });
            line_start = false;
            continue;
        }
        advance(1, &mut i, &mut col);
        diagnostics.push(ParseDiagnostic::new(
            Span::new(start, (line, col)),
            "UNEXPECTED_CHARACTER",
            format!("unexpected character {c:?}"),
            lines,
        ));
    }
    tokens
}
