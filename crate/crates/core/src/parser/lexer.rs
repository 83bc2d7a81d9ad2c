use crate::model::SourceSpan;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Arrow,
    Slash,
    Pipe,
    Assign,
    Plus,
    Minus,
    EqEq,
    NotEq,
    Lt,
    Gt,
    /// A character outside the grammar.
    Stray(char),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Stray(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Splits `text` into tokens. With `dotted`, `.` and `-` continue an
/// identifier, which scenario files use for `await-stable` and state paths.
pub(crate) fn lex(text: &str, file: &str, dotted: bool) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let span = |len: usize| SourceSpan { file: file.to_string(), line: start.0, column: start.1, length: len as u32 };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let cont = d.is_ascii_alphanumeric()
                    || d == '_'
                    || (dotted && (d == '.' || d == '-') && chars.get(j + 1).is_some_and(|n| n.is_ascii_alphanumeric() || *n == '_'));
                if !cont {
                    break;
                }
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            out.push(Token { tok: Tok::Ident(word), span: span(j - i) });
            col += (j - i) as u32;
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[i..j].iter().collect();
            let tok = match digits.parse::<i64>() {
                Ok(v) => Tok::Int(v),
                Err(_) => Tok::Stray(c),
            };
            out.push(Token { tok, span: span(j - i) });
            col += (j - i) as u32;
            i = j;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            (':', Some('=')) => (Tok::Assign, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::NotEq, 2),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (';', _) => (Tok::Semi, 1),
            (':', _) => (Tok::Colon, 1),
            (',', _) => (Tok::Comma, 1),
            ('/', _) => (Tok::Slash, 1),
            ('|', _) => (Tok::Pipe, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            _ => (Tok::Stray(c), 1),
        };
        out.push(Token { tok, span: span(len) });
        i += len;
        col += len as u32;
    }
    out.push(Token { tok: Tok::Eof, span: SourceSpan { file: file.to_string(), line, column: col, length: 0 } });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        let toks = lex("a ->\n  b; // c\n", "", false);
        let got: Vec<_> = toks.iter().map(|t| (t.tok.clone(), t.span.line, t.span.column)).collect();
        assert_eq!(
            got,
            vec![
                (Tok::Ident("a".into()), 1, 1),
                (Tok::Arrow, 1, 3),
                (Tok::Ident("b".into()), 2, 3),
                (Tok::Semi, 2, 4),
                (Tok::Eof, 3, 1),
            ]
        );
    }

    #[test]
    fn dotted_mode_joins_paths() {
        let toks = lex("await-stable; Active.Wait1", "", true);
        assert_eq!(toks[0].tok, Tok::Ident("await-stable".into()));
        assert_eq!(toks[2].tok, Tok::Ident("Active.Wait1".into()));
    }
}
