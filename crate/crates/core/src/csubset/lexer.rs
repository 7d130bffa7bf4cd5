//! Hand-rolled lexer for the C subset. Comments and whitespace vanish here;
//! `#include <...>` lines are surfaced as Include tokens.

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Include(String),
    // punctuation / operators
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Colon,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Amp,
    Bang,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    PercentAssign,
    PlusPlus,
    MinusMinus,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! err {
        ($($arg:tt)*) => {
            return Err(ParseError::new(line, col, format!($($arg)*)))
        };
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if bytes[*i] == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };

        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            loop {
                if i + 1 >= bytes.len() {
                    err!("unterminated block comment");
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    advance(&mut i, &mut line, &mut col);
                    advance(&mut i, &mut line, &mut col);
                    break;
                }
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '#' {
            // only `#include <header>` / `#include "header"` is admitted
            let start = i;
            while i < bytes.len() && bytes[i] != b'\n' {
                advance(&mut i, &mut line, &mut col);
            }
            let dline = &text[start..i];
            let rest = dline.trim_start_matches('#').trim_start();
            if let Some(spec) = rest.strip_prefix("include") {
                let spec = spec.trim();
                let angled = spec.starts_with('<') && spec.ends_with('>');
                let quoted = spec.starts_with('"') && spec.ends_with('"') && spec.len() >= 2;
                if !angled && !quoted {
                    err!("malformed #include directive: {dline}");
                }
                let header = &spec[1..spec.len() - 1];
                out.push(Token {
                    tok: Tok::Include(header.to_string()),
                    line: tl,
                    col: tc,
                });
                continue;
            }
            err!("unsupported preprocessor directive: {dline}");
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                advance(&mut i, &mut line, &mut col);
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut is_hex = false;
            if c == '0' && i + 1 < bytes.len() && (bytes[i + 1] | 32) == b'x' {
                is_hex = true;
                advance(&mut i, &mut line, &mut col);
                advance(&mut i, &mut line, &mut col);
            }
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_hexdigit() && is_hex
                    || (bytes[i] as char).is_ascii_digit())
            {
                advance(&mut i, &mut line, &mut col);
            }
            let lit = &text[start..i];
            let value = if is_hex {
                i64::from_str_radix(&lit[2..], 16)
            } else {
                lit.parse::<i64>()
            };
            match value {
                Ok(v) => out.push(Token {
                    tok: Tok::Int(v),
                    line: tl,
                    col: tc,
                }),
                Err(_) => err!("integer literal out of range: {lit}"),
            }
            continue;
        }

        let two = if i + 1 < bytes.len() {
            &text[i..i + 2]
        } else {
            ""
        };
        let tok2 = match two {
            "+=" => Some(Tok::PlusAssign),
            "-=" => Some(Tok::MinusAssign),
            "*=" => Some(Tok::StarAssign),
            "/=" => Some(Tok::SlashAssign),
            "%=" => Some(Tok::PercentAssign),
            "++" => Some(Tok::PlusPlus),
            "--" => Some(Tok::MinusMinus),
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "==" => Some(Tok::EqEq),
            "!=" => Some(Tok::Ne),
            "&&" => Some(Tok::AndAnd),
            "||" => Some(Tok::OrOr),
            _ => None,
        };
        if let Some(tok) = tok2 {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            continue;
        }
        let tok1 = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '&' => Tok::Amp,
            '!' => Tok::Bang,
            '=' => Tok::Assign,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            _ => err!("unexpected character {c:?}"),
        };
        advance(&mut i, &mut line, &mut col);
        out.push(Token {
            tok: tok1,
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
