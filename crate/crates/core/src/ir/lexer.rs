use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Local(String),
    Global(String),
    Number(String),
    Str(String),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == ';' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c == '%' || c == '@' {
            bump!();
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                bump!();
            }
            if start == i {
                return Err(ParseError::new(tl, tc, format!("expected a name after '{c}'")));
            }
            let name: String = chars[start..i].iter().collect();
            if c == '%' {
                Tok::Local(name)
            } else {
                Tok::Global(name)
            }
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(ParseError::new(tl, tc, "unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        match chars.get(i) {
                            Some(&e @ ('"' | '\\')) => s.push(e),
                            _ => return Err(ParseError::new(line, col, "bad escape in string")),
                        }
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            Tok::Str(s)
        } else if c.is_ascii_digit()
            || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric()))
        {
            let start = i;
            bump!();
            let hex = {
                let body: String = chars[start..].iter().take(4).collect();
                let body = body.trim_start_matches(['-', '+']);
                body.starts_with("0x") || body.starts_with("0X")
            };
            while i < chars.len() {
                let ch = chars[i];
                let prev = chars[i - 1];
                let exp_marker = if hex { matches!(prev, 'p' | 'P') } else { matches!(prev, 'e' | 'E') };
                if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' || ((ch == '-' || ch == '+') && exp_marker) {
                    bump!();
                } else {
                    break;
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                bump!();
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if "(){}[]<>,:=!".contains(c) {
            bump!();
            Tok::Punct(c)
        } else {
            return Err(ParseError::new(tl, tc, format!("unexpected character '{c}'")));
        };
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
