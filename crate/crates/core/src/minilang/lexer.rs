use super::ProgramError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    Char(char),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCTS: [&str; 27] = [
    "->", "<=", ">=", "==", "!=", "&&", "||", "(", ")", "{", "}", "[", "]", ",", ";", ":", ".",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "|",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ProgramError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| ProgramError::Syntax { line, col, message };

    while i < chars.len() {
        let c = chars[i];
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
        if c == '/' && chars.get(i + 1) == Some(&'/') || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(word), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if is_real {
                Tok::Real(text.parse().map_err(|_| err(start_line, start_col, format!("bad real literal `{text}`")))?)
            } else {
                Tok::Int(text.parse().map_err(|_| err(start_line, start_col, format!("integer literal `{text}` out of range")))?)
            };
            out.push(Token { tok, line: start_line, col: start_col });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            col += 1;
            let mut text = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(start_line, start_col, "unterminated literal".into()));
                };
                i += 1;
                col += 1;
                if ch == quote {
                    break;
                }
                if ch == '\n' {
                    return Err(err(start_line, start_col, "newline in literal".into()));
                }
                if ch == '\\' {
                    let Some(&esc) = chars.get(i) else {
                        return Err(err(line, col, "dangling escape".into()));
                    };
                    i += 1;
                    col += 1;
                    match esc {
                        'n' => text.push('\n'),
                        't' => text.push('\t'),
                        '\\' => text.push('\\'),
                        '"' => text.push('"'),
                        '\'' => text.push('\''),
                        'u' => {
                            let hex: String = chars.iter().skip(i).take(4).collect();
                            let code = u32::from_str_radix(&hex, 16)
                                .ok()
                                .filter(|_| hex.len() == 4)
                                .and_then(char::from_u32)
                                .ok_or_else(|| err(line, col, format!("bad unicode escape `\\u{hex}`")))?;
                            text.push(code);
                            i += 4;
                            col += 4;
                        }
                        other => return Err(err(line, col - 1, format!("unknown escape `\\{other}`"))),
                    }
                } else {
                    text.push(ch);
                }
            }
            let tok = if quote == '"' {
                Tok::Str(text)
            } else {
                let mut it = text.chars();
                match (it.next(), it.next()) {
                    (Some(ch), None) => Tok::Char(ch),
                    _ => return Err(err(start_line, start_col, "character literal must hold one character".into())),
                }
            };
            out.push(Token { tok, line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
            return Err(err(line, col, format!("unexpected character `{c}`")));
        };
        if *p == "|" {
            return Err(err(line, col, "unexpected character `|`".into()));
        }
        i += p.len();
        col += p.len();
        out.push(Token { tok: Tok::Punct(p), line: start_line, col: start_col });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
