//! Java tokenizer. Comments are dropped except Javadoc blocks, which are
//! attached to the token that follows them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    Ident,
    Keyword,
    /// String, char, text-block, numeric, boolean and null literals.
    Literal,
    Punct,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: Kind,
    pub text: String,
    pub line: u32,
    /// Javadoc comment seen since the previous token, if any.
    pub doc: Option<String>,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == Kind::Punct && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == Kind::Keyword && self.text == k
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

const LITERAL_WORDS: &[&str] = &["true", "false", "null"];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

// Longest first so greedy matching picks e.g. `>>>=` over `>`.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<",
];

// `>>` and `>>>` are deliberately lexed as repeated `>` so generic closers
// like `List<List<T>>` balance without context.

/// Tokenizes Java source. Fails only when the input cannot be a text file:
/// an unterminated block comment or NUL bytes.
pub fn tokenize(src: &str, path: &str) -> Result<Vec<Token>> {
    if src.contains('\0') {
        return Err(Error::Lex {
            path: path.to_owned(),
            message: "NUL byte in source (binary file?)".into(),
        });
    }
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut tokens = Vec::new();
    let mut pending_doc: Option<String> = None;

    let count_lines = |s: &[char]| s.iter().filter(|&&c| c == '\n').count() as u32;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = i;
            let mut j = i + 2;
            loop {
                if j + 1 >= chars.len() {
                    return Err(Error::Lex {
                        path: path.to_owned(),
                        message: format!("unterminated block comment starting on line {line}"),
                    });
                }
                if chars[j] == '*' && chars[j + 1] == '/' {
                    break;
                }
                j += 1;
            }
            let body = &chars[start..j + 2];
            // `/**/` is an empty ordinary comment, not Javadoc.
            if body.len() > 4 && body[2] == '*' {
                pending_doc = Some(body.iter().collect());
            }
            line += count_lines(body);
            i = j + 2;
            continue;
        }

        let tok_line = line;
        let (kind, text, next) = if c.is_alphabetic() || c == '_' || c == '$' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '$')
            {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let kind = if LITERAL_WORDS.contains(&word.as_str()) {
                Kind::Literal
            } else if is_keyword(&word) {
                Kind::Keyword
            } else {
                Kind::Ident
            };
            (kind, word, j)
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let hex = c == '0' && matches!(chars.get(i + 1), Some('x' | 'X'));
            let exp_marks: &[char] = if hex { &['p', 'P'] } else { &['e', 'E'] };
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let signed_exp = (d == '+' || d == '-') && j > i && exp_marks.contains(&chars[j - 1]);
                if d.is_ascii_alphanumeric() || d == '.' || d == '_' || signed_exp {
                    j += 1;
                } else {
                    break;
                }
            }
            (Kind::Literal, chars[i..j].iter().collect(), j)
        } else if c == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"') {
            let mut j = i + 3;
            while j < chars.len() {
                if chars[j] == '\\' {
                    j += 2;
                    continue;
                }
                if chars[j] == '"' && chars.get(j + 1) == Some(&'"') && chars.get(j + 2) == Some(&'"') {
                    j += 3;
                    break;
                }
                j += 1;
            }
            let j = j.min(chars.len());
            line += count_lines(&chars[i..j]);
            (Kind::Literal, chars[i..j].iter().collect(), j)
        } else if c == '"' || c == '\'' {
            // Unterminated quotes end at the line break; Java forbids
            // multi-line string literals so this only loses the bad token.
            let mut j = i + 1;
            while j < chars.len() && chars[j] != '\n' {
                if chars[j] == '\\' {
                    j += 2;
                    continue;
                }
                if chars[j] == c {
                    j += 1;
                    break;
                }
                j += 1;
            }
            let j = j.min(chars.len());
            (Kind::Literal, chars[i..j].iter().collect(), j)
        } else {
            let rest = &chars[i..];
            let op = OPERATORS
                .iter()
                .find(|op| rest.len() >= op.len() && op.chars().zip(rest).all(|(a, b)| a == *b));
            match op {
                Some(op) => (Kind::Punct, (*op).to_owned(), i + op.len()),
                None => (Kind::Punct, c.to_string(), i + 1),
            }
        };
        tokens.push(Token {
            kind,
            text,
            line: tok_line,
            doc: pending_doc.take(),
        });
        i = next;
    }
    Ok(tokens)
}
