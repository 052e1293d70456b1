use std::collections::BTreeSet;

use super::lexer::{tokenize, Kind, Token};
use super::{FileModel, Import, MethodDecl, Param, TypeDecl, TypeKind};
use crate::error::Result;

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "abstract", "final", "native", "synchronized",
    "transient", "volatile", "strictfp", "default",
];

/// Parses one source file into its declarations.
///
/// Best effort: anything not recognised as a declaration is skipped. Only
/// lexical corruption (see [`tokenize`]) is an error.
pub fn parse_file(source: &str, path: &str) -> Result<FileModel> {
    let tokens = tokenize(source, path)?;
    let stem = std::path::Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("Unnamed")
        .to_owned();
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        types: Vec::new(),
    };
    let mut model = FileModel {
        path: path.to_owned(),
        package_name: String::new(),
        imports: Vec::new(),
        type_decls: Vec::new(),
    };
    let mut implicit: Option<usize> = None;

    while !p.eof() {
        if p.at_punct(";") || p.at_punct("}") {
            p.pos += 1;
            continue;
        }
        if p.at_keyword("package") {
            p.pos += 1;
            model.package_name = p.read_dotted();
            p.skip_past(";");
            continue;
        }
        if p.at_keyword("import") {
            p.pos += 1;
            let is_static = p.at_keyword("static");
            if is_static {
                p.pos += 1;
            }
            let name = p.read_dotted();
            let wildcard = p.at_punct(".") && p.peek_is(1, |t| t.is_punct("*"));
            p.skip_past(";");
            if !name.is_empty() {
                model.imports.push(Import {
                    name,
                    wildcard,
                    is_static,
                });
            }
            continue;
        }
        let start = p.pos;
        p.skip_modifiers();
        if p.at_type_keyword() {
            p.parse_type_decl();
            continue;
        }
        p.pos = start;
        if p.member_lookahead() {
            let idx = *implicit.get_or_insert_with(|| {
                p.types.push(TypeDecl {
                    simple_name: stem.clone(),
                    kind: TypeKind::Implicit,
                    super_name: None,
                    methods: Vec::new(),
                });
                p.types.len() - 1
            });
            let mut sink = Vec::new();
            p.parse_member(&mut sink);
            p.types[idx].methods.extend(sink);
        } else {
            p.pos += 1;
        }
    }
    model.type_decls = p.types;
    Ok(model)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    types: Vec<TypeDecl>,
}

/// Identifiers and call targets gathered from a code region.
#[derive(Default)]
struct CodeScan {
    identifiers: Vec<String>,
    callees: BTreeSet<String>,
    /// Methods of anonymous classes found in the region.
    nested_methods: Vec<MethodDecl>,
}

impl Parser {
    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn tok(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_is(&self, off: usize, f: impl Fn(&Token) -> bool) -> bool {
        self.toks.get(self.pos + off).is_some_and(f)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.tok().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.tok().is_some_and(|t| t.is_keyword(k))
    }

    fn at_ident(&self) -> bool {
        self.tok().is_some_and(|t| t.kind == Kind::Ident)
    }

    fn skip_past(&mut self, p: &str) {
        while let Some(t) = self.tok() {
            let done = t.is_punct(p);
            self.pos += 1;
            if done {
                return;
            }
        }
    }

    /// `a.b.c` (stops before `.*` or any other token).
    fn read_dotted(&mut self) -> String {
        let mut name = String::new();
        while self.at_ident() {
            name.push_str(&self.toks[self.pos].text);
            self.pos += 1;
            if self.at_punct(".") && self.peek_is(1, |t| t.kind == Kind::Ident) {
                name.push('.');
                self.pos += 1;
            } else {
                break;
            }
        }
        name
    }

    /// Skips from an opening delimiter to just past its match.
    fn skip_balanced(&mut self, open: &str, close: &str) {
        let mut depth = 0usize;
        while let Some(t) = self.tok() {
            if t.is_punct(open) {
                depth += 1;
            } else if t.is_punct(close) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            }
            self.pos += 1;
        }
    }

    /// `<...>` type parameter or argument list.
    fn skip_angles(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.tok() {
            if t.is_punct("<") {
                depth += 1;
            } else if t.is_punct(">") {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            } else if t.is_punct("{") || t.is_punct(";") || t.is_punct("(") {
                // Not a type list after all.
                return;
            }
            self.pos += 1;
        }
    }

    fn at_annotation(&self) -> bool {
        self.at_punct("@") && !self.peek_is(1, |t| t.is_keyword("interface"))
    }

    fn skip_annotation(&mut self) {
        self.pos += 1;
        self.read_dotted();
        if self.at_punct("(") {
            self.skip_balanced("(", ")");
        }
    }

    fn skip_modifiers(&mut self) {
        loop {
            if self.at_annotation() {
                self.skip_annotation();
            } else if self.tok().is_some_and(|t| {
                (t.kind == Kind::Keyword && MODIFIERS.contains(&t.text.as_str()))
                    || (t.kind == Kind::Ident && t.text == "sealed")
            }) {
                self.pos += 1;
            } else if self.tok().is_some_and(|t| t.kind == Kind::Ident && t.text == "non")
                && self.peek_is(1, |t| t.is_punct("-"))
                && self.peek_is(2, |t| t.text == "sealed")
            {
                self.pos += 3;
            } else {
                return;
            }
        }
    }

    fn at_type_keyword(&self) -> bool {
        let Some(t) = self.tok() else { return false };
        if t.is_keyword("class") || t.is_keyword("interface") || t.is_keyword("enum") {
            return self.peek_is(1, |n| n.kind == Kind::Ident);
        }
        if t.is_punct("@") {
            return self.peek_is(1, |n| n.is_keyword("interface"));
        }
        // `record` is contextual: `record Name(` or `record Name<`.
        t.kind == Kind::Ident
            && t.text == "record"
            && self.peek_is(1, |n| n.kind == Kind::Ident)
            && self.peek_is(2, |n| n.is_punct("(") || n.is_punct("<"))
    }

    /// Whether the tokens ahead look like a field or method declaration.
    fn member_lookahead(&self) -> bool {
        let mut i = self.pos;
        let mut saw_word = false;
        while let Some(t) = self.toks.get(i) {
            match t.kind {
                Kind::Ident | Kind::Keyword => saw_word = true,
                Kind::Punct if t.is_punct("(") || t.is_punct("=") || t.is_punct(";") => {
                    return saw_word && t.is_punct("(") && self.toks[i - 1].kind == Kind::Ident;
                }
                Kind::Punct if t.is_punct("{") || t.is_punct("}") => return false,
                _ => {}
            }
            i += 1;
        }
        false
    }

    /// At a type keyword (modifiers already skipped). Pushes the type and
    /// everything nested inside it onto `self.types`.
    fn parse_type_decl(&mut self) {
        let kind = if self.at_punct("@") {
            self.pos += 2;
            TypeKind::Annotation
        } else {
            let k = match self.toks[self.pos].text.as_str() {
                "class" => TypeKind::Class,
                "interface" => TypeKind::Interface,
                "enum" => TypeKind::Enum,
                _ => TypeKind::Record,
            };
            self.pos += 1;
            k
        };
        if !self.at_ident() {
            return;
        }
        let simple_name = self.toks[self.pos].text.clone();
        self.pos += 1;
        if self.at_punct("<") {
            self.skip_angles();
        }
        if kind == TypeKind::Record && self.at_punct("(") {
            self.skip_balanced("(", ")");
        }
        let mut super_name = None;
        while let Some(t) = self.tok() {
            if t.is_punct("{") || t.is_punct(";") || t.is_punct("}") {
                break;
            }
            if t.is_keyword("extends") && super_name.is_none() {
                self.pos += 1;
                while self.at_annotation() {
                    self.skip_annotation();
                }
                let name = self.read_dotted();
                if !name.is_empty() {
                    super_name = Some(name);
                }
                continue;
            }
            self.pos += 1;
        }
        let idx = self.types.len();
        self.types.push(TypeDecl {
            simple_name,
            kind,
            super_name,
            methods: Vec::new(),
        });
        if self.at_punct("{") {
            self.pos += 1;
            let mut methods = Vec::new();
            self.parse_type_body(&mut methods, kind == TypeKind::Enum);
            self.types[idx].methods = methods;
        }
    }

    /// Parses members after the opening `{` through the closing `}`.
    fn parse_type_body(&mut self, sink: &mut Vec<MethodDecl>, is_enum: bool) {
        if is_enum {
            self.parse_enum_constants(sink);
        }
        while let Some(t) = self.tok() {
            if t.is_punct("}") {
                self.pos += 1;
                return;
            }
            if t.is_punct(";") {
                self.pos += 1;
                continue;
            }
            self.parse_member(sink);
        }
    }

    fn parse_enum_constants(&mut self, sink: &mut Vec<MethodDecl>) {
        while let Some(t) = self.tok() {
            if t.is_punct(";") {
                self.pos += 1;
                return;
            }
            if t.is_punct("}") {
                return;
            }
            if t.is_punct("(") {
                let scan = self.scan_until_close(")");
                sink.extend(scan.nested_methods);
            } else if t.is_punct("{") {
                self.pos += 1;
                self.parse_type_body(sink, false);
            } else {
                self.pos += 1;
            }
        }
    }

    /// One class-body member: field, method, constructor, initializer, or
    /// nested type. Always advances at least one token.
    fn parse_member(&mut self, sink: &mut Vec<MethodDecl>) {
        let start = self.pos;
        // Stray tokens such as elision marks (`...`) in hand-written snippets.
        while self.tok().is_some_and(|t| {
            t.kind == Kind::Punct && !matches!(t.text.as_str(), "@" | "<" | "{" | ";" | "}")
        }) {
            self.pos += 1;
        }
        let member_start = self.pos;
        self.skip_modifiers();
        if self.eof() {
            return;
        }
        if self.at_type_keyword() {
            self.parse_type_decl();
            return;
        }
        if self.at_punct("{") {
            // Initializer block.
            let scan = self.scan_block();
            sink.extend(scan.nested_methods);
            return;
        }
        if self.at_punct("}") {
            return;
        }
        if self.at_punct("<") {
            self.skip_angles();
        }

        let header_start = self.pos;
        let mut i = self.pos;
        let mut angle = 0usize;
        let stop = loop {
            let Some(t) = self.toks.get(i) else { break None };
            if t.kind == Kind::Punct {
                match t.text.as_str() {
                    "<" => angle += 1,
                    ">" => angle = angle.saturating_sub(1),
                    "(" | "=" | ";" | "{" | "}" if angle == 0 => break Some(t.text.clone()),
                    _ => {}
                }
            }
            i += 1;
        };

        match stop.as_deref() {
            Some("(") if i > header_start && self.toks[i - 1].kind == Kind::Ident => {
                self.parse_method(member_start, header_start, i, sink);
            }
            Some("=") => {
                self.pos = i + 1;
                let scan = self.scan_until_terminator();
                sink.extend(scan.nested_methods);
            }
            Some(";") => self.pos = i + 1,
            Some("{") => {
                self.pos = i;
                let scan = self.scan_block();
                sink.extend(scan.nested_methods);
            }
            Some("(") => {
                self.pos = i;
                self.skip_balanced("(", ")");
            }
            Some("}") => self.pos = i,
            _ => self.pos = self.toks.len(),
        }
        if self.pos == start {
            self.pos += 1;
        }
    }

    fn parse_method(
        &mut self,
        member_start: usize,
        header_start: usize,
        paren: usize,
        sink: &mut Vec<MethodDecl>,
    ) {
        let name_idx = paren - 1;
        let name = self.toks[name_idx].text.clone();
        let javadoc = self.toks[member_start..=name_idx]
            .iter()
            .find_map(|t| t.doc.clone());
        let start_line = self.toks[member_start].line;

        let type_toks: Vec<&Token> = {
            let mut out = Vec::new();
            let mut k = header_start;
            while k < name_idx {
                let t = &self.toks[k];
                if t.is_punct("@") && !self.toks.get(k + 1).is_some_and(|n| n.is_keyword("interface")) {
                    // Type annotation: `@Ann` or `@Ann(...)`.
                    k += 1;
                    while k < name_idx
                        && (self.toks[k].kind == Kind::Ident || self.toks[k].is_punct("."))
                    {
                        k += 1;
                    }
                    if k < name_idx && self.toks[k].is_punct("(") {
                        let mut depth = 0;
                        while k < name_idx {
                            if self.toks[k].is_punct("(") {
                                depth += 1;
                            } else if self.toks[k].is_punct(")") {
                                depth -= 1;
                                if depth == 0 {
                                    k += 1;
                                    break;
                                }
                            }
                            k += 1;
                        }
                    }
                    continue;
                }
                if !(t.kind == Kind::Keyword && MODIFIERS.contains(&t.text.as_str())) {
                    out.push(t);
                }
                k += 1;
            }
            out
        };
        let is_constructor = type_toks.is_empty();
        let return_type = join_type(&type_toks);

        self.pos = paren;
        let params_end = self.matching(paren, "(", ")");
        let params = parse_params(&self.toks[paren + 1..params_end.min(self.toks.len())]);
        self.pos = params_end + 1;

        // Trailing dims, `throws`, or an annotation default value.
        while let Some(t) = self.tok() {
            if t.is_punct("{") || t.is_punct(";") || t.is_punct("}") {
                break;
            }
            if t.is_keyword("default") {
                self.scan_until_terminator();
                self.pos -= 1;
                break;
            }
            self.pos += 1;
        }

        let (scan, has_body) = if self.at_punct("{") {
            (self.scan_block(), true)
        } else {
            if self.at_punct(";") {
                self.pos += 1;
            }
            (CodeScan::default(), false)
        };
        let end_line = self
            .toks
            .get(self.pos.saturating_sub(1))
            .map_or(start_line, |t| t.line);

        sink.push(MethodDecl {
            name,
            return_type,
            params,
            body_identifiers: scan.identifiers,
            callee_names: scan.callees,
            javadoc,
            span: (start_line, end_line),
            is_constructor,
            has_body,
        });
        sink.extend(scan.nested_methods);
    }

    /// Index of the delimiter closing the one at `open_idx`, or the token
    /// count when unbalanced.
    fn matching(&self, open_idx: usize, open: &str, close: &str) -> usize {
        let mut depth = 0usize;
        for (k, t) in self.toks.iter().enumerate().skip(open_idx) {
            if t.is_punct(open) {
                depth += 1;
            } else if t.is_punct(close) {
                depth -= 1;
                if depth == 0 {
                    return k;
                }
            }
        }
        self.toks.len()
    }

    /// At `{`: scans the block through its closing `}`.
    fn scan_block(&mut self) -> CodeScan {
        self.scan_until_close("}")
    }

    /// At an opening delimiter: scans through the matching `close`.
    fn scan_until_close(&mut self, close: &str) -> CodeScan {
        self.pos += 1;
        let mut scan = CodeScan::default();
        self.scan_code(&mut scan, Some(close));
        scan
    }

    /// Scans an initializer expression through its `;` (or up to an
    /// unbalanced `}`).
    fn scan_until_terminator(&mut self) -> CodeScan {
        let mut scan = CodeScan::default();
        self.scan_code(&mut scan, None);
        scan
    }

    /// Walks code until the `close` delimiter at depth zero (consumed), or, with
    /// no `close`, until a depth-zero `;` (consumed) or unbalanced `}` (left).
    fn scan_code(&mut self, scan: &mut CodeScan, close: Option<&str>) {
        // One entry per open delimiter; `true` marks the argument list of a
        // `new T(...)` expression, whose `)` may be followed by a class body.
        let mut stack: Vec<(char, bool)> = Vec::new();
        let mut in_new = false;
        let mut prev_dot = false;
        while let Some(t) = self.tok() {
            let t = t.clone();
            match t.kind {
                Kind::Punct => {
                    let p = t.text.as_str();
                    if stack.is_empty() {
                        if Some(p) == close {
                            self.pos += 1;
                            return;
                        }
                        if close.is_none() && p == ";" {
                            self.pos += 1;
                            return;
                        }
                        if p == "}" || p == ")" || p == "]" {
                            if close.is_none() {
                                return;
                            }
                            // Unbalanced closer inside a block: tolerate.
                            self.pos += 1;
                            continue;
                        }
                    }
                    match p {
                        "(" => {
                            stack.push(('(', in_new));
                            in_new = false;
                        }
                        "[" => {
                            stack.push(('[', false));
                            in_new = false;
                        }
                        "{" => stack.push(('{', false)),
                        ")" | "]" | "}" => {
                            let (_, was_new) = stack.pop().unwrap_or(('?', false));
                            if p == ")" && was_new && self.peek_is(1, |n| n.is_punct("{")) {
                                self.pos += 2;
                                self.parse_type_body(&mut scan.nested_methods, false);
                                prev_dot = false;
                                continue;
                            }
                        }
                        "." | "<" | ">" | "," | "?" | "&" => {}
                        _ => in_new = false,
                    }
                    prev_dot = p == ".";
                    self.pos += 1;
                }
                Kind::Keyword => {
                    if !prev_dot
                        && (t.text == "class" || t.text == "interface" || t.text == "enum")
                        && self.at_type_keyword()
                    {
                        self.parse_type_decl();
                        prev_dot = false;
                        continue;
                    }
                    in_new = t.text == "new";
                    prev_dot = false;
                    self.pos += 1;
                }
                Kind::Ident => {
                    if !prev_dot && self.at_type_keyword() {
                        self.parse_type_decl();
                        continue;
                    }
                    let is_call = self.peek_is(1, |n| n.is_punct("("));
                    if is_call && !in_new {
                        scan.callees.insert(t.text.clone());
                    }
                    scan.identifiers.push(t.text);
                    prev_dot = false;
                    self.pos += 1;
                }
                Kind::Literal => {
                    in_new = false;
                    prev_dot = false;
                    self.pos += 1;
                }
            }
        }
    }
}

fn is_word(t: &Token) -> bool {
    matches!(t.kind, Kind::Ident | Kind::Keyword | Kind::Literal)
}

/// Joins type tokens, inserting a space only between adjacent words.
fn join_type(toks: &[&Token]) -> String {
    let mut s = String::new();
    let mut prev_word = false;
    for t in toks {
        let word = is_word(t);
        if word && prev_word {
            s.push(' ');
        }
        s.push_str(&t.text);
        prev_word = word;
    }
    s
}

fn parse_params(toks: &[Token]) -> Vec<Param> {
    let mut groups: Vec<Vec<&Token>> = vec![Vec::new()];
    let mut depth = 0i32;
    for t in toks {
        if t.kind == Kind::Punct {
            match t.text.as_str() {
                "<" | "(" | "[" => depth += 1,
                ">" | ")" | "]" => depth -= 1,
                "," if depth == 0 => {
                    groups.push(Vec::new());
                    continue;
                }
                _ => {}
            }
        }
        groups.last_mut().unwrap().push(t);
    }
    groups
        .into_iter()
        .filter_map(|g| {
            let mut toks: Vec<&Token> = Vec::new();
            let mut k = 0;
            while k < g.len() {
                let t = g[k];
                if t.is_punct("@") {
                    k += 1;
                    while k < g.len() && (g[k].kind == Kind::Ident || g[k].is_punct(".")) {
                        k += 1;
                    }
                    if k < g.len() && g[k].is_punct("(") {
                        let mut d = 0;
                        while k < g.len() {
                            if g[k].is_punct("(") {
                                d += 1;
                            } else if g[k].is_punct(")") {
                                d -= 1;
                                if d == 0 {
                                    k += 1;
                                    break;
                                }
                            }
                            k += 1;
                        }
                    }
                    continue;
                }
                if !t.is_keyword("final") {
                    toks.push(t);
                }
                k += 1;
            }
            // C-style array dims after the name: `String args[]`.
            let mut dims = 0;
            while toks.len() >= 2
                && toks[toks.len() - 1].is_punct("]")
                && toks[toks.len() - 2].is_punct("[")
            {
                toks.truncate(toks.len() - 2);
                dims += 1;
            }
            let name_tok = toks.pop()?;
            if name_tok.kind != Kind::Ident || toks.is_empty() {
                // Receiver parameter (`Foo this`) or garbage.
                return None;
            }
            let mut ty = join_type(&toks);
            for _ in 0..dims {
                ty.push_str("[]");
            }
            Some(Param {
                ty,
                name: name_tok.text.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> FileModel {
        parse_file(src, "Test.java").unwrap()
    }

    fn names(f: &FileModel) -> Vec<&str> {
        f.methods().map(|m| m.name.as_str()).collect()
    }

    #[test]
    fn empty_source() {
        let f = parse("");
        assert!(f.type_decls.is_empty());
        assert!(f.imports.is_empty());
    }

    #[test]
    fn package_imports_and_class() {
        let f = parse(
            "package a.b;\nimport java.util.*;\nimport static x.Y.z;\nimport c.D;\n\
             public final class Foo<T extends Comparable<T>> extends base.Bar<T> implements Baz {\n\
               private int x = 3;\n\
               public Foo(int x) { this.x = x; }\n\
               public static <K> java.util.List<K> make(final Map<K, V> m, String... rest) throws Exception { return m.get(x); }\n\
             }",
        );
        assert_eq!(f.package_name, "a.b");
        assert_eq!(
            f.imports,
            vec![
                Import { name: "java.util".into(), wildcard: true, is_static: false },
                Import { name: "x.Y.z".into(), wildcard: false, is_static: true },
                Import { name: "c.D".into(), wildcard: false, is_static: false },
            ]
        );
        let t = &f.type_decls[0];
        assert_eq!(t.simple_name, "Foo");
        assert_eq!(t.super_name.as_deref(), Some("base.Bar"));
        assert_eq!(names(&f), vec!["Foo", "make"]);
        let ctor = &t.methods[0];
        assert!(ctor.is_constructor);
        assert_eq!(ctor.return_type, "");
        assert_eq!(ctor.body_identifiers, vec!["x", "x"]);
        let make = &t.methods[1];
        assert_eq!(make.return_type, "java.util.List<K>");
        assert_eq!(
            make.params,
            vec![
                Param { ty: "Map<K,V>".into(), name: "m".into() },
                Param { ty: "String...".into(), name: "rest".into() },
            ]
        );
        assert_eq!(make.body_identifiers, vec!["m", "get", "x"]);
        assert!(make.callee_names.contains("get"));
        assert_eq!(make.callee_names.len(), 1);
    }

    #[test]
    fn anonymous_methods_go_to_enclosing_type() {
        let f = parse(
            "class Outer {\n\
               void run() {\n\
                 Runnable r = new Runnable() {\n\
                   public void run() { inner(); }\n\
                 };\n\
                 r.run();\n\
               }\n\
               void after() { new Thing(arg); }\n\
             }",
        );
        assert_eq!(f.type_decls.len(), 1);
        assert_eq!(names(&f), vec!["run", "run", "after"]);
        let outer = &f.type_decls[0].methods[0];
        assert_eq!(outer.body_identifiers, vec!["Runnable", "r", "Runnable", "r", "run"]);
        assert!(!outer.callee_names.contains("inner"));
        assert!(outer.callee_names.contains("run"));
        let after = &f.type_decls[0].methods[2];
        // Constructor names are not calls.
        assert!(after.callee_names.is_empty());
        assert_eq!(after.body_identifiers, vec!["Thing", "arg"]);
    }

    #[test]
    fn nested_and_local_types_are_separate() {
        let f = parse(
            "class A { void a() { class Local { void l() {} } int k = Foo.class.hashCode(); }\n\
               static class B { void b() {} }\n\
               interface C { int c(); default void d() { c(); } }\n\
               enum E { X { void x() {} }, Y(1); E() {} E(int v) {} void e() {} }\n\
               record R(int q) { int q2() { return q; } }\n\
             }",
        );
        let types: Vec<&str> = f.type_decls.iter().map(|t| t.simple_name.as_str()).collect();
        assert_eq!(types, vec!["A", "Local", "B", "C", "E", "R"]);
        assert_eq!(f.type_decls[0].methods.len(), 1);
        assert_eq!(
            f.type_decls[0].methods[0].body_identifiers,
            vec!["k", "Foo", "hashCode"]
        );
        assert_eq!(f.type_decls[3].methods.iter().map(|m| &m.name).collect::<Vec<_>>(), ["c", "d"]);
        assert!(!f.type_decls[3].methods[0].has_body);
        assert_eq!(
            f.type_decls[4].methods.iter().map(|m| &m.name).collect::<Vec<_>>(),
            ["x", "E", "E", "e"]
        );
        assert_eq!(f.type_decls[5].methods[0].name, "q2");
    }

    #[test]
    fn javadoc_and_spans() {
        let f = parse(
            "class A {\n\
             /** Does a thing.\n * @param x ignored */\n\
             @Override\n\
             public void f(int x) {\n\
               g(x);\n\
             }\n\
             int h() { return 0; }\n\
             }",
        );
        let m = &f.type_decls[0].methods;
        assert!(m[0].javadoc.as_deref().unwrap().starts_with("/** Does a thing."));
        assert_eq!(m[0].span, (4, 7));
        assert!(m[1].javadoc.is_none());
        assert_eq!(m[1].span, (8, 8));
    }

    #[test]
    fn bare_members_form_implicit_type() {
        let f = parse_file("public int a() { return b(); }\nvoid c() {}", "dir/Snippet.java").unwrap();
        assert_eq!(f.type_decls.len(), 1);
        assert_eq!(f.type_decls[0].simple_name, "Snippet");
        assert_eq!(f.type_decls[0].kind, TypeKind::Implicit);
        assert_eq!(names(&f), vec!["a", "c"]);
    }

    #[test]
    fn annotation_types_and_defaults() {
        let f = parse("@interface Ann { String value() default \"x\"; int[] n() default {1, 2}; }");
        assert_eq!(f.type_decls[0].kind, TypeKind::Annotation);
        assert_eq!(names(&f), vec!["value", "n"]);
    }

    #[test]
    fn lambdas_and_control_flow() {
        let f = parse(
            "class A { void f(List<String> xs) {\n\
               for (String s : xs) { if (s.isEmpty()) continue; }\n\
               xs.forEach(s -> { log(s); });\n\
               switch (k) { case 1: break; default: other(); }\n\
             } }",
        );
        let m = &f.type_decls[0].methods[0];
        let callees: Vec<&str> = m.callee_names.iter().map(String::as_str).collect();
        assert_eq!(callees, vec!["forEach", "isEmpty", "log", "other"]);
        assert_eq!(
            m.body_identifiers,
            vec!["String", "s", "xs", "s", "isEmpty", "xs", "forEach", "s", "log", "s", "k", "other"]
        );
    }

    #[test]
    fn c_style_array_params() {
        let f = parse("class A { static void main(String args[], @Ann(1) final int[] n) {} }");
        assert_eq!(
            f.type_decls[0].methods[0].params,
            vec![
                Param { ty: "String[]".into(), name: "args".into() },
                Param { ty: "int[]".into(), name: "n".into() },
            ]
        );
    }

    #[test]
    fn deterministic() {
        let src = "class A { void f() { g(); } }";
        assert_eq!(parse(src), parse(src));
    }
}
