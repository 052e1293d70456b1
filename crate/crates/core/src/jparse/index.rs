use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use walkdir::WalkDir;

use super::{parse_file, FileModel};
use crate::error::{Error, Result};

/// Location of a type declaration inside a [`ProjectIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeRef {
    pub file: usize,
    pub ty: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProjectIndex {
    pub root: String,
    pub files: Vec<FileModel>,
    /// `package.Simple` (or `Simple` in the default package) to declaration.
    pub type_table: BTreeMap<String, TypeRef>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ProjectIndex {
    pub fn lookup(&self, qualified: &str) -> Option<TypeRef> {
        self.type_table.get(qualified).copied()
    }

    /// Types directly in `package`, ordered by qualified name.
    pub fn types_in_package<'a>(&'a self, package: &'a str) -> impl Iterator<Item = TypeRef> + 'a {
        let prefix = format!("{package}.");
        self.type_table
            .range(prefix.clone()..)
            .map_while(move |(k, r)| k.strip_prefix(&prefix).map(|rest| (rest, *r)))
            .filter(|(rest, _)| !rest.contains('.'))
            .map(|(_, r)| r)
    }

    /// Resolves a type name as written in `file`: qualified names directly,
    /// simple names through explicit imports, wildcard imports, then the
    /// file's own package.
    pub fn resolve_type_name(&self, file: &FileModel, name: &str) -> Option<TypeRef> {
        if name.contains('.') {
            if let Some(r) = self.lookup(name) {
                return Some(r);
            }
        }
        let simple = name.rsplit('.').next().unwrap_or(name);
        let head = name.split('.').next().unwrap_or(name);
        for imp in file.imports.iter().filter(|i| !i.wildcard) {
            let last = imp.name.rsplit('.').next().unwrap_or(&imp.name);
            if last == head {
                let full = if head == name {
                    imp.name.clone()
                } else {
                    format!("{}{}", imp.name, &name[head.len()..])
                };
                if let Some(r) = self.lookup(&full) {
                    return Some(r);
                }
            }
        }
        for imp in file.imports.iter().filter(|i| i.wildcard) {
            if let Some(r) = self.lookup(&format!("{}.{}", imp.name, simple)) {
                return Some(r);
            }
        }
        self.lookup(&file.qualify(name))
    }

    pub fn file_index(&self, path: &str) -> Option<usize> {
        self.files.iter().position(|f| f.path == path)
    }
}

/// Builds an index from in-memory sources, in the given order. Unparseable
/// files are dropped with a diagnostic; duplicate qualified names keep the
/// first declaration.
pub fn index_sources(root: &str, sources: Vec<(String, String)>) -> ProjectIndex {
    let parsed: Vec<Result<FileModel>> = sources
        .par_iter()
        .map(|(path, text)| parse_file(text, path))
        .collect();
    let mut idx = ProjectIndex {
        root: root.to_owned(),
        ..Default::default()
    };
    for ((path, _), res) in sources.iter().zip(parsed) {
        match res {
            Ok(model) => idx.files.push(model),
            Err(e) => idx.diagnostics.push(Diagnostic {
                path: path.clone(),
                message: format!("skipped: {e}"),
            }),
        }
    }
    for (fi, file) in idx.files.iter().enumerate() {
        for (ti, t) in file.type_decls.iter().enumerate() {
            let key = file.qualify(&t.simple_name);
            match idx.type_table.get(&key) {
                Some(prev) => idx.diagnostics.push(Diagnostic {
                    path: file.path.clone(),
                    message: format!(
                        "duplicate type `{key}` ignored; first declared in {}",
                        idx.files[prev.file].path
                    ),
                }),
                None => {
                    idx.type_table.insert(key, TypeRef { file: fi, ty: ti });
                }
            }
        }
    }
    idx
}

/// Parses every `*.java` file under `root`, walking in sorted path order.
/// Paths in the index are relative to `root` with `/` separators.
///
/// `GTNM_THREADS` caps the number of parsing threads.
pub fn index_project(root: &Path) -> Result<ProjectIndex> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut sources = Vec::new();
    let mut diagnostics = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                diagnostics.push(Diagnostic {
                    path: e.path().map_or_else(String::new, |p| p.display().to_string()),
                    message: format!("skipped: {e}"),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "java") {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        match std::fs::read(entry.path()) {
            Ok(bytes) => sources.push((rel, String::from_utf8_lossy(&bytes).into_owned())),
            Err(e) => diagnostics.push(Diagnostic {
                path: rel,
                message: format!("skipped: {e}"),
            }),
        }
    }
    let root_name = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| root.display().to_string());

    let threads = std::env::var("GTNM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut idx = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| index_sources(&root_name, sources)),
        None => index_sources(&root_name, sources),
    };
    diagnostics.append(&mut idx.diagnostics);
    idx.diagnostics = diagnostics;
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(path: &str, text: &str) -> (String, String) {
        (path.to_owned(), text.to_owned())
    }

    #[test]
    fn duplicate_types_keep_first() {
        let idx = index_sources(
            "p",
            vec![
                src("a/X.java", "package q; class X { void first() {} }"),
                src("b/X.java", "package q; class X { void second() {} }"),
            ],
        );
        assert_eq!(idx.type_table.len(), 1);
        assert_eq!(idx.diagnostics.len(), 1);
        assert_eq!(idx.lookup("q.X"), Some(TypeRef { file: 0, ty: 0 }));
    }

    #[test]
    fn corrupt_file_is_skipped() {
        let idx = index_sources(
            "p",
            vec![src("Bad.java", "/** open"), src("Good.java", "class Good {}")],
        );
        assert_eq!(idx.files.len(), 1);
        assert_eq!(idx.diagnostics.len(), 1);
        assert!(idx.diagnostics[0].to_string().starts_with("Bad.java: skipped"));
    }

    #[test]
    fn default_package_keys_are_simple() {
        let idx = index_sources("p", vec![src("A.java", "class A {}")]);
        assert!(idx.lookup("A").is_some());
    }

    #[test]
    fn package_listing_excludes_subpackages() {
        let idx = index_sources(
            "p",
            vec![
                src("B.java", "package k; class B {}"),
                src("A.java", "package k; class A {}"),
                src("C.java", "package k.sub; class C {}"),
                src("D.java", "package kk; class D {}"),
            ],
        );
        let got: Vec<TypeRef> = idx.types_in_package("k").collect();
        assert_eq!(got, vec![TypeRef { file: 1, ty: 0 }, TypeRef { file: 0, ty: 0 }]);
    }
}
