//! Declaration-level Java parsing and per-method context extraction.
//!
//! The parser recovers the package, imports, type declarations, and method
//! declarations of a file. Method bodies are brace-matched and reduced to the
//! identifiers they mention and the simple names they call; no types are
//! resolved. [`ProjectIndex`] maps qualified type names to declarations so the
//! methods of imported project files can be gathered as cross-file context.

mod context;
mod index;
pub mod lexer;
mod parser;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use context::{
    detect_invocations, extract_crossfile_context, extract_doc_context, extract_infile_context,
    extract_local_context,
};
pub use index::{index_project, index_sources, Diagnostic, ProjectIndex, TypeRef};
pub use parser::parse_file;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Import {
    /// Dotted name without the trailing `.*`.
    pub name: String,
    pub wildcard: bool,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub ty: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub name: String,
    /// Declared return type as written; empty for constructors.
    pub return_type: String,
    pub params: Vec<Param>,
    /// Identifier tokens of the body in source order, duplicates kept.
    pub body_identifiers: Vec<String>,
    /// Simple names used as call targets in the body.
    pub callee_names: BTreeSet<String>,
    pub javadoc: Option<String>,
    /// First and last source line, 1-based and inclusive.
    pub span: (u32, u32),
    pub is_constructor: bool,
    pub has_body: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
    /// Top-level members outside any declaration, named after the file.
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub simple_name: String,
    pub kind: TypeKind,
    /// Superclass (or first super-interface) without type arguments.
    pub super_name: Option<String>,
    pub methods: Vec<MethodDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileModel {
    pub path: String,
    pub package_name: String,
    pub imports: Vec<Import>,
    /// Named types in order of their declaration keyword; nested types follow
    /// their enclosing type.
    pub type_decls: Vec<TypeDecl>,
}

impl FileModel {
    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.type_decls.iter().flat_map(|t| t.methods.iter())
    }

    pub fn qualify(&self, simple: &str) -> String {
        if self.package_name.is_empty() {
            simple.to_owned()
        } else {
            format!("{}.{}", self.package_name, simple)
        }
    }
}
