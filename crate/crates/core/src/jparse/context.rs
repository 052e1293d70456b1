use std::collections::HashSet;

use super::index::{ProjectIndex, TypeRef};
use super::{FileModel, MethodDecl};

/// Return type, then parameter types and names in signature order, then body
/// identifiers in source order. References to the method's own name are left
/// out.
pub fn extract_local_context(m: &MethodDecl) -> Vec<String> {
    let mut out = Vec::with_capacity(1 + 2 * m.params.len() + m.body_identifiers.len());
    if !m.return_type.is_empty() {
        out.push(m.return_type.clone());
    }
    for p in &m.params {
        out.push(p.ty.clone());
        out.push(p.name.clone());
    }
    out.extend(
        m.body_identifiers
            .iter()
            .filter(|id| **id != m.name)
            .cloned(),
    );
    out
}

/// Names of every other method declared in `f`, in source order.
///
/// `m` is excluded by identity, so it must be borrowed from `f`; overloads
/// sharing its name remain.
pub fn extract_infile_context(f: &FileModel, m: &MethodDecl) -> Vec<String> {
    f.methods()
        .filter(|other| !std::ptr::eq(*other, m))
        .map(|other| other.name.clone())
        .collect()
}

/// Method names of the project types `f` imports, followed by those of its
/// resolvable supertypes. Types declared in `f` itself and types already
/// emitted are skipped.
pub fn extract_crossfile_context(idx: &ProjectIndex, f: &FileModel) -> Vec<String> {
    let mut resolved: Vec<TypeRef> = Vec::new();
    for import in &f.imports {
        if import.wildcard {
            // `import p.*` names a package; `import static p.T.*` names a type.
            if import.is_static {
                resolved.extend(idx.lookup(&import.name));
            } else {
                resolved.extend(idx.types_in_package(&import.name));
            }
        } else if let Some(r) = idx.lookup(&import.name) {
            resolved.push(r);
        } else if import.is_static {
            // `import static p.T.member`.
            if let Some((owner, _)) = import.name.rsplit_once('.') {
                resolved.extend(idx.lookup(owner));
            }
        }
    }
    for t in &f.type_decls {
        if let Some(sup) = &t.super_name {
            resolved.extend(idx.resolve_type_name(f, sup));
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in resolved {
        if !seen.insert(r) {
            continue;
        }
        let file = &idx.files[r.file];
        if file.path == f.path {
            continue;
        }
        out.extend(file.type_decls[r.ty].methods.iter().map(|m| m.name.clone()));
    }
    out
}

/// First sentence of the Javadoc description, or `None` without Javadoc.
///
/// Delimiters and leading asterisks are stripped and everything from the
/// first tag line (`@param`, `@return`, ...) on is dropped. The sentence ends
/// at the first period followed by whitespace or the end of the text.
pub fn extract_doc_context(m: &MethodDecl) -> Option<String> {
    let raw = m.javadoc.as_deref()?;
    let inner = raw
        .strip_prefix("/**")
        .unwrap_or(raw)
        .strip_suffix("*/")
        .unwrap_or(raw);
    let mut words: Vec<&str> = Vec::new();
    for line in inner.lines() {
        let line = line.trim_start();
        let line = line.trim_start_matches('*').trim();
        if line.starts_with('@') {
            break;
        }
        words.extend(line.split_whitespace());
    }
    let text = words.join(" ");
    let bytes = text.as_bytes();
    let end = bytes
        .iter()
        .enumerate()
        .find(|&(i, &b)| b == b'.' && (i + 1 == bytes.len() || bytes[i + 1] == b' '))
        .map_or(text.len(), |(i, _)| i + 1);
    let sentence = text[..end].trim();
    (!sentence.is_empty()).then(|| sentence.to_owned())
}

/// Bit `i` is set when `context_names[i]` is called from the body of `m`.
pub fn detect_invocations(m: &MethodDecl, context_names: &[String]) -> Vec<bool> {
    context_names
        .iter()
        .map(|n| m.callee_names.contains(n))
        .collect()
}
