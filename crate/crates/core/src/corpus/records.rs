use rayon::prelude::*;

use super::{LengthConfig, MethodRecord};
use crate::jparse::{
    detect_invocations, extract_crossfile_context, extract_doc_context, extract_infile_context,
    extract_local_context, Diagnostic, FileModel, MethodDecl, ProjectIndex,
};
use crate::token::{split_doc_sentence, split_identifier};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub use_crossfile: bool,
    /// Keep only methods whose Javadoc yields a first sentence.
    pub require_doc: bool,
    /// Drop every context entity equal to the method's own name.
    pub mask_own_name: bool,
}

/// One record per non-constructor method whose name has subtokens.
///
/// Files are processed in parallel; output follows index order. Methods whose
/// names yield no subtokens are reported as diagnostics.
pub fn build_records(
    idx: &ProjectIndex,
    cfg: &LengthConfig,
    opts: RecordOptions,
) -> (Vec<MethodRecord>, Vec<Diagnostic>) {
    let per_file: Vec<(Vec<MethodRecord>, Vec<Diagnostic>)> = idx
        .files
        .par_iter()
        .map(|file| {
            let cross = if opts.use_crossfile {
                extract_crossfile_context(idx, file)
            } else {
                Vec::new()
            };
            let mut records = Vec::new();
            let mut diags = Vec::new();
            for t in &file.type_decls {
                for m in t.methods.iter().filter(|m| !m.is_constructor) {
                    match build_method_record(&idx.root, file, &t.simple_name, m, &cross, cfg, opts)
                    {
                        Some(r) => records.push(r),
                        None if split_identifier(&m.name).is_empty() => diags.push(Diagnostic {
                            path: file.path.clone(),
                            message: format!(
                                "method `{}` on line {} has no name subtokens; skipped",
                                m.name, m.span.0
                            ),
                        }),
                        None => {}
                    }
                }
            }
            (records, diags)
        })
        .collect();
    let mut records = Vec::new();
    let mut diags = Vec::new();
    for (r, d) in per_file {
        records.extend(r);
        diags.extend(d);
    }
    (records, diags)
}

/// Builds the record for a single method. `crossfile` is the file's
/// cross-file context (empty when unused). Returns `None` when the name has
/// no subtokens or a required doc is missing.
pub fn build_method_record(
    project: &str,
    file: &FileModel,
    type_name: &str,
    m: &MethodDecl,
    crossfile: &[String],
    cfg: &LengthConfig,
    opts: RecordOptions,
) -> Option<MethodRecord> {
    let full_target = split_identifier(&m.name);
    if full_target.is_empty() {
        return None;
    }
    let doc_sentence = extract_doc_context(m);
    if opts.require_doc && doc_sentence.is_none() {
        return None;
    }
    let keep = |name: &String| !(opts.mask_own_name && *name == m.name);

    let mut local = Vec::new();
    let mut signature_len = 0;
    let signature_entities = usize::from(!m.return_type.is_empty()) + 2 * m.params.len();
    for (i, entity) in extract_local_context(m).iter().enumerate() {
        if !keep(entity) {
            continue;
        }
        local.extend(split_identifier(entity));
        if i < signature_entities {
            signature_len = local.len();
        }
    }
    local.truncate(cfg.local);
    let signature_len = signature_len.min(local.len());

    let infile_names: Vec<String> = extract_infile_context(file, m).into_iter().filter(keep).collect();
    let cross_names: Vec<String> = crossfile.iter().filter(|n| keep(n)).cloned().collect();
    let (pro_infile, mut invoked_mask) = expand_names(m, &infile_names, cfg.infile);
    let (pro_crossfile, cross_mask) = expand_names(m, &cross_names, cfg.crossfile);
    invoked_mask.extend(cross_mask);

    let mut doc = doc_sentence.as_deref().map(split_doc_sentence).unwrap_or_default();
    doc.truncate(cfg.doc);

    let mut target = full_target;
    target.truncate(cfg.target);

    Some(MethodRecord {
        id: format!("{project}/{}#{type_name}.{}@{}", file.path, m.name, m.span.0),
        project: project.to_owned(),
        path: file.path.clone(),
        name_raw: m.name.clone(),
        target,
        local,
        pro_infile,
        pro_crossfile,
        doc,
        invoked_mask,
        signature_len,
    })
}

/// Subtokenizes context method names in order until `budget` subtokens are
/// filled, repeating each name's invocation bit over its subtokens.
fn expand_names(m: &MethodDecl, names: &[String], budget: usize) -> (Vec<String>, Vec<bool>) {
    let bits = detect_invocations(m, names);
    let mut toks = Vec::new();
    let mut mask = Vec::new();
    for (name, bit) in names.iter().zip(bits) {
        if toks.len() >= budget {
            break;
        }
        for sub in split_identifier(name) {
            if toks.len() >= budget {
                break;
            }
            toks.push(sub);
            mask.push(bit);
        }
    }
    (toks, mask)
}
