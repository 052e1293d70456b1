//! Checks against the motivating-example fixture project.

use std::path::{Path, PathBuf};

use gtnm_core::jparse::{
    detect_invocations, extract_crossfile_context, extract_doc_context, extract_infile_context,
    extract_local_context, index_project, FileModel, MethodDecl, ProjectIndex,
};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sample_codes")
}

pub fn fixture_index() -> ProjectIndex {
    index_project(&fixture_root()).expect("fixture project")
}

fn file<'a>(idx: &'a ProjectIndex, path: &str) -> Result<&'a FileModel, String> {
    idx.files
        .iter()
        .find(|f| f.path == path)
        .ok_or_else(|| format!("{path} not indexed"))
}

fn method<'a>(f: &'a FileModel, name: &str) -> Result<&'a MethodDecl, String> {
    f.methods()
        .find(|m| m.name == name)
        .ok_or_else(|| format!("{}: no method {name}", f.path))
}

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

const ACCOUNT: &str = "code4/com/github/airsaid/accountbook/ui/activity/AccountActivity.java";
const BASE: &str = "code4/com/github/airsaid/accountbook/base/BaseActivity.java";

/// Every context the fixture is built to exhibit, compared string-exactly.
pub fn check_sample_contexts(idx: &ProjectIndex) -> Result<(), String> {
    expect("diagnostics", idx.diagnostics.len(), 0)?;
    expect("files", idx.files.len(), 6)?;

    let f1 = file(idx, "code1/ResourceScheduler.java")?;
    expect(
        "code1 methods",
        f1.methods().map(|m| m.name.as_str()).collect::<Vec<_>>(),
        vec!["getClusterResource", "getMinimumResourceCapability", "getMaxValue"],
    )?;
    let max = method(f1, "getMaxValue")?;
    expect("code1 local", extract_local_context(max), strings(&["Resource", "maximumAllocation"]))?;
    expect(
        "code1 in-file",
        extract_infile_context(f1, max),
        strings(&["getClusterResource", "getMinimumResourceCapability"]),
    )?;
    expect("code1 cross-file", extract_crossfile_context(idx, f1), vec![])?;

    let f2 = file(idx, "code2/Window.java")?;
    let key_up = method(f2, "keyUp")?;
    expect("code2 in-file", extract_infile_context(f2, key_up), strings(&["touchDown", "touchUp", "keyDown"]))?;
    expect(
        "code2 local",
        extract_local_context(key_up),
        strings(&["boolean", "InputEvent", "event", "int", "keycode", "isModal"]),
    )?;

    let f3 = file(idx, "code3/ErrorCounters.java")?;
    let occured = method(f3, "serverErrorOccured")?;
    expect("code3 local", extract_local_context(occured), strings(&["void", "serverErrors", "incr"]))?;
    expect(
        "code3 invocations",
        detect_invocations(occured, &strings(&["clientErrorEncountered"])),
        vec![false],
    )?;

    let f4 = file(idx, ACCOUNT)?;
    expect("code4 super", f4.type_decls[0].super_name.as_deref(), Some("BaseActivity"))?;
    if !f4.imports.iter().any(|i| i.name == "com.github.airsaid.accountbook.base.BaseActivity") {
        return Err("code4 import of BaseActivity missing".into());
    }
    if !idx.type_table.contains_key("com.github.airsaid.accountbook.base.BaseActivity") {
        return Err("BaseActivity not in the type table".into());
    }
    expect(
        "code4 cross-file",
        extract_crossfile_context(idx, f4),
        strings(&["onCreate", "getLayoutRes", "onCreateActivity"]),
    )?;
    expect("BaseActivity cross-file", extract_crossfile_context(idx, file(idx, BASE)?), vec![])?;

    let f5 = file(idx, "code5/RemoveSpurs.java")?;
    expect(
        "code5 doc 1",
        extract_doc_context(method(f5, "getName")?).as_deref(),
        Some("Used to retrieve the plugin tool's descriptive name."),
    )?;
    expect(
        "code5 doc 2",
        extract_doc_context(method(f5, "getToolDescription")?).as_deref(),
        Some("Used to retrieve a short description of what the plugin tool does."),
    )?;
    let undocumented = idx
        .files
        .iter()
        .flat_map(|f| f.methods())
        .filter(|m| extract_doc_context(m).is_none())
        .count();
    expect("undocumented methods", undocumented, 14)?;
    Ok(())
}
