use std::path::{Path, PathBuf};

use anyhow::Context;
use gtnm_core::corpus::{
    build_method_record, build_records, build_vocabs, encode_record, read_jsonl, split_dataset, stats_overlap,
    to_jsonl, EncodedExample, MethodRecord, RecordOptions, SplitMode,
};
use gtnm_core::eval::{evaluate_corpus, EvalReport};
use gtnm_core::gtnm::Gtnm;
use gtnm_core::jparse::{extract_crossfile_context, index_project, parse_file, Diagnostic, MethodDecl};
use gtnm_core::runtime::{beam_decode, fit, predict_all, Checkpoint, GtnmSession, VocabRef};
use gtnm_core::token::Vocab;
use serde::{Deserialize, Serialize};

use crate::config::{pick, require, FileConfig};
use crate::{EvalArgs, ExtractArgs, Fail, StatsArgs, SuggestArgs, TrainArgs, VocabArgs};

const CODE_VOCAB: &str = "code.vocab";
const DOC_VOCAB: &str = "doc.vocab";

fn existing_file(p: PathBuf, what: &str) -> Result<PathBuf, Fail> {
    if p.is_file() {
        Ok(p)
    } else {
        Err(Fail::Usage(format!("{what} {} does not exist", p.display())))
    }
}

fn existing_dir(p: PathBuf, what: &str) -> Result<PathBuf, Fail> {
    if p.is_dir() {
        Ok(p)
    } else {
        Err(Fail::Usage(format!("{what} {} is not a directory", p.display())))
    }
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<MethodRecord>, Fail> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let records: Vec<MethodRecord> = read_jsonl(&text)?;
    if records.is_empty() {
        return Err(Fail::Usage(format!("{} holds no records", path.display())));
    }
    Ok(records)
}

fn report(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("warning: {}: {}", d.path, d.message);
    }
}

fn load_vocabs(dir: &Path) -> Result<(Vocab, Vocab), Fail> {
    let dir = existing_dir(dir.to_path_buf(), "vocabulary directory")?;
    let code = existing_file(dir.join(CODE_VOCAB), "vocabulary")?;
    let doc = existing_file(dir.join(DOC_VOCAB), "vocabulary")?;
    Ok((Vocab::load(&code)?, Vocab::load(&doc)?))
}

/// Checkpoint plus the vocabularies it was trained with.
fn load_model(checkpoint: PathBuf, vocab_dir: PathBuf) -> Result<(Gtnm, Vocab, Vocab), Fail> {
    let path = existing_file(checkpoint, "checkpoint")?;
    let ck = Checkpoint::load(&path)?;
    let (code, doc) = load_vocabs(&vocab_dir)?;
    ck.check_vocab(&VocabRef::of(&code, &doc))?;
    if ck.model.code_vocab != code.len() || ck.model.doc_vocab != doc.len() {
        return Err(Fail::Usage(format!(
            "checkpoint expects vocabularies of {} and {} tokens, found {} and {}",
            ck.model.code_vocab,
            ck.model.doc_vocab,
            code.len(),
            doc.len()
        )));
    }
    Ok((ck.into_model()?, code, doc))
}

/// `["get", "max", "value"]` becomes `getMaxValue`.
fn camel(subtokens: &[String]) -> String {
    let mut out = String::new();
    for (i, t) in subtokens.iter().enumerate() {
        let mut cs = t.chars();
        match cs.next() {
            Some(c) if i > 0 => {
                out.extend(c.to_uppercase());
                out.push_str(cs.as_str());
            }
            Some(_) => out.push_str(t),
            None => {}
        }
    }
    out
}

pub fn extract(file: &FileConfig, a: ExtractArgs) -> Result<(), Fail> {
    let root = existing_dir(require(a.project, file.project.clone(), "project")?, "project")?;
    let lengths = file.lengths()?;
    let opts = RecordOptions {
        use_crossfile: a.crossfile || file.use_crossfile.unwrap_or(false),
        require_doc: a.require_doc || file.require_doc.unwrap_or(false),
        mask_own_name: false,
    };
    let idx = index_project(&root)?;
    report(&idx.diagnostics);
    let (records, diags) = build_records(&idx, &lengths, opts);
    report(&diags);
    write(&a.out, &to_jsonl(&records)?)?;
    let documented = records.iter().filter(|r| !r.doc.is_empty()).count();
    println!("files: {}", idx.files.len());
    println!("methods: {}", records.len());
    println!("methods with doc: {documented}");
    Ok(())
}

pub fn stats(file: &FileConfig, a: StatsArgs) -> Result<(), Fail> {
    let path = existing_file(require(a.records, file.records.clone(), "records")?, "records")?;
    let records = read_records(&path)?;
    let r = stats_overlap(&records)?;
    let json = serde_json::to_string_pretty(&r.to_json()).context("serializing report")?;
    write(&a.out, &(json + "\n"))?;
    print!("{}", r.to_table());
    Ok(())
}

pub fn build_vocab(file: &FileConfig, a: VocabArgs) -> Result<(), Fail> {
    let path = existing_file(require(a.records, file.records.clone(), "records")?, "records")?;
    let out = require(a.out_dir, file.vocab_dir.clone(), "out-dir")?;
    let records = read_records(&path)?;
    let (code, doc) = build_vocabs(
        &records,
        pick(a.code_size, file.code_vocab_size, 20000),
        pick(a.doc_size, file.doc_vocab_size, 10000),
    )?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    code.save(&out.join(CODE_VOCAB))?;
    doc.save(&out.join(DOC_VOCAB))?;
    println!("code vocabulary: {} tokens", code.len());
    println!("doc vocabulary: {} tokens", doc.len());
    Ok(())
}

fn encode_all(records: &[MethodRecord], code: &Vocab, doc: &Vocab, model: &Gtnm) -> Vec<EncodedExample> {
    records
        .iter()
        .map(|r| encode_record(r, code, doc, &model.cfg.lengths))
        .collect()
}

pub fn train(file: &FileConfig, a: TrainArgs) -> Result<(), Fail> {
    let records_path = existing_file(require(a.records, file.records.clone(), "records")?, "records")?;
    let vocab_dir = require(a.vocab_dir, file.vocab_dir.clone(), "vocab-dir")?;
    let out = require(a.out, file.checkpoint.clone(), "out")?;
    let (code, doc) = load_vocabs(&vocab_dir)?;

    let mut cfg = file.model(a.preset)?;
    cfg.code_vocab = code.len();
    cfg.doc_vocab = doc.len();
    let mut tc = file.train()?;
    tc.seed = pick(a.seed, file.seed, tc.seed);
    tc.epochs = a.epochs.unwrap_or(tc.epochs);
    tc.batch_size = a.batch_size.unwrap_or(tc.batch_size);
    tc.base_lr = a.lr.unwrap_or(tc.base_lr);
    tc.warmup_steps = a.warmup.unwrap_or(tc.warmup_steps);
    if a.no_clip {
        tc.clip_norm = None;
    }
    tc.validate()?;
    let mode = match a.split_mode {
        Some(s) => s.parse::<SplitMode>()?,
        None => file.split_mode.unwrap_or_default(),
    };
    let ratios = file.split_ratios.unwrap_or([0.8, 0.1, 0.1]);

    let resume = match a.resume {
        Some(p) => {
            let ck = Checkpoint::load(&existing_file(p, "resume state")?)?;
            ck.check_vocab(&VocabRef::of(&code, &doc))?;
            Some(ck)
        }
        None => None,
    };

    let records = read_records(&records_path)?;
    let split = split_dataset(records, mode, ratios, tc.seed)?;
    let mut model = Gtnm::new(cfg, tc.seed)?;
    let train = encode_all(&split.train, &code, &doc, &model);
    let valid = encode_all(&split.valid, &code, &doc, &model);
    eprintln!(
        "train {} / valid {} / test {} methods; {} parameters",
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        model.params.num_scalars()
    );
    let vocab = VocabRef::of(&code, &doc);
    let outcome = fit(&mut model, &train, &valid, &tc, resume, Some(vocab))?;

    let state = a.state.unwrap_or_else(|| suffixed(&out, ".state"));
    let log = a.log.unwrap_or_else(|| suffixed(&out, ".log.jsonl"));
    outcome.best.as_ref().unwrap_or(&outcome.last).save(&out)?;
    outcome.last.save(&state)?;
    write(&log, &to_jsonl(&outcome.log)?)?;
    if let Some(p) = a.test_out {
        write(&p, &to_jsonl(&split.test)?)?;
    }
    for l in &outcome.log {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
        println!(
            "epoch {} step {} lr {:.3e} train_loss {:.6} valid_loss {} valid_em {}",
            l.epoch,
            l.step,
            l.lr,
            l.train_loss,
            opt(l.valid_loss),
            opt(l.valid_em)
        );
    }
    Ok(())
}

fn suffixed(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// One line of a prediction dump.
#[derive(Debug, Serialize, Deserialize)]
struct DumpLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    target: Vec<String>,
    prediction: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pcs: Option<f64>,
}

pub fn eval(file: &FileConfig, a: EvalArgs) -> Result<(), Fail> {
    let lines: Vec<DumpLine> = match a.dump {
        Some(p) => {
            let p = existing_file(p, "dump")?;
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            read_jsonl(&text)?
        }
        None => {
            let ck = require(a.checkpoint, file.checkpoint.clone(), "checkpoint")?;
            let vocab_dir = require(a.vocab_dir, file.vocab_dir.clone(), "vocab-dir")?;
            let records_path = existing_file(require(a.records, file.records.clone(), "records")?, "records")?;
            let (model, code, doc) = load_model(ck, vocab_dir)?;
            let records = read_records(&records_path)?;
            let examples = encode_all(&records, &code, &doc, &model);
            let width = pick(a.beam_width, file.beam_width, 1);
            let preds = predict_all(&model, &examples, width)?;
            let mut lines = Vec::with_capacity(preds.len());
            for (r, p) in records.iter().zip(preds) {
                lines.push(DumpLine {
                    id: Some(r.id.clone()),
                    target: r.target.clone(),
                    prediction: code.decode(&p.ids)?,
                    pcs: Some(p.pcs),
                });
            }
            lines
        }
    };
    if lines.is_empty() {
        return Err(Fail::Usage("nothing to evaluate".into()));
    }
    if let Some(p) = &a.predictions {
        write(p, &to_jsonl(&lines)?)?;
    }
    let pairs: Vec<(Vec<String>, Vec<String>)> =
        lines.iter().map(|l| (l.target.clone(), l.prediction.clone())).collect();
    let result = evaluate_corpus(&pairs)?;
    let pcs: Option<Vec<f64>> = lines.iter().map(|l| l.pcs).collect();
    let rep = EvalReport::new(&result, pcs.as_deref())?;
    let json = serde_json::to_string_pretty(&rep).context("serializing report")?;
    write(&a.out, &(json + "\n"))?;
    println!("{}", rep.summary());
    Ok(())
}

/// Method named `query`, or the innermost method whose span holds line
/// `query`.
fn find_method<'f>(types: &'f [gtnm_core::jparse::TypeDecl], query: &str) -> Option<(&'f str, &'f MethodDecl)> {
    let all = types
        .iter()
        .flat_map(|t| t.methods.iter().map(move |m| (t.simple_name.as_str(), m)))
        .filter(|(_, m)| !m.is_constructor);
    match query.parse::<u32>() {
        Ok(line) => all
            .filter(|(_, m)| m.span.0 <= line && line <= m.span.1)
            .min_by_key(|(_, m)| m.span.1 - m.span.0),
        Err(_) => all.into_iter().find(|(_, m)| m.name == query),
    }
}

pub fn suggest(file: &FileConfig, a: SuggestArgs) -> Result<(), Fail> {
    let ck = require(a.checkpoint, file.checkpoint.clone(), "checkpoint")?;
    let vocab_dir = require(a.vocab_dir, file.vocab_dir.clone(), "vocab-dir")?;
    let src = existing_file(a.file, "source file")?;
    if a.top_k == 0 {
        return Err(Fail::Usage("--top-k must be at least 1".into()));
    }
    let (model, code, doc) = load_model(ck, vocab_dir)?;

    let root = match a.project.or(file.project.clone()) {
        Some(p) => existing_dir(p, "project")?,
        None => src.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    let root = root.canonicalize().with_context(|| format!("resolving {}", root.display()))?;
    let abs = src.canonicalize().with_context(|| format!("resolving {}", src.display()))?;
    let rel = abs.strip_prefix(&root).unwrap_or(&abs);
    let rel = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    let text = std::fs::read(&abs).with_context(|| format!("reading {}", abs.display()))?;
    let parsed = parse_file(&String::from_utf8_lossy(&text), &rel)?;
    let (type_name, m) = find_method(&parsed.type_decls, &a.method)
        .ok_or_else(|| Fail::Usage(format!("no method `{}` in {}", a.method, src.display())))?;

    let use_crossfile = a.crossfile || file.use_crossfile.unwrap_or(false);
    let cross = if use_crossfile {
        let idx = index_project(&root)?;
        extract_crossfile_context(&idx, &parsed)
    } else {
        Vec::new()
    };
    let project = root
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let opts = RecordOptions {
        use_crossfile,
        require_doc: false,
        mask_own_name: true,
    };
    let record = build_method_record(&project, &parsed, type_name, m, &cross, &model.cfg.lengths, opts)
        .ok_or_else(|| Fail::Usage(format!("method `{}` has no name subtokens", m.name)))?;
    let ex = encode_record(&record, &code, &doc, &model.cfg.lengths);
    let width = pick(a.beam_width, file.beam_width, 5).max(a.top_k);
    let session = GtnmSession::new(&model, &ex)?;
    let preds = beam_decode(&session, width, model.cfg.lengths.target)?;
    println!("{}.{} (line {})", type_name, m.name, m.span.0);
    for (rank, p) in preds.iter().take(a.top_k).enumerate() {
        let words = code.decode(&p.ids)?;
        println!("{}. {} [{}] pcs={:.3}", rank + 1, camel(&words), words.join(" "), p.pcs);
    }
    Ok(())
}
