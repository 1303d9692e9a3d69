#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spanwise_core::corpus::CorpusPaths;
use spanwise_core::rules::{Polarity, SpanAnnotation};
use spanwise_core::session::Project;
use spanwise_core::simulate::gold_spans;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spanwise"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spanwise")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `spanwise synth` into `dir/data`, returning the sidecar paths.
pub fn synth(dir: &Path, extra: &[&str]) -> CorpusPaths {
    let data = dir.join("data");
    let mut args = vec!["synth", "--out", p(&data)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    CorpusPaths {
        corpus: data.join("corpus.jsonl"),
        emb_a: data.join("emb_a.bin"),
        emb_b: data.join("emb_b.bin"),
        sent: data.join("sent.bin"),
        labels: data.join("labels.json"),
    }
}

pub fn ingest(paths: &CorpusPaths, out: &Path) -> Output {
    run(&[
        "ingest",
        "--corpus",
        p(&paths.corpus),
        "--emb-a",
        p(&paths.emb_a),
        "--emb-b",
        p(&paths.emb_b),
        "--sent",
        p(&paths.sent),
        "--labels",
        p(&paths.labels),
        "--out",
        p(out),
    ])
}

/// Small planted project with a few demonstrations, the top suggestion of
/// each selected and a recorded fit.
pub fn fitted_project(dir: &Path) -> PathBuf {
    let paths = synth(dir, &["--train", "60", "--dev", "20", "--test", "20"]);
    let project_path = dir.join("project.json");
    assert!(ingest(&paths, &project_path).status.success());
    let mut project = Project::load(&project_path).unwrap();
    let corpus = project.corpus().clone();
    for _ in 0..3 {
        let pick = project.next_document().unwrap();
        let doc = corpus.doc(&pick.doc_id).unwrap();
        for (start, end, c) in gold_spans(doc.gold.as_ref().unwrap(), corpus.labels().outside()) {
            let out = project
                .submit_annotation(SpanAnnotation {
                    doc_id: doc.id.clone(),
                    start,
                    end,
                    label: corpus.labels().output_name(c).to_string(),
                    polarity: Polarity::Positive,
                })
                .unwrap();
            project.set_selected(out.suggestions[0].lf.id(), true).unwrap();
        }
    }
    project.retrain().unwrap();
    project.save(&project_path).unwrap();
    project_path
}
