use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spanwise_core::corpus::{corpus_stats, Corpus, CorpusPaths, Split};
use spanwise_core::labelmodel::ModelKind;
use spanwise_core::session::{Project, ProjectConfig};
use spanwise_core::simulate::{simulate as run_simulation, SimulationConfig};
use spanwise_core::synthetic::{planted, shaped, CorpusShape, PlantedConfig};

use crate::{CliError, SynthKind};

type Result<T = ()> = std::result::Result<T, CliError>;

fn absolute(path: PathBuf) -> Result<PathBuf> {
    std::path::absolute(&path).map_err(|e| CliError::io(path, e))
}

/// Writer for `out`, or stdout.
fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

pub fn ingest(paths: CorpusPaths, out: &Path, model: ModelKind, tau: f64, seed: u64) -> Result {
    let paths = CorpusPaths {
        corpus: absolute(paths.corpus)?,
        emb_a: absolute(paths.emb_a)?,
        emb_b: absolute(paths.emb_b)?,
        sent: absolute(paths.sent)?,
        labels: absolute(paths.labels)?,
    };
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(CliError::Input(format!("--tau must be in (0, 1], got {tau}")));
    }
    let corpus = Corpus::ingest(&paths)?;
    print!("{}", corpus_stats(&corpus));
    let config = ProjectConfig {
        model,
        tau_default: tau,
        seed,
    };
    Project::new(Arc::new(corpus), Some(paths), config).save(out)?;
    println!("project written to {}", out.display());
    Ok(())
}

pub fn serve(project_path: &Path, host: &str, port: u16) -> Result {
    let mut project = Project::load(project_path)?;
    project.restore_snapshot()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Input(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| CliError::Bind { addr, source })?;
        let local = listener.local_addr().map_err(|e| CliError::Input(e.to_string()))?;
        println!("listening on http://{local}");
        std::io::stdout().flush().ok();
        spanwise_service::serve(listener, project, Some(project_path.to_path_buf()), shutdown_signal()).await?;
        eprintln!("project saved to {}", project_path.display());
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

pub fn apply(project_path: &Path, split: Split, out: Option<&Path>, force: bool) -> Result {
    let mut project = Project::load(project_path)?;
    if project.restore_snapshot()?.is_none() {
        return Err(spanwise_core::Error::NoSnapshot.into());
    }
    let records = project.export(split, force)?;
    let mut w = output(out)?;
    let fail = |e: std::io::Error| CliError::io(out.unwrap_or(Path::new("<stdout>")), e);
    for r in &records {
        serde_json::to_writer(&mut w, r).map_err(|e| fail(e.into()))?;
        w.write_all(b"\n").map_err(fail)?;
    }
    w.flush().map_err(fail)?;
    eprintln!("{} {} documents labeled", records.len(), split);
    Ok(())
}

pub fn simulate(
    project_path: &Path,
    budget: usize,
    seed: Option<u64>,
    model: Option<ModelKind>,
    out: Option<&Path>,
) -> Result {
    let project = Project::load(project_path)?;
    let config = SimulationConfig {
        budget,
        seed: seed.unwrap_or(project.config().seed),
        model: model.unwrap_or(project.model()),
    };
    let outcome = run_simulation(Arc::clone(project.corpus()), &config)?;
    if let Some(n) = outcome.truncated_to {
        eprintln!("warning: budget {budget} exceeds the {n} train documents; truncated to {n}");
    }
    let mut w = output(out)?;
    let fail = |e: std::io::Error| CliError::io(out.unwrap_or(Path::new("<stdout>")), e);
    outcome.write_csv(&mut w).map_err(fail)?;
    w.flush().map_err(fail)?;
    if let Some(last) = outcome.rows.last() {
        eprintln!(
            "{} interactions, {} functions selected, test F1 {:.3} (dictionary baseline {:.3})",
            last.interaction, last.n_lfs, last.test_f1, last.baseline_f1
        );
    }
    Ok(())
}

pub fn synth(out: &Path, kind: SynthKind, seed: u64, train: usize, dev: usize, test: usize, noise: f64) -> Result {
    let table = |docs, mean_tokens, classes: [(&str, f64); 2]| CorpusShape {
        docs,
        mean_tokens,
        frequencies: classes.iter().map(|(c, f)| (c.to_string(), *f)).collect(),
        held_out: 0.2,
    };
    let corpus = match kind {
        SynthKind::Planted => {
            if !(0.0..=1.0).contains(&noise) {
                return Err(CliError::Input(format!("--noise must be in [0, 1], got {noise}")));
            }
            planted(&PlantedConfig {
                train,
                dev,
                test,
                noise,
                seed,
                ..PlantedConfig::default()
            })
        }
        SynthKind::Bc5cdr => shaped(&table(866, 381.6, [("Chemical", 0.063), ("Disease", 0.079)]), seed)?,
        SynthKind::Yelp => shaped(&table(838, 36.5, [("Aspect", 0.100), ("Opinion", 0.114)]), seed)?,
    };
    let paths = corpus.write(out)?;
    println!("corpus: {}", paths.corpus.display());
    println!("emb-a: {}", paths.emb_a.display());
    println!("emb-b: {}", paths.emb_b.display());
    println!("sent: {}", paths.sent.display());
    println!("labels: {}", paths.labels.display());
    Ok(())
}
