//! Scoring label files against gold.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;
use spanwise_core::corpus::{LabelSet, OUTSIDE};
use spanwise_core::labelmodel::{evaluate, ModelMetrics};

use crate::CliError;

/// One line of either an export file (`hard`) or a corpus file (`gold`).
#[derive(Deserialize)]
struct Labeled {
    id: String,
    #[serde(default)]
    hard: Option<Vec<String>>,
    #[serde(default)]
    gold: Option<Vec<String>>,
}

/// Documents in file order with their label sequences; `prefer_gold` picks
/// which field wins when a line has both.
fn read(path: &Path, prefer_gold: bool) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: Labeled =
            serde_json::from_str(line).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let labels = if prefer_gold {
            rec.gold.or(rec.hard)
        } else {
            rec.hard.or(rec.gold)
        };
        match labels {
            Some(l) => out.push((rec.id, l)),
            None if prefer_gold => continue,
            None => {
                return Err(CliError::Input(format!(
                    "{}:{}: document {:?} has no labels",
                    path.display(),
                    i + 1,
                    rec.id
                )))
            }
        }
    }
    Ok(out)
}

/// Aligns predictions with gold by document id and scores them.
pub fn score(pred: &Path, gold: &Path, labels: Option<&Path>) -> Result<ModelMetrics, CliError> {
    let pred = read(pred, false)?;
    let gold: HashMap<String, Vec<String>> = read(gold, true)?.into_iter().collect();
    let labels = match labels {
        Some(path) => LabelSet::from_json_file(path)?,
        None => {
            let seen: BTreeSet<&str> = pred
                .iter()
                .flat_map(|(_, l)| l)
                .chain(gold.values().flatten())
                .map(String::as_str)
                .filter(|l| *l != OUTSIDE)
                .collect();
            LabelSet::new(seen)?
        }
    };
    let index = |l: &str| {
        labels
            .index_of(l)
            .ok_or_else(|| spanwise_core::Error::UnknownLabel(l.to_string()))
    };
    let (mut p, mut g) = (Vec::new(), Vec::new());
    for (id, labels_p) in &pred {
        let labels_g = gold
            .get(id)
            .ok_or_else(|| CliError::Input(format!("document {id:?} has no gold labels")))?;
        if labels_g.len() != labels_p.len() {
            return Err(CliError::Input(format!(
                "document {id:?}: {} predicted labels but {} gold labels",
                labels_p.len(),
                labels_g.len()
            )));
        }
        for (a, b) in labels_p.iter().zip(labels_g) {
            p.push(index(a)?);
            g.push(index(b)?);
        }
    }
    Ok(evaluate(&p, &g, &labels)?)
}

pub fn run(pred: &Path, gold: &Path, labels: Option<&Path>, json: bool) -> Result<(), CliError> {
    let metrics = score(pred, gold, labels)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    } else {
        print!("{metrics}");
    }
    Ok(())
}
