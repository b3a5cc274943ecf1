//! The published all-results tables (VQA, localization, challenge sets),
//! shipped as score files, and the regression checks run against them.

use std::path::Path;

use prism_core::stats::{aggregate, zscores_pooled, ModelKey, Pool, ScoreTable};

use crate::error::Result;
use crate::scores::{merge_scores, parse_scores};

pub const VQA: &str = include_str!("../fixtures/vqa.csv");
pub const LOCALIZATION: &str = include_str!("../fixtures/localization.csv");
pub const CHALLENGE: &str = include_str!("../fixtures/challenge.csv");

/// The eleven evaluation tasks; TextVQA is the variant without OCR tokens.
pub const CORE_TASKS: [&str; 11] = [
    "VQAv2", "GQA", "VizWiz", "TextVQA", "RefCOCO", "RefCOCO+", "RefCOCOg", "OCIDRef", "VSR", "POPE", "TallyQA",
];

pub fn fixture_tables() -> Result<[ScoreTable; 3]> {
    Ok([
        parse_scores(VQA, Path::new("fixtures/vqa.csv"))?,
        parse_scores(LOCALIZATION, Path::new("fixtures/localization.csv"))?,
        parse_scores(CHALLENGE, Path::new("fixtures/challenge.csv"))?,
    ])
}

/// All three tables joined on model keys.
pub fn fixture_table() -> Result<ScoreTable> {
    merge_scores(&[
        (VQA, Path::new("fixtures/vqa.csv")),
        (LOCALIZATION, Path::new("fixtures/localization.csv")),
        (CHALLENGE, Path::new("fixtures/challenge.csv")),
    ])
}

pub fn core_tasks() -> Vec<String> {
    CORE_TASKS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub detail: String,
    pub pass: bool,
}

fn aggregate_of(z: &ScoreTable, key: &ModelKey) -> Result<f64> {
    let tasks = core_tasks();
    let aggs = aggregate(z, Some(&tasks))?;
    Ok(aggs.iter().find(|a| &a.model == key).map(|a| a.score).unwrap_or(f64::NAN))
}

fn raw_gap(t: &ScoreTable, better: &ModelKey, worse: &ModelKey, bench: &str) -> f64 {
    match (t.value(better, bench), t.value(worse, bench)) {
        (Some(a), Some(b)) => a - b,
        _ => f64::NAN,
    }
}

/// Directional findings recomputed from the tables.
pub fn regression_checks() -> Result<Vec<Check>> {
    let table = fixture_table()?;
    let mut checks = Vec::new();

    let repro = "Reproduction & Optimization Procedure";
    let single = ModelKey::new(repro, "Single-Stage 7B");
    let llava = ModelKey::new(repro, "LLaVa v1.5 7B (Reproduction)");
    let z_family = zscores_pooled(&table, Pool::Family)?;
    let (s, l) = (aggregate_of(&z_family, &single)?, aggregate_of(&z_family, &llava)?);
    checks.push(Check {
        name: "single-stage-vs-reproduction",
        detail: format!("aggregate z {s:.4} (single-stage 7B) vs {l:.4} (reproduction 7B)"),
        pass: s >= l,
    });

    let ens = "Ensembling Visual Features";
    let fused = ModelKey::new(ens, "DINOv2 + SigLIP 384px (Naive Resize)");
    let siglip = ModelKey::new(ens, "SigLIP ViT-SO 384px (Naive Resize)");
    for (name, bench, expected) in [
        ("fused-refcoco-gap", "RefCOCO", 12.48),
        ("fused-pope-gap", "POPE", 1.78),
    ] {
        let gap = raw_gap(&table, &fused, &siglip, bench);
        checks.push(Check {
            name,
            detail: format!("{bench}: {gap:.2} points (expected {expected:.2})"),
            pass: (gap - expected).abs() < 5e-9,
        });
    }

    let z_global = zscores_pooled(&table, Pool::Global)?;
    let tasks = core_tasks();
    let aggs = aggregate(&z_global, Some(&tasks))?;
    let best = aggs
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score))
        .expect("fixture has models");
    checks.push(Check {
        name: "prism-13b-tops-aggregate",
        detail: format!("best aggregate z {:.4}: {}", best.score, best.model),
        pass: best.model == ModelKey::new("Prism 13B", "Prism-DINOSigLIP 13B"),
    });
    Ok(checks)
}
