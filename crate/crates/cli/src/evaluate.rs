//! `tactus evaluate`: compare estimated scores against references, per
//! piece and in aggregate.

use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use tactus_core::corpus::read_score_tsv;
use tactus_core::{evaluate_scores, EvalReport, MatchBy};

use crate::common::{stem, tsv_corpus};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Estimated score TSV, or a directory of them.
    #[arg(long)]
    est: PathBuf,

    /// Reference score TSV, or a directory matched by file stem.
    #[arg(long = "ref")]
    reference: PathBuf,

    /// How estimated notes pair with reference notes.
    #[arg(long, value_parser = ["id", "order"], default_value = "id")]
    match_by: String,

    /// Output JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PieceEntry {
    name: String,
    #[serde(flatten)]
    report: EvalReport,
}

#[derive(Serialize)]
struct Stat {
    mean: f64,
    /// Sample standard deviation across pieces (0 for a single piece).
    std: f64,
    stderr: f64,
}

fn stat(xs: &[f64]) -> Stat {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, std, stderr: std / n.sqrt() }
}

#[derive(Serialize)]
struct Aggregate {
    pieces: usize,
    error_rate: Stat,
    scale_error: Stat,
    error_rate_scale_invariant: Stat,
    scale_error_scale_invariant: Stat,
}

#[derive(Serialize)]
struct FullReport {
    aggregate: Aggregate,
    pieces: Vec<PieceEntry>,
}

fn evaluate_one(est: &Path, reference: &Path, match_by: MatchBy) -> anyhow::Result<EvalReport> {
    let est_notes = read_score_tsv(est)?;
    let ref_notes = read_score_tsv(reference)?;
    Ok(evaluate_scores(&est_notes, &ref_notes, match_by)?)
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<()> {
    let match_by = if args.match_by == "id" { MatchBy::Id } else { MatchBy::Order };

    let entries: Vec<PieceEntry> = if args.est.is_dir() {
        if !args.reference.is_dir() {
            bail!("--est is a directory, so --ref must be one too");
        }
        let est_files = tsv_corpus(&args.est, "estimated")?;
        let jobs: Vec<(String, PathBuf, PathBuf)> = est_files
            .iter()
            .map(|est| {
                let name = stem(est)?.to_string();
                let reference = args.reference.join(format!("{name}.tsv"));
                if !reference.is_file() {
                    bail!("no reference for piece {name:?} (expected {})", reference.display());
                }
                Ok((name, est.clone(), reference))
            })
            .collect::<anyhow::Result<_>>()?;
        jobs.par_iter()
            .map(|(name, est, reference)| {
                let report = evaluate_one(est, reference, match_by)?;
                Ok(PieceEntry { name: name.clone(), report })
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        let report = evaluate_one(&args.est, &args.reference, match_by)?;
        vec![PieceEntry { name: stem(&args.est)?.to_string(), report }]
    };

    let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> {
        entries.iter().map(|e| f(&e.report)).collect()
    };
    let aggregate = Aggregate {
        pieces: entries.len(),
        error_rate: stat(&collect(|r| r.error_rate)),
        scale_error: stat(&collect(|r| r.scale_error)),
        error_rate_scale_invariant: stat(&collect(|r| r.error_rate_scale_invariant)),
        scale_error_scale_invariant: stat(&collect(|r| r.scale_error_scale_invariant)),
    };

    println!("pieces {}", aggregate.pieces);
    println!("error_rate {}", aggregate.error_rate.mean);
    println!("scale_error {}", aggregate.scale_error.mean);
    println!("error_rate_scale_invariant {}", aggregate.error_rate_scale_invariant.mean);
    println!("scale_error_scale_invariant {}", aggregate.scale_error_scale_invariant.mean);

    if let Some(out) = &args.out {
        let full = FullReport { aggregate, pieces: entries };
        let mut text = serde_json::to_string_pretty(&full).expect("report serialize");
        text.push('\n');
        std::fs::write(out, text)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", out.display()))?;
    }
    Ok(())
}
