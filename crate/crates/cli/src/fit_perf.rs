//! `tactus fit-perf`: pool normalized durations from aligned performances
//! and fit the GIG duration model.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use tactus_core::{fit_duration_models, normalized_duration};

use crate::common::{load_aligned_piece, matched_pieces, DEFAULT_SIGMA_OBS, DEFAULT_SIGMA_V};
use crate::config::PipelineConfig;

#[derive(Args)]
pub struct FitPerfArgs {
    /// Directory of reference score TSVs.
    #[arg(long)]
    scores: PathBuf,

    /// Directory of performance TSVs.
    #[arg(long)]
    performances: PathBuf,

    /// Directory of alignment TSVs (performance id -> score id).
    #[arg(long)]
    alignments: PathBuf,

    /// Output duration-model JSON.
    #[arg(long)]
    out: PathBuf,

    /// Tempo-smoother process noise.
    #[arg(long)]
    sigma_v: Option<f64>,

    /// Tempo-smoother observation noise.
    #[arg(long)]
    sigma_obs: Option<f64>,
}

pub fn run(args: FitPerfArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let sigma_v = args.sigma_v.or(cfg.sigma_v).unwrap_or(DEFAULT_SIGMA_V);
    let sigma_obs = args.sigma_obs.or(cfg.sigma_obs).unwrap_or(DEFAULT_SIGMA_OBS);
    let pieces = matched_pieces(&args.scores, &args.performances, &args.alignments)?;

    // One (d', d̄') sample pair per note, pieces in stem order.
    let per_piece: Vec<anyhow::Result<(Vec<f64>, Vec<f64>)>> = pieces
        .par_iter()
        .map(|files| {
            let piece = load_aligned_piece(files, sigma_v, sigma_obs)?;
            let mut d = Vec::with_capacity(piece.performance.len());
            let mut dbar = Vec::with_capacity(piece.performance.len());
            for (i, note) in piece.performance.iter().enumerate() {
                let r = piece.truth[i];
                let v = piece.tempo[i];
                d.push(normalized_duration(note.key_holding(), r, v)?);
                dbar.push(normalized_duration(note.damper_lifting(), r, v)?);
            }
            Ok((d, dbar))
        })
        .collect();

    let mut dprime = Vec::new();
    let mut dbar_prime = Vec::new();
    for result in per_piece {
        let (d, dbar) = result?;
        dprime.extend(d);
        dbar_prime.extend(dbar);
    }
    if dprime.len() < 1000 {
        eprintln!(
            "warning: fitting on {} samples; the histogram fit wants at least 1000",
            dprime.len()
        );
    }

    let model = fit_duration_models(&dprime, &dbar_prime)?;
    model.save(&args.out)?;
    println!("pieces {}", pieces.len());
    println!("samples {}", dprime.len());
    Ok(())
}
