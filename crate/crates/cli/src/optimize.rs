//! `tactus optimize-weights`: two grid searches. The score half maximizes
//! held-out likelihood of the prior (beta1, beta2, and the pitch radius);
//! the performance half minimizes the dev-set error rate of full decoding
//! (beta31, beta32). The result is one weights JSON the decoder consumes.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use tactus_core::corpus::read_score_tsv;
use tactus_core::{
    load_interdep_set, mrf_weights, optimize_perf_weights, optimize_score_weights, ContextTree,
    DevPiece, DurationModel, MrfConfig, PerfWeights,
};

use crate::common::{load_aligned_piece, matched_pieces, tsv_corpus, DEFAULT_SIGMA_OBS, DEFAULT_SIGMA_V};
use crate::config::{PipelineConfig, WeightsFile};

#[derive(Args)]
pub struct OptimizeArgs {
    /// Held-out score TSVs for the prior-likelihood search.
    #[arg(long)]
    heldout: PathBuf,

    /// Trained context-tree JSON.
    #[arg(long)]
    tree: PathBuf,

    /// Interdependence radius family JSON (from `train`).
    #[arg(long)]
    interdep: PathBuf,

    /// Dev-set reference score TSVs.
    #[arg(long)]
    scores: PathBuf,

    /// Dev-set performance TSVs.
    #[arg(long)]
    performances: PathBuf,

    /// Dev-set alignment TSVs.
    #[arg(long)]
    alignments: PathBuf,

    /// Duration-model JSON for the decoding search.
    #[arg(long)]
    durmodel: PathBuf,

    /// Output weights JSON.
    #[arg(long)]
    out: PathBuf,

    /// Tempo-smoother process noise.
    #[arg(long)]
    sigma_v: Option<f64>,

    /// Tempo-smoother observation noise.
    #[arg(long)]
    sigma_obs: Option<f64>,
}

pub fn run(args: OptimizeArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let sigma_v = args.sigma_v.or(cfg.sigma_v).unwrap_or(DEFAULT_SIGMA_V);
    let sigma_obs = args.sigma_obs.or(cfg.sigma_obs).unwrap_or(DEFAULT_SIGMA_OBS);

    let tree = ContextTree::load(&args.tree)
        .with_context(|| format!("loading tree {}", args.tree.display()))?;
    let joints = load_interdep_set(&args.interdep)
        .with_context(|| format!("loading interdependence family {}", args.interdep.display()))?;
    let durmodel = DurationModel::load(&args.durmodel)
        .with_context(|| format!("loading durations {}", args.durmodel.display()))?;

    let mut heldout = Vec::new();
    for path in tsv_corpus(&args.heldout, "held-out corpus")? {
        heldout.push(read_score_tsv(&path)?);
    }
    let (score_weights, delta_nbh) = optimize_score_weights(&heldout, &tree, &joints)?;
    println!("beta1 {}", score_weights.beta1);
    println!("beta2 {}", score_weights.beta2);
    println!("delta_nbh {delta_nbh}");

    let mut dev = Vec::new();
    for files in matched_pieces(&args.scores, &args.performances, &args.alignments)? {
        let piece = load_aligned_piece(&files, sigma_v, sigma_obs)?;
        dev.push(DevPiece {
            performance: piece.performance,
            tau: piece.tau,
            tempo: piece.tempo,
            truth: piece.truth,
        });
    }
    let decode_cfg = MrfConfig {
        tree,
        interdep: joints[delta_nbh as usize].clone(),
        durmodel,
        weights: mrf_weights(&score_weights, &PerfWeights { beta31: 0.0, beta32: 0.0 }),
        delta_nbh,
    };
    let perf_weights = optimize_perf_weights(&dev, &decode_cfg)?;
    println!("beta31 {}", perf_weights.beta31);
    println!("beta32 {}", perf_weights.beta32);

    let weights = WeightsFile {
        beta1: score_weights.beta1,
        beta2: score_weights.beta2,
        delta_nbh,
        beta31: perf_weights.beta31,
        beta32: perf_weights.beta32,
    };
    weights.save(&args.out)?;
    Ok(())
}
