//! `tactus simulate`: render score TSVs into synthetic performances with
//! ground-truth alignments.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use tactus_core::corpus::{read_score_tsv, write_alignment_tsv, write_performance_tsv};
use tactus_core::{simulate_performance, SimParams};

use crate::common::{stem, tsv_corpus};

#[derive(Args)]
pub struct SimulateArgs {
    /// Directory of score TSVs to render.
    #[arg(long)]
    scores: PathBuf,

    /// Output directory; gets performances/ and alignments/ subdirectories.
    #[arg(long)]
    out: PathBuf,

    /// Simulation parameters JSON.
    #[arg(long)]
    params: PathBuf,
}

pub fn run(args: SimulateArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.params)
        .with_context(|| format!("reading {}", args.params.display()))?;
    let mut params: SimParams = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.params.display()))?;
    if let Some(seed) = seed {
        params.seed = seed;
    }
    params.validate()?;

    let files = tsv_corpus(&args.scores, "score")?;
    let perf_dir = args.out.join("performances");
    let align_dir = args.out.join("alignments");
    std::fs::create_dir_all(&perf_dir).with_context(|| format!("creating {}", perf_dir.display()))?;
    std::fs::create_dir_all(&align_dir)
        .with_context(|| format!("creating {}", align_dir.display()))?;

    // The RNG stream is the piece's position in stem order, so reruns and
    // job counts cannot change any file.
    files.par_iter().enumerate().try_for_each(|(index, path)| -> anyhow::Result<()> {
        let name = stem(path)?;
        let score = read_score_tsv(path)?;
        let (performance, alignment) = simulate_performance(&score, &params, index as u64)?;
        write_performance_tsv(perf_dir.join(format!("{name}.tsv")), &performance)?;
        write_alignment_tsv(align_dir.join(format!("{name}.tsv")), &alignment)?;
        Ok(())
    })?;

    println!("pieces {}", files.len());
    Ok(())
}
