//! `tactus train`: learn every score-side model from a directory of score
//! TSVs and write them under conventional names.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use tactus_core::corpus::read_score_tsv;
use tactus_core::{
    extract_samples, grow_context_tree, learn_interdependence, save_interdep_set, train_hmm,
};

use crate::common::tsv_corpus;
use crate::config::{hmm_file_name, metre_by_name, PipelineConfig, DEFAULT_METRES};

/// Dirichlet-style smoothing for beat statistics.
const HMM_ALPHA: f64 = 0.1;

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of score TSVs.
    #[arg(long)]
    corpus: PathBuf,

    /// Output directory for the model files.
    #[arg(long)]
    out: PathBuf,

    /// Metres to train, e.g. --metres duple,triple.
    #[arg(long, value_delimiter = ',')]
    metres: Vec<String>,
}

pub fn run(args: TrainArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let files = tsv_corpus(&args.corpus, "corpus")?;
    let mut corpus = Vec::with_capacity(files.len());
    for path in &files {
        corpus.push(read_score_tsv(path)?);
    }

    let metre_names: Vec<String> = if !args.metres.is_empty() {
        args.metres.clone()
    } else if let Some(m) = &cfg.metres {
        m.clone()
    } else {
        DEFAULT_METRES.iter().map(|s| s.to_string()).collect()
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let samples = extract_samples(&corpus);
    if samples.len() < 2 {
        anyhow::bail!("corpus yields {} training samples; need at least 2", samples.len());
    }
    let growth = grow_context_tree(&samples, samples.len());
    growth.tree.save(args.out.join("tree.json"))?;

    let joints: Vec<_> = (0..16).map(|d| learn_interdependence(&corpus, d).0).collect();
    save_interdep_set(&joints, args.out.join("interdep.json"))?;

    for name in &metre_names {
        let metre = metre_by_name(name)?;
        let model = train_hmm(&corpus, &metre, HMM_ALPHA)
            .with_context(|| format!("training metre {name}"))?;
        model.save(args.out.join(hmm_file_name(&metre)))?;
    }

    println!("pieces {}", corpus.len());
    println!("samples {}", samples.len());
    println!("tree_leaves {}", growth.tree.leaf_count());
    Ok(())
}
