//! Configuration file, weight file, and model resolution.
//!
//! Model paths resolve in precedence order: command flag, config file
//! entry, conventional name inside the models directory, then a built-in
//! fallback (uniform priors, flat metrical model, bundled duration model
//! and weights). Every fallback that weakens the decode is reported on
//! stderr; the bundled numeric defaults are silent because they are the
//! documented out-of-the-box behavior.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tactus_core::{
    load_interdep_set, train_hmm, ContextTree, DurationModel, InterdependenceModel, MetreSpec,
    MetricalHmmParams, PerfWeights, ScoreModelWeights, BUNDLED_DELTA_NBH,
};

/// The five decoder weights as stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub beta1: f64,
    pub beta2: f64,
    pub delta_nbh: u8,
    pub beta31: f64,
    pub beta32: f64,
}

impl WeightsFile {
    pub fn bundled() -> WeightsFile {
        let score = ScoreModelWeights::bundled();
        let perf = PerfWeights::bundled();
        WeightsFile {
            beta1: score.beta1,
            beta2: score.beta2,
            delta_nbh: BUNDLED_DELTA_NBH,
            beta31: perf.beta31,
            beta32: perf.beta32,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, w) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta31", self.beta31),
            ("beta32", self.beta32),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                bail!("{name} must be non-negative and finite, got {w}");
            }
        }
        if self.delta_nbh > 15 {
            bail!("delta_nbh must be at most 15, got {}", self.delta_nbh);
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("weights serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_json_string())
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<WeightsFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let w: WeightsFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        w.validate().with_context(|| format!("validating {}", path.display()))?;
        Ok(w)
    }
}

/// Optional file-level configuration; every field can also come from a
/// command flag, which wins.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub models: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub interdep: Option<PathBuf>,
    pub durmodel: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub hmm: Option<Vec<PathBuf>>,
    pub metres: Option<Vec<String>>,
    pub chord_eps: Option<f64>,
    pub tempo_source: Option<String>,
    pub sigma_v: Option<f64>,
    pub sigma_obs: Option<f64>,
    pub pedal_threshold: Option<u8>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta31: Option<f64>,
    pub beta32: Option<f64>,
    pub delta_nbh: Option<u8>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
        let Some(path) = path else { return Ok(PipelineConfig::default()) };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Metre names accepted on the command line and in config files.
pub fn metre_by_name(name: &str) -> anyhow::Result<MetreSpec> {
    match name {
        "duple" | "4/4" => Ok(MetreSpec::duple16()),
        "triple" | "3/4" => Ok(MetreSpec::triple12()),
        other => bail!("unknown metre {other:?} (expected duple, triple, 4/4, or 3/4)"),
    }
}

pub const DEFAULT_METRES: &[&str] = &["duple", "triple"];

/// Conventional file name for a metre's trained model.
pub fn hmm_file_name(metre: &MetreSpec) -> String {
    format!("hmm_{}.json", metre.name)
}

/// An untrained metrical model: uniform beat statistics, default noise
/// parameters and tempo grid. Training with zero pieces yields exactly the
/// smoothed-uniform distributions.
pub fn flat_hmm(metre: &MetreSpec) -> MetricalHmmParams {
    train_hmm(&[], metre, 0.1).expect("uniform metrical model")
}

/// The directory of human-readable defaults shipped with the repository.
const DEFAULTS_DIR: &str = "defaults";

fn default_file(name: &str) -> Option<PathBuf> {
    let p = Path::new(DEFAULTS_DIR).join(name);
    p.is_file().then_some(p)
}

/// Picks the first available source for one model file.
fn resolve(
    flag: Option<&Path>,
    config: Option<&Path>,
    models_dir: Option<&Path>,
    conventional: &str,
) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = config {
        return Some(p.to_path_buf());
    }
    if let Some(dir) = models_dir {
        let p = dir.join(conventional);
        if p.is_file() {
            return Some(p);
        }
    }
    None
}

/// Everything the transcription pipeline loads from disk, with fallbacks
/// applied and reported.
pub struct ModelSet {
    pub tree: ContextTree,
    /// One model per radius 0..=15 when a set file was loaded; a lone model
    /// otherwise.
    pub interdep: InterdepSource,
    pub durmodel: DurationModel,
    pub hmm: Vec<MetricalHmmParams>,
    pub weights: WeightsFile,
}

pub enum InterdepSource {
    Set(Vec<InterdependenceModel>),
    One(InterdependenceModel),
}

impl InterdepSource {
    /// The joint to decode with at a given neighbourhood radius.
    pub fn at(&self, delta_nbh: u8) -> InterdependenceModel {
        match self {
            InterdepSource::Set(models) => models[delta_nbh.min(15) as usize].clone(),
            InterdepSource::One(model) => model.clone(),
        }
    }
}

/// Flag-level model path overrides shared by the commands that decode.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ModelArgs {
    /// Directory holding tree.json, interdep.json, durmodel.json,
    /// weights.json, and hmm_*.json.
    #[arg(long)]
    pub models: Option<PathBuf>,

    /// Context-tree JSON.
    #[arg(long)]
    pub tree: Option<PathBuf>,

    /// Interdependence JSON (single model or radius family).
    #[arg(long)]
    pub interdep: Option<PathBuf>,

    /// Duration-model JSON.
    #[arg(long)]
    pub durmodel: Option<PathBuf>,

    /// Weights JSON (beta1, beta2, delta_nbh, beta31, beta32).
    #[arg(long)]
    pub weights: Option<PathBuf>,

    /// Metrical-model JSON; repeat for several metres.
    #[arg(long)]
    pub hmm: Vec<PathBuf>,
}

/// Loads every model the pipeline needs, falling back where files are
/// absent. `need_hmm` skips metrical models when onsets come from outside.
pub fn load_models(
    args: &ModelArgs,
    cfg: &PipelineConfig,
    need_hmm: bool,
) -> anyhow::Result<ModelSet> {
    let models_dir = args.models.as_deref().or(cfg.models.as_deref());

    let tree = match resolve(args.tree.as_deref(), cfg.tree.as_deref(), models_dir, "tree.json") {
        Some(p) => {
            ContextTree::load(&p).with_context(|| format!("loading tree {}", p.display()))?
        }
        None => {
            eprintln!("warning: no context tree given; decoding with a uniform prior");
            ContextTree::uniform_leaf()
        }
    };

    let interdep = match resolve(
        args.interdep.as_deref(),
        cfg.interdep.as_deref(),
        models_dir,
        "interdep.json",
    ) {
        Some(p) => load_interdep_any(&p)?,
        None => {
            eprintln!("warning: no interdependence model given; decoding with a uniform joint");
            InterdepSource::One(InterdependenceModel::uniform(BUNDLED_DELTA_NBH))
        }
    };

    let durmodel = match resolve(
        args.durmodel.as_deref(),
        cfg.durmodel.as_deref(),
        models_dir,
        "durmodel.json",
    )
    .or_else(|| default_file("durmodel.json"))
    {
        Some(p) => {
            DurationModel::load(&p).with_context(|| format!("loading durations {}", p.display()))?
        }
        None => DurationModel::bundled(),
    };

    let weights = match resolve(
        args.weights.as_deref(),
        cfg.weights.as_deref(),
        models_dir,
        "weights.json",
    )
    .or_else(|| default_file("weights.json"))
    {
        Some(p) => WeightsFile::load(&p)?,
        None => WeightsFile::bundled(),
    };

    let hmm = if !need_hmm {
        Vec::new()
    } else {
        let paths: Vec<PathBuf> = if !args.hmm.is_empty() {
            args.hmm.clone()
        } else if let Some(paths) = &cfg.hmm {
            paths.clone()
        } else if let Some(dir) = models_dir {
            let mut found = Vec::new();
            for name in DEFAULT_METRES {
                let p = dir.join(hmm_file_name(&metre_by_name(name)?));
                if p.is_file() {
                    found.push(p);
                }
            }
            found
        } else {
            Vec::new()
        };
        if paths.is_empty() {
            eprintln!("warning: no metrical models given; decoding with flat beat statistics");
            DEFAULT_METRES.iter().map(|n| flat_hmm(&metre_by_name(n).unwrap())).collect()
        } else {
            let mut models = Vec::with_capacity(paths.len());
            for p in paths {
                let m = MetricalHmmParams::load(&p)
                    .with_context(|| format!("loading metrical model {}", p.display()))?;
                models.push(m);
            }
            models
        }
    };

    Ok(ModelSet { tree, interdep, durmodel, hmm, weights })
}

/// An interdependence file may hold a single model or the radius family the
/// trainer writes; accept both.
fn load_interdep_any(path: &Path) -> anyhow::Result<InterdepSource> {
    if let Ok(set) = load_interdep_set(path) {
        return Ok(InterdepSource::Set(set));
    }
    let one = InterdependenceModel::load(path)
        .with_context(|| format!("loading interdependence {}", path.display()))?;
    Ok(InterdepSource::One(one))
}
