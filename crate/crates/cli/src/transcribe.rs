//! `tactus transcribe`: one performance in (MIDI or performance TSV), one
//! quantized score out, with a JSON report of the decoding.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use tactus_core::corpus::{read_onsets_tsv, read_performance_tsv, write_score_tsv};
use tactus_core::midi::ingest_midi_file;
use tactus_core::{
    transcribe_performance, MrfConfig, MrfWeights, PerformanceNote, ScoreTime, TempoSource,
    DEFAULT_CHORD_EPS, DEFAULT_PEDAL_THRESHOLD,
};

use crate::common::{label_name, DEFAULT_SIGMA_OBS, DEFAULT_SIGMA_V};
use crate::config::{load_models, ModelArgs, PipelineConfig};

#[derive(Args)]
pub struct TranscribeArgs {
    /// Input performance: .mid/.midi file or performance TSV.
    #[arg(long)]
    input: PathBuf,

    /// Output score TSV.
    #[arg(long)]
    out: PathBuf,

    /// Output JSON report.
    #[arg(long)]
    report: Option<PathBuf>,

    #[command(flatten)]
    models: ModelArgs,

    /// Externally supplied onset score times (`id  num  den` TSV); implies
    /// the kalman tempo source.
    #[arg(long)]
    onsets: Option<PathBuf>,

    /// Externally supplied tempi (`id  seconds_per_whole_note` TSV); with
    /// --onsets this selects the provided tempo source.
    #[arg(long)]
    tempos: Option<PathBuf>,

    /// hmm, kalman, or provided (default: inferred from --onsets/--tempos).
    #[arg(long)]
    tempo_source: Option<String>,

    /// Chord-merging window in seconds for onset decoding.
    #[arg(long)]
    chord_eps: Option<f64>,

    /// Sustain-pedal threshold for MIDI ingestion (0-127).
    #[arg(long)]
    pedal_threshold: Option<u8>,

    /// Tempo-smoother process noise (kalman source).
    #[arg(long)]
    sigma_v: Option<f64>,

    /// Tempo-smoother observation noise (kalman source).
    #[arg(long)]
    sigma_obs: Option<f64>,

    /// Weight overrides.
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    beta31: Option<f64>,
    #[arg(long)]
    beta32: Option<f64>,
    #[arg(long)]
    delta_nbh: Option<u8>,
}

#[derive(Serialize)]
struct Report {
    input: String,
    notes: usize,
    tempo_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    metre: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_posterior: Option<f64>,
    fallback_notes: usize,
    weights: ReportWeights,
    per_note: Vec<NoteLine>,
}

#[derive(Serialize)]
struct ReportWeights {
    beta1: f64,
    beta2: f64,
    beta31: f64,
    beta32: f64,
    delta_nbh: u8,
}

#[derive(Serialize)]
struct NoteLine {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    candidates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
}

fn read_performance(path: &Path, pedal_threshold: u8) -> anyhow::Result<Vec<PerformanceNote>> {
    let is_midi = matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("mid" | "midi")
    );
    if is_midi {
        let (notes, warnings) = ingest_midi_file(path, pedal_threshold)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(notes)
    } else {
        let mut notes = read_performance_tsv(path)?;
        notes.sort_by(|a, b| {
            a.onset_sec
                .total_cmp(&b.onset_sec)
                .then(a.pitch.cmp(&b.pitch))
                .then(a.id.cmp(&b.id))
        });
        Ok(notes)
    }
}

/// Per-note lookup of an `id -> value` table, failing on missing notes.
fn per_note<T: Copy>(
    table: &HashMap<String, T>,
    notes: &[PerformanceNote],
    what: &str,
) -> anyhow::Result<Vec<T>> {
    notes
        .iter()
        .map(|n| {
            table
                .get(&n.id)
                .copied()
                .with_context(|| format!("note {:?} has no entry in the {what} file", n.id))
        })
        .collect()
}

pub fn run(args: TranscribeArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let pedal = args
        .pedal_threshold
        .or(cfg.pedal_threshold)
        .unwrap_or(DEFAULT_PEDAL_THRESHOLD);
    let chord_eps = args.chord_eps.or(cfg.chord_eps).unwrap_or(DEFAULT_CHORD_EPS);
    let sigma_v = args.sigma_v.or(cfg.sigma_v).unwrap_or(DEFAULT_SIGMA_V);
    let sigma_obs = args.sigma_obs.or(cfg.sigma_obs).unwrap_or(DEFAULT_SIGMA_OBS);

    let source_name = match args
        .tempo_source
        .as_deref()
        .or(cfg.tempo_source.as_deref())
    {
        Some(s @ ("hmm" | "kalman" | "provided")) => s.to_string(),
        Some(other) => bail!("unknown tempo source {other:?} (expected hmm, kalman, or provided)"),
        None if args.tempos.is_some() => "provided".to_string(),
        None if args.onsets.is_some() => "kalman".to_string(),
        None => "hmm".to_string(),
    };

    let mut notes = read_performance(&args.input, pedal)?;
    if notes.is_empty() {
        bail!("input {} contains no notes", args.input.display());
    }

    let set = load_models(&args.models, cfg, source_name == "hmm")?;
    let weights = set.weights;
    let beta1 = args.beta1.or(cfg.beta1).unwrap_or(weights.beta1);
    let beta2 = args.beta2.or(cfg.beta2).unwrap_or(weights.beta2);
    let beta31 = args.beta31.or(cfg.beta31).unwrap_or(weights.beta31);
    let beta32 = args.beta32.or(cfg.beta32).unwrap_or(weights.beta32);
    let delta_nbh = args.delta_nbh.or(cfg.delta_nbh).unwrap_or(weights.delta_nbh);
    if delta_nbh > 15 {
        bail!("delta_nbh must be at most 15, got {delta_nbh}");
    }

    let decode_cfg = MrfConfig {
        interdep: set.interdep.at(delta_nbh),
        tree: set.tree,
        durmodel: set.durmodel,
        weights: MrfWeights { beta1, beta2, beta31, beta32 },
        delta_nbh,
    };

    // The supplied-onset paths re-sort so equal score times are adjacent.
    let source = match source_name.as_str() {
        "hmm" => TempoSource::Hmm,
        "kalman" | "provided" => {
            let onsets_path = args
                .onsets
                .as_ref()
                .with_context(|| format!("tempo source {source_name} needs --onsets"))?;
            let onset_table: HashMap<String, ScoreTime> =
                read_onsets_tsv(onsets_path)?.into_iter().collect();
            notes.sort_by(|a, b| {
                onset_table
                    .get(&a.id)
                    .cmp(&onset_table.get(&b.id))
                    .then(a.onset_sec.total_cmp(&b.onset_sec))
                    .then(a.pitch.cmp(&b.pitch))
                    .then(a.id.cmp(&b.id))
            });
            let tau = per_note(&onset_table, &notes, "onsets")?;
            if source_name == "kalman" {
                TempoSource::Kalman { tau, sigma_v, sigma_obs }
            } else {
                let tempos_path =
                    args.tempos.as_ref().context("tempo source provided needs --tempos")?;
                let tempo_table = read_tempos(tempos_path)?;
                TempoSource::Provided { tau, tempo: per_note(&tempo_table, &notes, "tempos")? }
            }
        }
        _ => unreachable!("validated above"),
    };

    let out = transcribe_performance(&notes, &set.hmm, chord_eps, source, &decode_cfg)?;
    write_score_tsv(&args.out, &out.decoded.notes)?;

    let fallback_notes = out.decoded.report.iter().filter(|r| r.label.is_none()).count();
    if let Some(report_path) = &args.report {
        let report = Report {
            input: args.input.display().to_string(),
            notes: notes.len(),
            tempo_source: source_name.clone(),
            metre: out.onsets.as_ref().map(|o| o.metre.name.clone()),
            log_posterior: out.onsets.as_ref().map(|o| o.log_posterior),
            fallback_notes,
            weights: ReportWeights { beta1, beta2, beta31, beta32, delta_nbh },
            per_note: out
                .decoded
                .report
                .iter()
                .zip(&out.decoded.notes)
                .map(|(r, n)| NoteLine {
                    id: n.id.clone(),
                    label: r.label.map(label_name),
                    candidates: r.candidate_count,
                    energy: r.energy,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serialize");
        text.push('\n');
        std::fs::write(report_path, text)
            .with_context(|| format!("writing {}", report_path.display()))?;
    }

    println!("notes {}", notes.len());
    println!("fallback_notes {fallback_notes}");
    Ok(())
}

/// `id  seconds_per_whole_note` pairs.
fn read_tempos(path: &Path) -> anyhow::Result<HashMap<String, f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            bail!("{}:{}: expected 2 fields", path.display(), lineno + 1);
        };
        let v: f64 = v
            .parse()
            .with_context(|| format!("{}:{}: bad tempo {v:?}", path.display(), lineno + 1))?;
        if !(v > 0.0) || !v.is_finite() {
            bail!("{}:{}: tempo must be positive, got {v}", path.display(), lineno + 1);
        }
        if table.insert(id.to_string(), v).is_some() {
            bail!("{}:{}: duplicate note id {id:?}", path.display(), lineno + 1);
        }
    }
    Ok(table)
}
