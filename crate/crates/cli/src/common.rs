//! Helpers shared by the subcommands: corpus directory walking, alignment
//! of performances with their reference scores, and ground-truth tempo
//! estimation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use tactus_core::corpus::{
    list_tsv_files, read_alignment_tsv, read_performance_tsv, read_score_tsv,
};
use tactus_core::{
    smooth_tempi, NoteValueLabel, PerformanceNote, ScoreNote, ScoreTime,
};

/// Default smoother parameters for ground-truth tempo tracks.
pub const DEFAULT_SIGMA_V: f64 = 0.05;
pub const DEFAULT_SIGMA_OBS: f64 = 0.1;

/// File stem, for matching corpus files across directories.
pub fn stem(path: &Path) -> anyhow::Result<&str> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("unusable file name {}", path.display()))
}

/// Lists a directory's TSV files and fails loudly when there are none.
pub fn tsv_corpus(dir: &Path, what: &str) -> anyhow::Result<Vec<PathBuf>> {
    let files =
        list_tsv_files(dir).with_context(|| format!("listing {what} in {}", dir.display()))?;
    if files.is_empty() {
        bail!("no .tsv files in {what} directory {}", dir.display());
    }
    Ok(files)
}

/// One performance with its reference score and alignment, matched by stem
/// across three directories.
pub struct PieceFiles {
    pub name: String,
    pub score: PathBuf,
    pub performance: PathBuf,
    pub alignment: PathBuf,
}

/// Matches performance files to score and alignment files by stem. Every
/// performance must have both counterparts.
pub fn matched_pieces(
    scores: &Path,
    performances: &Path,
    alignments: &Path,
) -> anyhow::Result<Vec<PieceFiles>> {
    let perf_files = tsv_corpus(performances, "performance")?;
    let mut pieces = Vec::with_capacity(perf_files.len());
    for perf in perf_files {
        let name = stem(&perf)?.to_string();
        let score = scores.join(format!("{name}.tsv"));
        let alignment = alignments.join(format!("{name}.tsv"));
        if !score.is_file() {
            bail!("no score for piece {name:?} (expected {})", score.display());
        }
        if !alignment.is_file() {
            bail!("no alignment for piece {name:?} (expected {})", alignment.display());
        }
        pieces.push(PieceFiles { name, score, performance: perf, alignment });
    }
    Ok(pieces)
}

/// A performance joined with its ground truth: per note (in playing order)
/// the true onset score time, true note value, and a smoothed local tempo.
pub struct AlignedPiece {
    pub performance: Vec<PerformanceNote>,
    pub tau: Vec<ScoreTime>,
    pub truth: Vec<ScoreTime>,
    pub tempo: Vec<f64>,
}

/// Loads one piece and joins it with its reference. Notes are sorted by
/// (onset score time, performed onset, pitch, id) so equal score times are
/// consecutive; tempi come from the Kalman smoother over cluster means.
pub fn load_aligned_piece(
    files: &PieceFiles,
    sigma_v: f64,
    sigma_obs: f64,
) -> anyhow::Result<AlignedPiece> {
    let score = read_score_tsv(&files.score)?;
    let performance = read_performance_tsv(&files.performance)?;
    let alignment = read_alignment_tsv(&files.alignment)?;
    let (performance, tau, truth, tempo) =
        align_with_truth(&score, performance, &alignment, sigma_v, sigma_obs)
            .with_context(|| format!("aligning piece {:?}", files.name))?;
    Ok(AlignedPiece { performance, tau, truth, tempo })
}

/// The in-memory join underneath [`load_aligned_piece`], reusable when the
/// pieces are already loaded.
pub fn align_with_truth(
    score: &[ScoreNote],
    performance: Vec<PerformanceNote>,
    alignment: &[(String, String)],
    sigma_v: f64,
    sigma_obs: f64,
) -> anyhow::Result<(Vec<PerformanceNote>, Vec<ScoreTime>, Vec<ScoreTime>, Vec<f64>)> {
    let by_id: HashMap<&str, &ScoreNote> = score.iter().map(|n| (n.id.as_str(), n)).collect();
    let to_score: HashMap<&str, &str> =
        alignment.iter().map(|(p, s)| (p.as_str(), s.as_str())).collect();

    let mut joined: Vec<(PerformanceNote, ScoreTime, ScoreTime)> = Vec::new();
    for note in performance {
        let score_id = to_score
            .get(note.id.as_str())
            .with_context(|| format!("performance note {:?} missing from alignment", note.id))?;
        let reference = by_id
            .get(score_id)
            .with_context(|| format!("alignment target {score_id:?} missing from score"))?;
        joined.push((note, reference.onset, reference.note_value));
    }
    joined.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then(a.0.onset_sec.total_cmp(&b.0.onset_sec))
            .then(a.0.pitch.cmp(&b.0.pitch))
            .then(a.0.id.cmp(&b.0.id))
    });

    // Cluster means of performed onsets, one per distinct score time.
    let mut cluster_t: Vec<f64> = Vec::new();
    let mut cluster_tau: Vec<ScoreTime> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut cluster_of = Vec::with_capacity(joined.len());
    for (note, tau, _) in &joined {
        if cluster_tau.last() == Some(tau) {
            *cluster_t.last_mut().unwrap() += note.onset_sec;
            *counts.last_mut().unwrap() += 1;
        } else {
            cluster_t.push(note.onset_sec);
            cluster_tau.push(*tau);
            counts.push(1);
        }
        cluster_of.push(cluster_tau.len() - 1);
    }
    for (t, c) in cluster_t.iter_mut().zip(&counts) {
        *t /= *c as f64;
    }

    let track = smooth_tempi(&cluster_t, &cluster_tau, sigma_v, sigma_obs)?;
    let tempo = track.per_note(&cluster_of);

    let mut performance = Vec::with_capacity(joined.len());
    let mut tau = Vec::with_capacity(joined.len());
    let mut truth = Vec::with_capacity(joined.len());
    for (note, t, r) in joined {
        performance.push(note);
        tau.push(t);
        truth.push(r);
    }
    Ok((performance, tau, truth, tempo))
}

/// Stable label names for reports.
pub fn label_name(label: NoteValueLabel) -> String {
    match label {
        NoteValueLabel::Ionv(k) => format!("ionv{k}"),
        NoteValueLabel::Other => "other".to_string(),
    }
}
