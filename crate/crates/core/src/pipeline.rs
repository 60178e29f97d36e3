//! End-to-end transcription: performed notes in, quantized score out.
//!
//! The gluing layer shared by the command-line tool and the integration
//! tests. It settles where onset score times and local tempi come from
//! (decode them jointly, or accept onsets from outside and smooth tempi
//! from the timing), then decodes note values.

use crate::error::{Error, Result};
use crate::hmm::{decode_onsets, MetricalHmmParams, OnsetTranscription};
use crate::mrf::{decode_piece, DecodedPiece, MrfConfig};
use crate::rational::ScoreTime;
use crate::score::PerformanceNote;
use crate::tempo::smooth_tempi;

/// Where onset score times and local tempi come from.
#[derive(Clone, Debug)]
pub enum TempoSource {
    /// Decode onsets and tempi jointly with the metrical models.
    Hmm,
    /// Onset score times supplied per note; tempi smoothed from the
    /// performed/score onset pairs.
    Kalman { tau: Vec<ScoreTime>, sigma_v: f64, sigma_obs: f64 },
    /// Onsets and tempi both supplied per note.
    Provided { tau: Vec<ScoreTime>, tempo: Vec<f64> },
}

/// A decoded piece together with the intermediates reports want.
#[derive(Clone, Debug)]
pub struct Transcription {
    pub decoded: DecodedPiece,
    /// Onset score time per input note.
    pub tau: Vec<ScoreTime>,
    /// Local tempo per input note, seconds per whole note.
    pub tempo: Vec<f64>,
    /// Present when the metrical models decoded the onsets.
    pub onsets: Option<OnsetTranscription>,
}

/// Groups notes into clusters of equal (consecutive) onset score time and
/// returns per-cluster mean performed onset, per-cluster score time, and
/// each note's cluster index.
fn cluster_by_tau(
    perf: &[PerformanceNote],
    tau: &[ScoreTime],
) -> Result<(Vec<f64>, Vec<ScoreTime>, Vec<usize>)> {
    let mut cluster_tau: Vec<ScoreTime> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut cluster_of = Vec::with_capacity(perf.len());
    for (n, &t) in tau.iter().enumerate() {
        match cluster_tau.last() {
            Some(&last) if t == last => {
                let s = sums.last_mut().unwrap();
                s.0 += perf[n].onset_sec;
                s.1 += 1;
            }
            Some(&last) if t < last => {
                return Err(Error::InvalidInput(format!(
                    "onset score times must be non-decreasing (note {n} steps backwards)"
                )));
            }
            _ => {
                cluster_tau.push(t);
                sums.push((perf[n].onset_sec, 1));
            }
        }
        cluster_of.push(cluster_tau.len() - 1);
    }
    let cluster_t = sums.into_iter().map(|(s, c)| s / c as f64).collect();
    Ok((cluster_t, cluster_tau, cluster_of))
}

/// Transcribes one performance: onsets and tempi per `source`, then note
/// values. Notes must be sorted by onset. `metrical` is consulted only by
/// [`TempoSource::Hmm`]; the supplied-onset paths may pass an empty slice.
pub fn transcribe_performance(
    perf: &[PerformanceNote],
    metrical: &[MetricalHmmParams],
    chord_eps: f64,
    source: TempoSource,
    cfg: &MrfConfig,
) -> Result<Transcription> {
    if perf.is_empty() {
        return Err(Error::InvalidInput("cannot transcribe an empty performance".into()));
    }
    let (tau, tempo, onsets) = match source {
        TempoSource::Hmm => {
            let out = decode_onsets(perf, metrical, chord_eps)?;
            (out.tau.clone(), out.tempo.clone(), Some(out))
        }
        TempoSource::Kalman { tau, sigma_v, sigma_obs } => {
            if tau.len() != perf.len() {
                return Err(Error::InvalidInput(format!(
                    "{} onset score times for {} notes",
                    tau.len(),
                    perf.len()
                )));
            }
            let (cluster_t, cluster_tau, cluster_of) = cluster_by_tau(perf, &tau)?;
            let track = smooth_tempi(&cluster_t, &cluster_tau, sigma_v, sigma_obs)?;
            (tau, track.per_note(&cluster_of), None)
        }
        TempoSource::Provided { tau, tempo } => {
            if tau.len() != perf.len() || tempo.len() != perf.len() {
                return Err(Error::InvalidInput(format!(
                    "{} onset score times and {} tempi for {} notes",
                    tau.len(),
                    tempo.len(),
                    perf.len()
                )));
            }
            (tau, tempo, None)
        }
    };
    let decoded = decode_piece(perf, &tau, &tempo, cfg)?;
    Ok(Transcription { decoded, tau, tempo, onsets })
}
