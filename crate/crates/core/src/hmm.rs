//! Onset rhythm transcription with a metrical HMM.
//!
//! Onset score times are decoded from performed onset times by Viterbi over a
//! joint state (beat position s in 1..=G, tempo grid index). Beat transitions
//! carry learned rhythm statistics; a Gaussian random walk ties consecutive
//! tempo grid points; the emission compares the observed inter-onset time
//! with the score interval implied by a beat transition times the current
//! tempo. Several metre models can be decoded side by side, the one with the
//! highest log posterior winning.
//!
//! Everything runs in log domain with densities floored at e^-700.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::ScoreTime;
use crate::score::{build_onset_clusters, PerformanceNote, ScoreNote};

/// Log-density floor: probabilities never drop below e^-700.
pub const LOG_FLOOR: f64 = -700.0;

/// Default performed-simultaneity threshold in seconds: onsets chained closer
/// than this merge into one performed cluster before decoding.
pub const DEFAULT_CHORD_EPS: f64 = 0.035;

fn ln_gaussian(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    let ln = -0.5 * z * z - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    ln.max(LOG_FLOOR)
}

/// A metre hypothesis: G beat positions per bar at a fixed resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct MetreSpec {
    pub name: String,
    /// Beat positions per bar; s ranges over 1..=G.
    pub g: usize,
    /// Score-time length of one beat position, in whole notes.
    pub resolution: ScoreTime,
}

impl MetreSpec {
    pub fn new(name: impl Into<String>, g: usize, resolution: ScoreTime) -> MetreSpec {
        assert!(g >= 2, "metre must have at least 2 beat positions");
        assert!(resolution.is_positive(), "metre resolution must be positive");
        MetreSpec { name: name.into(), g, resolution }
    }

    /// 4/4 bar at sixteenth-note resolution.
    pub fn duple16() -> MetreSpec {
        MetreSpec::new("duple", 16, ScoreTime::new(1, 16))
    }

    /// 3/4 bar at sixteenth-note resolution.
    pub fn triple12() -> MetreSpec {
        MetreSpec::new("triple", 12, ScoreTime::new(1, 16))
    }

    /// Bar length G * resolution.
    pub fn bar_length(&self) -> ScoreTime {
        self.resolution * self.g as i64
    }
}

/// Default tempo grid: 30 log-spaced points over [0.8, 6.4] s per whole note.
pub fn default_tempo_grid() -> Vec<f64> {
    let n = 30;
    (0..n)
        .map(|i| 0.8 * (6.4_f64 / 0.8).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Trained metrical HMM: beat statistics plus timing noise parameters and
/// the tempo discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricalHmmParams {
    pub metre: MetreSpec,
    /// P(s_1), length G.
    pub initial: Vec<f64>,
    /// P(s_n | s_{n-1}), G x G, rows normalized.
    pub transition: Vec<Vec<f64>>,
    /// Tempo random-walk std, s per whole note.
    pub sigma_v: f64,
    /// Onset jitter std, s.
    pub sigma_t: f64,
    /// Initial tempo mean and std.
    pub v_ini: f64,
    pub sigma_v_ini: f64,
    /// Discretized tempo values, strictly increasing.
    pub tempo_grid: Vec<f64>,
}

impl MetricalHmmParams {
    pub fn validate(&self) -> Result<()> {
        let g = self.metre.g;
        if self.initial.len() != g || self.transition.len() != g {
            return Err(Error::Model(format!(
                "HMM dimensions disagree with G = {g}: initial {}, transition {}",
                self.initial.len(),
                self.transition.len()
            )));
        }
        let sum: f64 = self.initial.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Model(format!("initial distribution sums to {sum}")));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != g {
                return Err(Error::Model(format!("transition row {i} has length {}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Model(format!("transition row {i} sums to {sum}")));
            }
        }
        if !(self.sigma_v > 0.0 && self.sigma_t > 0.0 && self.sigma_v_ini > 0.0) {
            return Err(Error::Model("HMM noise parameters must be positive".into()));
        }
        if self.v_ini <= 0.0 {
            return Err(Error::Model("initial tempo mean must be positive".into()));
        }
        if self.tempo_grid.len() < 2 {
            return Err(Error::Model("tempo grid needs at least 2 points".into()));
        }
        if !self.tempo_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Model("tempo grid must be strictly increasing".into()));
        }
        if self.tempo_grid[0] <= 0.0 {
            return Err(Error::Model("tempo grid must be positive".into()));
        }
        Ok(())
    }
}

// --------------------------------------------------------------------------
// Serialization: {metre, G, resolution, initial, transition, sigma_v,
// sigma_t, v_ini, sigma_v_ini, tempo_grid}.
// --------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HmmJson {
    metre: String,
    #[serde(rename = "G")]
    g: usize,
    resolution: [i64; 2],
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    sigma_v: f64,
    sigma_t: f64,
    v_ini: f64,
    sigma_v_ini: f64,
    tempo_grid: Vec<f64>,
}

impl MetricalHmmParams {
    pub fn to_json_string(&self) -> String {
        let mirror = HmmJson {
            metre: self.metre.name.clone(),
            g: self.metre.g,
            resolution: [self.metre.resolution.numer(), self.metre.resolution.denom()],
            initial: self.initial.clone(),
            transition: self.transition.clone(),
            sigma_v: self.sigma_v,
            sigma_t: self.sigma_t,
            v_ini: self.v_ini,
            sigma_v_ini: self.sigma_v_ini,
            tempo_grid: self.tempo_grid.clone(),
        };
        let mut s = serde_json::to_string_pretty(&mirror).expect("HMM params serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<MetricalHmmParams> {
        let mirror: HmmJson =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("HMM JSON: {e}")))?;
        let resolution = ScoreTime::checked_new(mirror.resolution[0], mirror.resolution[1])
            .ok_or_else(|| Error::Model("HMM resolution denominator is zero".into()))?;
        if !resolution.is_positive() {
            return Err(Error::Model("HMM resolution must be positive".into()));
        }
        if mirror.g < 2 {
            return Err(Error::Model("HMM needs G >= 2".into()));
        }
        let params = MetricalHmmParams {
            metre: MetreSpec::new(mirror.metre, mirror.g, resolution),
            initial: mirror.initial,
            transition: mirror.transition,
            sigma_v: mirror.sigma_v,
            sigma_t: mirror.sigma_t,
            v_ini: mirror.v_ini,
            sigma_v_ini: mirror.sigma_v_ini,
            tempo_grid: mirror.tempo_grid,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<MetricalHmmParams> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }
}

// --------------------------------------------------------------------------
// Training.
// --------------------------------------------------------------------------

/// Beat position of an exact score time under a metre: 1-based index of
/// (tau mod bar) / resolution. Errors when tau is not on the resolution grid.
fn beat_position(tau: ScoreTime, metre: &MetreSpec, note_id: &str) -> Result<usize> {
    // tau / resolution as an exact integer.
    let num = tau.numer() as i128 * metre.resolution.denom() as i128;
    let den = tau.denom() as i128 * metre.resolution.numer() as i128;
    if num % den != 0 {
        return Err(Error::InvalidInput(format!(
            "onset {tau} of note {note_id} is not representable at resolution {}",
            metre.resolution
        )));
    }
    let beats = num / den;
    Ok(beats.rem_euclid(metre.g as i128) as usize + 1)
}

/// Estimates initial and transition beat statistics from a score corpus by
/// counting onset-cluster beat positions with add-alpha smoothing. Timing
/// noise parameters and the tempo grid are filled with the crate defaults;
/// callers may override the public fields afterwards.
pub fn train_hmm(corpus: &[Vec<ScoreNote>], metre: &MetreSpec, alpha: f64) -> Result<MetricalHmmParams> {
    if alpha <= 0.0 {
        return Err(Error::InvalidInput("smoothing alpha must be positive".into()));
    }
    let g = metre.g;
    let mut initial_counts = vec![0.0_f64; g];
    let mut transition_counts = vec![vec![0.0_f64; g]; g];
    for piece in corpus {
        let clusters = build_onset_clusters(piece);
        let mut prev: Option<usize> = None;
        for cluster in &clusters.clusters {
            let note_id = &piece[cluster.members[0]].id;
            let s = beat_position(cluster.time, metre, note_id)? - 1;
            match prev {
                None => initial_counts[s] += 1.0,
                Some(p) => transition_counts[p][s] += 1.0,
            }
            prev = Some(s);
        }
    }
    let normalize = |counts: &[f64]| -> Vec<f64> {
        let total: f64 = counts.iter().sum::<f64>() + alpha * g as f64;
        counts.iter().map(|&c| (c + alpha) / total).collect()
    };
    Ok(MetricalHmmParams {
        metre: metre.clone(),
        initial: normalize(&initial_counts),
        transition: transition_counts.iter().map(|row| normalize(row)).collect(),
        sigma_v: 0.05,
        sigma_t: 0.02,
        v_ini: 2.0,
        sigma_v_ini: 1.0,
        tempo_grid: default_tempo_grid(),
    })
}

// --------------------------------------------------------------------------
// Beat positions -> score times.
// --------------------------------------------------------------------------

/// Reconstructs score times from a beat-position path: the first time is
/// s_1 itself, and each step advances by s' − s, wrapping a full bar when
/// s' ≤ s. Output is scaled by the metre resolution.
pub fn score_times_from_beats(s: &[usize], metre: &MetreSpec) -> Vec<ScoreTime> {
    let g = metre.g;
    let mut beats = Vec::with_capacity(s.len());
    let mut acc: i64 = 0;
    for (i, &si) in s.iter().enumerate() {
        assert!((1..=g).contains(&si), "beat position {si} outside 1..={g}");
        if i == 0 {
            acc = si as i64;
        } else {
            let prev = s[i - 1] as i64;
            let step = if si as i64 > prev { si as i64 - prev } else { g as i64 + si as i64 - prev };
            acc += step;
        }
        beats.push(acc);
    }
    beats.into_iter().map(|b| metre.resolution * b).collect()
}

// --------------------------------------------------------------------------
// Decoding.
// --------------------------------------------------------------------------

/// Result of onset transcription, aligned with the input notes.
#[derive(Clone, Debug, PartialEq)]
pub struct OnsetTranscription {
    /// Onset score time per input note; notes merged into one performed
    /// cluster share a value.
    pub tau: Vec<ScoreTime>,
    /// Decoded tempo per input note, an element of the winning tempo grid.
    pub tempo: Vec<f64>,
    pub metre: MetreSpec,
    pub log_posterior: f64,
}

/// Chains performed onsets into clusters: a new cluster starts when the gap
/// to the previous onset exceeds `chord_eps`. Input must be sorted by onset.
/// Returns member index lists in onset order.
pub fn merge_performed_clusters(perf: &[PerformanceNote], chord_eps: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, note) in perf.iter().enumerate() {
        match clusters.last_mut() {
            Some(cluster) if note.onset_sec - perf[*cluster.last().unwrap()].onset_sec <= chord_eps => {
                cluster.push(i);
            }
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

struct ViterbiResult {
    s_path: Vec<usize>,
    v_path: Vec<usize>,
    log_posterior: f64,
}

/// Joint Viterbi over (beat position, tempo index) for one model.
/// `t` holds the performed cluster onset times.
fn viterbi(t: &[f64], params: &MetricalHmmParams) -> ViterbiResult {
    let g = params.metre.g;
    let nv = params.tempo_grid.len();
    let n = t.len();
    let res = params.metre.resolution.to_f64();

    let ln_init: Vec<f64> = params.initial.iter().map(|&p| p.ln().max(LOG_FLOOR)).collect();
    let ln_a: Vec<Vec<f64>> = params
        .transition
        .iter()
        .map(|row| row.iter().map(|&p| p.ln().max(LOG_FLOOR)).collect())
        .collect();
    // Tempo walk densities between grid points.
    let ln_walk: Vec<Vec<f64>> = (0..nv)
        .map(|from| {
            (0..nv)
                .map(|to| ln_gaussian(params.tempo_grid[to], params.tempo_grid[from], params.sigma_v))
                .collect()
        })
        .collect();

    // score[s][v] for the current step.
    let mut score = vec![vec![0.0_f64; nv]; g];
    for (s, row) in score.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            *cell = ln_init[s] + ln_gaussian(params.tempo_grid[v], params.v_ini, params.sigma_v_ini);
        }
    }

    // Backpointers per transition step: best predecessor beat for each
    // (next beat, previous tempo), then best previous tempo for each
    // (next beat, next tempo).
    let mut bp_s: Vec<Vec<Vec<u16>>> = Vec::with_capacity(n.saturating_sub(1));
    let mut bp_v: Vec<Vec<Vec<u16>>> = Vec::with_capacity(n.saturating_sub(1));

    for step in 1..n {
        let dt = t[step] - t[step - 1];
        // Emission per (beat advance 1..=G, tempo index).
        let ln_em: Vec<Vec<f64>> = (1..=g)
            .map(|adv| {
                let dtau = res * adv as f64;
                (0..nv)
                    .map(|v| ln_gaussian(dt, dtau * params.tempo_grid[v], params.sigma_t))
                    .collect()
            })
            .collect();

        // Stage 1: best previous beat for each (next beat, previous tempo).
        let mut m = vec![vec![f64::NEG_INFINITY; nv]; g];
        let mut arg_s = vec![vec![0u16; nv]; g];
        for s_next in 0..g {
            for s_prev in 0..g {
                // Beat advance for s_prev+1 -> s_next+1 (1-based positions).
                let adv = if s_next > s_prev { s_next - s_prev } else { g + s_next - s_prev };
                let trans = ln_a[s_prev][s_next];
                for v in 0..nv {
                    let cand = score[s_prev][v] + trans + ln_em[adv - 1][v];
                    if cand > m[s_next][v] {
                        m[s_next][v] = cand;
                        arg_s[s_next][v] = s_prev as u16;
                    }
                }
            }
        }
        // Stage 2: best previous tempo for each (next beat, next tempo).
        let mut new_score = vec![vec![f64::NEG_INFINITY; nv]; g];
        let mut arg_v = vec![vec![0u16; nv]; g];
        for s_next in 0..g {
            for v_prev in 0..nv {
                let base = m[s_next][v_prev];
                for v_next in 0..nv {
                    let cand = base + ln_walk[v_prev][v_next];
                    if cand > new_score[s_next][v_next] {
                        new_score[s_next][v_next] = cand;
                        arg_v[s_next][v_next] = v_prev as u16;
                    }
                }
            }
        }
        score = new_score;
        bp_s.push(arg_s);
        bp_v.push(arg_v);
    }

    // Best final state, first-wins on ties (smallest beat, then tempo index).
    let (mut best_s, mut best_v, mut best) = (0usize, 0usize, f64::NEG_INFINITY);
    for (s, row) in score.iter().enumerate() {
        for (v, &val) in row.iter().enumerate() {
            if val > best {
                best = val;
                best_s = s;
                best_v = v;
            }
        }
    }

    let mut s_path = vec![0usize; n];
    let mut v_path = vec![0usize; n];
    s_path[n - 1] = best_s;
    v_path[n - 1] = best_v;
    for step in (1..n).rev() {
        let s_next = s_path[step];
        let v_next = v_path[step];
        let v_prev = bp_v[step - 1][s_next][v_next] as usize;
        let s_prev = bp_s[step - 1][s_next][v_prev] as usize;
        s_path[step - 1] = s_prev;
        v_path[step - 1] = v_prev;
    }
    ViterbiResult {
        s_path: s_path.into_iter().map(|s| s + 1).collect(),
        v_path,
        log_posterior: best,
    }
}

/// Decodes onset score times and tempi for a performance. Notes within
/// `chord_eps` chain into performed clusters that share one decoded onset.
/// Every model in `models` is decoded; the transcription with the maximum
/// log posterior is returned (ties keep the earliest model).
pub fn decode_onsets(
    perf: &[PerformanceNote],
    models: &[MetricalHmmParams],
    chord_eps: f64,
) -> Result<OnsetTranscription> {
    if perf.is_empty() {
        return Err(Error::InvalidInput("cannot transcribe an empty performance".into()));
    }
    if models.is_empty() {
        return Err(Error::InvalidInput("no metre models supplied".into()));
    }
    if !perf.windows(2).all(|w| w[0].onset_sec <= w[1].onset_sec) {
        return Err(Error::InvalidInput("performance notes must be sorted by onset".into()));
    }
    if !(chord_eps >= 0.0) {
        return Err(Error::InvalidInput("chord_eps must be non-negative".into()));
    }
    for m in models {
        m.validate()?;
    }

    let clusters = merge_performed_clusters(perf, chord_eps);
    // Cluster onset = first (earliest) member onset.
    let t: Vec<f64> = clusters.iter().map(|c| perf[c[0]].onset_sec).collect();

    let mut best: Option<(usize, ViterbiResult)> = None;
    for (mi, model) in models.iter().enumerate() {
        let r = viterbi(&t, model);
        let better = match &best {
            None => true,
            Some((_, b)) => r.log_posterior > b.log_posterior,
        };
        if better {
            best = Some((mi, r));
        }
    }
    let (mi, result) = best.expect("at least one model");
    let model = &models[mi];
    let cluster_tau = score_times_from_beats(&result.s_path, &model.metre);

    let mut tau = vec![ScoreTime::ZERO; perf.len()];
    let mut tempo = vec![0.0_f64; perf.len()];
    for (ci, members) in clusters.iter().enumerate() {
        for &i in members {
            tau[i] = cluster_tau[ci];
            tempo[i] = model.tempo_grid[result.v_path[ci]];
        }
    }
    Ok(OnsetTranscription { tau, tempo, metre: model.metre.clone(), log_posterior: result.log_posterior })
}
