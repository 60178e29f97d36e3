//! MAP note-value decoding.
//!
//! Given onset score times and tempi for a performance, each onset cluster
//! is decoded independently: every note chooses among its first few IONVs
//! (the candidate list shrinks as clusters grow), and the chosen tuple
//! minimizes an energy combining the context-tree prior, chordal
//! interdependence between close-pitched notes of the cluster, and GIG
//! likelihoods of the two normalized durations. Notes of the final cluster
//! have no IONVs at all and fall back to a fixed grid of common note values.

use crate::context_tree::ContextTree;
use crate::durations::{DurationModel, MixtureDensity};
use crate::error::{Error, Result};
use crate::gig::GigDensity;
use crate::interdep::InterdependenceModel;
use crate::rational::ScoreTime;
use crate::score::{
    build_onset_clusters, context_features, ionv, ClusterMap, ContextVector, NoteValueLabel,
    PerformanceNote, ScoreNote, LABEL_COUNT,
};

const LOG_FLOOR: f64 = -700.0;

/// Exhaustive-search budget per cluster; larger product spaces are decoded
/// greedily in pitch order.
pub const MAX_EXHAUSTIVE_STATES: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrfWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta31: f64,
    pub beta32: f64,
}

impl MrfWeights {
    /// Bundled optimum from training on a large corpus; also the contents
    /// of the shipped `weights.json`.
    pub fn bundled() -> MrfWeights {
        MrfWeights { beta1: 0.965, beta2: 0.03, beta31: 0.21, beta32: 0.003 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta31", self.beta31),
            ("beta32", self.beta32),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Model(format!("{name} must be non-negative and finite, got {w}")));
            }
        }
        Ok(())
    }
}

/// Everything the decoder needs: models plus weights and the pitch
/// neighbourhood for pair terms.
#[derive(Clone, Debug)]
pub struct MrfConfig {
    pub tree: ContextTree,
    pub interdep: InterdependenceModel,
    pub durmodel: DurationModel,
    pub weights: MrfWeights,
    pub delta_nbh: u8,
}

impl MrfConfig {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.interdep.validate()?;
        self.durmodel.validate()?;
        self.weights.validate()
    }
}

/// One candidate note value for a note: the label and its realized IONV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub label: NoteValueLabel,
    pub value: ScoreTime,
}

/// Candidate lists per note, aligned with note indices.
#[derive(Clone, Debug)]
pub struct CandidateSpace {
    pub per_note: Vec<Vec<Candidate>>,
}

/// How many IONVs a note in a cluster of size `j` may consider.
pub fn candidate_cutoff(j: usize) -> usize {
    if j <= 6 {
        10
    } else if j <= 10 {
        14 - j
    } else {
        2
    }
}

/// Builds candidate lists from an onset-time skeleton: per note, the first
/// IONVs in order, truncated by the cluster-size cutoff.
pub fn build_candidate_space(notes: &[ScoreNote], clusters: &ClusterMap) -> CandidateSpace {
    let mut per_note = Vec::with_capacity(notes.len());
    for n in 0..notes.len() {
        let j = clusters.clusters[clusters.cluster_of[n]].members.len();
        let limit = candidate_cutoff(j);
        let mut cands = Vec::new();
        for k in 1..=10usize {
            if cands.len() == limit {
                break;
            }
            match ionv(clusters, n, k) {
                Some(value) => cands.push(Candidate { label: NoteValueLabel::Ionv(k as u8), value }),
                None => break,
            }
        }
        per_note.push(cands);
    }
    CandidateSpace { per_note }
}

/// Per-note data the cluster decoder consumes.
#[derive(Clone, Debug)]
pub struct ClusterNote {
    pub pitch: u8,
    /// Key-holding duration in seconds.
    pub d: f64,
    /// Damper-lifting duration in seconds.
    pub dbar: f64,
    /// Local tempo in seconds per whole note.
    pub v: f64,
    pub context: ContextVector,
}

/// Caches the model normalizers and log tables for repeated energy
/// evaluations.
pub struct EnergyEvaluator<'a> {
    cfg: &'a MrfConfig,
    g: MixtureDensity,
    gbar: GigDensity,
    log_joint: [[f64; LABEL_COUNT]; LABEL_COUNT],
}

fn floored(ln: f64) -> f64 {
    if ln.is_nan() {
        LOG_FLOOR
    } else {
        ln.max(LOG_FLOOR)
    }
}

impl<'a> EnergyEvaluator<'a> {
    pub fn new(cfg: &'a MrfConfig) -> EnergyEvaluator<'a> {
        let mut log_joint = [[0.0; LABEL_COUNT]; LABEL_COUNT];
        for a in 0..LABEL_COUNT {
            for b in 0..LABEL_COUNT {
                log_joint[a][b] = floored(cfg.interdep.joint[a][b].ln());
            }
        }
        EnergyEvaluator {
            cfg,
            g: cfg.durmodel.g.evaluator(),
            gbar: GigDensity::new(cfg.durmodel.gbar),
            log_joint,
        }
    }

    pub fn weights(&self) -> &MrfWeights {
        &self.cfg.weights
    }

    pub fn delta_nbh(&self) -> u8 {
        self.cfg.delta_nbh
    }

    /// Unary energy of assigning `label` with realized note value `r`:
    /// weighted negative logs of the tree prior and the two duration
    /// likelihoods, every log floored at -700.
    pub fn note_energy(
        &self,
        context: &ContextVector,
        label: NoteValueLabel,
        r: ScoreTime,
        d: f64,
        dbar: f64,
        v: f64,
    ) -> f64 {
        let w = &self.cfg.weights;
        let (u1, u31, u32) = self.unary_parts(context, label, r, d, dbar, v);
        let mut energy = w.beta1 * u1;
        energy += w.beta31 * u31;
        energy += w.beta32 * u32;
        energy
    }

    /// The three unweighted unary components (tree prior, key-holding
    /// likelihood, damper-lifting likelihood) as floored negative logs, so
    /// weight searches can rescale them without re-evaluating the models.
    pub(crate) fn unary_parts(
        &self,
        context: &ContextVector,
        label: NoteValueLabel,
        r: ScoreTime,
        d: f64,
        dbar: f64,
        v: f64,
    ) -> (f64, f64, f64) {
        let prior = self.cfg.tree.lookup(context)[label.index()];
        let rv = r.to_f64() * v;
        (
            -floored(prior.ln()),
            -floored(self.g.log_pdf(d / rv)),
            -floored(self.gbar.log_pdf(dbar / rv)),
        )
    }

    /// Pair energy beta2 * (-ln joint) for two label indices.
    pub fn pair_energy(&self, ka: usize, kb: usize) -> f64 {
        self.cfg.weights.beta2 * -self.log_joint[ka][kb]
    }

    /// All pair energies as a matrix, for the cluster solver.
    pub(crate) fn pair_cost_matrix(&self) -> [[f64; LABEL_COUNT]; LABEL_COUNT] {
        let mut m = [[0.0; LABEL_COUNT]; LABEL_COUNT];
        for (ka, row) in m.iter_mut().enumerate() {
            for (kb, cell) in row.iter_mut().enumerate() {
                *cell = self.pair_energy(ka, kb);
            }
        }
        m
    }
}

/// One-off energy evaluation; prefer [`EnergyEvaluator`] in loops, which
/// computes the model normalizers once.
pub fn note_energy(
    cfg: &MrfConfig,
    context: &ContextVector,
    label: NoteValueLabel,
    r: ScoreTime,
    d: f64,
    dbar: f64,
    v: f64,
) -> f64 {
    EnergyEvaluator::new(cfg).note_energy(context, label, r, d, dbar, v)
}

/// Everything about a cluster's argmin problem that does not depend on the
/// energy weights: candidate label indices, interacting pairs, traversal
/// orders. Weight searches build this once per cluster and re-solve with
/// fresh unary energies per grid point.
pub(crate) struct ClusterShape {
    n_notes: usize,
    /// Notes with nonempty candidate lists, ascending.
    active: Vec<usize>,
    /// Label index per (note, candidate).
    labels: Vec<Vec<usize>>,
    /// Interacting pairs (note coordinates), plus the same pairs in
    /// active-position coordinates for the exhaustive hot loop.
    pairs: Vec<(usize, usize)>,
    pos_pairs: Vec<(usize, usize, usize, usize)>,
    /// Greedy scan order: (pitch, index).
    order: Vec<usize>,
    /// Product state count, saturating.
    states: u64,
}

pub(crate) fn cluster_shape(
    pitches: &[u8],
    candidates: &[Vec<Candidate>],
    delta_nbh: u8,
) -> ClusterShape {
    assert_eq!(pitches.len(), candidates.len(), "one candidate list per note");
    let labels: Vec<Vec<usize>> = candidates
        .iter()
        .map(|cands| cands.iter().map(|c| c.label.index()).collect())
        .collect();
    let active: Vec<usize> = (0..pitches.len()).filter(|&n| !candidates[n].is_empty()).collect();
    let mut pairs = Vec::new();
    for (ai, &i) in active.iter().enumerate() {
        for &j in &active[ai + 1..] {
            if pitches[i].abs_diff(pitches[j]) <= delta_nbh {
                pairs.push((i, j));
            }
        }
    }
    let pos_of = |n: usize| active.iter().position(|&m| m == n).unwrap();
    let pos_pairs: Vec<(usize, usize, usize, usize)> =
        pairs.iter().map(|&(i, j)| (pos_of(i), pos_of(j), i, j)).collect();
    let mut order = active.clone();
    order.sort_by_key(|&n| (pitches[n], n));
    let mut states: u64 = 1;
    for &n in &active {
        states = states.saturating_mul(candidates[n].len() as u64);
    }
    ClusterShape { n_notes: pitches.len(), active, labels, pairs, pos_pairs, order, states }
}

/// Argmin over the cluster's label tuples given unary energies per
/// (note, candidate) and an 11×11 pair cost. Exhaustive up to
/// [`MAX_EXHAUSTIVE_STATES`] product states (ties to the lexicographically
/// smallest tuple), greedy in `order` beyond.
pub(crate) fn solve_cluster(
    shape: &ClusterShape,
    unary: &[Vec<f64>],
    pair_cost: &[[f64; LABEL_COUNT]; LABEL_COUNT],
) -> Vec<Option<usize>> {
    if shape.states > MAX_EXHAUSTIVE_STATES {
        return solve_greedy(shape, unary, pair_cost);
    }
    let mut assignment: Vec<Option<usize>> = vec![None; shape.n_notes];
    if shape.active.is_empty() {
        return assignment;
    }
    let mut idx = vec![0usize; shape.active.len()];
    let mut best_idx = idx.clone();
    let mut best_energy = f64::INFINITY;
    loop {
        let mut energy = 0.0;
        for (pos, &n) in shape.active.iter().enumerate() {
            energy += unary[n][idx[pos]];
        }
        for &(pi, pj, i, j) in &shape.pos_pairs {
            let ki = shape.labels[i][idx[pi]];
            let kj = shape.labels[j][idx[pj]];
            energy += pair_cost[ki][kj];
        }
        if energy < best_energy {
            best_energy = energy;
            best_idx.copy_from_slice(&idx);
        }
        // Advance the odometer (rightmost fastest: lexicographic order).
        let mut pos = shape.active.len();
        loop {
            if pos == 0 {
                for (p, &n) in shape.active.iter().enumerate() {
                    assignment[n] = Some(best_idx[p]);
                }
                return assignment;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < shape.labels[shape.active[pos]].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn solve_greedy(
    shape: &ClusterShape,
    unary: &[Vec<f64>],
    pair_cost: &[[f64; LABEL_COUNT]; LABEL_COUNT],
) -> Vec<Option<usize>> {
    let mut assignment: Vec<Option<usize>> = vec![None; shape.n_notes];
    for &n in &shape.order {
        let mut best = 0usize;
        let mut best_energy = f64::INFINITY;
        for (ci, &label) in shape.labels[n].iter().enumerate() {
            let mut energy = unary[n][ci];
            for &(i, j) in &shape.pairs {
                let other = if i == n { j } else if j == n { i } else { continue };
                if let Some(oc) = assignment[other] {
                    energy += pair_cost[label][shape.labels[other][oc]];
                }
            }
            if energy < best_energy {
                best_energy = energy;
                best = ci;
            }
        }
        assignment[n] = Some(best);
    }
    assignment
}

/// MAP assignment for one onset cluster: candidate index per note, `None`
/// where the candidate list is empty. Exhaustive over the product space up
/// to [`MAX_EXHAUSTIVE_STATES`], greedy in (pitch, index) order beyond.
/// Energy ties resolve to the lexicographically smallest label tuple.
pub fn decode_cluster(
    ev: &EnergyEvaluator,
    notes: &[ClusterNote],
    candidates: &[Vec<Candidate>],
) -> Vec<Option<usize>> {
    assert_eq!(notes.len(), candidates.len(), "one candidate list per note");
    // Unary energies per (note, candidate).
    let unary: Vec<Vec<f64>> = notes
        .iter()
        .zip(candidates)
        .map(|(note, cands)| {
            cands
                .iter()
                .map(|c| ev.note_energy(&note.context, c.label, c.value, note.d, note.dbar, note.v))
                .collect()
        })
        .collect();
    let pitches: Vec<u8> = notes.iter().map(|n| n.pitch).collect();
    let shape = cluster_shape(&pitches, candidates, ev.delta_nbh());
    solve_cluster(&shape, &unary, &ev.pair_cost_matrix())
}

/// Note values eligible as the fallback for final-cluster notes, ascending:
/// duple and triple subdivisions from a 48th triplet up to a whole note.
pub fn fallback_values() -> [ScoreTime; 15] {
    [
        ScoreTime::new(1, 48),
        ScoreTime::new(1, 32),
        ScoreTime::new(1, 24),
        ScoreTime::new(1, 16),
        ScoreTime::new(1, 12),
        ScoreTime::new(3, 32),
        ScoreTime::new(1, 8),
        ScoreTime::new(1, 6),
        ScoreTime::new(3, 16),
        ScoreTime::new(1, 4),
        ScoreTime::new(1, 3),
        ScoreTime::new(3, 8),
        ScoreTime::new(1, 2),
        ScoreTime::new(3, 4),
        ScoreTime::new(1, 1),
    ]
}

/// Grid value nearest to `x` on a log scale; ties pick the smaller value.
pub fn nearest_fallback_value(x: f64) -> ScoreTime {
    assert!(x > 0.0 && x.is_finite(), "fallback needs a positive duration ratio, got {x}");
    let lx = x.ln();
    let mut best = fallback_values()[0];
    let mut best_dist = f64::INFINITY;
    for value in fallback_values() {
        let dist = (value.to_f64().ln() - lx).abs();
        if dist < best_dist {
            best_dist = dist;
            best = value;
        }
    }
    best
}

/// Per-note decoding outcome, for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct NoteReport {
    /// Chosen label; `None` for fallback notes (no IONVs available).
    pub label: Option<NoteValueLabel>,
    pub candidate_count: usize,
    /// Unary energy of the chosen label; `None` for fallback notes.
    pub energy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DecodedPiece {
    pub notes: Vec<ScoreNote>,
    pub report: Vec<NoteReport>,
}

/// Decodes note values for a whole performance given per-note onset score
/// times and tempi. Clusters are decoded independently in onset order;
/// final-cluster notes take the fallback grid value nearest to d/v.
pub fn decode_piece(
    perf: &[PerformanceNote],
    tau: &[ScoreTime],
    tempo: &[f64],
    cfg: &MrfConfig,
) -> Result<DecodedPiece> {
    if perf.is_empty() {
        return Err(Error::InvalidInput("cannot decode an empty performance".into()));
    }
    if perf.len() != tau.len() || perf.len() != tempo.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} notes, {} onset times, {} tempi",
            perf.len(),
            tau.len(),
            tempo.len()
        )));
    }
    for (i, &v) in tempo.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("tempo {v} at note {i} must be positive")));
        }
    }
    for p in perf {
        p.validate().map_err(Error::InvalidInput)?;
    }
    cfg.validate()?;

    // Skeleton score: onsets and pitches only; note values are what we are
    // about to decide (placeholder 1 keeps the skeleton valid).
    let skeleton: Vec<ScoreNote> = perf
        .iter()
        .zip(tau)
        .map(|(p, &t)| ScoreNote {
            id: p.id.clone(),
            onset: t,
            note_value: ScoreTime::ONE,
            pitch: p.pitch,
            voice: None,
        })
        .collect();
    let clusters = build_onset_clusters(&skeleton);
    let space = build_candidate_space(&skeleton, &clusters);
    let ev = EnergyEvaluator::new(cfg);

    let mut values: Vec<Option<ScoreTime>> = vec![None; perf.len()];
    let mut report: Vec<Option<NoteReport>> = vec![None; perf.len()];
    for cluster in &clusters.clusters {
        let members = &cluster.members;
        let notes: Vec<ClusterNote> = members
            .iter()
            .map(|&n| ClusterNote {
                pitch: perf[n].pitch,
                d: perf[n].key_holding(),
                dbar: perf[n].damper_lifting(),
                v: tempo[n],
                context: context_features(&skeleton, &clusters, n),
            })
            .collect();
        let cands: Vec<Vec<Candidate>> =
            members.iter().map(|&n| space.per_note[n].clone()).collect();
        let chosen = decode_cluster(&ev, &notes, &cands);
        for (pos, &n) in members.iter().enumerate() {
            match chosen[pos] {
                Some(ci) => {
                    let cand = cands[pos][ci];
                    values[n] = Some(cand.value);
                    report[n] = Some(NoteReport {
                        label: Some(cand.label),
                        candidate_count: cands[pos].len(),
                        energy: Some(ev.note_energy(
                            &notes[pos].context,
                            cand.label,
                            cand.value,
                            notes[pos].d,
                            notes[pos].dbar,
                            notes[pos].v,
                        )),
                    });
                }
                None => {
                    let ratio = perf[n].key_holding() / tempo[n];
                    values[n] = Some(nearest_fallback_value(ratio));
                    report[n] =
                        Some(NoteReport { label: None, candidate_count: 0, energy: None });
                }
            }
        }
    }

    let notes: Vec<ScoreNote> = skeleton
        .into_iter()
        .enumerate()
        .map(|(n, mut note)| {
            note.note_value = values[n].expect("every note decoded");
            note
        })
        .collect();
    let report: Vec<NoteReport> = report.into_iter().map(|r| r.expect("every note reported")).collect();
    Ok(DecodedPiece { notes, report })
}
