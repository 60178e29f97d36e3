//! Grid searches for the energy weights.
//!
//! The two score-prior weights (tree and interdependence) are fit by maximum
//! likelihood on a held-out score corpus jointly with the chord neighbourhood
//! radius: the objective is the sum over onset clusters of the log of the
//! normalized MRF prior evaluated at the true labels. The two duration
//! weights are fit afterwards against the actual task loss, the average
//! per-piece note-value error rate of full decoding on a dev set with ground
//! truth.
//!
//! Both searches are deterministic coarse-to-fine sweeps; equal objectives
//! resolve to the smaller weight tuple.

use serde::{Deserialize, Serialize};

use crate::context_tree::ContextTree;
use crate::error::{Error, Result};
use crate::interdep::InterdependenceModel;
use crate::mrf::{
    build_candidate_space, cluster_shape, nearest_fallback_value, solve_cluster, ClusterShape,
    EnergyEvaluator, MrfConfig, MrfWeights,
};
use crate::rational::ScoreTime;
use crate::score::{
    build_onset_clusters, classify_note_value, context_features, PerformanceNote, ScoreNote,
    LABEL_COUNT,
};

/// Weights of the two score-model energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreModelWeights {
    pub beta1: f64,
    pub beta2: f64,
}

impl ScoreModelWeights {
    /// Reference optimum shipped as the default when no optimization runs.
    pub fn bundled() -> ScoreModelWeights {
        ScoreModelWeights { beta1: 0.965, beta2: 0.03 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be nonnegative and finite, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Weights of the two duration energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfWeights {
    pub beta31: f64,
    pub beta32: f64,
}

impl PerfWeights {
    /// Reference optimum shipped as the default when no optimization runs.
    pub fn bundled() -> PerfWeights {
        PerfWeights { beta31: 0.21, beta32: 0.003 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("beta31", self.beta31), ("beta32", self.beta32)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be nonnegative and finite, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Chord neighbourhood radius shipped with the bundled weights.
pub const BUNDLED_DELTA_NBH: u8 = 12;

/// Assembles the full decode-time weight vector from the two fitted halves.
pub fn mrf_weights(score: &ScoreModelWeights, perf: &PerfWeights) -> MrfWeights {
    MrfWeights {
        beta1: score.beta1,
        beta2: score.beta2,
        beta31: perf.beta31,
        beta32: perf.beta32,
    }
}

/// Clusters bigger than this are skipped by the score-weight objective: its
/// normalizer enumerates all 11^J label tuples.
const SCORE_CLUSTER_CAP: usize = 4;

/// One-note clusters: the normalizer depends on beta1 only.
struct SingleStats {
    a: [f64; LABEL_COUNT],
    truth: usize,
}

/// Multi-note clusters: per label tuple (odometer order), the summed unary
/// negative log priors; pair sums are rebuilt per delta.
struct MultiStats {
    /// Per member, -ln prior per label.
    a: Vec<[f64; LABEL_COUNT]>,
    truth: Vec<usize>,
    /// Pitch distance per member pair (i < j).
    pair_dist: Vec<(usize, usize, u8)>,
    /// Sum of a over each tuple, 11^J entries.
    sum_a: Vec<f64>,
}

fn for_each_tuple(j: usize, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; j];
    loop {
        f(&digits);
        let mut pos = j;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < LABEL_COUNT {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn singles_objective(singles: &[SingleStats], beta1: f64) -> f64 {
    let mut total = 0.0;
    for s in singles {
        let m = s.a.iter().fold(f64::INFINITY, |acc, &a| acc.min(a));
        let z: f64 = s.a.iter().map(|&a| (-beta1 * (a - m)).exp()).sum();
        total += -beta1 * s.a[s.truth] - (-beta1 * m + z.ln());
    }
    total
}

/// Pair sums per tuple and at the truth for one cluster under one delta.
struct MultiDelta {
    sum_b: Vec<f64>,
    b_truth: f64,
}

fn multi_delta(multi: &MultiStats, neg_log_joint: &[[f64; LABEL_COUNT]; LABEL_COUNT], delta: u8) -> MultiDelta {
    let pairs: Vec<(usize, usize)> = multi
        .pair_dist
        .iter()
        .filter(|&&(_, _, dist)| dist <= delta)
        .map(|&(i, j, _)| (i, j))
        .collect();
    let mut sum_b = Vec::with_capacity(multi.sum_a.len());
    for_each_tuple(multi.truth.len(), |digits| {
        let mut b = 0.0;
        for &(i, j) in &pairs {
            b += neg_log_joint[digits[i]][digits[j]];
        }
        sum_b.push(b);
    });
    let mut b_truth = 0.0;
    for &(i, j) in &pairs {
        b_truth += neg_log_joint[multi.truth[i]][multi.truth[j]];
    }
    MultiDelta { sum_b, b_truth }
}

fn multis_objective(
    multis: &[MultiStats],
    deltas: &[MultiDelta],
    beta1: f64,
    beta2: f64,
) -> f64 {
    let mut total = 0.0;
    for (multi, md) in multis.iter().zip(deltas) {
        let mut m = f64::NEG_INFINITY;
        for (sa, sb) in multi.sum_a.iter().zip(&md.sum_b) {
            m = m.max(-beta1 * sa - beta2 * sb);
        }
        let mut z = 0.0;
        for (sa, sb) in multi.sum_a.iter().zip(&md.sum_b) {
            z += (-beta1 * sa - beta2 * sb - m).exp();
        }
        let a_truth: f64 = multi.truth.iter().enumerate().map(|(pos, &t)| multi.a[pos][t]).sum();
        total += -beta1 * a_truth - beta2 * md.b_truth - (m + z.ln());
    }
    total
}

/// Fits (beta1, beta2, delta_nbh) by held-out maximum likelihood.
///
/// `joints` must hold one interdependence model per neighbourhood radius,
/// indexed by radius 0..=15. Search: beta1 over 0.5..=1.5 (step 0.05, then
/// 0.005 around the coarse optimum), beta2 over 0..=0.2 (step 0.02, then
/// 0.002), delta over 0..=15. Ties prefer smaller (beta1, beta2, delta).
/// Clusters with more than four notes are skipped (the exact normalizer is
/// exponential in cluster size); final clusters have no true labels and are
/// skipped as in training.
pub fn optimize_score_weights(
    corpus: &[Vec<ScoreNote>],
    tree: &ContextTree,
    joints: &[InterdependenceModel],
) -> Result<(ScoreModelWeights, u8)> {
    tree.validate()?;
    if joints.len() != 16 {
        return Err(Error::InvalidInput(format!(
            "need one interdependence model per radius 0..=15, got {}",
            joints.len()
        )));
    }
    for (d, joint) in joints.iter().enumerate() {
        joint.validate()?;
        if joint.delta_nbh as usize != d {
            return Err(Error::InvalidInput(format!(
                "interdependence model at index {d} has radius {}",
                joint.delta_nbh
            )));
        }
    }

    let mut singles = Vec::new();
    let mut multis = Vec::new();
    for piece in corpus {
        let clusters = build_onset_clusters(piece);
        if clusters.len() < 2 {
            continue;
        }
        for cluster in &clusters.clusters[..clusters.len() - 1] {
            let j = cluster.members.len();
            if j > SCORE_CLUSTER_CAP {
                continue;
            }
            let mut a = Vec::with_capacity(j);
            let mut truth = Vec::with_capacity(j);
            for &n in &cluster.members {
                let prior = tree.lookup(&context_features(piece, &clusters, n));
                let mut row = [0.0; LABEL_COUNT];
                for (k, cell) in row.iter_mut().enumerate() {
                    *cell = -prior[k].ln();
                }
                a.push(row);
                truth.push(classify_note_value(piece, &clusters, n).index());
            }
            if j == 1 {
                singles.push(SingleStats { a: a[0], truth: truth[0] });
                continue;
            }
            let mut pair_dist = Vec::new();
            for x in 0..j {
                for y in x + 1..j {
                    let px = piece[cluster.members[x]].pitch;
                    let py = piece[cluster.members[y]].pitch;
                    pair_dist.push((x, y, px.abs_diff(py)));
                }
            }
            let mut sum_a = Vec::with_capacity(LABEL_COUNT.pow(j as u32));
            for_each_tuple(j, |digits| {
                sum_a.push(digits.iter().enumerate().map(|(pos, &k)| a[pos][k]).sum());
            });
            multis.push(MultiStats { a, truth, pair_dist, sum_a });
        }
    }
    if singles.is_empty() && multis.is_empty() {
        return Err(Error::InvalidInput(
            "no usable clusters: every piece is empty, single-cluster, or oversized".into(),
        ));
    }

    let coarse_b1: Vec<f64> = (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect();
    let coarse_b2: Vec<f64> = (0..=10).map(|i| 0.02 * i as f64).collect();

    // (objective, beta1, beta2, delta); ties keep the smaller key.
    let mut best: Option<(f64, (f64, f64, u8))> = None;
    let consider = |obj: f64, key: (f64, f64, u8), best: &mut Option<(f64, (f64, f64, u8))>| {
        let better = match best {
            None => true,
            Some((bo, bk)) => obj > *bo || (obj == *bo && key < *bk),
        };
        if better {
            *best = Some((obj, key));
        }
    };

    for delta in 0..=15u8 {
        let mut neg_log_joint = [[0.0; LABEL_COUNT]; LABEL_COUNT];
        for (ka, row) in neg_log_joint.iter_mut().enumerate() {
            for (kb, cell) in row.iter_mut().enumerate() {
                *cell = -joints[delta as usize].joint[ka][kb].ln();
            }
        }
        let deltas: Vec<MultiDelta> =
            multis.iter().map(|m| multi_delta(m, &neg_log_joint, delta)).collect();
        for &b1 in &coarse_b1 {
            let s = singles_objective(&singles, b1);
            for &b2 in &coarse_b2 {
                let obj = s + multis_objective(&multis, &deltas, b1, b2);
                consider(obj, (b1, b2, delta), &mut best);
            }
        }
    }
    let (_, (c1, c2, delta)) = best.expect("nonempty grid");

    // Refine the continuous weights around the coarse optimum.
    let mut neg_log_joint = [[0.0; LABEL_COUNT]; LABEL_COUNT];
    for (ka, row) in neg_log_joint.iter_mut().enumerate() {
        for (kb, cell) in row.iter_mut().enumerate() {
            *cell = -joints[delta as usize].joint[ka][kb].ln();
        }
    }
    let deltas: Vec<MultiDelta> =
        multis.iter().map(|m| multi_delta(m, &neg_log_joint, delta)).collect();
    let fine_b1: Vec<f64> = (-10..=10)
        .map(|i| c1 + 0.005 * i as f64)
        .filter(|&b| (0.5..=1.5 + 1e-12).contains(&b))
        .collect();
    let fine_b2: Vec<f64> = (-10..=10)
        .map(|i| c2 + 0.002 * i as f64)
        .filter(|&b| (-1e-12..=0.2 + 1e-12).contains(&b))
        .map(|b| b.max(0.0))
        .collect();
    let mut refined = best;
    for &b1 in &fine_b1 {
        let s = singles_objective(&singles, b1);
        for &b2 in &fine_b2 {
            let obj = s + multis_objective(&multis, &deltas, b1, b2);
            consider(obj, (b1, b2, delta), &mut refined);
        }
    }
    let (_, (beta1, beta2, delta)) = refined.expect("refined grid nonempty");
    Ok((ScoreModelWeights { beta1, beta2 }, delta))
}

/// One dev-set piece for duration-weight fitting: the performance, its onset
/// score times and tempi (index-aligned with the notes), and the true note
/// values.
#[derive(Clone, Debug)]
pub struct DevPiece {
    pub performance: Vec<PerformanceNote>,
    pub tau: Vec<ScoreTime>,
    pub tempo: Vec<f64>,
    pub truth: Vec<ScoreTime>,
}

struct PreCluster {
    shape: ClusterShape,
    /// Per member: unweighted unary components per candidate.
    u1: Vec<Vec<f64>>,
    u31: Vec<Vec<f64>>,
    u32: Vec<Vec<f64>>,
    /// Per member: candidate note values.
    values: Vec<Vec<ScoreTime>>,
    /// Fallback value where the candidate list is empty.
    fallback: Vec<ScoreTime>,
    truth: Vec<ScoreTime>,
}

struct PrePiece {
    clusters: Vec<PreCluster>,
    n_notes: usize,
}

/// Fits (beta31, beta32) by minimizing the mean per-piece error rate of full
/// decoding on the dev set. The score-model half of `cfg` (tree, joint,
/// beta1, beta2, radius) stays fixed; `cfg.weights.beta31/beta32` are
/// ignored. Grid: beta31 over {0} ∪ 0.01..=1.0 step 0.01, beta32 over
/// {0} ∪ 0.001..=0.1 step 0.001; ties prefer smaller (beta31, beta32).
pub fn optimize_perf_weights(dev: &[DevPiece], cfg: &MrfConfig) -> Result<PerfWeights> {
    cfg.validate()?;
    if dev.is_empty() {
        return Err(Error::InvalidInput("dev set is empty".into()));
    }
    let ev = EnergyEvaluator::new(cfg);
    let pair_cost = ev.pair_cost_matrix();

    let mut pieces = Vec::with_capacity(dev.len());
    for piece in dev {
        let n = piece.performance.len();
        if n == 0 {
            return Err(Error::InvalidInput("dev piece has no notes".into()));
        }
        if piece.tau.len() != n || piece.tempo.len() != n || piece.truth.len() != n {
            return Err(Error::InvalidInput(format!(
                "dev piece arrays disagree: {} notes, {} onsets, {} tempi, {} truths",
                n,
                piece.tau.len(),
                piece.tempo.len(),
                piece.truth.len()
            )));
        }
        for p in &piece.performance {
            p.validate().map_err(Error::InvalidInput)?;
        }
        for (i, &v) in piece.tempo.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("tempo {v} at note {i} must be positive")));
            }
        }

        let skeleton: Vec<ScoreNote> = piece
            .performance
            .iter()
            .zip(&piece.tau)
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

        let mut pre = Vec::with_capacity(clusters.len());
        for cluster in &clusters.clusters {
            let members = &cluster.members;
            let pitches: Vec<u8> = members.iter().map(|&n| skeleton[n].pitch).collect();
            let cands: Vec<_> = members.iter().map(|&n| space.per_note[n].clone()).collect();
            let shape = cluster_shape(&pitches, &cands, cfg.delta_nbh);
            let mut u1 = Vec::with_capacity(members.len());
            let mut u31 = Vec::with_capacity(members.len());
            let mut u32 = Vec::with_capacity(members.len());
            let mut values = Vec::with_capacity(members.len());
            let mut fallback = Vec::with_capacity(members.len());
            let mut truth = Vec::with_capacity(members.len());
            for (pos, &n) in members.iter().enumerate() {
                let context = context_features(&skeleton, &clusters, n);
                let perf = &piece.performance[n];
                let (d, dbar, v) = (perf.key_holding(), perf.damper_lifting(), piece.tempo[n]);
                let mut r1 = Vec::with_capacity(cands[pos].len());
                let mut r31 = Vec::with_capacity(cands[pos].len());
                let mut r32 = Vec::with_capacity(cands[pos].len());
                for c in &cands[pos] {
                    let (a, b, g) = ev.unary_parts(&context, c.label, c.value, d, dbar, v);
                    r1.push(a);
                    r31.push(b);
                    r32.push(g);
                }
                u1.push(r1);
                u31.push(r31);
                u32.push(r32);
                values.push(cands[pos].iter().map(|c| c.value).collect());
                fallback.push(nearest_fallback_value(d / v));
                truth.push(piece.truth[n]);
            }
            pre.push(PreCluster { shape, u1, u31, u32, values, fallback, truth });
        }
        pieces.push(PrePiece { clusters: pre, n_notes: n });
    }

    let beta1 = cfg.weights.beta1;
    let grid31: Vec<f64> =
        std::iter::once(0.0).chain((1..=100).map(|i| 0.01 * i as f64)).collect();
    let grid32: Vec<f64> =
        std::iter::once(0.0).chain((1..=100).map(|i| 0.001 * i as f64)).collect();

    // Scratch unary buffers, one per cluster in traversal order.
    let mut unary_scratch: Vec<Vec<Vec<f64>>> = Vec::new();
    for piece in &pieces {
        for cluster in &piece.clusters {
            unary_scratch.push(cluster.u1.iter().map(|r| vec![0.0; r.len()]).collect());
        }
    }

    let mut best: Option<(f64, (f64, f64))> = None;
    for &b31 in &grid31 {
        for &b32 in &grid32 {
            let mut total_rate = 0.0;
            let mut scratch_idx = 0usize;
            for piece in &pieces {
                let mut wrong = 0usize;
                for cluster in &piece.clusters {
                    let unary = &mut unary_scratch[scratch_idx];
                    scratch_idx += 1;
                    for (pos, row) in unary.iter_mut().enumerate() {
                        for (ci, cell) in row.iter_mut().enumerate() {
                            let mut e = beta1 * cluster.u1[pos][ci];
                            e += b31 * cluster.u31[pos][ci];
                            e += b32 * cluster.u32[pos][ci];
                            *cell = e;
                        }
                    }
                    let chosen = solve_cluster(&cluster.shape, unary, &pair_cost);
                    for (pos, choice) in chosen.iter().enumerate() {
                        let value = match choice {
                            Some(ci) => cluster.values[pos][*ci],
                            None => cluster.fallback[pos],
                        };
                        if value != cluster.truth[pos] {
                            wrong += 1;
                        }
                    }
                }
                total_rate += wrong as f64 / piece.n_notes as f64;
            }
            let rate = total_rate / pieces.len() as f64;
            let key = (b31, b32);
            let better = match &best {
                None => true,
                Some((br, bk)) => rate < *br || (rate == *br && key < *bk),
            };
            if better {
                best = Some((rate, key));
            }
        }
    }
    let (_, (beta31, beta32)) = best.expect("nonempty grid");
    Ok(PerfWeights { beta31, beta32 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context_tree::{extract_samples, grow_context_tree};
    use crate::durations::{DurationModel, GigMixture};
    use crate::gig::GigParams;
    use crate::interdep::learn_interdependence;
    use crate::sim::{simulate_performance, DurationSampler, SimParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn st(num: i64, den: i64) -> ScoreTime {
        ScoreTime::new(num, den)
    }

    #[test]
    fn bundled_halves_compose_to_the_bundled_decoder_weights() {
        let w = mrf_weights(&ScoreModelWeights::bundled(), &PerfWeights::bundled());
        assert_eq!(w, MrfWeights::bundled());
        assert_eq!(BUNDLED_DELTA_NBH, 12);
        ScoreModelWeights::bundled().validate().unwrap();
        PerfWeights::bundled().validate().unwrap();
        assert!(ScoreModelWeights { beta1: -0.1, beta2: 0.0 }.validate().is_err());
        assert!(PerfWeights { beta31: 0.0, beta32: f64::NAN }.validate().is_err());
    }

    /// How the two notes of a chord pick their values.
    #[derive(Clone, Copy)]
    enum Pairing {
        Independent,
        Equal,
        Opposite,
    }

    /// Chord-chain corpus: every cluster is a two-note chord (pitch distance
    /// 3) on a quarter grid; each note's value is a quarter (first interval)
    /// or a half (second interval), tied together per `pairing`.
    fn chord_corpus(
        pieces: usize,
        clusters_per_piece: usize,
        pairing: Pairing,
        seed: u64,
    ) -> Vec<Vec<ScoreNote>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..pieces)
            .map(|_| {
                let mut notes = Vec::new();
                for k in 0..clusters_per_piece {
                    let v1 = if rng.gen_bool(0.5) { st(1, 4) } else { st(1, 2) };
                    let v2 = match pairing {
                        Pairing::Equal => v1,
                        Pairing::Opposite => st(3, 4) - v1,
                        Pairing::Independent => {
                            if rng.gen_bool(0.5) {
                                st(1, 4)
                            } else {
                                st(1, 2)
                            }
                        }
                    };
                    for (slot, value, pitch) in [(0, v1, 60u8), (1, v2, 63u8)] {
                        notes.push(ScoreNote {
                            id: format!("n{k}_{slot}"),
                            onset: st(k as i64, 4),
                            note_value: value,
                            pitch,
                            voice: None,
                        });
                    }
                }
                notes
            })
            .collect()
    }

    fn joints_for_all_radii(corpus: &[Vec<ScoreNote>]) -> Vec<InterdependenceModel> {
        (0..=15u8).map(|d| learn_interdependence(corpus, d).0).collect()
    }

    #[test]
    fn mismatched_pair_model_drives_beta2_to_zero() {
        // The pair model is learned from a corpus whose chord mates always
        // share a value, so its mass sits on the diagonal. Heldout chord
        // mates always disagree: every positive pair weight keeps getting
        // contradicted, and the optimum must sit on the boundary.
        let train = chord_corpus(20, 30, Pairing::Independent, 501);
        let heldout = chord_corpus(8, 20, Pairing::Opposite, 502);
        let samples = extract_samples(&train);
        let tree = grow_context_tree(&samples, samples.len()).tree;
        let joints = joints_for_all_radii(&chord_corpus(20, 30, Pairing::Equal, 503));
        let (weights, delta) = optimize_score_weights(&heldout, &tree, &joints).unwrap();
        assert_eq!(weights.beta2, 0.0, "beta2 {} should sit on the boundary", weights.beta2);
        // With beta2 at zero the radius is inert and ties keep the smallest.
        assert_eq!(delta, 0, "delta {delta}");
        assert!((0.5..=1.5).contains(&weights.beta1));
    }

    #[test]
    fn coupled_chords_select_positive_beta2() {
        let train = chord_corpus(20, 30, Pairing::Equal, 601);
        let heldout = chord_corpus(8, 20, Pairing::Equal, 602);
        let samples = extract_samples(&train);
        let tree = grow_context_tree(&samples, samples.len()).tree;
        let joints = joints_for_all_radii(&train);
        let (weights, delta) = optimize_score_weights(&heldout, &tree, &joints).unwrap();
        assert!(weights.beta2 > 0.0, "beta2 {}", weights.beta2);
        // Pairs only interact once the radius reaches the chord interval.
        assert!(delta >= 3, "delta {delta}");
        // Grid membership.
        assert!((0.5..=1.5).contains(&weights.beta1));
        assert!(weights.beta2 <= 0.2);
        let rounded = (weights.beta2 / 0.002).round() * 0.002;
        assert!((weights.beta2 - rounded).abs() < 1e-9);
        // Determinism.
        let again = optimize_score_weights(&heldout, &tree, &joints).unwrap();
        assert_eq!((weights, delta), again);
    }

    /// Quarter chain: prior-only decoding is already perfect, so noise
    /// durations cannot buy anything and ties must land on zero.
    #[test]
    fn noise_durations_get_zero_weight() {
        let quarter_piece = |n: usize| -> Vec<ScoreNote> {
            (0..n)
                .map(|k| ScoreNote {
                    id: format!("n{k}"),
                    onset: st(k as i64, 4),
                    note_value: st(1, 4),
                    pitch: 60 + (k % 5) as u8,
                    voice: None,
                })
                .collect()
        };
        let train: Vec<Vec<ScoreNote>> = (0..10).map(|_| quarter_piece(40)).collect();
        let samples = extract_samples(&train);
        let tree = grow_context_tree(&samples, samples.len()).tree;
        let cfg = MrfConfig {
            tree,
            interdep: InterdependenceModel::uniform(12),
            durmodel: DurationModel::bundled(),
            weights: MrfWeights { beta1: 1.0, beta2: 0.0, beta31: 0.0, beta32: 0.0 },
            delta_nbh: 12,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let dev: Vec<DevPiece> = (0..3)
            .map(|_| {
                let score = quarter_piece(60);
                let performance: Vec<PerformanceNote> = score
                    .iter()
                    .map(|note| {
                        let t = note.onset.to_f64() * 0.5;
                        let d = rng.gen_range(0.05..1.5);
                        PerformanceNote {
                            id: note.id.clone(),
                            onset_sec: t,
                            key_release_sec: t + d,
                            damper_drop_sec: t + d * 1.1,
                            pitch: note.pitch,
                        }
                    })
                    .collect();
                DevPiece {
                    tau: score.iter().map(|n| n.onset).collect(),
                    tempo: vec![0.5; score.len()],
                    truth: score.iter().map(|n| n.note_value).collect(),
                    performance,
                }
            })
            .collect();
        let weights = optimize_perf_weights(&dev, &cfg).unwrap();
        assert_eq!(weights, PerfWeights { beta31: 0.0, beta32: 0.0 });
    }

    #[test]
    fn matched_simulated_durations_select_positive_beta31() {
        // Sixteenth-grid chain whose values span one to four grid steps. The
        // uniform-leaf prior says nothing, key-holding durations are sharply
        // peaked at the written value, and damper durations stay broad: the
        // only way to decode is through the key-holding likelihood.
        let sharp = GigParams::new(200.0, 200.0, 0.0);
        let model = DurationModel {
            g: GigMixture { w1: 1.0, gig1: sharp, w2: 0.0, gig2: sharp },
            gbar: GigParams::new(0.94, 0.51, 0.8),
        };
        let piece = |n: usize| -> Vec<ScoreNote> {
            (0..n)
                .map(|k| ScoreNote {
                    id: format!("n{k}"),
                    onset: st(k as i64, 16),
                    note_value: st((k % 4) as i64 + 1, 16),
                    pitch: 60 + (k % 7) as u8,
                    voice: None,
                })
                .collect()
        };
        let params = SimParams {
            v_ini: 0.5,
            sigma_v_ini: 0.0,
            sigma_v: 0.0,
            sigma_t: 0.0,
            durations: DurationSampler::Gig { model: model.clone() },
            seed: 910,
        };
        let dev: Vec<DevPiece> = (0..2)
            .map(|i| {
                let score = piece(80);
                let (performance, _) = simulate_performance(&score, &params, i).unwrap();
                let by_id: HashMap<&str, &ScoreNote> =
                    score.iter().map(|n| (n.id.as_str(), n)).collect();
                let tau: Vec<ScoreTime> =
                    performance.iter().map(|p| by_id[p.id.as_str()].onset).collect();
                let truth: Vec<ScoreTime> =
                    performance.iter().map(|p| by_id[p.id.as_str()].note_value).collect();
                DevPiece { tempo: vec![0.5; performance.len()], tau, truth, performance }
            })
            .collect();
        let cfg = MrfConfig {
            tree: ContextTree::uniform_leaf(),
            interdep: InterdependenceModel::uniform(12),
            durmodel: model,
            weights: MrfWeights { beta1: 1.0, beta2: 0.0, beta31: 0.0, beta32: 0.0 },
            delta_nbh: 12,
        };
        let weights = optimize_perf_weights(&dev, &cfg).unwrap();
        assert!(weights.beta31 > 0.0, "beta31 {}", weights.beta31);
    }

    #[test]
    fn joint_candidates_are_validated() {
        let corpus = chord_corpus(2, 5, Pairing::Independent, 1);
        let tree = ContextTree::uniform_leaf();
        assert!(optimize_score_weights(&corpus, &tree, &[]).is_err());
        let mut joints = joints_for_all_radii(&corpus);
        joints[3].delta_nbh = 5;
        assert!(optimize_score_weights(&corpus, &tree, &joints).is_err());
    }
}
