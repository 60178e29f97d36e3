//! Note-value accuracy metrics.
//!
//! The error rate is the fraction of notes whose estimated value differs
//! from the reference (exact rational comparison); the scale error
//! exp(mean |ln(est/ref)|) weighs how far off the misses are. Both also come
//! in scale-invariant variants where each side is first normalized by its
//! own first IONV, cancelling any global rescaling of score time.

use serde::Serialize;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rational::ScoreTime;
use crate::score::{build_onset_clusters, ionv, ClusterMap, ScoreNote};

/// Pairwise (tree) summation: deterministic and exact for a power-of-two
/// count of identical terms, which keeps "all doubled" scale errors at
/// exactly 2.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Fraction of positions where the two values differ, compared exactly.
pub fn error_rate(est: &[ScoreTime], reference: &[ScoreTime]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "value lists differ in length: {} vs {}",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate zero notes".into()));
    }
    let wrong = est.iter().zip(reference).filter(|(e, r)| e != r).count();
    Ok(wrong as f64 / est.len() as f64)
}

/// exp(mean |ln(est/ref)|). Every value must be positive; ratios are formed
/// exactly in rational arithmetic before the logarithm.
pub fn scale_error(est: &[ScoreTime], reference: &[ScoreTime]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "value lists differ in length: {} vs {}",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate zero notes".into()));
    }
    let mut logs = Vec::with_capacity(est.len());
    for (e, r) in est.iter().zip(reference) {
        if !e.is_positive() || !r.is_positive() {
            return Err(Error::InvalidInput(format!(
                "scale error needs positive note values, got {e} vs {r}"
            )));
        }
        let ratio = *e * ScoreTime::new(r.denom(), r.numer());
        logs.push(ratio.to_f64().ln().abs());
    }
    Ok((pairwise_sum(&logs) / logs.len() as f64).exp())
}

/// Per-note value divided by the note's own first IONV; `None` for notes in
/// the final cluster, which have no IONV at all.
pub fn normalize_by_first_ionv(
    notes: &[ScoreNote],
    clusters: &ClusterMap,
) -> Vec<Option<ScoreTime>> {
    (0..notes.len())
        .map(|n| {
            ionv(clusters, n, 1)
                .map(|first| notes[n].note_value * ScoreTime::new(first.denom(), first.numer()))
        })
        .collect()
}

/// How estimated notes are matched to reference notes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchBy {
    /// By note id (the pipeline preserves ids end to end).
    Id,
    /// By position, for external systems that renumber notes.
    Order,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Matched notes entering the error rate.
    pub n: usize,
    pub error_rate: f64,
    pub scale_error: f64,
    pub error_rate_scale_invariant: f64,
    pub scale_error_scale_invariant: f64,
    /// Fraction of matched notes whose onset score times differ; plumbing,
    /// not a headline metric.
    pub onset_error_rate: f64,
    /// Non-positive estimated values excluded from scale errors.
    pub zero_estimates_excluded: usize,
    /// Final-cluster notes excluded from the scale-invariant metrics.
    pub final_cluster_excluded: usize,
}

/// Matches the two scores, then computes all metrics. Reference values must
/// be positive; estimated values may be non-positive (external systems emit
/// them), counting as errors and excluded from scale errors.
pub fn evaluate_scores(
    est: &[ScoreNote],
    reference: &[ScoreNote],
    match_by: MatchBy,
) -> Result<EvalReport> {
    if est.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "scores differ in note count: {} estimated vs {} reference",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate empty scores".into()));
    }
    // pairs[i] = (est index, reference index).
    let pairs: Vec<(usize, usize)> = match match_by {
        MatchBy::Order => (0..est.len()).map(|i| (i, i)).collect(),
        MatchBy::Id => {
            let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(reference.len());
            for (j, r) in reference.iter().enumerate() {
                if by_id.insert(r.id.as_str(), j).is_some() {
                    return Err(Error::InvalidInput(format!(
                        "duplicate id {:?} in reference score",
                        r.id
                    )));
                }
            }
            let mut seen = vec![false; reference.len()];
            let mut pairs = Vec::with_capacity(est.len());
            for (i, e) in est.iter().enumerate() {
                let j = *by_id.get(e.id.as_str()).ok_or_else(|| Error::UnknownNote {
                    id: e.id.clone(),
                    referrer: "estimated score".into(),
                })?;
                if seen[j] {
                    return Err(Error::InvalidInput(format!(
                        "duplicate id {:?} in estimated score",
                        e.id
                    )));
                }
                seen[j] = true;
                pairs.push((i, j));
            }
            pairs
        }
    };

    for (_, j) in &pairs {
        if !reference[*j].note_value.is_positive() {
            return Err(Error::InvalidInput(format!(
                "reference note {:?} has non-positive value {}",
                reference[*j].id, reference[*j].note_value
            )));
        }
    }

    let n = pairs.len();
    let wrong = pairs
        .iter()
        .filter(|(i, j)| est[*i].note_value != reference[*j].note_value)
        .count();
    let onset_wrong = pairs.iter().filter(|(i, j)| est[*i].onset != reference[*j].onset).count();

    // Plain scale error: exclude non-positive estimates.
    let mut logs = Vec::new();
    let mut zero_excluded = 0usize;
    for (i, j) in &pairs {
        let e = est[*i].note_value;
        let r = reference[*j].note_value;
        if e.is_positive() {
            let ratio = e * ScoreTime::new(r.denom(), r.numer());
            logs.push(ratio.to_f64().ln().abs());
        } else {
            zero_excluded += 1;
        }
    }
    let scale = if logs.is_empty() {
        1.0
    } else {
        (pairwise_sum(&logs) / logs.len() as f64).exp()
    };

    // Scale-invariant variants: each side normalized by its own first IONV;
    // notes final in either score drop out.
    let est_clusters = build_onset_clusters(est);
    let ref_clusters = build_onset_clusters(reference);
    let est_norm = normalize_by_first_ionv(est, &est_clusters);
    let ref_norm = normalize_by_first_ionv(reference, &ref_clusters);
    let mut si_n = 0usize;
    let mut si_wrong = 0usize;
    let mut si_logs = Vec::new();
    let mut final_excluded = 0usize;
    for (i, j) in &pairs {
        match (est_norm[*i], ref_norm[*j]) {
            (Some(e), Some(r)) => {
                si_n += 1;
                if e != r {
                    si_wrong += 1;
                }
                if e.is_positive() {
                    let ratio = e * ScoreTime::new(r.denom(), r.numer());
                    si_logs.push(ratio.to_f64().ln().abs());
                }
            }
            _ => final_excluded += 1,
        }
    }
    let si_error = if si_n == 0 { 0.0 } else { si_wrong as f64 / si_n as f64 };
    let si_scale = if si_logs.is_empty() {
        1.0
    } else {
        (pairwise_sum(&si_logs) / si_logs.len() as f64).exp()
    };

    Ok(EvalReport {
        n,
        error_rate: wrong as f64 / n as f64,
        scale_error: scale,
        error_rate_scale_invariant: si_error,
        scale_error_scale_invariant: si_scale,
        onset_error_rate: onset_wrong as f64 / n as f64,
        zero_estimates_excluded: zero_excluded,
        final_cluster_excluded: final_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn st(num: i64, den: i64) -> ScoreTime {
        ScoreTime::new(num, den)
    }

    fn quarter_piece(n: usize) -> Vec<ScoreNote> {
        (0..n)
            .map(|k| ScoreNote {
                id: format!("n{k}"),
                onset: st(k as i64, 4),
                note_value: st(1, 4),
                pitch: 60,
                voice: None,
            })
            .collect()
    }

    #[test]
    fn error_rate_counts_exact_mismatches() {
        let reference = vec![st(1, 4); 4];
        assert_eq!(error_rate(&reference, &reference).unwrap(), 0.0);
        let est = vec![st(1, 4), st(1, 4), st(1, 4), st(1, 2)];
        assert_eq!(error_rate(&est, &reference).unwrap(), 0.25);
        // 2/8 equals 1/4 exactly: no error.
        let est = vec![st(2, 8), st(1, 4), st(1, 4), st(1, 4)];
        assert_eq!(error_rate(&est, &reference).unwrap(), 0.0);
        assert!(error_rate(&est[..2], &reference).is_err());
        assert!(error_rate(&[], &[]).is_err());
    }

    #[test]
    fn error_rate_matches_recount_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let n = rng.gen_range(1..40);
            let est: Vec<ScoreTime> =
                (0..n).map(|_| st(rng.gen_range(1..=4), rng.gen_range(1..=4))).collect();
            let reference: Vec<ScoreTime> =
                (0..n).map(|_| st(rng.gen_range(1..=4), rng.gen_range(1..=4))).collect();
            let mut count = 0usize;
            for i in 0..n {
                if est[i] != reference[i] {
                    count += 1;
                }
            }
            assert_eq!(error_rate(&est, &reference).unwrap(), count as f64 / n as f64);
        }
    }

    #[test]
    fn scale_error_is_one_on_identity_and_two_on_doubling() {
        let reference: Vec<ScoreTime> =
            vec![st(1, 4), st(1, 2), st(3, 8), st(1, 8), st(1, 4), st(1, 16), st(1, 4), st(1, 2)];
        assert_eq!(scale_error(&reference, &reference).unwrap(), 1.0);
        let doubled: Vec<ScoreTime> = reference.iter().map(|&v| v * 2).collect();
        assert_eq!(scale_error(&doubled, &reference).unwrap(), 2.0);
        // Half doubled, half halved: same |ln 2| everywhere.
        let mixed: Vec<ScoreTime> = reference
            .iter()
            .enumerate()
            .map(|(i, &v)| if i % 2 == 0 { v * 2 } else { v * st(1, 2) })
            .collect();
        assert_eq!(scale_error(&mixed, &reference).unwrap(), 2.0);
    }

    #[test]
    fn scale_error_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(1..30);
            let a: Vec<ScoreTime> =
                (0..n).map(|_| st(rng.gen_range(1..=6), rng.gen_range(1..=6))).collect();
            let b: Vec<ScoreTime> =
                (0..n).map(|_| st(rng.gen_range(1..=6), rng.gen_range(1..=6))).collect();
            let ab = scale_error(&a, &b).unwrap();
            let ba = scale_error(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12, "{ab} vs {ba}");
        }
    }

    #[test]
    fn scale_error_rejects_nonpositive() {
        assert!(scale_error(&[ScoreTime::ZERO], &[st(1, 4)]).is_err());
        assert!(scale_error(&[st(1, 4)], &[st(-1, 4)]).is_err());
    }

    #[test]
    fn scale_error_is_unity_exactly_when_error_rate_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = rng.gen_range(1..20);
            let reference: Vec<ScoreTime> =
                (0..n).map(|_| st(rng.gen_range(1..=4), rng.gen_range(1..=4))).collect();
            let est: Vec<ScoreTime> = reference
                .iter()
                .map(|&v| if rng.gen_bool(0.3) { v * 2 } else { v })
                .collect();
            let e = error_rate(&est, &reference).unwrap();
            let s = scale_error(&est, &reference).unwrap();
            assert_eq!(e == 0.0, s == 1.0, "error rate {e}, scale error {s}");
        }
    }

    #[test]
    fn normalization_cancels_global_scaling() {
        let mut piece = quarter_piece(8);
        piece[3].note_value = st(1, 2);
        let clusters = build_onset_clusters(&piece);
        let norm = normalize_by_first_ionv(&piece, &clusters);
        // Quarters over quarter steps normalize to 1, the half note to 2;
        // the final note has no next cluster.
        for (n, r) in norm.iter().enumerate() {
            match n {
                3 => assert_eq!(*r, Some(st(2, 1))),
                7 => assert_eq!(*r, None),
                _ => assert_eq!(*r, Some(ScoreTime::ONE)),
            }
        }
        // Double every score time: normalized values unchanged.
        let doubled: Vec<ScoreNote> = piece
            .iter()
            .map(|note| ScoreNote {
                id: note.id.clone(),
                onset: note.onset * 2,
                note_value: note.note_value * 2,
                pitch: note.pitch,
                voice: note.voice,
            })
            .collect();
        let dclusters = build_onset_clusters(&doubled);
        assert_eq!(norm, normalize_by_first_ionv(&doubled, &dclusters));
    }

    #[test]
    fn normalization_matches_division_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut piece = Vec::new();
        let mut onset = ScoreTime::ZERO;
        for k in 0..30 {
            piece.push(ScoreNote {
                id: format!("n{k}"),
                onset,
                note_value: st(rng.gen_range(1..=8), 8),
                pitch: rng.gen_range(40..=80),
                voice: None,
            });
            if rng.gen_bool(0.7) {
                onset = onset + st(rng.gen_range(1..=4), 16);
            }
        }
        let clusters = build_onset_clusters(&piece);
        let norm = normalize_by_first_ionv(&piece, &clusters);
        for n in 0..piece.len() {
            match ionv(&clusters, n, 1) {
                None => assert_eq!(norm[n], None),
                Some(first) => {
                    let r = piece[n].note_value;
                    let want = st(r.numer() * first.denom(), r.denom() * first.numer());
                    assert_eq!(norm[n], Some(want));
                }
            }
        }
    }

    #[test]
    fn full_evaluation_on_identical_scores() {
        let piece = quarter_piece(8);
        let report = evaluate_scores(&piece, &piece, MatchBy::Id).unwrap();
        assert_eq!(report.n, 8);
        assert_eq!(report.error_rate, 0.0);
        assert_eq!(report.scale_error, 1.0);
        assert_eq!(report.error_rate_scale_invariant, 0.0);
        assert_eq!(report.scale_error_scale_invariant, 1.0);
        assert_eq!(report.onset_error_rate, 0.0);
        assert_eq!(report.zero_estimates_excluded, 0);
        assert_eq!(report.final_cluster_excluded, 1);
    }

    #[test]
    fn scale_invariant_metrics_ignore_time_doubling() {
        let reference = quarter_piece(8);
        let est: Vec<ScoreNote> = reference
            .iter()
            .map(|note| ScoreNote {
                id: note.id.clone(),
                onset: note.onset * 2,
                note_value: note.note_value * 2,
                pitch: note.pitch,
                voice: note.voice,
            })
            .collect();
        let report = evaluate_scores(&est, &reference, MatchBy::Id).unwrap();
        // Raw metrics see doubled values; the invariant ones do not.
        assert_eq!(report.error_rate, 1.0);
        assert_eq!(report.scale_error, 2.0);
        assert_eq!(report.error_rate_scale_invariant, 0.0);
        assert_eq!(report.scale_error_scale_invariant, 1.0);
    }

    #[test]
    fn id_matching_survives_reordering() {
        let reference = quarter_piece(6);
        let mut est = reference.clone();
        est.swap(1, 4);
        est.swap(0, 3);
        let report = evaluate_scores(&est, &reference, MatchBy::Id).unwrap();
        assert_eq!(report.error_rate, 0.0);
        // Order matching on the same input sees onset mismatches.
        let by_order = evaluate_scores(&est, &reference, MatchBy::Order).unwrap();
        assert!(by_order.onset_error_rate > 0.0);
    }

    #[test]
    fn zero_estimates_count_as_errors_but_not_scale() {
        let reference = quarter_piece(4);
        let mut est = reference.clone();
        est[1].note_value = ScoreTime::ZERO;
        let report = evaluate_scores(&est, &reference, MatchBy::Id).unwrap();
        assert_eq!(report.error_rate, 0.25);
        assert_eq!(report.zero_estimates_excluded, 1);
        assert_eq!(report.scale_error, 1.0);
    }

    #[test]
    fn unknown_and_duplicate_ids_are_rejected() {
        let reference = quarter_piece(3);
        let mut est = reference.clone();
        est[2].id = "stranger".into();
        assert!(evaluate_scores(&est, &reference, MatchBy::Id).is_err());
        let mut est = reference.clone();
        est[2].id = est[1].id.clone();
        assert!(evaluate_scores(&est, &reference, MatchBy::Id).is_err());
    }
}
