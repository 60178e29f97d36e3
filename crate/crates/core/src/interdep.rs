//! Interdependence of note values within a chord.
//!
//! Notes sharing an onset cluster tend to share note values, and the
//! tendency is strongest for close pitches. This module learns a symmetric
//! 11x11 joint distribution over label pairs from same-cluster note pairs
//! whose pitch distance is at most `delta_nbh` semitones. Each unordered
//! pair is counted in both orders, which keeps the matrix exactly
//! symmetric; add-0.1 smoothing keeps every cell positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{build_onset_clusters, classify_note_value, ScoreNote, LABEL_COUNT};

/// Smoothing constant for the joint counts.
pub const PAIR_ALPHA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct InterdependenceModel {
    /// Pitch-distance neighbourhood in semitones (inclusive).
    pub delta_nbh: u8,
    /// Symmetric joint over label-index pairs; sums to 1.
    pub joint: [[f64; LABEL_COUNT]; LABEL_COUNT],
}

impl InterdependenceModel {
    /// The fallback when nothing can be learned: all 121 cells equal.
    pub fn uniform(delta_nbh: u8) -> InterdependenceModel {
        let p = 1.0 / (LABEL_COUNT * LABEL_COUNT) as f64;
        InterdependenceModel { delta_nbh, joint: [[p; LABEL_COUNT]; LABEL_COUNT] }
    }

    pub fn validate(&self) -> Result<()> {
        let mut sum = 0.0;
        for row in &self.joint {
            for &p in row {
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::Model("joint entries must be positive and finite".into()));
                }
                sum += p;
            }
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Model(format!("joint sums to {sum}, want 1")));
        }
        for a in 0..LABEL_COUNT {
            for b in (a + 1)..LABEL_COUNT {
                if (self.joint[a][b] - self.joint[b][a]).abs() > 1e-12 {
                    return Err(Error::Model(format!("joint not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mirror = InterdepJson {
            delta_nbh: self.delta_nbh,
            joint: self.joint.iter().map(|r| r.to_vec()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&mirror).expect("interdependence serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<InterdependenceModel> {
        let mirror: InterdepJson = serde_json::from_str(text)
            .map_err(|e| Error::Model(format!("interdependence JSON: {e}")))?;
        if mirror.joint.len() != LABEL_COUNT {
            return Err(Error::Model(format!("joint has {} rows, want 11", mirror.joint.len())));
        }
        let mut joint = [[0.0; LABEL_COUNT]; LABEL_COUNT];
        for (a, row) in mirror.joint.into_iter().enumerate() {
            joint[a] = row.try_into().map_err(|v: Vec<f64>| {
                Error::Model(format!("joint row {a} has {} columns, want 11", v.len()))
            })?;
        }
        let model = InterdependenceModel { delta_nbh: mirror.delta_nbh, joint };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<InterdependenceModel> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct InterdepJson {
    delta_nbh: u8,
    joint: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct InterdepSetJson {
    models: Vec<serde_json::Value>,
}

/// Renders a family of models, one per neighbourhood radius 0..=15, as a
/// single JSON document. The weight search wants all radii at once.
pub fn interdep_set_to_json(models: &[InterdependenceModel]) -> String {
    let values = models
        .iter()
        .map(|m| serde_json::from_str(&m.to_json_string()).expect("interdependence reparse"))
        .collect();
    let mut s = serde_json::to_string_pretty(&InterdepSetJson { models: values })
        .expect("interdependence set serialize");
    s.push('\n');
    s
}

/// Parses a radius family; entry `d` must carry `delta_nbh == d`.
pub fn interdep_set_from_json(text: &str) -> Result<Vec<InterdependenceModel>> {
    let set: InterdepSetJson = serde_json::from_str(text)
        .map_err(|e| Error::Model(format!("interdependence set JSON: {e}")))?;
    if set.models.len() != 16 {
        return Err(Error::Model(format!(
            "interdependence set has {} models, want 16 (radii 0..=15)",
            set.models.len()
        )));
    }
    let mut models = Vec::with_capacity(16);
    for (d, value) in set.models.into_iter().enumerate() {
        let model = InterdependenceModel::from_json_str(&value.to_string())?;
        if model.delta_nbh as usize != d {
            return Err(Error::Model(format!(
                "interdependence set entry {d} has radius {}",
                model.delta_nbh
            )));
        }
        models.push(model);
    }
    Ok(models)
}

pub fn save_interdep_set(
    models: &[InterdependenceModel],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    std::fs::write(path.as_ref(), interdep_set_to_json(models))
        .map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_interdep_set(path: impl AsRef<std::path::Path>) -> Result<Vec<InterdependenceModel>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    interdep_set_from_json(&text)
}

/// Learns the joint from all same-cluster note pairs within `delta_nbh`
/// semitones. Notes in a piece's final cluster are skipped (their labels
/// are undefined). When the corpus yields no qualifying pair the model
/// falls back to uniform and a warning explains why.
pub fn learn_interdependence(
    corpus: &[Vec<ScoreNote>],
    delta_nbh: u8,
) -> (InterdependenceModel, Vec<String>) {
    let mut counts = [[0u64; LABEL_COUNT]; LABEL_COUNT];
    let mut pairs = 0u64;
    for piece in corpus {
        let clusters = build_onset_clusters(piece);
        if clusters.len() < 2 {
            continue;
        }
        for cluster in &clusters.clusters[..clusters.len() - 1] {
            let labels: Vec<usize> = cluster
                .members
                .iter()
                .map(|&n| classify_note_value(piece, &clusters, n).index())
                .collect();
            for i in 0..cluster.members.len() {
                for j in (i + 1)..cluster.members.len() {
                    let pa = piece[cluster.members[i]].pitch;
                    let pb = piece[cluster.members[j]].pitch;
                    if pa.abs_diff(pb) <= delta_nbh {
                        counts[labels[i]][labels[j]] += 1;
                        counts[labels[j]][labels[i]] += 1;
                        pairs += 1;
                    }
                }
            }
        }
    }

    if pairs == 0 {
        let warning = format!(
            "no same-cluster note pairs within {delta_nbh} semitones; \
             interdependence falls back to uniform"
        );
        return (InterdependenceModel::uniform(delta_nbh), vec![warning]);
    }

    let total = 2.0 * pairs as f64 + PAIR_ALPHA * (LABEL_COUNT * LABEL_COUNT) as f64;
    let mut joint = [[0.0; LABEL_COUNT]; LABEL_COUNT];
    for a in 0..LABEL_COUNT {
        for b in 0..LABEL_COUNT {
            joint[a][b] = (counts[a][b] as f64 + PAIR_ALPHA) / total;
        }
    }
    (InterdependenceModel { delta_nbh, joint }, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ScoreTime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn note(id: String, onset: ScoreTime, value: ScoreTime, pitch: u8) -> ScoreNote {
        ScoreNote { id, onset, note_value: value, pitch, voice: None }
    }

    /// A run of `len` chord clusters, every chord a `pitches`-wide stack of
    /// notes all lasting exactly `step`.
    fn chord_chain(len: usize, step: ScoreTime, pitches: &[u8]) -> Vec<ScoreNote> {
        let mut piece = Vec::new();
        for k in 0..len {
            let onset = step * k as i64;
            for (v, &p) in pitches.iter().enumerate() {
                piece.push(note(format!("n{k}v{v}"), onset, step, p));
            }
        }
        piece
    }

    #[test]
    fn matched_chords_concentrate_on_the_diagonal() {
        let quarter = ScoreTime::new(1, 4);
        let half = ScoreTime::new(1, 2);
        let corpus = vec![
            chord_chain(30, quarter, &[60, 64]),
            chord_chain(30, half, &[55, 59, 62]),
        ];
        let (model, warnings) = learn_interdependence(&corpus, 12);
        assert!(warnings.is_empty());
        model.validate().unwrap();
        let diag: f64 = (0..LABEL_COUNT).map(|k| model.joint[k][k]).sum();
        assert!(diag > 0.9, "diagonal mass {diag}");
        // Both chord chains move to the next cluster, so everything lands
        // on the first-interval label.
        assert!(model.joint[0][0] > 0.9);
    }

    #[test]
    fn zero_neighbourhood_admits_unisons_only() {
        let quarter = ScoreTime::new(1, 4);
        let half = ScoreTime::new(1, 2);
        let mut piece = Vec::new();
        for k in 0..200i64 {
            let onset = quarter * k;
            // A unison pair of quarters and a distant half note.
            piece.push(note(format!("a{k}"), onset, quarter, 60));
            piece.push(note(format!("b{k}"), onset, quarter, 60));
            piece.push(note(format!("c{k}"), onset, half, 40));
        }
        let (model, warnings) = learn_interdependence(&[piece], 0);
        assert!(warnings.is_empty());
        // Quarters over quarter steps are first-interval labels; the half
        // note never pairs with anything, so only cell (0, 0) has counts.
        let smoothed_floor = model.joint[1][1];
        assert!(model.joint[0][0] > 0.9);
        for a in 0..LABEL_COUNT {
            for b in 0..LABEL_COUNT {
                if (a, b) != (0, 0) {
                    assert!((model.joint[a][b] - smoothed_floor).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn joint_is_exactly_symmetric_on_random_corpora() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let quarter = ScoreTime::new(1, 4);
        let mut corpus = Vec::new();
        for p in 0..5 {
            let mut piece = Vec::new();
            for k in 0..40i64 {
                let onset = quarter * k;
                let m = rng.gen_range(1..=3);
                for v in 0..m {
                    let value = quarter * rng.gen_range(1..=3i64);
                    let pitch = rng.gen_range(48..=84);
                    piece.push(note(format!("p{p}k{k}v{v}"), onset, value, pitch));
                }
            }
            corpus.push(piece);
        }
        let (model, _) = learn_interdependence(&corpus, 15);
        model.validate().unwrap();
        for a in 0..LABEL_COUNT {
            for b in 0..LABEL_COUNT {
                assert_eq!(model.joint[a][b], model.joint[b][a], "cell ({a}, {b})");
            }
        }
    }

    #[test]
    fn mostly_matched_chords_dominate_their_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let quarter = ScoreTime::new(1, 4);
        let mut piece = Vec::new();
        for k in 0..200i64 {
            let onset = quarter * k;
            let lower = quarter * rng.gen_range(1..=2i64);
            // 80% of chords share the value, the rest disagree.
            let upper = if rng.gen_bool(0.8) { lower } else { quarter * rng.gen_range(1..=2i64) };
            piece.push(note(format!("l{k}"), onset, lower, 60));
            piece.push(note(format!("u{k}"), onset, upper, 64));
        }
        let (model, _) = learn_interdependence(&[piece], 12);
        let diag: f64 = (0..LABEL_COUNT).map(|k| model.joint[k][k]).sum();
        let off: f64 = 1.0 - diag;
        assert!(diag > off, "diagonal {diag} vs off-diagonal {off}");
    }

    #[test]
    fn no_pairs_falls_back_to_uniform_with_warning() {
        let quarter = ScoreTime::new(1, 4);
        let piece: Vec<ScoreNote> =
            (0..10i64).map(|k| note(format!("n{k}"), quarter * k, quarter, 60)).collect();
        let (model, warnings) = learn_interdependence(&[piece], 12);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("uniform"));
        assert_eq!(model, InterdependenceModel::uniform(12));
        model.validate().unwrap();
    }

    #[test]
    fn final_cluster_pairs_are_not_counted() {
        let quarter = ScoreTime::new(1, 4);
        // Two clusters; the second is a chord whose labels would be OTHER.
        let piece = vec![
            note("a".into(), ScoreTime::ZERO, quarter, 60),
            note("b".into(), ScoreTime::ZERO, quarter, 62),
            note("c".into(), quarter, quarter, 60),
            note("d".into(), quarter, quarter, 62),
        ];
        let (model, _) = learn_interdependence(&[piece], 12);
        // Only the pair (a, b) counts; the final chord (c, d) is skipped,
        // so the OTHER cell holds nothing but smoothing.
        let total = 2.0 + PAIR_ALPHA * 121.0;
        assert!((model.joint[0][0] - (2.0 + PAIR_ALPHA) / total).abs() < 1e-15);
        assert!((model.joint[10][10] - PAIR_ALPHA / total).abs() < 1e-15);
        assert!((model.joint[10][10] - model.joint[5][7]).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let quarter = ScoreTime::new(1, 4);
        let corpus = vec![chord_chain(25, quarter, &[60, 63, 67])];
        let (model, _) = learn_interdependence(&corpus, 9);
        let text = model.to_json_string();
        let reloaded = InterdependenceModel::from_json_str(&text).unwrap();
        assert_eq!(model, reloaded);
        assert_eq!(text, reloaded.to_json_string());
    }

    #[test]
    fn set_round_trip_preserves_every_radius() {
        let quarter = ScoreTime::new(1, 4);
        let corpus = vec![chord_chain(25, quarter, &[60, 63, 67])];
        let models: Vec<InterdependenceModel> =
            (0..16).map(|d| learn_interdependence(&corpus, d).0).collect();
        let text = interdep_set_to_json(&models);
        let back = interdep_set_from_json(&text).unwrap();
        assert_eq!(models, back);
        assert_eq!(text, interdep_set_to_json(&back));

        let mut wrong_order = models.clone();
        wrong_order.swap(3, 4);
        assert!(interdep_set_from_json(&interdep_set_to_json(&wrong_order)).is_err());
        assert!(interdep_set_from_json(&interdep_set_to_json(&models[..5])).is_err());
    }

    #[test]
    fn validation_rejects_asymmetry_and_bad_sums() {
        let mut model = InterdependenceModel::uniform(12);
        model.joint[0][1] += 1e-6;
        assert!(model.validate().is_err());
        let mut model = InterdependenceModel::uniform(12);
        for row in model.joint.iter_mut() {
            for p in row.iter_mut() {
                *p *= 1.5;
            }
        }
        assert!(model.validate().is_err());
    }
}
