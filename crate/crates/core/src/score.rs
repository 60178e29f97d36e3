//! Symbolic score data model: notes, onset clusters, inter-onset note values
//! (IONVs), note-value labels, and pitch-context features.
//!
//! An onset cluster is the set of all notes sharing one onset score time.
//! IONV(n, k) is the score-time interval from note n's cluster to the k-th
//! following cluster; the first ten IONVs plus an OTHER class form the label
//! space over which note values are modeled and decoded.

use crate::rational::ScoreTime;

/// Sentinel for a context feature whose target cluster does not exist.
///
/// Real unsigned pitch intervals lie in 0..=87, so 128 sorts above all of
/// them: any cut below 128 routes a missing continuation to the "far" branch.
pub const MISSING_CONTEXT: u8 = 128;

/// Number of context features c(1)..c(10).
pub const CONTEXT_DIMS: usize = 10;

/// A note in a symbolic score. Times are in whole notes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreNote {
    pub id: String,
    pub onset: ScoreTime,
    /// Offset score time minus onset score time; strictly positive.
    pub note_value: ScoreTime,
    /// MIDI note number, 21..=108 (piano range).
    pub pitch: u8,
    pub voice: Option<i32>,
}

impl ScoreNote {
    /// Checks the per-note invariants; loaders call this on untrusted data.
    pub fn validate(&self) -> Result<(), String> {
        if !self.note_value.is_positive() {
            return Err(format!("note {}: note value {} is not positive", self.id, self.note_value));
        }
        if !(21..=108).contains(&self.pitch) {
            return Err(format!("note {}: pitch {} outside 21..=108", self.id, self.pitch));
        }
        Ok(())
    }
}

/// A performed note with clock times in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceNote {
    pub id: String,
    pub onset_sec: f64,
    pub key_release_sec: f64,
    /// Key release extended while the sustain pedal is held.
    pub damper_drop_sec: f64,
    pub pitch: u8,
}

impl PerformanceNote {
    /// Key-holding duration d, always > 0 for a valid note.
    pub fn key_holding(&self) -> f64 {
        self.key_release_sec - self.onset_sec
    }

    /// Damper-lifting duration d̄, always ≥ d for a valid note.
    pub fn damper_lifting(&self) -> f64 {
        self.damper_drop_sec - self.onset_sec
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.key_release_sec > self.onset_sec) {
            return Err(format!("note {}: key release must follow onset", self.id));
        }
        if !(self.damper_drop_sec >= self.key_release_sec) {
            return Err(format!("note {}: damper drop precedes key release", self.id));
        }
        if !(21..=108).contains(&self.pitch) {
            return Err(format!("note {}: pitch {} outside 21..=108", self.id, self.pitch));
        }
        if !self.onset_sec.is_finite() || !self.key_release_sec.is_finite() || !self.damper_drop_sec.is_finite() {
            return Err(format!("note {}: non-finite time", self.id));
        }
        Ok(())
    }
}

/// All notes sharing one onset score time. `members` are positions into the
/// note slice the clusters were built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnsetCluster {
    pub time: ScoreTime,
    pub members: Vec<usize>,
}

/// Clusters of a piece in increasing time order plus the inverse map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterMap {
    pub clusters: Vec<OnsetCluster>,
    /// `cluster_of[i]` is the cluster index of note `i`.
    pub cluster_of: Vec<usize>,
}

impl ClusterMap {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Partitions notes into onset clusters, sorted by strictly increasing time.
///
/// Input order is irrelevant; within a cluster, members keep ascending input
/// position. Empty input yields an empty map.
pub fn build_onset_clusters(notes: &[ScoreNote]) -> ClusterMap {
    let mut by_time: std::collections::BTreeMap<ScoreTime, Vec<usize>> = std::collections::BTreeMap::new();
    for (i, n) in notes.iter().enumerate() {
        by_time.entry(n.onset).or_default().push(i);
    }
    let clusters: Vec<OnsetCluster> =
        by_time.into_iter().map(|(time, members)| OnsetCluster { time, members }).collect();
    let mut cluster_of = vec![0usize; notes.len()];
    for (ci, c) in clusters.iter().enumerate() {
        for &i in &c.members {
            cluster_of[i] = ci;
        }
    }
    ClusterMap { clusters, cluster_of }
}

/// IONV(n, k): score-time interval from note n's cluster to the k-th
/// following cluster, or `None` if fewer than k clusters follow.
///
/// `note` is a position into the slice `clusters` was built from; `k ≥ 1`.
pub fn ionv(clusters: &ClusterMap, note: usize, k: usize) -> Option<ScoreTime> {
    assert!(k >= 1, "ionv index k must be >= 1");
    let ci = *clusters.cluster_of.get(note).expect("note index out of range");
    let target = ci.checked_add(k)?;
    let cluster = clusters.clusters.get(target)?;
    Some(cluster.time - clusters.clusters[ci].time)
}

/// The label space over note values: the first ten IONVs or the complement
/// class OTHER. Index convention: IONV(k) ↦ k−1, OTHER ↦ 10.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoteValueLabel {
    /// IONV(k) with k in 1..=10.
    Ionv(u8),
    Other,
}

/// Size of the label space.
pub const LABEL_COUNT: usize = 11;

impl NoteValueLabel {
    /// Dense index in 0..11 used by distributions and matrices.
    pub fn index(self) -> usize {
        match self {
            NoteValueLabel::Ionv(k) => {
                debug_assert!((1..=10).contains(&k));
                (k - 1) as usize
            }
            NoteValueLabel::Other => 10,
        }
    }

    /// Inverse of `index`. Panics outside 0..11.
    pub fn from_index(i: usize) -> NoteValueLabel {
        match i {
            0..=9 => NoteValueLabel::Ionv(i as u8 + 1),
            10 => NoteValueLabel::Other,
            _ => panic!("label index {i} outside 0..11"),
        }
    }

    pub fn all() -> impl Iterator<Item = NoteValueLabel> {
        (0..LABEL_COUNT).map(NoteValueLabel::from_index)
    }
}

/// Pitch-context features c(1)..c(10): the smallest unsigned pitch interval
/// from a note to any member of each of the ten following clusters, with
/// `MISSING_CONTEXT` where no such cluster exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContextVector(pub [u8; CONTEXT_DIMS]);

impl ContextVector {
    /// Feature value for 1-based feature index f.
    pub fn get(&self, f: usize) -> u8 {
        assert!((1..=CONTEXT_DIMS).contains(&f), "feature index {f} outside 1..=10");
        self.0[f - 1]
    }

    pub fn all_missing() -> ContextVector {
        ContextVector([MISSING_CONTEXT; CONTEXT_DIMS])
    }
}

/// Computes the context vector of note `note` against the following clusters.
pub fn context_features(notes: &[ScoreNote], clusters: &ClusterMap, note: usize) -> ContextVector {
    let ci = *clusters.cluster_of.get(note).expect("note index out of range");
    let pitch = notes[note].pitch as i16;
    let mut c = [MISSING_CONTEXT; CONTEXT_DIMS];
    for (k, slot) in c.iter_mut().enumerate() {
        let Some(cluster) = clusters.clusters.get(ci + k + 1) else { break };
        let min_interval = cluster
            .members
            .iter()
            .map(|&m| (notes[m].pitch as i16 - pitch).unsigned_abs() as u8)
            .min()
            .expect("clusters are nonempty");
        *slot = min_interval;
    }
    ContextVector(c)
}

/// Labels a note's value: IONV(k) for the smallest k ≤ 10 whose IONV equals
/// the note value exactly, OTHER when no available IONV matches.
pub fn classify_note_value(notes: &[ScoreNote], clusters: &ClusterMap, note: usize) -> NoteValueLabel {
    let r = notes[note].note_value;
    for k in 1..=10 {
        match ionv(clusters, note, k) {
            Some(v) if v == r => return NoteValueLabel::Ionv(k as u8),
            Some(v) if v > r => return NoteValueLabel::Other,
            Some(_) => {}
            None => return NoteValueLabel::Other,
        }
    }
    NoteValueLabel::Other
}
