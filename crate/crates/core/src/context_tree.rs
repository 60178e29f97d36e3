//! Context-tree model of note-value labels.
//!
//! A binary tree of criteria `c(feature) <= cut` partitions the space of
//! pitch-context vectors; each leaf carries an 11-way distribution over
//! note-value labels. Growth is greedy maximum-likelihood: at every step the
//! (leaf, feature, cut) split with the largest log-likelihood gain ΔL is
//! taken, until the description-length change
//!
//! ```text
//! Δl = -ΔL / ln 2 + 5 log2 I      (I = global sample count)
//! ```
//!
//! turns positive (each split adds ten free parameters, hence the 5 log2 I
//! penalty). Gains use unsmoothed empirical distributions, which makes
//! ΔL >= 0 for every candidate split; the stored leaf distributions are
//! add-alpha smoothed so no label gets zero probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{
    build_onset_clusters, classify_note_value, context_features, ContextVector, NoteValueLabel,
    ScoreNote, CONTEXT_DIMS, LABEL_COUNT,
};

/// Smoothing constant for stored leaf distributions.
pub const LEAF_ALPHA: f64 = 0.1;

/// One training sample: a note's label and its pitch context.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingSample {
    pub label: NoteValueLabel,
    pub context: ContextVector,
}

/// A split criterion: contexts with `c(feature) <= cut` go left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Criterion {
    /// 1-based feature index into the context vector.
    pub feature: usize,
    pub cut: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Internal { criterion: Criterion, left: usize, right: usize },
    Leaf { dist: [f64; LABEL_COUNT], count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextTreeNode {
    pub id: usize,
    pub kind: NodeKind,
}

/// Binary context tree; node ids equal their index, root is node 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextTree {
    pub alpha: f64,
    pub nodes: Vec<ContextTreeNode>,
}

/// Record of one accepted split, for auditing the growth run.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitRecord {
    pub leaf_id: usize,
    pub criterion: Criterion,
    /// Log-likelihood gain of the split; non-negative.
    pub delta_l: f64,
    /// Description-length change; non-positive for accepted splits.
    pub delta_mdl: f64,
    pub left_id: usize,
    pub right_id: usize,
}

/// A grown tree plus its audit trail.
#[derive(Clone, Debug)]
pub struct TreeGrowth {
    pub tree: ContextTree,
    pub splits: Vec<SplitRecord>,
}

// ---------------------------------------------------------------------------
// Sample extraction.
// ---------------------------------------------------------------------------

/// Extracts one (label, context) sample per note, skipping notes in the
/// final onset cluster of a piece: with no following clusters their labels
/// are undefined in the IONV space.
pub fn extract_samples(corpus: &[Vec<ScoreNote>]) -> Vec<TrainingSample> {
    let mut samples = Vec::new();
    for piece in corpus {
        let clusters = build_onset_clusters(piece);
        if clusters.len() < 2 {
            continue;
        }
        let last = clusters.len() - 1;
        for n in 0..piece.len() {
            if clusters.cluster_of[n] == last {
                continue;
            }
            samples.push(TrainingSample {
                label: classify_note_value(piece, &clusters, n),
                context: context_features(piece, &clusters, n),
            });
        }
    }
    samples
}

// ---------------------------------------------------------------------------
// Gains.
// ---------------------------------------------------------------------------

fn log_likelihood(counts: &[u64; LABEL_COUNT]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut acc = 0.0;
    for &c in counts {
        if c > 0 {
            let c = c as f64;
            acc += c * (c / total).ln();
        }
    }
    acc
}

fn gain_from_counts(left: &[u64; LABEL_COUNT], right: &[u64; LABEL_COUNT], parent_ll: f64) -> f64 {
    (log_likelihood(left) + log_likelihood(right)) - parent_ll
}

/// Log-likelihood gain ΔL of splitting `samples` by `criterion`, using
/// unsmoothed empirical distributions. Returns −∞ when either side would be
/// empty (an invalid split).
pub fn split_gain(samples: &[TrainingSample], criterion: &Criterion) -> f64 {
    let mut left = [0u64; LABEL_COUNT];
    let mut right = [0u64; LABEL_COUNT];
    let mut parent = [0u64; LABEL_COUNT];
    for s in samples {
        let k = s.label.index();
        parent[k] += 1;
        if s.context.get(criterion.feature) <= criterion.cut {
            left[k] += 1;
        } else {
            right[k] += 1;
        }
    }
    if left.iter().sum::<u64>() == 0 || right.iter().sum::<u64>() == 0 {
        return f64::NEG_INFINITY;
    }
    gain_from_counts(&left, &right, log_likelihood(&parent))
}

/// Best (gain, criterion) over all features and all realized cuts for the
/// given sample subset; `None` when no valid split exists. Ties prefer the
/// smallest (feature, cut).
fn best_split(samples: &[TrainingSample], idx: &[usize]) -> Option<(f64, Criterion)> {
    let mut parent = [0u64; LABEL_COUNT];
    for &i in idx {
        parent[samples[i].label.index()] += 1;
    }
    let parent_ll = log_likelihood(&parent);
    let mut best: Option<(f64, Criterion)> = None;
    for feature in 1..=CONTEXT_DIMS {
        // Label histogram per realized feature value, in value order.
        let mut by_value: std::collections::BTreeMap<u8, [u64; LABEL_COUNT]> =
            std::collections::BTreeMap::new();
        for &i in idx {
            let v = samples[i].context.get(feature);
            by_value.entry(v).or_insert([0; LABEL_COUNT])[samples[i].label.index()] += 1;
        }
        if by_value.len() < 2 {
            continue;
        }
        // Sweep cuts in increasing value order; the largest value cannot be
        // a cut (its right side would be empty).
        let mut left = [0u64; LABEL_COUNT];
        let n_values = by_value.len();
        for (vi, (&value, counts)) in by_value.iter().enumerate() {
            if vi + 1 == n_values {
                break;
            }
            for k in 0..LABEL_COUNT {
                left[k] += counts[k];
            }
            let mut right = [0u64; LABEL_COUNT];
            for k in 0..LABEL_COUNT {
                right[k] = parent[k] - left[k];
            }
            let gain = gain_from_counts(&left, &right, parent_ll);
            let criterion = Criterion { feature, cut: value };
            let take = match &best {
                None => true,
                Some((bg, bc)) => gain > *bg || (gain == *bg && criterion < *bc),
            };
            if take {
                best = Some((gain, criterion));
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Growth.
// ---------------------------------------------------------------------------

fn smoothed_distribution(counts: &[u64; LABEL_COUNT], alpha: f64) -> [f64; LABEL_COUNT] {
    let total = counts.iter().sum::<u64>() as f64 + alpha * LABEL_COUNT as f64;
    let mut dist = [0.0; LABEL_COUNT];
    for (d, &c) in dist.iter_mut().zip(counts) {
        *d = (c as f64 + alpha) / total;
    }
    dist
}

/// Grows a context tree greedily from `samples`. `total_count` is the global
/// sample count I entering the description-length penalty 5 log2 I; pass
/// `samples.len()` unless growth runs on a subset of a larger corpus.
pub fn grow_context_tree(samples: &[TrainingSample], total_count: usize) -> TreeGrowth {
    assert!(!samples.is_empty(), "cannot grow a context tree from zero samples");
    assert!(total_count >= 2, "sample count must be at least 2");
    let penalty = 5.0 * (total_count as f64).ln();
    let ln2 = std::f64::consts::LN_2;

    struct LeafState {
        node_id: usize,
        idx: Vec<usize>,
        best: Option<(f64, Criterion)>,
    }

    let all: Vec<usize> = (0..samples.len()).collect();
    let mut leaves = vec![LeafState { node_id: 0, best: best_split(samples, &all), idx: all }];
    // Node table under construction; leaves get their distributions at the end.
    let mut kinds: Vec<Option<NodeKind>> = vec![None];
    let mut splits = Vec::new();

    loop {
        // Globally best candidate; ties by smallest (feature, cut, leaf id).
        let mut pick: Option<(f64, Criterion, usize)> = None;
        for (pos, leaf) in leaves.iter().enumerate() {
            let Some((gain, crit)) = leaf.best else { continue };
            let take = match &pick {
                None => true,
                Some((bg, bc, bpos)) => {
                    gain > *bg
                        || (gain == *bg
                            && (crit.feature, crit.cut, leaf.node_id)
                                < (bc.feature, bc.cut, leaves[*bpos].node_id))
                }
            };
            if take {
                pick = Some((gain, crit, pos));
            }
        }
        let Some((gain, criterion, pos)) = pick else { break };
        if gain < penalty {
            break;
        }

        let leaf = leaves.swap_remove(pos);
        let left_id = kinds.len();
        let right_id = kinds.len() + 1;
        kinds[leaf.node_id] = Some(NodeKind::Internal { criterion, left: left_id, right: right_id });
        kinds.push(None);
        kinds.push(None);
        splits.push(SplitRecord {
            leaf_id: leaf.node_id,
            criterion,
            delta_l: gain,
            delta_mdl: (penalty - gain) / ln2,
            left_id,
            right_id,
        });

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = leaf
            .idx
            .iter()
            .partition(|&&i| samples[i].context.get(criterion.feature) <= criterion.cut);
        for (node_id, idx) in [(left_id, left_idx), (right_id, right_idx)] {
            leaves.push(LeafState { node_id, best: best_split(samples, &idx), idx });
        }
    }

    for leaf in &leaves {
        let mut counts = [0u64; LABEL_COUNT];
        for &i in &leaf.idx {
            counts[samples[i].label.index()] += 1;
        }
        kinds[leaf.node_id] = Some(NodeKind::Leaf {
            dist: smoothed_distribution(&counts, LEAF_ALPHA),
            count: leaf.idx.len(),
        });
    }

    let nodes: Vec<ContextTreeNode> = kinds
        .into_iter()
        .enumerate()
        .map(|(id, kind)| ContextTreeNode { id, kind: kind.expect("all nodes resolved") })
        .collect();
    TreeGrowth { tree: ContextTree { alpha: LEAF_ALPHA, nodes }, splits }
}

// ---------------------------------------------------------------------------
// Lookup and validation.
// ---------------------------------------------------------------------------

impl ContextTree {
    /// A single uniform leaf: the fallback model when no tree was trained
    /// and the "no context tree" ablation.
    pub fn uniform_leaf() -> ContextTree {
        ContextTree {
            alpha: LEAF_ALPHA,
            nodes: vec![ContextTreeNode {
                id: 0,
                kind: NodeKind::Leaf { dist: [1.0 / LABEL_COUNT as f64; LABEL_COUNT], count: 0 },
            }],
        }
    }

    /// Number of leaves.
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. })).count()
    }

    /// Descends the criteria (boundary values route left) and returns the
    /// leaf distribution. The tree must be structurally valid; trees from
    /// deserialization are validated on load.
    pub fn lookup(&self, context: &ContextVector) -> &[f64; LABEL_COUNT] {
        let mut node = &self.nodes[0];
        loop {
            match &node.kind {
                NodeKind::Leaf { dist, .. } => return dist,
                NodeKind::Internal { criterion, left, right } => {
                    let branch =
                        if context.get(criterion.feature) <= criterion.cut { *left } else { *right };
                    node = &self.nodes[branch];
                }
            }
        }
    }

    /// Structural and distributional checks: ids match indices, children
    /// exist and form a proper tree (each non-root node has exactly one
    /// parent), features are in range, leaf distributions are smoothed
    /// probabilities.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Model("context tree has no nodes".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Model("context tree alpha must be positive".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Model(format!("node id {} out of order (index {i})", node.id)));
            }
            match &node.kind {
                NodeKind::Internal { criterion, left, right } => {
                    if !(1..=CONTEXT_DIMS).contains(&criterion.feature) {
                        return Err(Error::Model(format!(
                            "node {i}: feature {} outside 1..=10",
                            criterion.feature
                        )));
                    }
                    for &child in [left, right] {
                        if child >= self.nodes.len() {
                            return Err(Error::Model(format!("node {i}: dangling child id {child}")));
                        }
                        if child == 0 {
                            return Err(Error::Model(format!("node {i}: root cannot be a child")));
                        }
                        parents[child] += 1;
                    }
                    if left == right {
                        return Err(Error::Model(format!("node {i}: identical children")));
                    }
                }
                NodeKind::Leaf { dist, .. } => {
                    let sum: f64 = dist.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Model(format!("node {i}: leaf distribution sums to {sum}")));
                    }
                    if dist.iter().any(|&p| !(p > 0.0)) {
                        return Err(Error::Model(format!(
                            "node {i}: leaf distribution has a non-positive entry"
                        )));
                    }
                }
            }
        }
        for (i, &p) in parents.iter().enumerate().skip(1) {
            if p != 1 {
                return Err(Error::Model(format!("node {i} has {p} parents, want exactly 1")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Serialization: {alpha, nodes: [{id, kind, feature?, cut?, left?, right?,
// dist?, count?}]}.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cut: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    alpha: f64,
    nodes: Vec<NodeJson>,
}

impl ContextTree {
    pub fn to_json_string(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Internal { criterion, left, right } => NodeJson {
                    id: n.id,
                    kind: "internal".into(),
                    feature: Some(criterion.feature),
                    cut: Some(criterion.cut),
                    left: Some(*left),
                    right: Some(*right),
                    dist: None,
                    count: None,
                },
                NodeKind::Leaf { dist, count } => NodeJson {
                    id: n.id,
                    kind: "leaf".into(),
                    feature: None,
                    cut: None,
                    left: None,
                    right: None,
                    dist: Some(dist.to_vec()),
                    count: Some(*count),
                },
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&TreeJson { alpha: self.alpha, nodes })
            .expect("context tree serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<ContextTree> {
        let mirror: TreeJson =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("context tree JSON: {e}")))?;
        let mut nodes = Vec::with_capacity(mirror.nodes.len());
        for n in mirror.nodes {
            let kind = match n.kind.as_str() {
                "internal" => {
                    let feature = n.feature.ok_or_else(|| missing(n.id, "feature"))?;
                    let cut = n.cut.ok_or_else(|| missing(n.id, "cut"))?;
                    let left = n.left.ok_or_else(|| missing(n.id, "left"))?;
                    let right = n.right.ok_or_else(|| missing(n.id, "right"))?;
                    NodeKind::Internal { criterion: Criterion { feature, cut }, left, right }
                }
                "leaf" => {
                    let dist = n.dist.ok_or_else(|| missing(n.id, "dist"))?;
                    let count = n.count.ok_or_else(|| missing(n.id, "count"))?;
                    let dist: [f64; LABEL_COUNT] = dist.try_into().map_err(|v: Vec<f64>| {
                        Error::Model(format!("node {}: dist has {} entries, want 11", n.id, v.len()))
                    })?;
                    NodeKind::Leaf { dist, count }
                }
                other => return Err(Error::Model(format!("node {}: unknown kind {other:?}", n.id))),
            };
            nodes.push(ContextTreeNode { id: n.id, kind });
        }
        let tree = ContextTree { alpha: mirror.alpha, nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<ContextTree> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }
}

fn missing(id: usize, field: &str) -> Error {
    Error::Model(format!("node {id}: missing field {field:?}"))
}
