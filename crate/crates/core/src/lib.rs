//! # tactus-core
//!
//! Converts polyphonic MIDI piano performances into quantized scores in two
//! stages: onset score times are estimated with a metrical HMM decoded jointly
//! over beat position and a discretized tempo variable, then note values
//! (offset score times) are assigned per onset cluster by MAP inference in a
//! Markov random field that combines a context-tree prior over inter-onset
//! note values, a chord-interdependence prior, and duration likelihoods built
//! from generalized inverse-Gaussian distributions.
//!
//! The crate also ships the supporting machinery: an SMF parser that derives
//! key-holding and damper-lifting durations from note and sustain-pedal
//! events, a Kalman (RTS) tempo smoother for externally supplied onset times,
//! model training (context-tree clustering with MDL stopping, interdependence
//! counting, GIG histogram fitting, weight grid searches), evaluation metrics,
//! and a deterministic performance simulator for desk-scale experiments.

pub mod context_tree;
pub mod corpus;
pub mod durations;
pub mod error;
pub mod eval;
pub mod gig;
pub mod hmm;
pub mod interdep;
pub mod midi;
pub mod mrf;
pub mod pipeline;
pub mod rational;
pub mod score;
pub mod scoregen;
pub mod sim;
pub mod tempo;
pub mod weights;

pub use context_tree::{
    extract_samples, grow_context_tree, split_gain, ContextTree, ContextTreeNode, Criterion,
    NodeKind, SplitRecord, TrainingSample, TreeGrowth, LEAF_ALPHA,
};
pub use durations::{
    fit_duration_models, normalized_duration, DurationModel, GigMixture, MixtureDensity,
};
pub use error::{Error, Result};
pub use eval::{
    error_rate, evaluate_scores, normalize_by_first_ionv, scale_error, EvalReport, MatchBy,
};
pub use gig::{bessel_k, gig_pdf, log_gig_pdf, sample_gig, GigDensity, GigParams, GigSampler};
pub use hmm::{
    decode_onsets, default_tempo_grid, merge_performed_clusters, score_times_from_beats, train_hmm,
    MetreSpec, MetricalHmmParams, OnsetTranscription, DEFAULT_CHORD_EPS,
};
pub use interdep::{
    interdep_set_from_json, interdep_set_to_json, learn_interdependence, load_interdep_set,
    save_interdep_set, InterdependenceModel, PAIR_ALPHA,
};
pub use midi::{
    extract_performance, ingest_midi_file, parse_smf, MidiEventKind, ParsedSmf, RawMidiEvent,
    TempoMap, DEFAULT_PEDAL_THRESHOLD, SUSTAIN_CONTROLLER,
};
pub use mrf::{
    build_candidate_space, candidate_cutoff, decode_cluster, decode_piece, fallback_values,
    nearest_fallback_value, note_energy, Candidate, CandidateSpace, ClusterNote, DecodedPiece,
    EnergyEvaluator, MrfConfig, MrfWeights, NoteReport, MAX_EXHAUSTIVE_STATES,
};
pub use pipeline::{transcribe_performance, TempoSource, Transcription};
pub use rational::ScoreTime;
pub use score::{
    build_onset_clusters, classify_note_value, context_features, ionv, ClusterMap, ContextVector,
    NoteValueLabel, OnsetCluster, PerformanceNote, ScoreNote, CONTEXT_DIMS, LABEL_COUNT,
    MISSING_CONTEXT,
};
pub use scoregen::{generate_corpus, generate_score};
pub use sim::{simulate_performance, DurationSampler, SimParams, TEMPO_FLOOR};
pub use tempo::{smooth_tempi, TempoTrack};
pub use weights::{
    mrf_weights, optimize_perf_weights, optimize_score_weights, DevPiece, PerfWeights,
    ScoreModelWeights, BUNDLED_DELTA_NBH,
};
