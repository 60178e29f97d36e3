//! Random polyphonic score generation for experiments.
//!
//! Desk-scale stand-in for a real score corpus: 2 to 4 voices in separated
//! registers walk small pitch steps over a 1/16 grid, with occasional chords
//! and rests. The mix keeps the note-value label space interesting (chords
//! feed the interdependence model, interleaved voices push labels past the
//! first IONV) while staying regular enough that few values fall outside the
//! ten-interval label range.
//!
//! Generation interleaves voices by earliest pending onset, so output is in
//! time order and deterministic for a given generator state. Corpus pieces
//! draw from per-piece ChaCha8 streams (seed fixed, stream = piece index).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rational::ScoreTime;
use crate::score::ScoreNote;

/// Voice register centers, low to high; a piece uses the first `voices`.
const REGISTER_BASE: [u8; 4] = [40, 52, 64, 76];
/// Walk stays within base ± this.
const REGISTER_SPAN: i16 = 7;

/// Inter-onset steps with sampling weights; all on the 1/16 grid.
const STEP_PALETTE: [(i64, i64, u32); 6] = [
    (1, 16, 10),
    (1, 8, 30),
    (3, 16, 8),
    (1, 4, 30),
    (3, 8, 10),
    (1, 2, 12),
];

/// Chance an onset carries a second, lower chord tone.
const CHORD_PROB: f64 = 0.20;
/// Chance a note is cut short of its voice's next onset (a rest).
const REST_PROB: f64 = 0.03;

fn sample_step<R: Rng + ?Sized>(rng: &mut R) -> ScoreTime {
    let total: u32 = STEP_PALETTE.iter().map(|&(_, _, w)| w).sum();
    let mut roll = rng.gen_range(0..total);
    for &(num, den, w) in &STEP_PALETTE {
        if roll < w {
            return ScoreTime::new(num, den);
        }
        roll -= w;
    }
    unreachable!("weights exhausted");
}

struct VoiceState {
    time: ScoreTime,
    pitch: i16,
    base: i16,
}

/// Generates one piece with at least `min_notes` notes.
pub fn generate_score<R: Rng + ?Sized>(rng: &mut R, min_notes: usize) -> Vec<ScoreNote> {
    assert!(min_notes > 0, "a score needs at least one note");
    let n_voices = rng.gen_range(2..=4usize);
    let mut voices: Vec<VoiceState> = (0..n_voices)
        .map(|v| {
            let base = REGISTER_BASE[v] as i16;
            VoiceState { time: ScoreTime::ZERO, pitch: base + rng.gen_range(-3..=3), base }
        })
        .collect();

    let mut notes: Vec<ScoreNote> = Vec::with_capacity(min_notes + 8);
    let mut counter = 0usize;
    while notes.len() < min_notes {
        // Earliest pending voice plays next; ties fall to the lower voice.
        let v = (0..n_voices)
            .min_by_key(|&v| (voices[v].time, v))
            .expect("at least two voices");
        let step = sample_step(rng);
        let rest = step >= ScoreTime::new(1, 8) && rng.gen_bool(REST_PROB);
        let value = if rest { step - ScoreTime::new(1, 16) } else { step };
        let chord = rng.gen_bool(CHORD_PROB);

        let onset = voices[v].time;
        let pitch = voices[v].pitch;
        let mut emit = |p: i16, counter: &mut usize| {
            notes.push(ScoreNote {
                id: format!("n{counter}"),
                onset,
                note_value: value,
                pitch: p.clamp(21, 108) as u8,
                voice: Some(v as i32),
            });
            *counter += 1;
        };
        emit(pitch, &mut counter);
        if chord {
            let interval = [3i16, 4, 5, 7, 12][rng.gen_range(0..5)];
            emit(pitch - interval, &mut counter);
        }

        // Advance the walk.
        let mut next = pitch + rng.gen_range(-3i16..=3);
        next = next.clamp(voices[v].base - REGISTER_SPAN, voices[v].base + REGISTER_SPAN);
        voices[v].pitch = next;
        voices[v].time = onset + step;
    }
    notes
}

/// Generates `pieces` independent scores; piece `i` uses RNG stream `i` of
/// `seed`, so any prefix of the corpus is stable as it grows.
pub fn generate_corpus(pieces: usize, min_notes: usize, seed: u64) -> Vec<Vec<ScoreNote>> {
    (0..pieces)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            generate_score(&mut rng, min_notes)
        })
        .collect()
}
