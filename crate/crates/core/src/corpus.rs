//! Tab-separated corpus formats.
//!
//! Three UTF-8 TSV layouts, one record per line, `#` starting a comment line:
//!
//! * score: `id  onset_num  onset_den  value_num  value_den  pitch  voice`
//!   (voice −1 when absent); times in whole notes
//! * performance: `id  onset_sec  key_release_sec  damper_drop_sec  pitch`
//!   (seconds, written with 6 decimals)
//! * alignment: `perf_id  score_id`
//! * onsets: `id  onset_num  onset_den` (externally supplied onset score
//!   times, in whole notes)
//!
//! Readers validate every record and report the offending 1-based line.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rational::ScoreTime;
use crate::score::{PerformanceNote, ScoreNote};

fn tsv_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Tsv { path: path.to_path_buf(), line, msg: msg.into() }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| tsv_err(path, line, format!("cannot parse {what} from {field:?}")))
}

/// Parses score TSV text. `path` is used only for error messages.
pub fn parse_score_tsv(text: &str, path: &Path) -> Result<Vec<ScoreNote>> {
    let mut notes = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(tsv_err(path, lineno, format!("expected 7 fields, found {}", fields.len())));
        }
        let id = fields[0].to_string();
        if !ids.insert(id.clone()) {
            return Err(tsv_err(path, lineno, format!("duplicate note id {id:?}")));
        }
        let onset_num: i64 = parse_field(path, lineno, fields[1], "onset numerator")?;
        let onset_den: i64 = parse_field(path, lineno, fields[2], "onset denominator")?;
        let value_num: i64 = parse_field(path, lineno, fields[3], "value numerator")?;
        let value_den: i64 = parse_field(path, lineno, fields[4], "value denominator")?;
        let pitch: u8 = parse_field(path, lineno, fields[5], "pitch")?;
        let voice: i32 = parse_field(path, lineno, fields[6], "voice")?;
        let onset = ScoreTime::checked_new(onset_num, onset_den)
            .ok_or_else(|| tsv_err(path, lineno, "onset denominator is zero"))?;
        let note_value = ScoreTime::checked_new(value_num, value_den)
            .ok_or_else(|| tsv_err(path, lineno, "value denominator is zero"))?;
        let voice = match voice {
            -1 => None,
            v if v >= 0 => Some(v),
            v => return Err(tsv_err(path, lineno, format!("voice {v} is negative (use -1 for absent)"))),
        };
        let note = ScoreNote { id, onset, note_value, pitch, voice };
        note.validate().map_err(|msg| tsv_err(path, lineno, msg))?;
        notes.push(note);
    }
    Ok(notes)
}

/// Renders score notes in the score TSV layout.
pub fn format_score_tsv(notes: &[ScoreNote]) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            n.id,
            n.onset.numer(),
            n.onset.denom(),
            n.note_value.numer(),
            n.note_value.denom(),
            n.pitch,
            n.voice.unwrap_or(-1),
        ));
    }
    out
}

/// Parses performance TSV text. `path` is used only for error messages.
pub fn parse_performance_tsv(text: &str, path: &Path) -> Result<Vec<PerformanceNote>> {
    let mut notes = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(tsv_err(path, lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        let id = fields[0].to_string();
        if !ids.insert(id.clone()) {
            return Err(tsv_err(path, lineno, format!("duplicate note id {id:?}")));
        }
        let onset_sec: f64 = parse_field(path, lineno, fields[1], "onset seconds")?;
        let key_release_sec: f64 = parse_field(path, lineno, fields[2], "key release seconds")?;
        let damper_drop_sec: f64 = parse_field(path, lineno, fields[3], "damper drop seconds")?;
        let pitch: u8 = parse_field(path, lineno, fields[4], "pitch")?;
        let note = PerformanceNote { id, onset_sec, key_release_sec, damper_drop_sec, pitch };
        note.validate().map_err(|msg| tsv_err(path, lineno, msg))?;
        notes.push(note);
    }
    Ok(notes)
}

/// Renders performance notes with 6-decimal times (microsecond resolution).
pub fn format_performance_tsv(notes: &[PerformanceNote]) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            n.id, n.onset_sec, n.key_release_sec, n.damper_drop_sec, n.pitch,
        ));
    }
    out
}

/// Parses alignment TSV text: `perf_id  score_id` pairs.
pub fn parse_alignment_tsv(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(tsv_err(path, lineno, format!("expected 2 fields, found {}", fields.len())));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(tsv_err(path, lineno, format!("duplicate performance id {:?}", fields[0])));
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(pairs)
}

/// Renders alignment pairs.
pub fn format_alignment_tsv(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (p, s) in pairs {
        out.push_str(&format!("{p}\t{s}\n"));
    }
    out
}

/// Parses onset TSV text: `id  onset_num  onset_den` per note, score time
/// in whole notes. Supplies externally known onset score times.
pub fn parse_onsets_tsv(text: &str, path: &Path) -> Result<Vec<(String, ScoreTime)>> {
    let mut onsets = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(tsv_err(path, lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(tsv_err(path, lineno, format!("duplicate note id {:?}", fields[0])));
        }
        let num: i64 = parse_field(path, lineno, fields[1], "onset numerator")?;
        let den: i64 = parse_field(path, lineno, fields[2], "onset denominator")?;
        let onset = ScoreTime::checked_new(num, den)
            .ok_or_else(|| tsv_err(path, lineno, "onset denominator is zero"))?;
        onsets.push((fields[0].to_string(), onset));
    }
    Ok(onsets)
}

/// Renders onset score times.
pub fn format_onsets_tsv(onsets: &[(String, ScoreTime)]) -> String {
    let mut out = String::new();
    for (id, t) in onsets {
        out.push_str(&format!("{id}\t{}\t{}\n", t.numer(), t.denom()));
    }
    out
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_score_tsv(path: impl AsRef<Path>) -> Result<Vec<ScoreNote>> {
    let path = path.as_ref();
    parse_score_tsv(&read_to_string(path)?, path)
}

pub fn write_score_tsv(path: impl AsRef<Path>, notes: &[ScoreNote]) -> Result<()> {
    write_string(path.as_ref(), &format_score_tsv(notes))
}

pub fn read_performance_tsv(path: impl AsRef<Path>) -> Result<Vec<PerformanceNote>> {
    let path = path.as_ref();
    parse_performance_tsv(&read_to_string(path)?, path)
}

pub fn write_performance_tsv(path: impl AsRef<Path>, notes: &[PerformanceNote]) -> Result<()> {
    write_string(path.as_ref(), &format_performance_tsv(notes))
}

pub fn read_alignment_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    parse_alignment_tsv(&read_to_string(path)?, path)
}

pub fn write_alignment_tsv(path: impl AsRef<Path>, pairs: &[(String, String)]) -> Result<()> {
    write_string(path.as_ref(), &format_alignment_tsv(pairs))
}

pub fn read_onsets_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, ScoreTime)>> {
    let path = path.as_ref();
    parse_onsets_tsv(&read_to_string(path)?, path)
}

pub fn write_onsets_tsv(path: impl AsRef<Path>, onsets: &[(String, ScoreTime)]) -> Result<()> {
    write_string(path.as_ref(), &format_onsets_tsv(onsets))
}

/// Lists the `.tsv` files directly inside `dir` in lexicographic order.
/// Deterministic ordering keeps corpus-level training reproducible.
pub fn list_tsv_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("tsv") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PathBuf {
        PathBuf::from("test.tsv")
    }

    #[test]
    fn score_round_trip_preserves_everything() {
        let text = "# header comment\n\
                    a1\t0\t1\t1\t4\t60\t0\n\
                    \n\
                    a2\t1\t4\t3\t16\t72\t-1\n";
        let notes = parse_score_tsv(text, &p()).unwrap();
        assert_eq!(notes.len(), 2);
        assert_eq!(notes[0].voice, Some(0));
        assert_eq!(notes[1].voice, None);
        assert_eq!(notes[1].onset, ScoreTime::new(1, 4));
        let reparsed = parse_score_tsv(&format_score_tsv(&notes), &p()).unwrap();
        assert_eq!(notes, reparsed);
    }

    #[test]
    fn score_errors_carry_line_numbers() {
        let text = "a1\t0\t1\t1\t4\t60\t0\nbad line\n";
        let err = parse_score_tsv(text, &p()).unwrap_err();
        assert!(matches!(err, Error::Tsv { line: 2, .. }), "{err}");

        let zero_den = "a1\t0\t0\t1\t4\t60\t0\n";
        let err = parse_score_tsv(zero_den, &p()).unwrap_err();
        assert!(err.to_string().contains("denominator"), "{err}");

        let dup = "a1\t0\t1\t1\t4\t60\t0\na1\t1\t4\t1\t4\t60\t0\n";
        let err = parse_score_tsv(dup, &p()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let bad_pitch = "a1\t0\t1\t1\t4\t1\t0\n";
        let err = parse_score_tsv(bad_pitch, &p()).unwrap_err();
        assert!(err.to_string().contains("pitch"), "{err}");

        let zero_value = "a1\t0\t1\t0\t4\t60\t0\n";
        assert!(parse_score_tsv(zero_value, &p()).is_err());
    }

    #[test]
    fn performance_round_trip_is_lossless_at_microseconds() {
        let notes = vec![
            PerformanceNote {
                id: "p0".into(),
                onset_sec: 0.123456789,
                key_release_sec: 0.523456321,
                damper_drop_sec: 0.9234567,
                pitch: 64,
            },
            PerformanceNote {
                id: "p1".into(),
                onset_sec: 1.0,
                key_release_sec: 1.25,
                damper_drop_sec: 1.25,
                pitch: 21,
            },
        ];
        let parsed = parse_performance_tsv(&format_performance_tsv(&notes), &p()).unwrap();
        assert_eq!(parsed.len(), notes.len());
        for (a, b) in notes.iter().zip(&parsed) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.pitch, b.pitch);
            assert!((a.onset_sec - b.onset_sec).abs() < 5e-7);
            assert!((a.key_release_sec - b.key_release_sec).abs() < 5e-7);
            assert!((a.damper_drop_sec - b.damper_drop_sec).abs() < 5e-7);
        }
        // A second round trip is byte-stable: values are already quantized.
        assert_eq!(format_performance_tsv(&parsed), format_performance_tsv(&parsed));
    }

    #[test]
    fn performance_rejects_inverted_times() {
        let text = "p0\t1.000000\t0.500000\t1.500000\t60\n";
        let err = parse_performance_tsv(text, &p()).unwrap_err();
        assert!(err.to_string().contains("key release"), "{err}");

        let text = "p0\t1.000000\t1.500000\t1.200000\t60\n";
        assert!(parse_performance_tsv(text, &p()).is_err());
    }

    #[test]
    fn alignment_round_trip() {
        let pairs = vec![("p0".to_string(), "s0".to_string()), ("p1".to_string(), "s1".to_string())];
        let parsed = parse_alignment_tsv(&format_alignment_tsv(&pairs), &p()).unwrap();
        assert_eq!(pairs, parsed);
    }

    #[test]
    fn onsets_round_trip_and_reject_bad_records() {
        let onsets = vec![
            ("n0".to_string(), ScoreTime::new(0, 1)),
            ("n1".to_string(), ScoreTime::new(3, 8)),
        ];
        let parsed = parse_onsets_tsv(&format_onsets_tsv(&onsets), &p()).unwrap();
        assert_eq!(onsets, parsed);
        assert!(parse_onsets_tsv("n0\t1\t0\n", &p()).is_err());
        assert!(parse_onsets_tsv("n0\t1\t4\nn0\t1\t2\n", &p()).is_err());
        assert!(parse_onsets_tsv("n0\t1\n", &p()).is_err());
    }

    #[test]
    fn file_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("piece.tsv");
        let notes = vec![ScoreNote {
            id: "a".into(),
            onset: ScoreTime::ZERO,
            note_value: ScoreTime::new(1, 4),
            pitch: 60,
            voice: None,
        }];
        write_score_tsv(&path, &notes).unwrap();
        assert_eq!(read_score_tsv(&path).unwrap(), notes);

        let listed = list_tsv_files(dir.path()).unwrap();
        assert_eq!(listed, vec![path]);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_score_tsv("/nonexistent/nowhere.tsv").unwrap_err();
        assert!(err.to_string().contains("nowhere.tsv"), "{err}");
    }
}
