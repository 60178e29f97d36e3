//! Standard MIDI file ingestion.
//!
//! [`parse_smf`] decodes SMF format 0/1 into a flat tick-sorted event list
//! plus a tempo map; [`extract_performance`] turns those events into
//! [`PerformanceNote`]s, matching note-on/off pairs per pitch (LIFO for
//! overlaps) and extending each release into a damper-lifting time while the
//! sustain pedal (controller 64) is at or above the threshold.
//!
//! Only the sustain pedal defines damper lifting; the sostenuto pedal has no
//! per-note semantics we could honor and is ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::score::PerformanceNote;

/// MIDI controller number for the sustain pedal.
pub const SUSTAIN_CONTROLLER: u8 = 64;

/// Pedal values at or above this count as "held" (half-pedal boundary).
pub const DEFAULT_PEDAL_THRESHOLD: u8 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MidiEventKind {
    NoteOn,
    NoteOff,
    ControlChange,
}

/// One channel event after track merging, with its absolute time.
///
/// Note-ons with velocity 0 are kept as written; [`extract_performance`]
/// treats them as note-offs.
#[derive(Clone, Debug)]
pub struct RawMidiEvent {
    pub tick: u64,
    /// Absolute seconds under the file's tempo map.
    pub sec: f64,
    pub kind: MidiEventKind,
    /// Pitch for note events, controller number for control changes.
    pub data: u8,
    /// Velocity for note events, controller value for control changes.
    pub value: u8,
    pub channel: u8,
}

/// Piecewise-constant tempo (µs per quarter) over ticks.
///
/// Segment boundaries carry exact integer µs·tick products, so a tick's
/// seconds incur a single floating-point rounding.
#[derive(Clone, Debug)]
pub struct TempoMap {
    ticks_per_quarter: u32,
    /// (start tick, µs per quarter, µs·tick accumulated before start).
    segments: Vec<(u64, u32, u128)>,
}

impl TempoMap {
    /// `changes` in merge order; later entries at the same tick win. A
    /// change at tick 0 replaces the 500000 µs/quarter default.
    fn new(ticks_per_quarter: u16, mut changes: Vec<(u64, u32)>) -> TempoMap {
        changes.sort_by_key(|&(tick, _)| tick);
        let mut flat: Vec<(u64, u32)> = vec![(0, 500_000)];
        for (tick, uspq) in changes {
            let last = flat.last_mut().unwrap();
            if last.0 == tick {
                last.1 = uspq;
            } else {
                flat.push((tick, uspq));
            }
        }
        let mut segments = Vec::with_capacity(flat.len());
        let mut acc: u128 = 0;
        for (i, &(start, uspq)) in flat.iter().enumerate() {
            segments.push((start, uspq, acc));
            if let Some(&(next, _)) = flat.get(i + 1) {
                acc += u128::from(next - start) * u128::from(uspq);
            }
        }
        TempoMap { ticks_per_quarter: u32::from(ticks_per_quarter), segments }
    }

    /// Absolute seconds of a tick.
    pub fn seconds_at(&self, tick: u64) -> f64 {
        let idx = self.segments.partition_point(|&(start, _, _)| start <= tick) - 1;
        let (start, uspq, acc) = self.segments[idx];
        let us_ticks = acc + u128::from(tick - start) * u128::from(uspq);
        us_ticks as f64 / (f64::from(self.ticks_per_quarter) * 1e6)
    }

    pub fn ticks_per_quarter(&self) -> u32 {
        self.ticks_per_quarter
    }
}

/// A decoded SMF: merged events in tick order and the tempo map that
/// produced their times.
#[derive(Clone, Debug)]
pub struct ParsedSmf {
    pub events: Vec<RawMidiEvent>,
    pub tempo_map: TempoMap,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MidiParse { offset: self.pos, msg: msg.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("unexpected end of data reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// SMF variable-length quantity, at most four bytes.
    fn varint(&mut self, what: &str) -> Result<u32> {
        let mut out: u32 = 0;
        for i in 0..4 {
            let b = self.u8(what)?;
            out = (out << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(out);
            }
            if i == 3 {
                break;
            }
        }
        self.pos -= 1;
        Err(self.err(format!("variable-length quantity in {what} exceeds four bytes")))
    }

    /// A data byte; the high bit must be clear.
    fn data_byte(&mut self, what: &str) -> Result<u8> {
        let b = self.u8(what)?;
        if b & 0x80 != 0 {
            self.pos -= 1;
            return Err(self.err(format!("expected data byte for {what}, got status {b:#04x}")));
        }
        Ok(b)
    }
}

/// Parses a format 0 or 1 Standard MIDI File.
///
/// Events from all tracks are merged and sorted by tick (stably, so
/// same-tick events keep track order), and each carries its absolute time
/// under the file's set-tempo map (default 500000 µs per quarter). Only
/// note and control-change events are kept. Errors carry the byte offset at
/// which decoding failed; a truncated chunk yields an error, never partial
/// output.
pub fn parse_smf(bytes: &[u8]) -> Result<ParsedSmf> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header chunk")? != b"MThd" {
        r.pos = 0;
        return Err(r.err("not a standard MIDI file (missing MThd)"));
    }
    let header_len = r.u32("header length")?;
    if header_len < 6 {
        return Err(r.err(format!("header chunk length {header_len} < 6")));
    }
    let format = r.u16("format")?;
    if format > 1 {
        r.pos -= 2;
        return Err(r.err(format!("unsupported SMF format {format} (only 0 and 1)")));
    }
    let ntrks = r.u16("track count")?;
    if format == 0 && ntrks != 1 {
        r.pos -= 2;
        return Err(r.err(format!("format 0 file declares {ntrks} tracks")));
    }
    let division = r.u16("time division")?;
    if division & 0x8000 != 0 {
        r.pos -= 2;
        return Err(r.err("SMPTE time division is not supported"));
    }
    if division == 0 {
        r.pos -= 2;
        return Err(r.err("time division of zero ticks per quarter"));
    }
    r.take(header_len as usize - 6, "header extension")?;

    // (tick, kind, data, value, channel) in read order; stable tick sort
    // afterwards keeps track order for simultaneous events.
    let mut events: Vec<(u64, MidiEventKind, u8, u8, u8)> = Vec::new();
    let mut tempo_changes: Vec<(u64, u32)> = Vec::new();

    let mut tracks_seen = 0u16;
    while tracks_seen < ntrks {
        let magic = r.take(4, "chunk type")?;
        let chunk_len = r.u32("chunk length")? as usize;
        if magic != b"MTrk" {
            r.take(chunk_len, "unknown chunk body")?;
            continue;
        }
        if r.bytes.len() - r.pos < chunk_len {
            return Err(r.err(format!(
                "track chunk declares {chunk_len} bytes, only {} remain",
                r.bytes.len() - r.pos
            )));
        }
        let end = r.pos + chunk_len;
        let mut tick: u64 = 0;
        let mut running: Option<u8> = None;
        while r.pos < end {
            tick += u64::from(r.varint("delta time")?);
            let first = r.u8("event status")?;
            let status = if first & 0x80 != 0 {
                first
            } else {
                r.pos -= 1;
                running.ok_or_else(|| r.err("data byte with no running status"))?
            };
            match status {
                0x80..=0xEF => {
                    running = Some(status);
                    let channel = status & 0x0F;
                    match status & 0xF0 {
                        0x80 => {
                            let pitch = r.data_byte("note-off pitch")?;
                            let velocity = r.data_byte("note-off velocity")?;
                            events.push((tick, MidiEventKind::NoteOff, pitch, velocity, channel));
                        }
                        0x90 => {
                            let pitch = r.data_byte("note-on pitch")?;
                            let velocity = r.data_byte("note-on velocity")?;
                            events.push((tick, MidiEventKind::NoteOn, pitch, velocity, channel));
                        }
                        0xB0 => {
                            let controller = r.data_byte("controller number")?;
                            let value = r.data_byte("controller value")?;
                            events.push((
                                tick,
                                MidiEventKind::ControlChange,
                                controller,
                                value,
                                channel,
                            ));
                        }
                        // Poly aftertouch and pitch bend carry two data
                        // bytes; program change and channel aftertouch one.
                        0xA0 | 0xE0 => {
                            r.data_byte("data byte")?;
                            r.data_byte("data byte")?;
                        }
                        _ => {
                            r.data_byte("data byte")?;
                        }
                    }
                }
                0xF0 | 0xF7 => {
                    running = None;
                    let len = r.varint("sysex length")? as usize;
                    r.take(len, "sysex body")?;
                }
                0xFF => {
                    running = None;
                    let meta = r.u8("meta event type")?;
                    let len = r.varint("meta event length")? as usize;
                    let body = r.take(len, "meta event body")?;
                    match meta {
                        0x51 => {
                            if len != 3 {
                                r.pos -= len;
                                return Err(
                                    r.err(format!("set-tempo meta event of length {len}, not 3"))
                                );
                            }
                            let uspq = u32::from_be_bytes([0, body[0], body[1], body[2]]);
                            tempo_changes.push((tick, uspq));
                        }
                        0x2F => {
                            r.pos = end;
                        }
                        _ => {}
                    }
                }
                _ => {
                    r.pos -= 1;
                    return Err(r.err(format!("unexpected status byte {status:#04x}")));
                }
            }
            if r.pos > end {
                r.pos = end;
                return Err(r.err("event runs past the end of its track chunk"));
            }
        }
        tracks_seen += 1;
    }

    events.sort_by_key(|&(tick, ..)| tick);
    let tempo_map = TempoMap::new(division, tempo_changes);
    let events = events
        .into_iter()
        .map(|(tick, kind, data, value, channel)| RawMidiEvent {
            tick,
            sec: tempo_map.seconds_at(tick),
            kind,
            data,
            value,
            channel,
        })
        .collect();
    Ok(ParsedSmf { events, tempo_map })
}

/// Derives performance notes from a time-ordered event stream.
///
/// A note's onset is its note-on time and its key release the matching
/// note-off (velocity-0 note-ons count as offs; overlapping same-pitch
/// notes match LIFO). The damper drop is the first time at or after the key
/// release at which the sustain pedal sits below `pedal_threshold` (the
/// release itself if the pedal is already down, the last event time if the
/// pedal never drops again).
///
/// Degenerate input never aborts the parse; it is repaired and reported:
/// unmatched note-offs are ignored, notes still held at end of file close
/// there, zero-length notes are widened to a microsecond, and pitches
/// outside the 88-key range are dropped. Notes come back sorted by onset
/// (ties by pitch), with ids `n0, n1, ...` in that order.
pub fn extract_performance(
    events: &[RawMidiEvent],
    pedal_threshold: u8,
) -> (Vec<PerformanceNote>, Vec<String>) {
    let mut warnings = Vec::new();
    let last_sec = events.last().map_or(0.0, |e| e.sec);

    let pedal: Vec<(f64, u8)> = events
        .iter()
        .filter(|e| e.kind == MidiEventKind::ControlChange && e.data == SUSTAIN_CONTROLLER)
        .map(|e| (e.sec, e.value))
        .collect();
    // First time >= t_off at which the pedal sits below the threshold; the
    // curve starts at 0 and holds its last value to end of file.
    let damper_drop = |t_off: f64| -> f64 {
        let mut held = false;
        for &(t, v) in &pedal {
            if t <= t_off {
                held = v >= pedal_threshold;
            } else if !held {
                break;
            } else if v < pedal_threshold {
                return t;
            }
        }
        if held {
            last_sec.max(t_off)
        } else {
            t_off
        }
    };

    let mut open: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    let mut closed: Vec<(f64, f64, u8)> = Vec::new();
    for e in events {
        match e.kind {
            MidiEventKind::NoteOn if e.value > 0 => {
                open.entry(e.data).or_default().push(e.sec);
            }
            MidiEventKind::NoteOn | MidiEventKind::NoteOff => {
                match open.get_mut(&e.data).and_then(Vec::pop) {
                    Some(onset) => closed.push((onset, e.sec, e.data)),
                    None => warnings.push(format!(
                        "note-off for pitch {} at {:.6} s matches no held note; ignored",
                        e.data, e.sec
                    )),
                }
            }
            MidiEventKind::ControlChange => {}
        }
    }
    for (pitch, stack) in open {
        for onset in stack {
            warnings.push(format!(
                "pitch {pitch} still held at end of file; closed at {last_sec:.6} s"
            ));
            closed.push((onset, last_sec, pitch));
        }
    }

    closed.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.total_cmp(&b.1))
    });

    let mut notes = Vec::with_capacity(closed.len());
    for (onset, mut release, pitch) in closed {
        if !(21..=108).contains(&pitch) {
            warnings.push(format!(
                "pitch {pitch} at {onset:.6} s is outside the piano range; dropped"
            ));
            continue;
        }
        if release <= onset {
            warnings.push(format!(
                "zero-length note (pitch {pitch}) at {onset:.6} s; widened to 1 µs"
            ));
            release = onset + 1e-6;
        }
        notes.push(PerformanceNote {
            id: format!("n{}", notes.len()),
            onset_sec: onset,
            key_release_sec: release,
            damper_drop_sec: damper_drop(release).max(release),
            pitch,
        });
    }
    (notes, warnings)
}

/// Reads and ingests one `.mid` file with the default pedal threshold.
pub fn ingest_midi_file(
    path: impl AsRef<std::path::Path>,
    pedal_threshold: u8,
) -> Result<(Vec<PerformanceNote>, Vec<String>)> {
    let bytes =
        std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref().to_path_buf(), e))?;
    let parsed = parse_smf(&bytes)?;
    Ok(extract_performance(&parsed.events, pedal_threshold))
}
