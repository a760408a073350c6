//! One-dimensional space-time geometry of the Alice→Bob axis.
//!
//! Alice sits at position 0 and Bob at `L`. Light-cone predicates always use
//! the vacuum speed of light, even when the simulated medium is slower: an
//! adversary may replace the medium with a vacuum path.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::keymath::SPEED_OF_LIGHT;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpacetimeError {
    #[error("channel length must be positive and finite, got {0}")]
    Length(f64),
    #[error("refractive index must be >= 1, got {0}")]
    RefractiveIndex(f64),
    #[error("admission tolerance must satisfy 0 <= tol < pulse_separation / 2 ({half_separation} s), got {tolerance}")]
    Tolerance { tolerance: f64, half_separation: f64 },
    #[error("malformed sync transcript: {sent} send events vs {received} receive events")]
    TranscriptLength { sent: usize, received: usize },
    #[error("unknown event label `{0}`")]
    Label(String),
    #[error("malformed event line `{0}`")]
    Line(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventLabel {
    PulseEmit,
    PulseArrive,
    SyncBitSent,
    SyncBitReceived,
    EveDecision,
    EveMeasurement,
}

impl EventLabel {
    pub const ALL: [EventLabel; 6] = [
        EventLabel::PulseEmit,
        EventLabel::PulseArrive,
        EventLabel::SyncBitSent,
        EventLabel::SyncBitReceived,
        EventLabel::EveDecision,
        EventLabel::EveMeasurement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::PulseEmit => "pulse_emit",
            EventLabel::PulseArrive => "pulse_arrive",
            EventLabel::SyncBitSent => "sync_bit_sent",
            EventLabel::SyncBitReceived => "sync_bit_received",
            EventLabel::EveDecision => "eve_decision",
            EventLabel::EveMeasurement => "eve_measurement",
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventLabel {
    type Err = SpacetimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| SpacetimeError::Label(s.to_string()))
    }
}

/// A labelled point on the channel axis: position in meters, time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeEvent<T> {
    pub position: T,
    pub time: T,
    pub label: EventLabel,
}

impl<T: Real> SpacetimeEvent<T> {
    pub fn new(position: T, time: T, label: EventLabel) -> Self {
        Self { position, time, label }
    }
}

/// Vacuum light travel time over `distance` meters.
#[inline]
pub fn light_time<T: Real>(distance: T) -> T {
    distance.abs() / T::lit(SPEED_OF_LIGHT)
}

/// True iff a signal leaving `source` at speed `<= c` can reach `target`.
/// The lightlike boundary counts as reachable.
#[inline]
pub fn can_influence<T: Real>(source: &SpacetimeEvent<T>, target: &SpacetimeEvent<T>) -> bool {
    target.time - source.time >= light_time(target.position - source.position)
}

/// Events in the causal past of `decision`, in input order.
pub fn visible_history<T: Real>(decision: &SpacetimeEvent<T>, events: &[SpacetimeEvent<T>]) -> Vec<SpacetimeEvent<T>> {
    events.iter().filter(|e| can_influence(e, decision)).copied().collect()
}

/// Channel parameters Bob relies on for timing admission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry<T> {
    length: T,
    refractive_index: T,
    admission_tolerance: T,
}

impl<T: Real> ChannelGeometry<T> {
    /// `pulse_separation` bounds the tolerance: `0 <= tol < ΔT / 2`.
    pub fn new(
        length: T,
        refractive_index: T,
        admission_tolerance: T,
        pulse_separation: T,
    ) -> Result<Self, SpacetimeError> {
        if !(length.is_finite() && length > T::zero()) {
            return Err(SpacetimeError::Length(length.as_f64()));
        }
        if !(refractive_index.is_finite() && refractive_index >= T::one()) {
            return Err(SpacetimeError::RefractiveIndex(refractive_index.as_f64()));
        }
        let half = pulse_separation / T::lit(2.0);
        if !(admission_tolerance >= T::zero() && admission_tolerance < half) {
            return Err(SpacetimeError::Tolerance {
                tolerance: admission_tolerance.as_f64(),
                half_separation: half.as_f64(),
            });
        }
        Ok(Self {
            length,
            refractive_index,
            admission_tolerance,
        })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn refractive_index(&self) -> T {
        self.refractive_index
    }

    pub fn admission_tolerance(&self) -> T {
        self.admission_tolerance
    }

    /// Vacuum flight time `L / c`.
    pub fn vacuum_flight(&self) -> T {
        light_time(self.length)
    }

    /// Flight time through the medium, `L n / c`.
    pub fn medium_flight(&self) -> T {
        self.length * self.refractive_index / T::lit(SPEED_OF_LIGHT)
    }

    /// Latest admissible arrival at Bob for a pulse scheduled at `scheduled_emission`.
    pub fn admission_deadline(&self, scheduled_emission: T) -> T {
        scheduled_emission + self.vacuum_flight() + self.admission_tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accept,
    Ignore,
}

/// Bob's timing rule: signals delayed beyond `L/c` plus the tolerance are ignored.
#[inline]
pub fn admission_check<T: Real>(scheduled_emission: T, actual_arrival: T, geom: &ChannelGeometry<T>) -> Admission {
    if actual_arrival <= geom.admission_deadline(scheduled_emission) {
        Admission::Accept
    } else {
        Admission::Ignore
    }
}

/// Checks that every sync bit was received no earlier than light allows.
///
/// `false` means the transcript is physically impossible: the receive event
/// cannot carry the bit that was sent.
pub fn verify_sync_transcript<T: Real>(
    send_events: &[SpacetimeEvent<T>],
    receive_events: &[SpacetimeEvent<T>],
    geom: &ChannelGeometry<T>,
) -> Result<bool, SpacetimeError> {
    if send_events.len() != receive_events.len() {
        return Err(SpacetimeError::TranscriptLength {
            sent: send_events.len(),
            received: receive_events.len(),
        });
    }
    let flight = geom.vacuum_flight();
    Ok(send_events
        .iter()
        .zip(receive_events)
        .all(|(s, r)| r.time >= s.time + flight))
}

/// Formats an event as `label position_m time_ns`.
pub fn format_event_line<T: Real>(event: &SpacetimeEvent<T>) -> String {
    format!("{} {} {}", event.label, event.position, event.time * T::lit(1e9))
}

pub fn parse_event_line<T: Real + FromStr>(line: &str) -> Result<SpacetimeEvent<T>, SpacetimeError> {
    let mut parts = line.split_whitespace();
    let (Some(label), Some(pos), Some(time), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(SpacetimeError::Line(line.to_string()));
    };
    let label = label.parse()?;
    let position: T = pos.parse().map_err(|_| SpacetimeError::Line(line.to_string()))?;
    let time_ns: T = time.parse().map_err(|_| SpacetimeError::Line(line.to_string()))?;
    Ok(SpacetimeEvent::new(position, time_ns / T::lit(1e9), label))
}

pub fn write_event_trace<T: Real, W: Write>(events: &[SpacetimeEvent<T>], mut out: W) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}", format_event_line(e))?;
    }
    Ok(())
}

pub fn read_event_trace<T: Real + FromStr, R: BufRead>(input: R) -> io::Result<Vec<SpacetimeEvent<T>>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        events.push(parse_event_line(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(events)
}
