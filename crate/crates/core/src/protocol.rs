//! Packet-level protocol: handshake, sync-paced emission, detection,
//! sync comparison, sifting and QBER estimation.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::adversary::{apply_sync_shift, CausalityViolation, Eve, Interception};
use crate::keymath::{self, binary_entropy, critical_qber, holevo_bound, secret_fraction};
use crate::photonics::{dark_port_mean_photons, detection_from_uniform, Detection};
use crate::spacetime::{admission_check, light_time, verify_sync_transcript, Admission, EventLabel};
use crate::streams::ScenarioStreams;
use crate::{ChannelGeometry, DetectorParams, InterferometerParams, PulsePair, SecurityParams, SpacetimeEvent};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid packet configuration: {0}")]
    Config(String),
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error(transparent)]
    Causality(#[from] CausalityViolation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketConfig {
    pub packet_bits: usize,
    pub symbol_rate: f64,
    pub symbol_duration: f64,
    pub pulse_separation: f64,
    pub cycle_duration: f64,
    pub calibration_windows: [f64; 2],
    pub phase_depth: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self {
            packet_bits: 65536,
            symbol_rate: 25e6,
            symbol_duration: 10e-9,
            pulse_separation: 20e-9,
            cycle_duration: 16e-3,
            calibration_windows: [4e-3, 4e-3],
            phase_depth: 0.8 * std::f64::consts::PI,
        }
    }
}

impl PacketConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let fail = |m: String| Err(ProtocolError::Config(m));
        if self.packet_bits == 0 {
            return fail("packet_bits must be > 0".into());
        }
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return fail(format!("symbol_rate must be > 0, got {}", self.symbol_rate));
        }
        if !(self.symbol_duration > 0.0 && self.pulse_separation > self.symbol_duration) {
            return fail(format!(
                "pulse_separation ({}) must exceed symbol_duration ({})",
                self.pulse_separation, self.symbol_duration
            ));
        }
        if self.calibration_windows.iter().any(|w| w.is_nan() || *w < 0.0) {
            return fail("calibration windows must be >= 0".into());
        }
        if self.qkd_start() + self.packet_duration() > self.cycle_duration {
            return fail(format!(
                "calibration windows ({} s) plus packet ({} s) exceed cycle_duration ({} s)",
                self.qkd_start(),
                self.packet_duration(),
                self.cycle_duration
            ));
        }
        if !(self.phase_depth > 0.0 && self.phase_depth <= std::f64::consts::PI) {
            return fail(format!("phase_depth must lie in (0, pi], got {}", self.phase_depth));
        }
        Ok(())
    }

    /// Offset of the QKD sequence inside a cycle, after both probe windows.
    pub fn qkd_start(&self) -> f64 {
        self.calibration_windows[0] + self.calibration_windows[1]
    }

    pub fn packet_duration(&self) -> f64 {
        self.packet_bits as f64 / self.symbol_rate
    }

    /// Scheduled start of packet `k`; one packet per cycle.
    pub fn packet_start(&self, k: u64) -> f64 {
        k as f64 * self.cycle_duration + self.qkd_start()
    }

    pub fn slot_time(&self, packet_start: f64, i: usize) -> f64 {
        packet_start + i as f64 / self.symbol_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handshake {
    Proceed,
    Abort,
}

pub fn run_handshake(alice_ready: bool, bob_ready: bool) -> Handshake {
    if alice_ready && bob_ready {
        Handshake::Proceed
    } else {
        Handshake::Abort
    }
}

/// Fixed physical layer between Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub geometry: ChannelGeometry,
    pub detector: DetectorParams,
    pub interferometer: InterferometerParams,
    pub enforce_admission: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PacketLedger {
    pub phm_a: Vec<bool>,
    pub sync_a: Vec<bool>,
    pub phm_b: Vec<bool>,
    pub sync_b: Vec<bool>,
    pub spd_b: Vec<bool>,
    pub slot_times: Vec<f64>,
    /// Clicks with at least one detected photon (the rest are dark-only).
    pub photon_click: Vec<bool>,
    /// Slots where Eve identified Alice's bit.
    pub eve_knows: Vec<bool>,
    /// Slots whose sync bit Eve forged.
    pub forged: Option<Range<usize>>,
    /// Whether every sync bit arrived no earlier than light allows.
    pub sync_causal: bool,
}

impl PacketLedger {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            phm_a: Vec::with_capacity(n),
            sync_a: Vec::with_capacity(n),
            phm_b: Vec::with_capacity(n),
            sync_b: Vec::with_capacity(n),
            spd_b: Vec::with_capacity(n),
            slot_times: Vec::with_capacity(n),
            photon_click: Vec::with_capacity(n),
            eve_knows: Vec::with_capacity(n),
            forged: None,
            sync_causal: true,
        }
    }

    pub fn len(&self) -> usize {
        self.spd_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spd_b.is_empty()
    }

    pub fn clicks(&self) -> usize {
        self.spd_b.iter().filter(|c| **c).count()
    }
}

/// Collects space-time events for the first `limit` slots of each packet.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub limit: usize,
    pub events: Vec<SpacetimeEvent>,
}

impl EventLog {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            events: Vec::new(),
        }
    }
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

/// Runs one packet starting at `packet_start`.
///
/// Every slot consumes exactly one detector draw, whatever happens on the
/// channel, so the detector stream stays aligned across scenarios.
#[allow(clippy::too_many_arguments)]
pub fn run_packet(
    cfg: &PacketConfig,
    mu: f64,
    link: &Link,
    mut eve: Option<&mut Eve>,
    streams: &mut ScenarioStreams,
    packet_start: f64,
    mut log: Option<&mut EventLog>,
) -> Result<PacketLedger, ProtocolError> {
    let n = cfg.packet_bits;
    let geom = &link.geometry;
    let phi = cfg.phase_depth;
    let dt = cfg.pulse_separation;
    let length = geom.length();
    let sync_flight = geom.medium_flight();
    let slot_period = 1.0 / cfg.symbol_rate;

    let mut ledger = PacketLedger::with_capacity(n);
    ledger.phm_a = random_bits(&mut streams.alice_bits, n);
    ledger.phm_b = random_bits(&mut streams.bob_bits, n);
    ledger.sync_b = random_bits(&mut streams.sync_bits, n);
    ledger.sync_a = ledger.sync_b.clone();
    ledger.slot_times = (0..n).map(|i| cfg.slot_time(packet_start, i)).collect();

    let shift = eve.as_deref().map_or(0, |e| e.config().sync_shift_bits);
    if shift > 0 {
        ledger.forged = apply_sync_shift(&mut ledger, shift, &mut streams.eve);
    }

    // Alice emits on receipt of each sync bit; forged bits reach her one slot early.
    let receive_time = |i: usize, forged: &Option<Range<usize>>| {
        let t = ledger.slot_times[i];
        match forged {
            Some(r) if r.contains(&i) => t - slot_period,
            _ => t,
        }
    };
    let sent: Vec<SpacetimeEvent> = ledger
        .slot_times
        .iter()
        .map(|t| SpacetimeEvent::new(length, t - sync_flight, EventLabel::SyncBitSent))
        .collect();
    let received: Vec<SpacetimeEvent> = (0..n)
        .map(|i| SpacetimeEvent::new(0.0, receive_time(i, &ledger.forged), EventLabel::SyncBitReceived))
        .collect();
    ledger.sync_causal =
        verify_sync_transcript(&sent, &received, geom).map_err(|e| ProtocolError::Malformed(e.to_string()))?;

    let honest_flight = geom.medium_flight();
    let det = &link.detector;
    let ifc = &link.interferometer;
    let admit = |sched: f64, arrival: f64| {
        !link.enforce_admission || admission_check(sched, arrival, geom) == Admission::Accept
    };

    for i in 0..n {
        let t = ledger.slot_times[i];
        let a = ledger.phm_a[i];
        let b = ledger.phm_b[i];
        let bob_phase = if b { phi } else { 0.0 };
        let emitted = PulsePair::emit(mu, if a { phi } else { 0.0 }, t, dt);

        let (at_bob, arrivals, knows, eve_events) = match eve.as_deref_mut() {
            None => {
                let ra = t + honest_flight;
                let da = t + dt + honest_flight;
                let mut p = emitted;
                p.ref_present = admit(t, ra);
                p.data_present = admit(t + dt, da);
                (p, [Some(ra), Some(da)], false, None)
            }
            Some(eve) => {
                let Interception {
                    reference,
                    data,
                    eve_knows,
                    events,
                } = eve.intercept(i, &emitted, geom, &mut streams.eve)?;
                let reference = reference.filter(|d| admit(t, d.arrival));
                let data = data.filter(|d| admit(t + dt, d.arrival));
                let (ref_phase, data_phase) = (reference.map_or(0.0, |d| d.phase), data.map_or(0.0, |d| d.phase));
                let p = PulsePair {
                    mu_ref: reference.map_or(0.0, |d| d.mu),
                    mu_data: data.map_or(0.0, |d| d.mu),
                    data_phase: data_phase - ref_phase,
                    ref_present: reference.is_some(),
                    data_present: data.is_some(),
                    emit_time_ref: t,
                    emit_time_data: t + dt,
                };
                (
                    p,
                    [reference.map(|d| d.arrival), data.map(|d| d.arrival)],
                    eve_knows,
                    Some(events),
                )
            }
        };

        let mean = dark_port_mean_photons(&at_bob, bob_phase, ifc);
        let u: f64 = streams.detector.random();
        let detection = detection_from_uniform(u, mean, det);
        ledger.spd_b.push(detection.clicked());
        ledger.photon_click.push(detection == Detection::Photon);
        ledger.eve_knows.push(knows);

        if let Some(log) = log.as_deref_mut() {
            if i < log.limit {
                log.events.push(sent[i]);
                log.events.push(received[i]);
                log.events.push(SpacetimeEvent::new(0.0, t, EventLabel::PulseEmit));
                log.events.push(SpacetimeEvent::new(0.0, t + dt, EventLabel::PulseEmit));
                if let Some(ev) = eve_events {
                    log.events.extend(ev);
                }
                for arrival in arrivals.into_iter().flatten() {
                    log.events
                        .push(SpacetimeEvent::new(length, arrival, EventLabel::PulseArrive));
                }
            }
        }
    }
    // Light-time sanity: the honest schedule itself is causal.
    debug_assert!(honest_flight >= light_time(length));
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncVerdict {
    Keep,
    Discard,
}

pub fn compare_sync(ledger: &PacketLedger) -> Result<SyncVerdict, ProtocolError> {
    if ledger.sync_a.len() != ledger.sync_b.len() {
        return Err(ProtocolError::Malformed(format!(
            "SYNC_A has {} bits, SYNC_B has {}",
            ledger.sync_a.len(),
            ledger.sync_b.len()
        )));
    }
    Ok(if ledger.sync_a == ledger.sync_b {
        SyncVerdict::Keep
    } else {
        SyncVerdict::Discard
    })
}

/// Keeps clicked slots; Bob inverts his bits.
pub fn sift(ledger: &PacketLedger) -> (Vec<bool>, Vec<bool>) {
    ledger
        .spd_b
        .iter()
        .zip(ledger.phm_a.iter().zip(&ledger.phm_b))
        .filter(|(click, _)| **click)
        .map(|(_, (a, b))| (*a, !*b))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub ci: (f64, f64),
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    Some((lo, hi))
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// `None` for empty keys (no data).
pub fn estimate_qber(alice: &[bool], bob: &[bool]) -> Result<Option<QberEstimate>, ProtocolError> {
    if alice.len() != bob.len() {
        return Err(ProtocolError::Malformed(format!(
            "sifted keys differ in length: {} vs {}",
            alice.len(),
            bob.len()
        )));
    }
    let n = alice.len() as u64;
    let errors = hamming(alice, bob) as u64;
    Ok(wilson_interval(errors, n, Z_95).map(|ci| QberEstimate {
        qber: errors as f64 / n as f64,
        ci,
    }))
}

/// Per-packet bookkeeping after sync comparison and sifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PacketStats {
    pub index: u64,
    pub kept: bool,
    pub slots: u64,
    pub clicks: u64,
    pub errors: u64,
    pub photon_clicks: u64,
    pub eve_known: u64,
    pub eve_known_photon: u64,
}

impl PacketStats {
    pub fn from_ledger(index: u64, ledger: &PacketLedger) -> Result<Self, ProtocolError> {
        let kept = compare_sync(ledger)? == SyncVerdict::Keep;
        let mut s = PacketStats {
            index,
            kept,
            slots: ledger.len() as u64,
            ..Default::default()
        };
        for i in 0..ledger.len() {
            if !ledger.spd_b[i] {
                continue;
            }
            s.clicks += 1;
            s.errors += u64::from(ledger.phm_a[i] == ledger.phm_b[i]);
            let photon = ledger.photon_click[i];
            let known = ledger.eve_knows[i];
            s.photon_clicks += u64::from(photon);
            s.eve_known += u64::from(known);
            s.eve_known_photon += u64::from(known && photon);
        }
        Ok(s)
    }

    /// Packet QBER, `None` without clicks.
    pub fn qber(&self) -> Option<f64> {
        (self.clicks > 0).then(|| self.errors as f64 / self.clicks as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub packets_total: u64,
    pub packets_discarded: u64,
    pub slots: u64,
    pub clicks: u64,
    pub sifted_length: u64,
    pub errors: u64,
    pub qber: Option<f64>,
    pub qber_ci: Option<(f64, f64)>,
    pub chi: f64,
    pub h_qber: Option<f64>,
    pub secret_fraction: Option<f64>,
    pub critical_qber: f64,
    pub secret_bits_per_packet: f64,
    pub clicks_per_pulse: f64,
    pub raw_rate_in_packet: f64,
    pub secret_rate_in_packet: f64,
    pub photon_clicks: u64,
    pub eve_known: u64,
    pub eve_known_photon: u64,
}

impl RunSummary {
    /// True when no kept packet produced a sifted bit.
    pub fn no_data(&self) -> bool {
        self.qber.is_none()
    }

    pub fn eve_known_fraction(&self) -> Option<f64> {
        (self.sifted_length > 0).then(|| self.eve_known as f64 / self.sifted_length as f64)
    }

    pub fn eve_known_photon_fraction(&self) -> Option<f64> {
        (self.photon_clicks > 0).then(|| self.eve_known_photon as f64 / self.photon_clicks as f64)
    }
}

/// Aggregates kept packets; `None` when every packet was discarded.
pub fn summarize(stats: &[PacketStats], params: &SecurityParams, cfg: &PacketConfig) -> Option<RunSummary> {
    let kept: Vec<&PacketStats> = stats.iter().filter(|s| s.kept).collect();
    if kept.is_empty() {
        return None;
    }
    let n_kept = kept.len() as f64;
    let sum = |f: fn(&PacketStats) -> u64| kept.iter().map(|s| f(s)).sum::<u64>();
    let slots = sum(|s| s.slots);
    let clicks = sum(|s| s.clicks);
    let errors = sum(|s| s.errors);
    let chi = holevo_bound(params);
    let qber = (clicks > 0).then(|| errors as f64 / clicks as f64);
    let qber_ci = wilson_interval(errors, clicks, Z_95);
    let h_qber = qber.map(|q| binary_entropy(q).expect("qber is a probability"));
    let r = qber.map(|q| secret_fraction(params, q).expect("qber is a probability"));
    let sifted_per_packet = clicks as f64 / n_kept;
    let secret_bits_per_packet = r.map_or(0.0, |r| r.max(0.0) * sifted_per_packet);
    let clicks_per_pulse = if slots > 0 { clicks as f64 / slots as f64 } else { 0.0 };
    let raw_rate_in_packet = clicks_per_pulse * cfg.symbol_rate;
    Some(RunSummary {
        packets_total: stats.len() as u64,
        packets_discarded: (stats.len() - kept.len()) as u64,
        slots,
        clicks,
        sifted_length: clicks,
        errors,
        qber,
        qber_ci,
        chi,
        h_qber,
        secret_fraction: r,
        critical_qber: critical_qber(params),
        secret_bits_per_packet,
        clicks_per_pulse,
        raw_rate_in_packet,
        secret_rate_in_packet: r.map_or(0.0, |r| r.max(0.0)) * raw_rate_in_packet,
        photon_clicks: sum(|s| s.photon_clicks),
        eve_known: sum(|s| s.eve_known),
        eve_known_photon: sum(|s| s.eve_known_photon),
    })
}

/// Closed-form probability that one honest slot clicks, averaged over bits.
pub fn honest_click_probability(mu: f64, link: &Link, phi: f64) -> f64 {
    let ifc = &link.interferometer;
    let det = &link.detector;
    let mut total = 0.0;
    for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
        let pair = PulsePair::emit(mu, if a { phi } else { 0.0 }, 0.0, 1.0);
        let mean = dark_port_mean_photons(&pair, if b { phi } else { 0.0 }, ifc);
        total += crate::photonics::click_probability(mean, det);
    }
    total / 4.0
}

/// Closed-form honest QBER: clicks in matched-bit slots over all clicks.
pub fn honest_qber(mu: f64, link: &Link, phi: f64) -> f64 {
    let ifc = &link.interferometer;
    let det = &link.detector;
    let click = |a: bool, b: bool| {
        let pair = PulsePair::emit(mu, if a { phi } else { 0.0 }, 0.0, 1.0);
        crate::photonics::click_probability(dark_port_mean_photons(&pair, if b { phi } else { 0.0 }, ifc), det)
    };
    let wrong = click(false, false) + click(true, true);
    let right = click(false, true) + click(true, false);
    wrong / (wrong + right)
}

/// Secret bits per sifted bit from a measured QBER, clipped at zero.
pub fn extractable(params: &SecurityParams, qber: f64) -> keymath::Result<f64> {
    Ok(secret_fraction(params, qber)?.max(0.0))
}
