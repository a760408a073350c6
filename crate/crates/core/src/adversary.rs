//! Eavesdropping strategies run under light-cone enforcement.
//!
//! Eve sits at `x_E` on the channel axis and may replace the line with a
//! lossless vacuum path. For every pulse pair she takes two decisions, one
//! per pulse. Each decision is a space-time event; the strategy only sees
//! observations in that event's causal past and every observation it reads
//! is recorded in the decision's read set. [`validate_trace`] re-checks the
//! read sets against the light cone after the fact.
//!
//! In relativistic mode the reference decision happens when the reference
//! passes Eve, one pulse separation before the data pulse can be measured,
//! so the measurement outcome is outside the decision's past light cone. In
//! the non-relativistic baseline Bob does not enforce arrival deadlines and
//! Eve simply holds the reference until her joint measurement is done.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::keymath::{self, usd_success_prob};
use crate::protocol::PacketLedger;
use crate::spacetime::{can_influence, light_time, EventLabel};
use crate::{ChannelGeometry, DetectorParams, InterferometerParams, PulsePair, SecurityParams, SpacetimeEvent};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("eve position must lie strictly inside (0, {length}) m, got {position}")]
    Position { position: f64, length: f64 },
    #[error("resend mean photon number must be finite and >= 0, got {0}")]
    ResendMu(f64),
    #[error("reference pass probability must lie in [0, 1], got {0}")]
    PassProbability(f64),
    #[error("line transmittance must lie in ({system}, 1] (at least the lumped system transmittance), got {line}")]
    LineTransmittance { line: f64, system: f64 },
    #[error("no resend intensity reproduces the honest click rate: USD success {p_usd} is below the honest signal click probability {p_honest}")]
    Compensation { p_usd: f64, p_honest: f64 },
    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Relativistic,
    #[serde(alias = "nonrelativistic")]
    NonrelativisticBaseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Relativistic => "relativistic",
            Mode::NonrelativisticBaseline => "nonrelativistic_baseline",
        }
    }

    /// Bob enforces the arrival deadline only in relativistic mode.
    pub fn enforces_admission(self) -> bool {
        matches!(self, Mode::Relativistic)
    }
}

impl FromStr for Mode {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relativistic" => Ok(Mode::Relativistic),
            "nonrelativistic" | "nonrelativistic_baseline" | "baseline" => Ok(Mode::NonrelativisticBaseline),
            _ => Err(AdversaryError::Unknown {
                kind: "mode",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Honest,
    UsdBlockResend,
    InterceptResend,
    SyncShift,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Honest,
        StrategyKind::UsdBlockResend,
        StrategyKind::InterceptResend,
        StrategyKind::SyncShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Honest => "honest",
            StrategyKind::UsdBlockResend => "usd_block_resend",
            StrategyKind::InterceptResend => "intercept_resend",
            StrategyKind::SyncShift => "sync_shift",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AdversaryError::Unknown {
                kind: "strategy",
                value: s.to_string(),
            })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What Eve does with the reference pulse in relativistic mode, where she
/// cannot condition it on the data measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferencePolicy {
    PassAlways,
    BlockAlways,
    PassWithProb(f64),
}

impl fmt::Display for ReferencePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferencePolicy::PassAlways => f.write_str("pass_always"),
            ReferencePolicy::BlockAlways => f.write_str("block_always"),
            ReferencePolicy::PassWithProb(p) => write!(f, "pass_with_prob({p})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveConfig {
    pub position: f64,
    pub mode: Mode,
    pub strategy: StrategyKind,
    /// Mean photon number of Eve's retransmissions at her output.
    pub resend_mu: f64,
    pub reference_policy: ReferencePolicy,
    pub sync_shift_bits: usize,
    /// Transmittance of the line segment Eve replaces; the remainder of the
    /// lumped system transmittance sits inside Bob's receiver.
    pub line_transmittance: f64,
}

impl EveConfig {
    pub fn validate(&self, length: f64, system_transmittance: f64) -> Result<(), AdversaryError> {
        if !(self.position > 0.0 && self.position < length) {
            return Err(AdversaryError::Position {
                position: self.position,
                length,
            });
        }
        if !(self.resend_mu.is_finite() && self.resend_mu >= 0.0) {
            return Err(AdversaryError::ResendMu(self.resend_mu));
        }
        if let ReferencePolicy::PassWithProb(p) = self.reference_policy {
            if !(0.0..=1.0).contains(&p) {
                return Err(AdversaryError::PassProbability(p));
            }
        }
        if !(self.line_transmittance >= system_transmittance && self.line_transmittance <= 1.0) {
            return Err(AdversaryError::LineTransmittance {
                line: self.line_transmittance,
                system: system_transmittance,
            });
        }
        Ok(())
    }
}

/// Resend intensity that keeps Bob's statistics at honest levels.
///
/// Relativistic strategies resend exactly what the honest line would have
/// delivered. The baseline block/resend attack only resends after a
/// successful USD, so it brightens the resent pair until the click
/// probability of an anticorrelated slot matches the honest one exactly:
/// `P_USD (1 - e^{-B}) + (1 - P_USD) · 0 = 1 - e^{-A}` on the signal part.
pub fn compensated_resend_mu(
    mode: Mode,
    params: &SecurityParams,
    line_transmittance: f64,
    ifc: &InterferometerParams,
    det: &DetectorParams,
) -> Result<f64, AdversaryError> {
    let honest_line = params.mu() * line_transmittance;
    match mode {
        Mode::Relativistic => Ok(honest_line),
        Mode::NonrelativisticBaseline => {
            let fringe = (1.0 - ifc.visibility * params.phi().cos()) / 2.0;
            let per_alice_photon = det.efficiency * ifc.system_transmittance * fringe;
            let a = per_alice_photon * params.mu();
            let p_usd = usd_success_prob(params);
            let p_honest = -(-a).exp_m1();
            if p_usd <= p_honest {
                return Err(AdversaryError::Compensation { p_usd, p_honest });
            }
            // e^{-B} = 1 - p_honest / p_usd
            let b = -(-(p_honest / p_usd)).ln_1p();
            let alice_equivalent = b / per_alice_photon;
            Ok(alice_equivalent * line_transmittance)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Pass,
    Block,
    /// Fresh pulse of mean `mu` at Eve's output, phase relative to her reference.
    Resend {
        mu: f64,
        phase: f64,
    },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Pass => f.write_str("pass"),
            Action::Block => f.write_str("block"),
            Action::Resend { mu, phase } => write!(f, "resend({mu}, {phase})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsdOutcome {
    Identified(bool),
    Inconclusive,
}

/// Unambiguous discrimination of the data phase.
///
/// Succeeds with `P_USD(params)` and then always returns Alice's true bit;
/// the relativistic (data pulse only) and joint (both pulses) measurements
/// share the same success probability because the reference pulses are
/// identical.
pub fn usd_joint_measure<R: Rng + ?Sized>(pair: &PulsePair, params: &SecurityParams, rng: &mut R) -> UsdOutcome {
    let u: f64 = rng.random();
    if pair.data_present && u < usd_success_prob(params) {
        Identified(pair.data_phase > params.phi() / 2.0)
    } else {
        UsdOutcome::Inconclusive
    }
}

use UsdOutcome::Identified;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    None,
    Usd(UsdOutcome),
    Action(Action),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub event: SpacetimeEvent,
    pub payload: Payload,
}

/// Public timing of one slot, as far as Eve can know it from the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSchedule {
    pub index: usize,
    pub emit_ref: f64,
    pub emit_data: f64,
    pub eve_position: f64,
}

impl SlotSchedule {
    /// Earliest time the reference can reach Eve (vacuum path).
    pub fn ref_at_eve(&self) -> f64 {
        self.emit_ref + light_time(self.eve_position)
    }

    pub fn data_at_eve(&self) -> f64 {
        self.emit_data + light_time(self.eve_position)
    }
}

pub type ReadSet = SmallVec<[SpacetimeEvent; 4]>;

pub struct DecisionContext<'a> {
    decision: SpacetimeEvent,
    visible: &'a [Observation],
    read_set: ReadSet,
    slot: SlotSchedule,
}

impl<'a> DecisionContext<'a> {
    pub fn decision(&self) -> SpacetimeEvent {
        self.decision
    }

    pub fn slot(&self) -> SlotSchedule {
        self.slot
    }

    pub fn visible(&self) -> &'a [Observation] {
        self.visible
    }

    /// Reads the first visible observation with `label`, recording it.
    pub fn read(&mut self, label: EventLabel) -> Option<Observation> {
        let obs = self.visible.iter().find(|o| o.event.label == label).copied()?;
        self.read_set.push(obs.event);
        Some(obs)
    }

    /// Records that the decision used information tied to `event` obtained
    /// outside the visible set. The audit decides whether that was possible.
    pub fn declare_read(&mut self, event: SpacetimeEvent) {
        self.read_set.push(event);
    }
}

pub trait Strategy: Send {
    fn name(&self) -> &str;

    /// Whether Eve's apparatus performs a USD measurement each slot.
    fn measures(&self) -> bool;

    fn step_reference(&mut self, ctx: &mut DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Action;

    fn step_data(&mut self, ctx: &mut DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Action;
}

/// The strategies shipped with the simulator.
#[derive(Debug, Clone)]
pub struct BuiltinStrategy {
    kind: StrategyKind,
    mode: Mode,
    policy: ReferencePolicy,
    resend_mu: f64,
    phase_depth: f64,
}

impl BuiltinStrategy {
    pub fn new(config: &EveConfig, phase_depth: f64) -> Self {
        Self {
            kind: config.strategy,
            mode: config.mode,
            policy: config.reference_policy,
            resend_mu: config.resend_mu,
            phase_depth,
        }
    }

    fn outcome(ctx: &mut DecisionContext<'_>) -> UsdOutcome {
        match ctx.read(EventLabel::EveMeasurement).map(|o| o.payload) {
            Some(Payload::Usd(o)) => o,
            _ => UsdOutcome::Inconclusive,
        }
    }

    fn resend(&self, bit: bool) -> Action {
        Action::Resend {
            mu: self.resend_mu,
            phase: if bit { self.phase_depth } else { 0.0 },
        }
    }
}

impl Strategy for BuiltinStrategy {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn measures(&self) -> bool {
        matches!(self.kind, StrategyKind::UsdBlockResend | StrategyKind::InterceptResend)
    }

    fn step_reference(&mut self, ctx: &mut DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Action {
        match self.kind {
            StrategyKind::Honest | StrategyKind::SyncShift => Action::Pass,
            StrategyKind::UsdBlockResend | StrategyKind::InterceptResend => match self.mode {
                Mode::Relativistic => {
                    ctx.read(EventLabel::PulseArrive);
                    match self.policy {
                        ReferencePolicy::PassAlways => Action::Pass,
                        ReferencePolicy::BlockAlways => Action::Block,
                        ReferencePolicy::PassWithProb(p) => {
                            if rng.random::<f64>() < p {
                                Action::Pass
                            } else {
                                Action::Block
                            }
                        }
                    }
                }
                Mode::NonrelativisticBaseline => match Self::outcome(ctx) {
                    Identified(_) => self.resend(false),
                    UsdOutcome::Inconclusive if self.kind == StrategyKind::InterceptResend => self.resend(false),
                    UsdOutcome::Inconclusive => Action::Block,
                },
            },
        }
    }

    fn step_data(&mut self, ctx: &mut DecisionContext<'_>, rng: &mut ChaCha8Rng) -> Action {
        match self.kind {
            StrategyKind::Honest | StrategyKind::SyncShift => Action::Pass,
            StrategyKind::UsdBlockResend => match Self::outcome(ctx) {
                Identified(bit) => self.resend(bit),
                UsdOutcome::Inconclusive => Action::Block,
            },
            StrategyKind::InterceptResend => match Self::outcome(ctx) {
                Identified(bit) => self.resend(bit),
                UsdOutcome::Inconclusive => self.resend(rng.random()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub event: SpacetimeEvent,
    pub read_set: ReadSet,
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveDecisionTrace {
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceVerdict {
    Ok,
    Violation(usize),
}

/// True iff every read event lies in the decision's past light cone.
pub fn decision_is_causal(decision: &Decision) -> bool {
    decision.read_set.iter().all(|e| can_influence(e, &decision.event))
}

pub fn validate_trace(trace: &EveDecisionTrace) -> TraceVerdict {
    match trace.decisions.iter().position(|d| !decision_is_causal(d)) {
        Some(i) => TraceVerdict::Violation(i),
        None => TraceVerdict::Ok,
    }
}

/// A decision that read outside its past light cone.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("causality violation by `{strategy}` in slot {slot}: decision at x={} m, t={} s read {}", .decision.event.position, .decision.event.time, offending_reads(.decision))]
pub struct CausalityViolation {
    pub strategy: String,
    pub slot: usize,
    pub decision: Box<Decision>,
}

fn offending_reads(d: &Decision) -> String {
    d.read_set
        .iter()
        .filter(|e| !can_influence(e, &d.event))
        .map(|e| format!("{}@(x={} m, t={} s)", e.label, e.position, e.time))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditPolicy {
    /// Check each decision as it is made; keep counts only.
    Streaming,
    /// Keep the full decision trace for the packet.
    Retain,
}

/// One delivered pulse as seen at Bob's receiver input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivered {
    /// Mean referenced to Alice's output (Bob's receiver applies `η_sys`).
    pub mu: f64,
    pub phase: f64,
    pub arrival: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interception {
    pub reference: Option<Delivered>,
    pub data: Option<Delivered>,
    pub eve_knows: bool,
    pub events: SmallVec<[SpacetimeEvent; 8]>,
}

/// Eve's apparatus: drives a strategy slot by slot under the audit.
pub struct Eve {
    config: EveConfig,
    params: SecurityParams,
    strategy: Box<dyn Strategy>,
    audit: AuditPolicy,
    trace: EveDecisionTrace,
    decisions_checked: u64,
}

impl Eve {
    pub fn new(config: EveConfig, params: SecurityParams, strategy: Box<dyn Strategy>, audit: AuditPolicy) -> Self {
        Self {
            config,
            params,
            strategy,
            audit,
            trace: EveDecisionTrace::default(),
            decisions_checked: 0,
        }
    }

    pub fn builtin(config: EveConfig, params: SecurityParams, audit: AuditPolicy) -> Self {
        let strategy = Box::new(BuiltinStrategy::new(&config, params.phi()));
        Self::new(config, params, strategy, audit)
    }

    pub fn config(&self) -> &EveConfig {
        &self.config
    }

    pub fn strategy_name(&self) -> &str {
        self.strategy.name()
    }

    pub fn decisions_checked(&self) -> u64 {
        self.decisions_checked
    }

    /// Takes the trace accumulated so far (empty under streaming audit).
    pub fn take_trace(&mut self) -> EveDecisionTrace {
        std::mem::take(&mut self.trace)
    }

    fn record(&mut self, slot: usize, decision: Decision) -> Result<(), CausalityViolation> {
        self.decisions_checked += 1;
        if !decision_is_causal(&decision) {
            return Err(CausalityViolation {
                strategy: self.strategy.name().to_string(),
                slot,
                decision: Box::new(decision),
            });
        }
        if self.audit == AuditPolicy::Retain {
            self.trace.decisions.push(decision);
        }
        Ok(())
    }

    /// Runs both of Eve's decisions for one pulse pair.
    pub fn intercept(
        &mut self,
        slot_index: usize,
        pair: &PulsePair,
        geom: &ChannelGeometry,
        rng: &mut ChaCha8Rng,
    ) -> Result<Interception, CausalityViolation> {
        let x = self.config.position;
        let slot = SlotSchedule {
            index: slot_index,
            emit_ref: pair.emit_time_ref,
            emit_data: pair.emit_time_data,
            eve_position: x,
        };
        let t_ref = slot.ref_at_eve();
        let t_meas = slot.data_at_eve();

        let outcome = self
            .strategy
            .measures()
            .then(|| usd_joint_measure(pair, &self.params, rng));

        let mut observed: SmallVec<[Observation; 8]> = SmallVec::new();
        let mut push = |event, payload| observed.push(Observation { event, payload });
        push(
            SpacetimeEvent::new(0.0, pair.emit_time_ref, EventLabel::PulseEmit),
            Payload::None,
        );
        push(
            SpacetimeEvent::new(0.0, pair.emit_time_data, EventLabel::PulseEmit),
            Payload::None,
        );
        push(SpacetimeEvent::new(x, t_ref, EventLabel::PulseArrive), Payload::None);
        push(SpacetimeEvent::new(x, t_meas, EventLabel::PulseArrive), Payload::None);
        if let Some(o) = outcome {
            push(
                SpacetimeEvent::new(x, t_meas, EventLabel::EveMeasurement),
                Payload::Usd(o),
            );
        }

        let ref_event = match self.config.mode {
            Mode::Relativistic => SpacetimeEvent::new(x, t_ref, EventLabel::EveDecision),
            Mode::NonrelativisticBaseline => SpacetimeEvent::new(x, t_meas, EventLabel::EveDecision),
        };
        let visible: SmallVec<[Observation; 8]> = observed
            .iter()
            .filter(|o| can_influence(&o.event, &ref_event))
            .copied()
            .collect();
        let mut ctx = DecisionContext {
            decision: ref_event,
            visible: &visible,
            read_set: ReadSet::new(),
            slot,
        };
        let ref_action = self.strategy.step_reference(&mut ctx, rng);
        let read_set = ctx.read_set;
        self.record(
            slot_index,
            Decision {
                event: ref_event,
                read_set,
                action: ref_action,
            },
        )?;
        observed.push(Observation {
            event: ref_event,
            payload: Payload::Action(ref_action),
        });

        let data_event = SpacetimeEvent::new(x, t_meas.max(ref_event.time), EventLabel::EveDecision);
        let visible: SmallVec<[Observation; 8]> = observed
            .iter()
            .filter(|o| can_influence(&o.event, &data_event))
            .copied()
            .collect();
        let mut ctx = DecisionContext {
            decision: data_event,
            visible: &visible,
            read_set: ReadSet::new(),
            slot,
        };
        let data_action = self.strategy.step_data(&mut ctx, rng);
        let read_set = ctx.read_set;
        self.record(
            slot_index,
            Decision {
                event: data_event,
                read_set,
                action: data_action,
            },
        )?;

        // Forwarding over the vacuum path; in the baseline the held reference
        // leaves at decision time and the data follows one separation later.
        let downstream = light_time(geom.length() - x);
        let separation = pair.separation();
        let ref_departure = ref_event.time;
        let data_departure = match self.config.mode {
            Mode::Relativistic => data_event.time,
            Mode::NonrelativisticBaseline => ref_departure + separation,
        };
        let tau = self.config.line_transmittance;
        let deliver = |action: Action, mu: f64, phase: f64, present: bool, departure: f64| match action {
            Action::Pass if present => Some(Delivered {
                mu,
                phase,
                arrival: departure + downstream,
            }),
            Action::Pass | Action::Block => None,
            Action::Resend { mu, phase } => Some(Delivered {
                mu: mu / tau,
                phase,
                arrival: departure + downstream,
            }),
        };
        let reference = deliver(ref_action, pair.mu_ref, 0.0, pair.ref_present, ref_departure);
        let data = deliver(
            data_action,
            pair.mu_data,
            pair.data_phase,
            pair.data_present,
            data_departure,
        );

        let mut events: SmallVec<[SpacetimeEvent; 8]> = observed
            .iter()
            .filter(|o| o.event.position == x)
            .map(|o| o.event)
            .collect();
        events.push(data_event);

        Ok(Interception {
            reference,
            data,
            eve_knows: matches!(outcome, Some(Identified(_))),
            events,
        })
    }
}

/// Forges `m` consecutive sync bits delivered to Alice one slot early.
///
/// Eve cannot know Bob's bits yet, so each forged bit is a uniform guess.
/// Returns the forged slot range.
pub fn apply_sync_shift<R: Rng + ?Sized>(ledger: &mut PacketLedger, m: usize, rng: &mut R) -> Option<Range<usize>> {
    let len = ledger.sync_a.len();
    let m = m.min(len);
    if m == 0 {
        return None;
    }
    let start = rng.random_range(0..=len - m);
    for bit in &mut ledger.sync_a[start..start + m] {
        *bit = rng.random();
    }
    Some(start..start + m)
}

/// Re-exported for strategies that want the closed-form success probability.
pub fn success_probability(params: &SecurityParams) -> f64 {
    keymath::usd_success_prob(params)
}
