//! Runs a configured scenario packet by packet.

use thiserror::Error;

use super::config::{ConfigError, ScenarioConfig};
use crate::adversary::{validate_trace, AdversaryError, AuditPolicy, Eve, Strategy, TraceVerdict};
use crate::feedback::{probe_slots, run_cycle};
use crate::protocol::{run_packet, summarize, EventLog, PacketStats, ProtocolError, RunSummary};
use crate::streams::ScenarioStreams;
use crate::{BiasState, CycleReport, SpacetimeEvent};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("causality audit failed for `{strategy}` at decision {index} of packet {packet}")]
    Audit {
        strategy: String,
        packet: u64,
        index: usize,
    },
}

/// What the causality audit saw over a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditSummary {
    pub strategy: String,
    pub decisions_checked: u64,
    pub verdict_ok: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub packets: Vec<PacketStats>,
    pub summary: Option<RunSummary>,
    pub events: Vec<SpacetimeEvent>,
    pub feedback: Vec<CycleReport>,
    pub audit: Option<AuditSummary>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let eve = cfg
        .eve_config()?
        .map(|e| Eve::builtin(e, cfg.security_params(), cfg.eve.audit));
    run_with_eve(cfg, eve)
}

/// Runs `cfg` with a caller-supplied strategy in place of the built-in one.
pub fn run_with_strategy(cfg: &ScenarioConfig, strategy: Box<dyn Strategy>) -> Result<ScenarioOutcome, ScenarioError> {
    let mut c = cfg.clone();
    if c.eve.position.is_none() {
        c.eve.position = Some(c.channel.length / 2.0);
    }
    let e = c.eve_config()?.expect("explicit position places eve on the line");
    let eve = Eve::new(e, cfg.security_params(), strategy, cfg.eve.audit);
    run_with_eve(&c, Some(eve))
}

fn run_with_eve(cfg: &ScenarioConfig, mut eve: Option<Eve>) -> Result<ScenarioOutcome, ScenarioError> {
    cfg.validate()?;
    let pcfg = cfg.packet_config();
    pcfg.validate()?;
    let params = cfg.security_params();
    let mut link = cfg.link();
    let base_bias = link.interferometer.bias_phase;
    let mut streams = ScenarioStreams::new(cfg.run.seed);
    let mut log = (cfg.run.event_log_slots > 0).then(|| EventLog::new(cfg.run.event_log_slots));

    let fb = cfg.feedback.enabled.then(|| (cfg.feedback_config(), cfg.drift_model()));
    let slots = probe_slots(pcfg.calibration_windows, pcfg.symbol_rate);
    let mut bias = BiasState::new(cfg.feedback.initial_offset, cfg.feedback.rail);
    let mut cycles = Vec::new();

    let mut packets = Vec::with_capacity(cfg.run.packets as usize);
    for k in 0..cfg.run.packets {
        if let Some((fcfg, drift)) = &fb {
            let (next, report) = run_cycle(
                k,
                bias,
                drift,
                &link.interferometer,
                &link.detector,
                fcfg,
                slots,
                &mut streams.drift,
                &mut streams.probe,
            );
            bias = next;
            link.interferometer.bias_phase = base_bias + report.residual;
            cycles.push(report);
        }
        let ledger = run_packet(
            &pcfg,
            cfg.protocol.mu,
            &link,
            eve.as_mut(),
            &mut streams,
            pcfg.packet_start(k),
            log.as_mut(),
        )?;
        packets.push(PacketStats::from_ledger(k, &ledger)?);
        if let Some(e) = eve.as_mut() {
            if e.config().sync_shift_bits == 0 && !ledger.sync_causal {
                return Err(ProtocolError::Malformed(format!("packet {k}: sync transcript is superluminal")).into());
            }
            if cfg.eve.audit == AuditPolicy::Retain {
                if let TraceVerdict::Violation(index) = validate_trace(&e.take_trace()) {
                    return Err(ScenarioError::Audit {
                        strategy: e.strategy_name().to_string(),
                        packet: k,
                        index,
                    });
                }
            }
        }
    }

    Ok(ScenarioOutcome {
        summary: summarize(&packets, &params, &pcfg),
        packets,
        events: log.map(|l| l.events).unwrap_or_default(),
        feedback: cycles,
        audit: eve.map(|e| AuditSummary {
            strategy: e.strategy_name().to_string(),
            decisions_checked: e.decisions_checked(),
            verdict_ok: true,
        }),
    })
}
