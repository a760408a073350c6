//! CSV and `key: value` writers.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::scenario::ScenarioOutcome;
use crate::protocol::{honest_click_probability, PacketStats, RunSummary};
use crate::spacetime::write_event_trace;
use crate::CycleReport;

pub const PACKET_HEADER: &str = "packet_index,kept,clicks,errors,qber";
pub const FEEDBACK_HEADER: &str = "cycle_index,true_offset,bias_setting,error_signal,counts_plus,counts_minus";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRow {
    pub packet_index: u64,
    pub kept: bool,
    pub clicks: u64,
    pub errors: u64,
    pub qber: Option<f64>,
}

impl From<&PacketStats> for PacketRow {
    fn from(s: &PacketStats) -> Self {
        Self {
            packet_index: s.index,
            kept: s.kept,
            clicks: s.clicks,
            errors: s.errors,
            qber: s.qber(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRow {
    pub cycle_index: u64,
    pub true_offset: f64,
    pub bias_setting: f64,
    pub error_signal: f64,
    pub counts_plus: u64,
    pub counts_minus: u64,
}

fn csv_error(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_rows<W: Write, S: Serialize>(rows: impl IntoIterator<Item = S>, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_packets_csv<W: Write>(packets: &[PacketStats], mut out: W) -> io::Result<()> {
    if packets.is_empty() {
        return writeln!(out, "{PACKET_HEADER}");
    }
    write_rows(packets.iter().map(PacketRow::from), out)
}

pub fn write_feedback_csv<W: Write>(cycles: &[CycleReport], mut out: W) -> io::Result<()> {
    if cycles.is_empty() {
        return writeln!(out, "{FEEDBACK_HEADER}");
    }
    write_rows(
        cycles.iter().map(|c| FeedbackRow {
            cycle_index: c.cycle,
            true_offset: c.true_offset,
            bias_setting: c.bias_setting,
            error_signal: c.error_signal,
            counts_plus: c.counts_plus,
            counts_minus: c.counts_minus,
        }),
        out,
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "no-data".to_string(), |x| x.to_string())
}

/// Ordered `key: value` pairs of a run summary.
pub fn summary_pairs(
    cfg: &ScenarioConfig,
    summary: Option<&RunSummary>,
    packets: &[PacketStats],
) -> Vec<(&'static str, String)> {
    let mut v = vec![
        ("seed", cfg.run.seed.to_string()),
        ("mu", cfg.protocol.mu.to_string()),
        ("phase_depth", cfg.protocol.phase_depth.to_string()),
        ("mode", cfg.eve.mode.to_string()),
        ("strategy", cfg.eve.strategy.to_string()),
    ];
    match summary {
        None => {
            v.push(("status", "no-data".into()));
            v.push(("packets_total", packets.len().to_string()));
            v.push((
                "packets_discarded",
                packets.iter().filter(|p| !p.kept).count().to_string(),
            ));
        }
        Some(s) => {
            v.push(("status", if s.no_data() { "no-data" } else { "ok" }.into()));
            v.push(("packets_total", s.packets_total.to_string()));
            v.push(("packets_discarded", s.packets_discarded.to_string()));
            v.push(("slots", s.slots.to_string()));
            v.push(("clicks", s.clicks.to_string()));
            v.push(("sifted_length", s.sifted_length.to_string()));
            v.push(("errors", s.errors.to_string()));
            v.push(("qber", opt(s.qber)));
            v.push(("qber_ci_low", opt(s.qber_ci.map(|c| c.0))));
            v.push(("qber_ci_high", opt(s.qber_ci.map(|c| c.1))));
            v.push(("chi", s.chi.to_string()));
            v.push(("h_qber", opt(s.h_qber)));
            v.push(("secret_fraction", opt(s.secret_fraction)));
            v.push(("critical_qber", s.critical_qber.to_string()));
            v.push(("secret_bits_per_packet", s.secret_bits_per_packet.to_string()));
            v.push(("clicks_per_pulse", s.clicks_per_pulse.to_string()));
            v.push(("raw_rate_in_packet", s.raw_rate_in_packet.to_string()));
            v.push(("secret_rate_in_packet", s.secret_rate_in_packet.to_string()));
        }
    }
    v
}

pub fn write_pairs<W: Write>(pairs: &[(&str, String)], mut out: W) -> io::Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{k}: {v}")?;
    }
    Ok(())
}

/// Parses `key: value` lines back into pairs.
pub fn parse_pairs(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn write_summary<W: Write>(cfg: &ScenarioConfig, outcome: &ScenarioOutcome, out: W) -> io::Result<()> {
    write_pairs(&summary_pairs(cfg, outcome.summary.as_ref(), &outcome.packets), out)
}

pub fn write_events<W: Write>(outcome: &ScenarioOutcome, out: W) -> io::Result<()> {
    write_event_trace(&outcome.events, out)
}

/// Attack-specific findings on top of the run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub honest_clicks_per_pulse: f64,
    pub clicks_per_pulse: f64,
    pub induced_loss: f64,
    pub qber: Option<f64>,
    pub critical_qber: f64,
    pub eve_known_fraction: Option<f64>,
    pub eve_known_photon_fraction: Option<f64>,
    pub discard_fraction: f64,
    pub decisions_checked: u64,
    pub audit_ok: bool,
    pub extractable_secret: bool,
}

pub fn attack_report(cfg: &ScenarioConfig, outcome: &ScenarioOutcome) -> AttackReport {
    let honest = honest_click_probability(cfg.protocol.mu, &cfg.link(), cfg.protocol.phase_depth);
    let params = cfg.security_params();
    let critical = crate::keymath::critical_qber(&params);
    let s = outcome.summary.as_ref();
    let clicks_per_pulse = s.map_or(0.0, |s| s.clicks_per_pulse);
    let qber = s.and_then(|s| s.qber);
    let total = outcome.packets.len().max(1) as f64;
    let discarded = outcome.packets.iter().filter(|p| !p.kept).count() as f64;
    let audit = outcome.audit.as_ref();
    AttackReport {
        honest_clicks_per_pulse: honest,
        clicks_per_pulse,
        induced_loss: if honest > 0.0 {
            1.0 - clicks_per_pulse / honest
        } else {
            0.0
        },
        qber,
        critical_qber: critical,
        eve_known_fraction: s.and_then(|s| s.eve_known_fraction()),
        eve_known_photon_fraction: s.and_then(|s| s.eve_known_photon_fraction()),
        discard_fraction: discarded / total,
        decisions_checked: audit.map_or(0, |a| a.decisions_checked),
        audit_ok: audit.is_none_or(|a| a.verdict_ok),
        extractable_secret: qber.is_some_and(|q| q < critical),
    }
}

pub fn attack_pairs(cfg: &ScenarioConfig, outcome: &ScenarioOutcome, r: &AttackReport) -> Vec<(&'static str, String)> {
    let mut v = summary_pairs(cfg, outcome.summary.as_ref(), &outcome.packets);
    v.push(("honest_clicks_per_pulse", r.honest_clicks_per_pulse.to_string()));
    v.push(("induced_loss", r.induced_loss.to_string()));
    v.push(("discard_fraction", r.discard_fraction.to_string()));
    v.push(("eve_known_fraction", opt(r.eve_known_fraction)));
    v.push(("eve_known_photon_fraction", opt(r.eve_known_photon_fraction)));
    v.push(("audit", if r.audit_ok { "ok" } else { "violation" }.into()));
    v.push(("audit_decisions", r.decisions_checked.to_string()));
    v.push((
        "extractable_secret",
        if r.extractable_secret { "yes" } else { "no" }.into(),
    ));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packet_csv_roundtrip() {
        let stats = vec![
            PacketStats {
                index: 0,
                kept: true,
                slots: 10,
                clicks: 4,
                errors: 1,
                ..Default::default()
            },
            PacketStats {
                index: 1,
                kept: false,
                slots: 10,
                clicks: 0,
                errors: 0,
                ..Default::default()
            },
        ];
        let mut buf = Vec::new();
        write_packets_csv(&stats, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), PACKET_HEADER);
        let rows: Vec<PacketRow> = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(rows, stats.iter().map(PacketRow::from).collect::<Vec<_>>());
        assert_eq!(rows[0].qber, Some(0.25));
        assert_eq!(rows[1].qber, None);
    }

    #[test]
    fn empty_csvs_still_have_headers() {
        let mut buf = Vec::new();
        write_packets_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), PACKET_HEADER);
        let mut buf = Vec::new();
        write_feedback_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), FEEDBACK_HEADER);
    }

    #[test]
    fn pairs_roundtrip() {
        let pairs = vec![("a", "1".to_string()), ("qber", "0.041".to_string())];
        let mut buf = Vec::new();
        write_pairs(&pairs, &mut buf).unwrap();
        let back = parse_pairs(std::str::from_utf8(&buf).unwrap());
        assert_eq!(back[1], ("qber".to_string(), "0.041".to_string()));
    }
}
