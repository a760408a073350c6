//! Scenario configuration (TOML).
//!
//! Every key is optional and falls back to the default scenario. Unknown
//! keys are rejected. Quantities accept unit strings (see [`super::units`]).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::units;
use crate::adversary::{AuditPolicy, EveConfig, Mode, ReferencePolicy, StrategyKind};
use crate::protocol::{Link, PacketConfig};
use crate::{ChannelGeometry, DetectorParams, DriftModel, FeedbackConfig, InterferometerParams, SecurityParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", format_issues(.0))]
    Invalid(Vec<Issue>),
}

/// One offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn format_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub packets: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Slots per packet whose space-time events go to events.txt.
    pub event_log_slots: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            packets: 256,
            output: None,
            event_log_slots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub packet_bits: usize,
    #[serde(deserialize_with = "units::frequency")]
    pub symbol_rate: f64,
    #[serde(deserialize_with = "units::time")]
    pub symbol_duration: f64,
    #[serde(deserialize_with = "units::time")]
    pub pulse_separation: f64,
    #[serde(deserialize_with = "units::time")]
    pub cycle_duration: f64,
    #[serde(deserialize_with = "units::time_pair")]
    pub calibration_windows: [f64; 2],
    #[serde(deserialize_with = "units::angle")]
    pub phase_depth: f64,
    #[serde(deserialize_with = "units::number")]
    pub mu: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = PacketConfig::default();
        Self {
            packet_bits: p.packet_bits,
            symbol_rate: p.symbol_rate,
            symbol_duration: p.symbol_duration,
            pulse_separation: p.pulse_separation,
            cycle_duration: p.cycle_duration,
            calibration_windows: p.calibration_windows,
            phase_depth: p.phase_depth,
            mu: 0.116,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(deserialize_with = "units::length")]
    pub length: f64,
    #[serde(deserialize_with = "units::number")]
    pub refractive_index: f64,
    #[serde(deserialize_with = "units::time")]
    pub admission_tolerance: f64,
    /// Transmittance of the line itself (13 dB by default).
    #[serde(deserialize_with = "units::number")]
    pub line_transmittance: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            length: 180.0,
            refractive_index: 1.0002804,
            admission_tolerance: 1e-9,
            line_transmittance: 10f64.powf(-1.3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(deserialize_with = "units::number")]
    pub efficiency: f64,
    #[serde(deserialize_with = "units::frequency")]
    pub dark_rate: f64,
    #[serde(deserialize_with = "units::time")]
    pub gate_duration: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            efficiency: 0.35,
            dark_rate: 700.0,
            gate_duration: 10e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferometerSection {
    #[serde(deserialize_with = "units::number")]
    pub visibility: f64,
    #[serde(deserialize_with = "units::angle")]
    pub bias_phase: f64,
    /// End-to-end efficiency including the detector's quantum efficiency.
    #[serde(deserialize_with = "units::number")]
    pub system_efficiency: f64,
}

impl Default for InterferometerSection {
    fn default() -> Self {
        Self {
            visibility: 1.0,
            bias_phase: 0.0,
            system_efficiency: 1.5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    PassAlways,
    BlockAlways,
    PassWithProb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveSection {
    pub strategy: StrategyKind,
    pub mode: Mode,
    /// Defaults to the channel midpoint.
    #[serde(deserialize_with = "units::opt_length", skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    /// Defaults to the compensated intensity for the mode.
    #[serde(deserialize_with = "units::opt_number", skip_serializing_if = "Option::is_none")]
    pub resend_mu: Option<f64>,
    pub reference_policy: PolicyName,
    #[serde(deserialize_with = "units::number")]
    pub pass_probability: f64,
    pub sync_shift_bits: usize,
    pub audit: AuditPolicy,
}

impl Default for EveSection {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::Honest,
            mode: Mode::Relativistic,
            position: None,
            resend_mu: None,
            reference_policy: PolicyName::PassAlways,
            pass_probability: 0.5,
            sync_shift_bits: 20,
            audit: AuditPolicy::Streaming,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackSection {
    pub enabled: bool,
    #[serde(deserialize_with = "units::number")]
    pub gain: f64,
    #[serde(deserialize_with = "units::angle")]
    pub probe_offset: f64,
    #[serde(deserialize_with = "units::number")]
    pub n0: f64,
    #[serde(deserialize_with = "units::number")]
    pub probe_mu: f64,
    #[serde(deserialize_with = "units::angle")]
    pub rail: f64,
    #[serde(deserialize_with = "units::angle")]
    pub random_walk_std: f64,
    #[serde(deserialize_with = "units::angle")]
    pub ramp: f64,
    #[serde(deserialize_with = "units::angle")]
    pub initial_offset: f64,
}

impl Default for FeedbackSection {
    fn default() -> Self {
        let f = FeedbackConfig::default();
        let d = DriftModel::default();
        Self {
            enabled: false,
            gain: f.gain,
            probe_offset: f.probe_offset,
            n0: f.n0,
            probe_mu: f.probe_mu,
            rail: f.rail,
            random_walk_std: d.random_walk_std,
            ramp: d.deterministic_ramp,
            initial_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub protocol: ProtocolSection,
    pub channel: ChannelSection,
    pub detector: DetectorSection,
    pub interferometer: InterferometerSection,
    pub eve: EveSection,
    pub feedback: FeedbackSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Fully materialized TOML, every quantity in SI units.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut check = |ok: bool, key: &str, message: String| {
            if !ok {
                issues.push(Issue {
                    key: key.to_string(),
                    message,
                });
            }
        };
        let p = &self.protocol;
        check(p.packet_bits > 0, "protocol.packet_bits", "must be > 0".into());
        check(
            p.symbol_rate.is_finite() && p.symbol_rate > 0.0,
            "protocol.symbol_rate",
            format!("must be > 0, got {}", p.symbol_rate),
        );
        check(
            p.symbol_duration > 0.0,
            "protocol.symbol_duration",
            format!("must be > 0, got {}", p.symbol_duration),
        );
        check(
            p.pulse_separation > p.symbol_duration,
            "protocol.pulse_separation",
            format!(
                "must exceed symbol_duration ({}), got {}",
                p.symbol_duration, p.pulse_separation
            ),
        );
        check(
            p.calibration_windows.iter().all(|w| *w >= 0.0)
                && p.calibration_windows[0] + p.calibration_windows[1] + p.packet_bits as f64 / p.symbol_rate
                    <= p.cycle_duration,
            "protocol.calibration_windows",
            "calibration windows plus one packet must fit in cycle_duration".into(),
        );
        check(
            p.phase_depth > 0.0 && p.phase_depth <= std::f64::consts::PI,
            "protocol.phase_depth",
            format!("must lie in (0, pi], got {}", p.phase_depth),
        );
        check(
            p.mu.is_finite() && p.mu >= 0.0,
            "protocol.mu",
            format!("must be >= 0, got {}", p.mu),
        );

        let c = &self.channel;
        check(
            c.length.is_finite() && c.length > 0.0,
            "channel.length",
            format!("must be > 0, got {}", c.length),
        );
        check(
            c.refractive_index.is_finite() && c.refractive_index >= 1.0,
            "channel.refractive_index",
            format!("must be >= 1, got {}", c.refractive_index),
        );
        check(
            c.admission_tolerance >= 0.0 && c.admission_tolerance < p.pulse_separation / 2.0,
            "channel.admission_tolerance",
            format!("must lie in [0, pulse_separation/2), got {}", c.admission_tolerance),
        );
        let lag = c.length * (c.refractive_index - 1.0) / crate::keymath::SPEED_OF_LIGHT;
        check(
            c.admission_tolerance >= lag,
            "channel.admission_tolerance",
            format!("honest pulses arrive {lag} s after L/c and would be ignored"),
        );

        let d = &self.detector;
        check(
            (0.0..=1.0).contains(&d.efficiency) && d.efficiency > 0.0,
            "detector.efficiency",
            format!("must lie in (0, 1], got {}", d.efficiency),
        );
        check(
            d.dark_rate >= 0.0,
            "detector.dark_rate",
            format!("must be >= 0, got {}", d.dark_rate),
        );
        check(
            d.gate_duration > 0.0,
            "detector.gate_duration",
            format!("must be > 0, got {}", d.gate_duration),
        );

        let i = &self.interferometer;
        check(
            (0.0..=1.0).contains(&i.visibility),
            "interferometer.visibility",
            format!("must lie in [0, 1], got {}", i.visibility),
        );
        check(
            i.bias_phase.is_finite(),
            "interferometer.bias_phase",
            "must be finite".into(),
        );
        check(
            i.system_efficiency > 0.0 && i.system_efficiency <= d.efficiency,
            "interferometer.system_efficiency",
            format!("must lie in (0, detector.efficiency], got {}", i.system_efficiency),
        );
        check(
            c.line_transmittance >= self.system_transmittance() && c.line_transmittance <= 1.0,
            "channel.line_transmittance",
            format!(
                "must lie in [system transmittance {}, 1], got {}",
                self.system_transmittance(),
                c.line_transmittance
            ),
        );

        let e = &self.eve;
        if let Some(x) = e.position {
            check(
                x > 0.0 && x < c.length,
                "eve.position",
                format!("must lie in (0, {}), got {x}", c.length),
            );
        }
        if let Some(m) = e.resend_mu {
            check(
                m.is_finite() && m >= 0.0,
                "eve.resend_mu",
                format!("must be >= 0, got {m}"),
            );
        }
        check(
            (0.0..=1.0).contains(&e.pass_probability),
            "eve.pass_probability",
            format!("must lie in [0, 1], got {}", e.pass_probability),
        );

        let f = &self.feedback;
        check(f.gain >= 0.0, "feedback.gain", format!("must be >= 0, got {}", f.gain));
        check(f.n0 >= 0.0, "feedback.n0", format!("must be >= 0, got {}", f.n0));
        check(
            f.probe_mu >= 0.0,
            "feedback.probe_mu",
            format!("must be >= 0, got {}", f.probe_mu),
        );
        check(
            f.rail > f.probe_offset + std::f64::consts::PI,
            "feedback.rail",
            "must exceed probe_offset + pi to leave room for wrap-around".into(),
        );
        check(
            f.random_walk_std >= 0.0,
            "feedback.random_walk_std",
            format!("must be >= 0, got {}", f.random_walk_std),
        );

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    /// Optical transmittance between Alice and the detector (`η_sys`).
    pub fn system_transmittance(&self) -> f64 {
        self.interferometer.system_efficiency / self.detector.efficiency
    }

    pub fn packet_config(&self) -> PacketConfig {
        let p = &self.protocol;
        PacketConfig {
            packet_bits: p.packet_bits,
            symbol_rate: p.symbol_rate,
            symbol_duration: p.symbol_duration,
            pulse_separation: p.pulse_separation,
            cycle_duration: p.cycle_duration,
            calibration_windows: p.calibration_windows,
            phase_depth: p.phase_depth,
        }
    }

    pub fn security_params(&self) -> SecurityParams {
        SecurityParams::new(self.protocol.mu, self.protocol.phase_depth).expect("validated config")
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams {
            efficiency: self.detector.efficiency,
            dark_rate: self.detector.dark_rate,
            gate_duration: self.detector.gate_duration,
        }
    }

    pub fn interferometer_params(&self) -> InterferometerParams {
        InterferometerParams {
            delay: self.protocol.pulse_separation,
            visibility: self.interferometer.visibility,
            bias_phase: self.interferometer.bias_phase,
            system_transmittance: self.system_transmittance(),
        }
    }

    pub fn geometry(&self) -> ChannelGeometry {
        ChannelGeometry::new(
            self.channel.length,
            self.channel.refractive_index,
            self.channel.admission_tolerance,
            self.protocol.pulse_separation,
        )
        .expect("validated config")
    }

    pub fn link(&self) -> Link {
        Link {
            geometry: self.geometry(),
            detector: self.detector_params(),
            interferometer: self.interferometer_params(),
            enforce_admission: self.eve.mode.enforces_admission(),
        }
    }

    pub fn reference_policy(&self) -> ReferencePolicy {
        match self.eve.reference_policy {
            PolicyName::PassAlways => ReferencePolicy::PassAlways,
            PolicyName::BlockAlways => ReferencePolicy::BlockAlways,
            PolicyName::PassWithProb => ReferencePolicy::PassWithProb(self.eve.pass_probability),
        }
    }

    /// Eve's configuration with defaults resolved; `None` when no Eve is on the line.
    pub fn eve_config(&self) -> Result<Option<EveConfig>, crate::adversary::AdversaryError> {
        let e = &self.eve;
        if e.strategy == StrategyKind::Honest && e.mode == Mode::Relativistic && e.position.is_none() {
            return Ok(None);
        }
        let resend_mu = match e.resend_mu {
            Some(m) => m,
            None if matches!(e.strategy, StrategyKind::UsdBlockResend | StrategyKind::InterceptResend) => {
                crate::adversary::compensated_resend_mu(
                    e.mode,
                    &self.security_params(),
                    self.channel.line_transmittance,
                    &self.interferometer_params(),
                    &self.detector_params(),
                )?
            }
            None => self.protocol.mu * self.channel.line_transmittance,
        };
        let config = EveConfig {
            position: e.position.unwrap_or(self.channel.length / 2.0),
            mode: e.mode,
            strategy: e.strategy,
            resend_mu,
            reference_policy: self.reference_policy(),
            sync_shift_bits: if e.strategy == StrategyKind::SyncShift {
                e.sync_shift_bits
            } else {
                0
            },
            line_transmittance: self.channel.line_transmittance,
        };
        config.validate(self.channel.length, self.system_transmittance())?;
        Ok(Some(config))
    }

    pub fn feedback_config(&self) -> FeedbackConfig {
        let f = &self.feedback;
        FeedbackConfig {
            gain: f.gain,
            probe_offset: f.probe_offset,
            n0: f.n0,
            probe_mu: f.probe_mu,
            rail: f.rail,
        }
    }

    pub fn drift_model(&self) -> DriftModel {
        DriftModel {
            random_walk_std: self.feedback.random_walk_std,
            deterministic_ramp: self.feedback.ramp,
        }
    }
}
