//! Simulator and security calculator for a relativistic two-pulse
//! weak-coherent-pulse QKD link.
//!
//! The closed-form and geometry modules are generic over [`scalar::Real`]
//! (`f32` or `f64`). Scenario-level code uses the `f64` aliases below.

pub mod adversary;
pub mod feedback;
pub mod harness;
pub mod keymath;
pub mod photonics;
pub mod protocol;
pub mod scalar;
pub mod spacetime;
pub mod streams;

pub type Scalar = f64;

pub type SecurityParams = keymath::SecurityParams<Scalar>;
pub type GeometryParams = keymath::GeometryParams<Scalar>;
pub type ChannelLimit = keymath::ChannelLimit<Scalar>;
pub type SpacetimeEvent = spacetime::SpacetimeEvent<Scalar>;
pub type ChannelGeometry = spacetime::ChannelGeometry<Scalar>;
pub type PulsePair = photonics::PulsePair<Scalar>;
pub type DetectorParams = photonics::DetectorParams<Scalar>;
pub type InterferometerParams = photonics::InterferometerParams<Scalar>;
pub type BiasState = feedback::BiasState<Scalar>;
pub type DriftModel = feedback::DriftModel<Scalar>;
pub type FeedbackConfig = feedback::FeedbackConfig<Scalar>;
pub type CycleReport = feedback::CycleReport<Scalar>;

pub use adversary::{EveConfig, Mode, ReferencePolicy, StrategyKind};
pub use harness::config::ScenarioConfig;
pub use protocol::{PacketConfig, PacketLedger, RunSummary};
