//! Physical layer: weak coherent pulse pairs, the receiving delay
//! interferometer and a threshold single-photon detector.
//!
//! Intensities are mean photon numbers. Pulse means are referenced to
//! Alice's output; the interferometer applies the lumped optical
//! transmittance `η_sys` and the detector its quantum efficiency `η`.

use rand::Rng;

use crate::scalar::Real;

/// One reference pulse followed, `ΔT` later, by the data pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePair<T> {
    pub mu_ref: T,
    pub mu_data: T,
    /// Phase of the data pulse relative to the reference, radians.
    pub data_phase: T,
    pub ref_present: bool,
    pub data_present: bool,
    pub emit_time_ref: T,
    pub emit_time_data: T,
}

impl<T: Real> PulsePair<T> {
    /// Alice's emission: both pulses of mean `mu`, data phase `data_phase`.
    pub fn emit(mu: T, data_phase: T, emit_time_ref: T, separation: T) -> Self {
        Self {
            mu_ref: mu,
            mu_data: mu,
            data_phase,
            ref_present: true,
            data_present: true,
            emit_time_ref,
            emit_time_data: emit_time_ref + separation,
        }
    }

    pub fn separation(&self) -> T {
        self.emit_time_data - self.emit_time_ref
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams<T> {
    pub efficiency: T,
    /// Dark counts per second.
    pub dark_rate: T,
    pub gate_duration: T,
}

impl<T: Real> DetectorParams<T> {
    /// Probability of at least one dark count within a gate.
    pub fn dark_click_probability(&self) -> T {
        -(-(self.dark_rate * self.gate_duration)).exp_m1()
    }

    pub fn is_valid(&self) -> bool {
        self.efficiency >= T::zero()
            && self.efficiency <= T::one()
            && self.dark_rate >= T::zero()
            && self.dark_rate.is_finite()
            && self.gate_duration > T::zero()
            && self.gate_duration.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams<T> {
    /// Arm delay, equal to the pulse separation.
    pub delay: T,
    pub visibility: T,
    /// Residual misalignment added to the interference phase.
    pub bias_phase: T,
    /// Lumped transmittance from Alice's output to the interferometer.
    pub system_transmittance: T,
}

impl<T: Real> InterferometerParams<T> {
    pub fn is_valid(&self) -> bool {
        self.delay > T::zero()
            && self.visibility >= T::zero()
            && self.visibility <= T::one()
            && self.bias_phase.is_finite()
            && self.system_transmittance > T::zero()
            && self.system_transmittance <= T::one()
    }
}

/// Mean photon number reaching the dark port in the interference window.
///
/// Each pulse contributes a quarter of its transmitted energy to that
/// window (two symmetric splitters). With both pulses present the
/// amplitudes interfere:
///
/// ```text
/// (m_r + m_d - 2 V sqrt(m_r m_d) cos(bob_phase - data_phase + bias)) / 4
/// ```
///
/// which reduces to `μ'(1 - V cos(..))/2` for equal means `μ'`.
pub fn dark_port_mean_photons<T: Real>(pair: &PulsePair<T>, bob_phase: T, ifc: &InterferometerParams<T>) -> T {
    port_mean(pair, bob_phase, ifc, -T::one())
}

/// Companion output of [`dark_port_mean_photons`].
pub fn bright_port_mean_photons<T: Real>(pair: &PulsePair<T>, bob_phase: T, ifc: &InterferometerParams<T>) -> T {
    port_mean(pair, bob_phase, ifc, T::one())
}

fn port_mean<T: Real>(pair: &PulsePair<T>, bob_phase: T, ifc: &InterferometerParams<T>, sign: T) -> T {
    let eta = ifc.system_transmittance;
    let quarter = T::lit(0.25);
    match (pair.ref_present, pair.data_present) {
        (false, false) => T::zero(),
        (true, false) => eta * pair.mu_ref * quarter,
        (false, true) => eta * pair.mu_data * quarter,
        (true, true) => {
            let fringe = ifc.visibility * (bob_phase - pair.data_phase + ifc.bias_phase).cos();
            let mean = if pair.mu_ref == pair.mu_data {
                eta * pair.mu_ref * (T::one() + sign * fringe) / T::lit(2.0)
            } else {
                let (mr, md) = (eta * pair.mu_ref, eta * pair.mu_data);
                (mr + md + sign * T::lit(2.0) * (mr * md).sqrt() * fringe) * quarter
            };
            mean.max(T::zero())
        }
    }
}

/// `1 - exp(-η μ)(1 - p_dark)`.
pub fn click_probability<T: Real>(mu_detected: T, det: &DetectorParams<T>) -> T {
    let (signal, dark) = detection_components(mu_detected, det);
    signal + dark - signal * dark
}

fn detection_components<T: Real>(mu_detected: T, det: &DetectorParams<T>) -> (T, T) {
    let signal = -(-(det.efficiency * mu_detected.max(T::zero()))).exp_m1();
    (signal, det.dark_click_probability())
}

/// Outcome of one detector gate, keeping track of what fired it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    None,
    /// Only a dark count fired.
    Dark,
    /// At least one photon was detected (possibly together with a dark count).
    Photon,
}

impl Detection {
    pub fn clicked(self) -> bool {
        !matches!(self, Detection::None)
    }
}

/// Classifies a uniform draw `u ∈ [0, 1)` into a detector outcome.
///
/// `u < p_signal` is a photon click, `p_signal <= u < p_click` a dark-only
/// click; the click marginal is exactly [`click_probability`].
#[inline]
pub fn detection_from_uniform<T: Real>(u: T, mu_detected: T, det: &DetectorParams<T>) -> Detection {
    let (signal, dark) = detection_components(mu_detected, det);
    if u < signal {
        Detection::Photon
    } else if u < signal + dark - signal * dark {
        Detection::Dark
    } else {
        Detection::None
    }
}

/// One Bernoulli draw with [`click_probability`].
pub fn sample_click<T: Real, R: Rng + ?Sized>(mu_detected: T, det: &DetectorParams<T>, rng: &mut R) -> bool {
    sample_detection(mu_detected, det, rng).clicked()
}

pub fn sample_detection<T: Real, R: Rng + ?Sized>(mu_detected: T, det: &DetectorParams<T>, rng: &mut R) -> Detection {
    let u = T::lit(rng.random::<f64>());
    detection_from_uniform(u, mu_detected, det)
}
