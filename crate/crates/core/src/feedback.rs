//! Bias stabilization of Bob's delay interferometer.
//!
//! Each cycle Bob probes the dark port with the bias set π/2 above and
//! below its working point, forms the normalized count difference and
//! steps the bias against it. The controller works in phase units. The
//! actuator setting is `phase + 2π·turns`; only `phase` reaches the optics,
//! so a rail wrap-around (a change of `turns`) leaves the interferometer
//! response bit-identical.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::photonics::{click_probability, dark_port_mean_photons, DetectorParams, InterferometerParams, PulsePair};
use crate::scalar::{wrap_phase, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSetting<T> {
    turns: i32,
    phase: T,
}

impl<T: Real> PhaseSetting<T> {
    pub fn new(setting: T) -> Self {
        let phase = wrap_phase(setting);
        let turns = ((setting - phase) / T::TAU()).round().to_i32().unwrap_or(0);
        Self { turns, phase }
    }

    /// Phase seen by the optics, in `[-π, π)`.
    pub fn phase(&self) -> T {
        self.phase
    }

    pub fn turns(&self) -> i32 {
        self.turns
    }

    /// Actuator value checked against the rails.
    pub fn value(&self) -> T {
        self.phase + T::TAU() * T::lit(self.turns as f64)
    }

    pub fn shifted(&self, delta: T) -> Self {
        let raw = self.phase + delta;
        let phase = wrap_phase(raw);
        let carry = ((raw - phase) / T::TAU()).round().to_i32().unwrap_or(0);
        Self {
            turns: self.turns + carry,
            phase,
        }
    }

    fn with_turns(&self, turns: i32) -> Self {
        Self {
            turns,
            phase: self.phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasState<T> {
    pub setting: PhaseSetting<T>,
    /// Environment-induced offset, hidden from the controller.
    pub true_offset: T,
    /// Symmetric actuator range `[-rail, rail]`.
    pub rail: T,
}

impl<T: Real> BiasState<T> {
    pub fn new(true_offset: T, rail: T) -> Self {
        Self {
            setting: PhaseSetting::new(T::zero()),
            true_offset,
            rail,
        }
    }

    /// Bias phase the interferometer actually has, in `[-π, π)`.
    pub fn residual(&self) -> T {
        wrap_phase(self.true_offset + self.setting.phase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModel<T> {
    /// Standard deviation of the random-walk step, rad per cycle.
    pub random_walk_std: T,
    /// Deterministic ramp, rad per cycle.
    pub deterministic_ramp: T,
}

impl<T: Real> Default for DriftModel<T> {
    fn default() -> Self {
        Self {
            random_walk_std: T::lit(0.01),
            deterministic_ramp: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig<T> {
    pub gain: T,
    pub probe_offset: T,
    /// Count scale of the confidence weight `N / (N + n0)`.
    pub n0: T,
    /// Mean photon number of the probe pulses.
    pub probe_mu: T,
    pub rail: T,
}

impl<T: Real> Default for FeedbackConfig<T> {
    fn default() -> Self {
        Self {
            gain: T::lit(0.5),
            probe_offset: T::FRAC_PI_2(),
            n0: T::lit(20.0),
            probe_mu: T::lit(0.116),
            rail: T::lit(3.0) * T::PI(),
        }
    }
}

/// `(N+ - N-) / (N+ + N-)`, zero without counts.
pub fn probe_error_signal<T: Real>(counts_plus: u64, counts_minus: u64) -> T {
    let total = counts_plus + counts_minus;
    if total == 0 {
        return T::zero();
    }
    (T::lit(counts_plus as f64) - T::lit(counts_minus as f64)) / T::lit(total as f64)
}

pub fn confidence_weight<T: Real>(total_counts: u64, n0: T) -> T {
    let n = T::lit(total_counts as f64);
    n / (n + n0)
}

/// Steps the bias against the error, then clamps and wraps it.
pub fn update_bias<T: Real>(
    state: BiasState<T>,
    error: T,
    total_counts: u64,
    config: &FeedbackConfig<T>,
) -> BiasState<T> {
    if error == T::zero() || total_counts == 0 {
        return state;
    }
    wraparound(step_and_clamp(state, error, total_counts, config), config.probe_offset)
}

fn step_and_clamp<T: Real>(
    state: BiasState<T>,
    error: T,
    total_counts: u64,
    config: &FeedbackConfig<T>,
) -> BiasState<T> {
    let step = config.gain * error * confidence_weight(total_counts, config.n0);
    let mut next = state;
    next.setting = state.setting.shifted(-step);
    let v = next.setting.value();
    if v > state.rail {
        next.setting = next.setting.shifted(state.rail - v);
    } else if v < -state.rail {
        next.setting = next.setting.shifted(-state.rail - v);
    }
    next
}

/// Re-centers a setting within `margin` of a rail by whole turns.
pub fn wraparound<T: Real>(state: BiasState<T>, margin: T) -> BiasState<T> {
    let v = state.setting.value();
    if v.abs() < state.rail - margin {
        return state;
    }
    let k = (v / T::TAU()).round().to_i32().unwrap_or(0);
    let k = if k == 0 { v.signum().to_i32().unwrap_or(0) } else { k };
    let mut next = state;
    next.setting = state.setting.with_turns(state.setting.turns() - k);
    next
}

/// Probe slot counts for the two calibration windows at the symbol rate.
pub fn probe_slots(windows: [f64; 2], symbol_rate: f64) -> [u64; 2] {
    windows.map(|w| (w * symbol_rate).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleReport<T> {
    pub cycle: u64,
    pub true_offset: T,
    pub bias_setting: T,
    pub error_signal: T,
    pub counts_plus: u64,
    pub counts_minus: u64,
    /// Misalignment left for the QKD part of the cycle.
    pub residual: T,
    /// Misalignment the same update would have left without wrap-around.
    pub residual_before_wrap: T,
    pub wrapped: bool,
}

/// Expected dark-port click probability per probe slot at bias `bias`.
pub fn probe_click_probability<T: Real>(
    bias: T,
    probe_mu: T,
    ifc: &InterferometerParams<T>,
    det: &DetectorParams<T>,
) -> T {
    let pair = PulsePair::emit(probe_mu, T::zero(), T::zero(), T::one());
    let probe = InterferometerParams {
        bias_phase: bias,
        ..*ifc
    };
    click_probability(dark_port_mean_photons(&pair, T::zero(), &probe), det)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    match Binomial::new(n, p.clamp(0.0, 1.0)) {
        Ok(d) => d.sample(rng),
        Err(_) => 0,
    }
}

/// One 16 ms cycle: drift, two probe windows, bias update.
#[allow(clippy::too_many_arguments)]
pub fn run_cycle<T: Real, R: Rng + ?Sized>(
    cycle: u64,
    state: BiasState<T>,
    drift: &DriftModel<T>,
    ifc: &InterferometerParams<T>,
    det: &DetectorParams<T>,
    config: &FeedbackConfig<T>,
    probe_slots: [u64; 2],
    drift_rng: &mut R,
    probe_rng: &mut R,
) -> (BiasState<T>, CycleReport<T>) {
    let mut state = state;
    let step = if drift.random_walk_std > T::zero() {
        Normal::new(0.0, drift.random_walk_std.as_f64())
            .map(|d| d.sample(drift_rng))
            .unwrap_or(0.0)
    } else {
        0.0
    };
    state.true_offset = state.true_offset + drift.deterministic_ramp + T::lit(step);

    let delta = state.residual();
    let p_plus = probe_click_probability(delta + config.probe_offset, config.probe_mu, ifc, det);
    let p_minus = probe_click_probability(delta - config.probe_offset, config.probe_mu, ifc, det);
    let counts_plus = binomial(probe_slots[0], p_plus.as_f64(), probe_rng);
    let counts_minus = binomial(probe_slots[1], p_minus.as_f64(), probe_rng);
    let error = probe_error_signal::<T>(counts_plus, counts_minus);

    let total = counts_plus + counts_minus;
    let (next, before_wrap) = if error == T::zero() || total == 0 {
        (state, state)
    } else {
        let stepped = step_and_clamp(state, error, total, config);
        (wraparound(stepped, config.probe_offset), stepped)
    };
    let report = CycleReport {
        cycle,
        true_offset: next.true_offset,
        bias_setting: next.setting.value(),
        error_signal: error,
        counts_plus,
        counts_minus,
        residual: next.residual(),
        residual_before_wrap: before_wrap.residual(),
        wrapped: next.setting.turns() != before_wrap.setting.turns(),
    };
    (next, report)
}
