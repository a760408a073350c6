//! Closed-form security and geometry arithmetic.
//!
//! Everything here is a pure function of its inputs. Entropies are in bits
//! (base-2 logarithms); the Holevo bound on the adversary's per-pulse
//! information is
//!
//! ```text
//! chi(mu, phi) = h( (1 - exp(-2 mu sin^2(phi / 2))) / 2 )
//! ```
//!
//! and the asymptotic secret fraction is `R = 1 - chi - h(qber)`.

use thiserror::Error;

use crate::scalar::Real;

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Absolute tolerance of the critical-QBER bisection.
pub const CRITICAL_QBER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KeyMathError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("mean photon number must be finite and non-negative, got {0}")]
    PhotonNumber(f64),
    #[error("phase modulation depth must lie in (0, pi], got {0}")]
    PhaseDepth(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("refractive index must be >= 1, got {0}")]
    RefractiveIndex(f64),
    #[error("observed time of flight {observed_s} s is shorter than the light travel time {light_s} s over the distance lower bound")]
    Superluminal { observed_s: f64, light_s: f64 },
}

pub type Result<T> = std::result::Result<T, KeyMathError>;

/// Mean photon number and phase modulation depth of the two-pulse encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams<T> {
    mu: T,
    phi: T,
}

impl<T: Real> SecurityParams<T> {
    /// `mu = 0` is accepted as the vacuum limit.
    pub fn new(mu: T, phi: T) -> Result<Self> {
        if !(mu.is_finite() && mu >= T::zero()) {
            return Err(KeyMathError::PhotonNumber(mu.as_f64()));
        }
        if !(phi > T::zero() && phi <= T::PI()) {
            return Err(KeyMathError::PhaseDepth(phi.as_f64()));
        }
        Ok(Self { mu, phi })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::new(mu, self.phi)
    }

    /// Overlap exponent `2 mu sin^2(phi/2)`; `exp(-x)` is `|<alpha|e^{i phi} alpha>|`.
    fn overlap_exponent(&self) -> T {
        let s = (self.phi / T::lit(2.0)).sin();
        T::lit(2.0) * self.mu * s * s
    }
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    check_probability("p", p)?;
    Ok(binary_entropy_unchecked(p))
}

fn binary_entropy_unchecked<T: Real>(p: T) -> T {
    if p <= T::zero() || p >= T::one() {
        return T::zero();
    }
    let q = T::one() - p;
    -(p * p.log2() + q * q.log2())
}

fn check_probability<T: Real>(name: &'static str, p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(KeyMathError::Probability {
            name,
            value: p.as_f64(),
        })
    }
}

/// Optimal unambiguous-discrimination success probability between the two
/// data-pulse states, `1 - exp(-2 mu sin^2(phi/2))`.
pub fn usd_success_prob<T: Real>(params: &SecurityParams<T>) -> T {
    -(-params.overlap_exponent()).exp_m1()
}

/// Holevo bound on the adversary's information per channel use, in bits.
pub fn holevo_bound<T: Real>(params: &SecurityParams<T>) -> T {
    let p = usd_success_prob(params) / T::lit(2.0);
    binary_entropy_unchecked(p)
}

/// Asymptotic secret fraction `1 - chi - h(qber)`. May be negative.
pub fn secret_fraction<T: Real>(params: &SecurityParams<T>, qber: T) -> Result<T> {
    let h = binary_entropy(qber)?;
    Ok(T::one() - holevo_bound(params) - h)
}

/// QBER at which the secret fraction vanishes, on the branch `q <= 1/2`.
///
/// Returns 0 when `chi >= 1` (no positive-rate region).
pub fn critical_qber<T: Real>(params: &SecurityParams<T>) -> T {
    let target = T::one() - holevo_bound(params);
    if target <= T::zero() {
        return T::zero();
    }
    if target >= T::one() {
        return T::lit(0.5);
    }
    let tol = T::lit(CRITICAL_QBER_TOLERANCE).max(T::epsilon() * T::lit(4.0));
    let (mut lo, mut hi) = (T::zero(), T::lit(0.5));
    // h is strictly increasing on [0, 1/2]
    for _ in 0..256 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / T::lit(2.0);
        if binary_entropy_unchecked(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Distance and timing figures that bound the admissible pulse separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams<T> {
    distance_lower_bound: T,
    observed_time_of_flight: T,
    pulse_separation: T,
    refractive_index: T,
}

impl<T: Real> GeometryParams<T> {
    pub fn new(
        distance_lower_bound: T,
        observed_time_of_flight: T,
        pulse_separation: T,
        refractive_index: T,
    ) -> Result<Self> {
        if !(distance_lower_bound.is_finite() && distance_lower_bound >= T::zero()) {
            return Err(KeyMathError::NonPositive {
                name: "distance_lower_bound",
                value: distance_lower_bound.as_f64(),
            });
        }
        positive("observed_time_of_flight", observed_time_of_flight)?;
        positive("pulse_separation", pulse_separation)?;
        if refractive_index.is_nan() || refractive_index < T::one() {
            return Err(KeyMathError::RefractiveIndex(refractive_index.as_f64()));
        }
        let light = distance_lower_bound / T::lit(SPEED_OF_LIGHT);
        if observed_time_of_flight < light {
            return Err(KeyMathError::Superluminal {
                observed_s: observed_time_of_flight.as_f64(),
                light_s: light.as_f64(),
            });
        }
        Ok(Self {
            distance_lower_bound,
            observed_time_of_flight,
            pulse_separation,
            refractive_index,
        })
    }

    pub fn distance_lower_bound(&self) -> T {
        self.distance_lower_bound
    }

    pub fn observed_time_of_flight(&self) -> T {
        self.observed_time_of_flight
    }

    pub fn pulse_separation(&self) -> T {
        self.pulse_separation
    }

    pub fn refractive_index(&self) -> T {
        self.refractive_index
    }

    pub fn l_max(&self) -> Result<ChannelLimit<T>> {
        l_max(self.pulse_separation, self.refractive_index)
    }

    /// Whether the configured pulse separation covers the required minimum.
    pub fn separation_sufficient(&self, trusted_external_sync: bool) -> bool {
        self.pulse_separation >= delta_t_min(self, trusted_external_sync)
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(KeyMathError::NonPositive {
            name,
            value: v.as_f64(),
        })
    }
}

/// Minimal pulse separation `2 (T_o - L_min / c)`, halved under a trusted
/// external synchronization scheme.
pub fn delta_t_min<T: Real>(geom: &GeometryParams<T>, trusted_external_sync: bool) -> T {
    let slack = geom.observed_time_of_flight - geom.distance_lower_bound / T::lit(SPEED_OF_LIGHT);
    let slack = slack.max(T::zero());
    if trusted_external_sync {
        slack
    } else {
        T::lit(2.0) * slack
    }
}

/// Upper bound on channel length imposed by propagation in a medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelLimit<T> {
    Bounded(T),
    /// `n <= 1`: the medium imposes no limit.
    Unbounded,
}

impl<T: Real> ChannelLimit<T> {
    pub fn meters(&self) -> Option<T> {
        match *self {
            ChannelLimit::Bounded(m) => Some(m),
            ChannelLimit::Unbounded => None,
        }
    }
}

/// Longest channel for which an adversary substituting a vacuum path cannot
/// win back the pulse separation: `L_max = c ΔT / (2 (n - 1))`.
pub fn l_max<T: Real>(pulse_separation: T, refractive_index: T) -> Result<ChannelLimit<T>> {
    positive("pulse_separation", pulse_separation)?;
    if refractive_index.is_nan() {
        return Err(KeyMathError::RefractiveIndex(f64::NAN));
    }
    if refractive_index <= T::one() {
        return Ok(ChannelLimit::Unbounded);
    }
    let excess = refractive_index - T::one();
    Ok(ChannelLimit::Bounded(
        T::lit(SPEED_OF_LIGHT) * pulse_separation / (T::lit(2.0) * excess),
    ))
}

/// Mean photon number of a pulse of optical power `power_dbm` lasting
/// `pulse_duration` seconds at `wavelength` meters.
pub fn mu_from_power<T: Real>(power_dbm: T, wavelength: T, pulse_duration: T) -> Result<T> {
    positive("wavelength", wavelength)?;
    positive("pulse_duration", pulse_duration)?;
    if power_dbm.is_nan() || power_dbm == T::infinity() {
        return Err(KeyMathError::NonPositive {
            name: "power_dbm",
            value: power_dbm.as_f64(),
        });
    }
    let watts = T::lit(10.0).powf(power_dbm / T::lit(10.0)) * T::lit(1e-3);
    let photon_energy = T::lit(PLANCK) * T::lit(SPEED_OF_LIGHT) / wavelength;
    Ok(watts * pulse_duration / photon_energy)
}
