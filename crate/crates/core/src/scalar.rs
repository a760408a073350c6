//! Scalar abstraction shared by the closed-form and geometry code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let shifted = x + T::PI();
    let r = shifted - two_pi * (shifted / two_pi).floor();
    // floor can leave r == 2π after rounding
    let r = if r >= two_pi { r - two_pi } else { r };
    r - T::PI()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_phase_range() {
        for k in -50..50 {
            let x = k as f64 * 0.37;
            let w = wrap_phase(x);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w), "{x} -> {w}");
            let turns = (x - w) / std::f64::consts::TAU;
            assert!((turns - turns.round()).abs() < 1e-9);
        }
        assert_eq!(wrap_phase(0.0f32), 0.0);
    }
}
