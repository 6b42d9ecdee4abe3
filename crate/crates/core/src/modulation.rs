//! Amplitude-modulation envelopes.
//!
//! Two stimulus envelopes are supported: a static carrier (amplitude 1 for
//! all t) and an on/off square wave with a given modulation frequency and
//! duty ratio. The envelope starts "on" at t = 0. Because the envelope is
//! binary, the time-averaged intensity factor of the square wave equals its
//! duty ratio.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Static,
    Square { freq_hz: f64, duty: f64 },
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        if let Envelope::Square { freq_hz, duty } = *self {
            if !freq_hz.is_finite() || freq_hz <= 0.0 {
                return Err(Error::config(
                    "envelope.freq_hz",
                    format!("modulation frequency must be > 0, got {freq_hz}"),
                ));
            }
            if !duty.is_finite() || !(0.0..=1.0).contains(&duty) {
                return Err(Error::config(
                    "envelope.duty",
                    format!("duty must be within [0, 1], got {duty}"),
                ));
            }
        }
        Ok(())
    }

    /// Amplitude factor at time `t` (s); always exactly 0 or 1.
    ///
    /// Square: 1 while `(t mod T) < duty·T` with `T = 1/freq`, else 0.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Static => 1.0,
            Envelope::Square { freq_hz, duty } => {
                let cycles = t * freq_hz;
                let phase = cycles - cycles.floor();
                if phase < duty {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Time average of `value(t)²` over one period. The envelope is binary,
    /// so this is 1 for static and `duty` for square.
    pub fn mean_intensity_factor(&self) -> f64 {
        match *self {
            Envelope::Static => 1.0,
            Envelope::Square { duty, .. } => duty,
        }
    }

    /// Sample `value` at t = 0, dt, 2dt, … for the given duration
    /// (endpoint included).
    pub fn sample(&self, dt: f64, duration: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) || !(duration > 0.0) {
            return Err(Error::config(
                "envelope",
                format!("sampling needs dt > 0 and duration > 0, got dt={dt}, duration={duration}"),
            ));
        }
        let n = (duration / dt).floor() as usize + 1;
        Ok((0..n).map(|k| self.value(k as f64 * dt)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_is_always_one() {
        for &t in &[0.0, 0.3, 1e3, 7.77] {
            assert_eq!(Envelope::Static.value(t), 1.0);
        }
        assert_eq!(Envelope::Static.mean_intensity_factor(), 1.0);
    }

    #[test]
    fn square_50hz_duty_09_known_samples() {
        // T = 0.020 s, on-window [0, 0.018)
        let env = Envelope::Square {
            freq_hz: 50.0,
            duty: 0.9,
        };
        assert_eq!(env.value(0.010), 1.0, "0.010 s is inside the on-window");
        assert_eq!(env.value(0.019), 0.0, "0.019 s is inside the off-window");
        assert_eq!(env.value(0.0), 1.0, "envelope starts on");
    }

    #[test]
    fn mean_factor_is_duty() {
        for &duty in &[0.0, 0.25, 0.9, 1.0] {
            let env = Envelope::Square {
                freq_hz: 50.0,
                duty,
            };
            assert_eq!(env.mean_intensity_factor(), duty);
        }
    }

    #[test]
    fn sample_static() {
        let s = Envelope::Static.sample(0.1, 0.5).unwrap();
        assert_eq!(s, vec![1.0; 6]);
    }

    #[test]
    fn sample_square_duty_half_alternates_in_pairs() {
        // 50 Hz, duty 0.5, dt = 5 ms: per 20 ms period the samples at
        // 0, 5, 10, 15 ms give 1, 1, 0, 0.
        let env = Envelope::Square {
            freq_hz: 50.0,
            duty: 0.5,
        };
        let s = env.sample(0.005, 0.095).unwrap();
        assert_eq!(s.len(), 20);
        for (k, &v) in s.iter().enumerate() {
            let expect = if k % 4 < 2 { 1.0 } else { 0.0 };
            assert_eq!(v, expect, "sample {k}");
        }
    }

    #[test]
    fn monte_carlo_mean_square_converges_to_duty() {
        // irrational step so samples never lock to the period
        let env = Envelope::Square {
            freq_hz: 50.0,
            duty: 0.9,
        };
        let dt = 0.02 * std::f64::consts::SQRT_2 / 100.0;
        let n = 1_000_000usize;
        let mean: f64 = (0..n)
            .map(|k| {
                let v = env.value(k as f64 * dt);
                v * v
            })
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - 0.9).abs() < 1e-3,
            "mean of squares {mean} should be 0.9 ± 0.001"
        );
    }

    #[test]
    fn duty_one_is_indistinguishable_from_static() {
        let env = Envelope::Square {
            freq_hz: 50.0,
            duty: 1.0,
        };
        let dt = 0.001 * std::f64::consts::E;
        for k in 0..10_000 {
            let t = k as f64 * dt;
            assert_eq!(env.value(t), Envelope::Static.value(t), "t = {t}");
        }
    }

    #[test]
    fn envelope_validation() {
        assert!(Envelope::Square {
            freq_hz: 50.0,
            duty: 1.5
        }
        .validate()
        .is_err());
        assert!(Envelope::Square {
            freq_hz: 0.0,
            duty: 0.5
        }
        .validate()
        .is_err());
        assert!(Envelope::Square {
            freq_hz: 50.0,
            duty: 0.9
        }
        .validate()
        .is_ok());
    }
}
