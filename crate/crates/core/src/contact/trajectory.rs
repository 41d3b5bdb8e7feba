use nalgebra::Vector3;

use super::ContactError;

/// Default trajectory duration in seconds.
pub const DEFAULT_DURATION: f64 = 4.0;
/// Default sampling rate in Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 100.0;

pub fn h00(s: f64) -> f64 {
    (2.0 * s - 3.0) * s * s + 1.0
}

pub fn h01(s: f64) -> f64 {
    (3.0 - 2.0 * s) * s * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub position: Vector3<f64>,
}

/// Time-stamped Cartesian positions from a start pose to a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub duration: f64,
    pub samples: Vec<Sample>,
}

/// Position at normalized time `s` of the zero-velocity cubic Hermite
/// segment. Each endpoint is reproduced exactly at `s = 0` and `s = 1`.
pub fn hermite(start: Vector3<f64>, target: Vector3<f64>, s: f64) -> Vector3<f64> {
    let w = h01(s);
    if w <= 0.5 {
        start + (target - start) * w
    } else {
        target + (start - target) * h00(s)
    }
}

/// Per-axis cubic Hermite with zero endpoint velocities, sampled at
/// `k / sample_rate` for every such time below `duration`, plus `duration`.
pub fn plan_trajectory(
    start: Vector3<f64>,
    target: Vector3<f64>,
    duration: f64,
    sample_rate: f64,
) -> Result<Trajectory, ContactError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(ContactError::InvalidTrajectory(format!("duration {duration} must be positive")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(ContactError::InvalidTrajectory(format!("sample rate {sample_rate} must be positive")));
    }
    if !start.iter().chain(target.iter()).all(|c| c.is_finite()) {
        return Err(ContactError::InvalidTrajectory("non-finite endpoint".into()));
    }
    let steps = (duration * sample_rate).ceil();
    if steps > 1e7 {
        return Err(ContactError::InvalidTrajectory(format!("{steps} samples is too many")));
    }
    let mut samples: Vec<Sample> = (0..steps as u64)
        .map(|k| k as f64 / sample_rate)
        .take_while(|t| *t < duration)
        .map(|t| Sample {
            t,
            position: hermite(start, target, t / duration),
        })
        .collect();
    samples.push(Sample {
        t: duration,
        position: target,
    });
    Ok(Trajectory { duration, samples })
}

impl Trajectory {
    pub fn start(&self) -> Vector3<f64> {
        self.samples[0].position
    }

    pub fn end(&self) -> Vector3<f64> {
        self.samples[self.samples.len() - 1].position
    }

    /// Times strictly increasing from 0 to `duration`, at least two samples,
    /// all values finite.
    pub fn check(&self) -> Result<(), ContactError> {
        let bad = |m: &str| Err(ContactError::InvalidTrajectory(m.to_string()));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if self.samples.len() < 2 {
            return bad("fewer than two samples");
        }
        if self.samples[0].t != 0.0 || self.samples[self.samples.len() - 1].t != self.duration {
            return bad("samples must span [0, duration]");
        }
        if self.samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return bad("sample times not strictly increasing");
        }
        if self.samples.iter().any(|s| !s.position.iter().all(|c| c.is_finite())) {
            return bad("non-finite position");
        }
        Ok(())
    }
}
