//! Time profiles `g(t)` of the pointer coupling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `(2A/T) sin²(πt/T)`.
    #[default]
    SineSquaredBump,
    /// Flat top with `sin²` ramps of length `ramp_fraction·T` at both ends.
    SmoothTrapezoid,
    /// Constant `A/T` on `[0, T]`.
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_time: f64,
    pub area: f64,
    pub ramp_fraction: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, total_time: f64, area: f64, ramp_fraction: f64) -> Result<Self> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(invalid("total_time", format!("must be > 0, got {total_time}")));
        }
        if !(area.is_finite() && area >= 0.0) {
            return Err(invalid("area", format!("must be finite and >= 0, got {area}")));
        }
        if kind == ScheduleKind::SmoothTrapezoid && !(ramp_fraction > 0.0 && ramp_fraction <= 0.5) {
            return Err(invalid(
                "ramp_fraction",
                format!("must lie in (0, 0.5], got {ramp_fraction}"),
            ));
        }
        Ok(Self {
            kind,
            total_time,
            area,
            ramp_fraction,
        })
    }

    pub fn sine_squared(total_time: f64, area: f64) -> Result<Self> {
        Self::new(ScheduleKind::SineSquaredBump, total_time, area, 0.1)
    }

    pub fn rectangular(total_time: f64, area: f64) -> Result<Self> {
        Self::new(ScheduleKind::Rectangular, total_time, area, 0.1)
    }

    pub fn smooth_trapezoid(total_time: f64, area: f64, ramp_fraction: f64) -> Result<Self> {
        Self::new(ScheduleKind::SmoothTrapezoid, total_time, area, ramp_fraction)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(self.value_unchecked(t))
    }

    /// `g(t)` without the window check; callers guarantee `0 <= t <= T`.
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let (a, tt) = (self.area, self.total_time);
        match self.kind {
            ScheduleKind::SineSquaredBump => {
                if t <= 0.0 || t >= tt {
                    0.0
                } else {
                    let s = (PI * t / tt).sin();
                    2.0 * a / tt * s * s
                }
            }
            ScheduleKind::SmoothTrapezoid => {
                if t <= 0.0 || t >= tt {
                    return 0.0;
                }
                let ramp = self.ramp_fraction * tt;
                let height = a / (tt - ramp);
                let edge = t.min(tt - t);
                if edge >= ramp {
                    height
                } else {
                    let s = (0.5 * PI * edge / ramp).sin();
                    height * s * s
                }
            }
            ScheduleKind::Rectangular => a / tt,
        }
    }

    /// Closed-form `∫_0^t g`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.total_time);
        let (a, tt) = (self.area, self.total_time);
        match self.kind {
            ScheduleKind::SineSquaredBump => a / tt * (t - tt / (2.0 * PI) * (2.0 * PI * t / tt).sin()),
            ScheduleKind::SmoothTrapezoid => {
                let ramp = self.ramp_fraction * tt;
                let h = a / (tt - ramp);
                // ∫_0^x sin²(πs/2r) ds = x/2 - r/(2π) sin(πx/r)
                let ramp_part = |x: f64| h * (x / 2.0 - ramp / (2.0 * PI) * (PI * x / ramp).sin());
                if t <= ramp {
                    ramp_part(t)
                } else if t <= tt - ramp {
                    ramp_part(ramp) + h * (t - ramp)
                } else {
                    a - ramp_part(tt - t)
                }
            }
            ScheduleKind::Rectangular => a * t / tt,
        }
    }

    pub fn with_total_time(&self, total_time: f64) -> Result<Self> {
        Self::new(self.kind, total_time, self.area, self.ramp_fraction)
    }

    pub fn with_area(&self, area: f64) -> Result<Self> {
        Self::new(self.kind, self.total_time, area, self.ramp_fraction)
    }
}
