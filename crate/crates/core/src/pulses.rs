//! Piecewise-linear drive schedules and slew-rate validation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhysicalConstants;

pub const DEFAULT_N_STEPS: usize = 40;
pub const DEFAULT_SLEW_BOUND: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub value: f64,
}

/// Piecewise-linear waveform through ordered knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Knot>", into = "Vec<Knot>")]
pub struct Schedule {
    knots: Vec<Knot>,
}

impl TryFrom<Vec<Knot>> for Schedule {
    type Error = Error;

    fn try_from(knots: Vec<Knot>) -> Result<Self> {
        Schedule::new(knots)
    }
}

impl From<Schedule> for Vec<Knot> {
    fn from(s: Schedule) -> Self {
        s.knots
    }
}

impl Schedule {
    /// Times must start at 0 and strictly increase.
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("a schedule needs at least two knots"));
        }
        if knots[0].t != 0.0 {
            return Err(Error::invalid("schedules start at t = 0"));
        }
        if knots.iter().any(|k| !k.t.is_finite() || !k.value.is_finite()) {
            return Err(Error::NonFinite("schedule knot".into()));
        }
        if knots.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid("knot times must strictly increase"));
        }
        Ok(Self { knots })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(t, value)| Knot { t, value }).collect())
    }

    /// A flat schedule over `[0, duration]`.
    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        Self::from_pairs(&[(0.0, value), (duration, value)])
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn duration(&self) -> f64 {
        self.knots.last().unwrap().t
    }

    /// Linear interpolation; clamps outside the knot range.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].t {
            return k[0].value;
        }
        let i = k.partition_point(|kn| kn.t <= t);
        if i >= k.len() {
            return k[k.len() - 1].value;
        }
        let (a, b) = (k[i - 1], k[i]);
        a.value + (b.value - a.value) * (t - a.t) / (b.t - a.t)
    }

    pub fn max_on(&self, t0: f64, t1: f64) -> f64 {
        let inner = self.knots.iter().filter(|k| k.t > t0 && k.t < t1).map(|k| k.value);
        inner.fold(self.value_at(t0).max(self.value_at(t1)), f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Schedule {
        Schedule {
            knots: self
                .knots
                .iter()
                .map(|k| Knot {
                    t: k.t,
                    value: k.value * factor,
                })
                .collect(),
        }
    }
}

/// Breakpoints of the default protocol, as fractions of T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleShape {
    pub omega_rise_end: f64,
    pub omega_fall_start: f64,
    pub delta_g_ramp_start: f64,
    pub delta_g_ramp_end: f64,
    pub delta_l_ramp_start: f64,
    pub delta_l_ramp_end: f64,
}

impl Default for ScheduleShape {
    fn default() -> Self {
        Self {
            omega_rise_end: 0.15,
            omega_fall_start: 0.85,
            delta_g_ramp_start: 0.1,
            delta_g_ramp_end: 0.5,
            delta_l_ramp_start: 0.5,
            delta_l_ramp_end: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveProgram {
    pub omega: Schedule,
    pub phase: Schedule,
    pub delta_global: Schedule,
    pub delta_local_envelope: Schedule,
    pub site_weights: Vec<f64>,
    pub n_steps: usize,
    pub total_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSample {
    pub t: f64,
    pub omega: f64,
    pub phase: f64,
    pub delta_global: f64,
    pub delta_local: f64,
}

pub fn check_weights(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Empty("site weights"));
    }
    if p.iter().any(|&w| !(w > 0.0 && w <= 1.0 + 1e-9)) {
        return Err(Error::invalid("site weights must lie in (0, 1]"));
    }
    let max = p.iter().copied().fold(f64::MIN, f64::max);
    if (max - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("largest site weight must be 1, got {max}")));
    }
    Ok(())
}

/// The default protocol: detuning starts large and negative and is released
/// by mid-protocol while the drive is on, then the weighted local detuning
/// switches on in the second half as the drive ramps down.
pub fn build_default_program(
    constants: &PhysicalConstants,
    p: &[f64],
    n_steps: usize,
    shape: &ScheduleShape,
) -> Result<DriveProgram> {
    constants.validate()?;
    check_weights(p)?;
    if n_steps < 2 {
        return Err(Error::invalid("n_steps must be at least 2"));
    }
    let s = shape;
    let fractions = [
        s.omega_rise_end,
        s.omega_fall_start,
        s.delta_g_ramp_start,
        s.delta_g_ramp_end,
        s.delta_l_ramp_start,
        s.delta_l_ramp_end,
    ];
    if fractions.iter().any(|&f| !(f > 0.0 && f < 1.0))
        || s.omega_rise_end >= s.omega_fall_start
        || s.delta_g_ramp_start >= s.delta_g_ramp_end
        || s.delta_g_ramp_end > 0.5
        || s.delta_l_ramp_start < 0.5
        || s.delta_l_ramp_start >= s.delta_l_ramp_end
    {
        return Err(Error::invalid("inconsistent schedule shape fractions"));
    }
    let t = constants.total_time;
    let omega = Schedule::from_pairs(&[
        (0.0, 0.0),
        (s.omega_rise_end * t, constants.omega_max),
        (s.omega_fall_start * t, constants.omega_max),
        (t, 0.0),
    ])?;
    let delta_global = Schedule::from_pairs(&[
        (0.0, constants.delta_g_initial),
        (s.delta_g_ramp_start * t, constants.delta_g_initial),
        (s.delta_g_ramp_end * t, 0.0),
        (t, 0.0),
    ])?;
    let delta_local_envelope = Schedule::from_pairs(&[
        (0.0, 0.0),
        (s.delta_l_ramp_start * t, 0.0),
        (s.delta_l_ramp_end * t, constants.delta_l_max),
        (t, constants.delta_l_max),
    ])?;
    Ok(DriveProgram {
        omega,
        phase: Schedule::constant(0.0, t)?,
        delta_global,
        delta_local_envelope,
        site_weights: p.to_vec(),
        n_steps,
        total_time: t,
    })
}

impl DriveProgram {
    pub fn n_sites(&self) -> usize {
        self.site_weights.len()
    }

    /// Checks the structural invariants of a protocol built for this
    /// pipeline: drive off at both ends, global detuning released by T/2,
    /// local detuning silent until T/2.
    pub fn validate(&self) -> Result<()> {
        check_weights(&self.site_weights)?;
        if self.n_steps < 2 {
            return Err(Error::invalid("n_steps must be at least 2"));
        }
        let t = self.total_time;
        for s in [&self.omega, &self.phase, &self.delta_global, &self.delta_local_envelope] {
            if (s.duration() - t).abs() > 1e-12 * t {
                return Err(Error::invalid("every channel must end at total_time"));
            }
        }
        if self.omega.value_at(0.0) != 0.0 || self.omega.value_at(t) != 0.0 {
            return Err(Error::invalid("omega must vanish at both ends"));
        }
        let late_global = self.delta_global.knots().iter().filter(|k| k.t >= 0.5 * t);
        if late_global.into_iter().any(|k| k.value != 0.0) || self.delta_global.value_at(0.5 * t) != 0.0 {
            return Err(Error::invalid("global detuning must be zero from T/2 on"));
        }
        let early_local = self.delta_local_envelope.knots().iter().filter(|k| k.t <= 0.5 * t);
        if early_local.into_iter().any(|k| k.value != 0.0) || self.delta_local_envelope.value_at(0.5 * t) != 0.0 {
            return Err(Error::invalid("local detuning must be zero up to T/2"));
        }
        Ok(())
    }

    pub fn sample_at(&self, t: f64) -> Result<DriveSample> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::invalid(format!("t = {t} outside [0, {}]", self.total_time)));
        }
        Ok(DriveSample {
            t,
            omega: self.omega.value_at(t),
            phase: self.phase.value_at(t),
            delta_global: self.delta_global.value_at(t),
            delta_local: self.delta_local_envelope.value_at(t),
        })
    }

    /// Times of the interpolation grid: `n_steps` points from 0 to T.
    pub fn grid_times(&self) -> Vec<f64> {
        let last = (self.n_steps - 1) as f64;
        (0..self.n_steps)
            .map(|k| {
                if k + 1 == self.n_steps {
                    self.total_time
                } else {
                    self.total_time * k as f64 / last
                }
            })
            .collect()
    }

    /// The values handed to the simulator.
    pub fn sample_grid(&self) -> Vec<DriveSample> {
        self.grid_times()
            .into_iter()
            .map(|t| self.sample_at(t).expect("grid lies inside [0, T]"))
            .collect()
    }

    /// Every detuning channel multiplied by `factor`.
    pub fn with_scaled_detunings(&self, factor: f64) -> DriveProgram {
        DriveProgram {
            delta_global: self.delta_global.scaled(factor),
            delta_local_envelope: self.delta_local_envelope.scaled(factor),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningChannel {
    Global,
    /// The largest per-site local detuning, i.e. the envelope times max p.
    LocalMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlewSegment {
    pub channel: DetuningChannel,
    pub t_start: f64,
    pub t_end: f64,
    /// dΔ/dt, rad/s².
    pub sweep_rate: f64,
    /// Largest Ω over the segment, rad/s.
    pub omega_ref: f64,
    /// Normalized slew (dΔ/dt) / (Ω_ref² / 2π); infinite when the sweep
    /// happens with the drive off.
    pub slew: f64,
}

pub fn slew_of(sweep_rate: f64, omega_ref: f64) -> f64 {
    if sweep_rate == 0.0 {
        0.0
    } else if omega_ref == 0.0 {
        f64::INFINITY
    } else {
        sweep_rate / (omega_ref * omega_ref / TAU)
    }
}

pub fn slew_profile(program: &DriveProgram) -> Vec<SlewSegment> {
    let max_p = program.site_weights.iter().copied().fold(0.0, f64::max);
    let channels = [
        (DetuningChannel::Global, program.delta_global.clone()),
        (DetuningChannel::LocalMax, program.delta_local_envelope.scaled(max_p)),
    ];
    let mut out = Vec::new();
    for (channel, schedule) in channels {
        for w in schedule.knots().windows(2) {
            let sweep_rate = (w[1].value - w[0].value) / (w[1].t - w[0].t);
            let omega_ref = program.omega.max_on(w[0].t, w[1].t);
            out.push(SlewSegment {
                channel,
                t_start: w[0].t,
                t_end: w[1].t,
                sweep_rate,
                omega_ref,
                slew: slew_of(sweep_rate, omega_ref),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlewReport {
    pub bound: f64,
    pub pass: bool,
    pub max_abs_slew: f64,
    pub violations: Vec<SlewSegment>,
}

/// Passes iff every finite segment slew satisfies |s| <= bound. Segments
/// swept with the drive off (infinite slew) are listed but do not fail.
pub fn validate_slew(program: &DriveProgram, bound: f64) -> Result<SlewReport> {
    if !(bound > 0.0) {
        return Err(Error::invalid("slew bound must be positive"));
    }
    let segments = slew_profile(program);
    let finite: Vec<&SlewSegment> = segments.iter().filter(|s| s.slew.is_finite()).collect();
    let max_abs_slew = finite.iter().map(|s| s.slew.abs()).fold(0.0, f64::max);
    let violations: Vec<SlewSegment> = finite.into_iter().filter(|s| s.slew.abs() > bound).copied().collect();
    Ok(SlewReport {
        bound,
        pass: violations.is_empty(),
        max_abs_slew,
        violations,
    })
}
