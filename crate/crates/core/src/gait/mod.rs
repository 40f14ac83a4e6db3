//! Gait generation: foot trajectory, per-leg phasing, balancing wag and
//! leg kinematics.
//!
//! Body axes: `x` lateral (positive to the right), `y` cranial (forward),
//! `z` dorsal (up). All lengths are millimetres.

mod kinematics;
mod spline;

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::params::{GaitParams, GaitSpec};

pub use kinematics::{
    forward_kinematics, inverse_kinematics, JointAngles, LegGeometry, COXA_LENGTH_MM, COXA_LIMITS,
    FEMUR_BASE_MM, FEMUR_LIMITS, TIBIA_BASE_MM, TIBIA_LIMITS,
};
pub use spline::{
    build_spline, sample_foot, TrajectorySpline, AIR_BACK, AIR_FRONT, AIR_TOP, DUMP_SAMPLES,
    GROUND_BACK, GROUND_FRONT, KNOT_COUNT,
};

/// Gait controller rate (Hz).
pub const CONTROL_RATE_HZ: f64 = 50.0;

/// Offset added to the gait phase before evaluating the wag, so that a wag
/// phase of zero puts the peak lateral lean in the middle of the left-side
/// swing pair.
pub const WAG_REFERENCE_PHASE: f64 = 0.225;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    FrontLeft,
    FrontRight,
    BackLeft,
    BackRight,
}

impl Leg {
    pub const ALL: [Leg; 4] = [
        Leg::FrontLeft,
        Leg::FrontRight,
        Leg::BackLeft,
        Leg::BackRight,
    ];

    /// Static phase shift of the crawl gait (lateral sequence FL, BL, FR, BR).
    pub fn phase_offset(self) -> f64 {
        match self {
            Leg::FrontLeft => 0.0,
            Leg::FrontRight => 0.5,
            Leg::BackLeft => 0.75,
            Leg::BackRight => 0.25,
        }
    }

    /// +1 for right legs, -1 for left legs.
    pub fn side(self) -> f64 {
        match self {
            Leg::FrontLeft | Leg::BackLeft => -1.0,
            Leg::FrontRight | Leg::BackRight => 1.0,
        }
    }

    pub fn is_front(self) -> bool {
        matches!(self, Leg::FrontLeft | Leg::FrontRight)
    }

    /// Coxa joint position in the body frame (mm).
    pub fn hip_position(self) -> Vector3<f64> {
        let cranial = if self.is_front() { 180.0 } else { -180.0 };
        Vector3::new(110.0 * self.side(), cranial, 0.0)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Body wag at `phase`: `(lateral, cranial)` mm. Lateral oscillates once per
/// cycle, cranial twice.
pub fn wag_offset(phase: f64, gait: &GaitParams) -> (f64, f64) {
    let shifted = phase + gait.wag_phase / TAU;
    (
        gait.wag_amp_lateral * (TAU * shifted).sin(),
        gait.wag_amp_cranial * (2.0 * TAU * shifted).sin(),
    )
}

/// Gait-cycle phase at time `t`.
pub fn gait_phase(t: f64, gait: &GaitParams) -> f64 {
    frac(t * gait.frequency)
}

pub fn leg_phase(t: f64, gait: &GaitParams, leg: Leg) -> f64 {
    frac(t * gait.frequency + leg.phase_offset())
}

/// Wag applied at time `t`, including the reference phase offset.
pub fn wag_at(t: f64, gait: &GaitParams) -> (f64, f64) {
    wag_offset(frac(t * gait.frequency + WAG_REFERENCE_PHASE), gait)
}

/// Hip-relative foot targets at time `t`, ordered as [`Leg::ALL`].
///
/// Each leg samples the shared trajectory at its own phase; the wag is
/// subtracted from every target so the body leans away from the lifted leg.
pub fn leg_targets(t: f64, spec: &GaitSpec, spline: &TrajectorySpline) -> [Vector3<f64>; 4] {
    let gait = &spec.gait;
    let (wag_lat, wag_cra) = wag_at(t, gait);
    Leg::ALL.map(|leg| {
        let mut p = spline.sample_wrapped(leg_phase(t, gait, leg));
        if wag_lat != 0.0 {
            p.x -= wag_lat;
        }
        if wag_cra != 0.0 {
            p.y -= wag_cra;
        }
        p
    })
}
