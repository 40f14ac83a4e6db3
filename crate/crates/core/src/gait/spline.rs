//! Looping cubic Hermite foot trajectory through five control points.
//!
//! Knot order is `ground_front -> ground_back -> air_back -> air_top ->
//! air_front`, then back to `ground_front`. Phase 0 is touchdown at
//! `ground_front`; stance fills `[0, 1 - lift_duration)` and swing fills the
//! rest of the period.
//!
//! Stance is a straight line traversed at constant velocity: both ground
//! knots carry the stance velocity as their tangent, which turns the first
//! Hermite segment into exact linear interpolation and keeps the loop C1.
//! Air knots use closed Catmull-Rom tangents.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::params::GaitSpec;

pub const KNOT_COUNT: usize = 5;
pub const GROUND_FRONT: usize = 0;
pub const GROUND_BACK: usize = 1;
pub const AIR_BACK: usize = 2;
pub const AIR_TOP: usize = 3;
pub const AIR_FRONT: usize = 4;

/// Samples per period in trajectory dumps.
pub const DUMP_SAMPLES: usize = 1000;

// Smallest chord used when splitting the swing window, so coincident air
// knots still get strictly increasing phases.
const MIN_CHORD_MM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpline {
    pub knots: [Vector3<f64>; KNOT_COUNT],
    pub knot_phases: [f64; KNOT_COUNT],
    /// mm per unit phase
    pub tangents: [Vector3<f64>; KNOT_COUNT],
    /// seconds
    pub period: f64,
}

impl TrajectorySpline {
    /// Builds the trajectory for a validated spec.
    ///
    /// # Panics
    ///
    /// If the ground points coincide, which cannot happen inside the
    /// parameter ranges (their cranial gap is at least 50 mm).
    pub fn build(spec: &GaitSpec) -> Self {
        let sp = &spec.spline;
        let knots = [
            sp.ground_front(),
            sp.ground_back(),
            sp.air_back,
            sp.air_top,
            sp.air_front,
        ];
        assert!(
            sp.step_length() > 0.0,
            "ground points must be separated, got step length {}",
            sp.step_length()
        );

        let lift = spec.gait.lift_duration;
        let stance_end = 1.0 - lift;

        // Swing window split proportionally to chord length.
        let chords: [f64; 4] = [
            (knots[AIR_BACK] - knots[GROUND_BACK])
                .norm()
                .max(MIN_CHORD_MM),
            (knots[AIR_TOP] - knots[AIR_BACK]).norm().max(MIN_CHORD_MM),
            (knots[AIR_FRONT] - knots[AIR_TOP]).norm().max(MIN_CHORD_MM),
            (knots[GROUND_FRONT] - knots[AIR_FRONT])
                .norm()
                .max(MIN_CHORD_MM),
        ];
        let total: f64 = chords.iter().sum();
        let mut knot_phases = [0.0, stance_end, 0.0, 0.0, 0.0];
        let mut acc = 0.0;
        for k in 0..3 {
            acc += chords[k];
            knot_phases[AIR_BACK + k] = stance_end + lift * acc / total;
        }

        let stance_velocity = (knots[GROUND_BACK] - knots[GROUND_FRONT]) / stance_end;
        let mut tangents = [Vector3::zeros(); KNOT_COUNT];
        tangents[GROUND_FRONT] = stance_velocity;
        tangents[GROUND_BACK] = stance_velocity;
        for i in AIR_BACK..=AIR_FRONT {
            let prev = i - 1;
            let next = (i + 1) % KNOT_COUNT;
            let mut span = knot_phases[next] - knot_phases[prev];
            if next < i {
                span += 1.0;
            }
            tangents[i] = (knots[next] - knots[prev]) / span;
        }

        Self {
            knots,
            knot_phases,
            tangents,
            period: spec.gait.period(),
        }
    }

    pub fn stance_end(&self) -> f64 {
        self.knot_phases[GROUND_BACK]
    }

    pub fn is_stance(&self, phase: f64) -> bool {
        phase < self.stance_end()
    }

    /// Segment index and its `[start, end)` phase window.
    fn segment(&self, phase: f64) -> (usize, f64, f64) {
        let i = self
            .knot_phases
            .iter()
            .rposition(|&k| k <= phase)
            .unwrap_or_default();
        let start = self.knot_phases[i];
        let end = if i + 1 < KNOT_COUNT {
            self.knot_phases[i + 1]
        } else {
            1.0 + self.knot_phases[0]
        };
        (i, start, end)
    }

    /// Foot position at `phase` in `[0, 1)`.
    pub fn sample(&self, phase: f64) -> Result<Vector3<f64>> {
        self.evaluate(phase).map(|(p, _)| p)
    }

    /// Position and derivative (mm per unit phase) at `phase` in `[0, 1)`.
    pub fn evaluate(&self, phase: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        if !(0.0..1.0).contains(&phase) {
            return Err(Error::PhaseOutOfRange(phase));
        }
        let (i, start, end) = self.segment(phase);
        let j = (i + 1) % KNOT_COUNT;
        let h = end - start;
        let t = (phase - start) / h;
        let (p0, p1) = (self.knots[i], self.knots[j]);
        let (m0, m1) = (self.tangents[i] * h, self.tangents[j] * h);

        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let pos = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;

        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let vel = (p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11) / h;
        Ok((pos, vel))
    }

    /// Wraps any finite phase into `[0, 1)` before sampling.
    pub fn sample_wrapped(&self, phase: f64) -> Vector3<f64> {
        let mut p = phase.rem_euclid(1.0);
        if p >= 1.0 {
            p = 0.0;
        }
        self.sample(p).expect("wrapped phase is in range")
    }

    /// `(phase, position)` at `n` evenly spaced phases.
    pub fn dump(&self, n: usize) -> Vec<(f64, Vector3<f64>)> {
        (0..n)
            .map(|k| {
                let phase = k as f64 / n as f64;
                (phase, self.sample_wrapped(phase))
            })
            .collect()
    }
}

pub fn build_spline(spec: &GaitSpec) -> TrajectorySpline {
    TrajectorySpline::build(spec)
}

pub fn sample_foot(spline: &TrajectorySpline, phase: f64) -> Result<Vector3<f64>> {
    spline.sample(phase)
}
