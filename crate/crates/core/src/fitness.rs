//! Speed and stability objectives computed from an evaluation trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GaitSpec;
use crate::surrogate::{rollout_with, EvaluationTrace, SurfaceModel, SurrogateConfig, Termination};

/// Both objectives are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// m/min, >= 0
    pub speed: f64,
    /// dimensionless, in [-1, 0]
    pub stability: f64,
}

impl Fitness {
    /// Assigned to evaluations that could not be carried out.
    pub const FLOOR: Fitness = Fitness {
        speed: 0.0,
        stability: -1.0,
    };

    pub fn new(speed: f64, stability: f64) -> Self {
        Self { speed, stability }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.speed, self.stability]
    }

    /// `self` is at least as good in both objectives and better in one.
    pub fn dominates(&self, other: &Fitness) -> bool {
        self.speed >= other.speed
            && self.stability >= other.stability
            && (self.speed > other.speed || self.stability > other.stability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    /// Weight of the acceleration term relative to orientation.
    pub alpha: f64,
    /// Maps raw stability onto the reported [-1, 0] scale.
    pub stability_scale: f64,
}

/// Calibrated so that the 5th-percentile random individual on the four
/// library surfaces reports a stability close to -1.
pub const DEFAULT_STABILITY_SCALE: f64 = 4.29;

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0 / 50.0,
            stability_scale: DEFAULT_STABILITY_SCALE,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.stability_scale > 0.0 && self.stability_scale.is_finite()) {
            return Err(Error::Invalid(format!(
                "stability_scale must be positive, got {}",
                self.stability_scale
            )));
        }
        Ok(())
    }
}

/// Net displacement over elapsed time, in m/min.
pub fn speed_fitness(trace: &EvaluationTrace) -> Result<f64> {
    let duration = trace.t_end - trace.t_start;
    if !(duration > 0.0) {
        return Err(Error::MalformedTrace("zero duration"));
    }
    if trace.positions.is_empty() {
        return Err(Error::MalformedTrace("empty position series"));
    }
    Ok(trace.displacement() / duration * 60.0)
}

/// Population standard deviation.
pub fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mut it = values.clone();
    let first = it.next().unwrap_or(0.0);
    if it.all(|v| v == first) {
        return 0.0;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / n as f64).sqrt()
}

/// Unscaled stability: `-sum_axes(alpha * std(acc) + std(ang))`.
pub fn stability_raw(trace: &EvaluationTrace, alpha: f64) -> Result<f64> {
    if trace.accelerations.is_empty() || trace.orientations.is_empty() {
        return Err(Error::MalformedTrace("empty sensor series"));
    }
    let mut total = 0.0;
    for axis in 0..3 {
        let acc = population_std(trace.accelerations.iter().map(|r| r[axis]));
        let ang = population_std(trace.orientations.iter().map(|r| r[axis]));
        total += alpha * acc + ang;
    }
    Ok(-total)
}

/// Stability on the reported scale, clamped at -1.
pub fn stability_fitness(trace: &EvaluationTrace, cfg: &FitnessConfig) -> Result<f64> {
    let raw = stability_raw(trace, cfg.alpha)?;
    Ok((raw * cfg.stability_scale).max(-1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Distance,
    Timeout,
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Distance => "distance",
            Outcome::Timeout => "timeout",
            Outcome::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "distance" => Some(Outcome::Distance),
            "timeout" => Some(Outcome::Timeout),
            "failed" => Some(Outcome::Failed),
            _ => None,
        }
    }
}

impl From<Termination> for Outcome {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Distance => Outcome::Distance,
            Termination::Timeout => Outcome::Timeout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: Fitness,
    pub outcome: Outcome,
}

pub fn evaluate(
    spec: &GaitSpec,
    surface: &SurfaceModel,
    seed: u64,
    cfg: &FitnessConfig,
) -> Result<Evaluation> {
    evaluate_with(spec, surface, seed, cfg, &SurrogateConfig::default())
}

/// Rolls out and scores one individual. An unreachable foot target yields
/// [`Fitness::FLOOR`] rather than an error.
pub fn evaluate_with(
    spec: &GaitSpec,
    surface: &SurfaceModel,
    seed: u64,
    cfg: &FitnessConfig,
    model: &SurrogateConfig,
) -> Result<Evaluation> {
    match rollout_with(spec, surface, seed, model) {
        Ok(trace) => Ok(Evaluation {
            fitness: Fitness {
                speed: speed_fitness(&trace)?,
                stability: stability_fitness(&trace, cfg)?,
            },
            outcome: trace.terminated_by.into(),
        }),
        Err(_) => Ok(Evaluation {
            fitness: Fitness::FLOOR,
            outcome: Outcome::Failed,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::SENSOR_RATE_HZ;

    fn trace(n: usize, pos: impl Fn(f64) -> [f64; 3]) -> EvaluationTrace {
        let positions: Vec<_> = (0..n).map(|i| pos(i as f64 / SENSOR_RATE_HZ)).collect();
        EvaluationTrace {
            orientations: vec![[0.0; 3]; n],
            accelerations: vec![[0.0; 3]; n],
            t_start: 0.0,
            t_end: (n - 1) as f64 / SENSOR_RATE_HZ,
            terminated_by: Termination::Timeout,
            positions,
        }
    }

    #[test]
    fn one_metre_in_six_seconds() {
        let tr = trace(601, |t| [0.0, t / 6.0, 0.3]);
        assert_eq!(speed_fitness(&tr).unwrap(), 10.0);
    }

    #[test]
    fn no_displacement_is_zero_speed() {
        let tr = trace(100, |_| [0.1, 0.2, 0.3]);
        assert_eq!(speed_fitness(&tr).unwrap(), 0.0);
    }

    #[test]
    fn linear_drift_speed() {
        let tr = trace(1001, |t| [0.02 * t, 0.0, 0.0]);
        assert!((speed_fitness(&tr).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_is_malformed() {
        let mut tr = trace(1, |_| [0.0; 3]);
        tr.t_end = 0.0;
        assert!(matches!(speed_fitness(&tr), Err(Error::MalformedTrace(_))));
        let mut tr = trace(10, |_| [0.0; 3]);
        tr.orientations.clear();
        assert!(stability_raw(&tr, 0.02).is_err());
    }

    #[test]
    fn constant_series_are_perfectly_stable() {
        let mut tr = trace(50, |t| [t, 0.0, 0.0]);
        for (i, r) in tr.orientations.iter_mut().enumerate() {
            *r = [0.1, -0.2, 0.3];
            tr.accelerations[i] = [1.0, 9.81, -2.0];
        }
        assert_eq!(stability_raw(&tr, 0.02).unwrap(), 0.0);
        assert_eq!(
            stability_fitness(&tr, &FitnessConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn alternating_orientation_has_std_a() {
        let a = 0.05;
        let mut tr = trace(100, |_| [0.0; 3]);
        for (i, r) in tr.orientations.iter_mut().enumerate() {
            r[1] = if i % 2 == 0 { -a } else { a };
        }
        let raw = stability_raw(&tr, 0.02).unwrap();
        assert!((raw + a).abs() < 1e-15);
        let cfg = FitnessConfig {
            alpha: 0.02,
            stability_scale: 3.0,
        };
        assert!((stability_fitness(&tr, &cfg).unwrap() + a * 3.0).abs() < 1e-15);
    }

    #[test]
    fn reported_stability_clamps_at_minus_one() {
        let mut tr = trace(100, |_| [0.0; 3]);
        for (i, r) in tr.orientations.iter_mut().enumerate() {
            *r = if i % 2 == 0 { [-2.0; 3] } else { [2.0; 3] };
        }
        assert_eq!(
            stability_fitness(&tr, &FitnessConfig::default()).unwrap(),
            -1.0
        );
    }

    #[test]
    fn default_alpha_is_one_fiftieth() {
        assert_eq!(FitnessConfig::default().alpha, 1.0 / 50.0);
        assert!(FitnessConfig::default().validate().is_ok());
        let bad = FitnessConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dominance() {
        let a = Fitness::new(10.0, -0.5);
        let b = Fitness::new(12.0, -0.7);
        assert!(!a.dominates(&b) && !b.dominates(&a));
        assert!(Fitness::new(12.0, -0.1).dominates(&Fitness::new(10.0, -0.2)));
        assert!(!a.dominates(&a));
    }
}
