//! Pareto fronts, hypervolume and its convergence over a run.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::fitness::Fitness;
use crate::nsga2::EvalRecord;
use crate::params::Genome;

/// Hypervolume reference: zero speed, worst stability.
pub const HV_REFERENCE: Fitness = Fitness::FLOOR;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    /// Position of the point in the input the front was extracted from.
    pub source: usize,
    pub eval_index: usize,
    pub fitness: Fitness,
    pub genome: Genome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontSnapshot {
    /// Number of evaluations the front was extracted from.
    pub eval_count: usize,
    /// Sorted by speed, descending.
    pub points: Vec<FrontPoint>,
}

impl FrontSnapshot {
    pub fn fitnesses(&self) -> Vec<Fitness> {
        self.points.iter().map(|p| p.fitness).collect()
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.fitnesses(), HV_REFERENCE)
    }
}

/// Indices of the non-dominated members of `fits`. Equal points collapse to
/// the one that comes first. The result is in input order.
pub fn pareto_indices(fits: &[Fitness]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fits.len()).collect();
    // speed desc, stability desc, then input order
    order.sort_by(|&a, &b| {
        fits[b]
            .speed
            .total_cmp(&fits[a].speed)
            .then(fits[b].stability.total_cmp(&fits[a].stability))
            .then(a.cmp(&b))
    });
    let mut keep = Vec::new();
    let mut best_stability = f64::NEG_INFINITY;
    for i in order {
        // every earlier point has speed >= this one
        if fits[i].stability > best_stability {
            best_stability = fits[i].stability;
            keep.push(i);
        }
    }
    keep.sort_unstable();
    keep
}

/// Front of a sequence of evaluation records (in the given order).
pub fn pareto_front<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> FrontSnapshot {
    let records: Vec<&EvalRecord> = records.into_iter().collect();
    let fits: Vec<Fitness> = records.iter().map(|r| r.fitness).collect();
    let mut points: Vec<FrontPoint> = pareto_indices(&fits)
        .into_iter()
        .map(|i| FrontPoint {
            source: i,
            eval_index: records[i].eval_index,
            fitness: records[i].fitness,
            genome: records[i].genome,
        })
        .collect();
    points.sort_by(|a, b| {
        b.fitness
            .speed
            .total_cmp(&a.fitness.speed)
            .then(a.source.cmp(&b.source))
    });
    FrontSnapshot {
        eval_count: records.len(),
        points,
    }
}

/// Area dominated by `points` and bounded below by `reference`.
///
/// Coordinates below the reference are clamped to it, so such points add
/// nothing. Dominated points are ignored.
pub fn hypervolume_2d(points: &[Fitness], reference: Fitness) -> f64 {
    let clamped: Vec<Fitness> = points
        .iter()
        .map(|p| {
            Fitness::new(
                p.speed.max(reference.speed),
                p.stability.max(reference.stability),
            )
        })
        .collect();
    let mut front: Vec<Fitness> = pareto_indices(&clamped)
        .into_iter()
        .map(|i| clamped[i])
        .collect();
    front.sort_by(|a, b| b.speed.total_cmp(&a.speed));
    let mut area = 0.0;
    for (k, p) in front.iter().enumerate() {
        let next_speed = front.get(k + 1).map_or(reference.speed, |q| q.speed);
        area += (p.speed - next_speed) * (p.stability - reference.stability);
    }
    area
}

/// Hypervolume of the cumulative front after every `stride` evaluations,
/// plus the final count if it is not a multiple of `stride`.
pub fn hypervolume_convergence(records: &[EvalRecord], stride: usize) -> Vec<(usize, f64)> {
    assert!(stride > 0, "stride must be positive");
    let mut counts: Vec<usize> = (1..=records.len() / stride).map(|k| k * stride).collect();
    if !records.len().is_multiple_of(stride) {
        counts.push(records.len());
    }
    counts
        .into_iter()
        .map(|n| {
            let fits: Vec<Fitness> = records[..n].iter().map(|r| r.fitness).collect();
            (n, hypervolume_2d(&fits, HV_REFERENCE))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPoint {
    pub eval_count: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mean and two-sided Student-t confidence interval across runs at each
/// point of equally sampled series. With a single run the interval
/// collapses to the mean.
pub fn mean_confidence_series(series: &[Vec<(usize, f64)>], level: f64) -> Vec<IntervalPoint> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let n = series.len();
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    let t = if n > 1 {
        StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("degrees of freedom are positive")
            .inverse_cdf(0.5 + level / 2.0)
    } else {
        0.0
    };
    (0..len)
        .map(|k| {
            let values: Vec<f64> = series.iter().map(|s| s[k].1).collect();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                t * (var / n as f64).sqrt()
            } else {
                0.0
            };
            IntervalPoint {
                eval_count: first[k].0,
                mean,
                lower: mean - half,
                upper: mean + half,
            }
        })
        .collect()
}
