//! Averaged foot trajectories and control-point densities.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::gait::{build_spline, AIR_BACK, AIR_FRONT, AIR_TOP, DUMP_SAMPLES};
use crate::params::GaitSpec;

/// Position-wise mean of the trajectories of `specs`, sampled at `samples`
/// evenly spaced phases.
pub fn mean_spline(specs: &[GaitSpec], samples: usize) -> Result<Vec<Vector3<f64>>> {
    if specs.is_empty() {
        return Err(Error::Invalid("mean trajectory of an empty set".into()));
    }
    let mut sum = vec![Vector3::zeros(); samples];
    for spec in specs {
        for (acc, (_, p)) in sum.iter_mut().zip(build_spline(spec).dump(samples)) {
            *acc += p;
        }
    }
    let n = specs.len() as f64;
    Ok(sum.into_iter().map(|p| p / n).collect())
}

pub fn mean_spline_default(specs: &[GaitSpec]) -> Result<Vec<Vector3<f64>>> {
    mean_spline(specs, DUMP_SAMPLES)
}

/// Swing control points with a per-individual density: (label, knot index).
pub const DENSITY_KNOTS: [(&str, usize); 3] = [
    ("air_back", AIR_BACK),
    ("air_top", AIR_TOP),
    ("air_front", AIR_FRONT),
];

/// `(cranial, dorsal)` position of a knot for each spec.
pub fn knot_side_view(specs: &[GaitSpec], knot: usize) -> Vec<[f64; 2]> {
    specs
        .iter()
        .map(|s| {
            let k = build_spline(s).knots[knot];
            [k.y, k.z]
        })
        .collect()
}

/// Bivariate Gaussian product-kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde2d {
    pub points: Vec<[f64; 2]>,
    pub bandwidth: [f64; 2],
}

/// Sample standard deviation (n - 1 denominator).
fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Scott's rule bandwidth factor `n^(-1/(d+4))` for two dimensions.
pub fn scott_factor(n: usize) -> f64 {
    (n as f64).powf(-1.0 / 6.0)
}

/// KDE with Scott's rule bandwidth per dimension.
pub fn kde_scott(points: &[[f64; 2]]) -> Result<Kde2d> {
    if points.len() < 2 {
        return Err(Error::Invalid(
            "density estimate needs at least two samples".into(),
        ));
    }
    let factor = scott_factor(points.len());
    let mut bandwidth = [0.0; 2];
    for (d, bw) in bandwidth.iter_mut().enumerate() {
        let std = sample_std(points.iter().map(|p| p[d]));
        if !(std > 0.0) {
            return Err(Error::Invalid(format!(
                "dimension {d} has zero variance; add a small jitter before estimating"
            )));
        }
        *bw = std * factor;
    }
    Ok(Kde2d {
        points: points.to_vec(),
        bandwidth,
    })
}

impl Kde2d {
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let [hx, hy] = self.bandwidth;
        let norm = 1.0 / (TAU * hx * hy * self.points.len() as f64);
        norm * self
            .points
            .iter()
            .map(|p| {
                let u = (x - p[0]) / hx;
                let v = (y - p[1]) / hy;
                (-0.5 * (u * u + v * v)).exp()
            })
            .sum::<f64>()
    }

    /// Grid spanning the samples plus `pad` bandwidths on each side.
    pub fn grid(&self, nx: usize, ny: usize, pad: f64) -> KdeGrid {
        let span = |d: usize| {
            let lo = self
                .points
                .iter()
                .map(|p| p[d])
                .fold(f64::INFINITY, f64::min);
            let hi = self
                .points
                .iter()
                .map(|p| p[d])
                .fold(f64::NEG_INFINITY, f64::max);
            (lo - pad * self.bandwidth[d], hi + pad * self.bandwidth[d])
        };
        let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        let xs = axis(span(0), nx);
        let ys = axis(span(1), ny);
        let density = ys
            .iter()
            .map(|&y| xs.iter().map(|&x| self.density(x, y)).collect())
            .collect();
        KdeGrid { xs, ys, density }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `density[iy][ix]`
    pub density: Vec<Vec<f64>>,
}

impl KdeGrid {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let w = |axis: &[f64], i: usize| {
            let n = axis.len();
            let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
            if i == 0 || i == n - 1 {
                step / 2.0
            } else {
                step
            }
        };
        let mut total = 0.0;
        for (iy, row) in self.density.iter().enumerate() {
            for (ix, v) in row.iter().enumerate() {
                total += v * w(&self.xs, ix) * w(&self.ys, iy);
            }
        }
        total
    }

    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (iy, row) in self.density.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        (self.xs[best.0], self.ys[best.1])
    }
}
