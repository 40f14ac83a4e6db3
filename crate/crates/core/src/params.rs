//! The 18-parameter search space.
//!
//! A [`Genome`] holds every parameter normalized to `[0, 1]`; [`GaitSpec`]
//! holds the same values in physical units. The schema order is frozen so
//! that run logs stay replayable:
//!
//! | index | parameter              | range             |
//! |-------|------------------------|-------------------|
//! | 0     | ground front, cranial  | [0, 100] mm       |
//! | 1     | ground back, cranial   | [-150, -50] mm    |
//! | 2-4   | air front, lat/cra/dor | [-12.5, 12.5] / [25, 125] / [19, 41] mm |
//! | 5-7   | air top, lat/cra/dor   | [-12.5, 12.5] / [-30, 30] / [39, 61] mm |
//! | 8-10  | air back, lat/cra/dor  | [-12.5, 12.5] / [-125, -25] / [19, 41] mm |
//! | 11    | wag phase              | [-pi/8, pi/8]     |
//! | 12    | wag amplitude, lateral | [0, 14] mm        |
//! | 13    | wag amplitude, cranial | [0, 14] mm        |
//! | 14    | lift duration          | [0.13, 0.20]      |
//! | 15    | frequency              | [0.25, 1.0] Hz    |
//! | 16    | femur extension        | [0, 50] mm        |
//! | 17    | tibia extension        | [0, 100] mm       |

use std::f64::consts::FRAC_PI_8;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GENOME_LEN: usize = 18;
pub const SPLINE_PARAM_COUNT: usize = 11;

/// Name and closed range of one search-space coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl ParamDef {
    const fn new(name: &'static str, lo: f64, hi: f64) -> Self {
        Self { name, lo, hi }
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.lo && value <= self.hi
    }
}

pub const PARAMS: [ParamDef; GENOME_LEN] = [
    ParamDef::new("ground_front_cranial", 0.0, 100.0),
    ParamDef::new("ground_back_cranial", -150.0, -50.0),
    ParamDef::new("air_front_lateral", -12.5, 12.5),
    ParamDef::new("air_front_cranial", 25.0, 125.0),
    ParamDef::new("air_front_dorsal", 19.0, 41.0),
    ParamDef::new("air_top_lateral", -12.5, 12.5),
    ParamDef::new("air_top_cranial", -30.0, 30.0),
    ParamDef::new("air_top_dorsal", 39.0, 61.0),
    ParamDef::new("air_back_lateral", -12.5, 12.5),
    ParamDef::new("air_back_cranial", -125.0, -25.0),
    ParamDef::new("air_back_dorsal", 19.0, 41.0),
    ParamDef::new("wag_phase", -FRAC_PI_8, FRAC_PI_8),
    ParamDef::new("wag_amp_lateral", 0.0, 14.0),
    ParamDef::new("wag_amp_cranial", 0.0, 14.0),
    ParamDef::new("lift_duration", 0.13, 0.20),
    ParamDef::new("frequency", 0.25, 1.0),
    ParamDef::new("femur_extension", 0.0, 50.0),
    ParamDef::new("tibia_extension", 0.0, 100.0),
];

pub const FEMUR_INDEX: usize = 16;
pub const TIBIA_INDEX: usize = 17;

/// Normalized parameter vector; every element is finite and in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Genome([f64; GENOME_LEN]);

impl Genome {
    pub fn new(values: [f64; GENOME_LEN]) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::GenomeElement {
                    index,
                    name: PARAMS[index].name,
                    value,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let array: [f64; GENOME_LEN] = values.try_into().map_err(|_| Error::GenomeLength {
            expected: GENOME_LEN,
            actual: values.len(),
        })?;
        Self::new(array)
    }

    pub fn splat(value: f64) -> Result<Self> {
        Self::new([value; GENOME_LEN])
    }

    pub fn values(&self) -> &[f64; GENOME_LEN] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }
}

impl fmt::Display for Genome {
    /// Serializes as 18 comma-separated values in schema order, using the
    /// shortest representation that round-trips exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad genome value {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_slice(&values)
    }
}

/// Spline control points (mm). The ground points have implicit lateral and
/// dorsal coordinates of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineParams {
    pub ground_front_cranial: f64,
    pub ground_back_cranial: f64,
    /// (lateral, cranial, dorsal)
    pub air_front: Vector3<f64>,
    pub air_top: Vector3<f64>,
    pub air_back: Vector3<f64>,
}

impl SplineParams {
    pub fn ground_front(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.ground_front_cranial, 0.0)
    }

    pub fn ground_back(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.ground_back_cranial, 0.0)
    }

    /// Length of the straight stance segment between the ground points.
    pub fn step_length(&self) -> f64 {
        self.ground_front_cranial - self.ground_back_cranial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub wag_phase: f64,
    pub wag_amp_lateral: f64,
    pub wag_amp_cranial: f64,
    /// Fraction of the period spent in swing.
    pub lift_duration: f64,
    /// Gait cycles per second.
    pub frequency: f64,
}

impl GaitParams {
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// Segment extensions (mm) shared by all four legs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphologyParams {
    pub femur_extension: f64,
    pub tibia_extension: f64,
}

/// Decoded phenotype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitSpec {
    pub spline: SplineParams,
    pub gait: GaitParams,
    pub morphology: MorphologyParams,
}

impl GaitSpec {
    /// Phenotype values in genome schema order.
    pub fn to_values(&self) -> [f64; GENOME_LEN] {
        let s = &self.spline;
        let g = &self.gait;
        let m = &self.morphology;
        [
            s.ground_front_cranial,
            s.ground_back_cranial,
            s.air_front.x,
            s.air_front.y,
            s.air_front.z,
            s.air_top.x,
            s.air_top.y,
            s.air_top.z,
            s.air_back.x,
            s.air_back.y,
            s.air_back.z,
            g.wag_phase,
            g.wag_amp_lateral,
            g.wag_amp_cranial,
            g.lift_duration,
            g.frequency,
            m.femur_extension,
            m.tibia_extension,
        ]
    }

    /// Inverse of [`GaitSpec::to_values`]; performs no range checks.
    pub fn from_values(v: &[f64; GENOME_LEN]) -> Self {
        Self {
            spline: SplineParams {
                ground_front_cranial: v[0],
                ground_back_cranial: v[1],
                air_front: Vector3::new(v[2], v[3], v[4]),
                air_top: Vector3::new(v[5], v[6], v[7]),
                air_back: Vector3::new(v[8], v[9], v[10]),
            },
            gait: GaitParams {
                wag_phase: v[11],
                wag_amp_lateral: v[12],
                wag_amp_cranial: v[13],
                lift_duration: v[14],
                frequency: v[15],
            },
            morphology: MorphologyParams {
                femur_extension: v[16],
                tibia_extension: v[17],
            },
        }
    }
}

/// One out-of-range field found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub field: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {} outside [{}, {}]",
            self.field, self.value, self.lo, self.hi
        )
    }
}

/// Maps each normalized element onto its physical range.
pub fn decode(genome: &Genome) -> GaitSpec {
    let mut v = [0.0; GENOME_LEN];
    for (i, (out, g)) in v.iter_mut().zip(genome.values()).enumerate() {
        let def = &PARAMS[i];
        *out = def.lo + g * def.span();
    }
    GaitSpec::from_values(&v)
}

/// Inverse of [`decode`]. Fails on the first out-of-range value.
pub fn encode(spec: &GaitSpec) -> Result<Genome> {
    let values = spec.to_values();
    let mut g = [0.0; GENOME_LEN];
    for (i, (&value, out)) in values.iter().zip(g.iter_mut()).enumerate() {
        let def = &PARAMS[i];
        if !def.contains(value) {
            return Err(Error::OutOfRange {
                name: def.name,
                value,
                lo: def.lo,
                hi: def.hi,
            });
        }
        *out = ((value - def.lo) / def.span()).clamp(0.0, 1.0);
    }
    Genome::new(g)
}

/// Lists every field outside its range, in schema order.
pub fn validate(spec: &GaitSpec) -> Vec<Violation> {
    spec.to_values()
        .iter()
        .enumerate()
        .filter(|(i, &v)| !PARAMS[*i].contains(v))
        .map(|(index, &value)| Violation {
            index,
            field: PARAMS[index].name,
            value,
            lo: PARAMS[index].lo,
            hi: PARAMS[index].hi,
        })
        .collect()
}
