//! Deterministic stand-in for the robot walking on a parametric surface.
//!
//! The model is kinematic. Each 50 Hz control tick the gait engine produces
//! foot targets, the legs track them through inverse kinematics under a
//! joint-speed limit, and the body advances by the mean rearward motion of
//! the supporting feet scaled by the surface grip. Orientation follows a
//! critically damped second-order response to support-polygon asymmetry and
//! terrain height differences. Sensor series are produced at 100 Hz.
//!
//! Nothing here claims physical fidelity; the structure is monotone in the
//! surface parameters and fully seeded.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{
    build_spline, forward_kinematics, inverse_kinematics, leg_phase, leg_targets, JointAngles, Leg,
    LegGeometry, TrajectorySpline, CONTROL_RATE_HZ, FEMUR_BASE_MM, TIBIA_BASE_MM,
};
use crate::params::GaitSpec;

pub const SENSOR_RATE_HZ: f64 = 100.0;

/// Parametric terrain. Scalars other than the gains lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    pub name: String,
    /// 1 = rigid
    pub hardness: f64,
    /// 0 = fine-textured
    pub roughness: f64,
    pub friction: f64,
    /// Foot sinkage (mm) at hardness 0.
    #[serde(default = "default_sinkage_gain")]
    pub sinkage_gain: f64,
    /// Ground height noise scale (mm) at roughness 1.
    #[serde(default = "default_noise_gain")]
    pub noise_gain: f64,
}

fn default_sinkage_gain() -> f64 {
    30.0
}

fn default_noise_gain() -> f64 {
    12.0
}

impl SurfaceModel {
    pub fn new(name: &str, hardness: f64, roughness: f64, friction: f64) -> Self {
        Self {
            name: name.to_string(),
            hardness,
            roughness,
            friction,
            sinkage_gain: default_sinkage_gain(),
            noise_gain: default_noise_gain(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("hardness", self.hardness),
            ("roughness", self.roughness),
            ("friction", self.friction),
        ];
        for (field, v) in unit {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::Invalid(format!(
                    "surface {}: {field} = {v} outside [0, 1]",
                    self.name
                )));
            }
        }
        for (field, v) in [
            ("sinkage_gain", self.sinkage_gain),
            ("noise_gain", self.noise_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!(
                    "surface {}: {field} = {v} must be non-negative",
                    self.name
                )));
            }
        }
        if self.name.is_empty() {
            return Err(Error::Invalid("surface name must not be empty".into()));
        }
        Ok(())
    }
}

/// The four carpets: hard/soft crossed with fine/coarse. A is the baseline.
pub fn surface_library() -> Vec<SurfaceModel> {
    vec![
        SurfaceModel::new("A", 0.95, 0.05, 0.95),
        SurfaceModel::new("B", 0.25, 0.05, 0.85),
        SurfaceModel::new("C", 0.95, 0.75, 0.90),
        SurfaceModel::new("D", 0.25, 0.75, 0.80),
    ]
}

/// Model constants. The defaults are frozen; tests and experiments rely on
/// them for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    /// Evaluation time limit (s).
    pub max_duration: f64,
    /// Net displacement (m) that ends an evaluation; `None` runs to the limit.
    pub stop_distance: Option<f64>,
    /// Stance speed (mm/s) at which slip saturates.
    pub ref_speed: f64,
    /// Per-joint angular speed limit (rad/s).
    pub joint_speed_limit: f64,
    /// Standing height as a fraction of femur + tibia length.
    pub height_fraction: f64,
    /// Outward foot offset beyond the coxa as a fraction of femur + tibia.
    pub splay_fraction: f64,
    /// A foot higher than this (mm) above the ground plane carries no load.
    pub contact_threshold: f64,
    /// Orientation response time constant (s).
    pub tilt_time_constant: f64,
    /// Body height response time constant (s).
    pub height_time_constant: f64,
    /// Tilt (rad) per unit support asymmetry on rigid ground.
    pub support_tilt_hard: f64,
    /// Extra tilt per unit asymmetry at hardness 0.
    pub support_tilt_soft: f64,
    /// Stance speed (mm/s) that doubles the support tilt.
    pub tilt_speed_ref: f64,
    /// Orientation response scales with `(reach / base reach)^lever_exponent`.
    pub lever_exponent: f64,
    /// Yaw (rad) per unit of diagonal terrain height difference.
    pub yaw_gain: f64,
    /// Acceleration jitter (m/s^2) per mm of terrain noise scale.
    pub acc_jitter_gain: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            max_duration: 10.0,
            stop_distance: Some(1.0),
            ref_speed: 300.0,
            joint_speed_limit: 3.0,
            height_fraction: 0.75,
            splay_fraction: 0.35,
            contact_threshold: 5.0,
            tilt_time_constant: 0.08,
            height_time_constant: 0.1,
            support_tilt_hard: 0.01,
            support_tilt_soft: 0.12,
            tilt_speed_ref: 150.0,
            lever_exponent: 2.0,
            yaw_gain: 0.5,
            acc_jitter_gain: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Distance,
    Timeout,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Distance => "distance",
            Termination::Timeout => "timeout",
        }
    }
}

/// Sensor streams from one rollout, sampled uniformly at 100 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTrace {
    /// Body position (m): lateral, cranial, dorsal.
    pub positions: Vec<[f64; 3]>,
    /// Roll, pitch, yaw (rad).
    pub orientations: Vec<[f64; 3]>,
    /// Linear acceleration (m/s^2).
    pub accelerations: Vec<[f64; 3]>,
    pub t_start: f64,
    pub t_end: f64,
    pub terminated_by: Termination,
}

impl EvaluationTrace {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn displacement(&self) -> f64 {
        match (self.positions.first(), self.positions.last()) {
            (Some(a), Some(b)) => {
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
            }
            _ => 0.0,
        }
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t_start + index as f64 / SENSOR_RATE_HZ
    }

    /// CSV dump: `t,px,py,pz,roll,pitch,yaw,ax,ay,az`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# gaitevo trace v1")?;
        writeln!(out, "t,px,py,pz,roll,pitch,yaw,ax,ay,az")?;
        for i in 0..self.len() {
            let (p, o, a) = (
                self.positions[i],
                self.orientations[i],
                self.accelerations[i],
            );
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.time(i),
                p[0],
                p[1],
                p[2],
                o[0],
                o[1],
                o[2],
                a[0],
                a[1],
                a[2]
            )?;
        }
        Ok(())
    }
}

/// Why a rollout could not produce a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutFailure {
    pub leg: Leg,
    pub time: f64,
    pub shortfall: f64,
}

impl std::fmt::Display for RolloutFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} target unreachable by {:.3} mm at t = {:.2} s",
            self.leg, self.shortfall, self.time
        )
    }
}

/// Standard-normal draw addressed by `(seed, stream, counter)`, independent
/// of how many other draws were made.
fn counter_normal(seed: u64, stream: u64, counter: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(counter) * 32);
    rng.sample(StandardNormal)
}

const TERRAIN_STREAM: u64 = 1;
const JITTER_STREAM: u64 = 16;

/// Fixed per-rollout quantities.
struct Body {
    geom: LegGeometry,
    height: f64,
    splay: f64,
    lever: f64,
}

impl Body {
    fn new(spec: &GaitSpec, cfg: &SurrogateConfig) -> Self {
        let geom = LegGeometry::from_morphology(&spec.morphology);
        let base_reach = FEMUR_BASE_MM + TIBIA_BASE_MM;
        Self {
            geom,
            height: cfg.height_fraction * geom.reach(),
            splay: cfg.splay_fraction * geom.reach(),
            lever: (geom.reach() / base_reach).powf(cfg.lever_exponent),
        }
    }

    /// Hip-relative target (body axes) to the leg frame.
    fn to_leg_frame(&self, leg: Leg, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.geom.coxa_length + self.splay + leg.side() * p.x,
            p.y,
            p.z - self.height,
        )
    }

    fn leg_to_body(&self, leg: Leg, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            leg.side() * (p.x - self.geom.coxa_length - self.splay),
            p.y,
            p.z + self.height,
        )
    }

    /// Foot position in the body frame (mm).
    fn foot_in_body(&self, leg: Leg, p: &Vector3<f64>) -> Vector3<f64> {
        let hip = leg.hip_position();
        Vector3::new(
            hip.x + leg.side() * (self.geom.coxa_length + self.splay) + p.x,
            hip.y + p.y,
            p.z - self.height,
        )
    }
}

struct Leg3 {
    angles: JointAngles,
    foot: Vector3<f64>,
}

/// Grip factor applied to stance displacement.
pub fn grip(surface: &SurfaceModel, stance_speed: f64, cfg: &SurrogateConfig) -> f64 {
    let slip = (1.0 - surface.hardness)
        * (1.0 - surface.friction * 0.5)
        * (stance_speed / cfg.ref_speed).clamp(0.0, 1.0);
    surface.friction * (1.0 - slip)
}

/// Commanded stance foot speed (mm/s).
pub fn stance_speed(spline: &TrajectorySpline) -> f64 {
    let len = (spline.knots[1] - spline.knots[0]).norm();
    len / (spline.stance_end() * spline.period)
}

pub fn rollout(
    spec: &GaitSpec,
    surface: &SurfaceModel,
    seed: u64,
) -> std::result::Result<EvaluationTrace, RolloutFailure> {
    rollout_with(spec, surface, seed, &SurrogateConfig::default())
}

pub fn rollout_with(
    spec: &GaitSpec,
    surface: &SurfaceModel,
    seed: u64,
    cfg: &SurrogateConfig,
) -> std::result::Result<EvaluationTrace, RolloutFailure> {
    let spline = build_spline(spec);
    let body = Body::new(spec, cfg);
    let gait = &spec.gait;
    let dt = 1.0 / CONTROL_RATE_HZ;
    let max_step = cfg.joint_speed_limit * dt;
    let v_stance = stance_speed(&spline);
    let grip = grip(surface, v_stance, cfg);
    let sink = surface.sinkage_gain * (1.0 - surface.hardness);
    let noise_scale = surface.noise_gain * surface.roughness;
    let support_gain = (cfg.support_tilt_hard + cfg.support_tilt_soft * (1.0 - surface.hardness))
        * body.lever
        * (1.0 + v_stance / cfg.tilt_speed_ref);
    let max_ticks = (cfg.max_duration * CONTROL_RATE_HZ).round() as usize;

    let track_half = Leg::FrontRight.hip_position().x + body.geom.coxa_length + body.splay;
    let base_half = Leg::FrontRight.hip_position().y;

    let terrain = |leg: Leg, t: f64| -> f64 {
        if noise_scale == 0.0 {
            return 0.0;
        }
        let step = (t * gait.frequency + leg.phase_offset()).floor() as i64;
        noise_scale * counter_normal(seed, TERRAIN_STREAM + leg.index() as u64, step as u64)
    };

    let fail = |leg: Leg, t: f64, e: Error| match e {
        Error::Unreachable { shortfall } => RolloutFailure {
            leg,
            time: t,
            shortfall,
        },
        other => unreachable!("inverse kinematics only fails on reach: {other}"),
    };

    // Feet are placed at the start pose before the evaluation begins.
    let targets = leg_targets(0.0, spec, &spline);
    let mut legs: Vec<Leg3> = Vec::with_capacity(4);
    for leg in Leg::ALL {
        let p = targets[leg.index()];
        let angles = inverse_kinematics(&body.to_leg_frame(leg, &p), &body.geom)
            .map_err(|e| fail(leg, 0.0, e))?;
        legs.push(Leg3 { angles, foot: p });
    }

    // Per-tick support analysis: returns (height target, tilt targets).
    let support_state = |legs: &[Leg3], t: f64| -> (f64, [f64; 3]) {
        let mut supporting = [false; 4];
        for leg in Leg::ALL {
            let stance = spline.is_stance(leg_phase(t, gait, leg));
            supporting[leg.index()] = stance && legs[leg.index()].foot.z <= cfg.contact_threshold;
        }
        let n = supporting.iter().filter(|&&s| s).count();
        if n == 0 {
            return (body.height - sink, [0.0; 3]);
        }
        let load = 4.0 / n as f64;
        let mut ground = [0.0; 4];
        let mut centroid = Vector3::zeros();
        let mut height_sum = 0.0;
        for leg in Leg::ALL {
            let i = leg.index();
            ground[i] = terrain(leg, t) - sink * load;
            if supporting[i] {
                centroid += body.foot_in_body(leg, &legs[i].foot);
                height_sum += ground[i] - legs[i].foot.z;
            }
        }
        centroid /= n as f64;
        let height = body.height + height_sum / n as f64;

        let side_mean = |pick: &dyn Fn(Leg) -> bool| {
            let (s, c) = Leg::ALL
                .iter()
                .filter(|&&l| supporting[l.index()] && pick(l))
                .fold((0.0, 0usize), |(s, c), &l| (s + ground[l.index()], c + 1));
            if c == 0 {
                None
            } else {
                Some(s / c as f64)
            }
        };
        let right = side_mean(&|l| l.side() > 0.0);
        let left = side_mean(&|l| l.side() < 0.0);
        let front = side_mean(&|l| l.is_front());
        let back = side_mean(&|l| !l.is_front());
        let terrain_roll = match (right, left) {
            (Some(r), Some(l)) => (r - l) / (2.0 * track_half),
            _ => 0.0,
        };
        let terrain_pitch = match (front, back) {
            (Some(f), Some(b)) => (f - b) / (2.0 * base_half),
            _ => 0.0,
        };
        let yaw = if noise_scale == 0.0 {
            0.0
        } else {
            let g: Vec<f64> = Leg::ALL.iter().map(|&l| terrain(l, t)).collect();
            cfg.yaw_gain * (g[0] - g[1] - g[2] + g[3]) / (2.0 * track_half)
        };

        let asym_lat = -centroid.x / track_half;
        let asym_cra = -centroid.y / base_half;
        let tilt = [
            support_gain * asym_lat + body.lever * terrain_roll,
            support_gain * asym_cra + body.lever * terrain_pitch,
            body.lever * yaw,
        ];
        (height, tilt)
    };

    let samples_cap = 2 * max_ticks + 1;
    let mut positions = Vec::with_capacity(samples_cap);
    let mut orientations = Vec::with_capacity(samples_cap);

    let (h0, mut tilt_target) = support_state(&legs, 0.0);
    let mut pos = Vector3::new(0.0, 0.0, h0);
    let start = pos;
    let mut angle = tilt_target;
    let mut rate = [0.0; 3];
    let omega = 1.0 / cfg.tilt_time_constant;
    let sub_dt = 1.0 / SENSOR_RATE_HZ;
    let height_blend = (dt / cfg.height_time_constant).min(1.0);

    positions.push(mm_to_m(&pos));
    orientations.push(angle);

    let mut terminated_by = Termination::Timeout;
    let mut ticks = 0;
    for k in 1..=max_ticks {
        let t_prev = (k - 1) as f64 * dt;
        let t = k as f64 * dt;

        // Orientation integrates at the sensor rate against the held target.
        let mut mid_angle = angle;
        for sub in 0..2 {
            for a in 0..3 {
                let acc = omega * omega * (tilt_target[a] - angle[a]) - 2.0 * omega * rate[a];
                rate[a] += acc * sub_dt;
                angle[a] += rate[a] * sub_dt;
            }
            if sub == 0 {
                mid_angle = angle;
            }
        }

        let targets = leg_targets(t, spec, &spline);
        let mut shift = Vector3::zeros();
        let mut support = 0usize;
        for leg in Leg::ALL {
            let i = leg.index();
            let cmd = targets[i];
            let wanted = inverse_kinematics(&body.to_leg_frame(leg, &cmd), &body.geom)
                .map_err(|e| fail(leg, t, e))?;
            let prev_foot = legs[i].foot;
            let cur = legs[i].angles;
            let delta = [
                wanted.coxa - cur.coxa,
                wanted.femur - cur.femur,
                wanted.tibia - cur.tibia,
            ];
            let ratio = delta.iter().fold(0.0f64, |m, d| m.max(d.abs())) / max_step;
            if ratio <= 1.0 {
                legs[i].angles = wanted;
                legs[i].foot = cmd;
            } else {
                let angles = JointAngles {
                    coxa: cur.coxa + delta[0] / ratio,
                    femur: cur.femur + delta[1] / ratio,
                    tibia: cur.tibia + delta[2] / ratio,
                };
                legs[i].angles = angles;
                legs[i].foot = body.leg_to_body(leg, &forward_kinematics(&angles, &body.geom));
            }

            let stance_both = spline.is_stance(leg_phase(t_prev, gait, leg))
                && spline.is_stance(leg_phase(t, gait, leg));
            let loaded =
                prev_foot.z <= cfg.contact_threshold && legs[i].foot.z <= cfg.contact_threshold;
            if stance_both && loaded {
                shift += legs[i].foot - prev_foot;
                support += 1;
            }
        }

        let prev_pos = pos;
        if support > 0 {
            let step = shift / support as f64;
            pos.x -= step.x * grip;
            pos.y -= step.y * grip;
        }
        let (height, next_tilt) = support_state(&legs, t);
        pos.z += (height - pos.z) * height_blend;
        tilt_target = next_tilt;

        positions.push(mm_to_m(&((prev_pos + pos) * 0.5)));
        orientations.push(mid_angle);
        positions.push(mm_to_m(&pos));
        orientations.push(angle);
        ticks = k;

        if let Some(limit) = cfg.stop_distance {
            if (pos - start).norm() / 1000.0 >= limit {
                terminated_by = Termination::Distance;
                break;
            }
        }
    }

    let accelerations = accelerations(&positions, seed, noise_scale * cfg.acc_jitter_gain);
    Ok(EvaluationTrace {
        positions,
        orientations,
        accelerations,
        t_start: 0.0,
        t_end: ticks as f64 * dt,
        terminated_by,
    })
}

fn mm_to_m(p: &Vector3<f64>) -> [f64; 3] {
    [p.x / 1000.0, p.y / 1000.0, p.z / 1000.0]
}

/// Discrete second derivative of the position series plus seeded jitter.
fn accelerations(positions: &[[f64; 3]], seed: u64, jitter: f64) -> Vec<[f64; 3]> {
    let n = positions.len();
    let dt2 = (1.0 / SENSOR_RATE_HZ).powi(2);
    let mut acc = vec![[0.0; 3]; n];
    for j in 1..n.saturating_sub(1) {
        for a in 0..3 {
            acc[j][a] = (positions[j + 1][a] - 2.0 * positions[j][a] + positions[j - 1][a]) / dt2;
        }
    }
    if n >= 3 {
        acc[0] = acc[1];
        acc[n - 1] = acc[n - 2];
    }
    if jitter > 0.0 {
        for a in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(JITTER_STREAM + a as u64);
            for row in acc.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                row[a] += jitter * z;
            }
        }
    }
    acc
}
