//! 3-DOF leg kinematics: coxa yaw followed by a planar femur/tibia pair.
//!
//! Leg frame: `x` points outward from the body, `y` is cranial, `z` is
//! dorsal. With all joints at zero the leg lies straight along `+x`. The
//! femur angle is measured from the horizontal (positive up) and the tibia
//! angle is relative to the femur; the knee bends with `tibia <= 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::params::MorphologyParams;

pub const COXA_LENGTH_MM: f64 = 60.0;
pub const FEMUR_BASE_MM: f64 = 180.0;
pub const TIBIA_BASE_MM: f64 = 190.0;

/// Joint limits (rad), inclusive.
pub const COXA_LIMITS: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);
pub const FEMUR_LIMITS: (f64, f64) = (-PI, FRAC_PI_2);
pub const TIBIA_LIMITS: (f64, f64) = (-PI, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegGeometry {
    pub coxa_length: f64,
    pub femur_length: f64,
    pub tibia_length: f64,
}

impl LegGeometry {
    pub fn from_morphology(m: &MorphologyParams) -> Self {
        Self {
            coxa_length: COXA_LENGTH_MM,
            femur_length: FEMUR_BASE_MM + m.femur_extension,
            tibia_length: TIBIA_BASE_MM + m.tibia_extension,
        }
    }

    pub fn reach(&self) -> f64 {
        self.femur_length + self.tibia_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub coxa: f64,
    pub femur: f64,
    pub tibia: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 3] {
        [self.coxa, self.femur, self.tibia]
    }

    pub fn within_limits(&self) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        inside(self.coxa, COXA_LIMITS)
            && inside(self.femur, FEMUR_LIMITS)
            && inside(self.tibia, TIBIA_LIMITS)
    }
}

pub fn forward_kinematics(angles: &JointAngles, geom: &LegGeometry) -> Vector3<f64> {
    let radial = geom.coxa_length
        + geom.femur_length * angles.femur.cos()
        + geom.tibia_length * (angles.femur + angles.tibia).cos();
    let height = geom.femur_length * angles.femur.sin()
        + geom.tibia_length * (angles.femur + angles.tibia).sin();
    Vector3::new(
        radial * angles.coxa.cos(),
        radial * angles.coxa.sin(),
        height,
    )
}

/// Closed-form inverse of [`forward_kinematics`].
///
/// Fails with [`Error::Unreachable`] when the femur-pivot-to-foot distance
/// lies outside `[|femur - tibia|, femur + tibia]`; the error carries the
/// distance to the reachable annulus.
pub fn inverse_kinematics(foot: &Vector3<f64>, geom: &LegGeometry) -> Result<JointAngles> {
    let coxa = foot.y.atan2(foot.x);
    let radial = foot.x.hypot(foot.y) - geom.coxa_length;
    let dist = radial.hypot(foot.z);

    let (lf, lt) = (geom.femur_length, geom.tibia_length);
    let outer = lf + lt;
    let inner = (lf - lt).abs();
    if dist > outer {
        return Err(Error::Unreachable {
            shortfall: dist - outer,
        });
    }
    if dist < inner {
        return Err(Error::Unreachable {
            shortfall: inner - dist,
        });
    }

    let cos_knee = ((dist * dist - lf * lf - lt * lt) / (2.0 * lf * lt)).clamp(-1.0, 1.0);
    let tibia = -cos_knee.acos();
    let mut femur = foot.z.atan2(radial) - (lt * tibia.sin()).atan2(lf + lt * tibia.cos());
    if femur <= -PI {
        femur += 2.0 * PI;
    } else if femur > PI {
        femur -= 2.0 * PI;
    }
    Ok(JointAngles { coxa, femur, tibia })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> LegGeometry {
        LegGeometry::from_morphology(&MorphologyParams {
            femur_extension: 20.0,
            tibia_extension: 40.0,
        })
    }

    #[test]
    fn zero_pose_is_straight_along_x() {
        let g = geom();
        let p = forward_kinematics(&JointAngles::default(), &g);
        let len = g.coxa_length + g.femur_length + g.tibia_length;
        assert!((p - Vector3::new(len, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn coxa_quarter_turn_is_isometric() {
        let g = geom();
        let a = JointAngles {
            coxa: 0.0,
            femur: -0.4,
            tibia: -0.9,
        };
        let p0 = forward_kinematics(&a, &g);
        let p1 = forward_kinematics(
            &JointAngles {
                coxa: FRAC_PI_2,
                ..a
            },
            &g,
        );
        assert!((p0.norm() - p1.norm()).abs() < 1e-9);
        assert!(p1.x.abs() < 1e-9);
        assert!((p1.y - p0.x).abs() < 1e-9);
        assert_eq!(p0.z, p1.z);
    }

    #[test]
    fn straight_leg_below_femur_pivot() {
        let g = geom();
        let foot = Vector3::new(g.coxa_length, 0.0, -g.reach());
        let a = inverse_kinematics(&foot, &g).unwrap();
        assert_eq!(a.tibia, 0.0);
        assert!((a.femur + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(a.coxa, 0.0);
    }

    #[test]
    fn beyond_reach_reports_shortfall() {
        let g = geom();
        let foot = Vector3::new(g.coxa_length, 0.0, -(g.reach() + 1.0));
        match inverse_kinematics(&foot, &g) {
            Err(Error::Unreachable { shortfall }) => assert!((shortfall - 1.0).abs() < 1e-9),
            other => panic!("expected unreachable, got {other:?}"),
        }
        // inside the inner radius
        let short = LegGeometry {
            coxa_length: 60.0,
            femur_length: 100.0,
            tibia_length: 200.0,
        };
        let foot = Vector3::new(60.0, 0.0, -50.0);
        assert!(matches!(
            inverse_kinematics(&foot, &short),
            Err(Error::Unreachable { shortfall }) if (shortfall - 50.0).abs() < 1e-9
        ));
    }

    #[test]
    fn fk_ik_roundtrip() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20_000 {
            let a = JointAngles {
                coxa: rng.random_range(-1.2..1.2),
                femur: rng.random_range(-2.5..0.5),
                tibia: rng.random_range(-2.8..-0.05),
            };
            let p = forward_kinematics(&a, &g);
            if p.x < 10.0 {
                continue;
            }
            let back = inverse_kinematics(&p, &g).unwrap();
            assert!(back.within_limits());
            assert!((forward_kinematics(&back, &g) - p).norm() < 1e-6);
            for (x, y) in back.as_array().iter().zip(a.as_array()) {
                assert!((x - y).abs() < 1e-9, "{back:?} vs {a:?}");
            }
        }
    }
}
