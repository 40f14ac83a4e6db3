use gaitevo_core::fitness::population_std;
use gaitevo_core::gait::{build_spline, wag_at};
use gaitevo_core::params::{decode, GaitSpec, Genome, GENOME_LEN};
use gaitevo_core::surrogate::{
    rollout_with, surface_library, EvaluationTrace, SurfaceModel, SurrogateConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_specs(n: usize, seed: u64) -> Vec<GaitSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: [f64; GENOME_LEN] = std::array::from_fn(|_| rng.random());
            decode(&Genome::new(v).unwrap())
        })
        .collect()
}

fn fixed_horizon() -> SurrogateConfig {
    SurrogateConfig {
        stop_distance: None,
        ..Default::default()
    }
}

fn run(
    spec: &GaitSpec,
    surface: &SurfaceModel,
    seed: u64,
    cfg: &SurrogateConfig,
) -> EvaluationTrace {
    rollout_with(spec, surface, seed, cfg).expect("library specs are reachable")
}

fn orientation_std(trace: &EvaluationTrace, axis: usize) -> f64 {
    population_std(trace.orientations.iter().map(|r| r[axis]))
}

/// P(X >= k) for X ~ Binomial(n, 1/2).
fn sign_test_upper(k: usize, n: usize) -> f64 {
    let mut log_c = 0.0f64; // log C(n, 0)
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total += (log_c - n as f64 * std::f64::consts::LN_2).exp();
        }
    }
    total
}

#[test]
fn ideal_surface_matches_kinematic_oracle() {
    // Rigid, smooth, full-friction ground with unconstrained joint speed:
    // every supporting foot is planted, so the body moves at the commanded
    // stance speed plus the wag offset.
    let ideal = SurfaceModel::new("ideal", 1.0, 0.0, 1.0);
    let cfg = SurrogateConfig {
        joint_speed_limit: 1e6,
        ..fixed_horizon()
    };
    for spec in &random_specs(100, 31) {
        let trace = run(spec, &ideal, 1, &cfg);
        let spline = build_spline(spec);
        let speed =
            spec.spline.step_length() * spec.gait.frequency / (1.0 - spec.gait.lift_duration);
        let t = trace.t_end;
        let (lat0, cra0) = wag_at(0.0, &spec.gait);
        let (lat1, cra1) = wag_at(t, &spec.gait);
        let expected_y = (speed * t + cra1 - cra0) / 1000.0;
        let expected_x = (lat1 - lat0) / 1000.0;
        let p0 = trace.positions[0];
        let p1 = *trace.positions.last().unwrap();
        assert!(
            ((p1[1] - p0[1]) - expected_y).abs() < 1e-6,
            "cranial {} vs {expected_y} (stance end {})",
            p1[1] - p0[1],
            spline.stance_end()
        );
        assert!(((p1[0] - p0[0]) - expected_x).abs() < 1e-6);
    }
}

#[test]
fn softer_ground_gives_less_displacement() {
    let cfg = fixed_horizon();
    let hard = SurfaceModel::new("hard", 1.0, 0.05, 0.9);
    let soft = SurfaceModel::new("soft", 0.2, 0.05, 0.9);
    for (i, spec) in random_specs(100, 32).iter().enumerate() {
        let a = run(spec, &hard, i as u64, &cfg).displacement();
        let b = run(spec, &soft, i as u64, &cfg).displacement();
        assert!(b < a, "spec {i}: soft {b} >= hard {a}");
    }
}

#[test]
fn displacement_is_non_increasing_as_hardness_drops() {
    let cfg = fixed_horizon();
    for (i, spec) in random_specs(20, 33).iter().enumerate() {
        let mut last = f64::INFINITY;
        for h in [1.0, 0.8, 0.6, 0.4, 0.2, 0.0] {
            let s = SurfaceModel::new("s", h, 0.3, 0.85);
            let d = run(spec, &s, i as u64, &cfg).displacement();
            assert!(d <= last + 1e-12, "spec {i} hardness {h}: {d} > {last}");
            last = d;
        }
    }
}

#[test]
fn rougher_ground_shakes_more() {
    let cfg = fixed_horizon();
    let specs = random_specs(120, 34);
    for axis in 0..3 {
        let mut up = 0;
        let mut decided = 0;
        for (i, spec) in specs.iter().enumerate() {
            let fine = SurfaceModel::new("fine", 0.6, 0.05, 0.9);
            let coarse = SurfaceModel::new("coarse", 0.6, 0.75, 0.9);
            let a = orientation_std(&run(spec, &fine, i as u64, &cfg), axis);
            let b = orientation_std(&run(spec, &coarse, i as u64, &cfg), axis);
            if a != b {
                decided += 1;
                if b > a {
                    up += 1;
                }
            }
        }
        let p = sign_test_upper(up, decided);
        assert!(p < 0.01, "axis {axis}: {up}/{decided} increases, p = {p}");
    }
}

#[test]
fn leg_length_interaction() {
    let cfg = fixed_horizon();
    let lib = surface_library();
    let (a, b) = (&lib[0], &lib[1]);
    let specs = random_specs(100, 35);
    let with_legs = |s: &GaitSpec, femur: f64, tibia: f64| {
        let mut s = *s;
        s.morphology.femur_extension = femur;
        s.morphology.tibia_extension = tibia;
        s
    };

    // fast gaits on hard ground go further on long legs
    let best = |femur: f64, tibia: f64| {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut s = with_legs(s, femur, tibia);
                s.gait.frequency = 1.0;
                run(&s, a, i as u64, &cfg).displacement()
            })
            .fold(0.0f64, f64::max)
    };
    let (short, long) = (best(0.0, 0.0), best(50.0, 100.0));
    assert!(long > short, "hard ground: long {long} vs short {short}");

    // long legs tilt more on soft ground
    let mut more = 0;
    for (i, s) in specs.iter().enumerate() {
        let tilt = |femur, tibia| {
            let t = run(&with_legs(s, femur, tibia), b, i as u64, &cfg);
            orientation_std(&t, 0) + orientation_std(&t, 1)
        };
        if tilt(50.0, 100.0) > tilt(0.0, 0.0) {
            more += 1;
        }
    }
    assert!(sign_test_upper(more, specs.len()) < 0.01, "{more}/100");
}

#[test]
fn sign_test_reference() {
    // 10 of 10: 1/1024
    assert!((sign_test_upper(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
    assert!((sign_test_upper(0, 7) - 1.0).abs() < 1e-12);
}
