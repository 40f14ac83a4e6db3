use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gaitevo_core::analysis::{
    distance_matrix, hypervolume_2d, mann_whitney_u, parameter_significance, SurfaceSample,
    HV_REFERENCE,
};
use gaitevo_core::fitness::{speed_fitness, stability_fitness};
use gaitevo_core::gait::{
    build_spline, forward_kinematics, inverse_kinematics, leg_targets, JointAngles, Leg,
    LegGeometry, COXA_LIMITS, FEMUR_LIMITS, TIBIA_LIMITS,
};
use gaitevo_core::nsga2::{
    environmental_selection, mutate, nondominated_fronts, EvalMeta, Individual,
};
use gaitevo_core::params::{decode, encode, Genome, GENOME_LEN, PARAMS};
use gaitevo_core::surrogate::{rollout, surface_library, EvaluationTrace, Termination};
use gaitevo_core::{Fitness, FitnessConfig};

fn genome() -> impl Strategy<Value = Genome> {
    prop::array::uniform18(0.0..=1.0f64).prop_map(|v| Genome::new(v).unwrap())
}

fn fitness() -> impl Strategy<Value = Fitness> {
    // a coarse grid makes ties and duplicates common
    prop_oneof![
        (0.0..20.0f64, -1.0..=0.0f64),
        (0..20u8, 0..5u8).prop_map(|(s, t)| (s as f64, -(t as f64) / 4.0)),
    ]
    .prop_map(|(s, t)| Fitness::new(s, t))
}

fn individuals(fits: &[Fitness]) -> Vec<Individual> {
    fits.iter()
        .enumerate()
        .map(|(i, f)| {
            let meta = EvalMeta {
                generation: 0,
                eval_index: i,
                seed: 0,
                surface: "A".into(),
            };
            Individual::evaluated(Genome::splat(0.5).unwrap(), *f, meta)
        })
        .collect()
}

fn ranks(fits: &[Fitness]) -> Vec<usize> {
    let mut r = vec![0; fits.len()];
    for (k, front) in nondominated_fronts(fits).iter().enumerate() {
        for &i in front {
            r[i] = k;
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decode_encode_roundtrip(g in genome()) {
        let back = encode(&decode(&g)).unwrap();
        for (a, b) in g.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn decode_is_monotone(g in genome(), i in 0..GENOME_LEN, bump in 0.0..1.0f64) {
        let mut v = *g.values();
        let before = decode(&g).to_values()[i];
        v[i] = (v[i] + bump).min(1.0);
        let after = decode(&Genome::new(v).unwrap()).to_values()[i];
        prop_assert!(after >= before, "{} {before} -> {after}", PARAMS[i].name);
    }

    #[test]
    fn spline_seam_is_c1(g in genome()) {
        let s = build_spline(&decode(&g));
        let (p_end, v_end) = s.evaluate(1.0 - f64::EPSILON).unwrap();
        let (p0, v0) = s.evaluate(0.0).unwrap();
        prop_assert!((p_end - p0).norm() < 1e-6);
        prop_assert!((v_end - v0).norm() < 1e-6, "{}", (v_end - v0).norm());
    }

    #[test]
    fn ik_of_fk_recovers_angles(
        coxa in COXA_LIMITS.0..COXA_LIMITS.1,
        femur in FEMUR_LIMITS.0..FEMUR_LIMITS.1,
        tibia in (TIBIA_LIMITS.0 + 1e-3)..(TIBIA_LIMITS.1 - 1e-3),
        fe in 0.0..50.0f64,
        te in 0.0..100.0f64,
    ) {
        let geom = LegGeometry { coxa_length: 60.0, femur_length: 180.0 + fe, tibia_length: 190.0 + te };
        let outboard = geom.femur_length * femur.cos() + geom.tibia_length * (femur + tibia).cos();
        prop_assume!(outboard > 1.0);
        let angles = JointAngles { coxa, femur, tibia };
        let back = inverse_kinematics(&forward_kinematics(&angles, &geom), &geom).unwrap();
        prop_assert!((back.coxa - coxa).abs() < 1e-9);
        prop_assert!((back.femur - femur).abs() < 1e-9);
        prop_assert!((back.tibia - tibia).abs() < 1e-9);
    }

    #[test]
    fn legs_follow_phase_shifted_copies(g in genome(), t in 0.0..10.0f64) {
        let mut spec = decode(&g);
        spec.gait.wag_amp_lateral = 0.0;
        spec.gait.wag_amp_cranial = 0.0;
        let spline = build_spline(&spec);
        let targets = leg_targets(t, &spec, &spline);
        for leg in Leg::ALL {
            let shifted = leg_targets(t + leg.phase_offset() / spec.gait.frequency, &spec, &spline)[0];
            prop_assert!((targets[leg.index()] - shifted).norm() < 1e-6);
        }
    }

    #[test]
    fn sort_is_invariant_to_objective_scaling(
        fits in prop::collection::vec(fitness(), 1..32),
        k in 0.01..100.0f64,
    ) {
        let scaled: Vec<Fitness> = fits.iter().map(|f| Fitness::new(f.speed * k, f.stability)).collect();
        prop_assert_eq!(ranks(&fits), ranks(&scaled));
    }

    #[test]
    fn selection_keeps_rank_zero_first(fits in prop::collection::vec(fitness(), 2..32), keep in 1usize..16) {
        let keep = keep.min(fits.len());
        let r = ranks(&fits);
        let kept = environmental_selection(individuals(&fits), keep).unwrap();
        let kept_ids: Vec<usize> = kept.iter().map(|i| i.meta.eval_index).collect();
        let worst_kept = kept_ids.iter().map(|&i| r[i]).max().unwrap();
        for (i, &ri) in r.iter().enumerate() {
            if ri < worst_kept {
                prop_assert!(kept_ids.contains(&i), "rank {ri} dropped while rank {worst_kept} kept");
            }
        }
    }

    #[test]
    fn mutation_stays_in_bounds(g in genome(), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mutate(&g, 1.0 / 6.0, 1.0, &mut rng);
        prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn hypervolume_ignores_order_and_dominated(
        fits in prop::collection::vec(fitness(), 1..20),
        extra in fitness(),
    ) {
        let hv = hypervolume_2d(&fits, HV_REFERENCE);
        let mut rev = fits.clone();
        rev.reverse();
        prop_assert!((hypervolume_2d(&rev, HV_REFERENCE) - hv).abs() < 1e-12);
        let mut more = fits.clone();
        more.push(extra);
        let with_extra = hypervolume_2d(&more, HV_REFERENCE);
        prop_assert!(with_extra >= hv - 1e-12);
        if fits.iter().any(|f| f.speed >= extra.speed && f.stability >= extra.stability) {
            prop_assert!((with_extra - hv).abs() < 1e-12);
        }
    }

    #[test]
    fn u_statistics_are_complementary(
        x in prop::collection::vec(0..6u8, 1..25),
        y in prop::collection::vec(0..6u8, 1..25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let (a, b) = (mann_whitney_u(&x, &y).unwrap(), mann_whitney_u(&y, &x).unwrap());
        prop_assert_eq!(a.u + b.u, (x.len() * y.len()) as f64);
        prop_assert!((a.p - b.p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p));
    }

    #[test]
    fn significance_verdicts_ignore_group_order(
        a in prop::collection::vec(genome(), 3..12),
        b in prop::collection::vec(genome(), 3..12),
    ) {
        let ab = parameter_significance(&a, &b, 0.01).unwrap();
        let ba = parameter_significance(&b, &a, 0.01).unwrap();
        prop_assert_eq!(ab.len(), 18);
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert_eq!(x.significant, y.significant);
            prop_assert!(x.p_adjusted >= x.p_raw);
        }
    }

    #[test]
    fn distance_matrix_is_a_symmetric_dissimilarity(
        values in prop::collection::vec((0.0..20.0f64, -1.0..0.0f64), 3 * 2 * 2),
    ) {
        let surfaces = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let samples: Vec<SurfaceSample> = values
            .iter()
            .enumerate()
            .map(|(k, &(s, t))| SurfaceSample {
                individual: format!("i{}", k % 2),
                surface: surfaces[(k / 2) % 3].clone(),
                fitness: Fitness::new(s, t),
            })
            .collect();
        let m = distance_matrix(&samples, &surfaces).unwrap();
        let relabeled: Vec<SurfaceSample> = samples
            .iter()
            .map(|s| SurfaceSample { individual: format!("x-{}", s.individual), ..s.clone() })
            .collect();
        let m2 = distance_matrix(&relabeled, &surfaces).unwrap();
        for i in 0..3 {
            prop_assert_eq!(m.values[i][i], 0.0);
            for j in 0..3 {
                prop_assert!(m.values[i][j] >= 0.0);
                prop_assert_eq!(m.values[i][j], m.values[j][i]);
                prop_assert!((m.values[i][j] - m2.values[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fitness_shift_invariance(
        rows in prop::collection::vec(prop::array::uniform9(-1.0..1.0f64), 2..60),
        shift in prop::array::uniform9(-5.0..5.0f64),
    ) {
        let make = |d: [f64; 9]| EvaluationTrace {
            positions: rows.iter().map(|r| [r[0] + d[0], r[1] + d[1], r[2] + d[2]]).collect(),
            orientations: rows.iter().map(|r| [r[3] + d[3], r[4] + d[4], r[5] + d[5]]).collect(),
            accelerations: rows.iter().map(|r| [r[6] + d[6], r[7] + d[7], r[8] + d[8]]).collect(),
            t_start: 0.0,
            t_end: rows.len() as f64 / 100.0,
            terminated_by: Termination::Timeout,
        };
        let cfg = FitnessConfig::default();
        let (a, b) = (make([0.0; 9]), make(shift));
        prop_assert!((speed_fitness(&a).unwrap() - speed_fitness(&b).unwrap()).abs() < 1e-9);
        let (sa, sb) = (stability_fitness(&a, &cfg).unwrap(), stability_fitness(&b, &cfg).unwrap());
        prop_assert!((sa - sb).abs() < 1e-9);
        prop_assert!(sa <= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rollout_is_pure_and_well_formed(g in genome(), seed: u64, s in 0usize..4) {
        let spec = decode(&g);
        let surface = &surface_library()[s];
        let a = rollout(&spec, surface, seed);
        let b = rollout(&spec, surface, seed);
        prop_assert_eq!(&a, &b);
        if let Ok(t) = a {
            prop_assert!(t.t_end > t.t_start);
            prop_assert_eq!(t.positions.len(), t.orientations.len());
            prop_assert_eq!(t.positions.len(), t.accelerations.len());
            prop_assert!(t.t_end <= 10.0 + 1e-9);
            prop_assert!(t.positions.iter().flatten().all(|v| v.is_finite()));
        }
    }
}
