//! Cross-surface comparison of re-evaluated individuals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitness::Fitness;

/// One re-evaluation of an individual on a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub individual: String,
    pub surface: String,
    pub fitness: Fitness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub surfaces: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.surfaces.iter().position(|s| s == a)?;
        let j = self.surfaces.iter().position(|s| s == b)?;
        Some(self.values[i][j])
    }
}

/// `means[individual][surface]` → mean over individuals of the pairwise
/// Euclidean distance between surface means.
pub fn distance_from_means(means: &[Vec<[f64; 2]>]) -> Vec<Vec<f64>> {
    let k = means.first().map_or(0, Vec::len);
    let mut d = vec![vec![0.0; k]; k];
    if means.is_empty() {
        return d;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let total: f64 = means
                .iter()
                .map(|m| (m[i][0] - m[j][0]).hypot(m[i][1] - m[j][1]))
                .sum();
            d[i][j] = total / means.len() as f64;
            d[j][i] = d[i][j];
        }
    }
    d
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn normalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Mean normalized distance between surfaces.
///
/// Speed and stability are min-max normalized over the pooled samples.
/// Every individual must have samples on every surface in `surfaces`;
/// samples on other surfaces are ignored.
pub fn distance_matrix(samples: &[SurfaceSample], surfaces: &[String]) -> Result<DistanceMatrix> {
    let pooled: Vec<&SurfaceSample> = samples
        .iter()
        .filter(|s| surfaces.contains(&s.surface))
        .collect();
    let speed_range = min_max(pooled.iter().map(|s| s.fitness.speed));
    let stab_range = min_max(pooled.iter().map(|s| s.fitness.stability));

    // individual -> per-surface (sum, count)
    let mut acc: BTreeMap<&str, Vec<([f64; 2], usize)>> = BTreeMap::new();
    for s in &pooled {
        let j = surfaces
            .iter()
            .position(|n| *n == s.surface)
            .expect("filtered above");
        let slot = &mut acc
            .entry(s.individual.as_str())
            .or_insert_with(|| vec![([0.0; 2], 0); surfaces.len()])[j];
        slot.0[0] += normalize(s.fitness.speed, speed_range);
        slot.0[1] += normalize(s.fitness.stability, stab_range);
        slot.1 += 1;
    }
    let mut individuals: Vec<&str> = samples.iter().map(|s| s.individual.as_str()).collect();
    individuals.sort_unstable();
    individuals.dedup();

    let mut means = Vec::with_capacity(individuals.len());
    for ind in individuals {
        let Some(per_surface) = acc.get(ind) else {
            return Err(Error::MissingSurface {
                individual: ind.to_string(),
                surface: surfaces.first().cloned().unwrap_or_default(),
            });
        };
        let mut row = Vec::with_capacity(surfaces.len());
        for (j, (sum, n)) in per_surface.iter().enumerate() {
            if *n == 0 {
                return Err(Error::MissingSurface {
                    individual: ind.to_string(),
                    surface: surfaces[j].clone(),
                });
            }
            row.push([sum[0] / *n as f64, sum[1] / *n as f64]);
        }
        means.push(row);
    }
    Ok(DistanceMatrix {
        surfaces: surfaces.to_vec(),
        values: distance_from_means(&means),
    })
}

/// Mean of the matrix entries over the given surface pairs.
pub fn mean_pair_distance(matrix: &DistanceMatrix, pairs: &[(&str, &str)]) -> Option<f64> {
    let vals: Option<Vec<f64>> = pairs.iter().map(|(a, b)| matrix.get(a, b)).collect();
    let vals = vals?;
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn sample(ind: &str, surface: &str, speed: f64, stability: f64) -> SurfaceSample {
        SurfaceSample {
            individual: ind.into(),
            surface: surface.into(),
            fitness: Fitness::new(speed, stability),
        }
    }

    fn random_samples(seed: u64) -> Vec<SurfaceSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..6 {
            for s in ["A", "B", "C", "D"] {
                for _ in 0..5 {
                    out.push(sample(
                        &format!("i{i}"),
                        s,
                        rng.random_range(0.0..10.0),
                        rng.random_range(-1.0..0.0),
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn three_four_five_fixture() {
        let means = vec![vec![[0.0, 0.0], [0.3, 0.4]], vec![[0.0, 0.0], [0.6, 0.8]]];
        let d = distance_from_means(&means);
        assert!((d[0][1] - 0.75).abs() < 1e-15);
        assert_eq!(d[0][0], 0.0);

        // raw values spanning [0, 1] normalize to themselves
        let s = vec![
            sample("a", "X", 0.0, 0.0),
            sample("a", "Y", 0.3, 0.4),
            sample("b", "X", 0.0, 0.0),
            sample("b", "Y", 0.6, 0.8),
            sample("c", "X", 1.0, 1.0),
            sample("c", "Y", 1.0, 1.0),
        ];
        let m = distance_matrix(&s, &names(&["X", "Y"])).unwrap();
        assert!((m.values[0][1] - 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_means_give_zero_matrix() {
        let mut s = Vec::new();
        for i in ["a", "b"] {
            for surf in ["A", "B", "C", "D"] {
                s.push(sample(i, surf, 2.0, -0.3));
                s.push(sample(i, surf, 4.0, -0.1));
            }
        }
        let m = distance_matrix(&s, &names(&["A", "B", "C", "D"])).unwrap();
        assert!(m.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_nonnegative_and_relabel_invariant() {
        let s = random_samples(3);
        let surfaces = names(&["A", "B", "C", "D"]);
        let m = distance_matrix(&s, &surfaces).unwrap();
        for i in 0..4 {
            assert_eq!(m.values[i][i], 0.0);
            for j in 0..4 {
                assert_eq!(m.values[i][j], m.values[j][i]);
                assert!(m.values[i][j] >= 0.0);
            }
        }
        let relabeled: Vec<SurfaceSample> = s
            .iter()
            .map(|x| SurfaceSample {
                individual: format!("z{}", 9 - x.individual[1..].parse::<u32>().unwrap()),
                ..x.clone()
            })
            .collect();
        let m2 = distance_matrix(&relabeled, &surfaces).unwrap();
        for (a, b) in m.values.iter().flatten().zip(m2.values.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_surface_names_the_individual() {
        let mut s = random_samples(4);
        s.retain(|x| !(x.individual == "i2" && x.surface == "C"));
        match distance_matrix(&s, &names(&["A", "B", "C", "D"])) {
            Err(Error::MissingSurface {
                individual,
                surface,
            }) => {
                assert_eq!(individual, "i2");
                assert_eq!(surface, "C");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
