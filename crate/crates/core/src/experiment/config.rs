//! Experiment definition files (TOML).
//!
//! ```toml
//! output_dir = "out/exp1"        # default: $GAITEVO_OUTPUT_ROOT or ./gaitevo-out
//!
//! [runs]
//! surfaces = ["A", "B"]           # alternated: A, B, A, B, ...
//! runs_per_surface = 5
//! base_seed = 1000                # or an explicit `seeds = [...]` list
//!
//! [evolution]                     # population_size, generations, mutation_sigma, ...
//! [fitness]                       # alpha, stability_scale
//! [model]                         # surrogate constants
//!
//! [[surface]]                     # adds to or replaces library surfaces
//! name = "E"
//! hardness = 0.5
//! roughness = 0.3
//! friction = 0.9
//!
//! [reevaluation]
//! per_surface = 6
//! repeats = 20
//! surfaces = ["A", "B", "C", "D"]
//! seed = 7
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::fitness::FitnessConfig;
use crate::nsga2::{derive_seed, EvolutionConfig};
use crate::surrogate::{surface_library, SurfaceModel, SurrogateConfig};

pub const OUTPUT_ROOT_ENV: &str = "GAITEVO_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "gaitevo-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunMatrix {
    pub surfaces: Vec<String>,
    pub runs_per_surface: usize,
    pub base_seed: u64,
    /// One seed per run in execution order; overrides `base_seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

impl Default for RunMatrix {
    fn default() -> Self {
        Self {
            surfaces: vec!["A".into(), "B".into()],
            runs_per_surface: 5,
            base_seed: 0,
            seeds: None,
        }
    }
}

/// Evolution settings shared by every run; seed and surface come from the
/// run matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSettings {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_sigma: f64,
    pub mutation_probability: f64,
    pub count_initial_in_budget: bool,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        let d = EvolutionConfig::default();
        Self {
            population_size: d.population_size,
            generations: d.generations,
            mutation_sigma: d.mutation_sigma,
            mutation_probability: d.mutation_probability,
            count_initial_in_budget: d.count_initial_in_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReevaluationSettings {
    pub per_surface: usize,
    pub repeats: usize,
    pub surfaces: Vec<String>,
    pub seed: u64,
}

impl Default for ReevaluationSettings {
    fn default() -> Self {
        Self {
            per_surface: 6,
            repeats: 20,
            surfaces: ["A", "B", "C", "D"].map(String::from).to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub runs: RunMatrix,
    #[serde(default)]
    pub evolution: EvolutionSettings,
    #[serde(default)]
    pub fitness: FitnessConfig,
    #[serde(default)]
    pub model: SurrogateConfig,
    #[serde(default, rename = "surface", skip_serializing_if = "Vec::is_empty")]
    pub surfaces: Vec<SurfaceModel>,
    #[serde(default)]
    pub reevaluation: ReevaluationSettings,
}

/// One entry of the run matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Position in execution order.
    pub index: usize,
    pub surface: String,
    pub seed: u64,
}

impl RunSpec {
    pub fn file_stem(&self) -> String {
        format!("run_{:02}_{}", self.index, self.surface)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Library surfaces with the config's additions and replacements.
    pub fn surface_models(&self) -> Vec<SurfaceModel> {
        let mut lib = surface_library();
        for s in &self.surfaces {
            match lib.iter_mut().find(|l| l.name == s.name) {
                Some(slot) => *slot = s.clone(),
                None => lib.push(s.clone()),
            }
        }
        lib
    }

    pub fn surface(&self, name: &str) -> anyhow::Result<SurfaceModel> {
        self.surface_models()
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| anyhow::anyhow!("unknown surface {name}"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
        })
    }

    pub fn evolution_config(&self, run: &RunSpec) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            population_size: e.population_size,
            generations: e.generations,
            mutation_sigma: e.mutation_sigma,
            mutation_probability: e.mutation_probability,
            rng_seed: run.seed,
            surface: run.surface.clone(),
            count_initial_in_budget: e.count_initial_in_budget,
            fitness: self.fitness.clone(),
        }
    }

    /// Runs in execution order, alternating between surfaces.
    pub fn run_matrix(&self) -> Vec<RunSpec> {
        let m = &self.runs;
        let mut out = Vec::with_capacity(m.surfaces.len() * m.runs_per_surface);
        for _ in 0..m.runs_per_surface {
            for s in &m.surfaces {
                let index = out.len();
                let seed = match &m.seeds {
                    Some(seeds) => seeds[index],
                    None => derive_seed(m.base_seed, index as u64),
                };
                out.push(RunSpec {
                    index,
                    surface: s.clone(),
                    seed,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let models = self.surface_models();
        let mut names = HashSet::new();
        for s in &models {
            s.validate().context("surface")?;
            if !names.insert(s.name.as_str()) {
                bail!("surface: duplicate surface name {}", s.name);
            }
            if !s
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                bail!(
                    "surface: name {:?} may only use letters, digits, '_' and '-'",
                    s.name
                );
            }
        }
        let known = |n: &String, field: &str| -> anyhow::Result<()> {
            if names.contains(n.as_str()) {
                Ok(())
            } else {
                bail!("{field}: unknown surface {n}")
            }
        };
        if self.runs.surfaces.is_empty() {
            bail!("runs.surfaces: at least one surface is required");
        }
        for s in &self.runs.surfaces {
            known(s, "runs.surfaces")?;
        }
        for s in &self.reevaluation.surfaces {
            known(s, "reevaluation.surfaces")?;
        }
        if self.runs.runs_per_surface == 0 {
            bail!("runs.runs_per_surface: must be at least 1");
        }
        if let Some(seeds) = &self.runs.seeds {
            let want = self.runs.surfaces.len() * self.runs.runs_per_surface;
            if seeds.len() != want {
                bail!("runs.seeds: expected {want} seeds, got {}", seeds.len());
            }
        }
        let seeds: Vec<u64> = self.run_matrix().iter().map(|r| r.seed).collect();
        if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
            bail!("runs.seeds: seeds must be unique per run");
        }
        self.evolution_config(&self.run_matrix()[0])
            .validate()
            .context("evolution")?;
        if self.reevaluation.per_surface == 0 || self.reevaluation.repeats == 0 {
            bail!("reevaluation: per_surface and repeats must be positive");
        }
        validate_model(&self.model).context("model")?;
        Ok(())
    }
}

fn validate_model(m: &SurrogateConfig) -> anyhow::Result<()> {
    let positive = [
        ("max_duration", m.max_duration),
        ("ref_speed", m.ref_speed),
        ("joint_speed_limit", m.joint_speed_limit),
        ("height_fraction", m.height_fraction),
        ("tilt_time_constant", m.tilt_time_constant),
        ("height_time_constant", m.height_time_constant),
        ("tilt_speed_ref", m.tilt_speed_ref),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            bail!("{name} must be positive, got {v}");
        }
    }
    if let Some(d) = m.stop_distance {
        if !(d > 0.0) {
            bail!("stop_distance must be positive, got {d}");
        }
    }
    Ok(())
}
