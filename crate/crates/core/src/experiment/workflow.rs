//! The evolve / reevaluate / analyze / export-plots pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunSpec};
use super::store::{
    genome_cells, genome_columns, read_reeval, read_runlog, write_atomic, write_reeval,
    write_runlog, ReevalRow, Table,
};
use crate::analysis::{
    distance_matrix, hypervolume_convergence, kde_scott, knot_side_view, mean_confidence_series,
    mean_pair_distance, mean_spline, parameter_significance, pareto_front, DistanceMatrix,
    FrontPoint, StatResult, SurfaceSample, DENSITY_KNOTS, SIGNIFICANCE_ALPHA,
};
use crate::fitness::{evaluate_with, Evaluation, Fitness, Outcome};
use crate::gait::DUMP_SAMPLES;
use crate::nsga2::{derive_seed, EvalRecord, Evolution, EvolutionConfig, SurrogateEvaluator};
use crate::params::{decode, Genome, PARAMS};
use crate::surrogate::{rollout_with, SurfaceModel, SurrogateConfig};

pub const RUNS_DIR: &str = "runs";
pub const EXPERIMENT_SNAPSHOT: &str = "experiment.toml";
const EXPERIMENT_SCHEMA: &str = "# gaitevo experiment v1";
const SNAPSHOT_SCHEMA: &str = "# gaitevo run-snapshot v1";
const REEVAL_DOMAIN: u64 = 0x7265_6576_616c_0000;
const KDE_GRID: usize = 40;

/// Per-run settings written next to each run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub run: RunSpec,
    pub evolution: EvolutionConfig,
    pub surface: SurfaceModel,
    pub model: SurrogateConfig,
}

pub fn runs_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir().join(RUNS_DIR)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .context("starting worker pool")?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the whole matrix into `<output_dir>/runs`, resuming any partial runs.
pub fn evolve(cfg: &ExperimentConfig, jobs: Option<usize>) -> anyhow::Result<Vec<PathBuf>> {
    let dir = runs_dir(cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = format!("{EXPERIMENT_SCHEMA}\n{}", cfg.to_toml());
    write_atomic(&dir.join(EXPERIMENT_SNAPSHOT), text.as_bytes())?;
    let matrix = cfg.run_matrix();
    with_jobs(jobs, || {
        matrix
            .par_iter()
            .map(|run| run_with_checkpoint(cfg, run, &dir))
            .collect::<anyhow::Result<Vec<PathBuf>>>()
    })?
}

/// Runs one evolution, rewriting its log after every generation. An
/// existing log from the same settings is resumed.
pub fn run_with_checkpoint(
    cfg: &ExperimentConfig,
    run: &RunSpec,
    dir: &Path,
) -> anyhow::Result<PathBuf> {
    let stem = run.file_stem();
    let log_path = dir.join(format!("{stem}.csv"));
    let snap_path = dir.join(format!("{stem}.toml"));
    let snapshot = RunSnapshot {
        run: run.clone(),
        evolution: cfg.evolution_config(run),
        surface: cfg.surface(&run.surface)?,
        model: cfg.model.clone(),
    };
    let snap_text = format!(
        "{SNAPSHOT_SCHEMA}\n{}",
        toml::to_string(&snapshot).expect("snapshot is serializable")
    );
    if snap_path.exists() {
        let old = fs::read_to_string(&snap_path)?;
        if old != snap_text {
            bail!(
                "{stem} was started with different settings; remove {} or use another output_dir",
                dir.display()
            );
        }
    } else {
        write_atomic(&snap_path, snap_text.as_bytes())?;
    }

    let prior = if log_path.exists() {
        read_runlog(&log_path)?
    } else {
        Vec::new()
    };
    let prior_len = prior.len();
    let mut evo = Evolution::resume(snapshot.evolution.clone(), prior)
        .with_context(|| format!("resuming {stem}"))?;
    if evo.records().len() != prior_len || !log_path.exists() {
        write_runlog(&log_path, evo.records())?;
    }
    let evaluator = SurrogateEvaluator {
        surface: snapshot.surface,
        fitness: snapshot.evolution.fitness.clone(),
        model: snapshot.model,
    };
    while !evo.is_done() {
        evo.step(&evaluator)?;
        write_runlog(&log_path, evo.records())?;
    }
    Ok(log_path)
}

/// A completed run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub spec: RunSpec,
    pub records: Vec<EvalRecord>,
}

/// Reads the experiment snapshot and every run log in `dir`.
pub fn load_runs(dir: &Path) -> anyhow::Result<(ExperimentConfig, Vec<LoadedRun>)> {
    let cfg = ExperimentConfig::load(&dir.join(EXPERIMENT_SNAPSHOT))?;
    let mut runs = Vec::new();
    for spec in cfg.run_matrix() {
        let path = dir.join(format!("{}.csv", spec.file_stem()));
        let records = read_runlog(&path)?;
        let want = cfg.evolution_config(&spec).total_evaluations();
        if records.len() != want {
            bail!(
                "{} is incomplete ({} of {want} evaluations); run evolve again to resume it",
                path.display(),
                records.len()
            );
        }
        runs.push(LoadedRun { spec, records });
    }
    Ok((cfg, runs))
}

/// A member of a per-run front, tagged with its run.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPoint {
    pub run: usize,
    pub point: FrontPoint,
}

impl MergedPoint {
    pub fn id(&self, surface: &str) -> String {
        format!("{surface}-r{:02}-e{:04}", self.run, self.point.eval_index)
    }
}

/// Union of the per-run fronts of all runs on `surface`, in run order.
pub fn merged_front(runs: &[LoadedRun], surface: &str) -> Vec<MergedPoint> {
    runs.iter()
        .filter(|r| r.spec.surface == surface)
        .flat_map(|r| {
            pareto_front(&r.records)
                .points
                .into_iter()
                .map(move |point| MergedPoint {
                    run: r.spec.index,
                    point,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReevalOptions {
    pub per_surface: usize,
    pub repeats: usize,
    pub surfaces: Vec<String>,
    pub seed: u64,
}

impl ReevalOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let r = &cfg.reevaluation;
        Self {
            per_surface: r.per_surface,
            repeats: r.repeats,
            surfaces: r.surfaces.clone(),
            seed: r.seed,
        }
    }
}

/// Picks `per_surface` front members per training surface and evaluates
/// each `repeats` times on every listed surface.
pub fn reevaluate(
    cfg: &ExperimentConfig,
    runs: &[LoadedRun],
    opts: &ReevalOptions,
    jobs: Option<usize>,
) -> anyhow::Result<Vec<ReevalRow>> {
    let eval_surfaces: Vec<SurfaceModel> = opts
        .surfaces
        .iter()
        .map(|s| cfg.surface(s))
        .collect::<anyhow::Result<_>>()?;

    let mut chosen: Vec<(String, MergedPoint)> = Vec::new();
    for (k, training) in cfg.runs.surfaces.iter().enumerate() {
        let front = merged_front(runs, training);
        if front.len() < opts.per_surface {
            bail!(
                "the merged front for surface {training} has only {} individuals; \
                 request {} or fewer per surface",
                front.len(),
                front.len()
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, k as u64));
        let mut picks =
            rand::seq::index::sample(&mut rng, front.len(), opts.per_surface).into_vec();
        picks.sort_unstable();
        chosen.extend(
            picks
                .into_iter()
                .map(|i| (training.clone(), front[i].clone())),
        );
    }

    let mut tasks = Vec::new();
    for (training, m) in &chosen {
        for surface in &eval_surfaces {
            for repeat in 0..opts.repeats {
                let seed = derive_seed(opts.seed ^ REEVAL_DOMAIN, tasks.len() as u64);
                tasks.push((training, m, surface, repeat, seed));
            }
        }
    }
    with_jobs(jobs, || {
        tasks
            .par_iter()
            .map(|&(training, m, surface, repeat, seed)| {
                let e = evaluate_with(
                    &decode(&m.point.genome),
                    surface,
                    seed,
                    &cfg.fitness,
                    &cfg.model,
                )
                .unwrap_or(Evaluation {
                    fitness: Fitness::FLOOR,
                    outcome: Outcome::Failed,
                });
                ReevalRow {
                    individual: m.id(training),
                    training_surface: training.clone(),
                    run: m.run,
                    eval_index: m.point.eval_index,
                    eval_surface: surface.name.clone(),
                    repeat,
                    seed,
                    fitness: e.fitness,
                    outcome: e.outcome,
                    genome: m.point.genome,
                }
            })
            .collect()
    })
}

/// Headline numbers of an analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    /// Surfaces compared by the significance table.
    pub compared: Option<(String, String)>,
    pub significance: Vec<StatResult>,
    /// Mean final hypervolume per training surface.
    pub final_hypervolume: Vec<(String, f64)>,
    /// Whether every run's cumulative hypervolume series is non-decreasing.
    pub hypervolume_monotone: bool,
    pub distance: Option<DistanceMatrix>,
    /// Mean distance over surface pairs of equal and of different hardness.
    pub within_cross: Option<(f64, f64)>,
}

impl AnalysisSummary {
    pub fn significant_parameters(&self) -> Vec<&'static str> {
        self.significance
            .iter()
            .filter(|r| r.significant)
            .map(|r| r.parameter)
            .collect()
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

/// Runs every analysis and writes the report bundle to `out`.
pub fn analyze(
    runs_dir: &Path,
    reeval: Option<&Path>,
    out: &Path,
) -> anyhow::Result<AnalysisSummary> {
    let (cfg, runs) = load_runs(runs_dir)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let training = &cfg.runs.surfaces;

    // per-run fronts
    let mut header = vec![
        "training_surface",
        "run",
        "eval_index",
        "speed_m_per_min",
        "stability",
    ];
    let gcols = genome_columns();
    header.extend(gcols.iter().map(String::as_str));
    let mut fronts = Table::new("fronts", &header);
    for r in &runs {
        for p in pareto_front(&r.records).points {
            let mut row = vec![
                r.spec.surface.clone(),
                r.spec.index.to_string(),
                p.eval_index.to_string(),
                f(p.fitness.speed),
                f(p.fitness.stability),
            ];
            row.extend(genome_cells(&p.genome));
            fronts.push(row);
        }
    }
    fronts.write(&out.join("fronts.csv"))?;

    // hypervolume convergence
    let stride = cfg.evolution.population_size;
    let mut hv = Table::new(
        "hypervolume",
        &["training_surface", "run", "eval_count", "hypervolume"],
    );
    let mut hv_ci = Table::new(
        "hypervolume_ci",
        &[
            "training_surface",
            "eval_count",
            "mean",
            "ci95_lower",
            "ci95_upper",
        ],
    );
    let mut final_hypervolume = Vec::new();
    let mut hypervolume_monotone = true;
    for s in training {
        let series: Vec<Vec<(usize, f64)>> = runs
            .iter()
            .filter(|r| &r.spec.surface == s)
            .map(|r| {
                let series = hypervolume_convergence(&r.records, stride);
                hypervolume_monotone &= series.windows(2).all(|w| w[1].1 >= w[0].1);
                for (n, v) in &series {
                    hv.push(vec![
                        s.clone(),
                        r.spec.index.to_string(),
                        n.to_string(),
                        f(*v),
                    ]);
                }
                series
            })
            .collect();
        let ci = mean_confidence_series(&series, 0.95);
        for p in &ci {
            hv_ci.push(vec![
                s.clone(),
                p.eval_count.to_string(),
                f(p.mean),
                f(p.lower),
                f(p.upper),
            ]);
        }
        if let Some(last) = ci.last() {
            final_hypervolume.push((s.clone(), last.mean));
        }
    }
    hv.write(&out.join("hypervolume.csv"))?;
    hv_ci.write(&out.join("hypervolume_ci.csv"))?;

    // parameter significance between the first two training surfaces
    let merged: BTreeMap<&String, Vec<MergedPoint>> = training
        .iter()
        .map(|s| (s, merged_front(&runs, s)))
        .collect();
    let mut compared = None;
    let mut significance = Vec::new();
    if training.len() >= 2 {
        let (a, b) = (&training[0], &training[1]);
        let ga: Vec<Genome> = merged[a].iter().map(|m| m.point.genome).collect();
        let gb: Vec<Genome> = merged[b].iter().map(|m| m.point.genome).collect();
        significance = parameter_significance(&ga, &gb, SIGNIFICANCE_ALPHA)?;
        let mut t = Table::new(
            "significance",
            &[
                "parameter",
                "u",
                "p_raw",
                "p_holm",
                "significant",
                "n_first",
                "n_second",
            ],
        );
        for r in &significance {
            t.push(vec![
                r.parameter.to_string(),
                f(r.u),
                f(r.p_raw),
                f(r.p_adjusted),
                r.significant.to_string(),
                ga.len().to_string(),
                gb.len().to_string(),
            ]);
        }
        t.write(&out.join("significance.csv"))?;
        compared = Some((a.clone(), b.clone()));
    }

    // mean trajectories and control-point densities
    let mut splines = Table::new(
        "mean_splines",
        &[
            "training_surface",
            "sample",
            "phase",
            "lateral_mm",
            "cranial_mm",
            "dorsal_mm",
        ],
    );
    let mut kde = Table::new(
        "kde",
        &[
            "training_surface",
            "knot",
            "ix",
            "iy",
            "cranial_mm",
            "dorsal_mm",
            "density",
        ],
    );
    let mut notes = Vec::new();
    for s in training {
        let specs: Vec<_> = merged[s].iter().map(|m| decode(&m.point.genome)).collect();
        if specs.is_empty() {
            continue;
        }
        for (k, p) in mean_spline(&specs, DUMP_SAMPLES)?.iter().enumerate() {
            splines.push(vec![
                s.clone(),
                k.to_string(),
                f(k as f64 / DUMP_SAMPLES as f64),
                f(p.x),
                f(p.y),
                f(p.z),
            ]);
        }
        for (name, knot) in DENSITY_KNOTS {
            match kde_scott(&knot_side_view(&specs, knot)) {
                Ok(est) => {
                    let g = est.grid(KDE_GRID, KDE_GRID, 3.0);
                    for (iy, row) in g.density.iter().enumerate() {
                        for (ix, d) in row.iter().enumerate() {
                            kde.push(vec![
                                s.clone(),
                                name.to_string(),
                                ix.to_string(),
                                iy.to_string(),
                                f(g.xs[ix]),
                                f(g.ys[iy]),
                                f(*d),
                            ]);
                        }
                    }
                }
                Err(e) => notes.push(format!("no density for {name} on {s}: {e}")),
            }
        }
    }
    splines.write(&out.join("mean_splines.csv"))?;
    kde.write(&out.join("kde.csv"))?;

    // cross-surface distances
    let mut distance = None;
    let mut within_cross = None;
    if let Some(path) = reeval {
        let rows = read_reeval(path)?;
        let mut surfaces: Vec<String> = Vec::new();
        for r in &rows {
            if !surfaces.contains(&r.eval_surface) {
                surfaces.push(r.eval_surface.clone());
            }
        }
        let samples: Vec<SurfaceSample> = rows
            .iter()
            .map(|r| SurfaceSample {
                individual: r.individual.clone(),
                surface: r.eval_surface.clone(),
                fitness: r.fitness,
            })
            .collect();
        let m = distance_matrix(&samples, &surfaces)?;
        let mut header = vec!["surface"];
        header.extend(surfaces.iter().map(String::as_str));
        let mut t = Table::new("distance_matrix", &header);
        for (i, s) in surfaces.iter().enumerate() {
            let mut row = vec![s.clone()];
            row.extend(m.values[i].iter().map(|v| f(*v)));
            t.push(row);
        }
        t.write(&out.join("distance_matrix.csv"))?;

        let models: Vec<SurfaceModel> = surfaces
            .iter()
            .map(|s| cfg.surface(s))
            .collect::<anyhow::Result<_>>()?;
        let (mut same, mut diff) = (Vec::new(), Vec::new());
        for i in 0..models.len() {
            for j in (i + 1)..models.len() {
                let pair = (models[i].name.as_str(), models[j].name.as_str());
                if models[i].hardness == models[j].hardness {
                    same.push(pair);
                } else {
                    diff.push(pair);
                }
            }
        }
        if let (Some(w), Some(c)) = (mean_pair_distance(&m, &same), mean_pair_distance(&m, &diff)) {
            within_cross = Some((w, c));
        }
        distance = Some(m);
    }

    let summary = AnalysisSummary {
        compared,
        significance,
        final_hypervolume,
        hypervolume_monotone,
        distance,
        within_cross,
    };
    write_atomic(
        &out.join("summary.txt"),
        render_summary(&summary, &notes).as_bytes(),
    )?;
    Ok(summary)
}

fn render_summary(s: &AnalysisSummary, notes: &[String]) -> String {
    let mut out = String::from("# gaitevo summary v1\n\n");
    out.push_str("final hypervolume (mean over runs, reference speed 0 / stability -1)\n");
    for (surface, v) in &s.final_hypervolume {
        let _ = writeln!(out, "  {surface}: {v:.4}");
    }
    let _ = writeln!(
        out,
        "  cumulative series non-decreasing: {}\n",
        if s.hypervolume_monotone { "yes" } else { "no" }
    );
    if let Some((a, b)) = &s.compared {
        let _ = writeln!(
            out,
            "parameters differing between {a} and {b} fronts (Holm, alpha {SIGNIFICANCE_ALPHA})"
        );
        let sig = s.significant_parameters();
        if sig.is_empty() {
            out.push_str("  none\n");
        }
        for r in s.significance.iter().filter(|r| r.significant) {
            let _ = writeln!(out, "  {:<22} p_holm = {:.3e}", r.parameter, r.p_adjusted);
        }
        out.push('\n');
    }
    if let Some(m) = &s.distance {
        out.push_str("mean normalized distance between surfaces\n");
        let _ = write!(out, "{:>8}", "");
        for name in &m.surfaces {
            let _ = write!(out, "{name:>8}");
        }
        out.push('\n');
        for (i, name) in m.surfaces.iter().enumerate() {
            let _ = write!(out, "{name:>8}");
            for v in &m.values[i] {
                let _ = write!(out, "{v:>8.3}");
            }
            out.push('\n');
        }
        if let Some((w, c)) = s.within_cross {
            let _ = writeln!(out, "  same hardness {w:.4}, different hardness {c:.4}");
        }
        out.push('\n');
    }
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// Reshapes an analysis bundle into one table per figure.
pub fn export_plots(analysis: &Path, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, t: Table| -> anyhow::Result<()> {
        let p = out.join(name);
        t.write(&p)?;
        written.push(p);
        Ok(())
    };

    let fronts = Table::read_any(&analysis.join("fronts.csv"))?;
    let mut pareto = Table::new(
        "plot_pareto",
        &["training_surface", "run", "speed_m_per_min", "stability"],
    );
    let mut params = Table::new(
        "plot_parameters",
        &["training_surface", "parameter", "genotype"],
    );
    for r in &fronts.rows {
        pareto.push(vec![r[0].clone(), r[1].clone(), r[3].clone(), r[4].clone()]);
        for (i, p) in PARAMS.iter().enumerate() {
            params.push(vec![r[0].clone(), p.name.to_string(), r[5 + i].clone()]);
        }
    }
    emit("pareto_fronts.csv", pareto)?;
    emit("parameters.csv", params)?;

    for (src, dst) in [
        ("hypervolume_ci.csv", "hypervolume.csv"),
        ("mean_splines.csv", "mean_splines.csv"),
        ("kde.csv", "kde.csv"),
        ("distance_matrix.csv", "distance_matrix.csv"),
    ] {
        let path = analysis.join(src);
        if path.exists() {
            let mut t = Table::read_any(&path)?;
            t.schema = t.schema.replacen("# gaitevo ", "# gaitevo plot_", 1);
            emit(dst, t)?;
        }
    }
    Ok(written)
}

/// Rolls out one genome and writes its trace.
pub fn simulate(
    genome: &Genome,
    surface: &SurfaceModel,
    seed: u64,
    model: &SurrogateConfig,
    out: &Path,
) -> anyhow::Result<Outcome> {
    let spec = decode(genome);
    match rollout_with(&spec, surface, seed, model) {
        Ok(trace) => {
            let mut bytes = Vec::new();
            trace.write_csv(&mut bytes)?;
            write_atomic(out, &bytes)?;
            Ok(trace.terminated_by.into())
        }
        Err(fail) => bail!("rollout failed: {fail}"),
    }
}
