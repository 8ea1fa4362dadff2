//! Seeded experiment pipelines for `run` and `sweep`.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use softqd::baselines::run_map_elites_observed;
use softqd::metrics::{
    build_cvt_with, compute_metrics, compute_metrics_for, rebin_elites, CentroidsRecord, CvtArchive, CvtOptions,
};
use softqd::soft_score::squad_objective;
use softqd::squad::{knn_indices, logit_transform, run_squad_observed, IterationRecord, KnnSpace, SquadConfig};
use softqd::{Evaluation, Population, PopulationRecord, Real};

use crate::config::{Algorithm, Precision, Resolved, RunConfig, SweepParam};
use crate::error::{CliError, CliResult};
use crate::output::{self, MetricsRow};

/// Outputs of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub iterations: Vec<IterationRecord>,
    pub population: PopulationRecord,
    pub evaluations: usize,
}

impl SeedRun {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("every run reports its final epoch")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation over sqrt(n); 0 for a single seed.
    pub stderr: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub qd_score: Stat,
    pub coverage: Stat,
    pub vendi: Stat,
    pub qvs: Stat,
    pub mean_obj: Stat,
    pub max_obj: Stat,
    pub s_tilde: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub evaluations: usize,
    #[serde(flatten)]
    pub last: MetricsRow,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub domain: String,
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub metrics_cells: usize,
    pub sigma_v_sq: f64,
    pub metrics: SummaryStats,
    pub per_seed: Vec<SeedSummary>,
}

impl Summary {
    fn new(cfg: &RunConfig, res: &Resolved, runs: &[SeedRun]) -> Self {
        let col = |f: fn(&MetricsRow) -> f64| Stat::of(&runs.iter().map(|r| f(r.last())).collect::<Vec<_>>());
        Self {
            domain: cfg.domain.clone(),
            algorithm: cfg.algorithm,
            epochs: res.squad.epochs,
            metrics_cells: cfg.metrics_cells,
            sigma_v_sq: res.sigma_v_sq,
            metrics: SummaryStats {
                qd_score: col(|r| r.qd_score),
                coverage: col(|r| r.coverage),
                vendi: col(|r| r.vendi),
                qvs: col(|r| r.qvs),
                mean_obj: col(|r| r.mean_obj),
                max_obj: col(|r| r.max_obj),
                s_tilde: col(|r| r.s_tilde),
            },
            per_seed: runs
                .iter()
                .map(|r| SeedSummary {
                    seed: r.seed,
                    evaluations: r.evaluations,
                    last: r.last().clone(),
                })
                .collect(),
        }
    }
}

/// Centroids of the metric archive: loaded from `cfg.centroids` or built from `cfg.cvt_seed`.
pub fn metric_centroids(cfg: &RunConfig, res: &Resolved) -> CliResult<CentroidsRecord> {
    let d = res.domain.behavior_dim();
    if let Some(path) = &cfg.centroids {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("centroids: cannot read {}: {e}", path.display())))?;
        let rec = CentroidsRecord::from_json(&text).map_err(|e| CliError::Usage(format!("centroids: {e}")))?;
        if rec.dim != d || rec.centroids.len() != cfg.metrics_cells {
            return Err(CliError::Usage(format!(
                "centroids: file has {} cells of dimension {}, config needs {} of dimension {d}",
                rec.centroids.len(),
                rec.dim,
                cfg.metrics_cells
            )));
        }
        return Ok(rec);
    }
    build_centroids(cfg, d, cfg.metrics_cells)
}

fn build_centroids(cfg: &RunConfig, dim: usize, cells: usize) -> CliResult<CentroidsRecord> {
    let opts = CvtOptions {
        samples: cfg.cvt_samples.max(cells),
        max_iters: cfg.cvt_iters,
        ..CvtOptions::default()
    };
    log::info!("building {cells}-cell CVT in {dim} dimensions");
    Ok(build_cvt_with::<f64>(dim, cells, cfg.cvt_seed, &opts)?.to_record())
}

/// Runs every seed of `cfg` and writes all outputs under `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<Summary> {
    let res = cfg.resolve()?;
    let centroids = metric_centroids(cfg, &res)?;
    run_with(cfg, &res, &centroids, out)
}

/// Like [`run`] with prebuilt metric centroids.
pub fn run_with(cfg: &RunConfig, res: &Resolved, centroids: &CentroidsRecord, out: &Path) -> CliResult<Summary> {
    output::create_dir(out)?;
    output::write_text(&out.join("config.toml"), &cfg.to_toml_string())?;
    output::write_text(&out.join("centroids.json"), &(centroids.to_json() + "\n"))?;
    let archive_centroids = match cfg.algorithm {
        Algorithm::Squad => None,
        _ => Some(build_centroids(
            cfg,
            res.domain.behavior_dim(),
            res.map_elites.archive_cells,
        )?),
    };
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        log::info!("{} on {} seed {seed}", cfg.algorithm, cfg.domain);
        let run = match cfg.precision {
            Precision::F64 => run_seed::<f64>(cfg, res, centroids, archive_centroids.as_ref(), seed),
            Precision::F32 => run_seed::<f32>(cfg, res, centroids, archive_centroids.as_ref(), seed),
        }
        .map_err(|e| {
            let e = CliError::Runtime(format!("seed {seed}: {e}"));
            log::error!("{e}");
            e
        })?;
        write_seed(cfg, res, &run, out)?;
        runs.push(run);
    }
    let summary = Summary::new(cfg, res, &runs);
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_seed(cfg: &RunConfig, res: &Resolved, run: &SeedRun, out: &Path) -> CliResult<()> {
    let seed = run.seed;
    output::write_metrics_csv(&out.join(format!("metrics_{seed}.csv")), &run.rows)?;
    output::write_iterations_csv(&out.join(format!("iterations_{seed}.csv")), &run.iterations)?;
    output::write_text(
        &out.join(format!("population_{seed}.json")),
        &(run.population.to_json() + "\n"),
    )?;
    if res.domain.behavior_dim() >= 2 {
        let points: Vec<(f64, f64, f64)> = run
            .population
            .descriptors
            .iter()
            .zip(&run.population.qualities)
            .map(|(b, &q)| (b[0], b[1], q))
            .collect();
        let title = format!("{} {} seed {seed}", cfg.algorithm, cfg.domain);
        output::write_text(
            &out.join(format!("scatter_{seed}.svg")),
            &output::scatter_svg(&points, &title),
        )?;
    }
    Ok(())
}

fn is_report_epoch(epoch: usize, last: usize, interval: usize) -> bool {
    epoch % interval == 0 || epoch == last
}

fn run_seed<T: Real>(
    cfg: &RunConfig,
    res: &Resolved,
    centroids: &CentroidsRecord,
    archive_centroids: Option<&CentroidsRecord>,
    seed: u64,
) -> CliResult<SeedRun> {
    let problem = res.domain.build::<T>(cfg.descriptor_scaling.into())?;
    let metric_archive = CvtArchive::<T>::from_record(centroids)?;
    let sigma_v_sq = T::lit(res.sigma_v_sq);
    let interval = cfg.metric_interval;

    match cfg.algorithm {
        Algorithm::Squad => {
            let epochs = res.squad.epochs;
            let mut rows = Vec::new();
            let outcome = run_squad_observed(problem.as_ref(), &res.squad, seed, |pop, rec| {
                if is_report_epoch(rec.epoch, epochs, interval) {
                    let m = compute_metrics(pop, &metric_archive, sigma_v_sq)?;
                    log::debug!(
                        "seed {seed} epoch {} mean {:.3} vendi {:.3}",
                        rec.epoch,
                        m.mean_objective,
                        m.vendi
                    );
                    rows.push(row(rec.epoch, &m, rec.objective_tilde));
                }
                Ok(())
            })?;
            Ok(SeedRun {
                seed,
                rows,
                iterations: outcome.records,
                population: outcome.population.to_record(),
                evaluations: outcome.evaluations,
            })
        }
        Algorithm::MapElites | Algorithm::GaMe => {
            let archive = CvtArchive::<T>::from_record(archive_centroids.expect("baseline archive centroids"))?;
            let per_epoch = res.squad.population_size;
            let mut rows = Vec::new();
            let mut iterations = Vec::new();
            let start = Instant::now();
            let outcome = run_map_elites_observed(
                problem.as_ref(),
                &res.map_elites,
                archive,
                seed,
                per_epoch * interval,
                |arch, evals| {
                    let elites = rebin_elites(arch, &metric_archive)?;
                    let m = compute_metrics_for(&elites, &metric_archive, sigma_v_sq)?;
                    let s = elite_objective(&elites, &res.squad)?;
                    let epoch = evals / per_epoch;
                    rows.push(row(epoch, &m, s));
                    iterations.push(IterationRecord {
                        epoch,
                        objective_tilde: s,
                        mean_quality: m.mean_objective,
                        max_quality: m.max_objective,
                        wall_time_s: start.elapsed().as_secs_f64(),
                    });
                    Ok(())
                },
            )?;
            let population = rebin_population(&outcome.elite_population()?, &metric_archive)?;
            Ok(SeedRun {
                seed,
                rows,
                iterations,
                population: population.to_record(),
                evaluations: outcome.evaluations,
            })
        }
    }
}

fn row(epoch: usize, m: &softqd::metrics::MetricsReport, s_tilde: f64) -> MetricsRow {
    MetricsRow {
        epoch,
        qd_score: m.qd_score,
        coverage: m.coverage_percent,
        vendi: m.vendi,
        qvs: m.qvs,
        mean_obj: m.mean_objective,
        max_obj: m.max_objective,
        s_tilde,
    }
}

/// Best member of `pop` per metric cell, in cell order.
fn rebin_population<T: Real>(pop: &Population<T>, metric: &CvtArchive<T>) -> CliResult<Population<T>> {
    let mut arch = metric.clone();
    arch.clear();
    for (i, e) in pop.evaluations().iter().enumerate() {
        arch.insert(e, i)?;
    }
    let (sols, evals) = arch
        .elites()
        .map(|(_, e)| {
            (
                pop.solutions()[e.solution].clone(),
                pop.evaluations()[e.solution].clone(),
            )
        })
        .unzip();
    Ok(Population::from_parts(sols, evals)?)
}

/// The SQUAD objective of an elite set, with `K` capped at `n - 1`.
pub fn elite_objective<T: Real>(elites: &[Evaluation<T>], squad: &SquadConfig) -> softqd::Result<f64> {
    let k = squad.neighbors.min(elites.len().saturating_sub(1));
    let raw: Vec<Vec<T>> = elites.iter().map(|e| e.descriptor.clone()).collect();
    let space: Vec<Vec<T>> = if squad.transform_enabled {
        raw.iter()
            .map(|b| logit_transform(b, T::lit(squad.logit_clip_eps)))
            .collect::<softqd::Result<_>>()?
    } else {
        raw.clone()
    };
    let lists = match squad.knn_space {
        KnnSpace::Transformed => knn_indices(&space, k)?,
        KnnSpace::Raw => knn_indices(&raw, k)?,
    };
    let repulsion: Vec<Evaluation<T>> = elites
        .iter()
        .zip(space)
        .map(|(e, s)| Evaluation::new(e.quality, s))
        .collect();
    Ok(squad_objective(&repulsion, T::lit(squad.gamma_sq), &lists)?.as_f64())
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub seed: u64,
    #[serde(flatten)]
    pub last: MetricsRow,
}

/// Runs `cfg` once per value of `param`, each in its own subdirectory of `out`,
/// and writes `sweep.csv` with one row per (value, seed).
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[String], out: &Path) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| param.apply(cfg, v))
        .collect::<CliResult<Vec<_>>>()?;
    let resolved = configs.iter().map(RunConfig::resolve).collect::<CliResult<Vec<_>>>()?;
    let centroids = metric_centroids(cfg, &resolved[0])?;
    output::create_dir(out)?;
    let mut rows = Vec::new();
    for ((value, c), res) in values.iter().zip(&configs).zip(&resolved) {
        log::info!("sweep {param} = {value}");
        let summary = run_with(c, res, &centroids, &out.join(format!("{param}_{value}")))?;
        rows.extend(summary.per_seed.into_iter().map(|s| SweepRow {
            param: param.to_string(),
            value: value.clone(),
            seed: s.seed,
            last: s.last,
        }));
    }
    // csv cannot serialize flattened structs, so write the rows by hand.
    let mut text = format!("param,value,seed,{}\n", output::METRICS_HEADER);
    for r in &rows {
        let m = &r.last;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.param, r.value, r.seed, m.epoch, m.qd_score, m.coverage, m.vendi, m.qvs, m.mean_obj, m.max_obj, m.s_tilde
        ));
    }
    output::write_text(&out.join("sweep.csv"), &text)?;
    Ok(rows)
}
