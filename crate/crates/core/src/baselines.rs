//! Comparison optimizers: MAP-Elites over a CVT archive with iso+line
//! mutation, and its gradient-assisted variant (GA-ME).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metrics::CvtArchive;
use crate::population::{checked_eval, checked_eval_grads, EvalWithGrads, Evaluation, Population, Problem, Solution};
use crate::rng::{self, SeededRng};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapElitesConfig {
    pub archive_cells: usize,
    /// Children generated from one archive snapshot.
    pub batch: usize,
    pub sigma_iso: f64,
    pub sigma_line: f64,
    pub total_evals: usize,
    /// Step along the parent's quality gradient; 0 gives plain MAP-Elites.
    pub grad_step: f64,
    /// Random solutions are drawn from `[low, high]^P` until two cells are filled.
    pub init_box: (f64, f64),
}

impl Default for MapElitesConfig {
    fn default() -> Self {
        Self {
            archive_cells: 10_000,
            batch: 100,
            sigma_iso: 0.01 * 10.24,
            sigma_line: 0.2,
            total_evals: 1_025_024,
            grad_step: 0.0,
            init_box: (-5.12, 5.12),
        }
    }
}

impl MapElitesConfig {
    /// GA-ME defaults: the plain configuration with a gradient step of 0.05.
    pub fn ga_me() -> Self {
        Self {
            grad_step: 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.archive_cells == 0 || self.batch == 0 {
            return Err(invalid("archive_cells and batch must be at least 1"));
        }
        if !(self.sigma_iso >= 0.0 && self.sigma_line >= 0.0 && self.grad_step >= 0.0) {
            return Err(invalid("sigma_iso, sigma_line and grad_step must be non-negative"));
        }
        if self.total_evals < self.batch {
            return Err(invalid(format!(
                "total_evals {} is below one batch of {}",
                self.total_evals, self.batch
            )));
        }
        let (lo, hi) = self.init_box;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(format!("invalid init box [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn uses_gradients(&self) -> bool {
        self.grad_step > 0.0
    }
}

/// `x1 + sigma_iso g + sigma_line u (x2 - x1)` with `g` a standard normal vector
/// and `u` a standard normal scalar (drawn after `g`).
pub fn iso_line_mutate<T: Real, R: Rng + ?Sized>(
    x1: &[T],
    x2: &[T],
    sigma_iso: T,
    sigma_line: T,
    rng: &mut R,
) -> Vec<T> {
    debug_assert_eq!(x1.len(), x2.len());
    let g: Vec<T> = (0..x1.len())
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let u = T::lit(rng.sample::<f64, _>(StandardNormal));
    x1.iter()
        .zip(x2)
        .zip(g)
        .map(|((&a, &b), gi)| a + sigma_iso * gi + sigma_line * u * (b - a))
        .collect()
}

/// Final archive plus the parameters of every elite.
#[derive(Debug, Clone)]
pub struct MapElitesOutcome<T> {
    pub archive: CvtArchive<T>,
    /// Parameters stored per cell, aligned with `archive.cells()`.
    pub elite_params: Vec<Option<Vec<T>>>,
    pub evaluations: usize,
}

impl<T: Real> MapElitesOutcome<T> {
    /// The elites as a population, in cell order.
    pub fn elite_population(&self) -> Result<Population<T>> {
        let mut sols = Vec::new();
        let mut evals = Vec::new();
        for (cell, e) in self.archive.elites() {
            let params = self.elite_params[cell].clone().expect("every elite has parameters");
            sols.push(Solution::new(params));
            evals.push(Evaluation::new(e.quality, e.descriptor.clone()));
        }
        Population::from_parts(sols, evals)
    }
}

struct EliteStore<T> {
    params: Vec<Option<Vec<T>>>,
    grads: Vec<Option<Vec<T>>>,
    occupied: Vec<usize>,
}

pub fn run_map_elites<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    config: &MapElitesConfig,
    cvt: CvtArchive<T>,
    seed: u64,
) -> Result<MapElitesOutcome<T>> {
    run_map_elites_observed(problem, config, cvt, seed, usize::MAX, |_, _| Ok(()))
}

/// Runs MAP-Elites, calling `observer(archive, evaluations)` whenever the
/// evaluation count crosses a multiple of `report_every`.
pub fn run_map_elites_observed<T, P, F>(
    problem: &P,
    config: &MapElitesConfig,
    mut cvt: CvtArchive<T>,
    seed: u64,
    report_every: usize,
    mut observer: F,
) -> Result<MapElitesOutcome<T>>
where
    T: Real,
    P: Problem<T> + ?Sized,
    F: FnMut(&CvtArchive<T>, usize) -> Result<()>,
{
    config.validate()?;
    if cvt.dim() != problem.behavior_dim() {
        return Err(invalid(format!(
            "archive dimension {} does not match behavior dimension {}",
            cvt.dim(),
            problem.behavior_dim()
        )));
    }
    if cvt.num_cells() != config.archive_cells {
        return Err(invalid(format!(
            "archive has {} cells, config expects {}",
            cvt.num_cells(),
            config.archive_cells
        )));
    }
    if report_every == 0 {
        return Err(invalid("report_every must be positive"));
    }
    cvt.clear();
    let mut rng: SeededRng = rng::seeded(seed);
    let cells = cvt.num_cells();
    let mut store = EliteStore {
        params: vec![None; cells],
        grads: vec![None; cells],
        occupied: Vec::new(),
    };
    let dim = problem.solution_dim();
    let (lo, hi) = (T::lit(config.init_box.0), T::lit(config.init_box.1));
    let (s_iso, s_line, eta) = (
        T::lit(config.sigma_iso),
        T::lit(config.sigma_line),
        T::lit(config.grad_step),
    );
    let mut outcome = MapElitesOutcome {
        archive: cvt,
        elite_params: Vec::new(),
        evaluations: 0,
    };
    let mut next_report = report_every;

    while outcome.evaluations < config.total_evals {
        let n = config.batch.min(config.total_evals - outcome.evaluations);
        let children: Vec<Vec<T>> = (0..n)
            .map(|_| {
                if store.occupied.len() < 2 {
                    return (0..dim).map(|_| lo + (hi - lo) * T::lit(rng.random::<f64>())).collect();
                }
                let a = store.occupied[rng.random_range(0..store.occupied.len())];
                let b = store.occupied[rng.random_range(0..store.occupied.len())];
                let x1 = store.params[a].as_ref().expect("occupied cell");
                let x2 = store.params[b].as_ref().expect("occupied cell");
                let mut child = iso_line_mutate(x1, x2, s_iso, s_line, &mut rng);
                if let Some(g) = store.grads[a].as_ref() {
                    child.iter_mut().zip(g).for_each(|(c, &gi)| *c = *c + eta * gi);
                }
                child
            })
            .collect();
        for child in children {
            let index = outcome.evaluations;
            let (eval, grad) = if config.uses_gradients() {
                let EvalWithGrads { eval, grad_quality, .. } = checked_eval_grads(problem, index, &child)?;
                (eval, Some(grad_quality))
            } else {
                (checked_eval(problem, index, &child)?, None)
            };
            outcome.evaluations += 1;
            let cell = outcome.archive.cell_of(&eval.descriptor)?;
            if outcome.archive.insert_at(cell, &eval, index) {
                if store.params[cell].is_none() {
                    store.occupied.push(cell);
                }
                store.params[cell] = Some(child);
                store.grads[cell] = grad;
            }
        }
        if outcome.evaluations >= next_report || outcome.evaluations == config.total_evals {
            while next_report <= outcome.evaluations {
                next_report = next_report.saturating_add(report_every);
            }
            observer(&outcome.archive, outcome.evaluations)?;
        }
    }
    outcome.elite_params = store.params;
    Ok(outcome)
}
