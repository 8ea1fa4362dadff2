//! SQUAD: batched gradient ascent on the soft QD objective with k-nearest-neighbor
//! repulsion in a logit-transformed behavior space.

use std::cmp::Ordering;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, GradientTerm, Result};
use crate::population::{checked_eval_grads, seeded_random_population, EvalWithGrads, Population, Problem};
use crate::scalar::{sq_dist, Real};
use crate::soft_score::squad_objective;

/// Space in which nearest neighbors are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnSpace {
    /// Same space as the repulsion term.
    #[default]
    Transformed,
    /// Untransformed `[0, 1]^d` descriptors.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadConfig {
    pub population_size: usize,
    pub batch_size: usize,
    pub neighbors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub gamma_sq: f64,
    pub logit_clip_eps: f64,
    /// Floor on `f` inside the derivative of `sqrt(f_i f_j)`.
    pub quality_floor: f64,
    /// When false, repulsion and neighbor search use raw descriptors.
    pub transform_enabled: bool,
    pub knn_space: KnnSpace,
    /// Initial parameters are drawn uniformly from `[low, high]^P`.
    pub init_box: (f64, f64),
}

impl Default for SquadConfig {
    fn default() -> Self {
        Self {
            population_size: 1024,
            batch_size: 64,
            neighbors: 16,
            epochs: 1000,
            learning_rate: 0.05,
            gamma_sq: 0.1,
            logit_clip_eps: 1e-6,
            quality_floor: 1e-8,
            transform_enabled: true,
            knn_space: KnnSpace::Transformed,
            init_box: (-5.12, 5.12),
        }
    }
}

impl SquadConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.population_size;
        if n == 0 || self.batch_size == 0 || self.batch_size > n {
            return Err(invalid(format!("batch size {} must be in 1..={n}", self.batch_size)));
        }
        if self.neighbors >= n {
            return Err(invalid(format!(
                "neighbors {} must be at most N-1 = {}",
                self.neighbors,
                n - 1
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.gamma_sq > 0.0 && self.gamma_sq.is_finite()) {
            return Err(invalid(format!("gamma_sq must be positive, got {}", self.gamma_sq)));
        }
        if !(self.logit_clip_eps > 0.0 && self.logit_clip_eps < 0.5) {
            return Err(invalid(format!(
                "logit_clip_eps must be in (0, 0.5), got {}",
                self.logit_clip_eps
            )));
        }
        if !(self.quality_floor > 0.0 && self.quality_floor.is_finite()) {
            return Err(invalid(format!(
                "quality_floor must be positive, got {}",
                self.quality_floor
            )));
        }
        let (lo, hi) = self.init_box;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(format!("invalid init box [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn knn_transformed(&self) -> bool {
        self.transform_enabled && self.knn_space == KnnSpace::Transformed
    }
}

/// Adam moments for one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            first_moment: vec![T::zero(); dim],
            second_moment: vec![T::zero(); dim],
            step_count: 0,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

/// One bias-corrected Adam step in the ascent direction, in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: T) {
    debug_assert_eq!(params.len(), grads.len());
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (((x, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x = *x + lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epoch: usize,
    pub objective_tilde: f64,
    pub mean_quality: f64,
    pub max_quality: f64,
    pub wall_time_s: f64,
}

/// Clamps to `[eps, 1 - eps]` and applies `ln(b / (1 - b))` elementwise.
pub fn logit_transform<T: Real>(b: &[T], eps: T) -> Result<Vec<T>> {
    let tol = T::lit(1e-9);
    b.iter()
        .map(|&x| {
            if !(x >= -tol && x <= T::one() + tol) {
                return Err(invalid(format!("descriptor entry {x} is outside [0, 1]")));
            }
            let c = clamp_unit(x, eps);
            Ok((c / (T::one() - c)).ln())
        })
        .collect()
}

fn clamp_unit<T: Real>(x: T, eps: T) -> T {
    x.max(eps).min(T::one() - eps)
}

/// Derivative `1 / (b (1 - b))` of the logit, elementwise.
pub fn logit_jacobian_diag<T: Real>(b: &[T]) -> Vec<T> {
    b.iter().map(|&x| T::one() / (x * (T::one() - x))).collect()
}

/// Exact k nearest neighbors of every row, ties broken by the smaller index.
pub fn knn_indices<T: Real>(descriptors: &[Vec<T>], k: usize) -> Result<Vec<Vec<usize>>> {
    let rows: Vec<usize> = (0..descriptors.len()).collect();
    knn_for_rows(descriptors, &rows, k)
}

/// k nearest neighbors for the listed rows only, in the order given.
pub fn knn_for_rows<T: Real>(descriptors: &[Vec<T>], rows: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = descriptors.len();
    if k >= n.max(1) {
        return Err(invalid(format!("k = {k} must be less than the number of points {n}")));
    }
    let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(n);
    rows.iter()
        .map(|&i| {
            if i >= n {
                return Err(invalid(format!("row {i} is out of range")));
            }
            if k == 0 {
                return Ok(Vec::new());
            }
            scratch.clear();
            scratch.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (sq_dist(&descriptors[i], &descriptors[j]), j)),
            );
            if k < scratch.len() {
                scratch.select_nth_unstable_by(k - 1, cmp);
                scratch.truncate(k);
            }
            scratch.sort_unstable_by(cmp);
            Ok(scratch.iter().map(|p| p.1).collect())
        })
        .collect()
}

/// Per-solution inputs to the gradient assembly.
struct GradientInputs<'a, T> {
    qualities: &'a [T],
    /// Descriptors in the space the repulsion is measured in.
    space: &'a [Vec<T>],
    /// Clamped raw descriptors, for the logit chain rule.
    clamped: &'a [Vec<T>],
    transform: bool,
    gamma_sq: T,
    quality_floor: T,
}

fn sqrt_pair_derivative<T: Real>(fa: T, fj: T, floor: T) -> T {
    // d sqrt(f+_a f+_j) / d f_a; f+ is flat for f <= 0
    if fa <= T::zero() {
        T::zero()
    } else {
        T::lit(0.5) * (fj.max(T::zero()) / fa.max(floor)).sqrt()
    }
}

/// Ascent gradient of the batch objective for each member of `batch`.
///
/// `grads[k]` holds the derivatives of `batch[k]` at its current parameters.
fn assemble_batch_gradient<T: Real>(
    batch: &[usize],
    grads: &[EvalWithGrads<T>],
    neighbor_lists: &[Vec<usize>],
    inputs: &GradientInputs<'_, T>,
) -> Result<Vec<Vec<T>>> {
    let d = inputs.space.first().map_or(0, Vec::len);
    let half = T::lit(0.5);
    let two_over_g = T::lit(2.0) / inputs.gamma_sq;
    let f = inputs.qualities;
    let b = inputs.space;

    // accumulate dS/df_a and dS/db'_a for batch members from every (i, j) term
    let pos = |a: usize| batch.iter().position(|&x| x == a);
    let mut df = vec![T::zero(); batch.len()];
    let mut db = vec![vec![T::zero(); d]; batch.len()];
    for &i in batch {
        let fi = f[i].max(T::zero());
        for &j in &neighbor_lists[i] {
            let fj = f[j].max(T::zero());
            let w = (-sq_dist(&b[i], &b[j]) / inputs.gamma_sq).exp();
            let root = (fi * fj).sqrt();
            for (a, other) in [(i, j), (j, i)] {
                let Some(k) = pos(a) else { continue };
                df[k] = df[k] - half * sqrt_pair_derivative(f[a], f[other], inputs.quality_floor) * w;
                let coef = half * root * w * two_over_g;
                for (g, (x, y)) in db[k].iter_mut().zip(b[a].iter().zip(&b[other])) {
                    // -1/2 * root * dw/db'_a with dw/db'_a = -2 w (b'_a - b'_other) / gamma^2
                    *g = *g + coef * (*x - *y);
                }
            }
        }
    }

    batch
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let eg = &grads[k];
            let p = eg.grad_quality.len();
            if eg.grad_quality.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    index: a,
                    term: GradientTerm::Quality,
                });
            }
            let mut rep: Vec<T> = eg.grad_quality.iter().map(|&g| df[k] * g).collect();
            for r in 0..d {
                let scale = if inputs.transform {
                    let c = inputs.clamped[a][r];
                    db[k][r] / (c * (T::one() - c))
                } else {
                    db[k][r]
                };
                if scale != T::zero() {
                    for (x, &jv) in rep.iter_mut().zip(&eg.jac_descriptor[r * p..(r + 1) * p]) {
                        *x = *x + scale * jv;
                    }
                }
            }
            if rep.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    index: a,
                    term: GradientTerm::Repulsion,
                });
            }
            Ok(eg.grad_quality.iter().zip(rep).map(|(&q, r)| q + r).collect())
        })
        .collect()
}

/// Descriptor views used by the optimizer.
struct DescriptorCache<T> {
    clamped: Vec<Vec<T>>,
    repulsion: Vec<Vec<T>>,
    knn: Option<Vec<Vec<T>>>,
}

impl<T: Real> DescriptorCache<T> {
    fn new(pop: &Population<T>, config: &SquadConfig) -> Result<Self> {
        let mut cache = Self {
            clamped: Vec::new(),
            repulsion: Vec::new(),
            knn: None,
        };
        if config.transform_enabled && !config.knn_transformed() {
            cache.knn = Some(Vec::new());
        }
        for e in pop.evaluations() {
            cache.push(&e.descriptor, config)?;
        }
        Ok(cache)
    }

    fn views(desc: &[T], config: &SquadConfig) -> Result<(Vec<T>, Vec<T>)> {
        let eps = T::lit(config.logit_clip_eps);
        let clamped: Vec<T> = desc.iter().map(|&x| clamp_unit(x, eps)).collect();
        let space = if config.transform_enabled {
            logit_transform(desc, eps)?
        } else {
            desc.to_vec()
        };
        Ok((clamped, space))
    }

    fn push(&mut self, desc: &[T], config: &SquadConfig) -> Result<()> {
        let (c, s) = Self::views(desc, config)?;
        self.clamped.push(c);
        self.repulsion.push(s);
        if let Some(k) = &mut self.knn {
            k.push(desc.to_vec());
        }
        Ok(())
    }

    fn set(&mut self, i: usize, desc: &[T], config: &SquadConfig) -> Result<()> {
        let (c, s) = Self::views(desc, config)?;
        self.clamped[i] = c;
        self.repulsion[i] = s;
        if let Some(k) = &mut self.knn {
            k[i] = desc.to_vec();
        }
        Ok(())
    }

    fn knn_space(&self) -> &[Vec<T>] {
        self.knn.as_deref().unwrap_or(&self.repulsion)
    }
}

/// Ascent gradients of the batch objective for the members of `batch`, with
/// derivatives taken from fresh `eval_with_grads` calls at their current parameters.
pub fn batch_gradient<T: Real, P: Problem<T> + ?Sized>(
    pop: &Population<T>,
    batch: &[usize],
    neighbor_lists: &[Vec<usize>],
    problem: &P,
    config: &SquadConfig,
) -> Result<Vec<Vec<T>>> {
    if batch.is_empty() {
        return Err(invalid("batch must not be empty"));
    }
    if neighbor_lists.len() != pop.len() {
        return Err(invalid("one neighbor list per solution is required"));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= pop.len()) {
        return Err(invalid(format!("batch index {i} is out of range")));
    }
    let cache = DescriptorCache::new(pop, config)?;
    let grads = batch
        .iter()
        .map(|&i| checked_eval_grads(problem, i, pop.params(i)))
        .collect::<Result<Vec<_>>>()?;
    let qualities = pop.qualities();
    let inputs = GradientInputs {
        qualities: &qualities,
        space: &cache.repulsion,
        clamped: &cache.clamped,
        transform: config.transform_enabled,
        gamma_sq: T::lit(config.gamma_sq),
        quality_floor: T::lit(config.quality_floor),
    };
    assemble_batch_gradient(batch, &grads, neighbor_lists, &inputs)
}

/// Population-wide objective with k-NN lists, measured in the repulsion space.
pub fn population_objective<T: Real>(pop: &Population<T>, config: &SquadConfig) -> Result<T> {
    let cache = DescriptorCache::new(pop, config)?;
    let lists = knn_indices(cache.knn_space(), config.neighbors)?;
    objective_from_cache(pop, &cache, &lists, config)
}

fn objective_from_cache<T: Real>(
    pop: &Population<T>,
    cache: &DescriptorCache<T>,
    lists: &[Vec<usize>],
    config: &SquadConfig,
) -> Result<T> {
    let evals: Vec<_> = pop
        .evaluations()
        .iter()
        .zip(&cache.repulsion)
        .map(|(e, s)| crate::population::Evaluation::new(e.quality, s.clone()))
        .collect();
    squad_objective(&evals, T::lit(config.gamma_sq), lists)
}

#[derive(Debug, Clone)]
pub struct SquadOutcome<T> {
    pub population: Population<T>,
    /// Epoch 0 describes the initial population.
    pub records: Vec<IterationRecord>,
    /// Point evaluations performed, including the initial population.
    pub evaluations: usize,
}

/// Draws the seeded initial population and runs SQUAD on it.
pub fn run_squad<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    config: &SquadConfig,
    seed: u64,
) -> Result<SquadOutcome<T>> {
    run_squad_observed(problem, config, seed, |_, _| Ok(()))
}

/// Like [`run_squad`], calling `observer` after every epoch (and once for the initial state).
pub fn run_squad_observed<T, P, F>(problem: &P, config: &SquadConfig, seed: u64, observer: F) -> Result<SquadOutcome<T>>
where
    T: Real,
    P: Problem<T> + ?Sized,
    F: FnMut(&Population<T>, &IterationRecord) -> Result<()>,
{
    config.validate()?;
    let (lo, hi) = config.init_box;
    let initial = seeded_random_population(problem, config.population_size, seed, (T::lit(lo), T::lit(hi)))?;
    run_squad_from(problem, config, initial, observer)
}

/// Runs SQUAD from a given population.
pub fn run_squad_from<T, P, F>(
    problem: &P,
    config: &SquadConfig,
    initial: Population<T>,
    mut observer: F,
) -> Result<SquadOutcome<T>>
where
    T: Real,
    P: Problem<T> + ?Sized,
    F: FnMut(&Population<T>, &IterationRecord) -> Result<()>,
{
    let start = Instant::now();
    let mut runner = SquadRunner::new(problem, config, initial)?;
    let mut records = Vec::with_capacity(config.epochs + 1);
    let first = runner.record(0, start)?;
    observer(runner.population(), &first)?;
    records.push(first);
    for epoch in 1..=config.epochs {
        runner.run_epoch(epoch)?;
        let rec = runner.record(epoch, start)?;
        observer(runner.population(), &rec)?;
        records.push(rec);
    }
    let evaluations = runner.evaluations();
    Ok(SquadOutcome {
        population: runner.into_population(),
        records,
        evaluations,
    })
}

/// Optimizer state for one run, advanced a batch or an epoch at a time.
pub struct SquadRunner<'p, T, P: ?Sized> {
    problem: &'p P,
    config: SquadConfig,
    pop: Population<T>,
    cache: DescriptorCache<T>,
    adam: Vec<AdamState<T>>,
    /// Neighbor list each solution was last stepped with.
    neighbor_lists: Vec<Vec<usize>>,
    /// Derivatives at each solution's current parameters, filled by re-evaluation.
    derivs: Vec<Option<EvalWithGrads<T>>>,
    evaluations: usize,
}

impl<'p, T: Real, P: Problem<T> + ?Sized> SquadRunner<'p, T, P> {
    pub fn new(problem: &'p P, config: &SquadConfig, initial: Population<T>) -> Result<Self> {
        config.validate()?;
        if initial.len() != config.population_size {
            return Err(invalid(format!(
                "population has {} solutions, config expects {}",
                initial.len(),
                config.population_size
            )));
        }
        if initial.solution_dim() != problem.solution_dim() || initial.behavior_dim() != problem.behavior_dim() {
            return Err(invalid("population dimensions do not match the problem"));
        }
        let n = initial.len();
        let cache = DescriptorCache::new(&initial, config)?;
        let neighbor_lists = knn_indices(cache.knn_space(), config.neighbors)?;
        Ok(Self {
            problem,
            config: config.clone(),
            adam: (0..n).map(|_| AdamState::new(problem.solution_dim())).collect(),
            pop: initial,
            cache,
            neighbor_lists,
            derivs: vec![None; n],
            evaluations: n,
        })
    }

    pub fn population(&self) -> &Population<T> {
        &self.pop
    }

    pub fn into_population(self) -> Population<T> {
        self.pop
    }

    pub fn adam_state(&self, i: usize) -> &AdamState<T> {
        &self.adam[i]
    }

    /// Point evaluations so far, including the initial population.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Batches of one epoch: contiguous index blocks in fixed order.
    pub fn batches(&self) -> Vec<Vec<usize>> {
        let n = self.pop.len();
        (0..n)
            .step_by(self.config.batch_size)
            .map(|s| (s..(s + self.config.batch_size).min(n)).collect())
            .collect()
    }

    pub fn run_epoch(&mut self, epoch: usize) -> Result<()> {
        for (batch_no, batch) in self.batches().iter().enumerate() {
            self.step_batch(batch).map_err(|e| Error::InRun {
                epoch,
                batch: batch_no,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    /// Neighbor search, gradient, Adam update and re-evaluation for one batch.
    pub fn step_batch(&mut self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() || batch.iter().any(|&i| i >= self.pop.len()) {
            return Err(invalid("batch must be a non-empty set of valid indices"));
        }
        let config = &self.config;
        let lists = knn_for_rows(self.cache.knn_space(), batch, config.neighbors)?;
        for (&i, l) in batch.iter().zip(lists) {
            self.neighbor_lists[i] = l;
        }
        let grads = batch
            .iter()
            .map(|&i| match self.derivs[i].take() {
                Some(g) => Ok(g),
                None => checked_eval_grads(self.problem, i, self.pop.params(i)),
            })
            .collect::<Result<Vec<_>>>()?;
        let qualities = self.pop.qualities();
        let inputs = GradientInputs {
            qualities: &qualities,
            space: &self.cache.repulsion,
            clamped: &self.cache.clamped,
            transform: config.transform_enabled,
            gamma_sq: T::lit(config.gamma_sq),
            quality_floor: T::lit(config.quality_floor),
        };
        let steps = assemble_batch_gradient(batch, &grads, &self.neighbor_lists, &inputs)?;
        drop(grads);

        let lr = T::lit(config.learning_rate);
        for (&i, g) in batch.iter().zip(steps) {
            let mut params = self.pop.params(i).to_vec();
            adam_step(&mut params, &g, &mut self.adam[i], lr);
            if params.iter().any(|x| !x.is_finite()) {
                return Err(Error::Evaluation {
                    index: i,
                    reason: "parameters became non-finite".into(),
                });
            }
            let fresh = checked_eval_grads(self.problem, i, &params)?;
            self.cache.set(i, &fresh.eval.descriptor, config)?;
            self.pop.replace(i, params, fresh.eval.clone());
            self.derivs[i] = Some(fresh);
            self.evaluations += 1;
        }
        Ok(())
    }

    /// Objective over the whole population with each solution's last neighbor list.
    pub fn objective(&self) -> Result<T> {
        objective_from_cache(&self.pop, &self.cache, &self.neighbor_lists, &self.config)
    }

    fn record(&self, epoch: usize, start: Instant) -> Result<IterationRecord> {
        Ok(IterationRecord {
            epoch,
            objective_tilde: self.objective()?.as_f64(),
            mean_quality: self.pop.mean_quality().as_f64(),
            max_quality: self.pop.max_quality().as_f64(),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_examples() {
        let v = logit_transform(&[0.5, 0.7, 0.0], 1e-6).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - (7.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((v[2] - (1e-6f64 / (1.0 - 1e-6)).ln()).abs() < 1e-12);
        assert!((v[2] + 13.8155).abs() < 1e-4);
        assert!(logit_transform(&[1.1], 1e-6).is_err());
        assert!(logit_transform(&[-1e-10], 1e-6).is_ok());
    }

    #[test]
    fn logit_jacobian_examples() {
        let j = logit_jacobian_diag(&[0.5f64, 0.7]);
        assert_eq!(j[0], 4.0);
        assert!((j[1] - 1.0 / 0.21).abs() < 1e-12);
    }

    #[test]
    fn knn_line_example() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        assert_eq!(knn_indices(&pts, 1).unwrap(), vec![vec![1], vec![0], vec![1]]);
        assert_eq!(knn_indices(&pts, 0).unwrap(), vec![Vec::<usize>::new(); 3]);
        assert!(knn_indices(&pts, 3).is_err());
    }

    #[test]
    fn knn_ties_prefer_smaller_index() {
        let pts = vec![vec![0.0], vec![1.0], vec![-1.0], vec![1.0]];
        assert_eq!(knn_indices(&pts, 2).unwrap()[0], vec![1, 2]);
        assert_eq!(knn_indices(&pts, 1).unwrap()[1], vec![3]);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut x = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut x, &[0.0, 0.0], &mut s, 0.05);
        assert_eq!(x, vec![1.0, -2.0]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut x = vec![0.0, 0.0, 0.0];
        let mut s = AdamState::new(3);
        adam_step(&mut x, &[3.0, -0.2, 1e3], &mut s, 0.05);
        for (v, sign) in x.iter().zip([1.0, -1.0, 1.0]) {
            assert!(v * sign >= 0.99 * 0.05 && v * sign <= 0.05);
        }
    }

    #[test]
    fn adam_ascends_concave_parabola() {
        let mut x = vec![1.0f64];
        let mut s = AdamState::new(1);
        let mut prev = 1.0f64;
        for _ in 0..10 {
            let g = -2.0 * x[0];
            adam_step(&mut x, &[g], &mut s, 0.05);
            assert!(x[0].abs() < prev);
            prev = x[0].abs();
        }
    }

    #[test]
    fn config_validation() {
        let ok = SquadConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SquadConfig {
                batch_size: 0,
                ..ok.clone()
            },
            SquadConfig {
                batch_size: 2000,
                ..ok.clone()
            },
            SquadConfig {
                neighbors: 1024,
                ..ok.clone()
            },
            SquadConfig {
                learning_rate: 0.0,
                ..ok.clone()
            },
            SquadConfig {
                gamma_sq: -1.0,
                ..ok.clone()
            },
            SquadConfig {
                logit_clip_eps: 0.5,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
