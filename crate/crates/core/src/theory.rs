//! Numerical checks of the Soft QD Score's structural properties: monotonicity,
//! submodularity, the small-kernel limit, and the pairwise-bound sandwich.
//!
//! The Monte Carlo checks take their sample set from the caller and evaluate
//! both sides on it. Rounding is monotone, so a pointwise inequality between
//! integrands carries over to the estimates exactly and no tolerance is used.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::population::{Evaluation, KernelParams};
use crate::rng;
use crate::scalar::{sq_dist, Real};
use crate::soft_score::{
    behavior_values, error_bounds, lower_bound_full, pairwise_sum, soft_qd_score_mc, soft_qd_score_quadrature,
    IntegrationBox,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest slack observed; negative exactly when some trial failed.
    pub worst_margin: f64,
}

impl PropertyReport {
    fn single(name: &str, margin: f64, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            trials: 1,
            failures: usize::from(!ok),
            worst_margin: margin,
        }
    }

    fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            trials: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
        }
    }

    /// Folds another report of the same property into this one.
    pub fn absorb(&mut self, other: &PropertyReport) {
        self.trials += other.trials;
        self.failures += other.failures;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn mc_value<T: Real>(
    evals: &[Evaluation<T>],
    kernel: &KernelParams<T>,
    samples: &[Vec<T>],
    region: &IntegrationBox<T>,
) -> Result<T> {
    Ok(soft_qd_score_mc(evals, kernel, samples, region)?.value)
}

/// Adding a solution never lowers the score.
pub fn check_monotone_add<T: Real>(
    pop: &[Evaluation<T>],
    new_solution: &Evaluation<T>,
    samples: &[Vec<T>],
    kernel: &KernelParams<T>,
    region: &IntegrationBox<T>,
) -> Result<PropertyReport> {
    let before = mc_value(pop, kernel, samples, region)?;
    let mut grown = pop.to_vec();
    grown.push(new_solution.clone());
    let after = mc_value(&grown, kernel, samples, region)?;
    let margin = (after - before).as_f64();
    Ok(PropertyReport::single("monotone_add", margin, after >= before))
}

/// Raising one quality by `delta >= 0` never lowers the score.
pub fn check_monotone_quality<T: Real>(
    pop: &[Evaluation<T>],
    index: usize,
    delta: T,
    samples: &[Vec<T>],
    kernel: &KernelParams<T>,
    region: &IntegrationBox<T>,
) -> Result<PropertyReport> {
    if index >= pop.len() {
        return Err(invalid(format!("index {index} is out of range")));
    }
    if !(delta >= T::zero()) {
        return Err(invalid("delta must be non-negative"));
    }
    let before = mc_value(pop, kernel, samples, region)?;
    let mut raised = pop.to_vec();
    raised[index].quality = raised[index].quality + delta;
    let after = mc_value(&raised, kernel, samples, region)?;
    let margin = (after - before).as_f64();
    Ok(PropertyReport::single("monotone_quality", margin, after >= before))
}

/// Monte Carlo marginal gain of `extra` over `base`, summed pointwise.
pub fn marginal_gain_mc<T: Real>(
    base: &[Evaluation<T>],
    extra: &Evaluation<T>,
    samples: &[Vec<T>],
    kernel: &KernelParams<T>,
    region: &IntegrationBox<T>,
) -> Result<T> {
    let mut with = base.to_vec();
    with.push(extra.clone());
    region.check_margin(&with, kernel.sigma())?;
    let after = behavior_values(&with, kernel, samples)?;
    let before = if base.is_empty() {
        vec![T::zero(); samples.len()]
    } else {
        behavior_values(base, kernel, samples)?
    };
    let gains: Vec<T> = after.iter().zip(&before).map(|(&a, &b)| a - b).collect();
    Ok(region.volume() * pairwise_sum(&gains) / T::from_usize_lossy(samples.len().max(1)))
}

/// Diminishing returns: the gain of `extra` on `U` is at least its gain on `V` for `U` a subset of `V`.
pub fn check_submodular<T: Real>(
    ground: &[Evaluation<T>],
    u: &[usize],
    v: &[usize],
    extra: &Evaluation<T>,
    samples: &[Vec<T>],
    kernel: &KernelParams<T>,
    region: &IntegrationBox<T>,
) -> Result<PropertyReport> {
    if let Some(&i) = u.iter().chain(v).find(|&&i| i >= ground.len()) {
        return Err(invalid(format!("index {i} is out of range")));
    }
    if let Some(&i) = u.iter().find(|i| !v.contains(i)) {
        return Err(invalid(format!("U is not a subset of V (index {i})")));
    }
    if v.iter().any(|&i| ground[i] == *extra) {
        return Err(invalid("the extra solution is already in V"));
    }
    let pick = |ix: &[usize]| ix.iter().map(|&i| ground[i].clone()).collect::<Vec<_>>();
    let gain_u = marginal_gain_mc(&pick(u), extra, samples, kernel, region)?;
    let gain_v = marginal_gain_mc(&pick(v), extra, samples, kernel, region)?;
    let margin = (gain_u - gain_v).as_f64();
    Ok(PropertyReport::single("submodular", margin, gain_u >= gain_v))
}

/// Grid size for quadrature with cells of at most `sigma / 5` on the widest axis.
fn grid_for<T: Real>(region: &IntegrationBox<T>, sigma: T) -> usize {
    let widest = region
        .high
        .iter()
        .zip(&region.low)
        .map(|(&h, &l)| (h - l).as_f64())
        .fold(0.0, f64::max);
    ((widest / (sigma.as_f64() / 5.0)).ceil() as usize).max(16)
}

fn quadrature_score<T: Real>(evals: &[Evaluation<T>], sigma: T) -> Result<(T, T)> {
    let kernel = KernelParams::from_sigma(sigma)?;
    let region = IntegrationBox::around(evals, sigma)?;
    let g = grid_for(&region, sigma);
    let fine = soft_qd_score_quadrature(evals, &kernel, g, &region)?.value;
    let coarse = soft_qd_score_quadrature(evals, &kernel, g / 2, &region)?.value;
    Ok((fine, (fine - coarse).abs()))
}

/// Scaled score `S(sigma) / (2 pi sigma^2)^(d/2)` must approach the quality sum as sigma shrinks.
///
/// `sigmas` must decrease and end at or below a tenth of the closest descriptor
/// distance; the last value must land within 1% of the sum and each step may
/// not move away from it by more than the quadrature error.
pub fn check_limit_equivalence<T: Real>(pop: &[Evaluation<T>], sigmas: &[T]) -> Result<PropertyReport> {
    let d = pop
        .first()
        .map(|e| e.descriptor.len())
        .ok_or_else(|| invalid("population is empty"))?;
    if d > 2 {
        return Err(invalid(format!("limit check needs d <= 2, got {d}")));
    }
    let mut r2 = T::infinity();
    for i in 0..pop.len() {
        for j in i + 1..pop.len() {
            r2 = r2.min(sq_dist(&pop[i].descriptor, &pop[j].descriptor));
        }
    }
    if r2 == T::zero() {
        return Err(invalid("descriptors must be distinct"));
    }
    let last = *sigmas.last().ok_or_else(|| invalid("sigma sequence is empty"))?;
    if sigmas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("sigma sequence must be strictly decreasing"));
    }
    if r2.is_finite() && last > r2.sqrt() / T::lit(10.0) {
        return Err(invalid(
            "final sigma must be at most a tenth of the closest descriptor distance",
        ));
    }
    let target: f64 = pop.iter().map(|e| e.quality.max(T::zero()).as_f64()).sum();
    let mut prev_dev = f64::INFINITY;
    let mut margin = f64::INFINITY;
    let mut ok = true;
    for &s in sigmas {
        let (score, err) = quadrature_score(pop, s)?;
        let mass = KernelParams::from_sigma(s)?.gaussian_mass(d);
        let dev = (target - (score / mass).as_f64()).abs();
        let slack = prev_dev + (err / mass).as_f64() + 1e-12 * target - dev;
        margin = margin.min(slack);
        ok &= slack >= 0.0;
        prev_dev = dev;
    }
    let final_slack = 0.01 * target - prev_dev;
    margin = margin.min(final_slack);
    ok &= final_slack >= 0.0;
    Ok(PropertyReport::single("limit_equivalence", margin, ok))
}

/// Sandwich `lower <= S` and `S - lower <= eps1 + eps2` on random populations
/// (`N <= 6`, `d` in {1, 2}, `sigma` in `[0.1, 1]`), with `S` by quadrature.
pub fn check_bound_sandwich(trials: usize, seed: u64) -> Result<PropertyReport> {
    let mut rng = rng::derived(seed, 5);
    let mut report = PropertyReport::empty("bound_sandwich");
    for _ in 0..trials {
        let d = rng.random_range(1..=2usize);
        let n = rng.random_range(1..=6usize);
        let sigma: f64 = rng.random_range(0.1..=1.0);
        let pop = random_population(&mut rng, n, d);
        report.absorb(&sandwich_once(&pop, sigma)?);
    }
    Ok(report)
}

/// One sandwich trial on a given population; qualities must be non-negative.
pub fn sandwich_once<T: Real>(pop: &[Evaluation<T>], sigma: T) -> Result<PropertyReport> {
    let d = pop
        .first()
        .map(|e| e.descriptor.len())
        .ok_or_else(|| invalid("population is empty"))?;
    let (score, err) = quadrature_score(pop, sigma)?;
    let lower = lower_bound_full(pop, sigma, d)?;
    let bounds = error_bounds(pop, sigma, d)?;
    let tol = err + T::lit(1e-10) * score.abs().max(T::one());
    let below = score + tol - lower;
    let gap = bounds.eps1 + bounds.eps2 + tol - (score - lower);
    let margin = below.min(gap).as_f64();
    Ok(PropertyReport::single(
        "bound_sandwich",
        margin,
        below >= T::zero() && gap >= T::zero(),
    ))
}

fn random_population<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Vec<Evaluation<f64>> {
    (0..n)
        .map(|_| Evaluation::new(rng.random::<f64>(), (0..d).map(|_| rng.random::<f64>()).collect()))
        .collect()
}

/// Random population whose descriptors are at least `min_dist` apart.
fn spread_population<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, min_dist: f64) -> Vec<Evaluation<f64>> {
    loop {
        let pop = random_population(rng, n, d);
        let ok =
            (0..n).all(|i| (i + 1..n).all(|j| sq_dist(&pop[i].descriptor, &pop[j].descriptor) >= min_dist * min_dist));
        if ok {
            return pop
                .into_iter()
                .map(|e| Evaluation::new(0.1 + e.quality, e.descriptor))
                .collect();
        }
    }
}

/// Trial counts for [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteCounts {
    pub sandwich: usize,
    pub monotone_add: usize,
    pub monotone_quality: usize,
    pub submodular: usize,
    pub limit: usize,
    /// Shared Monte Carlo samples per trial.
    pub samples: usize,
}

impl Default for SuiteCounts {
    fn default() -> Self {
        Self {
            sandwich: 100,
            monotone_add: 200,
            monotone_quality: 200,
            submodular: 500,
            limit: 20,
            samples: 4096,
        }
    }
}

fn shared_setup<R: Rng + ?Sized>(
    rng: &mut R,
    involved: &[Evaluation<f64>],
    samples: usize,
) -> Result<(KernelParams<f64>, IntegrationBox<f64>, Vec<Vec<f64>>)> {
    let sigma = rng.random_range(0.05..=0.5);
    let kernel = KernelParams::from_sigma(sigma)?;
    let region = IntegrationBox::around(involved, sigma)?;
    let pts = region.sample(samples, rng);
    Ok((kernel, region, pts))
}

/// Runs every property check with randomly generated inputs.
pub fn run_suite(seed: u64, counts: &SuiteCounts) -> Result<Vec<PropertyReport>> {
    let mut out = vec![check_bound_sandwich(counts.sandwich, seed)?];

    let mut rng = rng::derived(seed, 1);
    let mut rep = PropertyReport::empty("monotone_add");
    for _ in 0..counts.monotone_add {
        let n = rng.random_range(1..=6usize);
        let pop = random_population(&mut rng, n, 2);
        let extra = random_population(&mut rng, 1, 2).remove(0);
        let mut all = pop.clone();
        all.push(extra.clone());
        let (kernel, region, pts) = shared_setup(&mut rng, &all, counts.samples)?;
        rep.absorb(&check_monotone_add(&pop, &extra, &pts, &kernel, &region)?);
    }
    out.push(rep);

    let mut rng = rng::derived(seed, 2);
    let mut rep = PropertyReport::empty("monotone_quality");
    for _ in 0..counts.monotone_quality {
        let n = rng.random_range(1..=6usize);
        let pop = random_population(&mut rng, n, 2);
        let index = rng.random_range(0..pop.len());
        let delta = rng.random_range(0.0..1.0);
        let (kernel, region, pts) = shared_setup(&mut rng, &pop, counts.samples)?;
        rep.absorb(&check_monotone_quality(&pop, index, delta, &pts, &kernel, &region)?);
    }
    out.push(rep);

    let mut rng = rng::derived(seed, 3);
    let mut rep = PropertyReport::empty("submodular");
    for _ in 0..counts.submodular {
        let size = rng.random_range(1..=8usize);
        let ground = random_population(&mut rng, size, 2);
        let v: Vec<usize> = (0..size).filter(|_| rng.random::<bool>()).collect();
        let u: Vec<usize> = v.iter().copied().filter(|_| rng.random::<bool>()).collect();
        let extra = random_population(&mut rng, 1, 2).remove(0);
        let mut all = ground.clone();
        all.push(extra.clone());
        let (kernel, region, pts) = shared_setup(&mut rng, &all, counts.samples)?;
        rep.absorb(&check_submodular(&ground, &u, &v, &extra, &pts, &kernel, &region)?);
    }
    out.push(rep);

    let mut rng = rng::derived(seed, 4);
    let mut rep = PropertyReport::empty("limit_equivalence");
    for _ in 0..counts.limit {
        let d = rng.random_range(1..=2usize);
        let n = rng.random_range(1..=4usize);
        let pop = spread_population(&mut rng, n, d, 0.1);
        let mut r = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                r = r.min(sq_dist(&pop[i].descriptor, &pop[j].descriptor).sqrt());
            }
        }
        let r = if r.is_finite() { r } else { 0.5 };
        let sigmas = [r, r / 3.0, r / 10.0];
        rep.absorb(&check_limit_equivalence(&pop, &sigmas)?);
    }
    out.push(rep);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(q: f64, b: &[f64]) -> Evaluation<f64> {
        Evaluation::new(q, b.to_vec())
    }

    #[test]
    fn report_absorb() {
        let mut a = PropertyReport::single("x", 0.5, true);
        a.absorb(&PropertyReport::single("x", -0.1, false));
        assert_eq!((a.trials, a.failures, a.worst_margin), (2, 1, -0.1));
        assert!(!a.passed());
    }

    #[test]
    fn coincident_equal_pair_is_tight() {
        let pop = [ev(1.0, &[0.3, 0.3]), ev(1.0, &[0.3, 0.3])];
        let r = sandwich_once(&pop, 0.2).unwrap();
        assert!(r.passed());
        let lower = lower_bound_full(&pop, 0.2, 2).unwrap();
        let (s, _) = quadrature_score(&pop, 0.2).unwrap();
        assert!((s - lower).abs() < 1e-6 * s);
    }

    #[test]
    fn limit_rejects_coincident_descriptors() {
        let pop = [ev(1.0, &[0.3]), ev(2.0, &[0.3])];
        assert!(check_limit_equivalence(&pop, &[0.01]).is_err());
    }
}
