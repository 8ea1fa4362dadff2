//! Populations, evaluations, and the problem contract.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scalar::Real;

/// A point in solution space.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub params: Vec<T>,
}

impl<T: Real> Solution<T> {
    pub fn new(params: Vec<T>) -> Self {
        Self { params }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|x| x.is_finite())
    }
}

impl<T> From<Vec<T>> for Solution<T> {
    fn from(params: Vec<T>) -> Self {
        Self { params }
    }
}

/// Quality and normalized behavior descriptor of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub quality: T,
    pub descriptor: Vec<T>,
}

impl<T: Real> Evaluation<T> {
    pub fn new(quality: T, descriptor: Vec<T>) -> Self {
        Self { quality, descriptor }
    }

    pub fn is_finite(&self) -> bool {
        self.quality.is_finite() && self.descriptor.iter().all(|x| x.is_finite())
    }
}

/// Evaluation plus first derivatives with respect to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWithGrads<T> {
    pub eval: Evaluation<T>,
    /// Gradient of the quality, length `solution_dim`.
    pub grad_quality: Vec<T>,
    /// Row-major `behavior_dim x solution_dim` Jacobian of the descriptor.
    pub jac_descriptor: Vec<T>,
}

impl<T: Real> EvalWithGrads<T> {
    pub fn jac_row(&self, k: usize) -> &[T] {
        let p = self.grad_quality.len();
        &self.jac_descriptor[k * p..(k + 1) * p]
    }
}

/// A differentiable QD problem: quality `f`, descriptor `desc`, and their derivatives.
///
/// Descriptors are returned already normalized to `[0, 1]^d`. `eval` and
/// `eval_with_grads` must agree on quality and descriptor for identical input.
pub trait Problem<T: Real>: Send + Sync {
    fn solution_dim(&self) -> usize;
    fn behavior_dim(&self) -> usize;
    fn eval(&self, params: &[T]) -> Evaluation<T>;
    fn eval_with_grads(&self, params: &[T]) -> EvalWithGrads<T>;
}

impl<T: Real, P: Problem<T> + ?Sized> Problem<T> for &P {
    fn solution_dim(&self) -> usize {
        (**self).solution_dim()
    }
    fn behavior_dim(&self) -> usize {
        (**self).behavior_dim()
    }
    fn eval(&self, params: &[T]) -> Evaluation<T> {
        (**self).eval(params)
    }
    fn eval_with_grads(&self, params: &[T]) -> EvalWithGrads<T> {
        (**self).eval_with_grads(params)
    }
}

impl<T: Real, P: Problem<T> + ?Sized> Problem<T> for Box<P> {
    fn solution_dim(&self) -> usize {
        (**self).solution_dim()
    }
    fn behavior_dim(&self) -> usize {
        (**self).behavior_dim()
    }
    fn eval(&self, params: &[T]) -> Evaluation<T> {
        (**self).eval(params)
    }
    fn eval_with_grads(&self, params: &[T]) -> EvalWithGrads<T> {
        (**self).eval_with_grads(params)
    }
}

/// Soft QD kernel width `sigma` together with the SQUAD bandwidth `gamma_sq = 8 sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T> {
    sigma: T,
    gamma_sq: T,
}

impl<T: Real> KernelParams<T> {
    pub fn from_sigma(sigma: T) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive and finite, got {sigma}")));
        }
        Ok(Self {
            sigma,
            gamma_sq: T::lit(8.0) * sigma * sigma,
        })
    }

    pub fn from_gamma_sq(gamma_sq: T) -> Result<Self> {
        if !(gamma_sq > T::zero() && gamma_sq.is_finite()) {
            return Err(invalid(format!("gamma_sq must be positive and finite, got {gamma_sq}")));
        }
        Ok(Self {
            sigma: (gamma_sq / T::lit(8.0)).sqrt(),
            gamma_sq,
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn gamma_sq(&self) -> T {
        self.gamma_sq
    }

    /// `(2 pi sigma^2)^(d/2)`, the mass of one unnormalized Gaussian kernel.
    pub fn gaussian_mass(&self, d: usize) -> T {
        let two_pi_s2 = T::lit(2.0) * T::PI() * self.sigma * self.sigma;
        two_pi_s2.powf(T::from_usize_lossy(d) / T::lit(2.0))
    }
}

/// Solutions with index-aligned evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    solutions: Vec<Solution<T>>,
    evaluations: Vec<Evaluation<T>>,
    solution_dim: usize,
    behavior_dim: usize,
}

impl<T: Real> Population<T> {
    /// Assembles a population from already-evaluated parts.
    pub fn from_parts(solutions: Vec<Solution<T>>, evaluations: Vec<Evaluation<T>>) -> Result<Self> {
        if solutions.is_empty() {
            return Err(invalid("population must contain at least one solution"));
        }
        if solutions.len() != evaluations.len() {
            return Err(invalid(format!(
                "{} solutions but {} evaluations",
                solutions.len(),
                evaluations.len()
            )));
        }
        let solution_dim = solutions[0].dim();
        let behavior_dim = evaluations[0].descriptor.len();
        for (i, (s, e)) in solutions.iter().zip(&evaluations).enumerate() {
            if s.dim() != solution_dim {
                return Err(invalid(format!(
                    "solution {i} has dimension {}, expected {solution_dim}",
                    s.dim()
                )));
            }
            if e.descriptor.len() != behavior_dim {
                return Err(invalid(format!(
                    "descriptor {i} has dimension {}, expected {behavior_dim}",
                    e.descriptor.len()
                )));
            }
            if !s.is_finite() {
                return Err(invalid(format!("solution {i} has non-finite parameters")));
            }
            if !e.is_finite() {
                return Err(Error::Evaluation {
                    index: i,
                    reason: "non-finite evaluation".into(),
                });
            }
        }
        Ok(Self {
            solutions,
            evaluations,
            solution_dim,
            behavior_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn solution_dim(&self) -> usize {
        self.solution_dim
    }

    pub fn behavior_dim(&self) -> usize {
        self.behavior_dim
    }

    pub fn solutions(&self) -> &[Solution<T>] {
        &self.solutions
    }

    pub fn evaluations(&self) -> &[Evaluation<T>] {
        &self.evaluations
    }

    pub fn params(&self, i: usize) -> &[T] {
        &self.solutions[i].params
    }

    pub fn qualities(&self) -> Vec<T> {
        self.evaluations.iter().map(|e| e.quality).collect()
    }

    pub fn descriptors(&self) -> Vec<Vec<T>> {
        self.evaluations.iter().map(|e| e.descriptor.clone()).collect()
    }

    pub fn mean_quality(&self) -> T {
        self.evaluations.iter().map(|e| e.quality).sum::<T>() / T::from_usize_lossy(self.len())
    }

    pub fn max_quality(&self) -> T {
        self.evaluations
            .iter()
            .map(|e| e.quality)
            .fold(T::neg_infinity(), T::max)
    }

    /// Replaces solution `i` and its cached evaluation together.
    pub(crate) fn replace(&mut self, i: usize, params: Vec<T>, eval: Evaluation<T>) {
        debug_assert_eq!(params.len(), self.solution_dim);
        debug_assert_eq!(eval.descriptor.len(), self.behavior_dim);
        self.solutions[i].params = params;
        self.evaluations[i] = eval;
    }

    pub fn to_record(&self) -> PopulationRecord {
        PopulationRecord {
            solution_dim: self.solution_dim,
            behavior_dim: self.behavior_dim,
            params: self
                .solutions
                .iter()
                .map(|s| s.params.iter().map(|x| x.as_f64()).collect())
                .collect(),
            qualities: self.evaluations.iter().map(|e| e.quality.as_f64()).collect(),
            descriptors: self
                .evaluations
                .iter()
                .map(|e| e.descriptor.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }

    pub fn from_record(rec: &PopulationRecord) -> Result<Self> {
        let solutions = rec
            .params
            .iter()
            .map(|p| Solution::new(p.iter().map(|&x| T::lit(x)).collect()))
            .collect();
        let evaluations = rec
            .qualities
            .iter()
            .zip(&rec.descriptors)
            .map(|(&q, b)| Evaluation::new(T::lit(q), b.iter().map(|&x| T::lit(x)).collect()))
            .collect();
        let pop = Self::from_parts(solutions, evaluations)?;
        if pop.solution_dim != rec.solution_dim || pop.behavior_dim != rec.behavior_dim {
            return Err(invalid("population record dimensions disagree with its contents"));
        }
        Ok(pop)
    }
}

/// JSON shape of a population. `serde_json` writes shortest round-trip
/// decimals, so doubles survive a write/read cycle bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub solution_dim: usize,
    pub behavior_dim: usize,
    pub params: Vec<Vec<f64>>,
    pub qualities: Vec<f64>,
    pub descriptors: Vec<Vec<f64>>,
}

impl PopulationRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("population record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("population JSON: {e}")))
    }
}

pub(crate) fn checked_eval<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    index: usize,
    params: &[T],
) -> Result<Evaluation<T>> {
    let eval = problem.eval(params);
    if eval.descriptor.len() != problem.behavior_dim() {
        return Err(Error::Evaluation {
            index,
            reason: format!(
                "descriptor has {} entries, expected {}",
                eval.descriptor.len(),
                problem.behavior_dim()
            ),
        });
    }
    if !eval.is_finite() {
        return Err(Error::Evaluation {
            index,
            reason: "non-finite quality or descriptor".into(),
        });
    }
    Ok(eval)
}

/// Evaluates every solution and returns the index-aligned population.
pub fn evaluate_population<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    solutions: Vec<Solution<T>>,
) -> Result<Population<T>> {
    if solutions.is_empty() {
        return Err(invalid("cannot evaluate an empty set of solutions"));
    }
    let dim = problem.solution_dim();
    let mut evaluations = Vec::with_capacity(solutions.len());
    for (i, s) in solutions.iter().enumerate() {
        if s.dim() != dim {
            return Err(invalid(format!(
                "solution {i} has dimension {}, problem expects {dim}",
                s.dim()
            )));
        }
        if !s.is_finite() {
            return Err(invalid(format!("solution {i} has non-finite parameters")));
        }
        evaluations.push(checked_eval(problem, i, &s.params)?);
    }
    Population::from_parts(solutions, evaluations)
}

/// Draws `n` solutions uniformly from `[low, high]^P` with a ChaCha8 stream seeded by `seed`.
pub fn seeded_random_population<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    n: usize,
    seed: u64,
    init_box: (T, T),
) -> Result<Population<T>> {
    if n == 0 {
        return Err(invalid("population size must be at least 1"));
    }
    let (low, high) = init_box;
    if !(low <= high) || !low.is_finite() || !high.is_finite() {
        return Err(invalid(format!("invalid init box [{low}, {high}]")));
    }
    let mut rng = rng::seeded(seed);
    let width = high - low;
    let solutions = (0..n)
        .map(|_| {
            let params = (0..problem.solution_dim())
                .map(|_| {
                    let u: f64 = rng.random();
                    // u < 1, but rounding of low + width*u can land past high for wide boxes
                    (low + width * T::lit(u)).min(high)
                })
                .collect();
            Solution::new(params)
        })
        .collect();
    evaluate_population(problem, solutions)
}

pub(crate) fn checked_eval_grads<T: Real, P: Problem<T> + ?Sized>(
    problem: &P,
    index: usize,
    params: &[T],
) -> Result<EvalWithGrads<T>> {
    let eg = problem.eval_with_grads(params);
    let (p, d) = (problem.solution_dim(), problem.behavior_dim());
    if eg.eval.descriptor.len() != d || eg.grad_quality.len() != p || eg.jac_descriptor.len() != d * p {
        return Err(Error::Evaluation {
            index,
            reason: "derivative shapes do not match the problem".into(),
        });
    }
    if !eg.eval.is_finite() {
        return Err(Error::Evaluation {
            index,
            reason: "non-finite quality or descriptor".into(),
        });
    }
    Ok(eg)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Sum2;

    impl Problem<f64> for Sum2 {
        fn solution_dim(&self) -> usize {
            2
        }
        fn behavior_dim(&self) -> usize {
            1
        }
        fn eval(&self, p: &[f64]) -> Evaluation<f64> {
            Evaluation::new(p[0] + p[1], vec![if p[0].is_nan() { f64::NAN } else { 0.5 }])
        }
        fn eval_with_grads(&self, p: &[f64]) -> EvalWithGrads<f64> {
            EvalWithGrads {
                eval: self.eval(p),
                grad_quality: vec![1.0, 1.0],
                jac_descriptor: vec![0.0, 0.0],
            }
        }
    }

    struct Broken;

    impl Problem<f64> for Broken {
        fn solution_dim(&self) -> usize {
            1
        }
        fn behavior_dim(&self) -> usize {
            1
        }
        fn eval(&self, p: &[f64]) -> Evaluation<f64> {
            Evaluation::new(if p[0] > 0.0 { f64::INFINITY } else { 0.0 }, vec![0.5])
        }
        fn eval_with_grads(&self, p: &[f64]) -> EvalWithGrads<f64> {
            EvalWithGrads {
                eval: self.eval(p),
                grad_quality: vec![0.0],
                jac_descriptor: vec![0.0],
            }
        }
    }

    #[test]
    fn kernel_params_relation() {
        let k = KernelParams::from_sigma(0.5).unwrap();
        assert_eq!(k.gamma_sq(), 2.0);
        let k = KernelParams::from_gamma_sq(0.1).unwrap();
        assert!((k.sigma() - (0.1f64 / 8.0).sqrt()).abs() < 1e-15);
        assert!(KernelParams::from_sigma(0.0).is_err());
        assert!(KernelParams::<f64>::from_gamma_sq(-1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = evaluate_population(&Sum2, vec![Solution::new(vec![1.0, 2.0, 3.0])]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn non_finite_evaluation_names_index() {
        let sols = vec![
            Solution::new(vec![-1.0]),
            Solution::new(vec![0.0]),
            Solution::new(vec![1.0]),
        ];
        let err = evaluate_population(&Broken, sols).unwrap_err();
        assert_eq!(
            err,
            Error::Evaluation {
                index: 2,
                reason: "non-finite quality or descriptor".into()
            }
        );
    }

    #[test]
    fn random_population_is_deterministic_and_boxed() {
        let a = seeded_random_population(&Sum2, 3, 7, (-1.0, 1.0)).unwrap();
        let b = seeded_random_population(&Sum2, 3, 7, (-1.0, 1.0)).unwrap();
        assert_eq!(a, b);
        let c = seeded_random_population(&Sum2, 1024, 1, (-1.0, 1.0)).unwrap();
        assert!(c
            .solutions()
            .iter()
            .flat_map(|s| &s.params)
            .all(|&x| (-1.0..=1.0).contains(&x)));
        let z = seeded_random_population(&Sum2, 100, 2, (0.0, 0.0)).unwrap();
        assert!(z.solutions().iter().flat_map(|s| &s.params).all(|&x| x == 0.0));
        assert!(seeded_random_population(&Sum2, 0, 2, (0.0, 1.0)).is_err());
        assert!(seeded_random_population(&Sum2, 4, 2, (1.0, 0.0)).is_err());
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let pop = seeded_random_population(&Sum2, 16, 11, (-3.3, 7.1)).unwrap();
        let json = pop.to_record().to_json();
        let back = Population::<f64>::from_record(&PopulationRecord::from_json(&json).unwrap()).unwrap();
        for (a, b) in pop.solutions().iter().zip(back.solutions()) {
            for (x, y) in a.params.iter().zip(&b.params) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(pop, back);
    }
}
