//! Concrete problems: the Linear Projection benchmark over a shifted Rastrigin
//! objective, and a 2-d Gaussian hill used by the quadrature-backed checks.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::population::{EvalWithGrads, Evaluation, Problem};
use crate::scalar::Real;

pub const LP_BOUND: f64 = 5.12;
pub const LP_OFFSET: f64 = 2.048;
pub const LP_SOLUTION_DIM: usize = 1024;

/// How per-chunk clipped values are combined into a descriptor coordinate.
///
/// Both variants are rescaled by their own attainable range onto `[0, 1]`,
/// which makes them agree up to rounding; the sum form is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescriptorScaling {
    /// Mean of clipped values in each chunk, mapped by `(raw + 5.12) / 10.24`.
    #[default]
    ChunkMean,
    /// `1/d` times the chunk sum, mapped by its range `+-5.12 n / d^2`.
    ScaledChunkSum,
}

/// Rastrigin term `t^2 - 10 cos(2 pi t) + 10` for one coordinate.
#[inline]
fn rastrigin_term(t: f64) -> f64 {
    t * t - 10.0 * (2.0 * std::f64::consts::PI * t).cos() + 10.0
}

/// Maximum of the shifted Rastrigin sum over `[-bound, bound]^n`.
///
/// The function is separable, so this is `n` times the per-coordinate maximum,
/// found by a 10^6-point grid scan of `[-bound - offset, bound - offset]`
/// followed by golden-section refinement around the best grid point.
pub fn rastrigin_max(n: usize, offset: f64, bound: f64) -> f64 {
    let (lo, hi) = (-bound - offset, bound - offset);
    const GRID: usize = 1_000_000;
    let step = (hi - lo) / GRID as f64;
    let (mut best_t, mut best) = (lo, rastrigin_term(lo));
    for i in 1..=GRID {
        let t = lo + step * i as f64;
        let v = rastrigin_term(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // golden-section search for the maximum within one grid step either side
    let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if rastrigin_term(c) > rastrigin_term(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = rastrigin_term(0.5 * (a + b));
    n as f64 * best.max(refined)
}

/// Linear Projection benchmark: shifted Rastrigin quality, clipped chunk-mean descriptors.
#[derive(Debug, Clone)]
pub struct LinearProjection<T> {
    solution_dim: usize,
    behavior_dim: usize,
    bound: T,
    offset: T,
    rastrigin_max: T,
    scaling: DescriptorScaling,
}

impl<T: Real> LinearProjection<T> {
    pub fn new(solution_dim: usize, behavior_dim: usize) -> Result<Self> {
        Self::with_scaling(solution_dim, behavior_dim, DescriptorScaling::ChunkMean)
    }

    pub fn with_scaling(solution_dim: usize, behavior_dim: usize, scaling: DescriptorScaling) -> Result<Self> {
        if behavior_dim == 0 || solution_dim == 0 || solution_dim % behavior_dim != 0 {
            return Err(invalid(format!(
                "solution dimension {solution_dim} must be a positive multiple of behavior dimension {behavior_dim}"
            )));
        }
        Ok(Self {
            solution_dim,
            behavior_dim,
            bound: T::lit(LP_BOUND),
            offset: T::lit(LP_OFFSET),
            rastrigin_max: T::lit(rastrigin_max(solution_dim, LP_OFFSET, LP_BOUND)),
            scaling,
        })
    }

    pub fn rastrigin_max(&self) -> T {
        self.rastrigin_max
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// Quality `100 (R_max - R(x - offset)) / R_max` and its gradient.
    pub fn quality(&self, x: &[T]) -> (T, Vec<T>) {
        let two_pi = T::lit(2.0) * T::PI();
        let ten = T::lit(10.0);
        let scale = T::lit(100.0) / self.rastrigin_max;
        let mut r = T::zero();
        let grad = x
            .iter()
            .map(|&xi| {
                let t = xi - self.offset;
                let (s, c) = (two_pi * t).sin_cos();
                r = r + t * t - ten * c + ten;
                -scale * (T::lit(2.0) * t + ten * two_pi * s)
            })
            .collect();
        (scale * (self.rastrigin_max - r), grad)
    }

    fn clip(&self, x: T) -> (T, T) {
        if x.abs() <= self.bound {
            (x, T::one())
        } else {
            (self.bound / x, -self.bound / (x * x))
        }
    }

    /// Quality alone, skipping the gradient.
    pub fn quality_value(&self, x: &[T]) -> T {
        let two_pi = T::lit(2.0) * T::PI();
        let ten = T::lit(10.0);
        let r = x.iter().fold(T::zero(), |r, &xi| {
            let t = xi - self.offset;
            r + t * t - ten * (two_pi * t).cos() + ten
        });
        T::lit(100.0) / self.rastrigin_max * (self.rastrigin_max - r)
    }

    /// Normalized descriptor in `[0, 1]^d` and its row-major `d x n` Jacobian.
    pub fn descriptor(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let mut jac = vec![T::zero(); self.behavior_dim * self.solution_dim];
        let desc = self.descriptor_into(x, Some(&mut jac));
        (desc, jac)
    }

    fn descriptor_into(&self, x: &[T], mut jac: Option<&mut Vec<T>>) -> Vec<T> {
        let d = self.behavior_dim;
        let n = self.solution_dim;
        let chunk = n / d;
        let (offset, scale) = match self.scaling {
            DescriptorScaling::ChunkMean => {
                let per = T::one() / T::from_usize_lossy(chunk);
                (self.bound, per / (T::lit(2.0) * self.bound))
            }
            DescriptorScaling::ScaledChunkSum => {
                let dd = T::from_usize_lossy(d);
                let range = self.bound * T::from_usize_lossy(chunk) / dd;
                (range, T::one() / (dd * T::lit(2.0) * range))
            }
        };
        let mut desc = Vec::with_capacity(d);
        for k in 0..d {
            // Neumaier-compensated sum keeps the chunk mean exact for constant chunks
            let (mut sum, mut comp) = (T::zero(), T::zero());
            for i in k * chunk..(k + 1) * chunk {
                let (c, dc) = self.clip(x[i]);
                let t = sum + c;
                comp = comp
                    + if sum.abs() >= c.abs() {
                        (sum - t) + c
                    } else {
                        (c - t) + sum
                    };
                sum = t;
                if let Some(j) = jac.as_deref_mut() {
                    j[k * n + i] = dc * scale;
                }
            }
            let sum = sum + comp;
            let raw = match self.scaling {
                DescriptorScaling::ChunkMean => sum / T::from_usize_lossy(chunk),
                DescriptorScaling::ScaledChunkSum => sum / T::from_usize_lossy(d),
            };
            let b = match self.scaling {
                DescriptorScaling::ChunkMean => (raw + offset) / (T::lit(2.0) * self.bound),
                DescriptorScaling::ScaledChunkSum => (raw + offset) / (T::lit(2.0) * offset),
            };
            desc.push(b);
        }
        desc
    }
}

impl<T: Real> Problem<T> for LinearProjection<T> {
    fn solution_dim(&self) -> usize {
        self.solution_dim
    }

    fn behavior_dim(&self) -> usize {
        self.behavior_dim
    }

    fn eval(&self, params: &[T]) -> Evaluation<T> {
        Evaluation::new(self.quality_value(params), self.descriptor_into(params, None))
    }

    fn eval_with_grads(&self, params: &[T]) -> EvalWithGrads<T> {
        let (q, grad_quality) = self.quality(params);
        let (b, jac_descriptor) = self.descriptor(params);
        EvalWithGrads {
            eval: Evaluation::new(q, b),
            grad_quality,
            jac_descriptor,
        }
    }
}

/// Smooth 2-d test problem: quality `100 exp(-|x - c|^2 / 2)`, descriptor the
/// affine map of `x` from `[-5, 5]^2` onto `[0, 1]^2`, clamped at the faces.
#[derive(Debug, Clone)]
pub struct GaussianHill<T> {
    center: [T; 2],
}

const HILL_HALF_WIDTH: f64 = 5.0;

impl<T: Real> GaussianHill<T> {
    pub fn new(center: [T; 2]) -> Self {
        Self { center }
    }

    pub fn center(&self) -> [T; 2] {
        self.center
    }

    fn descriptor_axis(x: T) -> (T, T) {
        let w = T::lit(2.0 * HILL_HALF_WIDTH);
        let b = (x + T::lit(HILL_HALF_WIDTH)) / w;
        if b < T::zero() {
            (T::zero(), T::zero())
        } else if b > T::one() {
            (T::one(), T::zero())
        } else {
            (b, T::one() / w)
        }
    }
}

impl<T: Real> Default for GaussianHill<T> {
    fn default() -> Self {
        Self::new([T::lit(1.0), T::lit(-0.5)])
    }
}

impl<T: Real> Problem<T> for GaussianHill<T> {
    fn solution_dim(&self) -> usize {
        2
    }

    fn behavior_dim(&self) -> usize {
        2
    }

    fn eval(&self, params: &[T]) -> Evaluation<T> {
        self.eval_with_grads(params).eval
    }

    fn eval_with_grads(&self, params: &[T]) -> EvalWithGrads<T> {
        let dx = [params[0] - self.center[0], params[1] - self.center[1]];
        let q = T::lit(100.0) * (-(dx[0] * dx[0] + dx[1] * dx[1]) / T::lit(2.0)).exp();
        let (b0, j0) = Self::descriptor_axis(params[0]);
        let (b1, j1) = Self::descriptor_axis(params[1]);
        EvalWithGrads {
            eval: Evaluation::new(q, vec![b0, b1]),
            grad_quality: vec![-q * dx[0], -q * dx[1]],
            jac_descriptor: vec![j0, T::zero(), T::zero(), j1],
        }
    }
}

/// Domains selectable by name from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    LinearProjection { behavior_dim: usize },
    Hill,
}

impl Domain {
    pub fn behavior_dim(&self) -> usize {
        match *self {
            Domain::LinearProjection { behavior_dim } => behavior_dim,
            Domain::Hill => 2,
        }
    }

    pub fn solution_dim(&self) -> usize {
        match self {
            Domain::LinearProjection { .. } => LP_SOLUTION_DIM,
            Domain::Hill => 2,
        }
    }

    /// Box the initial population is drawn from: the LP search domain, or a
    /// square around the hill.
    pub fn init_box(&self) -> (f64, f64) {
        match self {
            Domain::LinearProjection { .. } => (-LP_BOUND, LP_BOUND),
            Domain::Hill => (-3.0, 3.0),
        }
    }

    pub fn build<T: Real>(&self, scaling: DescriptorScaling) -> Result<Box<dyn Problem<T>>> {
        Ok(match *self {
            Domain::LinearProjection { behavior_dim } => Box::new(LinearProjection::<T>::with_scaling(
                LP_SOLUTION_DIM,
                behavior_dim,
                scaling,
            )?),
            Domain::Hill => Box::new(GaussianHill::<T>::default()),
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp-4" => Ok(Domain::LinearProjection { behavior_dim: 4 }),
            "lp-8" => Ok(Domain::LinearProjection { behavior_dim: 8 }),
            "lp-16" => Ok(Domain::LinearProjection { behavior_dim: 16 }),
            "hill" => Ok(Domain::Hill),
            other => Err(invalid(format!(
                "unknown domain '{other}' (expected lp-4, lp-8, lp-16, or hill)"
            ))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::LinearProjection { behavior_dim } => write!(f, "lp-{behavior_dim}"),
            Domain::Hill => f.write_str("hill"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_is_one_hundred_at_offset() {
        let lp = LinearProjection::<f64>::new(1024, 4).unwrap();
        let x = vec![LP_OFFSET; 1024];
        let (q, g) = lp.quality(&x);
        assert!((q - 100.0).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
        let (b, _) = lp.descriptor(&x);
        assert_eq!(b, vec![0.7; 4]);
    }

    #[test]
    fn descriptor_examples() {
        let lp = LinearProjection::<f64>::new(1024, 4).unwrap();
        let (b, _) = lp.descriptor(&vec![0.0; 1024]);
        assert_eq!(b, vec![0.5; 4]);
        let mut x = vec![0.0; 1024];
        x[..256].fill(10.24);
        let (b, _) = lp.descriptor(&x);
        assert!((b[0] - (0.5 + 5.12) / 10.24).abs() < 1e-15);
        assert_eq!(&b[1..], &[0.5; 3]);
    }

    #[test]
    fn rastrigin_max_grid_oracle() {
        // independent scan: 2e6 points, no refinement
        let (lo, hi) = (-LP_BOUND - LP_OFFSET, LP_BOUND - LP_OFFSET);
        let brute = (0..=2_000_000)
            .map(|i| rastrigin_term(lo + (hi - lo) * i as f64 / 2e6))
            .fold(f64::MIN, f64::max);
        let per = rastrigin_max(1, LP_OFFSET, LP_BOUND);
        assert!(per >= brute - 1e-12);
        assert!(per - brute < 1e-6);
        assert!((rastrigin_max(1024, LP_OFFSET, LP_BOUND) - 1024.0 * per).abs() < 1e-9);
    }

    #[test]
    fn scaled_sum_variant_matches_chunk_mean() {
        let a = LinearProjection::<f64>::with_scaling(64, 4, DescriptorScaling::ChunkMean).unwrap();
        let b = LinearProjection::<f64>::with_scaling(64, 4, DescriptorScaling::ScaledChunkSum).unwrap();
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 23) as f64 - 11.0) * 0.9).collect();
        let (da, ja) = a.descriptor(&x);
        let (db, jb) = b.descriptor(&x);
        for (u, v) in da.iter().zip(&db).chain(ja.iter().zip(&jb)) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn plain_eval_matches_gradient_eval() {
        let lp = LinearProjection::<f64>::new(64, 4).unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.731).sin() * 7.0).collect();
        assert_eq!(lp.eval(&x), lp.eval_with_grads(&x).eval);
    }

    #[test]
    fn hill_examples() {
        let h = GaussianHill::<f64>::default();
        assert_eq!(h.eval(&[1.0, -0.5]).quality, 100.0);
        assert!(h.eval(&[40.0, 40.0]).quality < 1e-100);
        assert_eq!(h.eval(&[40.0, -40.0]).descriptor, vec![1.0, 0.0]);
    }

    #[test]
    fn domain_names() {
        for name in ["lp-4", "lp-8", "lp-16", "hill"] {
            assert_eq!(name.parse::<Domain>().unwrap().to_string(), name);
        }
        assert!("lp-5".parse::<Domain>().is_err());
    }

    #[test]
    fn rejects_indivisible_dimensions() {
        assert!(LinearProjection::<f64>::new(10, 4).is_err());
    }
}
