//! Soft QD Score estimators, the pairwise lower bound, and its error bounds.
//!
//! The behavior value at a point `b` is `max_n f_n exp(-|b - b_n|^2 / (2 sigma^2))`
//! and the Soft QD Score is its integral over behavior space. Qualities enter
//! every kernel and square-root expression clamped at zero (`f+ = max(f, 0)`).
//!
//! Error bound constants: the three-way overlap `integral (g_i g_j g_k)^(1/3)`
//! completes the square to a Gaussian of variance `sigma^2` around the triplet
//! centroid, so its normalization is `(2 pi sigma^2)^(d/2)` and the residual
//! exponent is `-(|b_i-b_j|^2 + |b_j-b_k|^2 + |b_i-b_k|^2) / (18 sigma^2)`.
//! `tests::triple_overlap_constant` recomputes this by quadrature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::population::{Evaluation, KernelParams};
use crate::scalar::{sq_dist, Real};

/// Margin, in kernel widths, by which an integration box must enclose every descriptor.
pub const BOX_MARGIN_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    MonteCarlo,
    GridQuadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate<T> {
    pub value: T,
    /// Zero for deterministic quadrature.
    pub std_error: T,
    pub n_samples: usize,
    pub method: ScoreMethod,
}

/// Upper bounds on the two sources of error between the score and its pairwise bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds<T> {
    /// Truncation of third- and higher-order overlaps.
    pub eps1: T,
    /// Replacing pairwise minima by geometric means.
    pub eps2: T,
}

/// Axis-aligned box in behavior space.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationBox<T> {
    pub low: Vec<T>,
    pub high: Vec<T>,
}

impl<T: Real> IntegrationBox<T> {
    pub fn new(low: Vec<T>, high: Vec<T>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(invalid("integration box bounds must have equal, non-zero length"));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(invalid("integration box must have low < high on every axis"));
        }
        Ok(Self { low, high })
    }

    /// Smallest box enclosing every descriptor with an `8 sigma` margin per axis.
    pub fn around(evals: &[Evaluation<T>], sigma: T) -> Result<Self> {
        let d = check_descriptors(evals)?;
        let margin = T::lit(BOX_MARGIN_SIGMAS) * sigma;
        let mut low = vec![T::infinity(); d];
        let mut high = vec![T::neg_infinity(); d];
        for e in evals {
            for k in 0..d {
                low[k] = low[k].min(e.descriptor[k]);
                high[k] = high[k].max(e.descriptor[k]);
            }
        }
        Self::new(
            low.into_iter().map(|l| l - margin).collect(),
            high.into_iter().map(|h| h + margin).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn volume(&self) -> T {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(&l, &h)| h - l)
            .fold(T::one(), |a, w| a * w)
    }

    /// Checks that every descriptor sits at least `8 sigma` inside the box.
    pub fn check_margin(&self, evals: &[Evaluation<T>], sigma: T) -> Result<()> {
        // tiny slack so a box built by `around` passes its own check after rounding
        let margin = T::lit(BOX_MARGIN_SIGMAS) * sigma * (T::one() - T::lit(1e-12));
        for (i, e) in evals.iter().enumerate() {
            if e.descriptor.len() != self.dim() {
                return Err(invalid(format!(
                    "descriptor {i} does not match box dimension {}",
                    self.dim()
                )));
            }
            for k in 0..self.dim() {
                let b = e.descriptor[k];
                if b - self.low[k] < margin || self.high[k] - b < margin {
                    return Err(invalid(format!(
                        "descriptor {i} is within 8 sigma of the integration box boundary on axis {k}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Uniform sample points inside the box.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<T>> {
        (0..n)
            .map(|_| {
                self.low
                    .iter()
                    .zip(&self.high)
                    .map(|(&l, &h)| l + (h - l) * T::lit(rng.random::<f64>()))
                    .collect()
            })
            .collect()
    }
}

fn check_descriptors<T: Real>(evals: &[Evaluation<T>]) -> Result<usize> {
    let first = evals.first().ok_or_else(|| invalid("population is empty"))?;
    let d = first.descriptor.len();
    if d == 0 {
        return Err(invalid("behavior dimension must be at least 1"));
    }
    if let Some(i) = evals.iter().position(|e| e.descriptor.len() != d) {
        return Err(invalid(format!(
            "descriptor {i} has dimension {}, expected {d}",
            evals[i].descriptor.len()
        )));
    }
    Ok(d)
}

#[inline]
fn clamp0<T: Real>(f: T) -> T {
    f.max(T::zero())
}

/// Sums in a fixed pairwise tree order so results do not depend on how work is split.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        xs.iter().fold(T::zero(), |a, &x| a + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn behavior_value_unchecked<T: Real>(evals: &[Evaluation<T>], query: &[T], inv_two_s2: T) -> T {
    evals.iter().fold(T::zero(), |best, e| {
        let v = clamp0(e.quality) * (-sq_dist(query, &e.descriptor) * inv_two_s2).exp();
        best.max(v)
    })
}

/// Behavior value `v(b) = max_n f+_n exp(-|b - b_n|^2 / (2 sigma^2))`.
pub fn behavior_value<T: Real>(evals: &[Evaluation<T>], query: &[T], kernel: &KernelParams<T>) -> Result<T> {
    let d = check_descriptors(evals)?;
    if query.len() != d {
        return Err(invalid(format!("query has dimension {}, expected {d}", query.len())));
    }
    let s = kernel.sigma();
    Ok(behavior_value_unchecked(evals, query, T::one() / (T::lit(2.0) * s * s)))
}

/// Behavior values at each of the given points.
pub fn behavior_values<T: Real>(
    evals: &[Evaluation<T>],
    kernel: &KernelParams<T>,
    points: &[Vec<T>],
) -> Result<Vec<T>> {
    let d = check_descriptors(evals)?;
    if let Some(i) = points.iter().position(|p| p.len() != d) {
        return Err(invalid(format!(
            "point {i} has dimension {}, expected {d}",
            points[i].len()
        )));
    }
    let s = kernel.sigma();
    let inv = T::one() / (T::lit(2.0) * s * s);
    Ok(points.iter().map(|p| behavior_value_unchecked(evals, p, inv)).collect())
}

/// Monte Carlo estimate of the Soft QD Score on caller-supplied sample points.
///
/// Reusing one sample set across calls makes comparisons between populations
/// exact pointwise statements about the integrand.
pub fn soft_qd_score_mc<T: Real>(
    evals: &[Evaluation<T>],
    kernel: &KernelParams<T>,
    sample_points: &[Vec<T>],
    region: &IntegrationBox<T>,
) -> Result<ScoreEstimate<T>> {
    let d = check_descriptors(evals)?;
    if sample_points.is_empty() {
        return Err(invalid("Monte Carlo estimate needs at least one sample point"));
    }
    if region.dim() != d {
        return Err(invalid("integration box dimension does not match descriptors"));
    }
    region.check_margin(evals, kernel.sigma())?;
    if let Some(i) = sample_points.iter().position(|p| p.len() != d) {
        return Err(invalid(format!("sample point {i} has wrong dimension")));
    }
    let s = kernel.sigma();
    let inv = T::one() / (T::lit(2.0) * s * s);
    let values: Vec<T> = sample_points
        .iter()
        .map(|p| behavior_value_unchecked(evals, p, inv))
        .collect();
    let n = T::from_usize_lossy(values.len());
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<T> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 {
        pairwise_sum(&sq) / (n - T::one())
    } else {
        T::zero()
    };
    let vol = region.volume();
    Ok(ScoreEstimate {
        value: vol * mean,
        std_error: vol * (var / n).sqrt(),
        n_samples: values.len(),
        method: ScoreMethod::MonteCarlo,
    })
}

/// Midpoint-rule quadrature of the behavior value over a box (d <= 3).
pub fn soft_qd_score_quadrature<T: Real>(
    evals: &[Evaluation<T>],
    kernel: &KernelParams<T>,
    grid_points_per_axis: usize,
    region: &IntegrationBox<T>,
) -> Result<ScoreEstimate<T>> {
    let d = check_descriptors(evals)?;
    if d > 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if region.dim() != d {
        return Err(invalid("integration box dimension does not match descriptors"));
    }
    if grid_points_per_axis == 0 {
        return Err(invalid("grid needs at least one point per axis"));
    }
    region.check_margin(evals, kernel.sigma())?;
    let g = grid_points_per_axis;
    let s = kernel.sigma();
    let inv = T::one() / (T::lit(2.0) * s * s);
    let h: Vec<T> = (0..d)
        .map(|k| (region.high[k] - region.low[k]) / T::from_usize_lossy(g))
        .collect();
    let half = T::lit(0.5);
    let axis = |k: usize, i: usize| region.low[k] + (T::from_usize_lossy(i) + half) * h[k];

    let total = g.pow(d as u32);
    let mut point = vec![T::zero(); d];
    let mut row = Vec::with_capacity(g);
    let mut row_sums = Vec::with_capacity(total / g);
    // innermost axis 0 forms one row; rows are reduced pairwise
    for outer in 0..total / g {
        let mut rest = outer;
        for k in 1..d {
            point[k] = axis(k, rest % g);
            rest /= g;
        }
        row.clear();
        for i in 0..g {
            point[0] = axis(0, i);
            row.push(behavior_value_unchecked(evals, &point, inv));
        }
        row_sums.push(pairwise_sum(&row));
    }
    let cell = h.iter().fold(T::one(), |a, &w| a * w);
    Ok(ScoreEstimate {
        value: pairwise_sum(&row_sums) * cell,
        std_error: T::zero(),
        n_samples: total,
        method: ScoreMethod::GridQuadrature,
    })
}

fn check_nonnegative<T: Real>(evals: &[Evaluation<T>]) -> Result<()> {
    if let Some(i) = evals.iter().position(|e| e.quality < T::zero()) {
        return Err(invalid(format!(
            "quality {i} is negative; clamp qualities before bounding"
        )));
    }
    Ok(())
}

fn gaussian_mass<T: Real>(sigma: T, d: usize) -> T {
    (T::lit(2.0) * T::PI() * sigma * sigma).powf(T::from_usize_lossy(d) / T::lit(2.0))
}

/// Closed-form pairwise lower bound with its full `(2 pi sigma^2)^(d/2)` constant.
pub fn lower_bound_full<T: Real>(evals: &[Evaluation<T>], sigma: T, d: usize) -> Result<T> {
    let dd = check_descriptors(evals)?;
    if dd != d {
        return Err(invalid(format!("descriptors have dimension {dd}, expected {d}")));
    }
    check_nonnegative(evals)?;
    if !(sigma > T::zero()) {
        return Err(invalid("sigma must be positive"));
    }
    let inv8 = T::one() / (T::lit(8.0) * sigma * sigma);
    let quality: T = evals.iter().map(|e| e.quality).sum();
    let mut overlap = T::zero();
    for i in 0..evals.len() {
        for j in i + 1..evals.len() {
            let (a, b) = (&evals[i], &evals[j]);
            overlap = overlap + (a.quality * b.quality).sqrt() * (-sq_dist(&a.descriptor, &b.descriptor) * inv8).exp();
        }
    }
    Ok(gaussian_mass(sigma, d) * (quality - overlap))
}

fn check_neighbors(n: usize, neighbor_lists: &[Vec<usize>]) -> Result<()> {
    if neighbor_lists.len() != n {
        return Err(invalid(format!(
            "{} neighbor lists for {n} solutions",
            neighbor_lists.len()
        )));
    }
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &j in list {
            if j >= n {
                return Err(invalid(format!("neighbor index {j} of solution {i} is out of range")));
            }
            if j == i {
                return Err(invalid(format!("neighbor list of solution {i} contains itself")));
            }
        }
    }
    Ok(())
}

/// Batch objective `sum_{i in I} f_i - 1/2 sum_{i in I, j in N_i} sqrt(f+_i f+_j) exp(-|b_i - b_j|^2 / gamma^2)`.
///
/// Descriptors are expected in the transformed (unbounded) space.
pub fn batch_objective<T: Real>(
    evals: &[Evaluation<T>],
    batch: &[usize],
    neighbor_lists: &[Vec<usize>],
    gamma_sq: T,
) -> Result<T> {
    check_descriptors(evals)?;
    check_neighbors(evals.len(), neighbor_lists)?;
    if let Some(&i) = batch.iter().find(|&&i| i >= evals.len()) {
        return Err(invalid(format!("batch index {i} is out of range")));
    }
    let inv = T::one() / gamma_sq;
    let half = T::lit(0.5);
    let mut quality = T::zero();
    let mut repulsion = T::zero();
    for &i in batch {
        let ei = &evals[i];
        quality = quality + ei.quality;
        let fi = clamp0(ei.quality);
        for &j in &neighbor_lists[i] {
            let ej = &evals[j];
            repulsion =
                repulsion + (fi * clamp0(ej.quality)).sqrt() * (-sq_dist(&ei.descriptor, &ej.descriptor) * inv).exp();
        }
    }
    Ok(quality - half * repulsion)
}

/// SQUAD objective over the whole population with per-solution neighbor lists.
///
/// With symmetric all-pairs lists the `1/2` makes this equal the `i < j` double sum.
pub fn squad_objective<T: Real>(evals: &[Evaluation<T>], gamma_sq: T, neighbor_lists: &[Vec<usize>]) -> Result<T> {
    let all: Vec<usize> = (0..evals.len()).collect();
    batch_objective(evals, &all, neighbor_lists, gamma_sq)
}

/// All-pairs neighbor lists (`j != i`).
pub fn all_pairs(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
}

/// Triplet truncation bound `eps1` and geometric-mean bound `eps2`.
pub fn error_bounds<T: Real>(evals: &[Evaluation<T>], sigma: T, d: usize) -> Result<ErrorBounds<T>> {
    let dd = check_descriptors(evals)?;
    if dd != d {
        return Err(invalid(format!("descriptors have dimension {dd}, expected {d}")));
    }
    check_nonnegative(evals)?;
    let mass = gaussian_mass(sigma, d);
    let n = evals.len();
    let dist2 = |i: usize, j: usize| sq_dist(&evals[i].descriptor, &evals[j].descriptor);
    let inv18 = T::one() / (T::lit(18.0) * sigma * sigma);
    let third = T::one() / T::lit(3.0);

    let mut eps1 = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let dij = dist2(i, j);
            for k in j + 1..n {
                let prod = evals[i].quality * evals[j].quality * evals[k].quality;
                let spread = dij + dist2(j, k) + dist2(i, k);
                eps1 = eps1 + prod.powf(third) * (-spread * inv18).exp();
            }
        }
    }

    let mut eps2 = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let (fi, fj) = (evals[i].quality, evals[j].quality);
            eps2 = eps2 + (fi - fj).abs() + fi.min(fj) * dist2(i, j).sqrt() / sigma;
        }
    }
    Ok(ErrorBounds {
        eps1: mass * eps1,
        eps2: mass * eps2,
    })
}

/// Partial sum `P_K = sum_{m=1..K} (-1)^(m-1) S_m` of the maximum-minimums identity,
/// where `S_m` sums the minimum over every m-subset. Brute force; test oracle only.
pub fn bonferroni_partial_sums<T: Real>(values: &[T], order: usize) -> Result<T> {
    if !(order == 2 || order == 3) {
        return Err(invalid(format!("order must be 2 or 3, got {order}")));
    }
    if values.iter().any(|&v| v < T::zero() || !v.is_finite()) {
        return Err(invalid("Bonferroni partial sums need non-negative finite values"));
    }
    let n = values.len();
    let s1: T = values.iter().copied().sum();
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let m2 = values[i].min(values[j]);
            s2 = s2 + m2;
            if order == 3 {
                for k in j + 1..n {
                    s3 = s3 + m2.min(values[k]);
                }
            }
        }
    }
    Ok(s1 - s2 + s3)
}
