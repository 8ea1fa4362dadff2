//! Evaluation metrics: CVT archives, QD Score, coverage, Vendi Score, and QVS.
//!
//! All metrics take untransformed descriptors in `[0, 1]^d`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kdtree::KdTree;
use crate::population::{Evaluation, Population};
use crate::rng;
use crate::scalar::{sq_dist, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvtOptions {
    pub samples: usize,
    pub max_iters: usize,
    /// Lloyd stops once no centroid moves further than this.
    pub tolerance: f64,
}

impl Default for CvtOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            max_iters: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elite<T> {
    pub quality: T,
    pub descriptor: Vec<T>,
    /// Caller-defined reference to the stored solution.
    pub solution: usize,
}

/// Archive over the Voronoi cells of a fixed centroid set.
#[derive(Debug, Clone)]
pub struct CvtArchive<T> {
    centroids: Vec<Vec<T>>,
    cells: Vec<Option<Elite<T>>>,
    tree: KdTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidsRecord {
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl CentroidsRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("centroids serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("malformed centroids JSON: {e}")))
    }
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl<T: Real> CvtArchive<T> {
    /// Empty archive over the given centroids; centroids must be pairwise distinct.
    pub fn from_centroids(centroids: Vec<Vec<T>>) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("a CVT needs at least one centroid"))?;
        if dim == 0
            || centroids
                .iter()
                .any(|c| c.len() != dim || c.iter().any(|x| !x.is_finite()))
        {
            return Err(invalid("centroids must share a positive dimension and be finite"));
        }
        let flat: Vec<Vec<f64>> = centroids.iter().map(|c| to_f64(c)).collect();
        let tree = KdTree::new(&flat);
        if centroids.len() > 1 {
            for (i, c) in flat.iter().enumerate() {
                let [a, b] = tree.nearest2(c);
                let other = if a.1 == i { b } else { a };
                if other.0 == 0.0 {
                    return Err(invalid(format!("centroids {i} and {} coincide", other.1)));
                }
            }
        }
        let cells = vec![None; centroids.len()];
        Ok(Self { centroids, cells, tree })
    }

    pub fn from_record(rec: &CentroidsRecord) -> Result<Self> {
        if rec.centroids.iter().any(|c| c.len() != rec.dim) {
            return Err(invalid("centroid length disagrees with the recorded dimension"));
        }
        Self::from_centroids(
            rec.centroids
                .iter()
                .map(|c| c.iter().map(|&x| T::lit(x)).collect())
                .collect(),
        )
    }

    pub fn to_record(&self) -> CentroidsRecord {
        CentroidsRecord {
            dim: self.dim(),
            centroids: self.centroids.iter().map(|c| to_f64(c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn num_cells(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<T>] {
        &self.centroids
    }

    pub fn cells(&self) -> &[Option<Elite<T>>] {
        &self.cells
    }

    pub fn elites(&self) -> impl Iterator<Item = (usize, &Elite<T>)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|e| (i, e)))
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn clear(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = None);
    }

    /// Index of the nearest centroid, ties to the smaller index.
    pub fn cell_of(&self, descriptor: &[T]) -> Result<usize> {
        if descriptor.len() != self.dim() {
            return Err(invalid(format!(
                "descriptor has {} entries, archive expects {}",
                descriptor.len(),
                self.dim()
            )));
        }
        Ok(self.tree.nearest(&to_f64(descriptor)).1)
    }

    /// Stores the evaluation if its cell is empty or it strictly beats the incumbent.
    pub fn insert(&mut self, eval: &Evaluation<T>, solution: usize) -> Result<bool> {
        let cell = self.cell_of(&eval.descriptor)?;
        Ok(self.insert_at(cell, eval, solution))
    }

    pub(crate) fn insert_at(&mut self, cell: usize, eval: &Evaluation<T>, solution: usize) -> bool {
        let slot = &mut self.cells[cell];
        if slot.as_ref().is_some_and(|e| !(eval.quality > e.quality)) {
            return false;
        }
        *slot = Some(Elite {
            quality: eval.quality,
            descriptor: eval.descriptor.clone(),
            solution,
        });
        true
    }

    /// Sum of incumbent qualities.
    pub fn qd_score(&self) -> T {
        self.elites().map(|(_, e)| e.quality).fold(T::zero(), |a, b| a + b)
    }

    /// Percentage of occupied cells.
    pub fn coverage(&self) -> T {
        T::lit(100.0) * T::from_usize_lossy(self.occupied()) / T::from_usize_lossy(self.num_cells())
    }
}

/// Lloyd's k-means over uniform samples of `[0, 1]^d`, with default options.
pub fn build_cvt<T: Real>(dim: usize, cells: usize, seed: u64) -> Result<CvtArchive<T>> {
    build_cvt_with(dim, cells, seed, &CvtOptions::default())
}

/// Lloyd's k-means with Hamerly's bounds, which skip distance computations
/// that cannot change an assignment; the result equals plain Lloyd.
pub fn build_cvt_with<T: Real>(dim: usize, cells: usize, seed: u64, opts: &CvtOptions) -> Result<CvtArchive<T>> {
    if dim == 0 || cells == 0 {
        return Err(invalid("CVT needs a positive dimension and at least one cell"));
    }
    if opts.samples < cells {
        return Err(invalid(format!("{} samples cannot seed {cells} cells", opts.samples)));
    }
    let mut rng = rng::seeded(seed);
    let samples: Vec<Vec<f64>> = (0..opts.samples)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut centroids: Vec<Vec<f64>> = samples[..cells].to_vec();
    let centroids = if cells == 1 {
        vec![mean_of(&samples, dim)]
    } else {
        lloyd(&samples, &mut centroids, opts);
        centroids
    };
    CvtArchive::from_centroids(
        centroids
            .into_iter()
            .map(|c| c.into_iter().map(T::lit).collect())
            .collect(),
    )
}

fn mean_of(samples: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for s in samples {
        m.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= samples.len() as f64);
    m
}

fn lloyd(samples: &[Vec<f64>], centroids: &mut [Vec<f64>], opts: &CvtOptions) {
    let k = centroids.len();
    let dim = centroids[0].len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();

    let mut tree = KdTree::new(centroids);
    let mut assign = vec![0usize; samples.len()];
    let mut upper = vec![0.0; samples.len()];
    let mut lower = vec![0.0; samples.len()];
    for (i, s) in samples.iter().enumerate() {
        let [a, b] = tree.nearest2(s);
        assign[i] = a.1;
        upper[i] = a.0.sqrt();
        lower[i] = b.0.sqrt();
    }

    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for _ in 0..opts.max_iters {
        sums.iter_mut().for_each(|x| *x = 0.0);
        counts.iter_mut().for_each(|x| *x = 0);
        for (s, &a) in samples.iter().zip(&assign) {
            counts[a] += 1;
            sums[a * dim..(a + 1) * dim]
                .iter_mut()
                .zip(s)
                .for_each(|(x, y)| *x += y);
        }
        let mut moved = vec![0.0; k];
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[j * dim..(j + 1) * dim]
                .iter()
                .map(|x| x / counts[j] as f64)
                .collect();
            moved[j] = dist(&new, &centroids[j]);
            centroids[j] = new;
        }
        let (mut top, mut top_j, mut second) = (0.0f64, usize::MAX, 0.0f64);
        for (j, &m) in moved.iter().enumerate() {
            if m > top {
                second = top;
                top = m;
                top_j = j;
            } else if m > second {
                second = m;
            }
        }
        if top < opts.tolerance {
            break;
        }

        tree = KdTree::new(centroids);
        let half_sep: Vec<f64> = centroids.iter().map(|c| 0.5 * tree.nearest2(c)[1].0.sqrt()).collect();
        for (i, s) in samples.iter().enumerate() {
            let a = assign[i];
            upper[i] += moved[a];
            lower[i] -= if a == top_j { second } else { top };
            let bound = half_sep[a].max(lower[i]);
            if upper[i] <= bound {
                continue;
            }
            upper[i] = dist(s, &centroids[a]);
            if upper[i] <= bound {
                continue;
            }
            let [n1, n2] = tree.nearest2(s);
            assign[i] = n1.1;
            upper[i] = n1.0.sqrt();
            lower[i] = n2.0.sqrt();
        }
    }
}

/// Vendi Score `exp(-sum l ln l)` over eigenvalues `l` of `K / N`, with the
/// kernel `K_ij = exp(-|b_i - b_j|^2 / sigma_v_sq)`.
pub fn vendi_score<T: Real>(descriptors: &[Vec<T>], sigma_v_sq: T) -> Result<T> {
    let n = descriptors.len();
    if n == 0 {
        return Err(invalid("Vendi Score needs at least one descriptor"));
    }
    if !(sigma_v_sq > T::zero()) {
        return Err(invalid("sigma_v_sq must be positive"));
    }
    let inv_n = 1.0 / n as f64;
    let bw = sigma_v_sq.as_f64();
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            inv_n
        } else {
            (-sq_dist(&descriptors[i], &descriptors[j]).as_f64() / bw).exp() * inv_n
        }
    });
    let eigen = kernel.clone().symmetric_eigen();
    let residual = (&kernel * &eigen.eigenvectors - &eigen.eigenvectors * DMatrix::from_diagonal(&eigen.eigenvalues))
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if !(residual <= 1e-8) {
        return Err(Error::Numerical(format!("eigen residual {residual:e} exceeds 1e-8")));
    }
    vendi_from_eigenvalues(eigen.eigenvalues.as_slice()).map(T::lit)
}

/// Entropy exponent of a spectrum, with `0 ln 0 = 0` and tiny negatives clamped.
pub fn vendi_from_eigenvalues(eigenvalues: &[f64]) -> Result<f64> {
    let mut entropy = 0.0;
    for &l in eigenvalues {
        if l < -1e-10 {
            return Err(Error::Numerical(format!("kernel eigenvalue {l:e} is negative")));
        }
        if l > 0.0 {
            entropy -= l * l.ln();
        }
    }
    Ok(entropy.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qvs {
    pub value: f64,
    /// Set when the mean quality was negative and the value was reported as 0.
    pub clamped: bool,
}

/// Mean quality times the Vendi Score, reported as 0 when the mean is negative.
pub fn qvs<T: Real>(qualities: &[T], vendi: T) -> Qvs {
    if qualities.is_empty() {
        return Qvs {
            value: 0.0,
            clamped: false,
        };
    }
    let mean = qualities.iter().map(|q| q.as_f64()).sum::<f64>() / qualities.len() as f64;
    if mean < 0.0 {
        Qvs {
            value: 0.0,
            clamped: true,
        }
    } else {
        Qvs {
            value: mean * vendi.as_f64(),
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub qd_score: f64,
    pub coverage_percent: f64,
    pub vendi: f64,
    pub qvs: f64,
    pub qvs_clamped: bool,
    pub mean_objective: f64,
    pub max_objective: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Metrics of a population against a (cleared) copy of `archive`.
pub fn compute_metrics<T: Real>(pop: &Population<T>, archive: &CvtArchive<T>, sigma_v_sq: T) -> Result<MetricsReport> {
    compute_metrics_for(pop.evaluations(), archive, sigma_v_sq)
}

/// Metrics of a set of evaluations against a (cleared) copy of `archive`.
pub fn compute_metrics_for<T: Real>(
    evals: &[Evaluation<T>],
    archive: &CvtArchive<T>,
    sigma_v_sq: T,
) -> Result<MetricsReport> {
    if evals.is_empty() {
        return Err(invalid("metrics need at least one evaluation"));
    }
    let mut arch = archive.clone();
    arch.clear();
    for (i, e) in evals.iter().enumerate() {
        arch.insert(e, i)?;
    }
    let descriptors: Vec<Vec<T>> = evals.iter().map(|e| e.descriptor.clone()).collect();
    let qualities: Vec<T> = evals.iter().map(|e| e.quality).collect();
    let vendi = vendi_score(&descriptors, sigma_v_sq)?;
    let q = qvs(&qualities, vendi);
    let mean = qualities.iter().map(|q| q.as_f64()).sum::<f64>() / qualities.len() as f64;
    let max = qualities.iter().map(|q| q.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    Ok(MetricsReport {
        qd_score: arch.qd_score().as_f64(),
        coverage_percent: arch.coverage().as_f64(),
        vendi: vendi.as_f64(),
        qvs: q.value,
        qvs_clamped: q.clamped,
        mean_objective: mean,
        max_objective: max,
    })
}

/// Elites of `source` re-binned into a (cleared) copy of `target`, best per target cell.
pub fn rebin_elites<T: Real>(source: &CvtArchive<T>, target: &CvtArchive<T>) -> Result<Vec<Evaluation<T>>> {
    let mut arch = target.clone();
    arch.clear();
    for (cell, e) in source.elites() {
        arch.insert(&Evaluation::new(e.quality, e.descriptor.clone()), cell)?;
    }
    Ok(arch
        .elites()
        .map(|(_, e)| Evaluation::new(e.quality, e.descriptor.clone()))
        .collect())
}
