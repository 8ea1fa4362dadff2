//! Exact nearest-neighbor queries over a fixed point set.
//!
//! Results are ordered by (squared distance, index), so ties resolve to the
//! smaller index exactly as a brute-force scan would.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 8;
/// Above this dimension pruning rarely pays off and a single flat leaf is faster.
const MAX_SPLIT_DIM: usize = 6;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    points: Vec<f64>,
    /// Point indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A candidate neighbor: squared distance and point index.
pub(crate) type Hit = (f64, usize);

fn better(a: Hit, b: Hit) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

impl KdTree {
    pub(crate) fn new(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        let mut tree = Self {
            dim,
            points: flat,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE || self.dim > MAX_SPLIT_DIM {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut axis = 0;
        let mut best_spread = f64::NEG_INFINITY;
        for a in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = self.points[i * self.dim + a];
                    (lo.min(v), hi.max(v))
                });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        let mid = (start + end) / 2;
        let (dim, pts) = (self.dim, &self.points);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * dim + axis].total_cmp(&pts[b * dim + axis])
        });
        let value = self.points[self.order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn sq_dist(&self, i: usize, q: &[f64]) -> f64 {
        self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Nearest point to `q`.
    pub(crate) fn nearest(&self, q: &[f64]) -> Hit {
        let mut best = [(f64::INFINITY, usize::MAX); 1];
        self.search(0, q, &mut best);
        best[0]
    }

    /// Nearest and second-nearest points to `q`; needs at least two points.
    pub(crate) fn nearest2(&self, q: &[f64]) -> [Hit; 2] {
        let mut best = [(f64::INFINITY, usize::MAX); 2];
        self.search(0, q, &mut best);
        best
    }

    fn search<const K: usize>(&self, node: usize, q: &[f64], best: &mut [Hit; K]) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (self.sq_dist(i, q), i);
                    if better(cand, best[K - 1]) {
                        best[K - 1] = cand;
                        let mut k = K - 1;
                        while k > 0 && better(best[k], best[k - 1]) {
                            best.swap(k, k - 1);
                            k -= 1;
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equal distances must still be visited for the index tie-break
                if diff * diff <= best[K - 1].0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}
