//! Binary k-nearest-neighbour classifier (cascade layer 1).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lazy learner: the training set is stored verbatim, with a k-d tree over
/// it to speed up queries. Results are exactly those of a linear scan.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    dim: usize,
    /// Row-major samples.
    samples: Vec<f64>,
    targets: Vec<f64>,
    tree: KdTree,
}

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    /// Range into `KdTree::order`.
    start: usize,
    end: usize,
    /// Children, or `None` for a leaf.
    children: Option<(usize, usize)>,
    /// Smallest sample index below this node.
    min_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct KdTree {
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Bounding boxes, `dim` lows then `dim` highs per node.
    bounds: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dist = 0.0;
    for (p, q) in a.iter().zip(b) {
        let d = p - q;
        dist += d * d;
    }
    dist
}

impl KdTree {
    fn build(samples: &[f64], dim: usize) -> Self {
        let n = samples.len() / dim.max(1);
        let mut tree = KdTree {
            order: (0..n).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if n > 0 && dim > 0 {
            tree.split(samples, dim, 0, n);
        }
        tree
    }

    fn split(&mut self, samples: &[f64], dim: usize, start: usize, end: usize) -> usize {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut min_index = usize::MAX;
        for &i in &self.order[start..end] {
            min_index = min_index.min(i);
            for (d, v) in samples[i * dim..(i + 1) * dim].iter().enumerate() {
                lo[d] = lo[d].min(*v);
                hi[d] = hi[d].max(*v);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            children: None,
            min_index,
        });
        self.bounds.extend(&lo);
        self.bounds.extend(&hi);

        let (axis, spread) = (0..dim)
            .map(|d| (d, hi[d] - lo[d]))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        if end - start <= LEAF_SIZE || !(spread > 0.0) {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            samples[a * dim + axis]
                .total_cmp(&samples[b * dim + axis])
                .then(a.cmp(&b))
        });
        let left = self.split(samples, dim, start, mid);
        let right = self.split(samples, dim, mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Lower bound on the squared distance from `x` to anything in `node`.
    /// Summed in the same order as `squared_distance`, so it never exceeds
    /// the exact distance of a member even after rounding.
    fn box_distance(&self, node: usize, x: &[f64]) -> f64 {
        let dim = x.len();
        let b = &self.bounds[node * 2 * dim..(node + 1) * 2 * dim];
        let mut dist = 0.0;
        for (d, v) in x.iter().enumerate() {
            let gap = if *v < b[d] {
                b[d] - v
            } else if *v > b[dim + d] {
                v - b[dim + d]
            } else {
                0.0
            };
            dist += gap * gap;
        }
        dist
    }

    fn search(&self, node: usize, samples: &[f64], x: &[f64], k: usize, heap: &mut BinaryHeap<Neighbour>) {
        let dim = x.len();
        if heap.len() == k {
            let worst = heap.peek().expect("k >= 1");
            let bound = self.box_distance(node, x);
            // ties survive unless every index below is larger
            if bound > worst.dist || (bound == worst.dist && self.nodes[node].min_index > worst.index) {
                return;
            }
        }
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &index in &self.order[n.start..n.end] {
                    let candidate = Neighbour {
                        dist: squared_distance(&samples[index * dim..(index + 1) * dim], x),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(candidate);
                    } else if candidate < *heap.peek().expect("k >= 1") {
                        heap.pop();
                        heap.push(candidate);
                    }
                }
            }
            Some((left, right)) => {
                let (first, second) = if self.box_distance(left, x) <= self.box_distance(right, x) {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(first, samples, x, k, heap);
                self.search(second, samples, x, k, heap);
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Neighbour {
    dist: f64,
    index: usize,
}

impl PartialEq for Neighbour {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Neighbour {}
impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Neighbour {
    // distance first, then insertion index: equal distances prefer the
    // earlier sample
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

fn check_targets(y: &[f64]) -> Result<()> {
    if let Some(bad) = y.iter().find(|t| **t != 1.0 && **t != -1.0) {
        return Err(Error::Input(format!("binary targets must be ±1, found {bad}")));
    }
    Ok(())
}

impl KnnModel {
    pub fn train(x: &DMatrix<f64>, y: &[f64], k: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dim("knn targets", x.nrows(), y.len()));
        }
        if k == 0 || k % 2 == 0 {
            return Err(Error::Config(format!("k must be a positive odd integer, got {k}")));
        }
        if k > x.nrows() {
            return Err(Error::Config(format!(
                "k = {k} exceeds the {} stored samples",
                x.nrows()
            )));
        }
        check_targets(y)?;
        let mut samples = Vec::with_capacity(x.len());
        for row in x.row_iter() {
            samples.extend(row.iter());
        }
        let tree = KdTree::build(&samples, x.ncols());
        Ok(KnnModel {
            k,
            dim: x.ncols(),
            samples,
            targets: y.to_vec(),
            tree,
        })
    }

    /// Rebuilds a model from stored parts (deserialisation).
    pub fn from_parts(k: usize, x: &DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        Self::train(x, &y, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn samples(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.samples)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Indices of the k nearest stored samples, closest first.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dim {
            return Err(Error::dim("knn query", self.dim, x.len()));
        }
        let mut heap: BinaryHeap<Neighbour> = BinaryHeap::with_capacity(self.k + 1);
        if self.dim == 0 {
            // every sample is at distance 0
            return Ok((0..self.k).collect());
        }
        self.tree.search(0, &self.samples, x, self.k, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|n| n.index).collect())
    }

    /// Vote margin `(positive − negative) / k`, in [-1, 1] and never 0.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let votes: f64 = self
            .neighbours(x)?
            .into_iter()
            .map(|i| self.targets[i])
            .sum();
        Ok(votes / self.k as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.score(x)? > 0.0 { 1.0 } else { -1.0 })
    }

    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::dim("knn batch", self.dim, x.ncols()));
        }
        (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }
}

pub fn knn_train(x: &DMatrix<f64>, y: &[f64], k: usize) -> Result<KnnModel> {
    KnnModel::train(x, y, k)
}

pub fn knn_predict(model: &KnnModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Mean held-out accuracy of each candidate k under `folds`-fold cross
/// validation. Rows are shuffled with `seed` before splitting.
pub fn cross_validate_k(
    x: &DMatrix<f64>,
    y: &[f64],
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    use rand::seq::SliceRandom;

    if candidates.is_empty() {
        return Err(Error::Config("no candidate k given".into()));
    }
    if folds < 2 || folds > y.len() {
        return Err(Error::Config(format!(
            "folds must be between 2 and the sample count, got {folds}"
        )));
    }
    if x.nrows() != y.len() {
        return Err(Error::dim("knn targets", x.nrows(), y.len()));
    }
    if let Some(k) = candidates.iter().find(|k| **k == 0 || **k % 2 == 0) {
        return Err(Error::Config(format!("k must be a positive odd integer, got {k}")));
    }
    let max_k = *candidates.iter().max().expect("non-empty");
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut crate::rng::seeded(seed));

    let mut correct = vec![0usize; candidates.len()];
    for fold in 0..folds {
        let held: Vec<usize> = order.iter().copied().skip(fold).step_by(folds).collect();
        let kept: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != fold)
            .map(|(_, r)| *r)
            .collect();
        let train_x = x.select_rows(&kept);
        let train_y: Vec<f64> = kept.iter().map(|&r| y[r]).collect();
        let model = KnnModel::train(&train_x, &train_y, max_k)?;
        let hits: Vec<Vec<bool>> = held
            .par_iter()
            .map(|&r| {
                let q: Vec<f64> = x.row(r).iter().copied().collect();
                let nn = model.neighbours(&q)?;
                Ok(candidates
                    .iter()
                    .map(|&k| {
                        let votes: f64 = nn[..k].iter().map(|&i| train_y[i]).sum();
                        (if votes > 0.0 { 1.0 } else { -1.0 }) == y[r]
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for row in hits {
            for (c, hit) in correct.iter_mut().zip(row) {
                *c += hit as usize;
            }
        }
    }
    Ok(candidates
        .iter()
        .zip(correct)
        .map(|(&k, c)| (k, c as f64 / y.len() as f64))
        .collect())
}
