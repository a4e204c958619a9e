//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type TestRng = ChaCha20Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut TestRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Product of two random factors, so rank ≤ `rank`.
pub fn low_rank(rng: &mut TestRng, rows: usize, cols: usize, rank: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, rows, rank);
    let b = random_matrix(rng, rank, cols);
    naive_mul(&a, &b)
}

/// Triple-loop product.
pub fn naive_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn rel(diff: &DMatrix<f64>, scale: &DMatrix<f64>) -> f64 {
    max_abs(diff) / max_abs(scale).max(1.0)
}

/// The four Moore-Penrose residuals, each relative to the magnitude of the
/// matrix it should reproduce (floored at 1).
pub fn penrose_residuals(a: &DMatrix<f64>, p: &DMatrix<f64>) -> [f64; 4] {
    let ap = naive_mul(a, p);
    let pa = naive_mul(p, a);
    [
        rel(&(naive_mul(&ap, a) - a), a),
        rel(&(naive_mul(&pa, p) - p), p),
        rel(&(&ap - ap.transpose()), &ap),
        rel(&(&pa - pa.transpose()), &pa),
    ]
}

/// Orthonormal columns by modified Gram-Schmidt on a random matrix.
pub fn orthonormal_columns(rng: &mut TestRng, rows: usize, cols: usize) -> DMatrix<f64> {
    assert!(cols <= rows);
    let mut q = random_matrix(rng, rows, cols);
    for j in 0..cols {
        for i in 0..j {
            let d: f64 = (0..rows).map(|r| q[(r, i)] * q[(r, j)]).sum();
            for r in 0..rows {
                q[(r, j)] -= d * q[(r, i)];
            }
        }
        let n: f64 = (0..rows).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..rows {
            q[(r, j)] /= n;
        }
    }
    q
}

/// Closed-form minimiser of ‖Hβ − X‖² + λ‖β‖₁ when HᵀH = I:
/// element-wise soft threshold of HᵀX at λ/2.
pub fn orthonormal_lasso(h: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let htx = naive_mul(&h.transpose(), x);
    htx.map(|v| {
        if v > lambda / 2.0 {
            v - lambda / 2.0
        } else if v < -lambda / 2.0 {
            v + lambda / 2.0
        } else {
            0.0
        }
    })
}

pub fn objective(h: &DMatrix<f64>, x: &DMatrix<f64>, beta: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = naive_mul(h, beta) - x;
    r.iter().map(|v| v * v).sum::<f64>() + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

/// Plain ISTA with the same step rule, for comparison with FISTA.
pub fn ista(h: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64, iterations: usize) -> DMatrix<f64> {
    let g = naive_mul(&h.transpose(), h);
    let c = naive_mul(&h.transpose(), x);
    // λmax by a long power iteration
    let n = g.nrows();
    let mut v = vec![1.0; n];
    let mut lmax = 0.0;
    for _ in 0..2000 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * v[j]).sum()).collect();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lmax = norm / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / norm).collect();
    }
    let step = 1.0 / (2.0 * lmax);
    let mut b = DMatrix::zeros(c.nrows(), c.ncols());
    for _ in 0..iterations {
        let grad = (naive_mul(&g, &b) - &c) * 2.0;
        b = (&b - grad * step).map(|v| v.signum() * (v.abs() - lambda * step).max(0.0));
    }
    b
}

/// Brute-force k nearest neighbours: every distance, full sort by
/// (distance, index), majority of the first k.
pub fn brute_knn(samples: &[Vec<f64>], targets: &[f64], query: &[f64], k: usize) -> (Vec<usize>, f64) {
    let mut d: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut acc = 0.0;
            for (a, b) in s.iter().zip(query) {
                acc += (a - b) * (a - b);
            }
            (acc, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let idx: Vec<usize> = d[..k].iter().map(|p| p.1).collect();
    let pos = idx.iter().filter(|&&i| targets[i] > 0.0).count();
    let label = if 2 * pos > k { 1.0 } else { -1.0 };
    (idx, label)
}

/// `H[j][i] = 1 / (1 + exp(-(w_i · x_j + b_i)))`, written out per entry.
pub fn hidden_oracle(w: &DMatrix<f64>, b: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), w.nrows(), |j, i| {
        let mut z = b[i];
        for f in 0..x.ncols() {
            z += w[(i, f)] * x[(j, f)];
        }
        1.0 / (1.0 + (-z).exp())
    })
}

/// Accuracy, FAR, precision, recall and F1 in percent, computed the way a
/// spreadsheet would, with 0 for any empty denominator.
pub fn metric_oracle(tp: u64, tn: u64, fp: u64, fn_: u64) -> [f64; 5] {
    let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { 100.0 * a / b };
    let acc = div(tp + tn, tp + tn + fp + fn_);
    let far = div(fp, fp + tn);
    let p = div(tp, tp + fp);
    let r = div(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    [acc, far, p, r, f1]
}

/// Two Gaussian clouds in `dim` dimensions, centred at ±`gap`/2 along every
/// axis; labels ±1 alternate.
pub fn two_blobs(rng: &mut TestRng, n: usize, dim: usize, gap: f64, spread: f64) -> (DMatrix<f64>, Vec<f64>) {
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let x = DMatrix::from_fn(n, dim, |i, _| {
        // Box-Muller
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        y[i] * gap / 2.0 + spread * z
    });
    (x, y)
}

/// Fraction of ±1 predictions equal to the targets.
pub fn accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}
