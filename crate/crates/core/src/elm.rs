//! Single-hidden-layer extreme learning machine with a ±1 output.
//!
//! Hidden weights and biases are drawn once from uniform[-1, 1] and never
//! trained; only the output weights β are fitted, as the ridge solution
//! `(I/C + HᵀH)⁻¹ HᵀT` over the sigmoid hidden activations H.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{NormalEquations, CHUNK_ROWS};
use crate::rng::{seeded, uniform_matrix};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// n_hidden × n_features.
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    /// n_hidden × 1.
    pub beta: DMatrix<f64>,
    pub c: f64,
    pub seed: u64,
}

/// `H[j][i] = g(w_iᵀ x_j + b_i)`, shape n_samples × n_hidden.
pub fn elm_hidden(weights: &DMatrix<f64>, biases: &DVector<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if weights.ncols() != x.ncols() {
        return Err(Error::dim("elm input features", weights.ncols(), x.ncols()));
    }
    if weights.nrows() != biases.len() {
        return Err(Error::dim("elm biases", weights.nrows(), biases.len()));
    }
    let mut h = x * weights.transpose();
    for mut row in h.row_iter_mut() {
        for (v, b) in row.iter_mut().zip(biases.iter()) {
            *v = sigmoid(*v + b);
        }
    }
    Ok(h)
}

pub(crate) fn check_binary_targets(y: &[f64]) -> Result<()> {
    if let Some(bad) = y.iter().find(|t| **t != 1.0 && **t != -1.0) {
        return Err(Error::Input(format!("binary targets must be ±1, found {bad}")));
    }
    let pos = y.iter().filter(|t| **t > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Input(
            "training targets contain a single class; both +1 and -1 are required".into(),
        ));
    }
    Ok(())
}

pub(crate) fn sign_label(score: f64) -> f64 {
    // an exact zero goes to the attack side
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl ElmModel {
    pub fn train(x: &DMatrix<f64>, y: &[f64], n_hidden: usize, c: f64, seed: u64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dim("elm targets", x.nrows(), y.len()));
        }
        if n_hidden == 0 {
            return Err(Error::Config("ELM needs at least one hidden neuron".into()));
        }
        check_binary_targets(y)?;
        let mut rng = seeded(seed);
        let weights = uniform_matrix(&mut rng, n_hidden, x.ncols());
        let biases = DVector::from_column_slice(uniform_matrix(&mut rng, n_hidden, 1).as_slice());

        let normal = NormalEquations::accumulate(x.nrows(), n_hidden, 1, |r| {
            let xs = x.rows(r.start, r.len()).into_owned();
            let h = elm_hidden(&weights, &biases, &xs).expect("dimensions checked");
            (h, DMatrix::from_column_slice(r.len(), 1, &y[r]))
        });
        let beta = normal.solve_ridge(c)?;
        Ok(ElmModel {
            weights,
            biases,
            beta,
            c,
            seed,
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Raw output `h(x)·β` for one sample.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::dim("elm input features", self.n_features(), x.len()));
        }
        let mut s = 0.0;
        for i in 0..self.n_hidden() {
            let mut z = self.biases[i];
            for (j, xj) in x.iter().enumerate() {
                z += self.weights[(i, j)] * xj;
            }
            s += sigmoid(z) * self.beta[(i, 0)];
        }
        Ok(s)
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::dim("elm input features", self.n_features(), x.ncols()));
        }
        let mut out = Vec::with_capacity(x.nrows());
        for start in (0..x.nrows()).step_by(CHUNK_ROWS) {
            let len = CHUNK_ROWS.min(x.nrows() - start);
            let h = elm_hidden(&self.weights, &self.biases, &x.rows(start, len).into_owned())?;
            out.extend((h * &self.beta).column(0).iter());
        }
        Ok(out)
    }

    /// ±1 labels; a score of exactly 0 is labelled +1.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.scores(x)?.into_iter().map(sign_label).collect())
    }
}

pub fn elm_train(x: &DMatrix<f64>, y: &[f64], n_hidden: usize, c: f64, seed: u64) -> Result<ElmModel> {
    ElmModel::train(x, y, n_hidden, c, seed)
}

/// Labels and raw scores.
pub fn elm_predict(model: &ElmModel, x: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let scores = model.scores(x)?;
    Ok((scores.iter().copied().map(sign_label).collect(), scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_zero_weights_is_half() {
        let w = DMatrix::zeros(3, 2);
        let b = DVector::zeros(3);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let h = elm_hidden(&w, &b, &x).unwrap();
        assert!(h.iter().all(|v| *v == 0.5));
        let h = elm_hidden(
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::zeros(1),
            &DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(h[(0, 0)], 0.5);
        assert!(elm_hidden(&w, &b, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_beta_labels_everything_positive() {
        let m = ElmModel {
            weights: DMatrix::from_element(4, 2, 0.3),
            biases: DVector::zeros(4),
            beta: DMatrix::zeros(4, 1),
            c: 1.0,
            seed: 0,
        };
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, -5.0, 2.0]);
        let (labels, scores) = elm_predict(&m, &x).unwrap();
        assert_eq!(scores, vec![0.0; 3]);
        assert_eq!(labels, vec![1.0; 3]);
    }

    #[test]
    fn single_class_and_zero_width_rejected() {
        let x = DMatrix::zeros(3, 2);
        assert!(elm_train(&x, &[1.0, 1.0, 1.0], 5, 1.0, 1).is_err());
        assert!(elm_train(&x, &[1.0, -1.0, 1.0], 0, 1.0, 1).is_err());
        assert!(elm_train(&x, &[1.0, -1.0], 5, 1.0, 1).is_err());
    }

    #[test]
    fn same_seed_same_beta() {
        let x = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
        let y: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let a = elm_train(&x, &y, 20, 10.0, 9).unwrap();
        let b = elm_train(&x, &y, 20, 10.0, 9).unwrap();
        assert_eq!(a, b);
        let c = elm_train(&x, &y, 20, 10.0, 10).unwrap();
        assert_ne!(a.beta, c.beta);
    }

    #[test]
    fn single_score_matches_batch() {
        let x = DMatrix::from_fn(12, 3, |i, j| ((i + 2 * j) % 5) as f64 / 5.0);
        let y: Vec<f64> = (0..12).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let m = elm_train(&x, &y, 15, 100.0, 3).unwrap();
        let batch = m.scores(&x).unwrap();
        for (i, s) in batch.iter().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            assert!((m.score(&row).unwrap() - s).abs() < 1e-12);
        }
    }
}
