//! Hierarchical ELM: stacked ℓ1-sparse ELM autoencoders followed by an ELM
//! classification head.
//!
//! Each autoencoder stage draws a random sigmoid mapping `H = g(X W + b)` of
//! its width and fits decoder weights `β` (width × input) minimising
//! `‖Hβ − X‖² + λ‖β‖₁` with FISTA. The stage then encodes with the
//! transposed decoder, `g(s · X βᵀ)`, where `s` rescales the training
//! pre-activations into [-1, 1]. Stage parameters are frozen once fitted;
//! the head is an ordinary [`ElmModel`] trained on the last encoding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elm::{check_binary_targets, elm_hidden, sigmoid, sign_label, ElmModel};
use crate::error::{Error, Result};
use crate::linalg::{fista_l1_normal, FistaSettings, NormalEquations, CHUNK_ROWS};
use crate::rng::{derive_seed, seeded, uniform_matrix};

/// Autoencoder widths (N1, N2) and head width N3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelmWidths {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl HelmWidths {
    pub const fn new(n1: usize, n2: usize, n3: usize) -> Self {
        HelmWidths { n1, n2, n3 }
    }

    pub fn autoencoders(&self) -> [usize; 2] {
        [self.n1, self.n2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::Config(format!("H-ELM widths must be positive, got {self}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for HelmWidths {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.n1, self.n2, self.n3)
    }
}

impl std::str::FromStr for HelmWidths {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let nums: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some([a, b, c]) => Ok(HelmWidths::new(*a, *b, *c)),
            _ => Err(Error::Config(format!("expected N1,N2,N3 widths, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderStage {
    /// Decoder weights, width × input; encoding multiplies by the transpose.
    pub beta: DMatrix<f64>,
    pub scale: f64,
}

impl AutoencoderStage {
    pub fn width(&self) -> usize {
        self.beta.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.beta.ncols()
    }

    fn encode(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * self.beta.transpose();
        z.apply(|v| *v = sigmoid(*v * self.scale));
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelmModel {
    pub stages: Vec<AutoencoderStage>,
    pub head: ElmModel,
    pub seed: u64,
}

/// Fits decoder weights for a fixed mapped representation `h` of `x`.
pub fn fit_decoder(h: &DMatrix<f64>, x: &DMatrix<f64>, settings: &FistaSettings) -> Result<DMatrix<f64>> {
    crate::linalg::fista_l1(h, x, settings)
}

/// Trains one sparse autoencoder and returns its decoder weights β
/// (n_hidden × input).
pub fn sparse_autoencoder_train(
    x: &DMatrix<f64>,
    n_hidden: usize,
    settings: &FistaSettings,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Input("autoencoder input is empty".into()));
    }
    if n_hidden == 0 {
        return Err(Error::Config("autoencoder width must be positive".into()));
    }
    let mut rng = seeded(seed);
    let weights = uniform_matrix(&mut rng, n_hidden, x.ncols());
    let biases = DVector::from_column_slice(uniform_matrix(&mut rng, n_hidden, 1).as_slice());
    let normal = NormalEquations::accumulate(x.nrows(), n_hidden, x.ncols(), |r| {
        let xs = x.rows(r.start, r.len()).into_owned();
        let h = elm_hidden(&weights, &biases, &xs).expect("dimensions checked");
        (h, xs)
    });
    fista_l1_normal(&normal, settings)
}

fn stage_scale(x: &DMatrix<f64>, beta: &DMatrix<f64>) -> f64 {
    let mut peak = 0.0f64;
    for start in (0..x.nrows()).step_by(CHUNK_ROWS) {
        let len = CHUNK_ROWS.min(x.nrows() - start);
        let z = x.rows(start, len) * beta.transpose();
        peak = z.iter().fold(peak, |m, v| m.max(v.abs()));
    }
    if peak > 0.0 && peak.is_finite() {
        1.0 / peak
    } else {
        1.0
    }
}

impl HelmModel {
    pub fn train(
        x: &DMatrix<f64>,
        y: &[f64],
        widths: HelmWidths,
        c: f64,
        settings: &FistaSettings,
        seed: u64,
    ) -> Result<Self> {
        widths.validate()?;
        settings.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::dim("helm targets", x.nrows(), y.len()));
        }
        check_binary_targets(y)?;

        let mut stages = Vec::with_capacity(2);
        let mut input = x.clone();
        for (i, width) in widths.autoencoders().into_iter().enumerate() {
            let beta = sparse_autoencoder_train(&input, width, settings, derive_seed(seed, i as u64 + 1))?;
            let stage = AutoencoderStage {
                scale: stage_scale(&input, &beta),
                beta,
            };
            input = stage.encode(&input);
            stages.push(stage);
        }
        let head = ElmModel::train(&input, y, widths.n3, c, derive_seed(seed, 100))?;
        Ok(HelmModel { stages, head, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.stages
            .first()
            .map(AutoencoderStage::input_dim)
            .unwrap_or_else(|| self.head.n_features())
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.stages.iter().map(AutoencoderStage::width).collect();
        w.push(self.head.n_hidden());
        w
    }

    /// Runs the frozen autoencoder chain; with no stages this is the identity.
    pub fn encode(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("helm input features", self.input_dim(), x.ncols()));
        }
        let mut h = x.clone();
        for stage in &self.stages {
            h = stage.encode(&h);
        }
        Ok(h)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("helm input features", self.input_dim(), x.len()));
        }
        let mut h = x.to_vec();
        for stage in &self.stages {
            let next: Vec<f64> = stage
                .beta
                .row_iter()
                .map(|row| sigmoid(stage.scale * row.iter().zip(&h).map(|(b, v)| b * v).sum::<f64>()))
                .collect();
            h = next;
        }
        self.head.score(&h)
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("helm input features", self.input_dim(), x.ncols()));
        }
        let mut out = Vec::with_capacity(x.nrows());
        for start in (0..x.nrows()).step_by(CHUNK_ROWS) {
            let len = CHUNK_ROWS.min(x.nrows() - start);
            let enc = self.encode(&x.rows(start, len).into_owned())?;
            out.extend(self.head.scores(&enc)?);
        }
        Ok(out)
    }
}

pub fn helm_train(
    x: &DMatrix<f64>,
    y: &[f64],
    widths: HelmWidths,
    c: f64,
    settings: &FistaSettings,
    seed: u64,
) -> Result<HelmModel> {
    HelmModel::train(x, y, widths, c, settings, seed)
}

pub fn helm_encode(model: &HelmModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.encode(x)
}

/// Labels and raw head scores.
pub fn helm_predict(model: &HelmModel, x: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let scores = model.scores(x)?;
    Ok((scores.iter().copied().map(sign_label).collect(), scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(n_features: usize) -> ElmModel {
        ElmModel {
            weights: DMatrix::from_element(2, n_features, 0.1),
            biases: DVector::zeros(2),
            beta: DMatrix::from_element(2, 1, 1.0),
            c: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn zero_decoders_encode_to_half() {
        let m = HelmModel {
            stages: vec![
                AutoencoderStage {
                    beta: DMatrix::zeros(4, 3),
                    scale: 1.0,
                },
                AutoencoderStage {
                    beta: DMatrix::zeros(5, 4),
                    scale: 2.0,
                },
            ],
            head: head(5),
            seed: 0,
        };
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.3, 0.2, 0.9, 0.0]);
        let e = helm_encode(&m, &x).unwrap();
        assert_eq!(e.shape(), (2, 5));
        assert!(e.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn no_stages_is_identity() {
        let m = HelmModel {
            stages: vec![],
            head: head(3),
            seed: 0,
        };
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.3, 0.2, 0.9, 0.0]);
        assert_eq!(helm_encode(&m, &x).unwrap(), x);
        assert!(helm_encode(&m, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn zero_input_gives_zero_decoder() {
        let x = DMatrix::zeros(10, 3);
        let b = sparse_autoencoder_train(&x, 6, &FistaSettings::default(), 5).unwrap();
        assert_eq!(b, DMatrix::zeros(6, 3));
    }

    #[test]
    fn zero_widths_rejected() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i + j) as f64 / 8.0);
        let y = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let s = FistaSettings::default();
        assert!(helm_train(&x, &y, HelmWidths::new(0, 4, 4), 1.0, &s, 1).is_err());
        assert!(helm_train(&x, &y, HelmWidths::new(4, 4, 0), 1.0, &s, 1).is_err());
        assert!(helm_train(&x, &[1.0; 6], HelmWidths::new(4, 4, 4), 1.0, &s, 1).is_err());
    }

    #[test]
    fn widths_parse() {
        assert_eq!("40,40,200".parse::<HelmWidths>().unwrap(), HelmWidths::new(40, 40, 200));
        assert!("40,40".parse::<HelmWidths>().is_err());
        assert_eq!(HelmWidths::new(10, 10, 300).to_string(), "10,10,300");
    }

    #[test]
    fn row_score_matches_batch() {
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 5 + j * 7) % 13) as f64 / 13.0);
        let y: Vec<f64> = (0..40).map(|i| if (i * 5) % 13 < 6 { 1.0 } else { -1.0 }).collect();
        let m = helm_train(&x, &y, HelmWidths::new(6, 5, 20), 100.0, &FistaSettings::default(), 2).unwrap();
        let batch = m.scores(&x).unwrap();
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            assert!((m.score(&row).unwrap() - batch[i]).abs() < 1e-10);
        }
        assert_eq!(m.widths(), vec![6, 5, 20]);
    }
}
