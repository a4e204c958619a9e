//! Dense numerical kernels shared by the ELM and H-ELM layers: SVD
//! pseudoinverse, ridge least squares through the normal equations, power
//! iteration, and FISTA for ℓ1-regularised least squares.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below `PINV_RTOL * σ_max` are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Row-block size for streamed normal-equation accumulation. Fixed so that
/// every caller sums partial products in the same order.
pub const CHUNK_ROWS: usize = 4096;

pub fn pseudoinverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("pseudoinverse of a non-finite matrix".into()));
    }
    if m.is_empty() {
        return Ok(DMatrix::zeros(m.ncols(), m.nrows()));
    }
    // nalgebra's SVD can return inconsistent factors for rank-deficient
    // input, so the factorization comes from faer
    let a = faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let sigma = svd.S().column_vector();
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = PINV_RTOL * sigma_max;

    // M† = V Σ⁺ Uᵀ
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        for j in 0..m.nrows() {
            let w = u[(j, k)] / s;
            for i in 0..m.ncols() {
                out[(i, j)] += v[(i, k)] * w;
            }
        }
    }
    Ok(out)
}

/// Accumulated `HᵀH` and `HᵀT`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl NormalEquations {
    /// Streams `rows` rows in [`CHUNK_ROWS`] blocks. `block` returns the
    /// `(H, T)` rows for a range; blocks may be computed in parallel but are
    /// summed in row order.
    pub fn accumulate<F>(rows: usize, width: usize, targets: usize, block: F) -> Self
    where
        F: Fn(Range<usize>) -> (DMatrix<f64>, DMatrix<f64>) + Sync,
    {
        let starts: Vec<usize> = (0..rows).step_by(CHUNK_ROWS).collect();
        let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = starts
            .par_iter()
            .map(|&s| {
                let (h, t) = block(s..(s + CHUNK_ROWS).min(rows));
                let ht = h.transpose();
                (&ht * &h, &ht * &t)
            })
            .collect();
        let mut gram = DMatrix::zeros(width, width);
        let mut cross = DMatrix::zeros(width, targets);
        for (g, c) in partials {
            gram += g;
            cross += c;
        }
        NormalEquations { gram, cross }
    }

    pub fn from_dense(h: &DMatrix<f64>, t: &DMatrix<f64>) -> Self {
        Self::accumulate(h.nrows(), h.ncols(), t.ncols(), |r| {
            (
                h.rows(r.start, r.len()).into_owned(),
                t.rows(r.start, r.len()).into_owned(),
            )
        })
    }

    /// Solves `(I/C + HᵀH) β = HᵀT` by Cholesky.
    pub fn solve_ridge(&self, c: f64) -> Result<DMatrix<f64>> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("regulariser C must be positive, got {c}")));
        }
        let mut a = self.gram.clone();
        let inv_c = 1.0 / c;
        for i in 0..a.nrows() {
            a[(i, i)] += inv_c;
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::Numeric("ridge system is not positive definite".into()))?;
        Ok(chol.solve(&self.cross))
    }
}

/// `β̂ = (I/C + HᵀH)⁻¹ HᵀT`, via a symmetric positive-definite solve.
pub fn ridge_solve(h: &DMatrix<f64>, t: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    if h.nrows() != t.nrows() {
        return Err(Error::dim("ridge_solve rows", h.nrows(), t.nrows()));
    }
    NormalEquations::from_dense(h, t).solve_ridge(c)
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix by power
/// iteration from the all-ones vector.
pub fn largest_eigenvalue(sym: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = sym.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = sym * &v;
        let norm = w.norm();
        if norm == 0.0 {
            // start vector in the null space: use the Gershgorin upper bound
            return (0..n)
                .map(|i| sym.row(i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        }
        let next = v.dot(&w);
        v = w / norm;
        let done = (next - lambda).abs() <= tol * next.abs().max(1.0);
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FistaSettings {
    pub max_iterations: usize,
    /// ℓ1 weight λ.
    pub l1_weight: f64,
    pub power_tolerance: f64,
    pub power_max_iterations: usize,
}

impl Default for FistaSettings {
    fn default() -> Self {
        FistaSettings {
            max_iterations: 50,
            l1_weight: 1e-3,
            power_tolerance: 1e-6,
            power_max_iterations: 100,
        }
    }
}

impl FistaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("FISTA needs at least one iteration".into()));
        }
        if !(self.l1_weight > 0.0) || !self.l1_weight.is_finite() {
            return Err(Error::Config(format!(
                "FISTA l1 weight must be positive, got {}",
                self.l1_weight
            )));
        }
        Ok(())
    }
}

pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    v.signum() * (v.abs() - threshold).max(0.0)
}

/// `‖Hβ − X‖²_F + λ‖β‖₁`.
pub fn lasso_objective(h: &DMatrix<f64>, x: &DMatrix<f64>, beta: &DMatrix<f64>, l1_weight: f64) -> f64 {
    (h * beta - x).norm_squared() + l1_weight * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Minimises `‖Hβ − X‖² + λ‖β‖₁` with FISTA from β = 0.
pub fn fista_l1(h: &DMatrix<f64>, x: &DMatrix<f64>, settings: &FistaSettings) -> Result<DMatrix<f64>> {
    if h.nrows() != x.nrows() {
        return Err(Error::dim("fista_l1 rows", h.nrows(), x.nrows()));
    }
    fista_l1_normal(&NormalEquations::from_dense(h, x), settings)
}

/// FISTA on precomputed `HᵀH` and `HᵀX`. The smooth term's gradient is
/// `2(HᵀHβ − HᵀX)` with Lipschitz constant `L = 2 λ_max(HᵀH)`; the step is
/// `1/L` and the shrink threshold `λ/L`.
pub fn fista_l1_normal(normal: &NormalEquations, settings: &FistaSettings) -> Result<DMatrix<f64>> {
    settings.validate()?;
    let gram = &normal.gram;
    let cross = &normal.cross;
    let mut beta = DMatrix::zeros(cross.nrows(), cross.ncols());

    let lipschitz = 2.0 * largest_eigenvalue(gram, settings.power_tolerance, settings.power_max_iterations);
    if lipschitz <= 0.0 || !lipschitz.is_finite() {
        return Ok(beta);
    }
    let step = 1.0 / lipschitz;
    let threshold = settings.l1_weight * step;

    let mut y = beta.clone();
    let mut t = 1.0f64;
    for _ in 0..settings.max_iterations {
        let grad = (gram * &y - cross) * 2.0;
        let mut next = &y - grad * step;
        next.apply(|v| *v = soft_threshold(*v, threshold));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &beta) * ((t - 1.0) / t_next);
        beta = next;
        t = t_next;
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_identity_and_scalar() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pseudoinverse(&i3).unwrap() - &i3).abs().max() < 1e-15);
        let two = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(pseudoinverse(&two).unwrap()[(0, 0)], 0.5);
        let zero = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(pseudoinverse(&zero).unwrap(), DMatrix::zeros(3, 2));
        let bad = DMatrix::from_element(1, 1, f64::NAN);
        assert!(pseudoinverse(&bad).is_err());
    }

    #[test]
    fn ridge_scalar_and_limit() {
        let h = DMatrix::from_element(1, 1, 1.0);
        let t = DMatrix::from_element(1, 1, 2.0);
        let b = ridge_solve(&h, &t, 1.0).unwrap();
        assert!((b[(0, 0)] - 1.0).abs() < 1e-15);

        let h = DMatrix::<f64>::identity(4, 4);
        let t = DMatrix::from_row_slice(4, 2, &[1.0, -2.0, 0.5, 3.0, 7.0, 0.0, -1.5, 2.5]);
        let b = ridge_solve(&h, &t, 1e12).unwrap();
        assert!((b - &t).abs().max() < 1e-6);
    }

    #[test]
    fn ridge_rejects_bad_input() {
        let h = DMatrix::<f64>::zeros(3, 2);
        let t = DMatrix::<f64>::zeros(2, 1);
        assert!(matches!(ridge_solve(&h, &t, 1.0), Err(Error::Dimension { .. })));
        let t = DMatrix::<f64>::zeros(3, 1);
        assert!(ridge_solve(&h, &t, 0.0).is_err());
        assert!(ridge_solve(&h, &t, -1.0).is_err());
    }

    #[test]
    fn fista_scalar_closed_form() {
        let h = DMatrix::from_element(1, 1, 1.0);
        let x = DMatrix::from_element(1, 1, 2.0);
        let s = FistaSettings {
            l1_weight: 1.0,
            ..Default::default()
        };
        let b = fista_l1(&h, &x, &s).unwrap();
        assert!((b[(0, 0)] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fista_zero_target_gives_zero() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.4, 1.0, 0.3, 0.3]);
        let x = DMatrix::zeros(3, 2);
        let b = fista_l1(&h, &x, &FistaSettings::default()).unwrap();
        assert_eq!(b, DMatrix::zeros(2, 2));
    }

    #[test]
    fn fista_settings_validated() {
        let h = DMatrix::from_element(1, 1, 1.0);
        let bad = FistaSettings {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(fista_l1(&h, &h, &bad).is_err());
        let bad = FistaSettings {
            l1_weight: 0.0,
            ..Default::default()
        };
        assert!(fista_l1(&h, &h, &bad).is_err());
        assert!(fista_l1(&h, &DMatrix::zeros(2, 1), &FistaSettings::default()).is_err());
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 2.0]));
        assert!((largest_eigenvalue(&d, 1e-12, 1000) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
    }
}
