//! Linear MMSE baseline: decoded measurements treated as `A x + d` with white
//! `d` of known variance.

use nalgebra::{DMatrix, DVector};
use qgamp_core::{Label, Matrix, Prior, ScalarQuantizer};

use crate::error::{HarnessError, Result};

const JITTER: f64 = 1e-12;

/// Decoder output for every label.
pub fn decode_all(q: &ScalarQuantizer, labels: &[Label]) -> Result<Vec<f64>> {
    Ok(labels.iter().map(|&l| q.decode(l)).collect::<Result<_, _>>()?)
}

/// `x̂ = μ + v Aᵀ (v A Aᵀ + σ_d² I)⁻¹ (ŷ − A μ)` for prior covariance `v I`.
///
/// With more measurements than unknowns the equivalent `n × n` system
/// `(AᵀA + (σ_d²/v) I) δ = Aᵀ (ŷ − A μ)` is solved instead.
pub fn lmmse_estimate(a: &Matrix, y_hat: &[f64], prior: &Prior, noise_var: f64) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if y_hat.len() != m {
        return Err(HarnessError::Spec(format!(
            "{} decoded values for {m} measurements",
            y_hat.len()
        )));
    }
    let (mu, v) = (prior.mean(), prior.variance());
    let am = DMatrix::from_row_slice(m, n, a.as_slice());
    let prior_mean = DVector::from_element(n, mu);
    let resid = DVector::from_column_slice(y_hat) - &am * &prior_mean;
    let delta = if m > n {
        let mut g = am.transpose() * &am;
        for j in 0..n {
            g[(j, j)] += noise_var / v;
        }
        spd_solve(g, am.transpose() * resid)?
    } else {
        let mut g = &am * am.transpose() * v;
        for i in 0..m {
            g[(i, i)] += noise_var;
        }
        am.transpose() * spd_solve(g, resid)? * v
    };
    Ok((prior_mean + delta).iter().copied().collect())
}

/// Cholesky solve, retried once with diagonal jitter.
fn spd_solve(g: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(c) = g.clone().cholesky() {
        return Ok(c.solve(&rhs));
    }
    let scale = g.diagonal().iter().fold(1.0f64, |a, d| a.max(d.abs()));
    let mut g = g;
    for i in 0..g.nrows() {
        g[(i, i)] += JITTER * scale;
    }
    g.cholesky().map(|c| c.solve(&rhs)).ok_or(HarnessError::Solve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian() -> Prior {
        Prior::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn noiseless_overdetermined_recovers_x() {
        let a = Matrix::from_row_major(3, 2, vec![1.0, 0.5, -0.3, 2.0, 0.7, 0.1]).unwrap();
        let x = [0.8, -1.1];
        let y = a.mul_vec(&x);
        let est = lmmse_estimate(&a, &y, &gaussian(), 0.0).unwrap();
        assert_relative_eq!(est[0], x[0], max_relative = 1e-10);
        assert_relative_eq!(est[1], x[1], max_relative = 1e-10);
    }

    #[test]
    fn orthogonal_mixing_is_a_scalar_wiener_filter() {
        let (c, s) = (0.6, 0.8);
        let a = Matrix::from_row_major(2, 2, vec![c, -s, s, c]).unwrap();
        let y = [0.3, -1.7];
        let prior = Prior::gaussian(0.5, 2.0).unwrap();
        let est = lmmse_estimate(&a, &y, &prior, 0.5).unwrap();
        // Aᵀ y is a noisy copy of x with noise 0.5.
        let aty = [c * y[0] + s * y[1], -s * y[0] + c * y[1]];
        for j in 0..2 {
            let want = 0.5 + 2.0 / 2.5 * (aty[j] - 0.5);
            assert_relative_eq!(est[j], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn both_forms_agree() {
        let a = Matrix::from_row_major(2, 3, vec![1.0, 0.2, -0.4, 0.3, -1.0, 0.8]).unwrap();
        let wide = lmmse_estimate(&a, &[0.4, -0.2], &gaussian(), 0.3).unwrap();
        // Stack a zero row so the m > n branch runs on an equivalent problem.
        let tall = Matrix::from_row_major(4, 3, {
            let mut d = a.as_slice().to_vec();
            d.extend([0.0; 6]);
            d
        })
        .unwrap();
        let est = lmmse_estimate(&tall, &[0.4, -0.2, 0.0, 0.0], &gaussian(), 0.3).unwrap();
        for j in 0..3 {
            assert_relative_eq!(est[j], wide[j], max_relative = 1e-10);
        }
    }
}
