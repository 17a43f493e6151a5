//! Random problem instances `y = Q(A x + w)`.

use qgamp_core::{Label, Matrix, Prior, ScalarQuantizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

/// Generator for trial `trial` at `m` measurements: the ChaCha key comes from
/// `seed`, the stream id from `(m, trial)`. Trials are therefore independent
/// of scheduling and of which other trials run.
pub fn trial_rng(seed: u64, m: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((m as u64) << 32) | trial as u64);
    rng
}

/// One draw of the measurement model, before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: Vec<f64>,
    pub a: Matrix,
    /// `A x`
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl Instance {
    /// Quantizer input `A x + w`.
    pub fn quantizer_input(&self) -> Vec<f64> {
        self.z.iter().zip(&self.w).map(|(z, w)| z + w).collect()
    }

    pub fn labels(&self, q: &ScalarQuantizer) -> Result<Vec<Label>> {
        Ok(self
            .quantizer_input()
            .into_iter()
            .map(|s| q.encode(s))
            .collect::<Result<_, _>>()?)
    }

    /// `‖A x‖_∞`
    pub fn z_inf_norm(&self) -> f64 {
        self.z.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

pub fn sample_prior<R: Rng + ?Sized>(prior: &Prior, rng: &mut R) -> f64 {
    match *prior {
        Prior::Gaussian { mean, variance } => mean + variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
        Prior::GaussBernoulli { rho, on_variance } => {
            // Both draws are always taken so the stream layout does not
            // depend on the support.
            let active = rng.random::<f64>() < rho;
            let g: f64 = rng.sample(StandardNormal);
            if active {
                on_variance.sqrt() * g
            } else {
                0.0
            }
        }
    }
}

/// `x` i.i.d. from the prior, `A` i.i.d. `N(0, 1/m)`, `w` i.i.d. `N(0, σ²)`,
/// drawn in that order.
pub fn generate_instance<R: Rng + ?Sized>(n: usize, m: usize, prior: &Prior, sigma2: f64, rng: &mut R) -> Instance {
    let x: Vec<f64> = (0..n).map(|_| sample_prior(prior, rng)).collect();
    let scale = (1.0 / m as f64).sqrt();
    let data: Vec<f64> = (0..m * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let a = Matrix::from_row_major(m, n, data).expect("dimensions match by construction");
    let z = a.mul_vec(&x);
    let sd = sigma2.sqrt();
    let w = (0..m)
        .map(|_| {
            if sd > 0.0 {
                sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        })
        .collect();
    Instance { x, a, z, w }
}
