//! Canned desk-scale sweeps.
//!
//! | figure | signal | quantizers | ratios | default trials |
//! |---|---|---|---|---|
//! | 4 | `N(0,1)`, n = 100 | 16 uniform levels on ±3σ_z | 2..=10 | 200 |
//! | 5 | `N(0,1)`, n = 100 | Lloyd / SE-regular / SE-modulo, 2–16 labels | 2 | 100 |
//! | 6 | Gauss-Bernoulli ρ = 1/32, n = 1024 | 16 levels on ±‖Ax‖_∞ | 0.2..=1 | 100 |
//! | 7 | Gauss-Bernoulli ρ = 1/32, n = 256 | Lloyd / SE-regular / SE-modulo, 2–8 labels | 0.25..=1 | 50 |
//!
//! Rate in figures 5 and 7 is `(m/n) log₂(labels)` bits per component.

use qgamp_core::{Prior, UniformFamily};

use crate::experiment::{Estimator, ExperimentSpec, QuantizerRecipe};

pub const SPARSE_RHO: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl Figure {
    pub fn default_trials(self) -> usize {
        match self {
            Figure::Fig4 => 200,
            Figure::Fig5 | Figure::Fig6 => 100,
            Figure::Fig7 => 50,
        }
    }

    /// Experiments making up the figure.
    pub fn specs(self, trials: Option<usize>, seed: u64) -> Vec<ExperimentSpec> {
        let trials = trials.unwrap_or(self.default_trials());
        let mut specs = match self {
            Figure::Fig4 => vec![fig4((2..=10).map(f64::from).collect())],
            Figure::Fig5 => comparison(gaussian(), 100, vec![2.0], &[2, 4, 8, 16]),
            Figure::Fig6 => vec![fig6((2..=10).map(|k| k as f64 / 10.0).collect())],
            Figure::Fig7 => comparison(sparse(), 256, vec![0.25, 0.5, 0.75, 1.0], &[2, 4, 8]),
        };
        for s in &mut specs {
            s.trials = trials;
            s.seed = seed;
        }
        specs
    }
}

fn gaussian() -> Prior {
    Prior::gaussian(0.0, 1.0).expect("unit variance is valid")
}

fn sparse() -> Prior {
    Prior::sparse_unit(SPARSE_RHO).expect("rho in (0, 1]")
}

/// Oversampled Gaussian signal, 16-level uniform quantizer on `±3σ_z`, GAMP
/// against LMMSE.
pub fn fig4(m_over_n: Vec<f64>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(
        100,
        m_over_n,
        gaussian(),
        QuantizerRecipe::Uniform {
            levels: 16,
            loading: 3.0,
        },
    );
    s.estimators = vec![Estimator::Gamp, Estimator::Lmmse];
    s.trials = Figure::Fig4.default_trials();
    s
}

/// Sparse signal, 16-level quantizer with granular region `±‖Ax‖_∞`, GAMP
/// against LMMSE.
pub fn fig6(m_over_n: Vec<f64>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(1024, m_over_n, sparse(), QuantizerRecipe::Adaptive { levels: 16 });
    s.estimators = vec![Estimator::Gamp, Estimator::Lmmse];
    s.trials = Figure::Fig6.default_trials();
    s
}

/// GAMP with the three quantizer designs at each label count.
pub fn comparison(prior: Prior, n: usize, m_over_n: Vec<f64>, counts: &[u32]) -> Vec<ExperimentSpec> {
    let mut out = Vec::new();
    for &k in counts {
        for recipe in [
            QuantizerRecipe::Lloyd { levels: k },
            QuantizerRecipe::designed(UniformFamily::Regular, k),
            QuantizerRecipe::designed(UniformFamily::Modulo, k),
        ] {
            let mut s = ExperimentSpec::new(n, m_over_n.clone(), prior, recipe.clone());
            s.label = Some(recipe.tag());
            out.push(s);
        }
    }
    out
}
