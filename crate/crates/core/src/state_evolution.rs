//! State evolution: the scalar recursion that tracks GAMP's per-component
//! MSE for large i.i.d. Gaussian mixing matrices,
//!
//! ```text
//! τ̄₀ = var(x),   τ̄ₜ₊₁ = Ē_in( 1 / D̄₂(β τ̄ₜ, σ²) )
//! ```
//!
//! `Ē_in(ν)` averages the prior denoiser variance over `q = x + N(0, ν)`.
//! `D̄₂(ν, σ²)` averages the measurement precision over `ẑ ~ N(0, β E[x²] − ν)`
//! and `z = ẑ + N(0, ν)`. Given `ẑ`, the label is distributed over the cells
//! of `N(ẑ, ν + σ²)`, so the inner average is a finite sum,
//!
//! ```text
//! Σ_y p_y D₂(y, ẑ, ν') = Σ_y p_y (F_y − ẑ)² / ν'²,   ν' = ν + σ²,
//! ```
//!
//! which is smooth in `ẑ` with features of width `√ν'` around each cell
//! boundary. The outer integral uses composite Gauss-Legendre panels graded
//! around those boundaries.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::channels::interval_moments;
use crate::channels::Prior;
use crate::error::{Error, Result};
use crate::quad::{tidy_breaks, GaussLegendre};
use crate::quantizer::{QuantizerKind, ScalarQuantizer};

/// Gaussian integrals are truncated at this many standard deviations.
const RANGE_SDS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SeProblem {
    /// `n / m`
    pub beta: f64,
    pub sigma2: f64,
    pub prior: Prior,
    pub quantizer: ScalarQuantizer,
}

impl SeProblem {
    pub fn new(beta: f64, sigma2: f64, prior: Prior, quantizer: ScalarQuantizer) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidInput(alloc::format!("beta must be positive, got {beta}")));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(alloc::format!(
                "sigma2 must be non-negative, got {sigma2}"
            )));
        }
        Ok(SeProblem {
            beta,
            sigma2,
            prior,
            quantizer,
        })
    }

    /// Variance of the noiseless measurements, `β E[x²]`.
    pub fn measurement_variance(&self) -> f64 {
        self.beta * self.prior.second_moment()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeConfig {
    /// Gauss-Legendre nodes per panel.
    pub quad_nodes: usize,
    pub max_iters: usize,
    /// Stop when `|τ̄ₜ₊₁ − τ̄ₜ| < fp_tol · τ̄₀`.
    pub fp_tol: f64,
    pub nu_floor: f64,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            quad_nodes: 12,
            max_iters: 200,
            fp_tol: 1e-10,
            nu_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrajectory {
    pub taus: Vec<f64>,
    pub converged: bool,
    pub fixed_point: f64,
    /// Iterations at which `ν` exceeded `β E[x²]` and was clamped.
    pub clamped: Vec<usize>,
}

impl SeTrajectory {
    /// Number of recursion steps taken.
    pub fn steps(&self) -> usize {
        self.taus.len() - 1
    }
}

/// Value of `D̄₂` plus whether its argument had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2Bar {
    pub value: f64,
    pub clamped: bool,
}

/// Reusable quadrature state.
#[derive(Debug, Clone)]
pub struct SeEvaluator {
    rule: GaussLegendre,
    cfg: SeConfig,
}

impl SeEvaluator {
    pub fn new(cfg: SeConfig) -> Result<Self> {
        if cfg.quad_nodes < 3 {
            return Err(Error::Config("quad_nodes must be at least 3".into()));
        }
        if cfg.max_iters == 0 || !(cfg.fp_tol >= 0.0) || !(cfg.nu_floor > 0.0) {
            return Err(Error::Config("invalid state-evolution configuration".into()));
        }
        Ok(SeEvaluator {
            rule: GaussLegendre::new(cfg.quad_nodes),
            cfg,
        })
    }

    pub fn config(&self) -> &SeConfig {
        &self.cfg
    }

    /// `Ē_in(ν)`. Closed form for the Gaussian prior.
    pub fn ein_bar(&self, nu: f64, prior: &Prior) -> f64 {
        if nu == f64::INFINITY {
            return prior.variance();
        }
        match *prior {
            Prior::Gaussian { variance, .. } => variance * nu / (variance + nu),
            Prior::GaussBernoulli { .. } => self.ein_bar_quadrature(nu, prior),
        }
    }

    /// `Ē_in(ν)` by quadrature over the mixture law of `q`, for any prior.
    pub fn ein_bar_quadrature(&self, nu: f64, prior: &Prior) -> f64 {
        if nu == f64::INFINITY {
            return prior.variance();
        }
        let components: [(f64, f64, f64); 2] = match *prior {
            Prior::Gaussian { mean, variance } => [(1.0, mean, variance + nu), (0.0, 0.0, 1.0)],
            Prior::GaussBernoulli { rho, on_variance } => [(rho, 0.0, on_variance + nu), (1.0 - rho, 0.0, nu)],
        };
        let root_nu = sqrt(nu);
        let mut total = 0.0;
        for &(w, mu, var) in &components {
            if w == 0.0 {
                continue;
            }
            let sd = sqrt(var);
            let (lo, hi) = (mu - RANGE_SDS * sd, mu + RANGE_SDS * sd);
            let mut pts = Vec::with_capacity(48);
            for k in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
                pts.push(mu - k * sd);
                pts.push(mu + k * sd);
            }
            // The sparse posterior switches between its branches a few √ν
            // from the origin.
            for k in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0] {
                pts.push(k * root_nu);
                pts.push(-k * root_nu);
            }
            let breaks = tidy_breaks(pts, lo, hi, 1e-3 * root_nu.min(sd));
            let integral = self.rule.integrate_panels(&breaks, |q| {
                let t = (q - mu) / sd;
                let dens = libm::exp(-0.5 * t * t) / (sd * 2.506_628_274_631_000_2);
                dens * prior.denoise(q, nu).1
            });
            total += w * integral;
        }
        total
    }

    /// `D̄₂(ν, σ²)`.
    pub fn d2_bar(&self, nu: f64, prob: &SeProblem) -> D2Bar {
        let cap = prob.measurement_variance();
        let (nu, clamped) = if nu > cap {
            (cap - self.cfg.nu_floor, true)
        } else {
            (nu, false)
        };
        let nu = nu.max(self.cfg.nu_floor);
        let total = nu + prob.sigma2;
        let spread_var = (cap - nu).max(0.0);
        let value = if spread_var == 0.0 {
            label_information(&prob.quantizer, 0.0, total)
        } else if let Some(period) = self.wrapped_period(prob, sqrt(spread_var)) {
            self.d2_bar_periodic(prob, sqrt(spread_var), sqrt(total), period)
        } else {
            let s = sqrt(spread_var);
            let w = sqrt(total);
            let (lo, hi) = (-RANGE_SDS * s, RANGE_SDS * s);
            let mut pts = Vec::new();
            for k in [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0] {
                pts.push(k * s);
                pts.push(-k * s);
            }
            for b in prob.quantizer.boundaries_in(lo - RANGE_SDS * w, hi + RANGE_SDS * w) {
                for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                    pts.push(b + k * w);
                }
            }
            let breaks = tidy_breaks(pts, lo, hi, 0.25 * w.min(s));
            self.rule.integrate_panels(&breaks, |zh| {
                let t = zh / s;
                let dens = libm::exp(-0.5 * t * t) / (s * 2.506_628_274_631_000_2);
                dens * label_information(&prob.quantizer, zh, total)
            })
        };
        D2Bar {
            value: value.max(0.0),
            clamped,
        }
    }

    /// Period of the label information in `ẑ` when it is shorter than the
    /// integration range.
    fn wrapped_period(&self, prob: &SeProblem, s: f64) -> Option<f64> {
        match prob.quantizer.kind() {
            QuantizerKind::Modulo { step, labels } => {
                let period = step * labels as f64;
                (period < 2.0 * RANGE_SDS * s).then_some(period)
            }
            _ => None,
        }
    }

    /// `∫ φ_s(ẑ) g(ẑ) dẑ` for `g` with period `P`, folded onto `[0, P)`
    /// against the wrapped density `Σₖ φ_s(u + kP)` restricted to `|ẑ| ≤ 10s`.
    fn d2_bar_periodic(&self, prob: &SeProblem, s: f64, w: f64, period: f64) -> f64 {
        let total = w * w;
        let mut pts = Vec::new();
        for b in prob.quantizer.boundaries_in(-RANGE_SDS * w, period + RANGE_SDS * w) {
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                pts.push(b + k * w);
            }
        }
        let coarse = 0.5 * s;
        let mut u = coarse;
        while u < period {
            pts.push(u);
            u += coarse;
        }
        let breaks = tidy_breaks(pts, 0.0, period, 0.25 * w.min(s));
        let reach = RANGE_SDS * s;
        self.rule.integrate_panels(&breaks, |u| {
            let k_lo = libm::ceil((-reach - u) / period) as i64;
            let k_hi = libm::floor((reach - u) / period) as i64;
            let mut dens = 0.0;
            for k in k_lo..=k_hi {
                let t = (u + k as f64 * period) / s;
                dens += libm::exp(-0.5 * t * t);
            }
            dens /= s * 2.506_628_274_631_000_2;
            dens * label_information(&prob.quantizer, u, total)
        })
    }

    /// Runs the recursion from `τ̄₀ = var(x)`.
    pub fn run(&self, prob: &SeProblem) -> SeTrajectory {
        let tau0 = prob.prior.variance();
        let mut taus = vec![tau0];
        let mut clamped = Vec::new();
        let mut converged = false;
        for t in 0..self.cfg.max_iters {
            let prev = taus[t];
            let d2 = self.d2_bar(prob.beta * prev, prob);
            if d2.clamped {
                clamped.push(t);
            }
            let next = if d2.value > 0.0 {
                self.ein_bar(1.0 / d2.value, &prob.prior)
            } else {
                prob.prior.variance()
            };
            taus.push(next);
            if (next - prev).abs() < self.cfg.fp_tol * tau0 {
                converged = true;
                break;
            }
        }
        let fixed_point = taus[taus.len() - 1];
        SeTrajectory {
            taus,
            converged,
            fixed_point,
            clamped,
        }
    }
}

/// `Σ_y p_y (F_y − ẑ)² / ν²` for the quantizer input `s ~ N(ẑ, ν)`.
fn label_information(q: &ScalarQuantizer, z_hat: f64, nu: f64) -> f64 {
    let w = sqrt(nu);
    let (lo, hi) = (z_hat - RANGE_SDS * w, z_hat + RANGE_SDS * w);
    // Per label: (mass, Σ mass·(mean − ẑ)).
    let mut acc = vec![(0.0f64, 0.0f64); q.num_labels() as usize];
    q.for_each_cell_in(lo, hi, |label, iv| {
        let m = interval_moments(iv, z_hat, nu);
        let mass = libm::exp(m.log_mass);
        if mass > 0.0 {
            let slot = &mut acc[label.index()];
            slot.0 += mass;
            slot.1 += mass * (m.mean - z_hat);
        }
    });
    let sum: f64 = acc.iter().filter(|(p, _)| *p > 0.0).map(|(p, d)| d * d / p).sum();
    sum / (nu * nu)
}

/// `Ē_in(ν)` with a fresh evaluator.
pub fn ein_bar(nu: f64, prior: &Prior, cfg: &SeConfig) -> Result<f64> {
    Ok(SeEvaluator::new(*cfg)?.ein_bar(nu, prior))
}

/// `D̄₂(ν, σ²)` with a fresh evaluator.
pub fn d2_bar(nu: f64, prob: &SeProblem, cfg: &SeConfig) -> Result<D2Bar> {
    Ok(SeEvaluator::new(*cfg)?.d2_bar(nu, prob))
}

/// Runs the state-evolution recursion.
pub fn se_run(prob: &SeProblem, cfg: &SeConfig) -> Result<SeTrajectory> {
    Ok(SeEvaluator::new(*cfg)?.run(prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian() -> Prior {
        Prior::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn ein_bar_gaussian_closed_form_matches_quadrature() {
        let ev = SeEvaluator::new(SeConfig::default()).unwrap();
        for nu in [1e-6, 1e-3, 0.1, 1.0, 7.0, 1e4] {
            let closed = ev.ein_bar(nu, &gaussian());
            assert_relative_eq!(closed, nu / (1.0 + nu), max_relative = 1e-15);
            assert_relative_eq!(ev.ein_bar_quadrature(nu, &gaussian()), closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn ein_bar_limits() {
        let ev = SeEvaluator::new(SeConfig::default()).unwrap();
        let gb = Prior::sparse_unit(1.0 / 32.0).unwrap();
        assert!(ev.ein_bar(1e-10, &gb) < 1e-9);
        assert_relative_eq!(ev.ein_bar(1e10, &gb), 1.0, max_relative = 1e-6);
        assert_eq!(ev.ein_bar(f64::INFINITY, &gb), 1.0);
    }

    #[test]
    fn uninformative_quantizer_gives_zero_precision() {
        let q = ScalarQuantizer::regular(vec![], None).unwrap();
        let prob = SeProblem::new(0.5, 0.0, gaussian(), q).unwrap();
        let ev = SeEvaluator::new(SeConfig::default()).unwrap();
        assert_eq!(ev.d2_bar(0.2, &prob).value, 0.0);
        let traj = ev.run(&prob);
        assert!(traj.converged);
        assert!(traj.taus.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn degenerate_spread_collapses_to_point_evaluation() {
        // ν = β τ̂_init: ẑ ≡ 0, so D̄₂ is the label information at ẑ = 0.
        let q = ScalarQuantizer::regular(vec![0.0], None).unwrap();
        let prob = SeProblem::new(0.5, 0.0, gaussian(), q).unwrap();
        let ev = SeEvaluator::new(SeConfig::default()).unwrap();
        let d = ev.d2_bar(0.5, &prob);
        // Two half-normal cells: Σ p (F−ẑ)² / ν² = (2/π)·ν / ν² = 2/(π ν).
        assert_relative_eq!(d.value, 2.0 / (core::f64::consts::PI * 0.5), max_relative = 1e-12);
        assert!(!d.clamped);
        let d = ev.d2_bar(0.9, &prob);
        assert!(d.clamped);
    }

    #[test]
    fn invalid_configuration() {
        let cfg = SeConfig {
            quad_nodes: 2,
            ..SeConfig::default()
        };
        assert!(SeEvaluator::new(cfg).is_err());
        assert!(SeProblem::new(0.0, 0.0, gaussian(), ScalarQuantizer::modulo(1.0, 2).unwrap()).is_err());
    }

    #[test]
    fn folded_modulo_integral_matches_direct_integration() {
        // A binned quantizer with the same cells over ±40 is integrated
        // directly over the whole range.
        let (step, labels) = (0.3, 4u32);
        let modulo = ScalarQuantizer::modulo(step, labels).unwrap();
        let ks: Vec<i64> = (-133..=133).collect();
        let thresholds: Vec<f64> = ks.iter().map(|&k| k as f64 * step).collect();
        let binning: Vec<u32> = (-134..=133i64)
            .map(|k| (k.rem_euclid(labels as i64) + 1) as u32)
            .collect();
        let binned = ScalarQuantizer::binned(thresholds, binning, None).unwrap();
        let ev = SeEvaluator::new(SeConfig::default()).unwrap();
        for nu in [1e-4, 1e-2, 0.2] {
            let a = ev
                .d2_bar(nu, &SeProblem::new(0.5, 0.0, gaussian(), modulo.clone()).unwrap())
                .value;
            let b = ev
                .d2_bar(nu, &SeProblem::new(0.5, 0.0, gaussian(), binned.clone()).unwrap())
                .value;
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }
}
