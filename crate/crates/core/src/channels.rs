//! Scalar estimation kernels.
//!
//! * [`trunc_gauss_moments`]: mass, mean and variance of a Gaussian restricted
//!   to a union of intervals.
//! * [`Prior::denoise`]: posterior mean/variance of `x` from `q = x + N(0, ν)`.
//! * [`OutputChannel`]: posterior moments of the quantizer input given its
//!   label, and the derived measurement-side updates `(u, τ)`.

use alloc::format;

use libm::{exp, log, sqrt};

use crate::error::{Error, Result};
use crate::quantizer::{CellSet, GaussianSource, Interval, Label, ScalarQuantizer};
use crate::special::{log_add_exp, std_interval_moments, StdIntervalMoments};

/// Cells carrying less probability than this are treated as degenerate.
pub const DEGENERATE_MASS: f64 = 1e-300;

/// Floor applied to the measurement-side precision `τ`.
pub const TAU_MIN: f64 = 1e-12;

/// Moments of `t ~ N(mean, variance)` conditioned on `t ∈ cells`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub mass: f64,
    pub log_mass: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Moments of `N(mean, variance)` on a single interval; `log_mass` is
/// `-inf` when the interval collapses to a point at this scale.
pub(crate) fn interval_moments(iv: Interval, mean: f64, variance: f64) -> StdIntervalMoments {
    let sd = sqrt(variance);
    let a = (iv.lo() - mean) / sd;
    let b = (iv.hi() - mean) / sd;
    if !(a < b) {
        return StdIntervalMoments {
            log_mass: f64::NEG_INFINITY,
            mean: iv.lo(),
            variance: 0.0,
        };
    }
    let m = std_interval_moments(a, b);
    StdIntervalMoments {
        log_mass: m.log_mass,
        mean: mean + sd * m.mean,
        variance: variance * m.variance,
    }
}

/// Mass, mean and variance of `t ~ N(mean, variance)` on `cells`.
///
/// Each interval is handled in standardized coordinates and the pieces are
/// combined by total mean/variance with weights formed in the log domain.
/// Returns [`Error::DegenerateCell`] when the total mass is below
/// [`DEGENERATE_MASS`].
pub fn trunc_gauss_moments(cells: &CellSet, mean: f64, variance: f64) -> Result<GaussianMoments> {
    if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "truncated moments need finite mean and positive variance, got ({mean}, {variance})"
        )));
    }
    let ivs = cells.intervals();
    if let [iv] = ivs {
        let m = interval_moments(*iv, mean, variance);
        return finish(m.log_mass, m.mean, m.variance);
    }

    let mut parts = alloc::vec::Vec::with_capacity(ivs.len());
    let mut log_mass = f64::NEG_INFINITY;
    for iv in ivs {
        let m = interval_moments(*iv, mean, variance);
        log_mass = log_add_exp(log_mass, m.log_mass);
        parts.push(m);
    }
    if log_mass == f64::NEG_INFINITY {
        return Err(Error::DegenerateCell);
    }
    let mut m1 = 0.0;
    for p in &parts {
        m1 += exp(p.log_mass - log_mass) * p.mean;
    }
    let mut var = 0.0;
    for p in &parts {
        let d = p.mean - m1;
        var += exp(p.log_mass - log_mass) * (p.variance + d * d);
    }
    finish(log_mass, m1, var)
}

fn finish(log_mass: f64, mean: f64, variance: f64) -> Result<GaussianMoments> {
    if !(log_mass >= log(DEGENERATE_MASS)) {
        return Err(Error::DegenerateCell);
    }
    Ok(GaussianMoments {
        mass: exp(log_mass),
        log_mass,
        mean,
        variance: variance.max(0.0),
    })
}

/// I.i.d. prior on the signal components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Zero with probability `1 - rho`, `N(0, on_variance)` otherwise.
    GaussBernoulli {
        rho: f64,
        on_variance: f64,
    },
}

impl Prior {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gaussian prior needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Prior::Gaussian { mean, variance })
    }

    pub fn gauss_bernoulli(rho: f64, on_variance: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) || !on_variance.is_finite() || on_variance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gauss-bernoulli prior needs rho in (0, 1] and positive variance, got ({rho}, {on_variance})"
            )));
        }
        Ok(Prior::GaussBernoulli { rho, on_variance })
    }

    /// Sparse prior with unit marginal variance: on-variance `1/rho`.
    pub fn sparse_unit(rho: f64) -> Result<Self> {
        Self::gauss_bernoulli(rho, 1.0 / rho)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Prior::Gaussian { mean, .. } => mean,
            Prior::GaussBernoulli { .. } => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Prior::Gaussian { variance, .. } => variance,
            Prior::GaussBernoulli { rho, on_variance } => rho * on_variance,
        }
    }

    /// `E[x²]`
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Posterior mean and variance of `x` given `q = x + v`, `v ~ N(0, nu)`.
    pub fn denoise(&self, q: f64, nu: f64) -> (f64, f64) {
        match *self {
            Prior::Gaussian { mean, variance } => {
                let s = variance + nu;
                ((variance * q + nu * mean) / s, variance * nu / s)
            }
            Prior::GaussBernoulli { rho, on_variance } => {
                let s = on_variance + nu;
                // log-odds of the active component
                let log_on = log(rho) - 0.5 * log(s) - 0.5 * q * q / s;
                let log_off = libm::log1p(-rho) - 0.5 * log(nu) - 0.5 * q * q / nu;
                let pi = sigmoid(log_on - log_off);
                let m1 = on_variance * q / s;
                let v1 = on_variance * nu / s;
                (pi * m1, pi * v1 + pi * (1.0 - pi) * m1 * m1)
            }
        }
    }
}

#[inline]
fn sigmoid(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + exp(-d))
    } else {
        let e = exp(d);
        e / (1.0 + e)
    }
}

/// Posterior moments of the noiseless quantizer input given its label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMoments {
    pub mean: f64,
    pub variance: f64,
    /// Set when the label's cell had no mass and the edge fallback was used.
    pub degenerate: bool,
}

/// Measurement-side GAMP quantities for one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementUpdate {
    pub u: f64,
    pub tau: f64,
    /// `τ` before clamping to `[TAU_MIN, 1/ν]`.
    pub raw_tau: f64,
    pub degenerate: bool,
}

/// `y = Q(z + w)` with `w ~ N(0, noise_variance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputChannel {
    quantizer: ScalarQuantizer,
    noise_variance: f64,
}

impl OutputChannel {
    pub fn new(quantizer: ScalarQuantizer, noise_variance: f64) -> Result<Self> {
        if !noise_variance.is_finite() || noise_variance < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(OutputChannel {
            quantizer,
            noise_variance,
        })
    }

    pub fn quantizer(&self) -> &ScalarQuantizer {
        &self.quantizer
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Moments of the quantizer input `s ~ N(z_hat, nu + σ²)` given its label.
    fn input_moments(&self, y: Label, z_hat: f64, nu_total: f64) -> Result<OutputMoments> {
        let ctx = GaussianSource::new(z_hat, nu_total)?;
        let cells = self.quantizer.cell_set(y, &ctx)?;
        match trunc_gauss_moments(&cells, z_hat, nu_total) {
            Ok(m) => Ok(OutputMoments {
                mean: m.mean,
                variance: m.variance,
                degenerate: false,
            }),
            Err(Error::DegenerateCell) => Ok(OutputMoments {
                mean: cells.nearest_endpoint(z_hat).unwrap_or(z_hat),
                variance: TAU_MIN * nu_total,
                degenerate: true,
            }),
            Err(e) => Err(e),
        }
    }

    fn check(&self, z_hat: f64, nu: f64) -> Result<()> {
        if !z_hat.is_finite() || !nu.is_finite() || nu <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "output moments need finite z_hat and positive nu, got ({z_hat}, {nu})"
            )));
        }
        Ok(())
    }

    /// Conditional mean and variance of `z ~ N(z_hat, nu)` given label `y`.
    ///
    /// With `σ² > 0` the label constrains `s = z + w`; the moments of `s` are
    /// computed under `N(z_hat, nu + σ²)` and mapped back through the jointly
    /// Gaussian pair `(z, s)`.
    pub fn output_moments(&self, y: Label, z_hat: f64, nu: f64) -> Result<OutputMoments> {
        self.check(z_hat, nu)?;
        let sigma2 = self.noise_variance;
        let total = nu + sigma2;
        let s = self.input_moments(y, z_hat, total)?;
        if sigma2 == 0.0 {
            return Ok(s);
        }
        let gain = nu / total;
        Ok(OutputMoments {
            mean: z_hat + gain * (s.mean - z_hat),
            variance: gain * gain * s.variance + nu * sigma2 / total,
            degenerate: s.degenerate,
        })
    }

    /// `u = (F_out - ẑ)/ν`, `τ = (1 - E_out/ν)/ν`, clamped to `[TAU_MIN, 1/ν]`.
    ///
    /// `nu` is the prior variance of `z`. The result equals the quantizer-input
    /// form `(E[s|y] - ẑ)/(ν+σ²)`, `(1 - var(s|y)/(ν+σ²))/(ν+σ²)`, which is how
    /// it is evaluated.
    pub fn d1_d2(&self, y: Label, z_hat: f64, nu: f64) -> Result<MeasurementUpdate> {
        self.check(z_hat, nu)?;
        let total = nu + self.noise_variance;
        let s = self.input_moments(y, z_hat, total)?;
        let u = (s.mean - z_hat) / total;
        let raw_tau = (1.0 - s.variance / total) / total;
        Ok(MeasurementUpdate {
            u,
            tau: raw_tau.clamp(TAU_MIN, 1.0 / nu),
            raw_tau,
            degenerate: s.degenerate,
        })
    }

    /// `p(y | z)`: the probability that `z + w` falls in the cells of `y`.
    pub fn likelihood(&self, y: Label, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::InvalidInput(format!("likelihood at {z}")));
        }
        if self.noise_variance == 0.0 {
            return Ok(if self.quantizer.encode(z)? == y { 1.0 } else { 0.0 });
        }
        let ctx = GaussianSource::new(z, self.noise_variance)?;
        let cells = self.quantizer.cell_set(y, &ctx)?;
        Ok(match trunc_gauss_moments(&cells, z, self.noise_variance) {
            Ok(m) => m.mass.min(1.0),
            Err(Error::DegenerateCell) => 0.0,
            Err(e) => return Err(e),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn lab(v: u32) -> Label {
        Label::new(v).unwrap()
    }

    fn half_line() -> CellSet {
        CellSet::single(Interval::new(0.0, f64::INFINITY).unwrap())
    }

    #[test]
    fn whole_line_is_identity() {
        let m = trunc_gauss_moments(&CellSet::real_line(), 1.7, 0.3).unwrap();
        assert_eq!((m.mass, m.mean, m.variance), (1.0, 1.7, 0.3));
    }

    #[test]
    fn half_normal() {
        let m = trunc_gauss_moments(&half_line(), 0.0, 1.0).unwrap();
        assert_relative_eq!(m.mass, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m.mean, (2.0 / PI).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(m.variance, 1.0 - 2.0 / PI, max_relative = 1e-13);
    }

    #[test]
    fn symmetric_pair_has_zero_mean() {
        let cells = CellSet::new(vec![
            Interval::new(-2.0, -1.0).unwrap(),
            Interval::new(1.0, 2.0).unwrap(),
        ])
        .unwrap();
        let m = trunc_gauss_moments(&cells, 0.0, 1.0).unwrap();
        assert!(m.mean.abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_signalled() {
        let cells = CellSet::single(Interval::new(100.0, 101.0).unwrap());
        assert_eq!(trunc_gauss_moments(&cells, 0.0, 1.0), Err(Error::DegenerateCell));
    }

    #[test]
    fn invalid_variance_is_rejected() {
        assert!(matches!(
            trunc_gauss_moments(&half_line(), 0.0, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gaussian_denoiser_is_conjugate() {
        let p = Prior::gaussian(0.0, 1.0).unwrap();
        assert_eq!(p.denoise(2.0, 1.0), (1.0, 0.5));
        let p = Prior::gaussian(0.4, 2.0).unwrap();
        let (f, e) = p.denoise(-1.3, 0.7);
        assert_relative_eq!(f, (2.0 * -1.3 + 0.7 * 0.4) / 2.7, max_relative = 1e-15);
        assert_relative_eq!(e, 2.0 * 0.7 / 2.7, max_relative = 1e-15);
    }

    #[test]
    fn gauss_bernoulli_denoiser_is_odd() {
        let p = Prior::gauss_bernoulli(1.0 / 32.0, 32.0).unwrap();
        assert_eq!(p.denoise(0.0, 0.3).0, 0.0);
        let (a, va) = p.denoise(1.1, 0.3);
        let (b, vb) = p.denoise(-1.1, 0.3);
        assert_eq!(a, -b);
        assert_eq!(va, vb);
    }

    #[test]
    fn gauss_bernoulli_handles_extreme_pseudo_data() {
        let p = Prior::gauss_bernoulli(1.0 / 32.0, 32.0).unwrap();
        let (f, e) = p.denoise(1e4, 1e-6);
        assert!(f.is_finite() && e.is_finite());
        assert_relative_eq!(f, 1e4, max_relative = 1e-6);
        let (f, e) = p.denoise(1e-3, 1e-8);
        assert!(f.is_finite() && e >= 0.0);
    }

    #[test]
    fn uninformative_observation_returns_prior() {
        for p in [
            Prior::gaussian(0.3, 1.5).unwrap(),
            Prior::gauss_bernoulli(1.0 / 32.0, 32.0).unwrap(),
            Prior::gauss_bernoulli(1.0, 2.0).unwrap(),
        ] {
            let (f, e) = p.denoise(0.8, 1e12);
            assert!((f - p.mean()).abs() <= 1e-6 * p.variance().sqrt());
            assert_relative_eq!(e, p.variance(), max_relative = 1e-6);
        }
    }

    #[test]
    fn gauss_bernoulli_derivative_identity() {
        let p = Prior::gauss_bernoulli(1.0 / 32.0, 32.0).unwrap();
        for &(q, nu) in &[(0.3f64, 0.1f64), (1.5, 0.5), (-2.0, 0.05), (0.02, 1e-3), (4.0, 2.0)] {
            let h = 1e-6 * nu.sqrt();
            let d = (p.denoise(q + h, nu).0 - p.denoise(q - h, nu).0) / (2.0 * h);
            let e = p.denoise(q, nu).1;
            assert_relative_eq!(d, e / nu, max_relative = 1e-5);
        }
    }

    fn regular(thresholds: &[f64]) -> ScalarQuantizer {
        ScalarQuantizer::regular(thresholds.to_vec(), None).unwrap()
    }

    #[test]
    fn output_moments_whole_line() {
        let ch = OutputChannel::new(regular(&[]), 0.0).unwrap();
        let m = ch.output_moments(lab(1), 0.4, 0.9).unwrap();
        assert_eq!((m.mean, m.variance), (0.4, 0.9));
        let d = ch.d1_d2(lab(1), 0.4, 0.9).unwrap();
        assert_eq!(d.u, 0.0);
        assert_eq!(d.raw_tau, 0.0);
        assert_eq!(d.tau, TAU_MIN);
    }

    #[test]
    fn output_moments_half_line() {
        let ch = OutputChannel::new(regular(&[0.0]), 0.0).unwrap();
        let m = ch.output_moments(lab(2), 0.0, 1.0).unwrap();
        assert_relative_eq!(m.mean, (2.0 / PI).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(m.variance, 1.0 - 2.0 / PI, max_relative = 1e-13);
        let d = ch.d1_d2(lab(2), 0.0, 1.0).unwrap();
        assert_relative_eq!(d.u, (2.0 / PI).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d.tau, 2.0 / PI, max_relative = 1e-13);
    }

    #[test]
    fn noisy_channel_matches_quantizer_input_form() {
        let q = regular(&[-1.0, 0.0, 0.5, 2.0]);
        let (sigma2, nu, z_hat) = (0.3, 0.8, 0.2);
        let noisy = OutputChannel::new(q.clone(), sigma2).unwrap();
        let clean = OutputChannel::new(q, 0.0).unwrap();
        for y in 1..=5 {
            let a = noisy.d1_d2(lab(y), z_hat, nu).unwrap();
            // Noiseless channel evaluated at the total variance.
            let s = clean.output_moments(lab(y), z_hat, nu + sigma2).unwrap();
            let total = nu + sigma2;
            assert_relative_eq!(a.u, (s.mean - z_hat) / total, max_relative = 1e-13);
            assert_relative_eq!(a.raw_tau, (1.0 - s.variance / total) / total, max_relative = 1e-12);
            // And the z-domain moments reproduce the same update.
            let z = noisy.output_moments(lab(y), z_hat, nu).unwrap();
            assert_relative_eq!(a.u, (z.mean - z_hat) / nu, max_relative = 1e-12);
            assert_relative_eq!(a.raw_tau, (1.0 - z.variance / nu) / nu, max_relative = 1e-10);
        }
    }

    #[test]
    fn inconsistent_label_uses_edge_fallback() {
        let ch = OutputChannel::new(regular(&[0.0, 60.0]), 0.0).unwrap();
        let d = ch.output_moments(lab(3), 0.0, 1.0).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.mean, 60.0);
        assert_eq!(d.variance, TAU_MIN);
        let upd = ch.d1_d2(lab(3), 0.0, 1.0).unwrap();
        assert!(upd.u.is_finite() && upd.tau > 0.0);
    }

    #[test]
    fn bimodal_cell_clamps_tau() {
        let q = ScalarQuantizer::binned(vec![-1.5, 1.5], vec![1, 2, 1], None).unwrap();
        let ch = OutputChannel::new(q, 0.0).unwrap();
        let d = ch.d1_d2(lab(1), 0.0, 1.0).unwrap();
        assert!(d.raw_tau < 0.0);
        assert_eq!(d.tau, TAU_MIN);
    }

    #[test]
    fn likelihood_conventions() {
        let clean = OutputChannel::new(regular(&[0.0]), 0.0).unwrap();
        assert_eq!(clean.likelihood(lab(2), 0.5).unwrap(), 1.0);
        assert_eq!(clean.likelihood(lab(1), 0.5).unwrap(), 0.0);
        let noisy = OutputChannel::new(regular(&[0.0]), 1.0).unwrap();
        assert_relative_eq!(noisy.likelihood(lab(2), 0.0).unwrap(), 0.5, max_relative = 1e-15);
    }
}
