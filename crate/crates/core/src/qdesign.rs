//! Quantizer design.
//!
//! [`lloyd`] minimizes the input-output distortion of the quantizer itself.
//! [`optimize_family`] instead minimizes the state-evolution fixed point, i.e.
//! the predicted reconstruction MSE, over the single scale parameter of a
//! uniform family.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::channels::{interval_moments, Prior};
use crate::error::{Error, Result};
use crate::quantizer::{GaussianSource, ScalarQuantizer};
use crate::state_evolution::{SeConfig, SeEvaluator, SeProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub quantizer: ScalarQuantizer,
    pub iterations: usize,
    pub converged: bool,
    /// Distortion after each iteration.
    pub distortions: Vec<f64>,
}

/// `levels` evenly spaced over `mean ± 3 sd` (just the mean for one level).
pub fn lloyd_initial_levels(levels: usize, src: &GaussianSource) -> Vec<f64> {
    if levels <= 1 {
        return alloc::vec![src.mean(); levels];
    }
    let sd = src.std_dev();
    let (lo, hi) = (src.mean() - 3.0 * sd, src.mean() + 3.0 * sd);
    let step = (hi - lo) / (levels - 1) as f64;
    (0..levels).map(|i| lo + step * i as f64).collect()
}

/// Lloyd's algorithm for a Gaussian source: alternate midpoint thresholds and
/// centroid levels until no level moves by more than `tol`.
///
/// Hitting `max_iters` is not an error; the last iterate is returned with
/// `converged = false`.
pub fn lloyd(levels: usize, src: &GaussianSource, init: &[f64], tol: f64, max_iters: usize) -> Result<LloydResult> {
    if levels == 0 || init.len() != levels {
        return Err(Error::InvalidInput(format!(
            "lloyd needs {levels} ≥ 1 initial levels, got {}",
            init.len()
        )));
    }
    if init.iter().any(|v| !v.is_finite()) || init.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("initial levels must be strictly increasing".into()));
    }
    let mut current = init.to_vec();
    let mut distortions = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let thresholds: Vec<f64> = current.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let probe = ScalarQuantizer::regular(thresholds.clone(), None)?;
        let mut next = current.clone();
        for (i, level) in next.iter_mut().enumerate() {
            let m = interval_moments(probe.fine_cell(i), src.mean(), src.variance());
            if m.log_mass.is_finite() {
                *level = m.mean;
            }
        }
        // Centroids of a partition are strictly increasing unless a cell is
        // empty; keep the previous level in that case.
        if next.windows(2).any(|w| !(w[0] < w[1])) {
            next = current.clone();
        }
        let movement = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        let q = ScalarQuantizer::regular(thresholds, Some(current.clone()))?;
        distortions.push(q.measurement_distortion(src)?);
        if movement < tol {
            converged = true;
            break;
        }
    }
    let thresholds: Vec<f64> = current.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let quantizer = ScalarQuantizer::regular(thresholds, Some(current))?;
    Ok(LloydResult {
        quantizer,
        iterations,
        converged,
        distortions,
    })
}

/// Uniform quantizer families parametrized by one positive scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UniformFamily {
    /// `K` cells, granular region `[-L, L]`, outer cells unbounded.
    Regular,
    /// `floor(s/Δ) mod N`.
    Modulo,
}

impl UniformFamily {
    /// Member with `count` labels and scale `param` (`L` or `Δ`).
    pub fn build(self, count: u32, param: f64) -> Result<ScalarQuantizer> {
        if count < 2 {
            return Err(Error::Config(format!(
                "uniform families need at least 2 labels, got {count}"
            )));
        }
        if !(param > 0.0) || !param.is_finite() {
            return Err(Error::Config(format!("scale parameter must be positive, got {param}")));
        }
        match self {
            UniformFamily::Regular => ScalarQuantizer::uniform(count, -param, param),
            UniformFamily::Modulo => ScalarQuantizer::modulo(param, count),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UniformFamily::Regular => "regular",
            UniformFamily::Modulo => "modulo",
        }
    }
}

/// What a design minimizes: the SE fixed point for this prior, ratio and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignObjective {
    pub prior: Prior,
    pub beta: f64,
    pub sigma2: f64,
    pub se_config: SeConfig,
}

impl DesignObjective {
    /// Predicted MSE of GAMP with quantizer `q`.
    pub fn evaluate(&self, q: ScalarQuantizer) -> Result<f64> {
        let ev = SeEvaluator::new(self.se_config)?;
        self.evaluate_with(&ev, q)
    }

    fn evaluate_with(&self, ev: &SeEvaluator, q: ScalarQuantizer) -> Result<f64> {
        let prob = SeProblem::new(self.beta, self.sigma2, self.prior, q)?;
        Ok(ev.run(&prob).fixed_point)
    }
}

/// Scale bracket and refinement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Search {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
    pub rel_tol: f64,
    /// Relative half-width `δ` of the robustness window. With `δ > 0` the
    /// minimized objective is the worst fixed point over the parameters
    /// `p(1 − δ)`, `p` and `p(1 + δ)`, which keeps the design away from
    /// edges where the fixed point jumps.
    pub margin: f64,
}

impl Search {
    pub fn new(lo: f64, hi: f64) -> Self {
        Search {
            lo,
            hi,
            grid_points: 25,
            rel_tol: 1e-4,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub family: UniformFamily,
    pub count: u32,
    pub param: f64,
    pub quantizer: ScalarQuantizer,
    pub predicted_mse: f64,
    /// Every `(param, objective)` evaluated, grid first.
    pub probes: Vec<(f64, f64)>,
}

/// Minimizes the SE fixed point over the family scale: a log-spaced grid over
/// the bracket, then golden-section search between the neighbours of the best
/// grid point. `predicted_mse` is the plain fixed point at the chosen scale
/// even when a robustness margin shapes the search.
pub fn optimize_family(
    family: UniformFamily,
    count: u32,
    objective: &DesignObjective,
    search: &Search,
) -> Result<Design> {
    if !(search.lo > 0.0) || !(search.hi >= search.lo) || !search.hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "search bracket must satisfy 0 < lo ≤ hi, got [{}, {}]",
            search.lo, search.hi
        )));
    }
    if !(0.0..1.0).contains(&search.margin) {
        return Err(Error::InvalidInput(format!(
            "margin must lie in [0, 1), got {}",
            search.margin
        )));
    }
    let ev = SeEvaluator::new(objective.se_config)?;
    let fixed_point = |param: f64| -> Result<f64> {
        let v = objective.evaluate_with(&ev, family.build(count, param)?)?;
        Ok(if v.is_finite() { v } else { f64::INFINITY })
    };
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut plain: Vec<f64> = Vec::new();
    let mut eval = |param: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = fixed_point(param)?;
        let mut worst = v;
        if search.margin > 0.0 {
            worst = worst
                .max(fixed_point(param * (1.0 - search.margin))?)
                .max(fixed_point(param * (1.0 + search.margin))?);
        }
        probes.push((param, worst));
        plain.push(v);
        Ok(worst)
    };

    let points = if search.lo == search.hi {
        1
    } else {
        search.grid_points.max(2)
    };
    let (llo, lhi) = (log(search.lo), log(search.hi));
    let grid: Vec<f64> = (0..points)
        .map(|i| {
            if points == 1 {
                search.lo
            } else {
                exp(llo + (lhi - llo) * i as f64 / (points - 1) as f64)
            }
        })
        .collect();
    for &g in &grid {
        eval(g, &mut probes)?;
    }
    let best = argmin(&probes).ok_or(Error::DesignFailure)?;
    if points > 1 {
        let lo = log(grid[best.saturating_sub(1)]);
        let hi = log(grid[(best + 1).min(points - 1)]);
        golden_section(lo, hi, search.rel_tol, |lp| eval(exp(lp), &mut probes))?;
    }
    let i = argmin(&probes).ok_or(Error::DesignFailure)?;
    let (param, predicted_mse) = (probes[i].0, plain[i]);
    Ok(Design {
        family,
        count,
        param,
        quantizer: family.build(count, param)?,
        predicted_mse,
        probes,
    })
}

fn argmin(probes: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(_, v)) in probes.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < probes[b].1) {
            best = Some(i);
        }
    }
    best
}

/// Golden-section minimization of `f` over `[a, b]` in log-parameter space;
/// stops when the bracket is narrower than `rel_tol` (a relative tolerance
/// on the parameter).
fn golden_section(mut a: f64, mut b: f64, rel_tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<()> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let tol = rel_tol.max(1e-12);
    let mut guard = 0;
    while (b - a) > tol && guard < 200 {
        guard += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(())
}
