//! Brute-force posterior mean for tiny problems.
//!
//! The posterior `p(x | y) ∝ Π p(x_j) Π p(y_i | z_i)` is integrated on a
//! tensor grid over the first `n − 1` coordinates. Along the last coordinate
//! the noiseless likelihood is an indicator of a union of intervals, so that
//! integral is done exactly with the truncated-Gaussian kernel; with noise it
//! uses the same grid.
//!
//! For `n = 2` without noise the outer integrand is smooth except where two
//! cell boundaries cross, so the outer axis is split at those crossings and
//! integrated with Gauss-Legendre panels instead of the midpoint rule.

use qgamp_core::quad::GaussLegendre;
use qgamp_core::{trunc_gauss_moments, CellSet, Interval, Label, Matrix, OutputChannel, Prior, ScalarQuantizer};

use crate::error::{HarnessError, Result};

/// Largest dimension the oracle accepts.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Nodes per axis over the continuous part of the prior.
    pub points: usize,
    /// Half-width of each axis in prior standard deviations.
    pub radius_sds: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 400,
            radius_sds: 6.0,
        }
    }
}

/// Nodes per Gauss-Legendre panel on a split axis.
const PANEL_NODES: usize = 4;

/// Nodes and weights of one axis: quadrature on the continuous component plus
/// the atom of a sparse prior.
struct Axis {
    nodes: Vec<(f64, f64)>,
    cont_weight: f64,
    cont_mean: f64,
    cont_var: f64,
    atom_weight: f64,
}

/// Midpoint rule when `kinks` is `None`; otherwise Gauss-Legendre panels on
/// a uniform partition refined at the kinks, with about the same node count.
fn axis(prior: &Prior, grid: &GridSpec, kinks: Option<&[f64]>) -> Axis {
    let (cont_weight, cont_mean, cont_var, atom_weight) = match *prior {
        Prior::Gaussian { mean, variance } => (1.0, mean, variance, 0.0),
        Prior::GaussBernoulli { rho, on_variance } => (rho, 0.0, on_variance, 1.0 - rho),
    };
    let sd = cont_var.sqrt();
    let (lo, hi) = (cont_mean - grid.radius_sds * sd, cont_mean + grid.radius_sds * sd);
    let density = |x: f64| {
        let t = (x - cont_mean) / sd;
        cont_weight * (-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut nodes: Vec<(f64, f64)> = match kinks {
        None => {
            let h = (hi - lo) / grid.points as f64;
            (0..grid.points)
                .map(|k| {
                    let x = lo + (k as f64 + 0.5) * h;
                    (x, h * density(x))
                })
                .collect()
        }
        Some(kinks) => {
            let panels = grid.points.div_ceil(PANEL_NODES).max(1);
            let mut breaks: Vec<f64> = (0..=panels)
                .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
                .chain(kinks.iter().copied().filter(|&k| lo < k && k < hi))
                .collect();
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let gl = GaussLegendre::new(PANEL_NODES);
            breaks
                .windows(2)
                .flat_map(|w| {
                    gl.panel(w[0], w[1])
                        .map(|(x, wt)| (x, wt * density(x)))
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    };
    if atom_weight > 0.0 {
        nodes.push((0.0, atom_weight));
    }
    Axis {
        nodes,
        cont_weight,
        cont_mean,
        cont_var,
        atom_weight,
    }
}

/// Posterior mean of `x` given labels `y` of `Q(A x + w)`.
pub fn grid_posterior_oracle(
    a: &Matrix,
    y: &[Label],
    channel: &OutputChannel,
    prior: &Prior,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || n > MAX_DIM {
        return Err(HarnessError::Spec(format!(
            "oracle supports 1 ≤ n ≤ {MAX_DIM}, got {n}"
        )));
    }
    if y.len() != m {
        return Err(HarnessError::Spec(format!("{} labels for {m} measurements", y.len())));
    }
    if grid.points == 0 || !(grid.radius_sds > 0.0) {
        return Err(HarnessError::Spec(
            "oracle grid needs points ≥ 1 and a positive radius".into(),
        ));
    }
    if m == 0 {
        return Ok(vec![prior.mean(); n]);
    }
    let last = n - 1;
    let noisy = channel.noise_variance() > 0.0;
    let kinks = if n == 2 && !noisy {
        Some(crossings(a, y, channel.quantizer(), prior, grid)?)
    } else {
        None
    };
    let ax = axis(prior, grid, kinks.as_deref());

    let mut z_total = 0.0;
    let mut first = vec![0.0; n];
    let mut outer = vec![0.0; last];
    let mut idx = vec![0usize; last];
    let mut offsets = vec![0.0; m];
    loop {
        let mut w_outer = 1.0;
        for (j, &k) in idx.iter().enumerate() {
            let (x, w) = ax.nodes[k];
            outer[j] = x;
            w_outer *= w;
        }
        for (i, c) in offsets.iter_mut().enumerate() {
            *c = (0..last).map(|j| a.get(i, j) * outer[j]).sum();
        }
        let (mass, m1) = if noisy {
            inner_grid(a, y, channel, &ax, &offsets, last)?
        } else {
            inner_exact(a, y, channel, &ax, &offsets, last)?
        };
        let w = w_outer * mass;
        z_total += w;
        for j in 0..last {
            first[j] += w * outer[j];
        }
        first[last] += w_outer * m1;

        // Odometer over the outer grid.
        let mut j = 0;
        loop {
            if j == last {
                return finish(z_total, first);
            }
            idx[j] += 1;
            if idx[j] < ax.nodes.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// First coordinates at which boundaries of two observed cells cross, or at
/// which a boundary crosses `x₂ = 0` (where a sparse prior's atom enters or
/// leaves the feasible set). Only for `n = 2`.
fn crossings(a: &Matrix, y: &[Label], q: &ScalarQuantizer, prior: &Prior, grid: &GridSpec) -> Result<Vec<f64>> {
    let sd = prior.variance().sqrt();
    let reach = prior.mean().abs() + grid.radius_sds.max(8.0) * sd;
    let mut lines: Vec<(f64, f64, f64)> = Vec::new();
    for (i, &label) in y.iter().enumerate() {
        let (c0, c1) = (a.get(i, 0), a.get(i, 1));
        let span = (c0.abs() + c1.abs()) * reach;
        for iv in q.cell_set_in(label, -span, span)?.intervals() {
            for t in [iv.lo(), iv.hi()] {
                if t.is_finite() && t.abs() < span {
                    lines.push((c0, c1, t));
                }
            }
        }
    }
    let mut out = Vec::new();
    for (k, &(p0, p1, s)) in lines.iter().enumerate() {
        if p0 != 0.0 {
            out.push(s / p0);
        }
        for &(r0, r1, t) in &lines[k + 1..] {
            let det = p0 * r1 - p1 * r0;
            if det.abs() > 1e-14 * (p0.abs() + p1.abs()) * (r0.abs() + r1.abs()) {
                out.push((s * r1 - t * p1) / det);
            }
        }
    }
    Ok(out)
}

fn finish(z_total: f64, first: Vec<f64>) -> Result<Vec<f64>> {
    if !(z_total > 0.0) {
        return Err(HarnessError::OracleInfeasible);
    }
    Ok(first.into_iter().map(|v| v / z_total).collect())
}

/// `(∫ p(x) L(x) dx, ∫ x p(x) L(x) dx)` over the last coordinate, with `L` the
/// indicator of the labels' cells.
fn inner_exact(
    a: &Matrix,
    y: &[Label],
    channel: &OutputChannel,
    ax: &Axis,
    offsets: &[f64],
    last: usize,
) -> Result<(f64, f64)> {
    let q = channel.quantizer();
    let reach = 40.0 * ax.cont_var.sqrt() + ax.cont_mean.abs();
    let mut set = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    for (i, &c) in offsets.iter().enumerate() {
        let coef = a.get(i, last);
        if coef == 0.0 {
            if !q.encode(c).is_ok_and(|l| l == y[i]) {
                return Ok((0.0, 0.0));
            }
            continue;
        }
        let t_lo = c - coef.abs() * reach;
        let t_hi = c + coef.abs() * reach;
        let cells = q.cell_set_in(y[i], t_lo, t_hi)?;
        let mut mapped: Vec<(f64, f64)> = cells
            .intervals()
            .iter()
            .map(|iv| {
                let (u, v) = ((iv.lo() - c) / coef, (iv.hi() - c) / coef);
                if coef > 0.0 {
                    (u, v)
                } else {
                    (v, u)
                }
            })
            .collect();
        mapped.sort_by(|p, r| p.0.total_cmp(&r.0));
        set = intersect(&set, &mapped);
        if set.is_empty() {
            return Ok((0.0, 0.0));
        }
    }
    let mut mass = 0.0;
    let mut m1 = 0.0;
    if ax.atom_weight > 0.0 && set.iter().any(|&(lo, hi)| lo <= 0.0 && 0.0 < hi) {
        mass += ax.atom_weight;
    }
    let ivs: Vec<Interval> = set.iter().filter_map(|&(lo, hi)| Interval::new(lo, hi).ok()).collect();
    if let Ok(cells) = CellSet::new(ivs) {
        if let Ok(mom) = trunc_gauss_moments(&cells, ax.cont_mean, ax.cont_var) {
            mass += ax.cont_weight * mom.mass;
            m1 += ax.cont_weight * mom.mass * mom.mean;
        }
    }
    Ok((mass, m1))
}

/// Same integrals on the axis grid with the noisy likelihood.
fn inner_grid(
    a: &Matrix,
    y: &[Label],
    channel: &OutputChannel,
    ax: &Axis,
    offsets: &[f64],
    last: usize,
) -> Result<(f64, f64)> {
    let mut mass = 0.0;
    let mut m1 = 0.0;
    for &(x, w) in &ax.nodes {
        let mut like = w;
        for (i, &c) in offsets.iter().enumerate() {
            like *= channel.likelihood(y[i], c + a.get(i, last) * x)?;
            if like == 0.0 {
                break;
            }
        }
        mass += like;
        m1 += like * x;
    }
    Ok((mass, m1))
}

/// Intersection of two sorted lists of disjoint half-open intervals.
fn intersect(p: &[(f64, f64)], r: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < p.len() && j < r.len() {
        let lo = p[i].0.max(r[j].0);
        let hi = p[i].1.min(r[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if p[i].1 < r[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use qgamp_core::ScalarQuantizer;

    fn gaussian() -> Prior {
        Prior::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn no_measurements_gives_prior_mean() {
        let a = Matrix::zeros(0, 2);
        let ch = OutputChannel::new(ScalarQuantizer::regular(vec![0.0], None).unwrap(), 0.0).unwrap();
        let prior = Prior::gaussian(0.3, 1.0).unwrap();
        assert_eq!(
            grid_posterior_oracle(&a, &[], &ch, &prior, &GridSpec::default()).unwrap(),
            vec![0.3, 0.3]
        );
    }

    #[test]
    fn half_line_observation_gives_half_normal_mean() {
        let a = Matrix::from_row_major(1, 1, vec![1.0]).unwrap();
        let q = ScalarQuantizer::regular(vec![0.0], None).unwrap();
        let ch = OutputChannel::new(q, 0.0).unwrap();
        let y = [Label::new(2).unwrap()];
        let est = grid_posterior_oracle(&a, &y, &ch, &gaussian(), &GridSpec::default()).unwrap();
        assert_relative_eq!(est[0], (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn noisy_half_line_matches_probit_posterior() {
        // y = 1{x + w ≥ 0}: E[x | y=2] = 1/√(1+σ²) · φ(0)/Φ(0).
        let a = Matrix::from_row_major(1, 1, vec![1.0]).unwrap();
        let q = ScalarQuantizer::regular(vec![0.0], None).unwrap();
        let ch = OutputChannel::new(q, 0.5).unwrap();
        let y = [Label::new(2).unwrap()];
        let grid = GridSpec {
            points: 4000,
            radius_sds: 10.0,
        };
        let est = grid_posterior_oracle(&a, &y, &ch, &gaussian(), &grid).unwrap();
        let want = (2.0 / std::f64::consts::PI).sqrt() / 1.5f64.sqrt();
        assert_relative_eq!(est[0], want, max_relative = 1e-6);
    }

    #[test]
    fn inconsistent_labels_are_infeasible() {
        let a = Matrix::from_row_major(2, 1, vec![1.0, 1.0]).unwrap();
        let ch = OutputChannel::new(ScalarQuantizer::regular(vec![0.0], None).unwrap(), 0.0).unwrap();
        let y = [Label::new(1).unwrap(), Label::new(2).unwrap()];
        assert!(matches!(
            grid_posterior_oracle(&a, &y, &ch, &gaussian(), &GridSpec::default()),
            Err(HarnessError::OracleInfeasible)
        ));
    }

    #[test]
    fn intersection_of_interval_lists() {
        let p = [(-5.0, -1.0), (0.0, 2.0), (3.0, f64::INFINITY)];
        let r = [(-2.0, 0.5), (1.5, 4.0)];
        assert_eq!(
            intersect(&p, &r),
            vec![(-2.0, -1.0), (0.0, 0.5), (1.5, 2.0), (3.0, 4.0)]
        );
    }
}
