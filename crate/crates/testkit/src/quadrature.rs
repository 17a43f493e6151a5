//! Adaptive Gauss-Kronrod (7/15) integration.

/// Kronrod abscissae on [0, 1], QUADPACK ordering (odd indices are Gauss nodes).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// `∫_a^b f` to `max(abs_tol, rel_tol·|I|)` by global adaptive bisection.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    assert!(a.is_finite() && b.is_finite(), "oracle needs a finite range");
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut segments = vec![(a, b, v, e)];
    let (mut total, mut err) = (v, e);
    for _ in 0..20_000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (k, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, v0, e0) = segments.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
    // Sum small contributions first.
    let mut vals: Vec<f64> = segments.iter().map(|s| s.2).collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    vals.iter().sum()
}

/// Mass, mean and variance of `N(mean, var)` on a union of intervals, by
/// adaptive quadrature of the density written relative to `ref_point`
/// (pass the point of the cells nearest to `mean` to avoid underflow).
///
/// Returns `(log_mass, mean, variance)`.
pub fn gaussian_cell_moments(cells: &[(f64, f64)], mean: f64, var: f64) -> (f64, f64, f64) {
    let sd = var.sqrt();
    // Clip infinite ends at 40 sd past the nearest finite structure.
    let clip = |v: f64| v.clamp(mean - 40.0 * sd, mean + 40.0 * sd);
    let nearest = cells
        .iter()
        .map(|&(lo, hi)| {
            if mean < lo {
                lo
            } else if mean > hi {
                hi
            } else {
                mean
            }
        })
        .min_by(|x, y| (x - mean).abs().total_cmp(&(y - mean).abs()))
        .unwrap();
    let t0 = (nearest - mean) / sd;
    // Density relative to its value at the nearest point.
    let rel = |x: f64| {
        let t = (x - mean) / sd;
        (-0.5 * (t * t - t0 * t0)).exp()
    };
    let (mut i0, mut i1, mut i2) = (0.0, 0.0, 0.0);
    for &(lo, hi) in cells {
        let (lo, hi) = (clip(lo), clip(hi));
        if !(lo < hi) {
            continue;
        }
        // Integrate in coordinates centred on `nearest` to keep the moments
        // well-conditioned.
        let tol = 1e-14;
        i0 += integrate(rel, lo, hi, tol, 0.0);
        i1 += integrate(|x| rel(x) * (x - nearest), lo, hi, tol, 0.0);
        i2 += integrate(|x| rel(x) * (x - nearest) * (x - nearest), lo, hi, tol, 0.0);
    }
    let log_mass = i0.ln() - 0.5 * t0 * t0 - (sd * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let m1 = i1 / i0;
    (log_mass, nearest + m1, i2 / i0 - m1 * m1)
}
