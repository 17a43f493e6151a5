use qgamp_core::{trunc_gauss_moments, CellSet, Interval};
use qgamp_testkit::quadrature::gaussian_cell_moments;

struct Worst {
    mass: f64,
    mean: f64,
    variance: f64,
}

fn check(cells: &[(f64, f64)], mean: f64, var: f64, worst: &mut Worst) {
    let set = CellSet::new(cells.iter().map(|&(a, b)| Interval::new(a, b).unwrap()).collect()).unwrap();
    let got = trunc_gauss_moments(&set, mean, var).unwrap();
    let (lm, m, v) = gaussian_cell_moments(cells, mean, var);
    // log-mass difference is the relative mass error
    let e_mass = (got.log_mass - lm).abs();
    let e_mean = (got.mean - m).abs() / m.abs().max(var.sqrt());
    let e_var = (got.variance - v).abs() / v;
    assert!(
        e_mass < 1e-8 && e_mean < 1e-8 && e_var < 1e-6,
        "cells {cells:?} N({mean}, {var}): mass {e_mass:e} mean {e_mean:e} var {e_var:e}"
    );
    worst.mass = worst.mass.max(e_mass);
    worst.mean = worst.mean.max(e_mean);
    worst.variance = worst.variance.max(e_var);
}

#[test]
fn single_intervals_match_adaptive_quadrature() {
    let mut worst = Worst {
        mass: 0.0,
        mean: 0.0,
        variance: 0.0,
    };
    let (mu, var) = (0.7f64, 2.5f64);
    let sd: f64 = var.sqrt();
    for i in 0..20 {
        let offset = -8.0 + 16.0 * i as f64 / 19.0;
        for k in 0..25 {
            let width = 10f64.powf(-3.0 + 4.0 * k as f64 / 24.0);
            let c = mu + offset * sd;
            let h = 0.5 * width * sd;
            check(&[(c - h, c + h)], mu, var, &mut worst);
        }
    }
    eprintln!(
        "worst relative errors: mass {:e} mean {:e} variance {:e}",
        worst.mass, worst.mean, worst.variance
    );
}

#[test]
fn half_lines_and_unions_match_adaptive_quadrature() {
    let mut worst = Worst {
        mass: 0.0,
        mean: 0.0,
        variance: 0.0,
    };
    for i in 0..33 {
        let b = -8.0 + 0.5 * i as f64;
        check(&[(b, f64::INFINITY)], 0.0, 1.0, &mut worst);
        check(&[(f64::NEG_INFINITY, b)], 0.0, 1.0, &mut worst);
    }
    for i in 0..17 {
        let shift = -4.0 + 0.5 * i as f64;
        check(&[(-2.0, -1.0), (1.0, 2.0)], shift, 1.0, &mut worst);
        check(
            &[
                (f64::NEG_INFINITY, -3.0),
                (-1.0, 0.5),
                (2.0, 2.25),
                (6.0, f64::INFINITY),
            ],
            shift,
            0.5,
            &mut worst,
        );
    }
}
