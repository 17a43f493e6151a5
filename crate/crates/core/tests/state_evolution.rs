use qgamp_core::{
    d2_bar, se_run, GaussianSource, Prior, ScalarQuantizer, SeConfig, SeEvaluator, SeProblem, UniformFamily,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian() -> Prior {
    Prior::gaussian(0.0, 1.0).unwrap()
}

/// Operating points used by the experiments.
fn problems() -> Vec<SeProblem> {
    let sz = |beta: f64| beta.sqrt();
    let mut out = vec![SeProblem::new(
        0.5,
        0.0,
        gaussian(),
        ScalarQuantizer::uniform(16, -3.0 * sz(0.5), 3.0 * sz(0.5)).unwrap(),
    )
    .unwrap()];
    for ratio in [3.0, 6.0] {
        let beta = 1.0 / ratio;
        let q = ScalarQuantizer::uniform(16, -3.0 * sz(beta), 3.0 * sz(beta)).unwrap();
        out.push(SeProblem::new(beta, 0.0, gaussian(), q).unwrap());
    }
    for (fam, p) in [(UniformFamily::Regular, 1.2), (UniformFamily::Modulo, 0.3)] {
        out.push(SeProblem::new(0.5, 0.0, gaussian(), fam.build(4, p).unwrap()).unwrap());
    }
    let sparse = Prior::sparse_unit(1.0 / 32.0).unwrap();
    for beta in [1.0 / 0.4, 1.0] {
        let q = ScalarQuantizer::uniform(16, -2.5 * sz(beta), 2.5 * sz(beta)).unwrap();
        out.push(SeProblem::new(beta, 0.0, sparse, q).unwrap());
    }
    out.push(SeProblem::new(0.5, 0.01, gaussian(), ScalarQuantizer::uniform(8, -2.0, 2.0).unwrap()).unwrap());
    out
}

#[test]
fn trajectories_are_monotone_and_converge() {
    let cfg = SeConfig::default();
    for p in problems() {
        let tr = se_run(&p, &cfg).unwrap();
        assert!(tr.converged, "{p:?} did not converge in {} steps", tr.steps());
        for w in tr.taus.windows(2) {
            assert!(w[1] <= w[0] + cfg.fp_tol, "increase {} -> {}", w[0], w[1]);
        }
        assert!(tr.taus.iter().all(|t| *t > 0.0));
        assert_eq!(tr.taus[0], p.prior.variance());
    }
}

#[test]
fn doubling_the_quadrature_changes_nothing() {
    let base = SeConfig::default();
    let fine = SeConfig {
        quad_nodes: 2 * base.quad_nodes,
        ..base
    };
    let (coarse, fine) = (SeEvaluator::new(base).unwrap(), SeEvaluator::new(fine).unwrap());
    for p in problems() {
        let cap = p.measurement_variance();
        for frac in [1e-4, 1e-2, 0.1, 0.5, 0.9] {
            let nu = frac * cap;
            let (a, b) = (coarse.d2_bar(nu, &p).value, fine.d2_bar(nu, &p).value);
            assert!((a - b).abs() <= 1e-8 * b.abs(), "d2_bar({nu}) {a} vs {b} for {p:?}");
            let (a, b) = (
                coarse.ein_bar_quadrature(nu, &p.prior),
                fine.ein_bar_quadrature(nu, &p.prior),
            );
            assert!((a - b).abs() <= 1e-8 * b.abs(), "ein_bar({nu}) {a} vs {b}");
        }
    }
}

#[test]
fn output_levels_do_not_matter() {
    let cfg = SeConfig::default();
    let t = vec![-1.5, -0.5, 0.0, 0.5, 1.5];
    let a = ScalarQuantizer::regular(t.clone(), Some(vec![-2.0, -1.0, -0.25, 0.25, 1.0, 2.0])).unwrap();
    let b = ScalarQuantizer::regular(t.clone(), Some(vec![-9.0, -0.6, -0.1, 0.4, 0.9, 7.0])).unwrap();
    let c = ScalarQuantizer::regular(t, None).unwrap();
    let run = |q| se_run(&SeProblem::new(0.5, 0.0, gaussian(), q).unwrap(), &cfg).unwrap();
    let (ra, rb, rc) = (run(a), run(b), run(c));
    assert_eq!(ra, rb);
    assert_eq!(ra, rc);
}

#[test]
fn d2_bar_matches_monte_carlo() {
    // z = ẑ + e with ẑ ~ N(0, cap − ν), e ~ N(0, ν); y = Q(z).
    let q = ScalarQuantizer::uniform(16, -3.0 * 0.5f64.sqrt(), 3.0 * 0.5f64.sqrt()).unwrap();
    let p = SeProblem::new(0.5, 0.0, gaussian(), q.clone()).unwrap();
    let ch = qgamp_core::OutputChannel::new(q, 0.0).unwrap();
    let nu = 0.05;
    let want = d2_bar(nu, &p, &SeConfig::default()).unwrap().value;
    let spread = (p.measurement_variance() - nu).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let zh: f64 = spread * rng.sample::<f64, _>(StandardNormal);
        let z = zh + nu.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let y = ch.quantizer().encode(z).unwrap();
        let upd = ch.d1_d2(y, zh, nu).unwrap();
        let d = upd.u * upd.u;
        sum += d;
        sum2 += d * d;
    }
    let mean = sum / samples as f64;
    let se = ((sum2 / samples as f64 - mean * mean) / samples as f64).sqrt();
    assert!(
        (mean - want).abs() < 3.0 * se,
        "quadrature {want}, monte carlo {mean} ± {se}"
    );
}

#[test]
fn uninformative_quantizer_keeps_the_prior() {
    let q = ScalarQuantizer::regular(vec![], None).unwrap();
    let p = SeProblem::new(0.5, 0.0, gaussian(), q).unwrap();
    let tr = se_run(&p, &SeConfig::default()).unwrap();
    assert!(tr.taus.iter().all(|t| *t == 1.0));
}

#[test]
fn finer_quantizers_predict_lower_error() {
    let cfg = SeConfig::default();
    let src = GaussianSource::new(0.0, 0.5).unwrap();
    let mut last = f64::INFINITY;
    for k in [2, 4, 8, 16, 32] {
        let (lo, hi) = src.window(3.0);
        let p = SeProblem::new(0.5, 0.0, gaussian(), ScalarQuantizer::uniform(k, lo, hi).unwrap()).unwrap();
        let fp = se_run(&p, &cfg).unwrap().fixed_point;
        assert!(fp < last);
        last = fp;
    }
}
