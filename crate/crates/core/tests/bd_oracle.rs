use lfsynth_core::metrics::{bd_quality, bd_rate, RdCurve};

fn poly(c: &[f64; 4], z: f64) -> f64 {
    c[0] + z * (c[1] + z * (c[2] + z * c[3]))
}

/// Mean of the polynomial `c(x - shift)` over [lo, hi] from its exact antiderivative.
fn mean_value(c: &[f64; 4], lo: f64, hi: f64, shift: f64) -> f64 {
    let anti = |x: f64| {
        let z = x - shift;
        z * (c[0] + z * (c[1] / 2.0 + z * (c[2] / 3.0 + z * c[3] / 4.0)))
    };
    (anti(hi) - anti(lo)) / (hi - lo)
}

fn sub(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    core::array::from_fn(|i| a[i] - b[i])
}

#[test]
fn rate_delta_matches_symbolic_integral() {
    let cases: [([f64; 4], [f64; 4], [f64; 4], [f64; 4]); 3] = [
        ([-1.0, 0.05, 0.002, 0.0001], [-1.1, 0.06, 0.0015, 0.00013], [30.0, 33.0, 36.0, 39.0], [30.5, 33.5, 36.5, 39.5]),
        ([-0.5, 0.08, 0.0, 0.0], [-0.3, 0.07, 0.001, -0.00002], [28.0, 31.0, 35.0, 40.0], [27.0, 30.0, 34.0, 38.0]),
        ([-2.0, 0.1, -0.003, 0.0002], [-2.0, 0.1, -0.003, 0.0002], [25.0, 29.0, 33.0, 37.0], [26.0, 28.0, 31.0, 36.0]),
    ];
    for (pa, pt, qa, qt) in cases {
        let curve = |p: &[f64; 4], qs: &[f64; 4]| RdCurve::new("c", qs.iter().map(|&q| (10f64.powf(poly(p, q - 30.0)), q)).collect()).unwrap();
        let (a, t) = (curve(&pa, &qa), curve(&pt, &qt));
        let lo = qa[0].max(qt[0]);
        let hi = qa[3].min(qt[3]);
        let want = (10f64.powf(mean_value(&sub(&pt, &pa), lo, hi, 30.0)) - 1.0) * 100.0;
        let got = bd_rate(&a, &t).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn quality_delta_matches_symbolic_integral() {
    let fa = [35.0, 8.0, -2.0, 1.5];
    let ft = [35.6, 7.6, -1.0, 2.0];
    let xa = [-1.2, -0.9, -0.6, -0.3];
    let xt = [-1.15, -0.85, -0.55, -0.25];
    let curve = |f: &[f64; 4], xs: &[f64; 4]| RdCurve::new("c", xs.iter().map(|&x| (10f64.powf(x), poly(f, x + 0.75))).collect()).unwrap();
    let want = mean_value(&sub(&ft, &fa), -1.15, -0.3, -0.75);
    let got = bd_quality(&curve(&fa, &xa), &curve(&ft, &xt)).unwrap();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    let back = bd_quality(&curve(&ft, &xt), &curve(&fa, &xa)).unwrap();
    assert!((back + want).abs() < 1e-6);
}
