use incompat_core::sampling::{inner_product_cdf, sample_pair, sample_sharpness, sample_unit_sphere};
use incompat_core::{MeasureSpec, RngStream};

const N: usize = 200_000;

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

#[test]
fn sphere_moments() {
    let mut rng = RngStream::new(1, 0);
    let pts: Vec<Vec<f64>> = (0..N).map(|_| sample_unit_sphere(&mut rng, 3).unwrap()).collect();
    for k in 0..3 {
        // Var(u_k) = 1/3, so the mean has sd ≈ 0.0013
        assert!(mean(pts.iter().map(|p| p[k])).abs() < 0.006);
        assert!((mean(pts.iter().map(|p| p[k] * p[k])) - 1.0 / 3.0).abs() < 0.004);
    }
}

#[test]
fn higher_dimensional_sphere() {
    let mut rng = RngStream::new(1, 1);
    for m in [2, 4, 7] {
        let pts: Vec<Vec<f64>> = (0..50_000).map(|_| sample_unit_sphere(&mut rng, m).unwrap()).collect();
        assert!(pts.iter().all(|p| p.len() == m));
        let e = mean(pts.iter().map(|p| p[m - 1] * p[m - 1]));
        assert!((e - 1.0 / m as f64).abs() < 0.01, "m = {m}: {e}");
    }
}

#[test]
fn sharpness_law() {
    let mut rng = RngStream::new(2, 0);
    let mut rs: Vec<f64> = (0..N).map(|_| sample_sharpness(&mut rng, 1.0).unwrap()).collect();
    assert!((mean(rs.iter().map(|r| r * r)) - 0.6).abs() < 0.003);
    assert!((mean(rs.iter().map(|r| r.powi(3))) - 0.5).abs() < 0.003);
    rs.sort_by(f64::total_cmp);
    let median = rs[N / 2];
    assert!((median - 0.5f64.cbrt()).abs() < 0.004, "{median}");
    let mut rng = RngStream::new(2, 1);
    assert!((0..1000).all(|_| sample_sharpness(&mut rng, 0.3).unwrap() <= 0.3));
}

#[test]
fn general_measure_marginals() {
    let mut rng = RngStream::new(3, 0);
    let pairs: Vec<_> = (0..N).map(|_| sample_pair(&mut rng, &MeasureSpec::General).unwrap()).collect();
    let biases = || pairs.iter().flat_map(|(a, b)| [a.bias, b.bias]);
    // |x0| has density 4(1 - t)³
    assert!((mean(biases().map(f64::abs)) - 0.2).abs() < 0.002);
    assert!(mean(biases()).abs() < 0.004);
    // given x0, |x|/(1 - |x0|) has density 3r²
    let rel = pairs
        .iter()
        .flat_map(|(a, b)| [a, b])
        .map(|m| m.sharpness() / (1.0 - m.bias.abs()));
    assert!((mean(rel) - 0.75).abs() < 0.002);
    assert!(pairs.iter().all(|(a, b)| a.validate().is_ok() && b.validate().is_ok()));
}

#[test]
fn inner_product_law_in_three_dimensions() {
    let mut rng = RngStream::new(4, 0);
    let mut s: Vec<f64> = (0..N)
        .map(|_| {
            let u = sample_unit_sphere(&mut rng, 3).unwrap();
            let v = sample_unit_sphere(&mut rng, 3).unwrap();
            u.iter().zip(&v).map(|(x, y)| x * y).sum()
        })
        .collect();
    s.sort_by(f64::total_cmp);
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = inner_product_cdf(x, 3).unwrap();
            (f - i as f64 / N as f64).abs().max(((i + 1) as f64 / N as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 0.005, "{d}");
}
