use std::f64::consts::PI;

use lagflow::synthdata::{sample, EIGHT_GAUSSIANS_RADIUS, SCURVE_SCALE};
use lagflow::{DatasetName, DatasetSpec, PointBatch, Sampler};
use proptest::prelude::*;

fn mean_and_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn column(b: &PointBatch, k: usize) -> impl Iterator<Item = f64> + Clone + '_ {
    b.rows().map(move |r| r[k])
}

#[test]
fn gaussian_moments() {
    let b = sample(&DatasetSpec::gaussian(3, 17), 100_000).unwrap();
    let mean = b.mean();
    let cov = b.covariance();
    for i in 0..3 {
        assert!(mean[i].abs() < 0.02);
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((cov[i * 3 + j] - want).abs() < 0.02, "cov[{i}][{j}] = {}", cov[i * 3 + j]);
        }
    }
}

#[test]
fn eight_gaussian_components() {
    let b = sample(&DatasetSpec::new(DatasetName::EightGaussians, 3), 100_000).unwrap();
    let centers: Vec<[f64; 2]> = (0..8)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 8.0;
            [EIGHT_GAUSSIANS_RADIUS * a.cos(), EIGHT_GAUSSIANS_RADIUS * a.sin()]
        })
        .collect();
    let mut groups: Vec<Vec<[f64; 2]>> = vec![Vec::new(); 8];
    for r in b.rows() {
        let k = (0..8)
            .min_by(|&a, &c| {
                let da = (r[0] - centers[a][0]).hypot(r[1] - centers[a][1]);
                let dc = (r[0] - centers[c][0]).hypot(r[1] - centers[c][1]);
                da.total_cmp(&dc)
            })
            .unwrap();
        groups[k].push([r[0], r[1]]);
    }
    for (k, g) in groups.iter().enumerate() {
        assert!((g.len() as f64 - 12_500.0).abs() < 500.0, "component {k} has {}", g.len());
        for axis in 0..2 {
            let (m, s) = mean_and_std(g.iter().map(|p| p[axis]));
            assert!((m - centers[k][axis]).abs() < 0.02, "component {k} mean {m}");
            assert!((s - 0.5).abs() < 0.02, "component {k} std {s}");
        }
    }
}

/// Distance from `p` to a half circle of radius 1 around `c`, on the side
/// `sign * (y - c.y) >= 0`.
fn distance_to_arc(p: &[f64], c: [f64; 2], sign: f64) -> f64 {
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    if sign * dy >= 0.0 {
        (dx.hypot(dy) - 1.0).abs()
    } else {
        (dx - 1.0).hypot(dy).min((dx + 1.0).hypot(dy))
    }
}

#[test]
fn moons_lie_near_their_arcs() {
    let b = sample(&DatasetSpec::new(DatasetName::Moons, 5), 10_000).unwrap();
    let mut upper = 0;
    for r in b.rows() {
        let du = distance_to_arc(r, [0.0, 0.0], 1.0);
        let dl = distance_to_arc(r, [1.0, 0.5], -1.0);
        assert!(du.min(dl) < 0.5, "point {r:?} is {} from both arcs", du.min(dl));
        if du < dl {
            upper += 1;
        }
    }
    assert!((upper as f64 - 5_000.0).abs() < 300.0, "{upper} points on the upper arc");
}

#[test]
fn scurve_is_standardized_and_scaled() {
    let b = sample(&DatasetSpec::new(DatasetName::Scurve, 8), 100_000).unwrap();
    for k in 0..2 {
        let (m, s) = mean_and_std(column(&b, k));
        assert!(m.abs() < 0.05 * SCURVE_SCALE, "mean {m}");
        assert!((s - SCURVE_SCALE).abs() < 0.02 * SCURVE_SCALE, "std {s}");
    }
}

fn correlation(a: &PointBatch, b: &PointBatch, k: usize) -> f64 {
    let (ma, sa) = mean_and_std(column(a, k));
    let (mb, sb) = mean_and_std(column(b, k));
    let n = a.len() as f64;
    column(a, k)
        .zip(column(b, k))
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / ((n - 1.0) * sa * sb)
}

#[test]
fn streams_are_uncorrelated() {
    let n = 50_000;
    let spec = DatasetSpec::gaussian(2, 42);
    let a = Sampler::with_stream(spec.clone(), 0).unwrap().sample(n);
    let b = Sampler::with_stream(spec.clone(), 1).unwrap().sample(n);
    let c = Sampler::new(DatasetSpec::gaussian(2, 43)).unwrap().sample(n);
    for k in 0..2 {
        // 4.5 standard errors of a null correlation
        assert!(correlation(&a, &b, k).abs() < 0.02);
        assert!(correlation(&a, &c, k).abs() < 0.02);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sampling_is_deterministic(
        seed in any::<u64>(),
        n in 1usize..200,
        name in prop::sample::select(DatasetName::ALL.to_vec()),
    ) {
        let spec = DatasetSpec::new(name, seed);
        let a = sample(&spec, n).unwrap();
        let b = sample(&spec, n).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a.dim(), 2);
        prop_assert!(a.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn a_sampler_advances_its_stream(seed in any::<u64>(), n in 1usize..50) {
        let mut s = Sampler::new(DatasetSpec::new(DatasetName::Moons, seed)).unwrap();
        let first = s.sample(n);
        let second = s.sample(n);
        prop_assert_ne!(first.as_slice(), second.as_slice());
    }
}
