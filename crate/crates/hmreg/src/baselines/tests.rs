use super::*;
use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn dataset(kind: &ManifoldKind, obs: &[(f64, Vec<f64>)]) -> Dataset {
    let points = obs
        .iter()
        .map(|(t, c)| (*t, kind.project_ambient(c).unwrap()))
        .collect();
    Dataset::from_observations(kind.clone(), points).unwrap()
}

#[test]
fn frechet_mean_single_point() {
    let k = ManifoldKind::sphere(1.0);
    let p = k.project_ambient(&[0.0, 1.0, 0.0]).unwrap();
    let m = frechet_mean(&[p.clone()], &[1.0]).unwrap();
    assert!(m.dist(&p).unwrap() < 1e-12);
}

#[test]
fn frechet_mean_euclidean_average() {
    let k = ManifoldKind::euclidean(1);
    let pts = vec![
        k.project_ambient(&[0.0]).unwrap(),
        k.project_ambient(&[1.0]).unwrap(),
    ];
    let m = frechet_mean(&pts, &[1.0, 1.0]).unwrap();
    assert_relative_eq!(m.coords()[0], 0.5, epsilon = 1e-9);
}

#[test]
fn frechet_mean_circle_midpoint_matches_grid_search() {
    let k = ManifoldKind::circle(2.0 * PI);
    let pts = vec![
        k.project_ambient(&[0.2]).unwrap(),
        k.project_ambient(&[0.8]).unwrap(),
    ];
    let m = frechet_mean(&pts, &[1.0, 1.0]).unwrap();
    assert_relative_eq!(m.coords()[0], 0.5, epsilon = 1e-8);

    // Independent oracle: dense grid search of the objective.
    let objective = |y: &ManifoldPoint| -> f64 {
        pts.iter().map(|p| p.dist(y).unwrap().powi(2)).sum()
    };
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..100_000 {
        let a = 2.0 * PI * i as f64 / 100_000.0;
        let v = objective(&k.project_ambient(&[a]).unwrap());
        if v < best.0 {
            best = (v, a);
        }
    }
    assert!((best.1 - 0.5).abs() < 1e-4);
}

#[test]
fn frechet_mean_stays_in_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let kind = ManifoldKind::sphere(1.0);
    let center = kind.reference_point();
    let radius = 0.5 * kind.convexity_radius();
    for _ in 0..20 {
        let pts: Vec<ManifoldPoint> = (0..6)
            .map(|_| center.exp(&center.random_tangent(&mut rng, radius)).unwrap())
            .collect();
        let m = frechet_mean(&pts, &vec![1.0; 6]).unwrap();
        assert!(m.dist(&center).unwrap() <= radius + 1e-9);
    }
}

#[test]
fn frechet_regression_weights_and_ols_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let kind = ManifoldKind::euclidean(1);
    let obs: Vec<(f64, Vec<f64>)> = (0..30)
        .map(|i| {
            let t = i as f64 / 29.0;
            let noise = kind.random_point(&mut rng).coords()[0] * 0.2;
            (t, vec![1.5 * t - 0.3 + noise])
        })
        .collect();
    let data = dataset(&kind, &obs);
    let model = FrechetRegressionModel::fit(&data);

    // Closed-form OLS on the same data.
    let n = data.n_total() as f64;
    let tb = data.observations().map(|(t, _)| t).sum::<f64>() / n;
    let yb = data.observations().map(|(_, y)| y.coords()[0]).sum::<f64>() / n;
    let sxx: f64 = data.observations().map(|(t, _)| (t - tb) * (t - tb)).sum();
    let sxy: f64 = data
        .observations()
        .map(|(t, y)| (t - tb) * (y.coords()[0] - yb))
        .sum();
    let slope = sxy / sxx;
    for j in 0..50 {
        let t = j as f64 / 49.0;
        let pred = model.predict(t).unwrap().coords()[0];
        let ols = yb + slope * (t - tb);
        assert!((pred - ols).abs() <= 1e-8, "t={t}: {pred} vs {ols}");
    }
    // At the design mean the weights are uniform.
    let at_mean = model.predict(tb).unwrap().coords()[0];
    assert_relative_eq!(at_mean, yb, epsilon = 1e-8);
}

#[test]
fn geodesic_regression_constant_data() {
    let k = ManifoldKind::sphere(1.0);
    let p = vec![0.0, 0.0, 1.0];
    let data = dataset(&k, &[(0.0, p.clone()), (0.5, p.clone()), (1.0, p.clone())]);
    let model = geodesic_regression_fit(&data, &GeodesicRegressionConfig::default()).unwrap();
    assert!(model.velocity.norm() < 1e-6);
    assert!(model.base.dist(&k.project_ambient(&p).unwrap()).unwrap() < 1e-8);
}

#[test]
fn geodesic_regression_recovers_euclidean_line() {
    let k = ManifoldKind::euclidean(1);
    let obs: Vec<(f64, Vec<f64>)> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            (t, vec![0.7 - 1.3 * t])
        })
        .collect();
    let data = dataset(&k, &obs);
    let model = geodesic_regression_fit(&data, &GeodesicRegressionConfig::default()).unwrap();
    for j in 0..10 {
        let t = j as f64 / 9.0;
        let pred = model.predict(t).unwrap().coords()[0];
        assert!((pred - (0.7 - 1.3 * t)).abs() < 1e-6);
    }
}

#[test]
fn geodesic_regression_recovers_great_circle() {
    let k = ManifoldKind::sphere(1.0);
    let p = k.reference_point();
    let w = p.tangent_basis()[0].clone();
    let obs: Vec<(f64, Vec<f64>)> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            (t, p.exp(&w.scaled(t)).unwrap().coords().to_vec())
        })
        .collect();
    let data = dataset(&k, &obs);
    let model = geodesic_regression_fit(&data, &GeodesicRegressionConfig::default()).unwrap();
    for j in 0..20 {
        let t = j as f64 / 19.0;
        let truth = p.exp(&w.scaled(t)).unwrap();
        assert!(model.predict(t).unwrap().dist(&truth).unwrap() < 1e-4, "t={t}");
    }
}

#[test]
fn tv_zero_penalty_keeps_data() {
    let k = ManifoldKind::circle(2.0 * PI);
    let data = dataset(&k, &[(0.0, vec![0.2]), (0.5, vec![1.1]), (1.0, vec![0.4])]);
    let fitres = tv_frechet_fit(&data, 0.0, 50).unwrap();
    for (f, ys) in fitres.nodal().iter().zip(data.responses()) {
        assert!(f.dist(&ys[0]).unwrap() < 1e-9);
    }
}

#[test]
fn tv_huge_penalty_fuses_to_mean() {
    let k = ManifoldKind::euclidean(1);
    let data = dataset(&k, &[(0.0, vec![0.0]), (1.0, vec![10.0])]);
    let fitres = tv_frechet_fit(&data, 1e4, 400).unwrap();
    assert!((fitres.nodal()[0].coords()[0] - 5.0).abs() < 1e-2);
    assert!((fitres.nodal()[1].coords()[0] - 5.0).abs() < 1e-2);
}

#[test]
fn tv_objective_non_increasing_on_euclidean_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let k = ManifoldKind::euclidean(1);
    let obs: Vec<(f64, Vec<f64>)> = (0..25)
        .map(|i| {
            let t = i as f64 / 24.0;
            let level = if t < 0.5 { 0.0 } else { 2.0 };
            (t, vec![level + 0.1 * k.random_point(&mut rng).coords()[0]])
        })
        .collect();
    let data = dataset(&k, &obs);
    let lambda = 0.05;
    let mut prev = f64::INFINITY;
    for sweeps in [1usize, 3, 10, 30, 100] {
        let fitres = tv_frechet_fit(&data, lambda, sweeps).unwrap();
        let obj = tv_objective(&data, fitres.nodal(), lambda).unwrap();
        assert!(obj <= prev + 1e-12, "objective rose at {sweeps} sweeps");
        prev = obj;
    }
}

#[test]
fn tv_staircase_on_piecewise_constant_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let k = ManifoldKind::euclidean(1);
    let obs: Vec<(f64, Vec<f64>)> = (0..40)
        .map(|i| {
            let t = i as f64 / 39.0;
            let level = if t < 0.33 {
                0.0
            } else if t < 0.66 {
                2.0
            } else {
                -1.0
            };
            (t, vec![level + 0.05 * k.random_point(&mut rng).coords()[0]])
        })
        .collect();
    let data = dataset(&k, &obs);
    let fitres = tv_frechet_fit(&data, 0.2, 400).unwrap();
    // Count jumps above a resolution threshold: should stay near the true 2.
    let mut jumps = 0;
    for w in fitres.nodal().windows(2) {
        if w[0].dist(&w[1]).unwrap() > 0.4 {
            jumps += 1;
        }
    }
    assert!(jumps <= 4, "got {jumps} jumps");
}

#[test]
fn tv_predict_nearest_with_left_ties() {
    let k = ManifoldKind::euclidean(1);
    let data = dataset(&k, &[(0.2, vec![1.0]), (0.8, vec![2.0])]);
    let fitres = tv_frechet_fit(&data, 0.0, 10).unwrap();
    assert_relative_eq!(fitres.predict(0.2).coords()[0], 1.0, epsilon = 1e-9);
    // Exact midpoint resolves to the left knot.
    assert_relative_eq!(fitres.predict(0.5).coords()[0], 1.0, epsilon = 1e-9);
    assert_relative_eq!(fitres.predict(0.99).coords()[0], 2.0, epsilon = 1e-9);
}

#[test]
fn smoothing_spline_interpolates_at_zero_target() {
    let ts: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let ys: Vec<f64> = ts.iter().map(|t| (3.0 * t).sin()).collect();
    let sp = cubic_smoothing_spline_fit(&ts, &ys, 0.0).unwrap();
    for (t, y) in ts.iter().zip(&ys) {
        assert!((sp.evaluate(*t) - y).abs() < 1e-9);
    }
}

#[test]
fn smoothing_spline_large_target_is_ols_line() {
    let ts: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let ys: Vec<f64> = ts.iter().map(|t| 2.0 * t + 0.5 + 0.3 * (20.0 * t).sin()).collect();
    let sp = cubic_smoothing_spline_fit(&ts, &ys, 1e6).unwrap();
    let (b0, b1) = ols_line(&ts, &ys);
    for j in 0..20 {
        let t = j as f64 / 19.0;
        assert!((sp.evaluate(t) - (b0 + b1 * t)).abs() < 1e-9);
    }
}

#[test]
fn smoothing_spline_hits_residual_target() {
    let ts: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
    let ys: Vec<f64> = ts.iter().map(|t| (6.0 * t).sin() + 0.1 * (40.0 * t).cos()).collect();
    let target = 0.05;
    let sp = cubic_smoothing_spline_fit(&ts, &ys, target).unwrap();
    let rss: f64 = ts.iter().zip(&ys).map(|(t, y)| (sp.evaluate(*t) - y).powi(2)).sum();
    assert_relative_eq!(rss, target, max_relative = 1e-3);
}

#[test]
fn smoothing_spline_needs_four_points() {
    let err = cubic_smoothing_spline_fit(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0], 0.1);
    assert!(matches!(err, Err(FitError::InsufficientData(_))));
}

#[test]
fn extrinsic_prediction_lies_on_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let kind = ManifoldKind::sphere(1.0);
    let base = kind.reference_point();
    let obs: Vec<(f64, Vec<f64>)> = (0..15)
        .map(|i| {
            let v = base.random_tangent(&mut rng, 0.8);
            (i as f64 / 14.0, base.exp(&v).unwrap().coords().to_vec())
        })
        .collect();
    let data = dataset(&kind, &obs);
    let sp = ExtrinsicSpline::fit(&data, 0.5).unwrap();
    for j in 0..30 {
        let p = sp.predict(j as f64 / 29.0).unwrap();
        let norm: f64 = p.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-10);
    }
}
