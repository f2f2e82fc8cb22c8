use super::*;
use crate::manifold::ManifoldPoint;
use std::f64::consts::PI;

fn circle_spline(kind: &ManifoldKind, angles: &[f64]) -> GeodesicSpline {
    let period = match kind {
        ManifoldKind::Circle { circumference } => *circumference,
        _ => panic!("circle only"),
    };
    let n = angles.len();
    let knots: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let nodal: Vec<ManifoldPoint> = angles
        .iter()
        .map(|a| ManifoldPoint::new(kind.clone(), vec![a.rem_euclid(period)]).unwrap())
        .collect();
    GeodesicSpline::new(knots, nodal, 0.1).unwrap()
}

fn winding_curve(kind: &ManifoldKind, k: i64, n: usize) -> GeodesicSpline {
    let angles: Vec<f64> = (0..n)
        .map(|i| 2.0 * PI * k as f64 * i as f64 / (n - 1) as f64)
        .collect();
    circle_spline(kind, &angles)
}

#[test]
fn constant_spline_is_trivial() {
    let kind = ManifoldKind::circle(2.0 * PI);
    let s = circle_spline(&kind, &[1.3; 8]);
    assert_eq!(winding_number(&s).unwrap(), HomotopyClass::Circle(0));
    assert_eq!(discrete_dirichlet(&s), 0.0);
}

#[test]
fn winding_recovers_integer_classes() {
    let kind = ManifoldKind::circle(2.0 * PI);
    for k in [1i64, 2, 3, -2] {
        let s = winding_curve(&kind, k, 100);
        assert_eq!(winding_number(&s).unwrap(), HomotopyClass::Circle(k), "k={k}");
    }
}

#[test]
fn dirichlet_of_unit_winding_close_to_continuum() {
    let kind = ManifoldKind::circle(2.0 * PI);
    for n in [50, 100, 400] {
        let s = winding_curve(&kind, 1, n);
        let dir = discrete_dirichlet(&s);
        assert!((dir - 2.0 * PI * PI).abs() <= 0.01 * 2.0 * PI * PI, "n={n} dir={dir}");
    }
}

#[test]
fn dirichlet_dominates_barrier() {
    let kind = ManifoldKind::circle(2.0 * PI);
    // Perturbed winding curves stay in class; their energy must sit above
    // the class barrier.
    for k in [1i64, 2, 3] {
        let n = 120;
        let angles: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                // Endpoint-preserving wiggle keeps the total displacement
                // at exactly k full turns.
                2.0 * PI * k as f64 * t + 0.3 * (6.0 * PI * t).sin()
            })
            .collect();
        let s = circle_spline(&kind, &angles);
        let class = winding_number(&s).unwrap();
        assert_eq!(class, HomotopyClass::Circle(k));
        let barrier = energy_barrier(&kind, &class, 1.0).unwrap();
        assert!(discrete_dirichlet(&s) >= barrier - 1e-9);
        assert!(discrete_dirichlet(&s) >= 2.0 * PI * PI * (k * k) as f64 - 1e-9);
    }
}

#[test]
fn winding_invariant_under_common_rotation() {
    let kind = ManifoldKind::circle(2.0 * PI);
    for shift in [0.4, 1.9, 3.3, 5.8] {
        let n = 100;
        let angles: Vec<f64> = (0..n)
            .map(|i| 2.0 * PI * 2.0 * i as f64 / (n - 1) as f64 + shift)
            .collect();
        let s = circle_spline(&kind, &angles);
        assert_eq!(winding_number(&s).unwrap(), HomotopyClass::Circle(2));
    }
}

#[test]
fn dirichlet_scales_with_domain_length() {
    let kind = ManifoldKind::circle(2.0 * PI);
    let s = winding_curve(&kind, 1, 60);
    let stretched = GeodesicSpline::new(
        s.knots().iter().map(|t| 0.5 + 3.0 * t).collect(),
        s.nodal().to_vec(),
        s.lambda(),
    )
    .unwrap();
    let ratio = discrete_dirichlet(&s) / discrete_dirichlet(&stretched);
    assert!((ratio - 3.0).abs() < 1e-12);
}

#[test]
fn ambiguous_increment_detected() {
    let kind = ManifoldKind::circle(2.0 * PI);
    let s = circle_spline(&kind, &[0.0, PI, 0.0]);
    assert!(matches!(winding_raw(&s), Err(TopologyError::AmbiguousIncrement { .. })));
    assert!(!recovery_indicator(&s, &HomotopyClass::Circle(0)));
}

#[test]
fn torus_half_winding_reports_raw_and_refuses_class() {
    let kind = ManifoldKind::torus2(2.0 * PI, 2.0 * PI);
    let n = 200;
    let knots: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let nodal: Vec<ManifoldPoint> = knots
        .iter()
        .map(|t| {
            ManifoldPoint::new(
                kind.clone(),
                vec![(3.0 * PI * t).rem_euclid(2.0 * PI), (2.0 * PI * t).rem_euclid(2.0 * PI)],
            )
            .unwrap()
        })
        .collect();
    let s = GeodesicSpline::new(knots, nodal, 0.1).unwrap();
    let raw = winding_raw(&s).unwrap();
    assert!((raw[0] - 1.5).abs() < 1e-9);
    assert!((raw[1] - 1.0).abs() < 1e-9);
    match winding_number(&s) {
        Err(TopologyError::NoClass { raw, frac }) => {
            assert!((raw - 1.5).abs() < 1e-9);
            assert!((frac - 0.5).abs() < 1e-9);
        }
        other => panic!("expected NoClass, got {other:?}"),
    }
}

#[test]
fn barrier_values() {
    let circle = ManifoldKind::circle(2.0 * PI);
    let b = energy_barrier(&circle, &HomotopyClass::Circle(2), 1.0).unwrap();
    assert!((b - 8.0 * PI * PI).abs() < 1e-12);
    assert_eq!(energy_barrier(&circle, &HomotopyClass::Circle(0), 1.0).unwrap(), 0.0);

    let torus = ManifoldKind::torus2(2.0 * PI, 2.0 * PI);
    let b = energy_barrier(&torus, &HomotopyClass::Torus(1, 1), 1.0).unwrap();
    assert!((b - 4.0 * PI * PI).abs() < 1e-12);

    let sphere = ManifoldKind::sphere(1.0);
    assert_eq!(energy_barrier(&sphere, &HomotopyClass::Circle(0), 1.0).unwrap(), 0.0);
    assert!(matches!(
        energy_barrier(&sphere, &HomotopyClass::Circle(1), 1.0),
        Err(TopologyError::UnsupportedManifold(_))
    ));
}

#[test]
fn recovery_on_noiseless_interpolant() {
    let kind = ManifoldKind::circle(2.0 * PI);
    let s = winding_curve(&kind, 1, 100);
    assert!(recovery_indicator(&s, &HomotopyClass::Circle(1)));
    let flat = circle_spline(&kind, &[0.7; 100]);
    assert!(!recovery_indicator(&flat, &HomotopyClass::Circle(1)));
}
