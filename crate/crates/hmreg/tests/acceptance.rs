//! End-to-end acceptance checks, one test per criterion. Each test prints
//! a single pass/fail line; run with `--nocapture` to see them all. The
//! heavier statistical checks (criteria 7 to 10) are scaled-down versions
//! of the shipped experiment configs with explicit runtime budgets.

use hmreg::manifold::{curvature_factor, ManifoldKind, ManifoldPoint};
use hmreg::sim::{
    generate_dataset, run_phase_experiment, run_rate_experiment, CurveSpec, CvConfig, Method,
    PhaseConfig, RateConfig, SimConfig,
};
use hmreg::spline::{discrete_objective, fit, jump_residual, riemannian_gradient, Dataset, FitConfig};
use hmreg::wind::{evaluate_wind, parse_isd, BlockSplit, IsdColumns};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

fn report(id: u32, name: &str, pass: bool) {
    println!("criterion {id:2} ({name}): {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed");
}

fn six_kinds() -> Vec<ManifoldKind> {
    vec![
        ManifoldKind::circle(2.0 * PI),
        ManifoldKind::sphere(1.0),
        ManifoldKind::Hyperbolic2,
        ManifoldKind::Spd2,
        ManifoldKind::So3,
        ManifoldKind::torus2(2.0 * PI, 2.0 * PI),
    ]
}

#[test]
fn criterion_01_geometry_suite() {
    let start = Instant::now();
    let mut pass = true;
    for kind in six_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xace);
        let cap = match kind.injectivity_radius() {
            r if r.is_finite() => 0.45 * r,
            _ => 1.5,
        };
        for _ in 0..1000 {
            let p = kind.random_point(&mut rng);
            let v = p.random_tangent(&mut rng, cap);
            let q = p.exp(&v).unwrap();
            let r = kind.random_point(&mut rng);

            // log(exp) and exp(log) round trips.
            let w = p.log(&q).unwrap();
            pass &= w.add(&v.scaled(-1.0)).norm() < 1e-8;
            pass &= p.exp(&w).unwrap().dist(&q).unwrap() < 1e-8;

            // Distance symmetry and the triangle inequality.
            let dpq = p.dist(&q).unwrap();
            pass &= (dpq - q.dist(&p).unwrap()).abs() < 1e-10;
            pass &= dpq <= p.dist(&r).unwrap() + r.dist(&q).unwrap() + 1e-8;
            pass &= (dpq - v.norm()).abs() < 1e-8;

            // Tangent basis orthonormality.
            let basis = p.tangent_basis();
            for (i, bi) in basis.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    pass &= (bi.inner(bj) - want).abs() < 1e-10;
                }
            }

            // Projection idempotence on a random ambient vector.
            let w: Vec<f64> = (0..kind.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let once = p.tangent_project(&w).unwrap();
            let twice = p.tangent_project(once.components()).unwrap();
            pass &= once.add(&twice.scaled(-1.0)).norm() < 1e-10;
        }
    }
    pass &= start.elapsed().as_secs_f64() < 10.0;
    report(1, "geometry suite", pass);
}

#[test]
fn criterion_02_closed_form_two_point() {
    let start = Instant::now();
    let kind = ManifoldKind::circle(2.0 * PI);
    let data = Dataset::from_observations(
        kind.clone(),
        vec![
            (0.0, kind.project_ambient(&[0.0]).unwrap()),
            (1.0, kind.project_ambient(&[1.0]).unwrap()),
        ],
    )
    .unwrap();
    let (spline, rep) = fit(&data, 0.25, &FitConfig::default()).unwrap();
    let f1 = spline.nodal()[0].coords()[0];
    let f2 = spline.nodal()[1].coords()[0];
    let pass = rep.converged
        && (f1 - 0.25).abs() < 1e-8
        && (f2 - 0.75).abs() < 1e-8
        && start.elapsed().as_secs_f64() < 1.0;
    report(2, "closed-form two-point fit", pass);
}

/// Independent flat-space oracle: Thomas solve of the stationarity
/// system (I/n + lambda L) f = Y/n for 1-d Euclidean data.
fn tridiagonal_oracle(knots: &[f64], ys: &[f64], lambda: f64) -> Vec<f64> {
    let m = knots.len();
    let n = m as f64;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        diag[i] = 1.0 / n;
        rhs[i] = ys[i] / n;
        if i + 1 < m {
            let d = knots[i + 1] - knots[i];
            diag[i] += lambda / d;
            sup[i] = -lambda / d;
        }
        if i > 0 {
            let d = knots[i] - knots[i - 1];
            diag[i] += lambda / d;
            sub[i] = -lambda / d;
        }
    }
    for i in 1..m {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut f = vec![0.0; m];
    f[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        f[i] = (rhs[i] - sup[i] * f[i + 1]) / diag[i];
    }
    f
}

#[test]
fn criterion_03_euclidean_oracle_equivalence() {
    let start = Instant::now();
    let kind = ManifoldKind::euclidean(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
    let mut pass = true;
    let cfg = FitConfig { max_iters: 5000, grad_tol: 1e-10, ..FitConfig::default() };
    for inst in 0..50 {
        let n = 10 + (inst * 137) % 191; // spread over 10..200
        // Stratified jittered design: knot gaps stay bounded below, so the
        // check exercises the solver rather than degenerate conditioning.
        let ts: Vec<f64> =
            (0..n).map(|i| (i as f64 + 0.1 + 0.8 * rng.gen::<f64>()) / n as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lambda = 10f64.powf(rng.gen_range(-3.0..0.5));
        let obs: Vec<(f64, ManifoldPoint)> = ts
            .iter()
            .zip(&ys)
            .map(|(&t, &y)| (t, kind.project_ambient(&[y]).unwrap()))
            .collect();
        let data = Dataset::from_observations(kind.clone(), obs).unwrap();
        let (spline, _) = fit(&data, lambda, &cfg).unwrap();
        let oracle = tridiagonal_oracle(data.knots(), &ys, lambda);
        let sup = spline
            .nodal()
            .iter()
            .zip(&oracle)
            .map(|(p, o)| (p.coords()[0] - o).abs())
            .fold(0.0f64, f64::max);
        if sup >= 1e-6 {
            println!("  instance {inst}: n={} lambda={lambda:.3e} sup={sup:.3e}", data.n_knots());
        }
        pass &= sup < 1e-6;
    }
    println!("  elapsed {:.1}s", start.elapsed().as_secs_f64());
    pass &= start.elapsed().as_secs_f64() < 30.0;
    report(3, "Euclidean oracle equivalence", pass);
}

#[test]
fn criterion_04_gradient_finite_differences() {
    let start = Instant::now();
    let mut pass = true;
    let specs = [
        CurveSpec::CircleWind { k: 1 },
        CurveSpec::S2Arc { radius: 1.0 },
        CurveSpec::H2Spiral,
        CurveSpec::SpdArc,
        CurveSpec::So3Loop,
        CurveSpec::TorusWind,
    ];
    for (si, spec) in specs.iter().enumerate() {
        let sim = SimConfig {
            curve: spec.clone(),
            n: 12,
            sigma: 0.2,
            seed: 777 + si as u64,
            eval_grid_size: 2,
            replications: 1,
        };
        let data = generate_dataset(&sim).unwrap();
        let lambda = 0.05;
        // Evaluate away from the data so no log vanishes.
        let mut rng = ChaCha8Rng::seed_from_u64(99 + si as u64);
        let nodal: Vec<ManifoldPoint> = data
            .responses()
            .iter()
            .map(|ys| {
                let v = ys[0].random_tangent(&mut rng, 0.2);
                ys[0].exp(&v).unwrap()
            })
            .collect();
        let grads = riemannian_gradient(&data, &nodal, lambda).unwrap();
        let scale = grads.iter().map(|g| g.norm()).fold(1.0f64, f64::max);
        let h = 1e-6;
        for (i, f) in nodal.iter().enumerate() {
            for b in f.tangent_basis() {
                let bump = |s: f64| {
                    let mut pts = nodal.clone();
                    pts[i] = f.exp(&b.scaled(s)).unwrap();
                    discrete_objective(&data, &pts, lambda).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                pass &= (grads[i].inner(&b) - fd).abs() / scale < 1e-5;
            }
        }
    }
    pass &= start.elapsed().as_secs_f64() < 30.0;
    report(4, "finite-difference gradient agreement", pass);
}

#[test]
fn criterion_05_jump_identity() {
    let start = Instant::now();
    let specs = [
        CurveSpec::CircleWind { k: 1 },
        CurveSpec::S2Arc { radius: 1.0 },
        CurveSpec::H2Spiral,
        CurveSpec::SpdArc,
        CurveSpec::So3Loop,
        CurveSpec::TorusWind,
        CurveSpec::EuclideanLine,
    ];
    let cfg = FitConfig { max_iters: 5000, grad_tol: 1e-7, ..FitConfig::default() };
    let mut pass = true;
    let mut converged = 0;
    for inst in 0..50u64 {
        let spec = &specs[(inst % specs.len() as u64) as usize];
        let sim = SimConfig {
            curve: spec.clone(),
            n: 15 + (inst as usize * 7) % 26,
            sigma: 0.15,
            seed: 4242 + inst,
            eval_grid_size: 2,
            replications: 1,
        };
        let data = generate_dataset(&sim).unwrap();
        let lambda = [0.01, 0.05, 0.2][(inst % 3) as usize];
        let (spline, rep) = fit(&data, lambda, &cfg).unwrap();
        // The identity residual = |grad| / (2 lambda) needs the gradient
        // tolerance itself; fits that stop on objective stagnation at the
        // floating-point floor carry a slightly larger gradient.
        if rep.grad_norm > cfg.grad_tol {
            continue;
        }
        converged += 1;
        let bound = cfg.grad_tol / (2.0 * lambda);
        for r in jump_residual(&spline, &data).unwrap() {
            if r > bound {
                println!("  instance {inst} ({}): residual {r:.3e} > bound {bound:.3e}", spec.name());
            }
            pass &= r <= bound;
        }
    }
    println!("  converged {converged}/50, elapsed {:.1}s", start.elapsed().as_secs_f64());
    pass &= converged >= 25;
    pass &= start.elapsed().as_secs_f64() < 60.0;
    report(5, "stationarity jump identity", pass);
}

#[test]
fn criterion_06_energy_barrier_on_phase_outputs() {
    let cfg = PhaseConfig {
        ks: vec![1, 2, 3],
        ns: vec![50, 200],
        c_lambdas: vec![0.3],
        replications: 5,
        ..PhaseConfig::default()
    };
    let out = run_phase_experiment(&cfg);
    let mut pass = out.failures.is_empty() && !out.rows.is_empty();
    let mut checked = 0;
    for row in &out.rows {
        if let Some(k) = row.class {
            if k != 0 {
                checked += 1;
                let bound = 2.0 * PI * PI * (k * k) as f64;
                if row.dirichlet < bound - 1e-9 {
                    println!(
                        "  k={} n={} rep={}: dirichlet {:.6} < bound {:.6}",
                        row.k, row.n, row.rep, row.dirichlet, bound
                    );
                }
                pass &= row.dirichlet >= bound - 1e-9;
            }
        }
    }
    println!("  checked {checked} wound fits, failures {:?}", out.failures.len());
    pass &= checked > 0;
    report(6, "energy barrier on fitted windings", pass);
}

#[test]
fn criterion_07_rate_slope() {
    let start = Instant::now();
    let cfg = RateConfig {
        curves: vec![(CurveSpec::S2Arc { radius: 1.0 }, 0.25)],
        ns: vec![100, 200, 400, 800],
        methods: vec![Method::Proposed],
        replications: 8,
        seed: 20230601,
        cv: CvConfig::default(),
        eval_grid_size: 50,
    };
    let out = run_rate_experiment(&cfg);
    let mut pass = out.failures.is_empty();
    let slope = out.slopes.iter().find(|s| s.method == "proposed").map(|s| s.slope);
    pass &= matches!(slope, Some(s) if (-0.95..=-0.45).contains(&s));
    let m400 = out
        .summaries
        .iter()
        .find(|s| s.n == 400 && s.method == "proposed")
        .map(|s| s.mise_mean);
    pass &= matches!(m400, Some(m) if (0.001..=0.012).contains(&m));
    pass &= start.elapsed().as_secs_f64() < 900.0;
    println!("  slope={slope:?} mise(n=400)={m400:?}");
    report(7, "convergence-rate slope", pass);
}

#[test]
fn criterion_08_baseline_ordering() {
    let start = Instant::now();
    let cfg = RateConfig {
        curves: vec![
            (CurveSpec::S2Arc { radius: 1.0 }, 0.25),
            (CurveSpec::H2Spiral, 0.25),
        ],
        ns: vec![400],
        methods: vec![Method::Proposed, Method::FrechetRegression, Method::TvFrechet],
        replications: 5,
        seed: 20230601,
        cv: CvConfig::default(),
        eval_grid_size: 50,
    };
    let out = run_rate_experiment(&cfg);
    let mut pass = out.failures.is_empty();
    let mean = |curve: &str, method: &str| {
        out.summaries
            .iter()
            .find(|s| s.curve == curve && s.method == method)
            .map(|s| s.mise_mean)
            .unwrap_or(f64::NAN)
    };
    for curve in ["s2-arc", "h2-spiral"] {
        pass &= mean(curve, "frechet") >= 5.0 * mean(curve, "proposed");
    }
    let ratio = mean("s2-arc", "tv") / mean("s2-arc", "proposed");
    pass &= (0.8..=4.0).contains(&ratio);
    pass &= start.elapsed().as_secs_f64() < 600.0;
    println!(
        "  s2 proposed={:.2e} frechet={:.2e} tv={:.2e} (tv ratio {ratio:.2}); h2 proposed={:.2e} frechet={:.2e}",
        mean("s2-arc", "proposed"),
        mean("s2-arc", "frechet"),
        mean("s2-arc", "tv"),
        mean("h2-spiral", "proposed"),
        mean("h2-spiral", "frechet"),
    );
    report(8, "baseline ordering", pass);
}

#[test]
fn criterion_09_phase_transition() {
    let start = Instant::now();
    let cfg = PhaseConfig {
        ks: vec![1],
        ns: vec![10, 200],
        c_lambdas: vec![0.3],
        replications: 20,
        ..PhaseConfig::default()
    };
    let out = run_phase_experiment(&cfg);
    let mut pass = out.failures.is_empty();
    let recovery = |n: usize| {
        out.cells.iter().find(|c| c.n == n).map(|c| c.recovery).unwrap_or(f64::NAN)
    };
    pass &= recovery(200) >= 0.9;
    pass &= recovery(10) <= 0.5;
    pass &= start.elapsed().as_secs_f64() < 300.0;
    println!("  recovery(n=10)={} recovery(n=200)={}", recovery(10), recovery(200));
    report(9, "winding-number phase transition", pass);
}

#[test]
fn criterion_10_over_regularization() {
    let cfg = PhaseConfig {
        ks: vec![1],
        ns: vec![200],
        c_lambdas: vec![1e3],
        // Exponent zero makes the constant an absolute penalty.
        rate_exponent: 0.0,
        replications: 20,
        ..PhaseConfig::default()
    };
    let out = run_phase_experiment(&cfg);
    let pass = out.failures.is_empty()
        && out.cells.len() == 1
        && out.cells[0].recovery <= 0.1;
    println!("  recovery at lambda=1e3: {}", out.cells[0].recovery);
    report(10, "over-regularization breakdown", pass);
}

#[test]
fn criterion_11_curvature_factor() {
    let mut pass = true;
    for r in [0.0, 0.3, 1.0, 2.5] {
        pass &= curvature_factor(0.0, r).unwrap() == 1.0;
    }
    // Direct evaluation of sqrt(k) r / tan(sqrt(k) r) at k=1, r=0.1.
    let direct = 0.1f64 / 0.1f64.tan();
    pass &= (curvature_factor(1.0, 0.1).unwrap() - direct).abs() < 1e-6;
    // Second-order expansion bound on the small-curvature range.
    for kappa in [0.1f64, 0.5, 1.0, 2.0] {
        for i in 1..=20 {
            let r = (0.1 / kappa).sqrt() * i as f64 / 20.0;
            let kr2 = kappa * r * r;
            assert!(kr2 <= 0.1 + 1e-12);
            let eta = curvature_factor(kappa, r).unwrap();
            pass &= (eta - (1.0 - kr2 / 3.0)).abs() <= kappa * kappa * r.powi(4);
        }
    }
    report(11, "curvature factor values and expansion", pass);
}

#[test]
fn criterion_12_wind_pipeline() {
    let path = format!("{}/../../data/wind/fixture.csv", env!("CARGO_MANIFEST_DIR"));
    let file = std::fs::File::open(path).unwrap();
    let (records, _) = parse_isd(file, &IsdColumns::default()).unwrap();
    let split = BlockSplit::new(records.len()).unwrap();
    let metrics = evaluate_wind(&records, &Method::ALL, &split).unwrap();
    let mut pass = metrics.len() == 5;
    for m in &metrics {
        pass &= m.msge.is_finite() && m.msge >= 0.0;
    }
    let msge = |name: &str| {
        metrics.iter().find(|m| m.method == name).map(|m| m.msge).unwrap_or(f64::NAN)
    };
    pass &= msge("proposed") <= msge("extrinsic");
    println!("  proposed={} extrinsic={}", msge("proposed"), msge("extrinsic"));
    report(12, "wind pipeline on fixture", pass);
}
