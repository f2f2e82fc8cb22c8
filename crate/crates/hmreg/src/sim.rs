//! Simulation harness: test curves, noise, MISE, cross validation, and
//! the three experiment protocols (convergence rate, winding-number
//! phase diagram, curvature sweep).
//!
//! Every experiment is deterministic given its seed. Replication `r`
//! derives its own seed by a splitmix hash of the base seed, so
//! replications can run in parallel and aggregate order-independently;
//! within a replication the design stream uses the derived seed and the
//! noise stream uses the derived seed plus one.
//!
//! ```
//! use hmreg::sim::{generate_dataset, mise, CurveSpec, SimConfig, TruthPredictor};
//!
//! let cfg = SimConfig {
//!     curve: CurveSpec::CircleWind { k: 1 },
//!     n: 50,
//!     sigma: 0.0,
//!     seed: 7,
//!     eval_grid_size: 50,
//!     replications: 1,
//! };
//! let data = generate_dataset(&cfg).unwrap();
//! assert_eq!(data.n_total(), 50);
//! // The truth itself has zero integrated squared error.
//! let truth = TruthPredictor(cfg.curve.clone());
//! assert!(mise(&truth, &cfg.curve, 50).unwrap() < 1e-30);
//! ```

use crate::baselines::{
    geodesic_regression_fit, tv_frechet_fit, ExtrinsicSpline, FrechetRegressionModel,
    GeodesicRegressionConfig, GeodesicRegressionModel, TvFrechetFit,
};
use crate::error::FitError;
use crate::manifold::{ManifoldKind, ManifoldPoint};
use crate::spline::{fit, fit_with_init, Dataset, FitConfig, GeodesicSpline};
use crate::topology::{discrete_dirichlet, winding_raw};
use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Parametric test curves on the experimental manifolds, with all free
/// constants frozen here (and documented in the shipped config files) so
/// runs are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveSpec {
    /// exp_{p0}(u v0 + u (1-u) w0) on a sphere of the given radius, with
    /// p0 near the south pole, w0 orthogonal to v0, and u = u(t) a
    /// smootherstep time warp with zero velocity at both endpoints.
    S2Arc { radius: f64 },
    /// Logarithmic spiral in geodesic polar coordinates on the
    /// hyperboloid, staying inside geodesic radius 1.5.
    H2Spiral,
    /// P0^{1/2} exp(t S + t (1-t) W) P0^{1/2} on 2x2 SPD matrices.
    SpdArc,
    /// One full turn of a one-parameter subgroup of rotations around a
    /// fixed unit axis; returns to the identity at t = 1.
    So3Loop,
    /// (3 pi t mod 2 pi, 2 pi t mod 2 pi) on the square flat torus.
    TorusWind,
    /// 2 pi k t mod 2 pi on the circle of circumference 2 pi.
    CircleWind { k: i64 },
    /// A straight line in R^1, the closed-form oracle case.
    EuclideanLine,
}

impl CurveSpec {
    pub fn kind(&self) -> ManifoldKind {
        match self {
            CurveSpec::S2Arc { radius } => ManifoldKind::sphere(*radius),
            CurveSpec::H2Spiral => ManifoldKind::Hyperbolic2,
            CurveSpec::SpdArc => ManifoldKind::Spd2,
            CurveSpec::So3Loop => ManifoldKind::So3,
            CurveSpec::TorusWind => ManifoldKind::torus2(2.0 * PI, 2.0 * PI),
            CurveSpec::CircleWind { .. } => ManifoldKind::circle(2.0 * PI),
            CurveSpec::EuclideanLine => ManifoldKind::euclidean(1),
        }
    }

    pub fn name(&self) -> String {
        match self {
            CurveSpec::S2Arc { radius } if *radius == 1.0 => "s2-arc".into(),
            CurveSpec::S2Arc { radius } => format!("s2-arc:r={radius}"),
            CurveSpec::H2Spiral => "h2-spiral".into(),
            CurveSpec::SpdArc => "spd-arc".into(),
            CurveSpec::So3Loop => "so3-loop".into(),
            CurveSpec::TorusWind => "torus-wind".into(),
            CurveSpec::CircleWind { k } => format!("circle-wind:k={k}"),
            CurveSpec::EuclideanLine => "euclidean-line".into(),
        }
    }

    pub fn parse(name: &str) -> Result<Self, FitError> {
        let (base, param) = match name.split_once(':') {
            Some((b, p)) => (b, Some(p)),
            None => (name, None),
        };
        let num = |p: Option<&str>, key: &str| -> Result<f64, FitError> {
            let p = p.ok_or_else(|| FitError::InvalidInput(format!("curve {name} needs {key}=")))?;
            let v = p
                .strip_prefix(&format!("{key}="))
                .ok_or_else(|| FitError::InvalidInput(format!("expected {key}= in {name}")))?;
            v.parse().map_err(|_| FitError::InvalidInput(format!("bad number in curve {name}")))
        };
        match base {
            "s2-arc" => Ok(CurveSpec::S2Arc { radius: if param.is_some() { num(param, "r")? } else { 1.0 } }),
            "h2-spiral" => Ok(CurveSpec::H2Spiral),
            "spd-arc" => Ok(CurveSpec::SpdArc),
            "so3-loop" => Ok(CurveSpec::So3Loop),
            "torus-wind" => Ok(CurveSpec::TorusWind),
            "circle-wind" => Ok(CurveSpec::CircleWind { k: num(param, "k")? as i64 }),
            "euclidean-line" => Ok(CurveSpec::EuclideanLine),
            _ => Err(FitError::InvalidInput(format!("unknown curve {name}"))),
        }
    }
}

/// Evaluates the true curve at t in [0, 1].
pub fn true_curve(spec: &CurveSpec, t: f64) -> ManifoldPoint {
    let kind = spec.kind();
    match spec {
        CurveSpec::S2Arc { radius } => {
            // Unit-sphere construction scaled to radius R afterwards.
            let ang = 0.15f64;
            let p0 = Vector3::new(ang.sin(), 0.0, -ang.cos());
            let e1 = Vector3::new(ang.cos(), 0.0, ang.sin());
            let e2 = Vector3::new(0.0, 1.0, 0.0);
            // Smootherstep time warp: zero endpoint velocity matches the
            // free-boundary condition of the estimator, and the nonlinear
            // schedule breaks the straight-line-in-time structure that a
            // global regression could track.
            let u = t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
            let v = (u * 1.3) * e1 + (u * (1.0 - u) * 0.8) * e2;
            let s = v.norm();
            let m = if s < 1e-15 { p0 } else { s.cos() * p0 + s.sin() * v / s };
            kind.project_ambient(&[radius * m[0], radius * m[1], radius * m[2]])
                .expect("on-sphere point")
        }
        CurveSpec::H2Spiral => {
            let r = 0.15 * (1.5 * t).exp();
            let phi = 2.0 * PI * t;
            kind.project_ambient(&[r.sinh() * phi.cos(), r.sinh() * phi.sin(), r.cosh()])
                .expect("on-hyperboloid point")
        }
        CurveSpec::SpdArc => {
            let p0 = Matrix2::new(1.2, 0.3, 0.3, 0.8);
            let s = Matrix2::new(0.5, 0.2, 0.2, -0.3);
            let w = Matrix2::new(0.2, -0.1, -0.1, 0.1);
            let sq = crate::manifold::spd::spd_sqrt(&p0);
            let inner = crate::manifold::spd::sym_exp(&(t * s + (t * (1.0 - t)) * w));
            let m = sq * inner * sq;
            kind.project_ambient(&[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
                .expect("spd point")
        }
        CurveSpec::So3Loop => {
            let axis = Vector3::new(1.0, 2.0, 2.0) / 3.0;
            let r: Matrix3<f64> =
                crate::manifold::so3::skew_exp(&crate::manifold::so3::hat(&(2.0 * PI * t * axis)));
            let coords: Vec<f64> =
                (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| r[(i, j)]).collect();
            kind.project_ambient(&coords).expect("rotation point")
        }
        CurveSpec::TorusWind => kind
            .project_ambient(&[(3.0 * PI * t).rem_euclid(2.0 * PI), (2.0 * PI * t).rem_euclid(2.0 * PI)])
            .expect("torus point"),
        CurveSpec::CircleWind { k } => kind
            .project_ambient(&[(2.0 * PI * *k as f64 * t).rem_euclid(2.0 * PI)])
            .expect("circle point"),
        CurveSpec::EuclideanLine => kind.project_ambient(&[0.7 - 1.3 * t]).expect("line point"),
    }
}

/// One replication's data-generation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub curve: CurveSpec,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub eval_grid_size: usize,
    pub replications: usize,
}

/// Cross-validation settings: fold count, hyperparameter constants, and
/// the rate exponent mapping a constant c to the penalty c * n^exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub rate_exponent: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 5, grid: vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0], rate_exponent: -2.0 / 3.0 }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derived seed for replication `rep` of cell `cell`.
pub fn replication_seed(base: u64, cell: u64, rep: u64) -> u64 {
    splitmix(splitmix(base ^ splitmix(cell)) ^ rep)
}

/// Draws uniform sorted design points and noisy responses
/// Y_i = exp_{m(t_i)}(sigma eps_i) with eps_i standard Gaussian in an
/// orthonormal tangent basis. Design and noise come from independent
/// streams (seed, seed + 1) so the design is unchanged when sigma varies.
pub fn generate_dataset(cfg: &SimConfig) -> Result<Dataset, FitError> {
    let mut design = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut ts: Vec<f64> = (0..cfg.n).map(|_| design.gen::<f64>()).collect();
    ts.sort_by(f64::total_cmp);
    let mut obs = Vec::with_capacity(cfg.n);
    for t in ts {
        let m = true_curve(&cfg.curve, t);
        let y = if cfg.sigma > 0.0 {
            let eps = m.gaussian_tangent(&mut noise);
            m.exp(&eps.scaled(cfg.sigma))?
        } else {
            m
        };
        obs.push((t, y));
    }
    Dataset::from_observations(cfg.curve.kind(), obs)
}

/// Anything that predicts a manifold point from a design value.
pub trait Predictor: Send + Sync {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError>;
}

impl Predictor for GeodesicSpline {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        self.evaluate(t).map_err(FitError::from)
    }
}

impl Predictor for FrechetRegressionModel {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        FrechetRegressionModel::predict(self, t)
    }
}

impl Predictor for GeodesicRegressionModel {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        GeodesicRegressionModel::predict(self, t).map_err(FitError::from)
    }
}

impl Predictor for TvFrechetFit {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        Ok(TvFrechetFit::predict(self, t))
    }
}

impl Predictor for ExtrinsicSpline {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        ExtrinsicSpline::predict(self, t).map_err(FitError::from)
    }
}

/// The true curve as a predictor, for oracle checks.
pub struct TruthPredictor(pub CurveSpec);

impl Predictor for TruthPredictor {
    fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        Ok(true_curve(&self.0, t))
    }
}

/// Mean squared geodesic distance to the true curve over a uniform
/// evaluation grid (endpoints included).
pub fn mise(pred: &dyn Predictor, spec: &CurveSpec, grid_size: usize) -> Result<f64, FitError> {
    let g = grid_size.max(2);
    let mut acc = 0.0;
    for i in 0..g {
        let t = i as f64 / (g - 1) as f64;
        let d = pred.predict(t)?.dist(&true_curve(spec, t))?;
        acc += d * d;
    }
    Ok(acc / g as f64)
}

/// The estimators under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Proposed,
    FrechetRegression,
    GeodesicRegression,
    TvFrechet,
    Extrinsic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::FrechetRegression,
        Method::GeodesicRegression,
        Method::TvFrechet,
        Method::Extrinsic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::FrechetRegression => "frechet",
            Method::GeodesicRegression => "geodesic",
            Method::TvFrechet => "tv",
            Method::Extrinsic => "extrinsic",
        }
    }

    pub fn parse(name: &str) -> Result<Self, FitError> {
        Method::ALL
            .iter()
            .find(|m| m.name() == name)
            .copied()
            .ok_or_else(|| FitError::InvalidInput(format!("unknown method {name}")))
    }

    /// Hyperparameter constants searched by cross validation. The
    /// penalized methods share the c * n^{-2/3} rule; the extrinsic
    /// spline's target residual scales as c * n; the parametric methods
    /// have nothing to tune.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            Method::Proposed => vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0],
            Method::TvFrechet => vec![0.3, 1.0, 3.0, 10.0, 30.0, 100.0],
            Method::Extrinsic => vec![0.05, 0.1, 0.3, 0.5, 1.0, 2.0],
            Method::FrechetRegression | Method::GeodesicRegression => vec![0.0],
        }
    }

    /// Maps a grid constant to the method's actual hyperparameter for a
    /// given sample size.
    pub fn hyper(&self, c: f64, n: usize, rate_exponent: f64) -> f64 {
        match self {
            Method::Proposed | Method::TvFrechet => c * (n as f64).powf(rate_exponent),
            Method::Extrinsic => c * n as f64,
            Method::FrechetRegression | Method::GeodesicRegression => 0.0,
        }
    }

    /// Fits this method with the given hyperparameter value.
    pub fn fit(&self, data: &Dataset, hyper: f64) -> Result<Box<dyn Predictor>, FitError> {
        match self {
            Method::Proposed => {
                let (spline, _report) = fit(data, hyper.max(1e-12), &FitConfig::default())?;
                Ok(Box::new(spline))
            }
            Method::FrechetRegression => Ok(Box::new(FrechetRegressionModel::fit(data))),
            Method::GeodesicRegression => {
                Ok(Box::new(geodesic_regression_fit(data, &GeodesicRegressionConfig::default())?))
            }
            Method::TvFrechet => Ok(Box::new(tv_frechet_fit(data, hyper, 100)?)),
            Method::Extrinsic => Ok(Box::new(ExtrinsicSpline::fit(data, hyper)?)),
        }
    }
}

/// Selected constant, per-constant CV losses, and the final full-data fit.
pub struct CvOutcome {
    pub selected: f64,
    pub losses: Vec<(f64, f64)>,
    pub predictor: Box<dyn Predictor>,
}

/// Round-robin k-fold cross validation: observation i (in sorted order)
/// goes to fold i mod folds. The CV loss of a constant is the average
/// over folds of the mean squared geodesic prediction error on the held
/// out fold; ties select the smaller constant. The winner is refit on
/// the full data.
pub fn cross_validate(data: &Dataset, cv: &CvConfig, method: Method) -> Result<CvOutcome, FitError> {
    let obs: Vec<(f64, ManifoldPoint)> =
        data.observations().map(|(t, y)| (t, y.clone())).collect();
    if obs.len() < cv.folds {
        return Err(FitError::InsufficientData(format!(
            "{} observations for {} folds",
            obs.len(),
            cv.folds
        )));
    }
    let grid = if cv.grid.is_empty() { method.default_grid() } else { cv.grid.clone() };
    // Folds are the outer loop so that the penalized fits can walk the
    // grid in ascending order, warm starting each fit from the solution
    // at the previous constant (continuation along the solution path).
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].partial_cmp(&grid[b]).unwrap());
    let mut sums = vec![(0.0f64, 0usize); grid.len()];
    for f in 0..cv.folds {
        let train: Vec<(f64, ManifoldPoint)> = obs
            .iter()
            .enumerate()
            .filter(|(i, _)| i % cv.folds != f)
            .map(|(_, o)| o.clone())
            .collect();
        let held: Vec<&(f64, ManifoldPoint)> =
            obs.iter().enumerate().filter(|(i, _)| i % cv.folds == f).map(|(_, o)| o).collect();
        if train.is_empty() || held.is_empty() {
            continue;
        }
        let n_train = train.len();
        let train_data = Dataset::from_observations(data.kind().clone(), train)?;
        let mut warm: Option<Vec<ManifoldPoint>> = None;
        for &gi in &order {
            let hyper = method.hyper(grid[gi], n_train, cv.rate_exponent);
            let pred = fit_warm(method, &train_data, hyper, &mut warm)?;
            let mut loss = 0.0;
            for (t, y) in &held {
                let d = pred.predict(*t)?.dist(y)?;
                loss += d * d;
            }
            sums[gi].0 += loss / held.len() as f64;
            sums[gi].1 += 1;
        }
    }
    let losses: Vec<(f64, f64)> =
        grid.iter().zip(&sums).map(|(&c, &(s, k))| (c, s / k.max(1) as f64)).collect();
    let mut selected = losses[0];
    for &(c, l) in &losses[1..] {
        if l < selected.1 {
            selected = (c, l);
        }
    }
    // Refit on the full data along the same ladder up to the winner.
    let mut warm: Option<Vec<ManifoldPoint>> = None;
    let mut predictor = None;
    for &gi in &order {
        if grid[gi] > selected.0 {
            break;
        }
        predictor = Some(fit_warm(method, data, method.hyper(grid[gi], data.n_total(), cv.rate_exponent), &mut warm)?);
    }
    let predictor = match predictor {
        Some(p) => p,
        None => method.fit(data, method.hyper(selected.0, data.n_total(), cv.rate_exponent))?,
    };
    Ok(CvOutcome { selected: selected.0, losses, predictor })
}

/// Fits `method`, warm starting the proposed estimator from `warm` when
/// present and leaving its solution there for the next call. Methods
/// without an iterative curve state fall through to the cold fit.
fn fit_warm(
    method: Method,
    data: &Dataset,
    hyper: f64,
    warm: &mut Option<Vec<ManifoldPoint>>,
) -> Result<Box<dyn Predictor>, FitError> {
    if method != Method::Proposed {
        return method.fit(data, hyper);
    }
    let lambda = hyper.max(1e-12);
    let (spline, _report) = match warm.take() {
        Some(init) => fit_with_init(data, init, lambda, &FitConfig::default())?,
        None => fit(data, lambda, &FitConfig::default())?,
    };
    *warm = Some(spline.nodal().to_vec());
    Ok(Box::new(spline))
}

/// Settings for the convergence-rate experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateConfig {
    /// Curves with their noise levels.
    pub curves: Vec<(CurveSpec, f64)>,
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    pub cv: CvConfig,
    pub eval_grid_size: usize,
}

/// One (curve, method, n, replication) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub curve: String,
    pub manifold: String,
    pub method: String,
    pub n: usize,
    pub rep: usize,
    pub mise: f64,
    pub selected: f64,
}

/// Aggregated mean and standard error per (curve, method, n).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSummary {
    pub curve: String,
    pub method: String,
    pub n: usize,
    pub mise_mean: f64,
    pub mise_se: f64,
    pub reps: usize,
}

/// Least-squares slope of log mean MISE against log n per (curve, method).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeRow {
    pub curve: String,
    pub method: String,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub summaries: Vec<RateSummary>,
    pub slopes: Vec<SlopeRow>,
    pub failures: Vec<String>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn lsq_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    sxy / sxx
}

/// Runs the MISE-versus-n comparison. Every method sees the same dataset
/// within a replication; hyperparameters are tuned by cross validation
/// per replication. Per-replication failures are recorded and skipped.
pub fn run_rate_experiment(cfg: &RateConfig) -> RateReport {
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for ci in 0..cfg.curves.len() {
        for ni in 0..cfg.ns.len() {
            for rep in 0..cfg.replications {
                cells.push((ci, ni, rep));
            }
        }
    }
    let results: Vec<(Vec<RateRow>, Vec<String>)> = cells
        .par_iter()
        .map(|&(ci, ni, rep)| {
            let (curve, sigma) = &cfg.curves[ci];
            let n = cfg.ns[ni];
            let cell_id = (ci as u64) << 32 | (n as u64);
            let seed = replication_seed(cfg.seed, cell_id, rep as u64);
            let sim = SimConfig {
                curve: curve.clone(),
                n,
                sigma: *sigma,
                seed,
                eval_grid_size: cfg.eval_grid_size,
                replications: 1,
            };
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let data = match generate_dataset(&sim) {
                Ok(d) => d,
                Err(e) => {
                    failures.push(format!("{} n={n} rep={rep}: {e}", curve.name()));
                    return (rows, failures);
                }
            };
            for &method in &cfg.methods {
                let cv = CvConfig { grid: method.default_grid(), ..cfg.cv.clone() };
                let outcome = cross_validate(&data, &cv, method)
                    .and_then(|o| mise(o.predictor.as_ref(), curve, cfg.eval_grid_size).map(|m| (o.selected, m)));
                match outcome {
                    Ok((selected, m)) => rows.push(RateRow {
                        curve: curve.name(),
                        manifold: curve.kind().to_tag(),
                        method: method.name().into(),
                        n,
                        rep,
                        mise: m,
                        selected,
                    }),
                    Err(e) => failures.push(format!(
                        "{} {} n={n} rep={rep}: {e}",
                        curve.name(),
                        method.name()
                    )),
                }
            }
            (rows, failures)
        })
        .collect();

    let mut rows: Vec<RateRow> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for (r, f) in results {
        rows.extend(r);
        failures.extend(f);
    }
    rows.sort_by(|a, b| {
        (&a.curve, &a.method, a.n, a.rep).cmp(&(&b.curve, &b.method, b.n, b.rep))
    });
    failures.sort();

    let mut summaries = Vec::new();
    for (curve, _) in &cfg.curves {
        for &method in &cfg.methods {
            for &n in &cfg.ns {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.curve == curve.name() && r.method == method.name() && r.n == n)
                    .map(|r| r.mise)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let (mean, se) = mean_se(&vals);
                summaries.push(RateSummary {
                    curve: curve.name(),
                    method: method.name().into(),
                    n,
                    mise_mean: mean,
                    mise_se: se,
                    reps: vals.len(),
                });
            }
        }
    }

    let mut slopes = Vec::new();
    for (curve, _) in &cfg.curves {
        for &method in &cfg.methods {
            let pts: Vec<(f64, f64)> = summaries
                .iter()
                .filter(|s| s.curve == curve.name() && s.method == method.name() && s.mise_mean > 0.0)
                .map(|s| ((s.n as f64).ln(), s.mise_mean.ln()))
                .collect();
            if pts.len() >= 2 {
                slopes.push(SlopeRow {
                    curve: curve.name(),
                    method: method.name().into(),
                    slope: lsq_slope(&pts),
                });
            }
        }
    }

    RateReport { rows, summaries, slopes, failures }
}

/// Settings for the winding-number recovery experiment on the circle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub ks: Vec<i64>,
    pub ns: Vec<usize>,
    /// Penalty constants; the penalty used is c * n^{rate_exponent}, so an
    /// exponent of zero makes the constants absolute penalties.
    pub c_lambdas: Vec<f64>,
    pub rate_exponent: f64,
    pub sigma: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            ks: vec![1, 2, 3],
            ns: vec![10, 25, 50, 100, 200],
            c_lambdas: vec![0.3],
            rate_exponent: -2.0 / 3.0,
            sigma: 0.3,
            replications: 30,
            seed: 20230601,
        }
    }
}

/// One fitted replication of the phase experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseRow {
    pub k: i64,
    pub n: usize,
    pub c_lambda: f64,
    pub rep: usize,
    pub recovered: bool,
    pub raw_winding: f64,
    pub class: Option<i64>,
    pub dirichlet: f64,
}

/// Recovery fraction per (k, n, c_lambda).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseCell {
    pub k: i64,
    pub n: usize,
    pub c_lambda: f64,
    pub recovery: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseReport {
    pub rows: Vec<PhaseRow>,
    pub cells: Vec<PhaseCell>,
    pub failures: Vec<String>,
}

/// Fits the penalized estimator on noisy winding curves and reports how
/// often the fitted winding number matches the truth.
pub fn run_phase_experiment(cfg: &PhaseConfig) -> PhaseReport {
    let mut jobs: Vec<(i64, usize, f64, usize)> = Vec::new();
    for &k in &cfg.ks {
        for &n in &cfg.ns {
            for &c in &cfg.c_lambdas {
                for rep in 0..cfg.replications {
                    jobs.push((k, n, c, rep));
                }
            }
        }
    }
    let results: Vec<Result<PhaseRow, String>> = jobs
        .par_iter()
        .map(|&(k, n, c, rep)| {
            let cell_id = (k as u64) << 48 | (n as u64) << 16 | (c.to_bits() >> 40);
            let seed = replication_seed(cfg.seed, cell_id, rep as u64);
            let sim = SimConfig {
                curve: CurveSpec::CircleWind { k },
                n,
                sigma: cfg.sigma,
                seed,
                eval_grid_size: 50,
                replications: 1,
            };
            let data = generate_dataset(&sim).map_err(|e| format!("k={k} n={n} rep={rep}: {e}"))?;
            let lambda = c * (n as f64).powf(cfg.rate_exponent);
            let (spline, _report) = fit(&data, lambda, &FitConfig::default())
                .map_err(|e| format!("k={k} n={n} rep={rep}: {e}"))?;
            let raw = winding_raw(&spline).map(|r| r[0]);
            let class = raw.as_ref().ok().and_then(|r| {
                let rounded = r.round();
                if (r - rounded).abs() <= 0.25 {
                    Some(rounded as i64)
                } else {
                    None
                }
            });
            Ok(PhaseRow {
                k,
                n,
                c_lambda: c,
                rep,
                recovered: class == Some(k),
                raw_winding: raw.unwrap_or(f64::NAN),
                class,
                dirichlet: discrete_dirichlet(&spline),
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    rows.sort_by(|a, b| {
        (a.k, a.n, a.c_lambda.to_bits(), a.rep).cmp(&(b.k, b.n, b.c_lambda.to_bits(), b.rep))
    });
    failures.sort();

    let mut cells = Vec::new();
    for &k in &cfg.ks {
        for &n in &cfg.ns {
            for &c in &cfg.c_lambdas {
                let reps: Vec<&PhaseRow> = rows
                    .iter()
                    .filter(|r| r.k == k && r.n == n && r.c_lambda == c)
                    .collect();
                if reps.is_empty() {
                    continue;
                }
                let recovery =
                    reps.iter().filter(|r| r.recovered).count() as f64 / reps.len() as f64;
                cells.push(PhaseCell { k, n, c_lambda: c, recovery, reps: reps.len() });
            }
        }
    }

    PhaseReport { rows, cells, failures }
}

/// Settings for the curvature sweep on spheres of varying radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureConfig {
    /// Curvatures kappa = 1/R^2 to sweep.
    pub kappas: Vec<f64>,
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    pub sigma: f64,
    pub replications: usize,
    pub seed: u64,
    pub cv: CvConfig,
    pub eval_grid_size: usize,
}

/// Normalized MISE (MISE / R^2) per (kappa, method, n).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureSummary {
    pub kappa: f64,
    pub method: String,
    pub n: usize,
    pub normalized_mise_mean: f64,
    pub normalized_mise_se: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub rows: Vec<RateRow>,
    pub summaries: Vec<CurvatureSummary>,
    pub failures: Vec<String>,
}

/// Runs the rate machinery on spheres of radius 1/sqrt(kappa) and
/// normalizes MISE by the squared radius.
pub fn run_curvature_experiment(cfg: &CurvatureConfig) -> CurvatureReport {
    let curves: Vec<(CurveSpec, f64)> = cfg
        .kappas
        .iter()
        .map(|&kappa| (CurveSpec::S2Arc { radius: 1.0 / kappa.sqrt() }, cfg.sigma))
        .collect();
    let rate = run_rate_experiment(&RateConfig {
        curves: curves.clone(),
        ns: cfg.ns.clone(),
        methods: cfg.methods.clone(),
        replications: cfg.replications,
        seed: cfg.seed,
        cv: cfg.cv.clone(),
        eval_grid_size: cfg.eval_grid_size,
    });
    let mut summaries = Vec::new();
    for (&kappa, (curve, _)) in cfg.kappas.iter().zip(&curves) {
        let r2 = 1.0 / kappa;
        for s in rate.summaries.iter().filter(|s| s.curve == curve.name()) {
            summaries.push(CurvatureSummary {
                kappa,
                method: s.method.clone(),
                n: s.n,
                normalized_mise_mean: s.mise_mean / r2,
                normalized_mise_se: s.mise_se / r2,
                reps: s.reps,
            });
        }
    }
    CurvatureReport { rows: rate.rows, summaries, failures: rate.failures }
}

/// Serializes a float with 17 significant digits, enough to round-trip
/// any f64 exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
