//! Comparison estimators: global Frechet regression, geodesic
//! regression, TV-regularized Frechet regression, and an extrinsic cubic
//! smoothing spline with projection back onto the manifold.
//!
//! All four consume a [`Dataset`] and expose point-at-`t` prediction, so
//! the simulation harness can treat every method uniformly.

use crate::error::{FitError, GeomError};
use crate::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use crate::spline::Dataset;

/// Weighted Frechet mean by fixed-step intrinsic gradient descent.
///
/// Signed weights are allowed (Frechet regression needs them); the step
/// is normalized by the total absolute weight. Iterates to a gradient
/// norm of 1e-10 or 200 iterations.
pub fn frechet_mean(points: &[ManifoldPoint], weights: &[f64]) -> Result<ManifoldPoint, FitError> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(FitError::InvalidInput("points/weights length mismatch".into()));
    }
    let total_abs: f64 = weights.iter().map(|w| w.abs()).sum();
    if total_abs <= 0.0 {
        return Err(FitError::InvalidInput("all weights are zero".into()));
    }
    // Start from the point with the largest positive weight.
    let start = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut y = points[start].clone();
    let tau = 0.5;
    for _ in 0..200 {
        let mut g = y.zero_tangent();
        for (p, &w) in points.iter().zip(weights) {
            g = g.add(&y.log(p)?.scaled(w / total_abs));
        }
        if g.norm() <= 1e-10 {
            return Ok(y);
        }
        y = y.exp(&g.scaled(tau))?;
    }
    // Accept the final iterate; the harness treats slow convergence as benign.
    Ok(y)
}

/// Global Frechet regression with linear weights.
#[derive(Debug, Clone)]
pub struct FrechetRegressionModel {
    data: Dataset,
    t_bar: f64,
    sigma_t: f64,
}

impl FrechetRegressionModel {
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n_total() as f64;
        let t_bar = data.observations().map(|(t, _)| t).sum::<f64>() / n;
        let sigma_t = data.observations().map(|(t, _)| (t - t_bar) * (t - t_bar)).sum::<f64>() / n;
        FrechetRegressionModel { data: data.clone(), t_bar, sigma_t }
    }

    /// Weighted Frechet mean with weights
    /// `w_i(t) = 1/n + (t - tbar)(t_i - tbar)/(n sigma_t)`.
    /// The weights sum to one; when all design points coincide the
    /// second term degenerates and the weights are uniform.
    pub fn predict(&self, t: f64) -> Result<ManifoldPoint, FitError> {
        let n = self.data.n_total() as f64;
        let mut points = Vec::with_capacity(self.data.n_total());
        let mut weights = Vec::with_capacity(self.data.n_total());
        for (ti, y) in self.data.observations() {
            let w = if self.sigma_t > 0.0 {
                1.0 / n + (t - self.t_bar) * (ti - self.t_bar) / (n * self.sigma_t)
            } else {
                1.0 / n
            };
            points.push(y.clone());
            weights.push(w);
        }
        frechet_mean(&points, &weights)
    }
}

/// The parametric geodesic model `t -> exp_{y0}(t v)`.
#[derive(Debug, Clone)]
pub struct GeodesicRegressionModel {
    pub base: ManifoldPoint,
    pub velocity: TangentVector,
}

impl GeodesicRegressionModel {
    pub fn predict(&self, t: f64) -> Result<ManifoldPoint, GeomError> {
        self.base.exp(&self.velocity.scaled(t))
    }
}

/// Settings for [`geodesic_regression_fit`].
#[derive(Debug, Clone)]
pub struct GeodesicRegressionConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Central-difference step for the chart-coordinate gradient.
    pub fd_step: f64,
}

impl Default for GeodesicRegressionConfig {
    fn default() -> Self {
        GeodesicRegressionConfig { max_iters: 200, grad_tol: 1e-8, fd_step: 1e-6 }
    }
}

/// Fits the geodesic model by gradient descent with finite-difference
/// gradients in chart coordinates (tangent basis at the current base
/// point, used both for the base offset and the velocity coefficients).
/// Initialized at the Frechet mean with the OLS slope in its tangent
/// space.
pub fn geodesic_regression_fit(
    data: &Dataset,
    cfg: &GeodesicRegressionConfig,
) -> Result<GeodesicRegressionModel, FitError> {
    let n = data.n_total() as f64;
    let t_bar = data.observations().map(|(t, _)| t).sum::<f64>() / n;
    let ss_t: f64 = data.observations().map(|(t, _)| (t - t_bar) * (t - t_bar)).sum();

    let points: Vec<ManifoldPoint> = data.observations().map(|(_, y)| y.clone()).collect();
    let mut base = frechet_mean(&points, &vec![1.0; points.len()])?;
    let mut velocity = base.zero_tangent();
    if ss_t > 0.0 {
        for (t, y) in data.observations() {
            velocity = velocity.add(&base.log(y)?.scaled((t - t_bar) / ss_t));
        }
    }

    let d = data.kind().intrinsic_dim();
    // State is the pair (base, velocity). Each iteration works in a chart
    // built from the basis at the current base only; the basis is never
    // carried across iterations, so its arbitrary orientation cannot leak
    // into the optimization. A perturbation delta in R^{2d} moves the base
    // along the first d basis directions and shifts the velocity along the
    // last d; the shifted velocity is carried to the moved base by tangent
    // projection.
    let perturb = |base: &ManifoldPoint,
                   velocity: &TangentVector,
                   basis: &[TangentVector],
                   delta: &[f64]|
     -> Result<(ManifoldPoint, TangentVector), GeomError> {
        let mut shift = base.zero_tangent();
        let mut v = velocity.clone();
        for (j, b) in basis.iter().enumerate() {
            shift = shift.add(&b.scaled(delta[j]));
            v = v.add(&b.scaled(delta[d + j]));
        }
        let y0 = base.exp(&shift)?;
        let v = v.transport_to(&y0)?;
        Ok((y0, v))
    };
    let objective = |y0: &ManifoldPoint, v: &TangentVector| -> Result<f64, FitError> {
        let mut obj = 0.0;
        for (t, y) in data.observations() {
            obj += y0.exp(&v.scaled(t))?.dist(y)?.powi(2);
        }
        Ok(obj / n)
    };

    let mut obj = objective(&base, &velocity)?;
    let mut step = 0.5;
    for _ in 0..cfg.max_iters {
        let basis = base.tangent_basis();
        let eval = |delta: &[f64]| -> Result<f64, FitError> {
            let (y0, v) = perturb(&base, &velocity, &basis, delta)?;
            objective(&y0, &v)
        };
        let mut grad = vec![0.0; 2 * d];
        for j in 0..2 * d {
            let mut plus = vec![0.0; 2 * d];
            plus[j] = cfg.fd_step;
            let mut minus = vec![0.0; 2 * d];
            minus[j] = -cfg.fd_step;
            grad[j] = (eval(&plus)? - eval(&minus)?) / (2.0 * cfg.fd_step);
        }
        let gnorm_sq = grad.iter().map(|g| g * g).sum::<f64>();
        if gnorm_sq.sqrt() <= cfg.grad_tol {
            break;
        }
        // Backtracking with parabola refinement on the 1d slice.
        let mut alpha = step;
        let mut accepted: Option<(f64, f64)> = None;
        for _ in 0..30 {
            let delta: Vec<f64> = grad.iter().map(|g| -alpha * g).collect();
            match eval(&delta) {
                Ok(o) if o <= obj - 1e-4 * alpha * gnorm_sq => {
                    accepted = Some((alpha, o));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        let Some((mut alpha, mut o)) = accepted else {
            break;
        };
        for _ in 0..4 {
            let c = (o - obj + gnorm_sq * alpha) / (alpha * alpha);
            let s = if c > 0.0 { (gnorm_sq / (2.0 * c)).min(16.0 * alpha) } else { 2.0 * alpha };
            if !(s > 0.0) || (s / alpha - 1.0).abs() < 1e-3 {
                break;
            }
            let delta: Vec<f64> = grad.iter().map(|g| -s * g).collect();
            match eval(&delta) {
                Ok(o2) if o2 < o => {
                    alpha = s;
                    o = o2;
                    if c > 0.0 {
                        break;
                    }
                }
                _ => break,
            }
        }
        let delta: Vec<f64> = grad.iter().map(|g| -alpha * g).collect();
        let (new_base, new_velocity) = perturb(&base, &velocity, &basis, &delta)?;
        base = new_base;
        velocity = new_velocity;
        obj = o;
        step = (alpha * 2.0).min(1.0);
    }

    Ok(GeodesicRegressionModel { base, velocity })
}

/// TV-regularized nodal fit with piecewise-constant prediction.
#[derive(Debug, Clone)]
pub struct TvFrechetFit {
    knots: Vec<f64>,
    nodal: Vec<ManifoldPoint>,
    pub lambda_tv: f64,
}

impl TvFrechetFit {
    pub fn nodal(&self) -> &[ManifoldPoint] {
        &self.nodal
    }

    /// Nearest-knot prediction; ties go to the left knot.
    pub fn predict(&self, t: f64) -> ManifoldPoint {
        let mut best = 0;
        let mut best_d = (t - self.knots[0]).abs();
        for (i, &k) in self.knots.iter().enumerate().skip(1) {
            let d = (t - k).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        self.nodal[best].clone()
    }
}

/// Moves `from` toward `to` by the arc-length fraction `s` in [0, 1].
fn geodesic_step(from: &ManifoldPoint, to: &ManifoldPoint, s: f64) -> Result<ManifoldPoint, GeomError> {
    if s == 0.0 {
        return Ok(from.clone());
    }
    let v = from.log(to)?;
    from.exp(&v.scaled(s))
}

/// Cyclic proximal point solver for the TV-regularized objective
/// `(1/n) sum d^2(Y_i, f_i) + lambda sum d(f_i, f_{i+1})`, initialized
/// at the data, with the diminishing step schedule `tau_k = 1/k`.
pub fn tv_frechet_fit(data: &Dataset, lambda_tv: f64, sweeps: usize) -> Result<TvFrechetFit, FitError> {
    if lambda_tv < 0.0 {
        return Err(FitError::InvalidInput("lambda_tv must be non-negative".into()));
    }
    let n = data.n_total() as f64;
    let mut nodal: Vec<ManifoldPoint> = data
        .responses()
        .iter()
        .map(|ys| {
            if ys.len() == 1 {
                Ok(ys[0].clone())
            } else {
                frechet_mean(ys, &vec![1.0; ys.len()])
            }
        })
        .collect::<Result<_, FitError>>()?;
    let m = nodal.len();

    for k in 1..=sweeps {
        let tau = 1.0 / k as f64;
        // Data-term proximal maps.
        for i in 0..m {
            for y in &data.responses()[i] {
                let s = (2.0 * tau / n) / (1.0 + 2.0 * tau / n);
                nodal[i] = geodesic_step(&nodal[i], y, s)?;
            }
        }
        if lambda_tv > 0.0 {
            // TV-term proximal maps on consecutive pairs.
            for i in 0..m.saturating_sub(1) {
                let d = nodal[i].dist(&nodal[i + 1])?;
                if d <= 1e-15 {
                    continue;
                }
                let c = (tau * lambda_tv).min(0.5 * d);
                let left = geodesic_step(&nodal[i], &nodal[i + 1], c / d)?;
                let right = geodesic_step(&nodal[i + 1], &nodal[i], c / d)?;
                nodal[i] = left;
                nodal[i + 1] = right;
            }
        }
    }
    Ok(TvFrechetFit { knots: data.knots().to_vec(), nodal, lambda_tv })
}

/// Value of the TV objective for a nodal configuration.
pub fn tv_objective(data: &Dataset, nodal: &[ManifoldPoint], lambda_tv: f64) -> Result<f64, FitError> {
    let n = data.n_total() as f64;
    let mut fidelity = 0.0;
    for (ys, f) in data.responses().iter().zip(nodal) {
        for y in ys {
            fidelity += y.dist(f)?.powi(2);
        }
    }
    let mut tv = 0.0;
    for i in 0..nodal.len().saturating_sub(1) {
        tv += nodal[i].dist(&nodal[i + 1])?;
    }
    Ok(fidelity / n + lambda_tv * tv)
}

/// Natural cubic smoothing spline for one scalar coordinate.
#[derive(Debug, Clone)]
pub struct CubicSmoothingSpline {
    ts: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    second: Vec<f64>,
    pub mu: f64,
}

impl CubicSmoothingSpline {
    pub fn evaluate(&self, t: f64) -> f64 {
        let m = self.ts.len();
        if t <= self.ts[0] {
            let h = self.ts[1] - self.ts[0];
            let slope = (self.values[1] - self.values[0]) / h - h * self.second[1] / 6.0;
            return self.values[0] + slope * (t - self.ts[0]);
        }
        if t >= self.ts[m - 1] {
            let h = self.ts[m - 1] - self.ts[m - 2];
            let slope = (self.values[m - 1] - self.values[m - 2]) / h + h * self.second[m - 2] / 6.0;
            return self.values[m - 1] + slope * (t - self.ts[m - 1]);
        }
        let i = match self.ts.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let h = self.ts[i + 1] - self.ts[i];
        let a = (self.ts[i + 1] - t) / h;
        let b = (t - self.ts[i]) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }
}

/// Symmetric positive-definite banded solve (bandwidth 2) by Cholesky.
fn banded_cholesky_solve(diag: &[f64], off1: &[f64], off2: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut l0 = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        let mut d = diag[i];
        if i >= 1 {
            d -= l1[i - 1] * l1[i - 1];
        }
        if i >= 2 {
            d -= l2[i - 2] * l2[i - 2];
        }
        l0[i] = d.max(1e-300).sqrt();
        if i + 1 < n {
            let mut v = off1[i];
            if i >= 1 {
                v -= l1[i - 1] * l2[i - 1];
            }
            l1[i] = v / l0[i];
        }
        if i + 2 < n {
            l2[i] = off2[i] / l0[i];
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = rhs[i];
        if i >= 1 {
            v -= l1[i - 1] * y[i - 1];
        }
        if i >= 2 {
            v -= l2[i - 2] * y[i - 2];
        }
        y[i] = v / l0[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        if i + 1 < n {
            v -= l1[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= l2[i] * x[i + 2];
        }
        x[i] = v / l0[i];
    }
    x
}

/// One Reinsch solve at a fixed penalty: returns (fitted values, second
/// derivatives at interior knots, residual sum of squares).
fn reinsch_solve(ts: &[f64], ys: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = ts.len();
    let h: Vec<f64> = (0..n - 1).map(|i| ts[i + 1] - ts[i]).collect();
    let m = n - 2;
    // R (tridiagonal, interior x interior) and Q^T y.
    let mut r_diag = vec![0.0; m];
    let mut r_off = vec![0.0; m.saturating_sub(1)];
    for j in 0..m {
        r_diag[j] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            r_off[j] = h[j + 1] / 6.0;
        }
    }
    let qt = |v: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|j| v[j] / h[j] - v[j + 1] * (1.0 / h[j] + 1.0 / h[j + 1]) + v[j + 2] / h[j + 1])
            .collect()
    };
    // Q^T Q is pentadiagonal on the interior index set.
    let col = |j: usize| -> [f64; 3] { [1.0 / h[j], -(1.0 / h[j] + 1.0 / h[j + 1]), 1.0 / h[j + 1]] };
    let mut a_diag = vec![0.0; m];
    let mut a_off1 = vec![0.0; m.saturating_sub(1)];
    let mut a_off2 = vec![0.0; m.saturating_sub(2)];
    for j in 0..m {
        let c = col(j);
        a_diag[j] = r_diag[j] + mu * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
        if j + 1 < m {
            let c2 = col(j + 1);
            a_off1[j] = r_off[j] + mu * (c[1] * c2[0] + c[2] * c2[1]);
        }
        if j + 2 < m {
            let c2 = col(j + 2);
            a_off2[j] = mu * c[2] * c2[0];
        }
    }
    let gamma = banded_cholesky_solve(&a_diag, &a_off1, &a_off2, &qt(ys));
    // g = y - mu Q gamma.
    let mut g = ys.to_vec();
    for j in 0..m {
        let c = col(j);
        g[j] -= mu * c[0] * gamma[j];
        g[j + 1] -= mu * c[1] * gamma[j];
        g[j + 2] -= mu * c[2] * gamma[j];
    }
    let rss: f64 = ys.iter().zip(&g).map(|(y, gi)| (y - gi) * (y - gi)).sum();
    (g, gamma, rss)
}

fn ols_line(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let tb = ts.iter().sum::<f64>() / n;
    let yb = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tb) * (t - tb)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tb) * (y - yb)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (yb - slope * tb, slope)
}

/// Fits a natural cubic smoothing spline to one coordinate, choosing the
/// penalty so that the residual sum of squares equals `s` when that is
/// attainable. `s = 0` interpolates; targets above the straight-line
/// residual fall back to the least-squares line.
pub fn cubic_smoothing_spline_fit(ts: &[f64], ys: &[f64], s: f64) -> Result<CubicSmoothingSpline, FitError> {
    if ts.len() != ys.len() {
        return Err(FitError::InvalidInput("ts/ys length mismatch".into()));
    }
    if ts.len() < 4 {
        return Err(FitError::InsufficientData(format!(
            "need at least 4 distinct design points, got {}",
            ts.len()
        )));
    }
    if s < 0.0 {
        return Err(FitError::InvalidInput("smoothing target must be non-negative".into()));
    }
    let n = ts.len();
    let pad = |gamma: Vec<f64>| -> Vec<f64> {
        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&gamma);
        second
    };

    if s == 0.0 {
        let (g, gamma, _) = reinsch_solve(ts, ys, 0.0);
        return Ok(CubicSmoothingSpline { ts: ts.to_vec(), values: g, second: pad(gamma), mu: 0.0 });
    }
    let (intercept, slope) = ols_line(ts, ys);
    let line_vals: Vec<f64> = ts.iter().map(|t| intercept + slope * t).collect();
    let line_rss: f64 = ys.iter().zip(&line_vals).map(|(y, g)| (y - g) * (y - g)).sum();
    if s >= line_rss {
        return Ok(CubicSmoothingSpline {
            ts: ts.to_vec(),
            values: line_vals,
            second: vec![0.0; n],
            mu: f64::INFINITY,
        });
    }
    // RSS is monotone increasing in mu; bisect on log mu.
    let (mut lo, mut hi) = (1e-14f64, 1e14f64);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        let (_, _, rss) = reinsch_solve(ts, ys, mid);
        if rss < s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    let mu = (lo * hi).sqrt();
    let (g, gamma, _) = reinsch_solve(ts, ys, mu);
    Ok(CubicSmoothingSpline { ts: ts.to_vec(), values: g, second: pad(gamma), mu })
}

/// Extrinsic baseline: per-coordinate smoothing splines plus projection.
#[derive(Debug, Clone)]
pub struct ExtrinsicSpline {
    kind: ManifoldKind,
    coords: Vec<CubicSmoothingSpline>,
}

impl ExtrinsicSpline {
    /// Fits one smoothing spline per ambient coordinate. The angle-chart
    /// kinds (circle, torus) are fitted in the raw angle chart without
    /// unwrapping, so a jump artifact across the fundamental-domain
    /// boundary is expected. Responses merged at one knot are averaged
    /// coordinate-wise before fitting. The target `s` is the residual
    /// sum over all observations.
    pub fn fit(data: &Dataset, s: f64) -> Result<Self, FitError> {
        let kind = data.kind().clone();
        let ts = data.knots().to_vec();
        let d = kind.ambient_dim();
        let mut coords = Vec::with_capacity(d);
        for j in 0..d {
            let ys: Vec<f64> = data
                .responses()
                .iter()
                .map(|group| group.iter().map(|y| y.coords()[j]).sum::<f64>() / group.len() as f64)
                .collect();
            coords.push(cubic_smoothing_spline_fit(&ts, &ys, s / d as f64)?);
        }
        Ok(ExtrinsicSpline { kind, coords })
    }

    /// Evaluates every coordinate spline and projects onto the manifold.
    pub fn predict(&self, t: f64) -> Result<ManifoldPoint, GeomError> {
        let x: Vec<f64> = self.coords.iter().map(|c| c.evaluate(t)).collect();
        self.kind.project_ambient(&x)
    }
}

#[cfg(test)]
mod tests;
