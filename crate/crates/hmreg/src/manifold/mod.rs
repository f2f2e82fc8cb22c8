//! Uniform geometric interface over the experimental manifolds.
//!
//! Seven kinds are supported: the circle S^1 (angle chart), the round
//! sphere S^2(R), the hyperbolic plane H^2 in the hyperboloid model,
//! Sym+(2) with the affine-invariant metric, SO(3) with a bi-invariant
//! metric, the flat torus T^2, and Euclidean space R^d, which reduces
//! every operation to plain vector arithmetic and serves as the oracle
//! for the fitting code.
//!
//! All types are immutable values and all operations are pure functions,
//! so everything here is freely shareable across threads.
//!
//! ```
//! use hmreg::manifold::{ManifoldKind, ManifoldPoint};
//!
//! let sphere = ManifoldKind::sphere(1.0);
//! let north = ManifoldPoint::new(sphere.clone(), vec![0.0, 0.0, 1.0]).unwrap();
//! let east = ManifoldPoint::new(sphere, vec![1.0, 0.0, 0.0]).unwrap();
//! let v = north.log(&east).unwrap();
//! assert!((v.norm() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
//! assert!(north.exp(&v).unwrap().dist(&east).unwrap() < 1e-12);
//! ```

pub(crate) mod so3;
pub(crate) mod spd;

use crate::error::GeomError;
use nalgebra::{Matrix2, Matrix3, Vector3};
use std::f64::consts::PI;

/// Which manifold a point lives on, together with its size parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    /// Circle of the given circumference, stored as an angle in [0, L).
    Circle { circumference: f64 },
    /// Round sphere of the given radius embedded in R^3.
    Sphere { radius: f64 },
    /// Hyperbolic plane, hyperboloid model in R^{2,1}.
    Hyperbolic2,
    /// 2x2 symmetric positive-definite matrices, affine-invariant metric.
    Spd2,
    /// Rotation group SO(3). The inner product is scaled so that the
    /// geodesic distance between rotations differing by angle theta is
    /// |theta|/sqrt(2); the cut locus then sits at distance pi/sqrt(2).
    So3,
    /// Flat torus with the given side lengths, angles in [0, L1) x [0, L2).
    Torus2 { l1: f64, l2: f64 },
    /// Euclidean space R^d.
    Euclidean { d: usize },
}

impl ManifoldKind {
    pub fn circle(circumference: f64) -> Self {
        assert!(circumference > 0.0);
        ManifoldKind::Circle { circumference }
    }

    pub fn sphere(radius: f64) -> Self {
        assert!(radius > 0.0);
        ManifoldKind::Sphere { radius }
    }

    pub fn torus2(l1: f64, l2: f64) -> Self {
        assert!(l1 > 0.0 && l2 > 0.0);
        ManifoldKind::Torus2 { l1, l2 }
    }

    pub fn euclidean(d: usize) -> Self {
        assert!(d > 0);
        ManifoldKind::Euclidean { d }
    }

    /// Length of the ambient coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Circle { .. } => 1,
            ManifoldKind::Sphere { .. } | ManifoldKind::Hyperbolic2 => 3,
            ManifoldKind::Spd2 => 4,
            ManifoldKind::So3 => 9,
            ManifoldKind::Torus2 { .. } => 2,
            ManifoldKind::Euclidean { d } => *d,
        }
    }

    /// Intrinsic dimension of the manifold.
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldKind::Circle { .. } => 1,
            ManifoldKind::Sphere { .. } | ManifoldKind::Hyperbolic2 | ManifoldKind::Torus2 { .. } => 2,
            ManifoldKind::Spd2 | ManifoldKind::So3 => 3,
            ManifoldKind::Euclidean { d } => *d,
        }
    }

    /// Upper bound on sectional curvature, clamped at zero from below.
    ///
    /// For SO(3) this stores 1/8, the constant quoted with the geometric
    /// data for the bi-invariant metric; note that the distance convention
    /// |theta|/sqrt(2) used here corresponds to a rescaled metric, so the
    /// bound is conservative only up to that rescaling.
    pub fn curvature_upper(&self) -> f64 {
        match self {
            ManifoldKind::Sphere { radius } => 1.0 / (radius * radius),
            ManifoldKind::So3 => 0.125,
            _ => 0.0,
        }
    }

    /// Injectivity radius, in the same distance units as `dist`.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldKind::Circle { circumference } => circumference / 2.0,
            ManifoldKind::Sphere { radius } => PI * radius,
            ManifoldKind::Hyperbolic2 | ManifoldKind::Spd2 | ManifoldKind::Euclidean { .. } => {
                f64::INFINITY
            }
            // pi in rotation-angle units is pi/sqrt(2) in geodesic distance.
            ManifoldKind::So3 => PI / std::f64::consts::SQRT_2,
            ManifoldKind::Torus2 { l1, l2 } => 0.5 * l1.min(*l2),
        }
    }

    /// Convexity radius (half the injectivity radius on the compact kinds).
    pub fn convexity_radius(&self) -> f64 {
        match self {
            ManifoldKind::Hyperbolic2 | ManifoldKind::Spd2 | ManifoldKind::Euclidean { .. } => {
                f64::INFINITY
            }
            _ => 0.5 * self.injectivity_radius(),
        }
    }

    /// Diameter (infinite for the noncompact kinds).
    pub fn diameter(&self) -> f64 {
        match self {
            ManifoldKind::Circle { circumference } => circumference / 2.0,
            ManifoldKind::Sphere { radius } => PI * radius,
            ManifoldKind::So3 => PI / std::f64::consts::SQRT_2,
            ManifoldKind::Torus2 { l1, l2 } => (0.5 * l1).hypot(0.5 * l2),
            _ => f64::INFINITY,
        }
    }

    /// String tag used by config files and the CLI, e.g. `sphere:r=1`.
    pub fn to_tag(&self) -> String {
        match self {
            ManifoldKind::Circle { circumference } => format!("circle:L={circumference}"),
            ManifoldKind::Sphere { radius } => format!("sphere:r={radius}"),
            ManifoldKind::Hyperbolic2 => "h2".to_string(),
            ManifoldKind::Spd2 => "spd2".to_string(),
            ManifoldKind::So3 => "so3".to_string(),
            ManifoldKind::Torus2 { l1, l2 } => format!("torus2:L1={l1},L2={l2}"),
            ManifoldKind::Euclidean { d } => format!("euclid:d={d}"),
        }
    }

    /// Parses the tag format produced by [`ManifoldKind::to_tag`]. Bare
    /// `circle`, `sphere`, and `torus2` take their default sizes.
    pub fn parse_tag(tag: &str) -> Result<Self, GeomError> {
        let (name, params) = match tag.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (tag, None),
        };
        let get = |key: &str| -> Result<Option<f64>, GeomError> {
            let Some(params) = params else { return Ok(None) };
            for part in params.split(',') {
                if let Some((k, v)) = part.split_once('=') {
                    if k.eq_ignore_ascii_case(key) {
                        let x: f64 = v
                            .parse()
                            .map_err(|_| GeomError::Domain(format!("bad parameter in tag `{tag}`")))?;
                        return Ok(Some(x));
                    }
                } else {
                    return Err(GeomError::Domain(format!("bad parameter in tag `{tag}`")));
                }
            }
            Ok(None)
        };
        match name {
            "circle" => Ok(ManifoldKind::circle(get("L")?.unwrap_or(2.0 * PI))),
            "sphere" => Ok(ManifoldKind::sphere(get("r")?.unwrap_or(1.0))),
            "h2" => Ok(ManifoldKind::Hyperbolic2),
            "spd2" => Ok(ManifoldKind::Spd2),
            "so3" => Ok(ManifoldKind::So3),
            "torus2" => Ok(ManifoldKind::torus2(
                get("L1")?.unwrap_or(2.0 * PI),
                get("L2")?.unwrap_or(2.0 * PI),
            )),
            "euclid" => {
                let d = get("d")?.unwrap_or(1.0);
                if d < 1.0 || d.fract() != 0.0 {
                    return Err(GeomError::Domain(format!("bad dimension in tag `{tag}`")));
                }
                Ok(ManifoldKind::euclidean(d as usize))
            }
            _ => Err(GeomError::Domain(format!("unknown manifold tag `{tag}`"))),
        }
    }

    /// Nearest point on the manifold to an ambient coordinate vector.
    pub fn project_ambient(&self, x: &[f64]) -> Result<ManifoldPoint, GeomError> {
        if x.len() != self.ambient_dim() {
            return Err(GeomError::Mismatch(format!(
                "expected {} ambient coordinates, got {}",
                self.ambient_dim(),
                x.len()
            )));
        }
        let coords = match self {
            ManifoldKind::Circle { circumference } => vec![x[0].rem_euclid(*circumference)],
            ManifoldKind::Sphere { radius } => {
                let n = norm(x);
                if n < 1e-300 {
                    return Err(GeomError::Singular("cannot project the origin onto a sphere".into()));
                }
                x.iter().map(|c| c * radius / n).collect()
            }
            ManifoldKind::Hyperbolic2 => {
                // Rescale to Minkowski norm -1 on the upper sheet.
                let m = mink(x, x);
                if m >= -1e-300 {
                    return Err(GeomError::Singular(
                        "vector not inside the timelike cone of the hyperboloid".into(),
                    ));
                }
                let s = (-m).sqrt();
                let sign = if x[2] > 0.0 { 1.0 } else { -1.0 };
                vec![sign * x[0] / s, sign * x[1] / s, sign * x[2] / s]
            }
            ManifoldKind::Spd2 => {
                let a = mat2(x);
                let sym = 0.5 * (a + a.transpose());
                let floored = spd::sym_apply(&sym, |l| l.max(1e-10));
                mat2_coords(&floored)
            }
            ManifoldKind::So3 => {
                let a = mat3(x);
                let svd = a.svd(true, true);
                let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
                if svd.singular_values[0] + svd.singular_values[1] < 1e-12 {
                    return Err(GeomError::Singular("degenerate matrix for SO(3) projection".into()));
                }
                let s = (u * vt).determinant().signum();
                let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, s));
                mat3_coords(&(u * d * vt))
            }
            ManifoldKind::Torus2 { l1, l2 } => vec![x[0].rem_euclid(*l1), x[1].rem_euclid(*l2)],
            ManifoldKind::Euclidean { .. } => x.to_vec(),
        };
        Ok(ManifoldPoint { kind: self.clone(), coords })
    }
}

/// A point on a manifold: ambient coordinates tagged with their kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    kind: ManifoldKind,
    coords: Vec<f64>,
}

/// A tangent vector at a base point, stored as an ambient vector.
///
/// For the chart kinds (circle, torus, Euclidean space) the vector is an
/// unconstrained chart vector; for the embedded kinds it lies in the
/// tangent space of the base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    vec: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Minkowski inner product on R^{2,1}.
fn mink(x: &[f64], y: &[f64]) -> f64 {
    x[0] * y[0] + x[1] * y[1] - x[2] * y[2]
}

/// Signed representative of `x` in (-half, half].
fn wrap(x: f64, period: f64) -> f64 {
    let mut r = x.rem_euclid(period);
    if r > 0.5 * period {
        r -= period;
    }
    r
}

fn mat2(x: &[f64]) -> Matrix2<f64> {
    Matrix2::new(x[0], x[1], x[2], x[3])
}

fn mat2_coords(m: &Matrix2<f64>) -> Vec<f64> {
    vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn mat3(x: &[f64]) -> Matrix3<f64> {
    Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8])
}

fn mat3_coords(m: &Matrix3<f64>) -> Vec<f64> {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

impl ManifoldPoint {
    /// Builds a point and checks the manifold membership invariants.
    pub fn new(kind: ManifoldKind, coords: Vec<f64>) -> Result<Self, GeomError> {
        let p = ManifoldPoint { kind, coords };
        p.validate()?;
        Ok(p)
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Checks the membership invariant at tolerance 1e-10 (angles are
    /// normalized rather than rejected).
    pub fn validate(&self) -> Result<(), GeomError> {
        if self.coords.len() != self.kind.ambient_dim() {
            return Err(GeomError::Mismatch(format!(
                "expected {} coordinates, got {}",
                self.kind.ambient_dim(),
                self.coords.len()
            )));
        }
        let x = &self.coords;
        match &self.kind {
            ManifoldKind::Circle { circumference } => {
                if x[0] < 0.0 || x[0] >= *circumference {
                    return Err(GeomError::Domain("circle angle outside [0, L)".into()));
                }
            }
            ManifoldKind::Sphere { radius } => {
                if (norm(x) - radius).abs() > 1e-10 * radius.max(1.0) {
                    return Err(GeomError::Domain("point not on the sphere".into()));
                }
            }
            ManifoldKind::Hyperbolic2 => {
                if (mink(x, x) + 1.0).abs() > 1e-10 || x[2] <= 0.0 {
                    return Err(GeomError::Domain("point not on the upper hyperboloid".into()));
                }
            }
            ManifoldKind::Spd2 => {
                if (x[1] - x[2]).abs() > 1e-10 {
                    return Err(GeomError::Domain("SPD matrix not symmetric".into()));
                }
                let (l, _) = spd::sym_eig(&mat2(x));
                if l[1] <= 0.0 {
                    return Err(GeomError::Domain("SPD matrix not positive definite".into()));
                }
            }
            ManifoldKind::So3 => {
                let r = mat3(x);
                let err = (r * r.transpose() - Matrix3::identity()).norm();
                if err > 1e-9 || r.determinant() < 0.0 {
                    return Err(GeomError::Domain("matrix not a rotation".into()));
                }
            }
            ManifoldKind::Torus2 { l1, l2 } => {
                if x[0] < 0.0 || x[0] >= *l1 || x[1] < 0.0 || x[1] >= *l2 {
                    return Err(GeomError::Domain("torus angles outside the fundamental domain".into()));
                }
            }
            ManifoldKind::Euclidean { .. } => {}
        }
        Ok(())
    }

    fn check_same_kind(&self, other: &ManifoldPoint) -> Result<(), GeomError> {
        if self.kind != other.kind {
            return Err(GeomError::Mismatch(format!(
                "points on different manifolds: {} vs {}",
                self.kind.to_tag(),
                other.kind.to_tag()
            )));
        }
        Ok(())
    }

    /// Zero tangent vector at this point.
    pub fn zero_tangent(&self) -> TangentVector {
        TangentVector { base: self.clone(), vec: vec![0.0; self.coords.len()] }
    }

    /// Endpoint of the constant-speed geodesic with initial velocity `v`.
    /// Globally defined; the result is re-projected onto the manifold to
    /// keep the membership invariants exact across long iteration runs.
    pub fn exp(&self, v: &TangentVector) -> Result<ManifoldPoint, GeomError> {
        if v.base != *self {
            return Err(GeomError::Mismatch("tangent vector based at a different point".into()));
        }
        let x = &self.coords;
        let w = &v.vec;
        let raw: Vec<f64> = match &self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::Torus2 { .. } | ManifoldKind::Euclidean { .. } => {
                x.iter().zip(w).map(|(a, b)| a + b).collect()
            }
            ManifoldKind::Sphere { radius } => {
                let s = norm(w);
                if s < 1e-14 {
                    return Ok(self.clone());
                }
                let theta = s / radius;
                let (c, sn) = (theta.cos(), theta.sin());
                x.iter().zip(w).map(|(a, b)| c * a + radius * sn * b / s).collect()
            }
            ManifoldKind::Hyperbolic2 => {
                let s = mink(w, w).max(0.0).sqrt();
                if s < 1e-14 {
                    return Ok(self.clone());
                }
                let (c, sh) = (s.cosh(), s.sinh());
                x.iter().zip(w).map(|(a, b)| c * a + sh * b / s).collect()
            }
            ManifoldKind::Spd2 => {
                let p = mat2(x);
                let sq = spd::spd_sqrt(&p);
                let isq = spd::spd_inv_sqrt(&p);
                let vm = mat2(w);
                let inner = isq * 0.5 * (vm + vm.transpose()) * isq;
                mat2_coords(&(sq * spd::sym_exp(&(0.5 * (inner + inner.transpose()))) * sq))
            }
            ManifoldKind::So3 => {
                let r = mat3(x);
                let omega = r.transpose() * mat3(w);
                let omega = 0.5 * (omega - omega.transpose());
                mat3_coords(&(r * so3::skew_exp(&omega)))
            }
        };
        self.kind.project_ambient(&raw)
    }

    /// Initial velocity of the minimizing geodesic from `self` to `q`.
    ///
    /// Fails with [`GeomError::CutLocus`] when the target sits at or
    /// beyond the cut locus, where the minimizing geodesic is not unique.
    pub fn log(&self, q: &ManifoldPoint) -> Result<TangentVector, GeomError> {
        self.check_same_kind(q)?;
        let x = &self.coords;
        let y = &q.coords;
        let vec = match &self.kind {
            ManifoldKind::Circle { circumference } => {
                let d = wrap(y[0] - x[0], *circumference);
                if d.abs() >= 0.5 * circumference - 1e-12 {
                    return Err(GeomError::CutLocus { dist: d.abs() });
                }
                vec![d]
            }
            ManifoldKind::Torus2 { l1, l2 } => {
                let d0 = wrap(y[0] - x[0], *l1);
                let d1 = wrap(y[1] - x[1], *l2);
                if d0.abs() >= 0.5 * l1 - 1e-12 || d1.abs() >= 0.5 * l2 - 1e-12 {
                    return Err(GeomError::CutLocus { dist: d0.hypot(d1) });
                }
                vec![d0, d1]
            }
            ManifoldKind::Euclidean { .. } => y.iter().zip(x).map(|(a, b)| a - b).collect(),
            ManifoldKind::Sphere { radius } => {
                let c = (dot(x, y) / (radius * radius)).clamp(-1.0, 1.0);
                if c <= -1.0 + 1e-12 {
                    return Err(GeomError::CutLocus { dist: PI * radius });
                }
                let theta = c.acos();
                let w: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - c * b).collect();
                let wn = norm(&w);
                if wn < 1e-14 {
                    vec![0.0; 3]
                } else {
                    w.iter().map(|a| a * radius * theta / wn).collect()
                }
            }
            ManifoldKind::Hyperbolic2 => {
                let c = (-mink(x, y)).max(1.0);
                let theta = c.acosh();
                let w: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - c * b).collect();
                let wn = mink(&w, &w).max(0.0).sqrt();
                if wn < 1e-14 {
                    vec![0.0; 3]
                } else {
                    w.iter().map(|a| a * theta / wn).collect()
                }
            }
            ManifoldKind::Spd2 => {
                let sq = spd::spd_sqrt(&mat2(x));
                let isq = spd::spd_inv_sqrt(&mat2(x));
                let inner = isq * mat2(y) * isq;
                let l = spd::spd_log(&(0.5 * (inner + inner.transpose())));
                mat2_coords(&(sq * l * sq))
            }
            ManifoldKind::So3 => {
                let r = mat3(x);
                let a = r.transpose() * mat3(y);
                match so3::rotation_log(&a) {
                    Some(omega) => mat3_coords(&(r * omega)),
                    None => {
                        return Err(GeomError::CutLocus {
                            dist: so3::rotation_angle(&a) / std::f64::consts::SQRT_2,
                        })
                    }
                }
            }
        };
        Ok(TangentVector { base: self.clone(), vec })
    }

    /// Geodesic distance. Globally defined on every kind.
    pub fn dist(&self, q: &ManifoldPoint) -> Result<f64, GeomError> {
        self.check_same_kind(q)?;
        let x = &self.coords;
        let y = &q.coords;
        Ok(match &self.kind {
            ManifoldKind::Circle { circumference } => wrap(y[0] - x[0], *circumference).abs(),
            ManifoldKind::Torus2 { l1, l2 } => {
                wrap(y[0] - x[0], *l1).hypot(wrap(y[1] - x[1], *l2))
            }
            ManifoldKind::Euclidean { .. } => {
                y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
            ManifoldKind::Sphere { radius } => {
                // atan2 form stays accurate near coincident and antipodal points.
                let c = dot(x, y) / (radius * radius);
                let cx = [
                    (x[1] * y[2] - x[2] * y[1]) / (radius * radius),
                    (x[2] * y[0] - x[0] * y[2]) / (radius * radius),
                    (x[0] * y[1] - x[1] * y[0]) / (radius * radius),
                ];
                radius * norm(&cx).atan2(c)
            }
            ManifoldKind::Hyperbolic2 => {
                // Chordal form avoids the acosh precision loss near 1.
                let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                2.0 * (0.5 * mink(&d, &d).max(0.0).sqrt()).asinh()
            }
            ManifoldKind::Spd2 => {
                let isq = spd::spd_inv_sqrt(&mat2(x));
                let inner = isq * mat2(y) * isq;
                spd::spd_log(&(0.5 * (inner + inner.transpose()))).norm()
            }
            ManifoldKind::So3 => {
                let a = mat3(x).transpose() * mat3(y);
                so3::rotation_angle(&a) / std::f64::consts::SQRT_2
            }
        })
    }

    /// Orthonormal basis of the tangent space under the Riemannian metric.
    pub fn tangent_basis(&self) -> Vec<TangentVector> {
        let x = &self.coords;
        let raw: Vec<Vec<f64>> = match &self.kind {
            ManifoldKind::Circle { .. } => vec![vec![1.0]],
            ManifoldKind::Torus2 { .. } => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ManifoldKind::Euclidean { d } => (0..*d)
                .map(|i| {
                    let mut e = vec![0.0; *d];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            ManifoldKind::Sphere { radius } => {
                let p = Vector3::new(x[0], x[1], x[2]) / *radius;
                // Seed with the coordinate axis least aligned with p.
                let mut k = 0;
                for i in 1..3 {
                    if p[i].abs() < p[k].abs() {
                        k = i;
                    }
                }
                let mut e = Vector3::zeros();
                e[k] = 1.0;
                let u1 = (e - p.dot(&e) * p).normalize();
                let u2 = p.cross(&u1);
                vec![vec![u1[0], u1[1], u1[2]], vec![u2[0], u2[1], u2[2]]]
            }
            ManifoldKind::Hyperbolic2 => {
                // Gram-Schmidt on projected coordinate axes; the Minkowski
                // form is positive definite on the tangent space.
                let mut basis: Vec<Vec<f64>> = Vec::new();
                for i in 0..3 {
                    let mut e = vec![0.0; 3];
                    e[i] = 1.0;
                    let mp = mink(&e, x);
                    let mut w: Vec<f64> = e.iter().zip(x).map(|(a, b)| a + mp * b).collect();
                    for b in &basis {
                        let c = mink(&w, b);
                        for (wi, bi) in w.iter_mut().zip(b) {
                            *wi -= c * bi;
                        }
                    }
                    let n = mink(&w, &w).max(0.0).sqrt();
                    if n > 1e-8 {
                        basis.push(w.iter().map(|a| a / n).collect());
                    }
                    if basis.len() == 2 {
                        break;
                    }
                }
                basis
            }
            ManifoldKind::Spd2 => {
                let p = mat2(x);
                let pinv = p.try_inverse().expect("valid SPD point is invertible");
                let seeds = [
                    Matrix2::new(1.0, 0.0, 0.0, 0.0),
                    Matrix2::new(0.0, 1.0, 1.0, 0.0),
                    Matrix2::new(0.0, 0.0, 0.0, 1.0),
                ];
                let ip = |u: &Matrix2<f64>, v: &Matrix2<f64>| (pinv * u * pinv * v).trace();
                let mut basis: Vec<Matrix2<f64>> = Vec::new();
                for s in &seeds {
                    let mut w = *s;
                    for b in &basis {
                        w -= ip(&w, b) * b;
                    }
                    let n = ip(&w, &w).sqrt();
                    basis.push(w / n);
                }
                basis.iter().map(mat2_coords).collect()
            }
            ManifoldKind::So3 => {
                let r = mat3(x);
                (0..3)
                    .map(|i| {
                        let mut e = Vector3::zeros();
                        e[i] = 1.0;
                        mat3_coords(&(std::f64::consts::SQRT_2 * r * so3::hat(&e)))
                    })
                    .collect()
            }
        };
        raw.into_iter().map(|vec| TangentVector { base: self.clone(), vec }).collect()
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn tangent_project(&self, w: &[f64]) -> Result<TangentVector, GeomError> {
        if w.len() != self.kind.ambient_dim() {
            return Err(GeomError::Mismatch("ambient vector of wrong length".into()));
        }
        let x = &self.coords;
        let vec = match &self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::Torus2 { .. } | ManifoldKind::Euclidean { .. } => {
                w.to_vec()
            }
            ManifoldKind::Sphere { radius } => {
                let c = dot(w, x) / (radius * radius);
                w.iter().zip(x).map(|(a, b)| a - c * b).collect()
            }
            ManifoldKind::Hyperbolic2 => {
                let c = mink(w, x);
                w.iter().zip(x).map(|(a, b)| a + c * b).collect()
            }
            ManifoldKind::Spd2 => {
                let a = mat2(w);
                mat2_coords(&(0.5 * (a + a.transpose())))
            }
            ManifoldKind::So3 => {
                let r = mat3(x);
                let a = mat3(w);
                let skew = 0.5 * (r.transpose() * a - a.transpose() * r);
                mat3_coords(&(r * skew))
            }
        };
        Ok(TangentVector { base: self.clone(), vec })
    }
}

impl TangentVector {
    /// Builds a tangent vector and checks the tangency invariant.
    pub fn new(base: ManifoldPoint, vec: Vec<f64>) -> Result<Self, GeomError> {
        if vec.len() != base.kind.ambient_dim() {
            return Err(GeomError::Mismatch("tangent vector of wrong length".into()));
        }
        let v = TangentVector { base, vec };
        let p = v.base.tangent_project(&v.vec)?;
        let drift: f64 = v
            .vec
            .iter()
            .zip(&p.vec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if drift > 1e-8 * (1.0 + norm(&v.vec)) {
            return Err(GeomError::Mismatch("vector not in the tangent space".into()));
        }
        Ok(v)
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.vec
    }

    /// Riemannian inner product with another vector at the same base point.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        debug_assert_eq!(self.base.kind, other.base.kind);
        let (u, v) = (&self.vec, &other.vec);
        match &self.base.kind {
            ManifoldKind::Hyperbolic2 => mink(u, v),
            ManifoldKind::Spd2 => {
                let p = mat2(&self.base.coords);
                let pinv = p.try_inverse().expect("valid SPD point is invertible");
                (pinv * mat2(u) * pinv * mat2(v)).trace()
            }
            // Scaled so that |log_R(Q)| equals the geodesic distance.
            ManifoldKind::So3 => 0.25 * dot(u, v),
            _ => dot(u, v),
        }
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn scaled(&self, s: f64) -> TangentVector {
        TangentVector { base: self.base.clone(), vec: self.vec.iter().map(|a| a * s).collect() }
    }

    /// Sum of two vectors at the same base point.
    pub fn add(&self, other: &TangentVector) -> TangentVector {
        debug_assert_eq!(self.base, other.base);
        TangentVector {
            base: self.base.clone(),
            vec: self.vec.iter().zip(&other.vec).map(|(a, b)| a + b).collect(),
        }
    }

    /// Transports this vector to a new base point by tangent projection.
    pub fn transport_to(&self, target: &ManifoldPoint) -> Result<TangentVector, GeomError> {
        target.tangent_project(&self.vec)
    }
}

impl ManifoldKind {
    /// Draws a random point: uniform on the compact kinds, and from a
    /// bounded ball around a reference point on the noncompact ones.
    pub fn random_point<R: rand::Rng>(&self, rng: &mut R) -> ManifoldPoint {
        use rand_distr::{Distribution, StandardNormal};
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        match self {
            ManifoldKind::Circle { circumference } => ManifoldPoint {
                kind: self.clone(),
                coords: vec![rand::Rng::gen::<f64>(rng) * circumference],
            },
            ManifoldKind::Torus2 { l1, l2 } => ManifoldPoint {
                kind: self.clone(),
                coords: vec![rand::Rng::gen::<f64>(rng) * l1, rand::Rng::gen::<f64>(rng) * l2],
            },
            ManifoldKind::Sphere { .. } => {
                let x = [normal(), normal(), normal()];
                self.project_ambient(&x).expect("gaussian vector is nonzero a.s.")
            }
            ManifoldKind::So3 => {
                // Uniform (Haar) via a normalized quaternion.
                let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    normal(),
                    normal(),
                    normal(),
                    normal(),
                ));
                let r = q.to_rotation_matrix();
                ManifoldPoint { kind: self.clone(), coords: mat3_coords(r.matrix()) }
            }
            ManifoldKind::Hyperbolic2 | ManifoldKind::Spd2 | ManifoldKind::Euclidean { .. } => {
                let origin = self.reference_point();
                let v = origin.random_tangent(rng, 1.5);
                origin.exp(&v).expect("exp is globally defined")
            }
        }
    }

    /// A fixed convenient base point (identity-like) per kind.
    pub fn reference_point(&self) -> ManifoldPoint {
        let coords = match self {
            ManifoldKind::Circle { .. } => vec![0.0],
            ManifoldKind::Sphere { radius } => vec![0.0, 0.0, *radius],
            ManifoldKind::Hyperbolic2 => vec![0.0, 0.0, 1.0],
            ManifoldKind::Spd2 => vec![1.0, 0.0, 0.0, 1.0],
            ManifoldKind::So3 => mat3_coords(&Matrix3::identity()),
            ManifoldKind::Torus2 { .. } => vec![0.0, 0.0],
            ManifoldKind::Euclidean { d } => vec![0.0; *d],
        };
        ManifoldPoint { kind: self.clone(), coords }
    }
}

impl ManifoldPoint {
    /// Gaussian tangent vector in an orthonormal basis, rescaled to a
    /// uniformly random norm in [0, cap].
    pub fn random_tangent<R: rand::Rng>(&self, rng: &mut R, cap: f64) -> TangentVector {
        use rand_distr::{Distribution, StandardNormal};
        let basis = self.tangent_basis();
        let mut v = self.zero_tangent();
        for b in &basis {
            let c: f64 = StandardNormal.sample(rng);
            v = v.add(&b.scaled(c));
        }
        let n = v.norm();
        if n < 1e-14 {
            return v;
        }
        let target = rng.gen::<f64>() * cap;
        v.scaled(target / n)
    }

    /// Standard Gaussian tangent vector in an orthonormal basis.
    pub fn gaussian_tangent<R: rand::Rng>(&self, rng: &mut R) -> TangentVector {
        use rand_distr::{Distribution, StandardNormal};
        let basis = self.tangent_basis();
        let mut v = self.zero_tangent();
        for b in &basis {
            let c: f64 = StandardNormal.sample(rng);
            v = v.add(&b.scaled(c));
        }
        v
    }
}

/// Positive-curvature variance discount sqrt(k) r / tan(sqrt(k) r),
/// equal to 1 whenever the curvature bound is non-positive.
pub fn curvature_factor(kappa: f64, r: f64) -> Result<f64, GeomError> {
    if r < 0.0 {
        return Err(GeomError::Domain("negative radius".into()));
    }
    if kappa <= 0.0 || r == 0.0 {
        return Ok(1.0);
    }
    let x = kappa.sqrt() * r;
    if x >= 0.5 * PI {
        return Err(GeomError::Domain(format!(
            "curvature factor undefined: sqrt(kappa) r = {x:.6} >= pi/2"
        )));
    }
    Ok(x / x.tan())
}
