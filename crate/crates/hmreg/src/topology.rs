//! Homotopy-class diagnostics for circle- and torus-valued fits.
//!
//! A fitted spline on a circle or flat torus carries a winding number per
//! periodic coordinate: the total signed displacement of the nodal path
//! divided by the period. The class is well defined only when every
//! adjacent increment has an unambiguous shortest representative and the
//! raw displacement sits close enough to an integer. The module also
//! computes the discrete Dirichlet energy of a spline and the minimal
//! Dirichlet energy any curve in a given class must carry, which together
//! explain when a regularized fit can or cannot reach the right class.
//!
//! ```
//! use hmreg::manifold::{ManifoldKind, ManifoldPoint};
//! use hmreg::spline::GeodesicSpline;
//! use hmreg::topology::{winding_number, HomotopyClass};
//! use std::f64::consts::PI;
//!
//! let kind = ManifoldKind::circle(2.0 * PI);
//! let n = 100;
//! let knots: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
//! let nodal: Vec<ManifoldPoint> = knots
//!     .iter()
//!     .map(|t| ManifoldPoint::new(kind.clone(), vec![(2.0 * PI * t).rem_euclid(2.0 * PI)]).unwrap())
//!     .collect();
//! let spline = GeodesicSpline::new(knots, nodal, 0.1).unwrap();
//! assert_eq!(winding_number(&spline).unwrap(), HomotopyClass::Circle(1));
//! ```

use crate::error::TopologyError;
use crate::manifold::ManifoldKind;
use crate::spline::GeodesicSpline;
use serde::{Deserialize, Serialize};

/// Free homotopy class of a path in a flat periodic manifold: one winding
/// integer per periodic coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomotopyClass {
    Circle(i64),
    Torus(i64, i64),
}

impl HomotopyClass {
    pub fn is_trivial(&self) -> bool {
        match self {
            HomotopyClass::Circle(k) => *k == 0,
            HomotopyClass::Torus(k1, k2) => *k1 == 0 && *k2 == 0,
        }
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r > 0.5 * period {
        r - period
    } else {
        r
    }
}

fn periods(kind: &ManifoldKind) -> Result<Vec<f64>, TopologyError> {
    match kind {
        ManifoldKind::Circle { circumference } => Ok(vec![*circumference]),
        ManifoldKind::Torus2 { l1, l2 } => Ok(vec![*l1, *l2]),
        other => Err(TopologyError::UnsupportedManifold(other.to_tag())),
    }
}

/// Raw winding displacement per periodic coordinate: the sum of shortest
/// signed increments along the nodal path, divided by the period. Not
/// necessarily an integer; the half-winding torus test curve is the
/// canonical non-integer case.
pub fn winding_raw(spline: &GeodesicSpline) -> Result<Vec<f64>, TopologyError> {
    let ls = periods(spline.kind())?;
    let nodal = spline.nodal();
    let mut totals = vec![0.0; ls.len()];
    for i in 0..nodal.len().saturating_sub(1) {
        for (j, l) in ls.iter().enumerate() {
            let d = wrap(nodal[i + 1].coords()[j] - nodal[i].coords()[j], *l);
            if d.abs() >= 0.5 * l - 1e-9 {
                return Err(TopologyError::AmbiguousIncrement { left: i, right: i + 1, dist: d.abs() });
            }
            totals[j] += d;
        }
    }
    Ok(totals.iter().zip(&ls).map(|(t, l)| t / l).collect())
}

/// Winding class of a fitted spline: the rounded raw displacement, with a
/// 0.25 guard so that displacements far from any integer are reported as
/// raw reals instead of being forced into a class.
pub fn winding_number(spline: &GeodesicSpline) -> Result<HomotopyClass, TopologyError> {
    let raw = winding_raw(spline)?;
    let mut ks = Vec::with_capacity(raw.len());
    for r in &raw {
        let k = r.round();
        let frac = (r - k).abs();
        if frac > 0.25 {
            return Err(TopologyError::NoClass { raw: *r, frac });
        }
        ks.push(k as i64);
    }
    match ks.as_slice() {
        [k] => Ok(HomotopyClass::Circle(*k)),
        [k1, k2] => Ok(HomotopyClass::Torus(*k1, *k2)),
        _ => unreachable!("periods() yields one or two coordinates"),
    }
}

/// Discrete Dirichlet energy of a spline: half the sum of squared nodal
/// distances weighted by inverse knot gaps. Zero exactly when all nodal
/// values coincide.
pub fn discrete_dirichlet(spline: &GeodesicSpline) -> f64 {
    let nodal = spline.nodal();
    let knots = spline.knots();
    let mut acc = 0.0;
    for i in 0..nodal.len().saturating_sub(1) {
        let d = nodal[i].dist(&nodal[i + 1]).expect("nodal values share a manifold");
        acc += d * d / (knots[i + 1] - knots[i]);
    }
    0.5 * acc
}

/// Minimal Dirichlet energy of any curve in the given class over a domain
/// of the given length: squared length of the shortest closed geodesic in
/// the class, divided by twice the domain length. The trivial class costs
/// nothing on any manifold; nontrivial classes only exist on the circle
/// and the torus.
pub fn energy_barrier(
    kind: &ManifoldKind,
    class: &HomotopyClass,
    domain_length: f64,
) -> Result<f64, TopologyError> {
    if class.is_trivial() {
        return Ok(0.0);
    }
    let len_sq = match (kind, class) {
        (ManifoldKind::Circle { circumference }, HomotopyClass::Circle(k)) => {
            let l = circumference * k.abs() as f64;
            l * l
        }
        (ManifoldKind::Torus2 { l1, l2 }, HomotopyClass::Torus(k1, k2)) => {
            let a = l1 * *k1 as f64;
            let b = l2 * *k2 as f64;
            a * a + b * b
        }
        _ => return Err(TopologyError::UnsupportedManifold(kind.to_tag())),
    };
    Ok(len_sq / (2.0 * domain_length))
}

/// Whether the fitted spline lands in the given class. Any ambiguity
/// (ambiguous increment, no assignable class) counts as non-recovery.
pub fn recovery_indicator(spline: &GeodesicSpline, truth: &HomotopyClass) -> bool {
    winding_number(spline).map(|c| c == *truth).unwrap_or(false)
}

#[cfg(test)]
mod tests;
