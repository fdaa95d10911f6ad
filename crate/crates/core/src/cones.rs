//! Cones `C_ε(x, v)`, linear projections along `(λ, 1)`, line–set hits and
//! the cone-complement Lipschitz ratio.
//!
//! Every object here works in a *frame*: one coordinate (`axis`, by
//! default the last) plays the role of the fiber coordinate `x_n`, the
//! remaining coordinates in increasing order form the base `ℝ^{n-1}`. The
//! usual setting of cones `x + t(v', 1)` is `axis = n - 1`; choosing
//! `axis = 0` gives horizontal projections in the plane.

use serde::{Deserialize, Serialize};

use crate::expr::RootConfig;
use crate::linalg;
use crate::sets::{Hit, LineHits, SetError};

/// Default `t` window for line hits, punctured at zero.
pub const DEFAULT_T_WINDOW: (f64, f64) = (-1e3, 1e3);
pub const T_PUNCTURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConeError {
    #[error("aperture must be positive and finite, got {0}")]
    BadAperture(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fiber axis {axis} out of range for dimension {dim}")]
    BadAxis { axis: usize, dim: usize },
    #[error("points lie on one fiber of the projection")]
    DegenerateFiber,
}

/// Linear projection `ℝⁿ → ℝ^{n-1}` parallel to the direction `(λ, 1)`
/// written in the frame with fiber coordinate `axis`:
/// `π(y)_j = y_{b_j} − λ_j · y_axis` where `b_j` runs over the base
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub axis: Option<usize>,
}

impl Projection {
    /// Projection with the last coordinate as fiber.
    pub fn new(lambda: Vec<f64>) -> Self {
        Projection { lambda, axis: None }
    }

    pub fn with_axis(lambda: Vec<f64>, axis: usize) -> Result<Self, ConeError> {
        let dim = lambda.len() + 1;
        if axis >= dim {
            return Err(ConeError::BadAxis { axis, dim });
        }
        Ok(Projection { lambda, axis: Some(axis) })
    }

    /// `π(x, y) = x` in the plane.
    pub fn vertical() -> Self {
        Projection::new(vec![0.0])
    }

    /// `π(x, y) = y` in the plane.
    pub fn horizontal() -> Self {
        Projection { lambda: vec![0.0], axis: Some(0) }
    }

    /// Projection of the plane along `(λ, 1)`, `π(x, y) = x − λy`.
    pub fn planar(lambda: f64) -> Self {
        Projection::new(vec![lambda])
    }

    pub fn dim(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn axis(&self) -> usize {
        self.axis.unwrap_or(self.lambda.len())
    }

    /// Base coordinate indices in ambient order.
    pub fn base_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let axis = self.axis();
        (0..self.dim()).filter(move |&i| i != axis)
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let h = y[self.axis()];
        self.base_indices().zip(&self.lambda).map(|(i, l)| y[i] - l * h).collect()
    }

    /// The kernel direction `(λ, 1)` in ambient coordinates.
    pub fn direction(&self) -> Vec<f64> {
        self.frame_vector(&self.lambda, 1.0)
    }

    /// The ambient point with base image `base` and fiber coordinate `h`.
    pub fn lift(&self, base: &[f64], h: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[self.axis()] = h;
        for ((i, b), l) in self.base_indices().zip(base).zip(&self.lambda) {
            y[i] = b + l * h;
        }
        y
    }

    /// Ambient vector with base part `base` and fiber part `h` (no shear).
    pub fn frame_vector(&self, base: &[f64], h: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[self.axis()] = h;
        for (i, b) in self.base_indices().zip(base) {
            y[i] = *b;
        }
        y
    }

    /// Operator norm of `π`, `√(1 + ‖λ‖²)`.
    pub fn norm(&self) -> f64 {
        (1.0 + linalg::dot(&self.lambda, &self.lambda)).sqrt()
    }
}

/// The double cone `{x + t(v', 1) : t ≠ 0, ‖v' − v‖ < ε}` in the frame of
/// `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub vertex: Vec<f64>,
    pub center: Vec<f64>,
    pub aperture: f64,
    #[serde(default)]
    pub axis: Option<usize>,
}

impl Cone {
    pub fn new(vertex: Vec<f64>, center: Vec<f64>, aperture: f64) -> Result<Self, ConeError> {
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(ConeError::BadAperture(aperture));
        }
        if vertex.len() != center.len() + 1 {
            return Err(ConeError::DimensionMismatch { expected: center.len() + 1, got: vertex.len() });
        }
        Ok(Cone { vertex, center, aperture, axis: None })
    }

    pub fn with_axis(mut self, axis: usize) -> Result<Self, ConeError> {
        if axis >= self.vertex.len() {
            return Err(ConeError::BadAxis { axis, dim: self.vertex.len() });
        }
        self.axis = Some(axis);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.vertex.len()
    }

    pub fn axis(&self) -> usize {
        self.axis.unwrap_or(self.vertex.len() - 1)
    }

    /// Ambient direction `(v', 1)` in this cone's frame.
    pub fn line_direction(&self, v_prime: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        let axis = self.axis();
        d[axis] = 1.0;
        for (i, v) in (0..self.dim()).filter(|&i| i != axis).zip(v_prime) {
            d[i] = *v;
        }
        d
    }

    /// `x + t(v', 1)`.
    pub fn point_at(&self, v_prime: &[f64], t: f64) -> Vec<f64> {
        linalg::axpy(&self.vertex, t, &self.line_direction(v_prime))
    }

    /// Splits `p − x` into `(t, v')`; `None` when `t = 0`.
    pub fn coordinates(&self, point: &[f64]) -> Option<(f64, Vec<f64>)> {
        let axis = self.axis();
        let t = point[axis] - self.vertex[axis];
        if t == 0.0 {
            return None;
        }
        let v = (0..self.dim()).filter(|&i| i != axis).map(|i| (point[i] - self.vertex[i]) / t).collect();
        Some((t, v))
    }
}

/// Membership in the open double cone; the vertex itself is excluded.
pub fn cone_contains(cone: &Cone, point: &[f64]) -> bool {
    match cone.coordinates(point) {
        Some((_, v)) => linalg::dist(&v, &cone.center) < cone.aperture,
        None => false,
    }
}

/// Sorted `t` with `x + t(v', 1) ∈ set`, inside `window` and outside the
/// puncture `|t| ≤ 1e-12`.
pub fn line_set_hits<S: LineHits + ?Sized>(
    set: &S,
    cone: &Cone,
    v_prime: &[f64],
    window: (f64, f64),
    cfg: &RootConfig,
) -> Result<Vec<Hit>, SetError> {
    let dir = cone.line_direction(v_prime);
    let mut hits = Vec::new();
    for w in [(window.0, -T_PUNCTURE), (T_PUNCTURE, window.1)] {
        if w.0 < w.1 {
            hits.extend(set.line_hits(&cone.vertex, &dir, w, cfg)?);
        }
    }
    Ok(hits)
}

/// `d(x, x') / d(π(x), π(x'))`.
pub fn cone_complement_ratio(x: &[f64], x_prime: &[f64], projection: &Projection) -> Result<f64, ConeError> {
    let n = projection.dim();
    for p in [x, x_prime] {
        if p.len() != n {
            return Err(ConeError::DimensionMismatch { expected: n, got: p.len() });
        }
    }
    let base = linalg::dist(&projection.apply(x), &projection.apply(x_prime));
    if base == 0.0 {
        return Err(ConeError::DegenerateFiber);
    }
    Ok(linalg::dist(x, x_prime) / base)
}

/// Upper bound on [`cone_complement_ratio`] for pairs outside `C_ε(x, λ)`:
/// `1 + 1/ε` for `λ = 0`, `1 + (1 + ‖λ‖)/ε` in general.
pub fn cone_complement_bound(projection: &Projection, epsilon: f64) -> f64 {
    1.0 + (1.0 + linalg::norm(&projection.lambda)) / epsilon
}
