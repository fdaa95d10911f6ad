//! Boundary sampling and distance-to-complement estimation.
//!
//! Sign-condition sets in the plane are sampled by locating the zeros of
//! every atom on the edges of a uniform grid (the edge intersections of
//! marching squares, solved to machine precision along each edge) and
//! keeping the points that lie on the frontier. Bands sample their two
//! graphs adaptively and their two end fibers as segments. Distances are
//! the nearest sample, improved by a local closest-point solve on the
//! sampled feature.

use super::{singular, Aabb, DefinableSet, Frontier, Graph, GraphBand, LineHits, ParametricPatch, SetError, SetKind};
use crate::cones::Projection;
use crate::expr::{refine_bracket, DefinableExpr, UnaryRestriction};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    /// Part of the zero set of an expression.
    Curve(DefinableExpr),
    /// A straight segment, exactly on the boundary.
    Segment(Vec<f64>, Vec<f64>),
    /// Isolated points: corners, singular points.
    Point,
    /// Image of a parametric patch.
    Patch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub label: String,
    pub kind: FeatureKind,
}

/// Points tagged with the boundary feature they sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub tags: Vec<usize>,
    pub features: Vec<Feature>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud { dim, points: Vec::new(), tags: Vec::new(), features: Vec::new() }
    }

    /// Registers a feature, reusing an existing one with the same label.
    pub fn add_feature(&mut self, f: Feature) -> usize {
        if let Some(i) = self.features.iter().position(|g| g.label == f.label) {
            return i;
        }
        self.features.push(f);
        self.features.len() - 1
    }

    pub fn push(&mut self, p: Vec<f64>, feature: usize) {
        self.points.push(p);
        self.tags.push(feature);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn extend_from(&mut self, other: PointCloud, prefix: &str, keep: impl Fn(&[f64], &Feature) -> bool) {
        let ids: Vec<usize> = other
            .features
            .iter()
            .map(|f| self.add_feature(Feature { label: format!("{prefix}{}", f.label), kind: f.kind.clone() }))
            .collect();
        for (p, t) in other.points.into_iter().zip(other.tags) {
            if keep(&p, &other.features[t]) {
                self.push(p, ids[t]);
            }
        }
    }

    /// Sorts points lexicographically by (feature, coordinates).
    pub fn canonicalize(&mut self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.tags[a].cmp(&self.tags[b]).then_with(|| {
                self.points[a]
                    .iter()
                    .zip(&self.points[b])
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.tags = idx.iter().map(|&i| self.tags[i]).collect();
    }
}

/// `c` is in the closure but not the interior, judged by the probes
/// around it.
pub(crate) fn is_frontier(set: &DefinableSet, c: &[f64], probes: &[Vec<f64>]) -> bool {
    let in_c = set.contains_lenient(c);
    let mut any = in_c;
    let mut all = in_c;
    for p in probes {
        let inside = set.contains_lenient(p);
        any |= inside;
        all &= inside;
    }
    any && !all
}

pub(crate) fn frontier_by_axes(set: &DefinableSet, c: &[f64], delta: f64) -> bool {
    let n = c.len();
    let mut probes = Vec::with_capacity(2 * n + 4);
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut p = c.to_vec();
            p[i] += s * delta;
            probes.push(p);
        }
    }
    if n == 2 {
        let d = delta * std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(d, d), (d, -d), (-d, d), (-d, -d)] {
            probes.push(vec![c[0] + a, c[1] + b]);
        }
    }
    is_frontier(set, c, &probes)
}

fn frontier_by_normal(set: &DefinableSet, c: &[f64], normal: &[f64], delta: f64) -> bool {
    let len = linalg::norm(normal);
    if !(len > 0.0) || !len.is_finite() {
        return frontier_by_axes(set, c, delta);
    }
    let s = delta / len;
    is_frontier(set, c, &[linalg::axpy(c, -s, normal), linalg::axpy(c, s, normal)])
}

fn feature_normal(kind: &FeatureKind, p: &[f64]) -> Option<Vec<f64>> {
    match kind {
        FeatureKind::Curve(e) => e.eval_grad(p).ok().map(|g| g.1),
        FeatureKind::Segment(a, b) if a.len() == 2 => Some(vec![a[1] - b[1], b[0] - a[0]]),
        _ => None,
    }
}

fn frontier_for_feature(set: &DefinableSet, p: &[f64], kind: &FeatureKind, delta: f64) -> bool {
    match feature_normal(kind, p) {
        Some(n) => frontier_by_normal(set, p, &n, delta),
        None => frontier_by_axes(set, p, delta),
    }
}

/// Points on the frontier of `set`, spaced at most `diameter/density`
/// along every boundary feature.
pub fn boundary_sample(set: &DefinableSet, density: usize) -> Result<PointCloud, SetError> {
    let bbox = set.bbox().ok_or(SetError::UnboundedSet)?;
    let density = density.max(2);
    let diam = bbox.diameter();
    let pitch = if diam > 0.0 { diam / density as f64 } else { 1.0 };
    let mut cloud = sample_inner(set, bbox, density, pitch)?;
    cloud.canonicalize();
    Ok(cloud)
}

fn sample_inner(set: &DefinableSet, bbox: &Aabb, density: usize, pitch: f64) -> Result<PointCloud, SetError> {
    let delta = 1e-7 * bbox.diameter().max(1e-12);
    match set.kind() {
        SetKind::SignCondition(_) => match set.dim() {
            1 => sample_sign_1d(set, bbox, delta),
            2 => sample_sign_2d(set, bbox, density, delta),
            d => Err(SetError::Unsupported(format!("boundary sampling of sign conditions in dimension {d}"))),
        },
        SetKind::Patch(p) => sample_patch(p, density, pitch),
        SetKind::Band(b) => sample_band(b, density, pitch),
        SetKind::Union(ms) => {
            let mut cloud = PointCloud::new(set.dim());
            for (i, m) in ms.iter().enumerate() {
                let mb = m.bbox().unwrap_or(bbox);
                let sub = sample_inner(m, mb, density, pitch)?;
                cloud.extend_from(sub, &format!("m{i}:"), |p, f| frontier_for_feature(set, p, &f.kind, delta));
            }
            Ok(cloud)
        }
    }
}

fn sample_sign_1d(set: &DefinableSet, bbox: &Aabb, delta: f64) -> Result<PointCloud, SetError> {
    let frontier = Frontier(set);
    let hits = frontier.line_hits(&[0.0], &[1.0], (bbox.lo[0] - 1.0, bbox.hi[0] + 1.0), &Default::default())?;
    let mut cloud = PointCloud::new(1);
    for h in hits {
        if frontier_by_axes(set, &[h.t], delta) {
            let f = cloud.add_feature(Feature { label: format!("atom{}", h.feature), kind: FeatureKind::Point });
            cloud.push(vec![h.t], f);
        }
    }
    Ok(cloud)
}

fn sample_sign_2d(set: &DefinableSet, bbox: &Aabb, density: usize, delta: f64) -> Result<PointCloud, SetError> {
    let SetKind::SignCondition(sc) = set.kind() else { unreachable!() };
    let diam = bbox.diameter().max(1e-12);
    let grid_box = bbox.padded(0.013 * diam);
    // a few extra cells so consecutive edge crossings stay within one pitch
    let cells = (density as f64 * 1.05).ceil() as usize + 1;
    let hx = (grid_box.hi[0] - grid_box.lo[0]) / cells as f64;
    let hy = (grid_box.hi[1] - grid_box.lo[1]) / cells as f64;
    let node = |i: usize, j: usize| vec![grid_box.lo[0] + i as f64 * hx, grid_box.lo[1] + j as f64 * hy];

    let mut cloud = PointCloud::new(2);
    let mut per_atom: Vec<Vec<Vec<f64>>> = Vec::with_capacity(sc.atoms.len());
    for (a, atom) in sc.atoms.iter().enumerate() {
        let e = &atom.expr;
        let values: Vec<Option<f64>> =
            (0..=cells).flat_map(|j| (0..=cells).map(move |i| (i, j))).map(|(i, j)| e.eval(&node(i, j)).ok()).collect();
        let val = |i: usize, j: usize| values[j * (cells + 1) + i];
        let mut cands: Vec<Vec<f64>> = Vec::new();
        for j in 0..=cells {
            for i in 0..=cells {
                let Some(v0) = val(i, j) else { continue };
                if v0 == 0.0 {
                    cands.push(node(i, j));
                    continue;
                }
                for (di, dj, step) in [(1, 0, [hx, 0.0]), (0, 1, [0.0, hy])] {
                    if i + di > cells || j + dj > cells {
                        continue;
                    }
                    let Some(v1) = val(i + di, j + dj) else { continue };
                    if v1 != 0.0 && v0.signum() != v1.signum() {
                        let h = UnaryRestriction::new(e.clone(), node(i, j), step.to_vec());
                        if let Some(t) = refine_bracket(&h, 0.0, 1.0) {
                            cands.push(vec![node(i, j)[0] + t * step[0], node(i, j)[1] + t * step[1]]);
                        }
                    }
                }
            }
        }
        let kind = FeatureKind::Curve(e.clone());
        let f = cloud.add_feature(Feature { label: format!("atom{a}"), kind: kind.clone() });
        let kept: Vec<Vec<f64>> = cands.into_iter().filter(|p| frontier_for_feature(set, p, &kind, delta)).collect();
        for p in &kept {
            cloud.push(p.clone(), f);
        }
        per_atom.push(kept);
    }

    // corners and singular points
    let mut special: Vec<Vec<f64>> = Vec::new();
    let seed_box = grid_box.clone();
    for (a, atom) in sc.atoms.iter().enumerate() {
        special.extend(singular::singular_points_of(&atom.expr, &seed_box, 24));
        for (b, other) in sc.atoms.iter().enumerate().skip(a + 1) {
            if per_atom[a].is_empty() && per_atom[b].is_empty() {
                continue;
            }
            special.extend(singular::intersect_curves(&atom.expr, &other.expr, &seed_box, 24));
        }
    }
    let special = singular::dedupe(special, 1e-9 * diam);
    let f = cloud.add_feature(Feature { label: "corners".into(), kind: FeatureKind::Point });
    for p in special {
        if frontier_by_axes(set, &p, delta) {
            cloud.push(p, f);
        }
    }
    Ok(cloud)
}

/// Adaptive 1-parameter sampling: `eval(u)` yields points to keep
/// `pitch`-dense. Parameters where `eval` fails are skipped.
fn adaptive_1d<T: Clone>(
    a: f64,
    b: f64,
    n: usize,
    pitch: f64,
    eval: &dyn Fn(f64) -> Option<T>,
    gap: &dyn Fn(&T, &T) -> f64,
) -> Vec<(f64, T)> {
    let mut out: Vec<(f64, T)> = Vec::new();
    let us: Vec<f64> = (0..=n).map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 }).collect();
    let mut prev: Option<(f64, T)> = None;
    for &u in &us {
        let Some(v) = eval(u) else {
            prev = None;
            continue;
        };
        if let Some((pu, pv)) = prev.take() {
            refine_gap(pu, &pv, u, &v, pitch, eval, gap, &mut out, 0);
        }
        out.push((u, v.clone()));
        prev = Some((u, v));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

#[allow(clippy::too_many_arguments)]
fn refine_gap<T: Clone>(
    ua: f64,
    va: &T,
    ub: f64,
    vb: &T,
    pitch: f64,
    eval: &dyn Fn(f64) -> Option<T>,
    gap: &dyn Fn(&T, &T) -> f64,
    out: &mut Vec<(f64, T)>,
    depth: usize,
) {
    if depth >= 40 || gap(va, vb) <= pitch {
        return;
    }
    let um = 0.5 * (ua + ub);
    let Some(vm) = eval(um) else { return };
    refine_gap(ua, va, um, &vm, pitch, eval, gap, out, depth + 1);
    out.push((um, vm.clone()));
    refine_gap(um, &vm, ub, vb, pitch, eval, gap, out, depth + 1);
}

fn sample_patch(p: &ParametricPatch, density: usize, pitch: f64) -> Result<PointCloud, SetError> {
    let n = p.map.len();
    let mut cloud = PointCloud::new(n);
    let f = cloud.add_feature(Feature { label: "patch".into(), kind: FeatureKind::Patch });
    match p.param_dim() {
        0 => cloud.push(p.eval(&[])?, f),
        1 => {
            let eval = |u: f64| p.eval(&[u]).ok();
            let gap = |a: &Vec<f64>, b: &Vec<f64>| linalg::dist(a, b);
            for (_, q) in adaptive_1d(p.params.lo[0], p.params.hi[0], density, pitch, &eval, &gap) {
                cloud.push(q, f);
            }
        }
        2 => {
            let m = density.min(400);
            for j in 0..=m {
                for i in 0..=m {
                    let u = [
                        p.params.lo[0] + (p.params.hi[0] - p.params.lo[0]) * i as f64 / m as f64,
                        p.params.lo[1] + (p.params.hi[1] - p.params.lo[1]) * j as f64 / m as f64,
                    ];
                    if let Ok(q) = p.eval(&u) {
                        cloud.push(q, f);
                    }
                }
            }
        }
        k => return Err(SetError::Unsupported(format!("{k}-parameter patches"))),
    }
    if p.param_dim() >= n {
        return Err(SetError::Unsupported("patch of full dimension has no sampled boundary".into()));
    }
    Ok(cloud)
}

/// Boundary information of one side of a band at a base point.
#[derive(Debug, Clone)]
pub(crate) struct Bound {
    pub h: f64,
    pub feature: Option<usize>,
}

impl GraphBand {
    pub(crate) fn bound_hits(&self, u: &[f64]) -> Result<Option<(Bound, Bound)>, SetError> {
        let mut cache: Option<(usize, Vec<super::Hit>)> = None;
        let mut side = |g: &Graph| -> Result<Option<Bound>, SetError> {
            match g {
                Graph::Expr(e) => Ok(e.eval(u).ok().map(|h| Bound { h, feature: None })),
                Graph::FiberRoot { frontier, rank } => {
                    let key = std::sync::Arc::as_ptr(frontier) as usize;
                    if cache.as_ref().map(|c| c.0) != Some(key) {
                        cache = Some((key, self.fiber_hits(frontier, u)?));
                    }
                    let hits = &cache.as_ref().unwrap().1;
                    Ok(hits.get(*rank).map(|h| Bound { h: h.t, feature: Some(h.feature) }))
                }
            }
        };
        let lo = side(&self.lower)?;
        let hi = side(&self.upper)?;
        Ok(lo.zip(hi))
    }

    /// Expression vanishing on the graph of `g` in ambient coordinates.
    fn graph_curve(&self, g: &Graph, feature: Option<usize>) -> Option<DefinableExpr> {
        match g {
            Graph::Expr(e) => Some(graph_expr(&self.projection, e)),
            Graph::FiberRoot { frontier, .. } => feature.and_then(|f| Frontier(frontier).feature_expr(f)),
        }
    }
}

/// `y_axis − φ(π(y))`.
fn graph_expr(proj: &Projection, phi: &DefinableExpr) -> DefinableExpr {
    let axis = proj.axis();
    let base: Vec<DefinableExpr> =
        proj.base_indices()
            .zip(&proj.lambda)
            .map(|(i, l)| {
                if *l == 0.0 {
                    DefinableExpr::var(i)
                } else {
                    DefinableExpr::var(i) - DefinableExpr::constant(*l) * DefinableExpr::var(axis)
                }
            })
            .collect();
    DefinableExpr::var(axis) - phi.substitute(&base)
}

fn sample_band(b: &GraphBand, density: usize, pitch: f64) -> Result<PointCloud, SetError> {
    if b.projection.dim() != 2 {
        return Err(SetError::Unsupported("boundary sampling of bands outside the plane".into()));
    }
    let proj = &b.projection;
    let (a, c) = (b.base.lo[0], b.base.hi[0]);
    let eta = 1e-9 * (c - a);
    let eval = |u: f64| -> Option<(Bound, Bound)> {
        match b.bound_hits(&[u]) {
            Ok(Some((lo, hi))) if lo.h < hi.h => Some((lo, hi)),
            _ => None,
        }
    };
    let pt = |u: f64, h: f64| proj.lift(&[u], h);
    let gap = |x: &(f64, (Bound, Bound)), y: &(f64, (Bound, Bound))| {
        let dl = linalg::dist(&pt(x.0, x.1 .0.h), &pt(y.0, y.1 .0.h));
        let du = linalg::dist(&pt(x.0, x.1 .1.h), &pt(y.0, y.1 .1.h));
        dl.max(du)
    };
    let eval_u = |u: f64| eval(u).map(|v| (u, v));
    let samples = adaptive_1d(a + eta, c - eta, density, pitch, &eval_u, &gap);
    if samples.is_empty() {
        return Err(SetError::Unsupported("band graphs undefined on the whole base".into()));
    }

    let mut cloud = PointCloud::new(2);
    for (_, (u, (lo, hi))) in &samples {
        for (side, g, bound) in [("lower", &b.lower, lo), ("upper", &b.upper, hi)] {
            let label = format!("{side}:{}", bound.feature.map_or("graph".to_string(), |f| format!("atom{f}")));
            let f = match b.graph_curve(g, bound.feature) {
                Some(e) => cloud.add_feature(Feature { label, kind: FeatureKind::Curve(e) }),
                None => cloud.add_feature(Feature { label, kind: FeatureKind::Point }),
            };
            cloud.push(pt(*u, bound.h), f);
        }
    }
    let ends = [samples.first().unwrap(), samples.last().unwrap()];
    for (name, (_, (u, (lo, hi)))) in ["end-lo", "end-hi"].iter().zip(ends) {
        let p0 = pt(*u, lo.h);
        let p1 = pt(*u, hi.h);
        let f = cloud.add_feature(Feature { label: (*name).to_string(), kind: FeatureKind::Segment(p0.clone(), p1.clone()) });
        let m = (linalg::dist(&p0, &p1) / pitch).ceil().max(1.0) as usize;
        for k in 0..=m {
            cloud.push(linalg::axpy(&p0, k as f64 / m as f64, &linalg::sub(&p1, &p0)), f);
        }
    }
    Ok(cloud)
}

pub(crate) fn patch_bbox(p: &ParametricPatch) -> Option<Aabb> {
    let k = p.param_dim();
    let m = match k {
        1 => 256,
        2 => 48,
        _ => 12,
    };
    let mut pts = Vec::new();
    let total = (m + 1usize).pow(k as u32);
    for mut idx in 0..total {
        let u: Vec<f64> = (0..k)
            .map(|i| {
                let c = idx % (m + 1);
                idx /= m + 1;
                p.params.lo[i] + (p.params.hi[i] - p.params.lo[i]) * c as f64 / m as f64
            })
            .collect();
        if let Ok(q) = p.eval(&u) {
            pts.push(q);
        }
    }
    bbox_of(&pts, 0.02)
}

fn bbox_of(pts: &[Vec<f64>], rel_pad: f64) -> Option<Aabb> {
    let first = pts.first()?;
    let mut lo = first.clone();
    let mut hi = first.clone();
    for p in pts {
        for i in 0..p.len() {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let b = Aabb { lo, hi };
    let pad = rel_pad * b.diameter();
    Some(b.padded(pad))
}

pub(crate) fn band_bbox(b: &GraphBand) -> Result<Option<Aabb>, SetError> {
    let both_fiber = matches!((&b.lower, &b.upper), (Graph::FiberRoot { .. }, Graph::FiberRoot { .. }));
    if both_fiber {
        if let Graph::FiberRoot { frontier, .. } = &b.lower {
            if let Some(bb) = frontier.bbox() {
                return Ok(Some(bb.clone()));
            }
        }
    }
    let k = b.base.dim();
    let m: usize = if k == 1 { 64 } else { 16 };
    let total = (m + 1).pow(k as u32);
    let mut pts = Vec::new();
    for mut idx in 0..total {
        let u: Vec<f64> = (0..k)
            .map(|i| {
                let c = idx % (m + 1);
                idx /= m + 1;
                // interior nodes only: the base cell is open
                let s = (c as f64 + 0.5) / (m + 1) as f64;
                b.base.lo[i] + (b.base.hi[i] - b.base.lo[i]) * s
            })
            .collect();
        if let Some((lo, hi)) = b.bounds_at(&u)? {
            if lo >= hi {
                return Err(SetError::BandOrder { at: u });
            }
            pts.push(b.projection.lift(&u, lo));
            pts.push(b.projection.lift(&u, hi));
        }
    }
    Ok(bbox_of(&pts, 0.02).map(|bb| {
        let mut lo = bb.lo;
        let mut hi = bb.hi;
        // the base cell itself bounds the band's base image
        for (j, i) in b.projection.base_indices().enumerate() {
            if b.projection.lambda[j] == 0.0 {
                lo[i] = lo[i].min(b.base.lo[j]);
                hi[i] = hi[i].max(b.base.hi[j]);
            }
        }
        Aabb { lo, hi }
    }))
}

/// Inverse solve `γ(u) = point` by seeded, box-clamped Gauss–Newton.
pub(crate) fn patch_contains(p: &ParametricPatch, point: &[f64]) -> bool {
    let tol = 1e-9 * (1.0 + linalg::norm(point));
    let k = p.param_dim();
    if k == 0 {
        return p.eval(&[]).map_or(false, |q| linalg::dist(&q, point) <= tol);
    }
    let m: usize = match k {
        1 => 64,
        2 => 24,
        _ => 8,
    };
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = m.pow(k as u32);
    for mut idx in 0..total {
        let u: Vec<f64> = (0..k)
            .map(|i| {
                let c = idx % m;
                idx /= m;
                p.params.lo[i] + (p.params.hi[i] - p.params.lo[i]) * (c as f64 + 0.5) / m as f64
            })
            .collect();
        if let Ok(q) = p.eval(&u) {
            seeds.push((linalg::dist(&q, point), u));
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, u0) in seeds.into_iter().take(16) {
        let mut u = u0;
        for _ in 0..60 {
            let Ok((q, jac)) = p.eval_jac(&u) else { break };
            let r = linalg::sub(&q, point);
            if linalg::norm(&r) <= tol {
                return true;
            }
            let Some(step) = linalg::gauss_newton_step(&jac, &r, 1e-12) else { break };
            for i in 0..k {
                u[i] = (u[i] + step[i]).clamp(p.params.lo[i], p.params.hi[i]);
            }
        }
        if p.eval(&u).map_or(false, |q| linalg::dist(&q, point) <= tol) {
            return true;
        }
    }
    false
}

/// Nearest-boundary queries against a fixed sample of `∂U`.
#[derive(Debug, Clone)]
pub struct BoundaryIndex<'a> {
    set: &'a DefinableSet,
    cloud: PointCloud,
    pitch: f64,
    delta: f64,
}

impl<'a> BoundaryIndex<'a> {
    pub fn new(set: &'a DefinableSet, density: usize) -> Result<Self, SetError> {
        let bbox = set.bbox().ok_or(SetError::UnboundedSet)?;
        let cloud = boundary_sample(set, density)?;
        let diam = bbox.diameter().max(1e-12);
        Ok(BoundaryIndex { set, cloud, pitch: diam / density.max(2) as f64, delta: 1e-7 * diam })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn set(&self) -> &DefinableSet {
        self.set
    }

    /// `(lower, upper)` bracket of `d(q, ∂U)`.
    pub fn distance(&self, q: &[f64]) -> (f64, f64) {
        let nf = self.cloud.features.len();
        let mut best = vec![(f64::INFINITY, usize::MAX); nf];
        let mut d0 = f64::INFINITY;
        for (i, (p, &t)) in self.cloud.points.iter().zip(&self.cloud.tags).enumerate() {
            let d = linalg::dist(p, q);
            if d < best[t].0 {
                best[t] = (d, i);
            }
            d0 = d0.min(d);
        }
        if !d0.is_finite() {
            return (f64::INFINITY, f64::INFINITY);
        }
        let mut upper = d0;
        for (f, &(d, i)) in best.iter().enumerate() {
            if i == usize::MAX || d > d0 + 2.0 * self.pitch {
                continue;
            }
            if let Some(r) = self.refine(q, f, &self.cloud.points[i]) {
                upper = upper.min(r);
            }
        }
        ((upper - self.pitch).max(0.0), upper)
    }

    fn refine(&self, q: &[f64], feature: usize, start: &[f64]) -> Option<f64> {
        match &self.cloud.features[feature].kind {
            FeatureKind::Segment(a, b) => {
                let ab = linalg::sub(b, a);
                let len2 = linalg::dot(&ab, &ab);
                let s = if len2 > 0.0 { (linalg::dot(&linalg::sub(q, a), &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let c = linalg::axpy(a, s, &ab);
                let ok = match feature_normal(&self.cloud.features[feature].kind, &c) {
                    Some(n) => frontier_by_normal(self.set, &c, &n, self.delta),
                    None => frontier_by_axes(self.set, &c, self.delta),
                };
                ok.then(|| linalg::dist(q, &c))
            }
            FeatureKind::Curve(e) => {
                let y = closest_on_curve(e, q, start, self.pitch)?;
                if linalg::dist(&y, start) > 4.0 * self.pitch {
                    return None;
                }
                let n = e.eval_grad(&y).ok()?.1;
                frontier_by_normal(self.set, &y, &n, self.delta).then(|| linalg::dist(q, &y))
            }
            FeatureKind::Point | FeatureKind::Patch => None,
        }
    }
}

/// Local closest point to `q` on `{e = 0}` starting from `start`.
fn closest_on_curve(e: &DefinableExpr, q: &[f64], start: &[f64], pitch: f64) -> Option<Vec<f64>> {
    let mut y = start.to_vec();
    for _ in 0..60 {
        let (v, g) = e.eval_grad(&y).ok()?;
        let gg = linalg::dot(&g, &g);
        if gg == 0.0 {
            return None;
        }
        y = linalg::axpy(&y, -v / gg, &g);
        let (_, g) = e.eval_grad(&y).ok()?;
        let gn = linalg::norm(&g);
        if gn == 0.0 {
            return None;
        }
        let n: Vec<f64> = g.iter().map(|c| c / gn).collect();
        let w = linalg::sub(q, &y);
        let tangential = linalg::axpy(&w, -linalg::dot(&w, &n), &n);
        let len = linalg::norm(&tangential);
        let s = if len > pitch { pitch / len } else { 1.0 };
        y = linalg::axpy(&y, s, &tangential);
        if len <= 1e-15 * (1.0 + linalg::norm(q)) {
            break;
        }
    }
    let (v, g) = e.eval_grad(&y).ok()?;
    let gg = linalg::dot(&g, &g);
    if gg > 0.0 {
        y = linalg::axpy(&y, -v / gg, &g);
    }
    let v = e.eval(&y).ok()?;
    (v.abs() <= 1e-10 * (1.0 + gg.sqrt())).then_some(y)
}

/// `(lower, upper)` bracket of `d(point, ℝⁿ ∖ U)` for `point ∈ U`, through
/// `d(point, ∂U)`.
pub fn distance_to_complement(open_set: &DefinableSet, point: &[f64], density: usize) -> Result<(f64, f64), SetError> {
    if !open_set.contains(point)? {
        return Err(SetError::PointOutsideSet);
    }
    Ok(BoundaryIndex::new(open_set, density)?.distance(point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn bx(lo: [f64; 2], hi: [f64; 2]) -> Aabb {
        Aabb::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn disk() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x^2 + y^2 < 1"], Some(bx([-1.0, -1.0], [1.0, 1.0]))).unwrap()
    }

    fn square() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1"], Some(bx([0.0, -1.0], [1.0, 1.0]))).unwrap()
    }

    #[test]
    fn disk_boundary_residuals() {
        let c = boundary_sample(&disk(), 360).unwrap();
        assert!(c.len() >= 360);
        for p in &c.points {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn square_boundary_hausdorff() {
        let c = boundary_sample(&square(), 100).unwrap();
        let d_edge = |p: &Vec<f64>| {
            let (x, y) = (p[0], p[1]);
            let dx = (x.min(1.0 - x)).abs();
            let dy = (1.0 - y.abs()).abs();
            if (-1e-12..=1.0 + 1e-12).contains(&x) && (-1.0 - 1e-12..=1.0 + 1e-12).contains(&y) {
                dx.min(dy)
            } else {
                f64::INFINITY
            }
        };
        for p in &c.points {
            assert!(d_edge(p) < 1e-12, "{p:?}");
        }
        // every edge point has a sample within 0.02
        for k in 0..=400 {
            let s = k as f64 / 400.0;
            for e in [[s, -1.0], [s, 1.0], [0.0, 2.0 * s - 1.0], [1.0, 2.0 * s - 1.0]] {
                let m = c.points.iter().map(|p| linalg::dist(p, &e)).fold(f64::INFINITY, f64::min);
                assert!(m <= 0.02, "{e:?} {m}");
            }
        }
    }

    #[test]
    fn band_samples_graphs_and_end_fibers() {
        let lower = Graph::Expr(parse("-(1 - x^2)^0.5").unwrap());
        let upper = Graph::Expr(parse("(1 - x^2)^0.5").unwrap());
        let b = DefinableSet::band(Projection::vertical(), Aabb::new(vec![-1.0], vec![1.0]).unwrap(), lower, upper).unwrap();
        let c = boundary_sample(&b, 200).unwrap();
        for p in &c.points {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() <= 1e-4, "{p:?}");
        }
        let labels: Vec<&str> = c.features.iter().map(|f| f.label.as_str()).collect();
        assert!(labels.contains(&"lower:graph") && labels.contains(&"upper:graph"));
        assert!(labels.contains(&"end-lo") && labels.contains(&"end-hi"));
    }

    #[test]
    fn square_distances() {
        let (lo, hi) = distance_to_complement(&square(), &[0.3, 0.0], 100).unwrap();
        assert!((hi - 0.3).abs() < 1e-12 && lo <= 0.3);
        assert!(matches!(distance_to_complement(&square(), &[1.5, 0.0], 100), Err(SetError::PointOutsideSet)));
    }

    #[test]
    fn parabola_piece_distance() {
        let u1 = DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1", "y < x^2"], Some(bx([0.0, -1.0], [1.0, 1.0]))).unwrap();
        let idx = BoundaryIndex::new(&u1, 100).unwrap();
        let (_, hi) = idx.distance(&[0.01, 0.0]);
        assert!(hi <= 1e-4 + idx.pitch());
        assert!(hi <= 1e-4 + 1e-12);
    }

    #[test]
    fn disk_center_distance() {
        let (lo, hi) = distance_to_complement(&disk(), &[0.0, 0.0], 2000).unwrap();
        assert!((hi - 1.0).abs() < 1e-3 && lo <= 1.0);
    }

    #[test]
    fn doubling_density_halves_gap() {
        let d = disk();
        let q = [0.2, -0.3];
        let (l1, u1) = BoundaryIndex::new(&d, 100).unwrap().distance(&q);
        let (l2, u2) = BoundaryIndex::new(&d, 200).unwrap().distance(&q);
        let r = (u1 - l1) / (u2 - l2);
        assert!(r > 2.0 / 2.5 && r < 2.0 * 2.5);
    }
}
