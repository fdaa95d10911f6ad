//! Regular covers of bounded open sets.
//!
//! A finite open cover `(U_i)` of `U` is regular with constant `C` when
//! `d(x, ℝⁿ∖U) ≤ C max_i d(x, ℝⁿ∖U_i)` for all `x ∈ U`. In the plane the
//! constructor fibers `U` over a line for each projection in a list:
//! the base minus the discriminant splits into open intervals, and over
//! each interval `U` is a union of bands between consecutive boundary
//! graphs.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{cone_contains, Cone, ConeError, Projection};
use crate::expr::RootConfig;
use crate::linalg;
use crate::regularity::{check_weak_regular, RegularityConfig, RegularityError, RegularityVerdict};
use crate::sets::{boundary_sample, Aabb, BoundaryIndex, DefinableSet, Frontier, Graph, LineHits, SetError, SetKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverError {
    #[error("no intervals given")]
    EmptyInput,
    #[error("interval ({0}, {1}) is empty or unbounded")]
    BadInterval(f64, f64),
    #[error("intervals overlap near {0}")]
    Overlap(f64),
    #[error("the set must be bounded (give a bounding box)")]
    Unbounded,
    #[error("only planar sets are supported, got dimension {0}")]
    Dimension(usize),
    #[error("fiber hit count varies over ({a}, {b}) for projection {projection}: {detail}")]
    DiscriminantFailure { projection: usize, a: f64, b: f64, detail: String },
    #[error("boundary is not a curve: {0}")]
    NonCurveBoundary(String),
    #[error("projection is not weak regular at the point: {0}")]
    NotRegularHere(String),
    #[error("point is not in piece {0}")]
    PointNotInPiece(usize),
    #[error("piece {0} has no band provenance")]
    NoProvenance(usize),
    #[error("no projections given")]
    NoProjections,
    #[error("cover has no pieces")]
    NoPieces,
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    /// Fiber count changes by an even number: two boundary points merge.
    Tangency,
    /// Image of a singular point or corner of the curve.
    SingularImage,
    /// Fiber count changes by an odd number, or the fiber lies in the
    /// curve.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub kind: CriticalKind,
}

/// Critical values of a projection restricted to a plane curve, together
/// with the images of its singular points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub projection: Projection,
    pub values: Vec<CriticalValue>,
}

impl Discriminant {
    pub fn points(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value).collect()
    }

    pub fn distance(&self, u: f64) -> f64 {
        self.values.iter().map(|v| (v.value - u).abs()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantConfig {
    /// Base samples in the sweep.
    pub samples: usize,
    pub roots: RootConfig,
}

impl Default for DiscriminantConfig {
    fn default() -> Self {
        DiscriminantConfig { samples: 2048, roots: RootConfig::with_density(256) }
    }
}

const FIBER_WINDOW: (f64, f64) = (-1e6, 1e6);

fn base_range(proj: &Projection, b: &Aabb) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in 0..1usize << b.dim() {
        let c: Vec<f64> = (0..b.dim()).map(|i| if m >> i & 1 == 1 { b.hi[i] } else { b.lo[i] }).collect();
        let u = proj.apply(&c)[0];
        lo = lo.min(u);
        hi = hi.max(u);
    }
    (lo, hi)
}

/// Hit count on the fiber over `u`; `None` when the fiber meets the curve
/// in a continuum.
fn fiber_count<S: LineHits + ?Sized>(curve: &S, proj: &Projection, u: f64, cfg: &RootConfig) -> Result<Option<Vec<f64>>, SetError> {
    match curve.line_hits(&proj.lift(&[u], 0.0), &proj.direction(), FIBER_WINDOW, cfg) {
        Ok(h) => Ok(Some(h.into_iter().map(|h| h.t).collect())),
        Err(SetError::Roots(crate::expr::RootError::Continuum { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Sweeps the base of `proj` over the image of `sweep_box` and bisects
/// every change of the fiber hit count, then adds the images of the
/// curve's singular points and corners.
pub fn discriminant<S: LineHits + ?Sized>(
    curve: &S,
    proj: &Projection,
    sweep_box: &Aabb,
    cfg: &DiscriminantConfig,
) -> Result<Discriminant, CoverError> {
    if curve.ambient_dim() != 2 || proj.dim() != 2 {
        return Err(CoverError::Dimension(curve.ambient_dim()));
    }
    let (lo, hi) = base_range(proj, sweep_box);
    let n = cfg.samples.max(8);
    let us: Vec<f64> = (0..n).map(|k| lo + (k as f64 + 0.5) / n as f64 * (hi - lo)).collect();
    let counts: Vec<Option<usize>> =
        us.par_iter().map(|&u| fiber_count(curve, proj, u, &cfg.roots).map(|h| h.map(|h| h.len()))).collect::<Result<_, _>>()?;

    let images: Vec<f64> = curve.critical_points()?.iter().map(|p| proj.apply(p)[0]).filter(|u| *u >= lo && *u <= hi).collect();
    let scale = (hi - lo).max(1e-300);
    let mut values: Vec<CriticalValue> = images.iter().map(|&value| CriticalValue { value, kind: CriticalKind::SingularImage }).collect();

    for k in 0..n {
        if counts[k].is_none() {
            values.push(CriticalValue { value: us[k], kind: CriticalKind::Endpoint });
        }
    }
    for k in 0..n - 1 {
        let (Some(ca), Some(cb)) = (counts[k], counts[k + 1]) else { continue };
        if ca == cb {
            continue;
        }
        let (mut a, mut b) = (us[k], us[k + 1]);
        let mut exact = None;
        while b - a > 1e-10 * (1.0 + a.abs().max(b.abs())) {
            let m = 0.5 * (a + b);
            match fiber_count(curve, proj, m, &cfg.roots)? {
                None => {
                    exact = Some(m);
                    break;
                }
                Some(h) if h.len() == ca => a = m,
                Some(_) => b = m,
            }
        }
        let value = exact.unwrap_or(0.5 * (a + b));
        if images.iter().any(|u| (u - value).abs() <= 1e-6 * scale) {
            continue;
        }
        let kind = if exact.is_some() || ca.abs_diff(cb) % 2 == 1 { CriticalKind::Endpoint } else { CriticalKind::Tangency };
        let value = match kind {
            CriticalKind::Tangency => {
                let richer = if ca > cb { a } else { b };
                polish_tangency(curve, proj, richer, &cfg.roots).filter(|v| (v - value).abs() <= 1e-6 * scale).unwrap_or(value)
            }
            _ => value,
        };
        values.push(CriticalValue { value, kind });
    }

    values.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut out: Vec<CriticalValue> = Vec::with_capacity(values.len());
    for v in values {
        match out.last_mut() {
            Some(last) if (v.value - last.value).abs() <= 1e-9 * (1.0 + v.value.abs()) => {
                if v.kind == CriticalKind::SingularImage {
                    *last = v;
                }
            }
            _ => out.push(v),
        }
    }
    Ok(Discriminant { projection: proj.clone(), values: out })
}

/// Newton on `p = 0, ∇p · d = 0` from the closest pair of hits on the
/// fiber over `u`, for a base value accurate to rounding.
fn polish_tangency<S: LineHits + ?Sized>(curve: &S, proj: &Projection, u: f64, cfg: &RootConfig) -> Option<f64> {
    let dir = proj.direction();
    let hits = curve.line_hits(&proj.lift(&[u], 0.0), &dir, FIBER_WINDOW, cfg).ok()?;
    let pair = hits.windows(2).min_by(|x, y| (x[1].t - x[0].t).total_cmp(&(y[1].t - y[0].t)))?;
    let p = curve.feature_expr(pair[0].feature)?;
    let mut y = proj.lift(&[u], 0.5 * (pair[0].t + pair[1].t));
    let scale = 1.0 + linalg::norm(&y);
    for _ in 0..50 {
        let (v, g) = p.eval_grad(&y).ok()?;
        let h = 1e-6 * scale;
        let gp = p.eval_grad(&linalg::axpy(&y, h, &dir)).ok()?.1;
        let gm = p.eval_grad(&linalg::axpy(&y, -h, &dir)).ok()?.1;
        let hd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let step = linalg::solve(vec![g.clone(), hd], vec![-v, -linalg::dot(&g, &dir)])?;
        y = linalg::axpy(&y, 1.0, &step);
        if linalg::norm(&step) <= 1e-15 * scale {
            break;
        }
    }
    let (v, g) = p.eval_grad(&y).ok()?;
    let gn = linalg::norm(&g);
    (v.abs() <= 1e-12 * (1.0 + gn) && linalg::dot(&g, &dir).abs() <= 1e-8 * gn).then(|| proj.apply(&y)[0])
}

/// Why a piece is homeomorphic to an open ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessTag {
    Interval,
    GraphBand,
    /// Supplied by the caller.
    ExplicitMap,
}

/// Projection `j`, base component `i` and band `m` of a constructed piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub projection: usize,
    pub component: usize,
    pub band: usize,
}

#[derive(Debug, Clone)]
pub struct CoverPiece {
    pub set: DefinableSet,
    pub witness: WitnessTag,
    pub provenance: Option<Provenance>,
    pub label: String,
}

/// Per projection: the discriminant and the base components it leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionData {
    pub projection: Projection,
    pub discriminant: Discriminant,
    pub components: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Cover {
    pub ambient: DefinableSet,
    pub pieces: Vec<CoverPiece>,
    pub projections: Vec<ProjectionData>,
    /// Discriminant fibers of `U` with sampled points in no piece.
    pub uncovered: Vec<UncoveredFiber>,
}

/// Points of `U` on the fiber `π_j = value` that no piece contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncoveredFiber {
    pub projection: usize,
    pub value: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSummary {
    pub label: String,
    pub witness: WitnessTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSummary {
    pub pieces: Vec<PieceSummary>,
    pub projections: Vec<ProjectionData>,
}

impl Cover {
    /// A cover from caller-supplied pieces.
    pub fn explicit(ambient: DefinableSet, pieces: Vec<(String, DefinableSet)>) -> Result<Cover, CoverError> {
        if pieces.is_empty() {
            return Err(CoverError::NoPieces);
        }
        let pieces =
            pieces.into_iter().map(|(label, set)| CoverPiece { set, witness: WitnessTag::ExplicitMap, provenance: None, label }).collect();
        Ok(Cover { ambient, pieces, projections: Vec::new(), uncovered: Vec::new() })
    }

    pub fn summary(&self) -> CoverSummary {
        CoverSummary {
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceSummary { label: p.label.clone(), witness: p.witness, provenance: p.provenance, bbox: p.set.bbox().cloned() })
                .collect(),
            projections: self.projections.clone(),
        }
    }
}

/// A cover of a finite union of open intervals by its components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCover {
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalCover {
    /// `d(x, ℝ∖U) / max_i d(x, ℝ∖U_i)` maximized over `grid` points per
    /// interval; distances are exact for intervals.
    pub fn constant(&self, grid: usize) -> f64 {
        let mut worst: f64 = 1.0;
        let d_out = |x: f64, (a, b): (f64, f64)| if a < x && x < b { (x - a).min(b - x) } else { 0.0 };
        for &(a, b) in &self.intervals {
            for k in 0..grid {
                let x = a + (k as f64 + 0.5) / grid as f64 * (b - a);
                // U is the disjoint union, so its complement distance is the component's
                let num = self.intervals.iter().map(|&iv| d_out(x, iv)).fold(0.0, f64::max);
                let den = self.intervals.iter().map(|&iv| d_out(x, iv)).fold(0.0, f64::max);
                worst = worst.max(num / den);
            }
        }
        worst
    }
}

/// One piece per component.
pub fn build_cover_1d(intervals: &[(f64, f64)]) -> Result<IntervalCover, CoverError> {
    if intervals.is_empty() {
        return Err(CoverError::EmptyInput);
    }
    let mut iv = intervals.to_vec();
    for &(a, b) in &iv {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(CoverError::BadInterval(a, b));
        }
    }
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    if let Some(w) = iv.windows(2).find(|w| w[1].0 < w[0].1) {
        return Err(CoverError::Overlap(w[1].0));
    }
    Ok(IntervalCover { intervals: iv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverConfig {
    pub discriminant: DiscriminantConfig,
    /// Interior base points where the fiber count must match.
    pub count_checks: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig { discriminant: DiscriminantConfig::default(), count_checks: 9 }
    }
}

/// For each projection, bands of `U` over the components of the base
/// minus the discriminant of `∂U`.
pub fn build_cover_2d(u: &DefinableSet, projections: &[Projection], cfg: &CoverConfig) -> Result<Cover, CoverError> {
    if u.dim() != 2 {
        return Err(CoverError::Dimension(u.dim()));
    }
    if projections.is_empty() {
        return Err(CoverError::NoProjections);
    }
    if !matches!(u.kind(), SetKind::SignCondition(_) | SetKind::Union(_)) {
        return Err(CoverError::NonCurveBoundary("the boundary is traced through sign conditions".into()));
    }
    let bbox = u.bbox().ok_or(CoverError::Unbounded)?.clone();
    let sweep = bbox.padded(0.02 * bbox.diameter());
    let frontier = Arc::new(u.clone());
    let mut pieces = Vec::new();
    let mut data = Vec::new();

    for (j, proj) in projections.iter().enumerate() {
        if proj.dim() != 2 {
            return Err(CoverError::Dimension(proj.dim()));
        }
        let disc = discriminant(&Frontier(u), proj, &sweep, &cfg.discriminant)?;
        let (lo, hi) = base_range(proj, &sweep);
        let mut cuts = vec![lo];
        cuts.extend(disc.points().into_iter().filter(|v| *v > lo && *v < hi));
        cuts.push(hi);
        let roots = RootConfig::with_density(crate::sets::FIBER_DENSITY);
        let mut components = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-9 * (1.0 + a.abs()) {
                continue;
            }
            let mid = 0.5 * (a + b);
            let hits = fiber_count(&Frontier(u), proj, mid, &roots)?.ok_or_else(|| CoverError::DiscriminantFailure {
                projection: j,
                a,
                b,
                detail: "fiber over the midpoint lies in the boundary".into(),
            })?;
            for k in 0..cfg.count_checks {
                let s = a + (k as f64 + 1.0) / (cfg.count_checks as f64 + 1.0) * (b - a);
                let n = fiber_count(&Frontier(u), proj, s, &roots)?.map(|h| h.len());
                if n != Some(hits.len()) {
                    return Err(CoverError::DiscriminantFailure {
                        projection: j,
                        a,
                        b,
                        detail: format!("{} hits at {mid}, {n:?} at {s}", hits.len()),
                    });
                }
            }
            let mut bands = Vec::new();
            for m in 0..hits.len().saturating_sub(1) {
                let probe = proj.lift(&[mid], 0.5 * (hits[m] + hits[m + 1]));
                if u.contains_lenient(&probe) {
                    bands.push(m);
                }
            }
            if bands.is_empty() {
                continue;
            }
            let i = components.len();
            components.push((a, b));
            for (band_index, &m) in bands.iter().enumerate() {
                let set = DefinableSet::band(
                    proj.clone(),
                    Aabb::new(vec![a], vec![b])?,
                    Graph::FiberRoot { frontier: frontier.clone(), rank: m },
                    Graph::FiberRoot { frontier: frontier.clone(), rank: m + 1 },
                )?;
                pieces.push(CoverPiece {
                    set,
                    witness: WitnessTag::GraphBand,
                    provenance: Some(Provenance { projection: j, component: i, band: band_index }),
                    label: format!("U[{j},{i},{band_index}]"),
                });
            }
        }
        data.push(ProjectionData { projection: proj.clone(), discriminant: disc, components });
    }
    let uncovered = uncovered_fibers(u, &pieces, &data)?;
    Ok(Cover { ambient: u.clone(), pieces, projections: data, uncovered })
}

/// Samples `U` on every discriminant fiber and keeps the points outside
/// all pieces.
fn uncovered_fibers(u: &DefinableSet, pieces: &[CoverPiece], data: &[ProjectionData]) -> Result<Vec<UncoveredFiber>, CoverError> {
    const PER_INTERVAL: usize = 33;
    let roots = RootConfig::with_density(crate::sets::FIBER_DENSITY);
    let diam = u.bbox().map_or(1.0, |b| b.diameter());
    let mut out = Vec::new();
    for (j, d) in data.iter().enumerate() {
        let proj = &d.projection;
        for v in d.discriminant.points() {
            let Some(hits) = fiber_count(&Frontier(u), proj, v, &roots)? else { continue };
            let mut points = Vec::new();
            // slivers left by a tangency value located just inside the set
            for w in hits.windows(2).filter(|w| w[1] - w[0] > 1e-6 * diam) {
                for k in 0..PER_INTERVAL {
                    let h = w[0] + (k as f64 + 1.0) / (PER_INTERVAL as f64 + 1.0) * (w[1] - w[0]);
                    let p = proj.lift(&[v], h);
                    if u.contains_lenient(&p) && !pieces.iter().any(|q| q.set.contains_lenient(&p)) {
                        points.push(p);
                    }
                }
            }
            if !points.is_empty() {
                out.push(UncoveredFiber { projection: j, value: v, points });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioWitness {
    pub point: Vec<f64>,
    pub ratio: f64,
    pub d_ambient: f64,
    pub d_best_piece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub grid: usize,
    /// Lattice points inside `U`.
    pub points: usize,
    pub coverage: f64,
    /// Sampled constant, floored at 1 (each piece lies in `U`).
    pub c_hat: f64,
    /// Smallest sampled ratio; below 1 only by sampling error.
    pub min_ratio: f64,
    pub witness: Option<RatioWitness>,
    /// Up to 100 lattice points of `U` in no piece.
    pub uncovered: Vec<Vec<f64>>,
    pub c_budget: f64,
    pub pass: bool,
}

/// Boundary indices of `U` and of every piece, for ratio queries.
pub struct CoverMetric<'a> {
    cover: &'a Cover,
    ambient: BoundaryIndex<'a>,
    pieces: Vec<BoundaryIndex<'a>>,
}

impl<'a> CoverMetric<'a> {
    pub fn new(cover: &'a Cover, density: usize) -> Result<Self, CoverError> {
        if cover.pieces.is_empty() {
            return Err(CoverError::NoPieces);
        }
        let ambient = BoundaryIndex::new(&cover.ambient, density)?;
        let pieces = cover.pieces.par_iter().map(|p| BoundaryIndex::new(&p.set, density)).collect::<Result<_, _>>()?;
        Ok(CoverMetric { cover, ambient, pieces })
    }

    /// `(ratio, d(x, ℝⁿ∖U), max_i d(x, ℝⁿ∖U_i))`, or `None` when no piece
    /// contains `x`.
    pub fn ratio(&self, x: &[f64]) -> Option<(f64, f64, f64)> {
        let mut best: Option<f64> = None;
        for (p, idx) in self.cover.pieces.iter().zip(&self.pieces) {
            if p.set.contains_lenient(x) {
                let d = idx.distance(x).1;
                best = Some(best.map_or(d, |b: f64| b.max(d)));
            }
        }
        best.map(|den| {
            let num = self.ambient.distance(x).1;
            (num / den, num, den)
        })
    }
}

/// Lattice `lo + (k+1) w / (grid+1)`, `k < grid`, on each axis.
pub fn lattice(b: &Aabb, grid: usize) -> Vec<Vec<f64>> {
    let axis =
        |i: usize| -> Vec<f64> { (0..grid).map(|k| b.lo[i] + (k as f64 + 1.0) / (grid as f64 + 1.0) * (b.hi[i] - b.lo[i])).collect() };
    let xs = axis(0);
    let ys = axis(1);
    xs.iter().flat_map(|x| ys.iter().map(move |y| vec![*x, *y])).collect()
}

/// Coverage and `Ĉ = sup d(x, ℝⁿ∖U) / max_i d(x, ℝⁿ∖U_i)` over the lattice
/// points of `U`.
pub fn verify_regular_cover(cover: &Cover, grid: usize, c_budget: f64, density: usize) -> Result<CoverReport, CoverError> {
    let metric = CoverMetric::new(cover, density)?;
    let bbox = cover.ambient.bbox().ok_or(CoverError::Unbounded)?;
    let points: Vec<Vec<f64>> = lattice(bbox, grid).into_iter().filter(|p| cover.ambient.contains_lenient(p)).collect();
    let rows: Vec<Option<(f64, f64, f64)>> = points.par_iter().map(|x| metric.ratio(x)).collect();

    let mut covered = 0;
    let mut sup = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut witness = None;
    let mut uncovered = Vec::new();
    for (x, r) in points.iter().zip(&rows) {
        match r {
            Some((ratio, num, den)) => {
                covered += 1;
                min_ratio = min_ratio.min(*ratio);
                if *ratio > sup {
                    sup = *ratio;
                    witness = Some(RatioWitness { point: x.clone(), ratio: *ratio, d_ambient: *num, d_best_piece: *den });
                }
            }
            None if uncovered.len() < 100 => uncovered.push(x.clone()),
            None => {}
        }
    }
    let coverage = if points.is_empty() { 1.0 } else { covered as f64 / points.len() as f64 };
    let c_hat = sup.max(1.0);
    Ok(CoverReport {
        grid,
        points: points.len(),
        coverage,
        c_hat,
        min_ratio: if min_ratio.is_finite() { min_ratio } else { 1.0 },
        witness,
        uncovered,
        c_budget,
        pass: covered == points.len() && c_hat <= c_budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandInequalityReport {
    pub point: Vec<f64>,
    pub piece: usize,
    pub epsilon: f64,
    pub c_j: f64,
    pub links: Vec<Link>,
    pub all_hold: bool,
}

/// `max(1 + (1 + ‖λ‖)/ε, 1)`: the cone-complement bound, with the base
/// cover constant 1 of interval components.
pub fn band_constant(proj: &Projection, epsilon: f64) -> f64 {
    crate::cones::cone_complement_bound(proj, epsilon).max(1.0)
}

fn link(name: &str, lhs: f64, rhs: f64) -> Link {
    Link { name: name.into(), lhs, rhs, slack: rhs - lhs, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-12 }
}

fn dist_to_segment(q: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = linalg::sub(b, a);
    let len2 = linalg::dot(&ab, &ab);
    let s = if len2 > 0.0 { (linalg::dot(&linalg::sub(q, a), &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    linalg::dist(q, &linalg::axpy(a, s, &ab))
}

/// Samples each distance in the chain
/// `d(x,X) ≤ d(x, X∖C_ε(x)) ≤ C_j d(π(x), Δ) ≤ C_j² d(π(x), ∁U_ji) ≤ C_j² L d(x, V)`
/// for `X = ∂U`, the vertical part `V` of the band boundary and the
/// Lipschitz constant `L = √(1+‖λ‖²)` of `π`, and also
/// `d(x, X) ≤ C_j² d(x, ℝⁿ∖U_jim)`.
pub fn check_band_inequalities(
    cover: &Cover,
    piece: usize,
    x: &[f64],
    epsilon: f64,
    density: usize,
) -> Result<BandInequalityReport, CoverError> {
    let p = cover.pieces.get(piece).ok_or(CoverError::NoPieces)?;
    let prov = p.provenance.ok_or(CoverError::NoProvenance(piece))?;
    if !p.set.contains(x)? {
        return Err(CoverError::PointNotInPiece(piece));
    }
    let data = &cover.projections[prov.projection];
    let proj = &data.projection;
    let u = &cover.ambient;
    let rcfg = RegularityConfig { axis: Some(proj.axis()), ..Default::default() };
    let verdict = check_weak_regular(&Frontier(u), x, &proj.lambda, epsilon, &rcfg)?;
    if let RegularityVerdict::Fail { reason, .. } = verdict {
        return Err(CoverError::NotRegularHere(reason.to_string()));
    }

    let c = band_constant(proj, epsilon);
    let boundary = BoundaryIndex::new(u, density)?;
    let d_x_boundary = boundary.distance(x).1;
    let cone = Cone::new(x.to_vec(), proj.lambda.clone(), epsilon)?.with_axis(proj.axis())?;
    let cloud = boundary_sample(u, density)?;
    let d_outside_cone = cloud.points.iter().filter(|q| !cone_contains(&cone, q)).map(|q| linalg::dist(x, q)).fold(f64::INFINITY, f64::min);
    let base = proj.apply(x)[0];
    let d_disc = data.discriminant.distance(base);
    let (a, b) = data.components[prov.component];
    let d_component = (base - a).min(b - base);

    let SetKind::Band(band) = p.set.kind() else { return Err(CoverError::NoProvenance(piece)) };
    let nudge = 1e-9 * (b - a);
    let mut d_vertical = f64::INFINITY;
    for (end, inside) in [(a, a + nudge), (b, b - nudge)] {
        if let Some((lo, hi)) = band.bounds_at(&[inside])? {
            let s0 = proj.lift(&[end], lo);
            let s1 = proj.lift(&[end], hi);
            d_vertical = d_vertical.min(dist_to_segment(x, &s0, &s1));
        }
    }
    let d_piece = BoundaryIndex::new(&p.set, density)?.distance(x).1;
    let lip = proj.norm();

    let links = vec![
        link("boundary-within-outside-cone", d_x_boundary, d_outside_cone),
        link("outside-cone-vs-discriminant", d_outside_cone, c * d_disc),
        link("discriminant-vs-component", c * d_disc, c * c * d_component),
        link("component-vs-vertical-part", c * c * d_component, c * c * lip * d_vertical),
        link("boundary-vs-piece", d_x_boundary, c * c * d_piece),
    ];
    let all_hold = links.iter().all(|l| l.holds);
    Ok(BandInequalityReport { point: x.to_vec(), piece, epsilon, c_j: c, links, all_hold })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lo: [f64; 2], hi: [f64; 2]) -> Aabb {
        Aabb::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn curve(src: &str, b: Aabb) -> DefinableSet {
        DefinableSet::from_atoms(2, &[src], Some(b)).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn circle_discriminant() {
        let c = curve("x^2 + y^2 = 1", bx([-1.0, -1.0], [1.0, 1.0]));
        let d = discriminant(&c, &Projection::vertical(), &bx([-2.0, -2.0], [2.0, 2.0]), &Default::default()).unwrap();
        assert!(close(&d.points(), &[-1.0, 1.0], 1e-8), "{:?}", d.values);
        assert!(d.values.iter().all(|v| v.kind == CriticalKind::Tangency));
    }

    #[test]
    fn annulus_discriminant() {
        let ann = DefinableSet::from_atoms(2, &["x^2 + y^2 > 0.25", "x^2 + y^2 < 1"], Some(bx([-1.0, -1.0], [1.0, 1.0]))).unwrap();
        let d = discriminant(&Frontier(&ann), &Projection::vertical(), &bx([-2.0, -2.0], [2.0, 2.0]), &Default::default()).unwrap();
        assert!(close(&d.points(), &[-1.0, -0.5, 0.5, 1.0], 1e-8), "{:?}", d.values);
        let d = discriminant(&Frontier(&ann), &Projection::planar(1.0), &bx([-2.0, -2.0], [2.0, 2.0]), &Default::default()).unwrap();
        let r = 2f64.sqrt();
        assert!(close(&d.points(), &[-r, -r / 2.0, r / 2.0, r], 1e-8), "{:?}", d.values);
    }

    #[test]
    fn crossing_lines_discriminant() {
        let c = curve("x*y = 0", bx([-1.0, -1.0], [1.0, 1.0]));
        let d = discriminant(&c, &Projection::vertical(), &bx([-1.0, -1.0], [1.0, 1.0]), &Default::default()).unwrap();
        assert_eq!(d.values.len(), 1, "{:?}", d.values);
        assert!(d.values[0].value.abs() < 1e-9 && d.values[0].kind == CriticalKind::SingularImage);
    }

    #[test]
    fn interval_covers() {
        let c = build_cover_1d(&[(-1.0, 1.0)]).unwrap();
        assert_eq!(c.constant(100), 1.0);
        let c = build_cover_1d(&[(0.5, 1.0), (-1.0, -0.5), (-0.5, 0.5)]).unwrap();
        assert_eq!(c.intervals.len(), 3);
        assert_eq!(c.constant(100), 1.0);
        assert_eq!(build_cover_1d(&[]), Err(CoverError::EmptyInput));
        assert!(matches!(build_cover_1d(&[(0.0, 1.0), (0.5, 2.0)]), Err(CoverError::Overlap(_))));
    }

    fn square() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1"], Some(bx([0.0, -1.0], [1.0, 1.0]))).unwrap()
    }

    fn with_square(extra: &str) -> DefinableSet {
        DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1", extra], Some(bx([0.0, -1.0], [1.0, 1.0]))).unwrap()
    }

    #[test]
    fn half_overlapping_pieces() {
        let cover = Cover::explicit(square(), vec![("U1".into(), with_square("y > -0.5")), ("U2".into(), with_square("y < 0.5"))]).unwrap();
        let r = verify_regular_cover(&cover, 20, 2.0, 400).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert!((r.c_hat - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn parabola_pieces_are_not_regular() {
        let cover = Cover::explicit(square(), vec![("U1".into(), with_square("y < x^2")), ("U2".into(), with_square("y > -x^2"))]).unwrap();
        let r = verify_regular_cover(&cover, 99, 50.0, 400).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert!(r.c_hat >= 100.0, "{r:?}");
        assert!(!r.pass);
    }

    #[test]
    fn single_piece() {
        let cover = Cover::explicit(square(), vec![("U".into(), square())]).unwrap();
        let r = verify_regular_cover(&cover, 15, 1.0, 200).unwrap();
        assert_eq!(r.c_hat, 1.0);
        assert_eq!(r.min_ratio, 1.0);
    }

    fn disk() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x^2 + y^2 < 1"], Some(bx([-1.0, -1.0], [1.0, 1.0]))).unwrap()
    }

    #[test]
    fn disk_single_band() {
        let cover = build_cover_2d(&disk(), &[Projection::vertical()], &Default::default()).unwrap();
        assert_eq!(cover.pieces.len(), 1);
        assert!(close(&cover.projections[0].discriminant.points(), &[-1.0, 1.0], 1e-8));
        let r = verify_regular_cover(&cover, 30, 1.5, 400).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert!((r.c_hat - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn disk_band_inequalities() {
        let cover = build_cover_2d(&disk(), &[Projection::vertical()], &Default::default()).unwrap();
        for x in [[0.0, 0.0], [0.9, 0.0]] {
            let r = check_band_inequalities(&cover, 0, &x, 0.3, 800).unwrap();
            assert!(r.all_hold, "{r:?}");
            assert!((r.c_j - (1.0 + 1.0 / 0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn preconditions() {
        let cover = build_cover_2d(&disk(), &[Projection::vertical()], &Default::default()).unwrap();
        let r = check_band_inequalities(&cover, 0, &[2.0, 0.0], 0.3, 400);
        assert_eq!(r.unwrap_err(), CoverError::PointNotInPiece(0));
        let explicit = Cover::explicit(square(), vec![("U".into(), square())]).unwrap();
        let r = check_band_inequalities(&explicit, 0, &[0.5, 0.0], 0.3, 400);
        assert_eq!(r.unwrap_err(), CoverError::NoProvenance(0));
    }
}
