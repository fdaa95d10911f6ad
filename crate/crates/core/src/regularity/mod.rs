//! Branch extraction over cones and weak/strong regularity verdicts.
//!
//! A projection `π_v` is weak regular at `x` with respect to `X` when its
//! fibers on `X` are finite and `X ∩ C_ε(x, v)` is a finite disjoint union
//! of graphs `t = f_i(v')` over the ball `B(v, ε)` with every `f_i`
//! nonvanishing; it is regular with constant `C` when moreover
//! `‖∇f_i‖ ≤ C |f_i|`. Both are checked on a grid over the (closed) ball.
//!
//! Fiber finiteness is probe-checked on finitely many random fibers, so a
//! positive verdict is a semi-decision.

mod atlas;
mod rectify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{line_set_hits, Cone, ConeError, Projection, DEFAULT_T_WINDOW};
use crate::expr::{RootConfig, RootError};
use crate::linalg;
use crate::sets::{Hit, LineHits, SetError};

pub use atlas::{search_atlas, AtlasError, AtlasFailure, ProjectionAtlas};
pub use rectify::{rectifiability_search, RectifiabilityReport, RectifyConfig, RectifyError, RectifyPiece};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailReason {
    BranchCountVaries,
    BranchVanishes,
    NonFiniteFiber,
    TangencyDetected,
    ScanFailure,
    ConstantExceeded,
}

impl std::fmt::Display for FailReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailReason::BranchCountVaries => "branch-count-varies",
            FailReason::BranchVanishes => "branch-vanishes",
            FailReason::NonFiniteFiber => "non-finite-fiber",
            FailReason::TangencyDetected => "tangency-detected",
            FailReason::ScanFailure => "scan-failure",
            FailReason::ConstantExceeded => "constant-exceeded",
        })
    }
}

/// Where a check failed: direction `v'`, optional branch and value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub v_prime: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub detail: String,
}

/// One branch `f_i` sampled over the direction grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSheet {
    pub index: usize,
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    pub sign: i8,
    /// Largest gap between the finite-difference gradient and the implicit
    /// function gradient, when the branch lies on a single equality.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implicit_gradient_error: Option<f64>,
}

impl BranchSheet {
    /// `max ‖∇f‖ / |f|` over the nodes, with the node index.
    pub fn log_derivative_max(&self) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (k, (v, g)) in self.values.iter().zip(&self.gradients).enumerate() {
            let r = linalg::norm(g) / v.abs();
            if r > best.0 || !r.is_finite() {
                best = (r, k);
                if !r.is_finite() {
                    break;
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum RegularityVerdict {
    EmptyIntersection,
    WeakRegular { branches: usize, sheets: Vec<BranchSheet> },
    Regular { branches: usize, c_min: f64, witness: Option<Witness>, sheets: Vec<BranchSheet> },
    Fail { reason: FailReason, witness: Option<Witness> },
}

impl RegularityVerdict {
    pub fn is_success(&self) -> bool {
        !matches!(self, RegularityVerdict::Fail { .. })
    }

    pub fn branch_count(&self) -> Option<usize> {
        match self {
            RegularityVerdict::EmptyIntersection => Some(0),
            RegularityVerdict::WeakRegular { branches, .. } | RegularityVerdict::Regular { branches, .. } => Some(*branches),
            RegularityVerdict::Fail { .. } => None,
        }
    }

    pub fn fail_reason(&self) -> Option<FailReason> {
        match self {
            RegularityVerdict::Fail { reason, .. } => Some(*reason),
            _ => None,
        }
    }

    fn fail(reason: FailReason, v_prime: &[f64], detail: impl Into<String>) -> Self {
        RegularityVerdict::Fail {
            reason,
            witness: Some(Witness { v_prime: v_prime.to_vec(), branch: None, value: None, detail: detail.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityConfig {
    /// Grid nodes per axis of the direction ball (≥ 3).
    pub resolution: usize,
    pub window: (f64, f64),
    pub roots: RootConfig,
    /// Random fibers for the finiteness probe.
    pub probes: usize,
    pub seed: u64,
    /// Fiber coordinate of the frame (default: last).
    pub axis: Option<usize>,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig {
            resolution: 41,
            window: DEFAULT_T_WINDOW,
            roots: RootConfig::with_density(256),
            probes: 100,
            seed: 0,
            axis: None,
        }
    }
}

impl RegularityConfig {
    pub fn with_resolution(resolution: usize) -> Self {
        RegularityConfig { resolution, ..Default::default() }
    }

    fn cone(&self, x: &[f64], v: &[f64], eps: f64) -> Result<Cone, ConeError> {
        let c = Cone::new(x.to_vec(), v.to_vec(), eps)?;
        match self.axis {
            Some(a) => c.with_axis(a),
            None => Ok(c),
        }
    }

    fn projection(&self, v: &[f64]) -> Projection {
        match self.axis {
            Some(a) => Projection { lambda: v.to_vec(), axis: Some(a) },
            None => Projection::new(v.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegularityError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("resolution must be at least 3, got {0}")]
    Resolution(usize),
}

/// Tensor grid over the closed ball `B̄(v, ε)`, nodes outside the ball
/// dropped.
struct BallGrid {
    d: usize,
    res: usize,
    pitch: f64,
    nodes: Vec<Vec<f64>>,
    /// Tensor index → node index.
    slot: Vec<Option<usize>>,
    /// Node index → tensor multi-index.
    multi: Vec<Vec<usize>>,
}

impl BallGrid {
    fn new(center: &[f64], eps: f64, res: usize) -> Self {
        let d = center.len();
        let pitch = 2.0 * eps / (res - 1) as f64;
        let total = res.pow(d as u32);
        let mut nodes = Vec::new();
        let mut slot = vec![None; total];
        let mut multi = Vec::new();
        for (flat, s) in slot.iter_mut().enumerate() {
            let mut k = flat;
            let idx: Vec<usize> = (0..d)
                .map(|_| {
                    let i = k % res;
                    k /= res;
                    i
                })
                .collect();
            let p: Vec<f64> =
                idx.iter().zip(center).map(|(&i, c)| if i == res - 1 { c + eps } else { c - eps + i as f64 * pitch }).collect();
            if d == 1 || linalg::dist(&p, center) <= eps * (1.0 + 1e-12) {
                *s = Some(nodes.len());
                nodes.push(p);
                multi.push(idx);
            }
        }
        BallGrid { d, res, pitch, nodes, slot, multi }
    }

    fn neighbor(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let mut idx = self.multi[node].clone();
        let j = idx[axis] as isize + step;
        if j < 0 || j >= self.res as isize {
            return None;
        }
        idx[axis] = j as usize;
        let flat = idx.iter().rev().fold(0, |acc, &i| acc * self.res + i);
        self.slot[flat]
    }
}

fn hits_at<S: LineHits + ?Sized>(set: &S, cone: &Cone, vp: &[f64], cfg: &RegularityConfig) -> Result<Vec<Hit>, SetError> {
    line_set_hits(set, cone, vp, cfg.window, &cfg.roots)
}

fn scan_fail(err: &SetError, vp: &[f64]) -> RegularityVerdict {
    match err {
        SetError::Roots(RootError::Continuum { t }) => {
            RegularityVerdict::fail(FailReason::NonFiniteFiber, vp, format!("the cone line lies in the set near t = {t}"))
        }
        e => RegularityVerdict::fail(FailReason::ScanFailure, vp, e.to_string()),
    }
}

/// Fibers of `π_v` restricted to the set are finite on
/// `probes` random fibers through the set's bounding box.
pub fn finiteness_probe<S: LineHits + ?Sized>(set: &S, v: &[f64], cfg: &RegularityConfig) -> Result<(), RegularityVerdict> {
    if set.isolated_points().is_some() {
        return Ok(());
    }
    let proj = cfg.projection(v);
    let Some(bbox) = set.bounds() else { return Ok(()) };
    let corners: Vec<Vec<f64>> = (0..1usize << bbox.dim())
        .map(|m| (0..bbox.dim()).map(|i| if m >> i & 1 == 1 { bbox.hi[i] } else { bbox.lo[i] }).collect())
        .collect();
    let images: Vec<Vec<f64>> = corners.iter().map(|c| proj.apply(c)).collect();
    let d = proj.dim() - 1;
    let lo: Vec<f64> = (0..d).map(|j| images.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| images.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bases: Vec<Vec<f64>> = (0..cfg.probes).map(|_| (0..d).map(|j| rng.gen_range(lo[j]..=hi[j])).collect()).collect();
    let dir = proj.direction();
    let results: Vec<Result<Vec<Hit>, SetError>> =
        bases.par_iter().map(|b| set.line_hits(&proj.lift(b, 0.0), &dir, cfg.window, &cfg.roots)).collect();
    for (b, r) in bases.iter().zip(results) {
        match r {
            Ok(_) => {}
            Err(SetError::Roots(RootError::Continuum { t })) => {
                return Err(RegularityVerdict::Fail {
                    reason: FailReason::NonFiniteFiber,
                    witness: Some(Witness {
                        v_prime: v.to_vec(),
                        branch: None,
                        value: Some(t),
                        detail: format!("fiber over {b:?} meets the set in a continuum"),
                    }),
                })
            }
            Err(e) => return Err(RegularityVerdict::fail(FailReason::ScanFailure, v, e.to_string())),
        }
    }
    Ok(())
}

/// Sheets `f_1 < … < f_k` of `X ∩ C_ε(x, v)` over the direction grid, or
/// the reason they do not exist.
pub fn extract_branches<S: LineHits + ?Sized>(set: &S, cone: &Cone, cfg: &RegularityConfig) -> RegularityVerdict {
    let res = cfg.resolution.max(3);
    let grid = BallGrid::new(&cone.center, cone.aperture, res);

    if let Some(points) = set.isolated_points() {
        for p in &points {
            if crate::cones::cone_contains(cone, p) {
                let (_, vp) = cone.coordinates(p).unwrap();
                return RegularityVerdict::fail(FailReason::BranchCountVaries, &vp, "an isolated point of the set lies in the cone");
            }
        }
        return RegularityVerdict::EmptyIntersection;
    }

    let hits: Vec<Result<Vec<Hit>, SetError>> = grid.nodes.par_iter().map(|vp| hits_at(set, cone, vp, cfg)).collect();
    let mut table: Vec<Vec<Hit>> = Vec::with_capacity(hits.len());
    for (vp, h) in grid.nodes.iter().zip(hits) {
        match h {
            Ok(h) => table.push(h),
            Err(e) => return scan_fail(&e, vp),
        }
    }

    // count changes between neighbouring nodes
    for n in 0..grid.nodes.len() {
        for a in 0..grid.d {
            if let Some(m) = grid.neighbor(n, a, 1) {
                if table[n].len() != table[m].len() {
                    return classify_transition(set, cone, cfg, &grid.nodes[n], &grid.nodes[m], &table[n], &table[m]);
                }
            }
        }
    }
    let k = table[0].len();
    if table.iter().any(|t| t.len() != k) {
        let n = table.iter().position(|t| t.len() != k).unwrap();
        return RegularityVerdict::fail(FailReason::BranchCountVaries, &grid.nodes[n], "hit count differs on the grid");
    }
    if k == 0 {
        return RegularityVerdict::EmptyIntersection;
    }
    for (n, t) in table.iter().enumerate() {
        if let Some(h) = t.iter().find(|h| h.touching) {
            return RegularityVerdict::Fail {
                reason: FailReason::TangencyDetected,
                witness: Some(Witness {
                    v_prime: grid.nodes[n].clone(),
                    branch: None,
                    value: Some(h.t),
                    detail: "the cone line is tangent to the set".into(),
                }),
            };
        }
    }

    // rank matching: sheet i is the i-th smallest hit at every node
    let mut sheets = Vec::with_capacity(k);
    for i in 0..k {
        let values: Vec<f64> = table.iter().map(|t| t[i].t).collect();
        let s0 = values[0].signum();
        if let Some(n) = values.iter().position(|v| v.signum() != s0) {
            return RegularityVerdict::Fail {
                reason: FailReason::BranchVanishes,
                witness: Some(Witness {
                    v_prime: grid.nodes[n].clone(),
                    branch: Some(i),
                    value: Some(values[n]),
                    detail: "branch changes sign across the ball".into(),
                }),
            };
        }
        if let Some(w) = continuity_violation(&grid, &values) {
            return RegularityVerdict::Fail {
                reason: FailReason::BranchCountVaries,
                witness: Some(Witness {
                    v_prime: grid.nodes[w].clone(),
                    branch: Some(i),
                    value: Some(values[w]),
                    detail: "rank-matched branch jumps between neighbouring nodes".into(),
                }),
            };
        }
        let gradients = match sheet_gradients(set, cone, cfg, &grid, &values, i, k) {
            Ok(g) => g,
            Err(v) => return v,
        };
        let implicit_gradient_error = implicit_check(set, cone, &grid, &table, i, &gradients);
        sheets.push(BranchSheet { index: i, nodes: grid.nodes.clone(), values, gradients, sign: s0 as i8, implicit_gradient_error });
    }
    RegularityVerdict::WeakRegular { branches: k, sheets }
}

/// Second differences must stay within 5× the neighbouring first
/// differences along every grid line.
fn continuity_violation(grid: &BallGrid, values: &[f64]) -> Option<usize> {
    for n in 0..grid.nodes.len() {
        for a in 0..grid.d {
            let (Some(m), Some(p)) = (grid.neighbor(n, a, -1), grid.neighbor(n, a, 1)) else { continue };
            let d_prev = values[n] - values[m];
            let d_next = values[p] - values[n];
            let second = (d_next - d_prev).abs();
            let allowed = 5.0 * d_prev.abs().max(d_next.abs()) + 1e-9 * (1.0 + values[n].abs());
            if second > allowed {
                return Some(n);
            }
        }
    }
    None
}

fn sheet_gradients<S: LineHits + ?Sized>(
    set: &S,
    cone: &Cone,
    cfg: &RegularityConfig,
    grid: &BallGrid,
    values: &[f64],
    rank: usize,
    k: usize,
) -> Result<Vec<Vec<f64>>, RegularityVerdict> {
    let h = grid.pitch;
    let value_off_grid = |vp: &[f64]| -> Result<Option<f64>, RegularityVerdict> {
        let hits = hits_at(set, cone, vp, cfg).map_err(|e| scan_fail(&e, vp))?;
        Ok((hits.len() == k).then(|| hits[rank].t))
    };
    let mut out = Vec::with_capacity(grid.nodes.len());
    for n in 0..grid.nodes.len() {
        let mut g = vec![0.0; grid.d];
        for a in 0..grid.d {
            let f0 = values[n];
            let at = |s: isize| grid.neighbor(n, a, s).map(|m| values[m]);
            g[a] = match (at(-1), at(1)) {
                (Some(fm), Some(fp)) => (fp - fm) / (2.0 * h),
                (None, Some(fp)) => match at(2) {
                    Some(fpp) => (-3.0 * f0 + 4.0 * fp - fpp) / (2.0 * h),
                    None => (fp - f0) / h,
                },
                (Some(fm), None) => match at(-2) {
                    Some(fmm) => (3.0 * f0 - 4.0 * fm + fmm) / (2.0 * h),
                    None => (f0 - fm) / h,
                },
                (None, None) => {
                    // edge of a 2-D ball: step inward off the grid
                    let s = if grid.nodes[n][a] > cone.center[a] { -1.0 } else { 1.0 };
                    let mut p1 = grid.nodes[n].clone();
                    p1[a] += s * h;
                    let mut p2 = grid.nodes[n].clone();
                    p2[a] += 2.0 * s * h;
                    match (value_off_grid(&p1)?, value_off_grid(&p2)?) {
                        (Some(f1), Some(f2)) => s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
                        (Some(f1), None) => s * (f1 - f0) / h,
                        _ => 0.0,
                    }
                }
            };
        }
        out.push(g);
    }
    Ok(out)
}

/// For a hit on a single-equality feature `p = 0`, `f(v')` solves
/// `p(x + f(v')(v', 1)) = 0`, so `∂f/∂v'_j = −f ∂p/∂y_j / (∇p · (v', 1))`
/// over the base coordinates `y_j`.
fn implicit_check<S: LineHits + ?Sized>(
    set: &S,
    cone: &Cone,
    grid: &BallGrid,
    table: &[Vec<Hit>],
    rank: usize,
    fd: &[Vec<f64>],
) -> Option<f64> {
    let axis = cone.axis();
    let mut worst: f64 = 0.0;
    for (n, vp) in grid.nodes.iter().enumerate() {
        let hit = table[n][rank];
        let p = set.feature_expr(hit.feature)?;
        let dir = cone.line_direction(vp);
        let y = cone.point_at(vp, hit.t);
        let (_, g) = p.eval_grad(&y).ok()?;
        let denom = linalg::dot(&g, &dir);
        if denom == 0.0 {
            return None;
        }
        let base = (0..cone.dim()).filter(|&i| i != axis);
        for (j, i) in base.enumerate() {
            let exact = -hit.t * g[i] / denom;
            let scale = 1.0 + exact.abs();
            worst = worst.max((exact - fd[n][j]).abs() / scale);
        }
    }
    Some(worst)
}

/// Locates where the hit count changes between two neighbouring nodes
/// and names the cause.
fn classify_transition<S: LineHits + ?Sized>(
    set: &S,
    cone: &Cone,
    cfg: &RegularityConfig,
    a: &[f64],
    b: &[f64],
    ha: &[Hit],
    hb: &[Hit],
) -> RegularityVerdict {
    let (mut lo, mut hi) = (a.to_vec(), b.to_vec());
    let (mut h_lo, mut h_hi) = (ha.to_vec(), hb.to_vec());
    let count_lo = ha.len();
    for _ in 0..50 {
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| 0.5 * (x + y)).collect();
        let hm = match hits_at(set, cone, &mid, cfg) {
            Ok(h) => h,
            Err(e) => return scan_fail(&e, &mid),
        };
        if hm.len() == count_lo {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
            h_hi = hm;
        }
        if linalg::dist(&lo, &hi) <= 1e-12 * (1.0 + linalg::norm(&lo)) {
            break;
        }
    }
    let (richer, at) = if h_lo.len() > h_hi.len() { (&h_lo, &lo) } else { (&h_hi, &hi) };
    let scale = richer.iter().map(|h| h.t.abs()).fold(1e-300, f64::max);
    // a hit lost next to the vertex is a branch running into the puncture
    if let Some(h) = richer.iter().find(|h| h.t.abs() <= 1e-3 * scale.max(1.0)) {
        return RegularityVerdict::Fail {
            reason: FailReason::BranchVanishes,
            witness: Some(Witness {
                v_prime: at.clone(),
                branch: None,
                value: Some(h.t),
                detail: "a branch reaches the vertex of the cone".into(),
            }),
        };
    }
    let close = richer.windows(2).any(|w| (w[1].t - w[0].t).abs() <= 1e-4 * scale.max(1.0));
    if close || richer.iter().any(|h| h.touching) {
        return RegularityVerdict::fail(FailReason::TangencyDetected, at, "two branches merge at a tangent line");
    }
    RegularityVerdict::fail(FailReason::BranchCountVaries, at, format!("hit count changes from {} to {}", ha.len(), hb.len()))
}

/// Weak regularity at `x` for the direction `v` and aperture `ε`: finite
/// fibers and a finite union of nonvanishing graphs in the cone.
pub fn check_weak_regular<S: LineHits + ?Sized>(
    set: &S,
    x: &[f64],
    v: &[f64],
    eps: f64,
    cfg: &RegularityConfig,
) -> Result<RegularityVerdict, RegularityError> {
    if cfg.resolution < 3 {
        return Err(RegularityError::Resolution(cfg.resolution));
    }
    let cone = cfg.cone(x, v, eps)?;
    if let Err(v) = finiteness_probe(set, v, cfg) {
        return Ok(v);
    }
    Ok(extract_branches(set, &cone, cfg))
}

/// Weak regularity check without the finiteness probe, for callers that
/// probe each direction once.
pub(crate) fn weak_regular_probed<S: LineHits + ?Sized>(
    set: &S,
    x: &[f64],
    v: &[f64],
    eps: f64,
    cfg: &RegularityConfig,
) -> Result<RegularityVerdict, RegularityError> {
    let cone = cfg.cone(x, v, eps)?;
    Ok(extract_branches(set, &cone, cfg))
}

/// Upgrades a weak verdict with the constant `C_min = max ‖∇f_i‖/|f_i|`.
pub fn strengthen(weak: RegularityVerdict, c_budget: f64) -> RegularityVerdict {
    match weak {
        RegularityVerdict::WeakRegular { branches, sheets } => {
            let mut c_min: f64 = 0.0;
            let mut witness = None;
            for s in &sheets {
                let (r, k) = s.log_derivative_max();
                if r > c_min || !r.is_finite() {
                    c_min = r;
                    witness = Some(Witness {
                        v_prime: s.nodes[k].clone(),
                        branch: Some(s.index),
                        value: Some(r),
                        detail: "node attaining max |grad f| / |f|".into(),
                    });
                }
            }
            if c_min <= c_budget {
                RegularityVerdict::Regular { branches, c_min, witness, sheets }
            } else {
                RegularityVerdict::Fail { reason: FailReason::ConstantExceeded, witness }
            }
        }
        other => other,
    }
}

/// Weak regularity plus `‖∇f_i‖ ≤ C_budget |f_i|` on every sheet.
pub fn check_regular<S: LineHits + ?Sized>(
    set: &S,
    x: &[f64],
    v: &[f64],
    eps: f64,
    c_budget: f64,
    cfg: &RegularityConfig,
) -> Result<RegularityVerdict, RegularityError> {
    Ok(strengthen(check_weak_regular(set, x, v, eps, cfg)?, c_budget))
}
