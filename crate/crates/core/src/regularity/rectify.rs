//! Empirical rectifiability of a family `f(x, y)` with respect to the
//! parameters `y`: find a partition of the base into cells `D`, a box
//! `B_D` in the parameter domain for each, and `c` with
//! `‖D_y f‖ ≤ c |f|` on every `D × B_D`.
//!
//! Each bound is a sampled supremum. It is accepted when a finer sample
//! reaching closer to the faces of the box does not raise it; otherwise
//! the parameter box is shrunk dyadically and then the cell is bisected.

use serde::{Deserialize, Serialize};

use crate::expr::DefinableExpr;
use crate::linalg;
use crate::sets::Aabb;

#[derive(Debug, Clone, PartialEq)]
pub struct RectifyConfig {
    /// Interior samples per axis for the coarse pass; the fine pass uses
    /// twice as many plus one.
    pub samples: usize,
    /// Relative growth from coarse to fine sup that still counts as stable.
    pub stability_rel: f64,
    /// Levels of dyadic parameter sub-boxes tried before bisecting a cell.
    pub subbox_levels: usize,
}

impl Default for RectifyConfig {
    fn default() -> Self {
        RectifyConfig { samples: 16, stability_rel: 1e-3, subbox_levels: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyPiece {
    pub cell: Aabb,
    pub param_box: Aabb,
    pub c: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifiabilityReport {
    pub pieces: Vec<RectifyPiece>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RectifyError {
    #[error("no stable bound on cell {cell:?} at depth {depth}")]
    DepthExhausted { cell: Aabb, depth: usize },
    #[error("family has arity {arity}, base and parameter boxes have {base} + {params} coordinates")]
    DimensionMismatch { arity: usize, base: usize, params: usize },
    #[error("family is not C¹ at {point:?}: {reason}")]
    NotC1 { point: Vec<f64>, reason: String },
    #[error("no base cells given")]
    NoCells,
}

fn axis_samples(lo: f64, hi: f64, interior: usize, offsets: &[f64]) -> Vec<f64> {
    let w = hi - lo;
    let mut out: Vec<f64> = offsets.iter().flat_map(|o| [lo + o * w, hi - o * w]).collect();
    out.extend((0..interior).map(|k| lo + (k as f64 + 0.5) / interior as f64 * w));
    out
}

fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        out = out.into_iter().flat_map(|p: Vec<f64>| a.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    out
}

/// Sampled `sup ‖D_y f‖ / |f|` over `cell × pbox`; infinite when `f`
/// vanishes at a sample.
fn sampled_sup(f: &DefinableExpr, cell: &Aabb, pbox: &Aabb, interior: usize, offsets: &[f64]) -> Result<f64, RectifyError> {
    let m = cell.dim();
    let axes: Vec<Vec<f64>> =
        cell.lo.iter().zip(&cell.hi).chain(pbox.lo.iter().zip(&pbox.hi)).map(|(a, b)| axis_samples(*a, *b, interior, offsets)).collect();
    let mut sup: f64 = 0.0;
    for p in tensor(&axes) {
        let (v, g) = f.eval_grad(&p).map_err(|e| RectifyError::NotC1 { point: p.clone(), reason: e.to_string() })?;
        if !g.iter().all(|d| d.is_finite()) {
            return Err(RectifyError::NotC1 { point: p, reason: "non-finite gradient".into() });
        }
        let r = linalg::norm(&g[m..]) / v.abs();
        if r.is_nan() {
            return Ok(f64::INFINITY);
        }
        sup = sup.max(r);
    }
    Ok(sup)
}

/// The stable sampled bound on `cell × pbox`, if any.
fn stable_bound(f: &DefinableExpr, cell: &Aabb, pbox: &Aabb, cfg: &RectifyConfig) -> Result<Option<f64>, RectifyError> {
    let coarse = sampled_sup(f, cell, pbox, cfg.samples, &[1e-6])?;
    if !coarse.is_finite() {
        return Ok(None);
    }
    let fine = sampled_sup(f, cell, pbox, 2 * cfg.samples + 1, &[1e-12, 1e-9, 1e-6])?;
    Ok((fine <= coarse * (1.0 + cfg.stability_rel) + 1e-9).then_some(fine.max(coarse)))
}

fn dyadic_boxes(b: &Aabb, level: usize) -> Vec<Aabb> {
    let parts = 1usize << level;
    let d = b.dim();
    (0..parts.pow(d as u32))
        .map(|mut k| {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for i in 0..d {
                let c = k % parts;
                k /= parts;
                let w = (b.hi[i] - b.lo[i]) / parts as f64;
                lo.push(b.lo[i] + c as f64 * w);
                hi.push(b.lo[i] + (c + 1) as f64 * w);
            }
            Aabb { lo, hi }
        })
        .collect()
}

fn bisect(cell: &Aabb) -> (Aabb, Aabb) {
    let i = (0..cell.dim()).max_by(|&a, &b| (cell.hi[a] - cell.lo[a]).total_cmp(&(cell.hi[b] - cell.lo[b]))).unwrap();
    let mid = 0.5 * (cell.lo[i] + cell.hi[i]);
    let mut left = cell.clone();
    let mut right = cell.clone();
    left.hi[i] = mid;
    right.lo[i] = mid;
    (left, right)
}

fn search_cell(
    f: &DefinableExpr,
    cell: Aabb,
    omega: &Aabb,
    depth: usize,
    max_depth: usize,
    cfg: &RectifyConfig,
    out: &mut Vec<RectifyPiece>,
) -> Result<(), RectifyError> {
    for level in 0..=cfg.subbox_levels {
        let mut best: Option<(f64, Aabb)> = None;
        for b in dyadic_boxes(omega, level) {
            if let Some(c) = stable_bound(f, &cell, &b, cfg)? {
                if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
                    best = Some((c, b));
                }
            }
        }
        if let Some((c, param_box)) = best {
            out.push(RectifyPiece { cell, param_box, c, depth });
            return Ok(());
        }
    }
    if depth >= max_depth {
        return Err(RectifyError::DepthExhausted { cell, depth });
    }
    let (l, r) = bisect(&cell);
    search_cell(f, l, omega, depth + 1, max_depth, cfg, out)?;
    search_cell(f, r, omega, depth + 1, max_depth, cfg, out)
}

/// `family` takes the base coordinates first, then the parameters.
pub fn rectifiability_search(
    family: &DefinableExpr,
    base_cells: &[Aabb],
    omega: &Aabb,
    max_depth: usize,
    cfg: &RectifyConfig,
) -> Result<RectifiabilityReport, RectifyError> {
    let Some(first) = base_cells.first() else { return Err(RectifyError::NoCells) };
    let base = first.dim();
    if family.arity() > base + omega.dim() || base_cells.iter().any(|c| c.dim() != base) {
        return Err(RectifyError::DimensionMismatch { arity: family.arity(), base, params: omega.dim() });
    }
    let mut pieces = Vec::new();
    for cell in base_cells {
        search_cell(family, cell.clone(), omega, 0, max_depth, cfg, &mut pieces)?;
    }
    let c = pieces.iter().map(|p| p.c).fold(0.0, f64::max);
    Ok(RectifiabilityReport { pieces, c })
}
