//! Intersections of lines `anchor + t·dir` with sets.
//!
//! A [`DefinableSet`] answers with the points of the set itself, which
//! only makes sense for lower-dimensional sets (curves, points). The
//! [`Frontier`] wrapper answers with the boundary points of an open set.

use super::{singular, DefinableSet, Formula, ParametricPatch, Relation, SetError, SetKind};
use crate::expr::{isolate_roots, DefinableExpr, RootConfig, RootKind, UnaryRestriction};
use crate::linalg;

/// A parameter value on a line together with the feature it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Index of the defining atom (sign conditions) or member offset.
    pub feature: usize,
    /// Tangential contact or merged pair of roots.
    pub touching: bool,
}

pub trait LineHits: Sync {
    fn ambient_dim(&self) -> usize;

    fn bounds(&self) -> Option<&super::Aabb>;

    /// Sorted hits with `t` in the open `window`, clipped to the bounding
    /// box when there is one.
    fn line_hits(&self, anchor: &[f64], dir: &[f64], window: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError>;

    /// Expression whose zero set contains the feature, when known.
    fn feature_expr(&self, _feature: usize) -> Option<DefinableExpr> {
        None
    }

    /// The points of a finite set.
    fn isolated_points(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Singular points and corners: where the hit structure can change
    /// without a tangency.
    fn critical_points(&self) -> Result<Vec<Vec<f64>>, SetError>;
}

/// The frontier `closure ∖ interior` of a set, seen through line hits.
#[derive(Debug, Clone, Copy)]
pub struct Frontier<'a>(pub &'a DefinableSet);

fn clip(set: &DefinableSet, anchor: &[f64], dir: &[f64], window: (f64, f64)) -> Option<(f64, f64)> {
    match set.bbox() {
        Some(b) => {
            let margin = 1e-6 * b.diameter().max(1e-300) + 1e-12;
            b.padded(margin).clip_line(anchor, dir, window)
        }
        None => (window.0 < window.1).then_some(window),
    }
}

fn roots_along(expr: &DefinableExpr, anchor: &[f64], dir: &[f64], w: (f64, f64), cfg: &RootConfig) -> Result<Vec<(f64, bool)>, SetError> {
    let h = UnaryRestriction::new(expr.clone(), anchor.to_vec(), dir.to_vec());
    let tol = 1e-12 * (w.1 - w.0);
    Ok(isolate_roots(&h, w.0, w.1, tol, cfg)?.into_iter().map(|r| (r.t, r.kind != RootKind::Simple)).collect())
}

fn sort_dedupe(mut hits: Vec<Hit>, merge: f64) -> Vec<Hit> {
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.feature.cmp(&b.feature)));
    let mut out: Vec<Hit> = Vec::with_capacity(hits.len());
    for h in hits {
        match out.last_mut() {
            Some(last) if h.t - last.t <= merge => last.touching |= h.touching,
            _ => out.push(h),
        }
    }
    out
}

fn atom_count(set: &DefinableSet) -> usize {
    match set.kind() {
        SetKind::SignCondition(sc) => sc.atoms.len(),
        SetKind::Union(ms) => ms.iter().map(atom_count).sum(),
        _ => 1,
    }
}

fn feature_expr_of(set: &DefinableSet, mut feature: usize) -> Option<DefinableExpr> {
    match set.kind() {
        SetKind::SignCondition(sc) => sc.atoms.get(feature).map(|a| a.expr.clone()),
        SetKind::Union(ms) => {
            for m in ms {
                let c = atom_count(m);
                if feature < c {
                    return feature_expr_of(m, feature);
                }
                feature -= c;
            }
            None
        }
        _ => None,
    }
}

fn frontier_hits(set: &DefinableSet, anchor: &[f64], dir: &[f64], w: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError> {
    let merge = 1e-9 * (w.1 - w.0);
    let mut cands = Vec::new();
    match set.kind() {
        SetKind::SignCondition(sc) => {
            for (i, atom) in sc.atoms.iter().enumerate() {
                for (t, touching) in roots_along(&atom.expr, anchor, dir, w, cfg)? {
                    cands.push(Hit { t, feature: i, touching });
                }
            }
        }
        SetKind::Union(ms) => {
            let mut offset = 0;
            for m in ms {
                if let Some(wm) = clip(m, anchor, dir, w) {
                    for h in frontier_hits(m, anchor, dir, wm, cfg)? {
                        cands.push(Hit { feature: h.feature + offset, ..h });
                    }
                }
                offset += atom_count(m);
            }
        }
        SetKind::Patch(_) | SetKind::Band(_) => return Err(SetError::Unsupported("line hits on the frontier of a patch or band".into())),
    }
    let cands = sort_dedupe(cands, merge);
    let delta = 1e-8 * (w.1 - w.0);
    let mut out = Vec::with_capacity(cands.len());
    for h in cands {
        let p = linalg::axpy(anchor, h.t, dir);
        let probes = [linalg::axpy(anchor, h.t - delta, dir), linalg::axpy(anchor, h.t + delta, dir)];
        if super::is_frontier(set, &p, &probes) {
            out.push(h);
        }
    }
    Ok(out)
}

impl LineHits for Frontier<'_> {
    fn ambient_dim(&self) -> usize {
        self.0.dim()
    }

    fn bounds(&self) -> Option<&super::Aabb> {
        self.0.bbox()
    }

    fn line_hits(&self, anchor: &[f64], dir: &[f64], window: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError> {
        match clip(self.0, anchor, dir, window) {
            Some(w) => frontier_hits(self.0, anchor, dir, w, cfg),
            None => Ok(Vec::new()),
        }
    }

    fn feature_expr(&self, feature: usize) -> Option<DefinableExpr> {
        feature_expr_of(self.0, feature)
    }

    fn critical_points(&self) -> Result<Vec<Vec<f64>>, SetError> {
        let set = self.0;
        let bbox = set.bbox().ok_or(SetError::UnboundedSet)?;
        let exprs: Vec<DefinableExpr> = (0..atom_count(set)).filter_map(|i| feature_expr_of(set, i)).collect();
        let mut pts = Vec::new();
        for e in &exprs {
            pts.extend(singular::singular_points_of(e, bbox, singular::SEED_GRID));
        }
        for i in 0..exprs.len() {
            for j in i + 1..exprs.len() {
                pts.extend(singular::intersect_curves(&exprs[i], &exprs[j], bbox, singular::SEED_GRID));
            }
        }
        let delta = 1e-7 * bbox.diameter().max(1e-300);
        pts.retain(|p| super::sample::frontier_by_axes(set, p, delta));
        Ok(singular::dedupe(pts, 1e-7 * bbox.diameter().max(1e-300)))
    }
}

fn equality_atoms(formula: &Formula, atoms: &[super::Atom], out: &mut Vec<usize>) {
    match formula {
        Formula::Atom(i) => {
            if atoms[*i].rel == Relation::Eq {
                out.push(*i)
            }
        }
        Formula::All(fs) | Formula::Any(fs) => fs.iter().for_each(|f| equality_atoms(f, atoms, out)),
        Formula::Not(_) => {}
    }
}

/// Solves `γ(u) = anchor + t·dir` for one- and two-parameter patches.
fn patch_hits(patch: &ParametricPatch, anchor: &[f64], dir: &[f64], w: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError> {
    let n = anchor.len();
    let k = patch.param_dim();
    // eliminate t through the coordinate where the line moves fastest
    let m = (0..n).max_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs())).unwrap();
    let comps: Vec<DefinableExpr> = patch.map.clone();
    let t_of = |g: &[f64]| (g[m] - anchor[m]) / dir[m];
    let residuals: Vec<DefinableExpr> = (0..n)
        .filter(|&i| i != m)
        .map(|i| {
            // γ_i − a_i − (γ_m − a_m)·d_i/d_m
            let r = dir[i] / dir[m];
            comps[i].clone()
                - DefinableExpr::constant(anchor[i])
                - DefinableExpr::constant(r) * (comps[m].clone() - DefinableExpr::constant(anchor[m]))
        })
        .collect();
    let mut params: Vec<Vec<f64>> = Vec::new();
    match (k, n) {
        (1, 2) => {
            let h = UnaryRestriction::new(residuals[0].clone(), vec![0.0], vec![1.0]);
            let (a, b) = (patch.params.lo[0], patch.params.hi[0]);
            let pad = 1e-12 * (b - a).max(1e-300);
            let tol = 1e-12 * (b - a);
            for r in isolate_roots(&h, a - pad, b + pad, tol, cfg)? {
                params.push(vec![r.t.clamp(a, b)]);
            }
        }
        (1, 3) => {
            let h = UnaryRestriction::new(residuals[0].clone(), vec![0.0], vec![1.0]);
            let (a, b) = (patch.params.lo[0], patch.params.hi[0]);
            for r in isolate_roots(&h, a, b, 1e-12 * (b - a), cfg)? {
                if matches!(residuals[1].eval(&[r.t]), Ok(v) if v.abs() <= super::EQ_TOL) {
                    params.push(vec![r.t]);
                }
            }
        }
        (2, 3) => params = singular::solve_square_seeded(&residuals, &patch.params, 16),
        _ => return Err(SetError::NotLowerDimensional),
    }
    let mut out = Vec::new();
    for u in params {
        let Ok(g) = patch.eval(&u) else { continue };
        let t = t_of(&g);
        if t > w.0 && t < w.1 {
            let touching = matches!((k, n), (1, 2)) && {
                // tangency when the curve velocity is parallel to dir
                patch.eval_jac(&u).map_or(false, |(_, j)| {
                    let v: Vec<f64> = j.iter().map(|row| row[0]).collect();
                    let cross = v[0] * dir[1] - v[1] * dir[0];
                    cross.abs() <= 1e-9 * linalg::norm(&v) * linalg::norm(dir)
                })
            };
            out.push(Hit { t, feature: 0, touching });
        }
    }
    Ok(sort_dedupe(out, 1e-9 * (w.1 - w.0)))
}

fn set_hits(set: &DefinableSet, anchor: &[f64], dir: &[f64], w: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError> {
    match set.kind() {
        SetKind::SignCondition(sc) => {
            let mut eqs = Vec::new();
            equality_atoms(&sc.formula, &sc.atoms, &mut eqs);
            if eqs.is_empty() {
                return Err(SetError::NotLowerDimensional);
            }
            let mut out = Vec::new();
            for i in eqs {
                for (t, touching) in roots_along(&sc.atoms[i].expr, anchor, dir, w, cfg)? {
                    let p = linalg::axpy(anchor, t, dir);
                    if set.contains_lenient(&p) {
                        out.push(Hit { t, feature: i, touching });
                    }
                }
            }
            Ok(sort_dedupe(out, 1e-9 * (w.1 - w.0)))
        }
        SetKind::Patch(p) if p.param_dim() == 0 => {
            let q = p.eval(&[])?;
            let dd = linalg::dot(dir, dir);
            let t = linalg::dot(&linalg::sub(&q, anchor), dir) / dd;
            let foot = linalg::axpy(anchor, t, dir);
            let hit = linalg::dist(&foot, &q) <= 1e-12 * (1.0 + linalg::norm(&q)) && t > w.0 && t < w.1;
            Ok(if hit { vec![Hit { t, feature: 0, touching: false }] } else { vec![] })
        }
        SetKind::Patch(p) => patch_hits(p, anchor, dir, w, cfg),
        SetKind::Band(_) => Err(SetError::NotLowerDimensional),
        SetKind::Union(ms) => {
            let mut out = Vec::new();
            let mut offset = 0;
            for m in ms {
                if let Some(wm) = clip(m, anchor, dir, w) {
                    out.extend(set_hits(m, anchor, dir, wm, cfg)?.into_iter().map(|h| Hit { feature: h.feature + offset, ..h }));
                }
                offset += atom_count(m);
            }
            Ok(sort_dedupe(out, 1e-9 * (w.1 - w.0)))
        }
    }
}

fn critical_of(set: &DefinableSet) -> Result<Vec<Vec<f64>>, SetError> {
    match set.kind() {
        SetKind::SignCondition(sc) => {
            let bbox = set.bbox().ok_or(SetError::UnboundedSet)?;
            let mut eqs = Vec::new();
            equality_atoms(&sc.formula, &sc.atoms, &mut eqs);
            let mut pts = Vec::new();
            for &i in &eqs {
                pts.extend(singular::singular_points_of(&sc.atoms[i].expr, bbox, singular::SEED_GRID));
            }
            for (a, &i) in eqs.iter().enumerate() {
                for &j in &eqs[a + 1..] {
                    pts.extend(singular::intersect_curves(&sc.atoms[i].expr, &sc.atoms[j].expr, bbox, singular::SEED_GRID));
                }
            }
            pts.retain(|p| set.contains_lenient(p));
            Ok(pts)
        }
        SetKind::Patch(_) => Ok(Vec::new()),
        SetKind::Band(_) => Err(SetError::NotLowerDimensional),
        SetKind::Union(ms) => {
            let mut pts = Vec::new();
            for m in ms {
                pts.extend(critical_of(m)?);
            }
            Ok(pts)
        }
    }
}

fn isolated_of(set: &DefinableSet) -> Option<Vec<Vec<f64>>> {
    match set.kind() {
        SetKind::Patch(p) if p.param_dim() == 0 => p.eval(&[]).ok().map(|q| vec![q]),
        SetKind::Union(ms) => {
            let mut pts = Vec::new();
            for m in ms {
                pts.extend(isolated_of(m)?);
            }
            Some(pts)
        }
        _ => None,
    }
}

impl LineHits for DefinableSet {
    fn ambient_dim(&self) -> usize {
        self.dim()
    }

    fn bounds(&self) -> Option<&super::Aabb> {
        self.bbox()
    }

    fn line_hits(&self, anchor: &[f64], dir: &[f64], window: (f64, f64), cfg: &RootConfig) -> Result<Vec<Hit>, SetError> {
        match clip(self, anchor, dir, window) {
            Some(w) => set_hits(self, anchor, dir, w, cfg),
            None => Ok(Vec::new()),
        }
    }

    fn feature_expr(&self, feature: usize) -> Option<DefinableExpr> {
        feature_expr_of(self, feature)
    }

    fn isolated_points(&self) -> Option<Vec<Vec<f64>>> {
        isolated_of(self)
    }

    fn critical_points(&self) -> Result<Vec<Vec<f64>>, SetError> {
        let pts = critical_of(self)?;
        let scale = self.bbox().map_or(1.0, |b| b.diameter().max(1e-300));
        Ok(singular::dedupe(pts, 1e-7 * scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::sets::Aabb;

    fn circle() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x^2 + y^2 = 1"], Some(Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())).unwrap()
    }

    fn ts(h: Vec<Hit>) -> Vec<f64> {
        h.into_iter().map(|h| h.t).collect()
    }

    #[test]
    fn circle_vertical_line() {
        let c = circle();
        let t = ts(c.line_hits(&[0.0, 0.0], &[0.0, 1.0], (-3.0, 3.0), &RootConfig::default()).unwrap());
        assert_eq!(t.len(), 2);
        assert!((t[0] + 1.0).abs() < 1e-14 && (t[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn circle_slanted_line_closed_form() {
        let c = circle();
        let v = 0.2;
        let t = ts(c.line_hits(&[1.0, 0.0], &[v, 1.0], (-3.0, -1e-12), &RootConfig::default()).unwrap());
        assert_eq!(t.len(), 1);
        assert!((t[0] + 2.0 * v / (1.0 + v * v)).abs() < 1e-13);
        assert!((t[0] + 0.38462).abs() < 1e-5);
    }

    #[test]
    fn frontier_of_square() {
        let sq =
            DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1"], Some(Aabb::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap()))
                .unwrap();
        let t = ts(Frontier(&sq).line_hits(&[0.3, 0.0], &[0.0, 1.0], (-5.0, 5.0), &RootConfig::default()).unwrap());
        assert_eq!(t.len(), 2);
        assert!((t[0] + 1.0).abs() < 1e-14 && (t[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frontier_drops_interior_crossings() {
        // the line y = -1/2 is a boundary of one half but interior to the union
        let u1 = DefinableSet::from_atoms(2, &["y > -0.5", "x^2 + y^2 < 1"], None).unwrap();
        let u2 = DefinableSet::from_atoms(2, &["y < 0.5", "x^2 + y^2 < 1"], None).unwrap();
        let u = DefinableSet::union(vec![u1, u2]).unwrap();
        let t = ts(Frontier(&u).line_hits(&[0.0, 0.0], &[0.0, 1.0], (-2.0, 2.0), &RootConfig::default()).unwrap());
        assert_eq!(t.len(), 2, "{t:?}");
    }

    #[test]
    fn patch_curve_hits() {
        // unit circle as a parametric curve
        let map = vec![parse("(1 - x^2)^0.5").unwrap(), parse("x").unwrap()];
        let arc = DefinableSet::patch(map, Aabb::new(vec![-1.0], vec![1.0]).unwrap()).unwrap();
        let t = ts(arc.line_hits(&[0.0, 0.0], &[1.0, 0.5], (-3.0, 3.0), &RootConfig::default()).unwrap());
        assert_eq!(t.len(), 1);
        assert!((t[0] - 1.0 / 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn isolated_point_hits() {
        let p = DefinableSet::point(vec![0.5, 0.5]).unwrap();
        let t = ts(p.line_hits(&[0.0, 0.0], &[1.0, 1.0], (-3.0, 3.0), &RootConfig::default()).unwrap());
        assert_eq!(t, vec![0.5]);
        let t = ts(p.line_hits(&[0.0, 0.0], &[1.0, 0.9], (-3.0, 3.0), &RootConfig::default()).unwrap());
        assert!(t.is_empty());
        assert_eq!(p.isolated_points(), Some(vec![vec![0.5, 0.5]]));
    }
}
