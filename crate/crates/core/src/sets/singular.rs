//! Singular points of plane curves and pairwise curve intersections, by
//! grid-seeded Gauss–Newton.

use super::{Aabb, DefinableSet, Feature, FeatureKind, PointCloud, Relation, SetError, SetKind};
use crate::expr::DefinableExpr;
use crate::linalg;

/// Seeds per axis for the Newton searches.
pub(crate) const SEED_GRID: usize = 40;

const SING_VALUE_TOL: f64 = 1e-9;
const SING_GRAD_TOL: f64 = 1e-6;

/// Residuals and Jacobian rows of `F(x) = (f_1(x), …)`.
type System<'a> = dyn Fn(&[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> + 'a;

fn gauss_newton(system: &System, x0: Vec<f64>, bounds: &Aabb, iters: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut x = x0;
    let scale = bounds.diameter().max(1e-300);
    for _ in 0..iters {
        let (r, j) = system(&x)?;
        let step = linalg::gauss_newton_step(&j, &r, 1e-14)?;
        let len = linalg::norm(&step);
        // keep steps moderate so seeds stay near their basin
        let s = if len > 0.25 * scale { 0.25 * scale / len } else { 1.0 };
        x = linalg::axpy(&x, s, &step);
        if !x.iter().all(|v| v.is_finite()) || !bounds.padded(0.05 * scale).contains(&x) {
            return None;
        }
        if len <= 1e-15 * (1.0 + linalg::norm(&x)) {
            break;
        }
    }
    let (r, _) = system(&x)?;
    Some((x, r))
}

fn seeds(bounds: &Aabb, grid: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let n = bounds.dim();
    let total = grid.pow(n as u32);
    (0..total).map(move |mut k| {
        (0..n)
            .map(|i| {
                let c = k % grid;
                k /= grid;
                bounds.lo[i] + (c as f64 + 0.5) / grid as f64 * (bounds.hi[i] - bounds.lo[i])
            })
            .collect()
    })
}

/// Keeps one point per cluster of radius `tol`, in lexicographic order.
pub(crate) fn dedupe(mut pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        if !out.iter().any(|q| linalg::dist(q, &p) <= tol) {
            out.push(p);
        }
    }
    out
}

fn hessian(p: &DefinableExpr, x: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = x.len();
    let mut rows = vec![vec![0.0; n]; n];
    for k in 0..n {
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[k] += h;
        b[k] -= h;
        let ga = p.eval_grad(&a).ok()?.1;
        let gb = p.eval_grad(&b).ok()?.1;
        for i in 0..n {
            rows[i][k] = (ga[i] - gb[i]) / (2.0 * h);
        }
    }
    // symmetrize the difference quotients
    for i in 0..n {
        for k in i + 1..n {
            let m = 0.5 * (rows[i][k] + rows[k][i]);
            rows[i][k] = m;
            rows[k][i] = m;
        }
    }
    Some(rows)
}

/// Points of `{p = 0}` in `bounds` where `∇p` vanishes.
pub fn singular_points_of(p: &DefinableExpr, bounds: &Aabb, grid: usize) -> Vec<Vec<f64>> {
    let system = |x: &[f64]| -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let (v, g) = p.eval_grad(x).ok()?;
        let hess = hessian(p, x)?;
        let mut r = vec![v];
        r.extend(&g);
        let mut j = vec![g];
        j.extend(hess);
        Some((r, j))
    };
    let mut found = Vec::new();
    for s in seeds(bounds, grid) {
        if let Some((x, r)) = gauss_newton(&system, s, bounds, 60) {
            let grad = linalg::norm(&r[1..]);
            if r[0].abs() <= SING_VALUE_TOL && grad <= SING_GRAD_TOL && bounds.padded(1e-9).contains(&x) {
                found.push(x);
            }
        }
    }
    dedupe(found, 1e-6 * (1.0 + bounds.diameter()))
}

/// Common zeros of two plane curves in `bounds`.
pub(crate) fn intersect_curves(p: &DefinableExpr, q: &DefinableExpr, bounds: &Aabb, grid: usize) -> Vec<Vec<f64>> {
    let found = solve_square_seeded(&[p.clone(), q.clone()], bounds, grid);
    dedupe(found, 1e-7 * (1.0 + bounds.diameter()))
}

/// Roots of a square system of expressions inside `bounds`.
pub(crate) fn solve_square_seeded(exprs: &[DefinableExpr], bounds: &Aabb, grid: usize) -> Vec<Vec<f64>> {
    let system = |x: &[f64]| -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut r = Vec::with_capacity(exprs.len());
        let mut j = Vec::with_capacity(exprs.len());
        for e in exprs {
            let (v, g) = e.eval_grad(x).ok()?;
            r.push(v);
            j.push(g);
        }
        Some((r, j))
    };
    let mut found = Vec::new();
    for s in seeds(bounds, grid) {
        if let Some((x, r)) = gauss_newton(&system, s, bounds, 40) {
            if r.iter().all(|v| v.abs() <= 1e-11) && bounds.padded(1e-9 * (1.0 + bounds.diameter())).contains(&x) {
                found.push(x);
            }
        }
    }
    dedupe(found, 1e-7 * (1.0 + bounds.diameter()))
}

/// Singular points of a curve `{p = 0}` given as a one-atom equality set.
pub fn find_singular_points(curve: &DefinableSet, bounds: &Aabb) -> Result<PointCloud, SetError> {
    let p = match curve.kind() {
        SetKind::SignCondition(sc) if sc.atoms.len() == 1 && sc.atoms[0].rel == Relation::Eq => &sc.atoms[0].expr,
        _ => return Err(SetError::NotACurve),
    };
    if curve.dim() != 2 || bounds.dim() != 2 {
        return Err(SetError::DimensionMismatch { expected: 2, got: curve.dim() });
    }
    let pts = singular_points_of(p, bounds, SEED_GRID);
    let mut cloud = PointCloud::new(2);
    let f = cloud.add_feature(Feature { label: "singular".into(), kind: FeatureKind::Point });
    for x in pts {
        cloud.push(x, f);
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sing(src: &str) -> Vec<Vec<f64>> {
        let c = DefinableSet::from_atoms(2, &[src], None).unwrap();
        let b = Aabb::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        find_singular_points(&c, &b).unwrap().points
    }

    #[test]
    fn regular_circle_has_none() {
        assert!(sing("x^2 + y^2 - 1 = 0").is_empty());
    }

    #[test]
    fn nodal_cubic_origin() {
        let s = sing("y^2 - x^2*(x + 1) = 0");
        assert_eq!(s.len(), 1, "{s:?}");
        assert!(linalg::norm(&s[0]) < 1e-8);
    }

    #[test]
    fn crossing_lines_origin() {
        let s = sing("x*y = 0");
        assert_eq!(s.len(), 1);
        assert!(linalg::norm(&s[0]) < 1e-8);
    }

    #[test]
    fn circle_line_intersections() {
        let b = Aabb::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let p = crate::expr::parse("x^2 + y^2 - 1").unwrap();
        let q = crate::expr::parse("y - 0.5").unwrap();
        let pts = intersect_curves(&p, &q, &b, 24);
        assert_eq!(pts.len(), 2);
        let x = 0.75f64.sqrt();
        assert!((pts[0][0] + x).abs() < 1e-12 && (pts[1][0] - x).abs() < 1e-12);
    }
}
