//! Definable subsets of ℝⁿ (n ≤ 3): sign-condition sets, parametric
//! patches, graph bands and finite unions.
//!
//! Membership is decided by expression evaluation alone. An equality atom
//! `p = 0` holds when `|p| ≤ EQ_TOL`. A strict atom whose expression
//! cannot be evaluated at the point is false; an equality atom that cannot
//! be evaluated is an error. `Not` inverts the result of its operand, so a
//! negated strict atom is true outside the domain.

mod hits;
mod sample;
mod singular;

use std::fmt;
use std::sync::Arc;

use crate::cones::Projection;
use crate::expr::{parse, DefinableExpr, EvalError, ParseError, RootConfig, RootError};
use crate::linalg;

pub use hits::{Frontier, Hit, LineHits};
pub use sample::{boundary_sample, distance_to_complement, BoundaryIndex, Feature, FeatureKind, PointCloud};
pub use singular::{find_singular_points, singular_points_of};

pub(crate) use sample::is_frontier;

/// Residual below which an equality atom is considered satisfied.
pub const EQ_TOL: f64 = 1e-9;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Roots(#[from] RootError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("set has no bounding box")]
    UnboundedSet,
    #[error("point is not in the set")]
    PointOutsideSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ambient dimension {0} exceeds the supported maximum of 3")]
    DimensionTooLarge(usize),
    #[error("set is not lower dimensional; use its frontier for line hits")]
    NotLowerDimensional,
    #[error("graph band bounds are not ordered at base point {at:?}")]
    BandOrder { at: Vec<f64> },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("expected a single equality curve p = 0")]
    NotACurve,
}

/// A closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SetError> {
        if lo.len() != hi.len() {
            return Err(SetError::InvalidBox(format!("{} lower vs {} upper bounds", lo.len(), hi.len())));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(SetError::InvalidBox(format!("{lo:?} .. {hi:?}")));
        }
        Ok(Aabb { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        linalg::dist(&self.lo, &self.hi)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// The box grown by `margin` on every side.
    pub fn padded(&self, margin: f64) -> Aabb {
        Aabb { lo: self.lo.iter().map(|a| a - margin).collect(), hi: self.hi.iter().map(|b| b + margin).collect() }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Parameter interval of `{anchor + t·dir} ∩ box`, intersected with
    /// `window`; `None` when empty.
    pub fn clip_line(&self, anchor: &[f64], dir: &[f64], window: (f64, f64)) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = window;
        for i in 0..self.dim() {
            if dir[i] == 0.0 {
                if anchor[i] < self.lo[i] || anchor[i] > self.hi[i] {
                    return None;
                }
                continue;
            }
            let a = (self.lo[i] - anchor[i]) / dir[i];
            let b = (self.hi[i] - anchor[i]) / dir[i];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo < hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::Gt => ">",
        })
    }
}

/// `expr σ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub expr: DefinableExpr,
    pub rel: Relation,
}

impl Atom {
    pub fn new(expr: DefinableExpr, rel: Relation) -> Self {
        Atom { expr, rel }
    }

    /// Parses `lhs σ rhs` with `σ ∈ {<, >, =, ==}` into `(lhs − rhs) σ 0`.
    pub fn parse(text: &str) -> Result<Atom, SetError> {
        let (pos, len, rel) = ["==", "<", ">", "="]
            .iter()
            .find_map(|op| {
                text.find(op).map(|p| {
                    let rel = match *op {
                        "<" => Relation::Lt,
                        ">" => Relation::Gt,
                        _ => Relation::Eq,
                    };
                    (p, op.len(), rel)
                })
            })
            .ok_or_else(|| ParseError { offset: 0, message: "expected one of <, >, =".into() })?;
        let lhs = parse(&text[..pos])?;
        let rhs_text = &text[pos + len..];
        let rhs = parse(rhs_text).map_err(|mut e| {
            e.offset += pos + len;
            e
        })?;
        let expr = match rhs.as_constant() {
            Some(c) if c == 0.0 => lhs,
            _ => lhs - rhs,
        };
        Ok(Atom { expr, rel })
    }

    pub fn holds(&self, point: &[f64]) -> Result<bool, EvalError> {
        match self.rel {
            Relation::Eq => self.expr.eval(point).map(|v| v.abs() <= EQ_TOL),
            Relation::Lt => Ok(matches!(self.expr.eval(point), Ok(v) if v < 0.0)),
            Relation::Gt => Ok(matches!(self.expr.eval(point), Ok(v) if v > 0.0)),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.expr, self.rel)
    }
}

/// Boolean combination of atoms, referenced by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(usize),
    All(Vec<Formula>),
    Any(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    fn eval(&self, atoms: &[Atom], point: &[f64]) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::Atom(i) => atoms[*i].holds(point)?,
            Formula::All(fs) => {
                for f in fs {
                    if !f.eval(atoms, point)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Any(fs) => {
                for f in fs {
                    if f.eval(atoms, point)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Not(f) => !f.eval(atoms, point)?,
        })
    }

    fn max_atom(&self) -> Option<usize> {
        match self {
            Formula::Atom(i) => Some(*i),
            Formula::All(fs) | Formula::Any(fs) => fs.iter().filter_map(Formula::max_atom).max(),
            Formula::Not(f) => f.max_atom(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignCondition {
    pub atoms: Vec<Atom>,
    pub formula: Formula,
}

impl SignCondition {
    /// Conjunction of all atoms.
    pub fn all(atoms: Vec<Atom>) -> Self {
        let formula = Formula::All((0..atoms.len()).map(Formula::Atom).collect());
        SignCondition { atoms, formula }
    }

    /// Disjunction of all atoms.
    pub fn any(atoms: Vec<Atom>) -> Self {
        let formula = Formula::Any((0..atoms.len()).map(Formula::Atom).collect());
        SignCondition { atoms, formula }
    }

    pub fn has_equality(&self) -> bool {
        self.atoms.iter().any(|a| a.rel == Relation::Eq)
    }
}

/// `γ: box ⊂ ℝᵏ → ℝⁿ`. A zero-dimensional patch is a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPatch {
    pub map: Vec<DefinableExpr>,
    pub params: Aabb,
}

impl ParametricPatch {
    pub fn eval(&self, u: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.map.iter().map(|e| e.eval(u)).collect()
    }

    /// Value and Jacobian rows `∂γ_i/∂u`.
    pub fn eval_jac(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), EvalError> {
        let mut val = Vec::with_capacity(self.map.len());
        let mut jac = Vec::with_capacity(self.map.len());
        for e in &self.map {
            let (v, g) = e.eval_grad(u)?;
            val.push(v);
            jac.push(g);
        }
        Ok((val, jac))
    }

    pub fn param_dim(&self) -> usize {
        self.params.dim()
    }
}

/// One side of a graph band over the base of a projection.
#[derive(Debug, Clone)]
pub enum Graph {
    /// `h = φ(u)` for an expression over base coordinates.
    Expr(DefinableExpr),
    /// The `rank`-th boundary point (sorted by fiber coordinate) of an open
    /// set on the fiber through the base point.
    FiberRoot { frontier: Arc<DefinableSet>, rank: usize },
}

/// `{ y : π(y) ∈ base, φ_lower(π(y)) < y_axis < φ_upper(π(y)) }`.
#[derive(Debug, Clone)]
pub struct GraphBand {
    pub projection: Projection,
    /// Open base cell; closed box coordinates, interior taken.
    pub base: Aabb,
    pub lower: Graph,
    pub upper: Graph,
    pub fiber_cfg: RootConfig,
}

/// Root scan density used on band fibers.
pub const FIBER_DENSITY: usize = 128;

impl GraphBand {
    /// Fiber coordinates `(lower, upper)` over the base point `u`, or `None`
    /// where either graph is undefined.
    pub fn bounds_at(&self, u: &[f64]) -> Result<Option<(f64, f64)>, SetError> {
        Ok(self.bound_hits(u)?.map(|(lo, hi)| (lo.h, hi.h)))
    }

    /// Sorted frontier hits of `frontier` on the fiber over `u`; `t` is the
    /// fiber coordinate.
    pub fn fiber_hits(&self, frontier: &DefinableSet, u: &[f64]) -> Result<Vec<Hit>, SetError> {
        let anchor = self.projection.lift(u, 0.0);
        let dir = self.projection.direction();
        Frontier(frontier).line_hits(&anchor, &dir, (-1e6, 1e6), &self.fiber_cfg)
    }

    pub fn in_base(&self, u: &[f64]) -> bool {
        u.iter().zip(self.base.lo.iter().zip(&self.base.hi)).all(|(x, (a, b))| *a < *x && *x < *b)
    }
}

#[derive(Debug, Clone)]
pub enum SetKind {
    SignCondition(SignCondition),
    Patch(ParametricPatch),
    Band(GraphBand),
    Union(Vec<DefinableSet>),
}

#[derive(Debug, Clone)]
pub struct DefinableSet {
    dim: usize,
    bbox: Option<Aabb>,
    kind: SetKind,
}

impl DefinableSet {
    fn check_dim(dim: usize) -> Result<(), SetError> {
        if dim > MAX_DIM {
            return Err(SetError::DimensionTooLarge(dim));
        }
        Ok(())
    }

    pub fn sign_condition(dim: usize, cond: SignCondition, bbox: Option<Aabb>) -> Result<Self, SetError> {
        Self::check_dim(dim)?;
        if let Some(b) = &bbox {
            if b.dim() != dim {
                return Err(SetError::DimensionMismatch { expected: dim, got: b.dim() });
            }
        }
        if let Some(m) = cond.formula.max_atom() {
            if m >= cond.atoms.len() {
                return Err(SetError::Unsupported(format!("formula references atom {m}")));
            }
        }
        Ok(DefinableSet { dim, bbox, kind: SetKind::SignCondition(cond) })
    }

    /// Conjunction of atoms given as text, e.g. `["x > 0", "x < 1"]`.
    pub fn from_atoms(dim: usize, atoms: &[&str], bbox: Option<Aabb>) -> Result<Self, SetError> {
        let atoms = atoms.iter().map(|a| Atom::parse(a)).collect::<Result<Vec<_>, _>>()?;
        Self::sign_condition(dim, SignCondition::all(atoms), bbox)
    }

    pub fn patch(map: Vec<DefinableExpr>, params: Aabb) -> Result<Self, SetError> {
        let dim = map.len();
        Self::check_dim(dim)?;
        let patch = ParametricPatch { map, params };
        let bbox = if patch.param_dim() == 0 {
            let p = patch.eval(&[])?;
            Some(Aabb { lo: p.clone(), hi: p })
        } else {
            sample::patch_bbox(&patch)
        };
        Ok(DefinableSet { dim, bbox, kind: SetKind::Patch(patch) })
    }

    pub fn point(p: Vec<f64>) -> Result<Self, SetError> {
        Self::patch(p.into_iter().map(DefinableExpr::constant).collect(), Aabb { lo: vec![], hi: vec![] })
    }

    /// A band between two graphs; the order `lower < upper` is checked at
    /// a few base points for expression graphs.
    pub fn band(projection: Projection, base: Aabb, lower: Graph, upper: Graph) -> Result<Self, SetError> {
        let dim = projection.dim();
        Self::check_dim(dim)?;
        if base.dim() != dim - 1 {
            return Err(SetError::DimensionMismatch { expected: dim - 1, got: base.dim() });
        }
        let band = GraphBand { projection, base, lower, upper, fiber_cfg: RootConfig::with_density(FIBER_DENSITY) };
        if let (Graph::FiberRoot { frontier: a, rank: ra }, Graph::FiberRoot { frontier: b, rank: rb }) = (&band.lower, &band.upper) {
            if Arc::ptr_eq(a, b) && ra >= rb {
                return Err(SetError::BandOrder { at: band.base.center() });
            }
        }
        let bbox = sample::band_bbox(&band)?;
        Ok(DefinableSet { dim, bbox, kind: SetKind::Band(band) })
    }

    pub fn union(members: Vec<DefinableSet>) -> Result<Self, SetError> {
        let dim = members.first().map(|m| m.dim).ok_or_else(|| SetError::Unsupported("empty union".into()))?;
        if let Some(m) = members.iter().find(|m| m.dim != dim) {
            return Err(SetError::DimensionMismatch { expected: dim, got: m.dim });
        }
        let bbox =
            members.iter().map(|m| m.bbox.clone()).collect::<Option<Vec<_>>>().and_then(|bs| bs.into_iter().reduce(|a, b| a.union(&b)));
        Ok(DefinableSet { dim, bbox, kind: SetKind::Union(members) })
    }

    pub fn with_bbox(mut self, bbox: Aabb) -> Result<Self, SetError> {
        if bbox.dim() != self.dim {
            return Err(SetError::DimensionMismatch { expected: self.dim, got: bbox.dim() });
        }
        self.bbox = Some(bbox);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bbox(&self) -> Option<&Aabb> {
        self.bbox.as_ref()
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool, SetError> {
        if point.len() != self.dim {
            return Err(SetError::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        match &self.kind {
            SetKind::SignCondition(sc) => Ok(sc.formula.eval(&sc.atoms, point)?),
            SetKind::Patch(p) => Ok(sample::patch_contains(p, point)),
            SetKind::Band(b) => {
                let u = b.projection.apply(point);
                if !b.in_base(&u) {
                    return Ok(false);
                }
                let h = point[b.projection.axis()];
                Ok(match b.bounds_at(&u) {
                    Ok(Some((lo, hi))) => lo < h && h < hi,
                    _ => false,
                })
            }
            SetKind::Union(ms) => {
                for m in ms {
                    if m.contains(point)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Membership with evaluation failures read as `false`.
    pub fn contains_lenient(&self, point: &[f64]) -> bool {
        self.contains(point).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_vars;

    fn disk() -> DefinableSet {
        DefinableSet::from_atoms(2, &["x^2 + y^2 < 1"], None).unwrap()
    }

    #[test]
    fn disk_membership() {
        let d = disk();
        assert!(d.contains(&[0.0, 0.0]).unwrap());
        assert!(!d.contains(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn strict_atoms_outside_domain_are_false() {
        let s = DefinableSet::from_atoms(1, &["log(x) < 0"], None).unwrap();
        assert!(!s.contains(&[-1.0]).unwrap());
        assert!(s.contains(&[0.5]).unwrap());
        let eq = DefinableSet::from_atoms(1, &["log(x) = 0"], None).unwrap();
        assert!(eq.contains(&[-1.0]).is_err());
    }

    #[test]
    fn counterexample_patch_membership() {
        let names = ["x", "a"];
        let map = vec![
            parse_with_vars("x", &names).unwrap(),
            parse_with_vars("a * x^(a + 1)", &names).unwrap(),
            parse_with_vars("x^(a + 1)", &names).unwrap(),
        ];
        let x1 = DefinableSet::patch(map, Aabb::new(vec![1e-9, -10.0], vec![1.0, 10.0]).unwrap()).unwrap();
        let e = std::f64::consts::E;
        assert!(x1.contains(&[1.0 / e, 2.0 / e.powi(3), 1.0 / e.powi(3)]).unwrap());
        assert!(!x1.contains(&[1.0 / e, 3.0 / e.powi(3), 1.0 / e.powi(3)]).unwrap());
    }

    #[test]
    fn atom_parsing() {
        let a = Atom::parse("x^2 + y^2 = 1").unwrap();
        assert_eq!(a.rel, Relation::Eq);
        assert!(a.holds(&[0.6, 0.8]).unwrap());
        let b = Atom::parse("y > -x^2").unwrap();
        assert!(b.holds(&[0.1, -0.005]).unwrap());
        assert!(!b.holds(&[0.1, -0.02]).unwrap());
        assert!(Atom::parse("x + 1").is_err());
    }

    #[test]
    fn band_with_expression_graphs() {
        let lower = Graph::Expr(parse("-(1 - x^2)^0.5").unwrap());
        let upper = Graph::Expr(parse("(1 - x^2)^0.5").unwrap());
        let b = DefinableSet::band(Projection::vertical(), Aabb::new(vec![-1.0], vec![1.0]).unwrap(), lower, upper).unwrap();
        assert!(b.contains(&[0.0, 0.99]).unwrap());
        assert!(!b.contains(&[0.0, 1.01]).unwrap());
        assert!(!b.contains(&[1.0, 0.0]).unwrap());
        let bb = b.bbox().unwrap();
        assert!(bb.lo[1] <= -0.999 && bb.hi[1] >= 0.999);
    }

    #[test]
    fn band_order_is_checked() {
        let r = DefinableSet::band(
            Projection::vertical(),
            Aabb::new(vec![0.0], vec![1.0]).unwrap(),
            Graph::Expr(parse("1").unwrap()),
            Graph::Expr(parse("0").unwrap()),
        );
        assert!(matches!(r, Err(SetError::BandOrder { .. })));
    }

    #[test]
    fn band_with_fiber_roots() {
        let annulus = Arc::new(
            DefinableSet::from_atoms(2, &["x^2 + y^2 > 0.25", "x^2 + y^2 < 1"], Some(Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()))
                .unwrap(),
        );
        let top = DefinableSet::band(
            Projection::vertical(),
            Aabb::new(vec![-0.5], vec![0.5]).unwrap(),
            Graph::FiberRoot { frontier: annulus.clone(), rank: 2 },
            Graph::FiberRoot { frontier: annulus.clone(), rank: 3 },
        )
        .unwrap();
        assert!(top.contains(&[0.0, 0.75]).unwrap());
        assert!(!top.contains(&[0.0, -0.75]).unwrap());
        assert!(!top.contains(&[0.0, 0.25]).unwrap());
        assert!(!top.contains(&[0.6, 0.5]).unwrap());
    }
}
