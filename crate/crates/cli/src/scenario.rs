//! Scenario files.
//!
//! A scenario is one JSON object with a `kind` tag. Unknown fields are
//! rejected everywhere. Sets use their own `kind` tag:
//!
//! ```json
//! {"kind": "atoms", "dim": 2, "atoms": ["x^2 + y^2 = 1"], "any": false,
//!  "bbox": {"lo": [-1, -1], "hi": [1, 1]}}
//! {"kind": "point", "at": [0, 0]}
//! {"kind": "patch", "map": ["t", "t^2"], "params": {"lo": [0], "hi": [1]}}
//! {"kind": "union", "members": [ ... ]}
//! ```
//!
//! Atoms are `lhs σ rhs` with `σ ∈ {<, >, =}` in the expression grammar of
//! `regproj::expr`; `any: true` takes their disjunction instead of their
//! conjunction. Patch maps use `t` for a one-parameter patch and `u`, `v`
//! for two parameters. Projections are `"vertical"`, `"horizontal"` or
//! `{"lambda": [..], "axis": k}`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use regproj::cones::Projection;
use regproj::expr::{parse, parse_with_vars, DefinableExpr};
use regproj::sets::{Aabb, Atom, DefinableSet, SignCondition};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    pub fn build(&self) -> Result<Aabb> {
        Ok(Aabb::new(self.lo.clone(), self.hi.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Atoms {
        dim: usize,
        atoms: Vec<String>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        any: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<BoxSpec>,
    },
    Point {
        at: Vec<f64>,
    },
    Patch {
        map: Vec<String>,
        params: BoxSpec,
    },
    Union {
        members: Vec<SetSpec>,
    },
}

impl SetSpec {
    pub fn build(&self) -> Result<DefinableSet> {
        Ok(match self {
            SetSpec::Atoms { dim, atoms, any, bbox } => {
                let atoms = atoms.iter().map(|a| Atom::parse(a).with_context(|| format!("atom `{a}`"))).collect::<Result<Vec<_>>>()?;
                let cond = if *any { SignCondition::any(atoms) } else { SignCondition::all(atoms) };
                DefinableSet::sign_condition(*dim, cond, bbox.as_ref().map(BoxSpec::build).transpose()?)?
            }
            SetSpec::Point { at } => DefinableSet::point(at.clone())?,
            SetSpec::Patch { map, params } => {
                let params = params.build()?;
                let names: &[&str] = if params.dim() == 1 { &["t"] } else { &["u", "v"] };
                let map = map
                    .iter()
                    .map(|e| parse_with_vars(e, names).with_context(|| format!("patch coordinate `{e}`")))
                    .collect::<Result<Vec<DefinableExpr>>>()?;
                DefinableSet::patch(map, params)?
            }
            SetSpec::Union { members } => DefinableSet::union(members.iter().map(SetSpec::build).collect::<Result<_>>()?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionStruct {
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionSpec {
    Named(String),
    Explicit(ProjectionStruct),
}

impl ProjectionSpec {
    pub fn build(&self) -> Result<Projection> {
        match self {
            ProjectionSpec::Named(n) => match n.as_str() {
                "vertical" => Ok(Projection::vertical()),
                "horizontal" => Ok(Projection::horizontal()),
                other => bail!("unknown projection `{other}` (expected vertical, horizontal or {{\"lambda\": ..}})"),
            },
            ProjectionSpec::Explicit(p) => match p.axis {
                Some(a) => Ok(Projection::with_axis(p.lambda.clone(), a)?),
                None => Ok(Projection::new(p.lambda.clone())),
            },
        }
    }
}

/// Output file names, relative to `--out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

fn default_report() -> String {
    "report.json".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { report: default_report(), csv: None, svg: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityCheck {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub epsilon: f64,
    /// Runs the strong check and asserts a regular verdict within budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_budget: Option<f64>,
    /// Asserted verdict: `regular`, `weak-regular`, `empty-intersection`
    /// or a failure reason such as `branch-vanishes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub set: SetSpec,
    pub checks: Vec<RegularityCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// `n` points per axis spread evenly over a box, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleGrid {
    pub bbox: BoxSpec,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub set: SetSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_grid: Option<SampleGrid>,
    pub directions: Vec<Vec<f64>>,
    pub ladder: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// `s = e^{-k}` for `k` in `from..=to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpLadder {
    pub from: u32,
    pub to: u32,
}

impl Default for ExpLadder {
    fn default() -> Self {
        ExpLadder { from: 5, to: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lambda: [f64; 2],
    pub sign: regproj::counterexample::Sign,
    #[serde(default)]
    pub ladder: ExpLadder,
    /// Asserts that some `s ≥ s_min` has a ratio above this budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unbounded_budget: Option<f64>,
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    /// Asserted ranges for the fit `ratio ≈ α |ln s|^β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_s_min() -> f64 {
    1e-300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverBuildScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub set: SetSpec,
    pub projections: Vec<ProjectionSpec>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_density")]
    pub density: usize,
    /// Verifies the built cover against this budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_budget: Option<f64>,
    /// Asserts that the constructor leaves no uncovered fiber.
    #[serde(default)]
    pub require_complete: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub label: String,
    pub set: SetSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverVerifyScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub set: SetSpec,
    pub pieces: Vec<PieceSpec>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_density")]
    pub density: usize,
    pub c_budget: f64,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_grid() -> usize {
    100
}

fn default_density() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RectifyExpect {
    Rectifiable,
    DepthExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifiabilityScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Expression in the base variables followed by the parameters.
    pub family: String,
    /// Variable names in order; defaults to `x1..xn` / `x, y, z`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vars: Vec<String>,
    pub base_cells: Vec<BoxSpec>,
    pub omega: BoxSpec,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<RectifyExpect>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_depth() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Regularity(RegularityScenario),
    Atlas(AtlasScenario),
    Counterexample(CounterexampleScenario),
    CoverBuild(CoverBuildScenario),
    CoverVerify(CoverVerifyScenario),
    Rectifiability(RectifiabilityScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Regularity(_) => "regularity",
            Scenario::Atlas(_) => "atlas",
            Scenario::Counterexample(_) => "counterexample",
            Scenario::CoverBuild(_) => "cover-build",
            Scenario::CoverVerify(_) => "cover-verify",
            Scenario::Rectifiability(_) => "rectifiability",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Scenario::Regularity(s) => s.name.as_deref(),
            Scenario::Atlas(s) => s.name.as_deref(),
            Scenario::Counterexample(s) => s.name.as_deref(),
            Scenario::CoverBuild(s) => s.name.as_deref(),
            Scenario::CoverVerify(s) => s.name.as_deref(),
            Scenario::Rectifiability(s) => s.name.as_deref(),
        }
    }

    pub fn outputs(&self) -> &Outputs {
        match self {
            Scenario::Regularity(s) => &s.outputs,
            Scenario::Atlas(s) => &s.outputs,
            Scenario::Counterexample(s) => &s.outputs,
            Scenario::CoverBuild(s) => &s.outputs,
            Scenario::CoverVerify(s) => &s.outputs,
            Scenario::Rectifiability(s) => &s.outputs,
        }
    }

    /// Applies `--grid`.
    pub fn override_grid(&mut self, grid: usize) {
        match self {
            Scenario::CoverBuild(s) => s.grid = grid,
            Scenario::CoverVerify(s) => s.grid = grid,
            Scenario::Atlas(s) => {
                if let Some(g) = &mut s.sample_grid {
                    g.n = grid;
                }
            }
            _ => {}
        }
    }

    /// Parses and checks everything that can be checked without running:
    /// the schema, expressions, boxes and projections.
    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Regularity(s) => {
                let set = s.set.build()?;
                for (i, c) in s.checks.iter().enumerate() {
                    if c.x.len() != set.dim() || c.v.len() + 1 != set.dim() {
                        bail!("check {i}: x must have {} and v {} coordinates", set.dim(), set.dim() - 1);
                    }
                    if !(c.epsilon > 0.0) {
                        bail!("check {i}: epsilon must be positive");
                    }
                }
            }
            Scenario::Atlas(s) => {
                s.set.build()?;
                if s.points.is_empty() && s.sample_grid.is_none() {
                    bail!("atlas needs `points` or `sample_grid`");
                }
                if let Some(g) = &s.sample_grid {
                    g.bbox.build()?;
                }
            }
            Scenario::Counterexample(s) => {
                if s.ladder.from >= s.ladder.to {
                    bail!("ladder.from must be below ladder.to");
                }
            }
            Scenario::CoverBuild(s) => {
                s.set.build()?;
                for p in &s.projections {
                    p.build()?;
                }
            }
            Scenario::CoverVerify(s) => {
                s.set.build()?;
                for p in &s.pieces {
                    p.set.build().with_context(|| format!("piece `{}`", p.label))?;
                }
            }
            Scenario::Rectifiability(s) => {
                s.family_expr()?;
                s.omega.build()?;
                for c in &s.base_cells {
                    c.build()?;
                }
            }
        }
        Ok(())
    }
}

impl RectifiabilityScenario {
    pub fn family_expr(&self) -> Result<DefinableExpr> {
        let names: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        let parsed = if names.is_empty() { parse(&self.family) } else { parse_with_vars(&self.family, &names) };
        parsed.with_context(|| format!("family `{}`", self.family))
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("schema error in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_build_from_json() {
        let s: SetSpec = serde_json::from_str(
            r#"{"kind": "union", "members": [
                {"kind": "atoms", "dim": 2, "atoms": ["x < 0", "y < 0"], "any": true},
                {"kind": "point", "at": [1, 1]},
                {"kind": "patch", "map": ["t", "t^2"], "params": {"lo": [0], "hi": [1]}}
            ]}"#,
        )
        .unwrap();
        let set = s.build().unwrap();
        assert!(set.contains(&[-1.0, 5.0]).unwrap());
        assert!(set.contains(&[1.0, 1.0]).unwrap());
        assert!(set.contains(&[0.5, 0.25]).unwrap());
        assert!(!set.contains(&[0.5, 0.5]).unwrap());
    }

    #[test]
    fn projections() {
        let ps: Vec<ProjectionSpec> =
            serde_json::from_str(r#"["vertical", "horizontal", {"lambda": [1.0]}, {"lambda": [0.5], "axis": 0}]"#).unwrap();
        let built: Vec<Projection> = ps.iter().map(|p| p.build().unwrap()).collect();
        assert_eq!(built[0], Projection::vertical());
        assert_eq!(built[1], Projection::horizontal());
        assert_eq!(built[2], Projection::planar(1.0));
        assert_eq!(built[3].axis(), 0);
        let bad: ProjectionSpec = serde_json::from_str(r#""diagonal""#).unwrap();
        assert!(bad.build().is_err());
        assert!(serde_json::from_str::<ProjectionSpec>(r#"{"lambda": [1], "tilt": 2}"#).is_err());
    }

    #[test]
    fn unknown_kinds_and_fields_are_rejected() {
        assert!(serde_json::from_str::<Scenario>(r#"{"kind": "nope"}"#).is_err());
        let ok = r#"{"kind": "counterexample", "lambda": [0, 0.5], "sign": "+"}"#;
        let s: Scenario = serde_json::from_str(ok).unwrap();
        assert_eq!(s.kind(), "counterexample");
        assert_eq!(s.outputs().report, "report.json");
        let extra = r#"{"kind": "counterexample", "lambda": [0, 0.5], "sign": "+", "seed": 3}"#;
        assert!(serde_json::from_str::<Scenario>(extra).is_err());
        let nested = r#"{"kind": "atoms", "dim": 2, "atoms": [], "bbox": {"lo": [0, 0], "hi": [1, 1], "mid": 0}}"#;
        assert!(serde_json::from_str::<SetSpec>(nested).is_err());
    }

    #[test]
    fn round_trip() {
        let text = r#"{"kind": "cover-build", "set": {"kind": "atoms", "dim": 2, "atoms": ["x^2 + y^2 < 1"]},
                       "projections": ["vertical", {"lambda": [1.0]}], "c_budget": 2}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn validation_catches_shapes() {
        let s: Scenario = serde_json::from_str(
            r#"{"kind": "regularity", "set": {"kind": "point", "at": [0, 0]},
                "checks": [{"x": [0, 0, 0], "v": [0], "epsilon": 0.3}]}"#,
        )
        .unwrap();
        assert!(s.validate().is_err());
        let s: Scenario =
            serde_json::from_str(r#"{"kind": "rectifiability", "family": "x^", "base_cells": [], "omega": {"lo": [0], "hi": [1]}}"#)
                .unwrap();
        assert!(s.validate().is_err());
    }
}
