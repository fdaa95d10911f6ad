//! Scenario execution. Every kind produces a [`Report`] whose `budgets`
//! list the asserted conditions; the process exit status is their
//! conjunction.

use anyhow::{Context, Result};
use regproj::counterexample::{blowup_profile, exp_ladder, verify_unbounded, BranchParams, Unboundedness};
use regproj::covers::{build_cover_2d, verify_regular_cover, Cover, CoverConfig};
use regproj::regularity::{
    check_regular, rectifiability_search, search_atlas, AtlasError, RectifyConfig, RectifyError, RegularityConfig, RegularityVerdict,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scenario::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Budget {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Budget { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub pass: bool,
    pub budgets: Vec<Budget>,
    pub result: Value,
    /// The scenario as run, with command-line overrides applied.
    pub scenario: Scenario,
}

/// Profile rows when the scenario produces a table.
pub struct Outcome {
    pub report: Report,
    pub csv: Option<String>,
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<Outcome> {
    let (result, budgets, csv) = match scenario {
        Scenario::Regularity(s) => regularity(s, seed)?,
        Scenario::Atlas(s) => atlas(s, seed)?,
        Scenario::Counterexample(s) => counterexample(s)?,
        Scenario::CoverBuild(s) => cover_build(s)?,
        Scenario::CoverVerify(s) => cover_verify(s)?,
        Scenario::Rectifiability(s) => rectifiability(s)?,
    };
    let report = Report {
        kind: scenario.kind().into(),
        name: scenario.name().map(str::to_owned),
        seed,
        pass: budgets.iter().all(|b| b.pass),
        budgets,
        result,
        scenario: scenario.clone(),
    };
    Ok(Outcome { report, csv })
}

type Parts = (Value, Vec<Budget>, Option<String>);

fn strip_sheets(v: RegularityVerdict) -> RegularityVerdict {
    match v {
        RegularityVerdict::WeakRegular { branches, .. } => RegularityVerdict::WeakRegular { branches, sheets: vec![] },
        RegularityVerdict::Regular { branches, c_min, witness, .. } => {
            RegularityVerdict::Regular { branches, c_min, witness, sheets: vec![] }
        }
        other => other,
    }
}

/// `regular`, `weak-regular`, `empty-intersection` or the failure reason.
pub fn verdict_label(v: &RegularityVerdict) -> String {
    match v {
        RegularityVerdict::EmptyIntersection => "empty-intersection".into(),
        RegularityVerdict::WeakRegular { .. } => "weak-regular".into(),
        RegularityVerdict::Regular { .. } => "regular".into(),
        RegularityVerdict::Fail { reason, .. } => reason.to_string(),
    }
}

fn regularity_config(resolution: Option<usize>, axis: Option<usize>, seed: u64) -> RegularityConfig {
    let base = RegularityConfig::default();
    RegularityConfig { seed, axis, resolution: resolution.unwrap_or(base.resolution), ..base }
}

fn regularity(s: &RegularityScenario, seed: u64) -> Result<Parts> {
    let set = s.set.build()?;
    let cfg = regularity_config(s.resolution, s.axis, seed);
    let mut rows = Vec::new();
    let mut budgets = Vec::new();
    for (i, c) in s.checks.iter().enumerate() {
        let verdict =
            check_regular(&set, &c.x, &c.v, c.epsilon, c.c_budget.unwrap_or(f64::INFINITY), &cfg).with_context(|| format!("check {i}"))?;
        let label = verdict_label(&verdict);
        if let Some(budget) = c.c_budget {
            let detail = match &verdict {
                RegularityVerdict::Regular { c_min, .. } => format!("C_min = {c_min}"),
                other => verdict_label(other),
            };
            budgets.push(Budget::new(
                format!("check[{i}] regular with C ≤ {budget}"),
                matches!(verdict, RegularityVerdict::Regular { .. } | RegularityVerdict::EmptyIntersection),
                detail,
            ));
        }
        if let Some(want) = &c.expect {
            // an unbudgeted strong check is a weak check plus a reported constant
            let ok = *want == label || (want == "weak-regular" && label == "regular");
            budgets.push(Budget::new(format!("check[{i}] verdict {want}"), ok, label.clone()));
        }
        rows.push(json!({
            "x": c.x,
            "v": c.v,
            "epsilon": c.epsilon,
            "label": label,
            "verdict": strip_sheets(verdict),
        }));
    }
    Ok((json!({ "checks": rows }), budgets, None))
}

fn grid_points(g: &SampleGrid) -> Result<Vec<Vec<f64>>> {
    let b = g.bbox.build()?;
    let n = g.n.max(1);
    let axis = |i: usize| -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (b.lo[i] + b.hi[i])];
        }
        (0..n).map(|k| b.lo[i] + (b.hi[i] - b.lo[i]) * k as f64 / (n - 1) as f64).collect()
    };
    let mut out = vec![Vec::new()];
    for i in 0..b.dim() {
        let a = axis(i);
        out = out.into_iter().flat_map(|p: Vec<f64>| a.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    Ok(out)
}

fn atlas(s: &AtlasScenario, seed: u64) -> Result<Parts> {
    let set = s.set.build()?;
    let mut points = s.points.clone();
    if let Some(g) = &s.sample_grid {
        points.extend(grid_points(g)?);
    }
    let cfg = regularity_config(s.resolution, None, seed);
    match search_atlas(&set, &points, &s.directions, &s.ladder, s.c_budget, &cfg) {
        Ok(atlas) => {
            let budget = Budget::new("atlas covers every sample point", true, format!("k = {}, ε₀ = {}", atlas.k(), atlas.epsilon0));
            Ok((json!({ "outcome": "found", "atlas": atlas }), vec![budget], None))
        }
        Err(AtlasError::Uncovered(f)) => {
            let budget = Budget::new(
                "atlas covers every sample point",
                false,
                format!("{} point(s) uncovered at ε = {}", f.uncovered.len(), f.epsilon),
            );
            Ok((json!({ "outcome": "uncovered", "failure": f }), vec![budget], None))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn profile_csv(rows: &[regproj::counterexample::ProfileRow]) -> String {
    let mut out = String::from("s,t_s,ratio\n");
    for r in rows {
        out.push_str(&format!("{:e},{:e},{:e}\n", r.s, r.t_s, r.ratio));
    }
    out
}

fn counterexample(s: &CounterexampleScenario) -> Result<Parts> {
    let p = BranchParams::new(s.lambda[0], s.lambda[1], s.sign);
    let profile = blowup_profile(&p, &exp_ladder(s.ladder.from..=s.ladder.to))?;
    let max_residual = profile.rows.iter().map(|r| p.residual(r.s, r.t_s)).fold(0.0, f64::max);
    let mut budgets = Vec::new();
    if let Some([lo, hi]) = s.alpha {
        let a = profile.alpha;
        budgets.push(Budget::new(format!("α ∈ [{lo}, {hi}]"), (lo..=hi).contains(&a), format!("α = {a}")));
    }
    if let Some([lo, hi]) = s.beta {
        let b = profile.beta;
        budgets.push(Budget::new(format!("β ∈ [{lo}, {hi}]"), (lo..=hi).contains(&b), format!("β = {b}")));
    }
    let unbounded = match s.unbounded_budget {
        Some(c) => {
            let u = verify_unbounded(&p, c, s.s_min)?;
            let (ok, detail) = match &u {
                Unboundedness::Witness { s, ratio, .. } => (true, format!("ratio {ratio} at s = {s:e}")),
                Unboundedness::Refuted { max_ratio, .. } => (false, format!("max ratio {max_ratio}")),
            };
            budgets.push(Budget::new(format!("ratio exceeds {c}"), ok, detail));
            Some(u)
        }
        None => None,
    };
    let csv = profile_csv(&profile.rows);
    let result = json!({
        "profile": profile,
        "max_residual": max_residual,
        "unbounded": unbounded,
    });
    Ok((result, budgets, Some(csv)))
}

/// Rebuilds the cover a cover scenario describes.
pub fn cover_of(s: &Scenario) -> Result<Option<Cover>> {
    Ok(match s {
        Scenario::CoverBuild(s) => {
            let projections = s.projections.iter().map(ProjectionSpec::build).collect::<Result<Vec<_>>>()?;
            Some(build_cover_2d(&s.set.build()?, &projections, &CoverConfig::default())?)
        }
        Scenario::CoverVerify(s) => {
            let pieces = s.pieces.iter().map(|p| Ok((p.label.clone(), p.set.build()?))).collect::<Result<Vec<_>>>()?;
            Some(Cover::explicit(s.set.build()?, pieces)?)
        }
        _ => None,
    })
}

fn verification_budget(r: &regproj::covers::CoverReport) -> Budget {
    let detail = match &r.witness {
        Some(w) => format!("coverage {}, Ĉ = {} at {:?}", r.coverage, r.c_hat, w.point),
        None => format!("coverage {}, Ĉ = {}", r.coverage, r.c_hat),
    };
    Budget::new(format!("full coverage with Ĉ ≤ {}", r.c_budget), r.pass, detail)
}

fn cover_build(s: &CoverBuildScenario) -> Result<Parts> {
    let cover = cover_of(&Scenario::CoverBuild(s.clone()))?.expect("cover scenario");
    let mut budgets = Vec::new();
    if s.require_complete {
        let detail = match cover.uncovered.len() {
            0 => "no uncovered fiber".to_string(),
            n => format!("{n} uncovered fiber(s)"),
        };
        budgets.push(Budget::new("constructor covers every fiber", cover.uncovered.is_empty(), detail));
    }
    let verification = match s.c_budget {
        Some(c) => {
            let r = verify_regular_cover(&cover, s.grid, c, s.density)?;
            budgets.push(verification_budget(&r));
            Some(r)
        }
        None => None,
    };
    let result = json!({
        "cover": cover.summary(),
        "uncovered_fibers": cover.uncovered,
        "verification": verification,
    });
    Ok((result, budgets, None))
}

fn cover_verify(s: &CoverVerifyScenario) -> Result<Parts> {
    let cover = cover_of(&Scenario::CoverVerify(s.clone()))?.expect("cover scenario");
    let r = verify_regular_cover(&cover, s.grid, s.c_budget, s.density)?;
    let budgets = vec![verification_budget(&r)];
    Ok((json!({ "cover": cover.summary(), "verification": r }), budgets, None))
}

fn rectifiability(s: &RectifiabilityScenario) -> Result<Parts> {
    let f = s.family_expr()?;
    let cells = s.base_cells.iter().map(BoxSpec::build).collect::<Result<Vec<_>>>()?;
    let omega = s.omega.build()?;
    let outcome = rectifiability_search(&f, &cells, &omega, s.max_depth, &RectifyConfig::default());
    let mut budgets = Vec::new();
    let result = match &outcome {
        Ok(r) => json!({ "outcome": "rectifiable", "report": r }),
        Err(RectifyError::DepthExhausted { cell, depth }) => {
            json!({ "outcome": "depth-exhausted", "cell": cell, "depth": depth })
        }
        Err(e) => return Err(e.clone().into()),
    };
    if let Some(want) = &s.expect {
        let got = match outcome {
            Ok(_) => RectifyExpect::Rectifiable,
            Err(_) => RectifyExpect::DepthExhausted,
        };
        budgets.push(Budget::new(format!("outcome {}", expect_name(want)), got == *want, expect_name(&got)));
    }
    if let Some(c) = s.c_budget {
        let (ok, detail) = match &outcome {
            Ok(r) => (r.c <= c, format!("c = {}", r.c)),
            Err(_) => (false, "no finite bound".to_string()),
        };
        budgets.push(Budget::new(format!("c ≤ {c}"), ok, detail));
    }
    Ok((result, budgets, None))
}

fn expect_name(e: &RectifyExpect) -> String {
    match e {
        RectifyExpect::Rectifiable => "rectifiable".into(),
        RectifyExpect::DepthExhausted => "depth-exhausted".into(),
    }
}
