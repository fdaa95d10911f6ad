//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Runtime limits are part of each criterion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regproj::cones::{cone_complement_ratio, cone_contains, Cone, Projection};
use regproj::counterexample::{
    asymptotic_exponent, blowup_profile, default_ladder, gradient_ratio, gradient_ratio_fd, solve_branch, verify_unbounded, BranchParams,
    Sign, Unboundedness,
};
use regproj::covers::{build_cover_2d, lattice, verify_regular_cover, Cover, CoverMetric, WitnessTag};
use regproj::regularity::{
    check_regular, check_weak_regular, rectifiability_search, FailReason, RectifyConfig, RectifyError, RegularityConfig, RegularityVerdict,
};
use regproj::sets::{Aabb, DefinableSet};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn square() -> DefinableSet {
    let b = Aabb::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
    DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1"], Some(b)).unwrap()
}

fn square_piece(extra: &str) -> DefinableSet {
    let b = Aabb::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
    DefinableSet::from_atoms(2, &["x > 0", "x < 1", "y > -1", "y < 1", extra], Some(b)).unwrap()
}

fn circle() -> DefinableSet {
    let b = Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    DefinableSet::from_atoms(2, &["x^2 + y^2 = 1"], Some(b)).unwrap()
}

fn annulus() -> DefinableSet {
    let b = Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    DefinableSet::from_atoms(2, &["x^2 + y^2 > 0.25", "x^2 + y^2 < 1"], Some(b)).unwrap()
}

/// Closed-form distance from a point of the open box to its complement.
fn box_distance(p: &[f64], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    (0..2).map(|i| (p[i] - lo[i]).min(hi[i] - p[i])).fold(f64::INFINITY, f64::min).max(0.0)
}

fn c1() -> Outcome {
    let cover = Cover::explicit(square(), vec![("y > -1/2".into(), square_piece("y > -0.5")), ("y < 1/2".into(), square_piece("y < 0.5"))])
        .map_err(err)?;
    let r = verify_regular_cover(&cover, 200, 1.0 + 1e-6, 400).map_err(err)?;
    // oracle: box distances on the same lattice
    let b = cover.ambient.bbox().unwrap();
    let mut oracle: f64 = 0.0;
    for p in lattice(b, 200) {
        let du = box_distance(&p, [0.0, -1.0], [1.0, 1.0]);
        let d1 = if p[1] > -0.5 { box_distance(&p, [0.0, -0.5], [1.0, 1.0]) } else { 0.0 };
        let d2 = if p[1] < 0.5 { box_distance(&p, [0.0, -1.0], [1.0, 0.5]) } else { 0.0 };
        oracle = oracle.max(du / d1.max(d2));
    }
    ensure(r.coverage == 1.0, format!("coverage {}", r.coverage))?;
    ensure((r.c_hat - oracle).abs() <= 1e-6, format!("Ĉ = {} vs oracle {oracle}", r.c_hat))?;
    ensure((r.c_hat - 1.0).abs() <= 1e-6, format!("Ĉ = {}", r.c_hat))?;
    Ok(format!("coverage 1.0, Ĉ = {:.9} (oracle {oracle}), min ratio {:.9}, {} points", r.c_hat, r.min_ratio, r.points))
}

/// `min_x √((x − a)² + x⁴)` by golden section; the objective is convex.
fn parabola_distance(a: f64) -> f64 {
    let f = |x: f64| (x - a).powi(2) + x.powi(4);
    let (mut lo, mut hi) = (0.0f64, a);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).sqrt()
}

fn c2() -> Outcome {
    let cover = Cover::explicit(square(), vec![("y < x^2".into(), square_piece("y < x^2")), ("y > -x^2".into(), square_piece("y > -x^2"))])
        .map_err(err)?;
    let grid = 99;
    let pts = lattice(cover.ambient.bbox().unwrap(), grid);
    let metric = CoverMetric::new(&cover, 400).map_err(err)?;
    let mut lines = Vec::new();
    for a in [0.1, 0.05, 0.01] {
        let p =
            pts.iter().find(|p| (p[0] - a).abs() < 1e-12 && p[1].abs() < 1e-12).ok_or_else(|| format!("grid {grid} misses ({a}, 0)"))?;
        let (ratio, _, _) = metric.ratio(p).ok_or_else(|| format!("({a}, 0) uncovered"))?;
        let oracle = a / parabola_distance(a);
        ensure(ratio >= (1.0 / a) * 0.95, format!("ratio {ratio} at a = {a}"))?;
        ensure((ratio - oracle).abs() / oracle < 0.05, format!("ratio {ratio} vs oracle {oracle} at a = {a}"))?;
        lines.push(format!("a={a}: {ratio:.3}"));
    }
    for budget in [2.0, 10.0, 50.0, 99.0, 99.999] {
        let r = verify_regular_cover(&cover, grid, budget, 400).map_err(err)?;
        ensure(!r.pass, format!("budget {budget} passed with Ĉ = {}", r.c_hat))?;
    }
    Ok(lines.join(", ") + "; every budget < 100 fails")
}

fn c3() -> Outcome {
    let exact = BranchParams::new(0.0, 0.5, Sign::Plus);
    let ladder = default_ladder();
    let mut worst: f64 = 0.0;
    for &s in &ladder {
        let r = gradient_ratio(&exact, s).map_err(err)?;
        worst = worst.max((r - s.ln().abs()).abs() / s.ln().abs());
    }
    ensure(worst <= 1e-10, format!("log law off by {worst:e}"))?;
    let tilted = blowup_profile(&BranchParams::new(0.05, 0.3, Sign::Plus), &ladder).map_err(err)?;
    ensure((0.95..=1.05).contains(&tilted.beta), format!("β = {}", tilted.beta))?;
    ensure((0.8..=1.2).contains(&tilted.alpha), format!("α = {}", tilted.alpha))?;
    let w = verify_unbounded(&exact, 100.0, 1e-300).map_err(err)?;
    let Unboundedness::Witness { s, ratio, .. } = w else { return Err(format!("no witness: {w:?}")) };
    Ok(format!("max rel err {worst:.1e}; tilted α = {:.4}, β = {:.4}; witness ratio {ratio:.3} at s = {s:.3e}", tilted.alpha, tilted.beta))
}

fn c4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_res: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for k in 0..100 {
        let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let l1 = rng.gen_range(-0.2..0.2);
        let l2 = rng.gen_range(0.1..0.9) * sign.value();
        let s = (-rng.gen_range(2.0..30.0f64)).exp();
        let p = BranchParams::new(l1, l2, sign);
        let t = solve_branch(&p, s).map_err(err)?;
        worst_res = worst_res.max(p.residual(s, t));
        let g = gradient_ratio(&p, s).map_err(err)?;
        let fd = gradient_ratio_fd(&p, s, 1e-6).map_err(err)?;
        worst_fd = worst_fd.max((g - fd).abs() / g.abs());
    }
    ensure(worst_res <= 1e-12, format!("residual {worst_res:e}"))?;
    ensure(worst_fd <= 1e-3, format!("finite differences off by {worst_fd:e}"))?;
    Ok(format!("100 points, max residual {worst_res:.1e}, max fd gap {worst_fd:.1e}"))
}

/// `max |f'|/|f|` of the sheet `t(v') = −2v'/(1 + v'²)` through `(1, 0)`.
fn tilted_circle_oracle(v: f64, eps: f64) -> f64 {
    (0..=100_000)
        .map(|k| v - eps + 2.0 * eps * k as f64 / 100_000.0)
        .map(|w| ((1.0 - w * w) / (w * (1.0 + w * w))).abs())
        .fold(0.0, f64::max)
}

fn c5() -> Outcome {
    let set = circle();
    let cfg = RegularityConfig::default();
    let at = |x: [f64; 2], v: f64| check_regular(&set, &x, &[v], 0.3, f64::INFINITY, &cfg).map_err(err);

    // sheets ±1/√(1+v'²): |f'|/|f| = |v'|/(1+v'²), largest at the rim
    let oracle0 = 0.3 / 1.09;
    let RegularityVerdict::Regular { branches, c_min, .. } = at([0.0, 0.0], 0.0)? else {
        return Err("(0,0), v=0 not regular".into());
    };
    ensure(branches == 2, format!("{branches} branches at (0,0)"))?;
    ensure((c_min - oracle0).abs() <= 1e-3, format!("C_min {c_min} vs {oracle0}"))?;
    let v = at([1.0, 0.0], 0.0)?;
    ensure(v.fail_reason() == Some(FailReason::BranchVanishes), format!("(1,0), v=0: {v:?}"))?;
    let oracle1 = tilted_circle_oracle(1.0, 0.3);
    let RegularityVerdict::Regular { c_min: c1, .. } = at([1.0, 0.0], 1.0)? else {
        return Err("(1,0), v=1 not regular".into());
    };
    ensure((c1 - oracle1).abs() <= 1e-3, format!("C_min {c1} vs {oracle1}"))?;
    ensure((c1 - 0.4890).abs() <= 1e-3, format!("C_min {c1}"))?;
    let e = at([2.0, 0.0], 0.0)?;
    ensure(e == RegularityVerdict::EmptyIntersection, format!("(2,0): {e:?}"))?;
    Ok(format!("C_min {c_min:.5} (oracle {oracle0:.5}), {c1:.5} (oracle {oracle1:.5}), branch-vanishes, empty"))
}

fn c6() -> Outcome {
    let set = circle();
    let cfg = RegularityConfig::default();
    let ladder = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05];
    let mut configs: Vec<([f64; 2], f64)> = vec![([0.0, 0.0], 0.0), ([1.0, 0.0], 0.0), ([1.0, 0.0], 1.0), ([2.0, 0.0], 0.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        configs.push(([rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], rng.gen_range(-1.5..1.5)));
    }
    let mut successes = 0;
    for (x, v) in &configs {
        let mut seen_success = None;
        for &eps in &ladder {
            let ok = check_weak_regular(&set, x, &[*v], eps, &cfg).map_err(err)?.is_success();
            if let Some(big) = seen_success {
                ensure(ok, format!("x = {x:?}, v = {v}: succeeds at ε = {big}, fails at ε = {eps}"))?;
            }
            if ok && seen_success.is_none() {
                seen_success = Some(eps);
            }
            successes += ok as usize;
        }
    }
    Ok(format!("{} configurations × {} apertures, {successes} successes, no reversal", configs.len(), ladder.len()))
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let proj = Projection::vertical();
    let mut lines = Vec::new();
    for eps in [0.1f64, 0.3, 0.5] {
        let bound = 1.0 + 1.0 / eps;
        let sharp = (1.0 + eps * eps).sqrt() / eps;
        let mut tested = 0;
        let mut sup: f64 = 0.0;
        while tested < 100_000 / 3 + 1 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let cone = Cone::new(x.to_vec(), vec![0.0], eps).map_err(err)?;
            if cone_contains(&cone, &y) || y[0] == x[0] {
                continue;
            }
            let r = cone_complement_ratio(&x, &y, &proj).map_err(err)?;
            ensure(r <= bound, format!("ratio {r} > {bound} at ε = {eps}"))?;
            sup = sup.max(r);
            tested += 1;
        }
        ensure(sup <= sharp + 1e-12, format!("random sup {sup} above {sharp}"))?;
        // on the cone boundary |v'| = ε the ratio is exactly √(1+ε²)/ε
        let mut rim: f64 = 0.0;
        for _ in 0..1000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let t: f64 = rng.gen_range(0.01..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let side = if rng.gen_bool(0.5) { eps } else { -eps };
            let y = [x[0] + t * side, x[1] + t];
            rim = rim.max(cone_complement_ratio(&x, &y, &proj).map_err(err)?);
        }
        ensure((rim - sharp).abs() <= 1e-6, format!("rim sup {rim} vs {sharp}"))?;
        lines.push(format!("ε={eps}: sup {sup:.4} ≤ {bound:.1}, rim {rim:.6}"));
    }
    Ok(lines.join("; "))
}

const ANNULUS_C_BOUND: f64 = 1.5;

fn c8() -> Outcome {
    let u = annulus();
    let lambdas = [Projection::vertical(), Projection::horizontal(), Projection::planar(1.0)];
    let cover = build_cover_2d(&u, &lambdas, &Default::default()).map_err(err)?;
    let r2 = 2f64.sqrt();
    let oracles = [vec![-1.0, -0.5, 0.5, 1.0], vec![-1.0, -0.5, 0.5, 1.0], vec![-r2, -r2 / 2.0, r2 / 2.0, r2]];
    for (j, want) in oracles.iter().enumerate() {
        let got: Vec<f64> = cover.projections[j].discriminant.values.iter().map(|c| c.value).collect();
        ensure(got.len() == want.len(), format!("projection {j}: discriminant {got:?}"))?;
        for (g, w) in got.iter().zip(want) {
            ensure((g - w).abs() <= 1e-6, format!("projection {j}: {g} vs {w}"))?;
        }
    }
    ensure(cover.pieces.iter().all(|p| p.witness == WitnessTag::GraphBand), "a piece lacks a graph-band witness")?;
    ensure(cover.uncovered.is_empty(), format!("uncovered fibers {:?}", cover.uncovered))?;
    let r = verify_regular_cover(&cover, 100, ANNULUS_C_BOUND, 400).map_err(err)?;
    ensure(r.coverage == 1.0, format!("coverage {}", r.coverage))?;
    ensure(r.c_hat.is_finite() && r.c_hat <= ANNULUS_C_BOUND, format!("Ĉ = {}", r.c_hat))?;

    let vertical = build_cover_2d(&u, &[Projection::vertical()], &Default::default()).map_err(err)?;
    let fibers: Vec<f64> = vertical.uncovered.iter().map(|f| f.value).collect();
    ensure(
        fibers.len() == 2 && (fibers[0] + 0.5).abs() < 1e-6 && (fibers[1] - 0.5).abs() < 1e-6,
        format!("vertical alone reports {fibers:?}"),
    )?;
    Ok(format!(
        "{} graph bands, discriminants within 1e-6, coverage 1.0, Ĉ = {:.4} ≤ {ANNULUS_C_BOUND}; vertical alone misses x = ±1/2",
        cover.pieces.len(),
        r.c_hat
    ))
}

fn c9() -> Outcome {
    let cell = |lo: f64, hi: f64| Aabb::new(vec![lo], vec![hi]).unwrap();
    let cfg = RectifyConfig::default();
    let lin = regproj::expr::parse("x*(1 + y)").map_err(err)?;
    let pow = regproj::expr::parse("x^y").map_err(err)?;
    let a = rectifiability_search(&lin, &[cell(0.0, 1.0)], &cell(0.0, 1.0), 12, &cfg).map_err(err)?;
    ensure(a.c <= 1.0 + 1e-6, format!("x(1+y): c = {}", a.c))?;
    let b = rectifiability_search(&pow, &[cell(0.1, 1.0)], &cell(1.0, 2.0), 12, &cfg).map_err(err)?;
    // ∂_y x^y / x^y = ln x, largest in size at x = 0.1
    let oracle = 0.1f64.ln().abs();
    ensure((b.c - oracle).abs() / oracle <= 0.01, format!("x^y on (0.1,1): c = {} vs {oracle}", b.c))?;
    match rectifiability_search(&pow, &[cell(0.0, 1.0)], &cell(1.0, 2.0), 12, &cfg) {
        Err(RectifyError::DepthExhausted { depth: 12, cell }) => {
            Ok(format!("c = {:.9}, c = {:.6} (|ln 0.1| = {oracle:.6}), depth exhausted at {:?}", a.c, b.c, cell.lo))
        }
        other => Err(format!("x^y on (0,1): {other:?}")),
    }
}

fn c10() -> Outcome {
    let ts: Vec<f64> = (0..=300).map(|k| 10f64.powf(3.0 + 3.0 * k as f64 / 300.0)).collect();
    let poly: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 5.0 * t.powf(1.5) + t)).collect();
    let fit = asymptotic_exponent(&poly).map_err(err)?;
    ensure((fit.r - 1.5).abs() <= 0.01, format!("r = {}", fit.r))?;
    ensure((fit.c - 5.0).abs() <= 0.05, format!("c = {}", fit.c))?;
    ensure(fit.log_power == 0 && !fit.c_drift, format!("power law flagged: {fit:?}"))?;
    let logs: Vec<(f64, f64)> = ts.iter().map(|&t| (t, t.ln())).collect();
    let lf = asymptotic_exponent(&logs).map_err(err)?;
    ensure(lf.log_power != 0 || lf.c_drift, format!("ln t not flagged: {lf:?}"))?;
    Ok(format!("r = {:.5}, c = {:.5}; ln t flagged (log power {}, drift {})", fit.r, fit.c, lf.log_power, lf.c_drift))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome, u64); 10] =
        [(1, c1, 5), (2, c2, 5), (3, c3, 2), (4, c4, 5), (5, c5, 2), (6, c6, 30), (7, c7, 5), (8, c8, 30), (9, c9, 10), (10, c10, 1)];
    let mut failed = 0;
    for (n, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if took <= Duration::from_secs(limit) {
                Ok(d)
            } else {
                Err(format!("{d}; runtime {took:.2?} over {limit} s"))
            }
        });
        match outcome {
            Ok(d) => println!("PASS criterion {n}: {d} [{took:.2?}]"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {d} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
