//! Real root isolation for one-variable restrictions.
//!
//! A uniform scan brackets sign changes. Between two samples of equal
//! sign whose derivatives point toward each other, the extremum is located
//! by bisection on `h'`; if it crosses zero the pair is split into two
//! brackets, and if it merely touches zero it is reported as a touching
//! root. Brackets are refined with safeguarded Newton. The whole scan is
//! repeated at twice the density and the root counts must agree.

use super::UnaryRestriction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    /// Samples per scan of the interval.
    pub density: usize,
    /// Upper limit for density doubling on inconsistent scans.
    pub max_density: usize,
    /// Roots closer than `merge_rel · (hi - lo)` are merged.
    pub merge_rel: f64,
    /// A local extremum with `|h| <= touch_tol` counts as a touching root.
    pub touch_tol: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig { density: 1024, max_density: 1 << 16, merge_rel: 1e-9, touch_tol: 1e-10 }
    }
}

impl RootConfig {
    pub fn with_density(density: usize) -> Self {
        RootConfig { density, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    /// Sign change.
    Simple,
    /// Extremum touching zero without a sign change (tangency).
    Touching,
    /// Several roots closer than the merge tolerance.
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub t: f64,
    pub kind: RootKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("bracketing inconsistent up to density {density}; increase the scan density")]
    ScanTooCoarse { density: usize },
    #[error("restriction vanishes identically near t = {t}")]
    Continuum { t: f64 },
    #[error("invalid interval ({lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },
}

#[derive(Clone, Copy)]
struct Sample {
    t: f64,
    h: f64,
    dh: f64,
}

/// Sorted roots of `h` in the open interval `(lo, hi)`.
///
/// Roots are separated by more than `max(tol, merge_rel·(hi-lo))`; closer
/// roots are merged into one flagged [`RootKind::Merged`].
pub fn isolate_roots(h: &UnaryRestriction, lo: f64, hi: f64, tol: f64, cfg: &RootConfig) -> Result<Vec<Root>, RootError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(RootError::InvalidInterval { lo, hi });
    }
    let merge = tol.max(cfg.merge_rel * (hi - lo));
    let mut n = cfg.density.max(4);
    let mut coarse = scan(h, lo, hi, n, merge, cfg)?;
    loop {
        let fine = scan(h, lo, hi, 2 * n, merge, cfg)?;
        if fine.len() == coarse.len() {
            return Ok(fine);
        }
        n *= 2;
        if 2 * n > cfg.max_density.max(cfg.density) {
            return Err(RootError::ScanTooCoarse { density: 2 * n });
        }
        coarse = fine;
    }
}

fn scan(h: &UnaryRestriction, lo: f64, hi: f64, n: usize, merge: f64, cfg: &RootConfig) -> Result<Vec<Root>, RootError> {
    let pitch = (hi - lo) / n as f64;
    let samples: Vec<Option<Sample>> = (0..=n)
        .map(|k| {
            let t = if k == n { hi } else { lo + k as f64 * pitch };
            h.eval_deriv(t).ok().map(|(v, d)| Sample { t, h: v, dh: d })
        })
        .collect();

    let mut flat_run = 0usize;
    for s in &samples {
        match s {
            Some(s) if s.h.abs() <= cfg.touch_tol && s.dh.abs() * pitch <= cfg.touch_tol => {
                flat_run += 1;
                if flat_run >= 4 {
                    return Err(RootError::Continuum { t: s.t });
                }
            }
            _ => flat_run = 0,
        }
    }

    let mut roots: Vec<Root> = Vec::new();
    for k in 0..n {
        let (Some(a), Some(b)) = (samples[k], samples[k + 1]) else {
            continue;
        };
        if a.h == 0.0 {
            if a.t > lo {
                roots.push(Root { t: a.t, kind: RootKind::Simple });
            }
            continue;
        }
        if b.h == 0.0 {
            continue;
        }
        if a.h.signum() != b.h.signum() {
            roots.push(Root { t: refine(h, a, b), kind: RootKind::Simple });
            continue;
        }
        // Same sign: look for an extremum heading toward zero.
        let toward_a = a.dh * a.h.signum() < 0.0;
        let away_b = b.dh * b.h.signum() > 0.0;
        if toward_a && away_b {
            if let Some(c) = extremum(h, a, b) {
                if c.h.signum() != a.h.signum() && c.h != 0.0 {
                    roots.push(Root { t: refine(h, a, c), kind: RootKind::Simple });
                    roots.push(Root { t: refine(h, c, b), kind: RootKind::Simple });
                } else if c.h.abs() <= cfg.touch_tol {
                    roots.push(Root { t: c.t, kind: RootKind::Touching });
                }
            }
        }
    }
    roots.retain(|r| r.t > lo && r.t < hi);
    roots.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(merge_close(roots, merge))
}

fn merge_close(roots: Vec<Root>, merge: f64) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last_mut() {
            Some(last) if r.t - last.t <= merge => {
                last.t = 0.5 * (last.t + r.t);
                last.kind = RootKind::Merged;
            }
            _ => out.push(r),
        }
    }
    out
}

/// Refines a root of `h` inside `[a, b]` when the endpoint values differ
/// in sign (or one of them vanishes).
pub(crate) fn refine_bracket(h: &UnaryRestriction, a: f64, b: f64) -> Option<f64> {
    let (ha, da) = h.eval_deriv(a).ok()?;
    let (hb, db) = h.eval_deriv(b).ok()?;
    if ha == 0.0 {
        return Some(a);
    }
    if hb == 0.0 {
        return Some(b);
    }
    if ha.signum() == hb.signum() {
        return None;
    }
    Some(refine(h, Sample { t: a, h: ha, dh: da }, Sample { t: b, h: hb, dh: db }))
}

/// Bisection on `h'` between two samples whose derivatives differ in sign.
fn extremum(h: &UnaryRestriction, a: Sample, b: Sample) -> Option<Sample> {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..80 {
        let t = 0.5 * (lo.t + hi.t);
        if t <= lo.t || t >= hi.t {
            break;
        }
        let (v, d) = h.eval_deriv(t).ok()?;
        let m = Sample { t, h: v, dh: d };
        if v.signum() != a.h.signum() || v == 0.0 {
            return Some(m);
        }
        if d.signum() == lo.dh.signum() {
            lo = m;
        } else {
            hi = m;
        }
    }
    let t = 0.5 * (lo.t + hi.t);
    let (v, d) = h.eval_deriv(t).ok()?;
    Some(Sample { t, h: v, dh: d })
}

/// Safeguarded Newton (rtsafe) on a sign-change bracket.
fn refine(h: &UnaryRestriction, a: Sample, b: Sample) -> f64 {
    // h(neg) < 0 < h(pos); the two may be in either order
    let (mut neg, mut pos) = if a.h < 0.0 { (a.t, b.t) } else { (b.t, a.t) };
    let mut x = 0.5 * (a.t + b.t);
    let mut dx_old = (b.t - a.t).abs();
    for _ in 0..200 {
        let Ok((v, d)) = h.eval_deriv(x) else {
            x = 0.5 * (neg + pos);
            continue;
        };
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        if (pos - neg).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = x - v / d;
        let inside = d != 0.0 && (newton - neg) * (newton - pos) < 0.0;
        let next = if inside && (2.0 * v).abs() <= (dx_old * d).abs() { newton } else { 0.5 * (neg + pos) };
        dx_old = (next - x).abs();
        if next == x {
            break;
        }
        x = next;
    }
    x
}
