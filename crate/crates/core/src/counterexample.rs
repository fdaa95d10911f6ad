//! The non polynomially bounded counterexample
//! `X = {(x, ±a x^{a+1}, x^{a+1}) : x > 0}`.
//!
//! Along the curve `x(s) = (s, 0, 0)` a sheet of the cone intersection is
//! `t_s = (s + λ₁ t_s)^{σλ₂+1}` with `t_s → 0`, and differentiating in `λ₂`
//! gives
//!
//! ```text
//! (∂t/∂λ₂ / t) · (1 − (σλ₂+1) λ₁ B^{σλ₂}) = σ ln B,   B = s + λ₁ t,
//! ```
//!
//! so the log-derivative grows like `|ln s|` and no uniform regularity
//! constant exists.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which of the two sheets `±a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+", alias = "plus")]
    Plus,
    #[serde(rename = "-", alias = "minus")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CounterexampleError {
    #[error("exponent σλ₂ + 1 = {0} must exceed 1")]
    BadExponent(f64),
    #[error("s = {0} must lie in (0, 1)")]
    BadS(f64),
    #[error("no convergence at s = {s}")]
    NoConvergence { s: f64 },
    #[error("base s + λ₁t = {base} is not positive at s = {s}")]
    DomainViolation { s: f64, base: f64 },
    #[error("prefactor {factor} vanishes at s = {s}")]
    DegenerateFactor { s: f64, factor: f64 },
    #[error("ladder must be strictly decreasing in (0, 1) with at least {min} rungs")]
    BadLadder { min: usize },
    #[error("samples span {decades:.2} decades, need 3")]
    InsufficientSpan { decades: f64 },
    #[error("samples must have positive finite t and finite f")]
    BadSamples,
}

/// `λ = (λ₁, λ₂)` with the sheet sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub lambda: [f64; 2],
    pub sign: Sign,
}

impl BranchParams {
    pub fn new(lambda1: f64, lambda2: f64, sign: Sign) -> Self {
        BranchParams { lambda: [lambda1, lambda2], sign }
    }

    /// `σλ₂ + 1`.
    pub fn exponent(&self) -> f64 {
        self.sign.value() * self.lambda[1] + 1.0
    }

    fn validate(&self) -> Result<f64, CounterexampleError> {
        let q = self.exponent();
        if !(q > 1.0 && q.is_finite() && self.lambda[0].is_finite()) {
            return Err(CounterexampleError::BadExponent(q));
        }
        Ok(q)
    }

    /// `t − (s + λ₁t)^q`, scaled by `t` for a relative residual.
    pub fn residual(&self, s: f64, t: f64) -> f64 {
        let base = s + self.lambda[0] * t;
        (t - base.powf(self.exponent())).abs() / t.abs().max(f64::MIN_POSITIVE)
    }
}

/// The sheet `t_s` of `t = (s + λ₁t)^{σλ₂+1}` that tends to 0 with `s`.
pub fn solve_branch(p: &BranchParams, s: f64) -> Result<f64, CounterexampleError> {
    let q = p.validate()?;
    if !(s > 0.0 && s < 1.0) {
        return Err(CounterexampleError::BadS(s));
    }
    let l1 = p.lambda[0];
    let g = |t: f64| -> Result<(f64, f64), CounterexampleError> {
        let base = s + l1 * t;
        if base <= 0.0 {
            return Err(CounterexampleError::DomainViolation { s, base });
        }
        let bq1 = base.powf(q - 1.0);
        Ok((t - base * bq1, 1.0 - q * l1 * bq1))
    };

    // Newton from the λ₁ = 0 closed form
    let mut t = s.powf(q);
    let mut newton_ok = false;
    for _ in 0..100 {
        let Ok((gv, dg)) = g(t) else { break };
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = t - gv / dg;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        let step = (next - t).abs();
        t = next;
        if step <= 1e-16 * t {
            newton_ok = true;
            break;
        }
    }
    if newton_ok && p.residual(s, t) <= 1e-12 {
        return Ok(t);
    }

    // bisection on [0, 2 (s + |λ₁|)^q]
    let mut lo = 0.0;
    let mut hi = 2.0 * (s + l1.abs()).powf(q);
    let sign_at = |t: f64| g(t).map(|(v, _)| v);
    if sign_at(hi)? <= 0.0 {
        return Err(CounterexampleError::NoConvergence { s });
    }
    for _ in 0..10_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign_at(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    if t > 0.0 && p.residual(s, t) <= 1e-12 {
        Ok(t)
    } else {
        Err(CounterexampleError::NoConvergence { s })
    }
}

/// `|∂t_s/∂λ₂| / t_s` from the differentiated functional equation.
pub fn gradient_ratio(p: &BranchParams, s: f64) -> Result<f64, CounterexampleError> {
    let t = solve_branch(p, s)?;
    ratio_at(p, s, t)
}

fn ratio_at(p: &BranchParams, s: f64, t: f64) -> Result<f64, CounterexampleError> {
    let q = p.exponent();
    let base = s + p.lambda[0] * t;
    let factor = 1.0 - q * p.lambda[0] * base.powf(q - 1.0);
    if factor.abs() < 1e-6 {
        return Err(CounterexampleError::DegenerateFactor { s, factor });
    }
    Ok((base.ln() / factor).abs())
}

/// The same ratio by central differences of [`solve_branch`] in `λ₂`.
pub fn gradient_ratio_fd(p: &BranchParams, s: f64, step: f64) -> Result<f64, CounterexampleError> {
    let at = |d: f64| solve_branch(&BranchParams { lambda: [p.lambda[0], p.lambda[1] + d], sign: p.sign }, s);
    let (tp, tm) = (at(step)?, at(-step)?);
    // differences of ln t are far better conditioned than of t
    Ok(((tp.ln() - tm.ln()) / (2.0 * step)).abs())
}

/// `s_k = e^{−k}` for `k` in `ks`.
pub fn exp_ladder(ks: std::ops::RangeInclusive<u32>) -> Vec<f64> {
    ks.map(|k| (-(k as f64)).exp()).collect()
}

/// The default ladder `e^{−5}, …, e^{−40}`.
pub fn default_ladder() -> Vec<f64> {
    exp_ladder(5..=40)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub s: f64,
    pub t_s: f64,
    pub ratio: f64,
}

/// Ratios along an `s` ladder with the fit `ratio ≈ α |ln s|^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub params: BranchParams,
    pub rows: Vec<ProfileRow>,
    pub alpha: f64,
    pub beta: f64,
    /// RMS residual of the fit in log-log coordinates.
    pub residual: f64,
}

/// Least-squares line `y ≈ a + b x`; returns `(a, b, rms)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

pub fn blowup_profile(p: &BranchParams, ladder: &[f64]) -> Result<BlowupProfile, CounterexampleError> {
    const MIN_RUNGS: usize = 8;
    if ladder.len() < MIN_RUNGS || ladder.iter().any(|s| !(*s > 0.0 && *s < 1.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CounterexampleError::BadLadder { min: MIN_RUNGS });
    }
    let rows = ladder
        .par_iter()
        .map(|&s| {
            let t = solve_branch(p, s)?;
            Ok(ProfileRow { s, t_s: t, ratio: ratio_at(p, s, t)? })
        })
        .collect::<Result<Vec<_>, CounterexampleError>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.s.ln().abs().ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let (a, b, rms) = fit_line(&xs, &ys);
    Ok(BlowupProfile { params: *p, rows, alpha: a.exp(), beta: b, residual: rms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Unboundedness {
    /// First rung whose ratio exceeds the budget.
    Witness { s: f64, t_s: f64, ratio: f64 },
    /// No rung above `s_min` exceeds the budget.
    Refuted { s_min: f64, max_ratio: f64 },
}

/// Walks `s = e^{−1}, e^{−2}, …` down to `s_min` looking for a ratio above
/// `c_budget`.
pub fn verify_unbounded(p: &BranchParams, c_budget: f64, s_min: f64) -> Result<Unboundedness, CounterexampleError> {
    p.validate()?;
    let mut max_ratio: f64 = 0.0;
    let mut k = 1u32;
    loop {
        let s = (-(k as f64)).exp();
        if s < s_min || s == 0.0 {
            return Ok(Unboundedness::Refuted { s_min, max_ratio });
        }
        let t = solve_branch(p, s)?;
        let ratio = ratio_at(p, s, t)?;
        if ratio > c_budget {
            return Ok(Unboundedness::Witness { s, t_s: t, ratio });
        }
        max_ratio = max_ratio.max(ratio);
        k += 1;
    }
}

/// Power-law fit `f(t) ≈ c t^r (ln t)^k` on the top decade of the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub r: f64,
    /// Mean of `f / t^r` over the top decade.
    pub c: f64,
    pub residual: f64,
    /// `|f| < 1e-300` on the whole tail.
    pub ultimately_zero: bool,
    /// Power of `ln t` that best straightens the tail; nonzero means
    /// `f / t^r` has no finite nonzero limit.
    pub log_power: i32,
    /// `f / t^r` moves by more than 1% between the top two decades.
    pub c_drift: bool,
}

pub fn asymptotic_exponent(samples: &[(f64, f64)]) -> Result<AsymptoticFit, CounterexampleError> {
    if samples.is_empty() || samples.iter().any(|(t, f)| !(*t > 0.0 && t.is_finite() && f.is_finite())) {
        return Err(CounterexampleError::BadSamples);
    }
    let t_max = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let t_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let decades = (t_max / t_min).log10();
    if decades < 3.0 - 1e-9 {
        return Err(CounterexampleError::InsufficientSpan { decades });
    }
    let top: Vec<(f64, f64)> = samples.iter().copied().filter(|(t, _)| *t >= t_max / 10.0).collect();
    if top.iter().all(|(_, f)| f.abs() < 1e-300) {
        return Ok(AsymptoticFit { r: 0.0, c: 0.0, residual: 0.0, ultimately_zero: true, log_power: 0, c_drift: false });
    }
    if top.len() < 3 || top.iter().any(|(_, f)| *f == 0.0) {
        return Err(CounterexampleError::BadSamples);
    }
    let xs: Vec<f64> = top.iter().map(|(t, _)| t.ln()).collect();
    let fit_with = |k: i32| {
        let ys: Vec<f64> = top.iter().map(|(t, f)| f.abs().ln() - k as f64 * t.ln().abs().ln()).collect();
        fit_line(&xs, &ys)
    };
    let (_, r0, res0) = fit_with(0);
    let mut best = (0, r0, res0);
    // ln t factors only if the tail sits where ln t > 1
    if t_max / 10.0 > std::f64::consts::E {
        for k in [-2, -1, 1, 2] {
            let (_, r, res) = fit_with(k);
            if res < 0.1 * best.2 && res0 > 1e-9 {
                best = (k, r, res);
            }
        }
    }
    let (log_power, r, residual) = best;
    let mean_c = |lo: f64, hi: f64| {
        let v: Vec<f64> = samples.iter().filter(|(t, _)| *t >= lo && *t <= hi).map(|(t, f)| f / t.powf(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let c = mean_c(t_max / 10.0, t_max).unwrap();
    let c_prev = mean_c(t_max / 100.0, t_max / 10.0);
    let drift = c_prev.is_some_and(|p| (c - p).abs() > 0.01 * c.abs().max(p.abs()));
    Ok(AsymptoticFit { r, c, residual, ultimately_zero: false, log_power, c_drift: drift || log_power != 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus(l1: f64, l2: f64) -> BranchParams {
        BranchParams::new(l1, l2, Sign::Plus)
    }

    /// Plain bisection on `t − (s + λ₁t)^q` over a wide bracket.
    fn bisect_oracle(l1: f64, q: f64, s: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..10_000 {
            let mid = 0.5 * (lo + hi);
            if mid - (s + l1 * mid).powf(q) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_forms() {
        let t = solve_branch(&plus(0.0, 0.5), (-5.0f64).exp()).unwrap();
        assert!((t / (-7.5f64).exp() - 1.0).abs() < 1e-14);
        let t = solve_branch(&BranchParams::new(0.0, -0.5, Sign::Minus), 0.04).unwrap();
        assert!((t - 0.008).abs() < 1e-15);
        let r = gradient_ratio(&plus(0.0, 0.5), (-20.0f64).exp()).unwrap();
        assert!((r - 20.0).abs() < 1e-10);
        let r = gradient_ratio(&plus(0.0, 0.5), (-5.0f64).exp()).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
    }

    #[test]
    fn against_bisection() {
        let t = solve_branch(&plus(0.1, 0.5), 0.01).unwrap();
        let oracle = bisect_oracle(0.1, 1.5, 0.01);
        assert!((t - oracle).abs() < 1e-15, "{t} {oracle}");
        assert!((t - 1.0151e-3).abs() < 1e-6);
        let r = gradient_ratio(&plus(0.1, 0.5), 0.01).unwrap();
        let fd = gradient_ratio_fd(&plus(0.1, 0.5), 0.01, 1e-5).unwrap();
        assert!((r - 4.665).abs() < 0.01, "{r}");
        assert!((r - fd).abs() / r < 1e-3);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(solve_branch(&plus(0.0, -0.5), 0.1), Err(CounterexampleError::BadExponent(_))));
        assert!(matches!(solve_branch(&plus(0.0, 0.5), 1.5), Err(CounterexampleError::BadS(_))));
        assert!(matches!(blowup_profile(&plus(0.0, 0.5), &[0.1, 0.01]), Err(CounterexampleError::BadLadder { .. })));
    }

    #[test]
    fn log_law() {
        let p = blowup_profile(&plus(0.0, 0.5), &default_ladder()).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-12 && (p.alpha - 1.0).abs() < 1e-12);
        let p = blowup_profile(&plus(0.05, 0.3), &default_ladder()).unwrap();
        assert!((0.95..=1.05).contains(&p.beta), "{}", p.beta);
        let p = blowup_profile(&BranchParams::new(0.0, -0.4, Sign::Minus), &default_ladder()).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-12 && (p.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded() {
        match verify_unbounded(&plus(0.0, 0.5), 100.0, 1e-300).unwrap() {
            Unboundedness::Witness { s, ratio, .. } => {
                assert!((s / (-101.0f64).exp() - 1.0).abs() < 1e-12);
                assert!(ratio > 100.0);
            }
            o => panic!("{o:?}"),
        }
        assert!(matches!(verify_unbounded(&plus(0.0, 0.5), 10.0, 1e-3).unwrap(), Unboundedness::Refuted { .. }));
        assert!(matches!(verify_unbounded(&plus(0.1, 0.5), 30.0, 1e-20).unwrap(), Unboundedness::Witness { .. }));
    }

    fn log_samples(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..=60).map(|k| 10f64.powf(3.0 + k as f64 / 20.0)).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exponents() {
        let fit = asymptotic_exponent(&log_samples(|t| 5.0 * t.powf(1.5) + t)).unwrap();
        assert!((fit.r - 1.5).abs() < 0.01 && (fit.c - 5.0).abs() < 0.05, "{fit:?}");
        assert_eq!(fit.log_power, 0);
        let fit = asymptotic_exponent(&log_samples(|_| 0.0)).unwrap();
        assert!(fit.ultimately_zero);
        let fit = asymptotic_exponent(&log_samples(f64::ln)).unwrap();
        assert!(fit.r.abs() < 0.05 && fit.c_drift, "{fit:?}");
        assert!(matches!(asymptotic_exponent(&[(1.0, 1.0), (10.0, 2.0)]), Err(CounterexampleError::InsufficientSpan { .. })));
    }
}
