//! Greedy search for finitely many directions that are weak regular (or
//! regular) at every sample point, with one aperture shared by all.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finiteness_probe, strengthen, weak_regular_probed, RegularityConfig, RegularityError, RegularityVerdict};
use crate::sets::LineHits;

/// One sample point and the direction that handles it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub point: Vec<f64>,
    /// Index into [`ProjectionAtlas::directions`].
    pub direction: usize,
    /// Number of sheets; 0 for an empty intersection.
    pub branches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionAtlas {
    pub directions: Vec<Vec<f64>>,
    pub epsilon0: f64,
    pub assignment: Vec<AtlasEntry>,
}

impl ProjectionAtlas {
    pub fn k(&self) -> usize {
        self.directions.len()
    }
}

/// Sample points no candidate direction handles at the smallest aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasFailure {
    pub epsilon: f64,
    pub uncovered: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AtlasError {
    #[error("the aperture ladder must be nonempty, positive and strictly decreasing")]
    BadLadder,
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error("{} sample point(s) not covered at ε = {}", .0.uncovered.len(), .0.epsilon)]
    Uncovered(AtlasFailure),
}

/// Tries the apertures from largest to smallest and returns the first
/// that admits a cover, choosing directions greedily by how many points
/// they handle. With `c_budget` the strong check is used.
pub fn search_atlas<S: LineHits + ?Sized>(
    set: &S,
    points: &[Vec<f64>],
    candidates: &[Vec<f64>],
    ladder: &[f64],
    c_budget: Option<f64>,
    cfg: &RegularityConfig,
) -> Result<ProjectionAtlas, AtlasError> {
    if ladder.is_empty() || ladder.iter().any(|e| !(*e > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AtlasError::BadLadder);
    }
    if cfg.resolution < 3 {
        return Err(RegularityError::Resolution(cfg.resolution).into());
    }
    let smallest = *ladder.last().unwrap();
    if candidates.is_empty() {
        return Err(AtlasError::Uncovered(AtlasFailure { epsilon: smallest, uncovered: points.to_vec() }));
    }
    // fiber finiteness only depends on the direction
    let finite: Vec<bool> = candidates.iter().map(|v| finiteness_probe(set, v, cfg).is_ok()).collect();

    let mut last_uncovered = points.to_vec();
    for &eps in ladder {
        let table: Vec<Vec<Option<RegularityVerdict>>> = points
            .par_iter()
            .map(|x| {
                candidates
                    .iter()
                    .zip(&finite)
                    .map(|(v, ok)| {
                        if !ok {
                            return Ok(None);
                        }
                        let weak = weak_regular_probed(set, x, v, eps, cfg)?;
                        let verdict = match c_budget {
                            Some(c) => strengthen(weak, c),
                            None => weak,
                        };
                        Ok(verdict.is_success().then_some(verdict))
                    })
                    .collect::<Result<Vec<_>, RegularityError>>()
            })
            .collect::<Result<_, _>>()?;

        let uncovered: Vec<usize> = (0..points.len()).filter(|&p| table[p].iter().all(Option::is_none)).collect();
        if !uncovered.is_empty() {
            last_uncovered = uncovered.iter().map(|&p| points[p].clone()).collect();
            continue;
        }

        let mut chosen: Vec<usize> = Vec::new();
        let mut owner: Vec<Option<usize>> = vec![None; points.len()];
        while owner.iter().any(Option::is_none) {
            let best = (0..candidates.len())
                .filter(|c| !chosen.contains(c))
                .max_by_key(|&c| {
                    let gain = (0..points.len()).filter(|&p| owner[p].is_none() && table[p][c].is_some()).count();
                    // ties go to the earlier candidate
                    (gain, std::cmp::Reverse(c))
                })
                .expect("every point is coverable");
            let slot = chosen.len();
            chosen.push(best);
            for p in 0..points.len() {
                if owner[p].is_none() && table[p][best].is_some() {
                    owner[p] = Some(slot);
                }
            }
        }

        let assignment = points
            .iter()
            .enumerate()
            .map(|(p, x)| {
                let slot = owner[p].unwrap();
                let verdict = table[p][chosen[slot]].as_ref().unwrap();
                AtlasEntry {
                    point: x.clone(),
                    direction: slot,
                    branches: verdict.branch_count().unwrap_or(0),
                    c_min: match verdict {
                        RegularityVerdict::Regular { c_min, .. } => Some(*c_min),
                        _ => None,
                    },
                }
            })
            .collect();
        return Ok(ProjectionAtlas { directions: chosen.iter().map(|&c| candidates[c].clone()).collect(), epsilon0: eps, assignment });
    }
    Err(AtlasError::Uncovered(AtlasFailure { epsilon: smallest, uncovered: last_uncovered }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{Aabb, DefinableSet};

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let s = |k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
                out.push(vec![s(i), s(j)]);
            }
        }
        out
    }

    fn cfg() -> RegularityConfig {
        RegularityConfig { resolution: 21, ..Default::default() }
    }

    #[test]
    fn circle_atlas() {
        let circle = DefinableSet::from_atoms(2, &["x^2 + y^2 = 1"], Some(Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())).unwrap();
        let pts = grid(20, -2.0, 2.0);
        let dirs = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let atlas = search_atlas(&circle, &pts, &dirs, &[0.2, 0.1, 0.05], None, &cfg()).unwrap();
        assert!(atlas.k() <= 3);
        assert_eq!(atlas.assignment.len(), 400);
        assert!(atlas.epsilon0 > 0.0);
    }

    #[test]
    fn single_point_needs_no_sheets() {
        let p = DefinableSet::point(vec![0.0, 0.0]).unwrap();
        let pts = grid(5, -1.0, 1.0).into_iter().filter(|x| x[0] != 0.0 || x[1] != 0.0).collect::<Vec<_>>();
        let dirs = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let atlas = search_atlas(&p, &pts, &dirs, &[0.2, 0.1], None, &cfg()).unwrap();
        assert!(atlas.assignment.iter().all(|e| e.branches == 0));
    }

    #[test]
    fn empty_candidates_fail() {
        let p = DefinableSet::point(vec![0.0, 0.0]).unwrap();
        let r = search_atlas(&p, &[vec![1.0, 1.0]], &[], &[0.2], None, &cfg());
        assert!(matches!(r, Err(AtlasError::Uncovered(f)) if f.uncovered.len() == 1));
    }

    #[test]
    fn ladder_must_decrease() {
        let p = DefinableSet::point(vec![0.0, 0.0]).unwrap();
        let r = search_atlas(&p, &[vec![1.0, 1.0]], &[vec![0.0]], &[0.1, 0.2], None, &cfg());
        assert_eq!(r, Err(AtlasError::BadLadder));
    }
}
