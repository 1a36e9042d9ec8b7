//! Ranking of performance vectors: weighted sum, lexicographic, Pareto.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;
use crate::spec::{Optimize, RankingMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion<S> {
    pub direction: Optimize,
    pub weight: S,
    pub priority: u32,
}

impl<S: Scalar> Criterion<S> {
    pub fn minimize(weight: S) -> Self {
        Criterion {
            direction: Optimize::Minimize,
            weight,
            priority: 0,
        }
    }

    pub fn maximize(weight: S) -> Self {
        Criterion {
            direction: Optimize::Maximize,
            weight,
            priority: 0,
        }
    }

    /// Ordering where `Greater` means `a` is better.
    fn better(&self, a: S, b: S) -> Ordering {
        let o = a.partial_cmp(&b).unwrap_or(Ordering::Equal);
        match self.direction {
            Optimize::Maximize => o,
            Optimize::Minimize => o.reverse(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked<S> {
    pub index: usize,
    /// 1-based position in the final order.
    pub rank: u32,
    /// Non-dominated front (1-based) under Pareto ranking.
    pub front: Option<u32>,
    /// Normalized weighted score; `None` for incomplete vectors.
    pub score: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("vector {index} has {got} components, expected {expected}")]
    ArityMismatch { index: usize, expected: usize, got: usize },
}

/// True if `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates<S: Scalar>(a: &[S], b: &[S], criteria: &[Criterion<S>]) -> bool {
    let mut strictly = false;
    for ((x, y), c) in a.iter().zip(b).zip(criteria) {
        match c.better(*x, *y) {
            Ordering::Less => return false,
            Ordering::Greater => strictly = true,
            Ordering::Equal => {}
        }
    }
    strictly
}

/// Min-max normalized weighted scores, oriented so larger is better. A
/// component whose values are all equal contributes 0.
pub fn weighted_scores<S: Scalar>(vectors: &[&[S]], criteria: &[Criterion<S>]) -> Vec<S> {
    let total: S = criteria.iter().fold(S::zero(), |acc, c| acc + c.weight);
    let mut scores = vec![S::zero(); vectors.len()];
    if vectors.is_empty() || total <= S::zero() {
        return scores;
    }
    for (k, c) in criteria.iter().enumerate() {
        let (lo, hi) = vectors.iter().fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| {
            (lo.min(v[k]), hi.max(v[k]))
        });
        let span = hi - lo;
        if span <= S::zero() {
            continue;
        }
        let w = c.weight / total;
        for (score, v) in scores.iter_mut().zip(vectors) {
            let n = match c.direction {
                Optimize::Maximize => (v[k] - lo) / span,
                Optimize::Minimize => (hi - v[k]) / span,
            };
            *score = *score + w * n;
        }
    }
    scores
}

/// Scores are compared on a 1e-9 grid so that reorderings caused only by
/// floating-point noise (e.g. from rescaled weights) fall through to `tie`.
fn score_key<S: Scalar>(s: S) -> i64 {
    (s.to_f64().unwrap_or(0.0) * 1e9).round() as i64
}

/// Orders vectors under `method`. `tie` breaks exact ties; vectors with a
/// missing or non-finite component are placed last, ordered by `tie`.
pub fn rank<S, F>(
    vectors: &[Vec<Option<S>>],
    criteria: &[Criterion<S>],
    method: RankingMethod,
    tie: F,
) -> Result<Vec<Ranked<S>>, RankError>
where
    S: Scalar,
    F: Fn(usize, usize) -> Ordering,
{
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != criteria.len() {
            return Err(RankError::ArityMismatch {
                index,
                expected: criteria.len(),
                got: v.len(),
            });
        }
    }
    let mut complete: Vec<(usize, Vec<S>)> = Vec::new();
    let mut incomplete: Vec<usize> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let values: Option<Vec<S>> = v.iter().map(|x| x.filter(|s| s.is_finite())).collect();
        match values {
            Some(values) => complete.push((i, values)),
            None => incomplete.push(i),
        }
    }
    let slices: Vec<&[S]> = complete.iter().map(|(_, v)| v.as_slice()).collect();
    let scores = weighted_scores(&slices, criteria);
    let by_score = |a: usize, b: usize| {
        score_key(scores[b])
            .cmp(&score_key(scores[a]))
            .then_with(|| tie(complete[a].0, complete[b].0))
    };

    // positions into `complete`, plus front numbers for Pareto
    let mut order: Vec<usize> = (0..complete.len()).collect();
    let mut fronts: Vec<Option<u32>> = vec![None; complete.len()];
    match method {
        RankingMethod::WeightedSum => order.sort_by(|&a, &b| by_score(a, b)),
        RankingMethod::Lexicographic => {
            let mut keys: Vec<usize> = (0..criteria.len()).collect();
            keys.sort_by_key(|&k| (criteria[k].priority, k));
            order.sort_by(|&a, &b| {
                for &k in &keys {
                    let o = criteria[k].better(complete[b].1[k], complete[a].1[k]);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                tie(complete[a].0, complete[b].0)
            });
        }
        RankingMethod::Pareto => {
            let mut remaining: Vec<usize> = (0..complete.len()).collect();
            let mut sorted = Vec::with_capacity(complete.len());
            let mut front_no = 0u32;
            while !remaining.is_empty() {
                front_no += 1;
                let (mut front, rest): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&a| {
                    !remaining
                        .iter()
                        .any(|&b| b != a && dominates(&complete[b].1, &complete[a].1, criteria))
                });
                front.sort_by(|&a, &b| by_score(a, b));
                for &p in &front {
                    fronts[p] = Some(front_no);
                }
                sorted.extend(front);
                remaining = rest;
            }
            order = sorted;
        }
    }

    incomplete.sort_by(|&a, &b| tie(a, b));
    let mut out = Vec::with_capacity(vectors.len());
    for p in order {
        out.push(Ranked {
            index: complete[p].0,
            rank: out.len() as u32 + 1,
            front: fronts[p],
            score: Some(scores[p]),
        });
    }
    for i in incomplete {
        out.push(Ranked {
            index: i,
            rank: out.len() as u32 + 1,
            front: None,
            score: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(v: &[&[f64]]) -> Vec<Vec<Option<f64>>> {
        v.iter().map(|r| r.iter().map(|x| Some(*x)).collect()).collect()
    }

    fn order(r: &[Ranked<f64>]) -> Vec<usize> {
        r.iter().map(|x| x.index).collect()
    }

    #[test]
    fn single_variant_is_first() {
        let r = rank(&vecs(&[&[3.0]]), &[Criterion::minimize(1.0)], RankingMethod::Pareto, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(r[0].rank, 1);
    }

    #[test]
    fn weighted_sum_single_effective_component() {
        let v = vecs(&[&[0.9, 0.1], &[0.5, 0.9]]);
        let c = [Criterion::minimize(1.0), Criterion::minimize(0.0)];
        let r = rank(&v, &c, RankingMethod::WeightedSum, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(order(&r), vec![1, 0]);
    }

    #[test]
    fn pareto_dominance() {
        let v = vecs(&[&[2.0, 2.0], &[1.0, 1.0]]);
        let c = [Criterion::minimize(1.0), Criterion::minimize(1.0)];
        let r = rank(&v, &c, RankingMethod::Pareto, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(order(&r), vec![1, 0]);
        assert_eq!(r[0].front, Some(1));
        assert_eq!(r[1].front, Some(2));
    }

    #[test]
    fn lexicographic_respects_priority() {
        let v = vecs(&[&[1.0, 5.0], &[2.0, 1.0], &[1.0, 3.0]]);
        let mut c = [Criterion::minimize(1.0), Criterion::minimize(1.0)];
        let r = rank(&v, &c, RankingMethod::Lexicographic, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(order(&r), vec![2, 0, 1]);
        c[0].priority = 1;
        let r = rank(&v, &c, RankingMethod::Lexicographic, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(order(&r), vec![1, 2, 0]);
    }

    #[test]
    fn incomplete_vectors_go_last_and_arity_checked() {
        let v = vec![vec![None], vec![Some(10.0)], vec![Some(f64::NAN)]];
        let r = rank(&v, &[Criterion::minimize(1.0)], RankingMethod::WeightedSum, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(order(&r), vec![1, 0, 2]);
        assert!(r[1].score.is_none());
        let bad = vec![vec![Some(1.0)], vec![Some(1.0), Some(2.0)]];
        assert!(matches!(
            rank(&bad, &[Criterion::minimize(1.0)], RankingMethod::WeightedSum, |a, b| a.cmp(&b)),
            Err(RankError::ArityMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn degenerate_component_scores_zero() {
        let v: Vec<&[f64]> = vec![&[1.0, 4.0], &[1.0, 2.0]];
        let s = weighted_scores(&v, &[Criterion::maximize(1.0), Criterion::maximize(1.0)]);
        assert_eq!(s, vec![0.5, 0.0]);
    }

    #[test]
    fn works_on_f32() {
        let v = vec![vec![Some(1.0_f32)], vec![Some(0.5_f32)]];
        let r = rank(&v, &[Criterion::maximize(1.0_f32)], RankingMethod::WeightedSum, |a, b| a.cmp(&b)).unwrap();
        assert_eq!(r[0].index, 0);
    }
}
