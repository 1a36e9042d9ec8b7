//! Phase-4 glue: attach performance vectors to variants and rank them.

use super::ranking::{rank, Criterion};
use super::{variant_order, SelectionError, VOVariant};
use crate::spec::{PerformanceFunction, RankingMethod};

/// Computes every variant's performance vector. Variants with an unavailable
/// component are flagged; the reasons are returned per variant index.
pub fn evaluate_performance(
    variants: &mut [VOVariant],
    perf: &PerformanceFunction<'_>,
) -> Result<Vec<(usize, Vec<String>)>, SelectionError> {
    let mut issues = Vec::new();
    for (i, v) in variants.iter_mut().enumerate() {
        let e = perf.evaluate(v.assignment.as_slice())?;
        v.flagged = !e.is_complete();
        v.performance = Some(e.values);
        if !e.issues.is_empty() {
            issues.push((i, e.issues));
        }
    }
    Ok(issues)
}

/// Assigns ranks and reorders `variants` by rank. Exact ties fall back to the
/// phase-3 order (fitness, then genome).
pub fn rank_variants(
    variants: &mut Vec<VOVariant>,
    perf: &PerformanceFunction<'_>,
    method: RankingMethod,
) -> Result<(), SelectionError> {
    let criteria: Vec<Criterion<f64>> = perf
        .components()
        .iter()
        .map(|c| Criterion {
            direction: c.direction,
            weight: c.weight,
            priority: c.priority,
        })
        .collect();
    let vectors: Vec<Vec<Option<f64>>> = variants
        .iter()
        .map(|v| v.performance.clone().unwrap_or_else(|| vec![None; criteria.len()]))
        .collect();
    let ranked = rank(&vectors, &criteria, method, |a, b| variant_order(&variants[a], &variants[b]))?;
    let mut slots: Vec<Option<VOVariant>> = std::mem::take(variants).into_iter().map(Some).collect();
    for r in ranked {
        let mut v = slots[r.index].take().expect("each index ranked once");
        v.rank = Some(r.rank);
        v.front = r.front;
        variants.push(v);
    }
    Ok(())
}
