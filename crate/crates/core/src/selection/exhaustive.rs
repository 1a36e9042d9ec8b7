//! Exhaustive enumeration, used as the reference optimum.

use super::{Evaluator, Genome, SearchSpace, SelectionError, VOVariant};
use crate::spec::FitnessFunction;

pub const DEFAULT_BOUND: u128 = 1_000_000;

#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Feasible genomes with fitness at or above the phase-3 threshold.
    pub variants: Vec<VOVariant>,
    /// Feasible genomes evaluated, before threshold filtering.
    pub evaluated: usize,
}

pub fn enumerate_all(
    fitness: &FitnessFunction<'_>,
    space: &SearchSpace<'_>,
    bound: u128,
) -> Result<Enumeration, SelectionError> {
    space.check_nonempty()?;
    let size = space.size();
    if size > bound {
        return Err(SelectionError::BoundExceeded { size, bound });
    }
    let spec = fitness.spec();
    if space.sets.len() != spec.roles.len() {
        return Err(SelectionError::LengthMismatch {
            expected: spec.roles.len(),
            got: space.sets.len(),
        });
    }
    let mut eval = Evaluator::new(fitness);
    let n = space.sets.len();
    let mut idx = vec![0usize; n];
    loop {
        let g = Genome(
            idx.iter()
                .zip(space.sets)
                .map(|(&i, s)| s.candidates[i].element_id.clone())
                .collect(),
        );
        if !space.exclusive || space.partners_distinct(&g) {
            eval.fitness(&g)?;
        }
        // odometer increment, last position fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(Enumeration {
                    variants: eval.variants_above(spec.thresholds.phase3_threshold),
                    evaluated: eval.evaluations(),
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < space.sets[k].candidates.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
