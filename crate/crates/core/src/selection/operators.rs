//! Genetic operators: two-point crossover, role-position mutation and the
//! exclusivity repair step.

use std::collections::BTreeSet;

use rand::Rng;

use super::{Genome, SearchSpace, SelectionError};

/// Standard two-point crossover with explicit cut points `cut_a < cut_b <= N`.
///
/// `child1 = a[..cut_a] ++ b[cut_a..cut_b] ++ a[cut_b..]`, `child2` symmetric.
pub fn crossover(
    parent_a: &Genome,
    parent_b: &Genome,
    cut_a: usize,
    cut_b: usize,
) -> Result<(Genome, Genome), SelectionError> {
    let n = parent_a.len();
    if parent_b.len() != n {
        return Err(SelectionError::LengthMismatch {
            expected: n,
            got: parent_b.len(),
        });
    }
    if !(cut_a < cut_b && cut_b <= n) {
        return Err(SelectionError::InvalidCut { cut_a, cut_b, len: n });
    }
    let mut c1 = parent_a.clone();
    let mut c2 = parent_b.clone();
    for i in cut_a..cut_b {
        c1.0[i] = parent_b.0[i].clone();
        c2.0[i] = parent_a.0[i].clone();
    }
    Ok((c1, c2))
}

/// Two distinct cut points drawn uniformly from `0..=n`, or `None` when the
/// genome has no interior position to cut at (`n < 2`).
pub fn random_cuts<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Option<(usize, usize)> {
    if n < 2 {
        return None;
    }
    let a = rng.gen_range(0..=n);
    let mut b = rng.gen_range(0..n);
    if b >= a {
        b += 1;
    }
    Some((a.min(b), a.max(b)))
}

/// Picks a position uniformly and replaces its element with a different one
/// drawn uniformly from that role's candidates. Under exclusivity, elements
/// held by other partner positions are not eligible. With no eligible
/// alternative the genome is returned unchanged.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, space: &SearchSpace<'_>, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    if genome.is_empty() {
        return out;
    }
    let pos = rng.gen_range(0..genome.len());
    let current = &genome.0[pos];
    let taken: BTreeSet<&str> = if space.exclusive && space.partner[pos] {
        (0..genome.len())
            .filter(|&i| i != pos && space.partner[i])
            .map(|i| genome.0[i].as_str())
            .collect()
    } else {
        BTreeSet::new()
    };
    let pool: Vec<&str> = space.sets[pos]
        .candidates
        .iter()
        .map(|c| c.element_id.as_str())
        .filter(|e| e != current && !taken.contains(e))
        .collect();
    if !pool.is_empty() {
        out.0[pos] = pool[rng.gen_range(0..pool.len())].to_string();
    }
    out
}

/// Makes partner positions pairwise distinct when exclusivity is on.
///
/// Positions are scanned from lowest to highest; a partner position whose
/// element was already used earlier is re-drawn as the first candidate (in
/// candidate-set order) not used by any other partner position. Returns
/// `None` when some position cannot be repaired.
pub fn repair(genome: Genome, space: &SearchSpace<'_>) -> Option<Genome> {
    if !space.exclusive {
        return Some(genome);
    }
    let mut g = genome;
    let mut used: BTreeSet<String> = BTreeSet::new();
    for pos in 0..g.len() {
        if !space.partner[pos] {
            continue;
        }
        if used.contains(&g.0[pos]) {
            let later: BTreeSet<&str> = (pos + 1..g.len())
                .filter(|&i| space.partner[i])
                .map(|i| g.0[i].as_str())
                .collect();
            let pick = {
                let pool = space.sets[pos].candidates.iter().map(|c| c.element_id.as_str());
                pool.clone()
                    .find(|e| !used.contains(*e) && !later.contains(e))
                    .or_else(|| pool.clone().find(|e| !used.contains(*e)))
                    .map(str::to_string)
            };
            g.0[pos] = pick?;
        }
        used.insert(g.0[pos].clone());
    }
    Some(g)
}
