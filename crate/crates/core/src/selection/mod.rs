//! Candidate selection, variant generation and ranking.

mod exhaustive;
mod ga;
pub mod operators;
mod performance;
pub mod ranking;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{ElementKind, Registry, RegistryError};
use crate::social::RequirementDegree;
use crate::spec::{FitnessError, FitnessEvaluation, FitnessFunction, VOSpecification};

pub use exhaustive::{enumerate_all, Enumeration, DEFAULT_BOUND};
pub use ga::{run_ga, GaConfig, GaOutcome};
pub use operators::{crossover, mutate, repair};
pub use performance::{evaluate_performance, rank_variants};
pub use ranking::{rank, Criterion, RankError, Ranked};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("unsatisfiable role `{0}`: no candidate reaches the conformance cutoff")]
    UnsatisfiableRole(String),
    #[error("genome length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid cut points ({cut_a}, {cut_b}) for length {len}")]
    InvalidCut { cut_a: usize, cut_b: usize, len: usize },
    #[error("empty candidate set for role `{0}`")]
    EmptyCandidateSet(String),
    #[error("search space of {size} genomes exceeds the exhaustive bound {bound}; use the genetic algorithm")]
    BoundExceeded { size: u128, bound: u128 },
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub element_id: String,
    pub conformance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub role: String,
    pub kind: ElementKind,
    pub candidates: Vec<Candidate>,
}

/// Element ids indexed by role position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(pub Vec<String>);

impl Genome {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

impl<S: Into<String>> FromIterator<S> for Genome {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Genome(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VOVariant {
    pub assignment: Genome,
    pub fitness: f64,
    #[serde(default)]
    pub breakdown: Vec<RequirementDegree>,
    #[serde(default)]
    pub performance: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front: Option<u32>,
    /// Some performance component could not be computed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
    /// A monitoring alarm touched one of the assigned elements.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stale: bool,
}

impl VOVariant {
    pub fn new(assignment: Genome, eval: FitnessEvaluation) -> Self {
        VOVariant {
            assignment,
            fitness: eval.value,
            breakdown: eval.breakdown,
            performance: None,
            rank: None,
            front: None,
            flagged: false,
            stale: false,
        }
    }
}

/// Descending fitness, then ascending genome.
pub fn variant_order(a: &VOVariant, b: &VOVariant) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| a.assignment.cmp(&b.assignment))
}

/// Phase-2 candidate sets, one per role in specification order.
pub fn select_candidates(spec: &VOSpecification, registry: &Registry) -> Result<Vec<CandidateSet>, SelectionError> {
    let cutoff = spec.thresholds.phase2_cutoff;
    let mut out = Vec::with_capacity(spec.roles.len());
    for role in &spec.roles {
        let mut candidates = Vec::new();
        for e in registry.elements_of_kind(role.target_kind) {
            let conformance = registry.evaluate_conformance(&e.id, role)?;
            if conformance >= cutoff {
                candidates.push(Candidate {
                    element_id: e.id.clone(),
                    conformance,
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.conformance
                .total_cmp(&a.conformance)
                .then_with(|| a.element_id.cmp(&b.element_id))
        });
        candidates.truncate(spec.thresholds.phase2_max_candidates);
        if candidates.is_empty() {
            return Err(SelectionError::UnsatisfiableRole(role.name.clone()));
        }
        out.push(CandidateSet {
            role: role.name.clone(),
            kind: role.target_kind,
            candidates,
        });
    }
    Ok(out)
}

/// Candidate sets plus the exclusivity constraint.
#[derive(Debug, Clone)]
pub struct SearchSpace<'a> {
    pub sets: &'a [CandidateSet],
    pub exclusive: bool,
    /// Positions holding partner-kind roles.
    pub partner: Vec<bool>,
}

impl<'a> SearchSpace<'a> {
    pub fn new(sets: &'a [CandidateSet], exclusive: bool) -> Self {
        SearchSpace {
            sets,
            exclusive,
            partner: sets.iter().map(|s| s.kind == ElementKind::Partner).collect(),
        }
    }

    pub fn check_nonempty(&self) -> Result<(), SelectionError> {
        match self.sets.iter().find(|s| s.candidates.is_empty()) {
            Some(s) => Err(SelectionError::EmptyCandidateSet(s.role.clone())),
            None => Ok(()),
        }
    }

    pub fn size(&self) -> u128 {
        self.sets
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.candidates.len() as u128))
    }

    /// Genome invariants: right length, every gene from its set, partners
    /// pairwise distinct under exclusivity.
    pub fn is_valid(&self, g: &Genome) -> bool {
        if g.len() != self.sets.len() {
            return false;
        }
        let drawn = g
            .0
            .iter()
            .zip(self.sets)
            .all(|(e, s)| s.candidates.iter().any(|c| &c.element_id == e));
        drawn && (!self.exclusive || self.partners_distinct(g))
    }

    pub fn partners_distinct(&self, g: &Genome) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        g.0.iter()
            .zip(&self.partner)
            .filter(|(_, p)| **p)
            .all(|(e, _)| seen.insert(e.as_str()))
    }

    /// First feasible genome in lexicographic candidate order, by backtracking.
    pub fn first_feasible(&self) -> Option<Genome> {
        fn go(space: &SearchSpace<'_>, pos: usize, acc: &mut Vec<String>) -> bool {
            if pos == space.sets.len() {
                return true;
            }
            for c in &space.sets[pos].candidates {
                let clash = space.exclusive
                    && space.partner[pos]
                    && acc
                        .iter()
                        .zip(&space.partner)
                        .any(|(e, p)| *p && *e == c.element_id);
                if clash {
                    continue;
                }
                acc.push(c.element_id.clone());
                if go(space, pos + 1, acc) {
                    return true;
                }
                acc.pop();
            }
            false
        }
        let mut acc = Vec::with_capacity(self.sets.len());
        go(self, 0, &mut acc).then(|| Genome(acc))
    }
}

/// Memoizing wrapper around a fitness function.
pub struct Evaluator<'f, 'a> {
    fitness: &'f FitnessFunction<'a>,
    cache: BTreeMap<Genome, FitnessEvaluation>,
    evaluations: usize,
}

impl<'f, 'a> Evaluator<'f, 'a> {
    pub fn new(fitness: &'f FitnessFunction<'a>) -> Self {
        Evaluator {
            fitness,
            cache: BTreeMap::new(),
            evaluations: 0,
        }
    }

    pub fn fitness(&mut self, g: &Genome) -> Result<f64, SelectionError> {
        if let Some(e) = self.cache.get(g) {
            return Ok(e.value);
        }
        let e = self.fitness.evaluate(g.as_slice())?;
        self.evaluations += 1;
        let v = e.value;
        self.cache.insert(g.clone(), e);
        Ok(v)
    }

    /// Number of distinct genomes evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Every evaluated genome with fitness at least `threshold`, sorted.
    pub fn variants_above(&self, threshold: f64) -> Vec<VOVariant> {
        let mut out: Vec<VOVariant> = self
            .cache
            .iter()
            .filter(|(_, e)| e.value >= threshold)
            .map(|(g, e)| VOVariant::new(g.clone(), e.clone()))
            .collect();
        out.sort_by(variant_order);
        out
    }
}
