//! Evaluable fitness handles built from a specification and a snapshot.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{longest_path, DagError};
use crate::num::weighted_mean;
use crate::registry::{AttributePath, ElementKind, RegistryError};
use crate::social::{GraphError, RequirementDegree};
use crate::store::Snapshot;

use super::{FitnessSource, Metric, PerformanceComponent, PerformanceScope, VOSpecification};

#[derive(Debug, Error)]
pub enum FitnessError {
    #[error("fitness references undefined indicator `{0}`")]
    UnknownIndicator(String),
    #[error("assignment has {got} positions, expected {expected}")]
    GenomeLength { expected: usize, got: usize },
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown activity `{0}` in precedence")]
    UnknownActivity(String),
    #[error("unknown sub-process `{0}`")]
    UnknownSubProcess(String),
    #[error("process structure: {0}")]
    Process(#[from] DagError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessEvaluation {
    pub value: f64,
    /// Per social requirement degree, in schema order.
    pub breakdown: Vec<RequirementDegree>,
}

#[derive(Debug, Clone)]
enum Term {
    Social,
    Constant(f64),
    RoleConformance,
}

/// Scalar fitness over assignments (role position -> element id).
#[derive(Debug, Clone)]
pub struct FitnessFunction<'a> {
    spec: &'a VOSpecification,
    snapshot: &'a Snapshot,
    terms: Vec<(Term, f64)>,
}

pub fn fitness_of<'a>(spec: &'a VOSpecification, snapshot: &'a Snapshot) -> Result<FitnessFunction<'a>, FitnessError> {
    let mut terms = Vec::with_capacity(spec.fitness.terms.len());
    for t in &spec.fitness.terms {
        let term = match &t.source {
            FitnessSource::SocialSchema => Term::Social,
            FitnessSource::RoleConformance => Term::RoleConformance,
            FitnessSource::Indicator { id, min, max } => {
                let value = snapshot
                    .evaluate_indicator(id)
                    .map_err(|_| FitnessError::UnknownIndicator(id.clone()))?;
                let scaled = match value.value() {
                    Some(v) if max > min => ((v - min) / (max - min)).clamp(0.0, 1.0),
                    _ => 0.0,
                };
                Term::Constant(scaled)
            }
        };
        terms.push((term, t.weight));
    }
    Ok(FitnessFunction { spec, snapshot, terms })
}

impl<'a> FitnessFunction<'a> {
    pub fn spec(&self) -> &'a VOSpecification {
        self.spec
    }

    pub fn evaluate(&self, assignment: &[String]) -> Result<FitnessEvaluation, FitnessError> {
        let n = self.spec.roles.len();
        if assignment.len() != n {
            return Err(FitnessError::GenomeLength {
                expected: n,
                got: assignment.len(),
            });
        }
        let by_role: BTreeMap<&str, &str> = self
            .spec
            .roles
            .iter()
            .zip(assignment)
            .map(|(r, e)| (r.name.as_str(), e.as_str()))
            .collect();
        let schema = self.snapshot.graph().evaluate_schema(&self.spec.protocol.schema, &by_role)?;
        let mut parts = Vec::with_capacity(self.terms.len());
        for (term, weight) in &self.terms {
            let v = match term {
                Term::Social => schema.degree,
                Term::Constant(v) => *v,
                Term::RoleConformance => {
                    let mut sum = 0.0;
                    for (role, e) in self.spec.roles.iter().zip(assignment) {
                        sum += self.snapshot.registry().evaluate_conformance(e, role)?;
                    }
                    if n == 0 {
                        1.0
                    } else {
                        sum / n as f64
                    }
                }
            };
            parts.push((v, *weight));
        }
        Ok(FitnessEvaluation {
            value: weighted_mean(parts).unwrap_or(schema.degree),
            breakdown: schema.breakdown,
        })
    }
}

/// One evaluated performance vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEvaluation {
    /// One entry per component; `None` marks an unavailable component.
    pub values: Vec<Option<f64>>,
    /// Why components were unavailable, in component order.
    pub issues: Vec<String>,
}

impl PerformanceEvaluation {
    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Duration(Option<Vec<bool>>),
    Cost(Option<Vec<bool>>),
    RoleDuration(usize),
    RoleCost(usize),
    Constant(Result<f64, String>),
}

/// Vector-valued performance function over assignments.
#[derive(Debug, Clone)]
pub struct PerformanceFunction<'a> {
    spec: &'a VOSpecification,
    snapshot: &'a Snapshot,
    components: Vec<PerformanceComponent>,
    compiled: Vec<Compiled>,
    /// Role positions taking part in each activity.
    activity_roles: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

pub fn performance_fitness_of<'a>(
    spec: &'a VOSpecification,
    snapshot: &'a Snapshot,
) -> Result<PerformanceFunction<'a>, FitnessError> {
    let process = &spec.protocol.process;
    let act_index: BTreeMap<&str, usize> = process
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let mut activity_roles = Vec::with_capacity(process.activities.len());
    for a in &process.activities {
        let mut positions = Vec::with_capacity(a.roles.len());
        for r in &a.roles {
            positions.push(spec.role_index(r).ok_or_else(|| FitnessError::UnknownRole(r.clone()))?);
        }
        activity_roles.push(positions);
    }
    let act = |id: &str| {
        act_index
            .get(id)
            .copied()
            .ok_or_else(|| FitnessError::UnknownActivity(id.to_string()))
    };
    let mut edges = Vec::with_capacity(process.precedence.len());
    for (a, b) in &process.precedence {
        edges.push((act(a)?, act(b)?));
    }
    crate::dag::topological_order(process.activities.len(), &edges)?;

    let mask = |name: &str| -> Result<Vec<bool>, FitnessError> {
        let members = process
            .sub_processes
            .get(name)
            .ok_or_else(|| FitnessError::UnknownSubProcess(name.to_string()))?;
        let mut m = vec![false; process.activities.len()];
        for id in members {
            m[act(id)?] = true;
        }
        Ok(m)
    };
    let components = spec.performance_components();
    let mut compiled = Vec::with_capacity(components.len());
    for c in &components {
        let role = |r: &str| spec.role_index(r).ok_or_else(|| FitnessError::UnknownRole(r.to_string()));
        compiled.push(match (&c.metric, &c.scope) {
            (Metric::Indicator(id), _) => {
                let v = snapshot
                    .evaluate_indicator(id)
                    .map_err(|_| FitnessError::UnknownIndicator(id.clone()))?;
                Compiled::Constant(v.value().ok_or_else(|| format!("indicator `{id}` unavailable")))
            }
            (Metric::ProcessDuration | Metric::SubprocessResponseTime, PerformanceScope::Process) => {
                Compiled::Duration(None)
            }
            (Metric::ProcessDuration | Metric::SubprocessResponseTime, PerformanceScope::SubProcess(s)) => {
                Compiled::Duration(Some(mask(s)?))
            }
            (Metric::ProcessDuration | Metric::SubprocessResponseTime, PerformanceScope::Role(r)) => {
                Compiled::RoleDuration(role(r)?)
            }
            (Metric::TotalCost, PerformanceScope::Process) => Compiled::Cost(None),
            (Metric::TotalCost, PerformanceScope::SubProcess(s)) => Compiled::Cost(Some(mask(s)?)),
            (Metric::TotalCost, PerformanceScope::Role(r)) => Compiled::RoleCost(role(r)?),
        });
    }
    Ok(PerformanceFunction {
        spec,
        snapshot,
        components,
        compiled,
        activity_roles,
        edges,
    })
}

const RESPONSE_TIME: &str = "response_time";
const COST: &str = "cost";

impl<'a> PerformanceFunction<'a> {
    pub fn components(&self) -> &[PerformanceComponent] {
        &self.components
    }

    /// Numeric non-functional property of the service at role position
    /// `pos`, or `None` for partner roles (which carry no duration or cost).
    fn service_value(
        &self,
        assignment: &[String],
        pos: usize,
        attr: &str,
    ) -> Result<Option<(f64, Option<String>)>, String> {
        if self.spec.roles[pos].target_kind != ElementKind::Service {
            return Ok(None);
        }
        let id = &assignment[pos];
        let path = AttributePath::NonFunctional(attr.to_string());
        self.snapshot
            .registry()
            .resolve(id, &path)
            .iter()
            .find_map(|v| v.as_number().map(|(x, u)| (x, u.map(str::to_string))))
            .map(Some)
            .ok_or_else(|| format!("service `{id}` has no numeric {attr}"))
    }

    /// Per-activity totals of `attr` over the activity's service roles.
    fn activity_totals(&self, assignment: &[String], attr: &str, unit: &mut Option<String>) -> Result<Vec<f64>, String> {
        let mut totals = Vec::with_capacity(self.activity_roles.len());
        for positions in &self.activity_roles {
            let mut t = 0.0;
            for &p in positions {
                if let Some((v, u)) = self.service_value(assignment, p, attr)? {
                    unify(unit, u)?;
                    t += v;
                }
            }
            totals.push(t);
        }
        Ok(totals)
    }

    pub fn evaluate(&self, assignment: &[String]) -> Result<PerformanceEvaluation, FitnessError> {
        if assignment.len() != self.spec.roles.len() {
            return Err(FitnessError::GenomeLength {
                expected: self.spec.roles.len(),
                got: assignment.len(),
            });
        }
        let mut values = Vec::with_capacity(self.compiled.len());
        let mut issues = Vec::new();
        for (c, comp) in self.compiled.iter().zip(&self.components) {
            let mut unit = None;
            let r: Result<f64, String> = match c {
                Compiled::Constant(v) => v.clone(),
                Compiled::Duration(mask) => self
                    .activity_totals(assignment, RESPONSE_TIME, &mut unit)
                    .and_then(|w| longest_path(&w, &self.edges, mask.as_deref()).map_err(|e| e.to_string())),
                Compiled::Cost(mask) => self.activity_totals(assignment, COST, &mut unit).map(|w| {
                    w.iter()
                        .enumerate()
                        .filter(|(i, _)| mask.as_ref().map(|m| m[*i]).unwrap_or(true))
                        .map(|(_, v)| v)
                        .sum()
                }),
                Compiled::RoleDuration(p) => self
                    .service_value(assignment, *p, RESPONSE_TIME)
                    .map(|v| v.map(|x| x.0).unwrap_or(0.0)),
                Compiled::RoleCost(p) => self
                    .service_value(assignment, *p, COST)
                    .map(|v| v.map(|x| x.0).unwrap_or(0.0)),
            };
            match r {
                Ok(v) if v.is_finite() => values.push(Some(v)),
                Ok(v) => {
                    issues.push(format!("{}: non-finite value {v}", comp.name));
                    values.push(None);
                }
                Err(e) => {
                    issues.push(format!("{}: {e}", comp.name));
                    values.push(None);
                }
            }
        }
        Ok(PerformanceEvaluation { values, issues })
    }
}

fn unify(unit: &mut Option<String>, next: Option<String>) -> Result<(), String> {
    match (unit.as_ref(), next) {
        (_, None) => Ok(()),
        (None, Some(u)) => {
            *unit = Some(u);
            Ok(())
        }
        (Some(a), Some(b)) if *a == b => Ok(()),
        (Some(a), Some(b)) => Err(format!("unit mismatch: {a} vs {b}")),
    }
}
