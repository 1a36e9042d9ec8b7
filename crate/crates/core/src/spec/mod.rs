//! VO specification: roles, social protocol, performance requirements,
//! fitness definitions, ranking choice and phase thresholds.

mod fitness;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attribute::AttributeValue;
use crate::registry::ElementKind;
use crate::social::SocialNetworkSchema;

pub use fitness::{
    fitness_of, performance_fitness_of, FitnessError, FitnessEvaluation, FitnessFunction, PerformanceEvaluation,
    PerformanceFunction,
};
pub use validate::{validate_spec, Violation, ViolationKind};

/// What part of the VO a requirement talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Partner,
    Service,
    PartnerSubset,
    ServiceSubset,
    Process,
}

impl Aspect {
    pub const ALL: [Aspect; 5] = [
        Aspect::Partner,
        Aspect::Service,
        Aspect::PartnerSubset,
        Aspect::ServiceSubset,
        Aspect::Process,
    ];

    pub fn single(kind: ElementKind) -> Aspect {
        match kind {
            ElementKind::Partner => Aspect::Partner,
            ElementKind::Service => Aspect::Service,
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aspect::Partner => "partner",
            Aspect::Service => "service",
            Aspect::PartnerSubset => "subset of partners",
            Aspect::ServiceSubset => "subset of services",
            Aspect::Process => "process",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementType {
    Role,
    Social,
    Performance,
}

impl fmt::Display for RequirementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequirementType::Role => "role",
            RequirementType::Social => "social",
            RequirementType::Performance => "performance",
        })
    }
}

/// Aspect/requirement-type matrix: the phase that consumes a requirement of
/// the given type on the given aspect, or `None` for a cell that is empty.
pub fn phase_for(aspect: Aspect, kind: RequirementType) -> Option<u8> {
    use Aspect::*;
    use RequirementType::*;
    match (aspect, kind) {
        (Partner | Service, Role) => Some(2),
        (PartnerSubset | ServiceSubset, Social) => Some(3),
        (ServiceSubset | Process, Performance) => Some(4),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequirementTarget {
    /// Graded: observed value interpolated between `reject` (0) and `optimal` (1).
    Numeric {
        optimal: f64,
        reject: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    /// Boolean: 1 if any resolved value equals `value` (or a list contains it).
    Match { value: AttributeValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRequirement {
    pub path: String,
    #[serde(flatten)]
    pub target: RequirementTarget,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "yes")]
    pub mandatory: bool,
    /// Who asked for it (planner, customer, breeding environment). Stored only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl RoleRequirement {
    pub fn numeric(path: &str, optimal: f64, reject: f64, unit: Option<&str>) -> Self {
        RoleRequirement {
            path: path.to_string(),
            target: RequirementTarget::Numeric {
                optimal,
                reject,
                unit: unit.map(str::to_string),
            },
            weight: 1.0,
            mandatory: true,
            source: None,
        }
    }

    pub fn matching(path: &str, value: AttributeValue) -> Self {
        RoleRequirement {
            path: path.to_string(),
            target: RequirementTarget::Match { value },
            weight: 1.0,
            mandatory: true,
            source: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    pub target_kind: ElementKind,
    #[serde(default)]
    pub requirements: Vec<RoleRequirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<Aspect>,
}

impl Role {
    pub fn partner(name: impl Into<String>) -> Self {
        Role {
            name: name.into(),
            target_kind: ElementKind::Partner,
            requirements: Vec::new(),
            aspect: None,
        }
    }

    pub fn service(name: impl Into<String>) -> Self {
        Role {
            name: name.into(),
            target_kind: ElementKind::Service,
            requirements: Vec::new(),
            aspect: None,
        }
    }

    pub fn with_requirement(mut self, req: RoleRequirement) -> Self {
        self.requirements.push(req);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ProcessDuration,
    SubprocessResponseTime,
    TotalCost,
    Indicator(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceScope {
    #[default]
    Process,
    SubProcess(String),
    Role(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRequirement {
    pub id: String,
    pub metric: Metric,
    #[serde(default)]
    pub scope: PerformanceScope,
    pub optimal: f64,
    pub reject: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<Aspect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessStructure {
    #[serde(default)]
    pub activities: Vec<Activity>,
    #[serde(default)]
    pub precedence: Vec<(String, String)>,
    #[serde(default)]
    pub sub_processes: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SocialProtocol {
    #[serde(default)]
    pub process: ProcessStructure,
    #[serde(default)]
    pub schema: SocialNetworkSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FitnessSource {
    /// Weighted satisfaction of the social network schema.
    SocialSchema,
    /// Indicator value mapped linearly from `[min, max]` onto `[0, 1]`.
    Indicator { id: String, min: f64, max: f64 },
    /// Mean conformance of the assigned elements to their roles.
    RoleConformance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessTerm {
    #[serde(flatten)]
    pub source: FitnessSource,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessDefinition {
    pub terms: Vec<FitnessTerm>,
}

impl Default for FitnessDefinition {
    fn default() -> Self {
        FitnessDefinition {
            terms: vec![FitnessTerm {
                source: FitnessSource::SocialSchema,
                weight: 1.0,
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimize {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceComponent {
    pub name: String,
    pub metric: Metric,
    #[serde(default)]
    pub scope: PerformanceScope,
    pub direction: Optimize,
    #[serde(default = "one")]
    pub weight: f64,
    /// Lexicographic priority, lower first; ties keep declaration order.
    #[serde(default)]
    pub priority: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerformanceFitnessDefinition {
    #[serde(default)]
    pub components: Vec<PerformanceComponent>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    #[default]
    WeightedSum,
    Lexicographic,
    Pareto,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingChoice {
    #[serde(default)]
    pub method: RankingMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default)]
    pub phase2_cutoff: f64,
    #[serde(default)]
    pub phase3_threshold: f64,
    #[serde(default = "default_max_candidates")]
    pub phase2_max_candidates: usize,
}

fn default_max_candidates() -> usize {
    50
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            phase2_cutoff: 0.0,
            phase3_threshold: 0.0,
            phase2_max_candidates: default_max_candidates(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VOSpecification {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub protocol: SocialProtocol,
    pub roles: Vec<Role>,
    #[serde(default)]
    pub performance_requirements: Vec<PerformanceRequirement>,
    #[serde(default)]
    pub fitness: FitnessDefinition,
    #[serde(default)]
    pub performance_fitness: PerformanceFitnessDefinition,
    #[serde(default)]
    pub ranking: RankingChoice,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub exclusivity: bool,
}

impl VOSpecification {
    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn role_index(&self, name: &str) -> Option<usize> {
        self.roles.iter().position(|r| r.name == name)
    }

    /// Performance vector layout: the declared components, or one component
    /// per performance requirement when none are declared.
    pub fn performance_components(&self) -> Vec<PerformanceComponent> {
        if !self.performance_fitness.components.is_empty() {
            return self.performance_fitness.components.clone();
        }
        self.performance_requirements
            .iter()
            .map(|r| PerformanceComponent {
                name: r.id.clone(),
                metric: r.metric.clone(),
                scope: r.scope.clone(),
                direction: if r.optimal < r.reject {
                    Optimize::Minimize
                } else {
                    Optimize::Maximize
                },
                weight: r.weight,
                priority: 0,
            })
            .collect()
    }

    /// Stable content hash of the specification.
    pub fn digest(&self) -> String {
        crate::store::content_digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_cells() {
        let filled: Vec<(Aspect, RequirementType)> = Aspect::ALL
            .iter()
            .flat_map(|a| {
                [RequirementType::Role, RequirementType::Social, RequirementType::Performance]
                    .into_iter()
                    .filter(move |t| phase_for(*a, *t).is_some())
                    .map(move |t| (*a, t))
            })
            .collect();
        assert_eq!(filled.len(), 6);
        assert_eq!(phase_for(Aspect::Partner, RequirementType::Performance), None);
        assert_eq!(phase_for(Aspect::ServiceSubset, RequirementType::Performance), Some(4));
        assert_eq!(phase_for(Aspect::PartnerSubset, RequirementType::Social), Some(3));
        assert_eq!(phase_for(Aspect::Process, RequirementType::Social), None);
    }

    #[test]
    fn requirement_json_shape() {
        let r: RoleRequirement = serde_json::from_str(
            r#"{"path":"non_functional.response_time","kind":"numeric","optimal":100,"reject":500,"unit":"ms"}"#,
        )
        .unwrap();
        assert_eq!(r, RoleRequirement::numeric("non_functional.response_time", 100.0, 500.0, Some("ms")));
        let m: RoleRequirement = serde_json::from_str(
            r#"{"path":"competence_name","kind":"match","value":{"type":"text","value":"masonry"},"weight":2}"#,
        )
        .unwrap();
        assert_eq!(m.weight, 2.0);
        assert!(m.mandatory);
    }

    #[test]
    fn metric_and_scope_json() {
        let p: PerformanceRequirement = serde_json::from_str(
            r#"{"id":"d","metric":"subprocess_response_time","scope":{"sub_process":"build"},"optimal":5,"reject":20}"#,
        )
        .unwrap();
        assert_eq!(p.scope, PerformanceScope::SubProcess("build".into()));
        let q: PerformanceRequirement =
            serde_json::from_str(r#"{"id":"c","metric":{"indicator":"i1"},"optimal":1,"reject":0}"#).unwrap();
        assert_eq!(q.metric, Metric::Indicator("i1".into()));
        assert_eq!(q.scope, PerformanceScope::Process);
    }
}
