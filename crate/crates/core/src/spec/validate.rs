use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    phase_for, Aspect, Metric, PerformanceScope, RequirementTarget, RequirementType, VOSpecification,
};
use crate::dag::topological_order;
use crate::registry::{AttributePath, ElementKind};
use crate::spec::FitnessSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoRoles,
    DuplicateRole,
    DuplicateId,
    UnknownRole,
    /// Requirement type placed on an aspect whose matrix cell is empty.
    AspectPhaseMismatch,
    /// Declared aspect disagrees with what the requirement actually targets.
    AspectTargetMismatch,
    InvalidRequirement,
    MetricScopeMismatch,
    CyclicProcess,
    UnknownActivity,
    ActivityWithoutRole,
    UnknownSubProcess,
    SchemaRoleNotInProcess,
    InvalidThreshold,
    InvalidFitness,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub category: ViolationKind,
    /// Location inside the specification document, e.g. `roles[1].requirements[0]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.category, self.path, self.message)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, category: ViolationKind, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            category,
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_aspect(
        &mut self,
        path: &str,
        kind: RequirementType,
        declared: Option<Aspect>,
        derived: AspectDerivation,
    ) {
        let effective = match (declared, derived) {
            (Some(d), _) => d,
            (None, AspectDerivation::Exactly(a)) => a,
            (None, AspectDerivation::AnySubset | AspectDerivation::Unknown) => return,
        };
        if phase_for(effective, kind).is_none() {
            self.push(
                ViolationKind::AspectPhaseMismatch,
                path,
                format!("{kind} requirements are not applicable to the {effective} aspect"),
            );
            return;
        }
        let consistent = match derived {
            AspectDerivation::Exactly(a) => a == effective,
            AspectDerivation::AnySubset => {
                matches!(effective, Aspect::PartnerSubset | Aspect::ServiceSubset)
            }
            AspectDerivation::Unknown => true,
        };
        if !consistent {
            self.push(
                ViolationKind::AspectTargetMismatch,
                path,
                format!("declared aspect '{effective}' does not match the requirement's target"),
            );
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum AspectDerivation {
    Exactly(Aspect),
    /// Mixed partner/service pair: either subset row applies.
    AnySubset,
    /// Target could not be resolved (already reported elsewhere).
    Unknown,
}

fn bad_number(x: f64) -> bool {
    !x.is_finite()
}

/// Every violation of the specification's structural invariants. Empty means valid.
pub fn validate_spec(spec: &VOSpecification) -> Vec<Violation> {
    let mut out = Collector(Vec::new());

    // roles
    if spec.roles.is_empty() {
        out.push(ViolationKind::NoRoles, "roles", "a specification needs at least one role");
    }
    let mut kinds: BTreeMap<&str, ElementKind> = BTreeMap::new();
    for (i, role) in spec.roles.iter().enumerate() {
        let at = format!("roles[{i}]");
        if role.name.trim().is_empty() {
            out.push(ViolationKind::InvalidRequirement, &at, "role name is empty");
        }
        if kinds.insert(&role.name, role.target_kind).is_some() {
            out.push(
                ViolationKind::DuplicateRole,
                &at,
                format!("role '{}' declared twice", role.name),
            );
        }
        out.check_aspect(
            &at,
            RequirementType::Role,
            role.aspect,
            AspectDerivation::Exactly(Aspect::single(role.target_kind)),
        );
        for (j, req) in role.requirements.iter().enumerate() {
            let at = format!("roles[{i}].requirements[{j}]");
            if req.path.parse::<AttributePath>().is_err() {
                out.push(
                    ViolationKind::InvalidRequirement,
                    &at,
                    format!("unknown attribute path '{}'", req.path),
                );
            }
            if bad_number(req.weight) || req.weight <= 0.0 {
                out.push(ViolationKind::InvalidRequirement, &at, "weight must be positive");
            }
            if let RequirementTarget::Numeric { optimal, reject, .. } = req.target {
                if bad_number(optimal) || bad_number(reject) || optimal == reject {
                    out.push(
                        ViolationKind::InvalidRequirement,
                        &at,
                        "optimal and reject must be finite and distinct",
                    );
                }
            }
        }
    }

    // process structure
    let process = &spec.protocol.process;
    let mut activity_index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut process_roles: BTreeSet<&str> = BTreeSet::new();
    for (i, act) in process.activities.iter().enumerate() {
        let at = format!("protocol.process.activities[{i}]");
        if activity_index.insert(&act.id, i).is_some() {
            out.push(ViolationKind::DuplicateId, &at, format!("activity '{}' declared twice", act.id));
        }
        if act.roles.is_empty() {
            out.push(
                ViolationKind::ActivityWithoutRole,
                &at,
                format!("activity '{}' references no role", act.id),
            );
        }
        for r in &act.roles {
            process_roles.insert(r);
            if !kinds.contains_key(r.as_str()) {
                out.push(ViolationKind::UnknownRole, &at, format!("unknown role '{r}'"));
            }
        }
    }
    let mut edges = Vec::new();
    for (i, (a, b)) in process.precedence.iter().enumerate() {
        let at = format!("protocol.process.precedence[{i}]");
        match (activity_index.get(a.as_str()), activity_index.get(b.as_str())) {
            (Some(&x), Some(&y)) => edges.push((x, y)),
            _ => out.push(
                ViolationKind::UnknownActivity,
                &at,
                format!("edge {a} -> {b} references an undeclared activity"),
            ),
        }
    }
    if topological_order(process.activities.len(), &edges).is_err() {
        out.push(
            ViolationKind::CyclicProcess,
            "protocol.process.precedence",
            "precedence graph has a cycle",
        );
    }
    for (name, members) in &process.sub_processes {
        for m in members {
            if !activity_index.contains_key(m.as_str()) {
                out.push(
                    ViolationKind::UnknownActivity,
                    format!("protocol.process.sub_processes.{name}"),
                    format!("unknown activity '{m}'"),
                );
            }
        }
    }

    // social network schema
    let schema = &spec.protocol.schema;
    let schema_roles: BTreeSet<&str> = schema.roles.iter().map(String::as_str).collect();
    if schema_roles.len() != schema.roles.len() {
        out.push(ViolationKind::DuplicateRole, "protocol.schema.roles", "schema roles must be unique");
    }
    for (i, r) in schema.roles.iter().enumerate() {
        let at = format!("protocol.schema.roles[{i}]");
        if !kinds.contains_key(r.as_str()) {
            out.push(ViolationKind::UnknownRole, &at, format!("unknown role '{r}'"));
        }
        if !process_roles.contains(r.as_str()) {
            out.push(
                ViolationKind::SchemaRoleNotInProcess,
                &at,
                format!("role '{r}' is not referenced by any activity"),
            );
        }
    }
    let mut social_ids = BTreeSet::new();
    for (i, req) in schema.requirements.iter().enumerate() {
        let at = format!("protocol.schema.requirements[{i}]");
        if !social_ids.insert(req.id.as_str()) {
            out.push(ViolationKind::DuplicateId, &at, format!("requirement '{}' declared twice", req.id));
        }
        let (a, b) = (&req.between.0, &req.between.1);
        let mut known = true;
        for r in [a, b] {
            if !schema_roles.contains(r.as_str()) {
                known = false;
                out.push(
                    ViolationKind::UnknownRole,
                    &at,
                    format!("unknown role '{r}' in social requirement"),
                );
            }
        }
        if req.relation_type.trim().is_empty() {
            out.push(ViolationKind::InvalidRequirement, &at, "relation type is empty");
        }
        if bad_number(req.weight) || req.weight <= 0.0 {
            out.push(ViolationKind::InvalidRequirement, &at, "weight must be positive");
        }
        if let Some(c) = &req.attribute_condition {
            if bad_number(c.optimal) || bad_number(c.reject) || c.optimal == c.reject {
                out.push(
                    ViolationKind::InvalidRequirement,
                    &at,
                    "optimal and reject must be finite and distinct",
                );
            }
        }
        let derived = match (known, kinds.get(a.as_str()), kinds.get(b.as_str())) {
            (true, Some(&ka), Some(_)) if a == b => AspectDerivation::Exactly(Aspect::single(ka)),
            (true, Some(ElementKind::Partner), Some(ElementKind::Partner)) => {
                AspectDerivation::Exactly(Aspect::PartnerSubset)
            }
            (true, Some(ElementKind::Service), Some(ElementKind::Service)) => {
                AspectDerivation::Exactly(Aspect::ServiceSubset)
            }
            (true, Some(_), Some(_)) => AspectDerivation::AnySubset,
            _ => AspectDerivation::Unknown,
        };
        out.check_aspect(&at, RequirementType::Social, req.aspect, derived);
    }

    // performance requirements and components
    let scope_aspect = |scope: &PerformanceScope, out: &mut Collector, at: &str| match scope {
        PerformanceScope::Process => AspectDerivation::Exactly(Aspect::Process),
        PerformanceScope::SubProcess(name) => {
            if !process.sub_processes.contains_key(name) {
                out.push(
                    ViolationKind::UnknownSubProcess,
                    at,
                    format!("unknown sub-process '{name}'"),
                );
            }
            AspectDerivation::Exactly(Aspect::ServiceSubset)
        }
        PerformanceScope::Role(name) => match kinds.get(name.as_str()) {
            Some(&k) => AspectDerivation::Exactly(Aspect::single(k)),
            None => {
                out.push(ViolationKind::UnknownRole, at, format!("unknown role '{name}'"));
                AspectDerivation::Unknown
            }
        },
    };
    let metric_fits = |metric: &Metric, scope: &PerformanceScope| match (metric, scope) {
        (_, PerformanceScope::Role(_)) => true, // reported as an aspect mismatch instead
        (Metric::ProcessDuration, PerformanceScope::Process) => true,
        (Metric::SubprocessResponseTime, PerformanceScope::SubProcess(_)) => true,
        (Metric::TotalCost | Metric::Indicator(_), _) => true,
        _ => false,
    };
    let mut perf_ids = BTreeSet::new();
    for (i, req) in spec.performance_requirements.iter().enumerate() {
        let at = format!("performance_requirements[{i}]");
        if !perf_ids.insert(req.id.as_str()) {
            out.push(ViolationKind::DuplicateId, &at, format!("requirement '{}' declared twice", req.id));
        }
        if bad_number(req.optimal) || bad_number(req.reject) || req.optimal == req.reject {
            out.push(
                ViolationKind::InvalidRequirement,
                &at,
                "optimal and reject must be finite and distinct",
            );
        }
        if bad_number(req.weight) || req.weight <= 0.0 {
            out.push(ViolationKind::InvalidRequirement, &at, "weight must be positive");
        }
        if !metric_fits(&req.metric, &req.scope) {
            out.push(
                ViolationKind::MetricScopeMismatch,
                &at,
                format!("metric {:?} cannot be measured on scope {:?}", req.metric, req.scope),
            );
        }
        let derived = scope_aspect(&req.scope, &mut out, &at);
        out.check_aspect(&at, RequirementType::Performance, req.aspect, derived);
    }
    let mut component_names = BTreeSet::new();
    for (i, c) in spec.performance_fitness.components.iter().enumerate() {
        let at = format!("performance_fitness.components[{i}]");
        if !component_names.insert(c.name.as_str()) {
            out.push(ViolationKind::DuplicateId, &at, format!("component '{}' declared twice", c.name));
        }
        if bad_number(c.weight) || c.weight < 0.0 {
            out.push(ViolationKind::InvalidFitness, &at, "weight must be non-negative");
        }
        if !metric_fits(&c.metric, &c.scope) {
            out.push(
                ViolationKind::MetricScopeMismatch,
                &at,
                format!("metric {:?} cannot be measured on scope {:?}", c.metric, c.scope),
            );
        }
        let derived = scope_aspect(&c.scope, &mut out, &at);
        out.check_aspect(&at, RequirementType::Performance, None, derived);
    }

    // fitness
    if spec.fitness.terms.is_empty() {
        out.push(ViolationKind::InvalidFitness, "fitness.terms", "fitness needs at least one term");
    }
    for (i, term) in spec.fitness.terms.iter().enumerate() {
        let at = format!("fitness.terms[{i}]");
        if bad_number(term.weight) || term.weight <= 0.0 {
            out.push(ViolationKind::InvalidFitness, &at, "weight must be positive");
        }
        if let FitnessSource::Indicator { min, max, .. } = &term.source {
            if bad_number(*min) || bad_number(*max) || min >= max {
                out.push(ViolationKind::InvalidFitness, &at, "indicator range needs min < max");
            }
        }
    }

    // thresholds
    let t = &spec.thresholds;
    for (name, v) in [("phase2_cutoff", t.phase2_cutoff), ("phase3_threshold", t.phase3_threshold)] {
        if !(0.0..=1.0).contains(&v) {
            out.push(
                ViolationKind::InvalidThreshold,
                format!("thresholds.{name}"),
                "must lie in [0, 1]",
            );
        }
    }
    if t.phase2_max_candidates == 0 {
        out.push(
            ViolationKind::InvalidThreshold,
            "thresholds.phase2_max_candidates",
            "must be positive",
        );
    }

    out.0
}
