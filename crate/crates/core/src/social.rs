//! Typed, attributed relation graph over registered elements, and evaluation
//! of social requirements against concrete role assignments.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribute::AttributeValue;
use crate::num::{satisfaction, weighted_mean};
use crate::registry::Registry;
use crate::spec::Aspect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    #[serde(rename = "type")]
    pub relation_type: String,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
}

impl Relation {
    pub fn new(
        id: impl Into<String>,
        relation_type: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Relation {
            id: id.into(),
            relation_type: relation_type.into(),
            source: source.into(),
            target: target.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Relation must run from the first role's element to the second's.
    Directed,
    /// Either orientation counts.
    #[default]
    Either,
}

/// Optional graded condition on a relation attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCondition {
    pub attribute: String,
    pub optimal: f64,
    pub reject: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialRequirement {
    pub id: String,
    pub between: (String, String),
    pub relation_type: String,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_condition: Option<AttributeCondition>,
    #[serde(default = "one")]
    pub weight: f64,
    /// Declared aspect; derived from the role kinds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<Aspect>,
}

fn one() -> f64 {
    1.0
}

impl SocialRequirement {
    pub fn new(
        id: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        relation_type: impl Into<String>,
    ) -> Self {
        SocialRequirement {
            id: id.into(),
            between: (a.into(), b.into()),
            relation_type: relation_type.into(),
            direction: Direction::Either,
            attribute_condition: None,
            weight: 1.0,
            aspect: None,
        }
    }

    pub fn directed(mut self) -> Self {
        self.direction = Direction::Directed;
        self
    }

    pub fn with_condition(mut self, attribute: &str, optimal: f64, reject: f64) -> Self {
        self.attribute_condition = Some(AttributeCondition {
            attribute: attribute.to_string(),
            optimal,
            reject,
            unit: None,
        });
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SocialNetworkSchema {
    #[serde(default)]
    pub roles: Vec<String>,
    #[serde(default)]
    pub requirements: Vec<SocialRequirement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementDegree {
    pub requirement: String,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEvaluation {
    pub degree: f64,
    pub breakdown: Vec<RequirementDegree>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("relation '{0}' already exists")]
    DuplicateId(String),
    #[error("relation '{relation}' references missing element '{endpoint}'")]
    DanglingEndpoint { relation: String, endpoint: String },
    #[error("relation '{0}' has an empty type")]
    EmptyType(String),
    #[error("assignment does not cover role '{0}'")]
    MissingRole(String),
}

/// Serialized form: `{relations: [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    #[serde(default)]
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialGraph {
    relations: BTreeMap<String, Relation>,
    // (source, target) -> relation ids
    by_pair: BTreeMap<(String, String), Vec<String>>,
    by_node: BTreeMap<String, BTreeSet<String>>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Relation> {
        self.relations.get(id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn add_relation(&mut self, relation: Relation, registry: &Registry) -> Result<String, GraphError> {
        if self.relations.contains_key(&relation.id) {
            return Err(GraphError::DuplicateId(relation.id));
        }
        if relation.relation_type.trim().is_empty() {
            return Err(GraphError::EmptyType(relation.id));
        }
        for endpoint in [&relation.source, &relation.target] {
            if !registry.contains(endpoint) {
                return Err(GraphError::DanglingEndpoint {
                    relation: relation.id.clone(),
                    endpoint: endpoint.clone(),
                });
            }
        }
        let id = relation.id.clone();
        self.by_pair
            .entry((relation.source.clone(), relation.target.clone()))
            .or_default()
            .push(id.clone());
        self.by_node
            .entry(relation.source.clone())
            .or_default()
            .insert(id.clone());
        self.by_node
            .entry(relation.target.clone())
            .or_default()
            .insert(id.clone());
        self.relations.insert(id.clone(), relation);
        Ok(id)
    }

    /// Relations touching `element` in either direction, ordered by id.
    pub fn relations_of(&self, element: &str) -> Vec<&Relation> {
        self.by_node
            .get(element)
            .into_iter()
            .flatten()
            .filter_map(|id| self.relations.get(id))
            .collect()
    }

    pub fn relations_of_type<'a>(&'a self, relation_type: &'a str) -> impl Iterator<Item = &'a Relation> {
        self.relations
            .values()
            .filter(move |r| r.relation_type == relation_type)
    }

    fn between<'a>(&'a self, source: &str, target: &str) -> impl Iterator<Item = &'a Relation> {
        self.by_pair
            .get(&(source.to_string(), target.to_string()))
            .into_iter()
            .flatten()
            .filter_map(|id| self.relations.get(id))
    }

    /// Degree of one requirement under an assignment of roles to element ids.
    pub fn evaluate_requirement(
        &self,
        req: &SocialRequirement,
        assignment: &BTreeMap<&str, &str>,
    ) -> Result<f64, GraphError> {
        let a = assignment
            .get(req.between.0.as_str())
            .ok_or_else(|| GraphError::MissingRole(req.between.0.clone()))?;
        let b = assignment
            .get(req.between.1.as_str())
            .ok_or_else(|| GraphError::MissingRole(req.between.1.clone()))?;
        Ok(self.requirement_degree(req, a, b))
    }

    pub(crate) fn requirement_degree(&self, req: &SocialRequirement, a: &str, b: &str) -> f64 {
        let forward = self.between(a, b);
        let candidates: Vec<&Relation> = match req.direction {
            Direction::Directed => forward.collect(),
            Direction::Either if a == b => forward.collect(),
            Direction::Either => forward.chain(self.between(b, a)).collect(),
        };
        candidates
            .into_iter()
            .filter(|r| r.relation_type == req.relation_type)
            .map(|r| relation_degree(r, req.attribute_condition.as_ref()))
            .fold(0.0, f64::max)
    }

    pub fn evaluate_schema(
        &self,
        schema: &SocialNetworkSchema,
        assignment: &BTreeMap<&str, &str>,
    ) -> Result<SchemaEvaluation, GraphError> {
        for role in &schema.roles {
            if !assignment.contains_key(role.as_str()) {
                return Err(GraphError::MissingRole(role.clone()));
            }
        }
        let mut breakdown = Vec::with_capacity(schema.requirements.len());
        for req in &schema.requirements {
            breakdown.push(RequirementDegree {
                requirement: req.id.clone(),
                degree: self.evaluate_requirement(req, assignment)?,
            });
        }
        let degree = weighted_mean(
            breakdown
                .iter()
                .zip(&schema.requirements)
                .map(|(d, r)| (d.degree, r.weight)),
        )
        .unwrap_or(1.0);
        Ok(SchemaEvaluation { degree, breakdown })
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            relations: self.relations.values().cloned().collect(),
        }
    }

    pub fn from_document(doc: GraphDocument, registry: &Registry) -> Result<Self, GraphError> {
        let mut g = SocialGraph::new();
        for r in doc.relations {
            g.add_relation(r, registry)?;
        }
        Ok(g)
    }
}

fn relation_degree(relation: &Relation, condition: Option<&AttributeCondition>) -> f64 {
    let Some(cond) = condition else {
        return 1.0;
    };
    match relation.attributes.get(&cond.attribute).and_then(|v| v.as_number()) {
        Some((x, unit)) if unit == cond.unit.as_deref() => satisfaction(x, cond.optimal, cond.reject),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Element;

    fn registry() -> Registry {
        let mut r = Registry::new();
        for id in ["A", "B", "C"] {
            r.register_element(Element::partner(id, id), vec![]).unwrap();
        }
        r
    }

    fn assign<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn existence_requirement() {
        let reg = registry();
        let mut g = SocialGraph::new();
        let req = SocialRequirement::new("r", "X", "Y", "past_cooperation");
        let a = assign(&[("X", "A"), ("Y", "B")]);
        assert_eq!(g.evaluate_requirement(&req, &a).unwrap(), 0.0);
        g.add_relation(Relation::new("e1", "past_cooperation", "A", "B"), &reg)
            .unwrap();
        assert_eq!(g.evaluate_requirement(&req, &a).unwrap(), 1.0);
        assert_eq!(g.relations_of("A").len(), 1);
    }

    #[test]
    fn dangling_endpoint_rejected() {
        let reg = registry();
        let mut g = SocialGraph::new();
        let err = g
            .add_relation(Relation::new("e1", "recognition", "A", "P9"), &reg)
            .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEndpoint { ref endpoint, .. } if endpoint == "P9"));
        assert!(g
            .add_relation(Relation::new("e2", " ", "A", "B"), &reg)
            .is_err());
    }

    #[test]
    fn direction_semantics() {
        let reg = registry();
        let mut g = SocialGraph::new();
        g.add_relation(Relation::new("e1", "recommendation", "B", "A"), &reg)
            .unwrap();
        let a = assign(&[("X", "A"), ("Y", "B")]);
        let directed = SocialRequirement::new("r", "X", "Y", "recommendation").directed();
        let either = SocialRequirement::new("r", "X", "Y", "recommendation");
        assert_eq!(g.evaluate_requirement(&directed, &a).unwrap(), 0.0);
        assert_eq!(g.evaluate_requirement(&either, &a).unwrap(), 1.0);
    }

    #[test]
    fn attribute_condition_interpolates_and_takes_best() {
        let reg = registry();
        let mut g = SocialGraph::new();
        g.add_relation(
            Relation::new("e1", "past_cooperation", "A", "B")
                .with_attribute("volume", AttributeValue::plain(5.0)),
            &reg,
        )
        .unwrap();
        let req = SocialRequirement::new("r", "X", "Y", "past_cooperation").with_condition("volume", 10.0, 0.0);
        let a = assign(&[("X", "A"), ("Y", "B")]);
        assert_eq!(g.evaluate_requirement(&req, &a).unwrap(), 0.5);
        g.add_relation(
            Relation::new("e2", "past_cooperation", "B", "A")
                .with_attribute("volume", AttributeValue::plain(8.0)),
            &reg,
        )
        .unwrap();
        assert_eq!(g.evaluate_requirement(&req, &a).unwrap(), 0.8);
    }

    #[test]
    fn schema_mean_and_missing_role() {
        let reg = registry();
        let mut g = SocialGraph::new();
        g.add_relation(Relation::new("e1", "past_cooperation", "A", "B"), &reg)
            .unwrap();
        let schema = SocialNetworkSchema {
            roles: vec!["X".into(), "Y".into(), "Z".into()],
            requirements: vec![
                SocialRequirement::new("r1", "X", "Y", "past_cooperation"),
                SocialRequirement::new("r2", "Y", "Z", "past_cooperation"),
            ],
        };
        let a = assign(&[("X", "A"), ("Y", "B"), ("Z", "C")]);
        let ev = g.evaluate_schema(&schema, &a).unwrap();
        assert_eq!(ev.degree, 0.5);
        assert_eq!(ev.breakdown[0].degree, 1.0);
        assert_eq!(ev.breakdown[1].degree, 0.0);
        let partial = assign(&[("X", "A"), ("Y", "B")]);
        assert_eq!(
            g.evaluate_schema(&schema, &partial).unwrap_err(),
            GraphError::MissingRole("Z".into())
        );
        let empty = SocialNetworkSchema::default();
        assert_eq!(g.evaluate_schema(&empty, &a).unwrap().degree, 1.0);
    }
}
