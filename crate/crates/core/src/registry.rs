//! Competence and service registry.
//!
//! Partners carry competence records in the 4-C shape (competence name,
//! capabilities, cost, conspicuity evidence); services carry functional and
//! non-functional descriptions. The registry answers conjunctive attribute
//! searches and scores how well an element conforms to a role.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribute::{AttributeError, AttributeValue, CmpOp, Quantity};
use crate::num::{satisfaction, weighted_mean};
use crate::spec::{RequirementTarget, Role, RoleRequirement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Partner,
    Service,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Partner => "partner",
            ElementKind::Service => "service",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub kind: ElementKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_id: Option<String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
}

impl Element {
    pub fn partner(id: impl Into<String>, name: impl Into<String>) -> Self {
        Element {
            id: id.into(),
            kind: ElementKind::Partner,
            name: name.into(),
            provider_id: None,
            attributes: BTreeMap::new(),
        }
    }

    pub fn service(
        id: impl Into<String>,
        name: impl Into<String>,
        provider: impl Into<String>,
    ) -> Self {
        Element {
            id: id.into(),
            kind: ElementKind::Service,
            name: name.into(),
            provider_id: Some(provider.into()),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }
}

/// Evidence backing a competence claim. Informational only; never scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub reference: String,
    pub issued: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetenceRecord {
    pub owner_id: String,
    pub competence_name: String,
    #[serde(default)]
    pub capabilities: BTreeMap<String, Quantity>,
    pub cost: Quantity,
    #[serde(default)]
    pub conspicuity: Vec<Evidence>,
}

impl CompetenceRecord {
    pub fn new(owner: impl Into<String>, name: impl Into<String>, cost: Quantity) -> Self {
        CompetenceRecord {
            owner_id: owner.into(),
            competence_name: name.into(),
            capabilities: BTreeMap::new(),
            cost,
            conspicuity: Vec::new(),
        }
    }

    pub fn with_capability(mut self, resource: impl Into<String>, amount: Quantity) -> Self {
        self.capabilities.insert(resource.into(), amount);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescription {
    pub service_id: String,
    #[serde(default)]
    pub functional: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub non_functional: BTreeMap<String, AttributeValue>,
}

impl ServiceDescription {
    pub fn new(service: impl Into<String>) -> Self {
        ServiceDescription {
            service_id: service.into(),
            functional: BTreeMap::new(),
            non_functional: BTreeMap::new(),
        }
    }

    pub fn with_non_functional(mut self, name: impl Into<String>, v: AttributeValue) -> Self {
        self.non_functional.insert(name.into(), v);
        self
    }

    pub fn with_functional(mut self, name: impl Into<String>, v: AttributeValue) -> Self {
        self.functional.insert(name.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "description", rename_all = "snake_case")]
pub enum Description {
    Competence(CompetenceRecord),
    Service(ServiceDescription),
}

/// Where a predicate or requirement looks for its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AttributePath {
    Id,
    Name,
    Kind,
    Provider,
    CompetenceName,
    Capability(String),
    Cost,
    Attribute(String),
    Functional(String),
    NonFunctional(String),
}

impl FromStr for AttributePath {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RegistryError::InvalidPath(s.to_string());
        let (head, tail) = match s.split_once('.') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let named = |f: fn(String) -> AttributePath| match tail {
            Some(t) if !t.is_empty() => Ok(f(t.to_string())),
            _ => Err(bad()),
        };
        let bare = |p: AttributePath| match tail {
            None => Ok(p),
            Some(_) => Err(bad()),
        };
        match head {
            "id" => bare(AttributePath::Id),
            "name" => bare(AttributePath::Name),
            "kind" => bare(AttributePath::Kind),
            "provider" => bare(AttributePath::Provider),
            "competence_name" => bare(AttributePath::CompetenceName),
            "cost" => bare(AttributePath::Cost),
            "capability" => named(AttributePath::Capability),
            "attributes" => named(AttributePath::Attribute),
            "functional" => named(AttributePath::Functional),
            "non_functional" => named(AttributePath::NonFunctional),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AttributePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributePath::Id => f.write_str("id"),
            AttributePath::Name => f.write_str("name"),
            AttributePath::Kind => f.write_str("kind"),
            AttributePath::Provider => f.write_str("provider"),
            AttributePath::CompetenceName => f.write_str("competence_name"),
            AttributePath::Cost => f.write_str("cost"),
            AttributePath::Capability(r) => write!(f, "capability.{r}"),
            AttributePath::Attribute(a) => write!(f, "attributes.{a}"),
            AttributePath::Functional(a) => write!(f, "functional.{a}"),
            AttributePath::NonFunctional(a) => write!(f, "non_functional.{a}"),
        }
    }
}

/// One attribute test of a search query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub path: String,
    pub op: CmpOp,
    pub value: AttributeValue,
}

impl Predicate {
    pub fn new(path: impl Into<String>, op: CmpOp, value: AttributeValue) -> Self {
        Predicate {
            path: path.into(),
            op,
            value,
        }
    }

    /// Structural check that does not need registry contents.
    pub fn check(&self) -> Result<AttributePath, RegistryError> {
        let path: AttributePath = self.path.parse()?;
        if self.op.is_ordering() && self.value.as_number().is_none() {
            return Err(RegistryError::MalformedPredicate(format!(
                "ordering operator on non-numeric value at '{}'",
                self.path
            )));
        }
        Ok(path)
    }

    /// True if any of `values` satisfies the predicate.
    pub fn holds_for(&self, values: &[AttributeValue]) -> Result<bool, RegistryError> {
        for v in values {
            if v.satisfies(self.op, &self.value)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("element '{0}' is already registered")]
    DuplicateId(String),
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("service '{service}' references missing provider '{provider}'")]
    DanglingProvider { service: String, provider: String },
    #[error("element '{0}': {1}")]
    InvalidElement(String, String),
    #[error("invalid attribute path '{0}'")]
    InvalidPath(String),
    #[error("malformed predicate: {0}")]
    MalformedPredicate(String),
    #[error("malformed requirement: {0}")]
    MalformedRequirement(String),
    #[error(transparent)]
    Attribute(#[from] AttributeError),
}

/// Serialized form: `{elements, competences, services}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegistryDocument {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub competences: Vec<CompetenceRecord>,
    #[serde(default)]
    pub services: Vec<ServiceDescription>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    elements: BTreeMap<String, Element>,
    competences: BTreeMap<String, Vec<CompetenceRecord>>,
    services: BTreeMap<String, Vec<ServiceDescription>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Element> {
        self.elements.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.elements.contains_key(id)
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn elements_of_kind(&self, kind: ElementKind) -> impl Iterator<Item = &Element> {
        self.elements.values().filter(move |e| e.kind == kind)
    }

    pub fn competences_of(&self, id: &str) -> &[CompetenceRecord] {
        self.competences.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn services_of(&self, id: &str) -> &[ServiceDescription] {
        self.services.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn check_element(&self, element: &Element, descriptions: &[Description]) -> Result<(), RegistryError> {
        if element.id.is_empty() {
            return Err(RegistryError::InvalidElement(
                element.id.clone(),
                "empty id".into(),
            ));
        }
        match (element.kind, &element.provider_id) {
            (ElementKind::Partner, Some(_)) => {
                return Err(RegistryError::InvalidElement(
                    element.id.clone(),
                    "a partner has no provider".into(),
                ))
            }
            (ElementKind::Service, None) => {
                return Err(RegistryError::InvalidElement(
                    element.id.clone(),
                    "a service needs a provider".into(),
                ))
            }
            (ElementKind::Service, Some(p)) => match self.elements.get(p) {
                Some(provider) if provider.kind == ElementKind::Partner => {}
                _ => {
                    return Err(RegistryError::DanglingProvider {
                        service: element.id.clone(),
                        provider: p.clone(),
                    })
                }
            },
            (ElementKind::Partner, None) => {}
        }
        for d in descriptions {
            match d {
                Description::Competence(c) => {
                    if element.kind != ElementKind::Partner || c.owner_id != element.id {
                        return Err(RegistryError::InvalidElement(
                            element.id.clone(),
                            format!("competence '{}' must be owned by this partner", c.competence_name),
                        ));
                    }
                    let bad_amount = |q: &Quantity| !(q.value.is_finite() && q.value >= 0.0);
                    if c.capabilities.values().any(bad_amount) || bad_amount(&c.cost) {
                        return Err(RegistryError::InvalidElement(
                            element.id.clone(),
                            format!("competence '{}' has a negative or non-finite amount", c.competence_name),
                        ));
                    }
                }
                Description::Service(s) => {
                    if element.kind != ElementKind::Service || s.service_id != element.id {
                        return Err(RegistryError::InvalidElement(
                            element.id.clone(),
                            "service description must describe this service".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn store_descriptions(&mut self, id: &str, descriptions: Vec<Description>) {
        let mut comps = Vec::new();
        let mut servs = Vec::new();
        for d in descriptions {
            match d {
                Description::Competence(c) => comps.push(c),
                Description::Service(s) => servs.push(s),
            }
        }
        if comps.is_empty() {
            self.competences.remove(id);
        } else {
            self.competences.insert(id.to_string(), comps);
        }
        if servs.is_empty() {
            self.services.remove(id);
        } else {
            self.services.insert(id.to_string(), servs);
        }
    }

    pub fn register_element(
        &mut self,
        element: Element,
        descriptions: Vec<Description>,
    ) -> Result<String, RegistryError> {
        if self.elements.contains_key(&element.id) {
            return Err(RegistryError::DuplicateId(element.id));
        }
        self.check_element(&element, &descriptions)?;
        let id = element.id.clone();
        self.store_descriptions(&id, descriptions);
        self.elements.insert(id.clone(), element);
        Ok(id)
    }

    /// Replaces an element and all of its descriptions. The kind may not change.
    pub fn update_element(
        &mut self,
        element: Element,
        descriptions: Vec<Description>,
    ) -> Result<String, RegistryError> {
        let Some(existing) = self.elements.get(&element.id) else {
            return Err(RegistryError::UnknownElement(element.id));
        };
        if existing.kind != element.kind {
            return Err(RegistryError::InvalidElement(
                element.id.clone(),
                "kind cannot change on update".into(),
            ));
        }
        self.check_element(&element, &descriptions)?;
        let id = element.id.clone();
        self.store_descriptions(&id, descriptions);
        self.elements.insert(id.clone(), element);
        Ok(id)
    }

    /// All values found at `path` for the element. Multi-valued paths (one per
    /// competence record or service description) yield several entries.
    pub fn resolve(&self, id: &str, path: &AttributePath) -> Vec<AttributeValue> {
        let Some(e) = self.elements.get(id) else {
            return Vec::new();
        };
        match path {
            AttributePath::Id => vec![AttributeValue::text(e.id.clone())],
            AttributePath::Name => vec![AttributeValue::text(e.name.clone())],
            AttributePath::Kind => vec![AttributeValue::token(e.kind.to_string())],
            AttributePath::Provider => e
                .provider_id
                .iter()
                .map(|p| AttributeValue::text(p.clone()))
                .collect(),
            AttributePath::CompetenceName => self
                .competences_of(id)
                .iter()
                .map(|c| AttributeValue::text(c.competence_name.clone()))
                .collect(),
            AttributePath::Capability(r) => self
                .competences_of(id)
                .iter()
                .filter_map(|c| c.capabilities.get(r).map(Quantity::to_attribute))
                .collect(),
            AttributePath::Cost => self
                .competences_of(id)
                .iter()
                .map(|c| c.cost.to_attribute())
                .collect(),
            AttributePath::Attribute(a) => e.attributes.get(a).cloned().into_iter().collect(),
            AttributePath::Functional(a) => self
                .services_of(id)
                .iter()
                .filter_map(|s| s.functional.get(a).cloned())
                .collect(),
            AttributePath::NonFunctional(a) => self
                .services_of(id)
                .iter()
                .filter_map(|s| s.non_functional.get(a).cloned())
                .collect(),
        }
    }

    pub fn matches(&self, id: &str, query: &[(AttributePath, &Predicate)]) -> Result<bool, RegistryError> {
        for (path, pred) in query {
            if !pred.holds_for(&self.resolve(id, path))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Elements satisfying every predicate, ordered by id.
    pub fn search(&self, query: &[Predicate]) -> Result<Vec<&Element>, RegistryError> {
        let compiled = compile(query)?;
        let mut out = Vec::new();
        for e in self.elements.values() {
            if self.matches(&e.id, &compiled)? {
                out.push(e);
            }
        }
        Ok(out)
    }

    /// Weighted conformance of an element to a role, in `[0, 1]`.
    pub fn evaluate_conformance(&self, element_id: &str, role: &Role) -> Result<f64, RegistryError> {
        if !self.elements.contains_key(element_id) {
            return Err(RegistryError::UnknownElement(element_id.to_string()));
        }
        let mut scored = Vec::with_capacity(role.requirements.len());
        for req in &role.requirements {
            let path = check_requirement(req)?;
            let values = self.resolve(element_id, &path);
            match requirement_degree(req, &values) {
                Some(d) => scored.push((d, req.weight)),
                None if req.mandatory => scored.push((0.0, req.weight)),
                None => {}
            }
        }
        Ok(weighted_mean(scored).unwrap_or(1.0))
    }

    pub fn to_document(&self) -> RegistryDocument {
        RegistryDocument {
            elements: self.elements.values().cloned().collect(),
            competences: self.competences.values().flatten().cloned().collect(),
            services: self.services.values().flatten().cloned().collect(),
        }
    }

    /// Builds a registry from a document, applying the same checks as
    /// registration. Partners are inserted before services.
    pub fn from_document(doc: RegistryDocument) -> Result<Self, RegistryError> {
        let mut descriptions: BTreeMap<String, Vec<Description>> = BTreeMap::new();
        for c in doc.competences {
            descriptions
                .entry(c.owner_id.clone())
                .or_default()
                .push(Description::Competence(c));
        }
        for s in doc.services {
            descriptions
                .entry(s.service_id.clone())
                .or_default()
                .push(Description::Service(s));
        }
        let mut reg = Registry::new();
        let (partners, services): (Vec<_>, Vec<_>) = doc
            .elements
            .into_iter()
            .partition(|e| e.kind == ElementKind::Partner);
        for e in partners.into_iter().chain(services) {
            let d = descriptions.remove(&e.id).unwrap_or_default();
            reg.register_element(e, d)?;
        }
        if let Some(orphan) = descriptions.keys().next() {
            return Err(RegistryError::UnknownElement(orphan.clone()));
        }
        Ok(reg)
    }
}

impl Serialize for Registry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Registry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = RegistryDocument::deserialize(d)?;
        Registry::from_document(doc).map_err(serde::de::Error::custom)
    }
}

pub fn compile(query: &[Predicate]) -> Result<Vec<(AttributePath, &Predicate)>, RegistryError> {
    query.iter().map(|p| Ok((p.check()?, p))).collect()
}

pub(crate) fn check_requirement(req: &RoleRequirement) -> Result<AttributePath, RegistryError> {
    let path: AttributePath = req
        .path
        .parse()
        .map_err(|_| RegistryError::MalformedRequirement(format!("invalid path '{}'", req.path)))?;
    if !(req.weight.is_finite() && req.weight > 0.0) {
        return Err(RegistryError::MalformedRequirement(format!(
            "weight of '{}' must be positive",
            req.path
        )));
    }
    if let RequirementTarget::Numeric { optimal, reject, .. } = &req.target {
        if !(optimal.is_finite() && reject.is_finite()) || optimal == reject {
            return Err(RegistryError::MalformedRequirement(format!(
                "'{}' needs finite, distinct optimal and reject values",
                req.path
            )));
        }
    }
    Ok(path)
}

/// Best degree over the resolved values; `None` when nothing comparable exists.
fn requirement_degree(req: &RoleRequirement, values: &[AttributeValue]) -> Option<f64> {
    match &req.target {
        RequirementTarget::Numeric {
            optimal,
            reject,
            unit,
        } => values
            .iter()
            .filter_map(|v| match v.as_number() {
                Some((x, u)) if u == unit.as_deref() => Some(satisfaction(x, *optimal, *reject)),
                _ => None,
            })
            .reduce(f64::max),
        RequirementTarget::Match { value } => {
            if values.is_empty() {
                return None;
            }
            let hit = values.iter().any(|v| match v {
                AttributeValue::List { .. } => v.contains(value).unwrap_or(false),
                _ => v.matches(value).unwrap_or(false),
            });
            Some(if hit { 1.0 } else { 0.0 })
        }
    }
}
