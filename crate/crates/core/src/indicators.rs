//! Indicator expressions over registry and social-graph state, and the
//! observer-style monitor that recomputes them on store events and raises
//! edge-triggered alarm notifications.
//!
//! Expressions are JSON trees tagged by `op`:
//!
//! ```json
//! {"op": "div",
//!  "lhs": {"op": "count", "query": {"from": "relations", "type": "past_cooperation"}},
//!  "rhs": {"op": "count", "query": {"from": "elements", "kind": "partner",
//!          "filter": [{"path": "competence_name", "op": "eq",
//!                      "value": {"type": "text", "value": "masonry"}}]}}}
//! ```
//!
//! The ratio above relates recorded collaboration history to claimed
//! competences; it is the kind of cross-check indicators are meant for.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribute::{AttributeValue, Comparison};
use crate::registry::{compile, AttributePath, ElementKind, Predicate, Registry, RegistryError};
use crate::social::SocialGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum QuerySource {
    Elements {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kind: Option<ElementKind>,
        #[serde(default)]
        filter: Vec<Predicate>,
    },
    Relations {
        #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
        relation_type: Option<String>,
        /// Element id that must be the source or target.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<String>,
        /// Predicates over relation attributes; `path` is the attribute name.
        #[serde(default)]
        filter: Vec<Predicate>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataQuery {
    #[serde(flatten)]
    pub source: QuerySource,
    /// Numeric projection: a registry attribute path for elements, an
    /// attribute name for relations. Needed by sum/min/max/avg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
}

impl DataQuery {
    pub fn elements(kind: Option<ElementKind>, filter: Vec<Predicate>) -> Self {
        DataQuery {
            source: QuerySource::Elements { kind, filter },
            project: None,
        }
    }

    pub fn relations(relation_type: Option<&str>) -> Self {
        DataQuery {
            source: QuerySource::Relations {
                relation_type: relation_type.map(str::to_string),
                endpoint: None,
                filter: Vec::new(),
            },
            project: None,
        }
    }

    pub fn project(mut self, path: &str) -> Self {
        self.project = Some(path.to_string());
        self
    }

    fn scope(&self) -> Scope {
        match self.source {
            QuerySource::Elements { .. } => Scope::Elements,
            QuerySource::Relations { .. } => Scope::Relations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum IndicatorExpr {
    #[serde(alias = "lit")]
    Literal { value: f64 },
    Add { lhs: Box<IndicatorExpr>, rhs: Box<IndicatorExpr> },
    Sub { lhs: Box<IndicatorExpr>, rhs: Box<IndicatorExpr> },
    Mul { lhs: Box<IndicatorExpr>, rhs: Box<IndicatorExpr> },
    Div { lhs: Box<IndicatorExpr>, rhs: Box<IndicatorExpr> },
    Count { query: DataQuery },
    Sum { query: DataQuery },
    Min { query: DataQuery },
    Max { query: DataQuery },
    Avg { query: DataQuery },
    /// 1 when `lhs cmp rhs` holds, else 0.
    Compare {
        cmp: Comparison,
        lhs: Box<IndicatorExpr>,
        rhs: Box<IndicatorExpr>,
    },
}

impl IndicatorExpr {
    pub fn lit(value: f64) -> Self {
        IndicatorExpr::Literal { value }
    }

    pub fn count(query: DataQuery) -> Self {
        IndicatorExpr::Count { query }
    }

    pub fn sum(query: DataQuery) -> Self {
        IndicatorExpr::Sum { query }
    }

    pub fn avg(query: DataQuery) -> Self {
        IndicatorExpr::Avg { query }
    }

    pub fn div(lhs: IndicatorExpr, rhs: IndicatorExpr) -> Self {
        IndicatorExpr::Div {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Parses and type-checks a JSON expression.
    pub fn from_json(text: &str) -> Result<Self, ExprError> {
        let expr: IndicatorExpr = serde_json::from_str(text).map_err(|e| ExprError {
            position: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        expr.type_check()?;
        Ok(expr)
    }

    pub fn type_check(&self) -> Result<(), ExprError> {
        self.check_at("")
    }

    fn check_at(&self, at: &str) -> Result<(), ExprError> {
        let fault = |position: String, message: String| Err(ExprError { position, message });
        match self {
            IndicatorExpr::Literal { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    fault(at_or_root(at), "literal must be finite".into())
                }
            }
            IndicatorExpr::Add { lhs, rhs }
            | IndicatorExpr::Sub { lhs, rhs }
            | IndicatorExpr::Mul { lhs, rhs }
            | IndicatorExpr::Div { lhs, rhs }
            | IndicatorExpr::Compare { lhs, rhs, .. } => {
                lhs.check_at(&format!("{at}/lhs"))?;
                rhs.check_at(&format!("{at}/rhs"))
            }
            IndicatorExpr::Count { query } => check_query(query, &format!("{at}/query"), false),
            IndicatorExpr::Sum { query }
            | IndicatorExpr::Min { query }
            | IndicatorExpr::Max { query }
            | IndicatorExpr::Avg { query } => check_query(query, &format!("{at}/query"), true),
        }
    }

    fn collect_scopes(&self, into: &mut BTreeSet<Scope>) {
        match self {
            IndicatorExpr::Literal { .. } => {}
            IndicatorExpr::Add { lhs, rhs }
            | IndicatorExpr::Sub { lhs, rhs }
            | IndicatorExpr::Mul { lhs, rhs }
            | IndicatorExpr::Div { lhs, rhs }
            | IndicatorExpr::Compare { lhs, rhs, .. } => {
                lhs.collect_scopes(into);
                rhs.collect_scopes(into);
            }
            IndicatorExpr::Count { query }
            | IndicatorExpr::Sum { query }
            | IndicatorExpr::Min { query }
            | IndicatorExpr::Max { query }
            | IndicatorExpr::Avg { query } => {
                into.insert(query.scope());
            }
        }
    }

    pub fn evaluate(&self, registry: &Registry, graph: &SocialGraph) -> Result<f64, EvalError> {
        let bin = |lhs: &IndicatorExpr, rhs: &IndicatorExpr| -> Result<(f64, f64), EvalError> {
            Ok((lhs.evaluate(registry, graph)?, rhs.evaluate(registry, graph)?))
        };
        let value = match self {
            IndicatorExpr::Literal { value } => *value,
            IndicatorExpr::Add { lhs, rhs } => bin(lhs, rhs).map(|(a, b)| a + b)?,
            IndicatorExpr::Sub { lhs, rhs } => bin(lhs, rhs).map(|(a, b)| a - b)?,
            IndicatorExpr::Mul { lhs, rhs } => bin(lhs, rhs).map(|(a, b)| a * b)?,
            IndicatorExpr::Div { lhs, rhs } => {
                let (a, b) = bin(lhs, rhs)?;
                if b == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a / b
            }
            IndicatorExpr::Compare { cmp, lhs, rhs } => {
                let (a, b) = bin(lhs, rhs)?;
                if cmp.holds(a, b) {
                    1.0
                } else {
                    0.0
                }
            }
            IndicatorExpr::Count { query } => count(query, registry, graph)? as f64,
            IndicatorExpr::Sum { query } => projected(query, registry, graph)?.iter().sum(),
            IndicatorExpr::Min { query } => projected(query, registry, graph)?
                .into_iter()
                .reduce(f64::min)
                .ok_or(EvalError::EmptyAggregate)?,
            IndicatorExpr::Max { query } => projected(query, registry, graph)?
                .into_iter()
                .reduce(f64::max)
                .ok_or(EvalError::EmptyAggregate)?,
            IndicatorExpr::Avg { query } => {
                let values = projected(query, registry, graph)?;
                if values.is_empty() {
                    return Err(EvalError::EmptyAggregate);
                }
                values.iter().sum::<f64>() / values.len() as f64
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn at_or_root(at: &str) -> String {
    if at.is_empty() {
        "/".to_string()
    } else {
        at.to_string()
    }
}

fn check_query(query: &DataQuery, at: &str, needs_projection: bool) -> Result<(), ExprError> {
    let fault = |position: String, message: String| Err(ExprError { position, message });
    let filters = match &query.source {
        QuerySource::Elements { filter, .. } => {
            for (i, p) in filter.iter().enumerate() {
                if let Err(e) = p.check() {
                    return fault(format!("{at}/filter/{i}"), e.to_string());
                }
            }
            filter
        }
        QuerySource::Relations { filter, .. } => filter,
    };
    for (i, p) in filters.iter().enumerate() {
        if p.op.is_ordering() && p.value.as_number().is_none() {
            return fault(
                format!("{at}/filter/{i}"),
                "ordering operator needs a numeric value".into(),
            );
        }
    }
    match (&query.project, &query.source) {
        (None, _) if needs_projection => fault(
            format!("{at}/project"),
            "aggregate needs a numeric projection".into(),
        ),
        (Some(p), QuerySource::Elements { .. }) => match p.parse::<AttributePath>() {
            Ok(_) => Ok(()),
            Err(e) => fault(format!("{at}/project"), e.to_string()),
        },
        (Some(p), QuerySource::Relations { .. }) if p.is_empty() => {
            fault(format!("{at}/project"), "empty attribute name".into())
        }
        _ => Ok(()),
    }
}

fn matching_elements<'a>(
    kind: Option<ElementKind>,
    filter: &[Predicate],
    registry: &'a Registry,
) -> Result<Vec<&'a str>, EvalError> {
    let compiled = compile(filter)?;
    let mut out = Vec::new();
    for e in registry.elements() {
        if kind.is_some_and(|k| k != e.kind) {
            continue;
        }
        if registry.matches(&e.id, &compiled)? {
            out.push(e.id.as_str());
        }
    }
    Ok(out)
}

fn matching_relations<'a>(
    relation_type: Option<&str>,
    endpoint: Option<&str>,
    filter: &[Predicate],
    graph: &'a SocialGraph,
) -> Result<Vec<&'a crate::social::Relation>, EvalError> {
    let mut out = Vec::new();
    'rel: for r in graph.relations() {
        if relation_type.is_some_and(|t| t != r.relation_type) {
            continue;
        }
        if endpoint.is_some_and(|e| e != r.source && e != r.target) {
            continue;
        }
        for p in filter {
            let held = match r.attributes.get(&p.path) {
                Some(v) => v.satisfies(p.op, &p.value).map_err(RegistryError::from)?,
                None => false,
            };
            if !held {
                continue 'rel;
            }
        }
        out.push(r);
    }
    Ok(out)
}

fn count(query: &DataQuery, registry: &Registry, graph: &SocialGraph) -> Result<usize, EvalError> {
    match &query.source {
        QuerySource::Elements { kind, filter } => Ok(matching_elements(*kind, filter, registry)?.len()),
        QuerySource::Relations {
            relation_type,
            endpoint,
            filter,
        } => Ok(matching_relations(relation_type.as_deref(), endpoint.as_deref(), filter, graph)?.len()),
    }
}

/// Numbers produced by the projection, all sharing one unit tag.
fn projected(query: &DataQuery, registry: &Registry, graph: &SocialGraph) -> Result<Vec<f64>, EvalError> {
    let Some(project) = &query.project else {
        return Err(EvalError::MissingProjection);
    };
    let raw: Vec<AttributeValue> = match &query.source {
        QuerySource::Elements { kind, filter } => {
            let path: AttributePath = project.parse()?;
            matching_elements(*kind, filter, registry)?
                .into_iter()
                .flat_map(|id| registry.resolve(id, &path))
                .collect()
        }
        QuerySource::Relations {
            relation_type,
            endpoint,
            filter,
        } => matching_relations(relation_type.as_deref(), endpoint.as_deref(), filter, graph)?
            .into_iter()
            .filter_map(|r| r.attributes.get(project).cloned())
            .collect(),
    };
    let mut unit: Option<Option<String>> = None;
    let mut out = Vec::with_capacity(raw.len());
    for v in &raw {
        let Some((x, u)) = v.as_number() else {
            continue;
        };
        match &unit {
            None => unit = Some(u.map(str::to_string)),
            Some(seen) if seen.as_deref() != u => {
                return Err(EvalError::UnitMismatch(project.clone()));
            }
            _ => {}
        }
        out.push(x);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("malformed expression at {position}: {message}")]
pub struct ExprError {
    pub position: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("aggregate over an empty set")]
    EmptyAggregate,
    #[error("aggregate needs a projection")]
    MissingProjection,
    #[error("projected values of '{0}' carry different units")]
    UnitMismatch(String),
    #[error("result is not finite")]
    NonFinite,
    #[error(transparent)]
    Query(#[from] RegistryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IndicatorValue {
    Available { value: f64 },
    Unavailable { reason: String },
}

impl IndicatorValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            IndicatorValue::Available { value } => Some(*value),
            IndicatorValue::Unavailable { .. } => None,
        }
    }

    fn from_result(r: Result<f64, EvalError>) -> Self {
        match r {
            Ok(value) => IndicatorValue::Available { value },
            Err(e) => IndicatorValue::Unavailable {
                reason: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub cmp: Comparison,
    pub threshold: f64,
}

impl Alarm {
    pub fn is_raised(&self, value: &IndicatorValue) -> bool {
        value
            .value()
            .is_some_and(|v| self.cmp.holds(v, self.threshold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub id: String,
    pub name: String,
    pub expression: IndicatorExpr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm: Option<Alarm>,
    #[serde(default)]
    pub subscribers: Vec<String>,
}

impl Indicator {
    pub fn new(id: impl Into<String>, expression: IndicatorExpr) -> Self {
        let id = id.into();
        Indicator {
            name: id.clone(),
            id,
            expression,
            alarm: None,
            subscribers: Vec::new(),
        }
    }

    pub fn with_alarm(mut self, cmp: Comparison, threshold: f64) -> Self {
        self.alarm = Some(Alarm { cmp, threshold });
        self
    }

    pub fn subscribe(mut self, subscriber: impl Into<String>) -> Self {
        self.subscribers.push(subscriber.into());
        self
    }

    fn scopes(&self) -> BTreeSet<Scope> {
        let mut s = BTreeSet::new();
        self.expression.collect_scopes(&mut s);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Scope {
    Elements,
    Relations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    ElementRegistered,
    ElementUpdated,
    RelationAdded,
    IndicatorRecomputed,
}

impl EventType {
    fn scope(self) -> Option<Scope> {
        match self {
            EventType::ElementRegistered | EventType::ElementUpdated => Some(Scope::Elements),
            EventType::RelationAdded => Some(Scope::Relations),
            EventType::IndicatorRecomputed => None,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventType::ElementRegistered => "element_registered",
            EventType::ElementUpdated => "element_updated",
            EventType::RelationAdded => "relation_added",
            EventType::IndicatorRecomputed => "indicator_recomputed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorEvent {
    pub event_type: EventType,
    pub subject: String,
    /// Logical clock value assigned by the store.
    pub timestamp: u64,
    /// Elements touched by the event (relation endpoints, VO members).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    /// Position in the feed; also the polling cursor.
    pub seq: u64,
    pub subscriber: String,
    pub indicator: String,
    pub value: f64,
    pub threshold: f64,
    pub event: MonitorEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedPage {
    pub items: Vec<Notification>,
    pub next_cursor: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("indicator '{0}' already exists")]
    DuplicateId(String),
    #[error("unknown indicator '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Malformed(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorState {
    pub indicator: Indicator,
    pub value: IndicatorValue,
    pub alarm_raised: bool,
}

/// Indicator definitions, their last computed values and the notification feed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Monitor {
    states: BTreeMap<String, IndicatorState>,
    feed: Vec<Notification>,
}

impl Monitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &Indicator> {
        self.states.values().map(|s| &s.indicator)
    }

    pub fn state(&self, id: &str) -> Option<&IndicatorState> {
        self.states.get(id)
    }

    pub fn states(&self) -> impl Iterator<Item = &IndicatorState> {
        self.states.values()
    }

    /// Stores the indicator and evaluates it once as a baseline. A baseline
    /// that already satisfies the alarm marks it raised without notifying.
    pub fn define(
        &mut self,
        indicator: Indicator,
        registry: &Registry,
        graph: &SocialGraph,
    ) -> Result<IndicatorValue, IndicatorError> {
        if self.states.contains_key(&indicator.id) {
            return Err(IndicatorError::DuplicateId(indicator.id));
        }
        indicator.expression.type_check()?;
        let value = IndicatorValue::from_result(indicator.expression.evaluate(registry, graph));
        let alarm_raised = indicator.alarm.is_some_and(|a| a.is_raised(&value));
        self.states.insert(
            indicator.id.clone(),
            IndicatorState {
                indicator,
                value: value.clone(),
                alarm_raised,
            },
        );
        Ok(value)
    }

    /// Fresh evaluation against the given state. Does not touch cached values.
    pub fn evaluate(
        &self,
        id: &str,
        registry: &Registry,
        graph: &SocialGraph,
    ) -> Result<IndicatorValue, IndicatorError> {
        let state = self
            .states
            .get(id)
            .ok_or_else(|| IndicatorError::Unknown(id.to_string()))?;
        Ok(IndicatorValue::from_result(
            state.indicator.expression.evaluate(registry, graph),
        ))
    }

    /// Recomputes every indicator whose queries may observe the event and
    /// returns one notification per subscriber for each alarm that went from
    /// not raised to raised.
    pub fn notify(&mut self, event: &MonitorEvent, registry: &Registry, graph: &SocialGraph) -> Vec<Notification> {
        let known = match event.event_type {
            EventType::ElementRegistered | EventType::ElementUpdated => registry.contains(&event.subject),
            EventType::RelationAdded => graph.get(&event.subject).is_some(),
            EventType::IndicatorRecomputed => self.states.contains_key(&event.subject),
        };
        if !known {
            log::warn!("ignoring {} event for unknown subject '{}'", event.event_type, event.subject);
            return Vec::new();
        }
        let Some(scope) = event.event_type.scope() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for state in self.states.values_mut() {
            if !state.indicator.scopes().contains(&scope) {
                continue;
            }
            state.value = IndicatorValue::from_result(state.indicator.expression.evaluate(registry, graph));
            let raised = state.indicator.alarm.is_some_and(|a| a.is_raised(&state.value));
            if raised && !state.alarm_raised {
                let alarm = state.indicator.alarm.expect("raised implies an alarm");
                for sub in &state.indicator.subscribers {
                    let n = Notification {
                        seq: self.feed.len() as u64,
                        subscriber: sub.clone(),
                        indicator: state.indicator.id.clone(),
                        value: state.value.value().unwrap_or(f64::NAN),
                        threshold: alarm.threshold,
                        event: event.clone(),
                    };
                    self.feed.push(n.clone());
                    out.push(n);
                }
            }
            state.alarm_raised = raised;
        }
        out
    }

    /// Notifications with `seq >= cursor`, at most `limit` of them.
    pub fn poll(&self, cursor: u64, limit: usize) -> FeedPage {
        let start = (cursor as usize).min(self.feed.len());
        let items: Vec<Notification> = self.feed[start..].iter().take(limit).cloned().collect();
        let next_cursor = items.last().map(|n| n.seq + 1).unwrap_or(start as u64);
        FeedPage { items, next_cursor }
    }

    pub fn feed(&self) -> &[Notification] {
        &self.feed
    }

    pub(crate) fn restore(states: Vec<IndicatorState>, feed: Vec<Notification>) -> Self {
        Monitor {
            states: states
                .into_iter()
                .map(|s| (s.indicator.id.clone(), s))
                .collect(),
            feed,
        }
    }
}
