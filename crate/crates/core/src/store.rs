//! Mutable store over registry, social graph and indicators, plus immutable
//! content-addressed snapshots that selection runs read from.
//!
//! Every successful mutation emits exactly one [`MonitorEvent`] and feeds it
//! to the monitor.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::indicators::{
    EventType, FeedPage, Indicator, IndicatorError, IndicatorState, IndicatorValue, Monitor,
    MonitorEvent, Notification,
};
use crate::registry::{Description, Element, Registry, RegistryDocument, RegistryError};
use crate::social::{GraphDocument, GraphError, Relation, SocialGraph};

/// SHA-256 over the canonical JSON form (object keys sorted).
pub fn content_digest<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_vec(&v))
        .expect("store types serialize to JSON");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

/// Export format of a snapshot: `{registry, graph, indicators}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreDocument {
    #[serde(default)]
    pub registry: RegistryDocument,
    #[serde(default)]
    pub graph: GraphDocument,
    #[serde(default)]
    pub indicators: Vec<Indicator>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    id: String,
    registry: Arc<Registry>,
    graph: Arc<SocialGraph>,
    indicators: Arc<BTreeMap<String, Indicator>>,
}

impl Snapshot {
    fn build(
        registry: Arc<Registry>,
        graph: Arc<SocialGraph>,
        indicators: Arc<BTreeMap<String, Indicator>>,
    ) -> Self {
        let mut snap = Snapshot {
            id: String::new(),
            registry,
            graph,
            indicators,
        };
        snap.id = content_digest(&snap.to_document());
        snap
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn indicator(&self, id: &str) -> Option<&Indicator> {
        self.indicators.get(id)
    }

    pub fn evaluate_indicator(&self, id: &str) -> Result<IndicatorValue, IndicatorError> {
        let ind = self
            .indicators
            .get(id)
            .ok_or_else(|| IndicatorError::Unknown(id.to_string()))?;
        Ok(match ind.expression.evaluate(&self.registry, &self.graph) {
            Ok(value) => IndicatorValue::Available { value },
            Err(e) => IndicatorValue::Unavailable {
                reason: e.to_string(),
            },
        })
    }

    pub fn to_document(&self) -> StoreDocument {
        StoreDocument {
            registry: self.registry.to_document(),
            graph: self.graph.to_document(),
            indicators: self.indicators.values().cloned().collect(),
        }
    }

    pub fn from_document(doc: StoreDocument) -> Result<Self, StoreError> {
        let registry = Registry::from_document(doc.registry)?;
        let graph = SocialGraph::from_document(doc.graph, &registry)?;
        let mut indicators = BTreeMap::new();
        for ind in doc.indicators {
            ind.expression.type_check().map_err(IndicatorError::from)?;
            if indicators.contains_key(&ind.id) {
                return Err(IndicatorError::DuplicateId(ind.id).into());
            }
            indicators.insert(ind.id.clone(), ind);
        }
        Ok(Snapshot::build(Arc::new(registry), Arc::new(graph), Arc::new(indicators)))
    }
}

/// Result of one store mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    pub id: String,
    pub event: MonitorEvent,
    pub notifications: Vec<Notification>,
}

/// Full persisted state, including alarm states and the notification feed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoreState {
    pub registry: RegistryDocument,
    pub graph: GraphDocument,
    #[serde(default)]
    pub indicators: Vec<IndicatorState>,
    #[serde(default)]
    pub feed: Vec<Notification>,
    #[serde(default)]
    pub clock: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    registry: Arc<Registry>,
    graph: Arc<SocialGraph>,
    monitor: Monitor,
    clock: u64,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    fn emit(&mut self, event_type: EventType, subject: String, related: Vec<String>) -> Mutation {
        self.clock += 1;
        let event = MonitorEvent {
            event_type,
            subject: subject.clone(),
            timestamp: self.clock,
            related,
        };
        let notifications = self.monitor.notify(&event, &self.registry, &self.graph);
        Mutation {
            id: subject,
            event,
            notifications,
        }
    }

    pub fn register_element(&mut self, element: Element, descriptions: Vec<Description>) -> Result<Mutation, StoreError> {
        let id = Arc::make_mut(&mut self.registry).register_element(element, descriptions)?;
        Ok(self.emit(EventType::ElementRegistered, id, Vec::new()))
    }

    pub fn update_element(&mut self, element: Element, descriptions: Vec<Description>) -> Result<Mutation, StoreError> {
        let id = Arc::make_mut(&mut self.registry).update_element(element, descriptions)?;
        Ok(self.emit(EventType::ElementUpdated, id, Vec::new()))
    }

    pub fn add_relation(&mut self, relation: Relation) -> Result<Mutation, StoreError> {
        let related = vec![relation.source.clone(), relation.target.clone()];
        let id = Arc::make_mut(&mut self.graph).add_relation(relation, &self.registry)?;
        Ok(self.emit(EventType::RelationAdded, id, related))
    }

    pub fn define_indicator(&mut self, indicator: Indicator) -> Result<(IndicatorValue, Mutation), StoreError> {
        let id = indicator.id.clone();
        let value = self.monitor.define(indicator, &self.registry, &self.graph)?;
        Ok((value, self.emit(EventType::IndicatorRecomputed, id, Vec::new())))
    }

    /// Registers an element together with relations from it, as one event.
    pub(crate) fn register_with_relations(
        &mut self,
        element: Element,
        descriptions: Vec<Description>,
        relations: Vec<Relation>,
    ) -> Result<Mutation, StoreError> {
        let mut registry = (*self.registry).clone();
        let id = registry.register_element(element, descriptions)?;
        let mut graph = (*self.graph).clone();
        let mut related = Vec::new();
        for r in relations {
            related.push(r.target.clone());
            graph.add_relation(r, &registry)?;
        }
        self.registry = Arc::new(registry);
        self.graph = Arc::new(graph);
        Ok(self.emit(EventType::ElementRegistered, id, related))
    }

    pub fn evaluate_indicator(&self, id: &str) -> Result<IndicatorValue, IndicatorError> {
        self.monitor.evaluate(id, &self.registry, &self.graph)
    }

    pub fn poll(&self, cursor: u64, limit: usize) -> FeedPage {
        self.monitor.poll(cursor, limit)
    }

    /// O(1) immutable capture; later mutations copy on write.
    pub fn snapshot(&self) -> Snapshot {
        let indicators = self
            .monitor
            .definitions()
            .map(|i| (i.id.clone(), i.clone()))
            .collect();
        Snapshot::build(self.registry.clone(), self.graph.clone(), Arc::new(indicators))
    }

    pub fn export(&self) -> StoreDocument {
        self.snapshot().to_document()
    }

    /// Fresh store holding the document's content. Indicator baselines are
    /// recomputed; no events are emitted.
    pub fn import(doc: StoreDocument) -> Result<Self, StoreError> {
        let registry = Registry::from_document(doc.registry)?;
        let graph = SocialGraph::from_document(doc.graph, &registry)?;
        let mut monitor = Monitor::new();
        for ind in doc.indicators {
            monitor.define(ind, &registry, &graph)?;
        }
        Ok(Store {
            registry: Arc::new(registry),
            graph: Arc::new(graph),
            monitor,
            clock: 0,
        })
    }

    pub fn to_state(&self) -> StoreState {
        StoreState {
            registry: self.registry.to_document(),
            graph: self.graph.to_document(),
            indicators: self.monitor.states().cloned().collect(),
            feed: self.monitor.feed().to_vec(),
            clock: self.clock,
        }
    }

    pub fn from_state(state: StoreState) -> Result<Self, StoreError> {
        let registry = Registry::from_document(state.registry)?;
        let graph = SocialGraph::from_document(state.graph, &registry)?;
        Ok(Store {
            registry: Arc::new(registry),
            graph: Arc::new(graph),
            monitor: Monitor::restore(state.indicators, state.feed),
            clock: state.clock,
        })
    }
}
