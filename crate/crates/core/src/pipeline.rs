//! Run state machine over the five planning phases, with loop-back and
//! inception of the chosen variant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attribute::{AttributeValue, Quantity};
use crate::indicators::Notification;
use crate::registry::{CompetenceRecord, Description, Element, ElementKind};
use crate::selection::{
    enumerate_all, evaluate_performance, rank_variants, run_ga, select_candidates, CandidateSet, GaConfig,
    SearchSpace, SelectionError, VOVariant, DEFAULT_BOUND,
};
use crate::social::Relation;
use crate::spec::{fitness_of, performance_fitness_of, validate_spec, FitnessError, VOSpecification, Violation};
use crate::store::{content_digest, Snapshot, Store, StoreError};

pub const MEMBERSHIP_RELATION: &str = "vo_membership";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Specified,
    CandidatesSelected,
    VariantsGenerated,
    PerformanceRanked,
    Incepted,
    Halted,
}

impl fmt::Display for RunState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunState::Specified => "specified",
            RunState::CandidatesSelected => "candidates_selected",
            RunState::VariantsGenerated => "variants_generated",
            RunState::PerformanceRanked => "performance_ranked",
            RunState::Incepted => "incepted",
            RunState::Halted => "halted",
        })
    }
}

impl std::str::FromStr for RunState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown run state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub ga: GaConfig,
    /// Use exhaustive enumeration instead of the GA in phase 3.
    pub oracle: bool,
    /// Maximum number of variants passed from phase 3 to phase 4.
    pub top_k: usize,
    pub exhaustive_bound: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ga: GaConfig::default(),
            oracle: false,
            top_k: 100,
            exhaustive_bound: DEFAULT_BOUND as u64,
        }
    }
}

/// Planner edit applied on loop-back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "body", rename_all = "snake_case")]
pub enum Amendment {
    Replace(VOSpecification),
    /// JSON merge patch over the current specification.
    Merge(Value),
}

/// Planner actions, replayable against the run's snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RunAction {
    Advance,
    LoopBack {
        target: RunState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amendment: Option<Amendment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunEvent {
    Created { spec_version: String, snapshot: String },
    Transition { from: RunState, to: RunState },
    Halted { from: RunState, diagnostic: String },
    LoopBack { from: RunState, to: RunState, spec_version: String },
    Alarm { indicator: String, subject: String, stale_variants: usize },
    Incepted { vo_id: String, rank: u32 },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("specification is invalid ({} violation(s))", .0.len())]
    InvalidSpec(Vec<Violation>),
    #[error("cannot {action} from state {state}")]
    InvalidTransition { state: RunState, action: String },
    #[error("run is bound to snapshot {expected}, got {got}")]
    SnapshotMismatch { expected: String, got: String },
    #[error("amendment is not a valid specification: {0}")]
    MalformedAmendment(String),
    #[error("amendment changes inputs of kept phase `{0}`; loop back further")]
    AmendmentTouchesKeptPhase(RunState),
    #[error("no variant with rank {0}")]
    UnknownVariant(u32),
    #[error("variant with rank {0} is stale; override to incept anyway")]
    StaleVariant(u32),
    #[error("run already incepted as `{0}`")]
    AlreadyIncepted(String),
    #[error("VO would have no {0}")]
    EmptyVo(&'static str),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl PipelineError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            PipelineError::InvalidSpec(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub run_id: String,
    pub spec_version: String,
    pub snapshot_id: String,
    pub state: RunState,
    /// State the run was in when a phase failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted_from: Option<RunState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub initial_spec: VOSpecification,
    pub spec: VOSpecification,
    #[serde(default)]
    pub candidate_sets: Option<Vec<CandidateSet>>,
    #[serde(default)]
    pub variants: Option<Vec<VOVariant>>,
    /// Best archived fitness per GA generation, when the GA ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga_trace: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incepted: Option<String>,
    pub actions: Vec<RunAction>,
    pub events: Vec<RunEvent>,
}

/// Run result document: `{run_id, spec_version, seed, candidate_sets, variants}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub spec_version: String,
    pub seed: u64,
    pub candidate_sets: Vec<CandidateSet>,
    pub variants: Vec<VOVariant>,
}

pub fn run_id_for(spec: &VOSpecification, snapshot_id: &str, config: &RunConfig) -> String {
    content_digest(&(spec.digest(), snapshot_id, config))
}

fn check_spec(spec: &VOSpecification, snapshot: &Snapshot) -> Result<(), PipelineError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidSpec(violations));
    }
    fitness_of(spec, snapshot)?;
    performance_fitness_of(spec, snapshot)?;
    Ok(())
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("spec serializes")
}

/// The spec fields each phase reads, for loop-back consistency checks.
fn phase_inputs(spec: &VOSpecification, phase: RunState) -> Value {
    match phase {
        RunState::CandidatesSelected => Value::Array(vec![
            to_json(&spec.roles),
            to_json(&spec.thresholds.phase2_cutoff),
            to_json(&spec.thresholds.phase2_max_candidates),
        ]),
        RunState::VariantsGenerated => Value::Array(vec![
            to_json(&spec.protocol.schema),
            to_json(&spec.fitness),
            to_json(&spec.thresholds.phase3_threshold),
            to_json(&spec.exclusivity),
        ]),
        RunState::PerformanceRanked => Value::Array(vec![
            to_json(&spec.protocol.process),
            to_json(&spec.performance_requirements),
            to_json(&spec.performance_fitness),
            to_json(&spec.ranking),
        ]),
        _ => Value::Null,
    }
}

impl Run {
    pub fn new(spec: VOSpecification, snapshot: &Snapshot, config: RunConfig) -> Result<Run, PipelineError> {
        check_spec(&spec, snapshot)?;
        let spec_version = spec.digest();
        let run_id = run_id_for(&spec, snapshot.id(), &config);
        Ok(Run {
            run_id,
            spec_version: spec_version.clone(),
            snapshot_id: snapshot.id().to_string(),
            state: RunState::Specified,
            halted_from: None,
            diagnostic: None,
            seed: config.ga.seed,
            config,
            initial_spec: spec.clone(),
            spec,
            candidate_sets: None,
            variants: None,
            ga_trace: None,
            incepted: None,
            actions: Vec::new(),
            events: vec![RunEvent::Created {
                spec_version,
                snapshot: snapshot.id().to_string(),
            }],
        })
    }

    fn check_snapshot(&self, snapshot: &Snapshot) -> Result<(), PipelineError> {
        if snapshot.id() != self.snapshot_id {
            return Err(PipelineError::SnapshotMismatch {
                expected: self.snapshot_id.clone(),
                got: snapshot.id().to_string(),
            });
        }
        Ok(())
    }

    fn halt(&mut self, diagnostic: String) {
        log::warn!("run {} halted in {}: {diagnostic}", self.run_id, self.state);
        self.events.push(RunEvent::Halted {
            from: self.state,
            diagnostic: diagnostic.clone(),
        });
        self.halted_from = Some(self.state);
        self.diagnostic = Some(diagnostic);
        self.state = RunState::Halted;
    }

    fn transition(&mut self, to: RunState) {
        self.events.push(RunEvent::Transition { from: self.state, to });
        self.state = to;
    }

    /// Executes the next analysis phase (2, 3 or 4). A phase that fails on
    /// its inputs halts the run with a diagnostic instead of erroring.
    pub fn advance(&mut self, snapshot: &Snapshot) -> Result<RunState, PipelineError> {
        self.check_snapshot(snapshot)?;
        match self.state {
            RunState::Specified | RunState::CandidatesSelected | RunState::VariantsGenerated => {}
            state => {
                return Err(PipelineError::InvalidTransition {
                    state,
                    action: "advance".into(),
                })
            }
        }
        self.actions.push(RunAction::Advance);
        self.execute_phase(snapshot)?;
        Ok(self.state)
    }

    fn execute_phase(&mut self, snapshot: &Snapshot) -> Result<(), PipelineError> {
        match self.state {
            RunState::Specified => match select_candidates(&self.spec, snapshot.registry()) {
                Ok(sets) => {
                    self.candidate_sets = Some(sets);
                    self.transition(RunState::CandidatesSelected);
                }
                Err(e @ SelectionError::UnsatisfiableRole(_)) => self.halt(e.to_string()),
                Err(e) => return Err(e.into()),
            },
            RunState::CandidatesSelected => {
                let sets = self.candidate_sets.as_deref().unwrap_or_default();
                let fitness = fitness_of(&self.spec, snapshot)?;
                let space = SearchSpace::new(sets, self.spec.exclusivity);
                let mut variants = if self.config.oracle {
                    match enumerate_all(&fitness, &space, self.config.exhaustive_bound as u128) {
                        Ok(e) => e.variants,
                        Err(e @ SelectionError::BoundExceeded { .. }) => {
                            self.halt(e.to_string());
                            return Ok(());
                        }
                        Err(e) => return Err(e.into()),
                    }
                } else {
                    let outcome = run_ga(&fitness, &space, &self.config.ga)?;
                    self.ga_trace = Some(outcome.best_per_generation);
                    outcome.variants
                };
                variants.truncate(self.config.top_k);
                if variants.is_empty() {
                    self.halt(format!(
                        "no variant reaches the phase-3 threshold {}",
                        self.spec.thresholds.phase3_threshold
                    ));
                    return Ok(());
                }
                self.variants = Some(variants);
                self.transition(RunState::VariantsGenerated);
            }
            RunState::VariantsGenerated => {
                let perf = performance_fitness_of(&self.spec, snapshot)?;
                let mut variants = self.variants.take().unwrap_or_default();
                for (i, issues) in evaluate_performance(&mut variants, &perf)? {
                    log::info!("variant {} flagged: {}", variants[i].assignment, issues.join("; "));
                }
                rank_variants(&mut variants, &perf, self.spec.ranking.method)?;
                self.variants = Some(variants);
                self.transition(RunState::PerformanceRanked);
            }
            _ => unreachable!("checked by caller"),
        }
        Ok(())
    }

    fn effective_state(&self) -> RunState {
        match self.state {
            RunState::Halted => self.halted_from.unwrap_or(RunState::Specified),
            s => s,
        }
    }

    /// Returns the run to an earlier state, optionally amending the spec.
    /// On any error the run is left untouched.
    pub fn loop_back(
        &mut self,
        target: RunState,
        amendment: Option<Amendment>,
        snapshot: &Snapshot,
    ) -> Result<RunState, PipelineError> {
        self.check_snapshot(snapshot)?;
        let current = self.effective_state();
        let allowed = target < RunState::Incepted && (target < current || self.state == RunState::Halted && target <= current);
        if !allowed {
            return Err(PipelineError::InvalidTransition {
                state: self.state,
                action: format!("loop back to {target}"),
            });
        }
        let spec = match &amendment {
            None => self.spec.clone(),
            Some(Amendment::Replace(s)) => s.clone(),
            Some(Amendment::Merge(patch)) => {
                let mut doc = to_json(&self.spec);
                json_patch::merge(&mut doc, patch);
                serde_json::from_value(doc).map_err(|e| PipelineError::MalformedAmendment(e.to_string()))?
            }
        };
        check_spec(&spec, snapshot)?;
        for phase in [
            RunState::CandidatesSelected,
            RunState::VariantsGenerated,
            RunState::PerformanceRanked,
        ] {
            if phase <= target && phase_inputs(&spec, phase) != phase_inputs(&self.spec, phase) {
                return Err(PipelineError::AmendmentTouchesKeptPhase(phase));
            }
        }

        if target < RunState::CandidatesSelected {
            self.candidate_sets = None;
        }
        if target < RunState::VariantsGenerated {
            self.variants = None;
            self.ga_trace = None;
        }
        if target == RunState::VariantsGenerated {
            // drop phase-4 results but keep the phase-3 list in phase-3 order
            if let Some(vs) = self.variants.as_mut() {
                for v in vs.iter_mut() {
                    v.performance = None;
                    v.rank = None;
                    v.front = None;
                    v.flagged = false;
                }
                vs.sort_by(crate::selection::variant_order);
            }
        }
        self.spec = spec;
        self.spec_version = self.spec.digest();
        self.events.push(RunEvent::LoopBack {
            from: self.state,
            to: target,
            spec_version: self.spec_version.clone(),
        });
        self.state = target;
        self.halted_from = None;
        self.diagnostic = None;
        self.actions.push(RunAction::LoopBack { target, amendment });
        Ok(target)
    }

    /// Marks variants whose assignment touches the notification's event.
    /// Returns the number of variants newly marked stale.
    pub fn on_notification(&mut self, n: &Notification) -> usize {
        let mut touched: BTreeSet<&str> = n.event.related.iter().map(String::as_str).collect();
        touched.insert(n.event.subject.as_str());
        let mut count = 0;
        if let Some(vs) = self.variants.as_mut() {
            for v in vs.iter_mut() {
                if !v.stale && v.assignment.0.iter().any(|e| touched.contains(e.as_str())) {
                    v.stale = true;
                    count += 1;
                }
            }
        }
        if count > 0 {
            self.events.push(RunEvent::Alarm {
                indicator: n.indicator.clone(),
                subject: n.event.subject.clone(),
                stale_variants: count,
            });
        }
        count
    }

    pub fn variant(&self, rank: u32) -> Option<&VOVariant> {
        self.variants.as_ref()?.iter().find(|v| v.rank == Some(rank))
    }

    /// Registers the chosen variant as a new partner organization and links
    /// it to its members. Reads member data from the run's snapshot.
    pub fn incept_vo(
        &mut self,
        store: &mut Store,
        snapshot: &Snapshot,
        rank: u32,
        override_stale: bool,
    ) -> Result<String, PipelineError> {
        self.check_snapshot(snapshot)?;
        if let Some(id) = &self.incepted {
            return Err(PipelineError::AlreadyIncepted(id.clone()));
        }
        if self.state != RunState::PerformanceRanked {
            return Err(PipelineError::InvalidTransition {
                state: self.state,
                action: "incept".into(),
            });
        }
        let variant = self.variant(rank).ok_or(PipelineError::UnknownVariant(rank))?;
        if variant.stale && !override_stale {
            return Err(PipelineError::StaleVariant(rank));
        }
        let plan = plan_inception(&self.run_id, &self.spec, snapshot, variant)?;
        let vo_id = plan.element.id.clone();
        store.register_with_relations(plan.element, plan.descriptions, plan.relations)?;
        self.incepted = Some(vo_id.clone());
        self.events.push(RunEvent::Incepted {
            vo_id: vo_id.clone(),
            rank,
        });
        self.transition(RunState::Incepted);
        Ok(vo_id)
    }

    pub fn result(&self) -> RunResult {
        RunResult {
            run_id: self.run_id.clone(),
            spec_version: self.spec_version.clone(),
            seed: self.seed,
            candidate_sets: self.candidate_sets.clone().unwrap_or_default(),
            variants: self.variants.clone().unwrap_or_default(),
        }
    }

    /// Re-executes the recorded planner actions on a fresh run.
    pub fn replay(&self, snapshot: &Snapshot) -> Result<Run, PipelineError> {
        let mut run = Run::new(self.initial_spec.clone(), snapshot, self.config.clone())?;
        for action in &self.actions {
            match action {
                RunAction::Advance => {
                    run.advance(snapshot)?;
                }
                RunAction::LoopBack { target, amendment } => {
                    run.loop_back(*target, amendment.clone(), snapshot)?;
                }
            }
        }
        Ok(run)
    }
}

struct InceptionPlan {
    element: Element,
    descriptions: Vec<Description>,
    relations: Vec<Relation>,
}

fn add_quantity(into: &mut Quantity, q: &Quantity) {
    if into.unit == q.unit {
        into.value += q.value;
    } else {
        log::warn!("not adding {} {} to {} {}: unit differs", q.value, q.unit, into.value, into.unit);
    }
}

/// Members are the assigned partners plus the providers of assigned
/// services. The VO offers the union of the members' competences (same-name
/// records merged, capabilities and costs summed) and the assigned services.
fn plan_inception(
    run_id: &str,
    spec: &VOSpecification,
    snapshot: &Snapshot,
    variant: &VOVariant,
) -> Result<InceptionPlan, PipelineError> {
    let registry = snapshot.registry();
    let vo_id = format!("vo-{}", &run_id[..run_id.len().min(16)]);
    let mut members = BTreeSet::new();
    let mut services = BTreeSet::new();
    for (role, id) in spec.roles.iter().zip(&variant.assignment.0) {
        match role.target_kind {
            ElementKind::Partner => {
                members.insert(id.clone());
            }
            ElementKind::Service => {
                services.insert(id.clone());
                if let Some(p) = registry.get(id).and_then(|e| e.provider_id.clone()) {
                    members.insert(p);
                }
            }
        }
    }
    if services.is_empty() {
        return Err(PipelineError::EmptyVo("services"));
    }
    let mut merged: BTreeMap<String, CompetenceRecord> = BTreeMap::new();
    for m in &members {
        for c in registry.competences_of(m) {
            match merged.get_mut(&c.competence_name) {
                None => {
                    let mut rec = CompetenceRecord::new(vo_id.clone(), c.competence_name.clone(), c.cost.clone());
                    rec.capabilities = c.capabilities.clone();
                    merged.insert(c.competence_name.clone(), rec);
                }
                Some(rec) => {
                    add_quantity(&mut rec.cost, &c.cost);
                    for (res, q) in &c.capabilities {
                        match rec.capabilities.get_mut(res) {
                            Some(have) => add_quantity(have, q),
                            None => {
                                rec.capabilities.insert(res.clone(), q.clone());
                            }
                        }
                    }
                }
            }
        }
    }
    if merged.is_empty() {
        return Err(PipelineError::EmptyVo("competences"));
    }
    let name = if spec.name.is_empty() {
        vo_id.clone()
    } else {
        spec.name.clone()
    };
    let list = |ids: &BTreeSet<String>| AttributeValue::List {
        value: ids.iter().map(|s| AttributeValue::token(s.clone())).collect(),
    };
    let element = Element::partner(vo_id.clone(), name)
        .with_attribute("services", list(&services))
        .with_attribute("members", list(&members))
        .with_attribute("run_id", AttributeValue::text(run_id));
    let relations = members
        .iter()
        .chain(&services)
        .map(|m| Relation::new(format!("{vo_id}:{m}"), MEMBERSHIP_RELATION, vo_id.clone(), m.clone()))
        .collect();
    Ok(InceptionPlan {
        element,
        descriptions: merged.into_values().map(Description::Competence).collect(),
        relations,
    })
}
