//! Partner and service selection for virtual organizations.
//!
//! A [`Registry`] of partners and services and a [`SocialGraph`] of their
//! relations feed a five-phase planning [`Run`]: specification, per-role
//! candidate selection, GA-based variant generation under a social fitness,
//! performance ranking, and inception of the chosen variant as a new partner.
//! [`Monitor`] indicators watch the stores and raise edge-triggered alarms.
//!
//! The numeric kernels ([`num`], [`dag`], [`selection::ranking`]) are generic
//! over [`Scalar`]; the aliases below fix them to `f64`.

pub mod attribute;
pub mod dag;
pub mod indicators;
pub mod num;
pub mod persist;
pub mod pipeline;
pub mod registry;
pub mod selection;
pub mod social;
pub mod spec;
pub mod store;

pub use attribute::{AttributeValue, CmpOp, Comparison, Quantity};
pub use indicators::{Indicator, IndicatorExpr, IndicatorValue, Monitor, MonitorEvent, Notification};
pub use num::Scalar;
pub use persist::{Workspace, WorkspaceError};
pub use pipeline::{Amendment, PipelineError, Run, RunConfig, RunResult, RunState};
pub use registry::{CompetenceRecord, Description, Element, ElementKind, Predicate, Registry, ServiceDescription};
pub use selection::{CandidateSet, GaConfig, Genome, VOVariant};
pub use social::{Relation, SocialGraph, SocialRequirement};
pub use spec::{validate_spec, Role, RoleRequirement, VOSpecification, Violation, ViolationKind};
pub use store::{Snapshot, Store, StoreDocument};

pub type Criterion = selection::Criterion<f64>;
pub type Ranked = selection::Ranked<f64>;
