use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use voselect_core::indicators::IndicatorError;
use voselect_core::registry::RegistryError;
use voselect_core::social::GraphError;
use voselect_core::store::StoreError;
use voselect_core::{PipelineError, WorkspaceError};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail: Value::Null,
            },
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = detail;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn registry_error(e: &RegistryError) -> (StatusCode, &'static str) {
    match e {
        RegistryError::DuplicateId(_) => (StatusCode::CONFLICT, "duplicate_id"),
        RegistryError::UnknownElement(_) => (StatusCode::NOT_FOUND, "not_found"),
        RegistryError::DanglingProvider { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "dangling_provider"),
        _ => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
    }
}

fn store_error(e: &StoreError) -> (StatusCode, &'static str) {
    match e {
        StoreError::Registry(r) => registry_error(r),
        StoreError::Graph(GraphError::DuplicateId(_)) => (StatusCode::CONFLICT, "duplicate_id"),
        StoreError::Graph(GraphError::DanglingEndpoint { .. }) => {
            (StatusCode::UNPROCESSABLE_ENTITY, "dangling_endpoint")
        }
        StoreError::Graph(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
        StoreError::Indicator(i) => indicator_error(i),
    }
}

fn indicator_error(e: &IndicatorError) -> (StatusCode, &'static str) {
    match e {
        IndicatorError::DuplicateId(_) => (StatusCode::CONFLICT, "duplicate_id"),
        IndicatorError::Unknown(_) => (StatusCode::NOT_FOUND, "not_found"),
        IndicatorError::Malformed(_) => (StatusCode::UNPROCESSABLE_ENTITY, "malformed_expression"),
    }
}

fn pipeline_error(e: &PipelineError) -> (StatusCode, &'static str) {
    match e {
        PipelineError::InvalidSpec(_) | PipelineError::MalformedAmendment(_) => {
            (StatusCode::UNPROCESSABLE_ENTITY, "invalid_spec")
        }
        PipelineError::AmendmentTouchesKeptPhase(_) => (StatusCode::UNPROCESSABLE_ENTITY, "amendment_touches_kept_phase"),
        PipelineError::InvalidTransition { .. } => (StatusCode::CONFLICT, "invalid_transition"),
        PipelineError::UnknownVariant(_) => (StatusCode::NOT_FOUND, "not_found"),
        PipelineError::StaleVariant(_) => (StatusCode::CONFLICT, "stale_variant"),
        PipelineError::AlreadyIncepted(_) => (StatusCode::CONFLICT, "already_incepted"),
        PipelineError::EmptyVo(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_vo"),
        PipelineError::Store(s) => store_error(s),
        PipelineError::SnapshotMismatch { .. } | PipelineError::Fitness(_) | PipelineError::Selection(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "pipeline_failure")
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        let (status, code) = match &e {
            WorkspaceError::UnknownSpec(_) | WorkspaceError::UnknownRun(_) => (StatusCode::NOT_FOUND, "not_found"),
            WorkspaceError::InvalidSpec(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_spec"),
            WorkspaceError::Store(s) => store_error(s),
            WorkspaceError::Registry(r) => registry_error(r),
            WorkspaceError::Indicator(i) => indicator_error(i),
            WorkspaceError::Pipeline(p) => pipeline_error(p),
            WorkspaceError::Io { .. } | WorkspaceError::Json { .. } | WorkspaceError::MissingSnapshot(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage")
            }
        };
        let violations = e.violations();
        let detail = if violations.is_empty() {
            Value::Null
        } else {
            json!({ "violations": violations })
        };
        ApiError::new(status, code, e.to_string()).with_detail(detail)
    }
}
