use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dpxplain_core::data::DataError;
use dpxplain_core::dp::DpError;
use dpxplain_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
    #[error("session `{session}` log record {seq}: {reason}")]
    Replay {
        session: String,
        seq: u64,
        reason: String,
    },
}

impl From<DataError> for ServiceError {
    fn from(e: DataError) -> Self {
        ServiceError::Core(e.into())
    }
}

impl From<DpError> for ServiceError {
    fn from(e: DpError) -> Self {
        ServiceError::Core(e.into())
    }
}

/// Wire form of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Core(CoreError::Dp(DpError::InsufficientBudget { .. })) => {
                StatusCode::PAYMENT_REQUIRED
            }
            ServiceError::Core(CoreError::PhaseOrder(_)) => StatusCode::CONFLICT,
            ServiceError::Core(_) | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Storage(_) | ServiceError::Replay { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (code, detail) = match self {
            ServiceError::Core(e) => core_code(e),
            ServiceError::NotFound { kind, id } => ("not_found", json!({ "kind": kind, "id": id })),
            ServiceError::BadRequest(_) => ("malformed_request", Value::Null),
            ServiceError::Storage(_) => ("storage", Value::Null),
            ServiceError::Replay { session, seq, .. } => {
                ("replay_mismatch", json!({ "session": session, "seq": seq }))
            }
        };
        ErrorBody {
            code: code.into(),
            message: self.to_string(),
            detail,
        }
    }
}

fn core_code(e: &CoreError) -> (&'static str, Value) {
    match e {
        CoreError::Dp(DpError::InsufficientBudget {
            requested,
            remaining,
        }) => (
            "insufficient_budget",
            json!({ "requested": requested, "remaining": remaining }),
        ),
        CoreError::Dp(_) | CoreError::InvalidParameter(_) => ("invalid_parameter", Value::Null),
        CoreError::PhaseOrder(_) => ("phase_order", Value::Null),
        CoreError::Release(_) => ("invalid_release", Value::Null),
        CoreError::Data(d) => data_code(d),
    }
}

fn data_code(e: &DataError) -> (&'static str, Value) {
    match e {
        DataError::Row { row, source } => {
            let (code, inner) = data_code(source);
            let mut detail = json!({ "row": row });
            if let Value::Object(m) = inner {
                detail.as_object_mut().expect("object").extend(m);
            }
            (code, detail)
        }
        DataError::SchemaFormat(_) | DataError::InvalidSchema(_) => ("invalid_schema", Value::Null),
        DataError::OutOfDomain { attribute, value } => (
            "out_of_domain",
            json!({ "attribute": attribute, "value": value }),
        ),
        DataError::Csv(_) | DataError::Arity { .. } => ("invalid_csv", Value::Null),
        DataError::UnknownAttribute(a) => ("unknown_attribute", json!({ "attribute": a })),
        DataError::InvalidQuery(_) => ("invalid_query", Value::Null),
        DataError::UnknownGroup(g) => ("unknown_group", json!({ "group": g })),
        DataError::InvalidQuestion(_) => ("invalid_question", Value::Null),
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (self.status(), Json(self.body())).into_response()
    }
}
