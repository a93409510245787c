use nlpscope_core::analytics::AnalyticsError;
use nlpscope_core::trace::TraceError;
use serde_json::json;

/// An error response: HTTP status, stable machine-readable code and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn no_session() -> Self {
        Self { status: 409, code: "no-session", message: "no trace is loaded".into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self { status: 400, code: "invalid-argument", message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self { status: 404, code: "not-found", message: message.into() }
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self { status: 422, code: "unprocessable", message: message.into() }
    }

    pub fn method_not_allowed(method: &str, path: &str) -> Self {
        Self {
            status: 405,
            code: "method-not-allowed",
            message: format!("{method} is not supported on {path}"),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { status: 500, code: "internal", message: message.into() }
    }

    pub fn body(&self) -> serde_json::Value {
        json!({
            "api_version": crate::API_VERSION,
            "error": { "code": self.code, "message": self.message },
        })
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let message = e.to_string();
        match e {
            AnalyticsError::UnknownGroup(_) | AnalyticsError::UnknownFunction(_) => Self::not_found(message),
            AnalyticsError::DegeneratePlane(_) | AnalyticsError::UnsupportedProjection(_) => Self::unprocessable(message),
            AnalyticsError::InvalidArgument(_) => Self::invalid(message),
            AnalyticsError::Trace(t) => t.into(),
            AnalyticsError::Model(_) => Self::unprocessable(message),
        }
    }
}

impl From<TraceError> for ApiError {
    fn from(e: TraceError) -> Self {
        let message = e.to_string();
        match e {
            TraceError::StepOutOfRange { .. } => Self::invalid(message),
            TraceError::UnknownInstance(_) => Self::not_found(message),
            _ => Self::unprocessable(message),
        }
    }
}
