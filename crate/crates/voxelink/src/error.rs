use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use voxelink_core::{AnnotationError, ExtractError, MeshError, VolumeError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    UnknownSession(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::Volume(e) => e.kind(),
            ServiceError::Annotation(e) => annotation_kind(e),
            ServiceError::Extract(ExtractError::Cancelled { .. }) => "Cancelled",
            ServiceError::Extract(_) => "ExtractionError",
            ServiceError::Mesh(MeshError::TargetUnreachable { .. }) => "TargetUnreachable",
            ServiceError::Mesh(MeshError::InvalidLadder(_)) => "InvalidLadder",
            ServiceError::Mesh(MeshError::InvalidConfig(_)) => "InvalidConfig",
            ServiceError::Mesh(MeshError::Io(_)) => "IoError",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Internal(_) => "Internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::Volume(VolumeError::IndexOutOfRange { .. }) => StatusCode::NOT_FOUND,
            ServiceError::Volume(VolumeError::Io { .. }) => StatusCode::BAD_REQUEST,
            ServiceError::Volume(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Annotation(AnnotationError::Schema { .. }) => StatusCode::BAD_REQUEST,
            ServiceError::Annotation(AnnotationError::Volume(VolumeError::IndexOutOfRange { .. })) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::Annotation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Extract(ExtractError::InvalidConfig(_)) => StatusCode::BAD_REQUEST,
            ServiceError::Mesh(MeshError::InvalidConfig(_) | MeshError::InvalidLadder(_)) => StatusCode::BAD_REQUEST,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Extract(_) | ServiceError::Mesh(_) | ServiceError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

pub fn annotation_kind(e: &AnnotationError) -> &'static str {
    match e {
        AnnotationError::DegenerateRay => "DegenerateRay",
        AnnotationError::Volume(v) => v.kind(),
        AnnotationError::InvalidCanvas(_) => "InvalidCanvas",
        AnnotationError::InvalidStroke(_) => "InvalidStroke",
        AnnotationError::ShapeMismatch { .. } => "ShapeMismatch",
        AnnotationError::InvalidAlpha(_) => "InvalidAlpha",
        AnnotationError::Schema { .. } => "SchemaError",
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.kind(), "message": self.to_string() }));
        (self.status(), body).into_response()
    }
}
