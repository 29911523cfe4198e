//! The editable scene, its instruction vocabulary and the JSON edit log.

pub mod canonical;
mod graph;
mod instruction;
mod replay;

use thiserror::Error;

pub use graph::{
    apply_edit, deserialize_scene, kind_bounds, primitives_param, serialize_scene, CameraSnapshot, JobOutcome,
    NoResults, ObjectKind, ResultResolver, Scene, SceneObject, SpatialAnnotation, VariantPreview,
};
pub use instruction::{EditInstruction, InstructionType, ObjectId, ObjectKindTag};
pub use replay::{replay_log, EditLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("object {0} not found")]
    ObjectNotFound(ObjectId),
    #[error("malformed instruction: {0}")]
    MalformedInstruction(String),
    #[error("instruction {0} selects a variant but its job produced none")]
    StaleVariant(String),
    #[error("object id {0} is already in use")]
    DuplicateObjectId(ObjectId),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("scene parse error at line {line}, column {column}: {message}")]
pub struct SceneParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("edit log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("replay stopped at seq {seq}: {source}")]
pub struct ReplayError {
    pub seq: u64,
    #[source]
    pub source: EditError,
    pub partial: Box<Scene>,
}
