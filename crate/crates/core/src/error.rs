use thiserror::Error;

use crate::geometry::GeometryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Annotation(#[from] crate::synthgen::AnnotationError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Shape(#[from] crate::nn::ShapeError),
    #[error("checkpoint does not match model: {0}")]
    Checkpoint(String),
    #[error("empty dataset")]
    EmptyDataset,
}
