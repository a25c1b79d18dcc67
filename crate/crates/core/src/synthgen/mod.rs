//! Synthetic annotated floor plans, their rasterisation, and file I/O.

mod annotation;
mod generate;
mod raster;

pub use annotation::{
    load_annotation, save_annotation, AnnotationError, FloorPlanAnnotation, LineAnnotation,
    RoomAnnotation,
};
pub use generate::{generate_plan, GeneratorConfig};
pub use raster::{rasterize, RasterFeatureMap, Rgb, StyleConfig, WallMode, MIN_CONTRAST};
