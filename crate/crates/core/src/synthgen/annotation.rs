use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::geometry::{Point, Segment, SegmentClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("malformed annotation: {0}")]
    Malformed(String),
    #[error("unknown line class {0:?}")]
    UnknownClass(String),
    #[error("coordinate ({x}, {y}) lies outside the {width}x{height} canvas")]
    OutOfCanvas {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("invalid annotation: {0}")]
    Invalid(String),
}

/// One annotated structural line. `score` is only present on predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LineAnnotation {
    pub segment: Segment,
    pub thickness: f64,
    pub class: SegmentClass,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomAnnotation {
    pub category: String,
    pub contour: Vec<Point>,
}

/// Ground-truth (or predicted) vector drawing of a floor plan.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlanAnnotation {
    /// Millimetres per pixel.
    pub scale: f64,
    /// `(width, height)` in pixels.
    pub canvas: (u32, u32),
    pub lines: Vec<LineAnnotation>,
    pub rooms: Vec<RoomAnnotation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    a: Point,
    b: Point,
    thickness: f64,
    class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRecord {
    scale: f64,
    canvas: [u32; 2],
    lines: Vec<LineRecord>,
    #[serde(default)]
    rooms: Vec<RoomAnnotation>,
}

impl FloorPlanAnnotation {
    pub fn width(&self) -> u32 {
        self.canvas.0
    }

    pub fn height(&self) -> u32 {
        self.canvas.1
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.canvas.0 as f64 && p.y <= self.canvas.1 as f64
    }

    /// Distinct line endpoints, in first-appearance order.
    pub fn junctions(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for l in &self.lines {
            for p in [l.segment.a(), l.segment.b()] {
                if !out.iter().any(|q| q.approx_eq(p, crate::geometry::SNAP_TOLERANCE)) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn count_class(&self, class: SegmentClass) -> usize {
        self.lines.iter().filter(|l| l.class == class).count()
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(AnnotationError::Invalid(format!("scale must be positive, got {}", self.scale)));
        }
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return Err(AnnotationError::Invalid("empty canvas".into()));
        }
        let check = |p: Point| {
            if self.contains(p) {
                Ok(())
            } else {
                Err(AnnotationError::OutOfCanvas {
                    x: p.x,
                    y: p.y,
                    width: self.canvas.0,
                    height: self.canvas.1,
                })
            }
        };
        for l in &self.lines {
            if l.class == SegmentClass::Null {
                return Err(AnnotationError::UnknownClass("null".into()));
            }
            if !(l.thickness > 0.0 && l.thickness.is_finite()) {
                return Err(AnnotationError::Invalid(format!("line thickness {}", l.thickness)));
            }
            check(l.segment.a())?;
            check(l.segment.b())?;
        }
        for r in &self.rooms {
            if r.contour.len() < 3 {
                return Err(AnnotationError::Invalid(format!(
                    "room {:?} contour has {} points",
                    r.category,
                    r.contour.len()
                )));
            }
            for &p in &r.contour {
                check(p)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let record = PlanRecord {
            scale: self.scale,
            canvas: [self.canvas.0, self.canvas.1],
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    a: l.segment.a(),
                    b: l.segment.b(),
                    thickness: l.thickness,
                    class: l.class.label().to_string(),
                    score: l.score,
                })
                .collect(),
            rooms: self.rooms.clone(),
        };
        serde_json::to_string_pretty(&record).expect("annotation serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, AnnotationError> {
        let record: PlanRecord =
            serde_json::from_str(text).map_err(|e| AnnotationError::Malformed(e.to_string()))?;
        let mut lines = Vec::with_capacity(record.lines.len());
        for (i, l) in record.lines.into_iter().enumerate() {
            let class: SegmentClass = l.class.parse().map_err(AnnotationError::UnknownClass)?;
            if class == SegmentClass::Null {
                return Err(AnnotationError::UnknownClass(l.class));
            }
            let segment = Segment::new(l.a, l.b)
                .map_err(|e| AnnotationError::Invalid(format!("line {i}: {e}")))?;
            lines.push(LineAnnotation {
                segment,
                thickness: l.thickness,
                class,
                score: l.score,
            });
        }
        let plan = FloorPlanAnnotation {
            scale: record.scale,
            canvas: (record.canvas[0], record.canvas[1]),
            lines,
            rooms: record.rooms,
        };
        plan.validate()?;
        Ok(plan)
    }
}

pub fn save_annotation(plan: &FloorPlanAnnotation, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, plan.to_json())?;
    Ok(())
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<FloorPlanAnnotation> {
    let text = fs::read_to_string(path)?;
    Ok(FloorPlanAnnotation::from_json(&text)?)
}
