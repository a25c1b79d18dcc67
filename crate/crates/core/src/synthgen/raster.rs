use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::FloorPlanAnnotation;
use crate::binfmt::{read_planes, write_planes, RASTER_MAGIC};
use crate::error::{Error, Result};
use crate::geometry::SegmentClass;

/// Minimum per-channel difference between any line colour and the background.
pub const MIN_CONTRAST: f32 = 0.25;

pub type Rgb = [f32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallMode {
    Solid,
    Hollow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    pub wall_color: Rgb,
    pub door_color: Rgb,
    pub window_color: Rgb,
    pub background: Rgb,
    pub wall_mode: WallMode,
    /// Outline width used for hollow walls and window frames, pixels.
    pub outline_width: f64,
    /// Amplitude of additive uniform noise, in `[0, 1]`.
    pub noise: f32,
    pub seed: u64,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            wall_color: [0.1, 0.1, 0.1],
            door_color: [0.85, 0.35, 0.1],
            window_color: [0.2, 0.45, 0.9],
            background: [1.0, 1.0, 1.0],
            wall_mode: WallMode::Solid,
            outline_width: 1.5,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl StyleConfig {
    /// A randomised style: colours jittered around the defaults, a random
    /// background tint, hollow walls now and then, and mild noise.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5717e_u64);
        let base = Self::default();
        let mut jitter = |c: Rgb, amount: f32| -> Rgb {
            c.map(|v| (v + rng.gen_range(-amount..=amount)).clamp(0.0, 1.0))
        };
        let wall_color = jitter(base.wall_color, 0.1);
        let door_color = jitter(base.door_color, 0.1);
        let window_color = jitter(base.window_color, 0.1);
        let tint = rng.gen_range(0.88..=1.0);
        let background = [tint, rng.gen_range(0.9..=1.0f32).min(1.0), tint];
        Self {
            wall_color,
            door_color,
            window_color,
            background,
            wall_mode: if rng.gen_bool(0.3) { WallMode::Hollow } else { WallMode::Solid },
            outline_width: rng.gen_range(1.0..=2.0),
            noise: rng.gen_range(0.0..=0.05),
            seed,
        }
    }

    pub fn color(&self, class: SegmentClass) -> Rgb {
        match class {
            SegmentClass::Wall => self.wall_color,
            SegmentClass::Door => self.door_color,
            SegmentClass::Window => self.window_color,
            SegmentClass::Null => self.background,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise amplitude {} outside [0, 1]", self.noise)));
        }
        for class in SegmentClass::MEANINGFUL {
            let c = self.color(class);
            let contrast = (0..3).map(|k| (c[k] - self.background[k]).abs()).fold(0.0, f32::max);
            if contrast < MIN_CONTRAST {
                return Err(Error::Config(format!(
                    "{class} colour {c:?} too close to background {:?}",
                    self.background
                )));
            }
        }
        if self.outline_width <= 0.0 {
            return Err(Error::Config("outline_width must be positive".into()));
        }
        Ok(())
    }
}

/// Multi-channel float image, channel-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterFeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl RasterFeatureMap {
    pub fn filled(channels: usize, height: usize, width: usize, values: &[f32]) -> Self {
        assert_eq!(values.len(), channels);
        let mut data = Vec::with_capacity(channels * height * width);
        for &v in values {
            data.extend(std::iter::repeat_n(v, height * width));
        }
        Self { channels, height, width, data }
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Appends single-channel planes (e.g. a junction heatmap) as extra
    /// channels.
    pub fn with_extra_channel(&self, plane: &[f32]) -> Self {
        assert_eq!(plane.len(), self.height * self.width);
        let mut data = self.data.clone();
        data.extend_from_slice(plane);
        Self {
            channels: self.channels + 1,
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        write_planes(w, RASTER_MAGIC, (self.channels, self.height, self.width), &self.data)
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let ((channels, height, width), data) = read_planes(r, RASTER_MAGIC)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("raster contains non-finite values".into()));
        }
        Ok(Self { channels, height, width, data })
    }
}

/// Draws the plan with the given style into a 3-channel raster the size of
/// the annotation canvas.
pub fn rasterize(plan: &FloorPlanAnnotation, style: &StyleConfig) -> RasterFeatureMap {
    let (w, h) = (plan.canvas.0 as usize, plan.canvas.1 as usize);
    let mut fm = RasterFeatureMap::filled(3, h, w, &style.background);

    let order = [SegmentClass::Wall, SegmentClass::Window, SegmentClass::Door];
    for class in order {
        let color = style.color(class);
        for line in plan.lines.iter().filter(|l| l.class == class) {
            let seg = line.segment;
            let half = line.thickness / 2.0;
            let outline = style.outline_width;
            let paints = |d: f64| -> bool {
                if d > half {
                    return false;
                }
                match class {
                    SegmentClass::Wall if style.wall_mode == WallMode::Hollow => {
                        d >= half - outline || half <= outline
                    }
                    // window symbol: frame plus a centre line
                    SegmentClass::Window => d >= half - outline || d <= 0.5 || half <= outline,
                    _ => true,
                }
            };
            let (a, b) = (seg.a(), seg.b());
            let x_lo = (a.x.min(b.x) - half).floor().max(0.0) as usize;
            let x_hi = ((a.x.max(b.x) + half).ceil() as usize).min(w - 1);
            let y_lo = (a.y.min(b.y) - half).floor().max(0.0) as usize;
            let y_hi = ((a.y.max(b.y) + half).ceil() as usize).min(h - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let d = seg.distance_to_point(crate::geometry::Point::new(x as f64, y as f64));
                    if paints(d) {
                        for (c, &v) in color.iter().enumerate() {
                            fm.set(c, y, x, v);
                        }
                    } else if d <= half && class != SegmentClass::Wall {
                        // openings clear the wall drawn underneath them
                        for (c, &v) in style.background.iter().enumerate() {
                            fm.set(c, y, x, v);
                        }
                    }
                }
            }
        }
    }

    if style.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
        let a = style.noise;
        for v in fm.data.iter_mut() {
            *v = (*v + rng.gen_range(-a..=a)).clamp(0.0, 1.0);
        }
    }
    fm
}
