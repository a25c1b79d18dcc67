//! Procedural floor plans: a recursive axis-aligned partition of a building
//! footprint into rooms, with doors connecting every room, windows on the
//! exterior and an optional chamfered (inclined) exterior corner.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::{FloorPlanAnnotation, LineAnnotation, RoomAnnotation};
use crate::error::{Error, Result};
use crate::geometry::{Point, Segment, SegmentClass};

const ROOM_CATEGORIES: [&str; 8] = [
    "bedroom",
    "bathroom",
    "balcony",
    "living_room",
    "kitchen",
    "aisle",
    "dining_room",
    "study",
];

const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub canvas: (u32, u32),
    /// Distance from the canvas border to the largest possible footprint.
    pub margin: u32,
    /// Each footprint side is pulled inwards by up to this many pixels.
    pub footprint_jitter: u32,
    /// Inclusive range of the number of rooms.
    pub rooms: (usize, usize),
    pub min_room_size: u32,
    /// Minimum spacing between collinear junctions created by splits and
    /// openings.
    pub min_junction_gap: u32,
    pub door_width: (u32, u32),
    pub window_width: (u32, u32),
    pub entrance_door: bool,
    pub extra_door_probability: f64,
    pub window_probability: f64,
    pub inclined_probability: f64,
    pub chamfer_size: (u32, u32),
    pub wall_thickness: (f64, f64),
    pub door_thickness: f64,
    pub scale_range: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            canvas: (512, 512),
            margin: 12,
            footprint_jitter: 32,
            rooms: (8, 16),
            min_room_size: 64,
            min_junction_gap: 26,
            door_width: (28, 36),
            window_width: (30, 56),
            entrance_door: true,
            extra_door_probability: 0.5,
            window_probability: 0.9,
            inclined_probability: 0.15,
            chamfer_size: (28, 44),
            wall_thickness: (4.0, 8.0),
            door_thickness: 2.0,
            scale_range: (18.47, 38.16),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (w, h) = self.canvas;
        let footprint = |side: u32| side as i64 - 2 * (self.margin as i64 + self.footprint_jitter as i64) - 1;
        let (fw, fh) = (footprint(w), footprint(h));
        let min = self.min_room_size as i64;
        if self.rooms.0 == 0 || self.rooms.0 > self.rooms.1 {
            return bad(format!("room range {:?} is empty", self.rooms));
        }
        if fw < min || fh < min {
            return bad(format!(
                "minimum room size {min} does not fit a {fw}x{fh} footprint on a {w}x{h} canvas"
            ));
        }
        if (fw / min) * (fh / min) < self.rooms.0 as i64 {
            return bad(format!(
                "{} rooms of size {min} cannot fit a {fw}x{fh} footprint",
                self.rooms.0
            ));
        }
        if self.min_room_size < self.min_junction_gap {
            return bad("min_room_size must be at least min_junction_gap".into());
        }
        for (name, r) in [("door_width", self.door_width), ("window_width", self.window_width), ("chamfer_size", self.chamfer_size)] {
            if r.0 == 0 || r.0 > r.1 {
                return bad(format!("{name} range {r:?} is empty"));
            }
        }
        for (name, p) in [
            ("extra_door_probability", self.extra_door_probability),
            ("window_probability", self.window_probability),
            ("inclined_probability", self.inclined_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.wall_thickness.0 > 0.0 && self.wall_thickness.0 <= self.wall_thickness.1) {
            return bad(format!("wall_thickness range {:?}", self.wall_thickness));
        }
        if self.door_thickness <= 0.0 {
            return bad("door_thickness must be positive".into());
        }
        if !(self.scale_range.0 > 0.0 && self.scale_range.0 <= self.scale_range.1) {
            return bad(format!("scale_range {:?}", self.scale_range));
        }
        if self.rooms.1 > 1 && self.door_width.0 as i64 > min {
            return bad("doors wider than the smallest room cannot connect rooms".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Rect {
    fn width(&self) -> i64 {
        self.x1 - self.x0
    }
    fn height(&self) -> i64 {
        self.y1 - self.y0
    }
    fn corners(&self) -> [(i64, i64); 4] {
        [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]
    }
}

type Ip = (i64, i64);

/// An axis-aligned or inclined boundary piece between two consecutive
/// junctions, and the rooms on either side of it.
#[derive(Debug, Clone)]
struct Piece {
    a: Ip,
    b: Ip,
    rooms: Vec<usize>,
}

impl Piece {
    fn len(&self) -> i64 {
        (self.b.0 - self.a.0).abs() + (self.b.1 - self.a.1).abs()
    }
    fn axis_aligned(&self) -> bool {
        self.a.0 == self.b.0 || self.a.1 == self.b.1
    }
    fn at(&self, t: i64) -> Ip {
        let l = self.len();
        (self.a.0 + (self.b.0 - self.a.0) * t / l, self.a.1 + (self.b.1 - self.a.1) * t / l)
    }
}

#[derive(Debug, Clone, Copy)]
struct Opening {
    offset: i64,
    width: i64,
    class: SegmentClass,
}

/// Deterministically generates one annotated plan for `(seed, config)`.
pub fn generate_plan(seed: u64, config: &GeneratorConfig) -> Result<FloorPlanAnnotation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(plan) = attempt(&mut rng, config) {
            return Ok(plan);
        }
    }
    Err(Error::Config(format!(
        "no valid plan after {MAX_ATTEMPTS} attempts for seed {seed}"
    )))
}

fn attempt(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Option<FloorPlanAnnotation> {
    let (w, h) = (cfg.canvas.0 as i64, cfg.canvas.1 as i64);
    let m = cfg.margin as i64;
    let j = cfg.footprint_jitter as i64;
    let footprint = Rect {
        x0: m + rng.gen_range(0..=j),
        y0: m + rng.gen_range(0..=j),
        x1: w - 1 - m - rng.gen_range(0..=j),
        y1: h - 1 - m - rng.gen_range(0..=j),
    };
    let target = rng.gen_range(cfg.rooms.0..=cfg.rooms.1);
    let rects = partition(rng, cfg, footprint, target);
    if rects.len() < cfg.rooms.0 {
        return None;
    }

    let mut polygons: Vec<Vec<Ip>> = rects.iter().map(|r| r.corners().to_vec()).collect();
    if rng.gen_bool(cfg.inclined_probability) {
        chamfer(rng, cfg, footprint, &rects, &mut polygons);
    }

    let mut pieces = split_pieces(&polygons);
    let openings = place_openings(rng, cfg, &mut pieces, polygons.len())?;

    let wall_t = round_half(rng.gen_range(cfg.wall_thickness.0..=cfg.wall_thickness.1));
    let mut lines = Vec::new();
    for (i, p) in pieces.iter().enumerate() {
        let seg = |s: i64, e: i64| {
            let (a, b) = (p.at(s), p.at(e));
            Segment::new(Point::new(a.0 as f64, a.1 as f64), Point::new(b.0 as f64, b.1 as f64))
                .expect("pieces have positive length")
        };
        let wall = |segment| LineAnnotation {
            segment,
            thickness: wall_t,
            class: SegmentClass::Wall,
            score: None,
        };
        match openings.get(&i) {
            None => lines.push(wall(seg(0, p.len()))),
            Some(o) => {
                if o.offset > 0 {
                    lines.push(wall(seg(0, o.offset)));
                }
                let thickness = match o.class {
                    SegmentClass::Door => cfg.door_thickness,
                    _ => wall_t,
                };
                lines.push(LineAnnotation {
                    segment: seg(o.offset, o.offset + o.width),
                    thickness,
                    class: o.class,
                    score: None,
                });
                if o.offset + o.width < p.len() {
                    lines.push(wall(seg(o.offset + o.width, p.len())));
                }
            }
        }
    }

    let rooms = polygons
        .iter()
        .map(|poly| RoomAnnotation {
            category: ROOM_CATEGORIES[rng.gen_range(0..ROOM_CATEGORIES.len())].to_string(),
            contour: poly.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect(),
        })
        .collect();
    let scale = rng.gen_range(cfg.scale_range.0..=cfg.scale_range.1);
    Some(FloorPlanAnnotation {
        scale,
        canvas: cfg.canvas,
        lines,
        rooms,
    })
}

fn round_half(v: f64) -> f64 {
    (v * 2.0).round() / 2.0
}

/// Junction coordinates along the horizontal line `y` (or vertical line `x`
/// when `vertical`) among all rectangle corners.
fn junctions_on_line(rects: &[Rect], vertical: bool, at: i64) -> Vec<i64> {
    rects
        .iter()
        .flat_map(|r| r.corners())
        .filter_map(|(x, y)| match vertical {
            false if y == at => Some(x),
            true if x == at => Some(y),
            _ => None,
        })
        .collect()
}

fn partition(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, footprint: Rect, target: usize) -> Vec<Rect> {
    let min = cfg.min_room_size as i64;
    let gap = cfg.min_junction_gap as i64;
    let mut rects = vec![footprint];
    while rects.len() < target {
        // (rect index, split vertical?) options, larger rooms first
        let mut options: Vec<(usize, bool)> = Vec::new();
        for (i, r) in rects.iter().enumerate() {
            if r.width() >= 2 * min {
                options.push((i, true));
            }
            if r.height() >= 2 * min {
                options.push((i, false));
            }
        }
        options.shuffle(rng);
        options.sort_by_key(|&(i, _)| std::cmp::Reverse(rects[i].width() * rects[i].height()));
        // pick among the top few to keep sizes balanced but varied
        let head = options.len().min(3);
        if head > 0 {
            options[..head].shuffle(rng);
        }

        let mut split = None;
        for (i, vertical) in options {
            let r = rects[i];
            let (lo, hi) = if vertical { (r.x0 + min, r.x1 - min) } else { (r.y0 + min, r.y1 - min) };
            let blockers: Vec<i64> = if vertical {
                let mut b = junctions_on_line(&rects, false, r.y0);
                b.extend(junctions_on_line(&rects, false, r.y1));
                b
            } else {
                let mut b = junctions_on_line(&rects, true, r.x0);
                b.extend(junctions_on_line(&rects, true, r.x1));
                b
            };
            let valid: Vec<i64> = (lo..=hi)
                .filter(|p| blockers.iter().all(|b| (p - b).abs() >= gap))
                .collect();
            if let Some(&p) = valid.choose(rng) {
                split = Some((i, vertical, p));
                break;
            }
        }
        let Some((i, vertical, p)) = split else { break };
        let r = rects[i];
        let (first, second) = if vertical {
            (Rect { x1: p, ..r }, Rect { x0: p, ..r })
        } else {
            (Rect { y1: p, ..r }, Rect { y0: p, ..r })
        };
        rects[i] = first;
        rects.push(second);
    }
    rects
}

/// Replaces one footprint corner by an inclined wall.
fn chamfer(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, footprint: Rect, rects: &[Rect], polygons: &mut [Vec<Ip>]) {
    let gap = cfg.min_junction_gap as i64;
    let corner_idx = rng.gen_range(0..4);
    let corner = footprint.corners()[corner_idx];
    let Some(room) = rects.iter().position(|r| r.corners().contains(&corner)) else {
        return;
    };
    let r = rects[room];
    let cx = rng.gen_range(cfg.chamfer_size.0..=cfg.chamfer_size.1) as i64;
    let cy = rng.gen_range(cfg.chamfer_size.0..=cfg.chamfer_size.1) as i64;
    if r.width() < cx + gap || r.height() < cy + gap {
        return;
    }
    let sx = if corner.0 == r.x0 { 1 } else { -1 };
    let sy = if corner.1 == r.y0 { 1 } else { -1 };
    let on_horizontal = (corner.0 + sx * cx, corner.1);
    let on_vertical = (corner.0, corner.1 + sy * cy);
    let poly = &mut polygons[room];
    let k = poly.iter().position(|&p| p == corner).expect("corner belongs to room");
    let prev = poly[(k + poly.len() - 1) % poly.len()];
    // keep the polygon order: the replacement point next to `prev` comes first
    let (first, second) = if prev.1 == corner.1 {
        (on_horizontal, on_vertical)
    } else {
        (on_vertical, on_horizontal)
    };
    poly.splice(k..=k, [first, second]);
}

/// Splits every room edge at all junctions lying on it and merges the pieces
/// shared by neighbouring rooms.
fn split_pieces(polygons: &[Vec<Ip>]) -> Vec<Piece> {
    let vertices: Vec<Ip> = {
        let mut v: Vec<Ip> = polygons.iter().flatten().copied().collect();
        v.sort();
        v.dedup();
        v
    };
    let mut merged: BTreeMap<(Ip, Ip), Vec<usize>> = BTreeMap::new();
    for (room, poly) in polygons.iter().enumerate() {
        for k in 0..poly.len() {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let mut cuts: Vec<(i64, Ip)> = vertices
                .iter()
                .filter(|&&p| p != a && p != b)
                .filter_map(|&p| {
                    let (px, py) = (p.0 - a.0, p.1 - a.1);
                    let cross = dx * py - dy * px;
                    let t = dx * px + dy * py;
                    (cross == 0 && t > 0 && t < len2).then_some((t, p))
                })
                .collect();
            cuts.sort();
            let mut chain = vec![a];
            chain.extend(cuts.into_iter().map(|(_, p)| p));
            chain.push(b);
            for pair in chain.windows(2) {
                let key = if pair[0] <= pair[1] { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
                merged.entry(key).or_default().push(room);
            }
        }
    }
    merged
        .into_iter()
        .map(|((a, b), rooms)| Piece { a, b, rooms })
        .collect()
}

/// Chooses `(offset, width)` for an opening on a piece of length `len` so
/// that every leftover wall piece is empty or at least `gap` long.
fn opening_slot(rng: &mut ChaCha8Rng, len: i64, widths: (u32, u32), gap: i64) -> Option<(i64, i64)> {
    let wmin = widths.0 as i64;
    let wmax = (widths.1 as i64).min(len);
    if wmin > wmax {
        return None;
    }
    let width = rng.gen_range(wmin..=wmax);
    let left = len - width;
    let ok = |o: i64| (o == 0 || o >= gap) && (left - o == 0 || left - o >= gap);
    let mut offsets: Vec<i64> = Vec::new();
    if ok(0) {
        offsets.push(0);
    }
    if ok(left) && left != 0 {
        offsets.push(left);
    }
    if left >= 2 * gap {
        // inner placements are far more common than flush ones
        for _ in 0..4 {
            offsets.push(rng.gen_range(gap..=left - gap));
        }
    }
    if let Some(&o) = offsets.choose(rng) {
        return Some((o, width));
    }
    (len >= wmin && len <= widths.1 as i64).then_some((0, len))
}

fn place_openings(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    pieces: &mut [Piece],
    room_count: usize,
) -> Option<BTreeMap<usize, Opening>> {
    let gap = cfg.min_junction_gap as i64;
    let mut openings: BTreeMap<usize, Opening> = BTreeMap::new();

    // Spanning tree of doors over the room adjacency (Kruskal on a shuffled
    // edge list).
    let mut interior: Vec<usize> = (0..pieces.len())
        .filter(|&i| pieces[i].rooms.len() == 2 && pieces[i].len() >= cfg.door_width.0 as i64)
        .collect();
    interior.shuffle(rng);
    let mut parent: Vec<usize> = (0..room_count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut joined = 1;
    let mut leftovers = Vec::new();
    for &i in &interior {
        let (ra, rb) = (pieces[i].rooms[0], pieces[i].rooms[1]);
        let (fa, fb) = (find(&mut parent, ra), find(&mut parent, rb));
        if fa == fb {
            leftovers.push(i);
            continue;
        }
        if let Some((offset, width)) = opening_slot(rng, pieces[i].len(), cfg.door_width, gap) {
            parent[fa] = fb;
            joined += 1;
            openings.insert(i, Opening { offset, width, class: SegmentClass::Door });
        }
    }
    if joined < room_count {
        return None;
    }
    for i in leftovers {
        if rng.gen_bool(cfg.extra_door_probability) {
            if let Some((offset, width)) = opening_slot(rng, pieces[i].len(), cfg.door_width, gap) {
                openings.insert(i, Opening { offset, width, class: SegmentClass::Door });
            }
        }
    }

    let mut exterior: Vec<usize> = (0..pieces.len())
        .filter(|&i| pieces[i].rooms.len() == 1 && pieces[i].axis_aligned())
        .collect();
    exterior.shuffle(rng);
    if cfg.entrance_door {
        let mut placed = false;
        for (k, &i) in exterior.iter().enumerate() {
            if let Some((offset, width)) = opening_slot(rng, pieces[i].len(), cfg.door_width, gap) {
                openings.insert(i, Opening { offset, width, class: SegmentClass::Door });
                exterior.remove(k);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    for i in exterior {
        if rng.gen_bool(cfg.window_probability) {
            if let Some((offset, width)) = opening_slot(rng, pieces[i].len(), cfg.window_width, gap) {
                openings.insert(i, Opening { offset, width, class: SegmentClass::Window });
            }
        }
    }
    Some(openings)
}
