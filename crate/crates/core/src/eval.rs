//! Structural average precision for junctions and classified segments,
//! precision-recall staircases, and enclosed-room counting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{intersection_point, signed_area, structural_distance, Point, Segment, SegmentClass};
use crate::graph::{argmax_class, CandidateGraph};
use crate::junction::DetectedJunction;
use crate::synthgen::FloorPlanAnnotation;

pub const JUNCTION_THRESHOLDS: [f64; 3] = [2.0, 4.0, 8.0];
pub const LINE_THRESHOLDS: [f64; 3] = [8.0, 16.0, 32.0];
const ROOM_SNAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedSegment {
    pub segment: Segment,
    pub class: SegmentClass,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub segments: Vec<PredictedSegment>,
    pub junctions: Vec<DetectedJunction>,
}

impl PredictionSet {
    /// Nodes whose best class is meaningful, scored by that class.
    pub fn from_graph(graph: &CandidateGraph, junctions: &[DetectedJunction]) -> Self {
        let segments = match &graph.node_scores {
            Some(scores) => graph
                .nodes
                .iter()
                .zip(scores)
                .filter_map(|(node, s)| {
                    let class = argmax_class(s);
                    class.is_meaningful().then(|| PredictedSegment {
                        segment: node.segment,
                        class,
                        score: s[class.index()],
                    })
                })
                .collect(),
            None => Vec::new(),
        };
        Self { segments, junctions: junctions.to_vec() }
    }

    /// Annotation lines taken as predictions; missing scores count as 1.
    pub fn from_annotation(plan: &FloorPlanAnnotation) -> Self {
        Self {
            segments: plan
                .lines
                .iter()
                .filter(|l| l.class.is_meaningful())
                .map(|l| PredictedSegment { segment: l.segment, class: l.class, score: l.score.unwrap_or(1.0) })
                .collect(),
            junctions: plan
                .junctions()
                .into_iter()
                .map(|position| DetectedJunction { position, score: 1.0 })
                .collect(),
        }
    }
}

/// Which predictions and ground-truth lines take part in a line match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    Class(SegmentClass),
    All,
}

impl ClassFilter {
    fn keeps(self, c: SegmentClass) -> bool {
        match self {
            ClassFilter::Class(k) => k == c,
            ClassFilter::All => c.is_meaningful(),
        }
    }
}

/// Predictions in rank order with their match outcome, plus the number of
/// ground-truth items they compete for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matches {
    pub scores: Vec<f64>,
    pub hits: Vec<bool>,
    pub gt_count: usize,
}

impl Matches {
    /// Pools matches from several images into one ranking. Equal scores keep
    /// image order.
    pub fn merge(parts: &[Matches]) -> Matches {
        let mut all: Vec<(f64, bool)> = parts
            .iter()
            .flat_map(|m| m.scores.iter().copied().zip(m.hits.iter().copied()))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        Matches {
            scores: all.iter().map(|x| x.0).collect(),
            hits: all.iter().map(|x| x.1).collect(),
            gt_count: parts.iter().map(|m| m.gt_count).sum(),
        }
    }
}

fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy one-to-one matching in score order: each prediction takes the
/// nearest free ground-truth item with `cost <= theta`.
fn greedy<P, G>(preds: &[P], score: impl Fn(&P) -> f64, gt: &[G], cost: impl Fn(&P, &G) -> f64, theta: f64) -> Matches {
    let scores: Vec<f64> = preds.iter().map(&score).collect();
    let mut taken = vec![false; gt.len()];
    let mut out = Matches { gt_count: gt.len(), ..Default::default() };
    for i in rank(&scores) {
        let mut best: Option<(f64, usize)> = None;
        for (g, item) in gt.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let d = cost(&preds[i], item);
            if d <= theta && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, g));
            }
        }
        if let Some((_, g)) = best {
            taken[g] = true;
        }
        out.scores.push(scores[i]);
        out.hits.push(best.is_some());
    }
    out
}

/// Junction matches under a squared-distance threshold.
pub fn match_junctions(pred: &[DetectedJunction], gt: &[Point], theta: f64) -> Matches {
    greedy(pred, |p| p.score as f64, gt, |p, g| p.position.dist2(*g), theta)
}

/// Line matches under a structural-distance threshold.
pub fn match_lines(pred: &PredictionSet, gt: &[(Segment, SegmentClass)], theta: f64, filter: ClassFilter) -> Matches {
    let p: Vec<&PredictedSegment> = pred.segments.iter().filter(|s| filter.keeps(s.class)).collect();
    let g: Vec<&Segment> = gt.iter().filter(|(_, c)| filter.keeps(*c)).map(|(s, _)| s).collect();
    greedy(&p, |s| s.score, &g, |s, t| structural_distance(&s.segment, t), theta)
}

pub fn gt_lines(plan: &FloorPlanAnnotation) -> Vec<(Segment, SegmentClass)> {
    plan.lines.iter().map(|l| (l.segment, l.class)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    /// Lowest score admitted at this point.
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// Interpolated precision at each rank: the best precision at that rank or
/// any later one.
fn interpolated(m: &Matches) -> (Vec<f64>, Vec<f64>) {
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(m.hits.len());
    let mut recall = Vec::with_capacity(m.hits.len());
    for (k, &h) in m.hits.iter().enumerate() {
        tp += usize::from(h);
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(if m.gt_count == 0 { 0.0 } else { tp as f64 / m.gt_count as f64 });
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    (recall, precision)
}

/// Sum of interpolated precision over recall increments.
pub fn average_precision(m: &Matches) -> f64 {
    if m.gt_count == 0 {
        return 0.0;
    }
    let (recall, precision) = interpolated(m);
    let mut prev = 0.0;
    let mut ap = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += p * (r - prev);
        prev = *r;
    }
    ap
}

/// Corners of the interpolated staircase: ranks where a recall gain is
/// followed by a precision drop, plus the last hit.
pub fn pr_curve(m: &Matches) -> PrCurve {
    let (recall, precision) = interpolated(m);
    let last = m.hits.iter().rposition(|&h| h).unwrap_or(usize::MAX);
    let points = (0..recall.len())
        .filter(|&k| m.hits[k] && (k == last || precision[k + 1] < precision[k]))
        .map(|k| PrPoint { score: m.scores[k], recall: recall[k], precision: precision[k] })
        .collect();
    PrCurve { points }
}

pub fn sap_junctions(pred: &[DetectedJunction], gt: &[Point], theta: f64) -> f64 {
    average_precision(&match_junctions(pred, gt, theta))
}

pub fn sap_lines(pred: &PredictionSet, gt: &[(Segment, SegmentClass)], theta: f64, filter: ClassFilter) -> f64 {
    average_precision(&match_lines(pred, gt, theta, filter))
}

/// Mean of per-class AP over the meaningful classes present in the ground
/// truth. `None` when no class is present.
pub fn msap_of(per_class: &[(SegmentClass, Matches)]) -> Option<f64> {
    let present: Vec<f64> = per_class
        .iter()
        .filter(|(_, m)| m.gt_count > 0)
        .map(|(_, m)| average_precision(m))
        .collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

pub fn msap(pred: &PredictionSet, gt: &[(Segment, SegmentClass)], theta: f64) -> f64 {
    let per: Vec<(SegmentClass, Matches)> = SegmentClass::MEANINGFUL
        .iter()
        .map(|&c| (c, match_lines(pred, gt, theta, ClassFilter::Class(c))))
        .collect();
    msap_of(&per).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoomCount {
    pub rooms: usize,
    pub rooms_with_doors: usize,
}

/// Bounded faces of the arrangement formed by all meaningful segments, and
/// how many of them have a door on their boundary.
pub fn count_rooms(segments: &[(Segment, SegmentClass)]) -> RoomCount {
    let segs: Vec<(Segment, SegmentClass)> = segments.iter().filter(|(_, c)| c.is_meaningful()).copied().collect();
    let mut verts: Vec<Point> = Vec::new();
    let mut vid = |p: Point| -> usize {
        if let Some(i) = verts.iter().position(|q| q.approx_eq(p, ROOM_SNAP)) {
            return i;
        }
        verts.push(p);
        verts.len() - 1
    };
    // split parameters along each segment
    let mut cuts: Vec<Vec<(f64, Point)>> = segs.iter().map(|(s, _)| vec![(0.0, s.a()), (1.0, s.b())]).collect();
    let along = |s: &Segment, p: Point| -> f64 {
        let d = s.direction();
        p.sub(s.a()).dot(d) / d.dot(d)
    };
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (si, sj) = (segs[i].0, segs[j].0);
            let mut hits = Vec::new();
            if let Some(p) = intersection_point(&si, &sj) {
                hits.push(p);
            }
            for p in [sj.a(), sj.b()] {
                if si.distance_to_point(p) <= ROOM_SNAP {
                    hits.push(p);
                }
            }
            for p in [si.a(), si.b()] {
                if sj.distance_to_point(p) <= ROOM_SNAP {
                    hits.push(p);
                }
            }
            for p in hits {
                cuts[i].push((along(&si, p), p));
                cuts[j].push((along(&sj, p), p));
            }
        }
    }
    let mut edges: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    for ((_, class), mut c) in segs.iter().zip(cuts) {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ids: Vec<usize> = c.iter().map(|&(_, p)| vid(p)).collect();
        for w in ids.windows(2) {
            if w[0] != w[1] {
                let key = (w[0].min(w[1]), w[0].max(w[1]));
                *edges.entry(key).or_insert(false) |= *class == SegmentClass::Door;
            }
        }
    }
    // outgoing half-edges per vertex sorted by angle
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for &(a, b) in edges.keys() {
        out[a].push(b);
        out[b].push(a);
    }
    for (v, list) in out.iter_mut().enumerate() {
        let o = verts[v];
        list.sort_by(|&p, &q| {
            let (dp, dq) = (verts[p].sub(o), verts[q].sub(o));
            dp.y.atan2(dp.x).total_cmp(&dq.y.atan2(dq.x))
        });
    }
    let mut visited: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    let mut count = RoomCount::default();
    for &(a, b) in edges.keys() {
        for start in [(a, b), (b, a)] {
            if visited.contains_key(&start) {
                continue;
            }
            let mut poly = Vec::new();
            let mut door = false;
            let (mut u, mut v) = start;
            loop {
                visited.insert((u, v), ());
                poly.push(verts[u]);
                door |= edges[&(u.min(v), u.max(v))];
                let list = &out[v];
                let k = list.iter().position(|&w| w == u).expect("twin present");
                let w = list[(k + list.len() - 1) % list.len()];
                (u, v) = (v, w);
                if (u, v) == start {
                    break;
                }
            }
            if signed_area(&poly) > 1e-9 {
                count.rooms += 1;
                count.rooms_with_doors += usize::from(door);
            }
        }
    }
    count
}

pub fn predicted_rooms(pred: &PredictionSet) -> RoomCount {
    let segs: Vec<(Segment, SegmentClass)> = pred.segments.iter().map(|s| (s.segment, s.class)).collect();
    count_rooms(&segs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub junction: Vec<f64>,
    pub line: Vec<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { junction: JUNCTION_THRESHOLDS.to_vec(), line: LINE_THRESHOLDS.to_vec() }
    }
}

/// One metric value; room counts carry no threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub threshold: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<Metric>,
    /// Class-agnostic curves, one per line threshold.
    pub curves: Vec<(f64, PrCurve)>,
}

impl EvalReport {
    pub fn get(&self, name: &str, threshold: Option<f64>) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.threshold == threshold)
            .map(|m| m.value)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("metric\tthreshold\tvalue\n");
        for m in &self.metrics {
            let t = m.threshold.map_or_else(|| "-".to_string(), |t| t.to_string());
            let _ = writeln!(s, "{}\t{}\t{:.6}", m.name, t, m.value);
        }
        s
    }

    pub fn curves_text(&self) -> String {
        let mut s = String::from("theta\trecall\tprecision\n");
        for (theta, curve) in &self.curves {
            for p in &curve.points {
                let _ = writeln!(s, "{}\t{}\t{}", theta, p.recall, p.precision);
            }
        }
        s
    }
}

/// Dataset-level metrics: matches are pooled over all images before AP is
/// taken; room counts are averaged per image.
pub fn evaluate(items: &[(PredictionSet, FloorPlanAnnotation)], thresholds: &Thresholds) -> EvalReport {
    let mut report = EvalReport::default();
    let mut push = |name: &str, threshold: Option<f64>, value: f64| {
        report.metrics.push(Metric { name: name.to_string(), threshold, value });
    };
    let gts: Vec<Vec<(Segment, SegmentClass)>> = items.iter().map(|(_, p)| gt_lines(p)).collect();
    for &t in &thresholds.junction {
        let parts: Vec<Matches> = items
            .iter()
            .map(|(pred, plan)| match_junctions(&pred.junctions, &plan.junctions(), t))
            .collect();
        push("sAP_J", Some(t), average_precision(&Matches::merge(&parts)));
    }
    let mut curves = Vec::new();
    for &t in &thresholds.line {
        let mut per_class = Vec::new();
        for class in SegmentClass::MEANINGFUL {
            let parts: Vec<Matches> = items
                .iter()
                .zip(&gts)
                .map(|((pred, _), gt)| match_lines(pred, gt, t, ClassFilter::Class(class)))
                .collect();
            let merged = Matches::merge(&parts);
            push(&format!("sAP_{}", class.label()), Some(t), average_precision(&merged));
            per_class.push((class, merged));
        }
        push("msAP", Some(t), msap_of(&per_class).unwrap_or(0.0));
        let parts: Vec<Matches> = items
            .iter()
            .zip(&gts)
            .map(|((pred, _), gt)| match_lines(pred, gt, t, ClassFilter::All))
            .collect();
        let merged = Matches::merge(&parts);
        push("sAP_N", Some(t), average_precision(&merged));
        curves.push((t, pr_curve(&merged)));
    }
    let n = items.len().max(1) as f64;
    let counts: Vec<RoomCount> = items.iter().map(|(pred, _)| predicted_rooms(pred)).collect();
    let gt_counts: Vec<RoomCount> = gts.iter().map(|g| count_rooms(g)).collect();
    push("N_r", None, counts.iter().map(|c| c.rooms as f64).sum::<f64>() / n);
    push("N_R", None, counts.iter().map(|c| c.rooms_with_doors as f64).sum::<f64>() / n);
    push("N_r_gt", None, gt_counts.iter().map(|c| c.rooms as f64).sum::<f64>() / n);
    push("N_R_gt", None, gt_counts.iter().map(|c| c.rooms_with_doors as f64).sum::<f64>() / n);
    report.curves = curves;
    report
}
