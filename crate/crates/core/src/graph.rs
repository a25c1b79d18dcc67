//! Candidate line segments between detected junctions, their suppression, and
//! the line graph whose nodes are candidates and whose edges join candidates
//! sharing a junction.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{axis_angle, convex_hull, junction_angle, Point, Segment, SegmentClass, SNAP_TOLERANCE};
use crate::junction::DetectedJunction;

pub const SHORT_LINE_PX: f64 = 20.0;
pub const NSS_ANGLE_POTENTIAL: f64 = 2.0;
pub const NSS_ANGLE_OTHER: f64 = 22.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateSegment {
    pub segment: Segment,
    /// Indices into the junction list, `i < j`.
    pub junction_ids: (usize, usize),
    pub potential: bool,
}

impl CandidateSegment {
    pub fn shares_junction(&self, other: &CandidateSegment) -> Option<usize> {
        let (a, b) = self.junction_ids;
        let (c, d) = other.junction_ids;
        if a == c || a == d {
            Some(a)
        } else if b == c || b == d {
            Some(b)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub junction: usize,
    pub shared: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    pub nodes: Vec<CandidateSegment>,
    /// Sorted by `(u, v)`, `u < v`.
    pub edges: Vec<GraphEdge>,
    pub node_labels: Option<Vec<SegmentClass>>,
    pub node_scores: Option<Vec<[f64; 4]>>,
}

impl CandidateGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Argmax of the stored scores, lowest class index on ties.
    pub fn predicted_classes(&self) -> Option<Vec<SegmentClass>> {
        self.node_scores
            .as_ref()
            .map(|scores| scores.iter().map(argmax_class).collect())
    }
}

pub fn argmax_class(scores: &[f64; 4]) -> SegmentClass {
    let mut best = 0;
    for c in 1..4 {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    SegmentClass::from_index(best).expect("class index")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suppression {
    Nss,
    #[default]
    Nds,
}

impl FromStr for Suppression {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nss" => Ok(Suppression::Nss),
            "nds" => Ok(Suppression::Nds),
            other => Err(format!("unknown suppression {other:?} (expected nss or nds)")),
        }
    }
}

impl fmt::Display for Suppression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suppression::Nss => "nss",
            Suppression::Nds => "nds",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationStatus {
    Ok,
    TooFewJunctions(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub candidates: Vec<CandidateSegment>,
    pub status: EnumerationStatus,
}

/// Short lines are always potential; longer ones must be close to an axis,
/// with the allowed deviation shrinking as the line grows.
pub fn is_potential(seg: &Segment) -> bool {
    let l = seg.length();
    l < SHORT_LINE_PX || axis_angle(seg) < 200.0 / l + 2.0
}

/// Every junction pair as a candidate, ordered by `(i, j)`.
pub fn enumerate_candidates(junctions: &[DetectedJunction]) -> Enumeration {
    let n = junctions.len();
    if n < 2 {
        return Enumeration {
            candidates: Vec::new(),
            status: EnumerationStatus::TooFewJunctions(n),
        };
    }
    let mut candidates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let Ok(segment) = Segment::new(junctions[i].position, junctions[j].position) else {
                continue;
            };
            candidates.push(CandidateSegment {
                segment,
                junction_ids: (i, j),
                potential: is_potential(&segment),
            });
        }
    }
    Enumeration {
        candidates,
        status: EnumerationStatus::Ok,
    }
}

fn nss_threshold(c: &CandidateSegment) -> f64 {
    if c.potential {
        NSS_ANGLE_POTENTIAL
    } else {
        NSS_ANGLE_OTHER
    }
}

fn junction_count(cands: &[CandidateSegment]) -> usize {
    cands
        .iter()
        .map(|c| c.junction_ids.1 + 1)
        .max()
        .unwrap_or(0)
}

/// Shortest-first greedy: a candidate is dropped when a kept, shorter
/// candidate leaves one of its junctions at a smaller angle than its
/// threshold. Survivors keep their input order.
pub fn nss_filter(cands: &[CandidateSegment]) -> Vec<CandidateSegment> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        cands[a]
            .segment
            .length()
            .total_cmp(&cands[b].segment.length())
            .then(a.cmp(&b))
    });
    let mut kept_at: Vec<Vec<usize>> = vec![Vec::new(); junction_count(cands)];
    let mut keep = vec![false; cands.len()];
    for &ci in &order {
        let c = &cands[ci];
        let limit = nss_threshold(c);
        let (a, b) = c.junction_ids;
        let blocked = [a, b].iter().any(|&j| {
            let shared = if j == a { c.segment.a() } else { c.segment.b() };
            kept_at[j].iter().any(|&ki| {
                junction_angle(&c.segment, &cands[ki].segment, shared, SNAP_TOLERANCE)
                    .map(|angle| angle < limit)
                    .unwrap_or(false)
            })
        });
        if !blocked {
            keep[ci] = true;
            kept_at[a].push(ci);
            kept_at[b].push(ci);
        }
    }
    cands
        .iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(*c))
        .collect()
}

/// Junction-id pairs forming the edges of the junctions' convex hull.
pub fn hull_edges(junctions: &[DetectedJunction]) -> Vec<(usize, usize)> {
    let points: Vec<Point> = junctions.iter().map(|j| j.position).collect();
    let hull = convex_hull(&points);
    let ids: Vec<usize> = hull
        .iter()
        .filter_map(|h| points.iter().position(|p| p == h))
        .collect();
    let mut out = Vec::new();
    match ids.len() {
        0 | 1 => {}
        2 => out.push((ids[0].min(ids[1]), ids[0].max(ids[1]))),
        n => {
            for k in 0..n {
                let (a, b) = (ids[k], ids[(k + 1) % n]);
                out.push((a.min(b), a.max(b)));
            }
        }
    }
    out
}

/// Non-shortest suppression restricted to potential candidates, plus every
/// candidate along the convex hull of the junctions.
pub fn nds_filter(cands: &[CandidateSegment], junctions: &[DetectedJunction]) -> Vec<CandidateSegment> {
    let potential: Vec<CandidateSegment> = cands.iter().filter(|c| c.potential).copied().collect();
    let mut keep: HashSet<(usize, usize)> = nss_filter(&potential).iter().map(|c| c.junction_ids).collect();
    keep.extend(hull_edges(junctions));
    cands
        .iter()
        .filter(|c| keep.contains(&c.junction_ids))
        .copied()
        .collect()
}

pub fn suppress(
    cands: &[CandidateSegment],
    junctions: &[DetectedJunction],
    mode: Suppression,
) -> Vec<CandidateSegment> {
    match mode {
        Suppression::Nss => nss_filter(cands),
        Suppression::Nds => nds_filter(cands, junctions),
    }
}

pub fn build_dual_graph(kept: Vec<CandidateSegment>) -> CandidateGraph {
    let mut at: Vec<Vec<usize>> = vec![Vec::new(); junction_count(&kept)];
    for (n, c) in kept.iter().enumerate() {
        at[c.junction_ids.0].push(n);
        at[c.junction_ids.1].push(n);
    }
    let mut edges = Vec::new();
    for (j, incident) in at.iter().enumerate() {
        for (x, &u) in incident.iter().enumerate() {
            for &v in &incident[x + 1..] {
                let c = &kept[u];
                let shared = if c.junction_ids.0 == j { c.segment.a() } else { c.segment.b() };
                edges.push(GraphEdge { u, v, junction: j, shared });
            }
        }
    }
    edges.sort_by_key(|e| (e.u, e.v));
    CandidateGraph {
        nodes: kept,
        edges,
        node_labels: None,
        node_scores: None,
    }
}

/// Enumeration, suppression and graph construction in one step.
pub fn candidate_graph(junctions: &[DetectedJunction], mode: Suppression) -> CandidateGraph {
    let all = enumerate_candidates(junctions).candidates;
    build_dual_graph(suppress(&all, junctions, mode))
}
