//! End-to-end acceptance checks. Each prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::rc::Rc;
use std::time::Instant;

use glsp_core::eval::{
    count_rooms, evaluate, gt_lines, match_junctions, sap_junctions, sap_lines, ClassFilter, Matches, PredictionSet,
    RoomCount, Thresholds,
};
use glsp_core::geometry::{Point, Segment, SegmentClass};
use glsp_core::graph::{candidate_graph, Suppression};
use glsp_core::junction::{
    bin_quantize_detect, nms_detect, render_oracle_heatmap, DetectedJunction, HeatmapSource, JunctionHeatmap,
    NmsKernel,
};
use glsp_core::nn::{
    forward, gaan_layer, leaky, read_checkpoint, write_checkpoint, EdgeIndex, GraphInput, LayerParams, ModelConfig,
    ModelParams, Tape, Tensor, LEAKY_SLOPE,
};
use glsp_core::pipeline::{
    detect_junctions, prepare, JunctionMode, PipelineConfig, Prepared, Sample, DEFAULT_HEATMAP_NOISE, DEFAULT_SIGMA,
};
use glsp_core::synthgen::{
    generate_plan, load_annotation, save_annotation, GeneratorConfig, LineAnnotation, RasterFeatureMap,
};
use glsp_core::train::{train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

// ---------------------------------------------------------------- 1

fn gradient_check() -> Outcome {
    let cfg = ModelConfig { input_dim: 16, hidden: 16, heads: 8, attn_dim: 16, value_dim: 16, edge_dim: 16, layers: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut params = ModelParams::init(cfg, 7).unwrap();
    // nonzero biases so every bias gradient is exercised away from init
    for t in params.tensors_mut() {
        if t.rows() == 1 {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
    }
    let edges = [(0, 1, 0), (1, 2, 1), (1, 3, 1), (2, 3, 2), (3, 4, 3), (4, 5, 4), (0, 5, 5), (2, 5, 2)];
    let input = GraphInput {
        nodes: rand_tensor(&mut rng, 6, 16),
        junctions: rand_tensor(&mut rng, 6, 2),
        index: Rc::new(EdgeIndex::from_undirected(6, 6, &edges)),
    };
    let targets = Tensor::from_vec(6, 4, (0..24).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).unwrap();
    let weights = Tensor::filled(6, 4, 1.0);
    let loss_of = |p: &ModelParams, grads: bool| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let pv = p.register(&mut tape);
        let logits = forward(&mut tape, &pv, cfg.heads, &input).unwrap();
        let probs = tape.sigmoid(logits);
        let loss = tape.bce_loss(probs, targets.clone(), weights.clone(), 1e-7).unwrap();
        let value = tape.value(loss).item();
        if !grads {
            return (value, Vec::new());
        }
        tape.backward(loss).unwrap();
        (value, pv.all().iter().map(|v| tape.grad(*v).unwrap().clone()).collect())
    };
    let start = Instant::now();
    let (_, grads) = loss_of(&params, true);
    let h = 1e-4;
    let mut central = |ti: usize, k: usize, h: f64| {
        let orig = params.tensors_mut()[ti].data()[k];
        params.tensors_mut()[ti].data_mut()[k] = orig + h;
        let up = loss_of(&params, false).0;
        params.tensors_mut()[ti].data_mut()[k] = orig - h;
        let down = loss_of(&params, false).0;
        params.tensors_mut()[ti].data_mut()[k] = orig;
        (up - down) / (2.0 * h)
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut at_kink = 0;
    for (ti, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            let numeric = central(ti, k, h);
            let err = rel(g.data()[k], numeric);
            // A leaky ReLU input inside the +-h band makes the difference
            // quotient itself depend on h; such entries are counted apart.
            if err >= 1e-4 && rel(numeric, central(ti, k, h / 2.0)) > 1e-5 {
                at_kink += 1;
                continue;
            }
            worst = worst.max(err);
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let total = checked + at_kink;
    check(
        worst < 1e-4 && secs < 30.0 && at_kink * 100 <= total,
        format!("{checked} of {total} parameters smooth at h, max relative error {worst:.2e}; {at_kink} straddle an activation kink; {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- 2

/// Direct evaluation of one layer from its weights, returning the output and
/// the per-edge attention weights in edge-index order.
fn layer_by_loops(l: &LayerParams, heads: usize, x: &Tensor, e: &Tensor, index: &EdgeIndex, last: bool) -> (Tensor, Tensor) {
    let n = x.rows();
    let a = l.xa_w.cols() / heads;
    let f = l.e_w.cols() / heads;
    let c = l.wx.cols();
    let lin = |w: &Tensor, b: &Tensor, v: &[f64], col: usize| {
        let mut s = b.get(0, col);
        for (i, vi) in v.iter().enumerate() {
            s += vi * w.get(i, col);
        }
        s
    };
    let mut weights = Tensor::zeros(index.len(), heads * c);
    let mut agg = Tensor::zeros(n, heads * c);
    for i in 0..n {
        let edges: Vec<usize> = index.neighbors(i).collect();
        if edges.is_empty() {
            continue;
        }
        for k in 0..heads {
            for ch in 0..c {
                let mut logits = Vec::new();
                for &ed in &edges {
                    let j = index.sources[ed];
                    let jn = index.junction_of[ed];
                    let mut s = l.w_b.get(0, k * c + ch);
                    for t in 0..a {
                        let xa = leaky(lin(&l.xa_w, &l.xa_b, x.row(i), k * a + t), LEAKY_SLOPE);
                        let za = leaky(lin(&l.za_w, &l.za_b, x.row(j), k * a + t), LEAKY_SLOPE);
                        s += xa * l.wx.get(k * a + t, ch) + za * l.wz.get(k * a + t, ch);
                    }
                    for t in 0..f {
                        let ee = leaky(lin(&l.e_w, &l.e_b, e.row(jn), k * f + t), LEAKY_SLOPE);
                        s += ee * l.we.get(k * f + t, ch);
                    }
                    logits.push(leaky(s, LEAKY_SLOPE));
                }
                let z: f64 = logits.iter().map(|v| v.exp()).sum();
                for (t, &ed) in edges.iter().enumerate() {
                    let w = logits[t].exp() / z;
                    weights.set(ed, k * c + ch, w);
                    let v = leaky(lin(&l.v_w, &l.v_b, x.row(index.sources[ed]), k * c + ch), LEAKY_SLOPE);
                    agg.set(i, k * c + ch, agg.get(i, k * c + ch) + w * v);
                }
            }
        }
    }
    let d_out = l.o_w.cols();
    let mut out = Tensor::zeros(n, d_out);
    for i in 0..n {
        let h: Vec<f64> = x.row(i).iter().chain(agg.row(i)).copied().collect();
        for o in 0..d_out {
            let s = lin(&l.o_w, &l.o_b, &h, o);
            out.set(i, o, if last { s } else { leaky(s, LEAKY_SLOPE) });
        }
    }
    (out, weights)
}

fn layer_oracle() -> Outcome {
    let cfg = ModelConfig { input_dim: 6, hidden: 6, heads: 3, attn_dim: 4, value_dim: 5, edge_dim: 3, layers: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut params = ModelParams::init(cfg, 3).unwrap();
    for t in params.tensors_mut() {
        if t.rows() == 1 {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    }
    let index = Rc::new(EdgeIndex::from_undirected(4, 3, &[(0, 1, 0), (1, 2, 1), (2, 3, 2)]));
    let x = rand_tensor(&mut rng, 4, cfg.hidden);
    let e = rand_tensor(&mut rng, 3, 2);
    let mut max_out = 0.0f64;
    let mut max_w = 0.0f64;
    let mut max_sum = 0.0f64;
    for (m, last) in [(0, false), (1, true)] {
        let mut tape = Tape::new();
        let pv = params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let ev = tape.constant(e.clone());
        let out = gaan_layer(&mut tape, &pv.layers[m], cfg.heads, xv, ev, &index, last).unwrap();
        let (want, want_w) = layer_by_loops(&params.layers[m], cfg.heads, &x, &e, &index, last);
        max_out = max_out.max(tape.value(out).max_abs_diff(&want));
        let att = tape.vars().find(|v| tape.attention_weights(*v).is_some()).unwrap();
        let w = tape.attention_weights(att).unwrap();
        max_w = max_w.max(w.max_abs_diff(&want_w));
        for i in 0..4 {
            for col in 0..w.cols() {
                let s: f64 = index.neighbors(i).map(|ed| w.get(ed, col)).sum();
                max_sum = max_sum.max((s - 1.0).abs());
            }
        }
    }
    check(
        max_out <= 1e-9 && max_w <= 1e-9 && max_sum <= 1e-6,
        format!("output diff {max_out:.1e}, weight diff {max_w:.1e}, weight-sum error {max_sum:.1e}"),
    )
}

// ---------------------------------------------------------------- 3

fn brute_force_nms(hm: &JunctionHeatmap, k: usize, threshold: f32) -> Vec<DetectedJunction> {
    let r = (k / 2) as i64;
    let (w, h) = (hm.width as i64, hm.height as i64);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = hm.get(x as usize, y as usize);
            let mut window_max = f32::NEG_INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (qx, qy) = (x + dx, y + dy);
                    if qx >= 0 && qy >= 0 && qx < w && qy < h {
                        window_max = window_max.max(hm.get(qx as usize, qy as usize));
                    }
                }
            }
            if v >= threshold && v == window_max {
                out.push(DetectedJunction { position: Point::new(x as f64, y as f64), score: v });
            }
        }
    }
    out.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then((a.position.y, a.position.x).partial_cmp(&(b.position.y, b.position.x)).unwrap())
    });
    out
}

fn nms_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut mismatches = 0;
    let mut peaks = 0;
    for trial in 0..100 {
        let values: Vec<f32> = (0..256).map(|_| rng.gen::<f32>()).collect();
        let hm = JunctionHeatmap { width: 16, height: 16, values, source: HeatmapSource::External };
        let k = [3, 5, 7][trial % 3];
        let threshold = rng.gen_range(0.0..0.9f32);
        let got = nms_detect(&hm, NmsKernel::try_from(k).unwrap(), threshold, usize::MAX);
        let want = brute_force_nms(&hm, k, threshold);
        peaks += want.len();
        mismatches += usize::from(got != want);
    }
    check(mismatches == 0, format!("{mismatches}/100 maps differ ({peaks} oracle peaks)"))
}

// ---------------------------------------------------------------- 4

/// Adds two vertical walls whose top endpoints, and whose bottom endpoints,
/// lie inside one 4x4 cell and about 3 px apart.
fn with_close_pairs(seed: u64) -> glsp_core::synthgen::FloorPlanAnnotation {
    let mut plan = generate_plan(seed, &GeneratorConfig::default()).unwrap();
    let existing = plan.junctions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc105e);
    let (w, h) = (plan.canvas.0 as i64, plan.canvas.1 as i64);
    loop {
        let px = 4 * rng.gen_range(4..(w - 32) / 4);
        let py = 4 * rng.gen_range(4..(h - 48) / 4);
        let p = Point::new(px as f64, py as f64);
        let new = [p, Point::new(p.x, p.y + 20.0), Point::new(p.x + 3.0, p.y + 1.0), Point::new(p.x + 3.0, p.y + 21.0)];
        if new.iter().all(|n| existing.iter().all(|j| j.dist(*n) >= 8.0)) {
            for (a, b) in [(new[0], new[1]), (new[2], new[3])] {
                plan.lines.push(LineAnnotation {
                    segment: Segment::new(a, b).unwrap(),
                    thickness: 2.0,
                    class: SegmentClass::Wall,
                    score: None,
                });
            }
            return plan;
        }
    }
}

/// Best recall over score cut-offs whose precision is at least `min_precision`.
fn recall_at_precision(m: &Matches, min_precision: f64) -> f64 {
    let mut tp = 0;
    let mut best = 0.0f64;
    for (k, &hit) in m.hits.iter().enumerate() {
        tp += usize::from(hit);
        if tp as f64 / (k + 1) as f64 >= min_precision {
            best = best.max(tp as f64 / m.gt_count as f64);
        }
    }
    best
}

fn bin_vs_pixel() -> Outcome {
    let threshold = 0.1;
    let mut nms_parts = Vec::new();
    let mut bin_parts = Vec::new();
    for seed in 0..20 {
        let plan = with_close_pairs(500 + seed);
        let gt = plan.junctions();
        let closest = (0..gt.len())
            .flat_map(|i| (i + 1..gt.len()).map(move |j| (i, j)))
            .map(|(i, j)| gt[i].dist(gt[j]))
            .fold(f64::INFINITY, f64::min);
        if closest >= 4.0 {
            return Err(format!("plan {seed} has no close pair"));
        }
        let hm = render_oracle_heatmap(&plan, DEFAULT_SIGMA, DEFAULT_HEATMAP_NOISE, 900 + seed);
        let pix = nms_detect(&hm, NmsKernel::try_from(3).unwrap(), threshold, usize::MAX);
        let bin = bin_quantize_detect(&hm, 4, threshold);
        nms_parts.push(match_junctions(&pix, &gt, 2.0));
        bin_parts.push(match_junctions(&bin, &gt, 2.0));
    }
    let r_nms = recall_at_precision(&Matches::merge(&nms_parts), 0.9);
    let r_bin = recall_at_precision(&Matches::merge(&bin_parts), 0.9);
    check(r_bin < r_nms, format!("recall at precision >= 0.9: bin4 {r_bin:.4}, nms3 {r_nms:.4}"))
}

// ---------------------------------------------------------------- 5

fn kernel_trend() -> Outcome {
    let samples: Vec<Sample> =
        (2000..2050).map(|s| Sample::synthesize(s, &GeneratorConfig::default(), DEFAULT_HEATMAP_NOISE).unwrap()).collect();
    let mut sap = Vec::new();
    for k in [3, 5, 7] {
        let cfg = PipelineConfig { nms_kernel: k, ..Default::default() };
        let parts: Vec<Matches> = samples
            .iter()
            .map(|s| match_junctions(&detect_junctions(&s.plan, &s.heatmap, &cfg).unwrap(), &s.plan.junctions(), 2.0))
            .collect();
        sap.push(glsp_core::eval::average_precision(&Matches::merge(&parts)));
    }
    let slack = 0.005;
    check(
        sap[2] <= sap[1] + slack && sap[1] <= sap[0] + slack,
        format!("sAP_J^2: k3 {:.4}, k5 {:.4}, k7 {:.4}", sap[0], sap[1], sap[2]),
    )
}

// ---------------------------------------------------------------- 6

fn suppression_ratio() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut sum = 0.0;
    for seed in 3000..3050 {
        let s = Sample::synthesize(seed, &GeneratorConfig::default(), DEFAULT_HEATMAP_NOISE).unwrap();
        let j = detect_junctions(&s.plan, &s.heatmap, &cfg).unwrap();
        let nss = candidate_graph(&j, Suppression::Nss).len();
        let nds = candidate_graph(&j, Suppression::Nds).len();
        sum += nss as f64 / nds as f64;
    }
    let mean = sum / 50.0;
    check((2.0..=8.0).contains(&mean), format!("mean |V_NSS|/|V_NDS| = {mean:.3}"))
}

// ---------------------------------------------------------------- 7

/// AP from scratch: for every prefix of the ranking, re-match that prefix
/// alone and record precision and recall.
fn prefix_ap<P, G>(preds: &[(P, f64)], gt: &[G], cost: impl Fn(&P, &G) -> f64, theta: f64) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].1.total_cmp(&preds[a].1));
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    for n in 1..=order.len() {
        let mut used = vec![false; gt.len()];
        let mut tp = 0;
        for &i in &order[..n] {
            let mut pick: Option<usize> = None;
            for g in 0..gt.len() {
                let d = cost(&preds[i].0, &gt[g]);
                if !used[g] && d <= theta && pick.map_or(true, |p| d < cost(&preds[i].0, &gt[p])) {
                    pick = Some(g);
                }
            }
            if let Some(g) = pick {
                used[g] = true;
                tp += 1;
            }
        }
        precision.push(tp as f64 / n as f64);
        recall.push(tp as f64 / gt.len() as f64);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for n in 0..recall.len() {
        let best = precision[n..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ap += best * (recall[n] - prev);
        prev = recall[n];
    }
    ap
}

fn endpoint_cost(p: &Segment, g: &Segment) -> f64 {
    let d2 = |a: Point, b: Point| (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    let same = d2(p.a(), g.a()) + d2(p.b(), g.b());
    let swapped = d2(p.a(), g.b()) + d2(p.b(), g.a());
    same.min(swapped)
}

fn sap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    let classes = SegmentClass::MEANINGFUL;
    let coord = |rng: &mut ChaCha8Rng| rng.gen_range(0..24) as f64;
    for _ in 0..200 {
        let n_gt = rng.gen_range(0..=10);
        let n_pred = rng.gen_range(0..=14);
        let mut gt = Vec::new();
        while gt.len() < n_gt {
            if let Ok(s) = Segment::from_coords(coord(&mut rng), coord(&mut rng), coord(&mut rng), coord(&mut rng)) {
                gt.push((s, classes[rng.gen_range(0..3)]));
            }
        }
        let mut preds = PredictionSet::default();
        while preds.segments.len() < n_pred {
            let seg = if !gt.is_empty() && rng.gen_bool(0.6) {
                let (g, _): (Segment, SegmentClass) = gt[rng.gen_range(0..gt.len())];
                let j = |rng: &mut ChaCha8Rng| rng.gen_range(-3..=3) as f64;
                Segment::from_coords(g.a().x + j(&mut rng), g.a().y + j(&mut rng), g.b().x + j(&mut rng), g.b().y + j(&mut rng))
            } else {
                Segment::from_coords(coord(&mut rng), coord(&mut rng), coord(&mut rng), coord(&mut rng))
            };
            if let Ok(segment) = seg {
                let score = rng.gen::<f64>();
                preds.segments.push(glsp_core::eval::PredictedSegment { segment, class: classes[rng.gen_range(0..3)], score });
            }
        }
        let theta = [8.0, 16.0, 32.0][rng.gen_range(0..3)];
        for filter in [ClassFilter::All, ClassFilter::Class(classes[rng.gen_range(0..3)])] {
            let keep = |c: SegmentClass| match filter {
                ClassFilter::All => true,
                ClassFilter::Class(k) => c == k,
            };
            let p: Vec<(Segment, f64)> =
                preds.segments.iter().filter(|s| keep(s.class)).map(|s| (s.segment, s.score)).collect();
            let g: Vec<Segment> = gt.iter().filter(|(_, c)| keep(*c)).map(|(s, _)| *s).collect();
            let want = prefix_ap(&p, &g, endpoint_cost, theta);
            let got = sap_lines(&preds, &gt, theta, filter);
            worst = worst.max((got - want).abs());
            mismatches += usize::from(got != want);
        }
        // junctions: the endpoints of the lines above, scored independently
        let gj: Vec<Point> = gt.iter().flat_map(|(s, _)| [s.a(), s.b()]).collect();
        let pj: Vec<DetectedJunction> = preds
            .segments
            .iter()
            .flat_map(|s| [s.segment.a(), s.segment.b()])
            .take(14)
            .map(|position| DetectedJunction { position, score: rng.gen::<f32>() })
            .collect();
        let gj: Vec<Point> = gj.into_iter().take(10).collect();
        let jtheta = [2.0, 4.0, 8.0][rng.gen_range(0..3)];
        let pairs: Vec<(Point, f64)> = pj.iter().map(|j| (j.position, j.score as f64)).collect();
        let want = prefix_ap(&pairs, &gj, |a: &Point, b: &Point| (a.x - b.x).powi(2) + (a.y - b.y).powi(2), jtheta);
        let got = sap_junctions(&pj, &gj, jtheta);
        worst = worst.max((got - want).abs());
        mismatches += usize::from(got != want);
    }
    check(mismatches == 0, format!("{mismatches} of 600 AP values differ, max diff {worst:.1e}"))
}

// ---------------------------------------------------------------- 8, 9

struct TrainedRun {
    msap8: f64,
    sap_n8: f64,
    rooms: f64,
    secs: f64,
}

fn acceptance_train_config(pk: bool) -> TrainConfig {
    TrainConfig {
        pk,
        model: ModelConfig { hidden: 64, heads: 4, attn_dim: 32, value_dim: 32, edge_dim: 16, ..Default::default() },
        pipeline: PipelineConfig { junctions: JunctionMode::Oracle, suppression: Suppression::Nds, ..Default::default() },
        ..Default::default()
    }
}

fn evaluate_params(params: &ModelParams, held_out: &[(Prepared, Sample)]) -> glsp_core::eval::EvalReport {
    let items: Vec<(PredictionSet, _)> = held_out
        .iter()
        .map(|(p, s)| {
            let g = p.infer(params).unwrap();
            (PredictionSet::from_graph(&g, &p.junctions), s.plan.clone())
        })
        .collect();
    evaluate(&items, &Thresholds::default())
}

fn run_training(train_set: &[Sample], held_out: &[(Prepared, Sample)], pk: bool) -> TrainedRun {
    let cfg = acceptance_train_config(pk);
    let start = Instant::now();
    let outcome = train(train_set, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let report = evaluate_params(&outcome.params, held_out);
    TrainedRun {
        msap8: report.get("msAP", Some(8.0)).unwrap(),
        sap_n8: report.get("sAP_N", Some(8.0)).unwrap(),
        rooms: report.get("N_r", None).unwrap(),
        secs,
    }
}

fn learning_and_pk() -> (Outcome, Outcome) {
    let gen = GeneratorConfig::default();
    let train_set: Vec<Sample> = (0..200).map(|s| Sample::synthesize(s, &gen, DEFAULT_HEATMAP_NOISE).unwrap()).collect();
    let cfg = acceptance_train_config(true);
    let held_out: Vec<(Prepared, Sample)> = (1000..1050)
        .map(|s| {
            let sample = Sample::synthesize(s, &gen, DEFAULT_HEATMAP_NOISE).unwrap();
            (prepare(&sample, &cfg.pipeline).unwrap(), sample)
        })
        .collect();
    let untrained = evaluate_params(&ModelParams::init(cfg.model, cfg.seed).unwrap(), &held_out)
        .get("msAP", Some(8.0))
        .unwrap();
    let on = run_training(&train_set, &held_out, true);
    let eight = check(
        cfg.steps <= 2000 && on.msap8 >= 0.85 && on.msap8 - untrained >= 0.5 && on.secs < 600.0,
        format!("msAP^8 {:.4} (untrained {untrained:.4}), {} steps in {:.0} s", on.msap8, cfg.steps, on.secs),
    );
    let off = run_training(&train_set, &held_out, false);
    let nine = check(
        on.rooms >= off.rooms - 0.05 && on.msap8 >= off.msap8 - 0.02,
        format!(
            "N_r on {:.2} / off {:.2}; msAP^8 on {:.4} / off {:.4}; sAP_N^8 on {:.4} / off {:.4}",
            on.rooms, off.rooms, on.msap8, off.msap8, on.sap_n8, off.sap_n8
        ),
    );
    (eight, nine)
}

// ---------------------------------------------------------------- 10

/// Rooms by rasterising every meaningful segment into a 4x supersampled
/// grid and flood filling: enclosed regions larger than half a pixel are
/// rooms, and a room has a door when it borders a cell drawn only by a door.
fn flood_fill_count(segments: &[(Segment, SegmentClass)], canvas: (u32, u32)) -> RoomCount {
    const S: f64 = 4.0;
    const PAD: usize = 4;
    let (w, h) = (canvas.0 as usize * 4 + 2 * PAD + 1, canvas.1 as usize * 4 + 2 * PAD + 1);
    // bit 0: drawn by a wall or window, bit 1: drawn by a door
    let mut cell = vec![0u8; w * h];
    for (s, c) in segments {
        if !c.is_meaningful() {
            continue;
        }
        let bit = if *c == SegmentClass::Door { 2 } else { 1 };
        let steps = (s.length() * S * 20.0).ceil() as usize + 1;
        for t in 0..=steps {
            let p = s.point_at(t as f64 / steps as f64);
            let (x, y) = ((p.x * S).floor() as usize + PAD, (p.y * S).floor() as usize + PAD);
            cell[y * w + x] |= bit;
        }
    }
    let mut seen = vec![false; w * h];
    let mut count = RoomCount::default();
    for start in 0..w * h {
        if cell[start] != 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut size, mut outside, mut door) = (0usize, false, false);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                outside = true;
                continue;
            }
            for j in [i - 1, i + 1, i - w, i + w] {
                if cell[j] == 2 {
                    door = true;
                }
                if cell[j] == 0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if !outside && size > 8 {
            count.rooms += 1;
            count.rooms_with_doors += usize::from(door);
        }
    }
    count
}

fn rooms_oracle() -> Outcome {
    let mut failures = Vec::new();
    let w = SegmentClass::Wall;
    let corners = [Point::new(2.0, 2.0), Point::new(3.0, 2.0), Point::new(3.0, 3.0), Point::new(2.0, 3.0)];
    let square = |classes: [SegmentClass; 4]| -> Vec<(Segment, SegmentClass)> {
        (0..4).map(|k| (Segment::new(corners[k], corners[(k + 1) % 4]).unwrap(), classes[k])).collect()
    };
    for (name, segs, want) in [
        ("unit square", square([w; 4]), RoomCount { rooms: 1, rooms_with_doors: 0 }),
        ("unit square with door", square([w, w, SegmentClass::Door, w]), RoomCount { rooms: 1, rooms_with_doors: 1 }),
    ] {
        let got = count_rooms(&segs);
        let oracle = flood_fill_count(&segs, (6, 6));
        if got != want || oracle != want {
            failures.push(format!("{name}: {got:?} vs oracle {oracle:?}"));
        }
    }
    let mut total = RoomCount::default();
    for seed in 4000..4100 {
        let plan = generate_plan(seed, &GeneratorConfig::default()).unwrap();
        let lines = gt_lines(&plan);
        let got = count_rooms(&lines);
        let oracle = flood_fill_count(&lines, plan.canvas);
        if got != oracle {
            failures.push(format!("plan {seed}: {got:?} vs oracle {oracle:?}"));
        }
        total.rooms += got.rooms;
        total.rooms_with_doors += got.rooms_with_doors;
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("100 plans and 2 fixtures agree ({} rooms, {} with doors)", total.rooms, total.rooms_with_doors)
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 11

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let gen = GeneratorConfig::default();
    let samples: Vec<Sample> = (0..6).map(|s| Sample::synthesize(s, &gen, DEFAULT_HEATMAP_NOISE).unwrap()).collect();
    let cfg = TrainConfig {
        steps: 12,
        warmup: 2,
        pk_step: 6,
        batch_size: 3,
        seed: 17,
        model: ModelConfig { hidden: 16, heads: 2, attn_dim: 8, value_dim: 8, edge_dim: 4, layers: 2, ..Default::default() },
        ..Default::default()
    };
    let bytes = |p: &ModelParams| {
        let mut v = Vec::new();
        write_checkpoint(&mut v, p).unwrap();
        v
    };
    let a = bytes(&train(&samples, &cfg).unwrap().params);
    let b = bytes(&train(&samples, &cfg).unwrap().params);
    let mut problems = Vec::new();
    if a != b {
        problems.push("seeded checkpoints differ".to_string());
    }
    let loaded = read_checkpoint(&a[..]).unwrap();
    if bytes(&loaded) != a || read_checkpoint(&bytes(&loaded)[..]).unwrap() != loaded {
        problems.push("checkpoint round trip".to_string());
    }
    let file = dir.path().join("m.ckpt");
    glsp_core::nn::save_checkpoint(&file, &loaded).unwrap();
    if glsp_core::nn::load_checkpoint(&file).unwrap() != loaded {
        problems.push("checkpoint file round trip".to_string());
    }
    for (i, s) in samples.iter().enumerate() {
        let ann = dir.path().join(format!("{i}.json"));
        save_annotation(&s.plan, &ann).unwrap();
        if load_annotation(&ann).unwrap() != s.plan {
            problems.push(format!("annotation {i}"));
        }
        let rast = dir.path().join(format!("{i}.rast"));
        s.raster.write_to(&rast).unwrap();
        if RasterFeatureMap::read_from(&rast).unwrap() != s.raster {
            problems.push(format!("raster {i}"));
        }
        let heat = dir.path().join(format!("{i}.heat"));
        s.heatmap.write_to(&heat).unwrap();
        let back = JunctionHeatmap::read_from(&heat).unwrap();
        if back.values != s.heatmap.values || (back.width, back.height) != (s.heatmap.width, s.heatmap.height) {
            problems.push(format!("heatmap {i}"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{}-byte checkpoints identical; 6 annotations, rasters and heatmaps round-trip", a.len())
        } else {
            problems.join(", ")
        },
    )
}

/// Criteria to run: numeric arguments select a subset, otherwise all.
fn selected() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=11).collect()
    } else {
        picked
    }
}

fn main() {
    let want = selected();
    let single: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "gradient check", gradient_check),
        (2, "attention layer vs loop oracle", layer_oracle),
        (3, "NMS vs brute force", nms_equivalence),
        (4, "bin vs pixel junction recall", bin_vs_pixel),
        (5, "NMS kernel trend", kernel_trend),
        (6, "NSS/NDS node ratio", suppression_ratio),
        (7, "sAP vs prefix oracle", sap_oracle),
        (10, "room count vs flood fill", rooms_oracle),
        (11, "determinism and round trips", determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    let mut record = |n: usize, name: &str, out: &Outcome, secs: f64| {
        report(n, name, out, secs);
        ran += 1;
        failed += usize::from(out.is_err());
    };
    for &(n, name, f) in &single[..7] {
        if want.contains(&n) {
            let t = Instant::now();
            let out = f();
            record(n, name, &out, t.elapsed().as_secs_f64());
        }
    }
    if want.contains(&8) || want.contains(&9) {
        let t = Instant::now();
        let (eight, nine) = learning_and_pk();
        let secs = t.elapsed().as_secs_f64();
        record(8, "end-to-end learning", &eight, secs);
        record(9, "prior knowledge effect", &nine, secs);
    }
    for &(n, name, f) in &single[7..] {
        if want.contains(&n) {
            let t = Instant::now();
            let out = f();
            record(n, name, &out, t.elapsed().as_secs_f64());
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(n: usize, name: &str, out: &Outcome, secs: f64) {
    let (tag, detail) = match out {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} [{n:>2}] {name}: {detail} ({secs:.1} s)");
}
