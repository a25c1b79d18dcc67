//! Reverse-mode differentiation over a linear tape of dense 2-D tensors.

use std::rc::Rc;

use super::tensor::{gemm, ShapeError, Tensor, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Directed message edges `source -> target`, grouped by target.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndex {
    pub nodes: usize,
    pub junctions: usize,
    pub targets: Vec<usize>,
    pub sources: Vec<usize>,
    /// Row of the per-junction feature table carried by each edge.
    pub junction_of: Vec<usize>,
    /// Edges of target `i` are `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
}

impl EdgeIndex {
    /// Both directions of every undirected `(u, v, junction)` edge.
    pub fn from_undirected(nodes: usize, junctions: usize, edges: &[(usize, usize, usize)]) -> Self {
        let mut directed: Vec<(usize, usize, usize)> = Vec::with_capacity(2 * edges.len());
        for &(u, v, j) in edges {
            assert!(u < nodes && v < nodes && j < junctions, "edge ({u}, {v}, {j}) out of range");
            directed.push((u, v, j));
            directed.push((v, u, j));
        }
        directed.sort_unstable();
        let mut offsets = vec![0; nodes + 1];
        for &(t, _, _) in &directed {
            offsets[t + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        Self {
            nodes,
            junctions,
            targets: directed.iter().map(|e| e.0).collect(),
            sources: directed.iter().map(|e| e.1).collect(),
            junction_of: directed.iter().map(|e| e.2).collect(),
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    HeadwiseMatMul { a: Var, w: Var, heads: usize },
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Sigmoid(Var),
    Exp(Var),
    LeakyRelu(Var, f64),
    GatherRows(Var, Rc<Vec<usize>>),
    ScatterAddRows(Var, Rc<Vec<usize>>),
    NeighborSoftmax(Var, Rc<Vec<usize>>),
    ReduceSum(Var),
    Bce { p: Var, targets: Tensor, weights: Tensor, eps: f64 },
    EdgeAttention { p: Var, q: Var, r: Var, v: Var, index: Rc<EdgeIndex>, slope: f64, weights: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), ShapeError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(ShapeError::new(op, a, b))
    }
}

fn index_error(op: &'static str, t: &Tensor, needed: usize) -> ShapeError {
    ShapeError {
        op,
        left: t.shape().to_vec(),
        right: vec![needed],
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A trainable leaf; its gradient is kept after `backward`.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Every variable on the tape, in creation order.
    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.nodes.len()).map(Var)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Softmax weights stored by an `edge_attention` node, one row per
    /// directed edge.
    pub fn attention_weights(&self, v: Var) -> Option<&Tensor> {
        match &self.nodes[v.0].op {
            Op::EdgeAttention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let out = super::tensor::matmul(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    /// Per-head block product: column block `k` of `a` (width `a.cols/heads`)
    /// times row block `k` of `w`, written to column block `k` of the output.
    pub fn headwise_matmul(&mut self, a: Var, w: Var, heads: usize) -> Result<Var, ShapeError> {
        let (at, wt) = (self.value(a), self.value(w));
        if heads == 0 || at.cols() % heads != 0 || at.cols() != wt.rows() {
            return Err(ShapeError::new("headwise_matmul", at, wt));
        }
        let (n, k_in, c) = (at.rows(), at.cols() / heads, wt.cols());
        let mut out = Tensor::zeros(n, heads * c);
        for k in 0..heads {
            gemm(
                at.data(),
                View { offset: k * k_in, rows: n, cols: k_in, rs: heads * k_in, cs: 1 },
                wt.data(),
                View { offset: k * k_in * c, rows: k_in, cols: c, rs: c, cs: 1 },
                out.data_mut(),
                View { offset: k * c, rows: n, cols: c, rs: heads * c, cs: 1 },
                0.0,
            );
        }
        let ng = self.ng(&[a, w]);
        Ok(self.push(out, Op::HeadwiseMatMul { a, w, heads }, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (at, bt) = (self.value(a), self.value(b));
        same_shape("add", at, bt)?;
        let mut out = at.clone();
        out.add_assign(bt);
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// Adds the single row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (at, bt) = (self.value(a), self.value(b));
        if bt.rows() != 1 || bt.cols() != at.cols() {
            return Err(ShapeError::new("add_row", at, bt));
        }
        let mut out = at.clone();
        let cols = at.cols();
        for row in out.data_mut().chunks_mut(cols.max(1)) {
            for (x, y) in row.iter_mut().zip(bt.data()) {
                *x += y;
            }
        }
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::AddRow(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (at, bt) = (self.value(a), self.value(b));
        same_shape("mul", at, bt)?;
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(at.rows(), at.cols(), data)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let at = self.value(a);
        let data = at.data().iter().map(|x| x * s).collect();
        let out = Tensor::from_vec(at.rows(), at.cols(), data).expect("same size");
        let ng = self.ng(&[a]);
        self.push(out, Op::Scale(a, s), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        let first = self.value(parts[0]);
        for p in &parts[1..] {
            if self.value(*p).rows() != first.rows() {
                return Err(ShapeError::new("concat_cols", first, self.value(*p)));
            }
        }
        let tensors: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let out = Tensor::concat_cols(&tensors);
        let ng = self.ng(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let at = self.value(a);
        let data = at.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::from_vec(at.rows(), at.cols(), data).expect("same size");
        let ng = self.ng(&[a]);
        self.push(out, op, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.map(a, move |x| leaky(x, slope), Op::LeakyRelu(a, slope))
    }

    /// `out[k] = a[idx[k]]`.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var, ShapeError> {
        let at = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= at.rows()) {
            return Err(index_error("gather_rows", at, bad));
        }
        let out = at.select_rows(&idx);
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::GatherRows(a, idx), ng))
    }

    /// `out[idx[k]] += a[k]` into `rows` zero rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Rc<Vec<usize>>, rows: usize) -> Result<Var, ShapeError> {
        let at = self.value(a);
        if idx.len() != at.rows() {
            return Err(index_error("scatter_add_rows", at, idx.len()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(index_error("scatter_add_rows", at, bad));
        }
        let mut out = Tensor::zeros(rows, at.cols());
        for (k, &i) in idx.iter().enumerate() {
            for (o, x) in out.row_mut(i).iter_mut().zip(at.row(k)) {
                *o += x;
            }
        }
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::ScatterAddRows(a, idx), ng))
    }

    /// Column-wise softmax over the rows that share a group id.
    pub fn neighbor_softmax(&mut self, a: Var, groups: Rc<Vec<usize>>) -> Result<Var, ShapeError> {
        let at = self.value(a);
        if groups.len() != at.rows() {
            return Err(index_error("neighbor_softmax", at, groups.len()));
        }
        let ngroups = groups.iter().map(|g| g + 1).max().unwrap_or(0);
        let cols = at.cols();
        let mut mx = Tensor::filled(ngroups, cols, f64::NEG_INFINITY);
        for (k, &g) in groups.iter().enumerate() {
            for (m, x) in mx.row_mut(g).iter_mut().zip(at.row(k)) {
                *m = m.max(*x);
            }
        }
        let mut out = Tensor::zeros(at.rows(), cols);
        let mut sum = Tensor::zeros(ngroups, cols);
        for (k, &g) in groups.iter().enumerate() {
            for c in 0..cols {
                let e = (at.get(k, c) - mx.get(g, c)).exp();
                out.set(k, c, e);
                sum.set(g, c, sum.get(g, c) + e);
            }
        }
        for (k, &g) in groups.iter().enumerate() {
            for c in 0..cols {
                out.set(k, c, out.get(k, c) / sum.get(g, c));
            }
        }
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::NeighborSoftmax(a, groups), ng))
    }

    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(&[a]);
        self.push(Tensor::scalar(s), Op::ReduceSum(a), ng)
    }

    /// Mean over all entries of `weights * BCE(clamp(p), targets)`.
    pub fn bce_loss(&mut self, p: Var, targets: Tensor, weights: Tensor, eps: f64) -> Result<Var, ShapeError> {
        let pt = self.value(p);
        same_shape("bce_loss", pt, &targets)?;
        same_shape("bce_loss", pt, &weights)?;
        let n = pt.len();
        let mut total = 0.0;
        for ((&pv, &t), &w) in pt.data().iter().zip(targets.data()).zip(weights.data()) {
            let pc = pv.clamp(eps, 1.0 - eps);
            total += w * -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
        }
        let loss = if n == 0 { 0.0 } else { total / n as f64 };
        let ng = self.ng(&[p]);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { p, targets, weights, eps }, ng))
    }

    /// Channel-wise neighbour attention in one node:
    /// `logit[e] = leaky(p[target] + q[source] + r[junction], slope)`, softmax over each
    /// target's incoming edges per column, then `out[i] = sum_e w[e] * v[source]`.
    /// Targets without edges get a zero row.
    pub fn edge_attention(
        &mut self,
        p: Var,
        q: Var,
        r: Var,
        v: Var,
        index: Rc<EdgeIndex>,
        slope: f64,
    ) -> Result<Var, ShapeError> {
        let (pt, qt, rt, vt) = (self.value(p), self.value(q), self.value(r), self.value(v));
        same_shape("edge_attention", pt, qt)?;
        same_shape("edge_attention", pt, vt)?;
        if rt.cols() != pt.cols() || rt.rows() != index.junctions {
            return Err(ShapeError::new("edge_attention", pt, rt));
        }
        if pt.rows() != index.nodes {
            return Err(index_error("edge_attention", pt, index.nodes));
        }
        let h = pt.cols();
        let mut weights = Tensor::zeros(index.len(), h);
        let mut out = Tensor::zeros(index.nodes, h);
        let mut mx = vec![0.0; h];
        let mut sum = vec![0.0; h];
        for i in 0..index.nodes {
            let range = index.neighbors(i);
            if range.is_empty() {
                continue;
            }
            mx.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
            let pi = pt.row(i);
            for e in range.clone() {
                let (qs, rj) = (qt.row(index.sources[e]), rt.row(index.junction_of[e]));
                let we = weights.row_mut(e);
                for c in 0..h {
                    let l = leaky(pi[c] + qs[c] + rj[c], slope);
                    we[c] = l;
                    mx[c] = mx[c].max(l);
                }
            }
            sum.iter_mut().for_each(|s| *s = 0.0);
            for e in range.clone() {
                let we = weights.row_mut(e);
                for c in 0..h {
                    we[c] = (we[c] - mx[c]).exp();
                    sum[c] += we[c];
                }
            }
            for e in range {
                let vs = vt.row(index.sources[e]);
                let we = weights.row_mut(e);
                let oi = &mut out.data_mut()[i * h..(i + 1) * h];
                for c in 0..h {
                    we[c] /= sum[c];
                    oi[c] += we[c] * vs[c];
                }
            }
        }
        let ng = self.ng(&[p, q, r, v]);
        Ok(self.push(out, Op::EdgeAttention { p, q, r, v, index, slope, weights }, ng))
    }

    /// Reverse pass from a 1x1 root. Gradients of every node that depends on
    /// a parameter become available through [`Tape::grad`].
    pub fn backward(&mut self, root: Var) -> Result<(), ShapeError> {
        let rv = self.value(root);
        if rv.shape() != [1, 1] {
            return Err(ShapeError {
                op: "backward",
                left: rv.shape().to_vec(),
                right: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        let wants = |v: Var| nodes[v.0].needs_grad;
        fn slot<'a>(grads: &'a mut [Option<Tensor>], nodes: &[Node], v: Var) -> &'a mut Tensor {
            let shape = nodes[v.0].value.shape();
            grads[v.0].get_or_insert_with(|| Tensor::zeros(shape[0], shape[1]))
        }
        let y = &nodes[idx].value;
        match &nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (at, bt) = (val(*a), val(*b));
                let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                if wants(*a) {
                    let ga = slot(grads, nodes, *a);
                    gemm(g.data(), View::dense(m, n), bt.data(), View::dense(k, n).transposed(), ga.data_mut(), View::dense(m, k), 1.0);
                }
                if wants(*b) {
                    let gb = slot(grads, nodes, *b);
                    gemm(at.data(), View::dense(m, k).transposed(), g.data(), View::dense(m, n), gb.data_mut(), View::dense(k, n), 1.0);
                }
            }
            Op::HeadwiseMatMul { a, w, heads } => {
                let (at, wt) = (val(*a), val(*w));
                let heads = *heads;
                let (n, k_in, c) = (at.rows(), at.cols() / heads, wt.cols());
                for k in 0..heads {
                    let av = View { offset: k * k_in, rows: n, cols: k_in, rs: heads * k_in, cs: 1 };
                    let wv = View { offset: k * k_in * c, rows: k_in, cols: c, rs: c, cs: 1 };
                    let gv = View { offset: k * c, rows: n, cols: c, rs: heads * c, cs: 1 };
                    if wants(*a) {
                        let ga = slot(grads, nodes, *a);
                        gemm(g.data(), gv, wt.data(), wv.transposed(), ga.data_mut(), av, 1.0);
                    }
                    if wants(*w) {
                        let gw = slot(grads, nodes, *w);
                        gemm(at.data(), av.transposed(), g.data(), gv, gw.data_mut(), wv, 1.0);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        slot(grads, nodes, v).add_assign(g);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if wants(*a) {
                    slot(grads, nodes, *a).add_assign(g);
                }
                if wants(*b) {
                    let gb = slot(grads, nodes, *b);
                    let cols = g.cols();
                    for row in g.data().chunks(cols.max(1)) {
                        for (s, x) in gb.data_mut().iter_mut().zip(row) {
                            *s += x;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                for (v, other) in [(*a, *b), (*b, *a)] {
                    if wants(v) {
                        let o = val(other);
                        let gv = slot(grads, nodes, v);
                        for ((s, gi), oi) in gv.data_mut().iter_mut().zip(g.data()).zip(o.data()) {
                            *s += gi * oi;
                        }
                    }
                }
            }
            Op::Scale(a, s) => {
                if wants(*a) {
                    for (t, gi) in slot(grads, nodes, *a).data_mut().iter_mut().zip(g.data()) {
                        *t += gi * s;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let cols = g.cols();
                let mut c0 = 0;
                for p in parts {
                    let w = val(*p).cols();
                    if wants(*p) {
                        let gp = slot(grads, nodes, *p);
                        for r in 0..g.rows() {
                            for (t, gi) in gp.row_mut(r).iter_mut().zip(&g.data()[r * cols + c0..r * cols + c0 + w]) {
                                *t += gi;
                            }
                        }
                    }
                    c0 += w;
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    let ga = slot(grads, nodes, *a);
                    for ((t, gi), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *t += gi * yi * (1.0 - yi);
                    }
                }
            }
            Op::Exp(a) => {
                if wants(*a) {
                    let ga = slot(grads, nodes, *a);
                    for ((t, gi), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *t += gi * yi;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                if wants(*a) {
                    let x = val(*a);
                    let ga = slot(grads, nodes, *a);
                    for ((t, gi), xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        *t += if *xi > 0.0 { *gi } else { gi * slope };
                    }
                }
            }
            Op::GatherRows(a, idx_rows) => {
                if wants(*a) {
                    let ga = slot(grads, nodes, *a);
                    for (k, &i) in idx_rows.iter().enumerate() {
                        for (t, gi) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *t += gi;
                        }
                    }
                }
            }
            Op::ScatterAddRows(a, idx_rows) => {
                if wants(*a) {
                    let ga = slot(grads, nodes, *a);
                    for (k, &i) in idx_rows.iter().enumerate() {
                        for (t, gi) in ga.row_mut(k).iter_mut().zip(g.row(i)) {
                            *t += gi;
                        }
                    }
                }
            }
            Op::NeighborSoftmax(a, groups) => {
                if wants(*a) {
                    let ngroups = groups.iter().map(|x| x + 1).max().unwrap_or(0);
                    let cols = y.cols();
                    let mut dot = Tensor::zeros(ngroups, cols);
                    for (k, &grp) in groups.iter().enumerate() {
                        for c in 0..cols {
                            dot.set(grp, c, dot.get(grp, c) + y.get(k, c) * g.get(k, c));
                        }
                    }
                    let ga = slot(grads, nodes, *a);
                    for (k, &grp) in groups.iter().enumerate() {
                        for c in 0..cols {
                            let d = y.get(k, c) * (g.get(k, c) - dot.get(grp, c));
                            ga.set(k, c, ga.get(k, c) + d);
                        }
                    }
                }
            }
            Op::ReduceSum(a) => {
                if wants(*a) {
                    let s = g.item();
                    for t in slot(grads, nodes, *a).data_mut() {
                        *t += s;
                    }
                }
            }
            Op::Bce { p, targets, weights, eps } => {
                if wants(*p) {
                    let pt = val(*p);
                    let n = pt.len().max(1) as f64;
                    let s = g.item() / n;
                    let gp = slot(grads, nodes, *p);
                    for (((t, &pv), &tv), &w) in gp.data_mut().iter_mut().zip(pt.data()).zip(targets.data()).zip(weights.data()) {
                        let pc = pv.clamp(*eps, 1.0 - eps);
                        *t += s * w * (-tv / pc + (1.0 - tv) / (1.0 - pc));
                    }
                }
            }
            Op::EdgeAttention { p, q, r, v, index, slope, weights } => {
                let (pt, qt, rt, vt) = (val(*p), val(*q), val(*r), val(*v));
                let h = g.cols();
                let mut gp = wants(*p).then(|| Tensor::zeros(index.nodes, h));
                let mut gq = wants(*q).then(|| Tensor::zeros(index.nodes, h));
                let mut gr = wants(*r).then(|| Tensor::zeros(index.junctions, h));
                let mut gv = wants(*v).then(|| Tensor::zeros(index.nodes, h));
                let need_logits = gp.is_some() || gq.is_some() || gr.is_some();
                let mut dot = vec![0.0; h];
                let mut dl = vec![0.0; h];
                for i in 0..index.nodes {
                    let range = index.neighbors(i);
                    let gi = g.row(i);
                    if need_logits {
                        dot.iter_mut().for_each(|d| *d = 0.0);
                        for e in range.clone() {
                            let (we, vs) = (weights.row(e), vt.row(index.sources[e]));
                            for c in 0..h {
                                dot[c] += we[c] * gi[c] * vs[c];
                            }
                        }
                    }
                    for e in range {
                        let s = index.sources[e];
                        let j = index.junction_of[e];
                        let we = weights.row(e);
                        if let Some(gv) = gv.as_mut() {
                            for (t, c) in gv.row_mut(s).iter_mut().zip(0..h) {
                                *t += we[c] * gi[c];
                            }
                        }
                        if need_logits {
                            let vs = vt.row(s);
                            let (pi, qs, rj) = (pt.row(i), qt.row(s), rt.row(j));
                            for c in 0..h {
                                let d = we[c] * (gi[c] * vs[c] - dot[c]);
                                dl[c] = if pi[c] + qs[c] + rj[c] > 0.0 { d } else { d * slope };
                            }
                            if let Some(gp) = gp.as_mut() {
                                for (t, d) in gp.row_mut(i).iter_mut().zip(&dl) {
                                    *t += d;
                                }
                            }
                            if let Some(gq) = gq.as_mut() {
                                for (t, d) in gq.row_mut(s).iter_mut().zip(&dl) {
                                    *t += d;
                                }
                            }
                            if let Some(gr) = gr.as_mut() {
                                for (t, d) in gr.row_mut(j).iter_mut().zip(&dl) {
                                    *t += d;
                                }
                            }
                        }
                    }
                }
                for (var, gt) in [(*p, gp), (*q, gq), (*r, gr), (*v, gv)] {
                    if let Some(gt) = gt {
                        slot(grads, nodes, var).add_assign(&gt);
                    }
                }
            }
        }
    }
}

#[inline]
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x * slope
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
