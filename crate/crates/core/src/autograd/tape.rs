//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar node walks the record in reverse and returns
//! the gradient of every parameter leaf that took part in the computation.
//! Tapes are single-use: build one per example.

use super::tensor::Tensor;
use super::ParamStore;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    AddCol(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    SparseRows(Var, Vec<Vec<(usize, f64)>>),
    Blend(Var, Var, Vec<bool>),
    Reshape(Var),
    MaskedSoftmax(Var),
    GroupWeightedSum(Var, Var),
    Im2Col(Var, usize),
    MaxRows(Var, Vec<Option<usize>>),
    MeanRows(Var, Vec<bool>),
    SumAll(Var),
    CrossEntropy(Var, usize, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients for every parameter in a [`ParamStore`], indexed like the store.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: usize) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }
}

pub struct Tape<'p> {
    nodes: Vec<Node>,
    params: &'p ParamStore,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            nodes: Vec::with_capacity(1024),
            params,
            param_vars: vec![None; params.len()],
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, id: usize) -> Var {
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        let value = self.params.value(id).clone();
        let v = self.push(value, Op::Param(id));
        self.param_vars[id] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul_t(self.value(b));
        self.push(out, Op::MatMulT(a, b))
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "elementwise shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| f(*x, *y)).collect();
        Tensor::from_vec(ta.rows, ta.cols, data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(out, Op::Mul(a, b))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!((1, ta.cols), tb.shape(), "add_row expects a 1 x cols bias");
        let mut out = ta.clone();
        for r in 0..out.rows {
            for (o, x) in out.row_mut(r).iter_mut().zip(&tb.data) {
                *o += x;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    /// Adds the `r × 1` column `b` to every column of `a`.
    pub fn add_col(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!((ta.rows, 1), tb.shape(), "add_col expects a rows x 1 column");
        let mut out = ta.clone();
        for r in 0..out.rows {
            let x = tb.data[r];
            for o in out.row_mut(r) {
                *o += x;
            }
        }
        self.push(out, Op::AddCol(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale(s);
        self.push(out, Op::Scale(a, s))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::from_vec(t.rows, t.cols, t.data.iter().map(|x| f(*x)).collect())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.map(a, sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        assert!(start + len <= t.cols, "slice_cols out of range");
        let mut out = Tensor::zeros(t.rows, len);
        for r in 0..t.rows {
            out.row_mut(r).copy_from_slice(&t.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let t = self.value(*p);
            assert_eq!(t.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.row_mut(r)[offset..offset + t.cols].copy_from_slice(t.row(r));
            }
            offset += t.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            assert_eq!(t.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&t.data);
            rows += t.rows;
        }
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Output row `i` is row `idx[i]` of `a`.
    pub fn select_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let t = self.value(a);
        let mut out = Tensor::zeros(idx.len(), t.cols);
        for (i, &src) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(src));
        }
        self.push(out, Op::SelectRows(a, idx))
    }

    /// Output row `i` is `Σ w · table[j]` over the `(j, w)` entries of row `i`;
    /// rows with no entries are zero.
    pub fn sparse_rows(&mut self, table: Var, entries: Vec<Vec<(usize, f64)>>) -> Var {
        let t = self.value(table);
        let mut out = Tensor::zeros(entries.len(), t.cols);
        for (i, row) in entries.iter().enumerate() {
            let dst = out.row_mut(i);
            for &(j, w) in row {
                for (o, x) in dst.iter_mut().zip(t.row(j)) {
                    *o += w * x;
                }
            }
        }
        self.push(out, Op::SparseRows(table, entries))
    }

    /// Row `r` is taken from `new` where `mask[r]`, otherwise from `prev`.
    pub fn blend(&mut self, new: Var, prev: Var, mask: Vec<bool>) -> Var {
        let (tn, tp) = (self.value(new), self.value(prev));
        assert_eq!(tn.shape(), tp.shape());
        assert_eq!(mask.len(), tn.rows);
        let mut out = tp.clone();
        for (r, &m) in mask.iter().enumerate() {
            if m {
                out.row_mut(r).copy_from_slice(tn.row(r));
            }
        }
        self.push(out, Op::Blend(new, prev, mask))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let t = self.value(a);
        assert_eq!(t.len(), rows * cols, "reshape size mismatch");
        let out = Tensor::from_vec(rows, cols, t.data.clone());
        self.push(out, Op::Reshape(a))
    }

    /// Row-wise softmax restricted to positions where `mask` (row-major, one
    /// flag per element) is set. Rows with no unmasked position are zero.
    pub fn masked_softmax(&mut self, a: Var, mask: Vec<bool>) -> Var {
        let t = self.value(a);
        assert_eq!(mask.len(), t.len());
        let mut out = Tensor::zeros(t.rows, t.cols);
        for r in 0..t.rows {
            let m = &mask[r * t.cols..(r + 1) * t.cols];
            let row = t.row(r);
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(x, _)| *x)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let dst = out.row_mut(r);
            let mut total = 0.0;
            for ((o, x), &keep) in dst.iter_mut().zip(row).zip(m) {
                if keep {
                    *o = (x - max).exp();
                    total += *o;
                }
            }
            for o in dst.iter_mut() {
                *o /= total;
            }
        }
        self.push(out, Op::MaskedSoftmax(a))
    }

    /// `weights: G × T`, `values: (G·T) × D` → `G × D`, where output row `g` is
    /// `Σ_t weights[g, t] · values[g·T + t]`.
    pub fn group_weighted_sum(&mut self, weights: Var, values: Var) -> Var {
        let (w, h) = (self.value(weights), self.value(values));
        let (groups, inner) = w.shape();
        assert_eq!(h.rows, groups * inner, "group_weighted_sum row mismatch");
        let mut out = Tensor::zeros(groups, h.cols);
        for g in 0..groups {
            for t in 0..inner {
                let a = w.get(g, t);
                if a == 0.0 {
                    continue;
                }
                let src = h.row(g * inner + t);
                for (o, x) in out.row_mut(g).iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        }
        self.push(out, Op::GroupWeightedSum(weights, values))
    }

    /// Unfolds `a: T × C` into `T × (k·C)` windows with same-padding; window
    /// `t` covers rows `t - (k-1)/2 ..` and out-of-range rows read as zero.
    pub fn im2col(&mut self, a: Var, k: usize) -> Var {
        let t = self.value(a);
        let (rows, cols) = t.shape();
        let left = (k - 1) / 2;
        let mut out = Tensor::zeros(rows, k * cols);
        for r in 0..rows {
            for j in 0..k {
                let src = r as isize + j as isize - left as isize;
                if src < 0 || src >= rows as isize {
                    continue;
                }
                out.row_mut(r)[j * cols..(j + 1) * cols].copy_from_slice(t.row(src as usize));
            }
        }
        self.push(out, Op::Im2Col(a, k))
    }

    /// Column-wise max over rows where `mask` is set; `1 × C`. With no
    /// unmasked row the result is zero.
    pub fn max_rows(&mut self, a: Var, mask: &[bool]) -> Var {
        let t = self.value(a);
        assert_eq!(mask.len(), t.rows);
        let mut out = Tensor::zeros(1, t.cols);
        let mut arg = vec![None; t.cols];
        for (c, slot) in arg.iter_mut().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (r, &keep) in mask.iter().enumerate() {
                if !keep {
                    continue;
                }
                let x = t.get(r, c);
                if best.is_none_or(|(_, b)| x > b) {
                    best = Some((r, x));
                }
            }
            if let Some((r, x)) = best {
                out.data[c] = x;
                *slot = Some(r);
            }
        }
        self.push(out, Op::MaxRows(a, arg))
    }

    /// Column-wise mean over rows where `mask` is set; `1 × C`.
    pub fn mean_rows(&mut self, a: Var, mask: Vec<bool>) -> Var {
        let t = self.value(a);
        assert_eq!(mask.len(), t.rows);
        let n = mask.iter().filter(|m| **m).count();
        let mut out = Tensor::zeros(1, t.cols);
        if n > 0 {
            for (r, &keep) in mask.iter().enumerate() {
                if keep {
                    for (o, x) in out.data.iter_mut().zip(t.row(r)) {
                        *o += x;
                    }
                }
            }
            out.scale(1.0 / n as f64);
        }
        self.push(out, Op::MeanRows(a, mask))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    /// Softmax cross-entropy of the `1 × n` score row against `target`.
    pub fn cross_entropy(&mut self, scores: Var, target: usize) -> Var {
        let t = self.value(scores);
        assert_eq!(t.rows, 1);
        let probs = softmax(&t.data);
        let loss = -probs[target].ln();
        self.push(Tensor::scalar(loss), Op::CrossEntropy(scores, target, probs))
    }

    /// Reverse pass from scalar `root`, seeding with `d root = 1`.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[root.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients {
            grads: vec![None; self.params.len()],
        };

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.grads[*id] = Some(g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    let mut gb = g.clone();
                    gb.scale(-1.0);
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = hadamard(&g, self.value(*b));
                    let gb = hadamard(&g, self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, x) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::AddCol(a, b) => {
                    let gb = Tensor::column((0..g.rows).map(|r| g.row(r).iter().sum()).collect());
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => {
                    let mut ga = g;
                    ga.scale(*s);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let data = g.data.iter().zip(&y.data).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *a, Tensor::from_vec(g.rows, g.cols, data));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let data = g.data.iter().zip(&y.data).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut grads, *a, Tensor::from_vec(g.rows, g.cols, data));
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let data = g
                        .data
                        .iter()
                        .zip(&x.data)
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, Tensor::from_vec(g.rows, g.cols, data));
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut ga = Tensor::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        ga.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let cols = self.value(*p).cols;
                        let mut gp = Tensor::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut grads, *p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (rows, cols) = self.value(*p).shape();
                        let gp = Tensor::from_vec(
                            rows,
                            cols,
                            g.data[offset * cols..(offset + rows) * cols].to_vec(),
                        );
                        offset += rows;
                        accumulate(&mut grads, *p, gp);
                    }
                }
                Op::SelectRows(a, idx) => {
                    let src = self.value(*a);
                    let mut ga = Tensor::zeros(src.rows, src.cols);
                    for (i, &s) in idx.iter().enumerate() {
                        for (o, x) in ga.row_mut(s).iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SparseRows(table, entries) => {
                    let src = self.value(*table);
                    let mut gt = Tensor::zeros(src.rows, src.cols);
                    for (i, row) in entries.iter().enumerate() {
                        for &(j, w) in row {
                            for (o, x) in gt.row_mut(j).iter_mut().zip(g.row(i)) {
                                *o += w * x;
                            }
                        }
                    }
                    accumulate(&mut grads, *table, gt);
                }
                Op::Blend(new, prev, mask) => {
                    let mut gn = Tensor::zeros(g.rows, g.cols);
                    let mut gp = Tensor::zeros(g.rows, g.cols);
                    for (r, &m) in mask.iter().enumerate() {
                        let dst = if m { &mut gn } else { &mut gp };
                        dst.row_mut(r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *new, gn);
                    accumulate(&mut grads, *prev, gp);
                }
                Op::Reshape(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Tensor::from_vec(rows, cols, g.data));
                }
                Op::MaskedSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for ((o, y), g) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = y * (g - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GroupWeightedSum(weights, values) => {
                    let (w, h) = (self.value(*weights), self.value(*values));
                    let (groups, inner) = w.shape();
                    let mut gw = Tensor::zeros(groups, inner);
                    let mut gh = Tensor::zeros(h.rows, h.cols);
                    for gi in 0..groups {
                        let grow = g.row(gi);
                        for t in 0..inner {
                            let r = gi * inner + t;
                            gw.set(gi, t, grow.iter().zip(h.row(r)).map(|(a, b)| a * b).sum());
                            let a = w.get(gi, t);
                            if a != 0.0 {
                                for (o, x) in gh.row_mut(r).iter_mut().zip(grow) {
                                    *o += a * x;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *weights, gw);
                    accumulate(&mut grads, *values, gh);
                }
                Op::Im2Col(a, k) => {
                    let (rows, cols) = self.value(*a).shape();
                    let left = (k - 1) / 2;
                    let mut ga = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for j in 0..*k {
                            let src = r as isize + j as isize - left as isize;
                            if src < 0 || src >= rows as isize {
                                continue;
                            }
                            let gsrc = &g.row(r)[j * cols..(j + 1) * cols];
                            for (o, x) in ga.row_mut(src as usize).iter_mut().zip(gsrc) {
                                *o += x;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::MaxRows(a, arg) => {
                    let (rows, cols) = self.value(*a).shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    for (c, r) in arg.iter().enumerate() {
                        if let Some(r) = r {
                            ga.set(*r, c, g.data[c]);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::MeanRows(a, mask) => {
                    let (rows, cols) = self.value(*a).shape();
                    let n = mask.iter().filter(|m| **m).count();
                    let mut ga = Tensor::zeros(rows, cols);
                    if n > 0 {
                        for (r, &keep) in mask.iter().enumerate() {
                            if keep {
                                for (o, x) in ga.row_mut(r).iter_mut().zip(&g.data) {
                                    *o = x / n as f64;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    let s = g.data[0];
                    accumulate(&mut grads, *a, Tensor::from_vec(rows, cols, vec![s; rows * cols]));
                }
                Op::CrossEntropy(scores, target, probs) => {
                    let s = g.data[0];
                    let mut data: Vec<f64> = probs.iter().map(|p| p * s).collect();
                    data[*target] -= s;
                    accumulate(&mut grads, *scores, Tensor::row_vector(data));
                }
            }
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Tensor::from_vec(a.rows, a.cols, data)
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

/// Numerically stable softmax of a slice.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::ParamStore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central-difference check of every parameter element for a scalar graph.
    fn check(store: &mut ParamStore, build: impl Fn(&mut Tape) -> Var) {
        let tape_grads = {
            let mut tape = Tape::new(store);
            let root = build(&mut tape);
            tape.backward(root)
        };
        let eps = 1e-6;
        for id in 0..store.len() {
            let n = store.value(id).len();
            for e in 0..n {
                let orig = store.value(id).data[e];
                store.value_mut(id).data[e] = orig + eps;
                let plus = {
                    let mut t = Tape::new(store);
                    let r = build(&mut t);
                    t.value(r).to_scalar()
                };
                store.value_mut(id).data[e] = orig - eps;
                let minus = {
                    let mut t = Tape::new(store);
                    let r = build(&mut t);
                    t.value(r).to_scalar()
                };
                store.value_mut(id).data[e] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = tape_grads.get(id).map_or(0.0, |g| g.data[e]);
                assert!(
                    (numeric - analytic).abs() <= 1e-6 * (1.0 + numeric.abs()),
                    "param {} elem {}: numeric {} analytic {}",
                    store.name(id),
                    e,
                    numeric,
                    analytic
                );
            }
        }
    }

    fn random_store(shapes: &[(&str, usize, usize)], seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        for (name, r, c) in shapes {
            store.add_normal(name, *r, *c, 0.8, &mut rng);
        }
        store
    }

    #[test]
    fn elementwise_and_matmul_ops_have_correct_gradients() {
        let mut store = random_store(&[("a", 3, 4), ("b", 4, 2), ("c", 3, 2), ("bias", 1, 2)], 1);
        check(&mut store, |t| {
            let a = t.param(0);
            let b = t.param(1);
            let c = t.param(2);
            let bias = t.param(3);
            let ab = t.matmul(a, b);
            let ab = t.add_row(ab, bias);
            let s = t.sigmoid(ab);
            let th = t.tanh(c);
            let m = t.mul(s, th);
            let d = t.sub(m, c);
            let r = t.relu(d);
            let e = t.add(r, s);
            let f = t.scale(e, 0.7);
            let abt = t.matmul_t(f, c);
            t.sum_all(abt)
        });
    }

    #[test]
    fn structural_ops_have_correct_gradients() {
        let mut store = random_store(&[("x", 6, 3), ("table", 5, 3), ("col", 6, 1)], 2);
        check(&mut store, |t| {
            let x = t.param(0);
            let table = t.param(1);
            let col = t.param(2);
            let gathered = t.sparse_rows(table, vec![vec![(0, 1.0)], vec![], vec![(1, 0.5), (4, 0.5)], vec![(2, 1.0)], vec![(3, 2.0)], vec![(0, 1.0), (0, 1.0)]]);
            let cat = t.concat_cols(&[x, gathered]);
            let sl = t.slice_cols(cat, 2, 3);
            let sel = t.select_rows(sl, vec![5, 0, 0, 3, 2, 1]);
            let rows = t.concat_rows(&[sel, x]);
            let rows = t.slice_cols(rows, 0, 3);
            let top = t.select_rows(rows, vec![0, 1, 2, 3, 4, 5]);
            let bl = t.blend(top, x, vec![true, false, true, true, false, true]);
            let bl = t.add_col(bl, col);
            let win = t.im2col(bl, 3);
            let win2 = t.im2col(bl, 2);
            let m = t.max_rows(win, &[true, true, false, true, true, true]);
            let mean = t.mean_rows(win2, vec![true, false, true, true, true, true]);
            let a = t.sum_all(m);
            let b = t.sum_all(mean);
            let s = t.mul(a, b);
            t.add(s, a)
        });
    }

    #[test]
    fn attention_ops_have_correct_gradients() {
        let mut store = random_store(&[("h", 6, 3), ("q", 1, 3), ("scores", 1, 5)], 3);
        check(&mut store, |t| {
            let h = t.param(0);
            let q = t.param(1);
            let logits = t.matmul_t(h, q);
            let grid = t.reshape(logits, 2, 3);
            let w = t.masked_softmax(grid, vec![true, true, false, true, true, true]);
            let e = t.group_weighted_sum(w, h);
            let sim = t.matmul_t(e, h);
            let mut mask = vec![true; 12];
            mask[3] = false;
            let a = t.masked_softmax(sim, mask);
            let c = t.matmul(a, h);
            let s = t.sum_all(c);
            let sc = t.param(2);
            let ce = t.cross_entropy(sc, 2);
            t.add(s, ce)
        });
    }

    #[test]
    fn fully_masked_softmax_row_is_zero() {
        let store = ParamStore::default();
        let mut t = Tape::new(&store);
        let x = t.constant(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let y = t.masked_softmax(x, vec![false, false, true, true]);
        let v = t.value(y);
        assert_eq!(v.row(0), &[0.0, 0.0]);
        assert!((v.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
