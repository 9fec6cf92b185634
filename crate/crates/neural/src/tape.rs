//! Reverse-mode differentiation over a recorded list of matrix operations.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and backward walks it once in reverse.

use crate::error::{NeuralError, Result};
use crate::params::{Grads, ParamId, ParamSet};
use crate::tensor::{gemm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: Var, ta: bool, b: Var, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { a: Var, row: Var },
    Scale(Var, f64),
    AddScalar(Var),
    Gelu(Var),
    Exp(Var),
    Clamp { a: Var, lo: f64, hi: f64 },
    Min(Var, Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Mat, inv_std: Vec<f64> },
    Softmax(Var),
    LogSoftmax(Var),
    Gather { table: Var, ids: Vec<usize> },
    SliceRows { a: Var, start: usize },
    SliceCols { a: Var, start: usize },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Pick { a: Var, cols: Vec<usize> },
    Sum(Var),
    MeanRows(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the borrowed set.
    value: Option<Mat>,
    requires_grad: bool,
}

/// One forward pass. Backward may run once; a second call returns
/// [`NeuralError::TapeConsumed`].
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, op: Op, value: Mat, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.nodes.push(Node {
            op: Op::Constant,
            value: Some(m),
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Mat::scalar(x))
    }

    /// `op(a) · op(b)` with optional transposes.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let value = Mat::matmul(self.value(a), ta, self.value(b), tb);
        self.push(Op::MatMul { a, ta, b, tb }, value, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Mat {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| f(*p, *q)).collect();
        Mat::from_vec(x.rows, x.cols, data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Mat {
        let x = self.value(a);
        Mat::from_vec(x.rows, x.cols, x.data.iter().map(|p| f(*p)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_with(a, b, |p, q| p + q);
        self.push(Op::Add(a, b), value, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_with(a, b, |p, q| p - q);
        self.push(Op::Sub(a, b), value, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_with(a, b, |p, q| p * q);
        self.push(Op::Mul(a, b), value, &[a, b])
    }

    /// Adds the 1×n `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!((r.rows, r.cols), (1, x.cols), "add_row shape mismatch");
        let mut value = x.clone();
        for i in 0..value.rows {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r.data) {
                *v += b;
            }
        }
        self.push(Op::AddRow { a, row }, value, &[a, row])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.map(a, |p| p * c);
        self.push(Op::Scale(a, c), value, &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.map(a, |p| p + c);
        self.push(Op::AddScalar(a), value, &[a])
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.map(a, |x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()));
        self.push(Op::Gelu(a), value, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.map(a, f64::exp);
        self.push(Op::Exp(a), value, &[a])
    }

    /// Gradient passes only strictly inside `(lo, hi)`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.map(a, |x| x.clamp(lo, hi));
        self.push(Op::Clamp { a, lo, hi }, value, &[a])
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_with(a, b, f64::min);
        self.push(Op::Min(a, b), value, &[a, b])
    }

    /// Row-wise normalization with 1×n `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        assert_eq!((g.rows, g.cols), (1, xv.cols));
        assert_eq!((b.rows, b.cols), (1, xv.cols));
        let n = xv.cols as f64;
        let mut xhat = Mat::zeros(xv.rows, xv.cols);
        let mut value = Mat::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..xv.cols {
                let h = (row[c] - mean) * is;
                xhat.data[r * xv.cols + c] = h;
                value.data[r * xv.cols + c] = h * g.data[c] + b.data[c];
            }
        }
        self.push(
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            value,
            &[x, gain, bias],
        )
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..value.rows {
            softmax_in_place(value.row_mut(r));
        }
        self.push(Op::Softmax(a), value, &[a])
    }

    /// Row-wise softmax where row `i` sees only columns `0..=i + offset`;
    /// masked entries are exactly zero.
    pub fn causal_softmax(&mut self, a: Var, offset: usize) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..value.rows {
            let visible = (r + offset + 1).min(value.cols);
            let row = value.row_mut(r);
            softmax_in_place(&mut row[..visible]);
            for v in &mut row[visible..] {
                *v = 0.0;
            }
        }
        self.push(Op::Softmax(a), value, &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..value.rows {
            let row = value.row_mut(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(Op::LogSoftmax(a), value, &[a])
    }

    /// Rows `ids` of `table`, in order.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut value = Mat::zeros(ids.len(), t.cols);
        for (r, &i) in ids.iter().enumerate() {
            value.row_mut(r).copy_from_slice(t.row(i));
        }
        self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            value,
            &[table],
        )
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.rows, "row slice out of range");
        let value = Mat::from_vec(len, x.cols, x.data[start * x.cols..(start + len) * x.cols].to_vec());
        self.push(Op::SliceRows { a, start }, value, &[a])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols, "column slice out of range");
        let mut value = Mat::zeros(x.rows, len);
        for r in 0..x.rows {
            value.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        self.push(Op::SliceCols { a, start }, value, &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        self.push(Op::ConcatRows(parts.to_vec()), Mat::from_vec(rows, cols, data), parts)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut value = Mat::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                value.row_mut(r)[at..at + m.cols].copy_from_slice(m.row(r));
            }
            at += m.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), value, parts)
    }

    /// Column vector whose entry `i` is `a[i, cols[i]]`.
    pub fn pick(&mut self, a: Var, cols: &[usize]) -> Var {
        let x = self.value(a);
        assert_eq!(cols.len(), x.rows, "one column per row");
        let data = cols.iter().enumerate().map(|(r, &c)| x.at(r, c)).collect();
        self.push(
            Op::Pick {
                a,
                cols: cols.to_vec(),
            },
            Mat::from_vec(x.rows, 1, data),
            &[a],
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Mat::scalar(self.value(a).data.iter().sum());
        self.push(Op::Sum(a), value, &[a])
    }

    /// 1×n mean over rows.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = Mat::zeros(1, x.cols);
        for r in 0..x.rows {
            for (v, p) in value.data.iter_mut().zip(x.row(r)) {
                *v += p;
            }
        }
        value.scale_in_place(1.0 / x.rows as f64);
        self.push(Op::MeanRows(a), value, &[a])
    }

    /// Sum of scalar nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Var {
        assert!(!terms.is_empty());
        let mut acc = terms[0];
        for t in &terms[1..] {
            acc = self.add(acc, *t);
        }
        acc
    }

    /// Gradients of the 1×1 node `loss` with respect to every parameter.
    pub fn backward(&mut self, loss: Var) -> Result<Grads> {
        if self.consumed {
            return Err(NeuralError::TapeConsumed);
        }
        self.consumed = true;
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NeuralError::Shape(format!(
                "loss must be 1x1, got {}x{}",
                lv.rows, lv.cols
            )));
        }
        if !lv.item().is_finite() {
            return Err(NeuralError::NonFiniteLoss(lv.item()));
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));
        let mut out = Grads::for_params(self.params);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i, &g, &mut grads, &mut out);
        }
        out.check_finite(self.params)?;
        Ok(out)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop_node(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>], out: &mut Grads) {
        let node = &self.nodes[i];
        let y = node.value.as_ref();
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => out.accumulate(*id, g, 1.0),
            Op::MatMul { a, ta, b, tb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let da = acc_slot(grads, *a, av.rows, av.cols);
                    if *ta {
                        gemm(1.0, bv, *tb, g, true, 1.0, da);
                    } else {
                        gemm(1.0, g, false, bv, !*tb, 1.0, da);
                    }
                }
                if self.needs(*b) {
                    let db = acc_slot(grads, *b, bv.rows, bv.cols);
                    if *tb {
                        gemm(1.0, g, true, av, *ta, 1.0, db);
                    } else {
                        gemm(1.0, av, !*ta, g, false, 1.0, db);
                    }
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g, 1.0);
                self.acc(grads, *b, g, 1.0);
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g, 1.0);
                self.acc(grads, *b, g, -1.0);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    self.acc_owned(grads, *a, elementwise(g, bv, |p, q| p * q));
                }
                if self.needs(*b) {
                    self.acc_owned(grads, *b, elementwise(g, av, |p, q| p * q));
                }
            }
            Op::AddRow { a, row } => {
                self.acc(grads, *a, g, 1.0);
                if self.needs(*row) {
                    let mut s = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (v, p) in s.data.iter_mut().zip(g.row(r)) {
                            *v += p;
                        }
                    }
                    self.acc_owned(grads, *row, s);
                }
            }
            Op::Scale(a, c) => self.acc(grads, *a, g, *c),
            Op::AddScalar(a) => self.acc(grads, *a, g, 1.0),
            Op::Gelu(a) => {
                let d = elementwise(g, self.value(*a), |gy, x| {
                    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
                    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                    gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                });
                self.acc_owned(grads, *a, d);
            }
            Op::Exp(a) => {
                let d = elementwise(g, y.unwrap(), |gy, v| gy * v);
                self.acc_owned(grads, *a, d);
            }
            Op::Clamp { a, lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                let d = elementwise(g, self.value(*a), |gy, x| if x > lo && x < hi { gy } else { 0.0 });
                self.acc_owned(grads, *a, d);
            }
            Op::Min(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let to_a = elementwise(av, bv, |p, q| if p <= q { 1.0 } else { 0.0 });
                if self.needs(*a) {
                    self.acc_owned(grads, *a, elementwise(g, &to_a, |gy, m| gy * m));
                }
                if self.needs(*b) {
                    self.acc_owned(grads, *b, elementwise(g, &to_a, |gy, m| gy * (1.0 - m)));
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain);
                let n = xhat.cols;
                if self.needs(*gain) || self.needs(*bias) {
                    let mut dg = Mat::zeros(1, n);
                    let mut db = Mat::zeros(1, n);
                    for r in 0..g.rows {
                        for c in 0..n {
                            let gy = g.at(r, c);
                            dg.data[c] += gy * xhat.at(r, c);
                            db.data[c] += gy;
                        }
                    }
                    if self.needs(*gain) {
                        self.acc_owned(grads, *gain, dg);
                    }
                    if self.needs(*bias) {
                        self.acc_owned(grads, *bias, db);
                    }
                }
                if self.needs(*x) {
                    let mut dx = Mat::zeros(g.rows, n);
                    let mut dh = vec![0.0; n];
                    for r in 0..g.rows {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for c in 0..n {
                            dh[c] = g.at(r, c) * gv.data[c];
                            mean_dh += dh[c];
                            mean_dh_h += dh[c] * xhat.at(r, c);
                        }
                        mean_dh /= n as f64;
                        mean_dh_h /= n as f64;
                        let row = dx.row_mut(r);
                        for c in 0..n {
                            row[c] = inv_std[r] * (dh[c] - mean_dh - xhat.at(r, c) * mean_dh_h);
                        }
                    }
                    self.acc_owned(grads, *x, dx);
                }
            }
            Op::Softmax(a) => {
                let y = y.unwrap();
                let mut d = Mat::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (c, v) in d.row_mut(r).iter_mut().enumerate() {
                        *v = yr[c] * (gr[c] - dot);
                    }
                }
                self.acc_owned(grads, *a, d);
            }
            Op::LogSoftmax(a) => {
                let y = y.unwrap();
                let mut d = Mat::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let total: f64 = gr.iter().sum();
                    for (c, v) in d.row_mut(r).iter_mut().enumerate() {
                        *v = gr[c] - yr[c].exp() * total;
                    }
                }
                self.acc_owned(grads, *a, d);
            }
            Op::Gather { table, ids } => {
                if self.needs(*table) {
                    let t = self.value(*table);
                    let dt = acc_slot(grads, *table, t.rows, t.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (v, p) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *v += p;
                        }
                    }
                }
            }
            Op::SliceRows { a, start } => {
                if self.needs(*a) {
                    let x = self.value(*a);
                    let da = acc_slot(grads, *a, x.rows, x.cols);
                    let off = start * x.cols;
                    for (v, p) in da.data[off..off + g.len()].iter_mut().zip(&g.data) {
                        *v += p;
                    }
                }
            }
            Op::SliceCols { a, start } => {
                if self.needs(*a) {
                    let x = self.value(*a);
                    let da = acc_slot(grads, *a, x.rows, x.cols);
                    for r in 0..g.rows {
                        for (v, p) in da.row_mut(r)[*start..*start + g.cols].iter_mut().zip(g.row(r)) {
                            *v += p;
                        }
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for p in parts {
                    let m = self.value(*p);
                    if self.needs(*p) {
                        let piece = Mat::from_vec(m.rows, m.cols, g.data[at..at + m.len()].to_vec());
                        self.acc_owned(grads, *p, piece);
                    }
                    at += m.len();
                }
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for p in parts {
                    let m = self.value(*p);
                    if self.needs(*p) {
                        let mut piece = Mat::zeros(m.rows, m.cols);
                        for r in 0..m.rows {
                            piece.row_mut(r).copy_from_slice(&g.row(r)[at..at + m.cols]);
                        }
                        self.acc_owned(grads, *p, piece);
                    }
                    at += m.cols;
                }
            }
            Op::Pick { a, cols } => {
                if self.needs(*a) {
                    let x = self.value(*a);
                    let da = acc_slot(grads, *a, x.rows, x.cols);
                    for (r, &c) in cols.iter().enumerate() {
                        da.data[r * x.cols + c] += g.data[r];
                    }
                }
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                self.acc_owned(grads, *a, Mat::filled(x.rows, x.cols, g.item()));
            }
            Op::MeanRows(a) => {
                if self.needs(*a) {
                    let x = self.value(*a);
                    let inv = 1.0 / x.rows as f64;
                    let da = acc_slot(grads, *a, x.rows, x.cols);
                    for r in 0..x.rows {
                        for (v, p) in da.row_mut(r).iter_mut().zip(&g.data) {
                            *v += p * inv;
                        }
                    }
                }
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Mat>], v: Var, g: &Mat, alpha: f64) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(m) => m.add_scaled(g, alpha),
            slot @ None => {
                let mut m = g.clone();
                if alpha != 1.0 {
                    m.scale_in_place(alpha);
                }
                *slot = Some(m);
            }
        }
    }

    fn acc_owned(&self, grads: &mut [Option<Mat>], v: Var, g: Mat) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(m) => m.add_scaled(&g, 1.0),
            slot @ None => *slot = Some(g),
        }
    }
}

fn acc_slot(grads: &mut [Option<Mat>], v: Var, rows: usize, cols: usize) -> &mut Mat {
    grads[v.0].get_or_insert_with(|| Mat::zeros(rows, cols))
}

fn elementwise(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    debug_assert_eq!(a.shape(), b.shape());
    Mat::from_vec(
        a.rows,
        a.cols,
        a.data.iter().zip(&b.data).map(|(p, q)| f(*p, *q)).collect(),
    )
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(m: Mat) -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.insert("w", m);
        (p, id)
    }

    #[test]
    fn sum_of_squares_gradient_is_twice_params() {
        let (p, id) = set_with(Mat::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]));
        let mut t = Tape::new(&p);
        let w = t.param(id);
        let sq = t.mul(w, w);
        let loss = t.sum(sq);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(id).unwrap().data, vec![2.0, -4.0, 1.0, 6.0]);
    }

    #[test]
    fn second_backward_is_rejected() {
        let (p, id) = set_with(Mat::scalar(1.0));
        let mut t = Tape::new(&p);
        let w = t.param(id);
        let loss = t.sum(w);
        t.backward(loss).unwrap();
        assert!(matches!(t.backward(loss), Err(NeuralError::TapeConsumed)));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let (p, id) = set_with(Mat::zeros(1, 2));
        let mut t = Tape::new(&p);
        let w = t.param(id);
        assert!(matches!(t.backward(w), Err(NeuralError::Shape(_))));
    }

    #[test]
    fn causal_softmax_masks_future() {
        let p = ParamSet::new();
        let mut t = Tape::new(&p);
        let x = t.constant(Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 0.0, 0.0, 5.0]));
        let y = t.causal_softmax(x, 0);
        let v = t.value(y);
        assert_eq!(v.row(0), &[1.0, 0.0, 0.0]);
        assert!((v.at(1, 0) - 0.5).abs() < 1e-12 && v.at(1, 2) == 0.0);
    }
}
