use std::cell::{Ref, RefCell};
use std::collections::HashMap;

use ndarray::{Array2, Axis};

use crate::error::{Result, Shape, TensorError};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::PROB_CLIP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SoftmaxAxis {
    /// Each row sums to one.
    Row,
    /// Each column sums to one.
    Col,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Transpose(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    GatherRows(usize, Vec<usize>),
    Softmax(usize, SoftmaxAxis),
    MaskedSoftmaxRows(usize),
    Sigmoid(usize),
    Tanh(usize),
    LeakyRelu(usize, f64),
    Elu(usize, f64),
    MaxRows(usize, Vec<usize>),
    CosineRows(usize, usize),
    Sum(usize),
    Mean(usize),
    Bce {
        probs: usize,
        labels: Vec<f64>,
        pos_weight: f64,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Records operations for a single forward pass so that [`Tape::backward`]
/// can replay them in reverse.
///
/// A tape is single-threaded. Independent tapes may live on different threads
/// and their [`Gradients`] can be summed afterwards.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<ParamId, usize>>,
    num_params: RefCell<usize>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

fn shape_of(a: &Array2<f64>) -> Shape {
    (a.nrows(), a.ncols())
}

fn broadcast_dim(a: usize, b: usize) -> Option<usize> {
    if a == b {
        Some(a)
    } else if a == 1 {
        Some(b)
    } else if b == 1 {
        Some(a)
    } else {
        None
    }
}

/// Sums `grad` down to `shape` along broadcast axes.
fn reduce_to(grad: &Array2<f64>, shape: Shape) -> Array2<f64> {
    let mut g = grad.clone();
    if shape.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn elementwise(op: &'static str, a: &Array2<f64>, b: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Array2<f64>> {
    let (sa, sb) = (shape_of(a), shape_of(b));
    let err = || TensorError::ShapeMismatch {
        op,
        left: sa,
        right: sb,
    };
    let rows = broadcast_dim(sa.0, sb.0).ok_or_else(err)?;
    let cols = broadcast_dim(sa.1, sb.1).ok_or_else(err)?;
    let av = a.broadcast((rows, cols)).ok_or_else(err)?;
    let bv = b.broadcast((rows, cols)).ok_or_else(err)?;
    let mut out = Array2::zeros((rows, cols));
    ndarray::Zip::from(&mut out)
        .and(&av)
        .and(&bv)
        .for_each(|o, &x, &y| *o = f(x, y));
    Ok(out)
}

fn softmax(x: &Array2<f64>, axis: SoftmaxAxis) -> Array2<f64> {
    let mut out = x.clone();
    let lanes = match axis {
        SoftmaxAxis::Row => out.lanes_mut(Axis(1)),
        SoftmaxAxis::Col => out.lanes_mut(Axis(0)),
    };
    for mut lane in lanes {
        let max = lane.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        lane.mapv_inplace(|v| (v - max).exp());
        let sum = lane.sum();
        lane.mapv_inplace(|v| v / sum);
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Array2<f64>, op: Op, name: &'static str) -> Result<Tensor<'_>> {
        if !value.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            match &op {
                Op::Constant => false,
                Op::Param(_) => true,
                other => inputs(other).iter().any(|&i| nodes[i].requires_grad),
            }
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Tensor {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// Records a value that receives no gradient.
    pub fn constant(&self, value: Array2<f64>) -> Tensor<'_> {
        self.push(value, Op::Constant, "constant")
            .expect("constant must be finite")
    }

    /// Fallible variant of [`Tape::constant`] for data that may contain NaN.
    pub fn try_constant(&self, value: Array2<f64>) -> Result<Tensor<'_>> {
        self.push(value, Op::Constant, "constant")
    }

    /// Records a trainable parameter. Repeated calls with the same id reuse
    /// one node, so gradients from every use accumulate in one place.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Tensor<'_> {
        {
            let mut n = self.num_params.borrow_mut();
            *n = (*n).max(store.len());
        }
        if let Some(&node) = self.params.borrow().get(&id) {
            return Tensor { tape: self, id: node };
        }
        let t = self
            .push(store.get(id).clone(), Op::Param(id), "param")
            .expect("parameters must be finite");
        self.params.borrow_mut().insert(id, t.id);
        t
    }

    /// Reverse pass from a `1 x 1` loss. Returns gradients for every parameter
    /// recorded on this tape.
    pub fn backward(&self, loss: Tensor<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let (r, c) = shape_of(&nodes[loss.id].value);
        if (r, c) != (1, 1) {
            return Err(TensorError::invalid(
                "backward",
                format!("loss must be 1x1, got {r}x{c}"),
            ));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::new(*self.num_params.borrow());

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut send = |target: usize, delta: Array2<f64>| {
                if !nodes[target].requires_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(acc) => *acc += &delta,
                    slot => *slot = Some(delta),
                }
            };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => out.accumulate(*pid, &g),
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        send(*a, g.dot(&val(*b).t()));
                    }
                    if nodes[*b].requires_grad {
                        send(*b, val(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    send(*a, reduce_to(&g, shape_of(val(*a))));
                    send(*b, reduce_to(&g, shape_of(val(*b))));
                }
                Op::Sub(a, b) => {
                    send(*a, reduce_to(&g, shape_of(val(*a))));
                    send(*b, reduce_to(&g.mapv(|x| -x), shape_of(val(*b))));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    if nodes[*a].requires_grad {
                        let ga = elementwise("mul", &g, vb, |x, y| x * y)?;
                        send(*a, reduce_to(&ga, shape_of(va)));
                    }
                    if nodes[*b].requires_grad {
                        let gb = elementwise("mul", &g, va, |x, y| x * y)?;
                        send(*b, reduce_to(&gb, shape_of(vb)));
                    }
                }
                Op::Scale(a, k) => send(*a, g.mapv(|x| x * k)),
                Op::Transpose(a) => send(*a, g.t().to_owned()),
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let n = val(p).nrows();
                        send(p, g.slice(ndarray::s![start..start + n, ..]).to_owned());
                        start += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let n = val(p).ncols();
                        send(p, g.slice(ndarray::s![.., start..start + n]).to_owned());
                        start += n;
                    }
                }
                Op::GatherRows(a, idx) => {
                    let mut ga = Array2::zeros(val(*a).raw_dim());
                    for (row, &src) in idx.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(row);
                    }
                    send(*a, ga);
                }
                Op::Softmax(a, axis) => {
                    let y = &node.value;
                    let axis_sum = match axis {
                        SoftmaxAxis::Row => Axis(1),
                        SoftmaxAxis::Col => Axis(0),
                    };
                    let dot = (&g * y).sum_axis(axis_sum).insert_axis(axis_sum);
                    send(*a, y * &(&g - &dot));
                }
                Op::MaskedSoftmaxRows(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(*a, y * &(&g - &dot));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, &g * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    send(*a, &g * &y.mapv(|t| 1.0 - t * t));
                }
                Op::LeakyRelu(a, slope) => {
                    let d = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { *slope });
                    send(*a, &g * &d);
                }
                Op::Elu(a, alpha) => {
                    let d = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { alpha * x.exp() });
                    send(*a, &g * &d);
                }
                Op::MaxRows(a, argmax) => {
                    let mut ga = Array2::zeros(val(*a).raw_dim());
                    for (col, &row) in argmax.iter().enumerate() {
                        ga[[row, col]] = g[[0, col]];
                    }
                    send(*a, ga);
                }
                Op::CosineRows(m, v) => {
                    let (mv, vv) = (val(*m), val(*v));
                    let vnorm = vv.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let mut gm = Array2::zeros(mv.raw_dim());
                    let mut gv = Array2::zeros(vv.raw_dim());
                    for (i, row) in mv.rows().into_iter().enumerate() {
                        let mnorm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let denom = mnorm * vnorm;
                        if denom < COSINE_EPS {
                            continue;
                        }
                        let s = node.value[[i, 0]];
                        let gi = g[[i, 0]];
                        for j in 0..row.len() {
                            gm[[i, j]] += gi * (vv[[0, j]] / denom - s * row[j] / (mnorm * mnorm));
                            gv[[0, j]] += gi * (row[j] / denom - s * vv[[0, j]] / (vnorm * vnorm));
                        }
                    }
                    send(*m, gm);
                    send(*v, gv);
                }
                Op::Sum(a) => {
                    let s = g[[0, 0]];
                    send(*a, Array2::from_elem(val(*a).raw_dim(), s));
                }
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    let s = g[[0, 0]] / n;
                    send(*a, Array2::from_elem(val(*a).raw_dim(), s));
                }
                Op::Bce {
                    probs,
                    labels,
                    pos_weight,
                } => {
                    let p = val(*probs);
                    let k = labels.len() as f64;
                    let scale = g[[0, 0]];
                    let mut gp = Array2::zeros(p.raw_dim());
                    for (i, (&pi, &yi)) in p.iter().zip(labels).enumerate() {
                        if pi <= PROB_CLIP || pi >= 1.0 - PROB_CLIP {
                            continue;
                        }
                        let d = -(pos_weight * yi / pi - (1.0 - yi) / (1.0 - pi)) / k;
                        gp[[i, 0]] = scale * d;
                    }
                    send(*probs, gp);
                }
            }
        }
        Ok(out)
    }
}

/// Below this norm product, cosine similarity is defined as zero.
const COSINE_EPS: f64 = 1e-12;

fn inputs(op: &Op) -> Vec<usize> {
    match op {
        Op::Constant | Op::Param(_) => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::CosineRows(a, b) => vec![*a, *b],
        Op::ConcatRows(p) | Op::ConcatCols(p) => p.clone(),
        Op::Scale(a, _)
        | Op::Transpose(a)
        | Op::GatherRows(a, _)
        | Op::Softmax(a, _)
        | Op::MaskedSoftmaxRows(a)
        | Op::Sigmoid(a)
        | Op::Tanh(a)
        | Op::LeakyRelu(a, _)
        | Op::Elu(a, _)
        | Op::MaxRows(a, _)
        | Op::Sum(a)
        | Op::Mean(a) => vec![*a],
        Op::Bce { probs, .. } => vec![*probs],
    }
}

impl<'t> Tensor<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Array2<f64>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn to_array(&self) -> Array2<f64> {
        self.value().clone()
    }

    pub fn shape(&self) -> Shape {
        shape_of(&self.value())
    }

    /// Value of a `1 x 1` tensor.
    pub fn scalar(&self) -> f64 {
        self.value()[[0, 0]]
    }

    fn same_tape(&self, other: &Tensor<'_>) {
        assert!(std::ptr::eq(self.tape, other.tape), "tensors belong to different tapes");
    }

    fn unary(
        self,
        name: &'static str,
        op: Op,
        f: impl FnOnce(&Array2<f64>) -> Result<Array2<f64>>,
    ) -> Result<Tensor<'t>> {
        let value = f(&self.value())?;
        self.tape.push(value, op, name)
    }

    pub fn matmul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let value = {
            let (a, b) = (self.value(), other.value());
            if a.ncols() != b.nrows() {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    left: shape_of(&a),
                    right: shape_of(&b),
                });
            }
            a.dot(&*b)
        };
        self.tape.push(value, Op::MatMul(self.id, other.id), "matmul")
    }

    /// Elementwise sum; either side may be a broadcast row or column vector.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let value = elementwise("add", &self.value(), &other.value(), |x, y| x + y)?;
        self.tape.push(value, Op::Add(self.id, other.id), "add")
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let value = elementwise("sub", &self.value(), &other.value(), |x, y| x - y)?;
        self.tape.push(value, Op::Sub(self.id, other.id), "sub")
    }

    /// Elementwise (Hadamard) product with row/column broadcasting.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let value = elementwise("mul", &self.value(), &other.value(), |x, y| x * y)?;
        self.tape.push(value, Op::Mul(self.id, other.id), "mul")
    }

    pub fn scale(self, k: f64) -> Result<Tensor<'t>> {
        self.unary("scale", Op::Scale(self.id, k), |a| Ok(a * k))
    }

    pub fn t(self) -> Result<Tensor<'t>> {
        self.unary("transpose", Op::Transpose(self.id), |a| {
            Ok(a.t().as_standard_layout().to_owned())
        })
    }

    /// Stacks tensors vertically; all must share a column count.
    pub fn concat_rows(parts: &[Tensor<'t>]) -> Result<Tensor<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::invalid("concat_rows", "no inputs"))?;
        let tape = first.tape;
        let value = {
            let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let cols = vals[0].ncols();
            for v in &vals {
                if v.ncols() != cols {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat_rows",
                        left: shape_of(&vals[0]),
                        right: shape_of(v),
                    });
                }
            }
            let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
            ndarray::concatenate(Axis(0), &views).expect("checked shapes")
        };
        let ids = parts.iter().map(|p| p.id).collect();
        tape.push(value, Op::ConcatRows(ids), "concat_rows")
    }

    /// Joins tensors side by side; all must share a row count.
    pub fn concat_cols(parts: &[Tensor<'t>]) -> Result<Tensor<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::invalid("concat_cols", "no inputs"))?;
        let tape = first.tape;
        let value = {
            let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let rows = vals[0].nrows();
            for v in &vals {
                if v.nrows() != rows {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat_cols",
                        left: shape_of(&vals[0]),
                        right: shape_of(v),
                    });
                }
            }
            let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
            ndarray::concatenate(Axis(1), &views).expect("checked shapes")
        };
        let ids = parts.iter().map(|p| p.id).collect();
        tape.push(value, Op::ConcatCols(ids), "concat_cols")
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(self, idx: &[usize]) -> Result<Tensor<'t>> {
        let value = {
            let a = self.value();
            if let Some(&bad) = idx.iter().find(|&&i| i >= a.nrows()) {
                return Err(TensorError::invalid(
                    "gather_rows",
                    format!("row {bad} out of range for {} rows", a.nrows()),
                ));
            }
            a.select(Axis(0), idx)
        };
        self.tape
            .push(value, Op::GatherRows(self.id, idx.to_vec()), "gather_rows")
    }

    /// Softmax across each row (each row sums to one).
    pub fn softmax_rows(self) -> Result<Tensor<'t>> {
        self.unary("softmax", Op::Softmax(self.id, SoftmaxAxis::Row), |a| {
            Ok(softmax(a, SoftmaxAxis::Row))
        })
    }

    /// Softmax down each column (each column sums to one).
    pub fn softmax_cols(self) -> Result<Tensor<'t>> {
        self.unary("softmax", Op::Softmax(self.id, SoftmaxAxis::Col), |a| {
            Ok(softmax(a, SoftmaxAxis::Col))
        })
    }

    /// Row softmax restricted to entries where `mask` is nonzero; masked-out
    /// entries are exactly zero. Every row needs at least one open entry.
    pub fn masked_softmax_rows(self, mask: &Array2<f64>) -> Result<Tensor<'t>> {
        self.unary("masked_softmax", Op::MaskedSoftmaxRows(self.id), |a| {
            if a.raw_dim() != mask.raw_dim() {
                return Err(TensorError::ShapeMismatch {
                    op: "masked_softmax",
                    left: shape_of(a),
                    right: shape_of(mask),
                });
            }
            let mut out = Array2::zeros(a.raw_dim());
            for (i, (row, mrow)) in a.rows().into_iter().zip(mask.rows()).enumerate() {
                let max = row
                    .iter()
                    .zip(mrow)
                    .filter(|(_, &m)| m != 0.0)
                    .fold(f64::NEG_INFINITY, |acc, (&v, _)| acc.max(v));
                if max == f64::NEG_INFINITY {
                    return Err(TensorError::invalid(
                        "masked_softmax",
                        format!("row {i} has no unmasked entry"),
                    ));
                }
                let mut sum = 0.0;
                for (j, (&v, &m)) in row.iter().zip(mrow).enumerate() {
                    if m != 0.0 {
                        let e = (v - max).exp();
                        out[[i, j]] = e;
                        sum += e;
                    }
                }
                out.row_mut(i).mapv_inplace(|v| v / sum);
            }
            Ok(out)
        })
    }

    pub fn sigmoid(self) -> Result<Tensor<'t>> {
        self.unary("sigmoid", Op::Sigmoid(self.id), |a| Ok(a.mapv(sigmoid)))
    }

    pub fn tanh(self) -> Result<Tensor<'t>> {
        self.unary("tanh", Op::Tanh(self.id), |a| Ok(a.mapv(f64::tanh)))
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Tensor<'t>> {
        self.unary("leaky_relu", Op::LeakyRelu(self.id, slope), |a| {
            Ok(a.mapv(|x| if x > 0.0 { x } else { slope * x }))
        })
    }

    pub fn elu(self, alpha: f64) -> Result<Tensor<'t>> {
        self.unary("elu", Op::Elu(self.id, alpha), |a| {
            Ok(a.mapv(|x| if x > 0.0 { x } else { alpha * (x.exp() - 1.0) }))
        })
    }

    /// Columnwise maximum over rows, giving a `1 x cols` row. Ties go to the
    /// lowest row index.
    pub fn max_rows(self) -> Result<Tensor<'t>> {
        let (value, argmax) = {
            let a = self.value();
            if a.nrows() == 0 {
                return Err(TensorError::invalid("max_rows", "no rows"));
            }
            let mut value = Array2::zeros((1, a.ncols()));
            let mut argmax = Vec::with_capacity(a.ncols());
            for (j, col) in a.columns().into_iter().enumerate() {
                let mut best = 0;
                for (i, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = i;
                    }
                }
                value[[0, j]] = col[best];
                argmax.push(best);
            }
            (value, argmax)
        };
        self.tape.push(value, Op::MaxRows(self.id, argmax), "max_rows")
    }

    /// Cosine similarity of every row of `self` with the `1 x d` row `target`,
    /// as an `n x 1` column. Zero vectors have similarity zero.
    pub fn cosine_rows(self, target: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&target);
        let value = {
            let (m, v) = (self.value(), target.value());
            if v.nrows() != 1 || v.ncols() != m.ncols() {
                return Err(TensorError::ShapeMismatch {
                    op: "cosine_rows",
                    left: shape_of(&m),
                    right: shape_of(&v),
                });
            }
            let vrow = v.row(0);
            let vnorm = vrow.dot(&vrow).sqrt();
            let mut out = Array2::zeros((m.nrows(), 1));
            for (i, row) in m.rows().into_iter().enumerate() {
                let denom = row.dot(&row).sqrt() * vnorm;
                if denom >= COSINE_EPS {
                    out[[i, 0]] = row.dot(&vrow) / denom;
                }
            }
            out
        };
        self.tape.push(value, Op::CosineRows(self.id, target.id), "cosine_rows")
    }

    pub fn sum(self) -> Result<Tensor<'t>> {
        self.unary("sum", Op::Sum(self.id), |a| Ok(Array2::from_elem((1, 1), a.sum())))
    }

    pub fn mean(self) -> Result<Tensor<'t>> {
        self.unary("mean", Op::Mean(self.id), |a| {
            if a.is_empty() {
                return Err(TensorError::invalid("mean", "empty tensor"));
            }
            Ok(Array2::from_elem((1, 1), a.mean().unwrap_or(0.0)))
        })
    }

    /// Mean binary cross-entropy of a `k x 1` probability column against
    /// 0/1 labels. Probabilities are clipped to `[1e-7, 1 - 1e-7]`.
    pub fn bce_loss(self, labels: &[f64]) -> Result<Tensor<'t>> {
        self.weighted_bce_loss(labels, 1.0)
    }

    /// [`Tensor::bce_loss`] with the positive term multiplied by `pos_weight`.
    pub fn weighted_bce_loss(self, labels: &[f64], pos_weight: f64) -> Result<Tensor<'t>> {
        let value = {
            let p = self.value();
            if labels.is_empty() {
                return Err(TensorError::invalid("bce_loss", "no predictions"));
            }
            if p.ncols() != 1 || p.nrows() != labels.len() {
                return Err(TensorError::ShapeMismatch {
                    op: "bce_loss",
                    left: shape_of(&p),
                    right: (labels.len(), 1),
                });
            }
            let k = labels.len() as f64;
            let total: f64 = p
                .iter()
                .zip(labels)
                .map(|(&pi, &yi)| {
                    let pc = pi.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                    pos_weight * yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln()
                })
                .sum();
            Array2::from_elem((1, 1), -total / k)
        };
        self.tape.push(
            value,
            Op::Bce {
                probs: self.id,
                labels: labels.to_vec(),
                pos_weight,
            },
            "bce_loss",
        )
    }
}
