//! Wengert-list reverse-mode differentiation over 2-D tensors.
//!
//! Every primitive appends one node holding its forward value. Node ids are
//! handed out in creation order, so the list is topologically sorted by
//! construction and `backward` is a single reverse sweep.

use super::tensor::{matmul_transpose_a_into, matmul_transpose_b_into};
use super::{DiffError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Square(NodeId),
    Clamp(NodeId, f64, f64),
    SumCols(NodeId),
    Mean(NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatCols(NodeId, NodeId),
}

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    // true when the node depends on at least one variable leaf
    tracked: Vec<bool>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn is_tracked(&self, id: NodeId) -> bool {
        self.tracked[id.0]
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> NodeId {
        let id = NodeId(self.values.len());
        self.values.push(value);
        self.ops.push(op);
        self.tracked.push(tracked);
        id
    }

    /// Leaf that receives a gradient.
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let value = self.values[a.0].map(f);
        let tracked = self.tracked[a.0];
        self.push(value, op, tracked)
    }

    fn binary_elementwise(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let value = self.values[a.0].zip_map(&self.values[b.0], f);
        let tracked = self.tracked[a.0] || self.tracked[b.0];
        self.push(value, op, tracked)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.values[a.0].matmul(&self.values[b.0]);
        let tracked = self.tracked[a.0] || self.tracked[b.0];
        self.push(value, Op::MatMul(a, b), tracked)
    }

    /// `a (r x c) + bias (1 x c)` broadcast over rows.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (av, bv) = (&self.values[a.0], &self.values[bias.0]);
        assert_eq!(bv.len(), av.cols(), "bias width {} vs {} columns", bv.len(), av.cols());
        let c = av.cols();
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(c) {
            for (x, b) in row.iter_mut().zip(bv.data()) {
                *x += b;
            }
        }
        let value = Tensor::matrix(av.rows(), c, data);
        let tracked = self.tracked[a.0] || self.tracked[bias.0];
        self.push(value, Op::AddRow(a, bias), tracked)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.unary(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> NodeId {
        self.unary(a, Op::AddScalar(a), |x| x + k)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Clips into `[lo, hi]`; gradient passes only strictly inside.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    /// Row sums: `r x c -> r x 1`.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let av = &self.values[a.0];
        let data = (0..av.rows()).map(|i| av.row(i).iter().sum()).collect();
        let value = Tensor::matrix(av.rows(), 1, data);
        let tracked = self.tracked[a.0];
        self.push(value, Op::SumCols(a), tracked)
    }

    /// Mean of all elements as a `1 x 1` node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.values[a.0].mean());
        let tracked = self.tracked[a.0];
        self.push(value, Op::Mean(a), tracked)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let value = self.values[a.0].slice_cols(start, end);
        let tracked = self.tracked[a.0];
        self.push(value, Op::SliceCols(a, start, end), tracked)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.values[a.0].concat_cols(&self.values[b.0]);
        let tracked = self.tracked[a.0] || self.tracked[b.0];
        self.push(value, Op::ConcatCols(a, b), tracked)
    }

    /// Propagates `d loss / d node` back to every variable leaf.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, DiffError> {
        let lv = &self.values[loss.0];
        if lv.len() != 1 {
            return Err(DiffError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.tracked[idx] {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let leaves = self
            .ops
            .iter()
            .enumerate()
            .map(|(i, op)| {
                if matches!(op, Op::Leaf) && self.tracked[i] {
                    Some(grads[i].take().unwrap_or_else(|| Tensor::zeros(self.values[i].shape())))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { leaves })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.values[idx];
        match self.ops[idx] {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                let (r, k, c) = (av.rows(), av.cols(), bv.cols());
                if self.tracked[a.0] {
                    let acc = slot(grads, a, av);
                    matmul_transpose_b_into(g.data(), bv.data(), acc.data_mut(), r, k, c);
                }
                if self.tracked[b.0] {
                    let acc = slot(grads, b, bv);
                    matmul_transpose_a_into(av.data(), g.data(), acc.data_mut(), r, k, c);
                }
            }
            Op::AddRow(a, bias) => {
                if self.tracked[a.0] {
                    accumulate(grads, a, &self.values[a.0], g, |x| x);
                }
                if self.tracked[bias.0] {
                    let acc = slot(grads, bias, &self.values[bias.0]);
                    let c = g.cols();
                    for row in g.data().chunks(c) {
                        for (s, x) in acc.data_mut().iter_mut().zip(row) {
                            *s += x;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                if self.tracked[a.0] {
                    accumulate(grads, a, &self.values[a.0], g, |x| x);
                }
                if self.tracked[b.0] {
                    accumulate(grads, b, &self.values[b.0], g, |x| x);
                }
            }
            Op::Sub(a, b) => {
                if self.tracked[a.0] {
                    accumulate(grads, a, &self.values[a.0], g, |x| x);
                }
                if self.tracked[b.0] {
                    accumulate(grads, b, &self.values[b.0], g, |x| -x);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                if self.tracked[a.0] {
                    accumulate_zip(grads, a, av, g, bv, |gi, y| gi * y);
                }
                if self.tracked[b.0] {
                    accumulate_zip(grads, b, bv, g, av, |gi, x| gi * x);
                }
            }
            Op::Scale(a, k) => accumulate(grads, a, &self.values[a.0], g, |x| k * x),
            Op::AddScalar(a) => accumulate(grads, a, &self.values[a.0], g, |x| x),
            Op::Relu(a) => {
                let av = &self.values[a.0];
                accumulate_zip(grads, a, av, g, av, |gi, x| if x > 0.0 { gi } else { 0.0 });
            }
            Op::Tanh(a) => accumulate_zip(grads, a, &self.values[a.0], g, out, |gi, y| gi * (1.0 - y * y)),
            Op::Exp(a) => accumulate_zip(grads, a, &self.values[a.0], g, out, |gi, y| gi * y),
            Op::Softplus(a) => {
                let av = &self.values[a.0];
                accumulate_zip(grads, a, av, g, av, |gi, x| gi * sigmoid(x));
            }
            Op::Square(a) => {
                let av = &self.values[a.0];
                accumulate_zip(grads, a, av, g, av, |gi, x| 2.0 * gi * x);
            }
            Op::Clamp(a, lo, hi) => {
                let av = &self.values[a.0];
                accumulate_zip(grads, a, av, g, av, |gi, x| if x > lo && x < hi { gi } else { 0.0 });
            }
            Op::SumCols(a) => {
                let av = &self.values[a.0];
                let c = av.cols();
                let acc = slot(grads, a, av);
                for (row, gi) in acc.data_mut().chunks_mut(c).zip(g.data()) {
                    for x in row {
                        *x += gi;
                    }
                }
            }
            Op::Mean(a) => {
                let av = &self.values[a.0];
                let share = g.item() / av.len() as f64;
                let acc = slot(grads, a, av);
                for x in acc.data_mut() {
                    *x += share;
                }
            }
            Op::SliceCols(a, start, end) => {
                let av = &self.values[a.0];
                let c = av.cols();
                let w = end - start;
                let acc = slot(grads, a, av);
                for (row, grow) in acc.data_mut().chunks_mut(c).zip(g.data().chunks(w)) {
                    for (x, gi) in row[start..end].iter_mut().zip(grow) {
                        *x += gi;
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                let (ca, cb) = (av.cols(), bv.cols());
                if self.tracked[a.0] {
                    let acc = slot(grads, a, av);
                    for (row, grow) in acc.data_mut().chunks_mut(ca).zip(g.data().chunks(ca + cb)) {
                        for (x, gi) in row.iter_mut().zip(&grow[..ca]) {
                            *x += gi;
                        }
                    }
                }
                if self.tracked[b.0] {
                    let acc = slot(grads, b, bv);
                    for (row, grow) in acc.data_mut().chunks_mut(cb).zip(g.data().chunks(ca + cb)) {
                        for (x, gi) in row.iter_mut().zip(&grow[ca..]) {
                            *x += gi;
                        }
                    }
                }
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], id: NodeId, like: &Tensor) -> &'a mut Tensor {
    grads[id.0].get_or_insert_with(|| Tensor::zeros(like.shape()))
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, like: &Tensor, g: &Tensor, f: impl Fn(f64) -> f64) {
    let acc = slot(grads, id, like);
    for (a, &gi) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += f(gi);
    }
}

fn accumulate_zip(
    grads: &mut [Option<Tensor>],
    id: NodeId,
    like: &Tensor,
    g: &Tensor,
    other: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) {
    let acc = slot(grads, id, like);
    for ((a, &gi), &o) in acc.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
        *a += f(gi, o);
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradients of one backward pass, indexed by variable leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a variable leaf. Leaves the loss does not depend on get
    /// exact zeros.
    pub fn wrt(&self, id: NodeId) -> &Tensor {
        self.leaves
            .get(id.0)
            .and_then(Option::as_ref)
            .expect("gradient requested for a node that is not a variable leaf")
    }

    pub fn take(&mut self, id: NodeId) -> Tensor {
        self.leaves
            .get_mut(id.0)
            .and_then(Option::take)
            .expect("gradient requested for a node that is not a variable leaf")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Tensor {
        Tensor::scalar(x)
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.variable(s(3.0));
        let c = tape.constant(s(5.0));
        let grads = tape.backward(c).unwrap();
        assert_eq!(grads.wrt(w).item(), 0.0);
    }

    #[test]
    fn linear_gradient() {
        let mut tape = Tape::new();
        let w = tape.variable(s(0.7));
        let x = tape.constant(s(2.0));
        let y = tape.mul(w, x);
        assert_eq!(tape.backward(y).unwrap().wrt(w).item(), 2.0);
    }

    #[test]
    fn rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let w = tape.variable(Tensor::zeros(&[2, 1]));
        let err = tape.backward(w).unwrap_err();
        assert!(matches!(err, DiffError::NonScalarLoss { .. }));
    }

    #[test]
    fn reused_node_accumulates() {
        // y = x * x + x  => dy/dx = 2x + 1
        let mut tape = Tape::new();
        let x = tape.variable(s(3.0));
        let xx = tape.mul(x, x);
        let y = tape.add(xx, x);
        assert_eq!(tape.backward(y).unwrap().wrt(x).item(), 7.0);
    }

    #[test]
    fn elementwise_primitives_match_closed_forms() {
        let x0: f64 = 0.3;
        let cases: Vec<(&str, Box<dyn Fn(&mut Tape, NodeId) -> NodeId>, f64)> = vec![
            ("tanh", Box::new(|t, x| t.tanh(x)), 1.0 - x0.tanh().powi(2)),
            ("exp", Box::new(|t, x| t.exp(x)), x0.exp()),
            ("softplus", Box::new(|t, x| t.softplus(x)), 1.0 / (1.0 + (-x0).exp())),
            ("square", Box::new(|t, x| t.square(x)), 2.0 * x0),
            ("relu", Box::new(|t, x| t.relu(x)), 1.0),
            ("scale", Box::new(|t, x| t.scale(x, -4.0)), -4.0),
            ("clamp-inside", Box::new(|t, x| t.clamp(x, -1.0, 1.0)), 1.0),
            ("clamp-outside", Box::new(|t, x| t.clamp(x, 0.5, 1.0)), 0.0),
        ];
        for (name, f, expected) in cases {
            let mut tape = Tape::new();
            let x = tape.variable(s(x0));
            let y = f(&mut tape, x);
            let got = tape.backward(y).unwrap().wrt(x).item();
            assert!((got - expected).abs() < 1e-14, "{name}: {got} vs {expected}");
        }
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn structural_ops_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.variable(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let b = tape.variable(Tensor::from_rows(&[[5.0], [6.0]]));
        let ab = tape.concat_cols(a, b); // 2x3
        let tail = tape.slice_cols(ab, 1, 3); // columns 1..3
        let rows = tape.sum_cols(tail);
        let loss = tape.mean(rows);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.wrt(a).data(), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(grads.wrt(b).data(), &[0.5, 0.5]);
    }

    #[test]
    fn untracked_branch_is_skipped() {
        let mut tape = Tape::new();
        let c = tape.constant(s(2.0));
        let cc = tape.exp(c);
        assert!(!tape.is_tracked(cc));
        let w = tape.variable(s(1.0));
        let y = tape.mul(w, cc);
        assert!(tape.is_tracked(y));
        assert!((tape.backward(y).unwrap().wrt(w).item() - 2f64.exp()).abs() < 1e-15);
    }
}
