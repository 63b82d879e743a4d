//! Reverse-mode gradient tape over dense tensors.
//!
//! A [`Tape`] borrows a [`ParamStore`] immutably while the forward graph is
//! recorded, so parameter values are never copied onto the tape. Nodes are
//! appended in evaluation order, which is a topological order by
//! construction. [`Tape::backward`] walks the nodes in reverse and returns the
//! gradients of every node plus the per-parameter gradients, which the caller
//! folds into the store once the tape is dropped.

use crate::error::TensorError;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Softmax(Var),
    LogSoftmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Pick(Var, usize, usize),
    Sum(Var),
    Reshape(Var),
}

struct Node<T> {
    op: Op<T>,
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor<T>>,
}

pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

type OpResult = Result<Var, TensorError>;

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            (None, _) => unreachable!("only parameter leaves borrow their value"),
        }
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> OpResult {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> OpResult {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> OpResult {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> OpResult {
        let out = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), out))
    }

    /// Adds the `[1, n]` row `r` to every row of the `[m, n]` tensor `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> OpResult {
        let out = self.value(a).add_row(self.value(r))?;
        Ok(self.push(Op::AddRow(a, r), out))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(Op::Scale(a, s), out)
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|v| v + s);
        self.push(Op::AddScalar(a), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).tanh();
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid();
        self.push(Op::Sigmoid(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.exp());
        self.push(Op::Exp(a), out)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax();
        self.push(Op::Softmax(a), out)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).log_softmax();
        self.push(Op::LogSoftmax(a), out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> OpResult {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_cols(&values)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> OpResult {
        let values: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_rows(&values)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), out))
    }

    /// Embedding lookup: row `ids[i]` of `a` becomes row `i` of the result.
    pub fn gather_rows(&mut self, a: Var, ids: &[usize]) -> OpResult {
        let out = self.value(a).gather_rows(ids)?;
        Ok(self.push(Op::GatherRows(a, ids.to_vec()), out))
    }

    /// Selects element `(r, c)` as a `[1, 1]` scalar.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> OpResult {
        let t = self.value(a);
        if r >= t.rows() || c >= t.cols() {
            return Err(TensorError::Index {
                op: "pick",
                index: r * t.cols() + c,
                bound: t.len(),
            });
        }
        let out = Tensor::scalar(t.get(r, c));
        Ok(self.push(Op::Pick(a, r, c), out))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), out)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> OpResult {
        let out = self.value(a).reshape(vec![rows, cols])?;
        Ok(self.push(Op::Reshape(a), out))
    }

    /// Sums a list of scalars (or equal-shaped tensors).
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Option<Var>, TensorError> {
        let mut iter = terms.iter().copied();
        let Some(mut acc) = iter.next() else {
            return Ok(None);
        };
        for t in iter {
            acc = self.add(acc, t)?;
        }
        Ok(Some(acc))
    }

    /// Reverse sweep from a scalar `loss`, seeded with `d loss = 1`.
    pub fn backward(&self, loss: Var) -> Result<Backward<T>, TensorError> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(shape, vec![T::one()])?);
        let mut by_param: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => accumulate(&mut by_param[id.0], &g)?,
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut grads[a.0], &ga)?;
                    accumulate(&mut grads[b.0], &gb)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g)?;
                    accumulate(&mut grads[b.0], &g)?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], &g)?;
                    accumulate(&mut grads[b.0], &g.map(|v| -v))?;
                }
                Op::Mul(a, b) => {
                    let ga = g.mul(self.value(*b))?;
                    let gb = g.mul(self.value(*a))?;
                    accumulate(&mut grads[a.0], &ga)?;
                    accumulate(&mut grads[b.0], &gb)?;
                }
                Op::AddRow(a, r) => {
                    let cols = g.cols();
                    let mut gr = vec![T::zero(); cols];
                    for (i, &v) in g.data().iter().enumerate() {
                        gr[i % cols] += v;
                    }
                    accumulate(&mut grads[a.0], &g)?;
                    accumulate(&mut grads[r.0], &Tensor::row(gr))?;
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads[a.0], &g.map(|v| v * s))?;
                }
                Op::AddScalar(a) => accumulate(&mut grads[a.0], &g)?,
                Op::Tanh(a) => {
                    let y = node_value(node);
                    let ga = g.zip_with(y, "tanh'", |gv, yv| gv * (T::one() - yv * yv))?;
                    accumulate(&mut grads[a.0], &ga)?;
                }
                Op::Sigmoid(a) => {
                    let y = node_value(node);
                    let ga = g.zip_with(y, "sigmoid'", |gv, yv| gv * yv * (T::one() - yv))?;
                    accumulate(&mut grads[a.0], &ga)?;
                }
                Op::Exp(a) => {
                    let ga = g.mul(node_value(node))?;
                    accumulate(&mut grads[a.0], &ga)?;
                }
                Op::Softmax(a) => {
                    let y = node_value(node);
                    let cols = y.cols();
                    let mut ga = Vec::with_capacity(y.len());
                    for (yr, gr) in y.data().chunks(cols).zip(g.data().chunks(cols)) {
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        ga.extend(yr.iter().zip(gr).map(|(&p, &q)| p * (q - dot)));
                    }
                    accumulate(&mut grads[a.0], &Tensor::new(y.shape().to_vec(), ga)?)?;
                }
                Op::LogSoftmax(a) => {
                    let y = node_value(node);
                    let cols = y.cols();
                    let mut ga = Vec::with_capacity(y.len());
                    for (yr, gr) in y.data().chunks(cols).zip(g.data().chunks(cols)) {
                        let total: T = gr.iter().copied().sum();
                        ga.extend(yr.iter().zip(gr).map(|(&l, &q)| q - l.exp() * total));
                    }
                    accumulate(&mut grads[a.0], &Tensor::new(y.shape().to_vec(), ga)?)?;
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.value(*p).cols();
                        let mut piece = Vec::with_capacity(rows * pc);
                        for r in 0..rows {
                            piece.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                        }
                        offset += pc;
                        accumulate(&mut grads[p.0], &Tensor::matrix(rows, pc, piece)?)?;
                    }
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let pr = self.value(*p).rows();
                        let piece = g.data()[offset * cols..(offset + pr) * cols].to_vec();
                        offset += pr;
                        accumulate(&mut grads[p.0], &Tensor::matrix(pr, cols, piece)?)?;
                    }
                }
                Op::GatherRows(a, ids) => {
                    let src = self.value(*a);
                    let cols = src.cols();
                    let slot = grads[a.0].get_or_insert_with(|| Tensor::zeros(src.rows(), cols));
                    let data = slot.data_mut();
                    for (k, &id) in ids.iter().enumerate() {
                        for (d, &v) in data[id * cols..(id + 1) * cols]
                            .iter_mut()
                            .zip(g.row_slice(k))
                        {
                            *d += v;
                        }
                    }
                }
                Op::Pick(a, r, c) => {
                    let src = self.value(*a);
                    let cols = src.cols();
                    let slot = grads[a.0].get_or_insert_with(|| Tensor::zeros(src.rows(), cols));
                    slot.data_mut()[r * cols + c] += g.item();
                }
                Op::Sum(a) => {
                    let src = self.value(*a);
                    let gv = g.item();
                    let ga = Tensor::new(src.shape().to_vec(), vec![gv; src.len()])?;
                    accumulate(&mut grads[a.0], &ga)?;
                }
                Op::Reshape(a) => {
                    let ga = g.reshape(self.value(*a).shape().to_vec())?;
                    accumulate(&mut grads[a.0], &ga)?;
                }
            }
            grads[idx] = Some(g);
        }

        Ok(Backward {
            node_grads: grads,
            params: Gradients { by_param },
        })
    }
}

fn node_value<T>(node: &Node<T>) -> &Tensor<T> {
    node.value.as_ref().expect("op nodes own their value")
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: &Tensor<T>) -> Result<(), TensorError> {
    match slot {
        Some(acc) => acc.add_assign(g),
        None => {
            *slot = Some(g.clone());
            Ok(())
        }
    }
}

/// Result of a reverse sweep.
pub struct Backward<T> {
    node_grads: Vec<Option<Tensor<T>>>,
    params: Gradients<T>,
}

impl<T: Scalar> Backward<T> {
    /// Gradient of the loss with respect to node `v`. Nodes the loss does not
    /// depend on report `None`, i.e. an all-zero gradient.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.node_grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param_grads(&self) -> &Gradients<T> {
        &self.params
    }

    pub fn into_param_grads(self) -> Gradients<T> {
        self.params
    }
}
