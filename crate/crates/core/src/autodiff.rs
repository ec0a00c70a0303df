//! Dense-tensor reverse-mode differentiation on a linear tape.
//!
//! The engine keeps tensors at rank <= 2 (scalars, vectors, matrices);
//! batching is done by stacking rows, so nothing here needs a general ND
//! layout. Operations append nodes to a [`Tape`] in forward order, which is
//! automatically a topological order: [`Tape::backward`] walks it once in
//! reverse, accumulating vector-Jacobian products additively so fan-out
//! works without bookkeeping.
//!
//! Model parameters live outside the tape in a [`ParamSet`]. A forward pass
//! snapshots each parameter it touches onto the tape exactly once;
//! [`Tape::accumulate_param_grads`] moves the resulting gradients back into
//! the set, where the optimizer consumes them.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::scalar::{lit, Scalar};

// ---------------------------------------------------------------------------
// Shapes
// ---------------------------------------------------------------------------

/// Tensor shape of rank 0 (scalar), 1 (vector) or 2 (matrix).
///
/// Every dimension is at least 1; the element count is the product of the
/// dimensions (1 for a scalar).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn scalar() -> Self {
        Shape { dims: vec![] }
    }

    pub fn vector(n: usize) -> Self {
        assert!(n >= 1, "vector length must be >= 1");
        Shape { dims: vec![n] }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        Shape { dims: vec![rows, cols] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.dims.is_empty()
    }

    /// Total element count (product of dims; 1 for scalars).
    pub fn count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row count: 1 for scalars and vectors.
    pub fn rows(&self) -> usize {
        if self.dims.len() == 2 {
            self.dims[0]
        } else {
            1
        }
    }

    /// Column count: the last dimension (1 for scalars).
    pub fn cols(&self) -> usize {
        match self.dims.len() {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[1],
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.dims.len() {
            0 => write!(f, "scalar"),
            1 => write!(f, "[{}]", self.dims[0]),
            _ => write!(f, "[{}x{}]", self.dims[0], self.dims[1]),
        }
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Handle to one parameter tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// One named parameter tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct ParamEntry<T> {
    pub name: String,
    pub shape: Shape,
    pub data: Vec<T>,
    pub grad: Vec<T>,
}

/// Ordered collection of model parameters.
///
/// Declaration order is stable and meaningful: checkpoints serialize the
/// raw data blobs in this order, and the optimizer state is aligned to it.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    pub fn alloc(&mut self, name: impl Into<String>, shape: Shape, data: Vec<T>) -> ParamId {
        assert_eq!(data.len(), shape.count(), "parameter data length mismatch");
        let id = ParamId(self.entries.len());
        let n = data.len();
        self.entries.push(ParamEntry {
            name: name.into(),
            shape,
            data,
            grad: vec![T::zero(); n],
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut ParamEntry<T> {
        &mut self.entries[id.0]
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            for g in &mut e.grad {
                *g = T::zero();
            }
        }
    }

    /// Copy of all parameter data, for early-stopping snapshots.
    pub fn snapshot(&self) -> Vec<Vec<T>> {
        self.entries.iter().map(|e| e.data.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<T>]) {
        assert_eq!(snapshot.len(), self.entries.len(), "snapshot arity mismatch");
        for (e, s) in self.entries.iter_mut().zip(snapshot) {
            e.data.copy_from_slice(s);
        }
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

/// Handle to a tensor recorded on a [`Tape`].
///
/// The shape, forward data, and (after backward) gradient live in the tape;
/// the handle itself is a cheap copyable node id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Value {
    id: usize,
}

enum Op<T> {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize },
    AddBias { a: usize, b: usize },
    AddOffset { a: usize },
    Sub { a: usize, b: usize },
    Scale { a: usize, c: T },
    Relu { a: usize },
    Concat { a: usize, b: usize },
    GatherSum { a: usize, groups: Rc<Vec<Vec<usize>>> },
    ReduceSumRows { a: usize },
    SumAll { a: usize },
    Mse { a: usize, b: usize },
    RowNorms { a: usize },
    Dropout { a: usize, mask: Vec<T> },
}

struct Node<T> {
    shape: Shape,
    data: Vec<T>,
    op: Op<T>,
    param: Option<ParamId>,
}

/// Linear record of a forward computation.
///
/// Nodes are appended in forward order, so every input precedes its
/// consumers; the backward pass visits each node exactly once in reverse.
/// A tape and its values are confined to a single thread.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Vec<T>>,
    param_nodes: HashMap<usize, Value>,
    ran_backward: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            param_nodes: HashMap::new(),
            ran_backward: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Value) -> &Shape {
        &self.nodes[v.id].shape
    }

    pub fn data(&self, v: Value) -> &[T] {
        &self.nodes[v.id].data
    }

    /// Scalar payload of a rank-0 value.
    pub fn scalar(&self, v: Value) -> T {
        debug_assert!(self.nodes[v.id].shape.is_scalar());
        self.nodes[v.id].data[0]
    }

    /// Gradient of a node; `None` until [`Tape::backward`] has run.
    pub fn grad(&self, v: Value) -> Option<&[T]> {
        if self.ran_backward {
            Some(&self.grads[v.id])
        } else {
            None
        }
    }

    fn push(&mut self, shape: Shape, data: Vec<T>, op: Op<T>) -> Value {
        debug_assert_eq!(data.len(), shape.count());
        debug_assert!(
            data.iter().all(|x| x.is_finite()),
            "non-finite output in forward op"
        );
        let id = self.nodes.len();
        self.nodes.push(Node { shape, data, op, param: None });
        Value { id }
    }

    /// Record an untracked-constant / input leaf.
    pub fn constant(&mut self, shape: Shape, data: Vec<T>) -> Value {
        assert_eq!(data.len(), shape.count(), "constant data length mismatch");
        self.push(shape, data, Op::Leaf)
    }

    pub fn constant_scalar(&mut self, v: T) -> Value {
        self.push(Shape::scalar(), vec![v], Op::Leaf)
    }

    /// Snapshot a parameter onto the tape.
    ///
    /// Repeated calls for the same parameter return the same node, so a
    /// parameter reused across several sub-networks accumulates one gradient.
    pub fn param(&mut self, params: &ParamSet<T>, id: ParamId) -> Value {
        if let Some(&v) = self.param_nodes.get(&id.0) {
            return v;
        }
        let entry = params.entry(id);
        let v = self.push(entry.shape.clone(), entry.data.clone(), Op::Leaf);
        self.nodes[v.id].param = Some(id);
        self.param_nodes.insert(id.0, v);
        v
    }

    fn same_shape(&self, ctx: &str, a: Value, b: Value) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(GateError::dimension(ctx, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    // -- Forward operations -------------------------------------------------

    /// Matrix product `[m x k] . [k x n] -> [m x n]`.
    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.rank() != 2 || sb.rank() != 2 || sa.cols() != sb.rows() {
            return Err(GateError::dimension("matmul", sa, sb));
        }
        let (m, k, n) = (sa.rows(), sa.cols(), sb.cols());
        let out = matmul_raw(self.data(a), self.data(b), m, k, n);
        Ok(self.push(Shape::matrix(m, n), out, Op::Matmul { a: a.id, b: b.id }))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("add", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).clone();
        Ok(self.push(shape, data, Op::Add { a: a.id, b: b.id }))
    }

    /// Bias broadcast: `[m x n] + [n]`, the vector added to every row.
    pub fn add_bias(&mut self, a: Value, bias: Value) -> Result<Value> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sa.rank() != 2 || sb.rank() != 1 || sa.cols() != sb.cols() {
            return Err(GateError::dimension("add_bias", sa, sb));
        }
        let n = sa.cols();
        let bias_row = self.data(bias).to_vec();
        let data = self
            .data(a)
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(&bias_row).map(|(&x, &b)| x + b))
            .collect();
        let shape = sa.clone();
        Ok(self.push(shape, data, Op::AddBias { a: a.id, b: bias.id }))
    }

    /// Add a fixed offset array (not a tape value); gradient passes through.
    pub fn add_offset(&mut self, a: Value, offset: &[T]) -> Result<Value> {
        if offset.len() != self.shape(a).count() {
            return Err(GateError::dimension(
                "add_offset",
                self.shape(a),
                format!("offset len {}", offset.len()),
            ));
        }
        let data = self
            .data(a)
            .iter()
            .zip(offset)
            .map(|(&x, &o)| x + o)
            .collect();
        let shape = self.shape(a).clone();
        Ok(self.push(shape, data, Op::AddOffset { a: a.id }))
    }

    /// Elementwise difference of two same-shape tensors.
    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("sub", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = self.shape(a).clone();
        Ok(self.push(shape, data, Op::Sub { a: a.id, b: b.id }))
    }

    /// Multiply every element by a constant.
    pub fn scale(&mut self, a: Value, c: T) -> Value {
        let data = self.data(a).iter().map(|&x| x * c).collect();
        let shape = self.shape(a).clone();
        self.push(shape, data, Op::Scale { a: a.id, c })
    }

    /// Elementwise `max(x, 0)`.
    pub fn relu(&mut self, a: Value) -> Value {
        let data = self
            .data(a)
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        let shape = self.shape(a).clone();
        self.push(shape, data, Op::Relu { a: a.id })
    }

    /// Concatenate along the last dimension.
    ///
    /// Matrices must share a row count; vectors concatenate end to end.
    pub fn concat(&mut self, a: Value, b: Value) -> Result<Value> {
        let (sa, sb) = (self.shape(a).clone(), self.shape(b).clone());
        match (sa.rank(), sb.rank()) {
            (2, 2) if sa.rows() == sb.rows() => {
                let (m, ca, cb) = (sa.rows(), sa.cols(), sb.cols());
                let mut data = Vec::with_capacity(m * (ca + cb));
                for r in 0..m {
                    data.extend_from_slice(&self.data(a)[r * ca..(r + 1) * ca]);
                    data.extend_from_slice(&self.data(b)[r * cb..(r + 1) * cb]);
                }
                Ok(self.push(Shape::matrix(m, ca + cb), data, Op::Concat { a: a.id, b: b.id }))
            }
            (1, 1) => {
                let mut data = self.data(a).to_vec();
                data.extend_from_slice(self.data(b));
                let n = data.len();
                Ok(self.push(Shape::vector(n), data, Op::Concat { a: a.id, b: b.id }))
            }
            _ => Err(GateError::dimension("concat", sa, sb)),
        }
    }

    /// Grouped row sums: output row `r` is the sum of the input rows listed
    /// in `groups[r]` (zeros for an empty group).
    ///
    /// This is the workhorse behind sparse aggregation: per-edge message
    /// sums, per-node readouts, and per-molecule pooling in a batch.
    pub fn gather_sum(&mut self, a: Value, groups: Rc<Vec<Vec<usize>>>) -> Result<Value> {
        let sa = self.shape(a);
        if sa.rank() != 2 {
            return Err(GateError::dimension("gather_sum", sa, "rank-2 input required"));
        }
        if groups.is_empty() {
            return Err(GateError::Contract("gather_sum needs at least one group".into()));
        }
        let (m, n) = (sa.rows(), sa.cols());
        if let Some(&bad) = groups.iter().flatten().find(|&&i| i >= m) {
            return Err(GateError::Contract(format!(
                "gather_sum index {bad} out of range for {m} rows"
            )));
        }
        let src = self.data(a);
        let mut data = vec![T::zero(); groups.len() * n];
        for (r, group) in groups.iter().enumerate() {
            let out_row = &mut data[r * n..(r + 1) * n];
            for &i in group {
                for (o, &x) in out_row.iter_mut().zip(&src[i * n..(i + 1) * n]) {
                    *o += x;
                }
            }
        }
        let rows = groups.len();
        Ok(self.push(Shape::matrix(rows, n), data, Op::GatherSum { a: a.id, groups }))
    }

    /// Sum a matrix over its rows: `[m x n] -> [n]`.
    pub fn reduce_sum_rows(&mut self, a: Value) -> Result<Value> {
        let sa = self.shape(a);
        if sa.rank() != 2 {
            return Err(GateError::dimension("reduce_sum_rows", sa, "rank-2 input required"));
        }
        let (m, n) = (sa.rows(), sa.cols());
        let src = self.data(a);
        let mut data = vec![T::zero(); n];
        for r in 0..m {
            for (o, &x) in data.iter_mut().zip(&src[r * n..(r + 1) * n]) {
                *o += x;
            }
        }
        Ok(self.push(Shape::vector(n), data, Op::ReduceSumRows { a: a.id }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum_all(&mut self, a: Value) -> Value {
        let s: T = self.data(a).iter().copied().sum();
        self.push(Shape::scalar(), vec![s], Op::SumAll { a: a.id })
    }

    /// Mean squared error between two same-shape tensors, as a scalar.
    pub fn mse(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("mse", a, b)?;
        let n = lit::<T>(self.shape(a).count() as f64);
        let s: T = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Shape::scalar(), vec![s / n], Op::Mse { a: a.id, b: b.id }))
    }

    /// Euclidean norm of each row: `[m x n] -> [m]`.
    pub fn row_norms(&mut self, a: Value) -> Result<Value> {
        let sa = self.shape(a);
        if sa.rank() != 2 {
            return Err(GateError::dimension("row_norms", sa, "rank-2 input required"));
        }
        let (m, n) = (sa.rows(), sa.cols());
        let src = self.data(a);
        let data = (0..m)
            .map(|r| {
                src[r * n..(r + 1) * n]
                    .iter()
                    .map(|&x| x * x)
                    .sum::<T>()
                    .sqrt()
            })
            .collect();
        Ok(self.push(Shape::vector(m), data, Op::RowNorms { a: a.id }))
    }

    /// Inverted dropout.
    ///
    /// In training mode each element is zeroed with probability `rate` and
    /// survivors are scaled by `1/(1-rate)`, so evaluation mode is a pure
    /// identity. The sampled mask is recorded for the backward pass.
    pub fn dropout<R: Rng>(
        &mut self,
        a: Value,
        rate: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Value> {
        if !(0.0..1.0).contains(&rate) {
            return Err(GateError::Parameter(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep_scale = lit::<T>(1.0 / (1.0 - rate));
        let mask: Vec<T> = self
            .data(a)
            .iter()
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let data = self
            .data(a)
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let shape = self.shape(a).clone();
        Ok(self.push(shape, data, Op::Dropout { a: a.id, mask }))
    }

    // -- Backward -----------------------------------------------------------

    /// Reverse sweep from a scalar loss.
    ///
    /// Seeds the loss gradient with 1.0 and walks the tape once in reverse;
    /// gradient accumulation is additive, so fan-out sums contributions.
    pub fn backward(&mut self, loss: Value) -> Result<()> {
        if !self.nodes[loss.id].shape.is_scalar() {
            return Err(GateError::Contract(format!(
                "backward requires a scalar loss, got shape {}",
                self.nodes[loss.id].shape
            )));
        }
        self.grads = self
            .nodes
            .iter()
            .map(|n| vec![T::zero(); n.data.len()])
            .collect();
        self.grads[loss.id][0] = T::one();
        self.ran_backward = true;

        for id in (0..self.nodes.len()).rev() {
            if self.grads[id].iter().all(|&g| g == T::zero()) {
                continue;
            }
            self.backward_node(id);
        }
        Ok(())
    }

    fn backward_node(&mut self, id: usize) {
        // The output gradient is moved out to sidestep aliasing with the
        // input accumulators; node data is only read.
        let g = std::mem::take(&mut self.grads[id]);
        match &self.nodes[id].op {
            Op::Leaf => {
                self.grads[id] = g;
                return;
            }
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.nodes[a].shape.rows(), self.nodes[a].shape.cols());
                let n = self.nodes[b].shape.cols();
                // dA += G . B^T
                let da = matmul_raw_bt(&g, &self.nodes[b].data, m, n, k);
                // dB += A^T . G
                let db = matmul_raw_at(&self.nodes[a].data, &g, m, k, n);
                add_into(&mut self.grads[a], &da);
                add_into(&mut self.grads[b], &db);
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                add_into(&mut self.grads[a], &g);
                add_into(&mut self.grads[b], &g);
            }
            Op::AddBias { a, b } => {
                let (a, b) = (*a, *b);
                let n = self.nodes[b].data.len();
                add_into(&mut self.grads[a], &g);
                let gb = &mut self.grads[b];
                for row in g.chunks_exact(n) {
                    for (o, &x) in gb.iter_mut().zip(row) {
                        *o += x;
                    }
                }
            }
            Op::AddOffset { a } => {
                let a = *a;
                add_into(&mut self.grads[a], &g);
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                add_into(&mut self.grads[a], &g);
                for (o, &x) in self.grads[b].iter_mut().zip(&g) {
                    *o -= x;
                }
            }
            Op::Scale { a, c } => {
                let (a, c) = (*a, *c);
                for (o, &x) in self.grads[a].iter_mut().zip(&g) {
                    *o += c * x;
                }
            }
            Op::Relu { a } => {
                let a = *a;
                let src = &self.nodes[a].data;
                let ga = &mut self.grads[a];
                for i in 0..g.len() {
                    if src[i] > T::zero() {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Concat { a, b } => {
                let (a, b) = (*a, *b);
                let (ca, cb) = (self.nodes[a].shape.cols(), self.nodes[b].shape.cols());
                let rows = self.nodes[a].shape.rows();
                if self.nodes[a].shape.rank() == 1 {
                    add_into(&mut self.grads[a], &g[..ca]);
                    add_into(&mut self.grads[b], &g[ca..]);
                } else {
                    let w = ca + cb;
                    for r in 0..rows {
                        let row = &g[r * w..(r + 1) * w];
                        add_into(&mut self.grads[a][r * ca..(r + 1) * ca], &row[..ca]);
                        add_into(&mut self.grads[b][r * cb..(r + 1) * cb], &row[ca..]);
                    }
                }
            }
            Op::GatherSum { a, groups } => {
                let a = *a;
                let groups = Rc::clone(groups);
                let n = self.nodes[a].shape.cols();
                let ga = &mut self.grads[a];
                for (r, group) in groups.iter().enumerate() {
                    let grow = &g[r * n..(r + 1) * n];
                    for &i in group {
                        add_into(&mut ga[i * n..(i + 1) * n], grow);
                    }
                }
            }
            Op::ReduceSumRows { a } => {
                let a = *a;
                let n = self.nodes[a].shape.cols();
                let rows = self.nodes[a].shape.rows();
                let ga = &mut self.grads[a];
                for r in 0..rows {
                    add_into(&mut ga[r * n..(r + 1) * n], &g);
                }
            }
            Op::SumAll { a } => {
                let a = *a;
                let s = g[0];
                for o in self.grads[a].iter_mut() {
                    *o += s;
                }
            }
            Op::Mse { a, b } => {
                let (a, b) = (*a, *b);
                let n = lit::<T>(self.nodes[a].data.len() as f64);
                let coeff = g[0] * lit::<T>(2.0) / n;
                for i in 0..self.nodes[a].data.len() {
                    let d = coeff * (self.nodes[a].data[i] - self.nodes[b].data[i]);
                    self.grads[a][i] += d;
                    self.grads[b][i] -= d;
                }
            }
            Op::RowNorms { a } => {
                let a = *a;
                let n = self.nodes[a].shape.cols();
                let src = &self.nodes[a].data;
                let out = &self.nodes[id].data;
                let ga = &mut self.grads[a];
                for r in 0..out.len() {
                    if out[r] == T::zero() {
                        continue;
                    }
                    let coeff = g[r] / out[r];
                    for c in 0..n {
                        ga[r * n + c] += coeff * src[r * n + c];
                    }
                }
            }
            Op::Dropout { a, mask } => {
                let a = *a;
                let contrib: Vec<T> = g.iter().zip(mask).map(|(&x, &m)| x * m).collect();
                add_into(&mut self.grads[a], &contrib);
            }
        }
        self.grads[id] = g;
    }

    /// Add every parameter node's gradient into its [`ParamSet`] entry.
    pub fn accumulate_param_grads(&self, params: &mut ParamSet<T>) {
        assert!(self.ran_backward, "backward must run before harvesting grads");
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(pid) = node.param {
                let entry = params.entry_mut(pid);
                for (o, &x) in entry.grad.iter_mut().zip(&self.grads[i]) {
                    *o += x;
                }
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (o, &x) in dst.iter_mut().zip(src) {
        *o += x;
    }
}

/// `[m x k] . [k x n]`, row-major, cache-friendly i-k-j order.
fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &x) in out_row.iter_mut().zip(b_row) {
                *o += aip * x;
            }
        }
    }
    out
}

/// `G . B^T` where `G: [m x n]`, `B: [k x n]` -> `[m x k]`.
fn matmul_raw_bt<T: Scalar>(g: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = T::zero();
            for (&gx, &bx) in g_row.iter().zip(b_row) {
                acc += gx * bx;
            }
            *o += acc;
        }
    }
    out
}

/// `A^T . G` where `A: [m x k]`, `G: [m x n]` -> `[k x n]`.
fn matmul_raw_at<T: Scalar>(a: &[T], g: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &x) in out_row.iter_mut().zip(g_row) {
                *o += aip * x;
            }
        }
    }
    out
}
