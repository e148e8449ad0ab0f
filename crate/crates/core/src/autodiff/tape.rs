use std::fmt;

use super::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct NodeId(pub usize);

/// Errors surfaced by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum AdError {
    /// `backward` was called on a node whose shape is not `[]`.
    NonScalarRoot { shape: Vec<usize> },
    /// A NaN appeared while accumulating adjoints; carries the op tag of
    /// the node whose adjoint produced it.
    NanInAdjoint { op: &'static str },
}

impl fmt::Display for AdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdError::NonScalarRoot { shape } => {
                write!(f, "backward requires a scalar root, got shape {shape:?}")
            }
            AdError::NanInAdjoint { op } => {
                write!(f, "NaN encountered in adjoint of `{op}`")
            }
        }
    }
}

impl std::error::Error for AdError {}

/// Recordable operation tags for the generic [`Tape::record`] entry point.
///
/// Every tag has a forward rule and an adjoint rule; adjoints are expressed
/// through recorded operations so they can be differentiated again.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpTag {
    Add,
    Sub,
    ScalarMul(f64),
    ElemMul,
    MatMul,
    /// `x·W + b` with the bias broadcast across rows.
    Affine,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Sum,
    Mean,
    Square,
    Sqrt,
    EuclideanNorm,
    Concat,
    Slice { start: usize, len: usize },
}

#[derive(Clone, Debug)]
enum Op {
    Leaf { requires_grad: bool },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    ScalarMul(f64, NodeId),
    ElemMul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Relu(NodeId),
    LeakyRelu(f64, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    Recip(NodeId),
    EuclideanNorm(NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    /// Adjoint of `Slice`: embed a vector into zeros of a longer vector.
    Pad { x: NodeId, start: usize },
    RowSum(NodeId),
    BroadcastRows { x: NodeId },
    BroadcastScalar { x: NodeId },
    /// Scalar node times tensor node, elementwise.
    ScalarTensorMul { s: NodeId, t: NodeId },
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::ScalarMul(..) => "scalar-mul",
            Op::ElemMul(..) => "element-mul",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Affine { .. } => "affine",
            Op::Relu(..) => "relu",
            Op::LeakyRelu(..) => "leaky-relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Square(..) => "square",
            Op::Sqrt(..) => "sqrt",
            Op::Recip(..) => "recip",
            Op::EuclideanNorm(..) => "euclidean-norm",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Pad { .. } => "pad",
            Op::RowSum(..) => "row-sum",
            Op::BroadcastRows { .. } => "broadcast-rows",
            Op::BroadcastScalar { .. } => "broadcast-scalar",
            Op::ScalarTensorMul { .. } => "scalar-tensor-mul",
        }
    }

    fn parents(&self, out: &mut Vec<NodeId>) {
        out.clear();
        match self {
            Op::Leaf { .. } => {}
            Op::Add(a, b) | Op::Sub(a, b) | Op::ElemMul(a, b) | Op::MatMul(a, b) => {
                out.push(*a);
                out.push(*b);
            }
            Op::ScalarMul(_, x)
            | Op::Transpose(x)
            | Op::Relu(x)
            | Op::LeakyRelu(_, x)
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::Sum(x)
            | Op::Mean(x)
            | Op::Square(x)
            | Op::Sqrt(x)
            | Op::Recip(x)
            | Op::EuclideanNorm(x)
            | Op::Slice { x, .. }
            | Op::Pad { x, .. }
            | Op::RowSum(x)
            | Op::BroadcastRows { x }
            | Op::BroadcastScalar { x } => out.push(*x),
            Op::Affine { x, w, b } => {
                out.push(*x);
                out.push(*w);
                out.push(*b);
            }
            Op::Concat(xs) => out.extend_from_slice(xs),
            Op::ScalarTensorMul { s, t } => {
                out.push(*s);
                out.push(*t);
            }
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only recording of a computation over [`Tensor`] values.
///
/// Node ids are indices into the recording; an operation's inputs always
/// precede it, so reverse id order is a reverse topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value held at `id`.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Whether `id` is a differentiable leaf (as opposed to a constant or a
    /// derived node).
    pub fn is_trainable_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].op, Op::Leaf { requires_grad: true })
    }

    /// Differentiable input node.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { requires_grad: true }, value)
    }

    /// Non-differentiable input node (data, masks, frozen parameters).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { requires_grad: false }, value)
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    // ---- recorded operations --------------------------------------------

    /// Generic recording entry point; dispatches on the op tag.
    ///
    /// Panics with a descriptive message when input shapes are incompatible
    /// with the tag (the same contract as the typed methods below).
    pub fn record(&mut self, tag: OpTag, inputs: &[NodeId]) -> NodeId {
        let arity = |n: usize| {
            assert_eq!(
                inputs.len(),
                n,
                "op {tag:?} expects {n} input(s), got {}",
                inputs.len()
            );
        };
        match tag {
            OpTag::Add => {
                arity(2);
                self.add(inputs[0], inputs[1])
            }
            OpTag::Sub => {
                arity(2);
                self.sub(inputs[0], inputs[1])
            }
            OpTag::ScalarMul(c) => {
                arity(1);
                self.scalar_mul(c, inputs[0])
            }
            OpTag::ElemMul => {
                arity(2);
                self.elem_mul(inputs[0], inputs[1])
            }
            OpTag::MatMul => {
                arity(2);
                self.matmul(inputs[0], inputs[1])
            }
            OpTag::Affine => {
                arity(3);
                self.affine(inputs[0], inputs[1], inputs[2])
            }
            OpTag::Relu => {
                arity(1);
                self.relu(inputs[0])
            }
            OpTag::LeakyRelu(alpha) => {
                arity(1);
                self.leaky_relu(alpha, inputs[0])
            }
            OpTag::Sigmoid => {
                arity(1);
                self.sigmoid(inputs[0])
            }
            OpTag::Tanh => {
                arity(1);
                self.tanh(inputs[0])
            }
            OpTag::Sum => {
                arity(1);
                self.sum(inputs[0])
            }
            OpTag::Mean => {
                arity(1);
                self.mean(inputs[0])
            }
            OpTag::Square => {
                arity(1);
                self.square(inputs[0])
            }
            OpTag::Sqrt => {
                arity(1);
                self.sqrt(inputs[0])
            }
            OpTag::EuclideanNorm => {
                arity(1);
                self.euclidean_norm(inputs[0])
            }
            OpTag::Concat => self.concat(inputs),
            OpTag::Slice { start, len } => {
                arity(1);
                self.slice(inputs[0], start, len)
            }
        }
    }

    fn require_same_shape(&self, op: &str, a: NodeId, b: NodeId) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "op `{op}`: shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.require_same_shape("add", a, b);
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.require_same_shape("sub", a, b);
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn scalar_mul(&mut self, c: f64, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(|t| c * t);
        self.push(Op::ScalarMul(c, x), v)
    }

    pub fn elem_mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.require_same_shape("element-mul", a, b);
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x * y);
        self.push(Op::ElemMul(a, b), v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, ka) = self.nodes[a.0].value.dims2();
        let (kb, n) = self.nodes[b.0].value.dims2();
        assert_eq!(
            ka, kb,
            "op `matmul`: inner dimensions differ, {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let av = self.nodes[a.0].value.data();
        let bv = self.nodes[b.0].value.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..ka {
                let x = av[i * ka + l];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[l * n..(l + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bb) in orow.iter_mut().zip(brow) {
                    *o += x * bb;
                }
            }
        }
        self.push(Op::MatMul(a, b), Tensor::new(vec![m, n], out))
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.nodes[x.0].value.dims2();
        let xs = self.nodes[x.0].value.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = xs[i * n + j];
            }
        }
        self.push(Op::Transpose(x), Tensor::new(vec![n, m], out))
    }

    /// `x·W + b`: `x` is `[m, k]`, `W` is `[k, n]`, `b` is `[n]` and is
    /// added to every row.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (m, kx) = self.nodes[x.0].value.dims2();
        let (kw, n) = self.nodes[w.0].value.dims2();
        assert_eq!(
            kx, kw,
            "op `affine`: inner dimensions differ, {:?} vs {:?}",
            self.shape(x),
            self.shape(w)
        );
        assert_eq!(
            self.shape(b),
            &[n],
            "op `affine`: bias shape {:?} does not match output width {n}",
            self.shape(b)
        );
        let xs = self.nodes[x.0].value.data();
        let ws = self.nodes[w.0].value.data();
        let bs = self.nodes[b.0].value.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            orow.copy_from_slice(bs);
            for l in 0..kx {
                let v = xs[i * kx + l];
                if v == 0.0 {
                    continue;
                }
                let wrow = &ws[l * n..(l + 1) * n];
                for (o, &ww) in orow.iter_mut().zip(wrow) {
                    *o += v * ww;
                }
            }
        }
        self.push(Op::Affine { x, w, b }, Tensor::new(vec![m, n], out))
    }

    /// Rectifier; the adjoint uses the right-derivative at 0 (slope 1).
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(|t| if t > 0.0 { t } else { 0.0 });
        self.push(Op::Relu(x), v)
    }

    pub fn leaky_relu(&mut self, alpha: f64, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(|t| if t >= 0.0 { t } else { alpha * t });
        self.push(Op::LeakyRelu(alpha, x), v)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(sigmoid_scalar);
        self.push(Op::Sigmoid(x), v)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(f64::tanh);
        self.push(Op::Tanh(x), v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x.0].value.len();
        assert!(n > 0, "op `mean`: empty tensor");
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        self.push(Op::Mean(x), Tensor::scalar(s / n as f64))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(|t| t * t);
        self.push(Op::Square(x), v)
    }

    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(f64::sqrt);
        self.push(Op::Sqrt(x), v)
    }

    pub fn recip(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.map(|t| 1.0 / t);
        self.push(Op::Recip(x), v)
    }

    /// Euclidean norm of all entries, yielding a scalar. The adjoint at the
    /// origin is the zero vector (subgradient choice).
    pub fn euclidean_norm(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x.0].value.data().iter().map(|v| v * v).sum();
        self.push(Op::EuclideanNorm(x), Tensor::scalar(s.sqrt()))
    }

    /// Concatenates vectors (and scalars, treated as length-1) into one vector.
    pub fn concat(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "op `concat`: no inputs");
        let mut data = Vec::new();
        for &x in xs {
            let sh = self.shape(x);
            assert!(
                sh.len() <= 1,
                "op `concat`: expects scalars or vectors, got shape {sh:?}"
            );
            data.extend_from_slice(self.nodes[x.0].value.data());
        }
        self.push(Op::Concat(xs.to_vec()), Tensor::vector(data))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let sh = self.shape(x);
        assert_eq!(sh.len(), 1, "op `slice`: expects a vector, got shape {sh:?}");
        assert!(
            start + len <= sh[0],
            "op `slice`: range {start}..{} out of bounds for length {}",
            start + len,
            sh[0]
        );
        let data = self.nodes[x.0].value.data()[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, Tensor::vector(data))
    }

    fn pad(&mut self, x: NodeId, start: usize, total: usize) -> NodeId {
        let len = self.nodes[x.0].value.len();
        let mut data = vec![0.0; total];
        data[start..start + len].copy_from_slice(self.nodes[x.0].value.data());
        self.push(Op::Pad { x, start }, Tensor::vector(data))
    }

    fn row_sum(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.nodes[x.0].value.dims2();
        let xs = self.nodes[x.0].value.data();
        let mut out = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                out[j] += xs[i * n + j];
            }
        }
        self.push(Op::RowSum(x), Tensor::vector(out))
    }

    fn broadcast_rows(&mut self, x: NodeId, rows: usize) -> NodeId {
        let sh = self.shape(x);
        assert_eq!(sh.len(), 1, "broadcast-rows expects a vector");
        let n = sh[0];
        let mut data = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            data.extend_from_slice(self.nodes[x.0].value.data());
        }
        self.push(Op::BroadcastRows { x }, Tensor::new(vec![rows, n], data))
    }

    fn broadcast_scalar(&mut self, x: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.nodes[x.0].value.item();
        let t = Tensor::full(&shape, v);
        self.push(Op::BroadcastScalar { x }, t)
    }

    /// Elementwise product of a scalar node and a tensor node.
    pub fn scalar_tensor_mul(&mut self, s: NodeId, t: NodeId) -> NodeId {
        assert!(
            self.nodes[s.0].value.is_scalar(),
            "scalar-tensor-mul: first input must be scalar, got {:?}",
            self.shape(s)
        );
        let sv = self.nodes[s.0].value.item();
        let v = self.nodes[t.0].value.map(|x| sv * x);
        self.push(Op::ScalarTensorMul { s, t }, v)
    }

    // ---- backward pass ---------------------------------------------------

    /// Gradients of the scalar `root` with respect to each node in `wrt`.
    ///
    /// A `wrt` node that `root` does not depend on gets a zero tensor.
    pub fn backward(&mut self, root: NodeId, wrt: &[NodeId]) -> Result<Vec<Tensor>, AdError> {
        let ids = self.backward_graph(root, wrt)?;
        Ok(ids.into_iter().map(|id| self.nodes[id.0].value.clone()).collect())
    }

    /// Like [`Tape::backward`], but the returned gradients are tape nodes, so
    /// a further backward pass can differentiate through them.
    pub fn backward_graph(&mut self, root: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>, AdError> {
        if !self.nodes[root.0].value.is_scalar() {
            return Err(AdError::NonScalarRoot {
                shape: self.shape(root).to_vec(),
            });
        }

        let n = root.0 + 1;

        // dep[i]: node i transitively depends on some wrt node.
        let mut dep = vec![false; n];
        for w in wrt {
            if w.0 < n {
                dep[w.0] = true;
            }
        }
        let mut parents = Vec::new();
        for i in 0..n {
            if dep[i] {
                continue;
            }
            self.nodes[i].op.parents(&mut parents);
            if parents.iter().any(|p| dep[p.0]) {
                dep[i] = true;
            }
        }

        // anc[i]: root transitively depends on node i.
        let mut anc = vec![false; n];
        anc[root.0] = true;
        for i in (0..n).rev() {
            if !anc[i] {
                continue;
            }
            self.nodes[i].op.parents(&mut parents);
            for p in &parents {
                anc[p.0] = true;
            }
        }

        // Adjoint accumulation in reverse id order; each node is visited
        // exactly once, after all of its consumers.
        let mut grads: Vec<Option<NodeId>> = vec![None; n];
        grads[root.0] = Some(self.constant(Tensor::scalar(1.0)));

        for i in (0..n).rev() {
            if !(anc[i] && dep[i]) {
                continue;
            }
            let g = match grads[i] {
                Some(g) => g,
                None => continue, // consumer side never reached this node
            };
            let op = self.nodes[i].op.clone();
            if self.nodes[g.0].value.has_nan() {
                return Err(AdError::NanInAdjoint { op: op.tag() });
            }
            self.propagate(NodeId(i), &op, g, &dep, &mut grads);
        }

        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            match grads.get(w.0).copied().flatten() {
                Some(g) => out.push(g),
                None => {
                    let z = Tensor::zeros(self.shape(*w));
                    out.push(self.constant(z));
                }
            }
        }
        Ok(out)
    }

    fn accum(&mut self, existing: Option<NodeId>, contribution: NodeId) -> Option<NodeId> {
        Some(match existing {
            Some(e) => self.add(e, contribution),
            None => contribution,
        })
    }

    /// Adds this node's adjoint contributions to its parents' grad slots.
    /// Parents that do not lead to any `wrt` node (per `dep`) are skipped.
    fn propagate(&mut self, node: NodeId, op: &Op, g: NodeId, dep: &[bool], grads: &mut [Option<NodeId>]) {
        match *op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                if dep[a.0] {
                    grads[a.0] = self.accum(grads[a.0], g);
                }
                if dep[b.0] {
                    grads[b.0] = self.accum(grads[b.0], g);
                }
            }
            Op::Sub(a, b) => {
                if dep[a.0] {
                    grads[a.0] = self.accum(grads[a.0], g);
                }
                if dep[b.0] {
                    let neg = self.scalar_mul(-1.0, g);
                    grads[b.0] = self.accum(grads[b.0], neg);
                }
            }
            Op::ScalarMul(c, x) => {
                if dep[x.0] {
                    let d = self.scalar_mul(c, g);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::ElemMul(a, b) => {
                if dep[a.0] {
                    let d = self.elem_mul(g, b);
                    grads[a.0] = self.accum(grads[a.0], d);
                }
                if dep[b.0] {
                    let d = self.elem_mul(g, a);
                    grads[b.0] = self.accum(grads[b.0], d);
                }
            }
            Op::MatMul(a, b) => {
                if dep[a.0] {
                    let bt = self.transpose(b);
                    let d = self.matmul(g, bt);
                    grads[a.0] = self.accum(grads[a.0], d);
                }
                if dep[b.0] {
                    let at = self.transpose(a);
                    let d = self.matmul(at, g);
                    grads[b.0] = self.accum(grads[b.0], d);
                }
            }
            Op::Transpose(x) => {
                if dep[x.0] {
                    let d = self.transpose(g);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Affine { x, w, b } => {
                if dep[x.0] {
                    let wt = self.transpose(w);
                    let d = self.matmul(g, wt);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
                if dep[w.0] {
                    let xt = self.transpose(x);
                    let d = self.matmul(xt, g);
                    grads[w.0] = self.accum(grads[w.0], d);
                }
                if dep[b.0] {
                    let d = self.row_sum(g);
                    grads[b.0] = self.accum(grads[b.0], d);
                }
            }
            Op::Relu(x) => {
                if dep[x.0] {
                    // Piecewise-constant slope; recorded as a constant mask,
                    // so nothing flows into it on a second pass.
                    let mask = self.nodes[x.0].value.map(|t| if t >= 0.0 { 1.0 } else { 0.0 });
                    let m = self.constant(mask);
                    let d = self.elem_mul(g, m);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::LeakyRelu(alpha, x) => {
                if dep[x.0] {
                    let mask = self.nodes[x.0].value.map(|t| if t >= 0.0 { 1.0 } else { alpha });
                    let m = self.constant(mask);
                    let d = self.elem_mul(g, m);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Sigmoid(x) => {
                if dep[x.0] {
                    // σ' = σ(1−σ), expressed through the forward output node.
                    let ones = self.constant(Tensor::full(self.shape(node), 1.0));
                    let om = self.sub(ones, node);
                    let sp = self.elem_mul(node, om);
                    let d = self.elem_mul(g, sp);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Tanh(x) => {
                if dep[x.0] {
                    let ones = self.constant(Tensor::full(self.shape(node), 1.0));
                    let t2 = self.elem_mul(node, node);
                    let sp = self.sub(ones, t2);
                    let d = self.elem_mul(g, sp);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Sum(x) => {
                if dep[x.0] {
                    let d = self.broadcast_scalar(g, self.shape(x).to_vec());
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Mean(x) => {
                if dep[x.0] {
                    let n = self.nodes[x.0].value.len() as f64;
                    let gs = self.scalar_mul(1.0 / n, g);
                    let d = self.broadcast_scalar(gs, self.shape(x).to_vec());
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Square(x) => {
                if dep[x.0] {
                    let two_x = self.scalar_mul(2.0, x);
                    let d = self.elem_mul(g, two_x);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Sqrt(x) => {
                if dep[x.0] {
                    // d√x = 1/(2√x), via the forward output node.
                    let r = self.recip(node);
                    let half_r = self.scalar_mul(0.5, r);
                    let d = self.elem_mul(g, half_r);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Recip(x) => {
                if dep[x.0] {
                    let y2 = self.elem_mul(node, node);
                    let neg = self.scalar_mul(-1.0, y2);
                    let d = self.elem_mul(g, neg);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::EuclideanNorm(x) => {
                if dep[x.0] {
                    let nval = self.nodes[node.0].value.item();
                    let d = if nval == 0.0 {
                        // Subgradient choice at the origin.
                        let z = Tensor::zeros(self.shape(x));
                        self.constant(z)
                    } else {
                        let r = self.recip(node);
                        let s = self.elem_mul(g, r);
                        self.scalar_tensor_mul(s, x)
                    };
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Concat(ref xs) => {
                let mut offset = 0;
                for &x in xs {
                    let len = self.nodes[x.0].value.len();
                    if dep[x.0] {
                        let mut d = self.slice(g, offset, len);
                        if self.shape(x).is_empty() {
                            d = self.sum(d); // restore scalar shape
                        }
                        grads[x.0] = self.accum(grads[x.0], d);
                    }
                    offset += len;
                }
            }
            Op::Slice { x, start, .. } => {
                if dep[x.0] {
                    let total = self.nodes[x.0].value.len();
                    let d = self.pad(g, start, total);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::Pad { x, start, .. } => {
                if dep[x.0] {
                    let len = self.nodes[x.0].value.len();
                    let d = self.slice(g, start, len);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::RowSum(x) => {
                if dep[x.0] {
                    let (m, _) = self.nodes[x.0].value.dims2();
                    let d = self.broadcast_rows(g, m);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::BroadcastRows { x } => {
                if dep[x.0] {
                    let d = self.row_sum(g);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::BroadcastScalar { x } => {
                if dep[x.0] {
                    let d = self.sum(g);
                    grads[x.0] = self.accum(grads[x.0], d);
                }
            }
            Op::ScalarTensorMul { s, t } => {
                if dep[s.0] {
                    let prod = self.elem_mul(g, t);
                    let d = self.sum(prod);
                    grads[s.0] = self.accum(grads[s.0], d);
                }
                if dep[t.0] {
                    let d = self.scalar_tensor_mul(s, g);
                    grads[t.0] = self.accum(grads[t.0], d);
                }
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid_scalar(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
