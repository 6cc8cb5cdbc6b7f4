use super::tensor::finite_or;
use super::{KernelError, Tensor};
use crate::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, T),
    AddScalar(Var, T),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Relu(Var),
    Clamp(Var, T, T),
    SumAll(Var),
    /// `m × n → m × 1`
    SumRows(Var),
    /// `m × n → 1 × n`
    SumCols(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation so that adjoints can be replayed backwards.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and [`Tape::backward`] is a single reverse sweep.
/// Binary elementwise ops broadcast any operand dimension of size 1.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant: no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// First element of a recorded value; meant for `1 × 1` losses.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_flag(&self, inputs: &[Var]) -> bool {
        inputs.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, KernelError> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.grad_flag(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, KernelError> {
        let out = self.value(a).transpose();
        let rg = self.grad_flag(&[a]);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    fn broadcast_shape(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
    ) -> Result<(usize, usize), KernelError> {
        let (ra, ca) = self.dims(a);
        let (rb, cb) = self.dims(b);
        let dim = |x: usize, y: usize| match (x, y) {
            _ if x == y => Some(x),
            (1, y) => Some(y),
            (x, 1) => Some(x),
            _ => None,
        };
        match (dim(ra, rb), dim(ca, cb)) {
            (Some(r), Some(c)) => Ok((r, c)),
            _ => Err(KernelError::Shape {
                op,
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            }),
        }
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var, KernelError> {
        let (r, c) = self.broadcast_shape(op_name, a, b)?;
        let ta = self.value(a);
        let tb = self.value(b);
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(f(ta.data()[bidx(ta, i, j)], tb.data()[bidx(tb, i, j)]));
            }
        }
        let value = finite_or(vec![r, c], out, op_name)?;
        let rg = self.grad_flag(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, KernelError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, KernelError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, KernelError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, KernelError> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    fn unary(
        &mut self,
        op_name: &'static str,
        a: Var,
        f: impl Fn(T) -> T,
        op: Op<T>,
    ) -> Result<Var, KernelError> {
        let t = self.value(a);
        let value = finite_or(
            t.shape().to_vec(),
            t.data().iter().map(|&x| f(x)).collect(),
            op_name,
        )?;
        let rg = self.grad_flag(&[a]);
        Ok(self.push(value, op, rg))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, KernelError> {
        self.unary("neg", a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var, KernelError> {
        self.unary("scale", a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Result<Var, KernelError> {
        self.unary("add_scalar", a, |x| x + c, Op::AddScalar(a, c))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, KernelError> {
        self.unary("exp", a, T::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, KernelError> {
        self.unary("ln", a, T::ln, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, KernelError> {
        self.unary("sqrt", a, T::sqrt, Op::Sqrt(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, KernelError> {
        self.unary("relu", a, |x| x.max(T::zero()), Op::Relu(a))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Result<Var, KernelError> {
        self.unary("clamp", a, |x| x.max(lo).min(hi), Op::Clamp(a, lo, hi))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, KernelError> {
        self.mul(a, a)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var, KernelError> {
        let s = self.value(a).sum();
        let value = finite_or(vec![1, 1], vec![s], "sum_all")?;
        let rg = self.grad_flag(&[a]);
        Ok(self.push(value, Op::SumAll(a), rg))
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var, KernelError> {
        let t = self.value(a);
        let out: Vec<T> = (0..t.rows())
            .map(|i| t.row(i).iter().copied().sum())
            .collect();
        let value = finite_or(vec![t.rows(), 1], out, "sum_rows")?;
        let rg = self.grad_flag(&[a]);
        Ok(self.push(value, Op::SumRows(a), rg))
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var, KernelError> {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for (o, &x) in out.iter_mut().zip(t.row(i)) {
                *o = *o + x;
            }
        }
        let value = finite_or(vec![1, c], out, "sum_cols")?;
        let rg = self.grad_flag(&[a]);
        Ok(self.push(value, Op::SumCols(a), rg))
    }

    /// `x · w + b` with `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, KernelError> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Row-wise `log softmax(z / temperature)`.
    ///
    /// The row maxima are subtracted as constants; softmax is shift
    /// invariant so the gradient is unaffected.
    pub fn log_softmax_rows(&mut self, z: Var, temperature: T) -> Result<Var, KernelError> {
        if !(temperature > T::zero()) {
            return Err(KernelError::Parameter(format!(
                "softmax temperature must be > 0, got {temperature}"
            )));
        }
        let scaled = self.scale(z, T::one() / temperature)?;
        let shifted = self.subtract_row_max(scaled)?;
        let e = self.exp(shifted)?;
        let s = self.sum_rows(e)?;
        let log_s = self.ln(s)?;
        self.sub(shifted, log_s)
    }

    /// Row-wise `softmax(z / temperature)`.
    pub fn softmax_rows(&mut self, z: Var, temperature: T) -> Result<Var, KernelError> {
        if !(temperature > T::zero()) {
            return Err(KernelError::Parameter(format!(
                "softmax temperature must be > 0, got {temperature}"
            )));
        }
        let scaled = self.scale(z, T::one() / temperature)?;
        let shifted = self.subtract_row_max(scaled)?;
        let e = self.exp(shifted)?;
        let s = self.sum_rows(e)?;
        self.div(e, s)
    }

    fn subtract_row_max(&mut self, z: Var) -> Result<Var, KernelError> {
        let t = self.value(z);
        let maxes: Vec<T> = (0..t.rows())
            .map(|i| t.row(i).iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        let m = self.constant(Tensor::from_parts_unchecked(vec![maxes.len(), 1], maxes));
        self.sub(z, m)
    }

    /// Reverse sweep from `output`, which must hold a single element.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>, KernelError> {
        if self.value(output).len() != 1 {
            return Err(KernelError::InvalidShape(format!(
                "backward needs a scalar output, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![T::one()]);
        let mut visited = 0;

        for idx in (0..=output.0).rev() {
            visited += 1;
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let mut out = Vec::with_capacity(grads.len());
        for (idx, g) in grads.into_iter().enumerate() {
            let node = &self.nodes[idx];
            out.push(match g {
                Some(g) if node.requires_grad => {
                    Some(finite_or(node.value.shape().to_vec(), g, "backward")?)
                }
                _ => None,
            });
        }
        Ok(Gradients {
            grads: out,
            shapes: self.nodes[..=output.0]
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
            visited,
        })
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = &node.value;
        let (r, c) = (out.rows(), out.cols());
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = self.value(a);
                let tb = self.value(b);
                let k = ta.cols();
                if self.nodes[a.0].requires_grad {
                    // dA = G · Bᵀ
                    let ga = slot(grads, a, ta.len());
                    for i in 0..r {
                        for p in 0..k {
                            let mut s = T::zero();
                            for j in 0..c {
                                s = s + g[i * c + j] * tb.data()[p * c + j];
                            }
                            ga[i * k + p] = ga[i * k + p] + s;
                        }
                    }
                }
                if self.nodes[b.0].requires_grad {
                    // dB = Aᵀ · G
                    let gb = slot(grads, b, tb.len());
                    for i in 0..r {
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av == T::zero() {
                                continue;
                            }
                            for j in 0..c {
                                gb[p * c + j] = gb[p * c + j] + av * g[i * c + j];
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                if self.nodes[a.0].requires_grad {
                    // out is c_in × r_in, so out[i][j] = a[j][i]
                    let ga = slot(grads, a, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            ga[j * r + i] = ga[j * r + i] + g[i * c + j];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate_broadcast(a, r, c, grads, |i, j| g[i * c + j]);
                self.accumulate_broadcast(b, r, c, grads, |i, j| g[i * c + j]);
            }
            Op::Sub(a, b) => {
                self.accumulate_broadcast(a, r, c, grads, |i, j| g[i * c + j]);
                self.accumulate_broadcast(b, r, c, grads, |i, j| -g[i * c + j]);
            }
            Op::Mul(a, b) => {
                let ta = self.value(a);
                let tb = self.value(b);
                self.accumulate_broadcast(a, r, c, grads, |i, j| {
                    g[i * c + j] * tb.data()[bidx(tb, i, j)]
                });
                self.accumulate_broadcast(b, r, c, grads, |i, j| {
                    g[i * c + j] * ta.data()[bidx(ta, i, j)]
                });
            }
            Op::Div(a, b) => {
                let ta = self.value(a);
                let tb = self.value(b);
                self.accumulate_broadcast(a, r, c, grads, |i, j| {
                    g[i * c + j] / tb.data()[bidx(tb, i, j)]
                });
                self.accumulate_broadcast(b, r, c, grads, |i, j| {
                    let y = tb.data()[bidx(tb, i, j)];
                    -g[i * c + j] * ta.data()[bidx(ta, i, j)] / (y * y)
                });
            }
            Op::Neg(a) => self.accumulate_unary(a, g, out.data(), grads, |_, _| -T::one()),
            Op::Scale(a, k) => self.accumulate_unary(a, g, out.data(), grads, |_, _| k),
            Op::AddScalar(a, _) => self.accumulate_unary(a, g, out.data(), grads, |_, _| T::one()),
            Op::Exp(a) => self.accumulate_unary(a, g, out.data(), grads, |_, y| y),
            Op::Ln(a) => self.accumulate_unary(a, g, out.data(), grads, |x, _| T::one() / x),
            Op::Sqrt(a) => self.accumulate_unary(a, g, out.data(), grads, |_, y| T::lit(0.5) / y),
            Op::Relu(a) => self.accumulate_unary(a, g, out.data(), grads, |x, _| {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }),
            Op::Clamp(a, lo, hi) => self.accumulate_unary(a, g, out.data(), grads, |x, _| {
                if x < lo || x > hi {
                    T::zero()
                } else {
                    T::one()
                }
            }),
            Op::SumAll(a) => {
                if self.nodes[a.0].requires_grad {
                    let n = self.value(a).len();
                    let ga = slot(grads, a, n);
                    for v in ga.iter_mut() {
                        *v = *v + g[0];
                    }
                }
            }
            Op::SumRows(a) => {
                if self.nodes[a.0].requires_grad {
                    let (ra, ca) = self.dims(a);
                    let ga = slot(grads, a, ra * ca);
                    for i in 0..ra {
                        for j in 0..ca {
                            ga[i * ca + j] = ga[i * ca + j] + g[i];
                        }
                    }
                }
            }
            Op::SumCols(a) => {
                if self.nodes[a.0].requires_grad {
                    let (ra, ca) = self.dims(a);
                    let ga = slot(grads, a, ra * ca);
                    for i in 0..ra {
                        for j in 0..ca {
                            ga[i * ca + j] = ga[i * ca + j] + g[j];
                        }
                    }
                }
            }
        }
    }

    /// Adds `local(i, j)` for every output cell into the (possibly
    /// broadcast) input cell it was read from.
    fn accumulate_broadcast(
        &self,
        a: Var,
        r: usize,
        c: usize,
        grads: &mut [Option<Vec<T>>],
        local: impl Fn(usize, usize) -> T,
    ) {
        if !self.nodes[a.0].requires_grad {
            return;
        }
        let ta = self.value(a);
        let ga = slot(grads, a, ta.len());
        for i in 0..r {
            for j in 0..c {
                let k = bidx(ta, i, j);
                ga[k] = ga[k] + local(i, j);
            }
        }
    }

    /// `d(input) += g * dy/dx(x, y)` elementwise, `y` being the op output.
    fn accumulate_unary(
        &self,
        a: Var,
        g: &[T],
        y: &[T],
        grads: &mut [Option<Vec<T>>],
        deriv: impl Fn(T, T) -> T,
    ) {
        if !self.nodes[a.0].requires_grad {
            return;
        }
        let x = self.value(a).data();
        let ga = slot(grads, a, x.len());
        for k in 0..x.len() {
            ga[k] = ga[k] + g[k] * deriv(x[k], y[k]);
        }
    }
}

/// Index into a possibly broadcast operand.
fn bidx<T: Scalar>(t: &Tensor<T>, i: usize, j: usize) -> usize {
    let (r, c) = (t.rows(), t.cols());
    let ii = if r == 1 { 0 } else { i };
    let jj = if c == 1 { 0 } else { j };
    ii * c + jj
}

fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, n: usize) -> &mut Vec<T> {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
    visited: usize,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `v`; all zeros for constants and for values
    /// the output does not depend on.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            Some(None) => Tensor::zeros(&self.shapes[v.0]),
            None => panic!("variable {} recorded after the differentiated output", v.0),
        }
    }

    /// Number of nodes the reverse sweep passed over.
    pub fn visited(&self) -> usize {
        self.visited
    }
}
