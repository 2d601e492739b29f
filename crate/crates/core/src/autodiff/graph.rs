use super::kernels::{self, ConvGeom};
use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
    },
    ConvInputGrad {
        gy: Var,
        w: Var,
        stride: usize,
        pad: usize,
    },
    ConvWeightGrad {
        x: Var,
        gy: Var,
        stride: usize,
        pad: usize,
    },
    BiasAdd(Var, Var),
    ChannelSum(Var),
    ChannelBroadcast(Var),
    /// `g · (x > 0 ? 1 : slope)`; leaky ReLU is `LeakyMask(x, x)`.
    LeakyMask {
        g: Var,
        x: Var,
        slope: f64,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Pow(Var, f64),
    Sum(Var),
    Expand(Var),
    SumPerBatch(Var),
    ExpandPerBatch(Var),
    Reshape(Var),
    UpsampleNearest(Var, usize),
    BlockSum(Var, usize),
    Bilinear(Var, usize),
    BilinearTranspose(Var, usize),
}

impl Op {
    fn inputs(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            Conv2d { x, w, .. } => [Some(x), Some(w)],
            ConvInputGrad { gy, w, .. } => [Some(gy), Some(w)],
            ConvWeightGrad { x, gy, .. } => [Some(x), Some(gy)],
            BiasAdd(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) => [Some(a), Some(b)],
            LeakyMask { g, x, .. } => [Some(g), Some(x)],
            ChannelSum(a)
            | ChannelBroadcast(a)
            | Scale(a, _)
            | AddScalar(a)
            | Pow(a, _)
            | Sum(a)
            | Expand(a)
            | SumPerBatch(a)
            | ExpandPerBatch(a)
            | Reshape(a)
            | UpsampleNearest(a, _)
            | BlockSum(a, _)
            | Bilinear(a, _)
            | BilinearTranspose(a, _) => [Some(a), None],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Options for [`Graph::grad_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GradOptions {
    /// Record the gradient computation so the returned gradients are differentiable.
    pub create_graph: bool,
    /// Return zeros instead of failing for inputs the output does not depend on.
    pub allow_unused: bool,
}

/// Append-only tape of tensor operations.
///
/// Values are computed eagerly as nodes are added. Every node's inputs have
/// smaller indices, so the tape is acyclic by construction.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A constant copy of `v`'s current value, cut off from the tape.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> Var {
        let requires_grad = op
            .inputs()
            .iter()
            .flatten()
            .any(|v| self.nodes[v.0].requires_grad);
        let value = Tensor::new(shape, data).expect("op produced inconsistent shape");
        self.push(value, op, requires_grad)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    // ----- convolution family -------------------------------------------------

    /// 2-D cross-correlation of `x: [B,C,H,W]` with `kernel: [O,C,kh,kw]`, plus an
    /// optional per-channel `bias: [O]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let y = self.conv2d_nobias(x, kernel, stride, padding)?;
        match bias {
            Some(b) => self.bias_add(y, b),
            None => Ok(y),
        }
    }

    fn conv2d_nobias(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let [b, c, h, wd] = self.value(x).dims4("conv2d")?;
        let [o, kc, kh, kw] = self.value(w).dims4("conv2d")?;
        if stride == 0 {
            return Err(Error::invalid("conv2d stride must be positive"));
        }
        if kc != c {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c} channels, kernel expects {kc}"),
            ));
        }
        if kh > h + 2 * pad || kw > wd + 2 * pad || kh == 0 || kw == 0 {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "kernel {kh}x{kw} does not fit padded input {}x{}",
                    h + 2 * pad,
                    wd + 2 * pad
                ),
            ));
        }
        let g = ConvGeom {
            batch: b,
            in_ch: c,
            in_h: h,
            in_w: wd,
            out_ch: o,
            kh,
            kw,
            stride,
            pad,
        };
        let data = kernels::conv2d(self.data(x), self.data(w), &g);
        Ok(self.push_op(
            vec![b, o, g.out_h(), g.out_w()],
            data,
            Op::Conv2d { x, w, stride, pad },
        ))
    }

    fn conv_input_grad(
        &mut self,
        gy: Var,
        w: Var,
        stride: usize,
        pad: usize,
        in_h: usize,
        in_w: usize,
    ) -> Var {
        let [b, o, oh, ow] = self
            .value(gy)
            .dims4("conv_input_grad")
            .expect("rank checked at forward");
        let [_, c, kh, kw] = self
            .value(w)
            .dims4("conv_input_grad")
            .expect("rank checked at forward");
        let g = ConvGeom {
            batch: b,
            in_ch: c,
            in_h,
            in_w,
            out_ch: o,
            kh,
            kw,
            stride,
            pad,
        };
        debug_assert_eq!((g.out_h(), g.out_w()), (oh, ow));
        let data = kernels::conv2d_input_grad(self.data(gy), self.data(w), &g);
        self.push_op(
            vec![b, c, in_h, in_w],
            data,
            Op::ConvInputGrad { gy, w, stride, pad },
        )
    }

    fn conv_weight_grad(
        &mut self,
        x: Var,
        gy: Var,
        stride: usize,
        pad: usize,
        kh: usize,
        kw: usize,
    ) -> Var {
        let [b, c, h, wd] = self
            .value(x)
            .dims4("conv_weight_grad")
            .expect("rank checked at forward");
        let [_, o, oh, ow] = self
            .value(gy)
            .dims4("conv_weight_grad")
            .expect("rank checked at forward");
        let g = ConvGeom {
            batch: b,
            in_ch: c,
            in_h: h,
            in_w: wd,
            out_ch: o,
            kh,
            kw,
            stride,
            pad,
        };
        debug_assert_eq!((g.out_h(), g.out_w()), (oh, ow));
        let data = kernels::conv2d_weight_grad(self.data(x), self.data(gy), &g);
        self.push_op(
            vec![o, c, kh, kw],
            data,
            Op::ConvWeightGrad { x, gy, stride, pad },
        )
    }

    /// Adds `bias: [C]` to each channel of `x: [B,C,...]`.
    pub fn bias_add(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let bs = self.shape(bias);
        if xs.len() < 2 || bs != [xs[1]] {
            return Err(Error::shape(
                "bias_add",
                format!("bias {bs:?} does not match channels of {xs:?}"),
            ));
        }
        let plane = numel(&xs[2..]);
        let data = kernels::bias_add(self.data(x), self.data(bias), plane);
        Ok(self.push_op(xs, data, Op::BiasAdd(x, bias)))
    }

    fn channel_sum(&mut self, x: Var) -> Var {
        let xs = self.shape(x).to_vec();
        let plane = numel(&xs[2..]);
        let data = kernels::channel_sum(self.data(x), xs[1], plane);
        self.push_op(vec![xs[1]], data, Op::ChannelSum(x))
    }

    fn channel_broadcast(&mut self, b: Var, shape: Vec<usize>) -> Var {
        let plane = numel(&shape[2..]);
        let data = kernels::channel_broadcast(self.data(b), shape[0], plane);
        self.push_op(shape.clone(), data, Op::ChannelBroadcast(b))
    }

    // ----- elementwise --------------------------------------------------------

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push_op(shape, data, op)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push_op(shape, data, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.binary(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.binary(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.binary(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.binary(a, a, |x, y| x * y, Op::Mul(a, a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    /// `x^p`, with the pole of negative powers at zero mapped to zero so
    /// that `sqrt` has the zero subgradient at the origin.
    pub fn pow(&mut self, a: Var, p: f64) -> Var {
        self.unary(a, |x| safe_pow(x, p), Op::Pow(a, p))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.pow(a, 0.5)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.leaky_mask(x, x, slope)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_mask(x, x, 0.0)
    }

    fn leaky_mask(&mut self, g: Var, x: Var, slope: f64) -> Var {
        self.binary(
            g,
            x,
            |gv, xv| if xv > 0.0 { gv } else { slope * gv },
            Op::LeakyMask { g, x, slope },
        )
    }

    // ----- reductions and reshaping -------------------------------------------

    fn non_empty(&self, op: &'static str, x: Var) -> Result<()> {
        if self.value(x).is_empty() {
            return Err(Error::shape(op, "empty tensor"));
        }
        Ok(())
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.non_empty("sum", x)?;
        let s = self.data(x).iter().sum();
        Ok(self.push_op(Vec::new(), vec![s], Op::Sum(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        let s = self.sum(x)?;
        Ok(self.scale(s, 1.0 / n as f64))
    }

    fn expand(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let v = self.data(x)[0];
        let data = vec![v; numel(&shape)];
        self.push_op(shape.clone(), data, Op::Expand(x))
    }

    /// Sums every axis except the first: `[B, ...] -> [B]`.
    pub fn sum_per_batch(&mut self, x: Var) -> Result<Var> {
        self.non_empty("sum_per_batch", x)?;
        let xs = self.shape(x);
        if xs.len() < 2 {
            return Err(Error::shape(
                "sum_per_batch",
                format!("needs rank >= 2, got {xs:?}"),
            ));
        }
        let b = xs[0];
        let data: Vec<f64> = self
            .data(x)
            .chunks(numel(&xs[1..]))
            .map(|c| c.iter().sum())
            .collect();
        Ok(self.push_op(vec![b], data, Op::SumPerBatch(x)))
    }

    fn expand_per_batch(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let inner = numel(&shape[1..]);
        let data = self
            .data(x)
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, inner))
            .collect();
        self.push_op(shape.clone(), data, Op::ExpandPerBatch(x))
    }

    /// Euclidean norm of each batch element: `[B, ...] -> [B]`.
    pub fn l2_norm_per_batch(&mut self, x: Var) -> Result<Var> {
        let sq = self.square(x);
        let ss = self.sum_per_batch(sq)?;
        Ok(self.sqrt(ss))
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        if numel(&shape) != self.value(x).len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let data = self.data(x).to_vec();
        Ok(self.push_op(shape.clone(), data, Op::Reshape(x)))
    }

    // ----- resampling ---------------------------------------------------------

    pub fn upsample(&mut self, x: Var, factor: usize, mode: UpsampleMode) -> Result<Var> {
        let [b, c, h, w] = self.value(x).dims4("upsample")?;
        if factor == 0 {
            return Err(Error::invalid("upsample factor must be positive"));
        }
        let shape = vec![b, c, h * factor, w * factor];
        Ok(match mode {
            UpsampleMode::Nearest => {
                let data = kernels::upsample_nearest(self.data(x), b * c, h, w, factor);
                self.push_op(shape, data, Op::UpsampleNearest(x, factor))
            }
            UpsampleMode::Bilinear => {
                let data = kernels::bilinear(self.data(x), b * c, h, w, factor);
                self.push_op(shape, data, Op::Bilinear(x, factor))
            }
        })
    }

    fn block_sum(&mut self, x: Var, f: usize) -> Var {
        let [b, c, h, w] = self
            .value(x)
            .dims4("block_sum")
            .expect("rank checked at forward");
        let data = kernels::block_sum(self.data(x), b * c, h, w, f);
        self.push_op(vec![b, c, h / f, w / f], data, Op::BlockSum(x, f))
    }

    fn bilinear_transpose(&mut self, x: Var, f: usize) -> Var {
        let [b, c, h, w] = self
            .value(x)
            .dims4("bilinear_transpose")
            .expect("rank checked at forward");
        let data = kernels::bilinear_transpose(self.data(x), b * c, h / f, w / f, f);
        self.push_op(vec![b, c, h / f, w / f], data, Op::BilinearTranspose(x, f))
    }

    // ----- differentiation ----------------------------------------------------

    /// First-order gradients of a scalar `output` as plain tensors. The tape is
    /// left as it was before the call.
    pub fn backward(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let mark = self.nodes.len();
        let grads = self.grad_vars(output, wrt, GradOptions::default())?;
        let out = grads
            .into_iter()
            .map(|g| self.nodes[g.0].value.clone())
            .collect();
        self.nodes.truncate(mark);
        Ok(out)
    }

    /// Gradients of a scalar `output` as graph nodes.
    ///
    /// With `create_graph` the returned nodes stay attached to the tape and can be
    /// differentiated again; otherwise they are detached constants.
    pub fn grad(&mut self, output: Var, wrt: &[Var], create_graph: bool) -> Result<Vec<Var>> {
        self.grad_with(
            output,
            wrt,
            GradOptions {
                create_graph,
                allow_unused: false,
            },
        )
    }

    pub fn grad_with(&mut self, output: Var, wrt: &[Var], opts: GradOptions) -> Result<Vec<Var>> {
        if opts.create_graph {
            return self.grad_vars(output, wrt, opts);
        }
        let mark = self.nodes.len();
        let grads = self.grad_vars(output, wrt, opts)?;
        let values: Vec<Tensor> = grads
            .iter()
            .map(|g| self.nodes[g.0].value.clone())
            .collect();
        self.nodes.truncate(mark);
        Ok(values.into_iter().map(|t| self.constant(t)).collect())
    }

    fn grad_vars(&mut self, output: Var, wrt: &[Var], opts: GradOptions) -> Result<Vec<Var>> {
        let out_len = self.value(output).len();
        if out_len != 1 {
            return Err(Error::Gradient(format!(
                "output must be scalar, has shape {:?}",
                self.shape(output)
            )));
        }
        let n = output.0 + 1;

        // reach[i]: output depends on node i.
        let mut reach = vec![false; n];
        reach[output.0] = true;
        for i in (0..n).rev() {
            if reach[i] {
                for v in self.nodes[i].op.inputs().into_iter().flatten() {
                    reach[v.0] = true;
                }
            }
        }
        // needs[i]: node i depends on some requested input.
        let mut needs = vec![false; n];
        for &v in wrt {
            if v.0 < n {
                needs[v.0] = true;
            }
        }
        for i in 0..n {
            if !needs[i]
                && self.nodes[i]
                    .op
                    .inputs()
                    .into_iter()
                    .flatten()
                    .any(|v| needs[v.0])
            {
                needs[i] = true;
            }
        }
        for &v in wrt {
            if (v.0 >= n || !reach[v.0]) && !opts.allow_unused {
                return Err(Error::Gradient(format!(
                    "node {} is not reachable from the output",
                    v.0
                )));
            }
        }

        let mut grads: Vec<Option<Var>> = vec![None; n];
        let seed = Tensor::full(self.shape(output).to_vec(), 1.0);
        grads[output.0] = Some(self.constant(seed));
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !needs[i] || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            for (input, contrib) in self.adjoint(i, &op, g, &needs)? {
                grads[input.0] = Some(match grads[input.0] {
                    None => contrib,
                    Some(prev) => self.add(prev, contrib)?,
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|&v| match grads.get(v.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let zeros = Tensor::zeros(self.shape(v).to_vec());
                    self.constant(zeros)
                }
            })
            .collect())
    }

    /// Contributions of node `i`'s upstream gradient `g` to each of its inputs.
    fn adjoint(&mut self, i: usize, op: &Op, g: Var, needs: &[bool]) -> Result<Vec<(Var, Var)>> {
        let want = |v: Var| needs[v.0];
        let mut out = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::Conv2d { x, w, stride, pad } => {
                if want(x) {
                    let [_, _, h, wd] = self.value(x).dims4("conv2d")?;
                    out.push((x, self.conv_input_grad(g, w, stride, pad, h, wd)));
                }
                if want(w) {
                    let [_, _, kh, kw] = self.value(w).dims4("conv2d")?;
                    out.push((w, self.conv_weight_grad(x, g, stride, pad, kh, kw)));
                }
            }
            Op::ConvInputGrad { gy, w, stride, pad } => {
                if want(gy) {
                    out.push((gy, self.conv2d_nobias(g, w, stride, pad)?));
                }
                if want(w) {
                    let [_, _, kh, kw] = self.value(w).dims4("conv_input_grad")?;
                    out.push((w, self.conv_weight_grad(g, gy, stride, pad, kh, kw)));
                }
            }
            Op::ConvWeightGrad { x, gy, stride, pad } => {
                if want(x) {
                    let [_, _, h, wd] = self.value(x).dims4("conv_weight_grad")?;
                    out.push((x, self.conv_input_grad(gy, g, stride, pad, h, wd)));
                }
                if want(gy) {
                    out.push((gy, self.conv2d_nobias(x, g, stride, pad)?));
                }
            }
            Op::BiasAdd(x, b) => {
                if want(x) {
                    out.push((x, g));
                }
                if want(b) {
                    out.push((b, self.channel_sum(g)));
                }
            }
            Op::ChannelSum(x) => {
                let shape = self.shape(x).to_vec();
                out.push((x, self.channel_broadcast(g, shape)));
            }
            Op::ChannelBroadcast(b) => out.push((b, self.channel_sum(g))),
            Op::LeakyMask { g: inner, x, slope } => {
                // piecewise constant in `x`: no contribution there
                if want(inner) {
                    out.push((inner, self.leaky_mask(g, x, slope)));
                }
            }
            Op::Add(a, b) => {
                if want(a) {
                    out.push((a, g));
                }
                if want(b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if want(a) {
                    out.push((a, g));
                }
                if want(b) {
                    out.push((b, self.neg(g)));
                }
            }
            Op::Mul(a, b) => {
                if want(a) {
                    out.push((a, self.mul(g, b)?));
                }
                if want(b) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::Scale(a, c) => out.push((a, self.scale(g, c))),
            Op::AddScalar(a) => out.push((a, g)),
            Op::Pow(a, p) => {
                let d = self.pow(a, p - 1.0);
                let d = self.scale(d, p);
                out.push((a, self.mul(g, d)?));
            }
            Op::Sum(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.expand(g, shape)));
            }
            Op::Expand(a) => out.push((a, self.sum(g)?)),
            Op::SumPerBatch(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.expand_per_batch(g, shape)));
            }
            Op::ExpandPerBatch(a) => out.push((a, self.sum_per_batch(g)?)),
            Op::Reshape(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.reshape(g, shape)?));
            }
            Op::UpsampleNearest(a, f) => out.push((a, self.block_sum(g, f))),
            Op::BlockSum(a, f) => out.push((a, self.upsample(g, f, UpsampleMode::Nearest)?)),
            Op::Bilinear(a, f) => out.push((a, self.bilinear_transpose(g, f))),
            Op::BilinearTranspose(a, f) => {
                out.push((a, self.upsample(g, f, UpsampleMode::Bilinear)?))
            }
        }
        debug_assert!(out.iter().all(|(v, _)| v.0 < i));
        Ok(out)
    }
}

/// Interpolation used to bring a low-resolution field onto the high-resolution grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpsampleMode {
    Nearest,
    Bilinear,
}

impl std::str::FromStr for UpsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            other => Err(Error::Config(format!("unknown upsample mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for UpsampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
        })
    }
}

fn safe_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 && p < 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}
