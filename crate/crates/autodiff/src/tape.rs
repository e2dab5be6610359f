//! The recording tape and its differentiable operations.
//!
//! Every vector-Jacobian product is itself expressed with tape operations,
//! so gradients computed with `create_graph = true` can be differentiated
//! again (double backpropagation).

use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::array::{broadcast_shapes, Array};
use crate::Float;

#[derive(Clone, Debug)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    AddScalar,
    Square,
    Sqrt,
    Sigmoid,
    Softplus,
    Tanh,
    MatMul { ta: bool, tb: bool },
    SumTo,
    BroadcastTo,
    Reshape,
    Im2Col { k: usize, pad: usize },
    Col2Im { k: usize, pad: usize },
    Up2,
    Up2Adjoint,
    Down2,
    Down2Adjoint,
    ConcatLast,
    SliceLast { start: usize },
    PadLast { start: usize },
}

struct Node<T> {
    value: Arc<Array<T>>,
    op: Option<Op>,
    inputs: Vec<usize>,
    requires_grad: bool,
}

/// A linear recording of array computations.
pub struct Tape<T: Float> {
    nodes: RefCell<Vec<Node<T>>>,
    grad_enabled: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Float> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Float> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            grad_enabled: Cell::new(true),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_node(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Leaf variable; gradients can be requested for it when
    /// `requires_grad` is set.
    pub fn leaf(&self, value: Array<T>, requires_grad: bool) -> Var<'_, T> {
        self.shared_leaf(Arc::new(value), requires_grad)
    }

    /// Leaf variable sharing storage with the caller (used for parameters).
    pub fn shared_leaf(&self, value: Arc<Array<T>>, requires_grad: bool) -> Var<'_, T> {
        self.push_node(Node {
            value,
            op: None,
            inputs: Vec::new(),
            requires_grad,
        })
    }

    pub fn constant(&self, value: Array<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_, T> {
        self.constant(Array::scalar(T::from_f64(v)))
    }

    fn record(&self, value: Array<T>, op: Op, inputs: &[Var<'_, T>]) -> Var<'_, T> {
        let requires_grad = self.grad_enabled.get() && {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| nodes[v.id].requires_grad)
        };
        if requires_grad {
            self.push_node(Node {
                value: Arc::new(value),
                op: Some(op),
                inputs: inputs.iter().map(|v| v.id).collect(),
                requires_grad,
            })
        } else {
            self.constant(value)
        }
    }

    /// Runs `f` without recording differentiable history.
    pub fn no_grad<R>(&self, f: impl FnOnce() -> R) -> R {
        let prev = self.grad_enabled.replace(false);
        let out = f();
        self.grad_enabled.set(prev);
        out
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// With `create_graph` the returned gradients are themselves recorded
    /// and can be differentiated further. Variables in `wrt` that do not
    /// influence `output` (or do not require grad) get zero gradients.
    pub fn grad<'t>(
        &'t self,
        output: Var<'t, T>,
        wrt: &[Var<'t, T>],
        create_graph: bool,
    ) -> Vec<Var<'t, T>> {
        let n = output.id + 1;
        let mut needed = vec![false; n];
        {
            let nodes = self.nodes.borrow();
            for w in wrt {
                if w.id < n && nodes[w.id].requires_grad {
                    needed[w.id] = true;
                }
            }
            for i in 0..n {
                if !needed[i] && nodes[i].requires_grad && nodes[i].inputs.iter().any(|&j| needed[j]) {
                    needed[i] = true;
                }
            }
        }

        let prev = self.grad_enabled.replace(create_graph);
        let mut grads: Vec<Option<Var<'t, T>>> = vec![None; n];
        grads[output.id] = Some(self.constant(Array::ones(&output.shape())));
        for i in (0..n).rev() {
            if !needed[i] {
                continue;
            }
            let Some(g) = grads[i] else { continue };
            let (op, inputs) = {
                let nodes = self.nodes.borrow();
                match &nodes[i].op {
                    Some(op) => (op.clone(), nodes[i].inputs.clone()),
                    None => continue,
                }
            };
            let in_vars: Vec<Var<'t, T>> = inputs.iter().map(|&id| Var { tape: self, id }).collect();
            let need: Vec<bool> = inputs.iter().map(|&j| needed[j]).collect();
            let out = Var { tape: self, id: i };
            let gs = vjp(&op, &in_vars, out, g, &need);
            for ((&j, gj), nj) in inputs.iter().zip(gs).zip(need) {
                if let (Some(gj), true) = (gj, nj) {
                    grads[j] = Some(match grads[j] {
                        Some(acc) => acc + gj,
                        None => gj,
                    });
                }
            }
        }
        self.grad_enabled.set(prev);

        wrt.iter()
            .map(|w| match grads.get(w.id).copied().flatten() {
                Some(g) => g,
                None => self.constant(Array::zeros(&w.shape())),
            })
            .collect()
    }
}

fn vjp<'t, T: Float>(
    op: &Op,
    x: &[Var<'t, T>],
    out: Var<'t, T>,
    g: Var<'t, T>,
    need: &[bool],
) -> Vec<Option<Var<'t, T>>> {
    let when = |i: usize, f: &dyn Fn() -> Var<'t, T>| if need[i] { Some(f()) } else { None };
    match op {
        Op::Add => vec![
            when(0, &|| g.sum_to(&x[0].shape())),
            when(1, &|| g.sum_to(&x[1].shape())),
        ],
        Op::Sub => vec![
            when(0, &|| g.sum_to(&x[0].shape())),
            when(1, &|| (-g).sum_to(&x[1].shape())),
        ],
        Op::Mul => vec![
            when(0, &|| (g * x[1]).sum_to(&x[0].shape())),
            when(1, &|| (g * x[0]).sum_to(&x[1].shape())),
        ],
        Op::Div => vec![
            when(0, &|| (g / x[1]).sum_to(&x[0].shape())),
            when(1, &|| (-(g * out / x[1])).sum_to(&x[1].shape())),
        ],
        Op::Neg => vec![when(0, &|| -g)],
        Op::Scale(c) => vec![when(0, &|| g.scale(*c))],
        Op::AddScalar => vec![when(0, &|| g)],
        Op::Square => vec![when(0, &|| (g * x[0]).scale(2.0))],
        Op::Sqrt => vec![when(0, &|| (g / out).scale(0.5))],
        Op::Sigmoid => vec![when(0, &|| g * (out - out.square()))],
        Op::Softplus => vec![when(0, &|| g * x[0].sigmoid())],
        Op::Tanh => vec![when(0, &|| g * (-out.square()).add_scalar(1.0))],
        Op::MatMul { ta, tb } => {
            let (a, b) = (x[0], x[1]);
            vec![
                when(0, &|| {
                    if *ta {
                        b.matmul_t(g, *tb, true)
                    } else {
                        g.matmul_t(b, false, !*tb)
                    }
                }),
                when(1, &|| {
                    if *tb {
                        g.matmul_t(a, true, *ta)
                    } else {
                        a.matmul_t(g, !*ta, false)
                    }
                }),
            ]
        }
        Op::SumTo => vec![when(0, &|| g.broadcast_to(&x[0].shape()))],
        Op::BroadcastTo => vec![when(0, &|| g.sum_to(&x[0].shape()))],
        Op::Reshape => vec![when(0, &|| g.reshape(&x[0].shape()))],
        Op::Im2Col { k, pad } => {
            let s = x[0].shape();
            vec![when(0, &|| g.col2im(s[0], s[1], s[2], *k, *pad))]
        }
        Op::Col2Im { k, pad } => vec![when(0, &|| g.im2col(*k, *pad))],
        Op::Up2 => vec![when(0, &|| g.up2_adjoint())],
        Op::Up2Adjoint => vec![when(0, &|| g.up2())],
        Op::Down2 => vec![when(0, &|| g.down2_adjoint())],
        Op::Down2Adjoint => vec![when(0, &|| g.down2())],
        Op::ConcatLast => {
            let mut start = 0;
            x.iter()
                .enumerate()
                .map(|(i, xi)| {
                    let len = *xi.shape().last().unwrap();
                    let s = start;
                    start += len;
                    when(i, &|| g.slice_last(s, len))
                })
                .collect()
        }
        Op::SliceLast { start } => {
            let total = *x[0].shape().last().unwrap();
            vec![when(0, &|| g.pad_last(*start, total))]
        }
        Op::PadLast { start } => {
            let len = *x[0].shape().last().unwrap();
            vec![when(0, &|| g.slice_last(*start, len))]
        }
    }
}

fn sigmoid<T: Float>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(t))` evaluated as `max(t, 0) + log1p(exp(-|t|))`.
pub fn softplus<T: Float>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

impl<'t, T: Float> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Arc<Array<T>> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Value of a one-element variable.
    pub fn item(&self) -> T {
        self.value().item()
    }

    /// Same value, cut off from the recorded history.
    pub fn detach(&self) -> Var<'t, T> {
        self.tape.shared_leaf(self.value(), false)
    }

    fn unary(&self, op: Op, f: impl Fn(&Array<T>) -> Array<T>) -> Var<'t, T> {
        let v = f(&self.value());
        self.tape.record(v, op, &[*self])
    }

    fn binary(&self, other: Var<'t, T>, op: Op, f: impl Fn(T, T) -> T) -> Var<'t, T> {
        let v = self.value().zip_broadcast(&other.value(), f);
        self.tape.record(v, op, &[*self, other])
    }

    pub fn scale(&self, c: f64) -> Var<'t, T> {
        let cc = T::from_f64(c);
        self.unary(Op::Scale(c), |a| a.map(|v| v * cc))
    }

    pub fn add_scalar(&self, c: f64) -> Var<'t, T> {
        let cc = T::from_f64(c);
        self.unary(Op::AddScalar, |a| a.map(|v| v + cc))
    }

    pub fn square(&self) -> Var<'t, T> {
        self.unary(Op::Square, |a| a.map(|v| v * v))
    }

    pub fn sqrt(&self) -> Var<'t, T> {
        self.unary(Op::Sqrt, |a| a.map(|v| v.sqrt()))
    }

    pub fn sigmoid(&self) -> Var<'t, T> {
        self.unary(Op::Sigmoid, |a| a.map(sigmoid))
    }

    pub fn softplus(&self) -> Var<'t, T> {
        self.unary(Op::Softplus, |a| a.map(softplus))
    }

    pub fn tanh(&self) -> Var<'t, T> {
        self.unary(Op::Tanh, |a| a.map(|v| v.tanh()))
    }

    /// Leaky rectifier, recorded as multiplication by a constant slope mask
    /// (its second derivative is zero almost everywhere).
    pub fn leaky_relu(&self, slope: f64) -> Var<'t, T> {
        let s = T::from_f64(slope);
        let mask = self.value().map(|v| if v > T::zero() { T::one() } else { s });
        *self * self.tape.constant(mask)
    }

    pub fn matmul(&self, other: Var<'t, T>) -> Var<'t, T> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) @ op(other)` where `op` transposes when the flag is set.
    pub fn matmul_t(&self, other: Var<'t, T>, ta: bool, tb: bool) -> Var<'t, T> {
        let v = self.value().matmul(&other.value(), ta, tb);
        self.tape.record(v, Op::MatMul { ta, tb }, &[*self, other])
    }

    pub fn sum_to(&self, shape: &[usize]) -> Var<'t, T> {
        if self.shape() == shape {
            return *self;
        }
        self.unary(Op::SumTo, |a| a.sum_to(shape))
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Var<'t, T> {
        if self.shape() == shape {
            return *self;
        }
        self.unary(Op::BroadcastTo, |a| a.broadcast_to(shape))
    }

    pub fn reshape(&self, shape: &[usize]) -> Var<'t, T> {
        if self.shape() == shape {
            return *self;
        }
        self.unary(Op::Reshape, |a| a.clone().reshape(shape))
    }

    /// Sum of all elements as a rank-0 value.
    pub fn sum(&self) -> Var<'t, T> {
        self.sum_to(&[])
    }

    pub fn mean(&self) -> Var<'t, T> {
        let n = self.value().len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Sum over `axes`, keeping them as size-1 dimensions.
    pub fn sum_axes_keepdim(&self, axes: &[usize]) -> Var<'t, T> {
        let mut shape = self.shape();
        for &a in axes {
            shape[a] = 1;
        }
        self.sum_to(&shape)
    }

    pub fn mean_axes_keepdim(&self, axes: &[usize]) -> Var<'t, T> {
        let s = self.shape();
        let count: usize = axes.iter().map(|&a| s[a]).product();
        self.sum_axes_keepdim(axes).scale(1.0 / count as f64)
    }

    pub fn im2col(&self, k: usize, pad: usize) -> Var<'t, T> {
        self.unary(Op::Im2Col { k, pad }, |a| a.im2col(k, pad))
    }

    pub fn col2im(&self, n: usize, h: usize, w: usize, k: usize, pad: usize) -> Var<'t, T> {
        self.unary(Op::Col2Im { k, pad }, |a| a.col2im(n, h, w, k, pad))
    }

    pub fn up2(&self) -> Var<'t, T> {
        self.unary(Op::Up2, Array::up2)
    }

    pub fn up2_adjoint(&self) -> Var<'t, T> {
        self.unary(Op::Up2Adjoint, Array::up2_adjoint)
    }

    pub fn down2(&self) -> Var<'t, T> {
        self.unary(Op::Down2, Array::down2)
    }

    pub fn down2_adjoint(&self) -> Var<'t, T> {
        self.unary(Op::Down2Adjoint, Array::down2_adjoint)
    }

    pub fn concat_last(parts: &[Var<'t, T>]) -> Var<'t, T> {
        let values: Vec<Arc<Array<T>>> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Array<T>> = values.iter().map(|v| v.as_ref()).collect();
        let v = Array::concat_last(&refs);
        parts[0].tape.record(v, Op::ConcatLast, parts)
    }

    pub fn slice_last(&self, start: usize, len: usize) -> Var<'t, T> {
        self.unary(Op::SliceLast { start }, |a| a.slice_last(start, len))
    }

    pub fn pad_last(&self, start: usize, total: usize) -> Var<'t, T> {
        self.unary(Op::PadLast { start }, |a| a.pad_last(start, total))
    }
}

impl<T: Float> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:expr, $f:expr) => {
        impl<'t, T: Float> ops::$trait for Var<'t, T> {
            type Output = Var<'t, T>;
            fn $method(self, rhs: Var<'t, T>) -> Var<'t, T> {
                assert!(
                    broadcast_shapes(&self.shape(), &rhs.shape()).is_some(),
                    "incompatible shapes {:?} and {:?}",
                    self.shape(),
                    rhs.shape()
                );
                self.binary(rhs, $op, $f)
            }
        }
    };
}

binop!(Add, add, Op::Add, |a, b| a + b);
binop!(Sub, sub, Op::Sub, |a, b| a - b);
binop!(Mul, mul, Op::Mul, |a, b| a * b);
binop!(Div, div, Op::Div, |a, b| a / b);

impl<'t, T: Float> ops::Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Var<'t, T> {
        self.unary(Op::Neg, |a| a.map(|v| -v))
    }
}
