//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! A [`Tape`] records every primitive applied during a forward pass
//! (define-by-run; graphs are rebuilt per pass because problem sizes vary
//! across samples). [`Tensor`] is a cheap handle into the tape. Calling
//! [`Tensor::backward`] on a scalar walks the tape once in reverse and
//! returns d(loss)/d(leaf) for every leaf created with `requires_grad`.
//!
//! The primitive set is exactly what the allocator network and its penalty
//! loss need: arithmetic, matrix-vector product, concatenation, reductions,
//! relu/leaky-relu/max, exp, log1p, and softmax over an index subset.
//! Shape misuse is a programming error and panics; there is no broadcasting
//! beyond rank-0 scalars in `mul`/`div`.
//!
//! Subgradient conventions: `relu` and `max_const` use 0 at the kink;
//! `leaky_relu` uses its negative-side slope at 0.

mod grad_check;

pub use grad_check::grad_check;

use std::cell::RefCell;
use std::rc::Rc;

/// Recording tape. Clones share the same underlying storage.
#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    /// True for leaves created with requires_grad and for any node that
    /// (transitively) depends on one; backward skips the rest.
    needs_grad: bool,
    op: Op,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    MatVec(usize, usize),
    Concat(Vec<usize>),
    Sum(usize),
    MaxConst(usize, f64),
    Relu(usize),
    LeakyRelu(usize, f64),
    Exp(usize),
    Ln1p(usize),
    SoftmaxSubset(usize, Vec<usize>),
}

/// Handle to one node of a [`Tape`].
#[derive(Clone)]
pub struct Tensor {
    tape: Tape,
    id: usize,
}

/// Gradients produced by [`Tensor::backward`], keyed by tape node.
pub struct Gradients {
    tape: Tape,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// d(loss)/d(tensor). Leaves that did not influence the loss get zeros.
    pub fn get(&self, t: &Tensor) -> Vec<f64> {
        assert!(
            Rc::ptr_eq(&self.tape.inner, &t.tape.inner),
            "tensor belongs to a different tape"
        );
        match &self.grads[t.id] {
            Some(g) => g.clone(),
            None => vec![0.0; t.len()],
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    fn push(&self, shape: Vec<usize>, data: Vec<f64>, needs_grad: bool, op: Op) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            shape,
            data,
            needs_grad,
            op,
        });
        Tensor {
            tape: self.clone(),
            id,
        }
    }

    /// New leaf tensor. `shape` empty means rank-0 scalar.
    pub fn leaf(&self, shape: &[usize], data: Vec<f64>, requires_grad: bool) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "leaf data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        assert!(shape.iter().all(|&d| d >= 1), "shape entries must be >= 1");
        self.push(shape.to_vec(), data, requires_grad, Op::Leaf)
    }

    /// Constant rank-0 scalar.
    pub fn scalar(&self, v: f64) -> Tensor {
        self.leaf(&[], vec![v], false)
    }

    /// Constant rank-1 vector.
    pub fn vector(&self, data: Vec<f64>) -> Tensor {
        let n = data.len();
        self.leaf(&[n], data, false)
    }

    /// Concatenates scalars and vectors into one vector, in argument order.
    pub fn concat(&self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let mut data = Vec::new();
        let mut ids = Vec::with_capacity(parts.len());
        let mut needs = false;
        for p in parts {
            assert!(
                Rc::ptr_eq(&self.inner, &p.tape.inner),
                "concat input from a different tape"
            );
            assert!(p.rank() <= 1, "concat supports scalars and vectors only");
            data.extend_from_slice(&p.data_ref());
            ids.push(p.id);
            needs |= p.needs_grad();
        }
        let n = data.len();
        self.push(vec![n], data, needs, Op::Concat(ids))
    }
}

fn same_tape(a: &Tensor, b: &Tensor) {
    assert!(
        Rc::ptr_eq(&a.tape.inner, &b.tape.inner),
        "operands belong to different tapes"
    );
}

impl Tensor {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Handle to the tape this tensor lives on.
    pub fn tape(&self) -> Tape {
        self.tape.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.id].shape.clone()
    }

    pub fn rank(&self) -> usize {
        self.tape.inner.borrow().nodes[self.id].shape.len()
    }

    pub fn len(&self) -> usize {
        self.tape.inner.borrow().nodes[self.id].data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn needs_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].needs_grad
    }

    fn data_ref(&self) -> Vec<f64> {
        self.tape.inner.borrow().nodes[self.id].data.clone()
    }

    /// Copies the forward value out of the tape.
    pub fn data(&self) -> Vec<f64> {
        self.data_ref()
    }

    /// Forward value of a rank-0 (or single-element) tensor.
    pub fn scalar(&self) -> f64 {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.id];
        assert_eq!(node.data.len(), 1, "scalar() on tensor of length > 1");
        node.data[0]
    }

    fn binary_elementwise(
        &self,
        rhs: &Tensor,
        op: fn(usize, usize) -> Op,
        f: fn(f64, f64) -> f64,
        name: &str,
    ) -> Tensor {
        same_tape(self, rhs);
        let (shape, data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            let b = &inner.nodes[rhs.id];
            assert_eq!(
                a.shape, b.shape,
                "{name}: shape mismatch {:?} vs {:?}",
                a.shape, b.shape
            );
            let data = a
                .data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| f(x, y))
                .collect();
            (a.shape.clone(), data, a.needs_grad || b.needs_grad)
        };
        self.tape.push(shape, data, needs, op(self.id, rhs.id))
    }

    pub fn add(&self, rhs: &Tensor) -> Tensor {
        self.binary_elementwise(rhs, Op::Add, |x, y| x + y, "add")
    }

    pub fn sub(&self, rhs: &Tensor) -> Tensor {
        self.binary_elementwise(rhs, Op::Sub, |x, y| x - y, "sub")
    }

    /// Elementwise product; either operand may be rank-0 (scalar broadcast).
    pub fn mul(&self, rhs: &Tensor) -> Tensor {
        same_tape(self, rhs);
        let (shape, data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            let b = &inner.nodes[rhs.id];
            let needs = a.needs_grad || b.needs_grad;
            if a.shape == b.shape {
                let d = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
                (a.shape.clone(), d, needs)
            } else if a.shape.is_empty() {
                let s = a.data[0];
                (b.shape.clone(), b.data.iter().map(|y| s * y).collect(), needs)
            } else if b.shape.is_empty() {
                let s = b.data[0];
                (a.shape.clone(), a.data.iter().map(|x| x * s).collect(), needs)
            } else {
                panic!("mul: shape mismatch {:?} vs {:?}", a.shape, b.shape);
            }
        };
        self.tape.push(shape, data, needs, Op::Mul(self.id, rhs.id))
    }

    /// Elementwise quotient; either operand may be rank-0 (scalar broadcast).
    pub fn div(&self, rhs: &Tensor) -> Tensor {
        same_tape(self, rhs);
        let (shape, data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            let b = &inner.nodes[rhs.id];
            let needs = a.needs_grad || b.needs_grad;
            if a.shape == b.shape {
                let d = a.data.iter().zip(&b.data).map(|(x, y)| x / y).collect();
                (a.shape.clone(), d, needs)
            } else if b.shape.is_empty() {
                let s = b.data[0];
                (a.shape.clone(), a.data.iter().map(|x| x / s).collect(), needs)
            } else if a.shape.is_empty() {
                let s = a.data[0];
                (b.shape.clone(), b.data.iter().map(|y| s / y).collect(), needs)
            } else {
                panic!("div: shape mismatch {:?} vs {:?}", a.shape, b.shape);
            }
        };
        self.tape.push(shape, data, needs, Op::Div(self.id, rhs.id))
    }

    /// Multiplication by a compile-time constant (not differentiated through).
    pub fn scale(&self, c: f64) -> Tensor {
        let (shape, data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            (
                a.shape.clone(),
                a.data.iter().map(|x| c * x).collect(),
                a.needs_grad,
            )
        };
        self.tape.push(shape, data, needs, Op::Scale(self.id, c))
    }

    /// `self` must be a rank-2 matrix [m, k]; `x` a rank-1 vector [k].
    pub fn matvec(&self, x: &Tensor) -> Tensor {
        same_tape(self, x);
        let (data, m, needs) = {
            let inner = self.tape.inner.borrow();
            let w = &inner.nodes[self.id];
            let v = &inner.nodes[x.id];
            assert_eq!(w.shape.len(), 2, "matvec: lhs must be a matrix");
            assert_eq!(v.shape.len(), 1, "matvec: rhs must be a vector");
            let (m, k) = (w.shape[0], w.shape[1]);
            assert_eq!(
                k, v.shape[0],
                "matvec: inner dimensions {k} vs {}",
                v.shape[0]
            );
            let mut out = vec![0.0; m];
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w.data[r * k..(r + 1) * k];
                *o = row.iter().zip(&v.data).map(|(a, b)| a * b).sum();
            }
            (out, m, w.needs_grad || v.needs_grad)
        };
        self.tape
            .push(vec![m], data, needs, Op::MatVec(self.id, x.id))
    }

    /// Reduction to a rank-0 scalar: sum over all elements.
    pub fn sum(&self) -> Tensor {
        let (total, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            (a.data.iter().sum(), a.needs_grad)
        };
        self.tape
            .push(vec![], vec![total], needs, Op::Sum(self.id))
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Tensor {
        let (shape, data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            (
                a.shape.clone(),
                a.data.iter().map(|&x| f(x)).collect(),
                a.needs_grad,
            )
        };
        self.tape.push(shape, data, needs, op)
    }

    /// Elementwise `max(x, c)` with constant `c`.
    pub fn max_const(&self, c: f64) -> Tensor {
        self.unary(Op::MaxConst(self.id, c), |x| x.max(c))
    }

    pub fn relu(&self) -> Tensor {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        self.unary(
            Op::LeakyRelu(self.id, slope),
            |x| if x > 0.0 { x } else { slope * x },
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    /// Numerically stable `ln(1 + x)`.
    pub fn ln_1p(&self) -> Tensor {
        self.unary(Op::Ln1p(self.id), f64::ln_1p)
    }

    /// Softmax over the logits selected by `subset` (in the given order);
    /// output has length `subset.len()` and sums to 1.
    pub fn softmax_subset(&self, subset: &[usize]) -> Tensor {
        assert!(!subset.is_empty(), "softmax over an empty index subset");
        let (data, needs) = {
            let inner = self.tape.inner.borrow();
            let a = &inner.nodes[self.id];
            assert_eq!(a.shape.len(), 1, "softmax_subset input must be a vector");
            for &j in subset {
                assert!(
                    j < a.data.len(),
                    "softmax subset index {j} out of range for length {}",
                    a.data.len()
                );
            }
            let max = subset
                .iter()
                .map(|&j| a.data[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = subset.iter().map(|&j| (a.data[j] - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            (
                exps.iter().map(|e| e / denom).collect::<Vec<f64>>(),
                a.needs_grad,
            )
        };
        let m = subset.len();
        self.tape.push(
            vec![m],
            data,
            needs,
            Op::SoftmaxSubset(self.id, subset.to_vec()),
        )
    }

    /// Reverse pass from this rank-0 scalar.
    pub fn backward(&self) -> Gradients {
        let inner = self.tape.inner.borrow();
        let nodes = &inner.nodes;
        assert!(
            nodes[self.id].shape.is_empty(),
            "backward requires a rank-0 scalar loss, got shape {:?}",
            nodes[self.id].shape
        );
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[self.id] = Some(vec![1.0]);

        // Helper: accumulate into grads[id].
        fn acc(grads: &mut [Option<Vec<f64>>], id: usize, len: usize, f: impl FnOnce(&mut [f64])) {
            let slot = grads[id].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        }

        for id in (0..=self.id).rev() {
            if !nodes[id].needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    if nodes[*a].needs_grad {
                        acc(&mut grads, *a, g.len(), |s| {
                            s.iter_mut().zip(&g).for_each(|(x, gi)| *x += gi)
                        });
                    }
                    if nodes[*b].needs_grad {
                        acc(&mut grads, *b, g.len(), |s| {
                            s.iter_mut().zip(&g).for_each(|(x, gi)| *x += gi)
                        });
                    }
                }
                Op::Sub(a, b) => {
                    if nodes[*a].needs_grad {
                        acc(&mut grads, *a, g.len(), |s| {
                            s.iter_mut().zip(&g).for_each(|(x, gi)| *x += gi)
                        });
                    }
                    if nodes[*b].needs_grad {
                        acc(&mut grads, *b, g.len(), |s| {
                            s.iter_mut().zip(&g).for_each(|(x, gi)| *x -= gi)
                        });
                    }
                }
                Op::Mul(a, b) => {
                    let (da, db) = (&nodes[*a].data, &nodes[*b].data);
                    if da.len() == db.len() {
                        if nodes[*a].needs_grad {
                            acc(&mut grads, *a, da.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] * db[i];
                                }
                            });
                        }
                        if nodes[*b].needs_grad {
                            acc(&mut grads, *b, db.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] * da[i];
                                }
                            });
                        }
                    } else if da.len() == 1 {
                        if nodes[*a].needs_grad {
                            let total: f64 = g.iter().zip(db).map(|(gi, y)| gi * y).sum();
                            acc(&mut grads, *a, 1, |s| s[0] += total);
                        }
                        if nodes[*b].needs_grad {
                            let s0 = da[0];
                            acc(&mut grads, *b, db.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] * s0;
                                }
                            });
                        }
                    } else {
                        if nodes[*a].needs_grad {
                            let s0 = db[0];
                            acc(&mut grads, *a, da.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] * s0;
                                }
                            });
                        }
                        if nodes[*b].needs_grad {
                            let total: f64 = g.iter().zip(da).map(|(gi, x)| gi * x).sum();
                            acc(&mut grads, *b, 1, |s| s[0] += total);
                        }
                    }
                }
                Op::Div(a, b) => {
                    let (da, db) = (&nodes[*a].data, &nodes[*b].data);
                    if da.len() == db.len() {
                        if nodes[*a].needs_grad {
                            acc(&mut grads, *a, da.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] / db[i];
                                }
                            });
                        }
                        if nodes[*b].needs_grad {
                            acc(&mut grads, *b, db.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] -= g[i] * da[i] / (db[i] * db[i]);
                                }
                            });
                        }
                    } else if db.len() == 1 {
                        let s0 = db[0];
                        if nodes[*a].needs_grad {
                            acc(&mut grads, *a, da.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] += g[i] / s0;
                                }
                            });
                        }
                        if nodes[*b].needs_grad {
                            let total: f64 =
                                g.iter().zip(da).map(|(gi, x)| -gi * x / (s0 * s0)).sum();
                            acc(&mut grads, *b, 1, |s| s[0] += total);
                        }
                    } else {
                        let s0 = da[0];
                        if nodes[*a].needs_grad {
                            let total: f64 = g.iter().zip(db).map(|(gi, y)| gi / y).sum();
                            acc(&mut grads, *a, 1, |s| s[0] += total);
                        }
                        if nodes[*b].needs_grad {
                            acc(&mut grads, *b, db.len(), |s| {
                                for i in 0..s.len() {
                                    s[i] -= g[i] * s0 / (db[i] * db[i]);
                                }
                            });
                        }
                    }
                }
                Op::Scale(a, c) => {
                    if nodes[*a].needs_grad {
                        let c = *c;
                        acc(&mut grads, *a, g.len(), |s| {
                            for i in 0..s.len() {
                                s[i] += c * g[i];
                            }
                        });
                    }
                }
                Op::MatVec(w, x) => {
                    let (wd, xd) = (&nodes[*w].data, &nodes[*x].data);
                    let k = xd.len();
                    if nodes[*w].needs_grad {
                        acc(&mut grads, *w, wd.len(), |s| {
                            for (r, gi) in g.iter().enumerate() {
                                for c in 0..k {
                                    s[r * k + c] += gi * xd[c];
                                }
                            }
                        });
                    }
                    if nodes[*x].needs_grad {
                        acc(&mut grads, *x, k, |s| {
                            for (r, gi) in g.iter().enumerate() {
                                for (c, sc) in s.iter_mut().enumerate() {
                                    *sc += gi * wd[r * k + c];
                                }
                            }
                        });
                    }
                }
                Op::Concat(ids) => {
                    let mut offset = 0;
                    for &pid in ids {
                        let plen = nodes[pid].data.len();
                        if nodes[pid].needs_grad {
                            let slice = &g[offset..offset + plen];
                            acc(&mut grads, pid, plen, |s| {
                                s.iter_mut().zip(slice).for_each(|(x, gi)| *x += gi)
                            });
                        }
                        offset += plen;
                    }
                }
                Op::Sum(a) => {
                    let len = nodes[*a].data.len();
                    if nodes[*a].needs_grad {
                        acc(&mut grads, *a, len, |s| {
                            for x in s.iter_mut() {
                                *x += g[0];
                            }
                        });
                    }
                }
                Op::MaxConst(a, c) => {
                    if nodes[*a].needs_grad {
                        let inp = &nodes[*a].data;
                        let c = *c;
                        acc(&mut grads, *a, inp.len(), |s| {
                            for i in 0..s.len() {
                                if inp[i] > c {
                                    s[i] += g[i];
                                }
                            }
                        });
                    }
                }
                Op::Relu(a) => {
                    if nodes[*a].needs_grad {
                        let inp = &nodes[*a].data;
                        acc(&mut grads, *a, inp.len(), |s| {
                            for i in 0..s.len() {
                                if inp[i] > 0.0 {
                                    s[i] += g[i];
                                }
                            }
                        });
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    if nodes[*a].needs_grad {
                        let inp = &nodes[*a].data;
                        let slope = *slope;
                        acc(&mut grads, *a, inp.len(), |s| {
                            for i in 0..s.len() {
                                s[i] += g[i] * if inp[i] > 0.0 { 1.0 } else { slope };
                            }
                        });
                    }
                }
                Op::Exp(a) => {
                    if nodes[*a].needs_grad {
                        let out = &node.data;
                        acc(&mut grads, *a, out.len(), |s| {
                            for i in 0..s.len() {
                                s[i] += g[i] * out[i];
                            }
                        });
                    }
                }
                Op::Ln1p(a) => {
                    if nodes[*a].needs_grad {
                        let inp = &nodes[*a].data;
                        acc(&mut grads, *a, inp.len(), |s| {
                            for i in 0..s.len() {
                                s[i] += g[i] / (1.0 + inp[i]);
                            }
                        });
                    }
                }
                Op::SoftmaxSubset(a, subset) => {
                    if nodes[*a].needs_grad {
                        let y = &node.data;
                        let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                        let len = nodes[*a].data.len();
                        acc(&mut grads, *a, len, |s| {
                            for (j, &idx) in subset.iter().enumerate() {
                                s[idx] += y[j] * (g[j] - dot);
                            }
                        });
                    }
                }
            }
        }

        // Re-seed the loss grad (taken above) for completeness.
        grads[self.id].get_or_insert_with(|| vec![1.0]);
        Gradients {
            tape: self.tape.clone(),
            grads,
        }
    }
}
