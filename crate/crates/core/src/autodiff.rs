//! Tape-based reverse-mode differentiation.
//!
//! Model code is written once against [`Graph`]. [`Tape`] records every op so
//! [`Tape::backward`] can replay it in reverse; [`Eager`] evaluates the same
//! calls without recording, dropping intermediates as soon as they go out of
//! scope. Both call the same kernels, so their outputs are bit-identical.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::kernels;
use crate::params::{ParamRegistry, Parameter};
use crate::tensor::{Element, Tensor, TensorError};

/// Operations a model forward pass may use.
pub trait Graph<T: Element> {
    type Node: Clone;

    /// A constant input (no gradient).
    fn input(&mut self, value: Tensor<T>) -> Self::Node;
    fn constant(&mut self, value: T) -> Self::Node {
        self.input(Tensor::scalar(value))
    }
    fn param(&mut self, param: &Parameter<T>) -> Self::Node;
    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a Tensor<T>;

    fn conv2d(&mut self, x: &Self::Node, w: &Self::Node, b: &Self::Node) -> Result<Self::Node, TensorError>;
    fn relu(&mut self, x: &Self::Node) -> Result<Self::Node, TensorError>;
    fn pixel_shuffle(&mut self, x: &Self::Node, s: usize) -> Result<Self::Node, TensorError>;
    fn concat_channels(&mut self, xs: &[Self::Node]) -> Result<Self::Node, TensorError>;
    fn weighted_add(
        &mut self,
        a: &Self::Node,
        b: &Self::Node,
        la: &Self::Node,
        lb: &Self::Node,
    ) -> Result<Self::Node, TensorError>;
    fn scale(&mut self, x: &Self::Node, lambda: &Self::Node) -> Result<Self::Node, TensorError>;
    /// `name` is only used to label zero-norm errors.
    fn weight_norm(&mut self, v: &Self::Node, g: &Self::Node, name: &str) -> Result<Self::Node, TensorError>;
    fn sum(&mut self, x: &Self::Node) -> Result<Self::Node, TensorError>;
    fn l1_loss(&mut self, pred: &Self::Node, target: &Self::Node) -> Result<Self::Node, TensorError>;
}

/// Evaluates ops immediately without recording anything.
#[derive(Debug, Default)]
pub struct Eager;

impl<T: Element> Graph<T> for Eager {
    type Node = Arc<Tensor<T>>;

    fn input(&mut self, value: Tensor<T>) -> Self::Node {
        Arc::new(value)
    }
    fn param(&mut self, param: &Parameter<T>) -> Self::Node {
        Arc::new(param.value.detached())
    }
    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a Tensor<T> {
        node
    }
    fn conv2d(&mut self, x: &Self::Node, w: &Self::Node, b: &Self::Node) -> Result<Self::Node, TensorError> {
        kernels::conv2d(x, w, b).map(Arc::new)
    }
    fn relu(&mut self, x: &Self::Node) -> Result<Self::Node, TensorError> {
        Ok(Arc::new(kernels::relu(x)))
    }
    fn pixel_shuffle(&mut self, x: &Self::Node, s: usize) -> Result<Self::Node, TensorError> {
        kernels::pixel_shuffle(x, s).map(Arc::new)
    }
    fn concat_channels(&mut self, xs: &[Self::Node]) -> Result<Self::Node, TensorError> {
        let refs: Vec<&Tensor<T>> = xs.iter().map(|x| x.as_ref()).collect();
        kernels::concat_channels(&refs).map(Arc::new)
    }
    fn weighted_add(
        &mut self,
        a: &Self::Node,
        b: &Self::Node,
        la: &Self::Node,
        lb: &Self::Node,
    ) -> Result<Self::Node, TensorError> {
        kernels::weighted_add(a, b, la, lb).map(Arc::new)
    }
    fn scale(&mut self, x: &Self::Node, lambda: &Self::Node) -> Result<Self::Node, TensorError> {
        kernels::scale(x, lambda).map(Arc::new)
    }
    fn weight_norm(&mut self, v: &Self::Node, g: &Self::Node, name: &str) -> Result<Self::Node, TensorError> {
        kernels::weight_norm(v, g, name).map(Arc::new)
    }
    fn sum(&mut self, x: &Self::Node) -> Result<Self::Node, TensorError> {
        Ok(Arc::new(kernels::sum(x)))
    }
    fn l1_loss(&mut self, pred: &Self::Node, target: &Self::Node) -> Result<Self::Node, TensorError> {
        kernels::l1_loss(pred, target).map(Arc::new)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(String),
    Conv2d { x: usize, w: usize, b: usize },
    Relu(usize),
    PixelShuffle { x: usize, s: usize },
    Concat(Vec<usize>),
    WeightedAdd { a: usize, b: usize, la: usize, lb: usize },
    Scale { x: usize, lambda: usize },
    WeightNorm { v: usize, g: usize },
    Sum(usize),
    L1 { pred: usize, target: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
}

static NEXT_TAPE: AtomicU64 = AtomicU64::new(0);

/// Linear record of a forward pass. One tape serves one thread.
#[derive(Debug)]
pub struct Tape<T> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn idx(&self, v: &Var) -> Result<usize, TensorError> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(TensorError::ForeignNode);
        }
        Ok(v.index)
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// Propagates `d root` back through the tape and adds each parameter's
    /// gradient into `params`. Calling it twice accumulates twice.
    pub fn backward(&self, root: &Var, params: &mut ParamRegistry<T>) -> Result<(), TensorError> {
        let root = self.idx(root)?;
        let root_shape = self.nodes[root].value.shape();
        if !root_shape.is_scalar() {
            return Err(TensorError::NotScalar(root_shape));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; root + 1];
        grads[root] = Some(vec![T::one()]);

        fn acc<T: Element>(slot: &mut Option<Vec<T>>, g: Vec<T>) {
            match slot {
                Some(buf) => buf.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                None => *slot = Some(g),
            }
        }

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(name) => params.get_mut(name)?.value.accumulate_grad(&g)?,
                &Op::Conv2d { x, w, b } => {
                    let (gx, gw, gb) =
                        kernels::conv2d_backward(&self.nodes[x].value, &self.nodes[w].value, &g, self.rg(x));
                    if let Some(gx) = gx {
                        acc(&mut grads[x], gx);
                    }
                    if self.rg(w) {
                        acc(&mut grads[w], gw);
                    }
                    if self.rg(b) {
                        acc(&mut grads[b], gb);
                    }
                }
                &Op::Relu(x) => {
                    if self.rg(x) {
                        acc(&mut grads[x], kernels::relu_backward(&self.nodes[x].value, &g));
                    }
                }
                &Op::PixelShuffle { x, s } => {
                    if self.rg(x) {
                        let gt = Tensor::new(node.value.shape(), g)?;
                        acc(&mut grads[x], kernels::pixel_unshuffle(&gt, s)?.into_data());
                    }
                }
                Op::Concat(inputs) => {
                    let shapes: Vec<_> = inputs.iter().map(|&j| self.nodes[j].value.shape()).collect();
                    for (&j, gj) in inputs.iter().zip(kernels::split_channels(&g, &shapes)) {
                        if self.rg(j) {
                            acc(&mut grads[j], gj);
                        }
                    }
                }
                &Op::WeightedAdd { a, b, la, lb } => {
                    let (ga, gb, gla, glb) = kernels::weighted_add_backward(
                        &self.nodes[a].value,
                        &self.nodes[b].value,
                        self.nodes[la].value.item(),
                        self.nodes[lb].value.item(),
                        &g,
                    );
                    if self.rg(a) {
                        acc(&mut grads[a], ga);
                    }
                    if self.rg(b) {
                        acc(&mut grads[b], gb);
                    }
                    if self.rg(la) {
                        acc(&mut grads[la], vec![gla]);
                    }
                    if self.rg(lb) {
                        acc(&mut grads[lb], vec![glb]);
                    }
                }
                &Op::Scale { x, lambda } => {
                    let l = self.nodes[lambda].value.item();
                    if self.rg(x) {
                        acc(&mut grads[x], g.iter().map(|&v| l * v).collect());
                    }
                    if self.rg(lambda) {
                        let d = g.iter().zip(self.nodes[x].value.data()).map(|(&a, &b)| a * b).sum();
                        acc(&mut grads[lambda], vec![d]);
                    }
                }
                &Op::WeightNorm { v, g: gain } => {
                    let (gv, gg) = kernels::weight_norm_backward(&self.nodes[v].value, &self.nodes[gain].value, &g);
                    if self.rg(v) {
                        acc(&mut grads[v], gv);
                    }
                    if self.rg(gain) {
                        acc(&mut grads[gain], gg);
                    }
                }
                &Op::Sum(x) => {
                    if self.rg(x) {
                        acc(&mut grads[x], vec![g[0]; self.nodes[x].value.len()]);
                    }
                }
                &Op::L1 { pred, target } => {
                    let (p, t) = (&self.nodes[pred].value, &self.nodes[target].value);
                    if self.rg(pred) {
                        acc(&mut grads[pred], kernels::l1_loss_backward(p, t, g[0]));
                    }
                    if self.rg(target) {
                        acc(&mut grads[target], kernels::l1_loss_backward(t, p, g[0]));
                    }
                }
            }
        }
        Ok(())
    }
}

impl<T: Element> Graph<T> for Tape<T> {
    type Node = Var;

    fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value.detached(), Op::Input, false)
    }

    fn param(&mut self, param: &Parameter<T>) -> Var {
        self.push(param.value.detached(), Op::Param(param.name.clone()), true)
    }

    fn value<'a>(&'a self, node: &'a Var) -> &'a Tensor<T> {
        &self.nodes[node.index].value
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var, TensorError> {
        let (x, w, b) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let out = kernels::conv2d(&self.nodes[x].value, &self.nodes[w].value, &self.nodes[b].value)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Conv2d { x, w, b }, rg))
    }

    fn relu(&mut self, x: &Var) -> Result<Var, TensorError> {
        let x = self.idx(x)?;
        let out = kernels::relu(&self.nodes[x].value);
        let rg = self.rg(x);
        Ok(self.push(out, Op::Relu(x), rg))
    }

    fn pixel_shuffle(&mut self, x: &Var, s: usize) -> Result<Var, TensorError> {
        let x = self.idx(x)?;
        let out = kernels::pixel_shuffle(&self.nodes[x].value, s)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::PixelShuffle { x, s }, rg))
    }

    fn concat_channels(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let idx = xs.iter().map(|v| self.idx(v)).collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Tensor<T>> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let out = kernels::concat_channels(&refs)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(out, Op::Concat(idx), rg))
    }

    fn weighted_add(&mut self, a: &Var, b: &Var, la: &Var, lb: &Var) -> Result<Var, TensorError> {
        let (a, b, la, lb) = (self.idx(a)?, self.idx(b)?, self.idx(la)?, self.idx(lb)?);
        let n = &self.nodes;
        let out = kernels::weighted_add(&n[a].value, &n[b].value, &n[la].value, &n[lb].value)?;
        let rg = [a, b, la, lb].iter().any(|&i| self.rg(i));
        Ok(self.push(out, Op::WeightedAdd { a, b, la, lb }, rg))
    }

    fn scale(&mut self, x: &Var, lambda: &Var) -> Result<Var, TensorError> {
        let (x, lambda) = (self.idx(x)?, self.idx(lambda)?);
        let out = kernels::scale(&self.nodes[x].value, &self.nodes[lambda].value)?;
        let rg = self.rg(x) || self.rg(lambda);
        Ok(self.push(out, Op::Scale { x, lambda }, rg))
    }

    fn weight_norm(&mut self, v: &Var, g: &Var, name: &str) -> Result<Var, TensorError> {
        let (v, g) = (self.idx(v)?, self.idx(g)?);
        let out = kernels::weight_norm(&self.nodes[v].value, &self.nodes[g].value, name)?;
        let rg = self.rg(v) || self.rg(g);
        Ok(self.push(out, Op::WeightNorm { v, g }, rg))
    }

    fn sum(&mut self, x: &Var) -> Result<Var, TensorError> {
        let x = self.idx(x)?;
        let out = kernels::sum(&self.nodes[x].value);
        let rg = self.rg(x);
        Ok(self.push(out, Op::Sum(x), rg))
    }

    fn l1_loss(&mut self, pred: &Var, target: &Var) -> Result<Var, TensorError> {
        let (pred, target) = (self.idx(pred)?, self.idx(target)?);
        let out = kernels::l1_loss(&self.nodes[pred].value, &self.nodes[target].value)?;
        let rg = self.rg(pred) || self.rg(target);
        Ok(self.push(out, Op::L1 { pred, target }, rg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn scalar_times_constant() {
        let mut reg = ParamRegistry::<f64>::new();
        reg.insert(Parameter::new("lambda", Tensor::scalar(3.0))).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(2.5);
        let l = tape.param(reg.get("lambda").unwrap());
        let root = tape.scale(&x, &l).unwrap();
        tape.backward(&root, &mut reg).unwrap();
        assert_eq!(reg.get("lambda").unwrap().value.grad().unwrap(), &[2.5]);
    }

    #[test]
    fn sum_gives_ones_and_accumulates() {
        let mut reg = ParamRegistry::<f64>::new();
        reg.insert(Parameter::new("p", Tensor::full(Shape::new(1, 2, 2, 2), 0.3))).unwrap();
        let mut tape = Tape::new();
        let p = tape.param(reg.get("p").unwrap());
        let root = tape.sum(&p).unwrap();
        tape.backward(&root, &mut reg).unwrap();
        assert_eq!(reg.get("p").unwrap().value.grad().unwrap(), &[1.0; 8]);
        tape.backward(&root, &mut reg).unwrap();
        assert_eq!(reg.get("p").unwrap().value.grad().unwrap(), &[2.0; 8]);
        reg.zero_grad();
        assert_eq!(reg.get("p").unwrap().value.grad().unwrap(), &[0.0; 8]);
    }

    #[test]
    fn backward_errors() {
        let mut reg = ParamRegistry::<f64>::new();
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(Shape::new(1, 1, 2, 2)));
        assert!(matches!(tape.backward(&x, &mut reg), Err(TensorError::NotScalar(_))));
        let mut other = Tape::<f64>::new();
        let y = other.constant(1.0);
        assert_eq!(tape.backward(&y, &mut reg), Err(TensorError::ForeignNode));
    }

    #[test]
    fn eager_and_tape_agree_bitwise() {
        let x = Tensor::from_fn(Shape::new(1, 2, 3, 3), |i| (i as f32 * 0.37).sin());
        let w = Parameter::new("w", Tensor::from_fn(Shape::new(2, 2, 3, 3), |i| (i as f32 * 0.11).cos()));
        let b = Parameter::new("b", Tensor::from_fn(Shape::vector(2), |i| i as f32));
        fn run<G: Graph<f32>>(g: &mut G, x: &Tensor<f32>, w: &Parameter<f32>, b: &Parameter<f32>) -> Tensor<f32> {
            let x = g.input(x.clone());
            let (w, b) = (g.param(w), g.param(b));
            let y = g.conv2d(&x, &w, &b).unwrap();
            let y = g.relu(&y).unwrap();
            g.value(&y).clone()
        }
        let a = run(&mut Eager, &x, &w, &b);
        let mut tape = Tape::new();
        let t = run(&mut tape, &x, &w, &b);
        assert_eq!(a, t);
    }
}
