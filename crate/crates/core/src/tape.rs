//! Define-by-run reverse-mode differentiation.
//!
//! Every operator appends a node holding its output value and a closure that
//! maps the output gradient to input gradients. Nodes only reference earlier
//! nodes, so reverse insertion order is a valid reverse topological order and
//! gradient accumulation happens in a fixed, reproducible sequence.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// What a backward closure gets to see.
pub struct BackwardCtx<'a, T> {
    /// Gradient of the loss with respect to this node's output.
    pub grad: &'a [T],
    pub inputs: &'a [&'a Tensor<T>],
    pub output: &'a Tensor<T>,
    /// Whether each input needs a gradient; closures may skip the rest.
    pub needs: &'a [bool],
}

/// One gradient per input, `None` where not needed.
pub type InputGrads<T> = Vec<Option<Vec<T>>>;

pub type BackwardFn<T> = Box<dyn Fn(&BackwardCtx<'_, T>) -> Result<InputGrads<T>>>;

struct Node<T> {
    value: Tensor<T>,
    inputs: Vec<Var>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant: no gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    /// Records a differentiable leaf (an input or a parameter).
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, mut value: Tensor<T>, requires_grad: bool) -> Var {
        value.clear_grad();
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Appends an operator node. `backward` is dropped when no input needs a
    /// gradient.
    pub fn push_op(
        &mut self,
        value: Tensor<T>,
        inputs: &[Var],
        backward: BackwardFn<T>,
    ) -> Result<Var> {
        let next = self.nodes.len();
        if let Some(bad) = inputs.iter().find(|v| v.0 >= next) {
            return Err(Error::Internal(format!(
                "operator input {} does not precede node {next}",
                bad.0
            )));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs: inputs.to_vec(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        });
        Ok(Var(next))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient populated by the last [`Tape::backward`] call.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    /// Moves a value out of the tape, leaving an empty tensor behind.
    pub fn take_value(&mut self, v: Var) -> Tensor<T> {
        let placeholder = Tensor::zeros([0, 0, 0, 0]).expect("empty shape");
        std::mem::replace(&mut self.nodes[v.0].value, placeholder)
    }

    /// Back-propagates from a scalar output with seed gradient 1.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let shape = self.nodes[output.0].value.shape();
        if !shape.is_scalar() {
            return Err(Error::shape(format!(
                "backward without a seed needs a scalar output, got {shape}"
            )));
        }
        self.backward_with(output, vec![T::one()])
    }

    /// Back-propagates from `output` with an explicit seed gradient.
    pub fn backward_with(&mut self, output: Var, seed: Vec<T>) -> Result<()> {
        let len = self.nodes[output.0].value.len();
        if seed.len() != len {
            return Err(Error::shape(format!(
                "seed gradient has {} elements, output has {len}",
                seed.len()
            )));
        }
        for node in &mut self.nodes {
            node.value.clear_grad();
        }

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);

        for id in (0..=output.0).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if let Some(backward) = &node.backward {
                if node.inputs.iter().any(|p| p.0 >= id) {
                    return Err(Error::Internal(format!("cycle at node {id}")));
                }
                let inputs: Vec<&Tensor<T>> =
                    node.inputs.iter().map(|p| &self.nodes[p.0].value).collect();
                let needs: Vec<bool> = node
                    .inputs
                    .iter()
                    .map(|p| self.nodes[p.0].requires_grad)
                    .collect();
                let ctx = BackwardCtx {
                    grad: &grad,
                    inputs: &inputs,
                    output: &node.value,
                    needs: &needs,
                };
                let input_grads = backward(&ctx)?;
                if input_grads.len() != node.inputs.len() {
                    return Err(Error::Internal(format!(
                        "node {id} returned {} gradients for {} inputs",
                        input_grads.len(),
                        node.inputs.len()
                    )));
                }
                for (parent, g) in node.inputs.iter().zip(input_grads) {
                    let Some(g) = g else { continue };
                    if !needs_of(&self.nodes, *parent) {
                        continue;
                    }
                    if g.len() != self.nodes[parent.0].value.len() {
                        return Err(Error::Internal(format!(
                            "gradient for node {} has wrong length",
                            parent.0
                        )));
                    }
                    match &mut grads[parent.0] {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                        slot @ None => *slot = Some(g),
                    }
                }
            }
            if self.nodes[id].requires_grad {
                self.nodes[id].value.set_grad(grad)?;
            }
        }
        Ok(())
    }

    /// `y = x`, recorded as its own node.
    pub fn identity(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).clone();
        self.push_op(
            value,
            &[x],
            Box::new(|ctx| Ok(vec![Some(ctx.grad.to_vec())])),
        )
    }

    /// `y = s * x`.
    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        let value = self.value(x).map(|v| v * s);
        self.push_op(
            value,
            &[x],
            Box::new(move |ctx| Ok(vec![Some(ctx.grad.iter().map(|&g| g * s).collect())])),
        )
    }

    /// Sum of all elements as a `(1, 1, 1, 1)` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).sum());
        let n = self.value(x).len();
        self.push_op(
            value,
            &[x],
            Box::new(move |ctx| Ok(vec![Some(vec![ctx.grad[0]; n])])),
        )
    }

    /// Mean of all elements as a `(1, 1, 1, 1)` tensor.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(Error::shape("mean of an empty tensor"));
        }
        let s = self.sum(x)?;
        self.scale(s, T::one() / T::from_usize(n))
    }

    /// `sum(w * x)` for a fixed weight tensor, used to reduce a tensor output
    /// to a scalar with a generic (non-uniform) upstream gradient.
    pub fn weighted_sum(&mut self, x: Var, weights: &Tensor<T>) -> Result<Var> {
        self.value(x).ensure_same_shape(weights, "weighted_sum")?;
        let value = Tensor::scalar(
            self.value(x)
                .data()
                .iter()
                .zip(weights.data())
                .map(|(&a, &b)| a * b)
                .sum(),
        );
        let w = weights.data().to_vec();
        self.push_op(
            value,
            &[x],
            Box::new(move |ctx| Ok(vec![Some(w.iter().map(|&v| v * ctx.grad[0]).collect())])),
        )
    }
}

fn needs_of<T>(nodes: &[Node<T>], v: Var) -> bool {
    nodes[v.0].requires_grad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec([1, 1, 1, data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn identity_seed_one() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[1.0, -2.0, 3.0]));
        let y = tape.identity(x).unwrap();
        tape.backward_with(y, vec![1.0; 3]).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_of_doubled() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[0.5, 4.0]));
        let y = tape.scale(x, 2.0).unwrap();
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn non_scalar_backward_needs_seed() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[1.0, 2.0]));
        assert!(tape.backward(x).is_err());
        assert!(tape.backward_with(x, vec![1.0]).is_err());
    }

    #[test]
    fn constants_get_no_grad() {
        let mut tape = Tape::new();
        let c = tape.constant(t(&[1.0]));
        let y = tape.scale(c, 2.0).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.grad(c).is_none());
        assert!(!tape.requires_grad(y));
    }

    #[test]
    fn grads_reset_between_passes() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[1.0]));
        let y = tape.scale(x, 5.0).unwrap();
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[5.0]);
    }
}
