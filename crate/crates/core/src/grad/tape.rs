use super::ops;
use super::{invalid, GradError, Real, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernels: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    Relu(Var),
    MaxPool2 {
        input: Var,
        argmax: Vec<usize>,
    },
    GlobalAvgPool(Var),
    Linear {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Sigmoid(Var),
    Bce {
        probs: Var,
        targets: Var,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by the variables that
/// were recorded on the tape.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a variable, or `None` if the loss does not depend on it
    /// through any differentiable path and it was not a parameter.
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

/// Linear record of forward operations; [`Tape::backward`] replays it in
/// exact reverse order and then clears it.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, var: Var) -> Result<&Node<T>> {
        self.nodes.get(var.0).ok_or(GradError::UnknownVar(var.0))
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A trainable leaf; it always receives a gradient.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that needs no gradient (inputs, targets).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> Result<&Tensor<T>> {
        Ok(&self.node(var)?.value)
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let value = ops::conv2d(
            &self.node(input)?.value,
            &self.node(kernels)?.value,
            &self.node(bias)?.value,
            stride,
            padding,
        )?;
        let needs = self.needs(&[input, kernels, bias]);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernels,
                bias,
                stride,
                padding,
            },
            needs,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let value = ops::relu(&self.node(input)?.value);
        let needs = self.needs(&[input]);
        Ok(self.push(value, Op::Relu(input), needs))
    }

    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let (value, argmax) = ops::maxpool2(&self.node(input)?.value)?;
        let needs = self.needs(&[input]);
        Ok(self.push(value, Op::MaxPool2 { input, argmax }, needs))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let value = ops::global_avg_pool(&self.node(input)?.value)?;
        let needs = self.needs(&[input]);
        Ok(self.push(value, Op::GlobalAvgPool(input), needs))
    }

    pub fn linear(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let value = ops::linear(
            &self.node(input)?.value,
            &self.node(weights)?.value,
            &self.node(bias)?.value,
        )?;
        let needs = self.needs(&[input, weights, bias]);
        Ok(self.push(
            value,
            Op::Linear {
                input,
                weights,
                bias,
            },
            needs,
        ))
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let value = ops::sigmoid(&self.node(input)?.value);
        let needs = self.needs(&[input]);
        Ok(self.push(value, Op::Sigmoid(input), needs))
    }

    pub fn bce_loss(&mut self, probs: Var, targets: Var) -> Result<Var> {
        let loss = ops::bce_loss(&self.node(probs)?.value, &self.node(targets)?.value)?;
        let needs = self.needs(&[probs]);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { probs, targets }, needs))
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self.node(input)?.value.data().iter().copied().sum();
        let needs = self.needs(&[input]);
        Ok(self.push(Tensor::scalar(total), Op::Sum(input), needs))
    }

    /// Reverse pass from a scalar `loss`. Parameters always get a gradient
    /// (zeros when the loss does not depend on them). The tape is empty
    /// afterwards, whether or not the pass succeeded.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        let nodes = std::mem::take(&mut self.nodes);
        let root = nodes.get(loss.0).ok_or(GradError::UnknownVar(loss.0))?;
        if root.value.len() != 1 {
            return Err(GradError::NonScalarLoss(root.value.shape().to_vec()));
        }

        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(root.value.shape(), T::one()));

        fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], var: Var, g: Tensor<T>) {
            match &mut grads[var.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let value = |v: Var| &nodes[v.0].value;
            let wants = |v: Var| nodes[v.0].needs_grad;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::Conv2d {
                    input,
                    kernels,
                    bias,
                    stride,
                    padding,
                } => {
                    let (dx, dk, db) = ops::conv2d_backward(
                        value(*input),
                        value(*kernels),
                        value(*bias),
                        *stride,
                        *padding,
                        &g,
                    )?;
                    for (v, d) in [(*input, dx), (*kernels, dk), (*bias, db)] {
                        if wants(v) {
                            accumulate(&mut grads, v, d);
                        }
                    }
                }
                Op::Relu(input) => {
                    let d = ops::relu_backward(value(*input), &g);
                    accumulate(&mut grads, *input, d);
                }
                Op::MaxPool2 { input, argmax } => {
                    let d = ops::maxpool2_backward(value(*input).shape(), argmax, &g);
                    accumulate(&mut grads, *input, d);
                }
                Op::GlobalAvgPool(input) => {
                    let d = ops::global_avg_pool_backward(value(*input).shape(), &g);
                    accumulate(&mut grads, *input, d);
                }
                Op::Linear {
                    input,
                    weights,
                    bias,
                } => {
                    let (dx, dw, db) = ops::linear_backward(value(*input), value(*weights), &g);
                    for (v, d) in [(*input, dx), (*weights, dw), (*bias, db)] {
                        if wants(v) {
                            accumulate(&mut grads, v, d);
                        }
                    }
                }
                Op::Sigmoid(input) => {
                    let d = ops::sigmoid_backward(&node.value, &g);
                    accumulate(&mut grads, *input, d);
                }
                Op::Bce { probs, targets } => {
                    let upstream = g.item().ok_or_else(|| invalid("bce backward", "non-scalar"))?;
                    let d = ops::bce_backward(value(*probs), value(*targets), upstream);
                    accumulate(&mut grads, *probs, d);
                }
                Op::Sum(input) => {
                    let upstream = g.item().ok_or_else(|| invalid("sum backward", "non-scalar"))?;
                    accumulate(&mut grads, *input, Tensor::full(value(*input).shape(), upstream));
                }
            }
        }

        // Parameters the loss never reached still get an explicit zero gradient.
        for (idx, node) in nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.needs_grad && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        // Only leaves keep their gradients.
        for (idx, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }
}
