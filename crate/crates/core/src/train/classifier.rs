use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{propagate, DropoutKey};
use crate::autodiff::{glorot_uniform, ParamGroup, Tape, Var};

/// Two-layer GCN weights (Ω), `F -> H -> C`, without biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl ClassifierParams {
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        ClassifierParams {
            w0: glorot_uniform(in_dim, hidden, rng),
            w1: glorot_uniform(hidden, classes, rng),
        }
    }

    pub fn class_count(&self) -> usize {
        self.w1.ncols()
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> ClassifierVars {
        let v = self.bind_all(tape, requires_grad);
        ClassifierVars::from_slice(&v)
    }
}

impl ParamGroup for ClassifierParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![&self.w0, &self.w1]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.w0, &mut self.w1]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierVars {
    pub w0: Var,
    pub w1: Var,
}

impl ClassifierVars {
    pub fn from_slice(v: &[Var]) -> Self {
        assert_eq!(v.len(), 2, "classifier has 2 tensors");
        ClassifierVars { w0: v[0], w1: v[1] }
    }

    pub fn all(&self) -> Vec<Var> {
        vec![self.w0, self.w1]
    }
}

/// `Â relu(Â X W0) W1` where `propagation` is the already normalized
/// structure `Â`. Dropout with rate `dropout` sits between the layers and
/// only acts on training tapes.
pub fn classify(
    tape: &mut Tape,
    propagation: Var,
    features: Var,
    omega: &ClassifierVars,
    dropout: f64,
    key: Option<DropoutKey>,
) -> Var {
    let h = propagate(tape, propagation, features, omega.w0);
    let mut h = tape.relu(h);
    if let (true, Some(key)) = (tape.is_train() && dropout > 0.0, key) {
        h = tape.dropout(h, dropout, &mut key.rng(0));
    }
    let hw = tape.matmul(h, omega.w1);
    tape.matmul(propagation, hw)
}

/// Mean cross-entropy of `logits` over the nodes in `index`.
pub fn classification_loss(tape: &mut Tape, logits: Var, labels: &[usize], index: &[usize]) -> Var {
    assert!(!index.is_empty(), "classification_loss: empty mask");
    let (n, c) = tape.shape(logits);
    assert_eq!(labels.len(), n, "classification_loss: one label per row");
    let mut mask = Array2::zeros((n, c));
    for &i in index {
        mask[[i, labels[i]]] = 1.0;
    }
    let logp = tape.log_softmax(logits);
    let mask = tape.constant(mask);
    let picked = tape.elementwise_mul(logp, mask);
    let total = tape.reduce_sum(picked);
    tape.scale(total, -1.0 / index.len() as f64)
}
