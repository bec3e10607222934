//! Information-bottleneck training: the mutual-information calculator (Φ),
//! the GCN classifier (Ω), their losses and the alternating optimization of
//! Θ, Φ and Ω.

mod checkpoint;
mod classifier;
mod mi;
mod schedule;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use classifier::{classification_loss, classify, ClassifierParams, ClassifierVars};
pub use mi::{infonce, mi_embed, mi_loss, PhiParams, PhiVars, COSINE_EPS};
pub use schedule::TrainSchedule;
pub use trainer::{structure_loss, train, train_gcn, LossReport, Phase, TrainOutcome, Trainer};

use rand_chacha::ChaCha8Rng;

use crate::rng;

/// Addresses the dropout masks of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub stream: &'static str,
    pub epoch: u64,
    pub step: u64,
}

impl DropoutKey {
    pub fn rng(&self, layer: u64) -> ChaCha8Rng {
        rng::stream(
            self.seed,
            self.stream,
            rng::counter(&[self.epoch, self.step, layer]),
        )
    }
}

/// `A X W` evaluated in whichever association is cheaper.
pub(crate) fn propagate(
    tape: &mut crate::autodiff::Tape,
    a: crate::autodiff::Var,
    x: crate::autodiff::Var,
    w: crate::autodiff::Var,
) -> crate::autodiff::Var {
    let (f, h) = tape.shape(w);
    if f > h {
        let xw = tape.matmul(x, w);
        tape.matmul(a, xw)
    } else {
        let ax = tape.matmul(a, x);
        tape.matmul(ax, w)
    }
}
