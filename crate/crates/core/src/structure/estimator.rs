use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CandidateEdgeSet;
use crate::autodiff::{glorot_uniform, ParamGroup, Tape, Var};
use crate::graph::gcn_normalize;
use crate::{Error, Result};

/// Which augmented view an estimator reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// Original adjacency with structural-embedding features.
    FeatureAugmented,
    /// Diffusion adjacency with original features.
    StructureAugmented,
}

/// One structure estimator: a single GCN layer producing node embeddings and
/// a two-layer MLP scoring concatenated embedding pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub view: View,
    pub gcn_weight: Array2<f64>,
    pub mlp_w1: Array2<f64>,
    pub mlp_b1: Array2<f64>,
    pub mlp_w2: Array2<f64>,
    pub mlp_b2: Array2<f64>,
}

impl EstimatorParams {
    pub fn init<R: Rng + ?Sized>(
        view: View,
        in_dim: usize,
        hidden: usize,
        mlp_hidden: usize,
        rng: &mut R,
    ) -> Self {
        EstimatorParams {
            view,
            gcn_weight: glorot_uniform(in_dim, hidden, rng),
            mlp_w1: glorot_uniform(2 * hidden, mlp_hidden, rng),
            mlp_b1: Array2::zeros((1, mlp_hidden)),
            mlp_w2: glorot_uniform(mlp_hidden, 1, rng),
            mlp_b2: Array2::zeros((1, 1)),
        }
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> EstimatorVars {
        let v = self.bind_all(tape, requires_grad);
        EstimatorVars {
            gcn_weight: v[0],
            mlp_w1: v[1],
            mlp_b1: v[2],
            mlp_w2: v[3],
            mlp_b2: v[4],
        }
    }
}

impl ParamGroup for EstimatorParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.gcn_weight,
            &self.mlp_w1,
            &self.mlp_b1,
            &self.mlp_w2,
            &self.mlp_b2,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.gcn_weight,
            &mut self.mlp_w1,
            &mut self.mlp_b1,
            &mut self.mlp_w2,
            &mut self.mlp_b2,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorVars {
    pub gcn_weight: Var,
    pub mlp_w1: Var,
    pub mlp_b1: Var,
    pub mlp_w2: Var,
    pub mlp_b2: Var,
}

impl EstimatorVars {
    pub fn all(&self) -> [Var; 5] {
        [
            self.gcn_weight,
            self.mlp_w1,
            self.mlp_b1,
            self.mlp_w2,
            self.mlp_b2,
        ]
    }
}

/// Both estimators (Θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub feature_view: EstimatorParams,
    pub structure_view: EstimatorParams,
}

impl ThetaParams {
    pub fn init<R: Rng + ?Sized>(
        structural_dim: usize,
        feature_dim: usize,
        hidden: usize,
        mlp_hidden: usize,
        rng: &mut R,
    ) -> Self {
        ThetaParams {
            feature_view: EstimatorParams::init(
                View::FeatureAugmented,
                structural_dim,
                hidden,
                mlp_hidden,
                rng,
            ),
            structure_view: EstimatorParams::init(
                View::StructureAugmented,
                feature_dim,
                hidden,
                mlp_hidden,
                rng,
            ),
        }
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> ThetaVars {
        ThetaVars {
            feature_view: self.feature_view.bind(tape, requires_grad),
            structure_view: self.structure_view.bind(tape, requires_grad),
        }
    }
}

impl ParamGroup for ThetaParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut t = self.feature_view.tensors();
        t.extend(self.structure_view.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut t = self.feature_view.tensors_mut();
        t.extend(self.structure_view.tensors_mut());
        t
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaVars {
    pub feature_view: EstimatorVars,
    pub structure_view: EstimatorVars,
}

impl ThetaVars {
    /// Inverse of [`ThetaVars::all`].
    pub fn from_slice(v: &[Var]) -> Self {
        assert_eq!(v.len(), 10, "theta has 10 tensors");
        let est = |v: &[Var]| EstimatorVars {
            gcn_weight: v[0],
            mlp_w1: v[1],
            mlp_b1: v[2],
            mlp_w2: v[3],
            mlp_b2: v[4],
        };
        ThetaVars {
            feature_view: est(&v[..5]),
            structure_view: est(&v[5..]),
        }
    }

    pub fn all(&self) -> Vec<Var> {
        let mut v = self.feature_view.all().to_vec();
        v.extend(self.structure_view.all());
        v
    }
}

/// Fixed inputs of one estimator. The normalized adjacency never depends on
/// Θ, so its product with the features is computed once.
#[derive(Debug, Clone)]
pub struct EstimatorInput {
    pub propagated: Array2<f64>,
    pub candidates: CandidateEdgeSet,
}

impl EstimatorInput {
    pub fn new(
        adjacency: &Array2<f64>,
        features: &Array2<f64>,
        candidates: CandidateEdgeSet,
    ) -> Self {
        assert_eq!(
            adjacency.nrows(),
            features.nrows(),
            "estimator input: row mismatch"
        );
        assert_eq!(
            adjacency.nrows(),
            candidates.node_count(),
            "estimator input: candidate count"
        );
        EstimatorInput {
            propagated: gcn_normalize(adjacency).dot(features),
            candidates,
        }
    }

    pub fn node_count(&self) -> usize {
        self.propagated.nrows()
    }
}

/// `relu(norm(A) X W)`.
pub fn estimator_embed(tape: &mut Tape, propagated: Var, weight: Var) -> Var {
    let z = tape.matmul(propagated, weight);
    tape.relu(z)
}

/// One logit per candidate pair: `MLP([h_i || h_j])`.
pub fn pairwise_logits(
    tape: &mut Tape,
    embedding: Var,
    candidates: &CandidateEdgeSet,
    vars: &EstimatorVars,
) -> Var {
    let src = tape.gather_rows(embedding, candidates.sources());
    let dst = tape.gather_rows(embedding, candidates.targets());
    let pair = tape.concat_cols(src, dst);
    let z = tape.matmul(pair, vars.mlp_w1);
    let z = tape.add_row(z, vars.mlp_b1);
    let z = tape.relu(z);
    let z = tape.matmul(z, vars.mlp_w2);
    tape.add_row(z, vars.mlp_b2)
}

/// Softmax over each node's candidate logits, scattered into an `N x N`
/// matrix that is zero off the candidate set.
pub fn normalize_candidates(tape: &mut Tape, logits: Var, candidates: &CandidateEdgeSet) -> Var {
    let w = tape.segment_softmax(logits, candidates.offsets());
    tape.scatter_pairs(w, candidates.pairs(), candidates.node_count())
}

/// Weights of the redefined structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Combination {
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu: f64,
}

impl Default for Combination {
    fn default() -> Self {
        Combination {
            gamma1: 0.5,
            gamma2: 0.5,
            mu: 1.0,
        }
    }
}

impl Combination {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("mu", self.mu),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

fn symmetrize(tape: &mut Tape, m: Var) -> Var {
    let mt = tape.transpose(m);
    let sum = tape.add(m, mt);
    tape.scale(sum, 0.5)
}

/// `A_r1 = sym(A + γ1 S1)`, `A_r2 = sym(μ A + (1 - μ) Â + γ2 S2)` with
/// `sym(M) = (M + Mᵀ) / 2`.
pub fn redefine(
    tape: &mut Tape,
    adjacency: Var,
    diffusion: Var,
    s1: Var,
    s2: Var,
    c: Combination,
) -> (Var, Var) {
    let g1 = tape.scale(s1, c.gamma1);
    let m1 = tape.add(adjacency, g1);
    let a_r1 = symmetrize(tape, m1);

    let a = tape.scale(adjacency, c.mu);
    let d = tape.scale(diffusion, 1.0 - c.mu);
    let g2 = tape.scale(s2, c.gamma2);
    let m2 = tape.add(a, d);
    let m2 = tape.add(m2, g2);
    let a_r2 = symmetrize(tape, m2);
    (a_r1, a_r2)
}

/// Elementwise mean of the two redefined structures.
pub fn fuse(tape: &mut Tape, a_r1: Var, a_r2: Var) -> Var {
    let sum = tape.add(a_r1, a_r2);
    tape.scale(sum, 0.5)
}

/// Values of the two redefined structures after a Θ phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RedefinedStructure {
    pub a_r1: Array2<f64>,
    pub a_r2: Array2<f64>,
    pub s1: Array2<f64>,
    pub s2: Array2<f64>,
}

/// The fused structure `A*`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedStructure(pub Array2<f64>);

impl FusedStructure {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Tape handles produced by [`StructureLearner::forward`].
#[derive(Debug, Clone, Copy)]
pub struct StructureVars {
    pub s1: Var,
    pub s2: Var,
    pub a_r1: Var,
    pub a_r2: Var,
    pub a_star: Var,
}

/// Shape and mixing settings of the structure estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Neighbourhood order of the first view's candidate sets.
    pub hops: usize,
    /// Diffusion candidates per node for the second view.
    pub ppr_candidates: usize,
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            hops: 2,
            ppr_candidates: 5,
            hidden: 16,
            mlp_hidden: 16,
            gamma1: Combination::default().gamma1,
            gamma2: Combination::default().gamma2,
            mu: Combination::default().mu,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 || self.ppr_candidates == 0 || self.hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config(
                "estimator hops, ppr_candidates and widths must be positive".into(),
            ));
        }
        self.combination().validate()
    }

    pub fn combination(&self) -> Combination {
        Combination {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            mu: self.mu,
        }
    }
}

/// Everything Θ acts on, fixed for one training run.
#[derive(Debug, Clone)]
pub struct StructureLearner {
    pub adjacency: Array2<f64>,
    pub diffusion: Array2<f64>,
    pub feature_view: EstimatorInput,
    pub structure_view: EstimatorInput,
    pub combination: Combination,
}

impl StructureLearner {
    /// `structural` is the structural embedding `X̂`, `features` the node
    /// features `X`.
    pub fn new(
        adjacency: &Array2<f64>,
        diffusion: &Array2<f64>,
        structural: &Array2<f64>,
        features: &Array2<f64>,
        hops: usize,
        ppr_candidates: usize,
        combination: Combination,
    ) -> Self {
        let c1 = CandidateEdgeSet::within_hops(adjacency, hops);
        let c2 = CandidateEdgeSet::top_k(diffusion, ppr_candidates);
        StructureLearner {
            adjacency: adjacency.clone(),
            diffusion: diffusion.clone(),
            feature_view: EstimatorInput::new(adjacency, structural, c1),
            structure_view: EstimatorInput::new(diffusion, features, c2),
            combination,
        }
    }

    pub fn from_config(
        adjacency: &Array2<f64>,
        diffusion: &Array2<f64>,
        structural: &Array2<f64>,
        features: &Array2<f64>,
        config: &EstimatorConfig,
    ) -> Self {
        Self::new(
            adjacency,
            diffusion,
            structural,
            features,
            config.hops,
            config.ppr_candidates,
            config.combination(),
        )
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Union of both views' candidate pairs as `(i, j)` with `i < j`.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .feature_view
            .candidates
            .pairs()
            .iter()
            .chain(self.structure_view.candidates.pairs().iter())
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    fn estimate(tape: &mut Tape, input: &EstimatorInput, vars: &EstimatorVars) -> Var {
        let p = tape.constant(input.propagated.clone());
        let h = estimator_embed(tape, p, vars.gcn_weight);
        let logits = pairwise_logits(tape, h, &input.candidates, vars);
        normalize_candidates(tape, logits, &input.candidates)
    }

    pub fn forward(&self, tape: &mut Tape, theta: &ThetaVars) -> StructureVars {
        let s1 = Self::estimate(tape, &self.feature_view, &theta.feature_view);
        let s2 = Self::estimate(tape, &self.structure_view, &theta.structure_view);
        let a = tape.constant(self.adjacency.clone());
        let d = tape.constant(self.diffusion.clone());
        let (a_r1, a_r2) = redefine(tape, a, d, s1, s2, self.combination);
        let a_star = fuse(tape, a_r1, a_r2);
        StructureVars {
            s1,
            s2,
            a_r1,
            a_r2,
            a_star,
        }
    }

    /// Evaluates the structures for fixed Θ.
    pub fn materialize(&self, theta: &ThetaParams) -> (RedefinedStructure, FusedStructure) {
        let mut tape = Tape::eval();
        let vars = theta.bind(&mut tape, false);
        let out = self.forward(&mut tape, &vars);
        let redefined = RedefinedStructure {
            a_r1: tape.value(out.a_r1).clone(),
            a_r2: tape.value(out.a_r2).clone(),
            s1: tape.value(out.s1).clone(),
            s2: tape.value(out.s2).clone(),
        };
        (redefined, FusedStructure(tape.value(out.a_star).clone()))
    }
}
