//! Synthetic problems with exact ground truth and the estimators fitted on
//! them.

use rand::RngCore;

use crate::error::Result;

pub mod changepoint;
pub mod classification;
pub mod mallows;

pub use changepoint::{dp_segment, ChangepointProblem, Segmentation};
pub use classification::{
    Classifier, DiscreteClassificationProblem, HistogramFit, HistogramModel, LabeledPoint,
    Partition,
};
pub use mallows::{gen_mallows, MallowsProblem, NestedProjection, Observation};

/// A loss `ℓ` on samples together with the exact excess risk
/// `L(g, g*) = E[ℓ•g − ℓ•g*]` of any predictor.
pub trait Problem {
    type Sample;
    type Predictor;

    fn loss(&self, g: &Self::Predictor, z: &Self::Sample) -> f64;

    fn excess_risk(&self, g: &Self::Predictor) -> Result<f64>;

    /// `g*`, the minimiser of the expected loss.
    fn target(&self) -> Self::Predictor;

    /// `P_n(ℓ•g)`.
    fn empirical_risk(&self, g: &Self::Predictor, data: &[Self::Sample]) -> f64 {
        data.iter().map(|z| self.loss(g, z)).sum::<f64>() / data.len() as f64
    }

    /// Draws `n` samples.
    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Self::Sample>>;
}

/// A model `G_m` with a fitting procedure returning its empirical risk
/// minimiser `ĝ_m`.
pub trait Model<P: Problem> {
    fn label(&self) -> String;

    /// Number of parameters `D_m`.
    fn dim(&self) -> usize;

    fn fit(&self, problem: &P, train: &[P::Sample]) -> Result<P::Predictor>;

    /// `g_m`, the minimiser of the expected loss within the model, when the
    /// problem makes it computable.
    fn population_minimizer(&self, _problem: &P) -> Option<P::Predictor> {
        None
    }
}

impl<P: Problem, M: Model<P> + ?Sized> Model<P> for Box<M> {
    fn label(&self) -> String {
        (**self).label()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn fit(&self, problem: &P, train: &[P::Sample]) -> Result<P::Predictor> {
        (**self).fit(problem, train)
    }

    fn population_minimizer(&self, problem: &P) -> Option<P::Predictor> {
        (**self).population_minimizer(problem)
    }
}
