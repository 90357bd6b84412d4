//! Binary classification on a finite design with square (0-1) loss.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Model, Problem};
use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPoint {
    /// Index of the design point.
    pub x: usize,
    pub y: u8,
}

/// `{0,1}`-valued classifier tabulated on the design points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Classifier(pub Vec<u8>);

impl Classifier {
    pub fn predict(&self, x: usize) -> u8 {
        self.0[x]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Design points with masses `prob` and regression function
/// `η(x) = P(Y = 1 | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteClassificationProblem {
    prob: Vec<f64>,
    eta: Vec<f64>,
    margin_h: Option<f64>,
}

impl DiscreteClassificationProblem {
    pub fn new(prob: Vec<f64>, eta: Vec<f64>, margin_h: Option<f64>) -> Result<Self> {
        if prob.is_empty() || prob.len() != eta.len() {
            return Err(Error::InvalidProblem(format!(
                "{} masses for {} regression values",
                prob.len(),
                eta.len()
            )));
        }
        if prob.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidProblem(
                "masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProblem(format!(
                "masses sum to {total}, not 1"
            )));
        }
        if eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidProblem("eta must lie in [0, 1]".into()));
        }
        if let Some(h) = margin_h {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::InvalidProblem(format!("margin {h} outside [0, 1]")));
            }
            if let Some(x) = eta.iter().position(|e| (2.0 * e - 1.0).abs() < h - 1e-12) {
                return Err(Error::InvalidProblem(format!(
                    "|2η−1| = {} at design point {x} is below the margin {h}",
                    (2.0 * eta[x] - 1.0).abs()
                )));
            }
        }
        Ok(Self {
            prob,
            eta,
            margin_h,
        })
    }

    /// `K` design points with masses `∝ decay^k`, a Bayes classifier that
    /// alternates on consecutive blocks of `block` points (starting at 0),
    /// and `η = 1/2 ± h/2` so that `|2η − 1| = h` everywhere.
    pub fn geometric_blocks(design_size: usize, decay: f64, block: usize, h: f64) -> Result<Self> {
        if design_size == 0 || block == 0 {
            return Err(Error::InvalidProblem("empty design or block".into()));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "mass decay {decay} must be positive"
            )));
        }
        let raw: Vec<f64> = (0..design_size).map(|k| decay.powi(k as i32)).collect();
        let total: f64 = raw.iter().sum();
        let prob = raw.iter().map(|w| w / total).collect();
        let eta = (0..design_size)
            .map(|k| {
                if (k / block) % 2 == 1 {
                    0.5 + h / 2.0
                } else {
                    0.5 - h / 2.0
                }
            })
            .collect();
        Self::new(prob, eta, Some(h))
    }

    pub fn design_size(&self) -> usize {
        self.prob.len()
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn margin_h(&self) -> Option<f64> {
        self.margin_h
    }

    /// `min_x |2η(x) − 1|` over design points with positive mass.
    pub fn realized_margin(&self) -> f64 {
        self.prob
            .iter()
            .zip(&self.eta)
            .filter(|(p, _)| **p > 0.0)
            .map(|(_, e)| (2.0 * e - 1.0).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `b*(x) = 1{η(x) > 1/2}`.
    pub fn bayes_classifier(&self) -> Classifier {
        Classifier(self.eta.iter().map(|e| u8::from(*e > 0.5)).collect())
    }

    /// `Σ_x |2η(x) − 1|·P(x)·1{g(x) ≠ b*(x)}`.
    pub fn excess_risk_01(&self, g: &Classifier) -> Result<f64> {
        if g.len() != self.design_size() {
            return Err(Error::InvalidProblem(format!(
                "classifier defined on {} points, design has {}",
                g.len(),
                self.design_size()
            )));
        }
        Ok(self
            .prob
            .iter()
            .zip(&self.eta)
            .zip(&g.0)
            .filter(|((_, e), label)| **label != u8::from(**e > 0.5))
            .map(|((p, e), _)| (2.0 * e - 1.0).abs() * p)
            .sum())
    }

    /// `P(g ≠ b*) = P f²` for `f = ℓ•g − ℓ•b*` under 0-1 loss.
    pub fn disagreement_mass(&self, g: &Classifier) -> Result<f64> {
        if g.len() != self.design_size() {
            return Err(Error::InvalidProblem(
                "classifier/design size mismatch".into(),
            ));
        }
        let b = self.bayes_classifier();
        Ok(self
            .prob
            .iter()
            .zip(g.0.iter().zip(&b.0))
            .filter(|(_, (a, b))| a != b)
            .map(|(p, _)| p)
            .sum())
    }

    /// I.i.d. draws `(X_i, Y_i)`.
    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<LabeledPoint>> {
        let design = WeightedIndex::new(&self.prob)
            .map_err(|e| Error::InvalidProblem(format!("design masses: {e}")))?;
        Ok((0..n)
            .map(|_| {
                let x = design.sample(rng);
                let y = u8::from(rng.random::<f64>() < self.eta[x]);
                LabeledPoint { x, y }
            })
            .collect())
    }
}

impl Problem for DiscreteClassificationProblem {
    type Sample = LabeledPoint;
    type Predictor = Classifier;

    fn loss(&self, g: &Classifier, z: &LabeledPoint) -> f64 {
        if g.predict(z.x) == z.y {
            0.0
        } else {
            1.0
        }
    }

    fn excess_risk(&self, g: &Classifier) -> Result<f64> {
        self.excess_risk_01(g)
    }

    fn target(&self) -> Classifier {
        self.bayes_classifier()
    }

    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<LabeledPoint>> {
        self.sample(n, rng)
    }
}

/// Assignment of every design point to one of `cells` cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    cell_of: Vec<usize>,
    cells: usize,
}

impl Partition {
    /// Every cell must receive at least one design point.
    pub fn new(cell_of: Vec<usize>, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidProblem("partition with zero cells".into()));
        }
        let mut seen = vec![false; cells];
        for (x, &c) in cell_of.iter().enumerate() {
            if c >= cells {
                return Err(Error::InvalidProblem(format!(
                    "design point {x} assigned to cell {c} of {cells}"
                )));
            }
            seen[c] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidProblem(format!(
                "cell {c} holds no design point"
            )));
        }
        Ok(Self { cell_of, cells })
    }

    /// `cells` contiguous cells of (nearly) equal size over `design_size`
    /// ordered points.
    pub fn regular(design_size: usize, cells: usize) -> Result<Self> {
        if cells == 0 || cells > design_size {
            return Err(Error::InvalidProblem(format!(
                "cannot split {design_size} points into {cells} cells"
            )));
        }
        Self::new(
            (0..design_size).map(|x| x * cells / design_size).collect(),
            cells,
        )
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn design_size(&self) -> usize {
        self.cell_of.len()
    }

    pub fn cell_of(&self, x: usize) -> usize {
        self.cell_of[x]
    }

    fn check_covers(&self, design_size: usize) -> Result<()> {
        if self.design_size() != design_size {
            return Err(Error::InvalidProblem(format!(
                "partition covers {} points, design has {design_size}",
                self.design_size()
            )));
        }
        Ok(())
    }

    fn expand<T: Copy>(&self, per_cell: &[T]) -> Vec<T> {
        self.cell_of.iter().map(|&c| per_cell[c]).collect()
    }

    fn cell_counts(&self, sample: &[LabeledPoint]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut ones = vec![0usize; self.cells];
        let mut total = vec![0usize; self.cells];
        for z in sample {
            let c = *self.cell_of.get(z.x).ok_or_else(|| {
                Error::InvalidProblem(format!("sample at design point {} not covered", z.x))
            })?;
            total[c] += 1;
            ones[c] += usize::from(z.y);
        }
        Ok((ones, total))
    }

    /// Per-cell majority vote; ties and empty cells give label 0.
    ///
    /// The result minimises the empirical 0-1 loss over classifiers constant
    /// on cells.
    pub fn fit_classifier(&self, sample: &[LabeledPoint]) -> Result<HistogramFit<Classifier>> {
        let (ones, total) = self.cell_counts(sample)?;
        let labels: Vec<u8> = ones
            .iter()
            .zip(&total)
            .map(|(o, t)| u8::from(2 * o > *t))
            .collect();
        Ok(HistogramFit {
            predictor: Classifier(self.expand(&labels)),
            empty_cells: empty_cells(&total),
        })
    }

    /// Per-cell mean label; empty cells give level 0.
    pub fn fit_regressor(&self, sample: &[LabeledPoint]) -> Result<HistogramFit<Vec<f64>>> {
        let (ones, total) = self.cell_counts(sample)?;
        let levels: Vec<f64> = ones
            .iter()
            .zip(&total)
            .map(|(o, t)| if *t == 0 { 0.0 } else { *o as f64 / *t as f64 })
            .collect();
        Ok(HistogramFit {
            predictor: self.expand(&levels),
            empty_cells: empty_cells(&total),
        })
    }

    /// Best classifier constant on cells: per cell, label 1 iff
    /// `Σ_{x ∈ cell} P(x)(2η(x) − 1) > 0`.
    pub fn best_classifier(&self, problem: &DiscreteClassificationProblem) -> Result<Classifier> {
        self.check_covers(problem.design_size())?;
        let mut score = vec![0.0; self.cells];
        for (x, &c) in self.cell_of.iter().enumerate() {
            score[c] += problem.prob()[x] * (2.0 * problem.eta()[x] - 1.0);
        }
        let labels: Vec<u8> = score.iter().map(|s| u8::from(*s > 0.0)).collect();
        Ok(Classifier(self.expand(&labels)))
    }
}

fn empty_cells(total: &[usize]) -> Vec<usize> {
    total
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == 0)
        .map(|(c, _)| c)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit<G> {
    pub predictor: G,
    /// Cells without training points, filled with the default value.
    pub empty_cells: Vec<usize>,
}

/// Histogram classifier model over a fixed partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramModel {
    pub partition: Partition,
}

impl HistogramModel {
    pub fn regular(design_size: usize, cells: usize) -> Result<Self> {
        Ok(Self {
            partition: Partition::regular(design_size, cells)?,
        })
    }
}

impl Model<DiscreteClassificationProblem> for HistogramModel {
    fn label(&self) -> String {
        format!("hist{}", self.partition.cells())
    }

    fn dim(&self) -> usize {
        self.partition.cells()
    }

    fn fit(
        &self,
        problem: &DiscreteClassificationProblem,
        train: &[LabeledPoint],
    ) -> Result<Classifier> {
        self.partition.check_covers(problem.design_size())?;
        Ok(self.partition.fit_classifier(train)?.predictor)
    }

    fn population_minimizer(&self, problem: &DiscreteClassificationProblem) -> Option<Classifier> {
        self.partition.best_classifier(problem).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};
    use proptest::prelude::*;

    fn two_point() -> DiscreteClassificationProblem {
        DiscreteClassificationProblem::new(vec![0.5, 0.5], vec![0.9, 0.2], None).unwrap()
    }

    fn all_classifiers(k: usize) -> impl Iterator<Item = Classifier> {
        (0u32..(1 << k))
            .map(move |bits| Classifier((0..k).map(|i| ((bits >> i) & 1) as u8).collect()))
    }

    #[test]
    fn invariants_are_checked() {
        assert!(DiscreteClassificationProblem::new(vec![0.5, 0.4], vec![0.1, 0.1], None).is_err());
        assert!(DiscreteClassificationProblem::new(vec![0.5, 0.5], vec![1.1, 0.1], None).is_err());
        assert!(DiscreteClassificationProblem::new(vec![1.0], vec![0.5, 0.1], None).is_err());
        assert!(
            DiscreteClassificationProblem::new(vec![0.5, 0.5], vec![0.9, 0.6], Some(0.5)).is_err()
        );
        assert!(
            DiscreteClassificationProblem::new(vec![0.5, 0.5], vec![0.9, 0.0], Some(0.8)).is_ok()
        );
    }

    #[test]
    fn degenerate_eta_gives_constant_labels() {
        let p = DiscreteClassificationProblem::new(vec![0.3, 0.7], vec![1.0, 1.0], None).unwrap();
        let mut rng = stream(1, 0, StreamRole::Sample);
        assert!(p.sample(1000, &mut rng).unwrap().iter().all(|z| z.y == 1));
    }

    #[test]
    fn fair_coin_labels() {
        let p = DiscreteClassificationProblem::new(vec![0.25; 4], vec![0.5; 4], None).unwrap();
        let mut rng = stream(2, 0, StreamRole::Sample);
        let n = 40_000;
        let ones = p
            .sample(n, &mut rng)
            .unwrap()
            .iter()
            .filter(|z| z.y == 1)
            .count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 4.0 * sd);
    }

    #[test]
    fn per_point_label_frequencies_within_binomial_band() {
        let p = two_point();
        let mut rng = stream(3, 0, StreamRole::Sample);
        let sample = p.sample(100_000, &mut rng).unwrap();
        for x in 0..2 {
            let at: Vec<_> = sample.iter().filter(|z| z.x == x).collect();
            let k = at.len() as f64;
            let freq = at.iter().filter(|z| z.y == 1).count() as f64 / k;
            let eta = p.eta()[x];
            assert!((freq - eta).abs() < 4.0 * (eta * (1.0 - eta) / k).sqrt());
        }
    }

    #[test]
    fn excess_risk_examples() {
        let p = two_point();
        assert_eq!(p.excess_risk_01(&p.bayes_classifier()).unwrap(), 0.0);
        let one = DiscreteClassificationProblem::new(vec![1.0], vec![0.9], None).unwrap();
        assert!((one.excess_risk_01(&Classifier(vec![0])).unwrap() - 0.8).abs() < 1e-15);
        let flipped = Classifier(p.bayes_classifier().0.iter().map(|b| 1 - b).collect());
        let full: f64 = p
            .prob()
            .iter()
            .zip(p.eta())
            .map(|(q, e)| q * (2.0 * e - 1.0).abs())
            .sum();
        assert!((p.excess_risk_01(&flipped).unwrap() - full).abs() < 1e-15);
        assert!(p.excess_risk_01(&Classifier(vec![0])).is_err());
    }

    #[test]
    fn bayes_optimal_over_all_classifiers() {
        let p = DiscreteClassificationProblem::new(
            vec![0.05, 0.1, 0.2, 0.05, 0.15, 0.1, 0.1, 0.05, 0.1, 0.1],
            vec![0.9, 0.3, 0.5, 0.7, 0.05, 0.55, 0.45, 1.0, 0.0, 0.62],
            None,
        )
        .unwrap();
        for g in all_classifiers(10) {
            assert!(p.excess_risk_01(&g).unwrap() >= 0.0);
        }
        assert_eq!(p.excess_risk_01(&p.bayes_classifier()).unwrap(), 0.0);
    }

    #[test]
    fn margin_links_variance_to_risk() {
        // P f² ≤ L / h for every classifier: φ(x) = h·x²
        let p = DiscreteClassificationProblem::geometric_blocks(10, 0.8, 2, 0.6).unwrap();
        let h = p.realized_margin();
        assert!((h - 0.6).abs() < 1e-12);
        for g in all_classifiers(10) {
            let l = p.excess_risk_01(&g).unwrap();
            let second = p.disagreement_mass(&g).unwrap();
            assert!(second <= l / h + 1e-12);
        }
    }

    #[test]
    fn single_cell_majority() {
        let part = Partition::regular(3, 1).unwrap();
        let s = [
            LabeledPoint { x: 0, y: 1 },
            LabeledPoint { x: 1, y: 1 },
            LabeledPoint { x: 2, y: 0 },
        ];
        assert_eq!(
            part.fit_classifier(&s).unwrap().predictor,
            Classifier(vec![1, 1, 1])
        );
    }

    #[test]
    fn empty_cells_default_to_zero_and_are_flagged() {
        let part = Partition::regular(4, 2).unwrap();
        let s = [LabeledPoint { x: 0, y: 1 }];
        let fit = part.fit_classifier(&s).unwrap();
        assert_eq!(fit.predictor, Classifier(vec![1, 1, 0, 0]));
        assert_eq!(fit.empty_cells, vec![1]);
        let reg = part.fit_regressor(&s).unwrap();
        assert_eq!(reg.predictor, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(reg.empty_cells, vec![1]);
    }

    #[test]
    fn partition_must_cover() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        assert!(Partition::new(vec![0, 0], 2).is_err());
        assert!(Partition::regular(3, 4).is_err());
        let m = HistogramModel::regular(3, 3).unwrap();
        assert!(m.fit(&two_point(), &[]).is_err());
        let part = Partition::regular(2, 2).unwrap();
        assert!(part.fit_classifier(&[LabeledPoint { x: 5, y: 0 }]).is_err());
    }

    #[test]
    fn separating_partition_recovers_bayes() {
        let p = two_point();
        let m = HistogramModel::regular(2, 2).unwrap();
        let mut rng = stream(4, 0, StreamRole::Train);
        let sample = p.sample(5000, &mut rng).unwrap();
        assert_eq!(m.fit(&p, &sample).unwrap(), p.bayes_classifier());
    }

    #[test]
    fn best_in_partition_has_minimal_excess() {
        let p = DiscreteClassificationProblem::geometric_blocks(8, 0.7, 3, 0.4).unwrap();
        let part = Partition::regular(8, 2).unwrap();
        let best = part.best_classifier(&p).unwrap();
        let best_risk = p.excess_risk_01(&best).unwrap();
        for g in all_classifiers(2) {
            let expanded = Classifier(part.expand(&g.0));
            assert!(p.excess_risk_01(&expanded).unwrap() >= best_risk - 1e-15);
        }
    }

    fn empirical_01(g: &Classifier, s: &[LabeledPoint]) -> usize {
        s.iter().filter(|z| g.predict(z.x) != z.y).count()
    }

    proptest! {
        #[test]
        fn majority_vote_minimises_empirical_risk(
            cells in 1usize..=6,
            raw in proptest::collection::vec((0usize..12, 0u8..2), 0..60),
        ) {
            let part = Partition::regular(12, cells).unwrap();
            let s: Vec<LabeledPoint> = raw.into_iter().map(|(x, y)| LabeledPoint { x, y }).collect();
            let fit = part.fit_classifier(&s).unwrap().predictor;
            let best = empirical_01(&fit, &s);
            for g in all_classifiers(cells) {
                let expanded = Classifier(part.expand(&g.0));
                prop_assert!(empirical_01(&expanded, &s) >= best);
            }
        }
    }

    #[test]
    fn majority_vote_minimises_empirical_risk_ten_cells() {
        let p = DiscreteClassificationProblem::geometric_blocks(10, 0.9, 1, 0.2).unwrap();
        let part = Partition::regular(10, 10).unwrap();
        for r in 0..5 {
            let mut rng = stream(9, r, StreamRole::Train);
            let s = p.sample(37, &mut rng).unwrap();
            let best = empirical_01(&part.fit_classifier(&s).unwrap().predictor, &s);
            for g in all_classifiers(10) {
                assert!(empirical_01(&g, &s) >= best);
            }
        }
    }
}
