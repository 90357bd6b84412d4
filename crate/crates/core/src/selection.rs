//! Empirical-risk selection over a finite family of loss-difference
//! functions, the Bernstein deviation term, and the tail / expectation bounds
//! for the selected member, together with a Monte Carlo falsification harness.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulus::PowerModulus;
use crate::rng::{self, StreamRole};

/// Slack allowed on the pairwise range constraint for floating-point noise.
const RANGE_TOL: f64 = 1e-12;

/// Finite family `{f_m}` evaluated on a common sample `ξ_1..ξ_n`.
///
/// `values[m][i] = f_m(ξ_i)`. Population means `P f_m` and second moments
/// `P f_m²` are attached when the problem is synthetic.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFamily {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
    true_means: Option<Vec<f64>>,
    true_second_moments: Option<Vec<f64>>,
}

impl CandidateFamily {
    /// Builds the family and checks `|f_m − f_m'| ≤ 1` on every sample.
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let family = Self::new_unverified(labels, values)?;
        family.check_range()?;
        Ok(family)
    }

    /// Same as [`new`](Self::new) without the range scan, for performance runs
    /// whose construction already guarantees the constraint.
    pub fn new_unverified(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidFamily(format!(
                "need at least 2 functions, got {}",
                values.len()
            )));
        }
        if labels.len() != values.len() {
            return Err(Error::InvalidFamily(format!(
                "{} labels for {} functions",
                labels.len(),
                values.len()
            )));
        }
        let n = values[0].len();
        if n == 0 {
            return Err(Error::InvalidFamily("no samples".into()));
        }
        if let Some((m, row)) = values.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidFamily(format!(
                "function {m} has {} samples, expected {n}",
                row.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFamily("non-finite evaluation".into()));
        }
        Ok(Self {
            labels,
            values,
            true_means: None,
            true_second_moments: None,
        })
    }

    /// Attaches ground truth `P f_m` (must be ≥ 0) and optionally `P f_m²`.
    pub fn with_truth(mut self, means: Vec<f64>, second_moments: Option<Vec<f64>>) -> Result<Self> {
        if means.len() != self.len() {
            return Err(Error::InvalidFamily(format!(
                "{} true means for {} functions",
                means.len(),
                self.len()
            )));
        }
        if let Some((m, v)) = means.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidFamily(format!(
                "true mean of function {m} is {v}, must be nonnegative"
            )));
        }
        if let Some(s) = &second_moments {
            if s.len() != self.len() || s.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidFamily(
                    "second moments must be nonnegative, one per function".into(),
                ));
            }
        }
        self.true_means = Some(means);
        self.true_second_moments = second_moments;
        Ok(self)
    }

    /// Scans every sample for the pair with the largest spread.
    pub fn check_range(&self) -> Result<()> {
        for i in 0..self.sample_count() {
            let (mut lo, mut hi) = (0, 0);
            for m in 1..self.len() {
                if self.values[m][i] < self.values[lo][i] {
                    lo = m;
                }
                if self.values[m][i] > self.values[hi][i] {
                    hi = m;
                }
            }
            let gap = self.values[hi][i] - self.values[lo][i];
            if gap > 1.0 + RANGE_TOL {
                return Err(Error::RangeViolation {
                    first: lo.min(hi),
                    second: lo.max(hi),
                    sample: i,
                    gap,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_count(&self) -> usize {
        self.values[0].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn true_means(&self) -> Option<&[f64]> {
        self.true_means.as_deref()
    }

    pub fn true_second_moments(&self) -> Option<&[f64]> {
        self.true_second_moments.as_deref()
    }

    /// `P_n f_m` for every member.
    pub fn empirical_means(&self) -> Vec<f64> {
        let n = self.sample_count() as f64;
        self.values
            .iter()
            .map(|row| row.iter().sum::<f64>() / n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: usize,
    pub empirical_means: Vec<f64>,
    pub selected_true_mean: Option<f64>,
}

/// Index of the smallest value; ties go to the smallest index.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Empirical risk minimiser `m̂` with `P_n f_m̂ = min_m P_n f_m`.
pub fn erm_select(family: &CandidateFamily) -> SelectionOutcome {
    let empirical_means = family.empirical_means();
    let selected = argmin_first(&empirical_means);
    SelectionOutcome {
        selected,
        selected_true_mean: family.true_means().map(|t| t[selected]),
        empirical_means,
    }
}

/// `√(2y/n)·sigma_sum + y/(3n)`: one-sided Bernstein deviation of
/// `(P − P_n)(f_m' − f_m)` at confidence `1 − e^{−y}`, with
/// `sigma_sum = σ_m + σ_m'`.
pub fn bernstein_deviation(sigma_sum: f64, y: f64, n: u64) -> Result<f64> {
    if !(sigma_sum >= 0.0) {
        return Err(Error::domain("sigma_sum", sigma_sum, "must be nonnegative"));
    }
    if !(y >= 0.0) {
        return Err(Error::domain("y", y, "must be nonnegative"));
    }
    if n == 0 {
        return Err(Error::domain("n", 0.0, "sample count must be positive"));
    }
    let n = n as f64;
    Ok((2.0 * y / n).sqrt() * sigma_sum + y / (3.0 * n))
}

/// Inputs of the finite-family selection bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub card_m: usize,
    pub epsilon: f64,
    pub x: f64,
    pub modulus: PowerModulus,
    pub inf_true_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub threshold: f64,
    pub probability: f64,
}

impl BoundInputs {
    pub fn new(
        n: u64,
        card_m: usize,
        epsilon: f64,
        x: f64,
        modulus: PowerModulus,
        inf_true_mean: f64,
    ) -> Result<Self> {
        let b = Self {
            n,
            card_m,
            epsilon,
            x,
            modulus,
            inf_true_mean,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n", 0.0, "sample count must be positive"));
        }
        if self.card_m < 2 {
            return Err(Error::domain(
                "card_M",
                self.card_m as f64,
                "family must hold at least 2 functions",
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain("epsilon", self.epsilon, "must lie in (0, 1)"));
        }
        if !(self.x >= 0.0) {
            return Err(Error::domain("x", self.x, "must be nonnegative"));
        }
        if !(self.inf_true_mean >= 0.0) {
            return Err(Error::domain(
                "inf_true_mean",
                self.inf_true_mean,
                "must be nonnegative",
            ));
        }
        Ok(())
    }

    /// `C_ε = (1+ε)/(1−ε)`.
    pub fn c_eps(&self) -> f64 {
        (1.0 + self.epsilon) / (1.0 - self.epsilon)
    }

    /// `C'_ε = 1/(1−ε)`.
    pub fn c_prime_eps(&self) -> f64 {
        1.0 / (1.0 - self.epsilon)
    }

    /// `(4/ε)·φ*(n^{-1/2}) + 1/(3n)`.
    pub fn rate_term(&self) -> Result<f64> {
        let delta_n = self.modulus.delta_n(self.n)?;
        Ok(4.0 / self.epsilon * delta_n + 1.0 / (3.0 * self.n as f64))
    }

    /// Threshold exceeded by `P f_m̂` with probability at most `e^{−x}`.
    pub fn tail_bound(&self) -> Result<TailBound> {
        self.validate()?;
        let threshold = self.c_eps() * self.inf_true_mean
            + self.c_prime_eps() * (self.x + (self.card_m as f64).ln()) * self.rate_term()?;
        Ok(TailBound {
            threshold,
            probability: (-self.x).exp(),
        })
    }

    /// Upper bound on `E[P f_m̂]`; `x` is ignored.
    pub fn expectation_bound(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.c_eps() * self.inf_true_mean
            + self.c_prime_eps()
                * (std::f64::consts::E * self.card_m as f64).ln()
                * self.rate_term()?)
    }
}

/// Source of independent family draws with known ground truth.
pub trait FamilySampler: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<CandidateFamily>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSelection {
    pub selected: usize,
    pub selected_true_mean: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailVerification {
    pub threshold: f64,
    /// `e^{−x}`.
    pub bound: f64,
    pub violation_frequency: f64,
    /// `e^{−x} + 3·√(e^{−x}(1−e^{−x})/replicates)`.
    pub tolerance: f64,
    pub flagged: bool,
    pub mean_selected_true_mean: f64,
    pub std_error_selected_true_mean: f64,
    pub expectation_bound: f64,
    pub replicates: Vec<ReplicateSelection>,
}

/// Draws `replicates` families, selects by ERM in each, and counts the
/// events `P f_m̂ > threshold`. Replicate `r` uses stream `(seed, r, Family)`.
pub fn verify_tail_bound_mc<S: FamilySampler + ?Sized>(
    sampler: &S,
    bounds: &BoundInputs,
    replicates: usize,
    seed: u64,
) -> Result<TailVerification> {
    if replicates == 0 {
        return Err(Error::domain(
            "replicates",
            0.0,
            "need at least one replicate",
        ));
    }
    let tail = bounds.tail_bound()?;
    let expectation_bound = bounds.expectation_bound()?;

    let rows: Vec<ReplicateSelection> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r, StreamRole::Family);
            let family = sampler.draw(&mut rng)?;
            let outcome = erm_select(&family);
            let truth = outcome.selected_true_mean.ok_or(Error::Unverifiable)?;
            Ok(ReplicateSelection {
                selected: outcome.selected,
                selected_true_mean: truth,
                violated: truth > tail.threshold,
            })
        })
        .collect::<Result<_>>()?;

    let reps = replicates as f64;
    let violations = rows.iter().filter(|r| r.violated).count() as f64;
    let violation_frequency = violations / reps;
    let q = tail.probability;
    let tolerance = q + 3.0 * (q * (1.0 - q) / reps).sqrt();

    let mean = rows.iter().map(|r| r.selected_true_mean).sum::<f64>() / reps;
    let var = if replicates > 1 {
        rows.iter()
            .map(|r| (r.selected_true_mean - mean).powi(2))
            .sum::<f64>()
            / (reps - 1.0)
    } else {
        0.0
    };

    Ok(TailVerification {
        threshold: tail.threshold,
        bound: q,
        violation_frequency,
        tolerance,
        flagged: violation_frequency > tolerance,
        mean_selected_true_mean: mean,
        std_error_selected_true_mean: (var / reps).sqrt(),
        expectation_bound,
        replicates: rows,
    })
}
