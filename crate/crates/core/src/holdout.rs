//! Hold-out selection: fit every model on the first `N` observations, select
//! by empirical risk on the remaining `n`, and compare the selected excess
//! risk with the oracle inequality.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulus::PowerModulus;
use crate::problems::{Model, Problem};
use crate::rng::{self, StreamRole};
use crate::selection::{erm_select, BoundInputs, CandidateFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    Prefix,
    SeededShuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train_size: usize,
    pub validation_size: usize,
    pub policy: SplitPolicy,
}

impl HoldoutSplit {
    pub fn new(train_size: usize, validation_size: usize, policy: SplitPolicy) -> Result<Self> {
        if train_size == 0 || validation_size == 0 {
            return Err(Error::Split(format!(
                "train ({train_size}) and validation ({validation_size}) sizes must be positive"
            )));
        }
        Ok(Self {
            train_size,
            validation_size,
            policy,
        })
    }

    /// `N = n` prefix split.
    pub fn balanced(n: usize) -> Result<Self> {
        Self::new(n, n, SplitPolicy::Prefix)
    }

    pub fn total(&self) -> usize {
        self.train_size + self.validation_size
    }
}

/// Partitions `data` into train / validation parts. The shuffle policy draws
/// its permutation from stream `(seed, 0, Shuffle)`.
pub fn split<T: Clone>(data: &[T], s: &HoldoutSplit, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let mut rng = rng::stream(seed, 0, StreamRole::Shuffle);
    split_with(data, s, &mut rng)
}

pub fn split_with<T: Clone>(
    data: &[T],
    s: &HoldoutSplit,
    rng: &mut dyn RngCore,
) -> Result<(Vec<T>, Vec<T>)> {
    if s.train_size == 0 || s.validation_size == 0 {
        return Err(Error::Split(
            "train and validation sizes must be positive".into(),
        ));
    }
    if data.len() != s.total() {
        return Err(Error::Split(format!(
            "dataset has {} observations, split expects {} + {}",
            data.len(),
            s.train_size,
            s.validation_size
        )));
    }
    match s.policy {
        SplitPolicy::Prefix => Ok((data[..s.train_size].to_vec(), data[s.train_size..].to_vec())),
        SplitPolicy::SeededShuffle => {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(rng);
            let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect();
            Ok((pick(&order[..s.train_size]), pick(&order[s.train_size..])))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub label: String,
    pub dim: usize,
    /// `P_n(ℓ•ĝ_m)` on the validation part.
    pub validation_risk: Option<f64>,
    /// Exact `L(ĝ_m, g*)`.
    pub excess_risk: Option<f64>,
    /// Set when fitting failed; the model is then excluded from selection.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub models: Vec<ModelOutcome>,
    /// Index into `models`.
    pub selected: usize,
    pub selected_excess: f64,
    pub oracle_excess: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

impl HoldoutReport {
    pub fn excess_risks(&self) -> Vec<Option<f64>> {
        self.models.iter().map(|m| m.excess_risk).collect()
    }

    pub fn fitted_count(&self) -> usize {
        self.models.iter().filter(|m| m.failure.is_none()).count()
    }

    pub fn has_failures(&self) -> bool {
        self.models.iter().any(|m| m.failure.is_some())
    }

    pub fn selected_label(&self) -> &str {
        &self.models[self.selected].label
    }

    /// Oracle check with `|M|` = number of fitted models and the report's
    /// validation size.
    pub fn oracle_check(&self, epsilon: f64, modulus: PowerModulus) -> Result<OracleCheck> {
        oracle_check(
            self,
            epsilon,
            modulus,
            self.fitted_count(),
            self.validation_size as u64,
        )
    }
}

/// Generates `N + n` observations from stream `(seed, replicate, Sample)`,
/// splits them, and runs the hold-out selection.
pub fn run_holdout<P, M>(
    problem: &P,
    models: &[M],
    s: &HoldoutSplit,
    seed: u64,
    replicate: u64,
) -> Result<HoldoutReport>
where
    P: Problem,
    P::Sample: Clone,
    M: Model<P>,
{
    let mut sample_rng = rng::stream(seed, replicate, StreamRole::Sample);
    let data = problem.generate(s.total(), &mut sample_rng)?;
    let mut shuffle_rng = rng::stream(seed, replicate, StreamRole::Shuffle);
    let (train, validation) = split_with(&data, s, &mut shuffle_rng)?;
    holdout_on(problem, models, &train, &validation)
}

/// Hold-out selection on an explicit train / validation pair.
pub fn holdout_on<P, M>(
    problem: &P,
    models: &[M],
    train: &[P::Sample],
    validation: &[P::Sample],
) -> Result<HoldoutReport>
where
    P: Problem,
    M: Model<P>,
{
    if validation.is_empty() || train.is_empty() {
        return Err(Error::Split("empty train or validation part".into()));
    }
    let mut outcomes = Vec::with_capacity(models.len());
    let mut fitted = Vec::new();
    let mut rows = Vec::new();
    for (k, model) in models.iter().enumerate() {
        let label = model.label();
        match model.fit(problem, train) {
            Ok(g) => {
                let mut row = Vec::with_capacity(validation.len());
                for (i, z) in validation.iter().enumerate() {
                    let value = problem.loss(&g, z);
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::LossRange {
                            model: label,
                            sample: i,
                            value,
                        });
                    }
                    row.push(value);
                }
                let excess = problem.excess_risk(&g)?;
                outcomes.push(ModelOutcome {
                    label,
                    dim: model.dim(),
                    validation_risk: Some(row.iter().sum::<f64>() / row.len() as f64),
                    excess_risk: Some(excess),
                    failure: None,
                });
                fitted.push(k);
                rows.push(row);
            }
            Err(e) => outcomes.push(ModelOutcome {
                label,
                dim: model.dim(),
                validation_risk: None,
                excess_risk: None,
                failure: Some(e.to_string()),
            }),
        }
    }

    let selected = match rows.len() {
        0 => return Err(Error::NoFittedModel),
        1 => fitted[0],
        _ => {
            // ℓ•g* is common to every member and leaves the argmin unchanged
            let labels = fitted.iter().map(|&k| outcomes[k].label.clone()).collect();
            let family = CandidateFamily::new_unverified(labels, rows)?;
            fitted[erm_select(&family).selected]
        }
    };

    let oracle_excess = fitted
        .iter()
        .filter_map(|&k| outcomes[k].excess_risk)
        .fold(f64::INFINITY, f64::min);
    let selected_excess = outcomes[selected]
        .excess_risk
        .expect("selected model is fitted");

    Ok(HoldoutReport {
        models: outcomes,
        selected,
        selected_excess,
        oracle_excess,
        train_size: train.len(),
        validation_size: validation.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub holds: bool,
    /// `rhs − selected_excess`.
    pub slack: f64,
    /// `C_ε·oracle + C'_ε·ln(e|M|)·((4/ε)·φ*(n^{-1/2}) + 1/(3n))`.
    pub rhs: f64,
}

/// Right side of the hold-out oracle inequality, evaluated at the report's
/// oracle excess, compared with its selected excess.
pub fn oracle_check(
    report: &HoldoutReport,
    epsilon: f64,
    modulus: PowerModulus,
    card_m: usize,
    n: u64,
) -> Result<OracleCheck> {
    oracle_check_values(
        report.selected_excess,
        report.oracle_excess,
        epsilon,
        modulus,
        card_m,
        n,
    )
}

/// [`oracle_check`] on raw numbers, for Monte Carlo averages of the two sides.
pub fn oracle_check_values(
    selected_excess: f64,
    oracle_excess: f64,
    epsilon: f64,
    modulus: PowerModulus,
    card_m: usize,
    n: u64,
) -> Result<OracleCheck> {
    let rhs =
        BoundInputs::new(n, card_m, epsilon, 0.0, modulus, oracle_excess)?.expectation_bound()?;
    Ok(OracleCheck {
        holds: selected_excess <= rhs,
        slack: rhs - selected_excess,
        rhs,
    })
}
