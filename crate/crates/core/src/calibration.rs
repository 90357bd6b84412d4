//! Data-driven calibration of linear penalties `pen(m) = α·D_m`.
//!
//! The minimal penalty is located as the smallest `α` that stops the
//! penalised criterion from picking very large models; the operational
//! penalty doubles it. Within-model diagnostics (`b̂_m`, `v̂_m`,
//! `L(ĝ_m, g_m)`) are available when the problem exposes `g*` and `g_m`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Model, Problem};

/// `P_n(ℓ•ĝ_m) + α·D_m` over a roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedCriterion {
    pub empirical_risks: Vec<f64>,
    pub dims: Vec<usize>,
    pub alpha: f64,
}

fn check_roster(risks: &[f64], dims: &[usize]) -> Result<()> {
    if risks.is_empty() {
        return Err(Error::InvalidCriterion("empty roster".into()));
    }
    if risks.len() != dims.len() {
        return Err(Error::InvalidCriterion(format!(
            "{} risks for {} dimensions",
            risks.len(),
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidCriterion(
            "dimensions must be at least 1".into(),
        ));
    }
    if risks.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidCriterion("non-finite empirical risk".into()));
    }
    Ok(())
}

impl PenalizedCriterion {
    pub fn new(empirical_risks: Vec<f64>, dims: Vec<usize>, alpha: f64) -> Result<Self> {
        check_roster(&empirical_risks, &dims)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidCriterion(format!(
                "alpha {alpha} must be nonnegative"
            )));
        }
        Ok(Self {
            empirical_risks,
            dims,
            alpha,
        })
    }

    pub fn value(&self, m: usize) -> f64 {
        self.empirical_risks[m] + self.alpha * self.dims[m] as f64
    }
}

/// Minimiser of `risk_m + alpha·D_m`; ties go to the smaller dimension, then
/// to the smaller index.
fn argmin_penalized(risks: &[f64], dims: &[usize], alpha: f64) -> usize {
    let crit = |m: usize| risks[m] + alpha * dims[m] as f64;
    let mut best = 0;
    let mut best_val = crit(0);
    for m in 1..risks.len() {
        let v = crit(m);
        if v < best_val || (v == best_val && dims[m] < dims[best]) {
            best = m;
            best_val = v;
        }
    }
    best
}

pub fn select_penalized(c: &PenalizedCriterion) -> Result<usize> {
    check_roster(&c.empirical_risks, &c.dims)?;
    Ok(argmin_penalized(&c.empirical_risks, &c.dims, c.alpha))
}

/// Geometric grid of `points` values from `lo` to `hi`, both included.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
        return Err(Error::InvalidGrid(format!(
            "need 0 < lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"
        )));
    }
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            if k == points - 1 {
                hi
            } else {
                lo * (ratio * k as f64).exp()
            }
        })
        .collect())
}

/// Selected dimension `D(α)` along an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPath {
    pub alphas: Vec<f64>,
    pub selected: Vec<usize>,
    pub selected_dims: Vec<usize>,
    /// Largest dimension in the roster.
    pub max_dim: usize,
}

pub fn penalty_path(risks: &[f64], dims: &[usize], alpha_grid: &[f64]) -> Result<PenaltyPath> {
    check_roster(risks, dims)?;
    if alpha_grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidGrid(
            "grid values must be finite and nonnegative".into(),
        ));
    }
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    let selected: Vec<usize> = alpha_grid
        .iter()
        .map(|&a| argmin_penalized(risks, dims, a))
        .collect();
    let selected_dims: Vec<usize> = selected.iter().map(|&m| dims[m]).collect();
    if let Some(k) = selected_dims.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidCriterion(format!(
            "selected dimension increases from {} to {} between alpha = {} and {}",
            selected_dims[k],
            selected_dims[k + 1],
            alpha_grid[k],
            alpha_grid[k + 1]
        )));
    }
    Ok(PenaltyPath {
        alphas: alpha_grid.to_vec(),
        selected,
        selected_dims,
        max_dim: *dims.iter().max().expect("nonempty roster"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpStatus {
    /// The path starts above the threshold and falls below it on the grid.
    Detected,
    /// The path never exceeds the threshold; `alpha_min` is the first grid point.
    NoJump,
    /// The path stays above the threshold; `alpha_min` is the last grid point.
    NotReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionJump {
    pub status: JumpStatus,
    /// Smallest grid `α` with `D(α) ≤ threshold`.
    pub alpha_min: f64,
    /// `D(α⁻) − D(α_min)` at the crossing.
    pub jump_magnitude: usize,
    /// Grid `α` right after the largest single drop of `D(α)`.
    pub largest_drop_alpha: f64,
    pub largest_drop: usize,
    /// Crossing and largest drop lie within one grid step of each other.
    pub agree: bool,
    pub threshold: usize,
}

/// `⌈D_max / 2⌉`.
pub fn default_large_dim_threshold(max_dim: usize) -> usize {
    max_dim.div_ceil(2)
}

pub fn dimension_jump(path: &PenaltyPath, large_dim_threshold: usize) -> Result<DimensionJump> {
    if path.alphas.is_empty() || path.alphas.len() != path.selected_dims.len() {
        return Err(Error::InvalidGrid("malformed path".into()));
    }
    if large_dim_threshold == 0 || large_dim_threshold > path.max_dim {
        return Err(Error::DegenerateThreshold {
            threshold: large_dim_threshold,
            max_dim: path.max_dim,
        });
    }
    let dims = &path.selected_dims;

    let mut drop_at = 0;
    let mut largest_drop = 0;
    for k in 1..dims.len() {
        let drop = dims[k - 1].saturating_sub(dims[k]);
        if drop > largest_drop {
            largest_drop = drop;
            drop_at = k;
        }
    }

    let (status, cross_at) = if dims.iter().all(|&d| d <= large_dim_threshold) {
        (JumpStatus::NoJump, 0)
    } else {
        match dims.iter().position(|&d| d <= large_dim_threshold) {
            Some(k) => (JumpStatus::Detected, k),
            None => (JumpStatus::NotReached, dims.len() - 1),
        }
    };
    let jump_magnitude = if status == JumpStatus::Detected {
        dims[cross_at - 1] - dims[cross_at]
    } else {
        0
    };
    Ok(DimensionJump {
        status,
        alpha_min: path.alphas[cross_at],
        jump_magnitude,
        largest_drop_alpha: path.alphas[drop_at],
        largest_drop,
        agree: status == JumpStatus::Detected && cross_at.abs_diff(drop_at) <= 1,
        threshold: large_dim_threshold,
    })
}

/// `pen(m) = slope·D_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPenalty {
    pub slope: f64,
}

impl LinearPenalty {
    pub fn eval(&self, dim: usize) -> f64 {
        self.slope * dim as f64
    }

    /// Penalised selection with this penalty.
    pub fn select(&self, risks: &[f64], dims: &[usize]) -> Result<usize> {
        select_penalized(&PenalizedCriterion::new(
            risks.to_vec(),
            dims.to_vec(),
            self.slope,
        )?)
    }
}

/// Doubles the minimal penalty: `m ↦ 2·alpha_min·D_m`.
pub fn calibrated_penalty(alpha_min: f64) -> Result<LinearPenalty> {
    if !(alpha_min >= 0.0 && alpha_min.is_finite()) {
        return Err(Error::domain("alpha_min", alpha_min, "must be nonnegative"));
    }
    Ok(LinearPenalty {
        slope: 2.0 * alpha_min,
    })
}

/// Per-model decomposition of the empirical criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkaikeDiagnostics {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    /// `b̂_m = P_n(ℓ•g_m − ℓ•g*)`.
    pub b_hat: Vec<f64>,
    /// `v̂_m = P_n(ℓ•g_m − ℓ•ĝ_m)`.
    pub v_hat: Vec<f64>,
    /// `L(ĝ_m, g_m)`.
    pub excess_within: Vec<f64>,
    /// `L(g_m, g*)`.
    pub bias: Vec<f64>,
}

pub fn akaike_diagnostics<P, M>(
    problem: &P,
    models: &[M],
    train: &[P::Sample],
) -> Result<AkaikeDiagnostics>
where
    P: Problem,
    M: Model<P>,
{
    if train.is_empty() {
        return Err(Error::InvalidProblem("empty training sample".into()));
    }
    let target = problem.target();
    let n = train.len() as f64;
    let mean_gap = |a: &P::Predictor, b: &P::Predictor| {
        train
            .iter()
            .map(|z| problem.loss(a, z) - problem.loss(b, z))
            .sum::<f64>()
            / n
    };

    let mut out = AkaikeDiagnostics {
        labels: Vec::with_capacity(models.len()),
        dims: Vec::with_capacity(models.len()),
        b_hat: Vec::with_capacity(models.len()),
        v_hat: Vec::with_capacity(models.len()),
        excess_within: Vec::with_capacity(models.len()),
        bias: Vec::with_capacity(models.len()),
    };
    for model in models {
        let g_m = model
            .population_minimizer(problem)
            .ok_or_else(|| Error::DiagnosticUnavailable(model.label()))?;
        let fitted = model.fit(problem, train)?;
        let bias = problem.excess_risk(&g_m)?;
        out.labels.push(model.label());
        out.dims.push(model.dim());
        out.b_hat.push(mean_gap(&g_m, &target));
        out.v_hat.push(mean_gap(&g_m, &fitted));
        out.excess_within.push(problem.excess_risk(&fitted)? - bias);
        out.bias.push(bias);
    }
    Ok(out)
}

/// Models sharing a dimension, penalised jointly as `G_D`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionGroup {
    pub dim: usize,
    pub members: Vec<usize>,
}

/// Groups roster indices by dimension, in increasing dimension.
pub fn group_by_dimension(dims: &[usize]) -> Vec<DimensionGroup> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (m, &d) in dims.iter().enumerate() {
        groups.entry(d).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|(dim, members)| DimensionGroup { dim, members })
        .collect()
}

/// Empirical risk of each `G_D`: the smallest member risk, with the member
/// attaining it (first on ties).
pub fn grouped_risks(groups: &[DimensionGroup], risks: &[f64]) -> Vec<(f64, usize)> {
    groups
        .iter()
        .map(|g| {
            let mut best = g.members[0];
            for &m in &g.members[1..] {
                if risks[m] < risks[best] {
                    best = m;
                }
            }
            (risks[best], best)
        })
        .collect()
}
