//! Monte Carlo pipelines, one per experiment kind.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;

use super::config::{
    AkaikeParams, AkaikeSetting, AlphaGrid, CalibrateParams, Experiment, ExperimentConfig,
    HoldoutAdaptParams, SegmentParams, VerifyTailParams,
};
use super::record::{Check, RunRecord, Table};
use super::stats::{loglog_slope, mean, median, std_error};
use super::HarnessError;
use crate::calibration::{
    akaike_diagnostics, calibrated_penalty, default_large_dim_threshold, dimension_jump,
    geometric_grid, penalty_path, DimensionJump, JumpStatus,
};
use crate::error::{Error, Result};
use crate::holdout::{oracle_check_values, run_holdout, HoldoutSplit};
use crate::modulus::PowerModulus;
use crate::problems::{
    dp_segment, ChangepointProblem, Classifier, DiscreteClassificationProblem, HistogramModel,
    MallowsProblem, Model, NestedProjection, Partition, Problem,
};
use crate::rng::{self, StreamRole};
use crate::selection::{verify_tail_bound_mc, BoundInputs, CandidateFamily, FamilySampler};

type Outcome = std::result::Result<RunRecord, HarnessError>;

/// Validates the configuration and runs the matching pipeline on the current
/// rayon pool.
pub fn run(config: &ExperimentConfig) -> Outcome {
    config.validate()?;
    let start = Instant::now();
    let mut record = match &config.experiment {
        Experiment::VerifyTail(p) => verify_tail(config, p),
        Experiment::HoldoutAdapt(p) => holdout_adapt(config, p),
        Experiment::Calibrate(p) => calibrate(config, p),
        Experiment::AkaikeCheck(p) => akaike_check(config, p),
        Experiment::Segment(p) => segment(config, p),
    }?;
    record.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn new_record(config: &ExperimentConfig, replicates: Table) -> RunRecord {
    RunRecord {
        kind: config.kind(),
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        elapsed_seconds: 0.0,
        replicates,
        curves: BTreeMap::new(),
        aggregates: BTreeMap::new(),
        checks: Vec::new(),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn par_replicates<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------- verify-tail

/// Loss differences `f_m = ℓ•g_m − ℓ•b*` of fixed classifiers on fresh samples.
struct ClassifierFamily {
    problem: DiscreteClassificationProblem,
    bayes: Classifier,
    members: Vec<Classifier>,
    labels: Vec<String>,
    means: Vec<f64>,
    second_moments: Vec<f64>,
    n: usize,
}

impl ClassifierFamily {
    fn new(
        problem: DiscreteClassificationProblem,
        partitions: &[Vec<usize>],
        n: usize,
    ) -> Result<Self> {
        let bayes = problem.bayes_classifier();
        let mut members = Vec::with_capacity(partitions.len());
        let mut labels = Vec::with_capacity(partitions.len());
        let mut means = Vec::with_capacity(partitions.len());
        let mut second_moments = Vec::with_capacity(partitions.len());
        for (m, cell_of) in partitions.iter().enumerate() {
            let cells = cell_of.iter().max().map_or(0, |c| c + 1);
            let g = Partition::new(cell_of.clone(), cells)?.best_classifier(&problem)?;
            means.push(problem.excess_risk_01(&g)?);
            second_moments.push(problem.disagreement_mass(&g)?);
            labels.push(format!("m{m}:hist{cells}"));
            members.push(g);
        }
        Ok(Self {
            problem,
            bayes,
            members,
            labels,
            means,
            second_moments,
            n,
        })
    }

    /// Checks `P f_m ≥ φ(√(P f_m²))` for every member.
    fn check_modulus(&self, modulus: &PowerModulus) -> Result<()> {
        for (m, (mean, second)) in self.means.iter().zip(&self.second_moments).enumerate() {
            let rhs = modulus.eval(second.sqrt())?;
            if *mean < rhs - 1e-12 {
                return Err(Error::InvalidProblem(format!(
                    "member {m}: P f = {mean} is below φ(√(P f²)) = {rhs}"
                )));
            }
        }
        Ok(())
    }
}

impl FamilySampler for ClassifierFamily {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<CandidateFamily> {
        let sample = self.problem.sample(self.n, rng)?;
        let values = self
            .members
            .iter()
            .map(|g| {
                sample
                    .iter()
                    .map(|z| {
                        let own = (g.predict(z.x) != z.y) as u8 as f64;
                        let best = (self.bayes.predict(z.x) != z.y) as u8 as f64;
                        own - best
                    })
                    .collect()
            })
            .collect();
        CandidateFamily::new(self.labels.clone(), values)?
            .with_truth(self.means.clone(), Some(self.second_moments.clone()))
    }
}

fn verify_tail(config: &ExperimentConfig, p: &VerifyTailParams) -> Outcome {
    let problem =
        DiscreteClassificationProblem::new(p.design.prob.clone(), p.design.eta.clone(), None)?;
    let modulus = match p.modulus {
        Some(m) => m,
        None => PowerModulus::massart(problem.realized_margin())?,
    };
    let family = ClassifierFamily::new(problem, &p.design.partitions, p.n)?;
    family.check_modulus(&modulus)?;
    let inf = family.means.iter().copied().fold(f64::INFINITY, f64::min);
    let bounds = BoundInputs::new(
        p.n as u64,
        family.members.len(),
        p.epsilon,
        p.x,
        modulus,
        inf,
    )?;
    let v = verify_tail_bound_mc(&family, &bounds, config.replicates, config.seed)?;

    let mut rows = Table::new(["replicate", "selected", "selected_true_mean", "violated"]);
    for (r, rep) in v.replicates.iter().enumerate() {
        rows.push(vec![
            r as f64,
            rep.selected as f64,
            rep.selected_true_mean,
            flag(rep.violated),
        ]);
    }
    let mut record = new_record(config, rows);

    let mut members = Table::new([
        "model",
        "cells",
        "true_mean",
        "second_moment",
        "selection_frequency",
    ]);
    for (m, cell_of) in p.design.partitions.iter().enumerate() {
        let hits = v.replicates.iter().filter(|r| r.selected == m).count();
        members.push(vec![
            m as f64,
            cell_of.iter().max().map_or(0, |c| c + 1) as f64,
            family.means[m],
            family.second_moments[m],
            hits as f64 / config.replicates as f64,
        ]);
    }
    record.curves.insert("members".into(), members);

    let a = &mut record.aggregates;
    a.insert("modulus_c".into(), modulus.c());
    a.insert("modulus_p".into(), modulus.p());
    a.insert("delta_n".into(), modulus.delta_n(p.n as u64)?);
    a.insert("inf_true_mean".into(), inf);
    a.insert("threshold".into(), v.threshold);
    a.insert("bound".into(), v.bound);
    a.insert("violation_frequency".into(), v.violation_frequency);
    a.insert("tolerance".into(), v.tolerance);
    a.insert("mean_selected_true_mean".into(), v.mean_selected_true_mean);
    a.insert(
        "std_error_selected_true_mean".into(),
        v.std_error_selected_true_mean,
    );
    a.insert("expectation_bound".into(), v.expectation_bound);

    record.checks.push(Check::new(
        "tail-bound",
        !v.flagged,
        format!(
            "violation frequency {:.6} vs e^-x + 3 sd = {:.6} (threshold {:.6})",
            v.violation_frequency, v.tolerance, v.threshold
        ),
    ));
    let slack = 3.0 * v.std_error_selected_true_mean;
    record.checks.push(Check::new(
        "expectation-bound",
        v.mean_selected_true_mean <= v.expectation_bound + slack,
        format!(
            "mean P f = {:.6} (3 se = {:.2e}) vs bound {:.6}",
            v.mean_selected_true_mean, slack, v.expectation_bound
        ),
    ));
    Ok(record)
}

// -------------------------------------------------------------- holdout-adapt

struct HoldoutRow {
    selected_dim: usize,
    selected_excess: f64,
    oracle_excess: f64,
    failures: usize,
}

fn holdout_adapt(config: &ExperimentConfig, p: &HoldoutAdaptParams) -> Outcome {
    let problem = DiscreteClassificationProblem::geometric_blocks(
        p.design_size,
        p.mass_decay,
        p.block,
        p.margin_h,
    )?;
    let models = p
        .dims
        .iter()
        .map(|&d| HistogramModel::regular(p.design_size, d))
        .collect::<Result<Vec<_>>>()?;
    let splits = p
        .sizes
        .iter()
        .map(|&n| {
            let train = ((p.train_ratio * n as f64).round() as usize).max(1);
            HoldoutSplit::new(train, n, p.split_policy)
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = config.replicates;
    let results: Vec<HoldoutRow> = par_replicates(splits.len() * reps, |k| {
        let split = &splits[k as usize / reps];
        let report = run_holdout(&problem, &models, split, config.seed, k)?;
        Ok(HoldoutRow {
            selected_dim: report.models[report.selected].dim,
            selected_excess: report.selected_excess,
            oracle_excess: report.oracle_excess,
            failures: report.models.iter().filter(|m| m.failure.is_some()).count(),
        })
    })?;

    let mut rows = Table::new([
        "n",
        "replicate",
        "train_size",
        "selected_dim",
        "selected_excess",
        "oracle_excess",
        "failed_fits",
    ]);
    for (k, row) in results.iter().enumerate() {
        let split = &splits[k / reps];
        rows.push(vec![
            split.validation_size as f64,
            (k % reps) as f64,
            split.train_size as f64,
            row.selected_dim as f64,
            row.selected_excess,
            row.oracle_excess,
            row.failures as f64,
        ]);
    }
    let mut record = new_record(config, rows);

    let modulus = if problem.realized_margin() > 0.0 {
        Some(PowerModulus::massart(problem.realized_margin())?)
    } else {
        None
    };
    let ns: Vec<f64> = splits.iter().map(|s| s.validation_size as f64).collect();
    let mut sel_means = Vec::with_capacity(splits.len());
    let mut oracle_means = Vec::with_capacity(splits.len());
    let mut rhs = Vec::with_capacity(splits.len());
    let mut inequality_holds = true;
    for (i, chunk) in results.chunks(reps).enumerate() {
        let sel: Vec<f64> = chunk.iter().map(|r| r.selected_excess).collect();
        let orc: Vec<f64> = chunk.iter().map(|r| r.oracle_excess).collect();
        let (ms, mo) = (mean(&sel), mean(&orc));
        let bound = match modulus {
            Some(m) => {
                let c = oracle_check_values(
                    ms,
                    mo,
                    p.epsilon,
                    m,
                    models.len(),
                    splits[i].validation_size as u64,
                )?;
                inequality_holds &= c.holds;
                c.rhs
            }
            None => f64::NAN,
        };
        sel_means.push((ms, std_error(&sel)));
        oracle_means.push(mo);
        rhs.push(bound);
    }
    let selected: Vec<f64> = sel_means.iter().map(|s| s.0).collect();
    let slope = loglog_slope(&ns, &selected);
    let oracle_slope = loglog_slope(&ns, &oracle_means);

    let mut curve = Table::new([
        "n",
        "mean_selected_excess",
        "std_error_selected_excess",
        "mean_oracle_excess",
        "rhs",
        "slope",
    ]);
    for i in 0..ns.len() {
        curve.push(vec![
            ns[i],
            sel_means[i].0,
            sel_means[i].1,
            oracle_means[i],
            rhs[i],
            slope,
        ]);
    }
    record.curves.insert("excess_vs_n".into(), curve);

    let a = &mut record.aggregates;
    a.insert("realized_margin".into(), problem.realized_margin());
    a.insert("slope".into(), slope);
    a.insert("oracle_slope".into(), oracle_slope);
    a.insert(
        "failed_fits".into(),
        results.iter().map(|r| r.failures).sum::<usize>() as f64,
    );

    if modulus.is_some() {
        record.checks.push(Check::new(
            "oracle-inequality",
            inequality_holds,
            "mean selected excess vs bound at the mean oracle excess, every n",
        ));
    }
    if let Some(max) = p.expected_slope.max {
        record.checks.push(Check::new(
            "slope-max",
            slope <= max,
            format!("slope {slope:.4} vs max {max}"),
        ));
    }
    if let Some(min) = p.expected_slope.min {
        record.checks.push(Check::new(
            "slope-min",
            slope >= min,
            format!("slope {slope:.4} vs min {min}"),
        ));
    }
    Ok(record)
}

// ------------------------------------------------------------------ calibrate

fn status_code(s: JumpStatus) -> f64 {
    match s {
        JumpStatus::Detected => 0.0,
        JumpStatus::NoJump => 1.0,
        JumpStatus::NotReached => 2.0,
    }
}

fn scaled_grid(g: &AlphaGrid) -> Result<Vec<f64>> {
    geometric_grid(g.lo, g.hi, g.points)
}

struct CalibrateRow {
    jump: DimensionJump,
    path_dims: Vec<usize>,
    excess_along_grid: Vec<f64>,
    calibrated_dim: usize,
    calibrated_excess: f64,
    oracle_excess: f64,
}

fn calibrate(config: &ExperimentConfig, p: &CalibrateParams) -> Outcome {
    let problem = MallowsProblem::new(p.n, p.d_true, p.sigma, p.signal_level)?;
    let unit = problem.unit();
    let grid = scaled_grid(&p.grid)?;
    let alphas: Vec<f64> = grid.iter().map(|a| a * unit).collect();
    let dims: Vec<usize> = (1..=p.d_max).collect();
    let threshold = p
        .large_dim_threshold
        .unwrap_or(default_large_dim_threshold(p.d_max));
    let nf = p.n as f64;

    let results = par_replicates(config.replicates, |r| {
        let mut noise = rng::stream(config.seed, r, StreamRole::Noise);
        let y = problem.responses(&mut noise);
        let risks: Vec<f64> = crate::problems::mallows::nested_rss(&y, p.d_max)?
            .into_iter()
            .map(|v| v / nf)
            .collect();
        // exact L(ŝ_D, s) for every D
        let mut excess = Vec::with_capacity(p.d_max);
        let mut within = 0.0;
        for d in 1..=p.d_max {
            let e = y[d - 1] - problem.signal()[d - 1];
            within += e * e;
            excess.push(problem.bias(d) + within / nf);
        }
        let path = penalty_path(&risks, &dims, &alphas)?;
        let jump = dimension_jump(&path, threshold)?;
        let pen = calibrated_penalty(jump.alpha_min)?;
        let chosen = pen.select(&risks, &dims)?;
        Ok(CalibrateRow {
            jump,
            excess_along_grid: path.selected_dims.iter().map(|&d| excess[d - 1]).collect(),
            path_dims: path.selected_dims,
            calibrated_dim: dims[chosen],
            calibrated_excess: excess[chosen],
            oracle_excess: excess.iter().copied().fold(f64::INFINITY, f64::min),
        })
    })?;

    let mut rows = Table::new([
        "replicate",
        "jump_alpha",
        "jump_status",
        "jump_magnitude",
        "largest_drop_alpha",
        "agree",
        "calibrated_dim",
        "calibrated_excess",
        "oracle_excess",
    ]);
    for (r, row) in results.iter().enumerate() {
        rows.push(vec![
            r as f64,
            row.jump.alpha_min / unit,
            status_code(row.jump.status),
            row.jump.jump_magnitude as f64,
            row.jump.largest_drop_alpha / unit,
            flag(row.jump.agree),
            row.calibrated_dim as f64,
            row.calibrated_excess,
            row.oracle_excess,
        ]);
    }
    let mut record = new_record(config, rows);

    let mut path0 = Table::new(["alpha", "selected_dim"]);
    for (a, d) in grid.iter().zip(&results[0].path_dims) {
        path0.push(vec![*a, *d as f64]);
    }
    record.curves.insert("path".into(), path0);

    let reps = results.len() as f64;
    let mut risk_curve = Table::new(["alpha", "mean_selected_dim", "mean_excess"]);
    let mut mean_excess = Vec::with_capacity(grid.len());
    for (k, a) in grid.iter().enumerate() {
        let dim = results.iter().map(|r| r.path_dims[k] as f64).sum::<f64>() / reps;
        let ex = results.iter().map(|r| r.excess_along_grid[k]).sum::<f64>() / reps;
        mean_excess.push(ex);
        risk_curve.push(vec![*a, dim, ex]);
    }
    record.curves.insert("risk_vs_alpha".into(), risk_curve);

    let jumps: Vec<f64> = results.iter().map(|r| r.jump.alpha_min / unit).collect();
    let jump_alpha = median(&jumps);
    let best = super::stats::argmin(&mean_excess);
    let optimal_alpha = grid[best];
    let ratio = optimal_alpha / jump_alpha;
    let detected = results
        .iter()
        .filter(|r| r.jump.status == JumpStatus::Detected)
        .count() as f64;
    let agree = results.iter().filter(|r| r.jump.agree).count() as f64;

    let a = &mut record.aggregates;
    a.insert("unit".into(), unit);
    a.insert("large_dim_threshold".into(), threshold as f64);
    a.insert("jump_alpha".into(), jump_alpha);
    a.insert("optimal_alpha".into(), optimal_alpha);
    a.insert("ratio".into(), ratio);
    a.insert("min_mean_excess".into(), mean_excess[best]);
    a.insert(
        "mean_calibrated_excess".into(),
        mean(
            &results
                .iter()
                .map(|r| r.calibrated_excess)
                .collect::<Vec<_>>(),
        ),
    );
    a.insert(
        "mean_oracle_excess".into(),
        mean(&results.iter().map(|r| r.oracle_excess).collect::<Vec<_>>()),
    );
    a.insert("detected_fraction".into(), detected / reps);
    a.insert("agree_fraction".into(), agree / reps);

    record.checks.push(Check::new(
        "jump-window",
        p.jump_window.contains(jump_alpha),
        format!("median jump alpha {jump_alpha:.4} vs {}", p.jump_window),
    ));
    record.checks.push(Check::new(
        "optimum-window",
        p.optimum_window.contains(optimal_alpha),
        format!(
            "risk-minimising alpha {optimal_alpha:.4} vs {}",
            p.optimum_window
        ),
    ));
    record.checks.push(Check::new(
        "ratio-window",
        p.ratio_window.contains(ratio),
        format!("ratio {ratio:.4} vs {}", p.ratio_window),
    ));
    Ok(record)
}

// --------------------------------------------------------------- akaike-check

struct AkaikeRows {
    b_hat: Vec<f64>,
    v_hat: Vec<f64>,
    excess_within: Vec<f64>,
}

fn akaike_replicates<P, M>(
    config: &ExperimentConfig,
    problem: &P,
    models: &[M],
    n: usize,
) -> Result<(Vec<f64>, Vec<AkaikeRows>)>
where
    P: Problem + Sync,
    M: Model<P> + Sync,
{
    let bias = models
        .iter()
        .map(|m| {
            let g = m
                .population_minimizer(problem)
                .ok_or_else(|| Error::DiagnosticUnavailable(m.label()))?;
            problem.excess_risk(&g)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = par_replicates(config.replicates, |r| {
        let mut rng = rng::stream(config.seed, r, StreamRole::Sample);
        let train = problem.generate(n, &mut rng)?;
        let d = akaike_diagnostics(problem, models, &train)?;
        Ok(AkaikeRows {
            b_hat: d.b_hat,
            v_hat: d.v_hat,
            excess_within: d.excess_within,
        })
    })?;
    Ok((bias, rows))
}

fn akaike_check(config: &ExperimentConfig, p: &AkaikeParams) -> Outcome {
    let (bias, results, theory) = match &p.setting {
        AkaikeSetting::Mallows {
            n,
            d_true,
            sigma,
            signal_level,
        } => {
            let problem = MallowsProblem::new(*n, *d_true, *sigma, *signal_level)?;
            let models: Vec<NestedProjection> =
                p.dims.iter().map(|&dim| NestedProjection { dim }).collect();
            let (bias, rows) = akaike_replicates(config, &problem, &models, *n)?;
            let theory: Vec<f64> = p.dims.iter().map(|&d| d as f64 * problem.unit()).collect();
            (bias, rows, Some(theory))
        }
        AkaikeSetting::Histogram {
            n,
            margin_h,
            design_size,
            mass_decay,
            block,
        } => {
            let problem = DiscreteClassificationProblem::geometric_blocks(
                *design_size,
                *mass_decay,
                *block,
                *margin_h,
            )?;
            let models = p
                .dims
                .iter()
                .map(|&d| HistogramModel::regular(*design_size, d))
                .collect::<Result<Vec<_>>>()?;
            let (bias, rows) = akaike_replicates(config, &problem, &models, *n)?;
            (bias, rows, None)
        }
    };

    let mut rows = Table::new(["replicate", "dim", "b_hat", "v_hat", "excess_within"]);
    for (r, row) in results.iter().enumerate() {
        for (m, &dim) in p.dims.iter().enumerate() {
            rows.push(vec![
                r as f64,
                dim as f64,
                row.b_hat[m],
                row.v_hat[m],
                row.excess_within[m],
            ]);
        }
    }
    let mut record = new_record(config, rows);

    let mut curve = Table::new([
        "dim",
        "mean_v_hat",
        "mean_excess_within",
        "mean_b_hat",
        "std_error_b_hat",
        "bias",
        "theory",
        "ratio",
    ]);
    for (m, &dim) in p.dims.iter().enumerate() {
        let v: Vec<f64> = results.iter().map(|r| r.v_hat[m]).collect();
        let l: Vec<f64> = results.iter().map(|r| r.excess_within[m]).collect();
        let b: Vec<f64> = results.iter().map(|r| r.b_hat[m]).collect();
        let (mv, ml, mb, seb) = (mean(&v), mean(&l), mean(&b), std_error(&b));
        let ratio = mv / ml;
        let th = theory.as_ref().map_or(f64::NAN, |t| t[m]);
        curve.push(vec![dim as f64, mv, ml, mb, seb, bias[m], th, ratio]);

        let a = &mut record.aggregates;
        a.insert(format!("mean_v_hat_d{dim}"), mv);
        a.insert(format!("mean_excess_within_d{dim}"), ml);
        if ratio.is_finite() {
            a.insert(format!("ratio_d{dim}"), ratio);
        }

        let min_v = v.iter().copied().fold(f64::INFINITY, f64::min);
        record.checks.push(Check::new(
            format!("v-hat-nonnegative-d{dim}"),
            min_v >= -1e-12,
            format!("smallest v_hat {min_v:.3e}"),
        ));
        let tol_b = 4.0 * seb + 1e-12;
        record.checks.push(Check::new(
            format!("b-hat-unbiased-d{dim}"),
            (mb - bias[m]).abs() <= tol_b,
            format!(
                "mean b_hat {mb:.6} vs bias {:.6} (4 se = {tol_b:.2e})",
                bias[m]
            ),
        ));
        if theory.is_some() {
            let rel = |x: f64| (x - th).abs() / th;
            record.checks.push(Check::new(
                format!("v-hat-theory-d{dim}"),
                rel(mv) <= p.theory_tolerance,
                format!("mean v_hat {mv:.6} vs {th:.6} (rel {:.4})", rel(mv)),
            ));
            record.checks.push(Check::new(
                format!("excess-theory-d{dim}"),
                rel(ml) <= p.theory_tolerance,
                format!("mean L {ml:.6} vs {th:.6} (rel {:.4})", rel(ml)),
            ));
            let gap = (mv - ml).abs() / (0.5 * (mv + ml));
            record.checks.push(Check::new(
                format!("agreement-d{dim}"),
                gap <= p.agreement_tolerance,
                format!("relative gap {gap:.4}"),
            ));
        }
    }
    record.curves.insert("diagnostics".into(), curve);
    Ok(record)
}

// -------------------------------------------------------------------- segment

struct SegmentRow {
    jump: DimensionJump,
    reference: f64,
    selected: usize,
    path_dims: Vec<usize>,
}

fn segment(config: &ExperimentConfig, p: &SegmentParams) -> Outcome {
    let problem = ChangepointProblem::equal_segments(p.n, p.levels.clone(), p.sigma)?;
    let grid = scaled_grid(&p.grid)?;
    let dims: Vec<usize> = (1..=p.d_max).collect();
    let threshold = p
        .large_dim_threshold
        .unwrap_or(default_large_dim_threshold(p.d_max));
    let truth = problem.segments();
    let nf = p.n as f64;

    let analyse = |signal: &[f64]| -> Result<(SegmentRow, Vec<crate::problems::Segmentation>)> {
        let segs = dp_segment(signal, p.d_max)?;
        let risks: Vec<f64> = segs.iter().map(|s| s.rss / nf).collect();
        // empirical variance of the signal sets the penalty scale
        let reference = risks[0] / nf;
        let scale = if reference > 0.0 { reference } else { 1.0 / nf };
        let alphas: Vec<f64> = grid.iter().map(|a| a * scale).collect();
        let path = penalty_path(&risks, &dims, &alphas)?;
        let jump = dimension_jump(&path, threshold)?;
        let chosen = calibrated_penalty(jump.alpha_min)?.select(&risks, &dims)?;
        Ok((
            SegmentRow {
                jump,
                reference: scale,
                selected: dims[chosen],
                path_dims: path.selected_dims,
            },
            segs,
        ))
    };

    let results = par_replicates(config.replicates, |r| {
        let mut rng = rng::stream(config.seed, r, StreamRole::Sample);
        analyse(&problem.sample(&mut rng)).map(|x| x.0)
    })?;

    let mut rows = Table::new([
        "replicate",
        "jump_alpha",
        "jump_status",
        "agree",
        "selected_segments",
        "recovered",
    ]);
    for (r, row) in results.iter().enumerate() {
        rows.push(vec![
            r as f64,
            row.jump.alpha_min / row.reference,
            status_code(row.jump.status),
            flag(row.jump.agree),
            row.selected as f64,
            flag(row.selected == truth),
        ]);
    }
    let mut record = new_record(config, rows);

    // replicate 0 in full, for inspection
    let mut rng = rng::stream(config.seed, 0, StreamRole::Sample);
    let signal0 = problem.sample(&mut rng);
    let (row0, segs0) = analyse(&signal0)?;
    let fitted = segs0[row0.selected - 1].fitted();
    let mean_signal = problem.mean_signal();
    let mut seg_curve = Table::new(["index", "signal", "fitted", "truth"]);
    for i in 0..p.n {
        seg_curve.push(vec![i as f64, signal0[i], fitted[i], mean_signal[i]]);
    }
    record.curves.insert("segmentation".into(), seg_curve);
    let mut path0 = Table::new(["alpha", "selected_dim"]);
    for (a, d) in grid.iter().zip(&row0.path_dims) {
        path0.push(vec![*a, *d as f64]);
    }
    record.curves.insert("path".into(), path0);

    let reps = results.len() as f64;
    let recovery = results.iter().filter(|r| r.selected == truth).count() as f64 / reps;
    let jumps: Vec<f64> = results
        .iter()
        .map(|r| r.jump.alpha_min / r.reference)
        .collect();
    let a = &mut record.aggregates;
    a.insert("true_segments".into(), truth as f64);
    a.insert("recovery_rate".into(), recovery);
    a.insert(
        "mean_selected_segments".into(),
        results.iter().map(|r| r.selected as f64).sum::<f64>() / reps,
    );
    a.insert("jump_alpha".into(), median(&jumps));
    a.insert(
        "agree_fraction".into(),
        results.iter().filter(|r| r.jump.agree).count() as f64 / reps,
    );
    record.checks.push(Check::new(
        "recovery",
        recovery >= p.min_recovery,
        format!(
            "recovered {truth} segments in {:.1}% of replicates",
            100.0 * recovery
        ),
    ));
    Ok(record)
}
