//! Declarative experiment description (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::holdout::SplitPolicy;
use crate::modulus::PowerModulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyTail,
    HoldoutAdapt,
    Calibrate,
    AkaikeCheck,
    Segment,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::VerifyTail => "verify-tail",
            ExperimentKind::HoldoutAdapt => "holdout-adapt",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::AkaikeCheck => "akaike-check",
            ExperimentKind::Segment => "segment",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    VerifyTail(VerifyTailParams),
    HoldoutAdapt(HoldoutAdaptParams),
    Calibrate(CalibrateParams),
    AkaikeCheck(AkaikeParams),
    Segment(SegmentParams),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::VerifyTail(_) => ExperimentKind::VerifyTail,
            Experiment::HoldoutAdapt(_) => ExperimentKind::HoldoutAdapt,
            Experiment::Calibrate(_) => ExperimentKind::Calibrate,
            Experiment::AkaikeCheck(_) => ExperimentKind::AkaikeCheck,
            Experiment::Segment(_) => ExperimentKind::Segment,
        }
    }

    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::VerifyTail => Experiment::VerifyTail(Default::default()),
            ExperimentKind::HoldoutAdapt => Experiment::HoldoutAdapt(Default::default()),
            ExperimentKind::Calibrate => Experiment::Calibrate(Default::default()),
            ExperimentKind::AkaikeCheck => Experiment::AkaikeCheck(Default::default()),
            ExperimentKind::Segment => Experiment::Segment(Default::default()),
        }
    }
}

/// Finite classification design plus one partition per candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDesign {
    pub prob: Vec<f64>,
    pub eta: Vec<f64>,
    /// Cell index of every design point, one assignment per model.
    pub partitions: Vec<Vec<usize>>,
}

impl Default for FamilyDesign {
    fn default() -> Self {
        Self {
            prob: vec![0.2, 0.15, 0.15, 0.1, 0.1, 0.1, 0.1, 0.1],
            eta: vec![0.9, 0.8, 0.3, 0.7, 0.2, 0.1, 0.75, 0.35],
            partitions: vec![
                vec![0, 0, 0, 0, 0, 0, 0, 0],
                vec![0, 0, 0, 0, 1, 1, 1, 1],
                vec![0, 0, 0, 1, 1, 1, 2, 2],
                vec![0, 0, 1, 1, 2, 2, 3, 3],
                vec![0, 1, 2, 3, 4, 4, 5, 5],
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyTailParams {
    pub n: usize,
    pub epsilon: f64,
    pub x: f64,
    /// Defaults to `φ(x) = h·x²` with `h` the design's smallest `|2η − 1|`.
    pub modulus: Option<PowerModulus>,
    pub design: FamilyDesign,
}

impl Default for VerifyTailParams {
    fn default() -> Self {
        Self {
            n: 200,
            epsilon: 0.5,
            x: 2.0,
            modulus: None,
            design: FamilyDesign::default(),
        }
    }
}

/// Optional bounds on a fitted slope, turned into run checks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlopeExpectation {
    pub max: Option<f64>,
    pub min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldoutAdaptParams {
    pub margin_h: f64,
    pub design_size: usize,
    pub mass_decay: f64,
    pub block: usize,
    pub dims: Vec<usize>,
    /// Validation sizes `n`.
    pub sizes: Vec<usize>,
    /// `N = round(train_ratio·n)`.
    pub train_ratio: f64,
    pub split_policy: SplitPolicy,
    pub epsilon: f64,
    pub expected_slope: SlopeExpectation,
}

impl Default for HoldoutAdaptParams {
    fn default() -> Self {
        Self {
            margin_h: 0.8,
            design_size: 32,
            mass_decay: 0.7,
            block: 4,
            dims: vec![2, 4, 8, 16, 32],
            sizes: vec![250, 500, 1000, 2000, 4000],
            train_ratio: 1.0,
            split_policy: SplitPolicy::Prefix,
            epsilon: 0.5,
            expected_slope: SlopeExpectation::default(),
        }
    }
}

/// Geometric grid `[lo, hi]` in units of the experiment's reference scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            lo: 1e-3,
            hi: 10.0,
            points: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateParams {
    pub n: usize,
    pub d_max: usize,
    pub d_true: usize,
    pub sigma: f64,
    pub signal_level: f64,
    /// In units of `σ²/n`.
    pub grid: AlphaGrid,
    pub large_dim_threshold: Option<usize>,
    pub jump_window: Window,
    pub optimum_window: Window,
    pub ratio_window: Window,
}

impl Default for CalibrateParams {
    fn default() -> Self {
        Self {
            n: 512,
            d_max: 64,
            d_true: 8,
            sigma: 1.0,
            signal_level: 1.6,
            grid: AlphaGrid::default(),
            large_dim_threshold: None,
            jump_window: Window { lo: 0.8, hi: 1.2 },
            optimum_window: Window { lo: 1.6, hi: 2.4 },
            ratio_window: Window { lo: 1.6, hi: 2.6 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum AkaikeSetting {
    Mallows {
        n: usize,
        d_true: usize,
        sigma: f64,
        signal_level: f64,
    },
    Histogram {
        n: usize,
        margin_h: f64,
        design_size: usize,
        mass_decay: f64,
        block: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AkaikeParams {
    pub setting: AkaikeSetting,
    pub dims: Vec<usize>,
    /// Relative tolerance of each mean against `D·σ²/n` (Mallows only).
    pub theory_tolerance: f64,
    /// Relative tolerance between the two means (Mallows only).
    pub agreement_tolerance: f64,
}

impl Default for AkaikeParams {
    fn default() -> Self {
        Self {
            setting: AkaikeSetting::Mallows {
                n: 512,
                d_true: 8,
                sigma: 1.0,
                signal_level: 1.6,
            },
            dims: vec![2, 8, 32],
            theory_tolerance: 0.05,
            agreement_tolerance: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub n: usize,
    pub levels: Vec<f64>,
    pub sigma: f64,
    pub d_max: usize,
    /// In units of `s²/n`, `s²` the empirical variance of the signal.
    pub grid: AlphaGrid,
    pub large_dim_threshold: Option<usize>,
    pub min_recovery: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            n: 400,
            levels: vec![0.0, 3.0, 0.0, 3.0],
            sigma: 1.0,
            d_max: 10,
            grid: AlphaGrid::default(),
            large_dim_threshold: None,
            min_recovery: 0.9,
        }
    }
}

struct Violations(Vec<String>);

impl Violations {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(msg());
        }
    }

    fn grid(&mut self, field: &str, g: &AlphaGrid) {
        self.check(g.lo > 0.0 && g.hi > g.lo && g.hi.is_finite(), || {
            format!("{field}: need 0 < lo < hi, got [{}, {}]", g.lo, g.hi)
        });
        self.check(g.points >= 2, || {
            format!("{field}.points must be at least 2")
        });
    }

    fn epsilon(&mut self, field: &str, e: f64) {
        self.check(e > 0.0 && e < 1.0, || {
            format!("{field} = {e} must lie in (0, 1)")
        });
    }

    fn window(&mut self, field: &str, w: &Window) {
        self.check(w.lo <= w.hi, || {
            format!("{field}: lo {} exceeds hi {}", w.lo, w.hi)
        });
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, replicates: usize) -> Self {
        Self {
            seed,
            replicates,
            out_dir: None,
            experiment: Experiment::default_for(kind),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Collects every violated field before failing.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut v = Violations(Vec::new());
        v.check(self.replicates >= 1, || {
            "replicates must be at least 1".into()
        });
        match &self.experiment {
            Experiment::VerifyTail(p) => {
                v.check(p.n >= 1, || "n must be positive".into());
                v.epsilon("epsilon", p.epsilon);
                v.check(p.x >= 0.0, || format!("x = {} must be nonnegative", p.x));
                let k = p.design.prob.len();
                v.check(k >= 1 && p.design.eta.len() == k, || {
                    "design.prob and design.eta must be nonempty and aligned".into()
                });
                v.check(
                    (p.design.prob.iter().sum::<f64>() - 1.0).abs() < 1e-9
                        && p.design.prob.iter().all(|q| *q >= 0.0),
                    || "design.prob must be a probability vector".into(),
                );
                v.check(p.design.eta.iter().all(|e| (0.0..=1.0).contains(e)), || {
                    "design.eta must lie in [0, 1]".into()
                });
                v.check(p.design.partitions.len() >= 2, || {
                    "design.partitions must hold at least 2 models".into()
                });
                for (m, part) in p.design.partitions.iter().enumerate() {
                    v.check(part.len() == k, || {
                        format!(
                            "design.partitions[{m}] has {} entries, design has {k}",
                            part.len()
                        )
                    });
                }
            }
            Experiment::HoldoutAdapt(p) => {
                v.check((0.0..=1.0).contains(&p.margin_h), || {
                    format!("margin_h = {} must lie in [0, 1]", p.margin_h)
                });
                v.check(p.mass_decay > 0.0, || "mass_decay must be positive".into());
                v.check(p.block >= 1, || "block must be positive".into());
                v.check(!p.dims.is_empty(), || "dims must be nonempty".into());
                v.check(
                    p.dims.iter().all(|d| *d >= 1 && *d <= p.design_size),
                    || format!("dims must lie in 1..={}", p.design_size),
                );
                v.check(p.sizes.len() >= 2, || {
                    "sizes needs at least 2 values for a slope".into()
                });
                v.check(p.sizes.iter().all(|n| *n >= 1), || {
                    "sizes must be positive".into()
                });
                v.check(p.train_ratio > 0.0, || {
                    "train_ratio must be positive".into()
                });
                v.epsilon("epsilon", p.epsilon);
            }
            Experiment::Calibrate(p) => {
                v.check(p.n >= 1, || "n must be positive".into());
                v.check(p.d_max >= 2 && p.d_max <= p.n, || {
                    format!("d_max = {} must lie in 2..={}", p.d_max, p.n)
                });
                v.check(p.d_true <= p.n, || {
                    format!("d_true = {} exceeds n", p.d_true)
                });
                v.check(p.sigma > 0.0, || "sigma must be positive".into());
                v.grid("grid", &p.grid);
                if let Some(t) = p.large_dim_threshold {
                    v.check(t >= 1 && t <= p.d_max, || {
                        format!("large_dim_threshold = {t} must lie in 1..={}", p.d_max)
                    });
                }
                v.window("jump_window", &p.jump_window);
                v.window("optimum_window", &p.optimum_window);
                v.window("ratio_window", &p.ratio_window);
            }
            Experiment::AkaikeCheck(p) => {
                v.check(!p.dims.is_empty(), || "dims must be nonempty".into());
                match &p.setting {
                    AkaikeSetting::Mallows {
                        n, d_true, sigma, ..
                    } => {
                        v.check(*n >= 1, || "setting.n must be positive".into());
                        v.check(d_true <= n, || "setting.d_true exceeds n".into());
                        v.check(*sigma > 0.0, || "setting.sigma must be positive".into());
                        v.check(p.dims.iter().all(|d| d <= n), || {
                            "dims must not exceed n".into()
                        });
                    }
                    AkaikeSetting::Histogram {
                        n,
                        margin_h,
                        design_size,
                        mass_decay,
                        block,
                    } => {
                        v.check(*n >= 1, || "setting.n must be positive".into());
                        v.check((0.0..=1.0).contains(margin_h), || {
                            "setting.margin_h must lie in [0, 1]".into()
                        });
                        v.check(*mass_decay > 0.0, || {
                            "setting.mass_decay must be positive".into()
                        });
                        v.check(*block >= 1, || "setting.block must be positive".into());
                        v.check(p.dims.iter().all(|d| *d >= 1 && d <= design_size), || {
                            format!("dims must lie in 1..={design_size}")
                        });
                    }
                }
                v.check(
                    p.theory_tolerance > 0.0 && p.agreement_tolerance > 0.0,
                    || "tolerances must be positive".into(),
                );
            }
            Experiment::Segment(p) => {
                v.check(!p.levels.is_empty() && p.n >= p.levels.len(), || {
                    format!(
                        "cannot cut n = {} points into {} segments",
                        p.n,
                        p.levels.len()
                    )
                });
                v.check(p.sigma >= 0.0, || "sigma must be nonnegative".into());
                v.check(p.d_max >= 2 && p.d_max <= p.n, || {
                    format!("d_max = {} must lie in 2..={}", p.d_max, p.n)
                });
                v.grid("grid", &p.grid);
                if let Some(t) = p.large_dim_threshold {
                    v.check(t >= 1 && t <= p.d_max, || {
                        format!("large_dim_threshold = {t} must lie in 1..={}", p.d_max)
                    });
                }
                v.check((0.0..=1.0).contains(&p.min_recovery), || {
                    "min_recovery must lie in [0, 1]".into()
                });
            }
        }
        if v.0.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(v.0))
        }
    }
}
