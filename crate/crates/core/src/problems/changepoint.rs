//! Piecewise-constant Gaussian signals and exact least-squares segmentation.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Costs closer than this are treated as equal; the earliest boundary wins.
const COST_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointProblem {
    levels: Vec<f64>,
    /// Exclusive end of each segment; the last entry is `n`.
    boundaries: Vec<usize>,
    sigma: f64,
}

impl ChangepointProblem {
    pub fn new(levels: Vec<f64>, boundaries: Vec<usize>, sigma: f64) -> Result<Self> {
        if levels.is_empty() || levels.len() != boundaries.len() {
            return Err(Error::InvalidProblem(format!(
                "{} levels for {} segment ends",
                levels.len(),
                boundaries.len()
            )));
        }
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev {
                return Err(Error::InvalidProblem(
                    "segment ends must be strictly increasing and positive".into(),
                ));
            }
            prev = b;
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "noise level {sigma} must be nonnegative"
            )));
        }
        Ok(Self {
            levels,
            boundaries,
            sigma,
        })
    }

    /// `levels.len()` segments of (nearly) equal length over `n` points.
    pub fn equal_segments(n: usize, levels: Vec<f64>, sigma: f64) -> Result<Self> {
        let k = levels.len();
        if k == 0 || n < k {
            return Err(Error::InvalidProblem(format!(
                "cannot cut {n} points into {k} segments"
            )));
        }
        let boundaries = (1..=k).map(|s| s * n / k).collect();
        Self::new(levels, boundaries, sigma)
    }

    pub fn n(&self) -> usize {
        *self.boundaries.last().expect("at least one segment")
    }

    pub fn segments(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_signal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n());
        let mut start = 0;
        for (&end, &level) in self.boundaries.iter().zip(&self.levels) {
            out.extend(std::iter::repeat_n(level, end - start));
            start = end;
        }
        out
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mean_signal()
            .into_iter()
            .map(|m| {
                let e: f64 = StandardNormal.sample(rng);
                m + self.sigma * e
            })
            .collect()
    }
}

/// Least-squares fit with a given number of contiguous segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Exclusive end of each segment; the last entry is the signal length.
    pub boundaries: Vec<usize>,
    pub levels: Vec<f64>,
    pub rss: f64,
}

impl Segmentation {
    pub fn segments(&self) -> usize {
        self.boundaries.len()
    }

    /// Interior change-point positions (segment starts after the first).
    pub fn change_points(&self) -> &[usize] {
        &self.boundaries[..self.boundaries.len() - 1]
    }

    pub fn fitted(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(*self.boundaries.last().unwrap_or(&0));
        let mut start = 0;
        for (&end, &level) in self.boundaries.iter().zip(&self.levels) {
            out.extend(std::iter::repeat_n(level, end - start));
            start = end;
        }
        out
    }
}

/// Prefix sums of `y` and `y²` giving O(1) segment costs.
struct SegmentCost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl SegmentCost {
    fn new(y: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(y.len() + 1);
        let mut sum_sq = Vec::with_capacity(y.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for v in y {
            sum.push(sum.last().unwrap() + v);
            sum_sq.push(sum_sq.last().unwrap() + v * v);
        }
        Self { sum, sum_sq }
    }

    /// Residual sum of squares of `y[start..end]` around its mean.
    fn cost(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let s = self.sum[end] - self.sum[start];
        (self.sum_sq[end] - self.sum_sq[start] - s * s / len).max(0.0)
    }

    fn mean(&self, start: usize, end: usize) -> f64 {
        (self.sum[end] - self.sum[start]) / (end - start) as f64
    }
}

/// Optimal segmentations into `D = 1..=d_max` segments by dynamic
/// programming, `O(n²·d_max)`.
#[allow(clippy::needless_range_loop)]
pub fn dp_segment(signal: &[f64], d_max: usize) -> Result<Vec<Segmentation>> {
    let n = signal.len();
    if d_max == 0 || d_max > n {
        return Err(Error::InvalidProblem(format!(
            "segment count {d_max} outside 1..={n}"
        )));
    }
    let cost = SegmentCost::new(signal);

    // best[d][j]: minimal cost of y[..j] in d+1 segments; from[d][j]: start of the last one
    let mut best = vec![vec![f64::INFINITY; n + 1]; d_max];
    let mut from = vec![vec![0usize; n + 1]; d_max];
    for j in 1..=n {
        best[0][j] = cost.cost(0, j);
    }
    for d in 1..d_max {
        for j in (d + 1)..=n {
            let mut arg = d;
            let mut val = best[d - 1][d] + cost.cost(d, j);
            for i in (d + 1)..j {
                let v = best[d - 1][i] + cost.cost(i, j);
                if v < val - COST_TIE_TOL {
                    val = v;
                    arg = i;
                }
            }
            best[d][j] = val;
            from[d][j] = arg;
        }
    }

    Ok((0..d_max)
        .map(|d| {
            let mut ends = vec![n];
            let mut j = n;
            for k in (1..=d).rev() {
                j = from[k][j];
                ends.push(j);
            }
            ends.reverse();
            let mut start = 0;
            let levels = ends
                .iter()
                .map(|&end| {
                    let m = cost.mean(start, end);
                    start = end;
                    m
                })
                .collect();
            Segmentation {
                boundaries: ends,
                levels,
                rss: best[d][n],
            }
        })
        .collect())
}
