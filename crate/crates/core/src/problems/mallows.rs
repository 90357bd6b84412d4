//! Gaussian regression on an orthonormal fixed design, expressed in the
//! coordinates of the basis: `Y_j = s_j + σ·ε_j`, `j = 0..n`.
//!
//! Model `D` is the span of the first `D` basis vectors, so least squares is
//! coordinate truncation and every quantity of interest is a sum of squares.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Model, Problem};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsProblem {
    sigma: f64,
    signal: Vec<f64>,
    d_true: usize,
}

/// Response at one design coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub index: usize,
    pub y: f64,
}

impl MallowsProblem {
    /// Signal equal to `signal_level` on the first `d_true` coordinates.
    pub fn new(n: usize, d_true: usize, sigma: f64, signal_level: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProblem("design size must be positive".into()));
        }
        if d_true > n {
            return Err(Error::InvalidProblem(format!(
                "true dimension {d_true} exceeds design size {n}"
            )));
        }
        let signal = (0..n)
            .map(|j| if j < d_true { signal_level } else { 0.0 })
            .collect();
        Self::with_signal(signal, sigma, d_true)
    }

    pub fn with_signal(signal: Vec<f64>, sigma: f64, d_true: usize) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "noise level {sigma} must be nonnegative"
            )));
        }
        if signal.is_empty() || signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidProblem(
                "signal must be finite and nonempty".into(),
            ));
        }
        if signal.iter().skip(d_true).any(|s| *s != 0.0) {
            return Err(Error::InvalidProblem(format!(
                "signal has support beyond the first {d_true} coordinates"
            )));
        }
        Ok(Self {
            sigma,
            signal,
            d_true,
        })
    }

    pub fn n(&self) -> usize {
        self.signal.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn d_true(&self) -> usize {
        self.d_true
    }

    /// `σ²/n`, the natural unit of penalties and risks.
    pub fn unit(&self) -> f64 {
        self.sigma * self.sigma / self.n() as f64
    }

    pub fn responses(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.signal
            .iter()
            .map(|s| {
                let e: f64 = StandardNormal.sample(rng);
                s + self.sigma * e
            })
            .collect()
    }

    /// `(1/n)·Σ_{j ≥ D} s_j²`, the approximation error of model `D`.
    pub fn bias(&self, dim: usize) -> f64 {
        self.signal.iter().skip(dim).map(|s| s * s).sum::<f64>() / self.n() as f64
    }
}

/// Response vector for `(seed, replicate 0)`.
pub fn gen_mallows(
    n: usize,
    d_true: usize,
    sigma: f64,
    signal_level: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = MallowsProblem::new(n, d_true, sigma, signal_level)?;
    let mut rng = rng::stream(seed, 0, StreamRole::Noise);
    Ok(p.responses(&mut rng))
}

/// `rss(D) = Σ_{j ≥ D} Y_j²` for `D = 1..=d_max`.
pub fn nested_rss(y: &[f64], d_max: usize) -> Result<Vec<f64>> {
    if d_max == 0 || d_max > y.len() {
        return Err(Error::InvalidProblem(format!(
            "largest dimension {d_max} outside 1..={}",
            y.len()
        )));
    }
    let tail: f64 = y[d_max..].iter().map(|v| v * v).sum();
    let mut rss = vec![0.0; d_max];
    let mut acc = tail;
    for d in (1..=d_max).rev() {
        rss[d - 1] = acc;
        acc += y[d - 1] * y[d - 1];
    }
    Ok(rss)
}

impl Problem for MallowsProblem {
    type Sample = Observation;
    type Predictor = Vec<f64>;

    fn loss(&self, g: &Vec<f64>, z: &Observation) -> f64 {
        let r = z.y - g[z.index];
        r * r
    }

    /// `(1/n)·‖g − s‖²`.
    fn excess_risk(&self, g: &Vec<f64>) -> Result<f64> {
        if g.len() != self.n() {
            return Err(Error::InvalidProblem(
                "predictor/design size mismatch".into(),
            ));
        }
        Ok(g.iter()
            .zip(&self.signal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.n() as f64)
    }

    fn target(&self) -> Vec<f64> {
        self.signal.clone()
    }

    /// The fixed design has exactly one observation per coordinate.
    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Observation>> {
        if n != self.n() {
            return Err(Error::InvalidProblem(format!(
                "fixed design has {} points, asked for {n}",
                self.n()
            )));
        }
        Ok(self
            .responses(rng)
            .into_iter()
            .enumerate()
            .map(|(index, y)| Observation { index, y })
            .collect())
    }
}

/// Span of the first `dim` basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedProjection {
    pub dim: usize,
}

impl Model<MallowsProblem> for NestedProjection {
    fn label(&self) -> String {
        format!("D{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fit(&self, problem: &MallowsProblem, train: &[Observation]) -> Result<Vec<f64>> {
        if self.dim > problem.n() {
            return Err(Error::Fit {
                model: self.label(),
                reason: format!("dimension exceeds design size {}", problem.n()),
            });
        }
        let mut coef = vec![0.0; problem.n()];
        let mut seen = vec![false; problem.n()];
        for z in train {
            if z.index < self.dim {
                coef[z.index] = z.y;
                seen[z.index] = true;
            }
        }
        if let Some(j) = seen[..self.dim].iter().position(|s| !s) {
            return Err(Error::Fit {
                model: self.label(),
                reason: format!("no observation at coordinate {j}"),
            });
        }
        Ok(coef)
    }

    fn population_minimizer(&self, problem: &MallowsProblem) -> Option<Vec<f64>> {
        if self.dim > problem.n() {
            return None;
        }
        Some(
            problem
                .signal()
                .iter()
                .enumerate()
                .map(|(j, s)| if j < self.dim { *s } else { 0.0 })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_response_is_signal() {
        let y = gen_mallows(16, 4, 0.0, 2.5, 1).unwrap();
        assert_eq!(&y[..4], &[2.5; 4]);
        assert!(y[4..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_oversized_true_dimension() {
        assert!(MallowsProblem::new(4, 5, 1.0, 1.0).is_err());
        assert!(gen_mallows(4, 5, 1.0, 1.0, 0).is_err());
        assert!(MallowsProblem::new(4, 2, -1.0, 1.0).is_err());
    }

    #[test]
    fn coordinatewise_means_match_signal() {
        let p = MallowsProblem::new(8, 3, 1.5, 1.0).unwrap();
        let reps = 10_000;
        let mut sum = [0.0; 8];
        for r in 0..reps {
            let mut rng = rng::stream(77, r, StreamRole::Noise);
            for (acc, v) in sum.iter_mut().zip(p.responses(&mut rng)) {
                *acc += v;
            }
        }
        let band = 4.0 * p.sigma() / (reps as f64).sqrt();
        for (j, acc) in sum.iter().enumerate() {
            assert!(
                (acc / reps as f64 - p.signal()[j]).abs() < band,
                "coordinate {j}"
            );
        }
    }

    #[test]
    fn rss_nonincreasing_and_matches_direct_sum() {
        let p = MallowsProblem::new(40, 5, 1.0, 2.0).unwrap();
        let mut rng = rng::stream(5, 0, StreamRole::Noise);
        let y = p.responses(&mut rng);
        let rss = nested_rss(&y, 20).unwrap();
        for d in 1..=20 {
            let direct: f64 = y[d..].iter().map(|v| v * v).sum();
            assert!((rss[d - 1] - direct).abs() < 1e-10);
        }
        assert!(rss.windows(2).all(|w| w[1] <= w[0]));
        assert!(nested_rss(&y, 41).is_err());
    }

    #[test]
    fn projection_fit_and_risk() {
        let p = MallowsProblem::new(6, 2, 1.0, 3.0).unwrap();
        let data = p
            .generate(6, &mut rng::stream(1, 0, StreamRole::Noise))
            .unwrap();
        let m = NestedProjection { dim: 3 };
        let g = m.fit(&p, &data).unwrap();
        assert_eq!(&g[..3], &[data[0].y, data[1].y, data[2].y]);
        assert!(g[3..].iter().all(|v| *v == 0.0));
        let expected: f64 = (0..3)
            .map(|j| (data[j].y - p.signal()[j]).powi(2))
            .sum::<f64>()
            / 6.0;
        assert!((p.excess_risk(&g).unwrap() - expected).abs() < 1e-14);
        assert!(p
            .generate(5, &mut rng::stream(1, 0, StreamRole::Noise))
            .is_err());
        assert!(m.fit(&p, &data[1..]).is_err());
    }
}
