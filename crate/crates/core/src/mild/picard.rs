//! Picard iteration `x_{k+1} = a + L(x_k) + B(x_k, x_k)` for a fixed-point problem
//! with a bilinear nonlinearity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-point problem `x = a + L(x) + B(x, x)` in a normed space `X`.
pub trait PicardProblem {
    type State: Clone;

    /// The seed `a`.
    fn seed(&self) -> &Self::State;

    /// `a + L(x) + B(x, x)`.
    fn apply(&self, x: &Self::State) -> Result<Self::State>;

    /// `||x||_X`.
    fn norm(&self, x: &Self::State) -> f64;

    /// `||x - y||_X`.
    fn distance(&self, x: &Self::State, y: &Self::State) -> Result<f64>;
}

/// Measured operator constants: `||B(x, y)|| <= gamma ||x|| ||y||` and `||L||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorBounds {
    pub gamma: f64,
    pub linear_norm: f64,
}

impl OperatorBounds {
    /// `1 / (1 - ||L||)`, the Neumann-series bound on `||(I - L)^{-1}||`.
    pub fn inverse_bound(&self) -> f64 {
        1.0 / (1.0 - self.linear_norm)
    }

    /// Ratio of `||(I - L)^{-1} a||` (bounded by `||a|| / (1 - ||L||)`) to the
    /// smallness threshold `1 / (4 ||(I - L)^{-1}|| gamma)`; below 1 the iteration
    /// is guaranteed to contract.
    pub fn smallness_ratio(&self, seed_norm: f64) -> f64 {
        let inv = self.inverse_bound();
        4.0 * inv * inv * self.gamma * seed_norm
    }

    /// The a-priori ball radius `1 / (2 ||(I - L)^{-1}|| gamma)` containing the solution.
    pub fn solution_radius(&self) -> f64 {
        if self.gamma == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (2.0 * self.inverse_bound() * self.gamma)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardSettings {
    /// Stop once `||x_{k+1} - x_k||_X` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Divergence when `||x_k||` exceeds this multiple of `||a||`.
    pub blowup_factor: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 60,
            blowup_factor: 1e6,
        }
    }
}

impl PicardSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidArgument(format!("invalid Picard settings {self:?}")));
        }
        Ok(())
    }
}

/// Everything about a Picard run except the solution itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iterations: usize,
    pub converged: bool,
    /// `||x_k||_X` for `k = 0, 1, ...` (`x_0 = a`).
    pub iterate_norms: Vec<f64>,
    /// `||x_{k+1} - x_k||_X`.
    pub differences: Vec<f64>,
    /// `differences[k] / differences[k - 1]`.
    pub contraction_ratios: Vec<f64>,
    /// `||x - a - L(x) - B(x, x)||_X` at the returned solution.
    pub residual: f64,
    pub bounds: Option<OperatorBounds>,
    /// See [`OperatorBounds::smallness_ratio`].
    pub smallness_ratio: Option<f64>,
    /// Whether `||x||_X < 1 / (2 ||(I - L)^{-1}|| gamma)`.
    pub within_solution_radius: Option<bool>,
}

impl IterationSummary {
    /// Contraction ratios are non-increasing from the second iteration on, up to `slack`
    /// relative (roundoff near the tolerance floor).
    pub fn geometric_after_two(&self, slack: f64) -> bool {
        self.contraction_ratios
            .windows(2)
            .skip(1)
            .all(|w| w[1] <= w[0] * (1.0 + slack))
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointReport<S> {
    pub solution: S,
    pub summary: IterationSummary,
}

/// Iterate until the successive difference drops below the tolerance.
///
/// Divergence is declared when the difference grows three times in a row, when an
/// iterate exceeds `blowup_factor * ||a||`, or when a norm is not finite. A linear
/// part with `||L|| >= 1` is refused before iterating.
pub fn solve_picard<P: PicardProblem>(
    problem: &P,
    settings: &PicardSettings,
    bounds: Option<OperatorBounds>,
) -> Result<FixedPointReport<P::State>> {
    settings.validate()?;
    if let Some(b) = bounds {
        if !(b.linear_norm < 1.0) {
            return Err(Error::ExponentConditions(format!(
                "linear part has measured norm {} >= 1, so I - L is not invertible by Neumann series",
                b.linear_norm
            )));
        }
    }
    let seed = problem.seed();
    let seed_norm = problem.norm(seed);
    let mut x = seed.clone();
    let mut norms = vec![seed_norm];
    let mut diffs: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut increases = 0;
    for _ in 0..settings.max_iterations {
        let next = problem.apply(&x)?;
        let d = problem.distance(&next, &x)?;
        let n = problem.norm(&next);
        norms.push(n);
        diffs.push(d);
        x = next;
        if !(d.is_finite() && n.is_finite()) || n > settings.blowup_factor * seed_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence {
                iterations: diffs.len(),
                history: diffs,
            });
        }
        if d < settings.tolerance {
            converged = true;
            break;
        }
        if diffs.len() >= 2 && d > diffs[diffs.len() - 2] {
            increases += 1;
            if increases >= 3 {
                return Err(Error::Divergence {
                    iterations: diffs.len(),
                    history: diffs,
                });
            }
        } else {
            increases = 0;
        }
    }
    if !converged {
        return Err(Error::MaxIterations {
            iterations: diffs.len(),
            history: diffs,
        });
    }
    let residual = problem.distance(&problem.apply(&x)?, &x)?;
    let contraction_ratios = diffs
        .windows(2)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .collect();
    let final_norm = *norms.last().expect("seed norm recorded");
    Ok(FixedPointReport {
        solution: x,
        summary: IterationSummary {
            iterations: diffs.len(),
            converged,
            iterate_norms: norms,
            differences: diffs,
            contraction_ratios,
            residual,
            bounds,
            smallness_ratio: bounds.map(|b| b.smallness_ratio(seed_norm)),
            within_solution_radius: bounds.map(|b| final_norm < b.solution_radius()),
        },
    })
}

/// The scalar model `x = a + gamma x^2`.
#[derive(Clone, Copy, Debug)]
pub struct ScalarModel {
    pub a: f64,
    pub gamma: f64,
}

impl ScalarModel {
    /// Smaller root `(1 - sqrt(1 - 4 a gamma)) / (2 gamma)`, if real.
    pub fn exact(&self) -> Option<f64> {
        let disc = 1.0 - 4.0 * self.a * self.gamma;
        if disc < 0.0 {
            return None;
        }
        if self.gamma == 0.0 {
            return Some(self.a);
        }
        // 2a / (1 + sqrt(disc)) avoids cancellation for small a gamma
        Some(2.0 * self.a / (1.0 + disc.sqrt()))
    }

    pub fn bounds(&self) -> OperatorBounds {
        OperatorBounds {
            gamma: self.gamma,
            linear_norm: 0.0,
        }
    }
}

impl PicardProblem for ScalarModel {
    type State = f64;

    fn seed(&self) -> &f64 {
        &self.a
    }

    fn apply(&self, x: &f64) -> Result<f64> {
        Ok(self.a + self.gamma * x * x)
    }

    fn norm(&self, x: &f64) -> f64 {
        x.abs()
    }

    fn distance(&self, x: &f64, y: &f64) -> Result<f64> {
        Ok((x - y).abs())
    }
}
