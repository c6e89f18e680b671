//! Existence horizons for subcritical data, regularity propagation checks, and
//! continuation of solutions past a single Picard horizon.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::solver::{mild_solve_nse, MildProblem, Samples, SolverConfig};
use crate::besov::{besov_norm, critical_exponent, BesovIndex, DyadicPartition};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;
use crate::trajectory::Trajectory;

/// `T = (kappa / M)^{2/epsilon}` capped at `horizon_cap`, where `M` is the norm of the data
/// in the subcritical index `(s_q + epsilon, q, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceModel {
    pub q: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub horizon_cap: f64,
}

impl ExistenceModel {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let s_q = critical_exponent(dim, self.q);
        if !(self.q > dim as f64 && self.epsilon > 0.0 && self.epsilon < -s_q) {
            return Err(Error::ExponentConditions(format!(
                "need q > {dim} and 0 < epsilon < -s_q = {}, got q = {}, epsilon = {}",
                -s_q, self.q, self.epsilon
            )));
        }
        if !(self.kappa > 0.0 && self.horizon_cap > 0.0) {
            return Err(Error::InvalidArgument("kappa and the horizon cap must be positive".into()));
        }
        Ok(())
    }

    pub fn index(&self, dim: usize) -> Result<BesovIndex> {
        BesovIndex::new(critical_exponent(dim, self.q) + self.epsilon, self.q, self.q)
    }

    pub fn time_for_norm(&self, m: f64) -> f64 {
        if m == 0.0 {
            return self.horizon_cap;
        }
        (self.kappa / m).powf(2.0 / self.epsilon).min(self.horizon_cap)
    }
}

/// Subcritical norm of the data and the resulting existence horizon.
pub fn subcritical_existence_time(v0: &SpectralField, model: &ExistenceModel, partition: &DyadicPartition) -> Result<(f64, f64)> {
    let dim = v0.grid().dim();
    model.validate(dim)?;
    let m = besov_norm(v0, &model.index(dim)?, partition)?.value;
    Ok((m, model.time_for_norm(m)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub norm: f64,
    /// Largest horizon found on which the solver converged.
    pub horizon: f64,
    /// `norm * horizon^{epsilon/2}`.
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub model: ExistenceModel,
    pub safety: f64,
    pub points: Vec<CalibrationPoint>,
}

/// Largest horizon in `[cap * 2^{-max_halvings}, cap]` on which the solver converges,
/// by halving and then bisecting in `log T`.
pub fn largest_converging_horizon(
    v0: &SpectralField,
    config: &SolverConfig,
    cap: f64,
    max_halvings: usize,
    bisections: usize,
) -> Result<Option<f64>> {
    let converges = |t: f64| -> Result<bool> {
        match mild_solve_nse(v0, &config.with_horizon(t)) {
            Ok(_) => Ok(true),
            Err(Error::Divergence { .. } | Error::MaxIterations { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if converges(cap)? {
        return Ok(Some(cap));
    }
    let mut hi = cap;
    let mut lo = None;
    for _ in 0..max_halvings {
        let t = hi / 2.0;
        if converges(t)? {
            lo = Some(t);
            break;
        }
        hi = t;
    }
    let Some(mut lo) = lo else { return Ok(None) };
    for _ in 0..bisections {
        let mid = (lo * hi).sqrt();
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Calibrate `kappa` as `safety * min_i M_i T_i^{epsilon/2}` over a battery of data,
/// where `T_i` is the largest horizon on which the solver converges.
pub fn calibrate_kappa(
    battery: &[SpectralField],
    q: f64,
    epsilon: f64,
    horizon_cap: f64,
    safety: f64,
    config: &SolverConfig,
    partition: &DyadicPartition,
) -> Result<Calibration> {
    let dim = partition.grid().dim();
    let mut model = ExistenceModel { q, epsilon, kappa: 1.0, horizon_cap };
    model.validate(dim)?;
    let index = model.index(dim)?;
    let mut points = Vec::new();
    for v0 in battery {
        let norm = besov_norm(v0, &index, partition)?.value;
        if norm == 0.0 {
            continue;
        }
        let horizon = largest_converging_horizon(v0, config, horizon_cap, 30, 6)?
            .ok_or_else(|| Error::InvalidArgument("calibration field does not converge on any horizon tried".into()))?;
        points.push(CalibrationPoint {
            norm,
            horizon,
            kappa: norm * horizon.powf(epsilon / 2.0),
        });
    }
    let min = points.iter().map(|p| p.kappa).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::InvalidArgument("calibration battery has no non-zero field".into()));
    }
    model.kappa = safety * min;
    Ok(Calibration { model, safety, points })
}

/// Which norm plays the role of `E` in the propagation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationNorm {
    /// `E = X`, the Kato norm.
    Kato,
    /// `E = X ∩ L^inf_t L^2_x` with norm `||.||_X + sup_t ||.||_{L^2}`.
    KatoEnergy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationReport {
    pub norm: PropagationNorm,
    pub solution_norm: f64,
    pub seed_norm: f64,
    /// Measured `||(I - L)^{-1}||_E` (`1 / (1 - ||L||_E)`; exactly 1 without a linear part).
    pub inverse_norm: f64,
    /// `2 ||(I - L)^{-1}||_E ||a||_E`.
    pub bound: f64,
    pub holds: bool,
    /// `||B(x, x)||_E / (2 ||x||_E ||x||_X)` on the solution, the measured cross constant.
    pub cross_ratio: f64,
}

fn e_norm(problem: &MildProblem, norm: PropagationNorm, x: &Samples) -> f64 {
    match norm {
        PropagationNorm::Kato => problem.kato(x),
        PropagationNorm::KatoEnergy => problem.kato(x) + problem.sup_l2(x),
    }
}

/// Check `||x||_E <= 2 ||(I - L)^{-1}||_E ||a||_E` on a computed solution.
pub fn propagation_check(
    problem: &MildProblem,
    solution: &Samples,
    norm: PropagationNorm,
    probes: usize,
    seed: u64,
) -> Result<PropagationReport> {
    let solution_norm = e_norm(problem, norm, solution);
    let seed_norm = e_norm(problem, norm, problem.heat_part());
    let inverse_norm = if problem.has_linear_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lin: f64 = 0.0;
        for _ in 0..probes {
            let x = problem.probe(&mut rng)?;
            let n = e_norm(problem, norm, &x);
            if n > 0.0 {
                lin = lin.max(e_norm(problem, norm, &problem.linear(&x)?) / n);
            }
        }
        if lin < 1.0 {
            1.0 / (1.0 - lin)
        } else {
            f64::INFINITY
        }
    } else {
        1.0
    };
    let bound = 2.0 * inverse_norm * seed_norm;
    let xx = problem.kato(solution);
    let cross_ratio = if solution_norm > 0.0 && xx > 0.0 {
        e_norm(problem, norm, &problem.bilinear(solution, solution)?) / (2.0 * solution_norm * xx)
    } else {
        0.0
    };
    Ok(PropagationReport {
        norm,
        solution_norm,
        seed_norm,
        inverse_norm,
        bound,
        holds: solution_norm <= bound,
        cross_ratio,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub total_horizon: f64,
    pub initial_step: f64,
    /// Give up (blow-up suspected) once a step this short fails.
    pub step_floor: f64,
    pub max_segments: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuationOutcome {
    Completed,
    BlowupSuspected,
    SegmentLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    pub integral_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuationReport {
    pub outcome: ContinuationOutcome,
    pub reached: f64,
    pub segments: Vec<Segment>,
    /// `(start, step)` of every failed attempt.
    pub rejected: Vec<(f64, f64)>,
}

/// Extend a solution segment by segment, re-seeding from the last sample. A failed
/// segment halves the step; a successful one doubles it for the next attempt. Falling
/// below the step floor is reported as suspected blow-up, a heuristic outcome.
pub fn continue_solution(
    u0: &SpectralField,
    config: &SolverConfig,
    settings: &ContinuationSettings,
) -> Result<(Trajectory, ContinuationReport)> {
    if !(settings.total_horizon > 0.0 && settings.initial_step > 0.0 && settings.step_floor > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid continuation settings {settings:?}")));
    }
    let mut t0 = 0.0;
    let mut u = u0.clone();
    let mut step = settings.initial_step;
    let mut times = vec![0.0];
    let mut fields = vec![u0.clone()];
    let mut segments = Vec::new();
    let mut rejected = Vec::new();
    let remaining = |t0: f64| settings.total_horizon - t0;
    let outcome = loop {
        if remaining(t0) <= 1e-12 * settings.total_horizon {
            break ContinuationOutcome::Completed;
        }
        if segments.len() >= settings.max_segments {
            break ContinuationOutcome::SegmentLimit;
        }
        let h = step.min(remaining(t0));
        match mild_solve_nse(&u, &config.with_horizon(h)) {
            Ok(sol) => {
                let (ts, fs) = sol.trajectory.into_parts();
                for (t, f) in ts.into_iter().zip(fs).skip(1) {
                    times.push(t0 + t);
                    fields.push(f);
                }
                segments.push(Segment {
                    start: t0,
                    end: t0 + h,
                    iterations: sol.report.picard.iterations,
                    integral_residual: sol.report.integral_residual,
                });
                t0 += h;
                u = fields.last().expect("non-empty").clone();
                step = 2.0 * h;
            }
            Err(Error::Divergence { .. } | Error::MaxIterations { .. }) => {
                rejected.push((t0, h));
                step = h / 2.0;
                if step < settings.step_floor {
                    break ContinuationOutcome::BlowupSuspected;
                }
            }
            Err(e) => return Err(e),
        }
    };
    let trajectory = Trajectory::new(times, fields)?;
    Ok((
        trajectory,
        ContinuationReport {
            outcome,
            reached: t0,
            segments,
            rejected,
        },
    ))
}

/// `(T, ||U||_{X_T})` for every sample time `T`: the Kato norm restricted to `[0, T]`.
pub fn kato_growth_curve(problem: &MildProblem, solution: &Samples) -> Vec<(f64, f64)> {
    let mut running: f64 = 0.0;
    problem
        .times()
        .iter()
        .zip(problem.kato_profile(solution))
        .map(|(&t, v)| {
            running = running.max(v);
            (t, running)
        })
        .collect()
}
