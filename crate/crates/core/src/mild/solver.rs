//! Mild solutions of the integral equation
//! `U(t) = e^{t Delta} U_0 - int_0^t e^{(t-s) Delta} P div(U (x) (U)_rho + a (x) U + U (x) b) ds`
//! by Picard iteration over time samples.
//!
//! With `rho` absent and `a = b = 0` this is the Navier-Stokes mild formulation; with
//! `a = b = V` it is the equation for a perturbation of a solution `V`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::picard::{solve_picard, FixedPointReport, IterationSummary, OperatorBounds, PicardProblem, PicardSettings};
use crate::besov::critical_exponent;
use crate::error::{Error, Result};
use crate::heat::{duhamel_from_sources, duhamel_trajectory, heat_evolve, leray_divergence, QuadratureKind, QuadratureScheme};
use crate::spectral::ops::apply_table;
use crate::spectral::random::random_band_limited;
use crate::spectral::{dealias, divergence_residual, gradient, Grid, Mollifier, Rank, SpectralField};
use crate::trajectory::{geometric_times, Trajectory};

/// Sample times: `0`, log-uniform on `[T/8 * 2^{-levels}, T/8]`, uniform on `(T/8, T]`,
/// and every interval then split into `substeps` equal parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeSchedule {
    pub levels: u32,
    pub per_octave: u32,
    pub uniform_steps: usize,
    pub substeps: usize,
}

impl Default for TimeSchedule {
    fn default() -> Self {
        Self {
            levels: 10,
            per_octave: 2,
            uniform_steps: 28,
            substeps: 1,
        }
    }
}

impl TimeSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.per_octave == 0 || self.uniform_steps == 0 || self.substeps == 0 {
            return Err(Error::InvalidArgument(format!("invalid time schedule {self:?}")));
        }
        Ok(())
    }

    pub fn times(&self, horizon: f64) -> Vec<f64> {
        let knee = horizon / 8.0;
        let mut base = vec![0.0];
        base.extend(geometric_times(knee, self.levels, self.per_octave));
        let n = self.uniform_steps;
        base.extend((1..=n).map(|i| knee + (horizon - knee) * i as f64 / n as f64));
        let m = self.substeps;
        let mut out = vec![0.0];
        for w in base.windows(2) {
            for s in 1..=m {
                out.push(w[0] + (w[1] - w[0]) * s as f64 / m as f64);
            }
        }
        *out.last_mut().expect("non-empty") = horizon;
        out
    }

    /// The same schedule with twice as many samples (every old sample is kept).
    pub fn refined(&self) -> Self {
        Self {
            substeps: self.substeps * 2,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub horizon: f64,
    pub schedule: TimeSchedule,
    pub picard: PicardSettings,
    pub quadrature: QuadratureKind,
    /// `p` of the Kato norm `sup_t t^{(1 - d/p)/2} ||u(t)||_{L^p}` used as `X`.
    pub kato_p: f64,
    /// Random probes used to measure `gamma` and `||L||`; zero skips the measurement.
    pub probes: usize,
    pub probe_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            schedule: TimeSchedule::default(),
            picard: PicardSettings::default(),
            quadrature: QuadratureKind::ExactExponential,
            kato_p: 4.0,
            probes: 20,
            probe_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        self.schedule.validate()?;
        self.picard.validate()?;
        if !(self.kato_p >= 1.0) {
            return Err(Error::InvalidArgument(format!("Kato exponent must be >= 1, got {}", self.kato_p)));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.schedule.times(self.horizon)
    }

    pub fn scheme(&self) -> QuadratureScheme {
        QuadratureScheme {
            kind: self.quadrature,
            substeps: 1,
            error_estimate: false,
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..*self }
    }
}

type Physical = Vec<Vec<f64>>;

/// Time samples of a vector field, the Picard state.
pub type Samples = Vec<SpectralField>;

/// The discretized mild problem.
pub struct MildProblem {
    grid: Grid,
    times: Vec<f64>,
    seed: Samples,
    mollifier: Option<Vec<f64>>,
    a: Option<Vec<Physical>>,
    b: Option<Vec<Physical>>,
    scheme: QuadratureScheme,
    kato_weights: Vec<f64>,
    kato_p: f64,
}

fn check_initial(u0: &SpectralField) -> Result<()> {
    u0.require_rank(Rank::Vector)?;
    let div = divergence_residual(u0)?;
    if div > 1e-10 {
        return Err(Error::NotDivergenceFree(div));
    }
    Ok(())
}

fn resample(traj: &Trajectory, times: &[f64], grid: &Grid) -> Result<Vec<Physical>> {
    if traj.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if traj.rank() != Rank::Vector {
        return Err(Error::RankMismatch {
            expected: "vector".into(),
            found: format!("{:?}", traj.rank()),
        });
    }
    if traj.times() == times {
        return Ok(traj.fields().iter().map(|f| f.to_physical()).collect());
    }
    times
        .iter()
        .map(|&t| Ok(traj.interpolate(t)?.to_physical()))
        .collect()
}

impl MildProblem {
    /// `u = e^{t Delta} u0 - B(u, u)`.
    pub fn nse(u0: &SpectralField, config: &SolverConfig) -> Result<Self> {
        Self::build(u0, None, None, None, config)
    }

    /// `w = e^{t Delta} w0 - B(w, w) - B(w, V) - B(V, w)` for a given solution `V`.
    pub fn perturbed(w0: &SpectralField, background: &Trajectory, config: &SolverConfig) -> Result<Self> {
        if background.horizon() < config.horizon * (1.0 - 1e-12) {
            return Err(Error::CoverageGap {
                requested: config.horizon,
                last: background.horizon(),
            });
        }
        Self::build(w0, None, Some(background), Some(background), config)
    }

    /// Mollified advecting factor plus the linear terms `a (x) U + U (x) b`; `b` must be
    /// divergence-free.
    pub fn mollified(
        u0: &SpectralField,
        a: Option<&Trajectory>,
        b: Option<&Trajectory>,
        mollifier: &Mollifier,
        config: &SolverConfig,
    ) -> Result<Self> {
        if let Some(b) = b {
            for f in b.fields() {
                let div = divergence_residual(f)?;
                if div > 1e-10 {
                    return Err(Error::NotDivergenceFree(div));
                }
            }
        }
        Self::build(u0, Some(mollifier), a, b, config)
    }

    fn build(
        u0: &SpectralField,
        mollifier: Option<&Mollifier>,
        a: Option<&Trajectory>,
        b: Option<&Trajectory>,
        config: &SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        check_initial(u0)?;
        let grid = u0.grid().clone();
        let times = config.times();
        let seed = times.iter().map(|&t| heat_evolve(u0, t)).collect::<Result<Vec<_>>>()?;
        let s = critical_exponent(grid.dim(), config.kato_p);
        let kato_weights = times.iter().map(|&t| if t > 0.0 { t.powf(-s / 2.0) } else { 0.0 }).collect();
        let mollifier = mollifier.map(|m| m.symbol_table(&grid)).transpose()?;
        let a = a.map(|t| resample(t, &times, &grid)).transpose()?;
        let b = b.map(|t| resample(t, &times, &grid)).transpose()?;
        Ok(Self {
            grid,
            times,
            seed,
            mollifier,
            a,
            b,
            scheme: config.scheme(),
            kato_weights,
            kato_p: config.kato_p,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// The free evolution `e^{t Delta} u0` at every sample.
    pub fn heat_part(&self) -> &Samples {
        &self.seed
    }

    fn advecting(&self, x: &SpectralField) -> SpectralField {
        match &self.mollifier {
            Some(t) => apply_table(x, t),
            None => x.clone(),
        }
    }

    /// Dealiased `sum_pairs v (x) w` at one sample, from physical values.
    fn tensor(&self, pairs: &[(&Physical, &Physical)]) -> Result<SpectralField> {
        let d = self.grid.dim();
        let len = self.grid.len();
        let mut vals = vec![vec![0.0; len]; d * d];
        for (v, w) in pairs {
            for i in 0..d {
                for j in 0..d {
                    let out = &mut vals[i * d + j];
                    for ((o, x), y) in out.iter_mut().zip(&v[i]).zip(&w[j]) {
                        *o += x * y;
                    }
                }
            }
        }
        Ok(dealias(&SpectralField::from_physical(&self.grid, Rank::Matrix, &vals)?))
    }

    /// Tensor `x (x) (x)_rho + a (x) x + x (x) b` at sample `n`, optionally without
    /// the quadratic or the linear part.
    fn full_tensor(&self, n: usize, x: &SpectralField, quadratic: bool, linear: bool) -> Result<SpectralField> {
        let px = x.to_physical();
        let pm = if quadratic && self.mollifier.is_some() {
            Some(self.advecting(x).to_physical())
        } else {
            None
        };
        let mut pairs: Vec<(&Physical, &Physical)> = Vec::new();
        if quadratic {
            pairs.push((&px, pm.as_ref().unwrap_or(&px)));
        }
        if linear {
            if let Some(a) = &self.a {
                pairs.push((&a[n], &px));
            }
            if let Some(b) = &self.b {
                pairs.push((&px, &b[n]));
            }
        }
        self.tensor(&pairs)
    }

    fn duhamel(&self, tensors: &[SpectralField]) -> Result<Samples> {
        let sources = tensors.iter().map(leray_divergence).collect::<Result<Vec<_>>>()?;
        duhamel_from_sources(&self.times, &sources, &self.scheme)
    }

    /// `B(x, y)(t) = int_0^t e^{(t-s) Delta} P div(x (x) (y)_rho) ds`.
    pub fn bilinear(&self, x: &Samples, y: &Samples) -> Result<Samples> {
        let tensors = x
            .iter()
            .zip(y)
            .map(|(u, v)| {
                let pu = u.to_physical();
                let pv = self.advecting(v).to_physical();
                self.tensor(&[(&pu, &pv)])
            })
            .collect::<Result<Vec<_>>>()?;
        self.duhamel(&tensors)
    }

    /// `int_0^t e^{(t-s) Delta} P div(a (x) x + x (x) b) ds` (zero without `a`, `b`).
    pub fn linear(&self, x: &Samples) -> Result<Samples> {
        let tensors = x
            .iter()
            .enumerate()
            .map(|(n, u)| self.full_tensor(n, u, false, true))
            .collect::<Result<Vec<_>>>()?;
        self.duhamel(&tensors)
    }

    pub fn has_linear_part(&self) -> bool {
        self.a.is_some() || self.b.is_some()
    }

    /// `t^{(1 - d/p)/2} ||x(t)||_{L^p}` at every sample (zero at `t = 0`).
    pub fn kato_profile(&self, x: &Samples) -> Vec<f64> {
        x.iter()
            .zip(&self.kato_weights)
            .map(|(u, &w)| if w > 0.0 { w * u.lp_norm(self.kato_p) } else { 0.0 })
            .collect()
    }

    /// Kato norm `sup_t t^{(1 - d/p)/2} ||x(t)||_{L^p}` over the samples.
    pub fn kato(&self, x: &Samples) -> f64 {
        self.kato_profile(x).into_iter().fold(0.0, f64::max)
    }

    /// `sup_t ||x(t)||_{L^2}`.
    pub fn sup_l2(&self, x: &Samples) -> f64 {
        x.iter().map(|u| u.l2_norm()).fold(0.0, f64::max)
    }

    /// Heat flow of a random divergence-free field, normalized to unit `X` norm.
    pub(crate) fn probe(&self, rng: &mut ChaCha8Rng) -> Result<Samples> {
        let slope = rng.gen_range(0.0..2.0);
        let k_cut = rng.gen_range(1.0..(self.grid.n() as f64 / 3.0).max(2.0));
        let f = random_band_limited(&self.grid, Rank::Vector, rng.gen(), slope, k_cut, true);
        let x = self.times.iter().map(|&t| heat_evolve(&f, t)).collect::<Result<Vec<_>>>()?;
        Ok(normalized(self, x))
    }

    /// Randomized power-type estimates of `gamma` and `||L||` in the `X` norm: each
    /// probe is measured, then pushed once through the operator and measured again.
    pub fn estimate_bounds(&self, probes: usize, seed: u64) -> Result<OperatorBounds> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gamma: f64 = 0.0;
        let mut lin: f64 = 0.0;
        for _ in 0..probes {
            let x = self.probe(&mut rng)?;
            let y = self.probe(&mut rng)?;
            let bxy = self.bilinear(&x, &y)?;
            gamma = gamma.max(self.kato(&bxy));
            if self.kato(&bxy) > 0.0 {
                let y2 = normalized(self, bxy);
                gamma = gamma.max(self.kato(&self.bilinear(&x, &y2)?));
            }
            if self.has_linear_part() {
                let lx = self.linear(&x)?;
                lin = lin.max(self.kato(&lx));
                if self.kato(&lx) > 0.0 {
                    let x2 = normalized(self, lx);
                    lin = lin.max(self.kato(&self.linear(&x2)?));
                }
            }
        }
        Ok(OperatorBounds { gamma, linear_norm: lin })
    }

    /// Divergence-free check over samples: the largest relative residual.
    pub fn max_divergence(&self, x: &Samples) -> Result<f64> {
        x.iter().map(divergence_residual).try_fold(0.0f64, |m, d| Ok(m.max(d?)))
    }

    /// Integral-equation residual `||x - e^{t Delta} u0 + D[x]||_X` with the Duhamel
    /// term recomputed from fresh products through the trajectory-level Duhamel
    /// routine at doubled quadrature substeps.
    pub fn integral_residual(&self, x: &Samples) -> Result<f64> {
        let tensors = x
            .iter()
            .enumerate()
            .map(|(n, u)| self.full_tensor(n, u, true, true))
            .collect::<Result<Vec<_>>>()?;
        let forcing = Trajectory::new(self.times.clone(), tensors)?;
        let scheme = QuadratureScheme {
            kind: self.scheme.kind,
            substeps: 2 * self.scheme.substeps,
            error_estimate: false,
        };
        let d = duhamel_trajectory(&forcing, &scheme)?.trajectory;
        let mut worst: f64 = 0.0;
        for ((u, a), (dn, w)) in x.iter().zip(&self.seed).zip(d.fields().iter().zip(&self.kato_weights)) {
            if *w == 0.0 {
                continue;
            }
            let mut r = u.sub(a)?;
            r.axpy(1.0, dn);
            worst = worst.max(w * r.lp_norm(self.kato_p));
        }
        Ok(worst)
    }

    pub fn to_trajectory(&self, x: Samples) -> Result<Trajectory> {
        Trajectory::new(self.times.clone(), x)
    }
}

fn normalized(problem: &MildProblem, x: Samples) -> Samples {
    let n = problem.kato(&x);
    if n == 0.0 {
        x
    } else {
        x.into_iter().map(|f| f.scaled(1.0 / n)).collect()
    }
}

impl PicardProblem for MildProblem {
    type State = Samples;

    fn seed(&self) -> &Samples {
        &self.seed
    }

    fn apply(&self, x: &Samples) -> Result<Samples> {
        let tensors = x
            .iter()
            .enumerate()
            .map(|(n, u)| self.full_tensor(n, u, true, true))
            .collect::<Result<Vec<_>>>()?;
        let d = self.duhamel(&tensors)?;
        self.seed.iter().zip(d).map(|(a, dn)| a.sub(&dn)).collect()
    }

    fn norm(&self, x: &Samples) -> f64 {
        self.kato(x)
    }

    fn distance(&self, x: &Samples, y: &Samples) -> Result<f64> {
        let diff = x.iter().zip(y).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Ok(self.kato(&diff))
    }
}

/// A converged mild solution with its diagnostics.
#[derive(Clone, Debug)]
pub struct MildSolution {
    pub trajectory: Trajectory,
    pub report: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub picard: IterationSummary,
    /// [`MildProblem::integral_residual`] of the solution.
    pub integral_residual: f64,
    /// Largest relative divergence residual over samples.
    pub divergence: f64,
    /// `||e^{t Delta} u0||_X`.
    pub seed_norm: f64,
    pub solution_norm: f64,
    pub samples: usize,
}

/// Solve a discretized mild problem, measuring the operator constants first when
/// `config.probes > 0`.
pub fn solve_mild(problem: &MildProblem, config: &SolverConfig) -> Result<MildSolution> {
    let bounds = if config.probes > 0 {
        Some(problem.estimate_bounds(config.probes, config.probe_seed)?)
    } else {
        None
    };
    solve_mild_with(problem, &config.picard, bounds)
}

/// Solve with given (possibly absent) operator bounds.
pub fn solve_mild_with(problem: &MildProblem, settings: &PicardSettings, bounds: Option<OperatorBounds>) -> Result<MildSolution> {
    let FixedPointReport { solution, summary } = solve_picard(problem, settings, bounds)?;
    let integral_residual = problem.integral_residual(&solution)?;
    let divergence = problem.max_divergence(&solution)?;
    let seed_norm = problem.kato(problem.heat_part());
    let solution_norm = problem.kato(&solution);
    let samples = solution.len();
    Ok(MildSolution {
        trajectory: problem.to_trajectory(solution)?,
        report: SolveReport {
            picard: summary,
            integral_residual,
            divergence,
            seed_norm,
            solution_norm,
            samples,
        },
    })
}

/// Mild Navier-Stokes solution from divergence-free data.
pub fn mild_solve_nse(u0: &SpectralField, config: &SolverConfig) -> Result<MildSolution> {
    solve_mild(&MildProblem::nse(u0, config)?, config)
}

/// Perturbation `W` of a solution `V`, so that `W + V` solves the equation with data `w0 + V(0)`.
pub fn mild_solve_perturbed(w0: &SpectralField, background: &Trajectory, config: &SolverConfig) -> Result<MildSolution> {
    solve_mild(&MildProblem::perturbed(w0, background, config)?, config)
}

/// Energy bookkeeping of the mollified system:
/// `||U(t)||^2 + 2 int_0^t ||grad U||^2 = ||U(0)||^2 + 2 int_0^t int (a (x) U) : grad U`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `||U(t)||^2`.
    pub energy: Vec<f64>,
    /// `2 int_0^t ||grad U||^2`.
    pub dissipation: Vec<f64>,
    /// `2 int_0^t int (a (x) U) : grad U`.
    pub work: Vec<f64>,
    /// Absolute imbalance at each sample.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max_t (||U(t)||^2 + 2 int_0^t ||grad U||^2)`.
    pub scale: f64,
}

impl EnergyLedger {
    pub fn relative_residual(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.max_residual / self.scale
        }
    }
}

/// `int (a (x) u) : grad u dx = sum_ij int a_i u_j d_j u_i dx`.
fn work_density(grid: &Grid, a: &Physical, u: &SpectralField) -> Result<f64> {
    let d = grid.dim();
    let pu = u.to_physical();
    let gu = gradient(u)?.to_physical();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let g = &gu[i * d + j];
            for idx in 0..grid.len() {
                s += a[i][idx] * pu[j][idx] * g[idx];
            }
        }
    }
    Ok(s * grid.cell_volume())
}

/// Ledger of a trajectory solving the mollified system with linear coefficient `a`.
pub fn energy_ledger(traj: &Trajectory, a: Option<&Trajectory>) -> Result<EnergyLedger> {
    let grid = traj.grid().clone();
    let times = traj.times().to_vec();
    let energy: Vec<f64> = traj.fields().iter().map(|u| u.l2_norm().powi(2)).collect();
    let increments = crate::besov::time_norms::dissipation_increments(traj);
    let mut dissipation = vec![2.0 * times[0] * traj.fields()[0].grad_l2_sq()];
    for inc in &increments {
        dissipation.push(dissipation.last().expect("non-empty") + 2.0 * inc);
    }
    let mut work = vec![0.0; times.len()];
    if let Some(a) = a {
        let pa = resample(a, &times, &grid)?;
        let dens = traj
            .fields()
            .iter()
            .zip(&pa)
            .map(|(u, an)| work_density(&grid, an, u))
            .collect::<Result<Vec<_>>>()?;
        work[0] = 2.0 * times[0] * dens[0];
        for n in 1..times.len() {
            work[n] = work[n - 1] + (times[n] - times[n - 1]) * (dens[n] + dens[n - 1]);
        }
    }
    let residuals: Vec<f64> = (0..times.len())
        .map(|n| (energy[n] + dissipation[n] - energy[0] - work[n]).abs())
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let scale = (0..times.len()).map(|n| energy[n] + dissipation[n]).fold(0.0, f64::max);
    Ok(EnergyLedger {
        times,
        energy,
        dissipation,
        work,
        residuals,
        max_residual,
        scale,
    })
}

/// Solve the mollified system and return its energy ledger.
pub fn mollified_solve(
    u0: &SpectralField,
    a: Option<&Trajectory>,
    b: Option<&Trajectory>,
    rho: f64,
    config: &SolverConfig,
) -> Result<(MildSolution, EnergyLedger)> {
    let m = Mollifier::new(rho)?;
    let problem = MildProblem::mollified(u0, a, b, &m, config)?;
    let sol = solve_mild(&problem, config)?;
    let ledger = energy_ledger(&sol.trajectory, a)?;
    Ok((sol, ledger))
}
