//! Experiment runner: build initial data from a recipe, solve, evaluate diagnostics and
//! write an archive, `report.json` and one CSV per series.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::monitors::{DiagnosticSet, DiagnosticsReport, EndTimeSource};
use crate::besov::DyadicPartition;
use crate::calderon::{split, SplitConfig, SplitSummary};
use crate::error::{Error, Result};
use crate::mild::archive::write_archive;
use crate::mild::existence::{continue_solution, ContinuationOutcome, ContinuationReport, ContinuationSettings};
use crate::mild::{mild_solve_nse, mild_solve_perturbed, mollified_solve, SolverConfig};
use crate::spectral::random::{abc_flow, random_velocity, taylor_green};
use crate::spectral::{clf1, divergence_residual, Grid, SpectralField};
use crate::trajectory::Trajectory;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_box")]
    pub box_length: f64,
}

fn default_box() -> f64 {
    2.0 * PI
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.box_length)
    }
}

/// Initial data. `amplitude` of the random family is the largest Fourier coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DataRecipe {
    TaylorGreen {
        #[serde(default = "one")]
        amplitude: f64,
    },
    Abc {
        #[serde(default = "unit_coeffs")]
        coeffs: [f64; 3],
        #[serde(default = "one_i32")]
        wavenumber: i32,
    },
    Random {
        seed: u64,
        /// `|u_hat(k)| ~ |k|^{-slope}`.
        #[serde(default = "one")]
        slope: f64,
        /// Largest kept `|k|` in index units; absent keeps the dealiased band.
        #[serde(default)]
        k_cut: Option<f64>,
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn one_i32() -> i32 {
    1
}

fn unit_coeffs() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverChoice {
    Direct,
    /// Split the data, solve for the small part `V`, then for the perturbation `W`.
    SplitPerturbed { p: f64, q: f64, lambda: f64 },
    Mollified { rho: f64 },
}

/// Continuation of the direct solver; the total horizon is the experiment horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSpec {
    pub initial_step: f64,
    pub step_floor: f64,
    #[serde(default = "default_segments")]
    pub max_segments: usize,
}

fn default_segments() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub clab_config: u32,
    /// Required unless the data comes from a file, which carries its own grid.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub data: DataRecipe,
    pub horizon: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    /// Solver settings; its `horizon` is replaced by the experiment horizon.
    #[serde(default)]
    pub settings: SolverConfig,
    #[serde(default)]
    pub continuation: Option<ContinuationSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticSet,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_solver() -> SolverChoice {
    SolverChoice::Direct
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.clab_config != CONFIG_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                c.clab_config
            )));
        }
        Ok(c)
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.settings.with_horizon(self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clab_config != CONFIG_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported config version {}", self.clab_config)));
        }
        self.solver_config().validate()?;
        if self.continuation.is_some() && !matches!(self.solver, SolverChoice::Direct) {
            return Err(Error::InvalidArgument("continuation is only available for the direct solver".into()));
        }
        if self.grid.is_none() && !matches!(self.data, DataRecipe::File { .. }) {
            return Err(Error::InvalidArgument("a grid is required for analytic and random data".into()));
        }
        Ok(())
    }

    /// Resolve the data recipe; file paths are taken relative to `base`.
    pub fn initial_data(&self, base: &Path) -> Result<SpectralField> {
        let grid = self.grid.map(|g| g.build()).transpose()?;
        let need_grid = || grid.clone().ok_or_else(|| Error::InvalidArgument("missing grid".into()));
        let u = match &self.data {
            DataRecipe::TaylorGreen { amplitude } => taylor_green(&need_grid()?, *amplitude),
            DataRecipe::Abc { coeffs, wavenumber } => abc_flow(&need_grid()?, *coeffs, *wavenumber)?,
            DataRecipe::Random {
                seed,
                slope,
                k_cut,
                amplitude,
            } => {
                let u = random_velocity(&need_grid()?, *seed, *slope, k_cut.unwrap_or(f64::INFINITY), 1.0);
                let m = u.max_abs_coeff();
                if m == 0.0 {
                    u
                } else {
                    u.scaled(amplitude / m)
                }
            }
            DataRecipe::File { path } => {
                let u = clf1::read(&base.join(path))?;
                if let Some(g) = &grid {
                    if u.grid() != g {
                        return Err(Error::GridMismatch);
                    }
                }
                u
            }
        };
        Ok(u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunOutcome {
    Completed,
    BlowupSuspected,
}

/// A residual check; a failed gate means the output should not be trusted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub outcome: RunOutcome,
    /// How `T_end` of the compensated-norm monitor was chosen.
    pub t_end_note: &'static str,
    pub picard_iterations: Vec<usize>,
    pub integral_residual: f64,
    pub divergence: f64,
    pub continuation: Option<ContinuationReport>,
    pub split: Option<SplitSummary>,
    pub gates: Vec<Gate>,
    pub diagnostics: DiagnosticsReport,
}

impl ExperimentReport {
    pub fn gates_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

const T_END_NOTE: &str = "T_end is the configured horizon when no blow-up is detected and the halt \
time when continuation gives up; the true maximal time is not observable";

/// Energy slack may dip below zero by this fraction of the energy scale.
pub const ENERGY_GATE: f64 = 1e-6;

pub struct ExperimentRun {
    pub trajectory: Trajectory,
    pub report: ExperimentReport,
}

/// Solve and diagnose without touching the filesystem (except to read file data).
pub fn execute(config: &ExperimentConfig, base: &Path) -> Result<ExperimentRun> {
    config.validate()?;
    let u0 = config.initial_data(base)?;
    config.diagnostics.validate(u0.grid().dim())?;
    let div0 = divergence_residual(&u0)?;
    if div0 > 1e-10 {
        return Err(Error::NotDivergenceFree(div0));
    }
    let sc = config.solver_config();
    let tol = sc.picard.tolerance;
    let mut continuation = None;
    let mut split_summary = None;
    let mut iterations = Vec::new();
    let mut residual: f64 = 0.0;
    let mut divergence: f64 = 0.0;
    let mut outcome = RunOutcome::Completed;
    let mut t_end = config.horizon;
    let trajectory = match config.solver {
        SolverChoice::Direct => match &config.continuation {
            None => {
                let sol = mild_solve_nse(&u0, &sc)?;
                iterations.push(sol.report.picard.iterations);
                residual = sol.report.integral_residual;
                divergence = sol.report.divergence;
                sol.trajectory
            }
            Some(spec) => {
                let settings = ContinuationSettings {
                    total_horizon: config.horizon,
                    initial_step: spec.initial_step,
                    step_floor: spec.step_floor,
                    max_segments: spec.max_segments,
                };
                let (traj, rep) = continue_solution(&u0, &sc, &settings)?;
                for s in &rep.segments {
                    iterations.push(s.iterations);
                    residual = residual.max(s.integral_residual);
                }
                divergence = traj
                    .fields()
                    .iter()
                    .map(divergence_residual)
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                match rep.outcome {
                    ContinuationOutcome::Completed => {}
                    ContinuationOutcome::BlowupSuspected => {
                        outcome = RunOutcome::BlowupSuspected;
                        t_end = rep.reached;
                    }
                    ContinuationOutcome::SegmentLimit => {
                        return Err(Error::InvalidArgument(format!(
                            "continuation used all {} segments before reaching the horizon (reached {})",
                            spec.max_segments, rep.reached
                        )))
                    }
                }
                continuation = Some(rep);
                traj
            }
        },
        SolverChoice::SplitPerturbed { p, q, lambda } => {
            let partition = DyadicPartition::for_grid(u0.grid())?;
            let parts = split(&u0, &SplitConfig::new(u0.grid().dim(), p, q, lambda)?, &partition)?;
            split_summary = Some(parts.summary);
            let v = mild_solve_nse(&parts.small, &sc)?;
            let w = mild_solve_perturbed(&parts.large, &v.trajectory, &sc)?;
            for s in [&v, &w] {
                iterations.push(s.report.picard.iterations);
                residual = residual.max(s.report.integral_residual);
                divergence = divergence.max(s.report.divergence);
            }
            let sum = w
                .trajectory
                .fields()
                .iter()
                .zip(v.trajectory.fields())
                .map(|(a, b)| a.add(b))
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(w.trajectory.times().to_vec(), sum)?
        }
        SolverChoice::Mollified { rho } => {
            let (sol, _) = mollified_solve(&u0, None, None, rho, &sc)?;
            iterations.push(sol.report.picard.iterations);
            residual = sol.report.integral_residual;
            divergence = sol.report.divergence;
            sol.trajectory
        }
    };
    let source = match outcome {
        RunOutcome::Completed => EndTimeSource::Horizon,
        RunOutcome::BlowupSuspected => EndTimeSource::ContinuationHalt,
    };
    // a split run reports u = W + V, which obeys the unperturbed energy balance
    let diagnostics = config.diagnostics.evaluate(&trajectory, None, t_end, source)?;
    let mut gates = vec![
        Gate::at_most("integral_residual", residual, 10.0 * tol),
        Gate::at_most("divergence", divergence, 1e-12),
    ];
    if let (Some(slack), Some(scale)) = (diagnostics.min_energy_slack, diagnostics.energy_scale) {
        gates.push(Gate::at_most("negative_energy_slack", (-slack).max(0.0), ENERGY_GATE * scale));
    }
    Ok(ExperimentRun {
        trajectory,
        report: ExperimentReport {
            config: config.clone(),
            outcome,
            t_end_note: T_END_NOTE,
            picard_iterations: iterations,
            integral_residual: residual,
            divergence,
            continuation,
            split: split_summary,
            gates,
            diagnostics,
        },
    })
}

pub const REPORT_NAME: &str = "report.json";
pub const ARCHIVE_DIR: &str = "trajectory";
pub const SERIES_DIR: &str = "series";

/// [`execute`], then write `<out>/trajectory/`, `<out>/report.json` and
/// `<out>/series/<name>.csv`. `out` overrides the configured output directory.
pub fn run_experiment(config: &ExperimentConfig, base: &Path, out: Option<&Path>) -> Result<ExperimentRun> {
    let out: PathBuf = match (out, &config.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => return Err(Error::InvalidArgument("no output directory configured".into())),
    };
    let run = execute(config, base)?;
    write_outputs(&out, &run)?;
    Ok(run)
}

pub fn write_outputs(out: &Path, run: &ExperimentRun) -> Result<()> {
    let r = &run.report;
    let residuals = serde_json::json!({
        "integral_residual": r.integral_residual,
        "divergence": r.divergence,
        "min_energy_slack": r.diagnostics.min_energy_slack,
    });
    write_archive(
        &out.join(ARCHIVE_DIR),
        &run.trajectory,
        serde_json::to_value(&r.config)?,
        residuals,
        r.picard_iterations.iter().map(|&k| k as f64).collect(),
    )?;
    let series_dir = out.join(SERIES_DIR);
    std::fs::create_dir_all(&series_dir)?;
    for s in &r.diagnostics.series {
        clf1::write_atomic(
            &series_dir.join(format!("{}.csv", s.name)),
            s.to_csv(&r.diagnostics.times).as_bytes(),
        )?;
    }
    clf1::write_atomic(&out.join(REPORT_NAME), &serde_json::to_vec_pretty(r)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mild::TimeSchedule;

    fn tg_config(n: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"clab_config": 1, "grid": {{"dim": 2, "n": {n}}}, "data": {{"family": "taylor-green"}},
                "horizon": 1.0, "settings": {{"probes": 0}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn taylor_green_run_completes_and_decays() {
        let c = tg_config(32);
        let dir = tempfile::tempdir().unwrap();
        let run = run_experiment(&c, Path::new("."), Some(dir.path())).unwrap();
        let r = &run.report;
        assert_eq!(r.outcome, RunOutcome::Completed);
        assert!(r.gates_passed(), "{:?}", r.gates);
        let leray = r.diagnostics.get("leray_4").unwrap();
        assert!(leray.values.last().unwrap() < &leray.values[0]);
        let energy = r.diagnostics.get("energy_residual").unwrap();
        assert!(energy.values.iter().all(|&v| v < 1e-6 * r.diagnostics.energy_scale.unwrap()));
        for name in c.diagnostics.names() {
            assert!(dir.path().join(SERIES_DIR).join(format!("{name}.csv")).exists());
        }
        let (traj, _) = crate::mild::archive::read_archive(&dir.path().join(ARCHIVE_DIR)).unwrap();
        assert_eq!(traj.times(), &r.diagnostics.times[..]);
    }

    #[test]
    fn zero_data_gives_zero_series() {
        let mut c = tg_config(16);
        c.data = DataRecipe::TaylorGreen { amplitude: 0.0 };
        let run = execute(&c, Path::new(".")).unwrap();
        for s in &run.report.diagnostics.series {
            assert!(s.values.iter().all(|&v| v == 0.0), "{}", s.name);
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let c = ExperimentConfig {
            grid: Some(GridSpec { dim: 3, n: 8, box_length: 2.0 * PI }),
            data: DataRecipe::Random { seed: 3, slope: 1.0, k_cut: None, amplitude: 1e-3 },
            horizon: 0.5,
            settings: SolverConfig {
                schedule: TimeSchedule { levels: 3, per_octave: 1, uniform_steps: 6, substeps: 1 },
                probes: 2,
                ..Default::default()
            },
            ..tg_config(8)
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&c, Path::new("."), Some(a.path())).unwrap();
        run_experiment(&c, Path::new("."), Some(b.path())).unwrap();
        for rel in [REPORT_NAME, "series/lp_2.csv", "trajectory/manifest.json", "trajectory/sample_00003.clf1"] {
            assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::from_json(r#"{"clab_config": 2, "data": {"family": "taylor-green"}, "horizon": 1}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"clab_config": 1, "data": {"family": "taylor-green"}, "horizon": 1}"#).unwrap();
        assert!(c.validate().is_err());
        let mut c = tg_config(8);
        c.solver = SolverChoice::Mollified { rho: 0.5 };
        c.continuation = Some(ContinuationSpec { initial_step: 0.5, step_floor: 0.01, max_segments: 4 });
        assert!(c.validate().is_err());
    }
}
